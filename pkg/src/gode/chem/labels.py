"""Atom context labels and fixed-length descriptor vectors."""

from __future__ import annotations

from collections import Counter

import numpy as np

from gode.chem.motifs import MOTIF_NAMES, detect_motifs
from gode.chem.smiles import BOND_ORDERS, MoleculeGraph, ORGANIC_SUBSET

DESCRIPTOR_LENGTH_DEFAULT = 200

# Approximate atomic masses for the supported elements.
_ATOMIC_MASS = {
    "B": 10.811, "C": 12.011, "N": 14.007, "O": 15.999, "P": 30.974,
    "S": 32.06, "F": 18.998, "Cl": 35.45, "Br": 79.904, "I": 126.904,
}
_H_MASS = 1.008

_MAX_DEGREE_BIN = 5


class DescriptorLengthError(ValueError):
    """Requested descriptor length is shorter than the motif library."""


def context_label(g: MoleculeGraph, atom_index: int) -> str:
    """Key for an atom's 1-hop environment.

    Format: ``<element>_<neighborSymbol-bondOrder:count,...>`` with entries
    sorted lexicographically; aromatic atoms use their lowercase symbol.
    Automorphic atoms therefore receive identical keys.
    """
    if atom_index < 0 or atom_index >= g.num_atoms:
        raise IndexError(f"atom index {atom_index} out of range")
    atom = g.atoms[atom_index]
    counts = Counter(
        f"{g.atoms[j].symbol()}-{order}" for j, order in g.neighbors(atom_index)
    )
    entries = ",".join(f"{key}:{count}" for key, count in sorted(counts.items()))
    return f"{atom.symbol()}_{entries}"


def ring_counts(g: MoleculeGraph) -> tuple[int, int]:
    """(independent cycle count, independent aromatic cycle count)."""
    total = len(g.bonds) - g.num_atoms + g.component_count
    aromatic_bonds = [b for b in g.bonds if b.order == "aromatic"]
    aromatic_atoms = {i for b in aromatic_bonds for i in b.endpoints}
    if not aromatic_atoms:
        return total, 0
    index = {atom: k for k, atom in enumerate(sorted(aromatic_atoms))}
    parent = list(range(len(index)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = len(index)
    for b in aromatic_bonds:
        ri, rj = find(index[b.endpoints[0]]), find(index[b.endpoints[1]])
        if ri != rj:
            parent[ri] = rj
            components -= 1
    aromatic_cycles = len(aromatic_bonds) - len(index) + components
    return total, aromatic_cycles


def descriptor_names(length: int = DESCRIPTOR_LENGTH_DEFAULT) -> list[str]:
    names = [f"count_{el}" for el in ORGANIC_SUBSET]
    names += ["ring_count", "aromatic_ring_count"]
    names += [f"bonds_{order}" for order in BOND_ORDERS]
    names += [f"degree_{d}" for d in range(_MAX_DEGREE_BIN + 1)]
    names += ["mol_weight", "heteroatom_fraction"]
    names += [f"motif_{name}" for name in MOTIF_NAMES]
    names += [f"pad_{k}" for k in range(len(names), length)]
    return names[:length]


def descriptor_features(
    g: MoleculeGraph, length: int = DESCRIPTOR_LENGTH_DEFAULT
) -> np.ndarray:
    """Deterministic real-valued descriptor vector of the requested length.

    Layout: element counts, ring count, aromatic-ring count, bond-order
    counts, degree histogram, approximate molecular weight, heteroatom
    fraction, motif bits; zero-padded (or truncated) to ``length``.
    """
    if length < len(MOTIF_NAMES):
        raise DescriptorLengthError(
            f"length {length} is below the motif-library size {len(MOTIF_NAMES)}"
        )
    values: list[float] = []
    element_counts = Counter(a.element for a in g.atoms)
    values += [float(element_counts.get(el, 0)) for el in ORGANIC_SUBSET]
    rings, aromatic_rings = ring_counts(g)
    values += [float(rings), float(aromatic_rings)]
    bond_counts = g.bond_order_counts()
    values += [float(bond_counts[order]) for order in BOND_ORDERS]
    degree_hist = [0.0] * (_MAX_DEGREE_BIN + 1)
    for atom in g.atoms:
        degree_hist[min(atom.degree, _MAX_DEGREE_BIN)] += 1.0
    values += degree_hist
    weight = sum(_ATOMIC_MASS[a.element] + _H_MASS * a.explicit_h for a in g.atoms)
    values.append(weight)
    heavy = g.num_atoms
    hetero = sum(1 for a in g.atoms if a.element != "C")
    values.append(hetero / heavy if heavy else 0.0)
    values += [float(bit) for bit in detect_motifs(g).bits]

    out = np.zeros(length, dtype=np.float64)
    usable = min(length, len(values))
    out[:usable] = values[:usable]
    return out
