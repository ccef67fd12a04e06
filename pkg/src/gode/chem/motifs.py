"""Functional-group motif detection by labeled-subgraph matching.

The library ships sixteen named motifs. Each motif is one or more small
pattern graphs; a motif bit is set when any of its patterns has at least
one match in the molecule (injective mapping, pattern bonds must exist
with a compatible order; extra molecule bonds between matched atoms are
allowed). Bits are independent: a carboxylic acid sets carboxyl,
carbonyl, and hydroxyl alike.
"""

from __future__ import annotations

from dataclasses import dataclass

from gode.chem.smiles import MoleculeGraph

LIBRARY_VERSION = "fg16-v1"


@dataclass(frozen=True)
class PatternAtom:
    elements: frozenset[str] | None = None  # None matches any element
    aromatic: bool | None = None
    min_h: int = 0


@dataclass(frozen=True)
class PatternBond:
    i: int
    j: int
    orders: frozenset[str] | None = None  # None matches any order


@dataclass(frozen=True)
class Pattern:
    atoms: tuple[PatternAtom, ...]
    bonds: tuple[PatternBond, ...]


@dataclass(frozen=True)
class MotifVector:
    bits: tuple[int, ...]
    library_version: str = LIBRARY_VERSION

    def __getitem__(self, name: str) -> int:
        return self.bits[MOTIF_NAMES.index(name)]

    def as_dict(self) -> dict[str, int]:
        return dict(zip(MOTIF_NAMES, self.bits))


def _a(elements=None, aromatic=None, min_h=0) -> PatternAtom:
    elems = frozenset(elements) if elements else None
    return PatternAtom(elems, aromatic, min_h)


def _b(i, j, orders=None) -> PatternBond:
    return PatternBond(i, j, frozenset(orders) if orders else None)


_SINGLE = ("single",)
_DOUBLE = ("double",)
_AROM = ("aromatic",)


def _ring_pattern(size: int) -> Pattern:
    atoms = tuple(_a(aromatic=True) for _ in range(size))
    bonds = tuple(_b(i, (i + 1) % size, _AROM) for i in range(size))
    return Pattern(atoms, bonds)


# Order of this list fixes the motif-bit positions.
MOTIF_LIBRARY: tuple[tuple[str, tuple[Pattern, ...]], ...] = (
    ("hydroxyl", (Pattern((_a({"O"}, False, min_h=1), _a({"C"})), (_b(0, 1, _SINGLE),)),)),
    ("carbonyl", (Pattern((_a({"C"}), _a({"O"}, False)), (_b(0, 1, _DOUBLE),)),)),
    (
        "carboxyl",
        (
            Pattern(
                (_a({"C"}), _a({"O"}, False), _a({"O"}, False, min_h=1)),
                (_b(0, 1, _DOUBLE), _b(0, 2, _SINGLE)),
            ),
        ),
    ),
    (
        "ester",
        (
            Pattern(
                (_a({"C"}), _a({"O"}, False), _a({"O"}, False), _a({"C"})),
                (_b(0, 1, _DOUBLE), _b(0, 2, _SINGLE), _b(2, 3, _SINGLE)),
            ),
        ),
    ),
    (
        "ether",
        (
            Pattern(
                (_a({"C"}), _a({"O"}, False), _a({"C"})),
                (_b(0, 1, _SINGLE), _b(1, 2, _SINGLE)),
            ),
        ),
    ),
    ("amine", (Pattern((_a({"N"}, False), _a({"C"})), (_b(0, 1, _SINGLE),)),)),
    (
        "amide",
        (
            Pattern(
                (_a({"C"}), _a({"O"}, False), _a({"N"}, False)),
                (_b(0, 1, _DOUBLE), _b(0, 2, _SINGLE)),
            ),
        ),
    ),
    (
        "nitro",
        (
            Pattern(
                (_a({"N"}), _a({"O"}, False), _a({"O"}, False)),
                (_b(0, 1, _DOUBLE), _b(0, 2, ("single", "double"))),
            ),
        ),
    ),
    ("nitrile", (Pattern((_a({"C"}), _a({"N"}, False)), (_b(0, 1, ("triple",)),)),)),
    ("thiol", (Pattern((_a({"S"}, False, min_h=1), _a({"C"})), (_b(0, 1, _SINGLE),)),)),
    (
        "sulfonyl",
        (
            Pattern(
                (_a({"S"}), _a({"O"}, False), _a({"O"}, False)),
                (_b(0, 1, _DOUBLE), _b(0, 2, _DOUBLE)),
            ),
        ),
    ),
    (
        "halide",
        (Pattern((_a({"F", "Cl", "Br", "I"}), _a({"C"})), (_b(0, 1, _SINGLE),)),),
    ),
    ("aromatic_ring", (_ring_pattern(6), _ring_pattern(5))),
    (
        "phenol",
        (
            Pattern(
                (_a({"O"}, False, min_h=1), _a({"C"}, True)),
                (_b(0, 1, _SINGLE),),
            ),
        ),
    ),
    (
        "aldehyde",
        (
            Pattern(
                (_a({"C"}, min_h=1), _a({"O"}, False)),
                (_b(0, 1, _DOUBLE),),
            ),
        ),
    ),
    (
        "ketone",
        (
            Pattern(
                (_a({"C"}), _a({"O"}, False), _a({"C"}), _a({"C"})),
                (_b(0, 1, _DOUBLE), _b(0, 2, _SINGLE), _b(0, 3, _SINGLE)),
            ),
        ),
    ),
)

MOTIF_NAMES: tuple[str, ...] = tuple(name for name, _ in MOTIF_LIBRARY)


def _atom_compatible(pattern_atom: PatternAtom, g: MoleculeGraph, index: int) -> bool:
    atom = g.atoms[index]
    if pattern_atom.elements is not None and atom.element not in pattern_atom.elements:
        return False
    if pattern_atom.aromatic is not None and atom.aromatic != pattern_atom.aromatic:
        return False
    if atom.explicit_h < pattern_atom.min_h:
        return False
    return True


def _match_pattern(pattern: Pattern, g: MoleculeGraph) -> bool:
    """Backtracking search for one injective pattern embedding."""
    n_pat = len(pattern.atoms)
    if n_pat == 0 or g.num_atoms < n_pat:
        return False

    # connect-order traversal: each atom after the first has a bond to an earlier atom
    adjacency: dict[int, list[PatternBond]] = {}
    for bond in pattern.bonds:
        adjacency.setdefault(bond.i, []).append(bond)
        adjacency.setdefault(bond.j, []).append(bond)

    order = [0]
    placed = {0}
    while len(order) < n_pat:
        for k in range(n_pat):
            if k in placed:
                continue
            if any((b.i in placed or b.j in placed) for b in adjacency.get(k, [])):
                order.append(k)
                placed.add(k)
                break
        else:  # disconnected pattern: should not happen in the shipped library
            raise ValueError("pattern graph must be connected")

    constraints: list[list[PatternBond]] = []
    for pos, k in enumerate(order):
        earlier = set(order[:pos])
        constraints.append(
            [b for b in adjacency.get(k, []) if (b.i if b.j == k else b.j) in earlier]
        )

    bond_lookup = {}
    for b in g.bonds:
        bond_lookup[b.endpoints] = b.order
        bond_lookup[(b.endpoints[1], b.endpoints[0])] = b.order

    assignment: dict[int, int] = {}
    used: set[int] = set()

    def extend(pos: int) -> bool:
        if pos == n_pat:
            return True
        k = order[pos]
        pattern_atom = pattern.atoms[k]
        for candidate in range(g.num_atoms):
            if candidate in used:
                continue
            if not _atom_compatible(pattern_atom, g, candidate):
                continue
            ok = True
            for b in constraints[pos]:
                other_k = b.i if b.j == k else b.j
                other_atom = assignment[other_k]
                real_order = bond_lookup.get((candidate, other_atom))
                if real_order is None or (
                    b.orders is not None and real_order not in b.orders
                ):
                    ok = False
                    break
            if not ok:
                continue
            assignment[k] = candidate
            used.add(candidate)
            if extend(pos + 1):
                return True
            used.discard(candidate)
            del assignment[k]
        return False

    return extend(0)


def detect_motifs(g: MoleculeGraph) -> MotifVector:
    """One bit per library motif; empty graphs yield the all-zero vector."""
    bits = tuple(
        int(any(_match_pattern(p, g) for p in patterns))
        for _, patterns in MOTIF_LIBRARY
    )
    return MotifVector(bits=bits)
