"""Ring-system scaffolds for leakage-free dataset splitting."""

from __future__ import annotations

from gode.chem.canon import canonical_smiles
from gode.chem.smiles import AtomNode, BondEdge, EMPTY_GRAPH, MoleculeGraph


def murcko_scaffold(g: MoleculeGraph) -> MoleculeGraph:
    """Iteratively prune degree-1 atoms; rings plus linkers remain.

    Acyclic molecules collapse to the empty scaffold sentinel (a graph
    with no atoms), which buckets them into one shared scaffold group.
    """
    keep = set(range(g.num_atoms))
    degree = {i: len(g.neighbors(i)) for i in keep}
    changed = True
    while changed:
        changed = False
        for i in sorted(keep):
            if degree[i] <= 1:
                keep.discard(i)
                for j, _ in g.neighbors(i):
                    if j in keep:
                        degree[j] -= 1
                degree[i] = 0
                changed = True
    if not keep:
        return EMPTY_GRAPH

    remap = {old: new for new, old in enumerate(sorted(keep))}
    bonds = []
    for b in g.bonds:
        i, j = b.endpoints
        if i in keep and j in keep:
            bonds.append(BondEdge((remap[i], remap[j]), b.order))
    atoms = []
    for old in sorted(keep):
        a = g.atoms[old]
        new_degree = sum(1 for j, _ in g.neighbors(old) if j in keep)
        atoms.append(
            AtomNode(
                element=a.element,
                formal_charge=a.formal_charge,
                aromatic=a.aromatic,
                explicit_h=a.explicit_h + (a.degree - new_degree),
                degree=new_degree,
            )
        )
    scaffold = MoleculeGraph(
        atoms=tuple(atoms),
        bonds=tuple(bonds),
        source_smiles="",
        component_count=_components(len(atoms), bonds),
    )
    return scaffold


def _components(n_atoms: int, bonds: list[BondEdge]) -> int:
    if n_atoms == 0:
        return 0
    parent = list(range(n_atoms))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for b in bonds:
        ri, rj = find(b.endpoints[0]), find(b.endpoints[1])
        if ri != rj:
            parent[ri] = rj
    return len({find(i) for i in range(n_atoms)})


def scaffold_key(g: MoleculeGraph) -> str:
    """Grouping key: canonical SMILES of the scaffold, '' for acyclic."""
    scaffold = murcko_scaffold(g)
    if scaffold.num_atoms == 0:
        return ""
    return canonical_smiles(scaffold)
