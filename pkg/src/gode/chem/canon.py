"""Deterministic serialization of molecule graphs back to SMILES.

Canonical atom ranks come from iterative neighborhood refinement with an
exhaustive (bounded) tie-break search, so isomorphic graphs serialize to
the same string for any molecule small enough that the search completes
within the branch budget. That covers scaffolds and test molecules by a
wide margin; pathological highly symmetric graphs past the budget fall
back to a deterministic-but-not-canonical labeling.
"""

from __future__ import annotations

from gode.chem.smiles import (
    DEFAULT_VALENCES,
    MoleculeGraph,
    ORGANIC_SUBSET,
    _ORDER_VALENCE,
)

_ORDER_INDEX = {"single": 0, "double": 1, "triple": 2, "aromatic": 3}
_ORDER_SYMBOL = {"single": "-", "double": "=", "triple": "#", "aromatic": ":"}


def _initial_invariants(g: MoleculeGraph) -> list[tuple]:
    return [
        (a.element, a.aromatic, a.formal_charge, a.explicit_h, a.degree)
        for a in g.atoms
    ]


def _refine(g: MoleculeGraph, ranks: list[int]) -> list[int]:
    """Weisfeiler-Lehman refinement of a rank assignment to a fixpoint."""
    n = g.num_atoms
    while True:
        signatures = []
        for i in range(n):
            nbr = sorted((_ORDER_INDEX[o], ranks[j]) for j, o in g.neighbors(i))
            signatures.append((ranks[i], tuple(nbr)))
        ordered = sorted(set(signatures))
        remap = {sig: r for r, sig in enumerate(ordered)}
        new_ranks = [remap[sig] for sig in signatures]
        if new_ranks == ranks:
            return ranks
        ranks = new_ranks


def _certificate(g: MoleculeGraph, order: list[int]) -> tuple:
    pos = {atom: k for k, atom in enumerate(order)}
    atoms = tuple(
        (a.element, a.aromatic, a.formal_charge, a.explicit_h)
        for a in (g.atoms[i] for i in order)
    )
    bonds = tuple(
        sorted(
            (min(pos[b.endpoints[0]], pos[b.endpoints[1]]),
             max(pos[b.endpoints[0]], pos[b.endpoints[1]]),
             _ORDER_INDEX[b.order])
            for b in g.bonds
        )
    )
    return (atoms, bonds)


def canonical_ranks(g: MoleculeGraph, max_leaves: int = 4096) -> list[int]:
    """Total order on atoms, invariant under atom relabeling (within budget)."""
    n = g.num_atoms
    if n == 0:
        return []
    base = _initial_invariants(g)
    ordered = sorted(set(base))
    remap = {inv: r for r, inv in enumerate(ordered)}
    ranks = _refine(g, [remap[inv] for inv in base])

    best: dict = {"cert": None, "order": None, "leaves": 0}

    def descend(current: list[int]) -> None:
        if best["leaves"] >= max_leaves:
            return
        groups: dict[int, list[int]] = {}
        for i, r in enumerate(current):
            groups.setdefault(r, []).append(i)
        tied = sorted((r for r, members in groups.items() if len(members) > 1))
        if not tied:
            best["leaves"] += 1
            order = sorted(range(n), key=lambda i: current[i])
            cert = _certificate(g, order)
            if best["cert"] is None or cert < best["cert"]:
                best["cert"] = cert
                best["order"] = order
            return
        rank = tied[0]
        for member in groups[rank]:
            trial = list(current)
            trial[member] = rank - 1  # individualize below the tied class
            ordered_vals = sorted(set(trial))
            dense = {v: k for k, v in enumerate(ordered_vals)}
            descend(_refine(g, [dense[v] for v in trial]))

    descend(ranks)
    order = best["order"]
    ranks_out = [0] * n
    for k, atom in enumerate(order):
        ranks_out[atom] = k
    return ranks_out


def _reparse_hydrogens(g: MoleculeGraph, index: int) -> int:
    """Hydrogen count the parser would infer for this atom written bare."""
    atom = g.atoms[index]
    orders = [o for _, o in g.neighbors(index)]
    valences = DEFAULT_VALENCES[atom.element]
    if atom.aromatic:
        used = sum(1 if o == "aromatic" else _ORDER_VALENCE[o] for o in orders)
        return max(0, valences[0] - used - 1)
    used = sum(_ORDER_VALENCE[o] for o in orders)
    for valence in valences:
        if used <= valence:
            return valence - used
    return -1


def _atom_token(g: MoleculeGraph, index: int) -> str:
    atom = g.atoms[index]
    symbol = atom.element.lower() if atom.aromatic else atom.element
    plain = (
        atom.element in ORGANIC_SUBSET
        and atom.formal_charge == 0
        and _reparse_hydrogens(g, index) == atom.explicit_h
    )
    if plain:
        return symbol
    token = "[" + symbol
    if atom.explicit_h == 1:
        token += "H"
    elif atom.explicit_h > 1:
        token += f"H{atom.explicit_h}"
    charge = atom.formal_charge
    if charge:
        sign = "+" if charge > 0 else "-"
        token += sign if abs(charge) == 1 else f"{sign}{abs(charge)}"
    return token + "]"


def _bond_token(g: MoleculeGraph, i: int, j: int, order: str) -> str:
    default = "aromatic" if g.atoms[i].aromatic and g.atoms[j].aromatic else "single"
    return "" if order == default else _ORDER_SYMBOL[order]


def write_smiles(g: MoleculeGraph, ranks: list[int] | None = None) -> str:
    """Serialize a graph to SMILES the parser will re-accept.

    Bond symbols and bracket atoms are emitted only where the parser's
    defaults would diverge (e.g. a single bond between two aromatic
    atoms, or a hydrogen count off the valence table).
    """
    n = g.num_atoms
    if n == 0:
        return ""
    if ranks is None:
        ranks = list(range(n))

    bond_order = {}
    for b in g.bonds:
        bond_order[b.endpoints] = b.order
        bond_order[(b.endpoints[1], b.endpoints[0])] = b.order

    visited = [False] * n
    ring_digit_at: dict[int, list[tuple[int, str]]] = {}
    free_digits = list(range(99, 0, -1))

    def sorted_neighbors(i: int) -> list[int]:
        return sorted((j for j, _ in g.neighbors(i)), key=lambda j: ranks[j])

    pieces: list[str] = []
    for root in sorted(range(n), key=lambda i: ranks[i]):
        if visited[root]:
            continue
        # iterative DFS emitting tokens; back edges become ring closures
        out: list[str] = []
        parent: dict[int, int] = {}
        opened: dict[tuple[int, int], int] = {}

        def emit_atom(i: int) -> None:
            out.append(_atom_token(g, i))
            for digit, bond_sym in ring_digit_at.get(i, ()):
                out.append(bond_sym + (str(digit) if digit < 10 else f"%{digit:02d}"))
            ring_digit_at.pop(i, None)

        # first pass: discover tree/back edges from this root
        tree_children: dict[int, list[int]] = {}
        back_edges: list[tuple[int, int]] = []
        seen_edge: set[tuple[int, int]] = set()
        visited[root] = True
        stack = [root]
        while stack:
            i = stack.pop()
            for j in reversed(sorted_neighbors(i)):
                key = (min(i, j), max(i, j))
                if key in seen_edge:
                    continue
                seen_edge.add(key)
                if visited[j]:
                    back_edges.append((i, j))
                else:
                    visited[j] = True
                    parent[j] = i
                    tree_children.setdefault(i, []).append(j)
                    stack.append(j)
        for i, children in tree_children.items():
            children.sort(key=lambda j: ranks[j])

        # allocate ring-closure digits: emitted at both endpoints
        for i, j in back_edges:
            digit = free_digits.pop()
            sym = _bond_token(g, i, j, bond_order[(i, j)])
            ring_digit_at.setdefault(i, []).append((digit, sym))
            ring_digit_at.setdefault(j, []).append((digit, ""))
            opened[(i, j)] = digit

        def walk(i: int) -> None:
            emit_atom(i)
            children = tree_children.get(i, [])
            for k, j in enumerate(children):
                sym = _bond_token(g, i, j, bond_order[(i, j)])
                last = k == len(children) - 1
                if not last:
                    out.append("(")
                out.append(sym)
                walk(j)
                if not last:
                    out.append(")")

        walk(root)
        for (i, j), digit in opened.items():
            free_digits.append(digit)
        free_digits.sort(reverse=True)
        pieces.append("".join(out))

    return ".".join(pieces)


def canonical_smiles(g: MoleculeGraph) -> str:
    """Canonical serialization; equal for isomorphic graphs (within budget)."""
    if g.num_atoms == 0:
        return ""
    return write_smiles(g, canonical_ranks(g))
