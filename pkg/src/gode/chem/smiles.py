"""SMILES parsing into immutable molecule graphs.

Supported grammar: organic-subset atoms (B, C, N, O, P, S, F, Cl, Br, I),
aromatic lowercase forms (b, c, n, o, p, s), bracket atoms with hydrogen
count and formal charge, branches, ring closures (digits and %nn), the
bond symbols ``- = # :``, and ``.`` component separators. Stereo markers
(``/ \\ @``) are accepted and discarded; isotopes and wildcards are
rejected. Aromaticity is taken from lowercase notation only; no
Kekule-to-aromatic inference is attempted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property


ORGANIC_SUBSET = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
AROMATIC_OK = frozenset("bcnops")

# Standard valences, smallest first; used to infer implicit hydrogens.
DEFAULT_VALENCES = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

BOND_ORDERS = ("single", "double", "triple", "aromatic")
BOND_SYMBOLS = {"-": "single", "=": "double", "#": "triple", ":": "aromatic"}
_ORDER_VALENCE = {"single": 1, "double": 2, "triple": 3}


class SmilesSyntaxError(ValueError):
    """Malformed SMILES; carries the offending character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (position {position})")
        self.position = position


class UnsupportedFeatureError(ValueError):
    """Grammar feature outside the supported subset (isotopes, wildcards, exotic elements)."""


class ValenceError(ValueError):
    """Explicit valence exceeds the standard valence table."""


@dataclass(frozen=True)
class AtomNode:
    element: str
    formal_charge: int = 0
    aromatic: bool = False
    explicit_h: int = 0
    degree: int = 0

    def symbol(self) -> str:
        """Element token as it appears in context labels: lowercase when aromatic."""
        return self.element.lower() if self.aromatic else self.element


@dataclass(frozen=True)
class BondEdge:
    endpoints: tuple[int, int]  # lower index first
    order: str


@dataclass(frozen=True)
class MoleculeGraph:
    atoms: tuple[AtomNode, ...]
    bonds: tuple[BondEdge, ...]
    source_smiles: str = ""
    component_count: int = 0

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, str], ...], ...]:
        adj: list[list[tuple[int, str]]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            i, j = bond.endpoints
            adj[i].append((j, bond.order))
            adj[j].append((i, bond.order))
        return tuple(tuple(entries) for entries in adj)

    def neighbors(self, index: int) -> tuple[tuple[int, str], ...]:
        return self.adjacency[index]

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    def bond_order_counts(self) -> dict[str, int]:
        counts = {order: 0 for order in BOND_ORDERS}
        for bond in self.bonds:
            counts[bond.order] += 1
        return counts


EMPTY_GRAPH = MoleculeGraph(atoms=(), bonds=(), source_smiles="", component_count=0)


class _Cursor:
    __slots__ = ("text", "pos")

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self) -> str:
        ch = self.text[self.pos]
        self.pos += 1
        return ch


def _parse_bracket_atom(cur: _Cursor) -> tuple[str, bool, int, int]:
    """Parse the body of a bracket atom; cursor sits just past '['.

    Returns (element, aromatic, charge, h_count).
    """
    start = cur.pos - 1
    if cur.peek().isdigit():
        raise UnsupportedFeatureError(f"isotope specification at position {cur.pos}")
    if cur.peek() == "*":
        raise UnsupportedFeatureError(f"wildcard atom at position {cur.pos}")

    aromatic = False
    element = ""
    two = cur.text[cur.pos : cur.pos + 2]
    if two in ("Cl", "Br"):
        element = two
        cur.pos += 2
    elif cur.peek() in "BCNOPSFI":
        element = cur.take()
    elif cur.peek() in AROMATIC_OK:
        element = cur.take().upper()
        aromatic = True
    elif cur.peek().isalpha():
        sym = cur.take()
        if cur.peek().islower():
            sym += cur.take()
        raise UnsupportedFeatureError(f"unsupported element '{sym}' at position {start}")
    else:
        raise SmilesSyntaxError("expected element symbol in bracket atom", cur.pos)

    while cur.peek() == "@":  # chirality: accepted, discarded
        cur.take()

    h_count = 0
    if cur.peek() == "H":
        cur.take()
        h_count = 1
        digits = ""
        while cur.peek().isdigit():
            digits += cur.take()
        if digits:
            h_count = int(digits)

    charge = 0
    if cur.peek() in "+-":
        sign = 1 if cur.take() == "+" else -1
        magnitude = 1
        digits = ""
        while cur.peek().isdigit():
            digits += cur.take()
        if digits:
            magnitude = int(digits)
        else:
            while cur.peek() in "+-" and (cur.peek() == "+") == (sign == 1):
                cur.take()
                magnitude += 1
        charge = sign * magnitude

    if cur.peek() != "]":
        raise SmilesSyntaxError("expected ']' closing bracket atom", cur.pos)
    cur.take()
    return element, aromatic, charge, h_count


class _AtomDraft:
    __slots__ = ("element", "aromatic", "charge", "h_count", "h_fixed")

    def __init__(self, element, aromatic, charge, h_count, h_fixed):
        self.element = element
        self.aromatic = aromatic
        self.charge = charge
        self.h_count = h_count
        self.h_fixed = h_fixed


def _implicit_hydrogens(draft: _AtomDraft, bond_orders: list[str], position: int) -> int:
    """Hydrogen count from the standard valence table.

    Aromatic atoms reserve one valence for the ring system (so benzene
    carbons get one H, pyridine nitrogens none); they never raise, since
    the integer valence model only approximates aromatic bonding.
    """
    valences = DEFAULT_VALENCES[draft.element]
    if draft.aromatic:
        used = sum(1 if o == "aromatic" else _ORDER_VALENCE[o] for o in bond_orders)
        return max(0, valences[0] - used - 1)
    used = 0
    for order in bond_orders:
        if order == "aromatic":
            raise SmilesSyntaxError("aromatic bond on non-aromatic atom", position)
        used += _ORDER_VALENCE[order]
    for valence in valences:
        if used <= valence:
            return valence - used
    raise ValenceError(
        f"{draft.element} with explicit valence {used} exceeds maximum {valences[-1]}"
    )


def _check_bracket_valence(draft: _AtomDraft, bond_orders: list[str]) -> None:
    used = draft.h_count
    for order in bond_orders:
        used += 1 if order == "aromatic" else _ORDER_VALENCE[order]
    limit = DEFAULT_VALENCES[draft.element][-1] + abs(draft.charge)
    if used > limit:
        raise ValenceError(
            f"[{draft.element}] with explicit valence {used} exceeds maximum {limit}"
        )


def _component_count(n_atoms: int, bonds: list[tuple[int, int, str]]) -> int:
    if n_atoms == 0:
        return 0
    parent = list(range(n_atoms))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j, _ in bonds:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    return len({find(i) for i in range(n_atoms)})


def parse_smiles(text: str) -> MoleculeGraph:
    """Parse a SMILES string into a :class:`MoleculeGraph`.

    Implicit hydrogens are filled in by the standard valence rules;
    stereo markers are discarded. Raises :class:`SmilesSyntaxError` on
    malformed input, :class:`UnsupportedFeatureError` on isotopes,
    wildcards, or elements outside the organic subset, and
    :class:`ValenceError` when explicit valence exceeds the table.
    """
    if not text:
        raise SmilesSyntaxError("empty input", 0)

    cur = _Cursor(text)
    drafts: list[_AtomDraft] = []
    bonds: list[tuple[int, int, str]] = []
    bond_seen: set[tuple[int, int]] = set()
    atom_pos: list[int] = []
    branch_stack: list[int] = []
    ring_open: dict[int, tuple[int, str | None, int]] = {}
    prev: int | None = None
    pending: str | None = None
    pending_pos = 0

    def add_bond(i: int, j: int, order: str | None, position: int) -> None:
        if i == j:
            raise SmilesSyntaxError("ring closure forms a self-loop", position)
        if order is None:
            order = "aromatic" if drafts[i].aromatic and drafts[j].aromatic else "single"
        if order == "aromatic" and not (drafts[i].aromatic and drafts[j].aromatic):
            raise SmilesSyntaxError("aromatic bond between non-aromatic atoms", position)
        key = (min(i, j), max(i, j))
        if key in bond_seen:
            raise SmilesSyntaxError("duplicate bond between atoms", position)
        bond_seen.add(key)
        bonds.append((key[0], key[1], order))

    def add_atom(draft: _AtomDraft, position: int) -> None:
        nonlocal prev, pending
        idx = len(drafts)
        drafts.append(draft)
        atom_pos.append(position)
        if prev is not None:
            add_bond(prev, idx, pending, position)
        elif pending is not None:
            raise SmilesSyntaxError("bond symbol without preceding atom", pending_pos)
        pending = None
        prev = idx

    def close_ring(num: int, position: int) -> None:
        nonlocal pending
        if prev is None:
            raise SmilesSyntaxError("ring closure before any atom", position)
        if num in ring_open:
            other, other_order, _ = ring_open.pop(num)
            order = pending
            if order is not None and other_order is not None and order != other_order:
                raise SmilesSyntaxError("conflicting ring-closure bond orders", position)
            add_bond(other, prev, order if order is not None else other_order, position)
        else:
            ring_open[num] = (prev, pending, position)
        pending = None

    while cur.pos < len(cur.text):
        position = cur.pos
        ch = cur.take()
        if ch in "-=#:":
            if pending is not None:
                raise SmilesSyntaxError("two consecutive bond symbols", position)
            pending = BOND_SYMBOLS[ch]
            pending_pos = position
        elif ch in "/\\":  # cis/trans marker: treated as a single bond
            if pending is not None:
                raise SmilesSyntaxError("two consecutive bond symbols", position)
            pending = "single"
            pending_pos = position
        elif ch == "(":
            if prev is None:
                raise SmilesSyntaxError("branch start before any atom", position)
            if pending is not None:
                raise SmilesSyntaxError("bond symbol before branch start", position)
            branch_stack.append(prev)
        elif ch == ")":
            if not branch_stack:
                raise SmilesSyntaxError("unmatched ')'", position)
            if pending is not None:
                raise SmilesSyntaxError("dangling bond symbol before ')'", position)
            prev = branch_stack.pop()
        elif ch == ".":
            if pending is not None:
                raise SmilesSyntaxError("bond symbol across '.' separator", position)
            prev = None
        elif ch == "%":
            digits = ""
            while cur.peek().isdigit() and len(digits) < 2:
                digits += cur.take()
            if len(digits) != 2:
                raise SmilesSyntaxError("'%' ring closure needs two digits", position)
            close_ring(int(digits), position)
        elif ch.isdigit():
            close_ring(int(ch), position)
        elif ch == "[":
            element, aromatic, charge, h_count = _parse_bracket_atom(cur)
            add_atom(_AtomDraft(element, aromatic, charge, h_count, True), position)
        elif ch == "*":
            raise UnsupportedFeatureError(f"wildcard atom at position {position}")
        else:
            two = ch + cur.peek()
            if two in ("Cl", "Br"):
                cur.take()
                add_atom(_AtomDraft(two, False, 0, 0, False), position)
            elif ch in "BCNOPSFI":
                add_atom(_AtomDraft(ch, False, 0, 0, False), position)
            elif ch in AROMATIC_OK:
                add_atom(_AtomDraft(ch.upper(), True, 0, 0, False), position)
            elif ch.isalpha():
                raise UnsupportedFeatureError(
                    f"unsupported element '{ch}' at position {position}"
                )
            else:
                raise SmilesSyntaxError(f"unexpected character {ch!r}", position)

    if pending is not None:
        raise SmilesSyntaxError("dangling bond symbol at end of input", pending_pos)
    if branch_stack:
        raise SmilesSyntaxError("unclosed branch", len(text) - 1)
    if ring_open:
        num, (_, _, position) = next(iter(ring_open.items()))
        raise SmilesSyntaxError(f"unclosed ring bond {num}", position)
    if not drafts:
        raise SmilesSyntaxError("no atoms in input", 0)

    orders_at: list[list[str]] = [[] for _ in drafts]
    for i, j, order in bonds:
        orders_at[i].append(order)
        orders_at[j].append(order)

    atoms = []
    for idx, draft in enumerate(drafts):
        if draft.h_fixed:
            _check_bracket_valence(draft, orders_at[idx])
            h_count = draft.h_count
        else:
            h_count = _implicit_hydrogens(draft, orders_at[idx], atom_pos[idx])
        atoms.append(
            AtomNode(
                element=draft.element,
                formal_charge=draft.charge,
                aromatic=draft.aromatic,
                explicit_h=h_count,
                degree=len(orders_at[idx]),
            )
        )

    return MoleculeGraph(
        atoms=tuple(atoms),
        bonds=tuple(BondEdge((i, j), order) for i, j, order in bonds),
        source_smiles=text,
        component_count=_component_count(len(atoms), bonds),
    )
