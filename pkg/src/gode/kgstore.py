"""Molecule-centric knowledge graph: ingestion, value binning, and
molecule-gated k-hop subgraph extraction.

The graph is directed in storage but traversed both ways. Expansion of a
subgraph branch stops at non-molecule nodes: they are included when
reached but never expanded, so every node at distance >= 2 from the
center lies behind molecule-typed intermediates only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

ENTITY_TYPES = (
    "molecule",
    "gene/protein",
    "disease",
    "effect/phenotype",
    "drug",
    "pathway",
    "value",
)

MAX_VALUE_BINS = 10
_NORM_LO, _NORM_HI = 1.0, 10.0


class ParseError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


class UnknownTypeError(ValueError):
    """Entity has no type assignment and its name is not numeric."""


class NotAMoleculeError(ValueError):
    pass


class UnknownEntityError(KeyError):
    pass


@dataclass(frozen=True)
class Triple:
    head: int
    relation: int
    tail: int


@dataclass
class KnowledgeGraph:
    entity_names: list[str]
    entity_types: list[str]
    relation_names: list[str]
    triples: list[Triple]
    entity_index: dict[str, int] = field(default_factory=dict)
    relation_index: dict[str, int] = field(default_factory=dict)
    # per entity: (relation, neighbor, is_outgoing)
    adjacency: list[list[tuple[int, int, bool]]] = field(default_factory=list)
    molecule_set: frozenset[int] = frozenset()

    def __post_init__(self):
        if not self.entity_index:
            self.entity_index = {n: i for i, n in enumerate(self.entity_names)}
        if not self.relation_index:
            self.relation_index = {n: i for i, n in enumerate(self.relation_names)}
        if not self.adjacency:
            adj: list[list[tuple[int, int, bool]]] = [[] for _ in self.entity_names]
            for t in self.triples:
                adj[t.head].append((t.relation, t.tail, True))
                adj[t.tail].append((t.relation, t.head, False))
            self.adjacency = adj
        if not self.molecule_set:
            self.molecule_set = frozenset(
                i for i, t in enumerate(self.entity_types) if t == "molecule"
            )

    @property
    def num_entities(self) -> int:
        return len(self.entity_names)

    @property
    def num_relations(self) -> int:
        return len(self.relation_names)

    def entity_id(self, name: str) -> int:
        try:
            return self.entity_index[name]
        except KeyError:
            raise UnknownEntityError(name) from None

    def type_id(self, entity: int) -> int:
        return ENTITY_TYPES.index(self.entity_types[entity])

    def is_molecule(self, entity: int) -> bool:
        return entity in self.molecule_set


@dataclass(frozen=True)
class KgSubgraph:
    center: int
    kappa: int
    nodes: frozenset[int]
    edges: tuple[Triple, ...]


@dataclass
class ValueBinning:
    """Per value-relation: observed range, bin count, and bin edges."""

    ranges: dict[str, tuple[float, float]] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    edges: dict[str, list[float]] = field(default_factory=dict)
    degenerate: list[str] = field(default_factory=list)

    def bin_count(self, relation: str) -> int:
        return self.counts.get(relation, 0)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _read_tsv(path: str | Path, n_cols: int):
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != n_cols:
                raise ParseError(path, line_no, f"expected {n_cols} tab-separated fields")
            yield line_no, parts


def ingest_triples(path: str | Path, types_path: str | Path) -> KnowledgeGraph:
    """Load a triple TSV plus an entity-type TSV into a deduplicated graph.

    Entities missing from the types file default to type ``value`` when
    their name parses as a number; otherwise UnknownTypeError.
    """
    declared: dict[str, str] = {}
    for line_no, (name, type_name) in _read_tsv(types_path, 2):
        if type_name not in ENTITY_TYPES:
            raise ParseError(types_path, line_no, f"unknown entity type {type_name!r}")
        declared[name] = type_name

    entity_names: list[str] = []
    entity_types: list[str] = []
    entity_index: dict[str, int] = {}
    relation_names: list[str] = []
    relation_index: dict[str, int] = {}
    triples: list[Triple] = []
    seen: set[tuple[int, int, int]] = set()

    def entity(name: str) -> int:
        idx = entity_index.get(name)
        if idx is not None:
            return idx
        type_name = declared.get(name)
        if type_name is None:
            if _is_number(name):
                type_name = "value"
            else:
                raise UnknownTypeError(f"entity {name!r} has no declared type")
        idx = len(entity_names)
        entity_index[name] = idx
        entity_names.append(name)
        entity_types.append(type_name)
        return idx

    def relation(name: str) -> int:
        idx = relation_index.get(name)
        if idx is None:
            idx = len(relation_names)
            relation_index[name] = idx
            relation_names.append(name)
        return idx

    for _, (head, rel, tail) in _read_tsv(path, 3):
        key = (entity(head), relation(rel), entity(tail))
        if key in seen:
            continue
        seen.add(key)
        triples.append(Triple(*key))

    return KnowledgeGraph(
        entity_names=entity_names,
        entity_types=entity_types,
        relation_names=relation_names,
        triples=triples,
        entity_index=entity_index,
        relation_index=relation_index,
    )


def normalize_values(kg: KnowledgeGraph) -> tuple[KnowledgeGraph, ValueBinning]:
    """Replace numeric value entities with bin entities ``<relation>#bin<k>``.

    Values are grouped per relation, mapped linearly onto (1, 10), then
    assigned to at most ten equal-width bins (one bin per distinct value
    when fewer than ten). Degenerate ranges (min == max) collapse to bin 0.
    Value entities already of the form ``...#bin<k>`` pass through.
    """
    binning = ValueBinning()
    groups: dict[int, list[float]] = {}
    for t in kg.triples:
        if kg.entity_types[t.tail] == "value" and _is_number(kg.entity_names[t.tail]):
            groups.setdefault(t.relation, []).append(float(kg.entity_names[t.tail]))

    assign: dict[int, dict[float, int]] = {}
    for rel, values in groups.items():
        rel_name = kg.relation_names[rel]
        lo, hi = min(values), max(values)
        binning.ranges[rel_name] = (lo, hi)
        distinct = sorted(set(values))
        if lo == hi:
            binning.degenerate.append(rel_name)
            binning.counts[rel_name] = 1
            binning.edges[rel_name] = [_NORM_LO, _NORM_HI]
            assign[rel] = {lo: 0}
            continue
        mapping: dict[float, int] = {}
        if len(distinct) < MAX_VALUE_BINS:
            # fewer distinct values than bins: one bin per distinct value
            binning.counts[rel_name] = len(distinct)
            binning.edges[rel_name] = [normalized_value(lo, hi, v) for v in distinct]
            for k, value in enumerate(distinct):
                mapping[value] = k
        else:
            width = (_NORM_HI - _NORM_LO) / MAX_VALUE_BINS
            binning.counts[rel_name] = MAX_VALUE_BINS
            binning.edges[rel_name] = [
                _NORM_LO + width * k for k in range(MAX_VALUE_BINS + 1)
            ]
            for value in distinct:
                norm = normalized_value(lo, hi, value)
                mapping[value] = min(int((norm - _NORM_LO) / width), MAX_VALUE_BINS - 1)
        assign[rel] = mapping

    lines_triples: list[tuple[str, str, str]] = []
    types_out: dict[str, str] = {}
    for i, name in enumerate(kg.entity_names):
        if kg.entity_types[i] != "value" or not _is_number(name):
            types_out[name] = kg.entity_types[i]
    for t in kg.triples:
        head = kg.entity_names[t.head]
        rel = kg.relation_names[t.relation]
        tail = kg.entity_names[t.tail]
        if kg.entity_types[t.tail] == "value" and _is_number(tail):
            k = assign[t.relation][float(tail)]
            tail = f"{rel}#bin{k}"
            types_out[tail] = "value"
        lines_triples.append((head, rel, tail))

    # rebuild through the same dedup path as ingestion
    entity_names: list[str] = []
    entity_types: list[str] = []
    entity_index: dict[str, int] = {}
    relation_names: list[str] = list(kg.relation_names)
    relation_index: dict[str, int] = dict(kg.relation_index)
    triples: list[Triple] = []
    seen: set[tuple[int, int, int]] = set()

    def entity(name: str) -> int:
        idx = entity_index.get(name)
        if idx is None:
            idx = len(entity_names)
            entity_index[name] = idx
            entity_names.append(name)
            entity_types.append(types_out[name])
        return idx

    for head, rel, tail in lines_triples:
        key = (entity(head), relation_index[rel], entity(tail))
        if key in seen:
            continue
        seen.add(key)
        triples.append(Triple(*key))

    normalized = KnowledgeGraph(
        entity_names=entity_names,
        entity_types=entity_types,
        relation_names=relation_names,
        triples=triples,
        entity_index=entity_index,
        relation_index=relation_index,
    )
    return normalized, binning


def normalized_value(lo: float, hi: float, value: float) -> float:
    """Linear map of a raw value onto the (1, 10) range."""
    if hi == lo:
        return _NORM_LO
    return _NORM_LO + (_NORM_HI - _NORM_LO) * (value - lo) / (hi - lo)


def extract_subgraph(kg: KnowledgeGraph, center: int, kappa: int) -> KgSubgraph:
    """Molecule-gated BFS neighborhood plus its induced triples.

    Hop 1 adds every neighbor of the center; later hops expand only from
    molecule-typed nodes already collected. Edges are the triples of the
    full graph with both endpoints in the final node set.
    """
    if center < 0 or center >= kg.num_entities:
        raise UnknownEntityError(center)
    if not kg.is_molecule(center):
        raise NotAMoleculeError(
            f"entity {kg.entity_names[center]!r} is type {kg.entity_types[center]!r}"
        )
    if kappa < 0:
        raise ValueError("kappa must be non-negative")

    nodes = {center}
    frontier = [center]
    for _ in range(kappa):
        next_frontier = []
        for u in frontier:
            if not kg.is_molecule(u):
                continue
            for _, w, _ in kg.adjacency[u]:
                if w not in nodes:
                    nodes.add(w)
                    next_frontier.append(w)
        frontier = next_frontier
        if not frontier:
            break

    edges = tuple(t for t in kg.triples if t.head in nodes and t.tail in nodes)
    return KgSubgraph(center=center, kappa=kappa, nodes=frozenset(nodes), edges=edges)


def molecule_neighbors(kg: KnowledgeGraph, center: int) -> list[int]:
    """Molecule-typed entities adjacent to the center, sorted by id."""
    if not kg.is_molecule(center):
        raise NotAMoleculeError(
            f"entity {kg.entity_names[center]!r} is type {kg.entity_types[center]!r}"
        )
    return sorted(
        {w for _, w, _ in kg.adjacency[center] if kg.is_molecule(w)}
    )


def export_subgraph_tsv(kg: KnowledgeGraph, sub: KgSubgraph, path: str | Path) -> None:
    """Write induced triples with a `#center=<id> kappa=<k>` header line."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"#center={kg.entity_names[sub.center]} kappa={sub.kappa}\n")
        for t in sub.edges:
            fh.write(
                f"{kg.entity_names[t.head]}\t{kg.relation_names[t.relation]}\t"
                f"{kg.entity_names[t.tail]}\n"
            )
