"""Edge-featured message-passing encoders for the two graph views.

Both views share one layer recipe: a node update combines the scaled
previous embedding with the mean of activated neighbor-plus-edge
messages, followed by a two-layer MLP. The molecule encoder reads out
the mean over final node embeddings; the subgraph encoder reads out the
center node's final embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gode.chem.smiles import BOND_ORDERS, MoleculeGraph, ORGANIC_SUBSET
from gode.kge import EmbeddingTable
from gode.kgstore import ENTITY_TYPES, KgSubgraph, KnowledgeGraph, UnknownEntityError
from gode.tensor import (
    Tensor,
    add,
    dropout,
    embedding_lookup,
    matmul,
    mean_pool,
    mul,
    prelu,
    relu,
    segment_mean,
    segment_sum,
    sigmoid,
)


class EmptyGraphError(ValueError):
    pass


_PRELU_INIT_SLOPE = 0.25

_CHARGE_RANGE = (-2, 2)  # clamped outside
_MAX_H_FEATURE = 4


@dataclass
class EncoderConfig:
    hidden_dim: int = 1200
    layers: int = 3
    dropout: float = 0.1
    activation: str = "prelu"  # prelu | relu | sigmoid
    aggregation: str = "mean"  # mean | sum

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.activation not in ("prelu", "relu", "sigmoid"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.aggregation not in ("mean", "sum"):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _layer_params(rng, prefix: str, cfg: EncoderConfig) -> dict[str, Tensor]:
    d = cfg.hidden_dim
    params = {
        f"{prefix}.self_scale": Tensor(np.array(0.0), requires_grad=True),
        f"{prefix}.w1": Tensor(_glorot(rng, d, d), requires_grad=True),
        f"{prefix}.b1": Tensor(np.zeros(d), requires_grad=True),
        f"{prefix}.w2": Tensor(_glorot(rng, d, d), requires_grad=True),
        f"{prefix}.b2": Tensor(np.zeros(d), requires_grad=True),
    }
    if cfg.activation == "prelu":
        params[f"{prefix}.slope"] = Tensor(np.array(_PRELU_INIT_SLOPE), requires_grad=True)
        params[f"{prefix}.mlp_slope"] = Tensor(np.array(_PRELU_INIT_SLOPE), requires_grad=True)
    return params


def _activate(x: Tensor, params, prefix: str, cfg: EncoderConfig, which: str) -> Tensor:
    if cfg.activation == "prelu":
        return prelu(x, params[f"{prefix}.{which}"])
    if cfg.activation == "relu":
        return relu(x)
    return sigmoid(x)


def _message_pass(
    params: dict[str, Tensor],
    name: str,
    nodes: Tensor,
    src: np.ndarray,
    dst: np.ndarray,
    edge_feats: Tensor | None,
    cfg: EncoderConfig,
    training: bool,
    rng: np.random.Generator | None,
) -> Tensor:
    """Run the layer stack; src/dst list each undirected edge twice."""
    n = nodes.shape[0]
    h = nodes
    for layer in range(cfg.layers):
        prefix = f"{name}.layer{layer}"
        if len(src):
            msg = embedding_lookup(h, src)
            if edge_feats is not None:
                msg = add(msg, edge_feats)
            msg = _activate(msg, params, prefix, cfg, "slope")
            if cfg.aggregation == "mean":
                agg = segment_mean(msg, dst, n)
            else:
                agg = segment_sum(msg, dst, n)
            combined = add(mul(h, add(params[f"{prefix}.self_scale"], Tensor(1.0))), agg)
        else:
            combined = mul(h, add(params[f"{prefix}.self_scale"], Tensor(1.0)))
        hidden = _activate(
            add(matmul(combined, params[f"{prefix}.w1"]), params[f"{prefix}.b1"]),
            params,
            prefix,
            cfg,
            "mlp_slope",
        )
        h = add(matmul(hidden, params[f"{prefix}.w2"]), params[f"{prefix}.b2"])
        if training and cfg.dropout > 0.0:
            h = dropout(h, cfg.dropout, rng, training)
    return h


class MolEncoder:
    """Molecule-graph encoder; checkpoint tensor names carry the `mgnn.` prefix."""

    PREFIX = "mgnn"

    def __init__(self, cfg: EncoderConfig, seed: int = 0):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        d = cfg.hidden_dim
        scale = 1.0 / np.sqrt(d)
        self.params: dict[str, Tensor] = {
            f"{self.PREFIX}.atom_element": Tensor(
                rng.normal(scale=scale, size=(len(ORGANIC_SUBSET), d)), requires_grad=True
            ),
            f"{self.PREFIX}.atom_aromatic": Tensor(
                rng.normal(scale=scale, size=(2, d)), requires_grad=True
            ),
            f"{self.PREFIX}.atom_charge": Tensor(
                rng.normal(scale=scale, size=(_CHARGE_RANGE[1] - _CHARGE_RANGE[0] + 1, d)),
                requires_grad=True,
            ),
            f"{self.PREFIX}.atom_hcount": Tensor(
                rng.normal(scale=scale, size=(_MAX_H_FEATURE + 1, d)), requires_grad=True
            ),
            f"{self.PREFIX}.bond_order": Tensor(
                rng.normal(scale=scale, size=(len(BOND_ORDERS), d)), requires_grad=True
            ),
        }
        for layer in range(cfg.layers):
            self.params.update(_layer_params(rng, f"{self.PREFIX}.layer{layer}", cfg))

    def encode(
        self,
        g: MoleculeGraph,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, Tensor]:
        """Returns (per-atom embeddings, pooled molecule embedding)."""
        if g.num_atoms == 0:
            raise EmptyGraphError("cannot encode an empty molecule")
        element_idx = np.array(
            [ORGANIC_SUBSET.index(a.element) for a in g.atoms], dtype=np.int64
        )
        aromatic_idx = np.array([int(a.aromatic) for a in g.atoms], dtype=np.int64)
        charge_idx = np.array(
            [np.clip(a.formal_charge, *_CHARGE_RANGE) - _CHARGE_RANGE[0] for a in g.atoms],
            dtype=np.int64,
        )
        h_idx = np.array(
            [min(a.explicit_h, _MAX_H_FEATURE) for a in g.atoms], dtype=np.int64
        )
        p = self.params
        nodes = add(
            add(
                embedding_lookup(p[f"{self.PREFIX}.atom_element"], element_idx),
                embedding_lookup(p[f"{self.PREFIX}.atom_aromatic"], aromatic_idx),
            ),
            add(
                embedding_lookup(p[f"{self.PREFIX}.atom_charge"], charge_idx),
                embedding_lookup(p[f"{self.PREFIX}.atom_hcount"], h_idx),
            ),
        )
        src, dst, orders = _mol_edges(g)
        edge_feats = (
            embedding_lookup(p[f"{self.PREFIX}.bond_order"], orders) if len(src) else None
        )
        node_embeddings = _message_pass(
            p, self.PREFIX, nodes, src, dst, edge_feats, self.cfg, training, rng
        )
        return node_embeddings, mean_pool(node_embeddings)

    def state(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        _load_params(self.params, state)


def _mol_edges(g: MoleculeGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    src, dst, orders = [], [], []
    for b in g.bonds:
        i, j = b.endpoints
        order = BOND_ORDERS.index(b.order)
        src += [i, j]
        dst += [j, i]
        orders += [order, order]
    return (
        np.array(src, dtype=np.int64),
        np.array(dst, dtype=np.int64),
        np.array(orders, dtype=np.int64),
    )


class KgEncoder:
    """KG-subgraph encoder over entity/relation input rows.

    Input rows live in the table's dimension and are trainable; when that
    differs from the hidden size, one learned linear projection maps them
    in. Built from a trained embedding table via :meth:`from_kge`, or
    randomly for the initialization ablation.
    """

    PREFIX = "kgnn"

    def __init__(
        self,
        cfg: EncoderConfig,
        entity_rows: np.ndarray,
        relation_rows: np.ndarray,
        seed: int = 0,
    ):
        if entity_rows.shape[1] != relation_rows.shape[1]:
            raise ValueError("entity and relation input dims differ")
        self.cfg = cfg
        self.input_dim = entity_rows.shape[1]
        rng = np.random.default_rng(seed)
        d = cfg.hidden_dim
        self.params: dict[str, Tensor] = {
            f"{self.PREFIX}.entity_input": Tensor(entity_rows, requires_grad=True),
            f"{self.PREFIX}.relation_input": Tensor(relation_rows, requires_grad=True),
            f"{self.PREFIX}.mask_input": Tensor(
                rng.normal(scale=1.0 / np.sqrt(self.input_dim), size=(self.input_dim,)),
                requires_grad=True,
            ),
        }
        if self.input_dim != d:
            self.params[f"{self.PREFIX}.proj_w"] = Tensor(
                _glorot(rng, self.input_dim, d), requires_grad=True
            )
            self.params[f"{self.PREFIX}.proj_b"] = Tensor(np.zeros(d), requires_grad=True)
        for layer in range(cfg.layers):
            self.params.update(_layer_params(rng, f"{self.PREFIX}.layer{layer}", cfg))

    @classmethod
    def from_kge(cls, table: EmbeddingTable, cfg: EncoderConfig, seed: int = 0) -> "KgEncoder":
        return cls(cfg, table.entity.copy(), table.relation.copy(), seed=seed)

    @classmethod
    def random(
        cls,
        n_entities: int,
        n_relations: int,
        input_dim: int,
        cfg: EncoderConfig,
        seed: int = 0,
    ) -> "KgEncoder":
        rng = np.random.default_rng(seed)
        bound = 6.0 / np.sqrt(input_dim)
        return cls(
            cfg,
            rng.uniform(-bound, bound, size=(n_entities, input_dim)),
            rng.uniform(-bound, bound, size=(n_relations, input_dim)),
            seed=seed,
        )

    def encode(
        self,
        sub: KgSubgraph,
        masked_nodes: frozenset[int] | set[int] = frozenset(),
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[dict[int, int], Tensor, Tensor]:
        """Returns (entity id -> row index, node embeddings, center embedding).

        Input rows of ``masked_nodes`` are replaced by the learned mask
        embedding before any message passing, so masked-node prediction
        targets are never leaked.
        """
        if not sub.nodes:
            raise EmptyGraphError("cannot encode an empty subgraph")
        p = self.params
        entity_table = p[f"{self.PREFIX}.entity_input"]
        n_known = entity_table.shape[0]
        node_ids = sorted(sub.nodes)
        for e in node_ids:
            if e < 0 or e >= n_known:
                raise UnknownEntityError(e)
        index = {e: k for k, e in enumerate(node_ids)}

        rows = embedding_lookup(entity_table, np.array(node_ids, dtype=np.int64))
        if masked_nodes:
            keep = np.array(
                [0.0 if e in masked_nodes else 1.0 for e in node_ids]
            )[:, None]
            masked = np.array(
                [1.0 if e in masked_nodes else 0.0 for e in node_ids]
            )[:, None]
            mask_row = p[f"{self.PREFIX}.mask_input"]
            rows = add(
                mul(rows, Tensor(keep)),
                mul(reshape_row(mask_row, self.input_dim), Tensor(masked)),
            )
        if f"{self.PREFIX}.proj_w" in p:
            rows = add(matmul(rows, p[f"{self.PREFIX}.proj_w"]), p[f"{self.PREFIX}.proj_b"])

        src, dst, rel_ids = [], [], []
        for t in sub.edges:
            src += [index[t.head], index[t.tail]]
            dst += [index[t.tail], index[t.head]]
            rel_ids += [t.relation, t.relation]
        src = np.array(src, dtype=np.int64)
        dst = np.array(dst, dtype=np.int64)
        edge_feats = None
        if len(src):
            rel_rows = embedding_lookup(
                p[f"{self.PREFIX}.relation_input"], np.array(rel_ids, dtype=np.int64)
            )
            if f"{self.PREFIX}.proj_w" in p:
                rel_rows = add(
                    matmul(rel_rows, p[f"{self.PREFIX}.proj_w"]), p[f"{self.PREFIX}.proj_b"]
                )
            edge_feats = rel_rows

        node_embeddings = _message_pass(
            p, self.PREFIX, rows, src, dst, edge_feats, self.cfg, training, rng
        )
        center_row = embedding_lookup(
            node_embeddings, np.array([index[sub.center]], dtype=np.int64)
        )
        h_center = mean_pool(center_row)  # (1, d) -> (d,)
        return index, node_embeddings, h_center

    def state(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        _load_params(self.params, state)


def reshape_row(t: Tensor, dim: int) -> Tensor:
    from gode.tensor import reshape

    return reshape(t, (1, dim))


def _load_params(params: dict[str, Tensor], state: dict[str, np.ndarray]) -> None:
    missing = set(params) - set(state)
    extra = set(state) - set(params)
    if missing or extra:
        raise KeyError(f"state mismatch: missing={sorted(missing)} extra={sorted(extra)}")
    for name, t in params.items():
        arr = np.asarray(state[name], dtype=np.float64)
        if arr.shape != t.data.shape:
            raise ValueError(
                f"shape mismatch for {name}: {arr.shape} vs {t.data.shape}"
            )
        t.data = arr.copy()
        t.grad = None
