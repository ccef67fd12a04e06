"""Self-supervised pre-training of the two encoders.

Molecule level: predict each sampled atom's 1-hop context label plus the
molecule's motif bit vector from the pooled embedding. KG level: on
molecule-centered subgraphs, predict masked node types, edge relation
types, and the center molecule's motifs, weighted by the three lambda
coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gode.chem import MoleculeGraph, context_label, detect_motifs
from gode.chem.motifs import MOTIF_NAMES
from gode.encoder import KgEncoder, MolEncoder
from gode.kgstore import ENTITY_TYPES, KgSubgraph, KnowledgeGraph
from gode.metrics import roc_auc
from gode.tensor import (
    AdamState,
    Tensor,
    adam_step,
    add,
    bce_with_logits,
    concat,
    cross_entropy,
    embedding_lookup,
    matmul,
    reshape,
)


class EmptyBatchError(ValueError):
    pass


class MissingSmilesError(ValueError):
    pass


UNK_LABEL = 0


@dataclass
class ContextVocab:
    """Dense ids for context-label keys; id 0 is the reserved UNK class."""

    keys: list[str] = field(default_factory=lambda: ["<UNK>"])
    ids: dict[str, int] = field(default_factory=dict)

    def id_of(self, key: str) -> int:
        return self.ids.get(key, UNK_LABEL)

    def __len__(self) -> int:
        return len(self.keys)


def build_context_vocab(graphs: list[MoleculeGraph]) -> ContextVocab:
    """Dense id per distinct context key, ordered by first occurrence."""
    vocab = ContextVocab()
    for g in graphs:
        for i in range(g.num_atoms):
            key = context_label(g, i)
            if key not in vocab.ids:
                vocab.ids[key] = len(vocab.keys)
                vocab.keys.append(key)
    return vocab


@dataclass
class MoleculePretrainConfig:
    node_sample_fraction: float = 0.15
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1.5e-4
    weight_decay: float = 1e-7

    def __post_init__(self):
        if not 0.0 < self.node_sample_fraction <= 1.0:
            raise ValueError("node_sample_fraction must be in (0, 1]")


@dataclass
class KgPretrainConfig:
    lambda_edge: float = 1.5
    lambda_node: float = 1.5
    lambda_motif: float = 1.8
    kappa: int = 2
    mask_fraction: float = 0.15
    epochs: int = 100
    batch_size: int = 16
    lr: float = 1e-4
    weight_decay: float = 1e-5
    val_fraction: float = 0.1

    def __post_init__(self):
        if min(self.lambda_edge, self.lambda_node, self.lambda_motif) <= 0:
            raise ValueError("lambda weights must be positive")


def linear_params(
    rng: np.random.Generator, name: str, fan_in: int, fan_out: int
) -> dict[str, Tensor]:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return {
        f"{name}.w": Tensor(
            rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True
        ),
        f"{name}.b": Tensor(np.zeros(fan_out), requires_grad=True),
    }


def linear_apply(params: dict[str, Tensor], name: str, x: Tensor) -> Tensor:
    return add(matmul(x, params[f"{name}.w"]), params[f"{name}.b"])


def sample_atoms(
    g: MoleculeGraph, fraction: float, rng: np.random.Generator
) -> np.ndarray:
    """Per-molecule node sample V'; at least one atom, without replacement."""
    count = max(1, int(round(fraction * g.num_atoms)))
    return np.sort(rng.choice(g.num_atoms, size=count, replace=False))


def molecule_pretrain_step(
    model: MolEncoder,
    heads: dict[str, Tensor],
    batch: list[MoleculeGraph],
    vocab: ContextVocab,
    cfg: MoleculePretrainConfig,
    rng: np.random.Generator,
    motif_targets: list[np.ndarray] | None = None,
    training: bool = True,
) -> tuple[Tensor, dict[str, float]]:
    """Joint loss over a batch: context term + motif term.

    Context labels outside the vocabulary map to the UNK class. Returns
    the loss tensor and float components for logging.
    """
    if not batch:
        raise EmptyBatchError("molecule pretrain step got an empty batch")
    sampled_rows = []
    sampled_labels = []
    pooled = []
    for k, g in enumerate(batch):
        nodes, h_mg = model.encode(g, training=training, rng=rng)
        atom_idx = sample_atoms(g, cfg.node_sample_fraction, rng)
        sampled_rows.append(embedding_lookup(nodes, atom_idx))
        sampled_labels.extend(vocab.id_of(context_label(g, int(i))) for i in atom_idx)
        pooled.append(reshape(h_mg, (1, h_mg.shape[0])))
    context_logits = linear_apply(heads, "context", concat(sampled_rows, axis=0))
    context_loss = cross_entropy(context_logits, np.array(sampled_labels))

    motif_logits = linear_apply(heads, "motif", concat(pooled, axis=0))
    if motif_targets is None:
        targets = np.array([detect_motifs(g).bits for g in batch], dtype=np.float64)
    else:
        targets = np.stack(motif_targets)
    motif_loss = bce_with_logits(motif_logits, targets, reduction="sum") / len(batch)

    loss = add(context_loss, motif_loss)
    components = {
        "context": context_loss.item(),
        "motif": motif_loss.item(),
        "total": loss.item(),
    }
    return loss, components


def make_molecule_heads(
    hidden_dim: int, vocab_size: int, seed: int
) -> dict[str, Tensor]:
    rng = np.random.default_rng(seed)
    heads = linear_params(rng, "context", hidden_dim, vocab_size)
    heads.update(linear_params(rng, "motif", hidden_dim, len(MOTIF_NAMES)))
    return heads


def pretrain_molecules(
    model: MolEncoder,
    graphs: list[MoleculeGraph],
    cfg: MoleculePretrainConfig,
    seed: int = 0,
) -> tuple[ContextVocab, dict[str, Tensor], list[dict]]:
    """Full molecule-level pre-training loop.

    Returns the context vocabulary, the trained output heads, and a
    per-epoch log of loss components.
    """
    if not graphs:
        raise EmptyBatchError("empty pre-training corpus")
    vocab = build_context_vocab(graphs)
    heads = make_molecule_heads(model.cfg.hidden_dim, len(vocab), seed + 1)
    motif_targets = [np.array(detect_motifs(g).bits, dtype=np.float64) for g in graphs]
    params = dict(model.params)
    params.update(heads)
    state = AdamState()
    rng = np.random.default_rng(seed)
    log: list[dict] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(graphs))
        sums = {"context": 0.0, "motif": 0.0, "total": 0.0}
        n_batches = 0
        for start in range(0, len(graphs), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch = [graphs[i] for i in idx]
            targets = [motif_targets[i] for i in idx]
            loss, components = molecule_pretrain_step(
                model, heads, batch, vocab, cfg, rng, motif_targets=targets
            )
            loss.backward()
            adam_step(params, state, cfg.lr, weight_decay=cfg.weight_decay)
            for key in sums:
                sums[key] += components[key]
            n_batches += 1
        entry = {"stage": "pretrain-mol", "epoch": epoch}
        entry.update({k: v / n_batches for k, v in sums.items()})
        entry["loss"] = entry.pop("total")
        log.append(entry)
    return vocab, heads, log


def evaluate_context_accuracy(
    model: MolEncoder,
    heads: dict[str, Tensor],
    graphs: list[MoleculeGraph],
    vocab: ContextVocab,
) -> float:
    """Accuracy of the context head over every atom of the given graphs."""
    correct = 0
    total = 0
    for g in graphs:
        nodes, _ = model.encode(g)
        logits = linear_apply(heads, "context", nodes)
        pred = logits.data.argmax(axis=1)
        for i in range(g.num_atoms):
            if int(pred[i]) == vocab.id_of(context_label(g, i)):
                correct += 1
            total += 1
    return correct / max(total, 1)


def evaluate_motif_auc(
    model: MolEncoder, heads: dict[str, Tensor], graphs: list[MoleculeGraph]
) -> float:
    """Mean ROC-AUC over motifs present in both classes on these graphs."""
    scores = []
    targets = []
    for g in graphs:
        _, h_mg = model.encode(g)
        logits = linear_apply(heads, "motif", reshape(h_mg, (1, h_mg.shape[0])))
        scores.append(logits.data[0])
        targets.append(detect_motifs(g).bits)
    score_mat = np.array(scores)
    target_mat = np.array(targets, dtype=np.float64)
    aucs = []
    for j in range(target_mat.shape[1]):
        col = target_mat[:, j]
        if col.min() == col.max():
            continue
        aucs.append(roc_auc(score_mat[:, j], col))
    return float(np.mean(aucs)) if aucs else float("nan")


@dataclass(frozen=True)
class SubgraphSample:
    subgraph: KgSubgraph
    motif_bits: np.ndarray | None  # None when the center has no structure


def make_kg_samples(
    kg: KnowledgeGraph,
    subgraphs: list[KgSubgraph],
    structures: dict[int, MoleculeGraph],
) -> list[SubgraphSample]:
    samples = []
    for sub in subgraphs:
        g = structures.get(sub.center)
        bits = (
            np.array(detect_motifs(g).bits, dtype=np.float64) if g is not None else None
        )
        samples.append(SubgraphSample(subgraph=sub, motif_bits=bits))
    return samples


def _choose_masked(
    sub: KgSubgraph, fraction: float, rng: np.random.Generator
) -> set[int]:
    # the center stays unmasked so the motif head sees a real molecule row
    candidates = sorted(sub.nodes - {sub.center})
    if not candidates:
        return set()
    count = max(1, int(round(fraction * len(candidates))))
    picked = rng.choice(len(candidates), size=count, replace=False)
    return {candidates[i] for i in picked}


def kg_pretrain_step(
    model: KgEncoder,
    heads: dict[str, Tensor],
    batch: list[SubgraphSample],
    kg: KnowledgeGraph,
    cfg: KgPretrainConfig,
    rng: np.random.Generator,
    training: bool = True,
) -> tuple[Tensor, dict[str, float]]:
    """Weighted three-task loss over a batch of subgraphs.

    Components are averaged per sampled item (masked node, edge, center)
    and combined as lambda_m * motif + lambda_n * node + lambda_e * edge.
    Centers without structures are excluded from the motif term only.
    """
    if not batch:
        raise EmptyBatchError("kg pretrain step got an empty batch")
    node_rows, node_targets = [], []
    edge_rows_u, edge_rows_v, edge_targets = [], [], []
    motif_rows, motif_targets = [], []

    for sample in batch:
        sub = sample.subgraph
        masked = _choose_masked(sub, cfg.mask_fraction, rng)
        index, nodes, h_center = model.encode(
            sub, masked_nodes=masked, training=training, rng=rng
        )
        if masked:
            idx = np.array([index[e] for e in sorted(masked)], dtype=np.int64)
            node_rows.append(embedding_lookup(nodes, idx))
            node_targets.extend(kg.type_id(e) for e in sorted(masked))
        if sub.edges:
            u = np.array([index[t.head] for t in sub.edges], dtype=np.int64)
            v = np.array([index[t.tail] for t in sub.edges], dtype=np.int64)
            edge_rows_u.append(embedding_lookup(nodes, u))
            edge_rows_v.append(embedding_lookup(nodes, v))
            edge_targets.extend(t.relation for t in sub.edges)
        if sample.motif_bits is not None:
            motif_rows.append(reshape(h_center, (1, h_center.shape[0])))
            motif_targets.append(sample.motif_bits)

    zero = Tensor(0.0)
    if node_rows:
        node_logits = linear_apply(heads, "node", concat(node_rows, axis=0))
        node_loss = cross_entropy(node_logits, np.array(node_targets))
    else:
        node_loss = zero
    if edge_rows_u:
        pair = concat(
            [concat(edge_rows_u, axis=0), concat(edge_rows_v, axis=0)], axis=1
        )
        edge_logits = linear_apply(heads, "edge", pair)
        edge_loss = cross_entropy(edge_logits, np.array(edge_targets))
    else:
        edge_loss = zero
    if motif_rows:
        motif_logits = linear_apply(heads, "motif_kg", concat(motif_rows, axis=0))
        motif_loss = bce_with_logits(
            motif_logits, np.stack(motif_targets), reduction="sum"
        ) / len(motif_rows)
    else:
        motif_loss = zero

    loss = add(
        add(motif_loss * cfg.lambda_motif, node_loss * cfg.lambda_node),
        edge_loss * cfg.lambda_edge,
    )
    components = {
        "motif": motif_loss.item(),
        "node": node_loss.item(),
        "edge": edge_loss.item(),
        "total": loss.item(),
    }
    return loss, components


def make_kg_heads(hidden_dim: int, n_relations: int, seed: int) -> dict[str, Tensor]:
    rng = np.random.default_rng(seed)
    heads = linear_params(rng, "node", hidden_dim, len(ENTITY_TYPES))
    heads.update(linear_params(rng, "edge", 2 * hidden_dim, n_relations))
    heads.update(linear_params(rng, "motif_kg", hidden_dim, len(MOTIF_NAMES)))
    return heads


def pretrain_kg(
    model: KgEncoder,
    kg: KnowledgeGraph,
    samples: list[SubgraphSample],
    cfg: KgPretrainConfig,
    seed: int = 0,
) -> tuple[dict[str, Tensor], list[dict]]:
    """KG-level pre-training with a held-out validation split.

    Validation masking is re-randomized per epoch but identically across
    runs with the same seed, so runs differing only in initialization see
    the same validation tasks.
    """
    if not samples:
        raise EmptyBatchError("no subgraph samples to pre-train on")
    heads = make_kg_heads(model.cfg.hidden_dim, kg.num_relations, seed + 1)
    params = dict(model.params)
    params.update(heads)
    state = AdamState()
    rng = np.random.default_rng(seed)

    order = np.random.default_rng([seed, 7]).permutation(len(samples))
    n_val = max(1, int(round(cfg.val_fraction * len(samples)))) if len(samples) > 1 else 0
    val = [samples[i] for i in order[:n_val]]
    train = [samples[i] for i in order[n_val:]]
    log: list[dict] = []
    for epoch in range(cfg.epochs):
        batch_order = rng.permutation(len(train))
        sums = {"motif": 0.0, "node": 0.0, "edge": 0.0, "total": 0.0}
        n_batches = 0
        for start in range(0, len(train), cfg.batch_size):
            idx = batch_order[start : start + cfg.batch_size]
            loss, components = kg_pretrain_step(
                model, heads, [train[i] for i in idx], kg, cfg, rng
            )
            loss.backward()
            # a batch may have had no maskable nodes or no centers with
            # structures; step only the parameters that saw gradients
            active = {n: p for n, p in params.items() if p.grad is not None}
            adam_step(active, state, cfg.lr, weight_decay=cfg.weight_decay)
            for key in sums:
                sums[key] += components[key]
            n_batches += 1
        entry = {"stage": "pretrain-kg", "epoch": epoch}
        entry.update({k: v / n_batches for k, v in sums.items()})
        entry["loss"] = entry.pop("total")
        if val:
            val_rng = np.random.default_rng([seed, 100 + epoch])
            _, val_components = kg_pretrain_step(
                model, heads, val, kg, cfg, val_rng, training=False
            )
            entry["val_loss"] = val_components["total"]
        log.append(entry)
    return heads, log


def evaluate_kg_tasks(
    model: KgEncoder,
    heads: dict[str, Tensor],
    samples: list[SubgraphSample],
    kg: KnowledgeGraph,
    cfg: KgPretrainConfig,
    seed: int = 0,
) -> dict[str, float]:
    """Masked node-type and edge-type accuracy under deterministic masking."""
    rng = np.random.default_rng([seed, 999])
    node_correct = node_total = edge_correct = edge_total = 0
    for sample in samples:
        sub = sample.subgraph
        masked = _choose_masked(sub, cfg.mask_fraction, rng)
        index, nodes, _ = model.encode(sub, masked_nodes=masked)
        if masked:
            idx = np.array([index[e] for e in sorted(masked)], dtype=np.int64)
            logits = linear_apply(heads, "node", embedding_lookup(nodes, idx))
            pred = logits.data.argmax(axis=1)
            for k, e in enumerate(sorted(masked)):
                node_correct += int(pred[k] == kg.type_id(e))
                node_total += 1
        if sub.edges:
            u = np.array([index[t.head] for t in sub.edges], dtype=np.int64)
            v = np.array([index[t.tail] for t in sub.edges], dtype=np.int64)
            pair = concat([embedding_lookup(nodes, u), embedding_lookup(nodes, v)], axis=1)
            logits = linear_apply(heads, "edge", pair)
            pred = logits.data.argmax(axis=1)
            for k, t in enumerate(sub.edges):
                edge_correct += int(pred[k] == t.relation)
                edge_total += 1
    return {
        "node_accuracy": node_correct / max(node_total, 1),
        "edge_accuracy": edge_correct / max(edge_total, 1),
    }
