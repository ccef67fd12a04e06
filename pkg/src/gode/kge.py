"""Translation-based knowledge-graph embeddings.

Plausibility of a triple is the negated Lp distance between the
translated head and the tail: s(h, r, t) = -|| e_h + r_r - e_t ||_p.
Training minimizes a margin ranking loss over uniformly corrupted
heads/tails with plain SGD; entity rows are renormalized to unit Lp norm
after every step.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gode.kgstore import KnowledgeGraph, Triple
from gode.tensor.checkpoint import save_checkpoint


class EmptyGraphError(ValueError):
    pass


class EmptyHoldoutError(ValueError):
    pass


class UnknownIdError(IndexError):
    pass


@dataclass
class KgeConfig:
    dim: int = 1200
    norm_p: int = 2
    margin: float = 1.0
    epochs: int = 10
    lr: float = 1e-4
    negatives: int = 1
    batch_size: int = 128

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.norm_p not in (1, 2):
            raise ValueError("norm_p must be 1 or 2")


@dataclass
class EmbeddingTable:
    entity: np.ndarray  # (num_entities, dim) float64
    relation: np.ndarray  # (num_relations, dim) float64
    norm_p: int = 2

    @property
    def dim(self) -> int:
        return self.entity.shape[1]

    def normalize_entities(self, rows: np.ndarray | None = None) -> None:
        """Renormalize entity rows (all, or the given indices) to unit Lp norm."""
        target = self.entity if rows is None else self.entity[rows]
        if self.norm_p == 2:
            norms = np.linalg.norm(target, axis=1, keepdims=True)
        else:
            norms = np.abs(target).sum(axis=1, keepdims=True)
        scaled = target / np.maximum(norms, 1e-12)
        if rows is None:
            self.entity[:] = scaled
        else:
            self.entity[rows] = scaled


def init_table(
    n_entities: int, n_relations: int, cfg: KgeConfig, seed: int
) -> EmbeddingTable:
    """Uniform init in [-6/sqrt(d), 6/sqrt(d)]; relations unit-normalized."""
    rng = np.random.default_rng(seed)
    bound = 6.0 / np.sqrt(cfg.dim)
    entity = rng.uniform(-bound, bound, size=(n_entities, cfg.dim))
    relation = rng.uniform(-bound, bound, size=(n_relations, cfg.dim))
    norms = np.linalg.norm(relation, axis=1, keepdims=True)
    relation /= np.maximum(norms, 1e-12)
    return EmbeddingTable(entity=entity, relation=relation, norm_p=cfg.norm_p)


def _distance(diff: np.ndarray, p: int) -> np.ndarray:
    if p == 1:
        return np.abs(diff).sum(axis=-1)
    return np.sqrt((diff * diff).sum(axis=-1))


def score(table: EmbeddingTable, h: int, r: int, t: int) -> float:
    """Negated Lp translation distance; higher is more plausible."""
    n_ent, n_rel = table.entity.shape[0], table.relation.shape[0]
    if not (0 <= h < n_ent and 0 <= t < n_ent):
        raise UnknownIdError(f"entity id out of range: {h}, {t}")
    if not 0 <= r < n_rel:
        raise UnknownIdError(f"relation id out of range: {r}")
    diff = table.entity[h] + table.relation[r] - table.entity[t]
    return float(-_distance(diff, table.norm_p))


def train(
    kg: KnowledgeGraph, cfg: KgeConfig, seed: int = 0
) -> tuple[EmbeddingTable, list[dict]]:
    """Margin-ranking training over the whole graph.

    Returns the trained table and a per-epoch log of the mean margin
    loss. With epochs == 0 the raw initialization is returned.
    """
    if not kg.triples:
        raise EmptyGraphError("cannot train embeddings on an empty graph")
    rng = np.random.default_rng(seed)
    table = init_table(kg.num_entities, kg.num_relations, cfg, seed)

    heads = np.array([t.head for t in kg.triples], dtype=np.int64)
    rels = np.array([t.relation for t in kg.triples], dtype=np.int64)
    tails = np.array([t.tail for t in kg.triples], dtype=np.int64)
    n = len(kg.triples)
    log: list[dict] = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            bh, br, bt = heads[idx], rels[idx], tails[idx]
            if cfg.negatives > 1:
                bh = np.repeat(bh, cfg.negatives)
                br = np.repeat(br, cfg.negatives)
                bt = np.repeat(bt, cfg.negatives)
            m = len(bh)
            corrupt_head = rng.random(m) < 0.5
            random_entities = rng.integers(0, kg.num_entities, size=m)
            nh = np.where(corrupt_head, random_entities, bh)
            nt = np.where(corrupt_head, bt, random_entities)

            table.normalize_entities()

            e_h, e_t = table.entity[bh], table.entity[bt]
            e_nh, e_nt = table.entity[nh], table.entity[nt]
            r_r = table.relation[br]
            pos_diff = e_h + r_r - e_t
            neg_diff = e_nh + r_r - e_nt
            pos_d = _distance(pos_diff, cfg.norm_p)
            neg_d = _distance(neg_diff, cfg.norm_p)
            violation = cfg.margin + pos_d - neg_d
            active = violation > 0
            epoch_loss += float(np.maximum(violation, 0.0).sum())
            if not active.any():
                continue

            if cfg.norm_p == 2:
                g_pos = pos_diff / np.maximum(pos_d, 1e-12)[:, None]
                g_neg = neg_diff / np.maximum(neg_d, 1e-12)[:, None]
            else:
                g_pos = np.sign(pos_diff)
                g_neg = np.sign(neg_diff)
            g_pos = g_pos * active[:, None]
            g_neg = g_neg * active[:, None]

            grad_entity = np.zeros_like(table.entity)
            grad_relation = np.zeros_like(table.relation)
            np.add.at(grad_entity, bh, g_pos)
            np.add.at(grad_entity, bt, -g_pos)
            np.add.at(grad_relation, br, g_pos - g_neg)
            np.add.at(grad_entity, nh, -g_neg)
            np.add.at(grad_entity, nt, g_neg)

            table.entity -= cfg.lr * grad_entity
            table.relation -= cfg.lr * grad_relation
            touched = np.unique(np.concatenate([bh, bt, nh, nt]))
            table.normalize_entities(touched)
        log.append({"epoch": epoch, "loss": epoch_loss / (n * max(cfg.negatives, 1))})
    return table, log


def evaluate_link_prediction(
    table: EmbeddingTable,
    kg: KnowledgeGraph,
    holdout: list[Triple],
    ks: tuple[int, ...] = (1, 3, 10),
) -> dict[str, float]:
    """Filtered ranking metrics over the holdout triples.

    Both head and tail corruption are ranked; known-true triples from the
    graph and holdout are excluded from the competitor set.
    """
    if not holdout:
        raise EmptyHoldoutError("holdout is empty")
    train_set = {(t.head, t.relation, t.tail) for t in kg.triples}
    for t in holdout:
        if (t.head, t.relation, t.tail) in train_set:
            raise ValueError("holdout contains a training triple")
    known = train_set | {(t.head, t.relation, t.tail) for t in holdout}

    ranks: list[int] = []
    entities = table.entity
    for t in holdout:
        translated = entities[t.head] + table.relation[t.relation]
        scores = -_distance(translated[None, :] - entities, table.norm_p)
        true_score = scores[t.tail]
        mask = np.array(
            [(t.head, t.relation, cand) in known for cand in range(len(entities))]
        )
        mask[t.tail] = False
        competitors = scores[~mask]
        ranks.append(1 + int((competitors > true_score).sum()))

        translated = entities[t.tail] - table.relation[t.relation]
        scores = -_distance(translated[None, :] - entities, table.norm_p)
        true_score = scores[t.head]
        mask = np.array(
            [(cand, t.relation, t.tail) in known for cand in range(len(entities))]
        )
        mask[t.head] = False
        competitors = scores[~mask]
        ranks.append(1 + int((competitors > true_score).sum()))

    ranks_arr = np.array(ranks, dtype=np.float64)
    metrics = {"mrr": float((1.0 / ranks_arr).mean())}
    for k in ks:
        metrics[f"hits@{k}"] = float((ranks_arr <= k).mean())
    return metrics


def save_table(
    table: EmbeddingTable, kg: KnowledgeGraph, path: str | Path
) -> None:
    """Persist as a checkpoint plus a sidecar TSV of name -> row index."""
    path = Path(path)
    save_checkpoint(path, {"kge.entity": table.entity, "kge.relation": table.relation})
    sidecar = path.with_suffix(path.suffix + ".names.tsv")
    with sidecar.open("w", encoding="utf-8") as fh:
        for i, name in enumerate(kg.entity_names):
            fh.write(f"entity\t{name}\t{i}\n")
        for i, name in enumerate(kg.relation_names):
            fh.write(f"relation\t{name}\t{i}\n")
