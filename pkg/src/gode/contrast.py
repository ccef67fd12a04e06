"""Contrastive alignment of the molecule and KG-subgraph encoders.

Positives pair a molecule with its own subgraph; negatives pair it with
another molecule's subgraph, half drawn uniformly at random and half from
molecule neighbors (harder). The loss is binary cross entropy over the
logistic of the temperature-scaled embedding dot product, applied to the
pair label.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gode.chem import MoleculeGraph
from gode.encoder import KgEncoder, MolEncoder
from gode.kgstore import KgSubgraph, KnowledgeGraph, molecule_neighbors
from gode.metrics import roc_auc
from gode.tensor import (
    AdamState,
    Tensor,
    adam_step,
    add,
    concat,
    mul,
    reshape,
    row_sum,
    softplus,
    sum_,
)


class NoSubgraphError(ValueError):
    pass


class EmptyDatasetError(ValueError):
    pass


@dataclass
class ContrastConfig:
    negative_ratio: int = 32  # |negatives| per positive
    tau: float = 1.0
    val_fraction: float = 0.05
    lr: float = 5e-4
    weight_decay: float = 1e-3
    epochs: int = 30
    batch_size: int = 64
    patience: int = 5

    def __post_init__(self):
        if self.negative_ratio < 1:
            raise ValueError("negative_ratio must be >= 1")
        if self.tau <= 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class ContrastPair:
    molecule_id: int  # KG entity id of the molecule side
    center_id: int  # KG entity id of the subgraph center
    y: int
    kind: str  # none | rand | nbr


def build_pairs(
    kg: KnowledgeGraph,
    subgraphs: dict[int, KgSubgraph],
    cfg: ContrastConfig,
    seed: int = 0,
    positives: list[int] | None = None,
) -> list[ContrastPair]:
    """Positive plus negative pairs for every positive molecule.

    Negatives split evenly between uniform random subgraphs of other
    molecules and subgraphs of molecule neighbors (sampled with
    replacement when fewer neighbors than needed; all-random fallback
    when the molecule has none).
    """
    rng = np.random.default_rng(seed)
    if positives is None:
        positives = sorted(subgraphs)
    all_molecules = sorted(subgraphs)
    pairs: list[ContrastPair] = []
    n_nbr_target = cfg.negative_ratio // 2
    for mol in positives:
        if mol not in subgraphs:
            raise NoSubgraphError(f"molecule entity {kg.entity_names[mol]!r} has no subgraph")
        pairs.append(ContrastPair(mol, mol, 1, "none"))
        neighbors = [
            m for m in molecule_neighbors(kg, mol) if m in subgraphs and m != mol
        ]
        if neighbors:
            n_nbr = n_nbr_target
            if len(neighbors) >= n_nbr:
                chosen = rng.choice(len(neighbors), size=n_nbr, replace=False)
            else:
                chosen = rng.choice(len(neighbors), size=n_nbr, replace=True)
            for i in chosen:
                pairs.append(ContrastPair(mol, neighbors[int(i)], 0, "nbr"))
        else:
            n_nbr = 0
        others = [m for m in all_molecules if m != mol]
        if not others:
            raise NoSubgraphError("need at least two molecules to draw negatives")
        for i in rng.choice(len(others), size=cfg.negative_ratio - n_nbr, replace=True):
            pairs.append(ContrastPair(mol, others[int(i)], 0, "rand"))
    return pairs


def export_pairs_tsv(
    kg: KnowledgeGraph, pairs: list[ContrastPair], path: str | Path
) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("molecule_id\tcenter_id\ty\tkind\n")
        for p in pairs:
            fh.write(
                f"{kg.entity_names[p.molecule_id]}\t{kg.entity_names[p.center_id]}\t"
                f"{p.y}\t{p.kind}\n"
            )


def infonce_loss(h_mg: Tensor, h_kg: Tensor, labels, tau: float) -> Tensor:
    """-(1/N) sum[y log(sim) + (1-y) log(1-sim)] with
    sim = exp(dot/tau) / (exp(dot/tau) + 1).

    Written via log-sigmoid identities (log sim(l) = -softplus(-l)), which
    is the same function evaluated stably.
    """
    if h_mg.shape != h_kg.shape or h_mg.ndim != 2:
        raise ValueError(f"embedding shape mismatch: {h_mg.shape} vs {h_kg.shape}")
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (h_mg.shape[0],):
        raise ValueError(f"label shape {y.shape} does not match batch {h_mg.shape[0]}")
    logit = mul(row_sum(mul(h_mg, h_kg)), Tensor(1.0 / tau))
    # y * softplus(-logit) + (1 - y) * softplus(logit)
    per_pair = add(
        mul(softplus(mul(logit, Tensor(-1.0))), Tensor(y)),
        mul(softplus(logit), Tensor(1.0 - y)),
    )
    return sum_(per_pair) / y.shape[0]


@dataclass
class AlignResult:
    log: list[dict]
    best_epoch: int
    best_val_loss: float


def _encode_pairs(
    f_model: MolEncoder,
    g_model: KgEncoder,
    pairs: list[ContrastPair],
    molecules: dict[int, MoleculeGraph],
    subgraphs: dict[int, KgSubgraph],
    training: bool,
    rng: np.random.Generator | None,
) -> tuple[Tensor, Tensor]:
    rows_mg, rows_kg = [], []
    for p in pairs:
        _, h_mg = f_model.encode(molecules[p.molecule_id], training=training, rng=rng)
        _, _, h_kg = g_model.encode(subgraphs[p.center_id], training=training, rng=rng)
        rows_mg.append(reshape(h_mg, (1, h_mg.shape[0])))
        rows_kg.append(reshape(h_kg, (1, h_kg.shape[0])))
    return concat(rows_mg, axis=0), concat(rows_kg, axis=0)


def sim_scores(
    f_model: MolEncoder,
    g_model: KgEncoder,
    pairs: list[ContrastPair],
    molecules: dict[int, MoleculeGraph],
    subgraphs: dict[int, KgSubgraph],
    tau: float,
) -> np.ndarray:
    """Logistic similarity per pair, evaluation mode."""
    h_mg, h_kg = _encode_pairs(f_model, g_model, pairs, molecules, subgraphs, False, None)
    logit = (h_mg.data * h_kg.data).sum(axis=1) / tau
    out = np.empty_like(logit)
    pos = logit >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-logit[pos]))
    ex = np.exp(logit[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def align(
    f_model: MolEncoder,
    g_model: KgEncoder,
    pairs: list[ContrastPair],
    molecules: dict[int, MoleculeGraph],
    subgraphs: dict[int, KgSubgraph],
    cfg: ContrastConfig,
    seed: int = 0,
) -> AlignResult:
    """Jointly update both encoders to separate positive from negative pairs.

    Early stopping tracks validation loss; the best-epoch parameters are
    restored before returning.
    """
    if not pairs:
        raise EmptyDatasetError("no contrastive pairs")
    rng = np.random.default_rng(seed)
    order = np.random.default_rng([seed, 13]).permutation(len(pairs))
    n_val = int(round(cfg.val_fraction * len(pairs)))
    val = [pairs[i] for i in order[:n_val]]
    train = [pairs[i] for i in order[n_val:]]
    if not train:
        raise EmptyDatasetError("validation split consumed every pair")

    params = dict(f_model.params)
    params.update(g_model.params)
    state = AdamState()
    log: list[dict] = []
    best_val = float("inf")
    best_epoch = -1
    best_state: dict[str, np.ndarray] | None = None
    since_best = 0
    for epoch in range(cfg.epochs):
        batch_order = rng.permutation(len(train))
        train_loss = 0.0
        n_batches = 0
        for start in range(0, len(train), cfg.batch_size):
            idx = batch_order[start : start + cfg.batch_size]
            batch = [train[i] for i in idx]
            h_mg, h_kg = _encode_pairs(
                f_model, g_model, batch, molecules, subgraphs, True, rng
            )
            loss = infonce_loss(h_mg, h_kg, [p.y for p in batch], cfg.tau)
            loss.backward()
            # the mask row never enters the alignment objective
            active = {n: p for n, p in params.items() if p.grad is not None}
            adam_step(active, state, cfg.lr, weight_decay=cfg.weight_decay)
            train_loss += loss.item()
            n_batches += 1
        entry = {"stage": "contrast", "epoch": epoch, "loss": train_loss / n_batches}
        if val:
            h_mg, h_kg = _encode_pairs(
                f_model, g_model, val, molecules, subgraphs, False, None
            )
            val_loss = infonce_loss(h_mg, h_kg, [p.y for p in val], cfg.tau).item()
            entry["val_loss"] = val_loss
        else:
            val_loss = entry["loss"]
        log.append(entry)
        if val_loss < best_val - 1e-9:
            best_val = val_loss
            best_epoch = epoch
            best_state = {name: t.data.copy() for name, t in params.items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    if best_state is not None:
        for name, t in params.items():
            t.data = best_state[name]
            t.grad = None
    return AlignResult(log=log, best_epoch=best_epoch, best_val_loss=best_val)
