"""Supervised property prediction from the joint representation.

The prediction input concatenates the molecule embedding, the descriptor
vector, and the (frozen, precomputed) KG embedding, in that order;
molecules absent from the KG get a zero KG block. Datasets are split by
scaffold so no ring system leaks across train/valid/test.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gode.chem import MoleculeRecord, descriptor_features, parse_smiles, scaffold_key
from gode.encoder import MolEncoder
from gode.metrics import DegenerateLabelsError, mae, rmse, roc_auc
from gode.pretrain import linear_apply, linear_params
from gode.tensor import (
    AdamState,
    NoamSchedule,
    Tensor,
    adam_step,
    bce_with_logits,
    concat,
    mse,
    relu,
    reshape,
)


class UnparseableSmilesError(ValueError):
    def __init__(self, molecule_id: str, reason: str):
        super().__init__(f"molecule {molecule_id!r}: {reason}")
        self.molecule_id = molecule_id


@dataclass(frozen=True)
class TaskSpec:
    kind: str  # classification | regression
    n_tasks: int
    metric: str  # roc_auc | rmse | mae

    def __post_init__(self):
        if self.kind == "classification" and self.metric != "roc_auc":
            raise ValueError("classification tasks report ROC-AUC")
        if self.kind == "regression" and self.metric not in ("rmse", "mae"):
            raise ValueError("regression tasks report RMSE or MAE")

    @property
    def loss(self) -> str:
        return "bce" if self.kind == "classification" else "mse"


@dataclass
class SplitPlan:
    seed: int
    assignment: dict[str, str]  # molecule id -> train | valid | test
    group_of: dict[str, str]  # molecule id -> scaffold key

    def ids(self, split: str) -> list[str]:
        return [mid for mid, s in self.assignment.items() if s == split]


def scaffold_split(
    molecules: list[MoleculeRecord],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> SplitPlan:
    """Group molecules by scaffold and greedily fill train, valid, test.

    Groups are ordered by descending size with a seeded shuffle breaking
    ties, so different seeds move the small groups around while keeping
    every scaffold within a single split.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    groups: dict[str, list[str]] = {}
    group_of: dict[str, str] = {}
    for rec in molecules:
        try:
            g = parse_smiles(rec.smiles)
        except ValueError as exc:
            raise UnparseableSmilesError(rec.id, str(exc)) from None
        key = scaffold_key(g)
        groups.setdefault(key, []).append(rec.id)
        group_of[rec.id] = key

    rng = np.random.default_rng(seed)
    keys = list(groups)
    rng.shuffle(keys)
    keys.sort(key=lambda k: -len(groups[k]))  # stable: shuffled tiebreak survives

    total = len(molecules)
    train_target = ratios[0] * total
    valid_target = ratios[1] * total
    assignment: dict[str, str] = {}
    n_train = n_valid = 0
    for key in keys:
        members = groups[key]
        if n_train < train_target:
            split = "train"
            n_train += len(members)
        elif n_valid < valid_target:
            split = "valid"
            n_valid += len(members)
        else:
            split = "test"
        for mid in members:
            assignment[mid] = split
    return SplitPlan(seed=seed, assignment=assignment, group_of=group_of)


@dataclass
class FinetuneConfig:
    epochs: int = 20
    warmup_epochs: int = 2
    batch_size: int = 32
    mlp_hidden: int = 200
    mlp_layers: int = 2
    max_lr: float = 1e-3
    final_lr: float = 1e-4
    weight_decay: float = 0.0
    descriptor_length: int = 200
    train_encoder: bool = True
    embedding: str = "mg+f+kg"  # ablation: mg | mg+f | kg | mg+f+kg

    def __post_init__(self):
        if self.embedding not in ("mg", "mg+f", "kg", "mg+f+kg"):
            raise ValueError(f"unknown embedding choice {self.embedding!r}")


class MissingCheckpointError(FileNotFoundError):
    pass


class LabelAllMissingError(ValueError):
    pass


@dataclass
class FinetuneResult:
    heads: dict[str, Tensor]
    metrics: dict[str, float]  # per split
    task_report: dict[str, object]
    predictions: dict[str, np.ndarray]  # split -> (n, tasks) scores
    ids: dict[str, list[str]]
    log: list[dict]


def _joint_dim(cfg: FinetuneConfig, hidden_dim: int) -> int:
    dims = {
        "mg": hidden_dim,
        "mg+f": hidden_dim + cfg.descriptor_length,
        "kg": hidden_dim,
        "mg+f+kg": 2 * hidden_dim + cfg.descriptor_length,
    }
    return dims[cfg.embedding]


def make_head_params(
    joint_dim: int, n_tasks: int, cfg: FinetuneConfig, seed: int
) -> dict[str, Tensor]:
    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}
    fan_in = joint_dim
    for layer in range(cfg.mlp_layers):
        params.update(linear_params(rng, f"head{layer}", fan_in, cfg.mlp_hidden))
        fan_in = cfg.mlp_hidden
    params.update(linear_params(rng, "head_out", fan_in, n_tasks))
    return params


def apply_head(params: dict[str, Tensor], x: Tensor, cfg: FinetuneConfig) -> Tensor:
    h = x
    for layer in range(cfg.mlp_layers):
        h = relu(linear_apply(params, f"head{layer}", h))
    return linear_apply(params, "head_out", h)


def joint_row(
    cfg: FinetuneConfig,
    h_mg: Tensor,
    h_f: np.ndarray,
    h_kg: np.ndarray,
) -> Tensor:
    parts = []
    if cfg.embedding in ("mg", "mg+f", "mg+f+kg"):
        parts.append(reshape(h_mg, (1, h_mg.shape[0])))
    if cfg.embedding in ("mg+f", "mg+f+kg"):
        parts.append(Tensor(h_f[None, :]))
    if cfg.embedding in ("kg", "mg+f+kg"):
        parts.append(Tensor(h_kg[None, :]))
    return parts[0] if len(parts) == 1 else concat(parts, axis=1)


def finetune(
    f_model: MolEncoder,
    h_kg_by_id: dict[str, np.ndarray],
    records: list[MoleculeRecord],
    plan: SplitPlan,
    task: TaskSpec,
    cfg: FinetuneConfig,
    seed: int = 0,
) -> FinetuneResult:
    """Train the prediction head (and optionally the molecule encoder).

    ``h_kg_by_id`` holds the precomputed, frozen KG embeddings; ids
    missing from it fall back to a zero block. Missing labels are masked
    out of the loss. Early stopping keeps the best validation epoch.
    """
    by_split: dict[str, list[MoleculeRecord]] = {"train": [], "valid": [], "test": []}
    for rec in records:
        by_split[plan.assignment[rec.id]].append(rec)
    if not by_split["train"]:
        raise ValueError("empty training split")

    hidden = f_model.cfg.hidden_dim
    kg_dim = len(next(iter(h_kg_by_id.values()))) if h_kg_by_id else hidden
    graphs = {rec.id: parse_smiles(rec.smiles) for rec in records}
    descriptors = {
        rec.id: descriptor_features(graphs[rec.id], cfg.descriptor_length)
        for rec in records
    }
    kg_rows = {
        rec.id: h_kg_by_id.get(rec.id, np.zeros(kg_dim)) for rec in records
    }

    labels = {rec.id: np.array([np.nan if v is None else v for v in rec.labels]) for rec in records}
    train_labels = np.stack([labels[r.id] for r in by_split["train"]])
    if np.isnan(train_labels).all():
        raise LabelAllMissingError("every training label is missing")

    heads = make_head_params(_joint_dim(cfg, hidden), task.n_tasks, cfg, seed + 17)
    params = dict(heads)
    if cfg.train_encoder and cfg.embedding != "kg":
        params.update(f_model.params)
    state = AdamState()
    steps_per_epoch = max(1, int(np.ceil(len(by_split["train"]) / cfg.batch_size)))
    schedule = NoamSchedule.from_rates(
        model_dim=hidden,
        warmup_steps=max(1, cfg.warmup_epochs * steps_per_epoch),
        max_lr=cfg.max_lr,
        final_lr=cfg.final_lr,
    )
    rng = np.random.default_rng(seed)
    log: list[dict] = []
    step = 0
    best_val = float("inf")
    best_state: dict[str, np.ndarray] | None = None

    def batch_loss(batch: list[MoleculeRecord], training: bool) -> Tensor:
        rows = []
        for rec in batch:
            if cfg.embedding == "kg":
                h_mg = None
                row = joint_row(cfg, None, descriptors[rec.id], kg_rows[rec.id])
            else:
                _, h_mg = f_model.encode(graphs[rec.id], training=training, rng=rng)
                row = joint_row(cfg, h_mg, descriptors[rec.id], kg_rows[rec.id])
            rows.append(row)
        joint = concat(rows, axis=0)
        logits = apply_head(heads, joint, cfg)
        target = np.stack([labels[rec.id] for rec in batch])
        mask = ~np.isnan(target)
        if not mask.any():
            raise LabelAllMissingError("batch without a single label")
        n_valid = int(mask.sum())
        n_missing = target.size - n_valid
        # zero both sides at missing cells; gradients vanish there via the mask
        safe_target = np.where(mask, target, 0.0)
        masked_logits = logits * Tensor(mask.astype(np.float64))
        if task.loss == "bce":
            raw = bce_with_logits(masked_logits, safe_target, reduction="sum")
            # each zeroed cell contributed exactly ln 2 to the sum
            return (raw + Tensor(-np.log(2.0) * n_missing)) / n_valid
        return mse(masked_logits, safe_target) * (target.size / n_valid)

    def split_predictions(split: str) -> np.ndarray:
        out = []
        for rec in by_split[split]:
            if cfg.embedding == "kg":
                row = joint_row(cfg, None, descriptors[rec.id], kg_rows[rec.id])
            else:
                _, h_mg = f_model.encode(graphs[rec.id])
                row = joint_row(cfg, h_mg, descriptors[rec.id], kg_rows[rec.id])
            logits = apply_head(heads, row, cfg)
            out.append(logits.data[0])
        return np.array(out) if out else np.zeros((0, task.n_tasks))

    def split_loss(split: str) -> float:
        if not by_split[split]:
            return float("nan")
        total = 0.0
        count = 0
        batch = by_split[split]
        for start in range(0, len(batch), cfg.batch_size):
            chunk = batch[start : start + cfg.batch_size]
            total += batch_loss(chunk, training=False).item() * len(chunk)
            count += len(chunk)
        return total / count

    train_recs = by_split["train"]
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_recs))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(train_recs), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            step += 1
            loss = batch_loss([train_recs[i] for i in idx], training=True)
            loss.backward()
            adam_step(params, state, schedule.lr(step), weight_decay=cfg.weight_decay)
            epoch_loss += loss.item()
            n_batches += 1
        entry = {"stage": "finetune", "epoch": epoch, "loss": epoch_loss / n_batches}
        val_loss = split_loss("valid")
        if not np.isnan(val_loss):
            entry["val_loss"] = val_loss
            if val_loss < best_val - 1e-12:
                best_val = val_loss
                best_state = {name: t.data.copy() for name, t in params.items()}
        log.append(entry)
    if best_state is not None:
        for name, t in params.items():
            t.data = best_state[name]
            t.grad = None

    predictions = {}
    ids = {}
    metrics: dict[str, float] = {}
    task_report: dict[str, object] = {}
    for split in ("train", "valid", "test"):
        predictions[split] = split_predictions(split)
        ids[split] = [rec.id for rec in by_split[split]]
        if not by_split[split]:
            continue
        target = np.stack([labels[rec.id] for rec in by_split[split]])
        value, report = aggregate_metric(predictions[split], target, task)
        metrics[split] = value
        task_report[split] = report
    return FinetuneResult(
        heads=heads,
        metrics=metrics,
        task_report=task_report,
        predictions=predictions,
        ids=ids,
        log=log,
    )


def aggregate_metric(
    scores: np.ndarray, target: np.ndarray, task: TaskSpec
) -> tuple[float, dict]:
    """Unweighted mean over tasks; classification tasks lacking both
    classes are skipped and counted in the report."""
    per_task = []
    skipped = 0
    for j in range(task.n_tasks):
        col_mask = ~np.isnan(target[:, j])
        if not col_mask.any():
            skipped += 1
            continue
        s = scores[col_mask, j]
        t = target[col_mask, j]
        if task.kind == "classification":
            try:
                per_task.append(roc_auc(s, t))
            except DegenerateLabelsError:
                skipped += 1
        elif task.metric == "rmse":
            per_task.append(rmse(s, t))
        else:
            per_task.append(mae(s, t))
    if not per_task:
        raise DegenerateLabelsError("no task had evaluable labels")
    return float(np.mean(per_task)), {"evaluated": len(per_task), "skipped": skipped}


def write_results_csv(
    path: str | Path, rows: list[dict], summary: dict | None = None
) -> None:
    """Results CSV: dataset,seed,split,metric_name,value plus summary rows."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("dataset,seed,split,metric_name,value\n")
        for row in rows:
            fh.write(
                f"{row['dataset']},{row['seed']},{row['split']},{row['metric_name']},"
                f"{row['value']:.6f}\n"
            )
        if summary:
            fh.write(
                f"{summary['dataset']},all,{summary['split']},"
                f"{summary['metric_name']}_mean,{summary['mean']:.6f}\n"
            )
            fh.write(
                f"{summary['dataset']},all,{summary['split']},"
                f"{summary['metric_name']}_std,{summary['std']:.6f}\n"
            )


def write_predictions_csv(
    path: str | Path, ids: list[str], tasks: list[str], scores: np.ndarray
) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("id,task,score\n")
        for i, mid in enumerate(ids):
            for j, tname in enumerate(tasks):
                fh.write(f"{mid},{tname},{scores[i, j]:.6f}\n")
