"""Stage orchestration: build-kg, train-kge, pretrain-mol, pretrain-kg,
contrast, finetune, eval, export-embeddings.

Each command takes ``--config`` plus optional ``--seed`` and ``--out``,
writes its data files and figures into the output directory, and records
a manifest with config/input/output hashes. Exit codes: 0 success,
1 config error, 2 missing input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from gode import contrast as contrast_mod
from gode import finetune as finetune_mod
from gode import kge as kge_mod
from gode import kgstore, pretrain, report
from gode.chem import descriptor_features, parse_smiles, read_molecule_csv
from gode.config import ConfigError, RunConfig, check_paths_exist, parse_config
from gode.encoder import EncoderConfig, KgEncoder, MolEncoder
from gode.tensor import NonFiniteError, Tensor, load_checkpoint, save_checkpoint

log = logging.getLogger("gode")


class MissingInputError(FileNotFoundError):
    pass


def worker_count() -> int:
    """Thread cap from GODE_THREADS; defaults to 1 (fully deterministic)."""
    raw = os.environ.get("GODE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _parallel_map(fn, items):
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _config_hash(cfg: RunConfig) -> str:
    canonical = "\n".join(f"{s}.{k}={v}" for s, k, v in cfg.items())
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_jsonl(path: Path, entries: list[dict]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def _write_manifest(
    outdir: Path,
    stage: str,
    cfg: RunConfig,
    seed: int,
    inputs: dict[str, Path],
    outputs: list[Path],
    metrics: dict,
    wall_time: float,
) -> Path:
    manifest = {
        "stage": stage,
        "seed": seed,
        "config_hash": _config_hash(cfg),
        "inputs": {name: _sha256(Path(p)) for name, p in sorted(inputs.items())},
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
        "files": sorted(p.name for p in outputs),
        "metrics": metrics,
        "wall_time_s": round(wall_time, 3),
    }
    path = outdir / "manifest.json"
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path


def _outdir(args, stage: str) -> Path:
    out = Path(args.out) if args.out else Path("runs") / stage
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(cfg: RunConfig, args) -> int:
    if args.seed is not None:
        return args.seed
    return int(cfg.get("run", "seed", 0))


def _encoder_config(cfg: RunConfig) -> EncoderConfig:
    sec = cfg.section("encoder")
    return EncoderConfig(
        hidden_dim=int(sec.get("hidden_dim", 1200)),
        layers=int(sec.get("layers", 3)),
        dropout=float(sec.get("dropout", 0.1)),
        activation=str(sec.get("activation", "prelu")),
        aggregation=str(sec.get("aggregation", "mean")),
    )


def _input_file(path_str: object, what: str) -> Path:
    if path_str is None:
        raise MissingInputError(f"missing input: {what} (set it in the config)")
    path = Path(str(path_str))
    if not path.exists():
        raise MissingInputError(f"missing input: {what} at {path}")
    return path


def _load_kg(cfg: RunConfig) -> tuple[kgstore.KnowledgeGraph, dict[str, Path]]:
    kg_dir = _input_file(cfg.get("paths", "kg_dir"), "built knowledge graph directory")
    triples = _input_file(kg_dir / "kg_triples.tsv", "normalized triples")
    types = _input_file(kg_dir / "kg_entity_types.tsv", "normalized entity types")
    kg = kgstore.ingest_triples(triples, types)
    return kg, {"kg_triples": triples, "kg_entity_types": types}


def _load_corpus(cfg: RunConfig) -> tuple[Path, list]:
    corpus_path = _input_file(cfg.get("data", "corpus"), "molecule corpus CSV")
    _, records = read_molecule_csv(corpus_path)
    return corpus_path, records


def _corpus_structures(records) -> dict[str, object]:
    return {rec.id: parse_smiles(rec.smiles) for rec in records}


def _kg_encoder_from_state(enc_cfg: EncoderConfig, state: dict) -> KgEncoder:
    model = KgEncoder(
        enc_cfg,
        state["kgnn.entity_input"],
        state["kgnn.relation_input"],
    )
    model.load_state(state)
    return model


def _extract_all_subgraphs(kg, kappa: int):
    subgraphs = {}
    for mol in sorted(kg.molecule_set):
        subgraphs[mol] = kgstore.extract_subgraph(kg, mol, kappa)
    return subgraphs


# ---------------------------------------------------------------- stages


def cmd_build_kg(cfg: RunConfig, args) -> int:
    check_paths_exist(cfg, [("data", "kg_triples"), ("data", "kg_entity_types")])
    outdir = _outdir(args, "build-kg")
    started = time.time()
    triples_path = Path(str(cfg.require("data", "kg_triples")))
    types_path = Path(str(cfg.require("data", "kg_entity_types")))
    kg = kgstore.ingest_triples(triples_path, types_path)
    normalized, binning = kgstore.normalize_values(kg)
    log.info(
        "ingested %d triples, %d entities, %d relations; %d after binning",
        len(kg.triples), kg.num_entities, kg.num_relations, len(normalized.triples),
    )
    out_triples = outdir / "kg_triples.tsv"
    with out_triples.open("w", encoding="utf-8") as fh:
        for t in normalized.triples:
            fh.write(
                f"{normalized.entity_names[t.head]}\t"
                f"{normalized.relation_names[t.relation]}\t"
                f"{normalized.entity_names[t.tail]}\n"
            )
    out_types = outdir / "kg_entity_types.tsv"
    with out_types.open("w", encoding="utf-8") as fh:
        for name, tname in zip(normalized.entity_names, normalized.entity_types):
            fh.write(f"{name}\t{tname}\n")
    out_binning = outdir / "value_binning.json"
    out_binning.write_text(
        json.dumps(
            {
                "ranges": binning.ranges,
                "counts": binning.counts,
                "edges": binning.edges,
                "degenerate": binning.degenerate,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    metrics = {
        "triples": len(normalized.triples),
        "entities": normalized.num_entities,
        "relations": normalized.num_relations,
        "molecules": len(normalized.molecule_set),
    }
    _write_manifest(
        outdir,
        "build-kg",
        cfg,
        _seed(cfg, args),
        {"kg_triples": triples_path, "kg_entity_types": types_path},
        [out_triples, out_types, out_binning],
        metrics,
        time.time() - started,
    )
    return 0


def cmd_train_kge(cfg: RunConfig, args) -> int:
    outdir = _outdir(args, "train-kge")
    started = time.time()
    seed = _seed(cfg, args)
    kg, inputs = _load_kg(cfg)
    sec = cfg.section("kge")
    kge_cfg = kge_mod.KgeConfig(
        dim=int(sec.get("dim", 1200)),
        norm_p=int(sec.get("norm_p", 2)),
        margin=float(sec.get("margin", 1.0)),
        epochs=int(sec.get("epochs", 10)),
        lr=float(sec.get("lr", 1e-4)),
        negatives=int(sec.get("negatives", 1)),
        batch_size=int(sec.get("batch_size", 128)),
    )
    table, train_log = kge_mod.train(kg, kge_cfg, seed=seed)
    ckpt = outdir / "kge.ckpt"
    kge_mod.save_table(table, kg, ckpt)
    log_path = outdir / "train_log.jsonl"
    entries = [{"stage": "train-kge", **e} for e in train_log]
    _write_jsonl(log_path, entries)
    fig = outdir / "loss_curve.png"
    report.render_loss_curves(entries, fig, "KG embedding training")
    outputs = [ckpt, Path(str(ckpt) + ".names.tsv"), log_path, fig]
    metrics = {"final_loss": train_log[-1]["loss"] if train_log else None}
    _write_manifest(outdir, "train-kge", cfg, seed, inputs, outputs, metrics, time.time() - started)
    return 0


def cmd_pretrain_mol(cfg: RunConfig, args) -> int:
    outdir = _outdir(args, "pretrain-mol")
    started = time.time()
    seed = _seed(cfg, args)
    corpus_path, records = _load_corpus(cfg)
    graphs = [parse_smiles(rec.smiles) for rec in records]
    enc_cfg = _encoder_config(cfg)
    sec = cfg.section("pretrain_mol")
    pre_cfg = pretrain.MoleculePretrainConfig(
        node_sample_fraction=float(sec.get("node_sample_fraction", 0.15)),
        epochs=int(sec.get("epochs", 50)),
        batch_size=int(sec.get("batch_size", 32)),
        lr=float(sec.get("lr", 1.5e-4)),
        weight_decay=float(sec.get("weight_decay", 1e-7)),
    )
    model = MolEncoder(enc_cfg, seed=seed)
    vocab, heads, train_log = pretrain.pretrain_molecules(model, graphs, pre_cfg, seed=seed)
    ckpt = outdir / "mgnn.ckpt"
    save_checkpoint(ckpt, model.state())
    vocab_path = outdir / "context_vocab.tsv"
    with vocab_path.open("w", encoding="utf-8") as fh:
        for idx, key in enumerate(vocab.keys):
            fh.write(f"{idx}\t{key}\n")
    log_path = outdir / "train_log.jsonl"
    _write_jsonl(log_path, train_log)
    fig = outdir / "loss_curve.png"
    report.render_loss_curves(train_log, fig, "Molecule-level pre-training")
    metrics = {"final_loss": train_log[-1]["loss"], "vocab_size": len(vocab)}
    _write_manifest(
        outdir, "pretrain-mol", cfg, seed, {"corpus": corpus_path},
        [ckpt, vocab_path, log_path, fig], metrics, time.time() - started,
    )
    return 0


def cmd_pretrain_kg(cfg: RunConfig, args) -> int:
    outdir = _outdir(args, "pretrain-kg")
    started = time.time()
    seed = _seed(cfg, args)
    kg, inputs = _load_kg(cfg)
    corpus_path, records = _load_corpus(cfg)
    inputs["corpus"] = corpus_path
    enc_cfg = _encoder_config(cfg)
    sec = cfg.section("pretrain_kg")
    pre_cfg = pretrain.KgPretrainConfig(
        lambda_edge=float(sec.get("lambda_edge", 1.5)),
        lambda_node=float(sec.get("lambda_node", 1.5)),
        lambda_motif=float(sec.get("lambda_motif", 1.8)),
        kappa=int(sec.get("kappa", 2)),
        mask_fraction=float(sec.get("mask_fraction", 0.15)),
        epochs=int(sec.get("epochs", 100)),
        batch_size=int(sec.get("batch_size", 16)),
        lr=float(sec.get("lr", 1e-4)),
        weight_decay=float(sec.get("weight_decay", 1e-5)),
        val_fraction=float(sec.get("val_fraction", 0.1)),
    )
    use_kge = bool(sec.get("kge_init", True)) and not args.from_scratch
    if use_kge:
        ckpt_path = _input_file(cfg.get("paths", "kge_checkpoint"), "KGE checkpoint")
        state = load_checkpoint(ckpt_path)
        if state["kge.entity"].shape[0] != kg.num_entities:
            raise MissingInputError(
                "KGE checkpoint entity count does not match the built graph"
            )
        table = kge_mod.EmbeddingTable(
            entity=state["kge.entity"], relation=state["kge.relation"]
        )
        model = KgEncoder.from_kge(table, enc_cfg, seed=seed)
        inputs["kge_checkpoint"] = ckpt_path
    else:
        model = KgEncoder.random(
            kg.num_entities, kg.num_relations, enc_cfg.hidden_dim, enc_cfg, seed=seed
        )

    structures = {}
    for rec in records:
        if rec.id in kg.entity_index:
            structures[kg.entity_index[rec.id]] = parse_smiles(rec.smiles)
    subgraphs = _extract_all_subgraphs(kg, pre_cfg.kappa)
    samples = pretrain.make_kg_samples(kg, list(subgraphs.values()), structures)
    heads, train_log = pretrain.pretrain_kg(model, kg, samples, pre_cfg, seed=seed)

    ckpt = outdir / "kgnn.ckpt"
    save_checkpoint(ckpt, model.state())
    log_path = outdir / "train_log.jsonl"
    _write_jsonl(log_path, train_log)
    fig = outdir / "loss_curve.png"
    report.render_loss_curves(train_log, fig, "KG-level pre-training")
    metrics = {
        "final_loss": train_log[-1]["loss"],
        "final_val_loss": train_log[-1].get("val_loss"),
        "kge_init": use_kge,
    }
    _write_manifest(
        outdir, "pretrain-kg", cfg, seed, inputs,
        [ckpt, log_path, fig], metrics, time.time() - started,
    )
    return 0


def cmd_contrast(cfg: RunConfig, args) -> int:
    outdir = _outdir(args, "contrast")
    started = time.time()
    seed = _seed(cfg, args)
    kg, inputs = _load_kg(cfg)
    corpus_path, records = _load_corpus(cfg)
    inputs["corpus"] = corpus_path
    enc_cfg = _encoder_config(cfg)
    kappa = int(cfg.get("pretrain_kg", "kappa", 2))

    if args.from_scratch:
        f_model = MolEncoder(enc_cfg, seed=seed)
        g_model = KgEncoder.random(
            kg.num_entities, kg.num_relations, enc_cfg.hidden_dim, enc_cfg, seed=seed + 1
        )
    else:
        mgnn_path = _input_file(
            cfg.get("paths", "pretrained_mgnn_checkpoint"),
            "pre-trained molecule encoder checkpoint",
        )
        kgnn_path = _input_file(
            cfg.get("paths", "pretrained_kgnn_checkpoint"),
            "pre-trained KG encoder checkpoint",
        )
        f_model = MolEncoder(enc_cfg, seed=seed)
        f_model.load_state(load_checkpoint(mgnn_path))
        g_model = _kg_encoder_from_state(enc_cfg, load_checkpoint(kgnn_path))
        inputs["pretrained_mgnn_checkpoint"] = mgnn_path
        inputs["pretrained_kgnn_checkpoint"] = kgnn_path

    sec = cfg.section("contrast")
    con_cfg = contrast_mod.ContrastConfig(
        negative_ratio=int(sec.get("negative_ratio", 32)),
        tau=float(sec.get("tau", 1.0)),
        val_fraction=float(sec.get("val_fraction", 0.05)),
        lr=float(sec.get("lr", 5e-4)),
        weight_decay=float(sec.get("weight_decay", 1e-3)),
        epochs=int(sec.get("epochs", 30)),
        batch_size=int(sec.get("batch_size", 64)),
        patience=int(sec.get("patience", 5)),
    )
    molecules = {}
    for rec in records:
        if rec.id in kg.entity_index:
            molecules[kg.entity_index[rec.id]] = parse_smiles(rec.smiles)
    subgraphs = {
        mol: sub
        for mol, sub in _extract_all_subgraphs(kg, kappa).items()
        if mol in molecules
    }
    pairs = contrast_mod.build_pairs(kg, subgraphs, con_cfg, seed=seed, positives=sorted(molecules))
    pairs_path = outdir / "pairs.tsv"
    contrast_mod.export_pairs_tsv(kg, pairs, pairs_path)
    result = contrast_mod.align(f_model, g_model, pairs, molecules, subgraphs, con_cfg, seed=seed)

    mgnn_out = outdir / "mgnn.ckpt"
    kgnn_out = outdir / "kgnn.ckpt"
    save_checkpoint(mgnn_out, f_model.state())
    save_checkpoint(kgnn_out, g_model.state())
    log_path = outdir / "train_log.jsonl"
    _write_jsonl(log_path, result.log)
    fig = outdir / "loss_curve.png"
    report.render_loss_curves(result.log, fig, "Contrastive alignment")
    metrics = {"best_epoch": result.best_epoch, "best_val_loss": result.best_val_loss}
    _write_manifest(
        outdir, "contrast", cfg, seed, inputs,
        [mgnn_out, kgnn_out, pairs_path, log_path, fig], metrics, time.time() - started,
    )
    return 0


def _task_spec(cfg: RunConfig, n_tasks: int) -> finetune_mod.TaskSpec:
    kind = str(cfg.get("data", "task", "classification"))
    default_metric = "roc_auc" if kind == "classification" else "rmse"
    metric = str(cfg.get("data", "metric", default_metric))
    return finetune_mod.TaskSpec(kind=kind, n_tasks=n_tasks, metric=metric)


def _finetune_config(cfg: RunConfig) -> finetune_mod.FinetuneConfig:
    sec = cfg.section("finetune")
    return finetune_mod.FinetuneConfig(
        epochs=int(sec.get("epochs", 20)),
        warmup_epochs=int(sec.get("warmup_epochs", 2)),
        batch_size=int(sec.get("batch_size", 32)),
        mlp_hidden=int(sec.get("mlp_hidden", 200)),
        mlp_layers=int(sec.get("mlp_layers", 2)),
        max_lr=float(sec.get("max_lr", 1e-3)),
        final_lr=float(sec.get("final_lr", 1e-4)),
        weight_decay=float(sec.get("weight_decay", 0.0)),
        descriptor_length=int(sec.get("descriptor_length", 200)),
        train_encoder=bool(sec.get("train_encoder", True)),
        embedding=str(sec.get("embedding", "mg+f+kg")),
    )


def _precompute_h_kg(cfg: RunConfig, records, enc_cfg, kgnn_state) -> dict[str, np.ndarray]:
    """Frozen KG embeddings per dataset molecule; zero rows for absentees."""
    kg, _ = _load_kg(cfg)
    g_model = _kg_encoder_from_state(enc_cfg, kgnn_state)
    kappa = int(cfg.get("pretrain_kg", "kappa", 2))

    def row(rec):
        if rec.id not in kg.entity_index:
            return None
        mol = kg.entity_index[rec.id]
        if mol not in kg.molecule_set:
            return None
        sub = kgstore.extract_subgraph(kg, mol, kappa)
        _, _, h = g_model.encode(sub)
        return h.data.copy()

    rows = _parallel_map(row, list(records))
    return {rec.id: r for rec, r in zip(records, rows) if r is not None}


def cmd_finetune(cfg: RunConfig, args) -> int:
    outdir = _outdir(args, "finetune")
    started = time.time()
    base_seed = _seed(cfg, args)
    dataset_path = _input_file(cfg.get("data", "dataset"), "task dataset CSV")
    tasks, records = read_molecule_csv(dataset_path)
    if not tasks:
        raise ConfigError("dataset has no task columns")
    task = _task_spec(cfg, len(tasks))
    fin_cfg = _finetune_config(cfg)
    enc_cfg = _encoder_config(cfg)
    dataset_name = str(cfg.get("data", "dataset_name", dataset_path.stem))
    inputs = {"dataset": dataset_path}

    if args.from_scratch:
        mgnn_state = None
        kgnn_state = None
    else:
        mgnn_path = _input_file(cfg.get("paths", "mgnn_checkpoint"), "molecule encoder checkpoint")
        inputs["mgnn_checkpoint"] = mgnn_path
        mgnn_state = load_checkpoint(mgnn_path)
        kgnn_state = None
        if fin_cfg.embedding in ("kg", "mg+f+kg"):
            kgnn_path = _input_file(cfg.get("paths", "kgnn_checkpoint"), "KG encoder checkpoint")
            inputs["kgnn_checkpoint"] = kgnn_path
            kgnn_state = load_checkpoint(kgnn_path)

    h_kg = {}
    if kgnn_state is not None:
        h_kg = _precompute_h_kg(cfg, records, enc_cfg, kgnn_state)

    n_seeds = int(cfg.get("finetune", "seeds", 3))
    rows = []
    outputs = []
    test_values = []
    for k in range(n_seeds):
        seed = base_seed + k
        f_model = MolEncoder(enc_cfg, seed=seed)
        if mgnn_state is not None:
            f_model.load_state(mgnn_state)
        plan = finetune_mod.scaffold_split(records, seed=seed)
        result = finetune_mod.finetune(f_model, h_kg, records, plan, task, fin_cfg, seed=seed)
        for split, value in result.metrics.items():
            rows.append(
                {
                    "dataset": dataset_name,
                    "seed": seed,
                    "split": split,
                    "metric_name": task.metric,
                    "value": value,
                }
            )
        test_values.append(result.metrics.get("test"))
        pred_path = outdir / f"predictions_seed{seed}.csv"
        finetune_mod.write_predictions_csv(
            pred_path, result.ids["test"], tasks, result.predictions["test"]
        )
        outputs.append(pred_path)
        ckpt = outdir / f"finetuned_seed{seed}.ckpt"
        state = f_model.state()
        state.update({f"head.{n}": t.data for n, t in result.heads.items()})
        if kgnn_state is not None:
            state.update(kgnn_state)
        save_checkpoint(ckpt, state)
        outputs.append(ckpt)
        log_path = outdir / f"train_log_seed{seed}.jsonl"
        _write_jsonl(log_path, result.log)
        outputs.append(log_path)
        log.info("seed %d: test %s = %s", seed, task.metric, result.metrics.get("test"))

    values = [v for v in test_values if v is not None]
    summary = {
        "dataset": dataset_name,
        "split": "test",
        "metric_name": task.metric,
        "mean": float(np.mean(values)),
        "std": float(np.std(values)),
    }
    results_path = outdir / "results.csv"
    finetune_mod.write_results_csv(results_path, rows, summary)
    outputs.append(results_path)
    fig = outdir / "metrics.png"
    report.render_metric_bars(
        {f"seed{base_seed + k}": v for k, v in enumerate(values)},
        fig,
        f"{dataset_name}: test {task.metric}",
        ylabel=task.metric,
    )
    outputs.append(fig)
    _write_manifest(
        outdir, "finetune", cfg, base_seed, inputs, outputs,
        {"test_mean": summary["mean"], "test_std": summary["std"]},
        time.time() - started,
    )
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    outdir = _outdir(args, "eval")
    started = time.time()
    seed = _seed(cfg, args)
    dataset_path = _input_file(cfg.get("data", "dataset"), "task dataset CSV")
    ckpt_path = _input_file(cfg.get("paths", "finetuned_checkpoint"), "finetuned checkpoint")
    tasks, records = read_molecule_csv(dataset_path)
    task = _task_spec(cfg, len(tasks))
    fin_cfg = _finetune_config(cfg)
    enc_cfg = _encoder_config(cfg)
    state = load_checkpoint(ckpt_path)

    f_model = MolEncoder(enc_cfg, seed=seed)
    f_model.load_state({k: v for k, v in state.items() if k.startswith("mgnn.")})
    heads = {
        name[len("head."):]: v for name, v in state.items() if name.startswith("head.")
    }
    head_params = {n: Tensor(v, requires_grad=False) for n, v in heads.items()}
    kgnn_state = {k: v for k, v in state.items() if k.startswith("kgnn.")}
    h_kg = {}
    if kgnn_state and fin_cfg.embedding in ("kg", "mg+f+kg"):
        h_kg = _precompute_h_kg(cfg, records, enc_cfg, kgnn_state)

    plan = finetune_mod.scaffold_split(records, seed=seed)
    by_split = {"train": [], "valid": [], "test": []}
    for rec in records:
        by_split[plan.assignment[rec.id]].append(rec)
    metrics = {}
    for split, recs in by_split.items():
        if not recs:
            continue
        scores = []
        target = []
        for rec in recs:
            g = parse_smiles(rec.smiles)
            h_f = descriptor_features(g, fin_cfg.descriptor_length)
            if fin_cfg.embedding == "kg":
                row = finetune_mod.joint_row(fin_cfg, None, h_f, h_kg.get(rec.id, np.zeros(enc_cfg.hidden_dim)))
            else:
                _, h_mg = f_model.encode(g)
                row = finetune_mod.joint_row(
                    fin_cfg, h_mg, h_f, h_kg.get(rec.id, np.zeros(enc_cfg.hidden_dim))
                )
            logits = finetune_mod.apply_head(head_params, row, fin_cfg)
            scores.append(logits.data[0])
            target.append([np.nan if v is None else v for v in rec.labels])
        value, _ = finetune_mod.aggregate_metric(
            np.array(scores), np.array(target), task
        )
        metrics[split] = value

    dataset_name = str(cfg.get("data", "dataset_name", dataset_path.stem))
    results_path = outdir / "eval_results.csv"
    rows = [
        {"dataset": dataset_name, "seed": seed, "split": split,
         "metric_name": task.metric, "value": value}
        for split, value in metrics.items()
    ]
    finetune_mod.write_results_csv(results_path, rows)
    fig = outdir / "metrics.png"
    report.render_metric_bars(metrics, fig, f"{dataset_name}: {task.metric} by split", task.metric)
    _write_manifest(
        outdir, "eval", cfg, seed,
        {"dataset": dataset_path, "finetuned_checkpoint": ckpt_path},
        [results_path, fig], metrics, time.time() - started,
    )
    return 0


def cmd_export_embeddings(cfg: RunConfig, args) -> int:
    outdir = _outdir(args, "export-embeddings")
    started = time.time()
    seed = _seed(cfg, args)
    corpus_path, records = _load_corpus(cfg)
    enc_cfg = _encoder_config(cfg)
    mgnn_path = _input_file(cfg.get("paths", "mgnn_checkpoint"), "molecule encoder checkpoint")
    f_model = MolEncoder(enc_cfg, seed=seed)
    f_model.load_state(load_checkpoint(mgnn_path))
    inputs = {"corpus": corpus_path, "mgnn_checkpoint": mgnn_path}

    kgnn_path_str = cfg.get("paths", "kgnn_checkpoint")
    h_kg = {}
    if kgnn_path_str is not None:
        kgnn_path = _input_file(kgnn_path_str, "KG encoder checkpoint")
        inputs["kgnn_checkpoint"] = kgnn_path
        h_kg = _precompute_h_kg(cfg, records, enc_cfg, load_checkpoint(kgnn_path))

    out_csv = outdir / "embeddings.csv"
    d = enc_cfg.hidden_dim
    with out_csv.open("w", encoding="utf-8") as fh:
        header = ["id"] + [f"hmg_{i}" for i in range(d)] + [f"hkg_{i}" for i in range(d)]
        fh.write(",".join(header) + "\n")
        for rec in records:
            _, h_mg = f_model.encode(parse_smiles(rec.smiles))
            kg_row = h_kg.get(rec.id, np.zeros(d))
            cells = [rec.id]
            cells += [f"{v:.6g}" for v in h_mg.data]
            cells += [f"{v:.6g}" for v in kg_row]
            fh.write(",".join(cells) + "\n")
    _write_manifest(
        outdir, "export-embeddings", cfg, seed, inputs, [out_csv],
        {"rows": len(records)}, time.time() - started,
    )
    return 0


COMMANDS = {
    "build-kg": cmd_build_kg,
    "train-kge": cmd_train_kge,
    "pretrain-mol": cmd_pretrain_mol,
    "pretrain-kg": cmd_pretrain_kg,
    "contrast": cmd_contrast,
    "finetune": cmd_finetune,
    "eval": cmd_eval,
    "export-embeddings": cmd_export_embeddings,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gode",
        description="Bi-level molecular representation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument(
            "--from-scratch",
            action="store_true",
            help="skip earlier-stage checkpoints (ablation runs)",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 1
    except (MissingInputError, FileNotFoundError) as exc:
        log.error("missing input: %s", exc)
        return 2
    except NonFiniteError as exc:
        log.error("numerical failure: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
