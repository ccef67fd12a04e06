"""Deterministic toy corpora and knowledge graphs for desk-scale runs.

Everything here is seeded: the same seed always yields the same corpus
files, byte for byte. The bundled data under ``data/toy`` is produced by
``python -m gode.toydata data/toy``.
"""

from __future__ import annotations

import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from gode.chem import (
    MoleculeRecord,
    canonical_smiles,
    detect_motifs,
    parse_smiles,
    scaffold_key,
)
from gode.chem.io import write_molecule_csv
from gode.chem.labels import ring_counts
from gode.kgstore import KnowledgeGraph, Triple

_SCAFFOLD_TEMPLATES = (
    "c1cc{a}ccc1{b}",      # benzene
    "n1cc{a}ccc1",         # pyridine-like
    "c1cc{a}oc1",          # furan-like
    "c1cc{a}sc1",          # thiophene-like
    "c1cc[nH]c1{b}",       # pyrrole-like
    "C1CC{a}CCC1{b}",      # cyclohexane
    "C1CC{a}CC1",          # cyclopentane
    "c1ccc2cc{a}ccc2c1",   # fused bicyclic
    "C1CC{a}C1",           # cyclobutane
    "n1cc{a}cnc1",         # diazine-like
    "C1CC{a}CCCC1",        # cycloheptane
    "C1CO{a}CC1",          # oxolane-like
    "C1CN{a}CC1",          # azolidine-like
    "C1CC{a}OCC1",         # oxane-like
    "C1CC{a}NCC1",         # azinane-like
    "C1CC{a}SCC1",         # thiane-like
)

_PLAIN_FRAGMENTS = ("(C)", "(CC)", "(CCC)", "(O)", "(N)", "(OC)", "(F)", "(Cl)", "(Br)", "(S)", "(C#N)", "([N+](=O)[O-])", "(CO)", "(CN)")
_CARBONYL_FRAGMENTS = ("(C(=O)O)", "(C(=O)C)", "(C=O)", "(C(=O)N)", "(C(=O)OC)")
# ring-bearing substituents compound the scaffold itself; they use ring
# digit 9 so they can sit inside a template whose own ring is still open
_RING_FRAGMENTS = (
    "(c9ccccc9)", "(C9CC9)", "(C9CCC9)", "(C9CCCC9)", "(c9ccncc9)",
    "(Cc9ccccc9)", "(c9ccoc9)", "(c9ccsc9)", "(CC9CC9)", "(OC9CC9)",
    "(Cc9ccncc9)", "(CCc9ccccc9)", "(C9CCNC9)", "(C9CCOC9)",
)
_CARBONYL_RING_FRAGMENTS = (
    "(C(=O)c9ccccc9)", "(C(=O)C9CC9)", "(C(=O)Oc9ccccc9)", "(C(=O)NC9CC9)",
)

_ACYCLIC_CORES = (
    "CCO", "CCC", "CCCC", "CC(C)C", "CCN", "CCS", "CCCl", "CCOC", "CC#N",
    "CCCO", "CC(C)O", "CCCN", "OCCO", "CCOCC", "CSC",
)
_ACYCLIC_CARBONYL = ("CC(=O)O", "CC=O", "CC(=O)C", "CC(=O)N", "CC(=O)OC", "CCC(=O)O", "CCC=O")


def make_molecule_corpus(n: int, seed: int = 0, carbonyl_rate: float = 0.45) -> list[MoleculeRecord]:
    """Generate ``n`` distinct parseable molecules with varied scaffolds."""
    rng = np.random.default_rng(seed)
    seen: set[str] = set()
    records: list[MoleculeRecord] = []
    attempts = 0
    while len(records) < n and attempts < n * 200:
        attempts += 1
        want_carbonyl = rng.random() < carbonyl_rate
        if rng.random() < 0.88:
            template = _SCAFFOLD_TEMPLATES[rng.integers(len(_SCAFFOLD_TEMPLATES))]
            slots = {"a": "", "b": ""}
            attach_ring = rng.random() < 0.55
            if want_carbonyl:
                pool = _CARBONYL_RING_FRAGMENTS if attach_ring else _CARBONYL_FRAGMENTS
                slots["a"] = pool[rng.integers(len(pool))]
            else:
                pool = _RING_FRAGMENTS if attach_ring else _PLAIN_FRAGMENTS
                if attach_ring or rng.random() < 0.85:
                    slots["a"] = pool[rng.integers(len(pool))]
            if "{b}" in template and rng.random() < 0.45:
                slots["b"] = _PLAIN_FRAGMENTS[rng.integers(len(_PLAIN_FRAGMENTS))].strip("()")
            smiles = template.format(**slots)
        else:
            cores = _ACYCLIC_CARBONYL if want_carbonyl else _ACYCLIC_CORES
            smiles = cores[rng.integers(len(cores))]
        try:
            graph = parse_smiles(smiles)
        except ValueError:
            continue
        key = canonical_smiles(graph)
        if key in seen:
            continue
        seen.add(key)
        records.append(MoleculeRecord(f"mol{len(records):04d}", smiles, ()))
    if len(records) < n:
        raise RuntimeError(f"could only generate {len(records)} of {n} molecules")
    return records


def with_task_labels(records: list[MoleculeRecord], kind: str) -> tuple[list[str], list[MoleculeRecord]]:
    """Attach labels computed from structure.

    ``classification``: has_carbonyl / has_nitro motif bits.
    ``regression``: heavy-atom count.
    """
    out = []
    if kind == "classification":
        tasks = ["has_carbonyl"]
        for rec in records:
            bits = detect_motifs(parse_smiles(rec.smiles))
            out.append(
                MoleculeRecord(rec.id, rec.smiles, (float(bits["carbonyl"]),))
            )
    elif kind == "multitask":
        # second task sparse, with deterministically missing cells
        tasks = ["has_carbonyl", "has_halide"]
        for k, rec in enumerate(records):
            bits = detect_motifs(parse_smiles(rec.smiles))
            second = None if k % 5 == 0 else float(bits["halide"])
            out.append(
                MoleculeRecord(rec.id, rec.smiles, (float(bits["carbonyl"]), second))
            )
    elif kind == "regression":
        tasks = ["heavy_atoms"]
        for rec in records:
            g = parse_smiles(rec.smiles)
            out.append(MoleculeRecord(rec.id, rec.smiles, (float(g.num_atoms),)))
    else:
        raise ValueError(f"unknown task kind {kind!r}")
    return tasks, out


_FEATURE_MOTIFS = ("hydroxyl", "carbonyl", "amine", "nitro", "halide", "aromatic_ring")


def make_molkg_lines(
    records: list[MoleculeRecord],
    seed: int = 0,
    extra_molecules: int = 5,
) -> tuple[list[str], list[str]]:
    """MolKG-format triple and type lines over a molecule corpus.

    Attribute edges carry raw numeric tails (pre-binning); motif, disease,
    gene, pathway, drug, and same-scaffold neighbor edges make node types
    and relations predictable from structure. A few structure-less
    molecules (mx*) exercise the missing-SMILES paths.
    """
    rng = np.random.default_rng(seed)
    triples: list[tuple[str, str, str]] = []
    types: dict[str, str] = {}

    def add(head, rel, tail, tail_type):
        triples.append((head, rel, tail))
        types.setdefault(tail, tail_type)

    by_scaffold: dict[str, list[str]] = defaultdict(list)
    for rec in records:
        g = parse_smiles(rec.smiles)
        bits = detect_motifs(g)
        types[rec.id] = "molecule"
        rings, _ = ring_counts(g)
        add(rec.id, "heavy_atom_count", str(g.num_atoms), "value")
        add(rec.id, "ring_count", str(rings), "value")
        weight = sum(a.explicit_h for a in g.atoms) + 12.0 * g.num_atoms
        add(rec.id, "approx_weight", f"{weight:.1f}", "value")
        for motif in _FEATURE_MOTIFS:
            if bits[motif]:
                add(rec.id, "has_feature", f"feat_{motif}", "effect/phenotype")
        if bits["carbonyl"]:
            add(rec.id, "indication", "dis_acyl", "disease")
        if bits["nitro"] or bits["halide"]:
            add(rec.id, "indication", "dis_halo", "disease")
        if any(a.element == "S" for a in g.atoms):
            add(rec.id, "binds", "gene_S", "gene/protein")
        if any(a.element == "N" for a in g.atoms):
            add(rec.id, "binds", "gene_N", "gene/protein")
        add(rec.id, "in_pathway", f"path_{rings % 2}", "pathway")
        if rng.random() < 0.2:
            add(rec.id, "to_drug", f"drug_{rng.integers(6)}", "drug")
        by_scaffold[scaffold_key(g)].append(rec.id)

    for ids in by_scaffold.values():
        for a, b in zip(ids, ids[1:]):
            add(a, "neighbor_2d", b, "molecule")

    mol_ids = [rec.id for rec in records]
    for k in range(extra_molecules):
        name = f"mx{k}"
        types[name] = "molecule"
        add(name, "has_feature", f"feat_{_FEATURE_MOTIFS[k % len(_FEATURE_MOTIFS)]}", "effect/phenotype")
        add(name, "neighbor_2d", mol_ids[int(rng.integers(len(mol_ids)))], "molecule")

    triple_lines = [f"{h}\t{r}\t{t}" for h, r, t in triples]
    type_lines = [f"{name}\t{tname}" for name, tname in sorted(types.items())]
    return triple_lines, type_lines


def make_synthetic_kge_kg(
    n_items: int = 35, n_classes: int = 3, n_relations: int = 5, seed: int = 5
) -> KnowledgeGraph:
    """50-entity benchmark graph with latent-class translation structure.

    Items carry a hidden class; relation k maps an item of class c to the
    category entity (k, (c + k) mod n_classes). Held-out triples are
    predictable from an item's other edges, and the whole structure is
    exactly representable by translations.
    """
    rng = np.random.default_rng(seed)
    names = [f"m{i}" for i in range(n_items)]
    names += [f"cat{k}_{j}" for k in range(n_relations) for j in range(n_classes)]
    types = ["molecule"] * n_items + ["value"] * (n_relations * n_classes)
    classes = rng.integers(0, n_classes, size=n_items)
    triples = []
    for k in range(n_relations):
        for i in range(n_items):
            j = (int(classes[i]) + k) % n_classes
            triples.append(Triple(i, k, n_items + k * n_classes + j))
    return KnowledgeGraph(
        entity_names=names,
        entity_types=types,
        relation_names=[f"r{k}" for k in range(n_relations)],
        triples=triples,
    )


def write_toy_files(outdir: str | Path, seed: int = 0) -> dict[str, Path]:
    """Write the bundled toy dataset; returns the paths by role."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    pretrain_corpus = make_molecule_corpus(200, seed=seed)
    paths["pretrain_corpus"] = outdir / "pretrain_molecules.csv"
    write_molecule_csv(paths["pretrain_corpus"], [], pretrain_corpus)

    task_corpus = make_molecule_corpus(500, seed=seed + 1)
    cls_tasks, cls_records = with_task_labels(task_corpus, "classification")
    paths["classification"] = outdir / "toy_classification.csv"
    write_molecule_csv(paths["classification"], cls_tasks, cls_records)
    multi_tasks, multi_records = with_task_labels(task_corpus, "multitask")
    paths["multitask"] = outdir / "toy_multitask.csv"
    write_molecule_csv(paths["multitask"], multi_tasks, multi_records)
    reg_tasks, reg_records = with_task_labels(task_corpus, "regression")
    paths["regression"] = outdir / "toy_regression.csv"
    write_molecule_csv(paths["regression"], reg_tasks, reg_records)

    triple_lines, type_lines = make_molkg_lines(pretrain_corpus, seed=seed)
    paths["kg_triples"] = outdir / "kg_triples.tsv"
    paths["kg_triples"].write_text(
        "# toy molecule-centric knowledge graph\n" + "\n".join(triple_lines) + "\n",
        encoding="utf-8",
    )
    paths["kg_types"] = outdir / "kg_entity_types.tsv"
    paths["kg_types"].write_text("\n".join(type_lines) + "\n", encoding="utf-8")

    kge_kg = make_synthetic_kge_kg()
    paths["kge_triples"] = outdir / "kge_benchmark_triples.tsv"
    with paths["kge_triples"].open("w", encoding="utf-8") as fh:
        for t in kge_kg.triples:
            fh.write(
                f"{kge_kg.entity_names[t.head]}\t{kge_kg.relation_names[t.relation]}\t"
                f"{kge_kg.entity_names[t.tail]}\n"
            )
    paths["kge_types"] = outdir / "kge_benchmark_types.tsv"
    with paths["kge_types"].open("w", encoding="utf-8") as fh:
        for name, tname in zip(kge_kg.entity_names, kge_kg.entity_types):
            fh.write(f"{name}\t{tname}\n")
    return paths


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "data/toy"
    written = write_toy_files(target)
    for role, path in written.items():
        print(f"{role}: {path}")
