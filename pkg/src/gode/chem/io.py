"""Molecule dataset files: CSV with header ``id,smiles,<task columns...>``."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class MoleculeRecord:
    id: str
    smiles: str
    labels: tuple[float | None, ...]  # None encodes a missing cell


def read_molecule_csv(path: str | Path) -> tuple[list[str], list[MoleculeRecord]]:
    """Read a molecule dataset; returns (task names, records).

    Missing labels are empty cells. Raises ValueError on a malformed
    header or non-numeric label cells.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(header) < 2 or header[0] != "id" or header[1] != "smiles":
            raise ValueError(f"{path}: header must start with 'id,smiles'")
        tasks = header[2:]
        records = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{line_no}: expected {len(header)} columns")
            labels = []
            for cell in row[2:]:
                cell = cell.strip()
                if cell == "":
                    labels.append(None)
                else:
                    try:
                        labels.append(float(cell))
                    except ValueError:
                        raise ValueError(
                            f"{path}:{line_no}: non-numeric label {cell!r}"
                        ) from None
            records.append(MoleculeRecord(row[0], row[1], tuple(labels)))
    return tasks, records


def write_molecule_csv(
    path: str | Path, tasks: list[str], records: list[MoleculeRecord]
) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "smiles", *tasks])
        for rec in records:
            cells = ["" if v is None else format(v, "g") for v in rec.labels]
            writer.writerow([rec.id, rec.smiles, *cells])
