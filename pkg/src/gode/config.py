"""Line-based run configuration: ``[section]`` headers, ``key = value``
pairs, ``#`` comments. Unknown sections or keys fail validation before
any compute, as do referenced paths that do not exist."""

from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# section -> key -> caster
SCHEMA: dict[str, dict[str, object]] = {
    "run": {"seed": int},
    "data": {
        "corpus": str,
        "kg_triples": str,
        "kg_entity_types": str,
        "dataset": str,
        "dataset_name": str,
        "task": str,
        "metric": str,
    },
    "paths": {
        "kg_dir": str,
        "kge_checkpoint": str,
        "pretrained_mgnn_checkpoint": str,
        "pretrained_kgnn_checkpoint": str,
        "mgnn_checkpoint": str,
        "kgnn_checkpoint": str,
        "finetuned_checkpoint": str,
    },
    "kge": {
        "dim": int,
        "norm_p": int,
        "margin": float,
        "epochs": int,
        "lr": float,
        "negatives": int,
        "batch_size": int,
    },
    "encoder": {
        "hidden_dim": int,
        "layers": int,
        "dropout": float,
        "activation": str,
        "aggregation": str,
    },
    "pretrain_mol": {
        "epochs": int,
        "batch_size": int,
        "lr": float,
        "weight_decay": float,
        "node_sample_fraction": float,
    },
    "pretrain_kg": {
        "epochs": int,
        "batch_size": int,
        "lr": float,
        "weight_decay": float,
        "kappa": int,
        "mask_fraction": float,
        "lambda_edge": float,
        "lambda_node": float,
        "lambda_motif": float,
        "val_fraction": float,
        "kge_init": _parse_bool,
    },
    "contrast": {
        "negative_ratio": int,
        "tau": float,
        "lr": float,
        "weight_decay": float,
        "epochs": int,
        "batch_size": int,
        "patience": int,
        "val_fraction": float,
    },
    "finetune": {
        "epochs": int,
        "warmup_epochs": int,
        "batch_size": int,
        "mlp_hidden": int,
        "mlp_layers": int,
        "max_lr": float,
        "final_lr": float,
        "weight_decay": float,
        "seeds": int,
        "embedding": str,
        "descriptor_length": int,
        "train_encoder": _parse_bool,
    },
}

# config keys holding filesystem paths, resolved relative to the config file
_PATH_KEYS = {("data", k) for k in ("corpus", "kg_triples", "kg_entity_types", "dataset")}
_PATH_KEYS |= {("paths", k) for k in SCHEMA["paths"]}


class RunConfig:
    def __init__(self, values: dict[tuple[str, str], object], source: Path | None = None):
        self._values = values
        self.source = source

    def get(self, section: str, key: str, default=None):
        return self._values.get((section, key), default)

    def require(self, section: str, key: str):
        if (section, key) not in self._values:
            raise ConfigError(f"missing required config key [{section}] {key}")
        return self._values[(section, key)]

    def section(self, name: str) -> dict[str, object]:
        return {k: v for (s, k), v in self._values.items() if s == name}

    def items(self):
        return sorted(
            ((s, k, v) for (s, k), v in self._values.items()),
            key=lambda t: (t[0], t[1]),
        )


def parse_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values: dict[tuple[str, str], object] = {}
    section = None
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"{path}:{line_no}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
        if section is None:
            raise ConfigError(f"{path}:{line_no}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in SCHEMA[section]:
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r} in [{section}]")
        caster = SCHEMA[section][key]
        try:
            parsed = caster(value)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{path}:{line_no}: bad value for {key!r}: {exc}") from None
        if (section, key) in _PATH_KEYS:
            parsed = str((path.parent / parsed).resolve()) if not Path(parsed).is_absolute() else parsed
        values[(section, key)] = parsed
    return RunConfig(values, source=path)


def check_paths_exist(cfg: RunConfig, keys: list[tuple[str, str]]) -> None:
    """Validate that the path-valued keys this command reads are present
    and point at existing files/directories."""
    for section, key in keys:
        value = cfg.require(section, key)
        if not Path(str(value)).exists():
            raise ConfigError(f"[{section}] {key} = {value}: path does not exist")
