"""Flat, typed run configuration with presets and strict key validation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Unknown key, bad type, or invalid value in a run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Every knob of every pipeline stage, flat so configs diff cleanly."""

    schema_version: int = SCHEMA_VERSION
    task: str = "invoice"  # invoice | resume
    preset: str = "desk"  # desk | paper
    seed: int = 0
    workers: int = 1
    out_dir: str = "runs/out"
    # corpus generation
    num_docs: int = 1000
    num_templates: int = 10
    unseen_templates: tuple[str, ...] = ("inv-t8", "inv-t9")
    fraction_labeled: float = 0.2
    fraction_unlabeled: float = 0.8
    unseen_test_fraction: float = 0.4
    train_fraction: float = 0.7
    val_fraction: float = 0.1
    price_candidates: int = 3
    decoys_per_page: int = 2
    # model
    use_gcn: bool = True
    use_section_edges: bool = False
    use_font_features: bool = True
    use_skip_connections: bool = True
    encoder_dim: int = 64
    encoder_layers: int = 2
    encoder_heads: int = 4
    encoder_ffn: int = 128
    max_seq_len: int = 50
    dropout: float = 0.1
    gcn_hidden: int = 64
    gcn_layers: int = 2
    font_dim: int = 8
    max_font_ranks: int = 16
    merge_eps: float = 1.0
    eps_align: float = 1.0
    max_nodes: int = 100
    vocab_min_freq: int = 2
    # training
    lr_encoder: float = 1e-3
    lr_head: float = 1e-3
    batch_pages: int = 4
    max_epochs: int = 40
    patience: int = 5
    # pretraining
    mlm_epochs: int = 30
    mlm_mask_ratio: float = 0.15
    sprc_epochs: int = 15
    sprc_epochs_initialized: int = 18
    sprc_balance_ratio: float = 0.0  # 0 disables balancing; resumes use 0.1
    pretrain_batch_size: int = 8
    pretrain_max_examples: int = 0  # 0 means uncapped
    holdout_fraction: float = 0.1
    # few-shot and ablation
    fewshot_sizes: tuple[int, ...] = (0, 1, 10, 20, 50, 300, 500)
    fewshot_seeds: tuple[int, ...] = (0, 1, 2)
    fewshot_epochs: int = 5
    ablate_switches: tuple[str, ...] = ("section_title_edges", "font_feats", "skip_connections")
    ablate_seeds: tuple[int, ...] = (0, 1, 2)

    def validate(self) -> "RunConfig":
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.task not in ("invoice", "resume"):
            raise ConfigError(f"task must be invoice or resume, got {self.task!r}")
        if self.preset not in ("desk", "paper"):
            raise ConfigError(f"preset must be desk or paper, got {self.preset!r}")
        if self.fraction_labeled + self.fraction_unlabeled > 1.0 + 1e-9:
            raise ConfigError("fraction_labeled + fraction_unlabeled exceed 1")
        if self.train_fraction + self.val_fraction > 1.0 + 1e-9:
            raise ConfigError("train_fraction + val_fraction exceed 1")
        return self

    def to_dict(self) -> dict:
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out


_TUPLE_FIELDS = {"unseen_templates", "fewshot_sizes", "fewshot_seeds", "ablate_switches", "ablate_seeds"}

# The paper preset documents the published configuration (RoBERTa-BASE scale,
# paper learning rates, paper GCN sizes). It exists for reference and larger
# machines, not for CI.
_PAPER_OVERRIDES = {
    "encoder_dim": 768,
    "encoder_layers": 12,
    "encoder_heads": 12,
    "encoder_ffn": 3072,
    "lr_encoder": 1e-5,
    "lr_head": 5e-5,
}
_PAPER_TASK_OVERRIDES = {
    "invoice": {"gcn_hidden": 256, "max_nodes": 100},
    "resume": {"gcn_hidden": 512, "max_nodes": 150},
}
_RESUME_TASK_DEFAULTS = {
    "use_section_edges": True,
    "sprc_balance_ratio": 0.1,
    "unseen_templates": (),
    "num_templates": 6,
    "num_docs": 400,
    "fraction_labeled": 0.4,
    "fraction_unlabeled": 0.6,
    "max_nodes": 150,
}


def _coerce(name: str, value, target_type):
    try:
        if name in _TUPLE_FIELDS:
            if isinstance(value, (list, tuple)):
                return tuple(value)
            raise ConfigError(f"key {name!r} must be a list")
        if target_type is bool:
            if isinstance(value, bool):
                return value
            raise ConfigError(f"key {name!r} must be a boolean")
        if target_type is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"key {name!r} must be an integer")
            return value
        if target_type is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"key {name!r} must be a number")
            return float(value)
        if target_type is str:
            if not isinstance(value, str):
                raise ConfigError(f"key {name!r} must be a string")
            return value
    except ConfigError:
        raise
    return value


def make_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Resolve a config: preset and task defaults, then file values, then CLI
    overrides. Unknown keys are rejected by name."""
    known = {f.name: f for f in fields(RunConfig)}
    file_values = dict(file_values or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    for source in (file_values, overrides):
        for key in source:
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
    merged_input = {**file_values, **overrides}
    task = merged_input.get("task", "invoice")
    preset = merged_input.get("preset", "desk")
    values: dict = {}
    if task == "resume":
        values.update(_RESUME_TASK_DEFAULTS)
    if preset == "paper":
        values.update(_PAPER_OVERRIDES)
        values.update(_PAPER_TASK_OVERRIDES.get(task, {}))
    values.update(merged_input)
    coerced = {}
    for key, value in values.items():
        ftype = known[key].type
        base = {"int": int, "float": float, "str": str, "bool": bool}.get(
            ftype if isinstance(ftype, str) else getattr(ftype, "__name__", ""), None
        )
        coerced[key] = _coerce(key, value, base)
    return RunConfig(**coerced).validate()


def load_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return make_config(data, overrides)
