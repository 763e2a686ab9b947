"""Declarative run configuration: JSON file plus CLI-flag overrides.

Flags win over the file; the file wins over built-in defaults. Commands
write the fully-resolved configuration next to their outputs so any run can
be reproduced from that single file.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .network import BRANCH_ORDER, BranchSpec

# Short branch names accepted in config files and on the command line.
BRANCH_ALIASES = {
    "neural": "neural",
    "stat": "statistical",
    "statistical": "statistical",
    "ext": "external",
    "external": "external",
}
_CANONICAL_SHORT = {"neural": "neural", "statistical": "stat", "external": "ext"}


class ConfigError(ValueError):
    """Run configuration is invalid."""


@dataclass
class RunConfig:
    """Everything a run needs: paths, hyperparameters and branch toggles."""

    stances: str | None = None
    bodies: str | None = None
    test_stances: str | None = None
    test_bodies: str | None = None
    embeddings: str | None = None
    lexicon: str | None = None
    cache_dir: str = "cache"
    checkpoint: str | None = None
    branches: tuple[str, ...] = ("neural", "stat", "ext")
    seed: int = 13
    validation_fraction: float = 0.1
    embedding_dim: int = 4800
    fallback_seed: int = 0
    vocab_capacity: int = 5000
    learning_rate: float = 0.001
    batch_size: int = 100
    max_epochs: int = 50
    patience: int = 5
    neural_hidden: tuple[int, ...] = (500, 100)
    neural_dropout: tuple[float, ...] = (0.2, 0.0)
    neural_l2: tuple[float, ...] = (1e-8, 0.0)
    neural_activation: str = "sigmoid"
    external_hidden: tuple[int, ...] = (50,)
    external_activation: str = "relu"
    statistical_hidden: tuple[int, ...] = (500, 50)
    statistical_dropout: tuple[float, ...] = (0.4, 0.0)
    statistical_l2: tuple[float, ...] = (5e-5, 0.0)
    statistical_activation: str = "relu"

    def validate(self) -> None:
        if not self.branches:
            raise ConfigError("at least one feature branch must be enabled")
        for name in self.branches:
            if name not in BRANCH_ALIASES:
                raise ConfigError(
                    f"unknown branch {name!r}; expected one of {sorted(BRANCH_ALIASES)}"
                )
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must be in (0, 1)")
        if self.vocab_capacity < 1 or self.embedding_dim < 1:
            raise ConfigError("vocab_capacity and embedding_dim must be >= 1")

    def branch_keys(self) -> tuple[str, ...]:
        """Enabled branches under their canonical names, in fusion order."""
        enabled = {BRANCH_ALIASES[b] for b in self.branches}
        return tuple(n for n in BRANCH_ORDER if n in enabled)

    def checkpoint_path(self) -> Path:
        if self.checkpoint:
            return Path(self.checkpoint)
        return Path(self.cache_dir) / "model.ckpt"

    def model_specs(self, input_dims: dict[str, int] | None = None) -> dict[str, BranchSpec]:
        """Branch specs for the enabled branches.

        ``input_dims`` overrides the configured widths (used when the cache
        header is authoritative).
        """
        dims = {
            "neural": 2 * self.embedding_dim,
            "external": 50,
            "statistical": 2 * self.vocab_capacity,
        }
        if input_dims:
            dims.update(input_dims)
        specs = {
            "neural": BranchSpec(
                dims["neural"],
                tuple(self.neural_hidden),
                self.neural_activation,
                tuple(self.neural_dropout),
                tuple(self.neural_l2),
            ),
            "external": BranchSpec(
                dims["external"], tuple(self.external_hidden), self.external_activation
            ),
            "statistical": BranchSpec(
                dims["statistical"],
                tuple(self.statistical_hidden),
                self.statistical_activation,
                tuple(self.statistical_dropout),
                tuple(self.statistical_l2),
            ),
        }
        return {name: specs[name] for name in self.branch_keys()}

    def to_json(self) -> str:
        payload = dataclasses.asdict(self)
        payload["branches"] = [_CANONICAL_SHORT[k] for k in self.branch_keys()]
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def write_effective(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


_TUPLE_FIELDS = {
    "branches",
    "neural_hidden",
    "neural_dropout",
    "neural_l2",
    "external_hidden",
    "statistical_hidden",
    "statistical_dropout",
    "statistical_l2",
}
_FIELD_NAMES = {f.name for f in dataclasses.fields(RunConfig)}


def load_config(path) -> RunConfig:
    """Parse a JSON config file; unknown keys are errors."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: top-level value must be an object")
    unknown = set(payload) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    for key in _TUPLE_FIELDS & set(payload):
        payload[key] = tuple(payload[key])
    config = RunConfig(**payload)
    config.validate()
    return config


def apply_overrides(config: RunConfig, overrides: dict) -> RunConfig:
    """Return a copy of ``config`` with non-None override values applied."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    for key in _TUPLE_FIELDS & set(updates):
        updates[key] = tuple(updates[key])
    merged = dataclasses.replace(config, **updates)
    merged.validate()
    return merged
