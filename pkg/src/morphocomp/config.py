"""Run configuration for evolution, loadable from JSON."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .archive import EvolveParams
from .errors import MorphocompError
from .evaluation import EvalParams
from .physics import PhysicsParams

ALLOWED_BOXES = frozenset({(5, 5), (7, 7), (10, 10)})


class ConfigError(MorphocompError):
    pass


@dataclass
class RunConfig:
    height: int = 5
    width: int = 5
    generations: int = 3000
    seed: int = 0
    offspring_per_gen: int = 16
    init_population: int = 64
    checkpoint_every: int = 50
    eval: dict = field(default_factory=dict)       # EvalParams overrides
    physics: dict = field(default_factory=dict)    # PhysicsParams overrides
    archive_path: str = "archive.json"
    log_path: str | None = None                    # defaults next to the archive
    allow_any_box: bool = False

    def __post_init__(self):
        self.check()

    def check(self) -> None:
        if (self.height, self.width) not in ALLOWED_BOXES and not self.allow_any_box:
            raise ConfigError(f"bounding box {self.height}x{self.width} not in "
                              f"{sorted(ALLOWED_BOXES)}; pass --allow-any-box to override")
        if self.height < 1 or self.width < 1:
            raise ConfigError("bounding box dimensions must be >= 1")
        if self.generations < 0:
            raise ConfigError("generations must be >= 0")
        if self.offspring_per_gen < 1 or self.init_population < 1:
            raise ConfigError("population sizes must be >= 1")

    @property
    def resolved_log_path(self) -> Path:
        if self.log_path:
            return Path(self.log_path)
        p = Path(self.archive_path)
        return p.with_name(p.stem + ".log.csv")

    def eval_params(self) -> EvalParams:
        try:
            ev = dict(self.eval)
            if self.physics:
                base = ev.get("physics", {})
                ev["physics"] = {**base, **self.physics}
            return EvalParams.from_dict(ev)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad evaluation/physics parameters: {e}") from None

    def evolve_params(self) -> EvolveParams:
        return EvolveParams(self.height, self.width, self.generations, self.offspring_per_gen,
                            self.init_population, self.seed, self.eval_params(), self.checkpoint_every)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = {**d, **{k: v for k, v in overrides.items() if v is not None}}
        try:
            return cls(**merged)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def load(cls, path: str | Path, **overrides) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d, **overrides)


def physics_from_archive_params(params: dict) -> PhysicsParams:
    return PhysicsParams.from_dict(params.get("eval", {}).get("physics", {}))
