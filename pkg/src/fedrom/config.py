"""Experiment configuration: TOML file -> validated dataclasses.

Validation collects every problem at once; each message starts with the
dotted path of the offending field (``fed.K``, ``ks.dt`` ...).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXPERIMENTS = ("burgers_rom", "ks_autoencoder", "sst_autoencoder")
MODES = ("centralized", "federated", "both")


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class FedSection:
    K: int = 10
    E: int = 1
    B: int = 32
    lr: float = 1e-3
    rounds: int = 100


@dataclass
class CentralizedSection:
    batch_size: int = 0   # 0: K * B
    epochs: int = 0       # 0: fed.rounds * fed.E


@dataclass
class ModelSection:
    R: int = 0            # 0: choose by POD energy (burgers only)
    energy: float = 0.9999
    arch: str = ""        # "" : ks / sst by experiment


@dataclass
class BurgersSection:
    n_x: int = 256
    n_t: int = 64
    n_nu: int = 16
    val_fraction: float = 0.2
    eval_t: float = 0.02
    eval_nu: float = 0.00475


@dataclass
class KSSection:
    L: float = 22.0
    N: int = 64
    dt: float = 2.5e-3
    sample_dt: float = 0.25
    spinup_from: float = -250.0
    t_end: float = 3750.0
    train_end: float = 2500.0
    val_fraction: float = 0.2
    bins: int = 64
    reconstruction_snapshots: int = 400


@dataclass
class SSTSection:
    path: str = ""        # "" : synthetic archive
    weeks: int = 1800
    train_weeks: int = 1500
    grid: list = field(default_factory=lambda: [180, 360])
    eval_week: int = -1   # -1: first week after training


@dataclass
class RunSection:
    threads: int = 1
    checkpoint_every: int = 0
    deterministic: bool = True
    cache_dir: str = "cache"


@dataclass
class ExperimentConfig:
    experiment: str = "burgers_rom"
    mode: str = "both"
    seed: int = 0
    output: str = "runs/out"
    fed: FedSection = field(default_factory=FedSection)
    centralized: CentralizedSection = field(default_factory=CentralizedSection)
    model: ModelSection = field(default_factory=ModelSection)
    burgers: BurgersSection = field(default_factory=BurgersSection)
    ks: KSSection = field(default_factory=KSSection)
    sst: SSTSection = field(default_factory=SSTSection)
    run: RunSection = field(default_factory=RunSection)

    @property
    def arch(self) -> str:
        return self.model.arch or ("sst" if self.experiment == "sst_autoencoder" else "ks")

    @property
    def modes(self) -> tuple[str, ...]:
        return ("centralized", "federated") if self.mode == "both" else (self.mode,)

    def central_batch(self) -> int:
        return self.centralized.batch_size or self.fed.K * self.fed.B

    def central_epochs(self) -> int:
        return self.centralized.epochs or self.fed.rounds * self.fed.E


def _type_ok(value, default):
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, type(default))


def _fill(obj, data: dict, path: str, errors: list):
    fields = {f.name: f for f in dataclasses.fields(obj)}
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in fields:
            errors.append(f"{where}: unknown field")
            continue
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                errors.append(f"{where}: expected a section")
            else:
                _fill(current, value, where, errors)
            continue
        if not _type_ok(value, current):
            errors.append(f"{where}: expected {type(current).__name__}, got {value!r}")
            continue
        setattr(obj, key, float(value) if isinstance(current, float) else value)


def _training_count(cfg: ExperimentConfig) -> int | None:
    if cfg.experiment == "burgers_rom":
        n = cfg.burgers.n_t * cfg.burgers.n_nu
        return n - int(round(cfg.burgers.val_fraction * n))
    if cfg.experiment == "ks_autoencoder":
        if cfg.ks.sample_dt <= 0:
            return None
        n = int(round(cfg.ks.train_end / cfg.ks.sample_dt))
        return n - int(round(cfg.ks.val_fraction * n))
    return cfg.sst.train_weeks


def check(cfg: ExperimentConfig) -> tuple[list[str], list[str]]:
    """Cross-field checks; returns (errors, warnings)."""
    errors, warnings = [], []
    if cfg.experiment not in EXPERIMENTS:
        errors.append(f"experiment: must be one of {', '.join(EXPERIMENTS)}")
    if cfg.mode not in MODES:
        errors.append(f"mode: must be one of {', '.join(MODES)}")
    for name in ("K", "E", "B", "rounds"):
        if getattr(cfg.fed, name) < 1:
            errors.append(f"fed.{name}: must be >= 1")
    if cfg.fed.lr < 0:
        errors.append("fed.lr: must be >= 0")
    if cfg.centralized.batch_size < 0:
        errors.append("centralized.batch_size: must be >= 0")
    if cfg.centralized.epochs < 0:
        errors.append("centralized.epochs: must be >= 0")
    if cfg.model.R < 0:
        errors.append("model.R: must be >= 0")
    if not 0 < cfg.model.energy <= 1:
        errors.append("model.energy: must lie in (0, 1]")
    if cfg.model.arch not in ("", "ks", "sst"):
        errors.append("model.arch: must be ks or sst")
    if cfg.experiment in ("ks_autoencoder", "sst_autoencoder") and cfg.model.R < 1:
        errors.append("model.R: autoencoders need a latent dimension >= 1")
    if cfg.run.threads < 1:
        errors.append("run.threads: must be >= 1")
    if cfg.run.checkpoint_every < 0:
        errors.append("run.checkpoint_every: must be >= 0")

    b = cfg.burgers
    for name in ("n_x", "n_t", "n_nu"):
        if getattr(b, name) < 1:
            errors.append(f"burgers.{name}: must be >= 1")
    if not 0 <= b.val_fraction < 1:
        errors.append("burgers.val_fraction: must lie in [0, 1)")
    if b.eval_nu <= 0 or b.eval_t < 0:
        errors.append("burgers.eval_nu: must be > 0 and burgers.eval_t >= 0")

    k = cfg.ks
    if k.N < 4 or k.N & (k.N - 1):
        errors.append("ks.N: must be a power of two >= 4")
    if k.L <= 0:
        errors.append("ks.L: must be positive")
    if k.dt <= 0 or k.sample_dt <= 0:
        errors.append("ks.dt: time steps must be positive")
    elif abs(k.sample_dt / k.dt - round(k.sample_dt / k.dt)) > 1e-9 * (k.sample_dt / k.dt):
        errors.append("ks.sample_dt: must be a whole multiple of ks.dt")
    if k.spinup_from > 0:
        errors.append("ks.spinup_from: must be <= 0")
    if not 0 < k.train_end < k.t_end:
        errors.append("ks.train_end: must satisfy 0 < train_end < t_end")
    if not 0 < k.val_fraction < 1:
        errors.append("ks.val_fraction: must lie in (0, 1)")
    if k.bins < 2:
        errors.append("ks.bins: must be >= 2")
    if cfg.experiment == "ks_autoencoder" and cfg.model.R >= k.N:
        errors.append("model.R: must be smaller than ks.N")

    s = cfg.sst
    if len(s.grid) != 2 or not all(isinstance(v, int) and v >= 1 for v in s.grid):
        errors.append("sst.grid: must be [H, W] with positive integers")
    if not s.path and not 2 <= s.train_weeks < s.weeks:
        errors.append("sst.train_weeks: must satisfy 2 <= train_weeks < weeks")
    if s.path and not Path(s.path).exists():
        errors.append(f"sst.path: {s.path} does not exist")

    n = _training_count(cfg)
    if n is not None and not errors:
        if cfg.fed.K > n:
            errors.append(f"fed.K: {cfg.fed.K} clients for {n} training samples")
        elif cfg.fed.B > n // cfg.fed.K:
            warnings.append(f"fed.B: {cfg.fed.B} exceeds the smallest shard ({n // cfg.fed.K}); "
                            "batches are clamped to the shard size")
        if cfg.central_batch() > n:
            warnings.append(f"centralized.batch_size: {cfg.central_batch()} exceeds the "
                            f"{n} training samples; clamped")
    return errors, warnings


def parse_config(data: dict) -> tuple[ExperimentConfig, list[str], list[str]]:
    cfg = ExperimentConfig()
    errors: list[str] = []
    _fill(cfg, data, "", errors)
    more, warnings = check(cfg)
    return cfg, errors + more, warnings


def validate_config(path) -> tuple[list[str], list[str]]:
    """All schema and cross-field problems of a config file: (errors, warnings)."""
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            return [f"<file>: {exc}"], []
    _, errors, warnings = parse_config(data)
    return errors, warnings


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"<file>: {exc}"]) from exc
    cfg, errors, _ = parse_config(data)
    if errors:
        raise ConfigError(errors)
    return cfg
