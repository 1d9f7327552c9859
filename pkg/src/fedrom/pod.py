"""Proper orthogonal decomposition and the parametric POD-ROM.

The ROM regresses modal coefficients on the parameters (t, nu) with a small
relu network and rebuilds fields as a linear combination of POD modes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynsys import ParamPoint
from .federated import FedConfig, RoundLog, partition_iid, run_centralized, run_federated
from .nn import LayerSpec, Network, forward, mlp_specs


@dataclass(frozen=True)
class PODBasis:
    modes: np.ndarray            # N_x x R, orthonormal columns
    singular_values: np.ndarray  # full spectrum, descending
    n_snapshots: int

    @property
    def rank(self) -> int:
        return self.modes.shape[1]

    @property
    def n_x(self) -> int:
        return self.modes.shape[0]


def energy_rank(singular_values, energy: float = 0.9999) -> int:
    """Smallest rank whose modes hold ``energy`` of the total squared spectrum."""
    s2 = np.asarray(singular_values, dtype=np.float64) ** 2
    frac = np.cumsum(s2) / s2.sum()
    return int(min(np.searchsorted(frac, energy) + 1, len(s2)))


def compute_pod(A, rank: int | None = None, energy: float = 0.9999) -> PODBasis:
    """Leading left singular vectors of ``A``.

    Each mode is signed so that its largest-magnitude entry is positive.
    Without ``rank``, the smallest rank capturing ``energy`` is used.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("snapshot matrix must be 2-D")
    W, s, _ = np.linalg.svd(A, full_matrices=False)
    if rank is None:
        rank = energy_rank(s, energy)
    if not 1 <= rank <= min(A.shape):
        raise ValueError(f"rank {rank} outside [1, {min(A.shape)}]")
    modes = W[:, :rank].copy()
    pivot = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[pivot, np.arange(rank)])
    signs[signs == 0] = 1.0
    return PODBasis(modes * signs, s, A.shape[1])


def project(basis: PODBasis, u) -> np.ndarray:
    """Modal coefficients of a field (or of each column of a matrix)."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape[0] != basis.n_x:
        raise ValueError(f"field length {u.shape[0]} != {basis.n_x}")
    return basis.modes.T @ u


def reconstruct(basis: PODBasis, alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape[0] != basis.rank:
        raise ValueError(f"{alpha.shape[0]} coefficients for a rank-{basis.rank} basis")
    return basis.modes @ alpha


def save_basis(path, basis: PODBasis) -> None:
    with open(path, "wb") as fh:
        fh.write(b"PODB1")
        fh.write(struct.pack("<QQQ", basis.n_x, basis.n_snapshots, basis.rank))
        fh.write(np.asfortranarray(basis.modes).astype("<f8").tobytes(order="F"))
        fh.write(basis.singular_values.astype("<f8").tobytes())


def load_basis(path) -> PODBasis:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:5] != b"PODB1":
        raise ValueError(f"{path}: not a POD basis file")
    n_x, n, r = struct.unpack("<QQQ", data[5:29])
    n_modes = n_x * r
    n_sv = min(n_x, n)
    body = np.frombuffer(data[29:], dtype="<f8").astype(np.float64)
    if body.size != n_modes + n_sv:
        raise ValueError(f"{path}: payload size mismatch")
    return PODBasis(body[:n_modes].reshape((n_x, r), order="F"), body[n_modes:], int(n))


@dataclass(frozen=True)
class MinMaxScaler:
    """Affine map from [lo, hi] per feature onto [a, b]."""

    lo: np.ndarray
    hi: np.ndarray
    a: float = -1.0
    b: float = 1.0

    @classmethod
    def fit(cls, data, a=-1.0, b=1.0, axis=0):
        data = np.asarray(data, dtype=np.float64)
        lo, hi = data.min(axis=axis), data.max(axis=axis)
        return cls(lo, hi, a, b)

    def _span(self):
        span = self.hi - self.lo
        return np.where(span > 0, span, 1.0)

    def scale(self, values):
        return self.a + (self.b - self.a) * (np.asarray(values) - self.lo) / self._span()

    def unscale(self, values):
        return self.lo + (np.asarray(values) - self.a) * self._span() / (self.b - self.a)


def fit_coefficient_scaler(alphas) -> MinMaxScaler:
    """Per-mode scaling of training coefficients (rows = samples) onto [-1, 1]."""
    return MinMaxScaler.fit(alphas, -1.0, 1.0)


def rom_specs(R: int, width: int = 40, depth: int = 4) -> list[LayerSpec]:
    return mlp_specs([2] + [width] * depth + [R], hidden="relu")


@dataclass
class ParametricROM:
    basis: PODBasis
    net: Network
    coeff_scaler: MinMaxScaler
    param_scaler: MinMaxScaler


@dataclass
class RomPrediction:
    field: np.ndarray
    alpha: np.ndarray
    extrapolated: bool


@dataclass
class RomTraining:
    rom: ParametricROM
    logs: list[RoundLog]
    train_idx: np.ndarray
    val_idx: np.ndarray


def split_indices(n: int, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.random.default_rng(seed).permutation(n)
    n_val = int(round(val_fraction * n))
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def prepare_rom_data(snapshots, params: Sequence[ParamPoint], R: int | None, val_fraction: float,
                     seed: int, energy: float = 0.9999):
    """POD of the training columns and scaled (mu, alpha) regression pairs."""
    snapshots = np.asarray(snapshots, dtype=np.float64)
    if snapshots.shape[1] != len(params):
        raise ValueError(f"{snapshots.shape[1]} snapshots but {len(params)} parameter points")
    train_idx, val_idx = split_indices(len(params), val_fraction, seed)
    basis = compute_pod(snapshots[:, train_idx], R, energy)
    mu = np.array([p.as_array() for p in params])
    alpha = project(basis, snapshots).T
    param_scaler = MinMaxScaler.fit(mu[train_idx], 0.0, 1.0)
    coeff_scaler = fit_coefficient_scaler(alpha[train_idx])
    x = param_scaler.scale(mu)
    y = coeff_scaler.scale(alpha)
    return basis, param_scaler, coeff_scaler, x, y, train_idx, val_idx


def train_rom(snapshots, params: Sequence[ParamPoint], R: int | None, mode: str,
              config: FedConfig, val_fraction: float = 0.2, batch_size: int | None = None,
              epochs: int | None = None, energy: float = 0.9999, record_time: bool = True,
              on_round=None) -> RomTraining:
    """Fit the parametric ROM centrally or with federated averaging.

    Both modes start from the network initialized with ``config.seed``.
    Centralized defaults: ``batch_size = K * B`` and ``epochs = rounds``.
    """
    basis, pscale, cscale, x, y, tr, va = prepare_rom_data(
        snapshots, params, R, val_fraction, config.seed, energy)
    specs = rom_specs(basis.rank)
    validation = (x[va], y[va]) if len(va) else (x[tr], y[tr])
    if mode == "federated":
        shards = partition_iid(x[tr], y[tr], config.K, config.seed)
        net, logs = run_federated(specs, shards, config, validation, record_time=record_time,
                                  on_round=on_round)
    elif mode == "centralized":
        net, logs = run_centralized(
            specs, (x[tr], y[tr]), epochs or config.rounds, batch_size or config.K * config.B,
            config.lr, config.seed, validation, record_time=record_time, on_round=on_round)
    else:
        raise ValueError(f"unknown training mode {mode!r}")
    return RomTraining(ParametricROM(basis, net, cscale, pscale), logs, tr, va)


def rom_predict(rom: ParametricROM, p: ParamPoint) -> RomPrediction:
    scaled = forward(rom.net, rom.param_scaler.scale(p.as_array()))
    alpha = rom.coeff_scaler.unscale(scaled)
    return RomPrediction(reconstruct(rom.basis, alpha), alpha, p.extrapolated)
