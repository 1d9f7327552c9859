"""Snapshot generators: exact viscous Burgers fields and Kuramoto-Sivashinsky.

The KS equation u_t + u_xxxx + u_xx + u u_x = 0 on an L-periodic domain is
advanced in Fourier space with the fourth-order exponential time
differencing Runge-Kutta scheme of Cox & Matthews, using the contour-integral
evaluation of the phi-function weights from Kassam & Trefethen (2005).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .nn import ConfigurationError

T_RANGE = (0.0, 2.0)
NU_RANGE = (0.001, 0.01)


class IntegrationBlowUp(RuntimeError):
    pass


# Burgers ------------------------------------------------------------------

@dataclass(frozen=True)
class ParamPoint:
    t: float
    nu: float

    @property
    def extrapolated(self) -> bool:
        return not (T_RANGE[0] <= self.t <= T_RANGE[1] and NU_RANGE[0] <= self.nu <= NU_RANGE[1])

    def as_array(self) -> np.ndarray:
        return np.array([self.t, self.nu])


def burgers_exact(x, t: float, nu: float):
    """u(x, t) for the viscous Burgers problem on [0, 1], any viscosity > 0.

    With t0 = exp(1/(8 nu)) the denominator term sqrt((t+1)/t0) exp(x^2/(4 nu (t+1)))
    is formed as the exponential of its logarithm, so small viscosities never
    overflow.
    """
    if not nu > 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    x = np.asarray(x, dtype=np.float64)
    tp1 = t + 1.0
    log_term = 0.5 * (np.log(tp1) - 1.0 / (8.0 * nu)) + x * x / (4.0 * nu * tp1)
    # 1 / (1 + e^a) == exp(-log(1 + e^a))
    return (x / tp1) * np.exp(-np.logaddexp(0.0, log_term))


def burgers_grid(n_x: int = 256) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_x)


def burgers_parameter_grid(n_t: int = 64, n_nu: int = 16) -> list[ParamPoint]:
    """Tensor grid of equispaced (t, nu), t varying slowest."""
    ts = np.linspace(*T_RANGE, n_t)
    nus = np.linspace(*NU_RANGE, n_nu)
    return [ParamPoint(float(t), float(nu)) for t in ts for nu in nus]


def burgers_snapshots(x, params: Sequence[ParamPoint]) -> np.ndarray:
    """Snapshot matrix with one column per parameter point."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0 or not params:
        raise ValueError("need a nonempty grid and parameter list")
    return np.column_stack([burgers_exact(x, p.t, p.nu) for p in params])


# Kuramoto-Sivashinsky -----------------------------------------------------

@dataclass(frozen=True)
class KSConfig:
    L: float = 22.0
    N: int = 64
    dt: float = 2.5e-3
    sample_dt: float = 0.25
    spinup_from: float = -250.0
    t_end: float = 2500.0

    def __post_init__(self):
        if not self.L > 0:
            raise ConfigurationError("KS domain length must be positive")
        if self.N < 4 or self.N & (self.N - 1):
            raise ConfigurationError(f"KS grid size must be a power of two >= 4, got {self.N}")
        if not (self.dt > 0 and self.sample_dt > 0):
            raise ConfigurationError("time steps must be positive")
        if self.spinup_from > 0 or self.t_end <= 0:
            raise ConfigurationError("need spinup_from <= 0 < t_end")
        _whole(self.sample_dt / self.dt, "sample_dt / dt")
        _whole(-self.spinup_from / self.dt, "spin-up length / dt")
        _whole(self.t_end / self.sample_dt, "t_end / sample_dt")

    @property
    def steps_per_sample(self) -> int:
        return _whole(self.sample_dt / self.dt, "sample_dt / dt")

    @property
    def n_samples(self) -> int:
        return _whole(self.t_end / self.sample_dt, "t_end / sample_dt")

    @property
    def x(self) -> np.ndarray:
        return self.L * np.arange(self.N) / self.N

    @property
    def sample_times(self) -> np.ndarray:
        """Recorded times: sample_dt, 2 sample_dt, ..., t_end."""
        return self.sample_dt * np.arange(1, self.n_samples + 1)


def _whole(ratio, what):
    n = round(ratio)
    if n < 0 or abs(ratio - n) > 1e-9 * max(1.0, abs(ratio)):
        raise ConfigurationError(f"{what} must be a whole number, got {ratio}")
    return int(n)


@dataclass(frozen=True)
class ETDRK4Coefficients:
    wavenumbers: np.ndarray  # q = 2 pi m / L, m = 0..N/2
    linear: np.ndarray       # q^2 - q^4
    exp_full: np.ndarray     # exp(dt L)
    exp_half: np.ndarray     # exp(dt L / 2)
    Q: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    nonlinear: np.ndarray    # multiplier of FFT(u^2): -i q / 2, zero at Nyquist
    N: int


def phi_weights(hL, dt: float, M: int = 32):
    """ETDRK4 weights (Q, f1, f2, f3) for scalar(s) h*L by contour averaging.

    Each weight is the mean over M points on the unit circle centred at h*L,
    which avoids the cancellation of the closed forms near h*L = 0.
    """
    hL = np.asarray(hL, dtype=np.float64)
    roots = np.exp(2j * np.pi * (np.arange(1, M + 1) - 0.5) / M)
    z = hL[..., None] + roots
    ez = np.exp(z)
    z3 = z ** 3
    Q = dt * np.mean((np.exp(z / 2) - 1.0) / z, axis=-1).real
    f1 = dt * np.mean((-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3, axis=-1).real
    f2 = dt * np.mean((2.0 + z + ez * (z - 2.0)) / z3, axis=-1).real
    f3 = dt * np.mean((-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3, axis=-1).real
    return Q, f1, f2, f3


def etdrk4_coefficients(config: KSConfig, M: int = 32) -> ETDRK4Coefficients:
    m = np.arange(config.N // 2 + 1)
    q = 2.0 * np.pi * m / config.L
    lin = q ** 2 - q ** 4
    hL = config.dt * lin
    Q, f1, f2, f3 = phi_weights(hL, config.dt, M)
    g = -0.5j * q
    g[-1] = 0.0
    return ETDRK4Coefficients(q, lin, np.exp(hL), np.exp(hL / 2), Q, f1, f2, f3, g, config.N)


def _nonlinear(v, c):
    u = np.fft.irfft(v, c.N)
    return c.nonlinear * np.fft.rfft(u * u)


def etdrk4_step(v, c: ETDRK4Coefficients):
    """One step in Fourier space (rfft coefficients)."""
    Nv = _nonlinear(v, c)
    a = c.exp_half * v + c.Q * Nv
    Na = _nonlinear(a, c)
    b = c.exp_half * v + c.Q * Na
    Nb = _nonlinear(b, c)
    cc = c.exp_half * a + c.Q * (2.0 * Nb - Nv)
    Nc = _nonlinear(cc, c)
    return c.exp_full * v + c.f1 * Nv + 2.0 * c.f2 * (Na + Nb) + c.f3 * Nc


def ks_integrate(u0, coeffs: ETDRK4Coefficients, n_steps: int, record_every: int = 0,
                 t_start: float = 0.0, dt: float | None = None):
    """Advance ``u0`` by ``n_steps``; optionally record every ``record_every`` steps.

    Returns the final field, and the (N x n_records) matrix when recording.
    The mean mode of the initial field is kept as given.
    """
    v = np.fft.rfft(np.asarray(u0, dtype=np.float64))
    records = []
    # overflow surfaces as IntegrationBlowUp below, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, n_steps + 1):
            v = etdrk4_step(v, coeffs)
            if record_every and i % record_every == 0:
                u = np.fft.irfft(v, coeffs.N)
                if not np.all(np.isfinite(u)):
                    t = t_start + (i * dt if dt else i)
                    raise IntegrationBlowUp(f"non-finite KS field at t={t:g}")
                records.append(u)
        u = np.fft.irfft(v, coeffs.N)
    if not np.all(np.isfinite(u)):
        t = t_start + (n_steps * dt if dt else n_steps)
        raise IntegrationBlowUp(f"non-finite KS field at t={t:g}")
    if record_every:
        return u, np.column_stack(records) if records else np.empty((coeffs.N, 0))
    return u


def ks_initial_condition(config: KSConfig, seed: int, n_modes: int = 8, rms: float = 0.1):
    """Smooth zero-mean random field built from the lowest ``n_modes`` Fourier modes."""
    rng = np.random.default_rng(seed)
    v = np.zeros(config.N // 2 + 1, dtype=complex)
    v[1:n_modes + 1] = rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)
    u = np.fft.irfft(v, config.N)
    return u * (rms / np.sqrt(np.mean(u * u)))


def ks_generate(config: KSConfig, seed: int, u0=None) -> np.ndarray:
    """Spin up from a random field at ``spinup_from`` to t=0, then sample to ``t_end``.

    Column j holds u at t = (j + 1) * sample_dt.
    """
    c = etdrk4_coefficients(config)
    if u0 is None:
        u0 = ks_initial_condition(config, seed)
    v0 = np.fft.rfft(np.asarray(u0, dtype=np.float64))
    v0[0] = 0.0
    u0 = np.fft.irfft(v0, config.N)
    spin_steps = _whole(-config.spinup_from / config.dt, "spin-up")
    u = ks_integrate(u0, c, spin_steps, t_start=config.spinup_from, dt=config.dt)
    _, snaps = ks_integrate(u, c, config.n_samples * config.steps_per_sample,
                            record_every=config.steps_per_sample, dt=config.dt)
    return snaps


# snapshot files -----------------------------------------------------------

_SNAP_MAGIC = b"SNAP1"


def save_snapshots(path, matrix) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("snapshot matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(_SNAP_MAGIC)
        fh.write(struct.pack("<QQ", *matrix.shape))
        fh.write(np.asfortranarray(matrix).astype("<f8").tobytes(order="F"))


def load_snapshots(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:5] != _SNAP_MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    rows, cols = struct.unpack("<QQ", data[5:21])
    payload = data[21:]
    if len(payload) != 8 * rows * cols:
        raise ValueError(f"{path}: expected {rows}x{cols} values, found {len(payload) // 8}")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    # C order, like freshly generated data, so reductions round identically
    return np.ascontiguousarray(flat.reshape((rows, cols), order="F"))
