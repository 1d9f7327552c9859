"""Weekly sea-surface-temperature grids: file format, land masking, anomalies.

Grid file layout (little-endian): magic ``SSTG1``; H, W, T as uint64; the
fill value as float64; then T frames of H*W float64 values in row-major
order, degrees Celsius. Points equal to the fill value in every frame are
land. A point that is fill in some frames but not others is rejected.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

FILL_VALUE = -9999.0
_MAGIC = b"SSTG1"


class SSTFormatError(ValueError):
    pass


@dataclass
class SSTArchive:
    frames: np.ndarray   # T x H x W
    weeks: np.ndarray    # T week indices
    mask: np.ndarray     # H x W, True = ocean
    fill_value: float = FILL_VALUE

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1:]

    def __len__(self):
        return self.frames.shape[0]


def _is_fill(values, fill):
    return np.isnan(values) if np.isnan(fill) else values == fill


def save_sst(path, archive: SSTArchive) -> None:
    frames = np.where(archive.mask[None], archive.frames, archive.fill_value)
    T, H, W = frames.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQQd", H, W, T, archive.fill_value))
        fh.write(frames.astype("<f8").tobytes())


def load_sst(path) -> SSTArchive:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 37 or data[:5] != _MAGIC:
        raise SSTFormatError(f"{path}: malformed header")
    H, W, T, fill = struct.unpack("<QQQd", data[5:37])
    payload = data[37:]
    if H * W * T == 0 or len(payload) != 8 * H * W * T:
        raise SSTFormatError(f"{path}: header says {T} frames of {H}x{W}, payload has "
                             f"{len(payload) // 8} values")
    frames = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(T, H, W)
    fill_mask = _is_fill(frames, fill)
    land = fill_mask.all(axis=0)
    if np.any(fill_mask.any(axis=0) & ~land):
        raise SSTFormatError(f"{path}: land mask changes between frames")
    mask = ~land
    if not mask.any():
        raise SSTFormatError(f"{path}: no valid points")
    if np.isnan(frames[:, mask]).any():
        raise SSTFormatError(f"{path}: NaN at an ocean point")
    return SSTArchive(frames, np.arange(T), mask, float(fill))


@dataclass(frozen=True)
class MaskIndex:
    """Row-major flat positions of the ocean points in an H x W grid."""

    positions: np.ndarray
    shape: tuple[int, int]


def flatten_masked(archive: SSTArchive) -> tuple[np.ndarray, MaskIndex]:
    """Ocean points x snapshots matrix and the map back to the grid."""
    if len(archive) == 0:
        raise ValueError("empty archive")
    positions = np.flatnonzero(archive.mask.ravel())
    if positions.size == 0:
        raise ValueError("no valid points")
    T = len(archive)
    matrix = archive.frames.reshape(T, -1)[:, positions].T.copy()
    return matrix, MaskIndex(positions, tuple(archive.shape))


def inflate(columns, index: MaskIndex, fill_value: float = FILL_VALUE) -> np.ndarray:
    """Inverse of ``flatten_masked``: one grid per column (or one for a vector)."""
    columns = np.asarray(columns, dtype=np.float64)
    single = columns.ndim == 1
    cols = columns[:, None] if single else columns
    H, W = index.shape
    grids = np.full((cols.shape[1], H * W), fill_value)
    grids[:, index.positions] = cols.T
    grids = grids.reshape(-1, H, W)
    return grids[0] if single else grids


def normalize_anomaly(matrix) -> tuple[np.ndarray, np.ndarray, float]:
    """Remove each point's temporal mean and divide by the largest |anomaly|."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] < 2:
        raise ValueError("need at least two snapshots")
    mean = matrix.mean(axis=1)
    anomaly = matrix - mean[:, None]
    scale = float(np.abs(anomaly).max())
    if scale == 0:
        raise ValueError("anomalies are identically zero")
    return anomaly / scale, mean, scale


def apply_anomaly(matrix, mean, scale: float) -> np.ndarray:
    return (np.asarray(matrix, dtype=np.float64) - mean[:, None]) / scale


def denormalize_anomaly(normalized, mean, scale: float) -> np.ndarray:
    normalized = np.asarray(normalized, dtype=np.float64)
    m = mean if normalized.ndim == 1 else mean[:, None]
    return normalized * scale + m


# synthetic archive ----------------------------------------------------------

SEASON_WEEKS = 52.0


def grid_coordinates(shape=(180, 360)):
    H, W = shape
    lat = -90.0 + (np.arange(H) + 0.5) * 180.0 / H
    lon = (np.arange(W) + 0.5) * 360.0 / W
    return lat, lon


def synth_land_mask(shape=(180, 360)) -> np.ndarray:
    """Polar caps plus three meridional continent bands; True = ocean."""
    lat, lon = grid_coordinates(shape)
    LAT, LON = np.meshgrid(lat, lon, indexing="ij")
    land = (LAT > 70.0) | (LAT < -65.0)
    land |= (LON > 20.0) & (LON < 50.0) & (LAT > -35.0) & (LAT < 60.0)
    land |= (LON > 100.0) & (LON < 135.0) & (LAT > -40.0) & (LAT < -12.0)
    land |= (LON > 260.0) & (LON < 290.0) & (LAT > -55.0) & (LAT < 65.0)
    return ~land


def synth_climatology(shape=(180, 360)) -> np.ndarray:
    """Time-mean temperature field of the synthetic generator, in Celsius."""
    lat, lon = grid_coordinates(shape)
    LAT, LON = np.meshgrid(np.radians(lat), np.radians(lon), indexing="ij")
    return 28.0 * np.cos(LAT) ** 2 - 1.0 + 1.5 * np.sin(2 * LON) * np.cos(LAT) ** 3


@dataclass(frozen=True)
class _Wave:
    amplitude: float
    zonal: int
    period: float
    phase: float
    lat_center: float
    lat_width: float


def _waves(seed, n_waves=4):
    rng = np.random.default_rng(seed)
    return [
        _Wave(
            amplitude=rng.uniform(0.3, 0.8),
            zonal=int(rng.integers(1, 5)),
            period=rng.uniform(20.0, 200.0),
            phase=rng.uniform(0, 2 * np.pi),
            lat_center=rng.uniform(-40.0, 40.0),
            lat_width=rng.uniform(10.0, 25.0),
        )
        for _ in range(n_waves)
    ]


def synth_sst(weeks: int, seed: int, shape=(180, 360)) -> SSTArchive:
    """Climatology + hemispheric seasonal cycle + a few traveling anomaly waves.

    All components except the climatology average to (near) zero over time;
    the seasonal cycle cancels exactly over whole 52-week years.
    """
    if weeks < 1:
        raise ValueError("weeks must be >= 1")
    lat, lon = grid_coordinates(shape)
    LAT, LON = np.meshgrid(lat, np.radians(lon), indexing="ij")
    clim = synth_climatology(shape)
    season_amp = 4.0 * np.sin(np.radians(LAT)) * np.exp(-((np.abs(LAT) - 45.0) / 35.0) ** 2)
    t = np.arange(weeks, dtype=np.float64)
    frames = clim[None] + season_amp[None] * np.cos(2 * np.pi * t / SEASON_WEEKS)[:, None, None]
    for w in _waves(seed):
        envelope = w.amplitude * np.exp(-((LAT - w.lat_center) / w.lat_width) ** 2)
        arg = w.zonal * LON[None] - (2 * np.pi * t / w.period)[:, None, None] + w.phase
        frames += envelope[None] * np.sin(arg)
    mask = synth_land_mask(shape)
    return SSTArchive(np.where(mask[None], frames, FILL_VALUE), t.astype(int), mask)


def synth_wave_mean_bound(weeks: int, seed: int) -> float:
    """Upper bound on |time mean - climatology| from the traveling waves."""
    bound = 0.0
    for w in _waves(seed):
        half = np.pi / w.period
        bound += w.amplitude / (weeks * abs(np.sin(half)))
    return bound
