"""Error norms, spectral derivatives and joint-histogram comparisons."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


def relative_l2(truth, approx) -> float:
    truth = np.asarray(truth, dtype=np.float64)
    approx = np.asarray(approx, dtype=np.float64)
    if truth.shape != approx.shape:
        raise ValueError(f"shape mismatch: {truth.shape} vs {approx.shape}")
    norm = np.linalg.norm(truth)
    if norm == 0:
        raise ValueError("reference field has zero norm")
    return float(np.linalg.norm(truth - approx) / norm)


def mse(truth, approx) -> float:
    d = np.asarray(truth, dtype=np.float64) - np.asarray(approx, dtype=np.float64)
    return float(np.mean(d * d))


def derivative_fields(u, dx: float, axis: int = 0):
    """First and second derivatives of periodic data along ``axis`` via FFT."""
    u = np.asarray(u, dtype=np.float64)
    if not dx > 0:
        raise ValueError(f"grid spacing must be positive, got {dx}")
    n = u.shape[axis]
    if n < 4:
        raise ValueError("need at least 4 grid points")
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=dx)
    shape = [1] * u.ndim
    shape[axis] = k.size
    k = k.reshape(shape)
    v = np.fft.rfft(u, axis=axis)
    ik = 1j * k
    if n % 2 == 0:
        # odd derivative of the Nyquist mode is not representable
        nyq = [slice(None)] * u.ndim
        nyq[axis] = slice(-1, None)
        ik = ik.copy()
        ik[tuple(nyq)] = 0.0
    ux = np.fft.irfft(ik * v, n, axis=axis)
    uxx = np.fft.irfft(-(k * k) * v, n, axis=axis)
    return ux, uxx


@dataclass
class JointHistogram:
    x_edges: np.ndarray
    y_edges: np.ndarray
    counts: np.ndarray       # len(x_edges)-1 x len(y_edges)-1
    clip_fraction: float

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def bin_area(self) -> float:
        return float((self.x_edges[1] - self.x_edges[0]) * (self.y_edges[1] - self.y_edges[0]))

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.total

    @property
    def density(self) -> np.ndarray:
        return self.probabilities / self.bin_area

    def log_density(self, floor: float = 1e-12) -> np.ndarray:
        return np.log10(np.maximum(self.density, floor))

    def same_binning(self, other: "JointHistogram") -> bool:
        return (np.array_equal(self.x_edges, other.x_edges)
                and np.array_equal(self.y_edges, other.y_edges))


def _bin_index(values, edges):
    idx = np.searchsorted(edges, values, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


def joint_pdf(xs, ys, bins=64, ranges=None) -> JointHistogram:
    """Normalized 2-D histogram; samples outside ``ranges`` land in the edge bins.

    ``ranges`` defaults to the data extent per axis.
    """
    xs = np.ravel(np.asarray(xs, dtype=np.float64))
    ys = np.ravel(np.asarray(ys, dtype=np.float64))
    if xs.size == 0 or xs.size != ys.size:
        raise ValueError("need equally many, nonzero, x and y samples")
    bx, by = (bins, bins) if np.isscalar(bins) else bins
    if bx < 2 or by < 2:
        raise ValueError("need at least 2 bins per axis")
    if ranges is None:
        ranges = ((xs.min(), xs.max()), (ys.min(), ys.max()))
    (x0, x1), (y0, y1) = ranges
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate histogram range {ranges}")
    x_edges = np.linspace(x0, x1, bx + 1)
    y_edges = np.linspace(y0, y1, by + 1)
    outside = (xs < x0) | (xs > x1) | (ys < y0) | (ys > y1)
    flat = _bin_index(xs, x_edges) * by + _bin_index(ys, y_edges)
    counts = np.bincount(flat, minlength=bx * by).reshape(bx, by)
    return JointHistogram(x_edges, y_edges, counts, float(outside.mean()))


def js_divergence(p: JointHistogram, q: JointHistogram) -> float:
    """Jensen-Shannon divergence (nats) between two identically binned histograms."""
    if not p.same_binning(q):
        raise ValueError("histograms use different binning")
    P, Q = p.probabilities, q.probabilities
    M = 0.5 * (P + Q)

    def kl(a):
        nz = a > 0
        return float(np.sum(a[nz] * np.log(a[nz] / M[nz])))

    return 0.5 * (kl(P) + kl(Q))


def write_histogram_csv(path, h: JointHistogram) -> None:
    """Edge vectors on the first two lines, then one matrix row per u_x bin."""
    with open(path, "w") as fh:
        fh.write("# rows: x_edges, y_edges, then density[i, :] for each x bin\n")
        fh.write(",".join(repr(float(v)) for v in h.x_edges) + "\n")
        fh.write(",".join(repr(float(v)) for v in h.y_edges) + "\n")
        for row in h.density:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_histogram_json(path, h: JointHistogram) -> None:
    payload = {
        "x_edges": h.x_edges.tolist(),
        "y_edges": h.y_edges.tolist(),
        "counts": h.counts.tolist(),
        "density": h.density.tolist(),
        "clip_fraction": h.clip_fraction,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
