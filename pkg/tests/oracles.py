"""Reference computations used only by tests, kept independent of the package paths."""

import numpy as np


def forward_longdouble(specs, params, x):
    """Dense forward pass in extended precision, written out directly."""
    a = np.asarray(x, dtype=np.longdouble)
    params = np.asarray(params, dtype=np.longdouble)
    pos = 0
    for s in specs:
        nw = s.output_width * s.input_width
        W = params[pos:pos + nw].reshape(s.output_width, s.input_width)
        pos += nw
        b = params[pos:pos + s.output_width]
        pos += s.output_width
        z = a @ W.T + b
        if s.activation == "relu":
            a = np.maximum(z, 0)
        elif s.activation == "elu":
            a = np.where(z >= 0, z, np.expm1(np.minimum(z, 0)))
        else:
            a = z
    return a


def fd_gradient(specs, params, x, y, components, h=1e-6):
    """Central differences of the mean squared error for selected components."""
    y = np.asarray(y, dtype=np.longdouble)
    p = np.asarray(params, dtype=np.longdouble)
    h = np.longdouble(h)
    out = np.empty(len(components))
    for j, i in enumerate(components):
        q = p.copy()
        q[i] += h
        d = forward_longdouble(specs, q, x) - y
        up = (d * d).mean()
        q[i] -= 2 * h
        d = forward_longdouble(specs, q, x) - y
        down = (d * d).mean()
        out[j] = float((up - down) / (2 * h))
    return out


def worst_relative_error(analytic, numeric, floor=1e-8):
    analytic = np.asarray(analytic)
    big = np.abs(analytic) > floor
    if not big.any():
        return 0.0
    diff = np.abs(analytic - numeric)[big]
    return float((diff / np.maximum(np.abs(analytic), np.abs(numeric))[big]).max())


def rk4_spectral_ks(u0, L, dt, n_steps):
    """Classical RK4 on the Fourier-Galerkin KS system (same wavenumbers and Nyquist rule)."""
    N = len(u0)
    q = 2 * np.pi * np.arange(N // 2 + 1) / L
    lin = q ** 2 - q ** 4
    g = -0.5j * q
    g[-1] = 0

    def rhs(v):
        u = np.fft.irfft(v, N)
        return lin * v + g * np.fft.rfft(u * u)

    v = np.fft.rfft(u0)
    for _ in range(n_steps):
        k1 = rhs(v)
        k2 = rhs(v + 0.5 * dt * k1)
        k3 = rhs(v + 0.5 * dt * k2)
        k4 = rhs(v + dt * k3)
        v = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return np.fft.irfft(v, N)
