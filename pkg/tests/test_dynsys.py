import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedrom.dynsys import (
    IntegrationBlowUp,
    KSConfig,
    ParamPoint,
    burgers_exact,
    burgers_grid,
    burgers_parameter_grid,
    burgers_snapshots,
    etdrk4_coefficients,
    ks_generate,
    ks_initial_condition,
    ks_integrate,
    load_snapshots,
    phi_weights,
    save_snapshots,
)
from fedrom.nn import ConfigurationError

from .oracles import rk4_spectral_ks

# mpmath with decimal inputs, 30 digits, frozen
BURGERS_ORACLE = [
    ("0.5", "1.0", "0.005", "0.24931933964816780460555195645"),
    ("0.3", "0.02", "0.00475", "0.294058056215780425426979424676"),
]
PHI_AT_MINUS_ONE = ("0.393469340287366576396200465009", "0.0569644706284614272358098387083",
                    "0.103638323514326964786571310484", "0.160602794142788392022381149193")
GROWTH_RATE_MODE1 = "0.074913806536289184867"


@pytest.mark.parametrize("x,t,nu,expected", BURGERS_ORACLE)
def test_burgers_oracle(x, t, nu, expected):
    assert burgers_exact(float(x), float(t), float(nu)) == pytest.approx(float(expected),
                                                                         rel=1e-13)


def test_burgers_boundary_and_sign():
    assert burgers_exact(0.0, 1.3, 0.004) == 0.0
    x = burgers_grid()
    u = burgers_exact(x, 0.7, 0.001)
    assert np.all(np.isfinite(u))
    assert np.all(u[1:] > 0)


def test_burgers_rejects_bad_parameters():
    with pytest.raises(ValueError):
        burgers_exact(0.5, 1.0, 0.0)
    with pytest.raises(ValueError):
        burgers_exact(0.5, -0.1, 0.005)


@settings(max_examples=60)
@given(st.floats(0.0, 2.0), st.floats(1e-4, 0.1))
def test_burgers_finite_and_bounded(t, nu):
    u = burgers_exact(burgers_grid(64), t, nu)
    assert np.all(np.isfinite(u))
    assert np.all(u >= 0) and np.all(u <= 1.0)


def test_snapshot_matrix_shape_and_order():
    params = burgers_parameter_grid()
    assert len(params) == 1024
    assert params[0] == ParamPoint(0.0, 0.001) and params[1].t == 0.0 and params[16].t > 0
    A = burgers_snapshots(burgers_grid(), params)
    assert A.shape == (256, 1024)
    np.testing.assert_array_equal(A[:, 17], burgers_exact(burgers_grid(), params[17].t,
                                                           params[17].nu))
    with pytest.raises(ValueError):
        burgers_snapshots(burgers_grid(), [])


def test_extrapolation_flag():
    assert not ParamPoint(0.02, 0.00475).extrapolated
    assert ParamPoint(2.5, 0.005).extrapolated
    assert ParamPoint(1.0, 0.02).extrapolated


def test_phi_weights_at_zero():
    dt = 0.01
    Q, f1, f2, f3 = phi_weights(np.array([0.0]), dt)
    assert abs(Q[0] - dt / 2) < 1e-12
    for f in (f1, f2, f3):
        assert abs(f[0] - dt / 6) < 1e-12


def test_phi_weights_oracle():
    dt = 0.5
    got = phi_weights(np.array([-1.0]), dt)
    for value, expected in zip(got, PHI_AT_MINUS_ONE):
        assert value[0] / dt == pytest.approx(float(expected), rel=1e-13)


def test_phi_weights_match_closed_forms_away_from_zero():
    z = np.array([-50.0, -3.0, 2.0])
    dt = 1.0
    Q, f1, f2, f3 = phi_weights(z, dt)
    ez = np.exp(z)
    np.testing.assert_allclose(Q, (np.exp(z / 2) - 1) / z, rtol=1e-12)
    np.testing.assert_allclose(f1, (-4 - z + ez * (4 - 3 * z + z * z)) / z ** 3, rtol=1e-10)
    np.testing.assert_allclose(f2, (2 + z + ez * (z - 2)) / z ** 3, rtol=1e-10)
    np.testing.assert_allclose(f3, (-4 - 3 * z - z * z + ez * (4 - z)) / z ** 3, rtol=1e-10)


def test_mean_mode_exponential_is_one():
    c = etdrk4_coefficients(KSConfig())
    assert c.linear[0] == 0.0 and c.exp_full[0] == 1.0
    assert c.nonlinear[-1] == 0.0


def test_zero_field_stays_zero():
    c = etdrk4_coefficients(KSConfig())
    assert np.array_equal(ks_integrate(np.zeros(64), c, 200), np.zeros(64))


def test_linear_growth_rate_of_first_mode():
    cfg = KSConfig()
    c = etdrk4_coefficients(cfg)
    x = cfg.x
    u0 = 1e-9 * np.cos(2 * np.pi * x / cfg.L)
    T = 20.0
    u = ks_integrate(u0, c, int(round(T / cfg.dt)))
    a0, a1 = abs(np.fft.rfft(u0)[1]), abs(np.fft.rfft(u)[1])
    rate = np.log(a1 / a0) / T
    assert rate == pytest.approx(float(GROWTH_RATE_MODE1), rel=0.01)


def test_matches_fine_rk4_reference():
    cfg = KSConfig()
    x = cfg.x
    u0 = np.cos(x / 11) * (1 + np.sin(x / 11))
    u0 -= u0.mean()
    c = etdrk4_coefficients(cfg)
    n = int(round(1.0 / cfg.dt))
    ours = ks_integrate(u0, c, n)
    ref = rk4_spectral_ks(u0, cfg.L, cfg.dt / 100, 100 * n)
    assert np.max(np.abs(ours - ref)) < 1e-4


def test_record_every_and_mean_preserved():
    cfg = KSConfig()
    c = etdrk4_coefficients(cfg)
    u0 = ks_initial_condition(cfg, 3, rms=0.5)
    u, rec = ks_integrate(u0, c, 100, record_every=25)
    assert rec.shape == (64, 4)
    np.testing.assert_array_equal(rec[:, -1], u)
    assert abs(u.mean()) < 1e-14


def test_blow_up_is_reported():
    cfg = KSConfig(dt=0.5, sample_dt=0.5)
    c = etdrk4_coefficients(cfg)
    with pytest.raises(IntegrationBlowUp):
        ks_integrate(1e3 * np.cos(cfg.x), c, 2000)


def test_initial_condition_properties():
    cfg = KSConfig()
    u = ks_initial_condition(cfg, 0)
    assert abs(u.mean()) < 1e-15
    assert np.sqrt(np.mean(u ** 2)) == pytest.approx(0.1)
    assert np.array_equal(u, ks_initial_condition(cfg, 0))


def test_short_generation_shape_and_determinism():
    cfg = KSConfig(spinup_from=-5.0, t_end=2.5)
    a = ks_generate(cfg, seed=1)
    assert a.shape == (64, 10)
    np.testing.assert_allclose(cfg.sample_times[[0, -1]], [0.25, 2.5])
    assert np.array_equal(a, ks_generate(cfg, seed=1))


def test_ks_config_validation():
    with pytest.raises(ConfigurationError):
        KSConfig(N=48)
    with pytest.raises(ConfigurationError):
        KSConfig(sample_dt=0.251)
    with pytest.raises(ConfigurationError):
        KSConfig(L=0.0)
    assert KSConfig(t_end=3750).n_samples == 15000


def test_snapshot_file_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    A = rng.normal(size=(7, 5))
    path = tmp_path / "a.snap"
    save_snapshots(path, A)
    data = path.read_bytes()
    assert data[:5] == b"SNAP1" and len(data) == 21 + 8 * 35
    # column-major: the second stored value is A[1, 0]
    assert np.frombuffer(data[29:37], "<f8")[0] == A[1, 0]
    assert np.array_equal(load_snapshots(path), A)
    path.write_bytes(data[:-8])
    with pytest.raises(ValueError):
        load_snapshots(path)


def test_frozen_oracles_against_mpmath():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    for x, t, nu, expected in BURGERS_ORACLE:
        x, t, nu = mp.mpf(x), mp.mpf(t), mp.mpf(nu)
        t0 = mp.exp(1 / (8 * nu))
        u = (x / (t + 1)) / (1 + mp.sqrt((t + 1) / t0) * mp.exp(x * x / (4 * nu * (t + 1))))
        assert abs(u - mp.mpf(expected)) < mp.mpf(10) ** -28
    z = mp.mpf(-1)
    ez = mp.exp(z)
    exact = ((mp.exp(z / 2) - 1) / z,
             (-4 - z + ez * (4 - 3 * z + z * z)) / z ** 3,
             (2 + z + ez * (z - 2)) / z ** 3,
             (-4 - 3 * z - z * z + ez * (4 - z)) / z ** 3)
    for value, expected in zip(exact, PHI_AT_MINUS_ONE):
        assert abs(value - mp.mpf(expected)) < mp.mpf(10) ** -28
    q = 2 * mp.pi / 22
    assert abs(q ** 2 - q ** 4 - mp.mpf(GROWTH_RATE_MODE1)) < mp.mpf(10) ** -20
