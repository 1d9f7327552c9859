import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fedrom.nn import (
    ConfigurationError,
    LayerSpec,
    Network,
    backward,
    build_network,
    flatten,
    forward,
    load_checkpoint,
    loss_and_grad,
    mlp_specs,
    mse_loss,
    n_params,
    read_network,
    save_checkpoint,
    sgd_step,
    unflatten,
    write_network,
)

from .oracles import fd_gradient, worst_relative_error

ROM_ARCH = mlp_specs([2, 40, 40, 40, 40, 5], hidden="relu")
KS_AE_ARCH = mlp_specs([16, 100, 100, 100, 4, 100, 100, 100, 16], hidden="elu")


def test_single_linear_unit_has_two_parameters():
    net = build_network([LayerSpec(1, 1, "linear")], seed=3)
    assert net.params.size == 2


def test_build_is_deterministic():
    a = build_network(ROM_ARCH, seed=11)
    b = build_network(ROM_ARCH, seed=11)
    assert np.array_equal(a.params, b.params)
    assert not np.array_equal(a.params, build_network(ROM_ARCH, seed=12).params)


@pytest.mark.parametrize("R", [1, 5, 17])
def test_rom_parameter_count(R):
    specs = mlp_specs([2, 40, 40, 40, 40, R], hidden="relu")
    assert n_params(specs) == 2 * 40 + 40 + 3 * (1600 + 40) + 40 * R + R


def test_glorot_range_and_zero_bias():
    net = build_network(ROM_ARCH, seed=0)
    for s, w, b in zip(net.layers, net.weights, net.biases):
        limit = np.sqrt(6.0 / (s.input_width + s.output_width))
        assert np.all(np.abs(w) <= limit)
        assert np.all(b == 0)


def test_chain_mismatch_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        build_network([LayerSpec(2, 3, "relu"), LayerSpec(4, 1)], seed=0)
    with pytest.raises(ConfigurationError):
        LayerSpec(0, 3)
    with pytest.raises(ConfigurationError):
        LayerSpec(2, 3, "tanh")


def test_forward_trivial_cases():
    net = build_network(ROM_ARCH, seed=0)
    net.params[:] = 0.0
    assert np.array_equal(forward(net, np.array([0.3, -2.0])), np.zeros(5))

    ident = Network((LayerSpec(2, 2, "linear"),), np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0]))
    assert np.array_equal(forward(ident, [3.0, -1.0]), [3.0, -1.0])

    relu = Network((LayerSpec(1, 1, "relu"),), np.array([1.0, -2.0]))
    assert np.array_equal(forward(relu, [1.0]), [0.0])


def test_forward_dimension_mismatch():
    net = build_network(ROM_ARCH, seed=0)
    with pytest.raises(ValueError):
        forward(net, np.zeros(3))


def test_elu_definition():
    net = Network((LayerSpec(1, 1, "elu"),), np.array([1.0, 0.0]))
    assert forward(net, [2.0])[0] == 2.0
    assert forward(net, [-1.0])[0] == pytest.approx(np.exp(-1.0) - 1.0, abs=1e-15)


def test_mse_examples():
    assert mse_loss([1, 2], [1, 2]) == 0.0
    assert mse_loss([1, 2], [1, 4]) == 2.0
    with pytest.raises(ValueError):
        mse_loss([1, 2], [1, 2, 3])


def test_mse_matches_loop():
    rng = np.random.default_rng(0)
    p, t = rng.normal(size=37), rng.normal(size=37)
    total = 0.0
    for i in range(37):
        total += (p[i] - t[i]) ** 2
    assert abs(mse_loss(p, t) - total / 37) < 1e-12


small_ints = st.integers(-1000, 1000).map(float)


@given(arrays(np.float64, 8, elements=small_ints), arrays(np.float64, 8, elements=small_ints))
def test_mse_nonnegative_and_zero_iff_equal(p, t):
    value = mse_loss(p, t)
    assert value >= 0
    assert (value == 0) == bool(np.all(p == t))


def test_backward_scalar_example():
    net = Network((LayerSpec(1, 1, "linear"),), np.zeros(2))
    g = backward(net, [[1.0]], [[1.0]])
    assert np.array_equal(g, [-2.0, -2.0])


def test_backward_invariant_to_batch_duplication():
    rng = np.random.default_rng(4)
    net = build_network(ROM_ARCH, seed=1)
    x, y = rng.uniform(size=(6, 2)), rng.normal(size=(6, 5))
    g1 = backward(net, x, y)
    g3 = backward(net, np.tile(x, (3, 1)), np.tile(y, (3, 1)))
    np.testing.assert_allclose(g3, g1, rtol=1e-12, atol=1e-15)


def test_backward_rejects_empty_batch():
    net = build_network(ROM_ARCH, seed=1)
    with pytest.raises(ValueError):
        backward(net, np.zeros((0, 2)), np.zeros((0, 5)))


@pytest.mark.parametrize("specs,seed", [(ROM_ARCH, 0), (ROM_ARCH, 1), (KS_AE_ARCH, 2)])
def test_backward_matches_finite_differences(specs, seed):
    rng = np.random.default_rng(seed)
    net = build_network(specs, seed)
    net.params[:] += 0.05 * rng.normal(size=net.params.size)  # nonzero biases
    x = rng.uniform(-1, 1, size=(4, specs[0].input_width))
    y = rng.uniform(-1, 1, size=(4, specs[-1].output_width))
    analytic = backward(net, x, y)
    components = np.arange(net.params.size)
    if components.size > 6000:
        components = rng.choice(components, 400, replace=False)
    numeric = fd_gradient(specs, net.params, x, y, components)
    assert worst_relative_error(analytic[components], numeric) < 1e-5


def test_loss_and_grad_reports_loss():
    rng = np.random.default_rng(0)
    net = build_network(ROM_ARCH, seed=0)
    x, y = rng.uniform(size=(5, 2)), rng.normal(size=(5, 5))
    loss, _ = loss_and_grad(net, x, y)
    assert loss == mse_loss(forward(net, x), y)


def test_sgd_step_examples():
    net = Network((LayerSpec(1, 1, "linear"),), np.zeros(2))
    same = sgd_step(net, np.zeros(2), 0.1)
    assert same == net
    stepped = sgd_step(net, np.array([-2.0, 0.0]), 0.5)
    assert stepped.params[0] == 1.0
    with pytest.raises(ConfigurationError):
        sgd_step(net, np.zeros(3), 0.1)


def test_two_steps_at_one_point_equal_summed_step():
    net = build_network(ROM_ARCH, seed=2)
    rng = np.random.default_rng(2)
    g1, g2 = rng.normal(size=(2, net.params.size))
    two = sgd_step(sgd_step(net, g1, 0.01), g2, 0.01)
    one = sgd_step(net, g1 + g2, 0.01)
    np.testing.assert_allclose(two.params, one.params, rtol=0, atol=1e-15)


def test_flatten_examples():
    specs = [LayerSpec(2, 3, "relu"), LayerSpec(3, 1, "linear")]
    assert n_params(specs) == 13
    net = build_network(specs, 0)
    net.params[:] = 0
    assert np.array_equal(flatten(net), np.zeros(13))
    with pytest.raises(ConfigurationError):
        unflatten(np.zeros(12), specs)


def test_flatten_layout_weights_then_bias():
    specs = [LayerSpec(2, 3, "relu"), LayerSpec(3, 1, "linear")]
    net = unflatten(np.arange(13.0), specs)
    assert np.array_equal(net.weights[0], np.arange(6.0).reshape(3, 2))
    assert np.array_equal(net.biases[0], [6.0, 7.0, 8.0])
    assert np.array_equal(net.weights[1], [[9.0, 10.0, 11.0]])
    assert np.array_equal(net.biases[1], [12.0])


@settings(max_examples=30)
@given(st.integers(0, 2**31 - 1))
def test_round_trip_is_bit_exact(seed):
    net = build_network(KS_AE_ARCH, seed)
    back = unflatten(flatten(net), net.layers)
    assert back == net
    assert back.params.tobytes() == net.params.tobytes()


def test_checkpoint_round_trip(tmp_path):
    net = build_network(KS_AE_ARCH, 5)
    path = tmp_path / "net.bin"
    save_checkpoint(path, net)
    data = path.read_bytes()
    assert data[:5] == b"FROM1"
    assert int.from_bytes(data[5:9], "little") == len(KS_AE_ARCH)
    assert len(data) == 5 + 4 + 12 * len(KS_AE_ARCH) + 8 * net.params.size
    assert load_checkpoint(path) == net


def test_checkpoint_rejects_garbage():
    with pytest.raises(ValueError):
        read_network(io.BytesIO(b"NOPE1"))
    buf = io.BytesIO()
    write_network(buf, build_network(ROM_ARCH, 0))
    with pytest.raises(ValueError):
        read_network(io.BytesIO(buf.getvalue()[:-3]))
