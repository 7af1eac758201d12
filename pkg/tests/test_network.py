import numpy as np
import pytest

from pempinn.network import (
    LAYER_SIZES,
    LiftedParameters,
    NetworkParameters,
    flatten,
    gradient,
    init_parameters,
    load_checkpoint,
    predict,
    predict_with_time_derivative,
    save_checkpoint,
    unflatten,
)

SCALE = 8.0e5
T_REF = 0.0175


def make_net(seed=0):
    return init_parameters(seed, input_scale=SCALE, t_mem_ref=T_REF)


def test_parameter_count_is_88():
    net = make_net()
    assert net.n_parameters == 88
    assert net.layer_sizes == LAYER_SIZES
    assert flatten(net).size == 88


def test_init_deterministic_per_seed():
    a, b = make_net(3), make_net(3)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    assert not np.array_equal(make_net(4).weights[0], a.weights[0])


def test_init_k5_starts_at_zero():
    assert make_net().k5_hat == 0.0


def test_init_weights_within_glorot_bounds():
    net = make_net(9)
    for w, (fan_in, fan_out) in zip(
        net.weights, zip(LAYER_SIZES[:-1], LAYER_SIZES[1:])
    ):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        assert np.all(np.abs(w) <= limit)
    for b in net.biases:
        assert np.all(b == 0.0)


def test_zero_output_weights_give_zero_outputs():
    net = make_net(0)
    weights = list(net.weights)
    biases = list(net.biases)
    weights[-1] = np.zeros_like(weights[-1])
    zeroed = NetworkParameters(
        weights=tuple(weights),
        biases=tuple(biases),
        k5_hat=0.0,
        input_scale=SCALE,
        v_ref=2.0,
        t_mem_ref=T_REF,
    )
    v, m = predict(zeroed, 1234.5)
    assert v == 0.0 and m == 0.0


def test_toy_single_neuron_forward():
    # 1 -> 1 -> 1 with unit weight, zero bias: y = w_out * sigmoid(tau).
    from pempinn.network import mlp_forward

    weights = (np.array([[1.0]]), np.array([[0.7]]))
    biases = (np.zeros(1), np.zeros(1))
    tau = 0.35
    y = mlp_forward(weights, biases, tau)
    assert y[0] == pytest.approx(0.7 / (1 + np.exp(-tau)), rel=1e-14)


def test_toy_derivative_quarter_slope_at_origin():
    # y = sigmoid(w * tau): dy/dt at tau=0 is w/4 / input_scale.
    from pempinn.autodiff import Dual
    from pempinn.network import mlp_forward

    w_in = 1.3
    scale = 50.0
    weights = (np.array([[w_in]]), np.array([[1.0]]))
    biases = (np.zeros(1), np.zeros(1))
    y = mlp_forward(weights, biases, Dual(0.0, 1.0 / scale))
    assert y[0].tangent == pytest.approx(w_in / 4.0 / scale, rel=1e-13)


def test_time_derivative_matches_finite_differences():
    net = make_net(5)
    t = np.linspace(0.0, SCALE, 9)
    (_, _), (dv, dm) = predict_with_time_derivative(net, t)
    h = 1e-4 * SCALE
    v_hi, m_hi = predict(net, t + h)
    v_lo, m_lo = predict(net, t - h)
    assert np.allclose(dv, (v_hi - v_lo) / (2 * h), rtol=1e-7, atol=1e-16)
    assert np.allclose(dm, (m_hi - m_lo) / (2 * h), rtol=1e-7, atol=1e-16)


def test_constant_network_zero_derivative():
    net = make_net(0)
    weights = list(net.weights)
    weights[-1] = np.zeros_like(weights[-1])
    frozen = NetworkParameters(
        weights=tuple(weights),
        biases=net.biases,
        k5_hat=0.0,
        input_scale=SCALE,
        v_ref=2.0,
        t_mem_ref=T_REF,
    )
    (_, _), (dv, dm) = predict_with_time_derivative(frozen, 777.0)
    assert dv == 0.0 and dm == 0.0


def test_flatten_unflatten_roundtrip():
    net = make_net(11)
    vec = flatten(net)
    back = unflatten(vec, net)
    assert np.array_equal(flatten(back), vec)
    for wa, wb in zip(back.weights, net.weights):
        assert np.array_equal(wa, wb)
    assert back.k5_hat == net.k5_hat


def test_unflatten_rejects_wrong_size():
    net = make_net(0)
    with pytest.raises(ValueError, match="88"):
        unflatten(np.zeros(87), net)


def test_checkpoint_roundtrip_preserves_outputs(tmp_path):
    net = make_net(13)
    net = unflatten(flatten(net) + 0.01, net)  # move k5_hat off zero too
    path = tmp_path / "ckpt.json"
    save_checkpoint(net, path)
    loaded = load_checkpoint(path)
    t = np.linspace(0.0, SCALE, 17)
    v1, m1 = predict(net, t)
    v2, m2 = predict(loaded, t)
    assert np.array_equal(v1, v2)
    assert np.array_equal(m1, m2)
    assert loaded.k5_hat == net.k5_hat


def test_gradient_isolated_k5_quadratic():
    net = make_net(1)
    net = unflatten(flatten(net) * 0.0 + 0.25, net)  # all params 0.25
    g = gradient(net, lambda lifted: lifted.k5_hat * lifted.k5_hat)
    assert g[-1] == pytest.approx(0.5, rel=1e-14)
    assert np.all(g[:-1] == 0.0)


def test_gradient_of_summed_outputs_matches_fd():
    net = make_net(2)
    t = np.linspace(0.0, SCALE, 21)
    tau = t / SCALE

    def loss_builder(lifted):
        y = lifted.forward(tau)
        return (y[0] * y[0]).sum() + (y[1] * y[1]).sum()

    g = gradient(net, loss_builder)

    vec = flatten(net)

    def loss_at(v):
        nn = unflatten(v, net)
        from pempinn.network import mlp_forward

        y = mlp_forward(nn.weights, nn.biases, tau)
        return float(np.sum(y[0] ** 2) + np.sum(y[1] ** 2))

    h = 1e-6
    for i in range(0, vec.size, 7):  # sample coordinates
        e = np.zeros_like(vec)
        e[i] = h
        fd = (loss_at(vec + e) - loss_at(vec - e)) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-10)


def test_gradient_rejects_non_value_loss():
    net = make_net(0)
    with pytest.raises(TypeError):
        gradient(net, lambda lifted: 3.14)


def test_lifted_order_matches_flatten():
    net = make_net(6)
    lifted = LiftedParameters(net)
    assert np.array_equal(
        np.array([float(v.data) for v in lifted._flat]), flatten(net)
    )


def test_forward_identical_between_plain_and_lifted():
    net = make_net(8)
    tau = np.linspace(0.0, 1.0, 33)
    plain = predict(net, tau * SCALE)
    lifted = LiftedParameters(net)
    y = lifted.forward(tau)
    assert np.array_equal(np.asarray(y[0].data) * net.v_ref, plain[0])
    assert np.array_equal(np.asarray(y[1].data) * net.t_mem_ref, plain[1])
