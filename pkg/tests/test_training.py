import numpy as np
import pytest

from pempinn.degradation import hydroxyl_chain, thinning_rate
from pempinn.electrochem import solve_cell_voltage
from pempinn.errors import ConfigError
from pempinn.network import (
    NetworkParameters,
    flatten,
    gradient,
    init_parameters,
    predict,
    unflatten,
)
from pempinn.training import (
    K5_SCALE,
    AdamState,
    EpochRecord,
    TrainingConfig,
    adam_step,
    composite_loss,
    evaluate,
    thinning_residual,
    thinning_residual_terms,
    train,
    voltage_residual,
    voltage_residual_terms,
)


def small_config(**kw):
    kw.setdefault("max_epochs", 5)
    kw.setdefault("n_collocation", 16)
    return TrainingConfig(**kw)


def constant_output_network(cond, y_v=1.2, y_m=0.9, k5_hat=0.0):
    """Zero weights except output biases: outputs are constant in time."""
    base = init_parameters(0, input_scale=cond.t_max, t_mem_ref=cond.t_mem0)
    weights = tuple(np.zeros_like(w) for w in base.weights)
    biases = list(np.zeros_like(b) for b in base.biases)
    biases[-1] = np.array([y_v, y_m])
    return NetworkParameters(
        weights=weights,
        biases=tuple(biases),
        k5_hat=k5_hat,
        input_scale=cond.t_max,
        v_ref=base.v_ref,
        t_mem_ref=base.t_mem0 if hasattr(base, "t_mem0") else base.t_mem_ref,
    )


# -- residuals ---------------------------------------------------------------


def test_voltage_residual_zero_for_constant_outputs(cond, coeffs):
    net = constant_output_network(cond)
    r = voltage_residual(net, coeffs, np.linspace(0.0, cond.t_max, 7))
    assert np.allclose(np.asarray(r), 0.0, atol=1e-18)


def test_voltage_residual_two_term_hand_case():
    # k2V = 0 leaves r = dyv*[1 + k3V*(P/A)/(tm*V^2)] + k3V*(P/A)/(V*tm^2)
    # * (t_ref/v_ref) * dym; checked against direct substitution.
    from pempinn.electrochem import VoltageCoefficients

    coeffs = VoltageCoefficients(k1V=1.5, k2V=0.0, k3V=2e-3, P_over_A=0.7)
    y_v, y_m = 1.21, 0.82
    dyv, dym = 0.013, -0.61
    v_ref, t_ref = 2.0, 0.0175
    got = voltage_residual_terms(y_v, y_m, dyv, dym, coeffs, v_ref, t_ref)
    v = v_ref * y_v
    tm = t_ref * y_m
    expected = dyv * (1 + 2e-3 * 0.7 / (tm * v * v)) + (
        2e-3 * 0.7 / (v * tm * tm) * (t_ref / v_ref) * dym
    )
    assert float(got) == pytest.approx(expected, rel=1e-14)


def test_voltage_residual_small_on_ground_truth(params, cond, coeffs, trajectory):
    # Substituting the true trajectory (with FD derivatives) into the
    # residual operator gives values that shrink with resolution.
    def residual_scale(stride):
        t = trajectory.times[:: stride][1:-1]
        v = trajectory.voltages[:: stride]
        m = trajectory.thicknesses[:: stride]
        dt = np.diff(trajectory.times[:: stride])[0]
        dv = (v[2:] - v[:-2]) / (2 * dt)
        dm = (m[2:] - m[:-2]) / (2 * dt)
        y_v = v[1:-1] / 2.0
        y_m = m[1:-1] / cond.t_mem0
        dyv = dv * cond.t_max / 2.0
        dym = dm * cond.t_max / cond.t_mem0
        r = voltage_residual_terms(y_v, y_m, dyv, dym, coeffs, 2.0, cond.t_mem0)
        return float(np.max(np.abs(np.asarray(r))))

    coarse = residual_scale(64)
    fine = residual_scale(8)
    assert fine < coarse
    assert fine < 1e-4


def test_thinning_residual_reduces_without_attack(params, cond):
    # k5_hat = 0 leaves the pure derivative penalty.
    net = constant_output_network(cond, k5_hat=0.0)
    r = thinning_residual(net, params, cond, np.linspace(0.0, cond.t_max, 5))
    assert np.allclose(np.asarray(r), 0.0, atol=1e-18)

    # and with nonzero k5_hat the same constant network picks up the
    # degradation term only.
    net2 = constant_output_network(cond, k5_hat=1.0)
    r2 = np.asarray(thinning_residual(net2, params, cond, np.array([0.0])))
    v = 2.0 * 1.2
    c_ho = float(np.asarray(hydroxyl_chain(params, cond, np.array([v]), k5=K5_SCALE))[0])
    tr = float(thinning_rate(params, c_ho, cond.t_mem0 * 0.9, k5=K5_SCALE))
    expected = cond.t_max / cond.t_mem0 * tr
    assert r2[0] == pytest.approx(expected, rel=1e-12)


def test_thinning_residual_reduces_when_hydroxyl_clamps(params, cond):
    # A (transiently) negative trainable k5 drives the hydroxyl formula
    # negative; the clamp zeroes the attack term and leaves the pure
    # derivative penalty, exactly as with k5_hat = 0.
    net = constant_output_network(cond, k5_hat=-10.0)
    t = np.linspace(0.0, cond.t_max, 5)
    r = np.asarray(thinning_residual(net, params, cond, t))
    assert np.array_equal(r, np.zeros_like(r))  # dym = 0 for a constant net


def test_thinning_residual_small_with_true_k5(params, cond, trajectory):
    # Overfit probe: true trajectory values with FD derivatives and
    # k5_hat = k5_true/1e3 give near-zero residuals.
    stride = 8
    t = trajectory.times[::stride][1:-1]
    v = trajectory.voltages[::stride]
    m = trajectory.thicknesses[::stride]
    dt = np.diff(trajectory.times[::stride])[0]
    dm = (m[2:] - m[:-2]) / (2 * dt)
    y_v = v[1:-1] / 2.0
    y_m = m[1:-1] / cond.t_mem0
    dym = dm * cond.t_max / cond.t_mem0
    r = thinning_residual_terms(
        y_v, y_m, dym, params.k5_true / K5_SCALE, params, cond,
        2.0, cond.t_mem0, cond.t_max,
    )
    assert float(np.mean(np.abs(np.asarray(r)))) < 1e-3


# -- composite loss ----------------------------------------------------------


def test_loss_zero_for_perfect_noise_free_fit(params, cond, coeffs, trajectory):
    # A constant network, a dataset whose targets equal the network outputs,
    # and all physics weights off: the loss must vanish.
    from pempinn.simulator import Dataset

    net = constant_output_network(cond)
    times = np.linspace(0.0, cond.t_max / 3, 9)
    v_pred, m_pred = predict(net, times)
    ds = Dataset(
        train_times=times,
        train_voltages=np.asarray(v_pred),
        train_thicknesses=np.asarray(m_pred),
        test_times=times,
        test_voltages=np.asarray(v_pred),
        test_thicknesses=np.asarray(m_pred),
        noise_sigma_v=0.0,
        noise_sigma_mem=0.0,
        seed=0,
        train_fraction=1 / 3,
    )
    cfg = small_config(lambda_v=0.0, lambda_tmem=0.0, lambda_ic=0.0)
    total, comps = composite_loss(net, ds, cfg, coeffs, params, cond, v0=1.0)
    assert comps["total"] == pytest.approx(0.0, abs=1e-18)


def test_loss_quadratic_scaling(params, cond, coeffs, small_dataset):
    cfg = small_config(lambda_v=0.0, lambda_tmem=0.0, lambda_ic=0.0)
    net = constant_output_network(cond)
    v0 = solve_cell_voltage(coeffs, cond.t_mem0)
    _, base = composite_loss(net, small_dataset, cfg, coeffs, params, cond, v0)

    # Doubling every data residual quadruples the data component: build a
    # dataset whose targets are twice as far from the constant predictions.
    from dataclasses import replace as dc_replace

    v_pred, m_pred = predict(net, small_dataset.train_times)
    ds2 = dc_replace(
        small_dataset,
        train_voltages=2 * small_dataset.train_voltages - np.asarray(v_pred),
        train_thicknesses=2 * small_dataset.train_thicknesses - np.asarray(m_pred),
    )
    _, doubled = composite_loss(net, ds2, cfg, coeffs, params, cond, v0)
    assert doubled["data"] == pytest.approx(4.0 * base["data"], rel=1e-12)


def test_loss_hand_built_single_point(params, cond, coeffs):
    # One data point, one collocation point, everything reduced by hand.
    from pempinn.simulator import Dataset

    net = constant_output_network(cond, k5_hat=0.5)
    t0 = np.array([0.0])
    v_t, m_t = 2.5, 0.016
    ds = Dataset(
        train_times=t0,
        train_voltages=np.array([v_t]),
        train_thicknesses=np.array([m_t]),
        test_times=t0,
        test_voltages=np.array([v_t]),
        test_thicknesses=np.array([m_t]),
        noise_sigma_v=0.0,
        noise_sigma_mem=0.0,
        seed=0,
        train_fraction=1.0,
    )
    cfg = TrainingConfig(
        max_epochs=1, n_collocation=2, lambda_v=0.3, lambda_tmem=0.7, lambda_ic=2.0
    )
    v0 = 2.4
    total, comps = composite_loss(net, ds, cfg, coeffs, params, cond, v0)

    data = (1.2 - v_t / 2.0) ** 2 + (0.9 - m_t / cond.t_mem0) ** 2
    r_v = np.asarray(
        voltage_residual(net, coeffs, np.linspace(0.0, cond.t_max, 2))
    )
    r_m = np.asarray(
        thinning_residual(net, params, cond, np.linspace(0.0, cond.t_max, 2))
    )
    ic = (1.2 - v0 / 2.0) ** 2 + (0.9 - 1.0) ** 2
    expected = (
        data
        + 0.3 * float(np.mean(r_v**2))
        + 0.7 * float(np.mean(r_m**2))
        + 2.0 * ic
    )
    assert comps["total"] == pytest.approx(expected, rel=1e-12)


def test_loss_components_sum_to_total(params, cond, coeffs, small_dataset):
    net = init_parameters(3, input_scale=cond.t_max, t_mem_ref=cond.t_mem0)
    cfg = small_config()
    v0 = solve_cell_voltage(coeffs, cond.t_mem0)
    _, comps = composite_loss(net, small_dataset, cfg, coeffs, params, cond, v0)
    assert all(v >= 0.0 for k, v in comps.items() if k != "total")
    s = comps["data"] + comps["physics_v"] + comps["physics_mem"] + comps["ic"]
    assert s == pytest.approx(comps["total"], rel=1e-12)


def test_physics_disabled_forces_zero_weights():
    cfg = TrainingConfig(physics_enabled=False, lambda_v=3.0, lambda_tmem=2.0)
    assert cfg.lambda_v == 0.0
    assert cfg.lambda_tmem == 0.0


def test_config_validation():
    with pytest.raises(ConfigError, match="learning_rate"):
        TrainingConfig(learning_rate=0.0)
    with pytest.raises(ConfigError, match="lambda_v"):
        TrainingConfig(lambda_v=-1.0)
    with pytest.raises(ConfigError, match="n_collocation"):
        TrainingConfig(n_collocation=1)


# -- optimizer ---------------------------------------------------------------


def test_adam_first_step_is_signed_learning_rate():
    cfg = TrainingConfig(learning_rate=0.01, adam_eps=1e-300)
    state = AdamState.zeros(3)
    params = np.array([1.0, 2.0, 3.0])
    grad = np.array([0.5, -2.0, 1e-4])
    new, state = adam_step(state, params, grad, cfg)
    # bias-corrected m_hat = g, v_hat = g^2: step is exactly -lr*sign(g)
    assert np.allclose(new - params, -0.01 * np.sign(grad), rtol=1e-10)
    assert state.step == 1


def test_adam_zero_gradient_keeps_parameters():
    cfg = TrainingConfig()
    state = AdamState.zeros(2)
    params = np.array([1.0, -1.0])
    new, state = adam_step(state, params, np.zeros(2), cfg)
    assert np.array_equal(new, params)
    # moments stay zero, then decay from a nonzero push
    new, state = adam_step(state, new, np.array([1.0, 0.0]), cfg)
    new, state = adam_step(state, new, np.zeros(2), cfg)
    assert state.m[0] < 0.1 and state.m[0] > 0.0


def test_adam_deterministic():
    cfg = TrainingConfig()

    def run():
        state = AdamState.zeros(4)
        params = np.linspace(-1, 1, 4)
        for k in range(20):
            grad = np.sin(params * (k + 1))
            params, state = adam_step(state, params, grad, cfg)
        return params

    assert np.array_equal(run(), run())


# -- train / evaluate ---------------------------------------------------------


def test_train_zero_epochs_returns_init(params, cond, small_dataset):
    cfg = small_config(max_epochs=0, seed=12)
    net, metrics = train(small_dataset, params, cond, cfg)
    ref = init_parameters(12, input_scale=cond.t_max, t_mem_ref=cond.t_mem0)
    assert np.array_equal(flatten(net), flatten(ref))
    assert metrics.loss_history == []
    assert np.isfinite(metrics.rmse_test_v)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_aborts_on_nonfinite_loss(params, cond, small_dataset):
    # An absurd learning rate overflows the affine outputs within an epoch;
    # the abort must name the epoch.
    from pempinn.errors import TrainingError

    cfg = small_config(max_epochs=10, learning_rate=1e200)
    with pytest.raises(TrainingError, match="epoch"):
        train(small_dataset, params, cond, cfg)


def test_train_deterministic_bitwise(params, cond, small_dataset):
    cfg = small_config(max_epochs=8, seed=5)
    n1, m1 = train(small_dataset, params, cond, cfg)
    n2, m2 = train(small_dataset, params, cond, cfg)
    assert np.array_equal(flatten(n1), flatten(n2))
    assert m1.loss_history == m2.loss_history


def test_train_history_and_checkpoint_hook(params, cond, small_dataset):
    seen = []
    cfg = small_config(max_epochs=6, checkpoint_every=2)
    net, metrics = train(
        small_dataset, params, cond, cfg,
        checkpoint_hook=lambda epoch, n: seen.append(epoch),
    )
    assert seen == [2, 4, 6]
    assert len(metrics.loss_history) == 6
    assert isinstance(metrics.loss_history[0], EpochRecord)
    assert metrics.loss_history[0].k5_hat == 0.0


def test_k5_gradient_path_alive(params, cond, coeffs, small_dataset):
    # After a warm-up step the k5 coordinate must receive gradient whenever
    # the thinning weight is positive and some collocation point has
    # positive attack rate.
    cfg = small_config(max_epochs=2, seed=0)
    net, _ = train(small_dataset, params, cond, cfg)
    v0 = solve_cell_voltage(coeffs, cond.t_mem0)
    g = gradient(
        net,
        lambda lifted: composite_loss(
            lifted, small_dataset, cfg, coeffs, params, cond, v0
        )[0],
    )
    assert g[-1] != 0.0


def test_evaluate_perfect_and_constant_predictors(params, cond, trajectory):
    from pempinn.simulator import Dataset

    net = constant_output_network(cond)
    times = np.linspace(0.0, cond.t_max, 11)
    v_pred, m_pred = predict(net, times)
    perfect = Dataset(
        train_times=times,
        train_voltages=np.asarray(v_pred),
        train_thicknesses=np.asarray(m_pred),
        test_times=times,
        test_voltages=np.asarray(v_pred),
        test_thicknesses=np.asarray(m_pred),
        noise_sigma_v=0.0,
        noise_sigma_mem=0.0,
        seed=0,
        train_fraction=1.0,
    )
    m = evaluate(net, perfect)
    assert m.rmse_test_v == 0.0 and m.rmse_test_mem == 0.0

    # Constant predictor at the target mean scores the population std.
    targets_v = trajectory.voltages[:11]
    targets_m = trajectory.thicknesses[:11]
    mean_net = constant_output_network(
        cond, y_v=float(np.mean(targets_v)) / 2.0,
        y_m=float(np.mean(targets_m)) / cond.t_mem0,
    )
    ds = Dataset(
        train_times=times,
        train_voltages=targets_v,
        train_thicknesses=targets_m,
        test_times=times,
        test_voltages=targets_v,
        test_thicknesses=targets_m,
        noise_sigma_v=0.0,
        noise_sigma_mem=0.0,
        seed=0,
        train_fraction=1.0,
    )
    m2 = evaluate(mean_net, ds)
    assert m2.rmse_test_v == pytest.approx(float(np.std(targets_v)), rel=1e-10)
    assert m2.rmse_test_mem == pytest.approx(float(np.std(targets_m)), rel=1e-10)


def test_gradient_matches_fd_through_full_loss(params, cond, coeffs, small_dataset):
    # Spot check on a physically plausible network (output biases near the
    # operating point) so no clamp is active and FD is well conditioned.
    cfg = small_config(n_collocation=8)
    v0 = solve_cell_voltage(coeffs, cond.t_mem0)
    base = init_parameters(4, input_scale=cond.t_max, t_mem_ref=cond.t_mem0)
    biases = list(base.biases)
    biases[-1] = np.array([v0 / 2.0, 1.0])
    net = NetworkParameters(
        weights=base.weights,
        biases=tuple(biases),
        k5_hat=0.3,
        input_scale=base.input_scale,
        v_ref=base.v_ref,
        t_mem_ref=base.t_mem_ref,
    )
    g = gradient(
        net,
        lambda lifted: composite_loss(
            lifted, small_dataset, cfg, coeffs, params, cond, v0
        )[0],
    )
    vec = flatten(net)

    def loss_at(v):
        nn = unflatten(v, net)
        return composite_loss(nn, small_dataset, cfg, coeffs, params, cond, v0)[0]

    # With k5_hat != 0 the hydroxyl cancellation (terms ~1e-6 differenced to
    # ~1e-12) injects ~1e-10 relative noise into every FD loss evaluation,
    # so the oracle cannot resolve beyond ~1e-7 absolute here.
    h = 1e-4
    for i in list(range(0, 88, 11)) + [87]:
        e = np.zeros_like(vec)
        e[i] = h
        fd = (
            8 * (loss_at(vec + e) - loss_at(vec - e))
            - (loss_at(vec + 2 * e) - loss_at(vec - 2 * e))
        ) / (12 * h)
        assert g[i] == pytest.approx(fd, rel=1e-5, abs=5e-7)
