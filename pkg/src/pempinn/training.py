"""Physics-informed training: composite loss, Adam, and evaluation.

The loss combines (all nondimensionalized so unit weights are meaningful):

* data mismatch on the noisy training samples, both channels scaled by
  their reference magnitudes;
* the voltage-evolution residual at collocation points, formed from the
  explicit rearrangement of the time-differentiated voltage equation (the
  raw form has dV/dt on both sides and would double-count the derivative);
* the thinning-law residual, whose degradation term chains through the
  radical steady state at the predicted voltage and carries the trainable
  normalized rate constant k5_hat (physical value k5_hat * 1e3);
* an initial-condition term pinning V(0) and t_mem(0).

Collocation points cover the full horizon, not just the training window:
residuals are the only information available in the extrapolated region.

Training is full-batch Adam, bitwise deterministic for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .autodiff import Dual, amean, maximum, primal
from .constants import OperatingConditions, PhysicsParameters
from .degradation import DiagnosticCounters, hydroxyl_chain, thinning_rate
from .electrochem import VoltageCoefficients, solve_cell_voltage, voltage_coefficients
from .errors import ConfigError, TrainingError
from .network import (
    DEFAULT_V_REF,
    LiftedParameters,
    NetworkParameters,
    flatten,
    init_parameters,
    mlp_forward,
    predict,
    unflatten,
)

__all__ = [
    "K5_SCALE",
    "TrainingConfig",
    "Metrics",
    "EpochRecord",
    "AdamState",
    "adam_step",
    "voltage_residual",
    "thinning_residual",
    "composite_loss",
    "train",
    "evaluate",
]

# Fixed conditioning factor between the trainable scalar and the physical
# attack-rate constant (m3/(mol s)).
K5_SCALE = 1.0e3

# Floor, in normalized units, under which predicted outputs are clamped
# before entering residual denominators. Early epochs can emit near-zero or
# negative outputs; without a floor well inside the smooth region the
# residual coefficients (~1/(t_mem*V^2)) reach 1e19, which permanently
# suppresses Adam's second-moment-scaled steps and puts the loss outside
# the dynamic range any finite-difference check can resolve. 0.1 is a
# factor ~5 below the smallest physically reachable normalized output.
CLAMP_EPS = 0.1


@dataclass
class TrainingConfig:
    learning_rate: float = 0.005
    max_epochs: int = 7500
    lambda_v: float = 1.0
    lambda_tmem: float = 1.0
    lambda_ic: float = 10.0
    n_collocation: int = 1000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1.0e-8
    seed: int = 7
    physics_enabled: bool = True
    v_ref: float = DEFAULT_V_REF
    checkpoint_every: int = 0

    def __post_init__(self):
        if not self.physics_enabled:
            self.lambda_v = 0.0
            self.lambda_tmem = 0.0
        if self.learning_rate <= 0.0:
            raise ConfigError("learning_rate", "must be positive")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs", "must be non-negative")
        if self.n_collocation < 2:
            raise ConfigError("n_collocation", "need at least 2 collocation points")
        for key in ("lambda_v", "lambda_tmem", "lambda_ic"):
            if getattr(self, key) < 0.0:
                raise ConfigError(key, "loss weights must be non-negative")
        if not 0.0 <= self.adam_beta1 < 1.0 or not 0.0 <= self.adam_beta2 < 1.0:
            raise ConfigError("adam_beta", "Adam betas must lie in [0, 1)")
        if self.adam_eps <= 0.0:
            raise ConfigError("adam_eps", "must be positive")


class EpochRecord(NamedTuple):
    epoch: int
    loss_data: float
    loss_physics_v: float
    loss_physics_mem: float
    loss_ic: float
    loss_total: float
    k5_hat: float


@dataclass
class Metrics:
    rmse_train_v: float
    rmse_test_v: float
    rmse_train_mem: float
    rmse_test_mem: float
    k5_hat_final: float = float("nan")
    loss_history: list = field(default_factory=list)
    hydroxyl_clamped: int = 0
    chemistry_infeasible: int = 0
    output_clamped: int = 0


# -- residuals ----------------------------------------------------------------


def _clamped_physical(y_v, y_m, v_ref, t_ref, diag=None):
    """Physical V and t_mem from normalized outputs, with floored denominators."""
    if diag is not None:
        diag.count("output_clamped", np.sum(np.asarray(primal(y_v)) <= CLAMP_EPS))
        diag.count("output_clamped", np.sum(np.asarray(primal(y_m)) <= CLAMP_EPS))
    v = v_ref * maximum(y_v, CLAMP_EPS)
    tm = t_ref * maximum(y_m, CLAMP_EPS)
    return v, tm


def voltage_residual_terms(
    y_v, y_m, dyv_dtau, dym_dtau, coeffs: VoltageCoefficients,
    v_ref, t_ref, diag=None,
):
    """Nondimensional voltage-evolution residual from normalized outputs.

    r = y_v' * [1 + k2V/V + k3V*(P/A)/(t_mem*V^2)]
        + k3V*(P/A)/(V*t_mem^2) * (t_ref/v_ref) * y_m'

    where y' are derivatives with respect to tau = t/t_max. Zero exactly
    when the predicted pair satisfies the differentiated voltage equation.
    """
    v, tm = _clamped_physical(y_v, y_m, v_ref, t_ref, diag)
    pa = coeffs.P_over_A
    bracket = 1.0 + coeffs.k2V / v + coeffs.k3V * pa / (tm * v * v)
    cross = coeffs.k3V * pa / (v * tm * tm) * (t_ref / v_ref)
    return dyv_dtau * bracket + cross * dym_dtau


def thinning_residual_terms(
    y_v, y_m, dym_dtau, k5_hat,
    params: PhysicsParameters, cond: OperatingConditions,
    v_ref, t_ref, t_max, diag=None,
):
    """Nondimensional thinning-law residual, r = y_m' + (t_max/t_ref)*TR.

    TR chains voltage -> water velocity -> peroxide quadratic -> hydroxyl
    concentration -> attack rate, all differentiable (the quadratic root in
    closed form); infeasible chemistry contributes zero attack.
    """
    v, tm = _clamped_physical(y_v, y_m, v_ref, t_ref, diag)
    k5 = k5_hat * K5_SCALE
    c_ho = hydroxyl_chain(params, cond, v, k5=k5, diag=diag)
    tr = thinning_rate(params, c_ho, tm, k5=k5)
    return dym_dtau + (t_max / t_ref) * tr


def _forward_with_tau_derivatives(net, tau):
    x = Dual(tau, 1.0)
    y = net_forward(net, x)
    return y[0].primal, y[1].primal, y[0].tangent, y[1].tangent


def net_forward(net, x):
    """Forward pass for NetworkParameters and LiftedParameters alike."""
    return mlp_forward(net.weights, net.biases, x)


def voltage_residual(net, coeffs: VoltageCoefficients, t):
    """Voltage residual at physical times t (floats or arrays)."""
    tau = np.asarray(t, dtype=float) / net.input_scale
    y_v, y_m, dyv, dym = _forward_with_tau_derivatives(net, tau)
    return voltage_residual_terms(
        y_v, y_m, dyv, dym, coeffs, net.v_ref, net.t_mem_ref
    )


def thinning_residual(
    net, params: PhysicsParameters, cond: OperatingConditions, t
):
    """Thinning residual at physical times t (floats or arrays)."""
    tau = np.asarray(t, dtype=float) / net.input_scale
    y_v, y_m, _, dym = _forward_with_tau_derivatives(net, tau)
    return thinning_residual_terms(
        y_v, y_m, dym, net.k5_hat, params, cond,
        net.v_ref, net.t_mem_ref, cond.t_max,
    )


# -- composite loss -----------------------------------------------------------


def composite_loss(
    net,
    dataset,
    config: TrainingConfig,
    coeffs: VoltageCoefficients,
    params: PhysicsParameters,
    cond: OperatingConditions,
    v0: float | None = None,
    diag: DiagnosticCounters | None = None,
):
    """Total loss and its weighted components.

    ``net`` may be NetworkParameters (plain evaluation, used by the
    finite-difference oracles) or LiftedParameters (differentiable).
    Returns (total, components) where components is a dict with keys
    data/physics_v/physics_mem/ic/total holding plain floats.
    """
    if len(dataset.train_times) == 0:
        raise ConfigError("dataset", "training split is empty")
    if v0 is None:
        v0 = solve_cell_voltage(coeffs, cond.t_mem0)

    tau_d = dataset.train_times / net.input_scale
    target_v = dataset.train_voltages / net.v_ref
    target_m = dataset.train_thicknesses / net.t_mem_ref
    y = net_forward(net, tau_d)
    rv = y[0] - target_v
    rm = y[1] - target_m
    data = amean(rv * rv) + amean(rm * rm)

    if config.lambda_v > 0.0 or config.lambda_tmem > 0.0:
        tau_c = np.linspace(0.0, cond.t_max, config.n_collocation) / net.input_scale
        y_v, y_m, dyv, dym = _forward_with_tau_derivatives(net, tau_c)
        r_v = voltage_residual_terms(
            y_v, y_m, dyv, dym, coeffs, net.v_ref, net.t_mem_ref, diag
        )
        r_m = thinning_residual_terms(
            y_v, y_m, dym, net.k5_hat, params, cond,
            net.v_ref, net.t_mem_ref, cond.t_max, diag,
        )
        physics_v = config.lambda_v * amean(r_v * r_v)
        physics_mem = config.lambda_tmem * amean(r_m * r_m)
    else:
        physics_v = 0.0
        physics_mem = 0.0

    y0 = net_forward(net, 0.0)
    ic_v = y0[0] - v0 / net.v_ref
    ic_m = y0[1] - 1.0
    ic = config.lambda_ic * (ic_v * ic_v + ic_m * ic_m)

    total = data + physics_v + physics_mem + ic
    components = {
        "data": float(primal(data)),
        "physics_v": float(primal(physics_v)),
        "physics_mem": float(primal(physics_mem)),
        "ic": float(primal(ic)),
        "total": float(primal(total)),
    }
    return total, components


# -- optimizer ----------------------------------------------------------------


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @staticmethod
    def zeros(n: int) -> "AdamState":
        return AdamState(m=np.zeros(n), v=np.zeros(n), step=0)


def adam_step(
    state: AdamState, params_vec: np.ndarray, grad: np.ndarray,
    config: TrainingConfig,
):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    if not np.all(np.isfinite(grad)):
        raise TrainingError("non-finite gradient passed to adam_step")
    b1, b2 = config.adam_beta1, config.adam_beta2
    step = state.step + 1
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1**step)
    v_hat = v / (1.0 - b2**step)
    new_params = params_vec - config.learning_rate * m_hat / (
        np.sqrt(v_hat) + config.adam_eps
    )
    return new_params, AdamState(m=m, v=v, step=step)


# -- training loop ------------------------------------------------------------


def train(
    dataset,
    params: PhysicsParameters,
    cond: OperatingConditions,
    config: TrainingConfig,
    net_init: NetworkParameters | None = None,
    checkpoint_hook=None,
):
    """Full-batch Adam on the composite loss; returns (network, metrics).

    ``checkpoint_hook(epoch, network)`` fires every ``config.checkpoint_every``
    epochs when both are set.
    """
    coeffs = voltage_coefficients(params, cond)
    v0 = solve_cell_voltage(coeffs, cond.t_mem0)
    template = net_init if net_init is not None else init_parameters(
        config.seed,
        input_scale=cond.t_max,
        t_mem_ref=cond.t_mem0,
        v_ref=config.v_ref,
    )
    vec = flatten(template)
    adam = AdamState.zeros(vec.size)
    diag = DiagnosticCounters()
    history: list[EpochRecord] = []

    for epoch in range(config.max_epochs):
        net = unflatten(vec, template)
        lifted = LiftedParameters(net)
        loss, comps = composite_loss(
            lifted, dataset, config, coeffs, params, cond, v0, diag
        )
        if not np.isfinite(comps["total"]):
            bad = max(comps, key=lambda k: 0 if np.isfinite(comps[k]) else 1)
            raise TrainingError(
                f"non-finite loss at epoch {epoch} (component '{bad}')"
            )
        loss.backward()
        grad = lifted.gradients()
        history.append(
            EpochRecord(
                epoch,
                comps["data"],
                comps["physics_v"],
                comps["physics_mem"],
                comps["ic"],
                comps["total"],
                float(net.k5_hat),
            )
        )
        vec, adam = adam_step(adam, vec, grad, config)
        if (
            checkpoint_hook is not None
            and config.checkpoint_every > 0
            and (epoch + 1) % config.checkpoint_every == 0
        ):
            checkpoint_hook(epoch + 1, unflatten(vec, template))

    final = unflatten(vec, template)
    metrics = evaluate(final, dataset)
    metrics.loss_history = history
    metrics.hydroxyl_clamped = diag.hydroxyl_clamped
    metrics.chemistry_infeasible = diag.chemistry_infeasible
    metrics.output_clamped = diag.output_clamped
    return final, metrics


def evaluate(net: NetworkParameters, dataset) -> Metrics:
    """RMSE in physical units; train split against its noisy targets, test
    split against the clean signal."""
    if len(dataset.train_times) == 0 or len(dataset.test_times) == 0:
        raise ConfigError("dataset", "cannot evaluate an empty split")
    train_v, train_m = predict(net, dataset.train_times)
    test_v, test_m = predict(net, dataset.test_times)

    def rmse(a, b):
        return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))

    return Metrics(
        rmse_train_v=rmse(train_v, dataset.train_voltages),
        rmse_test_v=rmse(test_v, dataset.test_voltages),
        rmse_train_mem=rmse(train_m, dataset.train_thicknesses),
        rmse_test_mem=rmse(test_m, dataset.test_thicknesses),
        k5_hat_final=float(net.k5_hat),
    )
