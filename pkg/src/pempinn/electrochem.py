"""Cell voltage model.

Decomposition V = V_oc + V_act + V_ohm with a Nernst open-circuit term,
Butler-Volmer activation kinetics at both electrodes, and an ohmic loss
through the membrane whose conductivity degrades as the membrane thins.
Under constant electrical power the current density is i = P/(A*V), which
turns the decomposition into an implicit scalar equation

    V = k1V + k2V*ln(P/(A*V)) + k3V*(1/t_mem)*(P/(A*V))

solved here with a safeguarded Newton iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import _kernel
from .constants import OperatingConditions, PhysicsParameters
from .errors import ConfigError, SolverError

__all__ = [
    "VoltageCoefficients",
    "open_circuit_voltage",
    "activation_overpotential",
    "ohmic_overpotential",
    "membrane_conductivity",
    "degraded_conductivity",
    "voltage_coefficients",
    "solve_cell_voltage",
]

# Conductivity formula zero crossing: lambda must exceed 0.00326/0.005139.
_LAMBDA_MIN = 0.00326 / 0.005139

DEFAULT_V_GUESS = 1.8


@dataclass(frozen=True)
class VoltageCoefficients:
    """Constants of the reduced implicit voltage equation.

    k1V collects the open-circuit and exchange-current terms (V), k2V scales
    the ln(i) kinetic term (V), and k3V = (t_mem0)^2 / sigma scales the
    degradation-aware ohmic term so that k3V*i/t_mem is in volts.
    """

    k1V: float
    k2V: float
    k3V: float
    P_over_A: float


def open_circuit_voltage(params: PhysicsParameters, cond: OperatingConditions) -> float:
    """Nernst open-circuit voltage, V_oc = E0 + (RT/2F) ln(p_H2 sqrt(p_O2) / p_H2O)."""
    for key in ("p_H2", "p_O2", "p_H2O"):
        if getattr(cond, key) <= 0.0:
            raise ConfigError(key, "partial pressure must be positive")
    ratio = cond.p_H2 * math.sqrt(cond.p_O2) / cond.p_H2O
    return params.E0 + params.R * cond.T / (2.0 * params.F) * math.log(ratio)


def activation_overpotential(
    params: PhysicsParameters, cond: OperatingConditions, i: float
) -> float:
    """Butler-Volmer kinetic losses of both electrodes (logarithmic form).

    Negative values are legitimate for i below the exchange current
    densities; only i <= 0 is rejected.
    """
    if i <= 0.0:
        raise ConfigError("i", "current density must be positive")
    rt_f = params.R * cond.T / params.F
    return rt_f / params.alpha_an * math.log(i / params.i0_an) + (
        rt_f / params.alpha_cat * math.log(i / params.i0_cat)
    )


def membrane_conductivity(lambda_hydration: float, T: float) -> float:
    """Empirical membrane conductivity, S/cm.

    sigma = (0.005139*lambda - 0.00326) * exp(1268*(1/303 - 1/T))
    """
    if lambda_hydration <= _LAMBDA_MIN:
        raise ConfigError(
            "lambda_hydration",
            f"hydration {lambda_hydration} gives non-positive conductivity "
            f"(must exceed {_LAMBDA_MIN:.6f})",
        )
    return (0.005139 * lambda_hydration - 0.00326) * math.exp(
        1268.0 * (1.0 / 303.0 - 1.0 / T)
    )


def degraded_conductivity(sigma: float, t_mem: float, t_mem0: float) -> float:
    """Conductivity after thinning: sigma' = (t_mem/t_mem0)^2 * sigma."""
    if t_mem <= 0.0:
        raise ConfigError("t_mem", "membrane thickness must be positive")
    ratio = t_mem / t_mem0
    return ratio * ratio * sigma


def ohmic_overpotential(sigma_degraded: float, t_mem: float, i: float) -> float:
    """Resistive loss V_ohm = (t_mem / sigma') * i."""
    return t_mem / sigma_degraded * i


def voltage_coefficients(
    params: PhysicsParameters, cond: OperatingConditions
) -> VoltageCoefficients:
    """Fold the decomposition into the reduced equation's constants.

    Uses the general two-coefficient form of the kinetic terms; with
    alpha_an = alpha_cat = alpha it reduces to k2V = 2RT/(alpha F) and the
    usual ln(1/(i0_an*i0_cat)) contribution to k1V.
    """
    rt_f = params.R * cond.T / params.F
    nernst = open_circuit_voltage(params, cond)
    exchange = rt_f / params.alpha_an * math.log(1.0 / params.i0_an) + (
        rt_f / params.alpha_cat * math.log(1.0 / params.i0_cat)
    )
    k2v = rt_f * (1.0 / params.alpha_an + 1.0 / params.alpha_cat)
    sigma = membrane_conductivity(params.lambda_hydration, cond.T)
    k3v = cond.t_mem0 * cond.t_mem0 / sigma
    return VoltageCoefficients(
        k1V=nernst + exchange,
        k2V=k2v,
        k3V=k3v,
        P_over_A=cond.P / cond.A_cell,
    )


def solve_cell_voltage(
    coeffs: VoltageCoefficients,
    t_mem: float,
    v_guess: float = DEFAULT_V_GUESS,
    tol: float = _kernel.V_TOL_DEFAULT,
) -> float:
    """Solve the implicit reduced voltage equation for a given thickness.

    Deterministic for identical inputs; the returned V satisfies
    |V - RHS(V)| <= tol (default well below the 1e-10 V contract).
    """
    if t_mem <= 0.0:
        raise ConfigError("t_mem", "membrane thickness must be positive")
    if coeffs.k2V == 0.0 and coeffs.k3V == 0.0:
        return coeffs.k1V
    solve, _, _ = _kernel.get_kernels()
    v, iters, status = solve(
        coeffs.k1V,
        coeffs.k2V,
        coeffs.k3V,
        coeffs.P_over_A,
        t_mem,
        v_guess,
        tol,
        _kernel.V_MAX_ITER,
    )
    if status == 1:
        raise SolverError(
            "voltage equation has no sign change on "
            f"[{_kernel.V_BRACKET_LO}, {_kernel.V_BRACKET_HI}] V "
            f"(k1V={coeffs.k1V}, k2V={coeffs.k2V}, k3V={coeffs.k3V}, "
            f"P/A={coeffs.P_over_A}, t_mem={t_mem})"
        )
    if status == 2:
        i = coeffs.P_over_A / v
        residual = v - coeffs.k1V - coeffs.k2V * math.log(i) - coeffs.k3V * i / t_mem
        raise SolverError(
            f"voltage solve did not converge in {iters} iterations "
            f"(last V={v}, residual={residual})"
        )
    return v
