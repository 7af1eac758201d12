"""Radical chemistry steady state and membrane attack rates.

The chain evaluated at a cell voltage V: water velocity -> peroxide
quadratic -> hydroxyl concentration -> fluoride release -> thinning rate.

Functions here are written against the generic arithmetic front-ends in
:mod:`pempinn.autodiff`, so the same code runs on plain floats (simulation,
tests), numpy arrays (batched collocation points), and autodiff nodes (the
physics residual of the training loss, which must differentiate through the
closed-form quadratic root).

Unit notes: concentrations mol/m3, rates mol/(m3 s), thickness cm, fluoride
release ug/(h cm2), thinning rate cm/h. The composed conversion factor in
the thinning chain is 3600 * 1e-6 * 1e6 * 1e-6 = 3.6e-3 (seconds per hour,
m3 per cm3, ug per g, g per ug).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import primal, sqrt, where
from .constants import (
    OperatingConditions,
    PhysicsParameters,
    membrane_molar_concentration,
)
from .errors import ChemistryError, ConfigError

__all__ = [
    "RadicalState",
    "DiagnosticCounters",
    "water_velocity",
    "peroxide_quadratic_coefficients",
    "solve_peroxide",
    "solve_peroxide_selected",
    "hydroxyl_concentration",
    "hydroxyl_chain",
    "steady_state_radicals",
    "fluoride_release_rate",
    "thinning_rate",
]


class DiagnosticCounters:
    """Counts clamp and infeasibility events so regime changes are visible."""

    def __init__(self):
        self.hydroxyl_clamped = 0
        self.chemistry_infeasible = 0
        self.output_clamped = 0

    def count(self, name, n):
        setattr(self, name, getattr(self, name) + int(n))


@dataclass(frozen=True)
class RadicalState:
    """Steady-state radical concentrations at one operating point."""

    c_h2o2: float       # mol/m3
    c_ho: float         # mol/m3
    v_h2o: float        # m/s
    coefficients: tuple  # (A, B, C) of the peroxide quadratic

    def residuals(self):
        """Back-substitution residuals of both algebraic equations.

        Returned relative to the magnitude of the participating terms, so a
        well-conditioned solution reports values near machine epsilon.
        """
        a, b, c = self.coefficients
        quad = a * self.c_h2o2**2 + b * self.c_h2o2 + c
        quad_scale = abs(a * self.c_h2o2**2) + abs(b * self.c_h2o2) + abs(c)
        return abs(quad) / quad_scale if quad_scale > 0 else abs(quad)


def water_velocity(
    params: PhysicsParameters, cond: OperatingConditions, v
):
    """Closure for the water velocity, m/s, proportional to current density.

    v_H2O = kappa_w * i with i = P/(A*V); strictly decreasing in V.
    """
    if np.ndim(primal(v)) == 0 and primal(v) <= 0.0:
        raise ConfigError("V", "cell voltage must be positive")
    i = cond.P / (cond.A_cell * v)
    return params.kappa_w * i


def peroxide_quadratic_coefficients(
    params: PhysicsParameters, cond: OperatingConditions, v, k5=None
):
    """Coefficients (A, B, C) of A*c^2 + B*c + C = 0 for c = c_H2O2.

    With w = v_H2O/e_cl and s = k4*c_O2 + k5*C_mem - w:
        A = -3*k2 + w
        B = s*(w - k2)/k3 - v1
        C = -s*v1/k3
    """
    if k5 is None:
        k5 = params.k5_true
    w = water_velocity(params, cond, v) / params.e_cl
    c_mem = membrane_molar_concentration(params)
    s = params.k4 * params.c_O2 + k5 * c_mem - w
    a = w - 3.0 * params.k2
    b = s * (w - params.k2) / params.k3 - params.v1
    c = -s * params.v1 / params.k3
    return a, b, c


def solve_peroxide_selected(a, b, c):
    """Smallest strictly positive root of the quadratic, with feasibility mask.

    Uses the sign-aware stable formula (q = -(B + sign(B)*sqrt(disc))/2,
    roots q/A and C/q) so the small root survives catastrophic cancellation.
    Falls back to the linear root when A == 0. Returns (root, feasible);
    where infeasible, the root entry holds a placeholder 1.0 so downstream
    safe divisions stay finite.
    """
    pa = np.asarray(primal(a))
    pb = np.asarray(primal(b))

    lin_mask = pa == 0.0
    b_safe = where(pb != 0.0, b, 1.0)
    lin_root = -c / b_safe
    lin_feas = lin_mask & (pb != 0.0) & (np.asarray(primal(lin_root)) > 0.0)

    disc = b * b - 4.0 * a * c
    disc_ok = np.asarray(primal(disc)) >= 0.0
    sq = sqrt(where(disc_ok, disc, 0.0))
    q = where(pb >= 0.0, -(b + sq), -(b - sq)) * 0.5
    pq = np.asarray(primal(q))
    a_safe = where(lin_mask, 1.0, a)
    q_safe = where(pq != 0.0, q, 1.0)
    r1 = q / a_safe
    r2 = where(pq != 0.0, c / q_safe, r1)
    p1 = np.asarray(primal(r1))
    p2 = np.asarray(primal(r2))
    pos1 = disc_ok & (p1 > 0.0) & ~lin_mask
    pos2 = disc_ok & (p2 > 0.0) & ~lin_mask
    pick1 = pos1 & (~pos2 | (p1 <= p2))
    quad_root = where(pick1, r1, where(pos2, r2, 1.0))
    quad_feas = pos1 | pos2

    root = where(lin_mask, where(lin_feas, lin_root, 1.0), quad_root)
    feasible = np.asarray(lin_feas | quad_feas)
    return root, feasible


def solve_peroxide(a: float, b: float, c: float) -> float:
    """Scalar peroxide concentration; raises when no positive root exists."""
    if a == 0.0 and b == 0.0:
        raise ChemistryError((a, b, c), "degenerate equation (A = B = 0)")
    root, feasible = solve_peroxide_selected(a, b, c)
    if not bool(feasible):
        raise ChemistryError((a, b, c), "no strictly positive real root")
    return float(primal(root))


def hydroxyl_concentration(
    params: PhysicsParameters,
    cond: OperatingConditions,
    v,
    c_h2o2,
    diag: DiagnosticCounters | None = None,
):
    """Hydroxyl radical concentration, clamped at zero.

    c_HO = v_H2O/(e_cl*k3) - k2/k3 - v1/(k3*c_H2O2); negative formula values
    are unphysical and clamp to zero (counted in ``diag`` when provided).
    """
    pc = primal(c_h2o2)
    if np.ndim(pc) == 0 and pc <= 0.0:
        raise ConfigError("c_h2o2", "peroxide concentration must be positive")
    w = water_velocity(params, cond, v) / params.e_cl
    raw = w / params.k3 - params.k2 / params.k3 - params.v1 / (params.k3 * c_h2o2)
    positive = np.asarray(primal(raw)) > 0.0
    if diag is not None:
        diag.count("hydroxyl_clamped", np.sum(~positive))
    return where(positive, raw, 0.0)


def hydroxyl_chain(
    params: PhysicsParameters,
    cond: OperatingConditions,
    v,
    k5=None,
    diag: DiagnosticCounters | None = None,
):
    """Full chain V -> c_HO, with infeasible chemistry clamped to zero.

    This is the differentiable path used inside the physics residual; it
    never raises on infeasible points, it masks them (and records them).
    """
    a, b, c = peroxide_quadratic_coefficients(params, cond, v, k5=k5)
    root, feasible = solve_peroxide_selected(a, b, c)
    if diag is not None:
        diag.count("chemistry_infeasible", np.sum(~feasible))
    w = water_velocity(params, cond, v) / params.e_cl
    raw = w / params.k3 - params.k2 / params.k3 - params.v1 / (params.k3 * root)
    raw_positive = np.asarray(primal(raw)) > 0.0
    positive = feasible & raw_positive
    if diag is not None:
        diag.count("hydroxyl_clamped", np.sum(feasible & ~raw_positive))
    return where(positive, raw, 0.0)


def steady_state_radicals(
    params: PhysicsParameters,
    cond: OperatingConditions,
    v: float,
    k5=None,
    diag: DiagnosticCounters | None = None,
) -> RadicalState:
    """Scalar steady state at voltage v; raises if chemistry is infeasible."""
    a, b, c = peroxide_quadratic_coefficients(params, cond, v, k5=k5)
    c_h2o2 = solve_peroxide(a, b, c)
    c_ho = hydroxyl_concentration(params, cond, v, c_h2o2, diag=diag)
    return RadicalState(
        c_h2o2=c_h2o2,
        c_ho=float(primal(c_ho)),
        v_h2o=float(primal(water_velocity(params, cond, v))),
        coefficients=(a, b, c),
    )


def fluoride_release_rate(params: PhysicsParameters, c_ho, t_mem, k5=None):
    """Fluoride release rate, ug/(h cm2).

    FRR = 3.6 * k5 * c_HO * C_mem * MM_F * t_mem * 3600 * 1e-6 * 1e6
    (t_mem in cm; the stoichiometric 3.6 converts radical attack events to
    fluoride release).
    """
    if k5 is None:
        k5 = params.k5_true
    c_mem = membrane_molar_concentration(params)
    return (
        params.fluoride_stoich
        * k5
        * c_ho
        * c_mem
        * params.MM_F
        * t_mem
        * 3600.0
        * 1.0e-6
        * 1.0e6
    )


def thinning_rate(params: PhysicsParameters, c_ho, t_mem, k5=None):
    """Thinning rate, cm/h: TR = FRR / (rho_Naf * 0.82) * 1e-6.

    Composed from the fluoride release rate so the definitional identity
    between the two holds exactly. dt_mem/dt = -TR.
    """
    frr = fluoride_release_rate(params, c_ho, t_mem, k5=k5)
    return frr * (1.0e-6 / (params.rho_naf_cgs * params.fluorine_mass_fraction))
