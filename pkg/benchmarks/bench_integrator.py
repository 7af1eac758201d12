#!/usr/bin/env python3
"""Benchmark the integration kernels: numba @njit vs plain python.

The trajectory integrator is the package's hot sequential loop (four
implicit voltage solves plus a chemistry solve per RK4 step). This script
times both build variants directly, regardless of the PEMPINN_DISABLE_NUMBA
selection, and checks that they agree.

Run: python benchmarks/bench_integrator.py
"""

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from pempinn import _kernel
from pempinn.constants import default_conditions, default_parameters
from pempinn.electrochem import voltage_coefficients
from pempinn.constants import membrane_molar_concentration


def kernel_args(n_steps):
    params = default_parameters()
    cond = default_conditions()
    coeffs = voltage_coefficients(params, cond)
    c_mem = membrane_molar_concentration(params)
    kc = params.k4 * params.c_O2 + params.k5_true * c_mem
    frr_coeff = (
        params.fluoride_stoich * params.k5_true * c_mem * params.MM_F * 3600.0
    )
    tr_conv = 1.0e-6 / (params.rho_naf_cgs * params.fluorine_mass_fraction)
    return (
        n_steps,
        cond.t_max / n_steps,
        cond.t_mem0,
        coeffs.k1V,
        coeffs.k2V,
        coeffs.k3V,
        coeffs.P_over_A,
        params.kappa_w,
        params.e_cl,
        params.k2,
        params.k3,
        kc,
        params.v1,
        frr_coeff,
        tr_conv,
        -1.0,
        _kernel.V_TOL_DEFAULT,
    )


def time_kernel(kernel, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = kernel(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    if not _kernel.HAVE_NUMBA:
        print("numba not importable; only the python kernel is available")

    print(f"{'n_steps':>8s} {'python':>12s} {'numba':>12s} {'speedup':>9s}")
    for n_steps in (256, 1024, 4096, 16384):
        args = kernel_args(n_steps)
        t_py, out_py = time_kernel(_kernel.rk4_thinning_py, args, repeats=3)
        if _kernel.HAVE_NUMBA:
            _kernel.rk4_thinning_jit(*kernel_args(16))  # compile outside timing
            t_jit, out_jit = time_kernel(_kernel.rk4_thinning_jit, args, repeats=3)
            drift = np.max(
                np.abs(out_py[6] - out_jit[6])
            )  # thickness channel agreement
            print(
                f"{n_steps:8d} {t_py * 1e3:10.2f}ms {t_jit * 1e3:10.2f}ms "
                f"{t_py / t_jit:8.1f}x   (max |dt_mem| {drift:.3e} cm)"
            )
        else:
            print(f"{n_steps:8d} {t_py * 1e3:10.2f}ms {'-':>12s} {'-':>9s}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
