"""Ground-truth trajectory integration and noisy dataset generation.

The thinning ODE is integrated with fixed-step classical RK4 while the cell
voltage is re-solved algebraically at every stage (the algebraic form is
exact, so ground truth does not drift the way an integrated voltage ODE
would). Datasets follow the synthetic-measurement protocol: equally spaced
noisy samples restricted to an early fraction of the horizon for training,
dense noise-free samples over the full horizon for testing, with per-channel
Gaussian noise whose standard deviation equals the population standard
deviation of the clean full-horizon signal.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import _kernel, electrochem
from .constants import (
    OperatingConditions,
    PhysicsParameters,
    membrane_molar_concentration,
)
from .errors import ConfigError, DatasetFormatError, SimulationError, SolverError

__all__ = [
    "SimulationSettings",
    "Trajectory",
    "Dataset",
    "integrate_trajectory",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
]

DATASET_COLUMNS = ("split", "t_hours", "voltage_V", "thickness_cm", "is_noisy")


@dataclass(frozen=True)
class SimulationSettings:
    """Knobs of the data-generation pipeline."""

    n_steps: int = 4096
    n_train: int = 100
    n_test: int = 1000
    train_fraction: float = 1.0 / 3.0
    dataset_seed: int = 11

    def __post_init__(self):
        if self.n_steps < 10:
            raise ConfigError("n_steps", "need at least 10 integration steps")
        if self.n_train < 2:
            raise ConfigError("n_train", "need at least 2 training points")
        if self.n_test < 2:
            raise ConfigError("n_test", "need at least 2 test points")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigError("train_fraction", "must lie in (0, 1]")
        if self.dataset_seed < 0:
            raise ConfigError("dataset_seed", "seed must be non-negative")


@dataclass(frozen=True)
class Trajectory:
    """Clean simulated time series with per-step diagnostics."""

    times: np.ndarray        # h
    voltages: np.ndarray     # V
    thicknesses: np.ndarray  # cm
    c_ho: np.ndarray         # mol/m3
    c_h2o2: np.ndarray       # mol/m3
    thinning: np.ndarray     # cm/h
    fluoride: np.ndarray     # ug/(h cm2)
    solver_iterations: np.ndarray
    hydroxyl_clamped: int
    chemistry_infeasible: int


@dataclass(frozen=True)
class Dataset:
    """Noisy training samples plus clean test samples of one trajectory."""

    train_times: np.ndarray
    train_voltages: np.ndarray      # noisy, V
    train_thicknesses: np.ndarray   # noisy, cm
    test_times: np.ndarray
    test_voltages: np.ndarray       # clean, V
    test_thicknesses: np.ndarray    # clean, cm
    noise_sigma_v: float
    noise_sigma_mem: float
    seed: int
    train_fraction: float


def integrate_trajectory(
    params: PhysicsParameters,
    cond: OperatingConditions,
    k5: float | None = None,
    n_steps: int = 4096,
    c_ho_override: float | None = None,
) -> Trajectory:
    """Integrate the coupled system over [0, t_max] with n_steps RK4 steps.

    ``c_ho_override`` freezes the hydroxyl concentration at a fixed value
    (diagnostic mode; the thinning ODE then has an exact exponential
    solution, which the validation suite exploits).
    """
    if n_steps < 10:
        raise ConfigError("n_steps", "need at least 10 integration steps")
    if k5 is None:
        k5 = params.k5_true
    if k5 < 0.0:
        raise ConfigError("k5", "rate constant must be non-negative")

    coeffs = electrochem.voltage_coefficients(params, cond)
    c_mem = membrane_molar_concentration(params)
    kc = params.k4 * params.c_O2 + k5 * c_mem
    frr_coeff = (
        params.fluoride_stoich * k5 * c_mem * params.MM_F * 3600.0 * 1.0e-6 * 1.0e6
    )
    tr_conv = 1.0e-6 / (params.rho_naf_cgs * params.fluorine_mass_fraction)
    dt = cond.t_max / n_steps

    _, _, rk4 = _kernel.get_kernels()
    (
        status,
        fail_step,
        clamped,
        infeasible,
        times,
        volts,
        tmems,
        c_h2o2s,
        c_hos,
        trs,
        frrs,
        iters,
    ) = rk4(
        n_steps,
        dt,
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
        -1.0 if c_ho_override is None else float(c_ho_override),
        _kernel.V_TOL_DEFAULT,
    )

    if status in (1, 2):
        raise SolverError(
            f"voltage solve failed (status {status}) at t = {fail_step * dt} h"
        )
    if status == 3:
        raise SimulationError(
            f"membrane thickness reached zero near t = {fail_step * dt} h; "
            "shorten t_max or reduce the degradation rate"
        )

    traj = Trajectory(
        times=times,
        voltages=volts,
        thicknesses=tmems,
        c_ho=c_hos,
        c_h2o2=c_h2o2s,
        thinning=trs,
        fluoride=frrs,
        solver_iterations=iters,
        hydroxyl_clamped=int(clamped),
        chemistry_infeasible=int(infeasible),
    )
    _check_trajectory(traj, k5)
    return traj


def _check_trajectory(traj: Trajectory, k5: float) -> None:
    if not np.all(np.diff(traj.times) > 0.0):
        raise SimulationError("trajectory times are not strictly increasing")
    if np.any(traj.thicknesses <= 0.0):
        raise SimulationError("trajectory contains non-positive thickness")
    # Constant-power operation with conductivity degradation makes the
    # voltage rise and the membrane shrink whenever degradation is active.
    if k5 > 0.0 and np.all(traj.c_ho > 0.0):
        if not np.all(np.diff(traj.thicknesses) < 0.0):
            raise SimulationError("thickness is not strictly decreasing")
        if not np.all(np.diff(traj.voltages) > 0.0):
            raise SimulationError("voltage is not strictly increasing")


def _interp(traj: Trajectory, t: np.ndarray):
    v = np.interp(t, traj.times, traj.voltages)
    m = np.interp(t, traj.times, traj.thicknesses)
    return v, m


def generate_dataset(
    traj: Trajectory,
    n_train: int,
    n_test: int,
    train_fraction: float,
    seed: int,
) -> Dataset:
    """Sample a noisy train split and a clean test split from a trajectory.

    Training points are equally spaced on [0, train_fraction*t_max], test
    points on the full horizon. Noise standard deviations are the population
    standard deviations of the clean test-split signals, per channel.
    Deterministic for a given seed.
    """
    if n_train < 2:
        raise ConfigError("n_train", "need at least 2 training points")
    if n_test < 2:
        raise ConfigError("n_test", "need at least 2 test points")
    if not 0.0 < train_fraction <= 1.0:
        raise ConfigError("train_fraction", "must lie in (0, 1]")

    t_end = traj.times[-1]
    train_t = np.linspace(0.0, train_fraction * t_end, n_train)
    test_t = np.linspace(0.0, t_end, n_test)

    test_v, test_m = _interp(traj, test_t)
    clean_train_v, clean_train_m = _interp(traj, train_t)

    sigma_v = float(np.std(test_v))
    sigma_m = float(np.std(test_m))

    rng = np.random.default_rng(seed)
    noisy_v = clean_train_v + rng.normal(0.0, sigma_v, n_train)
    noisy_m = clean_train_m + rng.normal(0.0, sigma_m, n_train)

    return Dataset(
        train_times=train_t,
        train_voltages=noisy_v,
        train_thicknesses=noisy_m,
        test_times=test_t,
        test_voltages=test_v,
        test_thicknesses=test_m,
        noise_sigma_v=sigma_v,
        noise_sigma_mem=sigma_m,
        seed=int(seed),
        train_fraction=float(train_fraction),
    )


# -- persistence ---------------------------------------------------------


def _format(x: float) -> str:
    return repr(float(x))


def dataset_csv_bytes(ds: Dataset) -> bytes:
    lines = [",".join(DATASET_COLUMNS)]
    for t, v, m in zip(ds.train_times, ds.train_voltages, ds.train_thicknesses):
        lines.append(f"train,{_format(t)},{_format(v)},{_format(m)},1")
    for t, v, m in zip(ds.test_times, ds.test_voltages, ds.test_thicknesses):
        lines.append(f"test,{_format(t)},{_format(v)},{_format(m)},0")
    return ("\n".join(lines) + "\n").encode()


def save_dataset(ds: Dataset, path, config_hash: str = "") -> str:
    """Write the dataset CSV plus a metadata sidecar; returns the checksum."""
    payload = dataset_csv_bytes(ds)
    checksum = hashlib.sha256(payload).hexdigest()
    with open(path, "wb") as fh:
        fh.write(payload)
    meta = {
        "noise_sigma_v": ds.noise_sigma_v,
        "noise_sigma_mem": ds.noise_sigma_mem,
        "seed": ds.seed,
        "train_fraction": ds.train_fraction,
        "config_hash": config_hash,
        "sha256": checksum,
    }
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return checksum


def load_dataset(path) -> Dataset:
    """Read a dataset CSV and its sidecar back into a Dataset."""
    rows = {"train": [], "test": []}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in DATASET_COLUMNS:
            if col not in header:
                raise DatasetFormatError(f"{path}: missing column '{col}'")
        for lineno, row in enumerate(reader, start=2):
            try:
                split = row["split"]
                record = (
                    float(row["t_hours"]),
                    float(row["voltage_V"]),
                    float(row["thickness_cm"]),
                )
            except (TypeError, ValueError) as exc:
                raise DatasetFormatError(f"{path}:{lineno}: bad row ({exc})") from exc
            if split not in rows:
                raise DatasetFormatError(
                    f"{path}:{lineno}: unknown split '{split}'"
                )
            rows[split].append(record)
    if not rows["train"] or not rows["test"]:
        raise DatasetFormatError(f"{path}: needs both train and test rows")

    try:
        with open(str(path) + ".meta.json") as fh:
            meta = json.load(fh)
    except FileNotFoundError as exc:
        raise DatasetFormatError(f"{path}: missing sidecar {path}.meta.json") from exc

    train = np.array(rows["train"])
    test = np.array(rows["test"])
    return Dataset(
        train_times=train[:, 0],
        train_voltages=train[:, 1],
        train_thicknesses=train[:, 2],
        test_times=test[:, 0],
        test_voltages=test[:, 1],
        test_thicknesses=test[:, 2],
        noise_sigma_v=float(meta["noise_sigma_v"]),
        noise_sigma_mem=float(meta["noise_sigma_mem"]),
        seed=int(meta["seed"]),
        train_fraction=float(meta["train_fraction"]),
    )


def save_trajectory(traj: Trajectory, path, diagnostics_path=None) -> None:
    """Write the trajectory CSV (and optionally a diagnostics CSV)."""
    with open(path, "w") as fh:
        fh.write("t_hours,voltage_V,thickness_cm\n")
        for t, v, m in zip(traj.times, traj.voltages, traj.thicknesses):
            fh.write(f"{_format(t)},{_format(v)},{_format(m)}\n")
    if diagnostics_path is not None:
        with open(diagnostics_path, "w") as fh:
            fh.write(
                "t_hours,c_ho_mol_m3,c_h2o2_mol_m3,thinning_cm_h,"
                "fluoride_ug_h_cm2,solver_iterations\n"
            )
            for t, ho, h2o2, tr, fr, it in zip(
                traj.times,
                traj.c_ho,
                traj.c_h2o2,
                traj.thinning,
                traj.fluoride,
                traj.solver_iterations,
            ):
                fh.write(
                    f"{_format(t)},{_format(ho)},{_format(h2o2)},"
                    f"{_format(tr)},{_format(fr)},{int(it)}\n"
                )
