"""Exact spectral propagation of the single-excitation state and an RK4 oracle."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from lossprotect.model import SystemParams, environment_frequencies

TRAJECTORY_HEADER = ("t", "re_a1", "im_a1", "abs2_a1", "re_a2", "im_a2", "abs2_a2", "abs2_env_total")
RK4_NORM_DRIFT_LIMIT = 1e-4


class DimensionError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    pass


class StepSizeError(RuntimeError):
    """Raised when the RK4 oracle drifts off the unit sphere."""


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenfrequencies and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self) -> None:
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T

    def coefficients(self, psi0: np.ndarray) -> np.ndarray:
        psi0 = as_state(psi0, self.dim)
        return self.eigenvectors.T @ psi0


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n_times, dim)

    def __post_init__(self) -> None:
        if self.times.ndim != 1 or self.states.shape[0] != self.times.shape[0]:
            raise ValueError("times and states must have matching lengths")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def a1(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def a2(self) -> np.ndarray:
        return self.states[:, 1]

    def populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    def norms2(self) -> np.ndarray:
        return np.sum(self.populations(), axis=1)

    def write_csv(self, target: str | Path | IO[str]) -> None:
        rows = trajectory_rows(self)
        if isinstance(target, (str, Path)):
            with open(target, "w", newline="") as fh:
                _write_rows(fh, rows)
        else:
            _write_rows(target, rows)


def trajectory_rows(traj: Trajectory) -> list[list[str]]:
    pops = traj.populations()
    env = np.sum(pops[:, 2:], axis=1)
    rows = []
    for k, t in enumerate(traj.times):
        a1, a2 = traj.states[k, 0], traj.states[k, 1]
        values = (t, a1.real, a1.imag, pops[k, 0], a2.real, a2.imag, pops[k, 1], env[k])
        rows.append([f"{v:.17g}" for v in values])
    return rows


def _write_rows(fh: IO[str], rows: list[list[str]]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRAJECTORY_HEADER)
    writer.writerows(rows)


def as_state(psi: Sequence[complex] | np.ndarray, dim: int) -> np.ndarray:
    arr = np.asarray(psi, dtype=complex)
    if arr.shape != (dim,):
        raise DimensionError(f"state has shape {arr.shape}, expected ({dim},)")
    return arr


def norm2(psi: np.ndarray) -> float:
    return float(np.vdot(psi, psi).real)


def overlap(psi_a: np.ndarray, psi_b: np.ndarray) -> complex:
    """Inner product <A|B> = sum(conj(A_i) B_i)."""
    psi_a = np.asarray(psi_a, dtype=complex)
    psi_b = np.asarray(psi_b, dtype=complex)
    if psi_a.shape != psi_b.shape:
        raise DimensionError(f"overlap of shapes {psi_a.shape} and {psi_b.shape}")
    return complex(np.vdot(psi_a, psi_b))


def diagonalize(H: np.ndarray) -> SpectralDecomposition:
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {H.shape}")
    if not np.array_equal(H, H.T):
        raise ValueError("matrix is not symmetric")
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(H) if np.all(np.isfinite(H)) else math.inf
        raise EigenSolverError(f"eigensolver did not converge (dim={H.shape[0]}, cond={cond:.3e})") from exc
    return SpectralDecomposition(w, V)


def propagate(decomp: SpectralDecomposition, psi0: np.ndarray, t: float) -> np.ndarray:
    """psi(t) = V exp(-i w t) V^T psi(0). Negative t evolves backward."""
    c = decomp.coefficients(psi0)
    return decomp.eigenvectors @ (np.exp(-1j * decomp.eigenvalues * t) * c)


def propagate_series(
    decomp: SpectralDecomposition,
    psi0: np.ndarray,
    times: Sequence[float] | np.ndarray,
    chunk: int = 2048,
) -> Trajectory:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-d sequence")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    c = decomp.coefficients(psi0)
    VT = decomp.eigenvectors.T
    states = np.empty((times.size, decomp.dim), dtype=complex)
    for start in range(0, times.size, chunk):
        tt = times[start : start + chunk]
        phases = np.exp(-1j * np.outer(tt, decomp.eigenvalues))
        states[start : start + chunk] = (phases * c) @ VT
    return Trajectory(times.copy(), states)


def rk4_integrate(
    params: SystemParams,
    psi0: np.ndarray,
    t_end: float,
    dt: float,
    rotating_frame: bool = True,
    sample_every: int = 1,
) -> Trajectory:
    """Fixed-step classical RK4 on the amplitude equations.

    The right-hand side is written out per amplitude instead of going
    through the Hamiltonian matrix, so it checks ``build_hamiltonian`` too.
    Samples are kept every ``sample_every`` steps plus the final time.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    y = as_state(psi0, params.dim).copy()

    shift = params.omega0 if rotating_frame else 0.0
    w_res = params.omega0 - shift
    w_env = environment_frequencies(params) - shift
    Om, g = params.Omega, params.g
    free = -1j * np.concatenate(([w_res, w_res], w_env))

    def rhs(y: np.ndarray) -> np.ndarray:
        # da1 = -i w0 a1 - i W a2
        # da2 = -i w0 a2 - i W a1 - i g sum(b)
        # db_j = -i w_j b_j - i g a2
        out = free * y
        a2 = y[1]
        out[0] -= 1j * Om * a2
        out[1] -= 1j * (Om * y[0] + g * y[2:].sum())
        out[2:] -= 1j * g * a2
        return out

    n_full = int(math.floor(t_end / dt + 1e-9))
    remainder = t_end - n_full * dt
    if remainder <= 1e-12 * max(1.0, t_end):
        remainder = 0.0
    n0 = norm2(y)

    times = [0.0]
    states = [y.copy()]

    def step(y: np.ndarray, h: float) -> np.ndarray:
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def check(t: float) -> None:
        drift = abs(norm2(y) - n0)
        if not drift <= RK4_NORM_DRIFT_LIMIT:
            raise StepSizeError(
                f"norm drift {drift:.3e} at t={t:.6g} exceeds {RK4_NORM_DRIFT_LIMIT:g}; reduce dt (dt={dt:g})"
            )

    for k in range(1, n_full + 1):
        y = step(y, dt)
        if k % sample_every == 0 or (k == n_full and remainder == 0.0):
            t = k * dt
            check(t)
            times.append(t)
            states.append(y.copy())
    if remainder > 0.0:
        y = step(y, remainder)
        check(t_end)
        times.append(t_end)
        states.append(y.copy())
    return Trajectory(np.asarray(times), np.asarray(states))
