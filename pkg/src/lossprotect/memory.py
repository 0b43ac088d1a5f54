"""Memory of the initial state: late-time average of the return probability.

    M = (1/T) * integral_{tau}^{tau+T} |<psi(0)|psi(t)>|^2 dt

evaluated with the midpoint rule on a uniform grid, the integrand coming
from exact spectral propagation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from lossprotect.dynamics import (
    SpectralDecomposition,
    as_state,
    diagonalize,
    norm2,
    overlap,
    propagate_series,
)
from lossprotect.model import SystemParams, build_hamiltonian, revival_time

DEFAULT_TAU_REVIVALS = 5.0
DEFAULT_WINDOW_REVIVALS = 20.0
DEFAULT_SAMPLES = 4096
MIN_SAMPLES = 64
NORM_TOL = 1e-6


@dataclass(frozen=True)
class MemorySettings:
    """Window in units of the revival time, plus the sample count."""

    tau_revivals: float = DEFAULT_TAU_REVIVALS
    window_revivals: float = DEFAULT_WINDOW_REVIVALS
    n_samples: int = DEFAULT_SAMPLES
    rotating_frame: bool = True

    def window(self, params: SystemParams) -> tuple[float, float]:
        t_r = revival_time(params)
        return self.tau_revivals * t_r, self.window_revivals * t_r

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MemoryEstimate:
    M: float
    tau: float
    T: float
    n_samples: int
    convergence_delta: float

    def to_dict(self) -> dict:
        return asdict(self)


def midpoint_times(tau: float, T: float, n: int) -> np.ndarray:
    return tau + T * (np.arange(n) + 0.5) / n


def return_probability(decomp: SpectralDecomposition, psi0: np.ndarray, times: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """|<psi0|psi(t)>|^2 on ``times``.

    With real orthonormal eigenvectors, <psi0|psi(t)> = sum_k |c_k|^2 exp(-i w_k t)
    where c = V^T psi0, so only the spectral weights are needed.
    """
    weights = np.abs(decomp.coefficients(psi0)) ** 2
    times = np.asarray(times, dtype=float)
    out = np.empty(times.shape[0])
    for start in range(0, times.shape[0], chunk):
        tt = times[start : start + chunk]
        amp = np.exp(-1j * np.outer(tt, decomp.eigenvalues)) @ weights
        out[start : start + chunk] = amp.real**2 + amp.imag**2
    return out


def return_probability_direct(decomp: SpectralDecomposition, psi0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Same quantity through full state propagation; slower, used as a cross-check."""
    traj = propagate_series(decomp, psi0, times)
    return np.array([abs(overlap(psi0, s)) ** 2 for s in traj.states])


def memory(
    params: SystemParams,
    psi0,
    tau: float | None = None,
    T: float | None = None,
    n_samples: int = DEFAULT_SAMPLES,
    rotating_frame: bool = True,
    decomp: SpectralDecomposition | None = None,
) -> MemoryEstimate:
    """Memory M of ``psi0``; window defaults to tau = 5 T_R, T = 20 T_R.

    ``convergence_delta`` is |M(n) - M(n/2)| with the halved midpoint grid.
    """
    psi0 = as_state(psi0, params.dim)
    n = norm2(psi0)
    if abs(n - 1.0) > NORM_TOL:
        raise ValueError(f"initial state must be normalized (norm^2 = {n:.9g})")
    t_r = revival_time(params)
    tau = DEFAULT_TAU_REVIVALS * t_r if tau is None else float(tau)
    T = DEFAULT_WINDOW_REVIVALS * t_r if T is None else float(T)
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if T <= 0:
        raise ValueError("T must be > 0")
    if int(n_samples) != n_samples or n_samples < MIN_SAMPLES:
        raise ValueError(f"n_samples must be an integer >= {MIN_SAMPLES}")
    n_samples = int(n_samples)
    if tau < 5 * t_r or T < 5 * t_r:
        warnings.warn(
            f"memory window (tau={tau:.4g}, T={T:.4g}) is short compared to the revival time {t_r:.4g}",
            RuntimeWarning,
            stacklevel=2,
        )
    if decomp is None:
        decomp = diagonalize(build_hamiltonian(params, rotating_frame=rotating_frame))

    full = _average(return_probability(decomp, psi0, midpoint_times(tau, T, n_samples)))
    half = _average(return_probability(decomp, psi0, midpoint_times(tau, T, n_samples // 2)))
    return MemoryEstimate(full, tau, T, n_samples, abs(full - half))


def memory_with(params: SystemParams, psi0, settings: MemorySettings, decomp: SpectralDecomposition | None = None) -> MemoryEstimate:
    tau, T = settings.window(params)
    return memory(params, psi0, tau, T, settings.n_samples, settings.rotating_frame, decomp)


def _average(values: np.ndarray) -> float:
    # fsum keeps the result independent of summation order
    return math.fsum(values.tolist()) / values.shape[0]
