"""Born-Markov reduction: two resonators, the second one damped at rate gamma.

    d/dt (a1, a2) = [[-i w0, -i W], [-i W, -i w0 - gamma]] (a1, a2)

Branch convention: ``lambda_plus`` takes the principal square root of
``gamma^2 - 4 W^2``, so below the exceptional point it is the slow
(long-lived) mode. Relaxation rates are ``-Re(lambda)``, always >= 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from lossprotect.model import SystemParams, effective_gamma

EP_PHASE_TOL = 1e-12
EP_SWITCH_REL = 1e-6


class PTPhase(str, enum.Enum):
    SYMMETRIC = "symmetric"
    EXCEPTIONAL_POINT = "exceptional-point"
    BROKEN = "broken"


@dataclass(frozen=True)
class MarkovianModel:
    gamma: float
    Omega: float
    omega0: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.gamma) and math.isfinite(self.Omega) and math.isfinite(self.omega0)):
            raise ValueError("Markovian parameters must be finite")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.Omega < 0:
            raise ValueError("Omega must be >= 0")

    @classmethod
    def from_params(cls, params: SystemParams) -> "MarkovianModel":
        return cls(effective_gamma(params), params.Omega, params.omega0)

    def matrix(self) -> np.ndarray:
        w0, W, gam = self.omega0, self.Omega, self.gamma
        return np.array([[-1j * w0, -1j * W], [-1j * W, -1j * w0 - gam]], dtype=complex)

    @property
    def discriminant(self) -> float:
        return self.gamma * self.gamma - 4.0 * self.Omega * self.Omega

    def sqrt_discriminant(self) -> complex:
        # factored and scaled so tiny or huge rates neither underflow nor exceed gamma
        a, b = self.gamma, 2.0 * self.Omega
        if a == 0.0 and b == 0.0:
            return 0j
        if a >= b:
            r = b / a
            return complex(a * math.sqrt((1.0 - r) * (1.0 + r)))
        r = a / b
        return 1j * b * math.sqrt((1.0 - r) * (1.0 + r))


@dataclass(frozen=True)
class EigenPair:
    lambda_plus: complex
    lambda_minus: complex
    e_plus: np.ndarray
    e_minus: np.ndarray


def eigenvalues(m: MarkovianModel) -> tuple[complex, complex]:
    centre = complex(-0.5 * m.gamma, -m.omega0)
    half = 0.5 * m.sqrt_discriminant()
    return centre + half, centre - half


def eigenvectors(m: MarkovianModel) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized ``(i (gamma +- s) / (2 W), 1)``; the decoupled basis when W = 0."""
    if m.Omega == 0.0:
        return np.array([1.0, 0.0], dtype=complex), np.array([0.0, 1.0], dtype=complex)
    s = m.sqrt_discriminant()
    e_plus = np.array([1j * (m.gamma + s) / (2.0 * m.Omega), 1.0], dtype=complex)
    e_minus = np.array([1j * (m.gamma - s) / (2.0 * m.Omega), 1.0], dtype=complex)
    return e_plus, e_minus


def normalized_eigenvectors(m: MarkovianModel) -> tuple[np.ndarray, np.ndarray]:
    e_plus, e_minus = eigenvectors(m)
    return e_plus / np.linalg.norm(e_plus), e_minus / np.linalg.norm(e_minus)


def eigenpair(m: MarkovianModel) -> EigenPair:
    lp, lm = eigenvalues(m)
    ep, em = eigenvectors(m)
    return EigenPair(lp, lm, ep, em)


def exceptional_point(gamma: float) -> float:
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    return gamma / 2.0


def pt_phase(m: MarkovianModel, tol: float = EP_PHASE_TOL) -> PTPhase:
    diff = m.Omega - exceptional_point(m.gamma)
    if abs(diff) <= tol:
        return PTPhase.EXCEPTIONAL_POINT
    return PTPhase.SYMMETRIC if diff > 0 else PTPhase.BROKEN


def relaxation_rates(m: MarkovianModel) -> tuple[float, float]:
    """(-Re lambda_plus, -Re lambda_minus)."""
    lp, lm = eigenvalues(m)
    return -lp.real, -lm.real


def slow_rate_small_coupling(m: MarkovianModel) -> float:
    """Leading term ``W^2 / gamma`` of ``-Re lambda_plus`` for W << gamma/2."""
    if m.gamma == 0:
        raise ZeroDivisionError("small-coupling expansion needs gamma > 0")
    return m.Omega**2 / m.gamma


def slow_rate_caption_estimate(m: MarkovianModel) -> float:
    """The cruder estimate ``2 W^2 / gamma`` used for the inclined reference line.

    Twice the true leading term; kept separate from the exact rate.
    """
    if m.gamma == 0:
        raise ZeroDivisionError("estimate needs gamma > 0")
    return 2.0 * m.Omega**2 / m.gamma


def near_exceptional_point(m: MarkovianModel) -> bool:
    return abs(m.discriminant) < (EP_SWITCH_REL * m.gamma) ** 2


def _propagator_terms(m: MarkovianModel, times: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scalar factors (phase, c, d) with exp(M t) = phase * (c I + d K).

    K = M - mu I is the traceless part, mu = -gamma/2 - i w0. The two-mode
    spectral sum exp(l+ t) P+ + exp(l- t) P- collapses to
    c = cosh(s t / 2), d = sinh(s t / 2) / (s / 2); written this way it
    does not cancel when the splitting s is small against w0. At the EP
    (Jordan block) c = 1 and d = t.
    """
    mu = complex(-0.5 * m.gamma, -m.omega0)
    phase = np.exp(mu * times)
    if near_exceptional_point(m):
        return phase, np.ones_like(times, dtype=complex), times.astype(complex)
    half = 0.5 * m.sqrt_discriminant()
    x = half * times
    c = np.cosh(x)
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(x == 0, times, np.sinh(x) / half)
    return phase, c, d


def _traceless(m: MarkovianModel) -> np.ndarray:
    return np.array([[0.5 * m.gamma, -1j * m.Omega], [-1j * m.Omega, -0.5 * m.gamma]], dtype=complex)


def markovian_propagate(m: MarkovianModel, a0, t: float) -> np.ndarray:
    """Exact solution of the 2x2 linear system at time t.

    Away from the exceptional point this is the eigenmode expansion; within
    a relative 1e-6 of it the eigenbasis is ill-conditioned and the Jordan
    form exp(mu t) (I + t K) is used, K the traceless part of the matrix.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    a0 = np.asarray(a0, dtype=complex)
    if a0.shape != (2,):
        raise ValueError("a0 must be a complex 2-vector")
    return markovian_series(m, a0, [t])[0]


def markovian_series(m: MarkovianModel, a0, times) -> np.ndarray:
    """Rows of (a1, a2) at each of ``times``."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("times must be >= 0")
    a0 = np.asarray(a0, dtype=complex)
    phase, c, d = _propagator_terms(m, times)
    drift = _traceless(m) @ a0
    return phase[:, None] * (c[:, None] * a0[None, :] + d[:, None] * drift[None, :])


def report(m: MarkovianModel) -> dict:
    """JSON-ready summary of the eigenstructure."""
    lp, lm = eigenvalues(m)
    ep, em = eigenvectors(m)
    rates = relaxation_rates(m)

    def cplx(z: complex) -> list[float]:
        return [float(z.real), float(z.imag)]

    return {
        "gamma": m.gamma,
        "Omega": m.Omega,
        "omega0": m.omega0,
        "lambda_plus": cplx(lp),
        "lambda_minus": cplx(lm),
        "e_plus": [cplx(z) for z in ep],
        "e_minus": [cplx(z) for z in em],
        "decoupled": m.Omega == 0.0,
        "relaxation_rates": list(rates),
        "Omega_EP": exceptional_point(m.gamma),
        "phase": pt_phase(m).value,
    }
