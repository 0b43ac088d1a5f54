"""System parameters and the single-excitation Hamiltonian.

All frequencies, couplings and rates are in units of the resonator
frequency ``omega0`` (which defaults to 1). Basis ordering of every
state vector and matrix is ``[a1, a2, b_1, ..., b_N]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping

import numpy as np

MAX_MODES = 1_000_000


class IndexConvention(str, enum.Enum):
    """Placement of the environment comb relative to ``omega0``."""

    AS_WRITTEN = "as-written"  # offsets j - N/2, j = 1..N
    SYMMETRIC = "symmetric"  # offsets j - (N+1)/2, centred on omega0

    @classmethod
    def parse(cls, value: "IndexConvention | str") -> "IndexConvention":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"aswritten": "as-written", "as-written": "as-written", "symmetric": "symmetric"}
        try:
            return cls(aliases[key])
        except KeyError:
            raise ValueError(f"unknown index convention {value!r}") from None


@dataclass(frozen=True)
class SystemParams:
    delta_omega: float
    g: float
    Omega: float
    n_modes: int
    omega0: float = 1.0
    index_convention: IndexConvention = field(default=IndexConvention.AS_WRITTEN)

    def __post_init__(self) -> None:
        object.__setattr__(self, "index_convention", IndexConvention.parse(self.index_convention))
        for name in ("delta_omega", "g", "Omega", "omega0"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if isinstance(self.n_modes, bool) or int(self.n_modes) != self.n_modes:
            raise ValueError(f"n_modes must be an integer, got {self.n_modes!r}")
        object.__setattr__(self, "n_modes", int(self.n_modes))
        if self.delta_omega <= 0:
            raise ValueError("delta_omega must be > 0")
        if self.g < 0:
            raise ValueError("g must be >= 0")
        if self.Omega < 0:
            raise ValueError("Omega must be >= 0")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if self.n_modes > MAX_MODES:
            raise ValueError(f"n_modes must be <= {MAX_MODES}")

    @property
    def dim(self) -> int:
        return self.n_modes + 2

    def with_(self, **changes: Any) -> "SystemParams":
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "omega0": self.omega0,
            "delta_omega": self.delta_omega,
            "g": self.g,
            "Omega": self.Omega,
            "n_modes": self.n_modes,
            "index_convention": self.index_convention.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SystemParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
        return cls(**data)


def environment_frequencies(params: SystemParams) -> np.ndarray:
    """Frequencies ``omega0 + delta_omega * offset_j`` of the N comb modes."""
    j = np.arange(1, params.n_modes + 1, dtype=float)
    if params.index_convention is IndexConvention.AS_WRITTEN:
        offsets = j - params.n_modes / 2
    else:
        offsets = j - (params.n_modes + 1) / 2
    return params.omega0 + params.delta_omega * offsets


def build_hamiltonian(params: SystemParams, rotating_frame: bool = True) -> np.ndarray:
    """Dense real-symmetric (N+2)x(N+2) matrix of the single-excitation sector.

    With ``rotating_frame`` the diagonal is shifted by ``-omega0``.
    """
    n = params.dim
    H = np.zeros((n, n), dtype=float)
    shift = params.omega0 if rotating_frame else 0.0
    diag = np.empty(n)
    diag[0] = params.omega0 - shift
    diag[1] = params.omega0 - shift
    diag[2:] = environment_frequencies(params) - shift
    H[np.diag_indices(n)] = diag
    H[0, 1] = H[1, 0] = params.Omega
    H[1, 2:] = params.g
    H[2:, 1] = params.g
    return H


def effective_gamma(params: SystemParams) -> float:
    """Born-Markov decay rate ``pi g^2 / delta_omega`` of resonator 2."""
    return gamma_from(params.g, params.delta_omega)


def gamma_from(g: float, delta_omega: float) -> float:
    if delta_omega <= 0:
        raise ValueError("delta_omega must be > 0")
    return math.pi * g * g / delta_omega


def revival_time(params: SystemParams) -> float:
    """First revival time ``2 pi / delta_omega``."""
    return 2.0 * math.pi / params.delta_omega


def basis_state(params: SystemParams, index: int) -> np.ndarray:
    psi = np.zeros(params.dim, dtype=complex)
    psi[index] = 1.0
    return psi
