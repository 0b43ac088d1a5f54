"""Loss-protection classification and (g, Omega) phase diagrams.

Two routes per parameter point:

* numeric: memory M of the probes (1, 0, ...) and (0, 1, ...) compared to a threshold;
* analytic: the excited-mode estimate N_ex = Gamma / delta_omega <~ 1 applied
  to the Markovian relaxation rates, above and below the exceptional point.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from lossprotect.dynamics import diagonalize
from lossprotect.memory import MemorySettings, memory_with
from lossprotect.model import IndexConvention, SystemParams, basis_state, build_hamiltonian

DEFAULT_THRESHOLD = 0.15
DIAGRAM_HEADER = ("g", "Omega", "M_state1", "M_state2", "verdict", "analytic_verdict")


class Verdict(str, enum.Enum):
    TWO = "TwoProtected"
    ONE = "OneProtected"
    ZERO = "ZeroProtected"

    @property
    def count(self) -> int:
        return {Verdict.TWO: 2, Verdict.ONE: 1, Verdict.ZERO: 0}[self]

    @classmethod
    def from_flags(cls, first: bool, second: bool) -> "Verdict":
        return (cls.ZERO, cls.ONE, cls.TWO)[int(first) + int(second)]


def n_excited(Gamma: float, delta_omega: float) -> float:
    """Rough count of comb modes inside the emission line, Gamma / delta_omega."""
    if delta_omega <= 0:
        raise ValueError("delta_omega must be > 0")
    return Gamma / delta_omega


@dataclass(frozen=True)
class ProtectionBoundaries:
    """Boundary predicates at one (g, Omega) point, in units of delta_omega."""

    g: float
    Omega: float
    delta_omega: float
    above_ep: bool
    both_protected: bool
    both_unprotected: bool
    state1_protected: bool
    state2_protected: bool
    lhs_state1: float
    lhs_state2: float
    g_line_gamma_eq_step: float
    g_line_step_bound: float
    Omega_line_slow_rate: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def omega_ep(g: float, delta_omega: float) -> float:
    return math.pi * g * g / (2.0 * delta_omega)


def rate_terms(g: float, Omega: float, delta_omega: float) -> tuple[float, float]:
    """Half the reduced decay rate, gamma / (2 dw), and the reduced coupling W / dw."""
    return math.pi * g * g / (2.0 * delta_omega**2), Omega / delta_omega


def _root(x: float, y: float) -> float:
    # clamped to 0 above the EP, where the rates are equal
    return math.sqrt(max((x - y) * (x + y), 0.0))


def lhs_state1(g: float, Omega: float, delta_omega: float) -> float:
    """Slow rate over delta_omega below the EP: x - sqrt(x^2 - y^2)."""
    x, y = rate_terms(g, Omega, delta_omega)
    return x - _root(x, y)


def lhs_state2(g: float, Omega: float, delta_omega: float) -> float:
    """Fast rate over delta_omega below the EP: x + sqrt(x^2 - y^2)."""
    x, y = rate_terms(g, Omega, delta_omega)
    return x + _root(x, y)


def protection_boundaries(g: float, Omega: float, delta_omega: float) -> ProtectionBoundaries:
    if delta_omega <= 0:
        raise ValueError("delta_omega must be > 0")
    if g < 0 or Omega < 0:
        raise ValueError("g and Omega must be >= 0")
    x, y = rate_terms(g, Omega, delta_omega)
    above = y > x
    g_bound = math.sqrt(2.0 / math.pi) * delta_omega
    l1 = lhs_state1(g, Omega, delta_omega)
    l2 = lhs_state2(g, Omega, delta_omega)
    return ProtectionBoundaries(
        g=g,
        Omega=Omega,
        delta_omega=delta_omega,
        above_ep=above,
        both_protected=above and g < g_bound,
        both_unprotected=above and g > g_bound,
        state1_protected=l1 < 1.0,
        state2_protected=l2 < 1.0,
        lhs_state1=l1,
        lhs_state2=l2,
        g_line_gamma_eq_step=delta_omega / math.sqrt(math.pi),
        g_line_step_bound=g_bound,
        Omega_line_slow_rate=math.sqrt(math.pi / 2.0) * g,
    )


@dataclass(frozen=True)
class PhaseClassification:
    verdict: Verdict
    state1_protected: bool
    state2_protected: bool
    M_state1: float | None = None
    M_state2: float | None = None
    threshold: float | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "state1_protected": self.state1_protected,
            "state2_protected": self.state2_protected,
            "M_state1": self.M_state1,
            "M_state2": self.M_state2,
            "threshold": self.threshold,
        }


def analytic_classification(g: float, Omega: float, delta_omega: float) -> PhaseClassification:
    b = protection_boundaries(g, Omega, delta_omega)
    if b.above_ep:
        # equal rates gamma/2 for every state: both or neither
        both = b.both_protected
        return PhaseClassification(Verdict.TWO if both else Verdict.ZERO, both, both)
    return PhaseClassification(
        Verdict.from_flags(b.state1_protected, b.state2_protected),
        b.state1_protected,
        b.state2_protected,
    )


def verdict_from_memory(m1: float, m2: float, threshold: float) -> Verdict:
    return Verdict.from_flags(m1 >= threshold, m2 >= threshold)


def numeric_classification(
    params: SystemParams,
    threshold: float = DEFAULT_THRESHOLD,
    settings: MemorySettings = MemorySettings(),
) -> PhaseClassification:
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    decomp = diagonalize(build_hamiltonian(params, rotating_frame=settings.rotating_frame))
    m1 = memory_with(params, basis_state(params, 0), settings, decomp).M
    m2 = memory_with(params, basis_state(params, 1), settings, decomp).M
    return PhaseClassification(
        verdict_from_memory(m1, m2, threshold), m1 >= threshold, m2 >= threshold, m1, m2, threshold
    )


@dataclass(frozen=True)
class CellResult:
    g: float
    Omega: float
    analytic: PhaseClassification
    numeric: PhaseClassification | None = None
    error: str | None = None

    @property
    def valid(self) -> bool:
        return self.numeric is not None


@dataclass
class PhaseDiagram:
    g_axis: np.ndarray
    Omega_axis: np.ndarray
    n_modes: int
    delta_omega: float
    threshold: float
    settings: MemorySettings | None
    cells: list[list[CellResult]]  # cells[i][j] at (g_axis[i], Omega_axis[j])
    convention: IndexConvention = IndexConvention.AS_WRITTEN
    extra_metadata: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.g_axis), len(self.Omega_axis)

    def iter_cells(self):
        for row in self.cells:
            yield from row

    def invalid_fraction(self) -> float:
        cells = list(self.iter_cells())
        return sum(not c.valid for c in cells) / len(cells)

    def verdict_grid(self, analytic: bool = False) -> np.ndarray:
        """Protected-state counts; -1 marks an invalid numeric cell."""
        out = np.full(self.shape, -1, dtype=int)
        for i, row in enumerate(self.cells):
            for j, c in enumerate(row):
                cls = c.analytic if analytic else c.numeric
                if cls is not None:
                    out[i, j] = cls.verdict.count
        return out

    def memory_grid(self, state: int) -> np.ndarray:
        out = np.full(self.shape, np.nan)
        for i, row in enumerate(self.cells):
            for j, c in enumerate(row):
                if c.numeric is not None:
                    out[i, j] = c.numeric.M_state1 if state == 1 else c.numeric.M_state2
        return out

    def metadata(self) -> dict:
        meta = {
            "g_axis": [float(v) for v in self.g_axis],
            "Omega_axis": [float(v) for v in self.Omega_axis],
            "n_modes": self.n_modes,
            "delta_omega": self.delta_omega,
            "index_convention": self.convention.value,
            "threshold": self.threshold,
            "memory_settings": None if self.settings is None else self.settings.to_dict(),
            "reference_lines": {
                "g_gamma_equals_step": self.delta_omega / math.sqrt(math.pi),
                "g_step_bound": math.sqrt(2.0 / math.pi) * self.delta_omega,
                "Omega_over_g_slow_rate_line": math.sqrt(math.pi / 2.0),
            },
            "invalid_cells": sum(not c.valid for c in self.iter_cells()) if self.settings else 0,
        }
        meta.update(self.extra_metadata)
        return meta

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(DIAGRAM_HEADER)
            for c in self.iter_cells():
                if c.numeric is not None:
                    m1, m2, v = _fmt(c.numeric.M_state1), _fmt(c.numeric.M_state2), c.numeric.verdict.value
                elif self.settings is None:
                    m1 = m2 = v = ""
                else:
                    m1 = m2 = "nan"
                    v = "invalid"
                writer.writerow([_fmt(c.g), _fmt(c.Omega), m1, m2, v, c.analytic.verdict.value])

    def write_metadata(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_matrix(self, path: str | Path, values: np.ndarray) -> None:
        """gnuplot ``matrix nonuniform`` layout: first row g axis, first column Omega axis."""
        with open(path, "w") as fh:
            fh.write(" ".join([str(len(self.g_axis))] + [_fmt(v) for v in self.g_axis]) + "\n")
            for j, om in enumerate(self.Omega_axis):
                fh.write(" ".join([_fmt(om)] + [_fmt(values[i, j]) for i in range(len(self.g_axis))]) + "\n")


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _check_axis(axis: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(axis, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} axis must be a non-empty 1-d sequence")
    if np.any(np.diff(arr) <= 0):
        raise ValueError(f"{name} axis must be strictly increasing")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} axis must be finite and >= 0")
    return arr


def _evaluate_cell(args) -> tuple[int, int, PhaseClassification | None, str | None]:
    i, j, params, threshold, settings = args
    try:
        return i, j, numeric_classification(params, threshold, settings), None
    except Exception as exc:  # recorded per cell, not fatal
        return i, j, None, f"{type(exc).__name__}: {exc}"


def sweep(
    g_axis: Sequence[float],
    Omega_axis: Sequence[float],
    n_modes: int,
    delta_omega: float,
    threshold: float = DEFAULT_THRESHOLD,
    settings: MemorySettings = MemorySettings(),
    convention: IndexConvention | str = IndexConvention.AS_WRITTEN,
    workers: int = 1,
    shuffle_seed: int | None = None,
    numeric: bool = True,
) -> PhaseDiagram:
    """Classify every (g, Omega) cell independently.

    ``shuffle_seed`` permutes the evaluation order only; the assembled
    diagram does not depend on it. ``numeric=False`` skips simulation and
    fills only the analytic overlay.
    """
    g_arr = _check_axis(g_axis, "g")
    om_arr = _check_axis(Omega_axis, "Omega")
    convention = IndexConvention.parse(convention)
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")

    analytic = [[analytic_classification(float(g), float(om), delta_omega) for om in om_arr] for g in g_arr]
    numeric_res: dict[tuple[int, int], tuple[PhaseClassification | None, str | None]] = {}

    if numeric:
        tasks = []
        for i, g in enumerate(g_arr):
            for j, om in enumerate(om_arr):
                params = SystemParams(
                    delta_omega=delta_omega, g=float(g), Omega=float(om), n_modes=n_modes, index_convention=convention
                )
                tasks.append((i, j, params, threshold, settings))
        if shuffle_seed is not None:
            random.Random(shuffle_seed).shuffle(tasks)
        if workers <= 1:
            results = map(_evaluate_cell, tasks)
            for i, j, cls, err in results:
                numeric_res[(i, j)] = (cls, err)
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                chunk = max(1, len(tasks) // (4 * workers))
                for i, j, cls, err in pool.map(_evaluate_cell, tasks, chunksize=chunk):
                    numeric_res[(i, j)] = (cls, err)

    cells = []
    for i, g in enumerate(g_arr):
        row = []
        for j, om in enumerate(om_arr):
            cls, err = numeric_res.get((i, j), (None, None))
            row.append(CellResult(float(g), float(om), analytic[i][j], cls, err))
        cells.append(row)
    return PhaseDiagram(g_arr, om_arr, n_modes, delta_omega, threshold, settings if numeric else None, cells, convention)


def boundary_band_mask(verdicts: np.ndarray, radius: int = 1) -> np.ndarray:
    """True for cells within ``radius`` (Chebyshev) of a cell with a different verdict.

    radius=1 marks the two cells straddling each boundary.
    """
    n, m = verdicts.shape
    mask = np.zeros((n, m), dtype=bool)
    for i in range(n):
        for j in range(m):
            block = verdicts[max(0, i - radius) : i + radius + 1, max(0, j - radius) : j + radius + 1]
            mask[i, j] = np.any(block != verdicts[i, j])
    return mask


def agreement_outside_band(diagram: PhaseDiagram, radius: int = 1) -> tuple[float, int]:
    """Fraction of valid cells off the analytic boundary band where both verdicts match."""
    analytic = diagram.verdict_grid(analytic=True)
    numeric = diagram.verdict_grid(analytic=False)
    keep = ~boundary_band_mask(analytic, radius) & (numeric >= 0)
    n = int(keep.sum())
    if n == 0:
        return float("nan"), 0
    return float(np.mean(analytic[keep] == numeric[keep])), n


def default_workers() -> int:
    return os.cpu_count() or 1
