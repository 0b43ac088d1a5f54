"""Exit criteria, one test per criterion; a summary line per criterion is printed at the end."""

import math
import os
import time

import numpy as np
import pytest

from conftest import random_state
from lossprotect.cli import main as cli_main
from lossprotect.dynamics import diagonalize, propagate_series, rk4_integrate
from lossprotect.markovian import MarkovianModel, eigenvalues, eigenvectors, markovian_series
from lossprotect.memory import memory
from lossprotect.model import SystemParams, basis_state, build_hamiltonian, effective_gamma, revival_time
from lossprotect.phase import Verdict, agreement_outside_band, lhs_state1, lhs_state2, omega_ep, sweep

DW = 2e-3


def fig1():
    return SystemParams(delta_omega=DW, g=3e-3, Omega=6e-3, n_modes=100)


def fig2():
    return SystemParams(delta_omega=DW, g=7.5e-4, Omega=5e-4, n_modes=100)


def test_c1_markovian_closed_forms(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_poly = worst_vec = worst_match = 0.0
    for gam, W in rng.uniform(0, 5e-2, size=(100, 2)):
        m = MarkovianModel(gam, W)
        M = m.matrix()
        lams = eigenvalues(m)
        poly = np.poly(M)  # characteristic polynomial of the generic matrix
        worst_poly = max(worst_poly, max(abs(np.polyval(poly, lam)) for lam in lams))
        generic = np.linalg.eigvals(M)
        worst_match = max(worst_match, max(min(abs(lam - z) for z in generic) for lam in lams))
        for lam, e in zip(lams, eigenvectors(m)):
            worst_vec = max(worst_vec, np.linalg.norm(M @ e - lam * e))
    elapsed = time.perf_counter() - start
    ok = worst_poly < 1e-12 and worst_vec < 1e-10 and worst_match < 1e-12 and elapsed < 1.0
    criterion(
        "C1 Markovian closed forms",
        ok,
        f"poly residual {worst_poly:.2e}, eigensolver gap {worst_match:.2e}, eigvec residual {worst_vec:.2e}, {elapsed:.3f}s",
    )
    assert ok


@pytest.mark.slow
def test_c2_oracle_equivalence(criterion):
    start = time.perf_counter()
    worst = {}
    for name, p in (("fig1", fig1()), ("fig2", fig2())):
        psi = basis_state(p, 0)
        traj = rk4_integrate(p, psi, revival_time(p), 1e-2, sample_every=10)
        exact = propagate_series(diagonalize(build_hamiltonian(p)), psi, traj.times)
        worst[name] = float(np.max(np.abs(traj.states - exact.states)))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) < 1e-6 and elapsed < 60
    criterion("C2 spectral vs RK4", ok, f"max |diff| {worst}, {elapsed:.1f}s")
    assert ok


def test_c3_unitarity(criterion):
    p = fig2()
    d = diagonalize(build_hamiltonian(p))
    rng = np.random.default_rng(3)
    times = np.linspace(0, 10 * revival_time(p), 5001)
    drift = max(
        float(np.max(np.abs(propagate_series(d, random_state(rng, p.dim), times).norms2() - 1))) for _ in range(20)
    )
    ok = drift < 1e-9
    criterion("C3 unitarity", ok, f"max norm^2 drift {drift:.2e}")
    assert ok


def test_c4_fig1_regime(criterion):
    p = fig1()
    t_r = revival_time(p)
    d = diagonalize(build_hamiltonian(p))
    m = MarkovianModel(effective_gamma(p), p.Omega, 0.0)

    early = np.linspace(0, 0.8 * t_r, 8001)[:-1]
    full = propagate_series(d, basis_state(p, 0), early).populations()[:, :2]
    reduced = np.abs(markovian_series(m, [1, 0], early)) ** 2
    early_gap = float(np.max(np.abs(full - reduced)))

    # first revival: |a1|^2 climbs back after T_R
    late = np.linspace(t_r, 1.5 * t_r, 5001)
    pop1 = propagate_series(d, basis_state(p, 0), late).populations()[:, 0]
    k = int(np.argmax(pop1))
    markov_at_peak = abs(markovian_series(m, [1, 0], [late[k]])[0, 0]) ** 2
    ratio = pop1[k] / markov_at_peak
    ok = early_gap < 2e-2 and ratio >= 5
    criterion(
        "C4 fig1-preset regime",
        ok,
        f"early max gap {early_gap:.3e}; revival peak {pop1[k]:.3f} at t={late[k] / t_r:.3f} T_R, ratio to Markov {ratio:.2e}",
    )
    assert ok


def test_c5_fig2_protection(criterion):
    m2 = memory(fig2(), basis_state(fig2(), 0)).M
    m1 = memory(fig1(), basis_state(fig1(), 0)).M
    ok = m2 - m1 >= 0.2
    criterion("C5 fig2-preset protection contrast", ok, f"M(fig2)={m2:.4f}, M(fig1)={m1:.4f}, diff {m2 - m1:.4f}")
    assert ok


@pytest.mark.slow
def test_c6_phase_diagram(criterion):
    start = time.perf_counter()
    axis = np.linspace(0.1, 3.0, 20) * DW
    d = sweep(axis, axis, 50, DW, workers=os.cpu_count() or 1)
    elapsed = time.perf_counter() - start
    numeric = d.verdict_grid()
    analytic = d.verdict_grid(analytic=True)
    regions_numeric = {int(v) for v in numeric.ravel()}
    regions_analytic = {int(v) for v in analytic.ravel()}
    # two-protected at the smallest g, one-protected at the largest g and smallest Omega
    anchors = (bool(numeric[0, 10] == 2), bool(numeric[-1, 0] == 1))
    agreement, kept = agreement_outside_band(d)
    ok = (
        regions_numeric == {0, 1, 2}
        and regions_analytic == {0, 1, 2}
        and all(anchors)
        and agreement >= 0.8
        and elapsed <= 15 * 60
        and d.invalid_fraction() == 0
    )
    criterion(
        "C6 phase-diagram structure",
        ok,
        f"regions numeric {sorted(regions_numeric)} analytic {sorted(regions_analytic)}, anchors {anchors}, "
        f"agreement {agreement:.3f} over {kept} cells off the band, threshold {d.threshold}, {elapsed:.0f}s",
    )
    assert ok


def _bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0) == (flo > 0):
            lo, flo = mid, f(mid)
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_c7a_predicates_merge_near_ep(criterion):
    gaps = []
    for g_red in (0.5, math.sqrt(2 / math.pi), 1.0, 2.0, 3.0):
        g = g_red * DW
        W = omega_ep(g, DW) * (1 - 1e-6)
        gaps.append(lhs_state2(g, W, DW) - lhs_state1(g, W, DW))
    worst = max(gaps)
    ok = worst < 1e-9
    criterion("C7a state-1/state-2 left sides 1e-6 from the EP", ok, f"max difference {worst:.3e} (needs < 1e-9)")
    assert ok


def test_c7b_fast_mode_small_coupling_limit(criterion):
    # boundary of the fast-mode condition along Omega = 1e-3 Omega_EP(g)
    g_b = _bisect(lambda g: lhs_state2(g, 1e-3 * omega_ep(g, DW), DW) - 1, 1e-6 * DW, 10 * DW)
    rel = abs(g_b / (DW / math.sqrt(math.pi)) - 1)
    ok = rel < 0.01
    criterion("C7b small-Omega limit g < dw/sqrt(pi)", ok, f"boundary g = {g_b / DW:.6f} dw, relative deviation {rel:.2e}")
    assert ok


def test_c7c_slow_mode_small_coupling_limit(criterion):
    # boundary of the slow-mode condition along Omega = 1e-3 Omega_EP(g), compared to Omega = g
    g_b = _bisect(lambda g: lhs_state1(g, 1e-3 * omega_ep(g, DW), DW) - 1, 10 * DW, 1e5 * DW)
    W_b = 1e-3 * omega_ep(g_b, DW)
    rel = abs(W_b / g_b - 1)
    ok = rel < 0.01
    criterion("C7c small-Omega limit Omega < g", ok, f"boundary Omega/g = {W_b / g_b:.6f}, relative deviation {rel:.2e}")
    assert ok


@pytest.mark.slow
def test_c8_determinism(criterion, tmp_path):
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli_main(["sweep", "--preset", "fig3", "--threads", "1", "--out", str(out)]) == 0
        outputs.append((out / "diagram.csv").read_bytes())
    ok = outputs[0] == outputs[1] and len(outputs[0]) > 0
    criterion("C8 determinism", ok, f"{len(outputs[0])} bytes, identical={outputs[0] == outputs[1]}")
    assert ok
