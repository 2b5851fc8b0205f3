"""Acceptance criteria 1-10, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even
without ``-s``).  Criteria are evaluated literally at their stated tolerances.
"""

import time

import numpy as np
import pytest

from psk_hadamard.detection import binary_success, build_confusion
from psk_hadamard.hadamard import CodeParams
from psk_hadamard.rates import (
    DEFAULT_LENGTHS,
    closed_form_real_rate_m3,
    closed_form_real_rate_m4,
    delta_rate,
    envelope_rate,
    log_grid,
    receiver_rate,
    separable_rate,
)
from psk_hadamard.simulator import SimConfig, analytic_reference, simulate
from psk_hadamard.spectra import classical_capacity, holevo_rate_oracle, optimal_rate

SEED = 20261017


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail, elapsed, limit=None):
        within = limit is None or elapsed < limit
        status = "PASS" if ok and within else "FAIL"
        budget = f" (limit {limit:g} s)" if limit is not None else ""
        with capsys.disabled():
            print(f"\nACCEPTANCE {k:>2}: {status}  {detail}; {elapsed:.2f} s{budget}")
        assert ok, detail
        assert within, f"runtime {elapsed:.1f} s over {limit} s"
    return emit


def test_criterion_01_oracle_equivalence(report):
    t0 = time.perf_counter()
    worst, cases = 0.0, 0
    for i in range(7):
        n = 2**i
        for M in range(1, 64 // n + 1):
            for E in (0.01, 0.1, 0.5, 1.0):
                p = CodeParams(n, M, E)
                worst = max(worst, abs(optimal_rate(p) - holevo_rate_oracle(p)))
                cases += 1
    report(1, worst <= 1e-9, f"max |R_opt - oracle| = {worst:.2e} over {cases} cases (tol 1e-9)",
           time.perf_counter() - t0, 10)


def test_criterion_02_capacity_saturation(report):
    t0 = time.perf_counter()
    min_ratio, worst_literal = np.inf, 0.0
    for M in (2, 4):
        for n in (2, 16):
            E = 1e-5 / n
            r = optimal_rate(CodeParams(n, M, E))
            min_ratio = min(min_ratio, r / classical_capacity(E))
            literal = E - E * np.log2(E)
            worst_literal = max(worst_literal, abs(literal - r) / r)
    sat = min_ratio > 0.99
    lit = worst_literal < 0.01
    report(2, sat and lit,
           f"saturation min R/C = {min_ratio:.5f} ({'ok' if sat else 'fail'}); "
           f"E - E log2 E rel. error max {worst_literal:.4f} vs 0.01 ({'ok' if lit else 'fail'})",
           time.perf_counter() - t0, 1)


def test_criterion_03_single_phase_peak(report):
    t0 = time.perf_counter()
    values = {2**i: optimal_rate(CodeParams(2**i, 1, 0.05)) for i in range(7)}
    best = max(values, key=values.get)
    report(3, best == 8, f"argmax n = {best}", time.perf_counter() - t0, 1)


def test_criterion_04_helstrom_gain(report):
    t0 = time.perf_counter()
    grid = log_grid(4e-3, 1e-1, 40)  # 57 points
    parts, ok = [], True
    for M in (3, 4):
        d = np.array([delta_rate("vp-helstrom", DEFAULT_LENGTHS, M, E) for E in grid])
        top = np.nanmax(d)
        at_one = delta_rate("vp-helstrom", DEFAULT_LENGTHS, M, 1.0)
        band = 0.03 <= top <= 0.09
        pos = bool(np.any(d > 0))
        neg = at_one < 0
        ok &= band and pos and neg
        parts.append(f"M={M}: max {top:.4f} at E={grid[np.nanargmax(d)]:.3g} ({'ok' if band else 'fail'}), "
                     f"positive in band ({'ok' if pos else 'fail'}), delta(E=1) = {at_one:+.4f} "
                     f"({'ok' if neg else 'fail'})")
    report(4, ok, "; ".join(parts), time.perf_counter() - t0, 300)


def test_criterion_05_finite_splitting(report):
    t0 = time.perf_counter()
    grid = log_grid(1e-3, 1e-1, 10)
    worst, monotone = 0.0, True
    parts = []
    for M in (3, 4):
        for E in grid:
            lim = envelope_rate("vp-helstrom", DEFAULT_LENGTHS, M, E)[0]
            fin = envelope_rate("vp-helstrom", DEFAULT_LENGTHS, M, E, N=30)[0]
            worst = max(worst, abs(fin - lim) / lim)
        lim = envelope_rate("vp-helstrom", DEFAULT_LENGTHS, M, 1e-2)[0]
        devs = [abs(envelope_rate("vp-helstrom", DEFAULT_LENGTHS, M, 1e-2, N=N)[0] - lim) / lim
                for N in (10, 30, 100)]
        monotone &= devs[0] > devs[1] > devs[2]
        parts.append(f"M={M} dev(N=10,30,100)@1e-2 = " + ",".join(f"{x:.4f}" for x in devs))
    ok = worst < 0.05 and monotone
    report(5, ok, f"max N=30 deviation {worst:.4f} (tol 0.05); " + "; ".join(parts)
           + f"; monotone {'ok' if monotone else 'fail'}", time.perf_counter() - t0, 300)


def _crossover(n, grid, sep):
    hel = np.array([receiver_rate("vp-helstrom", n, 3, E) for E in grid])
    above = hel > sep
    if above.all() or not above[0]:
        return None
    first = int(np.argmin(above))
    # below E* every grid point must favour the Hadamard receiver
    return grid[first] if above[:first].all() else None


def test_criterion_06_crossover_structure(report):
    t0 = time.perf_counter()
    grid = log_grid(1e-6, 1.0, 10)
    sep = np.array([separable_rate(3, E) for E in grid])
    e8, e64 = _crossover(8, grid, sep), _crossover(64, grid, sep)
    plateau = abs(receiver_rate("vp-helstrom", 64, 3, 1e-5) / 1e-5
                  - receiver_rate("vp-helstrom", 64, 3, 1e-6) / 1e-6) / (receiver_rate("vp-helstrom", 64, 3, 1e-6) / 1e-6)
    ok = e8 is not None and e64 is not None and e8 < 1 and e64 < e8 and plateau < 0.02
    report(6, ok, f"E*(8) = {e8}, E*(64) = {e64}, plateau change {plateau:.5f} (tol 0.02)",
           time.perf_counter() - t0, 120)


def test_criterion_07_bracketing(report):
    t0 = time.perf_counter()
    grid = np.logspace(-5, 1, 200)
    worst = -np.inf
    for M in (3, 4):
        for n in (2, 8, 64):
            for E in grid:
                real = receiver_rate("vp-realistic", n, M, E)
                hel = receiver_rate("vp-helstrom", n, M, E)
                opt = optimal_rate(CodeParams(n, M, E))
                cap = classical_capacity(E)
                worst = max(worst, real - hel, hel - opt, opt - cap)
    report(7, worst <= 1e-10, f"worst ordering violation {worst:.2e} (slack 1e-10)", time.perf_counter() - t0)


def test_criterion_08_table_invariants(report):
    t0 = time.perf_counter()
    energies = (0.0, 1e-3, 0.1, 0.5, 1.0, 3.0, 10.0, 40.0)
    row_dev = vac_dev = diag_dev = 0.0
    for E in energies:
        for kind, Ms in (("helstrom", range(1, 9)), ("vp-helstrom", range(1, 9)), ("vp-realistic", (2, 3, 4)),
                         ("realistic-psk", (2, 3, 4)), ("separable", range(2, 9))):
            for M in Ms:
                for N in (None, 1, 30):
                    if kind in ("helstrom", "separable") and N is not None:
                        continue
                    c = build_confusion(kind, M, E, N=N)
                    row_dev = max(row_dev, np.max(np.abs(c.probs.sum(axis=1) - 1)))
                    if kind.startswith("vp-"):
                        vac_dev = max(vac_dev, np.max(np.abs(c.probs[:, M] - np.exp(-E))))
        h = build_confusion("helstrom", 2, E)
        diag_dev = max(diag_dev, np.max(np.abs(np.diag(h.probs[:, :2]) - 0.5 * (1 + np.sqrt(1 - np.exp(-4 * E))))))
        diag_dev = max(diag_dev, abs(float(binary_success(E)) - 0.5 * (1 + np.sqrt(1 - np.exp(-4 * E)))))
    ok = row_dev <= 1e-9 and vac_dev <= 1e-12 and diag_dev <= 1e-12
    report(8, ok, f"row sums {row_dev:.1e} (1e-9), vacuum column {vac_dev:.1e} (1e-12), "
                  f"binary diagonal {diag_dev:.1e} (1e-12)", time.perf_counter() - t0)


def test_criterion_09_monte_carlo(report):
    t0 = time.perf_counter()
    parts, ok = [], True
    for M in (3, 4):
        config = SimConfig(N=100, trials=100_000, seed=SEED, M=M, energy=1.0, scenario="vp-realistic")
        emp = simulate(config)
        ref = analytic_reference(config)
        z = float(np.max(emp.sigma_deviations(ref)))
        _, dof, p = emp.chi_square(ref)
        repeat = simulate(config)
        same = np.array_equal(emp.counts, repeat.counts)
        ok &= z <= 3 and p >= 1e-3 and same
        parts.append(f"M={M}: max z {z:.2f}, chi2 p {p:.3f} (dof {dof}), deterministic {same}")
    report(9, ok, "; ".join(parts), time.perf_counter() - t0, 120)


def test_criterion_10_closed_forms(report):
    t0 = time.perf_counter()
    grid = np.logspace(-3, 0, 20)
    worst = 0.0
    for M, closed in ((3, closed_form_real_rate_m3), (4, closed_form_real_rate_m4)):
        for n in (1, 2, 8, 64):
            for E in grid:
                worst = max(worst, abs(closed(n, E) - receiver_rate("vp-realistic", n, M, E, method="generic")))
    report(10, worst <= 1e-8, f"max |closed - generic| = {worst:.2e} (tol 1e-8)", time.perf_counter() - t0)
