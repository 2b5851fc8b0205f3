import numpy as np
import pytest

from psk_hadamard.detection import binary_success
from psk_hadamard.simulator import (
    EmpiricalConfusion,
    NullingHierarchy,
    SimConfig,
    analytic_reference,
    extracted_energies,
    reflectivity,
    reflectivity_schedule,
    run_cascade,
    simulate,
    simulate_nulling_hierarchy,
)

SEED = 20261017


def within_sigma(freq, p, trials, k=3.0):
    sd = np.sqrt(max(p * (1 - p), 1e-300) / trials)
    return abs(freq - p) <= k * sd + 1e-12


def test_zero_energy_always_vacuum():
    emp = simulate(SimConfig(20, 2000, SEED, 3, 0.0))
    assert np.all(emp.counts[:, -1] == 2000)


def test_binary_vacuum_column():
    emp = simulate(SimConfig(50, 40_000, SEED, 2, 3.0, "vp-helstrom-proxy"))
    for m in range(2):
        assert within_sigma(emp.probs[m, -1], np.exp(-3.0), 40_000)


@pytest.mark.parametrize("scenario", ["vp-helstrom-proxy", "vp-realistic", "realistic-psk-only"])
@pytest.mark.parametrize("M", [2, 3, 4])
def test_matches_analytic_table(scenario, M):
    config = SimConfig(40, 20_000, SEED, M, 1.0, scenario)
    emp = simulate(config)
    ref = analytic_reference(config)
    assert np.max(np.abs(emp.sigma_deviations(ref))) < 4.5
    assert emp.chi_square(ref)[2] > 1e-3


def test_nulling_correct_symbol_zero():
    # nulling hypothesis 0 when 0 was sent leaves nothing to click
    emp = simulate_nulling_hierarchy(3, 2.0, 30, 5000, SEED)
    assert emp.counts[0, 0] == 5000
    emp4 = simulate_nulling_hierarchy(4, 2.0, 30, 5000, SEED)
    assert emp4.counts[0, 0] == 5000


def test_nulling_four_phase_symbol_two():
    # sending 2 against a nulled 0 leaves amplitude 2a, so no click has probability e^{-4E}
    en, trials = 1.0, 50_000
    emp = simulate_nulling_hierarchy(4, en, 200, trials, SEED)
    assert within_sigma(emp.probs[2, 0], np.exp(-4 * en), trials)


def test_nulling_three_phase_symbol_one():
    # |a - a w|^2 = 3E for the nulled hypothesis
    en, trials = 0.8, 50_000
    emp = simulate_nulling_hierarchy(3, en, 200, trials, SEED)
    assert within_sigma(emp.probs[1, 0], np.exp(-3 * en), trials)


def test_binary_hierarchy_is_helstrom():
    emp = simulate_nulling_hierarchy(2, 0.4, 10, 50_000, SEED)
    assert within_sigma(emp.probs[0, 0], binary_success(0.4), 50_000)


def test_reproducible_across_threads_and_runs():
    a = simulate(SimConfig(30, 25_000, SEED, 4, 1.0, shard_size=3000, threads=1))
    b = simulate(SimConfig(30, 25_000, SEED, 4, 1.0, shard_size=3000, threads=4))
    c = simulate(SimConfig(30, 25_000, SEED, 4, 1.0, shard_size=3000, threads=4))
    assert np.array_equal(a.counts, b.counts) and np.array_equal(b.counts, c.counts)
    d = simulate(SimConfig(30, 25_000, SEED + 1, 4, 1.0, shard_size=3000))
    assert not np.array_equal(a.counts, d.counts)


@pytest.mark.parametrize("N", [1, 2, 7, 100])
def test_reflectivity_recursion(N):
    assert np.allclose(reflectivity_schedule(N), [reflectivity(p, N) for p in range(1, N + 1)], rtol=1e-12)
    assert reflectivity(N, N) == 1.0
    with pytest.raises(ValueError):
        reflectivity(N + 1, N)


@pytest.mark.parametrize("N", [1, 5, 64])
def test_energy_bookkeeping(N):
    ext = extracted_energies(2.5, N)
    assert ext.sum() == pytest.approx(2.5, rel=1e-12)
    # every step of the schedule extracts the same share
    assert np.allclose(ext, 2.5 / N, rtol=1e-12)


def test_cascade_without_light_never_clicks():
    rng = np.random.default_rng(0)
    sig = np.full(100, 0.8 + 0.3j)
    clicked, rem = run_cascade(rng, sig, sig, 16)
    assert not clicked.any() and np.all(rem == 0)


def test_cascade_residual_scale():
    rng = np.random.default_rng(1)
    N = 10
    clicked, rem = run_cascade(rng, np.full(2000, 3.0 + 0j), np.zeros(2000, dtype=complex), N)
    assert clicked.all()
    # after p steps the transmitted amplitude is a * sqrt((N - p) / N)
    steps = N - np.round(np.abs(rem) ** 2 / 9.0 * N)
    assert np.allclose(np.abs(rem), 3.0 * np.sqrt((N - steps) / N), atol=1e-12)


def test_hierarchy_output_range():
    rng = np.random.default_rng(2)
    for M in (3, 4):
        decide = NullingHierarchy(M, 20)
        for m in range(M):
            g = decide(rng, m, np.full(500, np.exp(2j * np.pi * m / M)))
            assert g.min() >= 0 and g.max() < M


def test_empirical_confusion_basics():
    emp = EmpiricalConfusion(np.array([[6, 2, 2], [1, 8, 1]]), 10, 0.5, 7)
    assert emp.M == 2
    assert emp.probs[0].tolist() == [0.6, 0.2, 0.2]
    assert emp.stderr[1, 1] == pytest.approx(np.sqrt(0.8 * 0.2 / 10))
    conf = emp.to_confusion()
    assert conf.kind == "monte-carlo" and conf.N == 7
    with pytest.raises(ValueError):
        EmpiricalConfusion(np.array([[6, 2], [1, 8]]), 8)
    with pytest.raises(ValueError):
        EmpiricalConfusion(np.array([[6, 2, 2], [1, 8, 2]]), 10)


@pytest.mark.parametrize("kw", [dict(N=0), dict(trials=0), dict(M=1), dict(M=5), dict(energy=-1.0),
                                dict(energy=float("inf")), dict(scenario="nope"), dict(shard_size=0),
                                dict(seed=-1)])
def test_config_validation(kw):
    base = dict(N=10, trials=10, seed=1, M=3, energy=1.0)
    base.update(kw)
    with pytest.raises(ValueError):
        SimConfig(**base)


def test_helstrom_proxy_allows_large_alphabets():
    config = SimConfig(10, 5000, SEED, 8, 2.0, "vp-helstrom-proxy")
    emp = simulate(config)
    assert np.max(np.abs(emp.sigma_deviations(analytic_reference(config)))) < 4.5
