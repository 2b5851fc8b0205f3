"""Monte Carlo simulation of the vacuum-or-pulse cascade and the nulling hierarchy.

Photodetection is simulated at the click/no-click level: a detector facing a
coherent amplitude ``b`` clicks with probability ``1 - exp(-|b|^2)``.  All
amplitudes are tracked explicitly through the beam-splitter schedule, so the
simulation shares no probability formulas with :mod:`.detection` except the
binary Helstrom success probability of the final two-state stage.

Trials are split into fixed-size shards, each with its own random stream
spawned from the run seed, and shard counts are merged in shard order.  The
result therefore does not depend on the number of worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .detection import ConfusionMatrix, _binary_stage, binary_success, build_confusion, helstrom_row

SCENARIOS = ("vp-helstrom-proxy", "vp-realistic", "realistic-psk-only")
DEFAULT_SHARD = 10_000
# Cells whose expected count falls below this are pooled per row for the chi-square test.
MIN_EXPECTED = 5.0

# decide(rng, m, amplitudes) -> guessed phase per trial
InnerDecision = Callable[[np.random.Generator, int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SimConfig:
    N: int
    trials: int
    seed: int
    M: int
    energy: float
    scenario: str = "vp-realistic"
    shard_size: int = DEFAULT_SHARD
    threads: int = 1

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.shard_size < 1:
            raise ValueError("shard_size must be >= 1")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if self.scenario != "vp-helstrom-proxy" and self.M not in (2, 3, 4):
            raise ValueError("nulling scenarios support M in {2, 3, 4}")
        if not (np.isfinite(self.energy) and self.energy >= 0):
            raise ValueError("energy must be finite and non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True, eq=False)
class EmpiricalConfusion:
    """Counts ``counts[m, l]`` of guess ``l`` (column ``M`` = vacuum) for sent phase ``m``."""

    counts: np.ndarray
    trials_per_row: int
    energy: float = 0.0
    N: int | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[1] != counts.shape[0] + 1:
            raise ValueError("counts must have shape (M, M + 1)")
        if np.any(counts.sum(axis=1) != self.trials_per_row):
            raise ValueError("every row must contain exactly trials_per_row counts")
        object.__setattr__(self, "counts", counts)

    @property
    def M(self) -> int:
        return self.counts.shape[0]

    @property
    def probs(self) -> np.ndarray:
        return self.counts / self.trials_per_row

    @property
    def stderr(self) -> np.ndarray:
        p = self.probs
        return np.sqrt(p * (1 - p) / self.trials_per_row)

    def to_confusion(self) -> ConfusionMatrix:
        return ConfusionMatrix(self.M, self.probs, self.energy, "monte-carlo", self.N)

    def sigma_deviations(self, reference: ConfusionMatrix) -> np.ndarray:
        """``|observed - expected|`` in units of the reference binomial standard deviation.

        Cells with an exactly degenerate reference (probability 0 or 1) give
        0 if matched exactly and ``inf`` otherwise.
        """
        T = self.trials_per_row
        p = np.clip(reference.probs, 0.0, 1.0)
        sigma = np.sqrt(T * p * (1 - p))
        diff = np.abs(self.counts - T * p)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(sigma > 0, diff / np.where(sigma > 0, sigma, 1.0), np.where(diff < 0.5, 0.0, np.inf))
        return z

    def chi_square(self, reference: ConfusionMatrix) -> tuple[float, int, float]:
        """Pearson goodness of fit of all rows against ``reference``: (statistic, dof, p-value)."""
        T = self.trials_per_row
        stat, dof = 0.0, 0
        for obs_row, p_row in zip(self.counts, np.clip(reference.probs, 0.0, 1.0)):
            expected = T * p_row / p_row.sum()
            small = expected < MIN_EXPECTED
            obs = list(obs_row[~small])
            exp = list(expected[~small])
            if small.any():
                obs.append(obs_row[small].sum())
                exp.append(expected[small].sum())
            obs, exp = np.array(obs, dtype=float), np.array(exp)
            live = exp > 0
            if np.any(obs[~live] > 0):
                return float("inf"), dof, 0.0
            stat += float(np.sum((obs[live] - exp[live]) ** 2 / exp[live]))
            dof += int(live.sum()) - 1
        pvalue = float(stats.chi2.sf(stat, dof)) if dof > 0 else (1.0 if stat == 0 else 0.0)
        return stat, dof, pvalue


# --------------------------------------------------------------------------
# Beam-splitter cascade


def reflectivity(p: int, N: int) -> float:
    """``eta_p`` of step ``p``: ``eta_1 = 1/N`` and ``eta_p = eta_{p-1} / theta_{p-1}``."""
    if not 1 <= p <= N:
        raise ValueError(f"step {p} outside 1..{N}")
    return 1.0 / (N - p + 1)


def reflectivity_schedule(N: int) -> np.ndarray:
    """The recursion ``eta_p = eta_{p-1} / (1 - eta_{p-1})`` evaluated step by step."""
    eta = np.empty(N)
    eta[0] = 1.0 / N
    for p in range(1, N):
        eta[p] = eta[p - 1] / (1.0 - eta[p - 1])
    return eta


def extracted_energies(energy: float, N: int) -> np.ndarray:
    """Energy sent to the detector at each step of a no-click trajectory."""
    out = np.empty(N)
    left = float(energy)
    for p in range(1, N + 1):
        eta = reflectivity(p, N)
        out[p - 1] = eta * left
        left *= 1.0 - eta
    return out


def run_cascade(rng: np.random.Generator, signal: np.ndarray, null: np.ndarray, N: int):
    """Split ``signal`` over ``N`` steps, displacing each reflected part by ``-null``.

    ``signal`` and ``null`` hold one complex amplitude per trial, at the scale
    of the state entering the cascade.  Returns ``(clicked, remaining)``:
    whether a click occurred, and the transmitted signal amplitude right
    after the clicking step (zero where there was no click).
    """
    sig = np.array(signal, dtype=complex)
    nul = np.array(null, dtype=complex)
    clicked = np.zeros(sig.shape, dtype=bool)
    remaining = np.zeros(sig.shape, dtype=complex)
    active = np.arange(sig.size)
    for p in range(1, N + 1):
        if active.size == 0:
            break
        eta = reflectivity(p, N)
        theta = 1.0 - eta
        reflected = np.sqrt(eta) * (sig[active] - nul[active])
        click = rng.random(active.size) < -np.expm1(-np.abs(reflected) ** 2)
        sig[active] *= np.sqrt(theta)
        nul[active] *= np.sqrt(theta)
        hit = active[click]
        clicked[hit] = True
        remaining[hit] = sig[hit]
        active = active[~click]
    return clicked, remaining


# --------------------------------------------------------------------------
# Inner phase decisions


@dataclass(frozen=True)
class HelstromProxy:
    """Draws the guess from the Helstrom row at each trial's residual energy."""

    M: int

    def __call__(self, rng: np.random.Generator, m: int, amps: np.ndarray) -> np.ndarray:
        rows = helstrom_row(self.M, np.abs(amps) ** 2)  # indexed by offset
        cdf = np.cumsum(rows, axis=-1)
        cdf[..., -1] = 1.0
        u = rng.random(len(amps))
        offset = np.argmax(u[:, None] < cdf, axis=1)
        return (m + offset) % self.M


def _binary_decision(rng, true_amp, other_amp, true_idx, other_idx):
    success = _binary_stage(np.abs(true_amp - other_amp) ** 2)
    right = rng.random(len(true_amp)) < success
    return np.where(right, true_idx, other_idx)


@dataclass(frozen=True)
class NullingHierarchy:
    """Sequential nulling: M=3 nulls 0 then runs Dolinar on {1, 2};
    M=4 nulls 0, then 2, then runs Dolinar on {1, 3}.  M=2 is Dolinar alone.

    Each nulling stage uses its own ``N``-step cascade.
    """

    M: int
    N: int

    def __call__(self, rng: np.random.Generator, m: int, amps: np.ndarray) -> np.ndarray:
        M = self.M
        amps = np.asarray(amps, dtype=complex)
        # amplitude of hypothesis j at the scale of the received state
        hyp = lambda j, a: a * np.exp(2j * np.pi * (j - m) / M)  # noqa: E731
        guesses = np.zeros(len(amps), dtype=np.int64)
        if M == 2:
            # plain Helstrom for |+-a>, not the hierarchy's binary-stage convention
            right = rng.random(len(amps)) < binary_success(np.abs(amps) ** 2)
            return np.where(right, m, 1 - m)
        clicked, amps1 = run_cascade(rng, amps, hyp(0, amps), self.N)
        guesses[~clicked] = 0
        idx = np.flatnonzero(clicked)
        if M == 3:
            other = {0: 1, 1: 2, 2: 1}[m]
            a = amps1[idx]
            guesses[idx] = _binary_decision(rng, a, hyp(other, a), m, other)
            return guesses
        a = amps1[idx]
        clicked2, amps2 = run_cascade(rng, a, hyp(2, a), self.N)
        guesses[idx[~clicked2]] = 2
        idx2 = idx[clicked2]
        b = amps2[clicked2]
        other = {0: 1, 1: 3, 2: 1, 3: 1}[m]
        guesses[idx2] = _binary_decision(rng, b, hyp(other, b), m, other)
        return guesses


# --------------------------------------------------------------------------
# Drivers


def _shard_sizes(trials: int, shard: int) -> list[int]:
    full, rest = divmod(trials, shard)
    return [shard] * full + ([rest] if rest else [])


def _run_rows(config: SimConfig, row_counts: Callable[[np.random.Generator, int, int], np.ndarray]) -> np.ndarray:
    """Fill every row from independent shards; ``row_counts(rng, m, size)`` returns ``M + 1`` counts."""
    M = config.M
    sizes = _shard_sizes(config.trials, config.shard_size)
    row_seeds = np.random.SeedSequence(config.seed).spawn(M)
    jobs = [(m, seq, size) for m in range(M) for seq, size in zip(row_seeds[m].spawn(len(sizes)), sizes)]

    def work(job):
        m, seq, size = job
        return m, row_counts(np.random.default_rng(seq), m, size)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    counts = np.zeros((M, M + 1), dtype=np.int64)
    for m, c in results:
        counts[m] += c
    return counts


def _pulse(config: SimConfig, m: int, size: int) -> np.ndarray:
    amp = np.sqrt(config.energy) * np.exp(2j * np.pi * m / config.M)
    return np.full(size, amp, dtype=complex)


def simulate_vp(config: SimConfig, inner_decision: InnerDecision | None = None) -> EmpiricalConfusion:
    """Vacuum-or-pulse cascade followed by ``inner_decision`` on the residual pulse.

    Without an explicit decision the scenario picks one: the Helstrom proxy
    or the nulling hierarchy.
    """
    if inner_decision is None:
        if config.scenario == "vp-helstrom-proxy":
            inner_decision = HelstromProxy(config.M)
        else:
            inner_decision = NullingHierarchy(config.M, config.N)
    M = config.M

    def row_counts(rng, m, size):
        pulse = _pulse(config, m, size)
        clicked, residual = run_cascade(rng, pulse, np.zeros(size, dtype=complex), config.N)
        guesses = np.full(size, M, dtype=np.int64)
        guesses[clicked] = inner_decision(rng, m, residual[clicked])
        return np.bincount(guesses, minlength=M + 1)

    return EmpiricalConfusion(_run_rows(config, row_counts), config.trials, config.energy, config.N)


def simulate_nulling_hierarchy(M: int, energy: float, N: int, trials: int, seed: int,
                               shard_size: int = DEFAULT_SHARD, threads: int = 1) -> EmpiricalConfusion:
    """The nulling hierarchy alone, on a pulse of energy ``energy`` (no VP stage)."""
    if M not in (2, 3, 4):
        raise ValueError("the nulling hierarchy is simulated for M in {2, 3, 4}")
    config = SimConfig(N, trials, seed, M, energy, "realistic-psk-only", shard_size, threads)
    decide = NullingHierarchy(M, N)

    def row_counts(rng, m, size):
        guesses = decide(rng, m, _pulse(config, m, size))
        return np.bincount(guesses, minlength=M + 1)

    return EmpiricalConfusion(_run_rows(config, row_counts), trials, energy, N)


def simulate(config: SimConfig) -> EmpiricalConfusion:
    if config.scenario == "realistic-psk-only":
        return simulate_nulling_hierarchy(config.M, config.energy, config.N, config.trials,
                                          config.seed, config.shard_size, config.threads)
    return simulate_vp(config)


def analytic_reference(config: SimConfig) -> ConfusionMatrix:
    """Finite-``N`` analytic table matching the simulated scenario."""
    kind = {"vp-helstrom-proxy": "vp-helstrom", "vp-realistic": "vp-realistic",
            "realistic-psk-only": "realistic-psk"}[config.scenario]
    return build_confusion(kind, config.M, config.energy, N=config.N)
