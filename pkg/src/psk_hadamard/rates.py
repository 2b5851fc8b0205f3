"""Information rates of the PSK Hadamard receiver and its comparison curves."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import entr

from .detection import ROW_SUM_TOL, ConfusionMatrix, binary_success, build_confusion
from .hadamard import CodeParams, is_power_of_two
from .quadrature import DEFAULT_QUAD, QuadratureConfig, dyadic_breakpoints, integrate
from .spectra import LN2, classical_capacity, optimal_rate

CURVE_KINDS = (
    "optimal", "capacity", "vp-helstrom", "vp-realistic", "separable",
    "envelope-hel", "envelope-real", "delta-hel", "delta-real", "closed-form-real",
)
DEFAULT_LENGTHS = tuple(2**i for i in range(1, 11))
BASELINE_FLOOR = 1e-30


def _h(p) -> np.ndarray:
    """``h[P] = -P log2 P``."""
    return entr(np.asarray(p, dtype=float)) / LN2


def _channel_information(block: np.ndarray) -> float:
    """Mutual information (bits) of a channel with uniform inputs over the rows."""
    prior = 1.0 / block.shape[0]
    out = prior * block.sum(axis=0)
    mask = block > 0
    ratio = np.where(mask, block, 1.0) / np.where(out > 0, out, 1.0)[None, :]
    return max(float(np.sum(np.where(mask, block * np.log2(ratio), 0.0)) * prior), 0.0)


def mutual_info_rate(confusion: ConfusionMatrix, n: int) -> float:
    """Bits per mode of the Hadamard receiver built from a single-mode table.

    Uses the block structure of the ``M n``-input channel: a pulse on mode
    ``k`` is confused only with same-mode phases or the vacuum outcome, and
    the vacuum outcome carries no information.
    """
    dev = np.max(np.abs(confusion.row_sums() - 1))
    if confusion.kind != "monte-carlo" and dev > ROW_SUM_TOL:
        raise ValueError(f"confusion matrix is not row-stochastic (max deviation {dev:.2e})")
    if not is_power_of_two(n):
        raise ValueError("n must be a power of two")
    M = confusion.M
    P = confusion.phase_block
    col = P.sum(axis=0)
    mask = P > 0
    ratio = np.where(mask, M * n * P, 1.0) / np.where(col > 0, col, 1.0)[None, :]
    return max(float(np.sum(np.where(mask, P * np.log2(ratio), 0.0))) / (M * n), 0.0)


def full_alphabet_mutual_info(confusion: ConfusionMatrix, n: int) -> float:
    """Brute-force ``I(X;Y)/n`` over all ``M n`` inputs and ``M n + 1`` outputs.

    Builds the explicit transition table (inputs ``(k, m)``, outputs
    ``(k, m)`` plus the error outcome) and exploits no symmetry.
    """
    M = confusion.M
    size = M * n
    table = np.zeros((size, size + 1))
    for k in range(n):
        for m in range(M):
            x = k * M + m
            table[x, k * M: (k + 1) * M] = confusion.phase_block[m]
            table[x, size] = confusion.vacuum[m]
    p_y = table.mean(axis=0)
    info = 0.0
    for x in range(size):
        for y in range(size + 1):
            p = table[x, y]
            if p > 0:
                info += p * np.log2(p / p_y[y])
    return max(info / size / n, 0.0)


def separable_rate(M: int, E: float, quad: QuadratureConfig | None = None) -> float:
    """Symbol-by-symbol PSK with Helstrom detection on every mode (bits per mode)."""
    if M < 2:
        raise ValueError("separable rate needs M >= 2")
    table = build_confusion("separable", M, E, quad=quad)
    return _channel_information(table.phase_block)


# --------------------------------------------------------------------------
# Closed forms for the realistic receiver


def vp_real_p11_m3(energy: float, quad: QuadratureConfig | None = None) -> float:
    """``P_vp-real(1|1)`` for M=3 as a single integral.

    Both nested integrals collapse after exchanging the order of
    integration: ``1/2 int_0^{3E} P2(s/2) [exp(s/3 - E) - exp(s - 3E)] ds``.
    """
    if energy <= 0:
        return 0.0
    return integrate(
        lambda s: 0.5 * binary_success(s / 2) * (np.exp(s / 3 - energy) - np.exp(s - 3 * energy)),
        0.0, 3 * energy, quad or DEFAULT_QUAD, dyadic_breakpoints(0.0, 3 * energy),
    )


def vp_real_p11_m4(energy: float, quad: QuadratureConfig | None = None) -> float:
    """``P_vp-real(1|1)`` for M=4 as a single integral.

    ``int_0^{2E} P2(y) [2 exp(y/2 - E) - (2E - y + 2) exp(y - 2E)] dy``.
    """
    if energy <= 0:
        return 0.0
    return integrate(
        lambda y: binary_success(y) * (2 * np.exp(y / 2 - energy)
                                       - (2 * energy - y + 2) * np.exp(y - 2 * energy)),
        0.0, 2 * energy, quad or DEFAULT_QUAD, dyadic_breakpoints(0.0, 2 * energy),
    )


def closed_form_real_rate_m3(n: int, E: float, quad: QuadratureConfig | None = None) -> float:
    En = CodeParams(n, 3, E).pulse_energy
    if En == 0:
        return 0.0
    e1, e3 = np.exp(-En), np.exp(-3 * En)
    one_m_e1 = -np.expm1(-En)
    pair = -3 * np.expm1(-En) + np.expm1(-3 * En)  # 2 - 3e^-E + e^-3E
    p11 = vp_real_p11_m3(En, quad)
    rate = (_h(-np.expm1(-3 * En) / (3 * n)) + 2 * _h(pair / (6 * n))
            - _h(one_m_e1) / (3 * n)
            - 2 / (3 * n) * (_h((e1 - e3) / 2) + _h(p11) + _h(max(pair / 2 - p11, 0.0))))
    return max(float(rate), 0.0)


def closed_form_real_rate_m4(n: int, E: float, quad: QuadratureConfig | None = None) -> float:
    En = CodeParams(n, 4, E).pulse_energy
    if En == 0:
        return 0.0
    e1, e2, e4 = np.exp(-En), np.exp(-2 * En), np.exp(-4 * En)
    tail = 1 - 4 * e1 + (3 + 2 * En) * e2  # P(1|1) + P(3|1) of the VP table
    p11 = vp_real_p11_m4(En, quad)
    rate = (_h((3 + 4 * e1 - 6 * e2 - e4) / (12 * n))
            + _h((3 + 8 * e1 - 12 * e2 - 12 * En * e2 + e4) / (12 * n))
            + 2 * _h(tail / (4 * n))
            - (_h(-np.expm1(-En)) + _h((e1 - e4) / 3) + _h((3 - 4 * e1 + e4) / 3)) / (4 * n)
            - (_h(e1 - e2) + _h(2 * (e1 - (1 + En) * e2)) + _h(p11)
               + _h(max(tail - p11, 0.0))) / (2 * n))
    return max(float(rate), 0.0)


# --------------------------------------------------------------------------
# Receiver rates, envelopes and gains


def receiver_rate(kind: str, n: int, M: int, E: float, N: int | None = None,
                  quad: QuadratureConfig | None = None, method: str = "auto") -> float:
    """Hadamard receiver rate (bits per mode) for ``vp-helstrom`` or ``vp-realistic``.

    For the realistic receiver in the continuous limit with ``M`` in {3, 4},
    ``method="auto"`` uses the closed form; ``"generic"`` always goes
    through the confusion table.
    """
    if kind not in ("vp-helstrom", "vp-realistic"):
        raise ValueError(f"unsupported receiver kind {kind!r}")
    if method not in ("auto", "generic", "closed-form"):
        raise ValueError(f"unknown method {method!r}")
    params = CodeParams(n, M, E)
    if kind == "vp-realistic" and N is None and M in (3, 4) and method != "generic":
        fn = closed_form_real_rate_m3 if M == 3 else closed_form_real_rate_m4
        return fn(n, E, quad)
    if method == "closed-form":
        raise ValueError("closed form exists only for the realistic receiver with M in {3, 4}")
    return mutual_info_rate(build_confusion(kind, M, params.pulse_energy, N, quad), n)


def envelope_rate(kind: str, lengths, M: int, E: float, quad: QuadratureConfig | None = None,
                  N: int | None = None) -> tuple[float, int]:
    """Best rate over codeword lengths; ties go to the smaller length."""
    lengths = sorted(set(int(n) for n in lengths))
    if not lengths:
        raise ValueError("the set of codeword lengths is empty")
    best, arg = -np.inf, lengths[0]
    for n in lengths:
        r = receiver_rate(kind, n, M, E, N, quad)
        if r > best:
            best, arg = r, n
    return float(best), arg


def delta_rate(kind: str, lengths, M: int, E: float, quad: QuadratureConfig | None = None,
               N: int | None = None) -> float:
    """Relative gain of the ``M``-phase envelope over the two-phase one; NaN if undefined."""
    if M not in (3, 4):
        raise ValueError("delta rate is defined for M in {3, 4}")
    base, _ = envelope_rate(kind, lengths, 2, E, quad, N)
    if base < BASELINE_FLOOR:
        return float("nan")
    top, _ = envelope_rate(kind, lengths, M, E, quad, N)
    return (top - base) / base


# --------------------------------------------------------------------------
# Curves


def log_grid(emin: float = 1e-5, emax: float = 10.0, points_per_decade: int = 25) -> np.ndarray:
    """Log-spaced energies including both end points."""
    if not (0 < emin <= emax):
        raise ValueError("need 0 < emin <= emax")
    if points_per_decade < 1:
        raise ValueError("points_per_decade must be >= 1")
    decades = np.log10(emax) - np.log10(emin)
    count = max(int(round(decades * points_per_decade)) + 1, 1 if emin == emax else 2)
    grid = np.logspace(np.log10(emin), np.log10(emax), count)
    grid[0], grid[-1] = emin, emax  # exact end points, free of log/exp rounding
    return grid


@dataclass(frozen=True)
class RateCurve:
    kind: str
    M: int | None
    n: int | None
    energies: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise ValueError(f"unknown curve kind {self.kind!r}")
        e = np.asarray(self.energies, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if e.shape != v.shape or e.ndim != 1:
            raise ValueError("energies and values must be matching 1-D arrays")
        if np.any(np.diff(e) <= 0):
            raise ValueError("energies must be strictly increasing")
        if not self.kind.startswith("delta") and np.any(v < 0):
            raise ValueError("rates must be non-negative")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "values", v)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.energies.tolist(), self.values.tolist()))


def _point(kind: str, M, n, E, N, quad, lengths):
    if kind == "optimal":
        return optimal_rate(CodeParams(n, M, E))
    if kind == "capacity":
        return classical_capacity(E)
    if kind == "separable":
        return separable_rate(M, E, quad)
    if kind in ("vp-helstrom", "vp-realistic"):
        return receiver_rate(kind, n, M, E, N, quad)
    if kind == "closed-form-real":
        return receiver_rate("vp-realistic", n, M, E, None, quad, method="closed-form")
    base = "vp-helstrom" if kind.endswith("hel") else "vp-realistic"
    if kind.startswith("envelope"):
        return envelope_rate(base, lengths, M, E, quad, N)[0]
    return delta_rate(base, lengths, M, E, quad, N)


def sweep(fn, energies, threads: int = 1) -> np.ndarray:
    """Evaluate ``fn(E)`` over a grid; output order follows the grid."""
    energies = [float(e) for e in energies]
    if threads <= 1:
        return np.array([fn(e) for e in energies], dtype=float)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.array(list(pool.map(fn, energies)), dtype=float)


def rate_curve(kind: str, energies, M: int | None = None, n: int | None = None, N: int | None = None,
               quad: QuadratureConfig | None = None, lengths=DEFAULT_LENGTHS, threads: int = 1) -> RateCurve:
    if kind not in CURVE_KINDS:
        raise ValueError(f"unknown curve kind {kind!r}")
    energies = np.asarray(energies, dtype=float)
    values = sweep(lambda E: _point(kind, M, n, E, N, quad, lengths), energies, threads)
    meta = {"N": N if N is not None else "limit"}
    if kind.startswith(("envelope", "delta")):
        meta["lengths"] = ",".join(str(x) for x in sorted(lengths))
    keep_n = kind in ("optimal", "vp-helstrom", "vp-realistic", "closed-form-real")
    return RateCurve(kind, None if kind == "capacity" else M, n if keep_n else None, energies, values, meta)


def finite_n_rate_curve(M: int, n: int, N: int, energies, quad: QuadratureConfig | None = None,
                        kind: str = "vp-helstrom", threads: int = 1) -> RateCurve:
    """Receiver rate with an ``N``-step VP cascade in place of the continuous limit."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return rate_curve(kind, energies, M, n, N, quad, threads=threads)
