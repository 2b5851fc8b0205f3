"""Single-mode conditional detection probabilities.

A *PSK stage* is any callable ``stage(m, energy) -> array[..., M]`` giving the
row ``P(. | m)`` of guess probabilities when a pulse of phase ``m`` and energy
``energy`` is discriminated; it must be vectorised over ``energy``.  The
Helstrom and realistic (sequential nulling) stages below follow that
protocol, and the vacuum-or-pulse (VP) wrappers accept any of them.

Rows of a :class:`ConfusionMatrix` have ``M + 1`` columns, the last being the
"no click, guess vacuum" outcome.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .quadrature import DEFAULT_QUAD, QuadratureConfig, dyadic_breakpoints, integrate
from .spectra import psk_lambdas

KINDS = ("helstrom", "vp-helstrom", "vp-realistic", "realistic-psk", "separable", "monte-carlo")
REALISTIC_M = (2, 3, 4)
ROW_SUM_TOL = 1e-9
# Permitted contribution of the clamped (negative residual energy) region.
CLAMP_FLAG_TOL = 1e-8

PskStage = Callable[[int, np.ndarray], np.ndarray]


# --------------------------------------------------------------------------
# Helstrom bound


def helstrom_row(M: int, energy) -> np.ndarray:
    """Helstrom probabilities indexed by offset ``d = (l - m) mod M``.

    Vectorised over ``energy``; output shape ``np.shape(energy) + (M,)``.
    """
    root = np.sqrt(psk_lambdas(M, energy))
    j = np.arange(M)
    dft = np.exp(-2j * np.pi * np.outer(j, j) / M)
    amp = root @ dft / M
    return np.clip(np.abs(amp) ** 2, 0.0, 1.0)


def helstrom_prob(M: int, ell: int, m: int, energy: float) -> float:
    if not (0 <= ell < M and 0 <= m < M):
        raise IndexError(f"phase indices ({ell}, {m}) out of range for M={M}")
    if energy < 0:
        raise ValueError("energy must be non-negative")
    return float(helstrom_row(M, float(energy))[(ell - m) % M])


def binary_success(energy) -> np.ndarray:
    """Binary Helstrom success ``(1 + sqrt(1 - exp(-4 En))) / 2`` for ``|+-alpha>``."""
    energy = np.maximum(np.asarray(energy, dtype=float), 0.0)
    return 0.5 * (1.0 + np.sqrt(-np.expm1(-4.0 * energy)))


@dataclass(frozen=True)
class HelstromStage:
    """Optimal (square-root measurement) discrimination of ``M`` PSK states."""

    M: int

    def __call__(self, m: int, energy) -> np.ndarray:
        row = helstrom_row(self.M, np.maximum(np.asarray(energy, dtype=float), 0.0))
        return row[..., (np.arange(self.M) - m) % self.M]


# --------------------------------------------------------------------------
# Realistic sequential-nulling PSK detection
#
# Each nulling stage displaces the reflected fraction so that one hypothesis
# becomes vacuum, and discards it on a click.  The final two-state stage is a
# Dolinar receiver evaluated at half the residual squared separation of the
# two surviving amplitudes: P_hel^(2)(.; |a - b|^2 / 2).


def _binary_stage(separation_sq):
    return binary_success(0.5 * np.asarray(separation_sq, dtype=float))


def _p11_m3(energy: float, quad: QuadratureConfig) -> float:
    """``P(1|1)`` for M=3: ``int_{e^-3E}^1 dy P2(1|1; (3E + ln y)/2)``.

    Evaluated in the residual separation ``s = 3E + ln y``, where the
    integrand is ``exp(s - 3E) P2(s/2)`` on ``[0, 3E]``.
    """
    if energy <= 0:
        return 0.0
    top = 3 * energy
    return integrate(lambda x: np.exp(x - top) * binary_success(x / 2), 0.0, top, quad,
                     dyadic_breakpoints(0.0, top))


def _p11_m4_nested(energy: float, quad: QuadratureConfig) -> float:
    """``P(1|1)`` for M=4 as the literal double integral over ``t, t'``."""
    if energy <= 0:
        return 0.0
    inner_quad = quad.tightened()

    def outer(t):
        u = np.maximum(2 * energy + np.log(t), 0.0)
        return np.array([
            integrate(lambda tp: binary_success(np.maximum(ui + np.log(tp), 0.0)),
                      np.exp(-ui), 1.0, inner_quad)
            for ui in u
        ])

    return integrate(outer, np.exp(-2 * energy), 1.0, quad)


def _p11_m4(energy: float, quad: QuadratureConfig) -> float:
    """``P(1|1)`` for M=4 with the inner integral folded in.

    Substituting ``u = 2E + ln t`` and ``y = u + ln t'`` and swapping the
    order of integration gives the single integral
    ``int_0^{2E} (2E - y) exp(y - 2E) P2(1|1; y) dy``.
    """
    if energy <= 0:
        return 0.0
    two_e = 2 * energy
    return integrate(lambda y: (two_e - y) * np.exp(y - two_e) * binary_success(y), 0.0, two_e, quad,
                     dyadic_breakpoints(0.0, two_e))


def realistic_psk_prob_m3(ell: int, m: int, energy: float, quad: QuadratureConfig | None = None) -> float:
    return float(RealisticStage(3, quad or DEFAULT_QUAD)(m, float(energy))[ell])


def realistic_psk_prob_m4(
    ell: int, m: int, energy: float, quad: QuadratureConfig | None = None, nested: bool = False
) -> float:
    """Realistic M=4 probability; ``nested=True`` evaluates ``P(1|1)`` as a double integral."""
    return float(RealisticStage(4, quad or DEFAULT_QUAD, nested=nested)(m, float(energy))[ell])


def _reflect(row: np.ndarray, M: int) -> np.ndarray:
    """Row for sent phase ``-m`` from the row for ``m``: ``P(l|-m) = P(-l|m)``."""
    return row[..., (-np.arange(M)) % M]


@dataclass(frozen=True)
class RealisticStage:
    """Sequential nulling hierarchy (M=3: null 0 then Dolinar; M=4: null 0, null 2, Dolinar).

    With ``N=None`` every stage is in the continuous-splitting limit; with an
    integer ``N`` each nulling stage runs its own ``N``-step splitting budget.
    """

    M: int
    quad: QuadratureConfig = DEFAULT_QUAD
    N: int | None = None
    nested: bool = False

    def __post_init__(self):
        if self.M not in REALISTIC_M:
            raise ValueError(f"realistic PSK detection is defined for M in {REALISTIC_M}, got {self.M}")
        if self.N is not None and self.N < 1:
            raise ValueError("N must be >= 1")

    def __call__(self, m: int, energy) -> np.ndarray:
        if not 0 <= m < self.M:
            raise IndexError(f"phase index {m} out of range for M={self.M}")
        energy = np.maximum(np.asarray(energy, dtype=float), 0.0)
        if self.M == 2:
            return HelstromStage(2)(m, energy)
        if m > self.M // 2:
            return _reflect(self(self.M - m, energy), self.M)
        flat = energy.reshape(-1)
        if self.N is None:
            rows = self._rows_limit(m, flat)
        else:
            rows = self._rows_finite(m, flat)
        return rows.reshape(energy.shape + (self.M,))

    def _p11(self, energy: float) -> float:
        if self.M == 3:
            return _p11_m3(energy, self.quad)
        if self.nested:
            return _p11_m4_nested(energy, self.quad)
        return _p11_m4(energy, self.quad)

    def _rows_limit(self, m: int, en: np.ndarray) -> np.ndarray:
        rows = np.zeros((len(en), self.M))
        if m == 0:
            rows[:, 0] = 1.0
        elif self.M == 3:  # m == 1
            rows[:, 0] = np.exp(-3 * en)
            rows[:, 1] = [self._p11(e) for e in en]
            rows[:, 2] = 1.0 - rows[:, 0] - rows[:, 1]
        elif m == 2:  # M == 4
            rows[:, 0] = np.exp(-4 * en)
            rows[:, 2] = -np.expm1(-4 * en)
        else:  # M == 4, m == 1
            rows[:, 0] = np.exp(-2 * en)
            rows[:, 1] = [self._p11(e) for e in en]
            rows[:, 2] = 2 * en * np.exp(-2 * en)
            rows[:, 3] = 1.0 - rows[:, 0] - rows[:, 1] - rows[:, 2]
        return np.clip(rows, 0.0, 1.0)

    def _rows_finite(self, m: int, en: np.ndarray) -> np.ndarray:
        N = self.N
        q = np.arange(1, N + 1)
        left = (N - q) / N  # fraction of the residual state left after a click at step q
        rows = np.zeros((len(en), self.M))
        if m == 0:
            rows[:, 0] = 1.0
            return rows
        if self.M == 3:
            d1 = 3 * en  # |alpha_1 - alpha_0|^2
            w1 = _first_click_weights(d1, N)  # (K, N)
            succ = _binary_stage(d1[:, None] * left[None, :])  # |alpha_1 - alpha_2|^2 = 3E too
            rows[:, 0] = np.exp(-d1)
            rows[:, 1] = np.sum(w1 * succ, axis=1)
            rows[:, 2] = np.sum(w1 * (1 - succ), axis=1)
            return rows
        if m == 2:
            rows[:, 0] = np.exp(-4 * en)
            rows[:, 2] = -np.expm1(-4 * en)
            return rows
        # M = 4, m = 1: |a1-a0|^2 = |a1-a2|^2 = 2E, |a1-a3|^2 = 4E
        d1 = 2 * en
        w1 = _first_click_weights(d1, N)  # (K, N) over q1
        d2 = d1[:, None] * left[None, :]  # stage-2 separation after a click at q1
        w2 = _first_click_weights(d2, N)  # (K, N, N) over q2
        sep = 4 * en[:, None, None] * left[None, :, None] * left[None, None, :]
        succ = _binary_stage(sep)
        rows[:, 0] = np.exp(-d1)
        rows[:, 2] = np.sum(w1 * np.exp(-d2), axis=1)
        rows[:, 1] = np.einsum("kq,kqr,kqr->k", w1, w2, succ)
        rows[:, 3] = np.einsum("kq,kqr,kqr->k", w1, w2, 1 - succ)
        return rows


def _first_click_weights(energy, N: int, literal: bool = False) -> np.ndarray:
    """Probability that the first click of an ``N``-step cascade happens at step ``p``.

    Each step measures ``energy / N``; the last axis of the result runs over
    ``p = 1..N``.  ``literal=True`` uses the exponent ``p`` instead of
    ``p - 1`` in the no-click factor, which is not normalised.
    """
    energy = np.asarray(energy, dtype=float)
    p = np.arange(1, N + 1)
    step = energy[..., None] / N
    exponent = p if literal else p - 1
    return np.exp(-step * exponent) * -np.expm1(-step)


# --------------------------------------------------------------------------
# Vacuum-or-pulse wrapper


def vp_row_finite(m: int, energy: float, N: int, inner: PskStage, literal: bool = False) -> np.ndarray:
    """Full outcome row (``M`` phases + vacuum) of an ``N``-step VP detector."""
    if N < 1:
        raise ValueError("N must be >= 1")
    energy = float(energy)
    p = np.arange(1, N + 1)
    rows = np.asarray(inner(m, energy * (N - p) / N))
    phases = _first_click_weights(energy, N, literal) @ rows
    return np.append(phases, np.exp(-energy))


def vp_conditional_finite(M: int, ell: int, m: int, energy: float, N: int, inner: PskStage,
                          literal: bool = False) -> float:
    if not (0 <= ell < M and 0 <= m < M):
        raise IndexError(f"phase indices ({ell}, {m}) out of range for M={M}")
    return float(vp_row_finite(m, energy, N, inner, literal)[ell])


def vp_row_limit(m: int, energy: float, inner: PskStage, quad: QuadratureConfig | None = None) -> np.ndarray:
    """Full outcome row of the VP detector in the continuous-splitting limit."""
    quad = quad or DEFAULT_QUAD
    energy = float(energy)
    if energy < 0:
        raise ValueError("energy must be non-negative")
    lower = np.exp(-energy)
    # t = exp(x - E) with x the residual energy after the click; the t-form
    # hides all structure in [e^-E, e^(1-E)], the x-form spreads it out
    weight = lambda x: np.exp(x - energy)  # noqa: E731
    phases = integrate(lambda x: weight(x)[:, None] * np.asarray(inner(m, x)), 0.0, energy, quad,
                       dyadic_breakpoints(0.0, energy))
    M = np.asarray(inner(m, 0.0)).shape[-1]
    phases = np.broadcast_to(np.asarray(phases, dtype=float), (M,))
    return np.append(phases, lower)


def vp_conditional_limit(M: int, ell: int, m: int, energy: float, inner: PskStage,
                         quad: QuadratureConfig | None = None) -> float:
    if not (0 <= ell < M and 0 <= m < M):
        raise IndexError(f"phase indices ({ell}, {m}) out of range for M={M}")
    return float(vp_row_limit(m, energy, inner, quad)[ell])


# --------------------------------------------------------------------------
# Confusion matrices


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """``probs[m, l]`` = P(guess ``l`` | sent ``m``); column ``M`` is the vacuum guess."""

    M: int
    probs: np.ndarray
    energy: float
    kind: str
    N: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (self.M, self.M + 1):
            raise ValueError(f"expected shape {(self.M, self.M + 1)}, got {probs.shape}")
        object.__setattr__(self, "probs", probs)

    @property
    def phase_block(self) -> np.ndarray:
        return self.probs[:, : self.M]

    @property
    def vacuum(self) -> np.ndarray:
        return self.probs[:, self.M]

    def row_sums(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    def violations(self, tol: float = ROW_SUM_TOL) -> list[str]:
        """Invariant violations for this kind; empty when the table is valid."""
        out = []
        p = self.probs
        if np.any(p < -tol) or np.any(p > 1 + tol):
            out.append("entries outside [0, 1]")
        if self.kind != "monte-carlo" and np.max(np.abs(self.row_sums() - 1)) > tol:
            out.append(f"rows not stochastic (max dev {np.max(np.abs(self.row_sums() - 1)):.2e})")
        if self.kind in ("helstrom", "separable", "realistic-psk") and np.any(self.vacuum != 0):
            out.append("vacuum column must vanish")
        if self.kind.startswith("vp-") and np.max(np.abs(self.vacuum - np.exp(-self.energy))) > 1e-12:
            out.append("vacuum column differs from exp(-energy)")
        if self.kind == "helstrom":
            idx = np.arange(self.M)
            circ = self.phase_block[0][(idx[None, :] - idx[:, None]) % self.M]
            if np.max(np.abs(circ - self.phase_block)) > tol:
                out.append("Helstrom table is not circulant")
        return out


def _complete_rows(M: int, row_of: Callable[[int], np.ndarray]) -> np.ndarray:
    """Rows for every sent phase from rows ``0..M//2`` and reflection symmetry."""
    half = {m: row_of(m) for m in range(M // 2 + 1)}
    rows = []
    for m in range(M):
        if m in half:
            rows.append(half[m])
        else:
            src = half[M - m]
            rows.append(np.append(_reflect(src[:M], M), src[M:]))
    return np.array(rows)


def build_confusion(kind: str, M: int, energy: float, N: int | None = None,
                    quad: QuadratureConfig | None = None) -> ConfusionMatrix:
    """Assemble the ``M x (M+1)`` table of one detector.

    ``energy`` is the pulse energy for single-pulse kinds and the per-mode
    energy for ``separable``.  ``N=None`` selects the continuous-splitting
    limit for the VP kinds.
    """
    quad = quad or DEFAULT_QUAD
    if kind not in KINDS or kind == "monte-carlo":
        raise ValueError(f"cannot build an analytic table of kind {kind!r}")
    if M < 1:
        raise ValueError("M must be >= 1")
    if energy < 0:
        raise ValueError("energy must be non-negative")
    if kind in ("vp-realistic", "realistic-psk") and M not in REALISTIC_M:
        raise ValueError(f"kind {kind!r} supports M in {REALISTIC_M}, got M={M}")
    if N is not None and N < 1:
        raise ValueError("N must be >= 1")

    if kind in ("helstrom", "separable"):
        stage = HelstromStage(M)
        rows = np.array([np.append(stage(m, energy), 0.0) for m in range(M)])
    elif kind == "realistic-psk":
        stage = RealisticStage(M, quad, N)
        rows = _complete_rows(M, lambda m: np.append(stage(m, energy), 0.0))
    elif kind == "vp-helstrom":
        stage = HelstromStage(M)
        row0 = (vp_row_finite(0, energy, N, stage) if N is not None
                else vp_row_limit(0, energy, stage, quad))
        idx = np.arange(M)
        rows = np.column_stack([row0[:M][(idx[None, :] - idx[:, None]) % M], np.full(M, row0[M])])
    else:  # vp-realistic
        stage = RealisticStage(M, quad, N)
        rows = _complete_rows(M, lambda m: (vp_row_finite(m, energy, N, stage) if N is not None
                                            else vp_row_limit(m, energy, stage, quad)))
    return ConfusionMatrix(M, rows, float(energy), kind, N)
