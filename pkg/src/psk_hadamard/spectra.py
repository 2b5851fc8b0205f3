"""Spectrum of the average code state, optimal (Holevo) rate and channel capacity.

Everything here is a closed form in the PSK eigenvalues ``lambda_l(En)``
except :func:`holevo_rate_oracle`, which builds the Gram matrix of all
``M n`` codewords from coherent-state overlaps and diagonalises it
numerically.  The two routes share no code beyond :func:`codeword`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import entr

from .hadamard import CodeParams, codeword, coherent_overlap

LN2 = np.log(2.0)
# Rounding noise tolerated before an eigenvalue counts as genuinely negative.
NEGATIVE_SLACK = 1e-10
ORACLE_MAX_DIM = 256
# Pulse energy below which eigenvalues come from the Poisson series.
POISSON_SWITCH = 30.0


class NumericalConsistencyError(ArithmeticError):
    """An analytic quantity left its admissible range by more than rounding noise."""


def _clamp_nonnegative(values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if np.any(values < -NEGATIVE_SLACK):
        raise NumericalConsistencyError(f"{what} has negative entries: min={values.min():.3e}")
    return np.maximum(values, 0.0)


def _lambdas_poisson(M: int, energy: np.ndarray) -> np.ndarray:
    """``lambda_l = M * sum_{k = l mod M} Poisson(k; En)``, a positive series.

    No cancellation, so tiny eigenvalues keep full relative accuracy (their
    square roots enter the Helstrom probabilities).
    """
    kmax = int(np.max(energy, initial=0.0) + 12 * np.sqrt(np.max(energy, initial=0.0)) + 40)
    kmax = M * (kmax // M + 1)
    k = np.arange(kmax)
    pmf = stats.poisson.pmf(k, energy[..., None])
    return M * pmf.reshape(energy.shape + (kmax // M, M)).sum(axis=-2)


def _lambdas_dft(M: int, energy: np.ndarray) -> np.ndarray:
    h = np.arange(M)
    omega = np.exp(2j * np.pi * h / M)
    # terms[..., h] = exp(-(1 - omega^h) En)
    terms = np.exp(-np.multiply.outer(energy, 1.0 - omega))
    dft = np.exp(-2j * np.pi * np.outer(h, h) / M)  # [h, l]
    lam = terms @ dft
    if np.any(np.abs(lam.imag) > NEGATIVE_SLACK * max(1.0, M)):
        raise NumericalConsistencyError("PSK eigenvalues have a non-negligible imaginary part")
    return lam.real


def psk_lambdas(M: int, energy) -> np.ndarray:
    """PSK eigenvalues ``lambda_l`` for every ``l``, vectorised over ``energy``.

    Returns an array of shape ``np.shape(energy) + (M,)``.  Below
    ``POISSON_SWITCH`` the Poisson-series form is used; above it the
    exponential sum is evaluated directly and clamped.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    energy = np.asarray(energy, dtype=float)
    if np.any(energy < 0):
        raise ValueError("energy must be non-negative")
    small = energy < POISSON_SWITCH
    lam = np.empty(energy.shape + (M,))
    if np.any(small):
        lam[small] = _lambdas_poisson(M, energy[small])
    if not np.all(small):
        lam[~small] = _lambdas_dft(M, energy[~small])
    return np.minimum(_clamp_nonnegative(lam, "PSK eigenvalues"), float(M))


@dataclass(frozen=True)
class PskSpectrum:
    M: int
    energy: float
    lambdas: np.ndarray

    @property
    def vacuum_overlaps(self) -> np.ndarray:
        """``<0|d_l>`` for each eigenvector of the single-mode average state."""
        out = np.zeros(self.M)
        out[0] = np.exp(-self.energy / 2) * np.sqrt(self.M / self.lambdas[0])
        return out


def psk_eigenvalues(M: int, energy: float) -> PskSpectrum:
    if energy < 0:
        raise ValueError("energy must be non-negative")
    return PskSpectrum(M, float(energy), psk_lambdas(M, float(energy)))


def gram_eigenvalues_analytic(params: CodeParams) -> tuple[float, float]:
    """Eigenvalues of the Gram matrix of the ``|e_k^0>`` states.

    Returns ``(mu_0, mu_plus)``; ``mu_plus`` has multiplicity ``n - 1``.
    """
    n, M, En = params.n, params.M, params.pulse_energy
    lam0 = psk_lambdas(M, En)[0]
    c = M * np.exp(-En) / lam0
    return float(1 + (n - 1) * c), float(1 - c)


@dataclass(frozen=True)
class SpectrumPPM:
    """Eigenvalues of the PPM-domain average state with their multiplicities."""

    n: int
    M: int
    energy: float
    nu0_0: float
    nu0_plus: float
    nu_ell: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([[self.nu0_0, self.nu0_plus], self.nu_ell])

    @property
    def multiplicities(self) -> np.ndarray:
        return np.concatenate([[1, self.n - 1], np.full(self.M - 1, self.n)]).astype(int)

    def trace(self) -> float:
        return float(np.dot(self.values, self.multiplicities))

    def multiset(self) -> np.ndarray:
        """All ``M n`` eigenvalues, sorted ascending."""
        return np.sort(np.repeat(self.values, self.multiplicities))

    def entropy_bits(self) -> float:
        return float(np.dot(self.multiplicities, entr(self.values)) / LN2)


def ppm_spectrum(params: CodeParams) -> SpectrumPPM:
    n, M, En = params.n, params.M, params.pulse_energy
    lam = psk_lambdas(M, En)
    vac = M * np.exp(-En)
    nu0_0 = (lam[0] + (n - 1) * vac) / (M * n)
    nu0_plus = _clamp_nonnegative(lam[0] - vac, "nu0_plus") / (M * n)
    return SpectrumPPM(n, M, float(En), float(nu0_0), float(nu0_plus), lam[1:] / (M * n))


def optimal_rate(params: CodeParams) -> float:
    """Holevo rate of the PSK Hadamard code, in bits per mode."""
    if params.n * params.M == 1:
        return 0.0  # one codeword, pure state
    return ppm_spectrum(params).entropy_bits() / params.n


def codebook_gram(params: CodeParams) -> np.ndarray:
    """Gram matrix of all ``|v_k(alpha_m)>``, ordered with ``m`` major, ``k`` minor."""
    words = [codeword(params, k, m).amplitudes for m in range(params.M) for k in range(params.n)]
    size = len(words)
    gram = np.empty((size, size), dtype=complex)
    for i in range(size):
        for j in range(i, size):
            gram[i, j] = coherent_overlap(words[i], words[j])
            gram[j, i] = np.conj(gram[i, j])
    return gram


def holevo_rate_oracle(params: CodeParams) -> float:
    """Brute-force Holevo rate from the numerically diagonalised codebook Gram matrix."""
    size = params.n * params.M
    if size > ORACLE_MAX_DIM:
        raise ValueError(f"oracle limited to M n <= {ORACLE_MAX_DIM}, got {size}")
    gamma = np.linalg.eigvalsh(codebook_gram(params)) / size
    gamma = np.clip(gamma, 0.0, None)
    return float(np.sum(entr(gamma)) / LN2 / params.n)


def classical_capacity(E) -> float:
    """``g(E) = (E+1) log2(E+1) - E log2 E``, the pure-loss capacity per mode."""
    E = np.asarray(E, dtype=float)
    if np.any(E < 0):
        raise ValueError("E must be non-negative")
    out = (entr(E) - entr(E + 1)) / LN2
    return float(out) if out.ndim == 0 else out


def low_energy_rate(params: CodeParams) -> float:
    """First-order expansion of :func:`optimal_rate` for ``n E << 1``."""
    E, n, En = params.E, params.n, params.pulse_energy
    if params.M > 1:
        # (E - E ln E) / ln 2, the leading behaviour of C(E)
        return float((E + entr(E)) / LN2)
    # M = 1: lambda_0 = 1 exactly, so nu0_plus ~ En/n does not vanish at first order
    if En >= 1:
        raise ValueError("low-energy expansion for M=1 requires n*E < 1")
    spread = (n - 1) * En / n
    return float((entr(1.0 - spread) + (n - 1) * entr(En / n)) / LN2 / n)
