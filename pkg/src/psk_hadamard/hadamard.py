"""Hadamard matrices, PSK Hadamard codewords and the receiver's passive transform."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

MAX_ORDER = 2**20
# Dense sign arrays beyond this order are refused (2**13 squared bytes = 64 MiB).
MAX_DENSE_ORDER = 2**13


def is_power_of_two(n) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (int(n) & (int(n) - 1)) == 0


def _parity_of_and(j: np.ndarray, k: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.bitwise_and(j, k)) & 1


@dataclass(frozen=True)
class HadamardMatrix:
    """Symmetric Sylvester-ordered Hadamard matrix, ``H[j, k] = (-1)**(j . k)``.

    Entries are generated on demand from the bitwise formula, so rows,
    columns and single entries are available for every supported order; the
    full sign array is materialised only when requested.
    """

    order: int

    def __post_init__(self):
        if not is_power_of_two(self.order):
            raise ValueError(f"Hadamard order must be a positive power of two, got {self.order!r}")
        if self.order > MAX_ORDER:
            raise ValueError(f"Hadamard order {self.order} exceeds the supported maximum {MAX_ORDER}")

    def entry(self, j: int, k: int) -> int:
        if not (0 <= j < self.order and 0 <= k < self.order):
            raise IndexError(f"index ({j}, {k}) out of range for order {self.order}")
        return -1 if bin(j & k).count("1") & 1 else 1

    def column(self, k: int) -> np.ndarray:
        if not 0 <= k < self.order:
            raise IndexError(f"column {k} out of range for order {self.order}")
        j = np.arange(self.order, dtype=np.int64)
        return (1 - 2 * _parity_of_and(j, np.int64(k))).astype(np.int8)

    # symmetric, so rows and columns coincide
    row = column

    @cached_property
    def entries(self) -> np.ndarray:
        if self.order > MAX_DENSE_ORDER:
            raise MemoryError(f"refusing to materialise a dense Hadamard matrix of order {self.order}")
        idx = np.arange(self.order, dtype=np.int64)
        return (1 - 2 * _parity_of_and(idx[:, None], idx[None, :])).astype(np.int8)


def hadamard_matrix(n: int) -> HadamardMatrix:
    return HadamardMatrix(n)


@dataclass(frozen=True)
class CodeParams:
    """A PSK Hadamard code instance: ``n`` modes, ``M`` phases, ``E`` photons per mode."""

    n: int
    M: int
    E: float

    def __post_init__(self):
        if not is_power_of_two(self.n):
            raise ValueError(f"n must be a power of two, got {self.n!r}")
        if not (isinstance(self.M, (int, np.integer)) and self.M >= 1):
            raise ValueError(f"M must be an integer >= 1, got {self.M!r}")
        if not (np.isfinite(self.E) and self.E >= 0):
            raise ValueError(f"E must be a finite non-negative number, got {self.E!r}")

    @property
    def pulse_energy(self) -> float:
        return self.n * self.E


@dataclass(frozen=True, eq=False)
class CoherentCodeword:
    """Product of single-mode coherent states, one complex amplitude per mode."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def __len__(self) -> int:
        return len(self.amplitudes)

    @property
    def mean_energy(self) -> float:
        """Mean photon number per mode."""
        return float(np.mean(np.abs(self.amplitudes) ** 2))

    def overlap(self, ket: "CoherentCodeword") -> complex:
        """Inner product ``<self|ket>``."""
        return coherent_overlap(self.amplitudes, ket.amplitudes)


def coherent_overlap(bra: np.ndarray, ket: np.ndarray) -> complex:
    """``<b|a>`` for multimode coherent states, from amplitudes alone."""
    b = np.asarray(bra, dtype=complex)
    a = np.asarray(ket, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("coherent states must have the same number of modes")
    return complex(np.exp(-0.5 * np.sum(np.abs(a) ** 2 + np.abs(b) ** 2 - 2 * np.conj(b) * a)))


def phase_amplitude(params: CodeParams, m: int, phase_of_alpha: float = 0.0) -> complex:
    """``alpha_m = exp(2 pi i m / M) alpha`` with ``|alpha|**2 = E``."""
    if not 0 <= m < params.M:
        raise IndexError(f"phase index {m} out of range for M={params.M}")
    return np.sqrt(params.E) * np.exp(1j * (phase_of_alpha + 2 * np.pi * m / params.M))


def codeword(params: CodeParams, k: int, m: int, phase_of_alpha: float = 0.0) -> CoherentCodeword:
    """Codeword ``|v_k(alpha_m)>``: column ``k`` of ``H_n`` times ``alpha_m``."""
    if not 0 <= k < params.n:
        raise IndexError(f"codeword index {k} out of range for n={params.n}")
    alpha_m = phase_amplitude(params, m, phase_of_alpha)
    return CoherentCodeword(hadamard_matrix(params.n).column(k) * alpha_m)


def ppm_codeword(params: CodeParams, k: int, m: int, phase_of_alpha: float = 0.0) -> CoherentCodeword:
    """PPM image ``|w_k(alpha_m)>``: a single pulse ``sqrt(n) alpha_m`` on mode ``k``."""
    if not 0 <= k < params.n:
        raise IndexError(f"codeword index {k} out of range for n={params.n}")
    amps = np.zeros(params.n, dtype=complex)
    amps[k] = np.sqrt(params.n) * phase_amplitude(params, m, phase_of_alpha)
    return CoherentCodeword(amps)


def _fwht(x: np.ndarray) -> np.ndarray:
    """Unnormalised fast Walsh-Hadamard transform in Sylvester (natural) order."""
    y = np.array(x, dtype=complex)
    n = len(y)
    h = 1
    while h < n:
        y = y.reshape(-1, 2, h)
        top = y[:, 0, :] + y[:, 1, :]
        bottom = y[:, 0, :] - y[:, 1, :]
        y = np.stack([top, bottom], axis=1).reshape(n)
        h *= 2
    return y


def apply_hadamard_transform(cw: CoherentCodeword, H: HadamardMatrix) -> CoherentCodeword:
    """Action of the passive unitary on coherent amplitudes: ``a -> H a / sqrt(n)``."""
    if len(cw) != H.order:
        raise ValueError(f"codeword has {len(cw)} modes but the transform has order {H.order}")
    return CoherentCodeword(_fwht(cw.amplitudes) / np.sqrt(H.order))
