"""PSK Hadamard codes: optimal rates, vacuum-or-pulse receiver rates and Monte Carlo checks."""

__version__ = "0.1.0"

from .hadamard import CodeParams, HadamardMatrix, codeword, hadamard_matrix, ppm_codeword
from .spectra import classical_capacity, holevo_rate_oracle, optimal_rate, ppm_spectrum, psk_eigenvalues
from .detection import ConfusionMatrix, build_confusion, helstrom_prob
from .rates import delta_rate, envelope_rate, log_grid, mutual_info_rate, receiver_rate
from .simulator import SimConfig, simulate

__all__ = [
    "__version__", "CodeParams", "HadamardMatrix", "codeword", "hadamard_matrix", "ppm_codeword",
    "classical_capacity", "holevo_rate_oracle", "optimal_rate", "ppm_spectrum", "psk_eigenvalues",
    "ConfusionMatrix", "build_confusion", "helstrom_prob",
    "delta_rate", "envelope_rate", "log_grid", "mutual_info_rate", "receiver_rate",
    "SimConfig", "simulate",
]
