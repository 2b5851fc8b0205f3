"""Command-line front end: every computation as a CSV-emitting subcommand.

Each data file written with ``--out`` gets a ``<out>.manifest`` sidecar of
``key = value`` lines recording how it was produced.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import shlex
import sys
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import __version__
from .detection import binary_success, build_confusion
from .hadamard import CodeParams, HadamardMatrix, apply_hadamard_transform, codeword, is_power_of_two
from .quadrature import QuadratureConfig
from .rates import DEFAULT_LENGTHS, delta_rate, log_grid, receiver_rate, separable_rate
from .simulator import SCENARIOS, SimConfig, analytic_reference, extracted_energies, simulate
from .spectra import classical_capacity, holevo_rate_oracle, optimal_rate, ppm_spectrum

FLOAT_FMT = "%.17g"


class CliError(Exception):
    """Invalid user input; reported on stderr with exit status 2."""


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FMT % value
    return str(value)


def render_csv(columns: list[str], rows, comments: list[str]) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_manifest(path: str, entries: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        for key, value in entries.items():
            if not isinstance(value, str):
                value = json.dumps(value, sort_keys=True)
            fh.write(f"{key} = {value}\n")


def read_manifest(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            if " = " in line:
                key, value = line.rstrip("\n").split(" = ", 1)
                out[key] = value
    return out


# --------------------------------------------------------------------------
# Argument helpers


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _positive_float(text: str) -> float:
    value = float(text)
    if not (np.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _grid(args) -> np.ndarray:
    if args.energy is not None:
        return np.array([args.energy])
    emin = args.emin if args.emin is not None else 1e-5
    emax = args.emax if args.emax is not None else 10.0
    ppd = args.points_per_decade if args.points_per_decade is not None else 25
    try:
        return log_grid(emin, emax, ppd)
    except ValueError as exc:
        raise CliError(str(exc))


def _grid_spec(args) -> str:
    if args.energy is not None:
        return f"single E={_fmt(args.energy)}"
    return "log emin={} emax={} points_per_decade={}".format(
        _fmt(args.emin if args.emin is not None else 1e-5),
        _fmt(args.emax if args.emax is not None else 10.0),
        args.points_per_decade if args.points_per_decade is not None else 25,
    )


def _quad(args) -> QuadratureConfig:
    try:
        return QuadratureConfig(rel_tol=args.quad_rtol, abs_tol=args.quad_atol)
    except ValueError as exc:
        raise CliError(str(exc))


def _check_n(n: int) -> None:
    if not is_power_of_two(n):
        raise CliError(f"--n must be a power of two, got {n}")


def _sweep(fn: Callable[[float], tuple], energies, threads: int) -> list[tuple]:
    if threads <= 1:
        return [fn(float(e)) for e in energies]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, [float(e) for e in energies]))


# --------------------------------------------------------------------------
# Subcommands; each returns (columns, rows, comments, extra manifest entries)


def cmd_optimal_rate(args):
    _check_n(args.n)
    if args.M < 1:
        raise CliError("--M must be >= 1")

    def point(E):
        r = optimal_rate(CodeParams(args.n, args.M, E))
        c = classical_capacity(E)
        return (E, r, c, r / E, c / E)

    rows = _sweep(point, _grid(args), args.threads)
    return (["E", "R_opt", "C", "R_opt_over_E", "C_over_E"], rows,
            [f"optimal rate of the PSK Hadamard code, n={args.n} M={args.M}, bits per mode"], {})


def cmd_heatmap(args):
    if not args.E > 0:
        raise CliError("--E must be positive")
    for n in args.n_list:
        _check_n(n)
    if min(args.M_list) < 1:
        raise CliError("--M-list entries must be >= 1")
    rows = [(n, M, optimal_rate(CodeParams(n, M, args.E)) / args.E) for n in args.n_list for M in args.M_list]
    return ["n", "M", "R_opt_over_E"], rows, [f"R_opt/E at E={_fmt(args.E)}"], {}


def cmd_receiver_rate(args):
    quad = _quad(args)
    if args.kind == "separable":
        if args.M < 2:
            raise CliError("separable rate needs --M >= 2")
        fn = lambda E: (E, separable_rate(args.M, E, quad))  # noqa: E731
        label = f"separable PSK rate, M={args.M}"
    else:
        _check_n(args.n)
        if args.kind == "vp-realistic" and args.M not in (2, 3, 4):
            raise CliError("vp-realistic supports --M in {2, 3, 4}")
        if args.M < 2:
            raise CliError("--M must be >= 2")
        fn = lambda E: (E, receiver_rate(args.kind, args.n, args.M, E, args.N, quad))  # noqa: E731
        label = f"{args.kind} receiver rate, n={args.n} M={args.M} N={args.N or 'limit'}"
    rows = _sweep(fn, _grid(args), args.threads)
    return ["E", "rate"], rows, [label + ", bits per mode"], {}


def cmd_delta(args):
    quad = _quad(args)
    if args.M not in (3, 4):
        raise CliError("--M must be 3 or 4")
    for n in args.n_set:
        _check_n(n)
    kind = "vp-" + args.kind
    fn = lambda E: (E, delta_rate(kind, args.n_set, args.M, E, quad, args.N))  # noqa: E731
    rows = _sweep(fn, _grid(args), args.threads)
    lengths = ",".join(str(n) for n in sorted(set(args.n_set)))
    return (["E", "delta"], rows,
            [f"relative gain of the M={args.M} {kind} envelope over M=2, lengths {{{lengths}}}, "
             f"N={args.N or 'limit'}"], {})


def cmd_simulate(args):
    try:
        config = SimConfig(args.N, args.trials, args.seed, args.M, args.energy, args.scenario,
                           args.shard_size, args.threads)
    except ValueError as exc:
        raise CliError(str(exc))
    emp = simulate(config)
    ref = analytic_reference(config)
    z = emp.sigma_deviations(ref)
    stat, dof, pvalue = emp.chi_square(ref)
    rows = []
    M = config.M
    for m in range(M):
        for ell in range(M + 1):
            guess = "vacuum" if ell == M else ell
            rows.append((m, guess, emp.counts[m, ell], emp.probs[m, ell], emp.stderr[m, ell],
                         ref.probs[m, ell], z[m, ell]))
    comments = [
        f"scenario={config.scenario} M={M} energy={_fmt(config.energy)} N={config.N} "
        f"trials_per_row={config.trials} seed={config.seed}",
        f"chi2={_fmt(stat)} dof={dof} p_value={_fmt(pvalue)}",
    ]
    return (["sent", "guess", "count", "prob", "stderr", "analytic", "sigma_dev"], rows, comments,
            {"seed": str(config.seed), "chi2": _fmt(stat), "chi2_dof": str(dof), "chi2_p": _fmt(pvalue)})


# --------------------------------------------------------------------------
# Self-test


@dataclass(frozen=True)
class Invariant:
    name: str
    check: Callable[[], float]  # returns the observed deviation
    tol: float


def _trace_dev():
    return max(abs(ppm_spectrum(CodeParams(n, M, E)).trace() - 1)
               for n in (1, 4, 32) for M in (1, 3, 8) for E in (1e-4, 0.3, 5.0))


def _row_dev():
    worst = 0.0
    for kind in ("helstrom", "vp-helstrom", "vp-realistic", "realistic-psk"):
        for M in (2, 3, 4):
            for en in (0.0, 0.05, 1.0, 6.0):
                for N in (None, 20):
                    t = build_confusion(kind, M, en, N)
                    worst = max(worst, float(np.max(np.abs(t.row_sums() - 1))))
    return worst


def _vacuum_dev():
    return max(float(np.max(np.abs(build_confusion(k, M, en).vacuum - np.exp(-en))))
               for k in ("vp-helstrom", "vp-realistic") for M in (3, 4) for en in (0.1, 2.0))


def _binary_dev():
    return max(abs(build_confusion("helstrom", 2, en).probs[0, 0] - binary_success(en))
               for en in (0.01, 0.5, 3.0))


def _holevo_dev():
    return max(abs(optimal_rate(CodeParams(n, M, E)) - holevo_rate_oracle(CodeParams(n, M, E)))
               for n, M in ((2, 3), (4, 4), (8, 2)) for E in (0.01, 0.5))


def _hadamard_dev():
    H = HadamardMatrix(16).entries.astype(float)
    params = CodeParams(16, 3, 0.2)
    out = apply_hadamard_transform(codeword(params, 5, 2), HadamardMatrix(16)).amplitudes
    target = np.zeros(16, dtype=complex)
    target[5] = np.sqrt(16 * 0.2) * np.exp(2j * np.pi * 2 / 3)
    return max(float(np.max(np.abs(H @ H.T - 16 * np.eye(16)))), float(np.max(np.abs(out - target))))


def _closed_form_dev():
    return max(abs(receiver_rate("vp-realistic", n, M, E) - receiver_rate("vp-realistic", n, M, E, method="generic"))
               for M in (3, 4) for n in (2, 16) for E in (1e-3, 0.1))


def _bracket_dev():
    worst = -np.inf
    for M in (3, 4):
        for n in (2, 64):
            for E in (1e-4, 1e-2, 1.0):
                rr = receiver_rate("vp-realistic", n, M, E)
                rh = receiver_rate("vp-helstrom", n, M, E)
                ro = optimal_rate(CodeParams(n, M, E))
                worst = max(worst, rr - rh, rh - ro, ro - classical_capacity(E))
    return max(worst, 0.0)


def _energy_dev():
    return max(abs(extracted_energies(E, N).sum() - E) / E for E in (0.3, 7.0) for N in (1, 30, 100))


def _repro_dev():
    cfg = SimConfig(20, 3000, 7, 3, 1.0, "vp-realistic", shard_size=1000)
    a = simulate(cfg).counts
    b = simulate(SimConfig(20, 3000, 7, 3, 1.0, "vp-realistic", shard_size=1000, threads=2)).counts
    return float(np.max(np.abs(a - b)))


INVARIANTS = (
    Invariant("trace-normalization", _trace_dev, 1e-12),
    Invariant("row-stochasticity", _row_dev, 1e-9),
    Invariant("vp-vacuum-column", _vacuum_dev, 1e-12),
    Invariant("binary-helstrom-diagonal", _binary_dev, 1e-12),
    Invariant("holevo-oracle-equivalence", _holevo_dev, 1e-9),
    Invariant("hadamard-orthogonality-and-ppm-map", _hadamard_dev, 1e-12),
    Invariant("closed-form-vs-generic", _closed_form_dev, 1e-8),
    Invariant("rate-bracketing", _bracket_dev, 1e-10),
    Invariant("energy-bookkeeping", _energy_dev, 1e-9),
    Invariant("simulation-thread-independence", _repro_dev, 0.0),
)


def run_selftest(corrupt: bool = False, out=None) -> bool:
    out = out or sys.stdout
    all_ok = True
    for inv in INVARIANTS:
        # corrupted mode: a negative tolerance no deviation can satisfy
        tol = -1.0 if corrupt else inv.tol
        try:
            dev = float(inv.check())
            ok = dev <= tol
            detail = f"deviation={dev:.3e} tol={tol:.1e}"
        except Exception as exc:  # noqa: BLE001
            ok, detail = False, f"error: {exc}"
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'}  {inv.name:<36} {detail}", file=out)
    return all_ok


# --------------------------------------------------------------------------
# Parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output CSV path (default: stdout); also writes <out>.manifest")
    p.add_argument("--quad-rtol", type=_positive_float, default=1e-9)
    p.add_argument("--quad-atol", type=_positive_float, default=1e-12)
    p.add_argument("--threads", type=int, default=1)


def _add_grid(p: argparse.ArgumentParser) -> None:
    p.add_argument("--energy", type=_positive_float, help="single mean energy per mode")
    p.add_argument("--emin", type=_positive_float)
    p.add_argument("--emax", type=_positive_float)
    p.add_argument("--points-per-decade", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psk-hadamard", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimal-rate", help="optimal rate and capacity curves")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--M", type=int, default=4)
    _add_grid(p)
    _add_common(p)
    p.set_defaults(func=cmd_optimal_rate)

    p = sub.add_parser("heatmap", help="R_opt/E over a grid of (n, M)")
    p.add_argument("--E", "--energy", dest="E", type=float, default=0.05)
    p.add_argument("--n-list", type=_int_list, default=[1, 2, 4, 8, 16, 32, 64])
    p.add_argument("--M-list", type=_int_list, default=[1, 2, 3, 4, 5, 6, 7, 8])
    _add_common(p)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("receiver-rate", help="Hadamard receiver or separable rate curve")
    p.add_argument("--kind", choices=("vp-helstrom", "vp-realistic", "separable"), default="vp-helstrom")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--M", type=int, default=3)
    steps = p.add_mutually_exclusive_group()
    steps.add_argument("--N", type=int, help="finite number of splitting steps")
    steps.add_argument("--limit", action="store_true", help="continuous-splitting limit (default)")
    _add_grid(p)
    _add_common(p)
    p.set_defaults(func=cmd_receiver_rate)

    p = sub.add_parser("delta", help="relative envelope gain over M=2")
    p.add_argument("--M", type=int, default=3)
    p.add_argument("--kind", choices=("helstrom", "realistic"), default="helstrom")
    p.add_argument("--n-set", type=_int_list, default=list(DEFAULT_LENGTHS))
    p.add_argument("--N", type=int, help="finite number of splitting steps (default: limit)")
    _add_grid(p)
    _add_common(p)
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("simulate", help="Monte Carlo confusion table with analytic comparison")
    p.add_argument("--scenario", choices=SCENARIOS, default="vp-realistic")
    p.add_argument("--M", type=int, default=3)
    p.add_argument("--energy", type=float, default=1.0, help="pulse energy")
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--trials", type=int, default=100_000, help="trials per sent phase")
    p.add_argument("--seed", type=int, default=20261017)
    p.add_argument("--shard-size", type=int, default=10_000)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("selftest", help="run the invariant suite")
    p.add_argument("--inject-corrupt-tolerance", action="store_true",
                   help="test mode: replace every tolerance by an unsatisfiable one")
    p.set_defaults(func=None)
    return parser


def _grid_conflict(args) -> bool:
    return getattr(args, "energy", None) is not None and args.command != "simulate" and any(
        getattr(args, k, None) is not None for k in ("emin", "emax", "points_per_decade"))


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "selftest":
        return 0 if run_selftest(args.inject_corrupt_tolerance) else 1
    if _grid_conflict(args):
        parser.error("--energy cannot be combined with --emin/--emax/--points-per-decade")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    if getattr(args, "N", None) is not None and args.N < 1:
        parser.error("--N must be >= 1")

    start = time.perf_counter()
    try:
        columns, rows, comments, extra = args.func(args)
    except (CliError, ValueError) as exc:
        print(f"psk-hadamard {args.command}: error: {exc}", file=sys.stderr)
        return 2
    duration = time.perf_counter() - start
    text = render_csv(columns, rows, [f"psk-hadamard {__version__} {args.command}"] + comments)

    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
        params = {k: v for k, v in vars(args).items() if k not in ("func", "out", "threads")}
        manifest = {
            "command_line": shlex.join(["psk-hadamard"] + argv),
            "command": args.command,
            "parameters": params,
            "grid": _grid_spec(args) if hasattr(args, "emin") else "none",
            "quad_rtol": _fmt(args.quad_rtol),
            "quad_atol": _fmt(args.quad_atol),
            "seed": "none",
            "version": __version__,
            "wall_clock_seconds": f"{duration:.3f}",
            "columns": ",".join(columns),
        }
        manifest.update(extra)
        write_manifest(args.out + ".manifest", manifest)
    else:
        sys.stdout.write(text)
    return 0
