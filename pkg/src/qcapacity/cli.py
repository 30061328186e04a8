"""Command-line interface: ``qcapacity <command> [options]``.

Exit status: 0 on success (search finished, nothing found), 2 when a search
found what it was looking for (a superadditivity violation, a gap point),
1 on error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import entanglement_measures as em
from . import holevo_solver as hs
from . import search_harness as sh
from .errors import ConvergenceError
from .quantum_info import teleport_all_outcomes, teleport_roundtrip
from .qubit_channel import (
    QubitChannel,
    affine_channel,
    channel_to_line,
    fully_depolarizing_channel,
    identity_channel,
    lambda3,
    lambda4,
    pauli_channel,
    read_channel_file,
)

EXIT_OK, EXIT_ERROR, EXIT_FOUND = 0, 1, 2
THREADS_ENV = "QCAPACITY_THREADS"
NAMED = {
    "identity": identity_channel,
    "depolarizing": fully_depolarizing_channel,
    "lambda3": lambda3,
    "lambda4": lambda4,
}
COMMANDS = ("capacity", "engaging", "gap", "gap-scan", "superadd", "antisym",
            "lattice-convergence", "additivity-scan", "teleport")


class UsageError(Exception):
    pass


# -- parsing ------------------------------------------------------------------------

def _floats(text: str, n: int | None = None, sep: str = ",") -> list[float]:
    try:
        vals = [float(v) for v in text.replace(sep, " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from exc
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} numbers, got {len(vals)}")
    return vals


def _probs(text: str) -> list[float]:
    return _floats(text, 4)


def _matrix(text: str) -> list[list[float]]:
    rows = [r for r in text.split(";") if r.strip()]
    if len(rows) != 3:
        raise argparse.ArgumentTypeError("affine matrix needs three ';'-separated rows")
    return [_floats(r, 3, sep=" ") for r in rows]


def _vector(text: str) -> list[float]:
    return _floats(text, 3)


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from exc


def _digits(text: str) -> int:
    d = int(text)
    if not 1 <= d <= 17:
        raise argparse.ArgumentTypeError("--digits must be between 1 and 17")
    return d


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return v


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _add_channel_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("channel")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--pauli", type=_probs, metavar="P0,PX,PY,PZ",
                     help="Pauli channel with Kraus weights p0, px, py, pz")
    src.add_argument("--affine", type=_matrix, metavar='"a b c;d e f;g h i"',
                     help="linear part of the Bloch map, rows separated by ';'")
    src.add_argument("--channel-file", type=Path, metavar="PATH",
                     help="channel spec file (one channel per line)")
    src.add_argument("--named", choices=sorted(NAMED), help="built-in channel")
    g.add_argument("--shift", type=_vector, default=None, metavar='"cx cy cz"',
                   help="translation of the Bloch map (with --affine)")
    g.add_argument("--name", default=None, help="channel to pick from --channel-file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcapacity",
        description="Holevo capacity of qubit channels and entanglement checks.",
    )
    parser.add_argument("--digits", type=_digits, default=10,
                        help="significant digits in printed numbers (default 10, max 17)")
    parser.add_argument("--threads", type=int, default=_default_threads(),
                        help=f"worker cap (default from ${THREADS_ENV} or 1)")
    parser.add_argument("--output", type=Path, default=None, help="also write the record here")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("capacity", help="Holevo capacity of a qubit channel")
    _add_channel_args(p)
    p.add_argument("--tol", type=_positive, default=1e-9, help="target error")
    p.add_argument("--k", type=int, default=None,
                   help="solve only the lattice-restricted problem at this k")
    p.add_argument("--k-max", type=int, default=80)

    p = sub.add_parser("engaging", help="engaging inputs of the optimal ensemble")
    _add_channel_args(p)
    p.add_argument("--tol", type=_positive, default=1e-9)
    p.add_argument("--csv", type=Path, default=None)

    p = sub.add_parser("gap", help="E_N versus E_C for a Pauli channel pair state")
    p.add_argument("--p", type=_probs, required=True, metavar="P0,PX,PY,PZ")
    p.add_argument("--no-constraint", action="store_true",
                   help="skip the positivity-region constraint check")

    p = sub.add_parser("gap-scan", help="scan the probability simplex for E_N < E_C")
    p.add_argument("--grid-step", type=_positive, default=0.05)
    p.add_argument("--csv", type=Path, default=None)

    p = sub.add_parser("superadd", help="search for superadditivity violations of E_F")
    p.add_argument("--mode", choices=("random", "zero", "minimum"), default="random")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=_positive, default=0.05)
    p.add_argument("--trials", type=int, default=10, help="trials for --mode minimum")
    p.add_argument("--strategy", choices=tuple(sh.STRATEGIES), default="adaptive",
                   help="neighborhood rule for --mode minimum")
    p.add_argument("--square", action="store_true",
                   help="uniform square sampling instead of complex Gaussian")
    p.add_argument("--million", action="store_true", help="run 10^6 random samples")
    p.add_argument("--csv", type=Path, default=None)

    p = sub.add_parser("antisym", help="antisymmetric-state bounds and spectra")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--n", type=int, default=2, help="number of copies for the eigenvalue bound")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=_floats, default=None, metavar="P12,P13,P23",
                   help="weights of the three-pair state (d = 3)")

    p = sub.add_parser("lattice-convergence", help="restricted capacity along nested lattices")
    _add_channel_args(p)
    p.add_argument("--ks", type=_ints, default=[10, 20, 40, 80])
    p.add_argument("--csv", type=Path, default=None)
    p.add_argument("--plot-data", type=Path, default=None,
                   help="write (k, error) pairs for a log-log plot")

    p = sub.add_parser("additivity-scan", help="grid search of the tensor-square divergence")
    _add_channel_args(p)
    p.add_argument("--p-points", type=int, default=17)
    p.add_argument("--angle-points", type=int, default=9)
    p.add_argument("--csv", type=Path, default=None, help="p-slice maxima")

    p = sub.add_parser("teleport", help="d-level teleportation round trip")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exhaustive", action="store_true", help="check every measurement outcome")
    return parser


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def _renormalized(p: list[float]) -> list[float]:
    """Rescale rounded weights (e.g. 0.1667 for 1/6) that miss unit sum by < 1e-3."""
    total = sum(p)
    if abs(total - 1.0) <= 1e-12 or abs(total - 1.0) > 1e-3 or min(p) < 0:
        return p
    sys.stderr.write(f"note: weights sum to {total!r}; rescaled to 1\n")
    return [v / total for v in p]


def resolve_channel(args: argparse.Namespace) -> QubitChannel:
    if args.pauli is not None:
        return pauli_channel(*_renormalized(args.pauli))
    if args.affine is not None:
        return affine_channel(np.array(args.affine), args.shift or (0.0, 0.0, 0.0))
    if args.named is not None:
        return NAMED[args.named]()
    try:
        channels = read_channel_file(args.channel_file)
    except OSError as exc:
        raise UsageError(f"cannot read channel file: {exc}") from exc
    if args.name is None:
        if len(channels) != 1:
            raise UsageError("channel file holds several channels; pick one with --name")
        return channels[0]
    for c in channels:
        if c.name == args.name:
            return c
    raise UsageError(f"no channel named {args.name!r} in {args.channel_file}")


# -- output -------------------------------------------------------------------------

def _round(obj, digits: int):
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if not math.isfinite(v) else float(format(v, f".{digits}g")) + 0.0
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, dict):
        return {k: _round(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v, digits) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("output",)}
    return _round(cfg, 17)


class Emitter:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.digits = args.digits
        self.lines: list[str] = ["# qcapacity " + json.dumps(_config(args), sort_keys=True)]

    def record(self, payload: dict) -> None:
        self.lines.append(json.dumps(_round(payload, self.digits), sort_keys=True))

    def num(self, v: float) -> str:
        return format(float(v) + 0.0, f".{self.digits}g")

    def write_csv(self, path: Path | None, header: list[str], rows) -> None:
        if path is None:
            return
        with open(path, "w", newline="") as fh:
            fh.write(self.lines[0] + "\n")
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(self.num(v) if isinstance(v, float) else str(v) for v in row) + "\n")

    def finish(self) -> None:
        text = "\n".join(self.lines) + "\n"
        sys.stdout.write(text)
        if self.args.output is not None:
            self.args.output.write_text(text)


# -- commands -----------------------------------------------------------------------

def _cmd_capacity(args, out: Emitter) -> int:
    c = resolve_channel(args)
    if args.k is not None:
        result = hs.restricted_capacity(c, hs.build_lattice(args.k))
    else:
        try:
            result = hs.capacity(c, target_err=args.tol, k_max=args.k_max)
        except ConvergenceError as exc:
            if exc.best is None:
                raise
            sys.stderr.write(f"warning: {exc}; reporting best result so far\n")
            result = exc.best
    rec = result.as_dict()
    rec["channel"] = channel_to_line(c)
    out.record(rec)
    return EXIT_OK


def _cmd_engaging(args, out: Emitter) -> int:
    c = resolve_channel(args)
    result = hs.capacity(c, target_err=args.tol)
    rows = []
    for (p, b), d in zip(result.ensemble, result.divergences):
        polar, az = b.angles()
        rows.append([p, b.x, b.y, b.z, math.degrees(polar), math.degrees(az), d])
        out.record({"probability": p, "input": [b.x, b.y, b.z], "polar_deg": math.degrees(polar),
                    "azimuth_deg": math.degrees(az), "divergence": d})
    out.record({"engaging_number": result.engaging_number, "capacity": result.value,
                "average_input": [result.average_input.x, result.average_input.y, result.average_input.z],
                "average_output": [result.average_output.x, result.average_output.y,
                                   result.average_output.z]})
    out.write_csv(args.csv, ["probability", "x", "y", "z", "polar_deg", "azimuth_deg", "divergence"], rows)
    return EXIT_OK


def _cmd_gap(args, out: Emitter) -> int:
    rep = em.gap_condition(*_renormalized(args.p), check_king_ruskai=not args.no_constraint)
    out.record(rep.as_dict())
    return EXIT_OK


def _cmd_gap_scan(args, out: Emitter) -> int:
    rows = sh.gap_region_scan(args.grid_step)
    found = sum(r.gap_holds for r in rows)
    out.record({"points": len(rows), "gap_points": found})
    out.write_csv(args.csv, ["px", "py", "pz", "condition_value", "gap_holds"],
                  [[r.px, r.py, r.pz, r.condition_value, int(r.gap_holds)] for r in rows])
    return EXIT_FOUND if found else EXIT_OK


def _cmd_superadd(args, out: Emitter) -> int:
    if args.mode == "minimum":
        finals = []
        csv_parts = []
        for t in range(args.trials):
            traj = sh.minimum_search(args.seed, t, strategy=args.strategy)
            csv_parts.append(traj.to_csv())
            sv = sh.schmidt_coefficients_4x4(traj.final_state)
            finals.append(traj.final_margin)
            out.record({"trial": t, "final_margin": traj.final_margin, "stages": len(traj.steps) - 1,
                        "schmidt": sv.tolist()})
        found = sum(m < -sh.VIOLATION_TOL for m in finals)
        out.record({"mode": "minimum", "trials": args.trials, "violations": found,
                    "max_final_margin": max(finals), "min_final_margin": min(finals)})
        if args.csv is not None:
            args.csv.write_text(out.lines[0] + "\n" + "".join(csv_parts))
        return EXIT_FOUND if found else EXIT_OK
    n = 1_000_000 if args.million else args.samples
    if args.mode == "random":
        rep = sh.random_search(n, args.seed, square=args.square, workers=args.threads)
    else:
        rep = sh.zero_neighborhood_search(args.epsilon, n, args.seed, square=args.square,
                                          workers=args.threads)
    out.record(rep.as_dict())
    if args.csv is not None:
        args.csv.write_text(out.lines[0] + "\n" + rep.to_csv())
    return EXIT_FOUND if rep.violations else EXIT_OK


def _cmd_antisym(args, out: Emitter) -> int:
    d, n = args.d, args.n
    rec = {"d": d, "lower_bound": em.antisym_lower_bound(d)}
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([args.seed, d, n])))
    worst = 0.0
    for _ in range(args.samples):
        psi = em.random_antisym_state(d, n, rng)
        worst = max(worst, em.max_reduced_eigenvalue(psi, d, n))
    rec.update({"n": n, "samples": args.samples, "max_reduced_eigenvalue": worst,
                "eigenvalue_bound": ((d - 1) / d) ** n})
    if args.p is not None:
        if len(args.p) != 3:
            raise UsageError("--p needs three weights p12,p13,p23")
        spec = em.antisym_pair_spectrum(*args.p)
        rec.update({"pair_weights": list(spec.p), "block_eigenvalues": list(spec.block_eigenvalues),
                    "pair_entropy": spec.entropy})
    out.record(rec)
    return EXIT_OK


def _cmd_lattice_convergence(args, out: Emitter) -> int:
    c = resolve_channel(args)
    ref = hs.capacity(c).value
    rows = hs.convergence_table(c, args.ks, reference=ref)
    for r in rows:
        out.record({"k": r.k, "c_k": r.restricted, "bound": r.error_bound, "error": ref - r.restricted})
    out.record({"refined": ref})
    out.write_csv(args.csv, ["k", "c_k", "bound", "error"],
                  [[r.k, r.restricted, r.error_bound, ref - r.restricted] for r in rows])
    if args.plot_data is not None:
        args.plot_data.write_text("".join(f"{r.k} {out.num(max(ref - r.restricted, 0.0))}\n" for r in rows))
    return EXIT_OK


def _cmd_additivity_scan(args, out: Emitter) -> int:
    c = resolve_channel(args)
    cap = hs.capacity(c)
    scan = hs.additivity_scan(c, cap.average_output, args.p_points, args.angle_points)
    a = scan.argmax
    out.record({"capacity": cap.value, "twice_capacity": 2 * cap.value, "max_divergence": scan.max_value,
                "excess": scan.max_value - 2 * cap.value, "points": scan.points,
                "argmax": {"p": a.p, "theta_u": a.theta_u, "phi_u": a.phi_u, "theta_v": a.theta_v,
                           "phi_v": a.phi_v, "nu": a.nu}})
    out.write_csv(args.csv, ["p", "slice_max"], [[float(p), float(v)] for p, v in
                                                 zip(scan.p_values, scan.p_slice_max)])
    return EXIT_FOUND if scan.max_value > 2 * cap.value + 1e-6 else EXIT_OK


def _cmd_teleport(args, out: Emitter) -> int:
    d = args.d
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([args.seed, d])))
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    psi = z / np.linalg.norm(z)
    if args.exhaustive:
        worst = 1.0
        for (x, y), prob, fid in teleport_all_outcomes(d, psi):
            worst = min(worst, fid)
            out.record({"outcome": [x, y], "probability": prob, "fidelity": fid})
        out.record({"d": d, "outcomes": d * d, "min_fidelity": worst})
    else:
        _, fid, outcome = teleport_roundtrip(d, psi, seed=args.seed)
        out.record({"d": d, "outcome": list(outcome), "fidelity": fid})
    return EXIT_OK


HANDLERS = {
    "capacity": _cmd_capacity,
    "engaging": _cmd_engaging,
    "gap": _cmd_gap,
    "gap-scan": _cmd_gap_scan,
    "superadd": _cmd_superadd,
    "antisym": _cmd_antisym,
    "lattice-convergence": _cmd_lattice_convergence,
    "additivity-scan": _cmd_additivity_scan,
    "teleport": _cmd_teleport,
}


def run(args: argparse.Namespace) -> int:
    out = Emitter(args)
    try:
        status = HANDLERS[args.command](args, out)
    except (UsageError, ValueError, RuntimeError, ArithmeticError) as exc:
        sys.stderr.write(f"qcapacity {args.command}: error: {exc}\n")
        return EXIT_ERROR
    out.finish()
    return status


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors exit with 2; remap to 1
        code = exc.code if isinstance(exc.code, int) else 1
        return EXIT_OK if code == 0 else EXIT_ERROR
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
