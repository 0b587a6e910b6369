"""Command-line front end: sweeps, theory curves, file estimation, selftest.

Exit codes: 0 success, 1 usage error, 2 runtime or numerical error,
3 selftest failure.  All numeric CSV output carries 17 significant
digits so doubles round-trip exactly, and every result file is written
next to a JSON manifest sufficient to reproduce it bitwise.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, selftest
from .estimators import brute_force, mackenthun, pilot_only, viterbi_viterbi
from .model import FramePlan, ReceivedFrame, snr_to_kappa
from .simulate import SweepConfig, run_sweep
from .theory import (
    TheoryInput,
    TheoryRangeError,
    constants_gaussian,
    predict,
)

__all__ = ["main", "console_main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_SELFTEST = 3

ESTIMATE_HEADER = ["index", "re_y", "im_y", "is_pilot", "re_p", "im_p"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise UsageError(message)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def parse_snr_grid(text: str) -> tuple[float, ...]:
    """Parse ``start:step:stop`` (inclusive) or a single SNR value."""
    parts = text.split(":")
    if len(parts) == 1:
        return (float(parts[0]),)
    if len(parts) != 3:
        raise UsageError(f"bad SNR grid {text!r}; expected start:step:stop")
    start, step, stop = (float(p) for p in parts)
    if step <= 0:
        raise UsageError("SNR grid step must be positive")
    if stop < start:
        raise UsageError("SNR grid stop must not precede start")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(float(start + k * step) for k in range(count))


def _write_manifest(out_path: Path, config_dict: dict, argv: list[str]) -> None:
    manifest = {
        "artifact": "pskest",
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "command": argv,
        "config": config_dict,
        "outputs": {"csv": str(out_path)},
    }
    out_path.with_suffix(out_path.suffix + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, default=str) + "\n"
    )


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _cmd_simulate(args, argv) -> int:
    config = SweepConfig(
        M=args.M,
        L=args.L,
        pilot_count=args.pilots,
        snr_grid_db=parse_snr_grid(args.snr),
        trials=args.trials,
        rho0=args.rho0,
        master_seed=args.seed,
        estimator=args.estimator,
        beta=args.beta,
        noise=args.noise,
        theory_mc_samples=args.theory_samples,
        threads=args.threads,
    )
    result = run_sweep(config)
    header = [
        "estimator", "snr_db", "kappa",
        "mse_phase_sim", "se_phase", "var_amp_sim", "se_amp",
        "amp_mean_sim", "se_amp_mean", "cross_cov_sim", "se_cross",
        "mse_phase_theory", "var_amp_theory", "amp_mean_theory", "theory_status",
    ]
    lines = [",".join(header)]
    for row in result.rows:
        lines.append(
            ",".join(
                [config.estimator]
                + [
                    _fmt(v)
                    for v in (
                        row.snr_db, row.kappa,
                        row.mse_phase_sim, row.se_phase,
                        row.var_amp_sim, row.se_amp,
                        row.amp_mean_sim, row.se_amp_mean,
                        row.cross_cov_sim, row.se_cross,
                        row.mse_phase_theory, row.var_amp_theory,
                        row.amp_mean_theory,
                    )
                ]
                + [row.theory_status]
            )
        )
    out = Path(args.out)
    out.write_text("\n".join(lines) + "\n")
    _write_manifest(out, asdict(config), argv)
    print(f"wrote {len(result.rows)} rows to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# theory
# ---------------------------------------------------------------------------


def _cmd_theory(args, argv) -> int:
    if not 0.0 <= args.pilot_frac <= 1.0:
        raise UsageError("--pilot-frac must lie in [0, 1]")
    p = args.pilot_frac
    d = 1.0 - p
    grid = parse_snr_grid(args.snr)
    header = [
        "snr_db", "kappa", "status", "h1_0", "h2_0", "G0", "H",
        "A1", "A2", "B1", "B2",
        "phase_var_per_L", "amp_var_per_L", "amp_mean",
    ]
    lines = [",".join(header)]
    for snr_db in grid:
        kappa = snr_to_kappa(snr_db)
        try:
            figs = constants_gaussian(args.M, kappa)
        except TheoryRangeError:
            lines.append(
                ",".join([_fmt(snr_db), _fmt(kappa), "out_of_range"] + [""] * 11)
            )
            continue
        fig_cols = [
            _fmt(v)
            for v in (
                figs.h1_0, figs.h2_0, figs.g_zero(p, d), figs.H,
                figs.A1, figs.A2, figs.B1, figs.B2,
            )
        ]
        try:
            pred = predict(
                figs,
                TheoryInput(M=args.M, p=p, d=d, kappa=kappa, rho0=args.rho0),
                1,
            )
            var_cols = [_fmt(pred.phase_var), _fmt(pred.amp_var), _fmt(pred.amp_mean)]
            status = "ok"
        except TheoryRangeError:
            var_cols = ["", "", ""]
            status = "breakdown"
        lines.append(
            ",".join([_fmt(snr_db), _fmt(kappa), status] + fig_cols + var_cols)
        )
    out = Path(args.out)
    out.write_text("\n".join(lines) + "\n")
    _write_manifest(
        out,
        {"M": args.M, "pilot_frac": p, "rho0": args.rho0, "snr": args.snr},
        argv,
    )
    print(f"wrote {len(grid)} rows to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def _read_sample_file(path: str) -> ReceivedFrame:
    """Parse the sample CSV schema ``index,re_y,im_y,is_pilot,re_p,im_p``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise RuntimeError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    rows = list(reader)
    if not rows:
        raise RuntimeError(f"{path}: empty file")
    if [c.strip() for c in rows[0]] != ESTIMATE_HEADER:
        raise RuntimeError(
            f"{path}: line 1: expected header {','.join(ESTIMATE_HEADER)}"
        )
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 6:
            raise RuntimeError(f"{path}: line {lineno}: expected 6 columns")
        try:
            index = int(row[0])
            y = complex(float(row[1]), float(row[2]))
            is_pilot = int(row[3])
            if is_pilot not in (0, 1):
                raise ValueError("is_pilot must be 0 or 1")
            pilot = None
            if is_pilot:
                pilot = complex(float(row[4]), float(row[5]))
        except ValueError as exc:
            raise RuntimeError(f"{path}: line {lineno}: {exc}") from exc
        entries.append((index, y, pilot))
    if not entries:
        raise RuntimeError(f"{path}: no sample rows")
    entries.sort(key=lambda e: e[0])
    indices = [e[0] for e in entries]
    if indices != list(range(len(entries))):
        raise RuntimeError(f"{path}: sample indices must cover 0..L-1 exactly")
    samples = np.array([e[1] for e in entries])
    pilot_positions = np.array([e[0] for e in entries if e[2] is not None], dtype=int)
    pilot_symbols = np.array([e[2] for e in entries if e[2] is not None])
    plan = FramePlan.from_positions(len(entries), pilot_positions, pilot_symbols)
    return ReceivedFrame(samples=samples, plan=plan)


def _cmd_estimate(args, argv) -> int:
    frame = _read_sample_file(args.input)
    name = args.estimator
    decisions = None
    if name in ("mackenthun", "weighted", "brute"):
        beta = args.beta if name == "weighted" else 1.0
        if name == "brute":
            report = brute_force(frame, args.M)
        else:
            report = mackenthun(frame, args.M, beta)
        rho, theta = report.amplitude.rho, report.amplitude.theta
        objective = report.objective
        decisions = report.data_indices
    elif name == "pilot":
        amp = pilot_only(frame)
        rho, theta, objective = amp.rho, amp.theta, float("nan")
    elif name == "vv":
        theta = viterbi_viterbi(frame, args.M)
        rho, objective = float("nan"), float("nan")
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown estimator {name!r}")
    line = f"rho_hat={_fmt(rho)} theta_hat={_fmt(theta)} objective={_fmt(objective)}"
    print(line)
    if args.decisions:
        if decisions is None:
            print("decisions=")
        else:
            print("decisions=" + ",".join(str(int(i)) for i in decisions))
    return EXIT_OK


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


def _cmd_selftest(args, argv) -> int:
    names = args.suite if args.suite else None
    try:
        results = selftest.run_suites(names)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    failed = False
    for res in results:
        if res.passed:
            print(f"PASS {res.name} ({res.seconds:.2f}s)")
        else:
            failed = True
            print(f"FAIL {res.name} ({res.seconds:.2f}s): {res.detail}")
    print("FAIL" if failed else "PASS")
    return EXIT_SELFTEST if failed else EXIT_OK


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="pskest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo SNR sweep")
    sim.add_argument("--M", type=int, required=True)
    sim.add_argument("--L", type=int, required=True)
    sim.add_argument("--pilots", type=int, required=True)
    sim.add_argument("--snr", type=str, required=True, help="start:step:stop in dB")
    sim.add_argument("--trials", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument(
        "--estimator",
        choices=["mackenthun", "pilot", "vv", "weighted"],
        default="mackenthun",
    )
    sim.add_argument("--beta", type=float, default=1.0)
    sim.add_argument("--noise", choices=["gaussian", "ring"], default="gaussian")
    sim.add_argument("--rho0", type=float, default=1.0)
    sim.add_argument("--theory-samples", type=int, default=4_000_000)
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--out", type=str, required=True)

    theo = sub.add_parser("theory", help="evaluate the Gaussian theory curves")
    theo.add_argument("--M", type=int, required=True)
    theo.add_argument("--snr", type=str, required=True)
    theo.add_argument("--pilot-frac", type=float, required=True)
    theo.add_argument("--rho0", type=float, default=1.0)
    theo.add_argument("--out", type=str, required=True)

    est = sub.add_parser("estimate", help="estimate the gain from a sample file")
    est.add_argument("--input", type=str, required=True)
    est.add_argument("--M", type=int, required=True)
    est.add_argument(
        "--estimator",
        choices=["mackenthun", "weighted", "brute", "pilot", "vv"],
        default="mackenthun",
    )
    est.add_argument("--beta", type=float, default=1.0)
    est.add_argument("--decisions", action="store_true")

    self_p = sub.add_parser("selftest", help="run the built-in verification suites")
    self_p.add_argument("--suite", action="append", help="run only the named suite")

    return parser


_COMMANDS = {
    "simulate": _cmd_simulate,
    "theory": _cmd_theory,
    "estimate": _cmd_estimate,
    "selftest": _cmd_selftest,
}

_ESTIMATOR_ALIASES = {"pilot": "pilot_only", "vv": "viterbi_viterbi"}


def main(argv=None) -> int:
    """Run the CLI; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "estimator", None) in _ESTIMATOR_ALIASES and (
            args.command == "simulate"
        ):
            args.estimator = _ESTIMATOR_ALIASES[args.estimator]
        return _COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def console_main() -> None:
    raise SystemExit(main())
