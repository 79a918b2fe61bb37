"""Command-line interface: ``vibcal <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 infeasible plan.
Reports are JSON (CSV for ``simulate``) and carry the toolkit version and
the invocation.
"""

from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction
from typing import Sequence

from . import __version__
from .core import CalibrationScenario, ProcessingChain, exact, fraction_to_str
from .estimator import calibrate, diff_correction, plan_record_length, process, _discard_samples
from .filters import NotSettledError, design_bandpass, filter_response, settling_time_cycles
from .io import dump_json, load_json, read_waveform
from .montecarlo import (
    TrialError,
    frequency_sweep,
    length_sweep,
    run_trials,
    write_length_csv,
    write_sweep_csv,
    SweepPoint,
)
from .noise import DEFAULT_SEED
from .uncertainty import budget

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _freq(text: str) -> Fraction:
    try:
        value = exact(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not an exact decimal: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("frequency must be positive")
    return value


def _freq_list(text: str) -> list[Fraction]:
    return [_freq(t) for t in text.split(",") if t.strip()]


def _filter_arg(text: str) -> tuple[int, float]:
    try:
        order, q = text.split(",")
        return int(order), float(q)
    except ValueError:
        raise argparse.ArgumentTypeError("expected ORDER,Q such as 6,1") from None


def _add_chain_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("processing chain")
    g.add_argument("--window", choices=("rect", "hann"), default="rect")
    g.add_argument("--filter", type=_filter_arg, metavar="ORDER,Q",
                   help="Butterworth bandpass centred on fv, e.g. 6,1")
    g.add_argument("--differentiate", type=int, nargs="?", const=2, default=0, choices=(0, 1, 2),
                   help="differentiate the reference (default count 2)")
    g.add_argument("--discard-cycles", type=int, default=None, metavar="N",
                   help="cycles dropped after the filter (default: settling time at 0.1%%)")


def _chain(args, fv, fs) -> ProcessingChain:
    if args.filter is None:
        if args.discard_cycles:
            raise UsageError("--discard-cycles needs --filter")
        return ProcessingChain(args.window, None, args.differentiate, 0)
    order, q = args.filter
    spec = design_bandpass(order, q, fv, fs)
    return ProcessingChain.filtered(spec, window=args.window,
                                    differentiate_reference=args.differentiate,
                                    discard_cycles=args.discard_cycles)


def _report(command: str, argv: Sequence[str], body: dict) -> dict:
    return {"tool": "vibcal", "version": __version__, "command": command,
            "invocation": ["vibcal", *argv], **body}


def _emit(obj: dict, out: str | None) -> None:
    if out:
        dump_json(obj, out)
    else:
        sys.stdout.write(dump_json(obj))


def cmd_fit(args, argv) -> int:
    w = read_waveform(args.file)
    chain = _chain(args, args.fv, w.sample_rate)
    if args.role == "sensor" and chain.differentiate_reference:
        raise UsageError("--differentiate applies to --role reference only")
    amp = process(w, args.fv, chain, args.role)
    corrections = {}
    if chain.filter is not None:
        g = filter_response(chain.filter, float(args.fv))
        corrections["filter_gain"] = {"re": g.real, "im": g.imag}
        corrections["discarded_samples"] = _discard_samples(chain.discard_cycles, args.fv, w.sample_rate)
    if chain.differentiate_reference and args.role == "reference":
        corrections["diff_correction"] = diff_correction(args.fv, w.fs, chain.differentiate_reference)
    body = {"fv": fraction_to_str(args.fv), "role": args.role, "chain": chain.to_dict(),
            "amplitude": amp.to_dict(), "modulus": amp.modulus(), "phase": amp.arg(),
            "corrections": corrections}
    _emit(_report("fit", argv, body), args.output)
    return EXIT_OK


def cmd_calibrate(args, argv) -> int:
    sensor = read_waveform(args.sensor)
    reference = read_waveform(args.reference)
    if sensor.sample_rate != reference.sample_rate:
        raise ValueError(f"sample rates differ: {fraction_to_str(sensor.sample_rate)} Hz "
                         f"vs {fraction_to_str(reference.sample_rate)} Hz")
    chain = _chain(args, args.fv, sensor.sample_rate)
    res = calibrate(sensor, reference, args.fv, chain)
    body = {"fv": fraction_to_str(args.fv), "chain": chain.to_dict(), **res.to_dict()}
    _emit(_report("calibrate", argv, body), args.output)
    return EXIT_OK


def _scenario(path) -> CalibrationScenario:
    d = load_json(path)
    return CalibrationScenario.from_dict(d.get("scenario", d))


def cmd_budget(args, argv) -> int:
    scen = _scenario(args.scenario)
    chain = _chain(args, scen.fv, scen.fs)
    b = budget(scen, chain)
    body = {"scenario": scen.to_dict(), "chain": chain.to_dict(), "budget": b.to_dict()}
    _emit(_report("budget", argv, body), args.output)
    return EXIT_OK


def _length_arg(text: str, fv: Fraction):
    t = text.strip()
    if t.endswith("c"):
        return Fraction(int(t[:-1])) / fv
    return exact(t)


def cmd_simulate(args, argv) -> int:
    scen = _scenario(args.scenario)
    chain = _chain(args, scen.fv, scen.fs)
    if args.sweep and args.lengths:
        raise UsageError("use either --sweep or --lengths")
    summary = {"scenario": scen.to_dict(), "chain": chain.to_dict(), "trials": args.trials,
               "seed": args.seed, "phase_mode": args.phase_mode}
    if args.lengths:
        found = [(ch, t) for ch in ("reference", "sensor", "common") for t in scen.lines(ch)]
        if len(found) != 1:
            raise ValueError("--lengths needs a scenario with exactly one line tone")
        channel, tone = found[0]
        T_list = [_length_arg(t, scen.fv) for t in args.lengths.split(",") if t.strip()]
        pts = length_sweep(scen.fv, tone, T_list, args.trials, scen.fs, args.seed, channel)
        text = write_length_csv(pts)
        summary["points"] = [{"T": fraction_to_str(p.T), "valid": p.valid,
                              "std_S_cal_rel": None if math.isnan(p.std) else p.std,
                              "note": p.reason} for p in pts]
    else:
        if args.sweep:
            pts = frequency_sweep(scen, chain, args.sweep, args.trials, args.seed, args.phase_mode)
        else:
            stats = run_trials(scen, chain, args.trials, args.seed, args.phase_mode)
            pts = [SweepPoint(scen.fv, scen.record_length, stats, budget(scen, chain))]
        text = write_sweep_csv(pts)
        summary["points"] = [{"fv": fraction_to_str(p.fv), "stats": p.stats.to_dict(),
                              "predicted": p.predicted.to_dict()} for p in pts]
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.summary:
        dump_json(_report("simulate", argv, summary), args.summary)
    return EXIT_OK


def cmd_plan(args, argv) -> int:
    plan = plan_record_length(args.fv, args.lines or (), args.window, args.min_cycles,
                              args.max_T, args.fs)
    body = {"fv": fraction_to_str(args.fv),
            "lines": [fraction_to_str(f) for f in args.lines or ()],
            "window": args.window, "feasible": plan.feasible,
            "T": None if plan.T is None else fraction_to_str(plan.T),
            "T_seconds": None if plan.T is None else float(plan.T),
            "cycles": plan.cycles(args.fv),
            "smallest_feasible": fraction_to_str(plan.smallest_feasible),
            "period": fraction_to_str(plan.period),
            "irreducible": [fraction_to_str(f) for f in plan.irreducible],
            "warnings": list(plan.warnings)}
    _emit(_report("plan", argv, body), args.output)
    for w in plan.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK if plan.feasible else EXIT_INFEASIBLE


def cmd_settle(args, argv) -> int:
    spec = design_bandpass(args.order, args.q, args.fv, args.fs)
    try:
        cycles = settling_time_cycles(spec, tolerance=args.tolerance, max_cycles=args.max_cycles)
    except NotSettledError as exc:
        body = {"filter": spec.to_dict(), "tolerance": args.tolerance, "settled": False,
                "max_cycles": exc.max_cycles}
        _emit(_report("settle", argv, body), args.output)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    body = {"filter": spec.to_dict(), "tolerance": args.tolerance, "settled": True,
            "settling_cycles": cycles, "discard_cycles": math.ceil(cycles - 1e-9)}
    _emit(_report("settle", argv, body), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vibcal", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"vibcal {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("fit", help="complex amplitude of one waveform at fv")
    s.add_argument("file")
    s.add_argument("--fv", type=_freq, required=True)
    s.add_argument("--role", choices=("sensor", "reference"), default="sensor")
    _add_chain_options(s)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("calibrate", help="sensitivity and phase delay from a waveform pair")
    s.add_argument("sensor")
    s.add_argument("reference")
    s.add_argument("--fv", type=_freq, required=True)
    _add_chain_options(s)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("budget", help="predicted uncertainty budget of a scenario")
    s.add_argument("scenario")
    _add_chain_options(s)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_budget)

    s = sub.add_parser("simulate", help="Monte Carlo trials, frequency or length sweeps")
    s.add_argument("scenario")
    _add_chain_options(s)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--phase-mode", choices=("random", "sweep"), default="random")
    s.add_argument("--sweep", type=_freq_list, metavar="FV,FV,...")
    s.add_argument("--lengths", metavar="T,T,...",
                   help="record lengths in s; a 'c' suffix counts cycles, e.g. 100c")
    s.add_argument("-o", "--output", help="CSV output (default stdout)")
    s.add_argument("--summary", help="write a JSON summary here")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("plan", help="record length that nulls line tones")
    s.add_argument("--fv", type=_freq, required=True)
    s.add_argument("--lines", type=_freq_list, default=[])
    s.add_argument("--window", choices=("rect", "hann"), default="rect")
    s.add_argument("--min-cycles", type=int, default=1)
    s.add_argument("--max-T", type=_freq, default=None)
    s.add_argument("--fs", type=_freq, default=None)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("settle", help="bandpass settling time in cycles")
    s.add_argument("--order", type=int, required=True)
    s.add_argument("--q", type=float, required=True)
    s.add_argument("--fv", type=_freq, required=True)
    s.add_argument("--fs", type=_freq, required=True)
    s.add_argument("--tolerance", type=float, default=1e-3)
    s.add_argument("--max-cycles", type=int, default=400)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_settle)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"vibcal: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrialError as exc:
        print(f"vibcal: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"vibcal: error: {exc}", file=sys.stderr)
        return EXIT_DATA
