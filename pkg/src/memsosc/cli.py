"""``memsosc`` command line.

Subcommands: model, ac, noise, phase, loopgain, pn, detune, report.
JSON goes out with sorted keys and CSV with ``repr`` floats, so identical
inputs give byte-identical files.

Exit codes: 0 ok, 1 report check failed, 2 invalid input, 64 unknown
subcommand, 66 unreadable config or netlist, 70 solver failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path

from . import checks
from .design import DesignInfeasibleError, OscDesign, apply_overrides
from .mna import (
    InvalidNetlistError, SingularCircuitError, ac_sweep, frequency_grid, output_noise,
)
from .netlist import NetlistSyntaxError, format_netlist, parse_netlist, validate_netlist
from .oscillator import (
    center_tank, detune_csv, detune_sweep, lphi_bounds, loop_gain, noise_cross_check,
)
from .phase_noise import fom, lumped_noise_power, noise_factor, phase_noise, pn_curve_csv
from .resonator import build_rft_netlist, resonator_phase_at, synthesize_motional

EX_OK, EX_CHECK, EX_INVALID = 0, 1, 2
EX_USAGE, EX_NOINPUT, EX_SOFTWARE = 64, 66, 70


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EX_INVALID, f"{self.prog}: {message}")


def default_config_path() -> Path:
    return Path(str(resources.files("memsosc") / "data" / "default.json"))


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if not path.parent.is_dir():
        raise CliError(EX_INVALID, f"output directory {str(path.parent)!r} does not exist")
    path.write_text(text, encoding="utf-8", newline="\n")


def _design(args) -> OscDesign:
    path = args.config or default_config_path()
    try:
        raw = Path(path).read_text(encoding="utf-8")
        data = json.loads(raw)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CliError(EX_NOINPUT, f"cannot read config {str(path)!r}: {exc}") from exc
    if not isinstance(data, dict):
        raise CliError(EX_NOINPUT, f"config {str(path)!r} is not a JSON object")
    data = data.get("design", data)
    overrides = [o[len("design."):] if o.startswith("design.") else o for o in args.override]
    try:
        return OscDesign.from_dict(apply_overrides(data, overrides))
    except (TypeError, ValueError) as exc:
        raise CliError(EX_INVALID, f"invalid design: {exc}") from exc


def _read_netlist(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CliError(EX_NOINPUT, f"cannot read netlist {path!r}: {exc}") from exc
    try:
        net = parse_netlist(text)
    except NetlistSyntaxError as exc:
        raise CliError(EX_INVALID, f"{path}: {exc}") from exc
    problems = validate_netlist(net)
    if problems:
        lines = "; ".join(f"element {v.index}: {v.reason}" for v in problems)
        raise CliError(EX_INVALID, f"{path}: invalid netlist: {lines}")
    return net


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_model(args) -> int:
    d = _design(args)
    net = build_rft_netlist(d.resonator, mode=args.mode)
    mb = synthesize_motional(d.resonator)
    text = format_netlist(net)
    if args.netlist_out:
        _emit(text, args.netlist_out)
    payload = {
        "lm_h": mb.lm, "cm_f": mb.cm, "c0_f": mb.c0,
        "mode": args.mode, "netlist": text,
        "resonator": d.resonator.to_dict(),
    }
    _emit(_dumps(payload), args.out)
    return EX_OK


def _grid(args):
    if args.lin and args.log:
        raise CliError(EX_INVALID, "give only one of --lin and --log")
    spec, spacing = (args.lin, "lin") if args.lin else (args.log, "log")
    if not spec:
        raise CliError(EX_INVALID, "ac needs --lin or --log START STOP N")
    start, stop, n = spec
    try:
        points = int(n)
        if points != n:
            raise ValueError("point count must be an integer")
        return frequency_grid(start, stop, points, spacing)
    except ValueError as exc:
        raise CliError(EX_INVALID, str(exc)) from exc


def cmd_ac(args) -> int:
    net = _read_netlist(args.netlist)
    grid = _grid(args)
    probe = args.probe or ("out" if "out" in net.nodes else list(net.nodes)[-1])
    try:
        resp = ac_sweep(net, grid, probe, workers=args.workers)[probe]
    except KeyError as exc:
        raise CliError(EX_INVALID, f"unknown probe {probe!r}: {exc}") from exc
    _emit(resp.to_csv(), args.out)
    return EX_OK


def cmd_noise(args) -> int:
    net = _read_netlist(args.netlist)
    if not args.freq > 0:
        raise CliError(EX_INVALID, "--freq must be positive")
    try:
        budget = output_noise(net, args.node, args.freq, args.temperature)
    except KeyError as exc:
        raise CliError(EX_INVALID, str(exc)) from exc
    _emit(budget.to_json() + "\n", args.out)
    return EX_OK


def cmd_phase(args) -> int:
    d = _design(args)
    f = d.f0 if args.freq is None else args.freq
    phase = resonator_phase_at(d.resonator, f)
    payload = {"freq_hz": f, "phase_deg": phase, "target_deg": 270.0,
               "within_tolerance": abs(phase - 270.0) <= 2.0}
    _emit(_dumps(payload), args.out)
    return EX_OK


def cmd_loopgain(args) -> int:
    d = _design(args)
    report = loop_gain(d, args.freq)
    b = lphi_bounds(d)
    payload = report.to_dict()
    payload["lphi_bounds"] = {"l_min_h": b.l_min, "l_max_h": b.l_max, "l_phi_h": b.l_phi,
                              "f_phi_hz": b.f_phi, "satisfied": b.satisfied}
    payload["oscillates"] = report.startup_margin > 0 and abs(report.phase_deg) <= 5.0
    _emit(_dumps(payload), args.out)
    return EX_OK


def cmd_pn(args) -> int:
    d = _design(args)
    if not args.offset > 0:
        raise CliError(EX_INVALID, "--offset must be positive")
    if args.curve:
        start, stop, n = args.curve
        offsets = frequency_grid(start, stop, int(n), "log")
        _emit(pn_curve_csv(d, offsets, temperature=args.temperature,
                           carrier_halved=args.carrier_halved), args.out)
        return EX_OK
    pn = phase_noise(d, args.offset, args.temperature, carrier_halved=args.carrier_halved)
    f = fom(pn.pn_dbchz, d.f0, args.offset, d.p_dc)
    nf = noise_factor(d)
    lumped = lumped_noise_power(d, args.temperature)
    payload = {
        "pn_dbchz": pn.pn_dbchz,
        "pn_min_dbchz": pn.pn_min_dbchz,
        "noise_factor": nf.value,
        "noise_factor_addends": nf.addends,
        "fom_dbchz": f.fom_dbchz,
        "phase_noise": pn.to_dict(),
        "fom": f.to_dict(),
        "lumped_noise": {"total_v2_per_hz": lumped.total, "terms": lumped.terms,
                         "r0_ohm": lumped.r0, "av1": lumped.av1},
    }
    _emit(_dumps(payload), args.out)
    return EX_OK


def cmd_detune(args) -> int:
    d = center_tank(_design(args))
    points = detune_sweep(d, args.deltas, args.offset, args.temperature)
    _emit(detune_csv(points), args.out)
    lost = [p.delta_hz for p in points if not p.oscillating]
    if lost:
        sys.stderr.write(f"oscillation lost at delta = {', '.join(map(repr, lost))} Hz\n")
    return EX_OK


def cmd_report(args) -> int:
    d = _design(args)
    results, elapsed = checks.timed_checks(d)
    lines = ["memsosc report", ""]
    lines += [c.line() for c in results]
    passed = sum(c.passed for c in results)
    lines += ["", f"{passed}/{len(results)} checks passed in {elapsed:.2f} s", ""]
    if args.json:
        centered = center_tank(d)
        pn = phase_noise(centered, 1e6, args.temperature)
        payload = {
            "checks": [c.to_dict() for c in results],
            "design": d.to_dict(),
            "loop_gain": loop_gain(centered).to_dict(),
            "phase_noise": pn.to_dict(),
            "fom": fom(pn.pn_dbchz, d.f0, 1e6, d.p_dc).to_dict(),
            "noise_cross_check": noise_cross_check(centered, args.temperature).to_dict(),
            "detune": [p.to_dict() for p in detune_sweep(centered, checks.DETUNE_DELTAS)],
        }
        _emit(_dumps(payload), args.json)
    _emit("\n".join(lines), args.out)
    return EX_OK if passed == len(results) else EX_CHECK


COMMANDS = {
    "model": cmd_model, "ac": cmd_ac, "noise": cmd_noise, "phase": cmd_phase,
    "loopgain": cmd_loopgain, "pn": cmd_pn, "detune": cmd_detune, "report": cmd_report,
}


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="design JSON (default: the shipped card)")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dot-path override, e.g. resonator.q_mems=5000")
    common.add_argument("--temperature", type=float, default=300.0, help="kelvin")
    common.add_argument("--out", help="write the main artifact here instead of stdout")
    common.add_argument("--workers", type=int, default=None,
                        help="sweep threads (default: $MEMSOSC_WORKERS or CPU count)")

    parser = _Parser(prog="memsosc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("model", parents=[common], help="RFT netlist and motional values")
    p.add_argument("--mode", choices=("half", "differential"), default="half")
    p.add_argument("--netlist-out", help="also write the netlist text here")

    p = sub.add_parser("ac", parents=[common], help="AC sweep of a netlist file")
    p.add_argument("--netlist", required=True)
    p.add_argument("--lin", nargs=3, type=float, metavar=("START", "STOP", "N"))
    p.add_argument("--log", nargs=3, type=float, metavar=("START", "STOP", "N"))
    p.add_argument("--probe", help="node, v(a,b) or i(element); default 'out' or the last node")

    p = sub.add_parser("noise", parents=[common], help="output noise budget of a netlist")
    p.add_argument("--netlist", required=True)
    p.add_argument("--node", required=True)
    p.add_argument("--freq", type=float, required=True)

    p = sub.add_parser("phase", parents=[common], help="resonator drive-to-sense phase")
    p.add_argument("--freq", type=float)

    p = sub.add_parser("loopgain", parents=[common], help="broken-loop Barkhausen report")
    p.add_argument("--freq", type=float)

    p = sub.add_parser("pn", parents=[common], help="phase noise and figure of merit")
    p.add_argument("--offset", type=float, default=1e6)
    p.add_argument("--carrier-halved", action="store_true")
    p.add_argument("--curve", nargs=3, type=float, metavar=("START", "STOP", "N"),
                   help="emit a log-spaced PN curve as CSV instead")

    p = sub.add_parser("detune", parents=[common], help="tank detuning sweep (CSV)")
    p.add_argument("--deltas", type=_float_list, default=list(checks.DETUNE_DELTAS),
                   help="comma-separated tank offsets in Hz")
    p.add_argument("--offset", type=float, default=1e6)

    p = sub.add_parser("report", parents=[common], help="headline numbers and self-checks")
    p.add_argument("--json", help="also write a JSON report here")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # options live on the subcommands, so the subcommand always comes first
    if argv and not argv[0].startswith("-") and argv[0] not in COMMANDS:
        sys.stderr.write(f"memsosc: unknown subcommand {argv[0]!r}; "
                         f"choose from {', '.join(COMMANDS)}\n")
        return EX_USAGE
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EX_USAGE
        if args.workers is not None and args.workers < 1:
            raise CliError(EX_INVALID, "--workers must be >= 1")
        if not (args.temperature > 0 and math.isfinite(args.temperature)):
            raise CliError(EX_INVALID, "--temperature must be positive")
        return COMMANDS[args.command](args)
    except CliError as exc:
        sys.stderr.write(f"{exc}\n")
        return exc.code
    except (DesignInfeasibleError, InvalidNetlistError) as exc:
        sys.stderr.write(f"memsosc: {exc}\n")
        return EX_INVALID
    except SingularCircuitError as exc:
        sys.stderr.write(f"memsosc: solver failure: {exc}\n")
        return EX_SOFTWARE
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        sys.stderr.write(f"memsosc: solver failure: {type(exc).__name__}: {exc}\n")
        return EX_SOFTWARE


if __name__ == "__main__":
    sys.exit(main())
