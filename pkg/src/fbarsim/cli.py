"""Command-line entry point: ``fbarsim simulate|modes|sweep|fit|report``.

Units at this boundary are nm (thickness), GHz (frequency) and um^2 (area).
Exit codes: 0 success, 1 usage or parse error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from fbarsim.export import (
    ExportError,
    format_report_csv,
    format_spectrum_csv,
    read_report_csv,
    read_spectrum_csv,
    report_table,
)
from fbarsim.mason import FrequencyGrid, SimulationError, input_admittance
from fbarsim.materials import MaterialError, default_catalog, load_materials
from fbarsim.mbvd import FitError, fit_mbvd, format_model
from fbarsim.modes import K2_DEFINITIONS, ModeError, ModeReport, analyze_modes, find_resonances
from fbarsim.stack import QUARTET_IDS, StackError, electrode_stack, parse_stack
from fbarsim.survey import SurveyError, SurveyWarning, emit_survey, merge_survey, read_survey, survey_table
from fbarsim.touchstone import TOPOLOGIES, TouchstoneError, read_touchstone, to_device_admittance


class UsageError(Exception):
    pass


class NumericError(Exception):
    pass


PARSE_ERRORS = (MaterialError, StackError, TouchstoneError, ExportError, SurveyError, OSError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- helpers ---------------------------------------------------------------


def _catalog(args):
    if args.materials is None:
        return default_catalog()
    path = Path(args.materials)
    if not path.is_file():
        raise UsageError(f"materials file not found: {path}")
    return load_materials(path)


def _grid(args) -> FrequencyGrid:
    if args.points < 2:
        raise UsageError(f"--points must be >= 2, got {args.points}")
    if not 0 < args.f_start < args.f_stop:
        raise UsageError(f"need 0 < --f-start < --f-stop, got {args.f_start}, {args.f_stop}")
    return FrequencyGrid(args.f_start * 1e9, args.f_stop * 1e9, args.points)


def _stack(args, catalog):
    if (args.stack is None) == (args.quartet is None):
        raise UsageError("give exactly one of --stack FILE or --quartet ID")
    if args.stack is not None:
        path = Path(args.stack)
        if not path.is_file():
            raise UsageError(f"stack file not found: {path}")
        stack = parse_stack(path, catalog)
    else:
        top, bottom = args.quartet.split("-")
        stack = electrode_stack(catalog, top, bottom)
    if args.area is not None:
        if not args.area > 0:
            raise UsageError("--area must be > 0")
        stack = replace(stack, area=args.area * 1e-12)
    return stack


def _emit(text: str, path: Optional[str]):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def parse_range(spec: str) -> list[float]:
    """``start:stop:step`` (inclusive of stop) or a single value."""
    parts = spec.split(":")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"bad range {spec!r}; expected start:stop:step") from None
    if len(values) == 1:
        return values
    if len(values) != 3:
        raise UsageError(f"bad range {spec!r}; expected start:stop:step")
    start, stop, step = values
    if step <= 0:
        raise UsageError(f"range step must be > 0, got {step:g}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 9) for i in range(max(n, 0))]


def read_config(path: str) -> dict[str, str]:
    """``key value`` lines with ``#`` comments; keys are option names with underscores."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split("#", 1)[0].split(None, 1)
        if not parts:
            continue
        if len(parts) != 2:
            raise UsageError(f"{path}:{lineno}: expected 'key value'")
        out[parts[0].replace("-", "_")] = parts[1].strip()
    return out


# --- subcommands -----------------------------------------------------------


def cmd_simulate(args) -> int:
    catalog = _catalog(args)
    spec = input_admittance(_stack(args, catalog), _grid(args))
    _emit(format_spectrum_csv(spec), args.output)
    return 0


def cmd_modes(args) -> int:
    catalog = _catalog(args)
    reports = analyze_modes(_stack(args, catalog), _grid(args), args.k2_definition)
    if args.output is not None:
        _emit(format_report_csv(reports), args.output)
        if args.output != "-":
            sys.stdout.write(report_table(reports))
    else:
        sys.stdout.write(report_table(reports))
    return 0


def _label_key(label: str):
    return (int(label[1:]) if label[1:].isdigit() else 99, label)


def cmd_sweep(args) -> int:
    catalog = _catalog(args)
    electrodes = [e.strip() for e in args.electrodes.split(",") if e.strip()]
    thicknesses = parse_range(args.thickness)
    if not electrodes or not thicknesses:
        raise UsageError("empty sweep set")
    if any(t <= 0 for t in thicknesses):
        raise UsageError("electrode thickness must be > 0")
    grid = _grid(args)
    rows = []
    for t in thicknesses:
        for top in electrodes:
            for bottom in electrodes:
                stack = electrode_stack(catalog, top, bottom, electrode_thickness=t * 1e-9)
                reports = analyze_modes(stack, grid, args.k2_definition)
                modes = {}
                for r in reports:
                    modes.setdefault(r.label, r)
                rows.append((f"{top}-{bottom}", t, modes))
    labels = sorted({lab for _, _, m in rows for lab in m}, key=_label_key)
    header = ["stack", "electrode_nm"] + [f"{lab}_{q}" for lab in labels for q in ("fs_hz", "fp_hz", "k2")]
    lines = [",".join(header)]
    for ident, t, modes in rows:
        cells = [ident, f"{t:g}"]
        for lab in labels:
            r = modes.get(lab)
            cells += ["", "", ""] if r is None else [f"{r.fs:.12g}", f"{r.fp:.12g}", f"{r.k2:.12g}"]
        lines.append(",".join(cells))
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def _load_measurement(args):
    path = Path(args.data)
    if not path.is_file():
        raise UsageError(f"data file not found: {path}")
    if path.suffix.lower() == ".csv":
        return read_spectrum_csv(path)
    return to_device_admittance(read_touchstone(path), args.topology)


def fit_reports(result, labels: Sequence[str] = ()) -> list[ModeReport]:
    model = result.model
    out = []
    for k, (branch, m) in enumerate(zip(model.branches, result.metrics)):
        fp = branch.fs * np.sqrt(1 + branch.cm / model.c0)
        label = labels[k] if k < len(labels) else f"R{k + 1}"
        out.append(ModeReport(label, m.fs, float(fp), m.k2, m.q, "mbvd"))
    return out


def cmd_fit(args) -> int:
    spectrum = _load_measurement(args)
    pairs = find_resonances(spectrum)
    if not pairs:
        raise NumericError("no resonance found; nothing to fit")
    try:
        result = fit_mbvd(spectrum, pairs=pairs, q0=args.q_seed)
    except (FitError, ValueError, np.linalg.LinAlgError) as exc:
        raise NumericError(f"fit failed: {exc}") from None
    if args.verbose:
        for s in result.stage_log:
            print(f"{s.stage}: {s.iterations} evaluations, converged={s.converged}", file=sys.stderr)
        print(f"weighted rms residual {result.residual:.3g}", file=sys.stderr)
    labels = [x.strip() for x in args.labels.split(",")] if args.labels else []
    reports = fit_reports(result, labels)
    if args.model_out:
        _emit(format_model(result.model), args.model_out)
    if args.metrics_out:
        _emit(format_report_csv(reports), args.metrics_out)
    sys.stdout.write(report_table(reports))
    return 0


def cmd_report(args) -> int:
    own = []
    for p in args.reports or []:
        own += read_report_csv(p)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SurveyWarning)
        literature = read_survey(args.literature) if args.literature else []
        entries = merge_survey(own, literature, technology=args.technology)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.output:
        table = emit_survey(entries, args.output, args.table)
    else:
        table = survey_table(entries)
        if args.table:
            Path(args.table).write_text(table)
    sys.stdout.write(table)
    return 0


# --- parser ----------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", metavar="FILE", help="key/value file supplying option defaults")
    p.add_argument("--materials", metavar="FILE", help="materials catalog (default: bundled)")
    p.add_argument("-v", "--verbose", action="store_true", help="progress details on stderr")


def _add_grid(p):
    p.add_argument("--f-start", type=float, default=5.0, metavar="GHZ", help="first frequency (default 5)")
    p.add_argument("--f-stop", type=float, default=70.0, metavar="GHZ", help="last frequency (default 70)")
    p.add_argument("--points", type=int, default=6501, help="grid points (default 6501)")


def _add_stack(p):
    p.add_argument("--stack", metavar="FILE", help="stack description file")
    p.add_argument("--quartet", choices=QUARTET_IDS, help="built-in <top>-<bottom> electrode stack")
    p.add_argument("--area", type=float, metavar="UM2", help="override the active area")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fbarsim", description="1D thin-film bulk acoustic resonator simulation and mBVD extraction.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="admittance spectrum of a stack as CSV")
    _add_common(p), _add_stack(p), _add_grid(p)
    p.add_argument("-o", "--output", metavar="FILE", help="spectrum CSV (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("modes", help="resonances, labels, k2, Q and FoM of a stack")
    _add_common(p), _add_stack(p), _add_grid(p)
    p.add_argument("--k2-definition", choices=K2_DEFINITIONS, default="squared")
    p.add_argument("-o", "--output", metavar="FILE", help="mode report CSV (table goes to stdout)")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("sweep", help="electrode material and thickness sweep")
    _add_common(p), _add_grid(p)
    p.add_argument("--electrodes", default="Pt", help="comma list used for both faces (default Pt)")
    p.add_argument("--thickness", default="45", metavar="START:STOP:STEP", help="electrode thickness in nm (default 45)")
    p.add_argument("--k2-definition", choices=K2_DEFINITIONS, default="squared")
    p.add_argument("-o", "--output", metavar="FILE", help="sweep CSV (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="mBVD extraction from a .s1p/.s2p file or spectrum CSV")
    _add_common(p)
    p.add_argument("data", help="measurement file")
    p.add_argument("--topology", choices=TOPOLOGIES, help="device embedding (default one_port or series_thru)")
    p.add_argument("--q-seed", type=float, default=50.0, help="initial Q guess (default 50)")
    p.add_argument("--labels", help="comma list of mode names, in frequency order")
    p.add_argument("--model-out", metavar="FILE", help="fitted model file")
    p.add_argument("--metrics-out", metavar="FILE", help="metrics CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="merge mode reports with a literature survey")
    _add_common(p)
    p.add_argument("--reports", nargs="*", metavar="CSV", help="mode report / metrics CSV files")
    p.add_argument("--literature", metavar="CSV", help="survey CSV: source,technology,freq_hz,k2,q,fom")
    p.add_argument("--technology", default="ScAlN", help="technology tag for own entries")
    p.add_argument("-o", "--output", metavar="FILE", help="merged survey CSV")
    p.add_argument("--table", metavar="FILE", help="also write the text table here")
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults taken from ``--config`` when one is given."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in read_config(args.config).items():
        action = known.get(key)
        if action is None or key in ("config", "help", "func"):
            raise UsageError(f"{args.config}: unknown key {key!r} for '{args.command}'")
        if action.nargs == 0:
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
            continue
        conv = action.type or str
        try:
            defaults[key] = conv(value)
        except ValueError:
            raise UsageError(f"{args.config}: bad value {value!r} for {key}") from None
        if action.choices is not None and defaults[key] not in action.choices:
            raise UsageError(f"{args.config}: {key} must be one of {', '.join(action.choices)}")
    if "data" in defaults:
        raise UsageError(f"{args.config}: 'data' must be given on the command line")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        with np.errstate(all="ignore"):
            return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PARSE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericError, SimulationError, ModeError, FitError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
