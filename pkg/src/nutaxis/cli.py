"""Command-line entry point: ``nutaxis <run|sweep|gronwall|ineq|weakcheck|plot|report>``.

Exit codes: 0 when every required check passes, 1 when a check fails,
2 for usage or configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import inequalities as ineq
from . import ode_lemmas
from .errors import NutaxisError
from .grid import Grid2D
from .monitors import BoundReport, MonitorConfig, check_bounds, read_csv, write_csv
from .scenarios import epsilon_sweep, build, load_scenario
from .stepper import SnapshotWriter, run
from .weakform import TestFunction, load_snapshots, parse_modes, residual_u, residual_v

log = logging.getLogger("nutaxis")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
REPORT_FILES = ("run.txt", "bounds.txt", "sweep.txt", "gronwall.txt", "ineq.txt", "weak.txt")


class UsageError(Exception):
    pass


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


def _threads(args):
    """Configure numba threading; returns whether the parallel kernels are used."""
    n = getattr(args, "threads", 1) or 1
    if getattr(args, "deterministic", False) or n <= 1:
        return False
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    return True


def _outdir(args, sc) -> Path:
    d = args.outdir or sc.outdir or f"out/{sc.name}"
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _with_parallel(sc, parallel):
    from dataclasses import replace
    return replace(sc, control=replace(sc.control, parallel=parallel))


# --- subcommands ------------------------------------------------------------

def cmd_run(args) -> int:
    sc = _with_parallel(load_scenario(args.config), _threads(args))
    out = _outdir(args, sc)
    s0, p, c, r = build(sc)
    mon = MonitorConfig(window_tau=r.window_tau)
    res = run(s0, p, c, r, [SnapshotWriter(out / "snapshots")], mon)
    write_csv(out / "monitors.csv", res.series)
    rep = check_bounds(res.series, s0.u, s0.v, p, mon)
    rep.write(out / "bounds.txt")
    ok_run = res.completed
    (out / "run.txt").write_text(
        f"run {_verdict(ok_run)} reason={res.reason} steps={res.steps} t={res.state.t!r}\n",
        encoding="utf-8")
    if not ok_run:
        print(f"run stopped early: {res.reason}: {res.message}", file=sys.stderr)
    print(rep.to_text(), end="")
    return EXIT_OK if ok_run and rep.passed else EXIT_FAIL


def _eps_list(values) -> list[float]:
    out = []
    for v in values:
        out.extend(float(x) for x in v.replace(",", " ").split())
    if not out:
        raise UsageError("--eps needs at least one value")
    return out


def cmd_sweep(args) -> int:
    sc = _with_parallel(load_scenario(args.config), _threads(args))
    out = _outdir(args, sc)
    eps = _eps_list(args.eps)
    rep = epsilon_sweep(sc, eps)
    lines = rep.lines()
    ok = rep.completed
    for k, v in rep.ratios.items():
        good = v < args.max_ratio
        ok &= good
        lines.append(f"check ratio_{k} {v:.17g} < {args.max_ratio:g} {_verdict(good)}")
    lines.append(f"sweep {_verdict(ok)}")
    (out / "sweep.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def _parse_map(text: str) -> dict:
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise UsageError(f"--map entries look like name=column, got {part!r}")
        k, v = (s.strip() for s in part.split("=", 1))
        out[k] = v
    return out


def _series_value(cols, spec, n):
    if spec in cols:
        return np.asarray(cols[spec], dtype=float)
    try:
        return np.full(n, float(spec))
    except ValueError:
        raise UsageError(f"unknown column {spec!r}; available: {', '.join(cols)}") from None


def cmd_gronwall(args) -> int:
    cols = read_csv(args.monitors)
    t = cols["t"]
    # drop repeated time stamps (a final record can coincide with a periodic one)
    keep = np.concatenate(([True], np.diff(t) > 0))
    cols = {k: v[keep] for k, v in cols.items()}
    params = {}
    for item in args.param or []:
        k, _, v = item.partition("=")
        params[k.strip()] = float(v)
    if args.replay == "energy":
        series, B = ode_lemmas.energy_replay(cols, args.area, args.tau)
        lemma = "L22"
        extra = f" fitted_B={B:.17g}"
    else:
        if not args.map:
            raise UsageError("--map is required unless --replay is given")
        m = _parse_map(args.map)
        if "z" not in m:
            raise UsageError("--map must name the z series")
        n = len(cols["t"])
        aux = {k: _series_value(cols, v, n) for k, v in m.items() if k != "z"}
        if args.lemma == "L21" and "a" in aux and "a" not in params:
            params["a"] = float(aux.pop("a")[0])
        series = ode_lemmas.LemmaSeries(cols["t"], _series_value(cols, m["z"], n), aux, args.tau)
        lemma = args.lemma
        extra = ""
    v = ode_lemmas.validate(series, lemma, params)
    ok = v.hypotheses_hold and v.conclusion_holds
    sups = " ".join(f"sup_{k}={x:.17g}" for k, x in v.window_sups.items())
    line = (f"{lemma} hypotheses={v.hypotheses_hold} bound={v.bound:.17g} "
            f"max_z={float(series.z.max()):.17g} violation={v.max_violation:.17g} {sups}{extra} {_verdict(ok)}")
    print(line)
    for note in v.notes:
        print(f"note: {note}", file=sys.stderr)
    if args.report:
        Path(args.report).write_text(line + "\n", encoding="utf-8")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_ineq(args) -> int:
    grid = Grid2D(args.grid[0], args.grid[1])
    fam = ineq.FieldFamily(args.family, args.count, args.seed)
    reports = []
    if args.which == "sobolev":
        c1 = ineq.estimate_sobolev_c1(fam, grid)
        ratios = [ineq.sobolev_ratio(f) for f in fam.fields(grid)]
        reports.append(ineq.InequalityReport("sobolev", ratios, np.ones(len(ratios)),
                                             fitted_constant=c1, specified=False))
    elif args.which == "l41":
        c1 = args.c1 if args.c1 is not None else 2.0 * ineq.estimate_sobolev_c1(fam, grid)
        reports.append(ineq.family_lemma41(fam, grid, args.p, c1))
    elif args.which == "l42":
        reports.append(ineq.fit_lemma42(fam, grid, args.p, args.eta))
    else:
        if not args.snapshots:
            raise UsageError("--which l52 needs --snapshots DIR")
        g, snaps = load_snapshots(args.snapshots)
        reports.append(ineq.check_lemma52_trajectory(snaps, g, args.q))
    lines = [r.line() for r in reports]
    print("\n".join(lines))
    if args.report:
        Path(args.report).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_weakcheck(args) -> int:
    grid, snaps = load_snapshots(args.snapshots)
    lines = []
    ok = True
    for kx, ky in parse_modes(args.modes):
        tf = TestFunction(kx, ky, args.tcut)
        ru = residual_u(snaps, grid, tf)
        rv = residual_v(snaps, grid, tf)
        good = ru <= args.tol and rv <= args.tol
        ok &= good
        lines.append(f"mode {kx},{ky} residual_u={ru:.17g} residual_v={rv:.17g} {_verdict(good)}")
    print("\n".join(lines))
    if args.report:
        Path(args.report).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_plot(args) -> int:
    cols = read_csv(args.monitors)
    names = [c.strip() for c in args.cols.split(",") if c.strip()]
    missing = [c for c in names if c not in cols]
    if missing:
        raise UsageError(f"unknown columns {missing}; available: {', '.join(cols)}")
    svg = line_chart_svg(cols["t"], {c: cols[c] for c in names}, logy=args.logy)
    Path(args.out).write_text(svg, encoding="utf-8")
    return EXIT_OK


def cmd_report(args) -> int:
    d = Path(args.dir)
    if not d.is_dir():
        raise UsageError(f"report directory not found: {d}")
    found = 0
    failures = []
    for name in REPORT_FILES:
        p = d / name
        if not p.is_file():
            continue
        found += 1
        text = p.read_text(encoding="utf-8")
        if name == "bounds.txt":
            for e in BoundReport.from_text(text).entries:
                if e.verdict == "fail":
                    failures.append(f"{name}: {e.name}")
            continue
        for line in text.splitlines():
            toks = line.split()
            if toks and ("fail" in toks[-1:] or (len(toks) > 1 and toks[1] == "fail")):
                failures.append(f"{name}: {line}")
    if not found:
        raise UsageError(f"no report files in {d}")
    for f in failures:
        print(f"FAIL {f}")
    print(f"report {_verdict(not failures)} files={found} failures={len(failures)}")
    return EXIT_OK if not failures else EXIT_FAIL


# --- svg --------------------------------------------------------------------

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b")


def _ticks(lo, hi, n=5):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    x = start
    while x <= hi + 1e-9 * step:
        out.append(x)
        x += step
    return out


def line_chart_svg(t, series: dict, width=800, height=480, logy=False) -> str:
    ml, mr, mt, mb = 80, 160, 20, 50
    pw, ph = width - ml - mr, height - mt - mb
    t = np.asarray(t, float)
    ys = {k: np.asarray(v, float) for k, v in series.items()}
    if logy:
        ys = {k: np.log10(np.where(v > 0, v, np.nan)) for k, v in ys.items()}
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()] or [np.zeros(1)])
    y0, y1 = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if y1 <= y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    x0, x1 = float(t.min()), float(t.max())
    if x1 <= x0:
        x1 = x0 + 1.0

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for x in _ticks(x0, x1):
        X = sx(x)
        out.append(f'<line x1="{X:.2f}" y1="{mt + ph}" x2="{X:.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{mt + ph + 18}" text-anchor="middle">{x:g}</text>')
    for y in _ticks(y0, y1):
        Y = sy(y)
        label = f"1e{y:g}" if logy else f"{y:.4g}"
        out.append(f'<line x1="{ml - 5}" y1="{Y:.2f}" x2="{ml}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{Y + 4:.2f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">t</text>')
    for k, (name, y) in enumerate(ys.items()):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(t, y) if math.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = mt + 15 + 18 * k
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 35}" y="{ly + 4}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --- argument parsing -------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nutaxis", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def threading(p):
        p.add_argument("--threads", type=int, default=1, help="worker threads for the stencil kernels")
        p.add_argument("--deterministic", action="store_true", help="force single-threaded kernels")
        p.add_argument("--outdir", help="output directory (overrides the config)")

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("config")
    threading(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="epsilon sweep of one scenario")
    p.add_argument("config")
    p.add_argument("--eps", nargs="+", required=True)
    p.add_argument("--max-ratio", type=float, default=2.0)
    threading(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gronwall", help="validate a monitor series against an ODE lemma")
    p.add_argument("monitors")
    p.add_argument("--lemma", choices=ode_lemmas.LEMMAS, default="L22")
    p.add_argument("--map", help="z=COLUMN,h=COLUMN,... (numbers are constant series)")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--param", action="append", help="pin a constant, e.g. a=1 or b=0.5")
    p.add_argument("--replay", choices=["energy"], help="use the built-in energy replay for L22")
    p.add_argument("--area", type=float, default=1.0, help="|Omega| for --replay energy")
    p.add_argument("--report")
    p.set_defaults(func=cmd_gronwall)

    p = sub.add_parser("ineq", help="functional inequality checks")
    p.add_argument("--which", choices=["sobolev", "l41", "l42", "l52"], required=True)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.125)
    p.add_argument("--q", type=int, default=4)
    p.add_argument("--c1", type=float)
    p.add_argument("--family", choices=ineq.FAMILIES, default="trig")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, nargs=2, default=[64, 64], metavar=("NX", "NY"))
    p.add_argument("--snapshots")
    p.add_argument("--report")
    p.set_defaults(func=cmd_ineq)

    p = sub.add_parser("weakcheck", help="weak-form residuals on stored snapshots")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--modes", default="1,0;1,1")
    p.add_argument("--tcut", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--report")
    p.set_defaults(func=cmd_weakcheck)

    p = sub.add_parser("plot", help="SVG line chart of monitor columns")
    p.add_argument("monitors")
    p.add_argument("--out", required=True)
    p.add_argument("--cols", required=True)
    p.add_argument("--logy", action="store_true")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("report", help="aggregate verdicts in an output directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError, ValueError, NutaxisError) as e:
        print(f"nutaxis {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
