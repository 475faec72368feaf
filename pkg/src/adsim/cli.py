"""Command-line front end.

    adsim run   [CONFIG | --preset NAME] [--out DIR]
    adsim mc    [SPEC | --preset mc1|mc2|mc3] [--jobs N] [--out DIR]
    adsim validate [CONFIG | --preset NAME]

Exit codes: 0 success, 1 simulation failure, 2 usage or configuration error.
Every artifact is a deterministic function of the inputs; the only wall-clock
data goes to ``meta.json`` next to them.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (PRESETS, MC_PRESETS, McReport, McSpec, ScenarioConfig, load_config,
                          mc_preset, preset, run_batch, simulate, validate)
from .simcore import COLUMNS, PropagationError, SimTrace

EXIT_OK, EXIT_SIM, EXIT_USAGE = 0, 1, 2

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# SVG rendering (line and scatter panels only)
# ---------------------------------------------------------------------------

W, H = 640, 400
ML, MR, MT, MB = 70, 150, 36, 50


def _num(v: float) -> str:
    return f"{v:.6g}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + k * step for k in range(int((hi - first) / step + 1e-9) + 1)]


def _limits(arrays) -> tuple[float, float]:
    vals = np.concatenate([a[np.isfinite(a)] for a in arrays]) if arrays else np.array([])
    if vals.size == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    if hi - lo < 1e-12:
        pad = max(abs(lo) * 0.05, 1.0)
        return lo - pad, hi + pad
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, title, xlabel, ylabel, xlim, ylim, equal=False):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        pw, ph = W - ML - MR, H - MT - MB
        if equal:
            sx = pw / (self.x1 - self.x0)
            sy = ph / (self.y1 - self.y0)
            s = min(sx, sy)
            cx, cy = 0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)
            self.x0, self.x1 = cx - 0.5 * pw / s, cx + 0.5 * pw / s
            self.y0, self.y1 = cy - 0.5 * ph / s, cy + 0.5 * ph / s
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
            f'<rect width="{W}" height="{H}" fill="white"/>',
            f'<text x="{ML + pw / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
            f'<text x="{ML + pw / 2}" y="{H - 10}" text-anchor="middle">{xlabel}</text>',
            f'<text x="16" y="{MT + ph / 2}" text-anchor="middle" '
            f'transform="rotate(-90 16 {MT + ph / 2})">{ylabel}</text>',
        ]
        for t in _ticks(self.x0, self.x1):
            px = self.px(t)
            self.parts.append(f'<line x1="{_num(px)}" y1="{MT}" x2="{_num(px)}" y2="{MT + ph}" '
                              f'stroke="#e5e5e5"/>')
            self.parts.append(f'<text x="{_num(px)}" y="{MT + ph + 15}" '
                              f'text-anchor="middle">{_num(t)}</text>')
        for t in _ticks(self.y0, self.y1):
            py = self.py(t)
            self.parts.append(f'<line x1="{ML}" y1="{_num(py)}" x2="{ML + pw}" y2="{_num(py)}" '
                              f'stroke="#e5e5e5"/>')
            self.parts.append(f'<text x="{ML - 6}" y="{_num(py + 4)}" '
                              f'text-anchor="end">{_num(t)}</text>')
        self.parts.append(f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" '
                          f'fill="none" stroke="black"/>')
        self.n_legend = 0

    def px(self, x):
        return ML + (x - self.x0) / (self.x1 - self.x0) * (W - ML - MR)

    def py(self, y):
        return MT + (self.y1 - y) / (self.y1 - self.y0) * (H - MT - MB)

    def legend(self, label, color):
        y = MT + 10 + 16 * self.n_legend
        x = W - MR + 10
        self.parts.append(f'<rect x="{x}" y="{y - 8}" width="12" height="8" fill="{color}"/>')
        self.parts.append(f'<text x="{x + 16}" y="{y}">{label}</text>')
        self.n_legend += 1

    def polyline(self, x, y, color, label):
        ok = np.isfinite(x) & np.isfinite(y)
        # break the line at gaps so non-finite samples are not bridged
        runs, cur = [], []
        for xi, yi, good in zip(x, y, ok):
            if good:
                cur.append(f"{_num(self.px(xi))},{_num(self.py(yi))}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for pts in runs:
            self.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.3" '
                              f'points="{" ".join(pts)}"/>')
        self.legend(label, color)

    def points(self, x, y, color, label):
        for xi, yi in zip(x, y):
            self.parts.append(f'<circle cx="{_num(self.px(xi))}" cy="{_num(self.py(yi))}" '
                              f'r="2" fill="{color}"/>')
        self.legend(label, color)

    def svg(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _thin(n: int, limit: int = 1500) -> np.ndarray:
    return np.arange(0, n, max(1, n // limit)) if n else np.arange(0)


def line_plot(title, xlabel, ylabel, series, equal=False) -> str:
    """``series`` is a list of (label, x, y) arrays."""
    xlim = _limits([s[1] for s in series])
    ylim = _limits([s[2] for s in series])
    c = _Canvas(title, xlabel, ylabel, xlim, ylim, equal=equal)
    for k, (label, x, y) in enumerate(series):
        c.polyline(np.asarray(x), np.asarray(y), PALETTE[k % len(PALETTE)], label)
    return c.svg()


def scatter_plot(title, xlabel, ylabel, groups) -> str:
    """``groups`` is a list of (label, color, x, y)."""
    xs = [np.asarray(g[2], float) for g in groups]
    ys = [np.asarray(g[3], float) for g in groups]
    c = _Canvas(title, xlabel, ylabel, _limits(xs), _limits(ys))
    for (label, color, _, _), x, y in zip(groups, xs, ys):
        c.points(x, y, color, label)
    return c.svg()


def trace_plots(trace: SimTrace) -> dict[str, str]:
    idx = _thin(len(trace))
    col = lambda name: trace[name][idx]
    t = col("t")
    return {
        "trajectories.svg": line_plot(
            "Trajectories", "x (m)", "y (m)",
            [("pursuer", col("x_P"), col("y_P")), ("evader", col("x_E"), col("y_E")),
             ("defender", col("x_D"), col("y_D"))], equal=True),
        "time_to_go.svg": line_plot(
            "Time-to-go", "t (s)", "t_go (s)",
            [("t_go EP", t, col("tgo_EP")), ("t_go DP", t, col("tgo_DP"))]),
        "accelerations.svg": line_plot(
            "Accelerations", "t (s)", "a (m/s^2)",
            [("a_P", t, col("a_P")), ("a_E", t, col("a_E")), ("a_D", t, col("a_D"))]),
        "defender_manifolds.svg": line_plot(
            "Defender speed and manifolds", "t (s)", "value",
            [("v_D / 100 (m/s)", t, col("v_D") / 100.0), ("s1 x 100 (rad/s)", t, col("s1") * 100.0),
             ("s2 (s)", t, col("s2"))]),
    }


def mc_scatter(report: McReport) -> str:
    names = list(report.runs[0].values) if report.runs else ["x", "y"]
    if len(names) == 1:
        names = names * 2
    xn, yn = names[0], names[1]
    groups = []
    for verdict, color in (("DefenderWins", "#1f77b4"), ("PursuerWins", "#d62728"),
                           ("Timeout", "#7f7f7f"), ("Degenerate", "#ff7f0e")):
        rows = [r for r in report.runs if r.verdict == verdict]
        if rows:
            groups.append((verdict, color, [r.values[xn] for r in rows],
                           [r.values[yn] for r in rows]))
    title = f"Win rate {100 * report.win_rate:.2f}% over {report.n_runs} runs"
    return scatter_plot(title, xn, yn, groups)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _write(out: Path, name: str, text: str) -> None:
    (out / name).write_text(text)


def _write_meta(out: Path, argv, elapsed: float) -> None:
    meta = {"version": __version__, "argv": list(argv),
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
            "elapsed_s": round(elapsed, 3)}
    _write(out, "meta.json", json.dumps(meta, indent=2) + "\n")


def _scenario(args) -> ScenarioConfig:
    if args.preset and args.config:
        raise UsageError("give either a config path or --preset, not both")
    if args.preset:
        if args.preset not in PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
        scen = preset(args.preset)
    elif args.config:
        scen = _load(args.config, load_config)
    else:
        raise UsageError("a config path or --preset is required")
    over = {}
    if getattr(args, "dt", None) is not None:
        over["dt"] = args.dt
    if getattr(args, "tmax", None) is not None:
        over["t_max"] = args.tmax
    return scen.replace(**over) if over else scen


def _load(path, loader):
    try:
        return loader(path)
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: invalid configuration: {exc}") from None


def _trace_json(trace: SimTrace) -> str:
    cols = {name: [float(f"{v:.9g}") for v in trace[name]] for name in COLUMNS}
    return json.dumps(cols, allow_nan=True) + "\n"


def cmd_run(args) -> int:
    scen = _scenario(args)
    out = Path(args.out)
    t0 = time.perf_counter()
    try:
        trace, outcome = simulate(scen)
    except PropagationError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_SIM
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        _write(out, "trace.json", _trace_json(trace))
    else:
        _write(out, "trace.csv", trace.to_csv())
    _write(out, "outcome.json", json.dumps(outcome.to_dict(), indent=2, sort_keys=True) + "\n")
    for name, svg in trace_plots(trace).items():
        _write(out, name, svg)
    _write_meta(out, sys.argv, time.perf_counter() - t0)
    line = f"{outcome.verdict.value}"
    if outcome.t_intercept is not None:
        line += f"  t_intercept={outcome.t_intercept:.3f} s"
    if outcome.achieved_margin is not None:
        line += f"  margin={outcome.achieved_margin:.3f} s"
    line += f"  min r_DP={outcome.min_r_DP:.2f} m  min r_EP={outcome.min_r_EP:.2f} m"
    print(line)
    return EXIT_OK


def _mc_spec(args) -> McSpec:
    if args.preset and args.spec:
        raise UsageError("give either a spec path or --preset, not both")
    if args.preset:
        if args.preset not in MC_PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {sorted(MC_PRESETS)}")
        spec = mc_preset(args.preset)
    elif args.spec:
        spec = _load(args.spec, lambda p: McSpec.from_dict(json.loads(Path(p).read_text())))
    else:
        raise UsageError("a spec path or --preset is required")
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    if args.runs is not None:
        spec = dataclasses.replace(spec, n_runs=args.runs)
    over = {}
    if args.dt is not None:
        over["dt"] = args.dt
    if args.tmax is not None:
        over["t_max"] = args.tmax
    if over:
        spec = dataclasses.replace(spec, base=spec.base.replace(**over))
    return spec


def _runs_json(report: McReport) -> str:
    rows = [{"index": r.index, **r.values, "verdict": r.verdict, "t_intercept": r.t_intercept,
             "achieved_margin": r.achieved_margin, "min_r_DP": r.min_r_DP,
             "min_r_EP": r.min_r_EP} for r in report.runs]
    return json.dumps(rows, indent=1) + "\n"


def cmd_mc(args) -> int:
    spec = _mc_spec(args)
    out = Path(args.out)
    t0 = time.perf_counter()
    report = run_batch(spec, jobs=args.jobs)
    out.mkdir(parents=True, exist_ok=True)
    _write(out, "report.json", report.to_json())
    if args.format == "json":
        _write(out, "runs.json", _runs_json(report))
    else:
        _write(out, "runs.csv", report.to_csv())
    _write(out, "scatter.svg", mc_scatter(report))
    _write_meta(out, sys.argv, time.perf_counter() - t0)
    lo, hi = report.interval
    print(f"win rate {100 * report.win_rate:.2f}% ({report.wins}/{report.n_runs}), "
          f"95% interval [{100 * lo:.2f}%, {100 * hi:.2f}%]")
    return EXIT_OK


def cmd_validate(args) -> int:
    scen = _scenario(args)
    findings = validate(scen)
    if not findings:
        print("OK")
        return EXIT_OK
    for severity, msg in findings:
        print(f"{severity}: {msg}")
    return EXIT_USAGE if any(s == "error" for s, _ in findings) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adsim", description="Pursuer/evader/defender engagement simulator")
    ap.add_argument("--version", action="version", version=f"adsim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario")
    run.add_argument("config", nargs="?", help="scenario JSON file")
    run.add_argument("--preset", help=f"one of {', '.join(sorted(PRESETS))}")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--dt", type=float, help="integration step (s)")
    run.add_argument("--tmax", type=float, help="simulation horizon (s)")
    run.add_argument("--format", choices=("csv", "json"), default="csv", help="trace format")
    run.set_defaults(func=cmd_run)

    mc = sub.add_parser("mc", help="run a Monte-Carlo batch")
    mc.add_argument("spec", nargs="?", help="Monte-Carlo spec JSON file")
    mc.add_argument("--preset", help=f"one of {', '.join(sorted(MC_PRESETS))}")
    mc.add_argument("--jobs", type=int, help="worker processes (default: $AD_SIM_THREADS or 1)")
    mc.add_argument("--out", default="out", help="output directory")
    mc.add_argument("--seed", type=int, help="override the spec seed")
    mc.add_argument("--runs", type=int, help="override the number of runs")
    mc.add_argument("--dt", type=float, help="integration step (s)")
    mc.add_argument("--tmax", type=float, help="simulation horizon (s)")
    mc.add_argument("--format", choices=("csv", "json"), default="csv", help="per-run table format")
    mc.set_defaults(func=cmd_mc)

    val = sub.add_parser("validate", help="check a scenario for gain and margin conditions")
    val.add_argument("config", nargs="?", help="scenario JSON file")
    val.add_argument("--preset", help=f"one of {', '.join(sorted(PRESETS))}")
    val.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
