"""Command-line interface: ``lpdens {estimate,grid,simulate,oracle,hull}``.

Exit codes: 0 success, 1 usage or configuration error, 2 empty grid without
fallback, 3 I/O error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from lpdens import __version__
from lpdens import io as lio
from lpdens.domain import EstimationContext
from lpdens.errors import (DegenerateHull, EmptyGrid, EnvelopeFailure, NonConvergence, QuadratureFailure,
                           SingularGram)
from lpdens.selection import SelectionConfig, plan_grid, select

EXIT_OK, EXIT_USAGE, EXIT_EMPTY_GRID, EXIT_IO, EXIT_NUMERICAL = 0, 1, 2, 3, 4
NUMERICAL = (QuadratureFailure, SingularGram, NonConvergence, EnvelopeFailure, DegenerateHull)

DEFAULTS = {
    "domain": None, "data": None, "t": None, "t_grid": None,
    "delta": 2.0, "rho": None, "m_rule": "simple", "seed": 0, "output_dir": ".",
    "clip_nonneg": False, "full": False, "fallback_on_empty_grid": True, "jobs": None,
    "n": None, "density": "poly_fk", "k": 1.0, "R": 200, "degrees": None, "bandwidths": None,
    "alpha": 0.5,
}
# keys that never change outputs; kept out of the manifest
VOLATILE = ("jobs", "config", "output_dir")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, data: bool = True):
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON config file (a manifest.json also works)")
    p.add_argument("--output-dir", dest="output_dir", default=S)
    p.add_argument("--t", action="append", default=S, metavar="X,Y",
                   help="evaluation point, comma separated; repeatable")
    p.add_argument("--t-grid", dest="t_grid", default=S, metavar="X0:X1:NX,Y0:Y1:NY",
                   help="regular grid of evaluation points")
    p.add_argument("--delta", type=float, default=S)
    p.add_argument("--rho", type=float, default=S)
    p.add_argument("--m-rule", dest="m_rule", default=S, help="simple, zero, or a comma list of degrees")
    p.add_argument("--no-fallback", dest="fallback_on_empty_grid", action="store_false", default=S)
    p.add_argument("--clip-nonneg", dest="clip_nonneg", action="store_true", default=S)
    p.add_argument("--jobs", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    if data:
        p.add_argument("--data", default=S, help="CSV of sample points")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = _Parser(prog="lpdens", description="Local polynomial density estimation with adaptive selection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="adaptive estimate at one or more points")
    _common(p)
    p.add_argument("--domain", default=S, help="domain JSON file")

    p = sub.add_parser("grid", help="print the candidate grid for a sample size")
    _common(p, data=False)
    p.add_argument("--domain", default=S)
    p.add_argument("--n", type=int, default=S)

    for name, help_ in (("simulate", "replication study with oracle and adaptive estimates"),
                        ("oracle", "oracle search over the fixed degree/bandwidth grid")):
        p = sub.add_parser(name, help=help_)
        _common(p, data=False)
        p.add_argument("--density", choices=("poly_fk", "gauss_gk"), default=S)
        p.add_argument("--k", type=float, default=S)
        p.add_argument("--n", default=S, help="sample size or comma list")
        p.add_argument("--R", type=int, default=S)
        p.add_argument("--degrees", default=S, help="comma list of degrees")
        p.add_argument("--bandwidths", default=S, help="comma list, or start:stop:step")
        p.add_argument("--full", action="store_true", default=S, help="full-scale protocol (hours)")

    p = sub.add_parser("hull", help="estimate on the convex hull of the sample")
    _common(p)
    p.add_argument("--alpha", type=float, default=S)
    return parser


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def _load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError:
        raise
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(raw, dict) and "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]
    if not isinstance(raw, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    unknown = set(raw) - set(DEFAULTS) - {"command"}
    if unknown:
        raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
    return raw


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and explicit flags, in increasing priority."""
    flags = vars(args).copy()
    command = flags.pop("command")
    cfg = dict(DEFAULTS)
    if "config" in flags:
        file_cfg = _load_config(flags.pop("config"))
        if file_cfg.get("command", command) != command:
            raise UsageError(f"config was written for {file_cfg['command']!r}, not {command!r}")
        file_cfg.pop("command", None)
        cfg.update(file_cfg)
    cfg.update(flags)
    cfg["command"] = command
    if cfg["jobs"] is None:
        cfg["jobs"] = os.cpu_count() or 1
    if command in ("simulate", "oracle") and cfg["full"]:
        cfg["R"] = 5000 if "R" not in flags else cfg["R"]
    return cfg


def _floats(text, what):
    try:
        return [float(v) for v in str(text).split(",")]
    except ValueError as exc:
        raise UsageError(f"bad {what}: {text!r}") from exc


def _t_points(cfg, d=None) -> np.ndarray:
    if cfg.get("t_grid"):
        axes = []
        for part in str(cfg["t_grid"]).split(","):
            try:
                a, b, num = part.split(":")
                axes.append(np.linspace(float(a), float(b), int(num)))
            except ValueError as exc:
                raise UsageError(f"bad --t-grid {cfg['t_grid']!r}") from exc
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])
    ts = cfg.get("t")
    if not ts:
        raise UsageError("no evaluation point given (--t or --t-grid)")
    if isinstance(ts, str):
        ts = [ts]
    pts = [(_floats(t, "--t") if isinstance(t, str) else [float(v) for v in t]) for t in ts]
    if len({len(p) for p in pts}) != 1 or (d is not None and len(pts[0]) != d):
        raise UsageError("evaluation points have the wrong dimension")
    return np.array(pts, dtype=np.float64)


def _selection(cfg) -> SelectionConfig:
    rule = cfg["m_rule"]
    if isinstance(rule, str) and rule not in ("simple", "zero"):
        rule = [int(v) for v in _floats(rule, "--m-rule")]
    try:
        return SelectionConfig(delta=float(cfg["delta"]), m_rule=rule, rho=cfg["rho"],
                               fallback_on_empty_grid=bool(cfg["fallback_on_empty_grid"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _need(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _outdir(cfg) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, cfg: dict) -> None:
    kept = {k: v for k, v in sorted(cfg.items()) if k not in VOLATILE}
    lio.write_json(out / "manifest.json", {"library": "lpdens", "version": __version__,
                                            "seed": cfg.get("seed"), "config": kept})


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _clip(x, cfg):
    return max(x, 0.0) if cfg["clip_nonneg"] else x


def cmd_estimate(cfg: dict) -> int:
    _need(cfg, "domain", "data")
    domain = lio.read_domain(cfg["domain"])
    X = lio.read_sample_csv(cfg["data"])
    if X.shape[1] != domain.d:
        raise UsageError(f"data has {X.shape[1]} columns, domain has dimension {domain.d}")
    sel = _selection(cfg)
    ts = _t_points(cfg, domain.d)
    inside = domain.contains_many(X)
    reports = []
    for t in ts:
        rep = select(EstimationContext(domain, t, sel.rho), X, sel, inside=inside)
        body = {"t": t.tolist(), **rep.to_dict()}
        body["f_hat_adaptive"] = _clip(rep.f_hat_adaptive, cfg)
        for w in rep.warnings:
            print(f"warning: {w}", file=sys.stderr)
        print(",".join(lio.fmt_float(v) for v in [*t, body["f_hat_adaptive"]]))
        reports.append(body)
    out = _outdir(cfg)
    lio.write_json(out / "report.json", reports[0] if len(reports) == 1 else {"reports": reports})
    write_manifest(out, cfg)
    return EXIT_OK


def cmd_grid(cfg: dict) -> int:
    _need(cfg, "domain", "n")
    domain = lio.read_domain(cfg["domain"])
    sel = _selection(cfg)
    t = _t_points(cfg, domain.d)[0]
    ctx = EstimationContext(domain, t, sel.rho)
    plan = plan_grid(ctx, int(cfg["n"]), sel)
    header = ["ell", "m", "h", "W_h", "lambda", "qualifies"]
    rows = [[r.ell, r.gamma.m, r.gamma.h, r.W_h, r.lam, int(r.qualifies)] for r in plan.rows]
    out = _outdir(cfg)
    lio.write_csv(out / "grid.csv", header, rows)
    sys.stdout.write((out / "grid.csv").read_text(encoding="utf-8"))
    for w in plan.warnings:
        print(f"note: {w}", file=sys.stderr)
    write_manifest(out, cfg)
    return EXIT_OK


def _study_config(cfg):
    from lpdens import simulate as sim

    density = sim.make_test_density(cfg["density"], float(cfg["k"]))
    if cfg["full"]:
        sizes = sim.FULL_SAMPLE_SIZES
        degrees, H = sim.FULL_DEGREES, sim.FULL_BANDWIDTHS
    else:
        sizes = (200,)
        degrees, H = sim.FULL_DEGREES, sim.DESK_BANDWIDTHS
    if cfg["n"] is not None:
        sizes = tuple(int(v) for v in _floats(cfg["n"], "--n"))
    if cfg["degrees"] is not None:
        degrees = tuple(int(v) for v in _floats(cfg["degrees"], "--degrees"))
    if cfg["bandwidths"] is not None:
        H = _parse_bandwidths(str(cfg["bandwidths"]))
    t = tuple(_t_points(cfg, 2)[0]) if (cfg.get("t") or cfg.get("t_grid")) else (0.0, 0.0)
    try:
        return sim.StudyConfig(density, t, sizes, int(cfg["R"]), degrees, H, int(cfg["seed"]), _selection(cfg))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _parse_bandwidths(text):
    if ":" in text:
        a, b, step = (float(v) for v in text.split(":"))
        count = int(round((b - a) / step)) + 1
        return tuple(round(a + step * i, 12) for i in range(count))
    return tuple(_floats(text, "--bandwidths"))


def _write_study(out: Path, scfg, study, with_replications: bool):
    from lpdens import simulate as sim

    rows = []
    for res, orc in zip(study["sizes"], study["oracles"]):
        rows.extend([res.n, *r] for r in orc.table_rows())
    lio.write_csv(out / "mse_table.csv", ["n", "m", "h", "mse", "se", "n_fail"], rows)
    if with_replications:
        rep_rows = []
        for res in study["sizes"]:
            for r in range(res.R):
                rep_rows.append([r, res.n, float(res.adaptive[r]), int(res.m_sel[r]), float(res.h_sel[r])])
        lio.write_csv(out / "replications.csv", ["rep", "n", "f_hat", "m_sel", "h_sel"], rep_rows)
    summary = sim.study_summary(scfg, study)
    lio.write_json(out / ("summary.json" if with_replications else "oracle.json"), summary)
    return summary


def _cmd_study(cfg: dict, with_replications: bool) -> int:
    from lpdens import simulate as sim

    scfg = _study_config(cfg)
    study = sim.run_study(scfg, jobs=int(cfg["jobs"]))
    out = _outdir(cfg)
    summary = _write_study(out, scfg, study, with_replications)
    for s in summary["sizes"]:
        o = s["oracle"]
        print(f"n={s['n']} m*={o['m_star']} h*={lio.fmt_float(o['h_star'])} "
              f"rmse_oracle={lio.fmt_float(o['mse'] ** 0.5)} rmse_adaptive={lio.fmt_float(s['adaptive']['rmse'])}")
        for w in s["warnings"]:
            print(f"note: n={s['n']}: {w}", file=sys.stderr)
    write_manifest(out, cfg)
    return EXIT_OK


def cmd_simulate(cfg: dict) -> int:
    return _cmd_study(cfg, True)


def cmd_oracle(cfg: dict) -> int:
    return _cmd_study(cfg, False)


def cmd_hull(cfg: dict) -> int:
    from lpdens import hull2d

    _need(cfg, "data")
    X = lio.read_sample_csv(cfg["data"])
    if X.shape[1] != 2:
        raise UsageError("hull estimation needs planar data")
    ts = _t_points(cfg, 2)
    est = hull2d.estimate_unknown_domain(X, float(cfg["alpha"]), ts, _selection(cfg), cfg["clip_nonneg"])
    out = _outdir(cfg)
    lio.write_csv(out / "hull_estimates.csv", ["tx", "ty", "inside_hull", "p_hat", "f_hat"], est.rows())
    info = {"vertices": est.hull.vertices.tolist(), "area": est.hull.area(), "p_hat": est.p_hat,
            "first_part_size": est.split.first_part_size, "second_part_size": est.split.second_part_size,
            "n_retained": est.n_retained}
    if cfg.get("t_grid"):
        axes = [np.linspace(*(float(v) for v in part.split(":")[:2]), int(part.split(":")[2]))
                for part in str(cfg["t_grid"]).split(",")]
        values = np.array([e.f_hat for e in est.points]).reshape(len(axes[0]), len(axes[1]))
        info["l1_mass"] = hull2d.trapezoid_l1(axes[0], axes[1], values)
    lio.write_json(out / "hull.json", info)
    print(f"p_hat={lio.fmt_float(est.p_hat)} hull_vertices={len(est.hull.vertices)}")
    write_manifest(out, cfg)
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "grid": cmd_grid, "simulate": cmd_simulate,
            "oracle": cmd_oracle, "hull": cmd_hull}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.ERROR, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg["command"]](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmptyGrid as exc:
        print(f"error: empty grid: {exc}", file=sys.stderr)
        return EXIT_EMPTY_GRID
    except NUMERICAL as exc:
        print(f"error: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
