"""Command-line entry point: configuration, run directories, manifests and plots.

Configuration files are flat ``key = value`` text (``#`` starts a comment).
Resolution order is: built-in defaults < per-command defaults < file <
``--key value`` flags.  Unknown keys and values of the wrong type are usage
errors (exit code 2).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import json
import math
import platform
import sys
import time
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FracheatError, UsageError
from .experiments import (
    STUDY_DEFAULTS,
    StudyConfig,
    StudyReport,
    admissible_params,
    make_data,
    study_continuity,
    study_doubly_critical,
    study_global,
    study_scaling,
    study_smoothing,
    study_weak_convergence,
)
from .norms import MorreyParams, besov_morrey_norm, measure_morrey_norm, morrey_norm, DiscreteMeasure, as_field
from .operators import OperatorBackend, p_alpha, s_alpha
from .solver import solve
from .spectral import filter_bank, heat_semigroup, write_field, write_field_csv
from .specfun import gamma_fn, mittag_leffler, wright_moment, wright_phi

__all__ = ["main", "parse_config", "build_parser", "RunManifest"]

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}

STUDIES = {
    "verify-smoothing": ("smoothing", study_smoothing),
    "verify-scaling": ("scaling", study_scaling),
    "verify-weak-convergence": ("weak_convergence", study_weak_convergence),
    "verify-continuity": ("continuity", study_continuity),
    "doubly-critical": ("doubly_critical", study_doubly_critical),
    "global": ("global", study_global),
}


# ---------------------------------------------------------------------------
# Configuration


def _schema() -> dict[str, type]:
    defaults = StudyConfig()
    return {f.name: type(getattr(defaults, f.name)) for f in dataclasses.fields(StudyConfig)}


def _coerce(key: str, raw, kind: type):
    if isinstance(raw, kind) and not (kind is int and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError as exc:
        raise UsageError(f"{key}: expected {kind.__name__}, got {text!r}", key) from exc


def read_config_file(path) -> dict[str, str]:
    """Flat key = value file, parsed with configparser under a dummy section."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file {p} does not exist", "config")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[config]\n" + p.read_text())
    except configparser.Error as exc:
        raise UsageError(f"cannot parse {p}: {exc}", "config") from exc
    return dict(cp["config"])


def parse_config(path=None, flags: dict | None = None, study: str | None = None, *,
                 require_admissible: bool = False) -> StudyConfig:
    """Resolve defaults < study defaults < file < flags into a StudyConfig."""
    schema = _schema()
    values: dict = {}
    layers = [STUDY_DEFAULTS.get(study, {}) if study else {}]
    if path is not None:
        layers.append(read_config_file(path))
    layers.append(flags or {})
    for layer in layers:
        for key, raw in layer.items():
            if key not in schema:
                raise UsageError(f"unknown configuration key {key!r}", key)
            values[key] = _coerce(key, raw, schema[key])
    try:
        cfg = StudyConfig(**values)
        # build the derived objects once so that range errors surface here
        cfg.grid, cfg.fp, cfg.space, cfg.time_grid(), cfg.data_spec
        OperatorBackend(cfg.backend)
    except UsageError:
        raise
    except (FracheatError, ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    if require_admissible and not cfg.force:
        rep = admissible_params(cfg.fp, cfg.space)
        if not rep.local_ok:
            bad = "s" if any("s <" in r or "s ≥" in r for r in rep.reasons_local) else "p"
            raise UsageError("inadmissible parameters without --force: " + "; ".join(rep.reasons_local), bad)
    return cfg


# ---------------------------------------------------------------------------
# Run directory and manifest


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return _jsonable(v.item())
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclasses.dataclass
class RunManifest:
    command: str
    config: dict
    input_hashes: dict
    version: str = __version__
    started: str = ""
    elapsed_s: float = 0.0
    warnings: list = dataclasses.field(default_factory=list)
    verdicts: dict = dataclasses.field(default_factory=dict)
    outputs: list = dataclasses.field(default_factory=list)
    environment: dict = dataclasses.field(default_factory=dict)

    def write(self, run_dir: Path) -> Path:
        path = run_dir / "manifest.json"
        path.write_text(json.dumps(_jsonable(dataclasses.asdict(self)), indent=2, sort_keys=True) + "\n")
        return path


def _hash_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _make_run_dir(out: Path, command: str, config: dict) -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    digest = _hash_text(command + json.dumps(_jsonable(config), sort_keys=True))[:10]
    base = out / f"{stamp}-{command}-{digest}"
    run_dir = base
    k = 1
    while run_dir.exists():
        run_dir = Path(f"{base}-{k}")
        k += 1
    run_dir.mkdir(parents=True)
    return run_dir


def write_csv(path: Path, rows: list[dict]) -> None:
    """Comma-separated, header row, repr-precision floats; independent of the locale."""
    keys: list[str] = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([_cell(r.get(k, "")) for k in keys])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (dict, list, tuple)):
        return json.dumps(_jsonable(v))
    return v


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_specfun(args) -> int:
    xs = args.x
    rows = []
    for x in xs:
        if args.fn == "gamma":
            rows.append(dict(x=x, value=gamma_fn(x), error=0.0, branch="math.gamma"))
        elif args.fn == "wright_phi":
            v, e, b = wright_phi(args.alpha, x, full_output=True)
            rows.append(dict(x=x, value=float(v), error=float(e), branch=b))
        elif args.fn == "wright_moment":
            rows.append(dict(x=x, value=wright_moment(args.alpha, x), error=0.0, branch="closed_form"))
        else:
            v, e, b = mittag_leffler(args.alpha, args.beta, -abs(x) if args.negate else x, full_output=True)
            rows.append(dict(x=x, value=float(v), error=float(e), branch=str(b)))
    w = csv.writer(sys.stdout)
    w.writerow(["x", "value", "error", "branch"])
    for r in rows:
        w.writerow([repr(float(r["x"])), repr(float(r["value"])), repr(float(r["error"])), r["branch"]])
    return 0


def _cmd_apply(cfg: StudyConfig, args, run_dir: Path, man: RunManifest) -> int:
    grid = cfg.grid
    mu = make_data(cfg.data_spec, grid, cfg.gamma)
    backend = OperatorBackend(cfg.backend)
    rows = []
    for t in args.t:
        if args.op == "heat":
            u = heat_semigroup(t, as_field(mu))
        elif args.op == "p_alpha":
            u = p_alpha(t, mu, cfg.fp, backend)
        else:
            u = s_alpha(t, mu, cfg.fp, backend)
        name = f"{args.op}_t{t:.6g}"
        write_field(run_dir / f"{name}.bin", u)
        write_field_csv(run_dir / f"{name}.csv", u)
        man.outputs += [f"{name}.bin", f"{name}.csv"]
        rows.append(dict(op=args.op, t=t, max_abs=u.max_abs(), integral=u.integral()))
    write_csv(run_dir / "apply.csv", rows)
    man.outputs.append("apply.csv")
    return 0


def _cmd_norms(cfg: StudyConfig, args, run_dir: Path, man: RunManifest) -> int:
    grid = cfg.grid
    mu = make_data(cfg.data_spec, grid, cfg.gamma)
    rows = []
    for local in (True, False):
        mp = MorreyParams(cfg.p, cfg.q, local)
        if isinstance(mu, DiscreteMeasure) and cfg.p == cfg.q == 1:
            v = measure_morrey_norm(mu, cfg.p, local, centers_stride=cfg.centers_stride)
        else:
            v = morrey_norm(as_field(mu), mp, cfg.centers_stride)
        rows.append(dict(norm="morrey_local" if local else "morrey_global", p=cfg.p, q=cfg.q, s="", value=v))
    bank = filter_bank(grid, cfg.homogeneous)
    v = besov_morrey_norm(mu, cfg.space, bank, centers_stride=cfg.centers_stride)
    rows.append(dict(norm="besov_morrey_homogeneous" if cfg.homogeneous else "besov_morrey",
                     p=cfg.p, q=cfg.q, s=cfg.s, value=v))
    write_csv(run_dir / "norms.csv", rows)
    man.outputs.append("norms.csv")
    return 0


def _cmd_solve(cfg: StudyConfig, args, run_dir: Path, man: RunManifest) -> int:
    mu = make_data(cfg.data_spec, cfg.grid, cfg.gamma)
    res = solve(mu, cfg.solver_config(), force=cfg.force)
    tr = res.trajectory
    for m in range(1, tr.grid.M + 1):
        name = f"node_{m:04d}.bin"
        write_field(run_dir / name, tr.state(m))
        man.outputs.append(name)
    rows = [dict(iteration=k + 1, distance=d, xt_norm=res.xt_norms[k + 1],
                 ratio=res.ratios[k - 1] if k >= 1 else "")
            for k, d in enumerate(res.distances)]
    write_csv(run_dir / "iterations.csv", rows)
    write_csv(run_dir / "times.csv", [dict(node=m, t=float(t)) for m, t in enumerate(tr.times)])
    man.outputs += ["iterations.csv", "times.csv"]
    man.verdicts = res.as_dict()
    return 0


def _cmd_study(cfg: StudyConfig, name: str, fn, run_dir: Path, man: RunManifest, verify: bool) -> int:
    rep: StudyReport = fn(cfg)
    write_csv(run_dir / f"{rep.name}.csv", rep.rows)
    man.outputs.append(f"{rep.name}.csv")
    man.verdicts = {"checks": rep.checks, "passed": rep.passed, "summary": rep.summary}
    for row in (f"{k}: {'pass' if v else 'FAIL'}" for k, v in rep.checks.items()):
        print(row)
    if verify and rep.passed is False:
        return 1
    return 0


def _cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        raise UsageError(f"{run_dir} is not a directory", "run_dir")
    made = 0
    for path in sorted(run_dir.glob("*.csv")):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            continue
        numeric = [k for k in rows[0] if _all_float(r[k] for r in rows)]
        if len(numeric) < 2:
            continue
        xkey, ykeys = numeric[0], numeric[1:]
        fig, ax = plt.subplots(figsize=(6, 4))
        x = np.array([float(r[xkey]) for r in rows])
        for k in ykeys:
            y = np.array([float(r[k]) for r in rows])
            ax.plot(x, y, marker="o", ms=3, label=k)
        pos = lambda a: np.all(a > 0)  # noqa: E731
        if pos(x) and x.max() / x.min() > 100:
            ax.set_xscale("log")
        if all(pos(np.array([float(r[k]) for r in rows])) for k in ykeys):
            ax.set_yscale("log")
        ax.set_xlabel(xkey)
        ax.legend(fontsize=7)
        ax.set_title(path.stem)
        fig.tight_layout()
        fig.savefig(path.with_suffix(".svg"))
        plt.close(fig)
        made += 1
    print(f"{made} plot(s) written to {run_dir}")
    return 0


def _all_float(values) -> bool:
    try:
        for v in values:
            f = float(v)
            if not math.isfinite(f):
                return False
        return True
    except (TypeError, ValueError):
        return False


# ---------------------------------------------------------------------------
# Parser


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration keys (override the config file)")
    for key, kind in _schema().items():
        if key == "force":
            continue
        if kind is bool:
            g.add_argument(f"--{key}", dest=f"cfg_{key}", nargs="?", const="true", metavar="BOOL")
        else:
            g.add_argument(f"--{key}", dest=f"cfg_{key}", metavar=kind.__name__.upper())
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--out", default="runs", help="parent directory for run directories (default: runs)")
    p.add_argument("--force", action="store_true", help="run outside the admissible parameter window")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracheat", description="Time-fractional semilinear heat equation laboratory")
    parser.add_argument("--version", action="version", version=f"fracheat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("specfun", help="evaluate special functions, CSV on stdout")
    sp.add_argument("fn", choices=["gamma", "wright_phi", "wright_moment", "mittag_leffler"])
    sp.add_argument("x", type=float, nargs="+")
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--negate", action="store_true", help="evaluate E_{alpha,beta}(-|x|)")

    ap = sub.add_parser("apply", help="apply P_alpha, S_alpha or the heat semigroup to the configured datum")
    ap.add_argument("--op", choices=["p_alpha", "s_alpha", "heat"], default="p_alpha")
    ap.add_argument("--t", type=float, nargs="+", default=[1.0])
    _add_config_flags(ap)

    for name, helptext in [
        ("norms", "Morrey and Besov-Morrey norms of the configured datum"),
        ("solve", "Picard iteration for the mild solution"),
        ("verify-smoothing", "fitted smoothing slopes against theory"),
        ("verify-scaling", "scale invariance of the solution map"),
        ("verify-weak-convergence", "weak convergence to the datum as t -> 0"),
        ("verify-continuity", "continuity in time of the Besov-Morrey norm"),
        ("doubly-critical", "doubly critical case study"),
        ("global", "global small-data run"),
    ]:
        _add_config_flags(sub.add_parser(name, help=helptext))

    pp = sub.add_parser("plot", help="render one SVG per CSV table of a run directory")
    pp.add_argument("run_dir")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "specfun":
            return _cmd_specfun(args)
        if args.command == "plot":
            return _cmd_plot(args)
        return _run(args)
    except UsageError as exc:
        key = f" [{exc.key}]" if getattr(exc, "key", None) else ""
        print(f"fracheat: usage error{key}: {exc}", file=sys.stderr)
        return 2
    except FracheatError as exc:
        print(f"fracheat: error: {exc}", file=sys.stderr)
        return 2


def _run(args) -> int:
    flags = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    if args.force:
        flags["force"] = "true"
    study, fn = STUDIES.get(args.command, (None, None))
    cfg = parse_config(args.config, flags, study,
                       require_admissible=args.command in ("solve", "verify-scaling", "verify-weak-convergence",
                                                           "verify-continuity"))
    inputs = {}
    if args.config:
        inputs["config"] = _hash_text(Path(args.config).read_text())
    inputs["data_spec"] = _hash_text(json.dumps(_jsonable(dataclasses.asdict(cfg.data_spec)), sort_keys=True))
    man = RunManifest(args.command, cfg.as_dict(), inputs,
                      started=datetime.now(timezone.utc).isoformat(timespec="seconds"),
                      environment={"python": platform.python_version(), "numpy": np.__version__})
    run_dir = _make_run_dir(Path(args.out), args.command, cfg.as_dict())
    t0 = time.perf_counter()
    code = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            if args.command == "apply":
                code = _cmd_apply(cfg, args, run_dir, man)
            elif args.command == "norms":
                code = _cmd_norms(cfg, args, run_dir, man)
            elif args.command == "solve":
                code = _cmd_solve(cfg, args, run_dir, man)
            else:
                code = _cmd_study(cfg, study, fn, run_dir, man, args.command.startswith("verify-"))
        finally:
            man.elapsed_s = time.perf_counter() - t0
            seen = set()
            for w in caught:
                msg = f"{w.category.__name__}: {w.message}"
                if msg not in seen:
                    seen.add(msg)
                    man.warnings.append(msg)
            man.write(run_dir)
    print(run_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
