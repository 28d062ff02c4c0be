"""Command-line front end.

Every run writes its outputs plus ``manifest.json`` (resolved config, toolkit
version, SHA-256 of each output) into one directory. Exit codes: 0 success,
2 configuration error, 3 estimator failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import fcntl
import hashlib
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import classify as cl
from . import coarse as co
from . import counterexample as cx
from .errors import ErgosimError
from .measure import (
    DensitySpec,
    ParticleMeasure,
    TestFunction,
    grid_measure,
    integrate,
    sample_density,
    write_csv,
)
from .plotdata import write_plotdata, write_svg
from .rng import generator
from .systems import ZOO, SystemSpec, bowen_context, evolve, get_system, integrate_trajectory, trajectory

OUT_ENV = "ERGOSIM_OUT"


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------
# option schema: key -> (type, default, help); flags are --key-with-dashes

COMMON = {
    "seed": (int, 0, "root seed; every random stream is derived from it"),
    "out": (str, None, f"output directory (default ${OUT_ENV}/<command> or ./runs/<command>)"),
    "workers": (int, 1, "threads for parallel estimators (results do not depend on it)"),
    "theta": (float, 0.05, "convergence threshold for verdicts"),
    "mc_sigma": (float, 3.0, "MC comparison tolerance, in standard errors"),
}

SYSTEM = {
    "system": (str, None, f"system id: {', '.join(sorted(ZOO))}"),
    "y0": (float, None, "counterexample: initial fiber coordinate"),
    "base_omega": (str, "1,1.4142135623730951", "counterexample: base torus frequency"),
    "field_grid": (int, 10_000, "counterexample: grid size for the field bound M"),
}

SCHEMAS = {
    "simulate": {
        **SYSTEM,
        "x0": (str, None, "initial point, comma separated; p/q entries iterate exactly on maps"),
        "steps": (int, 10, "number of iterations (maps)"),
        "t_max": (float, 10.0, "final time (flows)"),
        "dt": (float, 0.1, "output spacing (flows)"),
        "n_particles": (int, 0, "ensemble size for pushforward snapshots (0: none)"),
        "snapshot_times": (str, "", "comma separated snapshot times"),
    },
    "classify": {
        **SYSTEM,
        "experiment": (str, "all", "basin, attracting, classical, operational or all"),
        "x0": (str, None, "basin starting point (p/q entries iterate exactly on maps)"),
        "n_particles": (int, 20_000, "ensemble size"),
        "t_grid": (str, None, "comma separated times for attracting/correlation series"),
        "T_grid": (str, None, "comma separated horizons for the basin series"),
        "n_ref": (int, 20_000, "quadrature size of the reference measure"),
    },
    "theorem-demo": {
        **SYSTEM,
        "eps": (float, 0.3, "target accuracy epsilon"),
        "delta": (float, None, "cover radius; must be < eps/6 (default 0.99 eps/6)"),
        "tau": (int, 4, "Bowen horizon of the cover"),
        "n_particles": (int, 20_000, "size of the initial ensemble nu"),
        "n_candidates": (int, 4_000, "attractor samples offered to the greedy cover"),
        "n_mu": (int, 50_000, "size of the reference ensemble for mu"),
        "t_grid": (str, "0,1,2,4,6,8,10,15,20,25,30,35,40", "comparison times after T"),
        "tau_list": (str, "1,2,3,4,5,6", "horizons of the ratio scan"),
        "n_x": (int, 8, "centers per horizon in the ratio scan"),
        "n_mc": (int, 20_000, "MC samples per ratio"),
    },
    "counterexample": {
        **SYSTEM,
        "y0_list": (str, "0.01,0.05,0.2,0.5", "initial fiber values for the flow check"),
        "t_max": (float, 10.0, "horizon of the flow check"),
        "grid": (float, 0.01, "output spacing of the flow check"),
        "step": (float, 1e-3, "RK4 step"),
        "eps_over_M": (float, 1.0, "concentration radius in units of M"),
        "T_grid": (str, "100,1000,10000", "horizons for the concentration profile"),
        "quadrature_n": (int, 100_000, "midpoint nodes for p_T"),
        "n_particles": (int, 20_000, "ensemble for the fiber-marginal series"),
    },
    "emit-plotdata": {
        "inputs": (str, None, "comma separated series CSV files"),
        "name": (str, "plot", "basename of the .dat/.svg outputs"),
    },
    "cover": {
        **SYSTEM,
        "tau": (int, 4, "Bowen horizon"),
        "delta": (float, 0.05, "ball radius"),
        "n_candidates": (int, 2_000, "attractor samples scanned by the greedy cover"),
        "multiplier": (float, 3.0, "cell radius in units of delta"),
    },
}

DEFAULT_SYSTEM = {
    "classify": "doubling_contract",
    "theorem-demo": "doubling_contract",
    "counterexample": "counterexample",
    "cover": "doubling_contract",
}


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ergosim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key=value file; flags override it")
        sp.add_argument("--manifest", help="re-run from a manifest.json and compare output hashes")
        for key, (typ, default, hlp) in {**COMMON, **schema}.items():
            sp.add_argument(_flag(key), dest=key, type=typ, default=None,
                            help=f"{hlp} [default: {default}]")
        if name == "emit-plotdata":
            sp.add_argument("files", nargs="*", help="series CSV files")
    return p


def read_config_file(path) -> dict:
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        cfg[k.strip().replace("-", "_")] = v.strip()
    return cfg


def resolve(args: argparse.Namespace) -> dict:
    """defaults < manifest < config file < flags."""
    schema = {**COMMON, **SCHEMAS[args.command]}
    cfg = {k: d for k, (_, d, _) in schema.items()}
    if args.command in DEFAULT_SYSTEM:
        cfg["system"] = DEFAULT_SYSTEM[args.command]
    layers = []
    if args.manifest:
        man = json.loads(Path(args.manifest).read_text())
        if man.get("command") != args.command:
            raise ConfigError(f"manifest was written by {man.get('command')!r}")
        layers.append(man["config"])
    if args.config:
        layers.append(read_config_file(args.config))
    for layer in layers:
        for k, v in layer.items():
            if k not in schema:
                raise ConfigError(f"unknown config key {k!r}")
            typ = schema[k][0]
            try:
                cfg[k] = None if v is None else typ(v)
            except ValueError as e:
                raise ConfigError(f"bad value for {k}: {v!r}") from e
    for k in schema:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if args.command == "emit-plotdata" and args.files:
        cfg["inputs"] = ",".join(args.files)
    return cfg


# --------------------------------------------------------------------------
# parsing helpers


def _floats(s: str | None, what: str) -> list[float]:
    if s is None or s == "":
        return []
    try:
        return [float(v) for v in s.split(",")]
    except ValueError as e:
        raise ConfigError(f"{what}: expected comma separated numbers, got {s!r}") from e


def _point(s: str, dim: int):
    """Parse x0; any p/q entry makes the point exact (an object array of Fractions)."""
    parts = [p.strip() for p in s.split(",")]
    if len(parts) != dim:
        raise ConfigError(f"x0 needs {dim} coordinates, got {len(parts)}")
    try:
        if any("/" in p for p in parts):
            return np.array([Fraction(p) for p in parts], dtype=object)
        return np.array([float(p) for p in parts])
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"bad x0 {s!r}") from e


def make_system(cfg: dict) -> SystemSpec:
    sid = cfg.get("system")
    if sid not in ZOO:
        raise ConfigError(f"unknown system {sid!r}; known: {', '.join(sorted(ZOO))}")
    if sid in ("counterexample", "linear_torus"):
        omega = _floats(cfg["base_omega"], "base_omega")
        if not omega:
            raise ConfigError("base_omega needs at least one component")
        return get_system(sid, omega=tuple(omega))
    return get_system(sid)


def _check_range(cfg: dict, key: str, lo: float | None = None, hi: float | None = None, strict: bool = False):
    v = cfg[key]
    if v is None:
        return
    if lo is not None and (v <= lo if strict else v < lo):
        raise ConfigError(f"{key} must be {'>' if strict else '>='} {lo}")
    if hi is not None and v > hi:
        raise ConfigError(f"{key} must be <= {hi}")


# --------------------------------------------------------------------------
# output handling


@contextlib.contextmanager
def locked_dir(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    fh = (out / ".lock").open("w")
    try:
        try:
            fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            raise ConfigError(f"output directory {out} is in use by another run") from None
        yield out
    finally:
        fh.close()
        with contextlib.suppress(FileNotFoundError):
            (out / ".lock").unlink()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, cfg: dict, files: list[str]) -> dict:
    man = {
        "command": command,
        "version": __version__,
        "config": {k: v for k, v in sorted(cfg.items()) if k != "out"},
        "files": {f: _sha256(out / f) for f in sorted(files)},
    }
    (out / "manifest.json").write_text(json.dumps(man, indent=1, sort_keys=True) + "\n")
    return man


def _write_rows(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])


def _fmt(t: float) -> str:
    return repr(float(t)).replace(".", "p").replace("-", "m")


# --------------------------------------------------------------------------
# commands; each returns the list of files written into ``out``


def cmd_simulate(cfg: dict, out: Path) -> list[str]:
    sys_ = make_system(cfg)
    _check_range(cfg, "steps", 0)
    _check_range(cfg, "t_max", 0)
    _check_range(cfg, "dt", 0, strict=True)
    _check_range(cfg, "n_particles", 0)
    d = sys_.space.dim
    if cfg["x0"] is not None:
        x0 = _point(cfg["x0"], d - 1 if (sys_.system_id == "counterexample" and cfg["y0"] is not None) else d)
    else:
        x0 = np.full(d - (1 if sys_.system_id == "counterexample" and cfg["y0"] is not None else 0), 0.1)
    if sys_.system_id == "counterexample" and cfg["y0"] is not None:
        x0 = np.append(np.asarray(x0, dtype=float), cfg["y0"])
    if sys_.discrete:
        times = np.arange(cfg["steps"] + 1, dtype=float)
    else:
        n = int(round(cfg["t_max"] / cfg["dt"]))
        times = np.linspace(0.0, n * cfg["dt"], n + 1)
    traj = np.asarray(trajectory(sys_, times, x0), dtype=float).reshape(times.shape[0], d)
    files = ["trajectory.csv"]
    _write_rows(out / "trajectory.csv", ["t"] + [f"x{k + 1}" for k in range(d)],
                ([float(t)] + [float(v) for v in row] for t, row in zip(times, traj)))
    if cfg["n_particles"] > 0:
        init = sys_.neighbourhood or sys_.reference
        if init is None:
            raise ConfigError(f"{sys_.system_id} declares no initial law for snapshots")
        nu = sample_density(init, cfg["n_particles"], cfg["seed"])
        for t in _floats(cfg["snapshot_times"], "snapshot_times"):
            if t < 0:
                raise ConfigError("snapshot times must be nonnegative")
            snap = ParticleMeasure(evolve(sys_, t, nu.points), nu.weights, sys_.space)
            name = f"snapshot_t{_fmt(t)}.csv"
            write_csv(snap, out / name)
            files.append(name)
    return files


def _classify_defaults(sys_: SystemSpec, cfg: dict):
    sid = sys_.system_id
    if sid == "rotation":
        init = DensitySpec(sys_.space, (0.0,), (0.1,))
        t_grid = np.arange(0, 41) * 0.25
        T_grid = [1e1, 1e2, 1e3, 1e4]
        x0 = np.array([0.1234])
    elif sid in ("doubling", "doubling_contract"):
        init = sys_.neighbourhood
        t_grid = np.arange(0, 41, 2, dtype=float)
        T_grid = [1e1, 1e2, 1e3]
        # rational start: iterated exactly, period 1000002
        x0 = np.array([Fraction(123457, 1000003)] + ([Fraction(13, 10)] if sid == "doubling_contract" else []),
                      dtype=object)
    else:
        init = sys_.neighbourhood or sys_.reference
        t_grid = np.arange(0, 21, dtype=float) if sys_.discrete else np.arange(0, 41) * 0.25
        T_grid = [1e1, 1e2, 1e3]
        x0 = np.full(sys_.space.dim, 0.1234)
    if init is None or sys_.measure is None:
        raise ConfigError(f"{sid} declares no neighbourhood law or candidate measure")
    if cfg["t_grid"] is not None:
        t_grid = np.asarray(_floats(cfg["t_grid"], "t_grid"))
    if cfg["T_grid"] is not None:
        T_grid = _floats(cfg["T_grid"], "T_grid")
    if cfg["x0"] is not None:
        x0 = _point(cfg["x0"], sys_.space.dim)
    return init, np.asarray(t_grid, dtype=float), T_grid, x0


def _reference(sys_: SystemSpec, n: int, seed: int) -> ParticleMeasure:
    try:
        return grid_measure(sys_.measure, n)
    except ValueError:
        return sample_density(sys_.measure, n, seed)


def cmd_classify(cfg: dict, out: Path) -> list[str]:
    sys_ = make_system(cfg)
    exps = ("basin", "attracting", "classical", "operational")
    chosen = exps if cfg["experiment"] == "all" else tuple(cfg["experiment"].split(","))
    for e in chosen:
        if e not in exps:
            raise ConfigError(f"unknown experiment {e!r}")
    _check_range(cfg, "n_particles", 1)
    _check_range(cfg, "n_ref", 1)
    init, t_grid, T_grid, x0 = _classify_defaults(sys_, cfg)
    seed = cfg["seed"]
    ref = _reference(sys_, cfg["n_ref"], seed)
    g = TestFunction(lambda x: np.cos(2 * np.pi * x[:, 0]), 1.0, 2 * np.pi, "cos(2 pi x1)")
    one = TestFunction(lambda x: np.ones(x.shape[0]), 1.0, 0.0, "1")
    summary, files = [], []
    for e in chosen:
        if e == "basin":
            rec = cl.basin_test(sys_, x0, ref, T_grid)
        elif e == "attracting":
            rec = cl.attracting_test(sys_, init, ref, t_grid, cfg["n_particles"], seed)
        elif e == "classical":
            mu = sample_density(sys_.measure, cfg["n_particles"], seed)
            rec = cl.classical_correlation(sys_, mu, g, g, t_grid)
        else:
            g1 = g if sys_.system_id == "rotation" else one
            rec = cl.operational_correlation(sys_, init, ref, g1, g, t_grid, cfg["n_particles"], seed)
        name = f"{e}.csv"
        cl.write_series(rec, out / name)
        files.append(name)
        v = cl.verdict(rec if e in ("basin", "attracting") else
                       cl.SeriesRecord(rec.times, np.abs(rec.values), rec.label), cfg["theta"])
        summary.append([e, v["final"], v["window_median"], v["theta"], str(v["converged"]).lower()])
    _write_rows(out / "summary.csv", ["experiment", "final", "window_median", "theta", "converged"], summary)
    return files + ["summary.csv"]


def _demo_probe() -> TestFunction:
    # 1-Lipschitz on the flat cylinder, sup-bound below 1
    return TestFunction(
        lambda x: (np.sin(2 * np.pi * x[:, 0]) / (2 * np.pi) + np.clip(x[:, 1] - 1.0, -0.8, 0.8)) / math.sqrt(2),
        (1 / (2 * np.pi) + 0.8) / math.sqrt(2), 1.0, "demo probe")


def cmd_theorem_demo(cfg: dict, out: Path) -> list[str]:
    sys_ = make_system(cfg)
    eps = cfg["eps"]
    if not eps > 0:
        raise ConfigError("eps must be positive")
    delta = cfg["delta"] if cfg["delta"] is not None else 0.99 * eps / 6
    if not 0 < delta < eps / 6:
        raise ConfigError(f"delta must lie in (0, eps/6) = (0, {eps / 6})")
    _check_range(cfg, "tau", 0)
    for k in ("n_particles", "n_candidates", "n_mu", "n_x"):
        _check_range(cfg, k, 1)
    _check_range(cfg, "n_mc", 1000)
    if not sys_.discrete or None in (sys_.neighbourhood, sys_.measure, sys_.attractor, sys_.partner, sys_.reference):
        raise ConfigError(f"{sys_.system_id} lacks the attractor data the demo needs")
    seed, tau = cfg["seed"], cfg["tau"]
    t_grid = _floats(cfg["t_grid"], "t_grid")
    files = []

    nu = sample_density(sys_.neighbourhood, cfg["n_particles"], seed)
    # settle time: after T every orbit of U stays delta-close to its partner
    probe_pts = sys_.neighbourhood.sample(generator(seed, 11), 64)
    corners = sys_.space.wrap(np.array([sys_.neighbourhood.low, sys_.neighbourhood.high], dtype=float))
    T = 0.0
    for x in np.concatenate([probe_pts, corners]):
        r = cl.orbit_track_search(sys_, x, None, delta, 60, 0, seed)
        if not r.tracked:
            raise ErgosimError("an orbit of U does not track the attractor")
        T = max(T, r.settle_time)
    nu_T = ParticleMeasure(evolve(sys_, T, nu.points), nu.weights, sys_.space)
    write_csv(nu_T, out / "nu_T.csv")

    ctx = bowen_context(sys_, tau, delta)
    cand = sys_.attractor.sample(generator(seed, 12), cfg["n_candidates"])
    cover = co.greedy_bisep(ctx, cand, delta)
    co.write_cover(cover, out / "cover.csv")
    mu = ParticleMeasure.uniform(np.concatenate([cand, sys_.measure.sample(generator(seed, 13), cfg["n_mu"])]),
                                 sys_.space)
    P = co.coarse_grain(nu_T, mu, cover)
    write_csv(P, out / "coarse.csv")
    if abs(P.total_mass - 1.0) > 1e-9:
        raise ErgosimError(f"coarse-grained mass {P.total_mass} != 1")
    g = _demo_probe()
    checks = []
    for t in sorted({0, tau // 2, tau}):
        lhs, ok = co.approx_error_check(nu_T, mu, cover, g, t, P)
        checks.append({"t": t, "lhs": lhs, "bound": 6 * delta * g.lipschitz, "ok": ok})
        if not ok:
            raise ErgosimError(f"approximation bound violated at t={t}: {lhs}")

    mu_level = integrate(mu, g)
    rows, gaps = [], []
    for t in t_grid:
        a = integrate(nu_T, lambda x: g(evolve(sys_, t, x)))
        b = integrate(P, lambda x: g(evolve(sys_, t, x)))
        # MC tolerance of the nu-side average
        se = float(np.std(g(evolve(sys_, t, nu_T.points)))) / math.sqrt(len(nu_T))
        rows.append([float(t), a, b, mu_level, abs(a - mu_level), eps + cfg["mc_sigma"] * se])
        gaps.append(abs(a - mu_level))
    _write_rows(out / "integrals.csv", ["t", "nu", "coarse", "mu", "gap", "tolerance"], rows)
    cl.write_series(cl.SeriesRecord(t_grid, gaps, "|int g d(f^(T+t) nu) - int g dmu|"), out / "gap.csv")

    scan = co.cehyp_scan(sys_, sys_.measure, sys_.reference, sys_.attractor, delta,
                         [int(v) for v in _floats(cfg["tau_list"], "tau_list")], cfg["n_x"], cfg["n_mc"],
                         seed, workers=cfg["workers"])
    co.write_scan(scan, out / "cehyp.csv")
    late = [r for r in rows if r[0] >= 20]
    summary = {
        "settle_time": T,
        "delta": delta,
        "eps": eps,
        "n_centers": len(cover),
        "density_ratio": co.density_ratio(nu_T, mu, cover),
        "approx_checks": checks,
        "late_gap_max": max((r[4] for r in late), default=None),
        "late_within_tolerance": all(r[4] <= r[5] for r in late),
        "cehyp_min_ratio": min(r.min_ratio for r in scan),
        "cehyp_zero_denominators": sum(r.n_zero_denominators for r in scan),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    files += ["nu_T.csv", "cover.csv", "cover.json", "coarse.csv", "integrals.csv", "gap.csv", "cehyp.csv",
              "summary.json"]
    if not summary["cehyp_min_ratio"] > 0:
        raise ErgosimError("ratio scan has a zero entry")
    return files


def cmd_counterexample(cfg: dict, out: Path) -> list[str]:
    sys_ = make_system(cfg)
    if sys_.system_id != "counterexample":
        raise ConfigError("the counterexample command needs --system counterexample")
    base = sys_.params["base"]
    _check_range(cfg, "step", 0, strict=True)
    _check_range(cfg, "grid", 0, strict=True)
    _check_range(cfg, "eps_over_M", 0, strict=True)
    _check_range(cfg, "field_grid", 1)
    _check_range(cfg, "quadrature_n", 1)
    y0s = _floats(cfg["y0_list"], "y0_list") if cfg["y0"] is None else [cfg["y0"]]
    if not y0s or any(y == 0 for y in y0s):
        raise ConfigError("counterexample outputs need y0 != 0")
    files = []
    db = base.space.dim

    # (a) closed form vs RK4
    n = int(round(cfg["t_max"] / cfg["grid"]))
    times = np.linspace(0.0, n * cfg["grid"], n + 1)
    x0 = np.tile(np.full(db, 0.1), (len(y0s), 1))
    starts = np.column_stack([x0, y0s])
    rk = integrate_trajectory(sys_, times, starts, cfg["step"])
    closed = trajectory(sys_, times, starts)
    disc = sys_.space.distance(rk, closed)  # (g, n)
    for j, y in enumerate(y0s):
        name = f"discrepancy_y{_fmt(y)}.csv"
        cl.write_series(cl.SeriesRecord(times, disc[:, j], f"closed form vs RK4, y0={y!r}"), out / name)
        files.append(name)

    # (b) b2' near 0
    ys = np.logspace(-12, -1, 45)
    cl.write_series(cl.SeriesRecord(ys, cx.b2_prime(ys), "b2'(y)"), out / "b2prime.csv")
    files.append("b2prime.csv")

    # (c) concentration profile vs bound
    M = cx.field_bound(base, cfg["field_grid"])
    eps = cfg["eps_over_M"] * M
    T_grid = _floats(cfg["T_grid"], "T_grid")
    rows = []
    for y in y0s:
        params = cx.CounterexampleParams(y, base)
        prof = cl.concentration_profile(params, eps, T_grid, cfg["quadrature_n"])
        bound = np.atleast_1d(cl.concentration_bound(params, eps, T_grid, M))
        for T, p, b in zip(T_grid, prof.values, bound):
            rows.append([y, float(T), float(p), float(b), bool(p <= b + 2.0 / cfg["quadrature_n"])])
    _write_rows(out / "concentration.csv", ["y0", "T", "profile", "bound", "ok"], rows)
    files.append("concentration.csv")
    T_big = np.array([1e4, 1e5, 1e6, 1e7, 1e8])
    cl.write_series(cl.SeriesRecord(T_big, cl.concentration_bound_closed(2.0, cfg["eps_over_M"], T_big),
                                    f"bound c=2 eps/M={cfg['eps_over_M']!r}"), out / "bound_c2.csv")
    files.append("bound_c2.csv")

    # (d) fiber marginal -> delta_0: W1 distance is the mean |y|
    nu = sample_density(sys_.neighbourhood, cfg["n_particles"], cfg["seed"])
    t_fib = np.array([0.0, 1.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1e6])
    w1 = [float(np.sum(nu.weights * np.abs(evolve(sys_, t, nu.points)[:, -1]))) for t in t_fib]
    cl.write_series(cl.SeriesRecord(t_fib, w1, "W1(fiber marginal, delta_0)"), out / "fiber_marginal.csv")
    files.append("fiber_marginal.csv")
    (out / "summary.json").write_text(json.dumps({
        "M": M,
        "max_discrepancy": float(np.max(disc)),
        "b2prime_max_abs_below_1e-4": float(np.max(np.abs(cx.b2_prime(ys[ys <= 1e-4])))),
        "profile_le_bound": all(r[4] for r in rows),
        "bound_c2_T1e6": float(cl.concentration_bound_closed(2.0, cfg["eps_over_M"], 1e6)),
    }, indent=1, sort_keys=True) + "\n")
    return files + ["summary.json"]


def cmd_emit_plotdata(cfg: dict, out: Path) -> list[str]:
    paths = [p for p in (cfg["inputs"] or "").split(",") if p]
    if not paths:
        raise ConfigError("no input series given")
    recs = []
    for p in paths:
        if not Path(p).is_file():
            raise ConfigError(f"missing input {p}")
        recs.append(cl.read_series(p))
    name = cfg["name"]
    write_plotdata(recs, out / f"{name}.dat")
    write_svg(recs, out / f"{name}.svg")
    return [f"{name}.dat", f"{name}.svg"]


def cmd_cover(cfg: dict, out: Path) -> list[str]:
    sys_ = make_system(cfg)
    _check_range(cfg, "delta", 0, strict=True)
    _check_range(cfg, "tau", 0)
    _check_range(cfg, "n_candidates", 1)
    sampler = sys_.attractor or sys_.reference
    if sampler is None:
        raise ConfigError(f"{sys_.system_id} declares no attractor sampler")
    ctx = bowen_context(sys_, cfg["tau"], cfg["delta"])
    cand = sampler.sample(generator(cfg["seed"], 12), cfg["n_candidates"])
    cover = co.greedy_bisep(ctx, cand, cfg["delta"], cfg["multiplier"])
    co.write_cover(cover, out / "cover.csv")
    return ["cover.csv", "cover.json"]


COMMANDS = {
    "simulate": cmd_simulate,
    "classify": cmd_classify,
    "theorem-demo": cmd_theorem_demo,
    "counterexample": cmd_counterexample,
    "emit-plotdata": cmd_emit_plotdata,
    "cover": cmd_cover,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        out = Path(cfg["out"] or Path(os.environ.get(OUT_ENV, "runs")) / args.command)
        if args.command in DEFAULT_SYSTEM or args.command == "simulate":
            if cfg.get("system") is None:
                raise ConfigError("--system is required")
            make_system(cfg)  # fail before touching the output directory
        with locked_dir(out):
            files = COMMANDS[args.command](cfg, out)
            man = write_manifest(out, args.command, cfg, files)
    except ConfigError as e:
        print(f"ergosim: config error: {e}", file=sys.stderr)
        return 2
    except (ErgosimError, ArithmeticError, ValueError) as e:
        print(f"ergosim: estimator failure: {e}", file=sys.stderr)
        return 3
    if args.manifest:
        old = json.loads(Path(args.manifest).read_text())["files"]
        same = old == man["files"]
        print(f"reproduced: {str(same).lower()}")
        if not same:
            return 3
    print(f"wrote {len(files)} files to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
