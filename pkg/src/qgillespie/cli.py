"""Command-line front end.

Commands::

    qgillespie validate --config run.toml
    qgillespie run      --config run.toml [--seed N] [--workers N] [--out DIR] [--cache DIR]
    qgillespie fill     --config run.toml --jumps DIR/jumps.csv [--out DIR] [--cache DIR]
    qgillespie analyze  JUMPS.csv [JUMPS.csv ...] [--bins N] [--out DIR]

``--config`` also accepts a ``manifest.json`` written by ``run``; re-running
from it reproduces the outputs byte for byte. The table cache directory is
``--cache`` if given, else ``$QGILLESPIE_CACHE_DIR``, else no cache.

Exit codes: 0 success, 2 parse error, 3 validation error, 4 table error,
5 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import WtdHistogram, histogram_from_waits, pooled_waits, total_variation
from .config import RunConfig, load_config
from .engine import RngStream, Trajectory, replay_trajectory, run_ensemble
from .errors import (
    ConfigError,
    DegenerateSteadyState,
    DimensionError,
    InvalidStateError,
    ModelError,
    NoJumps,
    ParseError,
    QGillespieError,
    TableError,
    TailMassTooLarge,
)
from .filling import fill_states
from .mcw import McwConfig, mcw_ensemble, steady_state
from .models import LindbladModel, jump_rate_operator, top_level_population
from .precompute import TimeGrid, auto_dt, auto_grid, build_tables, cached_tables, table_hash

__all__ = ["main", "cmd_validate", "cmd_run", "cmd_fill", "cmd_analyze", "EXIT_CODES"]

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_TABLE = 4
EXIT_RUNTIME = 5
EXIT_CODES = {
    "ok": EXIT_OK,
    "parse": EXIT_PARSE,
    "validation": EXIT_VALIDATION,
    "table": EXIT_TABLE,
    "runtime": EXIT_RUNTIME,
}

CACHE_ENV = "QGILLESPIE_CACHE_DIR"
JUMP_COLUMNS = ("trajectory_id", "jump_index", "waiting_time", "absolute_time", "channel", "beyond_horizon_flag")
HISTOGRAM_COLUMNS = ("bin_left", "bin_right", "count", "density")
OBSERVABLE_COLUMNS = ("trajectory_id", "time", "observable", "value")
MEAN_COLUMNS = ("time", "observable", "mean", "std_error")
KERR_TRUNCATION_LIMIT = 1e-4
GRID_ADEQUACY_LIMIT = 0.1


def _f(x: float) -> str:
    return format(float(x), ".17g")


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, (ConfigError, ModelError, DimensionError, InvalidStateError)):
        return EXIT_VALIDATION
    if isinstance(exc, TableError):
        return EXIT_TABLE
    return EXIT_RUNTIME


def _cache_dir(flag: str | None) -> str | None:
    return flag if flag else os.environ.get(CACHE_ENV) or None


def _load(path: str) -> RunConfig:
    try:
        return load_config(path)
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc.strerror}", field=str(path)) from exc


def _resolve_grid(cfg: RunConfig, model: LindbladModel) -> TimeGrid:
    if cfg.t_max is not None:
        return TimeGrid.from_t_max(auto_dt(model) if cfg.dt is None else cfg.dt, cfg.t_max)
    return auto_grid(model, cfg.dt, tail_tolerance=cfg.tail_tolerance)


def _tables(cfg: RunConfig, model: LindbladModel, grid: TimeGrid, cache: str | None):
    pure = cfg.mode == "gillespie-pure"
    kw = {"tail_tolerance": cfg.tail_tolerance}
    if not pure:
        kw["storage"] = cfg.storage
    return cached_tables(model, grid, cache, pure=pure, **kw)


# ---------------------------------------------------------------- CSV writers


def write_jumps_csv(path, trajectories: list[Trajectory]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(JUMP_COLUMNS)
        for tid, traj in enumerate(trajectories):
            for j, r in enumerate(traj.records):
                w.writerow((tid, j, _f(r.waiting_time), _f(r.absolute_time), r.channel, int(r.beyond_horizon)))


def read_jumps_csv(path) -> dict[int, list[tuple[float, int, bool]]]:
    """``{trajectory_id: [(waiting_time, channel, beyond_horizon), ...]}`` in jump order."""
    out: dict[int, list] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != JUMP_COLUMNS:
            raise ParseError(f"expected columns {','.join(JUMP_COLUMNS)}", field=str(path))
        for n, row in enumerate(reader, start=2):
            try:
                rec = (float(row["waiting_time"]), int(row["channel"]), row["beyond_horizon_flag"] == "1")
                out.setdefault(int(row["trajectory_id"]), []).append(rec)
            except (TypeError, ValueError) as exc:
                raise ParseError(f"bad row: {exc}", field=str(path), line=n) from exc
    return out


def write_histogram_csv(path, hist: WtdHistogram | None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTOGRAM_COLUMNS)
        if hist is None:
            return
        e = hist.bin_edges
        for i, (c, dens) in enumerate(zip(hist.counts, hist.density)):
            w.writerow((_f(e[i]), _f(e[i + 1]), int(c), _f(dens)))


def write_observables(out_dir: Path, names: dict, trajectories, tables, times, ops) -> None:
    """Per-trajectory observable traces plus the ensemble mean and its standard error."""
    labels = list(ops)
    values = np.empty((len(trajectories), len(labels), len(times)))
    with open(out_dir / names["observables"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OBSERVABLE_COLUMNS)
        for tid, traj in enumerate(trajectories):
            states = fill_states(traj, tables, times).states
            for k, label in enumerate(labels):
                values[tid, k] = np.einsum("ij,nji->n", ops[label], states).real
                for t, v in zip(times, values[tid, k]):
                    w.writerow((tid, _f(t), label, _f(v)))
    mean = values.mean(axis=0)
    n = len(trajectories)
    se = values.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    stem = Path(names["observables"])
    with open(out_dir / f"{stem.stem}_mean{stem.suffix}", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEAN_COLUMNS)
        for k, label in enumerate(labels):
            for i, t in enumerate(times):
                w.writerow((_f(t), label, _f(mean[k, i]), _f(se[k, i])))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------- commands


def cmd_validate(cfg: RunConfig, cache: str | None = None, stream=None) -> int:
    """Build tables and report tail mass, grid adequacy, truncation and steady state.

    Prints one ``key: value`` line per report entry. Returns the exit code.
    """
    stream = stream or sys.stdout
    code = EXIT_OK

    def say(key, value):
        print(f"{key}: {value}", file=stream)

    model = cfg.build_model()
    state0 = cfg.initial(model)
    say("model", f"{cfg.model.get('builder', 'custom')} (dim {model.dim}, {model.n_channels} monitored, "
        f"{len(model.unmonitored_jumps)} unmonitored)")
    if cfg.mode == "mcw":
        try:
            McwConfig(cfg.dt_mcw, cfg.t_f).check(model)
            say("mcw_step", f"ok (dt_mcw={cfg.dt_mcw:g})")
        except ConfigError as exc:
            say("mcw_step", f"ERROR {exc}")
            code = EXIT_VALIDATION
    try:
        grid = _resolve_grid(cfg, model)
    except TailMassTooLarge as exc:
        say("tail", f"ERROR {exc}")
        return EXIT_TABLE
    scale = max(np.linalg.norm(model.hamiltonian, 2), np.linalg.norm(jump_rate_operator(model), 2))
    adequacy = grid.dt * scale
    say("grid", f"dt={grid.dt:.6g} t_max={grid.t_max:.6g} n_points={grid.n_points}")
    say("grid_adequacy", f"dt*max(|H|,|J|)={adequacy:.3g} "
        + ("ok" if adequacy <= GRID_ADEQUACY_LIMIT else f"WARNING above {GRID_ADEQUACY_LIMIT}"))
    pure = cfg.mode == "gillespie-pure"
    tables = build_tables(model, grid, tail_tolerance=cfg.tail_tolerance, check_tail=False, storage=cfg.storage)
    if tables.survival_tail > cfg.tail_tolerance:
        say("tail", f"ERROR {TailMassTooLarge(tables.survival_tail, cfg.tail_tolerance, grid.t_max)}")
        code = EXIT_TABLE
    else:
        say("tail", f"{tables.survival_tail:.3e} <= {cfg.tail_tolerance:.1e} ok")
    if tables.dark_probes:
        say("dark_basis_states", ",".join(str(j) for j in tables.dark_probes))
    rho0 = np.outer(state0, state0.conj()) if pure else state0
    w = tables.weights(rho0)
    if w.sum() * grid.dt < tables.weight_floor:
        say("initial_state", "WARNING dark: no monitored jump can occur")
    else:
        total = np.trapezoid(w, dx=grid.dt) + tables.survival(rho0)
        say("initial_state", f"normalization (jump mass + survival) {total:.6f}")
    if model.dim <= 48:
        try:
            rho_ss = steady_state(model)
            say("steady_state", "unique")
            if cfg.model.get("builder") == "kerr":
                top = top_level_population(rho_ss, 2)
                verdict = "ok" if top < KERR_TRUNCATION_LIMIT else f"WARNING above {KERR_TRUNCATION_LIMIT:.0e}"
                say("kerr_truncation", f"top-2 level population {top:.3e} {verdict}")
        except DegenerateSteadyState as exc:
            say("steady_state", f"WARNING degenerate ({exc})")
    else:
        say("steady_state", "skipped (dimension too large)")
    return code


def _gillespie_run(cfg, model, state0, seed, workers, cache):
    grid = _resolve_grid(cfg, model)
    tables = _tables(cfg, model, grid, cache)
    trajs = run_ensemble(model, tables, state0, cfg.t_f, cfg.n_traj, seed, workers=workers)
    kind = "pure" if cfg.mode == "gillespie-pure" else "mixed"
    storage = "pure" if kind == "pure" else cfg.storage
    thash = table_hash(model, grid, kind=kind, storage=storage, tail_tolerance=cfg.tail_tolerance)
    return trajs, tables, thash, {"dt": grid.dt, "n_points": grid.n_points, "t_max": grid.t_max}


def cmd_run(cfg: RunConfig, out_dir, *, seed: int | None = None, workers: int | None = None,
            cache: str | None = None) -> dict:
    """Simulate the ensemble and write jumps, histogram, observables and manifest.

    Returns the manifest. ``workers`` only changes wall-clock time.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if seed is not None:
        cfg.seed = int(seed)
    if cfg.seed is None:
        cfg.seed = secrets.randbits(63)
    workers = cfg.workers if workers is None else workers
    model = cfg.build_model()
    state0 = cfg.initial(model)
    times = cfg.fill_time_array()
    ops = cfg.observable_ops(model) if times is not None else {}

    if cfg.mode == "mcw":
        mcw_cfg = McwConfig(cfg.dt_mcw, cfg.t_f)
        trajs = mcw_ensemble(model, state0, mcw_cfg, cfg.n_traj, RngStream(cfg.seed)).trajectories
        tables, thash, grid = None, None, {"dt_mcw": cfg.dt_mcw}
    else:
        trajs, tables, thash, grid = _gillespie_run(cfg, model, state0, cfg.seed, workers, cache)

    names = dict(cfg.outputs)
    write_jumps_csv(out_dir / names["jumps"], trajs)
    written = [names["jumps"]]
    try:
        hist = histogram_from_waits(pooled_waits(trajs), cfg.bins)
    except NoJumps:
        print("warning: no completed waiting times; histogram is empty", file=sys.stderr)
        hist = None
    write_histogram_csv(out_dir / names["histogram"], hist)
    written.append(names["histogram"])
    if times is not None and ops:
        write_observables(out_dir, names, trajs, tables, times, ops)
        stem = Path(names["observables"])
        written += [names["observables"], f"{stem.stem}_mean{stem.suffix}"]

    echo = cfg.to_dict()
    echo["run"].pop("workers", None)
    manifest = {
        "config": echo,
        "seed": cfg.seed,
        "mode": cfg.mode,
        "table_hash": thash,
        "code_version": __version__,
        "grid": grid,
        "n_jumps": sum(len(t) for t in trajs),
        "dark_trajectories": sum(t.dark for t in trajs),
        "outputs": {name: _sha256(out_dir / name) for name in written},
    }
    with open(out_dir / names["manifest"], "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def cmd_fill(cfg: RunConfig, jumps_csv, out_dir, *, cache: str | None = None) -> Path:
    """Replay a jumps CSV on the config's tables and write observable traces.

    Trajectory ids absent from the CSV had no jumps at all. Returns the path
    of the per-trajectory observable CSV.
    """
    if cfg.mode == "mcw":
        raise ConfigError("jumps from mcw runs cannot be filled", field="run.mode")
    times = cfg.fill_time_array()
    if times is None or not cfg.observables and not cfg.observable_matrices:
        raise ConfigError("fill needs fill.times and at least one observable", field="fill")
    model = cfg.build_model()
    state0 = cfg.initial(model)
    grid = _resolve_grid(cfg, model)
    tables = _tables(cfg, model, grid, cache)
    recorded = read_jumps_csv(jumps_csv)
    if recorded and max(recorded) >= cfg.n_traj:
        raise ConfigError(f"jumps CSV has trajectory id {max(recorded)} but n_traj={cfg.n_traj}", field="run.n_traj")
    trajs = [
        replay_trajectory(model, tables, state0, recorded.get(i, []), cfg.t_f, seed=cfg.seed, stream=i)
        for i in range(cfg.n_traj)
    ]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_observables(out_dir, cfg.outputs, trajs, tables, times, cfg.observable_ops(model))
    return out_dir / cfg.outputs["observables"]


def cmd_analyze(jumps_csvs, out_dir, *, bins=40, include_beyond_horizon: bool = False, stream=None) -> dict:
    """Histogram each jumps CSV on shared edges and report pairwise total variation.

    Edges are ``bins`` equal bins on ``[0, max wait over all inputs]`` unless an
    explicit edge list is given. Writes ``<stem>_wtd_histogram.csv`` per input
    and ``analysis.json``.
    """
    stream = stream or sys.stdout
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    waits = {}
    for path in jumps_csvs:
        rows = read_jumps_csv(path)
        waits[str(path)] = np.array(
            [w for recs in rows.values() for w, _, flag in recs if include_beyond_horizon or not flag]
        )
    pooled = np.concatenate(list(waits.values())) if waits else np.array([])
    if pooled.size == 0:
        raise NoJumps("no waiting times in the given files")
    edges = np.linspace(0.0, pooled.max(), int(bins) + 1) if np.ndim(bins) == 0 else np.asarray(bins, float)
    hists = {p: histogram_from_waits(w, edges) for p, w in waits.items()}
    used: dict[str, int] = {}
    report = {"bin_edges": [float(e) for e in edges], "files": {}, "total_variation": []}
    for p, h in hists.items():
        stem = Path(p).stem if len(hists) == 1 else f"{Path(p).parent.name}_{Path(p).stem}".lstrip("_")
        used[stem] = used.get(stem, 0) + 1
        if used[stem] > 1:
            stem = f"{stem}_{used[stem]}"
        name = f"{stem}_wtd_histogram.csv"
        write_histogram_csv(out_dir / name, h)
        report["files"][p] = {"histogram": name, "n_waits": int(h.counts.sum()),
                              "mean_wait": float(waits[p].mean()) if waits[p].size else None}
        print(f"{p}: {int(h.counts.sum())} waits -> {name}", file=stream)
    for a, b in itertools.combinations(hists, 2):
        tv = total_variation(hists[a], hists[b])
        report["total_variation"].append({"a": a, "b": b, "tv": tv})
        print(f"TV({a}, {b}) = {tv:.6f}", file=stream)
    with open(out_dir / "analysis.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


# ---------------------------------------------------------------- entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qgillespie", description="Quantum Gillespie trajectory simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", required=True, metavar="PATH", help="TOML run config or JSON manifest")
        sp.add_argument("--cache", metavar="DIR", help=f"table cache directory (default: ${CACHE_ENV})")
        if out:
            sp.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")

    sp = sub.add_parser("validate", help="build tables and report their adequacy without simulating")
    common(sp, out=False)

    sp = sub.add_parser("run", help="simulate the ensemble and write CSV outputs and a manifest")
    common(sp)
    sp.add_argument("--seed", type=int, metavar="N", help="base seed (overrides the config)")
    sp.add_argument("--workers", type=int, metavar="N", default=os.cpu_count() or 1,
                    help="worker threads (default: available CPUs); does not affect outputs")

    sp = sub.add_parser("fill", help="fill observables from a jumps CSV")
    common(sp)
    sp.add_argument("--jumps", required=True, metavar="CSV")

    sp = sub.add_parser("analyze", help="waiting-time histograms and total variation from jumps CSVs")
    sp.add_argument("jumps", nargs="+", metavar="CSV")
    sp.add_argument("--bins", type=int, default=40)
    sp.add_argument("--include-beyond-horizon", action="store_true")
    sp.add_argument("--out", metavar="DIR", default="out")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "analyze":
            cmd_analyze(args.jumps, args.out, bins=args.bins, include_beyond_horizon=args.include_beyond_horizon)
            return EXIT_OK
        cfg = _load(args.config)
        cache = _cache_dir(args.cache)
        if args.command == "validate":
            return cmd_validate(cfg, cache)
        if args.command == "run":
            if args.workers < 1:
                raise ConfigError("must be >= 1", field="--workers")
            manifest = cmd_run(cfg, args.out, seed=args.seed, workers=args.workers, cache=cache)
            print(f"seed {manifest['seed']}: {manifest['n_jumps']} jumps written to {args.out}")
            return EXIT_OK
        path = cmd_fill(cfg, args.jumps, args.out, cache=cache)
        print(f"observables written to {path}")
        return EXIT_OK
    except (QGillespieError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
