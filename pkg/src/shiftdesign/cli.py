"""Command-line experiment harness.

Subcommands
-----------
design      solve for a shift sequence and write traces, stage errors and operators
simulate    run a saved sequence on a signal through the round simulator
experiment  design, then simulate on a noisy signal ``z = x + v`` drawn from the target's range

Exit codes: 0 on success, 1 on invalid configuration, 2 on runtime failure.
Set ``SHIFTDESIGN_LOG`` (e.g. ``INFO`` or ``DEBUG``) for log output on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .design import DesignProblem, ShiftSequence, SolverConfig, bcd_design, make_weights
from .graph import Graph, GraphError, er_random_graph, read_edge_list, strongly_connected, write_edge_list
from .netsim import compare_centralized, read_signal, run_rounds, storage_per_node, write_signal
from .tasks import gf_baseline_fit, load_matrix, resolve_target, save_matrix

log = logging.getLogger("shiftdesign")

COMMANDS = ("design", "simulate", "experiment")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str = "design"
    graph: str | None = None
    directed: bool = False
    self_loops: bool = True
    connected: bool = True
    target: str = "consensus"
    L: int = 10
    weights: str = "linear"
    symmetric: bool = False
    i_max: int = 50
    rel_tol: float = 1e-9
    ridge: float = 0.0
    delta: float = 1e-3
    seed: int = 0
    noise_std: float = 0.1
    signal: str | None = None
    run_dir: str | None = None
    out: str = "out"


CONFIG_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"command"}


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def parse_weights(text: str, L: int) -> np.ndarray:
    scheme, _, arg = text.partition(":")
    if scheme == "geometric":
        return make_weights("geometric", L, ratio=float(arg) if arg else 2.0)
    if arg:
        raise ValueError(f"weight scheme {scheme!r} takes no argument")
    return make_weights(scheme, L)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values; command-line flags override it")
    common.add_argument("--graph", help="edge-list file or er:N,P")
    d = common.add_mutually_exclusive_group()
    d.add_argument("--directed", dest="directed", action="store_true", default=None, help="directed ER graph")
    d.add_argument("--undirected", dest="directed", action="store_false", help="undirected ER graph (default)")
    common.add_argument("--no-self-loops", dest="self_loops", action="store_false", default=None)
    common.add_argument("--allow-disconnected", dest="connected", action="store_false", default=None)
    common.add_argument("--target", help="consensus | projection:R | file:PATH")
    common.add_argument("--L", type=int, help="number of shift operators (rounds)")
    common.add_argument("--weights", help="linear | uniform | final_only | geometric[:RATIO]")
    common.add_argument("--symmetric", action="store_true", default=None)
    common.add_argument("--i-max", dest="i_max", type=int)
    common.add_argument("--rel-tol", dest="rel_tol", type=float)
    common.add_argument("--ridge", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--noise-std", dest="noise_std", type=float)
    common.add_argument("--signal", help="signal file, one value per line")
    common.add_argument("--run-dir", dest="run_dir", help="directory written by 'design' (simulate only)")
    common.add_argument("--out", help="output directory")

    parser = argparse.ArgumentParser(prog="shiftdesign", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def parse_config(argv=None) -> ExperimentConfig:
    """Parse flags (and an optional JSON config file) into a validated config."""
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            raise
        raise ConfigError("invalid command line") from None
    values = {}
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from None
        unknown = set(data) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(data)
    values.update({k: v for k, v in vars(ns).items() if k in CONFIG_KEYS and v is not None})
    cfg = ExperimentConfig(command=ns.command, **values)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if cfg.command != "simulate":
        if cfg.graph is None:
            raise ConfigError("--graph is required")
        if not cfg.graph.startswith("er:") and not Path(cfg.graph).is_file():
            raise ConfigError(f"graph file {cfg.graph} not found")
        if cfg.graph.startswith("er:"):
            _parse_er(cfg.graph)
        if cfg.L < 1:
            raise ConfigError(f"L must be >= 1, got {cfg.L}")
        try:
            parse_weights(cfg.weights, cfg.L)
            SolverConfig(cfg.i_max, cfg.rel_tol, cfg.ridge, cfg.delta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        kind, _, arg = cfg.target.partition(":")
        if kind not in ("consensus", "projection", "file"):
            raise ConfigError(f"unknown target {cfg.target!r}")
        if kind == "file" and not Path(arg).is_file():
            raise ConfigError(f"target file {arg} not found")
        if kind == "projection" and not (arg.isdigit() and int(arg) >= 1):
            raise ConfigError(f"projection rank must be a positive integer, got {arg!r}")
    else:
        if cfg.run_dir is None or not Path(cfg.run_dir).is_dir():
            raise ConfigError("simulate needs --run-dir pointing at a design output directory")
        if cfg.signal is None:
            raise ConfigError("simulate needs --signal")
    if cfg.signal is not None and not Path(cfg.signal).is_file():
        raise ConfigError(f"signal file {cfg.signal} not found")
    if cfg.noise_std < 0:
        raise ConfigError("noise std must be >= 0")


def _parse_er(spec: str):
    try:
        n_text, p_text = spec[3:].split(",")
        n, p = int(n_text), float(p_text)
    except ValueError:
        raise ConfigError(f"graph spec must look like er:N,P, got {spec!r}") from None
    if n < 1 or not 0 <= p <= 1:
        raise ConfigError(f"bad ER parameters in {spec!r}")
    return n, p


def load_graph(cfg: ExperimentConfig) -> Graph:
    if cfg.graph.startswith("er:"):
        n, p = _parse_er(cfg.graph)
        return er_random_graph(
            n, p, directed=cfg.directed, add_self_loops=cfg.self_loops, seed=cfg.seed, require_connected=cfg.connected
        )
    return read_edge_list(cfg.graph)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _storage_stats(g: Graph, L: int) -> dict:
    per_node = storage_per_node(g, L)
    return {
        "per_node": per_node.tolist(),
        "min": int(per_node.min()),
        "max": int(per_node.max()),
        "mean": float(per_node.mean()),
        "total": int(per_node.sum()),
    }


def _simulate(g, seq, H, z, out: Path) -> dict:
    trace = run_rounds(g, seq, z)
    dev = compare_centralized(trace, seq, z)
    _write_csv(
        out / "signal_trace.csv",
        ["round"] + [f"node_{i}" for i in range(g.n_vertices)],
        [[l] + [_fmt(v) for v in state] for l, state in enumerate(trace.states)],
    )
    target = H @ z
    return {
        "max_deviation_from_centralized": float(dev.max()),
        "deviation_per_round": dev.tolist(),
        "output_error_inf": float(np.max(np.abs(trace.final - target))),
        "output_relative_error": float(np.linalg.norm(trace.final - target) / (np.linalg.norm(target) or 1.0)),
        "messages_per_round": trace.messages_sent,
        "kernel_backend": kernels.BACKEND,
    }


def run_design(cfg: ExperimentConfig) -> tuple[dict, Graph, ShiftSequence, np.ndarray, object]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    g = load_graph(cfg)
    target = resolve_target(cfg.target, g.n_vertices, seed=cfg.seed + 1)
    H = target.resolved
    problem = DesignProblem(H, g, cfg.L, parse_weights(cfg.weights, cfg.L), symmetric=cfg.symmetric)
    solver = SolverConfig(cfg.i_max, cfg.rel_tol, cfg.ridge, cfg.delta)
    log.info("designing L=%d on N=%d, E=%d", cfg.L, g.n_vertices, g.n_edges)
    seq, report = bcd_design(problem, solver)

    h_norm = float(np.linalg.norm(H)) or 1.0
    _write_csv(out / "trace.csv", ["sweep", "block", "objective"], [[s, b, _fmt(J)] for s, b, J in report.objective_trace])
    _write_csv(
        out / "stages.csv",
        ["round", "frobenius_error", "relative_error"],
        [[l, _fmt(e), _fmt(e / h_norm)] for l, e in enumerate(report.stage_errors, start=1)],
    )
    for i, S in enumerate(seq.matrices(), start=1):
        save_matrix(S, out / f"seq_{i}.mat")
    save_matrix(H, out / "target.mat")
    write_edge_list(g, out / "graph.edges")

    _, base_res = gf_baseline_fit(g.adjacency(), H, cfg.L + 1)
    summary = {
        "final_objective": report.final_objective,
        "effective_rounds": report.effective_rounds,
        "delta": cfg.delta,
        "final_relative_error": float(report.stage_errors[-1] / h_norm),
        "sweeps": report.sweeps,
        "converged": report.converged,
        "monotone": report.monotone,
        "max_abs_coefficient": report.max_abs_coefficient,
        "wall_time": report.wall_time,
        "graph": {
            "n_vertices": g.n_vertices,
            "n_edges": g.n_edges,
            "directed": g.directed,
            "self_loops": g.self_loops,
            "strongly_connected": strongly_connected(g),
        },
        "storage": _storage_stats(g, cfg.L),
        "baseline_filter": {"shift": "adjacency", "taps": cfg.L + 1, "relative_residual": base_res / h_norm},
        "config": dataclasses.asdict(cfg),
        "version": __version__,
    }
    return summary, g, seq, H, target


def _dump_summary(summary, out: Path):
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def cmd_design(cfg):
    summary, g, seq, H, _ = run_design(cfg)
    if cfg.signal is not None:
        summary["simulation"] = _simulate(g, seq, H, read_signal(cfg.signal), Path(cfg.out))
    _dump_summary(summary, Path(cfg.out))
    return summary


def cmd_experiment(cfg):
    summary, g, seq, H, target = run_design(cfg)
    out = Path(cfg.out)
    if cfg.signal is not None:
        z = read_signal(cfg.signal)
    else:
        rng = np.random.default_rng(cfg.seed + 2)
        if target.basis is not None:
            x = target.basis @ rng.standard_normal(target.basis.shape[1])
        else:
            x = H @ rng.standard_normal(g.n_vertices)
        z = x + cfg.noise_std * rng.standard_normal(g.n_vertices)
        write_signal(z, out / "signal.txt")
    if z.shape != (g.n_vertices,):
        raise ValueError(f"signal has {z.size} values, graph has {g.n_vertices} vertices")
    summary["simulation"] = _simulate(g, seq, H, z, out)
    _dump_summary(summary, out)
    return summary


def cmd_simulate(cfg):
    run = Path(cfg.run_dir)
    g = read_edge_list(run / "graph.edges")
    files = sorted(run.glob("seq_*.mat"), key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        raise ValueError(f"no seq_<i>.mat files in {run}")
    seq = ShiftSequence.from_matrices(g, [load_matrix(f) for f in files])
    H = load_matrix(run / "target.mat") if (run / "target.mat").exists() else np.eye(g.n_vertices)
    z = read_signal(cfg.signal)
    if z.shape != (g.n_vertices,):
        raise ValueError(f"signal has {z.size} values, graph has {g.n_vertices} vertices")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "simulation": _simulate(g, seq, H, z, out),
        "storage": _storage_stats(g, len(seq)),
        "config": dataclasses.asdict(cfg),
        "version": __version__,
    }
    _dump_summary(summary, out)
    return summary


def main(argv=None) -> int:
    level = os.environ.get("SHIFTDESIGN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"shiftdesign: config error: {exc}", file=sys.stderr)
        return 1
    try:
        summary = {"design": cmd_design, "simulate": cmd_simulate, "experiment": cmd_experiment}[cfg.command](cfg)
    except (GraphError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"shiftdesign: {cfg.command} failed: {exc}", file=sys.stderr)
        return 2
    if "final_objective" in summary:
        print(
            f"final objective {summary['final_objective']:.6g}, "
            f"final relative error {summary['final_relative_error']:.6g}, "
            f"effective rounds {summary['effective_rounds']}"
        )
    if "simulation" in summary:
        print(f"simulator vs centralized max deviation {summary['simulation']['max_deviation_from_centralized']:.3g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
