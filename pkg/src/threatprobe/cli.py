"""Command-line frontend: train, solve, evaluate, sweep, report.

Every command validates its configuration up front, writes outputs
atomically (temp file + rename), and drops a manifest next to each output
recording the config hash, seeds, and command line. Exit codes: 0 success,
2 bad configuration or arguments, 3 numeric divergence, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .ccpomdp import (
    CCAgentPolicy,
    PolicyFormatError,
    UncertaintyModel,
    dump_policy,
    load_policy,
    solve,
    uses_flare,
)
from .config import ConfigError, ExperimentConfig, config_hash, load_config
from .evaluation import (
    metrics_to_csv,
    parse_adversary_spec,
    read_metrics_csv,
    evaluate,
    sweep,
)
from .learner import MaxEntAgentPolicy, TrainingDiverged, train_agent
from .learner.model_io import ModelFormatError, dump_model, load_model

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

log = logging.getLogger("threatprobe")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifests(outputs: list[Path], config: ExperimentConfig, seeds: list[int],
                    command: list[str], started: str) -> None:
    manifest = {
        "tool": "threatprobe",
        "version": __version__,
        "command": command,
        "config_hash": config_hash(config),
        "seeds": seeds,
        "started_at": started,
        "finished_at": _now(),
        "outputs": [str(p) for p in outputs],
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    for out in outputs:
        atomic_write_text(str(out) + ".manifest.json", text)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _load_config_arg(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return load_config(path)


def load_agent(path) -> tuple[object, str]:
    """Load a trained agent artifact; returns (policy, label).

    Labels are '<family>:<file stem>' so metric rows from the two policy
    families stay distinguishable downstream.
    """
    try:
        with open(path, "r", encoding="ascii") as fh:
            first = fh.readline().split()
    except OSError as exc:
        raise ConfigError(f"cannot read agent file {path}: {exc}") from exc
    stem = Path(path).stem
    try:
        if first and first[0] == "threatprobe-model":
            net, meta = load_model(path)
            if meta.get("kind") != "maxent-agent":
                raise ConfigError(f"{path}: model kind {meta.get('kind')!r} is not an agent")
            return MaxEntAgentPolicy(net), f"maxent:{stem}"
        if first and first[0] == "threatprobe-ccpolicy":
            grid, _ = load_policy(path)
            return CCAgentPolicy(grid), f"ccpomdp:{stem}"
    except (ModelFormatError, PolicyFormatError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}: not a recognizable agent artifact")


def cmd_train_agent(args, command: list[str]) -> int:
    config = _load_config_arg(args.config)
    started = _now()
    net = train_agent(config, args.seed)
    metadata = {
        "kind": "maxent-agent",
        "gamma": format(config.gamma, ".17g"),
        "seed": str(args.seed),
        "config_hash": config_hash(config),
        "features": "belief,distance/12,round/10",
    }
    out = Path(args.out)
    atomic_write_text(out, dump_model(net, metadata))
    write_manifests([out], config, [args.seed], command, started)
    log.info("wrote model %s", out)
    return EXIT_OK


def cmd_solve_ccpomdp(args, command: list[str]) -> int:
    config = _load_config_arg(args.config)
    started = _now()
    model = UncertaintyModel.nominal(variance=config.cc_variance,
                                     epsilon=config.cc_epsilon,
                                     quad_nodes=config.quadrature_nodes)
    grid = solve(model, grid_size=config.belief_grid_size, gamma=config.gamma)
    if uses_flare(grid):
        log.warning("solved policy selects flare somewhere; expected it never would")
    out = Path(args.out)
    atomic_write_text(out, dump_policy(grid, {"config_hash": config_hash(config)}))
    write_manifests([out], config, [], command, started)
    log.info("wrote policy %s", out)
    return EXIT_OK


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad seed list {text!r}") from exc
    if not seeds:
        raise ConfigError("seed list is empty")
    return seeds


def cmd_evaluate(args, command: list[str]) -> int:
    config = _load_config_arg(args.config)
    started = _now()
    policy, label = load_agent(args.agent)
    spec = parse_adversary_spec(args.adversary)
    episodes = args.episodes if args.episodes is not None else config.eval_episodes
    if episodes <= 0:
        raise ConfigError("episodes must be positive")
    seeds = _parse_seeds(args.seeds)
    row = evaluate(policy, spec, episodes, seeds, config, agent_label=label)
    out = Path(args.out)
    atomic_write_text(out, metrics_to_csv([row]))
    write_manifests([out], config, seeds, command, started)
    return EXIT_OK


def cmd_sweep(args, command: list[str]) -> int:
    config = _load_config_arg(args.config)
    started = _now()
    if args.mode not in ("eta", "bthre"):
        raise ConfigError(f"unknown sweep mode {args.mode!r}")
    rows = []
    for agent_path in args.agents:
        policy, label = load_agent(agent_path)
        log.info("sweeping %s over %s", label, args.mode)
        rows.extend(sweep(policy, args.mode, label, config))
    out = Path(args.out)
    atomic_write_text(out, metrics_to_csv(rows))
    seeds = list(range(config.adversary_seeds))
    write_manifests([out], config, seeds, command, started)
    return EXIT_OK


def _curve_csv(rows, metric: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["agent", "param_value", "mean", "stderr"])
    for r in sorted(rows, key=lambda r: (r.agent, r.param_value)):
        writer.writerow([r.agent, format(r.param_value, ".17g"),
                         format(getattr(r, metric + "_mean"), ".17g"),
                         format(getattr(r, metric + "_stderr"), ".17g")])
    return buf.getvalue()


def pair_difference_rows(rows, positive_prefix: str):
    """One (u_p, delta) point per adversary configuration seen by exactly two
    agents; delta is positive-agent metric minus the other's."""
    groups: dict[tuple, list] = {}
    for r in rows:
        groups.setdefault((r.adversary, r.param_name, r.param_value), []).append(r)
    points = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2])):
        group = groups[key]
        if len(group) != 2:
            continue
        pos = [r for r in group if r.agent.startswith(positive_prefix)]
        if len(pos) != 1:
            raise ConfigError(
                f"cannot orient pair for {key}: expected exactly one agent with "
                f"prefix {positive_prefix!r}")
        a, b = pos[0], [r for r in group if r is not pos[0]][0]
        up_values = [v for v in (a.u_p, b.u_p) if not math.isnan(v)]
        points.append({
            "adversary": key[0], "param_name": key[1], "param_value": key[2],
            "u_p_mean": sum(up_values) / len(up_values) if up_values else math.nan,
            "delta_tpr": a.tpr_mean - b.tpr_mean,
            "delta_clap": a.clap_mean - b.clap_mean,
        })
    return points


def cmd_report(args, command: list[str]) -> int:
    started = _now()
    try:
        rows = read_metrics_csv(args.in_csv)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {args.in_csv}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{args.in_csv}: no data rows")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    eta_rows = [r for r in rows if r.param_name == "eta"]
    bthre_rows = [r for r in rows if r.param_name == "bthre"]
    points = pair_difference_rows(rows, args.positive_prefix)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["adversary", "param_name", "param_value", "u_p_mean",
                     "delta_tpr", "delta_clap"])
    for p in points:
        writer.writerow([p["adversary"], p["param_name"],
                         format(p["param_value"], ".17g"),
                         format(p["u_p_mean"], ".17g"),
                         format(p["delta_tpr"], ".17g"),
                         format(p["delta_clap"], ".17g")])

    outputs = {
        out_dir / "clap_vs_eta.csv": _curve_csv(eta_rows, "clap"),
        out_dir / "tpr_vs_eta.csv": _curve_csv(eta_rows, "tpr"),
        out_dir / "tpr_vs_bthre.csv": _curve_csv(bthre_rows, "tpr"),
        out_dir / "diff_vs_up.csv": buf.getvalue(),
    }
    for path, text in outputs.items():
        atomic_write_text(path, text)
    write_manifests(list(outputs), ExperimentConfig(), [], command, started)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="threatprobe",
        description="Checkpoint threat-discrimination experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-agent", help="train the stochastic probing agent")
    p.add_argument("--config", help="JSON config file (defaults when omitted)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=cmd_train_agent)

    p = sub.add_parser("solve-ccpomdp", help="solve the chance-constrained baseline")
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="policy file to write")
    p.set_defaults(func=cmd_solve_ccpomdp)

    p = sub.add_parser("evaluate", help="evaluate one agent against one adversary")
    p.add_argument("agent", help="model or policy file")
    p.add_argument("--config")
    p.add_argument("--adversary", required=True,
                   help="neutral | generative:A,B | deceptive:T | learning:PATH")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seeds", default="0", help="comma-separated seed list")
    p.add_argument("--out", required=True, help="metrics CSV to write")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="sweep a test-adversary parameter grid")
    p.add_argument("agents", nargs="+", help="agent artifacts to compare")
    p.add_argument("--config")
    p.add_argument("--mode", required=True, choices=["eta", "bthre"])
    p.add_argument("--out", required=True, help="metrics CSV to write")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="emit plot-data files from a metrics CSV")
    p.add_argument("--in", dest="in_csv", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--positive-prefix", default="maxent",
                   help="agent-label prefix treated as the positive side of differences")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, ["threatprobe", *argv])
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
