"""Command-line entry point.

Subcommands: generate, train, estimate-risk, evaluate, feedback,
validate. Every run writes a manifest.json capturing the resolved
config, seed, and output inventory; passing a manifest back through
--config reproduces the run byte-for-byte on its data files.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__, evaluation, validation
from .estimators import ESTIMATORS, LossSpec, PairEstimates, estimate_risk, true_risk
from .feedback import FeedbackConfig, run_trajectory
from .graph import GraphFormatError, load_graph, observed_vector, save_graph, universe_indices
from .models import load_checkpoint, save_checkpoint
from .synthesis import SyntheticSpec, generate_world, load_world, sample_observed, save_world
from .training import TrainConfig, TrainingDiverged, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"missing file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from exc


def load_config(path, command):
    """Read a config file; a manifest from a previous run also works."""
    if path is None:
        return {}
    payload = _load_json(path)
    if "command" in payload and "config" in payload:  # manifest re-run
        if payload["command"] != command:
            raise ConfigError(
                f"manifest was written by '{payload['command']}', "
                f"not '{command}'"
            )
        return dict(payload["config"])
    return payload


def build_dataclass(cls, payload, label):
    fields = {f.name for f in cls.__dataclass_fields__.values()}
    unknown = sorted(set(payload) - fields)
    if unknown:
        raise ConfigError(f"unknown {label} field(s): {', '.join(unknown)}")
    try:
        return cls(**payload)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {label}: {exc}") from exc


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(out_dir, command, config, seed, outputs, started,
                   threads=None, extra=None):
    manifest = {
        "command": command,
        "version": f"linkdebias-{__version__}",
        "seed": seed,
        "config": _jsonable(config),
        "threads": threads,
        "started_at": started.isoformat(),
        "finished_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    if extra:
        manifest.update(_jsonable(extra))
    path = os.path.join(out_dir, "manifest.json")
    write_json(path, manifest)
    return path


def _resolve_seed(args, config, default=0):
    if args.seed is not None:
        return args.seed
    return int(config.get("seed", default))


def load_graph_dir(data_dir):
    nodes = os.path.join(data_dir, "nodes.jsonl")
    edges = os.path.join(data_dir, "edges.tsv")
    for path in (nodes, edges):
        if not os.path.exists(path):
            raise DataError(f"missing data file: {path}")
    return load_graph(nodes, edges)


def _maybe_world(data_dir):
    truth = os.path.join(data_dir, "truth.json")
    pi = os.path.join(data_dir, "pi.csv")
    if os.path.exists(truth) and os.path.exists(pi):
        return load_world(data_dir)
    return None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_generate(args):
    started = datetime.datetime.now(datetime.timezone.utc)
    config = load_config(args.config, "generate")
    seed = _resolve_seed(args, config)
    config["seed"] = seed
    if "true_w" in config and config["true_w"] is not None:
        config["true_w"] = list(config["true_w"])
    payload = dict(config)
    for key in ("diag_range", "offdiag_range"):
        if key in payload:
            payload[key] = tuple(payload[key])
    if payload.get("true_w") is not None:
        payload["true_w"] = np.asarray(payload["true_w"], dtype=np.float64)
    spec = build_dataclass(SyntheticSpec, payload, "generate config")

    world = generate_world(spec)
    os.makedirs(args.out, exist_ok=True)
    outputs = save_world(world, args.out)
    g = sample_observed(world, np.random.default_rng((seed, 1)))
    nodes_path = os.path.join(args.out, "nodes.jsonl")
    edges_path = os.path.join(args.out, "edges.tsv")
    save_graph(g, nodes_path, edges_path)
    outputs.append(edges_path)
    # record the resolved link model so re-runs do not depend on defaults
    config["true_w"] = [float(x) for x in world.link_w]
    config["true_b"] = float(world.link_b)
    write_manifest(args.out, "generate", config, seed, outputs, started,
                   threads=args.threads)
    print(f"wrote world with n={world.n}, |E|={g.n_edges} to {args.out}")
    return EXIT_OK


def cmd_train(args):
    started = datetime.datetime.now(datetime.timezone.utc)
    config = load_config(args.config, "train")
    data_dir = args.data or config.pop("data", None)
    if data_dir is None:
        raise ConfigError("train needs --data or a 'data' config entry")
    seed = _resolve_seed(args, config)
    config["seed"] = seed
    cfg = build_dataclass(TrainConfig, config, "train config")
    g = load_graph_dir(data_dir)

    report = train(g, cfg)
    os.makedirs(args.out, exist_ok=True)
    checkpoint = os.path.join(args.out, "checkpoint.json")
    save_checkpoint(report.link_model, report.propensity_model, checkpoint)
    report_path = os.path.join(args.out, "report.json")
    write_json(report_path, report.to_json_dict())
    manifest_config = dict(config)
    manifest_config["data"] = os.path.abspath(data_dir)
    write_manifest(args.out, "train", manifest_config, seed,
                   [checkpoint, report_path], started, threads=args.threads,
                   extra={"wall_clock_seconds": report.wall_clock})
    final = report.loss_trace[-1] if report.loss_trace else float("nan")
    print(f"trained {cfg.epochs} epochs, final loss {final:.6f}; "
          f"checkpoint at {checkpoint}")
    return EXIT_OK


def _model_estimates(link, prop, g, floor):
    src, dst = universe_indices(g.n)
    y_hat = link.score_matrix(g.features)[src, dst]
    pi_hat = prop.predict_pairs(g.categories[src], g.categories[dst])
    return PairEstimates(
        y_hat=np.clip(y_hat, 1e-12, 1.0), pi_hat=pi_hat, floor=floor
    )


def cmd_estimate_risk(args):
    started = datetime.datetime.now(datetime.timezone.utc)
    config = load_config(args.config, "estimate-risk")
    estimators = args.estimators or config.get("estimators")
    if isinstance(estimators, str):
        estimators = [e.strip() for e in estimators.split(",") if e.strip()]
    if not estimators:
        raise ConfigError("estimator list must be non-empty")
    bad = sorted(set(estimators) - set(ESTIMATORS))
    if bad:
        raise ConfigError(f"unknown estimator(s): {', '.join(bad)}")
    data_dir = args.data or config.get("data")
    checkpoint = args.checkpoint or config.get("checkpoint")
    if not data_dir or not checkpoint:
        raise ConfigError("estimate-risk needs --checkpoint and --data")
    seed = _resolve_seed(args, config)

    g = load_graph_dir(data_dir)
    if not os.path.exists(checkpoint):
        raise DataError(f"missing checkpoint: {checkpoint}")
    link, prop = load_checkpoint(checkpoint)
    est = _model_estimates(link, prop, g, prop.floor)
    o = observed_vector(g).astype(float)
    loss = LossSpec(config.get("loss", "zero-one"), config.get("delta", 1.0))

    table = {
        which: estimate_risk(which, o, est, loss).to_json_dict()
        for which in estimators
    }
    world = _maybe_world(data_dir)
    if world is not None:
        truth = world.universe_truth()
        target = true_risk(truth, est, loss).value
        table["true"] = {"estimator": "true", "value": target,
                         "n_pairs": int(truth.y.size)}
        for which in estimators:
            table[which]["error_vs_true"] = table[which]["value"] - target

    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "risk_table.json")
    write_json(out_path, table)
    manifest_config = {
        "estimators": estimators, "data": os.path.abspath(data_dir),
        "checkpoint": os.path.abspath(checkpoint),
        "loss": loss.kind, "delta": loss.delta, "seed": seed,
    }
    write_manifest(args.out, "estimate-risk", manifest_config, seed,
                   [out_path], started, threads=args.threads)
    for which in estimators:
        line = f"{which}: {table[which]['value']:.6f}"
        if "error_vs_true" in table[which]:
            line += f" (error vs true {table[which]['error_vs_true']:+.6f})"
        print(line)
    return EXIT_OK


def cmd_evaluate(args):
    started = datetime.datetime.now(datetime.timezone.utc)
    config = load_config(args.config, "evaluate")
    data_dir = args.data or config.get("data")
    checkpoint = args.checkpoint or config.get("checkpoint")
    if not data_dir or not checkpoint:
        raise ConfigError("evaluate needs --checkpoint and --data")
    target = args.target or config.get("target", "observed")
    if target not in ("observed", "true"):
        raise ConfigError(f"target must be 'observed' or 'true', got {target!r}")
    k = args.k if args.k is not None else int(config.get("k", 100))
    seed = _resolve_seed(args, config)

    g = load_graph_dir(data_dir)
    if not os.path.exists(checkpoint):
        raise DataError(f"missing checkpoint: {checkpoint}")
    link, prop = load_checkpoint(checkpoint)
    scores = link.score_matrix(g.features)

    if target == "observed":
        positives = g.edges
    else:
        world = _maybe_world(data_dir)
        if world is None:
            raise DataError(
                f"target 'true' needs ground truth files in {data_dir}"
            )
        rng = np.random.default_rng((seed, 0xE7A1))
        relevant = rng.random((g.n, g.n)) < world.y_matrix()
        np.fill_diagonal(relevant, False)
        positives = np.argwhere(relevant)

    report = evaluation.evaluate_scores(
        scores, positives, g.categories, target=target, k=k
    )
    os.makedirs(args.out, exist_ok=True)
    json_path = os.path.join(args.out, "metrics.json")
    write_json(json_path, report.to_json_dict())
    csv_path = os.path.join(args.out, "metrics.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(report.CSV_FIELDS) + "\n")
        fh.write(report.to_csv_row() + "\n")
    manifest_config = {
        "data": os.path.abspath(data_dir),
        "checkpoint": os.path.abspath(checkpoint),
        "target": target, "k": k, "seed": seed,
    }
    write_manifest(args.out, "evaluate", manifest_config, seed,
                   [json_path, csv_path], started, threads=args.threads)
    payload = report.to_json_dict()
    print(", ".join(
        f"{key}={payload[key]:.4f}" for key in
        ("precision", "recall", "auc", "map", "recall_at_k", "mean_rank",
         "entropy_at_k")
        if payload[key] is not None
    ))
    return EXIT_OK


def cmd_feedback(args):
    started = datetime.datetime.now(datetime.timezone.utc)
    config = load_config(args.config, "feedback")
    seed = _resolve_seed(args, config)
    config["seed"] = seed
    payload = dict(config)
    for key in ("q", "y"):
        if payload.get(key) is not None:
            payload[key] = np.asarray(payload[key], dtype=np.float64)
    cfg = build_dataclass(FeedbackConfig, payload, "feedback config")

    trajectory = run_trajectory(cfg)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "trajectory.csv")
    trajectory.to_csv(csv_path)
    write_manifest(args.out, "feedback", config, seed, [csv_path], started,
                   threads=args.threads)
    final = trajectory.states[-1].kappa
    print(f"ran {cfg.steps} steps (mode {cfg.mode}); final shares "
          + np.array2string(final, precision=4))
    return EXIT_OK


def cmd_validate(args):
    started = datetime.datetime.now(datetime.timezone.utc)
    config = load_config(args.config, "validate")
    seed = _resolve_seed(args, config)
    results = validation.run_validation(seed=seed)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "validation.json")
    write_json(out_path, {
        "checks": [r.to_json_dict() for r in results],
        "all_passed": all(r.passed for r in results),
    })
    write_manifest(args.out, "validate", {"seed": seed}, seed, [out_path],
                   started, threads=args.threads)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.check_id}")
    if not all(r.passed for r in results):
        print("validation failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="linkdebias",
        description="Exposure-bias-aware link recommendation toolkit",
    )
    parser.add_argument("--version", action="version",
                        version=f"linkdebias {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config (or a prior manifest)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker-parallelism cap (recorded; "
                            "current implementation is single-threaded)")

    p = sub.add_parser("generate", help="generate a synthetic world")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train link and propensity models")
    common(p)
    p.add_argument("--data", help="world or graph directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate-risk", help="risk table for a checkpoint")
    common(p)
    p.add_argument("--data", help="world or graph directory")
    p.add_argument("--checkpoint", help="model checkpoint JSON")
    p.add_argument("--estimators",
                   help="comma-separated subset of naive,w,pu,ap")
    p.set_defaults(func=cmd_estimate_risk)

    p = sub.add_parser("evaluate", help="classification/ranking metrics")
    common(p)
    p.add_argument("--data", help="world or graph directory")
    p.add_argument("--checkpoint", help="model checkpoint JSON")
    p.add_argument("--target", choices=("observed", "true"))
    p.add_argument("--k", type=int, help="ranking cutoff (default 100)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("feedback", help="simulate a category feedback loop")
    common(p)
    p.set_defaults(func=cmd_feedback)

    p = sub.add_parser("validate", help="run the estimator/feedback checks")
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, GraphFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDiverged, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
