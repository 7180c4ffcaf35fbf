"""Command-line entry point: ``lof generate | train | evaluate | simulate``.

Exit codes: 0 on success, 2 on a configuration error, 3 on an I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA, RunConfig, describe
from .env import config_hash, generate_dataset, read_dataset, rollout, trajectory_rng
from .errors import ConfigError
from .metrics import METHODS, METRICS, evaluate, evaluation_hash, make_tracker, write_results, write_trace
from .plots import bar_chart, line_chart, write_svg
from .training import train, write_log
from .weights import read_checkpoint, write_checkpoint

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _overrides(pairs) -> dict:
    out = {}
    for p in pairs or []:
        key, sep, value = p.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {p!r}", key=p)
        out[key.strip()] = value.strip()
    return out


def _config(args, extra=None) -> RunConfig:
    over = _overrides(args.set)
    over.update({k: v for k, v in (extra or {}).items() if v is not None})
    return RunConfig.load(args.config, over)


def _sweep_key(name: str) -> str:
    if name in SCHEMA:
        return name
    hits = [k for k in SCHEMA if k.split(".", 1)[1] == name]
    if len(hits) != 1:
        raise ConfigError(f"unknown sweep key {name!r}", key=name)
    return hits[0]


def _load_mlp(path):
    if path is None:
        return None, ""
    params, meta = read_checkpoint(path)
    return params, meta.get("config_hash", "")


# -- commands ----------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = _config(args, {"run.seed": args.seed, "train.dataset_size": args.n})
    meta = {"config_hash": cfg.hash()}
    meta.update({k: v for k, v in cfg.values.items() if k.split(".")[0] in ("env", "target", "agent", "model", "disturbance")})
    generate_dataset(cfg.world(), cfg["train.dataset_size"], cfg["run.seed"], args.out, meta)
    print(f"wrote {cfg['train.dataset_size']} trajectories to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args, {"train.iterations": args.iterations, "run.seed": args.seed})
    trajs, _ = read_dataset(args.data)
    world = cfg.world()
    tcfg = cfg.train(args.data)
    if args.record_timings:
        from dataclasses import replace

        tcfg = replace(tcfg, record_timings=True)
    result = train(trajs, tcfg, world.assumed_evolution(), world.assumed_sensor(), cfg.fusion())
    meta = {"config_hash": cfg.hash(), "iterations": tcfg.iterations, "batch_size": tcfg.batch_size,
            "lr": tcfg.lr, "seed": tcfg.seed, "truncation": tcfg.truncation, "n_trajectories": len(trajs)}
    write_checkpoint(args.out_checkpoint, result.params, meta)
    log = args.log or str(Path(args.out_checkpoint).with_suffix(".log.csv"))
    write_log(log, result.log, {"config_hash": cfg.hash()})
    print(f"final loss {result.log[-1][1]:.4f}; checkpoint {args.out_checkpoint}; log {log}")
    return EXIT_OK


def _table(rows) -> str:
    lines = [f"{'method':<10} " + " ".join(f"{m:>20}" for m in METRICS)]
    by = {}
    for r in rows:
        by.setdefault(r.method, {})[r.metric] = r
    for m, d in by.items():
        lines.append(f"{m:<10} " + " ".join(f"{d[k].mean:>11.3f} ± {d[k].std:<6.3f}" for k in METRICS))
    return "\n".join(lines)


def cmd_evaluate(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise ConfigError(f"unknown method {bad[0] if bad else ''!r}; choose from {', '.join(METHODS)}", key="methods")
    cfg = _config(args, {"eval.episodes": args.episodes})
    mlp, ck_hash = _load_mlp(args.checkpoint)
    out = Path(args.out)
    plot_dir = Path(args.plot_dir) if args.plot_dir else out.parent
    n = cfg["eval.episodes"]

    def run(c: RunConfig):
        extra = {"methods": ",".join(methods), "episodes": n, "checkpoint": ck_hash,
                 "mse_components": c["eval.mse_components"], "threshold": c["eval.threshold"]}
        chash = evaluation_hash(c.world(), c.fusion(), extra)
        rows, _ = evaluate(c.world(), methods, n, c["run.seed"], mlp, c.fusion(), c["eval.mse_components"],
                           c["eval.threshold"], args.threads)
        return rows, chash

    if not args.sweep:
        rows, chash = run(cfg)
        write_results(out, rows, chash)
        for metric in METRICS:
            vals = {r.method: r.mean for r in rows if r.metric == metric}
            write_svg(plot_dir / f"{out.stem}_{metric}.svg", bar_chart(vals, metric, metric, f"config_hash={chash}"))
        print(_table(rows))
        return EXIT_OK

    name, _, values = args.sweep.partition("=")
    key = _sweep_key(name.strip())
    points = [v.strip() for v in values.split(",") if v.strip()]
    if not points:
        raise ConfigError("--sweep needs at least one value", key=key)
    curves = {metric: {m: [] for m in methods} for metric in METRICS}
    hashes, combined = [], []
    for v in points:
        c = RunConfig(dict(cfg.values))
        c.set(key, v)
        c.validate()
        rows, chash = run(c)
        hashes.append(chash)
        write_results(out.with_name(f"{out.stem}_{name.strip()}={v}{out.suffix}"), rows, chash)
        combined += rows
        for r in rows:
            curves[r.metric][r.method].append(r.mean)
        print(f"{key} = {v}\n{_table(rows)}")
    sweep_hash = config_hash({"points": ",".join(hashes)})
    write_results(out, combined, sweep_hash)
    xs = [float(v) for v in points]
    for metric in METRICS:
        svg = line_chart(xs, curves[metric], f"{metric} vs {key}", key, metric, f"config_hash={sweep_hash}")
        write_svg(plot_dir / f"{out.stem}_{metric}_vs_{name.strip()}.svg", svg)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.method not in METHODS:
        raise ConfigError(f"unknown method {args.method!r}", key="method")
    cfg = _config(args, {"run.seed": args.seed})
    mlp, ck_hash = _load_mlp(args.checkpoint)
    world = cfg.world()
    tracker = make_tracker(args.method, world, mlp, cfg.fusion())
    traj = rollout(world, trajectory_rng(cfg["run.seed"], args.index), tracker=tracker)
    meta = {"config_hash": cfg.hash(), "method": args.method, "index": args.index, "checkpoint": ck_hash}
    write_trace(args.out, traj, tracker, meta)
    err = np.array([[np.linalg.norm(b.mean[:2] - traj.truth[t, j, :2]) for j, b in enumerate(row)]
                    for t, row in enumerate(tracker.fused)])
    print(f"wrote trace to {args.out}; mean position error {err.mean():.3f} m")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    keys = "configuration keys (section.key = default):\n" + describe()
    fmt = argparse.RawDescriptionHelpFormatter
    p = argparse.ArgumentParser(prog="lof", description="Learnable weighted robust fusion for multi-agent tracking.",
                                epilog=keys, formatter_class=fmt)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat 'section.key = value' config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")

    g = sub.add_parser("generate", help="simulate a training dataset", epilog=keys, formatter_class=fmt)
    common(g)
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, help="number of trajectories (train.dataset_size)")
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit the likelihood MLP", epilog=keys, formatter_class=fmt)
    common(t)
    t.add_argument("--data", required=True)
    t.add_argument("--out-checkpoint", required=True)
    t.add_argument("--log", help="training log CSV (default: next to the checkpoint)")
    t.add_argument("--iterations", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--record-timings", action="store_true", help="fill wall_ms (makes the log non-reproducible)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="aggregate metrics over seeded episodes", epilog=keys, formatter_class=fmt)
    common(e)
    e.add_argument("--methods", default="lof,bci,skf", help=f"comma list from {', '.join(METHODS)}")
    e.add_argument("--episodes", type=int)
    e.add_argument("--checkpoint")
    e.add_argument("--out", required=True)
    e.add_argument("--plot-dir")
    e.add_argument("--sweep", metavar="KEY=V1,V2,...", help="evaluate at several values of one key")
    e.add_argument("--threads", type=int, default=1)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("simulate", help="dump one episode trace", epilog=keys, formatter_class=fmt)
    common(s)
    s.add_argument("--method", default="bci")
    s.add_argument("--checkpoint")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--index", type=int, default=0)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
