"""Command-line front end.

Subcommands
-----------
run        execute one TOML run config and write its artifacts
reproduce  run one of the built-in comparison batteries
eval       measure a saved model's relative error on a test mesh

Exit status: 0 when the tolerance was met, 2 when it was not, 1 on error.
"""

import argparse
import csv
import logging
import os
import sys
from contextlib import nullcontext
from dataclasses import fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from threadpoolctl import threadpool_limits

from .driver import AneConfig, amr_only, ane_fixed_mesh, ane_full, fixed_network, relative_error
from .exceptions import ANEError, ConfigError
from .network import load_model, save_model
from .optimize import TrainConfig, write_loss_trace
from .partition import write_partition_csv
from .quadrature import integration_accuracy, reference_integral, uniform_mesh, write_mesh_csv
from .targets import TARGETS, make_target

logger = logging.getLogger(__name__)

MODES = ("ane-fixed", "amr-only", "ane-full", "fixed-network")
ENV_PREFIX = "ANE_"

_ANE_KEYS = {f.name for f in fields(AneConfig)} - {"train", "initial_mesh_counts", "seed"}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"seed"}
TOP_KEYS = _ANE_KEYS | {"mode", "target", "target_params", "mesh", "test_mesh", "neurons", "seed", "out", "train"}


# ---------------------------------------------------------------- config


def _parse_scalar(text):
    """Read an environment value with TOML scalar syntax, else keep the string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_env(cfg, environ=None):
    """Overlay ``ANE_KEY=value`` variables; ``ANE_TRAIN__KEY`` reaches into
    the ``[train]`` table and ``ANE_TARGET_PARAMS__KEY`` into target parameters."""
    environ = os.environ if environ is None else environ
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX):].lower().split("__")
        node = cfg
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = _parse_scalar(raw)
    return cfg


def load_config(path, environ=None):
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    return apply_env(cfg, environ)


def _require(cfg, key):
    if key not in cfg:
        raise ConfigError(key, "required key is missing")
    return cfg[key]


def build_run(cfg):
    """Validate a config mapping; return ``(mode, target, mesh, AneConfig, extras)``."""
    unknown = sorted(set(cfg) - TOP_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    mode = cfg.get("mode", "ane-fixed")
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {', '.join(MODES)}")
    name = _require(cfg, "target")
    if name not in TARGETS:
        raise ConfigError("target", f"unknown target {name!r}; known: {', '.join(sorted(TARGETS))}")
    try:
        f = make_target(name, **cfg.get("target_params", {}))
    except KeyError as exc:
        raise ConfigError("target_params", str(exc)) from None
    epsilon = _require(cfg, "epsilon")

    train_cfg = cfg.get("train", {})
    bad = sorted(set(train_cfg) - _TRAIN_KEYS)
    if bad:
        raise ConfigError(f"train.{bad[0]}", "unknown key")
    seed = int(cfg.get("seed", 0))
    counts = cfg.get("mesh", [1000] if f.dim == 1 else [200, 200])
    if isinstance(counts, int):
        counts = [counts] * f.dim
    if len(counts) != f.dim:
        raise ConfigError("mesh", f"needs {f.dim} entries for target {name}")
    try:
        train = TrainConfig(seed=seed, **train_cfg)
        ane_kwargs = {k: cfg[k] for k in _ANE_KEYS if k in cfg}
        ane_kwargs["epsilon"] = epsilon
        if "amr" not in ane_kwargs:
            ane_kwargs["amr"] = mode in ("amr-only", "ane-full")
        config = AneConfig(train=train, seed=seed, initial_mesh_counts=tuple(counts), **ane_kwargs)
    except (TypeError, ValueError) as exc:
        key = next((k for k in list(ane_kwargs) + list(train_cfg) if k in str(exc)), "config")
        raise ConfigError(key, str(exc)) from None

    extras = {"test_mesh": cfg.get("test_mesh", [10_000] if f.dim == 1 else [1000, 1000])}
    if mode == "fixed-network":
        extras["neurons"] = int(_require(cfg, "neurons"))
    mesh = uniform_mesh(f.domain, counts)
    return mode, f, mesh, config, extras


# ------------------------------------------------------------- execution


def execute(mode, f, mesh, config, extras):
    if mode == "ane-fixed":
        return ane_fixed_mesh(f, mesh, config)
    if mode == "ane-full":
        return ane_full(f, config, mesh=mesh)
    if mode == "amr-only":
        return amr_only(f, config, mesh=mesh)
    return fixed_network(f, mesh, extras["neurons"], config)


def _concat_traces(traces):
    out, offset = [], 0
    for tr in traces:
        out.extend((offset + it, val) for it, val in tr)
        if tr:
            offset += tr[-1][0] + 1
    return out


def write_artifacts(report, out, f=None, test_mesh=None):
    """Write report, checkpoint, mesh, partition and loss trace to ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.csv",
        "timing": out / "timing.csv",
        "model": out / "model.txt",
        "mesh": out / "mesh.csv",
        "partition": out / "partition.csv",
        "loss_trace": out / "loss_trace.csv",
        "summary": out / "summary.csv",
    }
    report.write_csv(paths["report"])
    with open(paths["timing"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "wall_time"])
        w.writerows((r.iteration, repr(r.wall_time)) for r in report.records)
    save_model(report.model, paths["model"])
    write_mesh_csv(report.mesh, paths["mesh"])
    write_partition_csv(report.partition, paths["partition"])
    write_loss_trace(_concat_traces(report.loss_traces), paths["loss_trace"])
    summary = {
        "converged": int(report.converged),
        "n_neurons": report.model.n_neurons,
        "n_parameters": report.final.n_parameters,
        "n_cells": report.mesh.n_cells,
        "estimator": repr(report.final.estimator),
    }
    if f is not None and test_mesh is not None:
        tm = uniform_mesh(f.domain, test_mesh)
        summary["test_error"] = repr(relative_error(report.model, tm, f))
    with open(paths["summary"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        w.writerows(summary.items())
    return paths


def cmd_run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = args.out or cfg.get("out") or "ane_out"
    mode, f, mesh, config, extras = build_run(cfg)
    report = execute(mode, f, mesh, config, extras)
    write_artifacts(report, out, f, extras["test_mesh"])
    last = report.final
    print(f"{mode}: n={last.n_neurons} cells={last.n_cells} xi={last.estimator:.6g} "
          f"{'met' if report.converged else 'NOT met'} (epsilon={config.epsilon}) -> {out}")
    return 0 if report.converged else 2


def cmd_eval(args):
    cfg = load_config(args.config) if args.config else {}
    name = args.target or cfg.get("target")
    if name is None:
        raise ConfigError("target", "give --target or a config with a target")
    f = make_target(name, **cfg.get("target_params", {}))
    counts = args.mesh or cfg.get("test_mesh") or ([10_000] if f.dim == 1 else [1000, 1000])
    if len(counts) == 1:
        counts = counts * f.dim
    model = load_model(args.model)
    err = relative_error(model, uniform_mesh(f.domain, counts), f)
    print(f"test_error,{err!r}")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        with open(Path(args.out) / "eval.csv", "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows([["target", "mesh", "test_error"], [name, "x".join(map(str, counts)), repr(err)]])
    return 0


# ------------------------------------------------------------ reproduce


def _scaled(counts, scale):
    return [max(2, int(round(c * scale))) for c in counts]


def _train(args, **kw):
    kw.setdefault("seed", args.seed)
    if args.max_iters is not None:
        kw["max_iters"] = args.max_iters
    return TrainConfig(**kw)


def _trajectory(report):
    ns = report.neuron_counts()
    return "->".join(str(n) for n in ns)


def _t1(args):
    f = make_target("test1")
    mesh = uniform_mesh(f.domain, _scaled([1000], args.scale))
    test = uniform_mesh(f.domain, _scaled([10_000], args.scale))
    rows = []
    for n in (20, 38):
        rep = fixed_network(f, mesh, n, AneConfig(epsilon=0.005, amr=False, train=_train(args), seed=args.seed))
        rows.append([f"Fixed ({n})", rep.final.n_parameters, rep.final.estimator, relative_error(rep.model, test, f)])
    cfg = AneConfig(epsilon=0.005, enhancement="local_average", amr=False, train=_train(args), seed=args.seed)
    rep = ane_fixed_mesh(f, mesh, cfg)
    rows.append([f"Adaptive ({_trajectory(rep)})", rep.final.n_parameters, rep.final.estimator,
                 relative_error(rep.model, test, f)])
    return ["network", "n_parameters", "train_error", "test_error"], rows


def _t2(args):
    f = make_target("test1")
    mesh = uniform_mesh(f.domain, _scaled([1000], args.scale))
    rows = []
    for init, out_init in (("random", "zero"), ("uniform", "solve")):
        cfg = AneConfig(epsilon=0.005, enhancement="global", global_init=init, output_init=out_init,
                        amr=False, max_outer_iters=3, train=_train(args), seed=args.seed)
        rep = ane_fixed_mesh(f, mesh, cfg)
        rows.append([_trajectory(rep), init, rep.final.n_parameters, rep.final.estimator])
    return ["network", "initialization", "n_parameters", "train_error"], rows


def _t3(args):
    f = make_target("test2")
    ref_counts = _scaled([1600, 1600], args.scale)
    exact = reference_integral(f.domain, f, ref_counts)
    test = uniform_mesh(f.domain, _scaled([1000, 1000], args.scale))
    n_fixed = max(2, int(round(69 * args.neuron_scale)))
    rows = []
    for m in (50, 100, 200, 400):
        counts = _scaled([m, m], args.scale)
        mesh = uniform_mesh(f.domain, counts)
        rep = fixed_network(f, mesh, n_fixed, AneConfig(epsilon=0.01, amr=False, train=_train(args), seed=args.seed))
        rows.append([f"Fixed {n_fixed} ({counts[0]}x{counts[1]})", integration_accuracy(mesh, f, exact),
                     rep.final.estimator, relative_error(rep.model, test, f)])
    counts = _scaled([400, 400], args.scale)
    mesh = uniform_mesh(f.domain, counts)
    cfg = AneConfig(epsilon=0.01, enhancement="local_bulk", gamma1=0.7, amr=False, train=_train(args),
                    seed=args.seed, max_neurons=max(n_fixed, 2 * 10 + 1))
    rep = ane_fixed_mesh(f, mesh, cfg)
    rows.append([f"ANE {rep.model.n_neurons} ({counts[0]}x{counts[1]})", integration_accuracy(mesh, f, exact),
                 rep.final.estimator, relative_error(rep.model, test, f)])
    return ["network", "integration_accuracy", "train_error", "test_error"], rows


def _t4(args):
    f = make_target("test3")
    test = uniform_mesh(f.domain, _scaled([1000, 1000], args.scale))
    cap = max(2, int(round(578 * args.neuron_scale)))
    rows = []
    fine = _scaled([400, 400], args.scale)
    cfg = AneConfig(epsilon=0.05, amr=False, max_neurons=cap, max_outer_iters=50, train=_train(args), seed=args.seed)
    rep = ane_fixed_mesh(f, uniform_mesh(f.domain, fine), cfg)
    rows.append(["Uniform", f"{fine[0]}x{fine[1]}", f"ANE {rep.model.n_neurons}", rep.final.estimator,
                 relative_error(rep.model, test, f)])
    coarse = _scaled([100, 100], args.scale)
    cfg = AneConfig(epsilon=0.05, amr=True, amr_strategy="average", gamma2=0.9, max_neurons=cap,
                    max_outer_iters=50, train=_train(args), seed=args.seed)
    rep = ane_full(f, cfg, mesh=uniform_mesh(f.domain, coarse))
    n_amr = rep.mesh.n_cells
    rows.append(["AMR", str(n_amr), f"ANE {rep.model.n_neurons}", rep.final.estimator,
                 relative_error(rep.model, test, f)])
    side = max(2, int(round(n_amr ** 0.5)))
    rep = fixed_network(f, uniform_mesh(f.domain, [side, side]), cap,
                        AneConfig(epsilon=0.05, amr=False, train=_train(args), seed=args.seed))
    rows.append(["Uniform", f"{side}x{side}", f"Fixed {cap}", rep.final.estimator,
                 relative_error(rep.model, test, f)])
    return ["integration_mesh", "n_quadrature", "neurons", "train_error", "test_error"], rows


REPRODUCTIONS = {
    "t1-fixed-vs-adaptive": _t1,
    "t2-global-init": _t2,
    "t3-integration-effect": _t3,
    "t4-uniform-vs-amr": _t4,
}


def cmd_reproduce(args):
    if args.table not in REPRODUCTIONS:
        raise ConfigError("table", f"unknown id {args.table!r}; valid ids: {', '.join(REPRODUCTIONS)}")
    header, rows = REPRODUCTIONS[args.table](args)
    out = Path(args.out or "ane_out")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{args.table}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    for r in rows:
        print(",".join(repr(v) if isinstance(v, float) else str(v) for v in r))
    print(f"-> {path}")
    return 0


# ------------------------------------------------------------------ main


def _parser():
    p = argparse.ArgumentParser(prog="ane", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0, help="log progress (-vv for training detail)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--threads", type=int, help="cap BLAS/OpenMP threads")

    r = sub.add_parser("run", help="execute a run config")
    r.add_argument("--config", required=True, help="TOML run config")
    common(r)

    rp = sub.add_parser("reproduce", help="run a comparison battery")
    rp.add_argument("table", help=f"one of: {', '.join(REPRODUCTIONS)}")
    rp.add_argument("--scale", type=float, default=1.0, help="multiply every mesh size by this factor")
    rp.add_argument("--neuron-scale", type=float, default=1.0, help="multiply fixed network sizes by this factor")
    rp.add_argument("--max-iters", type=int, help="cap Adam iterations per training")
    common(rp)
    rp.set_defaults(seed=0)

    e = sub.add_parser("eval", help="test accuracy of a saved model")
    e.add_argument("--model", required=True, help="checkpoint written by run")
    e.add_argument("--target", help="target name (or take it from --config)")
    e.add_argument("--mesh", type=int, nargs="+", help="test mesh counts per axis")
    e.add_argument("--config", help="run config supplying target and test_mesh")
    common(e)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=logging.WARNING, format="%(asctime)s %(name)s %(message)s")
    logging.getLogger("ane").setLevel(level)
    handler = {"run": cmd_run, "reproduce": cmd_reproduce, "eval": cmd_eval}[args.command]
    limits = threadpool_limits(args.threads) if args.threads else nullcontext()
    try:
        with limits:
            return handler(args)
    except ConfigError as exc:
        print(f"ane: config error: {exc}", file=sys.stderr)
        return 1
    except (ANEError, OSError, ValueError, KeyError) as exc:
        print(f"ane: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
