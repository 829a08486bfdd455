"""Command-line front end.

Every subcommand writes its artifacts into ``--out`` (default ``.``) and ends
by atomically writing ``manifest.json`` there. Exit codes: 0 success,
1 model or runtime failure (such as a zero mode), 2 usage or config error.
Failures print one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io
from .adjoint import gradient
from .fd_oracle import FdConfig, fd_gradient, relative_error, step_sweep
from .lattice import LatticeError, build_triangular_lattice, prune_bond, select_node, validate
from .render import render_svg
from .statics import ZeroModeError, solve_count, solve_statics
from .tasks import (DEMO_LATTICE, BehaviorTask, IrisTask, RegressionTask, TaskError,
                    evaluate_behavior, evaluate_classification, evaluate_regression, force_grid)
from .trainer import most_critical_bond, retrain, split_indices, train

EXIT_OK, EXIT_MODEL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------- helpers

def _config(args) -> dict:
    return io.read_json(args.config) if args.config else {}


def _network_for(args, cfg: dict):
    """Network from the positional file, else from ``cfg["network"]`` or ``cfg["lattice"]``,
    else the demonstration lattice."""
    path = getattr(args, "network", None) or cfg.get("network")
    if path:
        return io.load_network(path)
    if "lattice" in cfg:
        return build_triangular_lattice(io.lattice_spec_from_config(cfg["lattice"]))
    return build_triangular_lattice(DEMO_LATTICE)


def _task_config(args) -> dict:
    cfg = _config(args)
    if "task_type" not in cfg:
        raise io.ConfigError("a task config with 'task_type' is required (--config)")
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _task_markers(net, task):
    """(input ids, output ids) for drawing."""
    if isinstance(task, BehaviorTask):
        i, left, right = task.nodes(net)
        return [i], [left, right]
    if isinstance(task, RegressionTask):
        outs = sorted({n for n, _ in task.outputs(net)})
        return [select_node(net, task.input_node)], outs
    if isinstance(task, IrisTask):
        return task.nodes(net)
    return [], []


def _split(task, net, seed, split=0.7):
    samples = task.build(net)
    tr, te = split_indices(len(samples), split, seed)
    return samples, [samples[i] for i in tr], [samples[i] for i in te]


def _version() -> str:
    try:
        return metadata.version("mnn")
    except metadata.PackageNotFoundError:
        return "unknown"


# --------------------------------------------------------------------------- commands

def cmd_build(args, out: Path) -> dict:
    path = args.spec or args.config
    if not path:
        raise io.ConfigError("build needs a lattice spec file")
    spec = io.lattice_spec_from_config(io.read_json(path))
    net = build_triangular_lattice(spec)
    io.save_network(net, out / "network.json")
    return {"inputs": [path], "artifacts": ["network.json"],
            "summary": {"nodes": net.n_nodes, "bonds": net.n_bonds, "violations": validate(net)}}


def _problem(args):
    cfg = io.read_json(args.config) if args.config else None
    net = io.load_network(args.network)
    load, spec = io.problem_from_config(net, cfg)
    return net, load, spec


def cmd_solve(args, out: Path) -> dict:
    net, load, _ = _problem(args)
    sol = solve_statics(net, load)
    U = sol.nodal
    io.write_csv(out / "displacements.csv", ["node_id", "ux", "uy"],
                 [(n, U[n, 0], U[n, 1]) for n in range(net.n_nodes)])
    io.write_csv(out / "elongations.csv", ["bond_id", "e"], [(b, e) for b, e in enumerate(sol.e)])
    return {"inputs": [args.network, args.config], "artifacts": ["displacements.csv", "elongations.csv"],
            "summary": {"max_abs_u": float(np.max(np.abs(U)))}}


def cmd_grad(args, out: Path) -> dict:
    net, load, spec = _problem(args)
    rep = gradient(net, load, spec)
    io.write_csv(out / "grad.csv", ["bond_id", "e", "e_adj", "grad"],
                 [(b, rep.forward.e[b], rep.adjoint.e[b], rep.grad[b]) for b in range(net.n_bonds)])
    return {"inputs": [args.network, args.config], "artifacts": ["grad.csv"],
            "summary": {"loss": rep.loss, "solves_used": rep.solves_used}}


def cmd_grad_check(args, out: Path) -> dict:
    net, load, spec = _problem(args)
    exact = gradient(net, load, spec)
    fd = fd_gradient(net, load, spec, FdConfig("central", args.step, relative=True))
    err = relative_error(fd.grad, exact.grad)
    io.write_csv(out / "grad_check.csv", ["bond_id", "adjoint", "fd", "abs_diff"],
                 [(b, a, f, abs(a - f)) for b, (a, f) in enumerate(zip(exact.grad, fd.grad))])
    ok = err <= args.tolerance
    return {"inputs": [args.network, args.config], "artifacts": ["grad_check.csv"],
            "summary": {"max_rel_error": err, "tolerance": args.tolerance, "passed": ok,
                        "solves_adjoint": exact.solves_used, "solves_fd": fd.solves_used},
            "exit_code": EXIT_OK if ok else EXIT_MODEL}


def cmd_sweep_fd(args, out: Path) -> dict:
    net, load, spec = _problem(args)
    steps = np.logspace(np.log10(args.min_step), np.log10(args.max_step), args.n_steps)
    res = step_sweep(net, load, spec, steps, args.scheme)
    io.write_csv(out / "sweep_fd.csv", ["delta_k", "max_rel_error"], res.rows())
    return {"inputs": [args.network, args.config], "artifacts": ["sweep_fd.csv"],
            "summary": {"argmin": res.argmin, "min_error": res.min_error, "scheme": args.scheme}}


def cmd_train(args, out: Path) -> dict:
    cfg = _task_config(args)
    net = _network_for(args, cfg)
    task = io.task_from_config(cfg)
    tcfg = io.train_config_from_config(cfg)
    if args.epochs is not None:
        tcfg = type(tcfg)(**{**tcfg.__dict__, "epochs": args.epochs})
    trained, rec = (retrain if args.network else train)(net, task, tcfg)
    io.save_network(trained, out / "network.json")
    io.write_history(out / "history.csv", rec)
    return {"inputs": [args.config, args.network or cfg.get("network")],
            "artifacts": ["network.json", "history.csv"],
            "hyperparameters": {**tcfg.__dict__, "gamma": getattr(task, "gamma", None)},
            "summary": {**rec.final, "epochs": rec.epochs, "training_solves": rec.solves_used}}


def cmd_eval(args, out: Path) -> dict:
    cfg = _task_config(args)
    net = _network_for(args, cfg)
    task = io.task_from_config(cfg)
    if isinstance(task, BehaviorTask):
        uL, uR, d = evaluate_behavior(net, task)
        result = {"u_Ly": uL, "u_Ry": uR, "abs_diff": d}
    elif isinstance(task, RegressionTask):
        ev = evaluate_regression(net, task)
        grid = evaluate_regression(net, task, forces=force_grid(task.f_max))
        result = {"mse": ev.mse, "r2": ev.r2, "slopes": ev.slopes.tolist(), "grid_slopes": grid.slopes.tolist()}
    else:
        tcfg = io.train_config_from_config(cfg)
        samples, _, te = _split(task, net, tcfg.seed, tcfg.split)
        result = {"accuracy_test": evaluate_classification(net, te),
                  "accuracy_all": evaluate_classification(net, samples)}
    io.atomic_write(out / "eval.json", json.dumps(result, indent=1) + "\n")
    return {"inputs": [args.config, args.network], "artifacts": ["eval.json"], "summary": result}


def cmd_prune(args, out: Path) -> dict:
    net = io.load_network(args.network)
    summary = {}
    if args.bond is None:
        cfg = _task_config(args)
        task = io.task_from_config(cfg)
        tcfg = io.train_config_from_config(cfg)
        _, tr, _ = _split(task, net, tcfg.seed, tcfg.split)
        bond = most_critical_bond(net, tr)
    else:
        bond = args.bond
    pruned, mapping = prune_bond(net, bond)
    io.save_network(pruned, out / "network.json")
    io.write_csv(out / "bond_map.csv", ["old_id", "new_id"], list(enumerate(mapping.tolist())))
    summary.update(bond=int(bond), nodes=[int(v) for v in net.edges[bond]], violations=validate(pruned))
    return {"inputs": [args.network, args.config], "artifacts": ["network.json", "bond_map.csv"],
            "summary": summary}


def cmd_render(args, out: Path) -> dict:
    net = io.load_network(args.network)
    inputs, outputs = [], []
    if args.config:
        cfg = io.read_json(args.config)
        if "task_type" in cfg:
            inputs, outputs = _task_markers(net, io.task_from_config(cfg))
    svg = render_svg(net, inputs, outputs)
    io.atomic_write(out / "network.svg", svg)
    return {"inputs": [args.network, args.config], "artifacts": ["network.svg"], "summary": {}}


COMMANDS = {
    "build": cmd_build, "solve": cmd_solve, "grad": cmd_grad, "grad-check": cmd_grad_check,
    "sweep-fd": cmd_sweep_fd, "train": cmd_train, "eval": cmd_eval, "prune": cmd_prune,
    "render": cmd_render,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="dataset and split seed")
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--tolerance", type=float, default=1e-6, help="grad-check tolerance")

    p = _Parser(prog="mnn", description="Spring-network simulation, adjoint gradients and training.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("build", parents=[common], help="build a triangular lattice from a spec file")
    s.add_argument("spec", nargs="?", help="lattice spec JSON (or --config)")

    for name, text in (("solve", "static solve"), ("grad", "adjoint gradient"),
                       ("grad-check", "adjoint vs central finite differences"),
                       ("sweep-fd", "finite-difference step sweep")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("network", help="network JSON")
        if name == "grad-check":
            s.add_argument("--step", type=float, default=1e-6, help="relative FD step")
        if name == "sweep-fd":
            s.add_argument("--min-step", type=float, default=1e-10)
            s.add_argument("--max-step", type=float, default=1e-2)
            s.add_argument("--n-steps", type=int, default=17)
            s.add_argument("--scheme", choices=("forward", "central"), default="forward")

    s = sub.add_parser("train", parents=[common], help="train on a task config")
    s.add_argument("network", nargs="?", help="start from this network (warm start)")
    s.add_argument("--epochs", type=int, default=None)

    s = sub.add_parser("eval", parents=[common], help="evaluate a network on a task config")
    s.add_argument("network", nargs="?")

    s = sub.add_parser("prune", parents=[common], help="remove one bond")
    s.add_argument("network")
    s.add_argument("--bond", type=int, default=None, help="bond id (default: most critical for --config task)")

    s = sub.add_parser("render", parents=[common], help="draw a network as SVG")
    s.add_argument("network")
    return p


def _fail(code: int, exc: BaseException) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code},
                     ensure_ascii=False), file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    out = Path(args.out)
    started = datetime.now(timezone.utc).isoformat()
    solves0 = solve_count()
    try:
        result = COMMANDS[args.command](args, out)
    except ZeroModeError as exc:
        return _fail(EXIT_MODEL, exc)
    except (UsageError, io.ConfigError, LatticeError, TaskError, ValueError, KeyError,
            FileNotFoundError, IsADirectoryError) as exc:
        return _fail(EXIT_USAGE, exc)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_MODEL, exc)

    inputs = [str(p) for p in result.get("inputs", []) if p]
    manifest = {
        "command": args.command,
        "argv": argv,
        "version": _version(),
        "config_hash": io.content_hash(*inputs, {"seed": args.seed, "argv": argv}),
        "seed": args.seed,
        "inputs": inputs,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "solves": solve_count() - solves0,
        "artifacts": result.get("artifacts", []),
        "hyperparameters": result.get("hyperparameters"),
        "summary": result.get("summary", {}),
    }
    io.atomic_write(out / "manifest.json", json.dumps(manifest, indent=1, default=_json_default) + "\n")
    print(json.dumps({"command": args.command, **manifest["summary"]}, default=_json_default))
    return result.get("exit_code", EXIT_OK)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


if __name__ == "__main__":
    sys.exit(main())
