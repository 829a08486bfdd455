"""File formats: network JSON, task/problem configs, CSV tables and run manifests."""
from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .lattice import LatticeSpec, Network, select_node
from .losses import MSE, CrossEntropy, DEFAULT_GAMMA, Quadratic
from .statics import G, DofMap, LoadCase
from .tasks import BehaviorTask, IrisTask, RegressionTask
from .trainer import LR_BEHAVIOR, LR_CLASSIFICATION, LR_REGRESSION, TrainConfig


class ConfigError(ValueError):
    """Malformed or inconsistent input file."""


# --------------------------------------------------------------------------- network files

def network_to_dict(net: Network) -> dict:
    nodes = []
    for i, (p, f) in enumerate(zip(net.positions, net.fixed)):
        fixed = bool(f[0]) if f[0] == f[1] else ["xy"[a] for a in range(2) if f[a]]
        nodes.append({"id": i, "x": float(p[0]), "y": float(p[1]), "fixed": fixed})
    bonds = [{"id": b, "i": int(i), "j": int(j), "k": float(k), "rest_length": float(r)}
             for b, ((i, j), k, r) in enumerate(zip(net.edges, net.k, net.rest_length))]
    return {
        "nodes": nodes,
        "bonds": bonds,
        "k_bounds": {"min": net.k_bounds[0], "max": net.k_bounds[1]},
        "units": {"length": "m", "stiffness": "N/m"},
    }


def network_from_dict(d: dict) -> Network:
    try:
        nodes = sorted(d["nodes"], key=lambda n: n["id"])
        bonds = sorted(d["bonds"], key=lambda b: b["id"])
        if [n["id"] for n in nodes] != list(range(len(nodes))):
            raise ConfigError("node ids must be dense 0..n-1")
        if [b["id"] for b in bonds] != list(range(len(bonds))):
            raise ConfigError("bond ids must be dense 0..m-1")
        fixed = []
        for n in nodes:
            f = n.get("fixed", False)
            if isinstance(f, bool):
                fixed.append((f, f))
            else:
                fixed.append(("x" in f, "y" in f))
        return Network(
            positions=[(n["x"], n["y"]) for n in nodes],
            fixed=fixed,
            edges=[(b["i"], b["j"]) for b in bonds],
            k=[b["k"] for b in bonds],
            rest_length=[b["rest_length"] for b in bonds],
            k_bounds=(d["k_bounds"]["min"], d["k_bounds"]["max"]),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed network file: missing or invalid {exc}") from None


def dumps_network(net: Network) -> str:
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(network_to_dict(net), indent=1) + "\n"


def save_network(net: Network, path):
    atomic_write(path, dumps_network(net))


def load_network(path) -> Network:
    try:
        return network_from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


# --------------------------------------------------------------------------- configs

def lattice_spec_from_config(cfg: dict) -> LatticeSpec:
    known = {"rows", "cols", "spacing", "default_k", "fixed_nodes", "symmetric", "k_bounds"}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown lattice keys: {sorted(unknown)}")
    kw = dict(cfg)
    if "fixed_nodes" in kw:
        kw["fixed_nodes"] = tuple(tuple(s) if isinstance(s, list) else s for s in kw["fixed_nodes"])
    if "k_bounds" in kw and kw["k_bounds"] is not None:
        kb = kw["k_bounds"]
        kw["k_bounds"] = (kb["min"], kb["max"]) if isinstance(kb, dict) else tuple(kb)
    return LatticeSpec(**kw)


def _sel(s):
    return tuple(s) if isinstance(s, list) else s


def task_from_config(cfg: dict):
    """Build a task object from a task config mapping."""
    kind = cfg.get("task_type")
    loss = cfg.get("loss", {})
    if kind == "behavior":
        return BehaviorTask(
            input_node=_sel(cfg.get("input_node", "bottom-center")),
            output_nodes=tuple(_sel(s) for s in cfg.get("output_nodes", ("bottom-left", "bottom-right"))),
            force=cfg.get("force", 0.005 * G),
            label=cfg.get("label", "L"),
            gamma=loss.get("gamma", DEFAULT_GAMMA),
        )
    if kind == "regression":
        return RegressionTask(
            input_node=_sel(cfg.get("input_node", "bottom-center")),
            left_node=_sel(cfg.get("left_node", "bottom-left")),
            right_node=_sel(cfg.get("right_node", "bottom-right")),
            slopes=tuple(cfg.get("slopes", RegressionTask.slopes)),
            n_samples=cfg.get("n_samples", 100),
            f_max=cfg.get("f_max", 0.012 * G),
            noise_sigma=cfg.get("noise_sigma", 0.0),
            seed=cfg.get("seed", 0),
        )
    if kind in ("iris", "classification"):
        defaults = IrisTask()
        return IrisTask(
            input_nodes=tuple(_sel(s) for s in cfg.get("input_nodes", defaults.input_nodes)),
            output_nodes=tuple(_sel(s) for s in cfg.get("output_nodes", defaults.output_nodes)),
            gain=cfg.get("force_gain", defaults.gain),
            gamma=loss.get("gamma", defaults.gamma),
            round_grams=cfg.get("round_grams", False),
            path=cfg.get("iris_path"),
        )
    raise ConfigError(f"unknown task_type {kind!r} (expected behavior, regression or iris)")


_DEFAULT_LR = {"behavior": LR_BEHAVIOR, "regression": LR_REGRESSION,
               "iris": LR_CLASSIFICATION, "classification": LR_CLASSIFICATION}
_DEFAULT_EPOCHS = {"behavior": 2000, "regression": 5000, "iris": 100, "classification": 100}


def train_config_from_config(cfg: dict, seed=None) -> TrainConfig:
    kind = cfg.get("task_type")
    opt = dict(cfg.get("optimizer", {}))
    known = {"epochs", "lr", "beta1", "beta2", "eps", "k_bounds", "width_scale", "split", "snapshot_every"}
    unknown = set(opt) - known
    if unknown:
        raise ConfigError(f"unknown optimizer keys: {sorted(unknown)}")
    opt.setdefault("epochs", _DEFAULT_EPOCHS.get(kind, 100))
    opt.setdefault("lr", _DEFAULT_LR.get(kind, LR_CLASSIFICATION))
    if opt.get("k_bounds") is not None:
        kb = opt["k_bounds"]
        opt["k_bounds"] = (kb["min"], kb["max"]) if isinstance(kb, dict) else tuple(kb)
    s = seed if seed is not None else cfg.get("split_seed", cfg.get("seed", 0))
    return TrainConfig(seed=s, **opt)


def loss_from_config(net: Network, d: dict):
    kind = d.get("type")
    if kind == "quadratic":
        return Quadratic(select_node(net, _sel(d["node"])), d.get("axis", "y"), d.get("offset", 0.0))
    if kind == "mse":
        return MSE(tuple((select_node(net, _sel(t["node"])), t.get("axis", "y"), t["target"])
                         for t in d["targets"]))
    if kind == "cross_entropy":
        outs = tuple((select_node(net, _sel(o["node"])), o.get("axis", "y")) for o in d["outputs"])
        return CrossEntropy(outs, d.get("label", 0), d.get("gamma", DEFAULT_GAMMA))
    raise ConfigError(f"unknown loss type {kind!r}")


def load_from_config(net: Network, loads) -> LoadCase:
    """``[{"node": sel, "axis": "y", "value": N}, ...]`` or ``{"grams": g}`` weights."""
    dofs = DofMap.of(net)
    forces = {}
    for item in loads:
        node = select_node(net, _sel(item["node"]))
        axis = item.get("axis", "y")
        value = item["value"] if "value" in item else -item["grams"] * 1e-3 * G
        forces[(node, axis)] = forces.get((node, axis), 0.0) + value
    try:
        return LoadCase.nodal(dofs, forces)
    except KeyError as exc:
        raise ConfigError(f"load on a constrained DOF: {exc}") from None


# default problem: 10 g on the bottom-right node, bottom-left target u_y = -25 mm
DEFAULT_PROBLEM = {
    "loads": [{"node": "bottom-right", "axis": "y", "value": -0.01 * G}],
    "loss": {"type": "quadratic", "node": "bottom-left", "axis": "y", "offset": 0.025},
}


def problem_from_config(net: Network, cfg: dict | None):
    cfg = DEFAULT_PROBLEM if cfg is None else cfg
    if "loads" not in cfg or "loss" not in cfg:
        raise ConfigError("problem config needs 'loads' and 'loss'")
    return load_from_config(net, cfg["loads"]), loss_from_config(net, cfg["loss"])


# --------------------------------------------------------------------------- tables

def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def write_history(path, record):
    write_csv(path, ["epoch", "loss_train", "loss_test", "metric"], record.rows())


def content_hash(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, (str, Path)) and Path(p).is_file():
            h.update(Path(p).read_bytes())
        else:
            h.update(json.dumps(p, sort_keys=True, default=str).encode())
        h.update(b"\0")
    return h.hexdigest()
