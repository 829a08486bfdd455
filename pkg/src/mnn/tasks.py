"""Learning tasks for spring networks: behaviour learning, linear regression
and Iris classification.

A task turns a network into a list of :class:`Sample` (load case plus loss)
and scores forward displacements with a task metric. All input forces point
downward (-y).
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .lattice import LatticeSpec, Network, build_triangular_lattice, select_node
from .losses import MSE, CrossEntropy, DEFAULT_GAMMA, batch_loss
from .statics import G, DofMap, LoadCase, StaticsOperator

log = logging.getLogger(__name__)

IRIS_SPECIES = ("setosa", "versicolor", "virginica")
REGRESSION_SLOPES = (0.0, 0.016, 0.004, 0.016)  # m/N for (u_Rx, u_Ry, u_Lx, u_Ly)

# symmetric 6-row lattice on which all three tasks are reachable inside the k band
DEMO_LATTICE = LatticeSpec(rows=6, cols=7, spacing=0.02, default_k=50.0, symmetric=True)


def demo_network() -> Network:
    return build_triangular_lattice(DEMO_LATTICE)


class Sample(NamedTuple):
    load: LoadCase
    loss: object


class TaskError(ValueError):
    pass


def _mean_loss(U, samples, dofs):
    return float(np.mean(batch_loss([s.loss for s in samples], U, dofs)[0]))


def _forward(net: Network, samples) -> tuple[np.ndarray, DofMap]:
    op = StaticsOperator(net)
    U, _ = op.solve_many(np.column_stack([s.load.F for s in samples]))
    return U, op.dofs


# --------------------------------------------------------------------------- behaviour

@dataclass(frozen=True)
class BehaviorTask:
    """Make one of two output nodes move further down under a fixed input force."""

    input_node: object = "bottom-center"
    output_nodes: tuple = ("bottom-left", "bottom-right")
    force: float = 0.005 * G
    label: str = "L"
    gamma: float = DEFAULT_GAMMA

    def nodes(self, net):
        i = select_node(net, self.input_node)
        left, right = (select_node(net, s) for s in self.output_nodes)
        if len({i, left, right}) != 3:
            raise TaskError("input and output nodes must be distinct")
        return i, left, right

    def build(self, net: Network) -> list[Sample]:
        if self.label not in ("L", "R"):
            raise TaskError(f"label must be 'L' or 'R', got {self.label!r}")
        i, left, right = self.nodes(net)
        dofs = DofMap.of(net)
        load = LoadCase.point(dofs, i, "y", -self.force)
        loss = CrossEntropy(((left, "y"), (right, "y")), 0 if self.label == "L" else 1, self.gamma)
        return [Sample(load, loss)]

    mean_loss = staticmethod(_mean_loss)

    def metric(self, U, samples, dofs) -> float:
        (left, _), (right, _) = samples[0].loss.outputs
        return abs(U[dofs.dof(left, "y"), 0] - U[dofs.dof(right, "y"), 0])


def evaluate_behavior(net: Network, task: BehaviorTask) -> tuple[float, float, float]:
    """(u_Ly, u_Ry, |u_Ly - u_Ry|) under the task's input force."""
    samples = task.build(net)
    U, dofs = _forward(net, samples)
    _, left, right = task.nodes(net)
    uL, uR = float(U[dofs.dof(left, "y"), 0]), float(U[dofs.dof(right, "y"), 0])
    return uL, uR, abs(uL - uR)


# --------------------------------------------------------------------------- regression

@dataclass(frozen=True)
class RegressionData:
    forces: np.ndarray  # (n,) downward force magnitudes, N
    targets: np.ndarray  # (n, 4) displacement along the load direction, m


@dataclass(frozen=True)
class RegressionTask:
    """Fit four output displacements to straight lines in the input force.

    Targets ``slope * F`` are displacements per unit *signed* force, so with
    a downward load the nodal displacement target is ``-slope * F`` in
    y-up coordinates. Output order is (u_Rx, u_Ry, u_Lx, u_Ly).
    """

    input_node: object = "bottom-center"
    left_node: object = "bottom-left"
    right_node: object = "bottom-right"
    slopes: tuple = REGRESSION_SLOPES
    n_samples: int = 100
    f_max: float = 0.012 * G
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if len(self.slopes) != 4:
            raise TaskError("need four slopes (u_Rx, u_Ry, u_Lx, u_Ly)")
        if self.noise_sigma < 0:
            raise TaskError("noise_sigma must be non-negative")

    def outputs(self, net):
        left, right = select_node(net, self.left_node), select_node(net, self.right_node)
        return ((right, "x"), (right, "y"), (left, "x"), (left, "y"))

    def dataset(self) -> RegressionData:
        return gen_regression_dataset(self, self.seed)

    def samples_for(self, net: Network, data: RegressionData) -> list[Sample]:
        i = select_node(net, self.input_node)
        outs = self.outputs(net)
        if i in {n for n, _ in outs}:
            raise TaskError("input node must differ from output nodes")
        dofs = DofMap.of(net)
        return [
            Sample(LoadCase.point(dofs, i, "y", -F),
                   MSE(tuple((n, a, -t) for (n, a), t in zip(outs, targets))))
            for F, targets in zip(data.forces, data.targets)
        ]

    def build(self, net: Network) -> list[Sample]:
        return self.samples_for(net, self.dataset())

    mean_loss = staticmethod(_mean_loss)

    def metric(self, U, samples, dofs) -> float:
        """1 - ||u - target|| / ||target|| over all output scalars."""
        idx = samples[0].loss.dof_indices(dofs)
        pred = U[idx, :]
        target = np.column_stack([s.loss.values for s in samples])
        norm = np.linalg.norm(target)
        return 1.0 - float(np.linalg.norm(pred - target) / norm) if norm > 0 else float("nan")


def gen_regression_dataset(task: RegressionTask, seed=None) -> RegressionData:
    """Forces ~ U(0, f_max); targets = slopes * F plus Gaussian noise."""
    if not task.f_max > 0:
        raise TaskError("f_max must be positive")
    rng = np.random.default_rng(task.seed if seed is None else seed)
    forces = rng.uniform(0.0, task.f_max, task.n_samples)
    targets = np.outer(forces, np.asarray(task.slopes, float))
    if task.noise_sigma > 0:
        targets = targets + rng.normal(0.0, task.noise_sigma, targets.shape)
    return RegressionData(forces, targets)


def force_grid(f_max=0.012 * G, step=0.002 * G) -> np.ndarray:
    """Evenly spaced evaluation forces from 0 to ``f_max`` inclusive."""
    return np.arange(int(round(f_max / step)) + 1) * step


@dataclass(frozen=True)
class RegressionEval:
    mse: float
    slopes: np.ndarray  # least-squares slopes through the origin, m/N
    r2: float


def evaluate_regression(net: Network, task: RegressionTask, data: RegressionData | None = None,
                        forces=None) -> RegressionEval:
    """Solve at each force of ``data`` (or of ``forces``) and fit one slope per output.

    MSE and R^2 compare against ``data`` targets when given, else against the
    task's noise-free lines.
    """
    if forces is None:
        data = task.dataset() if data is None else data
        forces = data.forces
        targets = data.targets
    else:
        forces = np.asarray(forces, float)
        targets = np.outer(forces, task.slopes)
    i = select_node(net, task.input_node)
    dofs = DofMap.of(net)
    op = StaticsOperator(net)
    F = np.zeros((dofs.n_dof, len(forces)))
    F[dofs.dof(i, "y"), :] = -forces
    U, _ = op.solve_many(F)
    idx = [dofs.dof(n, a) for n, a in task.outputs(net)]
    pred = -U[idx, :].T  # along the load direction
    denom = float(forces @ forces)
    slopes = (forces @ pred) / denom if denom > 0 else np.full(4, np.nan)
    resid = pred - targets
    ss_tot = float(np.sum((targets - targets.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else float("nan")
    return RegressionEval(float(np.mean(resid ** 2)), slopes, r2)


# --------------------------------------------------------------------------- iris

@dataclass(frozen=True)
class IrisData:
    features: np.ndarray  # (n, 4) cm
    labels: np.ndarray  # (n,) class index into IRIS_SPECIES
    species: tuple = IRIS_SPECIES


def _canonical_species(name: str) -> str:
    s = name.strip().lower()
    return s[5:] if s.startswith("iris-") else s


def load_iris(path=None) -> IrisData:
    """Read a 5-column Iris CSV (4 features + species). A header row is optional.

    ``path=None`` reads the copy shipped with the package.
    """
    if path is None:
        text = resources.files("mnn").joinpath("data/iris.csv").read_text()
        where = "iris.csv"
    else:
        text = Path(path).read_text()
        where = str(path)
    feats, labels = [], []
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 5:
            raise TaskError(f"{where}:{lineno}: expected 5 columns, got {len(row)}")
        try:
            values = [float(c) for c in row[:4]]
        except ValueError:
            if lineno == 1 and not feats:
                continue  # header
            raise TaskError(f"{where}:{lineno}: non-numeric feature in {row[:4]}") from None
        species = _canonical_species(row[4])
        if species not in IRIS_SPECIES:
            raise TaskError(f"{where}:{lineno}: unknown label {row[4].strip()!r}")
        feats.append(values)
        labels.append(IRIS_SPECIES.index(species))
    if not feats:
        raise TaskError(f"{where}: no data rows")
    return IrisData(np.array(feats), np.array(labels, dtype=np.int64))


def write_iris(path, data: IrisData):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sepal_length", "sepal_width", "petal_length", "petal_width", "species"])
        for x, y in zip(data.features, data.labels):
            w.writerow([repr(float(v)) for v in x] + [data.species[y]])


def scale_features_to_forces(features, gain: float, input_nodes, dofs: DofMap,
                             round_grams: bool = False) -> list[LoadCase]:
    """One combined downward load case per sample: force_f = gain * feature_f.

    With ``round_grams`` each force is rounded to a whole-gram weight.
    """
    if not gain > 0:
        raise TaskError("gain must be positive")
    X = np.atleast_2d(np.asarray(features, float))
    if X.shape[1] != len(input_nodes):
        raise TaskError(f"{X.shape[1]} features but {len(input_nodes)} input nodes")
    if np.any(X < 0):
        raise TaskError("negative feature value")
    forces = gain * X
    if round_grams:
        forces = np.round(forces / (1e-3 * G)) * (1e-3 * G)
    cols = [dofs.dof(n, "y") for n in input_nodes]
    out = []
    for row in forces:
        F = np.zeros(dofs.n_dof)
        np.add.at(F, cols, -row)
        out.append(LoadCase(F))
    return out


@dataclass(frozen=True)
class IrisTask:
    """Classify Iris flowers by the output node with the largest |u_x|.

    Output nodes are listed in species order (setosa, versicolor, virginica).
    """

    input_nodes: tuple = ("0,2", "0,3", "0,4", "0,5")
    output_nodes: tuple = ("0,0", "2,0", "2,-1")
    gain: float = 0.001 * G  # N per cm of feature
    gamma: float = 1e4
    round_grams: bool = False
    path: str | None = None
    data: IrisData | None = field(default=None, compare=False)

    def nodes(self, net):
        ins = [select_node(net, s) for s in self.input_nodes]
        outs = [select_node(net, s) for s in self.output_nodes]
        if len(ins) != 4 or len(outs) != 3:
            raise TaskError("need 4 input nodes and 3 output nodes")
        if len(set(ins) | set(outs)) != 7:
            raise TaskError("input and output nodes must be distinct")
        return ins, outs

    def dataset(self) -> IrisData:
        return self.data if self.data is not None else load_iris(self.path)

    def build(self, net: Network) -> list[Sample]:
        ins, outs = self.nodes(net)
        data = self.dataset()
        dofs = DofMap.of(net)
        loads = scale_features_to_forces(data.features, self.gain, ins, dofs, self.round_grams)
        outputs = tuple((o, "x") for o in outs)
        return [Sample(ld, CrossEntropy(outputs, int(y), self.gamma)) for ld, y in zip(loads, data.labels)]

    mean_loss = staticmethod(_mean_loss)

    def metric(self, U, samples, dofs) -> float:
        return classification_accuracy(U, samples, dofs)


def predict_classes(U, samples, dofs) -> np.ndarray:
    """Argmax of |u| over each sample's output DOFs; ties go to the lowest index."""
    idx = samples[0].loss.dof_indices(dofs)
    mag = np.abs(U[idx, :])
    ties = int(np.sum(np.sum(mag == mag.max(axis=0), axis=0) > 1))
    if ties:
        log.debug("%d sample(s) tied in argmax; lowest class index chosen", ties)
    return np.argmax(mag, axis=0)


def classification_accuracy(U, samples, dofs) -> float:
    pred = predict_classes(U, samples, dofs)
    truth = np.array([s.loss.class_index for s in samples])
    return float(np.mean(pred == truth))


def evaluate_classification(net: Network, samples) -> float:
    """Fraction of samples whose labelled output has the largest |displacement|."""
    samples = list(samples)
    if not samples:
        raise TaskError("empty dataset")
    U, dofs = _forward(net, samples)
    return classification_accuracy(U, samples, dofs)
