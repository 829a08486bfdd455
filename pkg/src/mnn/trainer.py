"""Adam training of spring constants under box constraints.

Adam runs on bond *widths* ``w = k / width_scale`` (millimetres), since
bond stiffness is proportional to printed width. The learning rates are then
width steps per epoch, so one setting works for any stiffness scale. Each
epoch is one full-batch adjoint gradient over the training split followed
by one projected Adam step.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .adjoint import batch_solve, prepare_batch
from .lattice import Network, prune_bond
from .statics import DofMap, StaticsOperator, ZeroModeError, compatibility_matrix, detect_zero_modes

# learning rates used for the three demonstration tasks
LR_BEHAVIOR = 0.005
LR_REGRESSION = 0.1
LR_CLASSIFICATION = 0.006

MAX_WIDTH_MM = 2.5


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n: int, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        return cls(np.zeros(n), np.zeros(n), 0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, k, grad, bounds=(-np.inf, np.inf)) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam step followed by projection onto ``bounds``."""
    k = np.asarray(k, float)
    g = np.asarray(grad, float)
    if g.shape != k.shape or state.m.shape != k.shape:
        raise ValueError(f"shape mismatch: k {k.shape}, grad {g.shape}, state {state.m.shape}")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * g
    v = state.beta2 * state.v + (1 - state.beta2) * g * g
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)
    k_new = np.clip(k - state.lr * m_hat / (np.sqrt(v_hat) + state.eps), bounds[0], bounds[1])
    return replace(state, m=m, v=v, t=t), k_new


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr: float = LR_CLASSIFICATION
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    k_bounds: tuple[float, float] | None = None  # defaults to the network's
    width_scale: float | None = None  # N/m per mm; default k_max / 2.5 mm
    seed: int = 0
    split: float = 0.7
    snapshot_every: int = 0  # 0 keeps only the initial and final k

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError("epochs must be a positive integer")
        if not 0 < self.split < 1:
            raise ValueError("split must lie in (0, 1)")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")


@dataclass
class TrainRecord:
    loss_train: np.ndarray
    loss_test: np.ndarray
    metric: np.ndarray  # task metric on the test split (train split if unsplit)
    metric_train: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    k_initial: np.ndarray
    k_final: np.ndarray
    snapshots: dict = field(default_factory=dict)  # epoch -> k before that epoch's step
    solves_used: int = 0
    final: dict = field(default_factory=dict)  # evaluation after the last step
    config: TrainConfig | None = None

    @property
    def epochs(self) -> int:
        return len(self.loss_train)

    def rows(self):
        """(epoch, loss_train, loss_test, metric) tuples, epochs counted from 1."""
        return [(e + 1, float(a), float(b), float(c))
                for e, (a, b, c) in enumerate(zip(self.loss_train, self.loss_test, self.metric))]


def split_indices(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle split; a single sample is used for both sides."""
    if n == 1:
        return np.array([0]), np.array([0])
    perm = np.random.default_rng(seed).permutation(n)
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def _forward(op: StaticsOperator, batch):
    U, _ = op.solve_many(batch.F)
    return U


def train(net: Network, task, cfg: TrainConfig = TrainConfig()) -> tuple[Network, TrainRecord]:
    """Train ``net`` on ``task``; deterministic for a given config and task."""
    k_min, k_max = cfg.k_bounds if cfg.k_bounds is not None else net.k_bounds
    scale = cfg.width_scale if cfg.width_scale is not None else k_max / MAX_WIDTH_MM
    w_bounds = (k_min / scale, k_max / scale)

    samples = task.build(net)
    train_idx, test_idx = split_indices(len(samples), cfg.split, cfg.seed)
    tr = [samples[i] for i in train_idx]
    te = [samples[i] for i in test_idx]
    dofs = DofMap.of(net)
    C = compatibility_matrix(net, dofs)
    tr_batch, te_batch = prepare_batch(tr, dofs), prepare_batch(te, dofs)

    w = np.clip(net.k / scale, *w_bounds)
    state = AdamState.fresh(net.n_bonds, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    n = cfg.epochs
    loss_train, loss_test = np.empty(n), np.empty(n)
    metric, metric_train = np.empty(n), np.empty(n)
    snapshots = {}
    solves = 0
    current = net.with_k(w * scale)
    for epoch in range(n):
        try:
            op = StaticsOperator(current, C)
        except ZeroModeError as exc:
            err = ZeroModeError(f"epoch {epoch}: {exc}", exc.report)
            err.epoch = epoch
            raise err from None
        res = batch_solve(current, tr_batch, op)
        solves += res.report.solves_used
        loss_train[epoch] = res.report.loss
        metric_train[epoch] = task.metric(res.U, tr, op.dofs)
        U_te = _forward(op, te_batch)
        loss_test[epoch] = float(np.mean(te_batch.losses(U_te)[0]))
        metric[epoch] = task.metric(U_te, te, op.dofs)
        if epoch == 0 or (cfg.snapshot_every and epoch % cfg.snapshot_every == 0):
            snapshots[epoch] = current.k.copy()

        state, w = adam_step(state, w, res.report.grad * scale, w_bounds)
        current = net.with_k(w * scale)

    op = StaticsOperator(current, C)
    U_tr, U_te = _forward(op, tr_batch), _forward(op, te_batch)
    final = {
        "loss_train": task.mean_loss(U_tr, tr, op.dofs),
        "loss_test": task.mean_loss(U_te, te, op.dofs),
        "metric_train": task.metric(U_tr, tr, op.dofs),
        "metric": task.metric(U_te, te, op.dofs),
    }
    record = TrainRecord(loss_train, loss_test, metric, metric_train, train_idx, test_idx,
                         net.k.copy(), current.k.copy(), snapshots, solves, final, cfg)
    return current, record


def retrain(trained: Network, new_task, cfg: TrainConfig = TrainConfig()) -> tuple[Network, TrainRecord]:
    """Warm-started training: same as :func:`train`, starting from ``trained.k``
    with a fresh optimiser state."""
    return train(trained, new_task, cfg)


def bond_impact(net: Network, samples) -> np.ndarray:
    """|dL/dk| per bond for the mean loss over ``samples``."""
    return np.abs(batch_solve(net, samples).report.grad)


def most_critical_bond(net: Network, samples) -> int:
    """Bond with the largest |dL/dk| whose removal leaves the network rigid.

    Bonds whose removal would create a zero mode are skipped, since the pruned
    network could not be solved at all.
    """
    impact = bond_impact(net, samples)
    for b in np.argsort(-impact, kind="stable"):
        pruned, _ = prune_bond(net, int(b))
        if not detect_zero_modes(pruned).has_zero_modes:
            return int(b)
    raise ZeroModeError("every single-bond removal creates a zero mode")


@dataclass
class PruneResult:
    bond: int
    mapping: np.ndarray  # old bond id -> new id, -1 for the removed bond
    pruned: Network
    metric_before: float
    metric_after_prune: float
    retrained: Network
    record: TrainRecord


def prune_and_retrain(trained: Network, task, cfg: TrainConfig = TrainConfig(),
                      bond: int | None = None) -> PruneResult:
    """Remove one bond (default: :func:`most_critical_bond` on the training split)
    and retrain warm-started. Metrics are on the test split of ``cfg.seed``."""
    samples = task.build(trained)
    train_idx, test_idx = split_indices(len(samples), cfg.split, cfg.seed)
    tr = [samples[i] for i in train_idx]
    te = [samples[i] for i in test_idx]
    if bond is None:
        bond = most_critical_bond(trained, tr)
    pruned, mapping = prune_bond(trained, bond)

    def test_metric(net):
        op = StaticsOperator(net)
        return task.metric(_forward(op, prepare_batch(te, op.dofs)), te, op.dofs)

    before = test_metric(trained)
    after = test_metric(pruned)
    retrained, record = retrain(pruned, task, cfg)
    return PruneResult(int(bond), mapping, pruned, before, after, retrained, record)
