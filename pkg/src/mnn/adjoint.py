"""Exact stiffness gradients from one forward and one adjoint solve.

For ``D u = F`` and a loss ``L(u)``, the adjoint field solves
``D u_adj = -(dL/du)^T`` on the same network and

    dL/dk_b = e_adj[b] * e[b]

where ``e = C u`` and ``e_adj = C u_adj`` are the bond elongations of the
two load cases. Both solves reuse a single Cholesky factorisation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Network
from .losses import LossBatch, loss_gradient, loss_value
from .statics import LoadCase, Solution, StaticsOperator, DofMap


@dataclass(frozen=True)
class GradientReport:
    grad: np.ndarray  # dL/dk per bond
    forward: Solution | None
    adjoint: Solution | None
    solves_used: int
    loss: float = np.nan


def adjoint_load(spec, u, dofs: DofMap) -> LoadCase:
    """Load for the adjoint problem: the negated loss gradient."""
    return LoadCase(-loss_gradient(spec, u, dofs), kind="adjoint")


def gradient(net: Network, load: LoadCase, spec, operator: StaticsOperator | None = None) -> GradientReport:
    op = StaticsOperator(net) if operator is None else operator
    fwd = op.solve(load)
    adj = op.solve(adjoint_load(spec, fwd.u, op.dofs))
    return GradientReport(adj.e * fwd.e, fwd, adj, 2, loss_value(spec, fwd.u, op.dofs))


@dataclass(frozen=True)
class BatchResult:
    """Per-sample forward fields of a batch (columns) with the mean-gradient report."""

    report: GradientReport
    U: np.ndarray
    losses: np.ndarray


@dataclass(frozen=True)
class PreparedBatch:
    """Stacked loads (n_dof, s) and the matching :class:`LossBatch`.

    Preparing once lets repeated solves on the same topology skip restacking.
    """

    F: np.ndarray
    losses: LossBatch

    def __len__(self):
        return self.F.shape[1]


def prepare_batch(dataset, dofs: DofMap) -> PreparedBatch:
    dataset = list(dataset)
    if not dataset:
        raise ValueError("empty dataset")
    F = np.column_stack([ld.F for ld, _ in dataset])
    return PreparedBatch(F, LossBatch([spec for _, spec in dataset], dofs))


def batch_solve(net: Network, dataset, operator: StaticsOperator | None = None) -> BatchResult:
    """Mean loss gradient over ``(LoadCase, loss)`` pairs (or a :class:`PreparedBatch`).

    Forward loads are solved as one block, then the adjoint loads as a second
    block. Per-sample gradients are summed in dataset order.
    """
    op = StaticsOperator(net) if operator is None else operator
    dofs = op.dofs
    batch = dataset if isinstance(dataset, PreparedBatch) else prepare_batch(dataset, dofs)
    U, E = op.solve_many(batch.F)
    losses, dLdU = batch.losses(U)
    Ua, Ea = op.solve_many(-dLdU)
    G = Ea * E
    grad = np.zeros(net.n_bonds)
    for s in range(G.shape[1]):
        grad += G[:, s]
    grad /= len(batch)
    report = GradientReport(
        grad,
        Solution(U[:, -1], E[:, -1], dofs),
        Solution(Ua[:, -1], Ea[:, -1], dofs),
        2 * len(batch),
        float(np.mean(losses)),
    )
    return BatchResult(report, U, losses)


def batch_gradient(net: Network, dataset, operator: StaticsOperator | None = None) -> GradientReport:
    return batch_solve(net, dataset, operator).report
