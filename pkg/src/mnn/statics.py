"""Linear statics of spring networks.

Fixed degrees of freedom are eliminated by deleting rows and columns, so the
reduced stiffness ``D = C^T K C`` is symmetric positive definite whenever the
supported network has no zero modes.
"""
from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .lattice import Network, axis_index

G = 9.8  # m/s^2
ZERO_MODE_RTOL = 1e-9


class ZeroModeError(RuntimeError):
    """Stiffness matrix is singular or indefinite on the free DOFs."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class _Counter:
    def __init__(self):
        self._lock = threading.Lock()
        self._n = 0

    def add(self, n: int):
        with self._lock:
            self._n += int(n)

    @property
    def value(self) -> int:
        return self._n

    def reset(self):
        with self._lock:
            self._n = 0


_solves = _Counter()


def solve_count() -> int:
    """Total number of linear solves (one per load vector) in this process."""
    return _solves.value


def reset_solve_count():
    _solves.reset()


@contextmanager
def count_solves():
    """Context manager yielding a callable that returns the solves made inside it."""
    start = _solves.value
    yield lambda: _solves.value - start


def grams_to_newtons(grams: float) -> float:
    return grams * 1e-3 * G


def newtons_to_grams(force: float) -> float:
    return force / G * 1e3


class DofMap:
    """Maps (node, axis) pairs to free-DOF indices.

    ``index[node, axis]`` is the free-DOF index or -1 for a constrained DOF.
    """

    def __init__(self, fixed: np.ndarray):
        fixed = np.asarray(fixed, bool)
        free = ~fixed.reshape(-1)
        index = np.full(free.shape, -1, dtype=np.int64)
        index[free] = np.arange(free.sum())
        self.index = index.reshape(fixed.shape)
        self.index.setflags(write=False)
        self.n_dof = int(free.sum())

    @classmethod
    def of(cls, net: Network) -> "DofMap":
        return cls(net.fixed)

    @classmethod
    def unconstrained(cls, net: Network) -> "DofMap":
        return cls(np.zeros_like(net.fixed))

    def __len__(self):
        return self.n_dof

    def dof(self, node: int, axis) -> int:
        a = axis_index(axis)
        if not 0 <= node < self.index.shape[0]:
            raise KeyError(f"node {node} does not exist")
        d = int(self.index[node, a])
        if d < 0:
            raise KeyError(f"DOF ({node}, {'xy'[a]}) is constrained")
        return d

    def to_nodal(self, u: np.ndarray) -> np.ndarray:
        """Scatter a free-DOF vector into an (n, 2) nodal array (zeros on supports)."""
        out = np.zeros(self.index.shape, dtype=float)
        mask = self.index >= 0
        out[mask] = np.asarray(u)[self.index[mask]]
        return out

    def from_nodal(self, values: np.ndarray) -> np.ndarray:
        """Gather the free entries of an (n, 2) nodal array."""
        values = np.asarray(values, float).reshape(self.index.shape)
        return values[self.index >= 0]  # free indices are assigned in row-major order


@dataclass(frozen=True)
class LoadCase:
    """Force vector over the free DOFs, newtons."""

    F: np.ndarray
    kind: str = "external"

    @classmethod
    def point(cls, dofs: DofMap, node: int, axis, value: float, kind="external") -> "LoadCase":
        F = np.zeros(dofs.n_dof)
        F[dofs.dof(node, axis)] = value
        return cls(F, kind)

    @classmethod
    def nodal(cls, dofs: DofMap, forces: dict, kind="external") -> "LoadCase":
        """Build from ``{(node, axis): value}``; entries on constrained DOFs are rejected."""
        F = np.zeros(dofs.n_dof)
        for (node, axis), value in forces.items():
            F[dofs.dof(node, axis)] += value
        return cls(F, kind)


@dataclass(frozen=True)
class Solution:
    u: np.ndarray  # free-DOF displacements, m
    e: np.ndarray  # bond elongations, m
    dofs: DofMap

    def displacement(self, node: int, axis) -> float:
        a = axis_index(axis)
        d = self.dofs.index[node, a]
        return 0.0 if d < 0 else float(self.u[d])

    @property
    def nodal(self) -> np.ndarray:
        return self.dofs.to_nodal(self.u)


def compatibility_matrix(net: Network, dofs: DofMap | None = None) -> sp.csr_matrix:
    """Sparse (m x n_dof) map from displacements to bond elongations.

    Row ``b`` for bond (i, j) holds ``+t`` on node j and ``-t`` on node i,
    with ``t`` the unit vector from i to j; positive elongation is stretch.
    """
    dofs = DofMap.of(net) if dofs is None else dofs
    i, j = net.edges[:, 0], net.edges[:, 1]
    d = net.positions[j] - net.positions[i]
    length = np.linalg.norm(d, axis=1)
    if np.any(length <= 0):
        bad = int(np.flatnonzero(length <= 0)[0])
        raise ValueError(f"degenerate bond {bad}: zero length")
    t = d / length[:, None]
    m = net.n_bonds
    rows = np.repeat(np.arange(m), 4)
    cols = np.stack([dofs.index[j, 0], dofs.index[j, 1], dofs.index[i, 0], dofs.index[i, 1]], axis=1).ravel()
    vals = np.concatenate([t, -t], axis=1).ravel()
    keep = cols >= 0
    return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(m, dofs.n_dof))


def assemble_stiffness(C: sp.spmatrix, k) -> sp.csr_matrix:
    """D = C^T diag(k) C, symmetrised."""
    k = np.asarray(k, float).reshape(-1)
    if k.shape[0] != C.shape[0]:
        raise ValueError(f"C has {C.shape[0]} rows but k has {k.shape[0]} entries")
    D = (C.T @ sp.diags(k) @ C).tocsr()
    return ((D + D.T) * 0.5).tocsr()


@dataclass(frozen=True)
class ZeroModeReport:
    has_zero_modes: bool
    count: int
    min_eigenvalue: float
    tolerance: float
    null_vectors: np.ndarray  # (n_dof, count), free-DOF coordinates

    @property
    def null_vector(self):
        return self.null_vectors[:, 0] if self.count else None


def detect_zero_modes(net: Network) -> ZeroModeReport:
    """Eigenvalue test of the reduced stiffness against ``1e-9 * max(k)``."""
    dofs = DofMap.of(net)
    tol = ZERO_MODE_RTOL * (float(np.max(np.abs(net.k))) if net.n_bonds else 1.0)
    if dofs.n_dof == 0:
        return ZeroModeReport(False, 0, np.inf, tol, np.zeros((0, 0)))
    D = assemble_stiffness(compatibility_matrix(net, dofs), net.k).toarray()
    w, V = np.linalg.eigh(D)
    low = w < tol
    return ZeroModeReport(bool(low.any()), int(low.sum()), float(w[0]), tol, V[:, low])


class StaticsOperator:
    """Factorised reduced stiffness of one network.

    The Cholesky factor is immutable after construction, so one operator can
    serve many load cases, including from several threads. Every solved load
    vector increments the process-wide solve counter by one.
    """

    def __init__(self, net: Network, C: sp.spmatrix | None = None):
        # C depends only on geometry and supports; callers that change k alone may pass it in
        self.net = net
        self.dofs = DofMap.of(net)
        self.C = compatibility_matrix(net, self.dofs) if C is None else C
        self.D = assemble_stiffness(self.C, net.k)
        tol = ZERO_MODE_RTOL * (float(np.max(np.abs(net.k))) if net.n_bonds else 1.0)
        if self.dofs.n_dof == 0:
            self._chol = None
            return
        try:
            L = scipy.linalg.cholesky(self.D.toarray(), lower=True, check_finite=True)
        except np.linalg.LinAlgError:
            report = detect_zero_modes(net)
            raise ZeroModeError(f"stiffness matrix is not positive definite "
                                f"({report.count} zero mode(s))", report) from None
        pivots = np.diag(L) ** 2
        if pivots.min() < tol:
            report = detect_zero_modes(net)
            raise ZeroModeError(f"stiffness matrix is singular: pivot {pivots.min():.3e} "
                                f"below {tol:.3e} ({report.count} zero mode(s))", report)
        self._chol = (L, True)

    @property
    def n_dof(self):
        return self.dofs.n_dof

    def solve_many(self, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Solve for a (n_dof, s) block of loads. Returns (U, E) with one column per load."""
        F = np.asarray(F, float)
        if F.ndim != 2 or F.shape[0] != self.n_dof:
            raise ValueError(f"load block must be ({self.n_dof}, s), got {F.shape}")
        U = scipy.linalg.cho_solve(self._chol, F) if self._chol is not None else np.zeros_like(F)
        _solves.add(F.shape[1])
        return U, self.C @ U

    def solve(self, load) -> Solution:
        F = load.F if isinstance(load, LoadCase) else np.asarray(load, float)
        if F.shape != (self.n_dof,):
            raise ValueError(f"load has shape {F.shape}, expected ({self.n_dof},)")
        U, E = self.solve_many(F[:, None])
        return Solution(U[:, 0], E[:, 0], self.dofs)


def solve_statics(net: Network, load) -> Solution:
    """Solve D u = F on the free DOFs and return displacements and elongations."""
    return StaticsOperator(net).solve(load)
