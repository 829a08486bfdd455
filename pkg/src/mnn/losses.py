"""Loss functions of nodal displacements with analytic gradients.

All functions take ``u`` as a free-DOF displacement vector together with the
:class:`~mnn.statics.DofMap` that indexes it.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp, softmax

from .lattice import axis_index
from .statics import DofMap

DEFAULT_GAMMA = 1000.0  # 1/m, logits in millimetres


@dataclass(frozen=True)
class Quadratic:
    """``(u_o + offset)**2`` for a single output DOF."""

    node: int
    axis: str = "y"
    offset: float = 0.0

    def dof_indices(self, dofs: DofMap) -> np.ndarray:
        return np.array([dofs.dof(self.node, self.axis)])


@dataclass(frozen=True)
class MSE:
    """Mean squared error over ``(node, axis, target)`` triples."""

    targets: tuple

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple((int(n), a, float(t)) for n, a, t in self.targets))
        if not self.targets:
            raise ValueError("MSE needs at least one target")

    def dof_indices(self, dofs: DofMap) -> np.ndarray:
        return np.array([dofs.dof(n, a) for n, a, _ in self.targets])

    @cached_property
    def values(self) -> np.ndarray:
        v = np.array([t for _, _, t in self.targets])
        v.setflags(write=False)
        return v


@dataclass(frozen=True)
class CrossEntropy:
    """Cross-entropy of ``softmax(gamma * |u_c|)`` against a one-hot label.

    ``label`` may be a class index or a one-hot sequence.
    """

    outputs: tuple
    label: object = 0
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        outputs = tuple((int(n), a) for n, a in self.outputs)
        object.__setattr__(self, "outputs", outputs)
        y = np.asarray(self.label, dtype=float)
        if y.ndim == 0:
            c = int(self.label)
            if not 0 <= c < len(outputs):
                raise ValueError(f"label {c} out of range for {len(outputs)} outputs")
            y = np.eye(len(outputs))[c]
        if y.shape != (len(outputs),) or np.any((y != 0) & (y != 1)) or y.sum() != 1:
            raise ValueError("label must be one-hot over the outputs")
        object.__setattr__(self, "label", tuple(y))
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def dof_indices(self, dofs: DofMap) -> np.ndarray:
        return np.array([dofs.dof(n, a) for n, a in self.outputs])

    @property
    def y(self) -> np.ndarray:
        return np.array(self.label)

    @property
    def class_index(self) -> int:
        return int(np.argmax(self.label))


def _outputs(spec, u, dofs):
    u = np.asarray(u, float)
    if u.shape != (dofs.n_dof,):
        raise ValueError(f"u has shape {u.shape}, expected ({dofs.n_dof},)")
    idx = spec.dof_indices(dofs)
    return idx, u[idx]


def probabilities(spec: CrossEntropy, u, dofs: DofMap) -> np.ndarray:
    _, uo = _outputs(spec, u, dofs)
    return softmax(spec.gamma * np.abs(uo))


def loss_value(spec, u, dofs: DofMap) -> float:
    idx, uo = _outputs(spec, u, dofs)
    if isinstance(spec, Quadratic):
        return float((uo[0] + spec.offset) ** 2)
    if isinstance(spec, MSE):
        return float(np.mean((uo - spec.values) ** 2))
    if isinstance(spec, CrossEntropy):
        z = spec.gamma * np.abs(uo)
        return float(-(spec.y @ (z - logsumexp(z))))
    raise TypeError(f"unknown loss {type(spec).__name__}")


def loss_gradient(spec, u, dofs: DofMap) -> np.ndarray:
    """dL/du over the free DOFs; nonzero only on the loss's output DOFs."""
    idx, uo = _outputs(spec, u, dofs)
    if isinstance(spec, Quadratic):
        g = 2.0 * (uo + spec.offset)
    elif isinstance(spec, MSE):
        g = 2.0 / len(uo) * (uo - spec.values)
    elif isinstance(spec, CrossEntropy):
        p = softmax(spec.gamma * np.abs(uo))
        g = spec.gamma * (p - spec.y) * np.sign(uo)  # sign(0) = 0
    else:
        raise TypeError(f"unknown loss {type(spec).__name__}")
    out = np.zeros(dofs.n_dof)
    np.add.at(out, idx, g)
    return out


class LossBatch:
    """Loss specs for a block of samples, vectorised when they share type and outputs.

    Calling the batch on displacements ``U`` (one column per spec) returns
    ``(values (s,), gradients (n_dof, s))``.
    """

    def __init__(self, specs, dofs: DofMap):
        self.specs = list(specs)
        if not self.specs:
            raise ValueError("empty batch")
        self.dofs = dofs
        first = self.specs[0]
        kind = type(first)
        self.vectorised = False
        if kind is MSE:
            key = [(n, a) for n, a, _ in first.targets]
            if all(type(s) is MSE and [(n, a) for n, a, _ in s.targets] == key for s in self.specs):
                self.target = np.column_stack([s.values for s in self.specs])
                self.vectorised = True
        elif kind is CrossEntropy:
            if all(type(s) is CrossEntropy and s.outputs == first.outputs and s.gamma == first.gamma
                   for s in self.specs):
                self.Y = np.column_stack([s.y for s in self.specs])
                self.gamma = first.gamma
                self.vectorised = True
        if self.vectorised:
            self.kind = kind
            self.idx = first.dof_indices(dofs)

    def __len__(self):
        return len(self.specs)

    def __call__(self, U) -> tuple[np.ndarray, np.ndarray]:
        U = np.asarray(U, float)
        dofs = self.dofs
        if not self.vectorised:
            values = np.array([loss_value(s, U[:, i], dofs) for i, s in enumerate(self.specs)])
            grads = np.column_stack([loss_gradient(s, U[:, i], dofs) for i, s in enumerate(self.specs)])
            return values, grads
        uo = U[self.idx, :]
        if self.kind is MSE:
            r = uo - self.target
            values = np.mean(r * r, axis=0)
            g = 2.0 / len(self.idx) * r
        else:
            z = self.gamma * np.abs(uo)
            lse = logsumexp(z, axis=0)
            values = -np.sum(self.Y * (z - lse), axis=0)
            g = self.gamma * (np.exp(z - lse) - self.Y) * np.sign(uo)
        grads = np.zeros((dofs.n_dof, U.shape[1]))
        np.add.at(grads, self.idx, g)
        return values, grads


def batch_loss(specs, U, dofs: DofMap) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample values and gradients; see :class:`LossBatch`."""
    return LossBatch(specs, dofs)(U)
