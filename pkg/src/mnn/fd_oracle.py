"""Finite-difference stiffness gradients, used as an independent check of the
adjoint path and to reproduce its cost comparison."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import GradientReport, gradient
from .lattice import Network
from .losses import loss_value
from .statics import StaticsOperator, ZeroModeError


@dataclass(frozen=True)
class FdConfig:
    scheme: str = "forward"
    step: float = 1e-6
    relative: bool = False  # scale the step by k_b

    def __post_init__(self):
        if self.scheme not in ("forward", "central"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.step > 0:
            raise ValueError("step must be positive")


def _loss_at(net, k, load, spec, bond=None):
    try:
        op = StaticsOperator(net.with_k(k))
    except ZeroModeError as exc:
        where = "" if bond is None else f" after perturbing bond {bond}"
        raise ZeroModeError(f"zero mode{where}: {exc}", exc.report) from None
    return loss_value(spec, op.solve(load).u, op.dofs)


def fd_gradient(net: Network, load, spec, cfg: FdConfig = FdConfig()) -> GradientReport:
    k0 = net.k.copy()
    steps = cfg.step * k0 if cfg.relative else np.full_like(k0, cfg.step)
    if cfg.scheme == "central" and np.any(k0 - steps <= 0):
        raise ValueError("central step would make a spring constant non-positive")
    grad = np.zeros_like(k0)
    solves = 0
    if cfg.scheme == "forward":
        base = _loss_at(net, k0, load, spec)
        solves += 1
    for b in range(net.n_bonds):
        kp = k0.copy()
        kp[b] += steps[b]
        lp = _loss_at(net, kp, load, spec, b)
        if cfg.scheme == "forward":
            grad[b] = (lp - base) / steps[b]
            solves += 1
        else:
            km = k0.copy()
            km[b] -= steps[b]
            lm = _loss_at(net, km, load, spec, b)
            grad[b] = (lp - lm) / (2 * steps[b])
            solves += 2
    return GradientReport(grad, None, None, solves)


def relative_error(approx, exact) -> float:
    """Largest absolute deviation normalised by the largest exact component."""
    approx, exact = np.asarray(approx), np.asarray(exact)
    scale = np.max(np.abs(exact))
    return float(np.max(np.abs(approx - exact)) / scale) if scale > 0 else float(np.max(np.abs(approx)))


@dataclass(frozen=True)
class SweepResult:
    steps: np.ndarray
    errors: np.ndarray

    @property
    def argmin(self) -> float:
        return float(self.steps[np.argmin(self.errors)])

    @property
    def min_error(self) -> float:
        return float(np.min(self.errors))

    def rows(self):
        return list(zip(self.steps.tolist(), self.errors.tolist()))


def step_sweep(net: Network, load, spec, steps, scheme="forward") -> SweepResult:
    """Error of the difference quotient against the adjoint gradient, per step."""
    exact = gradient(net, load, spec).grad
    steps = np.asarray(steps, float)
    errors = np.array([
        relative_error(fd_gradient(net, load, spec, FdConfig(scheme, s)).grad, exact) for s in steps
    ])
    return SweepResult(steps, errors)
