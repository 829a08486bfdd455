import numpy as np
import pytest

from mnn.adjoint import gradient
from mnn.fd_oracle import FdConfig, fd_gradient, relative_error, step_sweep
from mnn.lattice import LatticeSpec, build_triangular_lattice, from_arrays, select_node
from mnn.losses import Quadratic
from mnn.statics import DofMap, LoadCase, ZeroModeError, count_solves

from oracles import free_nodes, network_with_bonds, random_lattice, s1_network

STEPS = np.logspace(-10, -2, 17)


def problem(net):
    dofs = DofMap.of(net)
    return (LoadCase.point(dofs, free_nodes(net)[0], "y", -1.0),
            Quadratic(select_node(net, "bottom-left"), "y", 0.5))


def unit_3x3(seed):
    rng = np.random.default_rng(seed)
    net = build_triangular_lattice(LatticeSpec(3, 3, spacing=1.0, default_k=0.8))
    return net.with_k(rng.uniform(0.6, 1.0, net.n_bonds))


def test_s1_forward():
    net = s1_network()
    rep = fd_gradient(net, LoadCase.point(DofMap.of(net), 0, "x", 1.0), Quadratic(0, "x"), FdConfig("forward", 1e-6))
    np.testing.assert_allclose(rep.grad, -0.25, atol=1e-6)


def test_solve_counts():
    net = network_with_bonds(30)
    load, spec = problem(net)
    with count_solves() as n:
        rep = fd_gradient(net, load, spec, FdConfig("forward"))
    assert rep.solves_used == n() == 31
    with count_solves() as n:
        rep = fd_gradient(net, load, spec, FdConfig("central"))
    assert rep.solves_used == n() == 60


def test_zero_mode_names_bond():
    # node 3 hangs on a single soft bond; the central step pushes it under the zero-mode tolerance
    net = from_arrays([(0, 0), (1, 0), (0, 1), (1, 1)], [(0, 1), (2, 3)], [1.0, 2e-9],
                      [(True, True), (False, True), (True, True), (False, True)])
    load = LoadCase.point(DofMap.of(net), 1, "x", 1.0)
    with pytest.raises(ZeroModeError, match="bond 1"):
        fd_gradient(net, load, Quadratic(1, "x"), FdConfig("central", 1.5e-9))


def test_config_validation():
    with pytest.raises(ValueError):
        FdConfig("backward")
    with pytest.raises(ValueError):
        FdConfig(step=0.0)
    net = s1_network(1e-7, 1.0)
    with pytest.raises(ValueError):
        fd_gradient(net, LoadCase.point(DofMap.of(net), 0, "x", 1.0), Quadratic(0, "x"), FdConfig("central", 1e-6))


def test_relative_error_definition():
    assert relative_error([1.0, 2.1], [1.0, 2.0]) == pytest.approx(0.05)
    assert relative_error([0.0, 0.0], [0.0, 0.0]) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_sweep_shape(seed):
    net = unit_3x3(seed)
    load, spec = problem(net)
    res = step_sweep(net, load, spec, STEPS)
    i = int(np.argmin(res.errors))
    assert 0 < i < len(STEPS) - 1
    assert res.min_error <= 1e-5
    assert res.errors[0] >= 10 * res.min_error and res.errors[-1] >= 10 * res.min_error
    assert abs(np.log10(res.argmin) + 6) <= 2  # within two decades of 1e-6 for k of order 1
    central = step_sweep(net, load, spec, [res.argmin], "central")
    assert central.min_error <= res.min_error


@pytest.mark.parametrize("seed", range(5))
def test_central_agrees_with_adjoint(seed):
    net = unit_3x3(seed)
    load, spec = problem(net)
    exact = gradient(net, load, spec).grad
    fd = fd_gradient(net, load, spec, FdConfig("central", 1e-6)).grad
    assert relative_error(fd, exact) <= 1e-6


def test_relative_step_scales_with_k(rng):
    net, _ = random_lattice(rng, 3, 3, default_k=50.0)
    load, spec = problem(net)
    exact = gradient(net, load, spec).grad
    fd = fd_gradient(net, load, spec, FdConfig("central", 1e-6, relative=True)).grad
    assert relative_error(fd, exact) <= 1e-6
