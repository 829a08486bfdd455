import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mnn.adjoint import adjoint_load, batch_gradient, batch_solve, gradient
from mnn.lattice import LatticeSpec, build_triangular_lattice, select_node
from mnn.losses import MSE, Quadratic, loss_gradient, loss_value
from mnn.statics import DofMap, LoadCase, count_solves, solve_statics

from oracles import dense_gradient, free_nodes, network_with_bonds, random_lattice, s1_network


def test_s1_closed_form():
    net = s1_network()
    dofs = DofMap.of(net)
    rep = gradient(net, LoadCase.point(dofs, 0, "x", 1.0), Quadratic(0, "x", 0.0))
    assert rep.forward.u == pytest.approx([0.5])
    np.testing.assert_allclose(rep.forward.e, [0.5, -0.5])
    assert rep.adjoint.u == pytest.approx([-0.5])
    np.testing.assert_allclose(rep.adjoint.e, [-0.5, 0.5])
    F, k0, k1, u = 1.0, 1.0, 1.0, 0.5
    np.testing.assert_allclose(rep.grad, -2 * u * F / (k0 + k1) ** 2, atol=1e-12)
    assert rep.solves_used == 2


def test_s1_unequal_springs():
    # dL/dk_b = -2 (u - target) F / (k0 + k1)^2 for either bond
    k0, k1, F, target = 0.7, 1.9, 0.3, 0.05
    net = s1_network(k0, k1)
    dofs = DofMap.of(net)
    rep = gradient(net, LoadCase.point(dofs, 0, "x", F), Quadratic(0, "x", -target))
    u = F / (k0 + k1)
    np.testing.assert_allclose(rep.grad, -2 * (u - target) * F / (k0 + k1) ** 2, atol=1e-14)


def test_zero_load_zero_gradient(rng):
    net, _ = random_lattice(rng)
    dofs = DofMap.of(net)
    rep = gradient(net, LoadCase(np.zeros(dofs.n_dof)), Quadratic(free_nodes(net)[0], "y", 0.01))
    assert not rep.grad.any()


def test_adjoint_load_support_and_sign(rng):
    net, _ = random_lattice(rng, 3, 4)
    dofs = DofMap.of(net)
    a, b = free_nodes(net)[:2]
    spec = MSE(((a, "x", 0.001), (b, "y", -0.002)))
    u = rng.normal(0, 1e-3, dofs.n_dof)
    ld = adjoint_load(spec, u, dofs)
    assert ld.kind == "adjoint"
    assert set(np.flatnonzero(ld.F)) == {dofs.dof(a, "x"), dofs.dof(b, "y")}
    np.testing.assert_array_equal(ld.F, -loss_gradient(spec, u, dofs))


def test_adjoint_load_vanishes_at_optimum():
    net = s1_network()
    dofs = DofMap.of(net)
    assert not adjoint_load(Quadratic(0, "x", -0.5), np.array([0.5]), dofs).F.any()


def test_matches_dense_direct_differentiation(rng):
    for _ in range(5):
        net, _ = random_lattice(rng)
        dofs = DofMap.of(net)
        node = int(rng.choice(free_nodes(net)))
        F = LoadCase.point(dofs, node, "y", -0.05)
        out = free_nodes(net)[-1]
        spec = Quadratic(out, "x", 0.003)
        d = dofs.dof(out, "x")
        ref, _ = dense_gradient(net, F.F, lambda u: np.eye(dofs.n_dof)[d] * 2 * (u[d] + 0.003))
        rep = gradient(net, F, spec)
        np.testing.assert_allclose(rep.grad, ref, rtol=1e-9, atol=1e-12 * np.abs(ref).max())


@pytest.mark.parametrize("m", [5, 20, 60])
def test_two_solves_regardless_of_size(m):
    net = network_with_bonds(m)
    dofs = DofMap.of(net)
    with count_solves() as n:
        rep = gradient(net, LoadCase.point(dofs, free_nodes(net)[0], "y", -0.01),
                       Quadratic(free_nodes(net)[-1], "y", 0.01))
    assert n() == rep.solves_used == 2
    assert rep.grad.shape == (m,)


def _dataset(net, rng, s=3):
    dofs = DofMap.of(net)
    fn = free_nodes(net)
    out = []
    for _ in range(s):
        ld = LoadCase.point(dofs, int(rng.choice(fn)), "y", -rng.uniform(0.01, 0.1))
        out.append((ld, MSE(((fn[0], "x", 1e-3), (fn[-1], "y", -2e-3)))))
    return out


def test_batch_single_equals_gradient(rng):
    net, _ = random_lattice(rng, 3, 3)
    (ld, spec), = _dataset(net, rng, 1)
    np.testing.assert_allclose(batch_gradient(net, [(ld, spec)]).grad, gradient(net, ld, spec).grad, rtol=1e-14)


def test_batch_mean_and_duplicate_invariance(rng):
    net, _ = random_lattice(rng, 3, 4)
    data = _dataset(net, rng, 4)
    rep = batch_gradient(net, data)
    mean = np.mean([gradient(net, ld, sp).grad for ld, sp in data], axis=0)
    np.testing.assert_allclose(rep.grad, mean, rtol=1e-12)
    np.testing.assert_allclose(batch_gradient(net, data + data).grad, rep.grad, rtol=1e-12)
    assert rep.solves_used == 8
    last = solve_statics(net, data[-1][0])
    np.testing.assert_allclose(rep.forward.u, last.u, rtol=1e-13)


def test_batch_empty():
    with pytest.raises(ValueError):
        batch_gradient(s1_network(), [])


def test_mirror_symmetry():
    net = build_triangular_lattice(LatticeSpec(2, 3, default_k=1.0, symmetric=True))
    dofs = DofMap.of(net)
    left, right = select_node(net, "bottom-left"), select_node(net, "bottom-right")
    data = [(LoadCase.point(dofs, left, "y", -0.1), Quadratic(left, "y", 0.01)),
            (LoadCase.point(dofs, right, "y", -0.1), Quadratic(right, "y", 0.01))]
    g = batch_gradient(net, data).grad
    x = net.positions[:, 0]
    cx = x.max() + x.min()
    mid = 0.5 * (net.positions[net.edges[:, 0]] + net.positions[net.edges[:, 1]])
    for b in range(net.n_bonds):
        target = np.array([cx - mid[b, 0], mid[b, 1]])
        m = int(np.argmin(np.linalg.norm(mid - target, axis=1)))
        assert g[b] == pytest.approx(g[m], rel=1e-10, abs=1e-15)


def test_descent_step_does_not_increase_loss(rng):
    net, spec_ = random_lattice(rng, 3, 4)
    dofs = DofMap.of(net)
    out = free_nodes(net)[0]
    ld = LoadCase.point(dofs, free_nodes(net)[-1], "y", -0.05)
    spec = Quadratic(out, "y", 0.5)  # residual u + c is positive
    rep = gradient(net, ld, spec)
    k_ref = spec_.default_k / 0.8
    for b in range(net.n_bonds):
        for alpha in (1e-6, 1e-5):
            k = net.k.copy()
            k[b] -= alpha * k_ref * np.sign(rep.grad[b])
            new = loss_value(spec, solve_statics(net.with_k(k), ld).u, dofs)
            assert new <= rep.loss + 1e-15


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_batch_solve_losses(seed):
    rng = np.random.default_rng(seed)
    net, _ = random_lattice(rng)
    data = _dataset(net, rng, 3)
    res = batch_solve(net, data)
    for s, (ld, spec) in enumerate(data):
        u = solve_statics(net, ld).u
        assert res.losses[s] == pytest.approx(loss_value(spec, u, DofMap.of(net)), rel=1e-10, abs=1e-20)
