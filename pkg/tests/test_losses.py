import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from mnn.lattice import LatticeSpec, build_triangular_lattice
from mnn.losses import MSE, CrossEntropy, Quadratic, batch_loss, loss_gradient, loss_value, probabilities
from mnn.statics import DofMap

NET = build_triangular_lattice(LatticeSpec(3, 3))
DOFS = DofMap.of(NET)
FREE = [n for n in range(NET.n_nodes) if not NET.fixed[n].any()]


def fd_in_u(spec, u):
    g = np.zeros_like(u)
    for d in range(u.size):
        h = 1e-8 * max(1.0, abs(u[d]))
        up, um = u.copy(), u.copy()
        up[d] += h
        um[d] -= h
        g[d] = (loss_value(spec, up, DOFS) - loss_value(spec, um, DOFS)) / (2 * h)
    return g


def test_quadratic_offset_met():
    spec = Quadratic(FREE[0], "y", 0.025)
    u = np.zeros(DOFS.n_dof)
    u[DOFS.dof(FREE[0], "y")] = -0.025
    assert loss_value(spec, u, DOFS) == 0.0
    assert not loss_gradient(spec, u, DOFS).any()


def test_quadratic_adjoint_example():
    spec = Quadratic(FREE[0], "y", 0.025)
    u = np.zeros(DOFS.n_dof)
    d = DOFS.dof(FREE[0], "y")
    u[d] = -0.00082
    g = loss_gradient(spec, u, DOFS)
    assert g[d] == pytest.approx(0.04836, abs=1e-15)
    assert np.count_nonzero(g) == 1


def test_cross_entropy_equal_outputs_is_ln2():
    spec = CrossEntropy(((FREE[0], "y"), (FREE[1], "y")), label=(1, 0))
    u = np.zeros(DOFS.n_dof)
    u[DOFS.dof(FREE[0], "y")] = -0.001
    u[DOFS.dof(FREE[1], "y")] = 0.001
    assert loss_value(spec, u, DOFS) == pytest.approx(np.log(2), rel=1e-14)


def test_cross_entropy_hand_value():
    spec = CrossEntropy(((FREE[0], "x"), (FREE[1], "x")), label=0, gamma=1.0)
    u = np.zeros(DOFS.n_dof)
    u[DOFS.dof(FREE[0], "x")] = -2.0
    u[DOFS.dof(FREE[1], "x")] = 1.0
    p = probabilities(spec, u, DOFS)
    assert p[0] == pytest.approx(0.7310585786300049, rel=1e-14)
    assert loss_value(spec, u, DOFS) == pytest.approx(0.31326168751822286, rel=1e-14)


def test_cross_entropy_sign_zero():
    spec = CrossEntropy(((FREE[0], "y"), (FREE[1], "y")), label=0)
    g = loss_gradient(spec, np.zeros(DOFS.n_dof), DOFS)
    assert not g.any()


def test_mse_targets_met():
    t = ((FREE[0], "x", 0.001), (FREE[1], "y", -0.002))
    spec = MSE(t)
    u = np.zeros(DOFS.n_dof)
    for n, a, v in t:
        u[DOFS.dof(n, a)] = v
    assert loss_value(spec, u, DOFS) == 0.0
    assert not loss_gradient(spec, u, DOFS).any()


def test_missing_dof():
    spec = Quadratic(NET.n_nodes - 1, "y")  # top-right corner is pinned
    with pytest.raises(KeyError):
        loss_value(spec, np.zeros(DOFS.n_dof), DOFS)
    with pytest.raises(ValueError):
        loss_value(Quadratic(FREE[0]), np.zeros(3), DOFS)


@pytest.mark.parametrize("label", [2, (0, 1, 0), (0.5, 0.5), (1, 1)])
def test_cross_entropy_label_validation(label):
    with pytest.raises(ValueError):
        CrossEntropy(((FREE[0], "y"), (FREE[1], "y")), label=label)


def test_gamma_positive():
    with pytest.raises(ValueError):
        CrossEntropy(((FREE[0], "y"), (FREE[1], "y")), gamma=0.0)


axes = st.sampled_from(["x", "y"])
nodes = st.sampled_from(FREE)


@st.composite
def specs(draw):
    kind = draw(st.sampled_from(["quadratic", "mse", "ce"]))
    if kind == "quadratic":
        return Quadratic(draw(nodes), draw(axes), draw(st.floats(-0.05, 0.05)))
    outs = draw(st.lists(st.tuples(nodes, axes), min_size=2, max_size=4, unique=True))
    if kind == "mse":
        return MSE(tuple((n, a, draw(st.floats(-0.01, 0.01))) for n, a in outs))
    return CrossEntropy(tuple(outs), draw(st.integers(0, len(outs) - 1)), draw(st.floats(10.0, 2000.0)))


@settings(max_examples=100, deadline=None)
@given(specs(), st.integers(0, 2**32 - 1))
def test_gradient_matches_fd_in_u(spec, seed):
    u = np.random.default_rng(seed).uniform(-0.005, 0.005, DOFS.n_dof)
    if isinstance(spec, CrossEntropy):
        assume(np.min(np.abs(u[spec.dof_indices(DOFS)])) > 1e-5)  # away from the |u| kink
    g = loss_gradient(spec, u, DOFS)
    ref = fd_in_u(spec, u)
    scale = max(np.abs(ref).max(), 1e-12)
    assert np.abs(g - ref).max() <= 1e-6 * scale


@settings(max_examples=100, deadline=None)
@given(specs(), st.integers(0, 2**32 - 1))
def test_gradient_support(spec, seed):
    u = np.random.default_rng(seed).normal(0, 0.01, DOFS.n_dof)
    g = loss_gradient(spec, u, DOFS)
    assert set(np.flatnonzero(g)) <= set(spec.dof_indices(DOFS).tolist())
    assert loss_value(spec, u, DOFS) >= 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=2, max_size=5), st.floats(1.0, 1e4))
def test_softmax_normalisation(vals, gamma):
    outs = tuple((n, "x") for n in FREE[:len(vals)])
    assume(len(outs) == len(vals))
    spec = CrossEntropy(outs, 0, gamma)
    u = np.zeros(DOFS.n_dof)
    for (n, a), v in zip(outs, vals):
        u[DOFS.dof(n, a)] = v * 1e-3
    assert probabilities(spec, u, DOFS).sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 0.003), st.floats(1e-5, 1e-3))
def test_cross_entropy_monotone_in_labelled_logit(base, bump):
    outs = ((FREE[0], "y"), (FREE[1], "y"), (FREE[2], "x"))
    spec = CrossEntropy(outs, 0)
    u = np.zeros(DOFS.n_dof)
    u[DOFS.dof(FREE[1], "y")] = 0.001
    u[DOFS.dof(FREE[2], "x")] = -0.0005
    u[DOFS.dof(FREE[0], "y")] = -base
    v1 = loss_value(spec, u, DOFS)
    u[DOFS.dof(FREE[0], "y")] = -(base + bump)
    assert loss_value(spec, u, DOFS) < v1


def test_batch_loss_matches_per_sample(rng):
    outs = ((FREE[0], "x"), (FREE[1], "x"), (FREE[2], "x"))
    U = rng.normal(0, 1e-3, (DOFS.n_dof, 6))
    for group in (
        [CrossEntropy(outs, c % 3) for c in range(6)],
        [MSE(tuple((n, a, 1e-3 * c) for n, a in outs)) for c in range(6)],
        [Quadratic(FREE[c % 3], "y", 0.01) for c in range(6)],
    ):
        vals, grads = batch_loss(group, U, DOFS)
        for s, spec in enumerate(group):
            assert vals[s] == pytest.approx(loss_value(spec, U[:, s], DOFS), rel=1e-13)
            np.testing.assert_allclose(grads[:, s], loss_gradient(spec, U[:, s], DOFS), rtol=1e-13, atol=0)
