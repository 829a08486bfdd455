"""Check the adjoint gradient against finite differences.

Forward differences need one extra solve per bond, so the cost grows
with the network while the adjoint stays at two. The step sweep shows
truncation error on the right and round-off on the left.
"""
import numpy as np

from mnn import DofMap, FdConfig, LoadCase, Quadratic, fd_gradient, gradient, step_sweep
from mnn.fd_oracle import relative_error
from mnn.lattice import select_node
from mnn.statics import G, count_solves
from mnn.tasks import demo_network

net = demo_network()
net = net.with_k(np.random.default_rng(0).uniform(*net.k_bounds, net.n_bonds))
dofs = DofMap.of(net)
load = LoadCase.point(dofs, select_node(net, "bottom-right"), "y", -0.01 * G)
loss = Quadratic(select_node(net, "bottom-left"), "y", 0.025)

with count_solves() as n:
    exact = gradient(net, load, loss).grad
    n_adj = n()
with count_solves() as n:
    fd = fd_gradient(net, load, loss, FdConfig("central", 1e-6 * net.k.mean())).grad
    n_fd = n()
print(f"adjoint: {n_adj} solves; central FD: {n_fd} solves")
print(f"relative deviation {relative_error(fd, exact):.2e}")

steps = np.logspace(-6, 1, 15)   # absolute steps in N/m
res = step_sweep(net, load, loss, steps)
print("\n  delta_k   max rel error")
for h, e in res.rows():
    print(f"  {h:8.1e}  {e:.2e}")
print(f"best step {res.argmin:.1e} N/m")
