"""Statics and the adjoint gradient on the demo lattice.

Hang 10 g on the bottom-right node, ask the bottom-left node to sit
25 mm down, and get dL/dk for every bond from two linear solves.
"""
import numpy as np

from mnn import DofMap, LoadCase, Quadratic, adjoint_load, gradient, solve_statics
from mnn.lattice import select_node
from mnn.statics import G, count_solves, newtons_to_grams
from mnn.tasks import demo_network

net = demo_network()
print(f"{net.n_nodes} nodes, {net.n_bonds} bonds, k in {net.k_bounds} N/m")

dofs = DofMap.of(net)
right, left = select_node(net, "bottom-right"), select_node(net, "bottom-left")
load = LoadCase.point(dofs, right, "y", -0.01 * G)   # 10 g, downward

sol = solve_statics(net, load)
print(f"u_y at the loaded corner: {sol.displacement(right, 'y') * 1e3:+.3f} mm")
print(f"u_y at the other corner:  {sol.displacement(left, 'y') * 1e3:+.3f} mm")

# loss (u_Ly + 0.025)^2, i.e. target u_Ly = -25 mm
loss = Quadratic(left, "y", 0.025)
with count_solves() as n:
    rep = gradient(net, load, loss)
print(f"loss {rep.loss:.3e}, gradient from {n()} solves")

# the adjoint load is a single point force at the output node
f_adj = adjoint_load(loss, sol.u, dofs).F[dofs.dof(left, "y")]
print(f"adjoint load {f_adj:+.4f} N ({newtons_to_grams(abs(f_adj)):.2f} g)")

order = np.argsort(-np.abs(rep.grad))[:5]
print("largest |dL/dk|:")
for b in order:
    i, j = net.edges[b]
    print(f"  bond {b:3d} ({i:2d}-{j:2d})  {rep.grad[b]:+.3e}")
