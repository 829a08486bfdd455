"""Teach the symmetric lattice to lean one way.

A 5 g weight on the bottom-centre node pulls both bottom corners down by the
same amount. Training breaks that symmetry so the chosen corner drops
further.
"""
from mnn import BehaviorTask, TrainConfig, train
from mnn.tasks import demo_network, evaluate_behavior
from mnn.trainer import LR_BEHAVIOR

net = demo_network()
for label in ("L", "R"):
    task = BehaviorTask(label=label)
    uL, uR, _ = evaluate_behavior(net, task)
    trained, rec = train(net, task, TrainConfig(epochs=2000, lr=LR_BEHAVIOR))
    tL, tR, _ = evaluate_behavior(trained, task)
    print(f"label {label}: before uL {uL * 1e3:+.3f} uR {uR * 1e3:+.3f} mm, "
          f"after uL {tL * 1e3:+.3f} uR {tR * 1e3:+.3f} mm, loss {rec.loss_train[-1]:.3f}")
    lo, hi = net.k_bounds
    at_bounds = ((trained.k <= lo) | (trained.k >= hi)).sum()
    print(f"  {at_bounds} of {net.n_bonds} springs ended on a bound")
