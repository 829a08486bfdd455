"""Iris classification, task switching and pruning.

Features become weights on four bottom-row nodes, and the class is the
output node that moves most. The trained lattice is then retrained for
regression and back, and finally loses its most important bond.
"""
from mnn import IrisTask, RegressionTask, TrainConfig, retrain, train
from mnn.tasks import demo_network, evaluate_regression, force_grid
from mnn.trainer import LR_CLASSIFICATION, LR_REGRESSION, prune_and_retrain

iris = IrisTask()
cfg = TrainConfig(epochs=100, lr=LR_CLASSIFICATION, seed=2)
net, rec = train(demo_network(), iris, cfg)
print(f"iris test accuracy {rec.metric[-1]:.3f}")

reg = RegressionTask()
net_r, _ = retrain(net, reg, TrainConfig(epochs=5000, lr=LR_REGRESSION))
print("regression slopes (mm/N):", (evaluate_regression(net_r, reg, forces=force_grid()).slopes * 1e3).round(2))
net_c, rec_c = retrain(net_r, iris, cfg)
print(f"back to iris: test accuracy {rec_c.metric[-1]:.3f}")

# which bond matters most depends on how far training went: after 100 epochs
# it is a bottom-row bond beside the inputs, and 1000 retraining epochs recover most of
# the loss; a longer initial run can pick a bond the lattice cannot route around
res = prune_and_retrain(net, iris, TrainConfig(epochs=1000, lr=LR_CLASSIFICATION, seed=2))
i, j = net.edges[res.bond]
print(f"pruned bond {res.bond} ({i}-{j}): accuracy {res.metric_before:.3f} -> "
      f"{res.metric_after_prune:.3f} -> {res.record.metric[-1]:.3f} after retraining")
