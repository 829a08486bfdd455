"""Linear regression: displacement proportional to the applied weight.

Four output DOFs learn slopes (0, 16, 4, 16) mm per N. With clean data
the lattice hits them exactly; a little noise costs a few percent.
"""
import numpy as np

from mnn import RegressionTask, TrainConfig, train
from mnn.tasks import demo_network, evaluate_regression, force_grid
from mnn.trainer import LR_REGRESSION

for sigma in (0.0, 1e-4):
    task = RegressionTask(noise_sigma=sigma)
    trained, rec = train(demo_network(), task, TrainConfig(epochs=5000, lr=LR_REGRESSION))
    ev = evaluate_regression(trained, task, forces=force_grid())
    print(f"noise {sigma:g}: slopes {np.round(ev.slopes * 1e3, 2)} mm/N, "
          f"target {np.array(task.slopes) * 1e3} mm/N, test MSE {rec.loss_test[-1]:.2e}")
