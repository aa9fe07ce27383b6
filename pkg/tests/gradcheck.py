"""Central-difference gradient oracle shared by unit and acceptance tests."""

import numpy as np


def max_relative_deviation(model, images, labels, sep_weight, step=1e-5, floor=1e-6):
    """Worst relative gap between analytic gradients and central differences.

    ``floor`` guards the denominator so finite-difference noise on
    zero-gradient entries is measured against a fixed scale instead of
    itself.
    """
    grads, _, _ = model.grad_total_loss(images, labels, sep_weight)

    def objective():
        return model.total_loss(images, labels, sep_weight)[0]

    worst = 0.0
    for name, arr in model.params.items():
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            upper = objective()
            arr[idx] = orig - step
            lower = objective()
            arr[idx] = orig
            fd = (upper - lower) / (2.0 * step)
            analytic = grads[name][idx]
            denom = max(abs(fd), abs(analytic), floor)
            worst = max(worst, abs(fd - analytic) / denom)
    return worst
