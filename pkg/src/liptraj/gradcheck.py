"""Finite-difference verification of backward passes.

``grad_check`` compares every analytic gradient against central differences.
For the network-scale check the coordinate set can be subsampled per
parameter; the comparison itself is unchanged. The closure under test must
be deterministic across calls (seed its dropout internally, keep batchnorm
running statistics untouched) and should run in float64.
"""

import numpy as np

from .autodiff import Tape, backward


def grad_check(fn, store, epsilon=1e-5, sample=None, rng=None):
    """Max relative error between analytic and numeric gradients.

    ``fn`` evaluates the scalar loss as a function of the parameters in
    ``store`` (a :class:`~liptraj.params.ParamStore`); frozen parameters are
    skipped. ``sample`` limits the checked coordinates per parameter;
    ``rng`` drives the subsampling.
    """
    store.zero_grad()
    with Tape() as tape:
        loss = fn()
    backward(tape, loss)

    if sample is not None and rng is None:
        rng = np.random.default_rng(0)

    def value():
        return float(fn().data)

    worst = 0.0
    worst_at = None
    for name, param in store.trainable_items():
        analytic = param.grad
        if analytic is None:
            analytic = np.zeros_like(param.data)
        flat = param.data.reshape(-1)
        n = flat.size
        if sample is None or sample >= n:
            coords = range(n)
        else:
            coords = rng.choice(n, size=sample, replace=False)
        for idx in coords:
            original = flat[idx]
            flat[idx] = original + epsilon
            f_plus = value()
            flat[idx] = original - epsilon
            f_minus = value()
            flat[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            a = float(analytic.reshape(-1)[idx])
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            if err > worst:
                worst = err
                worst_at = (name, int(idx), a, numeric)
    store.zero_grad()
    grad_check.last_detail = worst_at
    return worst


grad_check.last_detail = None
