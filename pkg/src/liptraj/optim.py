"""Adam optimizer and the one-cycle learning-rate schedule."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(store, state, lr):
    """One Adam update over the unfrozen parameters of ``store``.

    Parameters without a gradient (detached from the loss, or never touched
    this step) are skipped entirely; frozen parameters are never visited, so
    they stay bitwise unchanged no matter what their gradients would be.
    """
    state.step += 1
    t = state.step
    bias1 = 1.0 - state.beta1 ** t
    bias2 = 1.0 - state.beta2 ** t
    for name, param in store.trainable_items():
        g = param.grad
        if g is None:
            continue
        if g.shape != param.data.shape:
            raise ShapeError(
                f"adam: gradient {g.shape} does not match parameter {name!r} {param.data.shape}"
            )
        if name not in state.m:
            state.m[name] = np.zeros_like(param.data)
            state.v[name] = np.zeros_like(param.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        param.data -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(param.data.dtype)


def one_cycle_lr(iteration, peak=0.002, step_size=4000, floor_div=25.0):
    """Triangular one-cycle schedule.

    Rises linearly from ``peak/floor_div`` at iteration 0 to ``peak`` at
    ``step_size``, falls back symmetrically by ``2*step_size``, then holds
    the floor.
    """
    floor = peak / floor_div
    if iteration <= 0:
        return floor
    if iteration <= step_size:
        return floor + (peak - floor) * (iteration / step_size)
    if iteration <= 2 * step_size:
        return peak - (peak - floor) * ((iteration - step_size) / step_size)
    return floor
