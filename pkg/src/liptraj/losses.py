"""Differentiable losses over masked arrays.

Each loss is its own autodiff primitive with a hand-derived backward rule,
so nothing here depends on general-purpose elementwise graph plumbing.
Reduction is the mean over unmasked elements unless ``reduction="sum"`` is
requested; masked (padding) elements contribute exactly nothing to value or
gradient.
"""

import numpy as np

from . import autodiff as ad
from .errors import ContractError, ShapeError


def _prepare(pred, target, mask):
    pred = pred if isinstance(pred, ad.DiffArray) else ad.constant(pred)
    target = np.asarray(target, dtype=pred.data.dtype)
    if target.shape != pred.data.shape:
        raise ShapeError(f"loss: prediction {pred.data.shape} vs target {target.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != pred.data.shape:
            raise ShapeError(f"loss: mask {mask.shape} vs prediction {pred.data.shape}")
        count = int(mask.sum())
    else:
        count = pred.data.size
    if count == 0:
        raise ContractError("loss over an empty mask")
    return pred, target, mask, count


def _reduce_record(pred, per_element, grad_per_element, mask, count, reduction):
    if mask is not None:
        per_element = np.where(mask, per_element, 0.0)
    total = per_element.sum()
    denom = 1.0 if reduction == "sum" else float(count)
    out = ad.DiffArray(
        np.asarray(total / denom, dtype=pred.data.dtype),
        requires_grad=ad.tape_active() and pred.requires_grad,
    )
    if out.requires_grad:
        def vjp(gs):
            (g,) = gs
            gx = grad_per_element * (g / denom)
            if mask is not None:
                gx = np.where(mask, gx, 0.0)
            return (gx.astype(pred.data.dtype),)

        ad.record((out,), (pred,), vjp)
    return out


def smooth_l1(pred, target, beta=1.0, mask=None, reduction="mean"):
    """Huber-style loss: quadratic within ``beta``, linear outside.

    Regresses toward the median across speakers rather than the mean, which
    is why it is preferred over plain MSE for multi-speaker landmark data.
    """
    if beta <= 0:
        raise ContractError(f"smooth_l1 beta must be positive, got {beta}")
    pred, target, mask, count = _prepare(pred, target, mask)
    d = pred.data - target
    ad_abs = np.abs(d)
    quad = ad_abs < beta
    per_element = np.where(quad, 0.5 * d * d / beta, ad_abs - 0.5 * beta)
    grad = np.where(quad, d / beta, np.sign(d))
    return _reduce_record(pred, per_element, grad, mask, count, reduction)


def mse(pred, target, mask=None, reduction="mean"):
    """Mean squared error over unmasked elements."""
    pred, target, mask, count = _prepare(pred, target, mask)
    d = pred.data - target
    return _reduce_record(pred, d * d, 2.0 * d, mask, count, reduction)


def bce_logits(logits, targets, mask=None, reduction="mean"):
    """Binary cross-entropy on logits, numerically stable at any magnitude."""
    logits, targets, mask, count = _prepare(logits, targets, mask)
    z = logits.data
    per_element = np.maximum(z, 0.0) - z * targets + np.log1p(np.exp(-np.abs(z)))
    sig = np.empty_like(z)
    pos = z >= 0
    sig[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    sig[~pos] = ez / (1.0 + ez)
    return _reduce_record(logits, per_element, sig - targets, mask, count, reduction)
