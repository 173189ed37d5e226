"""Named parameter storage with freeze masks.

Trainable arrays live under stable dotted names (``encoder.conv0.w``,
``gate.b``, ...) so checkpoints can be partially loaded by prefix and whole
submodules frozen for transfer learning. Non-trainable state (batchnorm
running statistics) shares the namespace as buffers.
"""

import numpy as np

from .autodiff import DiffArray
from .errors import ContractError


class ParamStore:
    def __init__(self):
        self._params = {}   # name -> DiffArray
        self._buffers = {}  # name -> np.ndarray
        self._frozen = set()

    # -- construction -------------------------------------------------
    def add(self, name, data):
        if name in self._params or name in self._buffers:
            raise ContractError(f"duplicate parameter name {name!r}")
        arr = DiffArray(np.asarray(data), requires_grad=True, name=name)
        self._params[name] = arr
        return arr

    def add_buffer(self, name, data):
        if name in self._params or name in self._buffers:
            raise ContractError(f"duplicate buffer name {name!r}")
        self._buffers[name] = np.asarray(data)
        return self._buffers[name]

    # -- access -------------------------------------------------------
    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params or name in self._buffers

    def buffer(self, name):
        return self._buffers[name]

    def names(self):
        return list(self._params)

    def buffer_names(self):
        return list(self._buffers)

    def items(self):
        return self._params.items()

    # -- freezing -----------------------------------------------------
    def freeze_prefixes(self, prefixes):
        """Freeze every parameter whose name starts with one of ``prefixes``."""
        for name, arr in self._params.items():
            if any(name.startswith(p) for p in prefixes):
                self._frozen.add(name)
                arr.requires_grad = False

    def unfreeze_all(self):
        for name, arr in self._params.items():
            arr.requires_grad = True
        self._frozen.clear()

    def is_frozen(self, name):
        return name in self._frozen

    @property
    def frozen_names(self):
        return sorted(self._frozen)

    def trainable_items(self):
        return [(n, a) for n, a in self._params.items() if n not in self._frozen]

    # -- gradients ----------------------------------------------------
    def zero_grad(self):
        for arr in self._params.values():
            arr.grad = None

    def grad_norms(self):
        """Global L2 norm and the per-name max-abs entry, for diagnostics."""
        total = 0.0
        worst = ("", 0.0)
        for name, arr in self._params.items():
            if arr.grad is None:
                continue
            total += float((arr.grad.astype(np.float64) ** 2).sum())
            peak = float(np.abs(arr.grad).max()) if arr.grad.size else 0.0
            if peak > worst[1]:
                worst = (name, peak)
        return np.sqrt(total), worst

    # -- snapshots ----------------------------------------------------
    def state_dict(self):
        """All arrays by name; params and buffers, values copied."""
        out = {n: a.data.copy() for n, a in self._params.items()}
        out.update({n: b.copy() for n, b in self._buffers.items()})
        return out

    def snapshot(self, prefixes):
        """Copies of parameter arrays under the given prefixes."""
        return {
            n: a.data.copy()
            for n, a in self._params.items()
            if any(n.startswith(p) for p in prefixes)
        }
