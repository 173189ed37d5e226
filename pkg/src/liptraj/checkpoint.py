"""LTCK1 checkpoint format: named float32 arrays plus config and metadata.

Layout (little-endian)::

    magic b"LTCK1" | u32 version
    u32 len + config JSON | u32 len + metadata JSON
    u32 n_entries, then per entry:
      u16 len + name | u8 kind (0 param, 1 buffer)
      u8 ndim + ndim * u32 dims | raw <f4 data

Save/load round-trips bitwise for float32 stores. ``load_partial`` pulls a
name-prefix subset into an existing model for transfer learning and reports
what was loaded versus left freshly initialized.
"""

import io
import json
import struct

import numpy as np

from .errors import CompatibilityError, FormatError
from .model import Model, ModelConfig

MAGIC = b"LTCK1"
VERSION = 1


def save_checkpoint(model, metadata=None):
    """Serialize a model's parameters and buffers to bytes."""
    store = model.store
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    cfg_raw = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
    meta_raw = json.dumps(metadata or {}, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(cfg_raw)))
    buf.write(cfg_raw)
    buf.write(struct.pack("<I", len(meta_raw)))
    buf.write(meta_raw)

    entries = [(name, 0, store[name].data) for name in store.names()]
    entries += [(name, 1, store.buffer(name)) for name in store.buffer_names()]
    buf.write(struct.pack("<I", len(entries)))
    for name, kind, data in entries:
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", kind))
        buf.write(struct.pack("<B", data.ndim))
        for dim in data.shape:
            buf.write(struct.pack("<I", dim))
        buf.write(np.ascontiguousarray(data, dtype="<f4").tobytes())
    return buf.getvalue()


def write_checkpoint(model, path, metadata=None):
    data = save_checkpoint(model, metadata)
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def _read_entries(data):
    buf = io.BytesIO(data)
    if buf.read(5) != MAGIC:
        raise FormatError("not an LTCK1 checkpoint")
    (version,) = struct.unpack("<I", buf.read(4))
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    (n,) = struct.unpack("<I", buf.read(4))
    config = json.loads(buf.read(n).decode("utf-8"))
    (n,) = struct.unpack("<I", buf.read(4))
    metadata = json.loads(buf.read(n).decode("utf-8"))
    (count,) = struct.unpack("<I", buf.read(4))
    entries = {}
    for _ in range(count):
        (namelen,) = struct.unpack("<H", buf.read(2))
        name = buf.read(namelen).decode("utf-8")
        (kind,) = struct.unpack("<B", buf.read(1))
        (ndim,) = struct.unpack("<B", buf.read(1))
        shape = struct.unpack(f"<{ndim}I", buf.read(4 * ndim)) if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(buf.read(4 * size), dtype="<f4").reshape(shape)
        entries[name] = (kind, arr)
    return config, metadata, entries


def load_checkpoint(data, expected_config=None, seed=0):
    """Rebuild a model from checkpoint bytes.

    When ``expected_config`` is given it must match the stored config
    exactly; a mismatch (for example a different output width) raises
    :class:`CompatibilityError`.
    """
    cfg_dict, metadata, entries = _read_entries(data)
    config = ModelConfig.from_dict(cfg_dict)
    if expected_config is not None and expected_config.to_dict() != config.to_dict():
        diff = [
            k
            for k in config.to_dict()
            if config.to_dict()[k] != expected_config.to_dict()[k]
        ]
        raise CompatibilityError(f"checkpoint config differs on fields: {', '.join(diff)}")
    model = Model(config, seed=seed)
    expected = set(model.store.names()) | set(model.store.buffer_names())
    got = set(entries)
    if expected != got:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        raise CompatibilityError(
            f"parameter name set mismatch; missing={missing} unexpected={extra}"
        )
    for name, (kind, arr) in entries.items():
        target = model.store.buffer(name) if kind == 1 else model.store[name].data
        if target.shape != arr.shape:
            raise CompatibilityError(
                f"shape mismatch for {name}: checkpoint {arr.shape}, model {target.shape}"
            )
        target[...] = arr.astype(target.dtype)
    return model, metadata


def read_checkpoint(path, expected_config=None, seed=0):
    with open(path, "rb") as fh:
        return load_checkpoint(fh.read(), expected_config, seed=seed)


def load_partial(model, data, prefixes):
    """Copy entries under ``prefixes`` from checkpoint bytes into ``model``.

    Entries outside the prefixes are ignored; matching entries must exist in
    the model with identical shapes. Returns a report dict with ``loaded``
    and ``fresh`` name lists.
    """
    _, _, entries = _read_entries(data)
    loaded = []
    for name, (kind, arr) in sorted(entries.items()):
        if not any(name.startswith(p) for p in prefixes):
            continue
        if name not in model.store:
            raise CompatibilityError(f"checkpoint entry {name!r} not present in model")
        target = model.store.buffer(name) if kind == 1 else model.store[name].data
        if target.shape != arr.shape:
            raise CompatibilityError(
                f"shape mismatch for {name}: checkpoint {arr.shape}, model {target.shape}"
            )
        target[...] = arr.astype(target.dtype)
        loaded.append(name)
    if not loaded:
        raise CompatibilityError(f"no checkpoint entries match prefixes {prefixes}")
    all_names = sorted(set(model.store.names()) | set(model.store.buffer_names()))
    fresh = [n for n in all_names if n not in set(loaded)]
    return {"loaded": loaded, "fresh": fresh}
