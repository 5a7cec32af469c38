"""JSON interchange format for networks (``gbpnet-network/1``).

A document is an object with

``format``
    The string ``"gbpnet-network/1"``.
``tensors``
    A list of tensors. Each has ``labels`` (JSON values; tuple labels are
    written as arrays), ``dims``, ``storage`` (``"dense"`` or ``"sparse"``),
    ``log_scale`` and the entries. Dense entries are ``real`` (and optionally
    ``imag``) flat lists in row-major order over ``labels``; sparse entries
    add ``coords``, a list of index tuples matching ``real``/``imag``.
``geometry``
    Optional ``plaquettes`` and ``voxels`` lists of ``{"bonds": [...],
    "tensors": [...]}`` and a free-form ``info`` object.
``meta``
    Optional free-form metadata such as ``n_sites``.
"""

from __future__ import annotations

import json

import numpy as np

from .regions import Cell, Geometry
from .tensor import LabeledTensor

__all__ = ["FORMAT", "network_to_dict", "network_from_dict", "save_network", "load_network"]

FORMAT = "gbpnet-network/1"


def _label_out(label):
    if isinstance(label, tuple):
        return [_label_out(x) for x in label]
    if isinstance(label, (np.integer,)):
        return int(label)
    return label


def _label_in(value):
    if isinstance(value, list):
        return tuple(_label_in(x) for x in value)
    return value


def _entries(values: np.ndarray) -> dict:
    out = {"real": values.real.tolist()}
    if np.any(values.imag != 0):
        out["imag"] = values.imag.tolist()
    return out


def _tensor_to_dict(t: LabeledTensor) -> dict:
    d = {"labels": [_label_out(l) for l in t.labels], "dims": list(t.shape),
         "log_scale": t.log_scale}
    if t.is_sparse:
        d["storage"] = "sparse"
        d["coords"] = t.coords.tolist()
        d.update(_entries(t.values))
    else:
        d["storage"] = "dense"
        d.update(_entries(t.data.reshape(-1)))
    return d


def _tensor_from_dict(d: dict) -> LabeledTensor:
    labels = [_label_in(l) for l in d["labels"]]
    dims = [int(x) for x in d["dims"]]
    vals = np.asarray(d.get("real", []), dtype=float)
    if "imag" in d:
        vals = vals + 1j * np.asarray(d["imag"], dtype=float)
    storage = d.get("storage", "dense")
    log_scale = float(d.get("log_scale", 0.0))
    if storage == "dense":
        if vals.size != int(np.prod(dims)):
            raise ValueError(f"dense tensor on {labels!r} has {vals.size} entries, "
                             f"expected {int(np.prod(dims))}")
        return LabeledTensor(labels, vals.reshape(dims), log_scale=log_scale)
    if storage == "sparse":
        coords = np.asarray(d.get("coords", []), dtype=np.int64).reshape(len(vals), len(dims))
        return LabeledTensor(labels, shape=dims, coords=coords, values=vals,
                             log_scale=log_scale)
    raise ValueError(f"unknown storage {storage!r}")


def network_to_dict(network, geometry: Geometry | None = None, meta: dict | None = None) -> dict:
    doc = {"format": FORMAT, "tensors": [_tensor_to_dict(t) for t in network]}
    if geometry is not None:
        doc["geometry"] = {
            kind: [{"bonds": [_label_out(l) for l in c.bonds], "tensors": list(c.tensors)}
                   for c in getattr(geometry, kind)]
            for kind in ("plaquettes", "voxels")
        }
        doc["geometry"]["info"] = {k: _label_out(v) for k, v in geometry.info.items()}
    if meta:
        doc["meta"] = meta
    return doc


def network_from_dict(doc: dict) -> tuple:
    """``(network, geometry, meta)`` from a decoded document."""
    if doc.get("format") != FORMAT:
        raise ValueError(f"expected format {FORMAT!r}, found {doc.get('format')!r}")
    network = [_tensor_from_dict(d) for d in doc["tensors"]]
    geo = doc.get("geometry") or {}
    geometry = Geometry(info=dict(geo.get("info", {})))
    for kind in ("plaquettes", "voxels"):
        for c in geo.get(kind, []):
            getattr(geometry, kind).append(
                Cell(tuple(_label_in(l) for l in c["bonds"]), tuple(int(i) for i in c["tensors"])))
    return network, geometry, dict(doc.get("meta", {}))


def save_network(path, network, geometry: Geometry | None = None, meta: dict | None = None):
    with open(path, "w") as fh:
        json.dump(network_to_dict(network, geometry, meta), fh)


def load_network(path) -> tuple:
    with open(path) as fh:
        return network_from_dict(json.load(fh))
