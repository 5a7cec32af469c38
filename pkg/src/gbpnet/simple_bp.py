"""Plain belief propagation written with tensor contractions.

This is an independent reference for the region-graph engine run with one
region per tensor. A message lives on each (tensor, bond) pair and points out
of the tensor along the bond: it is the tensor contracted with the messages
arriving on all its other bonds, with unshared indices summed out.
Bonds are visited in sorted label order and both directions of a bond are
replaced together, with the same damping and normalization as the engine.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DegenerateNormalizer
from .tensor import LabeledTensor, label_key

__all__ = ["SimpleBP"]


class SimpleBP:
    """Message passing on a network whose shared labels join exactly two tensors.

    Parameters
    ----------
    network : sequence of LabeledTensor
    damping : float
        Weight of the new message in the linear mixing step.
    """

    def __init__(self, network: Sequence[LabeledTensor], damping: float = 0.3):
        self.network = list(network)
        self.damping = float(damping)
        self.arrays = [t.dense_array() for t in self.network]
        owners: dict = {}
        for i, t in enumerate(self.network):
            for l in t.labels:
                owners.setdefault(l, []).append(i)
        for l, own in owners.items():
            if len(own) > 2:
                raise ValueError(f"label {l!r} joins more than two tensors")
        self.bonds = sorted((l for l, own in owners.items() if len(own) == 2), key=label_key)
        self.ends = {l: tuple(owners[l]) for l in self.bonds}
        self.dims = {l: t.shape[k] for t in self.network for k, l in enumerate(t.labels)}
        # outgoing message of tensor i along bond l
        self.out = {(i, l): np.ones(self.dims[l], dtype=np.complex128)
                    for l in self.bonds for i in self.ends[l]}
        self.history: list = []

    def incoming(self, i, l):
        """Message arriving at tensor ``i`` along bond ``l``."""
        a, b = self.ends[l]
        return self.out[(b if i == a else a, l)]

    def _outgoing(self, i, l):
        t = self.network[i]
        letters = {lab: chr(97 + k) for k, lab in enumerate(t.labels)}
        ops = [self.arrays[i]]
        subs = ["".join(letters[x] for x in t.labels)]
        for other in t.labels:
            if other != l and other in self.ends:
                ops.append(self.incoming(i, other))
                subs.append(letters[other])
        return np.einsum(",".join(subs) + "->" + letters[l], *ops)

    def sweep(self) -> float:
        acc = []
        lam = self.damping
        for l in self.bonds:
            news = {}
            for i in self.ends[l]:
                new = self._outgoing(i, l)
                tot = new.sum()
                if not abs(tot) > 1e-300:
                    raise DegenerateNormalizer(f"message on {l!r} sums to zero")
                news[i] = new / tot
            for i, new in news.items():
                old = self.out[(i, l)]
                rej = new - (np.vdot(old, new) / np.vdot(old, old).real) * old
                acc.append(min(np.vdot(rej, rej).real / np.vdot(new, new).real, 1.0))
                mixed = (1.0 - lam) * old + lam * new
                self.out[(i, l)] = mixed / mixed.sum()
        metric = float(np.mean(acc)) if acc else 0.0
        self.history.append(metric)
        return metric

    def run(self, epsilon: float = 1e-10, max_iters: int = 10_000) -> bool:
        for _ in range(max_iters):
            if self.sweep() <= epsilon:
                return True
        return False

    def log_z(self) -> complex:
        """Bethe estimate of ``log Z``: tensor terms minus bond terms."""
        total = 0j
        for i, t in enumerate(self.network):
            letters = {lab: chr(97 + k) for k, lab in enumerate(t.labels)}
            ops = [self.arrays[i]]
            subs = ["".join(letters[x] for x in t.labels)]
            for l in t.labels:
                if l in self.ends:
                    ops.append(self.incoming(i, l))
                    subs.append(letters[l])
            total += np.log(complex(np.einsum(",".join(subs) + "->", *ops))) + t.log_scale
        for l in self.bonds:
            a, b = self.ends[l]
            total -= np.log(complex(np.dot(self.out[(a, l)], self.out[(b, l)])))
        return total

    def environment(self, i) -> LabeledTensor:
        """Outer product of the messages arriving at tensor ``i``."""
        t = self.network[i]
        labels = [l for l in t.labels if l in self.ends]
        out = np.ones((), dtype=np.complex128)
        for l in labels:
            out = np.multiply.outer(out, self.incoming(i, l))
        return LabeledTensor(tuple(labels), out)
