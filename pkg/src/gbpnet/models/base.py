"""Container shared by every model generator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..regions import Geometry, network_dims
from ..tensor import LabeledTensor

__all__ = ["ModelInstance", "check_network", "double_factor"]


@dataclass
class ModelInstance:
    """A generated tensor network with the metadata the presets and observables need.

    Attributes
    ----------
    kind : str
    params : dict
    network : list of LabeledTensor
    geometry : Geometry
        Plaquettes and voxels as :class:`~gbpnet.regions.Cell` lists.
    n_sites : int
        Number of physical sites used for per-site densities.
    kets : list of LabeledTensor, optional
        For norm networks: ket tensors on (virtual labels..., physical label),
        one per network tensor and in the same order.
    pair_dims : dict, optional
        For norm networks: merged bond label -> ket bond dimension chi.
    couplings : list of (J, label, label), optional
        Ising couplings as pairs of labels carrying the two spins, used for
        energies (index 0 is spin +1, index 1 is spin -1).
    """

    kind: str
    params: dict
    network: list
    geometry: Geometry
    n_sites: int
    kets: list | None = None
    pair_dims: dict | None = None
    couplings: list = field(default_factory=list)
    lattice: object = None

    def __post_init__(self):
        check_network(self.network)


def check_network(network) -> dict:
    """Consistency of label dimensions; returns the label -> dim map."""
    return network_dims(network)


def double_factor(ket: LabeledTensor, physical, merged_labels=None, operator=None) -> LabeledTensor:
    """``sum_s ket(z, s) conj(ket(z', s))`` with each (z, z') merged as ``z*chi + z'``.

    ``ket`` carries virtual labels followed by ``physical``. The merged
    labels default to the virtual labels. With ``operator`` the result is
    ``sum_{s, s'} ket(z, s) operator[s', s] conj(ket(z', s'))``, the factor
    whose full contraction gives ``<psi|operator|psi>``.
    """
    virt = [l for l in ket.labels if l != physical]
    arr = ket.dense_array(virt + [physical])
    k = len(virt)
    letters = "abcdefghijklmnopqrstuvw"[:k]
    primes = "ABCDEFGHIJKLMNOPQRSTUVW"[:k]
    out = "".join(a + b for a, b in zip(letters, primes))
    if operator is None:
        t = np.einsum(f"{letters}z,{primes}z->{out}", arr, arr.conj())
    else:
        op = np.asarray(operator)
        if op.shape != (arr.shape[-1], arr.shape[-1]):
            raise ValueError(f"operator shape {op.shape} does not match physical dimension "
                             f"{arr.shape[-1]}")
        t = np.einsum(f"{letters}z,yz,{primes}y->{out}", arr, op, arr.conj())
    shape = [arr.shape[i] ** 2 for i in range(k)]
    labels = virt if merged_labels is None else list(merged_labels)
    return LabeledTensor(labels, t.reshape(shape))
