"""Reconstruction losses between index-corresponding meshes.

The default loss is the mean per-vertex Euclidean distance, measured against
the ground-truth (pre-injury) mesh rather than the network input; both the
target and the metric are switchable. The L1 option is the mean absolute
coordinate difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MeshError
from .mesh import Mesh

__all__ = ["LossSpec", "reconstruction_loss", "vertex_distance"]

TARGETS = ("ground_truth", "input")
METRICS = ("l2", "l1")


@dataclass(frozen=True)
class LossSpec:
    """What the loss compares against (target) and how (metric)."""

    target: str = "ground_truth"
    metric: str = "l2"

    def validate(self):
        if self.target not in TARGETS:
            raise ConfigError(f"loss target must be one of {TARGETS}, got {self.target!r}")
        if self.metric not in METRICS:
            raise ConfigError(f"loss metric must be one of {METRICS}, got {self.metric!r}")


def _positions(m) -> np.ndarray:
    if isinstance(m, Mesh):
        return m.positions
    return np.asarray(m, dtype=np.float64)


def vertex_distance(a, b) -> np.ndarray:
    """Euclidean distance between corresponding vertices of two meshes."""
    pa, pb = _positions(a), _positions(b)
    if pa.shape != pb.shape:
        raise MeshError(f"vertex count mismatch: {pa.shape} vs {pb.shape}")
    return np.linalg.norm(pa - pb, axis=1)


def reconstruction_loss(out, target, metric: str = "l2") -> tuple[float, np.ndarray]:
    """Scalar loss and its gradient with respect to the output positions.

    l2: mean over vertices of the Euclidean distance; the gradient of a
        zero-distance vertex is zero (the only bounded subgradient).
    l1: mean over all coordinate entries of the absolute difference.
    """
    po, pt = _positions(out), _positions(target)
    if po.shape != pt.shape:
        raise MeshError(f"vertex count mismatch: {po.shape} vs {pt.shape}")
    n = len(po)
    diff = po - pt
    if metric == "l2":
        d = np.linalg.norm(diff, axis=1)
        loss = float(d.mean())
        grad = np.zeros_like(diff)
        nz = d > 0
        grad[nz] = diff[nz] / (n * d[nz, None])
        return loss, grad
    if metric == "l1":
        loss = float(np.abs(diff).mean())
        grad = np.sign(diff) / diff.size
        return loss, grad
    raise ConfigError(f"unknown metric {metric!r}")
