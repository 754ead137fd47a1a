"""Forward evaluation and exact reverse-mode gradients for the operator family.

Feature maps are plain (n, d) float64 arrays. Each operator reads a
ConvTopology whose CSR edge order (ascending neighbor index per output
vertex) fixes the summation order, so forward passes and gradients are
bit-reproducible.

Operators:
  vc_conv        y_i = sum_j (sum_k a_ijk B_k)^T x_ij + b
  vc_trans_conv  same math on the transposed topology (up-sampling)
  vd_aggregate   y_i = sum_j r'_ij x_ij with r' = |r| normalized per row
  vd_res         y_i = sum_j r'_ij C x_ij (C optional, identity when absent)
  reference_pool componentwise max / mean over each neighborhood
  elu / relu     activations
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MeshError, NumericalError
from .hierarchy import ConvTopology, transpose_topology

__all__ = [
    "VcConvParams",
    "VdParams",
    "backward",
    "elu",
    "elu_backward",
    "init_vc_conv",
    "init_vd",
    "reference_pool",
    "relu",
    "relu_backward",
    "vc_conv",
    "vc_conv_backward",
    "vc_trans_conv",
    "vc_trans_conv_backward",
    "vd_aggregate",
    "vd_aggregate_backward",
    "vd_res",
    "vd_res_backward",
]


@dataclass
class VcConvParams:
    """Learned state of one vc convolution.

    basis: (M, I, O) shared kernel basis.
    coeffs: (edge_count, M) per-edge mixing coefficients, in CSR edge order
        of the topology the layer runs on.
    bias: (O,).
    """

    basis: np.ndarray
    coeffs: np.ndarray
    bias: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def out_dim(self) -> int:
        return self.basis.shape[2]


@dataclass
class VdParams:
    """Learned state of a density layer: raw per-edge coefficients, optional matrix.

    rho: (edge_count,) raw density coefficients.
    matrix: (O, I) or None; None means identity (requires I == O).
    """

    rho: np.ndarray
    matrix: np.ndarray | None = None


def _check_features(x: np.ndarray, dim: int | None, topology: ConvTopology) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise MeshError(f"feature map must be 2-d, got shape {x.shape}")
    if x.shape[0] != topology.n_in:
        raise MeshError(f"feature map has {x.shape[0]} rows, topology expects {topology.n_in}")
    if dim is not None and x.shape[1] != dim:
        raise MeshError(f"feature dimension {x.shape[1]} != layer input dimension {dim}")
    if not np.all(np.isfinite(x)):
        raise NumericalError("non-finite values in input feature map")
    return x


def _check_grad(g: np.ndarray, n_out: int) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.shape[0] != n_out:
        raise MeshError(f"upstream gradient has {g.shape[0]} rows, expected {n_out}")
    if not np.all(np.isfinite(g)):
        raise NumericalError("non-finite upstream gradient")
    return g


def _segment_sums(values: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    """Row sums over CSR segments, summed left to right within each segment."""
    out = np.add.reduceat(values, indptr[:-1], axis=0)
    empty = indptr[:-1] == indptr[1:]
    if empty.any():  # reduceat misreads zero-length segments; topologies forbid them anyway
        out[empty] = 0.0
    return out


# --- vcConv / vcTransConv ------------------------------------------------


def vc_conv(params: VcConvParams, topology: ConvTopology, x: np.ndarray) -> np.ndarray:
    x = _check_features(x, params.in_dim, topology)
    if params.coeffs.shape != (topology.edge_count, params.basis.shape[0]):
        raise MeshError(
            f"coeffs shape {params.coeffs.shape} does not match "
            f"(edges={topology.edge_count}, M={params.basis.shape[0]})"
        )
    xe = x[topology.indices]  # (E, I)
    # per-edge weight W_e = sum_k coeffs[e, k] * basis[k]; contribution W_e^T x_e
    contrib = np.einsum("em,mio,ei->eo", params.coeffs, params.basis, xe, optimize=True)
    return _segment_sums(contrib, topology.indptr) + params.bias


def vc_conv_backward(
    params: VcConvParams, topology: ConvTopology, x: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    x = _check_features(x, params.in_dim, topology)
    g = _check_grad(grad_out, topology.n_out)
    xe = x[topology.indices]
    ge = g[topology.rows()]
    d_bias = g.sum(axis=0)
    d_coeffs = np.einsum("mio,ei,eo->em", params.basis, xe, ge, optimize=True)
    d_basis = np.einsum("em,ei,eo->mio", params.coeffs, xe, ge, optimize=True)
    w_edges = np.einsum("em,mio->eio", params.coeffs, params.basis, optimize=True)
    d_xe = np.einsum("eio,eo->ei", w_edges, ge, optimize=True)
    d_x = np.zeros_like(x)
    np.add.at(d_x, topology.indices, d_xe)
    return d_x, {"basis": d_basis, "coeffs": d_coeffs, "bias": d_bias}


def vc_trans_conv(params: VcConvParams, topology: ConvTopology, x: np.ndarray) -> np.ndarray:
    """vc_conv evaluated on the transposed topology; coeffs use its edge order."""
    return vc_conv(params, transpose_topology(topology), x)


def vc_trans_conv_backward(params, topology, x, grad_out):
    return vc_conv_backward(params, transpose_topology(topology), x, grad_out)


# --- vdPool / vdUnpool / vdRes -------------------------------------------


def _normalized_rho(params: VdParams, topology: ConvTopology) -> tuple[np.ndarray, np.ndarray]:
    rho = np.asarray(params.rho, dtype=np.float64)
    if rho.shape != (topology.edge_count,):
        raise MeshError(f"rho shape {rho.shape} != (edges={topology.edge_count},)")
    absr = np.abs(rho)
    sums = _segment_sums(absr, topology.indptr)
    if (sums <= 0).any():
        raise NumericalError(
            f"all-zero density coefficients in neighborhood {int(np.argmin(sums))}"
        )
    return absr / sums[topology.rows()], sums


def vd_aggregate(params: VdParams, topology: ConvTopology, x: np.ndarray) -> np.ndarray:
    """Density-weighted pooling (vdPool when down, vdUnpool on the transpose)."""
    x = _check_features(x, None, topology)
    weights, _ = _normalized_rho(params, topology)
    return _segment_sums(weights[:, None] * x[topology.indices], topology.indptr)


def vd_aggregate_backward(params, topology, x, grad_out):
    x = _check_features(x, None, topology)
    g = _check_grad(grad_out, topology.n_out)
    weights, sums = _normalized_rho(params, topology)
    xe = x[topology.indices]
    ge = g[topology.rows()]
    y = _segment_sums(weights[:, None] * xe, topology.indptr)
    ye = y[topology.rows()]
    # d y_i / d |rho_e| = (x_e - y_i) / S_i; chain with sign(rho), subgradient 0 at 0
    d_abs = np.einsum("ei,ei->e", ge, xe - ye) / sums[topology.rows()]
    d_rho = np.sign(params.rho) * d_abs
    d_x = np.zeros_like(x)
    np.add.at(d_x, topology.indices, weights[:, None] * ge)
    return d_x, {"rho": d_rho}


def vd_res(params: VdParams, topology: ConvTopology, x: np.ndarray) -> np.ndarray:
    """Residual layer: density-weighted pooling followed by the shared map C."""
    agg = vd_aggregate(params, topology, x)
    if params.matrix is None:
        return agg
    if params.matrix.shape[1] != x.shape[1]:
        raise MeshError(
            f"residual matrix shape {params.matrix.shape} does not accept "
            f"{x.shape[1]}-d features"
        )
    return agg @ params.matrix.T


def vd_res_backward(params, topology, x, grad_out):
    g = _check_grad(grad_out, topology.n_out)
    if params.matrix is None:
        d_x, grads = vd_aggregate_backward(params, topology, x, g)
        return d_x, grads
    agg = vd_aggregate(params, topology, x)
    d_matrix = g.T @ agg
    d_agg = g @ params.matrix
    d_x, grads = vd_aggregate_backward(params, topology, x, d_agg)
    grads["matrix"] = d_matrix
    return d_x, grads


# --- reference pooling and activations ------------------------------------


def reference_pool(topology: ConvTopology, x: np.ndarray, mode: str) -> np.ndarray:
    """Plain max or average pooling over each neighborhood."""
    x = _check_features(x, None, topology)
    xe = x[topology.indices]
    if mode == "max":
        return np.maximum.reduceat(xe, topology.indptr[:-1], axis=0)
    if mode == "avg":
        return _segment_sums(xe, topology.indptr) / topology.sizes[:, None]
    raise MeshError(f"unknown pooling mode {mode!r}")


def elu(x: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    if alpha <= 0:
        raise MeshError(f"elu alpha must be > 0, got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0.0)))


def elu_backward(x: np.ndarray, grad_out: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    g = _check_grad(grad_out, len(x))
    return g * np.where(x > 0, 1.0, alpha * np.exp(np.minimum(x, 0.0)))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    g = _check_grad(grad_out, len(x))
    return g * (np.asarray(x) > 0)


# --- init and dispatch -----------------------------------------------------


def init_vc_conv(
    rng: np.random.Generator, topology: ConvTopology, in_dim: int, out_dim: int
) -> VcConvParams:
    """Uniform init: basis in +-sqrt(1/(M*I)), coeffs in +-sqrt(1/M), zero bias."""
    m = topology.basis_count
    b_lim = np.sqrt(1.0 / (m * in_dim))
    a_lim = np.sqrt(1.0 / m)
    return VcConvParams(
        basis=rng.uniform(-b_lim, b_lim, size=(m, in_dim, out_dim)),
        coeffs=rng.uniform(-a_lim, a_lim, size=(topology.edge_count, m)),
        bias=np.zeros(out_dim),
    )


def init_vd(
    rng: np.random.Generator, topology: ConvTopology, in_dim: int, out_dim: int
) -> VdParams:
    """rho = 1 (exact average pooling at start); C identity when square, else uniform."""
    rho = np.ones(topology.edge_count)
    if in_dim == out_dim:
        return VdParams(rho=rho, matrix=None)
    lim = np.sqrt(1.0 / in_dim)
    return VdParams(rho=rho, matrix=rng.uniform(-lim, lim, size=(out_dim, in_dim)))


_FORWARD = {
    "vc_conv": vc_conv,
    "vc_trans_conv": vc_trans_conv,
    "vd_pool": vd_aggregate,
    "vd_unpool": vd_aggregate,
    "vd_res": vd_res,
}

_BACKWARD = {
    "vc_conv": vc_conv_backward,
    "vc_trans_conv": vc_trans_conv_backward,
    "vd_pool": vd_aggregate_backward,
    "vd_unpool": vd_aggregate_backward,
    "vd_res": vd_res_backward,
}


def forward(kind: str, params, topology: ConvTopology, x: np.ndarray) -> np.ndarray:
    """Evaluate one layer kind by name; see module docstring for the kinds."""
    if kind in ("elu", "relu"):
        return elu(x) if kind == "elu" else relu(x)
    try:
        return _FORWARD[kind](params, topology, x)
    except KeyError:
        raise MeshError(f"unknown layer kind {kind!r}") from None


def backward(
    kind: str, params, topology: ConvTopology | None, x: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Gradients of a scalar loss w.r.t. layer input and every parameter."""
    if kind == "elu":
        return elu_backward(x, grad_out), {}
    if kind == "relu":
        return relu_backward(x, grad_out), {}
    try:
        return _BACKWARD[kind](params, topology, x, grad_out)
    except KeyError:
        raise MeshError(f"unknown layer kind {kind!r}") from None
