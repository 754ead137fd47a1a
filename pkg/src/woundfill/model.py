"""The mesh autoencoder: residual down blocks to a coarse latent and back.

Each down block feeds the input through a down-sampling convolution and the
activation, then adds the density-weighted residual path:

    x_{l+1} = act(vc_conv(x_l)) + vd_res(x_l)

Up blocks mirror this with the transposed topologies (vcTransConv / vdUpRes).
The encoder halts at the coarsest hierarchy level; widths are per level and
the decoder reuses them in reverse, so the output matches the input shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .hierarchy import M_CLAMP_DEFAULT, MeshHierarchy, build_hierarchy
from .mesh import Mesh
from .ops import (
    VcConvParams,
    VdParams,
    elu,
    elu_backward,
    init_vc_conv,
    init_vd,
    relu,
    relu_backward,
    vc_conv,
    vc_conv_backward,
    vd_res,
    vd_res_backward,
)

__all__ = ["Architecture", "Autoencoder"]


@dataclass(frozen=True)
class Architecture:
    """Static description of the network; everything needed to rebuild it."""

    ratios: tuple[float, ...] = (1.0, 0.25)
    widths: tuple[int, ...] = (3, 16)
    activation: str = "elu"
    elu_alpha: float = 1.0
    m_clamp: tuple[int, int] = M_CLAMP_DEFAULT

    def validate(self):
        if len(self.widths) != len(self.ratios):
            raise ConfigError(
                f"widths (len {len(self.widths)}) must match ratios (len {len(self.ratios)})"
            )
        if self.widths[0] != 3:
            raise ConfigError(f"widths[0] must be 3 (xyz coordinates), got {self.widths[0]}")
        if any(w < 1 for w in self.widths):
            raise ConfigError(f"widths must be >= 1, got {self.widths}")
        if self.activation not in ("elu", "relu"):
            raise ConfigError(f"activation must be 'elu' or 'relu', got {self.activation!r}")
        if self.elu_alpha <= 0:
            raise ConfigError(f"elu_alpha must be > 0, got {self.elu_alpha}")

    def to_dict(self) -> dict:
        return {
            "ratios": list(self.ratios),
            "widths": list(self.widths),
            "activation": self.activation,
            "elu_alpha": self.elu_alpha,
            "m_clamp": list(self.m_clamp),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        arch = cls(
            ratios=tuple(d["ratios"]),
            widths=tuple(d["widths"]),
            activation=d["activation"],
            elu_alpha=float(d["elu_alpha"]),
            m_clamp=tuple(d["m_clamp"]),
        )
        arch.validate()
        return arch


@dataclass
class _Block:
    conv: VcConvParams
    res: VdParams


class Autoencoder:
    """Holds hierarchy, architecture and parameters; forward/backward are exact."""

    def __init__(self, hierarchy: MeshHierarchy, architecture: Architecture,
                 encoder: list[_Block], decoder: list[_Block]):
        architecture.validate()
        self.hierarchy = hierarchy
        self.architecture = architecture
        self.encoder = encoder
        self.decoder = decoder

    # -- construction -----------------------------------------------------

    @classmethod
    def build(cls, mesh: Mesh, architecture: Architecture, seed: int) -> "Autoencoder":
        architecture.validate()
        hierarchy = build_hierarchy(mesh, architecture.ratios, architecture.m_clamp)
        return cls.init(hierarchy, architecture, seed)

    @classmethod
    def init(cls, hierarchy: MeshHierarchy, architecture: Architecture, seed: int) -> "Autoencoder":
        """Seed-deterministic parameter init; draw order is encoder then decoder."""
        architecture.validate()
        w = architecture.widths
        rng = np.random.default_rng(seed)
        encoder, decoder = [], []
        n_tr = len(hierarchy.conv_down)
        for level in range(n_tr):
            encoder.append(_Block(
                conv=init_vc_conv(rng, hierarchy.conv_down[level], w[level], w[level + 1]),
                res=init_vd(rng, hierarchy.pool_down[level], w[level], w[level + 1]),
            ))
        for level in reversed(range(n_tr)):
            decoder.append(_Block(
                conv=init_vc_conv(rng, hierarchy.conv_up[level], w[level + 1], w[level]),
                res=init_vd(rng, hierarchy.pool_up[level], w[level + 1], w[level]),
            ))
        return cls(hierarchy, architecture, encoder, decoder)

    # -- parameter access ---------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        """Named parameter arrays in a fixed order (views, not copies)."""
        out: dict[str, np.ndarray] = {}
        for tag, blocks in (("enc", self.encoder), ("dec", self.decoder)):
            for i, blk in enumerate(blocks):
                out[f"{tag}{i}.conv.basis"] = blk.conv.basis
                out[f"{tag}{i}.conv.coeffs"] = blk.conv.coeffs
                out[f"{tag}{i}.conv.bias"] = blk.conv.bias
                out[f"{tag}{i}.res.rho"] = blk.res.rho
                if blk.res.matrix is not None:
                    out[f"{tag}{i}.res.matrix"] = blk.res.matrix
        return out

    def set_parameters(self, params: dict[str, np.ndarray]) -> None:
        for tag, blocks in (("enc", self.encoder), ("dec", self.decoder)):
            for i, blk in enumerate(blocks):
                blk.conv.basis = params[f"{tag}{i}.conv.basis"]
                blk.conv.coeffs = params[f"{tag}{i}.conv.coeffs"]
                blk.conv.bias = params[f"{tag}{i}.conv.bias"]
                blk.res.rho = params[f"{tag}{i}.res.rho"]
                if blk.res.matrix is not None:
                    blk.res.matrix = params[f"{tag}{i}.res.matrix"]

    def parameter_count(self) -> int:
        return sum(int(np.prod(a.shape)) for a in self.parameters().values())

    # -- forward / backward --------------------------------------------------

    def _act(self, h: np.ndarray) -> np.ndarray:
        if self.architecture.activation == "elu":
            return elu(h, self.architecture.elu_alpha)
        return relu(h)

    def _act_backward(self, h: np.ndarray, g: np.ndarray) -> np.ndarray:
        if self.architecture.activation == "elu":
            return elu_backward(h, g, self.architecture.elu_alpha)
        return relu_backward(h, g)

    def _block_topologies(self):
        hi = self.hierarchy
        n_tr = len(hi.conv_down)
        downs = [(hi.conv_down[l], hi.pool_down[l]) for l in range(n_tr)]
        ups = [(hi.conv_up[l], hi.pool_up[l]) for l in reversed(range(n_tr))]
        return downs, ups

    def forward(self, x: np.ndarray, keep_cache: bool = False):
        """Run positions (n, 3) through the autoencoder.

        With keep_cache=True also returns the per-block tensors backward needs.
        """
        downs, ups = self._block_topologies()
        cache = []
        for blk, (conv_t, pool_t) in zip(self.encoder + self.decoder, downs + ups):
            h = vc_conv(blk.conv, conv_t, x)
            a = self._act(h)
            r = vd_res(blk.res, pool_t, x)
            if keep_cache:
                cache.append((x, h))
            x = a + r
        return (x, cache) if keep_cache else x

    def backward(self, cache, grad_out: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients for the forward pass that produced `cache`."""
        downs, ups = self._block_topologies()
        names = list(self.parameters())
        grads: dict[str, np.ndarray] = {}
        blocks = self.encoder + self.decoder
        topos = downs + ups
        tags = [f"enc{i}" for i in range(len(self.encoder))] + [
            f"dec{i}" for i in range(len(self.decoder))
        ]
        g = grad_out
        for blk, (conv_t, pool_t), tag, (x, h) in zip(
            reversed(blocks), reversed(topos), reversed(tags), reversed(cache)
        ):
            dh = self._act_backward(h, g)
            dx_conv, conv_grads = vc_conv_backward(blk.conv, conv_t, x, dh)
            dx_res, res_grads = vd_res_backward(blk.res, pool_t, x, g)
            grads[f"{tag}.conv.basis"] = conv_grads["basis"]
            grads[f"{tag}.conv.coeffs"] = conv_grads["coeffs"]
            grads[f"{tag}.conv.bias"] = conv_grads["bias"]
            grads[f"{tag}.res.rho"] = res_grads["rho"]
            if "matrix" in res_grads:
                grads[f"{tag}.res.matrix"] = res_grads["matrix"]
            g = dx_conv + dx_res
        return {name: grads[name] for name in names}

    def input_gradient(self, cache, grad_out: np.ndarray) -> np.ndarray:
        """Gradient w.r.t. the input positions (used by gradient checks)."""
        downs, ups = self._block_topologies()
        g = grad_out
        for blk, (conv_t, pool_t), (x, h) in zip(
            reversed(self.encoder + self.decoder), reversed(downs + ups), reversed(cache)
        ):
            dh = self._act_backward(h, g)
            dx_conv, _ = vc_conv_backward(blk.conv, conv_t, x, dh)
            dx_res, _ = vd_res_backward(blk.res, pool_t, x, g)
            g = dx_conv + dx_res
        return g
