"""Multi-head graph attention with edge-weight-modulated scores.

For node i with neighborhood N(i): h' = W h; e_ij = LeakyReLU(a^T [h_i'||h_j']);
the raw score is modulated by the edge weight, e~_ij = w_ij * e_ij, normalized
with a softmax over N(i), and aggregated h_i'' = ELU(sum_j alpha_ij h_j').
Heads are concatenated.

Edges are directed (target attends to source) and must include self-loops at
weight 1. Computation is edge-list based: scores, the stabilizing per-target
max, and the softmax normalizer are gathered/scattered over the edge array,
which keeps the cost linear in the number of edges rather than quadratic in
nodes.
"""

from __future__ import annotations

import torch
from torch import nn

from ..errors import ShapeError


class GATLayer(nn.Module):
    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        heads: int = 1,
        negative_slope: float = 0.2,
    ):
        super().__init__()
        if heads < 1:
            raise ShapeError("head count must be >= 1")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.heads = heads
        self.negative_slope = negative_slope
        self.W = nn.Linear(in_dim, heads * out_dim, bias=False)
        # attention vector a (2*out_dim per head), split into target/source halves
        self.a_tgt = nn.Parameter(torch.empty(heads, out_dim))
        self.a_src = nn.Parameter(torch.empty(heads, out_dim))
        nn.init.xavier_uniform_(self.W.weight)
        nn.init.xavier_uniform_(self.a_tgt)
        nn.init.xavier_uniform_(self.a_src)

    def forward(
        self,
        h: torch.Tensor,
        tgt: torch.Tensor,
        src: torch.Tensor,
        edge_w: torch.Tensor,
        edge_mask: torch.Tensor | None = None,
        return_attention: bool = False,
    ) -> torch.Tensor:
        """h: (B, N, in_dim); tgt/src: (E,) directed edge endpoints including
        self-loops; edge_w: (B, E) or (E,); edge_mask: optional (B, E) in
        {0, 1} disabling edges per sample (self-loops must stay enabled).
        With ``return_attention`` the per-edge softmax weights (B, E, heads)
        are returned alongside the output."""
        if h.shape[-1] != self.in_dim:
            raise ShapeError(f"expected feature dim {self.in_dim}, got {h.shape[-1]}")
        B, N, _ = h.shape
        E = tgt.shape[0]
        hp = self.W(h).reshape(B, N, self.heads, self.out_dim)
        tgt_score = torch.einsum("bnkd,kd->bnk", hp, self.a_tgt)
        src_score = torch.einsum("bnkd,kd->bnk", hp, self.a_src)

        s = torch.nn.functional.leaky_relu(
            tgt_score[:, tgt] + src_score[:, src], self.negative_slope
        )
        if edge_w.dim() == 1:
            edge_w = edge_w.unsqueeze(0)
        s = s * edge_w.unsqueeze(-1)

        # per-target max over all incident edges; cancels in the softmax
        m = s.new_full((B, N, self.heads), torch.finfo(s.dtype).min)
        idx = tgt.reshape(1, E, 1).expand(B, E, self.heads)
        m.scatter_reduce_(1, idx, s.detach(), reduce="amax", include_self=True)
        ex = torch.exp(s - m[:, tgt])
        if edge_mask is not None:
            ex = ex * edge_mask.unsqueeze(-1)
        denom = s.new_zeros(B, N, self.heads).index_add_(1, tgt, ex)
        alpha = ex / denom[:, tgt]

        msg = alpha.unsqueeze(-1) * hp[:, src]
        out = hp.new_zeros(B, N, self.heads, self.out_dim).index_add_(1, tgt, msg)
        out = torch.nn.functional.elu(out).reshape(B, N, self.heads * self.out_dim)
        if return_attention:
            return out, alpha
        return out
