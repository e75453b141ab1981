import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def attention(Q: torch.Tensor, K: torch.Tensor, V: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
    """Scaled dot-product attention ``softmax(Q K^T / sqrt(dim)) V``.

    ``mask`` is boolean and broadcastable to (..., Lq, Lk); True marks an
    allowed key. Queries with no allowed key return zeros.
    """
    if Q.shape[-1] != K.shape[-1] or K.shape[-2] != V.shape[-2]:
        raise ValueError(f"shape mismatch: Q {tuple(Q.shape)}, K {tuple(K.shape)}, V {tuple(V.shape)}")
    if mask is None:
        return F.scaled_dot_product_attention(Q, K, V)
    lead = torch.broadcast_shapes(Q.shape[:-1], K.shape[:-2] + (1,))
    mask = mask.expand(*lead, K.shape[-2])
    has_key = mask.any(dim=-1, keepdim=True)
    # fully masked rows would produce NaN; give them every key, then zero them
    out = F.scaled_dot_product_attention(Q, K, V, attn_mask=mask | ~has_key)
    return out * has_key


class MultiHeadAttention(nn.Module):
    """Pre-norm multi-head attention returning the residual update for the queries."""

    def __init__(self, dim: int, heads: int = 2, kv_dim: int | None = None):
        super().__init__()
        if dim % heads:
            raise ValueError(f"dim {dim} not divisible by {heads} heads")
        kv_dim = kv_dim or dim
        self.heads = heads
        self.norm_q = nn.LayerNorm(dim)
        self.norm_kv = nn.LayerNorm(kv_dim)
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(kv_dim, dim)
        self.v = nn.Linear(kv_dim, dim)
        self.out = nn.Linear(dim, dim)

    def _split(self, x):
        *lead, L, D = x.shape
        return x.view(*lead, L, self.heads, D // self.heads).transpose(-3, -2)

    def forward(self, queries, keys, values=None, mask=None, query_pos=None, key_pos=None):
        values = keys if values is None else values
        q_in = self.norm_q(queries)
        kv_in = self.norm_kv(keys)
        v_in = kv_in if values is keys else self.norm_kv(values)
        if query_pos is not None:
            q_in = q_in + query_pos
        if key_pos is not None:
            kv_in = kv_in + key_pos
        q = self._split(self.q(q_in))
        k = self._split(self.k(kv_in))
        v = self._split(self.v(v_in))
        if mask is not None:
            mask = mask.unsqueeze(-3)  # broadcast over heads
        out = attention(q, k, v, mask).transpose(-3, -2).flatten(-2)
        return self.out(out)


def sinusoidal_2d(height: int, width: int, dim: int, dtype=None) -> torch.Tensor:
    """Fixed (dim, height, width) encoding: sin/cos of x in the first half, of y in the second."""
    if dim % 4:
        raise ValueError("positional encoding dim must be divisible by 4")
    quarter = dim // 4
    freqs = torch.exp(-math.log(100.0) * torch.arange(quarter, dtype=torch.float64) / quarter)
    xs = (torch.arange(width, dtype=torch.float64) + 0.5).unsqueeze(-1) * freqs
    ys = (torch.arange(height, dtype=torch.float64) + 0.5).unsqueeze(-1) * freqs
    ex = torch.cat([xs.sin(), xs.cos()], dim=-1).T.unsqueeze(1).expand(-1, height, -1)
    ey = torch.cat([ys.sin(), ys.cos()], dim=-1).T.unsqueeze(2).expand(-1, -1, width)
    return torch.cat([ex, ey], dim=0).to(dtype or torch.get_default_dtype())
