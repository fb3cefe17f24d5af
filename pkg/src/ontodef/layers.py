"""Neural building blocks shared by the embedding and generation models.

One GRU cell implementation serves both the graph-propagation encoders
and the recurrent baselines; one transformer core serves the plain
baseline and the fused generator.  Parameters are plain float64
autodiff tensors, initialized from a caller-supplied numpy Generator so
every model is reproducible from its seed.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, concat, where


class Module:
    """Base class: parameter discovery through attribute traversal."""

    def named_parameters(self):
        out = []
        seen = set()

        def visit(obj, prefix):
            for name, value in vars(obj).items():
                path = f"{prefix}.{name}" if prefix else name
                if isinstance(value, Tensor) and value.requires_grad:
                    if id(value) not in seen:
                        seen.add(id(value))
                        out.append((path, value))
                elif isinstance(value, Module):
                    visit(value, path)
                elif isinstance(value, (list, tuple)):
                    for i, item in enumerate(value):
                        if isinstance(item, Module):
                            visit(item, f"{path}.{i}")
                        elif isinstance(item, Tensor) and item.requires_grad:
                            if id(item) not in seen:
                                seen.add(id(item))
                                out.append((f"{path}.{i}", item))

        visit(self, "")
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict):
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise ValueError(f"state mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {p.data.shape}")
            p.data = arr.copy()


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


class Linear(Module):
    def __init__(self, rng, in_dim: int, out_dim: int, bias: bool = True):
        self.weight = Tensor(xavier_uniform(rng, in_dim, out_dim), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = x @ self.weight
        return y + self.bias if self.bias is not None else y


class Embedding(Module):
    def __init__(self, rng, num: int, dim: int, scale: float = 0.08):
        self.weight = Tensor(rng.uniform(-scale, scale, size=(num, dim)),
                             requires_grad=True)

    def __call__(self, ids: np.ndarray) -> Tensor:
        return self.weight[np.asarray(ids, dtype=np.intp)]


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.shift = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return centered / (var + self.eps).sqrt() * self.gain + self.shift


class Dropout:
    """Inverted dropout; inactive when called without an rng."""

    def __init__(self, p: float):
        self.p = p

    def __call__(self, x: Tensor, rng: np.random.Generator | None) -> Tensor:
        if rng is None or self.p <= 0.0:
            return x
        mask = (rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * Tensor(mask)


class GRUCell(Module):
    """Gated recurrent cell, h' = z*h + (1-z)*n."""

    def __init__(self, rng, in_dim: int, hidden_dim: int):
        self.w_ir = Tensor(xavier_uniform(rng, in_dim, hidden_dim), requires_grad=True)
        self.w_iz = Tensor(xavier_uniform(rng, in_dim, hidden_dim), requires_grad=True)
        self.w_in = Tensor(xavier_uniform(rng, in_dim, hidden_dim), requires_grad=True)
        self.w_hr = Tensor(xavier_uniform(rng, hidden_dim, hidden_dim), requires_grad=True)
        self.w_hz = Tensor(xavier_uniform(rng, hidden_dim, hidden_dim), requires_grad=True)
        self.w_hn = Tensor(xavier_uniform(rng, hidden_dim, hidden_dim), requires_grad=True)
        self.b_r = Tensor(np.zeros(hidden_dim), requires_grad=True)
        self.b_z = Tensor(np.zeros(hidden_dim), requires_grad=True)
        self.b_n = Tensor(np.zeros(hidden_dim), requires_grad=True)
        self.hidden_dim = hidden_dim

    def step(self, x: Tensor, h: Tensor) -> Tensor:
        r = (x @ self.w_ir + h @ self.w_hr + self.b_r).sigmoid()
        z = (x @ self.w_iz + h @ self.w_hz + self.b_z).sigmoid()
        n = (x @ self.w_in + r * (h @ self.w_hn) + self.b_n).tanh()
        return z * h + (1.0 - z) * n


def run_gru(cell: GRUCell, xs: Tensor, mask: np.ndarray, reverse: bool = False):
    """Run a GRU over [B, T, D] inputs; padded steps carry state through.

    Returns per-position states [B, T, H] and the final state [B, H].
    """
    batch, steps = mask.shape
    h = Tensor(np.zeros((batch, cell.hidden_dim)))
    states = [None] * steps
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    for t in order:
        h_new = cell.step(xs[:, t, :], h)
        h = where(mask[:, t:t + 1], h_new, h)
        states[t] = h
    from .autodiff import stack
    return stack(states, axis=1), h


class BiGruMaxPoolEncoder(Module):
    """Sum of forward and backward GRU states, max-pooled over positions."""

    def __init__(self, rng, in_dim: int, hidden_dim: int):
        self.fwd = GRUCell(rng, in_dim, hidden_dim)
        self.bwd = GRUCell(rng, in_dim, hidden_dim)

    def __call__(self, xs: Tensor, mask: np.ndarray) -> Tensor:
        f_states, _ = run_gru(self.fwd, xs, mask, reverse=False)
        b_states, _ = run_gru(self.bwd, xs, mask, reverse=True)
        summed = f_states + b_states
        neg = np.where(mask[:, :, None], 0.0, -1e30)
        return (summed + Tensor(neg)).max(axis=1)


class MultiHeadAttention(Module):
    def __init__(self, rng, d_model: int, n_heads: int):
        assert d_model % n_heads == 0
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.wq = Linear(rng, d_model, d_model)
        self.wk = Linear(rng, d_model, d_model)
        self.wv = Linear(rng, d_model, d_model)
        self.wo = Linear(rng, d_model, d_model)

    def _split(self, x: Tensor, batch: int, steps: int) -> Tensor:
        return x.reshape(batch, steps, self.n_heads, self.d_head).transpose(0, 2, 1, 3)

    def __call__(self, q_in: Tensor, kv_in: Tensor, mask: np.ndarray | None) -> Tensor:
        batch, tq = q_in.shape[0], q_in.shape[1]
        tk = kv_in.shape[1]
        q = self._split(self.wq(q_in), batch, tq)
        k = self._split(self.wk(kv_in), batch, tk)
        v = self._split(self.wv(kv_in), batch, tk)
        scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(self.d_head))
        if mask is not None:
            # mask: True = attend; broadcastable to [B, heads, Tq, Tk]
            scores = scores + Tensor(np.where(mask, 0.0, -1e30))
        attn = scores.softmax(axis=-1)
        out = (attn @ v).transpose(0, 2, 1, 3).reshape(batch, tq, -1)
        return self.wo(out)


class FeedForward(Module):
    def __init__(self, rng, d_model: int, d_ff: int):
        self.lin1 = Linear(rng, d_model, d_ff)
        self.lin2 = Linear(rng, d_ff, d_model)

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(self.lin1(x).relu())


class EncoderLayer(Module):
    """Pre-norm transformer encoder layer."""

    def __init__(self, rng, d_model: int, n_heads: int, d_ff: int, dropout: float):
        self.attn = MultiHeadAttention(rng, d_model, n_heads)
        self.ff = FeedForward(rng, d_model, d_ff)
        self.ln1 = LayerNorm(d_model)
        self.ln2 = LayerNorm(d_model)
        self.drop = Dropout(dropout)

    def __call__(self, x, mask, rng=None):
        h = self.ln1(x)
        x = x + self.drop(self.attn(h, h, mask), rng)
        x = x + self.drop(self.ff(self.ln2(x)), rng)
        return x


class DecoderLayer(Module):
    def __init__(self, rng, d_model: int, n_heads: int, d_ff: int, dropout: float):
        self.self_attn = MultiHeadAttention(rng, d_model, n_heads)
        self.cross_attn = MultiHeadAttention(rng, d_model, n_heads)
        self.ff = FeedForward(rng, d_model, d_ff)
        self.ln1 = LayerNorm(d_model)
        self.ln2 = LayerNorm(d_model)
        self.ln3 = LayerNorm(d_model)
        self.drop = Dropout(dropout)

    def __call__(self, x, memory, self_mask, cross_mask, rng=None):
        h = self.ln1(x)
        x = x + self.drop(self.self_attn(h, h, self_mask), rng)
        x = x + self.drop(self.cross_attn(self.ln2(x), memory, cross_mask), rng)
        x = x + self.drop(self.ff(self.ln3(x)), rng)
        return x


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length)[:, None].astype(np.float64)
    i = np.arange(dim)[None, :].astype(np.float64)
    angle = pos / np.power(10000.0, 2 * (i // 2) / dim)
    enc = np.empty((length, dim))
    enc[:, 0::2] = np.sin(angle[:, 0::2])
    enc[:, 1::2] = np.cos(angle[:, 1::2])
    return enc


def causal_mask(steps: int) -> np.ndarray:
    return np.tril(np.ones((steps, steps), dtype=bool))[None, None, :, :]


class TransformerCore(Module):
    """Encoder-decoder transformer over token ids, with optional extra
    encoder prefix positions supplied as already-projected vectors."""

    def __init__(self, rng, vocab_size: int, d_model: int, n_heads: int,
                 n_enc_layers: int, n_dec_layers: int, d_ff: int, dropout: float,
                 max_len: int = 512):
        self.token_emb = Embedding(rng, vocab_size, d_model)
        self.enc_layers = [EncoderLayer(rng, d_model, n_heads, d_ff, dropout)
                           for _ in range(n_enc_layers)]
        self.dec_layers = [DecoderLayer(rng, d_model, n_heads, d_ff, dropout)
                           for _ in range(n_dec_layers)]
        self.enc_norm = LayerNorm(d_model)
        self.dec_norm = LayerNorm(d_model)
        self.out_proj = Linear(rng, d_model, vocab_size)
        self.d_model = d_model
        self.pos = sinusoidal_positions(max_len, d_model)
        self.drop = Dropout(dropout)

    def embed_tokens(self, ids: np.ndarray) -> Tensor:
        t = ids.shape[1]
        return self.token_emb(ids) * np.sqrt(self.d_model) + Tensor(self.pos[:t])

    def encode(self, src_ids: np.ndarray, src_mask: np.ndarray,
               prefix: Tensor | None = None, rng=None):
        """Returns (memory, key_mask [B, S_total]); prefix slots prepend."""
        x = self.embed_tokens(src_ids)
        key_mask = src_mask
        if prefix is not None:
            x = concat([prefix, x], axis=1)
            key_mask = np.concatenate(
                [np.ones((src_mask.shape[0], prefix.shape[1]), dtype=bool), src_mask],
                axis=1)
        x = self.drop(x, rng)
        attn_mask = key_mask[:, None, None, :]
        for layer in self.enc_layers:
            x = layer(x, attn_mask, rng)
        return self.enc_norm(x), key_mask

    def decode(self, tgt_ids: np.ndarray, memory: Tensor,
               memory_key_mask: np.ndarray, tgt_mask: np.ndarray, rng=None) -> Tensor:
        t = tgt_ids.shape[1]
        x = self.drop(self.embed_tokens(tgt_ids), rng)
        self_mask = causal_mask(t) & tgt_mask[:, None, None, :]
        cross_mask = memory_key_mask[:, None, None, :]
        for layer in self.dec_layers:
            x = layer(x, memory, self_mask, cross_mask, rng)
        return self.out_proj(self.dec_norm(x))


class MLP(Module):
    """One-hidden-layer perceptron used by the granularity classifiers."""

    def __init__(self, rng, in_dim: int, hidden_dim: int, out_dim: int):
        self.lin1 = Linear(rng, in_dim, hidden_dim)
        self.lin2 = Linear(rng, hidden_dim, out_dim)

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(self.lin1(x).relu())


class Adam:
    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            m_hat = self.m[i] / (1 - self.b1 ** self.t)
            v_hat = self.v[i] / (1 - self.b2 ** self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray):
    """Summed token-level NLL.

    logits [B, T, V], targets [B, T] int, mask [B, T] bool.
    Returns (loss_sum Tensor, token_count int).
    """
    b, t, v = logits.shape
    logp = logits.reshape(b * t, v).log_softmax(axis=-1)
    flat_targets = np.asarray(targets, dtype=np.intp).reshape(-1)
    picked = logp[np.arange(b * t), flat_targets]
    weights = Tensor(np.asarray(mask, dtype=np.float64).reshape(-1))
    loss = -(picked * weights).sum()
    return loss, int(mask.sum())
