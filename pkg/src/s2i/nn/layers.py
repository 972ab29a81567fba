"""Network building blocks on top of the autodiff tensors.

The recurrent cell is implemented as one fused op: the whole
forward/backward pass through time lives in a single closure instead of
unrolling thousands of tape nodes.  Its output is packed as a
(T+1, 2h) array whose last row is the final cell state, so the op stays
single-output; callers slice it apart immediately.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import InputError
from . import tensor as tt
from .tensor import Tensor


def uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 dtype=np.float32, name: str = "linear"):
        self.name = name
        self.w = Tensor(uniform_init(rng, (in_dim, out_dim), in_dim, dtype),
                        requires_grad=True)
        self.b = Tensor(np.zeros(out_dim, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return tt.add(tt.matmul(x, self.w), self.b)

    def params(self):
        return [(f"{self.name}.w", self.w), (f"{self.name}.b", self.b)]


class LayerNorm:
    def __init__(self, dim: int, dtype=np.float32, name: str = "ln"):
        self.name = name
        self.gain = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return tt.layer_norm(x, self.gain, self.bias)

    def params(self):
        return [(f"{self.name}.gain", self.gain), (f"{self.name}.bias", self.bias)]


class Embedding:
    def __init__(self, count: int, dim: int, rng: np.random.Generator,
                 dtype=np.float32, name: str = "emb"):
        self.name = name
        self.table = Tensor(uniform_init(rng, (count, dim), dim, dtype),
                            requires_grad=True)

    def __call__(self, ids) -> Tensor:
        return tt.take(self.table, np.asarray(ids, dtype=np.int64))

    def params(self):
        return [(f"{self.name}.table", self.table)]


# -- LSTM ---------------------------------------------------------------

# gate layout along the 4h axis: [input, forget, output, cell candidate];
# the three sigmoid gates sit together so one expit call covers them all


def _lstm_forward(x: np.ndarray, wx: np.ndarray, wh: np.ndarray, b: np.ndarray):
    t_len = x.shape[0]
    h = wh.shape[0]
    pre = x @ wx + b
    sg = np.empty((t_len, 3 * h), dtype=x.dtype)
    gg = np.empty((t_len, h), dtype=x.dtype)
    cells = np.empty_like(gg)
    tanh_c = np.empty_like(gg)
    outs = np.empty_like(gg)
    h_prev_all = np.empty_like(gg)
    c_prev_all = np.empty_like(gg)
    h_prev = np.zeros(h, dtype=x.dtype)
    c_prev = np.zeros(h, dtype=x.dtype)
    a = np.empty(4 * h, dtype=x.dtype)
    for t in range(t_len):
        h_prev_all[t] = h_prev
        c_prev_all[t] = c_prev
        np.dot(h_prev, wh, out=a)
        a += pre[t]
        expit(a[:3 * h], out=sg[t])
        np.tanh(a[3 * h:], out=gg[t])
        np.multiply(sg[t, h:2 * h], c_prev, out=cells[t])
        cells[t] += sg[t, :h] * gg[t]
        np.tanh(cells[t], out=tanh_c[t])
        np.multiply(sg[t, 2 * h:], tanh_c[t], out=outs[t])
        h_prev = outs[t]
        c_prev = cells[t]
    cache = (sg, gg, tanh_c, h_prev_all, c_prev_all)
    return outs, cells[-1], cache


def _lstm_backward(d_out: np.ndarray, d_final_cell: np.ndarray,
                   x: np.ndarray, wx: np.ndarray, wh: np.ndarray, cache):
    """BPTT for one direction; returns grads for x, wx, wh, b."""
    sg, gg, tanh_c, h_prev_all, c_prev_all = cache
    t_len, h = gg.shape
    gi = sg[:, :h]
    gf = sg[:, h:2 * h]
    go = sg[:, 2 * h:]
    d_pre = np.empty((t_len, 4 * h), dtype=x.dtype)
    wh_t = np.ascontiguousarray(wh.T)
    dh_next = np.zeros(h, dtype=x.dtype)
    dc_next = np.zeros(h, dtype=x.dtype)
    for t in range(t_len - 1, -1, -1):
        dh = d_out[t] + dh_next
        dc = dc_next + dh * go[t] * (1.0 - tanh_c[t] ** 2)
        if t == t_len - 1:
            dc = dc + d_final_cell
        d_pre[t, :h] = dc * gg[t] * gi[t] * (1.0 - gi[t])
        d_pre[t, h:2 * h] = dc * c_prev_all[t] * gf[t] * (1.0 - gf[t])
        d_pre[t, 2 * h:3 * h] = dh * tanh_c[t] * go[t] * (1.0 - go[t])
        d_pre[t, 3 * h:] = dc * gi[t] * (1.0 - gg[t] ** 2)
        dh_next = np.dot(d_pre[t], wh_t, out=dh_next)
        dc_next = dc * gf[t]
    dx = d_pre @ wx.T
    d_wx = x.T @ d_pre
    d_wh = h_prev_all.T @ d_pre
    d_b = d_pre.sum(axis=0)
    return dx, d_wx, d_wh, d_b


class BiLstm:
    """Bidirectional LSTM over a (T, in_dim) sequence.

    forward() returns (outputs (T, 2h), final_cell (2h,)); the final cell
    concatenates the last forward-direction cell with the cell the
    reverse direction reaches at the start of the sequence.
    """

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator,
                 dtype=np.float32, name: str = "bilstm"):
        self.name = name
        self.hidden = hidden

        def gate_bias():
            b = np.zeros(4 * hidden, dtype=dtype)
            b[hidden:2 * hidden] = 1.0  # forget gate starts open
            return b

        self.wx_f = Tensor(uniform_init(rng, (in_dim, 4 * hidden), in_dim, dtype),
                           requires_grad=True)
        self.wh_f = Tensor(uniform_init(rng, (hidden, 4 * hidden), hidden, dtype),
                           requires_grad=True)
        self.b_f = Tensor(gate_bias(), requires_grad=True)
        self.wx_b = Tensor(uniform_init(rng, (in_dim, 4 * hidden), in_dim, dtype),
                           requires_grad=True)
        self.wh_b = Tensor(uniform_init(rng, (hidden, 4 * hidden), hidden, dtype),
                           requires_grad=True)
        self.b_b = Tensor(gate_bias(), requires_grad=True)

    def params(self):
        n = self.name
        return [(f"{n}.wx_f", self.wx_f), (f"{n}.wh_f", self.wh_f),
                (f"{n}.b_f", self.b_f), (f"{n}.wx_b", self.wx_b),
                (f"{n}.wh_b", self.wh_b), (f"{n}.b_b", self.b_b)]

    def forward(self, x: Tensor):
        packed = self._packed(x)
        t_len = x.value.shape[0]
        return packed[:t_len], packed[t_len]

    def _packed(self, x: Tensor) -> Tensor:
        xv = x.value
        if xv.ndim != 2 or xv.shape[0] < 1:
            raise InputError("BiLstm expects a non-empty (T, d) input")
        t_len = xv.shape[0]
        h = self.hidden
        xr = xv[::-1].copy()
        out_f, cf, cache_f = _lstm_forward(xv, self.wx_f.value, self.wh_f.value,
                                           self.b_f.value)
        out_b, cb, cache_b = _lstm_forward(xr, self.wx_b.value, self.wh_b.value,
                                           self.b_b.value)
        packed = np.empty((t_len + 1, 2 * h), dtype=xv.dtype)
        packed[:t_len, :h] = out_f
        packed[:t_len, h:] = out_b[::-1]
        packed[t_len, :h] = cf
        packed[t_len, h:] = cb
        parents = (x, self.wx_f, self.wh_f, self.b_f,
                   self.wx_b, self.wh_b, self.b_b)
        out = tt._make(packed, parents, None)
        if out._parents == ():
            return out

        def bw(g):
            d_out = g[:t_len]
            d_final = g[t_len]
            dx_f, dwx_f, dwh_f, db_f = _lstm_backward(
                d_out[:, :h], d_final[:h], xv,
                self.wx_f.value, self.wh_f.value, cache_f)
            dx_b, dwx_b, dwh_b, db_b = _lstm_backward(
                d_out[:, h:][::-1], d_final[h:], xr,
                self.wx_b.value, self.wh_b.value, cache_b)
            tt._accum(x, dx_f + dx_b[::-1])
            tt._accum(self.wx_f, dwx_f)
            tt._accum(self.wh_f, dwh_f)
            tt._accum(self.b_f, db_f)
            tt._accum(self.wx_b, dwx_b)
            tt._accum(self.wh_b, dwh_b)
            tt._accum(self.b_b, db_b)

        out._backward = bw
        return out


class Mha:
    """Multi-head scaled dot-product attention over (T, model_dim) rows."""

    def __init__(self, model_dim: int, n_heads: int, rng: np.random.Generator,
                 dtype=np.float32, name: str = "mha"):
        if model_dim % n_heads != 0:
            raise InputError("model_dim must divide evenly across heads")
        self.name = name
        self.n_heads = n_heads
        self.head_dim = model_dim // n_heads
        self.wq = Linear(model_dim, model_dim, rng, dtype, f"{name}.q")
        self.wk = Linear(model_dim, model_dim, rng, dtype, f"{name}.k")
        self.wv = Linear(model_dim, model_dim, rng, dtype, f"{name}.v")
        self.wo = Linear(model_dim, model_dim, rng, dtype, f"{name}.out")

    def params(self):
        out = []
        for lin in (self.wq, self.wk, self.wv, self.wo):
            out.extend(lin.params())
        return out

    def __call__(self, query: Tensor, keys: Tensor, values: Tensor,
                 mask: np.ndarray | None = None) -> Tensor:
        q = self.wq(query)
        k = self.wk(keys)
        v = self.wv(values)
        dh = self.head_dim
        scale = 1.0 / np.sqrt(dh)
        heads = []
        for i in range(self.n_heads):
            sl = slice(i * dh, (i + 1) * dh)
            qh = q[:, sl]
            kh = k[:, sl]
            vh = v[:, sl]
            scores = tt.mul(tt.matmul(qh, tt.transpose(kh)), scale)
            if mask is not None:
                scores = tt.add(scores, mask)
            attn = tt.softmax(scores, axis=-1)
            heads.append(tt.matmul(attn, vh))
        return self.wo(tt.concat(heads, axis=1))


def causal_mask(t_len: int, dtype=np.float32) -> np.ndarray:
    """Additive mask blocking attention to future positions."""
    m = np.zeros((t_len, t_len), dtype=dtype)
    m[np.triu_indices(t_len, k=1)] = -1e9
    return m
