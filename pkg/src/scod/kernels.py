"""Hot kernels for dense feedforward networks.

Two kernels dominate both the offline sketch pass and online scoring: a
batched forward pass and a batched multi-cotangent backward pass that
produces one weight-space gradient per (input, cotangent column). Each has a
numba implementation (per-sample loops over flat buffers) and a numpy
implementation (batched einsum). ``forward_batch`` and ``vjp_batch``
dispatch on ``scod._accel.USE_NUMBA``.

Weight layout: for each layer, the ``(n_out, n_in)`` weight matrix in
row-major order followed by the ``n_out`` bias vector.

Activation codes: 0 = relu, 1 = tanh. The output layer is always affine.
"""
import numpy as np

from . import _accel
from ._accel import njit

RELU = 0
TANH = 1


# ---------------------------------------------------------------- numba path


@njit(cache=True)
def _act_inplace(buf, n, act):
    for i in range(n):
        v = buf[i]
        if act == 0:
            buf[i] = v if v > 0.0 else 0.0
        else:
            buf[i] = np.tanh(v)


@njit(cache=True)
def _forward_sample(sizes, act, w, x, acts, offsets):
    # acts holds every layer's post-activation, input first; the last slot is
    # the affine output.
    n_layers = sizes.shape[0] - 1
    for i in range(sizes[0]):
        acts[i] = x[i]
    off = 0
    for l in range(n_layers):
        nin = sizes[l]
        nout = sizes[l + 1]
        hin = offsets[l]
        hout = offsets[l + 1]
        boff = off + nin * nout
        for o in range(nout):
            acc = w[boff + o]
            row = off + o * nin
            for i in range(nin):
                acc += w[row + i] * acts[hin + i]
            acts[hout + o] = acc
        if l < n_layers - 1:
            _act_inplace(acts[hout:hout + nout], nout, act)
        off = boff + nout


@njit(cache=True)
def _layout(sizes):
    n_layers = sizes.shape[0] - 1
    offsets = np.zeros(n_layers + 2, dtype=np.int64)
    for l in range(n_layers + 1):
        offsets[l + 1] = offsets[l] + sizes[l]
    woffs = np.zeros(n_layers + 1, dtype=np.int64)
    for l in range(n_layers):
        woffs[l + 1] = woffs[l] + sizes[l] * sizes[l + 1] + sizes[l + 1]
    return offsets, woffs


@njit(cache=True)
def forward_batch_numba(sizes, act, w, X):
    n_layers = sizes.shape[0] - 1
    B = X.shape[0]
    d = sizes[n_layers]
    offsets, _ = _layout(sizes)
    acts = np.empty(offsets[n_layers + 1])
    out = np.empty((B, d))
    for b in range(B):
        _forward_sample(sizes, act, w, X[b], acts, offsets)
        base = offsets[n_layers]
        for j in range(d):
            out[b, j] = acts[base + j]
    return out


@njit(cache=True)
def vjp_batch_numba(sizes, act, w, X, V):
    n_layers = sizes.shape[0] - 1
    B = X.shape[0]
    c = V.shape[2]
    N = w.shape[0]
    offsets, woffs = _layout(sizes)
    maxw = 0
    for l in range(n_layers + 1):
        if sizes[l] > maxw:
            maxw = sizes[l]
    acts = np.empty(offsets[n_layers + 1])
    delta = np.empty((maxw, c))
    prev = np.empty((maxw, c))
    out = np.zeros((B, N, c))
    for b in range(B):
        _forward_sample(sizes, act, w, X[b], acts, offsets)
        nout = sizes[n_layers]
        for o in range(nout):
            for j in range(c):
                delta[o, j] = V[b, o, j]
        for l in range(n_layers - 1, -1, -1):
            nin = sizes[l]
            nout = sizes[l + 1]
            off = woffs[l]
            boff = off + nin * nout
            hin = offsets[l]
            for o in range(nout):
                row = off + o * nin
                for i in range(nin):
                    h = acts[hin + i]
                    for j in range(c):
                        out[b, row + i, j] = delta[o, j] * h
                for j in range(c):
                    out[b, boff + o, j] = delta[o, j]
            if l > 0:
                for i in range(nin):
                    h = acts[hin + i]
                    if act == 0:
                        gate = 1.0 if h > 0.0 else 0.0
                    else:
                        gate = 1.0 - h * h
                    for j in range(c):
                        acc = 0.0
                        for o in range(nout):
                            acc += w[off + o * nin + i] * delta[o, j]
                        prev[i, j] = acc * gate
                for i in range(nin):
                    for j in range(c):
                        delta[i, j] = prev[i, j]
    return out


# ---------------------------------------------------------------- numpy path


def _layers(sizes, w):
    off = 0
    for nin, nout in zip(sizes[:-1], sizes[1:]):
        W = w[off:off + nin * nout].reshape(nout, nin)
        off += nin * nout
        b = w[off:off + nout]
        off += nout
        yield W, b


def _hidden_act(z, act):
    return np.maximum(z, 0.0) if act == RELU else np.tanh(z)


def _forward_all(sizes, act, w, X):
    hs = [X]
    layers = list(_layers(sizes, w))
    h = X
    for l, (W, b) in enumerate(layers):
        z = h @ W.T + b
        h = z if l == len(layers) - 1 else _hidden_act(z, act)
        hs.append(h)
    return hs, layers


def forward_batch_numpy(sizes, act, w, X):
    hs, _ = _forward_all(sizes, act, w, X)
    return hs[-1]


def vjp_batch_numpy(sizes, act, w, X, V):
    hs, layers = _forward_all(sizes, act, w, X)
    B, c = X.shape[0], V.shape[2]
    out = np.empty((B, w.shape[0], c))
    offs = np.cumsum([0] + [W.size + b.size for W, b in layers])
    delta = V
    for l in range(len(layers) - 1, -1, -1):
        W, b = layers[l]
        h = hs[l]
        off = offs[l]
        gW = np.einsum("boc,bi->boic", delta, h)
        out[:, off:off + W.size, :] = gW.reshape(B, W.size, c)
        out[:, off + W.size:off + W.size + b.size, :] = delta
        if l > 0:
            gate = (h > 0.0).astype(float) if act == RELU else 1.0 - h * h
            delta = np.einsum("oi,boc->bic", W, delta) * gate[:, :, None]
    return out


# ------------------------------------------------------------------ dispatch


def forward_batch(sizes, act, w, X):
    """Network outputs for a batch ``X`` of shape ``(B, n_in)`` -> ``(B, d)``."""
    if _accel.USE_NUMBA:
        return forward_batch_numba(sizes, act, w, X)
    return forward_batch_numpy(sizes, act, w, X)


def vjp_batch(sizes, act, w, X, V):
    """Per-sample vector-Jacobian products.

    ``V`` has shape ``(B, d, c)``; the result has shape ``(B, N, c)`` with
    ``out[b, :, j] = J_b^T V[b, :, j]`` where ``J_b`` is the output Jacobian
    with respect to the weights at input ``X[b]``.
    """
    if _accel.USE_NUMBA:
        return vjp_batch_numba(sizes, act, w, X, V)
    return vjp_batch_numpy(sizes, act, w, X, V)
