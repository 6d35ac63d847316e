"""Doubly block circulant structure of wrap-around convolutions.

A conv layer with stride 1 and wrap-around padding is the linear map
``vec(Y) = W vec(X)`` where W is built from per-channel-pair doubly block
circulant blocks.  This module constructs the padded kernel, the blocks,
the full map, and computes the map's spectral norm frequency-by-frequency
through the DFT instead of touching the p^2 d x p^2 d matrix.

Index conventions (pinned by tests in tests/test_circulant.py):

* feature maps are (d, p, p) tensors flattened in C order (channel-major,
  then rows, then columns within a channel);
* wrap-around uses the 1-based modulo where k % n maps to n when n
  divides k (:func:`wrap_index`); in 0-based array code this is plain
  ``% p`` on the shifted index.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "wrap_index",
    "as_conv_tensor",
    "pad_kernel",
    "circ",
    "build_block",
    "build_full_map",
    "spectral_norm_via_dft",
    "conv2d_wrap",
    "flatten_maps",
    "unflatten_maps",
]


def wrap_index(k: int, n: int) -> int:
    """1-based wrap-around index: k % n, except n (not 0) when n divides k."""
    r = k % n
    return n if r == 0 else r


def as_conv_tensor(data) -> np.ndarray:
    """Validate a (out_channels, in_channels, q, q) filter bank."""
    f = np.asarray(data, dtype=np.float64)
    if f.ndim != 4:
        raise ValueError(f"conv tensor must be 4-d, got ndim={f.ndim}")
    if f.shape[2] != f.shape[3] or f.shape[2] < 1:
        raise ValueError(f"kernels must be square and nonempty, got {f.shape[2:]}")
    if not np.all(np.isfinite(f)):
        raise ValueError("conv tensor entries must be finite")
    return f


def pad_kernel(f, p: int) -> np.ndarray:
    """Embed each q x q kernel into the top-left corner of a p x p zero slice."""
    f = as_conv_tensor(f)
    q = f.shape[2]
    if p <= q:
        raise ValueError(f"need p > q, got p={p}, q={q}")
    d_out, d_in = f.shape[:2]
    k = np.zeros((d_out, d_in, p, p))
    k[:, :, :q, :q] = f
    return k


def circ(a) -> np.ndarray:
    """Circulant matrix of a vector: row i is a right-rotated by i positions."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.size < 1:
        raise ValueError("circ expects a nonempty vector")
    n = a.size
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return a[idx]


def _block_index_grid(p: int) -> np.ndarray:
    # grid[i, j] selects the kernel slot feeding position (i, j) of a
    # circulant level: the offset (j - i) mod p
    r = np.arange(p)
    return (r[None, :] - r[:, None]) % p


def build_block(k, s: int, t: int) -> np.ndarray:
    """The p^2 x p^2 doubly block circulant block for channel pair (s, t).

    Block row I, block column J holds circ of kernel row (J - I) mod p;
    channel indices are 0-based.
    """
    k = np.asarray(k, dtype=np.float64)
    d_out, d_in, p, _ = k.shape
    if not (0 <= s < d_out and 0 <= t < d_in):
        raise ValueError(f"channel indices ({s}, {t}) out of range for {d_out}x{d_in}")
    g = _block_index_grid(p)
    slab = k[s, t]
    # b4[I, J, i, j] = slab[(J-I) % p, (j-i) % p]
    b4 = slab[g[:, :, None, None], g[None, None, :, :]]
    return b4.transpose(0, 2, 1, 3).reshape(p * p, p * p)


def build_full_map(k) -> np.ndarray:
    """Assemble the full (p^2 d_out) x (p^2 d_in) linear map of a wrap-around
    conv layer from its padded kernel; satisfies
    ``flatten_maps(conv2d_wrap(x, f)) == W @ flatten_maps(x)``."""
    k = np.asarray(k, dtype=np.float64)
    d_out, d_in, p, _ = k.shape
    g = _block_index_grid(p)
    # w6[s, t, I, J, i, j] = k[s, t, (J-I) % p, (j-i) % p]
    w6 = k[:, :, g[:, :, None, None], g[None, None, :, :]]
    return w6.transpose(0, 2, 4, 1, 3, 5).reshape(d_out * p * p, d_in * p * p)


def spectral_norm_via_dft(k) -> float:
    """Spectral norm of the conv map as the max over frequency pairs (u, v)
    of the largest singular value of the d_out x d_in matrix

        P(u, v)[s, t] = sum_{i,j} omega^(u i) k[s, t, i, j] omega^(v j),

    with omega = exp(2 pi sqrt(-1) / p) and 1-based u, v, i, j.
    """
    k = np.asarray(k, dtype=np.float64)
    d_out, d_in, p, _ = k.shape
    # g[s, t, u', v'] = sum_{i0, j0} omega^(u' i0 + v' j0) k[s, t, i0, j0]
    g = np.fft.ifft2(k, axes=(2, 3)) * (p * p)
    res = np.arange(1, p + 1) % p  # 1-based frequency -> 0-based residue
    phase = np.exp(2j * np.pi * np.arange(1, p + 1) / p)
    blocks = g.transpose(2, 3, 0, 1)[res][:, res]  # [u, v, s, t]
    blocks = blocks * (phase[:, None] * phase[None, :])[:, :, None, None]
    sv = np.linalg.svd(blocks.reshape(p * p, d_out, d_in), compute_uv=False)
    return float(sv[:, 0].max()) if sv.size else 0.0


def conv2d_wrap(x, f, method: str = "fft") -> np.ndarray:
    """Wrap-around convolution of feature maps.

    x has shape (..., d_in, p, p), f is (d_out, d_in, q, q) with q <= p.
    Output entry (s, a, b) is sum over (t, i, j) of
    x[t, (a + i) % p, (b + j) % p] * f[s, t, i, j] in 0-based indices,
    matching the 1-based definition through :func:`wrap_index`.

    method "fft" uses the circular cross-correlation theorem; "direct"
    accumulates the q^2 rolled products. Both paths are pinned against the
    explicit matrix route in the tests.
    """
    x = np.asarray(x, dtype=np.float64)
    f = as_conv_tensor(f)
    d_out, d_in, q, _ = f.shape
    if x.ndim < 3 or x.shape[-3] != d_in or x.shape[-1] != x.shape[-2]:
        raise ValueError(f"feature maps of shape {x.shape} do not match {d_in} input channels")
    p = x.shape[-1]
    if q > p:
        raise ValueError(f"kernel size {q} exceeds spatial size {p}")
    if method == "direct":
        out = np.zeros(x.shape[:-3] + (d_out, p, p))
        for i in range(q):
            for j in range(q):
                rolled = np.roll(x, shift=(-i, -j), axis=(-2, -1))
                out += np.einsum("st,...tab->...sab", f[:, :, i, j], rolled)
        return out
    if method != "fft":
        raise ValueError(f"unknown method {method!r}")
    kpad = np.zeros((d_out, d_in, p, p))
    kpad[:, :, :q, :q] = f
    xhat = np.fft.rfft2(x, axes=(-2, -1))
    khat = np.fft.rfft2(kpad, axes=(-2, -1)).conj()
    yhat = np.einsum("...tuv,stuv->...suv", xhat, khat, optimize=True)
    return np.fft.irfft2(yhat, s=(p, p), axes=(-2, -1))


def flatten_maps(x) -> np.ndarray:
    """C-order flattening of (..., d, p, p) feature maps to (..., d p^2)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 3:
        raise ValueError("expected (..., d, p, p) feature maps")
    return x.reshape(x.shape[:-3] + (-1,))


def unflatten_maps(v, d: int, p: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != d * p * p:
        raise ValueError(f"cannot reshape length {v.shape[-1]} into ({d}, {p}, {p})")
    return v.reshape(v.shape[:-1] + (d, p, p))
