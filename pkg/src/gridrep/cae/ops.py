"""Array kernels for the autoencoder, each paired with its reverse pass.

Tensors are ``(batch, channels, height, width)`` float64 arrays. Convolution
weights use ``(out_ch, in_ch, kh, kw)``; transposed-convolution weights use
``(in_ch, out_ch, kh, kw)``, i.e. the same array as the conv2d it inverts, so
``conv_transpose2d(y, w)`` is the exact adjoint of ``conv2d(x, w)``.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InvalidInputError


def conv_output_size(size, kernel, stride, padding):
    return (size + 2 * padding - kernel) // stride + 1


def conv_transpose_output_size(size, kernel, stride, padding, output_padding=0):
    return (size - 1) * stride - 2 * padding + kernel + output_padding


def _im2col(x, kh, kw, stride, padding):
    n, c, h, w = x.shape
    ho = conv_output_size(h, kh, stride, padding)
    wo = conv_output_size(w, kw, stride, padding)
    if ho < 1 or wo < 1:
        raise InvalidInputError(f"kernel {kh}x{kw} does not fit a {h}x{w} input")
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    return cols, ho, wo


def _col2im(cols, shape, kh, kw, stride, padding, ho, wo):
    """Scatter-add ``(n*ho*wo, c*kh*kw)`` patches back onto an image of ``shape``."""
    n, c, h, w = shape
    hp = max(h + 2 * padding, (ho - 1) * stride + kh)
    wp = max(w + 2 * padding, (wo - 1) * stride + kw)
    out = np.zeros((n, c, hp, wp))
    patches = np.ascontiguousarray(cols.reshape(n, ho, wo, c, kh, kw).transpose(4, 5, 0, 3, 1, 2))
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += patches[i, j]
    return out[:, :, padding:padding + h, padding:padding + w]


def conv2d(x, w, b=None, stride=1, padding=0):
    """Cross-correlation; returns ``(out, cache)`` for :func:`conv2d_backward`."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise InvalidInputError(f"conv2d expects a 4-D tensor, got shape {x.shape}")
    o, c, kh, kw = w.shape
    if x.shape[1] != c:
        raise InvalidInputError(f"kernel expects {c} input channels, tensor has {x.shape[1]}")
    cols, ho, wo = _im2col(x, kh, kw, stride, padding)
    out = cols @ w.reshape(o, -1).T
    if b is not None:
        out += b
    out = out.reshape(x.shape[0], ho, wo, o).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out), (x.shape, cols, w, stride, padding, ho, wo)


def conv2d_backward(dout, cache):
    """Gradients ``(dx, dw, db)`` of a conv2d given the upstream gradient."""
    shape, cols, w, stride, padding, ho, wo = cache
    o, c, kh, kw = w.shape
    dflat = dout.transpose(0, 2, 3, 1).reshape(-1, o)
    dw = (dflat.T @ cols).reshape(w.shape)
    db = dflat.sum(axis=0)
    dcols = dflat @ w.reshape(o, -1)
    dx = _col2im(dcols, shape, kh, kw, stride, padding, ho, wo)
    return np.ascontiguousarray(dx), dw, db


def conv_transpose2d(y, w, b=None, stride=1, padding=0, output_padding=0):
    """Adjoint of :func:`conv2d` with the same weight array ``(in, out, kh, kw)``."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 4:
        raise InvalidInputError(f"conv_transpose2d expects a 4-D tensor, got shape {y.shape}")
    cin, cout, kh, kw = w.shape
    if y.shape[1] != cin:
        raise InvalidInputError(f"kernel expects {cin} input channels, tensor has {y.shape[1]}")
    n, _, h, wd = y.shape
    ho = conv_transpose_output_size(h, kh, stride, padding, output_padding)
    wo = conv_transpose_output_size(wd, kw, stride, padding, output_padding)
    if ho < 1 or wo < 1:
        raise InvalidInputError("conv_transpose2d output would be empty")
    yflat = y.transpose(0, 2, 3, 1).reshape(-1, cin)
    cols = yflat @ w.reshape(cin, -1)
    out = _col2im(cols, (n, cout, ho, wo), kh, kw, stride, padding, h, wd)
    if b is not None:
        out = out + b[None, :, None, None]
    return np.ascontiguousarray(out), (y.shape, yflat, w, stride, padding)


def conv_transpose2d_backward(dout, cache):
    shape, yflat, w, stride, padding = cache
    cin, cout, kh, kw = w.shape
    n, _, h, wd = shape
    dcols, _, _ = _im2col(dout, kh, kw, stride, padding)
    # dout may be larger than the conv footprint when output_padding > 0
    dcols = dcols.reshape(n, -1, cout * kh * kw)
    ho_full = conv_output_size(dout.shape[2], kh, stride, padding)
    wo_full = conv_output_size(dout.shape[3], kw, stride, padding)
    dcols = dcols.reshape(n, ho_full, wo_full, -1)[:, :h, :wd].reshape(-1, cout * kh * kw)
    dyflat = dcols @ w.reshape(cin, -1).T
    dw = (yflat.T @ dcols).reshape(w.shape)
    db = dout.sum(axis=(0, 2, 3))
    dy = dyflat.reshape(n, h, wd, cin).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(dy), dw, db


def rmse_loss(xhat, x):
    """Root-mean-squared error and its gradient with respect to ``xhat``.

    The gradient at exactly zero loss is defined as zero.
    """
    xhat = np.asarray(xhat, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if xhat.shape != x.shape:
        raise InvalidInputError(f"shape mismatch {xhat.shape} vs {x.shape}")
    diff = xhat - x
    loss = float(np.sqrt(np.mean(diff * diff))) if diff.size else 0.0
    if loss == 0.0:
        return loss, np.zeros_like(diff)
    return loss, diff / (diff.size * loss)


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
