"""Incremental principal component analysis.

Batch fitting factorizes the centered data directly. Incremental updates
follow the Ross et al. scheme: stack the singular-value-scaled old
components, the centered new batch and one mean-correction row, factorize
that small matrix and keep the leading ``k`` right singular vectors.
"""

import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import FormatError, InvalidInputError
from .numerics import SeededRng, as_matrix, complete_basis, randomized_svd

MAGIC = b"GRPCA1"
DEFAULT_BATCH_SIZE = 256
ZERO_VARIANCE_RTOL = 1e-12  # singular values below this fraction of the largest count as zero


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, D), orthonormal rows
    singular_values: np.ndarray
    n_seen: int
    n_components: int  # requested k; components may hold fewer until enough data arrives

    @property
    def k(self):
        return self.components.shape[0]

    @property
    def n_features(self):
        return self.mean.shape[0]

    def truncate(self, k):
        """Model restricted to its leading ``k`` components (``k = 0`` allowed)."""
        if not 0 <= k <= self.k:
            raise InvalidInputError(f"cannot truncate a {self.k}-component model to {k}")
        return PcaModel(self.mean, self.components[:k].copy(),
                        self.singular_values[:k].copy(), self.n_seen, k)


def _fix_signs(vt):
    # largest-magnitude entry of each component made non-negative
    idx = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vt * signs[:, None]


def _top_right_vectors(a, k, solver, rng):
    if solver == "randomized" and k < min(a.shape):
        _, s, vt = randomized_svd(a, k, rng=rng)
    else:
        _, s, vt = np.linalg.svd(a, full_matrices=False)
        s, vt = s[:k], vt[:k]
    s = s.copy()
    vt = _fix_signs(vt)
    # directions with no variance are arbitrary; pin them with the canonical completion rule
    dead = s <= ZERO_VARIANCE_RTOL * (s[0] if s.size else 0.0)
    if np.any(dead):
        live = np.flatnonzero(~dead)
        basis = complete_basis(vt[live].T, vt.shape[0])
        vt = np.vstack([vt[live], _fix_signs(basis[:, live.size:].T)])
        s = np.concatenate([s[live], np.zeros(int(dead.sum()))])
    return s, vt


def fit_batch(x, k, solver="full", rng=None):
    """Fit ``k`` principal components to all rows of ``x`` at once.

    Parameters
    ----------
    x : array_like, shape (n, D)
    k : int
        Number of components, ``0 <= k <= min(n, D)``.
    solver : {"full", "randomized"}
        ``"randomized"`` uses :func:`gridrep.numerics.randomized_svd`.
    """
    x = as_matrix(x, "x")
    if x.shape[0] < 2:
        raise InvalidInputError("fit_batch needs at least two samples")
    return _fit(x, k, solver, rng)


def _fit(x, k, solver, rng):
    n, d = x.shape
    if n < 1:
        raise InvalidInputError("cannot fit PCA to zero samples")
    if not 0 <= k <= min(n, d):
        raise InvalidInputError(f"k={k} exceeds min(n, D)={min(n, d)}")
    mean = x.sum(axis=0) / n
    s, vt = _top_right_vectors(x - mean, k, solver, rng or SeededRng(0))
    return PcaModel(mean, vt, s, n, k)


def partial_fit(model, x_batch, k=None, solver="full", rng=None):
    """Fold a new batch into ``model`` and return the updated model.

    ``model`` may be ``None`` to start a fresh fit, in which case ``k`` is
    required. While fewer than ``k`` samples have been seen the model keeps
    as many components as the data allows.
    """
    x = as_matrix(x_batch, "x_batch")
    if model is None:
        if k is None:
            raise InvalidInputError("k is required to start an incremental fit")
        return replace(_fit(x, min(k, *x.shape), solver, rng), n_components=k)
    if x.shape[1] != model.n_features:
        raise InvalidInputError(
            f"batch has {x.shape[1]} columns, model expects {model.n_features}")
    k = model.n_components if k is None else k
    n_old = model.n_seen
    n_batch = x.shape[0]
    if n_batch == 0:
        return model
    n_total = n_old + n_batch
    batch_mean = x.sum(axis=0) / n_batch
    mean = (n_old * model.mean + x.sum(axis=0)) / n_total
    correction = np.sqrt(n_old * n_batch / n_total) * (model.mean - batch_mean)
    augmented = np.vstack([
        model.singular_values[:, None] * model.components,
        x - batch_mean,
        correction[None, :],
    ])
    keep = min(k, *augmented.shape)
    s, vt = _top_right_vectors(augmented, keep, solver, rng or SeededRng(0))
    return PcaModel(mean, vt, s, n_total, k)


def fit_incremental(batches, k, solver="full", rng=None):
    model = None
    for batch in batches:
        model = partial_fit(model, batch, k=k, solver=solver, rng=rng)
    if model is None:
        raise InvalidInputError("no batches supplied")
    return model


def transform(model, x):
    x = as_matrix(x, "x")
    if x.shape[1] != model.n_features:
        raise InvalidInputError(f"x has {x.shape[1]} columns, model expects {model.n_features}")
    return (x - model.mean) @ model.components.T


def inverse_transform(model, z):
    z = as_matrix(z, "z")
    if z.shape[1] != model.k:
        raise InvalidInputError(f"z has {z.shape[1]} columns, model has {model.k} components")
    return z @ model.components + model.mean


def reconstruction_rmse(model, x):
    x = as_matrix(x, "x")
    recon = inverse_transform(model, transform(model, x))
    return float(np.sqrt(np.mean((recon - x) ** 2)))


def save(model, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(model))


def to_bytes(model):
    header = MAGIC + struct.pack("<QQQ", model.k, model.n_features, model.n_seen)
    return b"".join([
        header,
        np.ascontiguousarray(model.mean, dtype="<f8").tobytes(),
        np.ascontiguousarray(model.singular_values, dtype="<f8").tobytes(),
        np.ascontiguousarray(model.components, dtype="<f8").tobytes(),
    ])


def from_bytes(blob, source="<bytes>"):
    if blob[:6] != MAGIC:
        raise FormatError(f"{source}: bad magic {blob[:6]!r}, expected {MAGIC!r}")
    if len(blob) < 30:
        raise FormatError(f"{source}: truncated header")
    k, d, n_seen = struct.unpack_from("<QQQ", blob, 6)
    expected = 30 + 8 * (d + k + k * d)
    if len(blob) != expected:
        raise FormatError(f"{source}: payload is {len(blob)} bytes, expected {expected}")
    values = np.frombuffer(blob, dtype="<f8", offset=30).astype(np.float64)
    mean = values[:d].copy()
    sv = values[d:d + k].copy()
    comps = values[d + k:].reshape(k, d).copy()
    return PcaModel(mean, comps, sv, int(n_seen), int(k))


def load(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read(), str(path))


def principal_angle(a, b):
    """Largest principal angle (radians) between the row spaces of ``a`` and ``b``."""
    qa = np.linalg.qr(np.asarray(a, dtype=np.float64).T)[0]
    qb = np.linalg.qr(np.asarray(b, dtype=np.float64).T)[0]
    # sine-based form stays accurate for tiny angles
    residual = qb - qa @ (qa.T @ qb)
    sin_max = np.linalg.norm(residual, 2) if residual.size else 0.0
    return float(np.arcsin(min(1.0, sin_max)))
