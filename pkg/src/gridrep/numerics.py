"""Dense matrix kernels, seeded random streams and SVD solvers.

Matrices are plain 2-D ``float64`` numpy arrays. Constructors widen
32-bit input and reject NaN/Inf, so every routine below may assume finite
64-bit data.
"""

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "SeededRng",
    "SvdResult",
    "as_matrix",
    "column_means",
    "exact_svd",
    "matmul",
    "qr_orthonormalize",
    "randomized_svd",
    "transpose",
]

RNG_ALGORITHM = "philox4x64-10/numpy-v1"


class SeededRng:
    """Deterministic random stream keyed by a 64-bit seed.

    Backed by the Philox 4x64-10 counter-based generator, whose output is
    defined bit-for-bit independent of platform. Child streams derived with
    :meth:`child` are keyed by ``(seed, key)`` and never overlap the parent.
    """

    algorithm = RNG_ALGORITHM

    def __init__(self, seed=0, key=()):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.key = tuple(int(k) for k in key)
        entropy = np.random.SeedSequence(seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.Philox(entropy))

    def child(self, *key):
        return SeededRng(self.seed, self.key + tuple(key))

    def normal(self, size):
        return self._gen.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, key={self.key})"


class SvdResult:
    """Thin SVD ``a = u @ diag(singular_values) @ vt``."""

    __slots__ = ("u", "singular_values", "vt")

    def __init__(self, u, singular_values, vt):
        self.u = u
        self.singular_values = singular_values
        self.vt = vt

    def __iter__(self):
        return iter((self.u, self.singular_values, self.vt))

    def reconstruct(self):
        return (self.u * self.singular_values) @ self.vt


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float64 array (copying only if needed)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return arr


def matmul(a, b):
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise InvalidInputError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a):
    return np.ascontiguousarray(as_matrix(a).T)


def column_means(a):
    a = as_matrix(a)
    if a.shape[0] == 0:
        raise InvalidInputError("column_means of a matrix with no rows")
    return a.sum(axis=0) / a.shape[0]


def _project_out(q, v):
    # two passes of classical Gram-Schmidt ("twice is enough")
    for _ in range(2):
        v = v - q @ (q.T @ v)
    return v


def _canonical_completion(q, start):
    m = q.shape[0]
    best = None
    for i in range(start, m):
        e = np.zeros(m)
        e[i] = 1.0
        v = _project_out(q, e)
        norm = np.linalg.norm(v)
        if norm >= 0.5:
            return v, norm, i + 1
        if best is None or norm > best[1]:
            best = (v, norm, i + 1)
    # late in the basis no candidate may reach 1/2; the largest residual is then used
    for i in range(start):
        e = np.zeros(m)
        e[i] = 1.0
        v = _project_out(q, e)
        norm = np.linalg.norm(v)
        if best is None or norm > best[1]:
            best = (v, norm, start)
    return best


def qr_orthonormalize(a, rtol=1e-10):
    """Orthonormal basis for the column space of ``a`` (rows >= cols).

    Columns whose residual after projection falls below ``rtol`` times the
    largest input column norm are rank-deficient. Each is replaced by the
    first canonical basis vector e_0, e_1, ... that keeps a residual of at
    least 1/2 after orthogonalizing against the columns accepted so far;
    when none does, the canonical vector with the largest residual (lowest
    index on ties) is used.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        raise InvalidInputError(f"qr_orthonormalize needs rows >= cols, got {a.shape}")
    q = np.zeros((m, n))
    scale = float(np.max(np.linalg.norm(a, axis=0))) if n else 0.0
    next_basis = 0
    for j in range(n):
        v = _project_out(q[:, :j], a[:, j].copy())
        norm = np.linalg.norm(v)
        if norm <= rtol * scale or norm == 0.0:
            v, norm, next_basis = _canonical_completion(q[:, :j], next_basis)
        q[:, j] = v / norm
    return q


def _round_robin(n):
    """Rounds of disjoint column pairs covering every pair once (circle method)."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0]
        rounds.append((np.array([p for p, _ in pairs], dtype=np.intp),
                       np.array([q for _, q in pairs], dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi_tall(a, max_sweeps):
    """One-sided (Hestenes) Jacobi on a tall matrix; returns (w, v) with w = a @ v.

    Each round rotates a set of disjoint column pairs at once.
    """
    n = a.shape[1]
    w = a.copy()
    v = np.eye(n)
    eps = np.finfo(np.float64).eps
    rounds = _round_robin(n)
    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            if p.size == 0:
                continue
            wp = w[:, p]
            wq = w[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            active = (gamma != 0.0) & (np.abs(gamma) > eps * np.sqrt(alpha * beta))
            if not np.any(active):
                continue
            rotated = True
            p, q = p[active], q[active]
            wp, wq = wp[:, active], wq[:, active]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.copysign(1.0, zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            w[:, p] = c * wp - s * wq
            w[:, q] = s * wp + c * wq
            vp = v[:, p]
            vq = v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        if not rotated:
            break
    return w, v


def exact_svd(a, max_sweeps=60):
    """Full-accuracy thin SVD by one-sided Jacobi rotations.

    Returns ``k = min(rows, cols)`` triplets with singular values sorted
    non-increasing. Left vectors belonging to (numerically) zero singular
    values are completed with :func:`qr_orthonormalize`'s basis rule so that
    ``u`` always has orthonormal columns.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m == 0 or n == 0:
        raise InvalidInputError(f"exact_svd of an empty matrix {a.shape}")
    flipped = m < n
    work = a.T if flipped else a
    w, v = _jacobi_tall(work, max_sweeps)
    sigma = np.linalg.norm(w, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    w = w[:, order]
    v = v[:, order]
    cutoff = max(work.shape) * np.finfo(np.float64).eps * (sigma[0] if sigma.size else 0.0)
    u = np.zeros_like(w)
    live = sigma > cutoff
    u[:, live] = w[:, live] / sigma[live]
    if not np.all(live):
        u = complete_basis(u[:, live], work.shape[1])
    if flipped:
        return SvdResult(v, sigma, np.ascontiguousarray(u.T))
    return SvdResult(u, sigma, np.ascontiguousarray(v.T))


def complete_basis(q, total):
    """Extend orthonormal columns ``q`` to ``total`` columns by the canonical rule."""
    padded = np.hstack([q, np.zeros((q.shape[0], total - q.shape[1]))])
    out = qr_orthonormalize(padded)
    out[:, : q.shape[1]] = q
    return out


def randomized_svd(a, k, oversample=10, power_iters=2, rng=None):
    """Rank-``k`` SVD from a Gaussian range finder with subspace iteration.

    The sketch ``A @ Omega`` with ``k + oversample`` columns is
    re-orthonormalized after every multiplication by ``A`` or ``A.T``; the
    projected matrix ``Q.T @ A`` is factorized densely.
    """
    a = as_matrix(a)
    m, n = a.shape
    k = int(k)
    if k < 0 or k > min(m, n):
        raise InvalidInputError(f"k={k} outside [0, {min(m, n)}] for a {a.shape} matrix")
    if oversample < 0 or power_iters < 0:
        raise InvalidInputError("oversample and power_iters must be non-negative")
    if k == 0:
        return SvdResult(np.zeros((m, 0)), np.zeros(0), np.zeros((0, n)))
    rng = rng if rng is not None else SeededRng(0)
    width = min(k + int(oversample), min(m, n))
    omega = rng.normal((n, width))
    q = qr_orthonormalize(a @ omega)
    for _ in range(int(power_iters)):
        z = qr_orthonormalize(a.T @ q)
        q = qr_orthonormalize(a @ z)
    b = q.T @ a
    ub, s, vt = np.linalg.svd(b, full_matrices=False)
    return SvdResult(q @ ub[:, :k], s[:k].copy(), vt[:k].copy())
