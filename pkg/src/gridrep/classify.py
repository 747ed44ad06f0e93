"""Logistic regression by IRLS, Wald statistics and k-fold cross-validation."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabelsError, InvalidInputError
from .numerics import SeededRng, as_matrix
from .verify.metrics import ContingencyTable, sum_tables, tabulate

Z_95 = 1.959964
CONSTANT_VARIANCE = 1e-12
# separation cap on the coefficient norm in standardized units (|beta_j| * sd_j)
SEPARATION_CAP = 50.0


@dataclass(frozen=True)
class GlmFit:
    """Intercept-first coefficient vector with Wald statistics.

    Dropped (constant) features carry coefficient 0 and standard error 0
    with ``z`` and ``p`` NaN, which the significance table prints as NA.
    """

    coefficients: np.ndarray
    std_errors: np.ndarray
    z_scores: np.ndarray
    p_values: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    dropped: tuple
    converged: bool
    iterations: int
    separated: bool = False
    ridge: float = 0.0
    log_likelihood_trace: tuple = field(default=(), repr=False)

    @property
    def n_features(self):
        return self.coefficients.shape[0] - 1


def _sigmoid(eta):
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _objective(X, y, beta, penalty):
    eta = X @ beta
    # log(1 + e^eta) computed stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)) - 0.5 * np.sum(penalty * beta * beta))


def normal_sf2(z):
    """Two-sided normal tail probability ``2 * (1 - Phi(|z|))`` via ``erfc``."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def fit_logistic(x, y, ridge=0.0, max_iter=100, tol=1e-10):
    """Maximize the (ridge-penalized) Bernoulli log-likelihood by IRLS.

    Newton steps are halved until the penalized objective does not
    decrease. Iteration stops at ``tol`` relative objective change, after
    ``max_iter`` steps (``converged=False``), or when the standardized
    coefficient norm passes ``SEPARATION_CAP`` (``separated=True``).
    Standard errors come from the inverse of ``X'WX + ridge*P`` with the
    intercept unpenalized.
    """
    x = as_matrix(x, "x")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n, d = x.shape
    if y.shape[0] != n:
        raise InvalidInputError(f"x has {n} rows, y has {y.shape[0]} entries")
    if not np.all((y == 0) | (y == 1)):
        raise InvalidInputError("y must be binary 0/1")
    if n == 0 or y.min() == y.max():
        raise DegenerateLabelsError("labels contain a single class")
    if ridge < 0:
        raise InvalidInputError("ridge must be non-negative")

    sd = x.std(axis=0) if d else np.zeros(0)
    dropped = tuple(int(j) for j in np.flatnonzero(sd * sd < CONSTANT_VARIANCE))
    keep = np.array([j for j in range(d) if j not in set(dropped)], dtype=np.intp)
    X = np.hstack([np.ones((n, 1)), x[:, keep]])
    penalty = np.full(X.shape[1], float(ridge))
    penalty[0] = 0.0
    scale = np.concatenate([[0.0], sd[keep]])

    beta = np.zeros(X.shape[1])
    obj = _objective(X, y, beta, penalty)
    trace = [obj]
    converged = separated = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        p = _sigmoid(X @ beta)
        w = np.maximum(p * (1.0 - p), 1e-12)
        grad = X.T @ (y - p) - penalty * beta
        hess = (X * w[:, None]).T @ X + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        for _ in range(40):
            candidate = beta + t * step
            new_obj = _objective(X, y, candidate, penalty)
            if new_obj >= obj:
                break
            t *= 0.5
        else:
            converged = True  # no ascent direction left
            break
        change = new_obj - obj
        beta, obj = candidate, new_obj
        trace.append(obj)
        if np.linalg.norm(beta * scale) > SEPARATION_CAP:
            separated = True
            break
        if change <= tol * (abs(obj) + tol):
            converged = True
            break

    p = _sigmoid(X @ beta)
    w = np.maximum(p * (1.0 - p), 1e-12)
    info = (X * w[:, None]).T @ X + np.diag(penalty)
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info)
    se_kept = np.sqrt(np.maximum(np.diag(cov), 0.0))

    coef = np.zeros(d + 1)
    se = np.zeros(d + 1)
    slots = np.concatenate([[0], keep + 1])
    coef[slots] = beta
    se[slots] = se_kept
    z = np.full(d + 1, np.nan)
    pv = np.full(d + 1, np.nan)
    live = se > 0
    z[live] = coef[live] / se[live]
    pv[live] = [normal_sf2(v) for v in z[live]]
    return GlmFit(coef, se, z, pv, coef - Z_95 * se, coef + Z_95 * se, dropped, converged,
                  iterations, separated, float(ridge), tuple(trace))


def predict_proba(fit, x):
    x = as_matrix(x, "x")
    if x.shape[1] != fit.n_features:
        raise InvalidInputError(f"x has {x.shape[1]} columns, fit expects {fit.n_features}")
    return _sigmoid(fit.coefficients[0] + x @ fit.coefficients[1:])


def classify(probs, threshold=0.5):
    """Binary decisions, 1 where ``prob >= threshold`` (boundary inclusive)."""
    return (np.asarray(probs, dtype=np.float64) >= threshold).astype(np.int64)


def significance_table(fit, feature_names=None, include_intercept=False):
    """Rows ``(feature, coefficient, std_error, z, p, ci_low, ci_high)``; NaN marks NA."""
    names = list(feature_names) if feature_names is not None else [
        str(j) for j in range(fit.n_features)]
    if len(names) != fit.n_features:
        raise InvalidInputError(f"{len(names)} names for {fit.n_features} features")
    idx = list(range(1, fit.n_features + 1))
    if include_intercept:
        names = ["intercept"] + names
        idx = [0] + idx
    return [(name, float(fit.coefficients[i]), float(fit.std_errors[i]), float(fit.z_scores[i]),
             float(fit.p_values[i]), float(fit.ci_low[i]), float(fit.ci_high[i]))
            for name, i in zip(names, idx)]


def _fmt(v):
    return "NA" if v is None or (isinstance(v, float) and math.isnan(v)) else format(v, ".10g")


def write_significance_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature", "coefficient", "std_error", "z", "p", "ci_low", "ci_high"])
        for row in rows:
            writer.writerow([row[0]] + [_fmt(v) for v in row[1:]])


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    k: int

    def indices(self, fold):
        return np.flatnonzero(self.fold_of == fold)

    def sizes(self):
        return np.bincount(self.fold_of, minlength=self.k)


def kfold_split(n, k=10, rng=None, stratify=None):
    """Shuffled partition of ``range(n)`` into ``k`` folds whose sizes differ by <= 1.

    With ``stratify`` (a label vector) each class is shuffled separately and
    dealt round-robin, which keeps class proportions per fold as even as
    possible.
    """
    n, k = int(n), int(k)
    if k < 2 or n < k:
        raise InvalidInputError(f"need n >= k >= 2, got n={n}, k={k}")
    rng = rng if rng is not None else SeededRng(0)
    if stratify is None:
        order = rng.permutation(n)
    else:
        labels = np.asarray(stratify)
        if labels.shape != (n,):
            raise InvalidInputError("stratify labels must have length n")
        order = np.concatenate([np.flatnonzero(labels == c)[rng.permutation(int(np.sum(labels == c)))]
                                for c in np.unique(labels)])
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[order] = np.arange(n) % k
    return FoldAssignment(fold_of, k)


@dataclass(frozen=True)
class CvResult:
    probabilities: np.ndarray  # NaN for samples in degenerate folds
    fold_of: np.ndarray
    fold_tables: tuple  # None for degenerate folds
    pooled: ContingencyTable
    degenerate_folds: tuple
    threshold: float = 0.5


def cross_validate(x, y, k=10, ridge=0.0, rng=None, threshold=0.5, stratified=False,
                   max_iter=100):
    """Fit on k-1 folds, predict the held-out fold, pool the contingency counts.

    A training split holding a single class marks its fold degenerate; that
    fold is reported and left out of the pooled table.
    """
    x = as_matrix(x, "x")
    y = np.asarray(y).astype(np.int64).reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise InvalidInputError(f"x has {x.shape[0]} rows, y has {y.shape[0]} entries")
    if y.size == 0 or y.min() == y.max():
        raise DegenerateLabelsError("labels contain a single class")
    folds = kfold_split(x.shape[0], k, rng, stratify=y if stratified else None)
    probs = np.full(x.shape[0], np.nan)
    tables, degenerate = [], []
    for f in range(k):
        test = folds.fold_of == f
        train = ~test
        try:
            fit = fit_logistic(x[train], y[train], ridge=ridge, max_iter=max_iter)
        except DegenerateLabelsError:
            degenerate.append(f)
            tables.append(None)
            continue
        probs[test] = predict_proba(fit, x[test])
        tables.append(tabulate(classify(probs[test], threshold), y[test]))
    pooled = sum_tables(t for t in tables if t is not None)
    return CvResult(probs, folds.fold_of, tuple(tables), pooled, tuple(degenerate), threshold)
