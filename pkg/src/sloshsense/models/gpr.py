"""Gaussian process regression with an RBF + white-noise kernel.

Features are standardized (zero mean, unit variance per column) and targets
are centred and scaled before hyperparameter search, so bounds and initial
values are expressed in standardized units.  The kernel is

    k(x, x') = s2 * exp(-0.5 * sum_d (x_d - x'_d)**2 / l_d**2) + n2 * [x == x']

with one length-scale per feature.  ``s2``, ``l_d`` and ``n2`` maximise the
log marginal likelihood (L-BFGS-B on the closed-form gradient, multi-start
from log-uniform initial points).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from ..errors import NumericalError, ValidationError

LENGTH_BOUNDS = (1e-2, 1e2)
SIGNAL_BOUNDS = (1e-3, 1e3)
NOISE_BOUNDS = (1e-10, 1e1)
GRID = 2.0**-30  # standardized training inputs are snapped to this grid
N_RESTARTS = 16
JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


@dataclass(frozen=True)
class GprModel:
    X: np.ndarray = field(repr=False)  # standardized training inputs
    y: np.ndarray = field(repr=False)  # centred and scaled targets
    length_scales: np.ndarray
    signal_var: float
    noise_var: float
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    L: np.ndarray = field(repr=False)  # Cholesky factor of the training Gram matrix
    alpha: np.ndarray = field(repr=False)
    jitter: float = 0.0
    log_marginal_likelihood: float = float("nan")

    @property
    def noise_std(self) -> float:
        """White-noise standard deviation in target units."""
        return math.sqrt(self.noise_var) * self.y_std

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        return gpr_predict(self, X)


def rbf(X1: np.ndarray, X2: np.ndarray, length_scales, signal_var: float) -> np.ndarray:
    A = np.asarray(X1, float) / length_scales
    B = np.asarray(X2, float) / length_scales
    d2 = np.sum(A * A, 1)[:, None] + np.sum(B * B, 1)[None, :] - 2.0 * A @ B.T
    return signal_var * np.exp(-0.5 * np.maximum(d2, 0.0))


def gram(X: np.ndarray, length_scales, signal_var: float, noise_var: float) -> np.ndarray:
    """Training covariance: RBF part plus white noise on the diagonal."""
    K = rbf(X, X, length_scales, signal_var)
    K[np.diag_indices_from(K)] = signal_var + noise_var
    return K


def _cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    n = K.shape[0]
    for jitter in JITTERS:
        try:
            return np.linalg.cholesky(K + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalError("kernel matrix is not positive definite even with 1e-4 jitter")


def _unpack(theta: np.ndarray, d: int):
    return np.exp(theta[:d]), math.exp(theta[d]), math.exp(theta[d + 1])


def _neg_lml(theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    n, d = X.shape
    ls, s2, n2 = _unpack(theta, d)
    Kf = rbf(X, X, ls, s2)
    Kf[np.diag_indices_from(Kf)] = s2
    K = Kf + n2 * np.eye(n)
    try:
        L, _ = _cholesky(K)
    except NumericalError:
        return 1e25, np.zeros_like(theta)
    alpha = cho_solve((L, True), y)
    lml = -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * math.log(2 * math.pi)
    Kinv = cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - Kinv
    grad = np.empty_like(theta)
    for k in range(d):
        diff = (X[:, k][:, None] - X[:, k][None, :]) ** 2 / ls[k] ** 2
        grad[k] = 0.5 * np.sum(W * Kf * diff)
    grad[d] = 0.5 * np.sum(W * Kf)
    grad[d + 1] = 0.5 * n2 * np.trace(W)
    return -lml, -grad


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    return mean, std


def gpr_train(features, targets, seed: int = 0, n_restarts: int = N_RESTARTS) -> GprModel:
    """Fit a GPR model; hyperparameters maximise the log marginal likelihood."""
    X_raw = np.atleast_2d(np.asarray(features, dtype=float))
    y_raw = np.asarray(targets, dtype=float).ravel()
    if X_raw.shape[0] != y_raw.shape[0]:
        raise ValidationError("features and targets differ in length")
    if not (np.all(np.isfinite(X_raw)) and np.all(np.isfinite(y_raw))):
        raise ValidationError("features and targets must be finite")
    if len(np.unique(X_raw, axis=0)) < 2:
        raise ValidationError("need at least 2 distinct training points")
    n, d = X_raw.shape
    x_mean, x_std = _standardize(X_raw)
    # Snapping removes the last-bit differences that an affine rescaling of the
    # raw features leaves after standardization; on noise-free data the
    # likelihood ridge would otherwise amplify them into visible changes.
    X = np.round((X_raw - x_mean) / x_std / GRID) * GRID
    y_mean = float(y_raw.mean())
    y_std = float(y_raw.std()) or 1.0
    y = (y_raw - y_mean) / y_std

    bounds = [tuple(np.log(LENGTH_BOUNDS))] * d + [tuple(np.log(SIGNAL_BOUNDS)), tuple(np.log(NOISE_BOUNDS))]
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_restarts):
        theta0 = rng.uniform(lo, hi)
        res = minimize(_neg_lml, theta0, args=(X, y), jac=True, method="L-BFGS-B", bounds=bounds)
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None or best.fun >= 1e25:
        raise NumericalError("hyperparameter search failed")
    ls, s2, n2 = _unpack(best.x, d)
    L, jitter = _cholesky(gram(X, ls, s2, n2))
    alpha = cho_solve((L, True), y)
    return GprModel(
        X=X, y=y, length_scales=ls, signal_var=s2, noise_var=n2,
        x_mean=x_mean, x_std=x_std, y_mean=y_mean, y_std=y_std,
        L=L, alpha=alpha, jitter=jitter, log_marginal_likelihood=-float(best.fun),
    )


def rebuild(X, y, length_scales, signal_var, noise_var, x_mean, x_std, y_mean, y_std) -> GprModel:
    """Recreate a model from stored hyperparameters (used when loading)."""
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, float)
    ls = np.asarray(length_scales, float)
    L, jitter = _cholesky(gram(X, ls, signal_var, noise_var))
    alpha = cho_solve((L, True), y)
    return GprModel(X=X, y=y, length_scales=ls, signal_var=float(signal_var), noise_var=float(noise_var),
                    x_mean=np.asarray(x_mean, float), x_std=np.asarray(x_std, float),
                    y_mean=float(y_mean), y_std=float(y_std), L=L, alpha=alpha, jitter=jitter)


def gpr_predict(model: GprModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Posterior predictive mean and standard deviation (noise included).

    ``x`` may be a single feature pair or an (n, d) array; outputs are arrays
    of length n.
    """
    Xq = (np.atleast_2d(np.asarray(x, dtype=float)) - model.x_mean) / model.x_std
    Ks = rbf(Xq, model.X, model.length_scales, model.signal_var)
    mean = Ks @ model.alpha
    v = solve_triangular(model.L, Ks.T, lower=True)
    var_f = np.maximum(model.signal_var - np.sum(v * v, axis=0), 0.0)
    var = var_f + model.noise_var
    return model.y_mean + model.y_std * mean, model.y_std * np.sqrt(var)
