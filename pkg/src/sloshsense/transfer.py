"""Affine feature warp that adapts a trained property model to a new container.

A model trained on container A is reused for container B by evaluating it at
``(a1 * lambda + a2, b1 * omega + b2)``.  Only the four warp parameters are
fitted on B's tuning data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import ValidationError
from .models import regress

N_RESTARTS = 4


@dataclass(frozen=True)
class TransferMap:
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float
    base: object
    tune_mse: float = float("nan")
    identity_mse: float = float("nan")

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.beta1 > 0):
            raise ValidationError("alpha1 and beta1 must be positive")

    def warp(self, features) -> np.ndarray:
        X = np.atleast_2d(np.asarray(features, dtype=float))
        return np.column_stack([self.alpha1 * X[:, 0] + self.alpha2, self.beta1 * X[:, 1] + self.beta2])

    def predict_mean(self, features) -> np.ndarray:
        return regress(self.base, self.warp(features))


def transfer_predict(tmap: TransferMap, features) -> np.ndarray:
    return tmap.predict_mean(features)


def _params(z: np.ndarray) -> tuple[float, float, float, float]:
    return float(np.exp(z[0])), float(z[1]), float(np.exp(z[2])), float(z[3])


def transfer_fit(base, features, targets, seed: int = 0, n_restarts: int = N_RESTARTS) -> TransferMap:
    """Fit the warp by Nelder-Mead in ``(log a1, a2, log b1, b2)``.

    Restarts are drawn around the identity map, and the identity itself is
    kept as a candidate so the result never fits the tuning set worse.
    """
    X = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValidationError("features and targets differ in length")
    if X.shape[0] < 4:
        raise ValidationError("transfer fitting needs at least 4 tuning pairs")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValidationError("tuning features and targets must be finite")

    lam_scale = max(float(np.std(X[:, 0])), 1e-3 * max(float(np.mean(np.abs(X[:, 0]))), 1e-6))
    om_scale = max(float(np.std(X[:, 1])), 1e-3 * max(float(np.mean(np.abs(X[:, 1]))), 1e-6))

    def mse(z):
        a1, a2, b1, b2 = _params(z)
        W = np.column_stack([a1 * X[:, 0] + a2, b1 * X[:, 1] + b2])
        r = regress(base, W) - y
        return float(np.mean(r * r))

    identity = np.zeros(4)
    best_z, best_f = identity, mse(identity)
    identity_f = best_f
    rng = np.random.default_rng(seed)
    steps = np.array([0.2, 0.5 * lam_scale, 0.2, 0.5 * om_scale])
    for k in range(n_restarts):
        z0 = identity if k == 0 else identity + steps * rng.uniform(-1.0, 1.0, 4)
        simplex = np.vstack([z0] + [z0 + np.eye(4)[i] * steps[i] for i in range(4)])
        res = minimize(mse, z0, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": 1e-9, "fatol": 1e-14, "maxiter": 4000})
        # polish from the end point with a fresh, smaller simplex
        simplex = np.vstack([res.x] + [res.x + np.eye(4)[i] * 0.1 * steps[i] for i in range(4)])
        res = minimize(mse, res.x, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000})
        if res.fun < best_f:
            best_z, best_f = res.x, float(res.fun)
    a1, a2, b1, b2 = _params(best_z)
    return TransferMap(alpha1=a1, alpha2=a2, beta1=b1, beta2=b2, base=base,
                       tune_mse=best_f, identity_mse=identity_f)
