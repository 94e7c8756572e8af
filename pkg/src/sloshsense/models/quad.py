"""Six-term quadratic regression over (lambda, omega)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

BASIS = ("1", "lambda", "omega", "lambda^2", "lambda*omega", "omega^2")


def quad_basis(features) -> np.ndarray:
    X = np.atleast_2d(np.asarray(features, dtype=float))
    lam, om = X[:, 0], X[:, 1]
    return np.column_stack([np.ones_like(lam), lam, om, lam * lam, lam * om, om * om])


@dataclass(frozen=True)
class QuadModel:
    coef: np.ndarray  # ordered as BASIS

    def predict(self, X) -> np.ndarray:
        return quad_predict(self, X)


def quad_fit(features, targets) -> QuadModel:
    """Ordinary least squares on the basis ``1, l, w, l^2, l*w, w^2``.

    Columns are scaled to unit norm before the SVD solve so that the
    conditioning reflects the geometry of the data, not the units.
    """
    A = quad_basis(features)
    y = np.asarray(targets, dtype=float).ravel()
    if A.shape[0] != y.shape[0]:
        raise ValidationError("features and targets differ in length")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
        raise ValidationError("features and targets must be finite")
    if A.shape[0] < 6:
        raise ValidationError("quadratic fit needs at least 6 points")
    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0] = 1.0
    As = A / scale
    sv = np.linalg.svd(As, compute_uv=False)
    if sv[-1] <= sv[0] * A.shape[0] * np.finfo(float).eps * 10:
        raise ValidationError("rank-deficient design: points are not in general position")
    coef, *_ = np.linalg.lstsq(As, y, rcond=None)
    return QuadModel(coef=coef / scale)


def quad_predict(model: QuadModel, features) -> np.ndarray:
    return quad_basis(features) @ model.coef
