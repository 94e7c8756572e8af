"""Regressors and classifier mapping (lambda, omega) to liquid properties."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .gpr import GprModel, gpr_predict, gpr_train
from .quad import QuadModel, quad_fit, quad_predict
from .svm import SvmModel, svm_predict, svm_train


def viscosity_to_mu(nu):
    """log10 of kinematic viscosity given in centistokes."""
    arr = np.asarray(nu, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValidationError("viscosity must be positive and finite")
    out = np.log10(arr)
    return float(out) if out.ndim == 0 else out


def regress(model, features) -> np.ndarray:
    """Point prediction of any regressor (GPR mean, quadratic, or transfer map)."""
    if isinstance(model, GprModel):
        return gpr_predict(model, features)[0]
    if isinstance(model, QuadModel):
        return quad_predict(model, features)
    predict = getattr(model, "predict_mean", None)
    if predict is None:
        raise ValidationError(f"not a regression model: {type(model).__name__}")
    return predict(features)


__all__ = [
    "GprModel", "QuadModel", "SvmModel", "gpr_train", "gpr_predict", "quad_fit", "quad_predict",
    "svm_train", "svm_predict", "viscosity_to_mu", "regress",
]
