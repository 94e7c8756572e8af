"""RBF-kernel support vector classifier (one-vs-one, SMO training).

Each pair of classes gets a binary soft-margin machine trained by sequential
minimal optimization with second-order working-set selection.  Prediction
is a majority vote over the pairwise machines; ties go to the lowest class id.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError, ValidationError

DEFAULT_C = 10.0
KKT_TOL = 1e-6
MAX_ITER = 100_000
TAU = 1e-12


def rbf_kernel(A: np.ndarray, B: np.ndarray, coef: float) -> np.ndarray:
    """``exp(-coef * |a - b|^2)`` for every pair of rows."""
    d2 = np.sum(A * A, 1)[:, None] + np.sum(B * B, 1)[None, :] - 2.0 * A @ B.T
    return np.exp(-coef * np.maximum(d2, 0.0))


@dataclass(frozen=True)
class BinaryMachine:
    pos: int  # class id voted for when the decision value is >= 0
    neg: int
    support: np.ndarray = field(repr=False)  # indices into the model's training rows
    dual_coef: np.ndarray = field(repr=False)  # y_i * alpha_i for each support vector
    alphas: np.ndarray = field(repr=False)
    bias: float = 0.0
    kkt_residual: float = 0.0
    n_iter: int = 0


@dataclass(frozen=True)
class SvmModel:
    X: np.ndarray = field(repr=False)  # training features after scaling
    classes: tuple[int, ...]
    machines: tuple[BinaryMachine, ...] = field(repr=False)
    C: float
    bandwidth: float  # kernel coefficient in exp(-bandwidth * |x - x'|^2)
    x_mean: np.ndarray
    x_std: np.ndarray

    def predict(self, X) -> np.ndarray:
        return svm_predict(self, X)


def smo_binary(K: np.ndarray, y: np.ndarray, C: float, tol: float = KKT_TOL,
               max_iter: int = MAX_ITER) -> tuple[np.ndarray, float, float, int]:
    """Solve the soft-margin dual for labels ``y`` in {-1, +1}.

    Returns ``(alpha, bias, kkt_residual, iterations)`` where the decision
    function is ``sum_i alpha_i y_i K(x_i, x) + bias``.
    """
    n = len(y)
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 0.5 a'Qa - e'a
    Q = (y[:, None] * y[None, :]) * K
    diag = np.diag(Q).copy()
    for it in range(max_iter):
        yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(yG[up])])
        m_up = yG[i]
        gap = m_up - np.min(yG[low])
        if gap < tol:
            break
        # second-order choice of j among violators in I_low
        cand = low & (yG < m_up)
        b = m_up - yG[cand]
        a = diag[i] + diag[cand] - 2.0 * y[i] * y[cand] * Q[i, cand]
        a = np.where(a > TAU, a, TAU)
        j = int(np.flatnonzero(cand)[np.argmax(b * b / a)])

        quad = max(diag[i] + diag[j] - 2.0 * y[i] * y[j] * Q[i, j], TAU)
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0 and aj < 0:
                aj, ai = 0.0, diff
            elif diff <= 0 and ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0 and ai > C:
                ai, aj = C, C - diff
            elif diff <= 0 and aj > C:
                aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C and ai > C:
                ai, aj = C, total - C
            elif total <= C and aj < 0:
                aj, ai = 0.0, total
            if total > C and aj > C:
                aj, ai = C, total - C
            elif total <= C and ai < 0:
                ai, aj = 0.0, total
        dai, daj = ai - alpha[i], aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        G += Q[:, i] * dai + Q[:, j] * daj
    else:
        raise NumericalError(f"SMO did not converge within {max_iter} iterations")

    yG = -y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = -float(np.mean(yG[free]))
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = np.max(yG[up]) if up.any() else np.max(yG)
        lo = np.min(yG[low]) if low.any() else np.min(yG)
        rho = -0.5 * float(hi + lo)
    # decision value f(x) = sum alpha y K - rho, with rho = -b
    return alpha, -rho, float(max(gap, 0.0)), it + 1


def svm_train(features, labels, C: float = DEFAULT_C, bandwidth: float | None = None,
              standardize: bool = True) -> SvmModel:
    """Train a one-vs-one RBF classifier.

    ``bandwidth`` is the kernel coefficient; by default ``1 / (2 d var)``
    where ``var`` is the mean per-feature variance of the (scaled) inputs.
    """
    X_raw = np.atleast_2d(np.asarray(features, dtype=float))
    y_raw = np.asarray(labels).ravel()
    if X_raw.shape[0] != y_raw.shape[0]:
        raise ValidationError("features and labels differ in length")
    if not np.all(np.isfinite(X_raw)):
        raise ValidationError("features must be finite")
    if not C > 0:
        raise ValidationError("C must be positive")
    classes = tuple(int(c) for c in np.unique(y_raw))
    if len(classes) < 2:
        raise ValidationError("need at least 2 classes")
    if standardize:
        x_mean = X_raw.mean(axis=0)
        x_std = X_raw.std(axis=0)
        x_std[x_std == 0] = 1.0
    else:
        x_mean = np.zeros(X_raw.shape[1])
        x_std = np.ones(X_raw.shape[1])
    X = (X_raw - x_mean) / x_std
    if bandwidth is None:
        var = float(np.mean(X.var(axis=0))) or 1.0
        bandwidth = 1.0 / (2.0 * X.shape[1] * var)
    if not bandwidth > 0:
        raise ValidationError("bandwidth must be positive")

    K = rbf_kernel(X, X, bandwidth)
    machines = []
    for a_idx, a in enumerate(classes):
        for b in classes[a_idx + 1:]:
            rows = np.flatnonzero((y_raw == a) | (y_raw == b))
            y = np.where(y_raw[rows] == a, 1.0, -1.0)
            alpha, bias, resid, iters = smo_binary(K[np.ix_(rows, rows)], y, C)
            sv = alpha > 0
            machines.append(BinaryMachine(
                pos=a, neg=b, support=rows[sv], dual_coef=alpha[sv] * y[sv], alphas=alpha[sv],
                bias=bias, kkt_residual=resid, n_iter=iters,
            ))
    return SvmModel(X=X, classes=classes, machines=tuple(machines), C=float(C),
                    bandwidth=float(bandwidth), x_mean=x_mean, x_std=x_std)


def decision_values(model: SvmModel, features) -> np.ndarray:
    """Pairwise decision values, shape (n, n_machines)."""
    Xq = (np.atleast_2d(np.asarray(features, dtype=float)) - model.x_mean) / model.x_std
    K = rbf_kernel(Xq, model.X, model.bandwidth)
    return np.column_stack([K[:, m.support] @ m.dual_coef + m.bias for m in model.machines])


def svm_predict(model: SvmModel, features) -> np.ndarray:
    """Majority vote over pairwise machines; ties go to the lowest class id."""
    dv = decision_values(model, features)
    index = {c: i for i, c in enumerate(model.classes)}
    votes = np.zeros((dv.shape[0], len(model.classes)), dtype=int)
    for k, m in enumerate(model.machines):
        winner = np.where(dv[:, k] >= 0, index[m.pos], index[m.neg])
        np.add.at(votes, (np.arange(dv.shape[0]), winner), 1)
    # argmax returns the first maximum, and classes are sorted ascending
    return np.asarray(model.classes)[np.argmax(votes, axis=1)]
