"""Marker series -> 1-D principal oscillation signal.

Stages: zero-phase low-pass filter, keep the markers that move the most,
project onto the first principal direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import filtfilt

from .errors import ValidationError
from .formats import parse_float, read_kv, read_table, write_kv, write_table
from .sim import MarkerSeries


@dataclass(frozen=True)
class PipelineConfig:
    cutoff_hz: float = 3.0
    top_k: int = 16
    min_variance_ratio: float = 0.90

    def __post_init__(self):
        if not (self.cutoff_hz > 0 and math.isfinite(self.cutoff_hz)):
            raise ValidationError("cutoff_hz must be positive")
        if int(self.top_k) != self.top_k or self.top_k < 1:
            raise ValidationError("top_k must be a positive integer")
        if not 0 <= self.min_variance_ratio <= 1:
            raise ValidationError("min_variance_ratio must lie in [0, 1]")


@dataclass(frozen=True)
class PrincipalSignal:
    sample_rate: float
    u: np.ndarray = field(repr=False)
    variance_ratio: float = 1.0
    principal_direction: np.ndarray = field(default=None, repr=False)
    low_variance: bool = False

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 1:
            raise ValidationError("u must be one-dimensional")
        object.__setattr__(self, "u", u)

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.u)) / self.sample_rate

    def __len__(self) -> int:
        return len(self.u)


def butter_biquad(cutoff_hz: float, sample_rate: float) -> tuple[np.ndarray, np.ndarray]:
    """2nd-order Butterworth low-pass via the bilinear transform (prewarped)."""
    K = math.tan(math.pi * cutoff_hz / sample_rate)
    norm = 1.0 / (1.0 + math.sqrt(2.0) * K + K * K)
    b0 = K * K * norm
    b = np.array([b0, 2.0 * b0, b0])
    a = np.array([1.0, 2.0 * (K * K - 1.0) * norm, (1.0 - math.sqrt(2.0) * K + K * K) * norm])
    return b, a


def _pad_length(a: np.ndarray, n: int) -> int:
    # three time constants of the slowest pole, in samples
    radius = float(np.max(np.abs(np.roots(a))))
    tau = -1.0 / math.log(radius) if 0 < radius < 1 else 1.0
    return int(min(n - 1, max(6, math.ceil(3.0 * tau))))


def lowpass(series: MarkerSeries, cutoff_hz: float) -> MarkerSeries:
    """Forward-backward biquad filtering (zero phase, net 4th order)."""
    nyquist = series.sample_rate / 2.0
    if not 0 < cutoff_hz < nyquist:
        raise ValidationError(f"cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz")
    if len(series) < 2:
        raise ValidationError("need at least 2 samples to filter")
    b, a = butter_biquad(cutoff_hz, series.sample_rate)
    out = filtfilt(b, a, series.disp, axis=0, padtype="odd", padlen=_pad_length(a, len(series)))
    return MarkerSeries(sample_rate=series.sample_rate, t=series.t, disp=out)


def marker_rms(series: MarkerSeries) -> np.ndarray:
    x = series.disp[:, 0::2]
    y = series.disp[:, 1::2]
    return np.sqrt(np.mean(x * x + y * y, axis=0))


def select_top_markers(series: MarkerSeries, k: int) -> MarkerSeries:
    """Keep the ``k`` markers with the largest RMS displacement, in original order."""
    M = series.n_markers
    if not 1 <= k <= M:
        raise ValidationError(f"k={k} outside [1, {M}]")
    if k == M:
        return series
    rms = marker_rms(series)
    # stable sort: ties resolved by lower marker index
    keep = np.sort(np.argsort(-rms, kind="stable")[:k])
    cols = np.stack([2 * keep, 2 * keep + 1], axis=1).ravel()
    return MarkerSeries(sample_rate=series.sample_rate, t=series.t, disp=series.disp[:, cols])


def principal_motion(series: MarkerSeries) -> PrincipalSignal:
    """Project mean-centred rows onto the first principal direction.

    The direction's sign is chosen so that the first large excursion of
    ``u`` (the first sample reaching half of max ``|u|``) is positive.
    """
    X = series.disp
    if X.shape[0] < 2:
        raise ValidationError("need at least 2 samples")
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / (X.shape[0] - 1)
    total = float(np.trace(cov))
    if not total > 0:
        raise ValidationError("degenerate input: marker displacements have zero variance")
    evals, evecs = np.linalg.eigh(cov)
    direction = evecs[:, -1]
    direction = direction / np.linalg.norm(direction)
    u = Xc @ direction
    peak = np.max(np.abs(u))
    first = int(np.argmax(np.abs(u) >= 0.5 * peak))
    if u[first] < 0:
        direction = -direction
        u = -u
    ratio = float(np.clip(evals[-1] / total, 0.0, 1.0))
    return PrincipalSignal(
        sample_rate=series.sample_rate, u=u, variance_ratio=ratio, principal_direction=direction
    )


def preprocess(series: MarkerSeries, cfg: PipelineConfig = PipelineConfig()) -> PrincipalSignal:
    filtered = lowpass(series, cfg.cutoff_hz)
    kept = select_top_markers(filtered, cfg.top_k)
    sig = principal_motion(kept)
    low = sig.variance_ratio < cfg.min_variance_ratio
    return PrincipalSignal(
        sample_rate=sig.sample_rate,
        u=sig.u,
        variance_ratio=sig.variance_ratio,
        principal_direction=sig.principal_direction,
        low_variance=low,
    )


def write_signal(path: str | Path, signal: PrincipalSignal, cfg: PipelineConfig | None = None) -> Path:
    """Write ``t,u`` CSV plus a ``.meta`` sidecar; returns the sidecar path."""
    path = Path(path)
    write_table(path, ["t", "u"], [signal.t, signal.u])
    meta = {
        "sample_rate": signal.sample_rate,
        "variance_ratio": signal.variance_ratio,
        "low_variance": signal.low_variance,
    }
    if cfg is not None:
        meta.update(cutoff=cfg.cutoff_hz, k=cfg.top_k)
    sidecar = path.with_suffix(path.suffix + ".meta")
    write_kv(sidecar, meta)
    return sidecar


def read_signal(path: str | Path) -> PrincipalSignal:
    path = Path(path)
    header, data = read_table(path)
    if header != ["t", "u"]:
        raise ValidationError(f"{path}: expected header t,u")
    if data.shape[0] < 2:
        raise ValidationError(f"{path}: need at least 2 samples")
    sidecar = path.with_suffix(path.suffix + ".meta")
    meta = read_kv(sidecar) if sidecar.exists() else {}
    if "sample_rate" in meta:
        rate = parse_float(meta["sample_rate"], "sample_rate")
    else:
        rate = (data.shape[0] - 1) / float(data[-1, 0] - data[0, 0])
    ratio = parse_float(meta.get("variance_ratio", "1.0"), "variance_ratio")
    return PrincipalSignal(sample_rate=rate, u=data[:, 1], variance_ratio=ratio)
