"""Two-component damped oscillation fit of the principal tactile signal.

Model::

    u_hat(t) = B  exp(-lam t)   cos(omega t + psi)          # slow part f
             + B' exp(-lam' t)  cos(omega' t + psi')        # fast part g, lam' > lam
             + c2 t^2 + c1 t + c0                           # slip drift l

fitted under the relative-error loss ``sum (u - u_hat)^2 / (u^2 + delta)``,
which emphasises the late, small-amplitude part of the recording where the
slow component dominates.

For fixed rates and frequencies the model is linear in the remaining seven
coefficients (``B cos(wt + psi) = a cos wt + b sin wt``), so the search runs
Nelder-Mead over ``(lam, omega, log(lam' - lam), omega')`` and solves the
linear coefficients by weighted least squares at every evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.signal import find_peaks

from . import _kernels
from .errors import ValidationError
from .formats import dump_kv, parse_bool, parse_float, read_kv, write_kv
from .pipeline import PrincipalSignal

LOG_GAP_MIN = -7.0  # lam_p - lam >= exp(-7) ~ 1e-3 1/s

PARAM_KEYS = ("lambda", "omega", "lambda_p", "omega_p", "B", "B_p", "psi", "psi_p", "c2", "c1", "c0")


@dataclass(frozen=True)
class FitParams:
    B: float = 0.0
    lam: float = 0.0
    omega: float = 1.0
    psi: float = 0.0
    B_p: float = 0.0
    lam_p: float = 1.0
    omega_p: float = 1.0
    psi_p: float = 0.0
    c2: float = 0.0
    c1: float = 0.0
    c0: float = 0.0

    def as_record(self) -> dict[str, float]:
        return {
            "lambda": self.lam, "omega": self.omega, "lambda_p": self.lam_p, "omega_p": self.omega_p,
            "B": self.B, "B_p": self.B_p, "psi": self.psi, "psi_p": self.psi_p,
            "c2": self.c2, "c1": self.c1, "c0": self.c0,
        }


@dataclass(frozen=True)
class FitConfig:
    delta: float = 1e-3
    n_restarts: int = 8
    max_iters: int = 4000
    tol: float = 1e-9
    seed: int = 0
    components: int = 2
    agree: int = 2

    def __post_init__(self):
        if not self.delta > 0:
            raise ValidationError("delta must be positive")
        if self.n_restarts < 1:
            raise ValidationError("n_restarts must be >= 1")
        if self.components not in (1, 2):
            raise ValidationError("components must be 1 or 2")


@dataclass(frozen=True)
class FitResult:
    params: FitParams
    loss: float
    converged: bool
    n_restarts_used: int
    restart_losses: tuple[float, ...] = field(default=(), repr=False)

    @property
    def features(self) -> tuple[float, float]:
        return (self.params.lam, self.params.omega)


def model_eval(params: FitParams, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    p = params
    f = p.B * np.exp(-p.lam * t) * np.cos(p.omega * t + p.psi)
    g = p.B_p * np.exp(-p.lam_p * t) * np.cos(p.omega_p * t + p.psi_p)
    return f + g + (p.c2 * t + p.c1) * t + p.c0


def loss_weights(u: np.ndarray, delta_rel: float) -> np.ndarray:
    delta = delta_rel * float(np.mean(u * u))
    return 1.0 / (u * u + delta)


def loss_eval(params: FitParams, signal: PrincipalSignal, cfg: FitConfig = FitConfig()) -> float:
    u = signal.u
    if len(u) == 0:
        raise ValidationError("empty signal")
    r = u - model_eval(params, signal.t)
    return float(np.sum(r * r * loss_weights(u, cfg.delta)))


# --- initial estimates --------------------------------------------------------


def dominant_frequency(u: np.ndarray, sample_rate: float, band: tuple[float, float] | None = None) -> float:
    """Angular frequency of the FFT magnitude peak (Hann window, zero padded).

    A quadratic trend is removed first so slip drift does not win the peak.
    """
    n = len(u)
    tau = np.linspace(-1.0, 1.0, n)
    x = (u - np.polyval(np.polyfit(tau, u, 2), tau)) * np.hanning(n)
    nfft = 8 * (1 << int(math.ceil(math.log2(max(len(x), 2)))))
    spec = np.abs(np.fft.rfft(x, nfft))
    freqs = np.fft.rfftfreq(nfft, 1.0 / sample_rate)
    # ignore slow drift below 0.2 Hz
    spec[freqs < 0.2] = 0.0
    if band is not None:
        lo, hi = band[0] / (2 * math.pi), band[1] / (2 * math.pi)
        spec[(freqs < lo) | (freqs > hi)] = 0.0
    k = int(np.argmax(spec))
    if 0 < k < len(spec) - 1:
        a, b, c = spec[k - 1], spec[k], spec[k + 1]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    else:
        shift = 0.0
    return 2.0 * math.pi * (freqs[k] + shift * (freqs[1] - freqs[0]))


def envelope_decay(u: np.ndarray, t: np.ndarray, omega: float) -> float | None:
    """Least-squares slope of log peak amplitudes; None when not decaying."""
    x = u - np.median(u)
    spacing = max(1, int(0.6 * math.pi / omega / (t[1] - t[0])))
    peaks, _ = find_peaks(np.abs(x), distance=spacing)
    if len(peaks) < 3:
        return None
    amp = np.abs(x[peaks])
    keep = amp > 1e-12 * amp.max()
    if keep.sum() < 3:
        return None
    slope = np.polyfit(t[peaks][keep], np.log(amp[keep]), 1)[0]
    return -slope if slope < 0 else None


def initial_guess(u: np.ndarray, sample_rate: float, start_fraction: float = 1 / 3) -> tuple[float, float]:
    """(lam, omega) estimated from the trailing part of the signal.

    The trailing window's spectral peak is searched within +-30% of the
    whole-signal peak, since a decayed tail can be dominated by noise.
    """
    t = np.arange(len(u)) / sample_rate
    omega = dominant_frequency(u, sample_rate)
    i0 = int(len(u) * start_fraction)
    seg, tseg = u[i0:], t[i0:]
    if i0 > 0 and len(seg) >= 8:
        omega = dominant_frequency(seg, sample_rate, (0.7 * omega, 1.3 * omega))
    else:
        seg, tseg = u, t
    lam = envelope_decay(seg, tseg, omega)
    if lam is None:
        lam = 0.02 * omega
    return lam, omega


# --- variable-projection objective --------------------------------------------


class _Profile:
    """Loss as a function of the nonlinear parameters only."""

    def __init__(self, u: np.ndarray, sample_rate: float, delta_rel: float, components: int):
        n = len(u)
        self.u = u
        self.dt = 1.0 / sample_rate
        self.T = max((n - 1) * self.dt, 1e-12)
        self.components = components
        sw = np.sqrt(loss_weights(u, delta_rel))
        self.sw = sw
        tau = np.arange(n) * self.dt / self.T
        self.drift = np.column_stack([tau * tau, tau, np.ones(n)]) * sw[:, None]
        self.b = u * sw
        self.A = np.empty((n, 2 * components + 3))
        self.coef = np.empty(2 * components + 3)

    def unpack(self, z):
        lam = abs(float(z[0]))
        omega = abs(float(z[1]))
        if self.components == 1:
            return lam, omega, None, None
        # the gap floor keeps coincident components from sending s to -inf
        lam_p = lam + math.exp(min(max(float(z[2]), LOG_GAP_MIN), 30.0))
        return lam, omega, lam_p, abs(float(z[3]))

    def solve(self, z) -> tuple[np.ndarray, float]:
        lam, omega, lam_p, omega_p = self.unpack(z)
        if lam_p is None:
            lam_p, omega_p = 0.0, 0.0
        _kernels.fill_design(lam, omega, lam_p, omega_p, self.components, self.dt, self.sw, self.drift, self.A)
        loss = _kernels.weighted_lsq(self.A, self.b, self.coef)
        if loss >= 0.0 and math.isfinite(loss):
            return self.coef.copy(), loss
        coef, *_ = np.linalg.lstsq(self.A, self.b, rcond=None)
        r = self.A @ coef - self.b
        return coef, float(r @ r)

    def __call__(self, z) -> float:
        if not np.all(np.isfinite(z)):
            return math.inf
        return self.solve(z)[1]

    def params(self, z) -> FitParams:
        coef, _ = self.solve(z)
        lam, omega, lam_p, omega_p = self.unpack(z)
        coef = [float(c) for c in coef]
        a, b = coef[0], coef[1]
        B, psi = math.hypot(a, b), math.atan2(-b, a)
        if lam_p is not None:
            ap, bp = coef[2], coef[3]
            B_p, psi_p = math.hypot(ap, bp), math.atan2(-bp, ap)
        else:
            # single-component ablation: g is absent
            B_p, psi_p, lam_p, omega_p = 0.0, 0.0, lam + 1.0, omega
        d2, d1, d0 = coef[-3:]
        return FitParams(
            B=B, lam=lam, omega=omega, psi=psi,
            B_p=B_p, lam_p=lam_p, omega_p=omega_p, psi_p=psi_p,
            c2=d2 / self.T**2, c1=d1 / self.T, c0=d0,
        )


def _simplex(z0: np.ndarray, components: int, scale: float = 1.0) -> np.ndarray:
    steps = [0.2 * max(abs(z0[0]), 0.05), 0.02 * abs(z0[1])]
    if components == 2:
        steps += [0.5, 0.05 * abs(z0[3])]
    sim = np.tile(z0, (len(z0) + 1, 1))
    for i, s in enumerate(steps):
        sim[i + 1, i] += scale * s
    return sim


def _loss_floor(profile: _Profile) -> float:
    # mean relative squared error of 1e-12: (lam, omega) no longer move below this
    return 1e-12 * len(profile.u)


def _minimize(profile: _Profile, z0: np.ndarray, cfg: FitConfig) -> tuple[np.ndarray, float, bool]:
    """Nelder-Mead, restarted from its own optimum until the loss stops moving.

    Converged means the last run stopped on its own tolerances (not on the
    evaluation budget) without improving the loss by more than ``cfg.tol``.
    """
    z, best = np.asarray(z0, float), profile(z0)
    floor = _loss_floor(profile)
    budget = cfg.max_iters
    scale = 1.0
    while budget > 0:
        res = minimize(
            profile, z, method="Nelder-Mead",
            options={"initial_simplex": _simplex(z, profile.components, scale), "maxfev": budget,
                     "xatol": 1e-7, "fatol": cfg.tol * max(best, floor)},
        )
        budget -= res.nfev
        improved = best - res.fun
        if res.fun < best:
            z, best = res.x, float(res.fun)
        if improved <= cfg.tol * max(best, floor):
            return z, best, res.status == 0
        # a collapsed simplex can stall early; re-expand around the new optimum
        scale = 0.1
    return z, best, False


def grid_guess(u: np.ndarray, rate: float, delta_rel: float) -> tuple[float, float]:
    """Best (lam, omega) of the single-component loss on a coarse log grid.

    Spectral and envelope estimates fail on signals that die out within a
    second or two (slip drift then dominates the spectrum); scanning the
    actual objective finds the right basin for those.
    """
    profile = _Profile(u, rate, delta_rel, 1)
    nyq = math.pi * rate
    omegas = np.geomspace(2 * math.pi * 0.3, 0.8 * nyq, 48)
    lams = np.geomspace(0.02, 10.0, 9)
    best = (math.inf, lams[0], omegas[0])
    for w in omegas:
        for lam in lams:
            loss = profile(np.array([lam, w]))
            if loss < best[0]:
                best = (loss, lam, w)
    return float(best[1]), float(best[2])


def _base_starts(u: np.ndarray, rate: float, components: int, delta_rel: float) -> list[np.ndarray]:
    guesses = [initial_guess(u, rate, frac) for frac in (1 / 3, 0.0)]
    guesses.append(grid_guess(u, rate, delta_rel))
    starts = []
    for lam, omega in guesses:
        z = [lam, omega] if components == 1 else [lam, omega, math.log(3.0 * lam), omega]
        starts.append(np.array(z, dtype=float))
    return starts


def _perturb(z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = np.array(z, dtype=float)
    out[0] = max(abs(out[0]), 1e-3) * math.exp(rng.normal(0.0, 0.5))
    out[1] *= 1.0 + rng.normal(0.0, 0.03)
    if len(out) == 4:
        out[2] += rng.normal(0.0, 1.0)
        out[3] *= 1.0 + rng.normal(0.0, 0.15)
    return out


def _search(profile: _Profile, base: list[np.ndarray], cfg: FitConfig):
    """Run the base starts, then random restarts around the incumbent.

    Every base start runs; after that the search stops early once
    ``cfg.agree`` restarts have reached the incumbent loss.
    """
    rng = np.random.default_rng(cfg.seed)
    best = None
    losses: list[float] = []
    agree = 0
    for i in range(cfg.n_restarts):
        z0 = base[i] if i < len(base) else _perturb(best[0], rng)
        z, loss, ok = _minimize(profile, z0, cfg)
        losses.append(loss)
        if best is not None and abs(loss - best[1]) <= 1e-7 * max(best[1], _loss_floor(profile)):
            agree += 1
        elif best is None or loss < best[1]:
            agree = 1
        if best is None or loss < best[1]:
            best = (z, loss, ok)
        if cfg.agree and agree >= cfg.agree and i >= len(base) - 1:
            break
    return best[0], best[1], best[2], losses


def fit(signal: PrincipalSignal, cfg: FitConfig = FitConfig()) -> FitResult:
    """Multi-start fit; returns the lowest-loss restart (ties go to the earlier one).

    The slow component is only meaningful if it rises above the noise where
    it outlasts the fast one.  When its envelope at the crossover time is
    below three residual RMS it is fitting noise, and the signal is refitted
    with a single component started from the fast one.
    """
    u = np.asarray(signal.u, dtype=float)
    if len(u) < 8 or not np.all(np.isfinite(u)):
        raise ValidationError("signal must have at least 8 finite samples")
    if float(np.ptp(u)) <= 1e-12 * max(1.0, float(np.max(np.abs(u)))):
        raise ValidationError("degenerate flat signal")
    profile = _Profile(u, signal.sample_rate, cfg.delta, cfg.components)
    z, loss, ok, losses = _search(profile, _base_starts(u, signal.sample_rate, cfg.components, cfg.delta), cfg)
    params = profile.params(z)

    if cfg.components == 2 and not _slow_part_visible(params, u, signal.t):
        single = replace(cfg, components=1)
        profile = _Profile(u, signal.sample_rate, cfg.delta, 1)
        starts = [np.array([params.lam_p, params.omega_p])] + _base_starts(u, signal.sample_rate, 1, cfg.delta)
        z, loss, ok, more = _search(profile, starts, single)
        losses += more
        params = profile.params(z)

    if params.lam_p <= params.lam:
        params = _swap(params)
    converged = ok and math.isfinite(loss) and params.omega > 0
    return FitResult(params=params, loss=loss, converged=converged,
                     n_restarts_used=len(losses), restart_losses=tuple(losses))


def _slow_part_visible(p: FitParams, u: np.ndarray, t: np.ndarray) -> bool:
    resid = u - model_eval(p, t)
    floor = 3.0 * math.sqrt(float(np.mean(resid * resid)))
    if p.B >= p.B_p or p.B_p == 0.0:
        return p.B > floor
    if p.B == 0.0:
        return False
    t_cross = math.log(p.B_p / p.B) / (p.lam_p - p.lam)
    return p.B * math.exp(-p.lam * t_cross) > floor


def _swap(p: FitParams) -> FitParams:
    return replace(p, B=p.B_p, lam=p.lam_p, omega=p.omega_p, psi=p.psi_p,
                   B_p=p.B, lam_p=p.lam, omega_p=p.omega, psi_p=p.psi)


def write_fit(path: str | Path, result: FitResult) -> None:
    record = result.params.as_record()
    record["loss"] = result.loss
    record["converged"] = result.converged
    write_kv(path, record)


def dumps_fit(result: FitResult) -> str:
    record = result.params.as_record()
    record.update(loss=result.loss, converged=result.converged)
    return dump_kv(record)


def read_fit(path: str | Path) -> FitResult:
    kv = read_kv(path)
    missing = [k for k in PARAM_KEYS + ("loss", "converged") if k not in kv]
    if missing:
        raise ValidationError(f"{path}: missing fields {missing}")
    v = {k: parse_float(kv[k], k) for k in PARAM_KEYS}
    params = FitParams(
        B=v["B"], lam=v["lambda"], omega=v["omega"], psi=v["psi"],
        B_p=v["B_p"], lam_p=v["lambda_p"], omega_p=v["omega_p"], psi_p=v["psi_p"],
        c2=v["c2"], c1=v["c1"], c0=v["c0"],
    )
    return FitResult(params=params, loss=parse_float(kv["loss"], "loss"),
                     converged=parse_bool(kv["converged"]), n_restarts_used=0)


__all__ = [
    "FitConfig", "FitParams", "FitResult", "fit", "loss_eval", "model_eval",
    "read_fit", "write_fit", "dumps_fit", "initial_guess",
]
