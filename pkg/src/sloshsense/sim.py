"""Single-mode sloshing simulator and synthetic tactile marker rendering.

The liquid surface offset ``eps`` of the first sloshing mode obeys

    eps'' + gamma * eps' + kappa * (L / 6h)**2 * eps'**3 + (12 g h / L**2) * eps = 0

which follows from the work-energy balance with a viscous force acting on
the liquid's centre of mass (velocity ``-eps' L / 6h``).  With ``kappa = 0``
this is the linear damped oscillator whose solution decays at ``gamma / 2``
and rings at ``sqrt(12 g h / L**2 - gamma**2 / 4)``.  The gripper reaction
force is ``F_x = m * (-eps'' L / 6h)``; it is what the tactile markers see.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import NumericalError, ValidationError
from .formats import parse_float, read_kv, read_table, write_kv, write_table

SUBSTEPS = 10


@dataclass(frozen=True)
class SimConfig:
    """Physical and rendering parameters of one liquid-container recording.

    Lengths in metres, masses in kg, damping ``gamma`` in 1/s and the cubic
    damping ``kappa`` in s/m**2.  ``noise_std`` and ``slip`` are in marker
    signal units (the same units as ``F_x``).
    """

    L: float = 0.10
    h: float = 0.03
    m: float = 0.3
    g: float = 9.81
    gamma: float = 1.0
    kappa: float = 0.0
    eps0: float = 0.003
    deps0: float = 0.0
    duration: float = 13.0
    sample_rate: float = 30.0
    noise_std: float = 0.0
    slip: tuple[float, float, float] = (0.0, 0.0, 0.0)
    n_markers: int = 32
    marker_gain_spread: float = 0.5
    direction_spread_deg: float = 15.0

    def __post_init__(self):
        object.__setattr__(self, "slip", tuple(float(c) for c in self.slip))
        if len(self.slip) != 3:
            raise ValidationError("slip needs three coefficients (c2, c1, c0)")
        scalars = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "slip"}
        for name, value in scalars.items():
            if not math.isfinite(value):
                raise ValidationError(f"{name} must be finite, got {value!r}")
        if not all(math.isfinite(c) for c in self.slip):
            raise ValidationError("slip coefficients must be finite")
        for name in ("L", "h", "m", "g", "duration", "sample_rate"):
            if scalars[name] <= 0:
                raise ValidationError(f"{name} must be positive, got {scalars[name]!r}")
        for name in ("gamma", "kappa", "noise_std", "marker_gain_spread", "direction_spread_deg"):
            if scalars[name] < 0:
                raise ValidationError(f"{name} must be non-negative, got {scalars[name]!r}")
        if int(self.n_markers) != self.n_markers or self.n_markers < 1:
            raise ValidationError(f"n_markers must be a positive integer, got {self.n_markers!r}")
        if self.marker_gain_spread >= 1:
            raise ValidationError("marker_gain_spread must be < 1 so that gains stay positive")
        if self.n_samples < 2:
            raise ValidationError("duration * sample_rate must give at least 2 samples")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @property
    def natural_frequency(self) -> float:
        """Undamped angular frequency sqrt(12 g h) / L."""
        return math.sqrt(12.0 * self.g * self.h) / self.L

    @property
    def linear_frequency(self) -> float:
        """Damped angular frequency of the linear model (nan if overdamped)."""
        w2 = self.natural_frequency**2 - self.gamma**2 / 4.0
        return math.sqrt(w2) if w2 > 0 else float("nan")

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SimTrace:
    t: np.ndarray
    eps: np.ndarray
    deps: np.ndarray
    ddeps: np.ndarray
    fx: np.ndarray
    energy: np.ndarray


@dataclass(frozen=True)
class MarkerSeries:
    """Per-marker (x, y) displacement; ``disp[:, 2*i]`` is marker i's x."""

    sample_rate: float
    t: np.ndarray
    disp: np.ndarray = field(repr=False)

    def __post_init__(self):
        disp = np.asarray(self.disp, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if disp.ndim != 2 or disp.shape[1] % 2 or disp.shape[1] == 0:
            raise ValidationError(f"disp must be (n, 2M), got shape {disp.shape}")
        if t.shape != (disp.shape[0],):
            raise ValidationError("t and disp have different lengths")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ValidationError("sample_rate must be positive")
        object.__setattr__(self, "disp", disp)
        object.__setattr__(self, "t", t)

    @property
    def n_markers(self) -> int:
        return self.disp.shape[1] // 2

    def __len__(self) -> int:
        return self.disp.shape[0]


def _integrate(cfg: SimConfig, kappa: float) -> SimTrace:
    L, h = cfg.L, cfg.h
    w02 = 12.0 * cfg.g * h / L**2
    gamma = cfg.gamma
    kc = kappa * (L / (6.0 * h)) ** 2
    dt = 1.0 / (SUBSTEPS * cfg.sample_rate)
    half = 0.5 * dt

    def acc(e, v):
        return -gamma * v - kc * v * v * v - w02 * e

    n = cfg.n_samples
    eps = np.empty(n)
    deps = np.empty(n)
    e, v = float(cfg.eps0), float(cfg.deps0)
    for i in range(n):
        eps[i] = e
        deps[i] = v
        for _ in range(SUBSTEPS):
            k1e, k1v = v, acc(e, v)
            k2e, k2v = v + half * k1v, acc(e + half * k1e, v + half * k1v)
            k3e, k3v = v + half * k2v, acc(e + half * k2e, v + half * k2v)
            k4e, k4v = v + dt * k3v, acc(e + dt * k3e, v + dt * k3v)
            e += dt / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
            v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not (math.isfinite(e) and math.isfinite(v)):
            raise NumericalError(f"integrator diverged at t={(i + 1) / cfg.sample_rate:.3f}s")

    ddeps = -gamma * deps - kc * deps**3 - w02 * eps
    t = np.arange(n) / cfg.sample_rate
    lever = L / (6.0 * h)
    fx = cfg.m * (-ddeps * lever)
    energy = 0.5 * cfg.m * (deps * lever) ** 2 + cfg.m * cfg.g * eps**2 / (6.0 * h)
    return SimTrace(t=t, eps=eps, deps=deps, ddeps=ddeps, fx=fx, energy=energy)


def simulate_linear(cfg: SimConfig) -> SimTrace:
    """Integrate the linear model (``cfg.kappa`` is ignored)."""
    return _integrate(cfg, 0.0)


def simulate_nonlinear(cfg: SimConfig) -> SimTrace:
    """Integrate with the cubic damping term; identical to the linear run when kappa is 0."""
    return _integrate(cfg, cfg.kappa)


def simulate(cfg: SimConfig) -> SimTrace:
    return simulate_nonlinear(cfg) if cfg.kappa > 0 else simulate_linear(cfg)


def marker_layout(cfg: SimConfig, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-marker gains and unit direction vectors used by :func:`render_markers`."""
    rng = np.random.default_rng(seed)
    gains = 1.0 + cfg.marker_gain_spread * rng.uniform(-1.0, 1.0, cfg.n_markers)
    angles = np.deg2rad(cfg.direction_spread_deg) * rng.uniform(-1.0, 1.0, cfg.n_markers)
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    return gains, directions


def render_markers(trace: SimTrace, cfg: SimConfig, seed: int) -> MarkerSeries:
    """Turn a simulated force trace into noisy marker displacements.

    Marker ``i`` moves along its own direction with amplitude ``gain_i * F_x``;
    in-hand slip adds the quadratic drift ``c2 t^2 + c1 t + c0`` along the
    perturbation axis (x) of every marker, and i.i.d. Gaussian noise is added
    to every channel.
    """
    gains, directions = marker_layout(cfg, seed)
    rng = np.random.default_rng([seed, 1])
    n, M = len(trace.t), cfg.n_markers
    c2, c1, c0 = cfg.slip
    slip = c2 * trace.t**2 + c1 * trace.t + c0

    disp = np.empty((n, 2 * M))
    disp[:, 0::2] = trace.fx[:, None] * (gains * directions[:, 0])[None, :] + slip[:, None]
    disp[:, 1::2] = trace.fx[:, None] * (gains * directions[:, 1])[None, :]
    if cfg.noise_std > 0:
        disp += rng.normal(0.0, cfg.noise_std, size=disp.shape)
    return MarkerSeries(sample_rate=cfg.sample_rate, t=trace.t.copy(), disp=disp)


def marker_header(n_markers: int) -> list[str]:
    cols = ["t"]
    for i in range(n_markers):
        cols += [f"m{i}x", f"m{i}y"]
    return cols


def write_markers_csv(path: str | Path, series: MarkerSeries) -> None:
    write_table(path, marker_header(series.n_markers), [series.t, *series.disp.T])


def read_markers_csv(path: str | Path) -> MarkerSeries:
    header, data = read_table(path)
    n_markers = (len(header) - 1) // 2
    if len(header) < 3 or header != marker_header(n_markers):
        raise ValidationError(f"{path}: header is not t,m0x,m0y,...")
    if data.shape[0] < 2:
        raise ValidationError(f"{path}: need at least 2 samples")
    t = data[:, 0]
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValidationError(f"{path}: time column must be strictly increasing")
    if np.max(np.abs(dt - np.mean(dt))) > 1e-3 * np.mean(dt):
        raise ValidationError(f"{path}: samples must be uniformly spaced")
    sample_rate = (len(t) - 1) / float(t[-1] - t[0])
    return MarkerSeries(sample_rate=sample_rate, t=t, disp=data[:, 1:])


def write_config(path: str | Path, cfg: SimConfig) -> None:
    write_kv(path, asdict(cfg))


def config_from_mapping(pairs: dict[str, str]) -> SimConfig:
    known = {f.name for f in fields(SimConfig)}
    unknown = set(pairs) - known
    if unknown:
        raise ValidationError(f"unknown SimConfig keys: {sorted(unknown)}")
    kwargs: dict[str, object] = {}
    for key, text in pairs.items():
        if key == "slip":
            kwargs[key] = tuple(parse_float(p, "slip") for p in text.split(","))
        elif key == "n_markers":
            kwargs[key] = int(parse_float(text, key))
        else:
            kwargs[key] = parse_float(text, key)
    return SimConfig(**kwargs)


def read_config(path: str | Path) -> SimConfig:
    return config_from_mapping(read_kv(path))
