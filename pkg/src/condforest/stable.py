"""Spectrally positive stable paths, first passage, heights and conditioned bridges.

The driving process ``X`` has Laplace exponent ``psi(lam) = lam**alpha``,
that is ``E exp(-lam X_t) = exp(t lam**alpha)``, with ``1 < alpha <= 2``.
For ``alpha = 2`` this is a Brownian motion with variance ``2t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import levy_stable

from ._rmq import SparseMin
from .errors import HorizonError, NoCrossingError, ValidationError


@dataclass(frozen=True)
class StableParams:
    alpha: float

    def __post_init__(self):
        if not 1.0 < self.alpha <= 2.0:
            raise ValidationError(f"alpha must lie in (1, 2], got {self.alpha}")

    @property
    def scale(self) -> float:
        """Unit-time scale in the ``S1`` parametrisation giving ``psi(lam) = lam**alpha``."""
        if self.alpha == 2.0:
            return 1.0
        return abs(np.cos(np.pi * self.alpha / 2)) ** (1 / self.alpha)

    def laplace(self, lam, t=1.0):
        return np.exp(t * np.asarray(lam, dtype=float) ** self.alpha)


@dataclass(frozen=True, eq=False)
class RealPath:
    """Real values on the uniform grid ``0, grid_step, ..., horizon``."""

    horizon: float
    grid_step: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValidationError("a real path needs at least two grid values")
        expected = self.horizon / self.grid_step + 1
        if abs(expected - values.size) > 1e-6 * expected:
            raise ValidationError(
                f"{values.size} values do not fit horizon {self.horizon} at step {self.grid_step}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def on_grid(cls, values, horizon=1.0) -> "RealPath":
        values = np.asarray(values, dtype=float)
        return cls(float(horizon), float(horizon) / (values.size - 1), values)

    @property
    def grid_n(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.grid_step

    def index_at(self, t):
        """Grid index of the last grid time ``<= t``."""
        idx = np.floor(np.asarray(t, dtype=float) / self.grid_step + 1e-9).astype(np.int64)
        return np.clip(idx, 0, self.grid_n)

    def __call__(self, t):
        return self.values[self.index_at(t)]

    def __eq__(self, other):
        if not isinstance(other, RealPath):
            return NotImplemented
        return (
            self.horizon == other.horizon
            and self.grid_step == other.grid_step
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class Excursion:
    level: float
    start: int  # grid index in the parent path
    end: int
    path: RealPath


@dataclass(frozen=True)
class ExcursionSet:
    excursions: tuple

    def __len__(self):
        return len(self.excursions)

    def lengths(self) -> np.ndarray:
        return np.array([e.path.horizon for e in self.excursions])


# -- simulation -------------------------------------------------------------------

def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def stable_increments(params: StableParams, dt, size, rng) -> np.ndarray:
    """Increments over time ``dt`` (scalar or array broadcast against ``size``)."""
    dt = np.asarray(dt, dtype=float)
    if params.alpha == 2.0:
        return rng.standard_normal(size) * np.sqrt(2.0 * dt)
    z = levy_stable.rvs(params.alpha, 1.0, scale=params.scale, size=size, random_state=rng)
    return z * dt ** (1.0 / params.alpha)


def sample_stable_path(params: StableParams, horizon: float, grid_n: int, seed) -> RealPath:
    """Stable path on ``grid_n`` equal steps covering ``[0, horizon]``."""
    if grid_n < 2:
        raise ValidationError("grid_n must be >= 2")
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    rng = _rng(seed)
    dt = horizon / grid_n
    values = np.empty(grid_n + 1)
    values[0] = 0.0
    np.cumsum(stable_increments(params, dt, grid_n, rng), out=values[1:])
    return RealPath(float(horizon), dt, values)


# -- first passage ----------------------------------------------------------------

class FirstPassage:
    """``u -> T_u = inf{t : -I_t >= u}`` read off a grid path."""

    def __init__(self, path: RealPath):
        self.path = path
        self.depth = -np.minimum.accumulate(path.values)  # -I, nondecreasing

    @property
    def domain(self) -> float:
        """Largest level reached on the horizon."""
        return float(self.depth[-1])

    def index(self, u):
        idx = np.searchsorted(self.depth, np.asarray(u, dtype=float), side="left")
        return np.where(idx <= self.path.grid_n, idx, -1)

    def __call__(self, u):
        idx = self.index(u)
        out = np.where(idx >= 0, idx * self.path.grid_step, np.inf)
        return out if out.ndim else float(out)


def first_passage_process(path: RealPath) -> FirstPassage:
    return FirstPassage(path)


def total_mass(path: RealPath, s: float):
    """Total mass of the forest of size ``s`` coded by the path, which is ``T_s``.

    The mass measure is the image of Lebesgue measure on ``[0, T_s]``, so the
    identity is definitional here.  Returns ``None`` when ``T_s`` lies
    beyond the horizon.
    """
    t = first_passage_process(path)(s)
    return None if np.isinf(t) else float(t)


def sample_first_passage_times(
    params: StableParams,
    level: float,
    size: int,
    seed,
    *,
    horizon: float = 1e3,
    resolution: float = 0.2,
    stop_distance: float = 1e-5,
) -> np.ndarray:
    """Independent copies of ``T_level`` by adaptive exact-increment stepping.

    Each walker moves with time steps ``(resolution * d) ** alpha`` where ``d`` is
    its distance above the level, so a step spans about ``resolution * d`` in
    space and the path cannot jump over the level (there are no negative
    jumps).  A walker closer than ``stop_distance`` is taken to have arrived.
    Walkers still alive at ``horizon`` get ``inf``.
    """
    rng = _rng(seed)
    a = params.alpha
    t = np.zeros(size)
    d = np.full(size, float(level))
    out = np.full(size, np.inf)
    alive = np.arange(size)
    while alive.size:
        dt = np.maximum((resolution * d) ** a, 1e-12)
        d = d + stable_increments(params, dt, alive.size, rng)
        t = t + dt
        hit = d <= stop_distance
        out[alive[hit]] = t[hit]
        keep = ~hit & (t < horizon)
        alive, t, d = alive[keep], t[keep], d[keep]
    return out


# -- height process --------------------------------------------------------------

def _death_index(values: np.ndarray, epsilon: float) -> np.ndarray:
    """For each ``s``, the first ``j > s`` with ``values[j] <= values[s] - epsilon``."""
    rmq = SparseMin(values)
    start = np.arange(1, values.size + 1)
    return rmq.first_below(start, values - epsilon)


def approx_height_process(path: RealPath, epsilon: float) -> RealPath:
    """``(1/eps) * |{s <= t : X_s - inf_[s,t] X < eps}|`` at every grid time.

    A time ``s`` stops counting at the first later time where ``X`` drops by
    ``epsilon`` below ``X_s``; the measure is a left Riemann sum on the grid.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    values = path.values
    n = values.size
    death = _death_index(values, epsilon)
    # s < i counts at time i while i < death[s]
    s = np.arange(n)
    delta = np.bincount(np.minimum(s + 1, n), minlength=n + 1)[: n + 1].astype(np.int64)
    delta -= np.bincount(death, minlength=n + 1)[: n + 1]
    delta[n:] = 0
    counts = np.cumsum(delta[:n])
    counts[0] = 0
    return RealPath(path.horizon, path.grid_step, counts * (path.grid_step / epsilon))


def default_epsilon(params: StableParams, grid_step: float) -> float:
    """Geometric mean of the grid's spatial resolution and 1."""
    return float(grid_step ** (0.5 / params.alpha))


def epsilon_schedule(path: RealPath, ks) -> list[dict]:
    """Heights at ``eps = 2**-k`` with successive sup-norm differences."""
    out = []
    prev = None
    for k in ks:
        h = approx_height_process(path, 2.0**-k)
        diff = None if prev is None else float(np.max(np.abs(h.values - prev.values)))
        out.append({"k": int(k), "epsilon": 2.0**-k, "sup_change": diff, "height": h})
        prev = h
    return out


def reflected_height_constant(path: RealPath, height: RealPath) -> float:
    """Least-squares factor ``c`` in ``height ~ c * (X - I)``."""
    refl = path.values - np.minimum.accumulate(path.values)
    denom = float(np.dot(refl, refl))
    return float(np.dot(refl, height.values) / denom) if denom > 0 else float("nan")


# -- conditioned construction ----------------------------------------------------

@dataclass(frozen=True)
class GLocation:
    g: float
    index: int
    tolerance: float  # bound on |rescaled terminal value + s|


def _locate(times: np.ndarray, x: np.ndarray, s: float, alpha: float) -> GLocation:
    d = np.minimum.accumulate(x) + s * times ** (1.0 / alpha)
    down = np.flatnonzero((d[:-1] > 0) & (d[1:] <= 0))
    if not down.size:
        raise NoCrossingError(f"no crossing of -s u^(1/alpha) on the grid for s={s}")
    i = int(down[-1]) + 1
    g = float(times[i])
    jump = abs(x[i] - x[i - 1])
    step = times[i] - times[i - 1]
    tol = g ** (-1.0 / alpha) * (jump + s * step ** (1.0 / alpha))
    return GLocation(g, i, float(tol))


def locate_g(path: RealPath, s: float, alpha: float) -> GLocation:
    """Last time ``u <= 1`` at which the infimum meets the curve ``-s u**(1/alpha)``.

    With ``D(u) = I_u + s u**(1/alpha)``, the infimum is continuous (no
    negative jumps) and the meeting points where ``X`` sits at its infimum are
    the downward crossings of ``D``.  The result is the grid time ending the
    last step that goes from ``D > 0`` to ``D <= 0``.
    """
    if s <= 0:
        raise ValidationError("s must be positive")
    if path.horizon < 1.0 - 1e-12:
        raise ValidationError("path horizon must cover [0, 1]")
    last = int(path.index_at(1.0))
    return _locate(path.times[: last + 1], path.values[: last + 1], s, alpha)


@dataclass(frozen=True)
class RescaledForest:
    g: float
    tolerance: float
    bridge: RealPath
    heights: RealPath
    excursions: ExcursionSet


def excursions_of(bridge: RealPath, heights: RealPath) -> ExcursionSet:
    """Height excursions between successive new infima of the bridge."""
    x = bridge.values
    lows = np.flatnonzero(x < np.minimum.accumulate(np.concatenate([[np.inf], x[:-1]])))
    lows = np.concatenate([lows, [x.size - 1]]) if lows[-1] != x.size - 1 else lows
    out = []
    for a, b in zip(lows[:-1], lows[1:]):
        if b - a < 2:
            continue
        sub = heights.values[a : b + 1].copy()
        out.append(
            Excursion(
                level=float(-x[a]),
                start=int(a),
                end=int(b),
                path=RealPath((b - a) * heights.grid_step, heights.grid_step, sub),
            )
        )
    return ExcursionSet(tuple(out))


def conditioned_forest_by_rescaling(
    path: RealPath, s: float, alpha: float, epsilon: float | None = None
) -> RescaledForest:
    """First-passage bridge, its heights and excursions from one free path.

    The bridge is ``g**(-1/alpha) X(g u)`` and the heights are
    ``g**((1-alpha)/alpha) H(g u)`` on ``[0, 1]``, sampled on the grid of
    the original path restricted to ``[0, g]``.
    """
    loc = locate_g(path, s, alpha)
    i = loc.index
    g = loc.g
    piece = RealPath(g, path.grid_step, path.values[: i + 1])
    eps = epsilon if epsilon is not None else default_epsilon(StableParams(alpha), path.grid_step)
    h = approx_height_process(piece, eps)
    bridge = RealPath(1.0, 1.0 / i, g ** (-1.0 / alpha) * piece.values)
    heights = RealPath(1.0, 1.0 / i, g ** ((1.0 - alpha) / alpha) * h.values)
    return RescaledForest(g, loc.tolerance, bridge, heights, excursions_of(bridge, heights))


def log_time_grid(points: int = 12_000, t_min: float = 1e-9) -> np.ndarray:
    """``0`` followed by ``points`` log-spaced times from ``t_min`` to 1."""
    return np.concatenate([[0.0], np.geomspace(t_min, 1.0, points)])


def sample_stable_at(params: StableParams, times, seed) -> np.ndarray:
    """Values of one path at the increasing times ``times`` (``times[0] == 0``)."""
    times = np.asarray(times, dtype=float)
    rng = _rng(seed)
    out = np.zeros(times.size)
    np.cumsum(stable_increments(params, np.diff(times), times.size - 1, rng), out=out[1:])
    return out


def bridge_marginal_samples(
    params: StableParams,
    s: float,
    size: int,
    seed,
    times=(0.5,),
    grid=None,
) -> dict:
    """Rescaled bridge values at fixed times, with the matching ``g``, over independent paths.

    ``grid`` is the list of simulation times on ``[0, 1]``; the default is
    log-spaced, which keeps the relative time resolution the same whatever
    the size of ``g``.  Runs without a grid crossing are counted as misses.
    """
    grid = log_time_grid() if grid is None else np.asarray(grid, dtype=float)
    dt = np.diff(grid)
    curve = s * grid ** (1.0 / params.alpha)
    g_all = np.full(size, np.nan)
    vals = {t: np.full(size, np.nan) for t in times}
    # fixed batch size keeps results independent of memory settings
    batch = 64
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = root.spawn((size + batch - 1) // batch)
    for b, child in enumerate(streams):
        rows = min(batch, size - b * batch)
        rng = np.random.default_rng(child)
        x = np.zeros((rows, grid.size))
        np.cumsum(stable_increments(params, dt, (rows, dt.size), rng), axis=1, out=x[:, 1:])
        d = np.minimum.accumulate(x, axis=1) + curve
        down = (d[:, :-1] > 0) & (d[:, 1:] <= 0)
        found = down.any(axis=1)
        last = down.shape[1] - 1 - np.argmax(down[:, ::-1], axis=1) + 1
        rows_idx = np.flatnonzero(found)
        g = grid[last[rows_idx]]
        g_all[b * batch + rows_idx] = g
        for t in times:
            j = np.searchsorted(grid, t * g, side="right") - 1
            vals[t][b * batch + rows_idx] = g ** (-1.0 / params.alpha) * x[rows_idx, j]
    ok = ~np.isnan(g_all)
    return {
        "g": g_all[ok],
        "values": {t: v[ok] for t, v in vals.items()},
        "misses": int((~ok).sum()),
    }


# -- alpha = 2 closed forms ------------------------------------------------------

def phat(r, y):
    """Density of ``-X_r`` for ``alpha = 2``: Gaussian with variance ``2r``."""
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.exp(-(y**2) / (4 * r)) / np.sqrt(4 * np.pi * r)


def first_passage_density_alpha2(s, t):
    """``P(T_s in dt)/dt = (s/t) phat_t(s)``."""
    return s / np.asarray(t, dtype=float) * phat(t, s)


def _check_fpb_domain(s, t, u):
    if s <= 0 or t <= 0:
        raise ValidationError("need s > 0 and t > 0")
    if not 0 <= u < t:
        raise ValidationError(f"need 0 <= u < t, got u={u}, t={t}")


def fpb_density_alpha2(s: float, t: float, u: float, x):
    """h-transform weight turning the killed walk at time ``u`` into the bridge.

    ``(t (s+x) / (s (t-u))) * phat_{t-u}(s+x) / phat_t(s)`` for ``x > -s``.
    """
    _check_fpb_domain(s, t, u)
    x = np.asarray(x, dtype=float)
    if np.any(x <= -s):
        raise ValidationError("need x > -s")
    return t * (s + x) / (s * (t - u)) * phat(t - u, s + x) / phat(t, s)


def fpb_marginal_pdf(s: float, t: float, u: float, x):
    """Density of the first-passage bridge at time ``0 < u < t``.

    Free density killed at ``-s`` (reflection principle) times the weight.
    """
    _check_fpb_domain(s, t, u)
    if u == 0:
        raise ValidationError("the marginal at u = 0 is a point mass")
    x = np.asarray(x, dtype=float)
    inside = x > -s
    xs = np.where(inside, x, 0.0)
    killed = phat(u, xs) - phat(u, xs + 2 * s)
    w = t * (s + xs) / (s * (t - u)) * phat(t - u, s + xs) / phat(t, s)
    return np.where(inside, killed * w, 0.0)


def fpb_marginal_cdf(s: float, t: float, u: float, points: int = 20001):
    """Numerical CDF of the bridge marginal as a callable (trapezoid rule)."""
    spread = 12 * np.sqrt(2 * max(u, t - u)) + 2 * s
    grid = np.linspace(-s, spread, points)
    pdf = fpb_marginal_pdf(s, t, u, grid)
    cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2 * np.diff(grid))])
    cdf /= cdf[-1]
    return lambda x: np.interp(x, grid, cdf, left=0.0, right=1.0)


def bessel3_bridge_pdf(b: float, v: float, y, length: float = 1.0):
    """Density at time ``v`` of a 3-d Bessel bridge from 0 to ``b`` over ``[0, length]``.

    The Bessel process is the norm of a 3-d Brownian motion with variance
    ``2t`` per coordinate, matching ``psi(lam) = lam**2``.
    """
    y = np.asarray(y, dtype=float)
    if not 0 < v < length:
        raise ValidationError("need 0 < v < length")
    var0 = 2 * v
    var1 = 2 * (length - v)
    vtot = 2 * length
    # radial density from 0, then the radial transition from y to b
    start = np.sqrt(2 / np.pi) * y**2 * var0**-1.5 * np.exp(-(y**2) / (2 * var0))
    ypos = np.where(y > 0, y, 1.0)
    trans = (b / ypos) * (
        np.exp(-((b - y) ** 2) / (2 * var1)) - np.exp(-((b + y) ** 2) / (2 * var1))
    ) / np.sqrt(2 * np.pi * var1)
    whole = np.sqrt(2 / np.pi) * b**2 * vtot**-1.5 * np.exp(-(b**2) / (2 * vtot))
    return np.where(y > 0, start * trans / whole, 0.0)


def require_finite(t, what="first passage"):
    if t is None or np.isinf(t):
        raise HorizonError(f"{what} not reached within the horizon")
    return t
