"""Directional speeds and radial shape profiles of single-type BRWs.

All estimates come from the same primitive: for a set of integer directions
``x`` we record, generation by generation, the largest projection ``<z, x>``
over visited sites ``z``. A radius ``r`` (in sites along the unit vector) is
hit at the first generation where ``<z, x> >= r |x|``, which is checked in
exact integer arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Optional, Sequence

import numpy as np

from .advantage import rho_max
from .engine import LatticeState, newly_colored, run
from .laws import ReproductionLaw, TwoTypeConfig


@dataclass
class SpeedEstimate:
    direction: tuple[int, ...]
    tau_hat: float
    standard_error: float
    horizon: int
    replications: int
    hitting_curve: list[tuple[int, float]]
    regression_se: float = 0.0
    insufficient: bool = False

    @property
    def time_constant(self) -> float:
        return math.inf if self.tau_hat == 0 else 1.0 / self.tau_hat


@dataclass
class ShapeEstimate:
    directions: list[tuple[int, ...]]
    radial: dict[tuple[int, ...], float]
    standard_error: dict[tuple[int, ...], float]
    horizon: int
    replications: int


@dataclass(frozen=True)
class SpeedComparison:
    direction: tuple[int, ...]
    tau_red: float
    tau_blue: float
    se_red: float
    se_blue: float

    @property
    def pooled_se(self) -> float:
        return math.hypot(self.se_red, self.se_blue)

    @property
    def z(self) -> float:
        diff = self.tau_blue - self.tau_red
        if self.pooled_se == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.pooled_se


class _Projections:
    """Observer keeping the running max of ``<z, x>`` for each direction."""

    def __init__(self, directions: np.ndarray):
        self.directions = directions
        self.running = np.full(len(directions), np.iinfo(np.int64).min, dtype=np.int64)
        self.per_generation: list[np.ndarray] = []

    def __call__(self, state: LatticeState) -> None:
        keys = newly_colored(state)
        if keys.size:
            proj = state.codec.decode(keys) @ self.directions.T
            self.running = np.maximum(self.running, proj.max(axis=0))
        self.per_generation.append(self.running.copy())


def _as_directions(directions, d: int) -> np.ndarray:
    arr = np.array([tuple(int(c) for c in x) for x in directions], dtype=np.int64).reshape(-1, d)
    if (np.abs(arr).sum(axis=1) == 0).any():
        raise ValueError("directions must be nonzero")
    return arr


def projection_runs(law: ReproductionLaw, directions, horizon: int, replications: int,
                    seed: int = 0, validate: bool = True) -> np.ndarray:
    """Running max projections, shape ``(replications, horizon + 1, n_directions)``."""
    dirs = _as_directions(directions, law.dimension)
    config = TwoTypeConfig(law, master_seed=seed, validate=validate)
    out = np.empty((replications, horizon + 1, len(dirs)), dtype=np.int64)
    for r in range(replications):
        obs = _Projections(dirs)
        run(config, horizon, observers=[obs], replication=r, keep_state=False)
        out[r] = np.array(obs.per_generation)
    return out


def _hitting_times(proj: np.ndarray, norm2: int, radii: np.ndarray) -> np.ndarray:
    """First generation reaching each radius; ``proj`` is (reps, T+1). -1 if never."""
    reps, steps = proj.shape
    hit = np.full((reps, radii.size), -1, dtype=np.int64)
    for i, r in enumerate(radii):
        # projections are bounded by horizon * max step, far below 2**31
        ok = (proj >= 0) & (proj * proj >= int(r) * int(r) * norm2)
        any_ok = ok.any(axis=1)
        hit[any_ok, i] = ok[any_ok].argmax(axis=1)
    return hit


def _slope(h: np.ndarray, r: np.ndarray) -> tuple[float, float]:
    """LS slope of r on h and its residual standard error."""
    hc = h - h.mean()
    sxx = float(hc @ hc)
    if sxx == 0:
        return math.nan, math.nan
    b = float(hc @ (r - r.mean())) / sxx
    if r.size <= 2:
        return b, 0.0
    resid = (r - r.mean()) - b * hc
    return b, math.sqrt(float(resid @ resid) / (r.size - 2) / sxx)


def _front(h: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Keep the farthest radius per distinct hitting time (radii ascend, so the last one)."""
    last = np.r_[h[1:] != h[:-1], True]
    return h[last], r[last]


def _front_slope(h: np.ndarray, r: np.ndarray) -> tuple[float, float]:
    hf, rf = _front(h, r)
    return _slope(hf, rf) if hf.size >= 2 else (math.nan, math.nan)


def speed_from_projections(proj: np.ndarray, x: Sequence[int], bound: float) -> SpeedEstimate:
    """Hitting-time regression over the upper half of the radii hit by every run."""
    x = tuple(int(c) for c in x)
    reps, steps = proj.shape
    horizon = steps - 1
    norm2 = sum(c * c for c in x)
    final = proj[:, -1]
    # largest radius every replication reached: floor(min final projection / |x|)
    low = int(final.min())
    r_max = 0 if low <= 0 else math.isqrt(low * low // norm2)
    if r_max == 0:
        return SpeedEstimate(x, 0.0, 0.0, horizon, reps, [], insufficient=True)
    radii = np.arange(1, r_max + 1)
    hits = _hitting_times(proj, norm2, radii).astype(np.float64)
    mean_hit = hits.mean(axis=0)
    curve = [(int(r), float(h)) for r, h in zip(radii, mean_hit)]
    sel = radii >= math.ceil(r_max / 2)
    if sel.sum() < 2:
        tau = float(radii[-1]) / mean_hit[-1] if mean_hit[-1] > 0 else 0.0
        return SpeedEstimate(x, min(tau, bound), 0.0, horizon, reps, curve, insufficient=True)
    rr = radii[sel].astype(np.float64)
    # staircase hitting times (several radii first hit together) would bias the
    # slope, so regress the front position against time instead
    tau, reg_se = _front_slope(mean_hit[sel], rr)
    if math.isnan(tau):
        return SpeedEstimate(x, 0.0, 0.0, horizon, reps, curve, insufficient=True)
    # jackknife over replications for the sampling error of tau
    jk_se = 0.0
    if reps > 1:
        total = hits[:, sel].sum(axis=0)
        loo = np.array([_front_slope((total - hits[i, sel]) / (reps - 1), rr)[0] for i in range(reps)])
        loo = loo[~np.isnan(loo)]
        if loo.size > 1:
            jk_se = math.sqrt((loo.size - 1) / loo.size * float(((loo - loo.mean()) ** 2).sum()))
    se = math.hypot(jk_se, reg_se)
    # a least-squares slope is a weighted mean of secant slopes, which the
    # displacement bound caps only up to lattice rounding; project back
    tau = min(max(tau, 0.0), bound)
    return SpeedEstimate(x, tau, se, horizon, reps, curve, regression_se=reg_se)


def estimate_speed(law: ReproductionLaw, x: Sequence[int], horizon: int, replications: int,
                   seed: int = 0, validate: bool = True) -> SpeedEstimate:
    proj = projection_runs(law, [x], horizon, replications, seed, validate)
    return speed_from_projections(proj[:, :, 0], x, rho_max(law))


def direction_grid(d: int, bound: int) -> list[tuple[int, ...]]:
    """Primitive integer vectors (gcd 1) with every coordinate in [-bound, bound]."""
    out = []
    for v in product(range(-bound, bound + 1), repeat=d):
        if any(v) and math.gcd(*v) == 1:
            out.append(v)
    return out


def estimate_shape(law: ReproductionLaw, horizon: int, replications: int, direction_norm_bound: int = 1,
                   seed: int = 0, validate: bool = True,
                   directions: Optional[Iterable[Sequence[int]]] = None) -> ShapeEstimate:
    """Mean of ``max <z, x/|x|> / T`` over visited ``z`` for each grid direction."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    dirs = [tuple(v) for v in directions] if directions is not None else direction_grid(law.dimension, direction_norm_bound)
    proj = projection_runs(law, dirs, horizon, replications, seed, validate)
    norms = np.sqrt([float(sum(c * c for c in x)) for x in dirs])
    vals = proj[:, -1, :].astype(np.float64) / norms[None, :] / horizon
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(replications) if replications > 1 else np.zeros(len(dirs))
    return ShapeEstimate(
        directions=dirs,
        radial={x: float(m) for x, m in zip(dirs, mean)},
        standard_error={x: float(s) for x, s in zip(dirs, se)},
        horizon=horizon,
        replications=replications,
    )


def compare_speeds(red_law: ReproductionLaw, blue_law: ReproductionLaw, directions, horizon: int,
                   replications: int, seed: int = 0, validate: bool = True) -> list[SpeedComparison]:
    """Independent single-type speed estimates per direction for both laws."""
    dirs = [tuple(v) for v in directions]
    # distinct seed spaces so identical laws still give independent samples
    proj_r = projection_runs(red_law, dirs, horizon, replications, seed, validate)
    proj_b = projection_runs(blue_law, dirs, horizon, replications, seed ^ 0xB10E, validate)
    out = []
    for j, x in enumerate(dirs):
        er = speed_from_projections(proj_r[:, :, j], x, rho_max(red_law))
        eb = speed_from_projections(proj_b[:, :, j], x, rho_max(blue_law))
        out.append(SpeedComparison(x, er.tau_hat, eb.tau_hat, er.standard_error, eb.standard_error))
    return out
