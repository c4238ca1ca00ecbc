"""Likelihood of observed treatment paths and MH posterior sampling.

The log-likelihood of one unit's stratum path is the sum of log intensities
at the recorded switch times minus a left-endpoint Riemann sum of the
intensity over [0, t_max] on the same dt grid that generated the data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import PARAM_DIM, IntensitySpec, TimeGrid, UnitRecord, log_intensity
from .errors import ConfigError, DiagnosticError
from .simgen import Cohort, make_rng

PRIOR_SD = 5.0


@dataclass(frozen=True)
class McmcConfig:
    n_iter: int = 4000
    burn_in: int = 2000
    thin: int = 4
    proposal_scale: float = 0.25
    adapt: bool = True
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.burn_in < self.n_iter):
            raise ConfigError("burn_in must satisfy 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")

    @property
    def n_draws(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


@dataclass(frozen=True)
class PosteriorDraws:
    draws: np.ndarray
    acceptance_rate: float
    family: str


@dataclass(frozen=True)
class PathFeatures:
    """Per-row histories for a set of units, stacked for vectorized evaluation.

    ``riem_*`` rows sit at the left endpoints of every dt step in [0, t_max);
    ``jump_*`` rows sit at the recorded switch times, with left-limit stratum
    and time-since-change.
    """

    n_units: int
    dt: float
    riem_unit: np.ndarray
    riem_a: np.ndarray
    riem_z3: np.ndarray
    riem_tsc: np.ndarray
    riem_bmi: np.ndarray
    jump_unit: np.ndarray
    jump_a: np.ndarray
    jump_z3: np.ndarray
    jump_tsc: np.ndarray
    jump_bmi: np.ndarray


def _history_arrays(unit: UnitRecord, times: np.ndarray, grid: TimeGrid):
    """Vectorized history_at over an array of times (left-limit semantics)."""
    st = unit.switch_times
    k = np.searchsorted(st, times, side="left")
    a_minus = (int(unit.a0) ^ (k & 1)).astype(float)
    if st.size:
        last = np.where(k > 0, st[np.maximum(k - 1, 0)], 0.0)
    else:
        last = np.zeros_like(times, dtype=float)
    idx = np.minimum((times / grid.covariate_dt + 1e-9).astype(np.int64), unit.z3_path.size - 1)
    z3 = unit.z3_path[idx]
    bmi = float(unit.z2[0]) if unit.z2.size else 0.0
    return a_minus, z3, times - last, np.full(times.shape, bmi)


def build_features(units: Sequence[UnitRecord], grid: TimeGrid) -> PathFeatures:
    riem, jump = [], []
    for i, unit in enumerate(units):
        n_rows = int(round(unit.t_max / grid.dt))
        times = np.arange(n_rows) * grid.dt
        a, z3, tsc, bmi = _history_arrays(unit, times, grid)
        riem.append((np.full(n_rows, i), a, z3, tsc, bmi))
        if unit.switch_times.size:
            tj = unit.switch_times
            aj, zj, tscj, bj = _history_arrays(unit, tj, grid)
            jump.append((np.full(tj.size, i), aj, zj, tscj, bj))
    empty = (np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0))
    r = [np.concatenate(cols) for cols in zip(*riem)] if riem else list(empty)
    j = [np.concatenate(cols) for cols in zip(*jump)] if jump else list(empty)
    return PathFeatures(
        n_units=len(units),
        dt=grid.dt,
        riem_unit=r[0].astype(np.int64),
        riem_a=r[1],
        riem_z3=r[2],
        riem_tsc=r[3],
        riem_bmi=r[4],
        jump_unit=j[0].astype(np.int64),
        jump_a=j[1],
        jump_z3=j[2],
        jump_tsc=j[3],
        jump_bmi=j[4],
    )


def loglik_by_unit(theta, family: str, feats: PathFeatures) -> np.ndarray:
    """Vector of per-unit path log-likelihoods under one parameter vector."""
    spec = IntensitySpec(family, np.asarray(theta, dtype=float))
    out = np.zeros(feats.n_units)
    if feats.jump_unit.size:
        lj = log_intensity(spec, feats.jump_a, feats.jump_z3, feats.jump_tsc, feats.jump_bmi)
        out += np.bincount(feats.jump_unit, weights=lj, minlength=feats.n_units)
    lr = log_intensity(spec, feats.riem_a, feats.riem_z3, feats.riem_tsc, feats.riem_bmi)
    out -= np.bincount(
        feats.riem_unit, weights=np.exp(lr) * feats.dt, minlength=feats.n_units
    )
    return out


def switching_loglik(theta, family: str, unit: UnitRecord, grid: TimeGrid) -> float:
    """Path log-likelihood of one unit's observed switch history."""
    feats = build_features([unit], grid)
    return float(loglik_by_unit(theta, family, feats)[0])


def log_prior(theta) -> float:
    """Independent Normal(0, 5^2) log-density summed over coordinates."""
    t = np.asarray(theta, dtype=float)
    return float(-0.5 * np.sum((t / PRIOR_SD) ** 2) - t.size * np.log(PRIOR_SD * np.sqrt(2 * np.pi)))


def run_mh(log_post, dim: int, mc: McmcConfig, theta0=None):
    """Adaptive random-walk Metropolis-Hastings on a log posterior.

    The per-coordinate proposal scale adapts toward ~0.3 acceptance during
    burn-in only, so retained draws come from a fixed symmetric kernel and
    acceptance depends on log-posterior differences alone.
    """
    rng = make_rng(mc.seed, 0x3C41)
    theta = np.zeros(dim) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    scale = np.full(dim, mc.proposal_scale)
    lp = log_post(theta)
    if not np.isfinite(lp):
        raise ConfigError("log posterior not finite at the initial point")
    draws = np.empty((mc.n_draws, dim))
    kept = 0
    accepted_post = 0
    window_acc = 0
    for it in range(mc.n_iter):
        prop = theta + scale * rng.standard_normal(dim)
        lp_prop = log_post(prop)
        if np.log(rng.random()) < lp_prop - lp:
            theta, lp = prop, lp_prop
            window_acc += 1
            if it >= mc.burn_in:
                accepted_post += 1
        if mc.adapt and it < mc.burn_in and (it + 1) % 50 == 0:
            rate = window_acc / 50.0
            scale *= np.exp(rate - 0.3)
            window_acc = 0
        if it >= mc.burn_in and (it - mc.burn_in) % mc.thin == 0 and kept < draws.shape[0]:
            draws[kept] = theta
            kept += 1
    n_post = mc.n_iter - mc.burn_in
    return draws[:kept], accepted_post / max(n_post, 1)


def sample_posterior(cohort: Cohort, family: str, mc: McmcConfig, grid: Optional[TimeGrid] = None) -> PosteriorDraws:
    """Posterior draws of the observational switching parameters."""
    if not cohort.units:
        raise ConfigError("cohort is empty")
    grid = grid or getattr(cohort, "grid", None) or TimeGrid()
    feats = build_features(cohort.units, grid)
    if family not in PARAM_DIM:
        raise ConfigError(f"unknown intensity family {family!r}")
    dim = PARAM_DIM[family]

    def log_post(theta):
        return float(loglik_by_unit(theta, family, feats).sum()) + log_prior(theta)

    draws, acc = run_mh(log_post, dim, mc)
    if acc == 0.0:
        raise DiagnosticError("MH chain accepted nothing after burn-in")
    return PosteriorDraws(draws=draws, acceptance_rate=acc, family=family)


def loglik_matrix(draws: PosteriorDraws, feats: PathFeatures) -> np.ndarray:
    """(n_draws, n_units) matrix of per-unit log-likelihoods across draws."""
    return np.stack([loglik_by_unit(d, draws.family, feats) for d in draws.draws])


def log_denominators(draws: PosteriorDraws, feats: PathFeatures) -> np.ndarray:
    """Posterior-averaged observational path density, per unit, in log space."""
    mat = loglik_matrix(draws, feats)
    return logsumexp(mat, axis=0) - np.log(mat.shape[0])


def split_r(x: np.ndarray) -> float:
    """Split-chain convergence ratio for one coordinate's retained draws."""
    m = x.size // 2
    first, second = x[:m], x[m : 2 * m]
    w = (np.var(first, ddof=1) + np.var(second, ddof=1)) / 2.0
    b = m * (np.mean(first) - np.mean(second)) ** 2 / 2.0
    if w == 0.0:
        return 1.0 if b == 0.0 else float("inf")
    var_plus = (m - 1) / m * w + b / m
    return float(np.sqrt(var_plus / w))


def posterior_summary(draws: PosteriorDraws) -> dict:
    """Per-coordinate mean, sd and split-chain ratio of the retained draws."""
    d = draws.draws
    if d.shape[0] < 10:
        raise ConfigError("need at least 10 retained draws to summarize")
    return {
        "mean": d.mean(axis=0),
        "sd": d.std(axis=0, ddof=1),
        "split_r": np.array([split_r(d[:, k]) for k in range(d.shape[1])]),
        "acceptance_rate": draws.acceptance_rate,
    }
