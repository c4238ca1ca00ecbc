"""Cohort generation for the four simulation settings.

One stepping kernel drives both worlds: treatment-stratum switches and
completion are drawn per dt step with probability min(intensity * dt, 1),
the time-varying covariate updates on its coarser grid, and path integrals
accumulate as left-endpoint Riemann sums. The observational and experimental
worlds differ only in the switching intensity handed to the kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    LINEXP,
    LOG_CEIL,
    LOG_FLOOR,
    SIGMOID_SWITCH,
    IntensitySpec,
    TimeGrid,
    UnitRecord,
    log_intensity,
    sigmoid,
)
from .errors import ConfigError

CASE1 = "case1"
CASE2 = "case2"
CASE3 = "case3"
CASE4 = "case4"
SIM_CASES = (CASE1, CASE2, CASE3, CASE4)

# Sigmoid threshold inside the nonlinear outcome integrand.
OUTCOME_SIGMOID_K = 1.5

# Dynamics coefficient layout, shared by the true models and BPM's fitted
# ones: z3 transition over (1, int_A, z3_prev, z1_mean, z2_mean, u),
# completion log-intensity over (1, a, z1_mean, z2_mean, z3_lag, u).
_Z3_COEFS = {
    CASE1: np.array([1.0, 0.1, 0.025, 0.01, 0.01, 0.0]),
    CASE2: np.array([1.0, 0.1, 0.025, 0.01, 0.01, 0.0]),
    CASE3: np.array([1.0, 0.1, 0.025, 0.01, 0.01, 0.01]),
    CASE4: np.array([1.0, 0.1, 0.025, 0.01, 0.01, 0.01]),
}
_Z3_SD = 1.0
_COMPLETION_COEFS = {
    CASE1: np.array([0.1, 0.05, 0.06, -0.1, -0.05, 0.0]),
    CASE2: np.array([0.1, 0.05, 0.06, -0.1, -0.05, 0.0]),
    CASE3: np.array([0.1, 0.05, 0.06, 0.08, -0.05, 0.07]),
    CASE4: np.array([0.1, 0.05, 0.06, 0.08, -0.05, 0.07]),
}
_OBS_SWITCHING = {
    CASE1: IntensitySpec(LINEXP, np.array([-0.1, 0.05, 0.1])),
    CASE2: IntensitySpec(SIGMOID_SWITCH, np.array([0.8, -0.5, 1.2])),
    CASE3: IntensitySpec(LINEXP, np.array([-0.1, 0.05, 0.1])),
    CASE4: IntensitySpec(SIGMOID_SWITCH, np.array([0.8, -0.5, 1.2])),
}
_OUTCOME_SD = {CASE1: 0.5, CASE2: 0.1, CASE3: 0.3, CASE4: 0.3}
_HAS_LATENT = {CASE1: False, CASE2: False, CASE3: True, CASE4: True}


def make_rng(seed: int, *tags: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, *tags); splittable and stable."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed,) + tags)))


def derive_unit_seed(seed: int, index: int) -> int:
    """Pure function mapping a cohort seed and unit index to the unit's seed."""
    return int(np.random.SeedSequence((seed, index)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class CaseConfig:
    """Identifies a simulation setting and carries its fixed dimensions."""

    case_id: str
    grid: TimeGrid = field(default_factory=TimeGrid)
    p1: int = 30
    p2: int = 10
    completion_override: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.case_id not in SIM_CASES:
            raise ConfigError(f"unknown case_id {self.case_id!r}")
        if self.completion_override is not None:
            arr = np.asarray(self.completion_override, dtype=float)
            if arr.shape != (6,):
                raise ConfigError("completion_override must have 6 coefficients")
            object.__setattr__(self, "completion_override", arr)

    @property
    def has_latent(self) -> bool:
        return _HAS_LATENT[self.case_id]

    @property
    def z3_coefs(self) -> np.ndarray:
        return _Z3_COEFS[self.case_id]

    @property
    def z3_sd(self) -> float:
        return _Z3_SD

    @property
    def completion_coefs(self) -> np.ndarray:
        if self.completion_override is not None:
            return self.completion_override
        return _COMPLETION_COEFS[self.case_id]

    @property
    def outcome_sd(self) -> float:
        return _OUTCOME_SD[self.case_id]

    def observational_switching(self) -> IntensitySpec:
        return _OBS_SWITCHING[self.case_id]

    @property
    def policy_family(self) -> str:
        return LINEXP if self.case_id in (CASE1, CASE3) else SIGMOID_SWITCH


@dataclass(frozen=True)
class ReplicateParams:
    """Per-replicate hyperdraws shared by the training cohort and every
    evaluation cohort of that replicate."""

    p: np.ndarray
    loc: np.ndarray
    sigma: np.ndarray
    phi_y1: np.ndarray
    beta: Optional[np.ndarray] = None
    phi_y2: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Cohort:
    units: list
    case_id: str
    seed: int
    n: int
    grid: Optional[TimeGrid] = None


def draw_replicate_params(cfg: CaseConfig, seed: int) -> ReplicateParams:
    """Draw the replicate-level hyperparameters for one simulation run."""
    rng = make_rng(seed, 0xA11CE)
    p = rng.uniform(0.1, 0.9, cfg.p1)
    loc = rng.normal(0.0, 0.5, cfg.p2)
    beta = rng.normal(1.0, 0.5, cfg.p2) if cfg.has_latent else None
    sigma = rng.uniform(0.1, 1.0, cfg.p2)
    if cfg.has_latent:
        phi_y1 = rng.normal(0.0, 0.1, cfg.p1)
        phi_y2 = None
    else:
        phi = rng.normal(0.0, 0.1, cfg.p1 + cfg.p2)
        phi_y1, phi_y2 = phi[: cfg.p1], phi[cfg.p1 :]
    return ReplicateParams(p=p, loc=loc, sigma=sigma, phi_y1=phi_y1, beta=beta, phi_y2=phi_y2)


# ---------------------------------------------------------------------------
# Random buffers: every draw a unit may need, indexed by purpose and step so
# that identical treatment paths consume identical randomness (two-world
# coupling) regardless of what the switching intensity does.


def _unit_buffers(rng: np.random.Generator, grid: TimeGrid, p1: int, p2: int) -> dict:
    return {
        "z1_u": rng.random(p1),
        "z2_n": rng.standard_normal(p2),
        "u_n": rng.standard_normal(),
        "z3_n": rng.standard_normal(grid.n_cov_points),
        "sw_u": rng.random(grid.n_steps),
        "comp_u": rng.random(grid.n_steps),
        "y_n": rng.standard_normal(),
    }


def _batch_buffers(seed: int, n: int, grid: TimeGrid, p1: int, p2: int) -> dict:
    rng = make_rng(seed, 0xB0FFE2)
    return {
        "z1_u": rng.random((n, p1)),
        "z2_n": rng.standard_normal((n, p2)),
        "u_n": rng.standard_normal(n),
        "z3_n": rng.standard_normal((n, grid.n_cov_points)),
        "sw_u": rng.random((n, grid.n_steps)),
        "comp_u": rng.random((n, grid.n_steps)),
        "y_n": rng.standard_normal(n),
    }


def _stack_unit_buffers(bufs: list) -> dict:
    return {k: np.stack([b[k] for b in bufs]) for k in bufs[0]}


def draw_baselines(cfg: CaseConfig, rp: ReplicateParams, buffers: dict):
    """Baseline covariates and the latent value from pre-drawn randomness."""
    z1 = (buffers["z1_u"] < rp.p).astype(float)
    u = 1.0 + buffers["u_n"]
    if cfg.has_latent:
        z2 = rp.loc + rp.beta * np.atleast_1d(u)[..., None] + rp.sigma * buffers["z2_n"]
    else:
        z2 = rp.loc + rp.sigma * buffers["z2_n"]
    return z1, z2, u


def run_paths(
    grid: TimeGrid,
    switching: IntensitySpec,
    z3_coefs: np.ndarray,
    z3_sd: float,
    completion_coefs: np.ndarray,
    z1_mean: np.ndarray,
    z2_mean: np.ndarray,
    u: np.ndarray,
    buffers: dict,
    z_bmi: Optional[np.ndarray] = None,
) -> dict:
    """Step n coupled trajectories through the dt grid.

    Per step: (possible) covariate redraw, then a completion event with
    probability min(lambda_completion * dt, 1), then - if no completion - a
    switch event with probability min(lambda_switch * dt, 1). Events take
    effect at the right endpoint of their step. Returns path-level arrays.

    ``z3_coefs`` and ``completion_coefs`` may be a single vector of 6
    coefficients or an (n, 6) array with one row per trajectory.
    """
    n = z1_mean.shape[0]
    dt = grid.dt
    stride = grid.cov_stride
    n_steps = grid.n_steps
    z3_coefs = np.atleast_2d(np.asarray(z3_coefs, dtype=float))
    completion_coefs = np.atleast_2d(np.asarray(completion_coefs, dtype=float))
    cz = [z3_coefs[:, j] if z3_coefs.shape[0] > 1 else z3_coefs[0, j] for j in range(6)]
    cc = [
        completion_coefs[:, j] if completion_coefs.shape[0] > 1 else completion_coefs[0, j]
        for j in range(6)
    ]

    active = np.ones(n, dtype=bool)
    a = np.zeros(n, dtype=float)
    t_last_change = np.zeros(n)
    z3 = np.zeros(n)
    int_a = np.zeros(n)
    int_z3 = np.zeros(n)
    int_g = np.zeros(n)
    t_max = np.full(n, grid.t_end)
    events = np.zeros((n, n_steps), dtype=bool)
    z3_full = np.zeros((n, grid.n_cov_points))
    last_cov_idx = np.zeros(n, dtype=np.int64)

    comp_const = cc[0] + cc[2] * z1_mean + cc[3] * z2_mean + cc[5] * u
    z3_const = cz[0] + cz[3] * z1_mean + cz[4] * z2_mean + cz[5] * u

    for k in range(n_steps):
        if not active.any():
            break
        t = k * dt
        if k % stride == 0:
            m = k // stride
            z3_prev = z3.copy()
            mean = z3_const + cz[1] * int_a + cz[2] * z3_prev
            z3_new = mean + z3_sd * buffers["z3_n"][:, m]
            z3 = np.where(active, z3_new, z3)
            z3_full[active, m] = z3[active]
            last_cov_idx[active] = m
            z3_lag = np.where(active, z3_prev, z3)
        else:
            z3_lag = z3

        log_comp = np.clip(
            comp_const + cc[1] * a + cc[4] * z3_lag,
            LOG_FLOOR,
            LOG_CEIL,
        )
        p_comp = np.minimum(np.exp(log_comp) * dt, 1.0)
        completes = active & (buffers["comp_u"][:, k] < p_comp)

        log_sw = log_intensity(switching, a, z3, t - t_last_change, z_bmi)
        p_sw = np.minimum(np.exp(log_sw) * dt, 1.0)
        switches = active & ~completes & (buffers["sw_u"][:, k] < p_sw)

        int_z3 = np.where(active, int_z3 + z3 * dt, int_z3)
        int_g = np.where(
            active, int_g + a * (2.0 * sigmoid(z3, OUTCOME_SIGMOID_K) - 1.0) * dt, int_g
        )
        int_a = np.where(active, int_a + a * dt, int_a)

        t_event = min((k + 1) * dt, grid.t_end)
        t_max[completes] = t_event
        active &= ~completes
        events[switches, k] = True
        a[switches] = 1.0 - a[switches]
        t_last_change[switches] = t_event

    return {
        "t_max": t_max,
        "events": events,
        "n_switches": events.sum(axis=1),
        "int_a": int_a,
        "int_z3": int_z3,
        "int_g": int_g,
        "z3_full": z3_full,
        "last_cov_idx": last_cov_idx,
    }


def _switch_times(events_row: np.ndarray, dt: float, t_end: float) -> np.ndarray:
    idx = np.nonzero(events_row)[0]
    return np.minimum((idx + 1) * dt, t_end)


def _z3_path(z3_row: np.ndarray, t_max: float, grid: TimeGrid, last_idx: int) -> np.ndarray:
    n_entries = int(np.ceil(t_max / grid.covariate_dt - 1e-9)) + 1
    drawn = z3_row[: last_idx + 1]
    if n_entries <= drawn.size:
        return drawn[:n_entries].copy()
    pad = np.full(n_entries - drawn.size, drawn[-1])
    return np.concatenate([drawn, pad])


def outcome_mean(cfg: CaseConfig, rp: ReplicateParams, z1, z2, u, n_switches, int_z3, int_g):
    """Mean of the outcome law given the realized path summaries."""
    z1_mean = z1.mean(axis=-1)
    z2_mean = z2.mean(axis=-1)
    if cfg.case_id == CASE1:
        return 3.0 - 0.1 * n_switches + 0.1 * int_z3 + z1 @ rp.phi_y1 + z2 @ rp.phi_y2
    if cfg.case_id == CASE2:
        return 1.0 - 4.0 * int_g + z1 @ rp.phi_y1 + z2 @ rp.phi_y2
    if cfg.case_id == CASE3:
        return 3.0 - 0.1 * n_switches * z2_mean + 0.1 * int_z3 + z1 @ rp.phi_y1 + 0.6 * u
    if cfg.case_id == CASE4:
        return 1.0 - 3.0 * z2_mean * int_g + z1 @ rp.phi_y1 + 0.6 * u
    raise ConfigError(f"unknown case_id {cfg.case_id!r}")


def _simulate_batch(
    cfg: CaseConfig, rp: ReplicateParams, switching: IntensitySpec, buffers: dict
) -> list:
    z1, z2, u = draw_baselines(cfg, rp, buffers)
    paths = run_paths(
        cfg.grid,
        switching,
        cfg.z3_coefs,
        cfg.z3_sd,
        cfg.completion_coefs,
        z1.mean(axis=1),
        z2.mean(axis=1),
        u,
        buffers,
    )
    y = outcome_mean(cfg, rp, z1, z2, u, paths["n_switches"], paths["int_z3"], paths["int_g"])
    y = y + cfg.outcome_sd * buffers["y_n"]
    units = []
    for i in range(z1.shape[0]):
        units.append(
            UnitRecord(
                z1=z1[i],
                z2=z2[i],
                z3_path=_z3_path(
                    paths["z3_full"][i], paths["t_max"][i], cfg.grid, paths["last_cov_idx"][i]
                ),
                switch_times=_switch_times(paths["events"][i], cfg.grid.dt, cfg.grid.t_end),
                a0=0,
                t_max=float(paths["t_max"][i]),
                y=float(y[i]),
                u=float(u[i]) if cfg.has_latent else None,
            )
        )
    return units


def simulate_unit(
    cfg: CaseConfig, rp: ReplicateParams, switching: IntensitySpec, seed: int
) -> UnitRecord:
    """Simulate a single observational- or experimental-world trajectory."""
    bufs = _unit_buffers(make_rng(seed), cfg.grid, cfg.p1, cfg.p2)
    stacked = {k: np.asarray(v)[None, ...] for k, v in bufs.items()}
    return _simulate_batch(cfg, rp, switching, stacked)[0]


def generate_cohort(
    cfg: CaseConfig,
    rp: ReplicateParams,
    switching: IntensitySpec,
    n: int,
    seed: int,
) -> Cohort:
    """n independent units, each driven by a derived per-unit seed."""
    if n < 1:
        raise ConfigError(f"cohort size must be >= 1, got {n}")
    bufs = [
        _unit_buffers(make_rng(derive_unit_seed(seed, i)), cfg.grid, cfg.p1, cfg.p2)
        for i in range(n)
    ]
    units = _simulate_batch(cfg, rp, switching, _stack_unit_buffers(bufs))
    return Cohort(units=units, case_id=cfg.case_id, seed=seed, n=n, grid=cfg.grid)


def evaluate_policy_loss(
    cfg: CaseConfig,
    rp: ReplicateParams,
    eta,
    family: str,
    n_eval: int = 2000,
    seed: int = 0,
) -> float:
    """Mean of exp(Y) over fresh units following the candidate policy.

    The experimental switching intensity replaces the observational one;
    covariate, completion and outcome mechanisms are untouched.
    """
    if n_eval < 1:
        raise ConfigError(f"n_eval must be >= 1, got {n_eval}")
    eta = np.asarray(getattr(eta, "eta", eta), dtype=float)
    spec = IntensitySpec(family, eta)
    buffers = _batch_buffers(seed, n_eval, cfg.grid, cfg.p1, cfg.p2)
    units = _simulate_batch(cfg, rp, spec, buffers)
    y = np.array([unit.y for unit in units])
    return float(np.mean(np.exp(np.minimum(y, 700.0))))
