"""Synthetic labor-augmentation world standing in for the confidential records.

Observational mode titrates a piecewise-constant dose through a change
intensity responsive to BMI, dilation and time since the last change; policy
mode drives stratum flips with a candidate switching intensity and moves the
dose minimally across the threshold. Both modes share the dilation process,
the delivery rule and the outcome map, so a policy's evaluated loss is a
true two-world counterfactual. The outcome penalizes time spent past a
BMI-dependent staleness tolerance since the last dose change, plus changes
beyond a free allowance.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import yaml
from scipy.stats import truncnorm

from .core import (
    LOG_CEIL,
    LOG_FLOOR,
    OXYTOCIN_LINEXP,
    IntensitySpec,
    TimeGrid,
    UnitRecord,
    log_intensity,
)
from .errors import ConfigError
from .simgen import Cohort, make_rng


@dataclass(frozen=True)
class CslConfig:
    grid: TimeGrid
    bmi_mean: float
    bmi_sd: float
    bmi_lo: float
    bmi_hi: float
    dose_max: float
    dose_step: float
    delta: float
    dil_start_lo: float
    dil_start_hi: float
    dil_rate_base: float
    dil_rate_dose: float
    dil_rate_bmi: float
    dil_noise_sd: float
    delivered_at: float
    tit_base: float
    tit_bmi: float
    tit_dil: float
    tit_gap: float
    refractory: float
    p_up_base: float
    p_up_dil: float
    out_base: float
    out_stale: float
    out_switch_excess: float
    out_free_switches: float
    out_tol_base: float
    out_tol_bmi: float
    out_noise_sd: float
    policy_default: tuple

    def __post_init__(self):
        if self.delta != 0.0 and not (0.0 < self.delta <= self.dose_max):
            raise ConfigError(f"threshold {self.delta} outside the dose range")

    def with_delta(self, delta: float) -> "CslConfig":
        return replace(self, delta=float(delta))

    def standardize_bmi(self, bmi: float) -> float:
        return (bmi - self.bmi_mean) / self.bmi_sd


def load_csl_config(path=None) -> CslConfig:
    if path is None:
        text = importlib.resources.files("rtdtr").joinpath("csl_config.yaml").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    raw = yaml.safe_load(text)
    g = raw["grid"]
    return CslConfig(
        grid=TimeGrid(t_end=g["t_end"], dt=g["dt"], covariate_dt=g["covariate_dt"]),
        bmi_mean=raw["bmi"]["mean"],
        bmi_sd=raw["bmi"]["sd"],
        bmi_lo=raw["bmi"]["lo"],
        bmi_hi=raw["bmi"]["hi"],
        dose_max=raw["dose"]["max"],
        dose_step=raw["dose"]["step"],
        delta=float(raw["delta"]),
        dil_start_lo=raw["dilation"]["start_lo"],
        dil_start_hi=raw["dilation"]["start_hi"],
        dil_rate_base=raw["dilation"]["rate_base"],
        dil_rate_dose=raw["dilation"]["rate_dose"],
        dil_rate_bmi=raw["dilation"]["rate_bmi"],
        dil_noise_sd=raw["dilation"]["noise_sd"],
        delivered_at=raw["dilation"]["delivered_at"],
        tit_base=raw["titration"]["base"],
        tit_bmi=raw["titration"]["bmi"],
        tit_dil=raw["titration"]["dil"],
        tit_gap=raw["titration"]["gap"],
        refractory=float(raw["titration"].get("refractory", 0.0)),
        p_up_base=raw["titration"]["p_up_base"],
        p_up_dil=raw["titration"]["p_up_dil"],
        out_base=raw["outcome"]["base"],
        out_stale=raw["outcome"]["stale"],
        out_switch_excess=raw["outcome"]["switch_excess"],
        out_free_switches=raw["outcome"]["free_switches"],
        out_tol_base=raw["outcome"]["tolerance_base"],
        out_tol_bmi=raw["outcome"]["tolerance_bmi"],
        out_noise_sd=raw["outcome"]["noise_sd"],
        policy_default=tuple(raw["policy_default"]),
    )


def _stratum(dose, delta):
    if delta == 0.0:
        return (np.asarray(dose) > 0.0).astype(np.int8)
    return (np.asarray(dose) >= delta).astype(np.int8)


def _cross_threshold_dose(cfg: CslConfig, new_stratum):
    """Smallest dose move that lands in the requested stratum."""
    if cfg.delta == 0.0:
        up = cfg.dose_step
    else:
        up = np.ceil(cfg.delta / cfg.dose_step) * cfg.dose_step
    down = max(
        0.0,
        (np.ceil(cfg.delta / cfg.dose_step) - 1) * cfg.dose_step if cfg.delta > 0 else 0.0,
    )
    return np.where(np.asarray(new_stratum) == 1, up, down)


def _batch_buffers(cfg: CslConfig, n: int, seed: int) -> dict:
    rng = make_rng(seed, 0xC51)
    return {
        "bmi_u": rng.random(n),
        "z3_0_u": rng.random(n),
        "z3_n": rng.standard_normal((n, cfg.grid.n_cov_points)),
        "ev_u": rng.random((n, cfg.grid.n_steps)),
        "tit_u": rng.random((n, cfg.grid.n_steps)),
        "dir_u": rng.random((n, cfg.grid.n_steps)),
        "y_n": rng.standard_normal(n),
    }


def _run_csl_paths(cfg: CslConfig, buffers: dict, eta: Optional[np.ndarray]) -> dict:
    """Shared stepping kernel: eta=None for observed titration, else the
    candidate stratum-switching policy drives the dose."""
    grid = cfg.grid
    n = buffers["bmi_u"].size
    dt, stride = grid.dt, grid.cov_stride
    a_lo = (cfg.bmi_lo - cfg.bmi_mean) / cfg.bmi_sd
    a_hi = (cfg.bmi_hi - cfg.bmi_mean) / cfg.bmi_sd
    z_bmi = truncnorm.ppf(buffers["bmi_u"], a_lo, a_hi)
    spec = IntensitySpec(OXYTOCIN_LINEXP, eta) if eta is not None else None

    z3 = cfg.dil_start_lo + (cfg.dil_start_hi - cfg.dil_start_lo) * buffers["z3_0_u"]
    dose = np.zeros(n)
    t_last_change = np.zeros(n)
    tol = cfg.out_tol_base * np.exp(-cfg.out_tol_bmi * z_bmi)
    stale = np.zeros(n)
    n_changes = np.zeros(n)
    active = np.ones(n, dtype=bool)
    t_max = np.full(n, grid.t_end)
    dose_full = np.zeros((n, grid.n_steps + 1))
    z3_full = np.zeros((n, grid.n_cov_points))
    z3_full[:, 0] = z3
    last_cov_idx = np.zeros(n, dtype=np.int64)

    for k in range(grid.n_steps):
        if not active.any():
            break
        t = k * dt
        if k % stride == 0 and k > 0:
            m = k // stride
            rate = (
                cfg.dil_rate_base
                + cfg.dil_rate_dose * dose / cfg.dose_max
                + cfg.dil_rate_bmi * z_bmi
            )
            step_val = rate * grid.covariate_dt + cfg.dil_noise_sd * np.sqrt(
                grid.covariate_dt
            ) * buffers["z3_n"][:, m]
            z3_new = np.clip(z3 + step_val, 0.0, cfg.delivered_at + 2.0)
            z3 = np.where(active, z3_new, z3)
            z3_full[active, m] = z3[active]
            last_cov_idx[active] = m
            delivered = active & (z3 >= cfg.delivered_at)
            t_max[delivered] = t
            active &= ~delivered
            if not active.any():
                break

        gap = t - t_last_change
        stale = np.where(active & (gap > tol), stale + dt, stale)
        titration_rate = (
            cfg.tit_base
            + cfg.tit_bmi * z_bmi
            + cfg.tit_dil * z3 / 10.0
            + cfg.tit_gap * gap / 20.0
        )
        if eta is None:
            # Observed practice: one titration process, free to cross the
            # threshold.
            p_event = np.minimum(
                np.exp(np.clip(titration_rate, LOG_FLOOR, LOG_CEIL)) * dt, 1.0
            )
            fires = active & (buffers["ev_u"][:, k] < p_event) & (gap >= cfg.refractory)
            p_up = np.clip(cfg.p_up_base - cfg.p_up_dil * z3, 0.05, 0.95)
            up = buffers["dir_u"][:, k] < p_up
            proposed = np.where(up, dose + cfg.dose_step, dose - cfg.dose_step)
            proposed = np.clip(proposed, 0.0, cfg.dose_max)
            changed = fires & (proposed != dose)
            dose = np.where(changed, proposed, dose)
        else:
            # Policy mode: the candidate intensity decides when to cross the
            # threshold (dose moves minimally into the other stratum), while
            # standard-practice titration keeps adjusting the dose inside
            # the recommended stratum between crossings.
            cur = _stratum(dose, cfg.delta)
            log_rate = log_intensity(spec, cur.astype(float), z3, gap, z_bmi)
            p_flip = np.minimum(np.exp(log_rate) * dt, 1.0)
            flips = active & (buffers["ev_u"][:, k] < p_flip) & (gap >= cfg.refractory)
            crossing = _cross_threshold_dose(cfg, 1 - cur)
            p_tit = np.minimum(
                np.exp(np.clip(titration_rate, LOG_FLOOR, LOG_CEIL)) * dt, 1.0
            )
            tit_fires = (
                active & ~flips & (buffers["tit_u"][:, k] < p_tit) & (gap >= cfg.refractory)
            )
            p_up = np.clip(cfg.p_up_base - cfg.p_up_dil * z3, 0.05, 0.95)
            up = buffers["dir_u"][:, k] < p_up
            step_move = np.where(up, cfg.dose_step, -cfg.dose_step)
            within = np.clip(dose + step_move, 0.0, cfg.dose_max)
            same_stratum = _stratum(within, cfg.delta) == cur
            within = np.where(same_stratum, within, dose)
            proposed = np.where(flips, crossing, np.where(tit_fires, within, dose))
            changed = active & (proposed != dose)
            dose = np.where(changed, proposed, dose)
        t_event = min((k + 1) * dt, grid.t_end)
        t_last_change = np.where(changed, t_event, t_last_change)
        n_changes = np.where(changed, n_changes + 1, n_changes)
        dose_full[:, k + 1] = dose

    stale_frac = stale / t_max
    return {
        "z_bmi": z_bmi,
        "t_max": t_max,
        "dose_full": dose_full,
        "z3_full": z3_full,
        "last_cov_idx": last_cov_idx,
        "stale_frac": stale_frac,
        "n_changes": n_changes,
    }


def _outcome(cfg: CslConfig, paths: dict, y_noise: np.ndarray) -> np.ndarray:
    excess = np.maximum(paths["n_changes"] - cfg.out_free_switches, 0.0)
    return (
        cfg.out_base
        + cfg.out_stale * paths["stale_frac"]
        + cfg.out_switch_excess * excess
        + cfg.out_noise_sd * y_noise
    )


def _paths_to_units(cfg: CslConfig, paths: dict, y: np.ndarray) -> list:
    grid = cfg.grid
    units = []
    strata = _stratum(paths["dose_full"], cfg.delta)
    flips = strata[:, 1:] != strata[:, :-1]
    for i in range(y.size):
        t_max = float(paths["t_max"][i])
        n_steps_lived = int(round(t_max / grid.dt))
        idx = np.nonzero(flips[i, :n_steps_lived])[0]
        switch_times = np.minimum((idx + 1) * grid.dt, grid.t_end)
        m_last = int(paths["last_cov_idx"][i])
        n_entries = int(np.ceil(t_max / grid.covariate_dt - 1e-9)) + 1
        drawn = paths["z3_full"][i, : m_last + 1]
        if n_entries > drawn.size:
            drawn = np.concatenate([drawn, np.full(n_entries - drawn.size, drawn[-1])])
        units.append(
            UnitRecord(
                z1=np.zeros(0),
                z2=np.array([paths["z_bmi"][i]]),
                z3_path=drawn[:n_entries],
                switch_times=switch_times,
                a0=0,
                t_max=t_max,
                y=float(y[i]),
                u=None,
            )
        )
    return units


def generate_csl_like_cohort(cfg: CslConfig, n: int, seed: int) -> Cohort:
    """Observational-practice cohort with strata thresholded at cfg.delta."""
    if n < 1:
        raise ConfigError(f"cohort size must be >= 1, got {n}")
    buffers = _batch_buffers(cfg, n, seed)
    paths = _run_csl_paths(cfg, buffers, eta=None)
    y = _outcome(cfg, paths, buffers["y_n"])
    units = _paths_to_units(cfg, paths, y)
    return Cohort(units=units, case_id="csl_like", seed=seed, n=n, grid=cfg.grid)


def evaluate_csl_policy(cfg: CslConfig, eta, n_eval: int = 2000, seed: int = 0) -> float:
    """Mean exp(Y) over fresh patients whose stratum flips follow the policy."""
    if n_eval < 1:
        raise ConfigError(f"n_eval must be >= 1, got {n_eval}")
    eta = np.asarray(getattr(eta, "eta", eta), dtype=float)
    buffers = _batch_buffers(cfg, n_eval, seed)
    paths = _run_csl_paths(cfg, buffers, eta=eta)
    y = _outcome(cfg, paths, buffers["y_n"])
    return float(np.mean(np.exp(np.minimum(y, 700.0))))
