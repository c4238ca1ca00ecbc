"""Domain types, the simulation time grid, and evaluable switching-intensity families.

Everything here is immutable after construction; evaluation functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError

# Intensities are clamped so log-likelihoods stay finite under extreme
# optimizer probes.
INTENSITY_FLOOR = 1e-10
INTENSITY_CEIL = 1e6
LOG_FLOOR = math.log(INTENSITY_FLOOR)
LOG_CEIL = math.log(INTENSITY_CEIL)

LINEXP = "linexp"
SIGMOID_SWITCH = "sigmoid_switch"
OXYTOCIN_LINEXP = "oxytocin_linexp"
COMPLETION_LINEXP = "completion_linexp"

PARAM_DIM = {
    LINEXP: 3,
    SIGMOID_SWITCH: 3,
    OXYTOCIN_LINEXP: 4,
    COMPLETION_LINEXP: 3,
}


def sigmoid(z, k):
    """Scaled and shifted sigmoid 1 / (1 + exp(-10 (z - k))).

    Accepts scalars or arrays; saturates cleanly at the floating bounds.
    """
    return 1.0 / (1.0 + np.exp(np.clip(-10.0 * (np.asarray(z, dtype=float) - k), -700.0, 700.0)))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform stepping grid: events on the dt grid, covariates on a coarser one."""

    t_end: float = 3.0
    dt: float = 0.01
    covariate_dt: float = 0.1

    def __post_init__(self):
        if not (self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        stride = self.covariate_dt / self.dt
        if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
            raise ConfigError("covariate_dt must be an integer multiple of dt")
        n_cov = self.t_end / self.covariate_dt
        if abs(n_cov - round(n_cov)) > 1e-9 or round(n_cov) < 1:
            raise ConfigError("t_end must be an integer multiple of covariate_dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def cov_stride(self) -> int:
        """Number of dt steps between covariate updates."""
        return int(round(self.covariate_dt / self.dt))

    @property
    def n_cov_points(self) -> int:
        """Covariate grid points 0, covariate_dt, ..., t_end."""
        return int(round(self.t_end / self.covariate_dt)) + 1


@dataclass(frozen=True, eq=False)
class UnitRecord:
    """One subject's full logged trajectory.

    ``switch_times`` are the times at which the dose stratum flipped; the
    stratum at time t is ``a0`` XOR the parity of switches at or before t.
    ``z3_path`` holds the time-varying covariate on the covariate grid
    (carried forward between grid points). ``u`` is a latent value stored
    only for simulated confounded settings and never read by inference.
    """

    z1: np.ndarray
    z2: np.ndarray
    z3_path: np.ndarray
    switch_times: np.ndarray
    a0: int
    t_max: float
    y: float
    u: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "z1", np.asarray(self.z1, dtype=float))
        object.__setattr__(self, "z2", np.asarray(self.z2, dtype=float))
        object.__setattr__(self, "z3_path", np.asarray(self.z3_path, dtype=float))
        object.__setattr__(self, "switch_times", np.asarray(self.switch_times, dtype=float))
        st = self.switch_times
        if st.size and (np.any(np.diff(st) <= 0) or st[0] <= 0):
            raise DataError("switch_times must be strictly increasing and positive")
        if st.size and st[-1] > self.t_max + 1e-12:
            raise DataError("switch_times must not exceed t_max")
        if not (self.t_max > 0):
            raise DataError(f"t_max must be positive, got {self.t_max}")
        if self.a0 not in (0, 1):
            raise DataError(f"a0 must be 0 or 1, got {self.a0}")

    @property
    def n_switches(self) -> int:
        return int(self.switch_times.size)

    def z1_mean(self) -> float:
        return float(self.z1.mean()) if self.z1.size else 0.0

    def z2_mean(self) -> float:
        return float(self.z2.mean()) if self.z2.size else 0.0

    def stratum_at(self, t: float) -> int:
        """Stratum in effect at time t (switches take effect at their own time)."""
        k = int(np.searchsorted(self.switch_times, t, side="right"))
        return int(self.a0) ^ (k & 1)

    def __eq__(self, other):
        if not isinstance(other, UnitRecord):
            return NotImplemented
        return (
            np.array_equal(self.z1, other.z1)
            and np.array_equal(self.z2, other.z2)
            and np.array_equal(self.z3_path, other.z3_path)
            and np.array_equal(self.switch_times, other.switch_times)
            and self.a0 == other.a0
            and self.t_max == other.t_max
            and self.y == other.y
            and self.u == other.u
        )


@dataclass(frozen=True)
class HistoryView:
    """The switching-relevant history at one time point.

    ``a_minus`` is the stratum just before t, ``time_since_change`` the gap to
    the latest switch strictly before t (measured from 0 when none occurred).
    """

    a_minus: int
    z3_now: float
    time_since_change: float
    t: float
    z_bmi: Optional[float] = None


@dataclass(frozen=True)
class IntensitySpec:
    """A parametric switching-intensity family plus its parameter vector."""

    family: str
    params: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.family not in PARAM_DIM:
            raise ConfigError(f"unknown intensity family {self.family!r}")
        p = np.asarray(self.params, dtype=float)
        if p.shape != (PARAM_DIM[self.family],):
            raise ConfigError(
                f"{self.family} expects {PARAM_DIM[self.family]} parameters, got shape {p.shape}"
            )
        if not np.all(np.isfinite(p)):
            raise ConfigError("intensity parameters must be finite")
        object.__setattr__(self, "params", p)


def log_intensity(
    spec: IntensitySpec,
    a_minus,
    z3,
    time_since_change,
    z_bmi=None,
):
    """Clamped log intensity for arrays (or scalars) of history values.

    This is the single evaluation kernel: the linear-exponential family in
    (z3, time-since-change), the state-dependent sigmoid family, the
    BMI/dilation dose family with its /10 and /20 scalings, and the
    completion family linear in (stratum, z3). Output is clamped to
    [log 1e-10, log 1e6].
    """
    p = spec.params
    a = np.asarray(a_minus, dtype=float)
    z = np.asarray(z3, dtype=float)
    tsc = np.asarray(time_since_change, dtype=float)
    if spec.family == LINEXP:
        out = p[0] + p[1] * z + p[2] * tsc
    elif spec.family == SIGMOID_SWITCH:
        out = (p[0] * a + p[1] * (1.0 - a)) * (2.0 * sigmoid(z, p[2]) - 1.0)
    elif spec.family == OXYTOCIN_LINEXP:
        if z_bmi is None:
            raise ConfigError("oxytocin_linexp requires a z_bmi history field")
        b = np.asarray(z_bmi, dtype=float)
        out = p[0] + p[1] * b + p[2] * z / 10.0 + p[3] * tsc / 20.0
    elif spec.family == COMPLETION_LINEXP:
        out = p[0] + p[1] * a + p[2] * z
    else:  # pragma: no cover - guarded by IntensitySpec
        raise ConfigError(f"unknown intensity family {spec.family!r}")
    return np.clip(out, LOG_FLOOR, LOG_CEIL)


def intensity_eval(spec: IntensitySpec, h: HistoryView) -> float:
    """Evaluate the intensity at one history point; always in [1e-10, 1e6]."""
    val = np.exp(log_intensity(spec, h.a_minus, h.z3_now, h.time_since_change, h.z_bmi))
    return float(np.clip(val, INTENSITY_FLOOR, INTENSITY_CEIL))


def history_at(unit: UnitRecord, t: float, grid: TimeGrid) -> HistoryView:
    """Reconstruct the switching-relevant history of ``unit`` at time t.

    Uses left limits: the stratum and last-change time count only switches
    strictly before t, and the covariate is the last grid value at or
    before t (carry-forward).
    """
    if t < 0 or t > unit.t_max + 1e-12:
        raise DataError(f"t={t} outside [0, t_max={unit.t_max}]")
    k = int(np.searchsorted(unit.switch_times, t, side="left"))
    a_minus = int(unit.a0) ^ (k & 1)
    last_change = float(unit.switch_times[k - 1]) if k > 0 else 0.0
    idx = min(int(t / grid.covariate_dt + 1e-9), unit.z3_path.size - 1)
    z_bmi = float(unit.z2[0]) if unit.z2.size else None
    return HistoryView(
        a_minus=a_minus,
        z3_now=float(unit.z3_path[idx]),
        time_since_change=t - last_change,
        t=t,
        z_bmi=z_bmi,
    )
