import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtdtr.core import (
    COMPLETION_LINEXP,
    INTENSITY_CEIL,
    INTENSITY_FLOOR,
    LINEXP,
    OXYTOCIN_LINEXP,
    SIGMOID_SWITCH,
    HistoryView,
    IntensitySpec,
    TimeGrid,
    UnitRecord,
    history_at,
    intensity_eval,
    sigmoid,
)
from rtdtr.errors import ConfigError, DataError


def hv(a=0, z3=0.0, tsc=0.0, t=0.0, bmi=None):
    return HistoryView(a_minus=a, z3_now=z3, time_since_change=tsc, t=t, z_bmi=bmi)


class TestSigmoid:
    def test_midpoint(self):
        assert sigmoid(1.5, 1.5) == pytest.approx(0.5)

    def test_limits(self):
        assert sigmoid(1e9, 1.5) == pytest.approx(1.0)
        assert sigmoid(-1e9, 1.5) == pytest.approx(0.0)

    def test_scalar_value(self):
        # 1 / (1 + exp(-10 * (1.2 - 1.5))) = 1 / (1 + e^3)
        assert sigmoid(1.2, 1.5) == pytest.approx(1.0 / (1.0 + math.exp(3.0)), abs=1e-12)

    @given(st.floats(-1.5, 1.4), st.floats(-0.5, 0.5), st.floats(0.001, 0.1))
    def test_strictly_increasing_where_unsaturated(self, z, k, dz):
        assert sigmoid(z + dz, k) > sigmoid(z, k)


class TestIntensityEval:
    def test_linexp_scalar(self):
        spec = IntensitySpec(LINEXP, np.array([-0.1, 0.05, 0.1]))
        val = intensity_eval(spec, hv(z3=1.0, tsc=0.0))
        assert val == pytest.approx(math.exp(-0.05), rel=1e-12)

    def test_sigmoid_switch_at_threshold(self):
        spec = IntensitySpec(SIGMOID_SWITCH, np.array([0.8, -0.5, 1.2]))
        assert intensity_eval(spec, hv(a=1, z3=1.2)) == pytest.approx(1.0)
        assert intensity_eval(spec, hv(a=0, z3=1.2)) == pytest.approx(1.0)

    def test_oxytocin_zero_params(self):
        spec = IntensitySpec(OXYTOCIN_LINEXP, np.zeros(4))
        assert intensity_eval(spec, hv(z3=3.0, tsc=2.0, bmi=1.3)) == pytest.approx(1.0)

    def test_oxytocin_scalings(self):
        spec = IntensitySpec(OXYTOCIN_LINEXP, np.array([0.5, 1.0, 2.0, 3.0]))
        val = intensity_eval(spec, hv(z3=4.0, tsc=1.0, bmi=0.7))
        assert val == pytest.approx(math.exp(0.5 + 0.7 + 2.0 * 0.4 + 3.0 * 0.05), rel=1e-12)

    def test_oxytocin_requires_bmi(self):
        spec = IntensitySpec(OXYTOCIN_LINEXP, np.zeros(4))
        with pytest.raises(ConfigError):
            intensity_eval(spec, hv(z3=1.0, bmi=None))

    def test_completion_family(self):
        spec = IntensitySpec(COMPLETION_LINEXP, np.array([0.2, 0.05, -0.05]))
        val = intensity_eval(spec, hv(a=1, z3=2.0))
        assert val == pytest.approx(math.exp(0.2 + 0.05 - 0.1), rel=1e-12)

    def test_clamped_above_and_below(self):
        hot = IntensitySpec(LINEXP, np.array([500.0, 0.0, 0.0]))
        cold = IntensitySpec(LINEXP, np.array([-500.0, 0.0, 0.0]))
        assert intensity_eval(hot, hv()) == pytest.approx(INTENSITY_CEIL)
        assert intensity_eval(cold, hv()) == pytest.approx(INTENSITY_FLOOR)

    @given(
        st.floats(-30, 30),
        st.floats(-30, 30),
        st.floats(-30, 30),
        st.floats(-10, 10),
        st.floats(0, 10),
        st.integers(0, 1),
    )
    def test_positive_and_bounded(self, p1, p2, p3, z3, tsc, a):
        spec = IntensitySpec(LINEXP, np.array([p1, p2, p3]))
        val = intensity_eval(spec, hv(a=a, z3=z3, tsc=tsc))
        assert INTENSITY_FLOOR <= val <= INTENSITY_CEIL

    def test_param_dim_checked(self):
        with pytest.raises(ConfigError):
            IntensitySpec(LINEXP, np.zeros(4))
        with pytest.raises(ConfigError):
            IntensitySpec("nope", np.zeros(3))


class TestTimeGrid:
    def test_defaults(self):
        g = TimeGrid()
        assert g.n_steps == 300
        assert g.cov_stride == 10
        assert g.n_cov_points == 31

    def test_bad_grids(self):
        with pytest.raises(ConfigError):
            TimeGrid(dt=0.0)
        with pytest.raises(ConfigError):
            TimeGrid(dt=0.03, covariate_dt=0.1)
        with pytest.raises(ConfigError):
            TimeGrid(t_end=3.05)


def make_unit(**kw):
    args = dict(
        z1=np.zeros(2),
        z2=np.zeros(1),
        z3_path=np.array([1.0, 2.0, 3.0]),
        switch_times=np.array([1.0]),
        a0=0,
        t_max=2.0,
        y=0.0,
    )
    args.update(kw)
    return UnitRecord(**args)


class TestUnitRecord:
    def test_switch_times_must_increase(self):
        with pytest.raises(DataError):
            make_unit(switch_times=np.array([1.0, 0.5]), z3_path=np.ones(21))

    def test_switch_times_within_t_max(self):
        with pytest.raises(DataError):
            make_unit(switch_times=np.array([2.5]))

    def test_stratum_parity(self):
        unit = make_unit(
            switch_times=np.array([0.5, 1.0, 1.5]), z3_path=np.ones(21), t_max=2.0
        )
        assert unit.stratum_at(0.0) == 0
        assert unit.stratum_at(0.5) == 1  # switch takes effect at its own time
        assert unit.stratum_at(0.7) == 1
        assert unit.stratum_at(1.2) == 0
        assert unit.stratum_at(2.0) == 1


class TestHistoryAt:
    def grid(self):
        return TimeGrid()

    def test_left_limit_at_switch(self):
        unit = make_unit(z3_path=np.ones(21))
        h = history_at(unit, 1.0, self.grid())
        assert h.a_minus == 0

    def test_after_switch(self):
        unit = make_unit(z3_path=np.ones(21))
        h = history_at(unit, 1.5, self.grid())
        assert h.a_minus == 1
        assert h.time_since_change == pytest.approx(0.5)

    def test_carry_forward(self):
        unit = make_unit(
            z3_path=np.array([1.0, 2.0, 3.0]), switch_times=np.array([]), t_max=0.2
        )
        h = history_at(unit, 0.15, self.grid())
        assert h.z3_now == pytest.approx(2.0)

    def test_before_first_switch_measures_from_zero(self):
        unit = make_unit(z3_path=np.ones(21))
        assert history_at(unit, 0.7, self.grid()).time_since_change == pytest.approx(0.7)

    def test_domain_error(self):
        unit = make_unit(z3_path=np.ones(21))
        with pytest.raises(DataError):
            history_at(unit, 2.5, self.grid())
        with pytest.raises(DataError):
            history_at(unit, -0.1, self.grid())

    @settings(max_examples=30)
    @given(st.floats(0.0, 2.0))
    def test_piecewise_constant_between_events(self, t):
        # Jumps only at switch times and covariate grid points: nudging t
        # within its (grid, switch)-free neighborhood leaves the view intact.
        unit = make_unit(z3_path=np.linspace(1, 3, 21))
        g = self.grid()
        eps = 1e-4
        lo = math.floor(t / g.covariate_dt) * g.covariate_dt
        hi = lo + g.covariate_dt
        t0 = min(max(t, lo + eps), hi - eps)
        if t0 <= 1.0 < hi:  # keep away from the switch at 1.0 as well
            t0 = max(t0, 1.0 + eps) if t > 1.0 else min(t0, 1.0 - eps)
        h1 = history_at(unit, t0, g)
        h2 = history_at(unit, min(t0 + eps / 2, 2.0), g)
        assert h1.a_minus == h2.a_minus
        assert h1.z3_now == h2.z3_now
