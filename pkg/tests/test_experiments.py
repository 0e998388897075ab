import math

import numpy as np
import pytest

from conftest import COTH1
from ilwlab.errors import ConfigurationError, PreconditionError
from ilwlab.experiments import (
    S0,
    ExperimentReport,
    deep_water,
    evaluate,
    product_bound_audit,
    qdelta_scan,
    shallow_water,
    strichartz_exponents,
    twin_solver,
)
from ilwlab.spectral import linear_symbol, make_grid

FAST = dict(n_modes=64, dt=2e-3, t_final=0.2, snapshot_every=0.02)


class TestDeepWater:
    def test_small_nonlinear(self):
        rep = deep_water(delta_grid=(1, 4, 16), drop_factor=2, **FAST)
        assert rep.scalars["sentinel_error"] <= 1e-10
        assert rep.verdicts["decreasing"]
        assert rep.verdicts == evaluate(rep)

    def test_linear_closed_form(self):
        rep = deep_water(delta_grid=(1, 2, 4), linear=True, **FAST)
        assert rep.scalars["closed_form_mismatch"] <= 1e-10
        assert rep.scalars["sentinel_error"] == 0.0

    def test_grid_order(self):
        with pytest.raises(ConfigurationError):
            deep_water(delta_grid=(4, 2), **FAST)

    def test_warns_outside_range(self):
        with pytest.warns(UserWarning):
            deep_water(s=0.0, delta_grid=(1, 2), linear=True, **FAST)

    def test_symbol_gap_monotone_in_delta(self):
        k = make_grid(256).k
        bo = linear_symbol("bo", k)
        deltas = [1, 2, 4, 8, 16, 32]
        gaps = [np.abs(linear_symbol("ilw", k, d) - bo) for d in deltas]
        for a, b in zip(gaps, gaps[1:]):
            assert np.all(b <= a + 1e-12)


class TestShallowWater:
    def test_linear_slope_and_closed_form(self):
        rep = shallow_water(linear=True, **FAST)
        assert rep.scalars["closed_form_mismatch"] <= 1e-10
        assert 1.7 <= rep.slopes["log_error_vs_log_delta"] <= 2.3

    def test_grid_order(self):
        with pytest.raises(ConfigurationError):
            shallow_water(delta_grid=(0.5, 1), **FAST)

    def test_bad_stride(self):
        with pytest.raises(ConfigurationError):
            shallow_water(n_modes=32, dt=3e-3, t_final=0.1, snapshot_every=0.01)


class TestQScan:
    def test_examples(self):
        rep = qdelta_scan(s_list=(0.0,), delta_list=(1.0, 8.0, 0.5, 0.25))
        norms = dict(zip(rep.params, rep.metrics["norm"]))
        assert norms[1.0] == pytest.approx(COTH1 - 1, rel=1e-12)
        assert norms[8.0] <= 3 * math.exp(-16)
        for d in (1.0, 0.5, 0.25):
            assert d * norms[d] <= 2
        assert rep.passed

    def test_default_bounded(self):
        rep = qdelta_scan()
        assert max(rep.errors) <= 2.5 and max(rep.metrics["ratio_dx"]) <= 2.5

    def test_invalid(self):
        with pytest.raises(ConfigurationError):
            qdelta_scan(s_list=(-1.0,))


class TestExponents:
    def test_values(self):
        assert strichartz_exponents(0.25, 4)[0] == pytest.approx(1 / 16)
        assert strichartz_exponents(0.0, 4)[1] == pytest.approx(3 / 16)
        assert strichartz_exponents(0.0, 2)[1] == 0.0
        assert strichartz_exponents(0.25, 4)[1] == pytest.approx(-0.09375)

    def test_s0(self):
        assert S0 == pytest.approx(0.1277, abs=1e-4)
        assert S0 == pytest.approx(0.12771867673, abs=1e-10)

    def test_p_range(self):
        with pytest.raises(ConfigurationError):
            strichartz_exponents(0.0, 1.5)
        assert strichartz_exponents(0.0, math.inf)[0] == 0.0


class TestProductAudit:
    def test_two_mode_hand_case(self):
        # f = g = e^{i (N/2) x}... f g = e^{i N x}; with unit-norm inputs the ratio is
        # psi_N(N) sqrt(2 pi) / (sqrt(2 pi) <N/2>^s)^2
        from ilwlab.experiments import _product
        from ilwlab.spectral import field_from_modes, norm, project

        g = make_grid(64)
        N, s = 8, 0.3
        f = field_from_modes(g, {N // 2: 1.0}, real=False)
        fg = _product(f.coeffs, f.coeffs, g)
        out = norm(project(f.with_coeffs(fg), "dyadic_N", N), "L2")
        ratio = out / norm(f, "Hs", s=s) ** 2
        expect = 1.0 / (math.sqrt(2 * math.pi) * (1 + (N / 2) ** 2) ** s)
        assert ratio == pytest.approx(expect, rel=1e-12)
        assert ratio <= N ** (0.5 - 2 * s)

    def test_small_run(self):
        rep = product_bound_audit(N_grid=(4, 8, 16), n_samples=100, n_modes=64, n_starts=2, n_sweeps=2)
        assert len(rep.errors) == 3
        assert all(e >= m for e, m in zip(rep.errors, rep.metrics["sampled"]))

    def test_preconditions(self):
        with pytest.raises(ConfigurationError):
            product_bound_audit(s=0.2)
        with pytest.raises(PreconditionError):
            product_bound_audit(n_samples=50)
        with pytest.raises(ConfigurationError):
            product_bound_audit(N_grid=(8, 64), n_modes=64)


class TestTwin:
    def test_small(self):
        rep = twin_solver(n_modes=64, t_final=0.1, snapshot_every=0.01)
        assert rep.passed


class TestReport:
    def test_verdicts_pure(self):
        rep = ExperimentReport(
            "x",
            "p",
            [1.0, 2.0],
            [2.0, 1.0],
            slopes={"a": 0.5},
            scalars={"b": 3.0},
            criteria={
                "dec": {"kind": "decreasing"},
                "drop": {"kind": "drop", "factor": 3},
                "max": {"kind": "max_le", "bound": 2.0},
                "sc": {"kind": "scalar_le", "key": "b", "bound": 1.0},
                "sl": {"kind": "slope_range", "key": "a", "lo": 0.0, "hi": None},
            },
        ).finalize()
        assert rep.verdicts == {"dec": True, "drop": False, "max": True, "sc": False, "sl": True}
        assert not rep.passed

    def test_unknown_kind(self):
        rep = ExperimentReport("x", "p", [1.0], [1.0], criteria={"c": {"kind": "mystery"}})
        with pytest.raises(ConfigurationError):
            rep.finalize()

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            ExperimentReport("x", "p", [1.0], [])
        with pytest.raises(ConfigurationError):
            ExperimentReport("x", "p", [1.0], [-1.0])
