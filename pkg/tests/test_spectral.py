import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import COTH1, random_real_field
from ilwlab.errors import ConfigurationError, ShapeError
from ilwlab.spectral import (
    MULTIPLIER_KINDS,
    PROPAGATOR_EQUATIONS,
    MultiplierSpec,
    SpectralField,
    apply_symbol,
    coth,
    coth_minus_inv,
    coth_minus_sign,
    field_from_function,
    field_from_modes,
    from_padded,
    inverse_transform,
    is_hermitian,
    make_grid,
    make_symbol,
    norm,
    project,
    projector_symbol,
    psi,
    to_padded,
    transform,
)


class TestGrid:
    def test_basic_lattice(self):
        g = make_grid(64)
        assert g.spacing == pytest.approx(2 * np.pi / 64)
        assert list(g.frequencies_sorted()) == list(range(-32, 32))
        assert set(g.indices) == set(range(-32, 32))

    @pytest.mark.parametrize("n", [63, 6, 0, -8])
    def test_bad_sizes(self, n):
        with pytest.raises(ConfigurationError):
            make_grid(n)

    def test_bad_period(self):
        with pytest.raises(ConfigurationError):
            make_grid(8, 0.0)

    def test_scaled_period(self):
        g = make_grid(8, 4 * np.pi)
        assert sorted(g.k) == pytest.approx([-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5])

    def test_slot_out_of_range(self, grid64):
        with pytest.raises(ShapeError):
            grid64.slot(32)
        assert grid64.slot(-32) == 32


class TestTransform:
    def test_cos(self, grid64):
        f = field_from_function(np.cos, grid64)
        assert f.real
        assert f.coeff(1) == pytest.approx(0.5, abs=1e-12)
        assert f.coeff(-1) == pytest.approx(0.5, abs=1e-12)
        rest = np.delete(f.coeffs, [1, 63])
        assert np.max(np.abs(rest)) < 1e-12

    def test_complex_mode(self, grid64):
        f = transform(np.exp(3j * grid64.x), grid64)
        assert not f.real
        assert f.coeff(3) == pytest.approx(1.0, abs=1e-12)

    def test_roundtrip_random(self, grid64, rng):
        for _ in range(100):
            x = rng.standard_normal(64)
            back = inverse_transform(transform(x, grid64))
            assert np.max(np.abs(back - x)) <= 1e-12 * np.max(np.abs(x))

    def test_shape_error(self, grid64):
        with pytest.raises(ShapeError):
            transform(np.zeros(63), grid64)

    def test_padding_roundtrip(self, grid64, rng):
        f = random_real_field(grid64, rng)
        back = from_padded(to_padded(f.coeffs, grid64, 128), grid64)
        assert np.allclose(back, f.coeffs, atol=1e-14)

    def test_field_is_immutable(self, grid64):
        f = field_from_modes(grid64, {1: 1.0})
        with pytest.raises(ValueError):
            f.coeffs[0] = 1.0


class TestCoth:
    def test_coth_one(self):
        assert coth(1.0) == pytest.approx(COTH1, rel=1e-15)

    @given(st.floats(min_value=1e-8, max_value=60.0))
    def test_branches_agree_with_definition(self, x):
        ref = math.cosh(x) / math.sinh(x)
        assert coth(x) == pytest.approx(ref, rel=1e-13)
        assert coth(-x) == pytest.approx(-ref, rel=1e-13)

    def test_coth_minus_inv_series(self):
        # coth(x) - 1/x = x/3 - x^3/45 + 2x^5/945 - ...
        x = np.array([1e-6, 1e-3, 0.05, 0.09])
        series = x / 3 - x**3 / 45 + 2 * x**5 / 945
        assert np.allclose(coth_minus_inv(x), series, rtol=1e-10)
        assert coth_minus_inv(0.0) == 0.0
        assert coth_minus_inv(np.inf) == 1.0

    def test_coth_minus_sign_tail(self):
        for x in [1.0, 5.0, 20.0, 40.0]:
            assert coth_minus_sign(x) == pytest.approx(2 / math.expm1(2 * x), rel=1e-14)
        assert coth_minus_sign(np.inf) == 0.0


class TestSymbols:
    def test_t_delta_oracle(self, grid64):
        s = make_symbol(MultiplierSpec("t_delta", delta=1.0), grid64)
        assert s[1] == pytest.approx(-1j * COTH1, abs=1e-12)
        assert s[0] == 0

    def test_g_delta_zero(self, grid64):
        for d in [0.1, 1.0, 7.0]:
            assert make_symbol(MultiplierSpec("g_delta", delta=d), grid64)[0] == 0

    def test_q_delta_oracle(self, grid64):
        s = make_symbol(MultiplierSpec("q_delta", delta=1.0), grid64)
        assert s[1] == pytest.approx(-1j * (COTH1 - 1), abs=1e-12)

    def test_q_effective(self, grid64):
        d = 2.0
        s = make_symbol(MultiplierSpec("q_effective", delta=d), grid64)
        assert s[0] == pytest.approx(1 / d)
        k = grid64.k[1:5]
        assert np.allclose(s[1:5], k * (1 / np.tanh(d * k) - 1), rtol=1e-13)
        # continuity at n = 0 along the Laurent series
        tiny = make_grid(8, 2 * np.pi * 1e6)
        assert make_symbol(MultiplierSpec("q_effective", delta=d), tiny)[1] == pytest.approx(1 / d, rel=1e-5)

    def test_delta_required(self):
        with pytest.raises(ConfigurationError):
            MultiplierSpec("q_delta", delta=0.0)
        with pytest.raises(ConfigurationError):
            MultiplierSpec("t_delta")

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            MultiplierSpec("laplace")

    @pytest.mark.parametrize("eq", PROPAGATOR_EQUATIONS)
    def test_propagators_unitary(self, grid64, eq):
        spec = MultiplierSpec("free_propagator", delta=1.5, t=0.7, equation=eq, m0=0.3)
        assert np.max(np.abs(np.abs(make_symbol(spec, grid64)) - 1)) <= 1e-14

    def test_hilbert_cos(self, grid64):
        f = apply_symbol(field_from_function(np.cos, grid64), MultiplierSpec("hilbert"))
        assert np.max(np.abs(f.to_physical() - np.sin(grid64.x))) < 1e-12

    def test_t_delta_on_mode(self, grid64):
        f = apply_symbol(field_from_modes(grid64, {1: 1.0}), MultiplierSpec("t_delta", delta=1.0))
        assert f.coeff(1) == pytest.approx(-1j * COTH1, abs=1e-12)

    def test_js_zero_identity(self, grid64, rng):
        f = random_real_field(grid64, rng)
        out = apply_symbol(f, MultiplierSpec("j_s", s=0.0))
        assert np.array_equal(out.coeffs, f.coeffs)

    @pytest.mark.parametrize(
        "spec",
        [
            MultiplierSpec(k, delta=1.3, s=0.5, t=0.4)
            for k in MULTIPLIER_KINDS
            if k != "free_propagator"
        ]
        + [MultiplierSpec("free_propagator", delta=1.3, t=0.4, equation=e) for e in ("ilw", "bo", "kdv", "silw")],
    )
    def test_reality_preserved(self, grid64, rng, spec):
        assert spec.reality_preserving
        out = apply_symbol(random_real_field(grid64, rng), spec)
        assert out.real
        assert is_hermitian(out, rtol=1e-12)

    def test_gauged_propagator_not_real(self):
        assert not MultiplierSpec("free_propagator", t=1.0, equation="gauged").reality_preserving

    @pytest.mark.parametrize("delta", [1, 2, 4, 8])
    def test_q_delta_decay(self, delta):
        g = make_grid(8)
        q = make_symbol(MultiplierSpec("q_delta", delta=float(delta)), g)
        assert abs(q[1]) <= 3 * np.exp(-2 * delta)

    def test_ilw_to_bo_per_frequency(self):
        # |ilw - bo| <= n^2 (1/(delta n) + 3 e^{-2 delta n}) frequency by frequency
        from ilwlab.spectral import linear_symbol

        g = make_grid(128)
        d = 32.0
        k = g.k
        gap = np.abs(linear_symbol("ilw", k, d) - linear_symbol("bo", k))
        nz = k != 0
        bound = k[nz] ** 2 * (1 / (d * np.abs(k[nz])) + 3 * np.exp(-2 * d * np.abs(k[nz])))
        assert np.all(gap[nz] <= bound * (1 + 1e-12))


class TestProjectors:
    def test_plus_cos(self, grid64):
        f = project(field_from_function(np.cos, grid64), "plus")
        assert f.coeff(1) == pytest.approx(0.5, abs=1e-12)
        assert abs(f.coeff(-1)) < 1e-15

    def test_dyadic_mode(self, grid64):
        f = project(field_from_modes(grid64, {4: 1.0}, real=False), "dyadic_N", 4)
        assert f.coeff(4) == 1.0

    def test_zero_mode(self, grid64):
        assert np.max(np.abs(project(field_from_function(np.cos, grid64), "zero_mode").coeffs)) < 1e-15
        f = field_from_function(lambda x: 2.5 + np.cos(x), grid64)
        assert project(f, "zero_mode").coeff(0) == pytest.approx(2.5)

    def test_non_dyadic(self, grid64):
        with pytest.raises(ConfigurationError):
            project(field_from_modes(grid64, {1: 1.0}), "dyadic_N", 3)

    def test_psi_properties(self):
        x = np.linspace(-3, 3, 6001)
        p = psi(x)
        assert np.all((p >= 0) & (p <= 1))
        assert np.all(p[np.abs(x) <= 1] == 1)
        assert np.all(p[np.abs(x) >= 2] == 0)

    def test_partition_of_unity(self):
        g = make_grid(512)
        total = projector_symbol("lo", g).copy()
        N = 2
        while N <= 512:
            total += projector_symbol("dyadic_N", g, N)
            N *= 2
        assert np.max(np.abs(total - 1)) <= 1e-12

    def test_lo_hi_plus_hi(self, grid64):
        lo, hi = projector_symbol("lo", grid64), projector_symbol("hi", grid64)
        assert np.allclose(lo + hi, 1)
        assert np.allclose(projector_symbol("plus_hi", grid64), (grid64.k > 0) * hi)

    def test_bernstein(self, rng):
        g = make_grid(1024)
        consts = []
        for N in [2, 4, 8, 16, 32, 64, 128]:
            worst = 0.0
            for _ in range(20):
                f = random_real_field(g, rng, decay=0.0)
                pf = project(f, "dyadic_N", N)
                worst = max(worst, norm(pf, "Linf") / norm(pf, "L2"))
            consts.append(worst / np.sqrt(N))
        # one constant works across all N (the sup of a shell is at most
        # sqrt(#modes / 2 pi) times its L2 norm)
        assert max(consts) <= 1.0


class TestNorms:
    def test_cos_norms(self, grid64):
        f = field_from_function(np.cos, grid64)
        assert norm(f, "L2") == pytest.approx(np.sqrt(np.pi), rel=1e-12)
        assert norm(f, "Hs", s=1.0) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)
        assert norm(f, "Linf") == pytest.approx(1.0, rel=1e-12)
        assert norm(f, "Lp", p=2) == pytest.approx(np.sqrt(np.pi), rel=1e-12)

    @pytest.mark.parametrize("space,kw", [("L2", {}), ("Linf", {}), ("Lp", {"p": 3}), ("Hs", {"s": -1})])
    def test_zero(self, grid64, space, kw):
        assert norm(SpectralField(grid64, np.zeros(64), True), space, **kw) == 0

    def test_bad_space(self, grid64):
        f = field_from_modes(grid64, {1: 1.0})
        with pytest.raises(ConfigurationError):
            norm(f, "Hs")
        with pytest.raises(ConfigurationError):
            norm(f, "W1p")
