import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from micropolar import Grid, ScalarField, VectorField, partial, to_real, to_spectral
from micropolar import norms
from micropolar.harness import random_scalar_field
from micropolar.norms import DegenerateInputError, ExponentError
from micropolar.oracles import dense_level_sweep, direct_morrey

from conftest import real_scalar

TWO_PI = 2 * math.pi
VOL = TWO_PI**3
seeds = st.integers(0, 2**32 - 1)


def cos3x(grid):
    return real_scalar(grid, lambda x, y, z: np.cos(3 * x) + 0 * y * z)


def rand_field(seed, n=16, slope=1.0):
    return to_real(random_scalar_field(Grid(n), seed, slope=slope))


def bump(grid, width, center=None):
    c = grid.box_length / 2 if center is None else center
    x = grid.coordinates()
    return ScalarField(grid, np.exp(-sum((xi - c) ** 2 for xi in x) / (2 * width**2)))


def active_blocks(f):
    return {j: v for j, v in norms.littlewood_paley_blocks(f).items() if v > 1e-12}


class TestLebesgue:
    def test_sin(self, grid32):
        f = real_scalar(grid32, lambda x, y, z: np.sin(x) + 0 * y * z)
        assert norms.lp_norm(f, 2) == pytest.approx(2 * math.pi**1.5, rel=1e-13)
        assert norms.lp_norm(f, 2) == pytest.approx(11.1366, abs=1e-4)

    @pytest.mark.parametrize("p", [1, 2, 3.5, 7])
    def test_constant(self, grid16, p):
        f = ScalarField(grid16, np.full(grid16.shape, -1.5))
        assert norms.lp_norm(f, p) == pytest.approx(1.5 * VOL ** (1 / p), rel=1e-13)

    def test_inf(self, grid16):
        f = ScalarField(grid16, np.zeros(grid16.shape))
        f.data[1, 2, 3] = -4.0
        assert norms.lp_norm(f, math.inf) == 4.0

    def test_against_naive_loop(self):
        f = rand_field(5)
        total = 0.0
        for v in f.data.ravel().tolist():
            total += abs(v) ** 4
        naive = (total * f.grid.cell_volume) ** 0.25
        assert norms.lp_norm(f, 4) == pytest.approx(naive, rel=1e-12)

    def test_vector_uses_pointwise_length(self, grid16):
        v = VectorField(grid16, np.stack([np.full(grid16.shape, 3.0), np.full(grid16.shape, 4.0),
                                          np.zeros(grid16.shape)]))
        assert norms.lp_norm(v, 2) == pytest.approx(5 * VOL**0.5)

    def test_accepts_spectral_input(self):
        f = rand_field(2)
        assert norms.lp_norm(to_spectral(f), 3) == pytest.approx(norms.lp_norm(f, 3), rel=1e-12)

    def test_rejects_small_p(self, grid16):
        with pytest.raises(ExponentError):
            norms.lp_norm(ScalarField(grid16, np.zeros(grid16.shape)), 0.5)


class TestWeakLebesgue:
    @pytest.mark.parametrize("p", [1.5, 2, 6])
    def test_indicator_half(self, grid16, p):
        a = np.zeros(grid16.shape)
        a[: grid16.n // 2] = 1.0
        assert norms.weak_lp_norm(ScalarField(grid16, a), p) == pytest.approx((VOL / 2) ** (1 / p), rel=1e-13)

    def test_constant(self, grid16):
        f = ScalarField(grid16, np.full(grid16.shape, 2.0))
        assert norms.weak_lp_norm(f, 3) == pytest.approx(2 * VOL ** (1 / 3), rel=1e-13)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_against_level_sweep(self, seed):
        f = rand_field(seed)
        sweep = dense_level_sweep(f.data, 4.0, 10_000, f.grid.cell_volume)
        assert norms.weak_lp_norm(f, 4.0) == pytest.approx(sweep, rel=1e-3)
        assert sweep <= norms.weak_lp_norm(f, 4.0) * (1 + 1e-12)

    def test_bounded_by_strong(self):
        f = rand_field(9)
        for p in (2, 3, 6, 12):
            assert norms.weak_lp_norm(f, p) <= norms.lp_norm(f, p) * (1 + 1e-12)

    def test_rejects_p_le_1(self, grid16):
        with pytest.raises(ExponentError):
            norms.weak_lp_norm(ScalarField(grid16, np.zeros(grid16.shape)), 1)


class TestSobolevBesov:
    def test_sobolev_cos3x(self, grid32):
        assert norms.sobolev_hdot_norm(cos3x(grid32), 0.5) == pytest.approx(19.2893, abs=1e-4)
        assert norms.sobolev_hdot_norm(cos3x(grid32), 0.5) == pytest.approx(3**0.5 * 2 * math.pi**1.5, rel=1e-13)

    def test_sobolev_r0_is_l2_of_fluctuation(self):
        f = rand_field(3)
        g = ScalarField(f.grid, f.data + 5.0)
        fluct = ScalarField(f.grid, g.data - g.data.mean())
        assert norms.sobolev_hdot_norm(g, 0) == pytest.approx(norms.lp_norm(fluct, 2), rel=1e-12)

    @settings(max_examples=10, deadline=None)
    @given(seeds)
    def test_sobolev_r1_is_gradient(self, seed):
        f = to_spectral(rand_field(seed))
        grad = math.sqrt(sum(norms.lp_norm(partial(f, i), 2) ** 2 for i in (1, 2, 3)))
        assert norms.sobolev_hdot_norm(f, 1) == pytest.approx(grad, rel=1e-12)

    def test_besov_cos3x(self, grid32):
        f = cos3x(grid32)
        assert norms.besov_b21r_norm(f, 0.5) == pytest.approx(15.7496, abs=1e-4)
        assert active_blocks(f) == {1: pytest.approx(norms.lp_norm(f, 2))}

    def test_besov_zero(self, grid16):
        assert norms.besov_b21r_norm(ScalarField(grid16, np.zeros(grid16.shape)), 0.5) == 0.0

    def test_besov_two_blocks(self, grid16):
        unit = 1 / math.sqrt(VOL / 2)
        f = real_scalar(grid16, lambda x, y, z: unit * (np.cos(x) + np.cos(4 * y)) + 0 * z)
        assert active_blocks(f) == {0: pytest.approx(1.0), 2: pytest.approx(1.0)}
        assert norms.besov_b21r_norm(f, 0.5) == pytest.approx(3.0, rel=1e-13)

    @pytest.mark.parametrize("m", [1, 2, 3, 5, 7])
    @pytest.mark.parametrize("r", [0.25, 0.5, 0.75])
    def test_single_annulus_brackets_sobolev(self, grid16, m, r):
        f = real_scalar(grid16, lambda x, y, z: np.cos(m * y) + 0 * x * z)
        ratio = norms.besov_b21r_norm(f, r) / norms.sobolev_hdot_norm(f, r)
        assert 2**-r - 1e-12 <= ratio <= 2**r + 1e-12

    @pytest.mark.parametrize("r", [0, 1, -0.1])
    def test_besov_range(self, grid16, r):
        with pytest.raises(ExponentError):
            norms.besov_b21r_norm(ScalarField(grid16, np.zeros(grid16.shape)), r)

    def test_sobolev_range(self, grid16):
        with pytest.raises(ExponentError):
            norms.sobolev_hdot_norm(ScalarField(grid16, np.zeros(grid16.shape)), 1.5)


class TestMorrey:
    def test_constant_field(self, grid32):
        one = ScalarField(grid32, np.ones(grid32.shape))
        prof = norms.morrey_profile(one, 2, 6)
        # attained on the largest ball; sampled count converges to the analytic ball volume
        assert int(np.argmax(prof.values.max(axis=0))) == 0
        assert prof.norm == pytest.approx((4 * math.pi / 3) ** 0.5 * math.pi**0.5, rel=5e-3)
        fine = norms.morrey_norm(ScalarField(Grid(64), np.ones((64, 64, 64))), 2, 6, center_stride=32)
        assert abs(fine - 3.6276) < abs(prof.norm - 3.6276)

    def test_matches_direct_oracle(self):
        f = rand_field(4)
        prof = norms.morrey_profile(f, 2, 6)
        centers = [tuple(c * f.grid.spacing for c in idx) for idx in prof.centers]
        ref = direct_morrey(f.data, f.grid.box_length, 2, 6, centers, prof.radii)
        assert prof.norm == pytest.approx(ref, rel=1e-12)

    def test_zero(self, grid16):
        assert norms.morrey_norm(ScalarField(grid16, np.zeros(grid16.shape)), 2, 6) == 0.0

    def test_radii(self, grid32):
        assert norms.morrey_radii(grid32) == pytest.approx([math.pi / 2**j for j in range(4)])

    @pytest.mark.parametrize("p,q", [(2, 3), (2, 6), (2, 12), (3, 6), (1.5, 4)])
    def test_dilation_scaling(self, grid32, p, q):
        wide = norms.morrey_norm(bump(grid32, 0.8), p, q)
        narrow = norms.morrey_norm(bump(grid32, 0.4), p, q)
        assert narrow / wide == pytest.approx(2 ** (-3 / q), rel=0.05)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), seeds)
    def test_translation_invariance_on_centre_lattice(self, a, b, c, seed):
        f = rand_field(seed)
        shifted = ScalarField(f.grid, np.roll(f.data, (4 * a, 4 * b, 4 * c), axis=(0, 1, 2)))
        assert norms.morrey_norm(shifted, 2, 6) == norms.morrey_norm(f, 2, 6)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 7), st.integers(0, 7), st.integers(0, 7))
    def test_translation_invariance_full_lattice(self, a, b, c):
        g = Grid(8)
        f = ScalarField(g, np.random.default_rng(1).standard_normal(g.shape))
        shifted = ScalarField(g, np.roll(f.data, (a, b, c), axis=(0, 1, 2)))
        assert norms.morrey_norm(shifted, 2, 4, center_stride=1) == norms.morrey_norm(f, 2, 4, center_stride=1)

    @settings(max_examples=15, deadline=None)
    @given(seeds, st.floats(1.1, 4.0), st.floats(0.0, 1.0))
    def test_holder_monotonicity_in_p(self, seed, p1, t):
        f = rand_field(seed, slope=0.5)
        q = 8.0
        p2 = p1 + t * (q - p1)
        prof = norms.morrey_profile(f, p1, q)
        vol = prof.ball_counts * f.grid.cell_volume
        kappa = float(np.max((vol / prof.radii**3) ** (1 / p1 - 1 / p2)))
        assert prof.norm <= kappa * norms.morrey_norm(f, p2, q) * (1 + 1e-12)

    def test_vector_field_uses_modulus(self, grid16):
        f = rand_field(6)
        v = VectorField(grid16, np.stack([f.data, np.zeros(grid16.shape), np.zeros(grid16.shape)]))
        assert norms.morrey_norm(v, 2, 6) == norms.morrey_norm(f, 2, 6)

    @pytest.mark.parametrize("p,q", [(1, 3), (4, 3), (0.5, 2)])
    def test_exponent_errors(self, grid16, p, q):
        with pytest.raises(ExponentError):
            norms.morrey_norm(ScalarField(grid16, np.ones(grid16.shape)), p, q)


class TestXr:
    def test_zero(self, grid16):
        assert norms.xr_lower_bound(ScalarField(grid16, np.zeros(grid16.shape)), 0.5) == 0.0

    def test_constant_multiplier(self, grid16):
        c = 3.0
        f = ScalarField(grid16, np.full(grid16.shape, c))
        val = norms.xr_lower_bound(f, 0.5)
        # for a constant the quotient is c ||g||_2 / ||g||_{H^r}; the widest trial wins
        grid = grid16
        d2 = norms._torus_dist2(grid)
        s = grid.box_length / 4
        g = ScalarField(grid, np.exp(-d2 / (2 * s * s)))
        assert val >= c * norms.lp_norm(g, 2) / norms.sobolev_hdot_norm(g, 0.5) * (1 - 1e-12)

    def test_below_morrey_envelope(self):
        ratios = []
        for seed in range(6):
            f = rand_field(seed)
            ratios.append(norms.xr_lower_bound(f, 0.5) / norms.morrey_norm(f, 2, 6))
        assert all(math.isfinite(r) and r > 0 for r in ratios)

    def test_rejects_empty_family(self, grid16):
        with pytest.raises(ValueError):
            norms.xr_lower_bound(ScalarField(grid16, np.ones(grid16.shape)), 0.5, trials=0)


class TestHomogeneity:
    @settings(max_examples=10, deadline=None)
    @given(seeds, st.floats(-8, 8).filter(lambda c: abs(c) > 1e-3))
    def test_all_kinds(self, seed, c):
        f = rand_field(seed)
        cf = ScalarField(f.grid, c * f.data)
        for fn in (lambda h: norms.lp_norm(h, 3), lambda h: norms.weak_lp_norm(h, 3),
                   lambda h: norms.sobolev_hdot_norm(h, 0.5), lambda h: norms.besov_b21r_norm(h, 0.5),
                   lambda h: norms.morrey_norm(h, 2, 6), lambda h: norms.xr_lower_bound(h, 0.5)):
            assert fn(cf) == pytest.approx(abs(c) * fn(f), rel=1e-12)


class TestChecks:
    def test_besov_interpolation_cos3x(self, grid32):
        chk = norms.check_lemma23(cos3x(grid32), 0.5)
        assert chk.ratio == pytest.approx(math.sqrt(2 / 3), rel=1e-12)

    @pytest.mark.parametrize("m", [1, 2, 4])
    def test_besov_interpolation_power_of_two_mode(self, grid16, m):
        f = real_scalar(grid16, lambda x, y, z: np.cos(m * z) + 0 * x * y)
        assert norms.check_lemma23(f, 0.5).ratio == pytest.approx(1.0, rel=1e-12)

    def test_besov_interpolation_constant_rejected(self, grid16):
        with pytest.raises(DegenerateInputError):
            norms.check_lemma23(ScalarField(grid16, np.ones(grid16.shape)), 0.5)

    def test_bilinear_constant_times_mode(self, grid32):
        one = ScalarField(grid32, np.ones(grid32.shape))
        g = cos3x(grid32)
        chk = norms.check_bilinear(one, g, 0.5)
        assert chk.lhs == pytest.approx(norms.lp_norm(g, 2), rel=1e-12)
        assert chk.ratio == pytest.approx(1 / (norms.morrey_norm(one, 2, 6) * math.sqrt(2)), rel=1e-12)
        assert chk.ratio == pytest.approx(0.195, abs=1e-3)

    def test_bilinear_zero_factor(self, grid16):
        chk = norms.check_bilinear(rand_field(1), ScalarField(grid16, np.zeros(grid16.shape)), 0.5)
        assert chk.lhs == 0.0 and chk.ratio == 0.0

    def test_product_norm_is_alias_free(self, grid16):
        # cos(7x)^2 aliases on n=16 without padding
        f = real_scalar(grid16, lambda x, y, z: np.cos(7 * x) + 0 * y * z)
        exact = math.sqrt(VOL * (0.25 + 0.125))
        assert norms.product_l2_norm(f, f) == pytest.approx(exact, rel=1e-12)

    def test_anisotropic_gn_sines(self, grid16):
        f = real_scalar(grid16, lambda x, y, z: np.sin(x) * np.sin(y) * np.sin(z))
        chk = norms.check_anisotropic_gn(f, 2, 2, 6)
        assert math.isfinite(chk.ratio) and chk.ratio > 0
        # all factors are analytic: ||f||_6 over ||f||_2 (each partial has the norm of f)
        l6 = (VOL * (5 / 16) ** 3) ** (1 / 6)
        assert chk.ratio == pytest.approx(l6 / (VOL / 8) ** 0.5, rel=1e-10)

    def test_anisotropic_gn_rejects_constant(self, grid16):
        with pytest.raises(DegenerateInputError):
            norms.check_anisotropic_gn(ScalarField(grid16, np.ones(grid16.shape)), 2, 2, 6)

    @pytest.mark.parametrize("a,l,g", [(2, 2, 5), (1, 1, 6), (3, 3, 6), (2, math.inf, 6)])
    def test_anisotropic_gn_rejects_exponents(self, grid16, a, l, g):
        with pytest.raises(ExponentError):
            norms.check_anisotropic_gn(rand_field(0), a, l, g)

    def test_lebesgue_interpolation_beta2_is_one(self):
        assert norms.check_lemma25(rand_field(3), 2).ratio == 1.0

    @pytest.mark.parametrize("beta", [1.9, 6.5])
    def test_lebesgue_interpolation_range(self, beta):
        with pytest.raises(ExponentError):
            norms.check_lemma25(rand_field(3), beta)

    def test_embedding_chain_constant(self, grid32):
        one = ScalarField(grid32, np.ones(grid32.shape))
        lor, mor = norms.check_embedding_chain(one, 0.5, 2)
        assert lor.ratio == pytest.approx(1.0, rel=1e-12)
        assert mor.ratio == pytest.approx(norms.morrey_norm(one, 2, 6) / VOL ** (1 / 6), rel=1e-12)

    def test_embedding_chain_zero(self, grid16):
        assert norms.check_embedding_chain(ScalarField(grid16, np.zeros(grid16.shape)), 0.5, 2) == []

    @pytest.mark.parametrize("r,p", [(0, 2), (1.5, 2), (0.5, 7), (0.5, 1.5)])
    def test_embedding_chain_ranges(self, r, p):
        with pytest.raises(ExponentError):
            norms.check_embedding_chain(rand_field(0), r, p)

    def test_records_serialize(self):
        chk = norms.check_lemma23(rand_field(0), 0.5, seed=11)
        rec = json.loads(chk.to_json())
        assert set(rec) >= {"name", "lhs", "rhs", "ratio", "seed"}
        assert rec["seed"] == 11

    def test_reproducible_bitwise(self):
        a = norms.check_bilinear(rand_field(8), rand_field(9), 0.25)
        b = norms.check_bilinear(rand_field(8), rand_field(9), 0.25)
        assert a.to_json() == b.to_json()


class TestReports:
    def test_norm_report_morrey_flags(self):
        rep = norms.norm_report(rand_field(0), "MorreyM", p=1.5, q=6)
        assert rep.flags == ("p<2",)
        rec = json.loads(rep.to_json())
        assert rec["kind"] == "MorreyM" and rec["params"]["q"] == 6 and rec["value"] > 0

    @pytest.mark.parametrize("kind,params", [("Lp", {"p": 2}), ("WeakLp", {"p": 3}), ("SobolevHdot", {"r": 0.5}),
                                             ("BesovB21r", {"r": 0.5}), ("XrLowerBound", {"r": 0.5})])
    def test_norm_report_kinds(self, kind, params):
        rep = norms.norm_report(rand_field(0), kind, **params)
        assert rep.value > 0 and rep.grid == {"n": 16, "box_length": TWO_PI}

    def test_norm_report_zero_iff_zero(self, grid16):
        z = ScalarField(grid16, np.zeros(grid16.shape))
        for kind, params in (("Lp", {"p": 2}), ("SobolevHdot", {"r": 0.5}), ("BesovB21r", {"r": 0.5}),
                             ("MorreyM", {"p": 2, "q": 6})):
            assert norms.norm_report(z, kind, **params).value == 0.0

    def test_unknown_kind(self, grid16):
        with pytest.raises(ValueError):
            norms.norm_report(ScalarField(grid16, np.ones(grid16.shape)), "Triebel")
