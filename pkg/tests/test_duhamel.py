import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from rlab import sampling
from rlab.duhamel import (
    DuhamelTerm,
    ResonanceSample,
    born_term,
    born_terms,
    denominator_sweep,
    regularized_denominator_check,
    resonance_classify,
    series_decay_report,
    wave_operator,
)
from rlab.errors import QuadratureError
from rlab.potentials import PotentialSet, gaussian_potential, zero_potential_set
from rlab.spectral import PHYSICAL, Field, free_propagate, l2_norm, make_grid


@pytest.fixture(scope="module")
def grid():
    return make_grid(16, 32.0)


@pytest.fixture(scope="module")
def datum(grid):
    rng = np.random.default_rng(42)
    f = sampling.localized_packet(grid, -4, rng, width=4.0)
    return Field(grid, PHYSICAL, 0.01 * f.data)


@pytest.fixture(scope="module")
def potentials(grid):
    v = gaussian_potential(grid, (0, 0, 0), 4.0, 0.15)
    a = (
        gaussian_potential(grid, (1.0, 0.5, 0), 4.0, 0.12),
        gaussian_potential(grid, (0, 1.0, -0.5), 4.0, -0.10),
        gaussian_potential(grid, (0.5, 0, -1.0), 4.0, 0.11),
    )
    return PotentialSet(v=v, a=a, delta_target=1e9)


class TestBornTerm:
    def test_order_zero_is_free_flow(self, grid, datum, potentials):
        term = born_term(datum, potentials, 0, 2.0, 0.05)
        ref = free_propagate(datum, 1.0)
        assert np.max(np.abs(term.field.data - ref.data)) < 1e-12

    def test_zero_potential_kills_higher_orders(self, grid, datum):
        terms = born_terms(datum, zero_potential_set(grid), 3, 2.0, 0.05)
        for term in terms[1:]:
            assert np.all(term.field.data == 0)

    def test_order_zero_profile_is_time_independent(self, grid, datum, potentials):
        # the free term's profile e^{-i t Lap} term_0(t) is constant in t
        profiles = []
        for t in (1.5, 2.0, 3.0):
            term = born_term(datum, potentials, 0, t, 0.05)
            profiles.append(free_propagate(term.field, -t).data)
        for p in profiles[1:]:
            assert np.max(np.abs(p - profiles[0])) < 1e-12

    def test_tags_length_matches_order(self, grid, datum, potentials):
        term = born_term(datum, potentials, 2, 1.5, 0.05)
        assert term.order == 2 and len(term.tags) == 2

    def test_partial_sums_approach_the_flow(self, grid, datum, potentials):
        rep = series_decay_report(datum, potentials, 4, 2.0, 0.01,
                                  compare_with_flow=True)
        errs = rep.partial_sum_errors
        assert all(b < a for a, b in zip(errs[:4], errs[1:4]))

    def test_refinement_check_raises_on_coarse_dt(self, grid, potentials):
        # a fast band-2 datum over a long window with two quadrature panels
        rng = np.random.default_rng(1)
        fast = Field(grid, PHYSICAL,
                     0.01 * sampling.localized_packet(grid, 2, rng, width=3.0).data)
        with pytest.raises(QuadratureError):
            born_term(fast, potentials, 1, 9.0, 4.0, check_refinement=True)

    def test_refinement_check_passes_on_fine_dt(self, grid, datum, potentials):
        term = born_term(datum, potentials, 1, 1.5, 0.01, check_refinement=True)
        assert term.h10 > 0

    def test_rejects_invalid_order(self):
        with pytest.raises(ValueError):
            DuhamelTerm(order=-1, tags=(), field=None, h10=0.0, x=0.0)


class TestSeriesDecay:
    def test_zero_potentials_give_zero_ratios(self, grid, datum):
        rep = series_decay_report(datum, zero_potential_set(grid), 3, 2.0, 0.05)
        assert all(r == 0.0 for r in rep.ratios_h10)

    def test_halving_amplitudes_halves_the_rate(self, grid, datum, potentials):
        # the linear-flow Born term of order n scales exactly like lambda^n
        rep1 = series_decay_report(datum, potentials, 3, 2.0, 0.02)
        rep2 = series_decay_report(datum, potentials.scaled(0.5), 3, 2.0, 0.02)
        assert 0.5 - 0.15 <= rep2.rate / rep1.rate <= 0.5 + 0.15

    def test_csv_rows_shape(self, grid, datum, potentials):
        rep = series_decay_report(datum, potentials, 2, 1.5, 0.05)
        rows = rep.rows()
        assert [r["n"] for r in rows] == [0, 1, 2]
        assert math.isnan(rows[0]["ratio"])
        assert rows[1]["ratio"] == rep.ratios_h10[0]


class TestWaveOperator:
    def test_free_flow_trace_is_zero(self, grid, datum):
        res = wave_operator(datum, zero_potential_set(grid), 8.0, 0.05)
        assert all(d == 0.0 for d in res.distances)
        assert res.converged
        # g(T) is the constant profile e^{-i Lap} u1, not u1 itself
        ref = free_propagate(datum, -1.0)
        assert np.max(np.abs(res.field.data - ref.data)) < 1e-12

    def test_rejects_non_dyadic_horizon(self, grid, datum):
        with pytest.raises(ValueError):
            wave_operator(datum, zero_potential_set(grid), 9.0, 0.05)

    def test_interacting_flow_contracts(self):
        # wide box so the packet's transit is over before it wraps
        g = make_grid(16, 48.0)
        x1, x2, x3 = g.coord_mesh
        env = np.exp(-(x1**2 + x2**2 + x3**2) / 32.0) * np.exp(1j * 0.6 * x1)
        f = Field(g, PHYSICAL, env.astype(np.complex128))
        f = Field(g, PHYSICAL, f.data / l2_norm(f))
        u1 = Field(g, PHYSICAL, 0.01 * free_propagate(f, 6.0).data)
        v = gaussian_potential(g, (0, 0, 0), 4.0, 0.15)
        a = (
            gaussian_potential(g, (1.0, 0.5, 0), 4.0, 0.12),
            gaussian_potential(g, (0, 1.0, -0.5), 4.0, -0.10),
            gaussian_potential(g, (0.5, 0, -1.0), 4.0, 0.11),
        )
        ps = PotentialSet(v=v, a=a, delta_target=1e9)
        res = wave_operator(u1, ps, 8.0, 0.05, skip_certification=True)
        # the dyadic tail contracts (the first increment is pre-asymptotic)
        assert res.distances[2] < res.distances[1]
        assert len(res.taus) == 3


class TestRegularizedDenominator:
    def test_purely_imaginary_case(self):
        chk = regularized_denominator_check(0.0, 1.0, 30.0, 1e-3)
        assert abs(chk.reference - (-1j)) < 1e-15
        assert chk.residual <= 1e-6

    def test_generic_case_matches_closed_form(self):
        chk = regularized_denominator_check(3.0, 0.1, 200.0, 1e-3)
        assert abs(chk.value - 1.0 / (3.0 + 0.1j)) < 1e-4

    def test_beta_sweep_converges_off_singularity(self):
        a = 2.0
        residuals = []
        for beta in (1e-1, 1e-2, 1e-3):
            chk = regularized_denominator_check(a, beta, 8.0 / beta, 5e-3)
            residuals.append(chk.residual)
            assert abs(chk.value - 1.0 / (a + 1j * beta)) < 0.05
        assert abs(1.0 / (a + 1e-3j) - 1.0 / a) < 1e-3  # pointwise limit
        assert max(residuals) < 0.05  # stays bounded through the sweep

    def test_trapezoid_second_order_convergence(self):
        res = [regularized_denominator_check(1.0, 0.5, 60.0, d).residual
               for d in (4e-2, 2e-2, 1e-2)]
        assert 3.0 <= res[0] / res[1] <= 5.0
        assert 3.0 <= res[1] / res[2] <= 5.0

    def test_truncation_warning(self):
        chk = regularized_denominator_check(1.0, 0.1, 20.0, 1e-3)
        assert "truncation warning" in chk.note

    def test_rejects_nonpositive_beta(self):
        with pytest.raises(ValueError):
            regularized_denominator_check(1.0, 0.0, 10.0, 1e-3)

    def test_sweep_table_shape(self):
        rows = denominator_sweep(a_values=(0.0, 1.0), betas=(1e-1, 1e-2),
                                 tau_max_factor=8.0, dtau=5e-3)
        assert len(rows) == 4
        assert all(r["residual"] < 0.05 for r in rows)


class TestResonanceClassify:
    def test_origin_is_space_time_resonant(self):
        assert resonance_classify((0, 0, 0), (0, 0, 0), 0.1, 0.1) == "space-time-resonant"

    def test_equal_moduli_is_time_resonant(self):
        out = resonance_classify((1, 0, 0), (0, 1, 0), 0.1, 0.1)
        assert out == "time-resonant"

    def test_generic_pair_is_nonresonant(self):
        assert resonance_classify((2, 0, 0), (1, 0, 0), 0.1, 0.1) == "nonresonant"

    def test_small_eta_is_space_resonant(self):
        assert resonance_classify((2, 0, 0), (0.05, 0, 0), 0.1, 0.1) == "space-resonant"

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=0.1, max_value=10.0))
    def test_scale_consistency(self, lam):
        xi = np.array([1.3, -0.4, 0.2])
        eta = np.array([0.5, 0.1, -0.7])
        base = resonance_classify(xi, eta, 0.6, 0.9)
        scaled = resonance_classify(lam * xi, lam * eta, lam * 0.6, lam**2 * 0.9)
        assert base == scaled


class TestResonanceSample:
    def test_phase_identity_holds(self):
        s = ResonanceSample(xi=(1.0, 2.0, -0.5), eta=(0.3, -0.2, 1.1), beta=0.01)
        xi = np.array(s.xi)
        eta = np.array(s.eta)
        assert abs(s.phase_bilin - 2 * float(eta @ (xi - eta))) < 1e-12
        assert abs(s.phase_pot - (xi @ xi - eta @ eta)) < 1e-12

    def test_space_multiplier(self):
        s = ResonanceSample(xi=(0, 0, 0), eta=(2.0, 0, 0), beta=0.0)
        assert_allclose(s.space_multiplier, (0.5, 0.0, 0.0))

    def test_rejects_negative_beta(self):
        with pytest.raises(ValueError):
            ResonanceSample(xi=(1, 0, 0), eta=(0, 1, 0), beta=-0.1)
