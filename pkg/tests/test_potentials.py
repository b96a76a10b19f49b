import numpy as np
import pytest
from numpy.testing import assert_allclose

from rlab.norms import lebesgue_norm, y_norm
from rlab.potentials import (
    PotentialSet,
    certify,
    gaussian_potential,
    rescale_to_delta,
    zero_potential_set,
)
from rlab.spectral import (
    PHYSICAL,
    Field,
    apply_symbol,
    bessel_symbol,
    field_from_function,
    make_grid,
    zero_field,
)


@pytest.fixture(scope="module")
def grid():
    return make_grid(16, 48.0)


@pytest.fixture(scope="module")
def sample_set(grid):
    v = gaussian_potential(grid, (0, 0, 0), 4.0, 0.15)
    a = (
        gaussian_potential(grid, (1.0, 0.5, 0.0), 4.0, 0.12),
        gaussian_potential(grid, (0.0, 1.0, -0.5), 4.0, -0.10),
        gaussian_potential(grid, (0.5, 0.0, -1.0), 4.0, 0.11),
    )
    return PotentialSet(v=v, a=a, delta_target=1000.0)


class TestGaussianPotential:
    def test_zero_amplitude(self, grid):
        f = gaussian_potential(grid, (0, 0, 0), 2.0, 0.0)
        assert np.all(f.data == 0)

    def test_l1_closed_form(self, grid):
        amp, width = 0.3, 3.5
        f = gaussian_potential(grid, (0, 0, 0), width, amp)
        assert_allclose(
            lebesgue_norm(f, 1), amp * (2 * np.pi) ** 1.5 * width**3, rtol=1e-8
        )

    def test_linf_is_amplitude(self, grid):
        f = gaussian_potential(grid, (0, 0, 0), 3.0, 0.25)
        assert_allclose(lebesgue_norm(f, np.inf), 0.25, rtol=1e-12)

    def test_rejects_bad_width(self, grid):
        with pytest.raises(ValueError):
            gaussian_potential(grid, (0, 0, 0), 0.0, 1.0)

    def test_boundary_bump_carries_note(self, grid):
        f = gaussian_potential(grid, (-23.0, 0, 0), 3.0, 1.0)
        assert f.note and "wrap-around" in f.note


class TestPotentialSet:
    def test_rejects_complex_potentials(self, grid):
        bad = Field(grid, PHYSICAL, 1j * np.ones(grid.shape))
        with pytest.raises(ValueError):
            PotentialSet(v=bad, a=(zero_field(grid),) * 3, delta_target=1.0)

    def test_rejects_mixed_grids(self, grid):
        other = make_grid(8, 48.0)
        with pytest.raises(ValueError):
            PotentialSet(
                v=zero_field(other), a=(zero_field(grid),) * 3, delta_target=1.0
            )

    def test_zero_detection(self, grid):
        assert zero_potential_set(grid).is_zero


class TestCertify:
    def test_zero_set_passes_any_delta(self, grid):
        cert = certify(zero_potential_set(grid), 1e-30)
        assert cert.passed

    def test_zero_delta_with_nonzero_potential_fails(self, grid, sample_set):
        assert not certify(sample_set, 0.0).passed

    def test_compositional_oracle_single_gaussian(self, grid):
        # certificate entries must equal hand-composed norm-engine calls
        v = gaussian_potential(grid, (0, 0, 0), 4.0, 0.2)
        ps = PotentialSet(v=v, a=(zero_field(grid),) * 3, delta_target=1.0)
        cert = certify(ps, 1.0)
        assert_allclose(cert.entries["V"]["y"], float(y_norm(v)), rtol=1e-12)
        w = np.sqrt(1.0 + np.broadcast_to(grid.radius_squared, grid.shape))
        weighted = Field(grid, PHYSICAL, w * v.data)
        assert_allclose(cert.entries["V"]["y_weighted"], float(y_norm(weighted)), rtol=1e-12)
        smooth = apply_symbol(v, bessel_symbol(10))  # (1+|xi|^2)^5
        assert_allclose(cert.entries["V"]["y_smooth"], float(y_norm(smooth)), rtol=1e-12)
        for name in ("a1", "a2", "a3", "a1^2", "a2^2", "a3^2"):
            assert cert.entries[name]["y"] == 0.0

    def test_squares_included_for_magnetic_components(self, grid, sample_set):
        cert = certify(sample_set, 1000.0)
        a1 = sample_set.a[0]
        sq = Field(grid, PHYSICAL, a1.data * a1.data)
        assert_allclose(cert.entries["a1^2"]["y"], float(y_norm(sq)), rtol=1e-12)

    def test_monotone_in_amplitude_for_lp_parts(self, grid):
        # nested Gaussians: |w1| <= |w2| pointwise
        w1 = gaussian_potential(grid, (0, 0, 0), 4.0, 0.1)
        w2 = gaussian_potential(grid, (0, 0, 0), 4.0, 0.2)
        assert float(y_norm(w1)) <= float(y_norm(w2))

    def test_under_resolved_smooth_weight_warns(self):
        g = make_grid(8, 8.0)
        spiky = field_from_function(
            g, lambda a, b, c: np.exp(-(a**2 + b**2 + c**2) / (2 * 0.6**2))
        )
        ps = PotentialSet(v=spiky, a=(zero_field(g),) * 3, delta_target=1.0)
        cert = certify(ps, 1.0)
        assert any("resolution warning" in n for n in cert.notes)

    def test_serializes_every_norm(self, grid, sample_set):
        import json

        doc = json.loads(certify(sample_set, 1000.0).to_json())
        assert set(doc["entries"]) == {
            "V", "a1", "a2", "a3", "a1^2", "a2^2", "a3^2",
        }
        for triple in doc["entries"].values():
            assert set(triple) == {"y", "y_weighted", "y_smooth"}


class TestRescale:
    def test_already_passing_returns_one(self, grid, sample_set):
        res = rescale_to_delta(sample_set, 1e6)
        assert res.lam == 1.0

    def test_doubling_amplitudes_halves_lambda(self, grid, sample_set):
        delta = 120.0
        res1 = rescale_to_delta(sample_set, delta)
        doubled = sample_set.scaled(2.0)
        res2 = rescale_to_delta(doubled, delta)
        assert 0.45 <= res2.lam / res1.lam <= 0.55

    def test_zero_set_rejected(self, grid):
        with pytest.raises(ValueError):
            rescale_to_delta(zero_potential_set(grid), 1.0)

    def test_idempotent(self, grid, sample_set):
        res = rescale_to_delta(sample_set, 120.0)
        again = rescale_to_delta(res.potentials, 120.0)
        assert again.lam == 1.0
        assert again.certificate.passed
