import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rlab import sampling
from rlab.errors import BlowupError
from rlab.flows import (
    BootstrapParams,
    EvolveConfig,
    evolve_hamiltonian,
    evolve_linear,
    evolve_linear_to,
    evolve_nonlinear,
    load_trajectory,
    profile_of,
    save_trajectory,
)
from rlab.norms import sobolev_norm
from rlab.potentials import PotentialSet, gaussian_potential, zero_potential_set
from rlab.spectral import PHYSICAL, Field, free_propagate, make_grid, zero_field


@pytest.fixture(scope="module")
def grid():
    return make_grid(16, 32.0)


@pytest.fixture(scope="module")
def datum(grid):
    rng = np.random.default_rng(42)
    f = sampling.localized_packet(grid, -4, rng, width=4.0)
    return Field(grid, PHYSICAL, 0.05 * f.data)


@pytest.fixture(scope="module")
def potentials(grid):
    v = gaussian_potential(grid, (0, 0, 0), 4.0, 0.08)
    a = (
        gaussian_potential(grid, (1.0, 0, 0), 4.0, 0.06),
        gaussian_potential(grid, (0, 1.0, 0), 4.0, -0.05),
        gaussian_potential(grid, (0, 0, -1.0), 4.0, 0.055),
    )
    return PotentialSet(v=v, a=a, delta_target=1000.0)


class TestEvolveConfig:
    def test_rejects_non_integral_step_count(self):
        with pytest.raises(ValueError):
            EvolveConfig(t_end=2.0, dt=0.3)

    def test_rejects_times_before_one(self):
        with pytest.raises(ValueError):
            EvolveConfig(t_end=2.0, dt=0.1, t_start=0.5)

    def test_rejects_inconsistent_direction(self):
        with pytest.raises(ValueError):
            EvolveConfig(t_end=2.0, dt=-0.1)

    def test_backward_runs_allowed_with_negative_dt(self):
        cfg = EvolveConfig(t_end=1.0, dt=-0.1, t_start=2.0)
        assert cfg.n_steps == 10

    def test_times_ladder(self):
        cfg = EvolveConfig(t_end=1.5, dt=0.1)
        assert_allclose(cfg.times(), 1.0 + 0.1 * np.arange(6))


class TestBootstrapParams:
    def test_eps1(self):
        bp = BootstrapParams(eps0=0.01, amplification=10.0, delta=0.1)
        assert bp.eps1 == 0.1

    def test_rejects_amplification_below_one(self):
        with pytest.raises(ValueError):
            BootstrapParams(eps0=0.01, amplification=0.5, delta=0.1)


class TestEvolveLinear:
    def test_zero_potential_matches_free_flow(self, grid, datum):
        cfg = EvolveConfig(t_end=2.0, dt=0.05, snapshot_stride=5)
        tr = evolve_linear(datum, zero_potential_set(grid), cfg)
        for t, f in zip(tr.times, tr.fields):
            ref = free_propagate(datum, t - 1.0)
            assert np.max(np.abs(f.data - ref.data)) < 1e-10

    def test_single_step_bit_identical_to_free_propagate(self, grid, datum):
        cfg = EvolveConfig(t_end=1.05, dt=0.05)
        tr = evolve_linear(datum, zero_potential_set(grid), cfg)
        ref = free_propagate(datum, 0.05)
        assert np.array_equal(tr.fields[-1].data, ref.data)

    def test_constant_potential_is_global_phase(self, grid, datum):
        c = 0.037
        ps = PotentialSet(
            v=Field(grid, PHYSICAL, np.full(grid.shape, c, dtype=np.complex128)),
            a=(zero_field(grid),) * 3,
            delta_target=1000.0,
        )
        cfg = EvolveConfig(t_end=2.0, dt=0.01)
        tr = evolve_linear(datum, ps, cfg, skip_certification=True)
        ref = free_propagate(datum, 1.0).data * np.exp(-1j * c * 1.0)
        assert np.max(np.abs(tr.fields[-1].data - ref)) < 1e-8

    def test_strang_self_convergence_order_two(self, grid, datum, potentials):
        def terminal(dt):
            cfg = EvolveConfig(t_end=2.0, dt=dt, snapshot_stride=10**6)
            return evolve_linear(datum, potentials, cfg,
                                 skip_certification=True).fields[-1].data

        uA, uB, uC = terminal(0.04), terminal(0.02), terminal(0.01)
        e1 = np.linalg.norm(uA - uB)
        e2 = np.linalg.norm(uB - uC)
        assert 3.2 <= e1 / e2 <= 4.8

    def test_uncertified_potentials_rejected_without_override(self, grid, datum):
        ps = PotentialSet(
            v=gaussian_potential(grid, (0, 0, 0), 4.0, 0.5),
            a=(zero_field(grid),) * 3,
            delta_target=1e-6,
        )
        cfg = EvolveConfig(t_end=1.2, dt=0.05)
        with pytest.raises(ValueError):
            evolve_linear(datum, ps, cfg)
        evolve_linear(datum, ps, cfg, skip_certification=True)

    def test_time_reversal(self, grid, datum, potentials):
        fwd = evolve_linear_to(datum, potentials, 1.0, 1.2, 0.002,
                               skip_certification=True)
        back = evolve_linear_to(fwd, potentials, 1.2, 1.0, -0.002,
                                skip_certification=True)
        assert np.max(np.abs(back.data - datum.data)) < 1e-8

    def test_blowup_guard_trips(self, grid, datum):
        violent = PotentialSet(
            v=zero_field(grid),
            a=(gaussian_potential(grid, (0, 0, 0), 4.0, 40.0),) * 3,
            delta_target=1000.0,
        )
        cfg = EvolveConfig(t_end=3.0, dt=0.5)
        with pytest.raises(BlowupError):
            evolve_linear(datum, violent, cfg, skip_certification=True)


class TestEvolveNonlinear:
    def test_zero_datum_stays_zero(self, grid):
        cfg = EvolveConfig(t_end=2.0, dt=0.05)
        tr = evolve_nonlinear(zero_field(grid), zero_potential_set(grid), cfg)
        assert np.all(tr.fields[-1].data == 0)

    def test_small_datum_stays_perturbative(self, grid, datum):
        # the H10 profile norm moves by less than the datum's own size
        cfg = EvolveConfig(t_end=2.0, dt=0.01, snapshot_stride=20)
        tr = evolve_nonlinear(datum, zero_potential_set(grid), cfg)
        prof = profile_of(tr)
        h0 = float(sobolev_norm(prof.fields[0], 10))
        sup = max(float(sobolev_norm(f, 10)) for f in prof.fields)
        assert sup <= 2.0 * h0

    def test_dealias_off_runs(self, grid, datum, potentials):
        cfg = EvolveConfig(t_end=1.2, dt=0.05, dealias="off")
        tr = evolve_nonlinear(datum, potentials, cfg, skip_certification=True)
        assert np.isfinite(tr.fields[-1].data).all()

    def test_strang_self_convergence_order_two(self, grid, datum, potentials):
        def terminal(dt):
            cfg = EvolveConfig(t_end=2.0, dt=dt, snapshot_stride=10**6)
            return evolve_nonlinear(datum, potentials, cfg,
                                    skip_certification=True).fields[-1].data

        uA, uB, uC = terminal(0.04), terminal(0.02), terminal(0.01)
        ratio = np.linalg.norm(uA - uB) / np.linalg.norm(uB - uC)
        assert 3.2 <= ratio <= 4.8

    def test_bootstrap_monitor_reports_exit_without_clipping(self, grid, datum,
                                                             potentials, caplog):
        bp = BootstrapParams(eps0=1e-6, amplification=1.0, delta=1.0)
        cfg = EvolveConfig(t_end=1.5, dt=0.05, snapshot_stride=5)
        with caplog.at_level(logging.WARNING):
            tr = evolve_nonlinear(datum, potentials, cfg, bootstrap=bp,
                                  skip_certification=True)
        mon = tr.meta["bootstrap"]
        assert mon["exited"] and mon["exit_time"] == 1.0
        assert any("bootstrap exit" in r.message for r in caplog.records)
        # norms are reported, never clipped
        assert mon["rows"][0]["h10"] > bp.eps1

    def test_bootstrap_monitor_contained_run(self, grid, datum, potentials):
        bp = BootstrapParams(eps0=1.0, amplification=10.0, delta=1.0)
        cfg = EvolveConfig(t_end=1.5, dt=0.05, snapshot_stride=5)
        tr = evolve_nonlinear(datum, potentials, cfg, bootstrap=bp,
                              skip_certification=True)
        assert not tr.meta["bootstrap"]["exited"]


class TestEvolveHamiltonian:
    def test_free_limit(self, grid, datum):
        cfg = EvolveConfig(t_end=2.0, dt=0.05, snapshot_stride=10)
        tr = evolve_hamiltonian(datum, (zero_field(grid),) * 3, zero_field(grid), cfg)
        ref = free_propagate(datum, 1.0)
        assert np.max(np.abs(tr.fields[-1].data - ref.data)) < 1e-10

    def test_mass_conservation_over_thousand_steps(self, grid, datum, potentials):
        cfg = EvolveConfig(t_end=3.0, dt=0.002, snapshot_stride=100)
        tr = evolve_hamiltonian(datum, potentials.a, potentials.v, cfg)
        m = np.asarray(tr.meta["mass"])
        assert np.max(np.abs(m / m[0] - 1.0)) <= 1e-6

    def test_energy_drift_small(self, grid, datum, potentials):
        cfg = EvolveConfig(t_end=3.0, dt=0.002, snapshot_stride=100)
        tr = evolve_hamiltonian(datum, potentials.a, potentials.v, cfg)
        h = np.asarray(tr.meta["hamiltonian"])
        assert np.max(np.abs(h / h[0] - 1.0)) <= 1e-5

    def test_rejects_complex_potentials(self, grid, datum):
        bad = Field(grid, PHYSICAL, 1j * np.ones(grid.shape))
        cfg = EvolveConfig(t_end=1.1, dt=0.05)
        with pytest.raises(ValueError):
            evolve_hamiltonian(datum, (bad,) * 3, zero_field(grid), cfg)


class TestProfile:
    def test_free_flow_profile_constant(self, grid, datum):
        cfg = EvolveConfig(t_end=3.0, dt=0.05, snapshot_stride=10)
        prof = profile_of(evolve_linear(datum, zero_potential_set(grid), cfg))
        base = prof.fields[0].data
        for f in prof.fields[1:]:
            assert np.max(np.abs(f.data - base)) < 1e-12

    def test_profile_at_start_is_pullback_of_datum(self, grid, datum):
        cfg = EvolveConfig(t_end=1.2, dt=0.05)
        prof = profile_of(evolve_linear(datum, zero_potential_set(grid), cfg))
        ref = free_propagate(datum, -1.0)
        assert np.max(np.abs(prof.fields[0].data - ref.data)) < 1e-13


class TestPersistence:
    def test_round_trip(self, tmp_path, grid, datum):
        cfg = EvolveConfig(t_end=1.2, dt=0.05, snapshot_stride=2)
        tr = evolve_linear(datum, zero_potential_set(grid), cfg)
        save_trajectory(tr, tmp_path / "run", config_hash="abc")
        back = load_trajectory(tmp_path / "run")
        assert_allclose(back.times, tr.times)
        assert back.meta["config_hash"] == "abc"
        # snapshots quantize to complex64
        for a, b in zip(back.fields, tr.fields):
            assert np.max(np.abs(a.data - b.data)) < 1e-6 * max(1.0, np.max(np.abs(b.data)))
