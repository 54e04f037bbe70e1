import math

import numpy as np
import pytest

from noisespec import heom
from noisespec.bath import BathSpec, LorentzDrude, OhmicFamily, decoherence_gamma
from noisespec.dephasing import DephasingRun, evolve_dephasing
from noisespec.nonmarkov import (GridMismatchError, SigmaLabel, sigma_alpha_labels,
                                 sigma_average, trace_distance)
from noisespec.states import DensityMatrix2, StateTrajectory


def random_density_matrix(rng):
    # random pure-state mixture: guaranteed Hermitian unit-trace PSD
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    m = a @ a.conj().T
    return m / np.trace(m).real


class TestTraceDistance:
    def test_zero_for_identical(self):
        rho = DensityMatrix2.plus()
        assert trace_distance(rho, rho) == 0.0

    def test_orthogonal_pure_states(self):
        assert trace_distance(DensityMatrix2.ground(),
                              DensityMatrix2.excited()) == pytest.approx(1.0)

    def test_plus_vs_ground(self):
        d = trace_distance(DensityMatrix2.plus(), DensityMatrix2.ground())
        assert d == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)

    def test_metric_axioms_random_pairs(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            a, b, c = (random_density_matrix(rng) for _ in range(3))
            dab = trace_distance(a, b)
            dba = trace_distance(b, a)
            assert dab == dba                        # symmetry, exact
            assert 0.0 <= dab <= 1.0                 # range
            assert trace_distance(a, c) <= dab + trace_distance(b, c) + 1e-12
        eq = random_density_matrix(rng)
        assert trace_distance(eq, eq.copy()) == 0.0  # zero iff equal

    def test_rejects_non_hermitian(self):
        bad = np.array([[0.5, 0.4], [0.1, 0.5]])
        with pytest.raises(ValueError, match="Hermitian"):
            trace_distance(bad, DensityMatrix2.ground())

    def test_contractive_under_dephasing_map(self):
        # one step of the dephasing channel: rho01 -> rho01 * exp(-g), g >= 0
        rng = np.random.default_rng(5)
        g = decoherence_gamma(OhmicFamily(0.25, 1.0, 0.5), 0.0, 1.5)
        shrink = math.exp(-g)
        for _ in range(200):
            a = random_density_matrix(rng)
            b = random_density_matrix(rng)
            ea, eb = a.copy(), b.copy()
            for m in (ea, eb):
                m[0, 1] *= shrink
                m[1, 0] *= shrink
            assert trace_distance(ea, eb) <= trace_distance(a, b) + 1e-10


class TestSigmaAverage:
    def test_identical_trajectories(self):
        traj = evolve_dephasing(DephasingRun(sd=OhmicFamily(0.3, 1.0, 0.5)))
        assert sigma_average(traj, traj) == 0.0

    def test_constant_distance(self):
        times = np.linspace(0.0, 5.0, 50)
        a = StateTrajectory(times, np.array([np.diag([1.0, 0.0]) + 0j] * 50))
        b = StateTrajectory(times, np.array([np.diag([0.0, 1.0]) + 0j] * 50))
        assert sigma_average(a, b) == pytest.approx(1.0, abs=1e-14)

    def test_grid_mismatch_rejected(self):
        t1 = np.linspace(0.0, 5.0, 50)
        t2 = np.linspace(0.0, 6.0, 50)
        states = np.array([np.eye(2) / 2 + 0j] * 50)
        with pytest.raises(GridMismatchError):
            sigma_average(StateTrajectory(t1, states),
                          StateTrajectory(t2, states))
        with pytest.raises(GridMismatchError):
            sigma_average(StateTrajectory(t1, states),
                          StateTrajectory(t1[:40], states[:40]))

    def test_refinement_oracle_dephasing(self):
        # 200-point trapezoid within 1e-3 of a 2000-point refinement
        def states_on(ts, eta):
            sd = OhmicFamily(eta, 1.0, 0.5)
            gam = decoherence_gamma(sd, 0.0, ts)
            phase = np.exp(-gam + 1j * ts)
            out = np.full((ts.size, 2, 2), 0.5, dtype=complex)
            out[:, 0, 1] = 0.5 * phase
            out[:, 1, 0] = np.conj(out[:, 0, 1])
            return out

        coarse_t = np.linspace(0.0, 20.0, 200)
        fine_t = np.linspace(0.0, 20.0, 2000)
        coarse = sigma_average(
            StateTrajectory(coarse_t, states_on(coarse_t, 0.1)),
            StateTrajectory(coarse_t, states_on(coarse_t, 0.9)))
        fine = sigma_average(
            StateTrajectory(fine_t, states_on(fine_t, 0.1)),
            StateTrajectory(fine_t, states_on(fine_t, 0.9)))
        assert coarse == pytest.approx(fine, abs=1e-3)


@pytest.fixture(scope="module")
def sweep():
    # coarse shared-grid sweep (small hierarchy for speed)
    grid = np.linspace(0.0, 10.0, 120)
    runs = {}
    for alpha in (0.3, 1.0, 3.0, 10.0):
        delta = 0.5 / alpha
        spec = heom.SpinBosonSpec(
            delta=delta, bath=BathSpec(LorentzDrude(0.25, 0.5), 0.5 * delta))
        k = 2 if alpha < 4 else 5
        runs[alpha] = heom.propagate(spec, heom.HierarchySpec(4, k),
                                     t_grid=grid)
    return runs


class TestSigmaAlphaLabels:
    def test_reference_label_exactly_zero(self, sweep):
        labels = sigma_alpha_labels(sweep, 10.0)
        assert labels[10.0].sigma == 0.0

    def test_duplicate_reference_both_zero(self, sweep):
        dup = dict(sweep)
        ref = sweep[10.0]
        dup[9.999] = StateTrajectory(ref.times, ref.states.copy())
        labels = sigma_alpha_labels(dup, 10.0)
        assert labels[10.0].sigma == 0.0
        assert labels[9.999].sigma == 0.0

    def test_argmax_at_minimum_alpha(self, sweep):
        labels = sigma_alpha_labels(sweep, 10.0)
        best = max(labels.values(), key=lambda lab: lab.sigma)
        assert best.alpha == min(sweep)

    def test_all_in_unit_interval(self, sweep):
        for lab in sigma_alpha_labels(sweep, 10.0).values():
            assert 0.0 <= lab.sigma <= 1.0

    def test_missing_reference(self, sweep):
        runs = {a: t for a, t in sweep.items() if a != 10.0}
        with pytest.raises(ValueError, match="reference"):
            sigma_alpha_labels(runs, 10.0)

    def test_deterministic(self, sweep):
        l1 = sigma_alpha_labels(sweep, 10.0)
        l2 = sigma_alpha_labels(sweep, 10.0)
        assert all(l1[a].sigma == l2[a].sigma for a in sweep)


def test_sigma_label_validation():
    with pytest.raises(ValueError):
        SigmaLabel(alpha=1.0, sigma=1.5)
    with pytest.raises(ValueError):
        SigmaLabel(alpha=0.0, sigma=0.5)
