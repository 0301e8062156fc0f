import math

import numpy as np
import pytest

from mcflab.barriers import (CheckOutcome, FAIL, INCONCLUSIVE, PASS,
                             PancakeConstants, avoidance_check,
                             c0_estimate_check, continuity_check,
                             gradient_envelope, pancake_margin,
                             pancake_radius, sphere_window, squeeze_check)
from mcflab.grids import Field, Grid1D, INTERVAL, sample, slab_grid
from mcflab.solver import (BoundaryPolicy, FlowState, SolverConfig,
                           TranslatingDirichlet, cfl_dt, evolve, exact_policy,
                           translating_policy)
from mcflab.translators import (GRIM_1D, TILTED_PLANE, TranslatorProfile,
                                grim_reaper, sample_profile)

GRIM = TranslatorProfile(kind=GRIM_1D)

# frozen 40-digit mpmath evaluations of the closed forms
R_SPOT = 11.503234792687252    # R(n=2, lam=0.5, T=1; T0=1, C=0)
Q_SPOT = 4.3622282537424448    # Q(n=2, lam=0.5, T=1)


def grim_run(lo=-1.45, hi=1.45, n=580, t_end=0.05, bump=None, stride=None):
    def u0(x):
        base = grim_reaper(x)[0]
        return base + bump(x) if bump else base

    f = sample(Grid1D(lo, hi, n), u0)
    pol = translating_policy(f)
    stride = stride or max(1, int(t_end / cfl_dt(f) / 20))
    return evolve(FlowState(0.0, f, pol),
                  SolverConfig(t_end=t_end, snapshot_stride=stride))


class TestPancakeFormulas:
    def test_log_term_vanishes_for_n1(self):
        pc = PancakeConstants(T0=2.0, C=1.5)
        for lam, T in [(0.3, 0.0), (0.5, 2.0), (0.7, 11.0)]:
            expected = (math.pi * (2 * T + pc.T0) / (2 * lam)
                        + 2 * lam * pc.C / math.pi + 1.0)
            assert pancake_radius(1, lam, T, pc) == pytest.approx(
                expected, rel=1e-15)

    def test_spot_values_to_twelve_digits(self):
        assert pancake_radius(2, 0.5, 1.0, PancakeConstants(1.0, 0.0)) == \
            pytest.approx(R_SPOT, rel=1e-13)
        assert pancake_margin(2, 0.5, 1.0) == pytest.approx(Q_SPOT, rel=1e-13)

    def test_radius_increasing_in_T(self):
        pc = PancakeConstants()
        vals = [pancake_radius(2, 0.5, T, pc) for T in (0.0, 0.5, 1.0, 4.0)]
        assert np.all(np.diff(vals) > 0)

    def test_margin_at_zero_time(self):
        assert pancake_margin(1, 0.37, 0.0) == 1.0
        lam = 0.4
        for n in (2, 3, 5):
            assert pancake_margin(n, lam, 0.0) == pytest.approx(
                2 * (n - 1) * lam / math.pi * math.log(2) + 1.0, rel=1e-15)

    def test_guards(self):
        with pytest.raises(ValueError):
            pancake_radius(2, -0.1, 1.0)
        with pytest.raises(ValueError):
            pancake_margin(2, 0.0, 1.0)
        with pytest.raises(ValueError):
            pancake_radius(2, 0.5, -1.0)
        with pytest.raises(ValueError):
            PancakeConstants(T0=0.0)


class TestC0Estimate:
    def test_exact_translation_passes_with_slack(self):
        traj = grim_run()
        out = c0_estimate_check(traj, r=1.0, lam=0.15,
                                pc=PancakeConstants(), b=math.pi / 2)
        assert out.status == PASS
        # sup grows linearly at unit speed while Q grows like pi T / (2 lam)
        assert out.value >= pancake_margin(1, 0.15, 0.05) - 0.05 - 1e-6

    def test_inconclusive_when_margin_exceeds_grid(self):
        traj = grim_run()
        out = c0_estimate_check(traj, r=1.0, lam=0.01,
                                pc=PancakeConstants(), b=math.pi / 2)
        assert out.status == INCONCLUSIVE

    def test_violating_trajectory_fails(self):
        traj = grim_run()
        bad_field = traj.final.field.with_values(
            traj.final.field.values + 100.0)
        traj.snapshots[-1] = FlowState(traj.final.t, bad_field,
                                       traj.final.policy)
        out = c0_estimate_check(traj, r=1.0, lam=0.15,
                                pc=PancakeConstants(), b=math.pi / 2)
        assert out.status == FAIL and out.value < 0


class TestSphereContinuity:
    def test_window_formula(self):
        assert sphere_window(0.2, 0.1, 1) == pytest.approx(0.0025, rel=1e-15)
        assert sphere_window(0.2, 0.05, 1) == pytest.approx(
            0.0025 / 4, rel=1e-15)
        assert sphere_window(0.2, 0.1, 2) == pytest.approx(0.00125, rel=1e-15)

    def test_translator_run_passes(self):
        traj = grim_run(t_end=0.01, stride=20)
        f0 = traj.snapshots[0].field
        delta = 10 * f0.grid.h
        mask = np.abs(f0.grid.nodes()) <= delta
        osc = f0.values[mask].max() - f0.values[mask].min()
        eps = max(osc, delta) * 1.5
        out = continuity_check(traj, 0.0, eps, delta)
        assert out.status == PASS

    def test_precondition_violation_is_inconclusive(self):
        traj = grim_run(t_end=0.01, stride=20)
        out = continuity_check(traj, 0.0, eps=0.001, delta=0.1)
        assert out.status == INCONCLUSIVE


class TestSqueeze:
    def test_started_on_translator(self):
        traj = grim_run(t_end=0.05)
        h = traj.snapshots[0].field.grid.h
        rep = squeeze_check(traj, GRIM, C0=0.0)
        assert rep.max_violation <= 10 * h * h

    def test_upper_barrier_equality_case(self):
        C0 = 0.25
        traj = grim_run(bump=lambda x: C0 + 0 * x, t_end=0.05)
        rep = squeeze_check(traj, GRIM, C0=C0)
        h = traj.snapshots[0].field.grid.h
        assert np.max(rep.upper) <= 10 * h * h
        # the run rides the upper barrier itself
        fin = traj.final
        ubar = grim_reaper(fin.field.grid.nodes())[0]
        assert np.max(np.abs(fin.field.values - (ubar + fin.t + C0))) \
            <= 10 * h * h

    def test_bump_inside_budget_passes(self):
        C0 = 0.2
        bump = lambda x: C0 * np.cos(np.clip(x / 0.6, -0.5, 0.5) * np.pi) ** 2 \
            * (np.abs(x) <= 0.3)
        traj = grim_run(bump=bump, t_end=0.05)
        h = traj.snapshots[0].field.grid.h
        rep = squeeze_check(traj, GRIM, C0=C0)
        assert rep.max_violation <= 10 * h * h


class TestAvoidance:
    def test_identical_trajectories(self):
        a = grim_run(t_end=0.02)
        b = grim_run(t_end=0.02)
        assert avoidance_check(a, b) is True

    def test_constant_offset_rides_along(self):
        a = grim_run(t_end=0.02)
        b = grim_run(bump=lambda x: 1.0 + 0 * x, t_end=0.02)
        assert avoidance_check(a, b) is True

    def test_mismatched_grids_rejected(self):
        a = grim_run(t_end=0.02, n=580)
        b = grim_run(t_end=0.02, n=290)
        with pytest.raises(ValueError):
            avoidance_check(a, b)


class TestGradientEnvelope:
    @staticmethod
    def affine_run(slope, t_end):
        f = sample(Grid1D(-1.0, 1.0, 200), lambda x: slope * x)
        pol = BoundaryPolicy({
            "lo": TranslatingDirichlet(np.array([f.values[0]]), speed=0.0),
            "hi": TranslatingDirichlet(np.array([f.values[-1]]), speed=0.0)})
        stride = max(1, int(t_end / cfl_dt(f) / 10))
        return evolve(FlowState(0.0, f, pol),
                      SolverConfig(t_end=t_end, snapshot_stride=stride))

    def test_shallow_affine_implies_zero(self):
        traj = self.affine_run(0.7, 0.03)
        out = gradient_envelope(traj, mu=0.5)
        assert out.status == PASS and out.value == 0.0

    def test_steep_affine_implied_constant(self):
        traj = self.affine_run(3.0, 0.03)
        out = gradient_envelope(traj, mu=0.5)
        expected = math.log(3.0) / (1 + 1.5 / 0.5) ** 2
        assert out.value == pytest.approx(expected, rel=0.05)

    def test_stable_under_refinement(self):
        vals = []
        for n in (200, 400):
            f = sample(Grid1D(-1.0, 1.0, n),
                       lambda x: grim_reaper(x)[0] + 2.5 * x)
            traj = evolve(FlowState(0.0, f, translating_policy(f)),
                          SolverConfig(t_end=0.03, snapshot_stride=50))
            vals.append(gradient_envelope(traj, mu=0.5).value)
        assert vals[0] == pytest.approx(vals[1], rel=0.2)

    def test_uncovered_time_is_inconclusive(self):
        traj = self.affine_run(0.7, 0.001)
        out = gradient_envelope(traj, mu=1.0)
        assert out.status == INCONCLUSIVE
