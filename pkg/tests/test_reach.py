import math

import numpy as np
import pytest

from stepnav.errors import EmptyRegion, GridMismatch, InfeasibleRecovery
from stepnav.reach import (
    CompositionResult,
    DisturbanceBound,
    GridSpec,
    RegionMap,
    _flow_matrix,
    capture_point_replan,
    compose_ows,
    default_omega_set,
    initial_cell_box,
    load_ows_regions,
    lookup_control,
    region_occupancy_rows,
    rollout_ows,
    run_perturbed_trials,
    save_ows_regions,
    synth_ows,
    synth_region,
    tangent_band_mask,
    target_box_mask,
)
from stepnav.rom import PipmParams, SagittalState, pipm_flow

OMEGA = 3.15
SYNTH_DIST = DisturbanceBound(0.01, 0.02, "synthesis")


def make_grid(d=0.416):
    return GridSpec(x_min=-0.12, x_max=d + 0.28, xdot_min=0.0, xdot_max=1.45,
                    dx=0.004, dxdot=0.008, dt=0.025)


@pytest.fixture(scope="module")
def ows_regions():
    grid = make_grid()
    return synth_ows(d=0.416, v_margin=(0.45, 0.7), grid=grid, dist=SYNTH_DIST,
                     v_apex_range=(0.2, 0.7), omega_nominal=OMEGA)


class TestGridSpec:
    def test_cell_roundtrip(self):
        g = make_grid()
        assert g.cell_of(0.0, 0.5) is not None
        assert g.cell_of(99.0, 0.5) is None
        xs, vs = g.centers()
        i, j = g.cell_of(xs[10], vs[7])
        assert (i, j) == (10, 7)

    def test_invalid(self):
        with pytest.raises(ValueError):
            GridSpec(x_min=0, x_max=0, xdot_min=0, xdot_max=1, dx=0.01, dxdot=0.01)
        with pytest.raises(ValueError):
            DisturbanceBound(-1, 0)


class TestSynthRegion:
    def test_equilibrium_cell_is_winning(self):
        # the foot-equilibrium cell is a fixed point: winning as part of the
        # target even though nothing can robustly commit into a lone cell
        g = GridSpec(x_min=-0.1, x_max=0.1, xdot_min=-0.1, xdot_max=0.1,
                     dx=0.004, dxdot=0.008, dt=0.025)
        target = np.zeros((g.n_x, g.n_xdot), dtype=bool)
        target[g.cell_of(0.0, 0.0)] = True
        r = synth_region(target, foot=0.0, omega_set=default_omega_set(),
                         grid=g, dist=SYNTH_DIST, require_growth=False)
        assert r.winning[g.cell_of(0.0, 0.0)]

    def test_isolated_target_raises(self):
        g = GridSpec(x_min=-0.1, x_max=0.1, xdot_min=-0.1, xdot_max=0.1,
                     dx=0.004, dxdot=0.008, dt=0.025)
        target = np.zeros((g.n_x, g.n_xdot), dtype=bool)
        target[g.cell_of(0.0, 0.0)] = True
        with pytest.raises(EmptyRegion):
            synth_region(target, foot=0.0, omega_set=default_omega_set(),
                         grid=g, dist=SYNTH_DIST)

    def test_backward_faller_not_winning(self, ows_regions):
        # below the apex-crossing orbit: the CoM falls back before reaching
        # the next stance, so neither half-step region may claim it
        g = ows_regions.c_fhws.grid
        cell = g.cell_of(-0.05, 0.05)
        assert not ows_regions.c_fhws.winning[cell]
        # over the next foot, a slow state short of the apex falls back too
        cell2 = g.cell_of(0.3, 0.05)
        assert not ows_regions.c_shws.winning[cell2]

    def test_every_target_cell_winning(self, ows_regions):
        for r in (ows_regions.c_fhws, ows_regions.c_shws):
            assert (r.winning | ~r.target).all()

    def test_monotone_in_disturbance(self):
        g = GridSpec(x_min=-0.05, x_max=0.55, xdot_min=0.0, xdot_max=1.2,
                     dx=0.008, dxdot=0.016, dt=0.025)
        target = target_box_mask(g, 0.416, 0.45, 0.7)
        big = synth_region(target, 0.416, default_omega_set(), g,
                           DisturbanceBound(0.01, 0.02))
        small = synth_region(target, 0.416, default_omega_set(), g,
                             DisturbanceBound(0.002, 0.004))
        assert (small.winning | ~big.winning).all()
        assert small.winning.sum() >= big.winning.sum()


class TestComposition:
    def test_nonempty_for_certified_keyframe(self, ows_regions):
        comp = compose_ows(ows_regions.c_fhws, ows_regions.c_shws,
                           ows_regions.band)
        assert isinstance(comp, CompositionResult)
        assert comp.nonempty

    def test_grid_mismatch(self, ows_regions):
        other = make_grid(0.52)
        bad = RegionMap(grid=other, foot=0.0, kind="FHWS",
                        winning=np.zeros((other.n_x, other.n_xdot), bool),
                        control=np.zeros((other.n_x, other.n_xdot)),
                        target=np.zeros((other.n_x, other.n_xdot), bool))
        with pytest.raises(GridMismatch):
            compose_ows(bad, ows_regions.c_shws, ows_regions.band)

    def test_violating_keyframe_empties_intersection_between_apexes(self):
        # v_n far above the straight-walking window: the second-half region
        # cannot reach down into the first-half orbit band between the apexes
        g = make_grid()
        d = 0.416
        v_n_hi = math.sqrt(0.45**2 + OMEGA**2 * d**2) + 0.2
        t = target_box_mask(g, d, v_n_hi, v_n_hi + 0.25)
        t &= tangent_band_mask(g, d, 0.0, 99.0, OMEGA)  # clip to grid sanity
        if not t.any():
            pytest.skip("target outside grid")
        cs = synth_region(t, foot=d, omega_set=default_omega_set(), grid=g,
                          dist=SYNTH_DIST, require_growth=False)
        band = tangent_band_mask(g, 0.0, 0.2, 0.7, OMEGA)
        xs, vs = g.centers()
        lens = cs.winning & band
        ii = np.where(lens.any(axis=1))[0]
        # any overlap sits beyond the next apex, not between the apexes
        assert not len(ii) or xs[ii].min() > d - 1e-9

    def test_degenerate_band_still_composes(self):
        g = make_grid()
        regs = synth_ows(d=0.416, v_margin=(0.45, 0.7), grid=g,
                         dist=SYNTH_DIST, v_apex_range=(0.5, 0.5 + 1e-9),
                         omega_nominal=OMEGA)
        comp = compose_ows(regs.c_fhws, regs.c_shws, regs.band)
        assert comp.nonempty


class TestLookup:
    def test_target_and_interior(self, ows_regions):
        r = ows_regions.c_shws
        g = r.grid
        xs, vs = g.centers()
        i, j = np.argwhere(r.winning & ~r.target)[0]
        out = lookup_control(r, SagittalState(xs[i], vs[j]))
        assert out is not None and 2.8 <= out <= 3.5

    def test_not_winning_is_none(self, ows_regions):
        assert lookup_control(ows_regions.c_fhws, SagittalState(-0.05, 0.02)) is None
        assert lookup_control(ows_regions.c_fhws, SagittalState(55.0, 0.5)) is None


class TestClosedLoop:
    def test_nominal_rollout_stays_inside(self, ows_regions):
        out = rollout_ows(ows_regions, 0.0, 0.575)
        assert out["success"]
        assert not out["left_region"]
        assert out["switched_at"] is not None

    def test_soundness_adversarial_noise(self, ows_regions):
        # corner-valued vector-field disturbance at the synthesis bound must
        # never defeat the stored controls: zero failures allowed
        rng = np.random.default_rng(11)
        g = ows_regions.c_fhws.grid
        xs, vs = g.centers()
        candidates = np.argwhere(ows_regions.c_fhws.winning)
        picks = candidates[rng.integers(0, len(candidates), size=300)]

        failures = 0
        for i, j in picks:
            def noise(tick, omega, dt, _rng=rng):
                xt = SYNTH_DIST.pos_bound * _rng.choice((-1.0, 1.0))
                vt = SYNTH_DIST.vel_bound * _rng.choice((-1.0, 1.0))
                a11, a12, a21, a22 = _flow_matrix(omega, dt)
                return ((a11 - 1) * xt + a12 * vt, a21 * xt + (a22 - 1) * vt)

            out = rollout_ows(ows_regions, float(xs[i]), float(vs[j]),
                              noise_fn=noise)
            failures += not out["success"]
        assert failures == 0

    def test_jump_inside_region_recovers(self, ows_regions):
        out = rollout_ows(ows_regions, 0.0, 0.575, jump=(6, 0.0, 0.08))
        assert out["success"]

    def test_huge_disturbance_mostly_fails(self, ows_regions):
        big = DisturbanceBound(1.0, 3.0, "execution")
        rates = run_perturbed_trials({(0.416, (0.45, 0.7)): ows_regions},
                                     200, big, seed=5)
        assert rates[(0.416, (0.45, 0.7))] < 0.5

    def test_trials_deterministic(self, ows_regions):
        dist = DisturbanceBound(0.02, 0.10, "execution")
        case = {(0.416, (0.45, 0.7)): ows_regions}
        a = run_perturbed_trials(case, 100, dist, seed=42)
        b = run_perturbed_trials(case, 100, dist, seed=42)
        assert a == b

    def test_zero_disturbance_perfect(self, ows_regions):
        rates = run_perturbed_trials({(0.416, (0.45, 0.7)): ows_regions}, 100,
                                     DisturbanceBound(0, 0, "execution"), seed=1)
        assert rates[(0.416, (0.45, 0.7))] == 1.0

    def test_nominal_certified_plan_inside_regions(self, ows_regions):
        # every tick of the nominal certified plan lies in the composed
        # regions: first half in C_FHWS until the switch set, then C_SHWS
        from stepnav.rom import KeyframeState, plan_sagittal_ows
        pipm = PipmParams.from_omega(OMEGA)
        plan = plan_sagittal_ows(
            SagittalState(0.0, 0.575),
            KeyframeState(d=0.416, delta_theta=0, delta_z_foot=0,
                          v_apex=0.575, z_apex=0.985), pipm)
        g = ows_regions.c_fhws.grid
        state = SagittalState(0.0, 0.575)
        t, switched = 0.0, False
        while t < plan.t_total - 1e-9:
            cell = g.cell_of(state.x, state.xdot)
            assert cell is not None
            if not switched and ows_regions.c_shws.winning[cell]:
                switched = True
            region = ows_regions.c_shws if switched else ows_regions.c_fhws
            assert region.winning[cell]
            foot = plan.foot_next[0] if switched else 0.0
            # follow the nominal orbit, not the stored controls
            state = pipm_flow(state, foot if switched else 0.0, pipm,
                              min(g.dt, plan.t_total - t))
            t += g.dt
        assert switched


class TestCapturePoint:
    def test_zero_disturbance_matches_nominal(self):
        pipm = PipmParams.from_omega(OMEGA)
        # nominal symmetric step: switch at d/2 with known speed
        d, v = 0.4, 0.5
        v_sw = math.sqrt(v**2 + OMEGA**2 * (d / 2) ** 2)
        foot = capture_point_replan(d / 2, v_sw, v, pipm)
        assert foot == pytest.approx(d, abs=1e-9)

    def test_spot_value_and_propagation(self):
        pipm = PipmParams.from_omega(OMEGA)
        foot = capture_point_replan(0.2, 1.0, 0.5, pipm)
        assert foot == pytest.approx(0.2 + math.sqrt(0.75) / OMEGA, abs=1e-12)
        # propagate to the apex over the new foot: speed must equal v_n
        from stepnav.rom import orbit_velocity
        v_at_apex = orbit_velocity(foot, 0.2, 1.0, foot, pipm)
        assert v_at_apex == pytest.approx(0.5, abs=1e-9)

    def test_infeasible(self):
        pipm = PipmParams.from_omega(OMEGA)
        with pytest.raises(InfeasibleRecovery):
            capture_point_replan(0.2, 0.4, 0.5, pipm)


class TestPersistence:
    def test_roundtrip(self, ows_regions, tmp_path):
        path = tmp_path / "regions.npz"
        save_ows_regions(ows_regions, path)
        loaded = load_ows_regions(path)
        assert np.array_equal(loaded.c_fhws.winning, ows_regions.c_fhws.winning)
        assert np.array_equal(loaded.c_shws.hold, ows_regions.c_shws.hold)
        assert loaded.d == ows_regions.d
        assert loaded.v_margin == ows_regions.v_margin
        assert loaded.c_fhws.grid == ows_regions.c_fhws.grid

    def test_occupancy_rows(self, ows_regions):
        rows = list(region_occupancy_rows(ows_regions.c_shws))
        g = ows_regions.c_shws.grid
        assert len(rows) == g.n_x * g.n_xdot
        n_win = sum(r[2] for r in rows)
        assert n_win == int(ows_regions.c_shws.winning.sum())


class TestInitialBox:
    def test_three_cells_each_way(self):
        g = make_grid()
        x_lo, x_hi, v_lo, v_hi = initial_cell_box(g, 0.5)
        assert x_hi - x_lo == pytest.approx(6 * g.dx)
        assert v_hi - v_lo == pytest.approx(6 * g.dxdot)
