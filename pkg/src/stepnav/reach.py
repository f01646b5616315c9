"""Controllable regions by backward reachability on a quantized phase plane.

A region map answers: from which (x, xdot) cells can some admissible
pendulum slope drive the state into a target set in finite time, despite a
bounded disturbance entering the dynamics?  The synthesis is a least
fixpoint of

    W <- target  |  { cell : exists omega, image(cell) + slack inside W }

where image() is the exact interval image of the closed-form flow over one
tick (the flow matrix has nonnegative entries for t > 0, so corner images
bound the box exactly).  The slack is the worst within-tick deviation a
disturbance inside the vector field can cause; for a bound (bx, bv) on the
position/velocity rows it integrates to

    slack_x = bv sinh(w dt)/w + bx (cosh(w dt) - 1)
    slack_v = bx w sinh(w dt) + bv (cosh(w dt) - 1)

Rounding the inflated image outward to cells makes the winning set an
under-approximation and the stored per-cell controls sound: any disturbance
within the bound keeps the closed loop inside the region until the target
is reached.

Composition splits one walking step at the stance switch: the second-half
region is grown from the next-apex target, the switch target is its
intersection with the band of nominal orbits over the current foot, and the
first-half region is grown from that switch target.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyRegion, GridMismatch, InfeasibleRecovery
from .rom import PipmParams

DEFAULT_OMEGA_RANGE = (2.8, 3.5)
DEFAULT_OMEGA_STEP = 0.02
DEFAULT_DT = 0.025
ROLLOUT_TIMEOUT = 5.0              # simulated seconds before a trial fails
TARGET_HALF_WIDTH = 0.02           # half x-extent of the next-apex target box, m

# Instantaneous mid-step state jump applied in perturbation trials.  Bounds
# sized so the synthesized regions absorb most jumps; larger values eject
# nearly every state at this grid granularity.
DEFAULT_EXECUTION_DISTURBANCE = (0.02, 0.10)


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    xdot_min: float
    xdot_max: float
    dx: float
    dxdot: float
    dt: float = DEFAULT_DT

    def __post_init__(self):
        if self.dx <= 0 or self.dxdot <= 0 or self.dt <= 0:
            raise ValueError("granularities and dt must be positive")
        if self.x_max <= self.x_min or self.xdot_max <= self.xdot_min:
            raise ValueError("degenerate grid ranges")

    @property
    def n_x(self) -> int:
        return int(math.ceil((self.x_max - self.x_min) / self.dx))

    @property
    def n_xdot(self) -> int:
        return int(math.ceil((self.xdot_max - self.xdot_min) / self.dxdot))

    def cell_of(self, x: float, xdot: float) -> tuple[int, int] | None:
        i = int(math.floor((x - self.x_min) / self.dx))
        j = int(math.floor((xdot - self.xdot_min) / self.dxdot))
        if 0 <= i < self.n_x and 0 <= j < self.n_xdot:
            return i, j
        return None

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.x_min + (np.arange(self.n_x) + 0.5) * self.dx
        vs = self.xdot_min + (np.arange(self.n_xdot) + 0.5) * self.dxdot
        return xs, vs

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min, "x_max": self.x_max,
            "xdot_min": self.xdot_min, "xdot_max": self.xdot_max,
            "dx": self.dx, "dxdot": self.dxdot, "dt": self.dt,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(**d)


@dataclass(frozen=True)
class DisturbanceBound:
    pos_bound: float
    vel_bound: float
    kind: str = "synthesis"

    def __post_init__(self):
        if self.pos_bound < 0 or self.vel_bound < 0:
            raise ValueError("disturbance bounds must be nonnegative")
        if self.kind not in ("synthesis", "execution"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")


@dataclass
class RegionMap:
    grid: GridSpec
    foot: float
    kind: str                         # "FHWS" or "SHWS"
    winning: np.ndarray               # bool (n_x, n_xdot)
    control: np.ndarray               # float, NaN where not winning
    target: np.ndarray                # bool
    layer: np.ndarray = field(default=None)   # int, fixpoint iteration added
    hold: np.ndarray = field(default=None)    # int, control hold time in ticks

    def lookup(self, x: float, xdot: float):
        """(omega, hold ticks) of the containing cell; None outside."""
        cell = self.grid.cell_of(x, xdot)
        if cell is None or not self.winning[cell]:
            return None
        ticks = 1 if self.hold is None else max(1, int(self.hold[cell]))
        return float(self.control[cell]), ticks

    def in_target(self, x: float, xdot: float) -> bool:
        cell = self.grid.cell_of(x, xdot)
        return cell is not None and bool(self.target[cell])


def lookup_control(region: RegionMap, state) -> float | None:
    """Per-cell slope command; None outside the winning region."""
    out = region.lookup(state.x, state.xdot)
    return None if out is None else out[0]


def default_omega_set(lo: float = DEFAULT_OMEGA_RANGE[0],
                      hi: float = DEFAULT_OMEGA_RANGE[1],
                      step: float = DEFAULT_OMEGA_STEP) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def _flow_matrix(omega: float, dt: float) -> tuple[float, float, float, float]:
    c, s = math.cosh(omega * dt), math.sinh(omega * dt)
    return c, s / omega, omega * s, c


def disturbance_slack(omega: float, dt: float, dist: DisturbanceBound
                      ) -> tuple[float, float]:
    """Worst within-tick state deviation from a vector-field disturbance."""
    c, s = math.cosh(omega * dt), math.sinh(omega * dt)
    slack_x = dist.vel_bound * s / omega + dist.pos_bound * (c - 1.0)
    slack_v = dist.pos_bound * omega * s + dist.vel_bound * (c - 1.0)
    return slack_x, slack_v


def synth_region(target: np.ndarray, foot: float, omega_set, grid: GridSpec,
                 dist: DisturbanceBound, kind: str = "SHWS",
                 require_growth: bool = True,
                 tau_ticks: tuple[int, ...] = (1, 2, 3, 4, 5)) -> RegionMap:
    """Least-fixpoint winning set and per-cell controls for one half step.

    A cell is winning when some pair (omega, hold time) maps it robustly
    into the winning set.  Hold times are multiples of the grid tick; the
    menu of longer holds lets cells far from the target commit in a few
    certified hops instead of ratcheting through dozens of one-tick layers.

    The containment test slices the image per grid column: for fixed
    (omega, tau) the flow is linear, so the exact velocity interval the
    cell can reach within one column is affine in the column position.
    Testing each covered column against its own interval (inflated by the
    disturbance slack) instead of one bounding rectangle keeps steep
    funnel edges from eroding.
    """
    target = np.asarray(target, dtype=bool)
    if target.shape != (grid.n_x, grid.n_xdot):
        raise ValueError("target mask shape does not match grid")
    if not target.any():
        raise ValueError("target set is empty")
    omega_set = np.asarray(omega_set, dtype=float)

    n_x, n_v = grid.n_x, grid.n_xdot
    xs_lo = (grid.x_min + grid.dx * np.arange(n_x))[:, None]
    xs_hi = xs_lo + grid.dx
    vs_lo = (grid.xdot_min + grid.dxdot * np.arange(n_v))[None, :]
    vs_hi = vs_lo + grid.dxdot

    pad = 1e-12  # outward float guard
    # precompute, per (tau, omega) move and per covered column offset k:
    # the column index and the inclusive row-span the image occupies there
    moves = []
    for ticks in tau_ticks:
        tau = ticks * grid.dt
        for om in omega_set:
            a11, a12, a21, a22 = _flow_matrix(float(om), tau)
            slack_x, slack_v = disturbance_slack(float(om), tau, dist)
            # undisturbed image x-range (corner-monotone), then smear by slack
            ix_lo = a11 * (xs_lo - foot) + a12 * vs_lo + foot
            ix_hi = a11 * (xs_hi - foot) + a12 * vs_hi + foot
            ilo = np.floor((ix_lo - slack_x - pad - grid.x_min) / grid.dx)
            ihi = np.floor((ix_hi + slack_x + pad - grid.x_min) / grid.dx)
            valid = (ilo >= 0) & (ihi < n_x)
            ilo_c = np.clip(ilo, 0, n_x - 1).astype(np.int16)
            ihi_c = np.clip(ihi, 0, n_x - 1).astype(np.int16)
            kmax = int((ihi_c - ilo_c).max()) + 1
            # per final column: source x-slice, image v-interval there
            c1 = a21 / a11            # dv'/dx' along the image
            inv = 1.0 / a11
            cols, spans = [], []
            for k in range(kmax):
                icol = np.minimum(ilo_c + k, ihi_c)
                col_lo = grid.x_min + icol.astype(np.float64) * grid.dx
                col_hi = col_lo + grid.dx
                xl = np.maximum(col_lo - slack_x, ix_lo)
                xr = np.minimum(col_hi + slack_x, ix_hi)
                v_lo = c1 * (xl - foot) + vs_lo * inv - slack_v - pad
                v_hi = c1 * (xr - foot) + vs_hi * inv + slack_v + pad
                jlo = np.floor((v_lo - grid.xdot_min) / grid.dxdot)
                jhi = np.floor((v_hi - grid.xdot_min) / grid.dxdot)
                valid &= (jlo >= 0) & (jhi < n_v)
                cols.append(icol)
                spans.append((np.clip(jlo, 0, n_v - 1).astype(np.int16),
                              np.clip(jhi, 0, n_v - 1).astype(np.int16)))
            moves.append((ticks, float(om), valid, cols, spans))

    winning = target.copy()
    control = np.full((n_x, n_v), np.nan)
    hold = np.zeros((n_x, n_v), dtype=np.int32)
    layer = np.full((n_x, n_v), -1, dtype=np.int32)
    layer[target] = 0

    sweep = 0
    while True:
        sweep += 1
        colcum = np.zeros((n_x, n_v + 1), dtype=np.int32)
        np.cumsum(winning, axis=1, out=colcum[:, 1:])
        added_any = False
        claimed = winning.copy()
        for ticks, om, valid, cols, spans in moves:
            allwin = valid
            for icol, (jlo, jhi) in zip(cols, spans):
                got = colcum[icol, jhi + 1] - colcum[icol, jlo]
                allwin = allwin & (got == (jhi - jlo + 1))
                if not allwin.any():
                    break
            newly = allwin & ~claimed
            if newly.any():
                added_any = True
                claimed |= newly
                control[newly] = om
                hold[newly] = ticks
                layer[newly] = sweep
        if not added_any:
            break
        winning = claimed

    if require_growth and not (winning & ~target).any():
        raise EmptyRegion(
            "winning set did not grow beyond the target; target unreachable "
            "from any non-target cell"
        )
    return RegionMap(grid=grid, foot=foot, kind=kind, winning=winning,
                     control=control, target=target, layer=layer, hold=hold)


def tangent_band_mask(grid: GridSpec, foot: float, v_apex_min: float,
                      v_apex_max: float, omega: float) -> np.ndarray:
    """Cells intersecting the band of nominal apex orbits over a foot.

    Outer quantization: a cell belongs to the band when the range of the
    orbit invariant v^2 - omega^2 (x - foot)^2 over the cell box meets
    [v_apex_min^2, v_apex_max^2], so a collapsed band (v_min == v_max)
    still picks up the cells straddling that single orbit.
    """
    xs_lo = (grid.x_min + grid.dx * np.arange(grid.n_x))[:, None]
    xs_hi = xs_lo + grid.dx
    vs_lo = (grid.xdot_min + grid.dxdot * np.arange(grid.n_xdot))[None, :]
    vs_hi = vs_lo + grid.dxdot
    off_lo, off_hi = xs_lo - foot, xs_hi - foot
    straddles = (off_lo <= 0) & (off_hi >= 0)
    near2 = np.where(straddles, 0.0, np.minimum(off_lo**2, off_hi**2))
    far2 = np.maximum(off_lo**2, off_hi**2)
    q_max = vs_hi**2 - omega**2 * near2
    q_min = np.where(vs_lo > 0, vs_lo, 0.0) ** 2 - omega**2 * far2
    return ((q_max >= v_apex_min**2) & (q_min <= v_apex_max**2)
            & (vs_hi > 0))


def target_box_mask(grid: GridSpec, x_center: float, v_lo: float, v_hi: float,
                    half_width: float = TARGET_HALF_WIDTH) -> np.ndarray:
    xs, vs = grid.centers()
    return ((np.abs(xs[:, None] - x_center) <= half_width)
            & (vs[None, :] >= v_lo) & (vs[None, :] <= v_hi))


@dataclass(frozen=True)
class CompositionResult:
    t_switch_cells: np.ndarray
    nonempty: bool


def compose_ows(c_fhws: RegionMap, c_shws: RegionMap,
                manifold_band: np.ndarray) -> CompositionResult:
    """Intersect the half-step regions inside the nominal orbit band."""
    if c_fhws.grid != c_shws.grid:
        raise GridMismatch("half-step regions use different grids")
    cells = c_fhws.winning & c_shws.winning & manifold_band
    return CompositionResult(t_switch_cells=cells, nonempty=bool(cells.any()))


@dataclass
class OwsRegions:
    """Both half-step regions of one step plus the switch target."""

    c_fhws: RegionMap
    c_shws: RegionMap
    t_switch: np.ndarray
    band: np.ndarray
    d: float
    v_margin: tuple[float, float]


def synth_ows(d: float, v_margin: tuple[float, float], grid: GridSpec,
              dist: DisturbanceBound, v_apex_range: tuple[float, float],
              omega_nominal: float, omega_set=None,
              target_half_width: float = TARGET_HALF_WIDTH) -> OwsRegions:
    """Synthesize the composed pair of regions for one step of length d.

    The second-half region grows from the next-apex box over the next foot;
    the first-half region grows from the whole second-half region (every
    one of its cells is a certified switch state), and the switch target
    reported for composition is the part inside the nominal orbit band.
    """
    if omega_set is None:
        omega_set = default_omega_set()
    t_ows = target_box_mask(grid, d, v_margin[0], v_margin[1], target_half_width)
    c_shws = synth_region(t_ows, foot=d, omega_set=omega_set, grid=grid,
                          dist=dist, kind="SHWS")
    band = tangent_band_mask(grid, 0.0, v_apex_range[0], v_apex_range[1],
                             omega_nominal)
    t_switch = c_shws.winning & band
    if not t_switch.any():
        raise EmptyRegion("second-half region misses the nominal orbit band")
    c_fhws = synth_region(c_shws.winning, foot=0.0, omega_set=omega_set,
                          grid=grid, dist=dist, kind="FHWS")
    return OwsRegions(c_fhws=c_fhws, c_shws=c_shws, t_switch=t_switch,
                      band=band, d=d, v_margin=v_margin)


def _flow_once(x: float, v: float, foot: float, omega: float, dt: float
               ) -> tuple[float, float]:
    a11, a12, a21, a22 = _flow_matrix(omega, dt)
    return (a11 * (x - foot) + a12 * v + foot, a21 * (x - foot) + a22 * v)


def rollout_ows(regions: OwsRegions, x0: float, v0: float,
                jump: tuple[int, float, float] | None = None,
                noise_fn=None, fallback_omega: float | None = None) -> dict:
    """Closed-loop rollout of one step under the synthesized controls.

    Integrates tick by tick, holding each commanded slope for its certified
    duration; the stance switches as soon as the state enters a cell of the
    second-half region.  jump = (tick index, dx, dv) injects one
    instantaneous state jump (the controller re-decides at the next tick);
    noise_fn(tick, omega, dt) -> (dx, dv) applies per-tick disturbance for
    adversarial soundness tests.  Returns success flag, trajectory, and
    switch bookkeeping.
    """
    grid = regions.c_fhws.grid
    dt = grid.dt
    if fallback_omega is None:
        fallback_omega = 0.5 * (DEFAULT_OMEGA_RANGE[0] + DEFAULT_OMEGA_RANGE[1])
    x, v = x0, v0
    phase = "FHWS"
    foot = 0.0
    traj = [(x, v)]
    n_max = int(ROLLOUT_TIMEOUT / dt)
    switched_at = None
    left_region = False
    hold_omega, hold_left = None, 0
    for tick in range(n_max):
        cell = grid.cell_of(x, v)
        if phase == "FHWS" and cell is not None and regions.c_shws.winning[cell]:
            phase = "SHWS"
            foot = regions.d
            switched_at = tick
            hold_left = 0
        if phase == "SHWS" and cell is not None and regions.c_shws.target[cell]:
            return {"success": True, "traj": traj, "switched_at": switched_at,
                    "ticks": tick, "left_region": left_region}
        if hold_left <= 0:
            region = regions.c_fhws if phase == "FHWS" else regions.c_shws
            out = region.lookup(x, v)
            if out is None:
                left_region = True
                hold_omega, hold_left = fallback_omega, 1
            else:
                hold_omega, hold_left = out
        x, v = _flow_once(x, v, foot, hold_omega, dt)
        hold_left -= 1
        if jump is not None and tick == jump[0]:
            x, v = x + jump[1], v + jump[2]
            hold_left = 0  # a detected jump forces an immediate re-decision
        if noise_fn is not None:
            nx, nv = noise_fn(tick, hold_omega, dt)
            x, v = x + nx, v + nv
        traj.append((x, v))
    return {"success": False, "traj": traj, "switched_at": switched_at,
            "ticks": n_max, "left_region": left_region}


def initial_cell_box(grid: GridSpec, v_nominal: float, cells: int = 3
                     ) -> tuple[float, float, float, float]:
    """Default initial-state set: +/- a few cells around the nominal apex."""
    return (-cells * grid.dx, cells * grid.dx,
            v_nominal - cells * grid.dxdot, v_nominal + cells * grid.dxdot)


def run_perturbed_trials(regions_by_case: dict, n_trials: int,
                         exec_dist: DisturbanceBound, seed: int,
                         v_nominal: dict | None = None) -> dict:
    """Monte Carlo success rates of disturbed one-step transitions.

    regions_by_case maps (d, v_margin) -> OwsRegions.  Each trial samples an
    initial state near the nominal apex, injects one uniform execution
    disturbance at a random tick, and runs the stored controls closed loop.
    Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    rates = {}
    for case, regions in regions_by_case.items():
        d, margin = case
        grid = regions.c_fhws.grid
        v_nom = (v_nominal or {}).get(case, 0.5 * (margin[0] + margin[1]))
        x_lo, x_hi, v_lo, v_hi = initial_cell_box(grid, v_nom)
        # estimate nominal duration to place the jump inside the step
        est_ticks = max(1, int(0.8 * (d / max(v_nom, 1e-6)) / grid.dt))
        successes = 0
        for _ in range(n_trials):
            x0 = rng.uniform(x_lo, x_hi)
            v0 = rng.uniform(v_lo, v_hi)
            if exec_dist.pos_bound == 0 and exec_dist.vel_bound == 0:
                jump = None
            else:
                jump = (int(rng.integers(0, est_ticks)),
                        rng.uniform(-exec_dist.pos_bound, exec_dist.pos_bound),
                        rng.uniform(-exec_dist.vel_bound, exec_dist.vel_bound))
            out = rollout_ows(regions, x0, v0, jump=jump)
            successes += bool(out["success"])
        rates[case] = successes / n_trials
    return rates


def capture_point_replan(x_switch: float, xdot_switch_dist: float,
                         v_apex_n: float, params: PipmParams) -> float:
    """Foot placement that decelerates a disturbed switch state to v_apex_n.

    Orbit-consistent form: the next apex sits over the new foot, so
    v_n^2 = xdot^2 - omega^2 (foot - x_switch)^2 pins the placement.
    """
    if xdot_switch_dist <= v_apex_n:
        raise InfeasibleRecovery(
            f"switch speed {xdot_switch_dist} cannot decelerate to apex "
            f"speed {v_apex_n} by stepping forward"
        )
    return x_switch + math.sqrt(xdot_switch_dist**2 - v_apex_n**2) / params.omega


# --- persistence -----------------------------------------------------------

def region_content_hash(d: float, v_margin, grid: GridSpec,
                        dist: DisturbanceBound, v_apex_range,
                        omega_nominal: float) -> str:
    payload = json.dumps({
        "d": d, "v_margin": list(v_margin), "grid": grid.to_dict(),
        "dist": [dist.pos_bound, dist.vel_bound], "v_range": list(v_apex_range),
        "omega": omega_nominal,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def save_ows_regions(regions: OwsRegions, path) -> None:
    np.savez_compressed(
        path,
        grid=json.dumps(regions.c_fhws.grid.to_dict()),
        d=regions.d, v_margin=np.asarray(regions.v_margin),
        fhws_winning=regions.c_fhws.winning, fhws_control=regions.c_fhws.control,
        fhws_target=regions.c_fhws.target, fhws_layer=regions.c_fhws.layer,
        fhws_hold=regions.c_fhws.hold,
        shws_winning=regions.c_shws.winning, shws_control=regions.c_shws.control,
        shws_target=regions.c_shws.target, shws_layer=regions.c_shws.layer,
        shws_hold=regions.c_shws.hold,
        shws_foot=regions.c_shws.foot,
        t_switch=regions.t_switch, band=regions.band,
    )


def load_ows_regions(path) -> OwsRegions:
    z = np.load(path, allow_pickle=False)
    grid = GridSpec.from_dict(json.loads(str(z["grid"])))
    d = float(z["d"])
    c_fhws = RegionMap(grid=grid, foot=0.0, kind="FHWS",
                       winning=z["fhws_winning"], control=z["fhws_control"],
                       target=z["fhws_target"], layer=z["fhws_layer"],
                       hold=z["fhws_hold"])
    c_shws = RegionMap(grid=grid, foot=float(z["shws_foot"]), kind="SHWS",
                       winning=z["shws_winning"], control=z["shws_control"],
                       target=z["shws_target"], layer=z["shws_layer"],
                       hold=z["shws_hold"])
    return OwsRegions(c_fhws=c_fhws, c_shws=c_shws, t_switch=z["t_switch"],
                      band=z["band"], d=d,
                      v_margin=tuple(float(x) for x in z["v_margin"]))


def region_occupancy_rows(region: RegionMap):
    """(x, xdot, winning, omega) rows for external plotting."""
    xs, vs = region.grid.centers()
    for i, x in enumerate(xs):
        for j, v in enumerate(vs):
            om = region.control[i, j]
            yield (float(x), float(v), int(region.winning[i, j]),
                   "" if math.isnan(om) else f"{om:.3f}")
