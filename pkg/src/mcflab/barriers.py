"""Quantitative barrier calculus and trajectory-level comparison checks.

The pancake radius and margin are the closed forms that control the C0
estimate of slab flows:

  R(n, lam, T) = pi (2T + T0) / (2 lam)
                 + (2(n-1) lam / pi) ln( pi^2 (2T + T0) / (4 lam^2) )
                 + 2 lam C / pi + 1
  Q(n, lam, T) = pi T / (2 lam) + (2(n-1) lam / pi) ln 2 + 1

T0(n) and C(n) are only known to exist, so they are caller-supplied model
constants; every check that uses them reports parameter sensitivity rather
than absolute truth.  Checks distinguish pass / fail / inconclusive: a
truncated grid that cannot evaluate a right-hand side yields "inconclusive",
never a silent pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import Field, INTERVAL, RADIAL, SLAB2D, d1, linterp
from .solver import Trajectory
from .translators import TranslatorProfile, profile_values

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class PancakeConstants:
    """Model constants of the pancake radius asymptotics (defaults T0=1, C=0)."""
    T0: float = 1.0
    C: float = 0.0

    def __post_init__(self):
        if not self.T0 > 0:
            raise ValueError("T0 must be positive")


@dataclass
class CheckOutcome:
    status: str          # pass / fail / inconclusive
    value: float | None  # slack, violation magnitude or implied constant
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS


def pancake_radius(n: int, lam: float, T: float,
                   pc: PancakeConstants = PancakeConstants()) -> float:
    """Radius R(n, lam, T); the log term vanishes identically for n = 1."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if T < 0:
        raise ValueError("T must be nonnegative")
    arg = math.pi ** 2 * (2 * T + pc.T0) / (4 * lam ** 2)
    if arg <= 0:
        raise ValueError("log argument must be positive")
    return (math.pi * (2 * T + pc.T0) / (2 * lam)
            + (2 * (n - 1) * lam / math.pi) * math.log(arg)
            + 2 * lam * pc.C / math.pi + 1.0)


def pancake_margin(n: int, lam: float, T: float) -> float:
    """Additive height margin Q(n, lam, T)."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if T < 0:
        raise ValueError("T must be nonnegative")
    return math.pi * T / (2 * lam) + (2 * (n - 1) * lam / math.pi) * math.log(2) + 1.0


def _sup_abs_on_region(f: Field, x1_lim: float | None, x2_lo: float,
                       x2_hi: float) -> float | None:
    """sup |u| over K restricted to grid nodes; None if K exceeds the grid."""
    if f.geometry == SLAB2D:
        g1, g2 = f.grid.x1, f.grid.x2
        if x1_lim is None:
            x1_lim = g1.hi
        if -x1_lim < g1.lo - 1e-12 or x2_lo < g2.lo - 1e-12 \
                or x2_hi > g2.hi + 1e-12:
            return None
        m1 = np.abs(g1.nodes()) <= x1_lim + 1e-12
        m2 = (g2.nodes() >= x2_lo - 1e-12) & (g2.nodes() <= x2_hi + 1e-12)
        return float(np.max(np.abs(f.values[np.ix_(m1, m2)])))
    g = f.grid
    if x2_lo < g.lo - 1e-12 or x2_hi > g.hi + 1e-12:
        return None
    m = (g.nodes() >= x2_lo - 1e-12) & (g.nodes() <= x2_hi + 1e-12)
    return float(np.max(np.abs(f.values[m])))


def c0_estimate_check(traj: Trajectory, r: float, lam: float,
                      pc: PancakeConstants, b: float) -> CheckOutcome:
    """sup |u| on K_{r,2lam} x [0,T] against sup |u0| on K_{r+R,lam} + Q.

    K_{r,lam} is the centered box of x1 half-extent r (slab geometry only)
    and x2 range (-b+lam, b-lam).  Inconclusive when the truncated grid
    cannot evaluate the right-hand side region.
    """
    f0 = traj.snapshots[0].field
    if f0.geometry == RADIAL:
        return CheckOutcome(INCONCLUSIVE, None, "radial runs have no slab K")
    n = f0.n
    T = traj.times()[-1] - traj.times()[0]
    R = pancake_radius(n, lam, T, pc)
    Q = pancake_margin(n, lam, T)
    rhs_sup = _sup_abs_on_region(
        f0, (r + R) if f0.geometry == SLAB2D else None, -b + lam, b - lam)
    if rhs_sup is None:
        return CheckOutcome(
            INCONCLUSIVE, None,
            f"grid does not contain K_(r+R,lam) with R={R:.3g}")
    rhs = rhs_sup + Q
    lhs = -math.inf
    for s in traj.snapshots:
        v = _sup_abs_on_region(
            s.field, r if f0.geometry == SLAB2D else None,
            -b + 2 * lam, b - 2 * lam)
        if v is None:
            return CheckOutcome(INCONCLUSIVE, None,
                                "grid does not contain K_(r,2lam)")
        lhs = max(lhs, v)
    slack = rhs - lhs
    return CheckOutcome(PASS if slack >= 0 else FAIL, slack,
                        f"lhs={lhs:.6g} rhs={rhs:.6g}")


def sphere_window(eps: float, delta: float, n: int) -> float:
    """Barrier-sphere protection window delta^2 / (4n)."""
    if delta <= 0 or eps <= 0:
        raise ValueError("eps and delta must be positive")
    return delta * delta / (4.0 * n)


def _ball_mask(f: Field, x0, delta: float) -> np.ndarray:
    if f.geometry == SLAB2D:
        X1, X2 = f.grid.meshgrid()
        return (X1 - x0[0]) ** 2 + (X2 - x0[1]) ** 2 <= delta ** 2
    return np.abs(f.grid.nodes() - float(x0)) <= delta


def continuity_check(traj: Trajectory, x0, eps: float,
                     delta: float) -> CheckOutcome:
    """|u(x0, t) - u0(x0)| < 3 eps for 0 <= t - t0 <= delta^2/(4n).

    Preconditions (else inconclusive): delta < eps and the initial
    oscillation on the delta-ball around x0 is below eps.
    """
    f0 = traj.snapshots[0].field
    n = f0.n
    if delta >= eps:
        return CheckOutcome(INCONCLUSIVE, None, "needs delta < eps")
    mask = _ball_mask(f0, x0, delta)
    if not np.any(mask):
        return CheckOutcome(INCONCLUSIVE, None, "ball contains no grid node")
    osc = float(np.max(f0.values[mask]) - np.min(f0.values[mask]))
    if osc >= eps:
        return CheckOutcome(INCONCLUSIVE, None,
                            f"initial oscillation {osc:.3g} >= eps")
    window = sphere_window(eps, delta, n)
    t0 = traj.snapshots[0].t
    u0 = linterp(f0, x0)
    worst = 0.0
    seen = 0
    for s in traj.snapshots:
        if s.t - t0 > window:
            break
        seen += 1
        worst = max(worst, abs(linterp(s.field, x0) - u0))
    if seen <= 1:
        return CheckOutcome(INCONCLUSIVE, None,
                            "no snapshot inside the window")
    ok = worst < 3 * eps
    return CheckOutcome(PASS if ok else FAIL, worst,
                        f"max |u(x0,t)-u0(x0)| = {worst:.3g} vs 3eps = {3 * eps:.3g}")


@dataclass
class SqueezeReport:
    """Violations of the barrier squeeze ubar + speed*t - C0 <= u <= ubar +
    speed*t + C0, reported as nonnegative magnitudes per snapshot."""
    times: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    worst_time: float
    worst_location: tuple

    @property
    def max_violation(self) -> float:
        if len(self.lower) == 0:
            return 0.0
        return float(max(np.max(self.lower), np.max(self.upper)))


def squeeze_check(traj: Trajectory, profile: TranslatorProfile, C0: float,
                  speed: float = 1.0) -> SqueezeReport:
    f0 = traj.snapshots[0].field
    ubar = profile_values(profile, f0.grid, f0.geometry)
    times = traj.times()
    lower = np.zeros(len(times))
    upper = np.zeros(len(times))
    worst = (0.0, times[0], (0,))
    for k, s in enumerate(traj.snapshots):
        ref = ubar + speed * s.t
        low = ref - C0 - s.field.values   # > 0 where u dips below the barrier
        up = s.field.values - (ref + C0)
        lower[k] = max(0.0, float(np.max(low)))
        upper[k] = max(0.0, float(np.max(up)))
        m = max(lower[k], upper[k])
        if m > worst[0]:
            bad = low if lower[k] >= upper[k] else up
            idx = np.unravel_index(int(np.argmax(bad)), bad.shape)
            worst = (m, s.t, idx)
    return SqueezeReport(times, lower, upper, worst[1], worst[2])


def avoidance_check(traj_a: Trajectory, traj_b: Trajectory) -> bool:
    """True iff a <= b at every node of every snapshot (same grid and times)."""
    fa = traj_a.snapshots[0].field
    fb = traj_b.snapshots[0].field
    if fa.grid != fb.grid or fa.geometry != fb.geometry:
        raise ValueError("avoidance_check needs matching grids")
    ta, tb = traj_a.times(), traj_b.times()
    if len(ta) != len(tb) or not np.array_equal(ta, tb):
        raise ValueError("avoidance_check needs matching snapshot times")
    for sa, sb in zip(traj_a.snapshots, traj_b.snapshots):
        if np.any(sb.field.values < sa.field.values):
            return False
    return True


def gradient_envelope(traj: Trajectory, mu: float) -> CheckOutcome:
    """Implied constant of the interior gradient estimate.

    Evaluates |Du|(0, T*) at T* = mu^2 / (4n(1+2n)) and returns the smallest
    C >= 0 with |Du| <= exp(C (1 + sup_{B(0,mu)}|u0| / mu)^2), i.e.
    C = max(0, ln|Du| / (1 + |u0|/mu)^2) at the prescribed point and time
    (nearest recorded snapshot).
    """
    f0 = traj.snapshots[0].field
    n = f0.n
    t_star = traj.snapshots[0].t + mu ** 2 / (4 * n * (1 + 2 * n))
    center = (0.0, 0.0) if f0.geometry == SLAB2D else 0.0
    mask = _ball_mask(f0, center, mu)
    if f0.geometry == SLAB2D:
        g1, g2 = f0.grid.x1, f0.grid.x2
        covered = (g1.lo <= -mu and g1.hi >= mu and g2.lo <= -mu and g2.hi >= mu)
    elif f0.geometry == RADIAL:
        covered = f0.grid.hi >= mu
        mask = f0.grid.nodes() <= mu
    else:
        covered = f0.grid.lo <= -mu and f0.grid.hi >= mu
    if not covered:
        return CheckOutcome(INCONCLUSIVE, None, "grid does not contain B(0, mu)")
    times = traj.times()
    if times[-1] < t_star:
        return CheckOutcome(INCONCLUSIVE, None,
                            f"trajectory ends before T* = {t_star:.3g}")
    k = int(np.argmin(np.abs(times - t_star)))
    f = traj.snapshots[k].field
    if f.geometry == SLAB2D:
        i = int(np.argmin(np.abs(f.grid.x1.nodes())))
        j = int(np.argmin(np.abs(f.grid.x2.nodes())))
        du = math.hypot(d1(f, 0).values[i, j], d1(f, 1).values[i, j])
    else:
        i = int(np.argmin(np.abs(f.grid.nodes())))
        du = abs(d1(f).values[i])
    u0_norm = float(np.max(np.abs(f0.values[mask])))
    denom = (1.0 + u0_norm / mu) ** 2
    implied = max(0.0, math.log(du) / denom) if du > 0 else 0.0
    return CheckOutcome(PASS, implied,
                        f"|Du|(0, t={times[k]:.4g}) = {du:.4g}")
