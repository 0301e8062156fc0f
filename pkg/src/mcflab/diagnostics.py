"""Scalar and field diagnostics for flow trajectories.

Everything the stability audits turn on lives here: curvature quantities,
the total curvature I(t) = integral of |u_xx| / (1 + u_x^2) dx and its
monotonicity audit, the conserved shift integral
phi(t) = (1/pi) integral (u - t - ubar) dx, least-squares translation fits
(c0, c1), the splitting deviation |du/dx1 - tan theta|, the 1D Harnack
residual, the Gaussian weight functional F and its entropy supremum, bowl
asymptotics, and convexity margins.  All sup-norms and fits are evaluated on
a strictly interior FitWindow, mirroring locally-uniform convergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .barriers import CheckOutcome, FAIL, INCONCLUSIVE, PASS
from .grids import Field, Grid1D, INTERVAL, RADIAL, SLAB2D, d1, d2, hessian
from .solver import Trajectory
from .translators import (TranslatorProfile, profile_values, theta_for_width,
                          tilted_grim_reaper)


@dataclass
class DiagnosticsRecord:
    t: float
    sup_dist_to_translator: Optional[float] = None
    I_total_curvature: Optional[float] = None
    sup_abs_kappa: Optional[float] = None
    phi_mass: Optional[float] = None
    c0_fit: Optional[float] = None
    c1_fit: Optional[float] = None
    fit_residual: Optional[float] = None
    harnack_min_residual: Optional[float] = None
    entropy_estimate: Optional[float] = None
    convexity_margin: Optional[float] = None


@dataclass(frozen=True)
class FitWindow:
    """Strictly interior box on which fits and sup-distances are evaluated.

    lo/hi are coordinate tuples: (x,) for 1D and radial, (x1, x2) for slabs.
    Binding to a grid requires at least `margin` nodes between the window and
    every boundary; the radial origin is a symmetry axis, not a boundary.
    """
    lo: tuple
    hi: tuple
    margin: int = 5

    def mask(self, f: Field) -> np.ndarray:
        if f.geometry == SLAB2D:
            if len(self.lo) != 2:
                raise ValueError("slab windows need (x1, x2) bounds")
            n1 = f.grid.x1.nodes()
            n2 = f.grid.x2.nodes()
            m1 = (n1 >= self.lo[0]) & (n1 <= self.hi[0])
            m2 = (n2 >= self.lo[1]) & (n2 <= self.hi[1])
            self._check_margin(m1, exempt_lo=False)
            self._check_margin(m2, exempt_lo=False)
            return np.outer(m1, m2)
        x = f.grid.nodes()
        m = (x >= self.lo[0]) & (x <= self.hi[0])
        self._check_margin(m, exempt_lo=(f.geometry == RADIAL))
        return m

    def _check_margin(self, m: np.ndarray, exempt_lo: bool) -> None:
        idx = np.flatnonzero(m)
        if len(idx) == 0:
            raise ValueError("fit window contains no grid nodes")
        lo_ok = exempt_lo or idx[0] >= self.margin
        hi_ok = idx[-1] <= len(m) - 1 - self.margin
        if not (lo_ok and hi_ok):
            raise ValueError(
                f"fit window must stay >= {self.margin} nodes inside the grid")


# ---------------------------------------------------------------------------
# Curvature
# ---------------------------------------------------------------------------

def curvature_1d(f: Field) -> np.ndarray:
    """kappa = u_xx / (1 + u_x^2)^{3/2} at interior nodes (NaN at the ends)."""
    if f.geometry == SLAB2D:
        raise ValueError("curvature_1d needs a 1D field")
    ux = d1(f).values
    uxx = d2(f).values
    out = np.full_like(ux, np.nan)
    out[1:-1] = uxx[1:-1] / (1.0 + ux[1:-1] ** 2) ** 1.5
    return out


def surface_quantities(f: Field):
    """(H, v, |A|) of a slab graph at interior nodes (NaN on the boundary):
    v = sqrt(1 + |Du|^2), H = (Lap u - Du.D2u.Du / v^2) / v,
    |A| = |D2u| / v entrywise Frobenius norm."""
    if f.geometry != SLAB2D:
        raise ValueError("surface_quantities needs a slab2d field")
    ux, uy = d1(f, 0).values, d1(f, 1).values
    uxx, uxy, uyy = (g.values for g in hessian(f))
    v = np.sqrt(1.0 + ux ** 2 + uy ** 2)
    q = uxx + uyy - (ux * ux * uxx + 2 * ux * uy * uxy + uy * uy * uyy) / v ** 2
    H = q / v
    absA = np.sqrt(uxx ** 2 + 2 * uxy ** 2 + uyy ** 2) / v
    for a in (H, absA):
        a[0, :] = a[-1, :] = np.nan
        a[:, 0] = a[:, -1] = np.nan
    return H, v, absA


def total_curvature(f: Field) -> float:
    """I = integral |u_xx| / (1 + u_x^2) dx by trapezoid over the grid;
    equals the total turning angle of the graph."""
    if f.geometry != INTERVAL:
        raise ValueError("total_curvature is a planar-curve quantity")
    ux = d1(f).values
    uxx = d2(f).values
    integrand = np.abs(uxx) / (1.0 + ux ** 2)
    return float(np.trapezoid(integrand, dx=f.grid.h))


def monotonicity_audit(traj: Trajectory) -> float:
    """Worst single-step increase of I(t) over consecutive snapshots
    (0 for a single-snapshot trajectory)."""
    vals = [total_curvature(s.field) for s in traj.snapshots]
    if len(vals) < 2:
        return 0.0
    return float(np.max(np.diff(vals)))


# ---------------------------------------------------------------------------
# Conserved mass and translation fits
# ---------------------------------------------------------------------------

def phi_mass(f: Field, profile: TranslatorProfile, t: float) -> float:
    """(1/pi) integral (u - t - ubar) dx by trapezoid over the grid."""
    if f.geometry != INTERVAL:
        raise ValueError("phi_mass is defined for 1D grim reaper runs")
    ubar = profile_values(profile, f.grid, f.geometry)
    return float(np.trapezoid(f.values - t - ubar, dx=f.grid.h) / math.pi)


@dataclass
class FitResult:
    c0: float
    c1: float
    residual: float
    flagged: bool = False


def _shifted_profile_window(profile: TranslatorProfile, f: Field,
                            mask: np.ndarray, c1: float) -> np.ndarray:
    """ubar(x1 + c1, x2) on the window nodes."""
    if f.geometry != SLAB2D:
        if c1 != 0.0:
            raise ValueError("x1 shifts only make sense on slabs")
        return profile_values(profile, f.grid, f.geometry)[mask]
    i_idx = np.flatnonzero(mask.any(axis=1))
    j_idx = np.flatnonzero(mask.any(axis=0))
    x1 = f.grid.x1.nodes()[i_idx] + c1
    x2 = f.grid.x2.nodes()[j_idx]
    if profile.table is not None and profile.table.geometry == SLAB2D:
        tg = profile.table.grid
        tx1 = tg.x1.nodes()
        if x1[0] < tx1[0] or x1[-1] > tx1[-1]:
            raise ValueError("shifted window leaves the profile table")
        cols = np.empty((len(x1), len(x2)))
        for jj, x2v in enumerate(x2):
            tj = int(round((x2v - tg.x2.lo) / tg.x2.h))
            if abs(tg.x2.node(tj) - x2v) > 1e-9 * max(1.0, abs(x2v)):
                raise ValueError("window x2 nodes must lie on the table grid")
            cols[:, jj] = np.interp(x1, tx1, profile.table.values[:, tj])
        return cols.ravel()
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    return tilted_grim_reaper(X1, X2, profile.b)[0].ravel()


_INV_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def fit_translation(f: Field, profile: TranslatorProfile, t: float,
                    window: FitWindow,
                    c1_bracket: float | None = None) -> FitResult:
    """Least-squares fit of u - t against ubar(. + c1 e1) + c0 on the window.

    For fixed c1 the optimal c0 is the window mean of the difference; c1 is
    found by golden-section search over [-c1_bracket, c1_bracket] (fixed at
    0 for 1D, radial and untilted profiles).  The residual is the RMS window
    distance after removing the fit.  If the search ends on the bracket edge
    the result is flagged.
    """
    mask = window.mask(f)
    w = f.values[mask] - t

    def resid(c1: float):
        ub = _shifted_profile_window(profile, f, mask, c1)
        diff = w - ub
        c0 = float(np.mean(diff))
        return float(np.sqrt(np.mean((diff - c0) ** 2))), c0

    if not c1_bracket or f.geometry != SLAB2D:
        r0, c0 = resid(0.0)
        return FitResult(c0, 0.0, r0)

    a, b = -float(c1_bracket), float(c1_bracket)
    c = b - _INV_GOLD * (b - a)
    d = a + _INV_GOLD * (b - a)
    fc, _ = resid(c)
    fd, _ = resid(d)
    for _ in range(80):
        if b - a < 1e-12 * max(1.0, c1_bracket):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_GOLD * (b - a)
            fc, _ = resid(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_GOLD * (b - a)
            fd, _ = resid(d)
    c1 = 0.5 * (a + b)
    r, c0 = resid(c1)
    flagged = abs(c1) >= c1_bracket * (1 - 1e-6)
    return FitResult(c0, c1, r, flagged)


def splitting_check(f: Field, b: float) -> float:
    """max over interior nodes of |du/dx1 - tan theta|, theta = arccos(pi/2b)."""
    if f.geometry != SLAB2D:
        raise ValueError("splitting_check needs a slab2d field")
    tt = math.tan(theta_for_width(b))
    ux = d1(f, 0).values
    return float(np.max(np.abs(ux[1:-1, 1:-1] - tt)))


# ---------------------------------------------------------------------------
# Harnack residual (1D)
# ---------------------------------------------------------------------------

def harnack_residual(traj: Trajectory, alpha: float,
                     window: FitWindow | None = None,
                     kappa_floor: float = 1e-4) -> CheckOutcome:
    """min over space-time of Z = kappa_t - kappa_s^2 / kappa
    + kappa / (2 (t + alpha)) on the convex set {kappa > kappa_floor}.

    kappa_t follows the normal motion: the fixed-x time derivative (central
    differences across snapshots) plus the advection correction
    -kappa_x u_x u_t / (1 + u_x^2).  Ancient behaviour is approximated by a
    large alpha.  Inconclusive if the window ever loses convexity or fewer
    than 3 snapshots are recorded.
    """
    snaps = traj.snapshots
    if len(snaps) < 3:
        return CheckOutcome(INCONCLUSIVE, None, "need >= 3 snapshots")
    f0 = snaps[0].field
    if f0.geometry != INTERVAL:
        return CheckOutcome(INCONCLUSIVE, None, "harnack audit is 1D only")
    if window is None:
        mask = np.ones(f0.grid.n_nodes, dtype=bool)
        mask[:2] = mask[-2:] = False
    else:
        mask = window.mask(f0)
    times = traj.times()
    kappas = [curvature_1d(s.field) for s in snaps]
    worst = math.inf
    for k in range(1, len(snaps) - 1):
        f = snaps[k].field
        kap = kappas[k]
        if np.nanmin(kap[mask]) <= kappa_floor:
            return CheckOutcome(INCONCLUSIVE, None,
                                f"window not convex at t={times[k]:.4g}")
        if times[k] + alpha <= 0:
            return CheckOutcome(INCONCLUSIVE, None, "needs t + alpha > 0")
        dt2 = times[k + 1] - times[k - 1]
        kap_t = (kappas[k + 1] - kappas[k - 1]) / dt2
        u_t = (snaps[k + 1].field.values - snaps[k - 1].field.values) / dt2
        ux = d1(f).values
        v2 = 1.0 + ux ** 2
        kap_x = np.gradient(kap, f.grid.h)
        kap_flow = kap_t - kap_x * ux * u_t / v2
        kap_s = kap_x / np.sqrt(v2)
        Z = kap_flow - kap_s ** 2 / kap + kap / (2.0 * (times[k] + alpha))
        worst = min(worst, float(np.nanmin(Z[mask])))
    return CheckOutcome(PASS, worst, f"min residual {worst:.4g}")


# ---------------------------------------------------------------------------
# Gaussian functional and entropy
# ---------------------------------------------------------------------------

def curve_samples(f: Field):
    """(points, arclength weights) of a 1D graph, trapezoid weighting."""
    if f.geometry == SLAB2D:
        raise ValueError("curve_samples needs a 1D field")
    x = f.grid.nodes()
    pts = np.column_stack([x, f.values])
    ds = np.sqrt(1.0 + d1(f).values ** 2) * f.grid.h
    w = ds.copy()
    w[0] *= 0.5
    w[-1] *= 0.5
    return pts, w


def circle_samples(radius: float, center=(0.0, 0.0), n_samples: int = 720):
    """(points, weights) of a circle; uniform angles give spectral accuracy."""
    th = 2 * np.pi * np.arange(n_samples) / n_samples
    pts = np.column_stack([center[0] + radius * np.cos(th),
                           center[1] + radius * np.sin(th)])
    w = np.full(n_samples, 2 * np.pi * radius / n_samples)
    return pts, w


def f_functional(points: np.ndarray, weights: np.ndarray, x0, t: float,
                 n: int | None = None) -> float:
    """Gaussian weight F = sum_i w_i (4 pi t)^{-n/2} exp(-|p_i - x0|^2 / 4t),
    with n the hypersurface dimension (ambient dimension minus one)."""
    if t <= 0:
        raise ValueError("t must be positive")
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError("degenerate sample set")
    if n is None:
        n = points.shape[1] - 1
    d2_ = np.sum((points - np.asarray(x0, dtype=np.float64)) ** 2, axis=1)
    return float(np.sum(weights * (4 * math.pi * t) ** (-n / 2)
                        * np.exp(-d2_ / (4 * t))))


def entropy_estimate(points: np.ndarray, weights: np.ndarray,
                     n: int | None = None, coarse: int = 7) -> float:
    """sup over (x0, t) of the Gaussian weight, by a coarse grid over the
    inflated bounding box and t in [1e-3, 10 diam^2], refined with a
    Nelder-Mead simplex in (x0, ln t)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) < 2:
        raise ValueError("degenerate sample set")
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    diam = float(np.linalg.norm(hi - lo))
    if diam == 0:
        raise ValueError("degenerate sample set")
    pad = 2 * diam
    axes = [np.linspace(lo[d] - pad, hi[d] + pad, coarse)
            for d in range(points.shape[1])]
    ts = np.geomspace(1e-3, 10 * diam ** 2, 15)
    best, best_x0, best_t = -math.inf, None, None
    for x0 in np.stack(np.meshgrid(*axes, indexing="ij"),
                       axis=-1).reshape(-1, points.shape[1]):
        for t in ts:
            v = f_functional(points, weights, x0, t, n)
            if v > best:
                best, best_x0, best_t = v, x0, t

    def neg(z):
        return -f_functional(points, weights, z[:-1], math.exp(z[-1]), n)

    z0 = np.append(best_x0, math.log(best_t))
    res = minimize(neg, z0, method="Nelder-Mead",
                   options={"maxiter": 600, "xatol": 1e-8, "fatol": 1e-12})
    return float(max(best, -res.fun))


# ---------------------------------------------------------------------------
# Bowl asymptotics and convexity
# ---------------------------------------------------------------------------

@dataclass
class PlateauReport:
    value: float
    total_variation: float


def bowl_asymptotic_check(profile: TranslatorProfile) -> PlateauReport:
    """g(r) = ubar - (r^2 / (2(m-1)) - ln r) over the outer half-table;
    reports the plateau value and its total variation."""
    if profile.table is None or profile.table.geometry != RADIAL:
        raise ValueError("needs a tabulated radial profile")
    g = profile.table.grid
    if g.hi < 20.0:
        raise ValueError("table too short: needs r_max >= 20")
    m = profile.n
    r = g.nodes()
    sel = r >= g.hi / 2
    vals = profile.table.values[sel] - (r[sel] ** 2 / (2 * (m - 1))
                                        - np.log(r[sel]))
    return PlateauReport(float(vals[-1]), float(np.sum(np.abs(np.diff(vals)))))


def convexity_check(f: Field, variant: str = "hessian") -> float:
    """Convexity margin: min u_xx (1D), min Hessian eigenvalue (2D), or the
    min of (u_rr, u_r/r) for radial graphs; variant="mean" uses min H."""
    if f.geometry == INTERVAL:
        return float(np.min(d2(f).values[1:-1]))
    if f.geometry == RADIAL:
        ur = d1(f).values
        urr = d2(f).values
        r = f.grid.nodes()
        h = f.grid.h
        urr0 = 2.0 * (f.values[1] - f.values[0]) / (h * h)
        radial_curv = urr[1:-1]
        tangential = ur[1:-1] / r[1:-1]
        if variant == "mean":
            q = (radial_curv / (1 + ur[1:-1] ** 2)
                 + (f.n - 1) * tangential)
            vals = np.append(q / np.sqrt(1 + ur[1:-1] ** 2), f.n * urr0)
            return float(np.min(vals))
        return float(np.min([np.min(radial_curv), np.min(tangential), urr0]))
    ux, uy = d1(f, 0).values, d1(f, 1).values
    uxx, uxy, uyy = (g.values for g in hessian(f))
    if variant == "mean":
        v = np.sqrt(1.0 + ux ** 2 + uy ** 2)
        q = (uxx + uyy
             - (ux * ux * uxx + 2 * ux * uy * uxy + uy * uy * uyy) / v ** 2)
        return float(np.min((q / v)[1:-1, 1:-1]))
    half_tr = 0.5 * (uxx + uyy)
    disc = np.sqrt((0.5 * (uxx - uyy)) ** 2 + uxy ** 2)
    return float(np.min((half_tr - disc)[1:-1, 1:-1]))


def sup_distance(f: Field, profile: TranslatorProfile, t: float,
                 window: FitWindow, c0: float = 0.0, c1: float = 0.0) -> float:
    """sup over the window of |u - t - ubar(. + c1 e1) - c0|."""
    mask = window.mask(f)
    ub = _shifted_profile_window(profile, f, mask, c1)
    return float(np.max(np.abs(f.values[mask] - t - ub - c0)))
