"""Reference translator profiles: closed forms, the bowl ODE table, residuals.

A graphical translator moving vertically at unit speed satisfies
Q(Du, D2u) = (delta_ij - Di u Dj u / (1 + |Du|^2)) D2_ij u = 1.
Closed forms implemented here:

  grim reaper            u(x)       = -ln cos x              on (-pi/2, pi/2)
  tilted grim reaper     u(x1, x2)  = x1 tan(th) - ln(cos(x2 cos th)) / cos^2(th)
                         over a slab of half-width b >= pi/2, th = arccos(pi / (2b))

The bowl soliton has no closed form; its radial profile solves
u'' / (1 + u'^2) + (m - 1) u' / r = 1, u(0) = u'(0) = 0, and is tabulated by
a 4th-order integrator.  Delta-wing profiles are not produced here either:
they are extracted dynamically from long flow runs (see scenarios) and
registered as tabulated profiles.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .grids import (Field, Grid1D, Grid2D, GridError, INTERVAL, RADIAL,
                    SLAB2D, d1, d2, hessian, linterp)

GRIM_1D = "grim_reaper_1d"
GRIM_PLANE = "grim_reaper_plane"
TILTED_PLANE = "tilted_grim_reaper_plane"
BOWL = "bowl"
CYLINDER = "cylinder_shrinker"
TABULATED = "tabulated"

HALF_PI = math.pi / 2


class ProfileError(ValueError):
    """Invalid profile construction or out-of-domain evaluation."""


class ResidualTargetError(RuntimeError):
    """A tabulated profile failed to meet its residual certification bound."""

    def __init__(self, achieved: float, target: float):
        super().__init__(
            f"residual sup {achieved:.3e} exceeds target {target:.3e}; "
            "use a finer step")
        self.achieved = achieved
        self.target = target


def theta_for_width(b: float) -> float:
    """Tilt angle arccos(pi/(2b)) of the grim reaper plane fitting a slab of
    half-width b; exists exactly for b >= pi/2 (b = pi/2 gives theta = 0)."""
    if b < HALF_PI:
        raise ProfileError(f"tilted planes need b >= pi/2, got b={b}")
    return math.acos(min(1.0, math.pi / (2 * b)))


def grim_reaper(x):
    """(u, u', u'') of the grim reaper at x, |x| < pi/2 strictly.

    u = -ln cos x, u' = tan x, u'' = 1/cos^2 x.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) >= HALF_PI):
        raise ProfileError("grim reaper is defined on |x| < pi/2")
    c = np.cos(x)
    return -np.log(c), np.tan(x), 1.0 / (c * c)


def tilted_grim_reaper(x1, x2, b: float):
    """(u, Du, D2u) of the tilted grim reaper plane over the slab |x2| < b.

    u = x1 tan(th) - ln(cos(x2 cos th)) / cos^2(th); affine in x1, so
    du/dx1 = tan(th) identically and all x1 second derivatives vanish.
    """
    th = theta_for_width(b)
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if np.any(np.abs(x2) >= b):
        raise ProfileError(f"tilted grim reaper is defined on |x2| < b = {b}")
    ct, tt = math.cos(th), math.tan(th)
    w = x2 * ct
    u = x1 * tt - np.log(np.cos(w)) / (ct * ct)
    du = (np.broadcast_to(tt, u.shape).copy(), np.tan(w) / ct)
    zero = np.zeros_like(u)
    d2u = (zero, zero.copy(), 1.0 / np.cos(w) ** 2)
    return u, du, d2u


def cylinder_radius(n: int, k: int, t: float) -> float:
    """Radius sqrt(-2(n-k)t) of the (n,k) shrinking cylinder at time t < 0."""
    if n < 2 or not 1 <= k <= n - 1:
        raise ProfileError(f"need n >= 2 and 1 <= k <= n-1, got n={n}, k={k}")
    if t >= 0:
        raise ProfileError("shrinking cylinders exist for t < 0")
    return math.sqrt(-2.0 * (n - k) * t)


@dataclass(frozen=True, eq=False)
class TranslatorProfile:
    """A reference translator with pointwise u, Du, D2u access.

    Closed-form kinds evaluate exactly; bowl and other tabulated kinds carry
    a sampled table plus the residual bound achieved at certification time.
    Profiles are immutable; evaluation is pure.
    """

    kind: str
    n: int = 1
    b: float | None = None
    k: int | None = None
    table: Field | None = None
    residual_sup: float | None = None
    certified: bool = False

    def __post_init__(self):
        if self.kind in (GRIM_PLANE, TILTED_PLANE):
            b = HALF_PI if self.b is None else self.b
            if self.kind == GRIM_PLANE and not math.isclose(b, HALF_PI):
                raise ProfileError("the untilted grim reaper plane has b = pi/2")
            theta_for_width(b)  # validates b >= pi/2
            object.__setattr__(self, "b", b)
            object.__setattr__(self, "n", 2)
        elif self.kind == GRIM_1D:
            object.__setattr__(self, "n", 1)
        elif self.kind == BOWL:
            if self.n < 2:
                raise ProfileError("bowl profiles need graph dimension n >= 2")
            if self.table is None:
                raise ProfileError("bowl profiles are tabulated; use bowl_profile")
        elif self.kind == CYLINDER:
            cylinder_radius(self.n, self.k if self.k is not None else 0, -1.0)
        elif self.kind == TABULATED:
            if self.table is None:
                raise ProfileError("tabulated profiles need a table")
            if self.residual_sup is None:
                raise ProfileError(
                    "tabulated profiles must record the residual bound achieved")
        else:
            raise ProfileError(f"unknown profile kind {self.kind!r}")
        if self.table is not None:
            object.__setattr__(self, "_interp", _TableInterp(self.table))

    @property
    def theta(self) -> float:
        if self.kind in (GRIM_PLANE, TILTED_PLANE):
            return theta_for_width(self.b)
        if self.kind == TABULATED and self.b is not None and self.b >= HALF_PI:
            return theta_for_width(self.b)
        return 0.0


class _TableInterp:
    """Interpolation backend for tabulated profiles.

    Radial/1D tables use a cubic Hermite spline (derivative slopes from
    second-order differences of the table).  2D tables use bilinear values
    with derivatives taken as finite differences of the table and then
    interpolated, matching the solver's discrete operators.
    """

    def __init__(self, table: Field):
        self.table = table
        if table.geometry == SLAB2D:
            dx1, dx2 = d1(table, 0), d1(table, 1)
            d11, d12, d22 = hessian(table)
            self.deriv_fields = (dx1, dx2, d11, d12, d22)
        else:
            r = table.grid.nodes()
            slopes = d1(table).values
            if table.geometry == RADIAL:
                slopes = slopes.copy()
                slopes[0] = 0.0  # even extension through r = 0
            self.spline = CubicHermiteSpline(r, table.values, slopes)

    def eval_1d(self, r: float):
        g = self.table.grid
        if r < g.lo or r > g.hi:
            raise ProfileError(f"query {r} outside table range [{g.lo}, {g.hi}]")
        return (float(self.spline(r)), float(self.spline(r, 1)),
                float(self.spline(r, 2)))

    def eval_2d(self, x1: float, x2: float):
        u = linterp(self.table, (x1, x2))
        dx1, dx2, d11, d12, d22 = self.deriv_fields
        du = np.array([linterp(dx1, (x1, x2)), linterp(dx2, (x1, x2))])
        d2u = np.array([[linterp(d11, (x1, x2)), linterp(d12, (x1, x2))],
                        [linterp(d12, (x1, x2)), linterp(d22, (x1, x2))]])
        return u, du, d2u

    def interp_error_estimate(self) -> float:
        """Crude bilinear interpolation error bound h^2 max|D2u| / 8."""
        if self.table.geometry != SLAB2D:
            g = self.table.grid
            return g.h ** 2
        dx1g, dx2g = self.table.grid.x1, self.table.grid.x2
        d11, d12, d22 = self.deriv_fields[2:]
        m = max(np.max(np.abs(d11.values)), np.max(np.abs(d22.values)))
        return max(dx1g.h, dx2g.h) ** 2 * m / 8.0


def eval_profile(p: TranslatorProfile, point):
    """(u, Du, D2u) of a profile at a point in its domain.

    1D/radial kinds take a scalar coordinate and return scalar derivatives
    (radial derivatives for bowls); 2D kinds take (x1, x2).
    """
    if p.kind == GRIM_1D:
        u, du, ddu = grim_reaper(float(point))
        return float(u), float(du), float(ddu)
    if p.kind in (GRIM_PLANE, TILTED_PLANE):
        x1, x2 = point
        u, du, d2u = tilted_grim_reaper(float(x1), float(x2), p.b)
        return (float(u), np.array([float(du[0]), float(du[1])]),
                np.array([[float(d2u[0]), float(d2u[1])],
                          [float(d2u[1]), float(d2u[2])]]))
    if p.kind == CYLINDER:
        raise ProfileError("cylinder shrinkers carry a radius only, no graph")
    interp = p._interp
    if p.table.geometry == SLAB2D:
        x1, x2 = point
        return interp.eval_2d(float(x1), float(x2))
    return interp.eval_1d(float(point))


def profile_values(p: TranslatorProfile, grid, geometry: str) -> np.ndarray:
    """Profile heights sampled on a whole grid (vectorized)."""
    if geometry == SLAB2D:
        if p.kind in (GRIM_PLANE, TILTED_PLANE):
            X1, X2 = grid.meshgrid()
            return tilted_grim_reaper(X1, X2, p.b)[0]
        if p.table is not None and p.table.geometry == SLAB2D:
            tg = p.table.grid
            if (tg.x1 == grid.x1) and (tg.x2 == grid.x2):
                return p.table.values.copy()
            X1, X2 = grid.meshgrid()
            out = np.empty(grid.shape)
            for i in range(grid.shape[0]):
                for j in range(grid.shape[1]):
                    out[i, j] = linterp(p.table, (X1[i, j], X2[i, j]))
            return out
        raise ProfileError(f"profile kind {p.kind} has no slab2d graph")
    x = grid.nodes()
    if p.kind == GRIM_1D:
        return grim_reaper(x)[0]
    if p.table is not None and p.table.geometry != SLAB2D:
        g = p.table.grid
        if x[0] < g.lo or x[-1] > g.hi:
            raise ProfileError("grid extends beyond the profile table")
        return p._interp.spline(x)
    raise ProfileError(f"profile kind {p.kind} has no {geometry} graph")


def sample_profile(p: TranslatorProfile, grid, geometry: str, n: int = 0) -> Field:
    return Field(grid, profile_values(p, grid, geometry), geometry, n)


# ---------------------------------------------------------------------------
# Bowl soliton table
# ---------------------------------------------------------------------------

def _bowl_series_coeffs(m: int):
    # u'(r) = a1 r + a3 r^3 + a5 r^5 + a7 r^7 + O(r^9) from matching the ODE
    a1 = 1.0 / m
    a3 = a1 ** 3 / (m + 2)
    a5 = a1 ** 2 * a3 * (3 - m) / (m + 4)
    a7 = (a1 * a3 ** 2 * (3 - 2 * m) + a1 ** 2 * a5 * (3 - m)) / (m + 6)
    return a1, a3, a5, a7


def bowl_profile(n: int, r_max: float, h: float | None = None,
                 residual_target: float = 1e-6) -> TranslatorProfile:
    """Tabulate the radial bowl soliton of graph dimension n on [0, r_max].

    Integrates u''/(1+u'^2) + (n-1)u'/r = 1 with u(0) = u'(0) = 0 by
    classical RK4, seeded on [0, 10h] by a 4-term odd Taylor series for u'
    (u''(0) = 1/n), which keeps 4th-order accuracy through the r = 0
    singularity of the drift term.  The returned table is certified:
    sup of |Q - 1| on [0, r_max - 1] must be <= residual_target, else
    ResidualTargetError reports the achieved value.
    """
    if n < 2:
        raise ProfileError("bowl profiles need graph dimension n >= 2")
    if r_max < 10:
        raise ProfileError("need r_max >= 10")
    if h is None:
        h = 1e-4 * r_max
    if h > 1e-3 * r_max:
        raise ProfileError(f"need h <= 1e-3*r_max, got h={h}")
    n_cells = int(round(r_max / h))
    grid = Grid1D(0.0, r_max, n_cells)
    h = grid.h
    r = grid.nodes()
    u = np.empty(grid.n_nodes)
    p = np.empty(grid.n_nodes)

    a1, a3, a5, a7 = _bowl_series_coeffs(n)
    i0 = 10
    rs = r[:i0 + 1]
    p[:i0 + 1] = a1 * rs + a3 * rs ** 3 + a5 * rs ** 5 + a7 * rs ** 7
    u[:i0 + 1] = (a1 * rs ** 2 / 2 + a3 * rs ** 4 / 4
                  + a5 * rs ** 6 / 6 + a7 * rs ** 8 / 8)

    def rhs(ri, ui, pi):
        return pi, (1.0 + pi * pi) * (1.0 - (n - 1) * pi / ri)

    for i in range(i0, n_cells):
        ri, ui, pi = r[i], u[i], p[i]
        k1u, k1p = rhs(ri, ui, pi)
        k2u, k2p = rhs(ri + h / 2, ui + h / 2 * k1u, pi + h / 2 * k1p)
        k3u, k3p = rhs(ri + h / 2, ui + h / 2 * k2u, pi + h / 2 * k2p)
        k4u, k4p = rhs(ri + h, ui + h * k3u, pi + h * k3p)
        u[i + 1] = ui + h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        p[i + 1] = pi + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)

    table = Field(grid, u, RADIAL, n)
    res = translator_residual(table)
    keep = r <= r_max - 1.0
    achieved = float(np.nanmax(np.abs(res[keep])))
    if achieved > residual_target:
        raise ResidualTargetError(achieved, residual_target)
    return TranslatorProfile(kind=BOWL, n=n, table=table,
                             residual_sup=achieved, certified=True)


# ---------------------------------------------------------------------------
# Translator-equation residual
# ---------------------------------------------------------------------------

def translator_residual(f: Field) -> np.ndarray:
    """Pointwise Q(Du, D2u) - 1 at interior nodes, NaN where unavailable.

    An array (not a Field) is returned because boundary nodes are marked NaN,
    which a Field's finiteness invariant would reject.  For radial fields the
    r = 0 node is available through the symmetric limit Q(0) = n u''(0) with
    u''(0) = 2(u(h) - u(0))/h^2; only the outer node is unavailable.
    """
    v = f.values
    out = np.full(v.shape, np.nan)
    if f.geometry == SLAB2D:
        ux = d1(f, 0).values
        uy = d1(f, 1).values
        uxx, uxy, uyy = (g.values for g in hessian(f))
        w = 1.0 + ux ** 2 + uy ** 2
        q = (uxx + uyy
             - (ux * ux * uxx + 2 * ux * uy * uxy + uy * uy * uyy) / w)
        out[1:-1, 1:-1] = q[1:-1, 1:-1] - 1.0
        return out
    h = f.grid.h
    ur = d1(f).values
    urr = d2(f).values
    if f.geometry == INTERVAL:
        out[1:-1] = urr[1:-1] / (1.0 + ur[1:-1] ** 2) - 1.0
        return out
    r = f.grid.nodes()
    out[1:-1] = (urr[1:-1] / (1.0 + ur[1:-1] ** 2)
                 + (f.n - 1) * ur[1:-1] / r[1:-1]) - 1.0
    out[0] = f.n * 2.0 * (v[1] - v[0]) / (h * h) - 1.0
    return out


# ---------------------------------------------------------------------------
# Profile table files
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return format(float(x), ".17g")


def save_profile(p: TranslatorProfile, path: str) -> None:
    """Write a tabulated profile as line-oriented text.

    Header: `# kind=... n=... b=... theta=... residual_sup=...`, then one
    `r,u` (radial/1D) or `x1,x2,u` (2D) row per node at full precision.
    """
    if p.table is None:
        raise ProfileError(f"profile kind {p.kind} has no table to save")
    buf = io.StringIO()
    b = "" if p.b is None else _fmt(p.b)
    theta = _fmt(p.theta) if p.b is not None or p.kind == BOWL else _fmt(0.0)
    buf.write(f"# kind={p.kind} n={p.n} b={b} theta={theta} "
              f"residual_sup={_fmt(p.residual_sup)}\n")
    buf.write(f"# geometry={p.table.geometry}\n")
    if p.table.geometry == SLAB2D:
        X1, X2 = p.table.grid.meshgrid()
        for i in range(X1.shape[0]):
            for j in range(X1.shape[1]):
                buf.write(f"{_fmt(X1[i, j])},{_fmt(X2[i, j])},"
                          f"{_fmt(p.table.values[i, j])}\n")
    else:
        for r, u in zip(p.table.grid.nodes(), p.table.values):
            buf.write(f"{_fmt(r)},{_fmt(u)}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_profile(path: str) -> TranslatorProfile:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# kind="):
            raise ProfileError(f"{path} is not a profile table")
        meta = dict(tok.split("=", 1) for tok in header[2:].split())
        geom_line = fh.readline().strip()
        geometry = geom_line.split("=", 1)[1] if "=" in geom_line else INTERVAL
        rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    kind = meta["kind"]
    n = int(meta["n"])
    b = float(meta["b"]) if meta.get("b") else None
    residual_sup = float(meta["residual_sup"])
    if geometry == SLAB2D:
        x1 = np.unique(rows[:, 0])
        x2 = np.unique(rows[:, 1])
        grid = Grid2D(Grid1D(x1[0], x1[-1], len(x1) - 1),
                      Grid1D(x2[0], x2[-1], len(x2) - 1))
        vals = rows[:, 2].reshape(len(x1), len(x2))
        table = Field(grid, vals, SLAB2D, 2)
    else:
        r = rows[:, 0]
        grid = Grid1D(r[0], r[-1], len(r) - 1)
        table = Field(grid, rows[:, 1], geometry, n)
    return TranslatorProfile(kind=kind, n=n, b=b, table=table,
                             residual_sup=residual_sup,
                             certified=True)
