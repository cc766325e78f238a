"""Steady blade-element-momentum rotor solver.

Classical BEM with Prandtl tip loss and the Buhl form of the Glauert
high-induction correction. All segments of a rotor are iterated together
as numpy arrays; :func:`solve_segment` runs the same kernel on one segment.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

log = logging.getLogger(__name__)

RPM_TO_RAD_S = 2.0 * np.pi / 60.0
BETZ_LIMIT = 16.0 / 27.0
DEFAULT_RHO = 1.225

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500
DEFAULT_RELAXATION = 0.25

# induction clamps: keep 0 <= a < 1 and avoid the a' -> -1 pole
_A_MAX = 0.95
_AP_LIMIT = 0.5


class OutOfRange(ValueError):
    """Angle of attack outside the tabulated polar."""

    def __init__(self, alpha, lo, hi):
        super().__init__(f"angle of attack {alpha!r} deg outside polar range [{lo}, {hi}]")
        self.alpha = alpha


class NoConvergence(RuntimeError):
    def __init__(self, residual, iterations):
        super().__init__(f"BEM iteration did not converge: residual {residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class AirfoilPolar:
    """Tabulated lift/drag polar with optional boundary-layer data.

    ``dstar_over_chord`` holds the upper-surface turbulent displacement
    thickness over chord; the lower surface is read at the angle mirrored
    about the zero-lift angle.
    """

    angles: np.ndarray
    cl: np.ndarray
    cd: np.ndarray
    dstar_over_chord: np.ndarray | None = None
    name: str = "polar"

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        if angles.ndim != 1 or angles.size < 2 or np.any(np.diff(angles) <= 0):
            raise ValueError("polar angles must be a strictly increasing 1-d sequence")
        cl = np.asarray(self.cl, dtype=float)
        cd = np.asarray(self.cd, dtype=float)
        if cl.shape != angles.shape or cd.shape != angles.shape:
            raise ValueError("cl and cd must match the angle table")
        if np.any(cd < 0):
            raise ValueError("drag coefficients must be non-negative")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "cl", cl)
        object.__setattr__(self, "cd", cd)
        if self.dstar_over_chord is not None:
            ds = np.asarray(self.dstar_over_chord, dtype=float)
            if ds.shape != angles.shape:
                raise ValueError("dstar_over_chord must match the angle table")
            object.__setattr__(self, "dstar_over_chord", ds)

    @property
    def alpha_range(self) -> tuple[float, float]:
        return float(self.angles[0]), float(self.angles[-1])

    @property
    def zero_lift_angle(self) -> float:
        """Zero crossing of cl closest to 0 deg (0 if the table never crosses)."""
        s = np.sign(self.cl)
        idx = np.nonzero((s[:-1] <= 0) & (s[1:] > 0))[0]
        if idx.size == 0:
            return 0.0
        crossings = []
        for i in idx:
            a0, a1 = self.angles[i], self.angles[i + 1]
            c0, c1 = self.cl[i], self.cl[i + 1]
            crossings.append(a0 - c0 * (a1 - a0) / (c1 - c0))
        crossings = np.array(crossings)
        return float(crossings[np.argmin(np.abs(crossings))])


@dataclass(frozen=True)
class BladeSegment:
    radial_station: float
    span_width: float
    chord: float
    twist: float
    airfoil_id: str


@dataclass(frozen=True, eq=False)
class TurbineGeometry:
    blade_radius: float
    hub_radius: float
    n_blades: int
    segments: tuple[BladeSegment, ...]
    polars: dict[str, AirfoilPolar] = field(repr=False)
    rated_power: float = 2.3e6

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        stations = np.array([s.radial_station for s in segs])
        if np.any(np.diff(stations) <= 0):
            raise ValueError("segments must be ordered by increasing radial station")
        if np.any(stations <= self.hub_radius) or np.any(stations >= self.blade_radius):
            raise ValueError("segment stations must lie strictly between hub and tip")
        span = self.blade_radius - self.hub_radius
        widths = sum(s.span_width for s in segs)
        if abs(widths - span) > 1e-9 * span:
            raise ValueError(f"segment widths sum to {widths}, expected {span}")
        missing = {s.airfoil_id for s in segs} - set(self.polars)
        if missing:
            raise ValueError(f"no polar for airfoil ids {sorted(missing)}")

    @property
    def rotor_area(self) -> float:
        return np.pi * self.blade_radius**2

    # per-segment arrays for the vectorised kernel
    @property
    def stations(self) -> np.ndarray:
        return np.array([s.radial_station for s in self.segments])

    @property
    def widths(self) -> np.ndarray:
        return np.array([s.span_width for s in self.segments])

    @property
    def chords(self) -> np.ndarray:
        return np.array([s.chord for s in self.segments])

    @property
    def twists(self) -> np.ndarray:
        return np.array([s.twist for s in self.segments])

    def tip_speed_ratio(self, wind_speed: float, rotor_speed_rpm: float) -> float:
        return rotor_speed_rpm * RPM_TO_RAD_S * self.blade_radius / wind_speed


@dataclass(frozen=True)
class SegmentFlowState:
    axial_induction: float
    tangential_induction: float
    relative_velocity: float
    angle_of_attack: float
    local_solidity: float
    inflow_angle: float = 0.0
    converged: bool = True
    residual: float = 0.0


@dataclass(frozen=True)
class RotorPerformance:
    cp: float
    power: float
    thrust: float
    torque: float
    per_segment: tuple[SegmentFlowState, ...]
    n_unconverged: int = 0

    def __iter__(self):
        # unpacks as (cp, power, thrust, per_segment)
        return iter((self.cp, self.power, self.thrust, self.per_segment))


def interpolate_polar(polar: AirfoilPolar, alpha):
    """Piecewise-linear (cl, cd) at ``alpha`` degrees; raises OutOfRange off the table."""
    lo, hi = polar.alpha_range
    a = np.asarray(alpha, dtype=float)
    if np.any(a < lo) or np.any(a > hi) or np.any(np.isnan(a)):
        raise OutOfRange(alpha, lo, hi)
    cl = np.interp(a, polar.angles, polar.cl)
    cd = np.interp(a, polar.angles, polar.cd)
    if a.ndim == 0:
        return float(cl), float(cd)
    return cl, cd


def _polar_lookup(polars, alpha):
    """Vectorised lookup over a per-segment list of polars; returns cl, cd, in_range."""
    cl = np.empty_like(alpha)
    cd = np.empty_like(alpha)
    ok = np.ones(alpha.shape, dtype=bool)
    groups: dict[int, list[int]] = {}
    for i, p in enumerate(polars):
        groups.setdefault(id(p), []).append(i)
    for idx in groups.values():
        p = polars[idx[0]]
        a = alpha[idx]
        lo, hi = p.alpha_range
        ok[idx] = (a >= lo) & (a <= hi)
        cl[idx] = np.interp(a, p.angles, p.cl)
        cd[idx] = np.interp(a, p.angles, p.cd)
    return cl, cd, ok


@njit(cache=True)
def _interp(x, xs, ys):
    n = xs.size
    if x <= xs[0]:
        return ys[0]
    if x >= xs[n - 1]:
        return ys[n - 1]
    lo, hi = 0, n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid
    t = (x - xs[lo]) / (xs[hi] - xs[lo])
    return ys[lo] + t * (ys[hi] - ys[lo])


@njit(cache=True)
def _loads(phi, twist, pitch, xs, cl_t, cd_t, n_blades, tip_radius, r, tip_loss):
    """(cn, ct, F, sin phi, cos phi) of one section at inflow angle ``phi``."""
    alpha = np.degrees(phi) - twist - pitch
    cl = _interp(alpha, xs, cl_t)
    cd = _interp(alpha, xs, cd_t)
    sphi = np.sin(phi)
    cphi = np.cos(phi)
    F = 1.0
    if tip_loss:
        f = 0.5 * n_blades * (tip_radius - r) / (r * max(abs(sphi), 1e-6))
        F = max(2.0 / np.pi * np.arccos(min(max(np.exp(-f), 0.0), 1.0)), 1e-4)
    return cl * cphi + cd * sphi, cl * sphi - cd * cphi, F, sphi, cphi


@njit(cache=True)
def _tangential(sigma, ct, F, sphi, cphi):
    den = 4.0 * F * sphi * cphi - sigma * ct
    ap = sigma * ct / den if den != 0.0 else 0.0
    if not np.isfinite(ap):
        ap = 0.0
    return min(max(ap, -_AP_LIMIT), _AP_LIMIT)


@njit(cache=True)
def _update(a, ap, r, sigma, twist, pitch, xs, cl_t, cd_t, n_blades, tip_radius, wind_speed, omega,
            tip_loss):
    """One unrelaxed fixed-point map (a, a') -> (a_new, a'_new)."""
    phi = np.arctan2(wind_speed * (1.0 - a), omega * r * (1.0 + ap))
    cn, ct, F, sphi, cphi = _loads(phi, twist, pitch, xs, cl_t, cd_t, n_blades, tip_radius, r, tip_loss)
    a_new = sigma * cn / (4.0 * F * sphi * sphi + sigma * cn)
    # Glauert/Buhl branch once the local thrust coefficient implies a > 0.4
    ct_local = sigma * (1.0 - a) ** 2 * cn / max(sphi * sphi, 1e-12)
    if ct_local > 0.96 * F:
        disc = max(ct_local * (50.0 - 36.0 * F) + 12.0 * F * (3.0 * F - 4.0), 0.0)
        a_new = (18.0 * F - 20.0 - 3.0 * np.sqrt(disc)) / (36.0 * F - 50.0)
    a_new = min(max(a_new, 0.0), _A_MAX)
    return a_new, _tangential(sigma, ct, F, sphi, cphi)


@njit(cache=True)
def _inductions_at(phi, r, sigma, twist, pitch, xs, cl_t, cd_t, n_blades, tip_radius, tip_loss):
    """Self-consistent (a, a') for a given inflow angle.

    The Buhl branch is solved in closed form together with the blade-element
    thrust, so (a, a') here is exactly a fixed point of :func:`_update`
    whenever ``phi`` is consistent with it.
    """
    cn, ct, F, sphi, cphi = _loads(phi, twist, pitch, xs, cl_t, cd_t, n_blades, tip_radius, r, tip_loss)
    k = sigma * cn / (4.0 * F * max(sphi * sphi, 1e-12))
    if k <= 2.0 / 3.0:
        a = k / (1.0 + k) if k > -1.0 else 0.0
    else:
        g1 = 2.0 * F * k - (10.0 / 9.0 - F)
        g2 = max(2.0 * F * k - F * (4.0 / 3.0 - F), 0.0)
        g3 = 2.0 * F * k - (25.0 / 9.0 - 2.0 * F)
        if abs(g3) < 1e-6:
            a = 1.0 - 1.0 / (2.0 * np.sqrt(max(g2, 1e-12)))
        else:
            a = (g1 - np.sqrt(g2)) / g3
    a = min(max(a, 0.0), _A_MAX)
    return a, _tangential(sigma, ct, F, sphi, cphi)


@njit(cache=True)
def _phi_residual(phi, lam_r, r, sigma, twist, pitch, xs, cl_t, cd_t, n_blades, tip_radius, tip_loss):
    a, ap = _inductions_at(phi, r, sigma, twist, pitch, xs, cl_t, cd_t, n_blades, tip_radius, tip_loss)
    return np.sin(phi) * lam_r * (1.0 + ap) - np.cos(phi) * (1.0 - a), a, ap


@njit(cache=True)
def _bracketed(phi0, r, sigma, twist, pitch, xs, cl_t, cd_t, n_blades, tip_radius, wind_speed, omega,
               tip_loss):
    """Bisection on the inflow angle for the root nearest phi0; returns (found, a, a').

    The residual can have several roots in (0, pi/2]. Searching outward from the
    last iterate keeps the fallback on the branch the iteration was heading to.
    """
    lam_r = omega * r / wind_speed
    lo_lim, hi_lim = 1e-6, 0.5 * np.pi
    phi0 = min(max(phi0, lo_lim), hi_lim)
    step = 1e-3
    f0 = _phi_residual(phi0, lam_r, r, sigma, twist, pitch, xs, cl_t, cd_t, n_blades, tip_radius, tip_loss)[0]
    found = False
    lo, hi, f_lo = phi0, phi0, f0
    left, f_left = phi0, f0
    right, f_right = phi0, f0
    while left > lo_lim or right < hi_lim:
        if right < hi_lim:
            nxt = min(right + step, hi_lim)
            f_nxt = _phi_residual(nxt, lam_r, r, sigma, twist, pitch, xs, cl_t, cd_t, n_blades,
                                  tip_radius, tip_loss)[0]
            if f_nxt * f_right <= 0.0:
                lo, hi, f_lo, found = right, nxt, f_right, True
                break
            right, f_right = nxt, f_nxt
        if left > lo_lim:
            nxt = max(left - step, lo_lim)
            f_nxt = _phi_residual(nxt, lam_r, r, sigma, twist, pitch, xs, cl_t, cd_t, n_blades,
                                  tip_radius, tip_loss)[0]
            if f_nxt * f_left <= 0.0:
                lo, hi, f_lo, found = nxt, left, f_nxt, True
                break
            left, f_left = nxt, f_nxt
    if not found:
        return False, 0.0, 0.0
    a, ap = 0.0, 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid, a, ap = _phi_residual(mid, lam_r, r, sigma, twist, pitch, xs, cl_t, cd_t, n_blades,
                                     tip_radius, tip_loss)
        if f_mid == 0.0 or hi - lo < 1e-15:
            break
        if (f_mid < 0.0) == (f_lo < 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return True, a, ap


@njit(cache=True)
def _bem_loop(r, chord, twist, offsets, lengths, angles, cls, cds, n_blades, tip_radius,
              wind_speed, omega, pitch, tol, max_iter, relaxation, tip_loss):
    n = r.size
    a_out = np.empty(n)
    ap_out = np.empty(n)
    phi_out = np.empty(n)
    alpha_out = np.empty(n)
    res_out = np.empty(n)
    ok_out = np.empty(n, dtype=np.bool_)
    iters = np.empty(n, dtype=np.int64)
    for i in range(n):
        xs = angles[offsets[i]:offsets[i] + lengths[i]]
        cl_t = cls[offsets[i]:offsets[i] + lengths[i]]
        cd_t = cds[offsets[i]:offsets[i] + lengths[i]]
        sigma = n_blades * chord[i] / (2.0 * np.pi * r[i])
        a = 0.3
        ap = 0.0
        res = np.inf
        it = 0
        while it < max_iter:
            it += 1
            a_new, ap_new = _update(a, ap, r[i], sigma, twist[i], pitch, xs, cl_t, cd_t, n_blades,
                                    tip_radius, wind_speed, omega, tip_loss)
            res = max(abs(a_new - a), abs(ap_new - ap))
            a = a + relaxation * (a_new - a)
            ap = ap + relaxation * (ap_new - ap)
            if res < tol:
                break
        if res >= tol:
            # slow or cycling iteration: fall back to a bracketed root on phi,
            # accepted only if it passes the same fixed-point residual test
            phi_it = np.arctan2(wind_speed * (1.0 - a), omega * r[i] * (1.0 + ap))
            found, a_b, ap_b = _bracketed(phi_it, r[i], sigma, twist[i], pitch, xs, cl_t, cd_t, n_blades,
                                          tip_radius, wind_speed, omega, tip_loss)
            if found:
                a_chk, ap_chk = _update(a_b, ap_b, r[i], sigma, twist[i], pitch, xs, cl_t, cd_t,
                                        n_blades, tip_radius, wind_speed, omega, tip_loss)
                res_b = max(abs(a_chk - a_b), abs(ap_chk - ap_b))
                if res_b < res:
                    a, ap, res = a_b, ap_b, res_b
        phi = np.arctan2(wind_speed * (1.0 - a), omega * r[i] * (1.0 + ap))
        alpha = np.degrees(phi) - twist[i] - pitch
        a_out[i] = a
        ap_out[i] = ap
        phi_out[i] = phi
        alpha_out[i] = alpha
        res_out[i] = res
        ok_out[i] = xs[0] <= alpha <= xs[lengths[i] - 1]
        iters[i] = it
    return a_out, ap_out, phi_out, alpha_out, res_out, ok_out, iters


def _flatten_polars(polars):
    uniq: dict[int, int] = {}
    tables = []
    for p in polars:
        if id(p) not in uniq:
            uniq[id(p)] = len(tables)
            tables.append(p)
    lengths_u = np.array([p.angles.size for p in tables], dtype=np.int64)
    offsets_u = np.concatenate([[0], np.cumsum(lengths_u)[:-1]]).astype(np.int64)
    which = np.array([uniq[id(p)] for p in polars], dtype=np.int64)
    return (offsets_u[which], lengths_u[which],
            np.concatenate([p.angles for p in tables]),
            np.concatenate([p.cl for p in tables]),
            np.concatenate([p.cd for p in tables]))


def _bem_kernel(r, chord, twist, polars, n_blades, tip_radius, wind_speed, omega, pitch,
                tol, max_iter, relaxation, tip_loss):
    """Relaxed fixed-point BEM, each segment iterated to its own tolerance.

    Returns (a, ap, phi, alpha, sigma, residual, converged, in_range, iterations).
    """
    offsets, lengths, angles, cls, cds = _flatten_polars(polars)
    a, ap, phi, alpha, res, in_range, iters = _bem_loop(
        np.ascontiguousarray(r, dtype=float), np.ascontiguousarray(chord, dtype=float),
        np.ascontiguousarray(twist, dtype=float), offsets, lengths, angles, cls, cds,
        float(n_blades), float(tip_radius), float(wind_speed), float(omega), float(pitch),
        float(tol), int(max_iter), float(relaxation), bool(tip_loss))
    sigma = n_blades * np.asarray(chord, dtype=float) / (2.0 * np.pi * np.asarray(r, dtype=float))
    converged = (res < tol) & in_range
    return a, ap, phi, alpha, sigma, res, converged, in_range, int(iters.max()) if iters.size else 0


def solve_segment(geom: TurbineGeometry, segment: BladeSegment, wind_speed: float, omega: float,
                  pitch: float, *, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                  relaxation: float = DEFAULT_RELAXATION, tip_loss: bool = True) -> SegmentFlowState:
    """Converged flow state of one blade segment.

    ``omega`` is in rad/s and ``pitch`` in degrees. Raises :class:`OutOfRange`
    when the converged angle of attack leaves the polar table and
    :class:`NoConvergence` when the residual stays above ``tol``.
    """
    if wind_speed <= 0 or omega <= 0:
        raise ValueError("wind speed and rotor speed must be positive")
    polar = geom.polars[segment.airfoil_id]
    a, ap, phi, alpha, sigma, res, conv, in_range, it = _bem_kernel(
        np.array([segment.radial_station]), np.array([segment.chord]), np.array([segment.twist]),
        [polar], geom.n_blades, geom.blade_radius, wind_speed, omega, pitch,
        tol, max_iter, relaxation, tip_loss)
    if not in_range[0]:
        lo, hi = polar.alpha_range
        raise OutOfRange(float(alpha[0]), lo, hi)
    if not conv[0]:
        raise NoConvergence(float(res[0]), it)
    w = np.hypot(wind_speed * (1.0 - a[0]), omega * segment.radial_station * (1.0 + ap[0]))
    return SegmentFlowState(float(a[0]), float(ap[0]), float(w), float(alpha[0]), float(sigma[0]),
                            float(np.degrees(phi[0])), True, float(res[0]))


def rotor_performance(geom: TurbineGeometry, wind_speed: float, rotor_speed_rpm: float, pitch: float, *,
                      rho: float = DEFAULT_RHO, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                      relaxation: float = DEFAULT_RELAXATION, tip_loss: bool = True) -> RotorPerformance:
    """Integrated rotor loads at one operating point.

    Segments that fail to converge (or leave the polar table) carry zero
    force and are counted in ``n_unconverged``.
    """
    if wind_speed <= 0 or rotor_speed_rpm <= 0:
        raise ValueError("wind speed and rotor speed must be positive")
    omega = rotor_speed_rpm * RPM_TO_RAD_S
    r = geom.stations
    chord = geom.chords
    polars = [geom.polars[s.airfoil_id] for s in geom.segments]
    a, ap, phi, alpha, sigma, res, conv, _, _ = _bem_kernel(
        r, chord, geom.twists, polars, geom.n_blades, geom.blade_radius, wind_speed, omega, pitch,
        tol, max_iter, relaxation, tip_loss)

    cl, cd, _ = _polar_lookup(polars, alpha)
    sphi, cphi = np.sin(phi), np.cos(phi)
    cn = cl * cphi + cd * sphi
    ct = cl * sphi - cd * cphi
    w2 = (wind_speed * (1.0 - a)) ** 2 + (omega * r * (1.0 + ap)) ** 2
    q = 0.5 * rho * w2 * chord * geom.n_blades * geom.widths
    q = np.where(conv, q, 0.0)
    thrust = float(np.sum(q * cn))
    torque = float(np.sum(q * ct * r))
    power = torque * omega
    cp = power / (0.5 * rho * geom.rotor_area * wind_speed**3)

    n_bad = int(np.count_nonzero(~conv))
    if n_bad:
        log.debug("%d segment(s) unconverged at U=%g, rpm=%g, pitch=%g", n_bad, wind_speed, rotor_speed_rpm, pitch)
    w = np.sqrt(w2)
    per_segment = tuple(
        SegmentFlowState(float(a[i]), float(ap[i]), float(w[i]), float(alpha[i]), float(sigma[i]),
                         float(np.degrees(phi[i])), bool(conv[i]), float(res[i]))
        for i in range(r.size)
    )
    return RotorPerformance(cp=float(cp), power=float(power), thrust=thrust, torque=torque,
                            per_segment=per_segment, n_unconverged=n_bad)


# --- file formats -----------------------------------------------------------

def load_polar(path: str | Path, name: str | None = None) -> AirfoilPolar:
    """Read a whitespace-separated polar: alpha_deg, cl, cd[, dstar_over_chord]."""
    path = Path(path)
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] not in (3, 4):
        raise ValueError(f"{path}: expected 3 or 4 columns, found {data.shape[1]}")
    ds = data[:, 3] if data.shape[1] == 4 else None
    return AirfoilPolar(data[:, 0], data[:, 1], data[:, 2], ds, name=name or path.stem)


def load_geometry(path: str | Path, polar_dir: str | Path | None = None) -> TurbineGeometry:
    """Read a blade table plus its polars.

    Header lines ``# key: value`` carry ``blade_radius``, ``hub_radius``,
    ``n_blades`` and ``rated_power``; rows are
    ``station_m width_m chord_m twist_deg airfoil_id``. Polars are read from
    ``<polar_dir>/<airfoil_id>.dat``.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"geometry file not found: {path}")
    polar_dir = Path(polar_dir) if polar_dir is not None else path.parent
    meta: dict[str, str] = {}
    rows = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                k, v = body.split(":", 1)
                meta[k.strip()] = v.strip()
            continue
        rows.append(line.split())
    try:
        segments = [BladeSegment(float(r[0]), float(r[1]), float(r[2]), float(r[3]), r[4]) for r in rows]
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: malformed blade row ({exc})") from None
    polars = {}
    for aid in sorted({s.airfoil_id for s in segments}):
        ppath = polar_dir / f"{aid}.dat"
        if not ppath.is_file():
            raise FileNotFoundError(f"polar file not found: {ppath}")
        polars[aid] = load_polar(ppath, aid)
    return TurbineGeometry(
        blade_radius=float(meta["blade_radius"]),
        hub_radius=float(meta["hub_radius"]),
        n_blades=int(meta.get("n_blades", 3)),
        segments=tuple(segments),
        polars=polars,
        rated_power=float(meta.get("rated_power", 2.3e6)),
    )


def data_dir() -> Path:
    return Path(__file__).parent / "data"


_DEFAULT: TurbineGeometry | None = None


def default_turbine() -> TurbineGeometry:
    """The bundled 46.5 m, 3-blade, 20-segment rotor."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_geometry(data_dir() / "turbine.dat", data_dir() / "polars")
    return _DEFAULT
