"""Rotor self-noise at a ground observer.

Three broadband mechanisms per blade segment, each a semi-empirical
scaling law evaluated on the 31 one-third-octave bands 10 Hz - 10 kHz:

* turbulent-boundary-layer trailing-edge noise (BPM suction, pressure and
  angle-of-attack contributions),
* tip-vortex formation noise (BPM, rounded tip, outermost segment only),
* turbulent inflow noise (Amiet/Lowson with the low-frequency correction).

Source levels are computed at 1 m, summed as uncorrelated sources over
segments, blades and a ring of azimuth positions, and attenuated by
spherical spreading to the observer. Sources are omnidirectional.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import gamma as _gamma

import numpy as np

from .turbine_model import AirfoilPolar, BladeSegment, SegmentFlowState, TurbineGeometry

SILENCE_DB = -300.0

# one-time anchor of absolute level. At 10 m/s the best noise-admissible
# (45 dB A, 100 m ground observer) settings reachable from the four published
# steady-wind starts then sit at their published final rotor speeds,
# 10.9-11.1 rpm; any gain in [-2.02, -1.78] dB does this.
CALIBRATION_GAIN_DB = -2.0

TBL_TE = "tbl_te"
TIP_VORTEX = "tip_vortex"
INFLOW = "inflow"
ALL_MECHANISMS = frozenset({TBL_TE, TIP_VORTEX, INFLOW})

BAND_CENTERS = 1000.0 * 10.0 ** (np.arange(-20, 11) / 10.0)


class GridMismatch(ValueError):
    pass


class AlreadyWeighted(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SplSpectrum:
    band_centers: np.ndarray
    levels: np.ndarray
    weighted: bool = False

    def __post_init__(self):
        bc = np.asarray(self.band_centers, dtype=float)
        lv = np.asarray(self.levels, dtype=float)
        if bc.shape != lv.shape:
            raise ValueError("levels must match band grid")
        if not np.all(np.isfinite(lv)):
            raise ValueError("levels must be finite; use SILENCE_DB for empty bands")
        object.__setattr__(self, "band_centers", bc)
        object.__setattr__(self, "levels", lv)

    @classmethod
    def silence(cls, weighted: bool = False) -> SplSpectrum:
        return cls(BAND_CENTERS.copy(), np.full(BAND_CENTERS.size, SILENCE_DB), weighted)

    @property
    def is_silent(self) -> bool:
        return bool(np.all(self.levels <= SILENCE_DB))


@dataclass(frozen=True)
class ObserverLocation:
    """Observer position in the turbine frame: x downwind, z up, hub at the origin."""

    position: tuple[float, float, float]

    @classmethod
    def ground_downwind(cls, distance: float = 100.0, hub_height: float = 80.0) -> ObserverLocation:
        return cls((float(distance), 0.0, -float(hub_height)))

    def scaled(self, factor: float) -> ObserverLocation:
        return ObserverLocation(tuple(factor * c for c in self.position))


@dataclass(frozen=True)
class AcousticConfig:
    speed_of_sound: float = 340.46
    kinematic_viscosity: float = 1.4529e-5
    rho: float = 1.225
    turbulence_intensity: float = 0.10
    turbulence_length_scale: float = 42.0
    gain_db: float = CALIBRATION_GAIN_DB
    n_azimuth: int = 12
    mechanisms: frozenset = field(default_factory=lambda: ALL_MECHANISMS)

    def with_gain(self, gain_db: float) -> AcousticConfig:
        return replace(self, gain_db=gain_db)


# --- decibel algebra ---------------------------------------------------------

def _energy(levels):
    levels = np.asarray(levels, dtype=float)
    return np.where(levels <= SILENCE_DB, 0.0, 10.0 ** (levels / 10.0))


def _level(energy):
    energy = np.asarray(energy, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(energy > 0.0, 10.0 * np.log10(np.where(energy > 0, energy, 1.0)), SILENCE_DB)
    return np.maximum(out, SILENCE_DB)


def combine_uncorrelated(spectra) -> SplSpectrum:
    """Energetic per-band sum of uncorrelated spectra on a common grid."""
    spectra = list(spectra)
    if not spectra:
        return SplSpectrum.silence()
    ref = spectra[0]
    for s in spectra[1:]:
        if s.weighted != ref.weighted or s.band_centers.shape != ref.band_centers.shape \
                or not np.array_equal(s.band_centers, ref.band_centers):
            raise GridMismatch("spectra must share band grid and weighting")
    total = np.sum([_energy(s.levels) for s in spectra], axis=0)
    return SplSpectrum(ref.band_centers, _level(total), ref.weighted)


def a_weighting_db(freq):
    """IEC 61672 A-weighting correction in dB."""
    f2 = np.asarray(freq, dtype=float) ** 2
    ra = (12194.0**2 * f2**2) / (
        (f2 + 20.6**2) * np.sqrt((f2 + 107.7**2) * (f2 + 737.9**2)) * (f2 + 12194.0**2))
    return 20.0 * np.log10(ra) + 2.0


def a_weight(spec: SplSpectrum) -> SplSpectrum:
    if spec.weighted:
        raise AlreadyWeighted("spectrum is already A-weighted")
    silent = spec.levels <= SILENCE_DB
    levels = np.where(silent, SILENCE_DB, spec.levels + a_weighting_db(spec.band_centers))
    return SplSpectrum(spec.band_centers, np.maximum(levels, SILENCE_DB), True)


def overall_spl(spec: SplSpectrum) -> float:
    return float(_level(np.sum(_energy(spec.levels))))


# --- BPM spectral shapes -------------------------------------------------------

def _a_min(a):
    return np.where(a < 0.204, np.sqrt(np.maximum(67.552 - 886.788 * a**2, 0.0)) - 8.219,
                    np.where(a <= 0.244, -32.665 * a + 3.981,
                             -142.795 * a**3 + 103.656 * a**2 - 57.757 * a + 6.006))


def _a_max(a):
    return np.where(a < 0.13, np.sqrt(np.maximum(67.552 - 886.788 * a**2, 0.0)) - 8.219,
                    np.where(a <= 0.321, -15.901 * a + 1.098,
                             -4.669 * a**3 + 3.491 * a**2 - 16.699 * a + 1.149))


def _shape_a(st_ratio, re):
    a = np.abs(np.log10(st_ratio))
    a0 = np.where(re < 9.52e4, 0.57, np.where(re <= 8.57e5, -9.57e-13 * (re - 8.57e5) ** 2 + 1.13, 1.13))
    ar = (-20.0 - _a_min(a0)) / (_a_max(a0) - _a_min(a0))
    return _a_min(a) + ar * (_a_max(a) - _a_min(a))


def _b_min(b):
    return np.where(b < 0.13, np.sqrt(np.maximum(16.888 - 886.788 * b**2, 0.0)) - 4.109,
                    np.where(b <= 0.145, -83.607 * b + 8.138,
                             -817.81 * b**3 + 355.21 * b**2 - 135.024 * b + 10.619))


def _b_max(b):
    return np.where(b < 0.10, np.sqrt(np.maximum(16.888 - 886.788 * b**2, 0.0)) - 4.109,
                    np.where(b <= 0.187, -31.33 * b + 1.854,
                             -80.541 * b**3 + 44.174 * b**2 - 39.381 * b + 2.344))


def _shape_b(st_ratio, re):
    b = np.abs(np.log10(st_ratio))
    b0 = np.where(re < 9.52e4, 0.30, np.where(re <= 8.57e5, -4.48e-13 * (re - 8.57e5) ** 2 + 0.56, 0.56))
    br = (-20.0 - _b_min(b0)) / (_b_max(b0) - _b_min(b0))
    return _b_min(b) + br * (_b_max(b) - _b_min(b))


def _k1(re):
    return np.where(re < 2.47e5, -4.31 * np.log10(re) + 156.3,
                    np.where(re <= 8.0e5, -9.0 * np.log10(re) + 181.6, 128.5))


# --- per-mechanism source levels at 1 m, shape (n_segments, n_bands) ----------

def _displacement_thickness(polar, alpha, chord, re):
    """Suction- and pressure-side displacement thickness in metres."""
    if polar is not None and polar.dstar_over_chord is not None:
        a0 = polar.zero_lift_angle
        lo, hi = polar.alpha_range
        upper = np.interp(np.clip(alpha, lo, hi), polar.angles, polar.dstar_over_chord)
        lower = np.interp(np.clip(2.0 * a0 - alpha, lo, hi), polar.angles, polar.dstar_over_chord)
        return upper * chord, lower * chord
    flat = 0.048 * re ** (-0.2) * chord
    return flat, flat


def _tbl_te_levels(w, alpha_eff, chord, span, ds_s, ds_p, cfg, f):
    m = (w / cfg.speed_of_sound)[:, None]
    re = (w * chord / cfg.kinematic_viscosity)[:, None]
    ds_s = ds_s[:, None]
    ds_p = ds_p[:, None]
    ae = np.abs(alpha_eff)[:, None]
    span = span[:, None]
    wv = w[:, None]

    st1 = 0.02 * m ** -0.6
    st2 = st1 * np.where(ae < 1.33, 1.0, np.where(ae <= 12.5, 10.0 ** (0.0054 * (ae - 1.33) ** 2), 4.72))
    st1bar = 0.5 * (st1 + st2)
    st_s = f * ds_s / wv
    st_p = f * ds_p / wv

    k1 = _k1(re)
    re_dp = wv * ds_p / cfg.kinematic_viscosity
    dk1 = np.where(re_dp <= 5000.0, ae * (1.43 * np.log10(re_dp) - 5.29), 0.0)
    gam = 27.094 * m + 3.31
    gam0 = 23.43 * m + 4.651
    beta = 72.65 * m + 10.74
    beta0 = -34.19 * m - 13.82
    k2_extra = np.where(ae < gam0 - gam, -1000.0,
                        np.where(ae <= gam0 + gam,
                                 np.sqrt(np.maximum(beta**2 - (beta / gam) ** 2 * (ae - gam0) ** 2, 0.0)) + beta0,
                                 -12.0))
    k2 = k1 + k2_extra

    base_s = 10.0 * np.log10(ds_s * m**5 * span)
    base_p = 10.0 * np.log10(ds_p * m**5 * span)
    stalled = ae > np.minimum(12.5, gam0)
    spl_s = np.where(stalled, SILENCE_DB, base_s + _shape_a(st_s / st1bar, re) + k1 - 3.0)
    spl_p = np.where(stalled, SILENCE_DB, base_p + _shape_a(st_p / st1, re) + k1 - 3.0 + dk1)
    spl_a = np.where(stalled, base_s + _shape_a(st_s / st2, 3.0 * re) + k2,
                     base_s + _shape_b(st_s / st2, re) + k2)
    return _level(_energy(spl_s) + _energy(spl_p) + _energy(np.maximum(spl_a, SILENCE_DB)))


def _tip_vortex_levels(w, alpha_tip, chord, cfg, f):
    at = np.abs(alpha_tip)[:, None]
    c = chord[:, None]
    m = (w / cfg.speed_of_sound)[:, None]
    m_max = m * (1.0 + 0.036 * at)
    u_max = m_max * cfg.speed_of_sound
    ell = 0.008 * at * c
    with np.errstate(divide="ignore", invalid="ignore"):
        st = f * ell / u_max
        spl = 10.0 * np.log10(m**2 * m_max**3 * ell**2) - 30.5 * (np.log10(st) + 0.3) ** 2 + 126.0
    return np.where(ell > 0.0, np.nan_to_num(spl, nan=SILENCE_DB, neginf=SILENCE_DB), SILENCE_DB)


_KE_FACTOR = np.sqrt(np.pi) * _gamma(5.0 / 6.0) / _gamma(1.0 / 3.0)


def _inflow_levels(w, wind_speed, chord, span, cfg, f):
    wv = w[:, None]
    c = chord[:, None]
    span = span[:, None]
    m = wv / cfg.speed_of_sound
    beta2 = 1.0 - m**2
    # turbulence intensity seen by the section: freestream fluctuation over local speed
    i_local = cfg.turbulence_intensity * wind_speed / wv
    lt = cfg.turbulence_length_scale
    ke = _KE_FACTOR / lt
    kh = (2.0 * np.pi * f / wv) / ke
    spl_h = 10.0 * np.log10(cfg.rho**2 * cfg.speed_of_sound**4 * lt * span / 2.0
                            * m**5 * i_local**2 * kh**3 / (1.0 + kh**2) ** (7.0 / 3.0)) + 78.4
    kr = np.pi * f * c / wv
    s2 = 1.0 / (2.0 * np.pi * kr / beta2 + 1.0 / (1.0 + 2.4 * kr / beta2))
    lfc = 10.0 * s2 * m * kr**2 / beta2
    return spl_h + 10.0 * np.log10(lfc / (1.0 + lfc))


def source_levels(w, alpha, chord, span, polar, wind_speed, is_tip, mechanisms, cfg):
    """Band levels at 1 m for arrays of segments (no gain, no spreading)."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    chord = np.atleast_1d(np.asarray(chord, dtype=float))
    span = np.atleast_1d(np.asarray(span, dtype=float))
    is_tip = np.atleast_1d(np.asarray(is_tip, dtype=bool))
    f = BAND_CENTERS[None, :]
    energy = np.zeros((w.size, BAND_CENTERS.size))
    live = (w > 0) & (span > 0)
    if not np.any(live):
        return _level(energy)
    a0 = polar.zero_lift_angle if polar is not None else 0.0
    alpha_eff = alpha - a0
    if TBL_TE in mechanisms:
        re = w * chord / cfg.kinematic_viscosity
        ds_s, ds_p = _displacement_thickness(polar, alpha, chord, re)
        lv = _tbl_te_levels(w[live], alpha_eff[live], chord[live], span[live], ds_s[live], ds_p[live], cfg, f)
        energy[live] += _energy(lv)
    if INFLOW in mechanisms:
        lv = _inflow_levels(w[live], wind_speed, chord[live], span[live], cfg, f)
        energy[live] += _energy(lv)
    if TIP_VORTEX in mechanisms:
        tip = live & is_tip
        if np.any(tip):
            lv = _tip_vortex_levels(w[tip], alpha_eff[tip], chord[tip], cfg, f)
            energy[tip] += _energy(lv)
    return _level(energy)


def _distances(radii, observer, n_azimuth, n_blades):
    """Source-observer distances, shape (n_segments, n_blades * n_azimuth)."""
    psi = 2.0 * np.pi * np.arange(n_blades * n_azimuth) / (n_blades * n_azimuth)
    ox, oy, oz = observer.position
    r = np.asarray(radii, dtype=float)[:, None]
    dy = oy - r * np.sin(psi)[None, :]
    dz = oz - r * np.cos(psi)[None, :]
    return np.sqrt(ox**2 + dy**2 + dz**2)


def segment_noise(flow: SegmentFlowState, segment: BladeSegment, observer: ObserverLocation,
                  mechanisms=ALL_MECHANISMS, *, polar: AirfoilPolar | None = None, wind_speed: float = 0.0,
                  is_tip: bool = False, azimuth: float = 0.0,
                  config: AcousticConfig = AcousticConfig()) -> SplSpectrum:
    """Unweighted spectrum at ``observer`` from one segment at one blade azimuth."""
    if flow.relative_velocity <= 0:
        raise ValueError("relative velocity must be positive")
    mechanisms = frozenset(mechanisms)
    if not mechanisms or segment.span_width <= 0:
        return SplSpectrum.silence()
    lv = source_levels(flow.relative_velocity, flow.angle_of_attack, segment.chord, segment.span_width,
                       polar, wind_speed, is_tip, mechanisms, config)[0]
    ox, oy, oz = observer.position
    r = segment.radial_station
    d = np.sqrt(ox**2 + (oy - r * np.sin(azimuth)) ** 2 + (oz - r * np.cos(azimuth)) ** 2)
    out = np.where(lv <= SILENCE_DB, SILENCE_DB, lv + config.gain_db - 20.0 * np.log10(d))
    return SplSpectrum(BAND_CENTERS.copy(), np.maximum(out, SILENCE_DB), False)


def turbine_spectrum(geom: TurbineGeometry, flows, wind_speed: float, observer: ObserverLocation,
                     config: AcousticConfig = AcousticConfig()) -> SplSpectrum:
    """Unweighted rotor spectrum at the observer, time-averaged over rotor azimuth."""
    segs = geom.segments
    polars = {id(geom.polars[s.airfoil_id]) for s in segs}
    w = np.array([fl.relative_velocity for fl in flows])
    alpha = np.array([fl.angle_of_attack for fl in flows])
    is_tip = np.zeros(len(segs), dtype=bool)
    is_tip[-1] = True
    if len(polars) == 1:
        lv = source_levels(w, alpha, geom.chords, geom.widths, geom.polars[segs[0].airfoil_id],
                           wind_speed, is_tip, config.mechanisms, config)
    else:
        lv = np.vstack([
            source_levels(w[i], alpha[i], s.chord, s.span_width, geom.polars[s.airfoil_id],
                          wind_speed, is_tip[i], config.mechanisms, config)
            for i, s in enumerate(segs)])
    d = _distances(geom.stations, observer, config.n_azimuth, geom.n_blades)
    # every blade visits every azimuth position: mean over the ring times blade count
    spread = geom.n_blades * np.mean(1.0 / d**2, axis=1)
    energy = np.sum(_energy(lv) * spread[:, None], axis=0) * 10.0 ** (config.gain_db / 10.0)
    return SplSpectrum(BAND_CENTERS.copy(), _level(energy), False)


def turbine_spl(geom: TurbineGeometry, flows, wind_speed: float, rotor_speed_rpm: float, pitch: float,
                observer: ObserverLocation, config: AcousticConfig = AcousticConfig()):
    """(OASPL in dB A, A-weighted spectrum) at the observer.

    ``rotor_speed_rpm`` and ``pitch`` only identify the operating point; the
    flow states already carry their effect.
    """
    spec = a_weight(turbine_spectrum(geom, flows, wind_speed, observer, config))
    return overall_spl(spec), spec


def write_spectrum(path, spec: SplSpectrum, header_comment: str | None = None):
    with open(path, "w") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("band_hz,level_db\n")
        for f, lv in zip(spec.band_centers, spec.levels):
            fh.write(f"{f:.6g},{lv:.6f}\n")
