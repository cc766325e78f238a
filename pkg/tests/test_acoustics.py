import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quietwind import acoustics as ac
from quietwind.acoustics import (
    BAND_CENTERS,
    INFLOW,
    SILENCE_DB,
    TBL_TE,
    TIP_VORTEX,
    AcousticConfig,
    AlreadyWeighted,
    GridMismatch,
    ObserverLocation,
    SplSpectrum,
    a_weight,
    a_weighting_db,
    combine_uncorrelated,
    overall_spl,
    segment_noise,
    turbine_spectrum,
    turbine_spl,
    write_spectrum,
)
from quietwind.turbine_model import SegmentFlowState, default_turbine, rotor_performance

OBSERVER = ObserverLocation.ground_downwind()


@pytest.fixture(scope="module")
def geom():
    return default_turbine()


def flat(level, weighted=False):
    return SplSpectrum(BAND_CENTERS.copy(), np.full(BAND_CENTERS.size, float(level)), weighted)


def single_band(level, band=20):
    lv = np.full(BAND_CENTERS.size, SILENCE_DB)
    lv[band] = level
    return SplSpectrum(BAND_CENTERS.copy(), lv)


def rotor_spl(geom, u, rpm, pitch, observer=OBSERVER, config=AcousticConfig()):
    perf = rotor_performance(geom, u, rpm, pitch)
    return turbine_spl(geom, perf.per_segment, u, rpm, pitch, observer, config)


# --- band grid and spectra ---------------------------------------------------------

def test_band_grid_is_preferred_third_octave_series():
    assert BAND_CENTERS.size == 31
    assert BAND_CENTERS[0] == pytest.approx(10.0)
    assert BAND_CENTERS[-1] == pytest.approx(10000.0)
    assert np.allclose(np.diff(np.log10(BAND_CENTERS)), 0.1)


def test_spectrum_rejects_non_finite_levels():
    lv = np.zeros(31)
    lv[3] = -np.inf
    with pytest.raises(ValueError):
        SplSpectrum(BAND_CENTERS, lv)


# --- decibel algebra ----------------------------------------------------------------

def test_two_equal_sources_add_three_db():
    out = combine_uncorrelated([flat(40.0), flat(40.0)])
    assert np.allclose(out.levels, 43.0103, atol=1e-4)


def test_three_equal_sources():
    out = combine_uncorrelated([flat(30.0)] * 3)
    assert np.allclose(out.levels, 34.7712, atol=1e-4)


def test_silence_is_additive_identity():
    s = flat(37.5)
    out = combine_uncorrelated([s, SplSpectrum.silence()])
    assert np.array_equal(out.levels, s.levels)
    assert combine_uncorrelated([]).is_silent


def test_grid_and_weighting_mismatch():
    with pytest.raises(GridMismatch):
        combine_uncorrelated([flat(30.0), flat(30.0, weighted=True)])
    other = SplSpectrum(BAND_CENTERS * 1.01, np.zeros(31))
    with pytest.raises(GridMismatch):
        combine_uncorrelated([flat(30.0), other])


levels = st.lists(st.floats(0.0, 90.0), min_size=31, max_size=31)


@settings(max_examples=50, deadline=None)
@given(a=levels, b=levels, c=levels)
def test_combination_is_commutative_and_associative(a, b, c):
    A, B, C = (SplSpectrum(BAND_CENTERS, np.array(x)) for x in (a, b, c))
    abc = combine_uncorrelated([A, B, C]).levels
    assert np.allclose(combine_uncorrelated([C, A, B]).levels, abc, atol=1e-9)
    nested = combine_uncorrelated([combine_uncorrelated([A, B]), C]).levels
    assert np.allclose(nested, abc, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(a=levels, b=levels)
def test_adding_a_source_never_lowers_oaspl(a, b):
    A, B = (SplSpectrum(BAND_CENTERS, np.array(x)) for x in (a, b))
    assert overall_spl(combine_uncorrelated([A, B])) >= overall_spl(A)


@settings(max_examples=30, deadline=None)
@given(a=levels)
def test_doubling_identical_sources(a):
    A = SplSpectrum(BAND_CENTERS, np.array(a))
    assert overall_spl(combine_uncorrelated([A, A])) - overall_spl(A) == pytest.approx(
        10.0 * math.log10(2.0), abs=1e-9)


def test_overall_spl_closed_forms():
    assert overall_spl(single_band(45.0)) == pytest.approx(45.0, abs=1e-12)
    assert overall_spl(flat(30.0)) == pytest.approx(30.0 + 10.0 * math.log10(31.0), abs=1e-9)
    assert round(overall_spl(flat(30.0)), 2) == 44.91
    assert overall_spl(SplSpectrum.silence()) == SILENCE_DB


# --- A-weighting --------------------------------------------------------------------

@pytest.mark.parametrize("freq,expected,tol", [(1000.0, 0.0, 0.1), (100.0, -19.1, 0.2), (10000.0, -2.5, 0.2)])
def test_a_weighting_reference_values(freq, expected, tol):
    assert a_weighting_db(freq) == pytest.approx(expected, abs=tol)


def test_a_weight_applies_curve_once():
    w = a_weight(flat(50.0))
    assert w.weighted
    assert np.allclose(w.levels, 50.0 + a_weighting_db(BAND_CENTERS))
    with pytest.raises(AlreadyWeighted):
        a_weight(w)


def test_a_weight_keeps_silence():
    w = a_weight(SplSpectrum.silence())
    assert w.is_silent


# --- segment sources ---------------------------------------------------------------

@pytest.fixture(scope="module")
def tip_flow(geom):
    perf = rotor_performance(geom, 10.0, 12.0, 2.0)
    return perf.per_segment[-1], geom.segments[-1]


def _seg_oaspl(flow, seg, geom, mechanisms, **kw):
    spec = segment_noise(flow, seg, OBSERVER, mechanisms, polar=geom.polars[seg.airfoil_id],
                         wind_speed=10.0, **kw)
    return overall_spl(spec)


@pytest.mark.parametrize("mechanism", [TBL_TE, TIP_VORTEX, INFLOW])
def test_each_mechanism_grows_with_relative_velocity(geom, tip_flow, mechanism):
    flow, seg = tip_flow
    fast = SegmentFlowState(flow.axial_induction, flow.tangential_induction, 2.0 * flow.relative_velocity,
                            flow.angle_of_attack, flow.local_solidity)
    slow_db = _seg_oaspl(flow, seg, geom, {mechanism}, is_tip=True)
    fast_db = _seg_oaspl(fast, seg, geom, {mechanism}, is_tip=True)
    assert slow_db > SILENCE_DB
    assert fast_db > slow_db


def test_no_mechanisms_is_silence(geom, tip_flow):
    flow, seg = tip_flow
    assert segment_noise(flow, seg, OBSERVER, set()).is_silent


def test_tip_vortex_only_at_the_tip(geom, tip_flow):
    flow, seg = tip_flow
    assert _seg_oaspl(flow, seg, geom, {TIP_VORTEX}, is_tip=False) == SILENCE_DB
    assert _seg_oaspl(flow, seg, geom, {TIP_VORTEX}, is_tip=True) > SILENCE_DB


def test_zero_span_segment_is_silent(geom, tip_flow):
    flow, seg = tip_flow
    from dataclasses import replace
    assert segment_noise(flow, replace(seg, span_width=0.0), OBSERVER).is_silent


def test_segment_noise_needs_positive_velocity(tip_flow):
    flow, seg = tip_flow
    still = SegmentFlowState(0.0, 0.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        segment_noise(still, seg, OBSERVER)


# --- whole rotor ------------------------------------------------------------------

def test_oaspl_rises_with_rotor_speed(geom):
    values = [rotor_spl(geom, 12.0, rpm, -1.0)[0] for rpm in np.arange(12.0, 17.01, 0.5)]
    assert np.all(np.diff(values) > 0)


def test_distance_doubling(geom):
    near = rotor_spl(geom, 10.0, 12.0, 2.0)[0]
    far = rotor_spl(geom, 10.0, 12.0, 2.0, observer=OBSERVER.scaled(2.0))[0]
    assert near - far == pytest.approx(6.0, abs=0.5)


def test_pitch_reshapes_spectrum_mainly_through_trailing_edge(geom):
    def spectrum(pitch, mechanisms):
        perf = rotor_performance(geom, 10.0, 12.0, pitch)
        cfg = AcousticConfig(mechanisms=frozenset(mechanisms))
        return turbine_spectrum(geom, perf.per_segment, 10.0, OBSERVER, cfg).levels

    delta = spectrum(6.0, {TBL_TE, TIP_VORTEX, INFLOW}) - spectrum(0.0, {TBL_TE, TIP_VORTEX, INFLOW})
    assert np.ptp(delta) > 1.0
    te = np.abs(spectrum(6.0, {TBL_TE}) - spectrum(0.0, {TBL_TE})).max()
    inflow = np.abs(spectrum(6.0, {INFLOW}) - spectrum(0.0, {INFLOW})).max()
    assert te > inflow


def test_gain_is_a_uniform_offset(geom):
    base = rotor_spl(geom, 10.0, 11.0, 4.0)[0]
    louder = rotor_spl(geom, 10.0, 11.0, 4.0, config=AcousticConfig().with_gain(ac.CALIBRATION_GAIN_DB + 3.0))[0]
    assert louder - base == pytest.approx(3.0, abs=1e-9)


def test_calibration_brackets_threshold_regime(geom):
    oaspl, spec = rotor_spl(geom, 10.0, 11.0, 4.0)
    assert 40.0 <= oaspl <= 50.0
    assert spec.weighted


def test_write_spectrum(tmp_path):
    path = tmp_path / "s.csv"
    write_spectrum(path, flat(42.0), "demo")
    lines = path.read_text().splitlines()
    assert lines[0] == "# demo"
    assert lines[1] == "band_hz,level_db"
    assert len(lines) == 33
