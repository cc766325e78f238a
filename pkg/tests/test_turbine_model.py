import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quietwind.turbine_model import (
    BETZ_LIMIT,
    DEFAULT_RHO,
    RPM_TO_RAD_S,
    AirfoilPolar,
    BladeSegment,
    NoConvergence,
    OutOfRange,
    TurbineGeometry,
    default_turbine,
    interpolate_polar,
    load_geometry,
    load_polar,
    rotor_performance,
    solve_segment,
)


@pytest.fixture(scope="module")
def geom():
    return default_turbine()


def _with_polar(geom, polar):
    return TurbineGeometry(geom.blade_radius, geom.hub_radius, geom.n_blades, geom.segments,
                           {k: polar for k in geom.polars}, geom.rated_power)


# --- polar interpolation -----------------------------------------------------------

def test_interpolation_hits_nodes_and_midpoints():
    p = AirfoilPolar([0.0, 2.0, 4.0], [0.2, 0.4, 0.9], [0.01, 0.02, 0.05])
    assert interpolate_polar(p, 2.0) == (0.4, 0.02)
    cl, cd = interpolate_polar(p, 3.0)
    assert cl == pytest.approx(0.65, abs=1e-15)
    assert cd == pytest.approx(0.035, abs=1e-15)


def test_interpolation_outside_table_raises():
    p = AirfoilPolar(np.arange(-10.0, 25.5, 0.5), np.zeros(71), np.full(71, 0.01))
    with pytest.raises(OutOfRange):
        interpolate_polar(p, 26.0)


def test_polar_rejects_bad_tables():
    with pytest.raises(ValueError):
        AirfoilPolar([0.0, 0.0, 1.0], [0, 0, 0], [0, 0, 0])
    with pytest.raises(ValueError):
        AirfoilPolar([0.0, 1.0], [0, 0], [-0.1, 0])


def test_zero_lift_angle_of_bundled_polar(geom):
    assert geom.polars["cambered"].zero_lift_angle == pytest.approx(-2.5, abs=0.05)


# --- single segment ---------------------------------------------------------------

def _actuator_disc_rotor(lam_r=6.0, alpha_design=6.0):
    """One drag-free segment designed for the wake-rotation optimum at a = 1/3.

    At a = 1/3 the optimum a' obeys a'(1 + a') lambda_r^2 = a(1 - a), and the
    blade-element solidity follows from the axial momentum balance. With zero
    drag the tangential balance is then satisfied automatically, so a = 1/3 is
    an exact fixed point of the BEM equations.
    """
    a = 1.0 / 3.0
    ap = 0.5 * (-1.0 + math.sqrt(1.0 + 4.0 * a * (1.0 - a) / lam_r**2))
    phi = math.atan((1.0 - a) / ((1.0 + ap) * lam_r))
    cl_design = 2.0 * math.pi * math.radians(alpha_design)
    sigma = 4.0 * a * math.sin(phi) ** 2 / ((1.0 - a) * math.cos(phi) * cl_design)
    r = 24.0
    n_blades = 3
    chord = sigma * 2.0 * math.pi * r / n_blades
    twist = math.degrees(phi) - alpha_design
    angles = np.arange(-30.0, 30.5, 0.5)
    polar = AirfoilPolar(angles, 2.0 * np.pi * np.radians(angles), np.zeros_like(angles), name="flat")
    seg = BladeSegment(r, 45.0, chord, twist, "flat")
    geom = TurbineGeometry(46.5, 1.5, n_blades, (seg,), {"flat": polar})
    return geom, seg, lam_r / r


def test_idealised_rotor_reaches_betz_induction():
    geom, seg, omega_per_u = _actuator_disc_rotor()
    u = 10.0
    flow = solve_segment(geom, seg, u, omega_per_u * u, 0.0, tip_loss=False)
    assert flow.axial_induction == pytest.approx(1.0 / 3.0, abs=1e-3)
    assert flow.converged


def test_near_stopped_rotor_is_deep_stall(geom):
    # the bundled polar spans the full circle, so the section lands on the
    # post-stall branch instead of falling off the table
    seg = geom.segments[10]
    try:
        flow = solve_segment(geom, seg, 10.0, 0.01, 0.0)
    except (OutOfRange, NoConvergence):
        return
    assert flow.angle_of_attack > 60.0
    assert flow.inflow_angle == pytest.approx(90.0, abs=5.0)


def test_short_polar_raises_out_of_range(geom):
    seg = geom.segments[10]
    short = AirfoilPolar(np.arange(-10.0, 25.5, 0.5), np.zeros(71), np.full(71, 0.01))
    g = _with_polar(geom, short)
    with pytest.raises(OutOfRange):
        solve_segment(g, seg, 10.0, 0.01, 0.0)


def test_solve_segment_requires_positive_inputs(geom):
    with pytest.raises(ValueError):
        solve_segment(geom, geom.segments[0], 0.0, 1.0, 0.0)


@pytest.mark.parametrize("u,rpm,pitch", [(10.0, 12.0, 0.0), (6.0, 9.0, -3.0), (15.0, 17.0, 8.0)])
def test_converged_induction_in_unit_interval(geom, u, rpm, pitch):
    perf = rotor_performance(geom, u, rpm, pitch)
    for s in perf.per_segment:
        if s.converged:
            assert 0.0 <= s.axial_induction < 1.0


# --- rotor --------------------------------------------------------------------------

def test_near_optimal_cp_band(geom):
    u = 10.0
    rpm = 8.0 * u / geom.blade_radius / RPM_TO_RAD_S
    best = max(rotor_performance(geom, u, rpm, th).cp for th in np.arange(-2.0, 2.5, 0.5))
    assert 0.40 <= best <= 0.55


def test_cp_monotone_over_operating_band(geom):
    cps = [rotor_performance(geom, 12.0, rpm, -1.0).cp for rpm in np.arange(12.0, 17.01, 0.5)]
    assert np.all(np.diff(cps) > 0)


def test_power_identities(geom):
    u, rpm = 9.0, 13.5
    perf = rotor_performance(geom, u, rpm, 2.0)
    assert perf.power == pytest.approx(perf.torque * rpm * RPM_TO_RAD_S, rel=1e-9)
    assert perf.power == pytest.approx(0.5 * DEFAULT_RHO * geom.rotor_area * perf.cp * u**3, rel=1e-9)
    cp, power, thrust, per_segment = perf
    assert len(per_segment) == len(geom.segments)
    assert thrust > 0


def test_zero_lift_polar_gives_no_power(geom):
    p = geom.polars["cambered"]
    dead = _with_polar(geom, AirfoilPolar(p.angles, np.zeros_like(p.cl), p.cd))
    for rpm in (8.0, 12.0, 16.0):
        assert rotor_performance(dead, 10.0, rpm, 0.0).cp <= 0.0


def test_cube_law_with_drag_free_polar(geom):
    p = geom.polars["cambered"]
    clean = _with_polar(geom, AirfoilPolar(p.angles, p.cl, np.zeros_like(p.cd)))
    lam = 7.0
    cps = []
    for u in (5.0, 8.0, 12.0):
        rpm = lam * u / geom.blade_radius / RPM_TO_RAD_S
        cps.append(rotor_performance(clean, u, rpm, 1.0).cp)
    assert np.ptp(cps) < 1e-6


def test_solver_is_deterministic(geom):
    a = rotor_performance(geom, 11.3, 14.2, 3.3)
    b = rotor_performance(geom, 11.3, 14.2, 3.3)
    assert a.cp == b.cp and a.thrust == b.thrust
    assert [s.axial_induction for s in a.per_segment] == [s.axial_induction for s in b.per_segment]


def test_default_tolerance_matches_tight_oracle(geom):
    worst = 0.0
    for rpm in np.linspace(6.0, 18.0, 20):
        for th in np.linspace(-5.0, 10.0, 20):
            u = 10.0
            lam = rpm * RPM_TO_RAD_S * geom.blade_radius / u
            if not 3.0 <= lam <= 12.0:
                continue
            cp = rotor_performance(geom, u, rpm, th).cp
            ref = rotor_performance(geom, u, rpm, th, tol=1e-9, max_iter=5000).cp
            worst = max(worst, abs(cp - ref))
    assert worst < 1e-5


def test_rejects_nonpositive_inputs(geom):
    with pytest.raises(ValueError):
        rotor_performance(geom, 10.0, 0.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(u=st.floats(4.0, 16.0), rpm=st.floats(6.0, 18.0), pitch=st.floats(-5.0, 10.0))
def test_betz_bound_holds_everywhere(geom, u, rpm, pitch):
    lam = rpm * RPM_TO_RAD_S * geom.blade_radius / u
    if not 3.0 <= lam <= 12.0:
        return
    assert rotor_performance(geom, u, rpm, pitch).cp < BETZ_LIMIT


# --- file formats -------------------------------------------------------------------

def test_geometry_round_trip(tmp_path, geom):
    polar_dir = tmp_path / "polars"
    polar_dir.mkdir()
    p = geom.polars["cambered"]
    np.savetxt(polar_dir / "foil.dat", np.column_stack([p.angles, p.cl, p.cd, p.dstar_over_chord]))
    rows = [f"{s.radial_station} {s.span_width} {s.chord} {s.twist} foil" for s in geom.segments]
    (tmp_path / "rotor.dat").write_text(
        "# blade_radius: 46.5\n# hub_radius: 1.5\n# n_blades: 3\n" + "\n".join(rows) + "\n")
    g2 = load_geometry(tmp_path / "rotor.dat", polar_dir)
    assert len(g2.segments) == len(geom.segments)
    assert rotor_performance(g2, 9.0, 12.0, 1.0).cp == pytest.approx(
        rotor_performance(geom, 9.0, 12.0, 1.0).cp, abs=1e-12)
    assert load_polar(polar_dir / "foil.dat").name == "foil"


def test_missing_files_named(tmp_path):
    with pytest.raises(FileNotFoundError, match="nowhere.dat"):
        load_geometry(tmp_path / "nowhere.dat")
    (tmp_path / "rotor.dat").write_text("# blade_radius: 10\n# hub_radius: 1\n5.5 9.0 1.0 2.0 ghost\n")
    with pytest.raises(FileNotFoundError, match="ghost.dat"):
        load_geometry(tmp_path / "rotor.dat")


def test_malformed_blade_row(tmp_path):
    (tmp_path / "rotor.dat").write_text("# blade_radius: 10\n# hub_radius: 1\n5.5 nine 1.0 2.0 x\n")
    with pytest.raises(ValueError, match="malformed"):
        load_geometry(tmp_path / "rotor.dat")


def test_geometry_validation():
    p = AirfoilPolar([-10.0, 10.0], [0.0, 1.0], [0.01, 0.01])
    with pytest.raises(ValueError, match="widths"):
        TurbineGeometry(10.0, 1.0, 3, (BladeSegment(5.0, 4.0, 1.0, 0.0, "a"),), {"a": p})
    with pytest.raises(ValueError, match="polar"):
        TurbineGeometry(10.0, 1.0, 3, (BladeSegment(5.0, 9.0, 1.0, 0.0, "b"),), {"a": p})
