"""Regenerate the bundled rotor: blade table, polar, and cached cp_nom.

The airfoil is synthetic: a cambered section with a linear attached-flow
lift curve blended into flat-plate behaviour past stall, and a BPM tripped
boundary-layer displacement thickness evaluated at a reference Reynolds
number. The blade follows a Betz-style optimum chord/twist distribution
with a root chord cap and a linear tip taper.

    python scripts/generate_turbine_data.py
"""

from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "quietwind" / "data"

BLADE_RADIUS = 46.5
HUB_RADIUS = 1.5
N_BLADES = 3
N_SEGMENTS = 20
RATED_POWER = 2.3e6

# airfoil
ALPHA_ZERO_LIFT = -2.5
LIFT_SLOPE = 0.100          # per degree
STALL_ANGLE = 11.0
NEG_STALL_ANGLE = -11.0
CD_MIN = 0.010
CD_QUAD = 1.6e-4            # per deg^2 about ALPHA_CD_MIN
ALPHA_CD_MIN = 1.0
REFERENCE_RE = 3e6

# blade design point
DESIGN_TSR = 10.0
DESIGN_ALPHA = 6.0
MAX_CHORD = 3.4
TIP_CHORD = 0.9
CHORD_SCALE = 0.90


def _bpm_tripped_dstar(alpha_e, re):
    """BPM tripped displacement thickness / chord, upper surface (alpha_e >= 0 suction side)."""
    log_re = np.log10(re)
    d0 = 10.0 ** (3.411 - 1.5397 * log_re + 0.1059 * log_re**2)
    a = np.abs(alpha_e)
    suction = np.where(a <= 5.0, 10.0 ** (0.0679 * a),
                       np.where(a <= 12.5, 0.381 * 10.0 ** (0.1516 * a), 14.296 * 10.0 ** (0.0258 * a)))
    pressure = 10.0 ** (-0.0432 * a + 0.00113 * a**2)
    # beyond 25 deg the correlations are meaningless; hold the edge value
    return d0 * np.where(alpha_e >= 0, suction, pressure)


def polar_table():
    alpha = np.unique(np.concatenate([
        np.arange(-180.0, -30.0, 2.0),
        np.arange(-30.0, 40.0, 0.5),
        np.arange(40.0, 180.0001, 2.0),
    ]))
    rad = np.radians(alpha)
    cl_att = LIFT_SLOPE * (alpha - ALPHA_ZERO_LIFT)
    cd_att = CD_MIN + CD_QUAD * (alpha - ALPHA_CD_MIN) ** 2
    cl_fp = 1.05 * np.sin(2.0 * rad)
    cd_fp = 0.02 + 1.3 * np.sin(rad) ** 2
    w = 1.0 / (1.0 + np.exp((alpha - STALL_ANGLE - 2.0) / 1.5))
    w *= 1.0 / (1.0 + np.exp(-(alpha - NEG_STALL_ANGLE + 2.0) / 1.5))
    cl = w * cl_att + (1.0 - w) * cl_fp
    cd = w * cd_att + (1.0 - w) * np.maximum(cd_fp, cd_att * 0 + CD_MIN)
    alpha_e = np.clip(alpha - ALPHA_ZERO_LIFT, -25.0, 25.0)
    dstar = _bpm_tripped_dstar(alpha_e, REFERENCE_RE)
    return alpha, cl, cd, dstar


def blade_table():
    width = (BLADE_RADIUS - HUB_RADIUS) / N_SEGMENTS
    r = HUB_RADIUS + width * (np.arange(N_SEGMENTS) + 0.5)
    lam_r = DESIGN_TSR * r / BLADE_RADIUS
    phi = 2.0 / 3.0 * np.arctan(1.0 / lam_r)
    cl_design = LIFT_SLOPE * (DESIGN_ALPHA - ALPHA_ZERO_LIFT)
    chord = 8.0 * np.pi * r / (N_BLADES * cl_design) * (1.0 - np.cos(phi)) * CHORD_SCALE
    chord = np.minimum(chord, MAX_CHORD)
    # linear taper over the outer 10 % to a finite tip chord
    taper = r > 0.9 * BLADE_RADIUS
    frac = (r[taper] - 0.9 * BLADE_RADIUS) / (0.1 * BLADE_RADIUS)
    chord[taper] = np.minimum(chord[taper], chord[taper] * (1 - frac) + TIP_CHORD * frac)
    twist = np.degrees(phi) - DESIGN_ALPHA
    return r, np.full_like(r, width), chord, twist


def write_all(out=OUT):
    (out / "polars").mkdir(parents=True, exist_ok=True)
    alpha, cl, cd, dstar = polar_table()
    with open(out / "polars" / "cambered.dat", "w") as fh:
        fh.write("# synthetic cambered airfoil, see scripts/generate_turbine_data.py\n")
        fh.write("# alpha_deg cl cd dstar_over_chord\n")
        for row in zip(alpha, cl, cd, dstar):
            fh.write("{:9.3f} {:12.8f} {:12.8f} {:12.8e}\n".format(*row))

    r, width, chord, twist = blade_table()
    with open(out / "turbine.dat", "w") as fh:
        fh.write("# synthetic 2.3 MW class rotor, see scripts/generate_turbine_data.py\n")
        fh.write(f"# blade_radius: {BLADE_RADIUS}\n")
        fh.write(f"# hub_radius: {HUB_RADIUS}\n")
        fh.write(f"# n_blades: {N_BLADES}\n")
        fh.write(f"# rated_power: {RATED_POWER:.1f}\n")
        fh.write("# station_m width_m chord_m twist_deg airfoil_id\n")
        for row in zip(r, width, chord, twist):
            fh.write("{:10.5f} {:10.6f} {:10.6f} {:10.5f} cambered\n".format(*row))


if __name__ == "__main__":
    write_all()
    from quietwind.environment import write_cp_nom_cache
    from quietwind.turbine_model import load_geometry

    write_cp_nom_cache(load_geometry(OUT / "turbine.dat", OUT / "polars"))
    print(f"wrote {OUT}")
