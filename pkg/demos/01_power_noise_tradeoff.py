"""How rotor speed and pitch trade power against noise at one wind speed.

Sweeps rotor speed at fixed pitch, then pitch at fixed rotor speed, and prints
Cp next to the A-weighted OASPL at the ground observer. Run with

    python3 demos/01_power_noise_tradeoff.py
"""

import numpy as np

from quietwind import acoustics as ac
from quietwind.turbine_model import default_turbine, rotor_performance

geom = default_turbine()
observer = ac.ObserverLocation.ground_downwind()
config = ac.AcousticConfig()


def point(u, rpm, pitch):
    perf = rotor_performance(geom, u, rpm, pitch)
    oaspl, _ = ac.turbine_spl(geom, perf.per_segment, u, rpm, pitch, observer, config)
    return perf.cp, perf.power / 1e6, oaspl


print("U = 12 m/s, pitch -1 deg")
print(f"{'rpm':>6} {'Cp':>7} {'MW':>6} {'dB A':>6}")
for rpm in np.arange(12.0, 17.01, 1.0):
    cp, mw, db = point(12.0, rpm, -1.0)
    print(f"{rpm:6.1f} {cp:7.4f} {mw:6.3f} {db:6.2f}")

print("\nU = 10 m/s, 11 rpm")
print(f"{'pitch':>6} {'Cp':>7} {'MW':>6} {'dB A':>6}")
for pitch in range(-4, 11, 2):
    cp, mw, db = point(10.0, 11.0, float(pitch))
    print(f"{pitch:6d} {cp:7.4f} {mw:6.3f} {db:6.2f}")

# Both knobs raise power and noise together near the optimum, which is why a
# noise cap forces the controller off the Cp maximum.
