"""Regenerate the bundled synthetic wind records.

The measured 80 m wind series used for the controller comparison is not
redistributed here, so two stand-ins are synthesised from a seeded
Ornstein-Uhlenbeck process around a slowly drifting mean:

* wind_8h_below_rated.csv: 8 hours at 10 s cadence, mean drifting between
  roughly 6 and 10 m/s, kept below rated wind;
* wind_100h.csv: 100 hours at 60 s cadence whose mean sweeps the whole
  4-16 m/s operating range several times.

    python scripts/generate_wind_data.py
"""

from pathlib import Path

import numpy as np

from quietwind.environment import synthetic_wind_series

OUT = Path(__file__).resolve().parents[1] / "src" / "quietwind" / "data"


def write(path, times, speeds, header_note):
    with open(path, "w") as fh:
        fh.write(f"# {header_note}\n")
        fh.write("timestamp,wind_speed_ms,direction_deg\n")
        rng = np.random.default_rng(99)
        for t, u in zip(times, speeds):
            fh.write(f"{t:.0f},{u:.3f},{rng.uniform(0, 360):.1f}\n")


def below_rated():
    dt = 10.0
    n = 8 * 3600 // int(dt)
    t = np.arange(n) * dt
    mean = 8.0 + 1.6 * np.sin(2 * np.pi * t / (5.5 * 3600)) + 0.6 * np.sin(2 * np.pi * t / (1.3 * 3600))
    u = synthetic_wind_series(n, 8.0, 0.08, seed=2024, time_constant=300.0, dt=dt, mean_drift=mean)
    return t, np.clip(u, 4.5, 11.0)


def hundred_hours():
    dt = 60.0
    n = 100 * 60
    t = np.arange(n) * dt
    mean = 10.0 - 5.2 * np.cos(2 * np.pi * t / (20 * 3600)) + 0.8 * np.sin(2 * np.pi * t / (7 * 3600))
    u = synthetic_wind_series(n, 10.0, 0.08, seed=7, time_constant=600.0, dt=dt, mean_drift=mean)
    return t, u


if __name__ == "__main__":
    write(OUT / "wind_8h_below_rated.csv", *below_rated(),
          "synthetic 8 h record below rated wind, 10 s cadence (scripts/generate_wind_data.py)")
    write(OUT / "wind_100h.csv", *hundred_hours(),
          "synthetic 100 h record sweeping 4-16 m/s, 60 s cadence (scripts/generate_wind_data.py)")
    print(f"wrote {OUT}")
