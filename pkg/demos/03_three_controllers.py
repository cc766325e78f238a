"""Quiet agent, power agent and the classic controller on the same wind.

Trains both agents at desk scale, replays the bundled 8 h below-rated record
through all three controllers, then runs the annual-energy pipeline on the
100 h record. Expect roughly ten minutes on one core:

    python3 demos/03_three_controllers.py
"""

import numpy as np

from quietwind import simulation as sim

cfg = sim.load_config()
runner = sim.Simulator(cfg)
weights = {name: sim.run_training(cfg, name, geom=runner.geom)[0].weights for name in ("quiet", "power")}
limit = runner.env.reward_cfg.spl_threshold + runner.env.reward_cfg.delta_db

print("8 h below rated")
wind = sim.load_wind(sim.data_dir() / "wind_8h_below_rated.csv")
for name in sim.AGENTS:
    r = runner.run(name, wind, weights.get(name))
    loud = np.nanmax(r.oaspl)
    print(f"  {name:8s} {r.energy_wh / 1e6:6.2f} MWh  mean Cp {np.mean(r.cp):.3f}  "
          f"max {loud:5.1f} dB A  minutes above {limit:g}: {int(np.sum(r.oaspl > limit))}")

print("\nexpected annual energy (Weibull wind, 100 h effective power curves)")
wind = sim.load_wind(sim.data_dir() / "wind_100h.csv")
sims = {name: runner.run(name, wind, weights.get(name)) for name in sim.AGENTS}
rows, weib = sim.annual_rows(cfg, sims, runner.geom, runner.regions)
print(f"  Weibull k = {weib.k:.3f}, c = {weib.c:.3f} m/s")
for r in rows:
    print(f"  {r.controller:8s} {r.energy_mwh:8.0f} MWh  sigma_Cp {r.sigma_cp:.4f}")
