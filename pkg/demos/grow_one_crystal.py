"""
Grow a single snow crystal and look at it
=========================================

Runs the lattice model once at the packaged calibration, prints how the
crystal filled in over time, and leaves a rendered image next to this
script.  Takes a few seconds.
"""

from pathlib import Path

from snowcrystal import config, lca, morphology
from snowcrystal.grid import reconstruct_full, render_cartesian, write_pgm

# The packaged defaults are the calibration the reference datasets use.
# Every knob can be overridden; here we just pick a seed.
params = config.default_params()
cfg = config.default_run_config()
print(f"vapor density rho = {params.rho}, wedge side = {cfg.side}")

traj = lca.run(params, cfg)
print(f"halted after {traj.raw_steps} steps, {traj.frame_count} snapshots")

# The simulation covers one twelfth of the plane; reconstruct_full mirrors
# the wedge back out to the whole crystal before measuring anything.
for k in (0, traj.frame_count // 4, traj.frame_count // 2, -1):
    mask = reconstruct_full(traj.frames[k])
    step = (traj.frame_count + k if k < 0 else k) * traj.snapshot_every
    print(f"  step {min(step, traj.raw_steps):5d}: "
          f"area {morphology.area(mask):6d}, "
          f"boundary {morphology.boundary_length(mask):6d}")

# Render the final crystal to a grayscale PGM (any image viewer opens it).
out = Path(__file__).parent / "crystal.pgm"
write_pgm(render_cartesian(reconstruct_full(traj.frames[-1]), scale=3), out)
print(f"wrote {out}")
