"""Shared fixtures.

The expensive pieces are the three 200-trajectory reference datasets behind
the dataset-distance checks; they are generated once per session and shared
by every test that needs them.  Everything else is small enough to build
per test.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from snowcrystal import config, dataset, morphology
from snowcrystal.lca import LcaParams, RunConfig, run

# Master seeds of the session reference datasets.  Fixed so every run of the
# suite evaluates exactly the same trajectories.
MASTER_SEED_REFERENCE = 11
MASTER_SEED_MODEL = 22
RHO_SHIFT = 0.05


def quick_params(**overrides) -> LcaParams:
    """Defaults with optional overrides, for small test runs."""
    values = {k: config.defaults_dict()[k] for k in
              ("rho", "beta_attach", "alpha", "theta_vapor", "kappa", "mu",
               "gamma_melt", "sigma_noise")}
    values.update(overrides)
    return LcaParams(**values)


def quick_config(**overrides) -> RunConfig:
    values = dict(side=16, max_steps=400, snapshot_every=10, halt_margin=2,
                  boundary_mode="reservoir", seed=0, fold_mode="reflect")
    values.update(overrides)
    return RunConfig(**values)


@pytest.fixture(scope="session")
def small_trajectory():
    """One quick side-16 run shared by format and morphology tests."""
    return run(quick_params(), quick_config())


def _dataset_samples(out_dir, master_seed, rho_range, params, cfg,
                     relabel_shift=0.0):
    manifest = dataset.generate_dataset(
        200, params, cfg, out_dir, rho_range=rho_range,
        master_seed=master_seed,
    )
    samples = []
    for entry in manifest.ok_entries():
        traj = dataset.read_trajectory(out_dir / entry.file)
        m = morphology.features(traj)
        samples.append(morphology.MorphologySample(
            rho=m.rho + relabel_shift,
            area=m.area,
            boundary_length=m.boundary_length,
        ))
    return samples


@pytest.fixture(scope="session")
def desk_scale_datasets(tmp_path_factory):
    """Morphology samples of the desk-scale reference datasets.

    reference and model are independent 200-trajectory datasets at the
    default calibration over rho in [0.35, 0.65].  shifted reuses the
    reference master seed with the rho window moved up by RHO_SHIFT, which
    pairs the uniform draws: each trajectory is regrown at exactly
    rho + RHO_SHIFT with the same per-run seed, then labeled with the
    unshifted rho.  Distances to it therefore measure a pure morphology
    displacement of RHO_SHIFT in vapor density.

    Generating 600 side-128 trajectories takes a while; this fixture is
    session-scoped and only built when a test actually asks for it.
    """
    params = config.default_params()
    # Only the final frame feeds the samples, so a sparse snapshot cadence
    # shrinks the on-disk datasets without changing any dynamics.
    cfg = dataclasses.replace(config.default_run_config(), snapshot_every=500)
    lo, hi = 0.35, 0.65
    root = tmp_path_factory.mktemp("desk-datasets")
    reference = _dataset_samples(root / "reference", MASTER_SEED_REFERENCE,
                                 (lo, hi), params, cfg)
    model = _dataset_samples(root / "model", MASTER_SEED_MODEL,
                             (lo, hi), params, cfg)
    shifted = _dataset_samples(root / "shifted", MASTER_SEED_REFERENCE,
                               (lo + RHO_SHIFT, hi + RHO_SHIFT), params, cfg,
                               relabel_shift=-RHO_SHIFT)
    assert len(reference) == 200 and len(model) == 200 and len(shifted) == 200
    return {"reference": reference, "model": model, "shifted": shifted}


def make_rng(tag: int) -> np.random.Generator:
    """Independent generator for test-local randomness."""
    return np.random.default_rng(0xC0FFEE ^ tag)
