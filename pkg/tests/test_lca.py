"""Growth engine: validation, conservation, symmetry, halting, and
equivalence with the scalar reference."""

import numpy as np
import pytest

from snowcrystal import lca
from snowcrystal.errors import DegenerateRunError
from snowcrystal.lca import LcaParams, RunConfig
import reference_lca as ref
from conftest import quick_params, quick_config, make_rng


def _field_tuple(state):
    return (state.attached, state.boundary_mass, state.crystal_mass,
            state.diffusive_mass)


@pytest.mark.parametrize("override", [
    dict(rho=0.0), dict(rho=-0.1), dict(beta_attach=0.0), dict(alpha=-1.0),
    dict(theta_vapor=-0.5), dict(kappa=0.0), dict(kappa=1.5), dict(mu=1.0),
    dict(mu=-0.1), dict(gamma_melt=1.0), dict(sigma_noise=1.0),
    dict(sigma_noise=-0.2), dict(rho=float("nan")), dict(kappa=float("inf")),
])
def test_invalid_params_rejected(override):
    with pytest.raises(ValueError):
        quick_params(**override).validate()


@pytest.mark.parametrize("override", [
    dict(side=7), dict(max_steps=-1), dict(snapshot_every=0),
    dict(halt_margin=0), dict(halt_margin=15), dict(boundary_mode="open"),
    dict(fold_mode="mirror"), dict(seed=-1), dict(seed=2**64),
])
def test_invalid_run_config_rejected(override):
    with pytest.raises(ValueError):
        quick_config(**override).validate()


def test_params_tuple_roundtrip():
    p = quick_params()
    assert LcaParams.from_tuple(p.as_tuple()) == p
    with pytest.raises(ValueError):
        LcaParams.from_tuple((1.0, 2.0))


def test_init_state():
    p = quick_params()
    cfg = quick_config()
    s = lca.init_state(p, cfg)
    assert s.attached[0, 0] and s.attached.sum() == 1
    assert s.crystal_mass[0, 0] == 1.0
    assert s.diffusive_mass[0, 0] == 0.0
    off_seed = np.ones((16, 16), dtype=bool)
    off_seed[0, 0] = False
    assert np.all(s.diffusive_mass[off_seed] == p.rho)
    assert not s.boundary_mass.any()
    assert s.step_index == 0


def test_sub_steps_do_not_mutate_inputs():
    p = quick_params()
    cfg = quick_config()
    state = lca.init_state(p, cfg)
    for _ in range(3):
        before = [f.copy() for f in _field_tuple(state)]
        for sub in (lca.diffusion_step, lca.freezing_step,
                    lca.attachment_step, lca.melting_step, lca.noise_step):
            sub(state, p, cfg)
        for kept, snap in zip(_field_tuple(state), before):
            assert np.array_equal(kept, snap)
        state = lca.step(state, p, cfg)


def test_step_index_advances_only_in_step():
    p = quick_params()
    cfg = quick_config()
    state = lca.init_state(p, cfg)
    assert lca.diffusion_step(state, p, cfg).step_index == 0
    assert lca.step(state, p, cfg).step_index == 1


def test_sealed_weighted_mass_is_conserved():
    p = quick_params(sigma_noise=0.0)
    cfg = quick_config(boundary_mode="sealed")
    state = lca.init_state(p, cfg)
    initial = lca.total_mass(state)
    for _ in range(50):
        state = lca.step(state, p, cfg)
        drift = abs(lca.total_mass(state) - initial) / initial
        assert drift <= 1e-12


def test_sub_steps_other_than_diffusion_conserve_mass_exactly():
    # Freezing, attachment and melting move mass between fields of the same
    # cell; only diffusion (via the reservoir) and noise change the total.
    p = quick_params(sigma_noise=0.0)
    cfg = quick_config(boundary_mode="sealed")
    state = lca.init_state(p, cfg)
    for _ in range(20):
        state = lca.diffusion_step(state, p, cfg)
        for sub in (lca.freezing_step, lca.attachment_step, lca.melting_step):
            before = lca.total_mass(state)
            state = sub(state, p, cfg)
            assert abs(lca.total_mass(state) - before) <= 1e-9 * before
        state.step_index += 1


def test_reservoir_pins_far_ring():
    # The pin is part of diffusion; later sub-steps (noise in particular)
    # may perturb the ring again within the same raw step.
    p = quick_params()
    cfg = quick_config(max_steps=0)
    state = lca.init_state(p, cfg)
    for _ in range(5):
        state = lca.step(state, p, cfg)
    state = lca.diffusion_step(state, p, cfg)
    ring_rows = state.diffusive_mass[-1, :]
    ring_cols = state.diffusive_mass[:, -1]
    assert np.all(ring_rows[~state.attached[-1, :]] == p.rho)
    assert np.all(ring_cols[~state.attached[:, -1]] == p.rho)


def test_attachment_is_monotone():
    traj = lca.run(quick_params(), quick_config())
    frames = traj.frames
    grew = frames[:-1] & ~frames[1:]
    assert not grew.any()


def test_state_stays_transpose_symmetric():
    p = quick_params(sigma_noise=0.02)
    cfg = quick_config(max_steps=0, seed=5)
    state = lca.init_state(p, cfg)
    for _ in range(60):
        state = lca.step(state, p, cfg)
        for f in _field_tuple(state):
            assert np.array_equal(f, f.T)


def test_fold_modes_produce_identical_runs():
    reflect = lca.run(quick_params(), quick_config(seed=3))
    rotate = lca.run(quick_params(), quick_config(seed=3, fold_mode="rotate"))
    assert np.array_equal(reflect.frames, rotate.frames)
    assert reflect.raw_steps == rotate.raw_steps


def test_run_halts_near_far_edge():
    cfg = quick_config()
    traj = lca.run(quick_params(), cfg)
    assert traj.raw_steps < cfg.max_steps
    lim = cfg.side - 1 - cfg.halt_margin
    final = traj.frames[-1]
    assert final[lim:, :].any() or final[:, lim:].any()
    # every earlier frame is still clear of the halt band
    for frame in traj.frames[:-1]:
        assert not (frame[lim:, :].any() or frame[:, lim:].any())


def test_snapshot_cadence():
    cfg = quick_config(snapshot_every=7)
    traj = lca.run(quick_params(), cfg)
    r = traj.raw_steps
    expected = 1 + r // 7 + (1 if r % 7 else 0)
    assert traj.frame_count == expected
    assert traj.snapshot_every == 7
    assert np.array_equal(traj.frames[0], lca.init_state(quick_params(), cfg).attached)


def test_max_steps_zero_gives_single_frame():
    traj = lca.run(quick_params(), quick_config(max_steps=0))
    assert traj.frame_count == 1
    assert traj.raw_steps == 0


def test_degenerate_run_raises():
    p = quick_params(beta_attach=50.0, alpha=50.0, theta_vapor=0.0)
    with pytest.raises(DegenerateRunError):
        lca.run(p, quick_config(max_steps=30))


def test_noise_step_sigma_zero_is_identity():
    p = quick_params(sigma_noise=0.0)
    cfg = quick_config()
    state = lca.init_state(p, cfg)
    out = lca.noise_step(state, p, cfg)
    assert np.array_equal(out.diffusive_mass, state.diffusive_mass)


def test_noise_step_touches_only_unattached_vapor():
    p = quick_params(sigma_noise=0.1)
    cfg = quick_config(seed=11)
    state = lca.init_state(p, cfg)
    for _ in range(10):
        state = lca.step(state, p, cfg)
    out = lca.noise_step(state, p, cfg)
    assert np.array_equal(out.attached, state.attached)
    assert np.array_equal(out.boundary_mass, state.boundary_mass)
    assert np.array_equal(out.crystal_mass, state.crystal_mass)
    assert np.array_equal(out.diffusive_mass[state.attached],
                          state.diffusive_mass[state.attached])
    changed = out.diffusive_mass != state.diffusive_mass
    ratio = np.divide(out.diffusive_mass, state.diffusive_mass,
                      out=np.ones_like(out.diffusive_mass),
                      where=changed & (state.diffusive_mass != 0))
    assert np.all(np.isin(np.round(ratio[changed], 12),
                          [round(1 - p.sigma_noise, 12),
                           round(1 + p.sigma_noise, 12)]))


def test_engine_matches_scalar_reference_spot_checks():
    gen = make_rng(33)
    for trial in range(3):
        p = LcaParams(
            rho=float(gen.uniform(0.3, 0.7)),
            beta_attach=float(gen.uniform(0.6, 1.4)),
            alpha=float(gen.uniform(0.0, 0.6)),
            theta_vapor=float(gen.uniform(0.0, 0.6)),
            kappa=float(gen.uniform(0.01, 0.2)),
            mu=float(gen.uniform(0.0, 0.2)),
            gamma_melt=float(gen.uniform(0.0, 0.01)),
            sigma_noise=float(gen.choice([0.0, 0.02, 0.1])),
        )
        cfg = RunConfig(side=12, max_steps=0, snapshot_every=1, halt_margin=1,
                        boundary_mode=("sealed", "reservoir")[trial % 2],
                        seed=int(gen.integers(0, 2**32)),
                        fold_mode=("reflect", "rotate")[trial % 2])
        engine = lca.init_state(p, cfg)
        scalar = ref.ref_init(p, cfg)
        for _ in range(20):
            engine = lca.step(engine, p, cfg)
            scalar = ref.ref_step(scalar, p, cfg)
        ra, rb, rc, rd = ref.as_arrays(scalar)
        assert np.array_equal(engine.attached, ra)
        assert np.array_equal(engine.boundary_mass, rb)
        assert np.array_equal(engine.crystal_mass, rc)
        assert np.array_equal(engine.diffusive_mass, rd)
