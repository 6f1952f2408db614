"""Acceptance gate: the end-to-end guarantees this package commits to.

One test per guarantee, each ending in a single printed PASS or FAIL line
(run with -v and -s, or read the captured output) plus a normal assertion,
so the whole gate reads as a checklist.  The two dataset-distance checks
share the session-scoped 200-trajectory datasets from conftest, which are
expensive to grow; everything else runs in seconds.
"""

import dataclasses
import hashlib
import json
import time

import numpy as np
import pytest
import scipy.stats

from snowcrystal import cli, config, dataset, lca, morphology, transport
from snowcrystal.grid import HexMask, hex_neighbors
from snowcrystal.lca import LcaParams, RunConfig

from conftest import make_rng, quick_config
from oracle_transport import brute_w2
from reference_lca import as_arrays, ref_init, ref_step
from test_dataset import (
    GOLDEN_CONFIG,
    GOLDEN_PARAMS,
    GOLDEN_PATH,
    GOLDEN_SHA256,
    assert_same_trajectory,
    random_trajectory,
)


def _verdict(label: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    assert ok, f"{label}: {detail}"


def test_mass_conservation_at_scale():
    params = dataclasses.replace(config.default_params(), sigma_noise=0.0)
    cfg = RunConfig(side=128, max_steps=1000, snapshot_every=1000,
                    halt_margin=4, boundary_mode="sealed", seed=0)
    state = lca.init_state(params, cfg)
    start = lca.total_mass(state)
    t0 = time.perf_counter()
    for _ in range(1000):
        state = lca.step(state, params, cfg)
    elapsed = time.perf_counter() - t0
    drift = abs(lca.total_mass(state) - start) / start
    _verdict(
        "mass conservation (128-wedge, sealed, noise-free, 1000 steps)",
        drift <= 1e-9 and elapsed < 10.0,
        f"relative drift {drift:.3e} (limit 1e-9), {elapsed:.2f}s (limit 10s)",
    )


def _random_setup(gen) -> tuple[LcaParams, RunConfig]:
    params = LcaParams(
        rho=float(gen.uniform(0.38, 0.62)),
        beta_attach=float(gen.uniform(0.8, 1.4)),
        alpha=float(gen.uniform(0.2, 0.8)),
        theta_vapor=float(gen.uniform(0.0, 0.8)),
        kappa=float(gen.uniform(0.02, 0.3)),
        mu=float(gen.uniform(0.0, 0.1)),
        gamma_melt=float(gen.uniform(0.0, 0.001)),
        sigma_noise=float(gen.uniform(0.0, 0.3)),
    )
    cfg = RunConfig(
        side=int(gen.integers(10, 17)),
        max_steps=int(gen.integers(100, 250)),
        snapshot_every=int(gen.integers(5, 40)),
        halt_margin=int(gen.integers(1, 4)),
        boundary_mode=("reservoir", "sealed")[int(gen.integers(2))],
        seed=0,
        fold_mode=("reflect", "rotate")[int(gen.integers(2))],
    )
    return params, cfg


def test_parallel_generation_is_deterministic(tmp_path):
    gen = make_rng(102)
    mismatches = []
    for k in range(20):
        params, cfg = _random_setup(gen)
        kwargs = dict(rho_range=(0.38, 0.62), master_seed=1000 + k)
        serial = tmp_path / f"serial_{k}"
        pooled = tmp_path / f"pooled_{k}"
        dataset.generate_dataset(3, params, cfg, serial, workers=1, **kwargs)
        dataset.generate_dataset(3, params, cfg, pooled, workers=3, **kwargs)
        names = sorted(p.name for p in serial.iterdir())
        if names != sorted(p.name for p in pooled.iterdir()):
            mismatches.append(k)
            continue
        if any((serial / n).read_bytes() != (pooled / n).read_bytes()
               for n in names):
            mismatches.append(k)
    _verdict(
        "parallel determinism (1 vs 3 workers, 20 random configurations)",
        not mismatches,
        "all trajectory and manifest bytes identical" if not mismatches
        else f"differing configurations: {mismatches}",
    )


def test_engine_matches_scalar_reference():
    gen = make_rng(103)
    worst = None
    for k in range(25):
        params = LcaParams(
            rho=float(gen.uniform(0.3, 0.8)),
            beta_attach=float(gen.uniform(0.7, 1.5)),
            alpha=float(gen.uniform(0.0, 1.0)),
            theta_vapor=float(gen.uniform(0.0, 0.9)),
            kappa=float(gen.uniform(0.01, 0.4)),
            mu=float(gen.uniform(0.0, 0.2)),
            gamma_melt=float(gen.uniform(0.0, 0.01)),
            sigma_noise=float(gen.uniform(0.0, 0.4)),
        )
        cfg = quick_config(
            side=16,
            seed=int(gen.integers(0, 2**32)),
            boundary_mode=("reservoir", "sealed")[k % 2],
            fold_mode=("reflect", "rotate")[(k // 2) % 2],
        )
        state = lca.init_state(params, cfg)
        ref = ref_init(params, cfg)
        for _ in range(50):
            state = lca.step(state, params, cfg)
            ref = ref_step(ref, params, cfg)
        ra, rb, rc, rd = as_arrays(ref)
        same = (np.array_equal(state.attached, ra)
                and np.array_equal(state.boundary_mass, rb)
                and np.array_equal(state.crystal_mass, rc)
                and np.array_equal(state.diffusive_mass, rd))
        if not same:
            worst = k
            break
    _verdict(
        "scalar-reference equivalence (16x16, 50 steps, 25 parameter draws)",
        worst is None,
        "all fields bit-identical" if worst is None
        else f"first mismatch at draw {worst}",
    )


def test_morphology_closed_forms():
    single = HexMask.from_coords([(0, 0)], 1)
    domino = HexMask.from_coords([(0, 0), (1, 0)], 2)
    hexagon = HexMask.from_coords([(0, 0)] + hex_neighbors((0, 0)), 2)
    got = [(morphology.area(m), morphology.boundary_length(m))
           for m in (single, domino, hexagon)]
    expected = [(1, 6), (2, 10), (7, 18)]
    _verdict(
        "morphology closed forms (single cell, domino, radius-1 hexagon)",
        got == expected,
        f"(area, boundary) = {got}",
    )


def test_w2_against_brute_force_and_axioms():
    gen = make_rng(105)
    worst = 0.0
    for _ in range(50):
        n = int(gen.integers(1, 9))
        a = gen.normal(size=(n, 2))
        b = gen.normal(size=(n, 2)) + gen.normal(scale=2.0, size=2)
        worst = max(worst, abs(transport.w2(a, b) - brute_w2(a, b)))

    axiom_failures = 0
    for _ in range(500):
        sizes = gen.integers(1, 11, size=3)
        a, b, c = (gen.normal(size=(int(s), 2)) for s in sizes)
        dab, dba = transport.w2(a, b), transport.w2(b, a)
        dac, dbc = transport.w2(a, c), transport.w2(b, c)
        mean_gap = float(np.linalg.norm(a.mean(axis=0) - b.mean(axis=0)))
        holds = (
            dab >= 0.0
            and abs(dab - dba) <= 1e-9
            and transport.w2(a, a) <= 1e-12
            and dac <= dab + dbc + 1e-9
            and dab >= mean_gap - 1e-9
        )
        axiom_failures += 0 if holds else 1
    _verdict(
        "exact W2 (50 brute-force instances, 500 random axiom instances)",
        worst <= 1e-9 and axiom_failures == 0,
        f"max |W2 - brute| = {worst:.2e}, axiom failures = {axiom_failures}",
    )


def test_dataset_distance_separates_a_rho_shift(desk_scale_datasets):
    edges = transport.default_bin_edges()
    reference = desk_scale_datasets["reference"]
    self_report = transport.ewd(desk_scale_datasets["model"], reference, edges)
    shift_report = transport.ewd(desk_scale_datasets["shifted"], reference, edges)
    ratio = self_report.ewd / shift_report.ewd
    _verdict(
        "distance sanity (independent datasets vs a 0.05 vapor-density shift)",
        ratio < 0.2,
        f"self {self_report.ewd:.1f} / shifted {shift_report.ewd:.1f} "
        f"= {ratio:.4f} (limit 0.2)",
    )


def test_mean_area_rises_with_vapor_density(desk_scale_datasets):
    edges = transport.default_bin_edges()
    joints = transport.bin_by_rho(desk_scale_datasets["reference"], edges)
    centers = [(edges[k] + edges[k + 1]) / 2 for k in range(len(joints))]
    means = [float(j.points[:, 0].mean()) for j in joints]
    rho = scipy.stats.spearmanr(centers, means).statistic
    _verdict(
        "monotone vapor-density to area trend (10 bins, 200 trajectories)",
        rho > 0.9,
        f"Spearman correlation {rho:.4f} (limit 0.9)",
    )


def test_trajectory_format_roundtrip_and_golden_file(tmp_path):
    gen = make_rng(108)
    path = tmp_path / "roundtrip.cgt"
    for k in range(1000):
        traj = random_trajectory(gen, source=("lca", "emulator")[k % 2])
        dataset.write_trajectory(traj, path)
        assert_same_trajectory(dataset.read_trajectory(path), traj)

    digest = hashlib.sha256(GOLDEN_PATH.read_bytes()).hexdigest()
    golden = dataset.read_trajectory(GOLDEN_PATH)
    assert_same_trajectory(golden, lca.run(GOLDEN_PARAMS, GOLDEN_CONFIG))
    _verdict(
        "trajectory format (1000 random roundtrips, committed golden file)",
        digest == GOLDEN_SHA256,
        f"all roundtrips exact, golden digest {digest[:16]}...",
    )


def test_bench_reports_median_and_iqr_timings(tmp_path):
    out = tmp_path / "bench.json"
    rc = cli.main(["bench", "-m", "3", "--side", "16", "--max-steps", "150",
                   "--snapshot-every", "25", "--halt-margin", "2",
                   "--seed", "1", "--out", str(out)])
    payload = json.loads(out.read_text())
    q1, q3 = payload["iqr_ms"]
    ok = (rc == 0
          and payload["schema"] == "bench-report/1"
          and payload["runs"] == 3
          and len(payload["times_ms"]) == 3
          and 0.0 < q1 <= payload["median_ms"] <= q3)
    _verdict(
        "bench harness (median and IQR timing JSON)",
        ok,
        f"median {payload['median_ms']:.2f} ms, IQR [{q1:.2f}, {q3:.2f}] ms",
    )
