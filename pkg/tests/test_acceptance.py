"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run alone with ``pytest tests/test_acceptance.py -s`` or
``python tests/test_acceptance.py``.  The lines are also repeated in the
terminal summary of any pytest run that includes this module.
"""

import math
import sys
import time
import warnings
from fractions import Fraction

import numpy as np
import pytest

from geocipher.cipher import (POOL_ORDERS, PERM_DIRECTIONS, CipherParams, StabilityWarning,
                              decrypt, decrypt_solve, encrypt_pipeline, random_plan, shuffle,
                              build_pool)
from geocipher.cli import scenario
from geocipher.geometry import (AxisBox, BoundingSphere, min_enclosing_sphere, rotation_matrices,
                                shuffle_extent_mixed_2d, shuffle_extent_mixed_3d,
                                shuffle_extent_pure, shuffled_box, shuffled_cube)
from geocipher.keystream import ChaoticKey, chebyshev_next, keystream_from_values
from geocipher.stability import (VerifyConfig, assess, corollary1_bound, lemma1_bound,
                                 sample_ball, verify_bounds)
from oracles import CHEBYSHEV, brute_force_meb

S2, S3 = math.sqrt(2), math.sqrt(3)


def quiet_params(**kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilityWarning)
        return CipherParams(**kw)


def scenario_params(cfg):
    perms = [[[i - 1 for i in p] for p in blocks] for blocks in cfg["permutation"]]
    key = ChaoticKey(tuple(cfg["key"]), cfg["degree"]) if "key" in cfg else None
    return quiet_params(psi=cfg["psi"], key=key, dimension=cfg["dimension"],
                        permutation_source=perms, composition=cfg.get("composition", "xyz"),
                        rotation_decimals=cfg.get("rotation_decimals"))


def test_criterion_01_chebyshev(criterion):
    rng = np.random.default_rng(1)
    k = rng.uniform(-1.0, 1.0, 100_000)
    start = time.perf_counter()
    results = {D: chebyshev_next(k, D) for D in (3, 4, 5)}
    elapsed = time.perf_counter() - start
    err = max(np.max(np.abs(results[D] - CHEBYSHEV[D](k))) for D in (3, 4, 5))
    criterion(1, "Chebyshev map matches T3/T4/T5 on 1e5 points",
              err <= 1e-12 and elapsed < 1.0, f"max err {err:.2e}, {elapsed:.3f} s")


def test_criterion_02_rotations(criterion):
    rng = np.random.default_rng(2)
    angles = rng.uniform(-180.0, 180.0, (10_000, 3))
    worst_orth = worst_det = 0.0
    for handedness in ("ccw", "cw"):
        for composition in ("xyz", "zyx"):
            R = rotation_matrices(angles, handedness, composition)
            gram = np.swapaxes(R, 1, 2) @ R - np.eye(3)
            worst_orth = max(worst_orth, np.max(np.abs(gram).sum(axis=2)))
            worst_det = max(worst_det, np.max(np.abs(np.linalg.det(R) - 1.0)))
    criterion(2, "1e4 rotations orthogonal with det 1",
              worst_orth <= 1e-12 and worst_det <= 1e-12,
              f"max |R^T R - I|_inf {worst_orth:.1e}, max |det - 1| {worst_det:.1e}")


def test_criterion_03_meb(criterion):
    rng = np.random.default_rng(3)
    worst = 0.0
    for t in range(1000):
        dim = 3 if t % 4 else 2
        pts = rng.uniform(-100, 100, (int(rng.integers(1, 9)), dim))
        s = min_enclosing_sphere(pts)
        c, r = brute_force_meb(pts)
        worst = max(worst, np.max(np.abs(s.center - c)), abs(s.radius - r))
    criterion(3, "Welzl MEB equals brute force on 1e3 clouds (n <= 8)", worst <= 1e-9,
              f"max deviation {worst:.1e}")


def test_criterion_04_example1(criterion):
    start = time.perf_counter()
    cfg = scenario("example1")
    params = scenario_params(cfg)
    ks = keystream_from_values(cfg["keystream"])
    sphere = BoundingSphere(cfg["sphere_center"], cfg["sphere_radius"])
    plans = encrypt_pipeline(cfg["plain"], params, sphere, ks)[1]
    arbitrary = decrypt_solve(cfg["cipher"], params, plans, sphere, ks)
    ok = arbitrary.classification == "inconsistent"
    rng = np.random.default_rng(4)
    genuine = []
    for psi in (1 / 9, 0.05, 0.01):
        p = scenario_params({**cfg, "psi": psi})
        c, plans, _ = encrypt_pipeline(rng.uniform(-0.7, 0.7, (2, 2)), p, sphere, ks)
        out = decrypt_solve(c, p, plans, sphere, ks)
        genuine.append((out.classification, out.rank))
    ok &= all(g == ("underdetermined", 3) for g in genuine)
    elapsed = time.perf_counter() - start
    criterion(4, "Example 1: arbitrary cipher inconsistent, genuine cipher rank 3 of 4",
              ok and elapsed < 1.0,
              f"arbitrary {arbitrary.classification} (rank {arbitrary.rank}/"
              f"{arbitrary.augmented_rank}), genuine {genuine[0][0]}, {elapsed:.3f} s")


def test_criterion_05_example2(criterion):
    cfg = scenario("example2")
    sphere = BoundingSphere(cfg["sphere_center"], cfg["sphere_radius"])
    expected = np.asarray(cfg["expected_cipher"])
    verdicts = []
    for conventions in ({"composition": "xyz", "rotation_decimals": None}, {}):
        c = encrypt_pipeline(cfg["plain"], scenario_params({**cfg, **conventions}), sphere)[0]
        r = assess(sphere, c)
        verdicts.append(not r.dimensional and not r.spatial and r.max_deviation > sphere.radius)
    gap = float(np.max(np.abs(c - expected)))
    stretch = "met" if gap <= 1e-3 else "not met"
    criterion(5, "Example 2 is neither dimensionally nor spatially stable", all(verdicts),
              f"max_deviation {r.max_deviation:.1f} > r_p 100; stretch match {stretch}: "
              f"gap {gap:.1e} with composition zyx, 4-decimal rotation entries")


def test_criterion_06_lemma1(criterion):
    start = time.perf_counter()
    s = verify_bounds(VerifyConfig(trials=10_000, seed=6, variant="original"))
    elapsed = time.perf_counter() - start
    criterion(6, "original-rule bound: 1e4 trials without cube, pair or deviation violations",
              s.total_violations == 0 and elapsed < 60.0,
              f"violations cube/pair/bound {s.cube_violations}/{s.pair_violations}/"
              f"{s.bound_violations}, max tightness {s.max_tightness:.3f}, {elapsed:.1f} s")


def test_criterion_07_corollary1(criterion):
    rng = np.random.default_rng(7)
    cases = [(1 / 9, 1.0), (1.0, 100.0), (0.5, 2.0)] + \
        [(1.0 - rng.random(), 100.0 * (1.0 - rng.random())) for _ in range(1000)]
    exact = all(lemma1_bound(psi, r, [0.0, 0.0, 0.0]) == corollary1_bound(psi, r)
                for psi, r in cases)
    # against the exact rational value: three float operations, at most 3 half-ulps apart
    rel = max(abs(Fraction(lemma1_bound(psi, r, [0.0, 0.0, 0.0])) - 6 * (Fraction(psi) + 1) *
                  Fraction(r)) / (6 * (Fraction(psi) + 1) * Fraction(r)) for psi, r in cases)
    exact &= lemma1_bound(1 / 9, 1.0, [0, 0, 0]) == pytest.approx(20 / 3, abs=1e-15)
    criterion(7, "original-rule bound at the origin equals 6(psi+1) r_p",
              exact and rel <= 3 * 2.0**-53,
              f"{len(cases)} cases bitwise equal to the corollary; "
              f"max relative error vs exact {float(rel):.1e}")


def test_criterion_08_lemma3(criterion):
    origin = verify_bounds(VerifyConfig(trials=10_000, seed=8, variant="modified", psi=1 / 12,
                                        origin=True))
    general = verify_bounds(VerifyConfig(trials=10_000, seed=80, variant="modified"))
    ok = (origin.total_violations == 0 and origin.witness_stable_trials == origin.trials
          and general.total_violations == 0)
    criterion(8, "modified rule: ||C|| <= r_p at the origin with psi=1/12, general centers in bound",
              ok,
              f"origin violations {origin.total_violations}, witness-stable "
              f"{origin.witness_stable_trials}/{origin.trials}; general violations "
              f"{general.total_violations}, max tightness {general.max_tightness:.3f}")


def test_criterion_09_extents(criterion):
    values = [
        (shuffle_extent_pure(AxisBox([1, 3], [6, 8])).rho, 7 * S2),
        (shuffle_extent_mixed_2d([3, 4], 1.5), 6 + S2),
        (shuffle_extent_mixed_3d([10, 15, 20], 5).rho, 30 + 10 * S3),
    ]
    formula_err = max(abs(a - b) for a, b in values)

    rng = np.random.default_rng(9)
    escapes = 0
    for t in range(1000):
        n = int(rng.integers(2, 20))
        if t % 2:
            lo = rng.uniform(-50, 50, 2)
            box = AxisBox(lo, lo + rng.uniform(0, 20, 2))
            pts = box.lower + rng.random((n, 2)) * (box.upper - box.lower)
            pool = build_pool(pts, pts[rng.permutation(n)])
            p_shuf, _ = shuffle(pool, random_plan(rng, n, 2), n, 2)
            ext = shuffle_extent_pure(box)
            escapes += not AxisBox([ext.m0] * 2, [ext.M0] * 2).contains(p_shuf, tol=0)
        else:
            dim = 3 if t % 4 else 2
            center = rng.uniform(-100, 100, dim)
            r = float(rng.uniform(0.1, 10))
            plain = sample_ball(rng, n, center, r)
            key = ChaoticKey(tuple(rng.uniform(-1, 1, 6)))
            params = quiet_params(psi=0.1, key=key, dimension=dim)
            step = encrypt_pipeline(plain, params, BoundingSphere(center, r))[2].rounds[0]
            box = shuffled_cube(center, r) if dim == 3 else shuffled_box(center, r)
            both = np.concatenate([step.shuffled_plain, step.shuffled_anchors])
            escapes += not box.contains(both, tol=1e-9)
    criterion(9, "extent formulas and 1e3 shuffle containment trials",
              formula_err <= 1e-12 and escapes == 0,
              f"formula err {formula_err:.1e}, points outside predicted box in {escapes} trials")


def test_criterion_10_round_trip(criterion):
    rng = np.random.default_rng(10)
    worst = 0.0
    failures = 0
    combos = set()
    for _ in range(1000):
        dim = int(rng.choice([2, 3]))
        variant = str(rng.choice(["original", "modified"]))
        rounds = int(rng.integers(1, 3))
        order = str(rng.choice(POOL_ORDERS))
        direction = str(rng.choice(PERM_DIRECTIONS))
        n = int(rng.integers(2, 17))
        center = sample_ball(rng, 1, np.zeros(dim), 100.0)[0]
        plain = sample_ball(rng, n, center, float(rng.uniform(0.1, 10)))
        perms = [[random_plan(rng, n, dim, safe=True, order=order,
                              direction=direction).perms[0]] for _ in range(rounds)]
        params = quiet_params(psi=float(rng.uniform(0.05, 1.0)),
                              key=ChaoticKey(tuple(rng.uniform(-1, 1, 6)), int(rng.integers(3, 6))),
                              dimension=dim, rounds=rounds, variant=variant,
                              permutation_source=perms, pool_order=order,
                              perm_direction=direction)
        cipher, plans, trace = encrypt_pipeline(plain, params)
        try:
            recovered = decrypt(cipher, params, plans, trace.sphere)
        except ValueError:
            failures += 1
            continue
        worst = max(worst, float(np.max(np.abs(recovered - plain))))
        combos.add((dim, variant, rounds))
    criterion(10, "decrypt(encrypt(P)) = P for 1e3 safe-plan configurations",
              failures == 0 and worst <= 1e-8 and len(combos) == 8,
              f"max err {worst:.1e}, non-unique {failures}, "
              f"{len(combos)}/8 dimension-variant-round combinations")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
