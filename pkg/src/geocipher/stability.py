"""Stability verdicts, closed-form deviation bounds and their Monte Carlo check.

Two verdicts are reported for a ciphertext against the plaintext sphere
(P0, r_p):

* strict: the ciphertext's own bounding sphere (C0, r_c) must satisfy
  r_p >= r_c > 0 (dimensional) and ||C0 - P0|| <= r_p - r_c (spatial);
* witness: some enclosing sphere of the ciphertext nests in the plaintext
  sphere, i.e. max_j ||C^j - P0|| <= r_p.

Strict implies witness but not conversely: cipher points (r, 0, 0) and
(0, r, 0) lie on the plaintext sphere, yet their minimal ball pokes out.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .cipher import CipherParams, StabilityWarning, encrypt_pipeline
from .geometry import (INSIDE_TOL, SQRT3, BoundingSphere, as_cloud, extent_stats,
                       min_enclosing_sphere, shuffled_cube)
from .keystream import ChaoticKey

CENTER_MODES = ("meb", "centroid")


@dataclass(frozen=True, eq=False)
class StabilityReport:
    plain_sphere: BoundingSphere
    cipher_sphere: BoundingSphere
    center_offset: float
    dimensional: bool
    spatial: bool
    geometric: bool
    witness_geometric: bool
    max_deviation: float


@dataclass(frozen=True)
class BoundReport:
    lemma1_bound: float
    corollary1_bound: Optional[float]
    lemma3_bound: float
    observed_max: float
    tightness: float
    variant: str


def cipher_sphere(ciphertext, center: str = "meb") -> BoundingSphere:
    """Bounding sphere of the ciphertext centred at its MEB center or centroid."""
    cloud = as_cloud(ciphertext)
    if center == "meb":
        return min_enclosing_sphere(cloud)
    if center == "centroid":
        c0 = cloud.mean(axis=0)
        return BoundingSphere(c0, float(np.max(np.linalg.norm(cloud - c0, axis=1))))
    raise ValueError(f"center must be one of {CENTER_MODES}")


def assess(plain_sphere: BoundingSphere, ciphertext, center: str = "meb",
           tol: float = INSIDE_TOL) -> StabilityReport:
    if plain_sphere.radius <= 0:
        raise ValueError("plaintext sphere is degenerate (r_p <= 0)")
    cloud = as_cloud(ciphertext)
    if cloud.shape[1] != plain_sphere.dimension:
        raise ValueError("ciphertext and sphere dimensions differ")
    sphere = cipher_sphere(cloud, center)
    r_p, r_c = plain_sphere.radius, sphere.radius
    offset = float(np.linalg.norm(sphere.center - plain_sphere.center))
    max_dev = float(np.max(np.linalg.norm(cloud - plain_sphere.center, axis=1)))
    dimensional = r_c > 0 and r_c <= r_p + tol
    spatial = offset <= r_p - r_c + tol
    return StabilityReport(
        plain_sphere=plain_sphere,
        cipher_sphere=sphere,
        center_offset=offset,
        dimensional=bool(dimensional),
        spatial=bool(spatial),
        geometric=bool(dimensional and spatial),
        witness_geometric=max_dev <= r_p + tol,
        max_deviation=max_dev,
    )


# -- closed-form bounds -----------------------------------------------------

def pair_bound(r_p: float, center) -> float:
    """6 r_p + sqrt(3)(M0 - m0): diagonal of the shuffled cube."""
    stats = extent_stats(center)
    return 6.0 * r_p + SQRT3 * (stats.M0 - stats.m0)


def lemma1_bound(psi: float, r_p: float, center) -> float:
    """Deviation bound (psi + 1)(6 r_p + sqrt(3)(M0 - m0)) for the original rule."""
    if not psi > 0 or not r_p > 0:
        raise ValueError("psi and r_p must be positive")
    return (psi + 1.0) * pair_bound(r_p, center)


def corollary1_bound(psi: float, r_p: float) -> float:
    """Origin-centred special case 6 (psi + 1) r_p.

    Evaluated as (psi + 1)(6 r_p) so it agrees bit for bit with
    :func:`lemma1_bound` at the origin.
    """
    if not psi > 0 or not r_p > 0:
        raise ValueError("psi and r_p must be positive")
    return (psi + 1.0) * (6.0 * r_p)


def lemma3_bound(psi: float, r_p: float, center) -> float:
    """Deviation bound for the modified rule.

    psi [12 r_p + 3 sqrt(3)(M0 - m0)] + |1 - psi| ||P0||; the absolute
    value only matters for psi > 1.
    """
    if not psi > 0 or not r_p > 0:
        raise ValueError("psi and r_p must be positive")
    stats = extent_stats(center)
    norm = float(np.linalg.norm(center))
    return psi * (12.0 * r_p + 3.0 * SQRT3 * (stats.M0 - stats.m0)) + abs(1.0 - psi) * norm


def bound_report(plain_sphere: BoundingSphere, ciphertext, psi: float,
                 variant: str = "original") -> BoundReport:
    cloud = as_cloud(ciphertext)
    r_p, p0 = plain_sphere.radius, plain_sphere.center
    l1 = lemma1_bound(psi, r_p, p0)
    l3 = lemma3_bound(psi, r_p, p0)
    c1 = corollary1_bound(psi, r_p) if not np.any(p0) else None
    observed = float(np.max(np.linalg.norm(cloud - p0, axis=1)))
    applicable = l1 if variant == "original" else l3
    return BoundReport(l1, c1, l3, observed, observed / applicable, variant)


# -- Monte Carlo verification -----------------------------------------------

def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Generator for trial ``trial``; reproducible without running the others."""
    return np.random.default_rng([seed, trial])


def sample_ball(rng: np.random.Generator, n: int, center, radius: float,
                boundary: bool = False) -> np.ndarray:
    """Uniform points in (or, with ``boundary``, on) a ball."""
    center = np.asarray(center, dtype=float)
    v = rng.standard_normal((n, len(center)))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    if not boundary:
        v *= rng.random((n, 1)) ** (1.0 / len(center))
    return center + radius * v


@dataclass(frozen=True)
class VerifyConfig:
    trials: int = 1000
    seed: int = 0
    variant: str = "original"
    n_min: int = 2
    n_max: int = 64
    psi: Optional[float] = None          # None: uniform on (0, 1] per trial
    origin: bool = False
    max_center_norm: float = 1e3
    max_radius: float = 1e2
    workers: int = 1


@dataclass
class TrialResult:
    cube_violations: int
    pair_violations: int
    bound_violations: int
    tightness: float
    witness_stable: bool


@dataclass
class VerifySummary:
    trials: int
    variant: str
    cube_violations: int = 0
    pair_violations: int = 0
    bound_violations: int = 0
    max_tightness: float = 0.0
    witness_stable_trials: int = 0
    violating_trials: list = field(default_factory=list)

    @property
    def total_violations(self) -> int:
        return self.cube_violations + self.pair_violations + self.bound_violations

    def to_dict(self) -> dict:
        out = asdict(self)
        out["total_violations"] = self.total_violations
        return out


def check_trial(plain, sphere: BoundingSphere, params: CipherParams,
                keystream=None) -> TrialResult:
    """Encrypt one round and check the cube, pair and deviation bounds.

    Counts are per point; slack is relative to the problem scale only.
    """
    cipher, _, trace = encrypt_pipeline(plain, params, sphere, keystream)
    step = trace.rounds[0]
    p0, r_p = sphere.center, sphere.radius
    scale = max(1.0, float(np.max(np.abs(p0))) + r_p)
    tol = 1e-9 * scale

    cube = shuffled_cube(p0, r_p)
    shuffled = np.concatenate([step.shuffled_plain, step.shuffled_anchors])
    outside = (shuffled < cube.lower - tol) | (shuffled > cube.upper + tol)
    cube_viol = int(np.sum(np.any(outside, axis=1)))

    pair = np.linalg.norm(step.shuffled_plain - step.shuffled_anchors, axis=1)
    pair_viol = int(np.sum(pair > pair_bound(r_p, p0) + tol))

    bound = (lemma1_bound if params.variant == "original" else lemma3_bound)(params.psi, r_p, p0)
    dev = np.linalg.norm(cipher - p0, axis=1)
    bound_viol = int(np.sum(dev > bound + tol))
    witness = bool(np.max(dev) <= r_p + tol)
    return TrialResult(cube_viol, pair_viol, bound_viol, float(np.max(dev) / bound), witness)


def random_trial(config: VerifyConfig, t: int):
    """Plaintext, sphere and params of trial ``t``."""
    rng = trial_rng(config.seed, t)
    n = int(rng.integers(config.n_min, config.n_max + 1))
    psi = config.psi if config.psi is not None else 1.0 - rng.random()
    r_p = config.max_radius * (1.0 - rng.random())
    if config.origin:
        p0 = np.zeros(3)
    else:
        p0 = sample_ball(rng, 1, np.zeros(3), config.max_center_norm)[0]
    plain = sample_ball(rng, n, p0, r_p)
    key = ChaoticKey(tuple(rng.uniform(-1.0, 1.0, 6)), int(rng.integers(3, 7)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilityWarning)
        params = CipherParams(psi=psi, key=key, variant=config.variant)
    return plain, BoundingSphere(p0, r_p), params


def _run_trials(config: VerifyConfig, start: int, stop: int) -> list:
    out = []
    for t in range(start, stop):
        plain, sphere, params = random_trial(config, t)
        out.append((t, check_trial(plain, sphere, params)))
    return out


def _chunks(total: int, parts: int):
    step = -(-total // parts)
    return [(a, min(a + step, total)) for a in range(0, total, step)]


def verify_bounds(config: VerifyConfig) -> VerifySummary:
    """Run random trials and count violations of the proved bounds.

    Aggregation is by sums and max, so the summary does not depend on
    execution order or the number of workers.
    """
    if config.trials < 1:
        raise ValueError("trials must be >= 1")
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            futures = [pool.submit(_run_trials, config, a, b)
                       for a, b in _chunks(config.trials, config.workers)]
            results = [r for f in futures for r in f.result()]
    else:
        results = _run_trials(config, 0, config.trials)

    summary = VerifySummary(config.trials, config.variant)
    for t, r in sorted(results, key=lambda item: item[0]):
        summary.cube_violations += r.cube_violations
        summary.pair_violations += r.pair_violations
        summary.bound_violations += r.bound_violations
        summary.max_tightness = max(summary.max_tightness, r.tightness)
        summary.witness_stable_trials += r.witness_stable
        if r.cube_violations or r.pair_violations or r.bound_violations:
            summary.violating_trials.append(t)
    return summary


# -- instability census -----------------------------------------------------

@dataclass(frozen=True)
class CensusConfig:
    trials: int = 1000                   # per bucket
    seed: int = 0
    psi: float = 1.0 / 9.0
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0
    n_min: int = 2
    n_max: int = 16
    control: bool = False                # ciphertext := plaintext


def instability_census(config: CensusConfig) -> dict:
    """Fraction of geometrically unstable trials, boundary vs interior sampling.

    Each trial encrypts with the plaintext's own minimal sphere, so the
    control run (ciphertext equal to plaintext) is stable by construction.
    """
    if config.trials < 1:
        raise ValueError("trials must be >= 1")
    table = {}
    for b, bucket in enumerate(("boundary", "interior")):
        strict = witness = 0
        for t in range(config.trials):
            rng = np.random.default_rng([config.seed, b, t])
            n = int(rng.integers(config.n_min, config.n_max + 1))
            plain = sample_ball(rng, n, config.center, config.radius, bucket == "boundary")
            sphere = min_enclosing_sphere(plain)
            if config.control:
                cipher = plain
            else:
                key = ChaoticKey(tuple(rng.uniform(-1.0, 1.0, 6)), int(rng.integers(3, 7)))
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", StabilityWarning)
                    params = CipherParams(psi=config.psi, key=key)
                cipher = encrypt_pipeline(plain, params, sphere)[0]
            report = assess(sphere, cipher)
            strict += not report.geometric
            witness += not report.witness_geometric
        table[bucket] = {
            "trials": config.trials,
            "unstable": strict,
            "unstable_fraction": strict / config.trials,
            "witness_unstable": witness,
            "witness_unstable_fraction": witness / config.trials,
        }
    return table

