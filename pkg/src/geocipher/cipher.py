"""Permutation-and-rotation point-cloud cipher and its decryption analysis.

Conventions (all overridable through :class:`CipherParams`):

* Pool layout ``point-major``: plaintext points first, then anchors, each
  point contributing its d coordinates in order.  ``axis-major`` lists all
  x's, then all y's, ... within each role; ``interleaved`` alternates
  P^1, O^1, P^2, O^2, ...
* Permutation direction ``gather``: output entry i takes pool entry
  perm[i].  ``scatter`` sends pool entry i to output slot perm[i].
* 3D material for point j of round v is the keystream state
  K^(j + floor(v/2) N): components 1-3 give the anchor offset, 4-6 the
  angles.  In 2D each point consumes a triple (two anchor components, one
  angle) from the scalar stream k^1_1, k^1_2, ..., k^1_6, k^2_1, ...
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import (COMPOSITIONS, HANDEDNESS, BoundingSphere, as_cloud, min_enclosing_sphere,
                       rotation_matrices)
from .keystream import ChaoticKey, Keystream, derive_permutation, generate

VARIANTS = ("original", "modified")
POOL_ORDERS = ("point-major", "axis-major", "interleaved")
PERM_DIRECTIONS = ("gather", "scatter")

BLOCK_THRESHOLD = 8
RESIDUAL_TOL = 1e-6
RANK_RTOL = 1e-9


class StabilityWarning(UserWarning):
    """Scaling factor outside the range where stability can be expected."""


@dataclass(frozen=True)
class CipherParams:
    psi: float
    key: Optional[ChaoticKey] = None
    dimension: int = 3
    rounds: int = 1
    variant: str = "original"
    # "derived", or explicit 0-based permutations: one list of block perms per round
    permutation_source: object = "derived"
    pool_order: str = "point-major"
    perm_direction: str = "gather"
    handedness: str = "ccw"
    composition: str = "xyz"
    # round rotation-matrix entries, as a fixed-precision reference computation would
    rotation_decimals: Optional[int] = None

    def __post_init__(self):
        if not self.psi > 0:
            raise ValueError("psi must be > 0")
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if self.rounds not in (1, 2):
            raise ValueError("rounds must be 1 or 2")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.pool_order not in POOL_ORDERS:
            raise ValueError(f"pool_order must be one of {POOL_ORDERS}")
        if self.perm_direction not in PERM_DIRECTIONS:
            raise ValueError(f"perm_direction must be one of {PERM_DIRECTIONS}")
        if self.handedness not in HANDEDNESS:
            raise ValueError(f"handedness must be one of {HANDEDNESS}")
        if self.composition not in COMPOSITIONS:
            raise ValueError(f"composition must be one of {COMPOSITIONS}")
        if isinstance(self.permutation_source, str):
            if self.permutation_source != "derived":
                raise ValueError("permutation_source must be 'derived' or explicit permutations")
        else:
            rounds = tuple(tuple(tuple(int(i) for i in p) for p in blocks)
                           for blocks in self.permutation_source)
            if len(rounds) < self.rounds:
                raise ValueError("explicit permutations needed for every round")
            object.__setattr__(self, "permutation_source", rounds)
        limit = 1 / 9 if self.variant == "original" else 1 / 12
        if self.psi > limit:
            warnings.warn(f"psi={self.psi:g} exceeds {limit:.4g} for the {self.variant} rule",
                          StabilityWarning, stacklevel=3)


@dataclass(frozen=True, eq=False)
class AnchorSet:
    anchors: np.ndarray
    sphere: BoundingSphere


@dataclass(frozen=True, eq=False)
class AngleSet:
    """Integer-degree angles, shape (N, 3) in 3D or (N, 1) in 2D."""

    angles: np.ndarray


@dataclass(frozen=True, eq=False)
class PermutationPlan:
    """Block-wise permutation of the coordinate pool (0-based)."""

    pool_len: int
    blocks: tuple
    perms: tuple
    direction: str = "gather"

    def __post_init__(self):
        blocks = tuple((int(a), int(b)) for a, b in self.blocks)
        perms = tuple(np.asarray(p, dtype=int) for p in self.perms)
        if len(blocks) != len(perms):
            raise ValueError("one permutation per block is required")
        pos = 0
        for (start, stop), perm in zip(blocks, perms):
            if start != pos or stop <= start:
                raise ValueError("blocks must partition the pool contiguously")
            if not np.array_equal(np.sort(perm), np.arange(stop - start)):
                raise ValueError(f"block {start}:{stop} permutation is not a bijection")
            pos = stop
        if pos != self.pool_len:
            raise ValueError("blocks do not cover the whole pool")
        if self.direction not in PERM_DIRECTIONS:
            raise ValueError(f"direction must be one of {PERM_DIRECTIONS}")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "perms", perms)

    @classmethod
    def single(cls, perm, direction: str = "gather") -> "PermutationPlan":
        perm = np.asarray(perm, dtype=int)
        return cls(len(perm), ((0, len(perm)),), (perm,), direction)

    def gather_index(self) -> np.ndarray:
        """Index g with ``shuffled = pool[g]``."""
        g = np.empty(self.pool_len, dtype=int)
        for (start, stop), perm in zip(self.blocks, self.perms):
            idx = np.arange(start, stop)
            if self.direction == "gather":
                g[idx] = idx[perm]
            else:
                g[idx[perm]] = idx
        return g

    def apply(self, pool: np.ndarray) -> np.ndarray:
        pool = np.asarray(pool)
        if len(pool) != self.pool_len:
            raise ValueError(f"plan expects a pool of {self.pool_len}, got {len(pool)}")
        return pool[self.gather_index()]

    def invert(self, shuffled: np.ndarray) -> np.ndarray:
        shuffled = np.asarray(shuffled)
        if len(shuffled) != self.pool_len:
            raise ValueError(f"plan expects a pool of {self.pool_len}, got {len(shuffled)}")
        out = np.empty_like(shuffled)
        out[self.gather_index()] = shuffled
        return out


@dataclass(frozen=True, eq=False)
class DecryptOutcome:
    classification: str
    solution: Optional[np.ndarray]
    residual: float
    rank: int
    augmented_rank: int
    matrix: np.ndarray
    rhs: np.ndarray


@dataclass(eq=False)
class RoundTrace:
    round: int
    anchors: np.ndarray
    angles: np.ndarray
    pool: np.ndarray
    plan: PermutationPlan
    shuffled_plain: np.ndarray
    shuffled_anchors: np.ndarray
    cipher: np.ndarray


@dataclass(eq=False)
class PipelineTrace:
    plain: np.ndarray
    sphere: BoundingSphere
    keystream: Keystream
    rounds: list = field(default_factory=list)

    @property
    def cipher(self) -> np.ndarray:
        return self.rounds[-1].cipher


# -- key material -----------------------------------------------------------

def _material(ks: Keystream, round: int, n: int, dim: int) -> np.ndarray:
    """Per-point keystream rows: (n, 6) in 3D, (n, 3) triples in 2D."""
    if round not in (1, 2):
        raise ValueError("round must be 1 or 2")
    offset = (round // 2) * n
    if dim == 3:
        if len(ks) < offset + n:
            raise ValueError(f"keystream exhausted: need {offset + n} states, have {len(ks)}")
        return ks.states[offset:offset + n]
    flat = ks.flat
    if len(flat) < 3 * (offset + n):
        raise ValueError(f"keystream exhausted: need {3 * (offset + n)} values, have {len(flat)}")
    return flat[3 * offset:3 * (offset + n)].reshape(n, 3)


def gen_anchors(sphere: BoundingSphere, ks: Keystream, round: int, n: int) -> AnchorSet:
    """Anchor points O^j = P0 + r_p * (keystream components)."""
    dim = sphere.dimension
    rows = _material(ks, round, n, dim)
    anchors = sphere.center + sphere.radius * rows[:, :dim]
    return AnchorSet(anchors, sphere)


def angle_degrees(k) -> np.ndarray:
    return np.floor(180.0 * np.asarray(k, dtype=float)).astype(int)


def gen_angles(ks: Keystream, round: int, n: int, dim: int) -> AngleSet:
    """Integer-degree angles floor(180 k): three per point in 3D, one in 2D."""
    rows = _material(ks, round, n, dim)
    k = rows[:, 3:6] if dim == 3 else rows[:, 2:3]
    return AngleSet(angle_degrees(k))


# -- pool and shuffle -------------------------------------------------------

def pool_layout(n: int, dim: int, order: str = "point-major") -> np.ndarray:
    """Flat pool position of (role, point, axis); role 0 = plaintext, 1 = anchor."""
    role, j, a = np.meshgrid(np.arange(2), np.arange(n), np.arange(dim), indexing="ij")
    if order == "point-major":
        return role * n * dim + j * dim + a
    if order == "axis-major":
        return role * n * dim + a * n + j
    if order == "interleaved":
        return j * 2 * dim + role * dim + a
    raise ValueError(f"pool order must be one of {POOL_ORDERS}")


def build_pool(plain, anchors, order: str = "point-major") -> np.ndarray:
    """Flatten plaintext and anchor coordinates into one array (duplicates kept).

    Extra trailing axes ride along, which lets the decryptor push affine
    expressions through the same code.
    """
    plain = np.asarray(plain, dtype=float)
    anchors = np.asarray(anchors, dtype=float)
    if plain.shape != anchors.shape:
        raise ValueError(f"size mismatch: {plain.shape} plaintext vs {anchors.shape} anchors")
    n, dim = plain.shape[:2]
    pos = pool_layout(n, dim, order)
    pool = np.empty((2 * n * dim,) + plain.shape[2:])
    pool[pos.reshape(-1)] = np.stack([plain, anchors]).reshape((-1,) + plain.shape[2:])
    return pool


def unbuild_pool(pool, n: int, dim: int, order: str = "point-major") -> tuple[np.ndarray, np.ndarray]:
    pool = np.asarray(pool)
    if len(pool) != 2 * n * dim:
        raise ValueError(f"pool of length {len(pool)} does not hold {n} points of dimension {dim}")
    stacked = pool[pool_layout(n, dim, order)]
    return stacked[0], stacked[1]


def block_partition(n: int, dim: int) -> tuple:
    """Contiguous blocks: floor(N/8) of them when N > 8, else one.

    The last block absorbs the remainder.
    """
    pool_len = 2 * dim * n
    count = n // BLOCK_THRESHOLD if n > BLOCK_THRESHOLD else 1
    size = pool_len // count
    return tuple((b * size, pool_len if b == count - 1 else (b + 1) * size)
                 for b in range(count))


def derive_plan(ks: Keystream, n: int, dim: int, round: int = 1,
                direction: str = "gather") -> PermutationPlan:
    blocks = block_partition(n, dim)
    first = (round - 1) * len(blocks)
    perms = [derive_permutation(ks, stop - start, first + b)
             for b, (start, stop) in enumerate(blocks)]
    return PermutationPlan(2 * dim * n, blocks, perms, direction)


def explicit_plan(perms: Sequence[Sequence[int]], n: int, dim: int,
                  direction: str = "gather") -> PermutationPlan:
    """Plan from explicit 0-based permutations.

    A single permutation spanning the whole pool is accepted for any N;
    otherwise one permutation per standard block is expected.
    """
    pool_len = 2 * dim * n
    if len(perms) == 1 and len(perms[0]) == pool_len:
        return PermutationPlan.single(perms[0], direction)
    return PermutationPlan(pool_len, block_partition(n, dim), perms, direction)


def random_plan(rng: np.random.Generator, n: int, dim: int, *, safe: bool = False,
                order: str = "point-major", direction: str = "gather") -> PermutationPlan:
    """Uniform single-block plan; ``safe`` keeps plaintext coordinates in P' slots."""
    pool_len = 2 * dim * n
    if not safe:
        return PermutationPlan.single(rng.permutation(pool_len), direction)
    pos = pool_layout(n, dim, order)
    plain_slots, anchor_slots = pos[0].reshape(-1), pos[1].reshape(-1)
    g = np.empty(pool_len, dtype=int)
    g[plain_slots] = rng.permutation(plain_slots)
    g[anchor_slots] = rng.permutation(anchor_slots)
    if direction == "gather":
        return PermutationPlan.single(g, direction)
    inv = np.empty_like(g)
    inv[g] = np.arange(pool_len)
    return PermutationPlan.single(inv, direction)


def shuffle(pool, plan: PermutationPlan, n: int, dim: int,
            order: str = "point-major") -> tuple[np.ndarray, np.ndarray]:
    """Permute the pool and re-chunk it into (P', O')."""
    return unbuild_pool(plan.apply(pool), n, dim, order)


def unshuffle(shuffled_plain, shuffled_anchors, plan: PermutationPlan,
              order: str = "point-major") -> np.ndarray:
    return plan.invert(build_pool(shuffled_plain, shuffled_anchors, order))


# -- localized rotation -----------------------------------------------------

def _rotate_about(shuffled_plain, shuffled_anchors, R, psi: float, variant: str) -> np.ndarray:
    diff = np.asarray(shuffled_plain) - np.asarray(shuffled_anchors)
    rotated = np.einsum("nij,nj...->ni...", R, diff)
    if variant == "original":
        return psi * rotated + shuffled_anchors
    return psi * (rotated + shuffled_anchors)


def _matrices(angles, handedness: str, composition: str, decimals: Optional[int]) -> np.ndarray:
    a = angles.angles if isinstance(angles, AngleSet) else np.asarray(angles)
    R = rotation_matrices(a, handedness, composition)
    return R if decimals is None else np.round(R, decimals)


def encrypt_original(shuffled_plain, shuffled_anchors, angles, psi: float,
                     handedness: str = "ccw", composition: str = "xyz",
                     rotation_decimals: Optional[int] = None) -> np.ndarray:
    """C^j = psi R^j (P'^j - O'^j) + O'^j."""
    if not psi > 0:
        raise ValueError("psi must be > 0")
    R = _matrices(angles, handedness, composition, rotation_decimals)
    return _rotate_about(shuffled_plain, shuffled_anchors, R, psi, "original")


def encrypt_modified(shuffled_plain, shuffled_anchors, angles, psi: float,
                     handedness: str = "ccw", composition: str = "xyz",
                     rotation_decimals: Optional[int] = None) -> np.ndarray:
    """C^j = psi [R^j (P'^j - O'^j) + O'^j]."""
    if not psi > 0:
        raise ValueError("psi must be > 0")
    R = _matrices(angles, handedness, composition, rotation_decimals)
    return _rotate_about(shuffled_plain, shuffled_anchors, R, psi, "modified")


def encrypt_points(shuffled_plain, shuffled_anchors, angles, params: CipherParams) -> np.ndarray:
    """Apply the rule chosen by ``params.variant`` with its conventions."""
    encrypt = encrypt_original if params.variant == "original" else encrypt_modified
    return encrypt(shuffled_plain, shuffled_anchors, angles, params.psi, params.handedness,
                   params.composition, params.rotation_decimals)


# -- pipeline ---------------------------------------------------------------

def plan_for_round(params: CipherParams, ks: Keystream, n: int, round: int) -> PermutationPlan:
    if params.permutation_source == "derived":
        return derive_plan(ks, n, params.dimension, round, params.perm_direction)
    return explicit_plan(params.permutation_source[round - 1], n, params.dimension,
                         params.perm_direction)


def keystream_for(params: CipherParams, n: int) -> Keystream:
    if params.key is None:
        raise ValueError("no key given and no explicit keystream supplied")
    return generate(params.key, 2 * n)


def encrypt_round(points, sphere: BoundingSphere, ks: Keystream, round: int,
                  plan: PermutationPlan, params: CipherParams) -> RoundTrace:
    """One full round: anchors, angles, pool, shuffle, localized rotation."""
    points = as_cloud(points)
    n, dim = points.shape
    if dim != params.dimension or sphere.dimension != dim:
        raise ValueError("dimension mismatch between points, sphere and params")
    anchors = gen_anchors(sphere, ks, round, n).anchors
    angles = gen_angles(ks, round, n, dim)
    pool = build_pool(points, anchors, params.pool_order)
    p_shuf, o_shuf = shuffle(pool, plan, n, dim, params.pool_order)
    cipher = encrypt_points(p_shuf, o_shuf, angles, params)
    return RoundTrace(round, anchors, angles.angles, pool, plan, p_shuf, o_shuf, cipher)


def encrypt_pipeline(plain, params: CipherParams, sphere: Optional[BoundingSphere] = None,
                     keystream: Optional[Keystream] = None):
    """Encrypt a cloud end to end.

    ``sphere`` defaults to the minimal enclosing sphere of ``plain`` and is
    reused by both rounds.  Returns ``(ciphertext, plans, trace)``.
    """
    plain = as_cloud(plain)
    n = len(plain)
    if n < 2:
        raise ValueError("need at least 2 points")
    if sphere is None:
        sphere = min_enclosing_sphere(plain)
    ks = keystream if keystream is not None else keystream_for(params, n)
    trace = PipelineTrace(plain, sphere, ks)
    points = plain
    plans = []
    for rnd in range(1, params.rounds + 1):
        plan = plan_for_round(params, ks, n, rnd)
        step = encrypt_round(points, sphere, ks, rnd, plan, params)
        trace.rounds.append(step)
        plans.append(plan)
        points = step.cipher
    return points, plans, trace


# -- decryption -------------------------------------------------------------

def _affine_cipher(n: int, params: CipherParams, plans, sphere: BoundingSphere,
                   ks: Keystream) -> np.ndarray:
    """Cipher coordinates as affine functions of the plaintext coordinates.

    Returns shape (n, d, n*d + 1): the last column is the constant term.
    """
    dim = params.dimension
    unknowns = n * dim
    points = np.zeros((n, dim, unknowns + 1))
    points[..., :unknowns] = np.eye(unknowns).reshape(n, dim, unknowns)
    for rnd, plan in zip(range(1, params.rounds + 1), plans):
        if plan.pool_len != 2 * dim * n:
            raise ValueError("malformed plan: pool length does not match the ciphertext")
        anchors = np.zeros_like(points)
        anchors[..., unknowns] = gen_anchors(sphere, ks, rnd, n).anchors
        angles = gen_angles(ks, rnd, n, dim)
        pool = build_pool(points, anchors, params.pool_order)
        p_shuf, o_shuf = shuffle(pool, plan, n, dim, params.pool_order)
        points = encrypt_points(p_shuf, o_shuf, angles, params)
    return points


def _rank(singular_values: np.ndarray, tol: float) -> int:
    return int(np.sum(singular_values > tol))


def decrypt_solve(cipher, params: CipherParams, plans: Sequence[PermutationPlan],
                  sphere: BoundingSphere, keystream: Optional[Keystream] = None) -> DecryptOutcome:
    """Assemble and classify the linear system in the plaintext coordinates.

    The receiver knows key, sphere and plans, so anchors are constants and
    each cipher point contributes d equations.  Classification:
    ``unique`` (full column rank, residual <= 1e-6), ``inconsistent``
    (residual > 1e-6) or ``underdetermined`` (rank deficient, consistent).
    """
    cipher = as_cloud(cipher)
    n, dim = cipher.shape
    if dim != params.dimension:
        raise ValueError("ciphertext dimension does not match params")
    if len(plans) < params.rounds:
        raise ValueError("malformed plan: one plan per round is required")
    ks = keystream if keystream is not None else keystream_for(params, n)
    affine = _affine_cipher(n, params, plans, sphere, ks)
    unknowns = n * dim
    A = affine[..., :unknowns].reshape(unknowns, unknowns)
    b = cipher.reshape(-1) - affine[..., unknowns].reshape(-1)

    sv = np.linalg.svd(A, compute_uv=False)
    tol = RANK_RTOL * (sv[0] if len(sv) and sv[0] > 0 else 1.0)
    rank = _rank(sv, tol)
    aug_rank = _rank(np.linalg.svd(np.column_stack([A, b]), compute_uv=False), tol)
    x = np.linalg.lstsq(A, b, rcond=RANK_RTOL)[0]
    residual = float(np.linalg.norm(A @ x - b))

    if residual > RESIDUAL_TOL:
        label = "inconsistent"
    elif rank == unknowns:
        label = "unique"
    else:
        label = "underdetermined"
    solution = x.reshape(n, dim) if label == "unique" else None
    return DecryptOutcome(label, solution, residual, rank, aug_rank, A, b)


def decrypt(cipher, params: CipherParams, plans, sphere: BoundingSphere,
            keystream: Optional[Keystream] = None) -> np.ndarray:
    """Recover the plaintext or raise if the system has no unique solution."""
    outcome = decrypt_solve(cipher, params, plans, sphere, keystream)
    if outcome.classification != "unique":
        raise ValueError(f"decryption is {outcome.classification} "
                         f"(rank {outcome.rank}, residual {outcome.residual:.3g})")
    return outcome.solution

