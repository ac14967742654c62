"""Permutation-and-rotation point-cloud cipher with geometric stability analysis."""

from .cipher import CipherParams, PermutationPlan, decrypt_solve, encrypt_pipeline
from .geometry import BoundingSphere, min_enclosing_sphere, rotation_matrix
from .keystream import ChaoticKey, Keystream, chebyshev_next, generate
from .stability import assess, lemma1_bound, lemma3_bound, verify_bounds

__version__ = "0.1.0"

__all__ = [
    "BoundingSphere",
    "ChaoticKey",
    "CipherParams",
    "Keystream",
    "PermutationPlan",
    "assess",
    "chebyshev_next",
    "decrypt_solve",
    "encrypt_pipeline",
    "generate",
    "lemma1_bound",
    "lemma3_bound",
    "min_enclosing_sphere",
    "rotation_matrix",
    "verify_bounds",
]
