"""Deterministic seed fan-out and portable Gaussian sampling.

Every experiment derives its randomness from one top-level integer seed.
Sub-streams are obtained by hashing a text label into the seed sequence,
so independent parts of a run (encoder randomness, jammer, noise, ...)
never share a stream and results are reproducible bit for bit.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _label_entropy(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(seed: int, label: str) -> np.random.Generator:
    """Child generator for (seed, label); different labels never collide."""
    seq = np.random.SeedSequence(entropy=[int(seed) & ((1 << 64) - 1), _label_entropy(label)])
    return np.random.default_rng(seq)


def gaussian(rng: np.random.Generator, size: int, std: float = 1.0) -> np.ndarray:
    """Zero-mean normals via Box-Muller on uniform draws.

    Implemented by hand (rather than Generator.normal) so the exact byte
    stream is pinned by this module, not by the numpy version in use.
    """
    pairs = (size + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # (0, 1]: keeps the log finite
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:size]
    return std * z
