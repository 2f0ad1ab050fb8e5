"""Scaled-integer nested lattices, dithered modular encoding, and sum recovery.

Lattices here are self-similar pairs: coarse c*Z^N nested around fine
(c/m)*Z^N, with the half-open fundamental box [-c/2, c/2)^N as the
fundamental region.  Quantizer ties at +c/2 round down, which makes the
modulus a total function and the codebook an exact finite Abelian group
of size m^N under mod-c addition.

`representation_index` recovers the result of summing K points of a
fundamental region from the reduced sum plus a bounded integer index:
given the residual w, the integer carry per coordinate is confined to K
consecutive values, so an index T with 1 <= T <= K^N pins the real sum.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .entropy import JointDistribution, conditional_shannon, shannon_entropy, side_info_violation_mass
from .errors import DomainError, ResourceCapError, ValidationError

# One lattice vector is a plain float ndarray in channel-input units.
LatticeVector = np.ndarray

DEFAULT_ENUM_CAP = 1 << 16
_KEY_DECIMALS = 9


def as_vector(x) -> LatticeVector:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(v)):
        raise ValidationError("lattice vectors must have finite entries")
    return v


def _key(x: np.ndarray) -> tuple:
    return tuple(np.round(np.asarray(x, dtype=float), _KEY_DECIMALS).tolist())


@dataclass(frozen=True)
class ScaledLattice:
    """spacing * Z^dim with fundamental region [-spacing/2, spacing/2)^dim."""

    dim: int
    spacing: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dimension must be positive")
        if not self.spacing > 0:
            raise ValidationError("spacing must be positive")

    def reduce(self, x) -> LatticeVector:
        """Quantization error of x: the representative of x in the fundamental box."""
        v = as_vector(x)
        if v.shape != (self.dim,):
            raise DomainError(f"expected a vector of dimension {self.dim}")
        s = self.spacing
        r = v - s * np.floor(v / s + 0.5)
        # guard against float round-off landing exactly on the excluded face
        r[r >= s / 2] -= s
        r[r < -s / 2] += s
        return r

    def contains_in_region(self, x) -> bool:
        v = as_vector(x)
        half = self.spacing / 2
        return bool(np.all(v >= -half) and np.all(v < half))


@dataclass(frozen=True)
class NestedLatticePair:
    """Coarse lattice c*Z^N with fine lattice (c/m)*Z^N nested inside it."""

    dim: int
    coarse_scale: float
    nesting: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dimension must be positive")
        if not self.coarse_scale > 0:
            raise ValidationError("coarse scale must be positive")
        if self.nesting < 2:
            raise ValidationError("nesting factor must be an integer >= 2")

    @property
    def coarse(self) -> ScaledLattice:
        return ScaledLattice(self.dim, self.coarse_scale)

    @property
    def fine(self) -> ScaledLattice:
        return ScaledLattice(self.dim, self.coarse_scale / self.nesting)

    @property
    def codebook_size(self) -> int:
        return self.nesting ** self.dim

    def coordinate_values(self) -> np.ndarray:
        """Ascending 1D codebook values; the codebook is their N-fold product."""
        m = self.nesting
        delta = self.coarse_scale / m
        k0 = -(m // 2)
        return delta * np.arange(k0, k0 + m, dtype=float)

    def to_json(self) -> str:
        return json.dumps({"N": self.dim, "c": self.coarse_scale, "m": self.nesting})

    @classmethod
    def from_json(cls, text: str) -> "NestedLatticePair":
        obj = json.loads(text)
        return cls(int(obj["N"]), float(obj["c"]), int(obj["m"]))


def mod_coarse(x, pair: NestedLatticePair) -> LatticeVector:
    """x reduced into the coarse fundamental box [-c/2, c/2)^N."""
    return pair.coarse.reduce(x)


def enumerate_codebook(pair: NestedLatticePair, cap: int = DEFAULT_ENUM_CAP) -> list:
    """All m^N codebook points in lexicographic coordinate order."""
    if pair.codebook_size > cap:
        raise ResourceCapError(
            f"codebook size {pair.codebook_size} exceeds enumeration cap {cap}")
    values = pair.coordinate_values()
    grids = np.meshgrid(*([values] * pair.dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    return [pts[i].copy() for i in range(pts.shape[0])]


def in_codebook(x, pair: NestedLatticePair, tol: float = 1e-9) -> bool:
    v = as_vector(x)
    if v.shape != (pair.dim,):
        return False
    delta = pair.coarse_scale / pair.nesting
    on_fine = np.all(np.abs(v / delta - np.round(v / delta)) <= tol)
    return bool(on_fine) and pair.coarse.contains_in_region(v)


def group_add(x, y, pair: NestedLatticePair) -> LatticeVector:
    """Codebook group law: (x + y) mod c*Z^N; inputs must be codebook members."""
    if not in_codebook(x, pair) or not in_codebook(y, pair):
        raise DomainError("group_add requires codebook members")
    return mod_coarse(as_vector(x) + as_vector(y), pair)


def dither_encode(u, d, pair: NestedLatticePair) -> LatticeVector:
    """Channel input (u + d) mod c*Z^N for codebook point u and dither d."""
    if not in_codebook(u, pair):
        raise DomainError("dither_encode requires a codebook point")
    return mod_coarse(as_vector(u) + as_vector(d), pair)


def codebook_rate(pair: NestedLatticePair) -> float:
    """Bits per channel use: (1/N) log2 m^N = log2 m."""
    return math.log2(pair.nesting)


@dataclass(frozen=True)
class RepresentationIndex:
    """Integer index T for the carry of a K-point sum; 1 <= T <= K^dim."""

    T: int
    summands: int
    dim: int

    def __post_init__(self):
        if self.summands < 1 or self.dim < 1:
            raise ValidationError("summands and dim must be positive")
        if not (1 <= self.T <= self.summands ** self.dim):
            raise DomainError(
                f"T={self.T} outside [1, {self.summands ** self.dim}]")


def _carry_floor(w: np.ndarray, spacing: float, k: int) -> np.ndarray:
    """Smallest integer carry consistent with residual w for a K-point sum.

    With every summand in [-s/2, s/2), the sum lies in [-K s/2, K s/2), so
    for a fixed residual the carry z satisfies -K/2 - w/s <= z < K/2 - w/s:
    exactly K consecutive integers.
    """
    return np.ceil(-k / 2 - w / spacing - 1e-12).astype(int)


def representation_index(points: Sequence, lattice) -> tuple[RepresentationIndex, LatticeVector]:
    """Encode sum(points) as (T, sum mod lattice) with T <= K^N.

    `lattice` may be a ScaledLattice or a NestedLatticePair (its fine
    lattice is then used).  Every point must lie in the fundamental region.
    The index is the lexicographic position of the carry vector inside the
    residual's candidate box, most significant coordinate first.
    """
    lat = lattice.fine if isinstance(lattice, NestedLatticePair) else lattice
    pts = [as_vector(p) for p in points]
    if not pts:
        raise DomainError("need at least one point")
    for p in pts:
        if p.shape != (lat.dim,):
            raise DomainError("point dimension mismatch")
        if not lat.contains_in_region(p):
            raise DomainError(f"point {p} outside the fundamental region")
    k = len(pts)
    total = np.sum(pts, axis=0)
    w = lat.reduce(total)
    z = np.round((total - w) / lat.spacing).astype(int)
    z_min = _carry_floor(w, lat.spacing, k)
    digits = z - z_min
    if np.any(digits < 0) or np.any(digits >= k):
        raise DomainError("carry outside its candidate box; inputs not in region?")
    t = 0
    for d in digits:
        t = t * k + int(d)
    return RepresentationIndex(t + 1, k, lat.dim), w


def reconstruct_sum(idx: RepresentationIndex, s_mod, lattice) -> LatticeVector:
    """Invert representation_index: recover the exact real sum."""
    lat = lattice.fine if isinstance(lattice, NestedLatticePair) else lattice
    if idx.dim != lat.dim:
        raise DomainError("index dimension mismatch")
    w = as_vector(s_mod)
    if w.shape != (lat.dim,):
        raise DomainError("residual dimension mismatch")
    k = idx.summands
    digits = np.zeros(lat.dim, dtype=int)
    t = idx.T - 1
    for j in range(lat.dim - 1, -1, -1):
        digits[j] = t % k
        t //= k
    z = _carry_floor(w, lat.spacing, k) + digits
    return w + z * lat.spacing


# ---------------------------------------------------------------------------
# Exhaustive disclosure report for the real sum of two dithered codewords.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SumSecrecyReport:
    """How much the real dithered sum reveals about u1 beyond the modular sum.

    shannon_gap is H(u1 | modular sum) - H(u1 | real sum); it can never
    exceed `shannon_bound` = N bits (the carry takes at most 2^N values).
    For renyi2/min the report carries the mass of carry slices whose
    entropy drop exceeds log2||T|| + s, against tail bounds 2^(1-s/2) and
    2^(-s) respectively.
    """

    measure: str
    sign: str
    s: float | None
    shannon_gap: float | None
    shannon_bound: float | None
    max_slice_violation_mass: float | None
    joint_violation_mass: float | None
    violation_bound: float | None
    masked_independent: bool
    max_carry_labels: int
    passed: bool


def _exact_joint(counts: dict, total: int, x_symbols, t_symbols) -> JointDistribution:
    rows = tuple(
        tuple(Fraction(counts.get((x, t), 0), total) for t in t_symbols)
        for x in x_symbols
    )
    return JointDistribution(tuple(x_symbols), tuple(t_symbols), rows)


def dithered_sum_secrecy_report(pair: NestedLatticePair, d1, d2, sign: str = "+",
                                s: float = 2.0, measure: str = "shannon",
                                cap: int = DEFAULT_ENUM_CAP) -> SumSecrecyReport:
    """Exhaustive secrecy audit of V = X1 +/- X2 for independent uniform u1, u2.

    X_i = (u_i + d_i) mod c with fixed dithers.  The observation V is
    decomposed into its modular reduction and the integer carry; the
    report checks that disclosing the carry costs at most N bits of
    Shannon entropy, and (for renyi2/min) that slices with a larger drop
    have the guaranteed small total mass.
    """
    if sign not in ("+", "-"):
        raise DomainError("sign must be '+' or '-'")
    if measure not in ("shannon", "renyi2", "min"):
        raise DomainError(f"unknown measure {measure!r}")
    size = pair.codebook_size
    if size * size > cap:
        raise ResourceCapError(f"{size}^2 pairs exceed cap {cap}")

    book = enumerate_codebook(pair, cap=cap)
    d1 = as_vector(d1)
    d2 = as_vector(d2)
    x1s = [dither_encode(u, d1, pair) for u in book]
    x2s = [dither_encode(u, d2, pair) for u in book]
    c = pair.coarse_scale

    total = size * size
    masked_counts: dict = {}
    full_counts: dict = {}
    per_masked: dict = {}
    for i, x1 in enumerate(x1s):
        for x2 in x2s:
            v = x1 + x2 if sign == "+" else x1 - x2
            w = pair.coarse.reduce(v)
            z = tuple(np.round((v - w) / c).astype(int).tolist())
            mk = _key(w)
            masked_counts[(i, mk)] = masked_counts.get((i, mk), 0) + 1
            full_counts[(i, (mk, z))] = full_counts.get((i, (mk, z)), 0) + 1
            per_masked.setdefault(mk, {})
            per_masked[mk][(i, z)] = per_masked[mk].get((i, z), 0) + 1

    x_syms = list(range(size))
    masked_syms = sorted({t for (_, t) in masked_counts})
    full_syms = sorted({t for (_, t) in full_counts})
    joint_masked = _exact_joint(masked_counts, total, x_syms, masked_syms)
    joint_full = _exact_joint(full_counts, total, x_syms, full_syms)

    h_u1 = shannon_entropy(joint_masked.marginal_x())
    h_given_masked = conditional_shannon(joint_masked)
    h_given_full = conditional_shannon(joint_full)

    # the modular sum is an additive mask: it must carry no information at all,
    # and it must come out exactly uniform
    masked_marg = joint_masked.marginal_t()
    uniform_mask = len(set(masked_marg.probs)) == 1
    masked_independent = uniform_mask and abs(h_given_masked - h_u1) <= 1e-9

    max_labels = 0
    max_mass = None
    joint_mass = None
    if measure != "shannon":
        max_mass = Fraction(0)
        joint_mass = Fraction(0)
        for mk, slice_counts in per_masked.items():
            slice_total = sum(slice_counts.values())
            labels = sorted({z for (_, z) in slice_counts})
            max_labels = max(max_labels, len(labels))
            joint_slice = _exact_joint(slice_counts, slice_total, x_syms, labels)
            mass = side_info_violation_mass(joint_slice, measure, s)
            if mass > max_mass:
                max_mass = mass
            joint_mass += Fraction(slice_total, total) * mass
    else:
        for slice_counts in per_masked.values():
            labels = {z for (_, z) in slice_counts}
            max_labels = max(max_labels, len(labels))

    carry_cap = 2 ** pair.dim  # two summands: at most 2^N carries per residual
    gap = h_given_masked - h_given_full
    bound = float(pair.dim)

    if measure == "shannon":
        passed = (gap <= bound + 1e-9 and masked_independent
                  and max_labels <= carry_cap)
        return SumSecrecyReport(measure, sign, None, gap, bound, None, None, None,
                                masked_independent, max_labels, passed)

    tail_bound = 2.0 ** (1 - float(s) / 2) if measure == "renyi2" else 2.0 ** (-float(s))
    passed = (float(max_mass) <= tail_bound + 1e-15 and masked_independent
              and max_labels <= carry_cap and gap <= bound + 1e-9)
    return SumSecrecyReport(measure, sign, float(s), gap, bound,
                            float(max_mass), float(joint_mass), tail_bound,
                            masked_independent, max_labels, passed)


def codebook_to_csv(pair: NestedLatticePair, cap: int = DEFAULT_ENUM_CAP) -> str:
    """Codebook dump, one point per row, coordinates as columns."""
    out = io.StringIO()
    out.write(",".join(f"x{j}" for j in range(pair.dim)) + "\n")
    for p in enumerate_codebook(pair, cap=cap):
        out.write(",".join(repr(float(v)) for v in p) + "\n")
    return out.getvalue()
