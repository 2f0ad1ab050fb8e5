"""Linear hashing over GF(q), privacy-amplification bounds, and the message encoder.

A hash is a uniformly drawn r-by-N matrix over a prime field.  Distinct
inputs collide with probability exactly q^-r, the matrix has full row
rank with probability above 1 - q^(r-N), and hashing a source whose
collision entropy exceeds c leaves the output within 2^(r log2 q - c)/ln 2
bits of uniform on average.

The encoder completes a chosen full-row-rank hash g to an invertible
square matrix [g'; g]; its inverse A turns any (randomness, secret) bit
pair into a codebook label and back, so the secret is recoverable and a
uniform input sweeps the codebook subset uniformly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .entropy import DiscreteDistribution, renyi2_entropy
from .errors import DomainError, ResourceCapError, ValidationError

DEFAULT_MATRIX_CAP = 1 << 22


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    f = 2
    while f * f <= n:
        if n % f == 0:
            return False
        f += 1
    return True


def int_to_bits(value: int, width: int) -> np.ndarray:
    """Most-significant-bit-first binary digits of `value`."""
    if value < 0 or value >= 1 << width:
        raise DomainError(f"{value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - j)) & 1 for j in range(width)], dtype=np.int64)


def bits_to_int(bits) -> int:
    out = 0
    for b in np.asarray(bits).astype(int).tolist():
        out = (out << 1) | (b & 1)
    return out


@dataclass(frozen=True, eq=False)
class FiniteFieldMatrix:
    """Dense matrix with entries in GF(q), q prime."""

    q: int
    entries: np.ndarray

    def __post_init__(self):
        if not _is_prime(self.q):
            raise ValidationError(f"field size {self.q} is not prime")
        arr = np.asarray(self.entries, dtype=np.int64)
        if arr.ndim != 2:
            raise ValidationError("matrix entries must be 2-D")
        if arr.size and (arr.min() < 0 or arr.max() >= self.q):
            raise ValidationError("entries must lie in [0, q)")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def matmul(self, other: "FiniteFieldMatrix") -> "FiniteFieldMatrix":
        if self.q != other.q or self.cols != other.rows:
            raise DomainError("incompatible matrices")
        return FiniteFieldMatrix(self.q, (self.entries @ other.entries) % self.q)

    def apply(self, vec) -> np.ndarray:
        v = np.asarray(vec, dtype=np.int64) % self.q
        if v.shape != (self.cols,):
            raise DomainError(f"expected a length-{self.cols} vector")
        return (self.entries @ v) % self.q

    def rank(self) -> int:
        return _row_reduce(self.entries, self.q)

    def equals(self, other: "FiniteFieldMatrix") -> bool:
        return self.q == other.q and np.array_equal(self.entries, other.entries)

    def row_strings(self) -> list[str]:
        return ["".join(str(int(v)) for v in row) for row in self.entries]

    @classmethod
    def from_row_strings(cls, q: int, rows: Sequence[str],
                         cols: int | None = None) -> "FiniteFieldMatrix":
        if not rows:
            return cls(q, np.zeros((0, 0 if cols is None else cols), dtype=np.int64))
        data = [[int(ch) for ch in row] for row in rows]
        return cls(q, np.asarray(data, dtype=np.int64))

    @classmethod
    def identity(cls, n: int, q: int = 2) -> "FiniteFieldMatrix":
        return cls(q, np.eye(n, dtype=np.int64))


def _row_reduce(matrix: np.ndarray, q: int) -> int:
    """Rank over GF(q) by Gaussian elimination."""
    a = np.asarray(matrix, dtype=np.int64).copy() % q
    rows, cols = a.shape
    rank = 0
    for col in range(cols):
        pivot = -1
        for r in range(rank, rows):
            if a[r, col] % q != 0:
                pivot = r
                break
        if pivot < 0:
            continue
        a[[rank, pivot]] = a[[pivot, rank]]
        inv = pow(int(a[rank, col]), q - 2, q)
        a[rank] = (a[rank] * inv) % q
        for r in range(rows):
            if r != rank and a[r, col] % q != 0:
                a[r] = (a[r] - a[r, col] * a[rank]) % q
        rank += 1
        if rank == rows:
            break
    return rank


def _invert(matrix: np.ndarray, q: int) -> np.ndarray:
    a = np.asarray(matrix, dtype=np.int64).copy() % q
    n = a.shape[0]
    if a.shape != (n, n):
        raise DomainError("only square matrices can be inverted")
    aug = np.concatenate([a, np.eye(n, dtype=np.int64)], axis=1)
    for col in range(n):
        pivot = -1
        for r in range(col, n):
            if aug[r, col] % q != 0:
                pivot = r
                break
        if pivot < 0:
            raise DomainError("matrix is singular over GF(q)")
        aug[[col, pivot]] = aug[[pivot, col]]
        inv = pow(int(aug[col, col]), q - 2, q)
        aug[col] = (aug[col] * inv) % q
        for r in range(n):
            if r != col and aug[r, col] % q != 0:
                aug[r] = (aug[r] - aug[r, col] * aug[col]) % q
    return aug[:, n:]


def sample_linear_hash(r: int, n: int, q: int = 2, seed: int = 0) -> FiniteFieldMatrix:
    """Uniform r-by-n matrix over GF(q), deterministic per seed."""
    if r < 1 or n < 1:
        raise DomainError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    return FiniteFieldMatrix(q, rng.integers(0, q, size=(r, n), dtype=np.int64))


def collision_probability(r: int, n: int, q: int = 2, x1=None, x2=None) -> float:
    """Pr over a uniform matrix G that G x1 = G x2, for distinct inputs.

    G (x1 - x2) is uniform on GF(q)^r whenever x1 - x2 is nonzero, so the
    probability is exactly q^-r regardless of the particular pair.
    """
    if not _is_prime(q):
        raise ValidationError(f"field size {q} is not prime")
    v1 = np.asarray(x1, dtype=np.int64) % q
    v2 = np.asarray(x2, dtype=np.int64) % q
    if v1.shape != (n,) or v2.shape != (n,):
        raise DomainError(f"inputs must be length-{n} vectors")
    if np.array_equal(v1, v2):
        raise DomainError("inputs must be distinct (collision is certain)")
    return float(q) ** (-r)


def full_rank_check(matrix: FiniteFieldMatrix) -> bool:
    """True when the matrix has full row rank over its field."""
    return matrix.rank() == matrix.rows


def full_rank_lower_bound(r: int, n: int, q: int = 2) -> float:
    """Guaranteed lower bound 1 - q^(r-n) on the full-row-rank probability."""
    return 1.0 - float(q) ** (r - n)


def exact_full_rank_probability(r: int, n: int, q: int = 2) -> float:
    """Exact full-row-rank probability prod_{i<r} (1 - q^(i-n))."""
    p = 1.0
    for i in range(r):
        p *= 1.0 - float(q) ** (i - n)
    return p


def privacy_amp_bound(r: int, q: int, c: float) -> float:
    """Entropy floor r log2 q - 2^(r log2 q - c)/ln 2 for hashed outputs."""
    bits = r * math.log2(q)
    return bits - (2.0 ** (bits - c)) / math.log(2)


def gf2_rank_ints(rows: Sequence[int]) -> int:
    """Rank over GF(2) of rows packed as integers (one bit per column)."""
    basis: dict[int, int] = {}
    for row in rows:
        cur = int(row)
        while cur:
            h = cur.bit_length() - 1
            if h in basis:
                cur ^= basis[h]
            else:
                basis[h] = cur
                break
    return len(basis)


def full_rank_fraction_exhaustive(r: int, n: int) -> float:
    """Exact fraction of full-row-rank binary r-by-n matrices, by enumeration."""
    total = 1 << (r * n)
    if total > DEFAULT_MATRIX_CAP:
        raise ResourceCapError(f"2^{r * n} matrices exceed the enumeration cap")
    mask = (1 << n) - 1
    hits = 0
    for g in range(total):
        rows = [(g >> (n * i)) & mask for i in range(r)]
        if gf2_rank_ints(rows) == r:
            hits += 1
    return hits / total


def full_rank_fraction_mc(r: int, n: int, trials: int, seed: int = 0) -> float:
    """Monte-Carlo full-row-rank fraction for sizes beyond enumeration."""
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, 1 << n, size=(trials, r), dtype=np.int64)
    hits = 0
    for k in range(trials):
        if gf2_rank_ints(draws[k].tolist()) == r:
            hits += 1
    return hits / trials


def _bit_source_matrix(source: DiscreteDistribution) -> tuple[np.ndarray, np.ndarray, int]:
    symbols = source.support
    first = symbols[0]
    if not isinstance(first, tuple):
        raise DomainError("source symbols must be bit tuples")
    n = len(first)
    rows = []
    for sym in symbols:
        if not isinstance(sym, tuple) or len(sym) != n or any(b not in (0, 1) for b in sym):
            raise DomainError("source symbols must be equal-length bit tuples")
        rows.append(sym)
    return (np.asarray(rows, dtype=np.int64),
            np.asarray([float(p) for p in source.probs]), n)


def flat_bit_source(n: int, k: int) -> DiscreteDistribution:
    """Uniform source on the first k of the 2^n bit tuples (H2 = log2 k exactly)."""
    if not (1 <= k <= 1 << n):
        raise DomainError("k must lie in [1, 2^n]")
    support = tuple(tuple(int(b) for b in int_to_bits(i, n)) for i in range(k))
    return DiscreteDistribution(support, tuple(Fraction(1, k) for _ in range(k)))


def geometric_bit_source(n: int) -> DiscreteDistribution:
    """Dyadically decaying source over all 2^n bit tuples (exact rational masses)."""
    size = 1 << n
    denom = (1 << size) - 1
    support = tuple(tuple(int(b) for b in int_to_bits(i, n)) for i in range(size))
    probs = tuple(Fraction(1 << (size - 1 - i), denom) for i in range(size))
    return DiscreteDistribution(support, probs)


def exact_hashed_entropy(source: DiscreteDistribution, r: int, seed_set=None,
                         cap: int = DEFAULT_MATRIX_CAP) -> float:
    """Average output Shannon entropy H(G(A) | G) over the binary linear family.

    With seed_set=None the family is enumerated exhaustively (all 2^(r*n)
    matrices); otherwise it is the sampled sub-family drawn from the given
    seeds.  Exhaustive results are checked against the amplification floor
    for c = H2(source), which holds with mathematical certainty.
    """
    sym_matrix, weights, n = _bit_source_matrix(source)
    powers = 1 << np.arange(r - 1, -1, -1, dtype=np.int64)

    if seed_set is None:
        total = 1 << (r * n)
        if total > cap:
            raise ResourceCapError(
                f"2^{r * n} matrices exceed cap {cap}; pass an explicit seed_set")
        matrices = (int_to_bits(g_int, r * n).reshape(r, n) for g_int in range(total))
        count = total
    else:
        matrices = (sample_linear_hash(r, n, 2, s).entries for s in seed_set)
        count = len(seed_set)
        if count == 0:
            raise DomainError("seed_set must be nonempty")

    acc = 0.0
    for g in matrices:
        out = (sym_matrix @ g.T) % 2
        idx = out @ powers
        masses = np.bincount(idx, weights=weights, minlength=1 << r)
        mask = masses > 0
        acc += float(-(masses[mask] * np.log2(masses[mask])).sum())
    avg = acc / count

    if seed_set is None:
        floor = privacy_amp_bound(r, 2, renyi2_entropy(source))
        if avg < floor - 1e-9:
            raise RuntimeError(
                f"hashed entropy {avg} fell below its floor {floor}; internal bug")
    return avg


# ---------------------------------------------------------------------------
# Secret-message encoder.
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EncoderKit:
    """Invertible bit transform [g'; g] with inverse A.

    Feeding A the stacked (randomness, secret) bits yields a codebook
    label; applying g to a label recovers the secret, g' the randomness.
    """

    g: FiniteFieldMatrix
    g_prime: FiniteFieldMatrix
    a_inv: FiniteFieldMatrix

    @property
    def n_bits(self) -> int:
        return self.g.cols

    @property
    def r_secret(self) -> int:
        return self.g.rows

    def to_json(self) -> str:
        return json.dumps({
            "q": self.g.q,
            "g": self.g.row_strings(),
            "g_prime": self.g_prime.row_strings(),
            "A": self.a_inv.row_strings(),
        })

    @classmethod
    def from_json(cls, text: str) -> "EncoderKit":
        obj = json.loads(text)
        q = int(obj["q"])
        n = len(obj["A"])
        g = FiniteFieldMatrix.from_row_strings(q, obj["g"])
        if obj["g_prime"]:
            gp = FiniteFieldMatrix.from_row_strings(q, obj["g_prime"])
        else:
            gp = FiniteFieldMatrix(q, np.zeros((0, n), dtype=np.int64))
        a = FiniteFieldMatrix.from_row_strings(q, obj["A"])
        return cls(g, gp, a)


def build_encoder(g: FiniteFieldMatrix) -> EncoderKit:
    """Complete a full-row-rank g to an invertible [g'; g] and invert it.

    g' is chosen greedily from the standard basis rows in index order, so
    the completion is deterministic and reproducible.
    """
    if not full_rank_check(g):
        raise DomainError("hash matrix must have full row rank")
    q, r, n = g.q, g.rows, g.cols
    chosen: list[np.ndarray] = []
    base_rank = r
    for i in range(n):
        if len(chosen) == n - r:
            break
        e = np.zeros(n, dtype=np.int64)
        e[i] = 1
        stacked = np.vstack([g.entries] + chosen + [e])
        if _row_reduce(stacked, q) > base_rank + len(chosen):
            chosen.append(e)
    if len(chosen) != n - r:
        raise DomainError("could not complete hash to an invertible matrix")
    gp_entries = (np.vstack(chosen) if chosen else np.zeros((0, n), dtype=np.int64))
    g_prime = FiniteFieldMatrix(q, gp_entries)
    stack = np.vstack([gp_entries, g.entries])
    a_inv = FiniteFieldMatrix(q, _invert(stack, q))
    if not np.array_equal((stack @ a_inv.entries) % q, np.eye(n, dtype=np.int64)):
        raise RuntimeError("inverse verification failed; internal bug")
    return EncoderKit(g, g_prime, a_inv)


@dataclass(frozen=True, eq=False)
class BitLabeling:
    """Bijection between 2^n_bits codebook points and their index bits.

    Points are kept in lexicographic coordinate order and labeled by
    binary counting, so the mapping is fixed and reproducible.
    """

    points: np.ndarray  # (2^n_bits, dim)
    n_bits: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape[0] != 1 << self.n_bits:
            raise ValidationError("labeling must cover exactly 2^n_bits points")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        index = {tuple(np.round(p, 9).tolist()): i for i, p in enumerate(pts)}
        if len(index) != pts.shape[0]:
            raise ValidationError("labeled points must be distinct")
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_layers(cls, layers) -> "BitLabeling":
        """Label the product codebook of the given nested-lattice layers.

        When the product size is a power of two the whole codebook is
        labeled; otherwise the lexicographically first 2^floor(log2 size)
        points are kept.
        """
        value_lists = []
        for layer in layers:
            vals = layer.coordinate_values()
            value_lists.extend([vals] * layer.dim)
        size = 1
        for vals in value_lists:
            size *= len(vals)
        n_bits = size.bit_length() - 1
        grids = np.meshgrid(*value_lists, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        return cls(pts[: 1 << n_bits], n_bits)

    def index_of(self, point) -> int:
        key = tuple(np.round(np.asarray(point, dtype=float), 9).tolist())
        try:
            return self._index[key]
        except KeyError:
            raise DomainError("point is not in the labeled codebook subset") from None

    def bits_of(self, point) -> np.ndarray:
        return int_to_bits(self.index_of(point), self.n_bits)

    def point_of(self, bits) -> np.ndarray:
        b = np.asarray(bits, dtype=np.int64)
        if b.shape != (self.n_bits,):
            raise DomainError(f"expected {self.n_bits} label bits")
        return self.points[bits_to_int(b)].copy()


def encode_secret(kit: EncoderKit, s_bits, s_prime_bits, labeling: BitLabeling) -> np.ndarray:
    """Map (secret, randomness) bits to a codebook point via A."""
    s = np.asarray(s_bits, dtype=np.int64)
    sp = np.asarray(s_prime_bits, dtype=np.int64)
    if s.shape != (kit.r_secret,):
        raise DomainError(f"secret must be {kit.r_secret} bits")
    if sp.shape != (kit.n_bits - kit.r_secret,):
        raise DomainError(f"randomness must be {kit.n_bits - kit.r_secret} bits")
    if labeling.n_bits != kit.n_bits:
        raise DomainError("labeling width does not match the encoder")
    label = kit.a_inv.apply(np.concatenate([sp, s]))
    return labeling.point_of(label)


def decode_secret(kit: EncoderKit, point, labeling: BitLabeling) -> tuple[np.ndarray, np.ndarray]:
    """Invert encode_secret: returns (randomness bits, secret bits)."""
    label = labeling.bits_of(point)
    return kit.g_prime.apply(label), kit.g.apply(label)


def secret_rate_select(n_bar: int, rate0: float, epsilon: float, delta: float) -> int:
    """Largest secret width below n_bar*(rate0 - 1 - epsilon - delta), clamped at 0.

    Returns 0 outright when epsilon is outside (0, rate0 - 1); the
    selection only makes sense with a positive entropy margin.
    """
    if not delta > 0:
        raise DomainError("delta must be positive")
    if not (0 < epsilon < rate0 - 1):
        return 0
    threshold = n_bar * (rate0 - 1 - epsilon - delta)
    if threshold <= 0:
        return 0
    r0 = math.floor(threshold)
    if r0 == threshold:
        r0 -= 1
    return max(0, r0)
