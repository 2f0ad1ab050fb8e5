"""Seeded extraction of near-uniform key bits and the two-party key protocol.

The extractor is a seeded linear hash: the public seed IS the r-by-N bit
matrix, unpacked directly (a pinned zero-stretch expansion), so drawing a
uniform seed draws a uniform member of the universal family and every
family-level entropy guarantee applies verbatim.

In the key protocol the first sender transmits a uniform codebook point
under jamming; the receiver recovers it by exhaustive maximum-likelihood
decoding and both ends hash it with the shared seed.  The eavesdropper's
view is the seed, the dithers, and the (modular sum, carry) pair, and the
key's conditional entropy given that view is computed exhaustively.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._rng import gaussian, substream
from .channel import (ChannelConfig, LayeredCodebook, MLDecoder, SecrecySystem,
                      _char_table, _coord_specs, _int_xlog2x_sum, _mod_signal,
                      _xlog2x_sum, _zero_dithers, scale_channel)
from .entropy import DiscreteDistribution
from .errors import ConfigError, DomainError, ResourceCapError, ValidationError
from .hashing import bits_to_int, exact_hashed_entropy, int_to_bits

DEFAULT_SEED_SPACE_CAP = 1 << 20


@dataclass(frozen=True)
class ExtractorSpec:
    """Seeded-linear-hash extractor: input_len bits in, output_len bits out.

    The seed length is input_len * output_len (one bit per matrix entry).
    delta1 caps the seed length as a multiple of the input length; the
    default admits exactly the matrix seed.
    """

    input_len: int
    output_len: int
    delta1: float | None = None

    def __post_init__(self):
        if self.input_len < 1 or self.output_len < 1:
            raise ValidationError("extractor lengths must be positive")
        if self.output_len > self.input_len:
            raise ValidationError("cannot extract more bits than provided")
        cap = self.output_len if self.delta1 is None else self.delta1
        if self.seed_len > cap * self.input_len:
            raise ValidationError("seed length exceeds delta1 * input_len")

    @property
    def seed_len(self) -> int:
        return self.input_len * self.output_len

    @property
    def seed_space(self) -> int:
        return 1 << self.seed_len


def matrix_from_seed(spec: ExtractorSpec, seed: int) -> np.ndarray:
    """Seed bits as an output_len-by-input_len matrix; entry (i, j) is bit i*N+j.

    Bit 0 is the most significant of the seed integer, so the layout is
    row-major and the expansion is exactly the seed's binary digits.
    """
    bits = int_to_bits(seed, spec.seed_len)
    return bits.reshape(spec.output_len, spec.input_len)


def extract(spec: ExtractorSpec, a_bits, seed: int) -> np.ndarray:
    """r output bits: the seed matrix applied to the input over GF(2)."""
    a = np.asarray(a_bits, dtype=np.int64)
    if a.shape != (spec.input_len,):
        raise DomainError(f"input must be {spec.input_len} bits")
    return (matrix_from_seed(spec, seed) @ a) % 2


def avg_output_entropy(spec: ExtractorSpec, source: DiscreteDistribution,
                       cap: int = 1 << 22) -> float:
    """H(extract(A, V) | V) with V uniform over all seeds, computed exhaustively."""
    return exact_hashed_entropy(source, spec.output_len, cap=cap)


# ---------------------------------------------------------------------------
# Exhaustive key-secrecy audit.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KeySecrecyReport:
    """Exact H(key | seed, modular sum, carry) against its leftover-hash floor.

    budget_c is the average conditional min-entropy of the sender's point
    given the eavesdropper pair; eps_sec = 2^(-(c - r)/2) is the slack the
    budget affords, and the audit passes when the exhaustive entropy stays
    above r - eps_sec.
    """

    r: int
    h_key_given_view: float
    budget_c: float
    eps_sec: float
    floor: float
    seed_space: int
    sigma_space: int
    passed: bool


def key_secrecy_report(codebook: LayeredCodebook, r: int, dithers1=None,
                       sign: str = "+",
                       cap: int = DEFAULT_SEED_SPACE_CAP) -> KeySecrecyReport:
    """Average the key entropy over every seed and every eavesdropper value.

    Requires power-of-two layers labeling the whole codebook, uniform
    independent sender and jammer points, and fixed dithers.  The count of
    sender points consistent with each observation is an integer windowing
    problem, evaluated with a character sum per seed row combination.
    """
    if sign not in ("+", "-"):
        raise DomainError("sign must be '+' or '-'")
    if not codebook.labels_whole_codebook or any(
            (layer.nesting & (layer.nesting - 1)) != 0 for layer in codebook.layers):
        raise DomainError("exhaustive audit needs power-of-two layers, fully labeled")
    n0 = codebook.n0_bits
    if r < 1 or r > n0:
        raise DomainError("key width must lie in [1, label width]")
    if 1 << (r * n0) > cap:
        raise ResourceCapError(f"2^{r * n0} seeds exceed cap {cap}")
    if dithers1 is None:
        dithers1 = _zero_dithers(codebook)

    coords = _coord_specs(codebook, dithers1)
    tables = [_char_table(c, sign) for c in coords]

    # P[mu, sigma] = signed count of sender labels in the sigma-window
    # under character mu; row 0 is the plain window size.
    p_table = np.ones((1, 1))
    for tab in tables:
        rows, cols = p_table.shape
        m, a = tab.shape
        p_table = (p_table[:, None, :, None] * tab[None, :, None, :]).reshape(rows * m, cols * a)

    sigma_space = p_table.shape[1]
    m_total = codebook.size
    widths = p_table[0]

    # entropy of the key for one seed and one observation needs the count
    # of labels per key value; sum xlog2x over everything with the uniform
    # weight p(sigma)/W(sigma) = 1/M^2.
    avg_log2_w = float((widths * np.log2(widths)).sum()) / (m_total * m_total)

    n_rows = 1 << n0
    total_xlogx = 0.0
    last_row = np.arange(n_rows, dtype=np.int64)
    n_k = 1 << r

    # counts stay below 2^r * max window product: float32 keeps them exact
    # at desk scale, falling back to float64 past its 24-bit mantissa
    bound = n_k * float(np.abs(p_table).max())
    dtype = np.float32 if bound < (1 << 24) else np.float64
    p_fast = p_table.astype(dtype)
    k_signs = np.empty((n_k, n_k), dtype=dtype)
    for k in range(n_k):
        for lam in range(n_k):
            k_signs[k, lam] = -1.0 if bin(lam & k).count("1") % 2 else 1.0

    def accumulate(prefix_rows: list[int]):
        nonlocal total_xlogx
        if len(prefix_rows) < r - 1:
            for row in range(n_rows):
                accumulate(prefix_rows + [row])
            return
        # vectorize over the final seed row
        for lam in range(n_k):
            sel = [j for j in range(r) if (lam >> (r - 1 - j)) & 1]
            mu = 0
            uses_last = False
            for j in sel:
                if j == r - 1:
                    uses_last = True
                else:
                    mu ^= prefix_rows[j]
            if uses_last:
                terms[lam] = p_fast[mu ^ last_row]           # (n_rows, sigma)
            else:
                terms[lam] = p_fast[mu]
        counts = (k_signs @ terms.reshape(n_k, -1)) / n_k
        total_xlogx += _int_xlog2x_sum(counts)

    if r == 2:
        # swapping the two seed rows permutes the key bits, leaving the count
        # multiset unchanged, so only ordered pairs a <= b need a pass
        for a in range(n_rows):
            tail = last_row[a:]
            block = np.empty((n_k, tail.size, sigma_space), dtype=dtype)
            block[0] = p_fast[0]
            block[1] = p_fast[tail]
            block[2] = p_fast[a]
            block[3] = p_fast[a ^ tail]
            counts = (k_signs @ block.reshape(n_k, -1)) / n_k
            s_range = _int_xlog2x_sum(counts)
            diag = (k_signs @ block[:, 0, :]) / n_k
            total_xlogx += 2 * s_range - _int_xlog2x_sum(diag)
    else:
        terms = np.empty((n_k, n_rows, sigma_space), dtype=dtype)
        accumulate([])

    # H(K|V,Sigma) = E[log2 W] - 2^(-d) M^(-2) sum_{v,sigma,k} N log2 N
    seed_space = 1 << (r * n0)
    h = avg_log2_w - total_xlogx / (float(seed_space) * m_total * m_total)

    budget_c = 2 * math.log2(m_total) - math.log2(sigma_space)
    eps_sec = 2.0 ** (-(budget_c - r) / 2)
    floor = r - eps_sec
    return KeySecrecyReport(r, h, budget_c, eps_sec, floor,
                            seed_space, sigma_space, h >= floor - 1e-12)


def _draw_seed(rng: np.random.Generator, bits: int) -> int:
    out = 0
    for _ in range((bits + 31) // 32):
        out = (out << 32) | int(rng.integers(0, 1 << 32))
    return out & ((1 << bits) - 1)


# ---------------------------------------------------------------------------
# Key protocol.
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KeyProtocolSetup:
    codebook: LayeredCodebook
    spec: ExtractorSpec
    dithers1: tuple
    dithers2: tuple

    def __post_init__(self):
        if self.spec.input_len != self.codebook.n0_bits:
            raise ConfigError("extractor input width must match the codebook labels")


@dataclass(eq=False)
class KeyTranscript:
    """One key-agreement round, including the eavesdropper's exact view."""

    v_seed: int
    t1_index: int
    t2_index: int
    k1_bits: np.ndarray
    k1_hat_bits: np.ndarray
    agreement: bool
    decode_failed: bool
    masked_sum: tuple
    carry: tuple

    def key_hex(self) -> str:
        return format(bits_to_int(self.k1_bits), "x")

    def to_json(self) -> str:
        return json.dumps({
            "v_seed": self.v_seed,
            "t1_index": self.t1_index,
            "t2_index": self.t2_index,
            "k1": format(bits_to_int(self.k1_bits), "x"),
            "k1_hat": format(bits_to_int(self.k1_hat_bits), "x"),
            "agreement": self.agreement,
            "decode_failed": self.decode_failed,
            "masked_sum": list(self.masked_sum),
            "carry": list(self.carry),
        }, sort_keys=True)


class KeyAgreementRunner:
    """Repeated key rounds over one channel and setup, with cached decoder tables."""

    def __init__(self, cfg: ChannelConfig, setup: KeyProtocolSetup):
        self.cfg = cfg
        self.setup = setup
        codebook = setup.codebook
        labeling = codebook.labeling()
        self.labeling = labeling
        self.system = SecrecySystem(codebook, None, labeling,
                                    setup.dithers1, setup.dithers2)
        self.decoder = MLDecoder(cfg, self.system)
        self.coeff = scale_channel(cfg)
        self._x1 = self.decoder._x1
        self._x2 = self.decoder._x2

    def run_one(self, seed: int, mode: str = "marginal") -> KeyTranscript:
        cb = self.setup.codebook
        spec = self.setup.spec
        v_rng = substream(seed, "extractor-seed")
        t_rng = substream(seed, "sender-point")
        jam_rng = substream(seed, "jammer")
        noise_rng = substream(seed, "noise")

        v_seed = _draw_seed(v_rng, spec.seed_len)
        i1 = int(t_rng.integers(0, self.labeling.points.shape[0]))
        i2 = int(jam_rng.integers(0, cb.size))

        y1 = (self._x1[i1] + self.coeff.gain_x2_at_d1 * self._x2[i2]
              + gaussian(noise_rng, cb.block_dim, self.coeff.noise_std_d1))
        i1_hat = self.decoder.decode_index(y1, mode=mode,
                                           t2_index=i2 if mode == "genie" else None)

        bits1 = int_to_bits(i1, spec.input_len)
        k1 = extract(spec, bits1, v_seed)
        k1_hat = extract(spec, int_to_bits(i1_hat, spec.input_len), v_seed)

        t1 = self.labeling.points[i1]
        t2 = cb.product_points()[i2]
        masked, carry = _eavesdropper_pair(cb, t1, t2, self.setup.dithers1,
                                           self.setup.dithers2, self.cfg.sign)
        return KeyTranscript(v_seed, i1, i2, k1, k1_hat,
                             bool(np.array_equal(k1, k1_hat)), i1_hat != i1,
                             masked, carry)

    def agreement_rate(self, trials: int, seed: int, mode: str = "marginal") -> float:
        agree = 0
        for t in range(trials):
            if self.run_one(seed + t, mode=mode).agreement:
                agree += 1
        return agree / trials


def _eavesdropper_pair(codebook: LayeredCodebook, t1, t2, d1, d2, sign: int):
    """Modular sum and integer carry of the per-layer dithered real sums."""
    x1_layers, _ = _mod_signal(codebook, np.asarray(t1, dtype=float), d1)
    x2_layers, _ = _mod_signal(codebook, np.asarray(t2, dtype=float), d2)
    masked = []
    carry = []
    for layer, a, b in zip(codebook.layers, x1_layers, x2_layers):
        v = a + sign * b
        w = layer.coarse.reduce(v)
        z = np.round((v - w) / layer.coarse_scale).astype(int)
        masked.extend(np.round(w, 9).tolist())
        carry.extend(z.tolist())
    return tuple(masked), tuple(carry)


def run_key_protocol(cfg: ChannelConfig, setup: KeyProtocolSetup, seed: int,
                     mode: str = "marginal") -> KeyTranscript:
    """Single end-to-end key round; see KeyAgreementRunner for batches."""
    return KeyAgreementRunner(cfg, setup).run_one(seed, mode=mode)


def key_rate(transcripts: Sequence[KeyTranscript], spec: ExtractorSpec,
             n_uses: int) -> float:
    """H(K1)/n for the realized seed mixture, computed from exact pushforwards.

    For each seed in the transcript set the key is the image of a uniform
    label under the seed matrix; the marginal key law is the uniform
    mixture over the observed seeds.
    """
    if not transcripts:
        raise DomainError("need at least one transcript")
    n0, r = spec.input_len, spec.output_len
    labels = np.array([int_to_bits(i, n0) for i in range(1 << n0)])
    powers = 1 << np.arange(r - 1, -1, -1, dtype=np.int64)
    marginal = np.zeros(1 << r)
    for tr in transcripts:
        m = matrix_from_seed(spec, tr.v_seed)
        out = (labels @ m.T) % 2
        idx = out @ powers
        marginal += np.bincount(idx, minlength=1 << r) / float(1 << n0)
    marginal /= len(transcripts)
    h = -_xlog2x_sum(marginal)
    return h / n_uses
