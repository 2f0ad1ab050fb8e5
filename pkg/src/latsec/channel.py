"""Gaussian wiretap channel with a cooperative jammer, at desk scale.

Transmitters superimpose per-layer nested-lattice codewords; the intended
receiver decodes by exhaustive maximum likelihood, and the eavesdropper's
information about the secret is computed exactly rather than estimated.

The exact leakage uses the carry decomposition of the per-layer real sums:
coordinate-wise, the observation is (up to relabeling) the integer sum of
the two senders' codebook indices, and the joint with the hashed secret is
an integer counting problem.  Counts are evaluated with a character sum
over the hash (a Walsh transform), which keeps desk-scale sweeps exact and
fast.  Noise at the eavesdropper only processes that observation further,
so the reported figure upper-bounds what the physical channel reveals.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._rng import gaussian, substream
from .errors import ConfigError, DomainError, ResourceCapError
from .hashing import (BitLabeling, EncoderKit, FiniteFieldMatrix, build_encoder,
                      bits_to_int, decode_secret, encode_secret, full_rank_check,
                      int_to_bits, sample_linear_hash, secret_rate_select)
from .lattice import NestedLatticePair, as_vector

DEFAULT_PAIR_CAP = 1 << 22
DEFAULT_SIGMA_SPACE_CAP = 1 << 23


# ---------------------------------------------------------------------------
# Channel model.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelConfig:
    """Cross gains, noise variances, power budgets, and blocklength."""

    a: float
    b: float
    sign: int = 1
    noise_var1: float = 1.0
    noise_var2: float = 1.0
    p1_bar: float = 1e9
    p2_bar: float = 1e9
    n_uses: int = 1

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ConfigError("cross gains must be positive")
        if self.sign not in (1, -1):
            raise ConfigError("sign must be +1 or -1")
        if not (self.noise_var1 > 0 and self.noise_var2 > 0):
            raise ConfigError("noise variances must be positive")
        if not (self.p1_bar > 0 and self.p2_bar > 0):
            raise ConfigError("power budgets must be positive")
        if self.n_uses < 1:
            raise ConfigError("n_uses must be positive")

    def to_json(self) -> str:
        return json.dumps({
            "a": self.a, "b": self.b, "sign": self.sign,
            "noise_var1": self.noise_var1, "noise_var2": self.noise_var2,
            "p1_bar": self.p1_bar, "p2_bar": self.p2_bar, "n_uses": self.n_uses,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ChannelConfig":
        obj = json.loads(text)
        return cls(a=obj["a"], b=obj["b"], sign=int(obj["sign"]),
                   noise_var1=obj["noise_var1"], noise_var2=obj["noise_var2"],
                   p1_bar=obj["p1_bar"], p2_bar=obj["p2_bar"],
                   n_uses=int(obj["n_uses"]))


@dataclass(frozen=True)
class ScaledChannel:
    """Receiver-side coefficients after absorbing sqrt(b) into sender 1."""

    gain_x1_at_d1: float
    gain_x2_at_d1: float
    noise_std_d1: float
    gain_x1_at_d2: float
    gain_x2_at_d2: float
    noise_std_d2: float


def scale_channel(cfg: ChannelConfig) -> ScaledChannel:
    """Y1 = X1 + sqrt(ab) X2 + sqrt(b) Z1 and Y2 = X1 +/- X2 + Z2."""
    return ScaledChannel(
        1.0, math.sqrt(cfg.a * cfg.b), math.sqrt(cfg.b * cfg.noise_var1),
        1.0, float(cfg.sign), math.sqrt(cfg.noise_var2),
    )


# ---------------------------------------------------------------------------
# Layered codebooks and the transmission system.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayeredCodebook:
    """A stack of nested-lattice layers sharing one block dimension."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ConfigError("need at least one layer")
        dims = {layer.dim for layer in layers}
        if len(dims) != 1:
            raise ConfigError("all layers must share the block dimension")

    @property
    def block_dim(self) -> int:
        return self.layers[0].dim

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_bar(self) -> int:
        return self.n_layers * self.block_dim

    @property
    def size(self) -> int:
        out = 1
        for layer in self.layers:
            out *= layer.codebook_size
        return out

    @property
    def n0_bits(self) -> int:
        return self.size.bit_length() - 1

    def rates(self) -> list[float]:
        return [math.log2(layer.nesting) for layer in self.layers]

    @property
    def avg_rate(self) -> float:
        return sum(self.rates()) / self.n_layers

    @property
    def labels_whole_codebook(self) -> bool:
        return self.size == 1 << self.n0_bits

    def labeling(self) -> BitLabeling:
        return BitLabeling.from_layers(self.layers)

    def product_points(self) -> np.ndarray:
        """All size-by-n_bar codebook points in lexicographic order."""
        value_lists = []
        for layer in self.layers:
            vals = layer.coordinate_values()
            value_lists.extend([vals] * layer.dim)
        grids = np.meshgrid(*value_lists, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)


def _zero_dithers(codebook: LayeredCodebook) -> tuple:
    return tuple(np.zeros(layer.dim) for layer in codebook.layers)


def random_dithers(codebook: LayeredCodebook, rng: np.random.Generator) -> tuple:
    """Fixed dither vectors drawn once, uniform over each layer's region."""
    out = []
    for layer in codebook.layers:
        c = layer.coarse_scale
        out.append(c * rng.random(layer.dim) - c / 2)
    return tuple(out)


def _split_layers(codebook: LayeredCodebook, point: np.ndarray) -> list[np.ndarray]:
    n = codebook.block_dim
    return [point[i * n:(i + 1) * n] for i in range(codebook.n_layers)]


def _mod_signal(codebook: LayeredCodebook, point: np.ndarray, dithers) -> tuple[np.ndarray, np.ndarray]:
    """Per-layer dithered reductions and their superposition over the block."""
    per_layer = []
    for layer, u, d in zip(codebook.layers, _split_layers(codebook, point), dithers):
        per_layer.append(layer.coarse.reduce(u + d))
    return np.stack(per_layer), np.sum(per_layer, axis=0)


def exact_signal_power(codebook: LayeredCodebook, dithers) -> float:
    """Exact per-symbol transmit power under a uniform codebook draw."""
    n = codebook.block_dim
    coord_power = np.zeros(n)
    mean_sum = np.zeros(n)
    for layer, d in zip(codebook.layers, dithers):
        vals = layer.coordinate_values()
        for j in range(n):
            shifted = _reduce_values(vals + d[j], layer.coarse_scale)
            coord_power[j] += shifted.var()
            mean_sum[j] += shifted.mean()
    coord_power += mean_sum ** 2
    return float(coord_power.mean())


def _reduce_values(vals: np.ndarray, c: float) -> np.ndarray:
    r = vals - c * np.floor(vals / c + 0.5)
    r[r >= c / 2] -= c
    r[r < -c / 2] += c
    return r


@dataclass(frozen=True, eq=False)
class SecrecySystem:
    """Codebook stack plus encoder and the fixed public dithers."""

    codebook: LayeredCodebook
    kit: EncoderKit | None
    labeling: BitLabeling
    dithers1: tuple
    dithers2: tuple

    def __post_init__(self):
        if self.kit is not None and self.kit.n_bits != self.codebook.n0_bits:
            raise ConfigError("encoder width does not match the codebook labeling")
        if self.labeling.n_bits != self.codebook.n0_bits:
            raise ConfigError("labeling width does not match the codebook")
        d1 = tuple(as_vector(d) for d in self.dithers1)
        d2 = tuple(as_vector(d) for d in self.dithers2)
        if len(d1) != self.codebook.n_layers or len(d2) != self.codebook.n_layers:
            raise ConfigError("one dither vector per layer per sender required")
        object.__setattr__(self, "dithers1", d1)
        object.__setattr__(self, "dithers2", d2)
        object.__setattr__(self, "_points", self.codebook.product_points())

    @property
    def secret_bits(self) -> int:
        return 0 if self.kit is None else self.kit.r_secret

    def power1(self) -> float:
        return exact_signal_power(self.codebook, self.dithers1)

    def power2(self) -> float:
        return exact_signal_power(self.codebook, self.dithers2)

    def jammer_points(self) -> np.ndarray:
        return self._points


def build_system(codebook: LayeredCodebook, kit: EncoderKit | None,
                 dithers1=None, dithers2=None) -> SecrecySystem:
    d1 = _zero_dithers(codebook) if dithers1 is None else tuple(dithers1)
    d2 = _zero_dithers(codebook) if dithers2 is None else tuple(dithers2)
    return SecrecySystem(codebook, kit, codebook.labeling(), d1, d2)


# ---------------------------------------------------------------------------
# Transmission and decoding.
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Transcript:
    """One block of channel uses, end to end."""

    w_bits: np.ndarray
    s_prime_bits: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    dithers1: tuple
    dithers2: tuple
    x1_layers: np.ndarray
    x2_layers: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    w_hat: np.ndarray | None = None
    decode_error: bool | None = None

    def to_json(self) -> str:
        obj = {
            "w": [int(b) for b in self.w_bits],
            "s_prime": [int(b) for b in self.s_prime_bits],
            "t1": self.t1.tolist(), "t2": self.t2.tolist(),
            "dithers1": [d.tolist() for d in self.dithers1],
            "dithers2": [d.tolist() for d in self.dithers2],
            "x1": self.x1.tolist(), "x2": self.x2.tolist(),
            "y1": self.y1.tolist(), "y2": self.y2.tolist(),
            "w_hat": None if self.w_hat is None else [int(b) for b in self.w_hat],
            "decode_error": self.decode_error,
        }
        return json.dumps(obj, sort_keys=True)


def transmit(cfg: ChannelConfig, system: SecrecySystem, w_bits, seed: int) -> Transcript:
    """Encode, jam, and push one block through the scaled channel.

    Encoder randomness, the jammer's point, and both noises come from
    disjoint sub-streams of the seed, so the two senders share no
    randomness by construction.
    """
    if system.kit is None:
        raise ConfigError("transmit requires a system with an encoder kit")
    if system.power1() > cfg.p1_bar + 1e-9 or system.power2() > cfg.p2_bar + 1e-9:
        raise ConfigError("codebook power exceeds the configured budget")
    w = np.asarray(w_bits, dtype=np.int64)
    coeff = scale_channel(cfg)

    enc_rng = substream(seed, "encoder-randomness")
    jam_rng = substream(seed, "jammer")
    noise_rng = substream(seed, "noise")

    n0, r0 = system.kit.n_bits, system.kit.r_secret
    s_prime = enc_rng.integers(0, 2, size=n0 - r0, dtype=np.int64)
    t1 = encode_secret(system.kit, w, s_prime, system.labeling)
    t2 = system.jammer_points()[int(jam_rng.integers(0, system.codebook.size))].copy()

    x1_layers, x1 = _mod_signal(system.codebook, t1, system.dithers1)
    x2_layers, x2 = _mod_signal(system.codebook, t2, system.dithers2)

    n = system.codebook.block_dim
    y1 = x1 + coeff.gain_x2_at_d1 * x2 + gaussian(noise_rng, n, coeff.noise_std_d1)
    y2 = x1 + coeff.gain_x2_at_d2 * x2 + gaussian(noise_rng, n, coeff.noise_std_d2)
    return Transcript(w, s_prime, t1, t2, system.dithers1, system.dithers2,
                      x1_layers, x2_layers, x1, x2, y1, y2)


class MLDecoder:
    """Exhaustive maximum-likelihood decoding of the sender's point.

    Marginal mode averages the Gaussian likelihood over every jammer
    hypothesis; genie mode is told the jammer's point.  Both enumerate the
    full hypothesis space, so they are exact (and capped accordingly).
    """

    def __init__(self, cfg: ChannelConfig, system: SecrecySystem,
                 cap: int = DEFAULT_PAIR_CAP):
        self.cfg = cfg
        self.system = system
        coeff = scale_channel(cfg)
        self._noise_var = coeff.noise_std_d1 ** 2
        labeling = system.labeling
        k = labeling.points.shape[0]
        jam = system.jammer_points()
        if k * jam.shape[0] > cap:
            raise ResourceCapError(
                f"{k}x{jam.shape[0]} hypothesis pairs exceed cap {cap}")
        self._x1 = np.stack([_mod_signal(system.codebook, p, system.dithers1)[1]
                             for p in labeling.points])
        self._x2 = np.stack([_mod_signal(system.codebook, p, system.dithers2)[1]
                             for p in jam])
        self._gain2 = coeff.gain_x2_at_d1
        self._pair_sig = None

    def _pair_signals(self) -> np.ndarray:
        if self._pair_sig is None:
            self._pair_sig = self._x1[:, None, :] + self._gain2 * self._x2[None, :, :]
        return self._pair_sig

    def decode_index(self, y1, mode: str = "marginal", t2_index: int | None = None) -> int:
        y = np.asarray(y1, dtype=float)
        if mode == "genie":
            if t2_index is None:
                raise DomainError("genie mode needs the jammer index")
            sig = self._x1 + self._gain2 * self._x2[t2_index]
            d = ((sig - y) ** 2).sum(axis=1)
            return int(np.argmin(d))
        if mode != "marginal":
            raise DomainError("mode must be 'marginal' or 'genie'")
        d = ((self._pair_signals() - y) ** 2).sum(axis=2) / (2 * self._noise_var)
        neg = -d
        peak = neg.max(axis=1, keepdims=True)
        loglik = peak[:, 0] + np.log(np.exp(neg - peak).sum(axis=1))
        return int(np.argmax(loglik))

    def decode_message(self, y1, mode: str = "marginal", t2_index: int | None = None) -> np.ndarray:
        idx = self.decode_index(y1, mode, t2_index)
        point = self.system.labeling.points[idx]
        if self.system.kit is None:
            return self.system.labeling.bits_of(point)
        _, s = decode_secret(self.system.kit, point, self.system.labeling)
        return s


def ml_decode(cfg: ChannelConfig, system: SecrecySystem, y1, mode: str = "marginal",
              t2_index: int | None = None, cap: int = DEFAULT_PAIR_CAP) -> np.ndarray:
    """One-shot wrapper around MLDecoder; returns the message estimate."""
    return MLDecoder(cfg, system, cap=cap).decode_message(y1, mode, t2_index)


def run_message_round(cfg: ChannelConfig, system: SecrecySystem, w_bits, seed: int,
                      mode: str = "marginal", decoder: MLDecoder | None = None) -> Transcript:
    """transmit + decode, filling the estimate fields of the transcript."""
    tr = transmit(cfg, system, w_bits, seed)
    dec = decoder if decoder is not None else MLDecoder(cfg, system)
    t2_index = None
    if mode == "genie":
        t2_index = int(np.argmin(((system.jammer_points() - tr.t2) ** 2).sum(axis=1)))
    tr.w_hat = dec.decode_message(tr.y1, mode, t2_index)
    tr.decode_error = not np.array_equal(tr.w_hat, tr.w_bits)
    return tr


# ---------------------------------------------------------------------------
# Exact leakage.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Coord:
    m: int
    bits: int
    shift1: int


def _cyclic_shift(values: np.ndarray, d: float, c: float) -> int:
    """Rank permutation induced by dithering: index i lands at (i+k) mod m."""
    mod_vals = _reduce_values(values + d, c)
    order = np.argsort(mod_vals)
    ranks = np.empty(len(values), dtype=int)
    ranks[order] = np.arange(len(values))
    k = int(ranks[0])
    if not np.array_equal(ranks, (np.arange(len(values)) + k) % len(values)):
        raise RuntimeError("dither did not act as a cyclic shift; internal bug")
    return k


def _coord_specs(codebook: LayeredCodebook, dithers1) -> list[_Coord]:
    out = []
    for layer, d in zip(codebook.layers, dithers1):
        vals = layer.coordinate_values()
        m = layer.nesting
        bits = m.bit_length() - 1 if (m & (m - 1)) == 0 else 0
        for j in range(layer.dim):
            out.append(_Coord(m, bits, _cyclic_shift(vals, float(d[j]), layer.coarse_scale)))
    return out


def _window_indicator(coord: _Coord, sign: str) -> np.ndarray:
    """F[sigma, i] = 1 when sender index i is consistent with observed sum sigma."""
    m = coord.m
    f = np.zeros((2 * m - 1, m), dtype=np.int64)
    for i in range(m):
        j1 = (i + coord.shift1) % m
        for sig in range(2 * m - 1):
            offset = sig - j1 if sign == "+" else j1 - (sig - (m - 1))
            if 0 <= offset <= m - 1:
                f[sig, i] = 1
    return f


def _char_table(coord: _Coord, sign: str) -> np.ndarray:
    """G[mu, sigma] = sum_i (-1)^(mu.i) F[sigma, i] for every mask mu."""
    m = coord.m
    f = _window_indicator(coord, sign)
    signs = np.empty((m, m), dtype=np.int64)
    for mu in range(m):
        for i in range(m):
            signs[mu, i] = -1 if bin(mu & i).count("1") % 2 else 1
    return signs @ f.T  # (m masks, 2m-1 sums)


def _hash_matrix(hash_or_kit) -> FiniteFieldMatrix:
    g = hash_or_kit.g if isinstance(hash_or_kit, EncoderKit) else hash_or_kit
    if g.q != 2:
        raise DomainError("leakage analysis works over GF(2) hashes")
    return g


def _xlog2x_sum(a: np.ndarray) -> float:
    out = np.zeros_like(a, dtype=float)
    np.log2(a, out=out, where=a > 0)
    out *= a
    return float(out.sum())


def _int_xlog2x_sum(a: np.ndarray) -> float:
    """sum x log2 x over an array of exact nonnegative integers (stored as floats).

    Histogramming first makes the log cost proportional to the value range
    instead of the array size.  Entries must be exactly integral (all the
    counting arithmetic here is exact in float64), so truncation is safe;
    bincount rejects negatives, which would indicate an internal bug.
    """
    vals = np.asarray(a, dtype=np.int64).ravel()
    if vals.size == 0:
        return 0.0
    hist = np.bincount(vals)
    v = np.arange(hist.size, dtype=float)
    nz = v >= 2  # 0 log 0 := 0 and 1 log 1 = 0
    return float((hist[nz] * v[nz] * np.log2(v[nz])).sum())


def exact_leakage(codebook: LayeredCodebook, hash_or_kit, dithers1=None,
                  sign: str = "+", method: str = "auto",
                  cap: int = DEFAULT_SIGMA_SPACE_CAP) -> float:
    """Exact I(secret; per-layer real sums) in bits, dithers public and fixed.

    The secret is the hash image of the sender's uniformly encoded point;
    the jammer's point is uniform and independent.  Equals the information
    carried by (modular sum, carry index); the eavesdropper's noisy
    observation can only be a further degraded function of that pair.
    """
    if sign not in ("+", "-"):
        raise DomainError("sign must be '+' or '-'")
    if dithers1 is None:
        dithers1 = _zero_dithers(codebook)
    if hash_or_kit is None:
        return 0.0
    g = _hash_matrix(hash_or_kit)
    r0 = g.rows
    if r0 == 0:
        return 0.0
    if g.cols != codebook.n0_bits:
        raise DomainError("hash width must match the codebook label width")

    fast_ok = codebook.labels_whole_codebook and all(
        (layer.nesting & (layer.nesting - 1)) == 0 for layer in codebook.layers)
    if method == "auto":
        method = "fast" if fast_ok else "enumerate"
    if method == "fast" and not fast_ok:
        raise DomainError("fast leakage needs power-of-two layers labeling the whole codebook")

    coords = _coord_specs(codebook, dithers1)
    sigma_space = 1
    for c in coords:
        sigma_space *= 2 * c.m - 1
    if sigma_space > cap:
        raise ResourceCapError(f"sum alphabet {sigma_space} exceeds cap {cap}")

    if method == "fast":
        return _leakage_charsum(codebook, g, coords, sign)
    if method == "enumerate":
        return _leakage_enumerate(codebook, g, coords, sign, cap)
    raise DomainError(f"unknown method {method!r}")


def _outer_xlog2x_sum(left: np.ndarray, right: np.ndarray) -> float:
    """sum f(x*y) over the outer product, via distinct-value histograms."""
    lv, lc = np.unique(left, return_counts=True)
    rv, rc = np.unique(right, return_counts=True)
    prod = lv[:, None] * rv[None, :]
    mult = lc[:, None] * rc[None, :]
    mask = prod >= 2
    return float((mult[mask] * prod[mask] * np.log2(prod[mask])).sum())


def _image_span(g: FiniteFieldMatrix) -> list[int]:
    """All values of g @ b over GF(2)^cols, as integers (the column span)."""
    span = {0}
    for j in range(g.cols):
        col = bits_to_int(g.entries[:, j])
        span |= {s ^ col for s in span}
    return sorted(span)


def _leakage_charsum(codebook: LayeredCodebook, g: FiniteFieldMatrix,
                     coords: list[_Coord], sign: str) -> float:
    n0 = codebook.n0_bits
    r0 = g.rows
    n_w = 1 << r0
    tables = [_char_table(c, sign) for c in coords]

    # split coordinates into halves of comparable sum-alphabet size
    alpha = [2 * c.m - 1 for c in coords]
    total = math.prod(alpha)
    best_cut, best_gap = 1, float("inf")
    left = 1
    for cut in range(1, len(coords)):
        left *= alpha[cut - 1]
        gap = abs(left - total / left)
        if gap < best_gap:
            best_cut, best_gap = cut, gap
    if len(coords) == 1:
        best_cut = 1

    def half_product(lam_mu_blocks, lo, hi):
        vec = np.ones(1)
        for c_idx in range(lo, hi):
            row = tables[c_idx][lam_mu_blocks[c_idx]]
            vec = (vec[:, None] * row[None, :]).ravel()
        return vec

    block_sizes = [c.bits for c in coords]
    offsets = np.cumsum([0] + block_sizes)

    u_rows, v_rows = [], []
    for lam in range(n_w):
        lam_bits = int_to_bits(lam, r0)
        mu = (lam_bits @ g.entries) % 2
        mu_blocks = [bits_to_int(mu[offsets[i]:offsets[i + 1]]) for i in range(len(coords))]
        u_rows.append(half_product(mu_blocks, 0, best_cut))
        v_rows.append(half_product(mu_blocks, best_cut, len(coords)))
    u = np.stack(u_rows)  # (n_w, A)
    v = np.stack(v_rows)  # (n_w, B)

    s_signs = np.empty((n_w, n_w))
    for w in range(n_w):
        for lam in range(n_w):
            s_signs[w, lam] = -1.0 if bin(w & lam).count("1") % 2 else 1.0

    # the sigma marginal is the lambda=0 outer product (plain window sizes)
    # and the W marginal is uniform on the hash's column span: both are
    # hash-cheap, so only the joint counts need the big pass below
    sum_nsig = _outer_xlog2x_sum(u[0], v[0])
    rank = g.rank()
    per_w_total = float((1 << (n0 - rank)) * codebook.size)
    sum_nw = len(_image_span(g)) * per_w_total * math.log2(per_w_total)

    # Walsh sums stay below 2^r0 * max|u| * max|v|; float32 is exact
    # whenever that fits in its 24-bit mantissa
    bound = n_w * float(np.abs(u).max()) * float(np.abs(v).max())
    dtype = np.float32 if bound < (1 << 24) else np.float64
    u = u.astype(dtype)
    v = np.ascontiguousarray(v.astype(dtype))
    s_signs = s_signs.astype(dtype)

    a_size = u.shape[1]
    b_size = v.shape[1]
    budget = 1 << 23
    chunk = max(1, min(a_size, budget // max(1, n_w * b_size)))

    sum_n = 0.0
    scale = dtype(1.0 / n_w)  # counts = (1/2^r0) * Walsh sum, exactly integral
    for start in range(0, a_size, chunk):
        stop = min(a_size, start + chunk)
        su = s_signs[:, :, None] * u[None, :, start:stop]       # (W, L, chunk)
        counts = np.matmul(np.ascontiguousarray(su.transpose(0, 2, 1)), v)
        counts *= scale                                         # (W, chunk, B)
        sum_n += _int_xlog2x_sum(counts)

    d_total = float(1 << n0) * float(codebook.size)
    mi = math.log2(d_total) + (sum_n - sum_nsig - sum_nw) / d_total
    return max(0.0, mi)


def _leakage_enumerate(codebook: LayeredCodebook, g: FiniteFieldMatrix,
                       coords: list[_Coord], sign: str, cap: int) -> float:
    labeling = codebook.labeling()
    k_size = labeling.points.shape[0]
    sigma_space = math.prod(2 * c.m - 1 for c in coords)
    if k_size * sigma_space > (cap << 4):
        raise ResourceCapError("enumeration workload exceeds cap")

    windows = [_window_indicator(c, sign).astype(float) / c.m for c in coords]
    value_lists = []
    for layer in codebook.layers:
        vals = layer.coordinate_values()
        value_lists.extend([vals] * layer.dim)

    r0 = g.rows
    joint = np.zeros((1 << r0, sigma_space))
    for idx in range(k_size):
        bits = int_to_bits(idx, codebook.n0_bits)
        w = bits_to_int((g.entries @ bits) % 2)
        point = labeling.points[idx]
        vec = np.ones(1)
        for c_idx in range(len(coords)):
            i = int(np.argmin(np.abs(value_lists[c_idx] - point[c_idx])))
            col = windows[c_idx][:, i]  # p(sigma | sender index i), shift folded in
            vec = (vec[:, None] * col[None, :]).ravel()
        joint[w] += vec / k_size
    return _mi_from_joint(joint)


def _mi_from_joint(joint: np.ndarray) -> float:
    total = joint.sum()
    if not math.isclose(total, 1.0, abs_tol=1e-9):
        raise RuntimeError("joint does not normalize; internal bug")
    mi = (_xlog2x_sum(joint) - _xlog2x_sum(joint.sum(axis=0))
          - _xlog2x_sum(joint.sum(axis=1)))
    return max(0.0, mi)


# ---------------------------------------------------------------------------
# Hash selection and the leakage trend.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HashSelection:
    """Outcome of drawing a hash family sample and keeping a good member."""

    kit: EncoderKit
    chosen_seed: int
    chosen_leakage: float
    family_avg_leakage: float
    leakages: tuple
    full_ranks: tuple
    fallback: bool


def select_secrecy_hash(codebook: LayeredCodebook, r0: int, dithers1=None,
                        sign: str = "+", n_candidates: int = 16, seed: int = 0,
                        policy: str = "best") -> HashSelection:
    """Draw hash candidates, average their exact leakage, keep a good one.

    A kept hash must have full row rank and leak at most twice the family
    average.  policy='first' keeps the first such candidate, policy='best'
    the lowest-leakage one.  If no candidate qualifies (it always does in
    measure over the whole family, but a small sample can miss), the
    lowest-leakage full-rank candidate is kept and flagged.
    """
    if r0 < 1:
        raise DomainError("selection needs a positive secret width")
    if policy not in ("first", "best"):
        raise DomainError("policy must be 'first' or 'best'")
    rng = substream(seed, "hash-select")
    cand_seeds = [int(s) for s in rng.integers(0, 2 ** 63 - 1, size=n_candidates)]
    matrices = [sample_linear_hash(r0, codebook.n0_bits, 2, s) for s in cand_seeds]
    leakages = [exact_leakage(codebook, m, dithers1, sign) for m in matrices]
    ranks = [full_rank_check(m) for m in matrices]
    avg = float(np.mean(leakages))

    qualified = [i for i in range(n_candidates)
                 if ranks[i] and leakages[i] <= 2 * avg + 1e-12]
    fallback = not qualified
    if qualified:
        pick = qualified[0] if policy == "first" else min(qualified, key=lambda i: leakages[i])
    else:
        full = [i for i in range(n_candidates) if ranks[i]]
        if not full:
            raise DomainError("no full-rank hash in the sampled family")
        pick = min(full, key=lambda i: leakages[i])

    return HashSelection(build_encoder(matrices[pick]), cand_seeds[pick],
                         leakages[pick], avg, tuple(leakages), tuple(ranks), fallback)


@dataclass(frozen=True)
class TrendRow:
    n_bar: int
    r0: int
    leakage_bits: float
    family_avg_leakage: float
    decode_error_rate: float | None
    power_1: float
    power_2: float
    seed: int


def make_codebook(m: int, n_bar: int, n_layers: int = 1,
                  coarse_scale: float | None = None) -> LayeredCodebook:
    """Constant-rate stack: n_layers copies of (c, m) with block dim n_bar/n_layers."""
    if n_bar % n_layers:
        raise ConfigError("n_bar must be divisible by the layer count")
    c = float(m) if coarse_scale is None else coarse_scale
    block = n_bar // n_layers
    return LayeredCodebook(tuple(NestedLatticePair(block, c, m) for _ in range(n_layers)))


def _genie_error_rate(codebook: LayeredCodebook, d1, d2, cfg: ChannelConfig,
                      trials: int, seed: int) -> float:
    """Decode error estimate with the jammer's point revealed to the receiver.

    A uniformly encoded point is the same draw as a uniform labeled point,
    so the encoder itself drops out of the estimate.
    """
    labeling = codebook.labeling()
    x1_table = np.stack([_mod_signal(codebook, p, d1)[1] for p in labeling.points])
    coeff = scale_channel(cfg)
    jam = codebook.product_points()
    rng = substream(seed, "trend-decode")
    errors = 0
    n = codebook.block_dim
    for _ in range(trials):
        i1 = int(rng.integers(0, x1_table.shape[0]))
        i2 = int(rng.integers(0, jam.shape[0]))
        x2 = _mod_signal(codebook, jam[i2], d2)[1]
        y = (x1_table[i1] + coeff.gain_x2_at_d1 * x2
             + gaussian(rng, n, coeff.noise_std_d1))
        resid = y - coeff.gain_x2_at_d1 * x2
        guess = int(np.argmin(((x1_table - resid) ** 2).sum(axis=1)))
        if guess != i1:
            errors += 1
    return errors / trials


def leakage_trend(m: int, n_bar_values: Sequence[int], eps: float, delta: float,
                  n_layers: int = 1, sign: str = "+", family: int = 16,
                  seed: int = 0, policy: str = "best", dither_mode: str = "zero",
                  fixed_r0: int | None = None, decode_trials: int = 0,
                  decode_cfg: ChannelConfig | None = None) -> list[TrendRow]:
    """Exact leakage of the selected hash encoder across blocklengths.

    Each row selects its own hash (seeded per row) and reports the exact
    leakage with the family average it was screened against.  The secret
    width per row is the largest admitted by the rate margin eps + delta;
    passing fixed_r0 holds the width constant instead (it must still fit
    the margin at every blocklength), which isolates the decay of the
    leakage from the integer jumps of the per-row width.
    """
    if dither_mode not in ("zero", "random"):
        raise ConfigError("dither_mode must be 'zero' or 'random'")
    rate0 = math.log2(m)
    rows = []
    for n_bar in n_bar_values:
        codebook = make_codebook(m, n_bar, n_layers)
        if dither_mode == "zero":
            d1 = _zero_dithers(codebook)
            d2 = _zero_dithers(codebook)
        else:
            d1 = random_dithers(codebook, substream(seed, f"dither1-{n_bar}"))
            d2 = random_dithers(codebook, substream(seed, f"dither2-{n_bar}"))
        margin = secret_rate_select(n_bar, rate0, eps, delta)
        if fixed_r0 is None:
            r0 = margin
        else:
            if fixed_r0 > margin:
                raise ConfigError(
                    f"fixed width {fixed_r0} exceeds the admitted margin {margin}"
                    f" at blocklength {n_bar}")
            r0 = fixed_r0
        if r0 == 0:
            leak, avg = 0.0, 0.0
        else:
            sel = select_secrecy_hash(codebook, r0, d1, sign,
                                      n_candidates=family,
                                      seed=seed + n_bar, policy=policy)
            leak, avg = sel.chosen_leakage, sel.family_avg_leakage
        err = None
        if decode_trials > 0:
            cfg = decode_cfg if decode_cfg is not None else ChannelConfig(
                a=2.0, b=1.0, noise_var1=1e-12)
            err = _genie_error_rate(codebook, d1, d2, cfg, decode_trials,
                                    seed + n_bar)
        rows.append(TrendRow(n_bar, r0, leak, avg, err,
                             exact_signal_power(codebook, d1),
                             exact_signal_power(codebook, d2), seed))
    return rows


def fitted_log2_slope(rows: Sequence[TrendRow]) -> float:
    """Least-squares slope of log2(leakage) against blocklength."""
    pts = [(row.n_bar, row.leakage_bits) for row in rows if row.leakage_bits > 0]
    if len(pts) < 2:
        raise DomainError("need at least two positive-leakage rows to fit a slope")
    xs = np.array([p[0] for p in pts], dtype=float)
    ys = np.log2([p[1] for p in pts])
    return float(np.polyfit(xs, ys, 1)[0])


@dataclass(frozen=True)
class RateReport:
    rate_bits_per_use: float
    reliability_error_rate: float
    leakage_bits: float


def secrecy_rate_report(transcripts: Sequence[Transcript], leakage: float) -> RateReport:
    """Secret rate H(W)/n with the observed decoding error rate and leakage."""
    if not transcripts:
        raise DomainError("need at least one transcript")
    n = transcripts[0].x1.shape[0]
    r0 = len(transcripts[0].w_bits)
    errors = [tr.decode_error for tr in transcripts if tr.decode_error is not None]
    err_rate = float(np.mean(errors)) if errors else 0.0
    return RateReport(r0 / n, err_rate, leakage)
