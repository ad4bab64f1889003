"""Code-block arrangement and the sign/amplitude bit matrix.

A code block carries ``N_A`` shaped amplitude bits and ``N_S`` uniform sign
bits over ``N_A / (2C)`` QAM symbols, where ``C`` amplitude bits accompany
each sign bit (``C = 1`` for QAM-16, 2 for QAM-64, 3 for QAM-256). The
amplitude bits come from ``n_fr_sh`` shaper frames of ``n_sh`` bits; the
block is ``n_fr_fec`` LDPC codewords of length ``n_fec``::

    N_A = n_sh * n_fr_sh
    C * N_S = N_A
    N_S + N_A = n_fr_fec * n_fec

Per shaper frame, the ``n_sh / C`` sign positions hold ``k_sign`` sign
information bits and ``delta_n`` parity bits.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from math import lcm

import numpy as np

ORDER_TO_C = {16: 1, 64: 2, 256: 3}
C_TO_ORDER = {v: k for k, v in ORDER_TO_C.items()}


@dataclass(frozen=True)
class CodeBlockLayout:
    c: int
    n_sh: int
    n_fec: int
    n_fr_sh: int
    n_fr_fec: int
    n_a: int
    n_s: int
    k_sh: int | None = None
    k_sign: int | None = None

    @property
    def order(self) -> int:
        return C_TO_ORDER[self.c]

    @property
    def frame_sign_bits(self) -> int:
        return self.n_sh // self.c

    @property
    def frame_code_bits(self) -> int:
        """Coded bits per shaper frame: ``k_sign + n_sh + delta_n``."""
        return self.n_sh + self.frame_sign_bits

    @property
    def delta_n(self) -> int | None:
        if self.k_sign is None:
            return None
        return self.frame_sign_bits - self.k_sign

    @property
    def n_symbols(self) -> int:
        return self.n_s // 2

    @property
    def info_sign_bits(self) -> int:
        """Sign information bits in the whole block."""
        return (self.k_sign or 0) * self.n_fr_sh

    @property
    def parity_bits(self) -> int:
        return self.n_s - self.info_sign_bits

    @property
    def k_fec(self) -> int:
        """LDPC dimension: amplitude plus sign information bits per codeword."""
        if self.k_sign is None:
            raise ValueError("layout has no k_sign assigned")
        total = self.n_a + self.info_sign_bits
        if total % self.n_fr_fec:
            raise ValueError("information bits do not split evenly over the codewords")
        return total // self.n_fr_fec

    @property
    def info_bits(self) -> int:
        """User bits per block: ``n_fr_sh * (k_sh + k_sign)``."""
        return self.n_fr_sh * (self.k_sh + self.k_sign)

    def describe(self) -> str:
        lines = [f"c={self.c}", f"order={self.order}", f"n_sh={self.n_sh}",
                 f"k_sh={self.k_sh}", f"k_sign={self.k_sign}", f"delta_n={self.delta_n}",
                 f"n_fec={self.n_fec}", f"n_fr_sh={self.n_fr_sh}",
                 f"n_fr_fec={self.n_fr_fec}", f"n_a={self.n_a}", f"n_s={self.n_s}"]
        if self.k_sh is not None and self.k_sign is not None:
            r_sh, r_fec, r = rates(self, self.k_sh, self.k_sign)
            lines += [f"r_sh={r_sh:.6f}", f"r_fec={r_fec:.6f}", f"r={r:.6f}"]
        return "\n".join(lines) + "\n"


def solve_layout(n_sh: int, n_fec: int, c: int, k_sh: int | None = None,
                 k_sign: int | None = None) -> CodeBlockLayout:
    """Smallest frame multipliers satisfying the block equations.

    ``n_sh * n_fr_sh * (C + 1) = C * n_fr_fec * n_fec``; the least common
    multiple of ``n_sh (C+1)`` and ``C n_fec`` gives both multipliers at
    their minimum simultaneously.
    """
    if n_sh < 1 or n_fec < 1:
        raise ValueError("n_sh and n_fec must be positive")
    if c not in C_TO_ORDER:
        raise ValueError(f"c must be one of {sorted(C_TO_ORDER)}, got {c}")
    x = lcm(n_sh * (c + 1), c * n_fec)
    n_fr_sh = x // (n_sh * (c + 1))
    n_fr_fec = x // (c * n_fec)
    n_a = n_sh * n_fr_sh
    if n_a % c:
        raise ValueError(f"N_A={n_a} is not divisible by C={c}")
    n_s = n_a // c
    if n_s % 2:
        raise ValueError(f"N_S={n_s} sign bits cannot fill whole QAM symbols")
    assert n_s + n_a == n_fr_fec * n_fec
    layout = CodeBlockLayout(c=c, n_sh=n_sh, n_fec=n_fec, n_fr_sh=n_fr_sh,
                             n_fr_fec=n_fr_fec, n_a=n_a, n_s=n_s)
    if k_sh is not None or k_sign is not None:
        layout = with_split(layout, k_sh, k_sign)
    return layout


def with_split(layout: CodeBlockLayout, k_sh: int, k_sign: int) -> CodeBlockLayout:
    """Assign shaper input size and sign information bits per frame."""
    max_k = layout.n_sh
    if k_sh is None or k_sign is None:
        raise ValueError("both k_sh and k_sign are required")
    if not 0 < k_sh <= max_k:
        raise ValueError(f"k_sh={k_sh} must be in (0, {max_k}]")
    if not 0 <= k_sign <= layout.frame_sign_bits:
        raise ValueError(f"k_sign={k_sign} must be in [0, {layout.frame_sign_bits}]")
    out = replace(layout, k_sh=k_sh, k_sign=k_sign)
    out.k_fec  # noqa: B018 -- raises if parity does not split over codewords
    return out


def split_for_rate(n_sh: int, n_fec: int, c: int, k_sh: int, rate) -> CodeBlockLayout:
    """Layout whose sign information fills the block up to overall ``rate``."""
    layout = solve_layout(n_sh, n_fec, c)
    total = Fraction(rate) * layout.n_fr_fec * n_fec
    if total.denominator != 1:
        raise ValueError(f"rate {rate} does not give a whole number of bits")
    sign_total = int(total) - layout.n_fr_sh * k_sh
    if sign_total < 0 or sign_total % layout.n_fr_sh:
        raise ValueError(f"k_sh={k_sh} cannot reach rate {rate} with this layout")
    return with_split(layout, k_sh, sign_total // layout.n_fr_sh)


def rates(layout: CodeBlockLayout, k_sh: int, k_sign: int) -> tuple[float, float, float]:
    """``(R_sh, R_FEC, R)`` for a per-frame split.

    ``R_FEC = (n_sh + k_sign) / n_FEC`` with ``n_FEC`` the coded bits per
    frame, and ``R = R_FEC - (1 - R_sh) * C / (C + 1)``; for QAM-16 this is
    ``(R_sh + 2 R_FEC - 1) / 2``. Both are checked against direct bit
    counting ``(k_sh + k_sign) / n_FEC``.
    """
    n_sh = layout.n_sh
    if not 0 < k_sh <= n_sh:
        raise ValueError(f"k_sh={k_sh} must be in (0, {n_sh}]")
    if not 0 <= k_sign <= layout.frame_sign_bits:
        raise ValueError(f"k_sign={k_sign} must be in [0, {layout.frame_sign_bits}]")
    if layout.k_sign is not None and layout.k_sign != k_sign:
        raise ValueError(f"k_sign={k_sign} inconsistent with layout "
                         f"(k_sign + delta_n must equal {layout.frame_sign_bits})")
    n_code = layout.frame_code_bits
    r_sh = k_sh / n_sh
    r_fec = (n_sh + k_sign) / n_code
    c = layout.c
    r = r_fec - (1 - r_sh) * c / (c + 1)
    direct = (k_sh + k_sign) / n_code
    if abs(r - direct) > 1e-12:
        raise ArithmeticError(f"rate mismatch: {r} vs {direct}")
    if c == 1:
        half = 0.5 * (r_sh + 2 * r_fec - 1)
        if abs(half - direct) > 1e-12:
            raise ArithmeticError(f"rate mismatch: {half} vs {direct}")
    return r_sh, r_fec, r


class Framer:
    """Places a serial bit stream onto symbol label positions.

    The stream is ``amp_bits || sign_info_bits || parity_bits`` for shaped
    blocks and the plain codeword for uniform ones. ``positions[i]`` is the
    flat label index (``symbol * bits_per_symbol + bit``) receiving stream
    bit ``i``. Shaped blocks interleave whole amplitude symbols among
    amplitude positions and sign bits among sign positions, never across.
    """

    def __init__(self, positions, bits_per_symbol, n_amp=0, n_sign_info=0):
        self.positions = np.asarray(positions, dtype=np.int64)
        self.bits_per_symbol = bits_per_symbol
        self.n_bits = len(self.positions)
        if self.n_bits % bits_per_symbol:
            raise ValueError("stream length is not a whole number of symbols")
        self.n_symbols = self.n_bits // bits_per_symbol
        self.n_amp = n_amp
        self.n_sign_info = n_sign_info

    @classmethod
    def for_layout(cls, layout: CodeBlockLayout, interleaver_seed=None) -> "Framer":
        c = layout.c
        bps = 2 * (c + 1)
        n_sym = layout.n_symbols
        sym = np.arange(n_sym)[:, None] * bps
        # amplitude slot t = (symbol, dim): bits 2 + dim*c .. 2 + dim*c + c - 1
        amp_slots = (sym[:, :, None] + 2 + np.arange(2)[None, :, None] * c
                     + np.arange(c)[None, None, :]).reshape(2 * n_sym, c)
        sign_slots = (sym + np.arange(2)[None, :]).reshape(-1)
        if interleaver_seed is not None:
            rng = np.random.default_rng(interleaver_seed)
            amp_slots = amp_slots[rng.permutation(len(amp_slots))]
            sign_slots = sign_slots[rng.permutation(len(sign_slots))]
        positions = np.concatenate([amp_slots.reshape(-1), sign_slots])
        return cls(positions, bps, n_amp=layout.n_a, n_sign_info=layout.info_sign_bits)

    @classmethod
    def uniform(cls, n_bits: int, order: int, interleaver_seed=None) -> "Framer":
        bps = int(np.log2(order))
        positions = np.arange(n_bits)
        if interleaver_seed is not None:
            positions = np.random.default_rng(interleaver_seed).permutation(n_bits)
        return cls(positions, bps)

    def to_labels(self, stream) -> np.ndarray:
        """Stream (..., n_bits) -> labels (..., n_symbols, bits_per_symbol)."""
        stream = np.asarray(stream)
        if stream.shape[-1] != self.n_bits:
            raise ValueError(f"expected {self.n_bits} stream bits, got {stream.shape[-1]}")
        flat = np.empty_like(stream)
        flat[..., self.positions] = stream
        return flat.reshape(*stream.shape[:-1], self.n_symbols, self.bits_per_symbol)

    def to_stream(self, labels) -> np.ndarray:
        """Inverse of :meth:`to_labels`; also routes per-label LLRs."""
        labels = np.asarray(labels)
        flat = labels.reshape(*labels.shape[:-2], -1) if labels.ndim >= 2 else labels
        if flat.shape[-1] != self.n_bits:
            raise ValueError(f"expected {self.n_bits} label bits, got {flat.shape[-1]}")
        return flat[..., self.positions]

    def assemble(self, amp_bits, sign_info_bits, parity_bits) -> np.ndarray:
        amp_bits, sign_info_bits, parity_bits = (np.asarray(a) for a in
                                                 (amp_bits, sign_info_bits, parity_bits))
        if amp_bits.shape[-1] != self.n_amp:
            raise ValueError(f"expected {self.n_amp} amplitude bits, got {amp_bits.shape[-1]}")
        n_sign = self.n_bits - self.n_amp
        if sign_info_bits.shape[-1] + parity_bits.shape[-1] != n_sign:
            raise ValueError(f"sign info + parity must total {n_sign} bits")
        if sign_info_bits.shape[-1] != self.n_sign_info:
            raise ValueError(f"expected {self.n_sign_info} sign information bits")
        return self.to_labels(np.concatenate([amp_bits, sign_info_bits, parity_bits], axis=-1))

    def disassemble(self, labels) -> tuple[np.ndarray, np.ndarray]:
        """Labels -> (amplitude bits, sign information bits); parity dropped."""
        s = self.to_stream(labels)
        return s[..., :self.n_amp], s[..., self.n_amp:self.n_amp + self.n_sign_info]

    def position_kinds(self) -> np.ndarray:
        """Per stream bit: 0 amplitude, 1 sign information, 2 parity."""
        kinds = np.full(self.n_bits, 2, dtype=np.uint8)
        kinds[:self.n_amp] = 0
        kinds[self.n_amp:self.n_amp + self.n_sign_info] = 1
        return kinds


def assemble(amp_bits, sign_info_bits, parity_bits, layout, interleaver_seed=None):
    return Framer.for_layout(layout, interleaver_seed).assemble(amp_bits, sign_info_bits,
                                                                  parity_bits)


def disassemble(labels, layout, interleaver_seed=None):
    return Framer.for_layout(layout, interleaver_seed).disassemble(labels)
