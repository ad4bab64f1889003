"""Enumerative sphere shaping of per-dimension QAM amplitudes.

A codebook maps ``k`` uniform bits to a sequence of ``n`` amplitude symbols
(levels ``1, 3, 5, ...`` of one real dimension). The image is the set of the
``2**k`` sequences of least energy ``sum a_i**2``: every sequence of energy
below the bound ``e_max`` plus the lexicographically first sequences with
energy exactly ``e_max``. Index ``i`` maps to

* the ``i``-th sequence (lexicographic, ``1 < 3 < 5 < ...``, left to right)
  among those with energy ``< e_max``, if ``i < n_below``;
* otherwise the ``(i - n_below)``-th lexicographic sequence of the
  ``e_max`` shell.

Counting uses exact Python integers; for ``n = 256`` the counts exceed
``2**160``. Energies are handled in reduced units: for odd amplitudes
``a = 2j + 1`` one has ``a**2 = 1 + 8 * j*(j+1)/2``, so a sequence of energy
``E`` has integer weight ``W = (E - n) / 8``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import accumulate
from math import gcd

import numpy as np

from .constellation import gray, int_to_bits

_AMP_BITS = {16: 1, 64: 2, 256: 3}


def amplitude_bits_per_symbol(order: int) -> int:
    try:
        return _AMP_BITS[order]
    except KeyError:
        raise ValueError(f"no amplitude shaping for QAM order {order}") from None


def _alphabet(order):
    bps = amplitude_bits_per_symbol(order)
    levels = np.arange(1, 2 ** (bps + 1), 2)
    energies = [int(a) ** 2 for a in levels]
    e0 = energies[0]
    g = 0
    for e in energies[1:]:
        g = gcd(g, e - e0)
    weights = tuple((e - e0) // g for e in energies)
    return bps, levels, tuple(energies), weights, g


def _count_rows(n, weights, width):
    """``rows[r][b]`` = number of length-``r`` sequences of total weight ``b``."""
    rows = [None] * (n + 1)
    prev = np.zeros(width + 1, dtype=object)
    prev[0] = 1
    rows[0] = prev.tolist()
    for r in range(1, n + 1):
        cur = np.zeros(width + 1, dtype=object)
        for w in weights:
            if w <= width:
                cur[w:] += prev[: width + 1 - w]
        rows[r] = cur.tolist()
        prev = cur
    return rows


@lru_cache(maxsize=8)
def _full_cumulative(n, weights):
    """Cumulative weight counts of all length-``n`` sequences."""
    width = n * max(weights)
    row = np.zeros(width + 1, dtype=object)
    row[0] = 1
    for _ in range(n):
        cur = np.zeros(width + 1, dtype=object)
        for w in weights:
            cur[w:] += row[: width + 1 - w]
        row = cur
    return tuple(accumulate(row.tolist()))


@dataclass(frozen=True, eq=False)
class EssCodebook:
    """Minimal-energy amplitude codebook of ``2**k`` sequences of length ``n``."""

    n: int
    k: int
    order: int
    levels: tuple[int, ...]
    energies: tuple[int, ...]
    weights: tuple[int, ...]
    energy_unit: int
    w_max: int
    n_below: int
    _exact: list = field(repr=False)

    @property
    def bits_per_symbol(self) -> int:
        return amplitude_bits_per_symbol(self.order)

    @property
    def n_bits(self) -> int:
        return self.n * self.bits_per_symbol

    @property
    def e_max(self) -> int:
        return self.n * self.energies[0] + self.energy_unit * self.w_max

    @property
    def size(self) -> int:
        return 1 << self.k

    @cached_property
    def _cum(self):
        return [list(accumulate(row)) for row in self._exact]

    @cached_property
    def _level_bits(self):
        bps = self.bits_per_symbol
        return np.array([int_to_bits(gray(j), bps) for j in range(len(self.levels))],
                        dtype=np.uint8)

    @cached_property
    def _pattern_to_level(self):
        lut = np.empty(len(self.levels), dtype=int)
        for j in range(len(self.levels)):
            lut[gray(j)] = j
        return lut

    def weight(self, levels) -> int:
        return int(sum(self.weights[l] for l in levels))

    def admissible_count(self, bound_weight=None) -> int:
        """Number of sequences with weight <= ``bound_weight`` (default ``w_max``)."""
        b = self.w_max if bound_weight is None else bound_weight
        if b < 0:
            return 0
        return self._cum[self.n][min(b, self.w_max)]

    def suffix_count(self, position: int, accumulated_energy: int) -> int:
        """Admissible suffixes from ``position`` given the energy spent so far.

        This is the DP table ``T[position][accumulated_energy]``: the number of
        level sequences for positions ``position..n-1`` keeping the total
        energy at or below ``e_max``.
        """
        r = self.n - position
        spare = self.e_max - accumulated_energy - r * self.energies[0]
        if spare < 0:
            return 0
        return self._cum[r][min(spare // self.energy_unit, self.w_max)]

    # -- enumerative indexing -------------------------------------------------

    def _unrank_sphere(self, idx, budget):
        cum = self._cum
        out = []
        b = budget
        for i in range(self.n):
            r = self.n - 1 - i
            for lev, w in enumerate(self.weights):
                if w > b:
                    raise AssertionError("index outside the sphere")
                c = cum[r][b - w]
                if idx < c:
                    out.append(lev)
                    b -= w
                    break
                idx -= c
        return out

    def _unrank_shell(self, idx, total):
        ex = self._exact
        out = []
        b = total
        for i in range(self.n):
            r = self.n - 1 - i
            for lev, w in enumerate(self.weights):
                if w > b:
                    raise AssertionError("index outside the shell")
                c = ex[r][b - w]
                if idx < c:
                    out.append(lev)
                    b -= w
                    break
                idx -= c
        return out

    def _rank_sphere(self, levels, budget):
        cum = self._cum
        idx = 0
        b = budget
        for i, lev in enumerate(levels):
            r = self.n - 1 - i
            for w in self.weights[:lev]:
                if w <= b:
                    idx += cum[r][b - w]
            b -= self.weights[lev]
        return idx

    def _rank_shell(self, levels, total):
        ex = self._exact
        idx = 0
        b = total
        for i, lev in enumerate(levels):
            r = self.n - 1 - i
            for w in self.weights[:lev]:
                if w <= b:
                    idx += ex[r][b - w]
            b -= self.weights[lev]
        return idx

    def unrank(self, index: int) -> list[int]:
        """Level sequence for codebook index ``index``."""
        if not 0 <= index < self.size:
            raise ValueError(f"index {index} outside [0, 2**{self.k})")
        if index < self.n_below:
            return self._unrank_sphere(index, self.w_max - 1)
        return self._unrank_shell(index - self.n_below, self.w_max)

    def rank(self, levels) -> int | None:
        """Codebook index of a level sequence, or None if it is not a codeword."""
        if len(levels) != self.n:
            raise ValueError(f"expected {self.n} amplitude symbols, got {len(levels)}")
        w = self.weight(levels)
        if w > self.w_max:
            return None
        if w < self.w_max:
            return self._rank_sphere(levels, self.w_max - 1)
        idx = self.n_below + self._rank_shell(levels, self.w_max)
        return idx if idx < self.size else None

    def levels_to_bits(self, levels) -> np.ndarray:
        return self._level_bits[np.asarray(levels, dtype=int)].reshape(-1)

    def bits_to_levels(self, bits) -> np.ndarray:
        bps = self.bits_per_symbol
        b = np.asarray(bits, dtype=np.int64).reshape(-1, bps)
        pattern = b @ (1 << np.arange(bps - 1, -1, -1))
        return self._pattern_to_level[pattern]


def build_codebook(n: int, k: int, order: int = 16) -> EssCodebook:
    """Build the minimal-energy codebook for ``n`` amplitude symbols, ``k`` bits."""
    bps, levels, energies, weights, unit = _alphabet(order)
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < k <= n * bps:
        raise ValueError(f"k={k} must be in (0, {n * bps}] for n={n} amplitude symbols "
                         f"of {bps} bit(s)")
    target = 1 << k
    cum_full = _full_cumulative(n, weights)
    w_max = next(w for w, c in enumerate(cum_full) if c >= target)
    n_below = cum_full[w_max - 1] if w_max > 0 else 0
    exact = _count_rows(n, weights, w_max)
    return EssCodebook(n=n, k=k, order=order, levels=tuple(int(a) for a in levels),
                       energies=energies, weights=weights, energy_unit=unit,
                       w_max=w_max, n_below=n_below, _exact=exact)


def _bits_to_index(bits, k):
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape != (k,):
        raise ValueError(f"expected {k} input bits, got shape {bits.shape}")
    pad = (-k) % 8
    packed = np.packbits(np.concatenate([np.zeros(pad, np.uint8), bits]))
    return int.from_bytes(packed.tobytes(), "big")


def _index_to_bits(idx, k):
    nbytes = (k + 7) // 8
    raw = np.frombuffer(idx.to_bytes(nbytes, "big"), dtype=np.uint8)
    return np.unpackbits(raw)[8 * nbytes - k:]


def shape(cb: EssCodebook, bits) -> np.ndarray:
    """Map ``k`` uniform bits to ``n * bits_per_symbol`` shaped amplitude bits."""
    return cb.levels_to_bits(cb.unrank(_bits_to_index(bits, cb.k)))


def deshape(cb: EssCodebook, amp_bits) -> np.ndarray | None:
    """Inverse of :func:`shape`; None when ``amp_bits`` is not a codeword."""
    amp_bits = np.asarray(amp_bits)
    if amp_bits.size != cb.n_bits:
        raise ValueError(f"expected {cb.n_bits} amplitude bits, got {amp_bits.size}")
    idx = cb.rank(cb.bits_to_levels(amp_bits).tolist())
    if idx is None:
        return None
    return _index_to_bits(idx, cb.k)


def amplitude_counts(cb: EssCodebook) -> list[int]:
    """Exact number of occurrences of each level over all ``2**k`` codewords.

    The sub-shell part (weight < ``w_max``) is symmetric in the positions; the
    partially used ``w_max`` shell is accumulated along the lexicographic
    prefix walk, counting whole subtrees in closed form.
    """
    n, ws, ex, cum = cb.n, cb.weights, cb._exact, cb._cum
    L = len(ws)
    counts = [0] * L
    if cb.w_max > 0 and n > 0:
        for lev, w in enumerate(ws):
            b = cb.w_max - 1 - w
            if b >= 0:
                counts[lev] += n * cum[n - 1][b]

    rem = cb.size - cb.n_below
    pref = [0] * L
    b = cb.w_max
    for i in range(n):
        r = n - 1 - i
        for lev, w in enumerate(ws):
            if w > b:
                break
            full = ex[r][b - w]
            if rem > full:
                for l2 in range(L):
                    counts[l2] += pref[l2] * full
                counts[lev] += full
                if r > 0:
                    for l2, w2 in enumerate(ws):
                        if b - w - w2 >= 0:
                            counts[l2] += r * ex[r - 1][b - w - w2]
                rem -= full
            else:
                pref[lev] += 1
                b -= w
                break
    for l2 in range(L):
        counts[l2] += pref[l2] * rem
    return counts


def amplitude_probabilities(cb: EssCodebook, exact: bool = False):
    """Probability of each amplitude level (``1, 3, 5, ...``) in the codebook.

    For QAM-16 this is ``[p_a(0), p_a(1)]``. With ``exact=True`` the values
    are :class:`fractions.Fraction`.
    """
    total = cb.size * cb.n
    fr = [Fraction(c, total) for c in amplitude_counts(cb)]
    if exact:
        return fr
    return np.array([float(f) for f in fr])


def pattern_probabilities(cb: EssCodebook) -> dict[str, float]:
    """Amplitude probabilities keyed by the Gray bit pattern of the level."""
    p = amplitude_probabilities(cb)
    bps = cb.bits_per_symbol
    return {format(gray(j), f"0{bps}b"): float(p[j]) for j in range(len(p))}


def probability_table(order: int, n_bits: int, k_values) -> list[tuple[int, np.ndarray]]:
    """``(k, level probabilities)`` rows for ``n_bits`` shaper output bits."""
    bps = amplitude_bits_per_symbol(order)
    if n_bits % bps:
        raise ValueError(f"{n_bits} bits is not a whole number of {bps}-bit amplitudes")
    return [(k, amplitude_probabilities(build_codebook(n_bits // bps, k, order)))
            for k in k_values]


def summary(cb: EssCodebook) -> str:
    p = amplitude_probabilities(cb)
    lines = [f"n={cb.n}", f"n_bits={cb.n_bits}", f"k={cb.k}", f"order={cb.order}",
             f"e_max={cb.e_max}"]
    for lev, pl in zip(cb.levels, p):
        lines.append(f"p_level_{lev}={pl:.6f}")
    for pat, pp in pattern_probabilities(cb).items():
        lines.append(f"p_pattern_{pat}={pp:.6f}")
    return "\n".join(lines) + "\n"
