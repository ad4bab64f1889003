"""Gray-labeled square QAM with sign/amplitude bit decomposition and shaping.

Label layout for an order ``m = 4**q`` constellation (``q`` bits per real
dimension), MSB first::

    [sign_I, sign_Q, amp_I (q-1 bits), amp_Q (q-1 bits)]

Sign bit 0 means a positive coordinate. The amplitude bits of a dimension are
the reflected Gray code of the amplitude level index ``j`` where
``|x| = 2*j + 1``, so per dimension the full (sign, amplitude) label is a
reflected Gray code along the PAM axis.

Coordinates are kept on the nominal odd-integer grid; the power scale lives
in :attr:`ShapedConstellation.scale` and is only applied by the modulator.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

SUPPORTED_ORDERS = (4, 16, 64, 256)
PROB_ATOL = 1e-12


def gray(j):
    return j ^ (j >> 1)


def gray_inverse(g):
    j = 0
    while g:
        j ^= g
        g >>= 1
    return j


def int_to_bits(value, width):
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def bits_to_int(bits):
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ShapedConstellation:
    """Square QAM constellation with a point distribution and power scale.

    ``points[i]`` is the nominal coordinate of the point whose label, read as
    an MSB-first integer, equals ``i``. ``labels[i]`` holds the same label as
    a bit row.
    """

    order: int
    points: np.ndarray
    labels: np.ndarray
    sign_bit_positions: tuple[int, ...]
    amplitude_bit_positions: tuple[int, ...]
    probabilities: np.ndarray
    scale: float = 1.0

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]

    @property
    def bits_per_dimension(self) -> int:
        return self.bits_per_symbol // 2

    @property
    def amplitude_levels(self) -> np.ndarray:
        """Per-dimension amplitudes ``1, 3, ..., sqrt(m) - 1``."""
        return np.arange(1, 2 ** self.bits_per_dimension, 2)

    @property
    def amplitude_index(self) -> np.ndarray:
        """(m, 2) array of per-dimension amplitude level indices (I, Q)."""
        levels = np.stack([np.abs(self.points.real), np.abs(self.points.imag)], axis=1)
        return ((levels - 1) // 2).astype(int)

    @property
    def scaled_points(self) -> np.ndarray:
        return self.scale * self.points

    def with_probabilities(self, probabilities, scale=None) -> "ShapedConstellation":
        p = np.asarray(probabilities, dtype=float)
        _check_distribution(p, self.order)
        return replace(self, probabilities=_frozen(p),
                       scale=self.scale if scale is None else float(scale))


def _check_distribution(p, m):
    if p.shape != (m,):
        raise ValueError(f"expected {m} probabilities, got shape {p.shape}")
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must lie in [0, 1]")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")


def build_qam(order: int) -> ShapedConstellation:
    """Uniform Gray-labeled QAM of the given order on the odd-integer grid."""
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}")
    nbits = int(np.log2(order))
    q = nbits // 2
    na = q - 1

    points = np.empty(order, dtype=complex)
    labels = np.empty((order, nbits), dtype=np.uint8)
    for idx in range(order):
        bits = int_to_bits(idx, nbits)
        s_i, s_q = bits[0], bits[1]
        a_i = gray_inverse(bits_to_int(bits[2:2 + na]))
        a_q = gray_inverse(bits_to_int(bits[2 + na:]))
        re = (2 * a_i + 1) * (-1 if s_i else 1)
        im = (2 * a_q + 1) * (-1 if s_q else 1)
        points[idx] = complex(re, im)
        labels[idx] = bits

    return ShapedConstellation(
        order=order,
        points=_frozen(points),
        labels=_frozen(labels),
        sign_bit_positions=(0, 1),
        amplitude_bit_positions=tuple(range(2, nbits)),
        probabilities=_frozen(np.full(order, 1.0 / order)),
        scale=1.0,
    )


def energy(c: ShapedConstellation, probabilities=None) -> float:
    """Mean energy ``sum_i p_i |x_i|^2`` on nominal coordinates."""
    p = c.probabilities if probabilities is None else np.asarray(probabilities, dtype=float)
    return float(np.dot(p, np.abs(c.points) ** 2))


def entropy(c: ShapedConstellation, probabilities=None) -> float:
    """Shannon entropy of the point distribution, in bits."""
    p = c.probabilities if probabilities is None else np.asarray(probabilities, dtype=float)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def maxwell_boltzmann(c: ShapedConstellation, lam: float) -> np.ndarray:
    """Maxwell-Boltzmann point distribution ``exp(-lam |x|^2)``, normalized."""
    if lam < 0:
        raise ValueError("lam must be non-negative")
    e = np.abs(c.points) ** 2
    w = np.exp(-lam * (e - e.min()))
    return w / w.sum()


def solve_mb_for_entropy(c: ShapedConstellation, target_entropy: float,
                         tol: float = 1e-9, max_iter: int = 200) -> float:
    """Find the MB parameter whose distribution has the requested entropy.

    Entropy is strictly decreasing in ``lam``; bisection after a geometric
    expansion of the upper bracket.
    """
    hmax = np.log2(c.order)
    if not 0 < target_entropy <= hmax:
        raise ValueError(f"target entropy must be in (0, {hmax}], got {target_entropy}")
    if target_entropy >= hmax - tol:
        return 0.0
    e = np.abs(c.points) ** 2
    floor = np.log2(np.count_nonzero(np.isclose(e, e.min())))
    if target_entropy <= floor:
        raise ValueError(f"target entropy {target_entropy} is at or below {floor:g} bits, "
                         "the large-lam limit (uniform over the least-energy points)")

    def h(lam):
        return entropy(c, maxwell_boltzmann(c, lam))

    lo, hi = 0.0, 1.0
    while h(hi) > target_entropy:
        lo, hi = hi, hi * 2.0
        if hi > 1e12:
            raise ValueError("could not bracket the target entropy")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        hm = h(mid)
        if abs(hm - target_entropy) <= tol:
            return mid
        if hm > target_entropy:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scaling_factor(uniform: ShapedConstellation, shaped_probs) -> float:
    """Power-preserving scale ``sqrt(E_uniform / E_shaped)``."""
    p = np.asarray(shaped_probs, dtype=float)
    _check_distribution(p, uniform.order)
    e_shaped = energy(uniform, p)
    if e_shaped <= 0:
        raise ValueError("shaped distribution has zero energy")
    return float(np.sqrt(energy(uniform, np.full(uniform.order, 1.0 / uniform.order)) / e_shaped))


def point_probs_from_amplitude(c: ShapedConstellation, amp_probs) -> np.ndarray:
    """Point distribution from a per-dimension amplitude distribution.

    ``amp_probs`` lists the probability of each amplitude level ``1, 3, 5, ...``
    (for QAM-16 this is ``[p_a(0), p_a(1)]``). A dict keyed by the amplitude
    bit pattern of one dimension (``{"0": .., "1": ..}`` or
    ``{"00": .., "01": .., "11": .., "10": ..}``) is also accepted and decoded
    with the same Gray map as the labels.

    Each point gets ``(1/2)**2 * P(level_I) * P(level_Q)``: sign bits are
    uniform and the two dimensions are shaped independently. For QAM-16 this
    is ``p_a(0)**k * p_a(1)**(2-k) / 4`` with ``k`` zero amplitude bits.
    """
    na = c.bits_per_dimension - 1
    if na == 0:
        raise ValueError("QAM-4 has no amplitude bits to shape")
    nlev = 2 ** na
    if isinstance(amp_probs, dict):
        pa = np.zeros(nlev)
        for pattern, p in amp_probs.items():
            if len(pattern) != na:
                raise ValueError(f"pattern {pattern!r} should have {na} bits")
            pa[gray_inverse(int(pattern, 2))] = p
    else:
        pa = np.asarray(amp_probs, dtype=float)
    if pa.shape != (nlev,):
        raise ValueError(f"expected {nlev} amplitude probabilities, got {pa.shape}")
    if np.any(pa < 0) or abs(pa.sum() - 1.0) > 1e-9:
        raise ValueError("amplitude probabilities must be a distribution")
    pa = pa / pa.sum()
    ai = c.amplitude_index
    return 0.25 * pa[ai[:, 0]] * pa[ai[:, 1]]


def shape_constellation(c: ShapedConstellation, probabilities, power=None) -> ShapedConstellation:
    """Attach a point distribution and the scale giving mean power ``power``.

    ``power`` defaults to the uniform nominal energy (10 for QAM-16), which
    makes the scale equal to :func:`scaling_factor`.
    """
    p = np.asarray(probabilities, dtype=float)
    _check_distribution(p, c.order)
    if power is None:
        power = energy(c, np.full(c.order, 1.0 / c.order))
    e = energy(c, p)
    if e <= 0:
        raise ValueError("shaped distribution has zero energy")
    return c.with_probabilities(p, scale=float(np.sqrt(power / e)))


# plain-text table: "# order=16 scale=1.0 labeling=gray-per-dimension ..." then
# one "label real imag probability" row per point
def dump_table(c: ShapedConstellation) -> str:
    out = io.StringIO()
    out.write(f"# order={c.order} scale={float(c.scale)!r} labeling=gray-per-dimension "
              f"layout=sI,sQ,aI,aQ sign=0:positive\n")
    out.write("# label real imag probability\n")
    for lab, x, p in zip(c.labels, c.points, c.probabilities):
        out.write(f"{''.join(map(str, lab))} {x.real:g} {x.imag:g} {float(p)!r}\n")
    return out.getvalue()


def load_table(text: str) -> ShapedConstellation:
    header = {}
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    header[k] = v
            continue
        lab, re, im, p = line.split()
        rows.append((lab, float(re), float(im), float(p)))
    if "order" not in header:
        raise ValueError("constellation table is missing the order header")
    base = build_qam(int(header["order"]))
    if len(rows) != base.order:
        raise ValueError(f"expected {base.order} rows, found {len(rows)}")
    probs = np.zeros(base.order)
    for lab, re, im, p in rows:
        idx = int(lab, 2)
        if base.points[idx] != complex(re, im):
            raise ValueError(f"label {lab} does not match coordinate {re}{im:+}j")
        probs[idx] = p
    return base.with_probabilities(probs, scale=float(header.get("scale", 1.0)))
