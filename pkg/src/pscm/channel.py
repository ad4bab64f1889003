"""Symbol mapping, AWGN and prior-aware bitwise LLR demapping.

Noise variance ``sigma2`` is per complex symbol (``sigma2 / 2`` per real
dimension) and ``Eb/N0 = P / (2 R sigma2)``. LLRs are ``log P(b=0|y) /
P(b=1|y)``, the decoder's convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .constellation import ShapedConstellation, energy

LLR_CLIP = 40.0


def ebno_to_sigma2(ebno_db: float, rate: float, power: float = 1.0) -> float:
    if rate <= 0 or rate > 1:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    if power <= 0:
        raise ValueError("power must be positive")
    return power / (2.0 * rate * 10.0 ** (ebno_db / 10.0))


def sigma2_to_ebno(sigma2: float, rate: float, power: float = 1.0) -> float:
    return 10.0 * np.log10(power / (2.0 * rate * sigma2))


@dataclass(frozen=True)
class NoiseSpec:
    ebno_db: float
    rate: float
    power: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.ebno_db) and 0 < self.rate <= 1 and self.power > 0):
            raise ValueError(f"invalid noise spec {self}")

    @property
    def sigma2(self) -> float:
        return ebno_to_sigma2(self.ebno_db, self.rate, self.power)


def transmit_power(c: ShapedConstellation) -> float:
    """Analytic mean power ``sum p_i |mu x_i|^2`` of the modulator output."""
    return c.scale ** 2 * energy(c)


def label_indices(labels, c: ShapedConstellation) -> np.ndarray:
    """Bit rows (..., bits_per_symbol) -> integer labels (...)."""
    labels = np.asarray(labels)
    nb = c.bits_per_symbol
    if labels.shape[-1] != nb:
        raise ValueError(f"labels need {nb} bits, got {labels.shape[-1]}")
    if np.any((labels != 0) & (labels != 1)):
        raise ValueError("label bits must be 0 or 1")
    return labels.astype(np.int64) @ (1 << np.arange(nb - 1, -1, -1))


def modulate(labels, c: ShapedConstellation) -> np.ndarray:
    """Map label bit rows (..., bits_per_symbol) to ``scale * x``."""
    return modulate_indices(label_indices(labels, c), c)


def modulate_indices(idx, c: ShapedConstellation) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    if np.any(idx < 0) or np.any(idx >= c.order):
        raise ValueError("label outside the constellation")
    return c.scale * c.points[idx]


def awgn(symbols, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    x = np.asarray(symbols, dtype=complex)
    std = np.sqrt(sigma2 / 2.0)
    noise = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
    return x + std * noise


def _log_metrics(y, c, sigma2):
    y = np.asarray(y, dtype=complex)
    pts = c.scaled_points
    with np.errstate(divide="ignore"):
        logp = np.log(c.probabilities)
    d = np.abs(y[..., None] - pts) ** 2
    return logp - d / sigma2


def demap_llr(y, c: ShapedConstellation, sigma2: float, method: str = "exact",
              clip: float | None = LLR_CLIP) -> np.ndarray:
    """Bitwise LLRs (..., bits_per_symbol) for received samples ``y``.

    ``exact`` is the log-MAP rule with the constellation's priors; ``maxlog``
    replaces each log-sum-exp by its largest term. Bits with no prior mass on
    one side saturate at ``clip``.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    metric = _log_metrics(y, c, sigma2)
    nb = c.bits_per_symbol
    out = np.empty(metric.shape[:-1] + (nb,))
    lab = c.labels.astype(bool)
    for j in range(nb):
        m0 = metric[..., ~lab[:, j]]
        m1 = metric[..., lab[:, j]]
        if method == "exact":
            with np.errstate(invalid="ignore"):
                l0 = logsumexp(m0, axis=-1)
                l1 = logsumexp(m1, axis=-1)
        elif method == "maxlog":
            l0 = m0.max(axis=-1)
            l1 = m1.max(axis=-1)
        else:
            raise ValueError(f"unknown demapper method {method!r}")
        with np.errstate(invalid="ignore"):
            llr = l0 - l1
        llr = np.where(np.isneginf(l1) & np.isneginf(l0), 0.0, llr)
        out[..., j] = llr
    if clip is not None:
        np.clip(out, -clip, clip, out=out)
    return out
