"""Monte Carlo coded-BLER harness over AWGN for shaped and uniform QAM.

Trials run in fixed-size batches. Batch ``b`` of the point at Eb/N0 ``x``
draws all of its randomness from ``SeedSequence(seed, spawn_key=(key(x), b))``,
so the counts depend only on the configuration, never on how batches are
spread over worker processes. Batches are consumed in index order and the
stopping rule is evaluated after each one.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .channel import awgn, demap_llr, ebno_to_sigma2, modulate_indices
from .constellation import (build_qam, energy, point_probs_from_amplitude,
                            shape_constellation)
from .ess import amplitude_bits_per_symbol, amplitude_probabilities, build_codebook, deshape, shape
from .framing import ORDER_TO_C, Framer, split_for_rate
from .ldpc import build_code, decode, encode

CSV_HEADER = ["ebno_db", "trials", "block_errors", "bler", "bit_errors", "ber",
              "ci_lo", "ci_hi", "wall_time_s"]
WILSON_Z = 1.959963984540054
BLER_TARGET = 0.1


@dataclass
class ExperimentConfig:
    """One transmit/receive chain and its Eb/N0 grid.

    ``rate`` is the overall information rate (user bits per coded bit). For
    shaped runs the sign information per frame is chosen to reach it; for
    uniform runs it is the LDPC rate.
    """

    order: int = 16
    mode: str = "shaped"
    n_sh: int = 256
    k_sh: int = 160
    rate: str = "9/16"
    n_fec: int = 1536
    max_iters: int = 20
    ebno_db: list = field(default_factory=lambda: [6.0])
    min_block_errors: int = 100
    max_trials: int = 100_000
    flat_trials: bool = False
    batch_size: int = 50
    seed: int = 0
    code_seed: int = 0
    interleaver_seed: int | None = 1
    demapper: str = "exact"
    decoder: str = "sum-product"
    power: float | None = None
    workers: int = 1
    timing: bool = True
    name: str = ""

    def __post_init__(self):
        self.rate = str(Fraction(str(self.rate)))
        self.ebno_db = [float(x) for x in self.ebno_db]
        if self.mode not in ("shaped", "uniform"):
            raise ValueError(f"mode must be 'shaped' or 'uniform', got {self.mode!r}")
        if self.order not in ORDER_TO_C and not (self.mode == "uniform" and self.order == 4):
            raise ValueError(f"QAM order {self.order} not supported in {self.mode} mode")
        if self.mode == "shaped":
            bps = amplitude_bits_per_symbol(self.order)
            if self.n_sh % bps:
                raise ValueError(f"n_sh={self.n_sh} is not a multiple of {bps} amplitude bits")
            if not 0 < self.k_sh <= self.n_sh:
                raise ValueError(f"k_sh={self.k_sh} must be in (0, {self.n_sh}]")
        if not 0 < Fraction(self.rate) <= 1:
            raise ValueError(f"rate {self.rate} must be in (0, 1]")
        if self.demapper not in ("exact", "maxlog"):
            raise ValueError(f"unknown demapper {self.demapper!r}")
        if self.decoder not in ("sum-product", "min-sum"):
            raise ValueError(f"unknown decoder {self.decoder!r}")
        for name in ("max_iters", "min_block_errors", "max_trials", "batch_size", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BlerRecord:
    ebno_db: float
    trials: int
    block_errors: int
    bler: float
    bit_errors: int
    ber: float
    ci_lo: float
    ci_hi: float
    wall_time: float = 0.0

    def row(self) -> list[str]:
        return [repr(self.ebno_db), str(self.trials), str(self.block_errors), repr(self.bler),
                str(self.bit_errors), repr(self.ber), repr(self.ci_lo), repr(self.ci_hi),
                repr(self.wall_time)]


def wilson_interval(errors: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    p = errors / trials
    den = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return lo, hi


@lru_cache(maxsize=16)
def _cached_code(n, rate_str, seed):
    return build_code(n, Fraction(rate_str), seed=seed)


class Link:
    """The assembled chain for one configuration (read-only after init)."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        base = build_qam(cfg.order)
        power = cfg.power if cfg.power is not None else energy(base)
        self.power = power
        if cfg.mode == "shaped":
            c = ORDER_TO_C[cfg.order]
            self.layout = split_for_rate(cfg.n_sh, cfg.n_fec, c, cfg.k_sh, Fraction(cfg.rate))
            self.codebook = build_codebook(cfg.n_sh // c, cfg.k_sh, cfg.order)
            amp_p = amplitude_probabilities(self.codebook)
            self.constellation = shape_constellation(
                base, point_probs_from_amplitude(base, amp_p), power)
            self.code = _cached_code(cfg.n_fec, str(Fraction(self.layout.k_fec, cfg.n_fec)),
                                     cfg.code_seed)
            self.n_codewords = self.layout.n_fr_fec
            self.framer = Framer.for_layout(self.layout, cfg.interleaver_seed)
            self.n_frames = self.layout.n_fr_sh
            self.info_bits = self.layout.info_bits
        else:
            self.layout = None
            self.codebook = None
            self.constellation = shape_constellation(base, base.probabilities, power)
            r = Fraction(cfg.rate)
            if r == 1:
                raise ValueError("uniform mode needs a rate below 1")
            self.code = _cached_code(cfg.n_fec, str(r), cfg.code_seed)
            bps = base.bits_per_symbol
            if cfg.n_fec % bps:
                raise ValueError(f"n_fec={cfg.n_fec} is not a whole number of QAM symbols")
            self.n_codewords = 1
            self.framer = Framer.uniform(cfg.n_fec, cfg.order, cfg.interleaver_seed)
            self.info_bits = self.code.k
        self.coded_bits = self.n_codewords * cfg.n_fec
        self.rate = self.info_bits / self.coded_bits
        if abs(self.rate - float(Fraction(cfg.rate))) > 1e-9:
            raise ValueError(f"chain rate {self.rate} differs from requested {cfg.rate}")

    def describe(self) -> str:
        cfg = self.cfg
        lines = [f"mode={cfg.mode}", f"k_fec={self.code.k}",
                 f"codewords_per_block={self.n_codewords}", f"info_bits={self.info_bits}",
                 f"power={self.power!r}", f"scale={self.constellation.scale!r}"]
        if self.layout is None:
            lines[1:1] = [f"order={cfg.order}", f"n_fec={cfg.n_fec}",
                          f"r_fec={self.code.k / cfg.n_fec:.6f}", f"r={self.rate:.6f}"]
        text = "\n".join(lines) + "\n"
        if self.layout is not None:
            text += self.layout.describe()
            p = amplitude_probabilities(self.codebook)
            text += "".join(f"p_level_{a}={v:.6f}\n" for a, v in zip(self.codebook.levels, p))
        return text

    def sigma2(self, ebno_db: float) -> float:
        return ebno_to_sigma2(ebno_db, self.rate, self.power)

    # -- transmit / receive ---------------------------------------------------

    def _transmit_shaped(self, info):
        lay, cb = self.layout, self.codebook
        B = info.shape[0]
        ksh = lay.k_sh
        amp = np.empty((B, lay.n_a), dtype=np.uint8)
        for b in range(B):
            for f in range(self.n_frames):
                amp[b, f * lay.n_sh:(f + 1) * lay.n_sh] = shape(cb, info[b, f * ksh:(f + 1) * ksh])
        sign_info = info[:, self.n_frames * ksh:]
        k = self.code.k
        payload = np.concatenate([amp, sign_info], axis=1).reshape(B * self.n_codewords, k)
        cw = encode(self.code, payload)
        parity = cw[:, self.code.parity_positions].reshape(B, -1)
        return self.framer.assemble(amp, sign_info, parity)

    def _transmit_uniform(self, info):
        cw = encode(self.code, info)
        return self.framer.to_labels(cw)

    def _codeword_llrs(self, stream_llr):
        B = stream_llr.shape[0]
        k, n = self.code.k, self.code.n
        nc = self.n_codewords
        info = stream_llr[:, :nc * k].reshape(B * nc, k)
        par = stream_llr[:, nc * k:].reshape(B * nc, n - k)
        out = np.empty((B * nc, n))
        out[:, self.code.info_positions] = info
        out[:, self.code.parity_positions] = par
        return out

    def run_batch(self, n_blocks: int, sigma2: float, rng: np.random.Generator):
        """Simulate ``n_blocks`` blocks; returns (block errors, bit errors)."""
        cfg = self.cfg
        info = rng.integers(0, 2, size=(n_blocks, self.info_bits), dtype=np.uint8)
        if cfg.mode == "shaped":
            labels = self._transmit_shaped(info)
        else:
            labels = self._transmit_uniform(info)
        nb = labels.shape[-1]
        idx = labels.astype(np.int64) @ (1 << np.arange(nb - 1, -1, -1))
        y = awgn(modulate_indices(idx, self.constellation), sigma2, rng)
        llr = demap_llr(y, self.constellation, sigma2, method=cfg.demapper)
        if cfg.mode == "shaped":
            cw_llr = self._codeword_llrs(self.framer.to_stream(llr))
        else:
            cw_llr = self.framer.to_stream(llr)
        res = decode(self.code, cw_llr, max_iters=cfg.max_iters, method=cfg.decoder)
        hard_info = res.bits[:, self.code.info_positions]
        if cfg.mode == "uniform":
            errs = hard_info != info
            return int(errs.any(axis=1).sum()), int(errs.sum())
        return self._receive_shaped(hard_info.reshape(n_blocks, -1), info)

    def _receive_shaped(self, payload, info):
        lay, cb = self.layout, self.codebook
        ksh = lay.k_sh
        B = info.shape[0]
        amp_hat = payload[:, :lay.n_a]
        sign_hat = payload[:, lay.n_a:]
        out = np.zeros_like(info)
        invalid = np.zeros(B, dtype=bool)
        for b in range(B):
            for f in range(self.n_frames):
                u = deshape(cb, amp_hat[b, f * lay.n_sh:(f + 1) * lay.n_sh])
                if u is None:
                    invalid[b] = True
                else:
                    out[b, f * ksh:(f + 1) * ksh] = u
        out[:, self.n_frames * ksh:] = sign_hat
        errs = out != info
        block = errs.any(axis=1) | invalid
        return int(block.sum()), int(errs.sum())


def _point_key(ebno_db: float) -> int:
    return int(round((ebno_db + 1000.0) * 1e6))


def batch_rng(seed: int, ebno_db: float, batch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_point_key(ebno_db), batch)))


def _batch_sizes(cfg):
    full, rest = divmod(cfg.max_trials, cfg.batch_size)
    return [cfg.batch_size] * full + ([rest] if rest else [])


def _done(cfg, trials, errors):
    if trials >= cfg.max_trials:
        return True
    return not cfg.flat_trials and errors >= cfg.min_block_errors


_WORKER_LINK = None


def _worker_init(cfg_dict):
    global _WORKER_LINK
    _WORKER_LINK = Link(ExperimentConfig.from_dict(cfg_dict))


def _worker_batch(args):
    ebno_db, b, size = args
    link = _WORKER_LINK
    return link.run_batch(size, link.sigma2(ebno_db), batch_rng(link.cfg.seed, ebno_db, b))


def _make_record(ebno_db, trials, block, bits, info_bits, wall):
    lo, hi = wilson_interval(block, trials)
    return BlerRecord(ebno_db=float(ebno_db), trials=trials, block_errors=block,
                      bler=block / trials if trials else 0.0, bit_errors=bits,
                      ber=bits / (trials * info_bits) if trials else 0.0,
                      ci_lo=lo, ci_hi=hi, wall_time=wall)


def run_point(cfg: ExperimentConfig, ebno_db: float, link: Link | None = None,
              pool: ProcessPoolExecutor | None = None) -> BlerRecord:
    link = link or Link(cfg)
    sizes = _batch_sizes(cfg)
    t0 = time.perf_counter()
    trials = block = bits = 0
    if pool is None:
        sigma2 = link.sigma2(ebno_db)
        for b, size in enumerate(sizes):
            e, be = link.run_batch(size, sigma2, batch_rng(cfg.seed, ebno_db, b))
            trials, block, bits = trials + size, block + e, bits + be
            if _done(cfg, trials, block):
                break
    else:
        wave = max(1, cfg.workers)
        b = 0
        stop = False
        while b < len(sizes) and not stop:
            jobs = [(ebno_db, i, sizes[i]) for i in range(b, min(b + wave, len(sizes)))]
            for (_, i, size), (e, be) in zip(jobs, pool.map(_worker_batch, jobs)):
                trials, block, bits = trials + size, block + e, bits + be
                if _done(cfg, trials, block):
                    stop = True
                    break
            b += len(jobs)
    wall = time.perf_counter() - t0 if cfg.timing else 0.0
    return _make_record(ebno_db, trials, block, bits, link.info_bits, wall)


def ebno_at_bler(records, target: float = BLER_TARGET, column: str = "bler") -> float | None:
    """Eb/N0 where ``column`` crosses ``target``, log-linear between the first
    bracketing pair of grid points (linear if the lower point is zero)."""
    pts = sorted((r.ebno_db, getattr(r, column)) for r in records)
    for (x1, b1), (x2, b2) in zip(pts, pts[1:]):
        if b1 >= target >= b2 and b1 != b2:
            if b2 > 0:
                t = (math.log(target) - math.log(b1)) / (math.log(b2) - math.log(b1))
            else:
                t = (b1 - target) / (b1 - b2)
            return x1 + t * (x2 - x1)
    return None


@dataclass
class SweepResult:
    config: ExperimentConfig
    rate: float
    records: list
    crossing: float | None
    crossing_lo: float | None
    crossing_hi: float | None

    def summary(self) -> dict:
        return {"rate": self.rate, "ebno_at_bler_0.1": self.crossing,
                "ebno_at_bler_0.1_ci": [self.crossing_lo, self.crossing_hi]}


def summarize(cfg, rate, records) -> SweepResult:
    return SweepResult(config=cfg, rate=rate, records=list(records),
                       crossing=ebno_at_bler(records),
                       crossing_lo=ebno_at_bler(records, column="ci_lo"),
                       crossing_hi=ebno_at_bler(records, column="ci_hi"))


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    if not cfg.ebno_db:
        raise ValueError("empty Eb/N0 grid")
    link = Link(cfg)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers, initializer=_worker_init,
                                 initargs=(cfg.to_dict(),)) as pool:
            records = [run_point(cfg, x, link, pool) for x in cfg.ebno_db]
    else:
        records = [run_point(cfg, x, link) for x in cfg.ebno_db]
    return summarize(cfg, link.rate, records)


def shaping_gain(shaped: SweepResult, baseline: SweepResult) -> dict:
    """Eb/N0 advantage at 10 % BLER of ``shaped`` over ``baseline``."""
    if abs(shaped.rate - baseline.rate) > 1e-9:
        raise ValueError(f"rates differ ({shaped.rate} vs {baseline.rate}); not comparable")
    gain = None
    if shaped.crossing is not None and baseline.crossing is not None:
        gain = baseline.crossing - shaped.crossing
    separated = (shaped.crossing_hi is not None and baseline.crossing_lo is not None
                 and shaped.crossing_hi < baseline.crossing_lo)
    return {"gain_db": gain, "ci_separated": separated, "rate": shaped.rate}


def write_results(records, path, config: ExperimentConfig | None = None,
                  summary: dict | None = None) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in records:
                w.writerow(r.row())
        side = {"version": __version__,
                "config": config.to_dict() if config is not None else None,
                "seed": config.seed if config is not None else None,
                "summary": summary}
        with open(path.with_suffix(".json"), "w") as fh:
            json.dump(side, fh, indent=2, sort_keys=True)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def read_results(path) -> list[BlerRecord]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        out = []
        for row in rd:
            e, t, be, bl, bi, ber, lo, hi, wt = row
            out.append(BlerRecord(float(e), int(t), int(be), float(bl), int(bi), float(ber),
                                  float(lo), float(hi), float(wt)))
    return out
