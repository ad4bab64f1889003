"""Binary LDPC codes: PEG construction, alist I/O, systematic encoding and
flooding belief-propagation decoding on LLRs.

LLR convention: ``llr = log P(b=0) / P(b=1)``; positive favours bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

LLR_CLIP = 40.0
MIN_SUM_SCALE = 0.75


class AlistError(ValueError):
    pass


def gf2_rank(h) -> int:
    a = np.array(_dense(h), dtype=bool)
    rank = 0
    rows, cols = a.shape
    for col in range(cols):
        piv = np.nonzero(a[rank:, col])[0]
        if piv.size == 0:
            continue
        p = rank + piv[0]
        if p != rank:
            a[[rank, p]] = a[[p, rank]]
        hit = np.nonzero(a[:, col])[0]
        hit = hit[hit != rank]
        a[hit] ^= a[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _dense(h):
    return h.toarray() if sp.issparse(h) else np.asarray(h)


def _systematic(h):
    """Reduce ``h`` over GF(2). Returns (parity positions, info positions, P)
    with ``parity = P @ info (mod 2)``; None if ``h`` is rank deficient."""
    a = np.array(_dense(h), dtype=bool)
    m, n = a.shape
    pivots = []
    row = 0
    for col in range(n - 1, -1, -1):
        piv = np.nonzero(a[row:, col])[0]
        if piv.size == 0:
            continue
        p = row + piv[0]
        if p != row:
            a[[row, p]] = a[[p, row]]
        hit = np.nonzero(a[:, col])[0]
        hit = hit[hit != row]
        a[hit] ^= a[row]
        pivots.append(col)
        row += 1
        if row == m:
            break
    if row < m:
        return None
    parity_pos = np.array(pivots, dtype=np.int64)
    mask = np.ones(n, dtype=bool)
    mask[parity_pos] = False
    info_pos = np.nonzero(mask)[0]
    return parity_pos, info_pos, a[:, info_pos].astype(np.float32)


@dataclass(frozen=True, eq=False)
class ParityCheckCode:
    """Parity-check code with a derived systematic encoder.

    ``info_positions`` / ``parity_positions`` index codeword bits (columns of
    ``h``); ``p_matrix`` maps information bits to parity bits.
    """

    h: sp.csr_matrix
    info_positions: np.ndarray
    parity_positions: np.ndarray
    p_matrix: np.ndarray

    @classmethod
    def from_matrix(cls, h) -> "ParityCheckCode":
        h = sp.csr_matrix(np.asarray(_dense(h), dtype=np.uint8))
        sysf = _systematic(h)
        if sysf is None:
            raise ValueError("parity-check matrix is rank deficient")
        parity_pos, info_pos, pm = sysf
        return cls(h=h, info_positions=info_pos, parity_positions=parity_pos, p_matrix=pm)

    @property
    def n(self) -> int:
        return self.h.shape[1]

    @property
    def k(self) -> int:
        return self.n - self.h.shape[0]

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k, self.n)

    @cached_property
    def systematic_order(self) -> np.ndarray:
        """Codeword indices of ``info || parity``."""
        return np.concatenate([self.info_positions, self.parity_positions])

    def syndrome(self, bits) -> np.ndarray:
        bits = np.atleast_2d(np.asarray(bits, dtype=np.int64))
        return (self.h @ bits.T).T % 2

    def is_codeword(self, bits) -> np.ndarray:
        return ~self.syndrome(bits).any(axis=-1)

    @cached_property
    def _graph(self):
        return _TannerGraph(self.h)

    def girth(self, limit: int = 12) -> int:
        """Length of the shortest cycle (``limit + 2`` sentinel if none shorter)."""
        return self._graph.girth(limit)

    def has_four_cycles(self) -> bool:
        overlap = (self.h.T.astype(np.int64) @ self.h.astype(np.int64)).tolil()
        overlap.setdiag(0)
        return overlap.tocsr().max() > 1


def encode(code: ParityCheckCode, info_bits) -> np.ndarray:
    """Systematic encoding of (..., k) information bits to (..., n) codewords."""
    u = np.asarray(info_bits)
    if u.shape[-1] != code.k:
        raise ValueError(f"expected {code.k} information bits, got {u.shape[-1]}")
    flat = u.reshape(-1, code.k).astype(np.float32)
    parity = (flat @ code.p_matrix.T).astype(np.int64) & 1
    out = np.empty((flat.shape[0], code.n), dtype=np.uint8)
    out[:, code.info_positions] = flat
    out[:, code.parity_positions] = parity
    return out.reshape(*u.shape[:-1], code.n)


# -- construction -------------------------------------------------------------

def _peg(n, m, col_weight, rng):
    """Progressive edge growth with lowest-degree, random tie-breaking."""
    hb = np.zeros((m, n), dtype=bool)
    deg = np.zeros(m, dtype=np.int64)
    for j in range(n):
        for t in range(col_weight):
            if t == 0:
                cand = np.nonzero(deg == deg.min())[0]
            else:
                reached = hb[:, j].copy()
                frontier = reached.copy()
                while True:
                    vars_ = hb[frontier].any(axis=0)
                    new = hb[:, vars_].any(axis=1) & ~reached
                    if not new.any() or (reached | new).all():
                        cand_mask = ~reached
                        break
                    reached |= new
                    frontier = new
                cidx = np.nonzero(cand_mask)[0]
                dmin = deg[cidx].min()
                cand = cidx[deg[cidx] == dmin]
            c = cand[rng.integers(len(cand))] if len(cand) > 1 else cand[0]
            hb[c, j] = True
            deg[c] += 1
    return hb


def build_code(n: int, rate, seed=0, col_weight: int = 3, max_tries: int = 20) -> ParityCheckCode:
    """PEG-constructed column-weight-``col_weight`` code of exact ``rate``."""
    rate = Fraction(rate).limit_denominator(1 << 20)
    if not 0 < rate < 1:
        raise ValueError(f"rate must be in (0, 1), got {rate}")
    m_frac = n * (1 - rate)
    if m_frac.denominator != 1:
        raise ValueError(f"n*(1-rate) = {m_frac} is not an integer")
    m = int(m_frac)
    if m < col_weight:
        raise ValueError(f"{m} checks cannot support column weight {col_weight}")
    ss = np.random.SeedSequence(seed)
    for child in ss.spawn(max_tries):
        hb = _peg(n, m, col_weight, np.random.default_rng(child))
        if hb.sum(axis=1).min() == 0:
            continue
        try:
            return ParityCheckCode.from_matrix(hb)
        except ValueError:
            continue
    raise ValueError(f"no full-rank ({m} x {n}) code found in {max_tries} attempts")


# -- alist --------------------------------------------------------------------

def dump_alist(code_or_h) -> str:
    """MacKay alist text (``n m`` first, 1-based indices, zero padding)."""
    h = code_or_h.h if isinstance(code_or_h, ParityCheckCode) else sp.csr_matrix(code_or_h)
    h = sp.csr_matrix(h)
    m, n = h.shape
    hc = h.tocsc()
    cols = [np.sort(hc.indices[hc.indptr[j]:hc.indptr[j + 1]]) + 1 for j in range(n)]
    rows = [np.sort(h.indices[h.indptr[i]:h.indptr[i + 1]]) + 1 for i in range(m)]
    dv = max(len(c) for c in cols)
    dc = max(len(r) for r in rows)
    lines = [f"{n} {m}", f"{dv} {dc}",
             " ".join(str(len(c)) for c in cols),
             " ".join(str(len(r)) for r in rows)]
    lines += [" ".join(map(str, list(c) + [0] * (dv - len(c)))) for c in cols]
    lines += [" ".join(map(str, list(r) + [0] * (dc - len(r)))) for r in rows]
    return "\n".join(lines) + "\n"


def parse_alist(text: str) -> sp.csr_matrix:
    lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines()) if ln.strip()]

    def ints(entry, what):
        lineno, toks = entry
        try:
            return [int(t) for t in toks]
        except ValueError:
            raise AlistError(f"line {lineno}: non-integer token in {what}") from None

    def take(idx, what):
        if idx >= len(lines):
            raise AlistError(f"alist truncated: missing {what} (expected at non-empty line {idx + 1})")
        return ints(lines[idx], what)

    dims = take(0, "dimensions")
    if len(dims) != 2:
        raise AlistError(f"line {lines[0][0]}: dimensions need 2 values, got {len(dims)}")
    n, m = dims
    maxd = take(1, "max degrees")
    if len(maxd) != 2:
        raise AlistError(f"line {lines[1][0]}: max degrees need 2 values")
    dv_max, dc_max = maxd
    col_deg = take(2, "column degree list")
    row_deg = take(3, "row degree list")
    if len(col_deg) != n:
        raise AlistError(f"line {lines[2][0]}: expected {n} column degrees, got {len(col_deg)}")
    if len(row_deg) != m:
        raise AlistError(f"line {lines[3][0]}: expected {m} row degrees, got {len(row_deg)}")
    if sum(col_deg) != sum(row_deg):
        raise AlistError(f"degree sums differ: columns {sum(col_deg)} vs rows {sum(row_deg)}")
    if max(col_deg) > dv_max or max(row_deg) > dc_max:
        raise AlistError("a degree exceeds the declared maximum")

    entries = set()
    for j in range(n):
        idx = take(4 + j, f"column list {j + 1}")
        nz = [v for v in idx if v != 0]
        if len(nz) != col_deg[j]:
            raise AlistError(f"line {lines[4 + j][0]}: column {j + 1} lists {len(nz)} "
                             f"entries, degree is {col_deg[j]}")
        for v in nz:
            if not 1 <= v <= m:
                raise AlistError(f"line {lines[4 + j][0]}: row index {v} out of range 1..{m}")
            entries.add((v - 1, j))
    row_entries = set()
    for i in range(m):
        idx = take(4 + n + i, f"row list {i + 1}")
        nz = [v for v in idx if v != 0]
        if len(nz) != row_deg[i]:
            raise AlistError(f"line {lines[4 + n + i][0]}: row {i + 1} lists {len(nz)} "
                             f"entries, degree is {row_deg[i]}")
        for v in nz:
            if not 1 <= v <= n:
                raise AlistError(f"line {lines[4 + n + i][0]}: column index {v} out of range 1..{n}")
            row_entries.add((i, v - 1))
    if entries != row_entries:
        raise AlistError("column lists and row lists describe different matrices")
    r, c = zip(*sorted(entries)) if entries else ((), ())
    return sp.csr_matrix((np.ones(len(r), dtype=np.uint8), (r, c)), shape=(m, n))


def load_alist(text: str) -> ParityCheckCode:
    return ParityCheckCode.from_matrix(parse_alist(text))


# -- decoding -----------------------------------------------------------------

class DecodeResult(NamedTuple):
    bits: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    llrs: np.ndarray


class _TannerGraph:
    """Padded check-major edge layout shared by all decodes of a code."""

    def __init__(self, h):
        h = sp.csr_matrix(h)
        self.m, self.n = h.shape
        m, n = self.m, self.n
        row_deg = np.diff(h.indptr)
        self.dc = int(row_deg.max())
        self.check_vars = np.full((m, self.dc), n, dtype=np.int64)
        self.pad = np.ones((m, self.dc), dtype=bool)
        for i in range(m):
            cols = np.sort(h.indices[h.indptr[i]:h.indptr[i + 1]])
            self.check_vars[i, :len(cols)] = cols
            self.pad[i, :len(cols)] = False
        slot_var = self.check_vars.reshape(-1)
        real = np.nonzero(~self.pad.reshape(-1))[0]
        col_deg = np.bincount(slot_var[real], minlength=n)
        self.dv = int(col_deg.max())
        dummy = m * self.dc
        self.var_slots = np.full((n, self.dv), dummy, dtype=np.int64)
        fill = np.zeros(n, dtype=np.int64)
        for s in real:
            v = slot_var[s]
            self.var_slots[v, fill[v]] = s
            fill[v] += 1

    def girth(self, limit):
        # BFS from every variable node; slow, meant for small codes
        var_checks = [[] for _ in range(self.n)]
        check_vars = []
        for i in range(self.m):
            cv = self.check_vars[i][~self.pad[i]].tolist()
            check_vars.append(cv)
            for v in cv:
                var_checks[v].append(i)
        best = limit + 2
        for root in range(self.n):
            dist = {("v", root): 0}
            parent = {("v", root): None}
            frontier = [("v", root)]
            d = 0
            while frontier and 2 * d < best:
                nxt = []
                for node in frontier:
                    kind, idx = node
                    nbrs = var_checks[idx] if kind == "v" else check_vars[idx]
                    nk = "c" if kind == "v" else "v"
                    for j in nbrs:
                        other = (nk, j)
                        if other == parent[node]:
                            continue
                        if other in dist:
                            best = min(best, dist[node] + dist[other] + 1)
                        else:
                            dist[other] = dist[node] + 1
                            parent[other] = node
                            nxt.append(other)
                frontier = nxt
                d += 1
        return best


def _check_sum_product(q, pad):
    a = np.abs(q)
    zero = (a == 0) & ~pad
    e = np.exp(-np.where(zero, 1.0, a))
    logm = np.log1p(-e) - np.log1p(e)          # log tanh(|q|/2) <= 0
    logm[:, pad] = 0.0
    logm[zero] = 0.0
    neg = (q < 0) & ~pad
    s = logm.sum(axis=-1, keepdims=True) - logm
    s = np.minimum(s, -1e-17)
    par = (neg.sum(axis=-1, keepdims=True) + neg) & 1
    mag = np.log1p(np.exp(s)) - np.log(-np.expm1(s))   # 2 atanh(exp(s))
    np.minimum(mag, LLR_CLIP, out=mag)
    # a zero input on any other edge erases the message
    other_zero = zero.sum(axis=-1, keepdims=True) - zero > 0
    mag[other_zero] = 0.0
    return np.where(par == 1, -mag, mag)


def _check_min_sum(q, pad, scale=MIN_SUM_SCALE):
    a = np.abs(q)
    a[:, pad] = np.inf
    neg = (q < 0) & ~pad
    idx = np.argmin(a, axis=-1)
    min1 = np.take_along_axis(a, idx[..., None], axis=-1)
    a2 = a.copy()
    np.put_along_axis(a2, idx[..., None], np.inf, axis=-1)
    min2 = a2.min(axis=-1, keepdims=True)
    is_min = np.arange(a.shape[-1])[None, None, :] == idx[..., None]
    mag = scale * np.where(is_min, min2, min1)
    np.minimum(mag, LLR_CLIP, out=mag)
    par = (neg.sum(axis=-1, keepdims=True) + neg) & 1
    return np.where(par == 1, -mag, mag)


def decode(code: ParityCheckCode, llrs, max_iters: int = 20,
           method: str = "sum-product", early_exit: bool = True) -> DecodeResult:
    """Flooding BP decoding, by default stopping once all checks are satisfied.

    ``llrs`` is ``(n,)`` or ``(batch, n)``. A bit whose posterior LLR is
    exactly zero is undecided and keeps its block unconverged. Returns hard
    bits, a per-block convergence flag, iterations used (0 when the channel
    hard decisions already form a codeword) and the final posterior LLRs.
    With ``early_exit=False`` every block runs ``max_iters`` iterations.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    single = llrs.ndim == 1
    L = np.atleast_2d(llrs)
    if L.shape[-1] != code.n:
        raise ValueError(f"expected {code.n} LLRs, got {L.shape[-1]}")
    if not np.all(np.isfinite(L)):
        raise ValueError("LLRs must be finite")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if method == "sum-product":
        check = _check_sum_product
    elif method == "min-sum":
        check = _check_min_sum
    else:
        raise ValueError(f"unknown decoder method {method!r}")

    g = code._graph
    B = L.shape[0]
    L = np.clip(L, -LLR_CLIP, LLR_CLIP)
    post = L.copy()
    converged = np.zeros(B, dtype=bool)
    iters = np.zeros(B, dtype=np.int64)

    def satisfied(total):
        hard = np.concatenate([total < 0, np.zeros((total.shape[0], 1), bool)], axis=1)
        synd = hard[:, g.check_vars].sum(axis=-1) & 1
        return ~synd.any(axis=-1) & ~(total == 0).any(axis=-1)

    ok = satisfied(L)
    converged[ok] = True
    active = np.nonzero(~ok)[0] if early_exit else np.arange(B)
    La = L[active]
    zcol = np.zeros((len(active), 1))
    q = np.concatenate([La, zcol], axis=1)[:, g.check_vars]
    q[:, g.pad] = LLR_CLIP
    for it in range(1, max_iters + 1):
        if active.size == 0:
            break
        r = check(q, g.pad)
        r[:, g.pad] = 0.0
        r_ext = np.concatenate([r.reshape(len(active), -1), np.zeros((len(active), 1))], axis=1)
        total = La + r_ext[:, g.var_slots].sum(axis=-1)
        ok = satisfied(total)
        post[active] = total
        iters[active] = it
        converged[active] = ok
        if early_exit:
            keep = ~ok
            if not keep.any():
                break
            active, La, total, r = active[keep], La[keep], total[keep], r[keep]
        q = np.concatenate([total, np.zeros((len(active), 1))], axis=1)[:, g.check_vars] - r
        q[:, g.pad] = LLR_CLIP
    bits = (post < 0).astype(np.uint8)
    if single:
        return DecodeResult(bits[0], converged[0], iters[0], post[0])
    return DecodeResult(bits, converged, iters, post)
