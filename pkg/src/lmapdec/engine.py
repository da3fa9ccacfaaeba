"""The register decoding engine.

A register bank is a float array indexed by memory-label bitmask (bit i-1
selects memory i); entry 0 is the implicit empty label and always holds 1.
After every synchronized step the bank equals the Walsh-Hadamard image of
the corresponding normalized BCJR state distribution, which is the single
invariant that certifies every structural choice made during synthesis.

Register values live in [-1, 1] and encode bit certainties as distances
from +/-1, so plain doubles resolve posterior log-ratios only to about
-log(eps) ~ 36.  The default "extended" mode therefore carries every bank
as a double-double (value + tail) pair, which keeps the engine faithful to
the positive-domain reference decoder well past the LLR saturation point.
The plain mode drops the tails for bulk Monte Carlo work; it produces the
same hard decisions.

Steps are vectorized over the label axis and accept any number of leading
batch axes, so many frames can be decoded in one pass.  A scalar
instrumented path mirrors the plain one and counts arithmetic and register
accesses for complexity studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bcjr import LLR_CLAMP
from .codes import NSC, RSC
from .synth import DecoderSpec, reverse_label

# Inputs are clamped away from +/-1 (two of the three factors inside every
# normalization product), which keeps lam/rho strictly positive while the
# bank itself may legitimately reach +/-1 exactly (degenerate boundaries).
INPUT_CLAMP = 1.0 - 1e-12
FORWARD_ONLY = "forward"
BIDIRECTIONAL = "bidirectional"


class EngineError(RuntimeError):
    pass


def combine(a, b):
    """Optimal SSE combining (a+b)/(1+ab): the SSE image of LLR addition."""
    out = (np.asarray(a, dtype=np.float64) + b) / (1.0 + np.asarray(a) * b)
    return np.clip(out, -1.0, 1.0)


def sse_to_llr(x):
    x = np.asarray(x, dtype=np.float64)
    tiny = np.finfo(float).tiny
    llr = np.log(np.maximum(1.0 + x, tiny)) - np.log(np.maximum(1.0 - x, tiny))
    return np.clip(llr, -LLR_CLAMP, LLR_CLAMP)


# ---------------------------------------------------------------------------
# Double-double helpers (Dekker/Knuth error-free transforms, vectorized).

_SPLIT = 134217729.0  # 2^27 + 1


def _two_sum(a, b):
    s = a + b
    t = s - a
    e = (a - (s - t)) + (b - t)
    return s, e


def _two_prod(a, b):
    p = a * b
    aa = a * _SPLIT
    ah = aa - (aa - a)
    al = a - ah
    bb = b * _SPLIT
    bh = bb - (bb - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _dd_mul_plain(ah, al, s):
    p, e = _two_prod(ah, s)
    return p, e + al * s


def _dd_mul_dd(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    return p, e + ah * bl + al * bh


def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    return s, e + al + bl


def _dd_div(ah, al, bh, bl):
    q0 = ah / bh
    p, e = _two_prod(q0, bh)
    r = (((ah - p) - e) + al - q0 * bl) / bh
    return _two_sum(q0, r)


def _dd_reduce(hi, lo):
    """Pairwise double-double reduction over the last axis -> (hi, lo)."""
    while hi.shape[-1] > 1:
        if hi.shape[-1] % 2:
            pad = [(0, 0)] * (hi.ndim - 1) + [(0, 1)]
            hi = np.pad(hi, pad)
            lo = np.pad(lo, pad)
        s, e = _two_sum(hi[..., 0::2], hi[..., 1::2])
        lo = lo[..., 0::2] + lo[..., 1::2] + e
        hi = s
    return hi[..., 0], lo[..., 0]


def _dd_log(hi, lo):
    """log of a double-double value, falling back to tiny for nonpositives."""
    tiny = np.finfo(float).tiny
    bad = hi <= 0.0
    safe_hi = np.where(bad, 1.0, hi)
    out = np.log(safe_hi) + np.log1p(np.clip(lo / safe_hi, -0.999, None))
    collapsed = np.log(np.maximum(hi + lo, tiny))
    return np.where(bad, collapsed, out)


def _dd_clip_unit(h, l):
    """Clip a double-double to [-1, 1] without losing interior tails."""
    over = ((h - 1.0) + l) > 0.0
    under = ((h + 1.0) + l) < 0.0
    h = np.where(over, 1.0, np.where(under, -1.0, h))
    l = np.where(over | under, 0.0, l)
    return h, l


# ---------------------------------------------------------------------------
# Per-direction machine tables.

@dataclass(frozen=True)
class _Machine:
    """Precomputed gather indices and tap bits for one direction.

    Destination label ell updates as

        new[ell] = bank[src1[ell]] * x1 * x2^e1[ell]    (chain file)
                 + bank[src2[ell]] * x2^e2[ell]         (ring file)

    followed by division by the would-be empty-label component
    lam = 1 + x1*x2*bank[out_label]; row 0 is wired to compute lam itself.
    """

    src1: np.ndarray
    e1: np.ndarray
    src2: np.ndarray
    e2: np.ndarray
    out_label: int


def _build_machine(m, df1_labels, df2_labels, sur_label, sur_tap,
                   df1_poly, df2_poly, out_label, relabel) -> _Machine:
    n = 1 << m
    src1 = np.zeros(n, dtype=np.intp)
    e1 = np.zeros(n, dtype=bool)
    src2 = np.zeros(n, dtype=np.intp)
    e2 = np.zeros(n, dtype=bool)

    chain = [relabel(v) for v in df1_labels]
    ring = [relabel(v) for v in df2_labels]
    sur = relabel(sur_label)
    out = relabel(out_label)

    # Chain file: head fed from the empty label with both inputs, then
    # register i+1 from register i; the SUR self-updates.  Tap bits of df1
    # run in descending coefficient order along the chain, mirroring the
    # ring file (the second input multiplies the update into a label exactly
    # when that label excludes memory 1).
    src1[chain[0]] = 0
    e1[chain[0]] = True
    for i in range(1, len(chain)):
        src1[chain[i]] = chain[i - 1]
        e1[chain[i]] = bool(df1_poly.coeff(n - 2 - i))
    src1[sur] = sur
    e1[sur] = bool(sur_tap)

    # Ring file: register j+1 from register j with tap bit N-1-j of df2;
    # the wrap edge from the last register to the first carries no tap.
    for j in range(1, len(ring)):
        src2[ring[j]] = ring[j - 1]
        e2[ring[j]] = bool(df2_poly.coeff(n - 1 - j))
    src2[ring[0]] = ring[-1]
    e2[ring[0]] = False

    # Row 0 computes lam = 1 + x1*x2*bank[out].
    src1[0] = out
    e1[0] = True
    src2[0] = 0
    e2[0] = False

    for arr in (src1, e1, src2, e2):
        arr.setflags(write=False)
    return _Machine(src1=src1, e1=e1, src2=src2, e2=e2, out_label=out)


def _step(mach: _Machine, bank, x1, x2):
    """One synchronized register update; returns (new bank, lam)."""
    x1 = np.asarray(x1, dtype=np.float64)[..., None]
    x2 = np.asarray(x2, dtype=np.float64)[..., None]
    both = x1 * x2
    f1 = np.where(mach.e1, both, x1)
    f2 = np.where(mach.e2, x2, 1.0)
    raw = np.take(bank, mach.src1, axis=-1) * f1 + np.take(bank, mach.src2, axis=-1) * f2
    lam = raw[..., 0].copy()
    if np.any(lam <= 0.0):
        raise EngineError("normalization factor <= 0; inputs exceed the SSE domain")
    raw /= lam[..., None]
    np.clip(raw, -1.0, 1.0, out=raw)
    raw[..., 0] = 1.0
    return raw, lam


def _step_dd(mach: _Machine, bh, bl, x1, x2):
    """Extended-precision register update; returns (hi, lo, lam)."""
    x1 = np.asarray(x1, dtype=np.float64)[..., None]
    x2 = np.asarray(x2, dtype=np.float64)[..., None]
    # x1*x2 must stay exact (two floats); rounding it would inject eps-level
    # noise into bank tails that encode information at exp(-LLR) scale.
    bothh, bothl = _two_prod(x1, x2)
    f1h = np.where(mach.e1, bothh, x1)
    f1l = np.where(mach.e1, bothl, 0.0)
    f2 = np.where(mach.e2, x2, 1.0)
    r1h, r1l = _dd_mul_dd(np.take(bh, mach.src1, axis=-1),
                          np.take(bl, mach.src1, axis=-1), f1h, f1l)
    r2h, r2l = _dd_mul_plain(np.take(bh, mach.src2, axis=-1),
                             np.take(bl, mach.src2, axis=-1), f2)
    rh, rl = _dd_add(r1h, r1l, r2h, r2l)
    lam_h = rh[..., 0].copy()
    lam_l = rl[..., 0].copy()
    if np.any(lam_h <= 0.0):
        raise EngineError("normalization factor <= 0; inputs exceed the SSE domain")
    nh, nl = _dd_div(rh, rl, lam_h[..., None], lam_l[..., None])
    nh, nl = _dd_clip_unit(nh, nl)
    nh[..., 0] = 1.0
    nl[..., 0] = 0.0
    return nh, nl, lam_h + lam_l


@dataclass
class StepTrace:
    """Per-step record of an instrumented (scalar) decode."""

    direction: str
    k: int
    norm: float  # lam for forward steps, rho for backward steps
    raw1: list = field(default_factory=list)
    raw2: list = field(default_factory=list)
    mul: int = 0
    add: int = 0
    reg: int = 0


def op_counters(traces) -> dict:
    """Aggregate instrumented counts into totals and per-trellis-step means.

    A trellis step of a bidirectional decode spans one forward update, one
    backward update, and one output evaluation; the output counts are
    carried by the backward traces.
    """
    total = {"mul": 0, "add": 0, "reg": 0}
    steps = 0
    for t in traces:
        total["mul"] += t.mul
        total["add"] += t.add
        total["reg"] += t.reg
        if t.direction == "forward":
            steps += 1
    steps = max(1, steps)
    per_step = {k: v / steps for k, v in total.items()}
    return {"total": total, "per_step": per_step, "steps": steps}


def trace_lines(traces) -> str:
    out = []
    for t in traces:
        out.append(f"{t.direction} k={t.k} norm={t.norm:.17g} "
                   f"mul={t.mul} add={t.add} reg={t.reg}")
    return "\n".join(out) + "\n"


class LmapDecoder:
    """Decoder instance built from a synthesized :class:`DecoderSpec`.

    Backward-structure labels are translated into forward coordinates once,
    here, so both banks are keyed identically and the output stage can pair
    forward and backward registers directly.

    ``extended`` selects double-double register banks (the default):
    required when comparing soft outputs against a probability-domain
    reference, optional for error-rate Monte Carlo where only signs matter.
    """

    def __init__(self, spec: DecoderSpec, extended: bool = True):
        self.spec = spec
        self.extended = bool(extended)
        m = spec.m
        n = spec.n_states
        self.m = m
        self.n_states = n
        self.fwd = _build_machine(m, spec.df1_labels, spec.df2_labels,
                                  spec.sur_label, spec.sur_tap,
                                  spec.df1_poly, spec.df2_poly,
                                  spec.out_label, lambda v: v)
        self.bwd = _build_machine(m, spec.b_df1_labels, spec.b_df2_labels,
                                  spec.b_sur_label, spec.b_sur_tap,
                                  spec.b_df1_poly, spec.b_df2_poly,
                                  spec.b_out_label,
                                  lambda v: reverse_label(v, m))

        # Output-stage gather tables (forward coordinates).
        chain = list(spec.df1_labels)
        ring = list(spec.df2_labels)
        self._mu_f = np.array([0] + chain + [spec.sur_label], dtype=np.intp)
        self._mu_b = np.array(chain + [0] + [spec.sur_label], dtype=np.intp)
        self._mu_w = np.array([bool(spec.df1_poly.coeff(n - 2 - i))
                               for i in range(n - 1)] + [bool(spec.sur_tap)])
        self._de_f = np.array(ring[:-1] + [ring[-1]], dtype=np.intp)
        self._de_b = np.array(ring[1:] + [ring[0]], dtype=np.intp)
        self._de_w = np.array([bool(spec.df2_poly.coeff(n - 1 - j))
                               for j in range(1, n - 1)] + [False])
        self._nsc_perm = np.arange(n) ^ 1  # pairs each label with label+{memory 1}

    # -- bank construction ----------------------------------------------------

    def fresh_bank(self, batch_shape=(), value: float = 1.0) -> np.ndarray:
        """New plain bank: value 1 encodes a zero-state point mass, 0 uniform."""
        bank = np.full(batch_shape + (self.n_states,), float(value))
        bank[..., 0] = 1.0
        return bank

    # -- primitive steps (plain precision; used by tests and validation) -------

    def forward_step(self, bank, x1, x2):
        return _step(self.fwd, bank, x1, x2)

    def backward_step(self, bank, x1, x2):
        return _step(self.bwd, bank, x1, x2)

    def forward_output(self, bank, x1, x2):
        """Forward-only SSE of the information bit from the pre-step bank."""
        return combine(x1, np.asarray(x2) * bank[..., self.spec.out_label])

    def output_terms(self, fbank, bbank, x2):
        """Plain-precision (mu, delta) output terms; for inspection and tests."""
        x2 = np.asarray(x2, dtype=np.float64)[..., None]
        mu_t = np.take(fbank, self._mu_f, axis=-1) * np.take(bbank, self._mu_b, axis=-1)
        mu = (mu_t * np.where(self._mu_w, x2, 1.0)).sum(axis=-1)
        de_t = np.take(fbank, self._de_f, axis=-1) * np.take(bbank, self._de_b, axis=-1)
        delta = 1.0 + (de_t * np.where(self._de_w, x2, 1.0)).sum(axis=-1)
        return mu, delta

    # -- output stages ----------------------------------------------------------

    def _dd_terms(self, fh, fl, bnh, bnl, x2col, f_idx, b_idx, w):
        fgh = np.take(fh, f_idx, axis=-1)
        fgl = np.take(fl, f_idx, axis=-1)
        bgh = np.take(bnh, b_idx, axis=-1)
        bgl = np.take(bnl, b_idx, axis=-1)
        p, e = _two_prod(fgh, bgh)
        e = e + fgh * bgl + fgl * bgh
        pw, ew = _two_prod(p, x2col)
        hi = np.where(w, pw, p)
        lo = np.where(w, ew + e * x2col, e)
        return hi, lo

    def _bidi_llr_dd(self, fh, fl, bnh, bnl, x1, x2):
        """Systematic-code LLR; delta+mu and delta-mu accumulated directly.

        The two sums cancel to ~exp(-|LLR|), far below the resolution of
        their individual terms, so each is formed term-by-term in
        double-double instead of from separately rounded mu and delta.
        """
        x1 = np.asarray(x1, dtype=np.float64)
        x2c = np.asarray(x2, dtype=np.float64)[..., None]
        mh, ml = self._dd_terms(fh, fl, bnh, bnl, x2c, self._mu_f, self._mu_b, self._mu_w)
        dh, dl = self._dd_terms(fh, fl, bnh, bnl, x2c, self._de_f, self._de_b, self._de_w)
        one = np.ones(dh.shape[:-1] + (1,))
        zero = np.zeros_like(one)
        dph, dpl = _dd_reduce(np.concatenate([one, dh, mh], axis=-1),
                              np.concatenate([zero, dl, ml], axis=-1))
        dmh, dml = _dd_reduce(np.concatenate([one, dh, -mh], axis=-1),
                              np.concatenate([zero, dl, -ml], axis=-1))
        if np.any(dph + dpl < -1e-9) or np.any(dmh + dml < -1e-9):
            raise EngineError("output terms left the probability domain")
        llr = np.log1p(x1) - np.log1p(-x1) + _dd_log(dph, dpl) - _dd_log(dmh, dml)
        return np.clip(llr, -LLR_CLAMP, LLR_CLAMP)

    def bidirectional_llr(self, fbank, bbank, x1, x2):
        """Information-bit LLR from time-aligned banks and the step's symbols.

        ``fbank`` holds estimates from symbols before this step, ``bbank``
        estimates from symbols after it.  Only valid for codes whose first
        stream is systematic.
        """
        zf = np.zeros_like(fbank)
        zb = np.zeros_like(bbank)
        return self._bidi_llr_dd(fbank, zf, bbank, zb, x1, x2)

    def _nsc_llr_dd(self, fh, fl, bnh, bnl):
        """NSC information-bit LLR: the bit is the newest memory of the next state.

        Pointwise products of state distributions become label-domain
        correlations: the posterior estimate of memory 1 at time k+1 is
        sum_K F[K]*B[K ^ {1}] over sum_K F[K]*B[K], and den +/- num are
        (positive) half-state sums accumulated directly in double-double.
        """
        bph = np.take(bnh, self._nsc_perm, axis=-1)
        bpl = np.take(bnl, self._nsc_perm, axis=-1)
        sh, se = _two_sum(bnh, bph)
        sl = se + bnl + bpl
        mh, me = _two_sum(bnh, -bph)
        ml = me + bnl - bpl
        ph, pe = _two_prod(fh, sh)
        dph, dpl = _dd_reduce(ph, pe + fh * sl + fl * sh)
        qh, qe = _two_prod(fh, mh)
        dmh, dml = _dd_reduce(qh, qe + fh * ml + fl * mh)
        llr = _dd_log(dph, dpl) - _dd_log(dmh, dml)
        return np.clip(llr, -LLR_CLAMP, LLR_CLAMP)

    def _fwd_llr_dd(self, bh, bl, x1, x2):
        # LLR of x1 (c) (x2 * bank[out]) without forming the combined SSE:
        # log((1+x1)(1+x2*F)) - log((1-x1)(1-x2*F)) keeps the tails.
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        fh, fl = _dd_mul_plain(bh[..., self.spec.out_label],
                               bl[..., self.spec.out_label], x2)
        ph, pl = _dd_add(np.ones_like(fh), np.zeros_like(fh), fh, fl)
        qh, ql = _dd_add(np.ones_like(fh), np.zeros_like(fh), -fh, -fl)
        llr = (np.log1p(x1) - np.log1p(-x1)
               + _dd_log(ph, pl) - _dd_log(qh, ql))
        return np.clip(llr, -LLR_CLAMP, LLR_CLAMP)

    # -- frame decoding ----------------------------------------------------------

    def _ports(self, frame):
        frame = np.asarray(frame, dtype=np.float64)
        if frame.shape[-1] != 2:
            raise EngineError("frame must have shape (..., L, 2)")
        frame = np.clip(frame, -INPUT_CLAMP, INPUT_CLAMP)
        x1 = frame[..., 0]
        x2 = frame[..., 1]
        if self.spec.swap_inputs:
            x1, x2 = x2, x1
        return x1, x2

    def _bank_pair(self, bshape, value):
        hi = self.fresh_bank(bshape, value)
        lo = np.zeros_like(hi)
        if not self.extended:
            return hi, None
        return hi, lo

    def _advance(self, mach, pair, x1, x2):
        hi, lo = pair
        if self.extended:
            nh, nl, lam = _step_dd(mach, hi, lo, x1, x2)
            return (nh, nl), lam
        nh, lam = _step(mach, hi, x1, x2)
        return (nh, None), lam

    def _pair_views(self, pair):
        hi, lo = pair
        if lo is None:
            return hi, np.zeros_like(hi)
        return hi, lo

    def decode(self, frame, mode: str = BIDIRECTIONAL, with_norms: bool = False):
        """Decode a frame (L, 2) or batch (..., L, 2) of SSE pairs to LLRs.

        Registers start at 1 (zero-state prior at both ends).  Forward-only
        decoding emits one estimate per step as the bank advances; the
        bidirectional mode stores all forward banks, then sweeps backward,
        emitting the combined LLR before each backward update.
        """
        x1, x2 = self._ports(frame)
        L = x1.shape[-1]
        bshape = x1.shape[:-1]
        llr = np.empty(bshape + (L,))

        if mode == FORWARD_ONLY:
            if self.spec.code.kind != RSC:
                raise EngineError("forward-only output needs a systematic code")
            lams = np.empty(bshape + (L,))
            pair = self._bank_pair(bshape, 1.0)
            for t in range(L):
                bh, bl = self._pair_views(pair)
                llr[..., t] = self._fwd_llr_dd(bh, bl, x1[..., t], x2[..., t])
                pair, lam = self._advance(self.fwd, pair, x1[..., t], x2[..., t])
                lams[..., t] = lam
            return (llr, lams, None) if with_norms else llr

        if mode != BIDIRECTIONAL:
            raise EngineError(f"unknown decode mode {mode!r}")

        fhist = []
        pair = self._bank_pair(bshape, 1.0)
        lams = np.empty(bshape + (L,))
        fhist.append(pair)
        for t in range(L):
            pair, lam = self._advance(self.fwd, pair, x1[..., t], x2[..., t])
            lams[..., t] = lam
            fhist.append(pair)

        rhos = np.empty(bshape + (L,))
        bpair = self._bank_pair(bshape, 1.0)
        nsc = self.spec.code.kind == NSC
        for t in range(L - 1, -1, -1):
            bh, bl = self._pair_views(bpair)
            if nsc:
                fh, fl = self._pair_views(fhist[t + 1])
                llr[..., t] = self._nsc_llr_dd(fh, fl, bh, bl)
            else:
                fh, fl = self._pair_views(fhist[t])
                llr[..., t] = self._bidi_llr_dd(fh, fl, bh, bl,
                                                x1[..., t], x2[..., t])
            bpair, rho = self._advance(self.bwd, bpair, x1[..., t], x2[..., t])
            rhos[..., t] = rho
        return (llr, lams, rhos) if with_norms else llr

    def decode_tailbiting(self, frame, passes: int = 5, with_norms: bool = False):
        """Cyclic decoding of tail-biting NSC frames.

        Registers start at 0 (uniform state belief); each direction sweeps
        the frame ``passes`` times and the final sweep's banks produce the
        LLRs.
        """
        if self.spec.code.kind != NSC:
            raise EngineError("tail-biting decoding is defined for NSC codes")
        if passes < 1:
            raise EngineError("passes must be >= 1")
        x1, x2 = self._ports(frame)
        L = x1.shape[-1]
        bshape = x1.shape[:-1]

        lams = np.empty(bshape + (passes * L,))
        pair = self._bank_pair(bshape, 0.0)
        fhist = [None] * (L + 1)
        for p in range(passes):
            if p == passes - 1:
                fhist[0] = pair
            for t in range(L):
                pair, lam = self._advance(self.fwd, pair, x1[..., t], x2[..., t])
                lams[..., p * L + t] = lam
                if p == passes - 1:
                    fhist[t + 1] = pair

        rhos = np.empty(bshape + (passes * L,))
        bhist = [None] * L
        pair = self._bank_pair(bshape, 0.0)
        for p in range(passes):
            for t in range(L - 1, -1, -1):
                if p == passes - 1:
                    bhist[t] = pair
                pair, rho = self._advance(self.bwd, pair, x1[..., t], x2[..., t])
                rhos[..., p * L + (L - 1 - t)] = rho

        llr = np.empty(bshape + (L,))
        for t in range(L):
            fh, fl = self._pair_views(fhist[t + 1])
            bh, bl = self._pair_views(bhist[t])
            llr[..., t] = self._nsc_llr_dd(fh, fl, bh, bl)
        return (llr, lams, rhos) if with_norms else llr

    # -- instrumented scalar path ------------------------------------------------

    def _step_scalar(self, mach: _Machine, bank, x1, x2, trace: StepTrace):
        n = self.n_states
        both = x1 * x2
        trace.mul += 1
        new = [1.0] * n
        lam = 1.0 + both * bank[mach.out_label]
        trace.mul += 1
        trace.add += 1
        trace.reg += 1
        if lam <= 0.0:
            raise EngineError("normalization factor <= 0")
        for ell in range(1, n):
            r1 = bank[mach.src1[ell]] * (both if mach.e1[ell] else x1)
            r2 = bank[mach.src2[ell]]
            if mach.e2[ell]:
                r2 = r2 * x2
                trace.mul += 1
            v = (r1 + r2) / lam
            trace.mul += 2
            trace.add += 1
            trace.reg += 3  # two reads, one write
            trace.raw1.append(r1)
            trace.raw2.append(r2)
            new[ell] = min(1.0, max(-1.0, v))
        trace.norm = lam
        return new

    def _output_scalar(self, fbank, bbank, x1, x2, trace: StepTrace) -> float:
        mu = 0.0
        for fi, bi, w in zip(self._mu_f, self._mu_b, self._mu_w):
            term = fbank[fi] * bbank[bi]
            trace.mul += 1
            if w:
                term *= x2
                trace.mul += 1
            mu += term
            trace.add += 1
            trace.reg += 2
        delta = 1.0
        for fi, bi, w in zip(self._de_f, self._de_b, self._de_w):
            term = fbank[fi] * bbank[bi]
            trace.mul += 1
            if w:
                term *= x2
                trace.mul += 1
            delta += term
            trace.add += 1
            trace.reg += 2
        dp = max(delta + mu, np.finfo(float).tiny)
        dm = max(delta - mu, np.finfo(float).tiny)
        trace.add += 2
        llr = np.log((1.0 + x1) * dp) - np.log((1.0 - x1) * dm)
        trace.mul += 2
        trace.add += 3
        return float(np.clip(llr, -LLR_CLAMP, LLR_CLAMP))

    def decode_instrumented(self, frame):
        """Scalar bidirectional decode with per-step traces and op counts.

        Slow; meant for complexity instrumentation and debugging dumps.
        Matches :meth:`decode` away from saturated bits.
        """
        if self.spec.code.kind != RSC:
            raise EngineError("instrumented decode covers systematic codes")
        x1, x2 = self._ports(np.asarray(frame, dtype=np.float64))
        if x1.ndim != 1:
            raise EngineError("instrumented decode takes a single frame")
        L = x1.shape[0]
        traces = []
        fbanks = [[1.0] * self.n_states]
        for t in range(L):
            tr = StepTrace(direction="forward", k=t, norm=0.0)
            fbanks.append(self._step_scalar(self.fwd, fbanks[t], x1[t], x2[t], tr))
            traces.append(tr)
        llr = np.zeros(L)
        bbank = [1.0] * self.n_states
        for t in range(L - 1, -1, -1):
            tr = StepTrace(direction="backward", k=t, norm=0.0)
            llr[t] = self._output_scalar(fbanks[t], bbank, x1[t], x2[t], tr)
            bbank = self._step_scalar(self.bwd, bbank, x1[t], x2[t], tr)
            traces.append(tr)
        return llr, traces


def _rate1_machine(a, q):
    """Label-domain transition map of a rate-1 dual encoder.

    Each register holds the soft estimate of the XOR of a memory subset;
    one step permutes the registers and multiplies the input estimate into
    those whose label contains memory 1.  For a primitive numerator this is
    the single ring the dual polynomial describes; the map itself is exact
    for any generator pair.
    """
    m = a.degree
    n = 1 << m
    amask = sum(1 << (i - 1) for i in range(1, m + 1) if a.coeff(i))
    umask = 0
    for i in range(1, m):
        if a.coeff(i) ^ q.coeff(i):
            umask |= 1 << (i - 1)
    src = np.zeros(n, dtype=np.intp)
    tap = np.zeros(n, dtype=bool)
    for ell in range(n):
        shifted = ell >> 1  # memory i+1 inherits memory i
        if ell & 1:
            src[ell] = shifted ^ amask
            tap[ell] = True
        else:
            src[ell] = shifted
    return src, tap, umask


def rate1_siso(a, q, frame, direction: str = "forward") -> np.ndarray:
    """Soft-input soft-output decoding of the rate-1 code a(x)/q(x).

    Runs the code's dual encoder: a register file of memory-label soft
    estimates, stepped by permutation and multiplication with the incoming
    symbol estimate (the real-product image of the binary structure).  The
    per-step output is the product of the input estimate and the register
    named by the taps that link input and output bits.  Registers start at
    the neutral 1 (zero initial state); backward decoding runs the reversed
    code over the reversed sequence.
    """
    from .gf2 import reverse

    seq = np.asarray(frame, dtype=np.float64)
    if seq.ndim != 1:
        raise EngineError("rate-1 decoding takes a single sequence")
    if direction == "backward":
        a, q = reverse(a, a.degree), reverse(q, q.degree)
        seq = seq[::-1]
    elif direction != "forward":
        raise EngineError(f"unknown direction {direction!r}")
    src, tap, umask = _rate1_machine(a, q)
    bank = np.ones(len(src))
    out = np.empty(seq.shape[0])
    for k, x in enumerate(seq):
        out[k] = min(1.0, max(-1.0, x * bank[umask]))
        bank = np.where(tap, x, 1.0) * bank[src]
    if direction == "backward":
        out = out[::-1]
    return out


def validate_decoder_spec(spec: DecoderSpec, frames: int = 20, length: int = 32,
                          ebn0_db: float = 2.0, tol: float = 1e-9,
                          seed: int = 20250901) -> float:
    """Check banks against the Walsh-Hadamard image of reference metrics.

    Runs random noisy frames through both the register engine and the
    reference forward/backward recursions; every synchronized bank must
    match the label transform of the corresponding normalized metric vector
    within ``tol``.  Returns the largest deviation seen; raises
    :class:`~lmapdec.synth.SynthesisError` on failure.
    """
    from .bcjr import bcjr_metrics, wht_labels, BOUND_STATE0
    from .channel import ChannelParams, frame_rng, make_sse_frame
    from .codes import build_trellis, encode
    from .synth import SynthesisError

    code = spec.code
    trellis = build_trellis(code)
    dec = LmapDecoder(spec)
    params = ChannelParams(ebn0_db=ebn0_db, seed=seed)
    worst = 0.0
    for fi in range(frames):
        rng = frame_rng(seed ^ 0x5EED, fi)
        info = rng.integers(0, 2, size=length).astype(np.uint8)
        frame = make_sse_frame(encode(code, info), params, fi)
        alphas, betas = bcjr_metrics(trellis, frame, beta_boundary=BOUND_STATE0)
        x1, x2 = dec._ports(frame)
        bank = dec.fresh_bank((), 1.0)
        for t in range(length):
            bank, _ = dec.forward_step(bank, x1[t], x2[t])
            dev = float(np.max(np.abs(bank - wht_labels(alphas[t + 1]))))
            worst = max(worst, dev)
            if dev > tol:
                raise SynthesisError(
                    f"forward bank deviates from reference by {dev:.3e} at "
                    f"step {t} of frame {fi} ({code.describe()})")
        bank = dec.fresh_bank((), 1.0)
        for t in range(length - 1, -1, -1):
            bank, _ = dec.backward_step(bank, x1[t], x2[t])
            dev = float(np.max(np.abs(bank - wht_labels(betas[t]))))
            worst = max(worst, dev)
            if dev > tol:
                raise SynthesisError(
                    f"backward bank deviates from reference by {dev:.3e} at "
                    f"step {t} of frame {fi} ({code.describe()})")
    return worst
