"""Reference MAP decoding in the probability domain.

This module is the package's oracle: a deliberately plain, loop-based BCJR
(forward-only, bidirectional, and cyclic tail-biting), an exhaustive
posterior for short frames, and the Walsh-Hadamard utilities that translate
state metrics into the label-indexed values the register engine stores.

Branch probabilities come from SSEs via p(bit=0) = (1 + sse)/2, and state
metrics are renormalized to sum 1 after every step, so everything stays in
[0, 1] without log-domain tricks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codes import CodeSpec, Trellis, build_trellis, encode, TAIL_BITING

LLR_CLAMP = 40.0
BOUND_STATE0 = "state0"
BOUND_UNIFORM = "uniform"


@dataclass
class OpCounter:
    """Arithmetic and access counts accumulated by an instrumented run."""

    mul: int = 0
    add: int = 0
    reg: int = 0
    steps: int = 0

    def per_step(self) -> dict:
        n = max(1, self.steps)
        return {"mul": self.mul / n, "add": self.add / n, "reg": self.reg / n}


def _llr_from_sse(x: float) -> float:
    num = 1.0 + x
    den = 1.0 - x
    if num <= 0.0:
        return -LLR_CLAMP
    if den <= 0.0:
        return LLR_CLAMP
    return float(np.clip(np.log(num / den), -LLR_CLAMP, LLR_CLAMP))


def _llr_from_masses(p0: float, p1: float) -> float:
    tiny = np.finfo(float).tiny
    llr = np.log(max(p0, tiny)) - np.log(max(p1, tiny))
    return float(np.clip(llr, -LLR_CLAMP, LLR_CLAMP))


def _bit_probs(sse: float) -> tuple[float, float]:
    return (1.0 + sse) / 2.0, (1.0 - sse) / 2.0


def _boundary(n_states: int, kind: str) -> np.ndarray:
    v = np.zeros(n_states)
    if kind == BOUND_STATE0:
        v[0] = 1.0
    elif kind == BOUND_UNIFORM:
        v[:] = 1.0 / n_states
    else:
        raise ValueError(f"unknown boundary {kind!r}")
    return v


def _alpha_step(trellis: Trellis, alpha, x1, x2, counter=None):
    """One forward recursion step; returns (new alpha, p(b=0), p(b=1)).

    The bit masses are kept as two separate positive sums so the caller can
    form the LLR as log(p0/p1) without cancellation.
    """
    n = trellis.n_states
    p1 = _bit_probs(x1)
    p2 = _bit_probs(x2)
    new = np.zeros(n)
    mass = [0.0, 0.0]
    for s in range(n):
        a = alpha[s]
        for b in (0, 1):
            g = p1[trellis.out1[s, b]] * p2[trellis.out2[s, b]]
            w = a * g
            new[trellis.next_state[s, b]] += w
            mass[b] += w
            if counter is not None:
                counter.mul += 2
                counter.add += 2
                counter.reg += 4  # alpha read, tables, alpha write
    total = float(new.sum())
    new /= total
    if counter is not None:
        counter.mul += n
        counter.add += n - 1
        counter.reg += 2 * n
    return new, mass[0], mass[1]


def _beta_step(trellis: Trellis, beta, x1, x2, counter=None):
    """One backward recursion step: maps beta at time k+1 to time k."""
    n = trellis.n_states
    p1 = _bit_probs(x1)
    p2 = _bit_probs(x2)
    new = np.zeros(n)
    for s in range(n):
        acc = 0.0
        for b in (0, 1):
            g = p1[trellis.out1[s, b]] * p2[trellis.out2[s, b]]
            acc += g * beta[trellis.next_state[s, b]]
            if counter is not None:
                counter.mul += 2
                counter.add += 1
                counter.reg += 4
        new[s] = acc
    total = float(new.sum())
    new /= total
    if counter is not None:
        counter.mul += n
        counter.add += n - 1
        counter.reg += 2 * n
    return new


def bcjr_forward(trellis: Trellis, frame, counter=None):
    """Forward-only decoding.

    Returns (alphas, llr): alphas[k] is the normalized state distribution
    after consuming k symbols (alphas[0] is the zero-state prior), and
    llr[k] is the forward-only information-bit LLR drawn from the edges of
    step k before the metrics absorb later symbols.
    """
    frame = np.asarray(frame, dtype=np.float64)
    L = frame.shape[0]
    n = trellis.n_states
    alphas = np.zeros((L + 1, n))
    alphas[0] = _boundary(n, BOUND_STATE0)
    llr = np.zeros(L)
    for k in range(L):
        if counter is not None:
            counter.steps += 1
        new, p0, p1 = _alpha_step(trellis, alphas[k], frame[k, 0], frame[k, 1], counter)
        alphas[k + 1] = new
        llr[k] = _llr_from_masses(p0, p1)
    return alphas, llr


def bcjr_metrics(trellis: Trellis, frame, beta_boundary=BOUND_UNIFORM):
    """Normalized alpha and beta traces for a frame.

    betas[k] is the (normalized) distribution of the time-(k+1) state given
    symbols k+1..L; betas[L] is the boundary.
    """
    frame = np.asarray(frame, dtype=np.float64)
    L = frame.shape[0]
    n = trellis.n_states
    alphas, _ = bcjr_forward(trellis, frame)
    betas = np.zeros((L + 1, n))
    betas[L] = _boundary(n, beta_boundary)
    betas[L] /= betas[L].sum()
    for k in range(L - 1, -1, -1):
        betas[k] = _beta_step(trellis, betas[k + 1], frame[k, 0], frame[k, 1])
    return alphas, betas


def _llr_at(trellis: Trellis, alpha, beta_next, x1, x2, counter=None) -> float:
    p1 = _bit_probs(x1)
    p2 = _bit_probs(x2)
    mass = [0.0, 0.0]
    for s in range(trellis.n_states):
        a = alpha[s]
        for b in (0, 1):
            g = p1[trellis.out1[s, b]] * p2[trellis.out2[s, b]]
            w = a * g * beta_next[trellis.next_state[s, b]]
            mass[b] += w
            if counter is not None:
                counter.mul += 3
                counter.add += 2
                counter.reg += 5
    return _llr_from_masses(mass[0], mass[1])


def bcjr_bidirectional(trellis: Trellis, frame, beta_boundary=BOUND_UNIFORM,
                       counter=None) -> np.ndarray:
    """Exact APP LLRs of the information bits.

    The default beta boundary is uniform, matching the true posterior of an
    unterminated frame; pass ``beta_boundary="state0"`` to pin the final
    state to zero (the convention the register engine's initialization
    encodes).
    """
    frame = np.asarray(frame, dtype=np.float64)
    L = frame.shape[0]
    n = trellis.n_states
    alpha = _boundary(n, BOUND_STATE0)
    betas = np.zeros((L + 1, n))
    betas[L] = _boundary(n, beta_boundary)
    betas[L] /= betas[L].sum()
    for k in range(L - 1, -1, -1):
        betas[k] = _beta_step(trellis, betas[k + 1], frame[k, 0], frame[k, 1], counter)
    llr = np.zeros(L)
    for k in range(L):
        if counter is not None:
            counter.steps += 1
        llr[k] = _llr_at(trellis, alpha, betas[k + 1], frame[k, 0], frame[k, 1], counter)
        alpha, _, _ = _alpha_step(trellis, alpha, frame[k, 0], frame[k, 1], counter)
    return llr


def bcjr_tailbiting(trellis: Trellis, frame, passes: int = 5, counter=None,
                    return_metrics: bool = False):
    """Cyclic MAP decoding for tail-biting frames.

    Both recursions start uniform and sweep the frame ``passes`` times in
    their own direction; LLRs use the metrics recorded during the final
    sweep of each.
    """
    if passes < 1:
        raise ValueError("passes must be >= 1")
    frame = np.asarray(frame, dtype=np.float64)
    L = frame.shape[0]
    n = trellis.n_states

    alpha = _boundary(n, BOUND_UNIFORM)
    alphas = np.zeros((L + 1, n))
    for p in range(passes):
        if p == passes - 1:
            alphas[0] = alpha
        for k in range(L):
            if counter is not None and p == passes - 1:
                counter.steps += 1
            alpha, _, _ = _alpha_step(trellis, alpha, frame[k, 0], frame[k, 1],
                                      counter if p == passes - 1 else None)
            if p == passes - 1:
                alphas[k + 1] = alpha

    beta = _boundary(n, BOUND_UNIFORM)
    betas = np.zeros((L + 1, n))
    for p in range(passes):
        if p == passes - 1:
            betas[L] = beta
        for k in range(L - 1, -1, -1):
            beta = _beta_step(trellis, beta, frame[k, 0], frame[k, 1],
                              counter if p == passes - 1 else None)
            if p == passes - 1:
                betas[k] = beta

    llr = np.zeros(L)
    for k in range(L):
        llr[k] = _llr_at(trellis, alphas[k], betas[k + 1], frame[k, 0], frame[k, 1], counter)
    if return_metrics:
        return llr, alphas, betas
    return llr


def exhaustive_posterior(code: CodeSpec, frame) -> np.ndarray:
    """Exact bitwise posterior LLRs by enumerating all 2^L messages.

    For tail-biting codes each message is encoded circularly, so the sum
    ranges over valid tail-biting codewords only.  Limited to L <= 20.
    """
    frame = np.asarray(frame, dtype=np.float64)
    L = frame.shape[0]
    if L > 20:
        raise ValueError("exhaustive posterior is limited to L <= 20")
    if code.termination == TAIL_BITING and L < code.m:
        raise ValueError("tail-biting needs L >= m")
    n_msgs = 1 << L
    msgs = (np.arange(n_msgs)[:, None] >> np.arange(L)[None, :]) & 1  # msg bit k
    # Vectorized trellis walk over all messages.
    trellis = build_trellis(code)
    if code.termination == TAIL_BITING:
        states = np.zeros(n_msgs, dtype=np.int64)
        for i in range(1, code.m + 1):
            states |= msgs[:, L - i] << (code.m - i)
    else:
        states = np.zeros(n_msgs, dtype=np.int64)
    like = np.ones(n_msgs)
    for k in range(L):
        b = msgs[:, k]
        c1 = trellis.out1[states, b]
        c2 = trellis.out2[states, b]
        p1 = (1.0 + frame[k, 0]) / 2.0
        p2 = (1.0 + frame[k, 1]) / 2.0
        like *= np.where(c1 == 0, p1, 1.0 - p1)
        like *= np.where(c2 == 0, p2, 1.0 - p2)
        states = trellis.next_state[states, b].astype(np.int64)
    llr = np.zeros(L)
    for k in range(L):
        mask = msgs[:, k] == 0
        p0 = like[mask].sum()
        p1 = like[~mask].sum()
        llr[k] = _llr_from_masses(p0, p1)
    return llr


def _bit_reverse(v: int, m: int) -> int:
    out = 0
    for i in range(m):
        if (v >> i) & 1:
            out |= 1 << (m - 1 - i)
    return out


def _hadamard_inplace(w: np.ndarray) -> np.ndarray:
    n = w.shape[-1]
    h = 1
    while h < n:
        for start in range(0, n, 2 * h):
            a = w[..., start:start + h].copy()
            b = w[..., start + h:start + 2 * h].copy()
            w[..., start:start + h] = a + b
            w[..., start + h:start + 2 * h] = a - b
        h *= 2
    return w


def wht_labels(metrics) -> np.ndarray:
    """Map a normalized state distribution to label-indexed parity expectations.

    Output index ell is a memory-label bitmask (bit i-1 selects memory i);
    component ell equals sum_s metrics[s] * (-1)^parity(selected bits of s).
    Index 0 (the empty label) is the total mass, 1 for normalized input.
    """
    metrics = np.asarray(metrics, dtype=np.float64)
    n = metrics.shape[-1]
    m = n.bit_length() - 1
    if 1 << m != n:
        raise ValueError("metrics length must be a power of two")
    w = _hadamard_inplace(metrics.copy())
    # Memory i occupies state bit m-i, so label masks are bit-reversed
    # relative to the transform's natural (state-bit) indexing.
    perm = np.array([_bit_reverse(ell, m) for ell in range(n)])
    return w[..., perm]


def inverse_wht_labels(labelvec) -> np.ndarray:
    """Inverse of :func:`wht_labels` (exact up to the 1/N scaling)."""
    labelvec = np.asarray(labelvec, dtype=np.float64)
    n = labelvec.shape[-1]
    m = n.bit_length() - 1
    perm = np.array([_bit_reverse(ell, m) for ell in range(n)])
    w = labelvec[..., perm].copy()
    return _hadamard_inplace(w) / n
