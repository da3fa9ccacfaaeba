"""Rate-1/2 convolutional code model: encoder, trellis, BPSK mapping.

State convention: the state integer packs the memory cells with M1 as the
most significant bit, s = sum_i M_i * 2^(m-i).  Codeword bits go on the wire
as (c1, c2) per trellis step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gf2 import Gf2Poly

RSC = "rsc"
NSC = "nsc"
ZERO_TAIL = "zero"  # start in state 0; no tail bits appended
TERMINATED = "terminated"  # m closing bits drive the encoder back to state 0
TAIL_BITING = "tailbiting"


class CodeError(ValueError):
    pass


def _state_tap_mask(poly: Gf2Poly, m: int) -> int:
    # Memory i (1-based) sits at state bit m-i; collect taps for coefficients 1..m.
    mask = 0
    for i in range(1, m + 1):
        if poly.coeff(i):
            mask |= 1 << (m - i)
    return mask


def _parity(v: int) -> int:
    return bin(v).count("1") & 1


@dataclass(frozen=True)
class CodeSpec:
    """A rate-1/2 convolutional code.

    For RSC the generator is (1, poly_a/poly_q): poly_a is the parity
    numerator and poly_q the feedback.  For NSC, poly_a and poly_q are the
    two feedforward generators producing c1 and c2 respectively.
    """

    kind: str
    poly_a: Gf2Poly
    poly_q: Gf2Poly
    termination: str = ZERO_TAIL

    def __post_init__(self):
        if self.kind not in (RSC, NSC):
            raise CodeError(f"unknown code kind {self.kind!r}")
        if self.termination not in (ZERO_TAIL, TERMINATED, TAIL_BITING):
            raise CodeError(f"unknown termination {self.termination!r}")
        da, dq = self.poly_a.degree, self.poly_q.degree
        if da is None or dq is None or da != dq or da < 1:
            raise CodeError("generator polynomials must share a degree >= 1")
        if self.poly_a.coeff(0) != 1 or self.poly_q.coeff(0) != 1:
            raise CodeError("generator polynomials must have constant term 1")
        if self.kind == RSC and self.termination == TAIL_BITING:
            raise CodeError("tail-biting is only provided for NSC codes")

    @property
    def m(self) -> int:
        return self.poly_a.degree

    @property
    def n_states(self) -> int:
        return 1 << self.m

    def describe(self) -> str:
        return f"({self.poly_a.to_octal()},{self.poly_q.to_octal()})oct {self.kind}"


@dataclass(frozen=True)
class Trellis:
    """Transition and output tables of the shift-register encoder."""

    n_states: int
    m: int
    next_state: np.ndarray = field(repr=False)  # (N, 2) int32
    out1: np.ndarray = field(repr=False)  # (N, 2) uint8, first code bit
    out2: np.ndarray = field(repr=False)  # (N, 2) uint8, second code bit


def build_trellis(code: CodeSpec) -> Trellis:
    """Tabulate next states and output bits for every (state, input bit)."""
    m, n = code.m, code.n_states
    amask = _state_tap_mask(code.poly_a, m)
    qmask = _state_tap_mask(code.poly_q, m)
    next_state = np.zeros((n, 2), dtype=np.int32)
    out1 = np.zeros((n, 2), dtype=np.uint8)
    out2 = np.zeros((n, 2), dtype=np.uint8)
    for s in range(n):
        for b in (0, 1):
            if code.kind == RSC:
                u = b ^ _parity(s & qmask)
                c1 = b
                c2 = u ^ _parity(s & amask)
            else:
                u = b
                c1 = b ^ _parity(s & amask)
                c2 = b ^ _parity(s & qmask)
            next_state[s, b] = (u << (m - 1)) | (s >> 1)
            out1[s, b] = c1
            out2[s, b] = c2
    next_state.setflags(write=False)
    out1.setflags(write=False)
    out2.setflags(write=False)
    return Trellis(n_states=n, m=m, next_state=next_state, out1=out1, out2=out2)


def tailbiting_start_state(code: CodeSpec, info) -> int:
    """State reached after shifting the last m message bits into a cleared register."""
    info = np.asarray(info)
    m = code.m
    s = 0
    for i in range(1, m + 1):
        s |= int(info[len(info) - i]) << (m - i)
    return s


def termination_bits(code: CodeSpec, state: int) -> list[int]:
    """The m input bits that drive the encoder from ``state`` back to 0."""
    trellis = build_trellis(code)
    m = code.m
    qmask = _state_tap_mask(code.poly_q, m)
    bits = []
    for _ in range(m):
        b = _parity(state & qmask) if code.kind == RSC else 0
        bits.append(b)
        state = int(trellis.next_state[state, b])
    assert state == 0
    return bits


def encode(code: CodeSpec, info) -> np.ndarray:
    """Encode an information sequence; output interleaves c1, c2 per step.

    Zero-tail frames start in state 0 and append no termination bits, so
    the output length is exactly 2L.  Terminated frames append the m
    closing bits (output length 2(L+m)), ending in state 0.  Tail-biting
    (NSC only) starts in the state determined by the last m message bits,
    which makes the walk circular.
    """
    info = np.asarray(info, dtype=np.uint8)
    if info.ndim != 1 or info.size < 1:
        raise CodeError("information sequence must be a nonempty 1-D bit array")
    if np.any(info > 1):
        raise CodeError("information bits must be 0/1")
    trellis = build_trellis(code)
    if code.termination == TAIL_BITING:
        if info.size < code.m:
            raise CodeError("tail-biting needs at least m message bits")
        s = tailbiting_start_state(code, info)
    else:
        s = 0
    steps = list(info)
    out = np.empty(2 * (info.size + (code.m if code.termination == TERMINATED
                                     else 0)), dtype=np.uint8)
    pos = 0
    for b in steps:
        b = int(b)
        out[pos] = trellis.out1[s, b]
        out[pos + 1] = trellis.out2[s, b]
        pos += 2
        s = int(trellis.next_state[s, b])
    if code.termination == TERMINATED:
        for b in termination_bits(code, s):
            out[pos] = trellis.out1[s, b]
            out[pos + 1] = trellis.out2[s, b]
            pos += 2
            s = int(trellis.next_state[s, b])
        assert s == 0
    if code.termination == TAIL_BITING:
        assert s == tailbiting_start_state(code, info)
    return out


def bpsk(bits) -> np.ndarray:
    """Map bits to unit-energy symbols: 0 -> +1.0, 1 -> -1.0."""
    bits = np.asarray(bits)
    return 1.0 - 2.0 * bits.astype(np.float64)
