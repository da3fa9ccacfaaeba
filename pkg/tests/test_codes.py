import numpy as np
import pytest

from lmapdec.codes import (
    NSC,
    RSC,
    TAIL_BITING,
    CodeError,
    CodeSpec,
    bpsk,
    build_trellis,
    encode,
    tailbiting_start_state,
)
from lmapdec.gf2 import parse_octal


def rsc75():
    return CodeSpec(kind=RSC, poly_a=parse_octal("7"), poly_q=parse_octal("5"))


def nsc75(term=TAIL_BITING):
    return CodeSpec(kind=NSC, poly_a=parse_octal("7"), poly_q=parse_octal("5"),
                    termination=term)


def test_codespec_validation():
    with pytest.raises(CodeError):
        CodeSpec(kind=RSC, poly_a=parse_octal("7"), poly_q=parse_octal("13"))
    with pytest.raises(CodeError):
        CodeSpec(kind=RSC, poly_a=parse_octal("6"), poly_q=parse_octal("4"))
    with pytest.raises(CodeError):
        CodeSpec(kind="other", poly_a=parse_octal("7"), poly_q=parse_octal("5"))
    with pytest.raises(CodeError):
        CodeSpec(kind=RSC, poly_a=parse_octal("7"), poly_q=parse_octal("5"),
                 termination=TAIL_BITING)


def test_trellis_4state_fixture():
    # the published 4-state trellis of the (1,7/5) recursive code:
    # states are M1M2 with M1 the high bit
    t = build_trellis(rsc75())
    assert t.n_states == 4

    def edge(s, b):
        return int(t.next_state[s, b]), int(t.out1[s, b]), int(t.out2[s, b])

    assert edge(0b00, 0) == (0b00, 0, 0)
    assert edge(0b00, 1) == (0b10, 1, 1)
    assert edge(0b01, 0) == (0b10, 0, 0)
    assert edge(0b01, 1) == (0b00, 1, 1)
    assert edge(0b10, 0) == (0b01, 0, 1)
    assert edge(0b10, 1) == (0b11, 1, 0)
    assert edge(0b11, 0) == (0b11, 0, 1)
    assert edge(0b11, 1) == (0b01, 1, 0)


def test_trellis_degrees():
    for code in (rsc75(), nsc75()):
        t = build_trellis(code)
        # every state has exactly 2 outgoing and 2 incoming edges
        incoming = np.zeros(t.n_states, dtype=int)
        for s in range(t.n_states):
            for b in (0, 1):
                incoming[t.next_state[s, b]] += 1
        assert np.all(incoming == 2)


def test_rsc_systematic_property():
    for ga, gq in (("7", "5"), ("13", "15"), ("23", "25")):
        code = CodeSpec(kind=RSC, poly_a=parse_octal(ga), poly_q=parse_octal(gq))
        t = build_trellis(code)
        for s in range(t.n_states):
            for b in (0, 1):
                assert t.out1[s, b] == b


def test_trellis_reachability():
    # all states reachable from 0 within m steps for a primitive numerator
    for ga, gq, kind in (("7", "5", RSC), ("23", "25", RSC), ("7", "5", NSC)):
        code = CodeSpec(kind=kind, poly_a=parse_octal(ga), poly_q=parse_octal(gq))
        t = build_trellis(code)
        frontier = {0}
        for _ in range(code.m):
            frontier = {int(t.next_state[s, b]) for s in frontier for b in (0, 1)}
        assert frontier == set(range(t.n_states))


def test_encode_all_zero():
    assert np.all(encode(rsc75(), np.zeros(8, dtype=np.uint8)) == 0)


def test_encode_walk_fixture():
    # b = 1,0,0,0 walked through the trellis by hand:
    # rsc: 00 -1/11-> 10 -0/01-> 01 -0/00-> 10 -0/01-> 01
    cw = encode(rsc75(), [1, 0, 0, 0])
    assert cw.tolist() == [1, 1, 0, 1, 0, 0, 0, 1]
    # the same bits through the feedforward (7,5) encoder
    cw = encode(CodeSpec(kind=NSC, poly_a=parse_octal("7"), poly_q=parse_octal("5")),
                [1, 0, 0, 0])
    assert cw.tolist() == [1, 1, 1, 0, 1, 1, 0, 0]


def test_encoder_linearity():
    rng = np.random.default_rng(3)
    code = rsc75()
    for _ in range(50):
        b1 = rng.integers(0, 2, 24).astype(np.uint8)
        b2 = rng.integers(0, 2, 24).astype(np.uint8)
        assert np.all(encode(code, b1 ^ b2) == (encode(code, b1) ^ encode(code, b2)))


def test_tailbiting_circularity():
    rng = np.random.default_rng(11)
    for ga, gq in (("7", "5"), ("171", "133")):
        code = CodeSpec(kind=NSC, poly_a=parse_octal(ga), poly_q=parse_octal(gq),
                        termination=TAIL_BITING)
        t = build_trellis(code)
        for _ in range(1000 if ga == "7" else 50):
            info = rng.integers(0, 2, 20).astype(np.uint8)
            encode(code, info)  # asserts final state == start state internally
            s = tailbiting_start_state(code, info)
            for b in info:
                s = int(t.next_state[s, int(b)])
            assert s == tailbiting_start_state(code, info)


def test_tailbiting_needs_enough_bits():
    code = CodeSpec(kind=NSC, poly_a=parse_octal("171"), poly_q=parse_octal("133"),
                    termination=TAIL_BITING)
    with pytest.raises(CodeError):
        encode(code, [1, 0, 1])


def test_bpsk_mapping():
    assert bpsk([0]).tolist() == [1.0]
    assert bpsk([1]).tolist() == [-1.0]
    assert bpsk([0, 1, 0]).tolist() == [1.0, -1.0, 1.0]
