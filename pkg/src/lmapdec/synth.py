"""Offline synthesis of the register-decoder structure for a rate-1/2 code.

The decoder consists of two register files per direction: a chain file (df1)
whose register updates take both input streams, ending in a self-updating
register (SUR), and a cyclic file (df2) driven by the second stream only.
Synthesis derives, from the code's polynomials:

  * the tap polynomials ``df1_poly`` (degree N-2) and ``df2_poly`` (degree
    N-1) with df2 = (1+x) * df1;
  * the register label orders ``df1_labels`` and ``df2_labels`` (each label
    is a bitmask naming a subset of encoder memories; a register holds the
    soft estimate of the XOR of those memories);
  * the SUR label and its tap bit;
  * ``out_label``: the memory subset whose XOR links the two code bits, and
    whose register feeds both the per-step normalization and the
    forward-only output.

The backward structure is the same pipeline run on the coefficient-reversed
polynomials; its labels live in reversed memory coordinates, connected to
forward coordinates by i <-> m+1-i.
"""

from __future__ import annotations

from dataclasses import dataclass

from .codes import CodeSpec, RSC
from .gf2 import Gf2Poly, gf2_divmod, is_primitive, mul, parse_octal, reverse


class SynthesisError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Label helpers: a label is an int bitmask, bit i-1 <-> encoder memory i.

def label_from_indices(indices) -> int:
    mask = 0
    for i in indices:
        if i < 1:
            raise SynthesisError(f"memory index {i} out of range")
        mask |= 1 << (i - 1)
    return mask


def label_indices(mask: int) -> tuple[int, ...]:
    return tuple(i + 1 for i in range(mask.bit_length()) if (mask >> i) & 1)


def format_label(mask: int) -> str:
    return ",".join(str(i) for i in label_indices(mask))


def reverse_label(mask: int, m: int) -> int:
    """Map memory i to memory m+1-i (connects backward labels to forward)."""
    out = 0
    for i in range(1, m + 1):
        if (mask >> (i - 1)) & 1:
            out |= 1 << (m - i)
    return out


# ---------------------------------------------------------------------------
# Synthesis stages.

def complementary_poly(a: Gf2Poly, m: int) -> Gf2Poly:
    """The z with a*z = x^(2^m - 1) + 1, for a of degree m dividing it."""
    if a.degree != m:
        raise SynthesisError(f"expected degree {m}, got {a.degree}")
    n1 = (1 << m) - 1
    z, rem = gf2_divmod(Gf2Poly((1 << n1) | 1), a)
    if not rem.is_zero:
        raise SynthesisError(
            f"{a} does not divide x^{n1}+1; decoder synthesis needs a "
            f"primitive parity polynomial")
    return z


def decoder_polys(a: Gf2Poly, q: Gf2Poly, m: int) -> tuple[Gf2Poly, Gf2Poly]:
    """Tap polynomials (df1, df2) with df2 = z*q and df1 = df2/(1+x)."""
    z = complementary_poly(a, m)
    df2 = mul(z, q)
    df1, rem = gf2_divmod(df2, Gf2Poly(0b11))
    if not rem.is_zero:
        raise SynthesisError("df2 is not divisible by 1+x; invariant violated")
    return df1, df2


def label_sequence(a: Gf2Poly, m: int) -> list[int]:
    """Raw register-label order from the symmetric-difference feedback register.

    Runs the feedback structure 1/a with set symmetric difference in place
    of XOR: registers start as {1},...,{m}; each shift emits the last
    register and feeds back the symmetric difference of the emitted label
    with the tapped registers.  After 2^m - 2 shifts the emitted labels plus
    the final register content enumerate every nonempty label exactly once
    (a duplicate appearing earlier flags a non-primitive polynomial).

    The returned order lists the final register content first, then the
    emitted labels newest to oldest, ending with the initial {m}.
    """
    n = 1 << m
    regs = [1 << i for i in range(m)]  # regs[i] holds label {i+1}
    emitted = []
    for _ in range(n - 2):
        out = regs[m - 1]
        fb = out
        for i in range(1, m):  # taps a_1..a_{m-1} act on regs 1..m-1
            if a.coeff(i):
                fb ^= regs[i - 1]
        for j in range(m - 1, 0, -1):
            regs[j] = regs[j - 1]
        regs[0] = fb
        emitted.append(out)
    seq = [regs[m - 1]] + emitted[::-1]
    if len(set(seq)) != len(seq) or 0 in seq:
        raise SynthesisError(
            f"label sequence for {a} repeats; polynomial is not primitive")
    return seq


def output_label(a: Gf2Poly, q: Gf2Poly) -> int:
    """Label of the memories where the interior coefficients of a and q differ."""
    m = a.degree
    mask = 0
    for i in range(1, m):
        if a.coeff(i) ^ q.coeff(i):
            mask |= 1 << (i - 1)
    if mask == 0:
        raise SynthesisError(
            "generator polynomials agree on all interior taps; the code has "
            "no usable output register")
    return mask


def rotate_last(labels: list[int], target: int) -> list[int]:
    """Circularly rotate so that ``target`` is the last element."""
    if target not in labels:
        raise SynthesisError(f"label {format_label(target)} not in sequence")
    j = labels.index(target)
    return labels[j + 1:] + labels[:j + 1]


def cumulative_labels(df2_labels: list[int]) -> list[int]:
    """Chain labels by cumulative symmetric difference over the ring order.

    The chain must start at the ring's first label and end at its last;
    violation means the ring order is inconsistent.
    """
    out = []
    acc = 0
    for mask in df2_labels[:-1]:
        acc ^= mask
        out.append(acc)
    if out and (out[0] != df2_labels[0] or (acc ^ df2_labels[-1]) != 0):
        raise SynthesisError("chain labels do not share the ring's endpoints")
    return out


def self_register(df2_labels: list[int], df1_labels: list[int]) -> tuple[int, int]:
    """The label present in the ring but not the chain, and its tap bit.

    The tap is 0 when the label contains memory 1 (the register then updates
    from the first input stream alone), else 1.
    """
    diff = set(df2_labels) - set(df1_labels)
    if len(diff) != 1:
        raise SynthesisError(f"expected a single self-updating label, got {diff}")
    sur = diff.pop()
    tap = 0 if (sur & 1) else 1
    return sur, tap


@dataclass(frozen=True)
class DecoderSpec:
    """The synthesized decoder structure for one code.

    Forward fields describe the machine that consumes symbols in natural
    order; ``b_*`` fields are the same structure synthesized from the
    coefficient-reversed code and drive the backward pass.  Backward labels
    are in reversed memory coordinates (see :func:`reverse_label`).

    ``swap_inputs`` marks non-systematic codes whose primitive generator
    produces the first code bit: the engine then feeds (c2, c1) estimates
    into the (first, second) input ports.
    """

    code: CodeSpec
    df1_poly: Gf2Poly
    df2_poly: Gf2Poly
    df1_labels: tuple[int, ...]
    df2_labels: tuple[int, ...]
    sur_label: int
    sur_tap: int
    out_label: int
    b_df1_poly: Gf2Poly
    b_df2_poly: Gf2Poly
    b_df1_labels: tuple[int, ...]
    b_df2_labels: tuple[int, ...]
    b_sur_label: int
    b_sur_tap: int
    b_out_label: int
    swap_inputs: bool = False

    @property
    def m(self) -> int:
        return self.code.m

    @property
    def n_states(self) -> int:
        return self.code.n_states

    def reverse_label(self, mask: int) -> int:
        return reverse_label(mask, self.m)

    def check(self) -> None:
        """Structural invariants; raises SynthesisError on violation."""
        n = self.n_states
        if sorted(self.df2_labels) != list(range(1, n)):
            raise SynthesisError("ring labels are not a permutation of all labels")
        if len(self.df1_labels) != n - 2:
            raise SynthesisError("chain label count must be N-2")
        if self.df1_labels and (self.df1_labels[0] != self.df2_labels[0]
                                or self.df1_labels[-1] != self.df2_labels[-1]):
            raise SynthesisError("chain endpoints must match the ring's")
        if self.df2_labels[-1] != self.out_label:
            raise SynthesisError("ring must end at the output label")
        if mul(self.df1_poly, Gf2Poly(0b11)) != self.df2_poly:
            raise SynthesisError("(1+x)*df1 != df2")
        for p, deg in ((self.df1_poly, n - 2), (self.df2_poly, n - 1)):
            if p.degree != deg or p.coeff(0) != 1:
                raise SynthesisError("tap polynomial degree/constant-term violated")


def _synth_direction(a: Gf2Poly, q: Gf2Poly, m: int) -> dict:
    df1, df2 = decoder_polys(a, q, m)
    raw = label_sequence(a, m)
    out = output_label(a, q)
    ring = rotate_last(raw, out)
    chain = cumulative_labels(ring)
    sur, tap = self_register(ring, chain)
    return {
        "df1_poly": df1,
        "df2_poly": df2,
        "df1_labels": tuple(chain),
        "df2_labels": tuple(ring),
        "sur_label": sur,
        "sur_tap": tap,
        "out_label": out,
    }


def _decoder_roles(code: CodeSpec) -> tuple[Gf2Poly, Gf2Poly, bool]:
    """Assign (parity-role, feedback-role) polynomials and the input order.

    For RSC the roles are fixed by the code.  For NSC the primitive
    generator takes the parity role; when that is the generator of the
    first code bit, the engine's input ports are swapped.
    """
    if code.kind == RSC:
        return code.poly_a, code.poly_q, False
    if is_primitive(code.poly_q):
        return code.poly_q, code.poly_a, False
    if is_primitive(code.poly_a):
        return code.poly_a, code.poly_q, True
    raise SynthesisError(
        f"neither generator of {code.describe()} is primitive; "
        f"decoder synthesis unavailable")


def synthesize(code: CodeSpec, self_check: bool = False) -> DecoderSpec:
    """Build the full decoder structure for a code.

    With ``self_check`` the result is validated against the reference
    decoder on random noisy frames (register banks must match the
    Walsh-Hadamard image of the state metrics at every step); a failure
    rejects the synthesis.
    """
    a, q, swap = _decoder_roles(code)
    m = code.m
    fwd = _synth_direction(a, q, m)
    bwd = _synth_direction(reverse(a, m), reverse(q, m), m)
    spec = DecoderSpec(
        code=code,
        swap_inputs=swap,
        **fwd,
        **{"b_" + k: v for k, v in bwd.items()},
    )
    spec.check()
    if self_check:
        from .engine import validate_decoder_spec

        validate_decoder_spec(spec)
    return spec


# ---------------------------------------------------------------------------
# Text serialization.

def _format_labels(labels) -> str:
    return ";".join(format_label(v) for v in labels)


def _parse_labels(text: str) -> tuple[int, ...]:
    if not text:
        return ()
    return tuple(label_from_indices(int(t) for t in grp.split(","))
                 for grp in text.split(";"))


def format_decoder_spec(spec: DecoderSpec) -> str:
    """One key per line; polynomials in octal, labels as sorted index lists."""
    code = spec.code
    lines = [
        f"code={code.kind},{code.poly_a.to_octal()},{code.poly_q.to_octal()},{code.termination}",
        f"dfs1={spec.df1_poly.to_octal()}",
        f"dfs2={spec.df2_poly.to_octal()}",
        f"ds={spec.sur_tap}",
        f"I={_format_labels(spec.df2_labels)}",
        f"J={_format_labels(spec.df1_labels)}",
        f"S={format_label(spec.sur_label)}",
        f"U={format_label(spec.out_label)}",
        f"b_dfs1={spec.b_df1_poly.to_octal()}",
        f"b_dfs2={spec.b_df2_poly.to_octal()}",
        f"b_ds={spec.b_sur_tap}",
        f"b_I={_format_labels(spec.b_df2_labels)}",
        f"b_J={_format_labels(spec.b_df1_labels)}",
        f"b_S={format_label(spec.b_sur_label)}",
        f"b_U={format_label(spec.b_out_label)}",
        f"swap={int(spec.swap_inputs)}",
    ]
    return "\n".join(lines) + "\n"


def parse_decoder_spec(text: str) -> DecoderSpec:
    fields = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    try:
        kind, ga, gq, term = fields["code"].split(",")
        code = CodeSpec(kind=kind, poly_a=parse_octal(ga), poly_q=parse_octal(gq),
                        termination=term)
        spec = DecoderSpec(
            code=code,
            df1_poly=parse_octal(fields["dfs1"]),
            df2_poly=parse_octal(fields["dfs2"]),
            df1_labels=_parse_labels(fields["J"]),
            df2_labels=_parse_labels(fields["I"]),
            sur_label=label_from_indices(int(t) for t in fields["S"].split(",")),
            sur_tap=int(fields["ds"]),
            out_label=label_from_indices(int(t) for t in fields["U"].split(",")),
            b_df1_poly=parse_octal(fields["b_dfs1"]),
            b_df2_poly=parse_octal(fields["b_dfs2"]),
            b_df1_labels=_parse_labels(fields["b_J"]),
            b_df2_labels=_parse_labels(fields["b_I"]),
            b_sur_label=label_from_indices(int(t) for t in fields["b_S"].split(",")),
            b_sur_tap=int(fields["b_ds"]),
            b_out_label=label_from_indices(int(t) for t in fields["b_U"].split(",")),
            swap_inputs=bool(int(fields.get("swap", "0"))),
        )
    except KeyError as e:
        raise SynthesisError(f"missing field {e.args[0]!r} in decoder text") from e
    spec.check()
    return spec
