"""Monte Carlo BER/BLER measurement, equivalence sweeps, and timing runs.

Frames are seeded individually from (master_seed, frame_index), so a run's
statistics are a pure function of the configuration: thread count only
changes who computes a frame, never its content.  Stopping decisions are
taken at fixed wave boundaries for the same reason.

CSV output uses '.' decimals, LF line endings, and a fixed header order so
acceptance runs can be diffed byte for byte.  Timing fields are wall-clock
measurements and are zeroed when ``measure_time`` is off, which is how the
determinism checks exclude them.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bcjr import BOUND_STATE0, bcjr_bidirectional, bcjr_forward, bcjr_tailbiting
from .channel import ChannelParams, frame_rng, make_sse_frame
from .codes import (NSC, RSC, TAIL_BITING, TERMINATED, ZERO_TAIL, CodeSpec,
                    build_trellis, encode)
from .engine import BIDIRECTIONAL, FORWARD_ONLY, LmapDecoder
from .gf2 import Gf2Poly, parse_octal
from .synth import synthesize

BER_HEADER = "snr_db,frames,bits,bit_errors,ber,block_errors,bler,ms_per_frame"
EQUIV_HEADER = ("code,snr_db,frames,frame_len,max_abs_dev,mean_abs_dev,"
                "sign_disagreements")
BENCH_HEADER = ("code,m,n_states,frames,lmap_ms_per_frame,bcjr_ms_per_frame,"
                "speedup")

MODE_FORWARD = "forward"
MODE_BIDIRECTIONAL = "bidirectional"
MODE_TAILBITING = "tailbiting"

# Fixed wave geometry keeps stopping rules independent of the thread count.
CHUNK_FRAMES = 128
CHUNKS_PER_WAVE = 4


class SimError(ValueError):
    pass


def reference_code(m: int, kind: str = RSC, termination: str = ZERO_TAIL) -> CodeSpec:
    """A synthesizable rate-1/2 code for each memory order used in benchmarks."""
    table = {2: ("7", "5"), 3: ("13", "15"), 4: ("23", "25"), 5: ("45", "47"),
             6: ("103", "101"), 7: ("211", "213"), 8: ("561", "573")}
    if m not in table:
        raise SimError(f"no reference code for m={m}")
    ga, gq = table[m]
    return CodeSpec(kind=kind, poly_a=parse_octal(ga), poly_q=parse_octal(gq),
                    termination=termination)


@dataclass(frozen=True)
class SimConfig:
    code: CodeSpec
    snr_list: tuple = (0.0, 1.0, 2.0)
    frame_len: int = 128
    mode: str = MODE_BIDIRECTIONAL
    decoder: str = "lmap"  # lmap | bcjr | both
    tb_passes: int = 5
    min_bit_errors: int = 3000
    min_block_errors: int = 0
    max_frames: int = 1_000_000
    master_seed: int = 1
    threads: int = 1
    snr_convention: str = "ebn0"
    rate: float = 0.5
    extended_precision: bool = False
    measure_time: bool = True

    def __post_init__(self):
        if self.frame_len < 1:
            raise SimError("frame_len must be >= 1")
        if self.min_bit_errors < 1:
            raise SimError("min_bit_errors must be >= 1")
        if self.mode not in (MODE_FORWARD, MODE_BIDIRECTIONAL, MODE_TAILBITING):
            raise SimError(f"unknown mode {self.mode!r}")
        if self.decoder not in ("lmap", "bcjr", "both"):
            raise SimError(f"unknown decoder {self.decoder!r}")
        if self.mode == MODE_TAILBITING and self.code.termination != TAIL_BITING:
            raise SimError("tailbiting mode needs a tail-biting code")
        if self.snr_convention not in ("ebn0", "esn0"):
            raise SimError(f"unknown snr convention {self.snr_convention!r}")

    def channel(self, snr_db: float) -> ChannelParams:
        # esn0 folds the code rate out of the SNR definition
        rate = 1.0 if self.snr_convention == "esn0" else self.rate
        return ChannelParams(ebn0_db=snr_db, rate=rate, seed=self.master_seed)


@dataclass
class SnrPoint:
    snr_db: float
    frames: int = 0
    bits: int = 0
    bit_errors: int = 0
    block_errors: int = 0
    wall_ms: float = 0.0
    max_llr_deviation: float = 0.0
    mean_llr_deviation: float = 0.0
    sign_disagreements: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def bler(self) -> float:
        return self.block_errors / self.frames if self.frames else 0.0

    @property
    def ms_per_frame(self) -> float:
        return self.wall_ms / self.frames if self.frames else 0.0


@dataclass
class SimResult:
    config: SimConfig
    points: list = field(default_factory=list)


def _frame_batch(code: CodeSpec, params: ChannelParams, length: int, indices):
    """Messages and SSE frames for the given frame indices (per-frame streams).

    Terminated codes carry m extra symbol pairs; the info arrays stay at
    ``length`` and error counting ignores the closing bits.
    """
    extra = code.m if code.termination == TERMINATED else 0
    infos = np.empty((len(indices), length), dtype=np.uint8)
    frames = np.empty((len(indices), length + extra, 2))
    for row, fi in enumerate(indices):
        rng = frame_rng(params.seed ^ 0xB17F1A3E, fi)
        info = rng.integers(0, 2, length).astype(np.uint8)
        infos[row] = info
        frames[row] = make_sse_frame(encode(code, info), params, fi)
    return infos, frames


def _decode_lmap(decoder: LmapDecoder, config: SimConfig, frames):
    if config.mode == MODE_TAILBITING:
        return decoder.decode_tailbiting(frames, passes=config.tb_passes)
    mode = FORWARD_ONLY if config.mode == MODE_FORWARD else BIDIRECTIONAL
    return decoder.decode(frames, mode=mode)


def _decode_bcjr(trellis, config: SimConfig, frames):
    out = np.empty(frames.shape[:-1])
    for i in range(frames.shape[0]):
        if config.mode == MODE_TAILBITING:
            out[i] = bcjr_tailbiting(trellis, frames[i], passes=config.tb_passes)
        elif config.mode == MODE_FORWARD:
            _, out[i] = bcjr_forward(trellis, frames[i])
        else:
            out[i] = bcjr_bidirectional(trellis, frames[i],
                                        beta_boundary=BOUND_STATE0)
    return out


def _count_errors(infos, llrs):
    # positive LLR (and exact zero) decides bit 0; closing bits, when
    # present, sit past the info length and are not counted
    decisions = (llrs[..., :infos.shape[-1]] < 0).astype(np.uint8)
    errs = decisions != infos
    return int(errs.sum()), int(np.any(errs, axis=-1).sum())


def run_ber(config: SimConfig) -> SimResult:
    """Frame-error Monte Carlo until the error targets or the frame cap.

    Deterministic for a given configuration and master seed; the thread
    count only distributes fixed-size chunks of a wave.
    """
    if config.decoder == "both":
        raise SimError("run_ber takes a single decoder; use run_equivalence")
    use_lmap = config.decoder == "lmap"
    decoder = LmapDecoder(synthesize(config.code),
                          extended=config.extended_precision) if use_lmap else None
    trellis = None if use_lmap else build_trellis(config.code)
    result = SimResult(config=config)

    for snr in config.snr_list:
        params = config.channel(snr)
        point = SnrPoint(snr_db=float(snr))
        next_index = 0

        def work(indices):
            infos, frames = _frame_batch(config.code, params, config.frame_len,
                                         indices)
            t0 = time.perf_counter()
            if use_lmap:
                llrs = _decode_lmap(decoder, config, frames)
            else:
                llrs = _decode_bcjr(trellis, config, frames)
            ms = (time.perf_counter() - t0) * 1e3
            be, blke = _count_errors(infos, llrs)
            return len(indices), be, blke, ms

        while point.frames < config.max_frames:
            chunks = []
            for _ in range(CHUNKS_PER_WAVE):
                n = min(CHUNK_FRAMES, config.max_frames - next_index)
                if n <= 0:
                    break
                chunks.append(list(range(next_index, next_index + n)))
                next_index += n
            if not chunks:
                break
            if config.threads > 1 and len(chunks) > 1:
                with ThreadPoolExecutor(max_workers=config.threads) as pool:
                    outs = list(pool.map(work, chunks))
            else:
                outs = [work(c) for c in chunks]
            for frames_done, be, blke, ms in outs:
                point.frames += frames_done
                point.bits += frames_done * config.frame_len
                point.bit_errors += be
                point.block_errors += blke
                point.wall_ms += ms if config.measure_time else 0.0
            enough_bits = point.bit_errors >= config.min_bit_errors
            enough_blocks = (config.min_block_errors == 0
                             or point.block_errors >= config.min_block_errors)
            if enough_bits and enough_blocks:
                break
        result.points.append(point)
    return result


def run_equivalence(config: SimConfig) -> SimResult:
    """Run both decoders on identical SSE frames and compare their LLRs."""
    if config.decoder != "both":
        raise SimError("run_equivalence needs decoder='both'")
    decoder = LmapDecoder(synthesize(config.code), extended=True)
    trellis = build_trellis(config.code)
    result = SimResult(config=config)
    for snr in config.snr_list:
        params = config.channel(snr)
        point = SnrPoint(snr_db=float(snr))
        sum_dev = 0.0
        n_vals = 0
        for start in range(0, config.max_frames, CHUNK_FRAMES):
            indices = list(range(start, min(start + CHUNK_FRAMES,
                                            config.max_frames)))
            infos, frames = _frame_batch(config.code, params, config.frame_len,
                                         indices)
            a = _decode_lmap(decoder, config, frames)
            b = _decode_bcjr(trellis, config, frames)
            dev = np.abs(a - b)
            point.max_llr_deviation = max(point.max_llr_deviation,
                                          float(dev.max()))
            sum_dev += float(dev.sum())
            n_vals += dev.size
            point.sign_disagreements += int(np.sum((a < 0) != (b < 0)))
            point.frames += len(indices)
            point.bits += len(indices) * config.frame_len
            be, blke = _count_errors(infos, a)
            point.bit_errors += be
            point.block_errors += blke
        point.mean_llr_deviation = sum_dev / max(1, n_vals)
        result.points.append(point)
    return result


def run_timing(config: SimConfig, warmup: int = 3) -> dict:
    """Wall-clock ms/frame for both decoders on identical frames.

    Requires enough frames for a warm-up plus a measured run of at least
    ``max_frames - warmup`` decodes; flag small configs as errors.
    """
    if config.max_frames < warmup + 2:
        raise SimError("timing needs warm-up frames plus a measured run")
    decoder = LmapDecoder(synthesize(config.code),
                          extended=config.extended_precision)
    trellis = build_trellis(config.code)
    params = config.channel(config.snr_list[0])
    indices = list(range(config.max_frames))
    _, frames = _frame_batch(config.code, params, config.frame_len, indices)

    def time_one(fn):
        for i in range(warmup):
            fn(frames[i])
        t0 = time.perf_counter()
        for i in range(warmup, len(indices)):
            fn(frames[i])
        return (time.perf_counter() - t0) * 1e3 / (len(indices) - warmup)

    lmap_ms = time_one(lambda f: _decode_lmap(decoder, config, f))
    bcjr_ms = time_one(lambda f: _decode_bcjr(trellis, config, f[None]))
    return {
        "code": code_id(config.code),
        "m": config.code.m,
        "n_states": config.code.n_states,
        "frames": len(indices) - warmup,
        "lmap_ms_per_frame": lmap_ms,
        "bcjr_ms_per_frame": bcjr_ms,
        "speedup": bcjr_ms / lmap_ms if lmap_ms > 0 else float("inf"),
    }


# ---------------------------------------------------------------------------
# CSV rendering.

def code_id(code: CodeSpec) -> str:
    tb = "-tb" if code.termination == TAIL_BITING else ""
    return f"{code.poly_a.to_octal()}/{code.poly_q.to_octal()}-{code.kind}{tb}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def ber_csv(result: SimResult) -> str:
    lines = [BER_HEADER]
    for p in result.points:
        lines.append(",".join(_fmt(v) for v in (
            p.snr_db, p.frames, p.bits, p.bit_errors, p.ber,
            p.block_errors, p.bler, p.ms_per_frame)))
    return "\n".join(lines) + "\n"


def equiv_csv(result: SimResult) -> str:
    lines = [EQUIV_HEADER]
    for p in result.points:
        lines.append(",".join(_fmt(v) for v in (
            code_id(result.config.code), p.snr_db,
            p.frames, result.config.frame_len, p.max_llr_deviation,
            p.mean_llr_deviation, p.sign_disagreements)))
    return "\n".join(lines) + "\n"


def bench_csv(rows) -> str:
    lines = [BENCH_HEADER]
    for r in rows:
        lines.append(",".join(_fmt(r[k]) for k in (
            "code", "m", "n_states", "frames", "lmap_ms_per_frame",
            "bcjr_ms_per_frame", "speedup")))
    return "\n".join(lines) + "\n"
