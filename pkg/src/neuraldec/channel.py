"""BPSK over AWGN: noise generation, channel LLRs and training batches.

Noise is reproducible frame by frame. Frame ``i`` of a run seeded with
``seed`` draws its uniforms from PCG64 seeded by ``SeedSequence([seed, i])``
(SeedSequence hashes the pair, so streams are independent) and turns them
into Gaussians with the Box-Muller transform. Both pieces are fixed
algorithms, so a recorded (seed, frame index) regenerates the frame exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .codes import ParityCheckMatrix


def ebn0_to_sigma(ebn0_db: float, rate: float) -> float:
    """Noise standard deviation for unit-energy BPSK at the given Eb/N0."""
    if not 0 < rate <= 1:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    return float((2.0 * rate * 10.0 ** (ebn0_db / 10.0)) ** -0.5)


def frame_rng(seed: int, index: int, stream: int | None = None) -> np.random.Generator:
    """Generator of one frame; ``stream`` separates e.g. the points of a sweep."""
    key = [int(seed), int(index)] if stream is None else [int(seed), int(stream), int(index)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def box_muller(rng: np.random.Generator, size: int) -> np.ndarray:
    pairs = (size + 1) // 2
    u = rng.random((2, pairs))
    r = np.sqrt(-2.0 * np.log1p(-u[0]))  # 1 - u in (0, 1]
    theta = 2.0 * np.pi * u[1]
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:size]


@dataclass
class ChannelSample:
    llr: np.ndarray
    tx_bits: np.ndarray
    ebn0_db: float
    seed: int
    index: int = 0
    code: int = 0


def awgn_llr(bits, sigma: float, seed: int, index: int = 0, ebn0_db: float = float("nan")) -> ChannelSample:
    """y = (1 - 2 bit) + noise, llr = 2 y / sigma^2."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    bits = np.asarray(bits, dtype=np.uint8)
    noise = box_muller(frame_rng(seed, index), bits.size)
    y = (1.0 - 2.0 * bits) + sigma * noise
    return ChannelSample(2.0 * y / sigma**2, bits, ebn0_db, seed, index)


def llr_block(n: int, sigma: float, seed: int, indices: Sequence[int], stream: int | None = None) -> np.ndarray:
    """All-zero-codeword LLRs for a block of frame indices, one row per frame."""
    out = np.empty((len(indices), n))
    for r, i in enumerate(indices):
        out[r] = 2.0 * (1.0 + sigma * box_muller(frame_rng(seed, i, stream), n)) / sigma**2
    return out


# ------------------------------------------------------------------ batches

def ebn0_grid(lo: float, hi: float, step: float = 0.1) -> np.ndarray:
    if hi < lo:
        raise ValueError("empty Eb/N0 range")
    count = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(count), 10)


@dataclass
class BatchSpec:
    batch_size: int
    ebn0_range: tuple[float, float]
    codes: list[ParityCheckMatrix] = field(default_factory=list)
    step: float = 0.1

    def __post_init__(self):
        lo, hi = self.ebn0_range
        if lo > hi:
            raise ValueError("ebn0_range must satisfy lo <= hi")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")


def batch_plan(spec: BatchSpec) -> list[tuple[int, float]]:
    """(code index, Eb/N0) for each slot of a batch.

    Codes rotate fastest; each code walks the 0.1 dB grid round-robin, so
    every code sees the grid as evenly as the batch size allows.
    """
    if not spec.codes:
        raise ValueError("BatchSpec needs at least one code")
    grid = ebn0_grid(*spec.ebn0_range, step=spec.step)
    nc = len(spec.codes)
    return [(b % nc, float(grid[(b // nc) % len(grid)])) for b in range(spec.batch_size)]


def training_batch(spec: BatchSpec, seed: int, batch_index: int = 0) -> list[ChannelSample]:
    """All-zero codewords with Eb/N0 spread evenly over the batch.

    Frame indices ``batch_index * batch_size + b`` keep batches of one run
    on disjoint noise streams.
    """
    samples = []
    for b, (ci, ebn0) in enumerate(batch_plan(spec)):
        H = spec.codes[ci]
        idx = batch_index * spec.batch_size + b
        s = awgn_llr(np.zeros(H.n, dtype=np.uint8), ebn0_to_sigma(ebn0, H.rate), seed, idx, ebn0)
        s.code = ci
        samples.append(s)
    return samples


def calibrate_training_range(H: ParityCheckMatrix, ebn0_grid_db, frames: int = 2000, seed: int = 0,
                             max_iter: int = 10, factor: float = 0.7, schedule="flooding",
                             fer_lo: float = 1e-3, fer_hi: float = 1e-2):
    """Eb/N0 points where an NMS decoder (default factor 0.7) has FER in [fer_lo, fer_hi].

    Returns ``(points, fers)``: the qualifying grid points and the FER
    measured at every grid point.
    """
    from .decoders import Decoder
    from .codes import build_tanner_graph

    G = build_tanner_graph(H)
    dec = Decoder(G, "nms", factor, schedule=schedule, max_iter=max_iter)
    fers = []
    for ebn0 in ebn0_grid_db:
        sigma = ebn0_to_sigma(ebn0, H.rate)
        llr = llr_block(H.n, sigma, seed, range(frames))
        res = dec.decode(llr)
        fers.append(float(np.mean(res.hard_bits.any(axis=1))))
    fers = np.asarray(fers)
    pts = [float(e) for e, f in zip(ebn0_grid_db, fers) if fer_lo <= f <= fer_hi]
    return pts, fers
