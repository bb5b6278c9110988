"""Invariant checks runnable against any code file (``neuraldec validate``)."""
from __future__ import annotations

import numpy as np

from .channel import ebn0_to_sigma, llr_block
from .codes import LayerPlan, TannerGraph, check_syndrome, degree_profile, parse_alist, write_alist
from .decoders import Decoder
from .training import backward_edges, forward_with_trace, loss_gradients, multiloss_cross_entropy
from .weights import WeightSet


def run_checks(G: TannerGraph, frames: int = 200, seed: int = 0, ebn0: float = 2.0):
    """List of (name, passed, detail)."""
    out = []
    H = G.H
    out.append(("alist round trip", parse_alist(write_alist(H)) == H, ""))
    lam, rho = degree_profile(G)
    sums = (sum(lam.values()), sum(rho.values()))
    out.append(("degree distributions sum to 1", np.allclose(sums, 1.0), f"{sums[0]:.12f} {sums[1]:.12f}"))
    ok = all(G.edge_of(int(G.edge_check[e]), int(G.edge_var[e])) == e for e in range(G.num_edges))
    out.append(("edge id bijection", ok, f"{G.num_edges} edges"))

    llr = llr_block(G.n, ebn0_to_sigma(ebn0, H.rate), seed, range(frames))
    W1 = WeightSet.for_graphs(G, 0, 5, "nms")
    for sched in ("flooding", "layered"):
        a = Decoder(G, "minsum", None, sched, 5).decode(llr)
        b = Decoder(G, "nms", W1, sched, 5).decode(llr)
        same = np.array_equal(a.hard_bits, b.hard_bits) and np.array_equal(a.final_posteriors, b.final_posteriors)
        out.append((f"unit-weight N-NMS equals MinSum ({sched})", same, f"{frames} frames"))
        sound = all(check_syndrome(H, a.hard_bits[i]) for i in np.flatnonzero(a.converged))
        out.append((f"early stop soundness ({sched})", sound, f"{int(a.converged.sum())} converged"))

    one = LayerPlan((tuple(range(G.m)),))
    a = Decoder(G, "nms", 0.75, "flooding", 5).decode(llr)
    b = Decoder(G, "nms", 0.75, one, 5).decode(llr)
    out.append(("single-layer schedule equals flooding", np.array_equal(a.final_posteriors, b.final_posteriors), ""))

    out.append(_gradient_check(G, llr[: min(4, frames)], seed))
    return out


def _gradient_check(G: TannerGraph, llr, seed: int, probes: int = 8, h: float = 1e-5):
    rng = np.random.default_rng(seed)
    T = 3
    W = WeightSet.for_graphs(G, 1, T, "nms")
    W = W.with_values(W.beta + rng.uniform(-0.2, 0.0, W.beta.shape), W.alpha)
    tx = np.zeros(llr.shape, dtype=np.uint8)

    def loss(Wp):
        trace, _ = forward_with_trace(Decoder(G, "nms", Wp, "flooding", T), llr)
        return multiloss_cross_entropy(trace.posteriors, tx)

    dec = Decoder(G, "nms", W, "flooding", T)
    trace, _ = forward_with_trace(dec, llr)
    eg = backward_edges(dec, trace, loss_gradients(trace.posteriors, tx), "full")
    out = W.zeros_like()
    for t in range(1, T + 1):
        W.scatter(G, t, eg.beta[t - 1], eg.alpha[t - 1], out)
    worst = 0.0
    flat = W.beta.ravel()
    for i in rng.choice(flat.size, min(probes, flat.size), replace=False):
        bp, bm = flat.copy(), flat.copy()
        bp[i] += h
        bm[i] -= h
        fd = (loss(W.with_values(bp, W.alpha)) - loss(W.with_values(bm, W.alpha))) / (2 * h)
        ana = out.beta.ravel()[i]
        worst = max(worst, abs(fd - ana) / max(1.0, abs(ana)))
    return ("gradient vs finite differences", worst < 1e-4, f"max rel err {worst:.2e}")
