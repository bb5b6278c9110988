"""Flooding and layered message-passing decoders over a batch of frames.

Every decoder here works on 2-D arrays ``(frames, edges)``. A flooding
iteration is run as a single layer holding every check: V2C messages are
``posterior - own C2V`` and posteriors are recomputed from the channel LLR
plus the current C2V messages, so a one-layer layered schedule performs
exactly the same arithmetic as flooding.

Messages stored per edge are the values that enter variable-node sums:
``alpha * beta * u*`` for the normalized family and
``sign * relu(min - beta - alpha)`` for the offset family.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from numba import njit

from .codes import LayerPlan, TannerGraph, default_layer_plan
from .weights import WeightSet

BP_CLAMP = 30.0


# ------------------------------------------------------------ check kernel

def check_node_minsum(incoming_mags, incoming_signs=None):
    """min1/pos1, min2/pos2 and sign product of one check's incoming messages.

    Ties resolve to the lowest index. Signs are +1/-1 (zero counts as +1).
    """
    mags = np.asarray(incoming_mags, dtype=float)
    if mags.ndim != 1 or mags.size < 2:
        raise ValueError("a check node needs at least two incoming messages")
    signs = np.ones(mags.size) if incoming_signs is None else np.asarray(incoming_signs, dtype=float)
    pos1 = int(np.argmin(mags))  # argmin returns the first occurrence
    rest = mags.copy()
    rest[pos1] = np.inf
    pos2 = int(np.argmin(rest))
    sign_product = -1 if np.count_nonzero(signs < 0) % 2 else 1
    return float(mags[pos1]), pos1, float(mags[pos2]), pos2, sign_product


def weighted_oms_update(min_excl, beta_off, alpha_off=0.0):
    return np.maximum(min_excl - beta_off - alpha_off, 0.0)


@dataclass(eq=False)
class Layout:
    """Index arrays for one layer (a set of checks) of a Tanner graph."""
    edges: np.ndarray       # edge ids, check-contiguous
    starts: np.ndarray      # offset of each check inside ``edges``
    seg: np.ndarray         # local check index of each local edge
    checks: np.ndarray
    edge_var: np.ndarray
    vars: np.ndarray        # variables touched by the layer
    var_edges: np.ndarray   # all edges of ``vars``, grouped by variable
    var_starts: np.ndarray
    unique_vars: bool       # no variable appears twice in the layer

    @classmethod
    def build(cls, G: TannerGraph, checks) -> "Layout":
        checks = np.asarray(checks, dtype=np.int64)
        degs = G.check_degrees[checks]
        if (degs < 2).any():
            raise ValueError("MinSum decoding needs every check degree >= 2")
        edges = np.concatenate([np.arange(G.check_start[c], G.check_start[c + 1]) for c in checks])
        starts = np.zeros(len(checks), dtype=np.int64)
        np.cumsum(degs[:-1], out=starts[1:])
        seg = np.repeat(np.arange(len(checks)), degs)
        ev = G.edge_var[edges]
        vars_ = np.unique(ev)
        vstart, vdeg = G.var_start[vars_], G.var_degrees[vars_]
        var_edges = np.concatenate([G.var_edges_sorted[s:s + d] for s, d in zip(vstart, vdeg)])
        var_starts = np.zeros(len(vars_), dtype=np.int64)
        np.cumsum(vdeg[:-1], out=var_starts[1:])
        return cls(edges, starts, seg, checks, ev, vars_, var_edges, var_starts, len(vars_) == len(ev))

    @cached_property
    def local_index(self) -> np.ndarray:
        return np.arange(len(self.edges))


def layouts_for(G: TannerGraph, plan: LayerPlan | None) -> list[Layout]:
    key = None if plan is None else plan.layers
    cache = G.__dict__.setdefault("_layout_cache", {})
    if key not in cache:
        if plan is None:
            cache[key] = [Layout.build(G, np.arange(G.m))]
        else:
            plan.validate(G.m)
            cache[key] = [Layout.build(G, layer) for layer in plan.layers]
    return cache[key]


@dataclass
class CheckStats:
    neg: np.ndarray     # (B, Ee) sign bit of each incoming V2C message
    min1: np.ndarray    # (B, checks)
    min2: np.ndarray
    pos1: np.ndarray    # (B, checks) local edge index in the layout
    pos2: np.ndarray
    parity: np.ndarray  # (B, checks) True when the sign product is negative

    def excl_magnitude(self, L: Layout) -> np.ndarray:
        """min over the other edges of the check, per edge."""
        at_pos1 = L.local_index == self.pos1[:, L.seg]
        return np.where(at_pos1, self.min2[:, L.seg], self.min1[:, L.seg])

    def excl_negative(self, L: Layout) -> np.ndarray:
        return self.parity[:, L.seg] ^ self.neg


def check_stats_numpy(v2c: np.ndarray, L: Layout) -> CheckStats:
    """Reference implementation of ``check_stats`` with numpy segment reductions."""
    mag = np.abs(v2c)
    neg = v2c < 0
    big = len(L.edges)
    min1 = np.minimum.reduceat(mag, L.starts, axis=1)
    cand = np.where(mag == min1[:, L.seg], L.local_index, big)
    pos1 = np.minimum.reduceat(cand, L.starts, axis=1)
    np.put_along_axis(mag, pos1, np.inf, axis=1)
    min2 = np.minimum.reduceat(mag, L.starts, axis=1)
    cand = np.where(mag == min2[:, L.seg], L.local_index, big)
    pos2 = np.minimum.reduceat(cand, L.starts, axis=1)
    parity = (np.add.reduceat(neg.view(np.uint8), L.starts, axis=1) & 1).astype(bool)
    return CheckStats(neg, min1, min2, pos1, pos2, parity)


@njit(cache=True)
def _stats_kernel(v2c, starts, total):
    B, Ee = v2c.shape
    nc = starts.shape[0]
    min1 = np.empty((B, nc))
    min2 = np.empty((B, nc))
    pos1 = np.empty((B, nc), dtype=np.int64)
    pos2 = np.empty((B, nc), dtype=np.int64)
    parity = np.empty((B, nc), dtype=np.bool_)
    neg = np.empty((B, Ee), dtype=np.bool_)
    for b in range(B):
        for c in range(nc):
            lo = starts[c]
            hi = starts[c + 1] if c + 1 < nc else total
            m1 = np.inf
            m2 = np.inf
            p1 = -1
            p2 = -1
            par = False
            for e in range(lo, hi):
                x = v2c[b, e]
                ng = x < 0
                neg[b, e] = ng
                par ^= ng
                a = abs(x)
                # strict comparisons keep the lowest index on ties
                if a < m1:
                    m2 = m1
                    p2 = p1
                    m1 = a
                    p1 = e
                elif a < m2:
                    m2 = a
                    p2 = e
            min1[b, c] = m1
            min2[b, c] = m2
            pos1[b, c] = p1
            pos2[b, c] = p2
            parity[b, c] = par
    return neg, min1, min2, pos1, pos2, parity


def check_stats(v2c: np.ndarray, L: Layout) -> CheckStats:
    """min1/min2/pos1/pos2, sign bits and sign parity of every check in the layer."""
    return CheckStats(*_stats_kernel(np.ascontiguousarray(v2c, dtype=np.float64), L.starts, len(L.edges)))


def syndrome_ok(G: TannerGraph, hard: np.ndarray) -> np.ndarray:
    """Per-frame flag: every check satisfied by the hard decisions."""
    bits = hard[:, G.edge_var].view(np.uint8)
    par = np.add.reduceat(bits, G.check_start[:-1], axis=1) & 1
    return ~par.any(axis=1)


# ------------------------------------------------------------------ results

@dataclass
class DecodeResult:
    hard_bits: np.ndarray
    converged: np.ndarray
    iterations_used: np.ndarray
    final_posteriors: np.ndarray
    trajectory: np.ndarray | None = None  # (iterations, frames, n); NaN after a frame stops

    def squeeze(self) -> "DecodeResult":
        traj = None if self.trajectory is None else self.trajectory[:, 0]
        return DecodeResult(self.hard_bits[0], bool(self.converged[0]), int(self.iterations_used[0]),
                            self.final_posteriors[0], traj)


# ------------------------------------------------------------------ engine

FAMILY_CODE = {"minsum": 0, "nms": 1, "oms": 2}
_EMPTY = np.empty(0)


@njit(cache=True)
def _layer_update(post, u, llr, edges, edge_var, starts, vars_, var_edges, var_starts, unique,
                  fam, beta, alpha, tau):
    """One layer for every frame: V2C, check statistics, new C2V, posteriors.

    Mirrors ``Decoder.c2v`` operation for operation, so results are
    bit-identical to the numpy formulation.
    """
    B = post.shape[0]
    Ee = edges.shape[0]
    nc = starts.shape[0]
    v2c = np.empty((B, Ee))
    neg = np.empty((B, Ee), dtype=np.bool_)
    min1 = np.empty((B, nc))
    min2 = np.empty((B, nc))
    pos1 = np.empty((B, nc), dtype=np.int64)
    pos2 = np.empty((B, nc), dtype=np.int64)
    parity = np.empty((B, nc), dtype=np.bool_)
    for b in range(B):
        for c in range(nc):
            lo = starts[c]
            hi = starts[c + 1] if c + 1 < nc else Ee
            m1 = np.inf
            m2 = np.inf
            p1 = -1
            p2 = -1
            par = False
            for e in range(lo, hi):
                x = post[b, edge_var[e]] - u[b, edges[e]]
                v2c[b, e] = x
                ng = x < 0
                neg[b, e] = ng
                par ^= ng
                a = abs(x)
                # strict comparisons keep the lowest index on ties
                if a < m1:
                    m2 = m1
                    p2 = p1
                    m1 = a
                    p1 = e
                elif a < m2:
                    m2 = a
                    p2 = e
            min1[b, c] = m1
            min2[b, c] = m2
            pos1[b, c] = p1
            pos2[b, c] = p2
            parity[b, c] = par
            for e in range(lo, hi):
                m = m2 if e == p1 else m1
                if tau.shape[0] > 0:
                    m = tau[np.searchsorted(tau, m, side="right") - 1]
                sneg = par ^ neg[b, e]
                if fam == 0:
                    val = -m if sneg else m
                elif fam == 1:
                    val = (-m if sneg else m) * beta[e] * alpha[e]
                else:
                    mag = max(m - beta[e] - alpha[e], 0.0)
                    val = -mag if sneg else mag
                u[b, edges[e]] = val
        if unique:
            for e in range(Ee):
                post[b, edge_var[e]] = v2c[b, e] + u[b, edges[e]]
        else:
            for i in range(vars_.shape[0]):
                acc = 0.0
                for k in range(var_starts[i], var_starts[i + 1] if i + 1 < vars_.shape[0] else var_edges.shape[0]):
                    acc += u[b, var_edges[k]]
                post[b, vars_[i]] = llr[b, vars_[i]] + acc
    return v2c, (neg, min1, min2, pos1, pos2, parity)


def propagate(G: TannerGraph, layouts: list[Layout], llr: np.ndarray, max_iter: int, layer_params: Callable,
              early_stop: bool = True, record_trajectory: bool = False,
              on_layer: Callable | None = None) -> DecodeResult:
    """Run ``max_iter`` iterations of layer-by-layer message passing.

    ``layer_params(t, r, layout)`` gives (family code, beta, alpha, tau) for
    the layer's edges; empty arrays mean unweighted or unquantized.
    ``on_layer(t, r, stats, v2c)`` observes each layer's inputs.
    """
    llr = np.ascontiguousarray(llr, dtype=float)
    B = llr.shape[0]
    post = llr.copy()
    u = np.zeros((B, G.num_edges))
    out_post = llr.copy()
    out_iter = np.full(B, max_iter, dtype=np.int64)
    out_conv = np.zeros(B, dtype=bool)
    traj = np.full((max_iter, B, G.n), np.nan) if record_trajectory else None
    active = np.arange(B)
    llr_a = llr
    if early_stop:
        done = syndrome_ok(G, post < 0)
        out_conv[done], out_iter[done] = True, 0
        keep = ~done
        active, post, u, llr_a = active[keep], post[keep], u[keep], llr_a[keep]
    for t in range(1, max_iter + 1):
        if len(active) == 0:
            break
        for r, L in enumerate(layouts):
            fam, beta, alpha, tau = layer_params(t, r, L)
            v2c, st = _layer_update(post, u, llr_a, L.edges, L.edge_var, L.starts, L.vars, L.var_edges,
                                    L.var_starts, L.unique_vars, fam, beta, alpha, tau)
            if on_layer is not None:
                on_layer(t, r, CheckStats(*st), v2c)
        if traj is not None:
            traj[t - 1, active] = post
        out_post[active] = post
        if early_stop:
            done = syndrome_ok(G, post < 0)
            out_conv[active[done]] = True
            out_iter[active[done]] = t
            keep = ~done
            if not keep.all():
                active, post, u, llr_a = active[keep], post[keep], u[keep], llr_a[keep]
    if not early_stop:
        out_conv = syndrome_ok(G, out_post < 0)
    return DecodeResult((out_post < 0).astype(np.uint8), out_conv, out_iter, out_post, traj)


def magnitude_c2v(family: str, excl_mag: np.ndarray, neg: np.ndarray, beta, alpha) -> np.ndarray:
    """Stored C2V messages from the excluded-min magnitude and outgoing sign."""
    if family == "minsum":
        return np.where(neg, -excl_mag, excl_mag)
    if family == "nms":
        return np.where(neg, -excl_mag, excl_mag) * beta * alpha
    if family == "oms":
        mag = weighted_oms_update(excl_mag, beta, alpha)
        return np.where(neg, -mag, mag)
    raise ValueError(f"unknown family {family!r}")


class Decoder:
    """MinSum-family decoder: ``family`` in minsum | nms | oms | bp.

    ``weights`` is a WeightSet, a scalar (normalisation factor for nms,
    offset for oms) or None. ``schedule`` is "flooding", "layered" (default
    layer plan) or an explicit LayerPlan. ``quantizers`` optionally maps an
    iteration to a QuantizerParams applied to C2V magnitudes before
    weighting (floating-point stand-in for the low-bit message path).
    """

    def __init__(self, G: TannerGraph, family: str = "minsum", weights=None, schedule="flooding",
                 max_iter: int = 10, quantizers=None):
        if family not in ("minsum", "nms", "oms", "bp"):
            raise ValueError(f"unknown family {family!r}")
        self.G = G
        self.family = family
        self.max_iter = max_iter
        if family not in ("nms", "oms"):
            weights = None  # minsum and bp take no weights
        if isinstance(weights, (int, float)):
            weights = WeightSet.constant(G, float(weights), max_iter, family if family != "minsum" else "nms")
        if weights is not None and family in ("nms", "oms") and weights.family != family:
            raise ValueError(f"{weights.family} weights given to a {family} decoder")
        if family in ("nms", "oms") and weights is None:
            weights = WeightSet.constant(G, 1.0 if family == "nms" else 0.0, max_iter, family)
        if weights is not None and family in ("nms", "oms"):
            weights = weights.with_iterations(max_iter) if weights.I_T != max_iter else weights
            weights.key_index(G)  # fail early on unresolvable keys
        self.weights = weights if family in ("nms", "oms") else None
        if schedule == "flooding" or schedule is None:
            self.plan = None
        elif schedule == "layered":
            self.plan = default_layer_plan(G)
        elif isinstance(schedule, LayerPlan):
            self.plan = schedule
        else:
            self.plan = default_layer_plan(G, schedule)
        self.quantizers = quantizers
        self._edge_w: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._layer_w: dict = {}

    @property
    def schedule(self) -> str:
        return "flooding" if self.plan is None else "layered"

    @property
    def layouts(self) -> list[Layout]:
        return layouts_for(self.G, self.plan)

    def edge_weights(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        row = self.weights.row(t)
        if row not in self._edge_w:
            self._edge_w[row] = self.weights.edge_weights(self.G, t)
        return self._edge_w[row]

    def excl_magnitude(self, t: int, L: Layout, stats: CheckStats) -> np.ndarray:
        m = stats.excl_magnitude(L)
        if self.quantizers is not None:
            q = self.quantizers.for_iteration(t)
            m = q.requantize(m)
        return m

    def layer_params(self, t: int, r: int, L: Layout):
        key = (t if self.weights is None else self.weights.row(t), r)
        if key not in self._layer_w:
            if self.family == "minsum":
                beta = alpha = _EMPTY
            else:
                beta, alpha = self.edge_weights(t)
                beta, alpha = np.ascontiguousarray(beta[L.edges]), np.ascontiguousarray(alpha[L.edges])
            self._layer_w[key] = (beta, alpha)
        tau = _EMPTY if self.quantizers is None else self.quantizers.for_iteration(t).thresholds
        return (FAMILY_CODE[self.family], *self._layer_w[key], tau)

    def c2v(self, t: int, r: int, L: Layout, stats: CheckStats) -> np.ndarray:
        m = self.excl_magnitude(t, L, stats)
        neg = stats.excl_negative(L)
        if self.family == "minsum":
            return magnitude_c2v("minsum", m, neg, None, None)
        beta, alpha = self.edge_weights(t)
        return magnitude_c2v(self.family, m, neg, beta[L.edges], alpha[L.edges])

    def decode(self, llr, early_stop: bool = True, record_trajectory: bool = False,
               on_layer=None) -> DecodeResult:
        llr = np.asarray(llr, dtype=float)
        single = llr.ndim == 1
        if single:
            llr = llr[None, :]
        if llr.shape[1] != self.G.n:
            raise ValueError(f"expected {self.G.n} LLRs per frame, got {llr.shape[1]}")
        if self.family == "bp":
            res = bp_propagate(self.G, llr, self.max_iter, early_stop, record_trajectory)
        else:
            res = propagate(self.G, self.layouts, llr, self.max_iter, self.layer_params, early_stop,
                            record_trajectory, on_layer)
        return res.squeeze() if single else res


def decode_flooding(G: TannerGraph, variant: Decoder | str, llr, max_iter: int | None = None,
                    weights=None, **kw) -> DecodeResult:
    if isinstance(variant, Decoder):
        variant = Decoder(G, variant.family, variant.weights, "flooding", max_iter or variant.max_iter,
                          variant.quantizers)
    else:
        variant = Decoder(G, variant, weights, "flooding", max_iter or 10)
    return variant.decode(llr, **kw)


def decode_layered(G: TannerGraph, variant: Decoder | str, llr, max_iter: int | None = None,
                   plan: LayerPlan | None = None, weights=None, **kw) -> DecodeResult:
    plan = plan if plan is not None else default_layer_plan(G)
    if isinstance(variant, Decoder):
        variant = Decoder(G, variant.family, variant.weights, plan, max_iter or variant.max_iter,
                          variant.quantizers)
    else:
        variant = Decoder(G, variant, weights, plan, max_iter or 10)
    return variant.decode(llr, **kw)


# --------------------------------------------------------------------- BP

def bp_propagate(G: TannerGraph, llr: np.ndarray, max_iter: int, early_stop: bool = True,
                 record_trajectory: bool = False) -> DecodeResult:
    """Flooding sum-product (tanh rule) with messages clamped to +-30."""
    L = layouts_for(G, None)[0]

    def c2v(t, r, L_, v2c):
        x = np.clip(v2c, -BP_CLAMP, BP_CLAMP)
        th = np.tanh(x / 2.0)
        neg = th < 0
        logmag = np.log(np.maximum(np.abs(th), 1e-300))
        tot = np.add.reduceat(logmag, L.starts, axis=1)[:, L.seg]
        parity = (np.add.reduceat(neg.view(np.uint8), L.starts, axis=1) & 1).astype(bool)[:, L.seg]
        prod = np.exp(tot - logmag)
        prod = np.minimum(prod, 1.0 - 1e-15)
        mag = 2.0 * np.arctanh(prod)
        return np.clip(np.where(parity ^ neg, -mag, mag), -BP_CLAMP, BP_CLAMP)

    llr = np.asarray(llr, dtype=float)
    B = llr.shape[0]
    post = llr.copy()
    u = np.zeros((B, G.num_edges))
    out_post = llr.copy()
    out_iter = np.full(B, max_iter, dtype=np.int64)
    out_conv = np.zeros(B, dtype=bool)
    traj = np.full((max_iter, B, G.n), np.nan) if record_trajectory else None
    active = np.arange(B)
    llr_a = llr
    if early_stop:
        done = syndrome_ok(G, post < 0)
        out_conv[done], out_iter[done] = True, 0
        active, post, u, llr_a = active[~done], post[~done], u[~done], llr_a[~done]
    for t in range(1, max_iter + 1):
        if len(active) == 0:
            break
        v2c = post[:, L.edge_var] - u[:, L.edges]
        u[:, L.edges] = c2v(t, 0, L, v2c)
        post[:, L.vars] = llr_a[:, L.vars] + np.add.reduceat(u[:, L.var_edges], L.var_starts, axis=1)
        if traj is not None:
            traj[t - 1, active] = post
        out_post[active] = post
        if early_stop:
            done = syndrome_ok(G, post < 0)
            out_conv[active[done]] = True
            out_iter[active[done]] = t
            active, post, u, llr_a = active[~done], post[~done], u[~done], llr_a[~done]
    if not early_stop:
        out_conv = syndrome_ok(G, out_post < 0)
    return DecodeResult((out_post < 0).astype(np.uint8), out_conv, out_iter, out_post, traj)


def bp_decode(G: TannerGraph, llr, max_iter: int = 50, **kw) -> DecodeResult:
    return Decoder(G, "bp", max_iter=max_iter).decode(llr, **kw)
