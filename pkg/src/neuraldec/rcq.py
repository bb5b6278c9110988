"""Low-bit reconstruction-computation-quantization (RCQ) decoding.

A C2V message leaves the check node as a b_c-bit code: a sign bit plus a
magnitude index from a power-function quantizer with thresholds
``tau_j = C * (j / 2**(b_c-1)) ** gamma``. The variable node reconstructs
it to ``tau_j``, applies the trained weight, and adds it on a uniform
b_v-bit grid with ``v_step`` LLR units per lsb. All b_v values saturate.

Fixed-point arrays are stored as integer-valued float64 (exact well beyond
any b_v used here), which lets the float min-sum kernels run unchanged.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .codes import LayerPlan, TannerGraph, default_layer_plan
from .decoders import DecodeResult, layouts_for, check_stats, syndrome_ok
from .weights import WeightSet


# -------------------------------------------------------------- quantizers

@dataclass(frozen=True)
class QuantizerParams:
    C: float
    gamma: float
    b_c: int
    t_lo: int = 1
    t_hi: int | None = None

    def __post_init__(self):
        if self.C <= 0 or self.gamma <= 0:
            raise ValueError("C and gamma must be positive")
        if self.b_c < 2:
            raise ValueError("b_c must be at least 2")
        if self.t_hi is not None and self.t_hi < self.t_lo:
            raise ValueError("empty iteration span")

    @property
    def levels(self) -> int:
        return 2 ** (self.b_c - 1)

    @property
    def thresholds(self) -> np.ndarray:
        """tau_0 .. tau_{levels-1}; tau_0 = 0."""
        j = np.arange(self.levels)
        return self.C * (j / self.levels) ** self.gamma

    def index(self, mag) -> np.ndarray:
        """Magnitude index j with tau_j <= |x| < tau_{j+1}, saturating at the top."""
        tau = self.thresholds
        return np.searchsorted(tau, np.abs(mag), side="right") - 1

    def requantize(self, mag) -> np.ndarray:
        """tau at the index of ``mag``: the float value a b_c-bit message carries."""
        return self.thresholds[self.index(mag)]

    def covers(self, t: int) -> bool:
        return self.t_lo <= t and (self.t_hi is None or t <= self.t_hi)


@dataclass(frozen=True)
class QCode:
    msb: int   # 1 for negative
    mag: int


def quantize(x, q: QuantizerParams):
    """Sign bit and magnitude index. Scalars give a QCode, arrays a pair."""
    msb = (np.asarray(x) < 0).astype(np.uint8)
    mag = q.index(x)
    if np.ndim(x) == 0:
        return QCode(int(msb), int(mag))
    return msb, mag


def reconstruct(d, q: QuantizerParams, mag=None):
    """(1 - 2 msb) * tau_mag. Accepts a QCode or (msb, mag) arrays."""
    if isinstance(d, QCode):
        return float((1 - 2 * d.msb) * q.thresholds[d.mag])
    msb = np.asarray(d)
    return (1.0 - 2.0 * msb) * q.thresholds[np.asarray(mag)]


def ste_gradient(x, q: QuantizerParams, upstream_grad):
    """Straight-through estimate: pass the gradient inside [-C, C], zero outside."""
    out = np.where(np.abs(x) <= q.C, upstream_grad, 0.0)
    return out if out.ndim else float(out)


@dataclass
class QuantizerSchedule:
    """Quantizer pairs whose iteration spans partition 1..I_T."""
    pairs: list[QuantizerParams]
    I_T: int

    def __post_init__(self):
        pairs = sorted(self.pairs, key=lambda q: q.t_lo)
        nxt = 1
        fixed = []
        for i, q in enumerate(pairs):
            hi = q.t_hi if q.t_hi is not None else (pairs[i + 1].t_lo - 1 if i + 1 < len(pairs) else self.I_T)
            if q.t_lo != nxt:
                raise ValueError(f"quantizer spans leave a gap or overlap at iteration {nxt}")
            fixed.append(QuantizerParams(q.C, q.gamma, q.b_c, q.t_lo, hi))
            nxt = hi + 1
        if nxt != self.I_T + 1:
            raise ValueError(f"quantizer spans cover 1..{nxt - 1}, need 1..{self.I_T}")
        if len({q.b_c for q in fixed}) > 1:
            raise ValueError("all quantizers of a decoder share one b_c")
        self.pairs = fixed

    def for_iteration(self, t: int) -> QuantizerParams:
        for q in self.pairs:
            if q.covers(t):
                return q
        raise ValueError(f"no quantizer covers iteration {t}")

    @property
    def C_max(self) -> float:
        return max(q.C for q in self.pairs)

    @property
    def b_c(self) -> int:
        return self.pairs[0].b_c


@dataclass(frozen=True)
class FixedPointSpec:
    b_c: int
    b_v: int
    v_step: float

    def __post_init__(self):
        if self.b_c < 2 or self.b_v < self.b_c:
            raise ValueError("need b_v >= b_c >= 2")
        if self.v_step <= 0:
            raise ValueError("v_step must be positive")

    @classmethod
    def for_quantizers(cls, qs: QuantizerSchedule, b_v: int) -> "FixedPointSpec":
        """Default grid: v_step = C_max / 2**(b_v-2)."""
        return cls(qs.b_c, b_v, qs.C_max / 2 ** (b_v - 2))

    @property
    def lo(self) -> int:
        return -(2 ** (self.b_v - 1))

    @property
    def hi(self) -> int:
        return 2 ** (self.b_v - 1) - 1

    def sat(self, a):
        return np.clip(a, self.lo, self.hi)

    def to_grid(self, x):
        """Nearest grid integer (half to even), saturated."""
        return self.sat(np.rint(np.asarray(x, dtype=float) / self.v_step))


def quantize_weights(W: WeightSet, fx: FixedPointSpec) -> WeightSet:
    """Round every weight to the nearest multiple of v_step inside the b_v range."""
    return W.with_values(fx.to_grid(W.beta) * fx.v_step, fx.to_grid(W.alpha) * fx.v_step)


# ---------------------------------------------------------------- file I/O

def dump_quantizers(qs: QuantizerSchedule, fx: FixedPointSpec | None = None) -> str:
    d = {"I_T": qs.I_T,
         "quantizers": [{"t_lo": q.t_lo, "t_hi": q.t_hi, "C": q.C, "gamma": q.gamma, "b_c": q.b_c} for q in qs.pairs]}
    if fx is not None:
        d["fixed_point"] = {"b_c": fx.b_c, "b_v": fx.b_v, "v_step": fx.v_step}
    return json.dumps(d, indent=1) + "\n"


def load_quantizers(text: str) -> tuple[QuantizerSchedule, FixedPointSpec | None]:
    d = json.loads(text)
    pairs = [QuantizerParams(float(e["C"]), float(e["gamma"]), int(e["b_c"]), int(e["t_lo"]),
                             None if e.get("t_hi") is None else int(e["t_hi"])) for e in d["quantizers"]]
    I_T = int(d.get("I_T") or max(q.t_hi or q.t_lo for q in pairs))
    qs = QuantizerSchedule(pairs, I_T)
    fx = None
    if "fixed_point" in d:
        f = d["fixed_point"]
        fx = FixedPointSpec(int(f["b_c"]), int(f["b_v"]), float(f["v_step"]))
    return qs, fx


# ----------------------------------------------------------------- decoders

QuantizerLookup = Callable[[int, int], QuantizerParams]


def _rcq_layered(G: TannerGraph, plan: LayerPlan | None, llr, I_T: int, lookup: QuantizerLookup,
                 fx: FixedPointSpec, family: str, W: WeightSet | None, early_stop: bool = True,
                 record_trajectory: bool = False) -> DecodeResult:
    llr = np.atleast_2d(np.asarray(llr, dtype=float))
    layouts = layouts_for(G, plan)
    B = llr.shape[0]
    llr_q = fx.to_grid(llr)
    post = llr_q.copy()
    u = np.zeros((B, G.num_edges))
    out_post = llr_q.copy()
    out_iter = np.full(B, I_T, dtype=np.int64)
    out_conv = np.zeros(B, dtype=bool)
    traj = np.full((I_T, B, G.n), np.nan) if record_trajectory else None
    active = np.arange(B)
    llr_a = llr_q
    weights = {}
    if early_stop:
        done = syndrome_ok(G, post < 0)
        out_conv[done], out_iter[done] = True, 0
        active, post, u, llr_a = active[~done], post[~done], u[~done], llr_a[~done]
    for t in range(1, I_T + 1):
        if len(active) == 0:
            break
        if W is not None and t not in weights:
            weights[t] = W.edge_weights(G, t)
        for r, L in enumerate(layouts):
            q = lookup(t, r)
            if q.b_c != fx.b_c:
                raise ValueError("quantizer width differs from the fixed-point b_c")
            v2c = fx.sat(post[:, L.edge_var] - u[:, L.edges])
            st = check_stats(v2c, L)
            mag = q.requantize(st.excl_magnitude(L) * fx.v_step)
            if W is not None:
                beta, alpha = weights[t][0][L.edges], weights[t][1][L.edges]
                mag = mag * beta * alpha if family == "nms" else np.maximum(mag - beta - alpha, 0.0)
            mag = fx.to_grid(mag)
            unew = np.where(st.excl_negative(L), -mag, mag)
            u[:, L.edges] = unew
            if L.unique_vars:
                post[:, L.edge_var] = fx.sat(v2c + unew)
            else:
                post[:, L.vars] = fx.sat(llr_a[:, L.vars] + np.add.reduceat(u[:, L.var_edges], L.var_starts, axis=1))
        if traj is not None:
            traj[t - 1, active] = post * fx.v_step
        out_post[active] = post
        if early_stop:
            done = syndrome_ok(G, post < 0)
            out_conv[active[done]] = True
            out_iter[active[done]] = t
            active, post, u, llr_a = active[~done], post[~done], u[~done], llr_a[~done]
    if not early_stop:
        out_conv = syndrome_ok(G, out_post < 0)
    return DecodeResult((out_post < 0).astype(np.uint8), out_conv, out_iter, out_post * fx.v_step, traj)


def wrcq_decode_layered(G: TannerGraph, W: WeightSet | None, qlist: QuantizerSchedule | Sequence[QuantizerParams],
                        fx: FixedPointSpec, llr, I_T: int, plan: LayerPlan | None = None,
                        family: str | None = None, **kw) -> DecodeResult:
    """W-OMS-RCQ (offset weights) or W-NMS-RCQ (multiplicative weights).

    ``W=None`` runs with neutral weights. The family is taken from ``W``
    unless given. Weights are used as given; pass them through
    ``quantize_weights`` first for a fully fixed-point decoder.
    """
    qs = qlist if isinstance(qlist, QuantizerSchedule) else QuantizerSchedule(list(qlist), I_T)
    if qs.I_T != I_T:
        qs = QuantizerSchedule(qs.pairs, I_T)
    plan = plan if plan is not None else default_layer_plan(G)
    fam = family or (W.family if W is not None else "oms")
    if W is not None:
        W = W.with_iterations(I_T) if W.I_T != I_T else W
        W.key_index(G)
    single = np.ndim(llr) == 1
    res = _rcq_layered(G, plan, llr, I_T, lambda t, r: qs.for_iteration(t), fx, fam, W, **kw)
    return res.squeeze() if single else res


def msrcq_reference_decode(G: TannerGraph, table: dict, fx: FixedPointSpec, llr, I_T: int,
                           plan: LayerPlan | None = None, **kw) -> DecodeResult:
    """Layered RCQ decoding with one quantizer per (iteration, layer) from ``table``.

    ``table[(t, r)]`` (t 1-based, r 0-based) must exist for every step.
    """
    plan = plan if plan is not None else default_layer_plan(G)
    for t in range(1, I_T + 1):
        for r in range(len(plan)):
            if (t, r) not in table:
                raise KeyError(f"quantizer table misses entry (t={t}, layer={r})")
    single = np.ndim(llr) == 1
    res = _rcq_layered(G, plan, llr, I_T, lambda t, r: table[(t, r)], fx, "oms", None, **kw)
    return res.squeeze() if single else res


@dataclass
class RCQDecoder:
    """Decoder-like wrapper so the FER harness can drive W-RCQ decoding."""
    G: TannerGraph
    qs: QuantizerSchedule
    fx: FixedPointSpec
    weights: WeightSet | None = None
    family: str = "oms"
    max_iter: int = 10
    plan: LayerPlan | None = None

    def decode(self, llr, early_stop: bool = True, record_trajectory: bool = False) -> DecodeResult:
        return wrcq_decode_layered(self.G, self.weights, self.qs, self.fx, llr, self.max_iter, self.plan,
                                   self.family, early_stop=early_stop, record_trajectory=record_trajectory)
