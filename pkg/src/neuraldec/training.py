"""Training of weighted MinSum decoders without an autodiff framework.

The forward pass keeps a compact trace per iteration and layer: the sign
bits of the incoming V2C messages plus min1/min2/pos1/pos2 of each check.
Every C2V message and every local derivative can be rebuilt from it.

The backward pass is one reverse sweep over (iteration, layer) steps.
Flooding is the one-layer case. The gradient reaching a stored C2V message
``u`` set at step k has three parts:

* the posterior of its iteration,
* V2C messages computed later in the same iteration (later layers),
* V2C messages of the next iteration computed before ``u`` is replaced
  (same or earlier layers, the message's own edge excluded).

Full backprop keeps all three. Posterior-joint training drops the third,
which for flooding leaves the posterior term alone. A running per-variable
sum of V2C gradients, with one snapshot per layer, yields the last two
terms without storing messages.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit, log_expit
from scipy.stats import kendalltau

from .channel import BatchSpec, training_batch
from .codes import TannerGraph
from .decoders import CheckStats, Decoder, Layout, check_stats
from .weights import WeightSet

LOG_FLOOR = np.log(1e-12)
MODES = ("full", "clip", "greedy", "posterior-joint")


# ------------------------------------------------------------------- trace

@dataclass
class CompactTrace:
    """Per (iteration, layer): packed V2C sign bits, min1, min2, pos1, pos2."""
    I_T: int
    layouts: list[Layout]
    llr: np.ndarray
    signs: list[list[np.ndarray]] = field(default_factory=list)
    min1: list[list[np.ndarray]] = field(default_factory=list)
    min2: list[list[np.ndarray]] = field(default_factory=list)
    pos1: list[list[np.ndarray]] = field(default_factory=list)
    pos2: list[list[np.ndarray]] = field(default_factory=list)
    posteriors: np.ndarray | None = None  # (I_T, B, n)

    def record(self, t: int, r: int, st: CheckStats, v2c=None) -> None:
        if r == 0:
            for lst in (self.signs, self.min1, self.min2, self.pos1, self.pos2):
                lst.append([])
        self.signs[t - 1].append(np.packbits(st.neg, axis=1))
        self.min1[t - 1].append(st.min1.copy())
        self.min2[t - 1].append(st.min2.copy())
        self.pos1[t - 1].append(st.pos1.astype(np.int32))
        self.pos2[t - 1].append(st.pos2.astype(np.int32))

    def stats(self, t: int, r: int) -> CheckStats:
        L = self.layouts[r]
        neg = np.unpackbits(self.signs[t - 1][r], axis=1, count=len(L.edges)).astype(bool)
        parity = (np.add.reduceat(neg.view(np.uint8), L.starts, axis=1) & 1).astype(bool)
        return CheckStats(neg, self.min1[t - 1][r], self.min2[t - 1][r],
                          self.pos1[t - 1][r].astype(np.int64), self.pos2[t - 1][r].astype(np.int64), parity)

    def nbytes(self) -> int:
        total = 0 if self.posteriors is None else self.posteriors.nbytes
        for lst in (self.signs, self.min1, self.min2, self.pos1, self.pos2):
            total += sum(a.nbytes for row in lst for a in row)
        return total


@dataclass
class FullTrace:
    """Memory-heavy reference record: every V2C message of every step."""
    I_T: int
    layouts: list[Layout]
    llr: np.ndarray
    v2c: list[list[np.ndarray]] = field(default_factory=list)
    posteriors: np.ndarray | None = None

    def stats(self, t: int, r: int) -> CheckStats:
        return check_stats(self.v2c[t - 1][r].copy(), self.layouts[r])


def forward_with_trace(dec: Decoder, llr, full_record: bool = False):
    """Decode without early stopping while recording the trace.

    Returns ``(trace, result)``; ``trace.posteriors`` holds the per-iteration
    posteriors. With ``full_record`` a FullTrace is produced instead.
    """
    llr = np.atleast_2d(np.asarray(llr, dtype=float))
    if full_record:
        trace = FullTrace(dec.max_iter, dec.layouts, llr)

        def on_layer(t, r, st, v2c):
            if r == 0:
                trace.v2c.append([])
            trace.v2c[t - 1].append(v2c.copy())
    else:
        trace = CompactTrace(dec.max_iter, dec.layouts, llr)
        on_layer = trace.record
    res = dec.decode(llr, early_stop=False, record_trajectory=True, on_layer=on_layer)
    trace.posteriors = res.trajectory
    return trace, res


def reconstruct_c2v(dec: Decoder, trace, t: int, r: int) -> np.ndarray:
    """Stored C2V messages of step (t, r) rebuilt from the trace."""
    return dec.c2v(t, r, trace.layouts[r], trace.stats(t, r))


# -------------------------------------------------------------------- loss

def multiloss_cross_entropy(trajectory, tx_bits, iterations: Sequence[int] | None = None) -> float:
    """Iteration-averaged BCE of the logistic posteriors, averaged over frames.

    ``trajectory`` is (T, n) or (T, B, n); ``iterations`` (1-based) restricts
    the sum, and the average is taken over the iterations used.
    """
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim == 2:
        traj = traj[:, None, :]
    if iterations is not None:
        traj = traj[[t - 1 for t in iterations]]
    s = 1.0 - 2.0 * np.asarray(tx_bits, dtype=float)
    logs = np.maximum(log_expit(s * traj), LOG_FLOOR)
    T, B, n = traj.shape
    return float(-logs.sum() / (n * T * B))


def loss_gradients(trajectory, tx_bits, iterations: Sequence[int] | None = None) -> np.ndarray:
    """dJ/dl for every iteration (zeros for iterations outside ``iterations``)."""
    traj = np.asarray(trajectory, dtype=float)
    T, B, n = traj.shape
    use = list(range(1, T + 1)) if iterations is None else list(iterations)
    s = 1.0 - 2.0 * np.asarray(tx_bits, dtype=float)
    g = np.zeros_like(traj)
    for t in use:
        z = s * traj[t - 1]
        alive = log_expit(z) > LOG_FLOOR
        g[t - 1] = np.where(alive, -s * expit(-z), 0.0) / (n * len(use) * B)
    return g


# ---------------------------------------------------------------- backward

@dataclass
class GradientSet:
    """Weight gradients in the WeightSet key space plus per-iteration mu."""
    grad: WeightSet
    mu: np.ndarray  # mean |dJ/du| per iteration

    @property
    def beta(self) -> np.ndarray:
        return self.grad.beta

    @property
    def alpha(self) -> np.ndarray:
        return self.grad.alpha

    def flat(self) -> np.ndarray:
        return self.grad.flat()

    def __add__(self, other: "GradientSet") -> "GradientSet":
        return GradientSet(self.grad.with_values(self.beta + other.beta, self.alpha + other.alpha),
                           self.mu + other.mu)


@dataclass
class EdgeGradients:
    beta: np.ndarray   # (I_T, E)
    alpha: np.ndarray  # (I_T, E)
    mu: np.ndarray     # (I_T,)


def _var_reduce(L: Layout):
    cache = L.__dict__.setdefault("_var_reduce", {})
    if not cache:
        order = np.argsort(L.edge_var, kind="stable")
        sv = L.edge_var[order]
        starts = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1]])
        cache.update(order=order, starts=starts, vars=sv[starts],
                     var_pos=np.searchsorted(L.vars, L.edge_var))
    return cache


def _add_by_var(R: np.ndarray, L: Layout, g: np.ndarray) -> None:
    if L.unique_vars:
        R[:, L.edge_var] += g
    else:
        vr = _var_reduce(L)
        R[:, vr["vars"]] += np.add.reduceat(g[:, vr["order"]], vr["starts"], axis=1)


def backward_edges(dec: Decoder, trace, g_post: np.ndarray, mode: str = "full",
                   clip: float | None = None) -> EdgeGradients:
    """Per-edge weight gradients for one traced batch (summed over frames).

    ``mode`` is "full" or "posterior-joint". ``clip`` bounds every V2C
    message gradient element-wise during the sweep.
    """
    if mode not in ("full", "posterior-joint"):
        raise ValueError(f"unknown backward mode {mode!r}")
    layouts = trace.layouts
    if layouts is not dec.layouts and len(layouts) != len(dec.layouts):
        raise ValueError("trace and decoder use different layer plans")
    T = trace.I_T
    if g_post.shape[0] != T:
        raise ValueError("posterior gradients do not cover every traced iteration")
    G = dec.G
    B = g_post.shape[1]
    E = G.num_edges
    gb = np.zeros((T, E))
    ga = np.zeros((T, E))
    mu = np.zeros(T)
    R = np.zeros((B, G.n))
    snap: list[np.ndarray | None] = [None] * len(layouts)
    gnext: list[np.ndarray | None] = [None] * len(layouts)
    for t in range(T, 0, -1):
        bound = R.copy() if mode == "posterior-joint" else None
        for r in range(len(layouts) - 1, -1, -1):
            L = layouts[r]
            st = trace.stats(t, r)
            ev = L.edge_var
            g_u = g_post[t - 1][:, ev] + R[:, ev]
            if mode == "posterior-joint":
                g_u -= bound[:, ev]
            elif snap[r] is not None:
                g_u -= snap[r][:, _var_reduce(L)["var_pos"]] + gnext[r]
            mu[t - 1] += np.abs(g_u).sum()
            g_m = _local_backward(dec, t, L, st, g_u, gb[t - 1], ga[t - 1])
            g_v2c = _minsum_backward(L, st, g_m)
            if clip is not None:
                np.clip(g_v2c, -clip, clip, out=g_v2c)
            if mode == "full":
                snap[r] = R[:, L.vars].copy()
                gnext[r] = g_v2c
            _add_by_var(R, L, g_v2c)
    mu /= B * E
    return EdgeGradients(gb, ga, mu)


def _local_backward(dec: Decoder, t: int, L: Layout, st: CheckStats, g_u, gb_row, ga_row):
    """Weight gradients of one step (accumulated in place) and dJ/d|u*|."""
    m_raw = st.excl_magnitude(L)
    m = dec.excl_magnitude(t, L, st)
    neg = st.excl_negative(L)
    s = np.where(neg, -1.0, 1.0)
    fam = dec.family
    if fam == "minsum":
        g_m = s * g_u
    else:
        beta, alpha = dec.edge_weights(t)
        beta, alpha = beta[L.edges], alpha[L.edges]
        if fam == "nms":
            u_star = s * m
            gb_row[L.edges] += (alpha * u_star * g_u).sum(axis=0)
            ga_row[L.edges] += (beta * u_star * g_u).sum(axis=0)
            g_m = s * beta * alpha * g_u
        else:
            active = (m - beta - alpha) > 0
            sg = np.where(active, s * g_u, 0.0)
            gb_row[L.edges] -= sg.sum(axis=0)
            ga_row[L.edges] -= sg.sum(axis=0)
            g_m = sg
    if dec.quantizers is not None:
        # straight-through estimator over the quantizer, zero in saturation
        g_m = np.where(m_raw <= dec.quantizers.for_iteration(t).C, g_m, 0.0)
    return g_m


def _minsum_backward(L: Layout, st: CheckStats, g_m: np.ndarray) -> np.ndarray:
    """dJ/d(V2C): pos1 collects every other edge's term, pos2 the pos1 term."""
    total = np.add.reduceat(g_m, L.starts, axis=1)
    at1 = np.take_along_axis(g_m, st.pos1, axis=1)
    g_abs = np.zeros_like(g_m)
    np.put_along_axis(g_abs, st.pos1, total - at1, axis=1)
    np.put_along_axis(g_abs, st.pos2, at1, axis=1)
    return np.where(st.neg, -g_abs, g_abs)


def scatter_gradients(dec: Decoder, eg: EdgeGradients) -> GradientSet:
    """Shared-weight gradients: the per-edge gradients summed over each key."""
    W = dec.weights
    out = W.zeros_like()
    for t in range(1, eg.beta.shape[0] + 1):
        W.scatter(dec.G, t, eg.beta[t - 1], eg.alpha[t - 1], out)
    return GradientSet(out, eg.mu)


def _backward(dec, trace, g_post, mode, clip=None) -> GradientSet:
    return scatter_gradients(dec, backward_edges(dec, trace, g_post, mode, clip))


def backward_full_flooding(dec: Decoder, trace, g_post, clip: float | None = None) -> GradientSet:
    _require(dec, "flooding")
    return _backward(dec, trace, g_post, "full", clip)


def backward_posterior_joint_flooding(dec: Decoder, trace, g_post) -> GradientSet:
    _require(dec, "flooding")
    return _backward(dec, trace, g_post, "posterior-joint")


def backward_layered(dec: Decoder, trace, g_post, mode: str = "full", clip: float | None = None) -> GradientSet:
    _require(dec, "layered")
    return _backward(dec, trace, g_post, mode, clip)


def _require(dec: Decoder, schedule: str) -> None:
    if dec.schedule != schedule:
        raise ValueError(f"{schedule} backward needs a {schedule} decoder, got {dec.schedule}")


def clip_gradients(gs: GradientSet, l: float) -> GradientSet:
    """Element-wise magnitude clip of the weight gradients."""
    if l <= 0:
        raise ValueError("clip threshold must be positive")
    return GradientSet(gs.grad.with_values(np.clip(gs.beta, -l, l), np.clip(gs.alpha, -l, l)), gs.mu)


# --------------------------------------------------------------- optimizer

@dataclass
class SGD:
    lr: float
    momentum: float = 0.0
    _vel: np.ndarray | None = None

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")

    def step(self, W: WeightSet, gs: GradientSet, mask: np.ndarray | None = None) -> WeightSet:
        g = gs.flat()
        if mask is not None:
            g = g * mask
        self._vel = g if self._vel is None or self.momentum == 0 else g + self.momentum * self._vel
        new = W.flat() - self.lr * self._vel
        nb = W.beta.size
        return W.with_values(new[:nb], new[nb:])


def sgd_step(W: WeightSet, gs: GradientSet, lr: float, momentum: float = 0.0,
             velocity: np.ndarray | None = None) -> WeightSet:
    """One step ``w <- w - lr * (g + momentum * velocity)``."""
    opt = SGD(lr, momentum, velocity)
    return opt.step(W, gs)


# ----------------------------------------------------------------- configs

@dataclass
class TrainConfig:
    mode: str = "posterior-joint"
    lr: float = 1.0
    momentum: float = 0.0
    batch_size: int = 64
    epochs: int = 1
    batches_per_epoch: int = 10
    clip: float = 1e-3
    clip_target: str = "messages"  # or "weights"
    scheme: int = 0
    family: str = "nms"
    I_T: int = 10
    I_prime: int | None = None
    schedule: str = "flooding"
    init: float | None = None
    ebn0_range: tuple[float, float] = (1.0, 3.0)
    seed: int = 0
    quantizers: object = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "clip" and not self.clip > 0:
            raise ValueError("clip mode needs a positive threshold")
        if self.clip_target not in ("messages", "weights"):
            raise ValueError("clip_target must be 'messages' or 'weights'")
        self.ebn0_range = tuple(self.ebn0_range)


@dataclass
class LogRow:
    epoch: int
    batch: int
    J: float
    grad_norm: float
    lr: float


def _decoders_for(graphs, W, cfg, I_T):
    return [Decoder(G, cfg.family, W.with_iterations(I_T) if I_T != W.I_T else W, cfg.schedule, I_T,
                    cfg.quantizers) for G in graphs]


def batch_gradient(graphs: Sequence[TannerGraph], W: WeightSet, cfg: TrainConfig, batch_index: int,
                   I_T: int | None = None, loss_iterations=None, mode: str | None = None):
    """Loss and weight gradient of one training batch.

    Samples are grouped by code in frame-index order and the per-code
    gradients are summed in code order, so the reduction is deterministic.
    """
    I_T = I_T or W.I_T
    mode = mode or ("full" if cfg.mode in ("full", "clip") else "posterior-joint")
    spec = BatchSpec(cfg.batch_size, cfg.ebn0_range, [G.H for G in graphs])
    samples = training_batch(spec, cfg.seed, batch_index)
    decs = _decoders_for(graphs, W, cfg, I_T)
    total = None
    J = 0.0
    for ci, dec in enumerate(decs):
        group = [s for s in samples if s.code == ci]
        if not group:
            continue
        llr = np.stack([s.llr for s in group])
        tx = np.stack([s.tx_bits for s in group])
        trace, _ = forward_with_trace(dec, llr)
        share = len(group) / len(samples)
        J += share * multiloss_cross_entropy(trace.posteriors, tx, loss_iterations)
        g_post = loss_gradients(trace.posteriors, tx, loss_iterations) * share
        clip = cfg.clip if cfg.mode == "clip" and cfg.clip_target == "messages" else None
        gs = scatter_gradients(dec, backward_edges(dec, trace, g_post, mode, clip))
        # express the gradient in the (possibly longer) training set's key space
        gs = GradientSet(W.zeros_like().with_values(_pad_rows(gs.beta, W.I_prime), _pad_rows(gs.alpha, W.I_prime)),
                         _pad(gs.mu, W.I_T))
        total = gs if total is None else total + gs
    if cfg.mode == "clip" and cfg.clip_target == "weights":
        total = clip_gradients(total, cfg.clip)
    return J, total


def _pad_rows(a: np.ndarray, rows: int) -> np.ndarray:
    if a.shape[0] == rows:
        return a
    out = np.zeros((rows, a.shape[1]))
    out[:a.shape[0]] = a
    return out


def _pad(a: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[:len(a)] = a
    return out


def initial_weights(graphs: Sequence[TannerGraph], cfg: TrainConfig) -> WeightSet:
    return WeightSet.for_graphs(graphs, cfg.scheme, cfg.I_T, cfg.family, cfg.I_prime, cfg.init)


def train(graphs: TannerGraph | Sequence[TannerGraph], cfg: TrainConfig, W: WeightSet | None = None,
          log_path=None, checkpoint=None) -> tuple[WeightSet, list[LogRow]]:
    """Mini-batch SGD over all iterations jointly (full, clip or posterior-joint)."""
    graphs = [graphs] if isinstance(graphs, TannerGraph) else list(graphs)
    if cfg.mode == "greedy":
        return greedy_train(graphs, cfg, W, log_path)
    W = initial_weights(graphs, cfg) if W is None else W.copy()
    opt = SGD(cfg.lr, cfg.momentum)
    log: list[LogRow] = []
    b = 0
    for epoch in range(cfg.epochs):
        for batch in range(cfg.batches_per_epoch):
            J, gs = batch_gradient(graphs, W, cfg, b)
            W = opt.step(W, gs)
            log.append(LogRow(epoch, batch, J, float(np.linalg.norm(gs.flat())), cfg.lr))
            b += 1
        if checkpoint is not None:
            checkpoint(epoch, W)
    if log_path is not None:
        write_training_log(log, log_path)
    return W, log


def greedy_train(graphs, cfg: TrainConfig, W: WeightSet | None = None, log_path=None):
    """Train iteration t with a t-iteration decoder, iterations 1..t-1 frozen.

    Stage t uses the posterior loss of iteration t only. Total decoding work
    grows with I_T squared.
    """
    graphs = [graphs] if isinstance(graphs, TannerGraph) else list(graphs)
    W = initial_weights(graphs, cfg) if W is None else W.copy()
    log: list[LogRow] = []
    b = 0
    for t in range(1, cfg.I_T + 1):
        row = W.row(t)
        mask_w = W.zeros_like()
        mask_w.beta[row] = 1.0
        mask_w.alpha[row] = 1.0
        mask = mask_w.flat()
        opt = SGD(cfg.lr, cfg.momentum)
        for epoch in range(cfg.epochs):
            for batch in range(cfg.batches_per_epoch):
                J, gs = batch_gradient(graphs, W, cfg, b, I_T=t, loss_iterations=[t], mode="posterior-joint")
                W = opt.step(W, gs, mask)
                log.append(LogRow(epoch, batch, J, float(np.linalg.norm(gs.flat() * mask)), cfg.lr))
                b += 1
    if log_path is not None:
        write_training_log(log, log_path)
    return W, log


def write_training_log(rows: Sequence[LogRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "batch", "J", "grad_norm", "lr"])
        for r in rows:
            w.writerow([r.epoch, r.batch, repr(r.J), repr(r.grad_norm), repr(r.lr)])


# ------------------------------------------------------------ diagnostics

@dataclass
class GradientProfile:
    mu: np.ndarray  # index t-1

    def ratio(self, a: int, b: int) -> float:
        # inf when mu_b underflows to zero, which deep unrolled decoders do reach
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(np.float64(self.mu[a - 1]) / self.mu[b - 1])

    def spread(self) -> float:
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(np.float64(self.mu.max()) / self.mu.min())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "mu_t"])
            for t, m in enumerate(self.mu, 1):
                w.writerow([t, repr(float(m))])


def gradient_magnitude_profile(dec: Decoder, llr, tx_bits=None, mode: str = "full") -> GradientProfile:
    """mu^(t) = mean |dJ/du^(t)| over all C2V messages for one input batch."""
    llr = np.atleast_2d(llr)
    tx = np.zeros(llr.shape, dtype=np.uint8) if tx_bits is None else np.atleast_2d(tx_bits)
    if isinstance(mode, GradientSet):
        return GradientProfile(mode.mu)
    trace, _ = forward_with_trace(dec, llr)
    g_post = loss_gradients(trace.posteriors, tx)
    return GradientProfile(backward_edges(dec, trace, g_post, mode).mu)


def weight_statistics(W: WeightSet, G: TannerGraph):
    """Group means of a type-0 set: {(t, dc): mean} and {(t, dc, dv): mean}."""
    if W.scheme != 0:
        raise ValueError("weight statistics need per-edge (type 0) weights")
    by_dc: dict = {}
    by_dcdv: dict = {}
    for t in range(1, W.I_prime + 1):
        beta, _ = W.edge_weights(G, t)
        for dc in np.unique(G.edge_dc):
            sel = G.edge_dc == dc
            by_dc[(t, int(dc))] = float(beta[sel].mean())
            for dv in np.unique(G.edge_dv[sel]):
                s2 = sel & (G.edge_dv == dv)
                by_dcdv[(t, int(dc), int(dv))] = float(beta[s2].mean())
    return by_dc, by_dcdv


def degree_trend(by_dc: dict, t: int) -> float:
    """Kendall correlation between check degree and mean weight at iteration t."""
    pts = sorted((dc, v) for (tt, dc), v in by_dc.items() if tt == t)
    if len(pts) < 2:
        return float("nan")
    return float(kendalltau([p[0] for p in pts], [p[1] for p in pts]).statistic)


def write_weight_statistics(stats: dict, path) -> None:
    """CSV rows (t, dc, mean) or (t, dc, dv, mean) depending on the key width."""
    width = len(next(iter(stats))) if stats else 2
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "dc", "dv"][:width] + ["mean"])
        for key in sorted(stats):
            w.writerow([*key, repr(stats[key])])
