"""The eleven acceptance criteria, each at its stated tolerance.

Every test prints one ``ACCn PASS|FAIL`` line (also collected in the
terminal summary) and then asserts. Desk-scale surrogates stand in for the
large published codes; see README for the substitutions.
"""
import itertools
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from fdcheck import fd_check, toy_problem
from neuraldec.channel import ebn0_to_sigma, llr_block
from neuraldec.codes import build_tanner_graph, default_layer_plan, save_alist
from neuraldec.decoders import Decoder
from neuraldec.harness import DecoderSpec, SweepConfig, ci_separated, measure_fer, run_fer_sweep
from neuraldec.rcq import (FixedPointSpec, QCode, QuantizerParams, QuantizerSchedule, RCQDecoder, quantize,
                           quantize_weights, reconstruct, wrcq_decode_layered)
from neuraldec.testcodes import dvbs2_like, pbrl_surrogate
from neuraldec.training import TrainConfig, degree_trend, gradient_magnitude_profile, train, weight_statistics
from neuraldec.weights import WeightSet, scheme_param_count


def report(n: int, ok: bool, detail: str) -> None:
    line = f"ACC{n} {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE.append(line)


def ci(rec) -> str:
    lo, hi = rec.wilson()
    return f"{rec.frame_errors}/{rec.frames_sent} [{lo:.2e}, {hi:.2e}]"


def overlap(a, b) -> bool:
    (alo, ahi), (blo, bhi) = a.wilson(), b.wilson()
    return alo <= bhi and blo <= ahi


@pytest.fixture(scope="module")
def pbrl400():
    H, P = pbrl_surrogate(16)
    return build_tanner_graph(H, P)


# type-0 flooding training shared by criteria 4 and 6
PJ_CFG = dict(mode="posterior-joint", lr=200.0, momentum=0.9, batch_size=64, batches_per_epoch=100, scheme=0,
              I_T=10, ebn0_range=(1.5, 3.0), seed=1)


@pytest.fixture(scope="module")
def pj_weights(pbrl400):
    W, _ = train(pbrl400, TrainConfig(**PJ_CFG))
    return W


# -------------------------------------------------------------------- 1


def test_acc1_unit_weight_nnms_equals_minsum():
    t0 = time.perf_counter()
    H, P = pbrl_surrogate(40)
    G = build_tanner_graph(H, P)
    W = WeightSet.for_graphs(G, 0, 10, "nms")
    bad = {}
    for sched in ("flooding", "layered"):
        ms, nn = Decoder(G, "minsum", None, sched, 10), Decoder(G, "nms", W, sched, 10)
        bad[sched] = 0
        for k in range(10):
            llr = llr_block(G.n, ebn0_to_sigma(2.5, H.rate), 11, range(k * 1000, (k + 1) * 1000))
            a, b = ms.decode(llr), nn.decode(llr)
            differ = ((a.hard_bits != b.hard_bits).any(1) | (a.iterations_used != b.iterations_used)
                      | (a.final_posteriors != b.final_posteriors).any(1))
            bad[sched] += int(differ.sum())
    secs = time.perf_counter() - t0
    ok = bad == {"flooding": 0, "layered": 0} and secs < 60
    report(1, ok, f"n={G.n}, 10^4 frames per schedule, differing frames {bad}, {secs:.0f} s")
    assert ok


# -------------------------------------------------------------------- 2


def test_acc2_gradients_match_finite_differences():
    t0 = time.perf_counter()
    G, llr, tx = toy_problem()
    plan = default_layer_plan(G, 4)
    worst, parts = 0.0, []
    for family, (sched, name), mode in itertools.product(("nms", "oms"), (("flooding", "flooding"),
                                                                          (plan, "layered")),
                                                         ("full", "posterior-joint")):
        rep = fd_check(G, llr, tx, family, 0, sched, mode, T=4, n_weights=50, h=1e-4)
        assert rep.checked >= 50
        worst = max(worst, rep.max_rel_err)
        parts.append(f"{family}/{name}/{mode}: {rep.max_rel_err:.1e} ({rep.skipped_ties} ties)")
    secs = time.perf_counter() - t0
    ok = worst < 1e-4 and secs < 300
    report(2, ok, f"max rel err {worst:.2e} over 8 x 50 weights, h=1e-4, {secs:.0f} s; " + "; ".join(parts))
    assert ok


# -------------------------------------------------------------------- 3


def test_acc3_gradient_explosion(pbrl400):
    G = pbrl400
    assert G.check_degrees.max() >= 19
    dec = Decoder(G, "nms", 0.8, "flooding", 50)
    llr = llr_block(G.n, ebn0_to_sigma(0.0, G.H.rate), 3, range(4))
    full = gradient_magnitude_profile(dec, llr, mode="full")
    pj = gradient_magnitude_profile(dec, llr, mode="posterior-joint")
    r_full, r_pj = full.ratio(1, 50), pj.ratio(1, 50)
    ok = r_full > 1e3 and r_pj < 1e2
    report(3, ok, f"max dc {G.check_degrees.max()}, I_T=50, 0 dB: full mu1/mu50={r_full:.2e}, "
                  f"posterior-joint mu1/mu50={r_pj:.2f} (spread {pj.spread():.2f})")
    assert ok


# -------------------------------------------------------------------- 4


def test_acc4_training_regime_ordering(pbrl400, pj_weights):
    G = pbrl400
    greedy, _ = train(G, TrainConfig(**{**PJ_CFG, "mode": "greedy", "lr": PJ_CFG["lr"] / PJ_CFG["I_T"]}))
    # the clipping learning rate is tuned on the training loss of its own run
    clip_runs = []
    for lr in (0.1, 1.0, 10.0):
        W, log = train(G, TrainConfig(**{**PJ_CFG, "mode": "clip", "clip": 1e-3, "lr": lr}))
        clip_runs.append((np.mean([r.J for r in log[-20:]]), lr, W))
    _, clip_lr, clip = min(clip_runs, key=lambda r: r[0])
    dec = {name: Decoder(G, "nms", W, "flooding", 10)
           for name, W in (("posterior-joint", pj_weights), ("greedy", greedy), ("clip", clip))}
    # SNR where clipping reaches FER ~ 1e-3, found on a separate noise stream
    scan = {}
    for e in np.arange(3.5, 6.01, 0.25):
        scan[float(e)] = measure_fer(dec["clip"], G, e, e_min=50, f_max=20000, stream=5).fer
        if scan[float(e)] < 5e-4:
            break
    snr = min(scan, key=lambda e: abs(np.log10(max(scan[e], 1e-6)) - np.log10(1e-3)))
    rec = {k: measure_fer(d, G, snr, e_min=100, f_max=100_000, stream=7) for k, d in dec.items()}
    pj, gr, cl = rec["posterior-joint"], rec["greedy"], rec["clip"]
    ok = overlap(pj, gr) and pj.fer <= cl.fer and gr.fer <= cl.fer
    report(4, ok, f"n={G.n}, I_T=10, {snr} dB (clip lr {clip_lr}): posterior-joint {ci(pj)}, greedy {ci(gr)}, "
                  f"clip {ci(cl)}; pj/greedy CIs overlap={overlap(pj, gr)}, "
                  f"both CI-separated below clip={ci_separated(pj, cl) and ci_separated(gr, cl)}")
    assert ok


# -------------------------------------------------------------------- 5


def test_acc5_sharing_parameter_counts():
    dv = build_tanner_graph(dvbs2_like(1.0))
    H, P = pbrl_surrogate(16)
    pb = build_tanner_graph(H, P)
    got_dv = {t: scheme_param_count(dv, t) for t in (1, 2, 3, 4, 8)}
    got_pb = {t: scheme_param_count(pb, t) for t in range(1, 8)}
    want_dv = {1: 13, 2: 8, 3: 4, 4: 4, 8: 1}
    want_pb = {1: 41, 2: 15, 3: 8, 4: 7, 5: 101, 6: 17, 7: 25}
    with pytest.raises(ValueError):
        scheme_param_count(build_tanner_graph(H), 5)
    ok = got_dv == want_dv and got_pb == want_pb
    report(5, ok, f"DVB-S2-like {got_dv}; PBRL-surrogate {got_pb}")
    assert ok


# -------------------------------------------------------------------- 6


def test_acc6_degree_trend(pbrl400, pj_weights):
    by_dc, _ = weight_statistics(pj_weights, pbrl400)
    taus = [degree_trend(by_dc, t) for t in range(1, 5)]
    ok = all(t < 0 for t in taus)
    report(6, ok, f"check degrees {sorted({k[1] for k in by_dc})}, Kendall tau t=1..4: "
                  + ", ".join(f"{t:.3f}" for t in taus))
    assert ok


# -------------------------------------------------------------------- 7


def test_acc7_quantizer_properties():
    checked = 0
    bad = []
    for b_c, C, gamma in itertools.product(range(2, 7), (0.5, 3.0, 7.0, 10.0, 40.0), (0.3, 1.0, 1.3, 1.7, 2.3)):
        q = QuantizerParams(C, gamma, b_c)
        tau = q.thresholds
        if not (tau[0] == 0 and np.all(np.diff(tau) > 0)):
            bad.append(("monotone", b_c, C, gamma))
        if gamma == 1.0 and not np.allclose(np.diff(tau), C / q.levels, rtol=1e-12):
            bad.append(("uniform", b_c, C, gamma))
        for msb, mag in itertools.product((0, 1), range(q.levels)):
            back = quantize(reconstruct(QCode(msb, mag), q), q)
            if back.mag != mag or (mag > 0 and back.msb != msb):
                bad.append(("idempotence", b_c, C, gamma, msb, mag))
            checked += 1
        xs = np.linspace(0, 3 * C, 2001)
        idx = q.index(xs)
        if np.any(np.diff(idx) < 0) or idx[-1] != q.levels - 1:
            bad.append(("index monotone/saturation", b_c, C, gamma))
        if quantize(-5 * tau[-1], q) != QCode(1, q.levels - 1) or q.index(1e12) != q.levels - 1:
            bad.append(("saturation", b_c, C, gamma))
    ok = not bad
    report(7, ok, f"125 quantizers, b_c 2..6, {checked} codes round-tripped, violations {bad[:3]}")
    assert ok


# -------------------------------------------------------------------- 8


def test_acc8_degenerate_rcq_equivalence(pbrl400):
    G = pbrl400
    plan = default_layer_plan(G)
    qs = QuantizerSchedule([QuantizerParams(64.0, 1.0, 12)], 10)
    fx = FixedPointSpec.for_quantizers(qs, 12)
    ms = Decoder(G, "minsum", None, plan, 10)
    neutral = WeightSet.for_graphs(G, 0, 10, "nms")
    assert np.all(neutral.beta == 1.0)
    grid, raw, frames, fails = 0, 0, 0, 0
    for e in (1.5, 2.5, 3.5):
        llr = llr_block(G.n, ebn0_to_sigma(e, G.H.rate), 5, range(1000))
        rq = wrcq_decode_layered(G, neutral, qs, fx, llr, 10, plan)
        # both decoders see the channel LLRs as stored on the b_v grid
        fl = ms.decode(fx.to_grid(llr) * fx.v_step)
        grid += int((rq.hard_bits != fl.hard_bits).any(1).sum())
        fr = ms.decode(llr)
        raw += int((rq.hard_bits != fr.hard_bits).any(1).sum())
        fails += int((~fr.converged).sum())
        frames += len(llr)
    rate = grid / frames
    ok = rate <= 1e-3
    report(8, ok, f"b_c=b_v=12, gamma=1, unit weights, {frames} frames at 1.5/2.5/3.5 dB: disagreement {grid} ({rate:.2%}) "
                  f"against MinSum on grid LLRs; against unrounded LLRs {raw} (MinSum failed {fails} frames)")
    assert ok


# -------------------------------------------------------------------- 9


def _rcq(G, C, gamma, W, I=10):
    qs = QuantizerSchedule([QuantizerParams(C, gamma, 4)], I)
    fx = FixedPointSpec.for_quantizers(qs, 8)
    return RCQDecoder(G, qs, fx, None if W is None else quantize_weights(W, fx), "oms", I)


def test_acc9_low_bit_gain(pbrl400):
    G = pbrl400
    I, snr = 10, 3.0
    qs = QuantizerSchedule([QuantizerParams(10.0, 1.7, 4)], I)
    cfg = TrainConfig(mode="posterior-joint", lr=10.0, momentum=0.9, batch_size=64, batches_per_epoch=60, scheme=1,
                      family="oms", I_T=I, schedule="layered", ebn0_range=(1.5, 3.0), seed=2, quantizers=qs)
    W, _ = train(G, cfg)
    trained = _rcq(G, 10.0, 1.7, W)
    # untrained uniform 4-bit OMS: best (C, offset) on a tuning stream
    tune = {}
    for C, off in itertools.product((6.0, 8.0, 10.0, 12.0, 16.0), (0.0, 0.25, 0.5)):
        d = _rcq(G, C, 1.0, WeightSet.constant(G, off, I, "oms"))
        tune[(C, off)] = measure_fer(d, G, snr, e_min=100, f_max=20000, stream=3).fer
    C_u, off_u = min(tune, key=tune.get)
    uniform = _rcq(G, C_u, 1.0, WeightSet.constant(G, off_u, I, "oms"))
    a = measure_fer(trained, G, snr, e_min=200, f_max=100_000, stream=11)
    b = measure_fer(uniform, G, snr, e_min=200, f_max=100_000, stream=11)
    plain = measure_fer(_rcq(G, 10.0, 1.7, None), G, snr, e_min=200, f_max=100_000, stream=11)
    ok = a.fer <= b.fer and ci_separated(a, b)
    report(9, ok, f"n={G.n}, (b_c,b_v)=(4,8), layered I=10, {snr} dB: trained W-OMS-RCQ {ci(a)} vs uniform OMS "
                  f"C={C_u}, offset={off_u} {ci(b)}; untrained non-uniform (C=10, gamma=1.7) {ci(plain)}")
    assert ok


# ------------------------------------------------------------------- 10


def test_acc10_hybrid_equivalence():
    H, P = pbrl_surrogate(8)
    G = build_tanner_graph(H, P)
    rng = np.random.default_rng(10)
    llr = llr_block(G.n, ebn0_to_sigma(1.5, H.rate), 2, range(300))
    I_T, I_p = 12, 5
    checks = []
    for family, scheme in (("nms", 0), ("oms", 2), ("nms", 5)):
        full = WeightSet.for_graphs(G, scheme, I_T, family)
        full = full.with_values(full.beta + rng.uniform(-0.3, 0.3, full.beta.shape),
                                full.alpha + rng.uniform(0.0, 0.2, full.alpha.shape))
        same = WeightSet(scheme, family, I_T, I_T, full.beta_keys, full.alpha_keys, full.beta, full.alpha)
        hyb = WeightSet.for_graphs(G, scheme, I_T, family, I_prime=I_p).with_values(full.beta[:I_p],
                                                                                    full.alpha[:I_p])
        tail = full.with_values(np.vstack([full.beta[:I_p]] + [full.beta[I_p - 1:I_p]] * (I_T - I_p)),
                                np.vstack([full.alpha[:I_p]] + [full.alpha[I_p - 1:I_p]] * (I_T - I_p)))
        checks.append(all(np.array_equal(hyb.edge_weights(G, t)[0], hyb.edge_weights(G, I_p)[0])
                          for t in range(I_p, I_T + 1)))
        for sched in ("flooding", "layered"):
            for A, B in ((same, full), (hyb, tail)):
                ra = Decoder(G, family, A, sched, I_T).decode(llr, record_trajectory=True)
                rb = Decoder(G, family, B, sched, I_T).decode(llr, record_trajectory=True)
                checks.append(np.array_equal(ra.final_posteriors, rb.final_posteriors)
                              and np.array_equal(ra.iterations_used, rb.iterations_used)
                              and np.array_equal(np.nan_to_num(ra.trajectory), np.nan_to_num(rb.trajectory)))
    ok = all(checks)
    report(10, ok, f"I_T={I_T}, I'={I_p}, 3 weight types x 2 schedules x 2 cases, {len(llr)} frames: "
                   f"{sum(checks)}/{len(checks)} checks bit-identical")
    assert ok


# ------------------------------------------------------------------- 11


def test_acc11_sweep_determinism(tmp_path):
    H, _ = pbrl_surrogate(16)
    code = tmp_path / "pbrl400.alist"
    save_alist(H, code)
    t0 = time.perf_counter()
    texts = {}
    for workers, chunk in ((1, 500), (3, 500), (3, 173)):
        out = tmp_path / f"w{workers}_{chunk}.csv"
        cfg = SweepConfig(str(code), decoder=DecoderSpec("nms", "layered", 10, 0.75), ebn0_lo=1.0, ebn0_hi=3.0,
                          ebn0_step=0.5, e_min=50, f_max=20000, workers=workers, chunk=chunk, master_seed=42,
                          out=str(out))
        run_fer_sweep(cfg)
        texts[(workers, chunk)] = out.read_bytes()
    ok = len(set(texts.values())) == 1
    report(11, ok, f"5-point sweep, workers 1 vs 3 (chunk 500 and 173): byte-identical CSVs={ok}, "
                   f"{time.perf_counter() - t0:.0f} s")
    assert ok
