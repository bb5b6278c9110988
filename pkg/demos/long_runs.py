"""Full-length versions of the training-regime and low-bit experiments.

These take hours on a full-size code. Point ``--code`` (and ``--proto``) at
the alist file of the code to study; without it the 400-bit PBRL surrogate is
used with the same settings, which finishes in minutes.

    python3 demos/long_runs.py regimes --code big.alist --iters 50 --snr 2.0 2.5 3.0
    python3 demos/long_runs.py low-bit --code big.alist --proto big.proto --snr 3.6 3.8 4.0
"""
import argparse

import numpy as np

from neuraldec.codes import build_tanner_graph
from neuraldec.decoders import Decoder
from neuraldec.harness import load_graph, measure_fer
from neuraldec.rcq import FixedPointSpec, QuantizerParams, QuantizerSchedule, RCQDecoder, quantize_weights
from neuraldec.testcodes import pbrl_surrogate
from neuraldec.training import TrainConfig, train
from neuraldec.weights import WeightSet


def graph(args):
    if args.code:
        return load_graph(args.code, args.proto)
    return build_tanner_graph(*pbrl_surrogate(16))


def show(name, G, dec, snrs, args):
    for k, snr in enumerate(snrs):
        r = measure_fer(dec, G, snr, e_min=args.e_min, f_max=args.f_max, stream=100 + k)
        lo, hi = r.wilson()
        print(f"{name:28s} {snr:5.2f} dB  FER {r.fer:.3e}  [{lo:.2e}, {hi:.2e}]  ({r.frame_errors}/{r.frames_sent})",
              flush=True)


def regimes(args):
    G = graph(args)
    base = dict(momentum=0.9, batch_size=args.batch, batches_per_epoch=args.batches, scheme=0, I_T=args.iters,
                ebn0_range=tuple(args.train_range), seed=1)
    runs = {"posterior-joint": TrainConfig(mode="posterior-joint", lr=args.lr, **base),
            "greedy": TrainConfig(mode="greedy", lr=args.lr / args.iters, **base),
            "clip 1e-3": TrainConfig(mode="clip", clip=1e-3, lr=args.clip_lr, **base)}
    for name, cfg in runs.items():
        W, log = train(G, cfg)
        print(f"{name}: final loss {np.mean([r.J for r in log[-20:]]):.4f}", flush=True)
        show(name, G, Decoder(G, "nms", W, "flooding", args.iters), args.snr, args)


def low_bit(args):
    G = graph(args)
    I = args.iters
    schedule = "layered"
    # 4-bit non-uniform quantizer with trained NMS weights
    qs4 = QuantizerSchedule([QuantizerParams(args.C4, args.gamma4, 4)], I)
    cfg = TrainConfig(mode="posterior-joint", lr=args.lr, momentum=0.9, batch_size=args.batch,
                      batches_per_epoch=args.batches, scheme=args.scheme, family="nms", I_T=I, schedule=schedule,
                      ebn0_range=tuple(args.train_range), seed=2, quantizers=qs4)
    W, _ = train(G, cfg)
    fx4 = FixedPointSpec.for_quantizers(qs4, 8)
    show("4-bit W-NMS-RCQ", G, RCQDecoder(G, qs4, fx4, quantize_weights(W, fx4), "nms", I), args.snr, args)
    # 6-bit uniform OMS with a single offset
    qs6 = QuantizerSchedule([QuantizerParams(args.C6, 1.0, 6)], I)
    fx6 = FixedPointSpec.for_quantizers(qs6, 8)
    oms = WeightSet.constant(G, args.offset6, I, "oms")
    show("6-bit OMS", G, RCQDecoder(G, qs6, fx6, quantize_weights(oms, fx6), "oms", I), args.snr, args)
    show("float layered MinSum", G, Decoder(G, "minsum", None, schedule, I), args.snr, args)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name, its, snr, lr in (("regimes", 10, [4.5, 5.0], 200.0), ("low-bit", 10, [2.5, 3.0], 10.0)):
        p = sub.add_parser(name)
        p.add_argument("--code")
        p.add_argument("--proto")
        p.add_argument("--iters", type=int, default=its)
        p.add_argument("--snr", type=float, nargs="+", default=snr)
        p.add_argument("--train-range", type=float, nargs=2, default=[1.5, 3.0])
        p.add_argument("--lr", type=float, default=lr)
        p.add_argument("--batch", type=int, default=64)
        p.add_argument("--batches", type=int, default=100)
        p.add_argument("--e-min", type=int, default=100)
        p.add_argument("--f-max", type=int, default=100_000)
    r = sub.choices["regimes"]
    r.add_argument("--clip-lr", type=float, default=1.0)
    lb = sub.choices["low-bit"]
    lb.add_argument("--scheme", type=int, default=1)
    lb.add_argument("--C4", type=float, default=10.0)
    lb.add_argument("--gamma4", type=float, default=1.7)
    lb.add_argument("--C6", type=float, default=10.0)
    lb.add_argument("--offset6", type=float, default=0.5)
    args = ap.parse_args()
    regimes(args) if args.cmd == "regimes" else low_bit(args)


if __name__ == "__main__":
    main()
