"""Command-line entry point: ``neuraldec <subcommand>`` or ``python3 -m neuraldec``.

Sweep and train read a JSON config; every config field can be overridden by
the flag of the same name (underscores become dashes).
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import MISSING, fields
from pathlib import Path

import numpy as np

from .channel import awgn_llr, ebn0_to_sigma
from .harness import DecoderSpec, SweepConfig, build_decoder, load_graph, run_fer_sweep
from .weights import WeightSet, scheme_param_count


def _add_dataclass_flags(p: argparse.ArgumentParser, cls, skip=()) -> None:
    for f in fields(cls):
        if f.name in skip or f.name.startswith("_"):
            continue
        flag = "--" + f.name.replace("_", "-")
        typ = str(f.type)
        if "bool" in typ:
            p.add_argument(flag, dest=f.name, default=None, action=argparse.BooleanOptionalAction)
        elif "tuple" in typ:
            p.add_argument(flag, dest=f.name, default=None, type=float, nargs=2)
        else:
            conv = int if typ.startswith("int") else float if typ.startswith("float") else str
            p.add_argument(flag, dest=f.name, default=None, type=conv)


def _overrides(args, cls, skip=()) -> dict:
    return {f.name: getattr(args, f.name) for f in fields(cls)
            if f.name not in skip and getattr(args, f.name, None) is not None}


def _read_config(path) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


# -------------------------------------------------------------- subcommands

def cmd_decode(args) -> int:
    G = load_graph(args.code, args.proto)
    spec = DecoderSpec(**_overrides(args, DecoderSpec))
    dec = build_decoder(G, spec)
    if args.llr:
        llr = np.loadtxt(args.llr, dtype=float).ravel()
        tx = np.zeros(G.n, dtype=np.uint8)
    else:
        tx = np.zeros(G.n, dtype=np.uint8)
        llr = awgn_llr(tx, ebn0_to_sigma(args.ebn0, G.H.rate), args.seed, args.index).llr
    res = dec.decode(llr)
    out = {"converged": bool(res.converged), "iterations_used": int(res.iterations_used),
           "bit_errors": int(np.sum(res.hard_bits != tx)),
           "hard_bits": "".join(map(str, res.hard_bits.tolist())) if args.show_bits else None}
    print(json.dumps(out))
    return 0


def cmd_sweep(args) -> int:
    d = _read_config(args.config)
    d.update(_overrides(args, SweepConfig, skip=("decoder",)))
    dec = dict(d.get("decoder", {}))
    dec.update(_overrides(args, DecoderSpec))
    d["decoder"] = dec
    if "code" not in d:
        print("sweep: a code file is required (--code or config)", file=sys.stderr)
        return 2
    cfg = SweepConfig.from_dict(d)

    def show(r):
        lo, hi = r.wilson()
        print(f"{r.ebn0_db:6.2f} dB  frames={r.frames_sent:9d}  errors={r.frame_errors:6d}  "
              f"FER={r.fer:.3e} [{lo:.2e}, {hi:.2e}]  BER={r.ber:.3e}", flush=True)

    res = run_fer_sweep(cfg, progress=show)
    if res.truncated:
        print("sweep interrupted; partial results written with truncated=true", file=sys.stderr)
        return 130
    return 0


def cmd_train(args) -> int:
    from .training import TrainConfig, train
    d = _read_config(args.config)
    codes = d.pop("codes", [])
    out = args.out or d.pop("out", "weights.json")
    log = args.log or d.pop("log", None)
    ckpt_dir = args.checkpoint_dir or d.pop("checkpoint_dir", None)
    qfile = d.pop("quantizers", None)
    d.pop("out", None), d.pop("log", None), d.pop("checkpoint_dir", None)
    if args.code:
        codes = [{"code": c, "proto": p} for c, p in zip(args.code, (args.proto or []) + [None] * len(args.code))]
    if not codes:
        print("train: no code files given", file=sys.stderr)
        return 2
    d.update(_overrides(args, TrainConfig, skip=("quantizers",)))
    if qfile:
        from .rcq import load_quantizers
        with open(qfile) as fh:
            d["quantizers"] = load_quantizers(fh.read())[0]
    cfg = TrainConfig(**d)
    graphs = [load_graph(c["code"], c.get("proto")) for c in codes]
    for c, G in zip(codes, graphs):
        try:
            scheme_param_count(G, cfg.scheme)
        except ValueError as exc:
            print(f"train: {c['code']}: {exc}", file=sys.stderr)
            return 2

    def checkpoint(epoch, W):
        if ckpt_dir:
            Path(ckpt_dir).mkdir(parents=True, exist_ok=True)
            W.save(Path(ckpt_dir) / f"epoch{epoch:04d}.json")

    W, rows = train(graphs, cfg, log_path=log, checkpoint=checkpoint)
    W.save(out)
    print(f"wrote {out}: type {W.scheme}, {W.params_per_iteration} parameters per iteration, "
          f"final J={rows[-1].J:.6f}" if rows else f"wrote {out}")
    return 0


def cmd_stats(args) -> int:
    from .training import weight_statistics, write_weight_statistics
    G = load_graph(args.code, args.proto)
    W = WeightSet.load(args.weights)
    by_dc, by_dcdv = weight_statistics(W, G)
    write_weight_statistics(by_dc, args.out)
    if args.out_dcdv:
        write_weight_statistics(by_dcdv, args.out_dcdv)
    print(f"wrote {args.out}")
    return 0


def cmd_profile(args) -> int:
    from .channel import llr_block
    from .decoders import Decoder
    from .training import gradient_magnitude_profile
    G = load_graph(args.code, args.proto)
    weights = WeightSet.load(args.weights) if args.weights else args.factor
    dec = Decoder(G, args.family, weights, args.schedule, args.max_iter)
    llr = llr_block(G.n, ebn0_to_sigma(args.ebn0, G.H.rate), args.seed, range(args.frames))
    prof = gradient_magnitude_profile(dec, llr, mode=args.mode)
    prof.to_csv(args.out)
    print(f"wrote {args.out}: mu(1)/mu({args.max_iter}) = {prof.ratio(1, args.max_iter):.3e}")
    return 0


def cmd_quantize_weights(args) -> int:
    from .rcq import FixedPointSpec, load_quantizers, quantize_weights
    with open(args.quantizers) as fh:
        qs, fx = load_quantizers(fh.read())
    if args.b_v is not None or fx is None:
        fx = FixedPointSpec.for_quantizers(qs, args.b_v or 8)
    W = quantize_weights(WeightSet.load(args.weights), fx)
    W.save(args.out)
    print(f"wrote {args.out} (v_step={fx.v_step!r})")
    return 0


def cmd_params(args) -> int:
    G = load_graph(args.code, args.proto)
    for t in range(9):
        try:
            print(f"type {t}: {scheme_param_count(G, t)}")
        except ValueError:
            print(f"type {t}: needs a protomatrix sidecar")
    return 0


def cmd_validate(args) -> int:
    from .validate import run_checks
    G = load_graph(args.code, args.proto)
    results = run_checks(G, frames=args.frames, seed=args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="neuraldec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    def code_args(sp):
        sp.add_argument("--code", required=True, help="alist file")
        sp.add_argument("--proto", help="protomatrix sidecar file")

    sp = sub.add_parser("decode", help="decode one frame and print the outcome")
    code_args(sp)
    _add_dataclass_flags(sp, DecoderSpec)
    sp.add_argument("--llr", help="text file of channel LLRs (default: draw a frame)")
    sp.add_argument("--ebn0", type=float, default=2.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--index", type=int, default=0)
    sp.add_argument("--show-bits", action="store_true")
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("sweep", help="Monte-Carlo FER sweep")
    sp.add_argument("--config", help="JSON sweep config")
    _add_dataclass_flags(sp, SweepConfig, skip=("decoder",))
    _add_dataclass_flags(sp, DecoderSpec)
    sp.set_defaults(func=cmd_sweep)

    from .training import TrainConfig
    sp = sub.add_parser("train", help="train decoder weights")
    sp.add_argument("--config", help="JSON training config")
    sp.add_argument("--code", action="append", help="alist file (repeat for rate-compatible training)")
    sp.add_argument("--proto", action="append", help="sidecar for the matching --code")
    sp.add_argument("--out", help="weight file to write")
    sp.add_argument("--log", help="training log CSV")
    sp.add_argument("--checkpoint-dir", help="directory for per-epoch weight files")
    _add_dataclass_flags(sp, TrainConfig, skip=("quantizers",))
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("stats", help="group means of a type-0 weight set")
    code_args(sp)
    sp.add_argument("--weights", required=True)
    sp.add_argument("--out", required=True, help="CSV of (t, dc, mean)")
    sp.add_argument("--out-dcdv", help="CSV of (t, dc, dv, mean)")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("profile", help="per-iteration C2V gradient magnitudes")
    code_args(sp)
    sp.add_argument("--family", default="nms", choices=["minsum", "nms", "oms"])
    sp.add_argument("--factor", type=float, default=None)
    sp.add_argument("--weights")
    sp.add_argument("--schedule", default="flooding")
    sp.add_argument("--max-iter", type=int, default=50)
    sp.add_argument("--mode", default="full", choices=["full", "posterior-joint"])
    sp.add_argument("--ebn0", type=float, default=1.0)
    sp.add_argument("--frames", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("quantize-weights", help="round trained weights onto the b_v grid")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--quantizers", required=True, help="quantizer list file")
    sp.add_argument("--b-v", type=int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_quantize_weights)

    sp = sub.add_parser("params", help="parameters per iteration for every sharing type")
    code_args(sp)
    sp.set_defaults(func=cmd_params)

    sp = sub.add_parser("validate", help="run the invariant suite on a code")
    code_args(sp)
    sp.add_argument("--frames", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, KeyError) as exc:
        print(f"{args.cmd}: error: {exc}", file=sys.stderr)
        return 2
