"""Decode a few noisy frames, then run a small FER sweep for MinSum and NMS.

    python3 demos/decode_and_sweep.py
"""
import tempfile
from pathlib import Path

from neuraldec.channel import ebn0_to_sigma, llr_block
from neuraldec.codes import build_tanner_graph, save_alist
from neuraldec.decoders import Decoder
from neuraldec.harness import DecoderSpec, SweepConfig, run_fer_sweep
from neuraldec.testcodes import regular_code

H = regular_code(96, 3, 6, seed=3)
G = build_tanner_graph(H)
print(f"(3,6)-regular code: n={G.n}, m={G.m}, edges={G.num_edges}, rate={H.rate:.3f}")

# all-zero codeword over BPSK/AWGN at 2.5 dB
llr = llr_block(G.n, ebn0_to_sigma(2.5, H.rate), seed=0, indices=range(8))
for family, w in (("minsum", None), ("nms", 0.75)):
    res = Decoder(G, family, w, "layered", 20).decode(llr)
    print(f"{family:7s} converged {res.converged.sum()}/8, iterations {res.iterations_used.tolist()}, "
          f"bit errors {res.hard_bits.sum(1).tolist()}")

with tempfile.TemporaryDirectory() as d:
    code = Path(d) / "reg96.alist"
    save_alist(H, code)
    for spec in (DecoderSpec("minsum", "flooding", 20), DecoderSpec("nms", "flooding", 20, 0.75)):
        cfg = SweepConfig(str(code), decoder=spec, ebn0_lo=1.0, ebn0_hi=3.0, ebn0_step=1.0, e_min=50,
                          f_max=20000, master_seed=1)
        for r in run_fer_sweep(cfg).records:
            lo, hi = r.wilson()
            print(f"{spec.describe():28s} {r.ebn0_db:4.1f} dB  FER {r.fer:.2e}  [{lo:.1e}, {hi:.1e}]  "
                  f"({r.frame_errors}/{r.frames_sent})")
