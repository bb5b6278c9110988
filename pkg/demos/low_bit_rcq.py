"""Four-bit reconstruction-computation-quantization decoding.

Compares a uniform 4-bit OMS quantizer with a non-uniform one (gamma > 1)
that spends its levels on small magnitudes.

    python3 demos/low_bit_rcq.py
"""
from neuraldec.codes import build_tanner_graph
from neuraldec.harness import measure_fer
from neuraldec.rcq import FixedPointSpec, QuantizerParams, QuantizerSchedule, RCQDecoder
from neuraldec.testcodes import pbrl_surrogate
from neuraldec.weights import WeightSet

H, proto = pbrl_surrogate(8)
G = build_tanner_graph(H, proto)

for C, gamma, offset in ((8.0, 1.0, 0.25), (10.0, 1.7, 0.0)):
    q = QuantizerParams(C, gamma, 4)
    print(f"C={C}, gamma={gamma}: thresholds {q.thresholds.round(2).tolist()}")
    qs = QuantizerSchedule([q], 10)
    fx = FixedPointSpec.for_quantizers(qs, 8)
    W = WeightSet.constant(G, offset, 10, "oms") if offset else None
    dec = RCQDecoder(G, qs, fx, W, "oms", 10)
    for snr in (2.5, 3.0):
        r = measure_fer(dec, G, snr, e_min=50, f_max=20000, stream=4)
        print(f"  {snr} dB  FER {r.fer:.2e} ({r.frame_errors}/{r.frames_sent})")
