"""Train per-edge NNMS weights with posterior-joint gradients and inspect them.

Shows the per-iteration gradient profile of full backpropagation against the
posterior-joint estimate, then the degree trend of the trained weights.

    python3 demos/train_weights.py
"""
import numpy as np

from neuraldec.channel import ebn0_to_sigma, llr_block
from neuraldec.codes import build_tanner_graph
from neuraldec.decoders import Decoder
from neuraldec.harness import measure_fer
from neuraldec.testcodes import pbrl_surrogate
from neuraldec.training import TrainConfig, degree_trend, gradient_magnitude_profile, train, weight_statistics

H, proto = pbrl_surrogate(8)
G = build_tanner_graph(H, proto)
print(f"PBRL-style code: n={G.n}, check degrees {sorted(set(G.check_degrees.tolist()))}")

dec = Decoder(G, "nms", 0.8, "flooding", 30)
llr = llr_block(G.n, ebn0_to_sigma(0.5, H.rate), seed=3, indices=range(4))
for mode in ("full", "posterior-joint"):
    prof = gradient_magnitude_profile(dec, llr, mode=mode)
    print(f"{mode:16s} mu(1)/mu(30) = {prof.ratio(1, 30):.3g}")

cfg = TrainConfig(mode="posterior-joint", lr=200.0, momentum=0.9, batch_size=64, batches_per_epoch=40, scheme=0,
                  I_T=10, ebn0_range=(1.5, 3.0), seed=1)
W, log = train(G, cfg)
print(f"loss {log[0].J:.4f} -> {np.mean([r.J for r in log[-5:]]):.4f} over {len(log)} batches")

by_dc, _ = weight_statistics(W, G)
for t in (1, 2, 10):
    means = {dc: round(v, 3) for (tt, dc), v in sorted(by_dc.items()) if tt == t}
    print(f"t={t:2d} mean weight by check degree {means}  Kendall tau {degree_trend(by_dc, t):+.2f}")

for name, d in (("MinSum", Decoder(G, "minsum", None, "flooding", 10)),
                ("trained NNMS", Decoder(G, "nms", W, "flooding", 10))):
    r = measure_fer(d, G, 3.0, e_min=50, f_max=20000, stream=9)
    print(f"{name:13s} FER at 3 dB {r.fer:.2e} ({r.frame_errors}/{r.frames_sent})")
