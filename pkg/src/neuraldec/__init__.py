"""Neural-weighted MinSum LDPC decoding, hand-derived training and low-bit RCQ decoding."""
from .codes import (AlistError, LayerPlan, ParityCheckMatrix, ProtoMap, TannerGraph, build_tanner_graph,
                    check_syndrome, default_layer_plan, degree_profile, gf2_rank, load_alist, parse_alist,
                    parse_protomap, save_alist, write_alist, write_protomap)
from .channel import (BatchSpec, ChannelSample, awgn_llr, batch_plan, calibrate_training_range, ebn0_to_sigma,
                      llr_block, training_batch)
from .weights import WeightSet, resolve_weight, scheme_param_count
from .decoders import (DecodeResult, Decoder, bp_decode, check_node_minsum, decode_flooding, decode_layered,
                       weighted_oms_update)
from .training import (CompactTrace, GradientProfile, GradientSet, TrainConfig, backward_full_flooding,
                       backward_layered, backward_posterior_joint_flooding, clip_gradients, forward_with_trace,
                       gradient_magnitude_profile, greedy_train, multiloss_cross_entropy, sgd_step, train,
                       weight_statistics)
from .rcq import (FixedPointSpec, QCode, QuantizerParams, QuantizerSchedule, msrcq_reference_decode,
                  quantize, quantize_weights, reconstruct, ste_gradient, wrcq_decode_layered)
from .harness import DecoderSpec, FerRecord, SweepConfig, run_fer_sweep, wilson_interval

__version__ = "0.1.0"
