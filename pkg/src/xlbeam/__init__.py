"""Beam alignment for very large partially-connected hybrid arrays:
near/far-field channel synthesis, hybrid-field beam training, closed-form
phase-shift beam refinement, and Kalman-filtered near-field tracking.
"""

__version__ = "0.1.0"

from .arrays import (ArrayConfig, ChannelRealization, ChannelScenario, FAR_FIELD,
                     PathParams, QuadraticPhase, crandn, element_distance,
                     rayleigh_distance, receive, sample_channel,
                     snr_db_to_noise_power, steering, steering_far, steering_near,
                     steering_quadratic, synthesize)
from .codebooks import (CodewordParams, HybridCodebook, SubarrayCodebook,
                        build_far_codebook, build_hybrid_codebook,
                        build_near_codebook, build_subarray_codebook,
                        codeword_params, validate_quantization)
from .combining import (CombinerPair, alignment_gain, beam_center, chirp_sum,
                        design_hybrid, flat_top_gain, gain_loss_bound, gain_map,
                        hybrid_beam_gain, quantize_pointing, subarray_pointing)
from .refinement import (RefinementResult, estimate_offsets, initial_kb,
                         measure_subarrays, phase_differences, psp_band_ok,
                         psp_model_oracle, refine, run_brpss)
from .tracking import (TrackerConfig, TrackingScenario, TrackState, Trajectory,
                       calibrate_measurement_cov, filter_update, filtered_channel,
                       measure_block, predict, run_brpss_only, run_ffbt_proxy,
                       run_hfns, run_tracking)
from .training import (Stage1Sweep, TrainedDesign, TrainingResult, assemble_reused,
                       baseline_ffbs, baseline_hfbs, design_all, rough_position,
                       run_thbt, stage1_sweep, stage2_select)

__all__ = [name for name in dir() if not name.startswith("_")]
