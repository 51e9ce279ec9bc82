"""SIMO-OFDM link simulation and receiver benchmark."""

from .backbone import (BackboneParams, WienerOperatorSet, backbone_forward,
                       build_operators, load_params, save_params, soft_decision)
from .bench import (ReportRow, SweepConfig, channel_mse, emit_report,
                    flop_report, run_sweep)
from .channel import (ChannelParams, CorrelationSpec, Slot, correlation_for,
                      correlation_matrices, exp_pdp_freq_corr, jakes_time_corr,
                      sample_channel, slot_seed, snr_db_to_sigma2,
                      synthesize_slot, toeplitz_hermitian)
from .datasets import (DatasetManifest, build_network_input, read_dataset,
                       split_dataset, write_dataset)
from .grid import (CONSTELLATION, PilotPattern, bit_error_count, bits_to_symbol,
                   bits_to_symbols, hard_project, pilot_sequence, symbol_to_bits,
                   symbols_to_bits)
from .perturb import apply_asymmetric_noise, apply_cfo
from .receiver import (ReceiverConfig, ReceiverOutput, estimate_noise_variance,
                       extrapolate_first_symbol, ls_full, ls_pilot_estimate,
                       mmse_detect, run_iterative, run_noniterative, wiener_freq,
                       wiener_interp_pilots, wiener_time)
from .softdemap import EffectiveGainGrid, SoftBitGrid, effective_gain, llr, llr_to_prob

__version__ = "0.1.0"
