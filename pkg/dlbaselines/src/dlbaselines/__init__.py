"""Neural receivers trained against simulator-emitted slot datasets."""

from .data import SlotDataset, load_slots, network_input, split_indices
from .densenet import (TARGET_PARAMETER_COUNT, bce_loss, build_densenet,
                       parameter_count)
from .hypernet import HyperWienerNet, unpack_scalars
from .train import (TrainConfig, cfo_retraining_schedule, rows_to_csv,
                    train_and_evaluate)
from .unrolled import llr_bce_loss, soft_decision, toeplitz_hermitian, unrolled_forward

__version__ = "0.1.0"
