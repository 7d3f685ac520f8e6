"""Block-coordinate regularization by denoising (BC-RED).

Forward models, denoisers, Moreau envelopes, solvers with convergence
traces, and a property-check suite.
"""

from .blocks import (BlockPartition, contiguous_partition, extract_block,
                     inject_block, make_partition, tile_partition)
from .denoisers import (Denoiser, Expanding, GradientStep, Identity,
                        LinearSmoother, SoftThreshold, TV1DProx, TV2DProx,
                        blockwise_denoise, check_block_nonexpansive,
                        red_objective_linear, red_operator_H)
from .estimators import BCRED, PGM, RED
from .exceptions import (BCREDError, ConfigError, DimensionMismatchError,
                         IncompatibleDenoiserError, InvalidBlockCountError,
                         InvalidStepSizeError, MalformedFileError)
from .forward import (DenseModel, FourierModel, ForwardModel, LipschitzInfo,
                      build_forward_model, estimate_lipschitz, power_iteration)
from .metrics import NoisySystem, add_noise_at_input_snr, snr_db
from .moreau import (L1, TV1D, Tikhonov, envelope_gap, moreau_gradient,
                     moreau_value, smoothed_objective)
from .solvers import (ConvergenceTrace, Problem, SolverConfig, bcred_run,
                      coordinate_descent_bound, operator_G, pgm_run,
                      red_full_run, theorem1_bound, theorem2_bound,
                      theorem2_schedule)

__version__ = "0.1.0"
