"""Distributed collaborative OMP for sparsity pattern recovery."""

from .errors import (
    ConfigError,
    DegenerateResidualError,
    InsufficientDataError,
    InvalidParameterError,
    SingularProjectionError,
)
from .model import (
    H0,
    H1,
    ProblemInstance,
    SparseSignal,
    SupportSet,
    gen_measurement_matrix,
    gen_signal,
    gen_support,
    make_instance,
    measure,
    snr_to_noise_variance,
)
from .omp_kernel import OmpState, match_index, omp_path, omp_run, project_and_update
from .fusion import AnnouncementRound, FusionOutcome, duplicate_indices, fuse_broadcast, fuse_neighborhood
from .dc_omp import DcOmpResult, NetworkTopology, dc_omp_run, truncate_fused
from .detect import DetectionConfig, DetectionState, decide, detect_and_estimate, rho, update_i_index
from .baselines import d_omp_independent, majority_fuse, s_omp_path, s_omp_run

__version__ = "0.1.0"
