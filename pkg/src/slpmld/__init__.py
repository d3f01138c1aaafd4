"""Symbol-level precoding for multi-user MIMO downlink with QAM and ML receivers."""

from .channel import ChannelSet, RngStream, awgn, sample_channel
from .constellation import (
    Constellation,
    IndexPartition,
    PointClass,
    PointKind,
    SymbolBases,
    build_constellation,
    build_index_partition,
    classify_point,
    decompose_symbol,
    demap,
    map_bits,
)
from .detection import (
    DetectionResult,
    EffectiveChannel,
    combine_and_demod,
    mld_detect,
    qr_mld_detect,
    qrm_mld_detect,
    von_neumann_bound,
)
from .errors import (
    BudgetError,
    ConfigurationError,
    ContractError,
    ConvergenceError,
    DegenerateChannelError,
    InfeasibleError,
    InvalidSymbolError,
    NumericError,
    SlpError,
)
from .precoding import (
    CiGeometry,
    CombinerSet,
    PrecodeOutcome,
    bd_precoder,
    build_ci_geometry,
    joint_design_ao,
    optimal_combiner,
    sdp_precoder,
    slp_closed_form,
    ssvmp_precoder,
    verify_rank_structure,
)
from .sim import BerRecord, ConvergenceTrace, SimConfig, export_results, run_ber_sweep, run_convergence_probe
from .solvers import DualVector, MinEigProblem, SimplexQp, kkt_residuals, solve_min_eig, solve_simplex_qp

__version__ = "0.1.0"
