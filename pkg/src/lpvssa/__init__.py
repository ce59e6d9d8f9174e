"""Covariance-based realization and identification of stochastic affine LPV state-space models."""

from .covariances import MatrixSeries, empirical_output_moments, empirical_psi_uy, z_path
from .errors import (
    IdentificationError,
    IndefiniteError,
    InputError,
    LpvError,
    MissingWordError,
    NumericalError,
    ParseError,
    RankDeficiencyError,
    RealizationError,
)
from .hankel import Selection, build_hankel, search_selection
from .identify import IdentifyConfig, IdentifyReport, consistency_sweep, identify
from .kernels import BACKEND
from .metrics import FitReport, bfr, snr_db, vaf
from .model import Dataset, LpvSsaModel, SignalSpec, generate, predict_one_step, simulate, sub_markov
from .realization import (
    compose,
    ho_kalman,
    realize_deterministic,
    realize_stochastic,
    solve_stationary_lyapunov,
    stochastic_recursion,
)

__version__ = "0.1.0"
