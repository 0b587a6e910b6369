"""Joint carrier phase/amplitude estimation for pilot-assisted M-PSK.

Exact least-squares estimation of a complex channel gain from frames
mixing known pilot symbols and unknown PSK data symbols, together with
the asymptotic covariance theory of the estimator and a reproducible
Monte-Carlo harness that checks simulation against theory.
"""

__version__ = "0.1.0"

from .angles import grid_index, round_half_up, round_to_grid, wrap_frac, wrap_pi
from .estimators import (
    ComplexAmplitude,
    EstimateReport,
    brute_force,
    hard_decision,
    mackenthun,
    naive_enumeration,
    pilot_only,
    sum_of_squares,
    viterbi_viterbi,
)
from .model import (
    ChannelParams,
    Constellation,
    FramePlan,
    GaussianNoise,
    NoiseModel,
    ReceivedFrame,
    RingNoise,
    ZeroNoise,
    apply_channel,
    psk_points,
    random_frame,
    snr_to_kappa,
    snr_to_sigma,
)
from .simulate import (
    SweepConfig,
    SweepResult,
    SweepRow,
    amp_error,
    make_noise,
    phase_error,
    run_sweep,
)
from .theory import (
    KAPPA_FLOOR,
    CovariancePrediction,
    FigureErrors,
    NoiseFigures,
    QuadratureError,
    TheoryInput,
    TheoryRangeError,
    constants_gaussian,
    constants_mc,
    gaussian_g,
    gaussian_h1,
    gaussian_h2,
    gaussian_joint_pdf,
    predict,
)

__all__ = [
    "__version__",
    "wrap_pi", "wrap_frac", "round_to_grid", "round_half_up", "grid_index",
    "Constellation", "psk_points", "FramePlan", "ChannelParams", "ReceivedFrame",
    "NoiseModel", "GaussianNoise", "RingNoise", "ZeroNoise",
    "random_frame", "apply_channel", "snr_to_sigma", "snr_to_kappa",
    "ComplexAmplitude", "EstimateReport", "hard_decision", "mackenthun",
    "brute_force", "naive_enumeration", "pilot_only", "viterbi_viterbi",
    "sum_of_squares",
    "KAPPA_FLOOR", "TheoryRangeError", "QuadratureError", "TheoryInput",
    "NoiseFigures", "FigureErrors", "CovariancePrediction",
    "gaussian_g", "gaussian_joint_pdf", "gaussian_h1", "gaussian_h2",
    "constants_gaussian", "constants_mc", "predict",
    "SweepConfig", "SweepRow", "SweepResult", "phase_error", "amp_error",
    "make_noise", "run_sweep",
]
