"""Oversampled spectrum-sensing detectors with a Monte Carlo ROC harness.

Detection statistics for white and colored Gaussian noise under noise-power
uncertainty, an offline calibration stage (noise PSD + covariance whitening),
scenario waveform generators, and the simulation machinery to compare
detectors on empirical ROC curves.
"""

__version__ = "0.1.0"

from .backend import active_backend
from .calibration import CalibrationProfile, calibrate, load_profile, save_profile
from .covariance import (
    arrange_matrix,
    eigvals_hermitian,
    sample_correlation,
    scm,
    whitening_matrix,
)
from .detectors import (
    REGISTRY,
    DetectorKind,
    eigen_statistic,
    orient,
    t_ac,
    t_ac1,
    t_cov,
    t_ed,
    t_ed_all,
    t_enp_ed,
    t_f_agm,
    t_fc,
    t_fkl,
    t_search_b,
    t_sf,
    t_w_enp_ed,
    t_wf_agm,
    whitened_eigen_statistic,
)
from .exceptions import (
    CalibrationError,
    ConfigError,
    DegenerateInput,
    FormatError,
    InvalidArgument,
    SpecsenseError,
)
from .roc import (
    RocCurve,
    TrialBatch,
    empirical_rates,
    empirical_roc,
    mc_stderr,
    pd_at_pfa,
    run_trials,
    threshold_for_pfa,
)
from .spectral import (
    BandIndexSet,
    Periodogram,
    band_bins,
    bartlett_periodogram,
    bin_frequencies,
    whiten_periodogram,
)
from .validation import GofReport, anderson_darling, jarque_bera, validate_iq
from .waveforms import (
    IqBuffer,
    NoisePsdShape,
    ScenarioConfig,
    default_lowpass_shape,
    draw_noise_power,
    gen_colored_noise,
    gen_ofdm,
    gen_white_noise,
    make_trial,
    measured_power,
    trial_rng,
)
