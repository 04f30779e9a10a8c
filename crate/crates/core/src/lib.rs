//! Secure key rates for four-state QKD with weak coherent pulses or
//! heralded single-photon sources.
//!
//! The model follows a photon pair source with Poissonian pair statistics
//! whose idler is measured by a heralding detector, summarized by the
//! probabilities `(q0, q1, q2)` of an "exactly one photon" outcome given
//! 0, 1 or 2 input photons. Weak coherent pulses are the special case
//! `q0 = q1 = q2 = 1`.
//!
//! * [`protocol`]: BB84/SARG04 information functions and threshold constants.
//! * [`source_detector`]: pair statistics and the splitter-tree detector.
//! * [`keyrate`]: detection probability, QBER, single-photon fraction, key rate.
//! * [`analysis`]: optimization over pump strength, closed-form limits,
//!   minimum transmission, scans and power-law fits.

pub mod analysis;
pub mod error;
pub mod keyrate;
pub mod numeric;
pub mod protocol;
pub mod source_detector;

pub use analysis::{
    fit_power_law, fit_prefactor, lambda_opt_heralded, optimal_stage_count, optimize_lambda,
    scan_key_rate, short_distance_approx_rate, short_distance_key_rate, short_distance_lambda,
    tmin_heralded, tmin_numerical, tmin_single_photon, tmin_wcp, OptimizationResult,
    OptimizerConfig, PowerLawFit, PumpOptimum, ScanPoint, ScanSeries,
};
pub use error::{Error, Result};
pub use keyrate::{
    expected_click_prob, key_rate, qber, renormalized_key_rate, single_photon_fraction,
    ChannelParams, KeyRateReport, ModelStatus, SourceParams,
};
pub use protocol::{
    binary_entropy, compute_xi, mutual_info_ab, solve_qber_threshold, Protocol, ProtocolSpec,
};
pub use source_detector::{
    advantage_threshold, approx_distance_factor, brute_force_response, distance_factor,
    multiplexed_response, poisson_pair_stats, short_distance_factor, wcp_response, HeraldResponse,
    MultiplexedDetectorParams, PhotonStatistics,
};
