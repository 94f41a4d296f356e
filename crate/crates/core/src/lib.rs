//! Information-theoretic detection of a single Swerling-0 point target in
//! complex white Gaussian noise.
//!
//! The crate covers the whole chain: snapshot synthesis ([`sigmodel`]), the
//! detection statistic and posterior ([`channel`]), decision rules
//! ([`detectors`]), detection-information estimators ([`metrics`]) and the
//! m-snapshot typical-set machinery ([`typicality`]).

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod detectors;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod sigmodel;
pub mod specialfns;
pub mod stats;
pub mod typicality;

pub use channel::{
    detection_statistic, posterior, special_case_statistic, ChannelEvaluator, ChannelMode,
    DetectionStatistic, PosteriorPair, DEFAULT_OVERSAMPLE,
};
pub use detectors::{
    map_decide, np_decide, np_threshold, sap_decide, typical_set_decide, Decision, Detector,
    DetectorId, NpConfig,
};
pub use error::{Error, Result};
pub use metrics::{
    di_monte_carlo, invert_prior_from_pfa, kondo_di, np_theoretical_di, theoretical_pfa_pd,
    ConfusionCounts, DIEstimate,
};
pub use rng::{Lane, StreamKey, Substream};
pub use sigmodel::{
    matched_filter, noise_field, synthesize, synthesize_with_state, PhaseMode, ScenarioConfig,
    Snapshot, TargetState,
};
pub use specialfns::{binary_entropy, log_i0, log_sum_exp, marcum_q1, sinc, LogValue};
pub use typicality::{
    count_conditional_typical, estimate_reference_entropies, extended_fano_check,
    is_jointly_typical, is_typical_state_seq, run_extended_detection, ReferenceEntropies,
    TypicalityConfig,
};
