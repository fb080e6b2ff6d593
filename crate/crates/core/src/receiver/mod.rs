//! Correlation receiver: per-frame Jones estimates, phase extraction and the
//! space-time phase map.

mod estimate;
mod phase_map;

pub use estimate::{
    average_estimates, check_delays, correlation_profile, detect_peaks, estimate_jones,
    estimate_jones_unchecked, estimate_window, CorrelationProfile, JonesEstimateFrame,
};
pub use phase_map::{build_phase_map, extract_phase, PhaseMap, UnwrapQuality, UNWRAP_WARN_FRACTION};
