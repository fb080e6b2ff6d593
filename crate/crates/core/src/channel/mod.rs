//! Fiber channel: sensor array geometry, polarization, stimuli, laser noise
//! and the sample-level simulator.

mod array;
mod capture;
mod jones;
mod laser;
mod simulate;
mod stimulus;

pub use array::{
    build_impulse_response, format_rate, ChannelModel, SensorArrayConfig, Tap,
    DEFAULT_GROUP_INDEX, SPEED_OF_LIGHT_M_PER_S, SYMBOLS_PER_SEGMENT_MULTIPLE,
};
pub use capture::{IQCapture, IQC1_HEADER_LEN, IQC1_MAGIC};
pub use jones::JonesMatrix;
pub use laser::{LaserConfig, REFERENCE_SIGNAL_POWER_DBM};
pub use simulate::{propagate, propagate_model, Simulator};
pub use stimulus::{
    stimulus_phase, voltage_to_phase, StimulusBinding, StimulusKind, StimulusWaveform,
    EXTENSION_NM_PER_RADIAN, PIEZO_EXTENSION_NM_PER_VOLT,
};
