//! Experiment configuration files.
//!
//! TOML, with every physical quantity carrying its unit in the key name.
//! Omitted keys take the defaults of the reference setup: 10 FBGs spaced
//! 10 m apart, PDM-QPSK at 160 MSym/s, 600 Hz laser.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::channel::{
    LaserConfig, SensorArrayConfig, StimulusBinding, StimulusWaveform, DEFAULT_GROUP_INDEX,
};
use crate::codes::generate_golay_set;
use crate::error::Error;
use crate::modulation::{build_frame, ProbeFrame, Scheme};

/// Receiver noise that puts the static phase std near 10 mrad for a 3.2 µs
/// code at -27 dBm with no laser phase noise.
pub const CALIBRATED_NOISE_SIGMA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    PdmBpsk,
    PdmQpsk,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::PdmBpsk => Scheme::PdmBpsk,
            SchemeName::PdmQpsk => Scheme::PdmQpsk,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeSection {
    pub scheme: SchemeName,
    pub n_g: usize,
    pub n_sep: usize,
    pub symbol_rate_hz: f64,
}

impl Default for CodeSection {
    fn default() -> Self {
        Self {
            scheme: SchemeName::PdmQpsk,
            n_g: 512,
            n_sep: 0,
            symbol_rate_hz: 160e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub n_fbg: usize,
    pub spacing_m: f64,
    pub reflectivity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reflectivity_profile: Option<Vec<f64>>,
    pub group_index: f64,
    pub lead_fiber_m: f64,
    pub loss_db_per_km: f64,
    /// Draws a random unitary Jones matrix per segment when set; identity
    /// segments otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polarization_seed: Option<u64>,
}

impl Default for ArraySection {
    fn default() -> Self {
        let a = SensorArrayConfig::default();
        Self {
            n_fbg: a.n_fbg,
            spacing_m: a.spacing_m,
            reflectivity: a.reflectivity,
            reflectivity_profile: None,
            group_index: DEFAULT_GROUP_INDEX,
            lead_fiber_m: a.lead_fiber_m,
            loss_db_per_km: a.loss_db_per_km,
            polarization_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaserSection {
    pub linewidth_hz: f64,
    pub wavelength_m: f64,
    pub noise_sigma: f64,
    pub signal_power_dbm: f64,
}

impl Default for LaserSection {
    fn default() -> Self {
        let l = LaserConfig::default();
        Self {
            linewidth_hz: l.linewidth_hz,
            wavelength_m: l.wavelength_m,
            noise_sigma: CALIBRATED_NOISE_SIGMA,
            signal_power_dbm: l.signal_power_dbm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StimulusShape {
    Sine,
    Chirp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusSection {
    /// 0-based index of the FBG that ends the stimulated segment.
    pub segment: usize,
    pub kind: StimulusShape,
    pub amplitude_vpp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_start_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_end_hz: Option<f64>,
    #[serde(default)]
    pub start_s: f64,
    /// Defaults to the rest of the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SeedPolicy {
    #[default]
    Fixed,
    Increment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub duration_s: f64,
    pub seed: u64,
    pub reference_index: usize,
    /// Coherent averaging over this many frames; 1 keeps one estimate per
    /// code period.
    pub average_frames: usize,
    /// How sweeps seed their points.
    pub seed_policy: SeedPolicy,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            duration_s: 0.02,
            seed: 1,
            reference_index: 0,
            average_frames: 1,
            seed_policy: SeedPolicy::Fixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Defaults to the whole map.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_window_s: Option<f64>,
    /// Row whose spectrum is exported; defaults to the first stimulated
    /// segment, or the last FBG.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psd_fbg: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CaptureFormat {
    #[default]
    None,
    Iqc1,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub capture: CaptureFormat,
    pub phase_map: bool,
    pub psd: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            capture: CaptureFormat::None,
            phase_map: true,
            psd: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub code: CodeSection,
    pub array: ArraySection,
    pub laser: LaserSection,
    pub run: RunSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
    pub stimulus: Vec<StimulusSection>,
}

/// A configuration problem, with the 1-based line it was found on when that
/// can be told.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key = ...` assignment, optionally within `[section]`.
fn line_of_key(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut in_section = section.is_none();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            in_section = section == Some(name.trim_matches(['[', ']', ' ']));
            continue;
        }
        if in_section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Line of `key` inside the `index`-th `[[section]]` block.
fn line_of_array_key(text: &str, section: &str, index: usize, key: &str) -> Option<usize> {
    let mut block: Option<usize> = None;
    let mut count = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix("[[").and_then(|l| l.strip_suffix("]]")) {
            if name.trim() == section {
                block = Some(count);
                count += 1;
            } else {
                block = None;
            }
            if block == Some(index) && key.is_empty() {
                return Some(i + 1);
            }
            continue;
        }
        if line.starts_with('[') {
            block = None;
            continue;
        }
        if block == Some(index) {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl ExperimentConfig {
    /// Parses and validates config text.
    pub fn from_toml(text: &str) -> std::result::Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate().map_err(|(loc, msg)| ConfigError {
            line: match loc {
                Location::Key(section, key) => line_of_key(text, Some(section), key),
                Location::Stimulus(i, key) => line_of_array_key(text, "stimulus", i, key)
                    .or_else(|| line_of_array_key(text, "stimulus", i, "")),
            },
            message: msg,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_toml(&text)
    }

    /// The resolved configuration, every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn array_config(&self) -> SensorArrayConfig {
        let a = &self.array;
        let base = SensorArrayConfig {
            n_fbg: a.n_fbg,
            spacing_m: a.spacing_m,
            reflectivity: a.reflectivity,
            reflectivity_profile: a.reflectivity_profile.clone(),
            group_index: a.group_index,
            lead_fiber_m: a.lead_fiber_m,
            loss_db_per_km: a.loss_db_per_km,
            stimuli: self.stimulus_bindings(),
            ..SensorArrayConfig::with_fbg_count(a.n_fbg)
        };
        match a.polarization_seed {
            Some(seed) => base.with_random_polarization(seed),
            None => base,
        }
    }

    pub fn laser_config(&self) -> LaserConfig {
        let l = &self.laser;
        LaserConfig {
            linewidth_hz: l.linewidth_hz,
            wavelength_m: l.wavelength_m,
            noise_sigma: l.noise_sigma,
            signal_power_dbm: l.signal_power_dbm,
        }
    }

    pub fn stimulus_bindings(&self) -> Vec<StimulusBinding> {
        self.stimulus
            .iter()
            .map(|s| {
                let duration = s.duration_s.unwrap_or(self.run.duration_s - s.start_s);
                let mut waveform = match s.kind {
                    StimulusShape::Sine => {
                        StimulusWaveform::sine(s.amplitude_vpp, s.frequency_hz.unwrap_or(0.0), duration)
                    }
                    StimulusShape::Chirp => StimulusWaveform::chirp(
                        s.amplitude_vpp,
                        s.f_start_hz.unwrap_or(0.0),
                        s.f_end_hz.unwrap_or(0.0),
                        duration,
                    ),
                };
                waveform.start_s = s.start_s;
                StimulusBinding {
                    segment: s.segment,
                    waveform,
                }
            })
            .collect()
    }

    pub fn probe_frame(&self) -> crate::Result<ProbeFrame> {
        let set = generate_golay_set(self.code.n_g)?;
        build_frame(&set, self.code.scheme.into(), self.code.n_sep, self.code.symbol_rate_hz)
    }

    fn validate(&self) -> std::result::Result<(), (Location, String)> {
        let key = |s: &'static str, k: &'static str| Location::Key(s, k);
        let n_g = self.code.n_g;
        if n_g < 4 || !n_g.is_power_of_two() {
            return Err((key("code", "n_g"), format!("n_g must be a power of two >= 4, got {n_g}")));
        }
        for (i, s) in self.stimulus.iter().enumerate() {
            if s.segment >= self.array.n_fbg {
                return Err((
                    Location::Stimulus(i, "segment"),
                    format!("stimulus segment {} outside 0..{}", s.segment, self.array.n_fbg),
                ));
            }
            let missing = match s.kind {
                StimulusShape::Sine if s.frequency_hz.is_none() => Some("sine stimulus needs frequency_hz"),
                StimulusShape::Chirp if s.f_start_hz.is_none() || s.f_end_hz.is_none() => {
                    Some("chirp stimulus needs f_start_hz and f_end_hz")
                }
                _ => None,
            };
            if let Some(msg) = missing {
                return Err((Location::Stimulus(i, ""), msg.into()));
            }
        }

        let array = self.array_config();
        if let Err(e) = array.validate() {
            let msg = strip_kind(e);
            return Err((key("array", array_key_for(&msg)), msg));
        }
        if let Err(e) = array.symbols_per_segment(self.code.symbol_rate_hz) {
            return Err((key("code", "symbol_rate_hz"), strip_kind(e)));
        }
        let frame = self
            .probe_frame()
            .map_err(|e| (key("code", "symbol_rate_hz"), strip_kind(e)))?;
        if let Err(e) = self.laser_config().validate() {
            let msg = strip_kind(e);
            let k = [("linewidth", "linewidth_hz"), ("sigma", "noise_sigma"), ("wavelength", "wavelength_m")]
                .into_iter()
                .find(|(needle, _)| msg.contains(needle))
                .map_or("signal_power_dbm", |(_, k)| k);
            return Err((key("laser", k), msg));
        }

        let f_max = frame.max_mechanical_frequency_hz();
        for (i, (s, b)) in self.stimulus.iter().zip(self.stimulus_bindings()).enumerate() {
            if let Err(e) = b.waveform.validate(Some(f_max)) {
                let k = if !(s.amplitude_vpp >= 0.0) {
                    "amplitude_vpp"
                } else {
                    match s.kind {
                        StimulusShape::Sine => "frequency_hz",
                        StimulusShape::Chirp => "f_end_hz",
                    }
                };
                return Err((Location::Stimulus(i, k), strip_kind(e)));
            }
        }

        let min = 2.0 * frame.duration_s();
        if !(self.run.duration_s >= min) {
            return Err((
                key("run", "duration_s"),
                format!(
                    "duration_s {} s is shorter than two code periods ({min} s)",
                    self.run.duration_s
                ),
            ));
        }
        if self.run.reference_index >= self.array.n_fbg {
            return Err((key("run", "reference_index"), "reference_index outside the array".into()));
        }
        if self.run.average_frames == 0 {
            return Err((key("run", "average_frames"), "average_frames must be >= 1".into()));
        }
        if let Some(w) = self.analysis.std_window_s {
            if !(w > 0.0 && w <= self.run.duration_s) {
                return Err((key("analysis", "std_window_s"), "std_window_s must lie in (0, duration_s]".into()));
            }
        }
        if let Some(k) = self.analysis.psd_fbg {
            if k >= self.array.n_fbg {
                return Err((key("analysis", "psd_fbg"), "psd_fbg outside the array".into()));
            }
        }
        Ok(())
    }
}

enum Location {
    Key(&'static str, &'static str),
    Stimulus(usize, &'static str),
}

/// Config key an array validation message is about.
fn array_key_for(msg: &str) -> &'static str {
    [
        ("spacing", "spacing_m"),
        ("group index", "group_index"),
        ("lead fiber", "lead_fiber_m"),
        ("loss", "loss_db_per_km"),
        ("profile", "reflectivity_profile"),
        ("reflectivity", "reflectivity"),
    ]
    .into_iter()
    .find(|(needle, _)| msg.contains(needle))
    .map_or("n_fbg", |(_, k)| k)
}

fn strip_kind(e: Error) -> String {
    match e {
        Error::InvalidArgument(m) | Error::Configuration(m) | Error::Precondition(m) => m,
        other => other.to_string(),
    }
}
