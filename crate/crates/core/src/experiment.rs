//! End-to-end runs: config → frame → channel → receiver → metrics → files.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis::{crosstalk_rejection, fit_tone, phase_std, psd, sensitivity, MetricReport, MIN_PSD_FRAMES};
use crate::channel::{ChannelModel, IQCapture, Simulator, StimulusKind};
use crate::config::{CaptureFormat, ExperimentConfig, SeedPolicy};
use crate::error::{Error, Result};
use crate::receiver::{average_estimates, build_phase_map, check_delays, estimate_window, JonesEstimateFrame, PhaseMap};

/// Samples simulated per block when no capture is kept.
const STREAM_BLOCK_SAMPLES: usize = 1 << 22;

/// Everything one run produces.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub map: PhaseMap,
    pub report: MetricReport,
    pub delays: Vec<usize>,
    pub capture: Option<IQCapture>,
}

impl ExperimentResult {
    pub fn summary(&self) -> String {
        format!(
            "frames={} f_max_hz={} mean_std_rad={:.6e} unwrap_flags={}",
            self.report.frames, self.report.f_max_hz, self.report.mean_std, self.report.unwrap_flags
        )
    }
}

/// Runs the configured experiment. The capture is only materialized when
/// `keep_capture` is set; otherwise frames are simulated and estimated in
/// blocks.
pub fn run_experiment(cfg: &ExperimentConfig, keep_capture: bool) -> Result<ExperimentResult> {
    let frame = cfg.probe_frame()?;
    let array = cfg.array_config();
    let laser = cfg.laser_config();
    let f_s = frame.symbol_rate_hz();
    let delays = array.tap_delays(f_s)?;
    check_delays(&frame, &delays)?;
    let model = ChannelModel::from_array(&array, &laser, f_s)?;

    let n = frame.period();
    let total = (cfg.run.duration_s * f_s).round() as usize;
    let n_frames = total / n;
    if n_frames < 2 {
        return Err(Error::invalid("run covers fewer than 2 code periods"));
    }

    let mut sim = Simulator::new(&frame, &model, &laser, cfg.run.seed)?;
    let mut estimates: Vec<JonesEstimateFrame> = Vec::with_capacity(n_frames);
    let capture = if keep_capture {
        let mut rx = vec![Complex64::default(); total];
        let mut ry = vec![Complex64::default(); total];
        sim.fill(&mut rx, &mut ry);
        estimates.extend((0..n_frames).into_par_iter().map(|f| {
            let r = f * n..(f + 1) * n;
            estimate_window(&rx[r.clone()], &ry[r], &frame, &delays, f)
        }).collect::<Vec<_>>());
        Some(IQCapture::new(rx, ry, f_s, cfg.run.seed)?)
    } else {
        let per_block = (STREAM_BLOCK_SAMPLES / n).max(1);
        let mut rx = vec![Complex64::default(); per_block * n];
        let mut ry = vec![Complex64::default(); per_block * n];
        let mut done = 0;
        while done < n_frames {
            let count = per_block.min(n_frames - done);
            let (bx, by) = (&mut rx[..count * n], &mut ry[..count * n]);
            sim.fill(bx, by);
            let (bx, by) = (&*bx, &*by);
            estimates.extend((0..count).into_par_iter().map(|i| {
                let r = i * n..(i + 1) * n;
                estimate_window(&bx[r.clone()], &by[r], &frame, &delays, done + i)
            }).collect::<Vec<_>>());
            done += count;
        }
        None
    };

    let estimates = if cfg.run.average_frames > 1 {
        average_estimates(&estimates, cfg.run.average_frames)?
    } else {
        estimates
    };
    let map = build_phase_map(&estimates, cfg.run.reference_index)?;
    let report = metrics(cfg, &map)?;
    Ok(ExperimentResult {
        map,
        report,
        delays,
        capture,
    })
}

fn metrics(cfg: &ExperimentConfig, map: &PhaseMap) -> Result<MetricReport> {
    let window = cfg.analysis.std_window_s.unwrap_or(map.duration_s()).min(map.duration_s());
    let std = phase_std(map, window)?;
    let mut report = MetricReport {
        per_fbg_std: std.per_fbg,
        mean_std: std.mean,
        f_max_hz: map.max_mechanical_frequency_hz(),
        frames: map.n_frames(),
        unwrap_flags: map.quality.total_near_limit(),
        ..Default::default()
    };

    let tone = cfg.stimulus_bindings().into_iter().find_map(|b| match b.waveform.kind {
        StimulusKind::Sine { frequency_hz } => Some((b.segment, frequency_hz)),
        _ => None,
    });
    if let Some((segment, f)) = tone {
        let diff = map.spatial_difference();
        report.tone_pp_rad = fit_tone(diff.row(segment), map.frame_period_s, f).ok().map(|t| t.peak_to_peak());
        if map.n_frames() >= MIN_PSD_FRAMES && segment != map.reference_index {
            report.crosstalk_db = crosstalk_rejection(map, segment, f).ok();
            report.sensitivity = sensitivity(map, segment, f).ok();
        }
    }
    let psd_row = cfg
        .analysis
        .psd_fbg
        .or(cfg.stimulus.first().map(|s| s.segment))
        .unwrap_or(map.n_fbg() - 1);
    if map.n_frames() >= MIN_PSD_FRAMES {
        report.psd = Some(psd(map, psd_row)?);
    }
    Ok(report)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Runs `cfg` and writes its artifacts into `out_dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentResult> {
    let result = run_experiment(cfg, cfg.output.capture != CaptureFormat::None)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    write_with(&out_dir.join("resolved_config.toml"), |w| w.write_all(cfg.to_toml().as_bytes()))?;
    write_with(&out_dir.join("metrics.txt"), |w| result.report.write_text(w))?;
    if cfg.output.phase_map {
        write_with(&out_dir.join("phase_map.csv"), |w| result.map.write_csv(w))?;
        write_with(&out_dir.join("phase_map_differential.csv"), |w| {
            result.map.spatial_difference().write_csv(w)
        })?;
    }
    if cfg.output.psd {
        if let Some(p) = &result.report.psd {
            write_with(&out_dir.join("psd.csv"), |w| p.write_csv(w))?;
        }
    }
    if let Some(cap) = &result.capture {
        match cfg.output.capture {
            CaptureFormat::Iqc1 => write_with(&out_dir.join("capture.iqc1"), |w| cap.write_iqc1(w))?,
            CaptureFormat::Csv => write_with(&out_dir.join("capture.csv"), |w| cap.write_csv(w))?,
            CaptureFormat::None => {}
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Values are code lengths `N_G`.
    CodeLength,
    SignalPowerDbm,
    /// Values in meters.
    LeadFiberLength,
    /// Values in Vpp, applied to the first stimulus.
    StimulusAmplitude,
    /// Values in Hz, applied to the first stimulus, which must be a sine.
    StimulusFrequency,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] = [
        SweepParam::CodeLength,
        SweepParam::SignalPowerDbm,
        SweepParam::LeadFiberLength,
        SweepParam::StimulusAmplitude,
        SweepParam::StimulusFrequency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::CodeLength => "code_length",
            SweepParam::SignalPowerDbm => "signal_power_dbm",
            SweepParam::LeadFiberLength => "lead_fiber_length",
            SweepParam::StimulusAmplitude => "stimulus_amplitude",
            SweepParam::StimulusFrequency => "stimulus_frequency",
        }
    }

    /// Config with the parameter set to `value`. Code-length points stretch
    /// the run to two code periods when it is shorter.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = cfg.clone();
        match self {
            SweepParam::CodeLength => {
                if !(value >= 4.0 && value.fract() == 0.0 && (value as usize).is_power_of_two()) {
                    return Err(Error::invalid(format!(
                        "code_length values are N_G, powers of two >= 4; got {value}"
                    )));
                }
                c.code.n_g = value as usize;
                let period = c.probe_frame()?.duration_s();
                c.run.duration_s = c.run.duration_s.max(2.0 * period);
            }
            SweepParam::SignalPowerDbm => c.laser.signal_power_dbm = value,
            SweepParam::LeadFiberLength => c.array.lead_fiber_m = value,
            SweepParam::StimulusAmplitude | SweepParam::StimulusFrequency => {
                let s = c
                    .stimulus
                    .first_mut()
                    .ok_or_else(|| Error::invalid(format!("{} sweep needs a [[stimulus]]", self.name())))?;
                if self == SweepParam::StimulusAmplitude {
                    s.amplitude_vpp = value;
                } else {
                    if s.frequency_hz.is_none() {
                        return Err(Error::invalid("stimulus_frequency sweep needs a sine stimulus"));
                    }
                    s.frequency_hz = Some(value);
                }
            }
        }
        // re-check the derived config through the same path as a file
        ExperimentConfig::from_toml(&c.to_toml())
            .map_err(|e| Error::Configuration(format!("{} = {value}: {}", self.name(), e.message)))
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
            Error::invalid(format!(
                "unknown sweep parameter '{s}'; supported: {}",
                names.join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub seed: u64,
    pub report: MetricReport,
}

/// One run per value, in parallel. Points come back sorted by value; with
/// `SeedPolicy::Increment` the i-th point in that order uses `seed + i`.
pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64], policy: SeedPolicy) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let configs = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut c = param.apply(cfg, v)?;
            if policy == SeedPolicy::Increment {
                c.run.seed = c.run.seed.wrapping_add(i as u64);
            }
            Ok((v, c))
        })
        .collect::<Result<Vec<_>>>()?;
    configs
        .into_par_iter()
        .map(|(value, c)| {
            let r = run_experiment(&c, false)?;
            Ok(SweepPoint {
                value,
                seed: c.run.seed,
                report: r.report,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], param: SweepParam, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{},seed,frames,f_max_hz,mean_std_rad,unwrap_flags,tone_pp_rad,crosstalk_db,sensitivity_rad_per_sqrt_hz", param.name())?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for p in points {
        let r = &p.report;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            p.value,
            p.seed,
            r.frames,
            r.f_max_hz,
            r.mean_std,
            r.unwrap_flags,
            opt(r.tone_pp_rad),
            opt(r.crosstalk_db),
            opt(r.sensitivity)
        )?;
    }
    Ok(())
}

/// Runs a sweep and writes `sweep_<param>.csv` plus the base config.
pub fn sweep_to_dir(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    policy: SeedPolicy,
    out_dir: &Path,
) -> Result<Vec<SweepPoint>> {
    let points = sweep(cfg, param, values, policy)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    write_with(&out_dir.join("resolved_config.toml"), |w| w.write_all(cfg.to_toml().as_bytes()))?;
    write_with(&out_dir.join(format!("sweep_{}.csv", param.name())), |w| {
        write_sweep_csv(&points, param, w)
    })?;
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            "[code]\nn_g = 256\n[array]\nn_fbg = 4\npolarization_seed = 3\n[run]\nduration_s = 2e-4\n",
        )
        .unwrap()
    }

    #[test]
    fn streaming_matches_materialized_capture() {
        let cfg = small();
        let a = run_experiment(&cfg, true).unwrap();
        let b = run_experiment(&cfg, false).unwrap();
        assert_eq!(a.map, b.map);
        assert_eq!(a.capture.unwrap().len(), 32000);
    }

    #[test]
    fn noiseless_static_run() {
        let mut cfg = small();
        cfg.laser.noise_sigma = 0.0;
        cfg.laser.linewidth_hz = 0.0;
        let r = run_experiment(&cfg, false).unwrap();
        assert_eq!(r.map.n_fbg(), 4);
        assert!(r.report.mean_std < 1e-10);
    }

    #[test]
    fn sweep_parameters() {
        assert!("reach".parse::<SweepParam>().unwrap_err().to_string().contains("code_length, signal_power_dbm"));
        assert_eq!("lead_fiber_length".parse::<SweepParam>().unwrap(), SweepParam::LeadFiberLength);
        let cfg = small();
        assert!(SweepParam::CodeLength.apply(&cfg, 100.0).is_err());
        assert_eq!(SweepParam::CodeLength.apply(&cfg, 65536.0).unwrap().run.duration_s, 2.0 * 65536.0 / 160e6);
        assert!(SweepParam::StimulusAmplitude.apply(&cfg, 1.0).is_err());
    }

    #[test]
    fn single_value_sweep_equals_run() {
        let cfg = small();
        let pts = sweep(&cfg, SweepParam::SignalPowerDbm, &[-27.0], SeedPolicy::Fixed).unwrap();
        let run = run_experiment(&cfg, false).unwrap();
        assert_eq!(pts[0].report, run.report);
    }

    #[test]
    fn sweep_is_sorted_and_seeded() {
        let cfg = small();
        let pts = sweep(&cfg, SweepParam::SignalPowerDbm, &[-30.0, -40.0, -27.0], SeedPolicy::Increment).unwrap();
        let v: Vec<f64> = pts.iter().map(|p| p.value).collect();
        assert_eq!(v, [-40.0, -30.0, -27.0]);
        assert_eq!(pts.iter().map(|p| p.seed).collect::<Vec<_>>(), [1, 2, 3]);
        assert!(pts[0].report.mean_std > pts[2].report.mean_std);
    }
}
