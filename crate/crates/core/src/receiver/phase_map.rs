use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use super::estimate::JonesEstimateFrame;
use crate::channel::JonesMatrix;
use crate::error::{Error, Result};

/// Increments at or above this fraction of π/2 are counted as near the
/// unwrap limit.
pub const UNWRAP_WARN_FRACTION: f64 = 0.8;

/// Half the phase of the determinant. The result is only defined modulo π.
pub fn extract_phase(h: &JonesMatrix) -> Result<f64> {
    let det = h.det();
    if det.norm_sqr() == 0.0 || !det.is_finite() {
        return Err(Error::Degenerate(format!("Jones determinant is {det}")));
    }
    Ok(0.5 * det.arg())
}

/// Wraps into `(-π/2, π/2]`.
fn wrap_half(x: f64) -> f64 {
    let r = x - PI * (x / PI).round();
    if r <= -FRAC_PI_2 {
        r + PI
    } else if r > FRAC_PI_2 {
        r - PI
    } else {
        r
    }
}

/// Counters describing how much the unwrap had to be trusted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnwrapQuality {
    /// Per row, increments with magnitude ≥ `UNWRAP_WARN_FRACTION·π/2`.
    pub near_limit: Vec<usize>,
    /// Same count for the absolute phase of the reference FBG, before
    /// referencing. Laser phase noise shows up here first.
    pub reference_near_limit: usize,
    /// Frames whose estimate had a zero determinant on some FBG; the previous
    /// value was held.
    pub degenerate: usize,
}

impl UnwrapQuality {
    pub fn total_near_limit(&self) -> usize {
        self.near_limit.iter().sum::<usize>() + self.reference_near_limit
    }

    pub fn has_failures(&self) -> bool {
        self.total_near_limit() > 0 || self.degenerate > 0
    }
}

/// Differential phase of every FBG against a reference FBG, one column per
/// code period.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    /// `phases[k][f]`, radians, unwrapped along `f`.
    pub phases: Vec<Vec<f64>>,
    pub reference_index: usize,
    pub frame_period_s: f64,
    pub start_time_s: f64,
    pub quality: UnwrapQuality,
}

impl PhaseMap {
    /// Wraps already unwrapped rows, e.g. synthetic test data.
    pub fn from_rows(phases: Vec<Vec<f64>>, frame_period_s: f64) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::invalid("phase map needs at least one row"));
        }
        let n = phases[0].len();
        if phases.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("phase map rows differ in length"));
        }
        if !(frame_period_s > 0.0 && frame_period_s.is_finite()) {
            return Err(Error::invalid("frame period must be positive"));
        }
        Ok(Self {
            quality: UnwrapQuality {
                near_limit: vec![0; phases.len()],
                ..Default::default()
            },
            phases,
            reference_index: 0,
            frame_period_s,
            start_time_s: 0.0,
        })
    }

    pub fn n_fbg(&self) -> usize {
        self.phases.len()
    }

    pub fn n_frames(&self) -> usize {
        self.phases[0].len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.phases[k]
    }

    pub fn duration_s(&self) -> f64 {
        self.n_frames() as f64 * self.frame_period_s
    }

    /// `1 / (2·T_code)`.
    pub fn max_mechanical_frequency_hz(&self) -> f64 {
        0.5 / self.frame_period_s
    }

    pub fn timestamp(&self, f: usize) -> f64 {
        self.start_time_s + f as f64 * self.frame_period_s
    }

    /// Row `k` minus row `k - 1`, so each row carries only the segment that
    /// ends at FBG `k`. Row 0 is kept as is.
    pub fn spatial_difference(&self) -> PhaseMap {
        let mut out = self.clone();
        for k in 1..self.n_fbg() {
            for (o, (a, b)) in out.phases[k]
                .iter_mut()
                .zip(self.phases[k].iter().zip(&self.phases[k - 1]))
            {
                *o = a - b;
            }
        }
        out
    }

    /// Keeps frames `range`.
    pub fn slice_frames(&self, range: std::ops::Range<usize>) -> Result<PhaseMap> {
        if range.start >= range.end || range.end > self.n_frames() {
            return Err(Error::invalid(format!(
                "frame range {range:?} outside 0..{}",
                self.n_frames()
            )));
        }
        let mut out = self.clone();
        out.start_time_s = self.timestamp(range.start);
        for row in out.phases.iter_mut() {
            *row = row[range.clone()].to_vec();
        }
        Ok(out)
    }

    /// CSV: `timestamp_s,fbg_0,…,fbg_{n-1}`, one line per frame.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "timestamp_s")?;
        for k in 0..self.n_fbg() {
            write!(w, ",fbg_{k}")?;
        }
        writeln!(w)?;
        for f in 0..self.n_frames() {
            write!(w, "{}", self.timestamp(f))?;
            for row in &self.phases {
                write!(w, ",{}", row[f])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Per-frame phase of every FBG minus that of `reference_index`, unwrapped
/// along time under the assumption that the true phase moves by less than
/// π/2 between frames.
pub fn build_phase_map(estimates: &[JonesEstimateFrame], reference_index: usize) -> Result<PhaseMap> {
    if estimates.len() < 2 {
        return Err(Error::invalid("phase map needs at least 2 frames"));
    }
    let n_fbg = estimates[0].taps.len();
    if estimates.iter().any(|e| e.taps.len() != n_fbg) {
        return Err(Error::invalid("inconsistent tap counts across frames"));
    }
    if reference_index >= n_fbg {
        return Err(Error::invalid(format!(
            "reference index {reference_index} outside 0..{n_fbg}"
        )));
    }
    let warn = UNWRAP_WARN_FRACTION * FRAC_PI_2;
    let mut quality = UnwrapQuality {
        near_limit: vec![0; n_fbg],
        ..Default::default()
    };
    let mut phases = vec![Vec::with_capacity(estimates.len()); n_fbg];
    // last absolute phases, held across degenerate frames
    let mut last_abs: Option<Vec<f64>> = None;
    let mut last_rel = vec![0.0; n_fbg];

    for (f, est) in estimates.iter().enumerate() {
        let abs: Result<Vec<f64>> = est.matrices().map(extract_phase).collect();
        let abs = match (abs, &last_abs) {
            (Ok(a), _) => a,
            (Err(_), Some(prev)) => {
                quality.degenerate += 1;
                prev.clone()
            }
            (Err(_), None) => {
                quality.degenerate += 1;
                vec![0.0; n_fbg]
            }
        };
        if let Some(prev) = &last_abs {
            if wrap_half(abs[reference_index] - prev[reference_index]).abs() >= warn {
                quality.reference_near_limit += 1;
            }
        }
        for k in 0..n_fbg {
            let rel = wrap_half(abs[k] - abs[reference_index]);
            let value = if f == 0 {
                rel
            } else {
                let inc = wrap_half(rel - last_rel[k]);
                if inc.abs() >= warn {
                    quality.near_limit[k] += 1;
                }
                phases[k][f - 1] + inc
            };
            phases[k].push(value);
            last_rel[k] = rel;
        }
        last_abs = Some(abs);
    }

    let frame_period_s = estimates[1].timestamp - estimates[0].timestamp;
    if !(frame_period_s > 0.0) {
        return Err(Error::invalid("estimate timestamps must increase"));
    }
    Ok(PhaseMap {
        phases,
        reference_index,
        frame_period_s,
        start_time_s: estimates[0].timestamp,
        quality,
    })
}
