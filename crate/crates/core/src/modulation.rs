//! Dual-polarization probing frames built from a [`GolaySet`].
//!
//! PDM-BPSK sends each complementary pair successively on one polarization,
//! each sequence followed by `n_sep` zero symbols. PDM-QPSK carries the pair on
//! the in-phase and quadrature rails at once, so a frame is only `n_g` long.
//! Frames are one sample per symbol and repeat cyclically.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::io::Write;

use num_complex::Complex64;

use crate::codes::GolaySet;
use crate::error::{Error, Result};

/// Scale that puts QPSK symbols `s·(±1 ± i)` on the unit circle.
pub const QPSK_SCALE: f64 = FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    PdmBpsk,
    PdmQpsk,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::PdmBpsk => "pdm-bpsk",
            Scheme::PdmQpsk => "pdm-qpsk",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One code period of transmit symbols on both polarizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeFrame {
    e_tx: Vec<Complex64>,
    e_ty: Vec<Complex64>,
    n_g: usize,
    n_sep: usize,
    scheme: Scheme,
    symbol_rate_hz: f64,
}

fn check_rate(f_s: f64) -> Result<()> {
    if !(f_s.is_finite() && f_s > 0.0) {
        return Err(Error::invalid(format!(
            "symbol rate must be positive and finite, got {f_s}"
        )));
    }
    Ok(())
}

/// `e_tx = [a1, 0…, b1, 0…]`, `e_ty = [a2, 0…, b2, 0…]` with `n_sep` zeros
/// after each sequence.
pub fn build_pdm_bpsk_frame(set: &GolaySet, n_sep: usize, f_s: f64) -> Result<ProbeFrame> {
    check_rate(f_s)?;
    let n_g = set.len();
    let layout = |first: &[i8], second: &[i8]| {
        let mut out = Vec::with_capacity(2 * (n_g + n_sep));
        for block in [first, second] {
            out.extend(block.iter().map(|&s| Complex64::new(s as f64, 0.0)));
            out.extend(std::iter::repeat_n(Complex64::default(), n_sep));
        }
        out
    };
    Ok(ProbeFrame {
        e_tx: layout(set.a1().as_slice(), set.b1().as_slice()),
        e_ty: layout(set.a2().as_slice(), set.b2().as_slice()),
        n_g,
        n_sep,
        scheme: Scheme::PdmBpsk,
        symbol_rate_hz: f_s,
    })
}

/// `e_tx = s·(a1 + i·b1)`, `e_ty = s·(a2 + i·b2)` with `s = √2/2`.
pub fn build_pdm_qpsk_frame(set: &GolaySet, f_s: f64) -> Result<ProbeFrame> {
    check_rate(f_s)?;
    let rail = |re: &[i8], im: &[i8]| -> Vec<Complex64> {
        re.iter()
            .zip(im)
            .map(|(&i, &q)| Complex64::new(i as f64, q as f64) * QPSK_SCALE)
            .collect()
    };
    Ok(ProbeFrame {
        e_tx: rail(set.a1().as_slice(), set.b1().as_slice()),
        e_ty: rail(set.a2().as_slice(), set.b2().as_slice()),
        n_g: set.len(),
        n_sep: 0,
        scheme: Scheme::PdmQpsk,
        symbol_rate_hz: f_s,
    })
}

/// Build whichever frame `scheme` asks for. `n_sep` is ignored for QPSK.
pub fn build_frame(set: &GolaySet, scheme: Scheme, n_sep: usize, f_s: f64) -> Result<ProbeFrame> {
    match scheme {
        Scheme::PdmBpsk => build_pdm_bpsk_frame(set, n_sep, f_s),
        Scheme::PdmQpsk => build_pdm_qpsk_frame(set, f_s),
    }
}

/// One-sided half-width `n_g/2 + n_sep` of the lag window around zero inside
/// which the periodic frame autocorrelation is an exact delta.
pub fn zero_correlation_zone(frame: &ProbeFrame) -> Result<usize> {
    match frame.scheme {
        Scheme::PdmBpsk => Ok(frame.n_g / 2 + frame.n_sep),
        Scheme::PdmQpsk => Err(Error::UnsupportedScheme("pdm-qpsk")),
    }
}

impl ProbeFrame {
    pub fn e_tx(&self) -> &[Complex64] {
        &self.e_tx
    }

    pub fn e_ty(&self) -> &[Complex64] {
        &self.e_ty
    }

    /// Frame period `N` in symbols.
    pub fn period(&self) -> usize {
        self.e_tx.len()
    }

    pub fn n_g(&self) -> usize {
        self.n_g
    }

    pub fn n_sep(&self) -> usize {
        self.n_sep
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn symbol_rate_hz(&self) -> f64 {
        self.symbol_rate_hz
    }

    pub fn symbol_period_s(&self) -> f64 {
        1.0 / self.symbol_rate_hz
    }

    /// `T_code = N / F_S`.
    pub fn duration_s(&self) -> f64 {
        self.period() as f64 / self.symbol_rate_hz
    }

    /// Highest mechanical frequency one estimate per frame can resolve.
    pub fn max_mechanical_frequency_hz(&self) -> f64 {
        1.0 / (2.0 * self.duration_s())
    }

    /// Symbols for absolute index `n`, with the frame repeated forever in both
    /// directions.
    #[inline]
    pub fn symbol_at(&self, n: i64) -> (Complex64, Complex64) {
        let i = n.rem_euclid(self.period() as i64) as usize;
        (self.e_tx[i], self.e_ty[i])
    }

    /// Energy of one polarization's code over a frame, `Σ|e_tx|²`. This is the
    /// correlation peak the receiver divides by: `2·n_g` for BPSK and `n_g`
    /// for QPSK (`2·n_g·s²`).
    pub fn code_energy(&self) -> f64 {
        self.e_tx.iter().map(Complex64::norm_sqr).sum()
    }

    /// Fraction of symbol slots that carry light.
    pub fn duty_cycle(&self) -> f64 {
        let lit = self
            .e_tx
            .iter()
            .zip(&self.e_ty)
            .filter(|(x, y)| x.norm_sqr() > 0.0 || y.norm_sqr() > 0.0)
            .count();
        lit as f64 / self.period() as f64
    }

    /// CSV dump with columns `index,e_tx_re,e_tx_im,e_ty_re,e_ty_im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,e_tx_re,e_tx_im,e_ty_re,e_ty_im")?;
        for (i, (x, y)) in self.e_tx.iter().zip(&self.e_ty).enumerate() {
            writeln!(w, "{i},{},{},{},{}", x.re, x.im, y.re, y.im)?;
        }
        Ok(())
    }
}
