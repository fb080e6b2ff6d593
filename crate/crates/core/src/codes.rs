//! Complementary (Golay) sequences and exact correlation primitives.
//!
//! Two binary sequences `a`, `b` of length `N` form a complementary pair when
//! the sum of their aperiodic autocorrelations is `2N` at lag zero and zero
//! everywhere else. Two pairs `(a1, b1)`, `(a2, b2)` are mutually orthogonal
//! when `a1 ⊗ a2 + b1 ⊗ b2` and `a1 ⊗ b1 + a2 ⊗ b2` vanish at every lag.
//! Binary correlations here are kept unnormalised and computed in integer
//! arithmetic; the receiver applies the single `1 / 2N` normalisation.
//!
//! The correlation operator follows `a ⊗ b (k) = Σ_n a(n) · conj(b(n - k))`.

use std::fmt;
use std::io::Write;
use std::ops::{Add, Mul, Neg};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Inputs shorter than this are correlated by direct summation.
pub const DIRECT_CORRELATION_MAX_LEN: usize = 64;

/// A ±1 sequence whose length is a power of two, at least 4.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinarySequence(Vec<i8>);

impl BinarySequence {
    pub fn new(symbols: Vec<i8>) -> Result<Self> {
        let n = symbols.len();
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "binary sequence length must be a power of two >= 4, got {n}"
            )));
        }
        if let Some(pos) = symbols.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!(
                "binary sequence symbol {} at index {pos} is not +1/-1",
                symbols[pos]
            )));
        }
        Ok(Self(symbols))
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, n: usize) -> i8 {
        self.0[n]
    }

    pub fn to_i64(&self) -> Vec<i64> {
        self.0.iter().map(|&s| s as i64).collect()
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.0.iter().map(|&s| Complex64::new(s as f64, 0.0)).collect()
    }

    /// Flips the sign of the symbol at `n`. Mostly useful for building
    /// deliberately broken sets.
    pub fn flip(&mut self, n: usize) {
        self.0[n] = -self.0[n];
    }

    fn concat(first: &Self, second: &Self, negate_second: bool) -> Self {
        let mut out = Vec::with_capacity(first.len() + second.len());
        out.extend_from_slice(&first.0);
        if negate_second {
            out.extend(second.0.iter().map(|&s| -s));
        } else {
            out.extend_from_slice(&second.0);
        }
        Self(out)
    }
}

impl fmt::Display for BinarySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(if *s > 0 { "+1" } else { "-1" })?;
        }
        Ok(())
    }
}

/// Two mutually orthogonal complementary pairs of equal length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GolaySet {
    a1: BinarySequence,
    b1: BinarySequence,
    a2: BinarySequence,
    b2: BinarySequence,
}

impl GolaySet {
    /// Groups four sequences. Only the lengths are checked here; use
    /// [`verify_golay_set`] for the correlation identities.
    pub fn new(
        a1: BinarySequence,
        b1: BinarySequence,
        a2: BinarySequence,
        b2: BinarySequence,
    ) -> Result<Self> {
        let n = a1.len();
        if b1.len() != n || a2.len() != n || b2.len() != n {
            return Err(Error::invalid(format!(
                "golay set sequences must share one length, got {}, {}, {}, {}",
                n,
                b1.len(),
                a2.len(),
                b2.len()
            )));
        }
        Ok(Self { a1, b1, a2, b2 })
    }

    pub fn len(&self) -> usize {
        self.a1.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn a1(&self) -> &BinarySequence {
        &self.a1
    }
    pub fn b1(&self) -> &BinarySequence {
        &self.b1
    }
    pub fn a2(&self) -> &BinarySequence {
        &self.a2
    }
    pub fn b2(&self) -> &BinarySequence {
        &self.b2
    }

    pub fn a1_mut(&mut self) -> &mut BinarySequence {
        &mut self.a1
    }

    pub fn named(&self) -> [(&'static str, &BinarySequence); 4] {
        [
            ("g_a1", &self.a1),
            ("g_b1", &self.b1),
            ("g_a2", &self.a2),
            ("g_b2", &self.b2),
        ]
    }

    /// Writes the sequence dump: a `name length` header line followed by the
    /// symbols as `+1`/`-1` separated by spaces, for each sequence in turn.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (name, seq) in self.named() {
            writeln!(w, "{name} {}", seq.len())?;
            writeln!(w, "{seq}")?;
        }
        Ok(())
    }
}

/// Builds the length-`n_g` set from the 4-symbol base set by repeated
/// concatenation: `a ← [a, b]`, `b ← [a, -b]` for each pair.
pub fn generate_golay_set(n_g: usize) -> Result<GolaySet> {
    if n_g < 4 || !n_g.is_power_of_two() {
        return Err(Error::invalid(format!(
            "code length must be a power of two >= 4, got {n_g}"
        )));
    }
    let mut a1 = BinarySequence(vec![1, -1, -1, -1]);
    let mut b1 = BinarySequence(vec![-1, 1, -1, -1]);
    let mut a2 = BinarySequence(vec![-1, -1, 1, -1]);
    let mut b2 = BinarySequence(vec![1, 1, 1, -1]);
    while a1.len() < n_g {
        let (na1, nb1) = (
            BinarySequence::concat(&a1, &b1, false),
            BinarySequence::concat(&a1, &b1, true),
        );
        let (na2, nb2) = (
            BinarySequence::concat(&a2, &b2, false),
            BinarySequence::concat(&a2, &b2, true),
        );
        a1 = na1;
        b1 = nb1;
        a2 = na2;
        b2 = nb2;
    }
    Ok(GolaySet { a1, b1, a2, b2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GolayReport {
    /// `(a1, b1)` is complementary.
    pub complementary_1: bool,
    /// `(a2, b2)` is complementary.
    pub complementary_2: bool,
    /// `a1 ⊗ a2 + b1 ⊗ b2 ≡ 0`.
    pub mutual_a: bool,
    /// `a1 ⊗ b1 + a2 ⊗ b2 ≡ 0`.
    pub mutual_b: bool,
    /// Largest absolute off-peak value over both summed autocorrelations.
    pub max_sidelobe: i64,
}

impl GolayReport {
    pub fn is_valid(&self) -> bool {
        self.complementary_1 && self.complementary_2 && self.mutual_a && self.mutual_b
    }
}

pub fn verify_golay_set(set: &GolaySet) -> GolayReport {
    let n = set.len();
    let [a1, b1, a2, b2] = [set.a1(), set.b1(), set.a2(), set.b2()].map(BinarySequence::to_i64);
    let aperiodic = |x: &[i64], y: &[i64]| {
        correlate_int(x, y, CorrelationMode::Aperiodic).expect("non-empty sequences")
    };

    let sum1 = aperiodic(&a1, &a1).sum(&aperiodic(&b1, &b1));
    let sum2 = aperiodic(&a2, &a2).sum(&aperiodic(&b2, &b2));
    let cross_a = aperiodic(&a1, &a2).sum(&aperiodic(&b1, &b2));
    let cross_b = aperiodic(&a1, &b1).sum(&aperiodic(&a2, &b2));

    let peak = 2 * n as i64;
    let sidelobe = |c: &Correlation<i64>| {
        c.iter_lags()
            .filter(|&(lag, _)| lag != 0)
            .map(|(_, v)| v.abs())
            .max()
            .unwrap_or(0)
    };
    let is_delta = |c: &Correlation<i64>| c.at(0) == Some(peak) && sidelobe(c) == 0;
    let is_zero = |c: &Correlation<i64>| c.values().iter().all(|&v| v == 0);

    GolayReport {
        complementary_1: is_delta(&sum1),
        complementary_2: is_delta(&sum2),
        mutual_a: is_zero(&cross_a),
        mutual_b: is_zero(&cross_b),
        max_sidelobe: sidelobe(&sum1).max(sidelobe(&sum2)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationMode {
    Aperiodic,
    Periodic,
}

/// Correlation values indexed by lag.
///
/// Aperiodic results of inputs with lengths `la`, `lb` cover lags
/// `-(lb - 1) ..= la - 1`; periodic results cover lags `0 .. L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation<T> {
    values: Vec<T>,
    mode: CorrelationMode,
    first_lag: isize,
}

impl<T: Copy> Correlation<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn mode(&self) -> CorrelationMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_lag(&self) -> isize {
        self.first_lag
    }

    /// Value at `lag`. Periodic results accept any lag and wrap it.
    pub fn at(&self, lag: isize) -> Option<T> {
        match self.mode {
            CorrelationMode::Periodic => {
                let n = self.values.len() as isize;
                Some(self.values[lag.rem_euclid(n) as usize])
            }
            CorrelationMode::Aperiodic => {
                let idx = lag - self.first_lag;
                (0..self.values.len() as isize)
                    .contains(&idx)
                    .then(|| self.values[idx as usize])
            }
        }
    }

    pub fn iter_lags(&self) -> impl Iterator<Item = (isize, T)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.first_lag + i as isize, v))
    }
}

impl<T: Copy + Add<Output = T>> Correlation<T> {
    /// Lag-wise sum of two correlations with identical lag ranges.
    pub fn sum(&self, other: &Self) -> Self {
        assert_eq!(self.mode, other.mode);
        assert_eq!(self.first_lag, other.first_lag);
        assert_eq!(self.values.len(), other.values.len());
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + b)
                .collect(),
            mode: self.mode,
            first_lag: self.first_lag,
        }
    }
}

impl<T: Copy + Neg<Output = T>> Correlation<T> {
    pub fn negated(&self) -> Self {
        Self {
            values: self.values.iter().map(|&v| -v).collect(),
            mode: self.mode,
            first_lag: self.first_lag,
        }
    }
}

fn check_inputs(la: usize, lb: usize, mode: CorrelationMode) -> Result<()> {
    if la == 0 || lb == 0 {
        return Err(Error::invalid("correlation inputs must be non-empty"));
    }
    if mode == CorrelationMode::Periodic && la != lb {
        return Err(Error::invalid(format!(
            "periodic correlation needs equal lengths, got {la} and {lb}"
        )));
    }
    Ok(())
}

/// Exact correlation of integer sequences (real-valued, so no conjugate).
pub fn correlate_int(a: &[i64], b: &[i64], mode: CorrelationMode) -> Result<Correlation<i64>> {
    check_inputs(a.len(), b.len(), mode)?;
    Ok(correlate_direct_generic(a, b, mode, |x| x))
}

/// `a ⊗ b` for complex inputs. Short inputs are summed directly, longer
/// ones go through an FFT.
pub fn correlate(
    a: &[Complex64],
    b: &[Complex64],
    mode: CorrelationMode,
) -> Result<Correlation<Complex64>> {
    check_inputs(a.len(), b.len(), mode)?;
    if a.len().max(b.len()) < DIRECT_CORRELATION_MAX_LEN {
        Ok(correlate_direct_generic(a, b, mode, |x: Complex64| x.conj()))
    } else {
        Ok(correlate_fft(a, b, mode))
    }
}

/// Direct-summation path of [`correlate`], regardless of input length.
pub fn correlate_direct(
    a: &[Complex64],
    b: &[Complex64],
    mode: CorrelationMode,
) -> Result<Correlation<Complex64>> {
    check_inputs(a.len(), b.len(), mode)?;
    Ok(correlate_direct_generic(a, b, mode, |x: Complex64| x.conj()))
}

/// Transform path of [`correlate`], regardless of input length.
pub fn correlate_fft_path(
    a: &[Complex64],
    b: &[Complex64],
    mode: CorrelationMode,
) -> Result<Correlation<Complex64>> {
    check_inputs(a.len(), b.len(), mode)?;
    Ok(correlate_fft(a, b, mode))
}

fn correlate_direct_generic<T, F>(a: &[T], b: &[T], mode: CorrelationMode, conj: F) -> Correlation<T>
where
    T: Copy + Default + Add<Output = T> + Mul<Output = T>,
    F: Fn(T) -> T,
{
    match mode {
        CorrelationMode::Periodic => {
            let n = a.len();
            let values = (0..n)
                .map(|k| {
                    let mut acc = T::default();
                    for (i, &x) in a.iter().enumerate() {
                        acc = acc + x * conj(b[(i + n - k) % n]);
                    }
                    acc
                })
                .collect();
            Correlation {
                values,
                mode,
                first_lag: 0,
            }
        }
        CorrelationMode::Aperiodic => {
            let (la, lb) = (a.len() as isize, b.len() as isize);
            let first_lag = -(lb - 1);
            let values = (first_lag..la)
                .map(|k| {
                    // n - k must index b, so n in [max(0, k), min(la, lb + k))
                    let lo = k.max(0);
                    let hi = la.min(lb + k);
                    let mut acc = T::default();
                    for n in lo..hi {
                        acc = acc + a[n as usize] * conj(b[(n - k) as usize]);
                    }
                    acc
                })
                .collect();
            Correlation {
                values,
                mode,
                first_lag,
            }
        }
    }
}

fn correlate_fft(a: &[Complex64], b: &[Complex64], mode: CorrelationMode) -> Correlation<Complex64> {
    let (la, lb) = (a.len(), b.len());
    let size = match mode {
        CorrelationMode::Periodic => la,
        CorrelationMode::Aperiodic => la + lb - 1,
    };
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    let mut fa = vec![Complex64::default(); size];
    fa[..la].copy_from_slice(a);
    let mut fb = vec![Complex64::default(); size];
    fb[..lb].copy_from_slice(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y.conj();
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;

    match mode {
        CorrelationMode::Periodic => Correlation {
            values: fa.into_iter().map(|v| v * scale).collect(),
            mode,
            first_lag: 0,
        },
        CorrelationMode::Aperiodic => {
            // circular index of lag k is k mod size; negative lags sit at the top
            let first_lag = -(lb as isize - 1);
            let values = (first_lag..la as isize)
                .map(|k| fa[k.rem_euclid(size as isize) as usize] * scale)
                .collect();
            Correlation {
                values,
                mode,
                first_lag,
            }
        }
    }
}
