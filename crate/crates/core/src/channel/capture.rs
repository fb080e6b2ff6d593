//! Sampled receiver output and its file formats.
//!
//! IQC1 binary layout (little endian):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "IQC1"
//!      4     4  reserved, zero
//!      8     8  f_s (f64, Hz)
//!     16     8  sample count (u64)
//!     24     8  seed (u64)
//!     32    32  reserved, zero
//!     64   32·n samples: e_rx_re, e_rx_im, e_ry_re, e_ry_im (f64 each)
//! ```

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const IQC1_MAGIC: &[u8; 4] = b"IQC1";
pub const IQC1_HEADER_LEN: usize = 64;

/// Both polarization streams at one sample per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct IQCapture {
    e_rx: Vec<Complex64>,
    e_ry: Vec<Complex64>,
    f_s: f64,
    seed: u64,
}

impl IQCapture {
    pub fn new(e_rx: Vec<Complex64>, e_ry: Vec<Complex64>, f_s: f64, seed: u64) -> Result<Self> {
        if e_rx.len() != e_ry.len() {
            return Err(Error::invalid(format!(
                "polarization streams differ in length: {} vs {}",
                e_rx.len(),
                e_ry.len()
            )));
        }
        if !(f_s.is_finite() && f_s > 0.0) {
            return Err(Error::invalid("capture sample rate must be positive"));
        }
        Ok(Self { e_rx, e_ry, f_s, seed })
    }

    pub fn e_rx(&self) -> &[Complex64] {
        &self.e_rx
    }

    pub fn e_ry(&self) -> &[Complex64] {
        &self.e_ry
    }

    pub fn len(&self) -> usize {
        self.e_rx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_rx.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.f_s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.f_s
    }

    /// Applies `f` to every sample pair, e.g. to rotate or scale a capture.
    pub fn map(&self, f: impl Fn(Complex64, Complex64) -> (Complex64, Complex64)) -> Self {
        let (e_rx, e_ry) = self
            .e_rx
            .iter()
            .zip(&self.e_ry)
            .map(|(&x, &y)| f(x, y))
            .unzip();
        Self {
            e_rx,
            e_ry,
            f_s: self.f_s,
            seed: self.seed,
        }
    }

    pub fn write_iqc1<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = [0u8; IQC1_HEADER_LEN];
        header[0..4].copy_from_slice(IQC1_MAGIC);
        header[8..16].copy_from_slice(&self.f_s.to_le_bytes());
        header[16..24].copy_from_slice(&(self.len() as u64).to_le_bytes());
        header[24..32].copy_from_slice(&self.seed.to_le_bytes());
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(32 * 4096);
        for chunk in self.e_rx.chunks(4096).zip(self.e_ry.chunks(4096)) {
            buf.clear();
            for (x, y) in chunk.0.iter().zip(chunk.1) {
                for v in [x.re, x.im, y.re, y.im] {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_iqc1<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; IQC1_HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|e| Error::io("reading IQC1 header", e))?;
        if &header[0..4] != IQC1_MAGIC {
            return Err(Error::Parse("not an IQC1 capture (bad magic)".into()));
        }
        let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let (f_s, count, seed) = (f64_at(8), u64_at(16) as usize, u64_at(24));

        let mut body = Vec::new();
        r.read_to_end(&mut body)
            .map_err(|e| Error::io("reading IQC1 samples", e))?;
        if body.len() != count * 32 {
            return Err(Error::Parse(format!(
                "IQC1 header promises {count} samples but body holds {} bytes",
                body.len()
            )));
        }
        let (e_rx, e_ry) = body
            .chunks_exact(32)
            .map(|s| {
                let v = |i: usize| f64::from_le_bytes(s[8 * i..8 * i + 8].try_into().unwrap());
                (Complex64::new(v(0), v(1)), Complex64::new(v(2), v(3)))
            })
            .unzip();
        Self::new(e_rx, e_ry, f_s, seed)
    }

    /// CSV with columns `index,e_rx_re,e_rx_im,e_ry_re,e_ry_im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,e_rx_re,e_rx_im,e_ry_re,e_ry_im")?;
        for (i, (x, y)) in self.e_rx.iter().zip(&self.e_ry).enumerate() {
            writeln!(w, "{i},{},{},{},{}", x.re, x.im, y.re, y.im)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn iqc1_round_trip(
            samples in prop::collection::vec(any::<(f64, f64, f64, f64)>(), 0..64),
            seed in any::<u64>(),
        ) {
            let (x, y): (Vec<_>, Vec<_>) = samples
                .iter()
                .map(|&(a, b, c, d)| (Complex64::new(a, b), Complex64::new(c, d)))
                .unzip();
            let cap = IQCapture::new(x, y, 160e6, seed).unwrap();
            let mut bytes = Vec::new();
            cap.write_iqc1(&mut bytes).unwrap();
            prop_assert_eq!(bytes.len(), 64 + 32 * samples.len());
            let back = IQCapture::read_iqc1(&bytes[..]).unwrap();
            // compare bit patterns so NaN payloads round-trip too
            let bits = |c: &IQCapture| -> Vec<u64> {
                c.e_rx().iter().chain(c.e_ry()).flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect()
            };
            prop_assert_eq!(bits(&back), bits(&cap));
            prop_assert_eq!(back.seed(), seed);
        }
    }

    #[test]
    fn header_layout() {
        let cap = IQCapture::new(vec![Complex64::new(1.0, 2.0)], vec![Complex64::new(3.0, 4.0)], 2.5, 7).unwrap();
        let mut bytes = Vec::new();
        cap.write_iqc1(&mut bytes).unwrap();
        assert_eq!(&bytes[0..4], b"IQC1");
        assert_eq!(f64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2.5);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 7);
        assert_eq!(f64::from_le_bytes(bytes[64 + 16..64 + 24].try_into().unwrap()), 3.0);
    }

    #[test]
    fn truncated_body_is_rejected() {
        let cap = IQCapture::new(vec![Complex64::default(); 3], vec![Complex64::default(); 3], 1.0, 0).unwrap();
        let mut bytes = Vec::new();
        cap.write_iqc1(&mut bytes).unwrap();
        bytes.truncate(bytes.len() - 8);
        assert!(IQCapture::read_iqc1(&bytes[..]).is_err());
        assert!(IQCapture::read_iqc1(&b"nope"[..]).is_err());
    }

    #[test]
    fn mismatched_streams() {
        assert!(IQCapture::new(vec![Complex64::default()], vec![], 1.0, 0).is_err());
    }
}
