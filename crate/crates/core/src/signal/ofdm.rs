use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ComplexSample;

/// OFDM stimulus description.
///
/// Occupied bins are signed subcarrier indices; bin `k < 0` maps to FFT
/// index `fft_size + k`. No cyclic prefix is added: the stimulus is meant
/// to be transmitted cyclically and captured over one full period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub fft_size: usize,
    pub occupied_bins: Vec<i32>,
    pub n_symbols: usize,
    /// RMS amplitude of the generated frame, volts.
    pub target_rms: f64,
    pub seed: u64,
}

impl Default for OfdmConfig {
    /// 4096-point symbols with subcarriers −300..−1 and 10..299 occupied
    /// (590 bins), 10 symbols per frame.
    fn default() -> Self {
        OfdmConfig {
            fft_size: 4096,
            occupied_bins: (-300..=-1).chain(10..300).collect(),
            n_symbols: 10,
            target_rms: 0.2,
            seed: 0,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(format!("OFDM config: {msg}")));
        if self.fft_size < 2 {
            return bad(format!("fft_size {} too small", self.fft_size));
        }
        if self.n_symbols == 0 {
            return bad("n_symbols must be positive".into());
        }
        if !(self.target_rms.is_finite() && self.target_rms > 0.0) {
            return bad(format!("target_rms {} must be positive", self.target_rms));
        }
        if self.occupied_bins.is_empty() {
            return bad("no occupied bins".into());
        }
        let half = (self.fft_size / 2) as i64;
        let mut seen = vec![false; self.fft_size];
        for &k in &self.occupied_bins {
            let k = k as i64;
            if k < -half || k >= half {
                return bad(format!("bin {k} outside ±{half}"));
            }
            let idx = self.fft_index(k as i32);
            if std::mem::replace(&mut seen[idx], true) {
                return bad(format!("bin {k} listed twice"));
            }
        }
        Ok(())
    }

    pub fn fft_index(&self, bin: i32) -> usize {
        if bin < 0 {
            (self.fft_size as i64 + bin as i64) as usize
        } else {
            bin as usize
        }
    }

    pub fn frame_len(&self) -> usize {
        self.fft_size * self.n_symbols
    }
}

/// Generates `n_symbols` QPSK-loaded OFDM symbols, concatenated and scaled
/// to `target_rms`. Deterministic for a given seed.
pub fn generate_ofdm(config: &OfdmConfig) -> Result<Vec<ComplexSample>> {
    config.validate()?;
    let n = config.fft_size;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut frame = Vec::with_capacity(config.frame_len());
    let mut symbol = vec![ComplexSample::new(0.0, 0.0); n];
    for _ in 0..config.n_symbols {
        symbol.fill(ComplexSample::new(0.0, 0.0));
        for &bin in &config.occupied_bins {
            let re = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            let im = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            symbol[config.fft_index(bin)] = ComplexSample::new(re, im);
        }
        ifft.process(&mut symbol);
        frame.extend_from_slice(&symbol);
    }
    let rms = (frame.iter().map(|x| x.norm_sqr()).sum::<f64>() / frame.len() as f64).sqrt();
    let scale = config.target_rms / rms;
    frame.iter_mut().for_each(|x| *x *= scale);
    Ok(frame)
}

/// Peak-to-average power ratio in dB.
pub fn papr(frame: &[ComplexSample]) -> Result<f64> {
    if frame.is_empty() {
        return Err(Error::EmptyFrame);
    }
    let (peak, total) = frame.iter().fold((0.0f64, 0.0), |(peak, total), x| {
        let p = x.norm_sqr();
        (peak.max(p), total + p)
    });
    if total == 0.0 {
        return Err(Error::ZeroFrame);
    }
    Ok(10.0 * (peak / (total / frame.len() as f64)).log10())
}
