//! Memoryless Rapp amplitude nonlinearity.
//!
//! The output of the amplifier for a complex baseband input `x` is
//!
//! ```text
//! y = G x (1 + (|x| / V_sat)^(2p))^(-1/(2p))
//! ```
//!
//! The model is amplitude-only: the phase of `y` equals the phase of `x`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One baseband IQ value, in volts.
pub type ComplexSample = Complex64;

/// Above this `|x| / V_sat` ratio the power term is evaluated in the log domain.
const LOG_DOMAIN_RATIO: f64 = 1e3;

/// Scalar Rapp parameters `(G, p, V_sat)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RappParams {
    /// Linear voltage gain.
    pub gain: f64,
    /// Smoothness factor `p`.
    pub smoothness: f64,
    /// Input-referred saturation voltage.
    pub vsat: f64,
}

impl RappParams {
    pub fn new(gain: f64, smoothness: f64, vsat: f64) -> Result<Self> {
        let params = RappParams {
            gain,
            smoothness,
            vsat,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("gain", self.gain),
            ("smoothness", self.smoothness),
            ("vsat", self.vsat),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Domain(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Output amplitude for a nonnegative input amplitude. No validation.
    #[inline]
    pub fn amplitude(&self, input_amp: f64) -> f64 {
        let ratio = input_amp / self.vsat;
        match log_domain_exponent(ratio, self.smoothness) {
            // G·V_sat·(1 + ratio^(-2p))^(-1/(2p)); never rounds above G·V_sat
            Some(u) => self.gain * self.vsat * (-(-u).exp().ln_1p() / (2.0 * self.smoothness)).exp(),
            None => self.gain * input_amp * compression(ratio, self.smoothness),
        }
    }
}

impl fmt::Display for RappParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "G={:.6} p={:.6} Vsat={:.6} V",
            self.gain, self.smoothness, self.vsat
        )
    }
}

/// Compression factor `(1 + ratio^(2p))^(-1/(2p))` for `ratio >= 0`.
#[inline]
pub(crate) fn compression(ratio: f64, smoothness: f64) -> f64 {
    if ratio == 0.0 {
        return 1.0;
    }
    let two_p = 2.0 * smoothness;
    match log_domain_exponent(ratio, smoothness) {
        Some(u) => {
            let softplus = u + (-u).exp().ln_1p();
            (-softplus / two_p).exp()
        }
        None => (1.0 + ratio.powf(two_p)).powf(-1.0 / two_p),
    }
}

/// `u = ln(ratio^(2p))` when the power term must be evaluated in the log
/// domain. Large p overflows the power well before the ratio limit.
#[inline]
fn log_domain_exponent(ratio: f64, smoothness: f64) -> Option<f64> {
    if ratio <= 1.0 {
        return None;
    }
    let u = 2.0 * smoothness * ratio.ln();
    (ratio > LOG_DOMAIN_RATIO || u >= 600.0).then_some(u)
}

/// Supply voltage and carrier frequency of one characterization point.
///
/// `vsup` is in volts and `freq` in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub vsup: f64,
    pub freq: f64,
}

impl OperatingPoint {
    pub fn new(vsup: f64, freq: f64) -> Result<Self> {
        let op = OperatingPoint { vsup, freq };
        op.validate()?;
        Ok(op)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vsup.is_finite() && self.vsup > 0.0) {
            return Err(Error::Domain(format!(
                "supply voltage must be positive, got {}",
                self.vsup
            )));
        }
        if !(self.freq.is_finite() && self.freq > 0.0) {
            return Err(Error::Domain(format!(
                "carrier frequency must be positive, got {}",
                self.freq
            )));
        }
        Ok(())
    }
}

impl fmt::Display for OperatingPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(Vsup={} V, f={} GHz)", self.vsup, self.freq)
    }
}

pub(crate) fn check_finite(x: ComplexSample) -> Result<()> {
    if x.re.is_finite() && x.im.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite sample {x}")))
    }
}

/// Applies the Rapp nonlinearity to one sample.
pub fn rapp_eval(params: &RappParams, x: ComplexSample) -> Result<ComplexSample> {
    params.validate()?;
    check_finite(x)?;
    Ok(eval_unchecked(params, x))
}

#[inline]
fn eval_unchecked(params: &RappParams, x: ComplexSample) -> ComplexSample {
    let amp = x.norm();
    if amp == 0.0 {
        return ComplexSample::new(0.0, 0.0);
    }
    x * (params.gain * compression(amp / params.vsat, params.smoothness))
}

/// AM/AM characteristic: output amplitude for each input amplitude.
pub fn am_am_curve(params: &RappParams, amplitudes: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    amplitudes
        .iter()
        .map(|&a| {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Domain(format!(
                    "amplitude must be finite and nonnegative, got {a}"
                )));
            }
            Ok(params.amplitude(a))
        })
        .collect()
}

/// Samplewise [`rapp_eval`] over a frame.
pub fn apply_to_frame(params: &RappParams, frame: &[ComplexSample]) -> Result<Vec<ComplexSample>> {
    params.validate()?;
    frame
        .iter()
        .map(|&x| {
            check_finite(x)?;
            Ok(eval_unchecked(params, x))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(g: f64, p: f64, v: f64) -> RappParams {
        RappParams::new(g, p, v).unwrap()
    }

    #[test]
    fn zero_input_gives_zero() {
        for p in [0.1, 1.0, 7.5, 1e4] {
            let y = rapp_eval(&params(1.0, p, 1.7), ComplexSample::new(0.0, 0.0)).unwrap();
            assert_eq!(y, ComplexSample::new(0.0, 0.0));
        }
    }

    #[test]
    fn at_saturation_factor_is_power_of_two() {
        let y = rapp_eval(&params(1.0, 1.0, 1.7), ComplexSample::new(1.7, 0.0)).unwrap();
        assert!((y.norm() - 1.7 * 2f64.powf(-0.5)).abs() < 1e-14);
        assert!((y.norm() - 1.20208).abs() < 1e-5);
    }

    #[test]
    fn large_p_approaches_hard_clip() {
        let y = rapp_eval(&params(1.0, 100.0, 1.7), ComplexSample::new(5.0, 0.0)).unwrap();
        assert!((y.norm() - 1.7).abs() < 0.01);
        let y = rapp_eval(&params(1.0, 100.0, 1.7), ComplexSample::new(1.0, 0.0)).unwrap();
        assert!((y.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn log_domain_branch_is_continuous_and_bounded() {
        let p = params(2.0, 3.0, 0.5);
        let below = p.amplitude(0.5 * LOG_DOMAIN_RATIO * (1.0 - 1e-12));
        let above = p.amplitude(0.5 * LOG_DOMAIN_RATIO * (1.0 + 1e-12));
        assert!((below - above).abs() <= 1e-12 * below);
        // no overflow for huge exponents
        let huge = params(1.0, 1e6, 1.0).amplitude(1e10);
        assert!(huge.is_finite() && huge <= 1.0);
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(RappParams::new(1.0, 0.0, 1.0).is_err());
        assert!(RappParams::new(-1.0, 1.0, 1.0).is_err());
        assert!(RappParams::new(1.0, 1.0, f64::NAN).is_err());
        let bad = RappParams {
            gain: 1.0,
            smoothness: -2.0,
            vsat: 1.0,
        };
        assert!(matches!(
            rapp_eval(&bad, ComplexSample::new(1.0, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rejects_non_finite_samples() {
        let p = params(1.0, 2.0, 1.0);
        assert!(rapp_eval(&p, ComplexSample::new(f64::INFINITY, 0.0)).is_err());
        assert!(apply_to_frame(&p, &[ComplexSample::new(0.0, f64::NAN)]).is_err());
    }

    #[test]
    fn am_am_examples() {
        let p = params(1.0, 1.0, 1.7);
        assert_eq!(am_am_curve(&p, &[0.0]).unwrap(), vec![0.0]);
        let y = am_am_curve(&p, &[1.7]).unwrap();
        assert!((y[0] - 1.20208).abs() < 1e-5);
        assert!(am_am_curve(&p, &[-0.1]).is_err());
    }

    #[test]
    fn am_am_monotone_sweep() {
        let grid: Vec<f64> = (0..=3000).map(|i| i as f64 * 1e-3).collect();
        for &(g, p, v) in &[(1.0, 0.5, 1.7), (1.0, 1.0, 1.7), (3.0, 3.0, 0.4), (0.5, 6.0, 2.5)] {
            let out = am_am_curve(&params(g, p, v), &grid).unwrap();
            assert!(out.windows(2).all(|w| w[1] > w[0]), "not monotone for p={p}");
        }
    }

    #[test]
    fn frame_examples() {
        let p = params(1.0, 3.0, 1.7);
        assert!(apply_to_frame(&p, &[]).unwrap().is_empty());
        let zeros = vec![ComplexSample::new(0.0, 0.0); 16];
        assert_eq!(apply_to_frame(&p, &zeros).unwrap(), zeros);
    }

    #[test]
    fn deep_linear_regime_passes_through() {
        let frame: Vec<ComplexSample> = (0..256)
            .map(|i| {
                let t = i as f64 * 0.37;
                ComplexSample::new(t.sin(), (1.3 * t).cos()) * 0.8
            })
            .collect();
        let max_amp = frame.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let out = apply_to_frame(&params(1.0, 3.0, 100.0 * max_amp), &frame).unwrap();
        for (x, y) in frame.iter().zip(&out) {
            assert!((x - y).norm() <= 1e-6 * x.norm().max(1e-300));
        }
    }

    fn valid_params() -> impl Strategy<Value = RappParams> {
        (0.1f64..20.0, 0.3f64..8.0, 0.05f64..5.0).prop_map(|(g, p, v)| params(g, p, v))
    }

    proptest! {
        #[test]
        fn phase_is_preserved(p in valid_params(), re in -10.0f64..10.0, im in -10.0f64..10.0) {
            let x = ComplexSample::new(re, im);
            prop_assume!(x.norm() > 1e-9);
            let y = rapp_eval(&p, x).unwrap();
            let dphi = (y * x.conj()).arg();
            prop_assert!(dphi.abs() <= 1e-12);
        }

        #[test]
        fn output_bounded_by_saturation(p in valid_params(), amp in 0.0f64..1e3) {
            let y = p.amplitude(amp);
            prop_assert!(y <= p.gain * p.vsat * (1.0 + 1e-15));
        }

        #[test]
        fn small_signal_is_linear(g in 0.1f64..20.0, s in 1.0f64..8.0, v in 0.05f64..5.0, frac in 1e-6f64..1e-2) {
            let p = params(g, s, v);
            let amp = frac * p.vsat;
            let y = p.amplitude(amp);
            prop_assert!(((y - p.gain * amp) / (p.gain * amp)).abs() <= 1e-4);
        }

        #[test]
        fn monotone_in_amplitude(p in valid_params(), a in 0.0f64..3.0, da in 1e-3f64..1.0) {
            // amplitudes in units of vsat; far beyond that the curve is flat in f64
            let (a, b) = (a * p.vsat, (a + da) * p.vsat);
            prop_assert!(p.amplitude(b) > p.amplitude(a));
        }

        #[test]
        fn scaling_covariance(p in valid_params(), c in 0.1f64..10.0, re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let x = ComplexSample::new(re, im);
            let scaled = RappParams { vsat: c * p.vsat, ..p };
            let lhs = rapp_eval(&p, x).unwrap();
            let rhs = rapp_eval(&scaled, x * c).unwrap() / c;
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        }
    }
}
