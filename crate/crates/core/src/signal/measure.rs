//! Synthetic measurements and the conditioning applied to captured records.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{check_finite, ComplexSample, OperatingPoint};
use crate::surface::ExtendedRappModel;

/// Impairments injected by [`simulate_measurement`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Impairments {
    /// Noise power relative to the clean output power, dB. `-inf` disables noise.
    pub noise_db: f64,
    /// Circular delay of the output, samples.
    pub delay: i64,
    /// Constant phase rotation of the output, radians.
    pub phase: f64,
}

impl Impairments {
    pub const NONE: Impairments = Impairments {
        noise_db: f64::NEG_INFINITY,
        delay: 0,
        phase: 0.0,
    };
}

/// Input and output frames captured at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub op: OperatingPoint,
    /// Volts at the amplifier input.
    pub input: Vec<ComplexSample>,
    /// Volts at the amplifier output.
    pub output: Vec<ComplexSample>,
    pub meta: Impairments,
}

impl MeasurementRecord {
    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }
}

fn rms(frame: &[ComplexSample]) -> f64 {
    (frame.iter().map(|x| x.norm_sqr()).sum::<f64>() / frame.len() as f64).sqrt()
}

/// `out[n] = frame[(n − shift) mod N]`.
pub fn circular_shift(frame: &[ComplexSample], shift: i64) -> Vec<ComplexSample> {
    let n = frame.len();
    if n == 0 {
        return Vec::new();
    }
    let s = shift.rem_euclid(n as i64) as usize;
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&frame[n - s..]);
    out.extend_from_slice(&frame[..n - s]);
    out
}

/// Passes `frame` through `truth` at `op`, then delays, rotates and adds
/// complex white Gaussian noise to the output.
pub fn simulate_measurement(
    truth: &ExtendedRappModel,
    op: OperatingPoint,
    frame: &[ComplexSample],
    impairments: &Impairments,
    seed: u64,
) -> Result<MeasurementRecord> {
    let n = frame.len();
    if n == 0 {
        return Err(Error::EmptyFrame);
    }
    if impairments.delay.unsigned_abs() >= n as u64 {
        return Err(Error::Domain(format!(
            "delay {} must be shorter than the frame ({n} samples)",
            impairments.delay
        )));
    }
    if !impairments.phase.is_finite() || impairments.noise_db.is_nan() || impairments.noise_db == f64::INFINITY {
        return Err(Error::Domain("invalid phase or noise level".into()));
    }
    let clean = truth.eval_frame(op, frame)?;
    let rotation = ComplexSample::from_polar(1.0, impairments.phase);
    let mut output: Vec<ComplexSample> = circular_shift(&clean, impairments.delay)
        .into_iter()
        .map(|y| y * rotation)
        .collect();
    if impairments.noise_db > f64::NEG_INFINITY {
        let noise_power = rms(&clean).powi(2) * 10f64.powf(impairments.noise_db / 10.0);
        let normal = Normal::new(0.0, (noise_power / 2.0).sqrt())
            .map_err(|e| Error::Domain(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for y in &mut output {
            *y += ComplexSample::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Ok(MeasurementRecord {
        op,
        input: frame.to_vec(),
        output,
        meta: *impairments,
    })
}

/// Delay and phase of the output relative to the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    /// Circular delay in samples, in `(−N/2, N/2]`.
    pub delay: i64,
    pub phase: f64,
}

fn check_frames(input: &[ComplexSample], output: &[ComplexSample]) -> Result<()> {
    if input.len() != output.len() {
        return Err(Error::LengthMismatch {
            left: input.len(),
            right: output.len(),
        });
    }
    if input.is_empty() {
        return Err(Error::EmptyFrame);
    }
    for &x in input.iter().chain(output) {
        check_finite(x)?;
    }
    if input.iter().all(|x| x.norm_sqr() == 0.0) {
        return Err(Error::ZeroFrame);
    }
    Ok(())
}

/// Integer delay from the cyclic cross-correlation of the mean-removed
/// amplitude envelopes, then phase from the angle of the complex inner
/// product after the delay is removed.
pub fn estimate_alignment(input: &[ComplexSample], output: &[ComplexSample]) -> Result<Alignment> {
    check_frames(input, output)?;
    let n = input.len();
    let envelope = |frame: &[ComplexSample]| -> Vec<ComplexSample> {
        let amps: Vec<f64> = frame.iter().map(|x| x.norm()).collect();
        let mean = amps.iter().sum::<f64>() / n as f64;
        amps.iter().map(|a| ComplexSample::new(a - mean, 0.0)).collect()
    };
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut ein = envelope(input);
    let mut eout = envelope(output);
    fft.process(&mut ein);
    fft.process(&mut eout);
    let mut xcorr: Vec<ComplexSample> = eout.iter().zip(&ein).map(|(o, i)| o * i.conj()).collect();
    ifft.process(&mut xcorr);
    // first maximum wins ties
    let lag = xcorr
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |best, (d, c)| {
            if c.re > best.1 {
                (d, c.re)
            } else {
                best
            }
        })
        .0;
    let delay = if lag > n / 2 {
        lag as i64 - n as i64
    } else {
        lag as i64
    };
    let shifted = circular_shift(output, -delay);
    let inner: ComplexSample = shifted.iter().zip(input).map(|(y, x)| y * x.conj()).sum();
    Ok(Alignment {
        delay,
        phase: inner.arg(),
    })
}

/// Removes the estimated delay and constant phase from the output frame.
pub fn align(record: &MeasurementRecord) -> Result<MeasurementRecord> {
    let est = estimate_alignment(&record.input, &record.output)?;
    let derotate = ComplexSample::from_polar(1.0, -est.phase);
    let output = circular_shift(&record.output, -est.delay)
        .into_iter()
        .map(|y| y * derotate)
        .collect();
    Ok(MeasurementRecord {
        output,
        ..record.clone()
    })
}

/// Undoes cable attenuation and applies the generator's virtual gain.
///
/// The input frame is scaled by `10^((virtual_gain_db − cable_loss_in_db)/20)`
/// and the output frame by `10^(cable_loss_out_db/20)`.
pub fn scale_record(
    record: &MeasurementRecord,
    cable_loss_in_db: f64,
    cable_loss_out_db: f64,
    virtual_gain_db: f64,
) -> Result<MeasurementRecord> {
    for (name, v) in [
        ("input cable loss", cable_loss_in_db),
        ("output cable loss", cable_loss_out_db),
        ("virtual gain", virtual_gain_db),
    ] {
        if !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite, got {v}")));
        }
    }
    let gin = 10f64.powf((virtual_gain_db - cable_loss_in_db) / 20.0);
    let gout = 10f64.powf(cable_loss_out_db / 20.0);
    Ok(MeasurementRecord {
        input: record.input.iter().map(|x| x * gin).collect(),
        output: record.output.iter().map(|y| y * gout).collect(),
        ..record.clone()
    })
}
