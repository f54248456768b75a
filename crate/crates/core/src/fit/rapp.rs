//! Scalar Rapp fit at one operating point.
//!
//! Minimizes `Σ (A(x_i) − y_i)²` over `(ln G, ln p, ln V_sat)` with a
//! Levenberg–Marquardt iteration, where `A` is the Rapp AM/AM curve. Working
//! in log-parameters keeps every iterate inside the valid domain.

use nalgebra::{Matrix3, Vector3};

use super::{FitReport, RmseKind};
use crate::error::{Error, Result};
use crate::model::{ComplexSample, RappParams};

/// One sample of an AM/AM characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmAmPoint {
    pub input_amp: f64,
    pub output_amp: f64,
}

/// Pairs `|input[n]|` with `|output[n]|` for aligned frames.
pub fn am_am_points(input: &[ComplexSample], output: &[ComplexSample]) -> Result<Vec<AmAmPoint>> {
    if input.len() != output.len() {
        return Err(Error::LengthMismatch {
            left: input.len(),
            right: output.len(),
        });
    }
    Ok(input
        .iter()
        .zip(output)
        .map(|(x, y)| AmAmPoint {
            input_amp: x.norm(),
            output_amp: y.norm(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RappFitOptions {
    pub max_iterations: usize,
    /// Stop when every gradient component, normalized by its Jacobian column
    /// norm and the residual norm, falls below this.
    pub gradient_tolerance: f64,
    pub initial_smoothness: f64,
}

impl Default for RappFitOptions {
    fn default() -> Self {
        RappFitOptions {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            initial_smoothness: 2.0,
        }
    }
}

const MIN_POINTS: usize = 8;
const MIN_DISTINCT_INPUTS: usize = 3;

/// Rapp output amplitude and its gradient with respect to
/// `(ln G, ln p, ln V_sat)`.
pub fn amplitude_log_gradient(params: &RappParams, input_amp: f64) -> (f64, [f64; 3]) {
    if input_amp == 0.0 {
        return (0.0, [0.0; 3]);
    }
    let p = params.smoothness;
    let two_p = 2.0 * p;
    let u = two_p * (input_amp / params.vsat).ln();
    // softplus(u) = ln(1 + s^(2p)) and its derivative, both overflow-free
    let (softplus, sigma) = if u > 0.0 {
        let e = (-u).exp();
        (u + e.ln_1p(), 1.0 / (1.0 + e))
    } else {
        let e = u.exp();
        (e.ln_1p(), e / (1.0 + e))
    };
    let amp = params.gain * input_amp * (-softplus / two_p).exp();
    let d_ln_p = (softplus - sigma * u) / two_p;
    (amp, [amp, amp * d_ln_p, amp * sigma])
}

fn params_from_log(theta: &Vector3<f64>) -> RappParams {
    RappParams {
        gain: theta[0].exp(),
        smoothness: theta[1].exp(),
        vsat: theta[2].exp(),
    }
}

fn cost(theta: &Vector3<f64>, points: &[AmAmPoint]) -> f64 {
    let params = params_from_log(theta);
    points
        .iter()
        .map(|pt| {
            let r = params.amplitude(pt.input_amp) - pt.output_amp;
            r * r
        })
        .sum()
}

/// Normal-equation pieces `(Σr², JᵀJ, Jᵀr)` at `theta`.
fn linearize(theta: &Vector3<f64>, points: &[AmAmPoint]) -> (f64, Matrix3<f64>, Vector3<f64>) {
    let params = params_from_log(theta);
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    let mut ssr = 0.0;
    for pt in points {
        let (amp, grad) = amplitude_log_gradient(&params, pt.input_amp);
        let r = amp - pt.output_amp;
        let g = Vector3::from(grad);
        ssr += r * r;
        jtr += g * r;
        jtj += g * g.transpose();
    }
    (ssr, jtj, jtr)
}

fn relative_gradient(ssr: f64, jtj: &Matrix3<f64>, jtr: &Vector3<f64>) -> f64 {
    if ssr == 0.0 {
        return 0.0;
    }
    let rnorm = ssr.sqrt();
    (0..3)
        .map(|k| {
            let col = jtj[(k, k)].sqrt();
            if col == 0.0 {
                0.0
            } else {
                jtr[k].abs() / (col * rnorm)
            }
        })
        .fold(0.0, f64::max)
}

fn check_points(points: &[AmAmPoint]) -> Result<()> {
    if points.len() < MIN_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_POINTS,
            got: points.len(),
        });
    }
    if let Some(pt) = points.iter().find(|pt| {
        !(pt.input_amp.is_finite() && pt.input_amp >= 0.0)
            || !(pt.output_amp.is_finite() && pt.output_amp >= 0.0)
    }) {
        return Err(Error::Domain(format!(
            "AM/AM point ({}, {}) must be finite and nonnegative",
            pt.input_amp, pt.output_amp
        )));
    }
    let mut inputs: Vec<f64> = points.iter().map(|pt| pt.input_amp).collect();
    inputs.sort_by(f64::total_cmp);
    inputs.dedup();
    match inputs.len() {
        1 => Err(Error::DegenerateData(
            "all input amplitudes are equal".into(),
        )),
        n if n < MIN_DISTINCT_INPUTS => Err(Error::InsufficientData {
            needed: MIN_DISTINCT_INPUTS,
            got: n,
        }),
        _ if inputs[inputs.len() - 1] <= 0.0 => Err(Error::DegenerateData(
            "maximum input amplitude is zero".into(),
        )),
        _ => Ok(()),
    }
}

/// Initial guess: small-signal slope from the lowest-decile inputs,
/// `V_sat = max(y) / G`, and the configured smoothness.
fn initial_guess(points: &[AmAmPoint], smoothness: f64) -> Result<RappParams> {
    let mut nonzero: Vec<&AmAmPoint> = points.iter().filter(|pt| pt.input_amp > 0.0).collect();
    nonzero.sort_by(|a, b| a.input_amp.total_cmp(&b.input_amp));
    let take = (nonzero.len() / 10).max(MIN_DISTINCT_INPUTS).min(nonzero.len());
    let (sxy, sxx) = nonzero[..take].iter().fold((0.0, 0.0), |(sxy, sxx), pt| {
        (sxy + pt.input_amp * pt.output_amp, sxx + pt.input_amp * pt.input_amp)
    });
    let gain = sxy / sxx;
    let max_out = points.iter().map(|pt| pt.output_amp).fold(0.0, f64::max);
    if !(gain > 0.0 && gain.is_finite()) || max_out <= 0.0 {
        return Err(Error::DegenerateData(
            "output amplitude is identically zero at low drive".into(),
        ));
    }
    RappParams::new(gain, smoothness, max_out / gain)
}

/// Fits scalar `(G, p, V_sat)` to AM/AM points.
pub fn fit_rapp_point(points: &[AmAmPoint], opts: &RappFitOptions) -> Result<FitReport<RappParams>> {
    check_points(points)?;
    let init = initial_guess(points, opts.initial_smoothness)?;
    let mut theta = Vector3::new(init.gain.ln(), init.smoothness.ln(), init.vsat.ln());

    let n = points.len() as f64;
    let energy: f64 = points.iter().map(|pt| pt.output_amp * pt.output_amp).sum();
    let (mut ssr, mut jtj, mut jtr) = linearize(&theta, points);
    let mut history = vec![ssr.sqrt()];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut gradient = relative_gradient(ssr, &jtj, &jtr);

    let converged = loop {
        // exact fit to working precision
        if gradient <= opts.gradient_tolerance || ssr <= 1e-28 * energy {
            break true;
        }
        if iterations >= opts.max_iterations {
            break false;
        }

        let mut accepted = None;
        while lambda < 1e16 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let step = match damped.cholesky() {
                Some(ch) => -ch.solve(&jtr),
                None => {
                    lambda *= 4.0;
                    continue;
                }
            };
            let trial = theta + step;
            let trial_ssr = cost(&trial, points);
            if trial_ssr.is_finite() && trial_ssr < ssr {
                lambda = (lambda / 3.0).max(1e-12);
                accepted = Some((trial, step));
                break;
            }
            lambda *= 4.0;
        }

        let Some((trial, step)) = accepted else {
            // no descent direction left at working precision
            break gradient <= opts.gradient_tolerance.max(1e-6);
        };
        theta = trial;
        (ssr, jtj, jtr) = linearize(&theta, points);
        gradient = relative_gradient(ssr, &jtj, &jtr);
        history.push(ssr.sqrt());
        iterations += 1;

        if step.amax() <= 1e-15 * (1.0 + theta.amax()) {
            break true;
        }
    };

    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            gradient,
        });
    }

    Ok(FitReport {
        result: params_from_log(&theta),
        rmse: (ssr / n).sqrt(),
        rmse_kind: RmseKind::Amplitude,
        iterations,
        converged,
        residual_norm_history: history,
    })
}
