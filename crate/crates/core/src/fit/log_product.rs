//! Separable fit of `(ln(vsup) + a) · h(f)`.
//!
//! For fixed `a` the model is linear in the coefficients of `h`, so the fit
//! reduces to a one-dimensional search over `a` of the profiled residual.

use nalgebra::DMatrix;

use super::linear::lstsq_scaled;
use super::FitReport;
use crate::error::{Error, Result};
use crate::model::OperatingPoint;
use crate::surface::LogProductSurface;

/// Range scanned for the offset `a` before golden-section refinement.
pub const A_SCAN_RANGE: (f64, f64) = (-10.0, 10.0);
/// Final bracket width for the offset `a`.
pub const A_TOLERANCE: f64 = 1e-8;
const A_SCAN_STEP: f64 = 0.05;

struct Profile<'a> {
    samples: &'a [(OperatingPoint, f64)],
    powers: Vec<u32>,
    evaluations: usize,
}

impl Profile<'_> {
    /// Best `h` coefficients for a given `a` and the resulting residual sum.
    fn solve(&mut self, a: f64) -> Option<(Vec<f64>, f64)> {
        self.evaluations += 1;
        let design = DMatrix::from_fn(self.samples.len(), self.powers.len(), |i, j| {
            let (op, _) = self.samples[i];
            (op.vsup.ln() + a) * op.freq.powi(self.powers[j] as i32)
        });
        let y: Vec<f64> = self.samples.iter().map(|s| s.1).collect();
        let sol = lstsq_scaled(&design, &y).ok()?;
        let ssr = sol.ssr();
        Some((sol.coefficients, ssr))
    }

    fn ssr(&mut self, a: f64) -> f64 {
        self.solve(a).map_or(f64::INFINITY, |s| s.1)
    }
}

fn golden_section(profile: &mut Profile, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = profile.ssr(x1);
    let mut f2 = profile.ssr(x2);
    while hi - lo > A_TOLERANCE {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = profile.ssr(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = profile.ssr(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Frequency powers of `h`, highest first.
fn h_powers(freq_degree: u32, include_f2: bool) -> Result<Vec<u32>> {
    if freq_degree > 3 {
        return Err(Error::Domain(format!(
            "h(f) degree must be at most 3, got {freq_degree}"
        )));
    }
    if !include_f2 && freq_degree != 3 {
        return Err(Error::Domain(
            "omitting the f² term requires a cubic h(f)".into(),
        ));
    }
    Ok((0..=freq_degree)
        .rev()
        .filter(|&k| include_f2 || k != 2)
        .collect())
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Fits `(ln(vsup) + a) · h(f)` with `h` of degree `freq_degree`; when
/// `include_f2` is false the `f²` coefficient is held at zero.
pub fn fit_log_product(
    samples: &[(OperatingPoint, f64)],
    freq_degree: u32,
    include_f2: bool,
) -> Result<FitReport<LogProductSurface>> {
    let powers = h_powers(freq_degree, include_f2)?;
    let needed = freq_degree as usize + 3;
    if samples.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: samples.len(),
        });
    }
    for (op, v) in samples {
        op.validate()?;
        if !v.is_finite() {
            return Err(Error::Domain(format!("non-finite sample value at {op}")));
        }
    }
    let n_vsup = distinct(samples.iter().map(|s| s.0.vsup));
    let n_freq = distinct(samples.iter().map(|s| s.0.freq));
    if n_vsup < 2 || n_freq < 2 {
        return Err(Error::DegenerateGrid(format!(
            "need at least 2 distinct supply voltages and frequencies, got {n_vsup} and {n_freq}"
        )));
    }

    let expand = |coeffs: &[f64]| -> Vec<f64> {
        let mut full = vec![0.0; freq_degree as usize + 1];
        for (p, c) in powers.iter().zip(coeffs) {
            full[(freq_degree - p) as usize] = *c;
        }
        full
    };

    if samples.iter().all(|s| s.1 == 0.0) {
        let surface = LogProductSurface::new(0.0, vec![0.0; freq_degree as usize + 1])?;
        return Ok(FitReport::direct(surface, 0.0));
    }

    let mut profile = Profile {
        samples,
        powers: powers.clone(),
        evaluations: 0,
    };

    // coarse scan; ties go to the smallest |a|
    let (lo_a, hi_a) = A_SCAN_RANGE;
    let steps = ((hi_a - lo_a) / A_SCAN_STEP).round() as usize;
    let scan: Vec<(f64, f64)> = (0..=steps)
        .map(|i| {
            let a = lo_a + i as f64 * A_SCAN_STEP;
            (a, profile.ssr(a))
        })
        .collect();
    let best = (0..scan.len())
        .min_by(|&i, &j| {
            scan[i]
                .1
                .total_cmp(&scan[j].1)
                .then(scan[i].0.abs().total_cmp(&scan[j].0.abs()))
        })
        .expect("nonempty scan");
    if !scan[best].1.is_finite() {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    let lo = scan[best.saturating_sub(1)].0;
    let hi = scan[(best + 1).min(scan.len() - 1)].0;
    let mut a = golden_section(&mut profile, lo, hi);
    let mut a_ssr = profile.ssr(a);
    if scan[best].1 < a_ssr {
        (a, a_ssr) = scan[best];
    }

    // one parabolic step through a ± h; the profile is locally quadratic
    let h = 1e-5;
    let (fm, fp) = (profile.ssr(a - h), profile.ssr(a + h));
    let curvature = fp - 2.0 * a_ssr + fm;
    if curvature > 0.0 {
        let candidate = a - h * (fp - fm) / (2.0 * curvature);
        let c_ssr = profile.ssr(candidate);
        if c_ssr < a_ssr {
            a = candidate;
        }
    }

    let (coeffs, ssr) = profile
        .solve(a)
        .ok_or(Error::RankDeficient { condition: f64::INFINITY })?;
    let surface = LogProductSurface::new(a, expand(&coeffs))?;
    let mut report = FitReport::direct(surface, (ssr / samples.len() as f64).sqrt());
    report.iterations = profile.evaluations;
    Ok(report)
}
