//! Parameter surfaces over (supply voltage, carrier frequency) and the
//! extended Rapp model built from three of them.
//!
//! Supply voltage is in volts, frequency in GHz, and `log` is the natural
//! logarithm. Coefficients are only meaningful under these units.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{apply_to_frame, ComplexSample, OperatingPoint, RappParams};

/// Default lower bound applied to surface outputs before they become Rapp parameters.
pub const DEFAULT_CLAMP_FLOOR: f64 = 1e-3;

/// `vsup^vsup_power * f^freq_power`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial {
    pub vsup_power: u32,
    pub freq_power: u32,
}

impl Monomial {
    pub const fn new(vsup_power: u32, freq_power: u32) -> Self {
        Monomial {
            vsup_power,
            freq_power,
        }
    }

    pub fn degree(&self) -> u32 {
        self.vsup_power + self.freq_power
    }

    #[inline]
    pub fn eval(&self, op: OperatingPoint) -> f64 {
        op.vsup.powi(self.vsup_power as i32) * op.freq.powi(self.freq_power as i32)
    }
}

/// Graded order: total degree ascending, then `vsup_power` descending, so a
/// quadratic basis lists as 1, V, f, V², V·f, f².
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then(other.vsup_power.cmp(&self.vsup_power))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}f{}", self.vsup_power, self.freq_power)
    }
}

impl FromStr for Monomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("monomial", format!("expected v<i>f<j>, got {s:?}"));
        let rest = s.trim().strip_prefix('v').ok_or_else(bad)?;
        let (i, j) = rest.split_once('f').ok_or_else(bad)?;
        Ok(Monomial::new(
            i.parse().map_err(|_| bad())?,
            j.parse().map_err(|_| bad())?,
        ))
    }
}

/// All monomials of total degree `<= max_degree`, in canonical order.
pub fn full_basis(max_degree: u32) -> Vec<Monomial> {
    let mut basis = Vec::new();
    for degree in 0..=max_degree {
        for vsup_power in (0..=degree).rev() {
            basis.push(Monomial::new(vsup_power, degree - vsup_power));
        }
    }
    basis
}

/// `V_sat = p10·V + p11·V·f + p02·f² + p12·V·f²`.
pub fn canonical_vsat_basis() -> Vec<Monomial> {
    vec![
        Monomial::new(1, 0),
        Monomial::new(1, 1),
        Monomial::new(0, 2),
        Monomial::new(1, 2),
    ]
}

/// `p = p10·V + p01·f + p20·V² + p02·f²`.
pub fn canonical_p_basis() -> Vec<Monomial> {
    vec![
        Monomial::new(1, 0),
        Monomial::new(0, 1),
        Monomial::new(2, 0),
        Monomial::new(0, 2),
    ]
}

/// Sorts a basis into canonical order and rejects duplicates.
pub fn canonical_basis(mut basis: Vec<Monomial>) -> Result<Vec<Monomial>> {
    basis.sort();
    if basis.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Domain("basis contains duplicate monomials".into()));
    }
    Ok(basis)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub monomial: Monomial,
    pub coefficient: f64,
}

/// Sparse bivariate polynomial `Σ c · vsup^i · f^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Term>", into = "Vec<Term>")]
pub struct PolynomialSurface {
    terms: Vec<Term>,
}

impl PolynomialSurface {
    pub fn new(terms: impl IntoIterator<Item = (Monomial, f64)>) -> Result<Self> {
        let mut terms: Vec<Term> = terms
            .into_iter()
            .map(|(monomial, coefficient)| Term {
                monomial,
                coefficient,
            })
            .collect();
        terms.sort_by(|a, b| a.monomial.cmp(&b.monomial));
        if terms.windows(2).any(|w| w[0].monomial == w[1].monomial) {
            return Err(Error::Domain("surface contains duplicate monomials".into()));
        }
        if let Some(t) = terms.iter().find(|t| !t.coefficient.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite coefficient for {}",
                t.monomial
            )));
        }
        Ok(PolynomialSurface { terms })
    }

    pub fn constant(value: f64) -> Self {
        PolynomialSurface {
            terms: vec![Term {
                monomial: Monomial::new(0, 0),
                coefficient: value,
            }],
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn basis(&self) -> Vec<Monomial> {
        self.terms.iter().map(|t| t.monomial).collect()
    }

    pub fn coefficient(&self, monomial: Monomial) -> Option<f64> {
        self.terms
            .iter()
            .find(|t| t.monomial == monomial)
            .map(|t| t.coefficient)
    }

    pub fn eval(&self, op: OperatingPoint) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * t.monomial.eval(op))
            .sum()
    }
}

impl TryFrom<Vec<Term>> for PolynomialSurface {
    type Error = Error;

    fn try_from(terms: Vec<Term>) -> Result<Self> {
        PolynomialSurface::new(terms.into_iter().map(|t| (t.monomial, t.coefficient)))
    }
}

impl From<PolynomialSurface> for Vec<Term> {
    fn from(s: PolynomialSurface) -> Self {
        s.terms
    }
}

/// `(ln(vsup) + a) · h(f)` with `h` a polynomial of degree at most 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProductSurface {
    pub a: f64,
    /// Coefficients of `h`, highest power first, constant term last.
    pub freq_coeffs: Vec<f64>,
}

impl LogProductSurface {
    pub fn new(a: f64, freq_coeffs: Vec<f64>) -> Result<Self> {
        if freq_coeffs.is_empty() || freq_coeffs.len() > 4 {
            return Err(Error::Domain(format!(
                "h(f) must have 1 to 4 coefficients, got {}",
                freq_coeffs.len()
            )));
        }
        if !a.is_finite() || freq_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite log-product coefficient".into()));
        }
        Ok(LogProductSurface { a, freq_coeffs })
    }

    pub fn h(&self, freq: f64) -> f64 {
        self.freq_coeffs.iter().fold(0.0, |acc, c| acc * freq + c)
    }

    pub fn eval(&self, op: OperatingPoint) -> f64 {
        (op.vsup.ln() + self.a) * self.h(op.freq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ParamSurface {
    Polynomial { terms: PolynomialSurface },
    LogProduct(LogProductSurface),
}

impl ParamSurface {
    pub fn constant(value: f64) -> Self {
        ParamSurface::Polynomial {
            terms: PolynomialSurface::constant(value),
        }
    }

    pub fn eval(&self, op: OperatingPoint) -> f64 {
        match self {
            ParamSurface::Polynomial { terms } => terms.eval(op),
            ParamSurface::LogProduct(s) => s.eval(op),
        }
    }

    /// Number of free coefficients.
    pub fn n_coefficients(&self) -> usize {
        match self {
            ParamSurface::Polynomial { terms } => terms.terms().len(),
            ParamSurface::LogProduct(s) => {
                1 + s.freq_coeffs.iter().filter(|c| **c != 0.0).count()
            }
        }
    }
}

impl From<PolynomialSurface> for ParamSurface {
    fn from(terms: PolynomialSurface) -> Self {
        ParamSurface::Polynomial { terms }
    }
}

impl From<LogProductSurface> for ParamSurface {
    fn from(s: LogProductSurface) -> Self {
        ParamSurface::LogProduct(s)
    }
}

pub fn surface_eval(surface: &ParamSurface, op: OperatingPoint) -> Result<f64> {
    op.validate()?;
    Ok(surface.eval(op))
}

/// Rapp parameters produced by an extended model at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampedParams {
    pub params: RappParams,
    /// True when at least one surface value was raised to the clamp floor.
    pub clamped: bool,
}

/// Rapp model whose G, p and V_sat are surfaces over (vsup, f).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedRappModel {
    pub gain: ParamSurface,
    pub smoothness: ParamSurface,
    pub vsat: ParamSurface,
    pub clamp_floor: f64,
}

impl ExtendedRappModel {
    pub fn new(gain: ParamSurface, smoothness: ParamSurface, vsat: ParamSurface) -> Self {
        ExtendedRappModel {
            gain,
            smoothness,
            vsat,
            clamp_floor: DEFAULT_CLAMP_FLOOR,
        }
    }

    /// Model whose surfaces are constants; equivalent to the scalar model.
    pub fn constant(params: RappParams) -> Self {
        ExtendedRappModel::new(
            ParamSurface::constant(params.gain),
            ParamSurface::constant(params.smoothness),
            ParamSurface::constant(params.vsat),
        )
    }

    pub fn params_at(&self, op: OperatingPoint) -> Result<ClampedParams> {
        op.validate()?;
        let floor = self.clamp_floor;
        if !(floor.is_finite() && floor > 0.0) {
            return Err(Error::Domain(format!("clamp floor must be positive, got {floor}")));
        }
        let mut clamped = false;
        let mut take = |surface: &ParamSurface| {
            let v = surface.eval(op);
            if v.is_nan() || v < floor {
                clamped = true;
                floor
            } else if v.is_infinite() {
                clamped = true;
                f64::MAX
            } else {
                v
            }
        };
        let gain = take(&self.gain);
        let smoothness = take(&self.smoothness);
        let vsat = take(&self.vsat);
        Ok(ClampedParams {
            params: RappParams {
                gain,
                smoothness,
                vsat,
            },
            clamped,
        })
    }

    pub fn eval_frame(&self, op: OperatingPoint, frame: &[ComplexSample]) -> Result<Vec<ComplexSample>> {
        let p = self.params_at(op)?;
        apply_to_frame(&p.params, frame)
    }
}

pub fn extended_params(model: &ExtendedRappModel, op: OperatingPoint) -> Result<ClampedParams> {
    model.params_at(op)
}

pub fn extended_eval(
    model: &ExtendedRappModel,
    op: OperatingPoint,
    frame: &[ComplexSample],
) -> Result<Vec<ComplexSample>> {
    model.eval_frame(op, frame)
}

/// Distinct monomials across several bases, canonical order.
pub fn union_basis<'a>(bases: impl IntoIterator<Item = &'a [Monomial]>) -> Vec<Monomial> {
    let set: BTreeSet<Monomial> = bases.into_iter().flatten().copied().collect();
    set.into_iter().collect()
}
