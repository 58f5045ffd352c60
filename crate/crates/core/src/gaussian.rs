//! Closed-form Gaussian capacities and the correlation maximization behind
//! the model `Y1 = X1 + X2 + S`, `Y2 = X2 + Z`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Power budgets, state variance and helper-link noise variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    #[serde(rename = "P1")]
    pub p1: f64,
    #[serde(rename = "P2")]
    pub p2: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "N")]
    pub n: f64,
}

impl GaussianParams {
    pub fn new(p1: f64, p2: f64, q: f64, n: f64) -> Result<Self> {
        let g = GaussianParams { p1, p2, q, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("P1", self.p1), ("P2", self.p2), ("Q", self.q), ("N", self.n)] {
            if !(v >= 0.0) || v.is_infinite() {
                return invalid(format!("{name} = {v} must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

fn half_log(x: f64) -> f64 {
    0.5 * x.log2()
}

/// `Theta(P1, P2, rho)`: the sum-rate expression for correlation `rho`.
/// Infinite when the state or the helper link is noiseless.
pub fn theta(g: &GaussianParams, rho: f64) -> Result<f64> {
    g.validate()?;
    if !(-1.0..=1.0).contains(&rho) {
        return invalid(format!("rho = {rho} is outside [-1,1]"));
    }
    Ok(theta_unchecked(g, rho))
}

fn theta_unchecked(g: &GaussianParams, rho: f64) -> f64 {
    let GaussianParams { p1, p2, q, n } = *g;
    if q == 0.0 {
        return f64::INFINITY;
    }
    if n == 0.0 {
        return if p2 > 0.0 {
            f64::INFINITY
        } else {
            half_log(1.0 + p1 / q)
        };
    }
    let r2 = 1.0 - rho * rho;
    let a = (p1.sqrt() + rho * p2.sqrt()).powi(2);
    half_log(1.0 + (r2 * p1 * p2 + n * (a + r2 * p2)) / (q * (p2 + n))) + half_log(1.0 + p2 / n)
}

/// Golden-section maximum of `f` on `[lo, hi]`, stopping at width `tol` or
/// after `max_iter` steps. Returns `(argmax, max)`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    let mut it = 0;
    while hi - lo > tol && it < max_iter {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
        it += 1;
    }
    // The end points are candidates too: the maximum is often at rho = 1.
    [(a, fa), (b, fb), (lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .fold((a, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
}

pub const GOLDEN_TOL: f64 = 1e-10;
pub const GOLDEN_MAX_ITER: usize = 200;

/// `max_rho Theta` over `[lo, hi]` by golden section; `(argmax, value)`.
pub fn max_theta(g: &GaussianParams, lo: f64, hi: f64) -> Result<(f64, f64)> {
    g.validate()?;
    if !(-1.0 <= lo && lo <= hi && hi <= 1.0) {
        return invalid("rho bracket must lie in [-1,1]");
    }
    Ok(golden_section_max(|r| theta_unchecked(g, r), lo, hi, GOLDEN_TOL, GOLDEN_MAX_ITER))
}

/// `max_rho Theta` over an `n`-point uniform grid on `[lo, hi]`.
pub fn max_theta_grid(g: &GaussianParams, lo: f64, hi: f64, n: usize) -> Result<(f64, f64)> {
    g.validate()?;
    if n < 2 {
        return invalid("grid needs at least two points");
    }
    Ok((0..n)
        .map(|i| {
            let r = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (r, theta_unchecked(g, r))
        })
        .fold((lo, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc }))
}

/// The Gaussian models with closed forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaussianModel {
    /// Sum capacity of `Y = X1 + X2 + S`, states at both encoders.
    Remark5,
    /// `Y1 = X1 + X2 + S`, `Y2 = X2 + Z`, states at both encoders:
    /// max over rho of Theta.
    Example4,
    /// Informed-helper capacity of `Y = X1 + X2 + S`.
    Remark7,
    /// Informed-helper capacity of `Y1 = X1 + X2 + S`, `Y2 = X2 + Z`.
    Example5,
}

impl GaussianModel {
    pub const ALL: [GaussianModel; 4] = [
        GaussianModel::Remark5,
        GaussianModel::Example4,
        GaussianModel::Remark7,
        GaussianModel::Example5,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GaussianModel::Remark5 => "remark5",
            GaussianModel::Example4 => "example4",
            GaussianModel::Remark7 => "remark7",
            GaussianModel::Example5 => "example5",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .map_or_else(|| invalid(format!("unknown Gaussian model {s}")), Ok)
    }
}

/// A model's value and, for the maximized model, the optimal correlation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianValue {
    pub model: GaussianModel,
    pub params: GaussianParams,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax_rho: Option<f64>,
}

/// Evaluates `model` at `params` (bits per channel use).
pub fn gaussian_capacity(model: GaussianModel, params: &GaussianParams) -> Result<GaussianValue> {
    params.validate()?;
    let GaussianParams { p1, p2, q, n } = *params;
    let ratio = |num: f64| if q == 0.0 { f64::INFINITY } else { num / q };
    let (value, argmax_rho) = match model {
        GaussianModel::Remark5 => (half_log(1.0 + ratio((p1.sqrt() + p2.sqrt()).powi(2))), None),
        GaussianModel::Remark7 => (half_log(1.0 + ratio(p1 + p2)), None),
        GaussianModel::Example5 => {
            let helper = if n == 0.0 {
                if p2 > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                half_log(1.0 + p2 / n)
            };
            let share = if p2 + n == 0.0 { 0.0 } else { ratio(p2) * n / (p2 + n) };
            (half_log(1.0 + ratio(p1) + share) + helper, None)
        }
        GaussianModel::Example4 => {
            let (r, v) = max_theta(params, 0.0, 1.0)?;
            (v, Some(r))
        }
    };
    Ok(GaussianValue {
        model,
        params: *params,
        value,
        argmax_rho,
    })
}
