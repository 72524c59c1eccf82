//! Twisted-moment quadrature over [T, 2T], Euler-product main-term
//! predictions, the threshold V, and the detection inequality
//!   prod_j |L_j|^2 - V sum_i prod_{j != i} |L_j|^2 > 0
//! whose positivity forces min_j |L_j|^2 > V by algebra alone.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
// float intrinsics route through the trait only when std is off
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::coeffs::{CoefficientSource, CombinedCoefficients};
use crate::leval::CriticalLineGrid;
use crate::resonator::Resonator;
use crate::{Error, Result};

/// Which factor multiplies |R(t)|^2 under the integral sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrand {
    /// 1 (the plain mean square of the resonator)
    One,
    /// |L_i|^2
    Single(usize),
    /// prod over all sources of |L_j|^2
    Product,
    /// prod over j != i of |L_j|^2
    Excluded(usize),
}

/// t/T-shaped weight under the integral. The indicator reproduces the plain
/// [T, 2T] integrals; the bump is the smooth variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmoothWeight {
    Indicator,
    Bump,
}

impl SmoothWeight {
    /// Phi(u) for u = t/T. Supported on [1, 2], values in [0, 1].
    pub fn value(&self, u: f64) -> f64 {
        if !(1.0..=2.0).contains(&u) {
            return 0.0;
        }
        match self {
            SmoothWeight::Indicator => 1.0,
            SmoothWeight::Bump => {
                let w = 2.0 * (u - 1.5);
                if w.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - w * w)).exp()
                }
            }
        }
    }
}

/// Trapezoid value with its Richardson half-grid error estimate.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureValue {
    pub value: f64,
    /// |fine - coarse| / (3 |fine|): the classical trapezoid error estimate
    pub rel_estimate: f64,
    /// estimate exceeded 5%: the grid is too coarse for this integrand
    pub flagged: bool,
}

/// One measured-vs-predicted comparison, self-describing for reports.
#[derive(Clone, Debug)]
pub struct MomentReport {
    pub measured: f64,
    pub predicted: f64,
    pub ratio: f64,
    pub t_start: f64,
    pub spacing: f64,
    pub n_points: usize,
    pub rel_estimate: f64,
    pub flagged: bool,
}

/// Order-fixed pairwise sum: the same tree for the same length, so
/// reductions are reproducible regardless of how the caller chunked work.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn integrand_sample(grid: &CriticalLineGrid, which: Integrand, idx: usize) -> f64 {
    let base = match which {
        Integrand::One => 1.0,
        Integrand::Single(i) => grid.source_values[i][idx].norm_sqr(),
        Integrand::Product => grid
            .source_values
            .iter()
            .map(|vals| vals[idx].norm_sqr())
            .product(),
        Integrand::Excluded(i) => grid
            .source_values
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, vals)| vals[idx].norm_sqr())
            .product(),
    };
    match grid.r_values.is_empty() {
        true => base,
        false => base * grid.r_values[idx].norm_sqr(),
    }
}

fn check_integrand(grid: &CriticalLineGrid, which: Integrand) -> Result<()> {
    let m = grid.source_values.len();
    let idx = match which {
        Integrand::Single(i) | Integrand::Excluded(i) => Some(i),
        _ => None,
    };
    if let Some(i) = idx {
        if i >= m {
            return Err(Error::Input(format!("integrand index {i} out of range (m = {m})")));
        }
    }
    if matches!(which, Integrand::Product | Integrand::Excluded(_)) && m == 0 {
        return Err(Error::Input("product integrand on a grid with no sources".into()));
    }
    Ok(())
}

fn trapezoid_mean(samples: &[f64]) -> f64 {
    let n = samples.len();
    let mut weighted: Vec<f64> = samples.to_vec();
    weighted[0] *= 0.5;
    weighted[n - 1] *= 0.5;
    pairwise_sum(&weighted) / (n - 1) as f64
}

/// (1 / length) int f(t) |R(t)|^2 dt over the grid interval, trapezoid rule,
/// with the half-grid Richardson estimate. Estimates above 5% set `flagged`
/// (a warning, not an error: the value is still reported).
pub fn quadrature_moment(grid: &CriticalLineGrid, which: Integrand) -> Result<QuadratureValue> {
    weighted_quadrature_moment(grid, which, SmoothWeight::Indicator)
}

/// quadrature_moment with an explicit weight Phi(t/T) under the integral.
pub fn weighted_quadrature_moment(
    grid: &CriticalLineGrid,
    which: Integrand,
    weight: SmoothWeight,
) -> Result<QuadratureValue> {
    check_integrand(grid, which)?;
    let n = grid.len();
    if n < 5 {
        return Err(Error::Config(format!("grid with {n} points is too short for quadrature")));
    }
    let samples: Vec<f64> = (0..n)
        .map(|idx| {
            let phi = weight.value(grid.point(idx) / grid.t_start);
            integrand_sample(grid, which, idx) * phi
        })
        .collect();
    let fine = trapezoid_mean(&samples);
    let coarse_samples: Vec<f64> = samples.iter().step_by(2).copied().collect();
    let coarse = trapezoid_mean(&coarse_samples);
    let scale = fine.abs().max(1e-300);
    let rel_estimate = (fine - coarse).abs() / (3.0 * scale);
    Ok(QuadratureValue {
        value: fine,
        rel_estimate,
        flagged: rel_estimate > 0.05,
    })
}

/// Measured moment packaged against a prediction.
pub fn moment_report(
    grid: &CriticalLineGrid,
    which: Integrand,
    predicted: f64,
) -> Result<MomentReport> {
    let q = quadrature_moment(grid, which)?;
    Ok(MomentReport {
        measured: q.value,
        predicted,
        ratio: q.value / predicted,
        t_start: grid.t_start,
        spacing: grid.spacing,
        n_points: grid.len(),
        rel_estimate: q.rel_estimate,
        flagged: q.flagged,
    })
}

/// Main form of the full-product moment: prod over window primes of
/// (1 + |r(p)|^2 + 2 Re(r(p) conj(a(p))) / sqrt(p)), the asymptotic
/// correction factors set to 1.
pub fn lower_bound_product(res: &Resonator) -> f64 {
    let mut log_acc = 0.0f64;
    for wp in res.window() {
        let p = wp.p as f64;
        let f = 1.0 + wp.r.norm_sqr() + 2.0 * (wp.r * wp.a.conj()).re / p.sqrt();
        log_acc += f.ln();
    }
    log_acc.exp()
}

/// Main form of a single-source moment: the cross term carries a_i alone.
pub fn upper_bound_product_single(
    res: &Resonator,
    combined: &CombinedCoefficients,
    i: usize,
) -> Result<f64> {
    if i >= combined.m() {
        return Err(Error::Input(format!("source index {i} out of range (m = {})", combined.m())));
    }
    let src = combined.source(i);
    let mut log_acc = 0.0f64;
    for wp in res.window() {
        let p = wp.p as f64;
        let a_i = src.a_p(wp.p);
        let f = 1.0 + wp.r.norm_sqr() + 2.0 * (wp.r * a_i.conj()).re / p.sqrt();
        log_acc += f.ln();
    }
    Ok(log_acc.exp())
}

/// Central-point diagonal of the twisted second moment of a degree-2 source:
///   sum_{h,k in support} r(h) conj(r(k)) (h,k) / sqrt(hk)
///     * prod_{p | hk/(h,k)^2} lambda(p)(1 - 1/p)(1 - p^{-2})^{-1}
/// which factors over the window into
///   prod_p (1 + |r(p)|^2 + 2 Re(r(p)) lambda(p)(1-1/p)(1-p^{-2})^{-1}/sqrt(p)).
/// The local factor is kept exact; nothing is dropped.
pub fn gl2_diagonal_product(res: &Resonator, f: &CoefficientSource) -> Result<f64> {
    if f.degree() != 2 {
        return Err(Error::Input(format!(
            "diagonal product needs a degree-2 source, got degree {}",
            f.degree()
        )));
    }
    let mut log_acc = 0.0f64;
    for wp in res.window() {
        let p = wp.p as f64;
        let lam = f.a_p(wp.p).re;
        let z = lam * (1.0 - 1.0 / p) / (1.0 - 1.0 / (p * p));
        let fac = 1.0 + wp.r.norm_sqr() + 2.0 * wp.r.re * z / p.sqrt();
        log_acc += fac.ln();
    }
    Ok(log_acc.exp())
}

/// V = product moment / (2 sum of the single-excluded moments).
pub fn compute_v(product_moment: f64, excluded_moments: &[f64]) -> Result<f64> {
    if excluded_moments.is_empty() {
        return Err(Error::Input("no excluded moments supplied".into()));
    }
    if product_moment < 0.0 || excluded_moments.iter().any(|&x| x < 0.0) {
        return Err(Error::Input("moments of |.|^2 integrands must be nonnegative".into()));
    }
    let denom = 2.0 * pairwise_sum(excluded_moments);
    if denom <= 0.0 {
        return Err(Error::Input("degenerate input: excluded moments sum to zero".into()));
    }
    Ok(product_moment / denom)
}

/// prod x_j - v sum_i prod_{j != i} x_j. For nonnegative x and v > 0,
/// positivity forces min x_j > v: if some x_k <= v then
/// prod x = x_k prod_{j != k} <= v prod_{j != k} <= v sum_i prod_{j != i}.
pub fn detection_statistic(xs: &[f64], v: f64) -> f64 {
    let prod: f64 = xs.iter().product();
    let excl_sum: f64 = (0..xs.len())
        .map(|i| {
            xs.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &x)| x)
                .product::<f64>()
        })
        .sum();
    prod - v * excl_sum
}

/// One grid point that passes the detection inequality.
#[derive(Clone, Copy, Debug)]
pub struct Detection {
    pub index: usize,
    pub t: f64,
    pub statistic: f64,
    /// min_j |L_j|^2 at the point; > v at every detection by construction
    pub min_sq: f64,
}

/// All grid points where the inequality holds. At each returned point the
/// implied bound min_j |L_j|^2 > v is re-checked rather than assumed.
pub fn detect_simultaneous(grid: &CriticalLineGrid, v: f64) -> Result<Vec<Detection>> {
    if !(v > 0.0) {
        return Err(Error::Config(format!("detection threshold must be positive, got {v}")));
    }
    if grid.source_values.is_empty() {
        return Err(Error::Input("detection needs at least one source on the grid".into()));
    }
    let mut out = Vec::new();
    let m = grid.source_values.len();
    let mut xs = Vec::with_capacity(m);
    for idx in 0..grid.len() {
        xs.clear();
        xs.extend(grid.source_values.iter().map(|vals| vals[idx].norm_sqr()));
        let stat = detection_statistic(&xs, v);
        if stat > 0.0 {
            let min_sq = xs.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(
                min_sq > v,
                "detection algebra violated at t = {}: min {min_sq} <= {v}",
                grid.point(idx)
            );
            out.push(Detection { index: idx, t: grid.point(idx), statistic: stat, min_sq });
        }
    }
    Ok(out)
}

/// Main-form prediction for the threshold: exp(2 sqrt(log X / (m loglog X))).
pub fn predicted_threshold(m: usize, x: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Config("threshold needs at least one source".into()));
    }
    if !(x >= 16.0) {
        return Err(Error::Config(format!("threshold formula needs X >= 16, got {x}")));
    }
    Ok((2.0 * (x.ln() / (m as f64 * x.ln().ln())).sqrt()).exp())
}

/// Which exponent constant is being asked for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExponentSetup {
    /// both sources degree 1 (zeta or Dirichlet), min over the pair
    DirichletPair,
    /// the product L1 L2 instead of the min, for comparison
    ProductComparison,
    /// at least one degree-2 source; theta = progress toward the local bound
    WithGl2 { theta: f64 },
    /// twist-family setting, min over the pair, generic forms
    TwistFamilyMin,
    /// twist-family setting, product version
    TwistFamilyProduct,
}

#[derive(Clone, Debug)]
pub struct ExponentReport {
    pub c_main: f64,
    /// second derivation when the two available routes disagree
    pub c_alt: Option<f64>,
    pub discrepancy: bool,
    pub note: String,
}

/// The constant c in exp(c sqrt(log T / loglog T)) for each setup. The
/// degree-2 case carries two derivations that do not agree: the stated
/// remark gives sqrt((1-2 theta)/12), while the support-range route gives
/// sqrt((1-2 theta)/(12 + 4 theta)). Both are reported, neither is guessed.
pub fn predicted_exponent(setup: ExponentSetup) -> Result<ExponentReport> {
    let report = match setup {
        ExponentSetup::DirichletPair => ExponentReport {
            c_main: (17.0f64 / 66.0).sqrt(),
            c_alt: None,
            discrepancy: false,
            note: String::from("min of two degree-1 L-functions on the critical line"),
        },
        ExponentSetup::ProductComparison => ExponentReport {
            c_main: 2.0f64.sqrt(),
            c_alt: None,
            discrepancy: false,
            note: String::from("product of the pair, for comparison with the min"),
        },
        ExponentSetup::WithGl2 { theta } => {
            if !(0.0..0.5).contains(&theta) {
                return Err(Error::Config(format!("theta must lie in [0, 1/2), got {theta}")));
            }
            ExponentReport {
                c_main: ((1.0 - 2.0 * theta) / 12.0).sqrt(),
                c_alt: Some(((1.0 - 2.0 * theta) / (12.0 + 4.0 * theta)).sqrt()),
                discrepancy: true,
                note: String::from(
                    "two derivations disagree: the stated constant sqrt((1-2t)/12) vs the \
                     support-range bound sqrt((1-2t)/(12+4t)); both reported",
                ),
            }
        }
        ExponentSetup::TwistFamilyMin => ExponentReport {
            c_main: 1.0 / (12.0 * 10.0f64.sqrt()),
            c_alt: None,
            discrepancy: false,
            note: String::from("generic twist family, min over the pair"),
        },
        ExponentSetup::TwistFamilyProduct => ExponentReport {
            c_main: 1.0 / (6.0 * 10.0f64.sqrt()),
            c_alt: None,
            discrepancy: false,
            note: String::from("generic twist family, product version"),
        },
    };
    Ok(report)
}
