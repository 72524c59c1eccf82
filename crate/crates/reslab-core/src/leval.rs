//! Error-controlled evaluation of L(1/2 + it) for the sources in scope.
//!
//! Three evaluation paths share this module:
//!  * Euler-Maclaurin for zeta and Hurwitz zeta (hence Dirichlet L by the
//!    q^{-s} sum over residue classes);
//!  * a contour-smoothed approximate functional equation for degree-2
//!    holomorphic forms, with an exact incomplete-gamma fast path at t = 0;
//!  * plain smoothed coefficient sums for O(1)-band cross-checks.
//!
//! Grid fills use phase rotors that advance point to point and resynchronize
//! on fixed block boundaries, so a partitioned fill reproduces the serial
//! fill bit for bit as long as partitions start on block boundaries.

use crate::arith::DirichletCharacter;
use crate::coeffs::CoefficientSource;
use crate::resonator::Resonator;
use crate::special::{self, BERNOULLI_EVEN};
use crate::util::CompensatedSum;
use crate::{C64, Error, Result};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
// float intrinsics route through the trait only when std is off
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Correction depth of the production Euler-Maclaurin path.
const EM_ORDER: usize = 8;

/// Grid rotors are recomputed exactly every RESYNC_BLOCK points. Parallel
/// fills must split on multiples of this to stay bit-identical with the
/// serial fill.
pub const RESYNC_BLOCK: usize = 1024;

/// Smoothing parameters for the coefficient-sum representation
/// sum a(n) n^{-1/2-it} e^{-n/Y}.
#[derive(Clone, Copy, Debug)]
pub struct SmoothedSumParams {
    pub y: f64,
    /// degree of the product L-function whose coefficients are summed
    pub d_l: u32,
    /// truncation length, 3 Y log Y
    pub n_t: u64,
}

impl SmoothedSumParams {
    pub fn new(y: f64, d_l: u32) -> Result<Self> {
        if !(y >= 2.0) {
            return Err(Error::Config(format!("smoothing length Y must be >= 2, got {y}")));
        }
        if d_l == 0 {
            return Err(Error::Config("product degree must be >= 1".into()));
        }
        let n_t = (3.0 * y * y.ln()).ceil();
        debug_assert!(n_t >= y, "truncation shorter than smoothing length");
        Ok(SmoothedSumParams { y, d_l, n_t: n_t as u64 })
    }
}

// ---- Euler-Maclaurin core ------------------------------------------------

/// log |s (s+1) ... (s+j-1)| at s = 1/2 + it.
fn log_abs_poch_half(t: f64, j: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..j {
        let re = 0.5 + i as f64;
        acc += 0.5 * (re * re + t * t).ln();
    }
    acc
}

/// Analytic remainder bound of the K-term correction, in natural log.
/// Standard tail-comparison bound: |R_K| <= |first omitted term| * |s+2K+1| / (sigma+2K+1).
fn em_log_remainder(t_abs: f64, a: f64, n: usize, k: usize) -> f64 {
    let b = BERNOULLI_EVEN[k]; // B_{2K+2} with k = K (0-indexed table holds B_2 at 0)
    let mut log_fact = 0.0;
    for i in 2..=(2 * k + 2) {
        log_fact += (i as f64).ln();
    }
    let log_term = b.abs().ln() - log_fact + log_abs_poch_half(t_abs, 2 * k + 1)
        - (0.5 + 2.0 * k as f64 + 1.0) * (n as f64 + a).ln();
    let re = 0.5 + 2.0 * k as f64 + 1.0;
    let ratio = ((re * re + t_abs * t_abs).sqrt() / re).ln();
    log_term + ratio
}

/// Smallest term count whose remainder bound meets the target at |t| <= t_abs.
/// The bound is monotone increasing in |t|, so one choice covers a grid.
fn em_pick_n(t_abs: f64, a: f64, eps: f64) -> Result<usize> {
    let target = (eps * 0.25).ln();
    let mut n = (24.0_f64).max(0.35 * (t_abs + 10.0)).ceil() as usize;
    loop {
        if em_log_remainder(t_abs, a, n, EM_ORDER) <= target {
            return Ok(n);
        }
        n = n + n / 4 + 8;
        if n > (1usize << 31) {
            return Err(Error::Config(format!(
                "Euler-Maclaurin cannot reach eps = {eps:e} at |t| = {t_abs}"
            )));
        }
    }
}

/// Tail corrections past the main sum: with u = N + a and s = 1/2 + it,
/// u^{1-s}/(s-1) + u^{-s}/2 + sum_k B_{2k}/(2k)! poch(s, 2k-1) u^{-s-2k+1}.
fn em_corrections(t: f64, a: f64, n: usize) -> C64 {
    let s = C64::new(0.5, t);
    let u = n as f64 + a;
    let ln_u = u.ln();
    let u_pow_ms = (-s * ln_u).exp(); // u^{-s}
    let mut acc = u_pow_ms * u / (s - 1.0) + u_pow_ms * 0.5;
    // iterate B_{2k}/(2k)! poch(s,2k-1) u^{-s-2k+1}
    let inv_u2 = 1.0 / (u * u);
    let mut poch = s; // poch(s,1)
    let mut fact = 2.0f64; // (2k)!
    let mut u_fac = u_pow_ms / u; // u^{-s-1}
    for k in 1..=EM_ORDER {
        acc += BERNOULLI_EVEN[k - 1] / fact * poch * u_fac;
        if k < EM_ORDER {
            // advance: poch(s, 2k+1) = poch(s, 2k-1) (s+2k-1)(s+2k)
            let j = 2.0 * k as f64;
            poch = poch * (s + (j - 1.0)) * (s + j);
            fact *= (j + 1.0) * (j + 2.0);
            u_fac *= inv_u2;
        }
    }
    acc
}

/// Hurwitz zeta at s = 1/2 + it by Euler-Maclaurin with a supplied term
/// count; returns the value and a total error bound (analytic remainder
/// plus a rounding allowance).
fn em_eval(t: f64, a: f64, n: usize) -> (C64, f64) {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for k in 0..n {
        let x = k as f64 + a;
        let w = 1.0 / x.sqrt();
        let phase = -t * x.ln();
        let (sn, cs) = phase.sin_cos();
        re.add(w * cs);
        im.add(w * sn);
    }
    let mut val = C64::new(re.value(), im.value());
    val += em_corrections(t, a, n);
    let analytic = em_log_remainder(t.abs(), a, n, EM_ORDER).exp();
    let slack = 2.0 * (n as f64 + a).sqrt() * 1e-16 + 1e-15;
    (val, analytic + slack)
}

/// Riemann zeta on the critical line, error <= eps.
pub fn zeta_half_line(t: f64, eps: f64) -> Result<C64> {
    hurwitz_half_line(t, 1.0, eps)
}

/// Hurwitz zeta(1/2 + it, a) for 0 < a <= 1, error <= eps.
pub fn hurwitz_half_line(t: f64, a: f64, eps: f64) -> Result<C64> {
    if !(eps > 0.0) {
        return Err(Error::Config("eps must be positive".into()));
    }
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Config(format!("Hurwitz parameter must be in (0,1], got {a}")));
    }
    if !(t.abs() <= 1e8) {
        return Err(Error::Config(format!("|t| = {} beyond the supported range 1e8", t.abs())));
    }
    let n = em_pick_n(t.abs(), a, eps)?;
    let (val, bound) = em_eval(t, a, n);
    if bound > eps {
        return Err(Error::Config(format!(
            "requested eps = {eps:e} below achievable bound {bound:e}"
        )));
    }
    Ok(val)
}

/// Dirichlet L(1/2 + it, chi) for primitive chi mod q <= 1e5, via
/// q^{-s} sum_a chi(a) zeta(s, a/q).
pub fn dirichlet_half_line(chi: &DirichletCharacter, t: f64, eps: f64) -> Result<C64> {
    let q = chi.modulus();
    if q == 1 {
        return zeta_half_line(t, eps);
    }
    if !chi.is_primitive() {
        return Err(Error::Config(format!(
            "character mod {q} (index {}) is not primitive",
            chi.index()
        )));
    }
    if q > 100_000 {
        return Err(Error::Resource {
            what: "Dirichlet modulus".into(),
            needed: q,
            cap: 100_000,
        });
    }
    let phi = chi.group_phi();
    let eps_each = eps * (q as f64).sqrt() / phi as f64;
    let n = em_pick_n(t.abs(), 1.0 / q as f64, eps_each)?;
    let mut acc = C64::new(0.0, 0.0);
    for r in 1..q {
        let c = chi.value(r);
        if c.norm_sqr() == 0.0 {
            continue;
        }
        let (v, _) = em_eval(t, r as f64 / q as f64, n);
        acc += c * v;
    }
    // q^{-s}
    let s = C64::new(0.5, t);
    Ok(acc * (-s * (q as f64).ln()).exp())
}

/// Truncated smoothed coefficient sum sum_{n <= N_t} a(n) n^{-1/2-it} e^{-n/Y}
/// and a crude bound on the dropped tail. coeffs[n] indexes coefficient n
/// (entry 0 unused); must extend past params.n_t.
pub fn smoothed_product_sum(
    coeffs: &[C64],
    t: f64,
    params: &SmoothedSumParams,
) -> Result<(C64, f64)> {
    let n_t = params.n_t as usize;
    if coeffs.len() <= n_t {
        return Err(Error::Resource {
            what: "coefficients for the smoothed sum".into(),
            needed: params.n_t + 1,
            cap: coeffs.len() as u64,
        });
    }
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for n in 1..=n_t {
        let x = n as f64;
        let damp = (-x / params.y).exp() / x.sqrt();
        if damp == 0.0 {
            break;
        }
        let phase = -t * x.ln();
        let (sn, cs) = phase.sin_cos();
        let c = coeffs[n];
        let (wr, wi) = (damp * cs, damp * sn);
        re.add(c.re * wr - c.im * wi);
        im.add(c.re * wi + c.im * wr);
    }
    // Tail majorant: divisor-type coefficients grow slower than n^{0.2};
    // integral comparison gives roughly Y (N_t)^{0.2} e^{-N_t / Y}.
    let tail = params.y * (params.n_t as f64).powf(0.2) * (-(params.n_t as f64) / params.y).exp();
    Ok((C64::new(re.value(), im.value()), tail))
}

// ---- GL(2) approximate functional equation -------------------------------

/// Contour placement for the smoothed AFE weights.
const AFE_C: f64 = 1.25;
const AFE_A: f64 = 0.25; // G(w) = exp(A w^2)
const AFE_H: f64 = 0.25;
const AFE_VMAX: f64 = 16.0;

/// Central value by the exact sharp-cutoff functional equation,
/// valid at t = 0 where the incomplete-gamma weights are elementary:
/// L(1/2) = (1 + i^kappa) sum lambda(n) n^{-1/2} Q(kappa/2, 2 pi n).
fn gl2_central_exact(src: &CoefficientSource, eps: f64) -> Result<C64> {
    let form = src.holo_form().unwrap();
    let kappa = form.weight();
    if kappa % 4 == 2 {
        // root number -1: the central value vanishes identically
        return Ok(C64::new(0.0, 0.0));
    }
    let half_k = kappa / 2;
    // terms die like e^{-2 pi n} n^{kappa/2 - 1}
    let mut n_max = 8usize;
    while special::upper_gamma_ratio_int(half_k, core::f64::consts::TAU * n_max as f64)?
        > eps * 1e-3
    {
        n_max += 4;
    }
    ensure_prime_coverage(src, n_max as u64)?;
    let lam = src.series_coefficients(n_max)?;
    let mut acc = CompensatedSum::new();
    for n in 1..=n_max {
        let q = special::upper_gamma_ratio_int(half_k, core::f64::consts::TAU * n as f64)?;
        acc.add(lam[n].re * q / (n as f64).sqrt());
    }
    Ok(C64::new(2.0 * acc.value(), 0.0))
}

fn ensure_prime_coverage(src: &CoefficientSource, n_max: u64) -> Result<()> {
    let form = src.holo_form().unwrap();
    if form.max_tabulated_prime() < largest_prime_needed(n_max) {
        return Err(Error::Input(format!(
            "coefficient gap: evaluation needs primes to {} but the table stops at {}",
            largest_prime_needed(n_max),
            form.max_tabulated_prime()
        )));
    }
    Ok(())
}

fn largest_prime_needed(n_max: u64) -> u64 {
    // series_coefficients touches every prime <= n_max
    n_max
}

/// Node weights G(w)/w * Gamma(arg + w)/Gamma(arg) * h/(2 pi) along the
/// contour w = c + iv, v = -vmax..vmax step h.
fn afe_contour_nodes(arg: C64) -> Result<Vec<(f64, C64)>> {
    let lg0 = special::log_gamma(arg)?;
    let steps = (2.0 * AFE_VMAX / AFE_H).round() as i64;
    let mut out = Vec::with_capacity(steps as usize + 1);
    for k in 0..=steps {
        let v = -AFE_VMAX + k as f64 * AFE_H;
        let w = C64::new(AFE_C, v);
        let g = (AFE_A * w * w).exp();
        let lg = special::log_gamma(arg + w)?;
        let node = g / w * (lg - lg0).exp() * (AFE_H / core::f64::consts::TAU);
        out.push((v, node));
    }
    Ok(out)
}

/// V(x) = sum over nodes of node * x^{-(c+iv)}; x = 2 pi n.
fn afe_weight(nodes: &[(f64, C64)], ln_x: f64) -> C64 {
    let scale = (-AFE_C * ln_x).exp();
    let mut acc = C64::new(0.0, 0.0);
    for &(v, node) in nodes {
        let phase = -v * ln_x;
        let (sn, cs) = phase.sin_cos();
        acc += node * C64::new(cs, sn);
    }
    acc * scale
}

/// L(1/2 + it, f) for a level-1 holomorphic eigenform source, |t| <= 1e4.
pub fn gl2_half_line(src: &CoefficientSource, t: f64, eps: f64) -> Result<C64> {
    let form = src
        .holo_form()
        .ok_or_else(|| Error::Input("gl2 evaluation needs a holomorphic form source".into()))?;
    if !(eps > 0.0) {
        return Err(Error::Config("eps must be positive".into()));
    }
    if !(t.abs() <= 1e4) {
        return Err(Error::Config(format!("|t| = {} beyond the supported range 1e4", t.abs())));
    }
    if t == 0.0 {
        return gl2_central_exact(src, eps);
    }
    let kappa = form.weight();
    let a1 = C64::new(kappa as f64 / 2.0, t);
    let a2 = a1.conj();
    let nodes1 = afe_contour_nodes(a1)?;
    let nodes2 = afe_contour_nodes(a2)?;
    // epsilon(s) = i^kappa (2 pi)^{2it} Gamma(a2)/Gamma(a1)
    let i_pow = match kappa % 4 {
        0 => C64::new(1.0, 0.0),
        _ => C64::new(-1.0, 0.0), // kappa = 2 mod 4 (weights are even)
    };
    let lg1 = special::log_gamma(a1)?;
    let lg2 = special::log_gamma(a2)?;
    let eps_s = i_pow
        * (C64::new(0.0, 2.0 * t) * core::f64::consts::TAU.ln()).exp()
        * (lg2 - lg1).exp();
    debug_assert!((eps_s.norm() - 1.0).abs() < 1e-9, "root number off the unit circle");
    // truncation: weights localize near x ~ |a1|, then die like a Gaussian
    // in log x with scale set by A
    let margin = 2.0 * (AFE_A * (eps.min(1e-6) * 1e-2).recip().ln()).sqrt();
    let n_star = a1.norm() / core::f64::consts::TAU;
    let n_max = ((n_star * margin.exp()).ceil() as usize).max(32) + 32;
    ensure_prime_coverage(src, n_max as u64)?;
    let lam = src.series_coefficients(n_max)?;
    let mut acc1 = C64::new(0.0, 0.0);
    let mut acc2 = C64::new(0.0, 0.0);
    for n in 1..=n_max {
        let x = n as f64;
        let c = lam[n].re / x.sqrt();
        if c == 0.0 {
            continue;
        }
        let ln_x = core::f64::consts::TAU.ln() + x.ln();
        let v1 = afe_weight(&nodes1, ln_x);
        let v2 = afe_weight(&nodes2, ln_x);
        let phase = -t * x.ln();
        let (sn, cs) = phase.sin_cos();
        let rot = C64::new(cs, sn); // n^{-it}
        acc1 += c * v1 * rot;
        acc2 += c * v2 * rot.conj();
    }
    Ok(acc1 + eps_s * acc2)
}

// ---- grid machinery ------------------------------------------------------

/// Samples of every source and of the resonator polynomial on a uniform
/// t-grid over [T, 2T]. r_values is empty when no resonator was attached
/// (R treated as the constant 1 downstream).
#[derive(Clone, Debug)]
pub struct CriticalLineGrid {
    pub t_start: f64,
    pub spacing: f64,
    pub n_points: usize,
    pub source_values: Vec<Vec<C64>>,
    pub r_values: Vec<C64>,
    pub err_bound: f64,
}

impl CriticalLineGrid {
    pub fn point(&self, i: usize) -> f64 {
        self.t_start + self.spacing * i as f64
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    /// Default spacing 0.05 / log T resolves every oscillation of the
    /// polynomials in play; desk runs usually override it coarser.
    pub fn default_spacing(t_start: f64) -> f64 {
        0.05 / t_start.ln()
    }

    /// Serial build over [T, 2T].
    pub fn build(
        sources: &[CoefficientSource],
        resonator: Option<&Resonator>,
        t_start: f64,
        spacing: f64,
        eps: f64,
    ) -> Result<Self> {
        if !(t_start > 1.0) || !(spacing > 0.0) {
            return Err(Error::Config("grid needs T > 1 and positive spacing".into()));
        }
        let n_points = (t_start / spacing).floor() as usize + 1;
        let mut source_values = Vec::with_capacity(sources.len());
        let mut err_bound = 0.0f64;
        for src in sources {
            let (vals, eb) = fill_source_values(src, t_start, spacing, 0..n_points, n_points, eps)?;
            source_values.push(vals);
            err_bound = err_bound.max(eb);
        }
        let r_values = match resonator {
            Some(r) => r.eval_grid(t_start, spacing, n_points),
            None => Vec::new(),
        };
        Ok(CriticalLineGrid {
            t_start,
            spacing,
            n_points,
            source_values,
            r_values,
            err_bound,
        })
    }
}

/// Fill one source's values on grid indices `range` (t = t_start + i*spacing)
/// out of a virtual grid of n_total points. Series lengths derive from
/// n_total, not from the chunk, so a partition into ranges starting on
/// multiples of RESYNC_BLOCK reproduces the full serial fill bit for bit;
/// the building block for partitioned parallel fills.
pub fn fill_source_values(
    src: &CoefficientSource,
    t_start: f64,
    spacing: f64,
    range: core::ops::Range<usize>,
    n_total: usize,
    eps: f64,
) -> Result<(Vec<C64>, f64)> {
    if n_total == 0 || range.end > n_total {
        return Err(Error::Config(format!(
            "grid chunk {}..{} exceeds the declared {n_total} points",
            range.start, range.end
        )));
    }
    if let Some(chi) = src.dirichlet_character() {
        return dirichlet_grid_fill(chi, t_start, spacing, range, n_total, eps);
    }
    if src.holo_form().is_some() {
        // no rotor path: the AFE is evaluated pointwise
        let mut out = Vec::with_capacity(range.len());
        for i in range {
            out.push(gl2_half_line(src, t_start + spacing * i as f64, eps)?);
        }
        return Ok((out, eps));
    }
    if src.is_zeta() {
        return zeta_like_grid_fill(
            &[(1.0, C64::new(1.0, 0.0))],
            1,
            t_start,
            spacing,
            range,
            n_total,
            eps,
        );
    }
    Err(Error::Input(format!(
        "source {:?} has no analytic evaluator (tables carry coefficients only)",
        src.label()
    )))
}

/// Shared rotor fill for zeta (single Hurwitz component a=1, q=1) and
/// Dirichlet L (phi(q) components a = r/q scaled by q^{-s} chi(r)).
/// components: (a, chi_weight). Values are
/// q^{-s} sum_components chi_weight * zeta(s, a).
fn zeta_like_grid_fill(
    components: &[(f64, C64)],
    q: u64,
    t_start: f64,
    spacing: f64,
    range: core::ops::Range<usize>,
    n_total: usize,
    eps: f64,
) -> Result<(Vec<C64>, f64)> {
    let n_pts = range.len();
    // term count from the whole grid, so every chunk sums the same series
    let t_max = t_start + spacing * (n_total - 1) as f64;
    let eps_each = eps * 0.9 * (q as f64).sqrt() / components.len() as f64;
    let a_min = components.iter().fold(1.0f64, |m, &(a, _)| m.min(a));
    let n_terms = em_pick_n(t_max, a_min, eps_each)?;
    let mut values = vec![C64::new(0.0, 0.0); n_pts];

    // term tile that stays resident in cache while streaming the points
    const TILE: usize = 2048;
    let mut w = [0.0f64; TILE]; // (k+a)^{-1/2} * |chi|, folded weight
    let mut ln_x = [0.0f64; TILE];
    let mut rot = [C64::new(0.0, 0.0); TILE];
    let mut step = [C64::new(0.0, 0.0); TILE];

    for &(a, cw) in components {
        let mut base = 0usize;
        while base < n_terms {
            let m = TILE.min(n_terms - base);
            for j in 0..m {
                let x = (base + j) as f64 + a;
                w[j] = 1.0 / x.sqrt();
                ln_x[j] = x.ln();
                let (sn, cs) = (-spacing * ln_x[j]).sin_cos();
                step[j] = C64::new(cs, sn);
            }
            let mut idx = range.start;
            while idx < range.end {
                // resynchronize rotors on block boundaries (and at the start)
                if idx == range.start || idx % RESYNC_BLOCK == 0 {
                    let t = t_start + spacing * idx as f64;
                    for j in 0..m {
                        let (sn, cs) = (-t * ln_x[j]).sin_cos();
                        rot[j] = C64::new(cs, sn);
                    }
                }
                let block_end = range
                    .end
                    .min((idx / RESYNC_BLOCK + 1) * RESYNC_BLOCK);
                for g in idx..block_end {
                    let mut acc_re = 0.0f64;
                    let mut acc_im = 0.0f64;
                    for j in 0..m {
                        acc_re += w[j] * rot[j].re;
                        acc_im += w[j] * rot[j].im;
                        rot[j] = rot[j] * step[j];
                    }
                    let v = cw * C64::new(acc_re, acc_im);
                    values[g - range.start] += v;
                }
                idx = block_end;
            }
            base += m;
        }
    }

    // per-point corrections and q^{-s} normalization
    let ln_q = (q as f64).ln();
    for (off, val) in values.iter_mut().enumerate() {
        let t = t_start + spacing * (range.start + off) as f64;
        let mut corr = C64::new(0.0, 0.0);
        for &(a, cw) in components {
            corr += cw * em_corrections(t, a, n_terms);
        }
        let s = C64::new(0.5, t);
        *val = (*val + corr) * (-s * ln_q).exp();
    }

    let analytic = components.len() as f64 / (q as f64).sqrt()
        * em_log_remainder(t_max, a_min, n_terms, EM_ORDER).exp();
    let rounding = 2.0 * (n_terms as f64).sqrt() * 1e-16 * components.len() as f64;
    let rotor_drift = 2.0 * (n_terms as f64).sqrt() * RESYNC_BLOCK as f64 * 3e-16;
    Ok((values, analytic + rounding + rotor_drift))
}

fn dirichlet_grid_fill(
    chi: &DirichletCharacter,
    t_start: f64,
    spacing: f64,
    range: core::ops::Range<usize>,
    n_total: usize,
    eps: f64,
) -> Result<(Vec<C64>, f64)> {
    let q = chi.modulus();
    if q == 1 {
        return zeta_like_grid_fill(
            &[(1.0, C64::new(1.0, 0.0))],
            1,
            t_start,
            spacing,
            range,
            n_total,
            eps,
        );
    }
    if !chi.is_primitive() {
        return Err(Error::Config(format!(
            "character mod {q} (index {}) is not primitive",
            chi.index()
        )));
    }
    let mut components = Vec::new();
    for r in 1..q {
        let c = chi.value(r);
        if c.norm_sqr() > 0.0 {
            components.push((r as f64 / q as f64, c));
        }
    }
    zeta_like_grid_fill(&components, q, t_start, spacing, range, n_total, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::characters_mod;
    use crate::util::SplitMix64;

    fn assert_close(got: C64, want: C64, tol: f64, what: &str) {
        assert!(
            (got - want).norm() <= tol,
            "{what}: got {got}, want {want} (diff {:e})",
            (got - want).norm()
        );
    }

    #[test]
    fn zeta_reference_values() {
        // Reference values computed with 50-digit arithmetic.
        let cases = [
            (0.0, C64::new(-1.4603545088095868, 0.0)),
            (1.0, C64::new(0.14393642707718907, -0.72209974353167306)),
            (100.0, C64::new(2.6926198856813241, -0.020386029602598162)),
            (1000.0, C64::new(0.35633436719439606, 0.93199783123299367)),
            (100000.5, C64::new(2.3797463019282133, -3.9763247240028094)),
        ];
        for (t, want) in cases {
            let got = zeta_half_line(t, 1e-10).unwrap();
            assert_close(got, want, 1e-9, "zeta(1/2 + it)");
        }
    }

    #[test]
    fn zeta_vanishes_at_first_zero() {
        let z = zeta_half_line(14.134725141734695, 1e-10).unwrap();
        assert!(z.norm() < 1e-6, "|zeta| at the first zero: {}", z.norm());
    }

    #[test]
    fn zeta_conjugate_symmetry() {
        for &t in &[0.3, 7.7, 55.0, 1234.5] {
            let plus = zeta_half_line(t, 1e-11).unwrap();
            let minus = zeta_half_line(-t, 1e-11).unwrap();
            assert!((minus - plus.conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn hurwitz_reference_values() {
        // Reference values computed with 50-digit arithmetic.
        let cases = [
            (0.0, 0.5, C64::new(-0.60489864342163037, 0.0)),
            (10.0, 0.25, C64::new(0.043386611063231386, 0.76808042228325868)),
            (50.0, 1.0 / 3.0, C64::new(-1.1011092506989544, -0.42615686066442969)),
            (0.0, 1.0, C64::new(-1.4603545088095868, 0.0)),
        ];
        for (t, a, want) in cases {
            let got = hurwitz_half_line(t, a, 1e-10).unwrap();
            assert_close(got, want, 1e-9, "hurwitz");
        }
        assert!(hurwitz_half_line(1.0, 0.0, 1e-8).is_err());
        assert!(hurwitz_half_line(1.0, 1.5, 1e-8).is_err());
    }

    #[test]
    fn dirichlet_reference_values() {
        // beta(1/2): odd character mod 4
        let chi4 = characters_mod(4)
            .unwrap()
            .into_iter()
            .find(|c| !c.is_principal())
            .unwrap();
        let got = dirichlet_half_line(&chi4, 0.0, 1e-10).unwrap();
        assert_close(got, C64::new(0.66769145718960917, 0.0), 1e-9, "beta(1/2)");

        // quadratic character mod 7 at t = 0 and t = 5
        let chi7 = characters_mod(7)
            .unwrap()
            .into_iter()
            .find(|c| c.is_real() && !c.is_principal())
            .unwrap();
        let got = dirichlet_half_line(&chi7, 0.0, 1e-10).unwrap();
        assert_close(got, C64::new(1.1465856669037083, 0.0), 1e-9, "L(1/2, chi7)");
        let got = dirichlet_half_line(&chi7, 5.0, 1e-10).unwrap();
        assert_close(
            got,
            C64::new(0.34457106916985365, 0.48290246843752410),
            1e-9,
            "L(1/2+5i, chi7)",
        );
    }

    #[test]
    fn dirichlet_rejects_imprimitive() {
        let chars = characters_mod(12).unwrap();
        // mod 12 has exactly one primitive character; pick a non-principal
        // imprimitive one
        let bad = chars
            .iter()
            .find(|c| !c.is_principal() && !c.is_primitive())
            .unwrap();
        assert!(dirichlet_half_line(bad, 1.0, 1e-8).is_err());
    }

    #[test]
    fn dirichlet_convexity_sanity_cap() {
        let mut rng = SplitMix64::new(0xd1a1);
        for q in [3u64, 5, 7, 11, 13, 17, 19] {
            let chars = characters_mod(q).unwrap();
            for chi in chars.iter().filter(|c| c.is_primitive()).take(2) {
                let t = rng.uniform(-50.0, 50.0);
                let v = dirichlet_half_line(chi, t, 1e-8).unwrap();
                let cap = (q as f64 * (1.0 + t.abs())).powf(0.35);
                assert!(v.norm() < cap, "|L| = {} vs cap {cap} at q={q}, t={t}", v.norm());
            }
        }
    }

    #[test]
    fn smoothed_sum_tracks_zeta_within_band() {
        let params = SmoothedSumParams::new(1e4, 1).unwrap();
        let n = params.n_t as usize;
        let coeffs = vec![C64::new(1.0, 0.0); n + 1];
        let (s, tail) = smoothed_product_sum(&coeffs, 100.0, &params).unwrap();
        assert!(tail < 1e-6);
        let z = zeta_half_line(100.0, 1e-10).unwrap();
        assert!(
            (s - z).norm() < 0.5,
            "smoothed sum {s} vs zeta {z}: diff {}",
            (s - z).norm()
        );
        // truncation beyond table errors out
        let short = vec![C64::new(1.0, 0.0); 10];
        assert!(smoothed_product_sum(&short, 1.0, &params).is_err());
    }

    #[test]
    fn gl2_central_values() {
        // Reference values computed with 50-digit arithmetic.
        let f12 = CoefficientSource::gl2_holomorphic(12, 256).unwrap();
        let got = gl2_half_line(&f12, 0.0, 1e-10).unwrap();
        assert_close(got, C64::new(0.79212283864603057, 0.0), 1e-9, "L(1/2, w12)");

        let f16 = CoefficientSource::gl2_holomorphic(16, 256).unwrap();
        let got = gl2_half_line(&f16, 0.0, 1e-10).unwrap();
        assert_close(got, C64::new(1.5205616690847287, 0.0), 1e-8, "L(1/2, w16)");

        let f20 = CoefficientSource::gl2_holomorphic(20, 256).unwrap();
        let got = gl2_half_line(&f20, 0.0, 1e-10).unwrap();
        assert_close(got, C64::new(1.9817354054335267, 0.0), 1e-8, "L(1/2, w20)");

        // root number -1 weights: central value is exactly zero
        for w in [18u32, 22, 26] {
            let f = CoefficientSource::gl2_holomorphic(w, 64).unwrap();
            let got = gl2_half_line(&f, 0.0, 1e-10).unwrap();
            assert_eq!(got, C64::new(0.0, 0.0), "weight {w}");
        }
    }

    #[test]
    fn gl2_t_aspect_reference_values() {
        // Reference values computed with 50-digit arithmetic (two independent
        // smoothings agreeing to ~1e-11).
        let f12 = CoefficientSource::gl2_holomorphic(12, 4096).unwrap();
        let got = gl2_half_line(&f12, 5.0, 1e-9).unwrap();
        assert_close(
            got,
            C64::new(1.3666500058745169, 0.13431473862812213),
            5e-8,
            "L(1/2+5i, w12)",
        );
        let got = gl2_half_line(&f12, 50.0, 1e-9).unwrap();
        assert_close(
            got,
            C64::new(1.9763602878293747, 1.9797137077620912),
            5e-7,
            "L(1/2+50i, w12)",
        );
    }

    #[test]
    fn gl2_conjugate_symmetry_and_gap_error() {
        let f12 = CoefficientSource::gl2_holomorphic(12, 2048).unwrap();
        let plus = gl2_half_line(&f12, 7.3, 1e-9).unwrap();
        let minus = gl2_half_line(&f12, -7.3, 1e-9).unwrap();
        assert!((minus - plus.conj()).norm() < 1e-9);

        // table too short for the requested t: explicit gap error
        let small = CoefficientSource::gl2_holomorphic(12, 64).unwrap();
        let err = gl2_half_line(&small, 40.0, 1e-9);
        assert!(err.is_err());
    }

    #[test]
    fn gl2_smoothed_cross_check() {
        // AFE evaluation against the plain smoothed coefficient sum: the two
        // differ by the dual sum, an O(1) quantity in this range.
        let f12 = CoefficientSource::gl2_holomorphic(12, 24_000).unwrap();
        let t = 50.0;
        let y = 1000.0;
        let params = SmoothedSumParams::new(y, 2).unwrap();
        let coeffs = f12.series_coefficients(params.n_t as usize + 1).unwrap();
        let (s, _) = smoothed_product_sum(&coeffs, t, &params).unwrap();
        let l = gl2_half_line(&f12, t, 1e-8).unwrap();
        assert!(
            (s - l).norm() < 2.0,
            "smoothed {s} vs AFE {l}: diff {}",
            (s - l).norm()
        );
    }

    #[test]
    fn grid_matches_pointwise_zeta() {
        let z = CoefficientSource::zeta();
        let t0 = 1000.0;
        let h = 0.37;
        let n = 2500usize;
        let (vals, eb) = fill_source_values(&z, t0, h, 0..n, n, 1e-9).unwrap();
        assert!(eb < 1e-8);
        let mut rng = SplitMix64::new(42);
        for _ in 0..400 {
            let i = rng.below(n as u64) as usize;
            let t = t0 + h * i as f64;
            let want = zeta_half_line(t, 1e-11).unwrap();
            assert!(
                (vals[i] - want).norm() < 1e-8,
                "grid vs pointwise at t = {t}: {:e}",
                (vals[i] - want).norm()
            );
        }
    }

    #[test]
    fn grid_matches_pointwise_dirichlet() {
        let chi = characters_mod(3)
            .unwrap()
            .into_iter()
            .find(|c| !c.is_principal())
            .unwrap();
        let d = CoefficientSource::dirichlet(chi.clone()).unwrap();
        let (vals, _) = fill_source_values(&d, 500.0, 0.21, 0..1500, 1500, 1e-9).unwrap();
        let mut rng = SplitMix64::new(7);
        for _ in 0..200 {
            let i = rng.below(1500) as usize;
            let t = 500.0 + 0.21 * i as f64;
            let want = dirichlet_half_line(&chi, t, 1e-11).unwrap();
            assert!((vals[i] - want).norm() < 1e-8);
        }
    }

    #[test]
    fn chunked_fill_is_bit_identical_on_block_boundaries() {
        let z = CoefficientSource::zeta();
        let n = 3 * RESYNC_BLOCK + 17;
        let (full, _) = fill_source_values(&z, 800.0, 0.11, 0..n, n, 1e-8).unwrap();
        let mut stitched = Vec::new();
        for start in (0..n).step_by(RESYNC_BLOCK) {
            let end = (start + RESYNC_BLOCK).min(n);
            let (part, _) = fill_source_values(&z, 800.0, 0.11, start..end, n, 1e-8).unwrap();
            stitched.extend(part);
        }
        assert_eq!(full.len(), stitched.len());
        for (a, b) in full.iter().zip(stitched.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn grid_build_is_deterministic() {
        let sources = [CoefficientSource::zeta()];
        let g1 = CriticalLineGrid::build(&sources, None, 300.0, 0.5, 1e-8).unwrap();
        let g2 = CriticalLineGrid::build(&sources, None, 300.0, 0.5, 1e-8).unwrap();
        assert_eq!(g1.n_points, g2.n_points);
        assert!((g1.t_start + g1.spacing * (g1.n_points - 1) as f64) <= 2.0 * 300.0 + 1e-9);
        for (a, b) in g1.source_values[0].iter().zip(g2.source_values[0].iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn em_rejects_unreachable_eps() {
        assert!(zeta_half_line(1.0, 1e-18).is_err());
        assert!(zeta_half_line(2e8, 1e-6).is_err());
    }
}
