//! Block decomposition of critical-line prime sums.
//!
//! The upper-bound side of the laboratory majorizes log|L(1/2+it)| by a
//! smoothed prime sum plus a penalty term. That sum is split along a ladder
//! of scales Z_i = exp(e^i (log L)^2) into block polynomials
//!
//! ```text
//! P_{i,j}(t) = sum_{Z_{i-1} < p <= Z_i} b(p) w_j(p) p^{-1/2-it}
//! ```
//!
//! whose exponentials, off a small exceptional set, collapse to truncated
//! Taylor polynomials N_{i,j} of length governed by ell_i. This module
//! builds the ladder, evaluates P and N, measures exceptional sets against
//! their moment-method bounds, and checks the Taylor collapse numerically.

use crate::arith::PrimeTable;
use crate::coeffs::CoefficientSource;
use crate::special;
use crate::util::CompensatedSum;
use crate::{C64, Error, Result};
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
// float intrinsics route through the trait only when std is off
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Hard cap on expansion terms per block table. Omega(n) <= 10 ell_i tables
/// explode combinatorially past this; callers get a Resource error instead.
pub const BLOCK_TERM_CAP: u64 = 10_000_000;

/// Deepest ladder the desk supports.
pub const MAX_LADDER_DEPTH: usize = 60;

/// Scale ladder over [T, 2T]: Z_i, ell_i, r_i, and the depth J.
#[derive(Clone, Debug)]
pub struct HarperLadder {
    t_big: f64,
    script_l: f64,
    c_m: f64,
    eps: f64,
    j_top: usize,
}

impl HarperLadder {
    /// Builds the ladder for height T and resonator scale L. J is the
    /// minimal integer with log Z_J >= 2 c_m sqrt(log T loglog T log3 T).
    pub fn build(t_big: f64, script_l: f64, c_m: f64, eps: f64) -> Result<HarperLadder> {
        if !(t_big >= 1e3) {
            return Err(Error::Config(format!("ladder needs T >= 1e3, got {t_big}")));
        }
        if !(script_l > 1.0) {
            return Err(Error::Config(format!(
                "ladder needs a scale L > 1 so that (log L)^2 > 0, got {script_l}"
            )));
        }
        if !(c_m > 0.0) {
            return Err(Error::Config(format!("majorant constant must be positive, got {c_m}")));
        }
        if !(eps >= 0.0) {
            return Err(Error::Config(format!("length exponent eps must be >= 0, got {eps}")));
        }
        let ln_t = t_big.ln();
        let target = 2.0 * c_m * (ln_t * ln_t.ln() * ln_t.ln().ln()).sqrt();
        let base = script_l.ln() * script_l.ln();
        let mut j = 0usize;
        while (j as f64).exp() * base < target {
            j += 1;
            if j > MAX_LADDER_DEPTH {
                return Err(Error::Config(format!(
                    "ladder depth exceeds {MAX_LADDER_DEPTH}: log Z must reach {target:.4} \
                     but the block base (log L)^2 = {base:.4e}"
                )));
            }
        }
        let ladder = HarperLadder { t_big, script_l, c_m, eps, j_top: j };
        debug_assert!(ladder.length_certificate() <= 0.5);
        Ok(ladder)
    }

    pub fn t_big(&self) -> f64 {
        self.t_big
    }

    pub fn script_l(&self) -> f64 {
        self.script_l
    }

    pub fn c_m(&self) -> f64 {
        self.c_m
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Depth J of the ladder.
    pub fn j_top(&self) -> usize {
        self.j_top
    }

    /// log Z_i = e^i (log L)^2, with the convention Z_{-1} = 1.
    pub fn ln_z(&self, i: isize) -> f64 {
        if i < 0 {
            return 0.0;
        }
        (i as f64).exp() * self.script_l.ln() * self.script_l.ln()
    }

    /// Z_i itself; overflows to infinity for deep blocks, so anything that
    /// compares magnitudes should stay with ln_z.
    pub fn z(&self, i: isize) -> f64 {
        self.ln_z(i).exp()
    }

    /// Taylor truncation scale ell_i = (log T / (100 (log L)^2)) e^{-5i/4}.
    pub fn ell(&self, i: usize) -> f64 {
        self.t_big.ln() / (100.0 * self.script_l.ln() * self.script_l.ln())
            * (-1.25 * i as f64).exp()
    }

    /// Moment length r_i = log T / (e^i (log L)^{2+eps}).
    pub fn r_len(&self, i: usize) -> f64 {
        self.t_big.ln() / ((i as f64).exp() * self.script_l.ln().powf(2.0 + self.eps))
    }

    /// sum_{i <= J} e^{-i/4} / 10, the total-length exponent of the product
    /// of all block polynomials. The geometric series keeps it below 1/2
    /// for every J; asserted on build and re-checked by the acceptance run.
    pub fn length_certificate(&self) -> f64 {
        (0..=self.j_top).map(|i| (-(i as f64) / 4.0).exp() / 10.0).sum()
    }

    /// Moment order for the exceptional-set bound of block i. The measure
    /// bound is valid for any k <= log T/(e^i (log L)^2); block 0 takes that
    /// cap itself, deeper blocks take the shorter r_i. Clamped to >= 1.
    pub fn moment_k(&self, i: usize) -> u32 {
        let cap = self.t_big.ln() / ((i as f64).exp() * self.script_l.ln() * self.script_l.ln());
        let pick = if i == 0 { cap } else { self.r_len(i).min(cap) };
        let k = pick.floor().max(1.0);
        if k > u32::MAX as f64 { u32::MAX } else { k as u32 }
    }
}

/// Smoothing weight w_Z(n) = n^{-1/(2 log Z)} (1 - log n / log Z) for
/// 1 <= n <= Z, zero above Z. Reads the weight's exponent as -1/(2 log Z);
/// the alternative reading -(log Z)/2 collapses every term and is rejected.
pub fn smoothing_weight(n: f64, ln_z: f64) -> f64 {
    debug_assert!(n >= 1.0 && ln_z > 0.0);
    let ln_n = n.ln();
    if ln_n > ln_z {
        return 0.0;
    }
    (-ln_n / (2.0 * ln_z)).exp() * (1.0 - ln_n / ln_z)
}

/// One block prime carrying its weighted coefficient.
struct BlockTerm {
    /// b(p) w_j(p)
    bw: C64,
    ln_p: f64,
    inv_sqrt_p: f64,
}

/// Ladder blocks bound to a coefficient source and a prime table.
pub struct HarperBlocks<'a> {
    ladder: &'a HarperLadder,
    src: &'a CoefficientSource,
    primes: &'a PrimeTable,
}

impl<'a> HarperBlocks<'a> {
    pub fn new(
        ladder: &'a HarperLadder,
        src: &'a CoefficientSource,
        primes: &'a PrimeTable,
    ) -> HarperBlocks<'a> {
        HarperBlocks { ladder, src, primes }
    }

    pub fn ladder(&self) -> &HarperLadder {
        self.ladder
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i > j || j > self.ladder.j_top {
            return Err(Error::Config(format!(
                "block pair (i, j) = ({i}, {j}) outside 0 <= i <= j <= J = {}",
                self.ladder.j_top
            )));
        }
        Ok(())
    }

    /// Primes of block i must fit the table; the source must cover the
    /// primes the block actually holds.
    fn block_primes(&self, i: usize) -> Result<&'a [u32]> {
        let z_i = self.ladder.z(i as isize);
        if z_i > self.primes.limit() as f64 {
            let needed = if z_i > u64::MAX as f64 { u64::MAX } else { z_i.ceil() as u64 };
            return Err(Error::Resource {
                what: format!("prime table for ladder block {i}"),
                needed,
                cap: self.primes.limit(),
            });
        }
        let ps = self.primes.range(self.ladder.z(i as isize - 1), z_i);
        if let (Some(reach), Some(&p_top)) = (self.src.prime_reach(), ps.last()) {
            if p_top as u64 > reach {
                return Err(Error::Input(format!(
                    "coefficient gap: block {i} needs primes to {p_top} but source {} \
                     is tabulated to {reach}",
                    self.src.label()
                )));
            }
        }
        Ok(ps)
    }

    fn block_terms(&self, i: usize, j: usize) -> Result<Vec<BlockTerm>> {
        self.check_pair(i, j)?;
        let ln_zj = self.ladder.ln_z(j as isize);
        Ok(self
            .block_primes(i)?
            .iter()
            .map(|&p| {
                let pf = p as f64;
                BlockTerm {
                    bw: self.src.a_p(p as u64) * smoothing_weight(pf, ln_zj),
                    ln_p: pf.ln(),
                    inv_sqrt_p: 1.0 / pf.sqrt(),
                }
            })
            .collect())
    }

    /// P_{i,j}(t). Empty blocks give 0.
    pub fn block_poly(&self, i: usize, j: usize, t: f64) -> Result<C64> {
        let terms = self.block_terms(i, j)?;
        Ok(eval_terms(&terms, t))
    }

    /// P_{i,j} sampled on a uniform grid, evaluated point by point.
    pub fn block_poly_grid(
        &self,
        i: usize,
        j: usize,
        t_start: f64,
        spacing: f64,
        n_points: usize,
    ) -> Result<Vec<C64>> {
        if !(spacing > 0.0) || n_points == 0 {
            return Err(Error::Config(format!(
                "grid needs positive spacing and at least one point, got ({spacing}, {n_points})"
            )));
        }
        let terms = self.block_terms(i, j)?;
        Ok((0..n_points)
            .map(|k| eval_terms(&terms, t_start + spacing * k as f64))
            .collect())
    }

    /// sum over block i of |b(p)|^2 / p, the unweighted coefficient mass
    /// appearing in the exceptional-measure bound.
    pub fn block_square_sum(&self, i: usize) -> Result<f64> {
        self.check_pair(i, self.ladder.j_top)?;
        let mut acc = CompensatedSum::new();
        for &p in self.block_primes(i)? {
            acc.add(self.src.a_p(p as u64).norm_sqr() / p as f64);
        }
        Ok(acc.value())
    }

    /// sum over block i of |b(p) w_j(p)|^2 / p, the variance of P_{i,j}.
    pub fn block_variance(&self, i: usize, j: usize) -> Result<f64> {
        let terms = self.block_terms(i, j)?;
        let mut acc = CompensatedSum::new();
        for term in &terms {
            acc.add(term.bw.norm_sqr() * term.inv_sqrt_p * term.inv_sqrt_p);
        }
        Ok(acc.value())
    }

    /// N_{i,j}(t) = sum over n with Omega(n) <= 10 ell_i and prime support
    /// in block i of c(n) W_j(n) g(n) n^{-1/2-it}, where c and W are the
    /// completely multiplicative extensions of b(p) and w_j(p) and
    /// g(p^a) = 1/a!. The coefficient of n is prod b(p)^a w(p)^a / a!.
    pub fn truncated_exp(&self, i: usize, j: usize, t: f64) -> Result<C64> {
        let terms = self.block_terms(i, j)?;
        let m_max = {
            let raw = (10.0 * self.ladder.ell(i)).floor();
            if raw < 0.0 {
                0usize
            } else if raw >= u32::MAX as f64 {
                return Err(Error::Config(format!("truncation order 10 ell = {raw:e} is absurd")));
            } else {
                raw as usize
            }
        };
        let count = multiset_count(terms.len(), m_max, BLOCK_TERM_CAP);
        if count > BLOCK_TERM_CAP {
            return Err(Error::Resource {
                what: format!("expansion terms for block ({i}, {j})"),
                needed: count,
                cap: BLOCK_TERM_CAP,
            });
        }
        let mut re = CompensatedSum::new();
        let mut im = CompensatedSum::new();
        expand(&terms, 0, m_max, 0, C64::new(1.0, 0.0), 0.0, t, &mut re, &mut im);
        Ok(C64::new(re.value(), im.value()))
    }

    /// Relative gap |exp(2 Re P) - |N|^2| / exp(2 Re P) at one t, or None
    /// when |P| > ell_i and the Taylor collapse is not claimed.
    pub fn taylor_check(&self, i: usize, j: usize, t: f64) -> Result<Option<f64>> {
        let p = self.block_poly(i, j, t)?;
        if p.norm() > self.ladder.ell(i) {
            return Ok(None);
        }
        let n = self.truncated_exp(i, j, t)?;
        let target = (2.0 * p.re).exp();
        Ok(Some((target - n.norm_sqr()).abs() / target))
    }

    /// Empirical 2k-th moment of P_{i,j} next to its mean-value bound:
    /// returns (average of |P|^{2k} over the samples, k! (sum |bw|^2/p)^k).
    /// The polynomial length must satisfy Z_i^k <= T.
    pub fn moment_inequality_check(
        &self,
        i: usize,
        j: usize,
        values: &[C64],
        k: u32,
    ) -> Result<(f64, f64)> {
        if k == 0 {
            return Err(Error::Config("moment order k must be >= 1".to_string()));
        }
        if values.is_empty() {
            return Err(Error::Config("no samples given".to_string()));
        }
        if k as f64 * self.ladder.ln_z(i as isize) > self.ladder.t_big.ln() {
            return Err(Error::Config(format!(
                "moment order k = {k} violates Z_i^k <= T for block {i} \
                 (k log Z_i = {:.3} > log T = {:.3})",
                k as f64 * self.ladder.ln_z(i as isize),
                self.ladder.t_big.ln()
            )));
        }
        let var = self.block_variance(i, j)?;
        let mut acc = CompensatedSum::new();
        for v in values {
            acc.add(v.norm_sqr().powi(k as i32));
        }
        let lhs = acc.value() / values.len() as f64;
        let rhs = if var == 0.0 {
            0.0
        } else {
            // k! var^k in log space; k can be large when Z_i is small
            let ln_fact = special::log_gamma(C64::new(k as f64 + 1.0, 0.0))?.re;
            (ln_fact + k as f64 * var.ln()).exp()
        };
        Ok((lhs, rhs))
    }
}

fn eval_terms(terms: &[BlockTerm], t: f64) -> C64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for term in terms {
        let phase = -(t * term.ln_p);
        let rot = C64::new(phase.cos(), phase.sin());
        let v = term.bw * term.inv_sqrt_p * rot;
        re.add(v.re);
        im.add(v.im);
    }
    C64::new(re.value(), im.value())
}

/// Number of multisets of size <= m_max over k primes: C(k + m_max, m_max).
/// Saturates just past cap so the caller can compare without overflow.
fn multiset_count(k: usize, m_max: usize, cap: u64) -> u64 {
    let mut c = 1.0f64;
    for i in 1..=k {
        c *= (m_max + i) as f64 / i as f64;
        if c > 4.0 * cap as f64 {
            return cap + 1;
        }
    }
    if c > cap as f64 {
        cap.saturating_add(1)
    } else {
        c.round() as u64
    }
}

/// Depth-first multiset enumeration in nondecreasing prime order. `coeff`
/// carries prod b(p)^a w(p)^a / a! for the multiset chosen so far: taking
/// one more copy of prime k at multiplicity a multiplies by bw[k]/a.
#[allow(clippy::too_many_arguments)]
fn expand(
    terms: &[BlockTerm],
    start: usize,
    budget: usize,
    mult: usize,
    coeff: C64,
    ln_n: f64,
    t: f64,
    re: &mut CompensatedSum,
    im: &mut CompensatedSum,
) {
    let amp = (-0.5 * ln_n).exp();
    let phase = -(t * ln_n);
    let rot = C64::new(phase.cos(), phase.sin());
    let v = coeff * amp * rot;
    re.add(v.re);
    im.add(v.im);
    if budget == 0 {
        return;
    }
    for k in start..terms.len() {
        let next_mult = if k == start && mult > 0 { mult + 1 } else { 1 };
        let c2 = coeff * terms[k].bw / next_mult as f64;
        expand(terms, k, budget - 1, next_mult, c2, ln_n + terms[k].ln_p, t, re, im);
    }
}

/// Double-precision target for the Taylor gap: the analytic tail 2 e^{-9 ell}
/// floored at 1e-12 where roundoff dominates.
pub fn taylor_bound(ell: f64) -> f64 {
    (2.0 * (-9.0 * ell).exp()).max(1e-12)
}

/// Fraction of samples with |P| strictly above the threshold.
pub fn exceptional_measure(values: &[C64], threshold: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Config("no samples given".to_string()));
    }
    let hits = values.iter().filter(|v| v.norm() > threshold).count();
    Ok(hits as f64 / values.len() as f64)
}

/// Moment-method bound k^{1/2} (k S / (e thr^2))^k on the exceptional
/// fraction, where S is the block's sum of |b(p)|^2/p. Vacuous (> 1) bounds
/// are returned as computed; callers decide what is worth reporting.
pub fn exceptional_bound(k: u32, square_sum: f64, threshold: f64) -> Result<f64> {
    if k == 0 || !(threshold > 0.0) || !(square_sum >= 0.0) {
        return Err(Error::Config(format!(
            "bound needs k >= 1, threshold > 0, S >= 0; got ({k}, {threshold}, {square_sum})"
        )));
    }
    if square_sum == 0.0 {
        return Ok(0.0);
    }
    let k_f = k as f64;
    let ln_ratio = k_f.ln() + square_sum.ln() - 1.0 - 2.0 * threshold.ln();
    Ok((0.5 * k_f.ln() + k_f * ln_ratio).exp())
}

/// Majorant surrogate for log|L(1/2+it)|: the smoothed prime-power sum
///
/// ```text
/// Re sum_{p^l <= Z} b(p^l) w_Z(p^l) / (l p^{l(1/2+it)})
/// ```
///
/// plus c_m log T / log Z. The O(1) of the underlying inequality is not
/// included; callers comparing against log|L| add their own surrogate.
pub fn chandee_majorant(
    src: &CoefficientSource,
    primes: &PrimeTable,
    t: f64,
    z: f64,
    c_m: f64,
    t_big: f64,
) -> Result<f64> {
    if !(z >= 2.0) || !(t_big >= 16.0) || !(c_m > 0.0) {
        return Err(Error::Config(format!(
            "majorant needs Z >= 2, T >= 16, c_m > 0; got ({z}, {t_big}, {c_m})"
        )));
    }
    if z > primes.limit() as f64 {
        return Err(Error::Resource {
            what: "prime table for majorant".to_string(),
            needed: z.ceil() as u64,
            cap: primes.limit(),
        });
    }
    if let Some(reach) = src.prime_reach() {
        if z > reach as f64 {
            return Err(Error::Input(format!(
                "coefficient gap: majorant needs primes to {z:.0} but source {} \
                 is tabulated to {reach}",
                src.label()
            )));
        }
    }
    let ln_z = z.ln();
    let mut acc = CompensatedSum::new();
    for &p in primes.range(1.0, z) {
        let ln_p = (p as f64).ln();
        let ell_max = (ln_z / ln_p).floor() as u32;
        for ell in 1..=ell_max {
            let b = src.satake_power_sum(p as u64, ell);
            let ln_n = ell as f64 * ln_p;
            let w = smoothing_weight(ln_n.exp(), ln_z);
            if w == 0.0 {
                continue;
            }
            let phase = -(t * ln_n);
            let rot = C64::new(phase.cos(), phase.sin());
            acc.add((b * rot).re * w / (ell as f64 * (0.5 * ln_n).exp()));
        }
    }
    Ok(acc.value() + c_m * t_big.ln() / ln_z)
}

/// Exact prime-power tail of the majorant sum beyond first powers:
/// sum over p^l <= Z, l >= 2 of |b(p^l)| w_Z(p^l) / p^{l/2}, returned with
/// its ratio to loglog Z. Degree <= 2 sources only.
pub fn prime_power_reduction_check(
    src: &CoefficientSource,
    primes: &PrimeTable,
    z: f64,
) -> Result<(f64, f64)> {
    if src.degree() > 2 {
        return Err(Error::Input(format!(
            "prime-power reduction handles degree <= 2, got {}",
            src.degree()
        )));
    }
    if !(z >= 2.0) {
        return Err(Error::Config(format!("scale Z must be >= 2, got {z}")));
    }
    if z < 4.0 {
        return Ok((0.0, 0.0));
    }
    let sqrt_z = z.sqrt();
    if sqrt_z > primes.limit() as f64 {
        return Err(Error::Resource {
            what: "prime table for power tail".to_string(),
            needed: sqrt_z.ceil() as u64,
            cap: primes.limit(),
        });
    }
    if let Some(reach) = src.prime_reach() {
        if sqrt_z > reach as f64 {
            return Err(Error::Input(format!(
                "coefficient gap: power tail needs primes to {sqrt_z:.0} but source {} \
                 is tabulated to {reach}",
                src.label()
            )));
        }
    }
    let ln_z = z.ln();
    let mut acc = CompensatedSum::new();
    for &p in primes.range(1.0, sqrt_z) {
        let ln_p = (p as f64).ln();
        let ell_max = (ln_z / ln_p).floor() as u32;
        for ell in 2..=ell_max {
            let ln_n = ell as f64 * ln_p;
            let w = smoothing_weight(ln_n.exp(), ln_z);
            let b = src.satake_power_sum(p as u64, ell);
            acc.add(b.norm() * w / (0.5 * ln_n).exp());
        }
    }
    let sum = acc.value();
    Ok((sum, sum / ln_z.ln()))
}
