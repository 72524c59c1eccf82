//! The resonator polynomial R(t) = sum_{n <= X} r(n) n^{-it}, supported on
//! squarefree products of a prime window, with r multiplicative and
//! r(p) = a(p) L / (sqrt(p) log p) for the combined coefficient a and the
//! weight scale L.
//!
//! The window keeps |r(p)|^2 well under 1, which is what every product
//! estimate downstream leans on; build refuses violations instead of
//! clamping them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
// float intrinsics route through the trait only when std is off
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::arith::{enumerate_support, PrimeTable};
use crate::coeffs::CombinedCoefficients;
use crate::{C64, Error, Result};

/// Default exponent slack in the coefficient filter |a_i(p)| <= (log p)^{1-eps}.
pub const DEFAULT_WINDOW_EPS: f64 = 0.1;

/// Geometry of a resonator: support cap X, weight scale L, and the prime
/// window (either the scale-derived default or an explicit override).
#[derive(Clone, Debug)]
pub struct ResonatorSpec {
    x: f64,
    script_l: f64,
    eps: f64,
    eps_is_default: bool,
    window: Option<(f64, f64)>,
}

impl ResonatorSpec {
    /// Scale-derived spec: X = T^delta and L^2 = (1/m) log X loglog X.
    pub fn from_t(t: f64, delta: f64, m: usize) -> Result<Self> {
        if !(t > 1.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!(
                "resonator scale needs T > 1 and delta in (0,1), got T = {t}, delta = {delta}"
            )));
        }
        if m == 0 {
            return Err(Error::Config("resonator needs at least one source".into()));
        }
        let x = t.powf(delta);
        if x.ln().ln() <= 0.0 {
            return Err(Error::Config(format!("X = {x} too small for the weight scale")));
        }
        let script_l = (x.ln() * x.ln().ln() / m as f64).sqrt();
        Ok(ResonatorSpec {
            x,
            script_l,
            eps: DEFAULT_WINDOW_EPS,
            eps_is_default: true,
            window: None,
        })
    }

    /// Spec with both scales given directly.
    pub fn explicit(x: f64, script_l: f64) -> Result<Self> {
        if !(x >= 2.0) || !(script_l > 0.0) {
            return Err(Error::Config(format!(
                "resonator scales out of range: X = {x}, L = {script_l}"
            )));
        }
        Ok(ResonatorSpec {
            x,
            script_l,
            eps: DEFAULT_WINDOW_EPS,
            eps_is_default: true,
            window: None,
        })
    }

    /// Replace the default prime window (L^2, exp((log L)^2)] by (lo, hi].
    pub fn with_window(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 1.0 && hi > lo) {
            return Err(Error::Config(format!("window ({lo}, {hi}] is empty or inverted")));
        }
        self.window = Some((lo, hi));
        Ok(self)
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Config(format!("filter eps must be in (0,1), got {eps}")));
        }
        self.eps = eps;
        self.eps_is_default = false;
        Ok(self)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn script_l(&self) -> f64 {
        self.script_l
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// The window actually in force.
    pub fn window_bounds(&self) -> (f64, f64) {
        match self.window {
            Some(w) => w,
            None => {
                let l = self.script_l;
                (l * l, (l.ln() * l.ln()).exp())
            }
        }
    }
}

/// Primes in the spec window whose coefficients pass the size filter
/// |a_i(p)| <= (log p)^{1 - eps} for every source i.
pub fn build_prime_window(
    spec: &ResonatorSpec,
    combined: &CombinedCoefficients,
    table: &PrimeTable,
) -> Result<Vec<u64>> {
    let (lo, hi) = spec.window_bounds();
    if hi > table.limit() as f64 {
        return Err(Error::Resource {
            what: "prime table reach for the resonator window".into(),
            needed: hi.ceil() as u64,
            cap: table.limit(),
        });
    }
    let mut out = Vec::new();
    'primes: for &p in table.range(lo, hi) {
        let p = p as u64;
        let cap = (p as f64).ln().powf(1.0 - spec.eps);
        for i in 0..combined.m() {
            if combined.source(i).a_p(p).norm() > cap {
                continue 'primes;
            }
        }
        out.push(p);
    }
    if out.is_empty() {
        return Err(Error::Config(format!(
            "resonator window ({lo:.6}, {hi:.6}] contains no usable prime; \
             pick an explicit window"
        )));
    }
    Ok(out)
}

/// One window prime with its combined coefficient and resonator weight.
#[derive(Clone, Copy, Debug)]
pub struct WindowPrime {
    pub p: u64,
    pub a: C64,
    pub r: C64,
}

#[derive(Clone, Debug)]
pub struct Resonator {
    spec: ResonatorSpec,
    window: Vec<WindowPrime>,
    /// (n, r(n)) over the squarefree support, ascending, n = 1 included.
    support: Vec<(u64, C64)>,
}

/// Summary numbers the reports print; everything downstream of the window.
#[derive(Clone, Debug)]
pub struct SmallnessReport {
    pub x: f64,
    pub script_l: f64,
    pub eps: f64,
    pub eps_is_default: bool,
    pub window_lo: f64,
    pub window_hi: f64,
    pub prime_count: usize,
    pub support_len: usize,
    pub max_r_sq: f64,
    pub l2_norm: f64,
    pub euler_norm: f64,
    pub tail_ratio: f64,
}

impl Resonator {
    pub fn build(
        spec: ResonatorSpec,
        combined: &CombinedCoefficients,
        table: &PrimeTable,
        max_members: usize,
    ) -> Result<Self> {
        let primes = build_prime_window(&spec, combined, table)?;
        let mut window = Vec::with_capacity(primes.len());
        let mut r_of = BTreeMap::new();
        for &p in &primes {
            let a = combined.a_total(p);
            let r = a * (spec.script_l / ((p as f64).sqrt() * (p as f64).ln()));
            if r.norm_sqr() >= 1.0 {
                return Err(Error::Config(format!(
                    "|r({p})|^2 = {} >= 1; the weight scale L = {} is too large \
                     for this window",
                    r.norm_sqr(),
                    spec.script_l
                )));
            }
            window.push(WindowPrime { p, a, r });
            r_of.insert(p, r);
        }
        let support = enumerate_support(&primes, spec.x, max_members)?
            .map_multiplicative(|p| r_of[&p]);
        Ok(Resonator { spec, window, support })
    }

    pub fn spec(&self) -> &ResonatorSpec {
        &self.spec
    }

    pub fn window(&self) -> &[WindowPrime] {
        &self.window
    }

    pub fn support(&self) -> &[(u64, C64)] {
        &self.support
    }

    /// R(t) = sum r(n) n^{-it}. One sincos per support member; grid fills
    /// reuse exactly this, so grid and pointwise values coincide.
    pub fn eval(&self, t: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &(n, r) in &self.support {
            let phase = -t * (n as f64).ln();
            let (sn, cs) = phase.sin_cos();
            acc += r * C64::new(cs, sn);
        }
        acc
    }

    pub fn eval_grid(&self, t_start: f64, spacing: f64, n_points: usize) -> Vec<C64> {
        (0..n_points)
            .map(|i| self.eval(t_start + spacing * i as f64))
            .collect()
    }

    /// sqrt(sum over the support of |r(n)|^2): the diagonal of the mean
    /// square of R.
    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for &(_, r) in &self.support {
            acc += r.norm_sqr();
        }
        acc.sqrt()
    }

    /// sqrt(prod over window primes of (1 + |r(p)|^2)): the full-support
    /// value of the same sum; an upper bound whenever X truncates anything.
    pub fn euler_norm(&self) -> f64 {
        let mut log_acc = 0.0;
        for wp in &self.window {
            log_acc += wp.r.norm_sqr().ln_1p();
        }
        (0.5 * log_acc).exp()
    }

    /// Ratio bounding the mass of the support lost to the cap X, computed
    /// at shift alpha (default 1/(log L)^3) by Rankin's trick:
    ///   X^{-alpha} prod(1 + |r|^2 p^alpha + |r a| p^{-1/2+alpha})
    ///   over prod |1 + |r|^2 + a conj(r) p^{-1/2}|.
    pub fn rankin_tail_ratio(&self, alpha: Option<f64>) -> f64 {
        let alpha = alpha.unwrap_or_else(|| {
            let l = self.spec.script_l.ln();
            1.0 / (l * l * l).max(1.0)
        });
        let mut log_num = -alpha * self.spec.x.ln();
        let mut log_den = 0.0;
        for wp in &self.window {
            let p = wp.p as f64;
            let r2 = wp.r.norm_sqr();
            let num_term = 1.0 + r2 * p.powf(alpha) + (wp.r.norm() * wp.a.norm()) * p.powf(-0.5 + alpha);
            log_num += num_term.ln();
            let den_term = C64::new(1.0 + r2, 0.0) + wp.a * wp.r.conj() / p.sqrt();
            log_den += den_term.norm().ln();
        }
        (log_num - log_den).exp()
    }

    pub fn smallness_report(&self) -> SmallnessReport {
        let (lo, hi) = self.spec.window_bounds();
        let max_r_sq = self
            .window
            .iter()
            .map(|wp| wp.r.norm_sqr())
            .fold(0.0f64, f64::max);
        SmallnessReport {
            x: self.spec.x,
            script_l: self.spec.script_l,
            eps: self.spec.eps,
            eps_is_default: self.spec.eps_is_default,
            window_lo: lo,
            window_hi: hi,
            prime_count: self.window.len(),
            support_len: self.support.len(),
            max_r_sq,
            l2_norm: self.l2_norm(),
            euler_norm: self.euler_norm(),
            tail_ratio: self.rankin_tail_ratio(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoefficientSource;
    use alloc::vec;

    fn zeta_combined() -> CombinedCoefficients {
        CombinedCoefficients::new(vec![CoefficientSource::zeta()]).unwrap()
    }

    #[test]
    fn default_window_at_scale_ten() {
        // L = 10: window (100, exp((log 10)^2)] = (100, 200.63...], 21 primes
        let spec = ResonatorSpec::explicit(1e18, 10.0).unwrap();
        let (lo, hi) = spec.window_bounds();
        assert_eq!(lo, 100.0);
        assert!((hi - 200.71743249053009).abs() < 1e-6);
        let table = PrimeTable::sieve(256, None).unwrap();
        let primes = build_prime_window(&spec, &zeta_combined(), &table).unwrap();
        assert_eq!(primes.len(), 21);
        assert_eq!(primes[0], 101);
        assert_eq!(*primes.last().unwrap(), 199);
    }

    #[test]
    fn weight_values_at_scale_ten() {
        let spec = ResonatorSpec::explicit(1e18, 10.0).unwrap();
        let table = PrimeTable::sieve(256, None).unwrap();
        let res = Resonator::build(spec, &zeta_combined(), &table, 1 << 22).unwrap();
        let r101 = res.window()[0].r;
        assert!((r101.re - 0.21560372834879410).abs() < 1e-15);
        assert_eq!(r101.im, 0.0);
        let rep = res.smallness_report();
        assert!((rep.max_r_sq - 0.046484967677900601).abs() < 1e-15);
        assert!(rep.eps_is_default && rep.eps == 0.1);
        assert!(rep.l2_norm <= rep.euler_norm);
        assert!(rep.tail_ratio > 1e-4 && rep.tail_ratio < 0.2);
    }

    #[test]
    fn full_support_norm_identity() {
        // 9 primes whose full product 4.37e18 stays under the cap: every
        // squarefree product survives and the l2 norm equals the Euler norm.
        let spec = ResonatorSpec::explicit(5e18, 10.0)
            .unwrap()
            .with_window(100.0, 140.0)
            .unwrap();
        let table = PrimeTable::sieve(256, None).unwrap();
        let res = Resonator::build(spec, &zeta_combined(), &table, 1 << 12).unwrap();
        assert_eq!(res.window().len(), 9);
        assert_eq!(res.support().len(), 512);
        let l2 = res.l2_norm();
        let euler = res.euler_norm();
        assert!(
            ((l2 - euler) / euler).abs() < 1e-13,
            "l2 {l2} vs euler {euler}"
        );
        // R(0) = prod (1 + r(p)) on a full support
        let direct: f64 = res.window().iter().map(|wp| 1.0 + wp.r.re).product();
        assert!((res.eval(0.0).re - direct).abs() < 1e-12);
        assert!(res.eval(0.0).im.abs() < 1e-15);
    }

    #[test]
    fn truncated_support_matches_subset_brute_force() {
        let spec = ResonatorSpec::explicit(2.0e9, 10.0).unwrap();
        let table = PrimeTable::sieve(256, None).unwrap();
        let res = Resonator::build(spec, &zeta_combined(), &table, 1 << 22).unwrap();
        // brute force over all subsets of the 21 window primes
        let primes: Vec<u64> = res.window().iter().map(|wp| wp.p).collect();
        let mut count = 0u64;
        let mut sum_sq = 0.0f64;
        for mask in 0u32..(1 << 21) {
            let mut prod = 1.0f64;
            for (i, &p) in primes.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    prod *= p as f64;
                }
            }
            if prod <= 2.0e9 {
                count += 1;
                let mut r2 = 1.0f64;
                for (i, wp) in res.window().iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        r2 *= wp.r.norm_sqr();
                    }
                }
                sum_sq += r2;
            }
        }
        assert_eq!(res.support().len() as u64, count);
        let l2sq = res.l2_norm().powi(2);
        assert!((l2sq - sum_sq).abs() / sum_sq < 1e-12);
    }

    #[test]
    fn grid_equals_pointwise_exactly() {
        let spec = ResonatorSpec::explicit(1e6, 10.0).unwrap();
        let table = PrimeTable::sieve(256, None).unwrap();
        let res = Resonator::build(spec, &zeta_combined(), &table, 1 << 20).unwrap();
        let grid = res.eval_grid(1000.0, 0.37, 50);
        for (i, &g) in grid.iter().enumerate() {
            let p = res.eval(1000.0 + 0.37 * i as f64);
            assert_eq!(g.re.to_bits(), p.re.to_bits());
            assert_eq!(g.im.to_bits(), p.im.to_bits());
        }
    }

    #[test]
    fn coefficient_filter_drops_large_primes() {
        // degree-2 table, a(149) = 5 exceeds (log 149)^{0.9} = 4.26
        let table = PrimeTable::sieve(256, None).unwrap();
        let mut entries = alloc::collections::BTreeMap::new();
        for &p in table.range(100.0, 201.0) {
            entries.insert(p as u64, C64::new(1.0, 0.0));
        }
        entries.insert(149, C64::new(5.0, 0.0));
        let src = CoefficientSource::from_table("filter-demo", 2, 0.0, entries).unwrap();
        let combined = CombinedCoefficients::new(vec![src]).unwrap();
        let spec = ResonatorSpec::explicit(1e18, 10.0).unwrap();
        let primes = build_prime_window(&spec, &combined, &table).unwrap();
        assert_eq!(primes.len(), 20);
        assert!(!primes.contains(&149));
    }

    #[test]
    fn window_errors() {
        let table = PrimeTable::sieve(256, None).unwrap();
        // no primes in (25, 28]
        let spec = ResonatorSpec::explicit(1e6, 10.0)
            .unwrap()
            .with_window(25.0, 28.0)
            .unwrap();
        match Resonator::build(spec, &zeta_combined(), &table, 1 << 20) {
            Err(Error::Config(_)) => {}
            other => panic!("expected empty-window error, got {other:?}"),
        }
        // weight scale too large for the window: |r(101)|^2 > 1
        let spec = ResonatorSpec::explicit(1e18, 100.0)
            .unwrap()
            .with_window(100.0, 200.0)
            .unwrap();
        match Resonator::build(spec, &zeta_combined(), &table, 1 << 20) {
            Err(Error::Config(msg)) => assert!(msg.contains(">= 1")),
            other => panic!("expected weight violation, got {other:?}"),
        }
        // member cap
        let spec = ResonatorSpec::explicit(1e18, 10.0).unwrap();
        match Resonator::build(spec, &zeta_combined(), &table, 64) {
            Err(Error::Resource { .. }) => {}
            other => panic!("expected member cap error, got {other:?}"),
        }
        // table too short for the window
        let short = PrimeTable::sieve(150, None).unwrap();
        let spec = ResonatorSpec::explicit(1e18, 10.0).unwrap();
        match Resonator::build(spec, &zeta_combined(), &short, 1 << 20) {
            Err(Error::Resource { .. }) => {}
            other => panic!("expected table reach error, got {other:?}"),
        }
    }

    #[test]
    fn scale_derivation_from_t() {
        // X = T^{1/2} at T = 1e8: X = 1e4, L^2 = log X loglog X
        let spec = ResonatorSpec::from_t(1e8, 0.5, 1).unwrap();
        assert!((spec.x() - 1e4).abs() < 1e-6);
        let want = (1e4f64.ln() * 1e4f64.ln().ln()).sqrt();
        assert!((spec.script_l() - want).abs() < 1e-12);
        // two sources halve L^2
        let spec2 = ResonatorSpec::from_t(1e8, 0.5, 2).unwrap();
        assert!((spec2.script_l() - want / 2.0f64.sqrt()).abs() < 1e-12);
        assert!(ResonatorSpec::from_t(1e8, 1.5, 1).is_err());
        assert!(ResonatorSpec::from_t(2.0, 0.5, 1).is_err());
    }
}
