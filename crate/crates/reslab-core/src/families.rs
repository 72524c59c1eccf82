//! Family experiments over Dirichlet twists mod q and real quadratic twists.
//!
//! Two searches share one resonator design. For a pair of weight-k cusp
//! forms f, g the local data lives on a prime window: starred eigenvalues
//! (mod-q variant) or the twisted-first-moment ratios h (quadratic variant)
//! combine into a multiplicative weight varpi supported where both values
//! agree in sign. The resonator R(chi) = sum r(n) varpi(n) chi(n) then
//! steers the search: mod q toward characters where both twisted central
//! values are large, over quadratic twists (with a Moebius sign on r varpi)
//! toward discriminants where both are small.

use crate::arith::{characters_mod, kronecker, DirichletCharacter, PrimeTable};
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

/// Largest modulus the mod-q family accepts. Central values cost one
/// twisted sum of length ~ 11 q per character, so the family scan is
/// quadratic in q.
pub const MODQ_CAP: u64 = 3000;

/// Largest lower endpoint X of the quadratic-twist range [X, 2X].
pub const QUAD_X_CAP: u64 = 2000;

const SUPPORT_CAP: usize = 1 << 20;

/// Which family a resonator spec is built for. The two variants differ in
/// how the scale constant folds into script L and in the Moebius sign on
/// the resonator coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyVariant {
    ModQ,
    QuadTwist,
}

/// Resonator shape for a family run: polynomial length N, scale constant
/// a_omega, the derived scale script L, and the prime window carrying r(p).
#[derive(Clone, Debug)]
pub struct FamilyResonatorSpec {
    variant: FamilyVariant,
    n_length: f64,
    a_omega: f64,
    script_l: f64,
    window: (f64, f64),
}

impl FamilyResonatorSpec {
    /// Mod-q variant: script L = sqrt(log N loglog N / a_omega).
    pub fn mod_q(n_length: f64) -> Result<FamilyResonatorSpec> {
        Self::new(FamilyVariant::ModQ, n_length, 1.0)
    }

    /// Quadratic-twist variant: script L = sqrt(a_omega log N loglog N).
    pub fn quad_twist(n_length: f64) -> Result<FamilyResonatorSpec> {
        Self::new(FamilyVariant::QuadTwist, n_length, 1.0)
    }

    fn new(variant: FamilyVariant, n_length: f64, a_omega: f64) -> Result<FamilyResonatorSpec> {
        if !(n_length > core::f64::consts::E) {
            return Err(Error::Config(format!(
                "resonator length N = {n_length} must exceed e so that loglog N > 0"
            )));
        }
        if !(a_omega > 0.0) || !a_omega.is_finite() {
            return Err(Error::Config(format!("scale constant a_omega = {a_omega} must be positive")));
        }
        let base = n_length.ln() * n_length.ln().ln();
        let script_l = match variant {
            FamilyVariant::ModQ => (base / a_omega).sqrt(),
            FamilyVariant::QuadTwist => (base * a_omega).sqrt(),
        };
        // natural window [L^2, exp((log L)^2)]; empty below L = e^2, which
        // covers every desk-sized N, so runs normally override it
        let window = (script_l * script_l, (script_l.ln() * script_l.ln()).exp());
        Ok(FamilyResonatorSpec { variant, n_length, a_omega, script_l, window })
    }

    /// Replaces the scale constant; script L and the natural window follow.
    pub fn with_a_omega(self, a_omega: f64) -> Result<FamilyResonatorSpec> {
        Self::new(self.variant, self.n_length, a_omega)
    }

    /// Desk override of the prime window, closed on both ends.
    pub fn with_window(mut self, lo: f64, hi: f64) -> Result<FamilyResonatorSpec> {
        if !(lo >= 1.0) || !(hi >= lo) || !hi.is_finite() {
            return Err(Error::Config(format!("window [{lo}, {hi}] is not a valid prime range")));
        }
        self.window = (lo, hi);
        Ok(self)
    }

    pub fn variant(&self) -> FamilyVariant {
        self.variant
    }

    pub fn n_length(&self) -> f64 {
        self.n_length
    }

    pub fn a_omega(&self) -> f64 {
        self.a_omega
    }

    pub fn script_l(&self) -> f64 {
        self.script_l
    }

    /// Window [lo, hi]; lo > hi means the window holds no primes.
    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// r(p) = script L / (sqrt(p) log p) inside the window, 0 outside.
    pub fn r_at(&self, p: u64) -> f64 {
        let pf = p as f64;
        if pf < self.window.0 || pf > self.window.1 {
            return 0.0;
        }
        self.script_l / (pf.sqrt() * pf.ln())
    }
}

fn real_eigenvalue(src: &CoefficientSource, p: u64) -> Result<f64> {
    if src.degree() != 2 {
        return Err(Error::Input(format!(
            "family local data needs degree-2 sources, got {} of degree {}",
            src.label(),
            src.degree()
        )));
    }
    let a = src.a_p(p);
    debug_assert!(a.im.abs() < 1e-12, "family eigenvalues must be real");
    Ok(a.re)
}

/// Starred eigenvalue pair at p:
/// lambda*_f = (1 - 1/p)^{-1} (lambda_f - lambda_g / p) and symmetrically
/// for g. The 1/(1 - 1/p) factor is kept exact, no asymptotic shortcut.
pub fn starred(f: &CoefficientSource, g: &CoefficientSource, p: u64) -> Result<(f64, f64)> {
    let lf = real_eigenvalue(f, p)?;
    let lg = real_eigenvalue(g, p)?;
    let pf = p as f64;
    let scale = 1.0 / (1.0 - 1.0 / pf);
    Ok((scale * (lf - lg / pf), scale * (lg - lf / pf)))
}

/// Local ratio of the twisted first moment at p, the quadratic-family
/// stand-in for lambda_f(p):
///
///   h_f(p) = [p^{3/2} / (2(p+1))] (A- - A+)
///            / (1 + [p / (2(p+1))] (A- + A+ - 2)),
///   A-+ = (1 -+ lambda_f(p)/sqrt(p) + 1/p)^{-1}.
///
/// Satisfies |h_f(p) - lambda_f(p)| <= 5 |lambda_f(p)| / p for p >= 11.
pub fn twist_local_ratio(f: &CoefficientSource, p: u64) -> Result<f64> {
    Ok(twist_ratio_from(real_eigenvalue(f, p)?, p as f64))
}

fn twist_ratio_from(lam: f64, p: f64) -> f64 {
    let sp = p.sqrt();
    let a_minus = 1.0 / (1.0 - lam / sp + 1.0 / p);
    let a_plus = 1.0 / (1.0 + lam / sp + 1.0 / p);
    let num = p * sp / (2.0 * (p + 1.0)) * (a_minus - a_plus);
    let den = 1.0 + p / (2.0 * (p + 1.0)) * (a_minus + a_plus - 2.0);
    num / den
}

/// One window prime with its resonator and weight data.
#[derive(Clone, Copy, Debug)]
pub struct FamilyPrimeData {
    pub p: u32,
    /// r(p), from the spec's window formula.
    pub r: f64,
    /// varpi(p) = v_f v_g (v_f + v_g) when both local values are nonzero
    /// with equal sign, else 0. v is lambda* (mod q) or h (quadratic).
    pub varpi: f64,
    /// omega = varpi^2
    pub omega: f64,
    /// omega'_1 = varpi v_f, nonnegative by the sign rule
    pub omega1: f64,
    /// omega'_2 = varpi v_g, nonnegative by the sign rule
    pub omega2: f64,
}

/// Enumerated resonator support: window primes with local weights, and the
/// squarefree elements n <= N carrying the multiplicative coefficients
/// r(n) varpi(n) (times mu(n) in the quadratic variant).
#[derive(Clone, Debug)]
pub struct FamilySupport {
    variant: FamilyVariant,
    primes: Vec<FamilyPrimeData>,
    elements: Vec<(u64, f64)>,
}

impl FamilySupport {
    /// Builds local data on the spec's window for the form pair. The sign
    /// membership rule uses an auxiliary coprimality modulus that the desk
    /// fixes to 1, so only the nonzero-equal-sign condition remains.
    pub fn build(
        spec: &FamilyResonatorSpec,
        f: &CoefficientSource,
        g: &CoefficientSource,
        table: &PrimeTable,
    ) -> Result<FamilySupport> {
        let (lo, hi) = spec.window();
        let mut primes = Vec::new();
        if lo <= hi {
            if hi > table.limit() as f64 {
                return Err(Error::Resource {
                    what: "prime table for the resonator window".to_string(),
                    needed: hi.ceil() as u64,
                    cap: table.limit(),
                });
            }
            for src in [f, g] {
                if let Some(reach) = src.prime_reach() {
                    if hi > reach as f64 {
                        return Err(Error::Input(format!(
                            "coefficient gap: window reaches {hi:.0} but source {} \
                             is tabulated to {reach}",
                            src.label()
                        )));
                    }
                }
            }
            for &p in table.primes() {
                let pf = p as f64;
                if pf < lo {
                    continue;
                }
                if pf > hi {
                    break;
                }
                let (vf, vg) = match spec.variant() {
                    FamilyVariant::ModQ => starred(f, g, p as u64)?,
                    FamilyVariant::QuadTwist => {
                        (twist_local_ratio(f, p as u64)?, twist_local_ratio(g, p as u64)?)
                    }
                };
                let varpi = if vf * vg > 0.0 { vf * vg * (vf + vg) } else { 0.0 };
                let data = FamilyPrimeData {
                    p,
                    r: spec.r_at(p as u64),
                    varpi,
                    omega: varpi * varpi,
                    omega1: varpi * vf,
                    omega2: varpi * vg,
                };
                debug_assert!(data.omega1 >= 0.0 && data.omega2 >= 0.0);
                primes.push(data);
            }
        }
        let active: Vec<u64> = primes
            .iter()
            .filter(|d| d.varpi != 0.0 && d.r != 0.0)
            .map(|d| d.p as u64)
            .collect();
        let support = crate::arith::enumerate_support(&active, spec.n_length(), SUPPORT_CAP)?;
        let sign = match spec.variant() {
            FamilyVariant::ModQ => 1.0,
            FamilyVariant::QuadTwist => -1.0,
        };
        let elements = support
            .map_multiplicative(|p| {
                let d = primes.iter().find(|d| d.p as u64 == p).unwrap();
                C64::new(sign * d.r * d.varpi, 0.0)
            })
            .into_iter()
            .map(|(n, v)| (n, v.re))
            .collect();
        Ok(FamilySupport { variant: spec.variant(), primes, elements })
    }

    pub fn variant(&self) -> FamilyVariant {
        self.variant
    }

    /// All window primes, members or not (non-members carry varpi = 0).
    pub fn primes(&self) -> &[FamilyPrimeData] {
        &self.primes
    }

    /// Support elements (n, coefficient), n = 1 first.
    pub fn elements(&self) -> &[(u64, f64)] {
        &self.elements
    }

    /// sum over the support of r(n)^2 omega(n), the diagonal of the family
    /// mean square of R.
    pub fn diagonal_mass(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for &(_, c) in &self.elements {
            acc.add(c * c);
        }
        acc.value()
    }

    /// R(chi) = sum over the support of coeff(n) chi(n).
    pub fn resonator(&self, chi: &DirichletCharacter) -> C64 {
        let mut re = CompensatedSum::new();
        let mut im = CompensatedSum::new();
        for &(n, c) in &self.elements {
            let v = chi.value(n) * c;
            re.add(v.re);
            im.add(v.im);
        }
        C64::new(re.value(), im.value())
    }

    /// R(chi_{8d}) for the quadratic variant; the character is real so the
    /// polynomial is too.
    pub fn resonator_quad(&self, d: u64) -> f64 {
        let mut acc = CompensatedSum::new();
        for &(n, c) in &self.elements {
            acc.add(kronecker((8 * d) as i64, n as i64) as f64 * c);
        }
        acc.value()
    }
}

/// Family mean square of the resonator mod q, measured and predicted.
#[derive(Clone, Copy, Debug)]
pub struct MeanSquareReport {
    /// (1/phi*) sum over primitive chi of |R(chi)|^2, by direct scan.
    pub primitive_mean: f64,
    /// [(q-1) S2 - S1^2] / (q - 2) with S1 = sum coeff, S2 = sum coeff^2:
    /// the exact orthogonality value when the support stays below q.
    pub closed_form: f64,
    /// (1/phi) sum over all chi of |R(chi)|^2; equals S2 exactly below q.
    pub full_mean: f64,
    /// S2 = sum over the support of r(n)^2 omega(n).
    pub diagonal: f64,
}

/// Measures the family mean square of R over characters mod prime q and
/// pairs it with the closed orthogonality forms. Requires the support to
/// stay below q so no two elements collide mod q.
pub fn modq_mean_square(sup: &FamilySupport, q: u64) -> Result<MeanSquareReport> {
    if q < 3 || !is_prime_u64(q) {
        return Err(Error::Input(format!("family modulus q = {q} must be an odd prime")));
    }
    if let Some(&(n_top, _)) = sup.elements().last() {
        if n_top >= q {
            return Err(Error::Config(format!(
                "support element {n_top} reaches the modulus {q}; the closed forms need N < q"
            )));
        }
    }
    let chars = characters_mod(q)?;
    let mut full = CompensatedSum::new();
    let mut prim = CompensatedSum::new();
    for chi in &chars {
        let w = sup.resonator(chi).norm_sqr();
        full.add(w);
        if !chi.is_principal() {
            prim.add(w);
        }
    }
    let mut s1 = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    for &(_, c) in sup.elements() {
        s1.add(c);
        s2.add(c * c);
    }
    let (s1, s2) = (s1.value(), s2.value());
    Ok(MeanSquareReport {
        primitive_mean: prim.value() / (q - 2) as f64,
        closed_form: ((q - 1) as f64 * s2 - s1 * s1) / (q - 2) as f64,
        full_mean: full.value() / (q - 1) as f64,
        diagonal: s2,
    })
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

fn largest_prime_at_most(n: u64) -> u64 {
    let mut m = n;
    while m >= 2 {
        if is_prime_u64(m) {
            return m;
        }
        m -= 1;
    }
    0
}

/// The coefficient source must hold every prime its series fill will touch.
fn check_series_reach(src: &CoefficientSource, n_max: usize) -> Result<()> {
    if let Some(reach) = src.prime_reach() {
        let needed = largest_prime_at_most(n_max as u64);
        if reach < needed {
            return Err(Error::Input(format!(
                "coefficient gap: series to {n_max} needs primes to {needed} but source {} \
                 is tabulated to {reach}",
                src.label()
            )));
        }
    }
    Ok(())
}

fn require_holo_weight(src: &CoefficientSource) -> Result<u32> {
    match src.holo_form() {
        Some(form) => Ok(form.weight()),
        None => Err(Error::Input(format!(
            "family central values need a holomorphic form, got {}",
            src.label()
        ))),
    }
}

/// Central values of f twisted by every non-principal character mod q.
#[derive(Clone, Debug)]
pub struct ModqValues {
    /// (chi, L(1/2, f x chi)) in character enumeration order.
    pub values: Vec<(DirichletCharacter, C64)>,
    /// Crude bound on the truncation error of each value.
    pub truncation: f64,
}

/// L(1/2, f x chi) for all non-principal chi mod prime q by the smoothed
/// functional equation at the central point: with real base terms
/// b(n) = lambda(n) Q(k/2, 2 pi n / q) / sqrt(n) and S = sum b(n) chi(n),
///
///   L = S + eps conj(S),   eps = i^k tau(chi)^2 / q.
///
/// The twisted conductor is q^2, so the sum length scales with q.
pub fn modq_central_values(f: &CoefficientSource, q: u64) -> Result<ModqValues> {
    let kappa = require_holo_weight(f)?;
    let half_k = kappa / 2;
    let mut n_max = 16usize;
    while special::upper_gamma_ratio_int(half_k, core::f64::consts::TAU * n_max as f64 / q as f64)?
        > 1e-13
    {
        n_max += 16;
    }
    modq_central_values_with_len(f, q, n_max)
}

/// Same, at an explicit series length (for convergence checks).
pub fn modq_central_values_with_len(
    f: &CoefficientSource,
    q: u64,
    n_max: usize,
) -> Result<ModqValues> {
    if q < 3 || !is_prime_u64(q) {
        return Err(Error::Input(format!("family modulus q = {q} must be an odd prime")));
    }
    if q > MODQ_CAP {
        return Err(Error::Resource {
            what: "mod-q family scan".to_string(),
            needed: q,
            cap: MODQ_CAP,
        });
    }
    let kappa = require_holo_weight(f)?;
    let half_k = kappa / 2;
    if n_max == 0 {
        return Err(Error::Config("series length must be positive".to_string()));
    }
    check_series_reach(f, n_max)?;
    let lam = f.series_coefficients(n_max)?;
    let qf = q as f64;
    let mut base = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let nf = n as f64;
        let w = special::upper_gamma_ratio_int(half_k, core::f64::consts::TAU * nf / qf)?;
        debug_assert!(lam[n].im.abs() < 1e-12);
        base.push(lam[n].re * w / nf.sqrt());
    }
    // |lambda(n)| <= d(n) <= n makes n Q(k/2, 2 pi n / q) a per-term cap
    let tail_weight =
        special::upper_gamma_ratio_int(half_k, core::f64::consts::TAU * n_max as f64 / qf)?;
    let truncation = 2.0 * n_max as f64 * n_max as f64 * tail_weight;
    let sign = if kappa % 4 == 0 { 1.0 } else { -1.0 };
    let mut values = Vec::new();
    for chi in characters_mod(q)? {
        if chi.is_principal() {
            continue;
        }
        debug_assert!(chi.is_primitive());
        let mut re = CompensatedSum::new();
        let mut im = CompensatedSum::new();
        for (n, &b) in base.iter().enumerate() {
            let v = chi.value((n + 1) as u64) * b;
            re.add(v.re);
            im.add(v.im);
        }
        let s = C64::new(re.value(), im.value());
        let tau = chi.gauss_sum();
        let eps = tau * tau * (sign / qf);
        values.push((chi, s + eps * s.conj()));
    }
    Ok(ModqValues { values, truncation })
}

fn validate_quad_d(d: u64) -> Result<()> {
    if d == 0 || d % 2 == 0 {
        return Err(Error::Input(format!("twist index d = {d} must be odd and positive")));
    }
    let mut p = 3u64;
    while p * p <= d {
        if d % (p * p) == 0 {
            return Err(Error::Input(format!("twist index d = {d} is not squarefree")));
        }
        p += 2;
    }
    if d > 2 * QUAD_X_CAP {
        return Err(Error::Resource {
            what: "quadratic twist index".to_string(),
            needed: d,
            cap: 2 * QUAD_X_CAP,
        });
    }
    Ok(())
}

fn quad_afe_sum(lam: &[C64], half_k: u32, d: u64) -> Result<f64> {
    let big_d = (8 * d) as f64;
    let mut acc = CompensatedSum::new();
    for n in 1..lam.len() {
        let nf = n as f64;
        let w = special::upper_gamma_ratio_int(half_k, core::f64::consts::TAU * nf / big_d)?;
        if w < 1e-18 {
            break;
        }
        debug_assert!(lam[n].im.abs() < 1e-12);
        acc.add(lam[n].re * kronecker((8 * d) as i64, n as i64) as f64 * w / nf.sqrt());
    }
    Ok(2.0 * acc.value())
}

fn quad_check_value(v: f64, d: u64, label: &str) -> Result<f64> {
    if v < -1e-8 {
        return Err(Error::Input(format!(
            "central value {v:.3e} of {label} twisted by 8*{d} is negative beyond tolerance: \
             numerical anomaly or hypothesis violation"
        )));
    }
    Ok(v)
}

/// L(1/2, f x chi_{8d}) for odd squarefree d: the twist by the real
/// character of the even fundamental discriminant 8d. Needs weight
/// k = 0 mod 4 so the twisted sign is +1 and
///
///   L = 2 sum lambda(n) chi_{8d}(n) Q(k/2, 2 pi n / (8d)) / sqrt(n),
///
/// real and nonnegative; values below -1e-8 are flagged as anomalies.
pub fn quad_twist_value(f: &CoefficientSource, d: u64) -> Result<f64> {
    quad_twist_value_with_eps(f, d, 1e-10)
}

/// Same, with the truncation target exposed (for convergence checks).
pub fn quad_twist_value_with_eps(f: &CoefficientSource, d: u64, eps: f64) -> Result<f64> {
    validate_quad_d(d)?;
    let kappa = require_holo_weight(f)?;
    if kappa % 4 != 0 {
        return Err(Error::Input(format!(
            "quadratic twists need weight divisible by 4, got {kappa}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::Config(format!("truncation target {eps} must be positive")));
    }
    let half_k = kappa / 2;
    let big_d = (8 * d) as f64;
    let mut n_max = 16usize;
    while special::upper_gamma_ratio_int(half_k, core::f64::consts::TAU * n_max as f64 / big_d)?
        > eps * 1e-3
    {
        n_max += 16;
    }
    check_series_reach(f, n_max)?;
    let lam = f.series_coefficients(n_max)?;
    quad_check_value(quad_afe_sum(&lam, half_k, d)?, d, f.label())
}

/// One family member: id is the character index mod q or the twist index d.
#[derive(Clone, Copy, Debug)]
pub struct FamilyMemberRecord {
    pub id: u64,
    pub l_f: C64,
    pub l_g: C64,
    /// |R|^2 at this member.
    pub weight: f64,
    pub selected: bool,
}

/// Record of one family experiment.
#[derive(Clone, Debug)]
pub struct FamilyRun {
    pub variant: FamilyVariant,
    /// q for the mod-q family, X for the quadratic range [X, 2X].
    pub size: u64,
    pub support: FamilySupport,
    pub members: Vec<FamilyMemberRecord>,
    /// Index into members of the selected extremal member.
    pub selected: usize,
    /// Mod q: the detection threshold V assembled from the window Euler
    /// factors with the measured mean of |R|^2 substituted for its
    /// predicted product. Quadratic: the small-value Euler product
    /// prod (1 + r^2 omega - 2 r omega'_1 / sqrt(p)).
    pub threshold: f64,
    pub mean_weight: f64,
    /// Verified inequality, lhs vs rhs: mod q the Cauchy-Schwarz bound
    /// mean(|L_f L_g|^2 w) mean(w) >= |mean(L_f conj(L_g) w)|^2; quadratic
    /// the witness bound min(L_f + L_g) <= weighted mean of L_f + L_g.
    pub ineq_lhs: f64,
    pub ineq_rhs: f64,
    /// Reported generic constants: mod q the single-value and product
    /// exponent constants 1/(12 sqrt 10) and 1/(6 sqrt 10); quadratic the
    /// generic small-value constant 1.
    pub constants: Vec<f64>,
}

impl FamilyRun {
    pub fn selected_member(&self) -> &FamilyMemberRecord {
        &self.members[self.selected]
    }
}

/// Searches characters mod q for simultaneously large twisted central
/// values. Members at or above the mean resonator weight are admissible;
/// among them the one maximizing min(|L_f|, |L_g|) is selected.
pub fn modq_search(
    f: &CoefficientSource,
    g: &CoefficientSource,
    q: u64,
    spec: &FamilyResonatorSpec,
    table: &PrimeTable,
) -> Result<FamilyRun> {
    if spec.variant() != FamilyVariant::ModQ {
        return Err(Error::Config("mod-q search needs a mod-q resonator spec".to_string()));
    }
    let support = FamilySupport::build(spec, f, g, table)?;
    let vf = modq_central_values(f, q)?;
    let vg = modq_central_values(g, q)?;
    let mut members = Vec::with_capacity(vf.values.len());
    let mut wsum = CompensatedSum::new();
    for ((chi, lf), (chi_g, lg)) in vf.values.iter().zip(vg.values.iter()) {
        debug_assert_eq!(chi.index(), chi_g.index());
        let weight = support.resonator(chi).norm_sqr();
        wsum.add(weight);
        members.push(FamilyMemberRecord {
            id: chi.index(),
            l_f: *lf,
            l_g: *lg,
            weight,
            selected: false,
        });
    }
    if members.is_empty() {
        return Err(Error::Config(format!("modulus q = {q} yields an empty family")));
    }
    let mean_weight = wsum.value() / members.len() as f64;
    let mut selected = 0usize;
    let mut best = -1.0f64;
    for (i, m) in members.iter().enumerate() {
        if m.weight >= mean_weight {
            let v = m.l_f.norm().min(m.l_g.norm());
            if v > best {
                best = v;
                selected = i;
            }
        }
    }
    members[selected].selected = true;

    // threshold V: min over the two single-value products, each the squared
    // cross product over the window divided by measured mass and the
    // doubled one-sided product, scaled by 1/log q
    let mut p_cross = 1.0f64;
    let mut p_one = 1.0f64;
    let mut p_two = 1.0f64;
    for d in support.primes() {
        let sp = (d.p as f64).sqrt();
        let diag = d.r * d.r * d.omega;
        p_cross *= 1.0 + diag + d.r * (d.omega1 + d.omega2) / sp;
        p_one *= 1.0 + diag + 2.0 * d.r * d.omega1 / sp;
        p_two *= 1.0 + diag + 2.0 * d.r * d.omega2 / sp;
    }
    let threshold =
        p_cross * p_cross / (mean_weight * p_one.max(p_two)) / (q as f64).ln();

    let mut lhs_prod = CompensatedSum::new();
    let mut rhs_re = CompensatedSum::new();
    let mut rhs_im = CompensatedSum::new();
    for m in &members {
        lhs_prod.add(m.l_f.norm_sqr() * m.l_g.norm_sqr() * m.weight);
        let cross = m.l_f * m.l_g.conj() * m.weight;
        rhs_re.add(cross.re);
        rhs_im.add(cross.im);
    }
    let n = members.len() as f64;
    let ineq_lhs = lhs_prod.value() / n * mean_weight;
    let ineq_rhs = C64::new(rhs_re.value() / n, rhs_im.value() / n).norm_sqr();

    Ok(FamilyRun {
        variant: FamilyVariant::ModQ,
        size: q,
        support,
        members,
        selected,
        threshold,
        mean_weight,
        ineq_lhs,
        ineq_rhs,
        constants: alloc::vec![
            1.0 / (12.0 * 10.0f64.sqrt()),
            1.0 / (6.0 * 10.0f64.sqrt()),
        ],
    })
}

/// Searches odd squarefree d in [X, 2X] for simultaneously small twisted
/// central values: the member minimizing the resonator-weighted sum
/// |R(chi_{8d})|^2 (L_f + L_g) is selected. With constant weights this is
/// the plain minimizer of L_f + L_g.
pub fn quad_small_search(
    f: &CoefficientSource,
    g: &CoefficientSource,
    x: u64,
    spec: &FamilyResonatorSpec,
    table: &PrimeTable,
) -> Result<FamilyRun> {
    if spec.variant() != FamilyVariant::QuadTwist {
        return Err(Error::Config(
            "quadratic search needs a quadratic-twist resonator spec".to_string(),
        ));
    }
    if x == 0 {
        return Err(Error::Config("twist range start X must be positive".to_string()));
    }
    if x > QUAD_X_CAP {
        return Err(Error::Resource {
            what: "quadratic twist range".to_string(),
            needed: x,
            cap: QUAD_X_CAP,
        });
    }
    let kappa_f = require_holo_weight(f)?;
    let kappa_g = require_holo_weight(g)?;
    for kappa in [kappa_f, kappa_g] {
        if kappa % 4 != 0 {
            return Err(Error::Input(format!(
                "quadratic twists need weight divisible by 4, got {kappa}"
            )));
        }
    }
    let support = FamilySupport::build(spec, f, g, table)?;
    let d_top = 2 * x;
    let big_d = (8 * d_top) as f64;
    let mut series = Vec::new();
    for (src, kappa) in [(f, kappa_f), (g, kappa_g)] {
        let half_k = kappa / 2;
        let mut n_max = 16usize;
        while special::upper_gamma_ratio_int(
            half_k,
            core::f64::consts::TAU * n_max as f64 / big_d,
        )? > 1e-13
        {
            n_max += 16;
        }
        check_series_reach(src, n_max)?;
        series.push((src.series_coefficients(n_max)?, half_k, src.label()));
    }
    let mut members = Vec::new();
    let mut wsum = CompensatedSum::new();
    let mut weighted_sum = CompensatedSum::new();
    for d in x..=d_top {
        if d % 2 == 0 || validate_quad_d(d).is_err() {
            continue;
        }
        let l_f = quad_check_value(quad_afe_sum(&series[0].0, series[0].1, d)?, d, series[0].2)?;
        let l_g = quad_check_value(quad_afe_sum(&series[1].0, series[1].1, d)?, d, series[1].2)?;
        let r = support.resonator_quad(d);
        let weight = r * r;
        wsum.add(weight);
        weighted_sum.add(weight * (l_f + l_g));
        members.push(FamilyMemberRecord {
            id: d,
            l_f: C64::new(l_f, 0.0),
            l_g: C64::new(l_g, 0.0),
            weight,
            selected: false,
        });
    }
    if members.is_empty() {
        return Err(Error::Config(format!("no odd squarefree d in [{x}, {d_top}]")));
    }
    let mut selected = 0usize;
    let mut best = f64::INFINITY;
    for (i, m) in members.iter().enumerate() {
        let score = m.weight * (m.l_f.re + m.l_g.re);
        if score < best {
            best = score;
            selected = i;
        }
    }
    members[selected].selected = true;

    let mut threshold = 1.0f64;
    for d in support.primes() {
        threshold *= 1.0 + d.r * d.r * d.omega - 2.0 * d.r * d.omega1 / (d.p as f64).sqrt();
    }
    let mean_weight = wsum.value() / members.len() as f64;
    let ineq_lhs = members
        .iter()
        .map(|m| m.l_f.re + m.l_g.re)
        .fold(f64::INFINITY, f64::min);
    let ineq_rhs = weighted_sum.value() / wsum.value();

    Ok(FamilyRun {
        variant: FamilyVariant::QuadTwist,
        size: x,
        support,
        members,
        selected,
        threshold,
        mean_weight,
        ineq_lhs,
        ineq_rhs,
        constants: alloc::vec![1.0],
    })
}
