//! Integer substrate: prime sieves, Kronecker symbols, Dirichlet characters
//! with exact root-of-unity values, and squarefree support enumeration.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

// float intrinsics route through the trait only when std is off
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{C64, Error, Result};

/// Primes up to a fixed limit, sieved once and shared.
#[derive(Debug, Clone)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u32>,
}

impl PrimeTable {
    /// Sieve of Eratosthenes on odd numbers. `cap_bytes`, when given, bounds
    /// the working set (bitset plus prime storage estimate).
    pub fn sieve(limit: u64, cap_bytes: Option<u64>) -> Result<PrimeTable> {
        if limit < 2 {
            return Ok(PrimeTable { limit, primes: Vec::new() });
        }
        if limit > u32::MAX as u64 {
            return Err(Error::Config(format!("sieve limit {limit} exceeds u32 range")));
        }
        if let Some(cap) = cap_bytes {
            // Bitset over odds plus ~4 bytes per prime (density 1/ln).
            let est = limit / 16 + 4 * (limit as f64 / (limit as f64).ln().max(1.0)) as u64;
            if est > cap {
                return Err(Error::Resource { what: String::from("prime sieve"), needed: est, cap });
            }
        }
        let n_odds = (limit as usize + 1) / 2; // odd values 1, 3, .., <= limit
        let mut composite = vec![false; n_odds];
        composite[0] = true; // 1
        let mut p = 3u64;
        while p * p <= limit {
            if !composite[(p / 2) as usize] {
                let mut m = p * p;
                while m <= limit {
                    composite[(m / 2) as usize] = true;
                    m += 2 * p;
                }
            }
            p += 2;
        }
        let mut primes = Vec::with_capacity(n_odds / 4 + 2);
        primes.push(2);
        for (i, &c) in composite.iter().enumerate() {
            if !c {
                primes.push((2 * i + 1) as u32);
            }
        }
        if limit == 2 {
            primes.truncate(1);
        }
        Ok(PrimeTable { limit, primes })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    pub fn count(&self) -> usize {
        self.primes.len()
    }

    pub fn contains(&self, p: u64) -> bool {
        p <= self.limit && u32::try_from(p).map(|v| self.primes.binary_search(&v).is_ok()).unwrap_or(false)
    }

    /// Primes p with lo < p <= hi, as a slice of the table.
    pub fn range(&self, lo: f64, hi: f64) -> &[u32] {
        let start = self.primes.partition_point(|&p| (p as f64) <= lo);
        let end = self.primes.partition_point(|&p| (p as f64) <= hi);
        &self.primes[start..end]
    }
}

/// Kronecker symbol (a/n), extended Jacobi symbol over all integers.
pub fn kronecker(a: i64, n: i64) -> i32 {
    if n == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    let mut a = a;
    let mut n = n;
    let mut result: i32 = 1;
    if n < 0 {
        n = -n;
        if a < 0 {
            result = -result;
        }
    }
    let mut twos = 0u32;
    while n % 2 == 0 {
        n /= 2;
        twos += 1;
    }
    if twos > 0 {
        if a % 2 == 0 {
            return 0;
        }
        if twos % 2 == 1 {
            // (a/2) by a mod 8
            let m8 = a.rem_euclid(8);
            if m8 == 3 || m8 == 5 {
                result = -result;
            }
        }
    }
    // Jacobi loop, n odd positive.
    a = a.rem_euclid(n);
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            let m8 = n % 8;
            if m8 == 3 || m8 == 5 {
                result = -result;
            }
        }
        core::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            result = -result;
        }
        a %= n;
    }
    if n == 1 {
        result
    } else {
        0
    }
}

/// One cyclic factor of (Z/q)^*, with a discrete-log table mod its prime
/// power.
#[derive(Debug)]
struct CyclicComponent {
    modulus: u64,
    order: u64,
    dlog: Vec<u32>,
}

const NO_DLOG: u32 = u32::MAX;

/// Shared structure of the character group mod q: component decomposition,
/// group exponent, and the table of exponent-th roots of unity.
#[derive(Debug)]
pub struct CharacterGroup {
    q: u64,
    components: Vec<CyclicComponent>,
    exponent: u64,
    roots: Vec<C64>,
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Smallest primitive root mod p^k, p odd prime.
fn primitive_root(p: u64, k: u32) -> u64 {
    let phi_p = p - 1;
    let fac = factorize(phi_p);
    let mut g = 2u64;
    loop {
        if fac.iter().all(|&(f, _)| pow_mod(g, phi_p / f, p) != 1) {
            break;
        }
        g += 1;
    }
    if k == 1 {
        return g;
    }
    // Lift: g works mod p^k unless g^(p-1) = 1 mod p^2.
    if pow_mod(g, p - 1, p * p) == 1 {
        g + p
    } else {
        g
    }
}

fn walk_dlog(modulus: u64, gen: u64, order: u64) -> Vec<u32> {
    let mut dlog = vec![NO_DLOG; modulus as usize];
    let mut val = 1u64;
    for j in 0..order {
        dlog[val as usize] = j as u32;
        val = val * gen % modulus;
    }
    dlog
}

impl CharacterGroup {
    pub fn new(q: u64) -> Result<Arc<CharacterGroup>> {
        if q == 0 {
            return Err(Error::Config(String::from("character modulus must be positive")));
        }
        if q > 10_000_000 {
            return Err(Error::Config(format!("character modulus {q} too large (max 10^7)")));
        }
        let mut components = Vec::new();
        for (p, k) in factorize(q) {
            let m = p.pow(k);
            if p == 2 {
                match k {
                    1 => {} // (Z/2)^* trivial
                    2 => {
                        components.push(CyclicComponent { modulus: 4, order: 2, dlog: walk_dlog(4, 3, 2) });
                    }
                    _ => {
                        // (Z/2^k)^* = <-1> x <5>
                        let half = m / 4; // order of 5
                        let mut dlog_sign = vec![NO_DLOG; m as usize];
                        let mut dlog_five = vec![NO_DLOG; m as usize];
                        let mut val = 1u64;
                        for j in 0..half {
                            dlog_sign[val as usize] = 0;
                            dlog_five[val as usize] = j as u32;
                            let neg = m - val;
                            dlog_sign[neg as usize] = 1;
                            dlog_five[neg as usize] = j as u32;
                            val = val * 5 % m;
                        }
                        components.push(CyclicComponent { modulus: m, order: 2, dlog: dlog_sign });
                        components.push(CyclicComponent { modulus: m, order: half, dlog: dlog_five });
                    }
                }
            } else {
                let phi = m / p * (p - 1);
                let g = primitive_root(p, k);
                components.push(CyclicComponent { modulus: m, order: phi, dlog: walk_dlog(m, g, phi) });
            }
        }
        let exponent = components.iter().fold(1u64, |acc, c| lcm(acc, c.order));
        let tau = 2.0 * core::f64::consts::PI;
        let roots = (0..exponent)
            .map(|k| {
                let th = tau * k as f64 / exponent as f64;
                C64::new(th.cos(), th.sin())
            })
            .collect();
        Ok(Arc::new(CharacterGroup { q, components, exponent, roots }))
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn phi(&self) -> u64 {
        self.components.iter().map(|c| c.order).product()
    }

    /// Exponent vector of n with respect to the component generators, or
    /// None when gcd(n, q) > 1.
    fn dlogs(&self, n: u64) -> Option<Vec<u64>> {
        if self.q == 1 {
            return Some(Vec::new());
        }
        if gcd(n % self.q, self.q) != 1 {
            return None;
        }
        let mut out = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let r = (n % c.modulus) as usize;
            let d = c.dlog[r];
            if d == NO_DLOG {
                return None;
            }
            out.push(d as u64);
        }
        Some(out)
    }
}

/// A Dirichlet character mod q, stored as exact root-of-unity data: exponent
/// coordinates against the group generators, converted to complex on demand.
#[derive(Debug, Clone)]
pub struct DirichletCharacter {
    group: Arc<CharacterGroup>,
    exps: Vec<u64>,
    index: u64,
    order: u64,
    conductor: u64,
    even: bool,
}

impl DirichletCharacter {
    pub fn modulus(&self) -> u64 {
        self.group.q
    }

    /// Stable label within characters_mod output (mixed-radix index).
    pub fn index(&self) -> u64 {
        self.index
    }

    /// Euler phi of the modulus (number of characters mod q).
    pub fn group_phi(&self) -> u64 {
        self.group.phi()
    }

    /// Multiplicative order of the character.
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn conductor(&self) -> u64 {
        self.conductor
    }

    pub fn is_principal(&self) -> bool {
        self.order == 1
    }

    pub fn is_primitive(&self) -> bool {
        self.conductor == self.group.q
    }

    /// chi(-1) = +1.
    pub fn is_even(&self) -> bool {
        self.even
    }

    pub fn is_real(&self) -> bool {
        self.order <= 2
    }

    /// Exact value as (numerator, denominator) of the angle in turns:
    /// chi(n) = e^(2 pi i k / L). None when gcd(n, q) > 1.
    pub fn exponent(&self, n: u64) -> Option<(u64, u64)> {
        let dl = self.group.dlogs(n)?;
        let l = self.group.exponent;
        let mut k: u64 = 0;
        for (i, c) in self.group.components.iter().enumerate() {
            // e_i * dlog_i * (L / order_i), all mod L; u128 to avoid overflow.
            let term = (self.exps[i] as u128 * dl[i] as u128) % c.order as u128;
            k = ((k as u128 + term * (l / c.order) as u128) % l as u128) as u64;
        }
        Some((k, l))
    }

    pub fn value(&self, n: u64) -> C64 {
        match self.exponent(n) {
            Some((k, _)) => self.group.roots[k as usize],
            None => C64::new(0.0, 0.0),
        }
    }

    /// Gauss sum over the full period.
    pub fn gauss_sum(&self) -> C64 {
        let q = self.group.q;
        let tau = 2.0 * core::f64::consts::PI;
        let mut s = C64::new(0.0, 0.0);
        for a in 1..=q {
            let ch = self.value(a);
            if ch != C64::new(0.0, 0.0) {
                let th = tau * a as f64 / q as f64;
                s += ch * C64::new(th.cos(), th.sin());
            }
        }
        s
    }
}

/// All phi(q) Dirichlet characters mod q, principal character first,
/// enumerated in mixed-radix order over component exponents.
pub fn characters_mod(q: u64) -> Result<Vec<DirichletCharacter>> {
    let group = CharacterGroup::new(q)?;
    let n_comp = group.components.len();
    let phi = group.phi();
    let mut out = Vec::with_capacity(phi as usize);
    let mut exps = vec![0u64; n_comp];
    for index in 0..phi {
        let order = group
            .components
            .iter()
            .enumerate()
            .fold(1u64, |acc, (i, c)| lcm(acc, c.order / gcd(c.order, exps[i])));
        let conductor = conductor_of(&group, &exps);
        let even = match group.dlogs(q.max(2) - 1) {
            // chi(-1): exponent 0 <=> even. q=1,2: -1 = 1, even.
            Some(dl) => {
                let l = group.exponent;
                let mut k = 0u64;
                for (i, c) in group.components.iter().enumerate() {
                    let term = (exps[i] as u128 * dl[i] as u128) % c.order as u128;
                    k = ((k as u128 + term * (l / c.order) as u128) % l as u128) as u64;
                }
                k == 0
            }
            None => true,
        };
        out.push(DirichletCharacter {
            group: group.clone(),
            exps: exps.clone(),
            index,
            order,
            conductor,
            even,
        });
        // increment mixed radix
        for i in 0..n_comp {
            exps[i] += 1;
            if exps[i] < group.components[i].order {
                break;
            }
            exps[i] = 0;
        }
    }
    Ok(out)
}

/// Conductor from component character orders. For an odd prime power
/// component of order d > 1 the local conductor is the smallest p^j with
/// d | phi(p^j); the 2-part uses the <-1> x <5> decomposition.
fn conductor_of(group: &CharacterGroup, exps: &[u64]) -> u64 {
    let mut cond = 1u64;
    let mut i = 0;
    while i < group.components.len() {
        let c = &group.components[i];
        if c.modulus % 2 == 0 && c.order == 2 && i + 1 < group.components.len()
            && group.components[i + 1].modulus == c.modulus
        {
            // 2^k pair: sign component then five component.
            let d_sign = 2 / gcd(2, exps[i]);
            let c5 = &group.components[i + 1];
            let d_five = c5.order / gcd(c5.order, exps[i + 1]);
            if d_five > 1 {
                cond *= 4 * d_five;
            } else if d_sign > 1 {
                cond *= 4;
            }
            i += 2;
            continue;
        }
        if c.modulus == 4 {
            if exps[i] % 2 == 1 {
                cond *= 4;
            }
            i += 1;
            continue;
        }
        let d = c.order / gcd(c.order, exps[i]);
        if d > 1 {
            // p odd: find minimal j with d | p^(j-1) (p-1)
            let p = factorize(c.modulus)[0].0;
            let mut m = p;
            let mut phi = p - 1;
            while phi % d != 0 {
                m *= p;
                phi *= p;
            }
            cond *= m;
        }
        i += 1;
    }
    cond
}

/// Squarefree integers supported on a fixed prime set, capped at x.
#[derive(Debug, Clone)]
pub struct SquarefreeSupport {
    primes: Vec<u64>,
    cap_x: f64,
    members: Vec<u64>,
}

impl SquarefreeSupport {
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn cap_x(&self) -> f64 {
        self.cap_x
    }

    /// Sorted members, 1 included.
    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Evaluate a multiplicative function on every member: f given on the
    /// primes, extended by f(mn) = f(m) f(n). Returns (member, value) sorted
    /// by member; f(1) = 1.
    pub fn map_multiplicative<F: Fn(u64) -> C64>(&self, f: F) -> Vec<(u64, C64)> {
        let x_floor = self.cap_x.floor().max(0.0) as u64;
        let vals: Vec<C64> = self.primes.iter().map(|&p| f(p)).collect();
        let mut out = Vec::with_capacity(self.members.len());
        out.push((1u64, C64::new(1.0, 0.0)));
        let mut stack: Vec<(usize, u64, C64)> = Vec::new();
        for i in 0..self.primes.len() {
            if self.primes[i] > x_floor {
                break;
            }
            stack.push((i, self.primes[i], vals[i]));
        }
        while let Some((i, n, v)) = stack.pop() {
            out.push((n, v));
            for j in (i + 1)..self.primes.len() {
                match n.checked_mul(self.primes[j]) {
                    Some(m) if m <= x_floor => stack.push((j, m, v * vals[j])),
                    _ => break,
                }
            }
        }
        out.sort_unstable_by_key(|&(n, _)| n);
        out
    }
}

/// Depth-first enumeration of all squarefree products of `primes` that stay
/// at or below x. Errors with a count bound when the member cap is hit.
pub fn enumerate_support(primes: &[u64], x: f64, max_members: usize) -> Result<SquarefreeSupport> {
    if !(x >= 1.0) {
        return Err(Error::Config(format!("support cap x = {x} must be >= 1")));
    }
    let mut sorted: Vec<u64> = primes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.first().is_some_and(|&p| p < 2) {
        return Err(Error::Config(String::from("support primes must be >= 2")));
    }
    let x_floor = x.floor() as u64;
    let mut members: Vec<u64> = vec![1];
    let mut count: u64 = 1;
    let mut stack: Vec<(usize, u64)> = Vec::new();
    for i in 0..sorted.len() {
        if sorted[i] > x_floor {
            break;
        }
        stack.push((i, sorted[i]));
    }
    let count_limit = 2 * max_members as u64;
    while let Some((i, n)) = stack.pop() {
        count += 1;
        if count <= max_members as u64 {
            members.push(n);
        } else if count > count_limit {
            return Err(Error::Resource {
                what: String::from("squarefree support members"),
                needed: count,
                cap: max_members as u64,
            });
        }
        for j in (i + 1)..sorted.len() {
            match n.checked_mul(sorted[j]) {
                Some(m) if m <= x_floor => stack.push((j, m)),
                _ => break,
            }
        }
    }
    if count > max_members as u64 {
        return Err(Error::Resource {
            what: String::from("squarefree support members"),
            needed: count,
            cap: max_members as u64,
        });
    }
    members.sort_unstable();
    Ok(SquarefreeSupport { primes: sorted, cap_x: x, members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    #[test]
    fn sieve_small_primes() {
        let t = PrimeTable::sieve(30, None).unwrap();
        assert_eq!(t.primes(), &[2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert!(t.contains(29));
        assert!(!t.contains(27));
        assert_eq!(t.range(10.0, 20.0), &[11, 13, 17, 19]);
    }

    #[test]
    fn sieve_edge_limits() {
        assert_eq!(PrimeTable::sieve(1, None).unwrap().count(), 0);
        assert_eq!(PrimeTable::sieve(2, None).unwrap().primes(), &[2]);
        assert_eq!(PrimeTable::sieve(3, None).unwrap().primes(), &[2, 3]);
    }

    #[test]
    fn sieve_respects_cap() {
        match PrimeTable::sieve(10_000_000, Some(1024)) {
            Err(Error::Resource { needed, cap, .. }) => {
                assert!(needed > cap);
            }
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    /// Independent oracle: segmented sieve with trial-division base primes.
    fn segmented_count(limit: u64) -> u64 {
        let root = (limit as f64).sqrt() as u64 + 1;
        let mut base = Vec::new();
        'outer: for n in 2..=root {
            let mut d = 2;
            while d * d <= n {
                if n % d == 0 {
                    continue 'outer;
                }
                d += 1;
            }
            base.push(n);
        }
        let seg = 1u64 << 16;
        let mut count = 0u64;
        let mut lo = 2u64;
        while lo <= limit {
            let hi = (lo + seg - 1).min(limit);
            let mut flags = vec![true; (hi - lo + 1) as usize];
            for &p in &base {
                if p * p > hi {
                    break;
                }
                let mut m = (lo.div_ceil(p) * p).max(p * p);
                while m <= hi {
                    flags[(m - lo) as usize] = false;
                    m += p;
                }
            }
            count += flags.iter().filter(|&&f| f).count() as u64;
            lo = hi + 1;
        }
        count
    }

    #[test]
    fn sieve_matches_segmented_oracle() {
        for limit in [100, 65_537, 1_000_000] {
            let t = PrimeTable::sieve(limit, None).unwrap();
            assert_eq!(t.count() as u64, segmented_count(limit), "limit {limit}");
        }
    }

    #[test]
    fn prime_count_ten_million() {
        let t = PrimeTable::sieve(10_000_000, None).unwrap();
        assert_eq!(t.count(), 664_579);
    }

    #[test]
    fn kronecker_eight_over_three() {
        assert_eq!(kronecker(8, 3), -1);
    }

    #[test]
    fn kronecker_matches_legendre_for_odd_primes() {
        for &p in &[3i64, 5, 7, 11, 13, 17, 19, 23, 29, 31, 97, 101] {
            let mut residues = BTreeSet::new();
            for a in 1..p {
                residues.insert(a * a % p);
            }
            for a in 0..p {
                let expect = if a == 0 {
                    0
                } else if residues.contains(&a) {
                    1
                } else {
                    -1
                };
                assert_eq!(kronecker(a, p), expect, "({a}/{p})");
            }
        }
    }

    #[test]
    fn kronecker_special_cases() {
        // (a/2) is 0 for even a, +1 for a = 1,7 mod 8, -1 for a = 3,5 mod 8
        assert_eq!(kronecker(6, 2), 0);
        assert_eq!(kronecker(7, 2), 1);
        assert_eq!(kronecker(3, 2), -1);
        assert_eq!(kronecker(-1, 0), 1);
        assert_eq!(kronecker(5, 0), 0);
        assert_eq!(kronecker(0, 3), 0);
        assert_eq!(kronecker(1, 1), 1);
        // (-1/n) for odd n: +1 iff n = 1 mod 4
        assert_eq!(kronecker(-1, 5), 1);
        assert_eq!(kronecker(-1, 7), -1);
    }

    #[test]
    fn kronecker_multiplicative_in_both_arguments() {
        for d in -40i64..=40 {
            for m in 1i64..=30 {
                for n in 1i64..=30 {
                    assert_eq!(
                        kronecker(d, m * n),
                        kronecker(d, m) * kronecker(d, n),
                        "(d,m,n)=({d},{m},{n})"
                    );
                }
            }
        }
        // top multiplicativity with positive bottom
        for a in -30i64..=30 {
            for b in -30i64..=30 {
                for n in 1i64..=40 {
                    assert_eq!(kronecker(a * b, n), kronecker(a, n) * kronecker(b, n));
                }
            }
        }
    }

    #[test]
    fn characters_mod_eight() {
        let chars = characters_mod(8).unwrap();
        assert_eq!(chars.len(), 4);
        let phi = 4.0;
        // pairwise orthogonality
        for ci in &chars {
            for cj in &chars {
                let mut s = C64::new(0.0, 0.0);
                for n in 1..8 {
                    s += ci.value(n) * cj.value(n).conj();
                }
                let expect = if ci.index() == cj.index() { phi } else { 0.0 };
                assert!((s.re - expect).abs() < 1e-12 && s.im.abs() < 1e-12);
            }
        }
        // all characters mod 8 are real
        assert!(chars.iter().all(|c| c.is_real()));
        // conductors: 1 (principal), 4, 8, 8
        let mut conds: Vec<u64> = chars.iter().map(|c| c.conductor()).collect();
        conds.sort_unstable();
        assert_eq!(conds, vec![1, 4, 8, 8]);
    }

    #[test]
    fn characters_row_orthogonality() {
        for q in [5u64, 7, 9, 12, 15, 16, 24, 36] {
            let chars = characters_mod(q).unwrap();
            let phi = chars.len() as f64;
            for n in 1..q {
                for m in 1..q {
                    if gcd(n, q) != 1 || gcd(m, q) != 1 {
                        continue;
                    }
                    let mut s = C64::new(0.0, 0.0);
                    for ch in &chars {
                        s += ch.value(n) * ch.value(m).conj();
                    }
                    let expect = if n == m { phi } else { 0.0 };
                    assert!(
                        (s.re - expect).abs() < 1e-10 && s.im.abs() < 1e-10,
                        "q={q} n={n} m={m} s={s}"
                    );
                }
            }
        }
    }

    #[test]
    fn quadratic_character_mod_seven_is_legendre() {
        let chars = characters_mod(7).unwrap();
        assert_eq!(chars.len(), 6);
        let quad = chars.iter().find(|c| c.order() == 2).unwrap();
        for n in 0..7 {
            let k = kronecker(n as i64, 7);
            let v = quad.value(n);
            assert!((v.re - k as f64).abs() < 1e-14 && v.im.abs() < 1e-14);
        }
        assert!(quad.is_primitive());
        // mod 7: legendre symbol is odd (chi(-1) = (-1/7) = -1)
        assert!(!quad.is_even());
    }

    #[test]
    fn character_orders_mod_seven() {
        let chars = characters_mod(7).unwrap();
        let mut orders: Vec<u64> = chars.iter().map(|c| c.order()).collect();
        orders.sort_unstable();
        assert_eq!(orders, vec![1, 2, 3, 3, 6, 6]);
    }

    #[test]
    fn conductors_mod_twelve() {
        let chars = characters_mod(12).unwrap();
        assert_eq!(chars.len(), 4);
        let mut conds: Vec<u64> = chars.iter().map(|c| c.conductor()).collect();
        conds.sort_unstable();
        assert_eq!(conds, vec![1, 3, 4, 12]);
        assert_eq!(chars.iter().filter(|c| c.is_primitive()).count(), 1);
        // principal character has conductor 1
        assert_eq!(chars.iter().find(|c| c.is_principal()).unwrap().conductor(), 1);
    }

    #[test]
    fn character_is_completely_multiplicative() {
        for q in [7u64, 8, 9, 15, 977] {
            let chars = characters_mod(q).unwrap();
            for ch in chars.iter().take(6) {
                for n in 1..50u64 {
                    for m in 1..20u64 {
                        let lhs = ch.value(n * m);
                        let rhs = ch.value(n) * ch.value(m);
                        assert!((lhs - rhs).norm() < 1e-12, "q={q} chi_{} n={n} m={m}", ch.index());
                    }
                }
            }
        }
    }

    #[test]
    fn gauss_sum_modulus_for_primitive_characters() {
        for q in [5u64, 7, 8, 11, 12] {
            for ch in characters_mod(q).unwrap() {
                if ch.is_primitive() {
                    let g = ch.gauss_sum();
                    assert!(
                        (g.norm_sqr() - q as f64).abs() < 1e-9,
                        "q={q} chi_{} |tau|^2={}",
                        ch.index(),
                        g.norm_sqr()
                    );
                }
            }
        }
    }

    #[test]
    fn gauss_sum_quadratic_even_is_sqrt_q() {
        // chi_5 is even real primitive: tau = sqrt(5)
        let chars = characters_mod(5).unwrap();
        let quad = chars.iter().find(|c| c.order() == 2).unwrap();
        let g = quad.gauss_sum();
        assert!((g.re - 5f64.sqrt()).abs() < 1e-12 && g.im.abs() < 1e-12);
    }

    #[test]
    fn principal_character_mod_one_and_two() {
        let c1 = characters_mod(1).unwrap();
        assert_eq!(c1.len(), 1);
        assert!((c1[0].value(5) - C64::new(1.0, 0.0)).norm() < 1e-15);
        let c2 = characters_mod(2).unwrap();
        assert_eq!(c2.len(), 1);
        assert_eq!(c2[0].value(4), C64::new(0.0, 0.0));
        assert!((c2[0].value(3) - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn support_of_two_three_five() {
        let s = enumerate_support(&[2, 3, 5], 30.0, 1000).unwrap();
        assert_eq!(s.members(), &[1, 2, 3, 5, 6, 10, 15, 30]);
    }

    #[test]
    fn support_cap_reports_count() {
        match enumerate_support(&[2, 3, 5, 7, 11], 2310.0, 10) {
            Err(Error::Resource { needed, cap, .. }) => {
                assert_eq!(cap, 10);
                assert!(needed > 10, "needed = {needed}");
            }
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn support_empty_window_is_just_one() {
        let s = enumerate_support(&[101, 103], 50.0, 100).unwrap();
        assert_eq!(s.members(), &[1]);
    }

    fn brute_support(primes: &[u64], x: u64) -> Vec<u64> {
        let mut out = Vec::new();
        'n: for n in 1..=x {
            let mut m = n;
            for &p in primes {
                let mut seen = 0;
                while m % p == 0 {
                    m /= p;
                    seen += 1;
                }
                if seen > 1 {
                    continue 'n;
                }
            }
            if m == 1 {
                out.push(n);
            }
        }
        out
    }

    #[test]
    fn support_matches_brute_force() {
        let cases: [(&[u64], f64); 4] = [
            (&[2, 3, 5, 7], 100.0),
            (&[3, 11, 13], 500.0),
            (&[2, 3, 5, 7, 11, 13], 1000.0),
            (&[97], 10_000.0),
        ];
        for (primes, x) in cases {
            let s = enumerate_support(primes, x, 100_000).unwrap();
            assert_eq!(s.members(), brute_support(primes, x as u64), "primes {primes:?}");
        }
    }

    #[test]
    fn map_multiplicative_identity_and_products() {
        let s = enumerate_support(&[2, 3, 5], 30.0, 1000).unwrap();
        let id = s.map_multiplicative(|p| C64::new(p as f64, 0.0));
        for &(n, v) in &id {
            assert!((v.re - n as f64).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
        let ones = s.map_multiplicative(|_| C64::new(1.0, 0.0));
        assert_eq!(ones.len(), s.len());
        assert!(ones.iter().all(|&(_, v)| (v - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn support_rejects_bad_input() {
        assert!(matches!(enumerate_support(&[2, 3], 0.5, 10), Err(Error::Config(_))));
        assert!(matches!(enumerate_support(&[1, 3], 10.0, 10), Err(Error::Config(_))));
    }
}
