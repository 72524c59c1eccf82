//! Source descriptors.
//!
//! Config files name L-functions with one-line descriptors:
//!
//! ```text
//! zeta
//! dirichlet <q> <index|auto>
//! holo <weight> [p_max]
//! table <path>
//! ```
//!
//! `auto` picks the lowest-index non-principal primitive character. A holo
//! source without an explicit p_max gets sized from the largest t the run
//! will touch, mirroring the evaluator's truncation rule with headroom.

use std::path::Path;

use anyhow::{bail, Context, Result};
use reslab_core::arith::characters_mod;
use reslab_core::coeffs::{ingest_coefficients, CoefficientSource};

use crate::parallel;

/// Largest series index the holomorphic evaluator can request for weight
/// kappa at |t| <= t_max, with headroom; used to size eigenvalue tables.
pub fn gl2_reach(weight: u32, t_max: f64, eps: f64) -> u64 {
    let a_norm = (weight as f64 / 2.0).hypot(t_max);
    let margin = 2.0 * (0.25 * (eps.min(1e-6) * 1e-2).recip().ln()).sqrt();
    let n_max = (a_norm / core::f64::consts::TAU) * margin.exp();
    (n_max * 1.05).ceil() as u64 + 128
}

pub struct SourceContext<'a> {
    /// Directory table paths resolve against (the config file's directory).
    pub base_dir: &'a Path,
    /// Default reach for holo sources without an explicit p_max.
    pub holo_reach: u64,
    pub workers: usize,
}

pub fn build_source(desc: &str, ctx: &SourceContext) -> Result<CoefficientSource> {
    let toks: Vec<&str> = desc.split_whitespace().collect();
    match toks.as_slice() {
        ["zeta"] => Ok(CoefficientSource::zeta()),
        ["dirichlet", q, which] => {
            let q: u64 = q.parse().with_context(|| format!("bad modulus in {desc:?}"))?;
            let chars = characters_mod(q)?;
            let chi = match *which {
                "auto" => chars
                    .iter()
                    .find(|c| !c.is_principal() && c.is_primitive())
                    .with_context(|| format!("no primitive character mod {q}"))?,
                idx => {
                    let idx: u64 =
                        idx.parse().with_context(|| format!("bad character index in {desc:?}"))?;
                    chars
                        .iter()
                        .find(|c| c.index() == idx)
                        .with_context(|| format!("no character of index {idx} mod {q}"))?
                }
            };
            Ok(CoefficientSource::dirichlet(chi.clone())?)
        }
        ["holo", weight] => {
            let weight: u32 =
                weight.parse().with_context(|| format!("bad weight in {desc:?}"))?;
            parallel::gl2_source(weight, ctx.holo_reach, ctx.workers)
        }
        ["holo", weight, p_max] => {
            let weight: u32 =
                weight.parse().with_context(|| format!("bad weight in {desc:?}"))?;
            let p_max: u64 =
                p_max.parse().with_context(|| format!("bad prime bound in {desc:?}"))?;
            parallel::gl2_source(weight, p_max, ctx.workers)
        }
        ["table", path] => {
            let path = ctx.base_dir.join(path);
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading coefficient table {}", path.display()))?;
            Ok(ingest_coefficients(&text)
                .with_context(|| format!("parsing coefficient table {}", path.display()))?)
        }
        _ => bail!(
            "unrecognized source descriptor {desc:?} \
             (expected: zeta | dirichlet <q> <index|auto> | holo <weight> [p_max] | table <path>)"
        ),
    }
}

pub fn build_sources(descs: &[&str], ctx: &SourceContext) -> Result<Vec<CoefficientSource>> {
    if descs.is_empty() {
        bail!("at least one source is required (add source_1 = ... under [sources])");
    }
    descs.iter().map(|d| build_source(d, ctx)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(dir: &Path) -> SourceContext<'_> {
        SourceContext { base_dir: dir, holo_reach: 2000, workers: 1 }
    }

    #[test]
    fn parses_each_descriptor_kind() {
        let dir = std::env::temp_dir();
        let c = ctx(&dir);
        assert!(build_source("zeta", &c).unwrap().is_zeta());
        let chi = build_source("dirichlet 3 auto", &c).unwrap();
        assert_eq!(chi.dirichlet_character().unwrap().modulus(), 3);
        assert!(!chi.dirichlet_character().unwrap().is_principal());
        let holo = build_source("holo 12 500", &c).unwrap();
        assert_eq!(holo.degree(), 2);
        assert_eq!(holo.a_p(2).re, -24.0 / 2048.0f64.sqrt());
        // explicit index round-trips; the principal index is refused outright
        let idx = chi.dirichlet_character().unwrap().index();
        let again = build_source(&format!("dirichlet 3 {idx}"), &c).unwrap();
        assert_eq!(again.label(), chi.label());
        let err = build_source("dirichlet 3 0", &c).unwrap_err().to_string();
        assert!(err.contains("principal"), "{err}");
    }

    #[test]
    fn table_descriptor_reads_files() {
        let dir = std::env::temp_dir().join("reslab-src-test");
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("toy.coeffs"), "# toy 1 0.0\n2 0.5 0.0\n3 -0.25 0.0\n")
            .unwrap();
        let c = ctx(&dir);
        let src = build_source("table toy.coeffs", &c).unwrap();
        assert_eq!(src.label(), "toy");
        assert_eq!(src.a_p(2).re, 0.5);
        assert!(build_source("table missing.coeffs", &c).is_err());
    }

    #[test]
    fn bad_descriptors_report_the_grammar() {
        let dir = std::env::temp_dir();
        let c = ctx(&dir);
        for bad in ["zeta 2", "dirichlet 3", "holo", "mystery 5", ""] {
            let err = build_source(bad, &c).unwrap_err().to_string();
            assert!(err.contains("descriptor") || err.contains("source"), "{bad}: {err}");
        }
        assert!(build_sources(&[], &c).is_err());
    }

    #[test]
    fn reach_covers_the_evaluator_rule() {
        // evaluator: n_max = ceil(n_star * e^margin) + 32 at its own eps floor
        for (w, t) in [(12u32, 100.0f64), (16, 1e4)] {
            let a = (w as f64 / 2.0).hypot(t);
            let margin = 2.0 * (0.25 * (1e-8f64).recip().ln()).sqrt();
            let evaluator = (a / core::f64::consts::TAU * margin.exp()).ceil() as u64 + 64;
            assert!(gl2_reach(w, t, 1e-6) > evaluator);
        }
    }
}
