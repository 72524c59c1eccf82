//! Scoped-thread drivers around the core chunk primitives.
//!
//! Parallel output must be byte identical to the serial path: grid chunks
//! start on `RESYNC_BLOCK` multiples and share the total point count, and
//! the q-expansion passes split only the destination slice, so every output
//! element sees the same accumulation order regardless of worker count.

use anyhow::{Context, Result};
use reslab_core::coeffs::{sparse_product_chunk, CoefficientSource};
use reslab_core::leval::{fill_source_values, CriticalLineGrid, RESYNC_BLOCK};
use reslab_core::resonator::Resonator;
use reslab_core::C64;

/// Contiguous chunk bounds covering `0..n`, each starting on a multiple of
/// `align`. Returns at most `workers` chunks.
fn chunk_bounds(n: usize, workers: usize, align: usize) -> Vec<(usize, usize)> {
    let workers = workers.max(1);
    let blocks = n.div_ceil(align).max(1);
    let per = blocks.div_ceil(workers);
    let mut out = Vec::new();
    let mut lo = 0usize;
    while lo < n {
        let hi = (lo + per * align).min(n);
        out.push((lo, hi));
        lo = hi;
    }
    if out.is_empty() {
        out.push((0, 0));
    }
    out
}

/// Grid over [T, 2T] with the evaluator fills fanned across `workers`
/// threads. With one worker this is the serial build.
pub fn build_grid(
    sources: &[CoefficientSource],
    resonator: Option<&Resonator>,
    t_start: f64,
    spacing: f64,
    eps: f64,
    workers: usize,
) -> Result<CriticalLineGrid> {
    if workers <= 1 {
        return CriticalLineGrid::build(sources, resonator, t_start, spacing, eps)
            .context("grid build");
    }
    if !(t_start > 1.0) || !(spacing > 0.0) {
        anyhow::bail!("grid needs T > 1 and positive spacing");
    }
    let n_points = (t_start / spacing).floor() as usize + 1;
    let chunks = chunk_bounds(n_points, workers, RESYNC_BLOCK);
    let mut source_values: Vec<Vec<C64>> = Vec::with_capacity(sources.len());
    let mut err_bound = 0.0f64;
    for src in sources {
        let mut parts: Vec<(Vec<C64>, f64)> = Vec::with_capacity(chunks.len());
        std::thread::scope(|scope| -> Result<()> {
            let handles: Vec<_> = chunks
                .iter()
                .map(|&(lo, hi)| {
                    scope.spawn(move || {
                        fill_source_values(src, t_start, spacing, lo..hi, n_points, eps)
                    })
                })
                .collect();
            for h in handles {
                let part = h.join().expect("grid worker panicked")?;
                parts.push(part);
            }
            Ok(())
        })?;
        let mut vals = Vec::with_capacity(n_points);
        for (chunk, eb) in parts {
            vals.extend_from_slice(&chunk);
            err_bound = err_bound.max(eb);
        }
        source_values.push(vals);
    }
    let r_values = match resonator {
        Some(r) => r.eval_grid(t_start, spacing, n_points),
        None => Vec::new(),
    };
    Ok(CriticalLineGrid { t_start, spacing, n_points, source_values, r_values, err_bound })
}

/// Holomorphic eigenvalue source with the series multiplications fanned
/// across `workers` threads.
pub fn gl2_source(weight: u32, p_max: u64, workers: usize) -> Result<CoefficientSource> {
    let workers = workers.max(1);
    let src = CoefficientSource::gl2_holomorphic_with(weight, p_max, &mut |src, sparse, dst| {
        if workers == 1 || dst.len() < 4 * RESYNC_BLOCK {
            sparse_product_chunk(src, sparse, 0, dst.len(), dst);
            return;
        }
        let n = dst.len();
        let chunks = chunk_bounds(n, workers, RESYNC_BLOCK);
        std::thread::scope(|scope| {
            let mut rest = dst;
            let mut handles = Vec::with_capacity(chunks.len());
            for &(lo, hi) in &chunks {
                let (head, tail) = rest.split_at_mut(hi - lo);
                rest = tail;
                handles.push(scope.spawn(move || sparse_product_chunk(src, sparse, lo, hi, head)));
            }
            for h in handles {
                h.join().expect("series worker panicked");
            }
        });
    })?;
    Ok(src)
}

#[cfg(test)]
mod tests {
    use super::*;
    use reslab_core::arith::PrimeTable;

    #[test]
    fn chunking_covers_and_aligns() {
        for (n, w) in [(1usize, 4usize), (1024, 2), (5000, 3), (100_000, 7)] {
            let chunks = chunk_bounds(n, w, RESYNC_BLOCK);
            assert!(chunks.len() <= w);
            assert_eq!(chunks.first().unwrap().0, 0);
            assert_eq!(chunks.last().unwrap().1, n);
            for pair in chunks.windows(2) {
                assert_eq!(pair[0].1, pair[1].0);
                assert_eq!(pair[1].0 % RESYNC_BLOCK, 0);
            }
        }
    }

    #[test]
    fn parallel_grid_matches_serial_exactly() {
        let chi = reslab_core::arith::characters_mod(3)
            .unwrap()
            .into_iter()
            .find(|c| !c.is_principal())
            .unwrap();
        let sources =
            vec![CoefficientSource::zeta(), CoefficientSource::dirichlet(chi).unwrap()];
        // T chosen so n_points = 3001 spans three chunks at two workers
        let serial = CriticalLineGrid::build(&sources, None, 150.0, 0.05, 1e-8).unwrap();
        for workers in [2usize, 5] {
            let par = build_grid(&sources, None, 150.0, 0.05, 1e-8, workers).unwrap();
            assert_eq!(par.n_points, serial.n_points);
            assert_eq!(par.err_bound, serial.err_bound);
            for (a, b) in par.source_values.iter().zip(&serial.source_values) {
                assert_eq!(a, b, "parallel fill must be bit identical");
            }
        }
    }

    #[test]
    fn parallel_series_matches_serial_exactly() {
        let serial = CoefficientSource::gl2_holomorphic(12, 20_000).unwrap();
        let par = gl2_source(12, 20_000, 3).unwrap();
        let table = PrimeTable::sieve(20_000, None).unwrap();
        for &p in table.primes() {
            assert_eq!(par.a_p(p as u64), serial.a_p(p as u64), "p = {p}");
        }
    }
}
