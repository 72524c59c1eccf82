//! The experiment pipelines behind the subcommands.
//!
//! Every runner reads one config, produces one deterministic report plus
//! CSV artifacts, and collects hard assertion failures separately from
//! warnings: a hard failure is a violated identity or bound that holds by
//! algebra, not a measured ratio drifting from its asymptotic prediction.

use std::path::Path;

use anyhow::{bail, Context, Result};
use reslab_core::arith::PrimeTable;
use reslab_core::coeffs::{
    fourth_moment_scan, selberg_scan, window_sum, CoefficientSource, CombinedCoefficients,
};
use reslab_core::families::{
    modq_mean_square, modq_search, quad_small_search, FamilyResonatorSpec, FamilyRun,
};
use reslab_core::harper::{
    chandee_majorant, exceptional_bound, exceptional_measure, prime_power_reduction_check,
    taylor_bound, HarperBlocks, HarperLadder,
};
use reslab_core::leval::CriticalLineGrid;
use reslab_core::moments::{
    compute_v, detect_simultaneous, gl2_diagonal_product, lower_bound_product, predicted_exponent,
    predicted_threshold, upper_bound_product_single, weighted_quadrature_moment, ExponentSetup,
    Integrand, QuadratureValue, SmoothWeight,
};
use reslab_core::resonator::{Resonator, ResonatorSpec};
use reslab_core::C64;

use crate::config::Config;
use crate::csvio::{fmt_f64, CsvTable};
use crate::parallel;
use crate::report::{o1_disclosure, Block, Report, Value};
use crate::sources::{build_sources, gl2_reach, SourceContext};

pub const TOOLS: &[&str] = &[
    "t-search",
    "moments",
    "diagnostics",
    "harper",
    "family-modq",
    "family-quad",
    "dump-resonator",
];

pub struct RunContext<'a> {
    pub config: &'a Config,
    /// Directory relative table paths resolve against.
    pub config_dir: &'a Path,
    pub workers: usize,
    /// Byte cap for prime sieves, from RESLAB_CAP_MB.
    pub cap_bytes: Option<u64>,
}

pub struct RunOutput {
    pub report: Report,
    /// (file name, contents) pairs written next to the report.
    pub artifacts: Vec<(String, String)>,
    pub hard_failures: Vec<String>,
}

pub fn run(tool: &str, ctx: &RunContext) -> Result<RunOutput> {
    match tool {
        "t-search" => t_search(ctx),
        "moments" => moments_run(ctx),
        "diagnostics" => diagnostics(ctx),
        "harper" => harper_run(ctx),
        "family-modq" => family_modq(ctx),
        "family-quad" => family_quad(ctx),
        "dump-resonator" => dump_resonator(ctx),
        other => bail!("unknown subcommand {other:?}; expected one of {TOOLS:?}"),
    }
}

// ---- shared plumbing -------------------------------------------------------

const RESONATOR_KEYS: &[&str] = &[
    "resonator.x",
    "resonator.script_l",
    "resonator.delta",
    "resonator.eps",
    "resonator.window_lo",
    "resonator.window_hi",
    "resonator.max_members",
];

fn sieve_to(limit: f64, cap: Option<u64>) -> Result<PrimeTable> {
    let lim = limit.ceil().max(3.0);
    if lim >= u32::MAX as f64 {
        bail!("prime table limit {lim:e} exceeds the sieve range");
    }
    Ok(PrimeTable::sieve(lim as u64, cap)?)
}

fn resonator_spec(cfg: &Config, m: usize, t_hint: Option<f64>) -> Result<ResonatorSpec> {
    let mut spec = match (cfg.f64("resonator.x")?, cfg.f64("resonator.delta")?) {
        (Some(_), Some(_)) => bail!("give resonator.x or resonator.delta, not both"),
        (Some(x), None) => {
            let script_l = match cfg.f64("resonator.script_l")? {
                Some(l) => l,
                None => {
                    if x.ln().ln() <= 0.0 {
                        bail!("X = {x} too small to derive a weight scale; set resonator.script_l");
                    }
                    (x.ln() * x.ln().ln() / m as f64).sqrt()
                }
            };
            ResonatorSpec::explicit(x, script_l)?
        }
        (None, Some(delta)) => {
            if cfg.get("resonator.script_l").is_some() {
                bail!("resonator.script_l override requires resonator.x");
            }
            let t = t_hint.context("resonator.delta needs run.t to set X = T^delta")?;
            ResonatorSpec::from_t(t, delta, m)?
        }
        (None, None) => bail!("resonator needs resonator.x or resonator.delta"),
    };
    match (cfg.f64("resonator.window_lo")?, cfg.f64("resonator.window_hi")?) {
        (Some(lo), Some(hi)) => spec = spec.with_window(lo, hi)?,
        (None, None) => {}
        _ => bail!("window override needs both resonator.window_lo and resonator.window_hi"),
    }
    if let Some(eps) = cfg.f64("resonator.eps")? {
        spec = spec.with_eps(eps)?;
    }
    Ok(spec)
}

fn build_resonator(
    cfg: &Config,
    combined: &CombinedCoefficients,
    cap: Option<u64>,
    t_hint: Option<f64>,
) -> Result<(Resonator, PrimeTable)> {
    let spec = resonator_spec(cfg, combined.m(), t_hint)?;
    let max_members = cfg.u64_or("resonator.max_members", 1 << 20)? as usize;
    let table = sieve_to(spec.window_bounds().1, cap)?;
    let res = Resonator::build(spec, combined, &table, max_members)?;
    Ok((res, table))
}

fn resonator_block(res: &Resonator, rep: &mut Report) -> Block {
    let s = res.smallness_report();
    let mut b = Block::new("resonator");
    b.float("x", s.x)
        .float("script_l", s.script_l)
        .float("window_filter_eps", s.eps)
        .bool("window_filter_eps_is_default", s.eps_is_default)
        .float("window_lo", s.window_lo)
        .float("window_hi", s.window_hi)
        .uint("window_prime_count", s.prime_count as u64)
        .uint("support_len", s.support_len as u64)
        .float("max_r_sq", s.max_r_sq)
        .float("support_mass", s.l2_norm * s.l2_norm)
        .float("euler_mass", s.euler_norm * s.euler_norm)
        .float("rankin_tail_ratio", s.tail_ratio);
    if s.eps_is_default {
        rep.warn("window filter eps left at its default 0.1; set resonator.eps to override");
    }
    b
}

fn grid_block(grid: &CriticalLineGrid, sources: &[CoefficientSource]) -> Block {
    let mut b = Block::new("grid");
    b.float("t_start", grid.t_start)
        .float("t_end", grid.point(grid.len().saturating_sub(1)))
        .float("spacing", grid.spacing)
        .uint("n_points", grid.len() as u64)
        .float("evaluator_err_bound", grid.err_bound);
    for (i, src) in sources.iter().enumerate() {
        b.str(&format!("source_{}", i + 1), src.label());
    }
    b
}

fn note_quadrature(rep: &mut Report, name: &str, q: &QuadratureValue) {
    if q.flagged {
        rep.warn(format!(
            "moments: quadrature of {name} carries a {:.2}% grid estimate (above 5%); \
             refine run.spacing",
            q.rel_estimate * 100.0
        ));
    }
}

fn exponent_block(name: &str, setup: ExponentSetup) -> Result<Block> {
    let r = predicted_exponent(setup)?;
    let mut b = Block::new(name);
    b.float("c_main", r.c_main);
    if let Some(alt) = r.c_alt {
        b.float("c_alt", alt);
    }
    b.bool("derivations_disagree", r.discrepancy).str("note", &r.note);
    Ok(b)
}

fn grid_csv(grid: &CriticalLineGrid, stride: usize) -> String {
    let m = grid.source_values.len();
    let mut names: Vec<String> = vec!["t".into()];
    for i in 1..=m {
        names.push(format!("re_{i}"));
        names.push(format!("im_{i}"));
    }
    let with_r = !grid.r_values.is_empty();
    if with_r {
        names.push("re_R".into());
        names.push("im_R".into());
    }
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut csv = CsvTable::new(&header);
    let stride = stride.max(1);
    let mut idx = 0;
    while idx < grid.len() {
        let mut row = Vec::with_capacity(names.len());
        row.push(fmt_f64(grid.point(idx)));
        for vals in &grid.source_values {
            row.push(fmt_f64(vals[idx].re));
            row.push(fmt_f64(vals[idx].im));
        }
        if with_r {
            row.push(fmt_f64(grid.r_values[idx].re));
            row.push(fmt_f64(grid.r_values[idx].im));
        }
        csv.row(&row);
        idx += stride;
    }
    csv.into_text()
}

fn family_csv(run: &FamilyRun) -> String {
    let mut csv = CsvTable::new(&[
        "member_id",
        "L_f_re",
        "L_f_im",
        "L_g_re",
        "L_g_im",
        "weight",
        "selected_flag",
    ]);
    for m in &run.members {
        csv.row(&[
            m.id.to_string(),
            fmt_f64(m.l_f.re),
            fmt_f64(m.l_f.im),
            fmt_f64(m.l_g.re),
            fmt_f64(m.l_g.im),
            fmt_f64(m.weight),
            (m.selected as u8).to_string(),
        ]);
    }
    csv.into_text()
}

fn finish(mut rep: Report, hard: Vec<String>, artifacts: Vec<(String, String)>) -> RunOutput {
    o1_disclosure(&mut rep);
    let mut b = Block::new("hard_assertions");
    b.uint("failed_count", hard.len() as u64).bool("passed", hard.is_empty());
    for (i, h) in hard.iter().enumerate() {
        b.str(&format!("failed_{}", i + 1), h);
    }
    rep.block(b);
    RunOutput { report: rep, artifacts, hard_failures: hard }
}

// ---- t-search --------------------------------------------------------------

fn t_search(ctx: &RunContext) -> Result<RunOutput> {
    let cfg = ctx.config;
    let mut keys = vec![
        "run.t",
        "run.spacing",
        "run.eval_eps",
        "run.dump_grid",
        "run.grid_stride",
        "run.workers",
    ];
    keys.extend_from_slice(RESONATOR_KEYS);
    cfg.check_known(&keys)?;

    let t = cfg.require_f64("run.t")?;
    let spacing = cfg.f64_or("run.spacing", CriticalLineGrid::default_spacing(t))?;
    let eval_eps = cfg.f64_or("run.eval_eps", 1e-6)?;
    let sctx = SourceContext {
        base_dir: ctx.config_dir,
        holo_reach: gl2_reach(26, 2.0 * t + 1.0, eval_eps),
        workers: ctx.workers,
    };
    let sources = build_sources(&cfg.source_list()?, &sctx)?;
    let combined = CombinedCoefficients::new(sources.clone())?;
    let m = combined.m();
    let (res, _table) = build_resonator(cfg, &combined, ctx.cap_bytes, Some(t))?;
    let grid = parallel::build_grid(&sources, Some(&res), t, spacing, eval_eps, ctx.workers)?;

    let mut rep = Report::new("t-search", cfg.raw());
    let hard = Vec::new();
    rep.block(grid_block(&grid, &sources));
    let res_block = resonator_block(&res, &mut rep);
    rep.block(res_block);

    let one = weighted_quadrature_moment(&grid, Integrand::One, SmoothWeight::Indicator)?;
    note_quadrature(&mut rep, "the resonator mass", &one);
    let prod = weighted_quadrature_moment(&grid, Integrand::Product, SmoothWeight::Indicator)?;
    note_quadrature(&mut rep, "the product moment", &prod);
    let mut excl: Vec<f64> = Vec::new();
    let mut measured = Block::new("measured");
    measured
        .float("measured_resonator_mass", one.value)
        .float("measured_product_moment", prod.value);
    for i in 0..m {
        let e = weighted_quadrature_moment(&grid, Integrand::Excluded(i), SmoothWeight::Indicator)?;
        note_quadrature(&mut rep, &format!("excluded moment {}", i + 1), &e);
        measured.float(&format!("measured_excluded_moment_{}", i + 1), e.value);
        excl.push(e.value);
    }
    rep.block(measured);

    let mut predicted = Block::new("predicted");
    let l2 = res.l2_norm();
    predicted
        .float("predicted_resonator_mass", l2 * l2)
        .float("predicted_product_moment_main_form", lower_bound_product(&res));
    match predicted_threshold(m, res.spec().x()) {
        Ok(v) => {
            predicted.float("predicted_threshold", v);
        }
        Err(e) => rep.warn(format!("moments: threshold prediction unavailable: {e}")),
    }
    rep.block(predicted);

    let v = compute_v(prod.value, &excl)?;
    rep.scalar("V", Value::Float(v));

    let mut detection = Block::new("detection");
    if v > 0.0 {
        let hits = detect_simultaneous(&grid, v)?;
        detection.uint("detected_count", hits.len() as u64);
        let shown: Vec<f64> = hits.iter().take(256).map(|d| d.t).collect();
        detection.float_list("detected_t", &shown);
        detection.bool("detected_t_truncated", hits.len() > shown.len());
        if let Some(top) = hits
            .iter()
            .max_by(|a, b| a.min_sq.partial_cmp(&b.min_sq).unwrap())
        {
            detection
                .float("strongest_detection_t", top.t)
                .float("strongest_detection_min_sq", top.min_sq);
        }
    } else {
        detection.uint("detected_count", 0);
        detection.float_list("detected_t", &[]);
        detection.bool("detected_t_truncated", false);
        rep.warn("moments: V is not positive; detection skipped".to_string());
    }

    // extremal point of the resonance integrand itself
    let mut best_idx = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    for idx in 0..grid.len() {
        let mut v = grid.r_values[idx].norm_sqr();
        for vals in &grid.source_values {
            v *= vals[idx].norm_sqr();
        }
        if v > best_val {
            best_val = v;
            best_idx = idx;
        }
    }
    detection
        .float("best_t", grid.point(best_idx))
        .float("best_weighted_product", best_val);
    let mut min_abs = f64::INFINITY;
    for (i, vals) in grid.source_values.iter().enumerate() {
        let a = vals[best_idx].norm();
        detection.float(&format!("best_abs_{}", i + 1), a);
        min_abs = min_abs.min(a);
    }
    detection.float("best_min_abs", min_abs);
    rep.block(detection);

    let mut exps = Block::new("exponents");
    if m == 2 && combined.total_degree() == 2 {
        exps.block(exponent_block("pair_min", ExponentSetup::DirichletPair)?);
        exps.block(exponent_block("pair_product", ExponentSetup::ProductComparison)?);
    }
    if sources.iter().any(|s| s.degree() == 2) {
        exps.block(exponent_block(
            "with_degree_two",
            ExponentSetup::WithGl2 { theta: combined.max_theta() },
        )?);
    }
    rep.block(exps);

    let mut artifacts = Vec::new();
    if cfg.bool_or("run.dump_grid", false)? {
        let stride = cfg.u64_or("run.grid_stride", 1)? as usize;
        artifacts.push(("grid.csv".to_string(), grid_csv(&grid, stride)));
    }
    Ok(finish(rep, hard, artifacts))
}

// ---- moments ---------------------------------------------------------------

fn moments_run(ctx: &RunContext) -> Result<RunOutput> {
    let cfg = ctx.config;
    let mut keys = vec!["run.t", "run.spacing", "run.eval_eps", "run.weight", "run.workers"];
    keys.extend_from_slice(RESONATOR_KEYS);
    cfg.check_known(&keys)?;

    let t = cfg.require_f64("run.t")?;
    let spacing = cfg.f64_or("run.spacing", CriticalLineGrid::default_spacing(t))?;
    let eval_eps = cfg.f64_or("run.eval_eps", 1e-6)?;
    let weight = match cfg.get("run.weight") {
        None | Some("indicator") => SmoothWeight::Indicator,
        Some("bump") => SmoothWeight::Bump,
        Some(w) => bail!("run.weight must be indicator or bump, got {w:?}"),
    };
    let weight_mass = weight_mass(weight);

    let sctx = SourceContext {
        base_dir: ctx.config_dir,
        holo_reach: gl2_reach(26, 2.0 * t + 1.0, eval_eps),
        workers: ctx.workers,
    };
    let sources = build_sources(&cfg.source_list()?, &sctx)?;
    let combined = CombinedCoefficients::new(sources.clone())?;
    let m = combined.m();
    let (res, _table) = build_resonator(cfg, &combined, ctx.cap_bytes, Some(t))?;
    let grid = parallel::build_grid(&sources, Some(&res), t, spacing, eval_eps, ctx.workers)?;

    let mut rep = Report::new("moments", cfg.raw());
    let mut hard = Vec::new();
    rep.block(grid_block(&grid, &sources));
    let res_block = resonator_block(&res, &mut rep);
    rep.block(res_block);
    rep.scalar(
        "weight",
        Value::Str(match weight {
            SmoothWeight::Indicator => "indicator".into(),
            SmoothWeight::Bump => "bump".into(),
        }),
    );
    rep.scalar("weight_mass", Value::Float(weight_mass));

    let mut measured = Block::new("measured");
    let mut predicted = Block::new("predicted");

    let one = weighted_quadrature_moment(&grid, Integrand::One, weight)?;
    note_quadrature(&mut rep, "the resonator mass", &one);
    let l2 = res.l2_norm();
    measured
        .float("measured_resonator_mass", one.value)
        .float("measured_resonator_mass_rel_estimate", one.rel_estimate);
    predicted.float("predicted_resonator_mass", l2 * l2 * weight_mass);
    if one.value < 0.0 {
        hard.push(format!(
            "moments: mean of |R|^2 came out negative ({}); quadrature of a nonnegative \
             integrand must be nonnegative",
            one.value
        ));
    }

    let mut excl = Vec::new();
    for i in 0..m {
        let s = weighted_quadrature_moment(&grid, Integrand::Single(i), weight)?;
        note_quadrature(&mut rep, &format!("single moment {}", i + 1), &s);
        measured.float(&format!("measured_single_moment_{}", i + 1), s.value);
        let upper = upper_bound_product_single(&res, &combined, i)?;
        predicted.float(&format!("predicted_single_moment_{}_upper", i + 1), upper * weight_mass);
        if sources[i].degree() == 2 {
            let diag = gl2_diagonal_product(&res, &sources[i])?;
            predicted
                .float(&format!("predicted_single_moment_{}_diagonal", i + 1), diag * weight_mass);
        }
        let e = weighted_quadrature_moment(&grid, Integrand::Excluded(i), weight)?;
        note_quadrature(&mut rep, &format!("excluded moment {}", i + 1), &e);
        measured.float(&format!("measured_excluded_moment_{}", i + 1), e.value);
        excl.push(e.value);
    }

    let prod = weighted_quadrature_moment(&grid, Integrand::Product, weight)?;
    note_quadrature(&mut rep, "the product moment", &prod);
    measured.float("measured_product_moment", prod.value);
    predicted
        .float("predicted_product_moment_main_form", lower_bound_product(&res) * weight_mass);
    match predicted_threshold(m, res.spec().x()) {
        Ok(v) => {
            predicted.float("predicted_threshold", v);
        }
        Err(e) => rep.warn(format!("moments: threshold prediction unavailable: {e}")),
    }
    rep.block(measured);
    rep.block(predicted);
    let v = compute_v(prod.value, &excl)?;
    rep.scalar("V", Value::Float(v));

    let mut exps = Block::new("exponents");
    exps.block(exponent_block("pair_min", ExponentSetup::DirichletPair)?);
    exps.block(exponent_block("pair_product", ExponentSetup::ProductComparison)?);
    exps.block(exponent_block(
        "with_degree_two",
        ExponentSetup::WithGl2 { theta: combined.max_theta() },
    )?);
    exps.block(exponent_block("twist_family_min", ExponentSetup::TwistFamilyMin)?);
    exps.block(exponent_block("twist_family_product", ExponentSetup::TwistFamilyProduct)?);
    rep.block(exps);

    Ok(finish(rep, hard, Vec::new()))
}

/// integral of the weight over u in [1, 2], fixed fine trapezoid
fn weight_mass(weight: SmoothWeight) -> f64 {
    match weight {
        SmoothWeight::Indicator => 1.0,
        SmoothWeight::Bump => {
            let n = 20_000usize;
            let h = 1.0 / n as f64;
            let mut acc = 0.0;
            for k in 0..=n {
                let u = 1.0 + k as f64 * h;
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                acc += w * weight.value(u);
            }
            acc * h
        }
    }
}

// ---- diagnostics -----------------------------------------------------------

fn diagnostics(ctx: &RunContext) -> Result<RunOutput> {
    let cfg = ctx.config;
    let mut keys = vec![
        "run.x_min",
        "run.x_max",
        "run.checkpoints",
        "run.workers",
        "harper.t",
        "harper.script_l",
        "harper.c_m",
        "harper.eps",
        "harper.samples",
        "harper.threshold",
    ];
    keys.extend_from_slice(RESONATOR_KEYS);
    cfg.check_known(&keys)?;

    let x_min = cfg.f64_or("run.x_min", 1e2)?;
    let x_max = cfg.f64_or("run.x_max", 1e6)?;
    if !(x_min >= 10.0 && x_max > x_min) {
        bail!("scan range needs 10 <= run.x_min < run.x_max, got [{x_min}, {x_max}]");
    }
    let n_checkpoints = cfg.u64_or("run.checkpoints", 25)?.max(2) as usize;
    let sctx = SourceContext {
        base_dir: ctx.config_dir,
        holo_reach: x_max.ceil() as u64 + 8,
        workers: ctx.workers,
    };
    let sources = build_sources(&cfg.source_list()?, &sctx)?;
    let table = sieve_to(x_max, ctx.cap_bytes)?;
    let checkpoints: Vec<f64> = (0..n_checkpoints)
        .map(|k| {
            // exact endpoints; exp(ln x) can land one ulp past the table
            if k == 0 {
                x_min
            } else if k == n_checkpoints - 1 {
                x_max
            } else {
                let f = k as f64 / (n_checkpoints - 1) as f64;
                (x_min.ln() + f * (x_max.ln() - x_min.ln())).exp()
            }
        })
        .collect();

    let mut rep = Report::new("diagnostics", cfg.raw());
    let mut hard = Vec::new();
    let mut artifacts = Vec::new();
    let mut scan_meta = Block::new("scan");
    scan_meta
        .float("x_min", x_min)
        .float("x_max", x_max)
        .uint("checkpoints", n_checkpoints as u64);
    for (i, src) in sources.iter().enumerate() {
        scan_meta.str(&format!("source_{}", i + 1), src.label());
    }
    rep.block(scan_meta);

    let mut orth = Block::new("prime_sums");
    for i in 0..sources.len() {
        for j in i..sources.len() {
            let scan = selberg_scan(&sources[i], &sources[j], &table, &checkpoints)?;
            let name = format!("pair_{}_{}", i + 1, j + 1);
            let diagonal = sources[i].label() == sources[j].label();
            let mut b = Block::new(&name);
            b.str("kind", if diagonal { "diagonal" } else { "off_diagonal" });
            let re: Vec<f64> = scan.iter().map(|(_, s)| s.re).collect();
            let max_abs = scan.iter().map(|(_, s)| s.norm()).fold(0.0f64, f64::max);
            if diagonal {
                let lo = re.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = re.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                b.float("measured_drift", hi - lo);
            }
            b.float("measured_max_abs", max_abs)
                .float("final_re", scan.last().unwrap().1.re)
                .float("final_im", scan.last().unwrap().1.im);
            orth.block(b);
            let mut csv = CsvTable::new(&["x", "re_S", "im_S"]);
            for (x, s) in &scan {
                csv.row(&[fmt_f64(*x), fmt_f64(s.re), fmt_f64(s.im)]);
            }
            artifacts.push((format!("selberg_{}_{}.csv", i + 1, j + 1), csv.into_text()));
        }
    }
    rep.block(orth);

    let mut fourth = Block::new("fourth_moment");
    for (i, src) in sources.iter().enumerate() {
        if src.degree() > 3 {
            rep.warn(format!(
                "diagnostics: fourth-moment scan skipped for degree-{} source {}",
                src.degree(),
                src.label()
            ));
            continue;
        }
        let scan = fourth_moment_scan(src, &table, &checkpoints)?;
        let (x_last, sum_last, ratio_last) = *scan.last().unwrap();
        let mut b = Block::new(&format!("source_{}", i + 1));
        b.float("final_x", x_last)
            .float("measured_sum", sum_last)
            .float("measured_ratio_to_loglog", ratio_last);
        fourth.block(b);
        let mut csv = CsvTable::new(&["x", "sum", "ratio"]);
        for (x, s, r) in &scan {
            csv.row(&[fmt_f64(*x), fmt_f64(*s), fmt_f64(*r)]);
        }
        artifacts.push((format!("fourth_{}.csv", i + 1), csv.into_text()));
    }
    rep.block(fourth);

    if cfg.get("resonator.x").is_some() || cfg.get("resonator.delta").is_some() {
        let combined = CombinedCoefficients::new(sources.clone())?;
        let (res, rtable) = build_resonator(cfg, &combined, ctx.cap_bytes, None)?;
        let res_block = resonator_block(&res, &mut rep);
        rep.block(res_block);
        let (lo, hi) = res.spec().window_bounds();
        let mut wins = Block::new("window_sums");
        for i in 0..sources.len() {
            for j in i..sources.len() {
                let s = window_sum(&sources[i], &sources[j], &rtable, lo, hi)?;
                let mut b = Block::new(&format!("pair_{}_{}", i + 1, j + 1));
                b.float("re", s.re).float("im", s.im);
                wins.block(b);
            }
        }
        rep.block(wins);
    }

    if cfg.get("harper.t").is_some() {
        let t = cfg.require_f64("harper.t")?;
        let script_l = cfg.require_f64("harper.script_l")?;
        let c_m = cfg.f64_or("harper.c_m", 1.0)?;
        let eps = cfg.f64_or("harper.eps", 0.1)?;
        let samples = cfg.u64_or("harper.samples", 256)?.max(16) as usize;
        let ladder = HarperLadder::build(t, script_l, c_m, eps)?;
        let j = ladder.j_top();
        let htable = sieve_to(ladder.z(j as isize), ctx.cap_bytes)?;
        let blocks = HarperBlocks::new(&ladder, &sources[0], &htable);
        let mut b = Block::new("harper_check");
        b.uint("ladder_depth", j as u64)
            .float("length_certificate", ladder.length_certificate());
        if ladder.length_certificate() > 0.5 {
            hard.push(format!(
                "harper: ladder length certificate {} exceeds 1/2",
                ladder.length_certificate()
            ));
        }
        let spacing = t / (samples - 1) as f64;
        let values = blocks.block_poly_grid(0, j, t, spacing, samples)?;
        let thr = cfg.f64_or("harper.threshold", ladder.ell(0))?;
        let k = ladder.moment_k(0);
        let measure = exceptional_measure(&values, thr)?;
        let bound = exceptional_bound(k, blocks.block_square_sum(0)?, thr)?;
        b.float("threshold_used", thr)
            .uint("moment_order", k as u64)
            .float("measured_exceptional_fraction", measure)
            .float("predicted_exceptional_bound", bound);
        if bound >= 1.0 {
            rep.warn("harper: exceptional bound is vacuous at this scale".to_string());
        } else if measure > bound {
            rep.warn(format!(
                "harper: sampled exceptional fraction {measure} exceeds the moment bound \
                 {bound}; sampling error or scale too small"
            ));
        }
        let mut applied = 0u64;
        let mut max_rel = 0.0f64;
        let step = (samples / 32).max(1);
        let mut expansion_ok = true;
        for idx in (0..samples).step_by(step) {
            let tt = t + spacing * idx as f64;
            match blocks.taylor_check(0, j, tt) {
                Ok(Some(rel)) => {
                    applied += 1;
                    max_rel = max_rel.max(rel);
                }
                Ok(None) => {}
                Err(e) => {
                    rep.warn(format!("harper: expansion infeasible for the base block: {e}"));
                    expansion_ok = false;
                    break;
                }
            }
        }
        b.uint("taylor_points_applied", applied)
            .float("taylor_max_rel_err", max_rel)
            .float("taylor_bound", taylor_bound(ladder.ell(0)));
        if expansion_ok && applied > 0 && max_rel > taylor_bound(ladder.ell(0)) {
            hard.push(format!(
                "harper: Taylor collapse gap {max_rel} exceeds its bound {} on the base block",
                taylor_bound(ladder.ell(0))
            ));
        }
        rep.block(b);
    }

    Ok(finish(rep, hard, artifacts))
}

// ---- harper ----------------------------------------------------------------

fn harper_run(ctx: &RunContext) -> Result<RunOutput> {
    let cfg = ctx.config;
    cfg.check_known(&[
        "run.t",
        "run.script_l",
        "run.x",
        "run.c_m",
        "run.eps",
        "run.samples",
        "run.threshold",
        "run.csv_rows",
        "run.majorant_points",
        "run.workers",
    ])?;

    let t = cfg.require_f64("run.t")?;
    let script_l = match (cfg.f64("run.script_l")?, cfg.f64("run.x")?) {
        (Some(_), Some(_)) => bail!("give run.script_l or run.x, not both"),
        (Some(l), None) => l,
        (None, Some(x)) => {
            if x.ln().ln() <= 0.0 {
                bail!("X = {x} too small to derive a weight scale");
            }
            (x.ln() * x.ln().ln()).sqrt()
        }
        (None, None) => bail!("harper needs run.script_l or run.x"),
    };
    let c_m = cfg.f64_or("run.c_m", 1.0)?;
    let eps = cfg.f64_or("run.eps", 0.1)?;
    let samples = cfg.u64_or("run.samples", 1024)?.max(16) as usize;

    let sctx = SourceContext { base_dir: ctx.config_dir, holo_reach: 0, workers: ctx.workers };
    let descs = cfg.source_list()?;
    if descs.len() != 1 {
        bail!("harper runs on exactly one source, got {}", descs.len());
    }
    let ladder = HarperLadder::build(t, script_l, c_m, eps)?;
    let j = ladder.j_top();
    let z_top = ladder.z(j as isize);
    let sctx = SourceContext { holo_reach: z_top.ceil() as u64 + 8, ..sctx };
    let src = &build_sources(&descs, &sctx)?[0];
    let table = sieve_to(z_top, ctx.cap_bytes)?;
    let blocks = HarperBlocks::new(&ladder, src, &table);

    let mut rep = Report::new("harper", cfg.raw());
    let mut hard = Vec::new();
    let mut ladder_block = Block::new("ladder");
    ladder_block
        .float("t", t)
        .float("script_l", script_l)
        .float("c_m", c_m)
        .float("filter_eps", eps)
        .uint("depth", j as u64)
        .float("z_top", z_top)
        .float("length_certificate", ladder.length_certificate())
        .str("source", src.label())
        .str(
            "threshold_note",
            "the exceptional threshold for the base block is run.threshold when set, \
             otherwise ell_0; deeper blocks use their own ell_i",
        );
    if ladder.length_certificate() > 0.5 {
        hard.push(format!(
            "harper: ladder length certificate {} exceeds 1/2",
            ladder.length_certificate()
        ));
    }
    rep.block(ladder_block);

    let spacing = t / (samples - 1) as f64;
    let tay_step = (samples / 64).max(1);
    let mut per_block = Block::new("blocks");
    let mut csv_values: Option<Vec<C64>> = None;
    for i in 0..=j {
        let mut b = Block::new(&format!("block_{i}"));
        let square_sum = blocks.block_square_sum(i)?;
        let variance = blocks.block_variance(i, j)?;
        let ell = ladder.ell(i);
        let k = ladder.moment_k(i);
        b.float("z", ladder.z(i as isize))
            .float("ell", ell)
            .float("r_len", ladder.r_len(i))
            .uint("moment_order", k as u64)
            .float("square_sum", square_sum)
            .float("variance", variance);
        let values = blocks.block_poly_grid(i, j, t, spacing, samples)?;
        if i == 0 {
            csv_values = Some(values.clone());
        }

        let thr = if i == 0 { cfg.f64_or("run.threshold", ell)? } else { ell };
        let measure = exceptional_measure(&values, thr)?;
        let bound = exceptional_bound(k, square_sum, thr)?;
        b.float("threshold_used", thr)
            .float("measured_exceptional_fraction", measure)
            .float("predicted_exceptional_bound", bound)
            .bool("bound_vacuous", bound >= 1.0);
        if bound < 1.0 && measure > bound {
            rep.warn(format!(
                "harper: block {i} sampled exceptional fraction {measure} exceeds its \
                 moment bound {bound}; sampling error or scale too small"
            ));
        }

        match blocks.moment_inequality_check(i, j, &values, k) {
            Ok((lhs, rhs)) => {
                b.float("measured_moment_2k", lhs).float("predicted_moment_2k_bound", rhs);
                if lhs > rhs {
                    rep.warn(format!(
                        "harper: block {i} empirical 2k-th moment {lhs} exceeds the \
                         diagonal bound {rhs}; off-diagonal terms visible at this scale"
                    ));
                }
            }
            Err(e) => rep.warn(format!("harper: block {i} moment check skipped: {e}")),
        }

        let mut applied = 0u64;
        let mut skipped_precondition = 0u64;
        let mut max_rel = 0.0f64;
        let mut infeasible = false;
        for idx in (0..samples).step_by(tay_step) {
            let tt = t + spacing * idx as f64;
            match blocks.taylor_check(i, j, tt) {
                Ok(Some(rel)) => {
                    applied += 1;
                    max_rel = max_rel.max(rel);
                }
                Ok(None) => skipped_precondition += 1,
                Err(_) => {
                    infeasible = true;
                    break;
                }
            }
        }
        b.uint("taylor_points_applied", applied)
            .uint("taylor_points_above_ell", skipped_precondition)
            .bool("taylor_expansion_feasible", !infeasible)
            .float("taylor_max_rel_err", max_rel)
            .float("taylor_bound", taylor_bound(ell));
        if infeasible {
            rep.warn(format!(
                "harper: block {i} truncated-exponential expansion exceeds the term cap; \
                 Taylor audit skipped"
            ));
        } else if applied > 0 && max_rel > taylor_bound(ell) {
            hard.push(format!(
                "harper: block {i} Taylor collapse gap {max_rel} exceeds its bound {}",
                taylor_bound(ell)
            ));
        }
        per_block.block(b);
    }
    rep.block(per_block);

    let majorant_points = cfg.u64_or("run.majorant_points", 8)?.max(2) as usize;
    let mut maj = Block::new("majorant");
    maj.str(
        "note",
        "smoothed prime-power surrogate for log|L|; the additive O(1) of the underlying \
         inequality is not included",
    );
    for k in 0..majorant_points {
        let tt = t + t * k as f64 / (majorant_points - 1) as f64;
        let v = chandee_majorant(src, &table, tt, z_top, c_m, t)?;
        maj.float(&format!("value_at_{k}"), v);
    }
    if src.degree() <= 2 {
        let (tail, ratio) = prime_power_reduction_check(src, &table, z_top)?;
        maj.float("prime_power_tail", tail).float("prime_power_tail_over_loglog", ratio);
    }
    rep.block(maj);

    let mut artifacts = Vec::new();
    if let Some(values) = csv_values {
        let csv_rows = cfg.u64_or("run.csv_rows", 128)?.max(2) as usize;
        let mut csv = CsvTable::new(&["t", "re_P", "im_P", "abs_N_sq", "exp_2ReP", "rel_err"]);
        let step = (samples / csv_rows).max(1);
        let mut infeasible = false;
        for idx in (0..samples).step_by(step) {
            let tt = t + spacing * idx as f64;
            let p = values[idx];
            match blocks.truncated_exp(0, j, tt) {
                Ok(n) => {
                    let target = (2.0 * p.re).exp();
                    let rel = (target - n.norm_sqr()).abs() / target;
                    csv.row(&[
                        fmt_f64(tt),
                        fmt_f64(p.re),
                        fmt_f64(p.im),
                        fmt_f64(n.norm_sqr()),
                        fmt_f64(target),
                        fmt_f64(rel),
                    ]);
                }
                Err(_) => {
                    infeasible = true;
                    break;
                }
            }
        }
        if infeasible {
            rep.warn(
                "harper: base-block expansion exceeds the term cap; harper.csv holds the \
                 header only"
                    .to_string(),
            );
            csv = CsvTable::new(&["t", "re_P", "im_P", "abs_N_sq", "exp_2ReP", "rel_err"]);
        }
        artifacts.push(("harper.csv".to_string(), csv.into_text()));
    }

    Ok(finish(rep, hard, artifacts))
}

// ---- families --------------------------------------------------------------

fn family_spec(cfg: &Config, default_n: f64, quad: bool) -> Result<FamilyResonatorSpec> {
    let n = cfg.f64_or("family.n", default_n)?;
    let mut spec = if quad {
        FamilyResonatorSpec::quad_twist(n)?
    } else {
        FamilyResonatorSpec::mod_q(n)?
    };
    if let Some(a) = cfg.f64("family.a_omega")? {
        spec = spec.with_a_omega(a)?;
    }
    match (cfg.f64("family.window_lo")?, cfg.f64("family.window_hi")?) {
        (Some(lo), Some(hi)) => spec = spec.with_window(lo, hi)?,
        (None, None) => {}
        _ => bail!("window override needs both family.window_lo and family.window_hi"),
    }
    Ok(spec)
}

fn family_spec_block(spec: &FamilyResonatorSpec, run: &FamilyRun) -> Block {
    let mut b = Block::new("family");
    let (lo, hi) = spec.window();
    b.uint("size", run.size)
        .uint("members", run.members.len() as u64)
        .float("n_length", spec.n_length())
        .float("a_omega", spec.a_omega())
        .float("script_l", spec.script_l())
        .float("window_lo", lo)
        .float("window_hi", hi)
        .uint("window_prime_count", run.support.primes().len() as u64)
        .uint("support_len", run.support.elements().len() as u64)
        .float("diagonal_mass", run.support.diagonal_mass())
        .float("mean_weight", run.mean_weight);
    b
}

fn family_modq(ctx: &RunContext) -> Result<RunOutput> {
    let cfg = ctx.config;
    cfg.check_known(&[
        "run.q",
        "run.workers",
        "family.n",
        "family.a_omega",
        "family.window_lo",
        "family.window_hi",
    ])?;
    let q = cfg.require_u64("run.q")?;
    let spec = family_spec(cfg, q as f64, false)?;
    let sctx = SourceContext {
        base_dir: ctx.config_dir,
        holo_reach: ((q as f64) * 75.0 / core::f64::consts::TAU).ceil() as u64 + 512,
        workers: ctx.workers,
    };
    let descs = cfg.source_list()?;
    if descs.len() != 2 {
        bail!("family searches take exactly two sources, got {}", descs.len());
    }
    let sources = build_sources(&descs, &sctx)?;
    let table = sieve_to(spec.window().1.max(q as f64), ctx.cap_bytes)?;
    let run = modq_search(&sources[0], &sources[1], q, &spec, &table)?;

    let mut rep = Report::new("family-modq", cfg.raw());
    let mut hard = Vec::new();
    rep.block(family_spec_block(&spec, &run));
    rep.scalar("source_f", Value::Str(sources[0].label().into()));
    rep.scalar("source_g", Value::Str(sources[1].label().into()));

    let sel = run.selected_member();
    let sel_min = sel.l_f.norm().min(sel.l_g.norm());
    let at_most = run
        .members
        .iter()
        .filter(|m| m.l_f.norm().min(m.l_g.norm()) <= sel_min)
        .count();
    let mut selected = Block::new("selected");
    selected
        .uint("member_id", sel.id)
        .float("L_f_re", sel.l_f.re)
        .float("L_f_im", sel.l_f.im)
        .float("L_g_re", sel.l_g.re)
        .float("L_g_im", sel.l_g.im)
        .float("measured_abs_f", sel.l_f.norm())
        .float("measured_abs_g", sel.l_g.norm())
        .float("measured_min_abs", sel_min)
        .float("weight", sel.weight)
        .float("min_percentile_in_family", at_most as f64 / run.members.len() as f64);
    rep.block(selected);

    rep.scalar("V", Value::Float(run.threshold));
    let mut ineq = Block::new("family_inequality");
    ineq.str("form", "mean(|L_f L_g|^2 w) mean(w) >= |mean(L_f conj(L_g) w)|^2")
        .float("measured_lhs", run.ineq_lhs)
        .float("measured_rhs", run.ineq_rhs);
    let tol = 1e-9 * run.ineq_lhs.abs().max(run.ineq_rhs.abs()).max(1e-300);
    if run.ineq_lhs + tol < run.ineq_rhs {
        hard.push(format!(
            "families: the Cauchy-Schwarz family inequality failed, lhs {} < rhs {}",
            run.ineq_lhs, run.ineq_rhs
        ));
    }
    rep.block(ineq);

    match modq_mean_square(&run.support, q) {
        Ok(ms) => {
            let mut b = Block::new("mean_square");
            b.float("measured_primitive_mean", ms.primitive_mean)
                .float("predicted_closed_form", ms.closed_form)
                .float("measured_full_mean", ms.full_mean)
                .float("predicted_diagonal", ms.diagonal);
            let rel = (ms.primitive_mean - ms.closed_form).abs()
                / ms.closed_form.abs().max(1e-300);
            b.float("primitive_vs_closed_rel_gap", rel);
            if rel > 1e-10 {
                hard.push(format!(
                    "families: the orthogonality mean square disagrees with its closed \
                     form by {rel:.3e} (support below q, so the identity is exact)"
                ));
            }
            rep.block(b);
        }
        Err(e) => rep.warn(format!("families: mean-square identity skipped: {e}")),
    }

    let mut consts = Block::new("constants");
    for (i, c) in run.constants.iter().enumerate() {
        consts.float(&format!("c_{}", i + 1), *c);
    }
    consts.block(exponent_block("twist_family_min", ExponentSetup::TwistFamilyMin)?);
    consts.block(exponent_block("twist_family_product", ExponentSetup::TwistFamilyProduct)?);
    rep.block(consts);

    let artifacts = vec![("family.csv".to_string(), family_csv(&run))];
    Ok(finish(rep, hard, artifacts))
}

fn family_quad(ctx: &RunContext) -> Result<RunOutput> {
    let cfg = ctx.config;
    cfg.check_known(&[
        "run.x",
        "run.workers",
        "family.n",
        "family.a_omega",
        "family.window_lo",
        "family.window_hi",
    ])?;
    let x = cfg.require_u64("run.x")?;
    let spec = family_spec(cfg, 16.0 * x as f64, true)?;
    let sctx = SourceContext {
        base_dir: ctx.config_dir,
        holo_reach: ((16 * x) as f64 * 60.0 / core::f64::consts::TAU).ceil() as u64 + 512,
        workers: ctx.workers,
    };
    let descs = cfg.source_list()?;
    if descs.len() != 2 {
        bail!("family searches take exactly two sources, got {}", descs.len());
    }
    let sources = build_sources(&descs, &sctx)?;
    let table = sieve_to(spec.window().1.max(2.0 * x as f64 + 2.0), ctx.cap_bytes)?;
    let run = quad_small_search(&sources[0], &sources[1], x, &spec, &table)?;

    let mut rep = Report::new("family-quad", cfg.raw());
    let mut hard = Vec::new();
    rep.block(family_spec_block(&spec, &run));
    rep.scalar("source_f", Value::Str(sources[0].label().into()));
    rep.scalar("source_g", Value::Str(sources[1].label().into()));

    let sel = run.selected_member();
    let sel_max = sel.l_f.re.max(sel.l_g.re);
    let strictly_below = run
        .members
        .iter()
        .filter(|m| m.l_f.re.max(m.l_g.re) < sel_max)
        .count();
    let mut selected = Block::new("selected");
    selected
        .uint("member_d", sel.id)
        .float("measured_L_f", sel.l_f.re)
        .float("measured_L_g", sel.l_g.re)
        .float("measured_sum", sel.l_f.re + sel.l_g.re)
        .float("measured_max", sel_max)
        .float("weight", sel.weight)
        .float(
            "max_percentile_in_family",
            strictly_below as f64 / run.members.len() as f64,
        );
    rep.block(selected);

    rep.scalar("predicted_small_value_product", Value::Float(run.threshold));
    let mut ineq = Block::new("family_inequality");
    ineq.str("form", "min over d of (L_f + L_g) <= resonator-weighted mean of (L_f + L_g)")
        .float("measured_lhs", run.ineq_lhs)
        .float("measured_rhs", run.ineq_rhs);
    let tol = 1e-9 * run.ineq_lhs.abs().max(run.ineq_rhs.abs()).max(1e-300);
    if run.ineq_lhs > run.ineq_rhs + tol {
        hard.push(format!(
            "families: the weighted-mean witness inequality failed, min {} > mean {}",
            run.ineq_lhs, run.ineq_rhs
        ));
    }
    rep.block(ineq);

    let negative = run
        .members
        .iter()
        .map(|m| m.l_f.re.min(m.l_g.re))
        .fold(f64::INFINITY, f64::min);
    let mut nn = Block::new("nonnegativity");
    nn.float("measured_family_min_value", negative);
    if negative < -1e-8 {
        hard.push(format!(
            "families: a central value came out {negative}, below the -1e-8 floor the \
             nonnegativity theorem allows"
        ));
    }
    rep.block(nn);

    let mut consts = Block::new("constants");
    for (i, c) in run.constants.iter().enumerate() {
        consts.float(&format!("c_{}", i + 1), *c);
    }
    rep.block(consts);

    let artifacts = vec![("family.csv".to_string(), family_csv(&run))];
    Ok(finish(rep, hard, artifacts))
}

// ---- dump-resonator --------------------------------------------------------

fn dump_resonator(ctx: &RunContext) -> Result<RunOutput> {
    let cfg = ctx.config;
    let mut keys = vec!["run.t", "run.workers"];
    keys.extend_from_slice(RESONATOR_KEYS);
    cfg.check_known(&keys)?;
    let t_hint = cfg.f64("run.t")?;
    let sctx = SourceContext { base_dir: ctx.config_dir, holo_reach: 4096, workers: ctx.workers };
    let sources = build_sources(&cfg.source_list()?, &sctx)?;
    let combined = CombinedCoefficients::new(sources)?;
    let (res, _table) = build_resonator(cfg, &combined, ctx.cap_bytes, t_hint)?;

    let mut rep = Report::new("dump-resonator", cfg.raw());
    let mut hard = Vec::new();
    let res_block = resonator_block(&res, &mut rep);
    rep.block(res_block);

    let s = res.smallness_report();
    let complete =
        s.prime_count < 64 && (s.support_len as u128) == (1u128 << s.prime_count);
    rep.scalar("support_complete", Value::Bool(complete));
    if complete {
        let mass = s.l2_norm * s.l2_norm;
        let euler = s.euler_norm * s.euler_norm;
        let rel = (mass - euler).abs() / euler.max(1e-300);
        rep.scalar("measured_mass_vs_euler_rel_gap", Value::Float(rel));
        if rel > 1e-11 {
            hard.push(format!(
                "resonator: complete support mass disagrees with its Euler product by \
                 {rel:.3e}; the identity is exact"
            ));
        }
    } else {
        rep.warn(
            "resonator: support truncated by X or the member cap; the Euler mass is an \
             upper bound, not an identity"
                .to_string(),
        );
    }
    match predicted_threshold(combined.m(), res.spec().x()) {
        Ok(v) => {
            rep.scalar("predicted_threshold", Value::Float(v));
        }
        Err(e) => rep.warn(format!("moments: threshold prediction unavailable: {e}")),
    }

    let mut csv = CsvTable::new(&["n", "re_r", "im_r"]);
    for &(n, r) in res.support() {
        csv.row(&[n.to_string(), fmt_f64(r.re), fmt_f64(r.im)]);
    }
    let artifacts = vec![("resonator.csv".to_string(), csv.into_text())];
    Ok(finish(rep, hard, artifacts))
}
