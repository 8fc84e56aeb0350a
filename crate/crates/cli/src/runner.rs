use crate::config::Command;
use crate::config::{DuffinInput, Geometry, Region, ScenarioConfig};
use crate::report::{emit_band_data, write_samples_csv, RunReport};
use anyhow::{bail, Context, Result};
use plate_green::analysis::{
    blowup_sequence, check_sandwich, discrete_samples, duffin_study, estimate_constants, exact_ball_samples,
    exact_disk_samples, negative_part_report, nehari_region_check, positivity_radius, BlowupConfig, DuffinWindow,
    Regime, SamplePlan,
};
use plate_green::geometry::{
    grid_discretize, sample_pairs, sample_points, sample_region_pairs, PointPair, SampleOptions,
};
use plate_green::kernels::{ball_green, halfspace_green};
use plate_green::solver::{
    assemble_bilaplacian, convergence_study, discrete_green, evaluate_pairs, green_value, GreenSample, SolveOptions,
};
use plate_green::{Dimension, DomainSpec};
use serde_json::json;
use std::fs::File;
use std::io::BufWriter;
use std::time::Instant;

/// Runs a scenario and writes every requested file. Output files are
/// created before any work starts so an unwritable path fails fast.
pub fn execute(config: &ScenarioConfig) -> Result<RunReport> {
    let open = |p: &Option<std::path::PathBuf>| -> Result<Option<BufWriter<File>>> {
        p.as_ref()
            .map(|p| {
                File::create(p)
                    .map(BufWriter::new)
                    .with_context(|| format!("cannot write {}", p.display()))
            })
            .transpose()
    };
    let json_out = open(&config.output)?;
    let csv_out = open(&config.csv)?;
    if config.band_csv.is_some() && config.command != Command::VerifyEstimate {
        bail!("band-csv is only produced by verify-estimate");
    }
    let band_out = open(&config.band_csv)?;

    let report = run(config)?;

    if let Some(mut out) = json_out {
        use std::io::Write;
        out.write_all(report.to_json()?.as_bytes())?;
        out.flush()?;
    }
    if let Some(out) = csv_out {
        match &report.field {
            Some(field) => field.write_csv(out)?,
            None => write_samples_csv(&report.samples, out)?,
        }
    }
    if let Some(out) = band_out {
        emit_band_data(&report, config.band_axis, out)?;
    }
    Ok(report)
}

/// Dispatches to the command's pipeline and seals the report.
pub fn run(config: &ScenarioConfig) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new(config.command, config.echo());
    match config.command {
        Command::Kernel => kernel(config, &mut report)?,
        Command::Solve => solve(config, &mut report)?,
        Command::VerifyEstimate => verify_estimate(config, &mut report)?,
        Command::VerifyPositivity => verify_positivity(config, &mut report)?,
        Command::Nehari => nehari(config, &mut report)?,
        Command::Blowup => blowup(config, &mut report)?,
        Command::Duffin => duffin(config, &mut report)?,
        Command::Convergence => convergence(config, &mut report)?,
    }
    report.seal()?;
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn solve_options(config: &ScenarioConfig) -> SolveOptions {
    SolveOptions {
        method: config.method,
        ..SolveOptions::with_tol(config.tol)
    }
}

fn kernel(config: &ScenarioConfig, report: &mut RunReport) -> Result<()> {
    let n = config.n;
    if config.xi.len() != n.get() || config.eta.len() != n.get() {
        bail!("xi and eta need {} coordinates each", n.get());
    }
    let g = match config.geometry {
        Geometry::Halfspace => halfspace_green(n, &config.xi, &config.eta)?,
        Geometry::Ball => ball_green(n, &config.xi, &config.eta, config.radius)?,
    };
    report.results = json!({ "n": n.get(), "geometry": config.geometry, "xi": config.xi, "eta": config.eta, "G": g });
    report.summary.push(format!("{g}"));
    Ok(())
}

fn solve(config: &ScenarioConfig, report: &mut RunReport) -> Result<()> {
    let domain = config.planar()?;
    let field = discrete_green(domain, config.h, config.y, config.tol)?;
    let g = green_value(&field, config.x)?;
    let exact = config.exact_disk()?.map(|radius| {
        let c = domain.offset();
        let shift = |p: [f64; 2]| [p[0] - c[0], p[1] - c[1]];
        ball_green(Dimension::TWO, &shift(config.x), &shift(config.y), radius)
    });
    let exact = exact.transpose()?;
    report.results = json!({
        "domain": domain.to_string(),
        "h": config.h,
        "interior_nodes": field.mask().interior_count(),
        "relative_residual": field.residual(),
        "x": config.x,
        "y": config.y,
        "G": g,
        "G_exact": exact,
    });
    report.summary.push(format!(
        "G({:?}, {:?}) = {g} on {} interior nodes (residual {:.2e})",
        config.x,
        config.y,
        field.mask().interior_count(),
        field.residual()
    ));
    if let Some(e) = exact {
        report
            .summary
            .push(format!("exact {e}, relative error {:.3e}", (g - e).abs() / e.abs()));
    }
    report.field = Some(field);
    Ok(())
}

fn exact_planar_values(domain: &DomainSpec, radius: f64, pairs: Vec<PointPair>) -> Result<Vec<GreenSample>> {
    let c = domain.offset();
    pairs
        .into_iter()
        .map(|p| {
            let x = [p.x[0] - c[0], p.x[1] - c[1]];
            let y = [p.y[0] - c[0], p.y[1] - c[1]];
            let g = ball_green(Dimension::TWO, &x, &y, radius)?;
            Ok(GreenSample::new(Dimension::TWO, p, g, None)?)
        })
        .collect()
}

/// Samples for the estimate and positivity commands, plus the grid spacing
/// when they come from the solver.
fn strategy_samples(config: &ScenarioConfig) -> Result<(Vec<GreenSample>, Option<f64>)> {
    match &config.region {
        Region::Ball(ball) => {
            let pairs = sample_pairs(ball, config.pairs, config.seed, config.strategy)?;
            Ok((exact_ball_samples(ball, &pairs)?, None))
        }
        Region::Planar(domain) => {
            if config.exact_disk()?.is_some() {
                return Ok((
                    exact_disk_samples(domain, config.pairs, config.seed, config.strategy)?,
                    None,
                ));
            }
            let plan = SamplePlan {
                count: config.pairs,
                seed: config.seed,
                strategy: config.strategy,
                sources: config.sources,
            };
            Ok((
                discrete_samples(domain, config.h, &plan, &solve_options(config))?,
                Some(config.h),
            ))
        }
    }
}

fn region_label(config: &ScenarioConfig) -> String {
    match &config.region {
        Region::Planar(d) => d.to_string(),
        Region::Ball(b) => format!("ball:{}", b.radius),
    }
}

fn diameter(config: &ScenarioConfig) -> f64 {
    match &config.region {
        Region::Planar(d) => d.diameter(),
        Region::Ball(b) => b.diameter(),
    }
}

fn verify_estimate(config: &ScenarioConfig, report: &mut RunReport) -> Result<()> {
    let (samples, grid_h) = strategy_samples(config)?;
    let band = estimate_constants(&samples, config.epsilon)?.with_provenance(region_label(config), config.seed);
    let outside = check_sandwich(&band, &samples);
    let r_pos = positivity_radius(&samples, diameter(config));
    for &k in &outside {
        let (lo, hi) = band.band_for(&samples[k]);
        report
            .violations
            .push(format!("sample {k}: G = {} outside band [{lo}, {hi}]", samples[k].g));
    }
    report.results = json!({
        "domain": region_label(config),
        "n": config.n.get(),
        "h": grid_h,
        "seed": config.seed,
        "samples": samples.len(),
        "c1": band.c1,
        "c1_raw": band.c1_raw,
        "c2": band.c2,
        "epsilon": band.epsilon,
        "r_positivity": r_pos,
        "r_positivity_semantics": "no counterexample below r",
        "band_violations": outside.len(),
    });
    report.summary.push(format!(
        "c1 = {:.6e}, c2 = {:.6}, {} samples, {} outside the band",
        band.c1,
        band.c2,
        samples.len(),
        outside.len()
    ));
    report.band = Some(band);
    report.samples = samples;
    Ok(())
}

fn verify_positivity(config: &ScenarioConfig, report: &mut RunReport) -> Result<()> {
    let (samples, grid_h) = strategy_samples(config)?;
    let band = estimate_constants(&samples, config.epsilon)?;
    let r_pos = positivity_radius(&samples, diameter(config));
    let neg = negative_part_report(&samples, band.c1, config.n.get());
    let no_counterexample = neg.negatives.is_empty();
    for &k in &neg.violations {
        report
            .violations
            .push(format!("sample {k}: |G| = {} exceeds c1 dx^2 dy^2", samples[k].g.abs()));
    }
    for s in neg.negatives.iter().filter(|s| s.r < r_pos) {
        report.violations.push(format!(
            "sample {}: negative at r = {} below the positivity radius",
            s.index, s.r
        ));
    }
    if !no_counterexample && neg.negative_to_positive >= 1.0 {
        report.violations.push(format!(
            "negative part not smaller than the positive peak: max|G-|/max G+ = {}",
            neg.negative_to_positive
        ));
    }
    if !(r_pos > 0.0) {
        report.violations.push("positivity radius is zero".into());
    }
    report.results = json!({
        "domain": region_label(config),
        "n": config.n.get(),
        "h": grid_h,
        "seed": config.seed,
        "samples": samples.len(),
        "c1": band.c1,
        "r_positivity": r_pos,
        "r_positivity_semantics": "no counterexample below r",
        "no_counterexample": no_counterexample,
        "negative_part": neg,
    });
    report.summary.push(if no_counterexample {
        format!(
            "no counterexample: all {} samples positive, r_positivity = {r_pos}",
            samples.len()
        )
    } else {
        format!(
            "{} negative samples, r_positivity = {r_pos:.6}, max|G-|/max G+ = {:.3e}",
            neg.negatives.len(),
            neg.negative_to_positive
        )
    });
    report.samples = samples;
    Ok(())
}

fn nehari(config: &ScenarioConfig, report: &mut RunReport) -> Result<()> {
    let (samples, grid_h) = match &config.region {
        Region::Ball(ball) => {
            let pairs = sample_region_pairs(ball, config.pairs, config.seed, config.delta, &SampleOptions::default())?;
            (exact_ball_samples(ball, &pairs)?, None)
        }
        Region::Planar(domain) => match config.exact_disk()? {
            Some(radius) => {
                let pairs = sample_region_pairs(
                    domain,
                    config.pairs,
                    config.seed,
                    config.delta,
                    &SampleOptions::default(),
                )?;
                (exact_planar_values(domain, radius, pairs)?, None)
            }
            None => {
                let h = config.h;
                let op = assemble_bilaplacian(grid_discretize(domain, h)?)?;
                let options = SampleOptions {
                    min_d: 2.0 * h,
                    min_r: 2.0 * h,
                    anchors: Some(sample_points(domain, config.sources, config.seed, 2.0 * h)?),
                };
                let pairs = sample_region_pairs(domain, config.pairs, config.seed, config.delta, &options)?;
                (evaluate_pairs(&op, &pairs, &solve_options(config))?, Some(h))
            }
        },
    };
    let check = nehari_region_check(&samples, config.n, config.delta)?;
    for &k in &check.violations {
        report
            .violations
            .push(format!("sample {k}: G = {} is not positive", samples[k].g));
    }
    if !(check.c3 > 0.0) {
        report.violations.push(format!("c3 = {} is not positive", check.c3));
    }
    report.results = json!({
        "domain": region_label(config),
        "n": config.n.get(),
        "h": grid_h,
        "seed": config.seed,
        "samples": samples.len(),
        "delta": config.delta,
        "region_count": check.region_count,
        "c3": check.c3,
        "argmin": check.argmin,
    });
    report.summary.push(format!(
        "c3 = {:.6e} over {} region pairs, {} non-positive",
        check.c3,
        check.region_count,
        check.violations.len()
    ));
    report.samples = samples;
    Ok(())
}

fn blowup(config: &ScenarioConfig, report: &mut RunReport) -> Result<()> {
    let domain = config.planar()?;
    let point = |v: &[f64], key: &str| -> Result<[f64; 2]> {
        match v {
            &[a, b] => Ok([a, b]),
            _ => bail!("{key} needs two coordinates for blow-up"),
        }
    };
    let mut bc = BlowupConfig::new(
        config.x0,
        config.regime,
        point(&config.xi, "xi")?,
        point(&config.eta, "eta")?,
        config.steps,
    );
    bc.s0 = config.s0;
    bc.nodes_per_scale = config.nodes_per_scale;
    bc.node_budget = config.node_budget;
    bc.tol = config.tol;
    let out = blowup_sequence(domain, &bc)?;
    if !out.growth_bounded(2.0) {
        report
            .violations
            .push("growth diagnostic exceeds twice that of the limit kernel".into());
    }
    match config.regime {
        Regime::A if out.steps.len() > 1 && !out.converging(0.5) => {
            report
                .violations
                .push("final error exceeds half of the first-step error".into());
        }
        Regime::B => {
            for s in out.steps.iter().filter(|s| !(s.gk > 0.0)) {
                report
                    .violations
                    .push(format!("step {}: G_k = {} is not positive", s.k, s.gk));
            }
        }
        _ => {}
    }
    report.results = json!({
        "domain": domain.to_string(),
        "regime": config.regime,
        "x0": config.x0,
        "steps": out.steps,
        "aborted": out.aborted,
        "growth_reference": out.growth_reference,
    });
    for s in &out.steps {
        report.summary.push(format!(
            "k = {}: h = {:.3e}, {} unknowns, G_k = {:.6}, G_H = {:.6}, error {:.3e}",
            s.k, s.h, s.unknowns, s.gk, s.g_halfspace, s.abs_error
        ));
    }
    if let Some(why) = &out.aborted {
        report.summary.push(format!("stopped early: {why}"));
    }
    Ok(())
}

fn duffin(config: &ScenarioConfig, report: &mut RunReport) -> Result<()> {
    let window = DuffinWindow::default();
    let rows = match config.function {
        DuffinInput::Quadratic => duffin_study(|y1, _| y1 * y1, &window, &config.h_list, config.boundary_tol, true)?,
        DuffinInput::Halfspace => {
            let pole: [f64; 2] = match config.xi.as_slice() {
                &[a, b] if a < 0.0 => [a, b],
                _ => bail!("the kernel slice needs a pole xi = (a, b) with a < 0"),
            };
            let two = Dimension::TWO;
            duffin_study(
                |y1, y2| halfspace_green(two, &pole, &[y1, y2]).unwrap_or(f64::NAN),
                &window,
                &config.h_list,
                config.boundary_tol,
                true,
            )?
        }
    };
    match config.function {
        DuffinInput::Quadratic => {
            for r in rows.iter().filter(|r| r.residual > r.rounding_floor) {
                report.violations.push(format!(
                    "h = {}: residual {:.3e} above the rounding level {:.3e}",
                    r.h, r.residual, r.rounding_floor
                ));
            }
        }
        DuffinInput::Halfspace => {
            for w in rows.windows(2) {
                let factor = w[0].residual / w[1].residual;
                if !(factor >= 2.0) {
                    report.violations.push(format!(
                        "h = {} -> {}: residual reduced by {factor:.3} only",
                        w[0].h, w[1].h
                    ));
                }
            }
        }
    }
    for r in &rows {
        report.summary.push(format!(
            "h = {}: residual {:.3e} (rounding level {:.3e})",
            r.h, r.residual, r.rounding_floor
        ));
    }
    report.results = json!({ "function": config.function, "window": window, "rows": rows });
    Ok(())
}

fn convergence(config: &ScenarioConfig, report: &mut RunReport) -> Result<()> {
    let domain = config.planar()?;
    // well-separated pairs: a fixed fraction of the inradius from the boundary and from each other
    let margin = 0.3 * domain.inradius_hint();
    let options = SampleOptions {
        min_d: margin,
        min_r: margin,
        anchors: Some(sample_points(domain, config.sources, config.seed, margin)?),
    };
    let pairs = plate_green::geometry::sample_pairs_with(domain, config.pairs, config.seed, config.strategy, &options)?;
    let table = convergence_study(domain, &pairs, &config.h_list, &solve_options(config))?;
    let order = table.fitted_order();
    if !table.monotone() {
        report.violations.push("errors do not decrease monotonically".into());
    }
    if table.reference.is_some() && !order.is_some_and(|o| o >= 1.0) {
        report.violations.push(format!("fitted order {order:?} below 1"));
    }
    for row in &table.rows {
        report.summary.push(format!(
            "h = {}: error {}, order {}",
            row.h,
            row.error.map_or("-".into(), |e| format!("{e:.4e}")),
            row.order.map_or("-".into(), |o| format!("{o:.3}"))
        ));
    }
    report.results = json!({
        "domain": domain.to_string(),
        "seed": config.seed,
        "pairs": pairs,
        "mode": table.mode,
        "fitted_order": order,
        "rows": table.rows.iter().map(|r| json!({ "h": r.h, "error": r.error, "order": r.order })).collect::<Vec<_>>(),
    });
    Ok(())
}
