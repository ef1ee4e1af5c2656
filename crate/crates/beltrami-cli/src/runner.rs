//! One function per subcommand. Each builds its inputs from the validated
//! config, drives the library, writes artifacts under `output.dir/<hash>/`,
//! prints one line per check, and reports whether every gated check passed.
//!
//! Output conventions: CSV rows carry `config_hash` and `tolerance_class`
//! columns; binary dumps inherit provenance from the hash directory; the
//! summary JSON embeds the full effective config.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use beltrami_lab::area::{
    self, eh_bound_check, exp_area_bound_check, qc_series_set_bounds, AreaBoundParams,
};
use beltrami_lab::functionals::{
    eps_sweep, jacobian_energy_sweep, weight_conversion_check, weighted_integral_2d, WeightSpec,
};
use beltrami_lab::grid::{ComplexGrid, GridDescriptor, PixelSet};
use beltrami_lab::neumann::{
    default_tolerance, good_term_iteration, neumann_solve, truncate_coefficient, verify_decay,
    write_decay_csv, BeltramiField, DecayBoundParams, NeumannDecayReport, SolutionField,
};
use beltrami_lab::stats::ols_fit;
use beltrami_lab::tolerances::{self, class};

use crate::config::{Command, ExperimentConfig};

/// A run bound to its output directory: `output.dir/<config hash>/`, so
/// every artifact path carries the provenance of the config that made it.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub cmd: Command,
    pub hash: String,
    pub dir: PathBuf,
}

impl Run {
    pub fn new(cfg: ExperimentConfig, cmd: Command) -> Run {
        let hash = cfg.hash();
        let dir = cfg.output.dir.join(&hash);
        Run {
            cfg,
            cmd,
            hash,
            dir,
        }
    }

    pub fn execute(&self) -> Result<bool> {
        fs::create_dir_all(&self.dir)
            .with_context(|| format!("creating {}", self.dir.display()))?;
        match self.cmd {
            Command::Solve => run_solve(self),
            Command::Decay => run_decay(self),
            Command::Regularity => run_regularity(self),
            Command::Area => run_area(self),
            Command::Sweep => run_sweep(self),
            Command::Radial => run_radial(self),
        }
    }
}

/// One verdict line in the summary. `gated` checks decide the exit code;
/// the rest are informational.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub op: &'static str,
    pub threshold: f64,
    pub tolerance_class: &'static str,
    pub gated: bool,
    pub pass: bool,
}

impl Check {
    fn le(name: &'static str, value: f64, threshold: f64, cls: &'static str, gated: bool) -> Check {
        Check {
            name,
            value,
            op: "<=",
            threshold,
            tolerance_class: cls,
            gated,
            pass: value <= threshold,
        }
    }

    fn ge(name: &'static str, value: f64, threshold: f64, cls: &'static str, gated: bool) -> Check {
        Check {
            name,
            value,
            op: ">=",
            threshold,
            tolerance_class: cls,
            gated,
            pass: value >= threshold,
        }
    }
}

fn report_checks(checks: &[Check]) -> bool {
    let mut ok = true;
    for c in checks {
        let tag = if !c.gated {
            "info"
        } else if c.pass {
            "pass"
        } else {
            ok = false;
            "FAIL"
        };
        println!(
            "[{tag}] {}: {:.6e} {} {:.6e} ({})",
            c.name, c.value, c.op, c.threshold, c.tolerance_class
        );
    }
    ok
}

/// Re-emit a CSV with `config_hash` and `tolerance_class` appended to the
/// header and every row.
fn with_provenance(raw: &[u8], hash: &str, cls: &str) -> Result<Vec<u8>> {
    let mut rdr = csv::Reader::from_reader(raw);
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header = rdr.headers()?.clone();
    header.push_field("config_hash");
    header.push_field("tolerance_class");
    out.write_record(&header)?;
    for rec in rdr.records() {
        let mut rec = rec?;
        rec.push_field(hash);
        rec.push_field(cls);
        out.write_record(&rec)?;
    }
    Ok(out.into_inner()?)
}

fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// JSON-safe float: finite values stay numbers, inf/nan become strings so
/// the dichotomy verdicts survive serialization.
fn jnum(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

fn write_summary(
    run: &Run,
    checks: &[Check],
    extra: serde_json::Value,
    artifacts: &[&str],
) -> Result<()> {
    let doc = json!({
        "subcommand": run.cmd.name(),
        "config_hash": run.hash,
        "coefficient": run.cfg.describe_coefficient(),
        "config": run.cfg,
        "checks": checks,
        "results": extra,
        "artifacts": artifacts,
    });
    let text = serde_json::to_string_pretty(&doc)?;
    write_artifact(&run.dir, "summary.json", text.as_bytes())?;
    println!("wrote {}", run.dir.join("summary.json").display());
    Ok(())
}

struct Solved {
    desc: GridDescriptor,
    field: BeltramiField,
    sol: SolutionField,
    report: NeumannDecayReport,
}

/// Sample or load the coefficient, cap it, and run the series solver.
/// `full_table` forces `tol = 0` so every term up to `n_max` is kept.
fn build_and_solve(cfg: &ExperimentConfig, full_table: bool) -> Result<Solved> {
    let desc = cfg.grid_descriptor().map_err(|e| anyhow::anyhow!(e))?;
    let raw = cfg.raw_coefficient(desc).map_err(|e| anyhow::anyhow!(e))?;
    let field = truncate_coefficient(&raw, cfg.params.k_cap)?;
    let tol = cfg
        .params
        .tol
        .unwrap_or(if full_table { 0.0 } else { default_tolerance(&field) });
    let (sol, report) = neumann_solve(&field, cfg.params.n_max, tol)?;
    Ok(Solved {
        desc,
        field,
        sol,
        report,
    })
}

fn unit_disk(desc: GridDescriptor) -> PixelSet {
    PixelSet::disk(desc, Complex64::new(0.0, 0.0), 1.0)
}

fn weight_label(w: &WeightSpec) -> String {
    match *w {
        WeightSpec::InvLogDistortion { exponent } => {
            format!("inv_log_distortion(exponent={exponent})")
        }
        WeightSpec::LogDerivLogLog { p, loglog_exponent } => {
            format!("log_deriv_loglog(p={p}, loglog_exponent={loglog_exponent})")
        }
        WeightSpec::ExpLogPower { beta } => format!("exp_log_power(beta={beta})"),
        WeightSpec::EpsPower { eps } => format!("eps_power(eps={eps})"),
    }
}

fn run_solve(run: &Run) -> Result<bool> {
    let s = build_and_solve(&run.cfg, false)?;
    let disk = unit_disk(s.desc);

    s.field.mu().write_binary(run.dir.join("mu.bin"))?;
    s.sol.f.write_binary(run.dir.join("f.bin"))?;
    s.sol.d.write_binary(run.dir.join("d.bin"))?;
    s.sol.dbar.write_binary(run.dir.join("dbar.bin"))?;
    s.sol.jacobian.write_binary(run.dir.join("jacobian.bin"))?;

    let mut terms = csv::Writer::from_writer(Vec::new());
    terms.write_record(["n", "term_norm", "term_norm_sq"])?;
    for (n, &norm) in s.report.term_norms.iter().enumerate() {
        terms.write_record([
            n.to_string(),
            format!("{norm:.12e}"),
            format!("{:.12e}", norm * norm),
        ])?;
    }
    let terms_csv = with_provenance(&terms.into_inner()?, &run.hash, class::GRID)?;
    write_artifact(&run.dir, "terms.csv", &terms_csv)?;

    let mut checks = Vec::new();

    // The assembled residual dbar f - mu df equals the first dropped term
    // mu S psi_last, so the modulus cap bounds it by the last kept norm.
    let residual = s.sol.equation_residual(&s.field)?;
    let mu_l2 = s.field.mu().l2_norm();
    checks.push(Check::le(
        "equation_residual_tracks_stop",
        residual,
        run.cfg.params.k_cap * s.report.residual * (1.0 + 1e-9) + 1e-12 * mu_l2,
        class::EXACT,
        true,
    ));

    let min_jac = s
        .sol
        .jacobian
        .values()
        .iter()
        .map(|v| v.re)
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::ge(
        "jacobian_floor",
        min_jac,
        -tolerances::JACOBIAN_FLOOR,
        class::GRID,
        true,
    ));

    let disk_area = s.sol.jacobian.integrate_over(&disk)?.re;
    checks.push(Check::le(
        "disk_image_area",
        disk_area,
        std::f64::consts::PI + tolerances::DISK_AREA_EXCESS,
        class::BOUND,
        true,
    ));

    let mut closed_form_rel = None;
    if let Some(prof) = run.cfg.profile() {
        let closed = ComplexGrid::sample(s.desc, |z| {
            if z.norm() <= 1.0 {
                prof.fields_at(z).f
            } else {
                z
            }
        });
        let diff = s.sol.f.zip_map(&closed, |a, b| a - b)?;
        let rel =
            (diff.l2_norm_sq_over(&disk)? / closed.l2_norm_sq_over(&disk)?).sqrt();
        closed_form_rel = Some(rel);
        // Only a check when the cap never bit (the solved equation is then
        // exactly the closed form's equation) and the distortion stays
        // modest, where the first-order-in-cell-size rate was calibrated.
        // Degenerate coefficients concentrate error at the singular point
        // at a slower rate, so there the line is advisory.
        let k_hat = s
            .field
            .mu()
            .values()
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        let distortion = (1.0 + k_hat) / (1.0 - k_hat);
        let gate = s.field.clamped_set().count() == 0
            && distortion <= tolerances::CLOSED_FORM_DISTORTION_MAX;
        checks.push(Check::le(
            "closed_form_rel_l2",
            rel,
            tolerances::POWER_MAP_REL_L2 * (1024.0 / s.desc.n() as f64),
            class::GRID,
            gate,
        ));
    }

    let ok = report_checks(&checks);
    write_summary(
        run,
        &checks,
        json!({
            "converged": s.report.converged,
            "terms_kept": s.report.term_norms.len(),
            "last_term_norm": s.report.residual,
            "equation_residual": residual,
            "min_jacobian": min_jac,
            "disk_image_area": disk_area,
            "closed_form_rel_l2": closed_form_rel.map(jnum),
            "clamped_cells": s.field.clamped_set().count(),
        }),
        &[
            "mu.bin",
            "f.bin",
            "d.bin",
            "dbar.bin",
            "jacobian.bin",
            "terms.csv",
        ],
    )?;
    Ok(ok)
}

fn run_decay(run: &Run) -> Result<bool> {
    let mut s = build_and_solve(&run.cfg, true)?;
    let p = run.cfg.params.p;
    let alpha = run.cfg.params.alpha;
    let beta = run.cfg.params.beta_or_default();
    let n_used = s.report.term_norms.len() as u32 - 1;

    s.report.good_term_norms = Some(good_term_iteration(&s.field, beta, alpha, n_used)?);
    let bad: Vec<f64> = (0..=n_used)
        .map(|k| s.field.bad_set_measure(k, beta, alpha))
        .collect();
    s.report.bad_set_measures = Some(bad.clone());

    let exp_integral = s.field.exp_distortion_integral(p, alpha);
    let params = DecayBoundParams::new(p, alpha, beta, exp_integral)?;
    let verification = verify_decay(&s.report, &params, tolerances::DECAY_NORM_SQ_TOL);

    let mut raw = Vec::new();
    write_decay_csv(&mut raw, &s.report, &params, tolerances::DECAY_NORM_SQ_TOL)?;
    let table = with_provenance(&raw, &run.hash, class::BOUND)?;
    write_artifact(&run.dir, "decay.csv", &table)?;

    let max_excess = verification
        .rows
        .iter()
        .map(|r| r.term_norm_sq - r.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let cheb_excess = bad
        .iter()
        .enumerate()
        .map(|(n, &m)| m - params.chebyshev_bound(n as u32))
        .fold(f64::NEG_INFINITY, f64::max);

    let mut checks = vec![
        Check::le(
            "termwise_decay_excess",
            max_excess,
            tolerances::DECAY_NORM_SQ_TOL,
            class::BOUND,
            true,
        ),
        Check::le(
            "chebyshev_bad_set_excess",
            cheb_excess,
            tolerances::BAD_SET_BAND_CELLS * s.desc.spacing(),
            class::BOUND,
            true,
        ),
    ];
    if alpha == 1.0 {
        checks.push(Check::le(
            "decay_loglog_slope",
            verification.slope,
            -beta * tolerances::DECAY_SLOPE_FACTOR,
            class::FIT,
            true,
        ));
    }

    let ok = report_checks(&checks);
    write_summary(
        run,
        &checks,
        json!({
            "report": s.report,
            "bound_params": params,
            "verification": verification,
            "exp_distortion_integral_raw": jnum(exp_integral),
        }),
        &["decay.csv"],
    )?;
    Ok(ok)
}

fn run_regularity(run: &Run) -> Result<bool> {
    let s = build_and_solve(&run.cfg, false)?;
    let disk = unit_disk(s.desc);
    let prof = run.cfg.profile();
    let r_inner = (-(run.cfg.params.r0_count as f64)).exp();

    let mut rows = Vec::new();
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["weight", "integral_2d", "integral_radial"])?;
    for w in &run.cfg.params.weights {
        let v2 = weighted_integral_2d(w, &s.sol.d, &s.sol.dbar, s.field.mu(), &disk)?;
        let vr = prof.as_ref().map(|p| p.weighted_integral(w, r_inner));
        table.write_record([
            weight_label(w),
            format!("{v2:.12e}"),
            vr.map(|v| format!("{v:.12e}")).unwrap_or_default(),
        ])?;
        rows.push(json!({
            "weight": weight_label(w),
            "integral_2d": jnum(v2),
            "integral_radial": vr.map(jnum),
        }));
    }
    let table = with_provenance(&table.into_inner()?, &run.hash, class::GRID)?;
    write_artifact(&run.dir, "weights.csv", &table)?;

    // No gates: these are measurements whose finiteness or blowup is the
    // result, not a requirement.
    let checks = Vec::new();
    let ok = report_checks(&checks);
    write_summary(run, &checks, json!({ "weights": rows }), &["weights.csv"])?;
    Ok(ok)
}

fn run_area(run: &Run) -> Result<bool> {
    let s = build_and_solve(&run.cfg, false)?;
    let p = run.cfg.params.p;
    let alpha = run.cfg.params.alpha;
    let beta = run.cfg.params.beta_or_default();

    let k_hat = s
        .field
        .mu()
        .values()
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let m = run.cfg.params.m.unwrap_or(if k_hat == 0.0 {
        1.0
    } else {
        (1.0 + k_hat) / (1.0 - k_hat)
    });

    let origin = Complex64::new(0.0, 0.0);
    // Smallest dyadic disks stop catching cell centers on coarse grids;
    // keep only the nonempty ones.
    let sets: Vec<(String, PixelSet)> = (0..=7)
        .map(|j| {
            let r = 2f64.powi(-j);
            (format!("disk(r=2^-{j})"), PixelSet::disk(s.desc, origin, r))
        })
        .filter(|(_, e)| e.count() > 0)
        .collect();

    let mut eh_rows = Vec::new();
    for (label, e) in &sets {
        eh_rows.push((label.clone(), eh_bound_check(&s.sol, e, m)?));
    }
    let mut raw = Vec::new();
    area::write_eh_csv(&mut raw, &eh_rows)?;
    let eh_csv = with_provenance(&raw, &run.hash, class::BOUND)?;
    write_artifact(&run.dir, "eh.csv", &eh_csv)?;

    let max_ratio = eh_rows
        .iter()
        .map(|(_, r)| r.ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut checks = vec![Check::le(
        "eh_max_area_ratio",
        max_ratio,
        1.0 + tolerances::EH_RATIO_MARGIN,
        class::BOUND,
        true,
    )];
    let mut artifacts: Vec<String> = vec!["eh.csv".into()];
    let mut extra = serde_json::Map::new();
    extra.insert("qc_constant_m".into(), jnum(m));
    extra.insert(
        "eh_rows".into(),
        serde_json::to_value(
            eh_rows
                .iter()
                .map(|(l, r)| json!({ "set": l, "row": r }))
                .collect::<Vec<_>>(),
        )?,
    );

    if m > 1.0 {
        // Series terms restricted to a large and a small set; the qc set
        // estimates hold for any coefficient modulus below 1.
        let qc_n = run.cfg.params.n_max.min(12);
        for (name, radius) in [("qc_disk_r1.csv", 1.0), ("qc_disk_r1_16.csv", 1.0 / 16.0)] {
            let e = PixelSet::disk(s.desc, origin, radius);
            let rows = qc_series_set_bounds(&s.field, &e, m, qc_n)?;
            let worst = rows
                .iter()
                .map(|r| {
                    (r.term_norm_sq / r.term_bound).max(r.s_term_norm_sq / r.s_term_bound)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            checks.push(Check::le(
                if radius == 1.0 {
                    "qc_set_bound_ratio_r1"
                } else {
                    "qc_set_bound_ratio_r1_16"
                },
                worst,
                1.0 + 1e-9,
                class::BOUND,
                true,
            ));
            let mut raw = Vec::new();
            area::write_qc_set_csv(&mut raw, &rows)?;
            let table = with_provenance(&raw, &run.hash, class::BOUND)?;
            write_artifact(&run.dir, name, &table)?;
            artifacts.push(name.into());
        }
    }

    if alpha == 1.0 && 0.5 < beta && beta < p && p < 4.0 && m > 1.0 {
        let params = AreaBoundParams::new(p, alpha, beta, m)?;
        let refs: Vec<&PixelSet> = sets.iter().map(|(_, e)| e).collect();
        let report = exp_area_bound_check(&s.sol, &s.field, &params, &refs)?;
        let mut raw = Vec::new();
        area::write_exp_area_csv(&mut raw, &report)?;
        let table = with_provenance(&raw, &run.hash, class::BOUND)?;
        write_artifact(&run.dir, "exp_area.csv", &table)?;
        artifacts.push("exp_area.csv".into());
        let growth = if report.head_sup > 0.0 {
            report.tail_sup / report.head_sup
        } else if report.tail_sup == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        checks.push(Check::le(
            "exp_area_tail_head_ratio",
            growth,
            1.2,
            class::BOUND,
            true,
        ));
        extra.insert("exp_area".into(), serde_json::to_value(&report)?);
    }

    if alpha > 1.0 {
        let pairs: Vec<(f64, f64)> = eh_rows
            .iter()
            .filter(|(_, r)| r.image_area > 0.0)
            .map(|(_, r)| (r.set_measure, r.image_area))
            .collect();
        if pairs.len() >= 3 {
            let fit = area::area_shape_regression(&pairs, alpha)?;
            checks.push(Check::ge(
                "area_shape_r_squared",
                fit.r_squared,
                tolerances::SHAPE_FIT_R2_MIN,
                class::FIT,
                false,
            ));
            extra.insert("shape_fit".into(), serde_json::to_value(fit)?);
        }
    }

    let ok = report_checks(&checks);
    let artifact_refs: Vec<&str> = artifacts.iter().map(|s| s.as_str()).collect();
    write_summary(run, &checks, serde_json::Value::Object(extra), &artifact_refs)?;
    Ok(ok)
}

fn run_sweep(run: &Run) -> Result<bool> {
    let s = build_and_solve(&run.cfg, false)?;
    let disk = unit_disk(s.desc);
    let alpha = run.cfg.params.alpha;
    let eps = run.cfg.params.eps_list_or_default();

    let sweep = eps_sweep(&s.sol.d, s.field.mu(), &disk, &eps)?;
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["eps", "integral"])?;
    for r in &sweep.rows {
        table.write_record([format!("{:.12e}", r.eps), format!("{:.12e}", r.integral)])?;
    }
    let table = with_provenance(&table.into_inner()?, &run.hash, class::FIT)?;
    write_artifact(&run.dir, "eps_sweep.csv", &table)?;

    let mut checks = vec![Check::le(
        "damped_energy_slope_2d",
        sweep.slope,
        tolerances::SWEEP_SLOPE_2D_MAX,
        class::FIT,
        true,
    )];
    let mut extra = serde_json::Map::new();
    extra.insert("eps_sweep".into(), serde_json::to_value(&sweep)?);

    // Radial twin of the same sweep, free of grid noise. Its slope probes
    // the conjectured unit exponent, which only emerges at depths far
    // beyond these truncations, so the line reports without gating.
    if let Some(prof) = run.cfg.profile() {
        let r_inner = (-(run.cfg.params.r0_count as f64)).exp();
        let xs: Vec<f64> = eps.iter().map(|&e| (1.0 / e).ln()).collect();
        let ys: Vec<f64> = eps
            .iter()
            .map(|&e| {
                prof.weighted_integral(&WeightSpec::EpsPower { eps: e }, r_inner)
                    .ln()
            })
            .collect();
        let fit = ols_fit(&xs, &ys);
        checks.push(Check::le(
            "damped_energy_slope_radial",
            fit.slope,
            tolerances::SWEEP_SLOPE_RADIAL_MAX,
            class::FIT,
            false,
        ));
        extra.insert("radial_slope_probe".into(), serde_json::to_value(fit)?);
    }

    // Weight conversion: smallness of (1 - |mu|)-moments of the Dirichlet
    // density converts into boundedness of its inverse-log moments.
    let mask = disk.mask();
    let mu_vals = s.field.mu().values().as_slice().expect("standard layout");
    let d_vals = s.sol.d.values().as_slice().expect("standard layout");
    let mut w_values = Vec::new();
    let mut h_values = Vec::new();
    for i in 0..mu_vals.len() {
        if mask[i] {
            w_values.push(1.0 - mu_vals[i].norm());
            h_values.push(d_vals[i].norm_sqr());
        }
    }
    let conv = weight_conversion_check(
        &w_values,
        &h_values,
        s.desc.cell_area(),
        alpha,
        &eps,
        &run.cfg.params.eta_list,
        0.2,
    )?;
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["eta", "log_moment", "scaled"])?;
    for r in &conv.ratio_rows {
        table.write_record([
            format!("{:.12e}", r.eta),
            format!("{:.12e}", r.log_moment),
            format!("{:.12e}", r.scaled),
        ])?;
    }
    let table = with_provenance(&table.into_inner()?, &run.hash, class::BOUND)?;
    write_artifact(&run.dir, "conversion.csv", &table)?;
    checks.push(Check::le(
        "conversion_hypothesis_slope",
        conv.hypothesis_slope,
        alpha + 0.2,
        class::FIT,
        true,
    ));
    checks.push(Check::le(
        "conversion_upward_variation",
        conv.max_upward_variation,
        tolerances::CONVERSION_VARIATION_MAX,
        class::BOUND,
        true,
    ));
    extra.insert("conversion".into(), serde_json::to_value(&conv)?);

    // Jacobian energy against the eps^-4 exponential-distortion majorant.
    let energy = jacobian_energy_sweep(&s.sol, &s.field, &eps)?;
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["eps", "energy", "bound", "ratio"])?;
    for r in &energy.rows {
        table.write_record([
            format!("{:.12e}", r.eps),
            format!("{:.12e}", r.energy),
            format!("{:.12e}", r.bound),
            format!("{:.12e}", r.ratio),
        ])?;
    }
    let table = with_provenance(&table.into_inner()?, &run.hash, class::FIT)?;
    write_artifact(&run.dir, "jacobian_energy.csv", &table)?;
    checks.push(Check::le(
        "jacobian_energy_exponent",
        energy.attained_exponent,
        tolerances::ENERGY_EXPONENT_MAX,
        class::FIT,
        true,
    ));
    extra.insert("jacobian_energy".into(), serde_json::to_value(&energy)?);

    let ok = report_checks(&checks);
    write_summary(
        run,
        &checks,
        serde_json::Value::Object(extra),
        &[
            "eps_sweep.csv",
            "conversion.csv",
            "jacobian_energy.csv",
        ],
    )?;
    Ok(ok)
}

/// Verdict for a truncation ladder on *geometric* depths: `values[j]` is
/// the integral truncated at log-coordinate depth `2^j`.
///
/// On this grid the honest dichotomies separate: divergence that is only
/// logarithmic or doubly logarithmic in the depth leaves per-octave
/// increments decaying harmonically or slower, while a convergent integral
/// has summable increments, a strictly steeper decay. Linear depth grids
/// cannot tell those apart at any feasible depth, which is why the ladder
/// is geometric. Verdicts: `divergent` when a value overflows or the
/// fitted increment decay exponent sits at the harmonic line, `convergent`
/// when the tail has settled below the calibrated threshold or the
/// increments decay summably with margin, `slow` when the exponent lands
/// between the two lines or there is too little to fit.
fn classify_octaves(values: &[f64]) -> (&'static str, f64, f64) {
    let n = values.len();
    if values.iter().any(|v| v.is_infinite()) {
        return ("divergent", f64::INFINITY, f64::NAN);
    }
    let last = values[n - 1];
    let last_inc = values[n - 1] - values[n - 2];
    let last_rel = if last > 0.0 { last_inc / last } else { 0.0 };
    if !(last_rel > tolerances::TAIL_INCREMENT_REL) {
        return ("convergent", last_rel, f64::NAN);
    }
    // Fit log increment against log octave index over the upper half.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in (n / 2).max(1)..n {
        let inc = values[j] - values[j - 1];
        if inc > 0.0 {
            xs.push((j as f64).ln());
            ys.push(inc.ln());
        }
    }
    if xs.len() < 3 {
        return ("slow", last_rel, f64::NAN);
    }
    let fit = ols_fit(&xs, &ys);
    if fit.slope >= tolerances::OCTAVE_DIVERGENT_SLOPE_MIN {
        ("divergent", last_rel, fit.slope)
    } else if fit.slope <= tolerances::OCTAVE_CONVERGENT_SLOPE_MAX {
        ("convergent", last_rel, fit.slope)
    } else {
        ("slow", last_rel, fit.slope)
    }
}

fn run_radial(run: &Run) -> Result<bool> {
    let prof = run
        .cfg
        .profile()
        .expect("validation rejects file coefficients");
    let p = run.cfg.params.p;
    let n_max = run.cfg.params.n_max;
    let depth = run.cfg.params.r0_count;

    let annuli = prof.annuli_bound_table(p, n_max);
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["n", "radius", "image_radius", "image_area", "bound", "scaled_bound"])?;
    for r in &annuli {
        table.write_record([
            r.n.to_string(),
            format!("{:.12e}", r.radius),
            format!("{:.12e}", r.image_radius),
            format!("{:.12e}", prof.disk_image_area_exact(r.radius)),
            format!("{:.12e}", r.bound),
            format!("{:.12e}", r.scaled_bound),
        ])?;
    }
    let table = with_provenance(&table.into_inner()?, &run.hash, class::QUAD)?;
    write_artifact(&run.dir, "annuli.csv", &table)?;

    let checks: Vec<Check> = Vec::new();
    let mut weight_reports = Vec::new();
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["weight", "k", "r0", "integral", "rel_increment"])?;
    let mut deep = csv::Writer::from_writer(Vec::new());
    deep.write_record(["weight", "j", "t_max", "integral", "rel_increment"])?;
    let expects = run.cfg.params.expect.as_deref();
    let mut expect_ok = true;
    for (i, w) in run.cfg.params.weights.iter().enumerate() {
        let label = weight_label(w);
        let values: Vec<f64> = (1..=depth)
            .map(|k| prof.weighted_integral(w, (-(k as f64)).exp()))
            .collect();
        for (j, &v) in values.iter().enumerate() {
            let rel = if j == 0 {
                f64::NAN
            } else {
                (v - values[j - 1]) / v
            };
            table.write_record([
                label.clone(),
                (j + 1).to_string(),
                format!("{:.12e}", (-(j as f64 + 1.0)).exp()),
                format!("{v:.12e}"),
                if rel.is_nan() {
                    String::new()
                } else {
                    format!("{rel:.12e}")
                },
            ])?;
        }
        // Geometric ladder of truncation depths; the linear table above is
        // the record, this one decides the verdict.
        let octaves: Vec<f64> = (0..=run.cfg.params.log2_depth)
            .map(|j| prof.weighted_integral_to_depth(w, 2f64.powi(j as i32)))
            .collect();
        for (j, &v) in octaves.iter().enumerate() {
            let rel = if j == 0 || !(v > 0.0) || v.is_infinite() {
                f64::NAN
            } else {
                (v - octaves[j - 1]) / v
            };
            deep.write_record([
                label.clone(),
                j.to_string(),
                format!("{:.6e}", 2f64.powi(j as i32)),
                format!("{v:.12e}"),
                if rel.is_nan() {
                    String::new()
                } else {
                    format!("{rel:.12e}")
                },
            ])?;
        }
        let (verdict, last_rel, inc_slope) = classify_octaves(&octaves);
        if let Some(exp) = expects.and_then(|e| e.get(i)) {
            if exp != verdict {
                expect_ok = false;
                println!("[FAIL] {label}: classified {verdict}, expected {exp}");
            } else {
                println!("[pass] {label}: classified {verdict} as expected");
            }
        } else {
            println!("[info] {label}: classified {verdict}");
        }
        weight_reports.push(json!({
            "weight": label,
            "verdict": verdict,
            "last_value": jnum(*octaves.last().expect("ladder nonempty")),
            "last_rel_increment": jnum(last_rel),
            "octave_increment_slope": jnum(inc_slope),
        }));
    }
    let table = with_provenance(&table.into_inner()?, &run.hash, class::QUAD)?;
    write_artifact(&run.dir, "truncations.csv", &table)?;
    let deep = with_provenance(&deep.into_inner()?, &run.hash, class::QUAD)?;
    write_artifact(&run.dir, "deep_truncations.csv", &deep)?;

    // The empirical constant of the annuli chain: sup of the scaled bound.
    let max_scaled = annuli
        .iter()
        .map(|r| r.scaled_bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let ok = report_checks(&checks) && expect_ok;

    write_summary(
        run,
        &checks,
        json!({
            "profile": prof.describe(),
            "annuli_scaled_bound_sup": jnum(max_scaled),
            "weights": weight_reports,
            "expectations_met": expect_ok,
        }),
        &["annuli.csv", "truncations.csv", "deep_truncations.csv"],
    )?;
    Ok(ok)
}
