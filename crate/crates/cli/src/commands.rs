use fluxon::expansion::{b_field_singular, psi_singular};
use fluxon::sphere_oracle::{remainder_analysis, RemainderConfig};
use fluxon::verification::{log_cutoff_fit, smeared_potential, Profile, SmearDensity, VerificationReport};
use fluxon::LocalPoint;

use crate::config::{CommandConfig, ProfileKind, RunConfig};
use crate::output::{Cell, Table};

/// Result of one command: the table to write and, for checks, whether
/// everything passed.
pub struct Outcome {
    pub table: Table,
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(table: Table) -> Self {
        Self { table, failure: None }
    }
}

fn point_cells(p: &LocalPoint) -> [Cell; 3] {
    [p.x.into(), p.y.into(), p.z.into()]
}

fn located(p: &LocalPoint, e: impl std::fmt::Display) -> String {
    format!("at ({}, {}, {}): {e}", p.x, p.y, p.z)
}

/// Sweep of core widths used by the log-cutoff fit: seven values over
/// three decades starting at `w`.
pub fn cutoff_widths(w: f64) -> Vec<f64> {
    (0..7).map(|i| w * 10f64.powf(0.5 * i as f64)).collect()
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, String> {
    let resolved = cfg.resolve()?;
    let params = resolved.params;
    match &cfg.command {
        CommandConfig::Eval { points } => {
            let mut t = Table::new("eval", vec!["x", "y", "z", "psi0", "psi1s", "psi1r", "total"]);
            for p in points {
                let b = psi_singular(p, &params).map_err(|e| located(p, e))?;
                let mut row = point_cells(p).to_vec();
                row.extend([b.psi0, b.psi1s, b.psi1r, b.total].map(Cell::from));
                t.push(row);
            }
            summarize_params(&mut t, cfg, &params);
            Ok(Outcome::ok(t))
        }
        CommandConfig::Field { points } => {
            let mut t = Table::new("field", vec!["x", "y", "z", "b_r", "b_theta", "b_phi", "b_magnitude"]);
            for p in points {
                let f = b_field_singular(p, &params).map_err(|e| located(p, e))?;
                let mut row = point_cells(p).to_vec();
                row.extend([f.b_r, f.b_theta, f.b_phi, f.magnitude()].map(Cell::from));
                t.push(row);
            }
            summarize_params(&mut t, cfg, &params);
            Ok(Outcome::ok(t))
        }
        CommandConfig::Check { suite } => {
            let report = suite.run(&params, &resolved.grid, &resolved.spec).map_err(|e| e.to_string())?;
            let failure = report.worst_failure().map(|e| {
                let at = e
                    .worst_point
                    .map_or_else(|| "no grid point recorded".to_string(), |p| format!("worst point ({}, {}, {})", p.x, p.y, p.z));
                let order = e.fitted_order.map_or_else(String::new, |o| format!(", fitted order {o:.4}"));
                format!("check {} failed: {} residual {:.6e}{order}, {at}", report.check, e.name, e.max_residual)
            });
            Ok(Outcome { table: report_table(&report), failure })
        }
        CommandConfig::SphereCompare { r_min, r_max, n, theta, phi, curvature } => {
            let a = cfg.surface.sphere_radius().ok_or("sphere-compare needs a sphere surface")?;
            let rc = RemainderConfig {
                charge: params.charge,
                theta: *theta,
                phi: *phi,
                r_min: r_min * a,
                r_max: r_max * a,
                n_points: *n,
                d: Some(params.d),
                curvature: *curvature,
                ..RemainderConfig::new(a)
            };
            let curve = remainder_analysis(&rc).map_err(|e| e.to_string())?;
            let mut t = Table::new("sphere-compare", vec!["r", "exact", "singular", "remainder", "cauchy"]);
            for s in &curve.samples {
                t.push([s.r, s.exact, s.singular, s.remainder, s.cauchy].map(Cell::from).to_vec());
            }
            t.summarize("cauchy_slope", curve.cauchy_slope);
            t.summarize("log_slope", curve.log_fit.slope);
            t.summarize("log_intercept", curve.log_fit.intercept);
            summarize_params(&mut t, cfg, &params);
            Ok(Outcome::ok(t))
        }
        CommandConfig::Smear { width, profile, points, cutoff_fit } => {
            if *cutoff_fit {
                let fit = log_cutoff_fit(&params, &cutoff_widths(*width)).map_err(|e| e.to_string())?;
                let mut t = Table::new("smear-cutoff", vec!["width", "value"]);
                for (w, v) in fit.widths.iter().zip(&fit.values) {
                    t.push(vec![(*w).into(), (*v).into()]);
                }
                t.summarize("inv_w", fit.inv_w);
                t.summarize("log", fit.log);
                t.summarize("constant", fit.constant);
                summarize_params(&mut t, cfg, &params);
                return Ok(Outcome::ok(t));
            }
            let shape = match profile {
                ProfileKind::Gaussian => Profile::Gaussian { w: *width },
                ProfileKind::Tophat => Profile::TopHat { w: *width },
            };
            let density = SmearDensity::new(vec![(1.0, shape)]).map_err(|e| e.to_string())?;
            let mut t = Table::new("smear", vec!["x", "y", "z", "smeared", "error", "point"]);
            for p in points {
                let s = smeared_potential(&density, &params, p).map_err(|e| located(p, e))?;
                // the point formula is undefined at the charge and on its axis
                let point = psi_singular(p, &params).ok().map(|b| b.total);
                let mut row = point_cells(p).to_vec();
                row.extend([s.value.into(), s.error.into(), point.into()]);
                t.push(row);
            }
            summarize_params(&mut t, cfg, &params);
            Ok(Outcome::ok(t))
        }
    }
}

fn summarize_params(t: &mut Table, cfg: &RunConfig, params: &fluxon::ExpansionParams) {
    t.summarize("surface", cfg.surface.to_string());
    t.summarize("nu", params.charge.nu());
    t.summarize("phi0", params.charge.phi0());
    t.summarize("k_x", params.k_x);
    t.summarize("k_y", params.k_y);
    t.summarize("d", params.d);
    t.summarize("k_plus", params.k_plus);
    t.summarize("k_minus", params.k_minus);
}

fn report_table(report: &VerificationReport) -> Table {
    let mut t = Table::new(
        "check",
        vec![
            "entry",
            "max_residual",
            "threshold",
            "fitted_order",
            "order_target",
            "order_tolerance",
            "worst_x",
            "worst_y",
            "worst_z",
            "passed",
            "note",
        ],
    );
    for e in &report.entries {
        let worst = e.worst_point.map_or([Cell::Empty, Cell::Empty, Cell::Empty], |p| point_cells(&p));
        let mut row = vec![
            e.name.as_str().into(),
            e.max_residual.into(),
            e.threshold.into(),
            e.fitted_order.into(),
            e.order_target.into(),
            e.order_tolerance.into(),
        ];
        row.extend(worst);
        row.push(e.passed.into());
        row.push(e.note.as_deref().map_or(Cell::Empty, Cell::from));
        t.push(row);
    }
    t.summarize("check", &report.check);
    t.summarize("grid", &report.grid);
    t.summarize("points", report.points);
    t.summarize("passed", report.passed);
    t
}

