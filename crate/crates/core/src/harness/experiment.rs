//! End-to-end experiment runs: per-eps solves, error tracking, rate fits,
//! artifact emission, and resumability.

use super::config::{ExperimentConfig, Scenario};
use super::io::{snapshot_from_state, write_snapshot, CsvWriter};
use super::{compute_error_norms, fit_rate, hausdorff_distance};
use crate::asymptotics::{build_approx_solution, compute_lambda0};
use crate::diffuse::{
    blending_delta, component_to_curve, extract_zero_level, init_well_prepared_with_delta,
    DiffuseSolver, GridSpec, StepParams,
};
use crate::error::{Error, Result};
use crate::geometry::Curve;
use crate::numerics::pairwise_sum;
use crate::profiles::{build_default, ProfileTable};
use crate::sharp::{circle_oracle, vpmcf_evolve, FrontLaw, SharpState};
use std::path::{Path, PathBuf};

/// One per-eps record: named metrics, kept generic across scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsEntry {
    pub eps: f64,
    pub metrics: Vec<(String, f64)>,
}

impl EpsEntry {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Fitted rate of a metric across the eps sweep.
#[derive(Debug, Clone)]
pub struct RateFit {
    pub metric: String,
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub entries: Vec<EpsEntry>,
    pub rates: Vec<RateFit>,
}

fn entry_path(out: &Path, idx: usize) -> PathBuf {
    out.join(format!("entry_{idx:02}.csv"))
}

fn write_entry(path: &Path, entry: &EpsEntry) -> Result<()> {
    let mut header = vec!["eps".to_string()];
    header.extend(entry.metrics.iter().map(|(n, _)| n.clone()));
    let mut values = vec![format!("{:.16e}", entry.eps)];
    values.extend(entry.metrics.iter().map(|(_, v)| format!("{v:.16e}")));
    std::fs::write(path, format!("{}\n{}\n", header.join(","), values.join(",")))?;
    Ok(())
}

fn read_entry(path: &Path) -> Option<EpsEntry> {
    let text = std::fs::read_to_string(path).ok()?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next()?.split(',').collect();
    let values: Vec<f64> =
        lines.next()?.split(',').map(|v| v.trim().parse().ok()).collect::<Option<_>>()?;
    if header.len() != values.len() || header.first() != Some(&"eps") {
        return None;
    }
    Some(EpsEntry {
        eps: values[0],
        metrics: header[1..].iter().map(|s| s.to_string()).zip(values[1..].iter().copied()).collect(),
    })
}

/// Run the configured experiment, writing artifacts under `out`.
/// Re-running with existing per-eps entry files skips those entries and
/// reproduces the identical report.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let pot = cfg.potential.build()?;
    let table = build_default(&pot)?;

    let mut entries = Vec::new();
    for (idx, &eps) in cfg.eps_list.iter().enumerate() {
        let epath = entry_path(out, idx);
        if let Some(entry) = read_entry(&epath) {
            if (entry.eps - eps).abs() <= 1e-12 * eps {
                entries.push(entry);
                continue;
            }
        }
        let entry = match cfg.scenario {
            Scenario::StationaryCircle => stationary_circle_entry(cfg, &table, eps, idx, out)?,
            Scenario::TwoCircles => two_circles_entry(cfg, &table, eps, idx, out)?,
            Scenario::FlatInterface => flat_interface_entry(cfg, &table, eps)?,
            Scenario::CoupledNsac => coupled_entry(cfg, &table, eps, idx, out)?,
        };
        write_entry(&epath, &entry)?;
        entries.push(entry);
    }

    // rate fits over the sweep for the decaying metrics
    let mut rates = Vec::new();
    if entries.len() >= 3 {
        for metric in ["sup_l2", "hausdorff"] {
            let pairs: Vec<(f64, f64)> = entries
                .iter()
                .filter_map(|e| e.get(metric).map(|v| (e.eps, v)))
                .collect();
            if pairs.len() == entries.len() {
                let eps: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let vals: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                if let Ok((rate, intercept, r2)) = fit_rate(&eps, &vals) {
                    rates.push(RateFit { metric: metric.into(), rate, intercept, r2 });
                }
            }
        }
    }

    // report files
    if let Some(first) = entries.first() {
        let mut header: Vec<&str> = vec!["eps"];
        let names: Vec<String> = first.metrics.iter().map(|(n, _)| n.clone()).collect();
        header.extend(names.iter().map(|s| s.as_str()));
        let mut w = CsvWriter::new(&header);
        for e in &entries {
            let mut row = vec![e.eps];
            row.extend(e.metrics.iter().map(|(_, v)| *v));
            w.row(&row);
        }
        w.write(&out.join("report.csv"))?;
    }
    let mut w = CsvWriter::new(&["rate", "intercept", "r2"]);
    let mut rate_names = String::from("metric\n");
    for r in &rates {
        w.row(&[r.rate, r.intercept, r.r2]);
        rate_names.push_str(&r.metric);
        rate_names.push('\n');
    }
    w.write(&out.join("rates.csv"))?;
    std::fs::write(out.join("rates_metrics.txt"), rate_names)?;

    Ok(ExperimentReport { entries, rates })
}

fn l2_diff(a: &ndarray::Array2<f64>, b: &ndarray::Array2<f64>, cell: f64) -> f64 {
    let sq: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).collect();
    (pairwise_sum(&sq) * cell).sqrt()
}

fn stationary_circle_entry(
    cfg: &ExperimentConfig,
    table: &ProfileTable,
    eps: f64,
    idx: usize,
    out: &Path,
) -> Result<EpsEntry> {
    let n = cfg.grid_size(eps);
    let grid = GridSpec::new(n, n, cfg.domain, cfg.domain, cfg.bc())?;
    let center = [0.5 * cfg.domain, 0.5 * cfg.domain];
    let curve = Curve::circle(center, cfg.radius, cfg.curve_samples);
    let delta = blending_delta(&[curve.clone()], &grid)?;
    let lambda0 = compute_lambda0(&curve, None, table.sigma)?;
    let approx =
        build_approx_solution(grid, &[curve.clone()], eps, table, cfg.order, lambda0, delta, None)?;
    let mut state = init_well_prepared_with_delta(
        grid,
        &[curve.clone()],
        eps,
        table,
        cfg.order,
        lambda0,
        delta,
    )?;
    state.c = approx.c_a.clone();
    let mut solver = DiffuseSolver::new(state, table.pot.clone());
    let params = StepParams::allen_cahn(cfg.dt_factor * eps * eps);
    write_snapshot(
        &out.join(format!("snap_{idx:02}_t0.nsac")),
        &snapshot_from_state(&solver.state),
    )?;

    let mut diag_csv =
        CsvWriter::new(&["t", "mass", "energy", "lambda_eps", "dissipation", "l2_err"]);
    let cell = grid.cell_area();
    let mut sup_l2: f64 = l2_diff(&solver.state.c, &approx.c_a, cell);
    let d0 = solver.diagnostics(&params);
    diag_csv.row(&[d0.t, d0.mass, d0.energy, d0.lambda_eps, d0.dissipation, sup_l2]);
    let steps = (cfg.t_end / params.dt).round() as usize;
    let mut lambda_final = d0.lambda_eps;
    for step in 1..=steps {
        let d = solver.step(&params)?;
        lambda_final = d.lambda_eps;
        if step % cfg.output_every == 0 || step == steps {
            let err = l2_diff(&solver.state.c, &approx.c_a, cell);
            sup_l2 = sup_l2.max(err);
            diag_csv.row(&[d.t, d.mass, d.energy, d.lambda_eps, d.dissipation, err]);
        }
    }
    diag_csv.write(&out.join(format!("diag_{idx:02}.csv")))?;
    write_snapshot(
        &out.join(format!("snap_{idx:02}_final.nsac")),
        &snapshot_from_state(&solver.state),
    )?;

    // interface position error
    let comps = extract_zero_level(&grid, &solver.state.c)?;
    let extracted = component_to_curve(&comps[0], cfg.curve_samples)?;
    let hausdorff = hausdorff_distance(&extracted.points, &curve.points);
    // full error-norm breakdown at the final time
    let norms = compute_error_norms(&solver.state.c, &approx.c_a, &grid, &curve, delta, eps)?;

    Ok(EpsEntry {
        eps,
        metrics: vec![
            ("sup_l2".into(), sup_l2),
            ("hausdorff".into(), hausdorff),
            ("lambda_eps".into(), lambda_final),
            ("lambda0".into(), lambda0),
            ("grad_tangential".into(), norms.grad_tangential),
            ("grad_normal_eps".into(), norms.grad_normal_eps),
            ("h2_proxy".into(), norms.h2_proxy),
        ],
    })
}

fn two_circle_curves(cfg: &ExperimentConfig) -> (Curve, Curve, [f64; 2], [f64; 2]) {
    let l = cfg.domain;
    let r1 = cfg.radius;
    let r2 = cfg.radius2.unwrap_or(cfg.radius * 1.12);
    let c1 = [0.25 * l, 0.5 * l];
    let c2 = [0.74 * l, 0.5 * l];
    (
        Curve::circle(c1, r1, cfg.curve_samples),
        Curve::circle(c2, r2, cfg.curve_samples),
        c1,
        c2,
    )
}

fn two_circles_entry(
    cfg: &ExperimentConfig,
    table: &ProfileTable,
    eps: f64,
    idx: usize,
    out: &Path,
) -> Result<EpsEntry> {
    let n = cfg.grid_size(eps);
    let grid = GridSpec::new(n, n, cfg.domain, cfg.domain, cfg.bc())?;
    let (curve1, curve2, _, _) = two_circle_curves(cfg);
    let r1 = cfg.radius;
    let r2 = cfg.radius2.unwrap_or(cfg.radius * 1.12);
    let curves = vec![curve1.clone(), curve2.clone()];
    let delta = blending_delta(&curves, &grid)?;
    let state = init_well_prepared_with_delta(grid, &curves, eps, table, 0, 0.0, delta)?;
    let mut solver = DiffuseSolver::new(state, table.pot.clone());
    let params = StepParams::allen_cahn(cfg.dt_factor * eps * eps);
    let steps = (cfg.t_end / params.dt).round() as usize;
    let mut diag_csv = CsvWriter::new(&["t", "mass", "energy", "lambda_eps"]);
    for step in 1..=steps {
        let d = solver.step(&params)?;
        if step % cfg.output_every == 0 || step == steps {
            diag_csv.row(&[d.t, d.mass, d.energy, d.lambda_eps]);
        }
    }
    diag_csv.write(&out.join(format!("diag_{idx:02}.csv")))?;
    write_snapshot(
        &out.join(format!("snap_{idx:02}_final.nsac")),
        &snapshot_from_state(&solver.state),
    )?;

    // diffuse radii from component areas
    let comps = extract_zero_level(&grid, &solver.state.c)?;
    if comps.len() < 2 {
        return Err(Error::NoInterface);
    }
    let mut radii_diffuse: Vec<f64> = comps
        .iter()
        .take(2)
        .map(|c| {
            component_to_curve(c, cfg.curve_samples)
                .map(|cc| (cc.polygon_area() / std::f64::consts::PI).sqrt())
        })
        .collect::<Result<_>>()?;
    radii_diffuse.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // oracle radii
    let mut oracle = circle_oracle(&[r1, r2], cfg.t_end)?;
    oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let diffuse_err = radii_diffuse
        .iter()
        .zip(&oracle)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0f64, f64::max);

    // front tracking against the same oracle
    let ds = (2.0 * std::f64::consts::PI * r1.min(r2)) / cfg.curve_samples as f64;
    let dt_ft = 0.2 * ds * ds;
    let sharp0 = SharpState::new(vec![curve1, curve2]);
    let sharp = vpmcf_evolve(&sharp0, cfg.t_end, dt_ft, FrontLaw::VolumePreserving, None, |_| {})?;
    let mut radii_ft: Vec<f64> = sharp
        .curves
        .iter()
        .map(|c| (c.polygon_area() / std::f64::consts::PI).sqrt())
        .collect();
    radii_ft.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ft_err = radii_ft
        .iter()
        .zip(&oracle)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0f64, f64::max);

    Ok(EpsEntry {
        eps,
        metrics: vec![
            ("diffuse_radii_rel_err".into(), diffuse_err),
            ("front_tracking_rel_err".into(), ft_err),
            ("oracle_r_small".into(), oracle[0]),
            ("oracle_r_big".into(), oracle[1]),
        ],
    })
}

fn flat_interface_entry(
    cfg: &ExperimentConfig,
    table: &ProfileTable,
    eps: f64,
) -> Result<EpsEntry> {
    let n = cfg.grid_size(eps);
    let grid = GridSpec::new(n, n, cfg.domain, cfg.domain, crate::diffuse::Bc::WallNeumannNoSlip)?;
    let (u, v) = crate::diffuse::zero_velocity(&grid);
    let x0 = 0.5 * cfg.domain;
    let c = ndarray::Array2::from_shape_fn((n, n), |(_, i)| {
        table.theta0_at((grid.center(i, 0)[0] - x0) / eps)
    });
    let state = crate::diffuse::DiffuseState {
        grid,
        c,
        u,
        v,
        p: ndarray::Array2::zeros((n, n)),
        t: 0.0,
        eps,
    };
    let mut solver = DiffuseSolver::new(state, table.pot.clone());
    let params = StepParams::allen_cahn(cfg.dt_factor * eps * eps);
    let zero_cross = |solver: &DiffuseSolver| -> f64 {
        let j = n / 2;
        for i in 0..n - 1 {
            let (a, b) = (solver.state.c[(j, i)], solver.state.c[(j, i + 1)]);
            if a <= 0.0 && b > 0.0 {
                return grid.center(i, j)[0] + a / (a - b) * grid.hx();
            }
        }
        f64::NAN
    };
    let start = zero_cross(&solver);
    let steps = (cfg.t_end / params.dt).round() as usize;
    let mut lambda_max: f64 = 0.0;
    for _ in 0..steps {
        let d = solver.step(&params)?;
        lambda_max = lambda_max.max(d.lambda_eps.abs());
    }
    let drift = (zero_cross(&solver) - start).abs();
    Ok(EpsEntry {
        eps,
        metrics: vec![("drift".into(), drift), ("lambda_abs_max".into(), lambda_max)],
    })
}

fn coupled_entry(
    cfg: &ExperimentConfig,
    table: &ProfileTable,
    eps: f64,
    idx: usize,
    out: &Path,
) -> Result<EpsEntry> {
    let n = cfg.grid_size(eps);
    let grid = GridSpec::new(n, n, cfg.domain, cfg.domain, cfg.bc())?;
    let center = [0.5 * cfg.domain, 0.5 * cfg.domain];
    let curve = Curve::circle(center, cfg.radius, cfg.curve_samples);
    let delta = blending_delta(&[curve.clone()], &grid)?;
    let lambda0 = compute_lambda0(&curve, None, table.sigma)?;
    let state =
        init_well_prepared_with_delta(grid, &[curve], eps, table, cfg.order, lambda0, delta)?;
    let mut solver = DiffuseSolver::new(state, table.pot.clone());
    let numax = cfg.nu_plus.max(cfg.nu_minus);
    let h = grid.hx();
    let dt = (cfg.dt_factor * eps * eps).min(0.2 * h * h * (1.0 / numax).min(1.0));
    let params = StepParams::coupled(dt, cfg.nu_plus, cfg.nu_minus);
    let steps = (cfg.t_end / dt).round() as usize;
    let e0 = solver.diagnostics(&params).energy;
    let m0 = solver.diagnostics(&params).mass;
    let mut max_div: f64 = 0.0;
    let mut energy_excess: f64 = 0.0;
    let mut mass_drift: f64 = 0.0;
    let mut diag_csv = CsvWriter::new(&["t", "mass", "energy", "lambda_eps", "max_div"]);
    for step in 1..=steps {
        let d = solver.step(&params)?;
        max_div = max_div.max(d.max_div);
        energy_excess = energy_excess.max(d.energy - e0);
        mass_drift = mass_drift.max(((d.mass - m0) / m0).abs());
        if step % cfg.output_every == 0 || step == steps {
            diag_csv.row(&[d.t, d.mass, d.energy, d.lambda_eps, d.max_div]);
        }
    }
    diag_csv.write(&out.join(format!("diag_{idx:02}.csv")))?;
    write_snapshot(
        &out.join(format!("snap_{idx:02}_final.nsac")),
        &snapshot_from_state(&solver.state),
    )?;
    Ok(EpsEntry {
        eps,
        metrics: vec![
            ("max_div".into(), max_div),
            ("energy_excess".into(), energy_excess),
            ("mass_drift".into(), mass_drift),
            ("steps".into(), steps as f64),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::PotentialConfig;

    fn small_flat_config() -> ExperimentConfig {
        ExperimentConfig {
            scenario: Scenario::FlatInterface,
            eps_list: vec![0.05],
            order: 0,
            t_end: 0.01,
            dt_factor: 0.25,
            points_per_eps: 4.0,
            domain: 1.0,
            walls: true,
            nu_plus: 1.0,
            nu_minus: 1.0,
            potential: PotentialConfig::Named("standard".into()),
            radius: 0.25,
            radius2: None,
            output_every: 10,
            curve_samples: 128,
        }
    }

    #[test]
    fn flat_interface_run_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_flat_config();
        let rep1 = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(rep1.entries.len(), 1);
        let drift = rep1.entries[0].get("drift").unwrap();
        assert!(drift <= 1e-6, "flat interface drifted {drift}");
        let report_bytes = std::fs::read(dir.path().join("report.csv")).unwrap();
        // resume: identical report without recomputation
        let rep2 = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(rep1.entries, rep2.entries);
        let report_bytes2 = std::fs::read(dir.path().join("report.csv")).unwrap();
        assert_eq!(report_bytes, report_bytes2);
    }

    #[test]
    fn determinism_across_fresh_runs() {
        let cfg = small_flat_config();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run_experiment(&cfg, d1.path()).unwrap();
        run_experiment(&cfg, d2.path()).unwrap();
        let b1 = std::fs::read(d1.path().join("report.csv")).unwrap();
        let b2 = std::fs::read(d2.path().join("report.csv")).unwrap();
        assert_eq!(b1, b2, "reports differ between identical runs");
    }
}
