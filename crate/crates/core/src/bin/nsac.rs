//! Command-line entry points for the phase-field laboratory.
//!
//! Exit codes: 0 success, 2 invalid input/configuration, 3 numerical
//! failure.

use clap::{Parser, Subcommand};
use nsac::asymptotics::{build_approx_solution, compute_lambda0, residual_norms};
use nsac::diffuse::{blending_delta, GridSpec};
use nsac::error::Error;
use nsac::fft::LaplaceSymbol;
use nsac::geometry::{read_curve_csv, write_curve_csv, Curve};
use nsac::harness::config::ExperimentConfig;
use nsac::harness::experiment::run_experiment;
use nsac::harness::io::CsvWriter;
use nsac::potential::{sigma_from_potential, Potential};
use nsac::profiles::{
    build_default, solve_c1, solve_theta0, solve_theta1, theta0_residual_fine,
    theta1_residual_fine,
};
use nsac::sharp::{vpmcf_evolve, FrontLaw, SharpState};
use nsac::spectral::{smallest_eigenvalue_extrapolated, sweep_mesh};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "nsac", about = "Mass-conserving Navier-Stokes/Allen-Cahn laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the transversal profiles and their identities
    Profiles {
        #[arg(long, default_value = "out/profiles")]
        out: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        length: f64,
        #[arg(long, default_value_t = 0.01)]
        drho: f64,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        lambda0: f64,
    },
    /// Run one diffuse simulation from a config file
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out/simulate")]
        out: PathBuf,
    },
    /// Front-tracking run of the volume-preserving law
    Sharp {
        /// CSV of curve samples; a flower curve is used when absent
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        t_end: f64,
        /// time step; defaults to 0.2 (L/N)^2
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 512)]
        samples: usize,
        #[arg(long, default_value = "out/sharp")]
        out: PathBuf,
    },
    /// Eigenvalue sweep of the 1D linearized layer operator
    Spectral {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.05, 0.025, 0.0125])]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        order: u8,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        lambda0: f64,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long, default_value = "out/spectral")]
        out: PathBuf,
    },
    /// Build the layer ansatz on a circle and report its residual norms
    Asymptotics {
        #[arg(long, default_value_t = 0.02)]
        eps: f64,
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[arg(long, default_value_t = 1)]
        order: u8,
        #[arg(long, default_value_t = 2.0)]
        domain: f64,
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
        #[arg(long, default_value = "out/asymptotics")]
        out: PathBuf,
    },
    /// Full eps-sweep convergence experiment from a config file
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out/converge")]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(if e.is_validation() { 2 } else { 3 });
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Profiles { out, length, drho, lambda0 } => {
            std::fs::create_dir_all(&out)?;
            let pot = Potential::standard();
            let mut table = solve_theta0(&pot, length, drho)?;
            solve_theta1(&mut table)?;
            let c1_resid = solve_c1(&mut table, lambda0)?;
            let mut csv = CsvWriter::new(&["rho", "theta0", "theta0_prime", "theta1", "c1"]);
            for i in 0..table.n() {
                csv.row(&[
                    table.rho[i],
                    table.theta0[i],
                    table.theta0_prime[i],
                    table.theta1[i],
                    table.c1[i],
                ]);
            }
            csv.write(&out.join("profiles.csv"))?;
            let sigma_c = sigma_from_potential(&pot)?;
            println!(
                "sigma(rho-side) = {:.12}  sigma(c-side) = {:.12}  alpha = {:.6}",
                table.sigma, sigma_c, table.alpha
            );
            println!(
                "residuals: theta0 = {:.3e}  theta1 = {:.3e}  c1 = {:.3e}",
                theta0_residual_fine(&table),
                theta1_residual_fine(&table),
                c1_resid
            );
            Ok(())
        }
        Command::Simulate { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let report = run_experiment(&cfg, &out)?;
            for e in &report.entries {
                let metrics: Vec<String> =
                    e.metrics.iter().map(|(n, v)| format!("{n} = {v:.6e}")).collect();
                println!("eps = {:.4}: {}", e.eps, metrics.join(", "));
            }
            Ok(())
        }
        Command::Sharp { curve, t_end, dt, samples, out } => {
            std::fs::create_dir_all(&out)?;
            let c = match curve {
                Some(path) => read_curve_csv(&path, samples)?,
                None => Curve::flower([0.0, 0.0], 1.0, 0.15, 5, samples)?,
            };
            let ds = c.length / samples as f64;
            let dt = dt.unwrap_or(0.2 * ds * ds);
            let state = SharpState::new(vec![c]);
            let mut csv = CsvWriter::new(&["t", "length", "area", "mean_curvature"]);
            let mut snap_idx = 0usize;
            let every = ((t_end / dt) as usize / 20).max(1);
            let mut count = 0usize;
            let final_state = vpmcf_evolve(
                &state,
                t_end,
                dt,
                FrontLaw::VolumePreserving,
                None,
                |s| {
                    let q = s.curves[0].quantities().unwrap();
                    let hbar = q.kappa.iter().sum::<f64>() / q.kappa.len() as f64;
                    csv.row(&[s.t, s.total_length(), s.total_area(), hbar]);
                    if count % every == 0 {
                        let path = out.join(format!("curve_{snap_idx:03}.csv"));
                        let _ = write_curve_csv(&path, &s.curves[0]);
                        snap_idx += 1;
                    }
                    count += 1;
                },
            )?;
            csv.write(&out.join("evolution.csv"))?;
            write_curve_csv(&out.join("curve_final.csv"), &final_state.curves[0])?;
            println!(
                "area drift = {:.3e}, final length = {:.6}",
                (final_state.total_area() - final_state.initial_area)
                    / final_state.initial_area,
                final_state.total_length()
            );
            Ok(())
        }
        Command::Spectral { eps, order, lambda0, delta, out } => {
            std::fs::create_dir_all(&out)?;
            let table = build_default(&Potential::standard())?;
            let mut csv = CsvWriter::new(&["eps", "min_eig", "overlap_with_theta0prime"]);
            for &e in &eps {
                let (lam, op, vec) = smallest_eigenvalue_extrapolated(
                    &table,
                    e,
                    sweep_mesh(e),
                    order,
                    lambda0,
                    delta,
                )?;
                let mut mode: Vec<f64> =
                    op.r.iter().map(|&r| table.theta0_prime_at(r / e)).collect();
                let norm = mode.iter().map(|&x| x * x).sum::<f64>().sqrt();
                mode.iter_mut().for_each(|x| *x /= norm);
                let vnorm = vec.iter().map(|&x| x * x).sum::<f64>().sqrt();
                let overlap =
                    mode.iter().zip(&vec).map(|(a, b)| a * b / vnorm).sum::<f64>().abs();
                println!("eps = {e:.4}: min eigenvalue = {lam:+.6}, overlap = {overlap:.6}");
                csv.row(&[e, lam, overlap]);
            }
            csv.write(&out.join("spectral.csv"))?;
            Ok(())
        }
        Command::Asymptotics { eps, grid, order, domain, radius, out } => {
            std::fs::create_dir_all(&out)?;
            let table = build_default(&Potential::standard())?;
            let g = GridSpec::new(grid, grid, domain, domain, nsac::diffuse::Bc::Periodic)?;
            let curve = Curve::circle([0.5 * domain, 0.5 * domain], radius, 512);
            let delta = blending_delta(&[curve.clone()], &g)?;
            let lambda0 = compute_lambda0(&curve, None, table.sigma)?;
            let approx = build_approx_solution(
                g,
                &[curve.clone()],
                eps,
                &table,
                order,
                lambda0,
                delta,
                None,
            )?;
            let norms = residual_norms(
                &approx,
                None,
                None,
                lambda0,
                &Potential::standard(),
                &[curve],
                LaplaceSymbol::Spectral,
            )?;
            let snap = nsac::harness::io::Snapshot {
                nx: grid as u32,
                ny: grid as u32,
                lx: domain,
                ly: domain,
                t: 0.0,
                eps,
                c: approx.c_a.clone(),
                vx: ndarray::Array2::zeros((grid, grid)),
                vy: ndarray::Array2::zeros((grid, grid)),
                p: ndarray::Array2::zeros((grid, grid)),
            };
            nsac::harness::io::write_snapshot(&out.join("c_a.nsac"), &snap)?;
            let mut csv = CsvWriter::new(&[
                "eps",
                "lambda0",
                "l2_omega",
                "l1_tube",
                "l2_bulk",
                "l2_omega_centered",
                "l1_tube_centered",
            ]);
            csv.row(&[
                eps,
                lambda0,
                norms.l2_omega,
                norms.l1_tube,
                norms.l2_bulk,
                norms.l2_omega_centered,
                norms.l1_tube_centered,
            ]);
            csv.write(&out.join("residuals.csv"))?;
            println!(
                "lambda0 = {lambda0:.6}; residual L2 = {:.4e} (centered {:.4e})",
                norms.l2_omega, norms.l2_omega_centered
            );
            Ok(())
        }
        Command::Converge { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let report = run_experiment(&cfg, &out)?;
            for e in &report.entries {
                let metrics: Vec<String> =
                    e.metrics.iter().map(|(n, v)| format!("{n} = {v:.6e}")).collect();
                println!("eps = {:.4}: {}", e.eps, metrics.join(", "));
            }
            for r in &report.rates {
                println!("rate[{}] = {:.3} (r2 = {:.4})", r.metric, r.rate, r.r2);
            }
            Ok(())
        }
    }
}
