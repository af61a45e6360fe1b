//! The five batch commands. Every command writes its CSV table and a plain
//! text log under the output directory; nothing written there depends on
//! timing or thread scheduling.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sddr::ddr::{DdrComplex, DofVector};
use sddr::mesh::{generate_cubic_mesh, generate_tet_mesh, read_mesh};
use sddr::ns::problems::{pressflux, trig, trig_essential, TrigSolution};
use sddr::ns::{newton_solve, NewtonOptions, ProblemSpec, Solution};
use sddr::verify::{
    compute_errors, estimate_constants, run_property_suite, with_rates, write_error_csv, CheckStatus, ErrorReport,
    ExactSolution, MeshCase, SuiteOptions, DEFAULT_DENSE_CAP,
};
use sddr::Mesh;
use thiserror::Error;

use crate::config::{BcPreset, Command, MeshSource, RunConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot load mesh: {0}")]
    Mesh(String),
    #[error("cannot build the discrete complex on level {n}: {reason}")]
    Complex { n: usize, reason: String },
    #[error("cannot write {path}: {reason}")]
    Output { path: PathBuf, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// At least one level did not converge.
    SolverFailure,
    /// At least one property check failed.
    PropertyFailure,
}

/// Ascent steps per start for the Sobolev lower bound.
const SOBOLEV_ASCENT_STEPS: usize = 30;

struct Level {
    n: usize,
    mesh: Mesh,
}

fn load_levels(cfg: &RunConfig) -> Result<Vec<Level>, RunError> {
    match &cfg.mesh {
        MeshSource::Cubic => Ok(cfg.levels.iter().map(|&n| Level { n, mesh: generate_cubic_mesh(n) }).collect()),
        MeshSource::Tet => Ok(cfg.levels.iter().map(|&n| Level { n, mesh: generate_tet_mesh(n) }).collect()),
        MeshSource::File(p) => {
            let mesh = read_mesh(p).map_err(|e| RunError::Mesh(format!("{}: {e}", p.display())))?;
            Ok(vec![Level { n: 1, mesh }])
        }
    }
}

fn complex(level: &Level, k: usize) -> Result<DdrComplex, RunError> {
    DdrComplex::new(level.mesh.clone(), k).map_err(|e| RunError::Complex {
        n: level.n,
        reason: e.to_string(),
    })
}

/// Maps `f` over the levels, in parallel when requested, keeping level order.
fn map_levels<T: Send>(cfg: &RunConfig, levels: &[Level], f: impl Fn(&Level) -> T + Sync + Send) -> Vec<T> {
    if cfg.parallel_levels {
        levels.par_iter().map(f).collect()
    } else {
        levels.iter().map(f).collect()
    }
}

fn newton_options(cfg: &RunConfig) -> NewtonOptions {
    NewtonOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        ..NewtonOptions::default()
    }
}

fn trig_problem(cfg: &RunConfig, lambda: f64) -> ProblemSpec {
    let mut spec = match cfg.bc {
        BcPreset::Essential => trig_essential(lambda, 1.0),
        _ => trig(lambda, 1.0),
    };
    let nu = cfg.nu;
    let sol = TrigSolution { lambda };
    spec.nu = nu;
    spec.forcing = std::sync::Arc::new(move |x| sol.forcing(nu, x));
    spec
}

/// Result of one solve on one level, already rendered for the log.
struct Solved {
    n: usize,
    log: String,
    solution: Option<(DdrComplex, Solution)>,
}

fn solve_level(level: &Level, cfg: &RunConfig, spec: &ProblemSpec) -> Result<Solved, RunError> {
    let dd = complex(level, cfg.k)?;
    let mut log = String::new();
    let solution = match newton_solve(&dd, spec, &newton_options(cfg)) {
        Ok(sol) => {
            let d = &sol.diagnostics;
            let _ = writeln!(
                log,
                "level n={} cells={} dim_condensed={} iterations={} converged={} residual={:e}",
                level.n,
                dd.mesh().n_cells(),
                d.dim_condensed,
                d.iterations,
                d.converged,
                d.residual_history.last().copied().unwrap_or(0.0) / d.reference_residual.max(f64::MIN_POSITIVE),
            );
            if d.converged {
                Some((dd, sol))
            } else {
                let _ = writeln!(log, "level n={} aborted: no convergence", level.n);
                None
            }
        }
        Err(e) => {
            let _ = writeln!(log, "level n={} aborted: {e}", level.n);
            None
        }
    };
    Ok(Solved {
        n: level.n,
        log,
        solution,
    })
}

fn create(path: &Path) -> Result<fs::File, RunError> {
    fs::File::create(path).map_err(|e| RunError::Output {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn output_error(path: &Path, e: impl ToString) -> RunError {
    RunError::Output {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| output_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| output_error(path, e))?;
    }
    w.flush().map_err(|e| output_error(path, e))
}

fn header(cfg: &RunConfig) -> String {
    format!(
        "command={} mesh={} levels={:?} k={} nu={:e} lambda={:e} bc={} tol={:e} max_iter={} seed={}\n",
        cfg.command,
        match &cfg.mesh {
            MeshSource::File(p) => format!("file:{}", p.display()),
            m => m.family().to_string(),
        },
        cfg.levels,
        cfg.k,
        cfg.nu,
        cfg.lambda,
        cfg.bc,
        cfg.tol,
        cfg.max_iter,
        cfg.seed,
    )
}

/// Runs the configured command, writing its table and `run.log` to
/// `cfg.out`. The log text is also returned for display.
pub fn execute(cfg: &RunConfig) -> Result<(Outcome, String), RunError> {
    fs::create_dir_all(&cfg.out).map_err(|e| output_error(&cfg.out, e))?;
    let levels = load_levels(cfg)?;
    let mut log = header(cfg);
    let outcome = match cfg.command {
        Command::Convergence => convergence(cfg, &levels, &mut log)?,
        Command::Robustness => robustness(cfg, &levels, &mut log)?,
        Command::Pressflux => pressure_flux(cfg, &levels, &mut log)?,
        Command::Properties => properties(cfg, levels, &mut log)?,
        Command::Constants => constants(cfg, &levels, &mut log)?,
    };
    let _ = writeln!(log, "outcome={outcome:?}");
    let path = cfg.out.join("run.log");
    fs::write(&path, &log).map_err(|e| output_error(&path, e))?;
    Ok((outcome, log))
}

fn error_reports(cfg: &RunConfig, levels: &[Level], lambda: f64, log: &mut String) -> Result<(Vec<(usize, ErrorReport, DofVector)>, bool), RunError> {
    let spec = trig_problem(cfg, lambda);
    let exact = ExactSolution::trig(lambda);
    let solved = map_levels(cfg, levels, |l| {
        solve_level(l, cfg, &spec).map(|s| {
            let report = s.solution.as_ref().map(|(dd, sol)| {
                let mut r = compute_errors(dd, &sol.velocity, &sol.pressure, &exact);
                r.dim_condensed = sol.diagnostics.dim_condensed;
                (r, sol.velocity.clone())
            });
            (s.n, s.log, report)
        })
    });
    let mut out = Vec::new();
    let mut all = true;
    for s in solved {
        let (n, text, report) = s?;
        log.push_str(&text);
        match report {
            Some((r, u)) => out.push((n, r, u)),
            None => all = false,
        }
    }
    Ok((out, all))
}

fn convergence(cfg: &RunConfig, levels: &[Level], log: &mut String) -> Result<Outcome, RunError> {
    let (solved, all) = error_reports(cfg, levels, cfg.lambda, log)?;
    let reports = with_rates(solved.into_iter().map(|(_, r, _)| r).collect());
    for r in &reports {
        let _ = writeln!(log, "h={:e} errors={:?} eoc={:?}", r.h, r.errors, r.eoc);
    }
    let path = cfg.out.join(format!("convergence_k{}.csv", cfg.k));
    write_error_csv(create(&path)?, &reports).map_err(|e| output_error(&path, e))?;
    Ok(if all { Outcome::Success } else { Outcome::SolverFailure })
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Solves with `λ` and `100 λ` and compares the velocity errors and the
/// velocity DoF vectors level by level.
fn robustness(cfg: &RunConfig, levels: &[Level], log: &mut String) -> Result<Outcome, RunError> {
    let (low, all_low) = error_reports(cfg, levels, cfg.lambda, log)?;
    let (high, all_high) = error_reports(cfg, levels, 100.0 * cfg.lambda, log)?;
    let mut rows = Vec::new();
    for (n, a, ua) in &low {
        let Some((_, b, ub)) = high.iter().find(|(m, _, _)| m == n) else {
            continue;
        };
        let du = (&ua.values - &ub.values).norm() / ua.values.norm().max(f64::MIN_POSITIVE);
        let row = vec![
            format!("{:e}", a.h),
            format!("{:e}", a.e_du()),
            format!("{:e}", b.e_du()),
            format!("{:e}", a.e_pu()),
            format!("{:e}", b.e_pu()),
            format!("{:e}", relative(a.e_du(), b.e_du())),
            format!("{:e}", relative(a.e_pu(), b.e_pu())),
            format!("{du:e}"),
        ];
        let _ = writeln!(log, "robustness n={n} {}", row.join(" "));
        rows.push(row);
    }
    write_table(
        &cfg.out.join(format!("robustness_k{}.csv", cfg.k)),
        &[
            "MeshSize",
            "E^d_u",
            "E^d_u_scaled",
            "E^p_u",
            "E^p_u_scaled",
            "RelDiff_E^d_u",
            "RelDiff_E^p_u",
            "RelDiff_Velocity",
        ],
        &rows,
    )?;
    Ok(if all_low && all_high { Outcome::Success } else { Outcome::SolverFailure })
}

fn pressure_flux(cfg: &RunConfig, levels: &[Level], log: &mut String) -> Result<Outcome, RunError> {
    let spec = pressflux(1.0 / cfg.nu);
    let solved = map_levels(cfg, levels, |l| {
        solve_level(l, cfg, &spec).map(|s| {
            let row = s.solution.as_ref().map(|(dd, sol)| {
                let gp = dd.global_gradient(&sol.pressure);
                vec![
                    format!("{:e}", dd.mesh().h()),
                    sol.diagnostics.dim_condensed.to_string(),
                    sol.diagnostics.iterations.to_string(),
                    format!("{:e}", dd.l2_norm(&sol.velocity)),
                    format!("{:e}", dd.l2_norm(&dd.global_curl(&sol.velocity))),
                    format!("{:e}", dd.l2_norm(&sol.pressure)),
                    format!("{:e}", dd.l2_norm(&gp)),
                ]
            });
            (s.log, row)
        })
    });
    let mut rows = Vec::new();
    let mut all = true;
    for s in solved {
        let (text, row) = s?;
        log.push_str(&text);
        match row {
            Some(r) => rows.push(r),
            None => all = false,
        }
    }
    write_table(
        &cfg.out.join(format!("pressflux_k{}.csv", cfg.k)),
        &[
            "MeshSize",
            "DimCondensed",
            "Iterations",
            "NormVelocity",
            "NormCurlVelocity",
            "NormPressure",
            "NormGradPressure",
        ],
        &rows,
    )?;
    Ok(if all { Outcome::Success } else { Outcome::SolverFailure })
}

/// Property matrix for every degree up to `k`.
fn properties(cfg: &RunConfig, levels: Vec<Level>, log: &mut String) -> Result<Outcome, RunError> {
    let family = cfg.mesh.family().to_string();
    let cases: Vec<MeshCase> = levels
        .into_iter()
        .map(|l| MeshCase {
            family: family.clone(),
            n: l.n,
            mesh: l.mesh,
        })
        .collect();
    let degrees: Vec<usize> = (0..=cfg.k).collect();
    let opts = SuiteOptions {
        samples: cfg.samples,
        seed: cfg.seed,
        ..SuiteOptions::default()
    };
    let report = run_property_suite(&cases, &degrees, &opts);
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| {
            vec![
                c.family.clone(),
                c.n.to_string(),
                c.k.map(|k| k.to_string()).unwrap_or_default(),
                c.name.to_string(),
                format!("{:?}", c.status),
                format!("{:e}", c.value),
            ]
        })
        .collect();
    for c in report.checks.iter().filter(|c| c.status != CheckStatus::Pass) {
        let k = c.k.map(|k| format!(" k={k}")).unwrap_or_default();
        let _ = writeln!(log, "{:?}: {} n={}{k} {} value={:e}", c.status, c.family, c.n, c.name, c.value);
    }
    let _ = writeln!(log, "checks={} failures={}", report.checks.len(), report.failures().count());
    write_table(&cfg.out.join("properties.csv"), &["Family", "N", "K", "Check", "Status", "Value"], &rows)?;
    Ok(if report.all_pass() { Outcome::Success } else { Outcome::PropertyFailure })
}

fn constants(cfg: &RunConfig, levels: &[Level], log: &mut String) -> Result<Outcome, RunError> {
    let computed = map_levels(cfg, levels, |l| {
        let dd = complex(l, cfg.k)?;
        Ok((l.n, estimate_constants(&dd, cfg.samples, SOBOLEV_ASCENT_STEPS, cfg.seed, DEFAULT_DENSE_CAP)))
    });
    let mut rows = Vec::new();
    let mut all = true;
    for c in computed {
        let (n, report) = c?;
        match report {
            Ok(r) => {
                let _ = writeln!(log, "level n={n} {r:?}");
                rows.push(vec![
                    format!("{:e}", r.h),
                    r.n_cells.to_string(),
                    r.k.to_string(),
                    format!("{:e}", r.poincare),
                    format!("{:e}", r.continuity_curl),
                    format!("{:e}", r.continuity_div),
                    format!("{:e}", r.sobolev_lower_bound),
                ]);
            }
            Err(e) => {
                let _ = writeln!(log, "level n={n} skipped: {e}");
                all = false;
            }
        }
    }
    write_table(
        &cfg.out.join(format!("constants_k{}.csv", cfg.k)),
        &[
            "MeshSize",
            "Cells",
            "K",
            "Poincare",
            "ContinuityCurl",
            "ContinuityDiv",
            "SobolevLowerBound",
        ],
        &rows,
    )?;
    Ok(if all { Outcome::Success } else { Outcome::SolverFailure })
}
