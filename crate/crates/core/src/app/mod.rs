//! Run configuration, presets, drivers and file output behind the `asgs` binary.

pub mod cli;
pub mod config;
pub mod output;
pub mod presets;
pub mod vtk;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::{CoefficientSet, LidDriven};
use crate::cavity::{centerline_fluxes, centerline_profiles, compute_streamfunction, CenterlineProfiles, StreamFunction};
use crate::error::{Error, Result};
use crate::fe::{FieldState, QuadratureRule};
use crate::mesh::Mesh;
use crate::rheology::{ViscosityLaw, ViscosityModel};
use crate::solver::{initial_state, run_steady, run_transient, Observer, StepInfo, StepSettings, SteadyRun};
use crate::verification::{roc_table, ErrorAccumulator, ErrorReport, ManufacturedCase, RefinementResult, TableRow};

use config::{CavityConfig, Command, RunConfig};
use output::{ensure_dir, slug, table_csv, write_text};

/// One manufactured run at a single resolution.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub mesh: Mesh,
    pub final_state: FieldState,
    pub errors: ErrorReport,
}

/// Marches the manufactured case to `t_final`, measuring errors at every level.
/// `on_level` sees every computed level, e.g. for trajectory output.
pub fn run_manufactured(
    case: &ManufacturedCase,
    n_div: usize,
    dt: f64,
    t_final: f64,
    cfg: &RunConfig,
    on_level: Option<&mut dyn Observer>,
) -> Result<CaseRun> {
    let mesh = Mesh::structured(n_div)?;
    let coeffs = case.coefficients();
    let exact = case.exact();
    let init = initial_state(&mesh, &coeffs, Some(exact.as_ref()));
    let settings = StepSettings {
        dt,
        stab: cfg.stabilization,
        solver: cfg.solver,
        skew_check: false,
    };
    let mut acc = ErrorAccumulator::new(exact);
    let run = {
        let mut observers: Vec<&mut dyn Observer> = vec![&mut acc];
        if let Some(o) = on_level {
            observers.push(o);
        }
        run_transient(&mesh, coeffs, init, settings, t_final, false, &mut observers)?
    };
    if !acc.report().total.is_finite() {
        return Err(Error::NonFinite("error norms"));
    }
    Ok(CaseRun {
        final_state: run.final_state().clone(),
        mesh,
        errors: acc.report(),
    })
}

#[derive(Debug, Clone)]
pub struct ConvergenceOutcome {
    pub label: String,
    pub rows: Vec<TableRow>,
    /// Final states of the successful runs, in refinement order.
    pub finals: Vec<(Mesh, FieldState)>,
}

impl ConvergenceOutcome {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.failure.is_some())
    }

    pub fn csv(&self) -> String {
        table_csv(&self.rows)
    }
}

/// Runs every refinement in parallel; rows stay in the configured order and a
/// failed level is annotated rather than aborting the sweep.
pub fn run_convergence(cfg: &RunConfig) -> Result<ConvergenceOutcome> {
    cfg.validate()?;
    let case = cfg.case()?;
    let runs: Vec<(usize, f64, Result<CaseRun>)> = cfg
        .mesh
        .n_div
        .par_iter()
        .map(|&n| {
            let dt = cfg.time.dt.dt(n);
            (n, dt, run_manufactured(&case, n, dt, cfg.time.t_final, cfg, None))
        })
        .collect();
    let mut results: Vec<RefinementResult> = Vec::with_capacity(runs.len());
    let mut finals = Vec::new();
    for (n, dt, r) in runs {
        match r {
            Ok(run) => {
                results.push((n, dt, Ok(run.errors)));
                finals.push((run.mesh, run.final_state));
            }
            Err(e) => results.push((n, dt, Err(e.to_string()))),
        }
    }
    let label = cfg.label();
    Ok(ConvergenceOutcome {
        rows: roc_table(&label, &results),
        label,
        finals,
    })
}

/// Writes `<case>_table.csv` and, when enabled, the final fields as VTK.
pub fn write_convergence(cfg: &RunConfig, dir: &Path, outcome: &ConvergenceOutcome) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let base = slug(&outcome.label);
    let table = dir.join(format!("{base}_table.csv"));
    write_text(&table, &outcome.csv())?;
    let mut written = vec![table];
    if cfg.output.vtk {
        for (mesh, state) in &outcome.finals {
            let path = dir.join(format!("{base}_n{}.vtk", mesh.n_div));
            vtk::write_vtk(&path, mesh, state, &format!("{} n_div={} t={}", outcome.label, mesh.n_div, state.t))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Writes one VTK per level when trajectories are retained.
struct TrajectoryWriter {
    dir: PathBuf,
    base: String,
}

impl Observer for TrajectoryWriter {
    fn observe(&mut self, mesh: &Mesh, _: &QuadratureRule, info: &StepInfo<'_>) -> Result<()> {
        let path = self.dir.join(format!("{}_n{}_step{:05}.vtk", self.base, mesh.n_div, info.step));
        vtk::write_vtk(&path, mesh, info.state, &format!("step {} t={}", info.step, info.state.t))
    }
}

/// Sequential run of each configured resolution with full output.
pub fn run_solve(cfg: &RunConfig, dir: &Path) -> Result<ConvergenceOutcome> {
    cfg.validate()?;
    let case = cfg.case()?;
    ensure_dir(dir)?;
    let label = cfg.label();
    let mut results: Vec<RefinementResult> = Vec::new();
    let mut finals = Vec::new();
    for &n in &cfg.mesh.n_div {
        let dt = cfg.time.dt.dt(n);
        let mut writer = TrajectoryWriter {
            dir: dir.to_path_buf(),
            base: slug(&label),
        };
        let observer: Option<&mut dyn Observer> = if cfg.output.retain_trajectory && cfg.output.vtk {
            Some(&mut writer)
        } else {
            None
        };
        match run_manufactured(&case, n, dt, cfg.time.t_final, cfg, observer) {
            Ok(run) => {
                results.push((n, dt, Ok(run.errors)));
                finals.push((run.mesh, run.final_state));
            }
            // I/O problems are not a numerical failure of the level
            Err(e @ Error::Io { .. }) => return Err(e),
            Err(Error::Step { source, .. }) if matches!(*source, Error::Io { .. }) => return Err(*source),
            Err(e) => results.push((n, dt, Err(e.to_string()))),
        }
    }
    let outcome = ConvergenceOutcome {
        rows: roc_table(&label, &results),
        label,
        finals,
    };
    write_convergence(cfg, dir, &outcome)?;
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct CavityResult {
    pub mesh: Mesh,
    pub steady: SteadyRun,
    pub stream: StreamFunction,
    pub profiles: CenterlineProfiles,
}

/// Lid-driven cavity coefficients with `η = U·L/Re` (`ρ = L = 1`) and no transport.
pub fn cavity_coefficients(c: &CavityConfig, re: f64) -> CoefficientSet {
    let viscosity = ViscosityModel {
        law: ViscosityLaw::Constant {
            eta: c.lid_speed.abs().max(f64::MIN_POSITIVE) / re,
        },
        yield_stress: c.yield_stress,
        eps_j: crate::rheology::default_eps_j(),
    };
    let mut coeffs = CoefficientSet::simple(1.0, 0.0, 0.01, viscosity);
    coeffs.dirichlet = Arc::new(LidDriven { speed: c.lid_speed });
    coeffs
}

pub fn run_cavity_single(cfg: &RunConfig, re: f64) -> Result<CavityResult> {
    let c = &cfg.cavity;
    let mesh = Mesh::structured(c.grid)?;
    let coeffs = cavity_coefficients(c, re);
    let init = initial_state(&mesh, &coeffs, None);
    let settings = StepSettings {
        dt: c.pseudo_dt,
        stab: cfg.stabilization,
        solver: cfg.solver,
        skew_check: false,
    };
    let steady = run_steady(&mesh, coeffs, init, settings, c.tol_steady, c.max_steps)?;
    let stream = compute_streamfunction(&mesh, &steady.state.u1, &steady.state.u2)?;
    let profiles = centerline_profiles(&mesh, &steady.state)?;
    Ok(CavityResult {
        mesh,
        steady,
        stream,
        profiles,
    })
}

#[derive(Debug)]
pub struct CavityOutcome {
    pub runs: Vec<(f64, Result<CavityResult>)>,
}

impl CavityOutcome {
    pub fn any_failed(&self) -> bool {
        self.runs.iter().any(|(_, r)| r.is_err())
    }

    pub const SUMMARY_HEADER: &'static str = "re,status,steps,psi_extremum,x,y,distance_to_centre,flux_pos,flux_neg";

    pub fn summary_csv(&self) -> String {
        let mut s = format!("{}\n", Self::SUMMARY_HEADER);
        for (re, r) in &self.runs {
            let _ = match r {
                Ok(c) => {
                    let (pos, neg) = centerline_fluxes(&c.profiles);
                    writeln!(
                        s,
                        "{re},ok,{},{:.6e},{:.6},{:.6},{:.6},{pos:.6e},{neg:.6e}",
                        c.steady.steps,
                        c.stream.extremum_value,
                        c.stream.extremum_location[0],
                        c.stream.extremum_location[1],
                        c.stream.distance_to_centre()
                    )
                }
                Err(e) => writeln!(s, "{re},{},,,,,,,", output::csv_field(&format!("failed: {e}"))),
            };
        }
        s
    }
}

/// Steady cavity per Reynolds number; failures are recorded per entry.
pub fn run_cavity(cfg: &RunConfig) -> Result<CavityOutcome> {
    cfg.validate()?;
    if cfg.command != Command::Cavity {
        return Err(Error::Config("configuration is not a cavity run".into()));
    }
    let runs = cfg
        .cavity
        .re
        .par_iter()
        .map(|&re| (re, run_cavity_single(cfg, re)))
        .collect();
    Ok(CavityOutcome { runs })
}

pub fn write_cavity(cfg: &RunConfig, dir: &Path, outcome: &CavityOutcome) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    for (re, r) in &outcome.runs {
        let Ok(c) = r else { continue };
        let tag = format!("re{re}");
        let files = [
            (format!("psi_{tag}.csv"), c.stream.to_csv(&c.mesh)),
            (format!("u1_vertical_{tag}.csv"), c.profiles.vertical_csv()),
            (format!("u2_horizontal_{tag}.csv"), c.profiles.horizontal_csv()),
        ];
        for (name, text) in files {
            let path = dir.join(name);
            write_text(&path, &text)?;
            written.push(path);
        }
        if cfg.output.vtk {
            let path = dir.join(format!("cavity_{tag}.vtk"));
            vtk::write_vtk(&path, &c.mesh, &c.steady.state, &format!("cavity Re={re}"))?;
            written.push(path);
        }
    }
    let path = dir.join("cavity_summary.csv");
    write_text(&path, &outcome.summary_csv())?;
    written.push(path);
    Ok(written)
}
