//! Simulation runs and parameter sweeps.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::elliptic::PoissonSolver;
use crate::error::{Error, Result};
use crate::evolve::{AxiState, FullBState, ReformState, Stepper, Velocity};
use crate::functionals::{dissipation_ledger, fmt_f64, write_diagnostics_csv, DiagnosticsRow};
use crate::grid::{write_snapshot, ScalarField};
use crate::harness::config::RunConfig;
use crate::harness::data::{generate_initial_data, velocity_besov, InitialData};

/// Rayon pool capped by `SWIRLMHD_THREADS` when set to a positive integer.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("SWIRLMHD_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))
}

/// State of every evolved system at one instant.
#[derive(Debug, Clone)]
pub struct RunState {
    pub primitive: Option<AxiState>,
    pub reform: Option<ReformState>,
    pub full_b: Option<FullBState>,
}

impl RunState {
    pub fn time(&self) -> f64 {
        self.reform
            .as_ref()
            .map(|s| s.time)
            .or(self.primitive.as_ref().map(|s| s.time))
            .unwrap_or(0.0)
    }

    /// Named fields for snapshots.
    pub fn fields(&self) -> Vec<(&'static str, &ScalarField)> {
        let mut out = Vec::new();
        if let Some(s) = &self.primitive {
            out.extend([
                ("u_theta", &s.u_theta),
                ("b_theta", &s.b_theta),
                ("omega_theta", &s.omega_theta),
                ("u_r", &s.u_r),
                ("u_z", &s.u_z),
            ]);
        }
        if let Some(s) = &self.reform {
            out.extend([("B", &s.b), ("eta", &s.eta), ("V", &s.v)]);
            if self.primitive.is_none() {
                out.extend([("u_r", &s.u_r), ("u_z", &s.u_z)]);
            }
        }
        if let Some(b) = &self.full_b {
            out.extend([("b_r", &b.b_r), ("b_z", &b.b_z)]);
        }
        out
    }
}

/// In-memory result of a run. `failure` holds the error that stopped the
/// run early; rows and state cover everything up to it.
#[derive(Debug)]
pub struct Trajectory {
    pub init: InitialData,
    /// Rows of the reformulated system, or of the primitive one when it
    /// runs alone.
    pub rows: Vec<DiagnosticsRow>,
    /// Primitive rows when both formulations run.
    pub primitive_rows: Option<Vec<DiagnosticsRow>>,
    pub last: RunState,
    pub failure: Option<Error>,
}

/// One-line outcome of a run, shared by `simulate` and `sweep`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub status: &'static str,
    pub samples: usize,
    pub t_final: f64,
    pub smallness_passed: bool,
    pub m0: f64,
    pub max_m_over_m0: f64,
    pub ledger_over_m0: f64,
    pub ru_linf_growth: f64,
    pub structure_max: f64,
}

pub const SUMMARY_COLUMNS: [&str; 9] = [
    "status",
    "samples",
    "t_final",
    "smallness_passed",
    "M0",
    "max_M_over_M0",
    "ledger_over_M0",
    "ru_linf_max_over_initial",
    "structure_max",
];

impl RunSummary {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.status.to_string(),
            self.samples.to_string(),
            fmt_f64(self.t_final),
            self.smallness_passed.to_string(),
            fmt_f64(self.m0),
            fmt_f64(self.max_m_over_m0),
            fmt_f64(self.ledger_over_m0),
            fmt_f64(self.ru_linf_growth),
            fmt_f64(self.structure_max),
        ]
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

impl Trajectory {
    pub fn summary(&self, p: f64) -> RunSummary {
        let m0 = self.init.norms.m0;
        let first = self.rows.first();
        let ru0 = first.map_or(0.0, |r| r.ru_linf);
        RunSummary {
            status: match &self.failure {
                None => "ok",
                Some(Error::BlowUp { .. }) => "blowup",
                Some(_) => "error",
            },
            samples: self.rows.len(),
            t_final: self.last.time(),
            smallness_passed: self.init.smallness.passed,
            m0,
            max_m_over_m0: ratio(self.rows.iter().map(|r| r.m).fold(0.0, f64::max), m0),
            ledger_over_m0: ratio(dissipation_ledger(&self.rows, p), m0),
            ru_linf_growth: ratio(self.rows.iter().map(|r| r.ru_linf).fold(0.0, f64::max), ru0),
            structure_max: self.rows.iter().map(|r| r.structure_residual).fold(0.0, f64::max),
        }
    }
}

fn structure_residual(full_b: Option<&FullBState>, scale: f64) -> f64 {
    match full_b {
        Some(b) if scale > 0.0 => b.poloidal_max() / scale,
        Some(b) => b.poloidal_max(),
        None => 0.0,
    }
}

/// Evolve the configured systems in memory.
pub fn integrate(cfg: &RunConfig) -> Result<Trajectory> {
    let poisson = PoissonSolver::new(cfg.grid.build()?)?;
    integrate_from(cfg, generate_initial_data(cfg, &poisson)?)
}

/// Evolve prepared initial data under `cfg`.
pub fn integrate_from(cfg: &RunConfig, init: InitialData) -> Result<Trajectory> {
    let grid = cfg.grid.build()?;
    if init.grid != grid {
        return Err(Error::contract("initial data lives on a different grid than the configuration"));
    }
    let mut stepper = Stepper::new(grid, cfg.stepper)?;
    let f = cfg.formulation;
    let mut state = RunState {
        primitive: f.has_primitive().then(|| init.axi.clone()),
        reform: f.has_reform().then(|| init.reform.clone()),
        full_b: None,
    };
    if cfg.track_structure {
        state.full_b = Some(FullBState::from_swirl(0.0, init.axi.b_theta.clone())?);
    }
    let b_scale = init.axi.b_theta.max_abs();

    let sample = |s: &RunState| -> Result<(Option<DiagnosticsRow>, Option<DiagnosticsRow>)> {
        let sr = structure_residual(s.full_b.as_ref(), b_scale);
        let besov = |axi: &AxiState| -> Result<_> {
            if cfg.lp.enabled {
                Ok(Some(velocity_besov(axi, &cfg.lp)?))
            } else {
                Ok(None)
            }
        };
        let reform_row = match &s.reform {
            Some(r) => {
                let axi = r.to_axi();
                let mut row = DiagnosticsRow::evaluate(&axi, r, cfg.p, sr);
                row.besov = besov(&axi)?;
                Some(row)
            }
            None => None,
        };
        let primitive_row = match &s.primitive {
            Some(a) => {
                let mut row = DiagnosticsRow::from_axi(a, cfg.p, init.epsilon, sr);
                row.besov = besov(a)?;
                Some(row)
            }
            None => None,
        };
        Ok((reform_row, primitive_row))
    };

    let mut rows = Vec::new();
    let mut primitive_rows = Vec::new();
    let mut push = |(r, p): (Option<DiagnosticsRow>, Option<DiagnosticsRow>)| match (r, p) {
        (Some(r), Some(p)) => {
            rows.push(r);
            primitive_rows.push(p);
        }
        (Some(r), None) | (None, Some(r)) => rows.push(r),
        (None, None) => {}
    };
    push(sample(&state)?);

    let n_steps = cfg.stepper.n_steps();
    let mut failure = None;
    for step in 1..=n_steps {
        let advanced = (|| -> Result<RunState> {
            let primitive = state.primitive.as_ref().map(|s| stepper.step_primitive(s)).transpose()?;
            let reform = state.reform.as_ref().map(|s| stepper.step_reform(s)).transpose()?;
            let full_b = match &state.full_b {
                Some(b) => {
                    let flow = match (&state.primitive, &state.reform) {
                        (Some(a), _) => a.clone(),
                        (None, Some(r)) => r.to_axi(),
                        (None, None) => unreachable!("a formulation always runs"),
                    };
                    Some(stepper.step_full_b(b, Velocity::of(&flow))?)
                }
                None => None,
            };
            Ok(RunState {
                primitive,
                reform,
                full_b,
            })
        })();
        match advanced {
            Ok(next) => state = next,
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        if step % cfg.stepper.sample_every == 0 || step == n_steps {
            push(sample(&state)?);
        }
    }
    Ok(Trajectory {
        rows,
        primitive_rows: (!primitive_rows.is_empty()).then_some(primitive_rows),
        init,
        last: state,
        failure,
    })
}

fn write_csv_file(path: &Path, rows: &[DiagnosticsRow]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_diagnostics_csv(&mut out, rows)?;
    out.flush()?;
    Ok(())
}

fn write_summary_file(path: &Path, header: &[&str], records: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in records {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Write diagnostics, summary and final snapshots of a trajectory into
/// `dir`. Returns the written paths.
pub fn write_outputs(traj: &Trajectory, cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let diag = dir.join("diagnostics.csv");
    write_csv_file(&diag, &traj.rows)?;
    written.push(diag);
    if let Some(rows) = &traj.primitive_rows {
        let path = dir.join("diagnostics_primitive.csv");
        write_csv_file(&path, rows)?;
        written.push(path);
    }
    let summary = dir.join("summary.csv");
    write_summary_file(&summary, &SUMMARY_COLUMNS, &[traj.summary(cfg.p).record()])?;
    written.push(summary);
    if cfg.output.snapshots {
        let time = traj.last.time();
        for (name, field) in traj.last.fields() {
            let path = dir.join(format!("{name}.snap"));
            let mut out = BufWriter::new(File::create(&path)?);
            write_snapshot(&mut out, field, time, name)?;
            out.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Run a configuration and write its outputs to `output.dir`. A blow-up
/// still flushes everything sampled before it and is then returned.
pub fn simulate(cfg: &RunConfig) -> Result<RunSummary> {
    let traj = integrate(cfg)?;
    write_outputs(&traj, cfg, &cfg.output.dir)?;
    let summary = traj.summary(cfg.p);
    match traj.failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

/// One row of a sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

/// Run `cfg` once per value of `param`, each into `output.dir/run_NNN`,
/// and write `output.dir/sweep_summary.csv`. Runs are independent and
/// execute on the worker pool; the summary keeps the input order.
pub fn sweep(cfg: &RunConfig, param: &str, values: &[String]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::domain("sweep needs at least one value"));
    }
    let configs: Vec<RunConfig> = values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let mut c = cfg.with_override(param, v)?;
            c.output.dir = cfg.output.dir.join(format!("run_{k:03}"));
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let pool = thread_pool()?;
    let rows: Vec<SweepRow> = pool.install(|| {
        configs
            .par_iter()
            .zip(values.par_iter())
            .map(|(c, v)| {
                let outcome = integrate(c).and_then(|traj| {
                    write_outputs(&traj, c, &c.output.dir)?;
                    Ok(traj)
                });
                match outcome {
                    Ok(traj) => SweepRow {
                        value: v.clone(),
                        summary: Some(traj.summary(c.p)),
                        error: traj.failure.as_ref().map(|e| e.to_string()),
                    },
                    Err(e) => SweepRow {
                        value: v.clone(),
                        summary: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });

    fs::create_dir_all(&cfg.output.dir)?;
    let mut header = vec!["param", "value"];
    header.extend(SUMMARY_COLUMNS);
    header.push("error");
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let mut rec = vec![param.to_string(), row.value.clone()];
            match &row.summary {
                Some(s) => rec.extend(s.record()),
                None => {
                    rec.push("error".into());
                    rec.extend(std::iter::repeat_n(String::new(), SUMMARY_COLUMNS.len() - 1));
                }
            }
            rec.push(row.error.clone().unwrap_or_default());
            rec
        })
        .collect();
    write_summary_file(&cfg.output.dir.join("sweep_summary.csv"), &header, &records)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::read_snapshot;
    use crate::harness::config::Formulation;

    fn cfg(dir: &Path) -> RunConfig {
        let mut c = RunConfig::default();
        c.grid.nr = 16;
        c.grid.nz = 16;
        c.stepper.t_end = 0.05;
        c.stepper.sample_every = 2;
        c.output.dir = dir.to_path_buf();
        c
    }

    fn data_rows(path: &Path) -> Vec<String> {
        fs::read_to_string(path).unwrap().lines().skip(1).map(String::from).collect()
    }

    #[test]
    fn zero_end_time_gives_one_row() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path());
        c.stepper.t_end = 0.0;
        let s = simulate(&c).unwrap();
        assert_eq!(s.samples, 1);
        assert_eq!(data_rows(&dir.path().join("diagnostics.csv")).len(), 1);
    }

    #[test]
    fn sampling_cadence_and_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path());
        c.formulation = Formulation::Both;
        c.track_structure = true;
        let s = simulate(&c).unwrap();
        // steps 0, 2, 4 and the final step 5
        assert_eq!(s.samples, 4);
        assert_eq!(s.structure_max, 0.0);
        assert_eq!(data_rows(&dir.path().join("diagnostics_primitive.csv")).len(), 4);
        let snap = read_snapshot(std::io::BufReader::new(File::open(dir.path().join("B.snap")).unwrap())).unwrap();
        assert_eq!(snap.name, "B");
        assert!((snap.time - 0.05).abs() < 1e-12);
        assert!(dir.path().join("b_r.snap").exists());
    }

    #[test]
    fn identical_configs_write_identical_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        simulate(&cfg(a.path())).unwrap();
        simulate(&cfg(b.path())).unwrap();
        for name in ["diagnostics.csv", "summary.csv", "V.snap"] {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
        }
    }

    #[test]
    fn blow_up_flushes_rows_and_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path());
        c.formulation = Formulation::Primitive;
        c.stepper.sample_every = 1;
        let poisson = PoissonSolver::new(c.grid.build().unwrap()).unwrap();
        let mut init = generate_initial_data(&c, &poisson).unwrap();
        init.axi.b_theta.values[[3, 3]] = f64::NAN;
        let traj = integrate_from(&c, init).unwrap();
        assert!(matches!(traj.failure, Some(Error::BlowUp { .. })));
        write_outputs(&traj, &c, dir.path()).unwrap();
        assert_eq!(data_rows(&dir.path().join("diagnostics.csv")).len(), 1);
        assert!(fs::read_to_string(dir.path().join("summary.csv")).unwrap().contains("blowup"));
        assert!(dir.path().join("u_theta.snap").exists());
    }

    #[test]
    fn sweep_writes_one_row_per_value() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path());
        let values = vec!["1.01".to_string(), "1.02".to_string(), "2.0".to_string()];
        let rows = sweep(&c, "p", &values).unwrap_err();
        assert!(matches!(rows, Error::Config { .. }));
        let values = vec!["1.01".to_string(), "1.02".to_string()];
        let rows = sweep(&c, "p", &values).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.error.is_none()));
        let text = fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("p,1.01,ok"));
        assert!(dir.path().join("run_001").join("diagnostics.csv").exists());
    }
}
