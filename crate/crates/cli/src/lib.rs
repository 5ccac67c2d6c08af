//! Batch front end for `dstring-core`.
//!
//! Each command writes `<prefix><command>.csv` and `<prefix>summary.txt`.
//! Floats are written in shortest round-trip form so repeated runs are
//! byte-identical.

pub mod config;
pub mod error;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dstring_core::{
    exec, gamma_integral, gamma_kernel, model::CouplingKind, string_energy_asymptotic, transitions, CouplingSpec,
    DampingConvention, EnergyMethod, ModeDamping, OmegaGrid, OmegaGridSpec, OracleOptions, ReservoirSpec,
    TimeGrid,
};

pub use config::{Command, RawConfig, RunConfig};
pub use error::CliError;

use error::Numeric;

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Key/value summary with analytic-vs-oracle pairs.
#[derive(Debug, Default, Clone)]
pub struct Summary {
    lines: Vec<String>,
}

impl Summary {
    pub fn value(&mut self, key: &str, v: f64) {
        self.lines.push(format!("{key}={}", fmt_f64(v)));
    }

    pub fn text(&mut self, key: &str, v: &str) {
        self.lines.push(format!("{key}={v}"));
    }

    /// Records `analytic`, `oracle` and their relative error under `name`.
    pub fn pair(&mut self, name: &str, analytic: f64, oracle: f64) {
        self.value(&format!("{name}.analytic"), analytic);
        self.value(&format!("{name}.oracle"), oracle);
        self.value(&format!("{name}.rel_err"), rel_err(oracle, analytic));
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            let _ = writeln!(s, "{l}");
        }
        s
    }
}

pub fn rel_err(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        ((value - reference) / reference).abs()
    }
}

/// A table ready to be written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Output of one command before it touches the filesystem.
#[derive(Debug, Clone)]
pub struct Output {
    pub table: Table,
    pub summary: Summary,
}

pub fn output_paths(prefix: &str, command: Command) -> (PathBuf, PathBuf) {
    (
        PathBuf::from(format!("{prefix}{command}.csv")),
        PathBuf::from(format!("{prefix}summary.txt")),
    )
}

fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(&table.header).map_err(|e| CliError::io(path, e))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Computes the command's output and writes both files.
pub fn run(cfg: &RunConfig) -> Result<Output, CliError> {
    let out = compute(cfg)?;
    let (csv_path, summary_path) = output_paths(&cfg.out_prefix, cfg.command);
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write_csv(&csv_path, &out.table)?;
    std::fs::write(&summary_path, out.summary.render()).map_err(|e| CliError::io(&summary_path, e))?;
    Ok(out)
}

pub fn compute(cfg: &RunConfig) -> Result<Output, CliError> {
    let mut summary = Summary::default();
    summary.text("command", &cfg.command.to_string());
    let table = match cfg.command {
        Command::Kernel => kernel(cfg, &mut summary)?,
        Command::Evolve => evolve(cfg, &mut summary)?,
        Command::Energies => energies(cfg, &mut summary)?,
        Command::Rates => rates(cfg, &mut summary)?,
        Command::Oracle => oracle(cfg, &mut summary)?,
        Command::Shapes => shapes(cfg, &mut summary)?,
    };
    Ok(Output { table, summary })
}

fn time_grid(cfg: &RunConfig) -> Result<TimeGrid, CliError> {
    TimeGrid::spanning(cfg.t_end, cfg.points).numeric("grid")
}

/// `int_0^inf gamma dt` for the Ohmic coupling, when it has one.
fn ohmic_beta(spec: &CouplingSpec) -> Option<f64> {
    match spec.kind {
        CouplingKind::PaperOhmic { beta, .. } => Some(beta),
        _ => None,
    }
}

fn kernel(cfg: &RunConfig, summary: &mut Summary) -> Result<Table, CliError> {
    let grid = time_grid(cfg)?;
    let sample = gamma_kernel(&cfg.coupling, cfg.params.length, &grid).numeric("kernel")?;
    let mut table = Table::new(&["t", "gamma"]);
    for (t, g) in sample.times().into_iter().zip(&sample.gamma) {
        table.push(vec![fmt_f64(t), fmt_f64(*g)]);
    }
    let integral = gamma_integral(&sample, grid.t_end()).numeric("kernel")?;
    summary.value("cutoff", sample.cutoff_used);
    match ohmic_beta(&cfg.coupling) {
        Some(beta) => summary.pair("gamma_integral", 0.5 * beta, integral),
        None => summary.value("gamma_integral", integral),
    }
    Ok(table)
}

/// Frequency grid resolving mode `n`'s resonance and oscillations up to `t_end`.
fn omega_grid_for(cfg: &RunConfig, n: usize) -> Result<(ModeDamping, OmegaGrid), CliError> {
    let context = format!("mode {n}");
    let damping = ModeDamping::new(&cfg.params, &cfg.coupling, n, cfg.convention).numeric(&context)?;
    let cutoff = cfg.coupling.upper_limit().numeric(&context)?;
    let mut spec = OmegaGridSpec::for_dynamics(cutoff, cfg.t_end, damping.omega, 0.5 * damping.kappa);
    for _ in 0..cfg.omega_refine {
        spec = spec.refined();
    }
    let grid = OmegaGrid::refined(&spec).numeric(&context)?;
    Ok((damping, grid))
}

fn evolve(cfg: &RunConfig, summary: &mut Summary) -> Result<Table, CliError> {
    let grid = time_grid(cfg)?;
    let modes: Vec<usize> = (1..=cfg.n_max).collect();
    let solved = exec::map_slice(&modes, |&n| -> Result<_, CliError> {
        let context = format!("mode {n}");
        let (damping, omega_grid) = omega_grid_for(cfg, n)?;
        let sol = dstring_core::mode_solution_with(&cfg.params, &cfg.coupling, n, &grid, &omega_grid, cfg.convention)
            .numeric(&context)?;
        let ccr = grid
            .points()
            .into_iter()
            .map(|t| dstring_core::ccr_defect(&sol, t))
            .collect::<dstring_core::Result<Vec<f64>>>()
            .numeric(&context)?;
        Ok((damping, sol.c_a, ccr))
    });
    let mut table = Table::new(&["t", "mode", "c_a_re", "c_a_im", "ccr_defect"]);
    let times = grid.points();
    let mut worst = 0.0f64;
    summary.text("convention", cfg.convention.name());
    for (n, res) in modes.iter().zip(solved) {
        let (damping, c_a, ccr) = res?;
        summary.value(&format!("kappa[{n}]"), damping.kappa);
        for ((t, c), d) in times.iter().zip(&c_a).zip(&ccr) {
            worst = worst.max(*d);
            table.push(vec![fmt_f64(*t), n.to_string(), fmt_f64(c.re), fmt_f64(c.im), fmt_f64(*d)]);
        }
    }
    let beta = cfg.params.beta / cfg.params.lambda;
    let expected = match cfg.convention {
        DampingConvention::HalfDelta => 0.5 * beta,
        DampingConvention::FullDelta => beta,
    };
    if let Some(b) = ohmic_beta(&cfg.coupling) {
        if b == cfg.params.beta {
            summary.value("kappa.expected", expected);
        }
    }
    summary.value("ccr_defect.max", worst);
    Ok(table)
}

fn energies(cfg: &RunConfig, summary: &mut Summary) -> Result<Table, CliError> {
    let grid = time_grid(cfg)?;
    let modes: Vec<usize> = cfg.state.occupation().iter().map(|&(m, _)| m).collect();
    let solved = exec::map_slice(&modes, |&n| -> Result<_, CliError> {
        let (_, omega_grid) = omega_grid_for(cfg, n)?;
        dstring_core::string_solution(&cfg.params, &cfg.coupling, n, &grid, &omega_grid, cfg.convention)
            .numeric(&format!("mode {n}"))
    });
    let solutions = solved.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&["t", "string_energy", "mechanical_energy"]);
    if solutions.is_empty() {
        for t in grid.points() {
            table.push(vec![fmt_f64(t), fmt_f64(0.0), fmt_f64(0.0)]);
        }
        summary.value("string_energy.final", 0.0);
        return Ok(table);
    }
    let report = dstring_core::string_energy_timeseries(&cfg.params, &solutions, &cfg.state).numeric("energies")?;
    for ((t, e), m) in report.times().into_iter().zip(&report.string_energy).zip(&report.mechanical_energy) {
        table.push(vec![fmt_f64(t), fmt_f64(*e), fmt_f64(*m)]);
    }
    summary.text("convention", cfg.convention.name());
    summary.value("string_energy.initial", report.string_energy[0]);
    summary.value("string_energy.final", *report.string_energy.last().unwrap_or(&0.0));
    if cfg.params.beta > 0.0 {
        let asym = string_energy_asymptotic(&cfg.params, &cfg.state).numeric("energies")?;
        summary.value("string_energy.asymptote", asym);
        let closed = dstring_core::reservoir_energy_asymptotic(&cfg.params, &cfg.state, EnergyMethod::ClosedForm)
            .numeric("energies")?;
        let quad = dstring_core::reservoir_energy_asymptotic(&cfg.params, &cfg.state, EnergyMethod::Quadrature)
            .numeric("energies")?;
        summary.pair("reservoir_energy", closed, quad);
    }
    Ok(table)
}

fn rates(cfg: &RunConfig, summary: &mut Summary) -> Result<Table, CliError> {
    let mut reports = Vec::new();
    for &(m, _) in cfg.state.occupation() {
        reports.push(transitions::emission_rate(&cfg.params, &cfg.coupling, m).numeric("rates")?);
    }
    match &cfg.reservoir {
        ReservoirSpec::Vacuum => {}
        ReservoirSpec::FockQuanta(quanta) => {
            let mut fields: Vec<usize> = quanta.iter().map(|q| q.field).collect();
            fields.sort_unstable();
            fields.dedup();
            for nu in fields {
                reports.push(
                    transitions::absorption_rate_fock(&cfg.params, &cfg.coupling, &cfg.reservoir, nu, cfg.broadening)
                        .numeric("rates")?,
                );
            }
        }
        ReservoirSpec::Thermal { kt } => {
            for m in 1..=cfg.n_max {
                reports.push(
                    transitions::absorption_rate_thermal(&cfg.params, &cfg.coupling, *kt, m, cfg.thermal_rule)
                        .numeric("rates")?,
                );
                reports.push(
                    transitions::emission_rate_thermal(&cfg.params, &cfg.coupling, *kt, m, cfg.thermal_rule)
                        .numeric("rates")?,
                );
            }
        }
    }
    let mut table = Table::new(&["channel", "rate", "analytic", "rel_err"]);
    for r in &reports {
        table.push(vec![
            r.channel.clone(),
            fmt_f64(r.rate),
            fmt_f64(r.analytic),
            fmt_f64(rel_err(r.rate, r.analytic)),
        ]);
    }
    if let Some(first) = reports.iter().find(|r| r.channel.starts_with("emission[")) {
        summary.value("emission_rate", first.rate);
        summary.pair("emission_rate", first.analytic, first.rate);
    }
    Ok(table)
}

fn oracle(cfg: &RunConfig, summary: &mut Summary) -> Result<Table, CliError> {
    let o = &cfg.oracle;
    let bath = dstring_core::discretize_bath(&cfg.coupling, o.n_modes, &o.policy).numeric("oracle")?;
    let grid = TimeGrid::spanning(o.t_end, o.points).numeric("oracle")?;
    let opts = OracleOptions {
        step: o.step,
        track_ccr: o.track_ccr,
    };
    let run = dstring_core::evolve_coefficients(&cfg.params, &bath, cfg.mode, &grid, &opts).numeric("oracle")?;
    let mut table = Table::new(&[
        "t",
        "number",
        "string_energy",
        "reservoir_energy",
        "total_energy",
        "ccr_defect",
    ]);
    for (i, t) in grid.points().into_iter().enumerate() {
        let ccr = run.ccr_defect.as_ref().map_or(String::new(), |c| fmt_f64(c[i]));
        table.push(vec![
            fmt_f64(t),
            fmt_f64(run.number[i]),
            fmt_f64(run.string_energy[i]),
            fmt_f64(run.reservoir_energy[i]),
            fmt_f64(run.total_energy[i]),
            ccr,
        ]);
    }
    let window = o.window.unwrap_or_else(|| run.suggested_window(&cfg.params));
    let fitted = dstring_core::fit_decay_rate(&run, window).numeric("oracle fit")?;
    let emission = transitions::emission_rate(&cfg.params, &cfg.coupling, cfg.mode).numeric("oracle")?;
    summary.text("n_modes", &o.n_modes.to_string());
    summary.value("step", run.step);
    summary.value("recurrence_time", run.recurrence_time);
    summary.value("window_start", window.0);
    summary.value("window_end", window.1);
    summary.value("decay_rate", fitted);
    summary.pair("emission_rate", emission.rate, fitted);
    summary.pair("number_decay_beta_over_lambda", cfg.params.beta / cfg.params.lambda, fitted);
    let e0 = run.total_energy[0];
    let drift = run.total_energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    summary.value("total_energy.max_drift", drift);
    if let Some(c) = &run.ccr_defect {
        summary.value("ccr_defect.max", c.iter().cloned().fold(0.0, f64::max));
    }
    Ok(table)
}

fn shapes(cfg: &RunConfig, summary: &mut Summary) -> Result<Table, CliError> {
    let s = &cfg.shapes;
    let r: Vec<f64> = (0..s.points)
        .map(|i| s.r_max * i as f64 / (s.points - 1) as f64)
        .collect();
    let shapes = dstring_core::source_shapes(&cfg.coupling, &r).numeric("shapes")?;
    let mut table = Table::new(&["r", "P", "Q"]);
    for i in 0..r.len() {
        table.push(vec![fmt_f64(shapes.r[i]), fmt_f64(shapes.p[i]), fmt_f64(shapes.q[i])]);
    }
    summary.value("P0", shapes.p[0]);
    summary.value("Q.max_abs", shapes.q.iter().fold(0.0f64, |a, q| a.max(q.abs())));
    Ok(table)
}
