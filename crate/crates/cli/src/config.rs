//! Flat `section.key=value` run configuration.
//!
//! Blank lines are ignored and `#` starts a comment anywhere on a line. Every
//! key is optional and has a default. Unknown or repeated keys are rejected;
//! keys that do not apply to the chosen kinds are accepted and ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dstring_core::{
    CouplingSpec, CouplingTable, DampingConvention, GridPolicy, Quantum, ReservoirSpec, StringFockState,
    StringParams, ThermalRule,
};

use crate::error::{CliError, Invalid};

/// The batch commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Memory kernel; columns t,gamma
    Kernel,
    /// Mode coefficient of a_n(0) in a_n(t); columns t,mode,c_a_re,c_a_im,ccr_defect
    Evolve,
    /// String energy in a Fock state; columns t,string_energy,mechanical_energy
    Energies,
    /// First-order transition rates; columns channel,rate,analytic,rel_err (rates per unit time)
    Rates,
    /// Discrete-bath integration; columns t,number,string_energy,reservoir_energy,total_energy,ccr_defect
    Oracle,
    /// Radial source shapes; columns r,P,Q
    Shapes,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Kernel => "kernel",
            Command::Evolve => "evolve",
            Command::Energies => "energies",
            Command::Rates => "rates",
            Command::Oracle => "oracle",
            Command::Shapes => "shapes",
        };
        f.write_str(s)
    }
}

const KNOWN_KEYS: &[&str] = &[
    "string.lambda",
    "string.mu",
    "string.length",
    "string.beta",
    "coupling.kind",
    "coupling.cutoff",
    "coupling.cutoff_omega1",
    "coupling.beta",
    "coupling.length",
    "coupling.prefactor",
    "coupling.exponent",
    "coupling.table",
    "modes.n_max",
    "modes.mode",
    "grid.t_end",
    "grid.points",
    "grid.omega_refine",
    "dynamics.convention",
    "state.phonons",
    "reservoir.kind",
    "reservoir.kt",
    "reservoir.quanta",
    "transitions.broadening",
    "transitions.thermal_rule",
    "oracle.n_modes",
    "oracle.step",
    "oracle.t_end",
    "oracle.points",
    "oracle.policy",
    "oracle.half_width",
    "oracle.track_ccr",
    "oracle.window_start",
    "oracle.window_end",
    "shapes.r_max",
    "shapes.points",
];

/// Raw key/value pairs, remembering the line each key came from.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.split_once('#').map_or(line, |(body, _)| body).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {line_no}: expected key=value, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::config(format!("line {line_no}: empty key")));
            }
            if let Some((first, _)) = values.insert(key.to_string(), (line_no, value.trim().to_string())) {
                return Err(CliError::config(format!("line {line_no}: `{key}` already set on line {first}")));
            }
        }
        Ok(Self { values })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(KNOWN_KEYS.contains(&key), "{key}");
        self.values.get(key).map(|(_, v)| v.as_str())
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::config(format!("{key}: cannot parse `{v}`"))),
        }
    }

    fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::config(format!("{key}: cannot parse `{v}`"))),
        }
    }

    fn unknown(&self) -> Vec<String> {
        self.values.keys().filter(|k| !KNOWN_KEYS.contains(&k.as_str())).cloned().collect()
    }
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub out_prefix: String,
    pub params: StringParams,
    pub coupling: CouplingSpec,
    pub n_max: usize,
    pub mode: usize,
    pub t_end: f64,
    pub points: usize,
    pub omega_refine: u32,
    pub convention: DampingConvention,
    pub state: StringFockState,
    pub reservoir: ReservoirSpec,
    pub broadening: Option<f64>,
    pub thermal_rule: ThermalRule,
    pub oracle: OracleConfig,
    pub shapes: ShapesConfig,
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub n_modes: usize,
    pub step: f64,
    pub t_end: f64,
    pub points: usize,
    pub policy: GridPolicy,
    pub track_ccr: bool,
    pub window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub struct ShapesConfig {
    pub r_max: f64,
    pub points: usize,
}

fn parse_state(key: &str, text: &str) -> Result<StringFockState, CliError> {
    if text == "vac" || text.is_empty() {
        return Ok(StringFockState::vacuum());
    }
    let mut pairs = Vec::new();
    for part in text.split('+') {
        let (m, r) = part
            .split_once(':')
            .ok_or_else(|| CliError::config(format!("{key}: expected mode:count pairs joined by `+`, got `{part}`")))?;
        let m: usize = m
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("{key}: bad mode `{m}`")))?;
        let r: u32 = r
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("{key}: bad count `{r}`")))?;
        pairs.push((m, r));
    }
    StringFockState::new(pairs).invalid(key)
}

fn parse_quanta(key: &str, text: &str) -> Result<Vec<Quantum>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|part| {
            let (nu, w) = part
                .split_once(':')
                .ok_or_else(|| CliError::config(format!("{key}: expected field:omega pairs, got `{part}`")))?;
            let field = nu
                .trim()
                .parse()
                .map_err(|_| CliError::config(format!("{key}: bad field `{nu}`")))?;
            let omega = w
                .trim()
                .parse()
                .map_err(|_| CliError::config(format!("{key}: bad frequency `{w}`")))?;
            Ok(Quantum { field, omega })
        })
        .collect()
}

/// Reads an `omega,f_sq[,phase]` table with a header row.
fn read_table(path: &Path) -> Result<CouplingTable, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let (mut omega, mut f_sq, mut phase) = (Vec::new(), Vec::new(), Vec::new());
    let mut has_phase = None;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let num = |j: usize| -> Result<f64, CliError> {
            rec.get(j)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| CliError::config(format!("coupling.table: row {} column {} is not a number", i + 1, j + 1)))
        };
        omega.push(num(0)?);
        f_sq.push(num(1)?);
        let this_has = rec.len() > 2;
        if *has_phase.get_or_insert(this_has) != this_has {
            return Err(CliError::config("coupling.table: rows disagree on the phase column"));
        }
        if this_has {
            phase.push(num(2)?);
        }
    }
    CouplingTable::new(omega, f_sq, has_phase.unwrap_or(false).then_some(phase)).invalid("coupling.table")
}

impl RunConfig {
    /// Builds and validates a config; `base_dir` resolves relative table paths.
    pub fn from_raw(raw: &RawConfig, command: Command, out_prefix: String, base_dir: &Path) -> Result<Self, CliError> {
        let unknown = raw.unknown();
        if !unknown.is_empty() {
            return Err(CliError::config(format!("unknown keys: {}", unknown.join(", "))));
        }
        let lambda = raw.get("string.lambda", 1.0)?;
        let mu = raw.get("string.mu", 1.0)?;
        let length = raw.get("string.length", 1.0)?;
        let beta = raw.get("string.beta", 0.1)?;
        let params = StringParams::new(lambda, mu, length, beta).invalid("string")?;
        let omega1 = params.omega(1);

        let cutoff = match (raw.get_opt::<f64>("coupling.cutoff")?, raw.get_opt::<f64>("coupling.cutoff_omega1")?) {
            (Some(_), Some(_)) => {
                return Err(CliError::config("coupling.cutoff and coupling.cutoff_omega1 are mutually exclusive"));
            }
            (Some(c), None) => Some(c),
            (None, Some(k)) => Some(k * omega1),
            (None, None) => None,
        };
        let kind: String = raw.get("coupling.kind", "ohmic".to_string())?;
        let coupling = match kind.as_str() {
            "ohmic" => {
                let b = raw.get("coupling.beta", params.beta)?;
                let l = raw.get("coupling.length", params.length)?;
                CouplingSpec::paper_ohmic(b, l, cutoff.unwrap_or(50.0 * omega1))
            }
            "power_law" => CouplingSpec::power_law(
                raw.get("coupling.prefactor", 0.0)?,
                raw.get("coupling.exponent", 0.0)?,
                cutoff.unwrap_or(50.0 * omega1),
            ),
            "zero" => CouplingSpec::zero(cutoff.unwrap_or(50.0 * omega1)),
            "table" => {
                let rel: String = raw
                    .get_opt("coupling.table")?
                    .ok_or_else(|| CliError::config("coupling.table: required for coupling.kind=table"))?;
                let path = base_dir.join(rel);
                CouplingSpec::tabulated(read_table(&path)?, cutoff)
            }
            other => {
                return Err(CliError::config(format!(
                    "coupling.kind: expected ohmic, power_law, zero or table, got `{other}`"
                )));
            }
        };
        coupling.validate().invalid("coupling")?;

        let n_max = raw.get("modes.n_max", 1usize)?;
        dstring_core::build_spectrum(&params, n_max).invalid("modes.n_max")?;
        let mode = raw.get("modes.mode", 1usize)?;
        if mode == 0 || mode > n_max {
            return Err(CliError::config(format!("modes.mode: must lie in 1..={n_max}")));
        }

        let t_end = raw.get("grid.t_end", 10.0 / omega1)?;
        let points = raw.get("grid.points", 201usize)?;
        if !(t_end > 0.0 && t_end.is_finite()) || points < 2 {
            return Err(CliError::config("grid: need t_end > 0 and at least two points"));
        }
        let omega_refine = raw.get("grid.omega_refine", 0u32)?;

        let convention = match raw.get("dynamics.convention", "half".to_string())?.as_str() {
            "half" => DampingConvention::HalfDelta,
            "full" => DampingConvention::FullDelta,
            other => return Err(CliError::config(format!("dynamics.convention: expected half or full, got `{other}`"))),
        };

        let state_text: String = raw.get("state.phonons", format!("{mode}:1"))?;
        let state = parse_state("state.phonons", &state_text)?;
        state.validate(n_max).invalid("state.phonons")?;

        let reservoir = match raw.get("reservoir.kind", "vacuum".to_string())?.as_str() {
            "vacuum" => ReservoirSpec::Vacuum,
            "fock" => {
                let text: String = raw.get("reservoir.quanta", String::new())?;
                ReservoirSpec::fock(parse_quanta("reservoir.quanta", &text)?).invalid("reservoir.quanta")?
            }
            "thermal" => ReservoirSpec::thermal(raw.get("reservoir.kt", omega1)?).invalid("reservoir.kt")?,
            other => {
                return Err(CliError::config(format!(
                    "reservoir.kind: expected vacuum, fock or thermal, got `{other}`"
                )));
            }
        };
        let broadening = raw.get_opt("transitions.broadening")?;
        if let Some(eps) = broadening {
            if !(eps > 0.0) {
                return Err(CliError::config("transitions.broadening: must be > 0"));
            }
        }
        let thermal_rule = match raw.get("transitions.thermal_rule", "boltzmann".to_string())?.as_str() {
            "boltzmann" => ThermalRule::PaperBoltzmann,
            "bose_einstein" => ThermalRule::BoseEinstein,
            other => {
                return Err(CliError::config(format!(
                    "transitions.thermal_rule: expected boltzmann or bose_einstein, got `{other}`"
                )));
            }
        };

        let oracle = {
            let fastest = coupling.upper_limit().unwrap_or(50.0 * omega1).max(params.omega(mode));
            let n_modes = raw.get("oracle.n_modes", 2000usize)?;
            let step = raw.get("oracle.step", 0.25 / fastest)?;
            let t_end = raw.get("oracle.t_end", 70.0)?;
            let points = raw.get("oracle.points", 1401usize)?;
            let policy = match raw.get("oracle.policy", "uniform".to_string())?.as_str() {
                "uniform" => GridPolicy::Uniform,
                "refined" => GridPolicy::ResonanceRefined {
                    centers: (1..=n_max).map(|n| params.omega(n)).collect(),
                    half_width: raw.get("oracle.half_width", 0.5 * omega1)?,
                },
                other => return Err(CliError::config(format!("oracle.policy: expected uniform or refined, got `{other}`"))),
            };
            let track_ccr = raw.get("oracle.track_ccr", true)?;
            let window = match (raw.get_opt("oracle.window_start")?, raw.get_opt("oracle.window_end")?) {
                (Some(a), Some(b)) => Some((a, b)),
                (None, None) => None,
                _ => return Err(CliError::config("oracle.window_start and oracle.window_end go together")),
            };
            if n_modes < 2 || !(step > 0.0) || !(t_end > 0.0) || points < 2 {
                return Err(CliError::config("oracle: need n_modes >= 2, step > 0, t_end > 0 and points >= 2"));
            }
            OracleConfig {
                n_modes,
                step,
                t_end,
                points,
                policy,
                track_ccr,
                window,
            }
        };

        let shapes = ShapesConfig {
            r_max: raw.get("shapes.r_max", 10.0)?,
            points: raw.get("shapes.points", 101usize)?,
        };
        if !(shapes.r_max > 0.0) || shapes.points < 2 {
            return Err(CliError::config("shapes: need r_max > 0 and at least two points"));
        }


        Ok(Self {
            command,
            out_prefix,
            params,
            coupling,
            n_max,
            mode,
            t_end,
            points,
            omega_refine,
            convention,
            state,
            reservoir,
            broadening,
            thermal_rule,
            oracle,
            shapes,
        })
    }

    pub fn load(path: &Path, command: Command, out_prefix: String) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let raw = RawConfig::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Self::from_raw(&raw, command, out_prefix, &base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::from_raw(&RawConfig::parse(text).unwrap(), Command::Rates, "x_".into(), Path::new("."))
    }

    #[test]
    fn defaults() {
        let c = build("").unwrap();
        assert_eq!(c.params.beta, 0.1);
        assert_eq!(c.state.to_string(), "1:1");
        assert_eq!(c.coupling.cutoff, Some(50.0 * std::f64::consts::PI));
    }

    #[test]
    fn comments_and_sections() {
        let c = build("# desk\nstring.beta = 0.2  # damping\n\nmodes.n_max=3\nstate.phonons=1:2+3:1\n").unwrap();
        assert_eq!(c.params.beta, 0.2);
        assert_eq!(c.state.count(1), 2);
        assert_eq!(c.state.count(3), 1);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "string.beta",
            "string.beta=abc",
            "string.lambda=-1",
            "string.beta=0.1\nstring.beta=0.2",
            "sting.beta=0.1",
            "coupling.kind=gaussian",
            "modes.mode=2",
            "coupling.cutoff=3\ncoupling.cutoff_omega1=2",
        ] {
            let err = RawConfig::parse(text)
                .and_then(|raw| RunConfig::from_raw(&raw, Command::Rates, String::new(), Path::new(".")))
                .unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn fock_quanta() {
        let c = build("reservoir.kind=fock\nreservoir.quanta=1:3.14, 2:6.28").unwrap();
        match c.reservoir {
            ReservoirSpec::FockQuanta(q) => assert_eq!(q.len(), 2),
            _ => panic!("expected fock reservoir"),
        }
    }
}
