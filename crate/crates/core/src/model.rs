//! Physical parameters, the string mode spectrum, coupling functions and
//! state descriptors shared by every other module.
//!
//! Units are natural (hbar = c = 1), so a bath quantum of wave vector k has
//! frequency |k|.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Mass density, tension, length and damping coefficient of the string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringParams {
    pub lambda: f64,
    pub mu: f64,
    pub length: f64,
    pub beta: f64,
}

impl StringParams {
    pub fn new(lambda: f64, mu: f64, length: f64, beta: f64) -> Result<Self> {
        let p = Self {
            lambda,
            mu,
            length,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("string.lambda", self.lambda)?;
        positive("string.mu", self.mu)?;
        positive("string.length", self.length)?;
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(invalid("string.beta", format!("must be finite and >= 0, got {}", self.beta)));
        }
        Ok(())
    }

    /// Undamped frequency of mode `n` (1-based).
    pub fn omega(&self, n: usize) -> f64 {
        (self.mu / self.lambda).sqrt() * n as f64 * PI / self.length
    }

    /// `beta / (2 lambda)`: the amplitude damping rate of the damped wave equation.
    pub fn half_damping(&self) -> f64 {
        self.beta / (2.0 * self.lambda)
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }
}

pub(crate) fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

/// Undamped and damped mode frequencies for modes `1..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub n_max: usize,
    /// `omega[i]` is the frequency of mode `i + 1`.
    pub omega: Vec<f64>,
    pub omega_shifted: Vec<f64>,
}

impl ModeSpectrum {
    /// Frequency of 1-based mode `n`.
    pub fn omega_of(&self, n: usize) -> f64 {
        self.omega[n - 1]
    }

    pub fn omega_shifted_of(&self, n: usize) -> f64 {
        self.omega_shifted[n - 1]
    }
}

/// Builds `omega_n = sqrt(mu/lambda) n pi / L` and
/// `Omega_n = sqrt(omega_n^2 - beta^2 / (4 lambda^2))` for `n = 1..=n_max`.
pub fn build_spectrum(params: &StringParams, n_max: usize) -> Result<ModeSpectrum> {
    params.validate()?;
    if n_max == 0 {
        return Err(invalid("numerics.n_max", "must be at least 1"));
    }
    let threshold = params.half_damping();
    let mut omega = Vec::with_capacity(n_max);
    let mut omega_shifted = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let w = params.omega(n);
        if w <= threshold {
            return Err(Error::OverdampedMode {
                mode: n,
                omega: w,
                threshold,
            });
        }
        omega.push(w);
        omega_shifted.push((w * w - threshold * threshold).sqrt());
    }
    Ok(ModeSpectrum {
        n_max,
        omega,
        omega_shifted,
    })
}

/// Tabulated `|f|^2` samples with an optional phase, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable {
    pub omega: Vec<f64>,
    pub f_sq: Vec<f64>,
    /// Phase of `f` in radians; `None` means a real, non-negative coupling.
    pub phase: Option<Vec<f64>>,
}

impl CouplingTable {
    pub fn new(omega: Vec<f64>, f_sq: Vec<f64>, phase: Option<Vec<f64>>) -> Result<Self> {
        let t = Self { omega, f_sq, phase };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega.len() < 2 || self.omega.len() != self.f_sq.len() {
            return Err(invalid("coupling.table", "needs at least two (omega, |f|^2) samples of equal length"));
        }
        if let Some(ph) = &self.phase {
            if ph.len() != self.omega.len() {
                return Err(invalid("coupling.table", "phase column length differs from omega column"));
            }
        }
        if !self.omega.windows(2).all(|w| w[1] > w[0]) || self.omega[0] <= 0.0 {
            return Err(invalid("coupling.table", "omega samples must be positive and strictly increasing"));
        }
        for (&w, &v) in self.omega.iter().zip(&self.f_sq) {
            if !(v >= 0.0) {
                return Err(Error::NonIntegrableCoupling { omega: w, value: v });
            }
        }
        Ok(())
    }

    fn interpolate(&self, w: f64) -> (f64, f64) {
        let xs = &self.omega;
        if w < xs[0] || w > xs[xs.len() - 1] {
            return (0.0, 0.0);
        }
        let i = match xs.binary_search_by(|x| x.total_cmp(&w)) {
            Ok(i) => return (self.f_sq[i], self.phase.as_ref().map_or(0.0, |p| p[i])),
            Err(i) => i - 1,
        };
        let s = (w - xs[i]) / (xs[i + 1] - xs[i]);
        let lerp = |v: &[f64]| v[i] + s * (v[i + 1] - v[i]);
        (lerp(&self.f_sq), self.phase.as_ref().map_or(0.0, |p| lerp(p)))
    }

    pub fn max_omega(&self) -> f64 {
        self.omega[self.omega.len() - 1]
    }
}

/// Functional form of the coupling `f(omega)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingKind {
    /// `|f|^2 = beta / (4 pi^2 L omega^3)`: frequency-independent damping.
    PaperOhmic { beta: f64, length: f64 },
    /// `|f|^2 = prefactor * omega^exponent`.
    PowerLaw { prefactor: f64, exponent: f64 },
    Tabulated(CouplingTable),
}

/// A coupling function with its ultraviolet cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    /// `f` vanishes above this frequency. `None` is only usable for tables,
    /// whose support is already bounded.
    pub cutoff: Option<f64>,
}

impl CouplingSpec {
    pub fn paper_ohmic(beta: f64, length: f64, cutoff: f64) -> Self {
        Self {
            kind: CouplingKind::PaperOhmic { beta, length },
            cutoff: Some(cutoff),
        }
    }

    /// The Ohmic coupling matching a string's damping coefficient and length.
    pub fn ohmic_for(params: &StringParams, cutoff: f64) -> Self {
        Self::paper_ohmic(params.beta, params.length, cutoff)
    }

    pub fn power_law(prefactor: f64, exponent: f64, cutoff: f64) -> Self {
        Self {
            kind: CouplingKind::PowerLaw {
                prefactor,
                exponent,
            },
            cutoff: Some(cutoff),
        }
    }

    /// `f = 0` everywhere.
    pub fn zero(cutoff: f64) -> Self {
        Self::power_law(0.0, 0.0, cutoff)
    }

    pub fn tabulated(table: CouplingTable, cutoff: Option<f64>) -> Self {
        Self {
            kind: CouplingKind::Tabulated(table),
            cutoff,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.cutoff {
            positive("coupling.cutoff", c)?;
        }
        match &self.kind {
            CouplingKind::PaperOhmic { beta, length } => {
                if !(beta.is_finite() && *beta >= 0.0) {
                    return Err(invalid("coupling.beta", "must be finite and >= 0"));
                }
                positive("coupling.length", *length)
            }
            CouplingKind::PowerLaw {
                prefactor,
                exponent,
            } => {
                if !(prefactor.is_finite() && *prefactor >= 0.0) {
                    return Err(invalid("coupling.prefactor", "must be finite and >= 0"));
                }
                if !exponent.is_finite() {
                    return Err(invalid("coupling.exponent", "must be finite"));
                }
                Ok(())
            }
            CouplingKind::Tabulated(t) => t.validate(),
        }
    }

    /// Finite upper integration limit: the cutoff, or a table's last sample.
    pub fn upper_limit(&self) -> Result<f64> {
        match (&self.kind, self.cutoff) {
            (CouplingKind::Tabulated(t), Some(c)) => Ok(c.min(t.max_omega())),
            (CouplingKind::Tabulated(t), None) => Ok(t.max_omega()),
            (_, Some(c)) => Ok(c),
            (_, None) => Err(Error::CutoffRequired),
        }
    }

    /// True when `f` is identically zero, which lets callers skip integrals.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            CouplingKind::PaperOhmic { beta, .. } => *beta == 0.0,
            CouplingKind::PowerLaw { prefactor, .. } => *prefactor == 0.0,
            CouplingKind::Tabulated(t) => t.f_sq.iter().all(|&v| v == 0.0),
        }
    }

    /// Whether `f` is real and non-negative everywhere.
    pub fn is_real(&self) -> bool {
        match &self.kind {
            CouplingKind::Tabulated(t) => t.phase.as_ref().map_or(true, |p| p.iter().all(|&x| x == 0.0)),
            _ => true,
        }
    }

    fn above_cutoff(&self, w: f64) -> bool {
        self.cutoff.is_some_and(|c| w > c)
    }

    /// `|f(omega)|^2`, zero above the cutoff. Unchecked: `omega > 0` and a
    /// valid spec are assumed; use [`eval_coupling`] at API boundaries.
    pub fn f_sq(&self, w: f64) -> f64 {
        if self.above_cutoff(w) {
            return 0.0;
        }
        match &self.kind {
            CouplingKind::PaperOhmic { beta, length } => beta / (4.0 * PI * PI * length * w * w * w),
            CouplingKind::PowerLaw {
                prefactor,
                exponent,
            } => {
                if *prefactor == 0.0 {
                    0.0
                } else {
                    prefactor * w.powf(*exponent)
                }
            }
            CouplingKind::Tabulated(t) => t.interpolate(w).0,
        }
    }

    /// Complex amplitude `f(omega)`, zero above the cutoff.
    pub fn amplitude(&self, w: f64) -> Complex64 {
        if self.above_cutoff(w) {
            return Complex64::new(0.0, 0.0);
        }
        match &self.kind {
            CouplingKind::Tabulated(t) => {
                let (fsq, phase) = t.interpolate(w);
                Complex64::from_polar(fsq.sqrt(), phase)
            }
            _ => Complex64::new(self.f_sq(w).sqrt(), 0.0),
        }
    }
}

/// Evaluates the coupling amplitude `f(omega)` for `omega > 0`.
///
/// Returns zero above the cutoff; the Ohmic form returns the positive real root.
pub fn eval_coupling(spec: &CouplingSpec, omega: f64) -> Result<Complex64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(invalid("omega", format!("must be > 0, got {omega}")));
    }
    spec.validate()?;
    Ok(spec.amplitude(omega))
}

/// One reservoir quantum: field index `field` (>= 1) at frequency `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantum {
    pub field: usize,
    pub omega: f64,
}

/// Initial state of the reservoir, which fixes the trace rules used for rates.
#[derive(Debug, Clone, PartialEq)]
pub enum ReservoirSpec {
    Vacuum,
    FockQuanta(Vec<Quantum>),
    Thermal { kt: f64 },
}

impl ReservoirSpec {
    pub fn fock(quanta: Vec<Quantum>) -> Result<Self> {
        let r = ReservoirSpec::FockQuanta(quanta);
        r.validate()?;
        Ok(r)
    }

    pub fn thermal(kt: f64) -> Result<Self> {
        let r = ReservoirSpec::Thermal { kt };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ReservoirSpec::Vacuum => Ok(()),
            ReservoirSpec::FockQuanta(q) => {
                if q.is_empty() {
                    return Err(invalid("reservoir.quanta", "Fock reservoir needs at least one quantum"));
                }
                for quantum in q {
                    if quantum.field == 0 {
                        return Err(invalid("reservoir.quanta", "field indices start at 1"));
                    }
                    positive("reservoir.quanta", quantum.omega)?;
                }
                Ok(())
            }
            ReservoirSpec::Thermal { kt } => positive("reservoir.kT", *kt),
        }
    }
}

/// Phonon occupation of the string: `(mode, count)` pairs sorted by mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct StringFockState {
    occupation: Vec<(usize, u32)>,
}

impl StringFockState {
    /// The string ground state.
    pub fn vacuum() -> Self {
        Self::default()
    }

    /// `count` phonons of mode `m`.
    pub fn phonons(m: usize, count: u32) -> Result<Self> {
        Self::new(vec![(m, count)])
    }

    /// Builds a state from `(mode, count)` pairs; repeated modes are merged.
    pub fn new(pairs: Vec<(usize, u32)>) -> Result<Self> {
        let mut s = Self::vacuum();
        for (m, c) in pairs {
            if m == 0 {
                return Err(invalid("state.phonons", "mode indices start at 1"));
            }
            if c == 0 {
                return Err(invalid("state.phonons", format!("phonon count for mode {m} must be >= 1")));
            }
            for _ in 0..c {
                s.add_phonon(m);
            }
        }
        Ok(s)
    }

    pub fn occupation(&self) -> &[(usize, u32)] {
        &self.occupation
    }

    pub fn is_vacuum(&self) -> bool {
        self.occupation.is_empty()
    }

    pub fn count(&self, m: usize) -> u32 {
        self.occupation
            .iter()
            .find(|(mode, _)| *mode == m)
            .map_or(0, |&(_, c)| c)
    }

    pub fn total_phonons(&self) -> u32 {
        self.occupation.iter().map(|&(_, c)| c).sum()
    }

    pub fn max_mode(&self) -> usize {
        self.occupation.last().map_or(0, |&(m, _)| m)
    }

    /// Checks mode indices against a spectrum size.
    pub fn validate(&self, n_max: usize) -> Result<()> {
        if self.max_mode() > n_max {
            return Err(invalid(
                "state.phonons",
                format!("mode {} exceeds n_max = {n_max}", self.max_mode()),
            ));
        }
        Ok(())
    }

    pub fn add_phonon(&mut self, m: usize) {
        match self.occupation.binary_search_by_key(&m, |&(mode, _)| mode) {
            Ok(i) => self.occupation[i].1 += 1,
            Err(i) => self.occupation.insert(i, (m, 1)),
        }
    }

    /// Removes one phonon of mode `m`; `false` if the mode was empty.
    pub fn remove_phonon(&mut self, m: usize) -> bool {
        match self.occupation.binary_search_by_key(&m, |&(mode, _)| mode) {
            Ok(i) => {
                self.occupation[i].1 -= 1;
                if self.occupation[i].1 == 0 {
                    self.occupation.remove(i);
                }
                true
            }
            Err(_) => false,
        }
    }

    pub fn with_added(&self, m: usize) -> Self {
        let mut s = self.clone();
        s.add_phonon(m);
        s
    }

    pub fn with_removed(&self, m: usize) -> Option<Self> {
        let mut s = self.clone();
        s.remove_phonon(m).then_some(s)
    }

    /// Sum of phonon energies `sum_i r_i omega_{m_i}`.
    pub fn energy(&self, params: &StringParams) -> f64 {
        self.occupation
            .iter()
            .map(|&(m, c)| c as f64 * params.omega(m))
            .sum()
    }
}

impl fmt::Display for StringFockState {
    /// `vac`, or `m:count` pairs joined by `+`, e.g. `1:2+3:1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.occupation.is_empty() {
            return write!(f, "vac");
        }
        for (i, (m, c)) in self.occupation.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            write!(f, "{m}:{c}")?;
        }
        Ok(())
    }
}
