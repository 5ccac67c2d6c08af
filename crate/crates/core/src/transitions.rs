//! First-order transition rates between string Fock states.
//!
//! In the interaction picture the coupling `-(B_n R_n)/lambda` is truncated to
//! its rotating-wave part `a_n^dag b_n + a_n b_n^dag`; the `R^2/2 lambda` term is
//! dropped. Tracing the reservoir out of the first-order evolved state gives a
//! diagonal reduced density matrix whose off-initial weights grow linearly in
//! `t` once `sin^2(x t/2)/(x/2)^2` is replaced by `2 pi t delta(x)`. Rates are
//! reported per unit time.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::model::{CouplingKind, CouplingSpec, ReservoirSpec, StringFockState, StringParams};

/// Default Lorentzian half-width for Fock quanta, relative to `omega_nu`.
pub const DEFAULT_RELATIVE_BROADENING: f64 = 1e-3;

/// One transition channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub channel: String,
    /// Transition probability per unit time.
    pub rate: f64,
    /// Closed-form value where the coupling has one, otherwise equal to `rate`.
    pub analytic: f64,
    /// Half-width of the regularized delta; only set for discrete quanta.
    pub broadening: Option<f64>,
}

impl RateReport {
    /// The raw first-order probability `rate * t`.
    pub fn probability(&self, t: f64) -> f64 {
        self.rate * t
    }
}

/// Trace rules for a thermal reservoir.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThermalRule {
    /// `<b b^dag> -> e^{-omega/kT}`, `<b^dag b> -> 1`.
    #[default]
    PaperBoltzmann,
    /// Bose-Einstein occupation `n`: `<b b^dag> -> n + 1`, `<b^dag b> -> n`.
    /// Offered for comparison with the Boltzmann rule.
    BoseEinstein,
}

impl ThermalRule {
    /// Factors multiplying the vacuum emission rate for (absorption, emission).
    fn factors(self, omega: f64, kt: f64) -> (f64, f64) {
        let x = omega / kt;
        match self {
            ThermalRule::PaperBoltzmann => ((-x).exp(), 1.0),
            ThermalRule::BoseEinstein => {
                let n = 1.0 / x.exp_m1();
                (n, n + 1.0)
            }
        }
    }
}

/// `2 L pi^2 omega^3 |f(omega)|^2 / lambda`: the golden-rule rate of a resonant bath.
fn resonant_rate(params: &StringParams, spec: &CouplingSpec, omega: f64) -> f64 {
    2.0 * params.length * PI * PI * omega.powi(3) * spec.f_sq(omega) / params.lambda
}

fn closed_form_emission(params: &StringParams, spec: &CouplingSpec) -> Option<f64> {
    match spec.kind {
        CouplingKind::PaperOhmic { beta, length } => Some(beta * params.length / (2.0 * params.lambda * length)),
        _ => None,
    }
}

fn check_resonant(params: &StringParams, spec: &CouplingSpec, m: usize) -> Result<f64> {
    params.validate()?;
    spec.validate()?;
    if m == 0 {
        return Err(invalid("mode", "mode indices start at 1"));
    }
    let omega = params.omega(m);
    let cutoff = spec.upper_limit()?;
    if omega > cutoff {
        return Err(Error::CutoffExceeded { omega, cutoff });
    }
    Ok(omega)
}

/// Rate of `|r phonons of m> -> |r - 1>` into the reservoir vacuum.
pub fn emission_rate(params: &StringParams, spec: &CouplingSpec, m: usize) -> Result<RateReport> {
    let omega = check_resonant(params, spec, m)?;
    let rate = resonant_rate(params, spec, omega);
    Ok(RateReport {
        channel: format!("emission[{m}]"),
        rate,
        analytic: closed_form_emission(params, spec).unwrap_or(rate),
        broadening: None,
    })
}

/// Normalized Lorentzian of half-width `eps`.
pub fn lorentzian(x: f64, eps: f64) -> f64 {
    eps / (PI * (x * x + eps * eps))
}

/// Rate of absorbing one of the reservoir quanta of field `nu` into string mode `nu`:
/// `(pi L omega_nu / 2 lambda) sum_r |f(omega_{p_r})|^2 delta_eps(omega_{p_r} - omega_nu)`.
///
/// `broadening` is the Lorentzian half-width; `None` uses `1e-3 omega_nu`.
pub fn absorption_rate_fock(
    params: &StringParams,
    spec: &CouplingSpec,
    reservoir: &ReservoirSpec,
    nu: usize,
    broadening: Option<f64>,
) -> Result<RateReport> {
    params.validate()?;
    spec.validate()?;
    reservoir.validate()?;
    let quanta = match reservoir {
        ReservoirSpec::FockQuanta(q) => q,
        _ => return Err(invalid("reservoir.kind", "absorption from discrete quanta needs a fock reservoir")),
    };
    if nu == 0 {
        return Err(invalid("mode", "mode indices start at 1"));
    }
    let omega_nu = params.omega(nu);
    let eps = broadening.unwrap_or(DEFAULT_RELATIVE_BROADENING * omega_nu);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid("transitions.broadening", "half-width must be > 0"));
    }
    let pref = PI * params.length * omega_nu / (2.0 * params.lambda);
    let rate: f64 = quanta
        .iter()
        .filter(|q| q.field == nu)
        .map(|q| pref * spec.f_sq(q.omega) * lorentzian(q.omega - omega_nu, eps))
        .sum();
    let analytic = match spec.kind {
        CouplingKind::PaperOhmic { beta, length } => quanta
            .iter()
            .filter(|q| q.field == nu && spec.cutoff.is_none_or(|c| q.omega <= c))
            .map(|q| {
                beta * omega_nu * params.length / (8.0 * PI * params.lambda * length * q.omega.powi(3))
                    * lorentzian(q.omega - omega_nu, eps)
            })
            .sum(),
        _ => rate,
    };
    Ok(RateReport {
        channel: format!("absorption[{nu}]"),
        rate,
        analytic,
        broadening: Some(eps),
    })
}

/// Rate of absorbing a thermal quantum into mode `m`.
///
/// Under [`ThermalRule::PaperBoltzmann`] this is `emission_rate(m) e^{-omega_m/kT}`.
pub fn absorption_rate_thermal(
    params: &StringParams,
    spec: &CouplingSpec,
    kt: f64,
    m: usize,
    rule: ThermalRule,
) -> Result<RateReport> {
    if !(kt > 0.0 && kt.is_finite()) {
        return Err(invalid("reservoir.kt", format!("temperature must be > 0, got {kt}")));
    }
    let emission = emission_rate(params, spec, m)?;
    let (absorb, _) = rule.factors(params.omega(m), kt);
    Ok(RateReport {
        channel: format!("thermal_absorption[{m}]"),
        rate: emission.rate * absorb,
        analytic: emission.analytic * absorb,
        broadening: None,
    })
}

/// Emission into a thermal reservoir; the Boltzmann rule leaves it at the vacuum value.
pub fn emission_rate_thermal(
    params: &StringParams,
    spec: &CouplingSpec,
    kt: f64,
    m: usize,
    rule: ThermalRule,
) -> Result<RateReport> {
    if !(kt > 0.0 && kt.is_finite()) {
        return Err(invalid("reservoir.kt", format!("temperature must be > 0, got {kt}")));
    }
    let emission = emission_rate(params, spec, m)?;
    let (_, emit) = rule.factors(params.omega(m), kt);
    Ok(RateReport {
        channel: format!("thermal_emission[{m}]"),
        rate: emission.rate * emit,
        analytic: emission.analytic * emit,
        broadening: None,
    })
}

/// Settings for [`reduced_density_diagonal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityOptions {
    /// Highest string mode a thermal quantum may be absorbed into.
    pub n_max: usize,
    /// Lorentzian half-width for Fock quanta; `None` uses `1e-3 omega_nu`.
    pub broadening: Option<f64>,
    pub thermal_rule: ThermalRule,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            n_max: 10,
            broadening: None,
            thermal_rule: ThermalRule::PaperBoltzmann,
        }
    }
}

/// Modes above the cutoff have no resonant partners and contribute nothing.
fn rate_or_zero(r: Result<RateReport>) -> Result<f64> {
    match r {
        Ok(rep) => Ok(rep.rate),
        Err(Error::CutoffExceeded { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Diagonal of the reduced string density matrix to first order.
///
/// The initial state keeps weight 1; every reachable state carries
/// `rate * t`. One phonon of an occupied mode can be emitted, and a bath
/// quantum can be absorbed only if the reservoir holds one: the truncated
/// coupling never creates or destroys excitations on both sides at once.
pub fn reduced_density_diagonal(
    params: &StringParams,
    spec: &CouplingSpec,
    initial: &StringFockState,
    reservoir: &ReservoirSpec,
    t: f64,
    opts: &DensityOptions,
) -> Result<Vec<(StringFockState, f64)>> {
    params.validate()?;
    spec.validate()?;
    reservoir.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("time must be >= 0, got {t}")));
    }
    let mut out = vec![(initial.clone(), 1.0)];
    if t == 0.0 {
        return Ok(out);
    }
    let occupied: Vec<usize> = initial.occupation().iter().map(|&(m, _)| m).collect();
    let emissions: Vec<Result<f64>> = exec::map_slice(&occupied, |&m| match reservoir {
        ReservoirSpec::Thermal { kt } => rate_or_zero(emission_rate_thermal(params, spec, *kt, m, opts.thermal_rule)),
        _ => rate_or_zero(emission_rate(params, spec, m)),
    });
    for (&m, rate) in occupied.iter().zip(emissions) {
        let rate = rate?;
        if let Some(state) = initial.with_removed(m) {
            out.push((state, rate * t));
        }
    }
    match reservoir {
        ReservoirSpec::Vacuum => {}
        ReservoirSpec::FockQuanta(quanta) => {
            let mut fields: Vec<usize> = quanta.iter().map(|q| q.field).collect();
            fields.sort_unstable();
            fields.dedup();
            for nu in fields {
                let rate = absorption_rate_fock(params, spec, reservoir, nu, opts.broadening)?.rate;
                out.push((initial.with_added(nu), rate * t));
            }
        }
        ReservoirSpec::Thermal { kt } => {
            let modes: Vec<usize> = (1..=opts.n_max).collect();
            let rates = exec::map_slice(&modes, |&nu| {
                rate_or_zero(absorption_rate_thermal(params, spec, *kt, nu, opts.thermal_rule))
            });
            for (nu, rate) in modes.into_iter().zip(rates) {
                out.push((initial.with_added(nu), rate? * t));
            }
        }
    }
    Ok(out)
}
