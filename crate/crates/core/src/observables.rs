//! Normal-ordered energies of the string and the reservoir.
//!
//! Expectations are taken in `|state> (x) |0>` with the string in a Fock
//! state and the reservoir in vacuum. Normal ordering is applied through the
//! contraction rules: every `<a a^dag>` and `<b b^dag>` vacuum term is dropped,
//! so only `<a_m^dag a_m> = r_m` survives.

use std::f64::consts::PI;

use crate::dynamics::CoefficientSolution;
use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::grid::TimeGrid;
use crate::model::{StringFockState, StringParams};
use crate::quad::{integrate_tangent, QuadOptions};

const ENERGY_REL_TOL: f64 = 1e-8;

/// Long-time limit of `<: sum_n omega_n a_n^dag a_n :>`:
/// `(beta^2 / 8 lambda^2) sum_i r_i / omega_{m_i}`.
pub fn string_energy_asymptotic(params: &StringParams, state: &StringFockState) -> Result<f64> {
    params.validate()?;
    check_underdamped(params, state)?;
    let pref = params.beta * params.beta / (8.0 * params.lambda * params.lambda);
    Ok(state
        .occupation()
        .iter()
        .map(|&(m, r)| pref * r as f64 / params.omega(m))
        .sum())
}

fn check_underdamped(params: &StringParams, state: &StringFockState) -> Result<()> {
    for &(m, _) in state.occupation() {
        let omega = params.omega(m);
        if omega <= params.half_damping() {
            return Err(Error::OverdampedMode {
                mode: m,
                omega,
                threshold: params.half_damping(),
            });
        }
    }
    Ok(())
}

/// How the reservoir energy integrals are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyMethod {
    ClosedForm,
    Quadrature,
}

/// The two Lorentzian integrals entering the reservoir energy,
/// `I1 = int_0^inf dx / ((w^2 - x^2)^2 + beta^2 x^2 / lambda^2)` and
/// `I2 = int_0^inf x^2 dx / (...)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzIntegrals {
    pub i1: f64,
    pub i2: f64,
}

pub fn lorentz_integrals(params: &StringParams, omega: f64, method: EnergyMethod) -> Result<LorentzIntegrals> {
    params.validate()?;
    let (beta, lambda) = (params.beta, params.lambda);
    if beta == 0.0 {
        return Err(invalid("string.beta", "the reservoir integrals diverge without damping"));
    }
    match method {
        EnergyMethod::ClosedForm => Ok(LorentzIntegrals {
            i1: PI * lambda / (2.0 * beta * omega * omega),
            i2: PI * lambda / (2.0 * beta),
        }),
        EnergyMethod::Quadrature => {
            let g = beta / lambda;
            let den = move |x: f64| (omega * omega - x * x).powi(2) + g * g * x * x;
            let opts = QuadOptions::default().with_rel_tol(1e-11).with_abs_tol(0.0);
            // The peak sits at x ~ omega with half-width ~ g/2.
            let scale = (g / 2.0).min(omega);
            let r1 = integrate_tangent(|x: f64| 1.0 / den(x), 0.0, omega, scale, &opts);
            let r2 = integrate_tangent(|x: f64| x * x / den(x), 0.0, omega, scale, &opts);
            for r in [r1, r2] {
                if !r.converged || r.error > ENERGY_REL_TOL * r.value.abs() {
                    return Err(Error::QuadratureDivergence {
                        value: r.value,
                        error: r.error,
                        tol: ENERGY_REL_TOL,
                    });
                }
            }
            Ok(LorentzIntegrals {
                i1: r1.value,
                i2: r2.value,
            })
        }
    }
}

/// Long-time limit of `<: sum int omega b^dag b :>`:
/// `(beta / 2 pi lambda) sum_i r_i [omega^3 I1(omega) + omega I2(omega)]`,
/// which evaluates to `sum_i r_i omega_{m_i} / 2`.
pub fn reservoir_energy_asymptotic(
    params: &StringParams,
    state: &StringFockState,
    method: EnergyMethod,
) -> Result<f64> {
    params.validate()?;
    check_underdamped(params, state)?;
    if state.is_vacuum() {
        return Ok(0.0);
    }
    let pref = params.beta / (2.0 * PI * params.lambda);
    let mut total = 0.0;
    for &(m, r) in state.occupation() {
        let w = params.omega(m);
        let LorentzIntegrals { i1, i2 } = lorentz_integrals(params, w, method)?;
        total += r as f64 * pref * (w.powi(3) * i1 + w * i2);
    }
    Ok(total)
}

/// Energy time series of the string in a Fock state with the reservoir in vacuum.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub grid: TimeGrid,
    /// `<: sum omega_n a_n^dag a_n :>(t)`.
    pub string_energy: Vec<f64>,
    /// `<: lambda psi_t^2/2 + mu psi_x^2/2 :>(t)` integrated over the string.
    pub mechanical_energy: Vec<f64>,
    /// Per-time contributions of each occupied mode to `string_energy`.
    pub per_mode: Vec<(usize, Vec<f64>)>,
    pub asymptote: f64,
}

impl EnergyReport {
    pub fn times(&self) -> Vec<f64> {
        self.grid.points()
    }
}

/// Contracts per-mode solutions against `<0| (x) <state| ... |state> (x) |0>`.
///
/// Each phonon of mode `m` contributes `omega_m (|u_a|^2 + |v_a|^2)`, where
/// `u_a`, `v_a` are the coefficients of `a_m(0)` and `a_m(0)^dag` in `a_m(t)`;
/// bath operators contribute nothing in vacuum.
pub fn string_energy_timeseries(
    params: &StringParams,
    solutions: &[CoefficientSolution],
    state: &StringFockState,
) -> Result<EnergyReport> {
    params.validate()?;
    let grid = match solutions.first() {
        Some(s) => s.grid,
        None if state.is_vacuum() => {
            return Err(invalid("solutions", "need at least one solution to fix the time grid"));
        }
        None => return Err(invalid("solutions", "no solution for the occupied modes")),
    };
    let limit = PI / (2.0 * grid.t_end().max(1.0));
    for sol in solutions {
        if sol.grid != grid {
            return Err(invalid("solutions", "all solutions must share one time grid"));
        }
        let spacing = sol.omega_grid.max_spacing_in(0.0, f64::INFINITY);
        if !sol.omega_grid.is_empty() && spacing > limit {
            return Err(Error::GridTooCoarse {
                what: "oscillation",
                spacing,
                limit,
            });
        }
    }
    let mut per_mode = Vec::new();
    let mut string_energy = vec![0.0; grid.len];
    let mut mechanical_energy = vec![0.0; grid.len];
    for &(m, r) in state.occupation() {
        let sol = solutions
            .iter()
            .find(|s| s.mode == m)
            .ok_or_else(|| invalid("solutions", format!("no solution for mode {m}")))?;
        let d = sol.damping;
        let r = r as f64;
        let rows = exec::map_range(grid.len, |i| {
            let (u, v) = sol.ladder_coefficients(i);
            let number = r * (u.norm_sqr() + v.norm_sqr());
            // <:A^2:> = 2 r |c_a|^2, likewise for A'.
            let mech = r * d.length * d.lambda / 2.0
                * (sol.dc_a[i].norm_sqr() + d.omega * d.omega * sol.c_a[i].norm_sqr());
            (d.omega * number, mech)
        });
        let mut series = Vec::with_capacity(grid.len);
        for (i, (e, mech)) in rows.into_iter().enumerate() {
            string_energy[i] += e;
            mechanical_energy[i] += mech;
            series.push(e);
        }
        per_mode.push((m, series));
    }
    Ok(EnergyReport {
        grid,
        string_energy,
        mechanical_energy,
        per_mode,
        asymptote: string_energy_asymptotic(params, state)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{mode_solution_with, string_solution, DampingConvention, ModeDamping};
    use crate::grid::{OmegaGrid, OmegaGridSpec};
    use crate::model::CouplingSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit(beta: f64) -> StringParams {
        StringParams::new(1.0, 1.0, 1.0, beta).unwrap()
    }

    #[test]
    fn asymptotic_string_energy() {
        let one = StringFockState::phonons(1, 1).unwrap();
        assert_eq!(string_energy_asymptotic(&unit(0.1), &StringFockState::vacuum()).unwrap(), 0.0);
        let e = string_energy_asymptotic(&unit(0.1), &one).unwrap();
        assert_relative_eq!(e, 3.978_873_577_297_383_4e-4, max_relative = 1e-14);
        let e2 = string_energy_asymptotic(&unit(0.2), &one).unwrap();
        assert_relative_eq!(e2, 4.0 * e, max_relative = 1e-14);
    }

    #[test]
    fn lorentz_integrals_by_quadrature() {
        let p = unit(0.1);
        let frozen_i1 = [1.591_549_430_918_953_4, 0.397_887_357_729_738_3, 0.176_838_825_657_661_48];
        for (k, i1) in frozen_i1.iter().enumerate() {
            let w = (k + 1) as f64 * PI;
            let q = lorentz_integrals(&p, w, EnergyMethod::Quadrature).unwrap();
            assert_relative_eq!(q.i1, *i1, max_relative = 1e-9);
            assert_relative_eq!(q.i2, 15.707_963_267_948_966, max_relative = 1e-9);
            let c = lorentz_integrals(&p, w, EnergyMethod::ClosedForm).unwrap();
            assert_relative_eq!(c.i1, *i1, max_relative = 1e-14);
        }
    }

    #[test]
    fn reservoir_energy_is_half_the_phonon_energy() {
        let p = unit(0.1);
        let one = StringFockState::phonons(1, 1).unwrap();
        for method in [EnergyMethod::ClosedForm, EnergyMethod::Quadrature] {
            let e = reservoir_energy_asymptotic(&p, &one, method).unwrap();
            assert_relative_eq!(e, PI / 2.0, max_relative = 1e-8);
            assert_eq!(reservoir_energy_asymptotic(&p, &StringFockState::vacuum(), method).unwrap(), 0.0);
        }
    }

    proptest! {
        #[test]
        fn reservoir_energy_is_additive(r1 in 1u32..4, r2 in 1u32..4, m1 in 1usize..6, m2 in 1usize..6, beta in 0.01f64..0.3) {
            let p = unit(beta);
            let a = StringFockState::phonons(m1, r1).unwrap();
            let b = StringFockState::phonons(m2, r2).unwrap();
            let mut both = a.clone();
            for _ in 0..r2 { both.add_phonon(m2); }
            let ea = reservoir_energy_asymptotic(&p, &a, EnergyMethod::ClosedForm).unwrap();
            let eb = reservoir_energy_asymptotic(&p, &b, EnergyMethod::ClosedForm).unwrap();
            let e = reservoir_energy_asymptotic(&p, &both, EnergyMethod::ClosedForm).unwrap();
            prop_assert!((e - ea - eb).abs() <= 1e-12 * e);
        }

        #[test]
        fn quadrature_agrees_with_closed_form(w in 0.5f64..20.0, beta in 0.001f64..0.1) {
            let p = unit(beta);
            let g = beta / w;
            prop_assume!(g <= 0.1);
            let q = lorentz_integrals(&p, w, EnergyMethod::Quadrature).unwrap();
            let c = lorentz_integrals(&p, w, EnergyMethod::ClosedForm).unwrap();
            prop_assert!((q.i1 / c.i1 - 1.0).abs() < 1e-6);
            prop_assert!((q.i2 / c.i2 - 1.0).abs() < 1e-6);
        }
    }

    fn solve(beta: f64, cutoff: f64, tg: &TimeGrid, conv: DampingConvention, n: usize) -> CoefficientSolution {
        let p = unit(beta);
        let spec = CouplingSpec::ohmic_for(&p, cutoff);
        let d = ModeDamping::new(&p, &spec, n, conv).unwrap();
        let og = OmegaGrid::refined(&OmegaGridSpec::for_dynamics(cutoff, tg.t_end(), d.omega, d.kappa / 2.0)).unwrap();
        string_solution(&p, &spec, n, tg, &og, conv).unwrap()
    }

    #[test]
    fn initial_energy_is_phonon_energy() {
        let tg = TimeGrid::spanning(2.0, 5).unwrap();
        let sols = vec![
            solve(0.1, 20.0 * PI, &tg, DampingConvention::HalfDelta, 1),
            solve(0.1, 20.0 * PI, &tg, DampingConvention::HalfDelta, 2),
        ];
        let state = StringFockState::new(vec![(1, 2), (2, 1)]).unwrap();
        let rep = string_energy_timeseries(&unit(0.1), &sols, &state).unwrap();
        assert_relative_eq!(rep.string_energy[0], 4.0 * PI, max_relative = 1e-13);
        assert_relative_eq!(rep.mechanical_energy[0], 4.0 * PI, max_relative = 1e-13);
    }

    #[test]
    fn closed_string_energy_is_constant() {
        let tg = TimeGrid::spanning(100.0 / PI, 201).unwrap();
        let sol = solve(0.0, 20.0, &tg, DampingConvention::HalfDelta, 1);
        let rep = string_energy_timeseries(&unit(0.0), &[sol], &StringFockState::phonons(1, 1).unwrap()).unwrap();
        for (e, m) in rep.string_energy.iter().zip(&rep.mechanical_energy) {
            assert!((e - PI).abs() < 1e-10 * PI);
            assert!((m - PI).abs() < 1e-10 * PI);
        }
    }

    #[test]
    fn long_time_tail_approaches_asymptote() {
        // After ~20 decay times the string keeps only the dressing share.
        let tg = TimeGrid::new(25.0, 17).unwrap();
        let sol = solve(0.1, 50.0 * PI, &tg, DampingConvention::HalfDelta, 1);
        let rep = string_energy_timeseries(&unit(0.1), &[sol], &StringFockState::phonons(1, 1).unwrap()).unwrap();
        let tail = *rep.string_energy.last().unwrap();
        assert!((tail / rep.asymptote - 1.0).abs() < 0.1, "{tail} vs {}", rep.asymptote);
        assert!(rep.mechanical_energy.last().unwrap() < &1e-6);
    }

    #[test]
    fn full_delta_envelope_bound() {
        // E(t) - E_inf stays below e^{-beta t/lambda} E(0) (within 5%) once demodulated
        // over a 2 Omega period.
        let beta = 0.1;
        let tg = TimeGrid::spanning(30.0, 601).unwrap();
        let p = unit(beta);
        let spec = CouplingSpec::ohmic_for(&p, 20.0 * PI);
        let d = ModeDamping::new(&p, &spec, 1, DampingConvention::FullDelta).unwrap();
        let og = OmegaGrid::refined(&OmegaGridSpec::for_dynamics(20.0 * PI, 30.0, d.omega, d.kappa / 2.0)).unwrap();
        let sol = mode_solution_with(&p, &spec, 1, &tg, &og, DampingConvention::FullDelta).unwrap();
        let rep = string_energy_timeseries(&p, &[sol], &StringFockState::phonons(1, 1).unwrap()).unwrap();
        let e0 = rep.string_energy[0];
        let period = PI / d.omega_damped;
        let win = (period / tg.dt).round() as usize;
        for start in (0..tg.len - win).step_by(win) {
            let mean: f64 = rep.string_energy[start..start + win].iter().sum::<f64>() / win as f64;
            let t_mid = tg.at(start) + 0.5 * period;
            let bound = (-beta * t_mid).exp() * e0 + rep.asymptote;
            assert!(mean <= 1.05 * bound, "t = {t_mid}: {mean} > {bound}");
        }
    }

    #[test]
    fn coarse_frequency_grid_is_rejected() {
        let tg = TimeGrid::spanning(100.0, 11).unwrap();
        let p = unit(0.1);
        let spec = CouplingSpec::ohmic_for(&p, 20.0);
        let d = ModeDamping::new(&p, &spec, 1, DampingConvention::HalfDelta).unwrap();
        let og = OmegaGrid::refined(&OmegaGridSpec::for_dynamics(20.0, 1.0, d.omega, d.kappa / 2.0)).unwrap();
        let sol = string_solution(&p, &spec, 1, &tg, &og, DampingConvention::HalfDelta).unwrap();
        let r = string_energy_timeseries(&p, &[sol], &StringFockState::phonons(1, 1).unwrap());
        assert!(matches!(r, Err(Error::GridTooCoarse { .. })));
    }
}
