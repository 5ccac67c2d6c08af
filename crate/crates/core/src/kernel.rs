//! Memory kernel `gamma(t)` of the string's Langevin equation and the
//! per-mode vacuum noise correlator.
//!
//! For the Ohmic coupling `gamma(t) = (beta/pi) sin(Lambda t)/t`, which tends
//! to `beta * delta(t)` as the cutoff grows. The one-sided time integral
//! reported by [`gamma_integral`] therefore converges to `beta/2`, not `beta`:
//! the delta sits at the endpoint of the memory integral.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::grid::TimeGrid;
use crate::model::CouplingSpec;
use crate::quad::{integrate, QuadOptions, QuadResult};

const KERNEL_REL_TOL: f64 = 1e-11;

/// Kernel values on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSample {
    pub grid: TimeGrid,
    pub gamma: Vec<f64>,
    pub cutoff_used: f64,
}

impl KernelSample {
    pub fn times(&self) -> Vec<f64> {
        self.grid.points()
    }
}

fn check(r: QuadResult<f64>) -> Result<f64> {
    if r.converged {
        Ok(r.value)
    } else {
        Err(Error::QuadratureDivergence {
            value: r.value,
            error: r.error,
            tol: KERNEL_REL_TOL,
        })
    }
}

/// `gamma(t) = 4 pi L int_0^Lambda |f|^2 omega^3 cos(omega t) d omega` at one time.
pub fn gamma_at(spec: &CouplingSpec, length: f64, t: f64) -> Result<f64> {
    let cutoff = spec.upper_limit()?;
    if spec.is_zero() {
        return Ok(0.0);
    }
    let opts = QuadOptions::default()
        .with_rel_tol(KERNEL_REL_TOL)
        .oscillation_bounded(t);
    let r = integrate(
        |w: f64| spec.f_sq(w) * w * w * w * (w * t).cos(),
        0.0,
        cutoff,
        &opts,
    );
    Ok(4.0 * PI * length * check(r)?)
}

/// Samples the memory kernel on `grid` by oscillation-aware adaptive quadrature.
pub fn gamma_kernel(spec: &CouplingSpec, length: f64, grid: &TimeGrid) -> Result<KernelSample> {
    spec.validate()?;
    let cutoff_used = spec.upper_limit()?;
    let gamma: Result<Vec<f64>> = exec::map_range(grid.len, |i| gamma_at(spec, length, grid.at(i)))
        .into_iter()
        .collect();
    Ok(KernelSample {
        grid: *grid,
        gamma: gamma?,
        cutoff_used,
    })
}

/// Closed form of the Ohmic kernel with a sharp cutoff: `(beta/pi) sin(Lambda t)/t`.
pub fn ohmic_gamma_closed_form(beta: f64, cutoff: f64, t: f64) -> f64 {
    if t == 0.0 {
        beta * cutoff / PI
    } else {
        beta / PI * (cutoff * t).sin() / t
    }
}

/// Trapezoid-rule integral of the sampled kernel from 0 to `t_end`.
///
/// A `t_end` between grid points closes with a linearly interpolated partial panel.
pub fn gamma_integral(sample: &KernelSample, t_end: f64) -> Result<f64> {
    let grid = &sample.grid;
    if !(t_end >= 0.0 && t_end <= grid.t_end() * (1.0 + 1e-12)) {
        return Err(invalid(
            "t_end",
            format!("{t_end} lies outside the kernel grid [0, {}]", grid.t_end()),
        ));
    }
    let g = &sample.gamma;
    let full = ((t_end / grid.dt).floor() as usize).min(grid.len - 1);
    let mut sum = 0.0;
    for i in 0..full {
        sum += 0.5 * (g[i] + g[i + 1]) * grid.dt;
    }
    let rest = t_end - grid.at(full);
    if rest > 0.0 && full + 1 < grid.len {
        let s = rest / grid.dt;
        let g_end = g[full] + s * (g[full + 1] - g[full]);
        sum += 0.5 * (g[full] + g_end) * rest;
    }
    Ok(sum)
}

/// Per-mode vacuum correlator `<0| xi_n(t) xi_n(t') |0>` as a function of
/// `tau = t - t'`: `4 pi int_0^Lambda omega^4 |f|^2 e^{-i omega tau} d omega`.
pub fn noise_correlator(spec: &CouplingSpec, tau: f64) -> Result<Complex64> {
    spec.validate()?;
    let cutoff = spec.upper_limit()?;
    if spec.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let opts = QuadOptions::default()
        .with_rel_tol(KERNEL_REL_TOL)
        .oscillation_bounded(tau);
    let r: QuadResult<Complex64> = integrate(
        |w: f64| Complex64::from_polar(spec.f_sq(w) * w.powi(4), -w * tau),
        0.0,
        cutoff,
        &opts,
    );
    if !r.converged {
        return Err(Error::QuadratureDivergence {
            value: r.value.norm(),
            error: r.error,
            tol: KERNEL_REL_TOL,
        });
    }
    Ok(r.value * (4.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_coupling_gives_zero_kernel() {
        let grid = TimeGrid::spanning(5.0, 11).unwrap();
        let k = gamma_kernel(&CouplingSpec::zero(10.0), 1.0, &grid).unwrap();
        assert!(k.gamma.iter().all(|&g| g == 0.0));
        assert_eq!(gamma_integral(&k, 5.0).unwrap(), 0.0);
        assert_eq!(noise_correlator(&CouplingSpec::zero(10.0), 0.3).unwrap().norm(), 0.0);
    }

    #[test]
    fn ohmic_kernel_matches_closed_form() {
        let spec = CouplingSpec::paper_ohmic(0.1, 1.0, 40.0);
        for i in 1..=50 {
            let t = i as f64 * 0.2;
            let q = gamma_at(&spec, 1.0, t).unwrap();
            let exact = ohmic_gamma_closed_form(0.1, 40.0, t);
            assert!((q - exact).abs() <= 1e-8 * exact.abs().max(1e-3 * 0.1 / PI), "t={t}: {q} vs {exact}");
        }
        assert_relative_eq!(gamma_at(&spec, 1.0, 0.0).unwrap(), 4.0 / PI, max_relative = 1e-10);
    }

    #[test]
    fn kernel_is_even() {
        let spec = CouplingSpec::power_law(0.3, -2.0, 20.0);
        for &t in &[0.1, 0.7, 3.3] {
            assert_eq!(gamma_at(&spec, 2.0, t).unwrap(), gamma_at(&spec, 2.0, -t).unwrap());
        }
    }

    #[test]
    fn missing_cutoff_is_an_error() {
        let mut spec = CouplingSpec::paper_ohmic(0.1, 1.0, 1.0);
        spec.cutoff = None;
        assert_eq!(gamma_at(&spec, 1.0, 1.0), Err(Error::CutoffRequired));
        assert_eq!(noise_correlator(&spec, 1.0), Err(Error::CutoffRequired));
    }

    #[test]
    fn integral_at_lambda_t_100() {
        // (beta/2) (2/pi) Si(100), Si(100) = 1.5622254668890563 from a 30-digit evaluation
        let (cutoff, t_end) = (20.0, 5.0);
        let grid = TimeGrid::spanning(t_end, 10_001).unwrap();
        let k = gamma_kernel(&CouplingSpec::paper_ohmic(0.1, 1.0, cutoff), 1.0, &grid).unwrap();
        let v = gamma_integral(&k, t_end).unwrap();
        assert_relative_eq!(v, 0.049_727_181_055_887_48, max_relative = 1e-5);
        assert!(gamma_integral(&k, 6.0).is_err());
    }

    #[test]
    fn partial_panel_interpolates() {
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let k = KernelSample {
            grid,
            gamma: vec![1.0, 1.0, 3.0],
            cutoff_used: 1.0,
        };
        // 1 + (1 + 2)/2 * 0.5
        assert_relative_eq!(gamma_integral(&k, 1.5).unwrap(), 1.75);
    }

    #[test]
    fn correlator_at_zero_lag() {
        let spec = CouplingSpec::paper_ohmic(0.1, 1.0, 30.0);
        let c = noise_correlator(&spec, 0.0).unwrap();
        assert_relative_eq!(c.re, 0.1 / PI * 900.0 / 2.0, max_relative = 1e-12);
        assert!(c.im.abs() < 1e-12);
    }

    #[test]
    fn correlator_is_hermitian() {
        let spec = CouplingSpec::power_law(0.2, -3.5, 15.0);
        for &tau in &[0.05, 0.4, 2.0] {
            let a = noise_correlator(&spec, tau).unwrap();
            let b = noise_correlator(&spec, -tau).unwrap();
            assert!((a - b.conj()).norm() <= 1e-13 * a.norm().max(1.0));
        }
    }
}
