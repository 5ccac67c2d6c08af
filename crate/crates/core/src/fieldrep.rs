//! The reservoir as a set of sourced massless scalar fields.
//!
//! Each bath field `b_n(k)` defines a field `Y_n(x)` and momentum `Pi_n(x)`
//! through the usual plane-wave maps. The string acts on `Y_n` through two
//! radial source profiles, `P(r)` and `Q(r)`, obtained from the coupling
//! function after the angular integral turns `e^{-i k.x}` into `sinc(omega r)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::model::CouplingSpec;
use crate::quad::{integrate, sinc, QuadOptions, QuadResult};

const SHAPE_REL_TOL: f64 = 1e-10;

/// Radial source profiles sampled on `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceShapes {
    pub r: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// `P(r) = Re int_0^Lambda 4 pi w^2 sqrt(w / (2 (2 pi)^3)) f(w) sinc(w r) dw` and
/// `Q(r) = Im int_0^Lambda 4 pi w^2 f(w) sinc(w r) / sqrt(2 (2 pi)^3 w) dw`.
pub fn source_shapes(spec: &CouplingSpec, r: &[f64]) -> Result<SourceShapes> {
    spec.validate()?;
    let cutoff = spec.cutoff.ok_or(Error::CutoffRequired)?;
    if let Some(bad) = r.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(invalid("shapes.r", format!("radii must be finite and >= 0, got {bad}")));
    }
    let norm = (2.0 * (2.0 * PI).powi(3)).sqrt();
    // Zeros of P and Q are expected, so the tolerance is anchored to the
    // size of the integrand rather than to the value at each radius.
    let scale = if spec.is_zero() {
        0.0
    } else {
        integrate(
            |w: f64| 4.0 * PI * w * w * spec.amplitude(w).norm() * (w.sqrt() + 1.0 / w.sqrt()) / norm,
            0.0,
            cutoff,
            &QuadOptions::default().with_rel_tol(1e-6),
        )
        .value
    };
    let shapes: Vec<Result<(f64, f64)>> = exec::map_slice(r, |&x| {
        if spec.is_zero() {
            return Ok((0.0, 0.0));
        }
        let opts = QuadOptions::default()
            .with_rel_tol(SHAPE_REL_TOL)
            .with_abs_tol(SHAPE_REL_TOL * scale)
            .oscillation_bounded(x);
        let p: QuadResult<f64> = integrate(
            |w: f64| 4.0 * PI * w * w * (w.sqrt() / norm) * spec.amplitude(w).re * sinc(w * x),
            0.0,
            cutoff,
            &opts,
        );
        let q = if spec.is_real() {
            None
        } else {
            Some(integrate(
                |w: f64| 4.0 * PI * w * w / (norm * w.sqrt()) * spec.amplitude(w).im * sinc(w * x),
                0.0,
                cutoff,
                &opts,
            ))
        };
        for res in std::iter::once(&p).chain(q.as_ref()) {
            if !res.converged {
                return Err(Error::QuadratureDivergence {
                    value: res.value,
                    error: res.error,
                    tol: SHAPE_REL_TOL,
                });
            }
        }
        Ok((p.value, q.map_or(0.0, |q| q.value)))
    });
    let mut out = SourceShapes {
        r: r.to_vec(),
        p: Vec::with_capacity(r.len()),
        q: Vec::with_capacity(r.len()),
    };
    for s in shapes {
        let (p, q) = s?;
        out.p.push(p);
        out.q.push(q);
    }
    Ok(out)
}

/// Periodic cube of side `side` sampled on `points^3` grid nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxLattice {
    pub side: f64,
    pub points: usize,
}

impl BoxLattice {
    pub fn new(side: f64, points: usize) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) || points == 0 {
            return Err(invalid("fieldrep.box", "need a positive side and at least one point"));
        }
        Ok(Self { side, points })
    }

    pub fn wave_vector(&self, n: [i32; 3]) -> [f64; 3] {
        let unit = 2.0 * PI / self.side;
        [n[0] as f64 * unit, n[1] as f64 * unit, n[2] as f64 * unit]
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(3)
    }

    fn nodes(&self) -> Vec<[f64; 3]> {
        let h = self.side / self.points as f64;
        let m = self.points;
        let mut out = Vec::with_capacity(m * m * m);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    out.push([i as f64 * h, j as f64 * h, k as f64 * h]);
                }
            }
        }
        out
    }
}

/// A classical field configuration given by its mode amplitudes `b_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub modes: Vec<([i32; 3], Complex64)>,
}

fn norm3(k: [f64; 3]) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
}

fn dot(k: [f64; 3], x: [f64; 3]) -> f64 {
    k[0] * x[0] + k[1] * x[1] + k[2] * x[2]
}

fn check_sample(spec: &CouplingSpec, lattice: &BoxLattice, sample: &FieldSample) -> Result<()> {
    let cutoff = spec.upper_limit()?;
    let mut seen = std::collections::BTreeSet::new();
    for (n, _) in &sample.modes {
        if *n == [0, 0, 0] {
            return Err(invalid("fieldrep.sample", "the zero mode has no frequency"));
        }
        if !seen.insert(*n) {
            return Err(invalid("fieldrep.sample", format!("mode {n:?} listed twice")));
        }
        let w = norm3(lattice.wave_vector(*n));
        if w >= cutoff {
            return Err(invalid("fieldrep.sample", format!("mode {n:?} has omega {w} >= cutoff {cutoff}")));
        }
        // Products of two modes must be integrated exactly by the grid sum.
        let reach = n.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0);
        if lattice.points <= 2 * reach {
            return Err(invalid("fieldrep.box", format!("{} points cannot resolve mode {n:?}", lattice.points)));
        }
    }
    Ok(())
}

/// `sum_k omega_k |b_k|^2`: the bath Hamiltonian in mode form.
pub fn mode_energy(lattice: &BoxLattice, sample: &FieldSample) -> f64 {
    sample
        .modes
        .iter()
        .map(|(n, b)| norm3(lattice.wave_vector(*n)) * b.norm_sqr())
        .sum()
}

/// `(1/2) int (Pi^2 + |grad Y|^2) d^3x` from the position-space fields
///
/// `Y(x) = sum_k (b_k e^{ik.x} + c.c.) / sqrt(2 omega V)` and
/// `Pi(x) = sum_k -i sqrt(omega/2V) (b_k e^{ik.x} - c.c.)`,
/// integrated by the grid sum.
pub fn field_energy(lattice: &BoxLattice, sample: &FieldSample) -> f64 {
    let vol = lattice.volume();
    let nodes = lattice.nodes();
    let cell = vol / nodes.len() as f64;
    let modes: Vec<([f64; 3], f64, Complex64)> = sample
        .modes
        .iter()
        .map(|(n, b)| {
            let k = lattice.wave_vector(*n);
            (k, norm3(k), *b)
        })
        .collect();
    let density = exec::map_slice(&nodes, |&x| {
        let mut pi = 0.0;
        let mut grad = [0.0; 3];
        for &(k, w, b) in &modes {
            let e = b * Complex64::from_polar(1.0, dot(k, x));
            // b e + conj = 2 Re, b e - conj = 2i Im
            let amp_y = 1.0 / (2.0 * w * vol).sqrt();
            // d/dx of 2 Re(b e^{ikx}) = -2 k Im(b e^{ikx})
            for d in 0..3 {
                grad[d] += -2.0 * k[d] * e.im * amp_y;
            }
            pi += 2.0 * e.im * (w / (2.0 * vol)).sqrt();
        }
        0.5 * (pi * pi + grad.iter().map(|g| g * g).sum::<f64>())
    });
    density.iter().sum::<f64>() * cell
}

/// Largest relative mismatch between [`mode_energy`] and [`field_energy`]
/// over `samples`. A zero field counts as a perfect match.
pub fn bath_hamiltonian_identity(spec: &CouplingSpec, lattice: &BoxLattice, samples: &[FieldSample]) -> Result<f64> {
    spec.validate()?;
    for s in samples {
        check_sample(spec, lattice, s)?;
    }
    let defects = exec::map_slice(samples, |s| {
        let lhs = mode_energy(lattice, s);
        let rhs = field_energy(lattice, s);
        if lhs == 0.0 && rhs == 0.0 {
            0.0
        } else {
            (lhs - rhs).abs() / lhs.abs().max(rhs.abs())
        }
    });
    Ok(defects.into_iter().fold(0.0, f64::max))
}

/// `max |(1/M^3) sum_x e^{i (k - k').x} - delta_{kk'}|` over pairs drawn from `modes`.
pub fn transform_orthonormality_defect(lattice: &BoxLattice, modes: &[[i32; 3]]) -> f64 {
    let nodes = lattice.nodes();
    let inv = 1.0 / nodes.len() as f64;
    let pairs: Vec<(usize, usize)> = (0..modes.len())
        .flat_map(|a| (0..modes.len()).map(move |b| (a, b)))
        .collect();
    exec::map_slice(&pairs, |&(a, b)| {
        let ka = lattice.wave_vector(modes[a]);
        let kb = lattice.wave_vector(modes[b]);
        let dk = [ka[0] - kb[0], ka[1] - kb[1], ka[2] - kb[2]];
        let s: Complex64 = nodes.iter().map(|&x| Complex64::from_polar(inv, dot(dk, x))).sum();
        let want = if a == b { 1.0 } else { 0.0 };
        (s - want).norm()
    })
    .into_iter()
    .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CouplingTable;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn radii() -> Vec<f64> {
        (0..40).map(|i| i as f64 * 0.25).collect()
    }

    #[test]
    fn zero_coupling_has_no_source() {
        let s = source_shapes(&CouplingSpec::zero(10.0), &radii()).unwrap();
        assert!(s.p.iter().chain(&s.q).all(|&v| v == 0.0));
        let mut open = CouplingSpec::zero(10.0);
        open.cutoff = None;
        assert_eq!(source_shapes(&open, &[0.0]), Err(Error::CutoffRequired));
    }

    #[test]
    fn ohmic_profile_at_origin() {
        // integrand is linear in omega: P(0) = Lambda^2 sqrt(beta/L) / (4 pi^{3/2})
        let spec = CouplingSpec::paper_ohmic(0.1, 1.0, 10.0);
        let s = source_shapes(&spec, &radii()).unwrap();
        assert_relative_eq!(s.p[0], 1.419_760_860_875_861_8, max_relative = 1e-10);
        assert!(s.q.iter().all(|&q| q == 0.0));
        // away from the origin: (sqrt(beta/L)/(4 pi^{3/2})) * 2 (1 - cos(Lambda r)) / r^2
        let c = 0.1f64.sqrt() / (4.0 * PI.powf(1.5));
        for (r, p) in s.r.iter().zip(&s.p).skip(1) {
            let exact = c * 2.0 * (1.0 - (10.0 * r).cos()) / (r * r);
            assert!((p - exact).abs() < 1e-9 * (1.0 + exact.abs()), "r = {r}");
        }
    }

    #[test]
    fn complex_coupling_gives_q() {
        let table = CouplingTable::new(vec![0.5, 5.0], vec![1e-3, 1e-3], Some(vec![0.7, 0.7])).unwrap();
        let spec = CouplingSpec::tabulated(table, Some(5.0));
        let s = source_shapes(&spec, &[0.0, 1.0]).unwrap();
        assert!(s.q[0] > 0.0);
        assert!(s.q[1].abs() > 0.0);
    }

    #[test]
    fn profile_tail_falls_off() {
        let spec = CouplingSpec::power_law(1e-3, -2.0, 8.0);
        let r: Vec<f64> = (1..=200).map(|i| 10.0 + i as f64 * 0.45).collect();
        let s = source_shapes(&spec, &r).unwrap();
        let block = |lo: usize, hi: usize| (lo..hi).map(|i| (s.p[i] * s.r[i]).abs()).fold(0.0, f64::max);
        let early = block(0, 100);
        let late = block(100, 200);
        assert!(late < early, "{late} vs {early}");
    }

    #[test]
    fn identity_for_zero_and_plane_wave() {
        let spec = CouplingSpec::zero(10.0);
        let lat = BoxLattice::new(2.0 * PI, 8).unwrap();
        let zero = FieldSample { modes: vec![] };
        assert_eq!(bath_hamiltonian_identity(&spec, &lat, &[zero]).unwrap(), 0.0);
        let wave = FieldSample {
            modes: vec![([1, 2, 0], Complex64::new(0.3, -0.4))],
        };
        let w = 5f64.sqrt();
        assert_relative_eq!(mode_energy(&lat, &wave), w * 0.25, max_relative = 1e-15);
        assert!(bath_hamiltonian_identity(&spec, &lat, &[wave]).unwrap() < 1e-10);
    }

    #[test]
    fn identity_rejects_unresolved_modes() {
        let spec = CouplingSpec::zero(3.0);
        let lat = BoxLattice::new(2.0 * PI, 8).unwrap();
        let fast = FieldSample {
            modes: vec![([3, 0, 0], Complex64::new(1.0, 0.0))],
        };
        assert!(bath_hamiltonian_identity(&spec, &lat, &[fast]).is_err());
    }

    #[test]
    fn transform_pair_is_orthonormal() {
        let lat = BoxLattice::new(3.0, 8).unwrap();
        let modes = [[1, 0, 0], [0, 1, 0], [1, 1, 1], [-2, 1, 3], [3, -3, 0]];
        assert!(transform_orthonormality_defect(&lat, &modes) < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn random_band_limited_samples(amps in proptest::collection::vec((-3i32..=3, -3i32..=3, -3i32..=3, -1.0f64..1.0, -1.0f64..1.0), 1..12)) {
            let spec = CouplingSpec::zero(6.0);
            let lat = BoxLattice::new(2.0 * PI, 8).unwrap();
            let mut modes: Vec<([i32; 3], Complex64)> = Vec::new();
            for (a, b, c, re, im) in amps {
                let n = [a, b, c];
                let w = ((a * a + b * b + c * c) as f64).sqrt();
                if n == [0, 0, 0] || w >= 6.0 || modes.iter().any(|(m, _)| *m == n) {
                    continue;
                }
                modes.push((n, Complex64::new(re, im)));
            }
            let d = bath_hamiltonian_identity(&spec, &lat, &[FieldSample { modes }]).unwrap();
            prop_assert!(d < 1e-8, "{}", d);
        }
    }
}
