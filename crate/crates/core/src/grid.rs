//! Uniform time grids and composite Gauss-Legendre frequency grids.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::quad::gauss_legendre;

/// Uniform grid `t_i = i * dt`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, len: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("grid.dt", format!("time step must be > 0, got {dt}")));
        }
        if len == 0 {
            return Err(invalid("grid.len", "time grid needs at least one point"));
        }
        Ok(Self { dt, len })
    }

    /// `points` samples from 0 to `t_end` inclusive.
    pub fn spanning(t_end: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(invalid("grid.points", "need at least two points to span an interval"));
        }
        Self::new(t_end / (points - 1) as f64, points)
    }

    pub fn at(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.at(self.len - 1)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.at(i)).collect()
    }

    /// Index of the grid point nearest to `t`, if `t` lies on the grid span.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        if t < -0.5 * self.dt || t > self.t_end() + 0.5 * self.dt {
            return None;
        }
        Some(((t / self.dt).round() as usize).min(self.len - 1))
    }
}

/// Quadrature nodes and weights on `(0, cutoff]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Panel layout for [`OmegaGrid::refined`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaGridSpec {
    pub cutoff: f64,
    /// Widest panel allowed away from the resonance.
    pub base_panel: f64,
    /// Resonance centre and Lorentzian half-width; `None` for a plain grid.
    pub resonance: Option<(f64, f64)>,
    /// Gauss-Legendre order per panel.
    pub order: usize,
}

impl OmegaGridSpec {
    /// Panels fine enough to resolve `e^{-i omega t}` up to `t_max` and a
    /// resonance of half-width `half_width` at `center`.
    pub fn for_dynamics(cutoff: f64, t_max: f64, center: f64, half_width: f64) -> Self {
        let osc = PI / (2.0 * t_max.max(1.0));
        Self {
            cutoff,
            base_panel: osc.min(cutoff / 64.0),
            resonance: (half_width > 0.0).then_some((center, half_width)),
            order: 8,
        }
    }

    /// Halves every panel width.
    pub fn refined(mut self) -> Self {
        self.base_panel *= 0.5;
        self
    }
}

impl OmegaGrid {
    /// Equal panels over `(0, cutoff]`.
    pub fn uniform(cutoff: f64, panels: usize, order: usize) -> Result<Self> {
        if !(cutoff > 0.0) || panels == 0 {
            return Err(invalid("grid.omega", "need a positive cutoff and at least one panel"));
        }
        let edges: Vec<f64> = (0..=panels).map(|i| cutoff * i as f64 / panels as f64).collect();
        Ok(Self::from_edges(&edges, order))
    }

    /// Composite grid with geometric grading towards `omega = 0` and panels of
    /// one tenth of the half-width across +-40 half-widths of the resonance.
    pub fn refined(spec: &OmegaGridSpec) -> Result<Self> {
        let OmegaGridSpec {
            cutoff,
            base_panel,
            resonance,
            order,
        } = *spec;
        if !(cutoff > 0.0 && base_panel > 0.0) {
            return Err(invalid("grid.omega", "cutoff and panel width must be positive"));
        }
        let base = base_panel.min(cutoff);
        let mut edges = vec![0.0];
        // Geometric panels below the first base panel handle integrable
        // infrared singularities of the coupling.
        let mut lo = base * 0.5f64.powi(24);
        edges.push(lo);
        while lo * 2.0 < base {
            lo *= 2.0;
            edges.push(lo);
        }
        let (fine_lo, fine_hi, fine_h) = match resonance {
            Some((c, hw)) => {
                let h = (hw / 10.0).min(base);
                ((c - 40.0 * hw).max(base), (c + 40.0 * hw).min(cutoff), h)
            }
            None => (cutoff, cutoff, base),
        };
        let push_run = |edges: &mut Vec<f64>, to: f64, h: f64| {
            let from = *edges.last().unwrap();
            if to <= from {
                return;
            }
            let n = ((to - from) / h).ceil().max(1.0) as usize;
            for i in 1..=n {
                edges.push(from + (to - from) * i as f64 / n as f64);
            }
        };
        push_run(&mut edges, base, base);
        if fine_lo < fine_hi {
            push_run(&mut edges, fine_lo, base);
            push_run(&mut edges, fine_hi, fine_h);
        }
        push_run(&mut edges, cutoff, base);
        Ok(Self::from_edges(&edges, order))
    }

    fn from_edges(edges: &[f64], order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity((edges.len() - 1) * order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + half * xi);
                weights.push(half * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest gap between neighbouring nodes within `[lo, hi]`.
    pub fn max_spacing_in(&self, lo: f64, hi: f64) -> f64 {
        self.nodes
            .windows(2)
            .filter(|w| w[1] >= lo && w[0] <= hi)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// `sum_j w_j g(omega_j)`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn time_grid_basics() {
        let g = TimeGrid::spanning(2.0, 5).unwrap();
        assert_eq!(g.points(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.index_of(1.49), Some(3));
        assert_eq!(g.index_of(3.0), None);
        assert!(TimeGrid::new(0.0, 3).is_err());
    }

    #[test]
    fn refined_grid_integrates_lorentzian_and_ir_singularity() {
        let (c, hw) = (3.0, 0.01);
        let g = OmegaGrid::refined(&OmegaGridSpec {
            cutoff: 50.0,
            base_panel: 0.2,
            resonance: Some((c, hw)),
            order: 8,
        })
        .unwrap();
        let lor = g.integrate(|x| (hw / PI) / ((x - c).powi(2) + hw * hw));
        let exact = ((50.0 - c) / hw).atan() / PI + (c / hw).atan() / PI;
        assert_relative_eq!(lor, exact, max_relative = 1e-6);
        // 1/sqrt(x) is integrable at zero
        assert_relative_eq!(g.integrate(|x| x.powf(-0.5)), 2.0 * 50f64.sqrt(), max_relative = 1e-5);
        assert!(g.max_spacing_in(c - hw, c + hw) <= hw);
    }
}
