//! Brute-force oracle: one string mode coupled to a finite set of bath modes.
//!
//! The continuum `int d^3k` is replaced by `N_b` radial cells. Cell `j` holds
//! one oscillator `b_j = (X_j + i P_j)/sqrt(2)` with frequency `omega_j` and
//! coupling `g_j^2 = 4 pi omega_j^2 |f(omega_j)|^2 d omega_j`, so that
//! `R = sum_j sqrt(2) g_j X_j`. The Heisenberg equations
//!
//! ```text
//! A'   = (B - R)/lambda
//! B'   = -lambda omega_n^2 A
//! X_j' = omega_j P_j
//! P_j' = -omega_j X_j + sqrt(2) g_j (L/2) A'
//! ```
//!
//! are linear with a constant real matrix. Only two objects are propagated:
//! the column of `a_n(0)` coefficients, which fixes every normal-ordered
//! expectation in a one-phonon state, and optionally the `A` and `B` rows of the
//! propagator, which give the equal-time commutator. The coupling term is
//! rank one, so a step costs `O(N_b)`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::grid::TimeGrid;
use crate::model::{CouplingSpec, StringParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Placement of the bath frequencies.
#[derive(Debug, Clone, PartialEq)]
pub enum GridPolicy {
    /// `n_modes` equal cells over `(0, cutoff]`, nodes at cell midpoints.
    Uniform,
    /// Half of the cells go to windows `[c - half_width, c + half_width]`
    /// around each centre, the rest spread evenly over the remainder.
    ResonanceRefined { centers: Vec<f64>, half_width: f64 },
}

/// Discretized bath for one string mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBath {
    pub omega: Vec<f64>,
    pub g: Vec<f64>,
    /// Cell widths.
    pub width: Vec<f64>,
    pub cutoff: f64,
}

impl DiscreteBath {
    pub fn n_modes(&self) -> usize {
        self.omega.len()
    }

    /// `sum_j g_j^2 omega_j^k`, the discrete counterpart of
    /// `int 4 pi omega^{2+k} |f|^2 d omega`.
    pub fn moment(&self, k: i32) -> f64 {
        self.g.iter().zip(&self.omega).map(|(g, w)| g * g * w.powi(k)).sum()
    }

    /// Poincare recurrence estimate `2 pi / d omega` for the cell nearest `omega`.
    pub fn recurrence_time(&self, omega: f64) -> f64 {
        let j = self
            .omega
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - omega).abs().total_cmp(&(b.1 - omega).abs()))
            .map(|(j, _)| j)
            .unwrap_or(0);
        2.0 * PI / self.width[j]
    }
}

fn uniform_edges(lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    (0..=cells).map(|i| lo + (hi - lo) * i as f64 / cells as f64).collect()
}

fn refined_edges(cutoff: f64, n_modes: usize, centers: &[f64], half_width: f64) -> Result<Vec<f64>> {
    if !(half_width > 0.0) {
        return Err(invalid("bath.half_width", "refinement half-width must be > 0"));
    }
    // Merge the windows into disjoint intervals inside (0, cutoff].
    let mut windows: Vec<(f64, f64)> = centers
        .iter()
        .map(|&c| ((c - half_width).max(0.0), (c + half_width).min(cutoff)))
        .filter(|(a, b)| b > a)
        .collect();
    windows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for w in windows {
        match merged.last_mut() {
            Some(last) if w.0 <= last.1 => last.1 = last.1.max(w.1),
            _ => merged.push(w),
        }
    }
    let fine_len: f64 = merged.iter().map(|(a, b)| b - a).sum();
    let coarse_len = cutoff - fine_len;
    let n_fine = if coarse_len > 0.0 { n_modes / 2 } else { n_modes };
    let n_coarse = n_modes - n_fine;
    // Segments alternate coarse/fine; each gets cells in proportion to its length.
    let mut segments = Vec::new();
    let mut at = 0.0;
    for &(a, b) in &merged {
        if a > at {
            segments.push((at, a, false));
        }
        segments.push((a, b, true));
        at = b;
    }
    if at < cutoff {
        segments.push((at, cutoff, false));
    }
    let mut edges = vec![0.0];
    for (a, b, fine) in segments {
        let (pool, len) = if fine { (n_fine, fine_len) } else { (n_coarse, coarse_len) };
        let cells = ((pool as f64) * (b - a) / len).round().max(1.0) as usize;
        edges.extend(uniform_edges(a, b, cells).into_iter().skip(1));
    }
    Ok(edges)
}

/// Replaces the continuum by `n_modes` cells under `policy`.
pub fn discretize_bath(spec: &CouplingSpec, n_modes: usize, policy: &GridPolicy) -> Result<DiscreteBath> {
    spec.validate()?;
    if n_modes < 2 {
        return Err(invalid("bath.n_modes", "need at least two bath modes"));
    }
    let cutoff = spec.cutoff.ok_or(Error::CutoffRequired)?;
    let edges = match policy {
        GridPolicy::Uniform => uniform_edges(0.0, cutoff, n_modes),
        GridPolicy::ResonanceRefined { centers, half_width } => refined_edges(cutoff, n_modes, centers, *half_width)?,
    };
    let mut omega = Vec::with_capacity(edges.len() - 1);
    let mut width = Vec::with_capacity(edges.len() - 1);
    let mut g = Vec::with_capacity(edges.len() - 1);
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let w = 0.5 * (a + b);
        omega.push(w);
        width.push(b - a);
        g.push((4.0 * PI * w * w * spec.f_sq(w) * (b - a)).sqrt());
    }
    Ok(DiscreteBath { omega, g, width, cutoff })
}

/// Integrator settings for [`evolve_coefficients`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Largest RK4 step; the actual step divides the output spacing evenly.
    pub step: f64,
    /// Also propagate the propagator rows needed for the commutator.
    pub track_ccr: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            track_ccr: true,
        }
    }
}

/// Result of one oracle integration for a single phonon in mode `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub mode: usize,
    pub omega_n: f64,
    pub grid: TimeGrid,
    pub step: f64,
    pub recurrence_time: f64,
    /// `<: a_n^dag a_n :>`.
    pub number: Vec<f64>,
    /// `omega_n <: a_n^dag a_n :>`.
    pub string_energy: Vec<f64>,
    /// `sum_j omega_j <: b_j^dag b_j :>`.
    pub reservoir_energy: Vec<f64>,
    /// `<: H :>` of the full discrete system.
    pub total_energy: Vec<f64>,
    /// `<: A_n^2 :>`.
    pub a_squared: Vec<f64>,
    /// `|[A_n, B_n] - 2i/L|`, when tracked.
    pub ccr_defect: Option<Vec<f64>>,
    /// Coefficients of `a_n(0)` in `(A_n, B_n)` at each output time.
    pub string_column: Vec<[Complex64; 2]>,
    /// Coefficients of `a_n(0)` in `(A, B, X_1.., P_1..)` at the final time.
    pub final_column: Vec<Complex64>,
}

impl OracleRun {
    /// A fit window that skips the initial slip and ends before the recurrence.
    pub fn suggested_window(&self, params: &StringParams) -> (f64, f64) {
        let period = PI / self.omega_n;
        let slip = if params.beta > 0.0 { 0.1 * params.lambda / params.beta } else { 0.0 };
        let start = slip.max(period);
        let end = self.grid.t_end().min(0.9 * self.recurrence_time) - period;
        (start, end)
    }
}

struct System<'a> {
    lambda: f64,
    length: f64,
    omega_sq: f64,
    bath: &'a DiscreteBath,
}

impl System<'_> {
    /// `out = M z`. Layout: `[A, B, X_1..X_N, P_1..P_N]`.
    fn column(&self, z: &[Complex64], out: &mut [Complex64]) {
        let n = self.bath.n_modes();
        let (xs, ps) = z[2..].split_at(n);
        let r: Complex64 = self.bath.g.iter().zip(xs).map(|(g, x)| x * (SQRT_2 * g)).sum();
        let a_dot = (z[1] - r) / self.lambda;
        out[0] = a_dot;
        out[1] = z[0] * (-self.lambda * self.omega_sq);
        let drive = a_dot * (SQRT_2 * self.length / 2.0);
        let (ox, op) = out[2..].split_at_mut(n);
        for j in 0..n {
            let w = self.bath.omega[j];
            ox[j] = ps[j] * w;
            op[j] = -xs[j] * w + drive * self.bath.g[j];
        }
    }

    /// `out = r M` for a real row vector.
    fn row(&self, r: &[f64], out: &mut [f64]) {
        let n = self.bath.n_modes();
        let (rx, rp) = r[2..].split_at(n);
        let gp: f64 = self.bath.g.iter().zip(rp).map(|(g, p)| g * p).sum();
        out[0] = -self.lambda * self.omega_sq * r[1];
        out[1] = r[0] / self.lambda + SQRT_2 * self.length / (2.0 * self.lambda) * gp;
        let (ox, op) = out[2..].split_at_mut(n);
        for j in 0..n {
            let g = self.bath.g[j];
            let w = self.bath.omega[j];
            ox[j] = -r[0] * SQRT_2 * g / self.lambda - rp[j] * w - gp * g * self.length / self.lambda;
            op[j] = rx[j] * w;
        }
    }
}

/// Classic RK4 step for `y' = F(y)` on a flat vector.
fn rk4<T, F>(y: &mut [T], h: f64, scratch: &mut [Vec<T>; 5], f: F)
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(&[T], &mut [T]),
{
    let [k1, k2, k3, k4, tmp] = scratch;
    f(y, k1);
    for i in 0..y.len() {
        tmp[i] = y[i] + k1[i] * (0.5 * h);
    }
    f(tmp, k2);
    for i in 0..y.len() {
        tmp[i] = y[i] + k2[i] * (0.5 * h);
    }
    f(tmp, k3);
    for i in 0..y.len() {
        tmp[i] = y[i] + k3[i] * h;
    }
    f(tmp, k4);
    for i in 0..y.len() {
        y[i] = y[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
    }
}

fn scratch<T: Clone>(len: usize, zero: T) -> [Vec<T>; 5] {
    std::array::from_fn(|_| vec![zero.clone(); len])
}

/// Integrates the coefficient equations for a single phonon in mode `n`.
pub fn evolve_coefficients(
    params: &StringParams,
    bath: &DiscreteBath,
    n: usize,
    grid: &TimeGrid,
    opts: &OracleOptions,
) -> Result<OracleRun> {
    params.validate()?;
    if n == 0 {
        return Err(invalid("mode", "mode indices start at 1"));
    }
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(invalid("oracle.step", "integrator step must be > 0"));
    }
    let omega_n = params.omega(n);
    let omega_max = bath.omega.iter().cloned().fold(omega_n.max(bath.cutoff), f64::max);
    if omega_max * opts.step >= 0.5 {
        return Err(Error::StepTooLarge {
            step: opts.step,
            omega_max,
            product: omega_max * opts.step,
        });
    }
    let substeps = ((grid.dt / opts.step).ceil() as usize).max(1);
    let h = grid.dt / substeps as f64;
    let nb = bath.n_modes();
    let dim = 2 + 2 * nb;
    let sys = System {
        lambda: params.lambda,
        length: params.length,
        omega_sq: omega_n * omega_n,
        bath,
    };

    let zero = Complex64::new(0.0, 0.0);
    let mut z = vec![zero; dim];
    let scale = (params.length * params.lambda * omega_n).sqrt();
    z[0] = Complex64::new(1.0 / scale, 0.0);
    z[1] = -I * (params.lambda * omega_n / params.length).sqrt();
    let mut zs = scratch(dim, zero);

    let mut rows = opts.track_ccr.then(|| {
        let mut ra = vec![0.0; dim];
        let mut rb = vec![0.0; dim];
        ra[0] = 1.0;
        rb[1] = 1.0;
        (ra, rb, scratch(dim, 0.0), scratch(dim, 0.0))
    });

    let mut run = OracleRun {
        mode: n,
        omega_n,
        grid: *grid,
        step: h,
        recurrence_time: bath.recurrence_time(omega_n),
        number: Vec::with_capacity(grid.len),
        string_energy: Vec::with_capacity(grid.len),
        reservoir_energy: Vec::with_capacity(grid.len),
        total_energy: Vec::with_capacity(grid.len),
        a_squared: Vec::with_capacity(grid.len),
        ccr_defect: opts.track_ccr.then(|| Vec::with_capacity(grid.len)),
        string_column: Vec::with_capacity(grid.len),
        final_column: Vec::new(),
    };

    for i in 0..grid.len {
        if i > 0 {
            for _ in 0..substeps {
                rk4(&mut z, h, &mut zs, |y, out| sys.column(y, out));
                if let Some((ra, rb, sa, sb)) = rows.as_mut() {
                    rk4(ra, h, sa, |y, out| sys.row(y, out));
                    rk4(rb, h, sb, |y, out| sys.row(y, out));
                }
            }
        }
        record(&mut run, &sys, &z, params);
        if let (Some((ra, rb, _, _)), Some(defects)) = (rows.as_ref(), run.ccr_defect.as_mut()) {
            defects.push(ccr_from_rows(ra, rb, nb, params.length));
        }
    }
    run.final_column = z;
    Ok(run)
}

fn record(run: &mut OracleRun, sys: &System<'_>, z: &[Complex64], params: &StringParams) {
    let (lambda, length, omega) = (params.lambda, params.length, run.omega_n);
    let nb = sys.bath.n_modes();
    let scale = (length * lambda * omega).sqrt();
    let k = (length / (lambda * omega)).sqrt();
    let (za, zb) = (z[0], z[1]);
    let u = (za * scale + I * k * zb) * 0.5;
    let v = (za.conj() * scale + I * k * zb.conj()) * 0.5;
    let number = u.norm_sqr() + v.norm_sqr();

    let (xs, ps) = z[2..].split_at(nb);
    let mut bath_energy = 0.0;
    let mut bath_quad = 0.0;
    let mut r = Complex64::new(0.0, 0.0);
    for j in 0..nb {
        let w = sys.bath.omega[j];
        let (x, p) = (xs[j], ps[j]);
        // b_j coefficients of a(0) and a(0)^dag
        let bu = (x + I * p) / SQRT_2;
        let bv = (x.conj() + I * p.conj()) / SQRT_2;
        bath_energy += w * (bu.norm_sqr() + bv.norm_sqr());
        bath_quad += w * (x.norm_sqr() + p.norm_sqr()) / 2.0;
        r += x * (SQRT_2 * sys.bath.g[j]);
    }
    // <:y_k y_l:> = 2 Re(z_k z_l^*) for one phonon
    let total = 2.0
        * ((length / (4.0 * lambda)) * (zb - r).norm_sqr()
            + length * lambda * omega * omega / 4.0 * za.norm_sqr()
            + bath_quad);
    run.number.push(number);
    run.string_energy.push(omega * number);
    run.reservoir_energy.push(bath_energy);
    run.total_energy.push(total);
    run.a_squared.push(2.0 * za.norm_sqr());
    run.string_column.push([za, zb]);
}

/// `[A, B] = sum_{kl} Phi_Ak Phi_Bl [y_k, y_l]` with `[A, B] = 2i/L` and `[X_j, P_j] = i`.
fn ccr_from_rows(ra: &[f64], rb: &[f64], nb: usize, length: f64) -> f64 {
    let mut im = (2.0 / length) * (ra[0] * rb[1] - ra[1] * rb[0]);
    for j in 0..nb {
        let (x, p) = (2 + j, 2 + nb + j);
        im += ra[x] * rb[p] - ra[p] * rb[x];
    }
    (im - 2.0 / length).abs()
}

/// Fitted exponential decay rate of the phonon number over `window`.
///
/// The number oscillates at `2 Omega_n` on top of the decay; each sample is
/// replaced by its average over one oscillation period (trapezoid rule with
/// interpolated ends) before a least-squares fit of the logarithm.
pub fn fit_decay_rate(run: &OracleRun, window: (f64, f64)) -> Result<f64> {
    fit_series_decay(&run.grid, &run.number, run.omega_n, run.recurrence_time, window)
}

pub(crate) fn fit_series_decay(
    grid: &TimeGrid,
    series: &[f64],
    omega: f64,
    recurrence: f64,
    window: (f64, f64),
) -> Result<f64> {
    let (start, end) = window;
    let t_end = grid.t_end();
    if !(start >= 0.0 && end > start && end <= t_end * (1.0 + 1e-12)) {
        return Err(Error::WindowOutsideRun { start, end, t_end });
    }
    if end > recurrence {
        return Err(Error::RecurrenceContamination { end, recurrence });
    }
    let period = PI / omega;
    let half = 0.5 * period;
    let value_at = |t: f64| {
        let x = t / grid.dt;
        let i = (x.floor() as usize).min(grid.len - 2);
        let s = x - i as f64;
        series[i] * (1.0 - s) + series[i + 1] * s
    };
    let boxcar = |tc: f64| {
        let (a, b) = (tc - half, tc + half);
        let first = (a / grid.dt).ceil() as usize;
        let last = ((b / grid.dt).floor() as usize).min(grid.len - 1);
        let mut acc = 0.0;
        let mut prev = (a, value_at(a));
        for i in first..=last {
            let cur = (grid.at(i), series[i]);
            acc += 0.5 * (prev.1 + cur.1) * (cur.0 - prev.0);
            prev = cur;
        }
        acc += 0.5 * (prev.1 + value_at(b)) * (b - prev.0);
        acc / period
    };
    let lo = start + half;
    let hi = end - half;
    if hi <= lo || grid.len < 2 {
        return Err(invalid("window", "window must span more than one oscillation period"));
    }
    let first = (lo / grid.dt).ceil() as usize;
    let last = (hi / grid.dt).floor() as usize;
    let centers: Vec<f64> = (first..=last).map(|i| grid.at(i)).collect();
    if centers.len() < 2 {
        return Err(invalid("window", "too few samples inside the fit window"));
    }
    let logs: Vec<f64> = exec::map_slice(&centers, |&tc| boxcar(tc))
        .into_iter()
        .map(|m| if m > 0.0 { Ok(m.ln()) } else { Err(invalid("number", "non-positive averaged number")) })
        .collect::<Result<_>>()?;
    let nf = centers.len() as f64;
    let tm = centers.iter().sum::<f64>() / nf;
    let ym = logs.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, y) in centers.iter().zip(&logs) {
        sxy += (t - tm) * (y - ym);
        sxx += (t - tm) * (t - tm);
    }
    Ok(-sxy / sxx)
}

/// Runs several independent oracle configurations, in parallel when enabled.
pub fn evolve_many(
    params: &StringParams,
    baths: &[DiscreteBath],
    n: usize,
    grid: &TimeGrid,
    opts: &OracleOptions,
) -> Vec<Result<OracleRun>> {
    exec::map_slice(baths, |b| evolve_coefficients(params, b, n, grid, opts))
}
