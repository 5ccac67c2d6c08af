//! Adaptive Gauss-Kronrod quadrature and fixed Gauss-Legendre rules.
//!
//! Oscillatory integrands are handled by seeding the adaptive scheme with
//! panels no wider than a quarter period, so the 15-point rule never sees
//! more than one oscillation before refinement starts.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

// 15-point Kronrod abscissae and weights, with the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Seed panels are at most this wide.
    pub max_panel: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-10,
            max_panel: f64::INFINITY,
            max_subdivisions: 200_000,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    /// Limits seed panels to a quarter period of `cos(omega t)`-type oscillation.
    pub fn oscillation_bounded(mut self, t: f64) -> Self {
        if t.abs() > 0.0 {
            self.max_panel = self.max_panel.min(PI / (4.0 * t.abs()));
        }
        self
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// One 15-point Kronrod panel with its embedded Gauss error estimate.
pub fn gk15<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_k = f_center * WGK[7];
    let mut res_g = f_center * WG[3];
    let mut res_abs = f_center.magnitude() * WGK[7];
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k = res_k + (f1 + f2) * WGK[j];
        res_abs += WGK[j] * (f1.magnitude() + f2.magnitude());
        if j % 2 == 1 {
            res_g = res_g + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).magnitude();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).magnitude() + (fv2[j] - mean).magnitude());
    }
    let abs_half = half.abs();
    let err = ((res_k - res_g) * half).magnitude();
    let error = rescale_error(err, res_abs * abs_half, res_asc * abs_half);
    (res_k * half, error)
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration of `f` over `[a, b]`.
///
/// The interval is first cut into equal seed panels no wider than
/// `opts.max_panel`; the panel with the largest error estimate is then
/// bisected until the summed error meets the tolerance.
pub fn integrate<T, F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> QuadResult<T>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if a == b {
        return QuadResult {
            value: T::zero(),
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    let width = (b - a).abs();
    let seeds = if opts.max_panel.is_finite() {
        ((width / opts.max_panel).ceil() as usize).max(1)
    } else {
        1
    };
    let h = (b - a) / seeds as f64;
    let mut heap = BinaryHeap::with_capacity(seeds * 2);
    let mut evaluations = 0;
    for i in 0..seeds {
        let lo = a + h * i as f64;
        let hi = if i + 1 == seeds { b } else { lo + h };
        let (value, error) = gk15(&f, lo, hi);
        evaluations += 15;
        heap.push(Panel {
            a: lo,
            b: hi,
            value,
            error,
        });
    }

    let totals = |heap: &BinaryHeap<Panel<T>>| {
        // Summed in interval order for reproducibility.
        let mut panels: Vec<&Panel<T>> = heap.iter().collect();
        panels.sort_by(|p, q| p.a.total_cmp(&q.a));
        panels.iter().fold((T::zero(), 0.0), |(v, e), p| (v + p.value, e + p.error))
    };

    let (mut value, mut error) = totals(&heap);
    let mut splits = 0;
    let mut since_resum = 0;
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * value.magnitude());
        if error <= tol {
            let (v, e) = totals(&heap);
            value = v;
            error = e;
            if error <= opts.abs_tol.max(opts.rel_tol * value.magnitude()) {
                return QuadResult {
                    value,
                    error,
                    evaluations,
                    converged: true,
                };
            }
        }
        if splits >= opts.max_subdivisions {
            let (value, error) = totals(&heap);
            return QuadResult {
                value,
                error,
                evaluations,
                converged: false,
            };
        }
        let worst = heap.pop().expect("non-empty panel set");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // Interval exhausted at machine resolution.
            heap.push(worst);
            let (value, error) = totals(&heap);
            return QuadResult {
                value,
                error,
                evaluations,
                converged: false,
            };
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        evaluations += 30;
        value = value - worst.value + v1 + v2;
        error = error - worst.error + e1 + e2;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        splits += 1;
        since_resum += 1;
        if since_resum >= 64 {
            // Running sums drift; refresh them periodically.
            let (v, e) = totals(&heap);
            value = v;
            error = e;
            since_resum = 0;
        }
    }
}

/// Integrates `f` over `[a, inf)` through the map `x = center + scale * tan(theta)`.
///
/// Choosing `center` at a Lorentzian peak and `scale` near its half-width
/// turns the peak into a nearly flat integrand in `theta`.
pub fn integrate_tangent<T, F>(f: F, a: f64, center: f64, scale: f64, opts: &QuadOptions) -> QuadResult<T>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let theta_lo = ((a - center) / scale).atan();
    let theta_hi = PI / 2.0;
    let g = |theta: f64| {
        if theta >= theta_hi {
            return T::zero();
        }
        let c = theta.cos();
        let x = center + scale * theta.tan();
        f(x) * (scale / (c * c))
    };
    // Seed a few panels so the peak region is never skipped.
    let opts = QuadOptions {
        max_panel: opts.max_panel.min((theta_hi - theta_lo) / 16.0),
        ..*opts
    };
    integrate(g, theta_lo, theta_hi, &opts)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `sin(x)/x` with a series branch near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}
