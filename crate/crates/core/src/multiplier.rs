//! Even functions with tracked Fourier support and the explicit multiplier families: band-limited
//! functions of sqrt L, the Gaussian truncation family, the Phi family and the Riesz tail family.
//!
//! Transforms use f^(l) = int f(x) e^{-i l x} dx, so f = (1/2 pi) int f^(l) e^{i l x} dl.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::bundle::{SpectralDecomposition, C64};
use crate::error::{Error, Result};
use crate::quadrature::{bump, SmoothStep};
use crate::report::{CheckReport, Table};
use crate::space::MetricMeasureSpace;
use crate::wave_heat::{eps_support_radius, wave_kernel};

/// Even function sampled at x_k = k dx for k = 0..=N; value(-x) = value(x) by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledEvenFunction {
    pub dx: f64,
    pub values: Vec<C64>,
    pub declared_ft_support: Option<f64>,
}

impl SampledEvenFunction {
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, dx: f64, window: f64, support: Option<f64>) -> Self {
        let n = (window / dx).round() as usize;
        let values = (0..=n).map(|k| C64::new(f(k as f64 * dx), 0.0)).collect();
        Self { dx, values, declared_ft_support: support }
    }

    pub fn window(&self) -> f64 {
        self.dx * (self.values.len() - 1) as f64
    }

    pub fn points(&self) -> usize {
        self.values.len()
    }

    pub fn x(&self, k: usize) -> f64 {
        k as f64 * self.dx
    }

    /// Value at grid index k for any sign of k.
    pub fn at_index(&self, k: i64) -> C64 {
        self.values[k.unsigned_abs() as usize]
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Trapezoid approximation of the integral of |f|^2 over the whole line.
    pub fn l2_norm_sq(&self) -> f64 {
        let n = self.values.len() - 1;
        let mut s = self.values[0].norm_sqr();
        for k in 1..n {
            s += 2.0 * self.values[k].norm_sqr();
        }
        if n > 0 {
            s += self.values[n].norm_sqr();
        }
        s * self.dx
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (k, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{:e},{:e}\n", self.x(k), v.re));
        }
        out
    }
}

/// Even transform by the trapezoid rule on [-T, T], evaluated on the dual grid l_j = j pi / T.
/// On these grids the rule is a type-I cosine transform, so applying it twice gives 2 pi f.
pub fn transform_even(f: &SampledEvenFunction) -> Result<SampledEvenFunction> {
    let n = f.values.len() - 1;
    if n == 0 {
        return Err(Error::Validation("need at least two samples".into()));
    }
    let peak = f.peak();
    let boundary = f.values[n].norm();
    if boundary > 1e-12 * peak {
        return Err(Error::WindowTooSmall { boundary: boundary / peak, suggested: 2.0 * f.window() });
    }
    let m = 2 * n;
    let table: Vec<f64> = (0..m).map(|k| (PI * k as f64 / n as f64).cos()).collect();
    let mut out = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let mut s = f.values[0];
        for k in 1..n {
            s += f.values[k] * (2.0 * table[(j * k) % m]);
        }
        s += f.values[n] * table[(j * n) % m];
        out.push(s * f.dx);
    }
    let dl = PI / (n as f64 * f.dx);
    Ok(SampledEvenFunction { dx: dl, values: out, declared_ft_support: None })
}

/// Sum_k w_k cos(k h y), with the rotation e^{i h y} re-anchored every 32 steps.
fn cos_sum(weights: &[f64], h: f64, y: f64) -> f64 {
    let theta = h * y;
    let step = C64::from_polar(1.0, theta);
    let mut acc = 0.0;
    let mut z = C64::new(1.0, 0.0);
    for (k, w) in weights.iter().enumerate() {
        if k % 32 == 0 {
            z = C64::from_polar(1.0, theta * k as f64);
        }
        acc += w * z.re;
        z *= step;
    }
    acc
}

/// Result of evaluating F(sqrt L) from samples of its transform.
#[derive(Clone, Debug)]
pub struct BandLimitedResult {
    pub matrix: DMatrix<C64>,
    pub eps: f64,
    /// eps-support radius of the kernel of F(sqrt L)
    pub support_radius: f64,
    /// eps-support radius of cos(r sqrt L), the propagation cone at the support radius r
    pub cone_radius: f64,
}

/// F(sqrt L) = (1/pi) int_0^r F^(t) cos(t sqrt L) dt by the trapezoid rule with endpoint
/// corrections on the sample grid of F^.
pub fn apply_band_limited(
    dec: &SpectralDecomposition,
    space: &MetricMeasureSpace,
    f_hat: &SampledEvenFunction,
    eps: f64,
) -> Result<BandLimitedResult> {
    let r = f_hat
        .declared_ft_support
        .ok_or_else(|| Error::Validation("apply_band_limited needs a declared support radius".into()))?;
    let h = f_hat.dx;
    let limit = PI / dec.spectral_radius().sqrt().max(1e-300);
    if h >= limit {
        return Err(Error::Nyquist { spacing: h, limit });
    }
    let nr = ((r / h).round() as usize).min(f_hat.values.len() - 1);
    let g: Vec<f64> = f_hat.values[..=nr].iter().map(|z| z.re).collect();
    // one-sided second-order derivatives of F^ at 0 and r
    let d0 = if nr >= 2 { (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h) } else { 0.0 };
    let dr = if nr >= 2 { (3.0 * g[nr] - 4.0 * g[nr - 1] + g[nr - 2]) / (2.0 * h) } else { 0.0 };
    let end = nr as f64 * h;
    let values: Vec<f64> = dec
        .eigenvalues()
        .iter()
        .map(|&lambda| {
            let w = lambda.sqrt();
            let mut weights = g.clone();
            weights[0] *= 0.5;
            weights[nr] *= 0.5;
            let trap = h * cos_sum(&weights, h, w);
            // Euler-Maclaurin: subtract h^2/12 (q'(r) - q'(0)) for q(t) = F^(t) cos(tw)
            let qr = dr * (end * w).cos() - w * g[nr] * (end * w).sin();
            let q0 = d0;
            (trap - h * h / 12.0 * (qr - q0)) / PI
        })
        .collect();
    let matrix = dec.apply_values(&values);
    let kernel = dec.kernel_values(&values);
    let support_radius = eps_support_radius(&kernel, space, eps);
    let cone_radius = eps_support_radius(&wave_kernel(dec, r), space, eps);
    Ok(BandLimitedResult { matrix, eps, support_radius, cone_radius })
}

/// Gaussian G(x) = (4 pi)^{-1/2} e^{-x^2/4}, whose transform is e^{-l^2}.
pub fn gaussian(x: f64) -> f64 {
    (-x * x / 4.0).exp() / (4.0 * PI).sqrt()
}

/// psi: 0 below -1, 1 above -1/2, integrated bump in between.
pub fn psi(step: &SmoothStep, x: f64) -> f64 {
    step.eval(2.0 * (x + 1.0))
}

/// Truncation family phi_s(x) = psi(s(|x| - s)), F_s = phi_s G, R_s = (1 - phi_s) G.
#[derive(Clone, Debug)]
pub struct Gl2Family {
    pub s: f64,
    pub dx: f64,
    /// F_s samples on x_k = x0 + k dx, x0 = s - 1/s, where F_s vanishes to all orders.
    pub x0: f64,
    pub f_samples: Vec<f64>,
    /// R_s samples on x_k = k dx from 0 to its support edge s - 1/(2s).
    pub r_samples: Vec<f64>,
}

/// Sampling density in points per unit length is `density * s`.
pub fn build_gl2_family(s: f64, density: f64) -> Result<Gl2Family> {
    if !(s > 1.0) {
        return Err(Error::Validation(format!("truncation parameter s = {s} must exceed 1")));
    }
    let step = SmoothStep::new();
    let dx = 1.0 / (density * s);
    let x0 = s - 1.0 / s;
    // G(X)/G(x0) below 1e-20
    let x_max = (x0 * x0 + 4.0 * 46.0).sqrt();
    let nf = ((x_max - x0) / dx).ceil() as usize;
    let f_samples = (0..=nf)
        .map(|k| {
            let x = x0 + k as f64 * dx;
            psi(&step, s * (x - s)) * gaussian(x)
        })
        .collect();
    let edge = s - 1.0 / (2.0 * s);
    let nr = (edge / dx).ceil() as usize;
    let r_samples = (0..=nr)
        .map(|k| {
            let x = k as f64 * dx;
            if x >= edge {
                0.0
            } else {
                (1.0 - psi(&step, s * (x - s))) * gaussian(x)
            }
        })
        .collect();
    Ok(Gl2Family { s, dx, x0, f_samples, r_samples })
}

impl Gl2Family {
    pub fn r_support_edge(&self) -> f64 {
        self.s - 1.0 / (2.0 * self.s)
    }

    pub fn phi_s(&self, x: f64) -> f64 {
        psi(&SmoothStep::new(), self.s * (x.abs() - self.s))
    }

    pub fn f_s(&self, x: f64) -> f64 {
        self.phi_s(x) * gaussian(x)
    }

    pub fn r_s(&self, x: f64) -> f64 {
        if x.abs() >= self.r_support_edge() {
            0.0
        } else {
            (1.0 - self.phi_s(x)) * gaussian(x)
        }
    }

    /// F^_s(l) = 2 int_{x0}^inf F_s(x) cos(l x) dx.
    pub fn ft_f(&self, l: f64) -> f64 {
        let mut weights = self.f_samples.clone();
        let last = weights.len() - 1;
        weights[last] *= 0.5;
        weights[0] *= 0.5;
        // cos(l (x0 + k dx)) = Re e^{i l x0} e^{i l k dx}
        let c = cos_sum_shift(&weights, self.dx, l, self.x0);
        2.0 * self.dx * c
    }

    /// R^_s(l) = 2 int_0^edge R_s(x) cos(l x) dx (even extension, trapezoid).
    pub fn ft_r(&self, l: f64) -> f64 {
        let mut weights = self.r_samples.clone();
        weights[0] *= 0.5;
        2.0 * self.dx * cos_sum(&weights, self.dx, l)
    }

    /// ||R_s||_1 = R^_s(0) = sup |R^_s| since R_s >= 0.
    pub fn r_hat_sup(&self) -> f64 {
        self.ft_r(0.0)
    }

    /// C'_N = sup_l |F^_s(l)| s (1 + l^2/s^2)^{N/2} e^{s^2/4} on a scan of [0, 16 s].
    pub fn osz_constant(&self, n_power: u32) -> (f64, f64) {
        let s = self.s;
        let x_max = self.x0 + self.dx * (self.f_samples.len() - 1) as f64;
        let dl = 2.0 * PI / (32.0 * x_max);
        let count = (16.0 * s / dl).ceil() as usize;
        let mut best = 0.0;
        let mut arg = 0.0;
        for k in 0..=count {
            let l = k as f64 * dl;
            let v = self.ft_f(l).abs() * s * (1.0 + l * l / (s * s)).powf(n_power as f64 / 2.0) * (s * s / 4.0).exp();
            if v > best {
                best = v;
                arg = l;
            }
        }
        (best, arg)
    }

    /// max |F^_s + R^_s - e^{-l^2}| over the given arguments.
    pub fn gaussian_identity_residual(&self, args: &[f64]) -> f64 {
        args.iter().map(|&l| (self.ft_f(l) + self.ft_r(l) - (-l * l).exp()).abs()).fold(0.0, f64::max)
    }

    /// F_s as a sampled even function on [0, x_max] (zero below x0).
    pub fn f_sampled(&self) -> SampledEvenFunction {
        let k0 = (self.x0 / self.dx).floor() as usize;
        let x_max = self.x0 + self.dx * (self.f_samples.len() - 1) as f64;
        let n = (x_max / self.dx).ceil() as usize;
        let mut values = vec![C64::new(0.0, 0.0); n + 1];
        for (k, v) in values.iter_mut().enumerate().skip(k0) {
            *v = C64::new(self.f_s(k as f64 * self.dx), 0.0);
        }
        SampledEvenFunction { dx: self.dx, values, declared_ft_support: None }
    }
}

fn cos_sum_shift(weights: &[f64], h: f64, y: f64, x0: f64) -> f64 {
    let step = C64::from_polar(1.0, h * y);
    let base = C64::from_polar(1.0, x0 * y);
    let mut acc = C64::new(0.0, 0.0);
    let mut z = C64::new(1.0, 0.0);
    for (k, w) in weights.iter().enumerate() {
        if k % 32 == 0 {
            z = C64::from_polar(1.0, h * y * k as f64);
        }
        acc += z * *w;
        z *= step;
    }
    (acc * base).re
}

pub fn verify_osz_decay(families: &[Gl2Family], n_power: u32) -> Result<CheckReport> {
    let started = Instant::now();
    if families.is_empty() {
        return Err(Error::Validation("no families to compare".into()));
    }
    let mut report = CheckReport::new(
        "osz_decay",
        "|F^_s(l)| <= C'_N e^{-s^2/4} / (s (1 + l^2/s^2)^{N/2}) with C'_N independent of s",
    );
    report.table = Table::new(&["s", "c_prime", "argmax"]);
    let mut consts = Vec::new();
    for fam in families {
        let (c, arg) = fam.osz_constant(n_power);
        consts.push(c);
        report.table.push(vec![fam.s, c, arg]);
    }
    let lo = consts.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = consts.iter().cloned().fold(0.0, f64::max);
    let spread = if lo > 0.0 { hi / lo - 1.0 } else { f64::INFINITY };
    report.grid = serde_json::json!({
        "s": families.iter().map(|f| f.s).collect::<Vec<_>>(),
        "N": n_power,
        "dx": families.iter().map(|f| f.dx).collect::<Vec<_>>(),
    });
    report.observed_constant = hi;
    report.threshold = 0.2;
    report.pass = hi.is_finite() && spread <= 0.2;
    report.value("relative_spread", spread);
    Ok(report.finish(started))
}

/// Phi with Phi(0) = 1, Phi^ supported in [-1, 1] and Phi^(j)(0) = 0 for 1 <= j <= K.
#[derive(Clone, Debug)]
pub struct PhiFamily {
    pub k: usize,
    shape: PhiShape,
}

#[derive(Clone, Debug)]
enum PhiShape {
    /// Phi^ = 2 pi (1 - |u|)_+, Phi(x) = sinc^2(x/2)
    Triangle,
    /// Phi^(u) = sum_k c_k b(u / a_k)
    Bumps { scales: Vec<f64>, coeffs: Vec<f64>, h: f64, weights: Vec<f64> },
}

/// Trapezoid nodes for the bump on [0, 1].
const BUMP_NODES: usize = 512;

/// Moment M_j = int_{-1}^{1} v^{2j} b(v) dv by the same rule that evaluates Phi.
fn bump_moment(j: usize, h: f64, weights: &[f64]) -> f64 {
    weights.iter().enumerate().map(|(k, w)| w * (k as f64 * h).powi(2 * j as i32)).sum::<f64>() * h
}

/// Builds Phi. `bumps` defaults to floor(K/2) + 1; fewer bumps cannot satisfy the moment system.
pub fn build_phi_family(k: usize, bumps: Option<usize>) -> Result<PhiFamily> {
    if k == 0 && bumps.is_none() {
        return Ok(PhiFamily { k, shape: PhiShape::Triangle });
    }
    let conditions = k / 2 + 1;
    let count = bumps.unwrap_or(conditions);
    if count < conditions {
        return Err(Error::SingularMomentSystem { suggested: conditions });
    }
    let h = 1.0 / BUMP_NODES as f64;
    // weights for beta(y) = int_{-1}^1 b(v) cos(v y) dv = h [b(0) + 2 sum b(v_k) cos(v_k y)]
    let weights: Vec<f64> = (0..BUMP_NODES).map(|i| if i == 0 { 1.0 } else { 2.0 } * bump(i as f64 * h)).collect();
    let scales: Vec<f64> = (0..count).map(|i| 1.0 - 0.5 * i as f64 / count as f64).collect();
    // rows j = 0..conditions, columns bumps; extra bumps get minimum-norm weights
    let a = DMatrix::from_fn(conditions, count, |j, c| scales[c].powi(2 * j as i32 + 1) * bump_moment(j, h, &weights));
    let mut rhs = DVector::zeros(conditions);
    rhs[0] = 2.0 * PI;
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-13 * smax) {
        return Err(Error::SingularMomentSystem { suggested: conditions });
    }
    let coeffs = svd.solve(&rhs, 1e-14 * smax).map_err(|_| Error::SingularMomentSystem { suggested: conditions })?;
    Ok(PhiFamily {
        k,
        shape: PhiShape::Bumps { scales, coeffs: coeffs.iter().copied().collect(), h, weights },
    })
}

impl PhiFamily {
    pub fn is_triangle(&self) -> bool {
        matches!(self.shape, PhiShape::Triangle)
    }

    /// Phi^(u).
    pub fn phi_hat(&self, u: f64) -> f64 {
        match &self.shape {
            PhiShape::Triangle => 2.0 * PI * (1.0 - u.abs()).max(0.0),
            PhiShape::Bumps { scales, coeffs, .. } => {
                scales.iter().zip(coeffs).map(|(a, c)| c * bump(u / a)).sum()
            }
        }
    }

    pub fn phi(&self, x: f64) -> f64 {
        match &self.shape {
            PhiShape::Triangle => {
                let y = 0.5 * x;
                if y.abs() < 1e-4 {
                    1.0 - y * y / 3.0 + y.powi(4) * 2.0 / 45.0
                } else {
                    (y.sin() / y).powi(2)
                }
            }
            PhiShape::Bumps { scales, coeffs, h, weights } => {
                let mut s = 0.0;
                for (a, c) in scales.iter().zip(coeffs) {
                    s += c * a * h * cos_sum(weights, *h, a * x);
                }
                s / (2.0 * PI)
            }
        }
    }

    /// 1 - Phi(x), assembled from sin^2 terms to avoid cancellation near 0.
    pub fn one_minus_phi(&self, x: f64) -> f64 {
        match &self.shape {
            PhiShape::Triangle => {
                let y = 0.5 * x;
                if y.abs() < 1e-3 {
                    y * y / 3.0 - 2.0 * y.powi(4) / 45.0 + y.powi(6) / 315.0
                } else {
                    1.0 - (y.sin() / y).powi(2)
                }
            }
            PhiShape::Bumps { .. } if x.abs() >= 0.5 => 1.0 - self.phi(x),
            PhiShape::Bumps { scales, coeffs, h, weights } => {
                let mut s = 0.0;
                for (a, c) in scales.iter().zip(coeffs) {
                    let y = a * x;
                    let mut acc = 0.0;
                    for (i, w) in weights.iter().enumerate() {
                        let t = (0.5 * i as f64 * h * y).sin();
                        acc += w * 2.0 * t * t;
                    }
                    s += c * a * h * acc;
                }
                s / (2.0 * PI)
            }
        }
    }

    /// Phi_r(x) = Phi(r x).
    pub fn dilate(&self, r: f64) -> impl Fn(f64) -> f64 + '_ {
        move |x| self.phi(r * x)
    }

    /// Exact derivative Phi^(j)(0) = (1/2 pi) int (iu)^j Phi^(u) du.
    pub fn derivative_at_zero(&self, j: usize) -> f64 {
        if j % 2 == 1 {
            return 0.0;
        }
        let sign = if (j / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        match &self.shape {
            PhiShape::Triangle => sign * 2.0 / ((j + 1) as f64 * (j + 2) as f64),
            PhiShape::Bumps { scales, coeffs, h, weights } => {
                let mj = bump_moment(j / 2, *h, weights);
                sign * scales.iter().zip(coeffs).map(|(a, c)| c * a.powi(j as i32 + 1) * mj).sum::<f64>() / (2.0 * PI)
            }
        }
    }

    /// Order of vanishing of 1 - Phi at 0: 2 floor(K/2) + 2.
    pub fn vanishing_order(&self) -> usize {
        2 * (self.k / 2) + 2
    }

    /// Largest |transform| outside [-1, 1] relative to its peak, from samples of Phi on [0, window].
    pub fn fourier_support_defect(&self, window: f64, dx: f64) -> Result<f64> {
        let f = SampledEvenFunction::from_fn(|x| self.phi(x), dx, window, Some(1.0));
        let t = transform_even(&f)?;
        let peak = t.peak();
        let mut worst: f64 = 0.0;
        for (j, v) in t.values.iter().enumerate() {
            if t.x(j) > 1.0 + 1e-9 {
                worst = worst.max(v.norm());
            }
        }
        Ok(worst / peak)
    }
}

/// The mollifier phi: 1 on [-1/4, 1/4], 0 outside [-1/2, 1/2].
pub fn mollifier(step: &SmoothStep, x: f64) -> f64 {
    1.0 - step.eval(4.0 * (x.abs() - 0.25))
}

/// Inverse transform phi_check(m) = (1/pi) int_0^{1/2} phi(x) cos(m x) dx, tabulated on m = k dm.
fn mollifier_check_table(dm: f64, count: usize) -> Vec<f64> {
    let step = SmoothStep::new();
    let nodes = 4096;
    let h = 0.5 / nodes as f64;
    let weights: Vec<f64> =
        (0..nodes).map(|i| if i == 0 { 0.5 } else { 1.0 } * mollifier(&step, i as f64 * h)).collect();
    (0..count).map(|k| h * cos_sum(&weights, h, k as f64 * dm) / PI).collect()
}

/// Sampling of the Riesz tail family, in units u = 2^j l.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailGrid {
    pub du: f64,
    pub u_max: f64,
    /// truncation of the mollifier kernel phi_check(m) to |m| <= cutoff
    pub cutoff: f64,
}

impl Default for TailGrid {
    fn default() -> Self {
        Self { du: 0.125, u_max: 64.0, cutoff: 1200.0 }
    }
}

/// F_j, R_j and J_j for H(l) = |l|^{-2 alpha} on the grid l_k = k du / 2^j, k = 0..=u_max/du.
#[derive(Clone, Debug)]
pub struct RieszTailFamily {
    pub alpha: f64,
    pub j: u32,
    pub m: u32,
    pub k: usize,
    pub grid: TailGrid,
    pub lambda: Vec<f64>,
    /// H (1 - Phi_1)
    pub h: Vec<f64>,
    pub r: Vec<f64>,
    pub f: Vec<f64>,
    pub jfun: Vec<f64>,
    /// max |R_j - R_j * phi_check_{2^{-(j+1)}}| / max |R_j| on the output grid
    pub band_limit_defect: f64,
}

pub fn build_riesz_tail_family(alpha: f64, j: u32, m: u32, phi: &PhiFamily, grid: TailGrid) -> Result<RieszTailFamily> {
    if alpha < 0.0 {
        return Err(Error::Validation("alpha must be nonnegative".into()));
    }
    if j < 1 {
        return Err(Error::Validation("dyadic index j must be >= 1".into()));
    }
    let order = phi.vanishing_order();
    if 2.0 * alpha > order as f64 {
        return Err(Error::InsufficientOrder { k: phi.k, alpha, needed: (2.0 * alpha).ceil() as usize });
    }
    let du = grid.du;
    let scale = 2f64.powi(j as i32);
    let n_out = (grid.u_max / du).round() as usize;
    let n_ext = n_out + (0.5 * grid.cutoff / du).round() as usize;
    let n_ker = (grid.cutoff / du).round() as usize;
    let kernel = mollifier_check_table(du, n_ker + 1);
    let h_of = |u: f64| -> f64 {
        let l = (u / scale).abs();
        if l == 0.0 {
            if order as f64 > 2.0 * alpha {
                0.0
            } else {
                // 1 - Phi(l) ~ -Phi^(q)(0) l^q / q! with q = 2 alpha
                -phi.derivative_at_zero(order) / (1..=order).map(|v| v as f64).product::<f64>()
            }
        } else {
            l.powf(-2.0 * alpha) * phi.one_minus_phi(l)
        }
    };
    // h on u = i du for |i| <= n_ext + n_ker (even)
    let n_h = n_ext + n_ker;
    let h_tab: Vec<f64> = (0..=n_h).map(|i| h_of(i as f64 * du)).collect();
    let h_at = |i: i64| h_tab[i.unsigned_abs() as usize];
    // R(u) = int h((u - m)/2^j) phi_check(m) dm, trapezoid with dm = du
    let conv = |i: usize| -> f64 {
        let mut s = kernel[0] * h_at(i as i64);
        for k in 1..=n_ker {
            let w = if k == n_ker { 0.5 } else { 1.0 } * kernel[k];
            s += w * (h_at(i as i64 - k as i64) + h_at(i as i64 + k as i64));
        }
        s * du
    };
    let r_ext: Vec<f64> = (0..=n_ext).map(conv).collect();
    // second mollification at scale 2^{-(j+1)}: R(u - m/2) with m = 2 k du
    let n_half = n_ker / 2;
    let r_at = |i: i64| r_ext[i.unsigned_abs() as usize];
    let mut defect: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for i in 0..=n_out {
        let mut s = kernel[0] * r_at(i as i64);
        for k in 1..=n_half {
            let w = if k == n_half { 0.5 } else { 1.0 } * kernel[2 * k];
            s += w * (r_at(i as i64 - k as i64) + r_at(i as i64 + k as i64));
        }
        s *= 2.0 * du;
        defect = defect.max((s - r_ext[i]).abs());
        peak = peak.max(r_ext[i].abs());
    }
    let lambda: Vec<f64> = (0..=n_out).map(|i| i as f64 * du / scale).collect();
    let h: Vec<f64> = h_tab[..=n_out].to_vec();
    let r: Vec<f64> = r_ext[..=n_out].to_vec();
    let f: Vec<f64> = h.iter().zip(&r).map(|(a, b)| a - b).collect();
    let jfun: Vec<f64> = lambda
        .iter()
        .zip(&f)
        .map(|(&l, &fv)| (1.0 + scale * scale * l * l).powi(m as i32) * l.powf(2.0 * alpha) * fv)
        .collect();
    Ok(RieszTailFamily {
        alpha,
        j,
        m,
        k: phi.k,
        grid,
        lambda,
        h,
        r,
        f,
        jfun,
        band_limit_defect: if peak > 0.0 { defect / peak } else { 0.0 },
    })
}

impl RieszTailFamily {
    pub fn sup_j(&self) -> f64 {
        self.jfun.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |F + R - H (1 - Phi_1)| on the grid.
    pub fn reconstruction_residual(&self) -> f64 {
        self.f.iter().zip(&self.r).zip(&self.h).map(|((f, r), h)| (f + r - h).abs()).fold(0.0, f64::max)
    }
}

pub fn verify_pom_estimate(families: &[RieszTailFamily]) -> Result<CheckReport> {
    let started = Instant::now();
    if families.len() < 2 {
        return Err(Error::Validation("need families for at least two consecutive j".into()));
    }
    let mut fams: Vec<&RieszTailFamily> = families.iter().collect();
    fams.sort_by_key(|f| f.j);
    let mut report = CheckReport::new(
        "pom_estimate",
        "sup |(1 + 2^{2j} l^2)^m l^{2 alpha} F_j(l)| decays geometrically in j",
    );
    report.table = Table::new(&["j", "sup_j", "sup_j_times_2j", "ratio_to_previous"]);
    let mut worst_ratio: f64 = 0.0;
    let mut bound: f64 = 0.0;
    let mut prev: Option<f64> = None;
    for fam in &fams {
        let s = fam.sup_j();
        let scaled = s * 2f64.powi(fam.j as i32);
        bound = bound.max(scaled);
        let ratio = prev.map(|p| if p > 0.0 { s / p } else { f64::INFINITY }).unwrap_or(f64::NAN);
        if let Some(p) = prev {
            worst_ratio = worst_ratio.max(if p > 0.0 { s / p } else { f64::INFINITY });
        }
        report.table.push(vec![fam.j as f64, s, scaled, ratio]);
        prev = Some(s);
    }
    let f0 = fams[0];
    report.grid = serde_json::json!({
        "j": fams.iter().map(|f| f.j).collect::<Vec<_>>(),
        "alpha": f0.alpha, "m": f0.m, "K": f0.k,
        "du": f0.grid.du, "u_max": f0.grid.u_max, "cutoff": f0.grid.cutoff,
    });
    report.observed_constant = bound;
    report.threshold = 0.6;
    report.pass = bound.is_finite() && worst_ratio <= 0.6;
    report.value("worst_consecutive_ratio", worst_ratio);
    Ok(report.finish(started))
}
