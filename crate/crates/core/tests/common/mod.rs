//! Independent oracles shared by the integration tests. Nothing here calls the library's
//! numerical routines; each value is recomputed from first principles.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// All-pairs shortest paths by Floyd-Warshall, row-major n x n.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut d = vec![f64::INFINITY; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
    }
    for &(a, b, l) in edges {
        d[a * n + b] = d[a * n + b].min(l);
        d[b * n + a] = d[b * n + a].min(l);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i * n + k] + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    d
}

/// exp(A) by scaling and squaring with a 30-term Taylor series.
pub fn expm_taylor(a: &DMatrix<C64>) -> DMatrix<C64> {
    let norm = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * a.nrows() as f64;
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let b = a * C64::new(scale, 0.0);
    let n = a.nrows();
    let mut term = DMatrix::<C64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = &term * &b * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Modified Bessel function I_n(x) from its power series.
pub fn bessel_i(n: u32, x: f64) -> f64 {
    let mut term = (x / 2.0).powi(n as i32) / (1..=n).map(|v| v as f64).product::<f64>();
    let mut sum = term;
    for k in 1..200 {
        term *= (x / 2.0).powi(2) / (k as f64 * (k + n as usize) as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Heat kernel of the unit Laplacian on the infinite path at hop distance d: e^{-2t} I_d(2t).
pub fn path_heat_kernel(d: u32, t: f64) -> f64 {
    (-2.0 * t).exp() * bessel_i(d, 2.0 * t)
}

/// Adaptive Simpson quadrature on [a, b].
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Maximal function by the literal double loop over centers and every pairwise distance as radius.
pub fn maximal_brute(n: usize, rho: &[f64], mu: &[f64], f: &[f64]) -> Vec<f64> {
    let mut radii: Vec<f64> = rho.to_vec();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    (0..n)
        .map(|x| {
            let mut best: f64 = 0.0;
            for &r in &radii {
                let (mut mass, mut integral) = (0.0, 0.0);
                for y in 0..n {
                    if rho[x * n + y] <= r + 1e-12 {
                        mass += mu[y];
                        integral += f[y].abs() * mu[y];
                    }
                }
                best = best.max(integral / mass);
            }
            best
        })
        .collect()
}

/// sup over probes y and levels l of l * w{|T a_y| > l}, with a_y = delta_y / mu(y), by scanning
/// l just below every attained value.
pub fn weak11_brute(m: &DMatrix<C64>, source_w: &[f64], target_w: &[f64], probes: &[usize]) -> f64 {
    let mut best: f64 = 0.0;
    for &y in probes {
        let col: Vec<f64> = (0..m.nrows()).map(|t| m[(t, y)].norm() / source_w[y]).collect();
        for &v in &col {
            let mass: f64 = col.iter().zip(target_w).filter(|(c, _)| **c >= v).map(|(_, w)| w).sum();
            best = best.max(v * mass);
        }
    }
    best
}

/// Unit-weight Laplacian of the n-cycle as a dense real matrix.
pub fn cycle_laplacian(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let j = (i + 1) % n;
        m[(i, i)] += 1.0;
        m[(j, j)] += 1.0;
        m[(i, j)] -= 1.0;
        m[(j, i)] -= 1.0;
    }
    m
}

pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
