//! Self-adjoint positive block operators on sections of a trivial bundle, their spectral
//! calculus and measure-weighted kernels.
//!
//! Sections are stored point-major: row `x * l + a` is fiber component `a` at point `x`.
//! Kernels use the right-weight convention `(Sf)(x) = sum_y K(x,y) f(y) mu(y)`, so the
//! kernel block is the matrix block divided by `mu(y)`.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::report::{CheckReport, Table};
use crate::space::MetricMeasureSpace;

pub type C64 = Complex<f64>;

/// Largest n*l accepted by the dense path.
pub const DENSE_LIMIT: usize = 4096;
/// Relative tolerance for self-adjointness and negative-eigenvalue clamping.
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct BundleOperator {
    space: Arc<MetricMeasureSpace>,
    fiber: usize,
    matrix: DMatrix<C64>,
    locality_hops: Option<usize>,
}

impl BundleOperator {
    pub fn new(
        space: Arc<MetricMeasureSpace>,
        fiber: usize,
        matrix: DMatrix<C64>,
        locality_hops: Option<usize>,
    ) -> Result<Self> {
        let dim = space.n() * fiber;
        if fiber == 0 || matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, expected {dim}x{dim} for n = {}, l = {fiber}",
                matrix.nrows(),
                matrix.ncols(),
                space.n()
            )));
        }
        if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Validation("operator matrix has non-finite entries".into()));
        }
        let op = Self { space, fiber, matrix, locality_hops };
        let residual = op.adjointness_residual();
        if residual > POSITIVITY_TOL {
            return Err(Error::NotSelfAdjoint { residual });
        }
        Ok(op)
    }

    /// Weighted graph Laplacian with edge weights 1/length^2: (Lf)(x) = mu(x)^{-1} sum_y w_xy (f(x) - f(y)).
    pub fn laplacian(space: Arc<MetricMeasureSpace>) -> Result<Self> {
        let n = space.n();
        if n > 1 && space.edges().is_empty() {
            return Err(Error::Validation("laplacian needs an edge list".into()));
        }
        let mut m = DMatrix::<C64>::zeros(n, n);
        for e in space.edges() {
            let w = 1.0 / (e.length * e.length);
            m[(e.a, e.a)] += w / space.mu(e.a);
            m[(e.b, e.b)] += w / space.mu(e.b);
            m[(e.a, e.b)] -= w / space.mu(e.a);
            m[(e.b, e.a)] -= w / space.mu(e.b);
        }
        Self::new(space, 1, m, Some(1))
    }

    pub fn identity(space: Arc<MetricMeasureSpace>, fiber: usize) -> Result<Self> {
        let d = space.n() * fiber;
        Self::new(space, fiber, DMatrix::identity(d, d), Some(0))
    }

    pub fn zero(space: Arc<MetricMeasureSpace>, fiber: usize) -> Result<Self> {
        let d = space.n() * fiber;
        Self::new(space, fiber, DMatrix::zeros(d, d), Some(0))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.space.clone(), self.fiber, self.matrix.map(|z| z * c), self.locality_hops)
    }

    pub fn space(&self) -> &Arc<MetricMeasureSpace> {
        &self.space
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn locality_hops(&self) -> Option<usize> {
        self.locality_hops
    }

    /// mu(x) repeated over the fiber components of x.
    pub fn row_weights(&self) -> Vec<f64> {
        row_weights(&self.space, self.fiber)
    }

    /// max |W M - (W M)^*| relative to max |W M|.
    pub fn adjointness_residual(&self) -> f64 {
        let w = self.row_weights();
        let d = self.dim();
        let mut scale: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let a = self.matrix[(i, j)] * w[i];
                let b = (self.matrix[(j, i)] * w[j]).conj();
                scale = scale.max(a.norm());
                worst = worst.max((a - b).norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn decompose(&self) -> Result<SpectralDecomposition> {
        SpectralDecomposition::new(self)
    }

    pub fn sparse(&self) -> SparseMatrix {
        SparseMatrix::from_dense(&self.matrix)
    }
}

pub(crate) fn row_weights(space: &MetricMeasureSpace, fiber: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(space.n() * fiber);
    for x in 0..space.n() {
        for _ in 0..fiber {
            w.push(space.mu(x));
        }
    }
    w
}

/// Compressed sparse rows of a complex matrix, keeping exactly nonzero entries.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pub dim: usize,
    pub row_start: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let dim = m.nrows();
        let mut row_start = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..dim {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_start.push(cols.len());
        }
        Self { dim, row_start, cols, vals }
    }

    /// self * b for a dense b.
    pub fn mul_dense(&self, b: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::<C64>::zeros(self.dim, b.ncols());
        for c in 0..b.ncols() {
            let col = b.column(c);
            for i in 0..self.dim {
                let mut s = C64::new(0.0, 0.0);
                for k in self.row_start[i]..self.row_start[i + 1] {
                    s += self.vals[k] * col[self.cols[k]];
                }
                out[(i, c)] = s;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::<C64>::zeros(self.dim);
        for i in 0..self.dim {
            let mut s = C64::new(0.0, 0.0);
            for k in self.row_start[i]..self.row_start[i + 1] {
                s += self.vals[k] * v[self.cols[k]];
            }
            out[i] = s;
        }
        out
    }

    /// Gershgorin row disc hull [min(re a_ii - R_i), max(re a_ii + R_i)].
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.dim {
            let mut diag = 0.0;
            let mut radius = 0.0;
            for k in self.row_start[i]..self.row_start[i + 1] {
                if self.cols[k] == i {
                    diag = self.vals[k].re;
                } else {
                    radius += self.vals[k].norm();
                }
            }
            lo = lo.min(diag - radius);
            hi = hi.max(diag + radius);
        }
        if self.dim == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }
}

/// Eigensystem of a bundle operator with mu-orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// Columns are mu-orthonormal eigenvectors: U^* W U = I.
    vectors: DMatrix<C64>,
    weights: Vec<f64>,
    n: usize,
    fiber: usize,
    null_dim: usize,
    spectral_radius: f64,
}

impl SpectralDecomposition {
    pub fn new(op: &BundleOperator) -> Result<Self> {
        let dim = op.dim();
        if dim > DENSE_LIMIT {
            return Err(Error::TooLarge(dim));
        }
        let weights = op.row_weights();
        let sq: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        // S = W^{1/2} M W^{-1/2} is Hermitian
        let mut s = DMatrix::<C64>::from_fn(dim, dim, |i, j| op.matrix[(i, j)] * (sq[i] / sq[j]));
        let st = s.adjoint();
        s = (s + st) * C64::new(0.5, 0.0);
        let real = s.iter().all(|z| z.im == 0.0);
        let (mut vals, q): (Vec<f64>, DMatrix<C64>) = if real {
            let sr = s.map(|z| z.re);
            let eig = SymmetricEigen::new(sr);
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(|v| C64::new(v, 0.0)))
        } else {
            let eig = SymmetricEigen::new(s);
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
        };
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        let spectral_radius = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bound = POSITIVITY_TOL * spectral_radius;
        if let Some(&lo) = vals.iter().min_by(|a, b| a.total_cmp(b)) {
            if lo < -bound {
                return Err(Error::NotPositive { eigenvalue: lo, bound });
            }
        }
        let mut vectors = DMatrix::<C64>::zeros(dim, dim);
        let sorted: Vec<f64> = order.iter().map(|&k| vals[k].max(0.0)).collect();
        for (new, &old) in order.iter().enumerate() {
            let mut col: Vec<C64> = (0..dim).map(|i| q[(i, old)] / sq[i]).collect();
            let peak = col.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            if let Some(first) = col.iter().find(|z| z.norm() > 1e-8 * peak) {
                let phase = first.conj() / first.norm();
                for z in col.iter_mut() {
                    *z *= phase;
                }
            }
            for (i, z) in col.into_iter().enumerate() {
                vectors[(i, new)] = z;
            }
        }
        vals = sorted;
        let null_tol = (10.0 * bound).max(f64::MIN_POSITIVE);
        let null_dim = vals.iter().filter(|&&v| v <= null_tol).count();
        Ok(Self { eigenvalues: vals, vectors, weights, n: op.space().n(), fiber: op.fiber(), null_dim, spectral_radius })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn null_dim(&self) -> usize {
        self.null_dim
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// Tolerance below which an eigenvalue counts as part of the kernel.
    pub fn null_tolerance(&self) -> f64 {
        (POSITIVITY_TOL * self.spectral_radius * 10.0).max(f64::MIN_POSITIVE)
    }

    /// F sampled on the spectrum; NaN values are rejected.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Result<Vec<f64>> {
        self.eigenvalues
            .iter()
            .map(|&l| {
                let v = f(l);
                if v.is_nan() {
                    Err(Error::FunctionUndefined { eigenvalue: l })
                } else {
                    Ok(v)
                }
            })
            .collect()
    }

    /// U diag(values) U^* W, the matrix of F(L).
    pub fn apply_values(&self, values: &[f64]) -> DMatrix<C64> {
        let mut k = self.kernel_matrix(values);
        for j in 0..self.dim() {
            let w = self.weights[j];
            for i in 0..self.dim() {
                k[(i, j)] *= w;
            }
        }
        k
    }

    pub fn apply_function<F: Fn(f64) -> f64>(&self, f: F) -> Result<DMatrix<C64>> {
        Ok(self.apply_values(&self.sample(f)?))
    }

    // U diag(values) U^*
    fn kernel_matrix(&self, values: &[f64]) -> DMatrix<C64> {
        let mut scaled = self.vectors.clone();
        for (c, &v) in values.iter().enumerate() {
            scaled.column_mut(c).scale_mut(v);
        }
        scaled * self.vectors.adjoint()
    }

    pub fn kernel_values(&self, values: &[f64]) -> OperatorKernel {
        OperatorKernel { n: self.n, fiber: self.fiber, data: self.kernel_matrix(values) }
    }

    pub fn kernel<F: Fn(f64) -> f64>(&self, f: F) -> Result<OperatorKernel> {
        Ok(self.kernel_values(&self.sample(f)?))
    }

    /// Single l x l kernel block K(x, y) without forming the full kernel.
    pub fn kernel_block(&self, values: &[f64], x: usize, y: usize) -> DMatrix<C64> {
        let l = self.fiber;
        DMatrix::from_fn(l, l, |a, b| {
            let ra = x * l + a;
            let rb = y * l + b;
            let mut s = C64::new(0.0, 0.0);
            for (i, &v) in values.iter().enumerate() {
                if v != 0.0 {
                    s += self.vectors[(ra, i)] * self.vectors[(rb, i)].conj() * v;
                }
            }
            s
        })
    }

    /// Scalar kernel entry for l = 1 (first fiber component otherwise).
    pub fn kernel_entry(&self, values: &[f64], x: usize, y: usize) -> C64 {
        let l = self.fiber;
        let (ra, rb) = (x * l, y * l);
        let mut s = C64::new(0.0, 0.0);
        for (i, &v) in values.iter().enumerate() {
            s += self.vectors[(ra, i)] * self.vectors[(rb, i)].conj() * v;
        }
        s
    }

    /// (sum_y |K(x,y)|_HS^2 mu(y))^{1/2} = (sum_i |F(l_i)|^2 sum_a |U_(x,a),i|^2)^{1/2}.
    pub fn row_norm_hs(&self, values: &[f64], x: usize) -> f64 {
        let l = self.fiber;
        let mut s = 0.0;
        for (i, &v) in values.iter().enumerate() {
            let mut p = 0.0;
            for a in 0..l {
                p += self.vectors[(x * l + a, i)].norm_sqr();
            }
            s += v * v * p;
        }
        s.sqrt()
    }

    /// F(L) applied to a section.
    pub fn apply_section(&self, values: &[f64], f: &DVector<C64>) -> DVector<C64> {
        let wf = DVector::from_iterator(f.len(), f.iter().zip(&self.weights).map(|(z, w)| z * *w));
        let mut coeff = self.vectors.adjoint() * wf;
        for (c, &v) in coeff.iter_mut().zip(values) {
            *c *= v;
        }
        &self.vectors * coeff
    }

    /// max |U^* W U - I|.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut wu = self.vectors.clone();
        for (i, &w) in self.weights.iter().enumerate() {
            wu.row_mut(i).scale_mut(w);
        }
        let g = self.vectors.adjoint() * wu;
        let d = self.dim();
        (g - DMatrix::<C64>::identity(d, d)).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// max |M - U diag U^* W| / max |M|.
    pub fn reconstruction_residual(&self, op: &BundleOperator) -> f64 {
        let back = self.apply_values(&self.eigenvalues);
        let scale = op.matrix().iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
        (back - op.matrix()).iter().fold(0.0f64, |m, z| m.max(z.norm())) / scale
    }

    /// sup of |F| over the spectrum.
    pub fn sup_on_spectrum(&self, values: &[f64]) -> f64 {
        values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockNorm {
    Operator,
    HilbertSchmidt,
}

/// Kernel blocks K(x, y) stored as one (n l) x (n l) matrix.
#[derive(Clone, Debug)]
pub struct OperatorKernel {
    n: usize,
    fiber: usize,
    data: DMatrix<C64>,
}

/// Kernel of an operator matrix: block (x, y) divided by mu(y).
pub fn kernel_of(matrix: &DMatrix<C64>, space: &MetricMeasureSpace, fiber: usize) -> Result<OperatorKernel> {
    let d = space.n() * fiber;
    if matrix.nrows() != d || matrix.ncols() != d {
        return Err(Error::DimensionMismatch(format!("matrix is {}x{}, expected {d}x{d}", matrix.nrows(), matrix.ncols())));
    }
    let w = row_weights(space, fiber);
    let data = DMatrix::from_fn(d, d, |i, j| matrix[(i, j)] / w[j]);
    Ok(OperatorKernel { n: space.n(), fiber, data })
}

impl OperatorKernel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn data(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn block(&self, x: usize, y: usize) -> DMatrix<C64> {
        let l = self.fiber;
        self.data.view((x * l, y * l), (l, l)).into_owned()
    }

    pub fn hs_norm(&self, x: usize, y: usize) -> f64 {
        let l = self.fiber;
        let mut s = 0.0;
        for a in 0..l {
            for b in 0..l {
                s += self.data[(x * l + a, y * l + b)].norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn op_norm(&self, x: usize, y: usize) -> f64 {
        if self.fiber == 1 {
            return self.data[(x, y)].norm();
        }
        let b = self.block(x, y);
        b.singular_values().iter().fold(0.0, |m: f64, v| m.max(*v))
    }

    pub fn norm(&self, x: usize, y: usize, kind: BlockNorm) -> f64 {
        match kind {
            BlockNorm::Operator => self.op_norm(x, y),
            BlockNorm::HilbertSchmidt => self.hs_norm(x, y),
        }
    }

    /// (sum_y |K(x,y)|^2 mu(y))^{1/2}.
    pub fn row_l2_norm(&self, x: usize, mu: &[f64], kind: BlockNorm) -> f64 {
        (0..self.n).map(|y| self.norm(x, y, kind).powi(2) * mu[y]).sum::<f64>().sqrt()
    }

    pub fn max_block_norm(&self) -> f64 {
        let mut m: f64 = 0.0;
        for x in 0..self.n {
            for y in 0..self.n {
                m = m.max(self.op_norm(x, y));
            }
        }
        m
    }

    /// (Sf)(x) = sum_y K(x,y) f(y) mu(y).
    pub fn apply(&self, f: &DVector<C64>, mu: &[f64]) -> DVector<C64> {
        let w: Vec<f64> = mu.iter().flat_map(|&m| std::iter::repeat_n(m, self.fiber)).collect();
        let wf = DVector::from_iterator(f.len(), f.iter().zip(&w).map(|(z, m)| z * *m));
        &self.data * wf
    }

    /// max |K(y,x) - K(x,y)^*| over blocks, relative to the largest entry.
    pub fn adjoint_symmetry_residual(&self) -> f64 {
        let scale = self.data.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
        (&self.data - self.data.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm())) / scale
    }

    /// CSV with columns x, y, |K|, |K|_HS in row-major order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,op_norm,hs_norm\n");
        for x in 0..self.n {
            for y in 0..self.n {
                out.push_str(&format!("{x},{y},{:e},{:e}\n", self.op_norm(x, y), self.hs_norm(x, y)));
            }
        }
        out
    }
}

/// Chebyshev coefficients c_k of the degree-k interpolant of f at Chebyshev points on [lo, hi].
pub fn chebyshev_coefficients<F: Fn(f64) -> f64>(f: F, degree: usize, lo: f64, hi: f64) -> Vec<f64> {
    let m = degree + 1;
    let pi = std::f64::consts::PI;
    let samples: Vec<f64> = (0..m)
        .map(|j| {
            let theta = pi * (j as f64 + 0.5) / m as f64;
            f(0.5 * (hi + lo) + 0.5 * (hi - lo) * theta.cos())
        })
        .collect();
    (0..m)
        .map(|k| {
            let s: f64 = samples
                .iter()
                .enumerate()
                .map(|(j, v)| v * (pi * k as f64 * (j as f64 + 0.5) / m as f64).cos())
                .sum();
            let c = 2.0 * s / m as f64;
            if k == 0 {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

/// Degree-k Chebyshev approximation of F(L) by the three-term recurrence on the sparse operator.
pub fn chebyshev_apply<F: Fn(f64) -> f64>(
    op: &BundleOperator,
    f: F,
    degree: usize,
    interval: (f64, f64),
) -> Result<DMatrix<C64>> {
    let (lo, hi) = interval;
    if !(hi > lo) {
        return Err(Error::Validation(format!("empty spectral interval [{lo}, {hi}]")));
    }
    let sparse = op.sparse();
    let (glo, ghi) = sparse.gershgorin();
    if glo < lo || ghi > hi {
        // Gershgorin does not certify the interval; fall back to the eigenvalues.
        let dec = op.decompose()?;
        let tol = 1e-12 * dec.spectral_radius().max(1.0);
        for &ev in dec.eigenvalues() {
            if ev < lo - tol || ev > hi + tol {
                return Err(Error::IntervalExcludesSpectrum { lo, hi, eigenvalue: ev });
            }
        }
    }
    let coeff = chebyshev_coefficients(&f, degree, lo, hi);
    let d = op.dim();
    let alpha = 2.0 / (hi - lo);
    let beta = -(hi + lo) / (hi - lo);
    // X = alpha L + beta I
    let x_apply = |t: &DMatrix<C64>| -> DMatrix<C64> {
        let mut r = sparse.mul_dense(t);
        r.scale_mut(alpha);
        r + t * C64::new(beta, 0.0)
    };
    let mut t_prev = DMatrix::<C64>::identity(d, d);
    let mut result = &t_prev * C64::new(coeff[0], 0.0);
    if degree == 0 {
        return Ok(result);
    }
    let mut t_cur = x_apply(&t_prev);
    result += &t_cur * C64::new(coeff[1], 0.0);
    for &c in coeff.iter().skip(2) {
        let mut t_next = x_apply(&t_cur);
        t_next.scale_mut(2.0);
        t_next -= &t_prev;
        result += &t_next * C64::new(c, 0.0);
        t_prev = t_cur;
        t_cur = t_next;
    }
    Ok(result)
}

/// exp(-tL) by the degree-k Chebyshev recurrence on the Gershgorin interval against the spectral path.
pub fn chebyshev_fidelity_check(op: &BundleOperator, dec: &SpectralDecomposition, t: f64, degree: usize) -> Result<CheckReport> {
    let started = Instant::now();
    let (lo, hi) = op.sparse().gershgorin();
    let lo = lo.min(0.0);
    let hi = if hi > lo { hi } else { lo + 1.0 };
    let cheb = chebyshev_apply(op, |l| (-t * l).exp(), degree, (lo, hi))?;
    let spec = dec.apply_function(|l| (-t * l).exp())?;
    let dev = (&cheb - &spec).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mut report = CheckReport::new(
        "chebyshev",
        "polynomial functional calculus of exp(-tL) agrees with the spectral functional calculus",
    );
    report.grid = serde_json::json!({ "t": t, "degree": degree, "interval": [lo, hi] });
    report.observed_constant = dev;
    report.threshold = 1e-10;
    report.pass = dev <= 1e-10;
    Ok(report.finish(started))
}

/// Checks sup_x ||K_{F1 F2}(x,.)||_HS <= sup |F1| * ||K_{F2}(x,.)||_HS row by row.
pub fn compose_bound_check<F1, F2>(f1: F1, f2: F2, dec: &SpectralDecomposition) -> Result<CheckReport>
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    let started = Instant::now();
    let v1 = dec.sample(f1)?;
    let v2 = dec.sample(f2)?;
    let prod: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a * b).collect();
    let sup1 = dec.sup_on_spectrum(&v1);
    let mut report = CheckReport::new(
        "compose_bound",
        "row L2 norm of the kernel of F1(L)F2(L) is at most sup|F1| times the row norm for F2(L)",
    );
    report.table = Table::new(&["x", "lhs", "rhs", "ratio"]);
    let mut worst: f64 = 0.0;
    for x in 0..dec.n() {
        let lhs = dec.row_norm_hs(&prod, x);
        let rhs = sup1 * dec.row_norm_hs(&v2, x);
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
        report.table.push(vec![x as f64, lhs, rhs, ratio]);
    }
    report.grid = serde_json::json!({ "points": dec.n() });
    report.observed_constant = worst;
    report.threshold = 1.0 + 1e-9;
    report.pass = worst <= report.threshold;
    report.value("sup_f1", sup1);
    Ok(report.finish(started))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(n: usize) -> BundleOperator {
        BundleOperator::laplacian(Arc::new(MetricMeasureSpace::cycle(n).unwrap())).unwrap()
    }

    #[test]
    fn c4_spectrum() {
        let dec = c(4).decompose().unwrap();
        let ev = dec.eigenvalues();
        for (a, b) in ev.iter().zip([0.0, 2.0, 2.0, 4.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(dec.null_dim(), 1);
    }

    #[test]
    fn p2_spectrum() {
        let op = BundleOperator::laplacian(Arc::new(MetricMeasureSpace::path(2).unwrap())).unwrap();
        let ev = op.decompose().unwrap().eigenvalues().to_vec();
        assert!(ev[0].abs() < 1e-14 && (ev[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn identity_spectrum_and_kernel() {
        let space = Arc::new(MetricMeasureSpace::build(&[], &[2.0], "p").unwrap());
        let op = BundleOperator::identity(space, 1).unwrap();
        assert_eq!(op.decompose().unwrap().eigenvalues(), &[1.0]);
        let sp = MetricMeasureSpace::build(&[crate::space::Edge { a: 0, b: 1, length: 1.0 }], &[2.0, 4.0], "").unwrap();
        let k = kernel_of(&DMatrix::identity(2, 2), &sp, 1).unwrap();
        assert_eq!(k.data()[(0, 0)].re, 0.5);
        assert_eq!(k.data()[(1, 1)].re, 0.25);
        assert_eq!(k.data()[(0, 1)].re, 0.0);
    }

    #[test]
    fn negative_operator_rejected() {
        let space = Arc::new(MetricMeasureSpace::cycle(4).unwrap());
        let op = BundleOperator::laplacian(space).unwrap().scaled(-1.0).unwrap();
        assert!(matches!(op.decompose(), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn non_self_adjoint_rejected() {
        let space = Arc::new(MetricMeasureSpace::path(2).unwrap());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]).map(|v| C64::new(v, 0.0));
        assert!(matches!(BundleOperator::new(space, 1, m, None), Err(Error::NotSelfAdjoint { .. })));
    }

    #[test]
    fn nan_function_named() {
        let dec = c(4).decompose().unwrap();
        match dec.apply_function(|l| 1.0 / l * 0.0) {
            Err(Error::FunctionUndefined { eigenvalue }) => assert!(eigenvalue.abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chebyshev_degree_zero() {
        let op = c(8);
        let m = chebyshev_apply(&op, |_| 3.0, 0, (0.0, 4.0)).unwrap();
        assert!((m - DMatrix::<C64>::identity(8, 8) * C64::new(3.0, 0.0)).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn chebyshev_rejects_short_interval() {
        let op = c(8);
        assert!(matches!(chebyshev_apply(&op, |l| l, 4, (0.0, 3.0)), Err(Error::IntervalExcludesSpectrum { .. })));
    }

    #[test]
    fn compose_with_constant_one() {
        let dec = c(16).decompose().unwrap();
        let r = compose_bound_check(|_| 1.0, |l| (-l).exp(), &dec).unwrap();
        assert!((r.observed_constant - 1.0).abs() < 1e-15);
        assert!(r.pass);
    }
}
