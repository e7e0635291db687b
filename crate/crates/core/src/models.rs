//! Reference operators and their application checks: magnetic Schrodinger operators with
//! domination by the free heat kernel, weighted energy growth along the heat flow, the graph
//! Hodge complex in degrees 0 and 1, and the spectral heat kernel of the round 2-sphere.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle::{BundleOperator, C64};
use crate::error::{Error, Result};
use crate::quadrature::{compensated_sum, linear_fit};
use crate::report::{CheckReport, Table};
use crate::space::{Edge, MetricMeasureSpace, DIST_TOL};
use crate::wave_heat::{heat_flow_series, heat_kernel_series};

/// Exceedance allowed by the domination check.
pub const DOMINATION_TOL: f64 = 1e-12;

/// Laplacian twisted by edge phases plus the potential term V^2.
#[derive(Clone, Debug)]
pub struct MagneticSchrodinger {
    /// theta for the orientation a -> b of each edge of the base space, in [0, 2pi)
    pub phases: Vec<f64>,
    pub potential: Vec<f64>,
    pub operator: BundleOperator,
}

/// (Lf)(x) = mu(x)^{-1} sum_y w_xy (f(x) - e^{i theta_xy} f(y)) + V(x)^2 f(x), w = 1/length^2.
pub fn build_magnetic(space: Arc<MetricMeasureSpace>, phases: &[f64], potential: &[f64]) -> Result<MagneticSchrodinger> {
    let n = space.n();
    if phases.len() != space.edges().len() {
        return Err(Error::DimensionMismatch(format!(
            "{} phases for {} edges",
            phases.len(),
            space.edges().len()
        )));
    }
    if potential.len() != n {
        return Err(Error::DimensionMismatch(format!("{} potential values for {n} points", potential.len())));
    }
    if let Some(p) = phases.iter().find(|p| !p.is_finite()) {
        return Err(Error::Validation(format!("phase {p} is not finite")));
    }
    for (x, &v) in potential.iter().enumerate() {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Validation(format!("potential V({x}) = {v}; V must be finite and nonnegative")));
        }
    }
    let phases: Vec<f64> = phases.iter().map(|p| p.rem_euclid(TAU)).collect();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (e, &th) in space.edges().iter().zip(&phases) {
        let w = 1.0 / (e.length * e.length);
        let z = C64::from_polar(w, th);
        m[(e.a, e.a)] += w / space.mu(e.a);
        m[(e.b, e.b)] += w / space.mu(e.b);
        m[(e.a, e.b)] -= z / space.mu(e.a);
        m[(e.b, e.a)] -= z.conj() / space.mu(e.b);
    }
    for (x, &v) in potential.iter().enumerate() {
        m[(x, x)] += v * v;
    }
    let operator = BundleOperator::new(space, 1, m, Some(1))?;
    Ok(MagneticSchrodinger { phases, potential: potential.to_vec(), operator })
}

impl MagneticSchrodinger {
    pub fn space(&self) -> &Arc<MetricMeasureSpace> {
        self.operator.space()
    }

    /// Direct summation of sum_edges w |f(a) - e^{i theta} f(b)|^2 + sum_x V(x)^2 |f(x)|^2 mu(x).
    pub fn quadratic_form(&self, f: &DVector<C64>) -> f64 {
        let space = self.space();
        let mut terms = Vec::new();
        for (e, &th) in space.edges().iter().zip(&self.phases) {
            let w = 1.0 / (e.length * e.length);
            terms.push(w * (f[e.a] - C64::from_polar(1.0, th) * f[e.b]).norm_sqr());
        }
        for (x, &v) in self.potential.iter().enumerate() {
            terms.push(v * v * f[x].norm_sqr() * space.mu(x));
        }
        compensated_sum(terms)
    }

    /// Same weighted graph with zero phases and zero potential.
    pub fn free(&self) -> Result<MagneticSchrodinger> {
        let space = self.space().clone();
        build_magnetic(space.clone(), &vec![0.0; space.edges().len()], &vec![0.0; space.n()])
    }
}

/// Phases theta_ab + phi(a) - phi(b): conjugation by the vertex phase field e^{i phi}.
pub fn gauge_transform(ms: &MagneticSchrodinger, phi: &[f64]) -> Result<MagneticSchrodinger> {
    let space = ms.space().clone();
    if phi.len() != space.n() {
        return Err(Error::DimensionMismatch(format!("{} gauge values for {} points", phi.len(), space.n())));
    }
    let phases: Vec<f64> = space
        .edges()
        .iter()
        .zip(&ms.phases)
        .map(|(e, &th)| th + phi[e.a] - phi[e.b])
        .collect();
    build_magnetic(space, &phases, &ms.potential)
}

/// Uniform random phases in [0, 2pi), one per edge.
pub fn random_phases(space: &MetricMeasureSpace, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..space.edges().len()).map(|_| rng.random::<f64>() * TAU).collect()
}

/// Entrywise |K_exp(-tL_{Y,V})(x,y)| <= K_exp(-tL_{0,0})(x,y), both by the uniformization series.
pub fn domination_check(ms: &MagneticSchrodinger, t_grid: &[f64]) -> Result<CheckReport> {
    let started = Instant::now();
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Validation("domination needs a nonempty grid of positive times".into()));
    }
    let free = ms.free()?;
    let n = ms.space().n();
    let mut report = CheckReport::new(
        "domination",
        "the magnetic Schrodinger heat kernel is dominated entrywise by the free heat kernel",
    );
    report.table = Table::new(&["t", "exceedance", "min_relative_margin"]);
    let mut worst: f64 = 0.0;
    let mut margin_all = f64::INFINITY;
    for &t in t_grid {
        let km = heat_kernel_series(&ms.operator, t);
        let k0 = heat_kernel_series(&free.operator, t);
        let mut exceed: f64 = 0.0;
        let mut margin = f64::INFINITY;
        for x in 0..n {
            for y in 0..n {
                let a = km.data()[(x, y)].norm();
                let b = k0.data()[(x, y)].re;
                exceed = exceed.max(a - b);
                if b > 1e-300 {
                    margin = margin.min((b - a) / b);
                }
            }
        }
        worst = worst.max(exceed);
        margin_all = margin_all.min(margin);
        report.table.push(vec![t, exceed, margin]);
    }
    report.grid = serde_json::json!({ "t": t_grid, "n": n });
    report.observed_constant = worst;
    report.threshold = DOMINATION_TOL;
    report.pass = worst <= DOMINATION_TOL;
    report.value("min_relative_margin", margin_all);
    Ok(report.finish(started))
}

/// Rate bound for E(t) = sum |omega_t|^2 e^xi mu: 2 max_x sum_{e at x} w_e (cosh(kappa h_e / 2) - 1) / mu(x).
pub fn discrete_energy_rate(space: &MetricMeasureSpace, kappa: f64) -> f64 {
    let mut acc = vec![0.0; space.n()];
    for e in space.edges() {
        let c = ((kappa * e.length / 2.0).cosh() - 1.0) / (e.length * e.length);
        acc[e.a] += c;
        acc[e.b] += c;
    }
    (0..space.n()).map(|x| 2.0 * acc[x] / space.mu(x)).fold(0.0, f64::max)
}

fn check_lipschitz(space: &MetricMeasureSpace, xi: &[f64], kappa: f64) -> Result<()> {
    if xi.len() != space.n() {
        return Err(Error::DimensionMismatch(format!("{} weight values for {} points", xi.len(), space.n())));
    }
    for e in space.edges() {
        let jump = (xi[e.a] - xi[e.b]).abs();
        let allowed = kappa * e.length;
        if jump > allowed + DIST_TOL * (1.0 + allowed) {
            return Err(Error::Lipschitz { a: e.a, b: e.b, jump, allowed });
        }
    }
    Ok(())
}

/// Normalized indicator of the closed ball B(center, radius).
pub fn ball_section(space: &MetricMeasureSpace, center: usize, radius: f64) -> DVector<C64> {
    let ball = space.ball(center, radius);
    let mut f = DVector::<C64>::zeros(space.n());
    for &m in &ball.members {
        f[m] = C64::new(1.0 / ball.measure.sqrt(), 0.0);
    }
    f
}

/// ln E(t) along the heat flow for increasing times, advancing the state between grid points.
fn log_energy(op: &BundleOperator, xi: &[f64], start: &DVector<C64>, t_grid: &[f64]) -> Result<(f64, Vec<f64>)> {
    let space = op.space();
    let energy = |v: &DMatrix<C64>| -> f64 {
        compensated_sum((0..space.n()).map(|x| v[(x, 0)].norm_sqr() * xi[x].exp() * space.mu(x)))
    };
    let mut state = DMatrix::from_column_slice(start.len(), 1, start.as_slice());
    let e0 = energy(&state);
    if !(e0 > 0.0) {
        return Err(Error::Validation("initial section has zero energy".into()));
    }
    let mut now = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t > now) {
            return Err(Error::Validation("time grid must be positive and increasing".into()));
        }
        state = heat_flow_series(op, t - now, &state);
        now = t;
        out.push(energy(&state).ln());
    }
    Ok((e0.ln(), out))
}

/// Growth of E(t) = int |e^{-tL} omega|^2 e^xi dmu against the discrete cosh rate.
pub fn energy_decay_check(
    ms: &MagneticSchrodinger,
    xi: &[f64],
    kappa: f64,
    t_grid: &[f64],
    initial: (usize, f64),
) -> Result<CheckReport> {
    let started = Instant::now();
    let space = ms.space();
    check_lipschitz(space, xi, kappa)?;
    let start = ball_section(space, initial.0, initial.1);
    let (ln_e0, ln_e) = log_energy(&ms.operator, xi, &start, t_grid)?;
    let c_disc = discrete_energy_rate(space, kappa);
    let mut report = CheckReport::new(
        "energy_decay",
        "E(t) = int |omega_t|^2 e^xi dmu grows at most exponentially with a rate fixed by the Lipschitz bound of xi",
    );
    report.table = Table::new(&["t", "ln_ratio", "bound"]);
    let mut c_sup = f64::NEG_INFINITY;
    for (&t, &l) in t_grid.iter().zip(&ln_e) {
        c_sup = c_sup.max((l - ln_e0) / t);
        report.table.push(vec![t, l - ln_e0, c_disc * t]);
    }
    let up = t_grid.len() / 2;
    let late = if t_grid.len() - up >= 2 {
        linear_fit(&t_grid[up..], &ln_e[up..]).map(|(_, b)| b).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    report.grid = serde_json::json!({ "t": t_grid, "kappa": kappa, "initial_ball": [initial.0, initial.1] });
    report.observed_constant = c_sup;
    report.threshold = c_disc;
    report.pass = c_sup <= c_disc * (1.0 + 1e-9) + 1e-12;
    report
        .value("c_sup", c_sup)
        .value("c_disc", c_disc)
        .value("late_slope", late)
        .value("continuum_rate", kappa * kappa / 2.0);
    Ok(report.finish(started))
}

/// Late-time growth rate of E(t) under xi -> s xi, compared with the continuum rate (s kappa)^2 / 2.
/// Times are 20 equally spaced points up to 0.8 R / (s kappa), R the eccentricity of the start point;
/// the rate is the least-squares slope of ln E over the upper half.
pub fn energy_rescaling_check(
    ms: &MagneticSchrodinger,
    xi: &[f64],
    kappa: f64,
    scales: &[f64],
    initial: (usize, f64),
) -> Result<CheckReport> {
    let started = Instant::now();
    let space = ms.space();
    check_lipschitz(space, xi, kappa)?;
    if !(kappa > 0.0) || scales.is_empty() || scales.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Validation("rescaling needs kappa > 0 and positive scales".into()));
    }
    let start = ball_section(space, initial.0, initial.1);
    let ecc = (0..space.n()).map(|y| space.dist(initial.0, y)).fold(0.0, f64::max);
    let mut report = CheckReport::new(
        "energy_rescaling",
        "the weighted energy growth rate approaches kappa^2 / 2 as the weight is scaled down",
    );
    report.table = Table::new(&["scale", "kappa", "late_slope", "continuum_rate", "ratio"]);
    let mut worst: f64 = 0.0;
    let mut slopes = Vec::new();
    for &s in scales {
        let k = s * kappa;
        let xs: Vec<f64> = xi.iter().map(|v| v * s).collect();
        let t_max = 0.8 * ecc / k;
        let ts: Vec<f64> = (1..=20).map(|i| t_max * i as f64 / 20.0).collect();
        let (_, ln_e) = log_energy(&ms.operator, &xs, &start, &ts)?;
        let slope = linear_fit(&ts[10..], &ln_e[10..]).map(|(_, b)| b).unwrap_or(f64::NAN);
        let rate = k * k / 2.0;
        let ratio = slope / rate;
        worst = worst.max((ratio - 1.0).abs());
        slopes.push(slope);
        report.table.push(vec![s, k, slope, rate, ratio]);
    }
    let mut quarter_dev: f64 = 0.0;
    for i in 1..scales.len() {
        let expected = (scales[i - 1] / scales[i]).powi(2);
        quarter_dev = quarter_dev.max((slopes[i - 1] / slopes[i] / expected - 1.0).abs());
    }
    report.grid = serde_json::json!({ "kappa": kappa, "scales": scales, "initial_ball": [initial.0, initial.1] });
    report.observed_constant = worst;
    report.threshold = 0.15;
    report.pass = worst <= 0.15;
    report.value("rescaling_ratio_deviation", quarter_dev);
    Ok(report.finish(started))
}

/// A triangle as three edge indices with the signs of its boundary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triangle {
    pub edges: [usize; 3],
    pub signs: [i8; 3],
}

/// Oriented triangle a -> b -> c expressed on the edge list of `space`.
pub fn triangle_from_vertices(space: &MetricMeasureSpace, a: usize, b: usize, c: usize) -> Result<Triangle> {
    let find = |u: usize, v: usize| -> Result<(usize, i8)> {
        for (i, e) in space.edges().iter().enumerate() {
            if e.a == u && e.b == v {
                return Ok((i, 1));
            }
            if e.a == v && e.b == u {
                return Ok((i, -1));
            }
        }
        Err(Error::Orientation(format!("no edge between {u} and {v}")))
    };
    let (e0, s0) = find(a, b)?;
    let (e1, s1) = find(b, c)?;
    let (e2, s2) = find(c, a)?;
    Ok(Triangle { edges: [e0, e1, e2], signs: [s0, s1, s2] })
}

/// Cochain complex on vertices, oriented edges and triangles. Vertex cochains carry the measure of
/// the base space, edge and triangle cochains unit weights; d0 carries sqrt of the edge weight.
#[derive(Clone, Debug)]
pub struct HodgeComplex {
    pub vertex_space: Arc<MetricMeasureSpace>,
    /// edge midpoints with the graph distance between them
    pub edge_space: Arc<MetricMeasureSpace>,
    pub triangles: Vec<Triangle>,
    pub d0: DMatrix<f64>,
    pub d1: DMatrix<f64>,
    pub l0: BundleOperator,
    pub l1: BundleOperator,
}

/// Distance between edge midpoints along the metric graph.
fn midpoint_metric(space: &MetricMeasureSpace) -> Vec<f64> {
    let edges = space.edges();
    let m = edges.len();
    let mut rho = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let (e, f) = (&edges[i], &edges[j]);
            let mut best = f64::INFINITY;
            for &u in &[e.a, e.b] {
                for &v in &[f.a, f.b] {
                    best = best.min(space.dist(u, v));
                }
            }
            rho[i * m + j] = best + (e.length + f.length) / 2.0;
        }
    }
    rho
}

pub fn build_hodge(space: Arc<MetricMeasureSpace>, triangles: &[Triangle]) -> Result<HodgeComplex> {
    let n = space.n();
    let edges = space.edges().to_vec();
    let m = edges.len();
    if m == 0 {
        return Err(Error::Validation("the complex needs at least one edge".into()));
    }
    let mut d0 = DMatrix::<f64>::zeros(m, n);
    for (i, e) in edges.iter().enumerate() {
        let s = 1.0 / e.length;
        d0[(i, e.a)] = -s;
        d0[(i, e.b)] = s;
    }
    let mut d1 = DMatrix::<f64>::zeros(triangles.len(), m);
    for (k, tri) in triangles.iter().enumerate() {
        let mut seen = [usize::MAX; 3];
        for (slot, (&e, &s)) in tri.edges.iter().zip(&tri.signs).enumerate() {
            if e >= m {
                return Err(Error::Orientation(format!("triangle {k} references missing edge {e}")));
            }
            if s != 1 && s != -1 {
                return Err(Error::Orientation(format!("triangle {k} has sign {s}; signs are +1 or -1")));
            }
            if seen.contains(&e) {
                return Err(Error::Orientation(format!("triangle {k} repeats edge {e}")));
            }
            seen[slot] = e;
            d1[(k, e)] = s as f64 * edges[e].length;
        }
        // the signed boundary must close up: every vertex enters once and leaves once
        let mut net = std::collections::BTreeMap::<usize, i32>::new();
        for (&e, &s) in tri.edges.iter().zip(&tri.signs) {
            let (tail, head) = if s > 0 { (edges[e].a, edges[e].b) } else { (edges[e].b, edges[e].a) };
            *net.entry(tail).or_default() -= 1;
            *net.entry(head).or_default() += 1;
        }
        if net.len() != 3 || net.values().any(|&v| v != 0) {
            return Err(Error::Orientation(format!("boundary of triangle {k} is not a closed oriented loop")));
        }
    }
    let mu_inv = DMatrix::from_diagonal(&DVector::from_iterator(n, (0..n).map(|x| 1.0 / space.mu(x))));
    let l0 = &mu_inv * d0.transpose() * &d0;
    let l1 = &d0 * &mu_inv * d0.transpose() + d1.transpose() * &d1;
    let edge_space = Arc::new(MetricMeasureSpace::from_metric(
        midpoint_metric(&space),
        &vec![1.0; m],
        format!("edge midpoints of {}", space.provenance()),
    )?);
    let to_c = |a: &DMatrix<f64>| a.map(|v| C64::new(v, 0.0));
    let l0 = BundleOperator::new(space.clone(), 1, to_c(&l0), Some(1))?;
    let l1 = BundleOperator::new(edge_space.clone(), 1, to_c(&l1), None)?;
    Ok(HodgeComplex { vertex_space: space, edge_space, triangles: triangles.to_vec(), d0, d1, l0, l1 })
}

impl HodgeComplex {
    /// max |d1 d0| entry.
    pub fn boundary_residual(&self) -> f64 {
        (&self.d1 * &self.d0).amax()
    }

    /// d0^*: edge cochains to vertex cochains, adjoint with respect to mu on vertices.
    pub fn d0_adjoint(&self) -> DMatrix<f64> {
        let n = self.vertex_space.n();
        let mu_inv = DMatrix::from_diagonal(&DVector::from_iterator(n, (0..n).map(|x| 1.0 / self.vertex_space.mu(x))));
        mu_inv * self.d0.transpose()
    }
}

/// L^{-1/2} on the orthogonal complement of the kernel, zero on the kernel.
fn inverse_sqrt(op: &BundleOperator) -> Result<DMatrix<f64>> {
    let dec = op.decompose()?;
    let tol = dec.null_tolerance() * 10.0;
    let vals: Vec<f64> = dec.eigenvalues().iter().map(|&l| if l > tol { 1.0 / l.sqrt() } else { 0.0 }).collect();
    Ok(dec.apply_values(&vals).map(|z| z.re))
}

/// Largest singular value of a map between weighted spaces: || W_out^{1/2} A W_in^{-1/2} ||_2.
fn weighted_norm(a: &DMatrix<f64>, w_out: &[f64], w_in: &[f64]) -> f64 {
    let mut b = a.clone();
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            b[(i, j)] *= (w_out[i] / w_in[j]).sqrt();
        }
    }
    b.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// d0 L0 = L1 d0, the intertwining d0^* L1^{-1/2} = L0^{-1/2} d0^*, and equality of the two
/// Riesz-transform norms at p = 2.
pub fn commutation_check(hc: &HodgeComplex) -> Result<CheckReport> {
    let started = Instant::now();
    let l0 = hc.l0.matrix().map(|z| z.re);
    let l1 = hc.l1.matrix().map(|z| z.re);
    let lhs = &hc.d0 * &l0;
    let rhs = &l1 * &hc.d0;
    let scale = lhs.amax().max(1.0);
    let residual_i = (&lhs - &rhs).amax() / scale;

    let d0s = hc.d0_adjoint();
    let l0_is = inverse_sqrt(&hc.l0)?;
    let l1_is = inverse_sqrt(&hc.l1)?;
    let vmu = hc.vertex_space.measures().to_vec();
    let emu = vec![1.0; hc.edge_space.n()];
    let residual_ii = weighted_norm(&(&d0s * &l1_is - &l0_is * &d0s), &vmu, &emu);
    let riesz_0 = weighted_norm(&(&hc.d0 * &l0_is), &emu, &vmu);
    let riesz_1 = weighted_norm(&(&d0s * &l1_is), &vmu, &emu);
    let residual_iii = (riesz_0 - riesz_1).abs();

    let mut report = CheckReport::new(
        "hodge_commutation",
        "d0 L0 = L1 d0 on a simplicial 2-complex, so the Riesz transforms of L0 and L1 are adjoint to each other",
    );
    report.grid = serde_json::json!({
        "vertices": hc.vertex_space.n(),
        "edges": hc.edge_space.n(),
        "triangles": hc.triangles.len(),
    });
    report.observed_constant = residual_i;
    report.threshold = 1e-10;
    report.pass = residual_i <= 1e-10 && residual_ii <= 1e-8 && residual_iii <= 1e-8;
    report
        .value("matrix_identity_residual", residual_i)
        .value("intertwining_residual", residual_ii)
        .value("riesz_norm_vertex", riesz_0)
        .value("riesz_norm_edge", riesz_1)
        .value("duality_residual", residual_iii)
        .value("boundary_residual", hc.boundary_residual());
    report.note("inverse square roots act on the orthogonal complement of the kernels");
    Ok(report.finish(started))
}

/// Complete graph on three vertices, optionally with its 2-cell.
pub fn k3_complex(with_cell: bool) -> Result<HodgeComplex> {
    let space = Arc::new(MetricMeasureSpace::complete(3)?);
    let tris = if with_cell { vec![triangle_from_vertices(&space, 0, 1, 2)?] } else { Vec::new() };
    build_hodge(space, &tris)
}

/// `count` triangles drawn without replacement from the triangulated (side+1) x (side+1) grid with
/// diagonals, with random edge and triangle orientations.
pub fn random_complex(seed: u64, side: usize, count: usize) -> Result<HodgeComplex> {
    if side == 0 || count > 2 * side * side {
        return Err(Error::Validation(format!("{count} triangles do not fit a grid of side {side}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = side + 1;
    let id = |i: usize, j: usize| i * w + j;
    let mut edges = Vec::new();
    let mut push = |u: usize, v: usize, length: f64, rng: &mut ChaCha8Rng| {
        if rng.random::<bool>() {
            edges.push(Edge { a: u, b: v, length });
        } else {
            edges.push(Edge { a: v, b: u, length });
        }
    };
    for i in 0..w {
        for j in 0..w {
            if i + 1 < w {
                push(id(i, j), id(i + 1, j), 1.0, &mut rng);
            }
            if j + 1 < w {
                push(id(i, j), id(i, j + 1), 1.0, &mut rng);
            }
            if i + 1 < w && j + 1 < w {
                push(id(i, j), id(i + 1, j + 1), 2f64.sqrt(), &mut rng);
            }
        }
    }
    let space = Arc::new(MetricMeasureSpace::build(&edges, &vec![1.0; w * w], format!("random complex seed {seed}"))?);
    let mut cells = Vec::new();
    for i in 0..side {
        for j in 0..side {
            cells.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            cells.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    cells.shuffle(&mut rng);
    let mut tris = Vec::with_capacity(count);
    for c in cells.into_iter().take(count) {
        let t = if rng.random::<bool>() { [c[0], c[1], c[2]] } else { [c[0], c[2], c[1]] };
        tris.push(triangle_from_vertices(&space, t[0], t[1], t[2])?);
    }
    build_hodge(space, &tris)
}

/// Heat kernel of the round unit 2-sphere at antipodal points from its spectral series.
#[derive(Clone, Copy, Debug)]
pub struct SphereHeat {
    pub l_max: usize,
}

impl SphereHeat {
    pub fn new(l_max: usize) -> Result<Self> {
        if l_max < 1 {
            return Err(Error::Validation("l_max must be at least 1".into()));
        }
        Ok(Self { l_max })
    }

    /// (4 pi)^{-1} sum_{l <= l_max} (2l+1) (-1)^l e^{-t l(l+1)}.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Validation(format!("t = {t} must be positive")));
        }
        let terms = (0..=self.l_max).map(|l| {
            let lf = l as f64;
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            sign * (2.0 * lf + 1.0) * (-t * lf * (lf + 1.0)).exp()
        });
        Ok(compensated_sum(terms) / (4.0 * PI))
    }

    /// Geometric bound on the omitted terms: the ratio of consecutive magnitudes beyond l_max is
    /// at most q = (2L+5)/(2L+3) e^{-2t(L+2)}.
    pub fn tail_bound(&self, t: f64) -> f64 {
        let l = self.l_max as f64;
        let first = (2.0 * l + 3.0) * (-t * (l + 1.0) * (l + 2.0)).exp();
        let q = (2.0 * l + 5.0) / (2.0 * l + 3.0) * (-2.0 * t * (l + 2.0)).exp();
        if q >= 1.0 {
            f64::INFINITY
        } else {
            first / (1.0 - q) / (4.0 * PI)
        }
    }
}

pub fn sphere_spectral_model(l_max: usize) -> Result<SphereHeat> {
    SphereHeat::new(l_max)
}
