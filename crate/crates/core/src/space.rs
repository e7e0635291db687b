//! Finite metric measure spaces: weighted graphs with their shortest-path metric.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for distance comparisons in membership decisions.
pub const DIST_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

#[derive(Clone, Debug)]
pub struct MetricMeasureSpace {
    n: usize,
    rho: Vec<f64>,
    mu: Vec<f64>,
    edges: Vec<Edge>,
    provenance: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub members: Vec<usize>,
    pub measure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingProfile {
    pub c_doubling: f64,
    pub d_exponent: f64,
    pub radii_grid: Vec<f64>,
    /// Smallest C with mu(B(x, g r)) <= C (1 + g)^D mu(B(x, r)) over the sampled pairs.
    pub c_growth: f64,
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

fn validate_masses(measures: &[f64]) -> Result<()> {
    if measures.is_empty() {
        return Err(Error::Validation("space needs at least one point".into()));
    }
    for (i, &m) in measures.iter().enumerate() {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Validation(format!("mass of point {i} is {m}, must be > 0")));
        }
    }
    Ok(())
}

impl MetricMeasureSpace {
    /// Builds the shortest-path metric of a connected weighted graph.
    pub fn build(edges: &[Edge], measures: &[f64], provenance: impl Into<String>) -> Result<Self> {
        validate_masses(measures)?;
        let n = measures.len();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for e in edges {
            if e.a >= n || e.b >= n {
                return Err(Error::Validation(format!(
                    "edge ({}, {}) references a point outside 0..{n}",
                    e.a, e.b
                )));
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(Error::Validation(format!(
                    "edge ({}, {}) has length {}, must be > 0",
                    e.a, e.b, e.length
                )));
            }
            if e.a == e.b {
                return Err(Error::Validation(format!("self-loop at point {}", e.a)));
            }
            adj[e.a].push((e.b, e.length));
            adj[e.b].push((e.a, e.length));
        }
        let mut rho = vec![f64::INFINITY; n * n];
        for src in 0..n {
            let row = &mut rho[src * n..(src + 1) * n];
            row[src] = 0.0;
            let mut heap = BinaryHeap::new();
            heap.push(HeapItem(0.0, src));
            while let Some(HeapItem(d, u)) = heap.pop() {
                if d > row[u] {
                    continue;
                }
                for &(v, w) in &adj[u] {
                    let nd = d + w;
                    if nd < row[v] {
                        row[v] = nd;
                        heap.push(HeapItem(nd, v));
                    }
                }
            }
        }
        if rho.iter().any(|d| d.is_infinite()) {
            return Err(Error::MetricUndefined { components: count_components(n, &adj) });
        }
        // Exact symmetry: Dijkstra from both ends can differ in the last bit.
        for i in 0..n {
            for j in (i + 1)..n {
                let d = rho[i * n + j].min(rho[j * n + i]);
                rho[i * n + j] = d;
                rho[j * n + i] = d;
            }
        }
        Ok(Self { n, rho, mu: measures.to_vec(), edges: edges.to_vec(), provenance: provenance.into() })
    }

    /// Accepts an explicit metric matrix (row-major, n*n) after validating the metric axioms.
    pub fn from_metric(rho: Vec<f64>, measures: &[f64], provenance: impl Into<String>) -> Result<Self> {
        validate_masses(measures)?;
        let n = measures.len();
        if rho.len() != n * n {
            return Err(Error::DimensionMismatch(format!("metric has {} entries, expected {}", rho.len(), n * n)));
        }
        let space = Self { n, rho, mu: measures.to_vec(), edges: Vec::new(), provenance: provenance.into() };
        space.check_metric_axioms()?;
        Ok(space)
    }

    /// Symmetry, zero diagonal, nonnegativity and the triangle inequality by full triple enumeration.
    pub fn check_metric_axioms(&self) -> Result<()> {
        let n = self.n;
        for x in 0..n {
            if self.dist(x, x) != 0.0 {
                return Err(Error::Validation(format!("rho({x},{x}) = {} != 0", self.dist(x, x))));
            }
            for y in 0..n {
                let d = self.dist(x, y);
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::Validation(format!("rho({x},{y}) = {d} is not a finite nonnegative length")));
                }
                if d != self.dist(y, x) {
                    return Err(Error::Validation(format!("rho({x},{y}) != rho({y},{x})")));
                }
                if x != y && d == 0.0 {
                    return Err(Error::Validation(format!("distinct points {x}, {y} at distance 0")));
                }
            }
        }
        for x in 0..n {
            for y in 0..n {
                let dxy = self.dist(x, y);
                for z in 0..n {
                    if self.dist(x, z) > dxy + self.dist(y, z) + DIST_TOL {
                        return Err(Error::Validation(format!("triangle inequality fails at ({x},{y},{z})")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dist(&self, x: usize, y: usize) -> f64 {
        self.rho[x * self.n + y]
    }

    pub fn metric(&self) -> &[f64] {
        &self.rho
    }

    pub fn mu(&self, x: usize) -> f64 {
        self.mu[x]
    }

    pub fn measures(&self) -> &[f64] {
        &self.mu
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn total_measure(&self) -> f64 {
        self.mu.iter().sum()
    }

    /// Closed ball {y : rho(x,y) <= r}.
    pub fn ball(&self, x: usize, r: f64) -> Ball {
        let members: Vec<usize> = (0..self.n).filter(|&y| self.dist(x, y) <= r + DIST_TOL).collect();
        let measure = members.iter().map(|&y| self.mu[y]).sum();
        Ball { members, measure }
    }

    pub fn ball_measure(&self, x: usize, r: f64) -> f64 {
        let row = &self.rho[x * self.n..(x + 1) * self.n];
        row.iter().zip(&self.mu).filter(|(d, _)| **d <= r + DIST_TOL).map(|(_, m)| m).sum()
    }

    /// Measure of {y : rho(x,y) < r}.
    pub fn open_ball_measure(&self, x: usize, r: f64) -> f64 {
        let row = &self.rho[x * self.n..(x + 1) * self.n];
        row.iter().zip(&self.mu).filter(|(d, _)| **d < r - DIST_TOL).map(|(_, m)| m).sum()
    }

    pub fn diameter(&self) -> f64 {
        self.rho.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_positive_distance(&self) -> Option<f64> {
        self.rho.iter().cloned().filter(|&d| d > DIST_TOL).reduce(f64::min)
    }

    /// Sorted distinct values of rho(x, .) including 0.
    pub fn distinct_distances_from(&self, x: usize) -> Vec<f64> {
        let mut d: Vec<f64> = self.rho[x * self.n..(x + 1) * self.n].to_vec();
        d.sort_by(f64::total_cmp);
        d.dedup_by(|a, b| (*a - *b).abs() <= DIST_TOL);
        d
    }

    /// Number of edges in a shortest hop path, by BFS on the edge list (None without edges).
    pub fn hop_distances(&self) -> Option<Vec<usize>> {
        if self.edges.is_empty() && self.n > 1 {
            return None;
        }
        let n = self.n;
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        let mut hops = vec![usize::MAX; n * n];
        for s in 0..n {
            let row = &mut hops[s * n..(s + 1) * n];
            row[s] = 0;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if row[v] == usize::MAX {
                        row[v] = row[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        Some(hops)
    }

    pub fn with_measures(&self, measures: &[f64]) -> Result<Self> {
        validate_masses(measures)?;
        if measures.len() != self.n {
            return Err(Error::DimensionMismatch("measure vector length".into()));
        }
        let mut s = self.clone();
        s.mu = measures.to_vec();
        Ok(s)
    }

    /// Eight radii spaced geometrically from the smallest positive distance to the diameter.
    pub fn default_radii(&self) -> Vec<f64> {
        match self.min_positive_distance() {
            None => vec![1.0],
            Some(lo) => {
                let hi = self.diameter();
                if hi <= lo * (1.0 + 1e-12) {
                    return vec![lo];
                }
                (0..8).map(|k| lo * (hi / lo).powf(k as f64 / 7.0)).collect()
            }
        }
    }

    pub fn doubling_profile(&self, radii: &[f64]) -> Result<DoublingProfile> {
        if radii.is_empty() {
            return Err(Error::Validation("radii grid is empty".into()));
        }
        if radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("radii must be positive and increasing".into()));
        }
        let mut c_doubling: f64 = 1.0;
        // (ln(1 + gamma), ln ratio) samples for the exponent fit
        let mut samples: Vec<(f64, f64)> = Vec::new();
        for x in 0..self.n {
            let vols: Vec<f64> = radii.iter().map(|&r| self.ball_measure(x, r)).collect();
            for (i, &r) in radii.iter().enumerate() {
                c_doubling = c_doubling.max(self.ball_measure(x, 2.0 * r) / vols[i]);
                for j in (i + 1)..radii.len() {
                    let gamma = radii[j] / r;
                    samples.push(((1.0 + gamma).ln(), (vols[j] / vols[i]).ln()));
                }
            }
        }
        let d_exponent = fit_exponent(&samples);
        let c_growth = samples.iter().map(|&(lx, ly)| (ly - d_exponent * lx).exp()).fold(1.0, f64::max);
        Ok(DoublingProfile { c_doubling, d_exponent, radii_grid: radii.to_vec(), c_growth })
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Validation("cycle needs n >= 3".into()));
        }
        let edges: Vec<Edge> = (0..n).map(|i| Edge { a: i, b: (i + 1) % n, length: 1.0 }).collect();
        Self::build(&edges, &vec![1.0; n], format!("cycle C_{n}, unit edges, unit measure"))
    }

    pub fn path(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::Validation("path needs n >= 1".into()));
        }
        let edges: Vec<Edge> = (0..n.saturating_sub(1)).map(|i| Edge { a: i, b: i + 1, length: 1.0 }).collect();
        Self::build(&edges, &vec![1.0; n], format!("path P_{n}, unit edges, unit measure"))
    }

    /// Rectangular grid; point (i, j) has index i * h + j.
    pub fn grid(w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::Validation("grid dimensions must be positive".into()));
        }
        let mut edges = Vec::new();
        for i in 0..w {
            for j in 0..h {
                let p = i * h + j;
                if i + 1 < w {
                    edges.push(Edge { a: p, b: p + h, length: 1.0 });
                }
                if j + 1 < h {
                    edges.push(Edge { a: p, b: p + 1, length: 1.0 });
                }
            }
        }
        Self::build(&edges, &vec![1.0; w * h], format!("grid {w}x{h}, unit edges, unit measure"))
    }

    /// Star with center 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Result<Self> {
        let edges: Vec<Edge> = (1..=leaves).map(|i| Edge { a: 0, b: i, length: 1.0 }).collect();
        Self::build(&edges, &vec![1.0; leaves + 1], format!("star with {leaves} leaves, unit edges, unit measure"))
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                edges.push(Edge { a, b, length: 1.0 });
            }
        }
        Self::build(&edges, &vec![1.0; n], format!("complete graph K_{n}, unit edges, unit measure"))
    }
}

fn count_components(n: usize, adj: &[Vec<(usize, f64)>]) -> usize {
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    count
}

/// Least-squares slope with intercept of ln ratio against ln(1 + gamma), clamped at 0.
fn fit_exponent(samples: &[(f64, f64)]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let m = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / m;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / m;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    if sxx <= 0.0 {
        return 0.0;
    }
    (sxy / sxx).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_metric() {
        let c4 = MetricMeasureSpace::cycle(4).unwrap();
        assert_eq!(c4.dist(0, 2), 2.0);
        assert_eq!(c4.dist(3, 0), 1.0);
    }

    #[test]
    fn single_point() {
        let s = MetricMeasureSpace::build(&[], &[5.0], "point").unwrap();
        assert_eq!(s.metric(), &[0.0]);
        assert_eq!(s.measures(), &[5.0]);
        let p = s.doubling_profile(&s.default_radii()).unwrap();
        assert_eq!(p.c_doubling, 1.0);
        assert_eq!(p.d_exponent, 0.0);
    }

    #[test]
    fn disconnected_is_rejected() {
        let e = [Edge { a: 0, b: 1, length: 1.0 }];
        match MetricMeasureSpace::build(&e, &[1.0; 3], "broken") {
            Err(Error::MetricUndefined { components }) => assert_eq!(components, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nonpositive_inputs_rejected() {
        let e = [Edge { a: 0, b: 1, length: 0.0 }];
        assert!(matches!(MetricMeasureSpace::build(&e, &[1.0; 2], ""), Err(Error::Validation(_))));
        let e = [Edge { a: 0, b: 1, length: 1.0 }];
        assert!(matches!(MetricMeasureSpace::build(&e, &[1.0, -2.0], ""), Err(Error::Validation(_))));
    }

    #[test]
    fn balls() {
        let c8 = MetricMeasureSpace::cycle(8).unwrap();
        let b = c8.ball(0, 1.5);
        assert_eq!(b.members, vec![0, 1, 7]);
        assert_eq!(b.measure, 3.0);
        assert_eq!(c8.ball(5, 0.0).members, vec![5]);
        let c16 = MetricMeasureSpace::cycle(16).unwrap();
        assert_eq!(c16.ball(0, 8.0).members.len(), 16);
    }

    #[test]
    fn c16_doubling_constant() {
        // ball sizes 3, 5, 9, 16 at radii 1, 2, 4, 8: the worst ratio is 9/5 at r = 2
        let c16 = MetricMeasureSpace::cycle(16).unwrap();
        let p = c16.doubling_profile(&[1.0, 2.0, 4.0]).unwrap();
        assert!((p.c_doubling - 9.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn star_doubling_is_large() {
        let s = MetricMeasureSpace::star(32).unwrap();
        let p = s.doubling_profile(&[0.5, 1.0]).unwrap();
        assert!(p.c_doubling >= 16.0);
    }

    #[test]
    fn rejects_bad_metric() {
        let rho = vec![0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0];
        assert!(MetricMeasureSpace::from_metric(rho, &[1.0; 3], "").is_err());
    }
}
