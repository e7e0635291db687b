mod common;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use common::*;
use wavecert::bundle::{chebyshev_apply, compose_bound_check, kernel_of};
use wavecert::*;

fn arc(s: MetricMeasureSpace) -> Arc<MetricMeasureSpace> {
    Arc::new(s)
}

fn lap(s: MetricMeasureSpace) -> BundleOperator {
    BundleOperator::laplacian(arc(s)).unwrap()
}

#[test]
fn cycle4_distance() {
    assert_eq!(MetricMeasureSpace::cycle(4).unwrap().dist(0, 2), 2.0);
}

#[test]
fn single_point_space() {
    let s = MetricMeasureSpace::build(&[], &[5.0], "point").unwrap();
    assert_eq!(s.metric(), &[0.0]);
    assert_eq!(s.measures(), &[5.0]);
}

#[test]
fn grid_metric_matches_floyd_warshall() {
    let s = MetricMeasureSpace::grid(8, 8).unwrap();
    let edges: Vec<(usize, usize, f64)> = s.edges().iter().map(|e| (e.a, e.b, e.length)).collect();
    let oracle = floyd_warshall(64, &edges);
    assert_eq!(s.metric(), &oracle[..]);
    assert_eq!(s.dist(0, 63), 14.0);
}

#[test]
fn disconnected_graph_rejected() {
    let edges = [Edge { a: 0, b: 1, length: 1.0 }, Edge { a: 2, b: 3, length: 1.0 }];
    let err = MetricMeasureSpace::build(&edges, &[1.0; 4], "two pieces").unwrap_err();
    assert!(matches!(err, Error::MetricUndefined { components: 2 }));
}

#[test]
fn nonpositive_mass_rejected() {
    let edges = [Edge { a: 0, b: 1, length: 1.0 }];
    assert!(MetricMeasureSpace::build(&edges, &[1.0, 0.0], "bad").is_err());
}

#[test]
fn balls_on_small_cycles() {
    let c8 = MetricMeasureSpace::cycle(8).unwrap();
    let b = c8.ball(0, 1.5);
    let mut m = b.members.clone();
    m.sort();
    assert_eq!(m, vec![0, 1, 7]);
    assert_eq!(b.measure, 3.0);
    for x in 0..8 {
        let b0 = c8.ball(x, 0.0);
        assert_eq!(b0.members, vec![x]);
        assert_eq!(b0.measure, c8.mu(x));
    }
    assert_eq!(MetricMeasureSpace::cycle(16).unwrap().ball(0, 8.0).members.len(), 16);
}

/// sup over x and r of mu(B(x, 2r)) / mu(B(x, r)) by direct enumeration.
fn doubling_oracle(s: &MetricMeasureSpace, radii: &[f64]) -> f64 {
    let n = s.n();
    let mass = |x: usize, r: f64| -> f64 { (0..n).filter(|&y| s.dist(x, y) <= r + 1e-12).map(|y| s.mu(y)).sum() };
    let mut c: f64 = 1.0;
    for x in 0..n {
        for &r in radii {
            c = c.max(mass(x, 2.0 * r) / mass(x, r));
        }
    }
    c
}

#[test]
fn cycle16_doubling_matches_enumeration() {
    let s = MetricMeasureSpace::cycle(16).unwrap();
    let radii = [1.0, 2.0, 4.0];
    let p = s.doubling_profile(&radii).unwrap();
    let oracle = doubling_oracle(&s, &radii);
    // |B(x, r)| = 2r + 1 below the half-circumference: ratios 5/3, 9/5, 16/9
    assert_eq!(oracle, 9.0 / 5.0);
    assert!((p.c_doubling - oracle).abs() < 1e-15);
}

#[test]
fn single_point_doubling() {
    let s = MetricMeasureSpace::build(&[], &[2.0], "point").unwrap();
    let p = s.doubling_profile(&s.default_radii()).unwrap();
    assert_eq!(p.c_doubling, 1.0);
    assert_eq!(p.d_exponent, 0.0);
}

#[test]
fn star_flags_nonuniform_doubling() {
    let s = MetricMeasureSpace::star(32).unwrap();
    let p = s.doubling_profile(&[0.5, 1.0]).unwrap();
    assert!(p.c_doubling >= 16.0);
    assert_eq!(p.c_doubling, doubling_oracle(&s, &[0.5, 1.0]));
}

#[test]
fn cycle_doubling_bound() {
    for n in [8usize, 15, 32, 64] {
        let s = MetricMeasureSpace::cycle(n).unwrap();
        let radii: Vec<f64> = s.default_radii().into_iter().filter(|&r| r >= 1.0).collect();
        let p = s.doubling_profile(&radii).unwrap();
        // smallest sampled ball has 3 points
        assert!(p.c_doubling <= 2.0 + 1.0 / 3.0 + 1e-12, "n = {n}: {}", p.c_doubling);
        assert!(p.c_doubling >= 1.0 && p.d_exponent >= 0.0);
    }
}

#[test]
fn laplacian_spectra_closed_forms() {
    let ev = lap(MetricMeasureSpace::cycle(4).unwrap()).decompose().unwrap();
    for (a, b) in ev.eigenvalues().iter().zip([0.0, 2.0, 2.0, 4.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    let p2 = lap(MetricMeasureSpace::path(2).unwrap()).decompose().unwrap();
    assert!((p2.eigenvalues()[0]).abs() < 1e-12 && (p2.eigenvalues()[1] - 2.0).abs() < 1e-12);
    let n = 24;
    let dec = lap(MetricMeasureSpace::cycle(n).unwrap()).decompose().unwrap();
    let mut closed: Vec<f64> =
        (0..n).map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()).collect();
    closed.sort_by(f64::total_cmp);
    let dense = sorted_eigenvalues(&cycle_laplacian(n));
    for i in 0..n {
        assert!((dec.eigenvalues()[i] - closed[i]).abs() < 1e-12);
        assert!((dense[i] - closed[i]).abs() < 1e-12);
    }
}

#[test]
fn identity_spectrum() {
    let s = arc(MetricMeasureSpace::path(3).unwrap());
    let dec = BundleOperator::identity(s, 1).unwrap().decompose().unwrap();
    assert!(dec.eigenvalues().iter().all(|&v| (v - 1.0).abs() < 1e-14));
    assert_eq!(dec.null_dim(), 0);
}

#[test]
fn functional_calculus_identities() {
    let op = lap(MetricMeasureSpace::cycle(4).unwrap());
    let dec = op.decompose().unwrap();
    let one = dec.apply_function(|_| 1.0).unwrap();
    assert!(max_abs_diff(&one, &DMatrix::identity(4, 4)) < 1e-12);
    let same = dec.apply_function(|l| l).unwrap();
    assert!(max_abs_diff(&same, op.matrix()) < 1e-10);
    let heat = dec.apply_function(|l| (-l).exp()).unwrap();
    let oracle = expm_taylor(&(op.matrix() * C64::new(-1.0, 0.0)));
    assert!(max_abs_diff(&heat, &oracle) < 1e-10);
}

#[test]
fn heat_on_weighted_graph_matches_taylor() {
    let edges = [
        Edge { a: 0, b: 1, length: 1.0 },
        Edge { a: 1, b: 2, length: 0.5 },
        Edge { a: 2, b: 3, length: 2.0 },
        Edge { a: 3, b: 0, length: 1.5 },
        Edge { a: 0, b: 2, length: 1.2 },
    ];
    let s = MetricMeasureSpace::build(&edges, &[1.0, 0.3, 2.0, 0.7], "weighted").unwrap();
    let op = lap(s);
    let dec = op.decompose().unwrap();
    let heat = dec.apply_function(|l| (-0.7 * l).exp()).unwrap();
    let oracle = expm_taylor(&(op.matrix() * C64::new(-0.7, 0.0)));
    assert!(max_abs_diff(&heat, &oracle) < 1e-10);
}

#[test]
fn kernel_convention_divides_by_right_measure() {
    let s = arc(MetricMeasureSpace::build(&[Edge { a: 0, b: 1, length: 1.0 }], &[2.0, 4.0], "pair").unwrap());
    let dec = BundleOperator::identity(s.clone(), 1).unwrap().decompose().unwrap();
    let k = dec.kernel(|_| 1.0).unwrap();
    assert!((k.data()[(0, 0)].re - 0.5).abs() < 1e-15);
    assert!((k.data()[(1, 1)].re - 0.25).abs() < 1e-15);
    assert!(k.data()[(0, 1)].norm() < 1e-15);
    let z = BundleOperator::zero(s, 1).unwrap().decompose().unwrap().kernel(|l| l).unwrap();
    assert!(z.data().iter().all(|v| v.norm() == 0.0));
}

#[test]
fn heat_kernel_matches_bessel_oracle() {
    let dec = lap(MetricMeasureSpace::cycle(64).unwrap()).decompose().unwrap();
    let k = dec.kernel(|l| (-l).exp()).unwrap();
    let oracle = path_heat_kernel(2, 1.0);
    assert!((oracle - 0.09324).abs() < 1e-4);
    assert!((k.data()[(0, 2)].norm() - oracle).abs() <= 0.02 * oracle);
}

#[test]
fn hs_row_norm_identities() {
    let dec = lap(MetricMeasureSpace::cycle(16).unwrap()).decompose().unwrap();
    let t = 1.0;
    let heat: Vec<f64> = dec.eigenvalues().iter().map(|&l| (-t * l).exp()).collect();
    let heat2: Vec<f64> = dec.eigenvalues().iter().map(|&l| (-2.0 * t * l).exp()).collect();
    let row = dec.row_norm_hs(&heat, 0);
    let diag = dec.kernel_entry(&heat2, 0, 0).re;
    assert!((row * row - diag).abs() < 1e-9);
    // direct summation over the dense kernel
    let k = dec.kernel_values(&heat);
    let direct: f64 = (0..16).map(|y| k.data()[(0, y)].norm_sqr()).sum::<f64>().sqrt();
    assert!((row - direct).abs() < 1e-10);
}

#[test]
fn compose_bound_examples() {
    let dec = lap(MetricMeasureSpace::cycle(16).unwrap()).decompose().unwrap();
    let r = compose_bound_check(|_| 1.0, |l| (-l).exp(), &dec).unwrap();
    assert!((r.observed_constant - 1.0).abs() < 1e-12);
    let r = compose_bound_check(|l| (-l).exp(), |l| 1.0 / (1.0 + l), &dec).unwrap();
    assert!(r.pass && r.observed_constant <= 1.0 + 1e-12);
    let top = dec.spectral_radius();
    let r = compose_bound_check(move |l| if (l - top).abs() < 1e-9 { 1.0 } else { 0.0 }, |l| (-l).exp(), &dec).unwrap();
    assert!(r.observed_constant <= 1.0 + 1e-12);
}

#[test]
fn chebyshev_examples() {
    let op = lap(MetricMeasureSpace::cycle(64).unwrap());
    let dec = op.decompose().unwrap();
    let spectral = dec.apply_function(|l| (-l).exp()).unwrap();
    let cheb = chebyshev_apply(&op, |l| (-l).exp(), 30, (0.0, 4.0)).unwrap();
    assert!(max_abs_diff(&spectral, &cheb) <= 1e-10);
    let low = chebyshev_apply(&op, |l| (-l).exp(), 5, (0.0, 4.0)).unwrap();
    assert_eq!(low[(0, 6)], C64::new(0.0, 0.0));
    let c = chebyshev_apply(&op, |_| 2.5, 0, (0.0, 4.0)).unwrap();
    assert!(max_abs_diff(&c, &(DMatrix::identity(64, 64) * C64::new(2.5, 0.0))) < 1e-14);
    let rep = bundle::chebyshev_fidelity_check(&op, &dec, 1.0, 30).unwrap();
    assert!(rep.pass, "{}", rep.to_json());
}

#[test]
fn identity_kernel_reproduces_sections() {
    let s = MetricMeasureSpace::build(&[Edge { a: 0, b: 1, length: 1.0 }, Edge { a: 1, b: 2, length: 1.0 }], &[0.5, 2.0, 3.0], "p3")
        .unwrap();
    let k = kernel_of(&DMatrix::identity(3, 3), &s, 1).unwrap();
    let f = DVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0), C64::new(3.0, -1.0)]);
    let g = k.apply(&f, s.measures());
    assert!((g - f).norm() < 1e-15);
}

/// Laplacian tensor the identity on a fiber of dimension 2 plus a Hermitian PSD block at each
/// point; with unit measures this is self-adjoint.
fn fiber2_operator(n: usize, blocks: &[[f64; 4]]) -> BundleOperator {
    let s = arc(MetricMeasureSpace::cycle(n).unwrap());
    let l = cycle_laplacian(n);
    let mut m = DMatrix::<C64>::zeros(2 * n, 2 * n);
    for x in 0..n {
        for y in 0..n {
            for a in 0..2 {
                m[(2 * x + a, 2 * y + a)] = C64::new(l[(x, y)], 0.0);
            }
        }
        let [p, q, re, im] = blocks[x];
        // A = B^* B with B = [[p, re + i im], [0, q]] is Hermitian PSD
        let b = DMatrix::from_row_slice(2, 2, &[C64::new(p, 0.0), C64::new(re, im), C64::new(0.0, 0.0), C64::new(q, 0.0)]);
        let a = b.adjoint() * b;
        for i in 0..2 {
            for j in 0..2 {
                m[(2 * x + i, 2 * x + j)] += a[(i, j)];
            }
        }
    }
    BundleOperator::new(s, 2, m, Some(1)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn built_spaces_satisfy_metric_axioms(n in 2usize..12, extra in proptest::collection::vec((0usize..12, 0usize..12, 0.1f64..3.0), 0..10), lens in proptest::collection::vec(0.1f64..3.0, 12)) {
        // a path keeps the graph connected; extra chords are random
        let mut edges: Vec<Edge> = (0..n - 1).map(|i| Edge { a: i, b: i + 1, length: lens[i] }).collect();
        for (a, b, l) in extra {
            let (a, b) = (a % n, b % n);
            if a != b {
                edges.push(Edge { a, b, length: l });
            }
        }
        let s = MetricMeasureSpace::build(&edges, &vec![1.0; n], "random").unwrap();
        prop_assert!(s.check_metric_axioms().is_ok());
        let tuples: Vec<(usize, usize, f64)> = edges.iter().map(|e| (e.a, e.b, e.length)).collect();
        let oracle = floyd_warshall(n, &tuples);
        for (a, b) in s.metric().iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
        }
    }

    #[test]
    fn doubling_invariant_under_measure_scaling(n in 3usize..20, c in 0.01f64..100.0) {
        let s = MetricMeasureSpace::cycle(n).unwrap();
        let scaled = s.with_measures(&vec![c; n]).unwrap();
        let radii = s.default_radii();
        let p = s.doubling_profile(&radii).unwrap();
        let q = scaled.doubling_profile(&radii).unwrap();
        prop_assert!((p.c_doubling - q.c_doubling).abs() <= 1e-12 * p.c_doubling);
        prop_assert!((p.d_exponent - q.d_exponent).abs() <= 1e-9 * (1.0 + p.d_exponent));
    }

    #[test]
    fn block_norm_sandwich(blocks in proptest::collection::vec([0.0f64..2.0, 0.0f64..2.0, -1.0f64..1.0, -1.0f64..1.0], 6), t in 0.05f64..3.0) {
        let op = fiber2_operator(6, &blocks);
        let dec = op.decompose().unwrap();
        let k = dec.kernel(|l| (-t * l).exp()).unwrap();
        for x in 0..6 {
            for y in 0..6 {
                let (o, h) = (k.op_norm(x, y), k.hs_norm(x, y));
                prop_assert!(o <= h * (1.0 + 1e-12) + 1e-15);
                prop_assert!(h <= 2f64.sqrt() * o * (1.0 + 1e-12) + 1e-15);
            }
        }
        prop_assert!(k.adjoint_symmetry_residual() <= 1e-10);
    }

    #[test]
    fn calculus_is_multiplicative(a in 0.1f64..3.0, b in 0.1f64..3.0) {
        let dec = lap(MetricMeasureSpace::cycle(12).unwrap()).decompose().unwrap();
        let f = dec.apply_function(|l| (-a * l).exp()).unwrap();
        let g = dec.apply_function(|l| 1.0 / (1.0 + b * l)).unwrap();
        let fg = dec.apply_function(|l| (-a * l).exp() / (1.0 + b * l)).unwrap();
        let prod = &f * &g;
        let scale = fg.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(max_abs_diff(&prod, &fg) <= 1e-8 * scale);
    }

    #[test]
    fn decomposition_invariants(seedless in proptest::collection::vec(0.2f64..5.0, 10)) {
        let s = MetricMeasureSpace::cycle(10).unwrap().with_measures(&seedless).unwrap();
        let op = lap(s);
        let dec = op.decompose().unwrap();
        prop_assert!(dec.orthonormality_residual() <= 1e-9);
        prop_assert!(dec.reconstruction_residual(&op) <= 1e-8);
        prop_assert!(dec.eigenvalues().iter().all(|&l| l >= 0.0));
    }
}
