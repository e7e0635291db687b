use std::sync::Arc;

use proptest::prelude::*;

use wavecert::io::*;
use wavecert::models::random_phases;
use wavecert::*;

#[test]
fn model_file_round_trip_is_bit_exact() {
    let space = MetricMeasureSpace::grid(3, 3)
        .unwrap()
        .with_measures(&[0.1, 1.0 / 3.0, 2.0, 1e-7, 5.5, 0.7, 1.0, 3.25, 9.0])
        .unwrap();
    let mut file = ModelFile::from_space(&space);
    file.magnetic = Some(MagneticSpec { phases: random_phases(&space, 3), potential: vec![0.25; 9] });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.toml");
    file.save(&path).unwrap();
    let back = ModelFile::load(&path).unwrap();
    assert_eq!(back, file);
    let rebuilt = back.build_space().unwrap();
    for (a, b) in rebuilt.measures().iter().zip(space.measures()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(rebuilt.metric(), space.metric());
    back.save(&path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), file.to_toml());
}

#[test]
fn metric_form_round_trip() {
    let space = MetricMeasureSpace::from_metric(vec![0.0, 1.5, 1.5, 0.0], &[1.0, 2.0], "pair").unwrap();
    let file = ModelFile::from_space(&space);
    assert!(file.space.edges.is_none());
    let back = ModelFile::from_toml(&file.to_toml()).unwrap();
    assert_eq!(back.build_space().unwrap().dist(0, 1), 1.5);
}

#[test]
fn model_file_errors() {
    let disconnected = "version = 1\n[space]\nmeasures = [1.0, 1.0, 1.0]\nedges = [{ a = 0, b = 1, length = 1.0 }]\n";
    let m = ModelFile::from_toml(disconnected).unwrap();
    assert!(matches!(m.build_space(), Err(Error::MetricUndefined { components: 2 })));
    assert!(ModelFile::from_toml("version = 2\n[space]\nmeasures = [1.0]\nmetric = [[0.0]]\n").is_err());
    assert!(ModelFile::from_toml("version = 1\nextra = 3\n[space]\nmeasures = [1.0]\nmetric = [[0.0]]\n").is_err());
    let both = "version = 1\n[space]\nmeasures = [1.0]\nmetric = [[0.0]]\nedges = []\n";
    assert!(ModelFile::from_toml(both).unwrap().build_space().is_err());
    assert!(ModelFile::load(std::path::Path::new("/nonexistent/model.toml")).is_err());
}

#[test]
fn triangles_build_a_complex() {
    let text = "version = 1\n[space]\nmeasures = [1.0, 1.0, 1.0]\nedges = [{ a = 0, b = 1, length = 1.0 }, { a = 1, b = 2, length = 1.0 }, { a = 0, b = 2, length = 1.0 }]\n[[triangles]]\nvertices = [0, 1, 2]\n";
    let hc = ModelFile::from_toml(text).unwrap().build_hodge().unwrap();
    assert_eq!(hc.triangles.len(), 1);
    assert_eq!(hc.boundary_residual(), 0.0);
}

#[test]
fn operator_text_round_trip() {
    let space = Arc::new(MetricMeasureSpace::cycle(6).unwrap().with_measures(&[1.0, 0.3, 2.0, 1.0, 1.0 / 7.0, 4.0]).unwrap());
    let ms = wavecert::models::build_magnetic(space.clone(), &random_phases(&space, 9), &[0.1, 0.0, 0.2, 0.0, 0.0, 1.0]).unwrap();
    let text = operator_to_text(&ms.operator);
    let back = operator_from_text(&text, space.clone()).unwrap();
    for (a, b) in back.matrix().iter().zip(ms.operator.matrix().iter()) {
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
    assert_eq!(operator_to_text(&back), text);
}

#[test]
fn operator_text_rejects_mismatches() {
    let space = Arc::new(MetricMeasureSpace::cycle(4).unwrap());
    let op = BundleOperator::laplacian(space.clone()).unwrap();
    let text = operator_to_text(&op);
    let other = Arc::new(MetricMeasureSpace::cycle(4).unwrap().with_measures(&[1.0, 1.0, 2.0, 1.0]).unwrap());
    assert!(matches!(operator_from_text(&text, other), Err(Error::Validation(_))));
    let bigger = Arc::new(MetricMeasureSpace::cycle(5).unwrap());
    assert!(matches!(operator_from_text(&text, bigger), Err(Error::DimensionMismatch(_))));
    assert!(operator_from_text("4 1 wrong\n", space.clone()).is_err());
    assert!(operator_from_text(&format!("{text}0 0\n"), space).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn measures_round_trip(bits in proptest::collection::vec(1e-12f64..1e12, 2..12)) {
        let n = bits.len();
        let space = MetricMeasureSpace::path(n).unwrap().with_measures(&bits).unwrap();
        let file = ModelFile::from_space(&space);
        let back = ModelFile::from_toml(&file.to_toml()).unwrap();
        for (a, b) in back.space.measures.iter().zip(&bits) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
