//! Property tests for the spec-level invariants that hold over whole
//! input domains rather than fixed examples.

use ndarray::Array2;
use proptest::prelude::*;

use feye_core::contrastive::{supcon_loss, EmbeddingBatch, LabelKind, LossConfig};
use feye_core::dataset::{annotations_to_text, parse_annotation_file, ObjectAnnotation};
use feye_core::geometry::{FisheyeCalibration, NormalizedPoint, RegionScheme};
use feye_core::quality::{gaussian_overlap, GaussianSummary};

fn point() -> impl Strategy<Value = NormalizedPoint> {
    (0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(x, y)| NormalizedPoint::new(x, y).unwrap())
}

proptest! {
    #[test]
    fn radial_distance_dihedral_symmetry(p in point()) {
        let d = p.radial_distance();
        let (x, y) = (p.x(), p.y());
        for (ix, iy) in [
            (1.0 - x, y),
            (x, 1.0 - y),
            (1.0 - x, 1.0 - y),
            (y, x),
            (1.0 - y, x),
            (y, 1.0 - x),
            (1.0 - y, 1.0 - x),
        ] {
            let image = NormalizedPoint::new(ix, iy).unwrap();
            prop_assert!((image.radial_distance() - d).abs() < 1e-12);
        }
    }

    #[test]
    fn single_radial_level_is_always_zero(p in point()) {
        let scheme = RegionScheme::radial_levels(1).unwrap();
        prop_assert_eq!(scheme.assign_level(p), 0);
    }

    #[test]
    fn distortion_monotone_for_nonnegative_coefficients(
        a0 in 0.0..1.0f64,
        a2 in 0.0..1.0f64,
        a3 in 0.0..1.0f64,
        a4 in 0.0..1.0f64,
        lo in 0.0..0.7f64,
        delta in 0.0..0.7f64,
    ) {
        let cal = FisheyeCalibration::new(a0, a2, a3, a4).unwrap();
        let hi = (lo + delta).min(0.7072);
        prop_assert!(cal.distortion_at(hi) + 1e-15 >= cal.distortion_at(lo));
    }

    #[test]
    fn annotation_text_round_trips(
        rows in proptest::collection::vec(
            (0usize..10, 0.0..=1.0f64, 0.0..=1.0f64, 0.01..=1.0f64, 0.01..=1.0f64),
            0..20,
        )
    ) {
        let annotations: Vec<ObjectAnnotation> = rows
            .into_iter()
            .map(|(class, x, y, w, h)| {
                ObjectAnnotation::new(class, NormalizedPoint::new(x, y).unwrap(), w, h).unwrap()
            })
            .collect();
        let reparsed = parse_annotation_file(&annotations_to_text(&annotations)).unwrap();
        prop_assert_eq!(annotations, reparsed);
    }

    #[test]
    fn loss_invariant_to_input_scaling(
        seed in 0u64..1000,
        scale in 0.05..50.0f64,
    ) {
        use rand::Rng;
        let mut rng = feye_core::stream_rng(seed, "prop-loss", 0);
        let n = 8;
        let vectors = Array2::from_shape_fn((n, 4), |_| rng.random_range(-1.0..1.0f64));
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let scaled = vectors.mapv(|v| v * scale);
        let a = EmbeddingBatch::new(vectors, labels.clone(), labels.clone()).unwrap();
        let b = EmbeddingBatch::new(scaled, labels.clone(), labels).unwrap();
        let cfg = LossConfig::default();
        let la = supcon_loss(&a, LabelKind::Semantic, &cfg).unwrap();
        let lb = supcon_loss(&b, LabelKind::Semantic, &cfg).unwrap();
        prop_assert!((la.value - lb.value).abs() < 1e-9);
    }

    #[test]
    fn overlap_symmetric_and_bounded(
        m1 in -5.0..5.0f64,
        m2 in -5.0..5.0f64,
        s1 in 0.05..3.0f64,
        s2 in 0.05..3.0f64,
    ) {
        let a = GaussianSummary::new(m1, s1).unwrap();
        let b = GaussianSummary::new(m2, s2).unwrap();
        let ab = gaussian_overlap(&a, &b).unwrap();
        let ba = gaussian_overlap(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&ab));
    }

    #[test]
    fn box_level_zero_set_is_convex(p in point(), q in point()) {
        let scheme = RegionScheme::standard_box();
        if scheme.assign_level(p) == 0 && scheme.assign_level(q) == 0 {
            let mid = NormalizedPoint::new(
                0.5 * (p.x() + q.x()),
                0.5 * (p.y() + q.y()),
            )
            .unwrap();
            prop_assert_eq!(scheme.assign_level(mid), 0);
        }
    }
}
