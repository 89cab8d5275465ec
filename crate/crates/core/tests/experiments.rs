//! End-to-end runs on synthetic manifolds with known parameters.

mod common;

use manimask_core::io::{dataset_to_csv, parse_csv, write_binary_dataset, write_csv_dataset};
use manimask_core::manifold::Embedding;
use manimask_core::*;
use nalgebra::DMatrix;

// Arc length of the roll curve (t cos t, t sin t) measured from t = 0.
fn arc_length(t: f64) -> f64 {
    0.5 * (t * (1.0 + t * t).sqrt() + t.asinh())
}

fn unrolled(x: &DataMatrix) -> DMatrix<f64> {
    let p = x.params().unwrap();
    DMatrix::from_fn(x.n(), 2, |i, c| if c == 0 { arc_length(p[(i, 0)]) } else { p[(i, 1)] })
}

fn centered_norm(m: &DMatrix<f64>) -> f64 {
    let mut c = m.clone();
    for j in 0..c.ncols() {
        let mean = c.column(j).mean();
        c.column_mut(j).add_scalar_mut(-mean);
    }
    c.norm()
}

#[test]
fn swiss_roll_isomap_recovers_unrolled_coordinates() {
    // k = 6: at 500 points a 10-NN graph bridges adjacent turns of the roll
    let x = synth_dataset(SynthKind::SwissRoll, 500, 7, SynthOptions::default()).unwrap();
    let out = isomap(&x, 6, 2, false).unwrap();
    let truth = unrolled(&x);
    let (_, disp) = procrustes_align(&Embedding::new(truth.clone(), vec![]), &out.embedding).unwrap();
    let rel = disp / centered_norm(&truth);
    assert!(rel < 0.1, "relative error {rel}");
    assert!(residual_variance(&out.geodesics, &out.embedding).unwrap() < 0.05);
}

#[test]
fn swiss_roll_short_circuits_at_k10() {
    // documents the failure mode: the 10-NN graph links points whose roll
    // angles differ by about one turn
    let x = synth_dataset(SynthKind::SwissRoll, 500, 7, SynthOptions::default()).unwrap();
    let g = knn_graph(&x, 10).unwrap();
    let p = x.params().unwrap();
    let bridges = (0..500)
        .flat_map(|i| g.neighbors(i).iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| (p[(i, 0)] - p[(j, 0)]).abs() > 3.0)
        .count();
    assert!(bridges > 0);
    let g6 = knn_graph(&x, 6).unwrap();
    let bridges6 = (0..500)
        .flat_map(|i| g6.neighbors(i).iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| (p[(i, 0)] - p[(j, 0)]).abs() > 3.0)
        .count();
    assert_eq!(bridges6, 0);
}

#[test]
fn blob_isomap_has_low_residual_variance() {
    let x = synth_dataset(SynthKind::TranslatingBlob, 100, 3, SynthOptions::default()).unwrap();
    assert_eq!((x.n(), x.d()), (100, 256));
    // 100 centers over 16x16 pixels are sparse: ten neighbors reach blobs that
    // no longer overlap, where image distance saturates
    let out = isomap(&x, 6, 2, false).unwrap();
    let rv = residual_variance(&out.geodesics, &out.embedding).unwrap();
    assert!(rv < 0.1, "residual variance {rv}");
}

#[test]
fn swiss_roll_leave_one_out_error_is_small() {
    let x = synth_dataset(SynthKind::SwissRoll, 200, 4, SynthOptions::default()).unwrap();
    let cfg = LooConfig { k: 6, ..LooConfig::default() };
    let full = isomap(&x, 6, 2, false).unwrap();
    let c = full.embedding.coords();
    let mut diameter: f64 = 0.0;
    for i in 0..200 {
        for j in 0..200 {
            diameter = diameter.max((c.row(i) - c.row(j)).norm());
        }
    }
    let report = leave_one_out(&x, &Mask::full(3), OoseMethod::Isomap, &cfg).unwrap();
    assert_eq!(report.metric, Metric::OoseError);
    assert!(report.value < 0.1 * diameter, "{} vs diameter {diameter}", report.value);

    let exact = LooConfig { exact_folds: true, ..cfg };
    let report2 = leave_one_out(&x, &Mask::full(3), OoseMethod::Isomap, &exact).unwrap();
    assert!(report2.value < 0.1 * diameter);
}

#[test]
fn lle_leave_one_out_reports() {
    let x = synth_dataset(SynthKind::TranslatingBlob, 60, 5, SynthOptions::default()).unwrap();
    let cfg = LooConfig { k: 8, ..LooConfig::default() };
    let a = build_secants(&x, &knn_graph(&x, cfg.k).unwrap()).unwrap();
    let mask = maps_global(&a, 64, Norm::L1).unwrap();
    let report = leave_one_out(&x, &mask, OoseMethod::Lle, &cfg).unwrap();
    assert_eq!(report.metric, Metric::OoseEmbeddingError);
    assert_eq!((report.m, report.k, report.l), (64, 8, 2));
    assert!(report.value.is_finite() && report.value >= 0.0);
}

#[test]
fn gaze_maps_local_beats_random_at_quarter_mask() {
    let x = synth_dataset(SynthKind::TranslatingBlob, 150, 8, SynthOptions::default()).unwrap();
    let cfg = LooConfig { k: 6, ..LooConfig::default() };
    let m = x.d() / 4;
    let b = build_clique_array(&x, &knn_graph(&x, cfg.k).unwrap()).unwrap();
    let local = leave_one_out(&x, &maps_local(&b, m).unwrap(), OoseMethod::Gaze, &cfg).unwrap();
    let randoms: Vec<f64> = (0..10)
        .map(|s| {
            leave_one_out(&x, &random_mask(x.d(), m, s).unwrap(), OoseMethod::Gaze, &cfg)
                .unwrap()
                .value
        })
        .collect();
    let mean = randoms.iter().sum::<f64>() / randoms.len() as f64;
    assert!(local.value <= mean, "maps_local {} vs random mean {mean}", local.value);
}

#[test]
fn masked_blob_keeps_structure_better_than_pcoa() {
    let x = synth_dataset(SynthKind::TranslatingBlob, 120, 2, SynthOptions::default()).unwrap();
    let full = isomap(&x, 10, 2, false).unwrap();
    let a = build_secants(&x, &full.graph).unwrap();
    let score = |mask: &Mask| {
        let xm = apply_mask(&x, mask).unwrap();
        let out = isomap(&xm, 10, 2, true).unwrap();
        if out.kept.len() < x.n() {
            return 1.0;
        }
        residual_variance(&full.geodesics, &out.embedding).unwrap()
    };
    let g = score(&maps_global(&a, 48, Norm::L1).unwrap());
    let p = score(&pcoa(&x, 48).unwrap());
    assert!(g <= p, "maps_global {g} vs pcoa {p}");
}

#[test]
fn datasets_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let x = synth_dataset(SynthKind::TranslatingBlob, 12, 1, SynthOptions { grid: 5, radius: 1.5 }).unwrap();

    let csv = dir.path().join("blob.csv");
    let meta = dir.path().join("blob.meta");
    write_csv_dataset(&x, &csv, Some(&meta)).unwrap();
    let back = load_dataset(&csv, DataFormat::Csv, Some(&meta)).unwrap();
    assert_eq!(back.values(), x.values());
    assert_eq!(back.image_shape(), Some((5, 5)));
    assert_eq!(back.params(), x.params());

    let bin = dir.path().join("blob.bin");
    write_binary_dataset(&x, &bin).unwrap();
    let back = load_dataset(&bin, DataFormat::F64LeBinary, None).unwrap();
    assert_eq!(back.values(), x.values());

    let (text, _) = dataset_to_csv(&x);
    let (n, cols, _) = parse_csv(&text).unwrap();
    assert_eq!((n, cols), (12, 27));
}

#[test]
fn malformed_inputs_map_to_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3\n").unwrap();
    let err = load_dataset(&bad, DataFormat::Csv, None).unwrap_err();
    assert!(matches!(err, Error::Format(_)));
    assert_eq!(err.exit_code(), 1);

    std::fs::write(&bad, "1,2\n3,NaN\n").unwrap();
    assert_eq!(load_dataset(&bad, DataFormat::Csv, None).unwrap_err().exit_code(), 1);

    std::fs::write(&bad, "1,2,3,4\n5,6,7,8\n").unwrap();
    let meta = dir.path().join("bad.meta");
    std::fs::write(&meta, "image_shape=[2,2]\nparam_cols=[2,4]\n").unwrap();
    let err = load_dataset(&bad, DataFormat::Csv, Some(&meta)).unwrap_err();
    assert!(matches!(err, Error::Metadata(_)), "{err:?}");

    let missing = dir.path().join("nope.csv");
    assert!(matches!(load_dataset(&missing, DataFormat::Csv, None), Err(Error::Io { .. })));

    let dup = DataMatrix::from_rows(&[[0.0, 1.0], [0.0, 1.0], [2.0, 2.0]]).unwrap();
    let err = build_secants(&dup, &knn_graph(&dup, 1).unwrap()).unwrap_err();
    assert!(matches!(err, Error::ZeroSecant(0, 1)));
    assert_eq!(err.exit_code(), 1);
}
