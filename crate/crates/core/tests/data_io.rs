mod common;

use std::io::Write;

use aecm_core::baselines::{em_gmm, kmeans_pp_init, lloyd, CovarianceKind, EmConfig, GmmInit};
use aecm_core::data::*;
use aecm_core::metrics::ari;
use aecm_core::{Error, Matrix, Rng};
use common::*;

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::File::create(&path).unwrap().write_all(text.as_bytes()).unwrap();
    path
}

#[test]
fn csv_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = Rng::new(1);
    let mut x = uniform(&mut rng, 40, 3, -1e3, 1e3);
    x[(0, 0)] = 1e-300;
    x[(1, 1)] = -0.1 - 0.2;
    x[(2, 2)] = f64::MAX;
    let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
    let path = dir.path().join("x.csv");
    save_csv(&path, &x, Some(&labels), None).unwrap();
    let back = load_csv::<f64>(&path, false, Some(3)).unwrap();
    assert_eq!(back.features.as_slice().len(), x.as_slice().len());
    for (a, b) in back.features.as_slice().iter().zip(x.as_slice()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(back.labels.unwrap(), labels);
    assert_eq!(back.name, "x");
}

#[test]
fn csv_header_and_label_remapping() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(&dir, "t.csv", "a,b,class\n1,2,7\n3,4,-1\n5,6,7\n");
    let ds = load_csv::<f64>(&path, true, Some(2)).unwrap();
    assert_eq!(ds.features, Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap());
    assert_eq!(ds.labels.unwrap(), vec![1, 0, 1]);
}

#[test]
fn csv_errors_are_classified_as_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let ragged = write(&dir, "r.csv", "1,2\n3\n");
    match load_csv::<f64>(&ragged, false, None) {
        Err(e @ Error::RaggedRow { row: 2, found: 1, expected: 2, .. }) => assert!(e.is_data_error()),
        other => panic!("{other:?}"),
    }
    let text = write(&dir, "n.csv", "1,2\n3,x\n");
    match load_csv::<f64>(&text, false, None) {
        Err(Error::NonNumeric { row: 2, col: 1, cell, .. }) => assert_eq!(cell, "x"),
        other => panic!("{other:?}"),
    }
    let empty = write(&dir, "e.csv", "");
    assert!(matches!(load_csv::<f64>(&empty, false, None), Err(Error::EmptyInput)));
    let missing = dir.path().join("missing.csv");
    assert!(matches!(load_csv::<f64>(&missing, false, None), Err(Error::Io { .. })));
    let frac = write(&dir, "f.csv", "1,0.5\n");
    assert!(load_csv::<f64>(&frac, false, Some(1)).unwrap_err().is_data_error());
}

#[test]
fn five_gaussian_component_means() {
    let ds = gen_five_gaussians(10_000, 4).unwrap();
    let y = ds.labels.unwrap();
    for (c, m) in FIVE_GAUSSIAN_MEANS.iter().enumerate() {
        let rows: Vec<&[f64]> = (0..ds.features.rows()).filter(|&i| y[i] == c).map(|i| ds.features.row(i)).collect();
        assert_eq!(rows.len(), 2000);
        for j in 0..2 {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
            assert!((mean - m[j]).abs() < 0.1, "component {c} coord {j}: {mean}");
        }
    }
}

#[test]
fn five_gaussians_are_recoverable_by_a_mixture() {
    let ds = gen_five_gaussians(2000, 6).unwrap();
    let r = em_gmm(
        &ds.features,
        5,
        CovarianceKind::Isotropic,
        GmmInit::KmeansPlusPlus,
        EmConfig::default(),
        &mut Rng::new(0),
    )
    .unwrap();
    assert!(ari(ds.labels.as_ref().unwrap(), &r.labels()).unwrap() >= 0.9);
}

#[test]
fn blobs_are_separable_by_kmeans() {
    let ds = gen_toy(ToyKind::Blobs, 600, None, 2).unwrap();
    let init = kmeans_pp_init(&ds.features, 3, &mut Rng::new(1)).unwrap();
    let r = lloyd(&ds.features, &init, 300, 1e-10).unwrap();
    assert_eq!(ari(ds.labels.as_ref().unwrap(), &r.labels).unwrap(), 1.0);
}

#[test]
fn noiseless_circles_sit_on_their_radii() {
    let ds = gen_toy(ToyKind::Circles, 301, Some(0.0), 0).unwrap();
    let y = ds.labels.unwrap();
    for (r, &l) in ds.features.row_iter().zip(&y) {
        let radius = (r[0] * r[0] + r[1] * r[1]).sqrt();
        let want = if l == 0 { 1.0 } else { 0.5 };
        assert!((radius - want).abs() < 1e-12);
    }
    assert_eq!(y.iter().filter(|&&l| l == 1).count(), 151);
}

#[test]
fn generators_are_deterministic_per_seed() {
    for kind in ToyKind::ALL {
        let a = gen_toy(kind, 50, None, 9).unwrap();
        let b = gen_toy(kind, 50, None, 9).unwrap();
        let c = gen_toy(kind, 50, None, 10).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels.as_ref().unwrap().len(), 50);
        assert_ne!(a.features, c.features, "{}", kind.name());
        assert_eq!(kind.name().parse::<ToyKind>().unwrap(), kind);
    }
    assert_eq!(gen_five_gaussians(100, 3).unwrap().features, gen_five_gaussians(100, 3).unwrap().features);
}

#[test]
fn minmax_maps_columns_onto_unit_interval() {
    let x = Matrix::from_rows(&[[1.0, 5.0, -2.0], [3.0, 5.0, 0.0], [2.0, 5.0, 2.0]]).unwrap();
    let m = minmax_normalize(&x);
    assert_eq!(m, Matrix::from_rows(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.5], [0.5, 0.0, 1.0]]).unwrap());
}

#[test]
fn bundled_tables_have_expected_shapes() {
    for (name, n, d, k) in [("iris", 150, 4, 3), ("wine", 178, 13, 3), ("pendigits", 10992, 16, 10)] {
        let ds = bundled_by_name(name).unwrap();
        assert_eq!((ds.n(), ds.d()), (n, d), "{name}");
        let y = ds.labels.unwrap();
        assert_eq!(y.iter().max().unwrap() + 1, k);
    }
    assert!(bundled_by_name("mnist").is_none());
}

fn idx_files(dir: &tempfile::TempDir, n: u32, labels_n: u32, magic: u32) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut img = Vec::new();
    for v in [magic, n, 2, 3] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend((0..n * 6).map(|i| (i * 51 % 256) as u8));
    let mut lab = Vec::new();
    for v in [2049u32, labels_n] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend((0..labels_n).map(|i| (i % 10) as u8));
    let ip = dir.path().join("img.idx");
    let lp = dir.path().join("lab.idx");
    std::fs::write(&ip, img).unwrap();
    std::fs::write(&lp, lab).unwrap();
    (ip, lp)
}

#[test]
fn idx_reader() {
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = idx_files(&dir, 4, 4, 2051);
    let ds = load_idx::<f64>(&ip, &lp).unwrap();
    assert_eq!((ds.n(), ds.d()), (4, 6));
    assert_eq!(ds.features[(0, 1)], 51.0 / 255.0);
    assert_eq!(ds.features[(1, 0)], (6 * 51 % 256) as f64 / 255.0);
    assert_eq!(ds.labels.unwrap(), vec![0, 1, 2, 3]);

    let (ip, lp) = idx_files(&dir, 4, 3, 2051);
    assert!(matches!(load_idx::<f64>(&ip, &lp), Err(Error::LengthMismatch(4, 3))));
    let (ip, lp) = idx_files(&dir, 4, 4, 7);
    assert!(matches!(load_idx::<f64>(&ip, &lp), Err(Error::Format { .. })));
}
