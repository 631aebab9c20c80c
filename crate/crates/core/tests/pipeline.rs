use nalgebra::DMatrix;
use ntk_sketch::cntk_oracle::ImageTensor;
use ntk_sketch::cntk_sketch::CntkSketchState;
use ntk_sketch::features::{
    accuracy, batch_transform, batch_transform_serial, class_ids, classify, encode_labels, load_dataset,
    load_features, predict, read_images, ridge_fit, save_features, write_images, DatasetFormat, Dtype,
    FeatureMatrix, Provenance, Samples, SketchKind,
};
use ntk_sketch::ntk_sketch::{NtkSketchState, SketchConfig, SketchDims};
use ntk_sketch::sketch::SparseVector;
use proptest::prelude::*;

fn provenance() -> Provenance {
    Provenance {
        kind: SketchKind::Ntk,
        config_hash: "00".into(),
        seed: 0,
        labels: None,
    }
}

fn small_state(d: usize, seed: u64) -> NtkSketchState {
    let cfg = SketchConfig::new(2, 0.5, 0.1, seed)
        .unwrap()
        .with_degrees(2, 3)
        .with_dims(SketchDims::uniform(64));
    NtkSketchState::new(d, cfg).unwrap()
}

fn training_loss(z: &FeatureMatrix, y: &DMatrix<f64>, lambda: f64) -> f64 {
    let model = ridge_fit(z, y, lambda).unwrap();
    (predict(&model, z).unwrap() - y).norm_squared()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn encoded_labels_sum_to_zero(labels in prop::collection::vec(0usize..5, 1..40)) {
        let y = encode_labels(&labels, 5).unwrap();
        for row in y.row_iter() {
            prop_assert!(row.sum().abs() < 1e-12);
        }
        let picked: Vec<usize> = y.row_iter().map(|r| r.transpose().argmax().0).collect();
        prop_assert_eq!(picked, labels);
    }

    #[test]
    fn training_loss_falls_as_lambda_shrinks(
        data in prop::collection::vec(-1.0f64..1.0, 60), targets in prop::collection::vec(-1.0f64..1.0, 20)
    ) {
        let z = FeatureMatrix::new(20, 3, data, provenance()).unwrap();
        let y = DMatrix::from_column_slice(20, 1, &targets);
        let losses: Vec<f64> = [10.0, 1.0, 0.3, 0.03, 0.01].iter().map(|&l| training_loss(&z, &y, l)).collect();
        for w in losses.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12, "{:?}", losses);
        }
    }

    #[test]
    fn feature_files_round_trip(
        data in prop::collection::vec(-1e3f64..1e3, 12), seed in any::<u64>(),
        labels in prop::option::of(prop::collection::vec(0.0f64..3.0, 4))
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.feat");
        let mut prov = provenance();
        prov.seed = seed;
        prov.labels = labels;
        let fm = FeatureMatrix::new(4, 3, data, prov).unwrap();
        save_features(&path, &fm, Dtype::F64).unwrap();
        prop_assert_eq!(&load_features(&path).unwrap(), &fm);
        save_features(&path, &fm, Dtype::F32).unwrap();
        let back = load_features(&path).unwrap();
        prop_assert_eq!(&back.provenance, &fm.provenance);
        for (a, b) in back.data().iter().zip(fm.data()) {
            prop_assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn ntk_features_are_positively_homogeneous(
        x in prop::collection::vec(-1.0f64..1.0, 6).prop_filter("nonzero", |v| v.iter().any(|a| a.abs() > 1e-3)),
        c in 0.01f64..100.0, seed in 0u64..4
    ) {
        let st = small_state(6, seed);
        let a = st.transform(&x).unwrap();
        let xc: Vec<f64> = x.iter().map(|v| v * c).collect();
        let b = st.transform(&xc).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((c * u - v).abs() <= 1e-9 * (1.0 + v.abs()));
        }
    }
}

#[test]
fn parallel_and_serial_batches_are_identical() {
    let st = small_state(5, 1);
    let data: Vec<Vec<f64>> = (0..17).map(|i| (0..5).map(|j| ((i * 5 + j) as f64).cos()).collect()).collect();
    let a = batch_transform(&st, &data).unwrap();
    assert_eq!(a, batch_transform_serial(&st, &data).unwrap());
    let sparse: Vec<SparseVector> = data.iter().map(|v| SparseVector::from_dense(v)).collect();
    assert_eq!(a.data(), batch_transform(&st, &sparse).unwrap().data());
    assert_eq!(a.provenance.kind, SketchKind::Ntk);
    assert_eq!(a.provenance.config_hash.len(), 16);
}

#[test]
fn cntk_batches_and_image_files() {
    let imgs: Vec<ImageTensor> = (0..4)
        .map(|k| ImageTensor::new(3, 3, 2, (0..18).map(|v| ((v + 3 * k) as f64 * 0.4).sin()).collect()).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("imgs.bin");
    write_images(&path, &imgs, Some(&[0.0, 1.0, 1.0, 0.0]), Dtype::F64).unwrap();
    let (back, labels) = read_images(&path).unwrap();
    assert_eq!(back, imgs);
    assert_eq!(labels.unwrap(), vec![0.0, 1.0, 1.0, 0.0]);

    let cfg = SketchConfig::for_cntk(2, 0.5, 0.1, 4, 3, 3, 32)
        .unwrap()
        .with_degrees(1, 2)
        .with_dims(SketchDims::uniform(32));
    let st = CntkSketchState::new(3, 3, 2, 3, cfg).unwrap();
    let fm = batch_transform(&st, &imgs).unwrap();
    assert_eq!((fm.rows(), fm.cols()), (4, 32));
    assert_eq!(fm.provenance.kind, SketchKind::Cntk);
    assert_eq!(fm, batch_transform_serial(&st, &imgs).unwrap());
}

#[test]
fn datasets_load_and_separable_data_is_learned() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let mut csv = String::from("a,b,bias,y\n");
    for k in 0..80 {
        let class = k % 2;
        let t = k as f64 * 0.21;
        let x = if class == 0 { -1.0 } else { 1.0 } + 0.3 * t.sin();
        csv.push_str(&format!("{x},{},1,{class}\n", 0.5 * t.cos()));
    }
    std::fs::write(&path, csv).unwrap();
    let ds = load_dataset(&path, DatasetFormat::Csv).unwrap();
    let Samples::Dense(rows) = &ds.samples else { panic!("dense CSV expected") };
    assert_eq!(rows.len(), 80);

    let cfg = SketchConfig::new(1, 0.5, 0.1, 2)
        .unwrap()
        .with_degrees(2, 4)
        .with_dims(SketchDims { s_star: 128, ..SketchDims::uniform(512) });
    let st = NtkSketchState::new(3, cfg).unwrap();
    let z = batch_transform(&st, rows).unwrap();
    let truth = class_ids(&ds.labels).unwrap();
    let model = ridge_fit(&z, &encode_labels(&truth, 2).unwrap(), 0.01).unwrap();
    assert_eq!(accuracy(&classify(&model, &z).unwrap(), &truth), 1.0);
}

#[test]
fn interpolation_with_tiny_lambda() {
    let z = FeatureMatrix::new(3, 3, vec![2.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 3.0], provenance()).unwrap();
    let y = DMatrix::from_row_slice(3, 1, &[1.0, -2.0, 0.5]);
    let model = ridge_fit(&z, &y, 1e-12).unwrap();
    assert!((predict(&model, &z).unwrap() - &y).amax() < 1e-8);
}
