use rba::io::{
    read_column_csv, read_json, read_labelled_csv, read_predictions_csv, write_column_csv, write_json,
    write_labelled_csv, write_predictions_csv, LabelledData,
};
use rba::methods::{fit_method, FitSettings, Method, ModelFile};
use rba::rba_core::{ClipBounds, Dataset, KernelSpec, Matrix, PredictionMatrix, Predictor, TrainConfig};

fn small() -> Dataset {
    let x = Matrix::from_rows(&[[0.5, -1.25], [1.0, 2.0], [-3.0, 0.125], [0.0, 1e-3], [2.5, -0.75]]).unwrap();
    Dataset::new(x, vec![0, 2, 1, 2, 0], 3).unwrap()
}

#[test]
fn labelled_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let mut data = LabelledData::unnamed(small());
    data.feature_names = vec!["height".into(), "width".into()];
    data.label_names = vec!["1".into(), "5".into(), "10".into()];
    write_labelled_csv(&path, &data, "class").unwrap();
    let back = read_labelled_csv(&path, "class", None).unwrap();
    assert_eq!(back, data);
}

#[test]
fn known_labels_fix_the_class_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "x,label\n1,cat\n2,dog\n").unwrap();
    let order = vec!["dog".to_string(), "cat".to_string(), "emu".to_string()];
    let d = read_labelled_csv(&path, "label", Some(&order)).unwrap();
    assert_eq!(d.dataset.labels(), &[1, 0]);
    assert_eq!(d.dataset.class_count(), 3);
    std::fs::write(&path, "x,label\n1,yak\n").unwrap();
    assert!(read_labelled_csv(&path, "label", Some(&order)).is_err());
}

#[test]
fn bad_cells_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "x,label\nNaN,0\n").unwrap();
    assert!(read_labelled_csv(&path, "label", None).is_err());
    std::fs::write(&path, "x,label\n1,0\n").unwrap();
    assert!(read_labelled_csv(&path, "y", None).is_err());
}

#[test]
fn column_and_prediction_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let col = dir.path().join("r.csv");
    let values = vec![0.1, 3.0, 1e-3, 1e3, 0.333_333_333_333_333_3];
    write_column_csv(&col, "ratio", &values).unwrap();
    assert_eq!(read_column_csv(&col).unwrap(), values);

    let probs = Matrix::from_rows(&[[0.2, 0.3, 0.5], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]]).unwrap();
    let preds = PredictionMatrix::new(probs).unwrap();
    let names = vec!["a".to_string(), "b".into(), "c".into()];
    let p = dir.path().join("p.csv");
    write_predictions_csv(&p, &preds, &names).unwrap();
    let (back, back_names) = read_predictions_csv(&p).unwrap();
    assert_eq!(back_names, names);
    assert_eq!(back, preds);
}

#[test]
fn model_files_round_trip_for_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let data = small();
    let ratios = vec![0.5, 1.0, 2.0, 1.5, 0.8];
    let settings = FitSettings {
        kernel: KernelSpec::gaussian(1.0),
        clip: ClipBounds::default(),
        train: TrainConfig::default(),
    };
    for m in Method::ALL.into_iter().chain([Method::Uniform]) {
        let (model, _) = fit_method(m, &data, &ratios, 0.1, &settings).unwrap();
        let file = ModelFile {
            model,
            label_names: vec!["a".into(), "b".into(), "c".into()],
            feature_names: vec!["x0".into(), "x1".into()],
        };
        let path = dir.path().join(format!("{m}.json"));
        write_json(&path, &file).unwrap();
        let back: ModelFile = read_json(&path).unwrap();
        assert_eq!(back, file, "{m}");
        assert_eq!(back.model.method(), m);
        let x = [0.3, -0.2];
        assert_eq!(back.model.predict_proba(&x, 0.7).unwrap(), file.model.predict_proba(&x, 0.7).unwrap());
    }
}
