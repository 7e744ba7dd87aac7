use mcstfa::aecm::{fit, FitConfig};
use mcstfa::init::{InitMethod, Linkage};
use mcstfa::io::{read_data_csv, read_labels, write_data_csv, write_labels, ModelFile};
use mcstfa::model::mixture_log_density;
use mcstfa::simulate::{simulate, SimSpec};
use nalgebra::DVector;

#[test]
fn model_file_reproduces_densities() {
    let sim = simulate(&SimSpec::replication(4)).unwrap();
    let cfg = FitConfig {
        init: InitMethod::Hierarchical(Linkage::Ward),
        epsilon: 0.05,
        ..FitConfig::default()
    };
    let res = fit(&sim.data, 4, 2, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    ModelFile::from_fit(&res, &cfg).save(&path).unwrap();
    let loaded = ModelFile::load(&path).unwrap();
    let params = loaded.to_params().unwrap();
    assert_eq!(loaded.fit.as_ref().unwrap().iterations, res.iterations);
    for i in (0..sim.data.n()).step_by(7) {
        let x = sim.data.row(i);
        let a = mixture_log_density(&x, &res.params).unwrap();
        let b = mixture_log_density(&x, &params).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "row {i}: {a} vs {b}");
    }
    let far = DVector::from_element(15, 250.0);
    let a = mixture_log_density(&far, &res.params).unwrap();
    let b = mixture_log_density(&far, &params).unwrap();
    assert!((a - b).abs() <= 1e-12 * a.abs());
}

#[test]
fn data_and_labels_round_trip() {
    let sim = simulate(&SimSpec::replication(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("data.csv");
    let label_path = dir.path().join("labels.csv");
    write_data_csv(&data_path, &sim.data).unwrap();
    write_labels(&label_path, &sim.labels).unwrap();
    let back = read_data_csv(&data_path).unwrap();
    assert_eq!(back.values(), sim.data.values());
    let labels = read_labels(&label_path).unwrap();
    let want: Vec<String> = sim.labels.iter().map(|l| (l + 1).to_string()).collect();
    assert_eq!(labels, want);
}
