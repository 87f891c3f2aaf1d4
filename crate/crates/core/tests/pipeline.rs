use elephant_core::ae::detect;
use elephant_core::eval::{cross_validate, ConfusionMatrix};
use elephant_core::ingest::{load_matrix, parse_csv, read_cache, write_cache, BadRowPolicy};
use elephant_core::models::{predict, train};
use elephant_core::synth::{separable_fixture, write_csv, FixtureConfig};
use elephant_core::{label_dataset, DatasetSchema, Family, FlowLabel, LabelingPolicy, ModelConfig, TrainedModel};

/// Ten percent elephants: the 90th-99th percentile thresholds can flag at most
/// a tenth of the rows.
fn fixture_csv() -> Vec<u8> {
    let m = separable_fixture(&FixtureConfig { rows: 400, features: 8, elephant_share: 0.1, seed: 21 }).unwrap();
    let mut buf = Vec::new();
    write_csv(&m, &mut buf).unwrap();
    buf
}

fn inferred(bytes: &[u8]) -> DatasetSchema {
    let header = elephant_core::ingest::read_header(bytes).unwrap();
    DatasetSchema::infer(&header.iter().map(String::as_str).collect::<Vec<_>>()).unwrap()
}

#[test]
fn csv_to_saved_model_and_back() {
    let bytes = fixture_csv();
    let data = load_matrix(&bytes, &inferred(&bytes), BadRowPolicy::FailFast).unwrap();
    assert_eq!((data.n_rows(), data.n_features()), (400, 8));

    let dir = tempfile::tempdir().unwrap();
    for family in Family::ALL {
        let cfg = ModelConfig { epochs: 50, batch_size: 32, ..ModelConfig::new(family, 8) };
        let path = dir.path().join(format!("{family}.json"));
        let predicted = if family.is_supervised() {
            let model = train(&cfg, &data).unwrap();
            model.save(&path).unwrap();
            let back = TrainedModel::load(&path).unwrap();
            let a: Vec<FlowLabel> = predict(&model, &data).unwrap().into_iter().map(|p| p.label).collect();
            let b: Vec<FlowLabel> = predict(&back, &data).unwrap().into_iter().map(|p| p.label).collect();
            assert_eq!(a, b);
            a
        } else {
            let (model, sweep) =
                elephant_core::ae::fit_ae_detector(&data, &cfg, &elephant_core::ae::DEFAULT_PERCENTILES).unwrap();
            assert_eq!(sweep.rows.len(), 10);
            model.save(&path).unwrap();
            let back = TrainedModel::load(&path).unwrap();
            assert_eq!(back.threshold, model.threshold);
            assert_eq!(detect(&model, &data).unwrap(), detect(&back, &data).unwrap());
            detect(&back, &data).unwrap()
        };
        let cm = ConfusionMatrix::from_labels(data.labels().unwrap(), &predicted).unwrap();
        assert!(cm.accuracy().unwrap() > 0.9, "{family}: {cm:?}");
    }
}

#[test]
fn cross_validation_covers_every_row_once() {
    let bytes = fixture_csv();
    let data = load_matrix(&bytes, &inferred(&bytes), BadRowPolicy::FailFast).unwrap();
    let cfg = ModelConfig { epochs: 5, ..ModelConfig::new(Family::Dnn, 8) };
    let report = cross_validate(&data, &cfg, 4).unwrap();
    assert_eq!(report.total.total(), 400);
    let (mice, elephants) = data.class_counts().unwrap();
    assert_eq!((report.total.tp + report.total.fn_) as usize, elephants);
    assert_eq!((report.total.tn + report.total.fp) as usize, mice);
}

#[test]
fn labeling_then_training_on_preset_layout() {
    let schema = DatasetSchema::preset("nims").unwrap().without_class();
    let mut text = schema.column_names().join(",") + "\n";
    for i in 0..60u64 {
        let elephant = i % 3 == 0;
        let (dur, pk, vol) = if elephant { (30.0 + i as f64, 40 + i, 60_000 + i * 100) } else { (0.5, 3, 400 + i) };
        let stats = (0..16).map(|s| ((s as u64 + i) % 7).to_string()).collect::<Vec<_>>().join(",");
        let proto = if i % 2 == 0 { "TCP" } else { "UDP" };
        text.push_str(&format!("{i},{stats},{dur},{proto},{pk},{vol},{pk},{vol}\n"));
    }
    let table = parse_csv(text.as_bytes(), &schema).unwrap();
    let labels = label_dataset(&table.flow_records().unwrap(), &LabelingPolicy::default());
    assert_eq!(labels.iter().filter(|l| l.is_elephant()).count(), 20);

    let mut labeled = Vec::new();
    let full = table.write_labeled(&labels, &mut labeled).unwrap();
    let data = load_matrix(&labeled, &full, BadRowPolicy::FailFast).unwrap();
    // 21 numeric columns plus two protocol indicators; the identifier is dropped.
    assert_eq!(data.n_features(), 23);
    assert_eq!(data.labels().unwrap(), labels.as_slice());

    let mut cache = Vec::new();
    write_cache(&mut cache, &data, &full.hash()).unwrap();
    let (back, hash) = read_cache(&cache[..], Some(&full.hash())).unwrap();
    assert_eq!(back, data);
    assert_eq!(hash, full.hash());

    let model = train(&ModelConfig { epochs: 30, batch_size: 16, ..ModelConfig::new(Family::Dnn, 23) }, &data).unwrap();
    let predicted: Vec<FlowLabel> = predict(&model, &data).unwrap().into_iter().map(|p| p.label).collect();
    let cm = ConfusionMatrix::from_labels(&labels, &predicted).unwrap();
    assert!(cm.accuracy().unwrap() > 0.9, "{cm:?}");
}
