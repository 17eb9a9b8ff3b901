use embedscope::analysis::{CompressionCurve, CurvePoint, Scenario};
use embedscope::io::*;
use embedscope::report::{CompressionCurves, ReportInputs};
use embedscope::{AnalysisReport, EmbeddingDataset, Error, Payload};
use std::fs;

fn sample() -> EmbeddingDataset {
    EmbeddingDataset::from_rows(
        "sample",
        &[
            vec![0.1, 0.2, 0.3],
            vec![-1.0, f64::MIN_POSITIVE, 1e300],
            vec![4.0, 5.0, 6.0],
        ],
        vec![0, 1, 0],
        2,
    )
    .unwrap()
}

#[test]
fn dataset_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sample.embd");
    write_dataset(&path, &sample()).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back, sample());
    assert_eq!(fs::metadata(&path).unwrap().len(), 24 + 3 * 3 * 8 + 3 * 4);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = read_dataset("/nonexistent/x.embd").unwrap_err();
    assert!(matches!(err, Error::Io(_)));
}

#[test]
fn csv_ingest_maps_labels_in_first_appearance_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reviews.csv");
    fs::write(
        &path,
        "f0,label,f1\n1.0,pos,2\n3,neg,4\n5,pos,6.5\n7,neutral,8\n",
    )
    .unwrap();
    let (data, map) = read_csv_dataset(&path, "label").unwrap();
    assert_eq!(map, vec!["pos", "neg", "neutral"]);
    assert_eq!(data.labels(), &[0, 1, 0, 2]);
    assert_eq!(data.class_count(), 3);
    assert_eq!(data.n_dims(), 2);
    assert_eq!(data.embeddings()[(2, 1)], 6.5);
    assert_eq!(data.name(), "reviews");
}

#[test]
fn csv_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let cases = [
        ("a,b\n1,2\n", "missing label column"),
        ("a,label\n1,x\n2\n", "row 3 has 1 fields"),
        ("a,label\n1,x\nfoo,y\n", "`foo` is not a number"),
        ("a,label\n", "no data rows"),
    ];
    for (text, needle) in cases {
        fs::write(&path, text).unwrap();
        let err = read_csv_dataset(&path, "label").unwrap_err();
        assert!(matches!(err, Error::Csv { .. }), "{err}");
        assert!(err.to_string().contains(needle), "{err} lacks {needle}");
    }
}

#[test]
fn csv_with_one_class_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    fs::write(&path, "a,label\n1,x\n2,x\n").unwrap();
    assert!(matches!(
        read_csv_dataset(&path, "label"),
        Err(Error::InvalidDataset(_))
    ));
}

#[test]
fn report_file_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let curve = CompressionCurve {
        scenario: Scenario::PcaInDomain,
        pca_source: Some("train".into()),
        points: vec![CurvePoint {
            k: 3,
            mean_accuracy: 0.1 + 0.2,
            std: 1.0 / 3.0,
        }],
    };
    let report = AnalysisReport::new(
        ReportInputs {
            datasets: vec!["train".into(), "test".into()],
            seeds: vec![u64::MAX],
            ..Default::default()
        },
        Payload::CompressionCurves(CompressionCurves {
            curves: vec![curve],
        }),
    );
    write_report(&path, &report).unwrap();
    let back = read_report(&path).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.to_json().unwrap(), fs::read_to_string(&path).unwrap());
}
