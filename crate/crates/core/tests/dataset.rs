use std::io::Cursor;

use covisloop::harness::{
    load_dataset, load_reports, parse_dataset, run_online, save_dataset, save_reports, DatasetError,
};
use covisloop::{DetectionParams, KeyframeRecord, Scenario};

fn records() -> Vec<KeyframeRecord> {
    Scenario::single_loop().generate(0).unwrap().keyframes().to_vec()
}

fn lines(recs: &[KeyframeRecord]) -> Vec<String> {
    recs.iter().map(|r| serde_json::to_string(r).unwrap()).collect()
}

#[test]
fn dataset_round_trips_exactly() {
    let recs = records();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kf.jsonl");
    save_dataset(&recs, &path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back, recs);
}

#[test]
fn malformed_line_is_reported_by_number() {
    let mut text = lines(&records()[..3]);
    text.insert(2, "{\"id\": oops}".into());
    match parse_dataset(Cursor::new(text.join("\n"))) {
        Err(DatasetError::MalformedRecord { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a malformed record, got {other:?}"),
    }
}

#[test]
fn ids_must_increase() {
    let recs = records();
    let text = lines(&[recs[0].clone(), recs[2].clone(), recs[1].clone()]).join("\n");
    match parse_dataset(Cursor::new(text)) {
        Err(DatasetError::MalformedRecord { line, message }) => {
            assert_eq!(line, 3);
            assert!(message.contains("does not increase"), "{message}");
        }
        other => panic!("expected an ordering error, got {other:?}"),
    }
}

#[test]
fn invalid_record_is_rejected() {
    let mut rec = records()[0].clone();
    rec.frame_bow = covisloop::BowVector::new();
    let text = serde_json::to_string(&rec).unwrap();
    assert!(matches!(
        parse_dataset(Cursor::new(text)),
        Err(DatasetError::MalformedRecord { line: 1, .. })
    ));
}

#[test]
fn blank_lines_are_skipped() {
    let text = lines(&records()[..2]).join("\n\n") + "\n";
    assert_eq!(parse_dataset(Cursor::new(text)).unwrap().len(), 2);
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_dataset(&dir.path().join("absent.jsonl")),
        Err(DatasetError::Io { .. })
    ));
}

#[test]
fn reports_round_trip_exactly() {
    let recs = records();
    let reports = run_online(&recs, &DetectionParams::default()).unwrap().reports();
    assert!(!reports.is_empty());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reports.json");
    save_reports(&reports, &path).unwrap();
    assert_eq!(load_reports(&path).unwrap(), reports);
}
