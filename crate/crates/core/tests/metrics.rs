use laionc_core::metrics::{
    accuracy_table, best_observers, error_consistency, laion_c_score, read_logs, GroupBy, Observation, ObservationLog,
};
use laionc_core::{CorruptionKind, SeedStream, Severity, Taxonomy};

/// Every (kind, severity) cell gets `per_cell` trials; accuracy in a cell is
/// `base + 0.02 * level` with per-trial coin flips from `seed`.
fn simulated(observer: &str, seed: u64, base: f64, per_cell: usize) -> ObservationLog {
    let tax = Taxonomy::builtin();
    let classes = tax.superclasses();
    let mut s = SeedStream::for_purpose(seed, "metrics-test");
    let mut log = ObservationLog::new(observer);
    for kind in CorruptionKind::ALL {
        for sev in Severity::all() {
            for i in 0..per_cell {
                let truth = &classes[i % classes.len()];
                let p = base + 0.02 * sev.level() as f64;
                let response = if s.next_f64() < p { truth.clone() } else { "none".to_string() };
                log.records.push(Observation {
                    image_id: format!("img{i}"),
                    superclass_true: truth.clone(),
                    superclass_response: response,
                    corruption: kind,
                    severity: sev,
                    response_time_ms: Some(500 + i as u32),
                });
            }
        }
    }
    log
}

#[test]
fn logs_round_trip_through_csv_and_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulated("human-1", 1, 0.5, 8);
    let b = simulated("model \"x\", v2", 2, 0.3, 8);
    for name in ["logs.csv", "logs.jsonl"] {
        let path = dir.path().join(name);
        let mut text = Vec::new();
        for l in [&a, &b] {
            if name.ends_with(".csv") {
                l.write_csv(&mut text).unwrap();
            } else {
                l.write_jsonl(&mut text).unwrap();
            }
        }
        if name.ends_with(".csv") {
            // Keep only the first header line when concatenating CSV output.
            let s = String::from_utf8(text).unwrap();
            let mut lines = s.lines();
            let header = lines.next().unwrap().to_string();
            let body: Vec<&str> = lines.filter(|l| *l != header).collect();
            text = format!("{header}\n{}\n", body.join("\n")).into_bytes();
        }
        std::fs::write(&path, text).unwrap();
        let read = read_logs(&path).unwrap();
        assert_eq!(read, vec![a.clone(), b.clone()], "{name}");
    }
}

#[test]
fn headline_score_is_the_mean_of_cell_means() {
    let tax = Taxonomy::builtin();
    let log = simulated("obs", 9, 0.4, 20).validated(&tax).unwrap();
    let cells = accuracy_table(&log, GroupBy::Both).unwrap();
    assert_eq!(cells.groups.len(), 30);
    let mut brute = 0.0;
    for kind in CorruptionKind::ALL {
        let per_kind: f64 = Severity::all().map(|s| cells.get(Some(kind), Some(s)).unwrap()).sum::<f64>() / 5.0;
        brute += per_kind / 6.0;
    }
    let score = laion_c_score(&log).unwrap();
    assert!((score.overall.unwrap() - brute).abs() < 1e-12);

    // With equal cell sizes the pooled accuracy equals the headline score.
    let pooled = accuracy_table(&log, GroupBy::None).unwrap().get(None, None).unwrap();
    assert!((pooled - brute).abs() < 1e-12);
}

#[test]
fn best_observer_and_independent_kappa() {
    let tax = Taxonomy::builtin();
    let strong = simulated("strong", 3, 0.7, 60).validated(&tax).unwrap();
    let weak = simulated("weak", 4, 0.2, 60).validated(&tax).unwrap();
    let best = best_observers(&[weak.clone(), strong.clone()]).unwrap();
    assert_eq!(best.global.unwrap().0, "strong");
    assert!(best.per_cell.values().filter(|(id, _)| id == "strong").count() >= 28);

    let ec = error_consistency(&strong, &weak).unwrap();
    assert_eq!(ec.shared_trials, 30 * 60);
    assert!(ec.kappa.value().unwrap().abs() < 0.06, "{ec:?}");
}
