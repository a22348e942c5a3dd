use std::collections::BTreeSet;
use std::path::PathBuf;

use pathnat_core::baselines::{BaselineKind, BaselineScorer};
use pathnat_core::dataset::{build_questionnaire, default_qc_good_paths, sample_pairs, Choice, Judgment};
use pathnat_core::eval::{avg_entropy, collect_ps_paths, parse_analogies, AnalogySolver};
use pathnat_core::model::TrainingConfig;
use pathnat_core::pipeline::{judged_accuracy, train_on_judgments, NaturalnessModel, Resources};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn world() -> Resources {
    Resources::load(
        data("world/edges.tsv"),
        data("world/vectors.txt"),
        None,
        Some(&data("world/senses.tsv")),
    )
    .unwrap()
}

#[test]
fn fixture_loads_and_every_concept_has_a_vector() {
    let r = world();
    assert!(r.graph.concept_count() > 50);
    for c in r.graph.concepts() {
        assert!(!r.table.lookup(c).oov, "{c}");
    }
}

#[test]
fn sampled_paths_are_valid_and_reproducible() {
    let r = world();
    let a = r.graph.sample_paths(None, 4, 60, 7).unwrap();
    let b = r.graph.sample_paths(None, 4, 60, 7).unwrap();
    assert_eq!(a, b);
    for p in &a {
        r.graph.validate_path(p, 4).unwrap();
    }
    let distinct: BTreeSet<_> = a.iter().collect();
    assert_eq!(distinct.len(), a.len());
}

#[test]
fn questionnaire_from_world_paths() {
    let r = world();
    let paths = r.graph.sample_paths(None, 4, 40, 1).unwrap();
    let pairs = sample_pairs(&paths, 100, 2, "p").unwrap();
    let q = build_questionnaire(&pairs, &default_qc_good_paths(), &r.graph, 3).unwrap();
    assert_eq!(q.items.len(), 73);
}

#[test]
fn short_training_run_end_to_end() {
    let r = world();
    let paths = r.graph.sample_paths(None, 4, 40, 11).unwrap();
    let pairs = sample_pairs(&paths, 200, 12, "p").unwrap();
    // judge by a simple rule: the shorter path wins, ties go to the first
    let judgments: Vec<Judgment> = pairs
        .iter()
        .map(|p| Judgment {
            pair_id: p.id.clone(),
            choice: if p.second.node_count() < p.first.node_count() { Choice::Second } else { Choice::First },
            annotator: "rule".into(),
            ts: 0,
        })
        .collect();
    let config = TrainingConfig {
        epochs: 15,
        feature_len: 8,
        code_len: 4,
        embedding_dim: Some(5),
        seed: 4,
        ..Default::default()
    };
    let (model, log) = train_on_judgments(&r, &pairs, &judgments, Some((&pairs, &judgments)), &config).unwrap();
    assert_eq!(log.epochs.len(), 15);
    assert!(log.epochs.last().unwrap().loss < log.epochs[0].loss);

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("m.ckpt");
    model.save(&file).unwrap();
    let back = NaturalnessModel::load(&file).unwrap();
    assert_eq!(back, model);
    let s1 = model.scorer(&r).unwrap();
    let s2 = back.scorer(&r).unwrap();
    for p in &paths {
        assert_eq!(s1.score(p).unwrap().to_bits(), s2.score(p).unwrap().to_bits());
    }
    let acc = judged_accuracy(&pairs, &judgments, |p| s1.score(p)).unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let length = BaselineScorer { graph: &r.graph, table: &r.table, seed: 0 };
    let base = judged_accuracy(&pairs, &judgments, |p| length.score(BaselineKind::Length, p)).unwrap();
    assert!(base > 0.6);
}

#[test]
fn ps_paths_and_analogies_on_world() {
    let r = world();
    let recs = collect_ps_paths(&r.graph, None, 4, 20, 5).unwrap();
    assert!(recs.len() >= 20);
    let flat: Vec<f64> = vec![0.0; recs.len()];
    assert!(avg_entropy(&recs, &flat, 100.0).unwrap() >= 0.0);

    let questions = parse_analogies(&std::fs::read_to_string(data("world/analogies.txt")).unwrap()).unwrap();
    assert_eq!(questions.len(), 10);
    let flat = |_: &pathnat_core::graph::Path| Ok(0.0);
    let solver = AnalogySolver { graph: &r.graph, score: &flat };
    let (acc, answered) = solver.accuracy(&questions, 100.0).unwrap();
    assert!(answered > 0);
    assert!(acc > 0.25, "{acc}");
}
