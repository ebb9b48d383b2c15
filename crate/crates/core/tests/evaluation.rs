use lacuna::evaluation::{
    aggregate_runs, classification_accuracy, clustering_accuracy, mean_std, RunRecord,
};
use lacuna::Mechanism;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn labelling() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1usize..6, 1usize..6, 1usize..60).prop_flat_map(|(k, g, n)| {
        (
            proptest::collection::vec(0..k, n),
            proptest::collection::vec(0..g, n),
        )
    })
}

fn record() -> impl Strategy<Value = RunRecord> {
    (
        prop::sample::select(vec!["iris", "wine"]),
        prop::sample::select(Mechanism::ALL.to_vec()),
        prop::sample::select(vec![0.1, 0.25]),
        prop::sample::select(vec!["a", "b", "c"]),
        0u64..20,
        0.0f64..=1.0,
    )
        .prop_map(|(d, mech, f, method, seed, acc)| RunRecord {
            dataset: d.into(),
            mechanism: mech,
            fraction: f,
            method: method.into(),
            seed,
            accuracy: acc,
        })
}

proptest! {
    #[test]
    fn accuracy_ignores_relabelling((partition, truth) in labelling(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = clustering_accuracy(&partition, &truth).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));

        let mut cluster_ids: Vec<usize> = (0..6).collect();
        cluster_ids.shuffle(&mut rng);
        let mut class_ids: Vec<usize> = (0..6).collect();
        class_ids.shuffle(&mut rng);
        let p2: Vec<usize> = partition.iter().map(|&c| cluster_ids[c]).collect();
        let t2: Vec<usize> = truth.iter().map(|&g| class_ids[g]).collect();
        prop_assert!((clustering_accuracy(&p2, &t2).unwrap() - base).abs() < 1e-12);

        // The matching can never do worse than pairing cluster i with class i.
        let identity = partition.iter().zip(&truth).filter(|(c, g)| c == g).count() as f64 / truth.len() as f64;
        prop_assert!(base >= identity - 1e-12);
    }

    #[test]
    fn aggregation_ignores_record_order(records in proptest::collection::vec(record(), 1..80), seed in any::<u64>()) {
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(aggregate_runs(&records).unwrap(), aggregate_runs(&shuffled).unwrap());
    }
}

#[test]
fn relabelled_truth_scores_one() {
    let truth = vec!["a", "a", "b", "c", "c", "c"];
    assert_eq!(
        clustering_accuracy(&[2, 2, 0, 1, 1, 1], &truth).unwrap(),
        1.0
    );
    assert!(clustering_accuracy(&[0, 1], &truth).is_err());
    assert_eq!(
        classification_accuracy(&["x", "y"], &["x", "x"]).unwrap(),
        0.5
    );
}

#[test]
fn aggregate_uses_sample_std_and_flags_best() {
    let rec = |method: &str, acc: f64, seed: u64| RunRecord {
        dataset: "d".into(),
        mechanism: Mechanism::Mcar,
        fraction: 0.25,
        method: method.into(),
        seed,
        accuracy: acc,
    };
    let rows = aggregate_runs(&[
        rec("a", 0.7, 0),
        rec("a", 0.9, 1),
        rec("b", 0.6, 0),
        rec("b", 0.6, 1),
    ])
    .unwrap();
    assert_eq!(rows.len(), 2);
    let (mean, std) = mean_std(&[0.7, 0.9]);
    assert!((mean - 0.8).abs() < 1e-12 && (std - 0.02f64.sqrt()).abs() < 1e-12);
    assert_eq!(rows[0].cell(), "0.800±0.141");
    assert!(rows[0].best && !rows[1].best);
}
