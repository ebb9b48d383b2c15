mod common;

use lacuna::dataset::{column_stats, read_csv, LabelColumn, LoadOptions};
use lacuna::imputation::{impute_knn, impute_mean, impute_zero};
use lacuna::{zscore_normalize, ObservedTable};
use proptest::prelude::*;

fn table_strategy() -> impl Strategy<Value = ObservedTable> {
    (1usize..6, 1usize..25).prop_flat_map(|(m, n)| {
        let cell = prop_oneof![
            3 => (-1e6f64..1e6).prop_map(Some),
            1 => Just(None),
        ];
        proptest::collection::vec(proptest::collection::vec(cell, m), n).prop_map(
            move |mut rows| {
                for row in &mut rows {
                    if row.iter().all(Option::is_none) {
                        row[0] = Some(1.0);
                    }
                }
                ObservedTable::from_rows((0..m).map(|l| format!("a{l}")).collect(), rows).unwrap()
            },
        )
    })
}

fn observed_mean_std(t: &ObservedTable, l: usize) -> (f64, f64, usize) {
    let xs: Vec<f64> = t.observed_column(l).map(|(_, v)| v).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt(), xs.len())
}

proptest! {
    #[test]
    fn csv_round_trip_keeps_mask_and_values(t in table_strategy()) {
        let mut buf = Vec::new();
        t.write_csv(&mut buf, None).unwrap();
        let back = read_csv(&buf[..], &LoadOptions::with_label(LabelColumn::None)).unwrap().table;
        prop_assert_eq!(back.mask(), t.mask());
        prop_assert_eq!(back.attribute_names(), t.attribute_names());
        for i in 0..t.n() {
            for l in 0..t.m() {
                if let (Some(a), Some(b)) = (t.get(i, l), back.get(i, l)) {
                    prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-300), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn normalisation_standardises_observed_columns(t in table_strategy()) {
        let z = zscore_normalize(&t);
        prop_assert_eq!(z.mask(), t.mask());
        prop_assert_eq!((z.n(), z.m()), (t.n(), t.m()));
        for l in 0..t.m() {
            let mut distinct: Vec<f64> = t.observed_column(l).map(|(_, v)| v).collect();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            if distinct.len() >= 2 {
                let (mean, std, _) = observed_mean_std(&z, l);
                prop_assert!(mean.abs() < 1e-9, "mean {mean}");
                prop_assert!((std - 1.0).abs() < 1e-9, "std {std}");
            }
        }
    }

    #[test]
    fn imputers_fill_only_missing_cells(t in table_strategy(), k in 1usize..4) {
        let filled = [impute_zero(&t), impute_mean(&t).unwrap_or_else(|_| impute_zero(&t)), impute_knn(&t, k).unwrap_or_else(|_| impute_zero(&t))];
        for f in &filled {
            prop_assert!(f.is_complete());
            for i in 0..t.n() {
                for l in 0..t.m() {
                    if let Some(v) = t.get(i, l) {
                        prop_assert_eq!(f.get(i, l), Some(v));
                    }
                }
            }
        }
    }

    #[test]
    fn mean_fill_then_normalise_centres_every_column(t in table_strategy()) {
        let filled = impute_mean(&t);
        prop_assume!(filled.is_ok());
        let z = zscore_normalize(&filled.unwrap());
        for l in 0..z.m() {
            let (mean, _, _) = observed_mean_std(&z, l);
            prop_assert!(mean.abs() < 1e-9, "mean {mean}");
        }
    }
}

#[test]
fn bundled_datasets_load_with_expected_shapes() {
    for (name, n, m, classes) in [
        ("iris", 150, 4, 3),
        ("wine", 178, 13, 3),
        ("breast_cancer", 569, 30, 2),
    ] {
        let d = common::bundled(name);
        assert_eq!(
            (d.n(), d.table().m(), d.num_classes()),
            (n, m, classes),
            "{name}"
        );
        assert!(d.table().is_complete());
        for l in 0..m {
            let (mean, std) = column_stats(d.table(), l).unwrap();
            assert!(
                mean.abs() < 1e-9 && (std - 1.0).abs() < 1e-9,
                "{name} column {l}"
            );
        }
    }
}

#[test]
fn load_reports_bad_cells_by_position() {
    let text = "a,b,class\n1,2,x\n3,oops,y\n";
    let err = read_csv(text.as_bytes(), &LoadOptions::default())
        .unwrap_err()
        .to_string();
    assert!(err.contains("oops") && err.contains('2'), "{err}");

    let ragged = "a,b,class\n1,2,x\n3,y\n";
    assert!(read_csv(ragged.as_bytes(), &LoadOptions::default()).is_err());

    let empty_row = "a,b,class\n?,NA,x\n";
    assert!(read_csv(empty_row.as_bytes(), &LoadOptions::default()).is_err());
}

#[test]
fn tables_with_missing_cells_compare_equal() {
    let rows = vec![vec![None, Some(1.0)], vec![Some(2.0), Some(3.0)]];
    let a = ObservedTable::from_rows(vec!["x".into(), "y".into()], rows.clone()).unwrap();
    let b = ObservedTable::from_rows(vec!["x".into(), "y".into()], rows).unwrap();
    assert_eq!(a, b);
    let mut mask = a.mask().to_vec();
    mask[3] = false;
    assert_ne!(a, a.with_mask(mask).unwrap());
}
