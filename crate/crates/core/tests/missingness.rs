mod common;

use lacuna::missingness::{apply_mcar, quantile, simulate};
use lacuna::{Mechanism, MissingnessSpec, ObservedTable};
use proptest::prelude::*;

fn mechanism() -> impl Strategy<Value = Mechanism> {
    prop::sample::select(Mechanism::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulation_only_hides_cells(
        mech in mechanism(), f in 0.0f64..0.3, seed in any::<u64>(), data_seed in 0u64..1000,
        n in 20usize..200, m in 2usize..7,
    ) {
        let table = common::correlated_gaussian(n, m, data_seed);
        let spec = MissingnessSpec::new(mech, f, seed);
        let masked = match simulate(&table, &spec) {
            Ok(t) => t,
            // Infeasible budgets are reported, never silently truncated.
            Err(e) => return Err(TestCaseError::reject(e.to_string())),
        };
        prop_assert!(masked.rows().all(|r| r.observed_count() >= 1));
        for i in 0..n {
            for l in 0..m {
                if let Some(v) = masked.get(i, l) {
                    prop_assert_eq!(Some(v), table.get(i, l));
                }
            }
        }
        let again = simulate(&table, &spec).unwrap();
        prop_assert_eq!(again.mask(), masked.mask());
    }

    #[test]
    fn mcar_masks_exactly_the_budget(f in 0.0f64..0.6, seed in any::<u64>(), n in 10usize..100, m in 3usize..6) {
        let table = common::correlated_gaussian(n, m, seed);
        let masked = apply_mcar(&table, &MissingnessSpec::new(Mechanism::Mcar, f, seed)).unwrap();
        prop_assert_eq!(masked.missing_count(), (f * (n * m) as f64).floor() as usize);
    }
}

#[test]
fn mar_never_hides_determinants() {
    let table = common::correlated_gaussian(500, 4, 3);
    for seed in 0..10 {
        let masked = simulate(&table, &MissingnessSpec::new(Mechanism::Mar, 0.25, seed)).unwrap();
        let hidden: Vec<usize> = (0..4)
            .map(|l| (0..500).filter(|&i| !masked.is_observed(i, l)).count())
            .collect();
        // Two determinants stay fully observed; the other two carry the budget.
        assert_eq!(hidden.iter().filter(|&&h| h == 0).count(), 2, "{hidden:?}");
        assert!((masked.missing_fraction() - 0.25).abs() <= 0.02);
    }
}

#[test]
fn mnar1_hides_only_high_values() {
    let table = common::correlated_gaussian(400, 3, 4);
    let masked = simulate(&table, &MissingnessSpec::new(Mechanism::Mnar1, 0.2, 1)).unwrap();
    for l in 0..3 {
        let column: Vec<f64> = table.observed_column(l).map(|(_, v)| v).collect();
        let cut = quantile(&column, 0.5);
        for i in 0..400 {
            if !masked.is_observed(i, l) {
                assert!(table.get(i, l).unwrap() > cut);
            }
        }
    }
}

#[test]
fn infeasible_fractions_are_rejected() {
    let table = ObservedTable::from_complete(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    assert!(simulate(&table, &MissingnessSpec::new(Mechanism::Mcar, 0.5, 0)).is_err());
    let wide = common::correlated_gaussian(50, 4, 0);
    assert!(simulate(&wide, &MissingnessSpec::new(Mechanism::Mar, 0.6, 0)).is_err());
    assert!(simulate(&wide, &MissingnessSpec::new(Mechanism::Mnar1, 0.6, 0)).is_err());
}
