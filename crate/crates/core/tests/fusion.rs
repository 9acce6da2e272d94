use egc_core::classifiers::{ClassProbs, ProbabilityMatrix};
use egc_core::fusion::{fuse, FusionRule, Member, Provenance};
use egc_core::label::argmax;
use proptest::prelude::*;

fn members(n: usize, m: usize) -> impl Strategy<Value = Vec<Member>> {
    proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, n), m).prop_map(move |cols| {
        cols.into_iter()
            .enumerate()
            .map(|(j, ps)| {
                let rows: Vec<ClassProbs> = ps.iter().map(|&p| [1.0 - p, p]).collect();
                let ids = (0..n).map(|i| format!("s{i:02}")).collect();
                let matrix = ProbabilityMatrix::new(format!("m{j}"), 0, ids, rows).unwrap();
                Member::from_matrices(format!("m{j}"), Provenance::Handcrafted, &[matrix]).unwrap()
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn sum_and_product_stay_in_range(ms in members(15, 4)) {
        let refs: Vec<&Member> = ms.iter().collect();
        for row in fuse(&refs, FusionRule::Sum).unwrap().scores {
            prop_assert!((row[0] + row[1] - refs.len() as f64).abs() <= 1e-9);
        }
        for row in fuse(&refs, FusionRule::Product).unwrap().scores {
            prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn a_single_member_fuses_to_itself(ms in members(15, 1)) {
        for rule in FusionRule::ALL {
            prop_assert_eq!(fuse(&[&ms[0]], rule).unwrap().predictions, ms[0].predictions());
        }
    }

    #[test]
    fn sum_decides_like_the_average(ms in members(15, 5)) {
        let refs: Vec<&Member> = ms.iter().collect();
        let fused = fuse(&refs, FusionRule::Sum).unwrap();
        for (i, pred) in fused.predictions.iter().enumerate() {
            let avg = [0, 1].map(|c| ms.iter().map(|m| m.rows[i][c]).sum::<f64>() / ms.len() as f64);
            prop_assert_eq!(*pred, argmax(&avg));
        }
    }

    #[test]
    fn member_order_is_irrelevant(ms in members(12, 4), rot in 0usize..4) {
        let refs: Vec<&Member> = ms.iter().collect();
        let mut rotated = refs.clone();
        rotated.rotate_left(rot);
        for rule in FusionRule::ALL {
            let a = fuse(&refs, rule).unwrap();
            let b = fuse(&rotated, rule).unwrap();
            prop_assert_eq!(a.predictions, b.predictions);
            for (x, y) in a.scores.iter().zip(&b.scores) {
                prop_assert!((x[0] - y[0]).abs() <= 1e-12 && (x[1] - y[1]).abs() <= 1e-12);
            }
        }
    }
}
