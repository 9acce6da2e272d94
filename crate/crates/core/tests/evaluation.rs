use egc_core::classifiers::{ClassifierSpec, LabeledDataset, SavedModel};
use egc_core::evaluation::{f_measure, fit_fold, stratified_kfold, Confusion, FoldProtocol, Scores};
use egc_core::Label;
use proptest::prelude::*;

fn labels() -> impl Strategy<Value = Vec<Label>> {
    (5usize..60, 5usize..60).prop_map(|(c, s)| {
        let mut l = vec![Label::Control; c];
        l.extend(vec![Label::Sick; s]);
        l
    })
}

fn label() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Control), Just(Label::Sick)]
}

proptest! {
    #[test]
    fn folds_partition_and_stratify(labels in labels(), k in 2usize..6, seed in any::<u64>()) {
        let plan = stratified_kfold(&labels, k, seed).unwrap();
        let mut seen = vec![0usize; labels.len()];
        for f in 0..k {
            let (train, test) = plan.split(f);
            prop_assert_eq!(train.len() + test.len(), labels.len());
            for &i in &test {
                seen[i] += 1;
            }
            for class in [Label::Control, Label::Sick] {
                let total = labels.iter().filter(|l| **l == class).count() as f64;
                let got = test.iter().filter(|&&i| labels[i] == class).count() as f64;
                prop_assert!((got - total / k as f64).abs() <= 1.0);
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        prop_assert_eq!(stratified_kfold(&labels, k, seed).unwrap(), plan);
    }

    #[test]
    fn pooled_f_measure_equals_summed_confusion(
        parts in proptest::collection::vec(proptest::collection::vec((label(), label()), 1..20), 1..6)
    ) {
        let mut summed = Confusion::default();
        let (mut pred, mut truth) = (Vec::new(), Vec::new());
        for part in &parts {
            let (p, t): (Vec<Label>, Vec<Label>) = part.iter().copied().unzip();
            summed = summed.add(Confusion::from_labels(&p, &t, Label::Sick));
            pred.extend(p);
            truth.extend(t);
        }
        let pooled = f_measure(&pred, &truth, Label::Sick);
        prop_assert_eq!(pooled.confusion, summed);
        prop_assert_eq!(pooled.f_measure, Scores::from_confusion(&summed).f_measure);
        prop_assert!((0.0..=1.0).contains(&pooled.f_measure));
    }

    #[test]
    fn test_labels_never_reach_the_model(seed in any::<u64>(), fold in 0usize..4) {
        let n = 24;
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![(i % 7) as f64, (i * 3 % 5) as f64 + 1.0]).collect();
        let y: Vec<Label> = (0..n).map(|i| if i % 2 == 0 { Label::Control } else { Label::Sick }).collect();
        let plan = stratified_kfold(&y, 4, seed).unwrap();
        let mut flipped = y.clone();
        for i in plan.split(fold).1 {
            flipped[i] = if flipped[i] == Label::Sick { Label::Control } else { Label::Sick };
        }
        let spec = ClassifierSpec::Rf { trees: 4, bootstrap: true };
        let protocol = FoldProtocol { classifier: &spec, top_n: Some(1), seed };
        let fit = |labels: Vec<Label>| {
            let data = LabeledDataset::new(x.clone(), labels).unwrap();
            let f = fit_fold(&data, &plan, fold, &protocol).unwrap();
            (f.selected, SavedModel::new("rf", f.model).to_json().unwrap())
        };
        prop_assert_eq!(fit(y), fit(flipped));
    }
}
