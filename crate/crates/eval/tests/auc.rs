use fairlink_eval::metrics::{roc_auc, roc_auc_trapezoid};
use proptest::prelude::*;

proptest! {
    #[test]
    fn rank_and_trapezoid_auc_agree(
        data in proptest::collection::vec((0u8..20, 0u8..2), 2..200),
    ) {
        // coarse scores so that ties occur
        let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 7.0).collect();
        let truth: Vec<u8> = data.iter().map(|d| d.1).collect();
        match (roc_auc(&scores, &truth), roc_auc_trapezoid(&scores, &truth)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b),
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "disagreement {:?}", other),
        }
    }
}
