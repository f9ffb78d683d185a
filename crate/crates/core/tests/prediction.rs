mod common;

use common::{random_prior, rng, Oracle};
use rand::Rng;
use wscadl::metrics::{calibrate_lags, evaluate, evaluate_with_lags, instance_auc_at_lag, ScoredSignal};
use wscadl::predict::{predict_map, predict_record, signal_score};
use wscadl::{ClassSet, Error, ModelParams, Signal};

#[test]
fn map_matches_enumeration() {
    let mut r = rng(21);
    for _ in 0..200 {
        let n = r.random_range(1..=7);
        let c = r.random_range(1..=3);
        let prior = random_prior(&mut r, n, c);
        let cap = r.random_range(0..=n);
        let all = ClassSet::all(c);
        let oracle = Oracle::new(&prior, &all, cap);
        let mut best = 0usize;
        for m in 1..oracle.label_set.len() {
            if oracle.label_set[m] > oracle.label_set[best] {
                best = m;
            }
        }
        let got = predict_map(&prior, cap, 16).unwrap();
        let got_mask = all.mask_of(got.classes()).unwrap() as usize;
        // Near-ties may legitimately resolve either way.
        let (a, b) = (oracle.label_set[got_mask], oracle.label_set[best]);
        assert!(got_mask == best || (a - b).abs() <= 1e-12 * b, "{got:?} vs mask {best}");
    }
}

#[test]
fn prediction_record_covers_the_signal() {
    let params = ModelParams::new(2, 3, 1, vec![0.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0], vec![0.0, -2.0, -9.0]).unwrap();
    let sig = Signal::from_1d(vec![0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
    let rec = predict_record("x", &sig, &params, 8, true).unwrap();
    assert_eq!(rec.instance_labels, vec![0, 1, 0, 0, 0]);
    assert_eq!(rec.union, vec![1]);
    assert_eq!(rec.map, vec![1]);
    assert_eq!(rec.scores.len(), 2);
    assert!(rec.scores[0] > 0.9 && rec.scores[1] < 0.01);
    let probs = rec.instance_probs.unwrap();
    assert_eq!(probs.len(), 7);
    assert_eq!(rec.instance_offset, Some(1));
    assert!(probs.iter().all(|row| row.len() == 2));
    let prior = wscadl::prior::compute_prior(&sig, &params).unwrap();
    assert_eq!(rec.scores[0], signal_score(&prior, 1));
}

fn shifted(y: Vec<usize>, shift: usize) -> ScoredSignal {
    let t = y.len();
    // Class 1 fires `shift` samples after each true instance.
    let probs = (0..t)
        .map(|i| {
            let hit = i >= shift && y[i - shift] == 1;
            vec![if hit { 0.9 } else { 0.1 }]
        })
        .collect();
    ScoredSignal {
        scores: vec![0.9],
        labels: ClassSet::new([1]).unwrap(),
        instances: Some((probs, y)),
        instance_offset: 0,
    }
}

#[test]
fn lag_calibration_recovers_a_constant_offset() {
    let cal = vec![
        shifted(vec![0, 1, 0, 0, 0, 1, 0, 0, 0, 0], 2),
        shifted(vec![1, 0, 0, 0, 1, 0, 0, 0, 0, 0], 2),
    ];
    assert_eq!(calibrate_lags(&cal, 1, 3), vec![2]);
    // Within one sample every lag is equally wrong; ties go to 0.
    assert_eq!(calibrate_lags(&cal, 1, 1), vec![0]);
    assert_eq!(instance_auc_at_lag(&cal, 0, 2), Some(1.0));

    let test = vec![shifted(vec![0, 0, 1, 0, 0, 0, 0, 0], 2), shifted(vec![0, 0, 0, 0, 0, 0, 0, 0], 0)];
    let plain = evaluate(&test).unwrap();
    let lagged = evaluate_with_lags(&test, Some(&[2])).unwrap();
    assert!(plain.classes[0].instance_auc.unwrap() < 1.0);
    assert_eq!(lagged.classes[0].instance_auc, Some(1.0));
    assert_eq!(lagged.classes[0].lag, 2);
    assert!(matches!(evaluate_with_lags(&test, Some(&[0, 1])), Err(Error::Shape(_))));
}

#[test]
fn calibration_prefers_small_lags_and_skips_undefined_classes() {
    // Constant scores tie at every lag; lag 0 wins.
    let flat = ScoredSignal {
        scores: vec![0.5, 0.5],
        labels: ClassSet::new([1]).unwrap(),
        instances: Some((vec![vec![0.5, 0.5]; 4], vec![0, 1, 0, 0])),
        instance_offset: 0,
    };
    assert_eq!(calibrate_lags(&[flat], 2, 2), vec![0, 0]);
}
