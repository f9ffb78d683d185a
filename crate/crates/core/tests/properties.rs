use std::collections::HashSet;

use proptest::prelude::*;
use wscadl::chain::chain_posterior;
use wscadl::conv::{convolve_direct, FftConvolver};
use wscadl::prior::{analyze_with, ConvPath};
use wscadl::tree::tree_posterior;
use wscadl::types::{state_enumerate, window_extract};
use wscadl::{ClassSet, ModelParams, PriorField, Signal};

fn prior_strategy(max_n: usize, max_c: usize) -> impl Strategy<Value = PriorField> {
    (1..=max_n, 1..=max_c).prop_flat_map(|(n, c)| {
        prop::collection::vec(0.01f64..1.0, n * (c + 1)).prop_map(move |raw| {
            let mut probs = raw;
            for row in probs.chunks_mut(c + 1) {
                let z: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= z);
            }
            PriorField::new(n, c, probs).unwrap()
        })
    })
}

fn labels_strategy(c: usize) -> impl Strategy<Value = ClassSet> {
    prop::collection::vec(any::<bool>(), c)
        .prop_map(|bits| ClassSet::new((1..=bits.len()).filter(|&k| bits[k - 1])).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fft_matches_direct(
        a in prop::collection::vec(-10.0f64..10.0, 1..300),
        b in prop::collection::vec(-10.0f64..10.0, 1..60),
    ) {
        let d = convolve_direct(&a, &b);
        let f = FftConvolver::new().convolve(&a, &b);
        prop_assert_eq!(d.len(), a.len() + b.len() - 1);
        let scale = a.iter().map(|v| v.abs()).sum::<f64>() * b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (x, y) in d.iter().zip(&f) {
            prop_assert!((x - y).abs() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn analysis_is_window_dot_product(
        f in 1usize..=3,
        t in 1usize..40,
        half in 0usize..4,
        c in 1usize..=3,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let tw = 2 * half + 1;
        let sig = Signal::new(f, t, (0..f * t).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let params = ModelParams::new(
            c, tw, f,
            (0..(c + 1) * f * tw).map(|_| r.random_range(-1.0..1.0)).collect(),
            (0..=c).map(|_| r.random_range(-1.0..1.0)).collect(),
        ).unwrap();
        let direct = analyze_with(&sig, &params, ConvPath::Direct).unwrap();
        let fft = analyze_with(&sig, &params, ConvPath::Fft).unwrap();
        prop_assert_eq!(direct.num_instances(), t + tw - 1);
        for u in 0..direct.num_instances() {
            let win = window_extract(&sig, u as isize - half as isize, tw).unwrap();
            for k in 0..=c {
                let want = params.biases()[k] + win.iter().zip(params.word(k)).map(|(x, w)| x * w).sum::<f64>();
                prop_assert!((direct.score(u, k) - want).abs() <= 1e-12 * (1.0 + want.abs()));
                prop_assert!((fft.score(u, k) - want).abs() <= 1e-10 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn state_enumeration_is_a_bijection(c in 0usize..=4, cap in 0usize..12) {
        let labels = ClassSet::all(c);
        let states = state_enumerate(&labels, cap);
        prop_assert_eq!(states.len(), labels.num_subsets() * (cap + 1));
        let unique: HashSet<_> = states.iter().copied().collect();
        prop_assert_eq!(unique.len(), states.len());
        prop_assert!(states.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(states.iter().all(|s| s.subset <= labels.full_mask() && s.count <= cap));
    }

    #[test]
    fn posteriors_are_distributions_and_backends_agree(
        (prior, labels) in prior_strategy(40, 3).prop_flat_map(|p| {
            let c = p.num_classes();
            (Just(p), labels_strategy(c))
        }),
        extra in 0usize..40,
    ) {
        let n = prior.num_instances();
        prop_assume!(labels.len() <= n);
        let cap = (labels.len() + extra).min(n);
        let cp = chain_posterior(&prior, &labels, cap).unwrap();
        let tp = tree_posterior(&prior, &labels, cap).unwrap();
        // Relative error of the evidence is absolute error of its log.
        prop_assert!((cp.log_evidence - tp.log_evidence).abs() <= 1e-10);
        for u in 0..n {
            let s: f64 = cp.row(u).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            for k in 0..=prior.num_classes() {
                if k != 0 && !labels.contains(k) {
                    prop_assert_eq!(cp.prob(u, k), 0.0);
                }
                prop_assert!((cp.prob(u, k) - tp.prob(u, k)).abs() <= 1e-10);
            }
        }
    }

    /// Reversing the instance order reverses the posterior.
    #[test]
    fn mirrored_prior_mirrors_posterior(
        (prior, labels) in prior_strategy(30, 3).prop_flat_map(|p| {
            let c = p.num_classes();
            (Just(p), labels_strategy(c))
        }),
        extra in 0usize..5,
    ) {
        let n = prior.num_instances();
        let c = prior.num_classes();
        prop_assume!(labels.len() <= n);
        let cap = (labels.len() + extra).min(n);
        let rev: Vec<f64> = (0..n).rev().flat_map(|u| prior.row(u).to_vec()).collect();
        let mirrored = PriorField::new(n, c, rev).unwrap();
        for post in [
            (chain_posterior(&prior, &labels, cap).unwrap(), chain_posterior(&mirrored, &labels, cap).unwrap()),
            (tree_posterior(&prior, &labels, cap).unwrap(), tree_posterior(&mirrored, &labels, cap).unwrap()),
        ] {
            let (a, b) = post;
            prop_assert!((a.log_evidence - b.log_evidence).abs() <= 1e-11);
            for u in 0..n {
                for k in 0..=c {
                    prop_assert!((a.prob(u, k) - b.prob(n - 1 - u, k)).abs() <= 1e-12);
                }
            }
        }
    }
}
