use std::collections::HashSet;

use proptest::prelude::{any, proptest, prop_assert_eq};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::bag::{Bag, Coalition};
use crate::classifier::{BagClassifier, Counted, FnClassifier};
use crate::pointwise::single;

type Classifier = FnClassifier<Box<dyn Fn(&Bag) -> Vec<f64> + Send + Sync>>;

// F_1(S) = 0.5 + Σ_{i∈S} x_i0, F_0 = 1 - F_1
fn additive() -> Classifier {
    FnClassifier::new(
        2,
        Box::new(|b: &Bag| {
            let p = 0.5 + b.instances().map(|x| x[0]).sum::<f64>();
            vec![1.0 - p, p]
        }),
    )
}

// additive part plus a max interaction, squashed into (0.1, 0.9)
fn interacting() -> Classifier {
    FnClassifier::new(
        2,
        Box::new(|b: &Bag| {
            let sum: f64 = b.instances().map(|x| x[0]).sum();
            let max = b.instances().map(|x| x[1]).fold(f64::MIN, f64::max);
            let p = 0.5 + 0.4 * (sum + 0.5 * max).tanh();
            vec![1.0 - p, p]
        }),
    )
}

fn random_bag(rng: &mut ChaCha8Rng, k: usize, scale: f64) -> Bag {
    let rows = (0..k)
        .map(|_| vec![rng.random_range(-scale..scale), rng.random_range(-1.0..1.0)])
        .collect();
    Bag::new(rows, 0).unwrap()
}

fn all_coalitions(k: usize) -> Vec<Coalition> {
    // full bag first, then every other non-empty mask
    let mut out = vec![Coalition::full(k)];
    for m in 1..(1u64 << k) - 1 {
        out.push(Coalition::from_indices(k, (0..k).filter(|i| m >> i & 1 == 1)));
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Shapley values of `v` with `v(∅) = 0`, by enumeration of subsets.
fn brute_force_shapley(v: &dyn Fn(&Coalition) -> f64, k: usize) -> Vec<f64> {
    let value = |mask: u64| -> f64 {
        if mask == 0 {
            0.0
        } else {
            v(&Coalition::from_indices(k, (0..k).filter(|i| mask >> i & 1 == 1)))
        }
    };
    (0..k)
        .map(|i| {
            let mut phi = 0.0;
            for mask in 0..(1u64 << k) {
                if mask >> i & 1 == 1 {
                    continue;
                }
                let s = mask.count_ones() as usize;
                let w = factorial(s) * factorial(k - s - 1) / factorial(k);
                phi += w * (value(mask | 1 << i) - value(mask));
            }
            phi
        })
        .collect()
}

#[test]
fn exhaustive_shap_matches_shapley_up_to_baseline() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let f = interacting();
    for _ in 0..20 {
        let k = rng.random_range(3..=8);
        let bag = random_bag(&mut rng, k, 0.4);
        let zs = all_coalitions(k);
        let fit = fit_surrogate(&f, &bag, 1, &zs, &KernelSpec::Shap, None).unwrap();

        let v = |z: &Coalition| f.predict(&bag.sub_bag(z).unwrap()).unwrap().prob(1);
        let phi0 = brute_force_shapley(&v, k);
        // with the empty bag unobserved the intercept is the least-squares
        // baseline t*, and every Shapley value shifts by -t*/k
        let (mut num, mut den) = (0.0, 0.0);
        for z in &zs[1..] {
            let w = shap_kernel(z).unwrap();
            let a = v(z) - z.ones().map(|i| phi0[i]).sum::<f64>();
            let b = 1.0 - z.size() as f64 / k as f64;
            num += w * a * b;
            den += w * b * b;
        }
        let t = num / den;
        assert!((fit.phi0 - t).abs() < 1e-4, "phi0 {} vs t* {t}", fit.phi0);
        for i in 0..k {
            assert!((fit.phis[i] - (phi0[i] - t / k as f64)).abs() < 1e-4);
        }
    }
}

#[test]
fn additive_classifier_is_recovered_by_every_sampler() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = additive();
    for k in [3, 6, 11] {
        let bag = random_bag(&mut rng, k, 0.4 / k as f64);
        let truth: Vec<f64> = bag.instances().map(|x| x[0]).collect();
        let n = 4 * k;
        let check = |e: SurrogateExplanation| {
            let row = e.attributions.row(1).unwrap();
            for i in 0..k {
                assert!((row[i] - truth[i]).abs() < 1e-6, "{}: {row:?} vs {truth:?}", e.attributions.method());
                assert!((e.attributions.get(0, i).unwrap() + truth[i]).abs() < 1e-6);
            }
            assert!((e.fits[1].phi0 - 0.5).abs() < 1e-6);
        };
        for guided in [false, true] {
            check(lime_explain(&f, &bag, &[0, 1], guided, n, 5).unwrap());
            check(shap_explain(&f, &bag, &[0, 1], guided, n, 5).unwrap());
        }
        let p = MilliParams { n, ..MilliParams::default() };
        check(milli_explain(&f, &bag, &[0, 1], &p, 5).unwrap());
    }
}

#[test]
fn constant_classifier_gives_zero_slopes() {
    let f = FnClassifier::new(2, |_: &Bag| vec![0.25, 0.75]);
    let bag = random_bag(&mut ChaCha8Rng::seed_from_u64(1), 9, 1.0);
    let e = lime_explain(&f, &bag, &[0, 1], false, 40, 1).unwrap();
    for fit in &e.fits {
        assert!(fit.phis.iter().all(|v| v.abs() < 1e-8));
        assert!((fit.phi0 - [0.25, 0.75][fit.class]).abs() < 1e-8);
        assert!(fit.residual_loss < 1e-12);
    }
}

#[test]
fn fitting_is_linear_in_the_target() {
    let bag = random_bag(&mut ChaCha8Rng::seed_from_u64(2), 7, 0.3);
    let base = interacting();
    let scaled = FnClassifier::new(2, |b: &Bag| {
        let p = interacting().predict(b).unwrap().prob(1) * 0.5;
        vec![1.0 - p, p]
    });
    let spec = SamplerSpec {
        strategy: Strategy::EqualRandom,
        n: 60,
        allow_repeats: false,
        seed: 4,
    };
    let zs = sample_coalitions(&spec, &KernelSpec::lime(), 7).unwrap();
    let a = fit_surrogate(&base, &bag, 1, &zs, &KernelSpec::lime(), None).unwrap();
    let b = fit_surrogate(&scaled, &bag, 1, &zs, &KernelSpec::lime(), None).unwrap();
    assert!((b.phi0 - 0.5 * a.phi0).abs() < 1e-12);
    for (x, y) in a.phis.iter().zip(&b.phis) {
        assert!((y - 0.5 * x).abs() < 1e-12);
    }
}

#[test]
fn identical_coalitions_are_degenerate() {
    let bag = random_bag(&mut ChaCha8Rng::seed_from_u64(2), 3, 0.3);
    let zs = vec![Coalition::full(3); 6];
    assert!(matches!(
        fit_surrogate(&additive(), &bag, 1, &zs, &KernelSpec::Shap, None),
        Err(crate::Error::DegenerateSample(_))
    ));
}

#[test]
fn milli_call_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let f = Counted::new(interacting());
    for k in [3, 10, 30] {
        let bag = random_bag(&mut rng, k, 0.2);
        let p = MilliParams { n: 50, ..MilliParams::default() };
        f.reset();
        let e = milli_explain(&f, &bag, &[0, 1], &p, 9).unwrap();
        assert_eq!(f.call_count() as usize, e.evaluations);
        assert!(e.evaluations <= p.n + k + 1);
    }
}

#[test]
fn milli_equals_its_own_fit() {
    let bag = random_bag(&mut ChaCha8Rng::seed_from_u64(5), 12, 0.2);
    let f = interacting();
    let p = MilliParams::default();
    let e = milli_explain(&f, &bag, &[0, 1], &p, 3).unwrap();
    let ranking = rank_by_single(&f, &bag).unwrap();
    let spec = SamplerSpec {
        strategy: Strategy::RankedBernoulli { ranking: ranking.clone(), alpha: p.alpha, beta: p.beta },
        n: p.n,
        allow_repeats: false,
        seed: 3,
    };
    let kernel = KernelSpec::Milli { alpha: p.alpha, beta: p.beta };
    let zs = sample_coalitions(&spec, &kernel, 12).unwrap();
    for c in 0..2 {
        let fit = fit_surrogate(&f, &bag, c, &zs, &kernel, Some(&ranking)).unwrap();
        assert_eq!(e.attributions.row(c).unwrap(), fit.phis.as_slice());
    }
}

#[test]
fn ranking_follows_single() {
    let rows = vec![vec![0.1, 0.0], vec![0.3, 0.0], vec![-0.2, 0.0], vec![0.2, 0.0]];
    let bag = Bag::new(rows, 0).unwrap();
    let f = additive();
    // predicted class 1; Single for class 1 orders 1, 3, 0, 2
    assert_eq!(rank_by_single(&f, &bag).unwrap().ranks(), &[2, 0, 3, 1]);
    let s = single(&f, &bag, &[1]).unwrap();
    let order = crate::attribution::argsort_descending(s.row(1).unwrap()).unwrap();
    assert_eq!(order, vec![1, 3, 0, 2]);

    let flat = FnClassifier::new(2, |_: &Bag| vec![0.5, 0.5]);
    assert_eq!(rank_by_single(&flat, &bag).unwrap(), Ranking::identity(4));
}

#[test]
fn guided_shap_with_all_singletons_orders_like_single() {
    // instance-independent classifier: presence of any positive feature
    let f = FnClassifier::new(2, |b: &Bag| {
        let s: f64 = b.instances().map(|x| x[0].max(0.0)).sum();
        let p = 1.0 - (-s).exp() * 0.9;
        vec![1.0 - p, p]
    });
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let k = rng.random_range(4..9);
        let bag = random_bag(&mut rng, k, 1.0);
        let n = 2 * k + 1;
        let e = shap_explain(&f, &bag, &[1], true, n, 0).unwrap();
        let s = single(&f, &bag, &[1]).unwrap();
        let strictly: Vec<f64> = s.row(1).unwrap().to_vec();
        let a = crate::attribution::argsort_descending(e.attributions.row(1).unwrap()).unwrap();
        let b = crate::attribution::argsort_descending(&strictly).unwrap();
        // instances with no effect tie in both; compare the effective ones
        let effective: HashSet<usize> = (0..k).filter(|&i| bag.instance(i)[0] > 0.0).collect();
        let fa: Vec<usize> = a.into_iter().filter(|i| effective.contains(i)).collect();
        let fb: Vec<usize> = b.into_iter().filter(|i| effective.contains(i)).collect();
        assert_eq!(fa, fb);
    }
}

#[test]
fn exhaustive_guided_shap_orders_like_shapley() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let f = interacting();
    for _ in 0..10 {
        let k = rng.random_range(3..=8);
        let bag = random_bag(&mut rng, k, 0.4);
        let n = (1 << k) - 1;
        let e = shap_explain(&f, &bag, &[1], true, n, 0).unwrap();
        let v = |z: &Coalition| f.predict(&bag.sub_bag(z).unwrap()).unwrap().prob(1);
        let phi = brute_force_shapley(&v, k);
        let row = e.attributions.row(1).unwrap();
        // a uniform shift keeps the ordering
        let a = crate::attribution::argsort_descending(row).unwrap();
        let shift = row[0] - phi[0];
        let shifted: Vec<f64> = phi.iter().map(|p| p + shift).collect();
        for w in a.windows(2) {
            assert!(shifted[w[0]] >= shifted[w[1]] - 1e-6);
        }
    }
}

#[test]
fn sampler_matches_discrete_rank_sum() {
    // the coin toss uses integer ranks, so its mean size is Σ_{r<k} π_r(r)
    let k = 30;
    let probs = coin_probabilities(&Ranking::identity(k), 0.05, 0.01).unwrap();
    let exact: f64 = probs.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 20000;
    let sizes: Vec<f64> = (0..draws).map(|_| coin_toss(&mut rng, &probs).size() as f64).collect();
    let mean = sizes.iter().sum::<f64>() / draws as f64;
    let var = sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    assert!((mean - exact).abs() < 3.0 * (var / draws as f64).sqrt());
}

proptest! {
    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), k in 3usize..15) {
        let spec = SamplerSpec {
            strategy: Strategy::RankedBernoulli { ranking: Ranking::identity(k), alpha: 0.2, beta: 0.1 },
            n: k + 10,
            allow_repeats: false,
            seed,
        };
        let kernel = KernelSpec::Milli { alpha: 0.2, beta: 0.1 };
        prop_assert_eq!(sample_coalitions(&spec, &kernel, k).unwrap(), sample_coalitions(&spec, &kernel, k).unwrap());
    }
}
