//! Attributions that treat every instance independently.
//!
//! * Single: `φ[c][i] = F_c({x_i})`
//! * One Removed: `φ[c][i] = F_c(X) - F_c(X \ {x_i})`
//! * Combined: the mean of the two.
//!
//! Each call evaluates the classifier once per distinct sub-bag, so Single costs
//! `k` predictions, One Removed `k + 1` and Combined `2k + 1` (for `k ≥ 3`; at
//! `k = 2` the removed and singleton sub-bags coincide and Combined costs 3).

use crate::attribution::AttributionMatrix;
use crate::bag::{Bag, Coalition};
use crate::cache::{check_classes, CoalitionCache};
use crate::classifier::BagClassifier;
use crate::error::{Error, Result};

/// All class indices of a classifier.
pub fn all_classes<F: BagClassifier + ?Sized>(f: &F) -> Vec<usize> {
    (0..f.num_classes()).collect()
}

fn singles<F: BagClassifier + ?Sized>(cache: &mut CoalitionCache<'_, F>) -> Result<Vec<Vec<f64>>> {
    let k = cache.bag().len();
    (0..k)
        .map(|i| cache.eval(&Coalition::singleton(k, i)).map(<[f64]>::to_vec))
        .collect()
}

fn removed<F: BagClassifier + ?Sized>(cache: &mut CoalitionCache<'_, F>) -> Result<Vec<Vec<f64>>> {
    let k = cache.bag().len();
    if k < 2 {
        return Err(Error::MethodInapplicable(
            "removing an instance from a single-instance bag leaves it empty".into(),
        ));
    }
    let full = cache.eval(&Coalition::full(k))?.to_vec();
    (0..k)
        .map(|i| {
            let without = cache.eval(&Coalition::without(k, i))?;
            Ok(full.iter().zip(without).map(|(a, b)| a - b).collect())
        })
        .collect()
}

fn assemble(method: &str, c_total: usize, classes: &[usize], per_instance: &[Vec<f64>]) -> Result<AttributionMatrix> {
    let mut m = AttributionMatrix::new(method, c_total, per_instance.len());
    for &c in classes {
        m.set_row(c, per_instance.iter().map(|v| v[c]).collect())?;
    }
    Ok(m)
}

pub fn single<F: BagClassifier + ?Sized>(f: &F, bag: &Bag, classes: &[usize]) -> Result<AttributionMatrix> {
    check_classes(classes, f.num_classes())?;
    let mut cache = CoalitionCache::new(f, bag);
    let s = singles(&mut cache)?;
    assemble("single", f.num_classes(), classes, &s)
}

pub fn one_removed<F: BagClassifier + ?Sized>(f: &F, bag: &Bag, classes: &[usize]) -> Result<AttributionMatrix> {
    check_classes(classes, f.num_classes())?;
    let mut cache = CoalitionCache::new(f, bag);
    let r = removed(&mut cache)?;
    assemble("one-removed", f.num_classes(), classes, &r)
}

pub fn combined<F: BagClassifier + ?Sized>(f: &F, bag: &Bag, classes: &[usize]) -> Result<AttributionMatrix> {
    check_classes(classes, f.num_classes())?;
    let mut cache = CoalitionCache::new(f, bag);
    let r = removed(&mut cache)?;
    let s = singles(&mut cache)?;
    let mixed: Vec<Vec<f64>> = s
        .iter()
        .zip(&r)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect())
        .collect();
    assemble("combined", f.num_classes(), classes, &mixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{Counted, FnClassifier};
    use proptest::prelude::*;

    fn bag_of(values: &[f64]) -> Bag {
        Bag::new(values.iter().map(|&v| vec![v]).collect(), 0).unwrap()
    }

    // presence rule on one feature: "1" if any instance > 0.5
    fn presence() -> FnClassifier<impl Fn(&Bag) -> Vec<f64> + Send + Sync> {
        let eps = 0.01;
        FnClassifier::new(2, move |b: &Bag| {
            if b.instances().any(|x| x[0] > 0.5) {
                vec![eps, 1.0 - eps]
            } else {
                vec![1.0 - eps, eps]
            }
        })
    }

    // softmax of (sum, mean, max) features; sensitive to every instance
    fn smooth() -> FnClassifier<impl Fn(&Bag) -> Vec<f64> + Send + Sync> {
        FnClassifier::new(3, |b: &Bag| {
            let xs: Vec<f64> = b.instances().map(|x| x[0]).collect();
            let sum: f64 = xs.iter().sum();
            let max = xs.iter().cloned().fold(f64::MIN, f64::max);
            let logits = [sum, sum / xs.len() as f64, max];
            crate::classifier::ClassDistribution::softmax(&logits).probs().to_vec()
        })
    }

    #[test]
    fn presence_rule_values() {
        let f = presence();
        let b = bag_of(&[0.9, 0.0, 0.1, 0.2, 0.0]);
        let s = single(&f, &b, &[0, 1]).unwrap();
        assert_eq!(s.get(1, 0), Some(0.99));
        assert_eq!(s.get(0, 0), Some(0.01));
        assert_eq!(s.get(1, 2), Some(0.01));

        let r = one_removed(&f, &b, &[1]).unwrap();
        assert!((r.get(1, 0).unwrap() - 0.98).abs() < 1e-12);
        assert_eq!(r.get(1, 3), Some(0.0));
        assert!(r.row(0).is_none());

        let c = combined(&f, &b, &[1]).unwrap();
        assert!((c.get(1, 0).unwrap() - 0.5 * (0.99 + 0.99 - 0.01)).abs() < 1e-12);
    }

    #[test]
    fn singleton_bag() {
        let f = smooth();
        let b = bag_of(&[0.3]);
        let s = single(&f, &b, &[0, 1, 2]).unwrap();
        let p = f.predict(&b).unwrap();
        for c in 0..3 {
            assert_eq!(s.get(c, 0), Some(p.prob(c)));
        }
        assert!(matches!(one_removed(&f, &b, &[0]), Err(Error::MethodInapplicable(_))));
        assert!(matches!(combined(&f, &b, &[0]), Err(Error::MethodInapplicable(_))));
    }

    #[test]
    fn constant_classifier() {
        let f = FnClassifier::new(2, |_: &Bag| vec![0.3, 0.7]);
        let b = bag_of(&[1.0, 2.0, 3.0]);
        let r = one_removed(&f, &b, &[0, 1]).unwrap();
        let c = combined(&f, &b, &[0, 1]).unwrap();
        let s = single(&f, &b, &[0, 1]).unwrap();
        for cl in 0..2 {
            assert!(r.row(cl).unwrap().iter().all(|v| *v == 0.0));
            for i in 0..3 {
                assert_eq!(c.get(cl, i).unwrap(), 0.5 * s.get(cl, i).unwrap());
            }
        }
    }

    #[test]
    fn call_counts() {
        let f = Counted::new(smooth());
        for k in [3, 4, 9] {
            let b = bag_of(&(0..k).map(|i| i as f64 * 0.1).collect::<Vec<_>>());
            f.reset();
            single(&f, &b, &[0, 1, 2]).unwrap();
            assert_eq!(f.call_count(), k as u64);
            f.reset();
            one_removed(&f, &b, &[2]).unwrap();
            assert_eq!(f.call_count(), k as u64 + 1);
            f.reset();
            combined(&f, &b, &[0]).unwrap();
            assert_eq!(f.call_count(), 2 * k as u64 + 1);
        }
        // at k = 2 the removed sub-bags are the singletons
        f.reset();
        combined(&f, &bag_of(&[0.1, 0.2]), &[0]).unwrap();
        assert_eq!(f.call_count(), 3);
    }

    #[test]
    fn rejects_bad_classes() {
        let f = smooth();
        let b = bag_of(&[0.1, 0.2]);
        assert!(single(&f, &b, &[3]).is_err());
        assert!(single(&f, &b, &[]).is_err());
    }

    proptest! {
        #[test]
        fn row_sums_and_signs(values in prop::collection::vec(-2.0f64..2.0, 2..12)) {
            let f = smooth();
            let b = bag_of(&values);
            let cls = [0, 1, 2];
            let s = single(&f, &b, &cls).unwrap();
            let r = one_removed(&f, &b, &cls).unwrap();
            let c = combined(&f, &b, &cls).unwrap();
            for i in 0..values.len() {
                let col = |m: &AttributionMatrix| cls.iter().map(|&c| m.get(c, i).unwrap()).sum::<f64>();
                prop_assert!((col(&s) - 1.0).abs() < 1e-9);
                prop_assert!(col(&r).abs() < 1e-9);
                prop_assert!((col(&c) - 0.5).abs() < 1e-9);
                for &cl in &cls {
                    prop_assert!(s.get(cl, i).unwrap() >= 0.0);
                    let half = 0.5 * (s.get(cl, i).unwrap() + r.get(cl, i).unwrap());
                    prop_assert_eq!(c.get(cl, i).unwrap(), half);
                }
            }
        }

        #[test]
        fn permutation_equivariance(values in prop::collection::vec(-2.0f64..2.0, 2..10), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let k = values.len();
            let mut perm: Vec<usize> = (0..k).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let f = smooth();
            let b = bag_of(&values);
            let pb = b.permuted(&perm).unwrap();
            let a = combined(&f, &b, &[0, 1, 2]).unwrap();
            let pa = combined(&f, &pb, &[0, 1, 2]).unwrap();
            for c in 0..3 {
                for (j, &i) in perm.iter().enumerate() {
                    prop_assert!((pa.get(c, j).unwrap() - a.get(c, i).unwrap()).abs() < 1e-12);
                }
            }
        }
    }
}
