use super::*;
use crate::bag::{Bag, Coalition, InstanceTag};
use crate::datasets::{generate_fourclass, generate_smil, ClassRule, GeneratorConfig, Split};

fn bag(seed: u64, k: usize, d: usize, label: usize) -> Bag {
    // small deterministic pseudo-random instances
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let data = (0..k * d)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        })
        .collect();
    Bag::from_flat(data, d, label).unwrap()
}

fn small_config(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        train: 300,
        val: 100,
        test: 100,
        bag_size_mean: 10.0,
        bag_size_std: 1.0,
        dim: 4,
        seed,
        ..GeneratorConfig::default()
    }
}

#[test]
fn gradients_match_finite_differences() {
    let b = bag(3, 7, 5, 2);
    for pooling in [Pooling::MeanLogit, Pooling::MeanProb, Pooling::MaxProb, Pooling::MaxLogit] {
        let m = InstanceModel::new(5, 6, 4, pooling, 11);
        let err = gradient_check(&m, &b, 1e-5).unwrap();
        assert!(err <= 1e-4, "{pooling:?}: {err}");
    }
    for attention in [true, false] {
        let m = AttentionModel::new(5, 6, 3, 4, attention, 12);
        let err = gradient_check(&m, &b, 1e-5).unwrap();
        assert!(err <= 1e-4, "attention={attention}: {err}");
    }
}

#[test]
fn gradient_check_at_zero_parameters_is_finite() {
    let b = bag(4, 5, 3, 0);
    let m = InstanceModel::from_params(3, 4, 2, Pooling::MeanLogit, vec![0.0; InstanceModel::param_count(3, 4, 2)]).unwrap();
    let err = gradient_check(&m, &b, 1e-5).unwrap();
    assert!(err.is_finite() && err <= 1e-4);
    let n = AttentionModel::param_count(3, 4, 2, 2);
    let a = AttentionModel::from_params(3, 4, 2, 2, true, vec![0.0; n]).unwrap();
    assert!(gradient_check(&a, &b, 1e-5).unwrap().is_finite());
}

#[test]
fn gradient_check_rejects_bad_step() {
    let m = InstanceModel::new(2, 2, 2, Pooling::MeanProb, 0);
    let b = bag(1, 3, 2, 1);
    for eps in [0.0, -1e-5, 0.1, f64::NAN] {
        assert!(matches!(gradient_check(&m, &b, eps), Err(Error::Parameter(_))));
    }
}

#[test]
fn attention_weights_form_a_distribution() {
    let m = AttentionModel::new(4, 5, 3, 2, true, 9);
    for k in [1, 2, 17] {
        let w = m.attention_weights(&bag(k as u64, k, 4, 0)).unwrap();
        assert_eq!(w.len(), k);
        assert!(w.iter().all(|v| *v >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let flat = AttentionModel::new(4, 5, 3, 2, false, 9);
    let w = flat.attention_weights(&bag(1, 4, 4, 0)).unwrap();
    assert_eq!(w, vec![0.25; 4]);
    assert!(matches!(flat.inherent(&bag(1, 4, 4, 0)), Err(Error::NoInherentMethod(_))));
}

#[test]
fn mean_prob_inherent_averages_to_bag_prediction() {
    let m = InstanceModel::new(3, 5, 3, Pooling::MeanProb, 21);
    let b = bag(8, 6, 3, 0);
    let phi = m.inherent(&b).unwrap();
    let p = m.predict(&b).unwrap();
    for c in 0..3 {
        let mean = phi.row(c).unwrap().iter().sum::<f64>() / 6.0;
        assert!((mean - p.prob(c)).abs() < 1e-12);
    }
}

#[test]
fn singleton_bag_inherent_equals_prediction() {
    for pooling in [Pooling::MeanLogit, Pooling::MeanProb, Pooling::MaxProb, Pooling::MaxLogit] {
        let m = InstanceModel::new(3, 4, 3, pooling, 5);
        let b = bag(2, 1, 3, 1);
        let phi = m.inherent(&b).unwrap();
        let p = m.predict(&b).unwrap();
        for c in 0..3 {
            assert!((phi.get(c, 0).unwrap() - p.prob(c)).abs() < 1e-12);
        }
    }
}

#[test]
fn max_pooling_is_monotone_in_added_instances() {
    // un-normalised per-class maximum can only grow as instances are added
    let m = InstanceModel::new(3, 4, 3, Pooling::MaxProb, 6);
    let b = bag(13, 8, 3, 0);
    let q = m.instance_predictions(&b).unwrap();
    let mut best = vec![0.0f64; 3];
    for (i, qi) in q.iter().enumerate() {
        let prev = best.clone();
        for c in 0..3 {
            best[c] = best[c].max(qi[c]);
            assert!(best[c] >= prev[c]);
        }
        let sub = b.sub_bag(&Coalition::from_indices(8, 0..=i)).unwrap();
        let sub_q = m.instance_predictions(&sub).unwrap();
        let direct: Vec<f64> = (0..3)
            .map(|c| sub_q.iter().map(|v| v[c]).fold(0.0, f64::max))
            .collect();
        assert_eq!(direct, best);
    }
}

#[test]
fn oracle_follows_the_four_class_rule() {
    let ds = generate_fourclass(&small_config(1)).unwrap();
    let oracle = OracleModel::from_dataset(&ds, DEFAULT_EPSILON).unwrap();
    let a = ds.centers().iter().find(|c| c.tag == InstanceTag::Key(1)).unwrap().mean.clone();
    let bb = ds.centers().iter().find(|c| c.tag == InstanceTag::Key(2)).unwrap().mean.clone();
    let bg = vec![0.0; 4];
    let cases = [
        (vec![bg.clone(), bg.clone()], 0),
        (vec![bg.clone(), a.clone()], 1),
        (vec![bb.clone(), bg.clone()], 2),
        (vec![a.clone(), bb.clone()], 3),
        (vec![a.clone()], 1),
    ];
    for (instances, expected) in cases {
        let p = oracle.predict(&Bag::new(instances, 0).unwrap()).unwrap();
        assert_eq!(p.argmax(), expected);
        assert!((p.prob(expected) - (1.0 - 3.0 * DEFAULT_EPSILON)).abs() < 1e-12);
        for c in (0..4).filter(|&c| c != expected) {
            assert_eq!(p.prob(c), DEFAULT_EPSILON);
        }
    }
    assert!(accuracy(&oracle, ds.split(Split::Test)).unwrap() >= 0.99);
}

#[test]
fn oracle_rejects_bad_smoothing() {
    let ds = generate_fourclass(&small_config(1)).unwrap();
    for eps in [-0.1, 0.3, 0.5] {
        assert!(OracleModel::from_dataset(&ds, eps).is_err());
    }
    let o = OracleModel::from_dataset(&ds, 0.0).unwrap();
    assert!(o.predict(&ds.bags()[0]).unwrap().probs().contains(&1.0));
}

#[test]
fn zero_epochs_leaves_initial_parameters() {
    let ds = generate_smil(&small_config(2), 0.2).unwrap();
    let cfg = TrainConfig {
        max_epochs: 0,
        seed: 4,
        ..TrainConfig::default()
    };
    let (m, log) = train(ModelKind::Instance, &ds, &cfg).unwrap();
    assert!(log.epochs.is_empty());
    let fresh = InstanceModel::new(4, cfg.hidden, 2, cfg.pooling, 4);
    assert_eq!(m, Model::Instance(fresh));
}

#[test]
fn training_is_deterministic_and_learns_smil() {
    let ds = generate_smil(&small_config(3), 0.15).unwrap();
    let cfg = TrainConfig {
        max_epochs: 15,
        patience: 5,
        learning_rate: 3e-3,
        seed: 7,
        ..TrainConfig::default()
    };
    for kind in [ModelKind::Instance, ModelKind::Attention, ModelKind::Embedding] {
        let (a, log_a) = train(kind, &ds, &cfg).unwrap();
        let (b, log_b) = train(kind, &ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(log_a, log_b);
        assert_eq!(a.kind_name(), kind.name());
        let acc = accuracy(&a, ds.split(Split::Test)).unwrap();
        assert!(acc >= 0.9, "{kind:?} accuracy {acc}");
    }
}

#[test]
fn stalled_runs_restart_and_keep_the_best_attempt() {
    let ds = generate_smil(&small_config(3), 0.15).unwrap();
    let base = TrainConfig {
        max_epochs: 2,
        patience: 2,
        seed: 7,
        ..TrainConfig::default()
    };
    // unreachable threshold: every attempt runs
    let all = TrainConfig { restarts: 2, restart_below: 1.0, ..base.clone() };
    let (m, log) = train(ModelKind::Attention, &ds, &all).unwrap();
    assert!(log.attempt <= 2);
    let val = |m: &Model| match m {
        Model::Attention(a) => super::train::evaluate(a, ds.split(Split::Val)).unwrap().0,
        _ => unreachable!(),
    };
    let single = |restarts, restart_below| {
        train(ModelKind::Attention, &ds, &TrainConfig { restarts, restart_below, ..base.clone() }).unwrap().0
    };
    // the first attempt is the plain run, and the kept one has the lowest val loss
    let first = single(0, 1.0);
    assert!(val(&m) <= val(&first));
    assert_eq!(single(2, 0.0), first);
    assert_eq!(train(ModelKind::Attention, &ds, &all).unwrap().0, m);
    let bad = TrainConfig { restart_below: 1.5, ..base };
    assert!(matches!(train(ModelKind::Instance, &ds, &bad), Err(Error::Config(_))));
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let models = [
        Model::Instance(InstanceModel::new(3, 4, 2, Pooling::MaxProb, 1)),
        Model::Instance(InstanceModel::new(3, 4, 2, Pooling::MaxLogit, 1)),
        Model::Attention(AttentionModel::new(3, 4, 5, 4, true, 2)),
        Model::Attention(AttentionModel::new(3, 4, 5, 4, false, 3)),
    ];
    for m in models {
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        let (p, q) = (m.as_network().unwrap().params(), back.as_network().unwrap().params());
        assert!(p.iter().zip(q).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(m, back);
    }
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let m = Model::Instance(InstanceModel::new(2, 2, 2, Pooling::MeanLogit, 1));
    let mut buf = Vec::new();
    write_checkpoint(&m, &mut buf).unwrap();

    let mut bad_magic = buf.clone();
    bad_magic[0] = b'X';
    let truncated = buf[..buf.len() - 3].to_vec();
    let mut trailing = buf.clone();
    trailing.push(0);
    let mut bad_kind = buf.clone();
    bad_kind[12] = 9;
    for bytes in [bad_magic, truncated, trailing, bad_kind] {
        assert!(matches!(read_checkpoint(bytes.as_slice()), Err(Error::Schema(_))));
    }

    let ds = generate_fourclass(&small_config(1)).unwrap();
    let oracle = Model::Oracle(OracleModel::from_dataset(&ds, 0.01).unwrap());
    assert!(write_checkpoint(&oracle, Vec::new()).is_err());
}

#[test]
fn oracle_and_smil_rule_agree() {
    let ds = generate_smil(&small_config(5), 0.2).unwrap();
    assert_eq!(ds.rule(), ClassRule::Smil);
    let oracle = OracleModel::from_dataset(&ds, 0.01).unwrap();
    assert!(matches!(
        Model::Oracle(oracle.clone()).inherent_attributions(&ds.bags()[0]),
        Err(Error::NoInherentMethod(_))
    ));
    assert!(accuracy(&oracle, ds.bags()).unwrap() >= 0.99);
}
