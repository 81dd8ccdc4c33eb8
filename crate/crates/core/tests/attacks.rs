use distleak::attacks::{
    attack, attack_features, evaluate_attack, shadow_labels, train_meta, train_shadows, AttackMode, AttackTask,
};
use distleak::datagen::{DistributionFamily, ExpAParams, IndexSet};
use distleak::game::TrainerConfig;
use distleak::nets::{permute_units, TrainOptions};
use distleak::numerics::SeededRng;
use distleak::Error;

fn trainer(hidden: usize) -> TrainerConfig {
    let options = TrainOptions { learning_rate: 0.01, max_epochs: 3, batch_size: 32, target_train_mse: None };
    TrainerConfig::erm(vec![hidden], options)
}

fn exp_a(eps: f64) -> DistributionFamily {
    DistributionFamily::exp_a(ExpAParams { weight_noise_std: eps, teacher_seed: 3, n: 128 }).unwrap()
}

#[test]
fn shadow_labels_are_stratified_or_on_a_grid() {
    assert_eq!(shadow_labels(4, AttackTask::Classify), vec![0.0, 0.0, 1.0, 1.0]);
    assert_eq!(shadow_labels(5, AttackTask::Regress), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn too_few_shadows_is_an_invalid_parameter() {
    let err = train_shadows(&exp_a(0.1), &trainer(4), 1, AttackTask::Classify, &SeededRng::new(1, 0)).unwrap_err();
    assert!(matches!(err, Error::InvalidParameter(_)), "{err}");
}

#[test]
fn regression_on_a_binary_family_is_rejected() {
    let err = train_shadows(&exp_a(0.1), &trainer(4), 4, AttackTask::Regress, &SeededRng::new(1, 0)).unwrap_err();
    assert!(matches!(err, Error::InvalidConfiguration(_)), "{err}");
}

#[test]
fn shadow_corpora_are_reproducible() {
    let family = exp_a(0.1);
    let rng = SeededRng::new(9, 0);
    let a = train_shadows(&family, &trainer(4), 6, AttackTask::Classify, &rng).unwrap();
    let b = train_shadows(&family, &trainer(4), 6, AttackTask::Classify, &rng).unwrap();
    for mode in [AttackMode::Whitebox, AttackMode::Blackbox] {
        assert_eq!(a.corpus(mode).unwrap().records, b.corpus(mode).unwrap().records);
    }
}

#[test]
fn whitebox_features_ignore_hidden_unit_order() {
    let family = exp_a(0.1);
    let shadows = train_shadows(&family, &trainer(6), 2, AttackTask::Classify, &SeededRng::new(4, 0)).unwrap();
    let model = &shadows.models[0];
    let mut shuffled = model.clone();
    permute_units(&mut shuffled, 0, &[3, 0, 5, 1, 4, 2]);
    assert_ne!(model.weights(0), shuffled.weights(0));
    let f = |m| attack_features(m, AttackMode::Whitebox, None).unwrap();
    assert_eq!(f(model), f(&shuffled));
}

#[test]
fn resubstitution_recovers_most_shadow_labels() {
    let family = exp_a(0.5);
    let shadows = train_shadows(&family, &trainer(4), 40, AttackTask::Classify, &SeededRng::new(5, 0)).unwrap();
    let meta = train_meta(&shadows.corpus(AttackMode::Blackbox).unwrap()).unwrap();
    let hits = shadows
        .models
        .iter()
        .zip(&shadows.labels)
        .filter(|(m, &r)| attack(&meta, m).unwrap() == r)
        .count();
    assert!(hits >= 36, "{hits} of 40");
}

#[test]
fn attacking_another_architecture_is_a_configuration_error() {
    let family = exp_a(0.1);
    let rng = SeededRng::new(6, 0);
    let shadows = train_shadows(&family, &trainer(4), 4, AttackTask::Classify, &rng).unwrap();
    let meta = train_meta(&shadows.corpus(AttackMode::Whitebox).unwrap()).unwrap();
    let other = train_shadows(&family, &trainer(5), 2, AttackTask::Classify, &rng).unwrap();
    let err = attack(&meta, &other.models[0]).unwrap_err();
    assert!(matches!(err, Error::InvalidConfiguration(_)), "{err}");
}

#[test]
fn constant_regression_guess_has_mae_one_quarter() {
    // Features carry no information, so the ridge fit is the label mean 0.5,
    // and E|r - 0.5| = 1/4 for r uniform on [0, 1].
    let family = DistributionFamily::exp_b(2, 64, IndexSet::Interval);
    let t = trainer(4);
    let rng = SeededRng::new(7, 0);
    let shadows = train_shadows(&family, &t, 5, AttackTask::Regress, &rng).unwrap();
    let mut corpus = shadows.corpus(AttackMode::Whitebox).unwrap();
    corpus.records.iter_mut().for_each(|(f, _)| f.iter_mut().for_each(|v| *v = 0.0));
    let meta = train_meta(&corpus).unwrap();
    let report = evaluate_attack(&meta, &family, &t, 400, &rng).unwrap();
    assert!(report.trials.iter().all(|g| (g.guess_r - 0.5).abs() < 1e-12));
    assert!((report.value - 0.25).abs() <= 3.0 * report.ci95_halfwidth / 1.96, "{} ± {}", report.value, report.ci95_halfwidth);
    assert!((report.advantage - (0.25 - report.value)).abs() < 1e-12);
}

#[test]
fn identical_distributions_give_chance_accuracy() {
    let family = exp_a(0.0);
    let t = trainer(4);
    let rng = SeededRng::new(8, 0);
    let shadows = train_shadows(&family, &t, 40, AttackTask::Classify, &rng).unwrap();
    let meta = train_meta(&shadows.corpus(AttackMode::Blackbox).unwrap()).unwrap();
    let report = evaluate_attack(&meta, &family, &t, 400, &rng).unwrap();
    let se = (0.25f64 / 400.0).sqrt();
    assert!((report.value - 0.5).abs() <= 3.0 * se, "{}", report.value);
}

#[test]
fn zero_attacks_is_rejected() {
    let family = exp_a(0.1);
    let t = trainer(4);
    let rng = SeededRng::new(10, 0);
    let shadows = train_shadows(&family, &t, 4, AttackTask::Classify, &rng).unwrap();
    let meta = train_meta(&shadows.corpus(AttackMode::Whitebox).unwrap()).unwrap();
    assert!(matches!(evaluate_attack(&meta, &family, &t, 0, &rng), Err(Error::InvalidParameter(_))));
}
