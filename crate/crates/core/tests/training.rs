use mialab_core::data::{make_blobs, BlobSpec};
use mialab_core::defense::DefenseConfig;
use mialab_core::harness::{accuracy, mean_loss, train_model, TrainSettings, Trainer};

fn separable() -> BlobSpec {
    BlobSpec {
        num_classes: 2,
        points_per_class: 100,
        dimension: 2,
        separation: 10.0,
        spread: 0.5,
        seed: 3,
    }
}

fn settings(epochs: usize) -> TrainSettings {
    TrainSettings {
        epochs,
        batch_size: 32,
        learning_rate: 0.01,
    }
}

#[test]
fn linear_model_separates_far_blobs() {
    let data = make_blobs(&separable()).unwrap();
    let trained = train_model(
        data.features(),
        data.labels(),
        &[2, 2],
        &DefenseConfig::None,
        settings(100),
        1,
    )
    .unwrap();
    assert_eq!(
        accuracy(&trained.model, data.features(), data.labels()).unwrap(),
        1.0
    );
}

#[test]
fn training_loss_decreases() {
    let spec = BlobSpec {
        num_classes: 4,
        points_per_class: 50,
        dimension: 8,
        separation: 3.0,
        spread: 1.0,
        seed: 11,
    };
    let data = make_blobs(&spec).unwrap();
    let mut monotone = 0;
    for seed in 0..20 {
        let trained = train_model(
            data.features(),
            data.labels(),
            &[8, 32, 4],
            &DefenseConfig::None,
            TrainSettings {
                epochs: 10,
                batch_size: 16,
                learning_rate: 1e-3,
            },
            seed,
        )
        .unwrap();
        let l = &trained.epoch_losses;
        assert!(l[9] < l[0], "seed {seed}: {l:?}");
        monotone += l.windows(2).all(|w| w[1] < w[0]) as usize;
    }
    assert!(monotone >= 19, "{monotone}/20 monotone runs");
}

#[test]
fn training_is_deterministic_per_seed() {
    let data = make_blobs(&separable()).unwrap();
    for defense in ["none", "dropout", "mixup", "adamixup", "dpsgd", "l1"] {
        let defense = DefenseConfig::from_tag(defense).unwrap();
        let run = |seed| {
            train_model(
                data.features(),
                data.labels(),
                &[2, 8, 2],
                &defense,
                settings(3),
                seed,
            )
            .unwrap()
        };
        let (a, b, c) = (run(5), run(5), run(6));
        assert_eq!(a.model, b.model);
        assert_eq!(a.epoch_losses, b.epoch_losses);
        assert_ne!(a.model, c.model);
    }
}

#[test]
fn heavy_noise_keeps_accuracy_near_chance() {
    let spec = BlobSpec {
        num_classes: 4,
        points_per_class: 100,
        dimension: 8,
        separation: 6.0,
        spread: 0.5,
        seed: 9,
    };
    let data = make_blobs(&spec).unwrap();
    let train = |defense: &DefenseConfig| {
        let trained = train_model(
            data.features(),
            data.labels(),
            &[8, 32, 4],
            defense,
            settings(20),
            4,
        )
        .unwrap();
        accuracy(&trained.model, data.features(), data.labels()).unwrap()
    };
    let clean = train(&DefenseConfig::None);
    let noisy = train(&DefenseConfig::ClippedNoisy {
        clip_norm: 1.0,
        noise_multiplier: 100.0,
    });
    assert!(clean > 0.95, "clean accuracy {clean}");
    // Chance is 0.25; the noise swamps a per-example signal of norm ≤ 1.
    assert!(noisy < 0.45, "noisy accuracy {noisy}");
}

#[test]
fn adamixup_uses_the_epoch_schedule() {
    let data = make_blobs(&separable()).unwrap();
    let mut trainer = Trainer::new(
        &[2, 4, 2],
        &DefenseConfig::AdaMixup {
            lambda_initial: 1.0,
            lambda_min: 0.1,
        },
        settings(4),
        0,
    )
    .unwrap();
    let lambdas: Vec<f64> = (0..4)
        .map(|t| trainer.lambda_for_epoch(t).unwrap().unwrap())
        .collect();
    assert_eq!(lambdas[0], 1.0);
    assert!((lambdas[2] - 0.55).abs() < 1e-15);
    assert!(lambdas.windows(2).all(|w| w[1] < w[0]));
    for _ in 0..4 {
        trainer.run_epoch(data.features(), data.labels()).unwrap();
    }
    assert_eq!(trainer.epochs_run(), 4);
    assert!(trainer.run_epoch(data.features(), data.labels()).is_err());
    assert!(mean_loss(trainer.model(), data.features(), data.labels())
        .unwrap()
        .is_finite());
}

#[test]
fn non_mixing_defenses_have_no_schedule() {
    let trainer = Trainer::new(&[2, 2], &DefenseConfig::None, settings(2), 0).unwrap();
    assert_eq!(trainer.lambda_for_epoch(0).unwrap(), None);
}
