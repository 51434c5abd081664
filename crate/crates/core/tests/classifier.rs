mod common;

use common::{gaussian_blobs, nearest_centroid_accuracy};
use plotgrid::classifier::{accuracy, train, TrainConfig};

#[test]
fn blobs_are_separable_by_nearest_centroid() {
    let (data, _) = gaussian_blobs(10, 100, 5.0, 7);
    assert!(nearest_centroid_accuracy(&data, 10) >= 0.99);
}

#[test]
fn blob_training_converges() {
    let (data, catalog) = gaussian_blobs(10, 100, 5.0, 7);
    let cfg = TrainConfig {
        epochs: 200,
        ..TrainConfig::default()
    };
    let out = train(&data, &catalog, &cfg).unwrap();
    let acc = accuracy(&out.model, &data).unwrap();
    println!(
        "initial {} final {} acc {acc}",
        out.initial_loss(),
        out.final_loss()
    );
    assert!(acc >= 0.99, "accuracy {acc}");
    assert!(out.final_loss() * 10.0 <= out.initial_loss());
    assert_eq!(out.loss_trace.len(), 201);
}

#[test]
fn same_seed_is_bit_identical() {
    let (data, catalog) = gaussian_blobs(4, 30, 3.0, 1);
    let cfg = TrainConfig {
        epochs: 5,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let a = train(&data, &catalog, &cfg).unwrap();
    let b = train(&data, &catalog, &cfg).unwrap();
    assert_eq!(a.model.to_bytes(), b.model.to_bytes());
    let c = train(&data, &catalog, &TrainConfig { seed: 8, ..cfg }).unwrap();
    assert_ne!(a.model.to_bytes(), c.model.to_bytes());
}
