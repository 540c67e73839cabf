use std::sync::OnceLock;

use acgan_core::classifier::*;
use acgan_core::container::Container;
use acgan_core::data::*;
use acgan_core::nn::{RngStream, Tensor};
use acgan_core::Error;

fn shapes(k: usize, per_class: usize, seed: u64, split: SplitTag) -> LabeledImageDataset {
    let mut ds = generate_shapes(&ShapesConfig::new(k, 32, per_class, seed)).unwrap();
    ds.split = split;
    ds
}

fn config(k: usize, iterations: u64) -> ClassifierConfig {
    ClassifierConfig {
        num_classes: k,
        iterations,
        ..Default::default()
    }
}

fn trained() -> &'static (Classifier, AccuracyReport, LabeledImageDataset) {
    static MODEL: OnceLock<(Classifier, AccuracyReport, LabeledImageDataset)> = OnceLock::new();
    MODEL.get_or_init(|| {
        let train = shapes(4, 1000, 1, SplitTag::Train);
        let held = shapes(4, 250, 2, SplitTag::HeldOut);
        let (m, r) = train_classifier(&train, &held, config(4, 800)).unwrap();
        (m, r, held)
    })
}

fn tiny_model(seed: u64) -> Classifier {
    Classifier::new(ClassifierConfig {
        num_classes: 3,
        resolution: 8,
        width_divisor: 16,
        batch_size: 4,
        iterations: 3,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn random_images(n: usize, side: usize, seed: u64) -> Tensor<f32> {
    let mut r = RngStream::new(seed);
    let data = (0..n * 3 * side * side).map(|_| (r.uniform() * 2.0 - 1.0) as f32 * 0.999).collect();
    Tensor::new(&[n, 3, side, side], data).unwrap()
}

#[test]
fn shapes_held_out_accuracy_is_high() {
    let (_, report, held) = trained();
    assert_eq!(report.total(), held.len());
    assert!(report.overall >= 0.97, "held-out accuracy {}", report.overall);
}

#[test]
fn untrained_model_is_at_chance() {
    let train = shapes(4, 40, 3, SplitTag::Train);
    let held = shapes(4, 100, 4, SplitTag::HeldOut);
    let (_, r) = train_classifier(&train, &held, config(4, 0)).unwrap();
    let (p, n) = (0.25, held.len() as f64);
    let sigma = (p * (1.0 - p) / n).sqrt();
    assert!((r.overall - p).abs() <= 3.0 * sigma, "accuracy {}", r.overall);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let train = shapes(3, 8, 5, SplitTag::Train);
    let cfg = ClassifierConfig {
        num_classes: 3,
        width_divisor: 16,
        batch_size: 6,
        iterations: 4,
        seed: 9,
        ..Default::default()
    };
    let mut a = Classifier::new(cfg.clone()).unwrap();
    let mut b = Classifier::new(cfg).unwrap();
    a.train(&train).unwrap();
    b.train(&train).unwrap();
    assert_eq!(a.to_container().to_bytes(), b.to_container().to_bytes());
    assert_eq!(a.checksum(), b.checksum());
    let fresh = Classifier::new(a.config.clone()).unwrap();
    assert_ne!(a.checksum(), fresh.checksum());
}

#[test]
fn distributions_are_normalized_and_row_independent() {
    let m = tiny_model(1);
    let mut imgs = random_images(5, 8, 2);
    let first = imgs.slice_outer(0, 1).unwrap();
    imgs = Tensor::stack_outer(&[imgs, first.clone(), first]).unwrap();
    let d = m.predict_dist(&imgs).unwrap();
    assert_eq!(d.shape(), &[7, 3]);
    for row in d.data().chunks(3) {
        let s: f64 = row.iter().map(|&v| v as f64).sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
    assert_eq!(d.data()[0..3], d.data()[15..18]);
    assert_eq!(d.data()[15..18], d.data()[18..21]);
    assert_eq!(m.predict_dist(&imgs).unwrap(), d);
}

#[test]
fn zero_final_layer_gives_uniform_rows() {
    let mut m = tiny_model(2);
    let last = m.network.spec.layers.len() - 1;
    for (name, t) in m.network.params.iter_mut() {
        if name.starts_with(&format!("classifier.l{last:02}.")) {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let d = m.predict_dist(&random_images(4, 8, 3)).unwrap();
    assert!(d.data().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-7));
    let report = m.top1_accuracy(&random_images(4, 8, 3), &[0, 1, 2, 0]).unwrap();
    assert_eq!(report.correct, vec![2, 0, 0]);
}

#[test]
fn input_checks() {
    let m = tiny_model(3);
    assert!(matches!(m.predict_dist(&random_images(2, 16, 1)), Err(Error::Shape(_))));
    let mut bad = random_images(2, 8, 1);
    bad.data_mut()[5] = 1.5;
    assert!(matches!(m.predict_dist(&bad), Err(Error::InvalidArgument(_))));
    assert!(m.top1_accuracy(&random_images(2, 8, 1), &[0]).is_err());
}

#[test]
fn accuracy_matches_counting_oracle() {
    let mut r = RngStream::new(11);
    let (n, k) = (200, 5);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let row: Vec<f32> = (0..k).map(|_| (r.below(4) as f32) / 4.0).collect();
        data.extend(row);
        labels.push(r.below(k));
    }
    let dist = Tensor::new(&[n, k], data.clone()).unwrap();
    let report = accuracy_from_dist(&dist, &labels).unwrap();
    let mut correct = vec![0usize; k];
    let mut counts = vec![0usize; k];
    for i in 0..n {
        let row = &data[i * k..(i + 1) * k];
        let top = row.iter().cloned().fold(f32::MIN, f32::max);
        let first = row.iter().position(|&v| v == top).unwrap();
        counts[labels[i]] += 1;
        if first == labels[i] {
            correct[labels[i]] += 1;
        }
    }
    assert_eq!(report.counts, counts);
    assert_eq!(report.correct, correct);
    assert_eq!(report.overall, correct.iter().sum::<usize>() as f64 / n as f64);

    let mut order: Vec<usize> = (0..n).collect();
    RngStream::new(12).shuffle(&mut order);
    let shuffled = Tensor::new(&[n, k], order.iter().flat_map(|&i| data[i * k..(i + 1) * k].to_vec()).collect()).unwrap();
    let relabeled: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
    assert_eq!(accuracy_from_dist(&shuffled, &relabeled).unwrap(), report);
}

#[test]
fn labels_equal_to_argmax_score_one() {
    let (m, _, held) = trained();
    let imgs = held.images(&(0..40).collect::<Vec<_>>());
    let predicted = argmax_rows(&m.predict_dist(&imgs).unwrap()).unwrap();
    assert_eq!(m.top1_accuracy(&imgs, &predicted).unwrap().overall, 1.0);
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clf.ckpt");
    let mut m = tiny_model(4);
    let train = generate_shapes(&ShapesConfig::new(3, 8, 4, 1)).unwrap();
    m.train(&train).unwrap();
    m.save(&path).unwrap();
    let back = Classifier::load(&path).unwrap();
    assert_eq!(back.to_container().to_bytes(), m.to_container().to_bytes());
    assert_eq!(back.checksum(), m.checksum());
    let imgs = random_images(3, 8, 5);
    assert_eq!(back.predict_dist(&imgs).unwrap(), m.predict_dist(&imgs).unwrap());

    let mut c = Container::load(&path).unwrap();
    c.kind = acgan_core::container::ContainerKind::AcGan;
    assert!(matches!(Classifier::from_container(&c), Err(Error::Mismatch(_))));
}

#[test]
fn single_class_dataset_rejected() {
    let ds = generate_shapes(&ShapesConfig::new(1, 32, 4, 1)).unwrap();
    let r = train_classifier(&ds, &ds, config(1, 1));
    assert!(matches!(r, Err(Error::Config(_))));
}
