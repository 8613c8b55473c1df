use super::*;
use crate::autodiff::Graph;
use crate::error::Error;
use crate::mri::zero_fill_recon;
use crate::nets::{bind_params, NetParams, Variant};
use num_complex::Complex64;

fn tiny(count: usize) -> Vec<Sample> {
    let src = DataSource::Synthetic { count, size: 16, seed: 3 };
    build_dataset(&src, MaskSpec { accel: 4.0, center_fraction: 0.125, seed: 1 }, 0.005, true).unwrap()
}

fn tiny_cfg(variant: Variant) -> TrainConfig {
    TrainConfig { variant, epochs: 2, batch_size: 3, train_count: 6, val_count: 2, image_size: 16, base_images: 1, seed: 4, ..Default::default() }
}

#[test]
fn batch_loss_is_mean_of_sample_losses() {
    let data = tiny(1);
    let mut p = NetParams::init(Variant::Cp, 2);
    p.tensors_mut().iter_mut().filter(|t| t.name.contains("conv3.weight")).for_each(|t| t.data.iter_mut().enumerate().for_each(|(i, x)| *x = 1e-3 * ((i % 5) as f64 - 2.0)));
    let mut g = Graph::new();
    let vars = bind_params(&mut g, &p).unwrap();
    let batch = [&data[0], &data[1]];
    let loss = batch_loss(&mut g, &p, &vars, &batch).unwrap();
    let (a, b) = (sample_loss(&p, &data[0]).unwrap(), sample_loss(&p, &data[1]).unwrap());
    assert!((g.value(loss).item() - (a + b) / 2.0).abs() < 1e-12);
    assert!(a > 0.0 && a != b);
}

#[test]
fn loss_vanishes_when_output_equals_reference() {
    let mut s = tiny(1).remove(0);
    s.m_ref = zero_fill_recon(&s.f, &s.mask).unwrap();
    let p = NetParams::init(Variant::Pd, 0);
    let mut g = Graph::new();
    let vars = bind_params(&mut g, &p).unwrap();
    let loss = batch_loss(&mut g, &p, &vars, &[&s]).unwrap();
    assert_eq!(g.value(loss).item(), 0.0);
    assert!(batch_loss(&mut g, &p, &vars, &[]).is_err());
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let data = tiny(1);
    let cfg = TrainConfig { learning_rate: 0.0, ..tiny_cfg(Variant::PdhgCs) };
    let mut t = Trainer::new(cfg, &data).unwrap();
    let before = t.params().clone();
    for _ in 0..3 {
        t.train_step(&[0, 1]).unwrap();
    }
    assert_eq!(t.params(), &before);
    assert_eq!(t.steps(), 3);
}

#[test]
fn seeded_training_is_reproducible() {
    let data = tiny(1);
    let cfg = tiny_cfg(Variant::Cp);
    let (c1, h1) = train(&cfg, &data).unwrap();
    let (c2, h2) = train(&cfg, &data).unwrap();
    assert_eq!(h1, h2);
    assert_eq!(h1.records.len(), 2);
    assert_eq!(c1.encode(), c2.encode());
    assert_ne!(c1.params(), &NetParams::init(Variant::Cp, cfg.seed));
    let mut buf = Vec::new();
    h1.write_json_lines(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 2);
    let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for k in ["epoch", "train_loss", "val_loss", "wall_time_s"] {
        assert!(v.get(k).is_some(), "{k}");
    }
}

#[test]
fn best_checkpoint_tracks_lowest_validation_loss() {
    let data = tiny(1);
    let cfg = TrainConfig { epochs: 3, learning_rate: 1e-2, ..tiny_cfg(Variant::Pd) };
    let (ckpt, hist) = train(&cfg, &data).unwrap();
    let best = hist.records.iter().min_by(|a, b| a.val_loss.total_cmp(&b.val_loss)).unwrap();
    assert_eq!(ckpt.meta().epoch, best.epoch);
    assert_eq!(ckpt.meta().val_loss, Some(best.val_loss));
    assert_eq!(ckpt.meta().config.as_ref(), Some(&cfg));
}

#[test]
fn non_finite_loss_reports_context() {
    let mut data = tiny(1);
    data[0].f.data_mut()[0] = Complex64::new(f64::NAN, 0.0);
    let mut t = Trainer::new(tiny_cfg(Variant::Pd), &data).unwrap();
    match t.train_step(&[0]) {
        Err(Error::Training { epoch: 1, step: 1, .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn config_is_validated() {
    let data = tiny(1);
    assert!(matches!(Trainer::new(TrainConfig { train_count: 7, ..tiny_cfg(Variant::Pd) }, &data), Err(Error::Config(_))));
    assert!(matches!(Trainer::new(tiny_cfg(Variant::Pd), &[]), Err(Error::Config(_))));
    assert!(Trainer::new(TrainConfig { batch_size: 0, ..tiny_cfg(Variant::Pd) }, &data).is_err());
    assert_eq!(TrainConfig::default().steps_per_epoch(), 350);
}

#[test]
fn validation_reports_baseline_and_checks_variant() {
    let data = tiny(1);
    let a = Checkpoint::new(NetParams::init(Variant::Pd, 0), CheckpointMeta::default());
    let mut p = NetParams::init(Variant::Pd, 1);
    p.tensors_mut().iter_mut().for_each(|t| t.data.iter_mut().for_each(|x| *x *= 1.5));
    let b = Checkpoint::new(p, CheckpointMeta::default());
    let sa = validate(&a, &data, Some(Variant::Pd)).unwrap();
    let sb = validate(&b, &data, None).unwrap();
    assert_eq!(sa.zero_fill, sb.zero_fill);
    assert_eq!(sa.count, 8);
    // untrained PD-net is zero-fill
    assert_eq!(sa.network, sa.zero_fill);
    assert!(matches!(validate(&a, &data, Some(Variant::Cp)), Err(Error::Contract(_))));
    assert!(validate(&a, &[], None).is_err());
    let j = sa.to_json();
    assert!(j["network"]["psnr"]["mean"].is_number());
}
