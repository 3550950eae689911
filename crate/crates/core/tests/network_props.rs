use genisbench::neural::{fit_network, NetConfig, NetworkModel};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("f{i}")).collect()
}

fn random(rows: usize, cols: usize, seed: u64, scale: f64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-scale..scale))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn outputs_are_distributions(k in 2usize..5, d in 1usize..8, seed: u64, lstm: bool, scale in 0.1f64..50.0) {
        let cfg = NetConfig {
            seed,
            ..if lstm { NetConfig::lstm([16, 8]) } else { NetConfig::mlp([16, 8]) }
        };
        let model = NetworkModel::init(cfg, names(d), names(k)).unwrap();
        prop_assert_eq!(model.network.output_dim(), if k == 2 { 1 } else { k });
        let p = model.predict_proba(random(20, d, seed, scale).view()).unwrap();
        prop_assert_eq!(p.ncols(), k);
        for row in p.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        prop_assert!(model.network.all_finite());
    }
}

#[test]
fn same_seed_same_training_log() {
    let x = random(200, 4, 1, 1.0);
    let y: Vec<usize> = x.rows().into_iter().map(|r| usize::from(r[0] + r[1] > 0.0)).collect();
    let run = || {
        let cfg = NetConfig {
            max_epochs: 6,
            seed: 3,
            ..NetConfig::lstm([16, 8])
        };
        let (xt, xv) = (x.slice(ndarray::s![..140, ..]), x.slice(ndarray::s![140.., ..]));
        fit_network(cfg, names(4), names(2), xt, &y[..140], xv, &y[140..]).unwrap()
    };
    let (m1, l1) = run();
    let (m2, l2) = run();
    assert_eq!(l1.train_loss, l2.train_loss);
    assert_eq!(l1.val_loss, l2.val_loss);
    assert_eq!(m1.network, m2.network);
    assert!(l1.epochs() <= 6);
    assert_eq!(l1.epoch_seconds.len(), l1.epochs());
}

#[test]
fn invalid_configs_are_rejected() {
    for cfg in [
        NetConfig { dropout: 1.0, ..NetConfig::default() },
        NetConfig { patience: 0, ..NetConfig::default() },
        NetConfig { batch_size: 0, ..NetConfig::default() },
        NetConfig::mlp([0, 4]),
    ] {
        assert!(NetworkModel::init(cfg, names(2), names(2)).is_err());
    }
}
