use approx::assert_relative_eq;
use proptest::prelude::*;

use symba::dataio::{encode_cifar, encode_idx_images, encode_idx_labels, parse_cifar, parse_idx, CifarVariant, IdxData, Split};
use symba::labeling::{icp_generate, wrong_label, ImageShape, Labeling};
use symba::layer::{layer_forward, normalize_rows, LayerState};
use symba::losses::{goodness, loss_grad_wrt_goodness, softplus, GoodnessPair, LossConfig};
use symba::numerics::{matmul, matmul_at, matmul_bt, AdamConfig};
use symba::trainer::{Checkpoint, FfNetwork, Model};
use symba::{Matrix, Rng, TrainConfig};

/// Multiples of 1/8 up to 64: sums and differences of these are exact.
fn dyadic() -> impl Strategy<Value = f64> {
    (0u32..512).prop_map(|k| f64::from(k) / 8.0)
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

proptest! {
    #[test]
    fn symba_gradients_are_antisymmetric(p in 0.0f64..50.0, q in 0.0f64..50.0, alpha in 0.01f64..20.0) {
        let g = loss_grad_wrt_goodness(&GoodnessPair::new(vec![p], vec![q]).unwrap(), &LossConfig::Symba { alpha });
        prop_assert_eq!(g.d_gpos[0], -g.d_gneg[0]);
    }

    #[test]
    fn symba_is_translation_invariant(p in dyadic(), q in dyadic(), c in dyadic(), alpha in 0.1f64..10.0) {
        let cfg = LossConfig::Symba { alpha };
        prop_assert_eq!(cfg.pair_loss(p, q), cfg.pair_loss(p + c, q + c));
        let a = loss_grad_wrt_goodness(&GoodnessPair::new(vec![p], vec![q]).unwrap(), &cfg);
        let b = loss_grad_wrt_goodness(&GoodnessPair::new(vec![p + c], vec![q + c]).unwrap(), &cfg);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ff_loss_falls_with_positive_and_rises_with_negative_goodness(
        p in 0.0f64..30.0, q in 0.0f64..30.0, d in 0.01f64..5.0, theta in 0.0f64..8.0,
    ) {
        let cfg = LossConfig::Ff { theta };
        prop_assert!(cfg.pair_loss(p + d, q) <= cfg.pair_loss(p, q));
        prop_assert!(cfg.pair_loss(p, q + d) >= cfg.pair_loss(p, q));
        let g = loss_grad_wrt_goodness(&GoodnessPair::new(vec![p], vec![q]).unwrap(), &cfg);
        prop_assert!(g.d_gpos[0] <= 0.0 && g.d_gneg[0] >= 0.0);
    }

    #[test]
    fn losses_are_finite_and_positive(p in 0.0f64..1e6, q in 0.0f64..1e6, theta in 0.0f64..10.0, alpha in 0.1f64..10.0) {
        for cfg in [LossConfig::Ff { theta }, LossConfig::Symba { alpha }] {
            let l = cfg.pair_loss(p, q);
            prop_assert!(l.is_finite() && l >= 0.0, "{cfg:?} {l}");
        }
    }

    #[test]
    fn softplus_difference_is_identity(x in -700.0f64..700.0) {
        assert_relative_eq!(softplus(x) - softplus(-x), x, epsilon = 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn products_agree_with_explicit_transposes(a in matrix(3, 4), b in matrix(4, 5), c in matrix(3, 5)) {
        let ab = matmul(&a, &b).unwrap();
        prop_assert!(matmul_bt(&a, &b.transpose()).unwrap().max_abs_diff(&ab) < 1e-12);
        prop_assert!(matmul_at(&a.transpose(), &b).unwrap().max_abs_diff(&ab) < 1e-12);
        let abc_t = matmul(&ab, &c.transpose()).unwrap();
        let a_bc_t = matmul(&a, &matmul(&b, &c.transpose()).unwrap()).unwrap();
        prop_assert!(abc_t.max_abs_diff(&a_bc_t) < 1e-10);
    }

    #[test]
    fn normalized_rows_have_at_most_unit_norm(m in matrix(4, 6)) {
        let n = normalize_rows(&m, 1e-8);
        for row in n.row_iter() {
            let norm: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(norm <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn layer_outputs_and_goodness_are_nonnegative(seed in any::<u64>(), x in matrix(5, 7)) {
        let layer = LayerState::new(7, 4, AdamConfig::default(), &mut Rng::new(seed));
        let y = layer_forward(&layer, &x).unwrap().output;
        prop_assert!(y.data().iter().all(|&v| v >= 0.0));
        prop_assert!(goodness(&y).unwrap().iter().all(|&g| g >= 0.0));
    }

    #[test]
    fn negative_labels_differ_from_truth(seed in any::<u64>(), k in 2usize..120, t in 0usize..120) {
        let truth = t % k;
        let mut rng = Rng::new(seed);
        for _ in 0..20 {
            let w = wrong_label(truth, k, &mut rng);
            prop_assert!(w != truth && w < k);
        }
    }

    #[test]
    fn overlay_touches_only_the_label_prefix(seed in any::<u64>(), label in 0usize..10) {
        let shape = ImageShape::new(1, 6, 6);
        let img = Rng::new(seed).uniform(1, 36);
        let enc = Labeling::Overlay { on_value: 1.0 }.encode_batch(&img, &[label], shape, 10).unwrap();
        for k in 0..36 {
            let want = if k < 10 { f64::from(u8::from(k == label)) } else { img.get(0, k) };
            prop_assert_eq!(enc.get(0, k), want);
        }
    }

    #[test]
    fn icp_keeps_pixels_and_appends_the_class_pattern(seed in any::<u64>(), label in 0usize..5, rate in 0.05f64..1.0) {
        let shape = ImageShape::new(2, 10, 10);
        let bank = icp_generate(5, 10, 10, rate, seed);
        // Two classes drawing the same pattern is reported, not silently kept.
        prop_assume!(bank.is_ok());
        let img = Rng::new(seed).uniform(1, shape.len());
        let enc = Labeling::Icp(bank.unwrap()).encode_batch(&img, &[label], shape, 5).unwrap();
        prop_assert_eq!(enc.cols(), 300);
        prop_assert_eq!(&enc.row(0)[..200], img.row(0));
        let ones = enc.row(0)[200..].iter().filter(|&&v| v == 1.0).count();
        prop_assert_eq!(ones, (rate * 100.0).round() as usize);
        prop_assert!(enc.row(0)[200..].iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn idx_bytes_round_trip(n in 0usize..6, rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let bytes: Vec<u8> = (0..n * rows * cols).map(|_| rng.below(256) as u8).collect();
        let pixels = Matrix::from_vec(n, rows * cols, bytes.iter().map(|&b| f64::from(b) / 255.0).collect()).unwrap();
        let file = encode_idx_images(&pixels, rows, cols).unwrap();
        match parse_idx(&file).unwrap() {
            IdxData::Images { pixels: back, .. } => {
                prop_assert_eq!(encode_idx_images(&back, rows, cols).unwrap(), file);
            }
            other => prop_assert!(false, "parsed as {other:?}"),
        }
        let labels: Vec<u8> = (0..n).map(|_| rng.below(10) as u8).collect();
        prop_assert_eq!(parse_idx(&encode_idx_labels(&labels)).unwrap(), IdxData::Labels(labels));
    }

    #[test]
    fn cifar_bytes_round_trip(n in 1usize..4, seed in any::<u64>(), hundred in any::<bool>()) {
        let mut rng = Rng::new(seed);
        let (variant, classes) = if hundred { (CifarVariant::Cifar100, 100) } else { (CifarVariant::Cifar10, 10) };
        let mut file = Vec::new();
        for _ in 0..n {
            if hundred {
                file.push(rng.below(20) as u8);
            }
            file.push(rng.below(classes) as u8);
            file.extend((0..3072).map(|_| rng.below(256) as u8));
        }
        let ds = parse_cifar(&file, variant, Split::Test).unwrap();
        let coarse: Vec<u8> = file.chunks(variant.record_size()).map(|r| r[0]).collect();
        prop_assert_eq!(encode_cifar(&ds, variant, hundred.then_some(&coarse[..])).unwrap(), file);
    }

    #[test]
    fn any_single_byte_corruption_is_rejected(pos in any::<prop::sample::Index>(), flip in 1u8..=255) {
        let cfg = TrainConfig { layers: vec![3], ..TrainConfig::default() };
        let net = FfNetwork::new(&cfg, ImageShape::new(1, 4, 4), 3).unwrap();
        let ck = Checkpoint { config: cfg, model: Model::LayerLocal(net), seed: 0, epoch: 0 };
        let mut bytes = ck.to_bytes();
        let i = pos.index(bytes.len());
        bytes[i] ^= flip;
        prop_assert!(Checkpoint::from_bytes(&bytes).is_err());
    }
}
