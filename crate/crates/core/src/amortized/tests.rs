use super::*;
use crate::exact::{exact_least_squares, exact_shapley};

fn random_table_game(d: usize, seed: u64) -> CoalitionGame {
    let mut rng = RandomSource::new(seed, 77);
    let table: Vec<f64> = (0..1u64 << d).map(|_| rng.normal()).collect();
    CoalitionGame::from_table(d, table).unwrap()
}

fn small_net(objective: Objective, seed: u64) -> ExplainerNet {
    ExplainerNet::new(4, 4, 2, &[6], Activation::Elu, objective, seed).unwrap()
}

fn random_vec(rng: &mut RandomSource, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

#[test]
fn normalization_examples() {
    assert_eq!(additive_efficient_normalization(&[0.0; 3], 3.0), vec![1.0, 1.0, 1.0]);
    let mut rng = RandomSource::new(3, 0);
    let raw = random_vec(&mut rng, 5);
    let once = additive_efficient_normalization(&raw, 2.5);
    assert!((once.iter().sum::<f64>() - 2.5).abs() < 1e-12);
    let twice = additive_efficient_normalization(&once, 2.5);
    for (a, b) in once.iter().zip(&twice) {
        assert!((a - b).abs() < 1e-12);
    }
    let efficient = [1.0, 2.0, -0.5];
    assert_eq!(additive_efficient_normalization(&efficient, 2.5), efficient.to_vec());
}

#[test]
fn zero_net_and_determinism() {
    let mut net = small_net(Objective::SimShap, 1);
    let x = [0.2, -0.4, 1.0, 0.0];
    let a = net.forward(&x).unwrap();
    let b = net.forward(&x).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 2);
    assert!(a.iter().all(|r| r.len() == 4));
    net.mlp_mut().params_mut().iter_mut().for_each(|p| *p = 0.0);
    assert!(net.forward(&x).unwrap().iter().flatten().all(|v| *v == 0.0));
    assert!(net.forward(&[1.0]).is_err());
}

#[test]
fn identity_layer_explainer() {
    let mut params = vec![0.0; 3 * 3 + 3];
    for i in 0..3 {
        params[i * 3 + i] = 1.0;
    }
    let mlp = Mlp::from_params(vec![3, 3], Activation::Relu, params).unwrap();
    let net = ExplainerNet::from_mlp(mlp, 3, 1, Objective::SimShap).unwrap();
    assert_eq!(net.forward(&[1.5, -2.0, 0.25]).unwrap(), vec![vec![1.5, -2.0, 0.25]]);
}

#[test]
fn perfect_prediction_has_zero_loss_and_gradient() {
    let net = small_net(Objective::SimShap, 2);
    let x = vec![0.3, 0.1, -0.7, 0.9];
    let target = net.forward(&x).unwrap()[1].clone();
    let batch = [Supervised { x: &x, class: 1, target }];
    let (loss, grad) = simshap_loss_and_grad(&net, &batch, &MetricMatrix::Identity).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|g| *g == 0.0));
}

fn finite_difference_check(net: &ExplainerNet, loss: impl Fn(&ExplainerNet) -> (f64, Vec<f64>)) {
    let (_, grad) = loss(net);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..grad.len() {
        let mut plus = net.clone();
        plus.mlp_mut().params_mut()[k] += h;
        let mut minus = net.clone();
        minus.mlp_mut().params_mut()[k] -= h;
        let fd = (loss(&plus).0 - loss(&minus).0) / (2.0 * h);
        let scale = fd.abs().max(grad[k].abs()).max(1e-7);
        worst = worst.max((fd - grad[k]).abs() / scale);
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn simshap_gradient_matches_finite_differences() {
    let mut rng = RandomSource::new(5, 0);
    let xs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 4)).collect();
    let targets: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 4)).collect();
    for metric in [MetricMatrix::Identity, MetricMatrix::ShapleyLsv] {
        let net = small_net(Objective::SimShap, 6);
        finite_difference_check(&net, |n| {
            let batch: Vec<Supervised> = xs
                .iter()
                .zip(&targets)
                .enumerate()
                .map(|(k, (x, t))| Supervised { x, class: k % 2, target: t.clone() })
                .collect();
            simshap_loss_and_grad(n, &batch, &metric).unwrap()
        });
    }
}

#[test]
fn fastshap_gradient_matches_finite_differences() {
    let game = random_table_game(4, 8);
    let weights = kernel_normalizer(4).unwrap();
    let mut rng = RandomSource::new(7, 0);
    let xs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 4)).collect();
    let samples: Vec<Vec<(FeatureSubset, f64)>> =
        (0..3).map(|_| sample_subsets(&game, &weights, 8, true, &mut rng)).collect();
    for objective in [Objective::FastShap, Objective::FastShapNormalized] {
        let net = small_net(objective, 9);
        finite_difference_check(&net, |n| {
            let batch: Vec<SubsetBatchItem> = xs
                .iter()
                .zip(&samples)
                .map(|(x, s)| SubsetBatchItem { x, class: 0, v_all: game.v_all(), samples: s.clone() })
                .collect();
            fastshap_loss_and_grad(n, &batch).unwrap()
        });
    }
}

#[test]
fn lsv_metric_matches_cholesky_factor() {
    let mut rng = RandomSource::new(10, 0);
    for d in 2..=8 {
        let m = MetricMatrix::ShapleyLsv.dense(d).unwrap();
        let enumerated = crate::exact::kernel_gram_by_enumeration(d).unwrap();
        assert!((&m - enumerated).amax() < 1e-10);
        let l = m.clone().cholesky().unwrap().l().transpose();
        let g = random_vec(&mut rng, d);
        let t = random_vec(&mut rng, d);
        let diff = DVector::from_column_slice(&g) - DVector::from_column_slice(&t);
        let factored = (&l * diff).norm_squared();
        let direct = MetricMatrix::ShapleyLsv.loss(&g, &t).unwrap();
        assert!((factored - direct).abs() < 1e-10 * direct.max(1.0));
    }
}

#[test]
fn metrics_are_positive_semidefinite() {
    let mut rng = RandomSource::new(11, 0);
    for d in 1..=10 {
        for metric in [MetricMatrix::Identity, MetricMatrix::ShapleyLsv] {
            metric.validate(d).unwrap();
            let m = metric.dense(d).unwrap();
            for _ in 0..100 {
                let x = DVector::from_vec(random_vec(&mut rng, d));
                assert!(x.dot(&(&m * &x)) >= -1e-10 * x.norm_squared());
            }
        }
    }
    let bad = MetricMatrix::Explicit { d: 2, entries: vec![1.0, 2.0, 2.0, 1.0] };
    assert!(bad.validate(2).is_err());
    let asym = MetricMatrix::Explicit { d: 2, entries: vec![1.0, 0.5, 0.0, 1.0] };
    assert!(asym.validate(2).is_err());
}

#[test]
fn weighted_loss_differs_from_metric_loss_by_a_constant() {
    let mut rng = RandomSource::new(12, 0);
    for d in 2..=8 {
        let game = random_table_game(d, d as u64);
        let shapley = exact_least_squares(&game).unwrap().phi;
        let gaps: Vec<f64> = (0..10)
            .map(|_| {
                let g = additive_efficient_normalization(&random_vec(&mut rng, d), game.v_all());
                let metric = MetricMatrix::ShapleyLsv.loss(&g, &shapley).unwrap();
                metric - weighted_subset_loss(&game, &g).unwrap()
            })
            .collect();
        for gap in &gaps {
            assert!((gap - gaps[0]).abs() < 1e-8, "d={d}: {gaps:?}");
        }
    }
}

#[test]
fn symmetric_noise_leaves_the_minimizer_unchanged() {
    let mut rng = RandomSource::new(13, 0);
    for d in 2..=8 {
        let game = random_table_game(d, 40 + d as u64);
        let truth = exact_shapley(&game).unwrap().phi;
        let noise = random_vec(&mut rng, d);
        let plus: Vec<f64> = truth.iter().zip(&noise).map(|(a, n)| a + n).collect();
        let minus: Vec<f64> = truth.iter().zip(&noise).map(|(a, n)| a - n).collect();
        for metric in [MetricMatrix::Identity, MetricMatrix::ShapleyLsv] {
            let clean = quadratic_minimizer(&metric, &[truth.clone()], None).unwrap();
            let noisy = quadratic_minimizer(&metric, &[plus.clone(), minus.clone()], None).unwrap();
            let constrained =
                quadratic_minimizer(&metric, &[plus.clone(), minus.clone()], Some(game.v_all())).unwrap();
            for i in 0..d {
                assert!((clean[i] - noisy[i]).abs() < 1e-10);
                assert!((clean[i] - truth[i]).abs() < 1e-10);
                assert!((constrained[i] - truth[i]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn checkpoint_roundtrip_is_bit_exact() {
    let net = small_net(Objective::FastShapNormalized, 14);
    let cfg = TrainConfig { seed: 99, ..TrainConfig::default() };
    let ckpt = net.to_checkpoint(Some(&cfg), 99);
    let text = ckpt.to_json().unwrap();
    let back = Checkpoint::from_json(&text).unwrap();
    assert_eq!(back, ckpt);
    let restored = ExplainerNet::from_checkpoint(&back).unwrap();
    let bits = |n: &ExplainerNet| n.mlp().params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&restored), bits(&net));
    assert_eq!(restored.objective(), Objective::FastShapNormalized);
    assert!(Checkpoint::from_json("{}").is_err());
}

#[test]
fn inference_normalizes_only_when_asked() {
    let x = [0.5, 0.1, -0.2, 0.3];
    let raw = small_net(Objective::SimShap, 15);
    let out = amortized_inference(&raw, &x, None).unwrap();
    assert_eq!(out[0].phi, raw.forward(&x).unwrap()[0]);
    assert_eq!(out[0].method, Method::AmortizedSimShap);
    let norm = small_net(Objective::FastShapNormalized, 15);
    assert!(amortized_inference(&norm, &x, None).is_err());
    let out = amortized_inference(&norm, &x, Some(&[1.0, -2.0])).unwrap();
    assert!((out[0].total() - 1.0).abs() < 1e-12 && (out[1].total() + 2.0).abs() < 1e-12);
    let xs = vec![x.to_vec(), vec![0.0; 4], vec![1.0; 4]];
    let batch = amortized_inference_batch(&raw, &xs, None).unwrap();
    for (b, x) in batch.iter().zip(&xs) {
        assert_eq!(b, &amortized_inference(&raw, x, None).unwrap());
    }
}

#[test]
fn config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    assert!(TrainConfig { learning_rate: 0.0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { samples: 0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { samples: 3, paired: true, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { samples: 3, paired: false, ..TrainConfig::default() }.validate().is_ok());
}

fn additive_factory(x: &[f64], _class: usize) -> Result<CoalitionGame> {
    let x = x.to_vec();
    CoalitionGame::new(x.len(), move |s| s.iter().map(|i| x[i]).sum())
}

#[test]
fn zero_epochs_returns_the_initialization() {
    let net = ExplainerNet::new(3, 3, 1, &[8], Activation::Relu, Objective::SimShap, 4).unwrap();
    let data = TrainingSet::single_class(vec![vec![1.0, 2.0, 3.0]; 10]).unwrap();
    let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
    let out = train_simshap(net.clone(), &data, &additive_factory, &cfg).unwrap();
    assert_eq!(out.net, net);
    assert_eq!(out.history.to_csv(), "epoch,train_loss,validation_loss\n");
}

#[test]
fn training_is_reproducible_and_fastshap_outputs_are_efficient() {
    let mut rng = RandomSource::new(16, 0);
    let inputs: Vec<Vec<f64>> = (0..40).map(|_| random_vec(&mut rng, 4)).collect();
    let data = TrainingSet::single_class(inputs.clone()).unwrap();
    let cfg = TrainConfig { epochs: 3, batch_size: 8, samples: 8, seed: 3, ..TrainConfig::default() };
    let net = ExplainerNet::new(4, 4, 1, &[16], Activation::Relu, Objective::SimShap, 1).unwrap();
    let a = train_simshap(net.clone(), &data, &additive_factory, &cfg).unwrap();
    let b = train_simshap(net.clone(), &data, &additive_factory, &cfg).unwrap();
    assert_eq!(a.net, b.net);
    assert_eq!(a.history, b.history);
    assert_eq!(a.history.len(), 3);

    let fast = train_fastshap(net, &data, &additive_factory, &cfg, true).unwrap();
    for x in &inputs {
        let game = additive_factory(x, 0).unwrap();
        let phi = amortized_inference(&fast.net, x, Some(&[game.v_all()])).unwrap();
        assert!(phi[0].efficiency_gap(&game).abs() < 1e-8);
    }
}

#[test]
fn divergence_aborts_with_a_dump() {
    let mut rng = RandomSource::new(17, 0);
    let inputs: Vec<Vec<f64>> = (0..32).map(|_| random_vec(&mut rng, 4)).collect();
    let data = TrainingSet::single_class(inputs).unwrap();
    let cfg = TrainConfig {
        epochs: 50,
        batch_size: 4,
        learning_rate: 50.0,
        optimizer: OptimizerKind::Sgd,
        seed: 21,
        ..TrainConfig::default()
    };
    let net = ExplainerNet::new(4, 4, 1, &[16], Activation::Relu, Objective::SimShap, 1).unwrap();
    let err = train_simshap(net, &data, &additive_factory, &cfg).unwrap_err().to_string();
    assert!(err.contains("seed 21"), "{err}");
}

#[test]
fn simshap_target_mean_matches_shapley() {
    let game = random_table_game(6, 18);
    let truth = exact_shapley(&game).unwrap().phi;
    let n = 10_000;
    let mut sum = vec![0.0; 6];
    let mut sq = vec![0.0; 6];
    let mut rng = RandomSource::new(19, 0);
    for _ in 0..n {
        let t = simshap_target(&game, 1, &mut rng, false).unwrap().phi;
        for i in 0..6 {
            sum[i] += t[i];
            sq[i] += t[i] * t[i];
        }
    }
    for i in 0..6 {
        let mean = sum[i] / n as f64;
        let sd = (sq[i] / n as f64 - mean * mean).sqrt();
        assert!((mean - truth[i]).abs() < 5.0 * sd / (n as f64).sqrt(), "feature {i}");
    }
}
