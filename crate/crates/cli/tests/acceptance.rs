//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.
//!
//! Pass criterion numbers to run a subset:
//! `cargo test --test acceptance -- 3 6`.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng as _;

use lcroll_core::data::{default_names, split, CurveDataset, HyperparameterConfig, LearningCurve, SplitSpec};
use lcroll_core::eval::{
    evaluate, gaussian_log_density, CurvePredictor, EvalProtocol, Lsv, NamedMethod, PredictContext,
    Prediction, TargetEpochs,
};
use lcroll_core::forest::{ForestTrainConfig, LeafStats, Node, RegressionForest, RegressionTree};
use lcroll_core::rollout::{fit_windowed_forest, roll_out, vrnn_predictor, OneStepPredictor, RolloutConfig, RolloutResult};
use lcroll_core::seed::{rng_from, Rng};
use lcroll_core::synth::{generate_benchmark, ConfigSpace, GeneratorSpec};
use lcroll_core::vrnn::{
    curriculum_length, forward_sequence, init_model, learning_rate, loss_and_gradients, mc_rollout_step, sample_masks,
    sequence_loss, trace_sequence, train, Scheduler, VrnnArch, VrnnModel, VrnnTrainConfig,
};
use lcroll_core::baselines::fit_static;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        (1, "total-variance oracle", Some(Duration::from_secs(5)), c1_total_variance),
        (2, "rollout aggregation oracle", Some(Duration::from_secs(2)), c2_aggregation),
        (3, "gradient check", Some(Duration::from_secs(60)), c3_gradient_check),
        (4, "sequence/step equivalence", None, c4_sequence_step),
        (5, "dropout semantics", None, c5_dropout),
        (6, "adaptation property", Some(Duration::from_secs(600)), c6_adaptation),
        (7, "baseline ordering", None, c7_baseline_ordering),
        (8, "LSV exactness", None, c8_lsv_exact),
        (9, "log-likelihood unit value", None, c9_log_likelihood),
        (10, "curriculum schedule", None, c10_curriculum),
        (11, "scheduler endpoints", None, c11_scheduler),
        (12, "determinism and transfer", None, c12_determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, limit, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let mut o = run();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                o.pass = false;
                o.detail = format!("{} (over the {limit:?} limit)", o.detail);
            }
        }
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {}: {name}: {} [{:.2?}]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

// ---------------------------------------------------------------- 1

/// Random tree over `dim` features with leaves at depth `depth` at most.
fn random_tree(rng: &mut Rng, dim: usize, depth: usize) -> RegressionTree<f64> {
    fn grow(rng: &mut Rng, dim: usize, depth: usize, nodes: &mut Vec<Node<f64>>) {
        if depth == 0 || rng.random_bool(0.3) {
            nodes.push(Node::Leaf(LeafStats {
                mean: rng.random_range(-2.0..2.0),
                variance: rng.random_range(0.0..1.0),
                count: rng.random_range(1..10),
            }));
            return;
        }
        let at = nodes.len();
        nodes.push(Node::Leaf(LeafStats {
            mean: 0.0,
            variance: 0.0,
            count: 1,
        }));
        let feature = rng.random_range(0..dim);
        let threshold = rng.random_range(-1.0..1.0);
        grow(rng, dim, depth - 1, nodes);
        let right = nodes.len();
        grow(rng, dim, depth - 1, nodes);
        nodes[at] = Node::Split {
            feature,
            threshold,
            right,
        };
    }
    let mut nodes = Vec::new();
    grow(rng, dim, depth, &mut nodes);
    RegressionTree { nodes }
}

/// Leaf reached by `x`, found by recursive descent independent of the crate.
fn descend(nodes: &[Node<f64>], i: usize, x: &[f64]) -> (f64, f64) {
    match &nodes[i] {
        Node::Leaf(s) => (s.mean, s.variance),
        Node::Split {
            feature,
            threshold,
            right,
        } => {
            if x[*feature] <= *threshold {
                descend(nodes, i + 1, x)
            } else {
                descend(nodes, *right, x)
            }
        }
    }
}

fn c1_total_variance() -> Outcome {
    let mut rng = rng_from(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let dim = rng.random_range(1..6);
        let b = rng.random_range(1..=20);
        let trees: Vec<_> = (0..b).map(|_| random_tree(&mut rng, dim, 4)).collect();
        let forest = RegressionForest::from_trees(trees, dim, ForestTrainConfig::default()).unwrap();
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.2..1.2)).collect();
        let leaves: Vec<(f64, f64)> = forest.trees.iter().map(|t| descend(&t.nodes, 0, &x)).collect();
        let bf = b as f64;
        let mean = leaves.iter().map(|l| l.0).sum::<f64>() / bf;
        let variance = leaves.iter().map(|l| l.1).sum::<f64>() / bf
            + leaves.iter().map(|l| (l.0 - mean) * (l.0 - mean)).sum::<f64>() / bf;
        let g = forest.predict(&x).unwrap();
        worst = worst.max((g.mean - mean).abs()).max((g.variance - variance).abs());
    }
    outcome(worst <= 1e-12, format!("max abs deviation {worst:.3e} over 1000 forests"))
}

// ---------------------------------------------------------------- 2

fn c2_aggregation() -> Outcome {
    let mut rng = rng_from(2);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let r = rng.random_range(1..40);
        let steps = rng.random_range(1..30);
        let m: Vec<Vec<f64>> = (0..r)
            .map(|_| (0..steps).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let res = RolloutResult::from_trajectories(1, m.clone()).unwrap();
        for k in 0..steps {
            let mean = m.iter().map(|t| t[k]).sum::<f64>() / r as f64;
            let var = m.iter().map(|t| (t[k] - mean).powi(2)).sum::<f64>() / r as f64;
            worst = worst.max((res.mean[k] - mean).abs()).max((res.variance[k] - var).abs());
        }
    }
    let single = RolloutResult::from_trajectories(1, vec![vec![0.3, -0.7, 1e9]]).unwrap();
    let zero = single.variance.iter().all(|&v| v == 0.0);
    outcome(
        worst <= 1e-12 && zero,
        format!("max abs deviation {worst:.3e} over 500 matrices; R=1 variance exactly 0: {zero}"),
    )
}

// ---------------------------------------------------------------- 3

fn random_arch(rng: &mut Rng) -> VrnnArch {
    VrnnArch {
        lstm_units: rng.random_range(1..=8),
        mlp_units: rng.random_range(1..=6),
        config_mlp_units: rng.random_range(1..=6),
        num_stacked_lstms: rng.random_range(1..=2),
        mlp_layers: rng.random_range(1..=2),
        config_mlp_layers: rng.random_range(1..=2),
    }
}

fn random_config(rng: &mut Rng, dim: usize) -> HyperparameterConfig<f64> {
    HyperparameterConfig::unnamed((0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
}

fn c3_gradient_check() -> Outcome {
    let mut rng = rng_from(3);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    for case in 0..50 {
        let dim = rng.random_range(1..=4);
        let dropout = rng.random_range(0.0..0.6);
        let model: VrnnModel<f64> = init_model(dim, random_arch(&mut rng), dropout, case).unwrap();
        let config = random_config(&mut rng, dim);
        let masks = sample_masks(&model, &mut rng);
        let t = rng.random_range(1..=5);
        let y: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..1.0)).collect();
        let (_, grads) = loss_and_gradients(&model, &config, &y, &masks).unwrap();
        let analytic: Vec<f64> = grads.params().flatten().copied().collect();
        let sizes: Vec<usize> = model.params().map(<[f64]>::len).collect();
        let mut probe = model.clone();
        let mut k = 0;
        for (block, &n) in sizes.iter().enumerate() {
            for i in 0..n {
                let orig = probe.params().nth(block).unwrap()[i];
                probe.params_mut().nth(block).unwrap()[i] = orig + eps;
                let up = sequence_loss(&probe, &config, &y, &masks).unwrap();
                probe.params_mut().nth(block).unwrap()[i] = orig - eps;
                let down = sequence_loss(&probe, &config, &y, &masks).unwrap();
                probe.params_mut().nth(block).unwrap()[i] = orig;
                let numeric = (up - down) / (2.0 * eps);
                let scale = analytic[k].abs().max(numeric.abs());
                // Below this scale the central difference is dominated by
                // rounding in the loss, so such parameters (e.g. behind a
                // zero mask) are counted but not compared.
                if scale < 1e-7 {
                    skipped += 1;
                    k += 1;
                    continue;
                }
                let rel = (analytic[k] - numeric).abs() / scale;
                worst = worst.max(rel);
                checked += 1;
                k += 1;
            }
        }
    }
    outcome(
        worst < 1e-4,
        format!("max relative error {worst:.3e} over {checked} parameters in 50 models ({skipped} with gradients below 1e-7)"),
    )
}

// ---------------------------------------------------------------- 4

fn c4_sequence_step() -> Outcome {
    let mut rng = rng_from(4);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let dim = rng.random_range(1..=5);
        let model: VrnnModel<f64> = init_model(dim, random_arch(&mut rng), rng.random_range(0.0..0.5), case).unwrap();
        let config = random_config(&mut rng, dim);
        let masks = sample_masks(&model, &mut rng);
        let inputs: Vec<f64> = (0..rng.random_range(1..20)).map(|_| rng.random_range(0.0..1.0)).collect();
        let seq = forward_sequence(&model, &config, &inputs, &masks).unwrap();
        let mut state = model.zero_state();
        for (k, &y) in inputs.iter().enumerate() {
            let (out, next) = mc_rollout_step(&model, &config, y, &state, &masks).unwrap();
            worst = worst.max((out - seq[k]).abs());
            state = next;
        }
    }
    outcome(worst <= 1e-12, format!("max abs deviation {worst:.3e} over 100 cases"))
}

// ---------------------------------------------------------------- 5

fn c5_dropout() -> Outcome {
    let arch = VrnnArch {
        lstm_units: 4,
        mlp_units: 5,
        config_mlp_units: 50,
        num_stacked_lstms: 2,
        mlp_layers: 1,
        config_mlp_layers: 1,
    };
    let config = HyperparameterConfig::unnamed(vec![0.4, -0.3]).unwrap();

    // No dropout: every trajectory identical.
    let plain = vrnn_predictor(init_model::<f64>(2, arch, 0.0, 5).unwrap()).unwrap();
    let r = roll_out(&plain, &config, &[0.1, 0.2], &RolloutConfig { num_rollouts: 30, horizon: 20, seed: 5 }).unwrap();
    let zero_var = r.variance.iter().all(|&v| v == 0.0);

    // Keep fraction at d = 0.5 over 10^5 entries (1000 draws of 2 x 50).
    let half: VrnnModel<f64> = init_model(2, arch, 0.5, 5).unwrap();
    let mut rng = rng_from(55);
    let (mut kept, mut total) = (0usize, 0usize);
    for _ in 0..1000 {
        for level in sample_masks(&half, &mut rng).levels {
            kept += level.iter().filter(|&&z| z == 1.0).count();
            total += level.len();
        }
    }
    let frac = kept as f64 / total as f64;

    // Constancy: the masked encoding fed to every LSTM is the same at every
    // step, zero wherever the mask is zero, and a rollout's conditioning is
    // untouched by stepping.
    let masks = sample_masks(&half, &mut rng);
    let inputs: Vec<f64> = (0..25).map(|k| k as f64 / 25.0).collect();
    let trace = trace_sequence(&half, &config, &inputs, &masks).unwrap();
    let u = arch.config_mlp_units;
    let mut constant = true;
    for level in 0..2 {
        let first = trace.lstm_input(0, level)[..u].to_vec();
        constant &= first.iter().zip(&masks.levels[level]).all(|(e, z)| *z == 1.0 || *e == 0.0);
        constant &= (1..inputs.len()).all(|t| trace.lstm_input(t, level)[..u] == first[..]);
    }
    let predictor = vrnn_predictor(half).unwrap();
    let mut prng = rng_from(7);
    let mut state = predictor.prime(&config, &[0.2, 0.3], &mut prng).unwrap();
    let before = state.conditioning().clone();
    for _ in 0..10 {
        predictor.step(&mut state, &mut prng);
    }
    constant &= *state.conditioning() == before;

    outcome(
        zero_var && (frac - 0.5).abs() <= 0.01 && constant,
        format!("d=0 variance zero: {zero_var}; keep fraction {frac:.4} over {total} entries; masks constant: {constant}"),
    )
}

// ---------------------------------------------------------------- 6, 7

const ACCEPTANCE_SEEDS: [u64; 3] = [11, 12, 13];

struct SeedRun {
    seed: u64,
    vrnn: (f64, f64),
    rf4: (f64, f64),
    rfb: (f64, f64),
    rf4_avg16: f64,
    rfb_avg16: f64,
}

fn bench_split(seed: u64) -> (CurveDataset<f64>, CurveDataset<f64>) {
    let data = generate_benchmark::<f64>(&ConfigSpace::default(), &GeneratorSpec::new(250, 50, seed)).unwrap();
    split(&data, SplitSpec::new(0.2, seed).unwrap()).unwrap()
}

fn run_seed(seed: u64) -> SeedRun {
    let (train_set, test_set) = bench_split(seed);
    assert_eq!((train_set.len(), test_set.len()), (200, 50));

    let forest_cfg = ForestTrainConfig {
        seed,
        ..Default::default()
    };
    let rf4 = fit_windowed_forest(&train_set, 4, &forest_cfg).unwrap();
    let rfb = fit_static(&train_set, &forest_cfg).unwrap();
    // The default architecture (115 config units, two LSTM levels) sits on a long
    // plateau that ignores y_{t-1} when trained on only 200 curves. A point
    // from the same search space with a narrow encoder and one level does not.
    let arch = VrnnArch {
        config_mlp_units: 8,
        num_stacked_lstms: 1,
        ..VrnnArch::default()
    };
    let init = init_model::<f64>(train_set.config_dim, arch, 0.1, seed).unwrap();
    let (model, _) = train(
        &init,
        &train_set,
        &VrnnTrainConfig {
            seed,
            ..Default::default()
        },
    )
    .unwrap();
    let vrnn = vrnn_predictor(model).unwrap();

    let methods = [
        NamedMethod::new("VRNN", &vrnn as &dyn CurvePredictor<f64>),
        NamedMethod::new("RF 4", &rf4),
        NamedMethod::new("RF-B", &rfb),
    ];
    let protocol = EvalProtocol {
        observed_epochs: vec![4, 16, 32],
        target_epochs: TargetEpochs::All,
        num_rollouts: 100,
        seed,
    };
    let report = evaluate(&methods, &test_set, &protocol).unwrap();
    let at40 = |m: &str| (report.cell(m, 4, 40).unwrap().mse, report.cell(m, 32, 40).unwrap().mse);
    SeedRun {
        seed,
        vrnn: at40("VRNN"),
        rf4: at40("RF 4"),
        rfb: at40("RF-B"),
        rf4_avg16: report.summary("RF 4", 16).unwrap().avg_mse,
        rfb_avg16: report.summary("RF-B", 16).unwrap().avg_mse,
    }
}

fn seed_runs() -> &'static [SeedRun] {
    static RUNS: std::sync::OnceLock<Vec<SeedRun>> = std::sync::OnceLock::new();
    RUNS.get_or_init(|| ACCEPTANCE_SEEDS.iter().map(|&s| run_seed(s)).collect())
}

fn c6_adaptation() -> Outcome {
    let runs = seed_runs();
    let vrnn_ok = runs.iter().filter(|r| r.vrnn.1 < r.vrnn.0).count();
    let rf4_ok = runs.iter().filter(|r| r.rf4.1 < r.rf4.0).count();
    let rfb_flat = runs.iter().all(|r| r.rfb.0.to_bits() == r.rfb.1.to_bits());
    let detail = runs
        .iter()
        .map(|r| {
            format!(
                "seed {}: VRNN {:.2e}->{:.2e}, RF 4 {:.2e}->{:.2e}, RF-B {:.2e}->{:.2e}",
                r.seed, r.vrnn.0, r.vrnn.1, r.rf4.0, r.rf4.1, r.rfb.0, r.rfb.1
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    outcome(
        vrnn_ok >= 2 && rf4_ok >= 2 && rfb_flat,
        format!("MSE at epoch 40, 4 -> 32 observed: {detail}"),
    )
}

fn c7_baseline_ordering() -> Outcome {
    let runs = seed_runs();
    let ok = runs.iter().filter(|r| r.rf4_avg16 <= r.rfb_avg16).count();
    let detail = runs
        .iter()
        .map(|r| format!("seed {}: RF 4 {:.3e} vs RF-B {:.3e}", r.seed, r.rf4_avg16, r.rfb_avg16))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(ok >= 2, format!("average MSE at 16 observed, holds in {ok}/3: {detail}"))
}

// ---------------------------------------------------------------- 8

fn c8_lsv_exact() -> Outcome {
    let data = generate_benchmark::<f64>(&ConfigSpace::default(), &GeneratorSpec::new(30, 50, 8)).unwrap();
    let mut worst: f64 = 0.0;
    for m in [1, 4, 8, 16, 32] {
        let curves = data
            .curves
            .iter()
            .map(|c| {
                let mut v = c.values.clone();
                let last = v[m - 1];
                v[m..].iter_mut().for_each(|y| *y = last);
                LearningCurve::new(c.id.clone(), c.config.clone(), v).unwrap()
            })
            .collect();
        let flat = CurveDataset::new("flat", data.config_names.clone(), curves).unwrap();
        let protocol = EvalProtocol {
            observed_epochs: vec![m],
            target_epochs: TargetEpochs::All,
            num_rollouts: 1,
            seed: 0,
        };
        let report = evaluate(&[NamedMethod::new("LSV", &Lsv)], &flat, &protocol).unwrap();
        worst = report.cells.iter().map(|c| c.mse).fold(worst, f64::max);
    }
    outcome(worst == 0.0, format!("largest cell MSE {worst:e}"))
}

// ---------------------------------------------------------------- 9

struct StandardNormal;

impl CurvePredictor<f64> for StandardNormal {
    fn predict(&self, _: &HyperparameterConfig<f64>, _: &[f64], targets: &[usize], _: PredictContext) -> lcroll_core::Result<Vec<Prediction<f64>>> {
        Ok(targets
            .iter()
            .map(|_| Prediction {
                mean: 0.0,
                variance: Some(1.0),
            })
            .collect())
    }
}

fn c9_log_likelihood() -> Outcome {
    let expected = -0.918_938_533_204_672_7;
    let direct = gaussian_log_density(0.0, 0.0, 1.0);
    let curve = LearningCurve::new("zero", HyperparameterConfig::unnamed(vec![1.0]).unwrap(), vec![0.0; 3]).unwrap();
    let data = CurveDataset::new("zeros", default_names(1), vec![curve]).unwrap();
    let protocol = EvalProtocol {
        observed_epochs: vec![1],
        target_epochs: TargetEpochs::List(vec![3]),
        num_rollouts: 1,
        seed: 0,
    };
    let report = evaluate(&[NamedMethod::new("N(0,1)", &StandardNormal)], &data, &protocol).unwrap();
    let harness = report.cells[0].median_ll.unwrap();
    outcome(
        (direct - expected).abs() < 1e-9 && (harness - expected).abs() < 1e-9,
        format!("density {direct:.12}, harness median ll {harness:.12}"),
    )
}

// ---------------------------------------------------------------- 10

fn c10_curriculum() -> Outcome {
    // Independent oracle: round-half-up of the linear ramp from 5 to 50.
    let oracle: Vec<usize> = (1..=10).map(|e| (5.0 + 45.0 * (e - 1) as f64 / 9.0 + 0.5).floor() as usize).collect();
    let direct: Vec<usize> = (1..=10).map(|e| curriculum_length(5, 50, e, 10)).collect();

    // The lengths actually used by a short training run.
    let data = generate_benchmark::<f64>(&ConfigSpace::default(), &GeneratorSpec::new(4, 50, 10)).unwrap();
    let arch = VrnnArch {
        lstm_units: 2,
        mlp_units: 2,
        config_mlp_units: 2,
        num_stacked_lstms: 1,
        mlp_layers: 1,
        config_mlp_layers: 1,
    };
    let model = init_model::<f64>(data.config_dim, arch, 0.1, 0).unwrap();
    let cfg = VrnnTrainConfig {
        epochs: 10,
        curriculum_initial_len: 5,
        ..Default::default()
    };
    let (_, log) = train(&model, &data, &cfg).unwrap();
    let used: Vec<usize> = log.epochs.iter().map(|e| e.sequence_length).collect();
    outcome(
        oracle == direct && used == oracle && oracle[0] == 5 && oracle[9] == 50,
        format!("lengths {used:?}"),
    )
}

// ---------------------------------------------------------------- 11

fn c11_scheduler() -> Outcome {
    let mut worst: f64 = 0.0;
    for scheduler in [Scheduler::Cos, Scheduler::Exp] {
        for epochs in [2, 10, 100] {
            let cfg = VrnnTrainConfig {
                initial_lr: 0.027,
                final_lr_fraction: 0.0008,
                scheduler,
                epochs,
                ..Default::default()
            };
            worst = worst
                .max((learning_rate(&cfg, 1) - 0.027).abs())
                .max((learning_rate(&cfg, epochs) - 0.027 * 0.0008).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max endpoint deviation {worst:.3e}"))
}

// ---------------------------------------------------------------- 12

fn lcroll(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lcroll"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("lcroll {args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn pipeline(dir: &Path) -> Result<(Vec<u8>, Vec<u8>), String> {
    lcroll(dir, &["generate", "--configs", "40", "--epochs", "20", "--seed", "21", "--out", "a.csv"])?;
    lcroll(dir, &["generate", "--configs", "20", "--epochs", "20", "--seed", "22", "--out", "b.csv"])?;
    lcroll(dir, &["train", "--model", "rf", "--window", "4", "--data", "a.csv", "--trees", "20", "--seed", "21", "--out", "rf.json"])?;
    let eval = |data: &str, out: &str| {
        lcroll(
            dir,
            &["evaluate", "--model", "rf.json", "--data", data, "--observed", "4,8", "--rollouts", "20", "--seed", "21", "--out", out],
        )
    };
    eval("a.csv", "eval_a")?;
    eval("b.csv", "eval_b")?;
    let read = |p: &str| std::fs::read(dir.join(p)).map_err(|e| e.to_string());
    Ok((read("eval_a/report.json")?, read("eval_b/report.json")?))
}

fn c12_determinism() -> Outcome {
    let run = || -> Result<(Vec<u8>, Vec<u8>), String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        pipeline(dir.path())
    };
    match (run(), run()) {
        (Ok(first), Ok(second)) => {
            let same = first == second;
            let distinct = first.0 != first.1;
            outcome(
                same && distinct,
                format!(
                    "own-data report identical: {}; transfer report identical: {}; reports differ across datasets: {distinct}",
                    first.0 == second.0,
                    first.1 == second.1
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}
