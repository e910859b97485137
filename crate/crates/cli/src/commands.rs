use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;

use lcroll_core::baselines::fit_static;
use lcroll_core::data::{
    load_dataset, normalize, save_dataset, split, CurveDataset, DataFormat, NormalizationRecord, NormalizationScheme,
    SplitSpec,
};
use lcroll_core::eval::{emit_plot_data, evaluate, CurvePredictor, EvalProtocol, Lsv, NamedMethod, TargetEpochs};
use lcroll_core::forest::ForestTrainConfig;
use lcroll_core::rollout::{fit_windowed_forest, roll_out, vrnn_predictor, RolloutConfig, RolloutResult, VrnnPredictor};
use lcroll_core::seed::{derive_seed, Label};
use lcroll_core::synth::{generate_benchmark, ConfigSpace, GeneratorSpec};
use lcroll_core::vrnn::{init_model, train, Scheduler, VrnnArch, VrnnTrainConfig};

use crate::args::{
    EvaluateArgs, FormatArg, GenerateArgs, ModelKindArg, NormalizeArg, RolloutArgs, SchedulerArg, SubsetArg, TrainArgs,
};
use crate::manifest::{sha256_file, Outputs};
use crate::model_file::{ModelFile, ModelPayload, TrainedOn, TrainerRecord, MODEL_FILE_VERSION};

fn data_format(path: &Path, flag: Option<FormatArg>) -> Result<DataFormat> {
    match flag {
        Some(FormatArg::Csv) => Ok(DataFormat::Csv),
        Some(FormatArg::Json) => Ok(DataFormat::Json),
        None => DataFormat::from_path(path)
            .ok_or_else(|| anyhow!("cannot infer the format of {}; pass --format csv|json", path.display())),
    }
}

fn load(path: &Path, flag: Option<FormatArg>) -> Result<CurveDataset<f64>> {
    Ok(load_dataset(path, data_format(path, flag)?)?)
}

/// Seed for one stage of a command, derived from the `--seed` flag.
fn stage_seed(root: u64, stage: &str) -> u64 {
    derive_seed(root, &[Label::Str(stage)])
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let started = Instant::now();
    let format = data_format(&args.out, args.format)?;
    let spec = GeneratorSpec {
        noise_std: args.noise,
        ..GeneratorSpec::new(args.configs as usize, args.epochs as usize, args.seed)
    };
    let space = ConfigSpace::default();
    let data = generate_benchmark::<f64>(&space, &spec)?;

    let mut outputs = Outputs::new();
    outputs.file(&args.out);
    save_dataset(&data, &args.out, format)?;
    outputs.finish(
        &args.out,
        "generate",
        json!({ "space": space, "spec": spec, "format": format!("{format:?}").to_lowercase() }),
        json!({ "seed": args.seed }),
        &[],
        started,
    )?;
    eprintln!("wrote {} curves x {} epochs to {}", data.len(), spec.num_epochs, args.out.display());
    Ok(())
}

fn forest_config(args: &TrainArgs) -> ForestTrainConfig {
    let d = ForestTrainConfig::default();
    ForestTrainConfig {
        num_trees: args.trees.unwrap_or(d.num_trees),
        max_depth: args.max_depth.unwrap_or(d.max_depth),
        min_samples_leaf: args.min_samples_leaf.unwrap_or(d.min_samples_leaf),
        feature_subsample: args.feature_fraction.unwrap_or(d.feature_subsample),
        bootstrap: !args.no_bootstrap,
        seed: stage_seed(args.seed, "forest"),
    }
}

fn vrnn_settings(args: &TrainArgs) -> (VrnnArch, f64, VrnnTrainConfig) {
    let a = VrnnArch::default();
    let arch = VrnnArch {
        lstm_units: args.lstm_units.unwrap_or(a.lstm_units),
        mlp_units: args.mlp_units.unwrap_or(a.mlp_units),
        config_mlp_units: args.config_mlp_units.unwrap_or(a.config_mlp_units),
        num_stacked_lstms: args.stacked_lstms.unwrap_or(a.num_stacked_lstms),
        mlp_layers: args.mlp_layers.unwrap_or(a.mlp_layers),
        config_mlp_layers: args.config_mlp_layers.unwrap_or(a.config_mlp_layers),
    };
    let d = VrnnTrainConfig::default();
    let cfg = VrnnTrainConfig {
        initial_lr: args.lr.unwrap_or(d.initial_lr),
        final_lr_fraction: args.final_lr_fraction.unwrap_or(d.final_lr_fraction),
        momentum: args.momentum.unwrap_or(d.momentum),
        batch_size: args.batch.unwrap_or(d.batch_size),
        epochs: args.train_epochs.unwrap_or(d.epochs),
        scheduler: match args.scheduler {
            None => d.scheduler,
            Some(SchedulerArg::Cos) => Scheduler::Cos,
            Some(SchedulerArg::Exp) => Scheduler::Exp,
            Some(SchedulerArg::Const) => Scheduler::Const,
        },
        curriculum_initial_len: args.curriculum_start.unwrap_or(d.curriculum_initial_len),
        seed: stage_seed(args.seed, "train"),
    };
    (arch, args.dropout.unwrap_or(0.1), cfg)
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let started = Instant::now();
    let wrong = match args.model {
        ModelKindArg::Vrnn => args.forest_flags(),
        ModelKindArg::Rf => args.vrnn_flags(),
        ModelKindArg::Rfb => {
            let mut v = args.vrnn_flags();
            if args.window.is_some() {
                v.push("--window");
            }
            v
        }
    };
    if !wrong.is_empty() {
        bail!("{} cannot be combined with --model {:?}", wrong.join(", "), args.model);
    }

    let data = load(&args.data, args.format)?;
    let spec = SplitSpec::new(args.test_fraction, stage_seed(args.seed, "split"))?;
    let (train_set, test_set) = split(&data, spec)?;
    let scheme = match args.normalize {
        NormalizeArg::None => NormalizationScheme::None,
        NormalizeArg::Minmax => NormalizationScheme::MinmaxPerDataset,
    };
    let (train_set, normalization) = normalize(&train_set, scheme)?;

    let (payload, trainer, summary) = match args.model {
        ModelKindArg::Rf => {
            let cfg = forest_config(args);
            let window = args.window.unwrap_or(4);
            let p = fit_windowed_forest(&train_set, window, &cfg)?;
            (ModelPayload::Windowed(p), TrainerRecord::Forest(cfg), json!(null))
        }
        ModelKindArg::Rfb => {
            let cfg = forest_config(args);
            let m = fit_static(&train_set, &cfg)?;
            (ModelPayload::Static(m), TrainerRecord::Forest(cfg), json!(null))
        }
        ModelKindArg::Vrnn => {
            let (arch, dropout, cfg) = vrnn_settings(args);
            let init = init_model::<f64>(train_set.config_dim, arch, dropout, stage_seed(args.seed, "init"))?;
            let (model, log) = train(&init, &train_set, &cfg)?;
            if let Some(last) = log.epochs.last() {
                eprintln!("final epoch loss {:.6} ({} skipped batches)", last.loss, last.skipped_batches);
            }
            (ModelPayload::Vrnn(model), TrainerRecord::Vrnn(cfg), serde_json::to_value(&log)?)
        }
    };

    let ids = |d: &CurveDataset<f64>| d.curves.iter().map(|c| c.id.clone()).collect::<Vec<_>>();
    let file = ModelFile {
        format_version: MODEL_FILE_VERSION,
        payload,
        normalization,
        trained_on: TrainedOn {
            dataset: data.name.clone(),
            sha256: sha256_file(&args.data)?,
            split: spec,
            train_ids: ids(&train_set),
            test_ids: ids(&test_set),
        },
        trainer,
    };

    let mut outputs = Outputs::new();
    outputs.write(&args.out, &file.to_json()?)?;
    outputs.finish(
        &args.out,
        "train",
        json!({
            "model": format!("{:?}", args.model).to_lowercase(),
            "split": spec,
            "normalization": normalization,
            "trainer": file.trainer,
            "training_log": summary,
        }),
        json!({
            "seed": args.seed,
            "split": spec.seed,
            "forest": stage_seed(args.seed, "forest"),
            "init": stage_seed(args.seed, "init"),
            "train": stage_seed(args.seed, "train"),
        }),
        &[&args.data],
        started,
    )?;
    eprintln!(
        "trained {} on {} curves ({} held out); wrote {}",
        file.payload.default_name(),
        train_set.len(),
        test_set.len(),
        args.out.display()
    );
    Ok(())
}

fn check_dims(file: &ModelFile, data: &CurveDataset<f64>, path: &Path) -> Result<()> {
    if file.payload.config_dim() != data.config_dim {
        bail!(
            "{} expects {} hyperparameters but the dataset has {}",
            path.display(),
            file.payload.config_dim(),
            data.config_dim
        );
    }
    Ok(())
}

pub fn rollout_cmd(args: &RolloutArgs) -> Result<()> {
    let started = Instant::now();
    let file = ModelFile::load(&args.model)?;
    let data = load(&args.data, args.format)?;
    check_dims(&file, &data, &args.model)?;
    let curve = data.get(&args.curve).ok_or_else(|| {
        anyhow!(
            "curve '{}' not found; available ids: {}",
            args.curve,
            data.ids().join(", ")
        )
    })?;
    if args.observed > curve.len() {
        bail!("curve '{}' has only {} epochs, cannot observe {}", curve.id, curve.len(), args.observed);
    }
    let horizon = args.horizon.unwrap_or(curve.len());
    let rec = file.normalization;
    let observed: Vec<f64> = curve.values[..args.observed].iter().map(|&v| rec.apply(v)).collect();
    let cfg = RolloutConfig {
        num_rollouts: args.rollouts as usize,
        horizon,
        seed: args.seed,
    };
    let result = match &file.payload {
        ModelPayload::Vrnn(m) => roll_out(&vrnn_predictor(m.clone())?, &curve.config, &observed, &cfg)?,
        ModelPayload::Windowed(p) => roll_out(p, &curve.config, &observed, &cfg)?,
        ModelPayload::Static(_) => bail!("a static forest does not roll out; use evaluate for RF-B predictions"),
    };
    let result = to_raw_space(result, &rec)?;

    let mut outputs = Outputs::new();
    outputs.file(&args.out);
    result.write_summary_csv(&args.out)?;
    if let Some(t) = &args.trajectories {
        outputs.file(t);
        result.write_trajectories_csv(t)?;
    }
    outputs.finish(
        &args.out,
        "rollout",
        json!({
            "curve": args.curve,
            "observed": args.observed,
            "horizon": horizon,
            "rollouts": args.rollouts,
            "normalization": rec,
        }),
        json!({ "seed": args.seed }),
        &[&args.model, &args.data],
        started,
    )?;
    eprintln!("epochs {}..={} written to {}", result.first_epoch, result.last_epoch(), args.out.display());
    Ok(())
}

/// Maps sampled trajectories back to raw values and re-aggregates.
fn to_raw_space(result: RolloutResult<f64>, rec: &NormalizationRecord<f64>) -> Result<RolloutResult<f64>> {
    if rec.is_identity() {
        return Ok(result);
    }
    let raw = result
        .trajectories
        .iter()
        .map(|t| t.iter().map(|&v| rec.invert(v)).collect())
        .collect();
    Ok(RolloutResult::from_trajectories(result.first_epoch, raw)?)
}

enum Loaded {
    Vrnn(VrnnPredictor<f64>),
    Other(ModelPayload),
}

impl Loaded {
    fn predictor(&self) -> &dyn CurvePredictor<f64> {
        match self {
            Loaded::Vrnn(p) => p,
            Loaded::Other(ModelPayload::Windowed(p)) => p,
            Loaded::Other(ModelPayload::Static(s)) => s,
            Loaded::Other(ModelPayload::Vrnn(_)) => unreachable!("wrapped at load time"),
        }
    }
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let started = Instant::now();
    let data = load(&args.data, args.format)?;
    let data_hash = sha256_file(&args.data)?;

    let mut named = Vec::new();
    let mut paths = Vec::new();
    for spec in &args.models {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) if !n.is_empty() => (Some(n.to_string()), Path::new(p)),
            _ => (None, Path::new(spec.as_str())),
        };
        let file = ModelFile::load(path)?;
        check_dims(&file, &data, path)?;
        let name = name.unwrap_or_else(|| file.payload.default_name());
        paths.push(path.to_path_buf());
        named.push((name, file));
    }
    let record = named[0].1.normalization;
    if let Some((n, _)) = named.iter().find(|(_, f)| f.normalization != record) {
        bail!("model '{n}' uses a different normalization than '{}'", named[0].0);
    }

    // Same data as a model was trained on: score only that model's held-out
    // curves. Otherwise every curve counts (transfer).
    let own = named.iter().find(|(_, f)| f.trained_on.sha256 == data_hash);
    let test_ids = match (args.subset, own) {
        (SubsetArg::All, _) | (SubsetArg::Auto, None) => None,
        (_, Some((_, f))) => Some(f.trained_on.test_ids.clone()),
        (SubsetArg::Test, None) => bail!("--subset test needs a model trained on this dataset"),
    };
    if let Some(ids) = &test_ids {
        if let Some((n, _)) = named
            .iter()
            .find(|(_, f)| f.trained_on.sha256 == data_hash && &f.trained_on.test_ids != ids)
        {
            bail!("model '{n}' was trained on a different split of this dataset");
        }
    }
    let subset = match &test_ids {
        Some(ids) => data.subset(format!("{}-test", data.name), ids)?,
        None => data.clone(),
    };
    let subset = record.apply_dataset(&subset);

    let loaded = named
        .into_iter()
        .map(|(name, file)| {
            let l = match file.payload {
                ModelPayload::Vrnn(m) => Loaded::Vrnn(vrnn_predictor(m)?),
                other => Loaded::Other(other),
            };
            Ok((name, l))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut methods: Vec<NamedMethod<'_, f64>> = Vec::new();
    if !args.no_lsv {
        methods.push(NamedMethod::new("LSV", &Lsv));
    }
    for (name, l) in &loaded {
        methods.push(NamedMethod::new(name.clone(), l.predictor()));
    }

    let protocol = EvalProtocol {
        observed_epochs: args.observed.clone(),
        target_epochs: if args.target.is_empty() {
            TargetEpochs::All
        } else {
            TargetEpochs::List(args.target.clone())
        },
        num_rollouts: args.rollouts as usize,
        seed: args.seed,
    };
    let report = evaluate(&methods, &subset, &protocol)
        .context("evaluation failed")?
        .with_normalization(record.scheme);

    let mut outputs = Outputs::new();
    outputs.dir(&args.out)?;
    let report_path = args.out.join("report.json");
    outputs.file(&report_path);
    report.save_json(&report_path)?;
    for f in ["metrics_by_target.csv", "adaptation.csv", "predicted_vs_true.csv"] {
        outputs.file(&args.out.join(f));
    }
    emit_plot_data(&report, &args.out)?;

    let mut inputs: Vec<&Path> = paths.iter().map(|p| p.as_path()).collect();
    inputs.push(&args.data);
    outputs.finish(
        &args.out,
        "evaluate",
        json!({
            "protocol": protocol,
            "subset": format!("{:?}", args.subset).to_lowercase(),
            "curves": subset.len(),
            "methods": methods.iter().map(|m| m.name.clone()).collect::<Vec<_>>(),
        }),
        json!({ "seed": args.seed }),
        &inputs,
        started,
    )?;

    for s in &report.summaries {
        let ll = s.avg_median_ll.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".to_string());
        println!("{:<10} observed {:>3}: avg mse {:.6e}  avg median ll {ll}", s.method, s.observed, s.avg_mse);
    }
    Ok(())
}
