use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::PathBuf;

use survrnn::baseline;
use survrnn::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, TrainingState};
use survrnn::data::{
    load_csv, load_csv_with_encoder, split, synthesize, write_csv, written_schema, CsvSchema,
    GroundTruth, SyntheticConfig,
};
use survrnn::grid::TimeGrid;
use survrnn::metrics::{
    anlp, bootstrap_anlp, bootstrap_c_index, c_index, significance, SignificanceKind,
};
use survrnn::nn;
use survrnn::survival::{Ablation, Reduction};
use survrnn::train::{train as run_train, write_history_csv, TrainConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
#[clap(rename_all = "snake_case")]
pub enum AblationFlag {
    /// All three loss terms.
    Full,
    /// Event-interval + event-rate terms; censored samples are dropped.
    UncOnly,
    /// Event-interval + censored partial term; the event-rate term is off.
    CenOnly,
}

impl From<AblationFlag> for Ablation {
    fn from(a: AblationFlag) -> Self {
        match a {
            AblationFlag::Full => Ablation::Full,
            AblationFlag::UncOnly => Ablation::UncensoredOnly,
            AblationFlag::CenOnly => Ablation::CensoredOnly,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReductionFlag {
    /// Divide each loss term by batch size before the alpha mix.
    Mean,
    /// Leave per-batch sums unscaled.
    Sum,
}

impl From<ReductionFlag> for Reduction {
    fn from(r: ReductionFlag) -> Self {
        match r {
            ReductionFlag::Mean => Reduction::Mean,
            ReductionFlag::Sum => Reduction::Sum,
        }
    }
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Number of feature dimensions.
    #[arg(long, default_value_t = 20)]
    pub features: usize,
    /// Training samples to generate.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Test samples to generate (default: samples / 5).
    #[arg(long)]
    pub test_samples: Option<usize>,
    /// Number of grid intervals.
    #[arg(long, default_value_t = 20)]
    pub intervals: usize,
    /// Width of each interval.
    #[arg(long, default_value_t = 1.0)]
    pub interval_size: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Requested censored fraction of the training set.
    #[arg(long, default_value_t = 0.35)]
    pub censor_target: f64,
    /// Requested censored fraction of the test set. The default keeps every
    /// test event time observed so ANLP is defined on all rows.
    #[arg(long, default_value_t = 0.0)]
    pub test_censor_target: f64,
    /// Feature weights are drawn uniformly from [-scale, scale].
    #[arg(long, default_value_t = 1.0)]
    pub weight_scale: f64,
    /// Baseline per-interval hazard level (sets the constant bias).
    #[arg(long, default_value_t = 0.1)]
    pub base_hazard: f64,
    /// Output directory for train.csv, test.csv, schema.txt, manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    if !(args.base_hazard > 0.0 && args.base_hazard < 1.0) {
        bail!("--base-hazard must lie strictly between 0 and 1");
    }
    let grid = TimeGrid::new(args.interval_size, args.intervals)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let weights: Vec<f64> = (0..args.features)
        .map(|_| rng.gen_range(-args.weight_scale..=args.weight_scale))
        .collect();
    let bias = vec![logit(args.base_hazard); args.intervals];

    let train_cfg = SyntheticConfig {
        feature_dim: args.features,
        num_samples: args.samples,
        grid,
        hazard_weights: weights.clone(),
        hazard_bias: bias.clone(),
        censor_fraction_target: args.censor_target,
        rng_seed: args.seed.wrapping_add(1),
    };
    let test_cfg = SyntheticConfig {
        num_samples: args.test_samples.unwrap_or(args.samples / 5),
        censor_fraction_target: args.test_censor_target,
        rng_seed: args.seed.wrapping_add(2),
        ..train_cfg.clone()
    };

    let (train_set, train_report) = synthesize(&train_cfg)?;
    let (test_set, test_report) = synthesize(&test_cfg)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    write_csv(&train_set, args.out.join("train.csv"))?;
    write_csv(&test_set, args.out.join("test.csv"))?;
    std::fs::write(
        args.out.join("schema.txt"),
        written_schema(&train_set).render(),
    )?;
    GroundTruth::from_config(&train_cfg).save(args.out.join("manifest.json"))?;

    println!(
        "train: {} samples, censor rate {:.4} (target {}), {} hazard clamp warning(s)",
        train_set.len(),
        train_report.censor_rate,
        args.censor_target,
        train_report.clamp_warnings
    );
    println!(
        "test:  {} samples, censor rate {:.4} (target {})",
        test_set.len(),
        test_report.censor_rate,
        args.test_censor_target
    );
    println!("wrote train.csv, test.csv, schema.txt, manifest.json to {}", args.out.display());
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    /// Training CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Schema file describing column roles.
    #[arg(long)]
    pub schema: PathBuf,
    /// Validation CSV; when omitted a validation split is carved from the
    /// training data.
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Fraction of the training file held out for validation when --val is
    /// not given.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 5.0)]
    pub grad_clip: f64,
    #[arg(long, value_enum, default_value_t = AblationFlag::Full)]
    pub ablation: AblationFlag,
    #[arg(long, value_enum, default_value_t = ReductionFlag::Mean)]
    pub reduction: ReductionFlag,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub d_emb: usize,
    #[arg(long, default_value_t = 64)]
    pub d_hid: usize,
    /// Checkpoint output path.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Training-history CSV output path.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

pub fn train(args: TrainArgs) -> Result<()> {
    let schema = CsvSchema::from_file(&args.schema)
        .with_context(|| format!("reading schema {}", args.schema.display()))?;
    let (full, encoder) = load_csv(&args.data, &schema)
        .with_context(|| format!("loading {}", args.data.display()))?;
    let grid = *full.grid();

    let (train_set, val_set) = match &args.val {
        Some(path) => {
            let val = load_csv_with_encoder(path, &encoder, &grid)
                .with_context(|| format!("loading {}", path.display()))?;
            (full, val)
        }
        None => split(&full, 1.0 - args.val_fraction, args.seed)?,
    };

    let config = TrainConfig {
        alpha: args.alpha,
        learning_rate: args.lr,
        batch_size: args.batch,
        max_epochs: args.epochs,
        patience: args.patience,
        grad_clip_norm: args.grad_clip,
        seed: args.seed,
        ablation: args.ablation.into(),
        reduction: args.reduction.into(),
        d_emb: args.d_emb,
        d_hid: args.d_hid,
        ..TrainConfig::default()
    };

    let outcome = run_train(&train_set, &val_set, &config)?;

    let training_state = match (outcome.best_epoch, outcome.best_val_c_index) {
        (Some(epoch), Some(best)) => Some(TrainingState {
            epoch,
            best_val_c_index: best,
        }),
        _ => None,
    };
    save_checkpoint(
        &outcome.params,
        &CheckpointMeta {
            grid,
            encoder,
            training_state,
        },
        &args.ckpt,
    )?;
    if let Some(history) = &args.history {
        write_history_csv(&outcome.history, history)?;
    }

    match (outcome.best_epoch, outcome.best_val_c_index) {
        (Some(epoch), Some(best)) => {
            println!("best epoch {epoch}: validation c_index = {best}");
            if let Some(last) = outcome.history.last() {
                println!(
                    "final epoch {}: l_z = {}, l_c = {}, total = {}",
                    last.epoch, last.loss.l_z, last.loss.l_c, last.loss.total
                );
            }
        }
        _ => println!("no epochs ran; checkpoint holds the initial parameters"),
    }
    println!("wrote checkpoint to {}", args.ckpt.display());
    Ok(())
}

#[derive(Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Test CSV. Every row must carry its true event time.
    #[arg(long)]
    pub test: PathBuf,
    /// Baseline to fit and report next to the model (only `km`).
    #[arg(long)]
    pub baseline: Option<String>,
    /// Training CSV the baseline is fitted on (required with --baseline).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Run bootstrap significance tests model-vs-baseline.
    #[arg(long)]
    pub significance: bool,
    /// Bootstrap resamples for the significance tests.
    #[arg(long, default_value_t = 30)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report as `key,value` CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let (params, meta) = load_checkpoint(&args.ckpt)
        .with_context(|| format!("loading checkpoint {}", args.ckpt.display()))?;
    let test = load_csv_with_encoder(&args.test, &meta.encoder, &meta.grid)
        .with_context(|| format!("loading {}", args.test.display()))?;

    let predictions = nn::predict(&params, &test)?;
    let model_rates: Vec<Vec<f64>> = predictions.iter().map(|p| p.event_rate.clone()).collect();
    let model_probs: Vec<Vec<f64>> = predictions.iter().map(|p| p.event_prob.clone()).collect();

    let mut report: Vec<(String, f64)> = vec![
        ("model.c_index".into(), c_index(&model_rates, &test)?),
        ("model.anlp".into(), anlp(&model_probs, &test)?),
    ];

    match args.baseline.as_deref() {
        None => {
            if args.significance {
                bail!("--significance needs --baseline km to compare against");
            }
        }
        Some("km") => {
            let train_path = args
                .train
                .as_ref()
                .context("--baseline km needs --train (the CSV the baseline is fitted on)")?;
            let train_set = load_csv_with_encoder(train_path, &meta.encoder, &meta.grid)
                .with_context(|| format!("loading {}", train_path.display()))?;
            let km = baseline::km_fit(&train_set)?;
            let km_rate: Vec<f64> = km.survival().iter().map(|s| 1.0 - s).collect();
            let km_rates: Vec<Vec<f64>> = vec![km_rate; test.len()];
            let km_probs: Vec<Vec<f64>> = vec![km.event_prob().to_vec(); test.len()];
            report.push(("km.c_index".into(), c_index(&km_rates, &test)?));
            report.push(("km.anlp".into(), anlp(&km_probs, &test)?));

            if args.significance {
                let model_c = bootstrap_c_index(&model_rates, &test, args.bootstrap, args.seed)?;
                let km_c = bootstrap_c_index(&km_rates, &test, args.bootstrap, args.seed)?;
                report.push((
                    "significance.c_index.mann_whitney_p".into(),
                    significance(&model_c, &km_c, SignificanceKind::MannWhitneyU)?,
                ));
                let model_a = bootstrap_anlp(&model_probs, &test, args.bootstrap, args.seed)?;
                let km_a = bootstrap_anlp(&km_probs, &test, args.bootstrap, args.seed)?;
                report.push((
                    "significance.anlp.t_test_p".into(),
                    significance(&model_a, &km_a, SignificanceKind::TTest)?,
                ));
            }
        }
        Some(other) => bail!("unknown baseline `{other}` (supported: km)"),
    }

    for (key, value) in &report {
        println!("{key} = {value}");
    }
    if let Some(out) = &args.out {
        let mut text = String::from("key,value\n");
        for (key, value) in &report {
            text.push_str(&format!("{key},{value}\n"));
        }
        std::fs::write(out, text)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Input CSV (same schema as training data).
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV of per-sample curves.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let (params, meta) = load_checkpoint(&args.ckpt)
        .with_context(|| format!("loading checkpoint {}", args.ckpt.display()))?;
    let input = load_csv_with_encoder(&args.input, &meta.encoder, &meta.grid)
        .with_context(|| format!("loading {}", args.input.display()))?;
    let predictions = nn::predict(&params, &input)?;

    let mut out = std::io::BufWriter::new(
        std::fs::File::create(&args.out)
            .with_context(|| format!("creating {}", args.out.display()))?,
    );
    writeln!(out, "sample,l,hazard,survival,event_rate,event_prob")?;
    for (i, p) in predictions.iter().enumerate() {
        for l in 1..=meta.grid.num_intervals() {
            writeln!(
                out,
                "{i},{l},{},{},{},{}",
                p.hazards.values()[l - 1],
                p.survival.values()[l - 1],
                p.event_rate[l - 1],
                p.event_prob[l - 1]
            )?;
        }
    }
    out.flush()?;
    println!(
        "wrote {} rows ({} samples x {} intervals) to {}",
        predictions.len() * meta.grid.num_intervals(),
        predictions.len(),
        meta.grid.num_intervals(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct KmArgs {
    /// Data CSV the curve is fitted on.
    #[arg(long)]
    pub data: PathBuf,
    /// Schema file describing column roles.
    #[arg(long)]
    pub schema: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn km(args: KmArgs) -> Result<()> {
    let schema = CsvSchema::from_file(&args.schema)
        .with_context(|| format!("reading schema {}", args.schema.display()))?;
    let (dataset, _) = load_csv(&args.data, &schema)
        .with_context(|| format!("loading {}", args.data.display()))?;
    let km = baseline::km_fit(&dataset)?;

    let mut text = String::from("interval,n,d,s\n");
    for l in 0..km.num_intervals() {
        text.push_str(&format!(
            "{},{},{},{}\n",
            l + 1,
            km.at_risk()[l],
            km.events()[l],
            km.survival()[l]
        ));
    }
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
