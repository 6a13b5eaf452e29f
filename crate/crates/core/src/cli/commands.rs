use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{line_chart, CliError, Command, Common, RunConfig};
use crate::eval::{
    compare_report, cross_validate, fit_tl, learning_matrix, parse_rows, prepare_flight, run_model, tl_output,
    truth_anomaly, FeatureScaler, ModelRun, PipelineConfig,
};
use crate::featsel::{rank_lasso, rank_permutation, rank_spearman, ranking_report, select_features};
use crate::flightdata::{load_flight_with, write_flight, ChannelSchema, FeatureMatrix, FlightFrame, LoadOptions};
use crate::linalg::ridge_normal_equations;
use crate::liquid::{Checkpoint, History, ModelKind, TrainConfig};
use crate::seed::{child_seed, indexed_seed};
use crate::synth::{gen_flights, SynthConfig, TruthFile};
use crate::tolles_lawson::TlCoefficients;

type Result<T> = std::result::Result<T, CliError>;

/// Penalty of the linear surrogate used for permutation importance.
const SURROGATE_RIDGE: f64 = 1e-6;

struct Ctx {
    cfg: RunConfig,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = common.seed {
            cfg.seed = s;
        }
        if !common.flights.is_empty() {
            cfg.flights = common.flights.clone();
        }
        Ok(Self { cfg })
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: child_seed(self.cfg.seed, "train"), ..self.cfg.train.clone() }
    }

    fn load_flights(&self) -> Result<Vec<FlightFrame<f64>>> {
        if self.cfg.flights.is_empty() {
            return Err(CliError::Usage("no flights given (use --flight or a config file)".into()));
        }
        let schema = match &self.cfg.schema {
            Some(p) => ChannelSchema::load(p)?,
            None => ChannelSchema::canonical(),
        };
        let opts = LoadOptions { repair_max_run: (self.cfg.repair_max_run > 0).then_some(self.cfg.repair_max_run) };
        let frames: Vec<FlightFrame<f64>> = self
            .cfg
            .flights
            .iter()
            .map(|p| load_flight_with(p, &schema, opts).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))))
            .collect::<Result<_>>()?;
        frames.iter().map(|f| Ok(prepare_flight(f, &self.cfg.pipeline)?)).collect()
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

pub(super) fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { common, out, count } => synth(&Ctx::new(&common)?, &out, count),
        Command::TlFit { common, out } => tl_fit(&Ctx::new(&common)?, &out),
        Command::TlCompensate { common, coeffs, out } => tl_compensate(&Ctx::new(&common)?, &coeffs, &out),
        Command::FeatureRank { common, out, k, lambda } => feature_rank(&Ctx::new(&common)?, &out, k, lambda),
        Command::Train { common, out, model, coeffs, epochs } => {
            train(&Ctx::new(&common)?, &out, model, coeffs.as_deref(), epochs)
        }
        Command::Evaluate { common, out, results } => match results {
            Some(rows) => evaluate_rows(&rows, out.as_deref()),
            None => evaluate(&Ctx::new(&common)?, out.as_deref()),
        },
        Command::Report { common, checkpoint, coeffs, out, svg } => {
            report(&Ctx::new(&common)?, &checkpoint, &coeffs, &out, svg.as_deref())
        }
    }
}

fn synth(ctx: &Ctx, out: &Path, count: Option<usize>) -> Result<()> {
    let n = count.unwrap_or(ctx.cfg.synth_flights);
    if n == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let root = child_seed(ctx.cfg.seed, "synth");
    let configs: Vec<SynthConfig> = (0..n)
        .map(|i| SynthConfig {
            seed: indexed_seed(root, &[i as u64]),
            flight_id: format!("synth_{i:02}"),
            ..ctx.cfg.synth.clone()
        })
        .collect();
    std::fs::create_dir_all(out)?;
    for flight in gen_flights(&configs)? {
        let id = flight.frame.flight_id().to_string();
        write_flight(&flight.frame, out.join(format!("{id}.csv")))?;
        TruthFile::from_flight(&flight, ctx.cfg.synth.gamma_nt).save(out.join(format!("{id}.truth.json")))?;
        println!("{}", out.join(format!("{id}.csv")).display());
    }
    Ok(())
}

fn tl_fit(ctx: &Ctx, out: &Path) -> Result<()> {
    let frames = ctx.load_flights()?;
    let coeffs = fit_tl(&frames, &ctx.cfg.pipeline)?;
    write(out, &coeffs.to_json())?;
    let beta: Vec<String> = coeffs.beta().iter().map(|b| format!("{b:.6}")).collect();
    println!("beta = [{}]", beta.join(", "));
    Ok(())
}

fn tl_compensate(ctx: &Ctx, coeffs: &Path, out: &Path) -> Result<()> {
    let coeffs = TlCoefficients::<f64>::load(coeffs)?;
    let mut s = String::from("flight,tt,tl_anomaly_nt\n");
    for frame in ctx.load_flights()? {
        let est = tl_output(&frame, &coeffs, &ctx.cfg.pipeline)?;
        for (t, v) in frame.time().iter().zip(&est) {
            writeln!(s, "{},{t},{v}", frame.flight_id()).expect("write to string");
        }
    }
    write(out, &s)
}

fn stack(mats: &[FeatureMatrix<f64>]) -> Result<FeatureMatrix<f64>> {
    let names = mats.first().ok_or_else(|| CliError::Usage("no flights given".into()))?.feature_names().to_vec();
    let x = mats.iter().flat_map(|m| m.x().iter().copied()).collect();
    let y = mats.iter().flat_map(|m| m.y().iter().copied()).collect();
    Ok(FeatureMatrix::new(x, y, names)?)
}

fn feature_rank(ctx: &Ctx, out: &Path, k: usize, lambda: f64) -> Result<()> {
    let frames = ctx.load_flights()?;
    let pipeline = &ctx.cfg.pipeline;
    let coeffs = fit_tl(&frames, pipeline)?;
    let raw: Vec<FeatureMatrix<f64>> = frames.iter().map(|f| learning_matrix(f, &coeffs, pipeline)).collect::<std::result::Result<_, _>>()?;
    let scaler = FeatureScaler::fit(&raw)?;
    let m = scaler.apply(&stack(&raw)?)?;
    let cols: Vec<Vec<f64>> = (0..m.n_features()).map(|j| m.column(j)).collect();
    let w = ridge_normal_equations(&cols, m.y(), SURROGATE_RIDGE)
        .map_err(|s| CliError::Numerical(format!("linear surrogate is singular at column {}", s.column)))?;
    let linear = |x: &FeatureMatrix<f64>| -> Vec<f64> {
        (0..x.n_rows()).map(|i| x.row(i).iter().zip(&w).map(|(a, b)| a * b).sum()).collect()
    };
    let seed = child_seed(ctx.cfg.seed, "feature-rank");
    let rankings = vec![rank_spearman(&m)?, rank_lasso(&m, lambda)?, rank_permutation(&linear, &m, seed, 5)?];
    let selected = select_features(&rankings, k)?;
    write(out, &ranking_report(&rankings))?;
    println!("selected: {}", selected.join(", "));
    Ok(())
}

fn train(ctx: &Ctx, out: &Path, model: Option<ModelKind>, coeffs: Option<&Path>, epochs: Option<usize>) -> Result<()> {
    let frames = ctx.load_flights()?;
    let pipeline = &ctx.cfg.pipeline;
    let kind = match model.or_else(|| ctx.cfg.models.first().copied()) {
        Some(k) => k,
        None => return Err(CliError::Usage("no model kind given".into())),
    };
    let coeffs = match coeffs {
        Some(p) => TlCoefficients::<f64>::load(p)?,
        None => {
            let c = fit_tl(&frames, pipeline)?;
            write(&sibling(out, ".tl.json"), &c.to_json())?;
            c
        }
    };
    let mut tcfg = ctx.train_config();
    if let Some(e) = epochs {
        tcfg.epochs = e;
    }
    let run = run_model(kind, &frames, &coeffs, &ctx.cfg.arch, &tcfg, pipeline)?;
    let has_val = frames.len() >= 2;
    let mut ckpt = Checkpoint::from_model(&run.model);
    ckpt.train = Some(tcfg);
    ckpt.best_val_rmse = has_val.then(|| run.history.best_val_loss.sqrt() * run.scaler.target.std);
    ckpt.feature_names = pipeline.features.clone();
    ckpt.normalizer = Some(run.scaler.to_normalizer());
    write(out, &(ckpt.to_json()? + "\n"))?;
    write(&sibling(out, ".history.json"), &(serde_json::to_string_pretty(&run.history).expect("history serializes") + "\n"))?;
    match ckpt.best_val_rmse {
        Some(r) => println!("{kind}: best epoch {} (validation RMSE {r:.3} nT)", run.history.best_epoch),
        None => println!("{kind}: {} epochs, no validation flight", run.history.train_loss.len()),
    }
    Ok(())
}

fn evaluate(ctx: &Ctx, out: Option<&Path>) -> Result<()> {
    let frames = ctx.load_flights()?;
    if frames.len() < 2 {
        return Err(CliError::Usage("cross-validation needs at least two flights".into()));
    }
    let (report, _) = cross_validate(
        &frames,
        ctx.cfg.folds,
        ctx.cfg.seed,
        &ctx.cfg.models,
        &ctx.cfg.arch,
        &ctx.train_config(),
        &ctx.cfg.pipeline,
    )?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| ctx.cfg.output_dir.clone());
    write(&dir.join("report.csv"), &report.to_delimited())?;
    let text = format!("{}\n{}", report.to_table(), report.summary());
    write(&dir.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn evaluate_rows(rows: &Path, out: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(rows).map_err(|e| CliError::Data(format!("{}: {e}", rows.display())))?;
    let report = compare_report(&parse_rows(&text)?)?;
    let text = format!("{}\n{}", report.to_table(), report.summary());
    if let Some(p) = out {
        write(p, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn report(ctx: &Ctx, checkpoint: &Path, coeffs: &Path, out: &Path, svg: Option<&Path>) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let normalizer = ckpt.normalizer.as_ref().ok_or_else(|| CliError::Data("checkpoint has no normalizer".into()))?;
    let coeffs = TlCoefficients::<f64>::load(coeffs)?;
    let pipeline = PipelineConfig { features: ckpt.feature_names.clone(), ..ctx.cfg.pipeline.clone() };
    let run = ModelRun {
        model: ckpt.to_model::<f64>()?,
        history: History { initial_val_loss: f64::NAN, train_loss: Vec::new(), val_loss: Vec::new(), best_epoch: 0, best_val_loss: f64::NAN },
        scaler: FeatureScaler::from_normalizer(normalizer),
    };
    let frames: Vec<FlightFrame<f64>> = ctx
        .load_flights()?
        .iter()
        .map(|f| prepare_flight(f, &pipeline))
        .collect::<std::result::Result<_, _>>()?;
    let mut s = String::from("flight,tt,truth_nt,tl_nt,model_nt\n");
    let mut plot = None;
    for frame in &frames {
        let truth = truth_anomaly(frame, &pipeline)?;
        let tl = tl_output(frame, &coeffs, &pipeline)?;
        let est = run.predict(frame, &coeffs, &pipeline)?;
        for i in 0..frame.len() {
            writeln!(s, "{},{},{},{},{}", frame.flight_id(), frame.time()[i], truth[i], tl[i], est[i]).expect("write to string");
        }
        if plot.is_none() {
            plot = Some((frame.flight_id().to_string(), frame.time().to_vec(), truth, tl, est));
        }
    }
    write(out, &s)?;
    if let (Some(path), Some((id, t, truth, tl, est))) = (svg, plot) {
        let model = ckpt.kind.to_string();
        let chart = line_chart(&id, &t, &[("truth", &truth, "black"), ("T-L", &tl, "darkorange"), (&model, &est, "steelblue")]);
        write(path, &chart)?;
    }
    Ok(())
}
