use serde::{Deserialize, Serialize};

use super::folds::kfold_by_flight;
use super::metrics::rmse_demeaned;
use super::report::{compare_report, EvalReport, ResultRow, TL_MODEL};
use super::{EvalError, Result};
use crate::dsp::{design_bandpass, remove_core_field, residualize, zscore_fit, DspError, ZScoreStats};
use crate::flightdata::{to_feature_matrix, FeatureMatrix, FlightFrame, CANONICAL_FEATURES};
use crate::liquid::{self, ArchConfig, History, LiquidModel, ModelKind, Normalizer, TrainConfig};
use crate::seed::indexed_seed;
use crate::tolles_lawson::{direction_cosines, tl_compensate, tl_design_matrix, tl_fit_segments, TlCoefficients, TlDesignMatrix};
use crate::Real;

/// What learned models are trained to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// The error left by T-L compensation; the final estimate is the T-L output minus the prediction.
    #[default]
    TlResidual,
    /// The truth anomaly itself.
    Direct,
}

/// Channel roles and calibration settings shared by every pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub features: Vec<String>,
    /// Scalar magnetometer being compensated.
    pub scalar: String,
    /// IGRF-uncorrected truth magnetometer.
    pub truth: String,
    /// Reference for `mag_K_res` residualized features.
    pub reference: String,
    pub flux: [String; 3],
    pub igrf: String,
    /// Optional; treated as zero when the channel is absent.
    pub diurnal: String,
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub lambda: f64,
    pub target: TargetMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            features: CANONICAL_FEATURES.iter().map(|s| s.to_string()).collect(),
            scalar: "mag_4_uc".into(),
            truth: "mag_1_c".into(),
            reference: "mag_1_uc".into(),
            flux: ["flux_b_x".into(), "flux_b_y".into(), "flux_b_z".into()],
            igrf: "igrf".into(),
            diurnal: "diurnal".into(),
            low_hz: 0.1,
            high_hz: 0.9,
            order: 4,
            lambda: 0.0,
            target: TargetMode::TlResidual,
        }
    }
}

/// Adds every requested `mag_K_res = mag_K_uc − reference` channel that is missing.
pub fn prepare_flight<T: Real>(frame: &FlightFrame<T>, cfg: &PipelineConfig) -> Result<FlightFrame<T>> {
    let mut out = frame.clone();
    for f in &cfg.features {
        if out.has_channel(f) {
            continue;
        }
        if let Some(k) = f.strip_prefix("mag_").and_then(|s| s.strip_suffix("_res")) {
            let res = residualize(frame.channel(&format!("mag_{k}_uc"))?, frame.channel(&cfg.reference)?)?;
            out = out.with_channel(f.clone(), res)?;
        }
    }
    Ok(out)
}

/// Contiguous runs of equal line id.
fn line_runs<T: Real>(frame: &FlightFrame<T>) -> Vec<std::ops::Range<usize>> {
    let lines = frame.lines();
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=lines.len() {
        if i == lines.len() || lines[i] != lines[start] {
            runs.push(start..i);
            start = i;
        }
    }
    runs
}

fn design<T: Real>(frame: &FlightFrame<T>, cfg: &PipelineConfig) -> Result<TlDesignMatrix<T>> {
    let (cos, mag) = direction_cosines(frame.channel(&cfg.flux[0])?, frame.channel(&cfg.flux[1])?, frame.channel(&cfg.flux[2])?)?;
    Ok(tl_design_matrix(&cos, &mag, T::lit(frame.fs()))?)
}

fn diurnal<T: Real>(frame: &FlightFrame<T>, cfg: &PipelineConfig) -> Result<Vec<T>> {
    Ok(if frame.has_channel(&cfg.diurnal) { frame.channel(&cfg.diurnal)?.to_vec() } else { vec![T::zero(); frame.len()] })
}

/// Fits T-L coefficients on the scalar channel of every flight, one segment per line.
pub fn fit_tl<T: Real>(frames: &[FlightFrame<T>], cfg: &PipelineConfig) -> Result<TlCoefficients<T>> {
    let fs = frames.first().ok_or(EvalError::EmptyInput)?.fs();
    if frames.iter().any(|f| f.fs() != fs) {
        return Err(EvalError::InvalidConfig("all flights must share one sample rate".into()));
    }
    let spec = design_bandpass(T::lit(cfg.low_hz), T::lit(cfg.high_hz), cfg.order, T::lit(fs))?;
    let mut parts = Vec::new();
    for frame in frames {
        for run in line_runs(frame) {
            let seg = frame.slice_range(run)?;
            parts.push((design(&seg, cfg)?, seg.channel(&cfg.scalar)?.to_vec()));
        }
    }
    let segments: Vec<(&TlDesignMatrix<T>, &[T])> = parts.iter().map(|(a, b)| (a, b.as_slice())).collect();
    Ok(tl_fit_segments(&segments, &spec, T::lit(cfg.lambda))?)
}

/// T-L compensated, core- and diurnal-corrected scalar signal (the T-L anomaly estimate).
pub fn tl_output<T: Real>(frame: &FlightFrame<T>, coeffs: &TlCoefficients<T>, cfg: &PipelineConfig) -> Result<Vec<T>> {
    let mut comp = Vec::with_capacity(frame.len());
    for run in line_runs(frame) {
        let seg = frame.slice_range(run)?;
        comp.extend(tl_compensate(seg.channel(&cfg.scalar)?, &design(&seg, cfg)?, coeffs)?);
    }
    Ok(remove_core_field(&comp, frame.channel(&cfg.igrf)?, &diurnal(frame, cfg)?)?)
}

/// Core- and diurnal-corrected truth channel.
pub fn truth_anomaly<T: Real>(frame: &FlightFrame<T>, cfg: &PipelineConfig) -> Result<Vec<T>> {
    Ok(remove_core_field(frame.channel(&cfg.truth)?, frame.channel(&cfg.igrf)?, &diurnal(frame, cfg)?)?)
}

fn demean<T: Real>(v: &mut [T]) {
    let mean = v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len().max(1));
    for x in v {
        *x = *x - mean;
    }
}

/// Raw (unscaled) features of a prepared flight with the per-flight demeaned learning target.
pub fn learning_matrix<T: Real>(
    frame: &FlightFrame<T>,
    coeffs: &TlCoefficients<T>,
    cfg: &PipelineConfig,
) -> Result<FeatureMatrix<T>> {
    let names: Vec<&str> = cfg.features.iter().map(String::as_str).collect();
    let truth = truth_anomaly(frame, cfg)?;
    let mut y = match cfg.target {
        TargetMode::TlResidual => tl_output(frame, coeffs, cfg)?.iter().zip(&truth).map(|(&a, &b)| a - b).collect(),
        TargetMode::Direct => truth,
    };
    // A bandpassed fit cannot see a flight's constant offset, so neither target carries one.
    demean(&mut y);
    let m = to_feature_matrix(frame, &names, &cfg.truth)?;
    Ok(m.with_target(y)?)
}

/// Z-score statistics fit on training matrices only, applied to everything else.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler<T> {
    pub features: Vec<ZScoreStats<T>>,
    pub target: ZScoreStats<T>,
}

fn fit_stats<T: Real>(v: &[T]) -> Result<ZScoreStats<T>> {
    match zscore_fit(v) {
        Ok(s) => Ok(s),
        // Constant columns carry no information; center them and leave the scale alone.
        Err(DspError::DegenerateSignal) if !v.is_empty() => Ok(ZScoreStats { mean: v[0], std: T::one() }),
        Err(e) => Err(e.into()),
    }
}

impl<T: Real> FeatureScaler<T> {
    pub fn fit(train: &[FeatureMatrix<T>]) -> Result<Self> {
        let first = train.first().ok_or(EvalError::EmptyInput)?;
        let features = (0..first.n_features())
            .map(|j| fit_stats(&train.iter().flat_map(|m| m.column(j)).collect::<Vec<T>>()))
            .collect::<Result<_>>()?;
        let target = fit_stats(&train.iter().flat_map(|m| m.y().iter().copied()).collect::<Vec<T>>())?;
        Ok(Self { features, target })
    }

    pub fn apply(&self, m: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
        if m.n_features() != self.features.len() {
            return Err(EvalError::LengthMismatch { left: self.features.len(), right: m.n_features() });
        }
        let scaled = m.map_columns(|j, v| self.features[j].apply(v));
        Ok(scaled.with_target(m.y().iter().map(|&v| self.target.apply(v)).collect())?)
    }

    pub fn to_normalizer(&self) -> Normalizer {
        let conv = |s: &ZScoreStats<T>| ZScoreStats { mean: s.mean.as_f64(), std: s.std.as_f64() };
        Normalizer { features: self.features.iter().map(conv).collect(), target: conv(&self.target) }
    }

    pub fn from_normalizer(n: &Normalizer) -> Self {
        let conv = |s: &ZScoreStats<f64>| ZScoreStats { mean: T::lit(s.mean), std: T::lit(s.std) };
        Self { features: n.features.iter().map(conv).collect(), target: conv(&n.target) }
    }
}

/// Report name used for each model kind.
pub fn report_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Ltc => "LTC",
        ModelKind::Cfc => "LTC-CfC",
        ModelKind::Mlp => "MLP",
        ModelKind::Cnn1d => "CNN",
        ModelKind::Lstm => "LSTM",
    }
}

/// A trained model with the scaling it expects.
#[derive(Debug, Clone)]
pub struct ModelRun<T> {
    pub model: LiquidModel<T>,
    pub history: History,
    pub scaler: FeatureScaler<T>,
}

impl<T: Real> ModelRun<T> {
    /// Anomaly estimate on one prepared flight.
    pub fn predict(&self, frame: &FlightFrame<T>, coeffs: &TlCoefficients<T>, cfg: &PipelineConfig) -> Result<Vec<T>> {
        let m = self.scaler.apply(&learning_matrix(frame, coeffs, cfg)?)?;
        let pred: Vec<T> = self.model.forward_sequence(&m, T::lit(frame.dt()))?.iter().map(|&v| self.scaler.target.invert(v)).collect();
        Ok(match cfg.target {
            TargetMode::TlResidual => tl_output(frame, coeffs, cfg)?.iter().zip(&pred).map(|(&t, &r)| t - r).collect(),
            TargetMode::Direct => pred,
        })
    }
}

/// Trains one model kind on prepared training flights. With two or more flights the last
/// one is held out for best-epoch selection.
pub fn run_model<T: Real>(
    kind: ModelKind,
    train: &[FlightFrame<T>],
    coeffs: &TlCoefficients<T>,
    arch: &ArchConfig,
    tcfg: &TrainConfig,
    cfg: &PipelineConfig,
) -> Result<ModelRun<T>> {
    let dt = T::lit(train.first().ok_or(EvalError::EmptyInput)?.dt());
    let raw: Vec<FeatureMatrix<T>> = train.iter().map(|f| learning_matrix(f, coeffs, cfg)).collect::<Result<_>>()?;
    let split = if raw.len() >= 2 { raw.len() - 1 } else { raw.len() };
    let scaler = FeatureScaler::fit(&raw[..split])?;
    let scaled: Vec<FeatureMatrix<T>> = raw.iter().map(|m| scaler.apply(m)).collect::<Result<_>>()?;
    let (model, history) = liquid::train(kind, &scaled[..split], &scaled[split..], arch, tcfg, dt)?;
    Ok(ModelRun { model, history, scaler })
}

/// Everything one fold produced.
#[derive(Debug, Clone)]
pub struct FoldOutput<T> {
    pub coeffs: TlCoefficients<T>,
    pub rows: Vec<ResultRow<f64>>,
    pub runs: Vec<(ModelKind, ModelRun<T>)>,
    /// Per test flight: id, truth anomaly, T-L estimate, and each model's estimate.
    pub series: Vec<(String, Vec<T>, Vec<T>, Vec<Vec<T>>)>,
}

/// Fits T-L and trains each model on `train`, then scores everything on `test`.
pub fn evaluate_fold<T: Real>(
    train: &[FlightFrame<T>],
    test: &[FlightFrame<T>],
    kinds: &[ModelKind],
    arch: &ArchConfig,
    tcfg: &TrainConfig,
    cfg: &PipelineConfig,
) -> Result<FoldOutput<T>> {
    let train: Vec<FlightFrame<T>> = train.iter().map(|f| prepare_flight(f, cfg)).collect::<Result<_>>()?;
    let test: Vec<FlightFrame<T>> = test.iter().map(|f| prepare_flight(f, cfg)).collect::<Result<_>>()?;
    let coeffs = fit_tl(&train, cfg)?;
    let runs: Vec<(ModelKind, ModelRun<T>)> =
        kinds.iter().map(|&k| Ok((k, run_model(k, &train, &coeffs, arch, tcfg, cfg)?))).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for frame in &test {
        let id = frame.flight_id().to_string();
        let truth = truth_anomaly(frame, cfg)?;
        let tl = tl_output(frame, &coeffs, cfg)?;
        rows.push(ResultRow::new(TL_MODEL, &id, rmse_demeaned(&truth, &tl)?.as_f64()));
        let mut preds = Vec::new();
        for (kind, run) in &runs {
            let est = run.predict(frame, &coeffs, cfg)?;
            rows.push(ResultRow::new(report_name(*kind), &id, rmse_demeaned(&truth, &est)?.as_f64()));
            preds.push(est);
        }
        series.push((id, truth, tl, preds));
    }
    Ok(FoldOutput { coeffs, rows, runs, series })
}

/// K-fold cross-validation by flight (`k = 0` means leave one flight out). Fold `i`
/// trains with seed `indexed_seed(tcfg.seed, [i])`.
pub fn cross_validate<T: Real>(
    frames: &[FlightFrame<T>],
    k: usize,
    seed: u64,
    kinds: &[ModelKind],
    arch: &ArchConfig,
    tcfg: &TrainConfig,
    cfg: &PipelineConfig,
) -> Result<(EvalReport<f64>, Vec<FoldOutput<T>>)> {
    let ids: Vec<String> = frames.iter().map(|f| f.flight_id().to_string()).collect();
    let k = if k == 0 { ids.len() } else { k };
    let folds = kfold_by_flight(&ids, k, seed)?;
    let pick = |names: &[String]| -> Vec<FlightFrame<T>> {
        frames.iter().filter(|f| names.iter().any(|n| n == f.flight_id())).cloned().collect()
    };
    let mut outputs = Vec::with_capacity(folds.len());
    let mut rows = Vec::new();
    for (i, fold) in folds.iter().enumerate() {
        let fold_cfg = TrainConfig { seed: indexed_seed(tcfg.seed, &[i as u64]), ..tcfg.clone() };
        let out = evaluate_fold(&pick(&fold.train), &pick(&fold.test), kinds, arch, &fold_cfg, cfg)?;
        rows.extend(out.rows.iter().cloned());
        outputs.push(out);
    }
    Ok((compare_report(&rows)?, outputs))
}
