use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{Bound, ParamSet};
use super::tape::{Tape, Var};
use super::wiring::{auto_ncp, Layer, NcpWiring};
use super::{LiquidError, Result};
use crate::flightdata::FeatureMatrix;
use crate::seed::child_seed;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ltc,
    Cfc,
    Mlp,
    Cnn1d,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::Ltc, ModelKind::Cfc, ModelKind::Mlp, ModelKind::Cnn1d, ModelKind::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ltc => "ltc",
            ModelKind::Cfc => "cfc",
            ModelKind::Mlp => "mlp",
            ModelKind::Cnn1d => "cnn1d",
            ModelKind::Lstm => "lstm",
        }
    }

    pub fn is_liquid(self) -> bool {
        matches!(self, ModelKind::Ltc | ModelKind::Cfc)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = LiquidError;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LiquidError::InvalidConfig(format!("unknown model kind `{s}`")))
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Architecture hyperparameters. Liquid models use the NCP fields, baselines the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub units: usize,
    pub fanout_frac: f64,
    /// LTC solver sub-steps per sample.
    pub unfold: usize,
    /// Lookback window of the baselines, samples.
    pub window: usize,
    pub hidden: Vec<usize>,
    pub channels: usize,
    pub kernel: usize,
    pub lstm_hidden: usize,
    /// Sequence length for stateful inference; state resets between sequences.
    pub seq_len: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            units: 65,
            fanout_frac: 0.4,
            unfold: 6,
            window: 10,
            hidden: vec![32, 32],
            channels: 16,
            kernel: 3,
            lstm_hidden: 16,
            seq_len: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct NcpLayer {
    n: usize,
    w_in: usize,
    w_rec: Option<usize>,
    bias: usize,
    /// CfC: f, g, h scale/shift pairs. LTC: f scale/shift, reversal `a`, raw `w_tau`.
    heads: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    w: usize,
    b: usize,
    rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Arch {
    Ncp { wiring: NcpWiring, layers: [NcpLayer; 3], out_w: usize, out_b: usize },
    Mlp { layers: Vec<Dense>, out: Dense },
    Cnn { conv: [Dense; 2], out: Dense },
    Lstm { gates: Dense, out: Dense },
}

/// A trainable regressor: parameters plus the structure that reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct LiquidModel<T> {
    kind: ModelKind,
    config: ArchConfig,
    n_features: usize,
    seed: u64,
    params: ParamSet<T>,
    arch: Arch,
}

/// Hidden state of an NCP cell: `x` is inter, command, then motor units.
#[derive(Debug, Clone, PartialEq)]
pub struct LiquidState<T> {
    pub x: Vec<T>,
    pub t: T,
}

impl<T: Real> LiquidState<T> {
    pub fn zeros(units: usize) -> Self {
        Self { x: vec![T::zero(); units], t: T::zero() }
    }
}

/// Inverted-dropout mask source for one sequence.
pub struct Dropout {
    rate: f64,
    rng: ChaCha8Rng,
}

impl Dropout {
    pub fn new(rate: f64, seed: u64) -> Self {
        Self { rate, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn apply<'t, T: Real>(&mut self, v: Var<'t, T>) -> Var<'t, T> {
        if self.rate <= 0.0 {
            return v;
        }
        let keep = T::lit(1.0 / (1.0 - self.rate));
        let mask = (0..v.len()).map(|_| if self.rng.gen_bool(self.rate) { T::zero() } else { keep }).collect();
        v.mul_const(mask)
    }
}

fn maybe_drop<'t, T: Real>(v: Var<'t, T>, drop: &mut Option<&mut Dropout>) -> Var<'t, T> {
    match drop {
        Some(d) => d.apply(v),
        None => v,
    }
}

fn uniform<T: Real>(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<T> {
    (0..n).map(|_| T::lit(rng.gen_range(-bound..=bound))).collect()
}

fn dense<T: Real>(ps: &mut ParamSet<T>, rng: &mut ChaCha8Rng, name: &str, rows: usize, cols: usize) -> Dense {
    let bound = 1.0 / (cols as f64).sqrt();
    let w = ps.push(format!("{name}.w"), vec![rows, cols], uniform(rng, rows * cols, bound), None);
    let b = ps.push(format!("{name}.b"), vec![rows], uniform(rng, rows, bound), None);
    Dense { w, b, rows }
}

fn inverse_softplus(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

impl<T: Real> LiquidModel<T> {
    /// Builds an LTC or CfC model on a fresh AutoNCP wiring.
    pub fn liquid(kind: ModelKind, n_features: usize, config: ArchConfig, seed: u64) -> Result<Self> {
        let wiring = auto_ncp(n_features, config.units, 1, child_seed(seed, "wiring"), config.fanout_frac)?;
        Self::with_wiring(kind, wiring, config, seed)
    }

    /// Builds an LTC or CfC model on a given wiring.
    pub fn with_wiring(kind: ModelKind, wiring: NcpWiring, config: ArchConfig, seed: u64) -> Result<Self> {
        if !kind.is_liquid() {
            return Err(LiquidError::InvalidConfig(format!("{kind} is not a liquid model")));
        }
        if wiring.n_motor != 1 {
            return Err(LiquidError::InvalidSizes("regression models need exactly one motor neuron".into()));
        }
        if config.unfold == 0 || config.seq_len == 0 {
            return Err(LiquidError::InvalidConfig("unfold and seq_len must be at least 1".into()));
        }
        wiring.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, "init"));
        let mut ps = ParamSet::new();
        let plan = [
            ("inter", Layer::Inter, Layer::Sensory),
            ("command", Layer::Command, Layer::Inter),
            ("motor", Layer::Motor, Layer::Command),
        ];
        let layers = plan.map(|(name, layer, source)| {
            let n = wiring.size(layer);
            let n_in = wiring.size(source);
            let block = wiring.block(source, layer);
            let rec = (layer == Layer::Command).then(|| wiring.block(Layer::Command, Layer::Command));
            let fan_in = |r: usize| {
                let a = block[r * n_in..(r + 1) * n_in].iter().filter(|&&p| p != 0).count();
                let b = rec.as_ref().map_or(0, |m| m[r * n..(r + 1) * n].iter().filter(|&&p| p != 0).count());
                (a + b).max(1)
            };
            let signed = |rng: &mut ChaCha8Rng, pol: &[i8], cols: usize| -> Vec<T> {
                pol.iter()
                    .enumerate()
                    .map(|(k, &p)| T::lit(f64::from(p) * rng.gen_range(0.0..=1.0 / (fan_in(k / cols) as f64).sqrt())))
                    .collect()
            };
            let mask = |pol: &[i8]| Some(pol.iter().map(|&p| if p == 0 { T::zero() } else { T::one() }).collect());
            let w_in = ps.push(format!("{name}.w_in"), vec![n, n_in], signed(&mut rng, &block, n_in), mask(&block));
            let w_rec = rec.as_ref().map(|m| ps.push(format!("{name}.w_rec"), vec![n, n], signed(&mut rng, m, n), mask(m)));
            let bias = ps.push(format!("{name}.bias"), vec![n], vec![T::zero(); n], None);
            let heads = match kind {
                ModelKind::Cfc => ["f", "g", "h"]
                    .iter()
                    .flat_map(|h| {
                        let s = ps.push(format!("{name}.{h}_scale"), vec![n], uniform(&mut rng, n, 1.0), None);
                        let b = ps.push(format!("{name}.{h}_shift"), vec![n], vec![T::zero(); n], None);
                        [s, b]
                    })
                    .collect(),
                _ => {
                    let s = ps.push(format!("{name}.f_scale"), vec![n], uniform(&mut rng, n, 1.0), None);
                    let b = ps.push(format!("{name}.f_shift"), vec![n], vec![T::zero(); n], None);
                    let a = ps.push(format!("{name}.a"), vec![n], uniform(&mut rng, n, 1.0), None);
                    let tau = (0..n).map(|_| T::lit(inverse_softplus(rng.gen_range(0.5..=2.0)))).collect();
                    let w = ps.push(format!("{name}.w_tau_raw"), vec![n], tau, None);
                    vec![s, b, a, w]
                }
            };
            NcpLayer { n, w_in, w_rec, bias, heads }
        });
        let out_w = ps.push("out.w", vec![1], uniform(&mut rng, 1, 1.0), None);
        let out_b = ps.push("out.b", vec![1], vec![T::zero()], None);
        let n_features = wiring.n_sensory;
        Ok(Self { kind, config, n_features, seed, params: ps, arch: Arch::Ncp { wiring, layers, out_w, out_b } })
    }

    /// Builds an MLP, CNN, or LSTM baseline over a lookback window.
    pub fn baseline(kind: ModelKind, n_features: usize, config: ArchConfig, seed: u64) -> Result<Self> {
        if config.window == 0 || config.seq_len == 0 || n_features == 0 {
            return Err(LiquidError::InvalidConfig("window, seq_len and feature count must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, "init"));
        let mut ps = ParamSet::new();
        let m = n_features;
        let arch = match kind {
            ModelKind::Mlp => {
                let mut layers = Vec::new();
                let mut width = config.window * m;
                for (i, &h) in config.hidden.iter().enumerate() {
                    if h == 0 {
                        return Err(LiquidError::InvalidConfig("hidden widths must be positive".into()));
                    }
                    layers.push(dense(&mut ps, &mut rng, &format!("hidden{i}"), h, width));
                    width = h;
                }
                let out = dense(&mut ps, &mut rng, "out", 1, width);
                Arch::Mlp { layers, out }
            }
            ModelKind::Cnn1d => {
                let (k, c) = (config.kernel, config.channels);
                if k == 0 || c == 0 || config.window < 2 * k - 1 {
                    return Err(LiquidError::InvalidConfig(format!(
                        "cnn1d needs window ≥ 2·kernel − 1, got window {} kernel {k}",
                        config.window
                    )));
                }
                let c1 = dense(&mut ps, &mut rng, "conv1", c, k * m);
                let c2 = dense(&mut ps, &mut rng, "conv2", c, k * c);
                let out = dense(&mut ps, &mut rng, "out", 1, c);
                Arch::Cnn { conv: [c1, c2], out }
            }
            ModelKind::Lstm => {
                let h = config.lstm_hidden;
                if h == 0 {
                    return Err(LiquidError::InvalidConfig("lstm hidden size must be positive".into()));
                }
                let gates = dense(&mut ps, &mut rng, "gates", 4 * h, m + h);
                let out = dense(&mut ps, &mut rng, "out", 1, h);
                Arch::Lstm { gates, out }
            }
            _ => return Err(LiquidError::InvalidConfig(format!("{kind} is not a baseline"))),
        };
        Ok(Self { kind, config, n_features, seed, params: ps, arch })
    }

    /// Builds any model kind with default wiring/initialization for `seed`.
    pub fn build(kind: ModelKind, n_features: usize, config: ArchConfig, seed: u64) -> Result<Self> {
        if kind.is_liquid() {
            Self::liquid(kind, n_features, config, seed)
        } else {
            Self::baseline(kind, n_features, config, seed)
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn config(&self) -> &ArchConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn wiring(&self) -> Option<&NcpWiring> {
        match &self.arch {
            Arch::Ncp { wiring, .. } => Some(wiring),
            _ => None,
        }
    }

    /// Hidden units of an NCP model (0 for baselines).
    pub fn units(&self) -> usize {
        self.wiring().map_or(0, NcpWiring::units)
    }

    /// Records the model over one sequence and returns one scalar output node per row.
    pub fn record<'t>(
        &self,
        tape: &'t Tape<T>,
        p: &Bound<'t, T>,
        rows: &[&[T]],
        dt: T,
        mut drop: Option<&mut Dropout>,
    ) -> Vec<Var<'t, T>> {
        let inputs: Vec<Var<'t, T>> = rows.iter().map(|r| tape.leaf(r.to_vec())).collect();
        match &self.arch {
            Arch::Ncp { layers, out_w, out_b, .. } => {
                let mut state: Vec<Var<'t, T>> = layers.iter().map(|l| tape.leaf(vec![T::zero(); l.n])).collect();
                let mut outs = Vec::with_capacity(rows.len());
                for (k, &input) in inputs.iter().enumerate() {
                    state = match self.kind {
                        ModelKind::Cfc => {
                            let t = dt * T::from_usize_lossy(k);
                            self.cfc_layers(p, layers, input, &state, t, &mut drop)
                        }
                        _ => self.ltc_layers(tape, p, layers, input, state, dt, self.config.unfold, &mut drop),
                    };
                    outs.push(p[*out_w].mul(state[2]).add(p[*out_b]));
                }
                outs
            }
            Arch::Mlp { layers, out } => (0..rows.len())
                .map(|t| {
                    let mut h = tape.concat(&lookback(&inputs, t, self.config.window));
                    for l in layers {
                        h = maybe_drop(affine(p, l, h).tanh(), &mut drop);
                    }
                    affine(p, out, h)
                })
                .collect(),
            Arch::Cnn { conv, out } => (0..rows.len())
                .map(|t| {
                    let feats = self.cnn_record(tape, p, conv, &lookback(&inputs, t, self.config.window));
                    let n = T::from_usize_lossy(feats.len());
                    let pooled = feats[1..].iter().fold(feats[0], |s, f| s.add(*f)).scale(T::one() / n);
                    affine(p, out, maybe_drop(pooled, &mut drop))
                })
                .collect(),
            Arch::Lstm { gates, out } => {
                let h = self.config.lstm_hidden;
                let zero = tape.leaf(vec![T::zero(); h]);
                (0..rows.len())
                    .map(|t| {
                        let (mut hs, mut cs) = (zero, zero);
                        for x in lookback(&inputs, t, self.config.window) {
                            let z = affine(p, gates, tape.concat(&[x, hs]));
                            let i = z.slice(0, h).sigmoid();
                            let f = z.slice(h, h).sigmoid();
                            let g = z.slice(2 * h, h).tanh();
                            let o = z.slice(3 * h, h).sigmoid();
                            cs = f.mul(cs).add(i.mul(g));
                            hs = o.mul(cs.tanh());
                        }
                        affine(p, out, maybe_drop(hs, &mut drop))
                    })
                    .collect()
            }
        }
    }

    fn backbone<'t>(
        &self,
        p: &Bound<'t, T>,
        l: &NcpLayer,
        u: Var<'t, T>,
        x: Var<'t, T>,
        drop: &mut Option<&mut Dropout>,
        is_motor: bool,
    ) -> Var<'t, T> {
        let mut z = Var::matvec(p[l.w_in], u, l.n).add(p[l.bias]);
        if let Some(r) = l.w_rec {
            z = z.add(Var::matvec(p[r], x, l.n));
        }
        let b = z.tanh();
        if is_motor {
            b
        } else {
            maybe_drop(b, drop)
        }
    }

    fn cfc_layers<'t>(
        &self,
        p: &Bound<'t, T>,
        layers: &[NcpLayer; 3],
        input: Var<'t, T>,
        state: &[Var<'t, T>],
        t: T,
        drop: &mut Option<&mut Dropout>,
    ) -> Vec<Var<'t, T>> {
        let mut next: Vec<Var<'t, T>> = Vec::with_capacity(3);
        for (i, l) in layers.iter().enumerate() {
            let u = if i == 0 { input } else { next[i - 1] };
            let b = self.backbone(p, l, u, state[i], drop, i == 2);
            let head = |k: usize| p[l.heads[2 * k]].mul(b).add(p[l.heads[2 * k + 1]]);
            let f = head(0);
            let g = head(1).tanh();
            let h = head(2).tanh();
            let gate = f.scale(-t).sigmoid();
            next.push(h.add(gate.mul(g.sub(h))));
        }
        next
    }

    #[allow(clippy::too_many_arguments)]
    fn ltc_layers<'t>(
        &self,
        tape: &'t Tape<T>,
        p: &Bound<'t, T>,
        layers: &[NcpLayer; 3],
        input: Var<'t, T>,
        mut state: Vec<Var<'t, T>>,
        dt: T,
        unfold: usize,
        drop: &mut Option<&mut Dropout>,
    ) -> Vec<Var<'t, T>> {
        let delta = dt / T::from_usize_lossy(unfold);
        let _ = tape;
        let taus: Vec<Var<'t, T>> = layers.iter().map(|l| p[l.heads[3]].softplus()).collect();
        // Dropout masks are drawn once per sample and shared by the sub-steps.
        let masks: Vec<Option<Vec<T>>> = layers
            .iter()
            .enumerate()
            .map(|(i, l)| match (i, drop.as_deref_mut()) {
                (0 | 1, Some(d)) if d.rate > 0.0 => {
                    let keep = T::lit(1.0 / (1.0 - d.rate));
                    Some((0..l.n).map(|_| if d.rng.gen_bool(d.rate) { T::zero() } else { keep }).collect())
                }
                _ => None,
            })
            .collect();
        for _ in 0..unfold {
            for (i, l) in layers.iter().enumerate() {
                let u = if i == 0 { input } else { state[i - 1] };
                let mut b = self.backbone(p, l, u, state[i], &mut None, true);
                if let Some(m) = &masks[i] {
                    b = b.mul_const(m.clone());
                }
                let f = p[l.heads[0]].mul(b).add(p[l.heads[1]]).softplus();
                let num = state[i].add(f.mul(p[l.heads[2]]).scale(delta));
                let den = taus[i].add(f).scale(delta).add_scalar(T::one());
                state[i] = num.div(den);
            }
        }
        state
    }

    fn cnn_record<'t>(&self, tape: &'t Tape<T>, p: &Bound<'t, T>, conv: &[Dense; 2], window: &[Var<'t, T>]) -> Vec<Var<'t, T>> {
        let k = self.config.kernel;
        let layer = |d: &Dense, xs: &[Var<'t, T>]| -> Vec<Var<'t, T>> {
            (0..=xs.len() - k).map(|j| affine(p, d, tape.concat(&xs[j..j + k])).tanh()).collect()
        };
        let h1 = layer(&conv[0], window);
        layer(&conv[1], &h1)
    }

    /// Pre-pooling CNN features over an explicit window (each row one time step).
    pub fn cnn_features(&self, window: &[&[T]]) -> Result<Vec<Vec<T>>> {
        let Arch::Cnn { conv, .. } = &self.arch else {
            return Err(LiquidError::InvalidConfig("not a cnn1d model".into()));
        };
        let tape = Tape::new();
        let p = self.params.bind(&tape);
        let xs: Vec<_> = window.iter().map(|r| tape.leaf(r.to_vec())).collect();
        Ok(self.cnn_record(&tape, &p, conv, &xs).iter().map(Var::value).collect())
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.n_features {
            return Err(LiquidError::ShapeMismatch { expected: self.n_features, got: width });
        }
        Ok(())
    }

    /// Predictions for every row of `x`, processed in independent sequences of `seq_len` rows.
    pub fn forward_sequence(&self, x: &FeatureMatrix<T>, dt: T) -> Result<Vec<T>> {
        self.check_width(x.n_features())?;
        let n = x.n_rows();
        let chunks: Vec<(usize, usize)> =
            (0..n).step_by(self.config.seq_len).map(|s| (s, (s + self.config.seq_len).min(n))).collect();
        let parts: Vec<Vec<T>> = chunks
            .par_iter()
            .map(|&(s, e)| {
                let rows: Vec<&[T]> = (s..e).map(|i| x.row(i)).collect();
                let tape = Tape::new();
                let p = self.params.bind(&tape);
                self.record(&tape, &p, &rows, dt, None).iter().map(|v| v.value()[0]).collect()
            })
            .collect();
        let out: Vec<T> = parts.concat();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(LiquidError::NonFiniteState);
        }
        Ok(out)
    }

    fn ncp(&self) -> Result<&[NcpLayer; 3]> {
        match &self.arch {
            Arch::Ncp { layers, .. } => Ok(layers),
            _ => Err(LiquidError::InvalidConfig(format!("{} has no liquid cell", self.kind))),
        }
    }

    fn split_state<'t>(&self, tape: &'t Tape<T>, layers: &[NcpLayer; 3], x: &[T]) -> Result<Vec<Var<'t, T>>> {
        let total: usize = layers.iter().map(|l| l.n).sum();
        if x.len() != total {
            return Err(LiquidError::ShapeMismatch { expected: total, got: x.len() });
        }
        let mut off = 0;
        Ok(layers
            .iter()
            .map(|l| {
                let v = tape.leaf(x[off..off + l.n].to_vec());
                off += l.n;
                v
            })
            .collect())
    }

    fn join_state(state: &[Var<'_, T>], t: T) -> Result<LiquidState<T>> {
        let x: Vec<T> = state.iter().flat_map(|v| v.value()).collect();
        if x.iter().any(|v| !v.is_finite()) || !t.is_finite() {
            return Err(LiquidError::NonFiniteState);
        }
        Ok(LiquidState { x, t })
    }

    /// One LTC sample step: `unfold` fused semi-implicit updates of length `dt / unfold`.
    pub fn ltc_step(&self, state: &LiquidState<T>, input: &[T], dt: T, unfold: usize) -> Result<LiquidState<T>> {
        if self.kind != ModelKind::Ltc {
            return Err(LiquidError::InvalidConfig(format!("ltc_step on a {} model", self.kind)));
        }
        if !(dt > T::zero()) || unfold == 0 {
            return Err(LiquidError::InvalidConfig("ltc_step needs dt > 0 and unfold ≥ 1".into()));
        }
        self.check_width(input.len())?;
        let layers = self.ncp()?;
        let tape = Tape::new();
        let p = self.params.bind(&tape);
        let s = self.split_state(&tape, layers, &state.x)?;
        let u = tape.leaf(input.to_vec());
        let next = self.ltc_layers(&tape, &p, layers, u, s, dt, unfold, &mut None);
        Self::join_state(&next, state.t + dt)
    }

    /// One CfC step at elapsed time `t`.
    pub fn cfc_step(&self, state: &LiquidState<T>, input: &[T], t: T) -> Result<LiquidState<T>> {
        if self.kind != ModelKind::Cfc {
            return Err(LiquidError::InvalidConfig(format!("cfc_step on a {} model", self.kind)));
        }
        if !(t >= T::zero()) {
            return Err(LiquidError::InvalidConfig("cfc_step needs t ≥ 0".into()));
        }
        self.check_width(input.len())?;
        let layers = self.ncp()?;
        let tape = Tape::new();
        let p = self.params.bind(&tape);
        let s = self.split_state(&tape, layers, &state.x)?;
        let u = tape.leaf(input.to_vec());
        let next = self.cfc_layers(&p, layers, u, &s, t, &mut None);
        Self::join_state(&next, t)
    }

    /// Right-hand side of the LTC ODE, `−(w_τ + f)·x + f·A`, with all layers evaluated at `x`.
    pub fn ltc_derivative(&self, x: &[T], input: &[T]) -> Result<Vec<T>> {
        if self.kind != ModelKind::Ltc {
            return Err(LiquidError::InvalidConfig(format!("ltc_derivative on a {} model", self.kind)));
        }
        self.check_width(input.len())?;
        let layers = self.ncp()?;
        let tape = Tape::new();
        let p = self.params.bind(&tape);
        let s = self.split_state(&tape, layers, x)?;
        let u = tape.leaf(input.to_vec());
        let mut out = Vec::with_capacity(x.len());
        for (i, l) in layers.iter().enumerate() {
            let src = if i == 0 { u } else { s[i - 1] };
            let b = self.backbone(&p, l, src, s[i], &mut None, true);
            let f = p[l.heads[0]].mul(b).add(p[l.heads[1]]).softplus();
            let tau = p[l.heads[3]].softplus();
            out.extend(f.mul(p[l.heads[2]]).sub(tau.add(f).mul(s[i])).value());
        }
        Ok(out)
    }

    /// Output read from a motor state: `out.w · x_motor + out.b`.
    pub fn readout(&self, state: &LiquidState<T>) -> Result<T> {
        let Arch::Ncp { out_w, out_b, .. } = &self.arch else {
            return Err(LiquidError::InvalidConfig(format!("{} has no motor neurons", self.kind)));
        };
        let motor = *state.x.last().ok_or(LiquidError::ShapeMismatch { expected: 1, got: 0 })?;
        Ok(self.params.get(*out_w).data[0] * motor + self.params.get(*out_b).data[0])
    }
}

fn affine<'t, T: Real>(p: &Bound<'t, T>, d: &Dense, x: Var<'t, T>) -> Var<'t, T> {
    Var::matvec(p[d.w], x, d.rows).add(p[d.b])
}

/// The `window` rows ending at `t`, repeating the first row where the sequence is too short.
fn lookback<'t, T: Real>(inputs: &[Var<'t, T>], t: usize, window: usize) -> Vec<Var<'t, T>> {
    (0..window).map(|j| inputs[(t + j + 1).saturating_sub(window)]).collect()
}

/// Scalar fused LTC update `(x + δ·f·A) / (1 + δ·(w_τ + f))`.
pub fn fused_update<T: Real>(x: T, f: T, w_tau: T, a: T, delta: T) -> T {
    (x + delta * f * a) / (T::one() + delta * (w_tau + f))
}

/// Scalar CfC update `σ(−f·t)·g + (1 − σ(−f·t))·h`.
pub fn cfc_update<T: Real>(f: T, g: T, h: T, t: T) -> T {
    let gate = (-(f * t)).sigmoid();
    gate * g + (T::one() - gate) * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liquid::{sequence_loss, sequence_loss_grad, Adam};
    use proptest::prelude::{prop_assert, proptest};

    fn small() -> ArchConfig {
        ArchConfig { units: 6, seq_len: 5, window: 4, hidden: vec![3], channels: 2, kernel: 2, lstm_hidden: 3, ..ArchConfig::default() }
    }

    fn random_rows(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix<f64> {
        let m = rows[0].len();
        let names = (0..m).map(|j| format!("f{j}")).collect();
        FeatureMatrix::new(rows.concat(), vec![0.0; rows.len()], names).unwrap()
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let x = matrix(&random_rows(12, 3, 1));
        for kind in ModelKind::ALL {
            let mut model = LiquidModel::<f64>::build(kind, 3, small(), 4).unwrap();
            for i in 0..model.params().len() {
                let n = model.params().get(i).len();
                let v = if model.params().get(i).name == "out.b" { 0.7 } else { 0.0 };
                model.params_mut().set_data(i, vec![v; n]).unwrap();
            }
            let y = model.forward_sequence(&x, 0.1).unwrap();
            assert!(y.iter().all(|&v| v == 0.7), "{kind}: {y:?}");
        }
    }

    #[test]
    fn one_row_is_one_step_plus_projection() {
        let rows = random_rows(1, 3, 2);
        let x = matrix(&rows);
        let cfc = LiquidModel::<f64>::build(ModelKind::Cfc, 3, small(), 5).unwrap();
        let s = cfc.cfc_step(&LiquidState::zeros(cfc.units()), &rows[0], 0.0).unwrap();
        assert_eq!(cfc.forward_sequence(&x, 0.1).unwrap()[0], cfc.readout(&s).unwrap());
        let ltc = LiquidModel::<f64>::build(ModelKind::Ltc, 3, small(), 5).unwrap();
        let s = ltc.ltc_step(&LiquidState::zeros(ltc.units()), &rows[0], 0.1, 6).unwrap();
        assert_eq!(ltc.forward_sequence(&x, 0.1).unwrap()[0], ltc.readout(&s).unwrap());
    }

    #[test]
    fn sequences_do_not_share_state() {
        let rows = random_rows(15, 3, 3);
        for kind in ModelKind::ALL {
            let model = LiquidModel::<f64>::build(kind, 3, small(), 6).unwrap();
            let whole = model.forward_sequence(&matrix(&rows), 0.1).unwrap();
            let mut swapped = rows[10..15].to_vec();
            swapped.extend_from_slice(&rows[0..10]);
            let moved = model.forward_sequence(&matrix(&swapped), 0.1).unwrap();
            assert_eq!(&whole[10..15], &moved[0..5], "{kind}");
            assert_eq!(&whole[0..10], &moved[5..15], "{kind}");
        }
    }

    #[test]
    fn rejects_wrong_width() {
        let model = LiquidModel::<f64>::build(ModelKind::Cfc, 3, small(), 6).unwrap();
        let x = matrix(&random_rows(4, 2, 0));
        assert!(matches!(model.forward_sequence(&x, 0.1), Err(LiquidError::ShapeMismatch { expected: 3, got: 2 })));
    }

    /// Central-difference oracle over every free parameter.
    fn max_grad_error(model: &LiquidModel<f64>, rows: &[Vec<f64>], y: &[f64]) -> (f64, usize) {
        let r: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let (_, grads) = sequence_loss_grad(model, &r, y, 0.1, None).unwrap();
        let (mut worst, mut count) = (0.0f64, 0);
        for i in 0..model.params().len() {
            for k in 0..model.params().get(i).len() {
                if !model.params().get(i).is_free(k) {
                    assert_eq!(grads[i][k], 0.0);
                    continue;
                }
                let eval = |d: f64| {
                    let mut m = model.clone();
                    m.params_mut().get_mut(i).data[k] += d;
                    sequence_loss(&m, &r, y, 0.1)
                };
                let fd = (eval(1e-5) - eval(-1e-5)) / 2e-5;
                let err = (fd - grads[i][k]).abs() / fd.abs().max(grads[i][k].abs()).max(1e-6);
                worst = worst.max(err);
                count += 1;
            }
        }
        (worst, count)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let rows = random_rows(5, 3, 7);
        let y = [0.3, -0.2, 0.5, 0.1, -0.4];
        for kind in ModelKind::ALL {
            let cfg = ArchConfig { units: 5, ..small() };
            let model = LiquidModel::<f64>::build(kind, 3, cfg, 11).unwrap();
            let (err, n) = max_grad_error(&model, &rows, &y);
            assert!(err < 1e-5, "{kind}: {err} over {n}");
        }
    }

    #[test]
    fn masks_survive_optimization() {
        let rows = random_rows(5, 3, 8);
        let r: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let mut model = LiquidModel::<f64>::build(ModelKind::Ltc, 3, ArchConfig { units: 9, ..small() }, 2).unwrap();
        let mut opt = Adam::new(0.05, model.params());
        for _ in 0..10 {
            let (_, g) = sequence_loss_grad(&model, &r, &[1.0; 5], 0.1, None).unwrap();
            opt.step(model.params_mut(), &g).unwrap();
        }
        let mut masked = 0;
        for p in model.params().params() {
            for k in 0..p.len() {
                if !p.is_free(k) {
                    assert_eq!(p.data[k], 0.0, "{}", p.name);
                    masked += 1;
                }
            }
        }
        assert!(masked > 0);
    }

    #[test]
    fn fused_update_examples() {
        assert!((fused_update(1.0f64, 1.0, 1.0, 0.0, 0.2) - 1.0 / 1.4).abs() < 1e-15);
        assert_eq!(fused_update(2.0, 0.0, 0.5, 3.0, 0.1), 2.0 / 1.05);
    }

    #[test]
    fn cfc_gate_limits() {
        assert_eq!(cfc_update(0.0, 2.0, 4.0, 1.0), 3.0);
        assert_eq!(cfc_update(5.0, 2.0, 4.0, 0.0), 3.0);
        assert!((cfc_update(1.0f64, 2.0, 4.0, 1e3) - 4.0).abs() < 1e-12);
        assert!((cfc_update(-1.0f64, 2.0, 4.0, 1e3) - 2.0).abs() < 1e-12);
    }

    /// Fixed-step RK4 on the model's own ODE right-hand side.
    fn rk4(model: &LiquidModel<f64>, x0: &[f64], u: &[f64], horizon: f64, steps: usize) -> Vec<f64> {
        let h = horizon / steps as f64;
        let mut x = x0.to_vec();
        let axpy = |x: &[f64], k: &[f64], s: f64| x.iter().zip(k).map(|(a, b)| a + s * b).collect::<Vec<_>>();
        for _ in 0..steps {
            let k1 = model.ltc_derivative(&x, u).unwrap();
            let k2 = model.ltc_derivative(&axpy(&x, &k1, h / 2.0), u).unwrap();
            let k3 = model.ltc_derivative(&axpy(&x, &k2, h / 2.0), u).unwrap();
            let k4 = model.ltc_derivative(&axpy(&x, &k3, h), u).unwrap();
            for j in 0..x.len() {
                x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        x
    }

    #[test]
    fn fused_solver_converges_at_first_order() {
        let model = LiquidModel::<f64>::build(ModelKind::Ltc, 2, ArchConfig { units: 8, ..small() }, 3).unwrap();
        let u = [0.8, -0.5];
        let x0: Vec<f64> = (0..model.units()).map(|k| 0.3 * (k as f64).cos()).collect();
        let exact = rk4(&model, &x0, &u, 1.0, 20_000);
        let errs: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&dt| {
                let mut s = LiquidState { x: x0.clone(), t: 0.0 };
                for _ in 0..(1.0 / dt as f64).round() as usize {
                    s = model.ltc_step(&s, &u, dt, 1).unwrap();
                }
                s.x.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.6..=2.4).contains(&ratio), "{errs:?}");
        }
    }

    #[test]
    fn cnn_features_shift_with_the_input() {
        let model = LiquidModel::<f64>::build(ModelKind::Cnn1d, 3, small(), 9).unwrap();
        let signal = random_rows(9, 3, 4);
        let a: Vec<&[f64]> = signal[0..8].iter().map(Vec::as_slice).collect();
        let b: Vec<&[f64]> = signal[1..9].iter().map(Vec::as_slice).collect();
        let (fa, fb) = (model.cnn_features(&a).unwrap(), model.cnn_features(&b).unwrap());
        assert_eq!(fa.len(), 6);
        assert_eq!(&fa[1..], &fb[..5]);
    }

    #[test]
    fn mlp_without_hidden_layers_is_affine() {
        let cfg = ArchConfig { window: 1, hidden: vec![], ..small() };
        let model = LiquidModel::<f64>::build(ModelKind::Mlp, 2, cfg, 1).unwrap();
        let f = |v: [f64; 2]| model.forward_sequence(&matrix(&[v.to_vec()]), 0.1).unwrap()[0];
        let lhs = f([0.4, -1.0]) + f([1.5, 2.0]) - f([0.0, 0.0]);
        assert!((lhs - f([1.9, 1.0])).abs() < 1e-12);
    }

    #[test]
    fn builder_rejects_bad_configs() {
        assert!(LiquidModel::<f64>::baseline(ModelKind::Mlp, 3, ArchConfig { window: 0, ..small() }, 0).is_err());
        assert!(LiquidModel::<f64>::baseline(ModelKind::Cnn1d, 3, ArchConfig { window: 2, kernel: 2, ..small() }, 0).is_err());
        assert!(LiquidModel::<f64>::baseline(ModelKind::Cfc, 3, small(), 0).is_err());
        assert!(LiquidModel::<f64>::liquid(ModelKind::Lstm, 3, small(), 0).is_err());
        assert!("gru".parse::<ModelKind>().is_err());
        assert_eq!("cnn1d".parse::<ModelKind>().unwrap(), ModelKind::Cnn1d);
    }

    #[test]
    fn single_precision_forward() {
        let model = LiquidModel::<f32>::build(ModelKind::Cfc, 3, small(), 6).unwrap();
        let names = vec!["a".into(), "b".into(), "c".into()];
        let x = FeatureMatrix::new(vec![0.1f32; 30], vec![0.0; 10], names).unwrap();
        assert!(model.forward_sequence(&x, 0.1).unwrap().iter().all(|v| v.is_finite()));
    }

    proptest! {
        #[test]
        fn cfc_output_is_a_convex_combination(f in -50.0f64..50.0, g in -1.0f64..1.0, h in -1.0f64..1.0, t in 0.0f64..20.0) {
            let x = cfc_update(f, g, h, t);
            prop_assert!(x >= g.min(h) - 1e-15 && x <= g.max(h) + 1e-15);
        }

        #[test]
        fn fused_step_is_stable(x in -1e3f64..1e3, f in 0.0f64..1e3, w in 1e-3f64..1e2, a in -10.0f64..10.0, d in 1e-4f64..10.0) {
            let y = fused_update(x, f, w, a, d);
            prop_assert!(y.abs() <= x.abs().max(a.abs()) * (1.0 + 1e-12));
        }

        #[test]
        fn cfc_cell_states_stay_between_heads(seed in 0u64..200, t in 0.0f64..5.0) {
            let model = LiquidModel::<f64>::build(ModelKind::Cfc, 3, small(), seed).unwrap();
            let rows = random_rows(1, 3, seed);
            let s = model.cfc_step(&LiquidState::zeros(model.units()), &rows[0], t).unwrap();
            prop_assert!(s.x.iter().all(|v| v.abs() <= 1.0));
        }
    }
}
