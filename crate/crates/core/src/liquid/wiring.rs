use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LiquidError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Sensory,
    Inter,
    Command,
    Motor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Neuron {
    pub layer: Layer,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Synapse {
    pub source: Neuron,
    pub target: Neuron,
    pub polarity: i8,
}

/// Sparse four-layer wiring: sensory → inter → command (with recurrence) → motor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NcpWiring {
    pub n_sensory: usize,
    pub n_inter: usize,
    pub n_command: usize,
    pub n_motor: usize,
    pub seed: u64,
    pub fanout_frac: f64,
    pub edges: Vec<Synapse>,
}

fn n(layer: Layer, index: usize) -> Neuron {
    Neuron { layer, index }
}

impl NcpWiring {
    pub fn size(&self, layer: Layer) -> usize {
        match layer {
            Layer::Sensory => self.n_sensory,
            Layer::Inter => self.n_inter,
            Layer::Command => self.n_command,
            Layer::Motor => self.n_motor,
        }
    }

    /// Hidden units: inter + command + motor.
    pub fn units(&self) -> usize {
        self.n_inter + self.n_command + self.n_motor
    }

    /// Layer of each hidden unit in state order (inter, command, motor).
    pub fn layer_assignment(&self) -> Vec<Layer> {
        let mut out = vec![Layer::Inter; self.n_inter];
        out.extend(vec![Layer::Command; self.n_command]);
        out.extend(vec![Layer::Motor; self.n_motor]);
        out
    }

    /// Row-major `size(target) x size(source)` mask and polarity matrix for one edge type.
    pub fn block(&self, source: Layer, target: Layer) -> Vec<i8> {
        let cols = self.size(source);
        let mut m = vec![0i8; self.size(target) * cols];
        for e in self.edges.iter().filter(|e| e.source.layer == source && e.target.layer == target) {
            m[e.target.index * cols + e.source.index] = e.polarity;
        }
        m
    }

    /// Motors reachable from a sensory node by following edges.
    pub fn reachable_motors(&self, sensory: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([n(Layer::Sensory, sensory)]);
        let mut queue = VecDeque::from([n(Layer::Sensory, sensory)]);
        while let Some(u) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| e.source == u) {
                if seen.insert(e.target) {
                    queue.push_back(e.target);
                }
            }
        }
        seen.into_iter().filter(|v| v.layer == Layer::Motor).map(|v| v.index).collect()
    }

    fn check(&self) -> Result<()> {
        use Layer::*;
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            let ok = matches!(
                (e.source.layer, e.target.layer),
                (Sensory, Inter) | (Inter, Command) | (Command, Command) | (Command, Motor)
            );
            if !ok || e.source.index >= self.size(e.source.layer) || e.target.index >= self.size(e.target.layer) {
                return Err(LiquidError::InvalidSizes(format!("illegal synapse {e:?}")));
            }
            if e.polarity != 1 && e.polarity != -1 {
                return Err(LiquidError::InvalidSizes(format!("polarity {} not ±1", e.polarity)));
            }
            if !seen.insert((e.source, e.target)) {
                return Err(LiquidError::InvalidSizes(format!("duplicate synapse {e:?}")));
            }
        }
        Ok(())
    }

    /// Validates a deserialized wiring.
    pub fn validate(&self) -> Result<()> {
        self.check()?;
        for s in 0..self.n_sensory {
            if self.reachable_motors(s).len() != self.n_motor {
                return Err(LiquidError::InvalidSizes(format!("sensory {s} does not reach every motor")));
            }
        }
        Ok(())
    }
}

/// Generates an NCP wiring for `n_sensory` inputs and `total_units` hidden units.
///
/// `command = round(0.5·(total_units − outputs))`, `inter` is the remainder, and each
/// projection fans out to `max(1, round(fanout_frac · targets))` neurons. Any neuron left
/// without an input (or a command without a motor) receives one random extra synapse.
pub fn auto_ncp(n_sensory: usize, total_units: usize, outputs: usize, seed: u64, fanout_frac: f64) -> Result<NcpWiring> {
    if outputs < 1 || total_units <= outputs + 1 || n_sensory == 0 {
        return Err(LiquidError::InvalidSizes(format!(
            "need total_units > outputs + 1 and at least one input and output, got {total_units} units, {outputs} outputs, \
             {n_sensory} inputs"
        )));
    }
    if !(fanout_frac > 0.0 && fanout_frac <= 1.0) {
        return Err(LiquidError::InvalidSizes(format!("fanout fraction {fanout_frac} outside (0, 1]")));
    }
    let hidden = total_units - outputs;
    let n_command = ((0.5 * hidden as f64).round() as usize).clamp(1, hidden - 1);
    let n_inter = hidden - n_command;
    let fan = |targets: usize| ((fanout_frac * targets as f64).round() as usize).clamp(1, targets);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<Synapse> = Vec::new();
    let sign = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { 1i8 } else { -1 };
    let connect = |rng: &mut ChaCha8Rng, edges: &mut Vec<Synapse>, src: Layer, n_src: usize, dst: Layer, n_dst: usize| {
        let k = fan(n_dst);
        let all: Vec<usize> = (0..n_dst).collect();
        for s in 0..n_src {
            let mut picks: Vec<usize> = all.choose_multiple(rng, k).copied().collect();
            picks.sort_unstable();
            for t in picks {
                edges.push(Synapse { source: n(src, s), target: n(dst, t), polarity: sign(rng) });
            }
        }
        let fed: BTreeSet<usize> =
            edges.iter().filter(|e| e.source.layer == src && e.target.layer == dst).map(|e| e.target.index).collect();
        for t in (0..n_dst).filter(|t| !fed.contains(t)) {
            let s = rng.gen_range(0..n_src);
            edges.push(Synapse { source: n(src, s), target: n(dst, t), polarity: sign(rng) });
        }
    };
    connect(&mut rng, &mut edges, Layer::Sensory, n_sensory, Layer::Inter, n_inter);
    connect(&mut rng, &mut edges, Layer::Inter, n_inter, Layer::Command, n_command);

    let n_rec = fan(n_command);
    let mut rec = BTreeSet::new();
    while rec.len() < n_rec.min(n_command * n_command) {
        rec.insert((rng.gen_range(0..n_command), rng.gen_range(0..n_command)));
    }
    for (s, t) in rec {
        edges.push(Synapse { source: n(Layer::Command, s), target: n(Layer::Command, t), polarity: sign(&mut rng) });
    }

    // Command → motor: each motor draws its fan-in, then every command gets an outlet.
    let k = fan(n_command);
    let commands: Vec<usize> = (0..n_command).collect();
    for m in 0..outputs {
        let mut picks: Vec<usize> = commands.choose_multiple(&mut rng, k).copied().collect();
        picks.sort_unstable();
        for c in picks {
            edges.push(Synapse { source: n(Layer::Command, c), target: n(Layer::Motor, m), polarity: sign(&mut rng) });
        }
    }
    let has_outlet: BTreeSet<usize> =
        edges.iter().filter(|e| e.target.layer == Layer::Motor).map(|e| e.source.index).collect();
    for c in (0..n_command).filter(|c| !has_outlet.contains(c)) {
        let m = rng.gen_range(0..outputs);
        edges.push(Synapse { source: n(Layer::Command, c), target: n(Layer::Motor, m), polarity: sign(&mut rng) });
    }

    let mut wiring = NcpWiring { n_sensory, n_inter, n_command, n_motor: outputs, seed, fanout_frac, edges };
    // Close any sensory → motor gaps through a command the sensory node already reaches.
    for s in 0..n_sensory {
        let missing: Vec<usize> =
            (0..outputs).filter(|m| !wiring.reachable_motors(s).contains(m)).collect();
        for m in missing {
            let reach_cmd = reachable_commands(&wiring, s);
            let c = *reach_cmd.iter().next().expect("every inter feeds a command");
            wiring.edges.push(Synapse { source: n(Layer::Command, c), target: n(Layer::Motor, m), polarity: sign(&mut rng) });
        }
    }
    wiring.check()?;
    Ok(wiring)
}

fn reachable_commands(w: &NcpWiring, sensory: usize) -> BTreeSet<usize> {
    let inters: BTreeSet<usize> = w
        .edges
        .iter()
        .filter(|e| e.source == n(Layer::Sensory, sensory))
        .map(|e| e.target.index)
        .collect();
    w.edges
        .iter()
        .filter(|e| e.source.layer == Layer::Inter && inters.contains(&e.source.index))
        .map(|e| e.target.index)
        .collect()
}
