use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Bump, Sinusoid, SynthConfig, MAG_QUANTUM_NT};
use super::Result;
use crate::flightdata::{FlightFrame, LineId};
use crate::seed::child_seed;
use crate::tolles_lawson::TL_TERMS;

/// Attitude and body-frame Earth field, before the anomaly is added to the flux magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Maneuvers {
    pub roll: Vec<f64>,
    pub pitch: Vec<f64>,
    pub yaw: Vec<f64>,
    pub flux_x: Vec<f64>,
    pub flux_y: Vec<f64>,
    pub flux_z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFlight {
    pub frame: FlightFrame<f64>,
    /// Anomaly signal, nT. `mag_1_c` equals `igrf + truth` exactly.
    pub truth: Vec<f64>,
    /// Coefficients that generated the `mag_4_uc` interference.
    pub beta_true: Vec<f64>,
    /// `A·beta_true` on `mag_4_uc`, computed from the analytic attitude.
    pub interference: Vec<f64>,
    /// `γ·tanh(CUR_IHTR)` on `mag_4_uc`.
    pub nonlinear: Vec<f64>,
}

/// Sidecar written next to a generated flight file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    pub flight_id: String,
    pub channel: String,
    pub beta_true: Vec<f64>,
    pub gamma_nt: f64,
    pub anomaly_nt: Vec<f64>,
}

impl TruthFile {
    pub fn from_flight(flight: &SynthFlight, gamma_nt: f64) -> Self {
        Self {
            flight_id: flight.frame.flight_id().to_string(),
            channel: "mag_4_uc".into(),
            beta_true: flight.beta_true.clone(),
            gamma_nt,
            anomaly_nt: flight.truth.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

fn times(cfg: &SynthConfig) -> Vec<f64> {
    (0..cfg.n_samples()).map(|i| i as f64 / cfg.fs).collect()
}

fn quantize(v: f64) -> f64 {
    (v / MAG_QUANTUM_NT).round() * MAG_QUANTUM_NT
}

pub fn gen_anomaly(cfg: &SynthConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut bumps: Vec<Bump> = cfg.anomaly.bumps.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, "anomaly"));
    let (wlo, whi) = cfg.anomaly.width_range_s;
    let (alo, ahi) = cfg.anomaly.amplitude_range_nt;
    for _ in 0..cfg.anomaly.random_bumps {
        let center_s = rng.gen_range(0.0..cfg.duration_s);
        let width_s = if whi > wlo { rng.gen_range(wlo..whi) } else { wlo };
        let mag = if ahi > alo { rng.gen_range(alo..ahi) } else { alo };
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        bumps.push(Bump { center_s, width_s, amplitude_nt: sign * mag });
    }
    Ok(times(cfg)
        .into_iter()
        .map(|t| {
            let v: f64 = bumps
                .iter()
                .map(|b| {
                    let u = (t - b.center_s) / b.width_s;
                    b.amplitude_nt * (-0.5 * u * u).exp()
                })
                .sum();
            quantize(v)
        })
        .collect())
}

fn sinusoids(terms: &[Sinusoid], rng: &mut ChaCha8Rng, t: &[f64]) -> Vec<f64> {
    let phases: Vec<f64> = terms.iter().map(|_| rng.gen_range(0.0..TAU)).collect();
    t.iter()
        .map(|&t| terms.iter().zip(&phases).map(|(s, p)| s.amplitude_rad * (TAU * s.freq_hz * t + p).sin()).sum())
        .collect()
}

/// Earth field in NED coordinates, nT.
fn earth_field(cfg: &SynthConfig) -> [f64; 3] {
    let (inc, dec) = (cfg.inclination_rad, cfg.declination_rad);
    let b = cfg.core_field_nt;
    [b * inc.cos() * dec.cos(), b * inc.cos() * dec.sin(), b * inc.sin()]
}

/// Rotates the NED field into the body frame for Z-Y-X (yaw, pitch, roll) angles.
fn to_body(b: [f64; 3], roll: f64, pitch: f64, yaw: f64) -> [f64; 3] {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    // Rows of R^T where R = Rz(yaw) Ry(pitch) Rx(roll) maps body to NED.
    let r = [
        [cy * cp, sy * cp, -sp],
        [cy * sp * sr - sy * cr, sy * sp * sr + cy * cr, cp * sr],
        [cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr],
    ];
    [0, 1, 2].map(|i| r[i][0] * b[0] + r[i][1] * b[1] + r[i][2] * b[2])
}

/// Heading per sample: constant along each leg, smoothstep turn at the start of each new leg.
fn headings(cfg: &SynthConfig) -> Vec<f64> {
    let h = &cfg.maneuvers.headings_rad;
    let n = cfg.n_samples();
    let leg = n.div_ceil(h.len());
    let turn = (cfg.maneuvers.turn_s * cfg.fs).round() as usize;
    (0..n)
        .map(|i| {
            let k = i / leg;
            let into = i - k * leg;
            if k == 0 || into >= turn {
                h[k]
            } else {
                let u = into as f64 / turn as f64;
                let w = u * u * (3.0 - 2.0 * u);
                h[k - 1] + w * (h[k] - h[k - 1])
            }
        })
        .collect()
}

pub fn gen_maneuvers(cfg: &SynthConfig) -> Result<Maneuvers> {
    cfg.validate()?;
    let t = times(cfg);
    let m = &cfg.maneuvers;
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, "maneuvers"));
    let roll = sinusoids(&m.roll, &mut rng, &t);
    let pitch = sinusoids(&m.pitch, &mut rng, &t);
    let yaw: Vec<f64> = sinusoids(&m.yaw, &mut rng, &t).into_iter().zip(headings(cfg)).map(|(y, h)| h + y).collect();
    let b = earth_field(cfg);
    let n = t.len();
    let (mut flux_x, mut flux_y, mut flux_z) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let [x, y, z] = to_body(b, roll[i], pitch[i], yaw[i]);
        flux_x.push(x);
        flux_y.push(y);
        flux_z.push(z);
    }
    Ok(Maneuvers { roll, pitch, yaw, flux_x, flux_y, flux_z })
}

/// Tolles-Lawson interference from vector-magnetometer components.
/// Derivatives of the direction cosines are central differences, one-sided at the ends.
fn interference(flux: &[[f64; 3]], fs: f64, beta: &[f64]) -> Vec<f64> {
    let n = flux.len();
    let total: Vec<f64> = flux.iter().map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt()).collect();
    let unit: Vec<[f64; 3]> = flux.iter().zip(&total).map(|(v, m)| v.map(|c| c / m)).collect();
    let rate = |i: usize, k: usize| -> f64 {
        if i == 0 {
            (unit[1][k] - unit[0][k]) * fs
        } else if i == n - 1 {
            (unit[n - 1][k] - unit[n - 2][k]) * fs
        } else {
            (unit[i + 1][k] - unit[i - 1][k]) * fs / 2.0
        }
    };
    (0..n)
        .map(|i| {
            let c = unit[i];
            let d = [rate(i, 0), rate(i, 1), rate(i, 2)];
            let perm = beta[0] * c[0] + beta[1] * c[1] + beta[2] * c[2];
            let mut quad = 0.0;
            for (k, (a, b)) in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)].into_iter().enumerate() {
                quad += beta[3 + k] * c[a] * c[b];
            }
            let mut eddy = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    eddy += beta[9 + 3 * a + b] * c[a] * d[b];
                }
            }
            perm + total[i] * (quad + eddy)
        })
        .collect()
}

/// Piecewise-constant levels with random switching, passed through a first-order lag.
fn switching(rng: &mut ChaCha8Rng, n: usize, fs: f64, range: (f64, f64), dwell_s: f64, tau_s: f64) -> Vec<f64> {
    let p_switch = 1.0 / (dwell_s * fs);
    let alpha = 1.0 - (-1.0 / (tau_s * fs)).exp();
    let mut level = rng.gen_range(range.0..range.1);
    let mut y = level;
    (0..n)
        .map(|_| {
            if rng.gen_bool(p_switch.min(1.0)) {
                level = rng.gen_range(range.0..range.1);
            }
            y += alpha * (level - y);
            y
        })
        .collect()
}

/// Per-magnetometer interference gains relative to the primary `mag_4_uc` coefficients.
fn channel_beta(beta: &[f64], channel: &str) -> Vec<f64> {
    beta.iter()
        .enumerate()
        .map(|(i, &b)| match channel {
            "mag_1_uc" => 0.02 * b,
            "mag_3_uc" => b * (1.0 + 0.3 * (i as f64).sin()),
            "mag_5_uc" => b * (0.6 + 0.2 * (i as f64).cos()),
            _ => b,
        })
        .collect()
}

fn channel_gamma(gamma: f64, channel: &str) -> f64 {
    match channel {
        "mag_1_uc" => 0.0,
        "mag_3_uc" => 0.5 * gamma,
        "mag_5_uc" => 1.5 * gamma,
        _ => gamma,
    }
}

pub fn gen_flight(cfg: &SynthConfig) -> Result<SynthFlight> {
    cfg.validate()?;
    let n = cfg.n_samples();
    let fs = cfg.fs;
    let t = times(cfg);
    let anomaly = gen_anomaly(cfg)?;
    let man = gen_maneuvers(cfg)?;
    let core = cfg.core_field_nt;
    let total: Vec<f64> = anomaly.iter().map(|a| core + a).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, "electrical"));
    let heater = switching(&mut rng, n, fs, (-3.0, 3.0), 6.0, 0.8);
    let ac = switching(&mut rng, n, fs, (2.0, 6.0), 15.0, 2.0);
    let flap = switching(&mut rng, n, fs, (0.0, 1.5), 25.0, 0.5);
    let tank = switching(&mut rng, n, fs, (0.5, 2.5), 40.0, 5.0);
    let bat1: Vec<f64> = switching(&mut rng, n, fs, (27.5, 28.5), 30.0, 10.0);
    let bat2: Vec<f64> = switching(&mut rng, n, fs, (27.0, 28.0), 30.0, 10.0);

    let u = cfg.flux_coupling_nt_per_a;
    let flux: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let s = total[i] / core;
            [man.flux_x[i] * s + u[0] * ac[i], man.flux_y[i] * s + u[1] * ac[i], man.flux_z[i] * s + u[2] * ac[i]]
        })
        .collect();

    let noise = Normal::new(0.0, cfg.noise_std_nt).expect("validated std");
    let mut mags: Vec<(String, Vec<f64>)> = Vec::new();
    let (mut primary_interf, mut primary_nonlin) = (Vec::new(), Vec::new());
    for name in ["mag_1_uc", "mag_3_uc", "mag_4_uc", "mag_5_uc"] {
        let beta = channel_beta(&cfg.tl_beta, name);
        let gamma = channel_gamma(cfg.gamma_nt, name);
        let interf = interference(&flux, fs, &beta);
        let nonlin: Vec<f64> = heater.iter().map(|&i| gamma * i.tanh()).collect();
        let mut nrng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, &format!("noise/{name}")));
        let data = (0..n)
            .map(|i| {
                let e = if cfg.noise_std_nt > 0.0 { noise.sample(&mut nrng) } else { 0.0 };
                total[i] + interf[i] + nonlin[i] + e
            })
            .collect();
        if name == "mag_4_uc" {
            primary_interf = interf;
            primary_nonlin = nonlin;
        }
        mags.push((name.to_string(), data));
    }

    let speed = 60.0;
    let heading = headings(cfg);
    let vn: Vec<f64> = heading.iter().map(|h| speed * h.cos()).collect();
    let ve: Vec<f64> = heading.iter().map(|h| speed * h.sin()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, "navigation"));
    let lat0 = rng.gen_range(40.0..50.0);
    let lon0 = rng.gen_range(-80.0..-70.0);
    let alt_phase = rng.gen_range(0.0..TAU);
    let integrate = |v: &[f64], start: f64, m_per_deg: f64| -> Vec<f64> {
        let mut pos = start;
        v.iter()
            .map(|v| {
                let here = pos;
                pos += v / fs / m_per_deg;
                here
            })
            .collect()
    };
    let lat = integrate(&vn, lat0, 111_320.0);
    let lon = integrate(&ve, lon0, 111_320.0 * f64::to_radians(lat0).cos());
    let baro: Vec<f64> = t.iter().map(|t| 400.0 + 5.0 * (TAU * 0.02 * t + alt_phase).sin()).collect();
    let vd: Vec<f64> = t.iter().map(|t| -5.0 * TAU * 0.02 * (TAU * 0.02 * t + alt_phase).cos()).collect();

    let per_line = n.div_ceil(cfg.lines);
    let line: Vec<LineId> = (0..n)
        .map(|i| LineId(((cfg.first_line + (i / per_line) as f64) * 100.0).round() / 100.0))
        .collect();

    let mut channels: Vec<(String, Vec<f64>)> = vec![("mag_1_c".into(), total.clone())];
    channels.extend(mags);
    for (k, name) in ["flux_b_x", "flux_b_y", "flux_b_z"].into_iter().enumerate() {
        channels.push((name.into(), flux.iter().map(|v| v[k]).collect()));
    }
    channels.push(("ins_roll".into(), man.roll.clone()));
    channels.push(("ins_pitch".into(), man.pitch.clone()));
    channels.push(("ins_yaw".into(), man.yaw.clone()));
    channels.push(("ins_vn".into(), vn));
    channels.push(("ins_ve".into(), ve));
    channels.push(("ins_vd".into(), vd));
    channels.push(("lat".into(), lat));
    channels.push(("lon".into(), lon));
    channels.push(("baro".into(), baro));
    channels.push(("igrf".into(), vec![core; n]));
    channels.push(("diurnal".into(), vec![0.0; n]));
    channels.push(("V_BAT1".into(), bat1));
    channels.push(("V_BAT2".into(), bat2));
    channels.push(("CUR_ACLo".into(), ac));
    channels.push(("CUR_FLAP".into(), flap));
    channels.push(("CUR_TANK".into(), tank));
    channels.push(("CUR_IHTR".into(), heater));

    let frame = FlightFrame::new(cfg.flight_id.clone(), fs, t, line, channels)?;
    Ok(SynthFlight {
        frame,
        truth: anomaly,
        beta_true: cfg.tl_beta.clone(),
        interference: primary_interf,
        nonlinear: primary_nonlin,
    })
}

/// Generates independent flights in parallel; output order follows `configs`.
pub fn gen_flights(configs: &[SynthConfig]) -> Result<Vec<SynthFlight>> {
    configs.par_iter().map(gen_flight).collect()
}

const _: () = assert!(TL_TERMS == 18);
