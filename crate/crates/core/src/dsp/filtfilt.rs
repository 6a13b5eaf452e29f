use super::butterworth::{BandpassSpec, Biquad};
use super::{DspError, Result};
use crate::Real;

/// Runs `x` through the cascade. `zi` scales the unit-step steady state of each
/// section, so a signal that starts at `zi` produces no start-up transient.
pub fn sosfilt<T: Real>(sections: &[Biquad<T>], x: &[T], zi: Option<T>) -> Vec<T> {
    let mut y = x.to_vec();
    let mut level = zi.unwrap_or_else(T::zero);
    for s in sections {
        let [b0, b1, b2] = s.b;
        let [a1, a2] = s.a;
        let g = s.dc_gain();
        let mut z2 = (b2 - a2 * g) * level;
        let mut z1 = (b1 + b2 - (a1 + a2) * g) * level;
        for v in y.iter_mut() {
            let input = *v;
            let out = b0 * input + z1;
            z1 = b1 * input - a1 * out + z2;
            z2 = b2 * input - a2 * out;
            *v = out;
        }
        level = level * g;
    }
    y
}

/// Zero-phase forward-backward filtering with even-reflection padding of
/// `3 * order` samples at each end.
pub fn filtfilt<T: Real>(x: &[T], spec: &BandpassSpec<T>) -> Result<Vec<T>> {
    let pad = spec.pad_len();
    let n = x.len();
    if n <= pad {
        return Err(DspError::SignalTooShort { len: n, min: pad });
    }
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|k| x[k]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|k| x[n - 1 - k]));

    let mut y = sosfilt(&spec.sections, &ext, Some(ext[0]));
    y.reverse();
    let first = y[0];
    let mut y = sosfilt(&spec.sections, &y, Some(first));
    y.reverse();
    Ok(y[pad..pad + n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::design_bandpass;
    use proptest::prelude::*;

    fn bp() -> BandpassSpec<f64> {
        design_bandpass(0.1, 0.9, 4, 10.0).unwrap()
    }

    #[test]
    fn constant_is_removed() {
        let y = filtfilt(&vec![42.0; 500], &bp()).unwrap();
        assert_eq!(y.len(), 500);
        assert!(y.iter().all(|v| v.abs() < 1e-6 * 42.0));
    }

    #[test]
    fn in_band_sine_has_zero_lag() {
        let x: Vec<f64> = (0..1000).map(|i| (std::f64::consts::TAU * 0.3 * i as f64 / 10.0).sin()).collect();
        let y = filtfilt(&x, &bp()).unwrap();
        let xcorr = |lag: i64| -> f64 {
            (0..1000i64)
                .filter_map(|i| {
                    let j = i + lag;
                    (0..1000).contains(&j).then(|| x[i as usize] * y[j as usize])
                })
                .sum()
        };
        let best = (-20..=20).max_by(|a, b| xcorr(*a).partial_cmp(&xcorr(*b)).unwrap()).unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn too_short() {
        assert_eq!(filtfilt(&[1.0; 12], &bp()), Err(DspError::SignalTooShort { len: 12, min: 12 }));
        assert!(filtfilt(&[1.0; 13], &bp()).is_ok());
    }

    #[test]
    fn steady_state_initial_conditions_match_long_run() {
        // A step held long enough reaches the same state the zi shortcut starts from.
        let sections = bp().sections;
        let warm = sosfilt(&sections, &vec![3.0; 20_000], None);
        let hot = sosfilt(&sections, &[3.0; 5], Some(3.0));
        assert!((warm[19_999] - hot[4]).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn linear(a in prop::collection::vec(-100.0f64..100.0, 200), b in prop::collection::vec(-100.0f64..100.0, 200)) {
            let spec = bp();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let fa = filtfilt(&a, &spec).unwrap();
            let fb = filtfilt(&b, &spec).unwrap();
            let fs = filtfilt(&sum, &spec).unwrap();
            let scale = fs.iter().chain(&fa).map(|v| v.abs()).fold(1.0, f64::max);
            for i in 0..200 {
                prop_assert!((fs[i] - fa[i] - fb[i]).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn time_reversal_symmetry(x in prop::collection::vec(-100.0f64..100.0, 3000)) {
            let spec = bp();
            let fwd = filtfilt(&x, &spec).unwrap();
            let rev_in: Vec<f64> = x.iter().rev().copied().collect();
            let mut rev = filtfilt(&rev_in, &spec).unwrap();
            rev.reverse();
            // interior only: the 0.1 Hz edge transient needs ~600 samples to decay below 1e-6
            let scale = fwd.iter().map(|v| v.abs()).fold(1e-9, f64::max);
            for i in 900..2100 {
                prop_assert!((fwd[i] - rev[i]).abs() <= 1e-6 * scale, "i = {}", i);
            }
        }
    }
}
