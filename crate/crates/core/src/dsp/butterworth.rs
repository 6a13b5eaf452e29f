use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{DspError, Result};
use crate::Real;

/// One second-order section in transposed direct form II, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad<T> {
    pub b: [T; 3],
    pub a: [T; 2],
}

impl<T: Real> Biquad<T> {
    /// Complex response at normalized angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: T) -> Complex<T> {
        let zinv = Complex::from_polar(T::one(), -omega);
        let zinv2 = zinv * zinv;
        let num = zinv2 * self.b[2] + zinv * self.b[1] + self.b[0];
        let den = zinv2 * self.a[1] + zinv * self.a[0] + T::one();
        num / den
    }

    pub fn dc_gain(&self) -> T {
        (self.b[0] + self.b[1] + self.b[2]) / (T::one() + self.a[0] + self.a[1])
    }

    /// Roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex<T>; 2] {
        let (a1, a2) = (Complex::from(self.a[0]), Complex::from(self.a[1]));
        let four = T::lit(4.0);
        let two = T::lit(2.0);
        let disc = (a1 * a1 - a2 * four).sqrt();
        [(-a1 + disc) / two, (-a1 - disc) / two]
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < T::one())
    }
}

/// Butterworth bandpass realized as a cascade of second-order sections.
///
/// `order` counts poles of the bandpass, so `order / 2` sections are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandpassSpec<T> {
    pub low_hz: T,
    pub high_hz: T,
    pub order: usize,
    pub fs: T,
    pub sections: Vec<Biquad<T>>,
}

impl<T: Real> BandpassSpec<T> {
    /// Magnitude of the single-pass transfer function at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: T) -> T {
        let omega = T::TAU() * freq_hz / self.fs;
        self.sections.iter().map(|s| s.response(omega)).fold(Complex::from(T::one()), |acc, h| acc * h).norm()
    }

    /// Edge padding used by [`super::filtfilt`].
    pub fn pad_len(&self) -> usize {
        3 * self.order
    }

    /// Coefficients as pretty-printed JSON, for debugging.
    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        serde_json::to_string_pretty(self).expect("coefficients serialize")
    }
}

/// Designs a digital Butterworth bandpass via analog prototype, lowpass-to-bandpass
/// transform, and the bilinear transform with prewarped band edges.
pub fn design_bandpass<T: Real>(low_hz: T, high_hz: T, order: usize, fs: T) -> Result<BandpassSpec<T>> {
    let two = T::lit(2.0);
    if !(fs > T::zero() && fs.is_finite()) {
        return Err(DspError::InvalidBand(format!("sample rate {fs} must be positive")));
    }
    if !(low_hz > T::zero() && low_hz < high_hz && high_hz < fs / two) {
        return Err(DspError::InvalidBand(format!("need 0 < {low_hz} < {high_hz} < {}", fs / two)));
    }
    if !matches!(order, 2 | 4 | 6 | 8) {
        return Err(DspError::InvalidBand(format!("order {order} not in {{2, 4, 6, 8}}")));
    }
    let n_proto = order / 2;
    let k = two * fs;
    let w1 = k * (T::PI() * low_hz / fs).tan();
    let w2 = k * (T::PI() * high_hz / fs).tan();
    let bw = w2 - w1;
    let w0_sq = w1 * w2;

    let mut poles = Vec::with_capacity(order);
    for i in 0..n_proto {
        let angle = T::PI() * T::from_usize_lossy(2 * i + n_proto + 1) / T::from_usize_lossy(2 * n_proto);
        let p = Complex::from_polar(T::one(), angle);
        let half = p * (bw / two);
        let root = (half * half - Complex::from(w0_sq)).sqrt();
        for s in [half + root, half - root] {
            poles.push((Complex::from(k) + s) / (Complex::from(k) - s));
        }
    }

    // Pair each pole with its conjugate; real poles pair with each other.
    let tol = T::lit(1e-9);
    let mut sections = Vec::with_capacity(n_proto);
    let mut reals: Vec<T> = Vec::new();
    for z in &poles {
        if z.im > tol {
            sections.push(Biquad { b: [T::one(), T::zero(), -T::one()], a: [-two * z.re, z.norm_sqr()] });
        } else if z.im.abs() <= tol {
            reals.push(z.re);
        }
    }
    reals.sort_by(|a, b| a.partial_cmp(b).expect("finite poles"));
    for pair in reals.chunks(2) {
        let (r1, r2) = (pair[0], pair[1]);
        sections.push(Biquad { b: [T::one(), T::zero(), -T::one()], a: [-(r1 + r2), r1 * r2] });
    }
    if sections.len() != n_proto {
        return Err(DspError::InvalidBand("pole pairing failed".into()));
    }

    // Unit gain at the digital center frequency, spread evenly over the sections.
    let center = two * (w0_sq.sqrt() / k).atan();
    for s in &mut sections {
        let g = s.response(center).norm();
        for b in &mut s.b {
            *b = *b / g;
        }
    }
    if let Some(bad) = sections.iter().position(|s| !s.is_stable()) {
        return Err(DspError::InvalidBand(format!("section {bad} is unstable")));
    }
    Ok(BandpassSpec { low_hz, high_hz, order, fs, sections })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Squared magnitude of the analog Butterworth bandpass at the prewarped frequency,
    /// which the bilinear design reproduces exactly.
    fn analog_oracle(f: f64, lo: f64, hi: f64, order: usize, fs: f64) -> f64 {
        let warp = |x: f64| 2.0 * fs * (std::f64::consts::PI * x / fs).tan();
        let (w, w1, w2) = (warp(f), warp(lo), warp(hi));
        let x = (w * w - w1 * w2) / (w * (w2 - w1));
        (1.0 / (1.0 + x.powi(order as i32))).sqrt()
    }

    #[test]
    fn default_band_gains() {
        let bp = design_bandpass(0.1f64, 0.9, 4, 10.0).unwrap();
        assert_eq!(bp.sections.len(), 2);
        assert!(bp.magnitude_at(0.0) < 1e-6);
        assert!(bp.magnitude_at(5.0) < 1e-3);
        assert!((bp.magnitude_at(0.3) - 1.0).abs() < 0.05);
    }

    #[test]
    fn matches_analog_prototype_across_orders() {
        for order in [2, 4, 6, 8] {
            let bp = design_bandpass(0.1, 0.9, order, 10.0).unwrap();
            for &f in &[0.02, 0.1, 0.2, 0.3, 0.5, 0.9, 1.5, 3.0, 4.5] {
                let expect = analog_oracle(f, 0.1, 0.9, order, 10.0);
                assert!((bp.magnitude_at(f) - expect).abs() < 1e-9, "order {order} f {f}");
            }
        }
    }

    #[test]
    fn edges_are_half_power() {
        let bp = design_bandpass(0.2, 1.2, 6, 10.0).unwrap();
        for f in [0.2, 1.2] {
            assert!((bp.magnitude_at(f) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        }
    }

    #[test]
    fn sections_are_stable() {
        for order in [2, 4, 6, 8] {
            for (lo, hi) in [(0.1, 0.9), (0.01, 4.0), (2.0, 2.5)] {
                let bp = design_bandpass(lo, hi, order, 10.0).unwrap();
                assert!(bp.sections.iter().all(Biquad::is_stable));
            }
        }
    }

    #[test]
    fn invalid_bands() {
        assert!(design_bandpass(0.0, 0.9, 4, 10.0).is_err());
        assert!(design_bandpass(0.9, 0.1, 4, 10.0).is_err());
        assert!(design_bandpass(0.1, 5.0, 4, 10.0).is_err());
        assert!(design_bandpass(0.1, 0.9, 3, 10.0).is_err());
        assert!(design_bandpass(0.1, 0.9, 10, 10.0).is_err());
    }

    #[test]
    fn single_precision_design() {
        let bp = design_bandpass(0.1f32, 0.9, 4, 10.0).unwrap();
        let gain: f32 = bp.magnitude_at(0.3);
        assert!((gain - 1.0).abs() < 0.05);
    }
}
