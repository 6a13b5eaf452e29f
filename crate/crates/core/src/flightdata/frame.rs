use std::collections::BTreeSet;
use std::fmt;

use super::{FlightDataError, Result};
use crate::Real;

/// Maximum allowed deviation of a time step from `1/fs`, in seconds.
pub const TIME_TOLERANCE_S: f64 = 1e-6;

/// Segment identifier. Survey lines are decimal labels such as `1002.02`, so the id
/// carries the exact decimal value read from disk and compares bitwise.
#[derive(Debug, Clone, Copy)]
pub struct LineId(pub f64);

impl PartialEq for LineId {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}
impl Eq for LineId {}
impl std::hash::Hash for LineId {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}
impl PartialOrd for LineId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for LineId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Channel<T> {
    name: String,
    data: Vec<T>,
}

/// Columnar flight record. Immutable once built; transformations return new frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightFrame<T> {
    flight_id: String,
    fs: f64,
    t: Vec<f64>,
    line: Vec<LineId>,
    channels: Vec<Channel<T>>,
}

impl<T: Real> FlightFrame<T> {
    /// Builds a frame and enforces every invariant: equal lengths, `N >= 2`,
    /// uniform time within each line, and finite samples.
    pub fn new(
        flight_id: impl Into<String>,
        fs: f64,
        t: Vec<f64>,
        line: Vec<LineId>,
        channels: Vec<(String, Vec<T>)>,
    ) -> Result<Self> {
        let frame = Self::from_parts_unchecked(flight_id, fs, t, line, channels)?;
        frame.check()?;
        Ok(frame)
    }

    /// Assembles a frame without checking lengths, time, or finiteness. Use
    /// [`validate_frame`] to inspect it. Duplicate channel names are still rejected.
    pub fn from_parts_unchecked(
        flight_id: impl Into<String>,
        fs: f64,
        t: Vec<f64>,
        line: Vec<LineId>,
        channels: Vec<(String, Vec<T>)>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (name, _) in &channels {
            if !seen.insert(name.as_str()) {
                return Err(FlightDataError::DuplicateChannel(name.clone()));
            }
        }
        Ok(Self {
            flight_id: flight_id.into(),
            fs,
            t,
            line,
            channels: channels.into_iter().map(|(name, data)| Channel { name, data }).collect(),
        })
    }

    fn check(&self) -> Result<()> {
        let n = self.t.len();
        if n < 2 {
            return Err(FlightDataError::TooFewSamples(n));
        }
        if self.line.len() != n {
            return Err(FlightDataError::LengthMismatch { channel: "line".into(), len: self.line.len(), expected: n });
        }
        for c in &self.channels {
            if c.data.len() != n {
                return Err(FlightDataError::LengthMismatch { channel: c.name.clone(), len: c.data.len(), expected: n });
            }
        }
        if let Some(&(index, dt)) = time_defects(&self.t, &self.line, self.fs).first() {
            return Err(FlightDataError::NonUniformTime { index, dt, expected: 1.0 / self.fs });
        }
        for c in &self.channels {
            if let Some(index) = c.data.iter().position(|v| !v.is_finite()) {
                return Err(FlightDataError::NonFiniteSample { channel: c.name.clone(), index });
            }
        }
        Ok(())
    }

    pub fn flight_id(&self) -> &str {
        &self.flight_id
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fs
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn time(&self) -> &[f64] {
        &self.t
    }

    pub fn lines(&self) -> &[LineId] {
        &self.line
    }

    /// Distinct line ids in ascending order.
    pub fn line_ids(&self) -> BTreeSet<LineId> {
        self.line.iter().copied().collect()
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    pub fn has_channel(&self, name: &str) -> bool {
        self.channels.iter().any(|c| c.name == name)
    }

    pub fn channel(&self, name: &str) -> Result<&[T]> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.data.as_slice())
            .ok_or_else(|| FlightDataError::MissingChannel(name.to_string()))
    }

    /// Returns a copy with `name` added, or replaced if it already exists.
    pub fn with_channel(&self, name: impl Into<String>, data: Vec<T>) -> Result<Self> {
        let name = name.into();
        if data.len() != self.len() {
            return Err(FlightDataError::LengthMismatch { channel: name, len: data.len(), expected: self.len() });
        }
        let mut out = self.clone();
        match out.channels.iter_mut().find(|c| c.name == name) {
            Some(c) => c.data = data,
            None => out.channels.push(Channel { name, data }),
        }
        Ok(out)
    }

    /// Returns a copy with a different flight id.
    pub fn with_flight_id(&self, flight_id: impl Into<String>) -> Self {
        let mut out = self.clone();
        out.flight_id = flight_id.into();
        out
    }

    /// Sub-frame holding exactly the samples whose line is in `lines`, in original order.
    pub fn slice_lines(&self, lines: &BTreeSet<LineId>) -> Result<Self> {
        if lines.is_empty() {
            return Err(FlightDataError::EmptySelection);
        }
        let present = self.line_ids();
        if let Some(missing) = lines.iter().find(|l| !present.contains(l)) {
            return Err(FlightDataError::UnknownLine(*missing));
        }
        let keep: Vec<usize> = (0..self.len()).filter(|&i| lines.contains(&self.line[i])).collect();
        Ok(Self {
            flight_id: self.flight_id.clone(),
            fs: self.fs,
            t: keep.iter().map(|&i| self.t[i]).collect(),
            line: keep.iter().map(|&i| self.line[i]).collect(),
            channels: self
                .channels
                .iter()
                .map(|c| Channel { name: c.name.clone(), data: keep.iter().map(|&i| c.data[i]).collect() })
                .collect(),
        })
    }

    /// Sub-frame of the contiguous sample range `range`.
    pub fn slice_range(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let out = Self {
            flight_id: self.flight_id.clone(),
            fs: self.fs,
            t: self.t[range.clone()].to_vec(),
            line: self.line[range.clone()].to_vec(),
            channels: self
                .channels
                .iter()
                .map(|c| Channel { name: c.name.clone(), data: c.data[range.clone()].to_vec() })
                .collect(),
        };
        out.check()?;
        Ok(out)
    }
}

/// Indices `i` (of the later sample) where the step from `i-1` breaks uniformity within a line.
fn time_defects(t: &[f64], line: &[LineId], fs: f64) -> Vec<(usize, f64)> {
    let expected = 1.0 / fs;
    (1..t.len().min(line.len()))
        .filter(|&i| line[i] == line[i - 1])
        .filter_map(|i| {
            let dt = t[i] - t[i - 1];
            (!((dt - expected).abs() <= TIME_TOLERANCE_S)).then_some((i, dt))
        })
        .collect()
}

/// Defect listing produced by [`validate_frame`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// `(channel, indices of non-finite samples)` for every channel with at least one.
    pub non_finite: Vec<(String, Vec<usize>)>,
    /// `(index, dt)` for each within-line step that is not `1/fs`.
    pub time_defects: Vec<(usize, f64)>,
    /// `(channel, length)` for channels whose length differs from the time axis.
    pub length_mismatches: Vec<(String, usize)>,
}

impl ValidationReport {
    pub fn time_uniform(&self) -> bool {
        self.time_defects.is_empty()
    }

    pub fn defect_count(&self) -> usize {
        self.non_finite.iter().map(|(_, ix)| ix.len()).sum::<usize>()
            + self.time_defects.len()
            + self.length_mismatches.len()
    }

    pub fn is_clean(&self) -> bool {
        self.defect_count() == 0
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_clean() {
            return writeln!(f, "no defects");
        }
        for (name, ix) in &self.non_finite {
            writeln!(f, "non-finite: {name}: {} sample(s), first at {}", ix.len(), ix[0])?;
        }
        for (i, dt) in &self.time_defects {
            writeln!(f, "time: step into sample {i} is {dt} s")?;
        }
        for (name, len) in &self.length_mismatches {
            writeln!(f, "length: {name} has {len} samples")?;
        }
        Ok(())
    }
}

/// Lists every defect in `frame` without modifying it.
pub fn validate_frame<T: Real>(frame: &FlightFrame<T>) -> ValidationReport {
    let n = frame.t.len();
    let mut report = ValidationReport::default();
    if frame.line.len() != n {
        report.length_mismatches.push(("line".into(), frame.line.len()));
    }
    for c in &frame.channels {
        if c.data.len() != n {
            report.length_mismatches.push((c.name.clone(), c.data.len()));
        }
        let bad: Vec<usize> = c.data.iter().enumerate().filter(|(_, v)| !v.is_finite()).map(|(i, _)| i).collect();
        if !bad.is_empty() {
            report.non_finite.push((c.name.clone(), bad));
        }
    }
    report.time_defects = time_defects(&frame.t, &frame.line, frame.fs);
    report
}

/// Linearly interpolates runs of at most `max_run` consecutive non-finite samples in
/// every channel. Runs touching either end are filled with the nearest finite value.
/// Longer runs are rejected with the index of their first sample.
pub fn repair_gaps<T: Real>(frame: &FlightFrame<T>, max_run: usize) -> Result<FlightFrame<T>> {
    let mut out = frame.clone();
    for c in &mut out.channels {
        repair_channel(&c.name, &mut c.data, max_run)?;
    }
    out.check()?;
    Ok(out)
}

fn repair_channel<T: Real>(name: &str, data: &mut [T], max_run: usize) -> Result<()> {
    let n = data.len();
    let mut i = 0;
    while i < n {
        if data[i].is_finite() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && !data[i].is_finite() {
            i += 1;
        }
        let end = i;
        if end - start > max_run || (start == 0 && end == n) {
            return Err(FlightDataError::NonFiniteSample { channel: name.to_string(), index: start });
        }
        let fill_left = start.checked_sub(1).map(|a| data[a]);
        let fill_right = (end < n).then(|| data[end]);
        match (fill_left, fill_right) {
            (Some(ya), Some(yb)) => {
                let span = T::from_usize_lossy(end - start + 1);
                for k in start..end {
                    let w = T::from_usize_lossy(k + 1 - start) / span;
                    data[k] = ya + (yb - ya) * w;
                }
            }
            (Some(y), None) | (None, Some(y)) => data[start..end].iter_mut().for_each(|v| *v = y),
            (None, None) => unreachable!("all-non-finite channel rejected above"),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean(n: usize) -> FlightFrame<f64> {
        let t = (0..n).map(|i| i as f64 / 10.0).collect();
        let line = (0..n).map(|i| LineId(if i < n / 2 { 1002.01 } else { 1002.02 })).collect();
        let chans = vec![
            ("mag_1_c".to_string(), (0..n).map(|i| 50_000.0 + i as f64).collect()),
            ("mag_4_uc".to_string(), (0..n).map(|i| 50_100.0 - i as f64).collect()),
        ];
        FlightFrame::new("1002", 10.0, t, line, chans).unwrap()
    }

    #[test]
    fn clean_frame_has_no_defects() {
        assert!(validate_frame(&clean(20)).is_clean());
    }

    #[test]
    fn injected_nan_is_reported_by_channel_and_index() {
        let f = clean(20);
        let mut data = f.channel("mag_4_uc").unwrap().to_vec();
        data[5] = f64::NAN;
        let chans = vec![("mag_1_c".into(), f.channel("mag_1_c").unwrap().to_vec()), ("mag_4_uc".into(), data)];
        let raw = FlightFrame::from_parts_unchecked("x", 10.0, f.time().to_vec(), f.lines().to_vec(), chans).unwrap();
        let report = validate_frame(&raw);
        assert_eq!(report.non_finite, vec![("mag_4_uc".to_string(), vec![5])]);
        assert_eq!(report.defect_count(), 1);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let chans = vec![("a".to_string(), vec![1.0, 2.0, 3.0]), ("b".to_string(), vec![1.0, 2.0])];
        let raw = FlightFrame::<f64>::from_parts_unchecked("x", 10.0, vec![0.0, 0.1, 0.2], vec![LineId(1.0); 3], chans)
            .unwrap();
        assert_eq!(validate_frame(&raw).length_mismatches, vec![("b".to_string(), 2)]);
        assert!(matches!(
            FlightFrame::new("x", 10.0, vec![0.0, 0.1], vec![LineId(1.0); 2], vec![("a".to_string(), vec![1.0])]),
            Err(FlightDataError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn slice_single_line() {
        let f = clean(20);
        let sel: BTreeSet<_> = [LineId(1002.01)].into();
        let s = f.slice_lines(&sel).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.lines().iter().all(|l| *l == LineId(1002.01)));
        assert_eq!(s.channel("mag_1_c").unwrap(), &f.channel("mag_1_c").unwrap()[..10]);
    }

    #[test]
    fn slice_all_lines_is_identity() {
        let f = clean(20);
        assert_eq!(f.slice_lines(&f.line_ids()).unwrap(), f);
    }

    #[test]
    fn slice_unknown_line() {
        let sel: BTreeSet<_> = [LineId(9999.0)].into();
        assert!(matches!(clean(10).slice_lines(&sel), Err(FlightDataError::UnknownLine(LineId(v))) if v == 9999.0));
        assert!(matches!(clean(10).slice_lines(&BTreeSet::new()), Err(FlightDataError::EmptySelection)));
    }

    #[test]
    fn repair_interpolates_short_runs_and_rejects_long_ones() {
        let f = clean(20);
        let base = f.channel("mag_1_c").unwrap().to_vec();
        let with_gap = |lo: usize, hi: usize| {
            let mut d = base.clone();
            d[lo..hi].iter_mut().for_each(|v| *v = f64::NAN);
            FlightFrame::from_parts_unchecked(
                "x",
                10.0,
                f.time().to_vec(),
                f.lines().to_vec(),
                vec![("mag_1_c".to_string(), d)],
            )
            .unwrap()
        };
        let fixed = repair_gaps(&with_gap(3, 8), 5).unwrap();
        for (a, b) in fixed.channel("mag_1_c").unwrap().iter().zip(&base) {
            assert!((a - b).abs() < 1e-9);
        }
        let err = repair_gaps(&with_gap(3, 9), 5).unwrap_err();
        assert!(matches!(err, FlightDataError::NonFiniteSample { index: 3, .. }));
        let edge = repair_gaps(&with_gap(0, 2), 5).unwrap();
        assert_eq!(edge.channel("mag_1_c").unwrap()[0], base[2]);
    }
}
