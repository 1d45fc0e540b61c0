//! Preictal/interictal labeling, window extraction and leave-one-seizure-out
//! partitioning.
//!
//! Timeline states, from strongest to weakest claim on an instant: gap (no
//! recording), ictal, postictal, preictal, intervention (between the preictal
//! span and onset), d-buffer, interictal.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::recording::{validate_annotations, PatientTimeline, SeizureAnnotation};
use crate::rng::{rng_for, shuffle};

/// Minimum number of lead seizures for a LOSO test split.
pub const MIN_LEAD_SEIZURES: usize = 3;

/// Labeling parameters. Times are in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelParams {
    pub window_size_s: f64,
    /// Preictal period length.
    pub ppl_s: f64,
    /// Intervention time between the preictal span and onset.
    pub it_s: f64,
    /// Exclusion buffer around each preictal span.
    pub d_s: f64,
    pub postictal_s: f64,
    pub interictal_downsample: usize,
    pub min_lead_gap_s: f64,
}

impl Default for LabelParams {
    fn default() -> Self {
        Self {
            window_size_s: 30.0,
            ppl_s: 3600.0,
            it_s: 0.0,
            d_s: 0.0,
            postictal_s: 1800.0,
            interictal_downsample: 1,
            min_lead_gap_s: 1800.0,
        }
    }
}

impl LabelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_size_s > 0.0) {
            return Err(invalid!("window size must be positive"));
        }
        if !(self.ppl_s >= self.window_size_s) {
            return Err(invalid!("PPL {} s is shorter than the window {} s", self.ppl_s, self.window_size_s));
        }
        if !(self.it_s >= 0.0) || !(self.d_s >= 0.0) || !(self.postictal_s >= 0.0) || !(self.min_lead_gap_s >= 0.0) {
            return Err(invalid!("IT, d, postictal length and lead gap must be non-negative"));
        }
        if self.interictal_downsample == 0 {
            return Err(invalid!("interictal down-sampling factor must be >= 1"));
        }
        Ok(())
    }
}

/// Indices of lead seizures: the first seizure, and every seizure starting at
/// least `min_gap_s` after the previous one ended.
pub fn find_lead_seizures(annotations: &[SeizureAnnotation], min_gap_s: f64) -> Result<Vec<usize>> {
    validate_annotations(annotations, None)?;
    Ok((0..annotations.len())
        .filter(|&i| i == 0 || annotations[i].onset_s - annotations[i - 1].offset_s >= min_gap_s)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum State {
    /// Usable interictal data, associated with the next lead seizure
    /// (ordinal among lead seizures).
    Interictal { seizure: usize },
    Preictal { seizure: usize },
    Intervention,
    Buffer,
    Ictal,
    Postictal,
    Gap,
}

impl State {
    fn rank(self) -> u8 {
        match self {
            State::Gap => 6,
            State::Ictal => 5,
            State::Postictal => 4,
            State::Preictal { .. } => 3,
            State::Intervention => 2,
            State::Buffer => 1,
            State::Interictal { .. } => 0,
        }
    }
}

/// Half-open labeled interval `[start_s, end_s)` within recording `piece`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub start_s: f64,
    pub end_s: f64,
    pub state: State,
    /// Recording index on the timeline; `usize::MAX` for gaps.
    pub piece: usize,
}

impl Span {
    pub fn len_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Result of labeling: spans covering `[0, duration)` plus the annotation
/// index of each lead seizure (position = lead ordinal).
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub spans: Vec<Span>,
    pub leads: Vec<usize>,
}

impl Labeling {
    pub fn preictal_spans(&self, seizure: usize) -> impl Iterator<Item = &Span> {
        self.spans.iter().filter(move |s| s.state == State::Preictal { seizure })
    }
}

/// Labels the whole timeline.
///
/// Preictal span of lead seizure `k`: `[onset − IT − PPL, onset − IT)`,
/// truncated at the timeline start, at recording gaps, and at the end of the
/// previous seizure's postictal period.
pub fn label_timeline(timeline: &PatientTimeline, params: &LabelParams) -> Result<Labeling> {
    params.validate()?;
    let ann = timeline.annotations();
    let leads = find_lead_seizures(ann, params.min_lead_gap_s)?;
    let duration = timeline.duration_s();

    let mut claims: Vec<(f64, f64, State)> = Vec::new();
    let segments = timeline.segments();
    let mut cursor = 0.0;
    for &(s, e) in &segments {
        if s > cursor {
            claims.push((cursor, s, State::Gap));
        }
        cursor = e;
    }
    for a in ann {
        claims.push((a.onset_s, a.offset_s, State::Ictal));
        claims.push((a.offset_s, a.offset_s + params.postictal_s, State::Postictal));
    }
    for (ordinal, &idx) in leads.iter().enumerate() {
        let onset = ann[idx].onset_s;
        let floor = if idx == 0 { 0.0 } else { ann[idx - 1].offset_s + params.postictal_s };
        let end = onset - params.it_s;
        let start = (end - params.ppl_s).max(floor).max(0.0);
        if end > start {
            claims.push((start, end, State::Preictal { seizure: ordinal }));
            claims.push((start - params.d_s, start, State::Buffer));
            claims.push((end, end + params.d_s, State::Buffer));
        }
        if params.it_s > 0.0 {
            claims.push((end.max(0.0), onset, State::Intervention));
        }
    }

    let mut cuts: Vec<f64> = vec![0.0, duration];
    for &(s, e, _) in &claims {
        cuts.push(s.clamp(0.0, duration));
        cuts.push(e.clamp(0.0, duration));
    }
    for &(s, e) in &segments {
        cuts.push(s);
        cuts.push(e);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite boundaries"));
    cuts.dedup();

    let piece_of = |t: f64| segments.iter().position(|&(s, e)| t >= s && t < e);
    let mut spans: Vec<Span> = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        let mut state = State::Interictal { seizure: 0 };
        for &(s, e, st) in &claims {
            if mid >= s && mid < e && st.rank() > state.rank() {
                state = st;
            }
        }
        let piece = match piece_of(mid) {
            Some(p) => p,
            None => {
                state = State::Gap;
                usize::MAX
            }
        };
        if let State::Interictal { .. } = state {
            let next = leads.iter().position(|&i| ann[i].onset_s >= b);
            state = State::Interictal { seizure: next.unwrap_or(leads.len().saturating_sub(1)) };
        }
        match spans.last_mut() {
            Some(last) if last.state == state && last.piece == piece && last.end_s == a => last.end_s = b,
            _ => spans.push(Span { start_s: a, end_s: b, state, piece }),
        }
    }
    if !leads.is_empty() && !spans.iter().any(|s| matches!(s.state, State::Preictal { .. })) {
        return Err(Error::EmptyPreictal);
    }
    Ok(Labeling { spans, leads })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Interictal = 0,
    Preictal = 1,
}

impl Label {
    pub fn class(self) -> usize {
        self as usize
    }
}

/// Fixed-length multichannel window, channel-major `C × samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub data: Vec<f32>,
    pub channels: usize,
    pub label: Label,
    /// Lead-seizure ordinal this window belongs to.
    pub seizure_index: usize,
    pub start_s: f64,
    pub end_s: f64,
}

impl LabeledWindow {
    pub fn samples(&self) -> usize {
        self.data.len() / self.channels.max(1)
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.samples();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn overlaps(&self, other: &LabeledWindow) -> bool {
        self.start_s < other.end_s && other.start_s < self.end_s
    }
}

/// Number of windows of `win` samples at `stride` fitting in `len` samples.
pub fn window_count(len: usize, win: usize, stride: usize) -> usize {
    if len < win || stride == 0 {
        0
    } else {
        (len - win) / stride + 1
    }
}

/// Cuts labeled windows out of the timeline.
///
/// Preictal spans are tiled with 50% overlap, interictal spans without
/// overlap; interictal windows of each seizure association are then
/// subsampled to `ceil(n / interictal_downsample)` using `seed`.
pub fn extract_windows(
    timeline: &PatientTimeline,
    labeling: &Labeling,
    params: &LabelParams,
    seed: u64,
) -> Result<Vec<LabeledWindow>> {
    params.validate()?;
    let f = timeline.sampling_rate();
    let win = Float::round(params.window_size_s * f) as usize;
    if win == 0 {
        return Err(invalid!("window of {} s is empty at {} Hz", params.window_size_s, f));
    }
    let channels = timeline.channels();
    let pieces = timeline.pieces();

    let mut preictal = Vec::new();
    let mut interictal: Vec<Vec<LabeledWindow>> = vec![Vec::new(); labeling.leads.len().max(1)];
    for span in &labeling.spans {
        let (label, seizure, stride) = match span.state {
            State::Preictal { seizure } => (Label::Preictal, seizure, (win / 2).max(1)),
            State::Interictal { seizure } => (Label::Interictal, seizure, win),
            _ => continue,
        };
        let piece = &pieces[span.piece];
        let rel_start = (span.start_s - piece.start_s) * f;
        let rel_end = (span.end_s - piece.start_s) * f;
        let first = Float::ceil(rel_start - 1e-6).max(0.0) as usize;
        let last = (Float::floor(rel_end + 1e-6) as usize).min(piece.recording.samples_per_channel());
        if last <= first {
            continue;
        }
        for k in 0..window_count(last - first, win, stride) {
            let at = first + k * stride;
            let w = LabeledWindow {
                data: piece.recording.slice(at, win),
                channels,
                label,
                seizure_index: seizure,
                start_s: piece.start_s + at as f64 / f,
                end_s: piece.start_s + (at + win) as f64 / f,
            };
            match label {
                Label::Preictal => preictal.push(w),
                Label::Interictal => interictal[seizure].push(w),
            }
        }
    }

    let factor = params.interictal_downsample;
    let mut out = preictal;
    for (group, mut windows) in interictal.into_iter().enumerate() {
        if factor > 1 && !windows.is_empty() {
            let keep = windows.len().div_ceil(factor);
            let mut order: Vec<usize> = (0..windows.len()).collect();
            shuffle(&mut order, &mut rng_for(seed, &[group as u64]));
            let mut chosen: Vec<usize> = order[..keep].to_vec();
            chosen.sort_unstable();
            let mut kept = Vec::with_capacity(keep);
            let mut it = chosen.into_iter().peekable();
            for (i, w) in windows.drain(..).enumerate() {
                if it.peek() == Some(&i) {
                    it.next();
                    kept.push(w);
                }
            }
            windows = kept;
        }
        out.extend(windows);
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    out.sort_by(|a, b| a.start_s.partial_cmp(&b.start_s).expect("finite").then(a.label.cmp(&b.label)));
    Ok(out)
}

/// Training side of a partition. Windows of the held-out seizure are not
/// reachable from here; [`TrainingSet::check_sealed`] re-verifies it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    windows: Vec<LabeledWindow>,
    held_out_seizure: usize,
}

impl TrainingSet {
    /// Wraps an arbitrary window list; callers that build this by hand are
    /// still subject to [`TrainingSet::check_sealed`].
    pub fn from_windows(windows: Vec<LabeledWindow>, held_out_seizure: usize) -> Self {
        Self { windows, held_out_seizure }
    }

    pub fn windows(&self) -> &[LabeledWindow] {
        &self.windows
    }

    pub fn held_out_seizure(&self) -> usize {
        self.held_out_seizure
    }

    /// Fails if any window belongs to the held-out seizure.
    pub fn check_sealed(&self) -> Result<()> {
        match self.windows.iter().find(|w| w.seizure_index == self.held_out_seizure) {
            Some(w) => Err(Error::Leakage(alloc::format!(
                "window at {} s of held-out seizure {} reached a training path",
                w.start_s,
                self.held_out_seizure
            ))),
            None => Ok(()),
        }
    }
}

/// LOSO split: the last lead seizure (its preictal windows and associated
/// interictal windows) forms the test set.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub train: TrainingSet,
    pub test: Vec<LabeledWindow>,
    pub held_out_seizure: usize,
}

pub fn loso_partition(windows: Vec<LabeledWindow>, lead_count: usize) -> Result<Partition> {
    if lead_count < MIN_LEAD_SEIZURES {
        return Err(Error::InsufficientSeizures { found: lead_count, required: MIN_LEAD_SEIZURES });
    }
    let held_out = lead_count - 1;
    let (test, train): (Vec<_>, Vec<_>) = windows.into_iter().partition(|w| w.seizure_index == held_out);
    Ok(Partition { train: TrainingSet::from_windows(train, held_out), test, held_out_seizure: held_out })
}

/// One internal cross-validation fold, as indices into the training set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvFold {
    pub fold_seizure: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// One fold per lead seizure present in the training set.
pub fn cv_folds(train: &TrainingSet) -> Result<Vec<CvFold>> {
    train.check_sealed()?;
    let mut seizures: Vec<usize> = train.windows.iter().map(|w| w.seizure_index).collect();
    seizures.sort_unstable();
    seizures.dedup();
    if seizures.len() < 2 {
        return Err(Error::InsufficientFolds { found: seizures.len() });
    }
    Ok(seizures
        .into_iter()
        .map(|s| {
            let (validation, train): (Vec<usize>, Vec<usize>) =
                (0..train.windows.len()).partition(|&i| train.windows[i].seizure_index == s);
            CvFold { fold_seizure: s, train, validation }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::{PlacedRecording, Recording};
    use alloc::string::ToString;

    fn ann(pairs: &[(f64, f64)]) -> Vec<SeizureAnnotation> {
        pairs.iter().map(|&(a, b)| SeizureAnnotation::new(a, b).unwrap()).collect()
    }

    fn flat_timeline(duration_s: f64, rate: f64, seizures: &[(f64, f64)]) -> PatientTimeline {
        let n = (duration_s * rate) as usize;
        let data: Vec<f32> = (0..n).map(|i| i as f32).collect();
        let rec = Recording::new(rate, vec!["c".to_string()], data).unwrap();
        PatientTimeline::single(rec, ann(seizures)).unwrap()
    }

    fn params(ppl: f64, it: f64) -> LabelParams {
        LabelParams { ppl_s: ppl, it_s: it, ..LabelParams::default() }
    }

    #[test]
    fn lead_rule_examples() {
        let a = ann(&[(0.0, 60.0), (1500.0, 1560.0), (5000.0, 5060.0)]);
        assert_eq!(find_lead_seizures(&a, 1800.0).unwrap(), vec![0, 2]);
        assert_eq!(find_lead_seizures(&a[..1], 1800.0).unwrap(), vec![0]);
        assert_eq!(find_lead_seizures(&[], 1800.0).unwrap(), Vec::<usize>::new());
        let unsorted = [a[2], a[0]];
        assert!(find_lead_seizures(&unsorted, 1800.0).is_err());
    }

    #[test]
    fn preictal_span_examples() {
        let t = flat_timeline(10_000.0, 1.0, &[(7200.0, 7260.0)]);
        let l = label_timeline(&t, &params(3600.0, 0.0)).unwrap();
        let p: Vec<(f64, f64)> = l.preictal_spans(0).map(|s| (s.start_s, s.end_s)).collect();
        assert_eq!(p, vec![(3600.0, 7200.0)]);

        let l = label_timeline(&t, &params(3600.0, 600.0)).unwrap();
        let p: Vec<(f64, f64)> = l.preictal_spans(0).map(|s| (s.start_s, s.end_s)).collect();
        assert_eq!(p, vec![(3000.0, 6600.0)]);
        assert!(l.spans.iter().any(|s| s.state == State::Intervention && s.start_s == 6600.0 && s.end_s == 7200.0));

        let t = flat_timeline(5000.0, 1.0, &[(1000.0, 1060.0)]);
        let l = label_timeline(&t, &params(3600.0, 0.0)).unwrap();
        let p: Vec<(f64, f64)> = l.preictal_spans(0).map(|s| (s.start_s, s.end_s)).collect();
        assert_eq!(p, vec![(0.0, 1000.0)]);
    }

    #[test]
    fn spans_cover_timeline_and_states_are_ordered() {
        let t = flat_timeline(20_000.0, 1.0, &[(5000.0, 5100.0), (6000.0, 6050.0), (12_000.0, 12_100.0)]);
        let l = label_timeline(&t, &LabelParams { d_s: 300.0, ..params(3600.0, 0.0) }).unwrap();
        assert_eq!(l.leads, vec![0, 2]);
        assert_eq!(l.spans.first().unwrap().start_s, 0.0);
        assert_eq!(l.spans.last().unwrap().end_s, 20_000.0);
        for w in l.spans.windows(2) {
            assert_eq!(w[0].end_s, w[1].start_s);
        }
        // lead 1 preictal starts after seizure 1's postictal period ends
        let p: Vec<(f64, f64)> = l.preictal_spans(1).map(|s| (s.start_s, s.end_s)).collect();
        assert_eq!(p, vec![(8400.0, 12_000.0)]);
        // the d-buffer precedes it
        assert!(l.spans.iter().any(|s| s.state == State::Buffer && s.start_s == 8100.0 && s.end_s == 8400.0));
        // interictal after the last lead seizure associates with it
        assert_eq!(l.spans.last().unwrap().state, State::Interictal { seizure: 1 });
    }

    #[test]
    fn preictal_entirely_off_timeline_is_error() {
        let t = flat_timeline(100.0, 1.0, &[(0.0, 10.0)]);
        assert_eq!(label_timeline(&t, &params(60.0, 0.0)).unwrap_err(), Error::EmptyPreictal);
    }

    #[test]
    fn gaps_split_spans_and_windows_never_straddle() {
        let rec = |secs: usize| Recording::new(1.0, vec!["c".to_string()], vec![0.0; secs]).unwrap();
        let t = PatientTimeline::new(
            vec![
                PlacedRecording { start_s: 0.0, recording: rec(4000) },
                PlacedRecording { start_s: 4100.0, recording: rec(4000) },
            ],
            ann(&[(5000.0, 5060.0)]),
        )
        .unwrap();
        let p = LabelParams { window_size_s: 60.0, ..params(3600.0, 0.0) };
        let l = label_timeline(&t, &p).unwrap();
        assert!(l.spans.iter().any(|s| s.state == State::Gap && s.start_s == 4000.0 && s.end_s == 4100.0));
        let pre: Vec<(f64, f64)> = l.preictal_spans(0).map(|s| (s.start_s, s.end_s)).collect();
        assert_eq!(pre, vec![(1400.0, 4000.0), (4100.0, 5000.0)]);
        let w = extract_windows(&t, &l, &p, 0).unwrap();
        assert!(w.iter().all(|w| w.end_s <= 4000.0 || w.start_s >= 4100.0));
    }

    #[test]
    fn window_counts() {
        // 3600 s preictal span, 30 s windows, 15 s stride
        assert_eq!(window_count(3600, 30, 15), 239);
        assert_eq!(window_count(300, 30, 30), 10);
        assert_eq!(window_count(29, 30, 15), 0);
        let t = flat_timeline(4000.0, 2.0, &[(3700.0, 3760.0)]);
        let p = LabelParams { postictal_s: 240.0, ..params(3600.0, 0.0) };
        let l = label_timeline(&t, &p).unwrap();
        let w = extract_windows(&t, &l, &p, 1).unwrap();
        let pre: Vec<&LabeledWindow> = w.iter().filter(|w| w.label == Label::Preictal).collect();
        // span [100, 3700) = 3600 s
        assert_eq!(pre.len(), 239);
        for pair in pre.windows(2) {
            assert_eq!(pair[1].start_s - pair[0].start_s, 15.0);
        }
        assert!(w.iter().all(|w| w.samples() == 60));
        // interictal: [0, 100) -> 3 windows, [4000 - ...) none after postictal
        assert_eq!(w.iter().filter(|w| w.label == Label::Interictal).count(), 3);
    }

    #[test]
    fn interictal_subsampling_is_seeded() {
        let t = flat_timeline(2400.0 + 3600.0 + 100.0, 1.0, &[(6000.0, 6050.0)]);
        let p = LabelParams { interictal_downsample: 8, ..params(3600.0, 0.0) };
        let l = label_timeline(&t, &p).unwrap();
        // interictal [0, 2400) -> 80 windows before subsampling
        let full = extract_windows(&t, &l, &LabelParams { interictal_downsample: 1, ..p }, 3).unwrap();
        assert_eq!(full.iter().filter(|w| w.label == Label::Interictal).count(), 80);
        let a = extract_windows(&t, &l, &p, 3).unwrap();
        let b = extract_windows(&t, &l, &p, 3).unwrap();
        let c = extract_windows(&t, &l, &p, 4).unwrap();
        let starts = |w: &[LabeledWindow]| -> Vec<f64> {
            w.iter().filter(|w| w.label == Label::Interictal).map(|w| w.start_s).collect()
        };
        assert_eq!(starts(&a).len(), 10);
        assert_eq!(starts(&a), starts(&b));
        assert_ne!(starts(&a), starts(&c));
    }

    fn four_seizure_windows() -> (Vec<LabeledWindow>, usize) {
        let seizures: Vec<(f64, f64)> = (0..4).map(|i| (5000.0 + 6000.0 * i as f64, 5060.0 + 6000.0 * i as f64)).collect();
        let t = flat_timeline(26_000.0, 1.0, &seizures);
        let p = LabelParams { window_size_s: 60.0, ..params(1800.0, 0.0) };
        let l = label_timeline(&t, &p).unwrap();
        (extract_windows(&t, &l, &p, 0).unwrap(), l.leads.len())
    }

    #[test]
    fn loso_holds_out_last_seizure() {
        let (w, leads) = four_seizure_windows();
        assert_eq!(leads, 4);
        let total = w.len();
        let part = loso_partition(w, leads).unwrap();
        assert_eq!(part.held_out_seizure, 3);
        assert_eq!(part.train.windows().len() + part.test.len(), total);
        assert!(part.test.iter().all(|w| w.seizure_index == 3));
        for a in part.train.windows() {
            for b in &part.test {
                assert!(!a.overlaps(b));
            }
        }
        let folds = cv_folds(&part.train).unwrap();
        assert_eq!(folds.len(), 3);
        let mut seen = vec![0usize; part.train.windows().len()];
        for f in &folds {
            f.validation.iter().for_each(|&i| seen[i] += 1);
            assert_eq!(f.train.len() + f.validation.len(), part.train.windows().len());
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn too_few_leads_or_folds() {
        let (w, _) = four_seizure_windows();
        assert_eq!(
            loso_partition(w.clone(), 2).unwrap_err(),
            Error::InsufficientSeizures { found: 2, required: 3 }
        );
        let single: Vec<LabeledWindow> = w.iter().filter(|w| w.seizure_index == 0).cloned().collect();
        let set = TrainingSet::from_windows(single, 3);
        assert_eq!(cv_folds(&set).unwrap_err(), Error::InsufficientFolds { found: 1 });
    }

    #[test]
    fn smuggled_test_window_is_leakage() {
        let (w, leads) = four_seizure_windows();
        let part = loso_partition(w, leads).unwrap();
        let mut train = part.train.windows().to_vec();
        train.push(part.test[0].clone());
        let set = TrainingSet::from_windows(train, part.held_out_seizure);
        assert!(matches!(cv_folds(&set), Err(Error::Leakage(_))));
    }
}
