//! Labeled event streams: the label universe, per-session chat and subtitle
//! times, the line-delimited events file, session filters and summary
//! statistics.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{median, quantile_linear};

/// The six basic emotions in their canonical order.
pub const BASIC_EMOTIONS: [&str; 6] = ["joy", "surprise", "anger", "disgust", "fear", "sadness"];

/// Ordered set of distinct labels. The order fixes the row/column layout of
/// every parameter matrix derived from a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct EmotionSet {
    labels: Vec<String>,
}

impl EmotionSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidInput("emotion set must not be empty".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::InvalidInput("empty label name".into()));
            }
            if labels[..i].contains(l) {
                return Err(Error::InvalidInput(format!("duplicate label {l:?}")));
            }
        }
        Ok(EmotionSet { labels })
    }

    /// Parses a comma-separated label list.
    pub fn parse_list(list: &str) -> Result<Self> {
        EmotionSet::new(list.split(',').map(str::trim).filter(|s| !s.is_empty()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl Default for EmotionSet {
    fn default() -> Self {
        EmotionSet::new(BASIC_EMOTIONS).expect("basic emotions are distinct")
    }
}

impl TryFrom<Vec<String>> for EmotionSet {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        EmotionSet::new(v)
    }
}

impl From<EmotionSet> for Vec<String> {
    fn from(s: EmotionSet) -> Self {
        s.labels
    }
}

/// The eleven labels of the extended emotion classifier.
pub const EXTENDED_EMOTIONS: [&str; 11] = [
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "love",
    "optimism",
    "pessimism",
    "sadness",
    "surprise",
    "trust",
];

/// Maps the eleven extended emotion labels onto the six basic ones.
pub fn map_extended_labels(label: &str) -> Result<&'static str> {
    Ok(match label {
        "joy" | "anticipation" | "optimism" | "love" | "trust" => "joy",
        "sadness" | "pessimism" => "sadness",
        "anger" => "anger",
        "disgust" => "disgust",
        "fear" => "fear",
        "surprise" => "surprise",
        other => {
            return Err(Error::InvalidInput(format!(
                "no basic emotion for extended label {other:?}"
            )))
        }
    })
}

/// One observation window: chat and subtitle times per label, in minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSession {
    pub id: String,
    pub duration: f64,
    /// `chat[e]` holds the sorted times of chat events carrying label `e`.
    pub chat: Vec<Vec<f64>>,
    /// `subtitles[f]` holds the sorted times subtitles of label `f` appear.
    pub subtitles: Vec<Vec<f64>>,
}

impl VideoSession {
    pub fn empty(id: impl Into<String>, duration: f64, n_labels: usize) -> Self {
        VideoSession {
            id: id.into(),
            duration,
            chat: vec![Vec::new(); n_labels],
            subtitles: vec![Vec::new(); n_labels],
        }
    }

    pub fn n_labels(&self) -> usize {
        self.chat.len()
    }

    pub fn count(&self, label: usize) -> usize {
        self.chat[label].len()
    }

    pub fn total_chat_events(&self) -> usize {
        self.chat.iter().map(Vec::len).sum()
    }

    /// Distinct chat message times across all labels, sorted. A message
    /// carrying several labels appears in several per-label lists at the
    /// same instant and is counted once here.
    pub fn message_times(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.chat.iter().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidInput(format!(
                "session {:?}: duration must be positive (got {})",
                self.id, self.duration
            )));
        }
        if self.chat.len() != self.subtitles.len() {
            return Err(Error::InvalidInput(format!(
                "session {:?}: chat and subtitle label counts differ",
                self.id
            )));
        }
        for list in self.chat.iter().chain(&self.subtitles) {
            if list.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidInput(format!(
                    "session {:?}: event times not sorted",
                    self.id
                )));
            }
            if list.iter().any(|&t| !(0.0..=self.duration).contains(&t)) {
                return Err(Error::InvalidInput(format!(
                    "session {:?}: event time outside [0, {}]",
                    self.id, self.duration
                )));
            }
        }
        Ok(())
    }
}

/// Sessions sharing one label universe. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionCollection {
    pub emotion_set: EmotionSet,
    pub sessions: Vec<VideoSession>,
}

impl SessionCollection {
    pub fn new(emotion_set: EmotionSet, sessions: Vec<VideoSession>) -> Result<Self> {
        for s in &sessions {
            if s.n_labels() != emotion_set.len() {
                return Err(Error::EmotionSetMismatch(format!(
                    "session {:?} has {} labels, emotion set has {}",
                    s.id,
                    s.n_labels(),
                    emotion_set.len()
                )));
            }
            s.validate()?;
        }
        Ok(SessionCollection {
            emotion_set,
            sessions,
        })
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.sessions.iter().map(|s| s.duration).sum()
    }

    pub fn label_count(&self, label: usize) -> usize {
        self.sessions.iter().map(|s| s.count(label)).sum()
    }

    fn retain<F: Fn(&VideoSession) -> bool>(&self, keep: F) -> SessionCollection {
        SessionCollection {
            emotion_set: self.emotion_set.clone(),
            sessions: self.sessions.iter().filter(|s| keep(s)).cloned().collect(),
        }
    }

    /// Restricts every session to a subset of labels, in the order given.
    pub fn select_labels(&self, subset: &EmotionSet) -> Result<SessionCollection> {
        let idx: Vec<usize> = subset
            .labels()
            .iter()
            .map(|l| {
                self.emotion_set
                    .index(l)
                    .ok_or_else(|| Error::EmotionSetMismatch(format!("label {l:?} not in data")))
            })
            .collect::<Result<_>>()?;
        let sessions = self
            .sessions
            .iter()
            .map(|s| VideoSession {
                id: s.id.clone(),
                duration: s.duration,
                chat: idx.iter().map(|&i| s.chat[i].clone()).collect(),
                subtitles: idx.iter().map(|&i| s.subtitles[i].clone()).collect(),
            })
            .collect();
        Ok(SessionCollection {
            emotion_set: subset.clone(),
            sessions,
        })
    }
}

/// Folds a collection labeled with extended emotions onto the basic six.
/// Several extended labels on one message become a single basic event.
pub fn fold_extended_labels(collection: &SessionCollection) -> Result<SessionCollection> {
    let basic = EmotionSet::default();
    let target: Vec<usize> = collection
        .emotion_set
        .labels()
        .iter()
        .map(|l| Ok(basic.index(map_extended_labels(l)?).expect("basic label")))
        .collect::<Result<_>>()?;
    let fold = |lists: &[Vec<f64>]| {
        let mut out = vec![Vec::new(); basic.len()];
        for (i, l) in lists.iter().enumerate() {
            out[target[i]].extend_from_slice(l);
        }
        for l in &mut out {
            l.sort_by(f64::total_cmp);
            l.dedup();
        }
        out
    };
    let sessions = collection
        .sessions
        .iter()
        .map(|s| VideoSession {
            id: s.id.clone(),
            duration: s.duration,
            chat: fold(&s.chat),
            subtitles: fold(&s.subtitles),
        })
        .collect();
    SessionCollection::new(basic, sessions)
}

// ---------------------------------------------------------------------------
// Events file
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Meta {
        session: String,
        duration: f64,
    },
    Chat {
        session: String,
        t: f64,
        labels: Vec<String>,
    },
    Subtitle {
        session: String,
        t: f64,
        labels: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Drop chat events before the first or after the last subtitle of
    /// their session (any label).
    pub strict_subtitle_window: bool,
}

pub fn parse_events_file(
    path: impl AsRef<Path>,
    emotion_set: &EmotionSet,
    options: ParseOptions,
) -> Result<SessionCollection> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_events(BufReader::new(file), emotion_set, options)
}

struct Builder {
    id: String,
    declared: Option<(f64, usize)>,
    chat: Vec<Vec<(f64, usize)>>,
    subtitles: Vec<Vec<(f64, usize)>>,
}

pub fn parse_events<R: BufRead>(
    reader: R,
    emotion_set: &EmotionSet,
    options: ParseOptions,
) -> Result<SessionCollection> {
    let n = emotion_set.len();
    let mut order: Vec<Builder> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let session = match &record {
            Record::Meta { session, .. }
            | Record::Chat { session, .. }
            | Record::Subtitle { session, .. } => session.clone(),
        };
        let slot = *by_id.entry(session.clone()).or_insert_with(|| {
            order.push(Builder {
                id: session,
                declared: None,
                chat: vec![Vec::new(); n],
                subtitles: vec![Vec::new(); n],
            });
            order.len() - 1
        });
        let b = &mut order[slot];
        match record {
            Record::Meta { duration, .. } => {
                if !(duration > 0.0) || !duration.is_finite() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("duration must be positive, got {duration}"),
                    });
                }
                if let Some((d, _)) = b.declared {
                    if d != duration {
                        return Err(Error::Parse {
                            line: lineno,
                            message: format!("conflicting duration {duration} (previously {d})"),
                        });
                    }
                }
                b.declared = Some((duration, lineno));
            }
            Record::Chat { t, labels, .. } | Record::Subtitle { t, labels, .. }
                if labels.is_empty() =>
            {
                let _ = t;
                return Err(Error::Parse {
                    line: lineno,
                    message: "label list is empty".into(),
                });
            }
            Record::Chat { t, labels, .. } => {
                push_labeled(&mut b.chat, emotion_set, t, &labels, lineno)?
            }
            Record::Subtitle { t, labels, .. } => {
                push_labeled(&mut b.subtitles, emotion_set, t, &labels, lineno)?
            }
        }
    }

    let mut sessions = Vec::with_capacity(order.len());
    for b in order {
        let max_time = b
            .chat
            .iter()
            .chain(&b.subtitles)
            .flatten()
            .map(|&(t, _)| t)
            .fold(0.0_f64, f64::max);
        let duration = match b.declared {
            Some((d, _)) => {
                if let Some(&(t, line)) = b
                    .chat
                    .iter()
                    .chain(&b.subtitles)
                    .flatten()
                    .find(|&&(t, _)| t > d)
                {
                    return Err(Error::Parse {
                        line,
                        message: format!("time {t} exceeds declared duration {d}"),
                    });
                }
                d
            }
            None => max_time,
        };
        if !(duration > 0.0) {
            return Err(Error::InvalidInput(format!(
                "session {:?}: cannot infer a positive duration",
                b.id
            )));
        }
        let finish = |lists: Vec<Vec<(f64, usize)>>| -> Vec<Vec<f64>> {
            lists
                .into_iter()
                .map(|mut l| {
                    // Stable: ties keep input order.
                    l.sort_by(|a, b| a.0.total_cmp(&b.0));
                    l.into_iter().map(|(t, _)| t).collect()
                })
                .collect()
        };
        let mut session = VideoSession {
            id: b.id,
            duration,
            chat: finish(b.chat),
            subtitles: finish(b.subtitles),
        };
        if options.strict_subtitle_window {
            clip_to_subtitle_window(&mut session);
        }
        sessions.push(session);
    }
    SessionCollection::new(emotion_set.clone(), sessions)
}

fn push_labeled(
    lists: &mut [Vec<(f64, usize)>],
    emotion_set: &EmotionSet,
    t: f64,
    labels: &[String],
    line: usize,
) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Parse {
            line,
            message: format!("time must be nonnegative, got {t}"),
        });
    }
    for label in labels {
        let idx = emotion_set.index(label).ok_or_else(|| Error::UnknownLabel {
            line,
            label: label.clone(),
        })?;
        lists[idx].push((t, line));
    }
    Ok(())
}

fn clip_to_subtitle_window(session: &mut VideoSession) {
    let first = session
        .subtitles
        .iter()
        .filter_map(|l| l.first())
        .copied()
        .fold(f64::INFINITY, f64::min);
    let last = session
        .subtitles
        .iter()
        .filter_map(|l| l.last())
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    for list in &mut session.chat {
        list.retain(|&t| t >= first && t <= last);
    }
}

/// Writes the collection in the line-delimited events format: one `meta`
/// header per session, then chat records (labels sharing a timestamp are
/// merged into one record), then subtitle records.
pub fn write_events<W: Write>(collection: &SessionCollection, mut out: W) -> Result<()> {
    let io = |e| Error::io("<events output>", e);
    for s in &collection.sessions {
        let meta = Record::Meta {
            session: s.id.clone(),
            duration: s.duration,
        };
        writeln!(out, "{}", serde_json::to_string(&meta)?).map_err(io)?;
        for (t, labels) in merge_by_time(&s.chat, &collection.emotion_set) {
            let r = Record::Chat {
                session: s.id.clone(),
                t,
                labels,
            };
            writeln!(out, "{}", serde_json::to_string(&r)?).map_err(io)?;
        }
        for (t, labels) in merge_by_time(&s.subtitles, &collection.emotion_set) {
            let r = Record::Subtitle {
                session: s.id.clone(),
                t,
                labels,
            };
            writeln!(out, "{}", serde_json::to_string(&r)?).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

pub fn write_events_file(collection: &SessionCollection, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_events(collection, std::io::BufWriter::new(file))
}

fn merge_by_time(lists: &[Vec<f64>], set: &EmotionSet) -> Vec<(f64, Vec<String>)> {
    let mut all: Vec<(f64, usize)> = lists
        .iter()
        .enumerate()
        .flat_map(|(e, l)| l.iter().map(move |&t| (t, e)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut merged: Vec<(f64, Vec<String>)> = Vec::new();
    for (t, e) in all {
        match merged.last_mut() {
            // A label repeated at the same instant needs its own record.
            Some((lt, labels)) if *lt == t && !labels.iter().any(|l| l == set.label(e)) => {
                labels.push(set.label(e).to_string())
            }
            _ => merged.push((t, vec![set.label(e).to_string()])),
        }
    }
    merged
}

// ---------------------------------------------------------------------------
// Filters
// ---------------------------------------------------------------------------

pub const DEFAULT_MIN_GAP: f64 = 1.0 / 60.0;
pub const DEFAULT_MAX_GAP: f64 = 5.0;

/// Median gap between consecutive distinct message times, all labels pooled.
pub fn median_message_gap(session: &VideoSession) -> Option<f64> {
    let times = session.message_times();
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    median(&gaps)
}

/// Keeps sessions whose pooled median inter-message gap lies in
/// `[min_gap, max_gap]`. Sessions with fewer than two messages are dropped.
pub fn filter_median_interval(
    collection: &SessionCollection,
    min_gap: f64,
    max_gap: f64,
) -> Result<SessionCollection> {
    if !(min_gap < max_gap) {
        return Err(Error::InvalidInput(format!(
            "min_gap ({min_gap}) must be below max_gap ({max_gap})"
        )));
    }
    Ok(collection.retain(|s| {
        median_message_gap(s).is_some_and(|g| g >= min_gap && g <= max_gap)
    }))
}

/// Per-label messages-per-minute window derived from a reference corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateQuantileBounds {
    pub lo: f64,
    pub hi: f64,
    /// `(q_lo, q_hi)` per label, in emotion-set order.
    pub per_label: Vec<(f64, f64)>,
}

impl RateQuantileBounds {
    /// Quantiles of the per-session rates `N^e / T`, per label, computed by
    /// linear interpolation between order statistics.
    pub fn compute(collection: &SessionCollection, lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || !(lo < hi) {
            return Err(Error::InvalidInput(format!(
                "quantile fractions must satisfy 0 <= lo < hi <= 1 (got {lo}, {hi})"
            )));
        }
        if collection.len() < 2 {
            return Err(Error::InvalidInput(
                "rate quantiles need at least two sessions".into(),
            ));
        }
        let per_label = (0..collection.emotion_set.len())
            .map(|e| {
                let rates: Vec<f64> = collection
                    .sessions
                    .iter()
                    .map(|s| s.count(e) as f64 / s.duration)
                    .collect();
                (
                    quantile_linear(&rates, lo).expect("nonempty"),
                    quantile_linear(&rates, hi).expect("nonempty"),
                )
            })
            .collect();
        Ok(RateQuantileBounds { lo, hi, per_label })
    }

    pub fn retains(&self, session: &VideoSession) -> bool {
        self.per_label.iter().enumerate().all(|(e, &(qlo, qhi))| {
            let r = session.count(e) as f64 / session.duration;
            r >= qlo && r <= qhi
        })
    }

    pub fn apply(&self, collection: &SessionCollection) -> SessionCollection {
        collection.retain(|s| self.retains(s))
    }

    pub fn describe(&self, set: &EmotionSet) -> String {
        let mut s = format!(
            "rate quantile filter: linear interpolation between order statistics, lo={}, hi={}\n",
            self.lo, self.hi
        );
        for (e, (a, b)) in self.per_label.iter().enumerate() {
            let _ = writeln!(s, "  {}: [{a}, {b}] messages/min", set.label(e));
        }
        s
    }
}

/// Keeps sessions whose rate lies within `[q_lo, q_hi]` for every label,
/// quantiles taken across the given collection.
pub fn filter_rate_quantiles(
    collection: &SessionCollection,
    lo: f64,
    hi: f64,
) -> Result<SessionCollection> {
    Ok(RateQuantileBounds::compute(collection, lo, hi)?.apply(collection))
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionStats {
    pub session: String,
    pub n_messages: usize,
    pub median_gap: Option<f64>,
    /// Messages per minute for each label.
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsSummary {
    pub sessions: Vec<SessionStats>,
    pub median_messages: f64,
    pub median_gap: Option<f64>,
    /// Cross-session median of each label's rate.
    pub median_rates: Vec<f64>,
}

pub fn session_stats(session: &VideoSession) -> SessionStats {
    SessionStats {
        session: session.id.clone(),
        n_messages: session.message_times().len(),
        median_gap: median_message_gap(session),
        rates: session
            .chat
            .iter()
            .map(|l| l.len() as f64 / session.duration)
            .collect(),
    }
}

pub fn summary_stats(collection: &SessionCollection) -> Result<StatsSummary> {
    if collection.is_empty() {
        return Err(Error::InvalidInput("no sessions to summarize".into()));
    }
    let sessions: Vec<SessionStats> = collection.sessions.iter().map(session_stats).collect();
    let counts: Vec<f64> = sessions.iter().map(|s| s.n_messages as f64).collect();
    let gaps: Vec<f64> = sessions.iter().filter_map(|s| s.median_gap).collect();
    let median_rates = (0..collection.emotion_set.len())
        .map(|e| {
            let r: Vec<f64> = sessions.iter().map(|s| s.rates[e]).collect();
            median(&r).expect("nonempty")
        })
        .collect();
    Ok(StatsSummary {
        median_messages: median(&counts).expect("nonempty"),
        median_gap: median(&gaps),
        median_rates,
        sessions,
    })
}

/// Comma-separated stats table: `session, n_messages, median_gap_min,
/// rate_<label>...`. Sessions without a gap (fewer than two messages) leave
/// the gap column empty.
pub fn write_stats_csv<W: Write>(summary: &StatsSummary, set: &EmotionSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "session".to_string(),
        "n_messages".into(),
        "median_gap_min".into(),
    ];
    header.extend(set.labels().iter().map(|l| format!("rate_{l}")));
    w.write_record(&header)?;
    for s in &summary.sessions {
        let mut row = vec![
            s.session.clone(),
            s.n_messages.to_string(),
            s.median_gap.map(|g| g.to_string()).unwrap_or_default(),
        ];
        row.extend(s.rates.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<stats output>", e))?;
    Ok(())
}
