use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::events::{EventKind, SessionEvent};
use crate::refine::Origin;

/// Keywords tracked per session: five attributes, then five topics.
pub const SESSION_KEYWORDS: [&str; 10] = [
    "temperature",
    "wind",
    "rainfall",
    "solar",
    "soil",
    "station",
    "fire",
    "drought",
    "farm",
    "agriculture",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub utterances: usize,
    /// Whole-word, case-insensitive occurrences of each keyword.
    pub keyword_counts: BTreeMap<String, usize>,
    pub charts_generated: usize,
    pub explicit_charts: usize,
    pub proactive_charts: usize,
    pub charts_selected: usize,
    pub suppressions: usize,
    pub errors: usize,
    /// From the first utterance's start to the first explicit chart.
    pub time_to_first_explicit_secs: Option<f64>,
    /// The same interval as `m:ss`.
    pub time_to_first_explicit: Option<String>,
}

/// `m:ss`, minutes unpadded, rounded to the nearest second.
pub fn format_mmss(secs: f64) -> String {
    let total = secs.max(0.0).round() as u64;
    format!("{}:{:02}", total / 60, total % 60)
}

/// Counts tokens equal to each keyword; multi-word keywords match
/// consecutive tokens.
pub fn count_keywords(text: &str, keywords: &[&str]) -> BTreeMap<String, usize> {
    let toks: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();
    keywords
        .iter()
        .map(|k| {
            let words: Vec<String> = k.split_whitespace().map(str::to_lowercase).collect();
            let n = if words.is_empty() {
                0
            } else {
                toks.windows(words.len()).filter(|w| *w == words.as_slice()).count()
            };
            (k.to_lowercase(), n)
        })
        .collect()
}

pub fn compute_metrics(events: &[SessionEvent], keywords: &[&str]) -> MetricsReport {
    let mut report = MetricsReport {
        keyword_counts: keywords.iter().map(|k| (k.to_lowercase(), 0)).collect(),
        ..MetricsReport::default()
    };
    let mut first_utterance: Option<f64> = None;
    let mut first_explicit: Option<f64> = None;
    for e in events {
        match &e.event {
            EventKind::Utterance(u) => {
                report.utterances += 1;
                first_utterance.get_or_insert(u.t_start);
                for (k, n) in count_keywords(&u.text, keywords) {
                    *report.keyword_counts.entry(k).or_default() += n;
                }
            }
            EventKind::ChartGenerated(c) => {
                report.charts_generated += 1;
                match c.spec.origin {
                    Origin::Explicit => {
                        report.explicit_charts += 1;
                        first_explicit.get_or_insert(e.t);
                    }
                    Origin::Proactive => report.proactive_charts += 1,
                }
            }
            EventKind::ChartSelected(_) => report.charts_selected += 1,
            EventKind::Suppression(_) => report.suppressions += 1,
            EventKind::Error(_) => report.errors += 1,
            _ => {}
        }
    }
    if let (Some(start), Some(chart)) = (first_utterance, first_explicit) {
        let delta = chart - start;
        report.time_to_first_explicit_secs = Some(delta);
        report.time_to_first_explicit = Some(format_mmss(delta));
    }
    report
}
