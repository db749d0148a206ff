//! Closed-vocabulary text scanning shared by the rule-based backends.
//!
//! Everything here works on lowercase alphanumeric tokens, so matching is
//! insensitive to case and punctuation.

use crate::data::{Aggregation, Attribute, GroupBy, Island};
use crate::reasoner::ChartType;

pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Token positions where `phrase` (space separated) starts.
fn phrase_positions<'a>(toks: &'a [String], phrase: &'a str) -> impl Iterator<Item = usize> + 'a {
    let words: Vec<&str> = phrase.split(' ').collect();
    (0..toks.len()).filter(move |&i| {
        i + words.len() <= toks.len() && words.iter().enumerate().all(|(k, w)| toks[i + k] == *w)
    })
}

fn first_position(toks: &[String], phrases: &[&str]) -> Option<usize> {
    phrases
        .iter()
        .filter_map(|p| phrase_positions(toks, p).next())
        .min()
}

const ATTRIBUTE_SYNONYMS: &[(Attribute, &[&str])] = &[
    (
        Attribute::Rainfall,
        &["rainfall", "rain", "rainy", "rains", "precipitation", "wettest", "driest", "wetter", "drier"],
    ),
    (
        Attribute::Temperature,
        &["temperature", "temperatures", "temp", "heat", "hottest", "warmest", "coldest", "hotter", "warmer", "colder"],
    ),
    (Attribute::SoilMoisture, &["soil moisture", "soil", "moisture"]),
    (
        Attribute::Solar,
        &["solar energy", "solar radiation", "solar", "sun", "sunlight", "sunshine", "sunniest", "sunnier"],
    ),
    (Attribute::WindSpeed, &["wind speed", "wind", "winds", "windy", "windier", "windiest"]),
];

/// Attributes in order of first mention.
pub fn find_attributes(text: &str) -> Vec<Attribute> {
    let toks = tokens(text);
    let mut hits: Vec<(usize, Attribute)> = ATTRIBUTE_SYNONYMS
        .iter()
        .filter_map(|(attr, syns)| first_position(&toks, syns).map(|p| (p, *attr)))
        .collect();
    hits.sort();
    hits.into_iter().map(|(_, a)| a).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    Station(String),
    Island(Island),
    /// The whole state (all stations).
    State,
}

/// Place mentions in order of appearance.
///
/// A bare "Hawaii" denotes the state; "Big Island", "Hawaii island" and
/// "island of Hawaii" denote the island.
pub fn find_regions(text: &str) -> Vec<Region> {
    let toks = tokens(text);
    let mut out: Vec<(usize, Region)> = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let t = toks[i].as_str();
        let next = toks.get(i + 1).map(String::as_str);
        match t {
            "station" | "stations" => {
                let mut j = i + 1;
                while j < toks.len() {
                    let tok = toks[j].as_str();
                    if tok.chars().all(|c| c.is_ascii_digit()) {
                        out.push((j, Region::Station(tok.trim_start_matches('0').to_string())));
                    } else if tok != "and" && tok != "or" && tok != "number" {
                        break;
                    }
                    j += 1;
                }
                i = j.max(i + 1);
                continue;
            }
            "big" if next == Some("island") => {
                out.push((i, Region::Island(Island::Hawaii)));
                i += 2;
                continue;
            }
            "hawaii" => {
                let island_of = i >= 2 && toks[i - 2] == "island" && toks[i - 1] == "of";
                if next == Some("island") || island_of {
                    out.push((i, Region::Island(Island::Hawaii)));
                    i += 2;
                    continue;
                }
                out.push((i, Region::State));
            }
            "statewide" => out.push((i, Region::State)),
            "state" if i >= 1 && toks[i - 1] == "the" => out.push((i, Region::State)),
            "all" if next == Some("stations") || next == Some("islands") => out.push((i, Region::State)),
            _ => {
                if let Some(island) = Island::parse(t) {
                    if island != Island::Hawaii {
                        out.push((i, Region::Island(island)));
                    }
                }
            }
        }
        i += 1;
    }
    // "station 0" would trim to empty; keep the literal zero
    for (_, r) in out.iter_mut() {
        if let Region::Station(id) = r {
            if id.is_empty() {
                *id = "0".into();
            }
        }
    }
    out.sort_by_key(|(p, _)| *p);
    let mut seen = Vec::new();
    for (_, r) in out {
        if !seen.contains(&r) {
            seen.push(r);
        }
    }
    seen
}

const CHART_WORDS: &[(ChartType, &[&str])] = &[
    (ChartType::Line, &["line chart", "line graph", "line plot", "time series"]),
    (ChartType::Bar, &["bar chart", "bar graph", "bar plot", "bars"]),
    (ChartType::Scatter, &["scatter plot", "scatterplot", "scatter"]),
    (ChartType::Histogram, &["histogram"]),
    (ChartType::Boxplot, &["box plot", "boxplot", "box and whisker", "box whisker"]),
];

/// A chart type named outright in the text (first mention wins).
pub fn explicit_chart_type(text: &str) -> Option<ChartType> {
    let toks = tokens(text);
    CHART_WORDS
        .iter()
        .filter_map(|(ct, words)| first_position(&toks, words).map(|p| (p, *ct)))
        .min_by_key(|(p, _)| *p)
        .map(|(_, ct)| ct)
}

pub fn has_distribution_intent(text: &str) -> bool {
    let toks = tokens(text);
    first_position(&toks, &["distribution", "distributed", "frequency"]).is_some()
}

pub fn has_spread_intent(text: &str) -> bool {
    let toks = tokens(text);
    first_position(&toks, &["variability", "variation", "spread", "range of"]).is_some()
}

const AGGREGATION_WORDS: &[(Aggregation, &[&str])] = &[
    (
        Aggregation::Max,
        &["highest", "most", "max", "maximum", "peak", "peaked", "wettest", "hottest", "warmest", "windiest", "sunniest", "largest", "greatest"],
    ),
    (
        Aggregation::Min,
        &["lowest", "least", "min", "minimum", "driest", "coldest", "smallest", "fewest"],
    ),
    (Aggregation::Mean, &["average", "mean", "typical", "averages"]),
    (Aggregation::Sum, &["total", "sum", "cumulative", "totals"]),
];

/// Aggregation word appearing first in the text, if any.
pub fn find_aggregation(text: &str) -> Option<Aggregation> {
    let toks = tokens(text);
    AGGREGATION_WORDS
        .iter()
        .filter_map(|(agg, words)| first_position(&toks, words).map(|p| (p, *agg)))
        .min_by_key(|(p, _)| *p)
        .map(|(_, agg)| agg)
}

/// Explicit grouping request ("per island", "monthly", "by station"...).
pub fn find_group_by(text: &str) -> Option<GroupBy> {
    let toks = tokens(text);
    let table: [(GroupBy, &[&str]); 3] = [
        (
            GroupBy::Island,
            &["per island", "by island", "each island", "across islands", "across the islands", "between islands", "every island"],
        ),
        (
            GroupBy::Month,
            &["per month", "by month", "each month", "monthly", "every month", "month by month"],
        ),
        (
            GroupBy::Station,
            &["per station", "by station", "each station", "across stations", "across the stations", "every station", "between stations", "station by station"],
        ),
    ];
    table
        .iter()
        .filter_map(|(g, words)| first_position(&toks, words).map(|p| (p, *g)))
        .min_by_key(|(p, _)| *p)
        .map(|(_, g)| g)
}

/// Comparison wording that implies a per-station breakdown.
pub fn has_comparison_intent(text: &str) -> bool {
    let toks = tokens(text);
    first_position(&toks, &["compare", "comparing", "comparison", "versus", "vs", "compared"]).is_some()
}
