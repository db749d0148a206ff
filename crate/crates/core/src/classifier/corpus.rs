//! Labeled utterance corpora.
//!
//! The synthetic generator fills sentence templates with dataset vocabulary:
//! chart requests for [`ClassLabel::ExplicitQuery`], stated findings about
//! the data for [`ClassLabel::ProactiveOpportunity`], and conversational
//! filler for [`ClassLabel::NonQuery`].

use std::io::BufRead;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::history::ClassLabel;

/// Kinds of proactive opportunity. Only `Discovery` has templates and acts as
/// a trigger; the others are carried as labels for externally supplied data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProactiveKind {
    Discovery,
    Disagreement,
    Preference,
    Criticism,
    Curiosity,
    Confusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    SeededTemplates,
    ExternalFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub label: ClassLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proactive_kind: Option<ProactiveKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub examples: Vec<LabeledExample>,
    pub provenance: Provenance,
}

impl LabeledCorpus {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.examples.iter().filter(|e| e.label == label).count()
    }

    /// Reads `label<TAB>text` lines; `#` comments and blank lines are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, ClassifierError> {
        let mut examples = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| ClassifierError::Corpus {
                line: idx + 1,
                message,
            };
            let (label, text) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected `label<TAB>text`".into()))?;
            let label = ClassLabel::parse(label.trim())
                .ok_or_else(|| bad(format!("unknown label `{}`", label.trim())))?;
            let text = text.trim();
            if text.is_empty() {
                return Err(bad("empty text".into()));
            }
            examples.push(LabeledExample {
                text: text.to_string(),
                label,
                proactive_kind: None,
            });
        }
        Ok(LabeledCorpus {
            examples,
            provenance: Provenance::ExternalFile,
        })
    }

    pub fn to_tsv(&self) -> String {
        self.examples
            .iter()
            .map(|e| format!("{}\t{}\n", e.label, e.text))
            .collect()
    }
}

const ATTRIBUTES: &[&str] = &[
    "rainfall",
    "rain",
    "temperature",
    "air temperature",
    "soil moisture",
    "solar energy",
    "solar radiation",
    "wind speed",
    "wind",
];

const ISLANDS: &[&str] = &["Kauai", "Oahu", "Molokai", "Maui", "the Big Island"];
const PLACES: &[&str] = &["Hawaii", "Kauai", "Oahu", "Molokai", "Maui", "the Big Island", "the state"];
const CHARTS: &[&str] = &["line chart", "bar chart", "scatter plot", "histogram", "box plot", "chart", "graph"];
const MONTHS: &[&str] = &["January", "February", "March", "April", "May", "June"];
const MOST: &[&str] = &["the most", "the highest", "the lowest", "the least", "way more", "much less"];

const EXPLICIT_PREFIXES: &[&str] = &["", "", "", "Okay, ", "Hey Arti, ", "Alright, ", "Can you ", "Please "];
const PROACTIVE_PREFIXES: &[&str] = &["", "", "", "Oh, ", "Hmm, ", "Wow, ", "Look, ", "Interesting, "];
const NONQUERY_PREFIXES: &[&str] = &["", "", "", "Um, ", "So, ", "Yeah, ", "Well, "];

// Placeholders: {attr} {attr2} {island} {island2} {place} {chart} {n} {m}
// {month} {most}.
const EXPLICIT_TEMPLATES: &[&str] = &[
    "show us a graph of the {attr} on {island}.",
    "generate a chart on the {attr} for {island}.",
    "display a chart of the highest recorded {attr} measurement in {place}.",
    "plot the {attr} for station {n}.",
    "make a {chart} of {attr} across {island}.",
    "I want to see a {chart} of the {attr} for {island}.",
    "show me the average {attr} per island.",
    "plot {attr} versus {attr2} for {island}.",
    "give me a {chart} showing {attr} over time at station {n}.",
    "show the distribution of {attr} on {island}.",
    "pull up the {attr} data for {island} as a {chart}.",
    "visualize the monthly {attr} for station {n}.",
    "show it as a {chart}.",
    "create a chart comparing {attr} between {island} and {island2}.",
    "draw a {chart} of the lowest {attr} readings in {place}.",
    "graph the total {attr} for each station on {island}.",
    "show me {attr} for station {n} and station {m}.",
    "put the {attr} for {island} on a {chart}.",
    "can we see the {attr} for {island}?",
    "let's look at a {chart} of {attr} for station {n}.",
    "what does the {attr} look like on {island}? show me.",
    "compare the {attr} on {island} and {island2} for me.",
    "could you chart the {attr} in {month} for {island}?",
];

const PROACTIVE_TEMPLATES: &[&str] = &[
    "station {n} on {island} has {most} {attr}.",
    "{island} has {most} {attr}.",
    "{island} gets a lot more {attr} than {island2}.",
    "it looks like {island} has the lowest {attr}.",
    "so as {attr} increases, so does {attr2}.",
    "looks like {attr} drops off in {month}.",
    "station {n} has really high {attr} compared to the others.",
    "the {attr} on {island} peaked in {month}.",
    "{island} seems to be the driest island.",
    "station {n} recorded {most} {attr} than station {m}.",
    "there is a clear spike in {attr} around {month} on {island}.",
    "the {attr} is higher on the windward side of {island}.",
    "the {attr} at station {n} is pretty consistent.",
    "{island} actually gets less {attr} than I expected.",
    "when {attr} goes up the {attr2} goes down.",
    "most of the {attr} happens in {month}.",
    "it goes up and down a lot around {month}.",
    "one station is way higher than everything else.",
    "the {attr} barely changes on {island}.",
    "{attr} varies the most between the stations.",
    "the {attr} at station {n} is way higher than the others.",
];

const NONQUERY_TEMPLATES: &[&str] = &[
    "what do you think we should do first?",
    "let me think about that for a second.",
    "okay, sounds good to me.",
    "I'm not sure, what do you think?",
    "we need to pick a place for the farm.",
    "did you have lunch already?",
    "let's go back to the task description.",
    "yeah, I agree with you.",
    "how much time do we have left?",
    "I've never been to {island} before.",
    "my cousin lives on {island}.",
    "that makes sense.",
    "wait, can you repeat that?",
    "we should write that down.",
    "let's talk about the agriculture part next.",
    "so what's the goal again?",
    "hold on, I'm reading the instructions.",
    "right, okay, got it.",
    "I think we're almost done with this part.",
    "do you want to take notes or should I?",
    "I was in {island} last {month} for a wedding.",
    "this microphone is kind of uncomfortable.",
    "let's decide on the fire question later.",
    "hmm, I don't remember what we said earlier.",
    "the sheet says each station records {attr} and {attr2}.",
    "there are a lot of stations in this dataset.",
    "my family used to grow coffee on {island}.",
    "the drought last year hurt a lot of ranchers.",
    "the fire on {island} made everyone nervous.",
    "agriculture is a big deal on {island}.",
    "I don't know much about {attr} to be honest.",
    "do you think {attr} matters for the drought question?",
    "we have six months of data, January to June.",
    "irrigation is expensive for small farms.",
    "I heard the big wind turbines are on {island}.",
    "this is a huge spreadsheet.",
    "so five measurements per station every day.",
    "I wonder if the {attr} matters for the farm.",
];

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).copied().expect("non-empty vocabulary")
}

fn pick_other<'a>(rng: &mut ChaCha8Rng, items: &[&'a str], not: &str) -> &'a str {
    loop {
        let v = pick(rng, items);
        if v != not {
            return v;
        }
    }
}

fn fill(template: &str, rng: &mut ChaCha8Rng) -> String {
    let attr = pick(rng, ATTRIBUTES);
    let attr2 = pick_other(rng, ATTRIBUTES, attr);
    let island = pick(rng, ISLANDS);
    let island2 = pick_other(rng, ISLANDS, island);
    let n = rng.random_range(1..=33);
    let m = loop {
        let m = rng.random_range(1..=33);
        if m != n {
            break m;
        }
    };
    template
        .replace("{attr2}", attr2)
        .replace("{attr}", attr)
        .replace("{island2}", island2)
        .replace("{island}", island)
        .replace("{place}", pick(rng, PLACES))
        .replace("{chart}", pick(rng, CHARTS))
        .replace("{month}", pick(rng, MONTHS))
        .replace("{most}", pick(rng, MOST))
        .replace("{n}", &n.to_string())
        .replace("{m}", &m.to_string())
}

fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn sentence(rng: &mut ChaCha8Rng, prefixes: &[&str], templates: &[&str]) -> String {
    let prefix = pick(rng, prefixes);
    let body = fill(pick(rng, templates), rng);
    if prefix.is_empty() {
        capitalize_first(&body)
    } else {
        format!("{prefix}{body}")
    }
}

/// Seeded template corpus with `size_per_class` examples of each class.
pub fn generate_corpus(seed: u64, size_per_class: usize) -> LabeledCorpus {
    assert!(size_per_class >= 1, "size_per_class must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::with_capacity(size_per_class * 3);
    for _ in 0..size_per_class {
        examples.push(LabeledExample {
            text: sentence(&mut rng, EXPLICIT_PREFIXES, EXPLICIT_TEMPLATES),
            label: ClassLabel::ExplicitQuery,
            proactive_kind: None,
        });
        examples.push(LabeledExample {
            text: sentence(&mut rng, PROACTIVE_PREFIXES, PROACTIVE_TEMPLATES),
            label: ClassLabel::ProactiveOpportunity,
            proactive_kind: Some(ProactiveKind::Discovery),
        });
        examples.push(LabeledExample {
            text: sentence(&mut rng, NONQUERY_PREFIXES, NONQUERY_TEMPLATES),
            label: ClassLabel::NonQuery,
            proactive_kind: None,
        });
    }
    examples.shuffle(&mut rng);
    LabeledCorpus {
        examples,
        provenance: Provenance::SeededTemplates,
    }
}

/// Size of the shipped synthetic corpus.
pub const SHIPPED_CORPUS_PER_CLASS: usize = 400;
pub const SHIPPED_CORPUS_SEED: u64 = 2024;

pub fn shipped_corpus() -> LabeledCorpus {
    generate_corpus(SHIPPED_CORPUS_SEED, SHIPPED_CORPUS_PER_CLASS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_counts_and_determinism() {
        let a = generate_corpus(9, 50);
        assert_eq!(a.len(), 150);
        for l in [ClassLabel::ExplicitQuery, ClassLabel::ProactiveOpportunity, ClassLabel::NonQuery] {
            assert_eq!(a.count(l), 50);
        }
        assert_eq!(a, generate_corpus(9, 50));
        assert_ne!(a, generate_corpus(10, 50));
        assert!(a.examples.iter().all(|e| !e.text.trim().is_empty() && !e.text.contains('{')));
        assert!(a
            .examples
            .iter()
            .filter(|e| e.label == ClassLabel::ProactiveOpportunity)
            .all(|e| e.proactive_kind == Some(ProactiveKind::Discovery)));
    }

    #[test]
    fn shipped_corpus_has_1200_examples() {
        assert_eq!(shipped_corpus().len(), 1200);
    }

    #[test]
    fn templates_cover_example_patterns() {
        assert!(EXPLICIT_TEMPLATES.contains(&"show us a graph of the {attr} on {island}."));
        assert!(PROACTIVE_TEMPLATES.contains(&"{island} has {most} {attr}."));
    }

    #[test]
    fn tsv_round_trip_and_errors() {
        let c = generate_corpus(1, 3);
        let back = LabeledCorpus::from_reader(c.to_tsv().as_bytes()).unwrap();
        assert_eq!(back.provenance, Provenance::ExternalFile);
        assert_eq!(
            back.examples.iter().map(|e| (&e.text, e.label)).collect::<Vec<_>>(),
            c.examples.iter().map(|e| (&e.text, e.label)).collect::<Vec<_>>()
        );
        let err = LabeledCorpus::from_reader("Question\thello\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"));
        assert!(LabeledCorpus::from_reader("NonQuery\t  \n".as_bytes()).is_err());
        assert!(LabeledCorpus::from_reader("no tab here\n".as_bytes()).is_err());
    }
}
