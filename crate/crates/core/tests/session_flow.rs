use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use serde_json::Value;

use prochart_core::classifier::{ClassifierModel, HashingEmbedder, HIDDEN_UNITS};
use prochart_core::data::ClimateStore;
use prochart_core::history::ClassLabel;
use prochart_core::refine::{Mode, Origin};
use prochart_core::segment::Utterance;
use prochart_core::session::{
    parse_log, replay, write_log, ClientMessage, Engine, EventKind, Placement, ServerMessage, Session, SessionEvent,
    SessionSettings, SuppressionReason,
};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn engine() -> Arc<Engine> {
    static STORE: OnceLock<Arc<ClimateStore>> = OnceLock::new();
    let store = STORE
        .get_or_init(|| Arc::new(ClimateStore::ingest_csv(root().join("fixtures/hcdp_subset.csv")).unwrap()))
        .clone();
    let emb = HashingEmbedder::default();
    let model = ClassifierModel::zeros(256, HIDDEN_UNITS);
    Arc::new(Engine::fallback(store, model, Arc::new(emb)))
}

struct Script {
    session: Session,
    next_id: u64,
}

impl Script {
    fn new(mode: Mode, capacity: usize) -> Self {
        let mut settings = SessionSettings::new(mode);
        settings.conveyor_capacity = capacity;
        Script {
            session: Session::new(engine(), settings),
            next_id: 1,
        }
    }

    fn say(&mut self, t: f64, label: ClassLabel, text: &str) -> Vec<SessionEvent> {
        let u = Utterance {
            id: self.next_id,
            speaker: "A".into(),
            text: text.into(),
            t_start: t - 2.0,
            t_end: t,
            label: None,
        };
        self.next_id += 1;
        self.session.handle_labeled(u, label)
    }
}

fn generated(events: &[SessionEvent]) -> Vec<(String, Option<String>, Vec<String>)> {
    events
        .iter()
        .filter_map(|e| match &e.event {
            EventKind::ChartGenerated(c) => Some((c.spec.spec_id.clone(), c.evicted.clone(), c.conveyor.clone())),
            _ => None,
        })
        .collect()
}

fn kinds(events: &[SessionEvent]) -> Vec<&'static str> {
    events.iter().map(|e| e.kind()).collect()
}

const EXPLICIT: [&str; 3] = [
    "Show me a chart of rainfall on Maui.",
    "Show me a chart of temperature on Oahu.",
    "Show me a chart of wind speed on Kauai.",
];

#[test]
fn conveyor_evicts_oldest() {
    let mut s = Script::new(Mode::NonProactive, 2);
    let mut all = Vec::new();
    for (i, text) in EXPLICIT.iter().enumerate() {
        all.extend(s.say(10.0 * (i + 1) as f64, ClassLabel::ExplicitQuery, text));
    }
    let g = generated(&all);
    assert_eq!(g.len(), 3);
    assert_eq!(g[1], ("c2".into(), None, vec!["c1".into(), "c2".into()]));
    assert_eq!(g[2], ("c3".into(), Some("c1".into()), vec!["c2".into(), "c3".into()]));
    assert_eq!(s.session.conveyor().ids(), vec!["c2", "c3"]);

    let ev = s.session.select_chart("c1", 40.0);
    assert_eq!(kinds(&ev), vec!["error"]);
}

#[test]
fn selection_is_idempotent_and_moves_off_the_belt() {
    let mut s = Script::new(Mode::NonProactive, 10);
    s.say(5.0, ClassLabel::ExplicitQuery, EXPLICIT[0]);
    s.say(15.0, ClassLabel::ExplicitQuery, EXPLICIT[1]);

    let first = s.session.select_chart("c2", 20.0);
    let EventKind::ChartSelected(rec) = &first[0].event else { panic!("{first:?}") };
    assert!(!rec.repeated);
    assert_eq!(rec.origin, Origin::Explicit);
    assert_eq!(s.session.conveyor().ids(), vec!["c1"]);
    assert_eq!(s.session.history().selected().len(), 1);

    let again = s.session.select_chart("c2", 21.0);
    let EventKind::ChartSelected(rec) = &again[0].event else { panic!() };
    assert!(rec.repeated);
    assert_eq!(s.session.history().selected().len(), 1);
    assert_eq!(s.session.workspace().len(), 1);

    assert_eq!(kinds(&s.session.select_chart("c9", 22.0)), vec!["error"]);
}

#[test]
fn layout_and_deletion() {
    let mut s = Script::new(Mode::NonProactive, 10);
    s.say(5.0, ClassLabel::ExplicitQuery, EXPLICIT[0]);
    assert_eq!(
        kinds(&s.session.move_resize("c1", Placement { x: 0.0, y: 0.0, w: 300.0, h: 300.0 }, 6.0)),
        vec!["error"],
        "charts on the belt cannot be laid out"
    );
    s.session.select_chart("c1", 7.0);
    let ev = s.session.move_resize("c1", Placement { x: 50.0, y: 60.0, w: 10.0, h: 1000.0 }, 8.0);
    let EventKind::LayoutChanged(l) = &ev[0].event else { panic!("{ev:?}") };
    assert_eq!(l.placement, Placement { x: 50.0, y: 60.0, w: 200.0, h: 1000.0 });
    let bad = s.session.move_resize("c1", Placement { x: f64::NAN, y: 0.0, w: 300.0, h: 300.0 }, 8.5);
    assert_eq!(kinds(&bad), vec!["error"]);

    assert_eq!(kinds(&s.session.delete_chart("c1", 9.0)), vec!["chart_deleted"]);
    assert_eq!(kinds(&s.session.delete_chart("c1", 9.5)), vec!["error"]);
    assert_eq!(kinds(&s.session.select_chart("c1", 10.0)), vec!["error"]);
}

#[test]
fn proactive_throttle() {
    let mut s = Script::new(Mode::Proactive, 10);
    let a = s.say(5.0, ClassLabel::ProactiveOpportunity, "Station 4 on Oahu has the most rainfall.");
    assert_eq!(generated(&a).len(), 1);
    let b = s.say(9.0, ClassLabel::ProactiveOpportunity, "The temperature on Maui is the lowest.");
    let reasons: Vec<_> = b
        .iter()
        .filter_map(|e| match &e.event {
            EventKind::Suppression(r) => Some(r.reason),
            _ => None,
        })
        .collect();
    assert_eq!(reasons, vec![SuppressionReason::Throttle]);
    let c = s.say(15.0, ClassLabel::ProactiveOpportunity, "The temperature on Maui is the lowest.");
    assert_eq!(generated(&c).len(), 1);
    let d = s.say(16.0, ClassLabel::ExplicitQuery, EXPLICIT[2]);
    assert_eq!(generated(&d).len(), 1, "explicit requests are never throttled");
}

#[test]
fn non_proactive_mode_ignores_discoveries() {
    let mut s = Script::new(Mode::NonProactive, 10);
    let ev = s.say(5.0, ClassLabel::ProactiveOpportunity, "Station 4 on Oahu has the most rainfall.");
    assert_eq!(kinds(&ev), vec!["utterance", "classification"]);
    let ev = s.say(8.0, ClassLabel::NonQuery, "okay");
    assert_eq!(kinds(&ev), vec!["utterance", "classification"]);
}

#[test]
fn empty_replay_is_start_and_end() {
    let log = replay(engine(), SessionSettings::new(Mode::Proactive), &[]).unwrap();
    assert_eq!(kinds(&log), vec!["session_start", "session_end"]);
    let EventKind::SessionEnd(end) = &log[1].event else { panic!() };
    assert_eq!((end.utterances, end.charts_generated), (0, 0));
}

#[test]
fn end_is_idempotent() {
    let mut s = Script::new(Mode::Proactive, 10);
    assert_eq!(kinds(&s.session.end(1.0)), vec!["session_end"]);
    assert!(s.session.end(2.0).is_empty());
}

#[test]
fn typed_utterances_via_client_messages() {
    let mut s = Script::new(Mode::NonProactive, 10);
    let ev = s.session.apply(
        ClientMessage::AudioEvent { speaker: "A".into(), start: 0.0, end: 1.0, text: None, audio_ref: None },
        1.0,
    );
    assert_eq!(kinds(&ev), vec!["error"]);
    let ev = s.session.apply(ClientMessage::UtteranceText { speaker: "B".into(), text: "hello there".into() }, 2.0);
    assert_eq!(kinds(&ev)[..2], ["utterance", "classification"]);
}

fn validator(name: &str) -> jsonschema::Validator {
    let path = root().join("../../docs").join(name);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

#[test]
fn emitted_messages_match_published_schemas() {
    let spec_schema = validator("chart-spec.schema.json");
    let msg_schema = validator("server-message.schema.json");
    let mut s = Script::new(Mode::Proactive, 10);
    let lines = [
        (5.0, ClassLabel::ExplicitQuery, "Show me a box plot of rainfall on Maui."),
        (15.0, ClassLabel::ExplicitQuery, "Show me a histogram of temperature on Oahu."),
        (25.0, ClassLabel::ExplicitQuery, "Show me a chart of the average wind speed per island for all stations."),
        (35.0, ClassLabel::ProactiveOpportunity, "So as rainfall increases, so does temperature on Maui."),
        (50.0, ClassLabel::ExplicitQuery, "Generate a chart on the solar energy for the Big Island."),
    ];
    for (t, label, text) in lines {
        s.say(t, label, text);
    }
    s.session.select_chart("c1", 60.0);
    s.session.move_resize("c1", Placement { x: 1.0, y: 2.0, w: 300.0, h: 200.0 }, 61.0);
    s.session.end(62.0);
    let log = s.session.log().to_vec();

    let mut seen = std::collections::BTreeSet::new();
    for e in &log {
        let msg = ServerMessage::from(e);
        let v = serde_json::to_value(&msg).unwrap();
        let errs: Vec<String> = msg_schema.iter_errors(&v).map(|e| e.to_string()).collect();
        assert!(errs.is_empty(), "{}: {errs:?}", msg.kind);
        if let EventKind::ChartGenerated(c) = &e.event {
            seen.insert(c.spec.chart_type);
            let spec = serde_json::to_value(&c.spec).unwrap();
            let errs: Vec<String> = spec_schema.iter_errors(&spec).map(|e| e.to_string()).collect();
            assert!(errs.is_empty(), "{}: {errs:?}", c.spec.title);
        }
    }
    assert_eq!(seen.len(), 5, "{seen:?}");
    assert!(!spec_schema.is_valid(&serde_json::json!({"schema_version": 2})));

    let text = write_log(&log);
    assert_eq!(parse_log(&text).unwrap(), log);
    assert!(log.windows(2).all(|w| w[1].seq == w[0].seq + 1));
}

#[test]
fn shipped_configs_load() {
    use prochart_core::session::SessionConfig;
    let cfg = SessionConfig::load(root().join("../../config/example.toml")).unwrap();
    assert_eq!(cfg.mode, Mode::Proactive);
    assert!(cfg.dataset.exists(), "{}", cfg.dataset.display());
    let np = SessionConfig::load(root().join("../../config/np.toml")).unwrap();
    assert_eq!(np.persona(), "Marti");
}
