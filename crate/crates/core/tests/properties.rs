use std::collections::BTreeMap;

use chrono::NaiveDate;
use proptest::prelude::*;

use prochart_core::classifier::model::softmax;
use prochart_core::data::{Aggregation, Attribute, ClimateStore, DataQuery, DateRange, GroupBy, RowKey};
use prochart_core::history::normalize_title;
use prochart_core::present::{five_number, histogram};
use prochart_core::segment::{segment, AudioEvent};

const HEADER: &str = "station_id,station_name,island,latitude,longitude,date,attribute,value\n";
const ISLANDS: [&str; 5] = ["Kauai", "Oahu", "Molokai", "Maui", "Hawaii"];

fn store_from(rows: &[(u8, u8, u8, f64)]) -> (ClimateStore, Vec<(String, NaiveDate, f64)>) {
    let mut body = String::from(HEADER);
    let mut seen = BTreeMap::new();
    for &(station, day, attr, value) in rows {
        let date = NaiveDate::from_ymd_opt(2024, 1 + u32::from(day) / 28, 1 + u32::from(day) % 28).unwrap();
        let attr = Attribute::ALL[usize::from(attr) % 5];
        seen.insert((station, date, attr), value);
    }
    let mut rainfall = Vec::new();
    for ((station, date, attr), value) in &seen {
        let island = ISLANDS[usize::from(*station) % 5];
        body.push_str(&format!("{station},S{station},{island},20.0,-157.0,{date},{},{value}\n", attr.as_str()));
        if *attr == Attribute::Rainfall {
            rainfall.push((station.to_string(), *date, *value));
        }
    }
    let store = ClimateStore::ingest_reader(body.as_bytes(), DateRange::default_window()).unwrap();
    (store, rainfall)
}

fn rows() -> impl Strategy<Value = Vec<(u8, u8, u8, f64)>> {
    prop::collection::vec((0u8..6, 0u8..100, 0u8..5, -50.0f64..50.0), 1..80)
}

proptest! {
    #[test]
    fn aggregates_match_brute_force(rows in rows(), agg in 0usize..4) {
        let (store, rainfall) = store_from(&rows);
        prop_assume!(!rainfall.is_empty());
        let aggregation = [Aggregation::Mean, Aggregation::Min, Aggregation::Max, Aggregation::Sum][agg];
        let q = DataQuery {
            aggregation,
            group_by: Some(GroupBy::Station),
            ..DataQuery::raw([Attribute::Rainfall], store.station_ids(), store.window())
        };
        let table = store.fetch(&q).unwrap();
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (s, _, v) in &rainfall {
            groups.entry(s.clone()).or_default().push(*v);
        }
        prop_assert_eq!(table.len(), groups.len());
        for row in &table.rows {
            let RowKey::Group(label) = &row.key else { panic!("date key") };
            let v = &groups[label];
            let want = match aggregation {
                Aggregation::Mean => v.iter().sum::<f64>() / v.len() as f64,
                Aggregation::Min => v.iter().cloned().fold(f64::INFINITY, f64::min),
                Aggregation::Max => v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                _ => v.iter().sum(),
            };
            prop_assert!((row.value - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
        let raw = store.fetch(&DataQuery::raw([Attribute::Rainfall], store.station_ids(), store.window())).unwrap();
        prop_assert_eq!(raw.len(), rainfall.len());
    }

    #[test]
    fn normalize_title_idempotent(s in "\\PC{0,40}") {
        let once = normalize_title(&s);
        prop_assert_eq!(normalize_title(&once), once);
    }

    #[test]
    fn softmax_is_a_distribution(a in -500.0f64..500.0, b in -500.0f64..500.0, c in -500.0f64..500.0) {
        let p = softmax(&[a, b, c]);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted = softmax(&[a + 7.0, b + 7.0, c + 7.0]);
        for (x, y) in p.iter().zip(shifted) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_scale_invariant(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -50.0f64..50.0, k in 0.1f64..10.0) {
        let arg = |l: [f64; 3]| {
            let p = softmax(&l);
            (0..3).fold(0, |best, i| if p[i] > p[best] { i } else { best })
        };
        let raw = [a, b, c];
        prop_assume!((a - b).abs() > 1e-6 && (b - c).abs() > 1e-6 && (a - c).abs() > 1e-6);
        prop_assert_eq!(arg(raw), arg(raw.map(|z| z * k)));
    }

    #[test]
    fn span_count_equals_gap_oracle(steps in prop::collection::vec((1u8..10, 0u8..10), 1..40)) {
        let mut t = 0.0;
        let mut events = Vec::new();
        let mut closing_gaps = 0;
        for (i, (dur, gap)) in steps.iter().enumerate() {
            let gap = f64::from(*gap) * 0.25;
            if i > 0 {
                t += gap;
                if gap >= 1.5 {
                    closing_gaps += 1;
                }
            }
            let end = t + f64::from(*dur) * 0.25;
            events.push(AudioEvent::text("A", t, end, "w"));
            t = end;
        }
        prop_assert_eq!(segment(&events, 1.5).unwrap().len(), closing_gaps + 1);
    }

    #[test]
    fn five_number_is_ordered(v in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        let f = five_number(&v).unwrap();
        prop_assert!(f.windows(2).all(|w| w[0] <= w[1]));
        let bins = histogram(&v);
        prop_assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), v.len());
        prop_assert!(bins.len() <= 30);
    }
}
