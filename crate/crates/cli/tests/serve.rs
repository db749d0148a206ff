use std::process::Stdio;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::process::Command;
use tokio_tungstenite::tungstenite::Message;

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn next_json(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(30), ws.next())
            .await
            .expect("server went quiet")
            .expect("stream ended")
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

async fn until(ws: &mut Ws, kind: &str) -> (Vec<Value>, Value) {
    let mut seen = Vec::new();
    loop {
        let v = next_json(ws).await;
        if v["type"] == kind {
            return (seen, v);
        }
        seen.push(v);
    }
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn websocket_session() {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../config/example.toml");
    let mut child = Command::new(env!("CARGO_BIN_EXE_prochart"))
        .args(["serve", "--mode", "NP", "--addr", "127.0.0.1:0", "--config", config])
        .stdout(Stdio::piped())
        .kill_on_drop(true)
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let line = tokio::time::timeout(Duration::from_secs(120), lines.next_line())
        .await
        .unwrap()
        .unwrap()
        .unwrap();
    let addr = line.strip_prefix("listening on ").unwrap().to_string();
    let url = format!("ws://{addr}/ws");

    let (mut ws, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let start = next_json(&mut ws).await;
    assert_eq!(start["type"], "session_start");
    assert_eq!(start["seq"], 1);
    assert_eq!(start["payload"]["persona"], "Marti");

    send(
        &mut ws,
        json!({"type": "utterance_text", "payload": {"speaker": "A", "text": "Generate a chart on the solar energy for the Big Island."}}),
    )
    .await;
    let (before, chart) = until(&mut ws, "chart_generated").await;
    let kinds: Vec<&str> = before.iter().map(|v| v["type"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["utterance", "classification", "refined_query", "plan"]);
    let spec_id = chart["payload"]["spec"]["spec_id"].as_str().unwrap().to_string();
    assert_eq!(chart["payload"]["conveyor"], json!([spec_id]));

    send(&mut ws, json!({"type": "select_chart", "payload": {"spec_id": spec_id}})).await;
    let (_, sel) = until(&mut ws, "chart_selected").await;
    assert_eq!(sel["payload"]["repeated"], false);

    send(&mut ws, json!({"type": "launch_rockets", "payload": {}})).await;
    let (_, err) = until(&mut ws, "error").await;
    assert_eq!(err["payload"]["stage"], "protocol");
    let last_seq = err["seq"].as_u64().unwrap();

    let (mut late, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let mut seqs = Vec::new();
    while seqs.last() != Some(&last_seq) {
        seqs.push(next_json(&mut late).await["seq"].as_u64().unwrap());
    }
    assert_eq!(seqs, (1..=last_seq).collect::<Vec<_>>());

    send(&mut late, json!({"type": "delete_chart", "payload": {"spec_id": spec_id}})).await;
    let (_, del) = until(&mut ws, "chart_deleted").await;
    assert_eq!(del["seq"].as_u64().unwrap(), last_seq + 1);
    child.kill().await.unwrap();
}
