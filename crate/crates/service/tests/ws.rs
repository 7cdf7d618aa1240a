mod common;

use std::sync::Arc;
use std::time::Duration;

use base64::Engine;
use common::*;
use futures_util::{SinkExt, StreamExt};
use hairforge_core::fixtures::fixture_database;
use hairforge_core::protocol::{ErrorCode, Event, COMMAND_TYPES};
use hairforge_core::retrieval::{build_index, EmbeddingProvider, HashingEmbedder};
use hairforge_service::generation::fixture_png;
use hairforge_service::{AppState, MockBackend};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use tokio_tungstenite::tungstenite::Message;

const WAIT: Duration = Duration::from_secs(20);

fn app_with_backend(backend: MockBackend) -> AppState {
    let styles = fixture_database();
    let embedder: Arc<dyn EmbeddingProvider> = Arc::new(HashingEmbedder::default());
    let captions: Vec<_> = styles.iter().map(|h| (h.id.clone(), h.caption.clone())).collect();
    let index = build_index(&captions, embedder.as_ref()).unwrap();
    AppState::assemble(styles, index, embedder, Arc::new(backend), None).unwrap()
}

fn first_style_id() -> String {
    fixture_database()[0].id.clone()
}

fn is_ack(ev: &Event, cmd: &str) -> bool {
    matches!(ev, Event::Ack { command, .. } if command == cmd)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn http_endpoints_answer() {
    let addr = start_server(AppState::fixtures()).await;
    let base = format!("http://{addr}");
    let (health, styles, thumb, missing) = tokio::task::spawn_blocking(move || {
        let get = |path: &str| reqwest::blocking::get(format!("{base}{path}")).unwrap();
        let health: serde_json::Value = serde_json::from_slice(&get("/healthz").bytes().unwrap()).unwrap();
        let styles: serde_json::Value = serde_json::from_slice(&get("/styles").bytes().unwrap()).unwrap();
        let id = styles[0]["id"].as_str().unwrap().to_string();
        let thumb = get(&format!("/styles/{id}/thumbnail"));
        let thumb = (thumb.status().as_u16(), thumb.bytes().unwrap().to_vec());
        let missing = get("/styles/nope/thumbnail").status().as_u16();
        (health, styles, thumb, missing)
    })
    .await
    .unwrap();
    assert_eq!(health["status"], "ok");
    assert_eq!(health["styles"].as_u64().unwrap() as usize, fixture_database().len());
    assert_eq!(styles.as_array().unwrap().len(), fixture_database().len());
    assert_eq!(thumb.0, 200);
    assert!(thumb.1.starts_with(b"\x89PNG"));
    assert_eq!(missing, 404);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn selecting_a_style_streams_strided_frames() {
    let addr = start_server(AppState::fixtures()).await;
    let mut ws = connect(addr).await;
    let id = first_style_id();
    let strands = fixture_database()[0].strands.len();
    send(&mut ws, &format!(r#"{{"type":"select_style","style_id":"{id}","id":1}}"#)).await;
    let ack = wait_event(&mut ws, WAIT, |e| is_ack(e, "select_style")).await;
    let Event::Ack { id: Some(1), detail: Some(detail), .. } = ack else { panic!("{ack:?}") };
    assert_eq!(detail["strands"].as_u64().unwrap() as usize, strands);
    assert_eq!(wait_frame(&mut ws, WAIT).await.strands.len(), strands);

    send(&mut ws, r#"{"type":"set_stride","stride":7}"#).await;
    wait_event(&mut ws, WAIT, |e| is_ack(e, "set_stride")).await;
    let f = wait_frame(&mut ws, WAIT).await;
    assert_eq!(f.strands.len(), strands.div_ceil(7));
    assert!(f.strands.iter().flatten().flatten().all(|c| c.is_finite()));

    send(&mut ws, r#"{"type":"set_stride","stride":0,"id":9}"#).await;
    let e = wait_event(&mut ws, WAIT, |e| matches!(e, Event::Error { .. })).await;
    assert!(matches!(e, Event::Error { code: ErrorCode::InvalidParams, id: Some(9), .. }));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn grooming_commands_report_errors_and_results() {
    let addr = start_server(AppState::fixtures()).await;
    let mut ws = connect(addr).await;
    send(&mut ws, r#"{"type":"grab_move","target":[0,0,0],"id":1}"#).await;
    let e = wait_event(&mut ws, WAIT, |_| true).await;
    assert!(matches!(e, Event::Error { code: ErrorCode::NoGrab, id: Some(1), .. }), "{e:?}");
    send(&mut ws, r#"{"type":"trim","region":{"kind":"sphere","center":[0,0,0],"radius":5},"id":2}"#).await;
    let e = wait_event(&mut ws, WAIT, |_| true).await;
    assert!(matches!(e, Event::Error { code: ErrorCode::NoStyle, id: Some(2), .. }), "{e:?}");

    send(&mut ws, &format!(r#"{{"type":"select_style","style_id":"{}"}}"#, first_style_id())).await;
    wait_event(&mut ws, WAIT, |e| is_ack(e, "select_style")).await;
    send(&mut ws, r#"{"type":"sim_control","action":"stop"}"#).await;
    wait_event(&mut ws, WAIT, |e| is_ack(e, "sim_control")).await;

    // A ray straight down through the crown always hits hair.
    send(&mut ws, r#"{"type":"grab_begin","origin":[0,40,0],"dir":[0,-1,0],"radius":3}"#).await;
    let ack = wait_event(&mut ws, WAIT, |e| is_ack(e, "grab_begin") || matches!(e, Event::Error { .. })).await;
    let Event::Ack { detail: Some(d), .. } = ack else { panic!("{ack:?}") };
    assert!(d["particles"].as_u64().unwrap() > 0);
    send(&mut ws, r#"{"type":"grab_begin","origin":[500,0,0],"dir":[1,0,0],"radius":1}"#).await;
    let e = wait_event(&mut ws, WAIT, |e| matches!(e, Event::Error { .. })).await;
    assert!(matches!(e, Event::Error { code: ErrorCode::EmptyGrab, .. }));

    send(&mut ws, r#"{"type":"trim","region":{"kind":"below_plane","point":[0,-5,0],"normal":[0,1,0]}}"#).await;
    let ack = wait_event(&mut ws, WAIT, |e| is_ack(e, "trim")).await;
    let Event::Ack { detail: Some(d), .. } = ack else { panic!() };
    assert!(d["removed"].as_u64().unwrap() > 0);

    send(&mut ws, r#"{"type":"set_params","sim":{"substepz":3},"id":5}"#).await;
    let e = wait_event(&mut ws, WAIT, |e| matches!(e, Event::Error { .. })).await;
    assert!(matches!(e, Event::Error { code: ErrorCode::InvalidParams, id: Some(5), .. }));
    send(&mut ws, r#"{"type":"set_params","sim":{"substeps":5,"stiffness":{"bend":4000}}}"#).await;
    wait_event(&mut ws, WAIT, |e| is_ack(e, "set_params")).await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn growing_on_a_bald_head_creates_a_simulation() {
    let addr = start_server(AppState::fixtures()).await;
    let mut ws = connect(addr).await;
    send(&mut ws, r#"{"type":"grow","triangle_ids":[0,1,2,3,4,5,6,7],"count":50,"seed":3}"#).await;
    let ack = wait_event(&mut ws, WAIT, |e| is_ack(e, "grow") || matches!(e, Event::Error { .. })).await;
    let Event::Ack { detail: Some(d), .. } = ack else { panic!("{ack:?}") };
    assert_eq!(d["grown"], 50);
    assert_eq!(wait_frame(&mut ws, WAIT).await.strands.len(), 50);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn chat_routes_to_retrieval_and_to_the_loop() {
    let addr = start_server(AppState::fixtures()).await;
    let mut ws = connect(addr).await;
    send(&mut ws, r#"{"type":"chat","text":"long curly hair","id":4}"#).await;
    let ev = wait_event(&mut ws, WAIT, |_| true).await;
    let Event::Candidates { entries, .. } = ev else { panic!("{ev:?}") };
    assert_eq!(entries.len(), 3);
    assert!(entries.windows(2).all(|w| w[0].score >= w[1].score));
    assert!(entries.iter().all(|c| c.thumbnail.ends_with("/thumbnail")));

    send(&mut ws, r#"{"type":"chat","text":"add some wind","id":5}"#).await;
    let ev = wait_event(&mut ws, WAIT, |_| true).await;
    assert!(matches!(ev, Event::Ack { ref command, id: Some(5), .. } if command == "wind"), "{ev:?}");
    send(&mut ws, r#"{"type":"chat","text":"   ","id":6}"#).await;
    let ev = wait_event(&mut ws, WAIT, |_| true).await;
    assert!(matches!(ev, Event::Error { code: ErrorCode::EmptyText, id: Some(6), .. }));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn renders_run_in_order_one_at_a_time() {
    let addr = start_server(app_with_backend(MockBackend::with_delay(Duration::from_millis(400)))).await;
    let mut ws = connect(addr).await;
    send(&mut ws, &format!(r#"{{"type":"select_style","style_id":"{}"}}"#, first_style_id())).await;
    wait_event(&mut ws, WAIT, |e| is_ack(e, "select_style")).await;
    send(&mut ws, r#"{"type":"render","attributes":{"hair_color":"red"},"seed":1}"#).await;
    send(&mut ws, r#"{"type":"render","attributes":{"hair_color":"blue"},"seed":2}"#).await;
    let mut acks = Vec::new();
    let mut done = Vec::new();
    while done.len() < 2 {
        match wait_event(&mut ws, WAIT, |e| is_ack(e, "render") || matches!(e, Event::RenderDone { .. })).await {
            Event::Ack { detail: Some(d), .. } => acks.push((d["job"].as_u64().unwrap(), d["queue_length"].as_u64().unwrap())),
            Event::RenderDone { job, prompt, image, .. } => {
                let png = base64::engine::general_purpose::STANDARD.decode(image).unwrap();
                assert_eq!(png, fixture_png());
                done.push((job, prompt));
            }
            _ => unreachable!(),
        }
    }
    assert_eq!(acks, vec![(1, 0), (2, 1)]);
    assert_eq!(done, vec![(1, "red".to_string()), (2, "blue".to_string())]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn render_failures_become_error_events() {
    let addr = start_server(app_with_backend(MockBackend::unavailable())).await;
    let mut ws = connect(addr).await;
    send(&mut ws, r#"{"type":"render","attributes":{"misc":"x"},"id":1}"#).await;
    let e = wait_event(&mut ws, WAIT, |_| true).await;
    assert!(matches!(e, Event::Error { code: ErrorCode::NoStyle, id: Some(1), .. }));
    send(&mut ws, &format!(r#"{{"type":"select_style","style_id":"{}"}}"#, first_style_id())).await;
    send(&mut ws, r#"{"type":"render","attributes":{}}"#).await;
    let e = wait_event(&mut ws, WAIT, |e| matches!(e, Event::Error { .. })).await;
    assert!(matches!(e, Event::Error { code: ErrorCode::InvalidParams, .. }), "{e:?}");
    send(&mut ws, r#"{"type":"render","attributes":{"misc":"x"}}"#).await;
    let e = wait_event(&mut ws, WAIT, |e| matches!(e, Event::Error { .. })).await;
    assert!(matches!(e, Event::Error { code: ErrorCode::ServiceUnavailable, .. }), "{e:?}");
}

fn fuzz_message(rng: &mut Xoshiro256PlusPlus) -> Message {
    const VALUES: [&str; 8] = ["null", "1", "-3.5", "\"x\"", "[]", "{}", "[1,2,3]", "true"];
    const KEYS: [&str; 8] = ["text", "style_id", "action", "stride", "region", "target", "enabled", "triangle_ids"];
    match rng.random_range(0..6) {
        0 => {
            let len = rng.random_range(0..64);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            Message::Text(String::from_utf8_lossy(&bytes).into_owned().into())
        }
        1 => {
            let full = r#"{"type":"trim","region":{"kind":"sphere","center":[0,0,0],"radius":3},"id":1}"#;
            Message::Text(full[..rng.random_range(0..full.len())].to_string().into())
        }
        2 => {
            let ty = COMMAND_TYPES[rng.random_range(0..COMMAND_TYPES.len())];
            let mut fields = vec![format!("\"type\":\"{ty}\"")];
            for _ in 0..rng.random_range(0..3) {
                let k = KEYS[rng.random_range(0..KEYS.len())];
                let v = VALUES[rng.random_range(0..VALUES.len())];
                fields.push(format!("\"{k}\":{v}"));
            }
            Message::Text(format!("{{{}}}", fields.join(",")).into())
        }
        3 => Message::Text(format!(r#"{{"type":"t{}"}}"#, rng.random::<u16>()).into()),
        4 => Message::Text(VALUES[rng.random_range(0..VALUES.len())].to_string().into()),
        _ => {
            let bytes: Vec<u8> = (0..rng.random_range(1..32)).map(|_| rng.random()).collect();
            Message::Binary(bytes.into())
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn ten_thousand_malformed_messages_each_get_one_reply() {
    const N: usize = 10_000;
    let addr = start_server(AppState::fixtures()).await;
    let (mut tx, mut rx) = connect(addr).await.split();
    let reader = tokio::spawn(async move {
        let mut replies = 0usize;
        let mut sentinel = false;
        while let Ok(Some(Ok(msg))) = tokio::time::timeout(Duration::from_secs(30), rx.next()).await {
            if let Message::Text(t) = msg {
                let ev: Event = serde_json::from_str(t.as_str()).unwrap();
                if matches!(ev, Event::SimStatus { .. }) {
                    continue;
                }
                replies += 1;
                if matches!(ev, Event::Ack { id: Some(424_242), .. }) {
                    sentinel = true;
                    break;
                }
            }
        }
        (replies, sentinel)
    });
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
    for _ in 0..N {
        tx.send(fuzz_message(&mut rng)).await.unwrap();
    }
    tx.send(Message::Text(r#"{"type":"set_stride","stride":1,"id":424242}"#.into())).await.unwrap();
    let (replies, sentinel) = reader.await.unwrap();
    assert!(sentinel, "socket closed or stalled after {replies} replies");
    assert_eq!(replies, N + 1);
}
