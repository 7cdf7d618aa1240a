#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::Router;
use futures_util::{SinkExt, StreamExt};
use hairforge_core::protocol::{decode_frame, Event, FramePacket};
use hairforge_service::AppState;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

/// Runs `router` on its own runtime thread; returns the base URL.
pub fn spawn_http(router: Router) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

pub async fn start_server(app: AppState) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(hairforge_service::serve(Arc::new(app), listener));
    addr
}

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub async fn connect(addr: SocketAddr) -> Ws {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    ws
}

pub async fn send(ws: &mut Ws, text: &str) {
    ws.send(Message::Text(text.into())).await.unwrap();
}

pub enum Incoming {
    Event(Event),
    Frame(FramePacket),
}

pub async fn next(ws: &mut Ws, wait: Duration) -> Option<Incoming> {
    loop {
        let msg = tokio::time::timeout(wait, ws.next()).await.ok()??.ok()?;
        match msg {
            Message::Text(t) => return Some(Incoming::Event(serde_json::from_str(t.as_str()).unwrap())),
            Message::Binary(b) => return Some(Incoming::Frame(decode_frame(&b).unwrap())),
            _ => continue,
        }
    }
}

/// Skips frames and events until `pred` matches.
pub async fn wait_event(ws: &mut Ws, wait: Duration, pred: impl Fn(&Event) -> bool) -> Event {
    let deadline = tokio::time::Instant::now() + wait;
    loop {
        let left = deadline.saturating_duration_since(tokio::time::Instant::now());
        match next(ws, left).await {
            Some(Incoming::Event(ev)) if pred(&ev) => return ev,
            Some(_) => continue,
            None => panic!("no matching event within {wait:?}"),
        }
    }
}

pub async fn wait_frame(ws: &mut Ws, wait: Duration) -> FramePacket {
    let deadline = tokio::time::Instant::now() + wait;
    loop {
        let left = deadline.saturating_duration_since(tokio::time::Instant::now());
        match next(ws, left).await {
            Some(Incoming::Frame(f)) => return f,
            Some(_) => continue,
            None => panic!("no frame within {wait:?}"),
        }
    }
}
