//! Bearer-auth header checks for the remote clients. This file keeps its
//! own test binary because it mutates process environment variables.

#![cfg(feature = "remote")]

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;

use summeans::embed::{EmbeddingProvider, RemoteApiProvider, EMBED_API_KEY};
use summeans::llm::{LlmClient, RemoteChatClient, SummaryRequest, LLM_API_KEY};

fn serve_once(expected_header: &'static str) -> (String, mpsc::Receiver<bool>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut buf = Vec::new();
        let mut chunk = [0u8; 1024];
        loop {
            let n = stream.read(&mut chunk).unwrap_or(0);
            if n == 0 {
                break;
            }
            buf.extend_from_slice(&chunk[..n]);
            if buf.windows(4).any(|w| w == b"\r\n\r\n") {
                break;
            }
        }
        let head = String::from_utf8_lossy(&buf);
        let authorized = head
            .lines()
            .any(|l| l.to_ascii_lowercase().starts_with("authorization:") && l.contains(expected_header));
        let _ = tx.send(authorized);
        let body = r#"{"data": [{"index": 0, "embedding": [1.0, 0.0]}], "choices": [{"message": {"content": "ok"}}]}"#;
        let response = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        let _ = stream.write_all(response.as_bytes());
    });
    (format!("http://{addr}"), rx)
}

#[test]
fn remote_clients_send_bearer_tokens_from_env() {
    std::env::set_var(EMBED_API_KEY, "embed-secret-token");
    std::env::set_var(LLM_API_KEY, "chat-secret-token");

    let (url, rx) = serve_once("embed-secret-token");
    let provider = RemoteApiProvider::new(url, "m".into(), 2, 8, false)
        .unwrap()
        .with_retry_base_ms(1);
    provider.embed_one("text").unwrap();
    assert!(rx.recv().unwrap(), "embedding request lacked the bearer token");

    let (url, rx) = serve_once("chat-secret-token");
    let client = RemoteChatClient::new(url, "m".into(), 0.0, 64, 30, 1)
        .unwrap()
        .with_retry_base_ms(1);
    let request = SummaryRequest {
        instruction: "i",
        prompt: "p",
        sampled: &[],
    };
    client.complete(&request).unwrap();
    assert!(rx.recv().unwrap(), "chat request lacked the bearer token");
}
