//! Remote provider/client tests against a minimal in-process HTTP server.

#![cfg(feature = "remote")]

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use summeans::embed::{EmbeddingProvider, RemoteApiProvider};
use summeans::error::Error;
use summeans::llm::{LlmClient, RemoteChatClient, SummaryRequest};

fn read_request(stream: &mut TcpStream) -> (String, String) {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end;
    loop {
        let n = stream.read(&mut chunk).unwrap_or(0);
        if n == 0 {
            header_end = buf.len();
            break;
        }
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
            header_end = pos + 4;
            break;
        }
    }
    let head = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let content_length: usize = head
        .lines()
        .find_map(|l| {
            let (name, value) = l.split_once(':')?;
            name.eq_ignore_ascii_case("content-length")
                .then(|| value.trim().parse().ok())?
        })
        .unwrap_or(0);
    let mut body = buf[header_end..].to_vec();
    while body.len() < content_length {
        let n = stream.read(&mut chunk).unwrap_or(0);
        if n == 0 {
            break;
        }
        body.extend_from_slice(&chunk[..n]);
    }
    (head, String::from_utf8_lossy(&body).to_string())
}

/// Spawn a one-thread HTTP server; the handler maps (request index, head,
/// body) to (status, response body).
fn spawn_server<F>(handler: F) -> (String, Arc<AtomicUsize>)
where
    F: Fn(usize, &str, &str) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().expect("addr");
    let requests = Arc::new(AtomicUsize::new(0));
    let seen = requests.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let index = seen.fetch_add(1, Ordering::SeqCst);
            let (head, body) = read_request(&mut stream);
            let (status, response) = handler(index, &head, &body);
            let reason = if status == 200 { "OK" } else { "Internal Server Error" };
            let payload = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{response}",
                response.len()
            );
            let _ = stream.write_all(payload.as_bytes());
        }
    });
    (format!("http://{addr}"), requests)
}

fn embedding_response(body: &str, dim: usize) -> String {
    let parsed: serde_json::Value = serde_json::from_str(body).unwrap();
    let inputs = parsed["input"].as_array().unwrap();
    // Answer out of order on purpose; the provider must reorder by index.
    let mut data: Vec<serde_json::Value> = inputs
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let len = text.as_str().unwrap().len() as f64;
            let vector: Vec<f64> = (0..dim).map(|c| len + c as f64).collect();
            serde_json::json!({"index": i, "embedding": vector})
        })
        .collect();
    data.reverse();
    serde_json::json!({ "data": data }).to_string()
}

#[test]
fn remote_embedding_orders_batches_and_caches() {
    let (url, requests) = spawn_server(|_, _, body| (200, embedding_response(body, 4)));
    let provider = RemoteApiProvider::new(url, "test-model".into(), 4, 2, false)
        .unwrap()
        .with_retry_base_ms(1);
    let texts = ["a", "bb", "ccc", "dddd", "eeeee"];
    let vectors = provider.embed_batch(&texts).unwrap();
    assert_eq!(vectors.len(), 5);
    for (t, v) in texts.iter().zip(&vectors) {
        assert_eq!(v.values()[0], t.len() as f64, "order was not restored");
    }
    // Five texts at batch size two means three requests.
    assert_eq!(requests.load(Ordering::SeqCst), 3);

    // Identical texts come from the cache: no further requests.
    let again = provider.embed_batch(&texts).unwrap();
    assert_eq!(again, vectors);
    assert_eq!(requests.load(Ordering::SeqCst), 3);
    assert_eq!(provider.embed_one("bb").unwrap(), vectors[1]);
    assert_eq!(requests.load(Ordering::SeqCst), 3);
}

#[test]
fn remote_embedding_normalizes_when_requested() {
    let (url, _) = spawn_server(|_, _, body| (200, embedding_response(body, 3)));
    let provider = RemoteApiProvider::new(url, "m".into(), 3, 16, true)
        .unwrap()
        .with_retry_base_ms(1);
    let v = provider.embed_one("hello").unwrap();
    assert!((v.norm() - 1.0).abs() < 1e-9);
}

#[test]
fn remote_embedding_fails_after_retries_with_attempt_count() {
    let (url, requests) = spawn_server(|_, _, _| (500, "{}".to_string()));
    let provider = RemoteApiProvider::new(url, "m".into(), 4, 8, true)
        .unwrap()
        .with_retry_base_ms(1);
    let err = provider.embed_one("text").unwrap_err();
    match err {
        Error::Transport { attempts, .. } => assert_eq!(attempts, 3),
        other => panic!("unexpected error {other}"),
    }
    assert_eq!(requests.load(Ordering::SeqCst), 3);
}

#[test]
fn remote_embedding_recovers_within_retry_budget() {
    let (url, requests) = spawn_server(|index, _, body| {
        if index < 2 {
            (500, "{}".to_string())
        } else {
            (200, embedding_response(body, 2))
        }
    });
    let provider = RemoteApiProvider::new(url, "m".into(), 2, 8, false)
        .unwrap()
        .with_retry_base_ms(1);
    let v = provider.embed_one("xy").unwrap();
    assert_eq!(v.values(), &[2.0, 3.0]);
    assert_eq!(requests.load(Ordering::SeqCst), 3);
}

#[test]
fn remote_embedding_rejects_wrong_dim() {
    let (url, _) = spawn_server(|_, _, body| (200, embedding_response(body, 5)));
    let provider = RemoteApiProvider::new(url, "m".into(), 8, 4, true)
        .unwrap()
        .with_retry_base_ms(1);
    let err = provider.embed_one("text").unwrap_err();
    assert!(matches!(err, Error::RemoteDim { expected: 8, got: 5 }));
}

#[test]
fn remote_chat_round_trip_and_retries() {
    let (url, requests) = spawn_server(|index, _, body| {
        if index == 0 {
            return (500, "{}".to_string());
        }
        let parsed: serde_json::Value = serde_json::from_str(body).unwrap();
        assert_eq!(parsed["model"], "chat-model");
        assert_eq!(parsed["messages"][0]["role"], "user");
        let prompt = parsed["messages"][0]["content"].as_str().unwrap();
        assert!(prompt.contains("1. first document"));
        let response = serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": "a concise summary"}}]
        });
        (200, response.to_string())
    });
    let client = RemoteChatClient::new(url, "chat-model".into(), 0.0, 256, 30, 3)
        .unwrap()
        .with_retry_base_ms(1);
    let request = SummaryRequest {
        instruction: "Summarize:",
        prompt: "Summarize:\n\n1. first document",
        sampled: &[],
    };
    let text = client.complete(&request).unwrap();
    assert_eq!(text, "a concise summary");
    assert_eq!(requests.load(Ordering::SeqCst), 2);
}

#[test]
fn remote_chat_reports_exhausted_attempts() {
    let (url, requests) = spawn_server(|_, _, _| (500, "{}".to_string()));
    let client = RemoteChatClient::new(url, "chat-model".into(), 0.0, 256, 30, 2)
        .unwrap()
        .with_retry_base_ms(1);
    let request = SummaryRequest {
        instruction: "i",
        prompt: "p",
        sampled: &[],
    };
    let err = client.complete(&request).unwrap_err();
    match err {
        Error::LlmTransport { attempts, .. } => assert_eq!(attempts, 2),
        other => panic!("unexpected error {other}"),
    }
    assert_eq!(requests.load(Ordering::SeqCst), 2);
}
