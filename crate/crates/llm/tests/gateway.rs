use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use demograph_llm::{
    write_entry, CacheEntry, ChatRequest, ChatResponse, Gateway, GatewayError, RetryPolicy, Usage,
};

/// Minimal HTTP/1.1 server answering each request with the next canned
/// `(status, extra_headers, body)`; the last reply repeats.
struct MockServer {
    url: String,
    hits: Arc<AtomicUsize>,
    bodies: Arc<std::sync::Mutex<Vec<String>>>,
}

impl MockServer {
    fn start(replies: Vec<(u16, &'static str, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(std::sync::Mutex::new(Vec::new()));
        let (h, b) = (hits.clone(), bodies.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let n = h.fetch_add(1, Ordering::SeqCst);
                let reply = replies[n.min(replies.len() - 1)].clone();
                let body = serve(stream, reply);
                b.lock().unwrap().push(body);
            }
        });
        Self { url, hits, bodies }
    }

    fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn serve(mut stream: TcpStream, (status, headers, body): (u16, &str, String)) -> String {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            break;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            len = v.trim().parse().unwrap_or(0);
        }
        if line == "\r\n" {
            break;
        }
    }
    let mut buf = vec![0u8; len];
    reader.read_exact(&mut buf).unwrap();
    let reason = match status {
        200 => "OK",
        429 => "Too Many Requests",
        _ => "Error",
    };
    let resp = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\n{headers}Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(resp.as_bytes()).unwrap();
    String::from_utf8(buf).unwrap()
}

fn ok_body(text: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 7}
    })
    .to_string()
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        max_attempts: 5,
        base_delay: Duration::from_millis(1),
        max_delay: Duration::from_millis(4),
    }
}

#[test]
fn replay_hit_returns_fixture_text() {
    let dir = tempfile::tempdir().unwrap();
    let req = ChatRequest::user("gpt", "give me triples", 0.7);
    let resp = ChatResponse {
        text: "[A, relates_to, B]".into(),
        usage: Usage::default(),
        cached: false,
    };
    write_entry(dir.path(), &CacheEntry::new(&req, &resp)).unwrap();

    let gw = Gateway::replay(dir.path());
    let out = gw.complete(&req).unwrap();
    assert_eq!(out.text, "[A, relates_to, B]");
    assert!(out.cached);
}

#[test]
fn replay_miss_names_digest() {
    let dir = tempfile::tempdir().unwrap();
    let req = ChatRequest::user("gpt", "unknown", 0.7);
    let gw = Gateway::replay(dir.path());
    match gw.complete(&req) {
        Err(GatewayError::FixtureMissing { digest }) => assert_eq!(digest, req.digest()),
        other => panic!("expected fixture miss, got {other:?}"),
    }
}

#[test]
fn live_request_is_memoized() {
    let server = MockServer::start(vec![(200, "", ok_body("[x, y, z]"))]);
    let gw = Gateway::live(&server.url, Some("secret".into()));
    let req = ChatRequest::user("gpt", "prompt", 0.7);

    let first = gw.complete(&req).unwrap();
    let second = gw.complete(&req).unwrap();
    assert_eq!(first.text, "[x, y, z]");
    assert!(!first.cached);
    assert!(second.cached);
    assert_eq!(server.hits(), 1);
    let usage = gw.usage();
    assert_eq!(usage.network_calls, 1);
    assert_eq!(usage.prompt_tokens, 11);

    let sent: serde_json::Value = serde_json::from_str(&server.bodies.lock().unwrap()[0]).unwrap();
    assert_eq!(sent["model"], "gpt");
    assert_eq!(sent["temperature"], 0.7);
    assert_eq!(sent["messages"][0]["role"], "user");
}

#[test]
fn disk_cache_miss_then_hit() {
    let server = MockServer::start(vec![(200, "", ok_body("[a, r, b]"))]);
    let cache = tempfile::tempdir().unwrap();
    let req = ChatRequest::user("gpt", "prompt", 0.7);

    let gw = Gateway::live(&server.url, None);
    gw.complete_cached(&req, cache.path()).unwrap();
    assert_eq!(server.hits(), 1);
    assert_eq!(std::fs::read_dir(cache.path()).unwrap().count(), 1);

    // fresh gateway: no in-process memo, so a hit must come from disk
    let gw = Gateway::live(&server.url, None);
    let warm = gw.complete_cached(&req, cache.path()).unwrap();
    assert!(warm.cached);
    assert_eq!(warm.text, "[a, r, b]");
    assert_eq!(server.hits(), 1);
}

#[test]
fn temperature_yields_distinct_cache_files() {
    let server = MockServer::start(vec![(200, "", ok_body("[a, r, b]"))]);
    let cache = tempfile::tempdir().unwrap();
    let gw = Gateway::live(&server.url, None);
    gw.complete_cached(&ChatRequest::user("gpt", "p", 0.7), cache.path())
        .unwrap();
    gw.complete_cached(&ChatRequest::user("gpt", "p", 0.2), cache.path())
        .unwrap();
    assert_eq!(std::fs::read_dir(cache.path()).unwrap().count(), 2);
    assert_eq!(server.hits(), 2);
}

#[test]
fn corrupt_cache_entry_is_regenerated() {
    let server = MockServer::start(vec![(200, "", ok_body("fresh"))]);
    let cache = tempfile::tempdir().unwrap();
    let req = ChatRequest::user("gpt", "p", 0.7);
    let path = cache.path().join(format!("{}.json", req.digest()));
    std::fs::write(&path, "garbage").unwrap();

    let gw = Gateway::live(&server.url, None);
    let out = gw.complete_cached(&req, cache.path()).unwrap();
    assert_eq!(out.text, "fresh");
    assert_eq!(server.hits(), 1);
    let entry: CacheEntry = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(entry.response_text, "fresh");
}

#[test]
fn rate_limit_surfaces_retry_after() {
    let server = MockServer::start(vec![(429, "Retry-After: 17\r\n", "{}".into())]);
    let gw = Gateway::live(&server.url, None).with_retry(fast_retry());
    match gw.complete(&ChatRequest::user("gpt", "p", 0.7)) {
        Err(GatewayError::RateLimited { retry_after }) => {
            assert_eq!(retry_after, Some(Duration::from_secs(17)))
        }
        other => panic!("expected rate limit, got {other:?}"),
    }
    assert_eq!(server.hits(), 1);
}

#[test]
fn server_errors_are_retried() {
    let server = MockServer::start(vec![
        (500, "", "boom".into()),
        (503, "", "busy".into()),
        (200, "", ok_body("done")),
    ]);
    let gw = Gateway::live(&server.url, None).with_retry(fast_retry());
    let out = gw.complete(&ChatRequest::user("gpt", "p", 0.7)).unwrap();
    assert_eq!(out.text, "done");
    assert_eq!(server.hits(), 3);
}

#[test]
fn transport_failure_gives_up_after_five_attempts() {
    // bind then drop so the port is closed
    let addr = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap();
    let gw = Gateway::live(format!("http://{addr}"), None).with_retry(fast_retry());
    match gw.complete(&ChatRequest::user("gpt", "p", 0.7)) {
        Err(GatewayError::Transport { attempts, .. }) => assert_eq!(attempts, 5),
        other => panic!("expected transport error, got {other:?}"),
    }
}

#[test]
fn invalid_request_rejected_before_network() {
    let server = MockServer::start(vec![(200, "", ok_body("x"))]);
    let gw = Gateway::live(&server.url, None);
    let mut req = ChatRequest::user("gpt", "p", 0.7);
    req.messages[0].content.clear();
    assert!(matches!(
        gw.complete(&req),
        Err(GatewayError::InvalidRequest(_))
    ));
    assert_eq!(server.hits(), 0);
}

#[test]
fn concurrent_callers_share_gateway() {
    let server = MockServer::start(vec![(200, "", ok_body("ok"))]);
    let gw = Arc::new(Gateway::live(&server.url, None).with_max_in_flight(2));
    let handles: Vec<_> = (0..6)
        .map(|i| {
            let gw = gw.clone();
            thread::spawn(move || {
                gw.complete(&ChatRequest::user("gpt", format!("p{i}"), 0.7))
                    .unwrap()
            })
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap().text, "ok");
    }
    assert_eq!(server.hits(), 6);
}
