//! Retry, backoff, and auth behavior of the remote backend against a local
//! stub server.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use aim_forge::remote::RemoteBackend;
use aim_forge_core::backend::{
    Backend, BackendError, ChatRequest, FinishReason, RoleTag, SamplingParams,
};

const SUCCESS_BODY: &str = r#"{
  "choices": [{"message": {"role": "assistant", "content": "VERDICT: ACCEPT"}, "finish_reason": "stop"}],
  "usage": {"prompt_tokens": 120, "completion_tokens": 8}
}"#;

/// Serves canned status codes in order (the last repeats), counting hits.
fn stub_server(plan: Vec<u16>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let hits_clone = Arc::clone(&hits);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let hit = hits_clone.fetch_add(1, Ordering::SeqCst);
            let status = *plan.get(hit).or(plan.last()).unwrap_or(&500);

            // Drain the request: headers, then content-length body bytes.
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            let header_end = loop {
                match stream.read(&mut chunk) {
                    Ok(0) => break None,
                    Ok(n) => {
                        buf.extend_from_slice(&chunk[..n]);
                        if let Some(pos) = find_header_end(&buf) {
                            break Some(pos);
                        }
                    }
                    Err(_) => break None,
                }
            };
            if let Some(pos) = header_end {
                let headers = String::from_utf8_lossy(&buf[..pos]).to_ascii_lowercase();
                let content_length = headers
                    .lines()
                    .find_map(|l| l.strip_prefix("content-length:"))
                    .and_then(|v| v.trim().parse::<usize>().ok())
                    .unwrap_or(0);
                let mut body_read = buf.len() - pos - 4;
                while body_read < content_length {
                    match stream.read(&mut chunk) {
                        Ok(0) => break,
                        Ok(n) => body_read += n,
                        Err(_) => break,
                    }
                }
            }

            let (reason, body) = match status {
                200 => ("OK", SUCCESS_BODY),
                401 => ("Unauthorized", "{\"error\": \"bad key\"}"),
                429 => ("Too Many Requests", "slow down"),
                _ => ("Internal Server Error", "boom"),
            };
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    (format!("http://{addr}/v1/chat/completions"), hits)
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn request() -> ChatRequest {
    ChatRequest {
        system_prompt: "system".to_string(),
        user_prompt: "review this".to_string(),
        sampling: SamplingParams {
            temperature: 0.2,
            max_output_len: 128,
        },
        role_tag: RoleTag::Verifier,
        attempt: 0,
    }
}

#[test]
fn two_transient_failures_then_success_with_backoff() {
    let (endpoint, hits) = stub_server(vec![500, 503, 200]);
    let mut backend = RemoteBackend::new(endpoint, "test-model", "key").unwrap();
    let started = Instant::now();
    let response = backend.complete(&request()).unwrap();
    let elapsed = started.elapsed();
    assert_eq!(hits.load(Ordering::SeqCst), 3);
    assert_eq!(response.text, "VERDICT: ACCEPT");
    assert_eq!(response.finish_reason, FinishReason::Complete);
    assert_eq!(response.usage.input_units, 120);
    assert_eq!(response.usage.output_units, 8);
    // Backoff schedule: 1 s after the first failure, 2 s after the second.
    assert!(
        elapsed >= Duration::from_secs(3),
        "elapsed {elapsed:?} is shorter than the 1s+2s backoff"
    );
}

#[test]
fn auth_failure_is_never_retried() {
    let (endpoint, hits) = stub_server(vec![401]);
    let mut backend = RemoteBackend::new(endpoint, "test-model", "bad-key").unwrap();
    let started = Instant::now();
    let err = backend.complete(&request()).unwrap_err();
    assert!(matches!(err, BackendError::Auth { .. }), "{err:?}");
    assert_eq!(hits.load(Ordering::SeqCst), 1);
    assert!(started.elapsed() < Duration::from_secs(1));
}

#[test]
fn retries_are_bounded_at_five_attempts() {
    let (endpoint, hits) = stub_server(vec![500]);
    let mut backend = RemoteBackend::new(endpoint, "test-model", "key")
        .unwrap()
        .with_initial_backoff(Duration::from_millis(5));
    let err = backend.complete(&request()).unwrap_err();
    match err {
        BackendError::Transport { attempts, .. } => assert_eq!(attempts, 5),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(hits.load(Ordering::SeqCst), 5);
}

#[test]
fn rate_limit_status_is_transient() {
    let (endpoint, hits) = stub_server(vec![429, 200]);
    let mut backend = RemoteBackend::new(endpoint, "test-model", "key")
        .unwrap()
        .with_initial_backoff(Duration::from_millis(5));
    let response = backend.complete(&request()).unwrap();
    assert_eq!(response.text, "VERDICT: ACCEPT");
    assert_eq!(hits.load(Ordering::SeqCst), 2);
}

#[test]
fn permanent_client_error_fails_fast() {
    let (endpoint, hits) = stub_server(vec![404]);
    let mut backend = RemoteBackend::new(endpoint, "test-model", "key").unwrap();
    let started = Instant::now();
    let err = backend.complete(&request()).unwrap_err();
    match err {
        BackendError::Transport { attempts, detail } => {
            assert_eq!(attempts, 1);
            assert!(detail.contains("404"));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(hits.load(Ordering::SeqCst), 1);
    assert!(started.elapsed() < Duration::from_secs(1));
}

#[test]
fn invalid_request_rejected_before_any_call() {
    let (endpoint, hits) = stub_server(vec![200]);
    let mut backend = RemoteBackend::new(endpoint, "test-model", "key").unwrap();
    let mut bad = request();
    bad.user_prompt = String::new();
    let err = backend.complete(&bad).unwrap_err();
    assert!(matches!(err, BackendError::InvalidRequest { .. }));
    assert_eq!(hits.load(Ordering::SeqCst), 0);
}
