use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use kinetext::language::{LlmClient, LlmConfig};
use kinetext::Error;

/// Serve `n` requests with the given status and body; returns the base URL
/// and a handle yielding the raw requests.
fn serve(n: usize, status: &'static str, body: &'static str, delay: Duration) -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for _ in 0..n {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut head = String::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut buf = vec![0u8; len];
            reader.read_exact(&mut buf).unwrap();
            seen.push(head + &String::from_utf8(buf).unwrap());
            thread::sleep(delay);
            let mut stream = reader.into_inner();
            let reply = format!(
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
        seen
    });
    (url, handle)
}

fn client(url: String, timeout: Duration) -> LlmClient {
    let cfg = LlmConfig { base_url: url, model: "test-model".into(), timeout, ..LlmConfig::default() };
    LlmClient::with_key(cfg, "secret-token".into()).unwrap()
}

const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"Keep your knees straight."}}]}"#;

#[test]
fn returns_first_choice_and_sends_chat_request() {
    let (url, h) = serve(1, "200 OK", OK, Duration::ZERO);
    let text = client(url, Duration::from_secs(5)).generate("describe \"this\"").unwrap();
    assert_eq!(text, "Keep your knees straight.");
    let req = &h.join().unwrap()[0];
    assert!(req.starts_with("POST /v1/chat/completions "));
    assert!(req.to_ascii_lowercase().contains("authorization: bearer secret-token"));
    let body: serde_json::Value = serde_json::from_str(&req[req.find("\r\n\r\n").unwrap() + 4..]).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "describe \"this\"");
}

#[test]
fn unauthorized_is_a_credential_error_without_the_prompt() {
    let (url, h) = serve(1, "401 Unauthorized", r#"{"error":"bad key"}"#, Duration::ZERO);
    let err = client(url, Duration::from_secs(5)).generate("private health details").unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, Error::LlmCredential(_)), "{err:?}");
    assert!(!err.to_string().contains("private health details"));
}

#[test]
fn server_error_maps_to_status() {
    let (url, h) = serve(1, "503 Service Unavailable", r#"{"error":"busy"}"#, Duration::ZERO);
    let err = client(url, Duration::from_secs(5)).generate("x").unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, Error::LlmStatus { status: 503, .. }), "{err:?}");
}

#[test]
fn malformed_body_maps_to_response_error() {
    for body in ["not json", r#"{"choices":[]}"#] {
        let (url, h) = serve(1, "200 OK", body, Duration::ZERO);
        let err = client(url, Duration::from_secs(5)).generate("x").unwrap_err();
        h.join().unwrap();
        assert!(matches!(err, Error::LlmResponse(_)), "{err:?}");
    }
}

#[test]
fn slow_endpoint_times_out() {
    let (url, h) = serve(1, "200 OK", OK, Duration::from_millis(1500));
    let err = client(url, Duration::from_millis(200)).generate("x").unwrap_err();
    assert!(matches!(err, Error::LlmTimeout(_)), "{err:?}");
    h.join().unwrap();
}

#[test]
fn refused_connection_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = client(format!("http://127.0.0.1:{port}"), Duration::from_secs(2)).generate("x").unwrap_err();
    assert!(matches!(err, Error::LlmTransport(_)), "{err:?}");
}

#[test]
fn in_flight_cap_is_respected() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let active = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let (a, p) = (active.clone(), peak.clone());
    let server = thread::spawn(move || {
        let mut workers = Vec::new();
        for _ in 0..6 {
            let (stream, _) = listener.accept().unwrap();
            let (a, p) = (a.clone(), p.clone());
            workers.push(thread::spawn(move || {
                let now = a.fetch_add(1, Ordering::SeqCst) + 1;
                p.fetch_max(now, Ordering::SeqCst);
                let mut reader = BufReader::new(stream);
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0u8; len];
                reader.read_exact(&mut buf).unwrap();
                thread::sleep(Duration::from_millis(100));
                a.fetch_sub(1, Ordering::SeqCst);
                let reply = format!(
                    "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{OK}",
                    OK.len()
                );
                reader.into_inner().write_all(reply.as_bytes()).unwrap();
            }));
        }
        for w in workers {
            w.join().unwrap();
        }
    });
    let cfg = LlmConfig { base_url: url, max_in_flight: 2, timeout: Duration::from_secs(10), ..LlmConfig::default() };
    let c = Arc::new(LlmClient::with_key(cfg, "k".into()).unwrap());
    let callers: Vec<_> = (0..6)
        .map(|i| {
            let c = c.clone();
            thread::spawn(move || c.generate(&format!("prompt {i}")).unwrap())
        })
        .collect();
    for t in callers {
        assert_eq!(t.join().unwrap(), "Keep your knees straight.");
    }
    server.join().unwrap();
    assert!(peak.load(Ordering::SeqCst) <= 2, "peak {}", peak.load(Ordering::SeqCst));
}
