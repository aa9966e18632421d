//! HttpBackend against a throwaway HTTP/1.1 server on localhost.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use nlts::backend::{complete, BackendError, GenerationParams, HttpBackend, ReqwestTransport, RetryPolicy};

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    authorization: Option<String>,
    body: String,
}

/// Serves one canned `(status, body)` per connection, in order.
fn serve(replies: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<Seen>>>, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = std::thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let request = read_request(&stream);
            log.lock().unwrap().push(request);
            respond(stream, status, body);
        }
    });
    (base, seen, handle)
}

fn read_request(stream: &TcpStream) -> Seen {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let path = line.split_whitespace().nth(1).unwrap_or("").to_owned();
    let (mut length, mut authorization) = (0usize, None);
    loop {
        line.clear();
        reader.read_line(&mut line).unwrap();
        let header = line.trim_end();
        if header.is_empty() {
            break;
        }
        let (name, value) = header.split_once(':').unwrap();
        match name.to_ascii_lowercase().as_str() {
            "content-length" => length = value.trim().parse().unwrap(),
            "authorization" => authorization = Some(value.trim().to_owned()),
            _ => {}
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    Seen { path, authorization, body: String::from_utf8(body).unwrap() }
}

fn respond(mut stream: TcpStream, status: u16, body: &str) {
    let reply = format!(
        "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(reply.as_bytes()).unwrap();
}

const OK: &str = r#"{"choices":[{"text":"2 8, 3 1"}],"usage":{"prompt_tokens":7,"completion_tokens":4}}"#;

fn backend(base: &str, retries: u32) -> HttpBackend {
    let transport = ReqwestTransport::new(Duration::from_secs(10)).unwrap();
    HttpBackend::new(base, Some("sk-test".into()), Box::new(transport)).with_retry(RetryPolicy::no_delay(retries))
}

#[test]
fn two_rate_limits_then_success() {
    let (base, seen, server) = serve(vec![(429, "{}"), (429, "{}"), (200, OK)]);
    let (texts, usage) = complete(&backend(&base, 5), "2 2, 2 5, ", &GenerationParams::default()).unwrap();
    server.join().unwrap();

    assert_eq!(texts, vec!["2 8, 3 1"]);
    assert_eq!((usage.prompt_tokens, usage.completion_tokens, usage.requests), (7, 4, 3));
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen.iter().all(|s| s.path == "/v1/completions"));
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer sk-test"));
    let body: serde_json::Value = serde_json::from_str(&seen[2].body).unwrap();
    assert_eq!(body["prompt"], "2 2, 2 5, ");
    assert_eq!(body["model"], "gpt-3.5-turbo-instruct");
    assert_eq!(body["n"], 1);
}

#[test]
fn rate_limit_exhausts_retries() {
    let (base, seen, server) = serve(vec![(429, "{}"); 3]);
    let err = complete(&backend(&base, 2), "1", &GenerationParams::default()).unwrap_err();
    server.join().unwrap();
    assert_eq!(err, BackendError::RateLimit { attempts: 3 });
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn auth_failure_is_not_retried() {
    let (base, seen, server) = serve(vec![(401, r#"{"error":"bad key"}"#)]);
    let err = complete(&backend(&base, 5), "1", &GenerationParams::default()).unwrap_err();
    server.join().unwrap();
    assert_eq!(err, BackendError::Auth(401));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn client_error_is_protocol() {
    let (base, _, server) = serve(vec![(400, r#"{"error":"max_tokens too large"}"#)]);
    let err = complete(&backend(&base, 5), "1", &GenerationParams::default()).unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, BackendError::Protocol(m) if m.contains("400")));
}

#[test]
fn server_errors_are_retried_then_surface_as_transport() {
    let (base, _, server) = serve(vec![(503, ""), (500, "")]);
    let err = complete(&backend(&base, 1), "1", &GenerationParams::default()).unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, BackendError::Transport(m) if m.contains("500")));
}

#[test]
fn malformed_success_body_is_protocol() {
    let (base, _, server) = serve(vec![(200, "<html>gateway</html>")]);
    let err = complete(&backend(&base, 0), "1", &GenerationParams::default()).unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, BackendError::Protocol(_)));
}

#[test]
fn unreachable_host_is_transport() {
    // Bind then drop to get a port nobody listens on.
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err =
        complete(&backend(&format!("http://127.0.0.1:{port}"), 1), "1", &GenerationParams::default()).unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)));
}
