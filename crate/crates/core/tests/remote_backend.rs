use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use claimcheck::backends::{CheckerBackend, RemoteBackend, RemoteCheckerConfig, NLI_TEMPLATE_ID};
use claimcheck::error::Error;
use claimcheck::{Claim, NliLabel, Passage};

#[derive(Clone)]
enum Reply {
    Json(u16, String),
    Hang,
}

struct Mock {
    url: String,
    hits: Arc<AtomicUsize>,
    requests: Arc<Mutex<Vec<(String, String)>>>,
}

fn read_request(stream: &mut TcpStream) -> Option<(String, String)> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut headers = String::new();
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            len = v.trim().parse().ok()?;
        }
        if line == "\r\n" {
            break;
        }
        headers.push_str(&line);
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    Some((headers, String::from_utf8(body).ok()?))
}

/// Serves `script[i]` to the i-th request; the last entry repeats.
fn serve(script: Vec<Reply>) -> Mock {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/verify", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let requests = Arc::new(Mutex::new(Vec::new()));
    let (h, r) = (hits.clone(), requests.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let (hits, requests, script) = (h.clone(), r.clone(), script.clone());
            thread::spawn(move || {
                let Some(req) = read_request(&mut stream) else { return };
                let n = hits.fetch_add(1, Ordering::SeqCst);
                requests.lock().unwrap().push(req);
                match &script[n.min(script.len() - 1)] {
                    Reply::Hang => thread::sleep(Duration::from_secs(2)),
                    Reply::Json(status, body) => {
                        let _ = write!(
                            stream,
                            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                            body.len()
                        );
                    }
                }
            });
        }
    });
    Mock { url, hits, requests }
}

fn config(url: &str, max_retries: u32, timeout: f64) -> RemoteCheckerConfig {
    RemoteCheckerConfig {
        endpoint_url: url.to_string(),
        model_name: "verifier-small".into(),
        timeout,
        max_retries,
        request_template_id: NLI_TEMPLATE_ID.into(),
        api_key_env: None,
        backoff_base_ms: 5,
        max_in_flight: 2,
    }
}

fn claim() -> Claim {
    Claim::new("c1", "q1", "aspirin treats headache")
}

fn passages() -> Vec<Passage> {
    vec![Passage {
        doc_id: "d1".into(),
        text: "Aspirin is used for headache.".into(),
    }]
}

const ENTAIL: &str = r#"{"label":"Entail","prob":{"Entail":0.8,"Neutral":0.15,"Contradict":0.05},"neutral_type":null,"rationale":"stated in d1","spans":[{"doc_id":"d1","quote":"Aspirin is used for headache."}]}"#;

#[test]
fn valid_reply_is_parsed() {
    let mock = serve(vec![Reply::Json(200, ENTAIL.into())]);
    let backend = RemoteBackend::new("remote", config(&mock.url, 2, 5.0)).unwrap();
    let out = backend.classify(&claim(), &passages()).unwrap();
    assert_eq!(out.label, NliLabel::Entail);
    assert_eq!(out.dist.entail, 0.8);
    assert_eq!(out.spans.len(), 1);
    assert!(!out.degraded);
    assert_eq!(mock.hits.load(Ordering::SeqCst), 1);

    let (_, body) = mock.requests.lock().unwrap()[0].clone();
    let body: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(body["model"], "verifier-small");
    let prompt = body["prompt"].as_str().unwrap();
    assert!(prompt.contains("aspirin treats headache"));
    assert!(prompt.contains("[d1] Aspirin is used for headache."));
}

#[test]
fn unnormalized_reply_is_renormalized() {
    let reply = r#"{"label":"Entail","prob":{"Entail":0.6,"Neutral":0.2,"Contradict":0.1},"neutral_type":null,"rationale":null,"spans":[]}"#;
    let mock = serve(vec![Reply::Json(200, reply.into())]);
    let backend = RemoteBackend::new("remote", config(&mock.url, 0, 5.0)).unwrap();
    let out = backend.classify(&claim(), &passages()).unwrap();
    assert!((out.dist.sum() - 1.0).abs() < 1e-12);
    assert!((out.dist.entail - 0.6 / 0.9).abs() < 1e-12);
}

#[test]
fn repeated_timeouts_exhaust_retries() {
    let mock = serve(vec![Reply::Hang]);
    let backend = RemoteBackend::new("remote", config(&mock.url, 2, 0.2)).unwrap();
    let err = backend.classify(&claim(), &passages()).unwrap_err();
    assert!(matches!(err, Error::Transport { attempts: 3, .. }), "{err:?}");
    thread::sleep(Duration::from_millis(50));
    assert_eq!(mock.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn server_errors_are_retried_until_success() {
    let mock = serve(vec![Reply::Json(503, "{}".into()), Reply::Json(200, ENTAIL.into())]);
    let backend = RemoteBackend::new("remote", config(&mock.url, 2, 5.0)).unwrap();
    let out = backend.classify(&claim(), &passages()).unwrap();
    assert_eq!(out.label, NliLabel::Entail);
    assert_eq!(mock.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn malformed_reply_degrades_to_neutral() {
    let mock = serve(vec![Reply::Json(200, "\"I think it is entailed\"".into())]);
    let backend = RemoteBackend::new("remote", config(&mock.url, 1, 5.0)).unwrap();
    let out = backend.classify(&claim(), &passages()).unwrap();
    assert!(out.degraded);
    assert_eq!(out.label, NliLabel::Neutral);
    assert_eq!(out.dist.neutral, 1.0);
    assert_eq!(mock.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn chat_style_reply_with_fences_is_accepted() {
    let chat = serde_json::json!({"choices": [{"message": {"content": format!("```json\n{ENTAIL}\n```")}}]}).to_string();
    let mock = serve(vec![Reply::Json(200, chat)]);
    let backend = RemoteBackend::new("remote", config(&mock.url, 0, 5.0)).unwrap();
    assert_eq!(backend.classify(&claim(), &passages()).unwrap().label, NliLabel::Entail);
}

#[test]
fn bearer_token_comes_from_the_environment() {
    let var = "CLAIMCHECK_TEST_REMOTE_KEY";
    std::env::set_var(var, "s3cret");
    let mock = serve(vec![Reply::Json(200, ENTAIL.into())]);
    let mut cfg = config(&mock.url, 0, 5.0);
    cfg.api_key_env = Some(var.into());
    let backend = RemoteBackend::new("remote", cfg.clone()).unwrap();
    backend.classify(&claim(), &passages()).unwrap();
    let (headers, _) = mock.requests.lock().unwrap()[0].clone();
    assert!(headers.to_ascii_lowercase().contains("authorization: bearer s3cret"));

    cfg.api_key_env = Some("CLAIMCHECK_TEST_UNSET_VAR".into());
    assert!(matches!(RemoteBackend::new("remote", cfg), Err(Error::Config(_))));
}
