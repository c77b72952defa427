//! A small deterministic HTTP server speaking the generation wire contract.
//!
//! Used by tests and by `cemrag serve-fixture` for offline end-to-end runs.
//! Each connection carries one request and is closed after the response.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use serde::Deserialize;

/// How the fixture answers a successful request.
#[derive(Debug, Clone)]
pub enum Responder {
    /// Always the same text.
    Fixed(String),
    /// A pure function of the prompt: the first retrieved report when the
    /// prompt has one, else the keyword list, else a normal study.
    Deterministic,
}

/// How the first `fail_first` requests fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureMode {
    /// Respond with HTTP 503.
    ServerError,
    /// Close the connection without responding.
    Drop,
    /// Respond with HTTP 400.
    BadRequest,
}

#[derive(Debug)]
struct State {
    responder: Responder,
    fail_first: usize,
    failure: FailureMode,
    fail_after: Option<usize>,
    hits: AtomicUsize,
    bodies: Mutex<Vec<Vec<u8>>>,
}

pub struct FixtureServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    state: Arc<State>,
    handle: Option<JoinHandle<()>>,
}

impl FixtureServer {
    pub fn start(responder: Responder) -> std::io::Result<Self> {
        Self::start_with_failures(responder, 0, FailureMode::ServerError)
    }

    pub fn start_with_failures(responder: Responder, fail_first: usize, failure: FailureMode) -> std::io::Result<Self> {
        Self::bind("127.0.0.1:0", responder, fail_first, failure)
    }

    /// Answers the first `n` requests normally and every later one with
    /// HTTP 503.
    pub fn start_failing_after(responder: Responder, n: usize) -> std::io::Result<Self> {
        Self::spawn("127.0.0.1:0", responder, 0, FailureMode::ServerError, Some(n))
    }

    pub fn bind(addr: &str, responder: Responder, fail_first: usize, failure: FailureMode) -> std::io::Result<Self> {
        Self::spawn(addr, responder, fail_first, failure, None)
    }

    fn spawn(
        addr: &str,
        responder: Responder,
        fail_first: usize,
        failure: FailureMode,
        fail_after: Option<usize>,
    ) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let state = Arc::new(State {
            responder,
            fail_first,
            failure,
            fail_after,
            hits: AtomicUsize::new(0),
            bodies: Mutex::new(Vec::new()),
        });
        let handle = {
            let stop = stop.clone();
            let state = state.clone();
            thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = conn else { continue };
                    let state = state.clone();
                    thread::spawn(move || {
                        if let Err(e) = handle(stream, &state) {
                            log::debug!("fixture connection error: {e}");
                        }
                    });
                }
            })
        };
        Ok(Self {
            addr,
            stop,
            state,
            handle: Some(handle),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}/generate", self.addr)
    }

    /// Requests received so far, including failed ones.
    pub fn hits(&self) -> usize {
        self.state.hits.load(Ordering::SeqCst)
    }

    /// Raw request bodies in arrival order.
    pub fn bodies(&self) -> Vec<Vec<u8>> {
        self.state.bodies.lock().expect("fixture lock").clone()
    }

    /// Blocks until the accept loop ends (it only ends on drop).
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

#[derive(Deserialize)]
struct Request {
    prompt: String,
}

fn handle(stream: TcpStream, state: &State) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut content_length = 0usize;
    let mut request_line = String::new();
    if reader.read_line(&mut request_line)? == 0 {
        return Ok(());
    }
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.trim().eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let n = state.hits.fetch_add(1, Ordering::SeqCst);
    state.bodies.lock().expect("fixture lock").push(body.clone());
    let mut stream = stream;

    if n < state.fail_first {
        return match state.failure {
            FailureMode::Drop => Ok(()),
            FailureMode::ServerError => respond(&mut stream, 503, r#"{"error":"unavailable"}"#),
            FailureMode::BadRequest => respond(&mut stream, 400, r#"{"error":"bad request"}"#),
        };
    }

    if state.fail_after.is_some_and(|k| n >= k) {
        return respond(&mut stream, 503, r#"{"error":"unavailable"}"#);
    }

    let prompt = match serde_json::from_slice::<Request>(&body) {
        Ok(r) => r.prompt,
        Err(_) => return respond(&mut stream, 400, r#"{"error":"expected {\"prompt\": ...}"}"#),
    };
    let text = match &state.responder {
        Responder::Fixed(t) => t.clone(),
        Responder::Deterministic => deterministic_reply(&prompt),
    };
    let payload = serde_json::json!({ "text": text }).to_string();
    respond(&mut stream, 200, &payload)
}

fn respond(stream: &mut TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        503 => "Service Unavailable",
        _ => "Status",
    };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

/// The canned reply of [`Responder::Deterministic`].
pub fn deterministic_reply(prompt: &str) -> String {
    if let Some(start) = prompt.find("FINDINGS 1:\n") {
        let rest = &prompt[start + "FINDINGS 1:\n".len()..];
        let end = rest.find("\n---\n").or_else(|| rest.find("\n\n")).unwrap_or(rest.len());
        let first = rest[..end].trim();
        if !first.is_empty() {
            return first.to_string();
        }
    }
    if let Some(start) = prompt.find("KEYWORDS:\n") {
        let terms: Vec<&str> = prompt[start + "KEYWORDS:\n".len()..]
            .lines()
            .map_while(|l| l.strip_prefix("- "))
            .collect();
        if !terms.is_empty() {
            return format!("Findings consistent with {}.", terms.join(", "));
        }
    }
    "No acute cardiopulmonary process.".to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_reply_prefers_first_finding() {
        let p = "Task\n\nKEYWORDS:\n- a b\n\nFINDINGS 1:\nFirst report.\n---\nFINDINGS 2:\nSecond.\n\nFinal";
        assert_eq!(deterministic_reply(p), "First report.");
        assert_eq!(
            deterministic_reply("I\n\nKEYWORDS:\n- a b\n- c d\n"),
            "Findings consistent with a b, c d."
        );
        assert_eq!(deterministic_reply("Provide"), "No acute cardiopulmonary process.");
    }
}
