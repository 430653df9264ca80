//! Director backend contract. Any implementation must return a
//! [`Storyline`] satisfying the type invariants; the reference
//! implementation is [`compose_storyline`] over the parsed prompt. An
//! external backend speaks JSON over a single HTTP POST endpoint:
//!
//! request body:  serialized [`DirectorRequest`]
//! response body: serialized [`Storyline`] (validated before acceptance)

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{compose_storyline, parse_user_prompt, validate_storyline, DirectorError, ImageCaption, Storyline};
use crate::audio::AudioCaption;

/// Identifier of the storyline template an external director must render
/// its answer in. There is exactly one today.
pub const TEMPLATE_ID: &str = "storyline/v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectorRequest {
    pub prompt: String,
    pub audio_caption: Option<AudioCaption>,
    pub image_caption: Option<ImageCaption>,
    pub duration_s: f64,
    pub template: String,
}

impl DirectorRequest {
    pub fn new(
        prompt: impl Into<String>,
        audio_caption: Option<AudioCaption>,
        image_caption: Option<ImageCaption>,
        duration_s: f64,
    ) -> Self {
        DirectorRequest {
            prompt: prompt.into(),
            audio_caption,
            image_caption,
            duration_s,
            template: TEMPLATE_ID.to_string(),
        }
    }
}

/// Grounds a request into a validated storyline. Implementations must be
/// safely callable from concurrent contexts.
pub trait DirectorBackend: Send + Sync {
    fn ground(&self, request: &DirectorRequest) -> Result<Storyline, DirectorError>;
}

/// The deterministic in-process reference backend.
#[derive(Debug, Default, Clone)]
pub struct RulesDirector;

impl DirectorBackend for RulesDirector {
    fn ground(&self, request: &DirectorRequest) -> Result<Storyline, DirectorError> {
        let prompt = parse_user_prompt(&request.prompt);
        compose_storyline(
            &prompt,
            request.audio_caption.as_ref(),
            request.image_caption.as_ref(),
            request.duration_s,
        )
    }
}

/// Parse and validate an external director response. Every invariant
/// violation is listed in the error.
pub fn parse_storyline_response(body: &str) -> Result<Storyline, DirectorError> {
    let storyline: Storyline =
        serde_json::from_str(body).map_err(|e| DirectorError::MalformedResponse(e.to_string()))?;
    validate_storyline(&storyline)?;
    Ok(storyline)
}

/// Transport used by [`ExternalDirector`]: (url, json body) -> raw response
/// body. Swappable so tests can run without a network.
pub type Transport = Box<dyn Fn(&str, &str) -> Result<String, String> + Send + Sync>;

/// Stateless client for an external storyline service.
pub struct ExternalDirector {
    url: String,
    transport: Transport,
}

impl ExternalDirector {
    /// Plain-HTTP client for `http://host:port/path` endpoints.
    pub fn new(url: impl Into<String>) -> Self {
        ExternalDirector { url: url.into(), transport: Box::new(http_post) }
    }

    /// Client with a caller-supplied transport (used in tests and by
    /// embedders that already own an HTTP stack).
    pub fn with_transport(url: impl Into<String>, transport: Transport) -> Self {
        ExternalDirector { url: url.into(), transport }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl DirectorBackend for ExternalDirector {
    fn ground(&self, request: &DirectorRequest) -> Result<Storyline, DirectorError> {
        let body = serde_json::to_string(request).expect("request serializes");
        let response = (self.transport)(&self.url, &body).map_err(DirectorError::Transport)?;
        parse_storyline_response(&response)
    }
}

/// Minimal blocking HTTP/1.1 POST over std TCP. No TLS, no redirects;
/// sufficient for a local storyline service.
fn http_post(url: &str, body: &str) -> Result<String, String> {
    let rest = url
        .strip_prefix("http://")
        .ok_or_else(|| format!("only http:// URLs are supported, got {url}"))?;
    let (host_port, path) = match rest.find('/') {
        Some(i) => (&rest[..i], &rest[i..]),
        None => (rest, "/"),
    };
    let addr = if host_port.contains(':') { host_port.to_string() } else { format!("{host_port}:80") };

    let mut stream = TcpStream::connect(&addr).map_err(|e| format!("connect {addr}: {e}"))?;
    stream
        .set_read_timeout(Some(Duration::from_secs(30)))
        .and_then(|_| stream.set_write_timeout(Some(Duration::from_secs(30))))
        .map_err(|e| e.to_string())?;

    let request = format!(
        "POST {path} HTTP/1.1\r\nHost: {host_port}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(request.as_bytes()).map_err(|e| format!("send: {e}"))?;

    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).map_err(|e| format!("receive: {e}"))?;
    let text = String::from_utf8_lossy(&raw);
    let mut parts = text.splitn(2, "\r\n\r\n");
    let head = parts.next().unwrap_or("");
    let body = parts.next().unwrap_or("");
    let status = head.lines().next().unwrap_or("");
    if !status.contains(" 200") {
        return Err(format!("endpoint returned {status:?}"));
    }
    Ok(body.to_string())
}
