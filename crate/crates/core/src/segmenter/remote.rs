//! Client for segmentation servers speaking
//! `POST {base}/v1/segment` with JSON bodies.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CandidateMask, FrameRef, PointPrompt, SegmentError, Segmenter};
use crate::mask::{Dims, RleMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self { base_url: base_url.into(), timeout_ms: 30_000, max_retries: 3, max_in_flight: 4 }
    }

    pub fn endpoint(&self) -> String {
        format!("{}/v1/segment", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

/// Connection-level failure; these are retried.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError(pub String);

pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, body: &[u8]) -> Result<HttpResponse, TransportError>;
}

#[cfg(feature = "remote")]
pub struct UreqTransport {
    agent: ureq::Agent,
}

#[cfg(feature = "remote")]
impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }
}

#[cfg(feature = "remote")]
impl Transport for UreqTransport {
    fn post_json(&self, url: &str, body: &[u8]) -> Result<HttpResponse, TransportError> {
        let mut resp = self
            .agent
            .post(url)
            .header("content-type", "application/json")
            .send(body)
            .map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_vec().map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    frame_ref: &'a str,
    prompts: &'a [PointPrompt],
    max_candidates: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireResponse {
    candidates: Vec<WireCandidate>,
}

#[derive(Deserialize)]
struct WireCandidate {
    mask: RleMask,
    predicted_iou: f64,
    stability: f64,
}

pub fn encode_request(frame_ref: &str, prompts: &[PointPrompt], max_candidates: usize) -> Vec<u8> {
    let req = WireRequest { frame_ref, prompts, max_candidates: max_candidates as u32 };
    serde_json::to_vec(&req).expect("request serialisation cannot fail")
}

pub fn decode_response(body: &[u8], dims: Dims) -> Result<Vec<CandidateMask>, SegmentError> {
    let resp: WireResponse =
        serde_json::from_slice(body).map_err(|e| SegmentError::Protocol(format!("bad response body: {e}")))?;
    let mut out = Vec::with_capacity(resp.candidates.len());
    for (i, c) in resp.candidates.into_iter().enumerate() {
        if c.mask.dims() != dims {
            return Err(SegmentError::Protocol(format!(
                "candidates[{i}].mask is {}, frame is {dims}",
                c.mask.dims()
            )));
        }
        let mask = c
            .mask
            .decode()
            .map_err(|e| SegmentError::Protocol(format!("candidates[{i}].mask: {e}")))?;
        for (name, v) in [("predicted_iou", c.predicted_iou), ("stability", c.stability)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SegmentError::Protocol(format!("candidates[{i}].{name} = {v} outside [0, 1]")));
            }
        }
        out.push(CandidateMask { mask, predicted_iou: c.predicted_iou, stability: c.stability });
    }
    if out.is_empty() {
        return Err(SegmentError::NoCandidate);
    }
    Ok(out)
}

struct InFlight {
    limit: usize,
    count: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.count.lock().unwrap();
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.count.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

pub struct RemoteSegmenter {
    config: RemoteConfig,
    transport: Box<dyn Transport>,
    in_flight: InFlight,
}

impl RemoteSegmenter {
    /// Uses the blocking HTTP transport.
    #[cfg(feature = "remote")]
    pub fn new(config: RemoteConfig) -> Result<Self, SegmentError> {
        let transport = UreqTransport::new(Duration::from_millis(config.timeout_ms));
        Self::with_transport(config, Box::new(transport))
    }

    pub fn with_transport(config: RemoteConfig, transport: Box<dyn Transport>) -> Result<Self, SegmentError> {
        if config.timeout_ms == 0 {
            return Err(SegmentError::InvalidRequest("remote timeout must be positive".into()));
        }
        let limit = config.max_in_flight.max(1);
        Ok(Self {
            config,
            transport,
            in_flight: InFlight { limit, count: Mutex::new(0), freed: Condvar::new() },
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }
}

impl Segmenter for RemoteSegmenter {
    fn propose(&self, frame: &FrameRef, prompts: &[PointPrompt], max: usize) -> Result<Vec<CandidateMask>, SegmentError> {
        let body = encode_request(&frame.reference, prompts, max);
        let url = self.config.endpoint();
        let _slot = self.in_flight.acquire();
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            match self.transport.post_json(&url, &body) {
                Ok(resp) if resp.status == 200 => return decode_response(&resp.body, frame.dims),
                Ok(resp) => {
                    return Err(SegmentError::Protocol(format!(
                        "server answered {}: {}",
                        resp.status,
                        String::from_utf8_lossy(&resp.body)
                    )))
                }
                Err(TransportError(e)) => {
                    log::warn!("segment request to {url} failed (attempt {}): {e}", attempt + 1);
                    last = e;
                    if attempt < self.config.max_retries {
                        std::thread::sleep(Duration::from_millis(25 << attempt.min(5)));
                    }
                }
            }
        }
        Err(SegmentError::BackendUnavailable(format!(
            "{url} after {} attempts: {last}",
            self.config.max_retries + 1
        )))
    }
}
