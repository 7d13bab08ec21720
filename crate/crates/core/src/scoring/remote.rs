use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::Value;

use super::{ScoreBundle, ScoreError, ScoreRequest, ScoringEnv};

/// HTTP client for a `POST /score` backend.
///
/// The underlying connection pool is shared across threads, so one scorer
/// can serve parallel rollouts.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    client: Client,
    endpoint: String,
}

impl RemoteScorer {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

    /// `base_url` is the server root, e.g. `http://127.0.0.1:8000`.
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, ScoreError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ScoreError::EnvUnavailable(e.to_string()))?;
        let endpoint = format!("{}/score", base_url.trim_end_matches('/'));
        Ok(Self { client, endpoint })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn remote_score(&self, req: &ScoreRequest) -> Result<ScoreBundle, ScoreError> {
        req.parsed()?;
        let response = self.client.post(&self.endpoint).json(req).send().map_err(classify)?;
        if response.status() != StatusCode::OK {
            return Err(ScoreError::EnvUnavailable(format!("backend answered {}", response.status())));
        }
        let body = response.bytes().map_err(classify)?;
        decode_score_response(&body)
    }
}

impl ScoringEnv for RemoteScorer {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreBundle, ScoreError> {
        self.remote_score(req)
    }
}

fn classify(e: reqwest::Error) -> ScoreError {
    if e.is_timeout() {
        ScoreError::Timeout
    } else {
        ScoreError::EnvUnavailable(e.to_string())
    }
}

/// Decodes a `{"aes": .., "clip": .., "pick": ..}` response body. Every field
/// must be present and a finite number.
pub fn decode_score_response(body: &[u8]) -> Result<ScoreBundle, ScoreError> {
    let value: Value = serde_json::from_slice(body).map_err(|e| ScoreError::ProtocolError(e.to_string()))?;
    let field = |name: &str| -> Result<f64, ScoreError> {
        let v = value
            .get(name)
            .ok_or_else(|| ScoreError::ProtocolError(format!("missing field {name:?}")))?;
        let x = v
            .as_f64()
            .ok_or_else(|| ScoreError::ProtocolError(format!("field {name:?} is not a number")))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(ScoreError::ProtocolError(format!("field {name:?} is not finite")))
        }
    };
    Ok(ScoreBundle { aes: field("aes")?, clip: field("clip")?, pick: field("pick")? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_well_formed_scores_through() {
        let b = decode_score_response(br#"{"aes":6.1,"clip":0.27,"pick":19.2}"#).unwrap();
        assert_eq!(b, ScoreBundle { aes: 6.1, clip: 0.27, pick: 19.2 });
    }

    #[test]
    fn rejects_missing_or_bad_fields() {
        for body in [
            &br#"{"aes":6.1,"clip":0.27}"#[..],
            br#"{"aes":"6.1","clip":0.27,"pick":1}"#,
            br#"{"aes":null,"clip":0.27,"pick":1}"#,
            br#"{"aes":1e999,"clip":0.27,"pick":1}"#,
            br#"not json"#,
        ] {
            assert!(matches!(decode_score_response(body), Err(ScoreError::ProtocolError(_))), "{:?}", std::str::from_utf8(body));
        }
    }

    #[test]
    fn endpoint_joins_path() {
        let s = RemoteScorer::new("http://localhost:9/", Duration::from_secs(1)).unwrap();
        assert_eq!(s.endpoint(), "http://localhost:9/score");
    }
}
