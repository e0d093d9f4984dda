//! Predictor-protocol clients: the async narrator used by sessions and a
//! blocking [`Predictor`] for offline evaluation runs.

use std::time::Duration;

use worldgraph_core::eval::{EvalError, PredictRequest, Prediction, Predictor};

/// Sends one request to an HTTP predictor and checks the reply.
pub async fn request_narration(
    client: &reqwest::Client,
    url: &str,
    request: &PredictRequest,
    timeout: Duration,
) -> Result<Prediction, String> {
    let response = client
        .post(url)
        .timeout(timeout)
        .json(request)
        .send()
        .await
        .map_err(|e| format!("request failed: {e}"))?;
    if !response.status().is_success() {
        return Err(format!("predictor answered {}", response.status()));
    }
    let prediction: Prediction = response.json().await.map_err(|e| format!("bad response body: {e}"))?;
    prediction.check(request).map_err(|e| e.to_string())?;
    Ok(prediction)
}

/// A predictor reached by `POST <url>` with one request object per call.
pub struct HttpPredictor {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpPredictor {
    pub fn new(url: &str, timeout: Duration) -> Result<Self, EvalError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EvalError::PredictorUnavailable { reason: e.to_string(), partial: None })?;
        Ok(HttpPredictor { url: url.to_string(), client })
    }
}

impl Predictor for HttpPredictor {
    fn name(&self) -> String {
        format!("http:{}", self.url)
    }

    fn predict(&self, request: &PredictRequest) -> Result<Prediction, EvalError> {
        let unavailable = |reason: String| EvalError::PredictorUnavailable { reason, partial: None };
        let response = self
            .client
            .post(&self.url)
            .json(request)
            .send()
            .map_err(|e| unavailable(format!("request failed: {e}")))?;
        if !response.status().is_success() {
            return Err(unavailable(format!("predictor answered {}", response.status())));
        }
        let prediction: Prediction = response
            .json()
            .map_err(|e| EvalError::ProtocolViolation(format!("bad response body: {e}")))?;
        prediction.check(request)?;
        Ok(prediction)
    }
}
