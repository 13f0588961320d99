//! Vision-language-model judging of restoration outputs.
//!
//! A pair of images (original, prediction) is sent to an OpenAI-style
//! chat-completions endpoint with a fixed evaluation prompt; the model must
//! answer with a single `Score: N%` line, which is parsed and clamped to
//! `[0, 100]`. Transport failures, non-2xx statuses, and unparseable
//! replies are retried with exponential backoff — except auth failures,
//! which are configuration errors and fail immediately.

use std::io::Cursor;
use std::sync::OnceLock;
use std::time::Duration;

use base64::Engine;
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use regex::Regex;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::raster::{ColorTag, Raster};

/// One judging call: endpoint, model, the artifact the judge should look
/// for, and retry policy.
#[derive(Clone, Debug)]
pub struct JudgeRequest {
    /// Chat-completions URL, e.g. `https://host/v1/chat/completions`.
    pub endpoint: String,
    /// Bearer token; omitted header when None.
    pub api_key: Option<String>,
    pub model: String,
    /// Artifact named in the prompt objective, e.g. "haze" or "occlusion".
    pub artifact_name: String,
    /// Retries after the first attempt; total attempts = 1 + max_retries.
    pub max_retries: u32,
    pub timeout: Duration,
    /// First retry delay; doubles each subsequent retry.
    pub backoff_base: Duration,
}

impl JudgeRequest {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        JudgeRequest {
            endpoint: endpoint.into(),
            api_key: None,
            model: model.into(),
            artifact_name: "degradation".to_string(),
            max_retries: 3,
            timeout: Duration::from_secs(60),
            backoff_base: Duration::from_secs(1),
        }
    }

    /// Reads `VLM_API_BASE`, `VLM_MODEL`, and optionally `VLM_API_KEY`.
    /// The base is the API root; `/chat/completions` is appended.
    pub fn from_env() -> Result<Self> {
        let base = std::env::var("VLM_API_BASE")
            .map_err(|_| Error::Configuration("VLM_API_BASE is not set".to_string()))?;
        let model = std::env::var("VLM_MODEL")
            .map_err(|_| Error::Configuration("VLM_MODEL is not set".to_string()))?;
        let endpoint = format!("{}/chat/completions", base.trim_end_matches('/'));
        let mut req = JudgeRequest::new(endpoint, model);
        req.api_key = std::env::var("VLM_API_KEY").ok();
        Ok(req)
    }

    pub fn with_artifact(mut self, artifact: impl Into<String>) -> Self {
        self.artifact_name = artifact.into();
        self
    }
}

/// Parsed judge verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct JudgeScore {
    /// In `[0, 100]` after clamping.
    pub score_percent: f64,
    /// Verbatim model reply the score was parsed from.
    pub raw_response: String,
    /// HTTP requests actually sent (1 = first try succeeded).
    pub attempts: u32,
}

/// Evaluation prompt: expert role, A/B naming of the two attached images,
/// the removal objective for the given artifact, and a strict reply format.
pub fn build_prompt(artifact_name: &str) -> Result<String> {
    if artifact_name.trim().is_empty() {
        return Err(Error::InvalidArgument(
            "artifact name must be non-empty".to_string(),
        ));
    }
    Ok(format!(
        "You are a top-tier image quality assessment expert. \
         Image A is an original photograph affected by {artifact_name}; \
         Image B is the result of an automatic attempt to remove the \
         {artifact_name} from Image A. Evaluate how well Image B removes \
         the {artifact_name} while preserving the underlying scene content, \
         and assign a percentage score from 0% (complete failure) to 100% \
         (perfect removal with no loss of detail). Respond with exactly one \
         line of the form \"Score: [number]%\" and no other text."
    ))
}

static SCORE_RE: OnceLock<Regex> = OnceLock::new();

/// Extracts the first `Score: N%` occurrence from a reply and clamps it to
/// `[0, 100]`. Surrounding prose is tolerated even though the prompt
/// forbids it.
pub fn parse_score(reply: &str) -> Result<f64> {
    let re = SCORE_RE
        .get_or_init(|| Regex::new(r"Score:\s*([0-9]+(?:\.[0-9]+)?)\s*%").expect("score regex"));
    let caps = re.captures(reply).ok_or_else(|| Error::ScoreParse {
        reply: reply.chars().take(200).collect(),
    })?;
    let value: f64 = caps[1].parse().map_err(|_| Error::ScoreParse {
        reply: reply.chars().take(200).collect(),
    })?;
    Ok(value.clamp(0.0, 100.0))
}

/// Encodes an sRGB raster as a PNG `data:` URL for inline attachment.
fn png_data_url(img: &Raster) -> Result<String> {
    if img.color_tag() == ColorTag::LinearRgb {
        return Err(Error::TagMismatch {
            expected: "srgb",
            found: "linear-rgb",
        });
    }
    let (w, h) = (img.width(), img.height());
    let mut bytes = Vec::with_capacity(w * h * 3);
    for v in img.data() {
        bytes.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    let color = match img.channels() {
        1 => ExtendedColorType::L8,
        3 => ExtendedColorType::Rgb8,
        c => return Err(Error::Shape(format!("cannot encode {c}-channel raster"))),
    };
    let mut png = Vec::new();
    PngEncoder::new(Cursor::new(&mut png))
        .write_image(&bytes, w as u32, h as u32, color)
        .map_err(Error::Image)?;
    let b64 = base64::engine::general_purpose::STANDARD.encode(&png);
    Ok(format!("data:image/png;base64,{b64}"))
}

fn request_body(req: &JudgeRequest, original: &Raster, prediction: &Raster) -> Result<Value> {
    let prompt = build_prompt(&req.artifact_name)?;
    Ok(json!({
        "model": req.model,
        "temperature": 0,
        "max_tokens": 16,
        "messages": [{
            "role": "user",
            "content": [
                { "type": "text", "text": prompt },
                { "type": "image_url", "image_url": { "url": png_data_url(original)? } },
                { "type": "image_url", "image_url": { "url": png_data_url(prediction)? } },
            ],
        }],
    }))
}

/// Pulls the assistant text out of a chat-completions response; tolerates
/// both plain-string and content-part-array replies.
fn extract_content(body: &Value) -> Option<String> {
    let content = body
        .get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?;
    if let Some(s) = content.as_str() {
        return Some(s.to_string());
    }
    let parts = content.as_array()?;
    let text: String = parts
        .iter()
        .filter_map(|p| p.get("text").and_then(Value::as_str))
        .collect();
    Some(text)
}

/// Scores a prediction against its original. The prediction is resized to
/// the original's dimensions before upload so the judge always sees a
/// like-for-like pair.
pub fn judge(req: &JudgeRequest, original: &Raster, prediction: &Raster) -> Result<JudgeScore> {
    let resized;
    let prediction = if original.same_dims(prediction) {
        prediction
    } else {
        resized = prediction.resize_to(original.width(), original.height())?;
        &resized
    };
    let body = request_body(req, original, prediction)?;
    let client = reqwest::blocking::Client::builder()
        .timeout(req.timeout)
        .build()
        .map_err(Error::Http)?;

    let mut attempts = 0u32;
    loop {
        attempts += 1;
        match send_once(&client, req, &body) {
            Ok((reply, score)) => {
                return Ok(JudgeScore {
                    score_percent: score,
                    raw_response: reply,
                    attempts,
                });
            }
            Err(Outcome::Fatal(err)) => return Err(err),
            Err(Outcome::Transient(detail)) => {
                log::warn!("judge attempt {attempts} failed: {detail}");
                if attempts > req.max_retries {
                    return Err(Error::EvaluationFailed {
                        attempts,
                        last: detail,
                    });
                }
            }
        }
        let delay = req.backoff_base * 2u32.pow(attempts - 1);
        std::thread::sleep(delay);
    }
}

enum Outcome {
    /// Misconfiguration — retrying cannot help.
    Fatal(Error),
    /// Transport error, server error, or malformed reply — worth retrying.
    Transient(String),
}

fn send_once(
    client: &reqwest::blocking::Client,
    req: &JudgeRequest,
    body: &Value,
) -> std::result::Result<(String, f64), Outcome> {
    let mut builder = client.post(&req.endpoint).json(body);
    if let Some(key) = &req.api_key {
        builder = builder.bearer_auth(key);
    }
    let response = builder
        .send()
        .map_err(|e| Outcome::Transient(format!("transport: {e}")))?;
    let status = response.status();
    if status.as_u16() == 401 || status.as_u16() == 403 {
        return Err(Outcome::Fatal(Error::Configuration(format!(
            "endpoint rejected credentials ({status})"
        ))));
    }
    if !status.is_success() {
        return Err(Outcome::Transient(format!("status {status}")));
    }
    let parsed: Value = response
        .json()
        .map_err(|e| Outcome::Transient(format!("bad json: {e}")))?;
    let reply = extract_content(&parsed)
        .ok_or_else(|| Outcome::Transient("no message content in response".to_string()))?;
    match parse_score(&reply) {
        Ok(score) => Ok((reply, score)),
        Err(e) => Err(Outcome::Transient(format!("unparseable reply: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_names_the_artifact_and_format() {
        let p = build_prompt("haze").unwrap();
        assert!(p.contains("haze"));
        assert!(p.contains("Image A"));
        assert!(p.contains("Image B"));
        assert!(p.contains("Score: [number]%"));
        assert!(p.contains("image quality assessment expert"));
        assert!(build_prompt("  ").is_err());
    }

    #[test]
    fn parses_plain_scores() {
        assert_eq!(parse_score("Score: 85%").unwrap(), 85.0);
        assert_eq!(parse_score("Score: 0%").unwrap(), 0.0);
        assert_eq!(parse_score("Score: 100%").unwrap(), 100.0);
        assert_eq!(parse_score("Score: 62.5%").unwrap(), 62.5);
        assert_eq!(parse_score("Score:42%").unwrap(), 42.0);
        assert_eq!(parse_score("Score: 7 %").unwrap(), 7.0);
    }

    #[test]
    fn parses_score_embedded_in_prose() {
        let reply = "Sure! After careful comparison,\nScore: 73.5%\nHope that helps.";
        assert_eq!(parse_score(reply).unwrap(), 73.5);
        // First match wins.
        assert_eq!(parse_score("Score: 10% ... Score: 90%").unwrap(), 10.0);
    }

    #[test]
    fn clamps_out_of_range_scores() {
        assert_eq!(parse_score("Score: 150%").unwrap(), 100.0);
        assert_eq!(parse_score("Score: 999.9%").unwrap(), 100.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            parse_score("I would rate this an 8 out of 10"),
            Err(Error::ScoreParse { .. })
        ));
        assert!(parse_score("Score: n/a%").is_err());
        assert!(parse_score("").is_err());
    }

    #[test]
    fn round_trips_half_percent_grid() {
        let mut v = 0.0f64;
        while v <= 100.0 {
            let reply = format!("Score: {v}%");
            assert_eq!(parse_score(&reply).unwrap(), v, "at {v}");
            v += 0.5;
        }
    }

    #[test]
    fn data_url_shape() {
        let img = Raster::filled(2, 2, 3, ColorTag::Srgb, 0.5);
        let url = png_data_url(&img).unwrap();
        assert!(url.starts_with("data:image/png;base64,"));
        let linear = Raster::filled(2, 2, 3, ColorTag::LinearRgb, 0.5);
        assert!(png_data_url(&linear).is_err());
    }

    #[test]
    fn request_body_holds_prompt_and_two_images() {
        let req = JudgeRequest::new("http://localhost/v1/chat/completions", "judge-model")
            .with_artifact("fog");
        let img = Raster::filled(2, 2, 3, ColorTag::Srgb, 0.3);
        let body = request_body(&req, &img, &img).unwrap();
        assert_eq!(body["model"], "judge-model");
        let content = body["messages"][0]["content"].as_array().unwrap();
        assert_eq!(content.len(), 3);
        assert!(content[0]["text"].as_str().unwrap().contains("fog"));
        assert_eq!(content[1]["type"], "image_url");
        assert_eq!(content[2]["type"], "image_url");
    }

    #[test]
    fn extracts_string_and_part_array_content() {
        let plain = json!({"choices": [{"message": {"content": "Score: 5%"}}]});
        assert_eq!(extract_content(&plain).unwrap(), "Score: 5%");
        let parts = json!({"choices": [{"message": {"content": [
            {"type": "text", "text": "Score: "},
            {"type": "text", "text": "5%"},
        ]}}]});
        assert_eq!(extract_content(&parts).unwrap(), "Score: 5%");
        assert!(extract_content(&json!({"error": "nope"})).is_none());
    }

    #[test]
    fn env_config_requires_base_and_model() {
        // Serialize env mutation: tests run multi-threaded.
        static LOCK: std::sync::Mutex<()> = std::sync::Mutex::new(());
        let _guard = LOCK.lock().unwrap();
        std::env::remove_var("VLM_API_BASE");
        std::env::remove_var("VLM_MODEL");
        std::env::remove_var("VLM_API_KEY");
        assert!(matches!(
            JudgeRequest::from_env(),
            Err(Error::Configuration(_))
        ));
        std::env::set_var("VLM_API_BASE", "http://localhost:9/v1/");
        assert!(matches!(
            JudgeRequest::from_env(),
            Err(Error::Configuration(_))
        ));
        std::env::set_var("VLM_MODEL", "judge");
        let req = JudgeRequest::from_env().unwrap();
        assert_eq!(req.endpoint, "http://localhost:9/v1/chat/completions");
        assert_eq!(req.model, "judge");
        assert!(req.api_key.is_none());
        std::env::remove_var("VLM_API_BASE");
        std::env::remove_var("VLM_MODEL");
    }
}
