use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use crate::{ProbeConfig, ProbeError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    /// Attempts beyond the first.
    pub retries: u32,
}

/// Anything that turns prompt text into a completion.
pub trait CompletionModel: Sync {
    fn complete(&self, prompt: &str) -> Result<Completion>;
}

impl<F> CompletionModel for F
where
    F: Fn(&str) -> Result<String> + Sync,
{
    fn complete(&self, prompt: &str) -> Result<Completion> {
        Ok(Completion {
            text: self(prompt)?,
            retries: 0,
        })
    }
}

pub struct HttpModel {
    cfg: ProbeConfig,
    agent: ureq::Agent,
}

impl HttpModel {
    pub fn new(cfg: ProbeConfig) -> Result<Self> {
        cfg.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { cfg, agent })
    }

    pub fn config(&self) -> &ProbeConfig {
        &self.cfg
    }

    fn attempt(&self, body: &str) -> std::result::Result<(u16, String), String> {
        let mut req = self
            .agent
            .post(&self.cfg.endpoint_url)
            .header("Content-Type", "application/json");
        if !self.cfg.api_key.is_empty() {
            req = req.header("Authorization", &format!("Bearer {}", self.cfg.api_key.expose()));
        }
        let mut resp = req.send(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

impl CompletionModel for HttpModel {
    fn complete(&self, prompt: &str) -> Result<Completion> {
        let body = json!({
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
            "max_tokens": 4,
        })
        .to_string();
        let mut retries = 0;
        loop {
            let failure = match self.attempt(&body) {
                Ok((status, text)) if (200..300).contains(&status) => {
                    return extract_completion(&text).map(|text| Completion { text, retries });
                }
                Ok((status, text)) if status == 429 || status >= 500 => ProbeError::Endpoint { status, body: text },
                Ok((status, text)) => return Err(ProbeError::Endpoint { status, body: text }),
                Err(e) => ProbeError::Transport(e),
            };
            if retries >= self.cfg.max_retries {
                return Err(failure);
            }
            thread::sleep(Duration::from_millis(self.cfg.backoff_ms.saturating_mul(1 << retries.min(16))));
            retries += 1;
        }
    }
}

fn extract_completion(body: &str) -> Result<String> {
    let v: Value = serde_json::from_str(body).map_err(|e| ProbeError::Protocol(format!("invalid JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| ProbeError::Protocol("response has no choices[0].message.content".into()))
}

/// One POST per call, with retries on transport errors, 429 and 5xx.
pub fn query_model(cfg: &ProbeConfig, text: &str) -> Result<Completion> {
    HttpModel::new(cfg.clone())?.complete(text)
}

/// Completes every prompt with at most `max_in_flight` outstanding requests.
/// Output order matches input order.
pub fn run_prompts<M: CompletionModel>(model: &M, prompts: &[String], max_in_flight: usize) -> Vec<Result<Completion>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<Completion>>>> = prompts.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..max_in_flight.max(1).min(prompts.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= prompts.len() {
                    break;
                }
                let r = model.complete(&prompts[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completion_extraction() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"1"}}]}"#;
        assert_eq!(extract_completion(ok).unwrap(), "1");
        assert!(matches!(extract_completion("{not json"), Err(ProbeError::Protocol(_))));
        assert!(matches!(extract_completion(r#"{"choices":[]}"#), Err(ProbeError::Protocol(_))));
    }

    #[test]
    fn concurrent_runner_keeps_order() {
        let model = |p: &str| -> Result<String> { Ok(p.chars().rev().collect()) };
        let prompts: Vec<String> = (0..37).map(|i| format!("p{i}")).collect();
        for cap in [1, 3, 64] {
            let out = run_prompts(&model, &prompts, cap);
            for (i, r) in out.iter().enumerate() {
                assert_eq!(r.as_ref().unwrap().text, format!("p{i}").chars().rev().collect::<String>());
            }
        }
    }
}
