//! HTTP client for OpenAI-compatible chat and embedding endpoints and a
//! Cohere-style rerank endpoint.

use serde::Deserialize;
use serde_json::json;

use super::{ChatRequest, GatewayError, Provider, ProviderConfig, ProviderError};

pub struct OpenAiCompatible {
    client: reqwest::blocking::Client,
    base_url: String,
    rerank_url: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    index: usize,
    embedding: Vec<f32>,
}

#[derive(Deserialize)]
struct RerankResponse {
    results: Vec<RerankItem>,
}

#[derive(Deserialize)]
struct RerankItem {
    index: usize,
    relevance_score: f64,
}

impl OpenAiCompatible {
    pub fn from_config(config: &ProviderConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        let trim = |u: &str| u.trim_end_matches('/').to_string();
        if config.base_url.is_empty() {
            return Err(GatewayError::Config("provider base_url is empty".into()));
        }
        Ok(Self {
            client,
            base_url: trim(&config.base_url),
            rerank_url: trim(config.rerank_base_url.as_deref().unwrap_or(&config.base_url)),
            api_key: std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty()),
        })
    }

    fn post<T: for<'de> Deserialize<'de>>(&self, url: String, body: serde_json::Value) -> Result<T, ProviderError> {
        let mut req = self.client.post(url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            let body: String = text.chars().take(500).collect();
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body,
            });
        }
        serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))
    }
}

impl Provider for OpenAiCompatible {
    fn chat(&self, req: &ChatRequest<'_>) -> Result<String, ProviderError> {
        let mut messages = Vec::new();
        if !req.system.is_empty() {
            messages.push(json!({"role": "system", "content": req.system}));
        }
        messages.push(json!({"role": "user", "content": req.user}));
        let resp: ChatResponse = self.post(
            format!("{}/chat/completions", self.base_url),
            json!({"model": req.model, "messages": messages}),
        )?;
        resp.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Malformed("no message content in response".into()))
    }

    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        let mut resp: EmbeddingResponse = self.post(
            format!("{}/embeddings", self.base_url),
            json!({"model": model, "input": texts}),
        )?;
        resp.data.sort_by_key(|d| d.index);
        if resp.data.iter().enumerate().any(|(i, d)| d.index != i) {
            return Err(ProviderError::Malformed(
                "embedding indices are not a permutation".into(),
            ));
        }
        Ok(resp.data.into_iter().map(|d| d.embedding).collect())
    }

    fn rerank(
        &self,
        model: &str,
        query: &str,
        documents: &[String],
        top_n: usize,
    ) -> Result<Vec<(usize, f64)>, ProviderError> {
        let resp: RerankResponse = self.post(
            format!("{}/rerank", self.rerank_url),
            json!({"model": model, "query": query, "documents": documents, "top_n": top_n}),
        )?;
        let mut out: Vec<(usize, f64)> = resp.results.into_iter().map(|r| (r.index, r.relevance_score)).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, ProviderKind, RetryPolicy, Role};
    use crate::prompts::Prompt;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;
    use std::time::Duration;

    /// Serves one canned response per connection and reports each request
    /// line and body.
    fn serve(responses: Vec<(u16, String)>) -> (String, mpsc::Receiver<(String, String)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                let mut len = 0;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    if h.trim().is_empty() {
                        break;
                    }
                    if let Some(v) = h.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                tx.send((request_line.trim().to_string(), String::from_utf8(buf).unwrap()))
                    .unwrap();
                let resp = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(resp.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}/v1"), rx)
    }

    fn config(base: &str) -> ProviderConfig {
        ProviderConfig {
            kind: ProviderKind::OpenaiCompatible,
            api_key_env: "METARAG_TEST_UNSET_KEY".into(),
            timeout: Duration::from_millis(300),
            retry: RetryPolicy {
                max_attempts: 2,
                backoff_base: Duration::ZERO,
            },
            ..ProviderConfig::openai_compatible(base)
        }
    }

    fn prompt() -> Prompt {
        Prompt::render(crate::prompts::task::ANSWER, &[("query", "q"), ("context", "c")], None).unwrap()
    }

    #[test]
    fn wire_formats_round_trip() {
        let (base, rx) = serve(vec![
            (
                200,
                r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}]}"#.into(),
            ),
            (
                200,
                r#"{"data":[{"index":1,"embedding":[0.0,1.0]},{"index":0,"embedding":[1.0,0.0]}]}"#.into(),
            ),
            (
                200,
                r#"{"results":[{"index":1,"relevance_score":0.2},{"index":0,"relevance_score":0.9}]}"#.into(),
            ),
        ]);
        let gw = Gateway::from_config(config(&base)).unwrap();

        assert_eq!(gw.chat(Role::Generator, &prompt()).unwrap(), "hello");
        let (line, body) = rx.recv().unwrap();
        assert_eq!(line, "POST /v1/chat/completions HTTP/1.1");
        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["model"], "o4-mini");
        assert_eq!(v["messages"][1]["role"], "user");

        let vecs = gw.embed(&["a".into(), "b".into()]).unwrap();
        assert_eq!(vecs, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let (line, body) = rx.recv().unwrap();
        assert_eq!(line, "POST /v1/embeddings HTTP/1.1");
        assert_eq!(
            serde_json::from_str::<serde_json::Value>(&body).unwrap()["input"][1],
            "b"
        );

        let ranked = gw.rerank_external("q", &["x".into(), "y".into()], 2).unwrap();
        assert_eq!(ranked, vec![(0, 0.9), (1, 0.2)]);
        let (line, body) = rx.recv().unwrap();
        assert_eq!(line, "POST /v1/rerank HTTP/1.1");
        assert_eq!(serde_json::from_str::<serde_json::Value>(&body).unwrap()["top_n"], 2);
    }

    #[test]
    fn server_errors_are_retried_and_client_errors_are_not() {
        let (base, _rx) = serve(vec![
            (503, "{}".into()),
            (200, r#"{"choices":[{"message":{"content":"ok"}}]}"#.into()),
            (400, "bad request".into()),
        ]);
        let gw = Gateway::from_config(config(&base)).unwrap();
        assert_eq!(gw.chat(Role::Judge, &prompt()).unwrap(), "ok");
        match gw.chat(Role::Judge, &prompt()) {
            Err(GatewayError::Status {
                status: 400,
                role: Role::Judge,
                ..
            }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn timeout_reports_role_and_attempts() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}/v1", listener.local_addr().unwrap());
        let hold = std::thread::spawn(move || {
            let mut held = Vec::new();
            for _ in 0..2 {
                held.push(listener.accept().unwrap().0);
            }
            std::thread::sleep(Duration::from_secs(1));
        });
        let gw = Gateway::from_config(config(&base)).unwrap();
        match gw.chat(Role::PipelineHelper, &prompt()) {
            Err(GatewayError::Transport { role, attempts, .. }) => {
                assert_eq!(role, Role::PipelineHelper);
                assert_eq!(attempts, 2);
            }
            other => panic!("{other:?}"),
        }
        hold.join().unwrap();
    }
}
