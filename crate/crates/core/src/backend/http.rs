//! Live OpenAI-compatible endpoints with retry and exponential backoff.

use std::time::Duration;

use super::limiter::InFlightLimiter;
use super::protocol::request_body;
use super::{Backend, BackendError, GenerationRequest, RawResponse, DEFAULT_MAX_IN_FLIGHT, ENV_API_BASE, ENV_API_KEY};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Minimal POST transport so retry logic can run against a fake.
pub trait HttpTransport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &str) -> Result<HttpReply, String>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(format!("cannot build HTTP client: {e}")))?;
        Ok(Self { client })
    }
}

impl HttpTransport for ReqwestTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &str) -> Result<HttpReply, String> {
        let mut req = self.client.post(url).header("content-type", "application/json").body(body.to_owned());
        if let Some(token) = bearer {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt, `R`.
    pub max_retries: u32,
    pub initial_delay: Duration,
    pub max_delay: Duration,
    pub multiplier: f64,
    /// Extra random share of each delay, in [0, 1].
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 5,
            initial_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
            multiplier: 2.0,
            jitter: 0.25,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        Self { max_retries, initial_delay: Duration::ZERO, max_delay: Duration::ZERO, multiplier: 1.0, jitter: 0.0 }
    }

    /// Delay before each retry. Nondecreasing even with jitter.
    pub fn schedule(&self, rng: &mut impl rand::Rng) -> Vec<Duration> {
        let mut out = Vec::with_capacity(self.max_retries as usize);
        let mut floor = Duration::ZERO;
        let cap = self.max_delay.as_secs_f64();
        for i in 0..self.max_retries {
            let base = (self.initial_delay.as_secs_f64() * self.multiplier.powi(i as i32)).min(cap);
            let jittered = base * (1.0 + self.jitter.clamp(0.0, 1.0) * rng.random::<f64>());
            let delay = Duration::from_secs_f64(jittered.min(cap.max(base))).max(floor);
            floor = delay;
            out.push(delay);
        }
        out
    }
}

enum Failure {
    Retryable(BackendError),
    Fatal(BackendError),
}

pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    transport: Box<dyn HttpTransport>,
    retry: RetryPolicy,
    limiter: InFlightLimiter,
    sleep: fn(Duration),
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, transport: Box<dyn HttpTransport>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            api_key,
            transport,
            retry: RetryPolicy::default(),
            limiter: InFlightLimiter::new(DEFAULT_MAX_IN_FLIGHT),
            sleep: std::thread::sleep,
        }
    }

    /// Gateway root from `NLTS_API_BASE`, bearer token from `NLTS_API_KEY`.
    pub fn from_env() -> Result<Self, BackendError> {
        let base =
            std::env::var(ENV_API_BASE).map_err(|_| BackendError::Config(format!("{ENV_API_BASE} is not set")))?;
        let key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        let transport = ReqwestTransport::new(Duration::from_secs(120))?;
        Ok(Self::new(base, key, Box::new(transport)))
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, max: usize) -> Self {
        self.limiter = InFlightLimiter::new(max);
        self
    }

    /// Replace the sleeper (tests use a no-op).
    pub fn with_sleep(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    fn attempt(&self, url: &str, body: &str) -> Result<String, Failure> {
        let reply = self
            .transport
            .post_json(url, self.api_key.as_deref(), body)
            .map_err(|e| Failure::Retryable(BackendError::Transport(e)))?;
        match reply.status {
            200..=299 => Ok(reply.body),
            429 => Err(Failure::Retryable(BackendError::RateLimit { attempts: 0 })),
            401 | 403 => Err(Failure::Fatal(BackendError::Auth(reply.status))),
            500..=599 => Err(Failure::Retryable(BackendError::Transport(format!("HTTP {} from {url}", reply.status)))),
            status => {
                let snippet: String = reply.body.chars().take(200).collect();
                Err(Failure::Fatal(BackendError::Protocol(format!("HTTP {status}: {snippet}"))))
            }
        }
    }
}

impl Backend for HttpBackend {
    fn identity(&self) -> String {
        format!("http:{}", self.base_url)
    }

    fn send(&self, request: &GenerationRequest) -> Result<RawResponse, BackendError> {
        let url = format!("{}/{}", self.base_url, request.prompt.endpoint_path());
        let body = serde_json::to_string(&request_body(request)).expect("json values serialize");
        let delays = self.retry.schedule(&mut rand::rng());
        let _permit = self.limiter.acquire();
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            match self.attempt(&url, &body) {
                Ok(body) => return Ok(RawResponse { body, attempts }),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(e)) => match delays.get(attempts as usize - 1) {
                    Some(&delay) => (self.sleep)(delay),
                    None => {
                        return Err(match e {
                            BackendError::RateLimit { .. } => BackendError::RateLimit { attempts },
                            other => other,
                        })
                    }
                },
            }
        }
    }

    fn max_in_flight(&self) -> usize {
        self.limiter.max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{generate, GenerationParams, Prompt};
    use std::sync::Mutex;

    struct Scripted {
        replies: Mutex<Vec<Result<HttpReply, String>>>,
        calls: Mutex<Vec<(String, Option<String>)>>,
    }

    impl Scripted {
        fn new(mut replies: Vec<Result<HttpReply, String>>) -> Self {
            replies.reverse();
            Self { replies: Mutex::new(replies), calls: Mutex::new(Vec::new()) }
        }
    }

    impl HttpTransport for &'static Scripted {
        fn post_json(&self, url: &str, bearer: Option<&str>, _body: &str) -> Result<HttpReply, String> {
            self.calls.lock().unwrap().push((url.to_owned(), bearer.map(str::to_owned)));
            self.replies.lock().unwrap().pop().expect("script exhausted")
        }
    }

    fn status(code: u16) -> Result<HttpReply, String> {
        Ok(HttpReply {
            status: code,
            body: if code == 200 {
                r#"{"choices":[{"index":0,"text":"1 2"}],"usage":{"prompt_tokens":3,"completion_tokens":2}}"#.into()
            } else {
                "{}".into()
            },
        })
    }

    fn backend(script: Vec<Result<HttpReply, String>>, retries: u32) -> (HttpBackend, &'static Scripted) {
        let t: &'static Scripted = Box::leak(Box::new(Scripted::new(script)));
        let b = HttpBackend::new("http://gw/", Some("sk-test".into()), Box::new(t))
            .with_retry(RetryPolicy::no_delay(retries))
            .with_sleep(|_| {});
        (b, t)
    }

    fn request() -> GenerationRequest {
        GenerationRequest::new(Prompt::Raw("1 2, ".into()), GenerationParams::default())
    }

    #[test]
    fn retries_rate_limits_then_succeeds() {
        let (b, t) = backend(vec![status(429), status(429), status(200)], 3);
        let g = generate(&b, &request()).unwrap();
        assert_eq!(g.texts, vec!["1 2"]);
        assert_eq!(g.usage.requests, 3);
        let calls = t.calls.lock().unwrap();
        assert_eq!(calls[0].0, "http://gw/v1/completions");
        assert_eq!(calls[0].1.as_deref(), Some("sk-test"));
    }

    #[test]
    fn gives_up_after_retry_budget() {
        let (b, t) = backend(vec![status(429); 3], 2);
        assert_eq!(b.send(&request()).unwrap_err(), BackendError::RateLimit { attempts: 3 });
        assert_eq!(t.calls.lock().unwrap().len(), 3);
    }

    #[test]
    fn transport_failures_are_retried() {
        let (b, _) = backend(vec![Err("connection reset".into()), status(503), status(200)], 2);
        assert_eq!(b.send(&request()).unwrap().attempts, 3);
        let (b, _) = backend(vec![Err("connection reset".into())], 0);
        assert!(matches!(b.send(&request()), Err(BackendError::Transport(_))));
    }

    #[test]
    fn auth_and_client_errors_are_not_retried() {
        let (b, t) = backend(vec![status(401)], 3);
        assert_eq!(b.send(&request()).unwrap_err(), BackendError::Auth(401));
        assert_eq!(t.calls.lock().unwrap().len(), 1);
        let (b, _) = backend(vec![status(400)], 3);
        assert!(matches!(b.send(&request()), Err(BackendError::Protocol(_))));
    }

    #[test]
    fn malformed_success_body_is_protocol_error() {
        let (b, _) = backend(vec![Ok(HttpReply { status: 200, body: "<html>".into() })], 0);
        assert!(matches!(generate(&b, &request()), Err(BackendError::Protocol(_))));
    }

    #[test]
    fn backoff_schedule_is_nondecreasing_and_capped() {
        let policy = RetryPolicy {
            max_retries: 12,
            initial_delay: Duration::from_millis(100),
            max_delay: Duration::from_secs(2),
            multiplier: 2.0,
            jitter: 1.0,
        };
        for seed in 0..50 {
            let mut rng = crate::rng::substream(seed, 0);
            let d = policy.schedule(&mut rng);
            assert_eq!(d.len(), 12);
            assert!(d.windows(2).all(|w| w[0] <= w[1]), "{d:?}");
            assert!(d.iter().all(|x| *x <= Duration::from_secs(2)));
            assert!(d[0] >= Duration::from_millis(100));
        }
    }
}
