use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;

use crate::error::GatewayError;
use crate::hash::{prepare, PreparedRequest};
use crate::request::{ChatRequest, ChatResponse, Message};
use crate::store::ReplayStore;
use crate::structured::{parse_reply, StructuredOutput};
use crate::transport::Transport;

/// Where responses come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Call the transport; nothing is stored.
    Live,
    /// Serve from the store when an entry exists, otherwise call the
    /// transport and store the reply. Interrupted recordings resume cheaply.
    Record,
    /// Serve only from the store. The transport is never touched.
    Replay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts including the first one.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
    /// Relative jitter: each delay is scaled by a uniform factor in `1 ± jitter`.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
            factor: 2.0,
            jitter: 0.2,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based), without jitter.
    pub fn nominal_delay(&self, retry: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(retry as i32))
    }

    fn delay(&self, retry: u32) -> Duration {
        let nominal = self.nominal_delay(retry);
        if self.jitter <= 0.0 {
            return nominal;
        }
        let scale = rand::thread_rng().gen_range(1.0 - self.jitter..=1.0 + self.jitter);
        nominal.mul_f64(scale.max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub retry: RetryPolicy,
    /// Upper bound on concurrent transport calls.
    pub max_in_flight: usize,
    /// Minimum spacing between the starts of two transport calls.
    pub min_interval: Option<Duration>,
    /// Corrective re-prompts allowed for a structured reply.
    pub structured_retries: u32,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            retry: RetryPolicy::default(),
            max_in_flight: 4,
            min_interval: None,
            structured_retries: 2,
        }
    }
}

impl GatewayConfig {
    /// Spacing that keeps the start rate at or below `per_minute`.
    pub fn with_requests_per_minute(mut self, per_minute: f64) -> Self {
        self.min_interval = (per_minute > 0.0).then(|| Duration::from_secs_f64(60.0 / per_minute));
        self
    }
}

/// Counters accumulated over the lifetime of a gateway.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GatewayStats {
    pub requests: u64,
    pub transport_calls: u64,
    pub retries: u64,
    pub replay_hits: u64,
    pub recorded: u64,
    pub reprompts: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub peak_in_flight: u64,
}

#[derive(Default)]
struct Counters {
    requests: AtomicU64,
    transport_calls: AtomicU64,
    retries: AtomicU64,
    replay_hits: AtomicU64,
    recorded: AtomicU64,
    reprompts: AtomicU64,
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
}

struct LimiterState {
    in_flight: usize,
    peak: usize,
    next_start: Option<Instant>,
}

/// Counting semaphore plus optional start-time pacing.
struct Limiter {
    max: usize,
    min_interval: Option<Duration>,
    state: Mutex<LimiterState>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut st = self.0.state.lock().unwrap();
        st.in_flight -= 1;
        drop(st);
        self.0.freed.notify_one();
    }
}

impl Limiter {
    fn acquire(&self, sleep: &Sleeper) -> Permit<'_> {
        let mut st = self.state.lock().unwrap();
        while st.in_flight >= self.max {
            st = self.freed.wait(st).unwrap();
        }
        st.in_flight += 1;
        st.peak = st.peak.max(st.in_flight);
        let wait = self.min_interval.map(|gap| {
            let now = Instant::now();
            let start = st.next_start.map_or(now, |t| t.max(now));
            st.next_start = Some(start + gap);
            start.saturating_duration_since(now)
        });
        drop(st);
        let permit = Permit(self);
        if let Some(w) = wait.filter(|w| !w.is_zero()) {
            sleep(w);
        }
        permit
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// Shared front for every completion call. Cheap to share by reference across
/// worker threads.
pub struct Gateway {
    mode: Mode,
    transport: Option<Arc<dyn Transport>>,
    store: Option<ReplayStore>,
    config: GatewayConfig,
    limiter: Limiter,
    sleeper: Sleeper,
    counters: Counters,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("mode", &self.mode)
            .field("store", &self.store)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(
        mode: Mode,
        transport: Option<Arc<dyn Transport>>,
        store: Option<ReplayStore>,
        config: GatewayConfig,
    ) -> Result<Self, GatewayError> {
        match mode {
            Mode::Live | Mode::Record if transport.is_none() => {
                return Err(GatewayError::Config(format!("{mode:?} mode needs a transport")))
            }
            Mode::Record | Mode::Replay if store.is_none() => {
                return Err(GatewayError::Config(format!("{mode:?} mode needs a replay store")))
            }
            _ => {}
        }
        if config.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be at least 1".into()));
        }
        if config.retry.max_attempts == 0 {
            return Err(GatewayError::Config("max_attempts must be at least 1".into()));
        }
        Ok(Self {
            mode,
            limiter: Limiter {
                max: config.max_in_flight,
                min_interval: config.min_interval,
                state: Mutex::new(LimiterState {
                    in_flight: 0,
                    peak: 0,
                    next_start: None,
                }),
                freed: Condvar::new(),
            },
            transport,
            store,
            config,
            sleeper: Arc::new(std::thread::sleep),
            counters: Counters::default(),
        })
    }

    /// Replay-only gateway over `store`.
    pub fn replay(store: ReplayStore) -> Self {
        Self::new(Mode::Replay, None, Some(store), GatewayConfig::default()).expect("valid replay config")
    }

    /// Replaces the function used for backoff and pacing waits.
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Arc::new(sleeper);
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn stats(&self) -> GatewayStats {
        let c = &self.counters;
        let get = |a: &AtomicU64| a.load(Ordering::SeqCst);
        GatewayStats {
            requests: get(&c.requests),
            transport_calls: get(&c.transport_calls),
            retries: get(&c.retries),
            replay_hits: get(&c.replay_hits),
            recorded: get(&c.recorded),
            reprompts: get(&c.reprompts),
            prompt_tokens: get(&c.prompt_tokens),
            completion_tokens: get(&c.completion_tokens),
            peak_in_flight: self.limiter.state.lock().unwrap().peak as u64,
        }
    }

    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.validate()?;
        self.counters.requests.fetch_add(1, Ordering::SeqCst);
        let prepared = prepare(req)?;

        if matches!(self.mode, Mode::Record | Mode::Replay) {
            let store = self.store.as_ref().expect("checked in new");
            if let Some(resp) = store.get(&prepared.digest)? {
                self.counters.replay_hits.fetch_add(1, Ordering::SeqCst);
                return Ok(resp);
            }
            if self.mode == Mode::Replay {
                return Err(GatewayError::ReplayMiss {
                    digest: prepared.digest,
                });
            }
        }

        let resp = self.send_with_retries(&prepared)?;
        self.counters.prompt_tokens.fetch_add(resp.prompt_tokens, Ordering::SeqCst);
        self.counters.completion_tokens.fetch_add(resp.completion_tokens, Ordering::SeqCst);
        if self.mode == Mode::Record {
            let store = self.store.as_ref().expect("checked in new");
            store.put(&prepared.digest, &prepared.canonical, &resp)?;
            self.counters.recorded.fetch_add(1, Ordering::SeqCst);
        }
        Ok(resp)
    }

    fn send_with_retries(&self, prepared: &PreparedRequest) -> Result<ChatResponse, GatewayError> {
        let transport = self.transport.as_ref().expect("checked in new");
        let policy = &self.config.retry;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = {
                let _permit = self.limiter.acquire(&self.sleeper);
                self.counters.transport_calls.fetch_add(1, Ordering::SeqCst);
                transport.send(prepared)
            };
            match result {
                Ok(resp) => return Ok(resp),
                Err(e) if !e.is_transient() => return Err(GatewayError::Transport(e)),
                Err(e) if attempt >= policy.max_attempts => {
                    return Err(GatewayError::Exhausted { attempts: attempt, last: e })
                }
                Err(e) => {
                    let wait = policy.delay(attempt - 1);
                    log::warn!(
                        "request {} attempt {attempt} failed ({e}); retrying in {:.2}s",
                        &prepared.digest[..12],
                        wait.as_secs_f64()
                    );
                    self.counters.retries.fetch_add(1, Ordering::SeqCst);
                    (self.sleeper)(wait);
                }
            }
        }
    }

    /// Completes `req` and parses the reply as `T`.
    ///
    /// When the request carries no schema, `T::schema()` is attached. A reply
    /// that fails to parse or check triggers a corrective re-prompt carrying
    /// the rejected text and the reason, up to `structured_retries` times.
    pub fn complete_structured<T: StructuredOutput>(&self, req: &ChatRequest) -> Result<T, GatewayError> {
        let mut req = req.clone();
        if req.response_schema.is_none() {
            req.response_schema = Some(T::schema());
        }
        let max = self.config.structured_retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let resp = self.complete(&req)?;
            match parse_reply::<T>(&resp.text) {
                Ok(v) => return Ok(v),
                Err(message) if attempt >= max => {
                    return Err(GatewayError::StructuredOutput {
                        attempts: attempt,
                        message,
                        raw: resp.text,
                    })
                }
                Err(message) => {
                    self.counters.reprompts.fetch_add(1, Ordering::SeqCst);
                    req.messages.push(Message::user(format!(
                        "Your previous reply was:\n{}\n\nIt was rejected: {message}. \
                         Reply again with only a JSON document that satisfies the schema.",
                        resp.text
                    )));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::TransportError;
    use crate::transport::{FailOnUse, ScriptedTransport};
    use serde::Deserialize;
    use serde_json::{json, Value};

    #[derive(Debug, Deserialize, PartialEq)]
    struct Verdict {
        correct: bool,
    }

    impl StructuredOutput for Verdict {
        fn schema() -> Value {
            json!({"type": "object", "properties": {"correct": {"type": "boolean"}}, "required": ["correct"]})
        }
    }

    fn live(t: Arc<dyn Transport>) -> Gateway {
        Gateway::new(Mode::Live, Some(t), None, GatewayConfig::default())
            .unwrap()
            .with_sleeper(|_| {})
    }

    fn req(text: &str) -> ChatRequest {
        ChatRequest::new("gemini-2.0-flash", vec![Message::user(text)])
    }

    fn status(code: u16) -> Result<String, TransportError> {
        Err(TransportError::Status { code, body: String::new() })
    }

    #[test]
    fn mode_requirements() {
        assert!(Gateway::new(Mode::Live, None, None, GatewayConfig::default()).is_err());
        assert!(Gateway::new(Mode::Replay, None, None, GatewayConfig::default()).is_err());
        let t: Arc<dyn Transport> = Arc::new(FailOnUse::default());
        assert!(Gateway::new(Mode::Record, Some(t), None, GatewayConfig::default()).is_err());
    }

    #[test]
    fn retries_transient_then_succeeds() {
        let t = Arc::new(ScriptedTransport::new([status(429), status(503), Ok("ok".into())]));
        let gw = live(t.clone());
        assert_eq!(gw.complete(&req("hi")).unwrap().text, "ok");
        assert_eq!(gw.stats().retries, 2);
        assert_eq!(t.calls(), 3);
    }

    #[test]
    fn exhaustion_carries_last_cause() {
        let t = Arc::new(ScriptedTransport::new([status(500), status(502), status(504), Ok("late".into())]));
        match live(t.clone()).complete(&req("hi")) {
            Err(GatewayError::Exhausted { attempts: 3, last: TransportError::Status { code: 504, .. } }) => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(t.calls(), 3);
    }

    #[test]
    fn permanent_errors_are_not_retried() {
        let t = Arc::new(ScriptedTransport::new([status(400), Ok("never".into())]));
        assert!(matches!(live(t.clone()).complete(&req("hi")), Err(GatewayError::Transport(_))));
        assert_eq!(t.calls(), 1);
    }

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        assert_eq!(p.nominal_delay(0), Duration::from_secs(1));
        assert_eq!(p.nominal_delay(2), Duration::from_secs(4));
        for _ in 0..100 {
            let d = p.delay(1).as_secs_f64();
            assert!((1.6..=2.4).contains(&d), "{d}");
        }
        let waits = Arc::new(Mutex::new(Vec::new()));
        let w = waits.clone();
        let t = Arc::new(ScriptedTransport::new([status(429), status(429), Ok("x".into())]));
        let gw = Gateway::new(
            Mode::Live,
            Some(t),
            None,
            GatewayConfig {
                retry: RetryPolicy { jitter: 0.0, ..RetryPolicy::default() },
                ..GatewayConfig::default()
            },
        )
        .unwrap()
        .with_sleeper(move |d| w.lock().unwrap().push(d));
        gw.complete(&req("x")).unwrap();
        assert_eq!(*waits.lock().unwrap(), vec![Duration::from_secs(1), Duration::from_secs(2)]);
    }

    #[test]
    fn structured_first_try() {
        let t = Arc::new(ScriptedTransport::replies([r#"{"correct": true}"#]));
        let v: Verdict = live(t).complete_structured(&req("judge")).unwrap();
        assert_eq!(v, Verdict { correct: true });
    }

    #[test]
    fn structured_reprompt_then_success() {
        let t = Arc::new(ScriptedTransport::replies(["I believe it is correct.", r#"{"correct": false}"#]));
        let gw = live(t.clone());
        let v: Verdict = gw.complete_structured(&req("judge")).unwrap();
        assert_eq!(v, Verdict { correct: false });
        assert_eq!(t.calls(), 2);
        assert_eq!(gw.stats().reprompts, 1);
    }

    #[test]
    fn structured_gives_up_after_k_reprompts() {
        let t = Arc::new(ScriptedTransport::replies(["nope", "{\"correct\": 3}", "still no", "{\"correct\": true}"]));
        let gw = live(t.clone());
        match gw.complete_structured::<Verdict>(&req("judge")) {
            Err(GatewayError::StructuredOutput { attempts: 3, raw, .. }) => assert_eq!(raw, "still no"),
            other => panic!("{other:?}"),
        }
        assert_eq!(t.calls(), 3);
    }

    #[test]
    fn replay_hit_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReplayStore::open(dir.path());
        let r = req("is there a chair?");
        let p = prepare(&r).unwrap();
        store.put(&p.digest, &p.canonical, &ChatResponse::text("yes")).unwrap();

        let fail = Arc::new(FailOnUse::default());
        let gw = Gateway::new(Mode::Replay, Some(fail.clone()), Some(store), GatewayConfig::default()).unwrap();
        let a = gw.complete(&r).unwrap();
        let b = gw.complete(&r).unwrap();
        assert_eq!(a.text, "yes");
        assert_eq!(a, b);
        match gw.complete(&req("something else")) {
            Err(GatewayError::ReplayMiss { digest }) => {
                assert_eq!(digest, prepare(&req("something else")).unwrap().digest)
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(fail.calls(), 0);
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let t = Arc::new(ScriptedTransport::replies(["one", "two"]));
        let rec = Gateway::new(Mode::Record, Some(t.clone()), Some(ReplayStore::open(dir.path())), GatewayConfig::default())
            .unwrap();
        let live_out: Vec<String> = ["a", "b", "a"].iter().map(|q| rec.complete(&req(q)).unwrap().text).collect();
        assert_eq!(live_out, ["one", "two", "one"]);
        assert_eq!(t.calls(), 2);
        assert_eq!(rec.stats().recorded, 2);

        let replay = Gateway::replay(ReplayStore::open(dir.path()));
        let replayed: Vec<String> = ["a", "b", "a"].iter().map(|q| replay.complete(&req(q)).unwrap().text).collect();
        assert_eq!(live_out, replayed);
    }

    #[test]
    fn pacing_spaces_request_starts() {
        let waits = Arc::new(Mutex::new(Vec::new()));
        let w = waits.clone();
        let t = Arc::new(ScriptedTransport::replies(["a", "b", "c"]));
        let cfg = GatewayConfig::default().with_requests_per_minute(60.0);
        let gw = Gateway::new(Mode::Live, Some(t), None, cfg)
            .unwrap()
            .with_sleeper(move |d| w.lock().unwrap().push(d));
        for q in ["1", "2", "3"] {
            gw.complete(&req(q)).unwrap();
        }
        let waits = waits.lock().unwrap();
        // The first call starts immediately; the others wait roughly a second each.
        assert_eq!(waits.len(), 2);
        assert!(waits.iter().all(|d| d.as_secs_f64() > 0.5 && d.as_secs_f64() <= 2.0), "{waits:?}");
    }
}
