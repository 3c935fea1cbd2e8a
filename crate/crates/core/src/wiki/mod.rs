//! Wikipedia lookup used as the external knowledge source.
//!
//! Given an entity, four strategies are tried strictly in order, stopping
//! at the first success:
//!
//! 1. direct page lookup of the entity title,
//! 2. typed-suffix lookup (`"X (politician)"`, ...),
//! 3. the search API, taking the first result not already tried,
//! 4. disambiguation resolution: the first link on the entity's
//!    disambiguation page whose title contains the entity.
//!
//! A success is a non-disambiguation page with a non-empty lead extract.

mod entity;
pub mod mock;
mod ratelimit;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::disk_cache::{content_key, DiskCache};
use crate::retry::{Attempt, RetryPolicy};

pub use entity::extract_entity;
pub use ratelimit::{Clock, SystemClock, TokenBucket, VirtualClock};

pub const DEFAULT_API_ENDPOINT: &str = "https://en.wikipedia.org/w/api.php";

pub const DEFAULT_TYPED_SUFFIXES: [&str; 8] = [
    "(politician)",
    "(singer)",
    "(actor)",
    "(writer)",
    "(film)",
    "(song)",
    "(footballer)",
    "(musician)",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WikiError {
    #[error("wikipedia request timed out: {0}")]
    Timeout(String),
    #[error("wikipedia transport error: {0}")]
    Transport(String),
    #[error("wikipedia returned HTTP {0}")]
    Status(u16),
    #[error("unexpected wikipedia response: {0}")]
    Malformed(String),
    #[error("entity is empty")]
    EmptyEntity,
    #[error("hit rate of an empty result list is undefined")]
    EmptyResults,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Direct,
    TypedSuffix,
    SearchApi,
    Disambiguation,
}

impl Strategy {
    pub fn order(self) -> u8 {
        match self {
            Strategy::Direct => 1,
            Strategy::TypedSuffix => 2,
            Strategy::SearchApi => 3,
            Strategy::Disambiguation => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikiResult {
    pub entity: String,
    pub page_title: String,
    pub extract_text: String,
    pub strategy_used: Option<Strategy>,
    pub hit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl WikiResult {
    fn hit(entity: &str, page: PageInfo, strategy: Strategy) -> Self {
        Self {
            entity: entity.to_string(),
            page_title: page.title,
            extract_text: page.extract,
            strategy_used: Some(strategy),
            hit: true,
            error: None,
        }
    }

    pub fn miss(entity: &str, error: Option<String>) -> Self {
        Self {
            entity: entity.to_string(),
            page_title: String::new(),
            extract_text: String::new(),
            strategy_used: None,
            hit: false,
            error,
        }
    }
}

/// Exact hit ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HitRate {
    pub hits: usize,
    pub total: usize,
}

impl HitRate {
    pub fn fraction(&self) -> f64 {
        self.hits as f64 / self.total as f64
    }
}

impl fmt::Display for HitRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}", self.fraction())
    }
}

pub fn hit_rate(results: &[WikiResult]) -> Result<HitRate, WikiError> {
    if results.is_empty() {
        return Err(WikiError::EmptyResults);
    }
    Ok(HitRate {
        hits: results.iter().filter(|r| r.hit).count(),
        total: results.len(),
    })
}

/// One MediaWiki action-API request.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum WikiRequest {
    /// Lead extract and page properties of a title, following redirects.
    Page {
        title: String,
    },
    Search {
        query: String,
    },
    /// Article-namespace links of a page.
    Links {
        title: String,
    },
}

impl WikiRequest {
    pub fn to_params(&self) -> Vec<(&'static str, String)> {
        let mut p = vec![
            ("action", "query".to_string()),
            ("format", "json".to_string()),
            ("formatversion", "2".to_string()),
        ];
        match self {
            WikiRequest::Page { title } => {
                p.push(("prop", "extracts|pageprops".into()));
                p.push(("exintro", "1".into()));
                p.push(("explaintext", "1".into()));
                p.push(("redirects", "1".into()));
                p.push(("titles", title.clone()));
            }
            WikiRequest::Search { query } => {
                p.push(("list", "search".into()));
                p.push(("srlimit", "5".into()));
                p.push(("srsearch", query.clone()));
            }
            WikiRequest::Links { title } => {
                p.push(("prop", "links".into()));
                p.push(("plnamespace", "0".into()));
                p.push(("pllimit", "max".into()));
                p.push(("titles", title.clone()));
            }
        }
        p
    }

    pub fn from_params<'a>(params: impl IntoIterator<Item = (&'a str, &'a str)>) -> Option<Self> {
        let map: HashMap<&str, &str> = params.into_iter().collect();
        if map.get("list") == Some(&"search") {
            return Some(WikiRequest::Search {
                query: map.get("srsearch")?.to_string(),
            });
        }
        let title = map.get("titles")?.to_string();
        match *map.get("prop")? {
            "links" => Some(WikiRequest::Links { title }),
            p if p.contains("extracts") => Some(WikiRequest::Page { title }),
            _ => None,
        }
    }

    pub fn cache_key(&self) -> String {
        let params = self.to_params();
        let parts: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
        content_key(&refs)
    }
}

/// Executes requests and returns the raw JSON body.
pub trait WikiTransport: Send + Sync {
    fn execute(&self, req: &WikiRequest) -> Result<Value, WikiError>;
}

/// Blocking HTTP transport with retry on timeouts, connection failures and
/// 5xx.
pub struct HttpTransport {
    endpoint: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, retry: RetryPolicy) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .user_agent(concat!(
                "crag/",
                env!("CARGO_PKG_VERSION"),
                " (corrective RAG engine)"
            ))
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            agent,
            retry,
        }
    }

    fn once(&self, req: &WikiRequest) -> Attempt<Value, WikiError> {
        let mut resp = match self
            .agent
            .get(&self.endpoint)
            .query_pairs(req.to_params())
            .call()
        {
            Ok(r) => r,
            Err(ureq::Error::Timeout(t)) => {
                return Attempt::Transient(WikiError::Timeout(t.to_string()))
            }
            Err(
                e
                @ (ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound),
            ) => return Attempt::Transient(WikiError::Transport(e.to_string())),
            Err(e) => return Attempt::Fatal(WikiError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status >= 500 || status == 429 {
            return Attempt::Transient(WikiError::Status(status));
        }
        if status >= 400 {
            return Attempt::Fatal(WikiError::Status(status));
        }
        match resp.body_mut().read_json::<Value>() {
            Ok(v) => Attempt::Done(v),
            Err(e) => Attempt::Fatal(WikiError::Malformed(e.to_string())),
        }
    }
}

impl WikiTransport for HttpTransport {
    fn execute(&self, req: &WikiRequest) -> Result<Value, WikiError> {
        self.retry.run(|_| self.once(req))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WikiConfig {
    pub api_endpoint: String,
    /// Maximum requests per second.
    pub rate_limit: f64,
    pub cache_dir: Option<PathBuf>,
    pub typed_suffixes: Vec<String>,
    pub timeout: Duration,
    pub max_retries: u32,
}

impl Default for WikiConfig {
    fn default() -> Self {
        Self {
            api_endpoint: DEFAULT_API_ENDPOINT.to_string(),
            rate_limit: 10.0,
            cache_dir: None,
            typed_suffixes: DEFAULT_TYPED_SUFFIXES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            timeout: Duration::from_secs(20),
            max_retries: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PageInfo {
    title: String,
    extract: String,
    disambiguation: bool,
    missing: bool,
}

impl PageInfo {
    fn is_success(&self) -> bool {
        !self.missing && !self.disambiguation && !self.extract.trim().is_empty()
    }
}

fn first_page(v: &Value) -> Result<&Value, WikiError> {
    v.pointer("/query/pages/0")
        .ok_or_else(|| WikiError::Malformed("missing query.pages".into()))
}

fn parse_page(v: &Value) -> Result<PageInfo, WikiError> {
    let page = first_page(v)?;
    Ok(PageInfo {
        title: page["title"].as_str().unwrap_or_default().to_string(),
        extract: page["extract"]
            .as_str()
            .unwrap_or_default()
            .trim()
            .to_string(),
        disambiguation: page.pointer("/pageprops/disambiguation").is_some(),
        missing: page.get("missing").is_some() || page.get("invalid").is_some(),
    })
}

fn parse_titles(list: Option<&Value>) -> Vec<String> {
    list.and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .filter_map(|i| i["title"].as_str().map(str::to_string))
                .collect()
        })
        .unwrap_or_default()
}

/// Rate-limited, caching Wikipedia client. Cheap to share across workers.
pub struct WikiClient {
    cfg: WikiConfig,
    transport: Arc<dyn WikiTransport>,
    limiter: Arc<TokenBucket>,
    memo: Mutex<HashMap<String, Value>>,
    disk: Option<DiskCache>,
}

impl WikiClient {
    pub fn new(
        cfg: WikiConfig,
        transport: Arc<dyn WikiTransport>,
        limiter: Arc<TokenBucket>,
    ) -> Self {
        let disk = cfg
            .cache_dir
            .as_ref()
            .and_then(|dir| match DiskCache::open(dir) {
                Ok(c) => Some(c),
                Err(e) => {
                    log::warn!(
                        "wikipedia cache disabled, cannot open {}: {e}",
                        dir.display()
                    );
                    None
                }
            });
        Self {
            cfg,
            transport,
            limiter,
            memo: Mutex::new(HashMap::new()),
            disk,
        }
    }

    /// Client talking to `cfg.api_endpoint` over HTTP with a wall-clock
    /// limiter.
    pub fn http(cfg: WikiConfig) -> Self {
        let retry = RetryPolicy {
            max_retries: cfg.max_retries,
            ..RetryPolicy::default()
        };
        let transport = Arc::new(HttpTransport::new(
            cfg.api_endpoint.clone(),
            cfg.timeout,
            retry,
        ));
        let limiter = Arc::new(TokenBucket::new(
            cfg.rate_limit,
            Box::new(SystemClock::default()),
        ));
        Self::new(cfg, transport, limiter)
    }

    pub fn config(&self) -> &WikiConfig {
        &self.cfg
    }

    fn request(&self, req: &WikiRequest) -> Result<Value, WikiError> {
        let key = req.cache_key();
        if let Some(v) = self.memo.lock().expect("wiki memo poisoned").get(&key) {
            return Ok(v.clone());
        }
        if let Some(v) = self.disk.as_ref().and_then(|d| d.get::<Value>(&key)) {
            self.memo
                .lock()
                .expect("wiki memo poisoned")
                .insert(key, v.clone());
            return Ok(v);
        }
        self.limiter.acquire();
        let v = self.transport.execute(req)?;
        if let Some(disk) = &self.disk {
            if let Err(e) = disk.put(&key, &v) {
                log::warn!("failed to persist wikipedia response: {e}");
            }
        }
        self.memo
            .lock()
            .expect("wiki memo poisoned")
            .insert(key, v.clone());
        Ok(v)
    }

    fn page(&self, title: &str) -> Result<PageInfo, WikiError> {
        parse_page(&self.request(&WikiRequest::Page {
            title: title.to_string(),
        })?)
    }

    fn search(&self, query: &str) -> Result<Vec<String>, WikiError> {
        let v = self.request(&WikiRequest::Search {
            query: query.to_string(),
        })?;
        Ok(parse_titles(v.pointer("/query/search")))
    }

    fn links(&self, title: &str) -> Result<Vec<String>, WikiError> {
        let v = self.request(&WikiRequest::Links {
            title: title.to_string(),
        })?;
        Ok(parse_titles(first_page(&v)?.get("links")))
    }

    fn try_strategies(&self, entity: &str) -> Result<Option<(PageInfo, Strategy)>, WikiError> {
        let mut tried: HashSet<String> = HashSet::new();

        let direct = self.page(entity)?;
        if direct.is_success() {
            return Ok(Some((direct, Strategy::Direct)));
        }
        tried.insert(entity.to_string());
        let entity_is_disambiguation = direct.disambiguation;

        for suffix in &self.cfg.typed_suffixes {
            let title = format!("{entity} {suffix}");
            let page = self.page(&title)?;
            if page.is_success() {
                return Ok(Some((page, Strategy::TypedSuffix)));
            }
            tried.insert(title);
        }

        let candidate = self
            .search(entity)?
            .into_iter()
            .find(|t| !tried.contains(t));
        if let Some(title) = candidate {
            let page = self.page(&title)?;
            if page.is_success() {
                return Ok(Some((page, Strategy::SearchApi)));
            }
            tried.insert(title);
        }

        let disambiguation_title = if entity_is_disambiguation {
            entity.to_string()
        } else {
            format!("{entity} (disambiguation)")
        };
        let needle = entity.to_lowercase();
        let target = self
            .links(&disambiguation_title)?
            .into_iter()
            .find(|t| t.to_lowercase().contains(&needle));
        if let Some(title) = target {
            let page = self.page(&title)?;
            if page.is_success() {
                return Ok(Some((page, Strategy::Disambiguation)));
            }
        }
        Ok(None)
    }

    /// Resolves an entity to a page extract. Transport failures end the
    /// lookup as a miss with the error recorded.
    pub fn fetch(&self, entity: &str) -> Result<WikiResult, WikiError> {
        let entity = entity.trim();
        if entity.is_empty() {
            return Err(WikiError::EmptyEntity);
        }
        Ok(match self.try_strategies(entity) {
            Ok(Some((page, strategy))) => WikiResult::hit(entity, page, strategy),
            Ok(None) => WikiResult::miss(entity, None),
            Err(e) => {
                log::warn!("wikipedia lookup for {entity:?} failed: {e}");
                WikiResult::miss(entity, Some(e.to_string()))
            }
        })
    }

    /// Extracts the question's entity (falling back to the question text
    /// itself when no template matches) and fetches it.
    pub fn fetch_for_question(&self, question: &str) -> Result<WikiResult, WikiError> {
        let entity = extract_entity(question)
            .unwrap_or_else(|| question.trim().trim_end_matches('?').trim().to_string());
        self.fetch(&entity)
    }
}
