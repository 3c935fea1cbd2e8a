//! In-process MediaWiki stand-in backed by a fixture corpus.
//!
//! Answers the three request shapes of [`WikiRequest`] with
//! `formatversion=2` JSON and logs every request it receives. The same
//! responder can be served over HTTP (see the crate's integration tests).

use std::fs;
use std::io;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{WikiError, WikiRequest, WikiTransport};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixturePage {
    pub title: String,
    #[serde(default)]
    pub extract: String,
    #[serde(default)]
    pub disambiguation: bool,
    /// Outgoing article links, in page order.
    #[serde(default)]
    pub links: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchEntry {
    pub query: String,
    pub titles: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikiFixture {
    #[serde(default)]
    pub pages: Vec<FixturePage>,
    /// Exact-match search index (case-insensitive on the query).
    #[serde(default)]
    pub search: Vec<SearchEntry>,
}

impl WikiFixture {
    pub fn load(path: &Path) -> io::Result<Self> {
        let bytes = fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    pub fn page(&mut self, title: &str, extract: &str) -> &mut Self {
        self.pages.push(FixturePage {
            title: title.into(),
            extract: extract.into(),
            disambiguation: false,
            links: vec![],
        });
        self
    }

    pub fn disambiguation(&mut self, title: &str, links: &[&str]) -> &mut Self {
        self.pages.push(FixturePage {
            title: title.into(),
            extract: format!("{title} may refer to:"),
            disambiguation: true,
            links: links.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    pub fn search_results(&mut self, query: &str, titles: &[&str]) -> &mut Self {
        self.search.push(SearchEntry {
            query: query.into(),
            titles: titles.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    fn find(&self, title: &str) -> Option<&FixturePage> {
        self.pages.iter().find(|p| p.title == title)
    }
}

#[derive(Debug, Default)]
pub struct MockWiki {
    fixture: WikiFixture,
    log: Mutex<Vec<WikiRequest>>,
}

impl MockWiki {
    pub fn new(fixture: WikiFixture) -> Self {
        Self {
            fixture,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn fixture(&self) -> &WikiFixture {
        &self.fixture
    }

    /// Requests received so far, in arrival order.
    pub fn calls(&self) -> Vec<WikiRequest> {
        self.log.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    pub fn clear_log(&self) {
        self.log.lock().unwrap().clear();
    }

    /// Builds the response body without logging.
    pub fn respond(&self, req: &WikiRequest) -> Value {
        match req {
            WikiRequest::Page { title } => match self.fixture.find(title) {
                Some(p) => {
                    let mut page =
                        json!({"pageid": 1, "ns": 0, "title": p.title, "extract": p.extract});
                    if p.disambiguation {
                        page["pageprops"] = json!({"disambiguation": ""});
                    }
                    json!({"batchcomplete": true, "query": {"pages": [page]}})
                }
                None => json!({"batchcomplete": true, "query": {"pages": [
                    {"ns": 0, "title": title, "missing": true}
                ]}}),
            },
            WikiRequest::Search { query } => {
                let titles = self
                    .fixture
                    .search
                    .iter()
                    .find(|e| e.query.eq_ignore_ascii_case(query))
                    .map(|e| e.titles.clone())
                    .unwrap_or_default();
                let hits: Vec<Value> = titles
                    .iter()
                    .map(|t| json!({"ns": 0, "title": t}))
                    .collect();
                json!({"batchcomplete": true, "query": {"searchinfo": {"totalhits": hits.len()}, "search": hits}})
            }
            WikiRequest::Links { title } => match self.fixture.find(title) {
                Some(p) => {
                    let links: Vec<Value> = p
                        .links
                        .iter()
                        .map(|t| json!({"ns": 0, "title": t}))
                        .collect();
                    json!({"batchcomplete": true, "query": {"pages": [
                        {"pageid": 1, "ns": 0, "title": p.title, "links": links}
                    ]}})
                }
                None => json!({"batchcomplete": true, "query": {"pages": [
                    {"ns": 0, "title": title, "missing": true}
                ]}}),
            },
        }
    }
}

impl WikiTransport for MockWiki {
    fn execute(&self, req: &WikiRequest) -> Result<Value, WikiError> {
        self.log.lock().unwrap().push(req.clone());
        Ok(self.respond(req))
    }
}
