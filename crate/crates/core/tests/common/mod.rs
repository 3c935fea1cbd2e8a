#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use tiny_http::{Header, Response, Server};

pub struct Reply {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl Reply {
    pub fn json(status: u16, body: impl Into<String>) -> Self {
        Self {
            status,
            body: body.into(),
            delay: Duration::ZERO,
        }
    }
}

/// Minimal HTTP server on an ephemeral port. The handler sees the request
/// URL (path and query) and body.
pub struct MockServer {
    pub base_url: String,
    hits: Arc<AtomicUsize>,
    server: Arc<Server>,
    handle: Option<thread::JoinHandle<()>>,
}

impl MockServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(&str, &str) -> Reply + Send + Sync + 'static,
    {
        let server = Arc::new(Server::http("127.0.0.1:0").expect("bind mock server"));
        let port = server.server_addr().to_ip().expect("ip listener").port();
        let hits = Arc::new(AtomicUsize::new(0));
        let handler = Arc::new(handler);
        let (srv, counter) = (server.clone(), hits.clone());
        let handle = thread::spawn(move || {
            for mut req in srv.incoming_requests() {
                counter.fetch_add(1, Ordering::SeqCst);
                let mut body = String::new();
                let _ = req.as_reader().read_to_string(&mut body);
                let url = req.url().to_string();
                let handler = handler.clone();
                // Each request gets its own thread so slow replies do not
                // block the others.
                thread::spawn(move || {
                    let reply = handler(&url, &body);
                    thread::sleep(reply.delay);
                    let header = Header::from_bytes("Content-Type", "application/json").unwrap();
                    let resp = Response::from_string(reply.body)
                        .with_status_code(reply.status)
                        .with_header(header);
                    let _ = req.respond(resp);
                });
            }
        });
        Self {
            base_url: format!("http://127.0.0.1:{port}"),
            hits,
            server,
            handle: Some(handle),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Decoded query pairs of a request URL.
pub fn query_pairs(url: &str) -> Vec<(String, String)> {
    let query = url.split_once('?').map_or("", |(_, q)| q);
    url::form_urlencoded::parse(query.as_bytes())
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect()
}

/// Wikipedia fixture with one entity resolvable by each lookup strategy:
/// "Marie Curie" (direct page), "John Smith" (typed suffix, the second
/// suffix tried), "Titanic" (search) and "Mercury" (the entity's own
/// disambiguation page), plus "Jaguar", resolved through a separate
/// "(disambiguation)" page.
pub fn strategy_fixture() -> crag::wiki::mock::WikiFixture {
    let mut f = crag::wiki::mock::WikiFixture::default();
    f.page("Marie Curie", "Marie Curie was a physicist and chemist.")
        .page("John Smith (singer)", "John Smith is a folk singer.")
        .page("RMS Titanic", "RMS Titanic was a British passenger liner.")
        .search_results("Titanic", &["RMS Titanic", "Titanic (1997 film)"])
        .disambiguation(
            "Mercury",
            &["Hermes", "Mercury (planet)", "Mercury (element)"],
        )
        .search_results("Mercury", &["Mercury"])
        .page(
            "Mercury (planet)",
            "Mercury is the smallest planet in the Solar System.",
        )
        .disambiguation("Jaguar (disambiguation)", &["Jaguar Cars", "Jaguar"])
        .page("Jaguar Cars", "Jaguar is a British luxury car brand.");
    f
}
