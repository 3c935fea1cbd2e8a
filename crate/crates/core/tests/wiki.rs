mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use crag::retry::RetryPolicy;
use crag::wiki::mock::{MockWiki, WikiFixture};
use crag::wiki::{
    hit_rate, HttpTransport, Strategy, TokenBucket, VirtualClock, WikiClient, WikiConfig,
    WikiRequest, WikiTransport, DEFAULT_TYPED_SUFFIXES,
};

use common::{query_pairs, strategy_fixture, MockServer, Reply};

fn client(fixture: WikiFixture) -> (Arc<MockWiki>, WikiClient) {
    let mock = Arc::new(MockWiki::new(fixture));
    let limiter = Arc::new(TokenBucket::new(10.0, Box::new(VirtualClock::default())));
    (
        mock.clone(),
        WikiClient::new(WikiConfig::default(), mock, limiter),
    )
}

fn page(t: &str) -> WikiRequest {
    WikiRequest::Page { title: t.into() }
}

fn suffix_pages(entity: &str) -> Vec<WikiRequest> {
    DEFAULT_TYPED_SUFFIXES
        .iter()
        .map(|s| page(&format!("{entity} {s}")))
        .collect()
}

#[test]
fn direct_hit_makes_one_request() {
    let (mock, wiki) = client(strategy_fixture());
    let r = wiki.fetch("Marie Curie").unwrap();
    assert!(r.hit);
    assert_eq!(r.strategy_used, Some(Strategy::Direct));
    assert_eq!(r.page_title, "Marie Curie");
    assert_eq!(mock.calls(), vec![page("Marie Curie")]);
}

#[test]
fn typed_suffix_stops_at_first_success() {
    let (mock, wiki) = client(strategy_fixture());
    let r = wiki.fetch("John Smith").unwrap();
    assert_eq!(r.strategy_used, Some(Strategy::TypedSuffix));
    assert_eq!(r.page_title, "John Smith (singer)");
    assert_eq!(
        mock.calls(),
        vec![
            page("John Smith"),
            page("John Smith (politician)"),
            page("John Smith (singer)")
        ]
    );
}

#[test]
fn search_follows_top_result() {
    let (mock, wiki) = client(strategy_fixture());
    let r = wiki.fetch("Titanic").unwrap();
    assert_eq!(r.strategy_used, Some(Strategy::SearchApi));
    assert_eq!(r.page_title, "RMS Titanic");
    let mut expected = vec![page("Titanic")];
    expected.extend(suffix_pages("Titanic"));
    expected.push(WikiRequest::Search {
        query: "Titanic".into(),
    });
    expected.push(page("RMS Titanic"));
    assert_eq!(mock.calls(), expected);
}

#[test]
fn disambiguation_page_of_the_entity_itself() {
    let (mock, wiki) = client(strategy_fixture());
    let r = wiki.fetch("Mercury").unwrap();
    assert_eq!(r.strategy_used, Some(Strategy::Disambiguation));
    assert_eq!(r.page_title, "Mercury (planet)");
    let mut expected = vec![page("Mercury")];
    expected.extend(suffix_pages("Mercury"));
    expected.push(WikiRequest::Search {
        query: "Mercury".into(),
    });
    // The only search result was already tried, so no page request for it.
    expected.push(WikiRequest::Links {
        title: "Mercury".into(),
    });
    expected.push(page("Mercury (planet)"));
    assert_eq!(mock.calls(), expected);
}

#[test]
fn separate_disambiguation_page() {
    let (mock, wiki) = client(strategy_fixture());
    let r = wiki.fetch("Jaguar").unwrap();
    assert_eq!(r.strategy_used, Some(Strategy::Disambiguation));
    assert_eq!(r.page_title, "Jaguar Cars");
    assert!(mock.calls().contains(&WikiRequest::Links {
        title: "Jaguar (disambiguation)".into()
    }));
}

#[test]
fn miss_runs_every_strategy_once() {
    let (mock, wiki) = client(strategy_fixture());
    let r = wiki.fetch("Nobody Special").unwrap();
    assert!(!r.hit);
    assert_eq!(r.strategy_used, None);
    assert_eq!(r.error, None);
    assert_eq!(mock.call_count(), 1 + DEFAULT_TYPED_SUFFIXES.len() + 2);
}

#[test]
fn repeated_lookups_are_served_from_memory() {
    let (mock, wiki) = client(strategy_fixture());
    let first = wiki.fetch("Titanic").unwrap();
    let n = mock.call_count();
    assert_eq!(wiki.fetch("Titanic").unwrap(), first);
    assert_eq!(mock.call_count(), n);
}

#[test]
fn question_entity_extraction_feeds_the_lookup() {
    let (_, wiki) = client(strategy_fixture());
    let r = wiki
        .fetch_for_question("What is Marie Curie's occupation?")
        .unwrap();
    assert_eq!(r.entity, "Marie Curie");
    assert!(r.hit);
    assert!(wiki.fetch("  ").is_err());
}

fn wiki_server(fixture: WikiFixture) -> MockServer {
    let mock = MockWiki::new(fixture);
    MockServer::start(move |url, _| {
        let pairs = query_pairs(url);
        match WikiRequest::from_params(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))) {
            Some(req) => Reply::json(200, mock.respond(&req).to_string()),
            None => Reply::json(400, r#"{"error": "unsupported"}"#),
        }
    })
}

fn http_client(endpoint: &str, cache_dir: Option<std::path::PathBuf>) -> WikiClient {
    let cfg = WikiConfig {
        api_endpoint: endpoint.to_string(),
        cache_dir,
        rate_limit: 1000.0,
        timeout: Duration::from_secs(5),
        ..WikiConfig::default()
    };
    WikiClient::http(cfg)
}

#[test]
fn http_transport_resolves_every_strategy() {
    let server = wiki_server(strategy_fixture());
    let wiki = http_client(&format!("{}/w/api.php", server.base_url), None);
    let cases = [
        ("Marie Curie", Strategy::Direct),
        ("John Smith", Strategy::TypedSuffix),
        ("Titanic", Strategy::SearchApi),
        ("Mercury", Strategy::Disambiguation),
    ];
    for (entity, strategy) in cases {
        let r = wiki.fetch(entity).unwrap();
        assert!(r.hit, "{entity}");
        assert_eq!(r.strategy_used, Some(strategy), "{entity}");
    }
}

#[test]
fn disk_cache_survives_a_new_client() {
    let server = wiki_server(strategy_fixture());
    let dir = tempfile::tempdir().unwrap();
    let endpoint = format!("{}/w/api.php", server.base_url);
    let first = http_client(&endpoint, Some(dir.path().to_path_buf()))
        .fetch("Titanic")
        .unwrap();
    let hits = server.hits();
    let second = http_client(&endpoint, Some(dir.path().to_path_buf()))
        .fetch("Titanic")
        .unwrap();
    assert_eq!(first, second);
    assert_eq!(server.hits(), hits);
}

#[test]
fn throttled_requests_are_retried() {
    let n = Arc::new(AtomicUsize::new(0));
    let seen = n.clone();
    let mock = MockWiki::new(strategy_fixture());
    let server = MockServer::start(move |url, _| {
        if seen.fetch_add(1, Ordering::SeqCst) == 0 {
            return Reply::json(429, "{}");
        }
        let pairs = query_pairs(url);
        let req =
            WikiRequest::from_params(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
        Reply::json(200, mock.respond(&req).to_string())
    });
    let retry = RetryPolicy {
        max_retries: 2,
        base_delay: Duration::from_millis(5),
        max_delay: Duration::from_millis(20),
    };
    let transport = HttpTransport::new(server.base_url.clone(), Duration::from_secs(5), retry);
    let v = transport.execute(&page("Marie Curie")).unwrap();
    assert_eq!(v["query"]["pages"][0]["title"], "Marie Curie");
    assert_eq!(server.hits(), 2);
}

#[test]
fn unreachable_endpoint_is_a_miss_with_error() {
    let cfg = WikiConfig {
        api_endpoint: "http://127.0.0.1:9/w/api.php".into(),
        max_retries: 0,
        timeout: Duration::from_secs(2),
        ..WikiConfig::default()
    };
    let r = WikiClient::http(cfg).fetch("Marie Curie").unwrap();
    assert!(!r.hit);
    assert!(r.error.is_some());
}

#[test]
fn rate_limit_spaces_requests() {
    let clock = VirtualClock::default();
    let limiter = Arc::new(TokenBucket::new(2.0, Box::new(clock)));
    let mock = Arc::new(MockWiki::new(WikiFixture::default()));
    let wiki = WikiClient::new(WikiConfig::default(), mock.clone(), limiter.clone());
    // A miss issues 1 + suffixes + search + links requests.
    wiki.fetch("Nobody").unwrap();
    let requests = mock.call_count();
    let elapsed = limiter.clock().now();
    assert!(elapsed >= Duration::from_millis(500) * (requests as u32 - 1));
}

#[test]
fn hit_rate_over_mixed_lookups() {
    let (_, wiki) = client(strategy_fixture());
    let results: Vec<_> = ["Marie Curie", "Titanic", "Nobody", "Jaguar"]
        .iter()
        .map(|e| wiki.fetch(e).unwrap())
        .collect();
    let rate = hit_rate(&results).unwrap();
    assert_eq!((rate.hits, rate.total), (3, 4));
    assert_eq!(rate.to_string(), "0.750");
}
