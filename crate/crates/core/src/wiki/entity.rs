//! Rule-based entity extraction from templated questions.

use once_cell::sync::Lazy;
use regex::Regex;

/// Ordered question templates; the first capture group is the entity.
const TEMPLATES: &[&str] = &[
    // occupation
    r"^what is (.+?)(?:'s|’s|'|’) occupation\?*$",
    r"^what (?:is|was) the occupation of (.+?)\?*$",
    // birthplace / city
    r"^in what city was (.+?) born\?*$",
    r"^(?:where|in what place) was (.+?) born\?*$",
    // country
    r"^in what country is (.+?)\?*$",
    r"^(?:what|which) country is (.+?) (?:from|in|located in)\?*$",
    // sport
    r"^what sport does (.+?) play\?*$",
    // author
    r"^who (?:is|was) the author of (.+?)\?*$",
    r"^who wrote (.+?)\?*$",
    // composer
    r"^who (?:is|was) the composer of (.+?)\?*$",
    r"^who composed (.+?)\?*$",
    // director
    r"^who (?:is|was) the director of (.+?)\?*$",
    r"^who directed (.+?)\?*$",
    // genre
    r"^what genre is (.+?)\?*$",
    r"^what is the genre of (.+?)\?*$",
    // religion
    r"^what is the religion of (.+?)\?*$",
    r"^what religion (?:is|was|does) (.+?)(?: follow| practice)?\?*$",
];

static PATTERNS: Lazy<Vec<Regex>> = Lazy::new(|| {
    TEMPLATES
        .iter()
        .map(|t| Regex::new(&format!("(?i){t}")).expect("valid template"))
        .collect()
});

fn strip_possessive(entity: &str) -> &str {
    let e = entity.trim();
    for suffix in ["'s", "’s"] {
        if let Some(stripped) = e.strip_suffix(suffix) {
            return stripped.trim_end();
        }
    }
    if (e.ends_with("s'") || e.ends_with("s’")) && e.chars().count() > 2 {
        return e.trim_end_matches(['\'', '’']);
    }
    e
}

pub fn extract_entity(question: &str) -> Option<String> {
    let q = question.split_whitespace().collect::<Vec<_>>().join(" ");
    PATTERNS.iter().find_map(|re| {
        let caps = re.captures(&q)?;
        let entity = strip_possessive(caps.get(1)?.as_str());
        (!entity.is_empty()).then(|| entity.to_string())
    })
}
