//! Deterministic pattern-table relation detector.
//!
//! `rule_based_detect` classifies an ordered pair of instruction texts by
//! running a fixed sequence of contradiction patterns; the first rule that
//! fires decides the label. It is intentionally narrow — a reproducible,
//! offline stand-in for a learned entailment model — so anything outside the
//! table is Neutral:
//!
//! 1. normalized exact duplicates → Entailment
//! 2. incompatible comma-count bounds ("no commas" vs "at least 3 commas")
//! 3. mutually exclusive output formats (JSON vs plain text vs markdown)
//! 4. mutually exclusive response languages (English vs Chinese vs Spanish)
//! 5. polarity flips ("do not mention the price" vs "mention the price")
//! 6. exclusive task directives ("detect the language" vs "write a summary")
//!
//! All matching is case-insensitive and token-based, so substrings inside
//! larger words ("markdownish") never fire.

use crate::conflict::Relation;

/// Classifies an ordered pair of instruction texts against the pattern table.
pub fn rule_based_detect(premise: &str, hypothesis: &str) -> Relation {
    let a = tokenize(premise);
    let b = tokenize(hypothesis);

    if normalize(premise) == normalize(hypothesis) {
        return Relation::Entailment;
    }
    if comma_bounds_clash(&a, &b)
        || formats_clash(&a, &b)
        || languages_clash(&a, &b)
        || polarity_flips(premise, &b)
        || polarity_flips(hypothesis, &a)
        || task_heads_clash(&a, &b)
    {
        return Relation::Contradiction;
    }
    Relation::Neutral
}

/// Lowercase, collapse runs of whitespace, trim, and drop trailing sentence
/// punctuation — the equivalence used by the duplicate rule.
fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_end_matches(['.', '!', '?']).trim().to_string()
}

/// Lowercase word tokens: maximal runs of alphanumerics/apostrophes, so
/// "don't" stays one token and "JSON-formatted" splits in two.
fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.to_lowercase().chars() {
        if ch.is_alphanumeric() || ch == '\'' {
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

const NEGATORS: [&str; 8] = ["no", "not", "never", "without", "avoid", "don't", "dont", "cannot"];

fn is_negator(token: &str) -> bool {
    NEGATORS.contains(&token)
}

/// True when any negator token sits within the `window` tokens before `at`.
fn negated_before(tokens: &[String], at: usize, window: usize) -> bool {
    tokens[at.saturating_sub(window)..at].iter().any(|t| is_negator(t))
}

/// Parses a cardinal count from digits or the number words one through ten.
pub(crate) fn parse_count(token: &str) -> Option<u32> {
    const WORDS: [&str; 10] =
        ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
    if let Ok(n) = token.parse() {
        return Some(n);
    }
    WORDS.iter().position(|w| *w == token).map(|i| i as u32 + 1)
}

#[derive(Default, Clone, Copy)]
struct CommaBounds {
    min: Option<u32>,
    max: Option<u32>,
}

/// Extracts comma-count bounds from one text: "at least k commas" sets a
/// minimum; "at most k" / "no more than k" set a maximum; a bare negator
/// right before "commas" ("no commas", "without commas") sets maximum 0.
fn comma_bounds(tokens: &[String]) -> CommaBounds {
    let mut bounds = CommaBounds::default();
    for (i, token) in tokens.iter().enumerate() {
        if token != "comma" && token != "commas" {
            continue;
        }
        let window = &tokens[i.saturating_sub(6)..i];
        let at = |k: usize| window.get(k).map(String::as_str);
        let mut quantified = false;
        for w in 0..window.len() {
            if at(w) == Some("at") && at(w + 1) == Some("least") {
                if let Some(n) = window.get(w + 2).and_then(|t| parse_count(t)) {
                    bounds.min = Some(bounds.min.map_or(n, |m| m.max(n)));
                    quantified = true;
                }
            }
            if (at(w) == Some("at") && at(w + 1) == Some("most"))
                || (at(w) == Some("no") && at(w + 1) == Some("more") && at(w + 2) == Some("than"))
            {
                let num_at = if at(w) == Some("at") { w + 2 } else { w + 3 };
                if let Some(n) = window.get(num_at).and_then(|t| parse_count(t)) {
                    bounds.max = Some(bounds.max.map_or(n, |m| m.min(n)));
                    quantified = true;
                }
            }
        }
        if !quantified && window.iter().any(|t| is_negator(t)) {
            bounds.max = Some(0);
        }
    }
    bounds
}

/// True when one text's minimum comma count exceeds the other's maximum.
fn comma_bounds_clash(a: &[String], b: &[String]) -> bool {
    let (ba, bb) = (comma_bounds(a), comma_bounds(b));
    let exceeds = |min: Option<u32>, max: Option<u32>| matches!((min, max), (Some(lo), Some(hi)) if lo > hi);
    exceeds(ba.min, bb.max) || exceeds(bb.min, ba.max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    PlainText,
    Markdown,
}

/// Format directives in one text, split into required and forbidden sets by
/// checking for a negator within the four preceding tokens.
fn format_directives(tokens: &[String]) -> (Vec<Format>, Vec<Format>) {
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        let format = match token.as_str() {
            "json" => Format::Json,
            "markdown" => Format::Markdown,
            "plaintext" => Format::PlainText,
            "plain" if tokens.get(i + 1).map(String::as_str) == Some("text") => Format::PlainText,
            _ => continue,
        };
        let bucket = if negated_before(tokens, i, 4) { &mut negative } else { &mut positive };
        if !bucket.contains(&format) {
            bucket.push(format);
        }
    }
    (positive, negative)
}

/// True when the two texts demand disjoint output formats, or one requires a
/// format the other forbids.
fn formats_clash(a: &[String], b: &[String]) -> bool {
    let (pos_a, neg_a) = format_directives(a);
    let (pos_b, neg_b) = format_directives(b);
    let disjoint = !pos_a.is_empty()
        && !pos_b.is_empty()
        && pos_a.iter().all(|f| !pos_b.contains(f))
        && pos_b.iter().all(|f| !pos_a.contains(f));
    let forbidden = pos_a.iter().any(|f| neg_b.contains(f)) || pos_b.iter().any(|f| neg_a.contains(f));
    disjoint || forbidden
}

const LANGUAGES: [&str; 3] = ["english", "chinese", "spanish"];

/// Language directives in one text: "in/into/using <language>" is required
/// unless a negator precedes the preposition; "avoid <language>" forbids.
/// Two or more distinct required languages (a translation task) clears the
/// required set — the rule stays silent for that text.
fn language_directives(tokens: &[String]) -> (Vec<&'static str>, Vec<&'static str>) {
    let mut positive: Vec<&'static str> = Vec::new();
    let mut negative: Vec<&'static str> = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        let Some(language) = LANGUAGES.iter().find(|l| *l == token) else {
            continue;
        };
        let Some(prev) = i.checked_sub(1).map(|p| tokens[p].as_str()) else {
            continue;
        };
        if prev == "avoid" {
            if !negative.contains(language) {
                negative.push(language);
            }
        } else if matches!(prev, "in" | "into" | "using") {
            let bucket =
                if negated_before(tokens, i - 1, 4) { &mut negative } else { &mut positive };
            if !bucket.contains(language) {
                bucket.push(language);
            }
        }
    }
    if positive.len() >= 2 {
        positive.clear();
    }
    (positive, negative)
}

/// True when each text requires a single distinct language, or one requires
/// a language the other forbids.
fn languages_clash(a: &[String], b: &[String]) -> bool {
    let (pos_a, neg_a) = language_directives(a);
    let (pos_b, neg_b) = language_directives(b);
    let distinct = pos_a.len() == 1 && pos_b.len() == 1 && pos_a[0] != pos_b[0];
    let forbidden = pos_a.iter().any(|l| neg_b.contains(l)) || pos_b.iter().any(|l| neg_a.contains(l));
    distinct || forbidden
}

/// True when `text` forbids a phrase ("do not …", "don't …", "never …")
/// whose token sequence appears contiguously — and unnegated — in `other`.
fn polarity_flips(text: &str, other: &[String]) -> bool {
    for phrase in forbidden_phrases(text) {
        let needle = tokenize(&phrase);
        if needle.is_empty() {
            continue;
        }
        for start in 0..other.len().saturating_sub(needle.len() - 1) {
            let window = &other[start..start + needle.len()];
            if window.iter().zip(&needle).all(|(w, n)| w == n)
                && !negated_before(other, start, 3)
            {
                return true;
            }
        }
    }
    false
}

/// Captures the phrase following each negation marker, stopping at clause
/// punctuation and capping at 60 characters on a word boundary.
fn forbidden_phrases(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut phrases = Vec::new();
    let mut rest = lowered.as_str();
    let markers = ["do not ", "does not ", "must not ", "should not ", "shall not ", "don't ", "never "];
    while !rest.is_empty() {
        let Some((at, marker)) = markers
            .iter()
            .filter_map(|m| rest.find(m).map(|p| (p, *m)))
            .min_by_key(|&(p, _)| p)
        else {
            break;
        };
        let tail = &rest[at + marker.len()..];
        let end = tail.find(['.', '!', '?', ',', ';', ':', '\n']).unwrap_or(tail.len());
        let mut phrase = &tail[..end];
        if phrase.len() > 60 {
            let cut = phrase[..60].rfind(' ').unwrap_or(60);
            phrase = &phrase[..cut];
        }
        let phrase = phrase.trim();
        if !phrase.is_empty() {
            phrases.push(phrase.to_string());
        }
        rest = tail;
    }
    phrases
}

const TASK_VERBS: [&str; 8] =
    ["detect", "write", "summarize", "translate", "extract", "compose", "classify", "identify"];

/// The single task a text assigns, if any: the word after "your task is
/// (to)", or a leading task verb.
fn task_head(tokens: &[String]) -> Option<String> {
    for w in 0..tokens.len().saturating_sub(3) {
        if tokens[w] == "your" && tokens[w + 1] == "task" && tokens[w + 2] == "is" {
            let head_at = if tokens.get(w + 3).map(String::as_str) == Some("to") { w + 4 } else { w + 3 };
            return tokens.get(head_at).cloned();
        }
    }
    tokens
        .first()
        .filter(|t| TASK_VERBS.contains(&t.as_str()))
        .cloned()
}

/// True when both texts assign a task and the tasks differ.
fn task_heads_clash(a: &[String], b: &[String]) -> bool {
    match (task_head(a), task_head(b)) {
        (Some(ha), Some(hb)) => ha != hb,
        _ => false,
    }
}
