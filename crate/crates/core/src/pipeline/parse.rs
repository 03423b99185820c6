//! Parsers for free-text model answers.

use serde::{Deserialize, Serialize};

use crate::worldmodel::normalize_surface;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum YesNoAnswer {
    Yes,
    No,
    Unknown,
}

fn strip_list_marker(line: &str) -> &str {
    let line = line.trim();
    if let Some(rest) = line.strip_prefix(['-', '*', '•']) {
        return rest.trim_start();
    }
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix(['.', ')']) {
            return rest.trim_start();
        }
    }
    line
}

fn clean_item(item: &str) -> &str {
    item.trim().trim_end_matches('.').trim_end()
}

fn dedup_normalized(items: Vec<String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    items
        .into_iter()
        .filter(|i| seen.insert(normalize_surface(i)))
        .collect()
}

/// Splits a Q1 answer into activity phrases.
///
/// One item per line, with bullets, ordinals and terminal periods removed.
/// A single-line answer containing commas is split on them, dropping a
/// leading "and" from each part. Order is kept; duplicates are dropped.
pub fn parse_list_answer(completion: &str) -> Vec<String> {
    let lines: Vec<&str> = completion
        .lines()
        .map(strip_list_marker)
        .map(clean_item)
        .filter(|l| !l.is_empty())
        .collect();
    let items: Vec<String> = match lines.as_slice() {
        [single] if single.contains(',') => single
            .split(',')
            .map(|part| {
                let part = part.trim();
                part.strip_prefix("and ").unwrap_or(part)
            })
            .map(clean_item)
            .filter(|p| !p.is_empty())
            .map(str::to_string)
            .collect(),
        _ => lines.into_iter().map(str::to_string).collect(),
    };
    dedup_normalized(items)
}

fn first_sentence(text: &str) -> &str {
    let text = text.trim_start();
    let line = text.lines().next().unwrap_or("");
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if matches!(b, b'.' | b'!' | b'?') && bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

fn strip_boilerplate(sentence: &str) -> &str {
    let lower = sentence.to_lowercase();
    if lower.starts_with("the participant") {
        for verb in [" is ", " are "] {
            if let Some(pos) = lower.find(verb) {
                return &sentence[pos + verb.len()..];
            }
        }
    }
    sentence
}

/// Extracts participant names from a Q2 answer.
///
/// Takes the first sentence, drops a leading "The participant performing
/// ... is/are", and splits coordinated names on commas and "and". Names are
/// otherwise returned as written.
pub fn parse_participant_answer(completion: &str) -> Vec<String> {
    let sentence = strip_boilerplate(first_sentence(completion));
    let mut names = Vec::new();
    for part in sentence.split(',') {
        for name in part.split(" and ") {
            let name = name.trim();
            let name = name.strip_prefix("and ").unwrap_or(name);
            let name = clean_item(name);
            if !name.is_empty() {
                names.push(name.to_string());
            }
        }
    }
    dedup_normalized(names)
}

/// Reads the first alphabetic token of a Q3 answer.
pub fn parse_yesno(completion: &str) -> YesNoAnswer {
    let token: String = completion
        .chars()
        .skip_while(|c| !c.is_alphabetic())
        .take_while(|c| c.is_alphabetic())
        .collect();
    match token.to_lowercase().as_str() {
        "yes" => YesNoAnswer::Yes,
        "no" => YesNoAnswer::No,
        _ => YesNoAnswer::Unknown,
    }
}
