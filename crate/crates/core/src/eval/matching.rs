//! Lenient phrase matching between extracted and gold surfaces.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::worldmodel::normalize_surface;

pub const DEFAULT_STOPWORDS: [&str; 9] = ["the", "a", "an", "to", "of", "its", "their", "is", "be"];

/// Bundled alias file.
pub const BUNDLED_ALIASES: &str = include_str!("../../fixtures/aliases.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub stopwords: BTreeSet<String>,
    pub strip_plural: bool,
    /// Minimum token Jaccard similarity, in (0, 1].
    pub jaccard_threshold: f64,
    /// Extracted phrase to the gold phrases it is accepted for.
    pub aliases: BTreeMap<String, Vec<String>>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            strip_plural: true,
            jaccard_threshold: 0.5,
            aliases: BTreeMap::new(),
        }
    }
}

impl MatchConfig {
    /// Parses a TOML match configuration. Omitted keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self, EvalError> {
        let cfg: MatchConfig = toml::from_str(text).map_err(|e| EvalError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Defaults plus the bundled alias list.
    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED_ALIASES).expect("bundled alias file parses")
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self, EvalError> {
        self.jaccard_threshold = threshold;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.jaccard_threshold > 0.0 && self.jaccard_threshold <= 1.0) {
            return Err(EvalError::Config(format!(
                "jaccard_threshold {} outside (0, 1]",
                self.jaccard_threshold
            )));
        }
        Ok(())
    }

    fn is_alias(&self, extracted: &str, gold: &str) -> bool {
        let gold = normalize_surface(gold);
        let extracted = normalize_surface(extracted);
        self.aliases
            .iter()
            .filter(|(k, _)| normalize_surface(k) == extracted)
            .flat_map(|(_, v)| v)
            .any(|g| normalize_surface(g) == gold)
    }
}

/// Lowercases, drops punctuation and stopwords, and strips a plural "s"
/// from tokens longer than three characters.
pub fn normalize(phrase: &str, cfg: &MatchConfig) -> BTreeSet<String> {
    let cleaned: String = phrase
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| !cfg.stopwords.contains(*t))
        .map(|t| match t.strip_suffix('s') {
            Some(stem) if cfg.strip_plural && t.chars().count() > 3 => stem.to_string(),
            _ => t.to_string(),
        })
        .collect()
}

/// Jaccard similarity; 0 when both sets are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Alias,
    /// Equal normalized token sets.
    Exact,
    /// One token set contains the other.
    Contained,
    Jaccard,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhraseMatch {
    pub matched: bool,
    /// 1.0 for aliases, otherwise the token Jaccard similarity.
    pub score: f64,
    pub kind: MatchKind,
}

pub fn match_phrase(extracted: &str, gold: &str, cfg: &MatchConfig) -> PhraseMatch {
    if cfg.is_alias(extracted, gold) {
        return PhraseMatch {
            matched: true,
            score: 1.0,
            kind: MatchKind::Alias,
        };
    }
    let e = normalize(extracted, cfg);
    let g = normalize(gold, cfg);
    let score = jaccard(&e, &g);
    let kind = if e.is_empty() || g.is_empty() {
        MatchKind::None
    } else if e == g {
        MatchKind::Exact
    } else if e.is_subset(&g) || g.is_subset(&e) {
        MatchKind::Contained
    } else if score >= cfg.jaccard_threshold {
        MatchKind::Jaccard
    } else {
        MatchKind::None
    };
    PhraseMatch {
        matched: kind != MatchKind::None,
        score,
        kind,
    }
}

/// A one-to-one pairing of extracted items with gold items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// For each extracted item, its gold partner.
    pub to_gold: Vec<Option<usize>>,
}

impl Alignment {
    pub fn identity(n: usize) -> Self {
        Alignment {
            to_gold: (0..n).map(Some).collect(),
        }
    }

    /// `(extracted, gold)` pairs in extracted order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.to_gold.iter().enumerate().filter_map(|(e, g)| g.map(|g| (e, g)))
    }

    pub fn len(&self) -> usize {
        self.to_gold.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Greedy highest-score-first assignment over matching pairs. Ties go to
/// the earlier gold item, then the earlier extracted item.
pub fn align<E: AsRef<str>, G: AsRef<str>>(extracted: &[E], gold: &[G], cfg: &MatchConfig) -> Alignment {
    let mut candidates = Vec::new();
    for (e, ext) in extracted.iter().enumerate() {
        for (g, gld) in gold.iter().enumerate() {
            let m = match_phrase(ext.as_ref(), gld.as_ref(), cfg);
            if m.matched {
                candidates.push((m.score, g, e));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut to_gold = vec![None; extracted.len()];
    let mut gold_used = vec![false; gold.len()];
    for (_, g, e) in candidates {
        if to_gold[e].is_none() && !gold_used[g] {
            to_gold[e] = Some(g);
            gold_used[g] = true;
        }
    }
    Alignment { to_gold }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn normalize_rules() {
        let cfg = MatchConfig::default();
        assert_eq!(normalize("Send the Invoice.", &cfg), set(&["send", "invoice"]));
        assert_eq!(normalize("sends invoice", &cfg), set(&["send", "invoice"]));
        assert_eq!(normalize("", &cfg), set(&[]));
        assert_eq!(normalize("its bus", &cfg), set(&["bus"]));
        let keep = MatchConfig {
            strip_plural: false,
            ..MatchConfig::default()
        };
        assert_eq!(normalize("sends", &keep), set(&["sends"]));
    }

    #[test]
    fn match_examples() {
        let cfg = MatchConfig::default();
        let m = match_phrase("send the invoice", "sends invoice", &cfg);
        assert!(m.matched);
        assert_eq!(m.score, 1.0);
        let m = match_phrase("pay bill", "send invoice", &cfg);
        assert!(!m.matched);
        assert_eq!(m.score, 0.0);
        assert_eq!(match_phrase("", "", &cfg).kind, MatchKind::None);
    }

    #[test]
    fn jaccard_threshold() {
        let cfg = MatchConfig::default();
        // {check, stock, level} vs {check, stock, room}: 2/4
        assert_eq!(match_phrase("check stock level", "check stock room", &cfg).kind, MatchKind::Jaccard);
        let strict = MatchConfig::default().with_threshold(0.6).unwrap();
        assert!(!match_phrase("check stock level", "check stock room", &strict).matched);
        assert!(MatchConfig::default().with_threshold(0.0).is_err());
    }

    #[test]
    fn alias_from_bundled_file() {
        let cfg = MatchConfig::bundled();
        let m = match_phrase("check and repair the computer", "check the computer", &cfg);
        assert_eq!(m.kind, MatchKind::Alias);
        assert_eq!(m.score, 1.0);
    }

    #[test]
    fn align_is_one_to_one() {
        let cfg = MatchConfig::default();
        let a = align(&["send invoice", "sends the invoice"], &["send invoice"], &cfg);
        assert_eq!(a.len(), 1);
        assert_eq!(a.to_gold, vec![Some(0), None]);
        let ids = align(&["a x", "b y", "c z"], &["a x", "b y", "c z"], &cfg);
        assert_eq!(ids, Alignment::identity(3));
    }

    #[test]
    fn align_prefers_higher_score() {
        let cfg = MatchConfig::default();
        // "check stock" contains in both, but is exact for the second gold
        let a = align(&["check stock"], &["check stock level", "check stock"], &cfg);
        assert_eq!(a.to_gold, vec![Some(1)]);
    }

    #[test]
    fn config_toml() {
        let cfg = MatchConfig::from_toml_str("jaccard_threshold = 0.7\n[aliases]\n\"x y\" = [\"z\"]\n").unwrap();
        assert_eq!(cfg.jaccard_threshold, 0.7);
        assert!(cfg.strip_plural);
        assert!(match_phrase("X  Y", "z", &cfg).matched);
        assert!(MatchConfig::from_toml_str("bogus = 1").is_err());
    }
}
