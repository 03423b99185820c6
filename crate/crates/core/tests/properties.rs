use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use pex_core::backend::{Backend, BackendError, CachedBackend, CompletionParams, OracleBackend, TranscriptCache};
use pex_core::corpus::{Corpus, Document};
use pex_core::eval::{score_elements, MatchConfig};
use pex_core::pipeline::{ActivitySource, Extractor};
use pex_core::prompting::{Prompt, QuestionKind, Setting};
use proptest::prelude::*;

/// Q1 lists `n` distinct activities; Q3 answers are drawn from `yes`.
struct Synthetic {
    n: usize,
    yes: BTreeSet<(String, String)>,
    calls: [AtomicUsize; 3],
}

impl Synthetic {
    fn new(n: usize, yes: BTreeSet<(usize, usize)>) -> Self {
        Synthetic {
            n,
            yes: yes.into_iter().map(|(x, y)| (name(x), name(y))).collect(),
            calls: Default::default(),
        }
    }
}

fn name(i: usize) -> String {
    format!("task {i}")
}

impl Backend for Synthetic {
    fn complete(&self, p: &Prompt, _: &CompletionParams) -> Result<String, BackendError> {
        let k = QuestionKind::ALL.iter().position(|q| *q == p.question).unwrap();
        self.calls[k].fetch_add(1, Ordering::SeqCst);
        Ok(match p.question {
            QuestionKind::Q1 => (0..self.n).map(name).collect::<Vec<_>>().join("\n"),
            QuestionKind::Q2 => "someone".into(),
            QuestionKind::Q3 => {
                let pair = (p.bindings.x.clone().unwrap(), p.bindings.y.clone().unwrap());
                if self.yes.contains(&pair) { "Yes" } else { "No" }.into()
            }
        })
    }
}

fn doc() -> Document {
    Document::new("synthetic", "Someone does several tasks.").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn query_counts_and_orientation(n in 0usize..=10, seed in proptest::collection::btree_set((0usize..10, 0usize..10), 0..20)) {
        let yes: BTreeSet<_> = seed.into_iter().filter(|(x, y)| x != y && *x < n && *y < n).collect();
        let backend = Synthetic::new(n, yes.clone());
        let run = Extractor::default().extract(&doc(), Setting::Raw, &backend, ActivitySource::Extracted).unwrap();
        prop_assert_eq!((run.counts.q1, run.counts.q2, run.counts.q3), (1, n, n * n.saturating_sub(1)));
        let calls: Vec<usize> = backend.calls.iter().map(|c| c.load(Ordering::SeqCst)).collect();
        prop_assert_eq!(calls, vec![1, n, n * n.saturating_sub(1)]);
        // yes for (X, Y) means X after Y: edge Y -> X
        let expected: BTreeSet<_> = yes.iter().map(|&(x, y)| (y, x)).collect();
        prop_assert_eq!(run.model.follows().collect::<BTreeSet<_>>(), expected);
    }

    #[test]
    fn symmetry_of_element_scores(
        a in proptest::collection::vec("[a-d]{1,2}( [a-d]{1,2})?", 0..6),
        b in proptest::collection::vec("[a-d]{1,2}( [a-d]{1,2})?", 0..6),
    ) {
        let cfg = MatchConfig::default();
        let ab = score_elements(&a, &b, &cfg);
        let ba = score_elements(&b, &a, &cfg);
        prop_assert_eq!(ab.tp, ba.tp);
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!(ab.recall, ba.precision);
        prop_assert!((ab.f1 - ba.f1).abs() < 1e-12);
    }

    #[test]
    fn correct_predictions_never_lower_recall(
        gold in proptest::collection::btree_set("[a-z]{4,6}", 1..8),
        keep in proptest::collection::vec(any::<bool>(), 8),
        wrong in proptest::collection::vec("[0-9]{3}", 0..4),
    ) {
        let cfg = MatchConfig::default();
        let gold: Vec<String> = gold.into_iter().collect();
        let mut predicted: Vec<String> = gold.iter().zip(&keep).filter(|(_, k)| **k).map(|(g, _)| g.clone()).collect();
        let base = score_elements(&predicted, &gold, &cfg);
        if let Some(missing) = gold.iter().find(|g| !predicted.contains(g)) {
            predicted.push(missing.clone());
            prop_assert!(score_elements(&predicted, &gold, &cfg).recall >= base.recall);
        }
        let before = score_elements(&predicted, &gold, &cfg);
        predicted.extend(wrong);
        prop_assert!(score_elements(&predicted, &gold, &cfg).precision <= before.precision);
    }
}

#[test]
fn oracle_closure_on_every_document() {
    let corpus = Corpus::bundled();
    let oracle = OracleBackend::new(&corpus);
    for entry in corpus.entries() {
        let run = Extractor::default()
            .extract(&entry.document, Setting::Raw, &oracle, ActivitySource::Gold(&entry.gold))
            .unwrap();
        assert_eq!(run.model.follows().collect::<BTreeSet<_>>(), entry.gold.follows, "{}", entry.document.id);
        // participant indices may differ from gold; compare by surface
        let model_performs: BTreeSet<(String, usize)> = run
            .model
            .performs()
            .map(|(p, a)| (run.model.participant_elements()[p].surface.clone(), a))
            .collect();
        let gold_performs: BTreeSet<(String, usize)> =
            entry.gold.performs.iter().map(|&(p, a)| (entry.gold.participants[p].clone(), a)).collect();
        assert_eq!(model_performs, gold_performs, "{}", entry.document.id);
    }
}

#[test]
fn replay_is_independent_of_worker_scheduling() {
    let corpus = Corpus::bundled();
    let entry = corpus.get("1.2").unwrap();
    let cache = Arc::new(TranscriptCache::in_memory());
    let recorder = CachedBackend::recording(cache.clone(), Box::new(OracleBackend::new(&corpus)));
    let first = Extractor::default()
        .with_workers(1)
        .extract(&entry.document, Setting::Shots2, &recorder, ActivitySource::Extracted)
        .unwrap();
    let replay = CachedBackend::replay(cache);
    for workers in [2, 5, 16] {
        let again = Extractor::default()
            .with_workers(workers)
            .extract(&entry.document, Setting::Shots2, &replay, ActivitySource::Extracted)
            .unwrap();
        assert_eq!(again.model.to_json(), first.model.to_json());
        assert_eq!(again.transcripts, first.transcripts);
    }
}
