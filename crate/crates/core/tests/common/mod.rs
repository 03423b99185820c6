#![allow(dead_code)]

use std::path::PathBuf;

use pex_core::corpus::Corpus;
use pex_core::prompting::{Bindings, PromptBuilder, QuestionKind, Setting};

pub const GOLDEN_DOC: &str = "10.1";

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(GOLDEN_DOC)
}

pub fn golden_path(q: QuestionKind, s: Setting) -> PathBuf {
    golden_dir().join(format!("{}-{}.txt", q.as_str(), s.as_str()))
}

/// X is the first gold activity, Y the second.
pub fn golden_bindings(q: QuestionKind) -> Bindings {
    let corpus = Corpus::bundled();
    let acts = corpus.get(GOLDEN_DOC).unwrap().gold.activity_surfaces();
    match q {
        QuestionKind::Q1 => Bindings::none(),
        QuestionKind::Q2 => Bindings::x(acts[0]),
        QuestionKind::Q3 => Bindings::xy(acts[0], acts[1]),
    }
}

pub fn render_golden(q: QuestionKind, s: Setting) -> String {
    let corpus = Corpus::bundled();
    let doc = &corpus.get(GOLDEN_DOC).unwrap().document;
    PromptBuilder::bundled().render(q, s, doc, &golden_bindings(q)).unwrap().text
}

/// Every (question, setting) whose rendering differs from its golden file.
pub fn golden_mismatches() -> Vec<String> {
    let mut bad = Vec::new();
    for q in QuestionKind::ALL {
        for s in Setting::ALL {
            let path = golden_path(q, s);
            match std::fs::read_to_string(&path) {
                Ok(expected) if expected == render_golden(q, s) => {}
                Ok(_) => bad.push(format!("{} differs", path.display())),
                Err(e) => bad.push(format!("{}: {e}", path.display())),
            }
        }
    }
    bad
}
