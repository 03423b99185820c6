//! The question dialogue: Q1 once, Q2 per activity, Q3 per ordered pair of
//! distinct activities. Answers are parsed and assembled into a
//! [`WorldModel`].

mod parse;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{transcript_digest, Backend, BackendError, QuestionParams};
use crate::corpus::{Document, GoldStandard};
use crate::digest::sha256_hex;
use crate::prompting::{q3_pairs, Bindings, PromptBuilder, PromptError, QuestionKind, Setting, Q3_READING};
use crate::worldmodel::{ModelError, Origin, Provenance, WorldModel};

pub use parse::{parse_list_answer, parse_participant_answer, parse_yesno, YesNoAnswer};

/// Where the activities driving Q2 and Q3 come from.
#[derive(Debug, Clone, Copy)]
pub enum ActivitySource<'a> {
    /// Asked with Q1.
    Extracted,
    /// Seeded from gold annotations; Q1 is skipped.
    Gold(&'a GoldStandard),
}

impl ActivitySource<'_> {
    pub fn kind(&self) -> SourceKind {
        match self {
            ActivitySource::Extracted => SourceKind::Extracted,
            ActivitySource::Gold(_) => SourceKind::Gold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Extracted,
    Gold,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Extracted => "extracted",
            SourceKind::Gold => "gold",
        }
    }
}

/// One question and its raw answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub question: QuestionKind,
    pub bindings: Bindings,
    /// Transcript-cache key of the prompt and params.
    pub digest: String,
    pub completion: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCounts {
    pub q1: usize,
    pub q2: usize,
    pub q3: usize,
    /// Q3 answers that were neither yes nor no.
    pub q3_unknown: usize,
}

/// Everything produced by one [`Extractor::extract`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionRun {
    pub doc_id: String,
    pub setting: Setting,
    pub source: SourceKind,
    pub params: QuestionParams,
    pub model: WorldModel,
    pub transcripts: Vec<Exchange>,
    pub counts: QueryCounts,
}

/// Serializable view of a run without the world model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub doc_id: String,
    pub setting: Setting,
    pub source: SourceKind,
    pub params: QuestionParams,
    pub counts: QueryCounts,
    pub transcripts: Vec<Exchange>,
}

impl ExtractionRun {
    fn new(doc: &Document, setting: Setting, source: SourceKind, params: &QuestionParams) -> Self {
        ExtractionRun {
            doc_id: doc.id.clone(),
            setting,
            source,
            params: params.clone(),
            model: WorldModel::new(doc.id.clone()),
            transcripts: Vec::new(),
            counts: QueryCounts::default(),
        }
    }

    pub fn record(&self) -> RunRecord {
        RunRecord {
            doc_id: self.doc_id.clone(),
            setting: self.setting,
            source: self.source,
            params: self.params.clone(),
            counts: self.counts,
            transcripts: self.transcripts.clone(),
        }
    }

    fn count(&mut self, question: QuestionKind) {
        match question {
            QuestionKind::Q1 => self.counts.q1 += 1,
            QuestionKind::Q2 => self.counts.q2 += 1,
            QuestionKind::Q3 => self.counts.q3 += 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    /// The backend failed; `partial` holds every answer received before.
    #[error("document {doc_id}: {source}")]
    Backend {
        doc_id: String,
        #[source]
        source: BackendError,
        partial: Box<ExtractionRun>,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Params(BackendError),
    #[error("gold standard is for document {gold} but the document is {doc}")]
    GoldMismatch { doc: String, gold: String },
}

impl PipelineError {
    pub fn partial(&self) -> Option<&ExtractionRun> {
        match self {
            PipelineError::Backend { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Job {
    question: QuestionKind,
    /// Activity index for Q2, `(x, y)` for Q3.
    x: usize,
    y: usize,
    bindings: Bindings,
}

/// Runs the dialogue. Q2 and Q3 queries are sent from up to `workers`
/// threads; answers are applied in a fixed order so the result does not
/// depend on scheduling.
#[derive(Debug, Clone)]
pub struct Extractor {
    prompts: PromptBuilder,
    params: QuestionParams,
    workers: usize,
}

impl Default for Extractor {
    fn default() -> Self {
        Extractor::new(PromptBuilder::bundled())
    }
}

impl Extractor {
    pub fn new(prompts: PromptBuilder) -> Self {
        Extractor {
            prompts,
            params: QuestionParams::default(),
            workers: 4,
        }
    }

    pub fn with_params(mut self, params: QuestionParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn params(&self) -> &QuestionParams {
        &self.params
    }

    pub fn prompts(&self) -> &PromptBuilder {
        &self.prompts
    }

    pub fn extract(
        &self,
        doc: &Document,
        setting: Setting,
        backend: &dyn Backend,
        source: ActivitySource<'_>,
    ) -> Result<ExtractionRun, PipelineError> {
        self.params.validate().map_err(PipelineError::Params)?;
        let mut run = ExtractionRun::new(doc, setting, source.kind(), &self.params);

        match source {
            ActivitySource::Gold(gold) => {
                if gold.doc_id != doc.id {
                    return Err(PipelineError::GoldMismatch {
                        doc: doc.id.clone(),
                        gold: gold.doc_id.clone(),
                    });
                }
                let seed = Provenance::new(Origin::Gold, sha256_hex(&doc.body));
                for a in &gold.activities {
                    run.model.add_activity(&a.surface, seed.clone())?;
                }
            }
            ActivitySource::Extracted => {
                let job = Job {
                    question: QuestionKind::Q1,
                    x: 0,
                    y: 0,
                    bindings: Bindings::none(),
                };
                let (digest, answer) = self.ask(doc, setting, backend, &job)?;
                run.count(QuestionKind::Q1);
                match answer {
                    Ok(completion) => apply(&mut run, &job, digest, completion)?,
                    Err(source) => return Err(backend_error(run, source)),
                }
            }
        }

        let activities: Vec<String> = run.model.activities().map(str::to_string).collect();
        let n = activities.len();
        let mut jobs: Vec<Job> = (0..n)
            .map(|i| Job {
                question: QuestionKind::Q2,
                x: i,
                y: 0,
                bindings: Bindings::x(&activities[i]),
            })
            .collect();
        jobs.extend(q3_pairs(n).map(|(x, y)| Job {
            question: QuestionKind::Q3,
            x,
            y,
            bindings: Bindings::xy(&activities[x], &activities[y]),
        }));

        let answers = self.ask_all(doc, setting, backend, &jobs)?;
        let mut failure = None;
        for (job, answer) in jobs.iter().zip(answers) {
            let Some((digest, answer)) = answer else { continue };
            run.count(job.question);
            match answer {
                Ok(completion) => apply(&mut run, job, digest, completion)?,
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        }
        match failure {
            Some(source) => Err(backend_error(run, source)),
            None => Ok(run),
        }
    }

    fn ask(
        &self,
        doc: &Document,
        setting: Setting,
        backend: &dyn Backend,
        job: &Job,
    ) -> Result<(String, Result<String, BackendError>), PromptError> {
        let prompt = self.prompts.render(job.question, setting, doc, &job.bindings)?;
        let params = self.params.get(job.question);
        let digest = transcript_digest(&prompt.text, params);
        log::debug!("{} {} {} prompt {}", doc.id, setting, job.question, digest);
        Ok((digest, backend.complete(&prompt, params)))
    }

    /// Answers `jobs`; `None` marks jobs skipped after a backend failure.
    #[allow(clippy::type_complexity)]
    fn ask_all(
        &self,
        doc: &Document,
        setting: Setting,
        backend: &dyn Backend,
        jobs: &[Job],
    ) -> Result<Vec<Option<(String, Result<String, BackendError>)>>, PromptError> {
        let slots: Vec<Mutex<Option<_>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let stop = AtomicBool::new(false);
        let prompt_error = Mutex::new(None);
        let workers = self.workers.min(jobs.len()).max(1);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(job) = jobs.get(i) else { break };
                    match self.ask(doc, setting, backend, job) {
                        Ok(answer) => {
                            if answer.1.is_err() {
                                stop.store(true, Ordering::SeqCst);
                            }
                            *slots[i].lock().expect("slot lock") = Some(answer);
                        }
                        Err(e) => {
                            stop.store(true, Ordering::SeqCst);
                            prompt_error.lock().expect("error lock").get_or_insert(e);
                        }
                    }
                });
            }
        });
        if let Some(e) = prompt_error.into_inner().expect("error lock") {
            return Err(e);
        }
        Ok(slots.into_iter().map(|s| s.into_inner().expect("slot lock")).collect())
    }
}

fn backend_error(run: ExtractionRun, source: BackendError) -> PipelineError {
    PipelineError::Backend {
        doc_id: run.doc_id.clone(),
        source,
        partial: Box::new(run),
    }
}

fn apply(run: &mut ExtractionRun, job: &Job, digest: String, completion: String) -> Result<(), ModelError> {
    let prov = Provenance::new(job.question.into(), digest.clone());
    match job.question {
        QuestionKind::Q1 => {
            for phrase in parse_list_answer(&completion) {
                run.model.add_activity(&phrase, prov.clone())?;
            }
        }
        QuestionKind::Q2 => {
            for name in parse_participant_answer(&completion) {
                let p = run.model.add_participant(&name, prov.clone())?;
                run.model.add_performs(p, job.x, prov.clone())?;
            }
        }
        QuestionKind::Q3 => match parse_yesno(&completion) {
            YesNoAnswer::Yes => {
                let (s, t) = Q3_READING.edge(job.x, job.y);
                run.model.add_follows(s, t, prov)?;
            }
            YesNoAnswer::No => {}
            YesNoAnswer::Unknown => run.counts.q3_unknown += 1,
        },
    }
    run.transcripts.push(Exchange {
        question: job.question,
        bindings: job.bindings.clone(),
        digest,
        completion,
    });
    Ok(())
}
