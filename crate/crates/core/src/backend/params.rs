use serde::{Deserialize, Serialize};

use super::BackendError;
use crate::prompting::QuestionKind;

/// Sampling and length controls sent with every completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f64,
    /// Nucleus (top-p) mass.
    pub nucleus: f64,
    pub max_tokens: u32,
    pub stop: Vec<String>,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams {
            temperature: 0.0,
            nucleus: 1.0,
            max_tokens: 256,
            stop: vec!["\n\n".to_string(), "Q:".to_string()],
        }
    }
}

impl CompletionParams {
    /// Defaults sized to the expected answer of `question`.
    pub fn for_question(question: QuestionKind) -> Self {
        let max_tokens = match question {
            QuestionKind::Q1 => 256,
            QuestionKind::Q2 => 64,
            QuestionKind::Q3 => 8,
        };
        CompletionParams {
            max_tokens,
            ..CompletionParams::default()
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidParams(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if !(0.0..=1.0).contains(&self.nucleus) {
            return Err(BackendError::InvalidParams(format!("nucleus {} outside [0, 1]", self.nucleus)));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidParams("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Greedy decoding: zero temperature with the nucleus pinned at 1.
    pub fn is_reproducible(&self) -> bool {
        self.temperature == 0.0 && self.nucleus == 1.0
    }
}

/// One parameter set per question kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionParams {
    pub q1: CompletionParams,
    pub q2: CompletionParams,
    pub q3: CompletionParams,
}

impl Default for QuestionParams {
    fn default() -> Self {
        QuestionParams {
            q1: CompletionParams::for_question(QuestionKind::Q1),
            q2: CompletionParams::for_question(QuestionKind::Q2),
            q3: CompletionParams::for_question(QuestionKind::Q3),
        }
    }
}

impl QuestionParams {
    pub fn get(&self, question: QuestionKind) -> &CompletionParams {
        match question {
            QuestionKind::Q1 => &self.q1,
            QuestionKind::Q2 => &self.q2,
            QuestionKind::Q3 => &self.q3,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        self.q1.validate()?;
        self.q2.validate()?;
        self.q3.validate()
    }

    /// Applies the same sampling settings to every question.
    pub fn with_sampling(mut self, temperature: f64, nucleus: f64) -> Self {
        for p in [&mut self.q1, &mut self.q2, &mut self.q3] {
            p.temperature = temperature;
            p.nucleus = nucleus;
        }
        self
    }
}
