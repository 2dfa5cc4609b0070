//! One live questionnaire: the greedy policy asks, a person answers in raw
//! units, and the episode ends in a guess.

use std::collections::BTreeMap;

use crate::agent::greedy_action;
use crate::artifact::ModelArtifact;
use crate::env::{argmax, Action, EpisodeState};
use crate::trace::{EpisodeTrace, FinalGuess, RevealedFeature};
use crate::Error;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    /// Malformed input: missing or unexpected answers, non-finite values.
    #[error("{0}")]
    BadRequest(String),
    /// The session is not waiting for an answer.
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Engine(#[from] Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionStatus {
    AwaitingAnswer(usize),
    Guessed(FinalGuess),
}

#[derive(Debug, Clone)]
pub struct Session {
    state: EpisodeState,
    trace: EpisodeTrace,
    status: SessionStatus,
}

impl Session {
    /// Starts a session from the forced features' raw values, which must
    /// cover exactly the model's forced feature names.
    pub fn start(
        model: &ModelArtifact,
        answers: &BTreeMap<String, f64>,
    ) -> Result<Self, SessionError> {
        let forced = model.forced_names();
        if let Some(missing) = forced.iter().find(|n| !answers.contains_key(**n)) {
            return Err(SessionError::BadRequest(format!(
                "missing answer for forced feature {missing:?}"
            )));
        }
        if let Some(extra) = answers.keys().find(|k| !forced.contains(&k.as_str())) {
            return Err(SessionError::BadRequest(format!(
                "{extra:?} is not a forced feature"
            )));
        }
        let mut state = EpisodeState::masked(model.d);
        let mut basic_info = Vec::with_capacity(forced.len());
        for &i in &model.forced_indices {
            let name = &model.feature_names[i];
            let value = scaled(model, i, answers[name])?;
            state.reveal_free(i, value);
            basic_info.push(revealed(model, i, value));
        }
        let mut session = Self {
            state,
            trace: EpisodeTrace {
                row: None,
                basic_info,
                questions: Vec::new(),
                guess: None,
                true_label: None,
            },
            status: SessionStatus::AwaitingAnswer(0),
        };
        session.advance(model)?;
        Ok(session)
    }

    pub fn status(&self) -> &SessionStatus {
        &self.status
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn state(&self) -> &EpisodeState {
        &self.state
    }

    pub fn pending_question(&self) -> Option<usize> {
        match self.status {
            SessionStatus::AwaitingAnswer(i) => Some(i),
            SessionStatus::Guessed(_) => None,
        }
    }

    /// Records the raw answer to the pending question and moves on.
    pub fn submit_answer(&mut self, model: &ModelArtifact, raw: f64) -> Result<(), SessionError> {
        let i = self
            .pending_question()
            .ok_or_else(|| SessionError::Conflict("session already ended with a guess".into()))?;
        let value = scaled(model, i, raw)?;
        self.state.reveal_question(i, value)?;
        self.trace.questions.push(revealed(model, i, value));
        if self.state.step_count() >= model.max_steps() || self.state.all_asked() {
            return self.finish(model, true);
        }
        self.advance(model)
    }

    fn advance(&mut self, model: &ModelArtifact) -> Result<(), SessionError> {
        match greedy_action(&model.q_network, &self.state)? {
            Action::Question(i) => {
                self.status = SessionStatus::AwaitingAnswer(i);
                Ok(())
            }
            Action::Guess => self.finish(model, false),
        }
    }

    fn finish(&mut self, model: &ModelArtifact, forced: bool) -> Result<(), SessionError> {
        let distribution = model.guesser.forward(&self.state.to_vector())?;
        let guess = FinalGuess {
            predicted_class: argmax(&distribution),
            distribution,
            forced,
        };
        self.trace.guess = Some(guess.clone());
        self.status = SessionStatus::Guessed(guess);
        Ok(())
    }
}

fn scaled(model: &ModelArtifact, i: usize, raw: f64) -> Result<f64, SessionError> {
    if !raw.is_finite() {
        return Err(SessionError::BadRequest(format!(
            "answer for {:?} must be a finite number",
            model.feature_names[i]
        )));
    }
    Ok(model
        .norm_stats
        .normalize(i, model.norm_stats.clamp_raw(i, raw)))
}

fn revealed(model: &ModelArtifact, i: usize, value: f64) -> RevealedFeature {
    RevealedFeature {
        index: i,
        name: model.feature_names[i].clone(),
        value,
        raw: model.norm_stats.denormalize(i, value),
    }
}
