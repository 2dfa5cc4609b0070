use rand::Rng;

use crate::agent::{greedy_action, select_action, Transition};
use crate::dataset::{ExplorationWeights, FeatureTable};
use crate::env::{reset, step, Action, EpisodeRules, EpisodeState, GuessOutcome, Predictor};
use crate::nn::Mlp;
use crate::trace::{EpisodeTrace, FinalGuess, RevealedFeature};
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    /// Epsilon-greedy with correlation-weighted exploration; transitions are
    /// recorded.
    Train {
        epsilon: f64,
        weights: &'a ExplorationWeights,
    },
    /// Pure greedy policy, nothing recorded.
    Greedy,
}

/// Which row to replay and under which rules.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeSetup<'a> {
    pub table: &'a FeatureTable,
    pub row: usize,
    pub rules: EpisodeRules,
    /// Reveal one random non-forced feature at reset.
    pub extra_random_unmask: bool,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub trace: EpisodeTrace,
    /// Empty in greedy mode.
    pub transitions: Vec<Transition>,
    /// Non-terminal states visited, in order.
    pub intermediate_states: Vec<Vec<f64>>,
    /// State vector at which the guess was made.
    pub guess_state: Vec<f64>,
    pub guess: GuessOutcome,
}

pub(crate) fn revealed(
    table: &FeatureTable,
    state: &EpisodeState,
    index: usize,
) -> RevealedFeature {
    let value = state.values()[index];
    RevealedFeature {
        index,
        name: table.feature_names()[index].clone(),
        value,
        raw: table.raw_value(index, value),
    }
}

/// Plays one episode on a table row.
pub fn run_episode<G: Predictor + ?Sized, R: Rng + ?Sized>(
    q_online: &Mlp,
    guesser: &G,
    setup: &EpisodeSetup<'_>,
    mode: Mode<'_>,
    rng: &mut R,
) -> Result<EpisodeOutcome> {
    let table = setup.table;
    let d = table.n_features();
    let sample = table.row(setup.row).to_vec();
    let label = table.label(setup.row);
    let mut state = reset(
        &sample,
        table.forced_indices(),
        setup.extra_random_unmask,
        rng,
    );

    let mut basic: Vec<usize> = table.forced_indices().to_vec();
    basic.extend((0..d).filter(|&i| state.is_asked(i) && !table.forced_indices().contains(&i)));
    let mut trace = EpisodeTrace {
        row: Some(setup.row),
        basic_info: basic.iter().map(|&i| revealed(table, &state, i)).collect(),
        questions: Vec::new(),
        guess: None,
        true_label: Some(label),
    };
    let record = matches!(mode, Mode::Train { .. });
    let mut transitions = Vec::new();
    let mut intermediate = Vec::new();

    loop {
        let action = match mode {
            Mode::Train { epsilon, weights } => {
                select_action(q_online, &state, epsilon, weights, rng)?
            }
            Mode::Greedy => greedy_action(q_online, &state)?,
        };
        let s_vec = state.to_vector();
        let out = step(&state, action, &sample, guesser, label, setup.rules, rng)?;
        if let Action::Question(i) = action {
            trace.questions.push(revealed(table, &out.next_state, i));
        }
        if record {
            match action {
                Action::Guess => transitions.push(Transition {
                    state: s_vec.clone(),
                    action: d,
                    reward: out.reward,
                    next_state: s_vec.clone(),
                    terminal: true,
                    next_mask: state.action_mask(),
                }),
                Action::Question(i) => {
                    let next_vec = out.next_state.to_vector();
                    // Once the budget is spent the only follow-up is the guess.
                    let next_mask = if out.guess.is_some() {
                        let mut m = vec![false; d + 1];
                        m[d] = true;
                        m
                    } else {
                        out.next_state.action_mask()
                    };
                    transitions.push(Transition {
                        state: s_vec.clone(),
                        action: i,
                        reward: out.reward,
                        next_state: next_vec.clone(),
                        terminal: false,
                        next_mask: next_mask.clone(),
                    });
                    if let Some(g) = &out.guess {
                        transitions.push(Transition {
                            state: next_vec.clone(),
                            action: d,
                            reward: g.reward,
                            next_state: next_vec,
                            terminal: true,
                            next_mask,
                        });
                    }
                }
            }
        }
        if let Some(g) = out.guess {
            let guess_state = out.next_state.to_vector();
            trace.guess = Some(FinalGuess {
                distribution: g.distribution.clone(),
                predicted_class: g.predicted_class(),
                forced: g.forced,
            });
            return Ok(EpisodeOutcome {
                trace,
                transitions,
                intermediate_states: intermediate,
                guess_state,
                guess: g,
            });
        }
        intermediate.push(s_vec);
        state = out.next_state;
    }
}
