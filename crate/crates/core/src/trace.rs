//! Episode traces and their text rendering.
//!
//! ```text
//! Basic info: sex: 2, age: 85, race: 0
//! Step: 1, Question:  la1ar2 , Answer: 0.00
//! Step: 2, Ready to make a guess: Prob(y=1)=0.874, Guess: y=1, Ground truth: y=1
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevealedFeature {
    pub index: usize,
    pub name: String,
    /// Scaled value seen by the networks.
    pub value: f64,
    /// Value in the original units.
    pub raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalGuess {
    pub distribution: Vec<f64>,
    pub predicted_class: usize,
    /// The guess was triggered by the question budget.
    pub forced: bool,
}

impl FinalGuess {
    /// Probability shown in the trace: class 1 for binary tasks, otherwise the
    /// predicted class.
    pub fn shown_class(&self) -> usize {
        if self.distribution.len() == 2 {
            1
        } else {
            self.predicted_class
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    /// Dataset row, when the episode replays one.
    pub row: Option<usize>,
    /// Features revealed before the first question (forced, plus the random
    /// extra one in off-policy evaluation).
    pub basic_info: Vec<RevealedFeature>,
    /// Agent-chosen questions in order.
    pub questions: Vec<RevealedFeature>,
    pub guess: Option<FinalGuess>,
    pub true_label: Option<usize>,
}

impl EpisodeTrace {
    pub fn question_indices(&self) -> Vec<usize> {
        self.questions.iter().map(|q| q.index).collect()
    }
}

/// Renders one episode in the step-by-step text format. Answers use two
/// decimals, probabilities three.
pub fn render_trace(trace: &EpisodeTrace) -> String {
    let mut out = String::new();
    if !trace.basic_info.is_empty() {
        let info: Vec<String> = trace
            .basic_info
            .iter()
            .map(|f| format!("{}: {}", f.name, display_number(f.raw)))
            .collect();
        let _ = writeln!(out, "Basic info: {}", info.join(", "));
    }
    for (k, q) in trace.questions.iter().enumerate() {
        let _ = writeln!(
            out,
            "Step: {}, Question:  {} , Answer: {:.2}",
            k + 1,
            q.name,
            q.raw
        );
    }
    if let Some(g) = &trace.guess {
        let c = g.shown_class();
        let _ = write!(
            out,
            "Step: {}, Ready to make a guess: Prob(y={c})={:.3}, Guess: y={}",
            trace.questions.len() + 1,
            g.distribution[c],
            g.predicted_class
        );
        if let Some(y) = trace.true_label {
            let _ = write!(out, ", Ground truth: y={y}");
        }
        out.push('\n');
    }
    out
}

/// Shortest form of `v` at six decimals, so values that went through scaling
/// print as `40` rather than `40.00000000000001`.
pub fn display_number(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feature(index: usize, name: &str, raw: f64) -> RevealedFeature {
        RevealedFeature {
            index,
            name: name.into(),
            value: raw,
            raw,
        }
    }

    #[test]
    fn renders_question_then_guess() {
        let trace = EpisodeTrace {
            row: Some(0),
            basic_info: vec![
                feature(0, "sex", 2.0),
                feature(1, "age", 85.0),
                feature(2, "race", 0.0),
            ],
            questions: vec![feature(5, "la1ar2", 0.0)],
            guess: Some(FinalGuess {
                distribution: vec![0.126, 0.874],
                predicted_class: 1,
                forced: false,
            }),
            true_label: Some(1),
        };
        assert_eq!(
            render_trace(&trace),
            "Basic info: sex: 2, age: 85, race: 0\n\
             Step: 1, Question:  la1ar2 , Answer: 0.00\n\
             Step: 2, Ready to make a guess: Prob(y=1)=0.874, Guess: y=1, Ground truth: y=1\n"
        );
    }

    #[test]
    fn immediate_guess_is_step_one() {
        let trace = EpisodeTrace {
            row: None,
            basic_info: vec![feature(0, "sex", 1.0), feature(1, "age", 83.0)],
            questions: vec![],
            guess: Some(FinalGuess {
                distribution: vec![0.094, 0.906],
                predicted_class: 1,
                forced: false,
            }),
            true_label: Some(1),
        };
        let text = render_trace(&trace);
        assert!(text.ends_with(
            "Step: 1, Ready to make a guess: Prob(y=1)=0.906, Guess: y=1, Ground truth: y=1\n"
        ));
    }

    #[test]
    fn multiclass_shows_predicted_class() {
        let trace = EpisodeTrace {
            row: None,
            basic_info: vec![],
            questions: vec![feature(3, "px_0_3", 1.0)],
            guess: Some(FinalGuess {
                distribution: vec![0.1, 0.2, 0.7],
                predicted_class: 2,
                forced: true,
            }),
            true_label: Some(0),
        };
        assert_eq!(
            render_trace(&trace),
            "Step: 1, Question:  px_0_3 , Answer: 1.00\n\
             Step: 2, Ready to make a guess: Prob(y=2)=0.700, Guess: y=2, Ground truth: y=0\n"
        );
    }

    #[test]
    fn display_number_trims_scaling_noise() {
        assert_eq!(display_number(40.00000000000001), "40");
        assert_eq!(display_number(0.0), "0");
        assert_eq!(display_number(-1e-12), "0");
        assert_eq!(display_number(2.5), "2.5");
    }
}
