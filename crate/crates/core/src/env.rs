//! Episode dynamics: the masked state, question/guess actions and rewards.
//!
//! The agent sees `values ‖ asked` in `R^{2d}`. A question unmasks one feature
//! and pays a small random reward; a guess leaves the state unchanged, ends the
//! episode and pays the guesser's probability of the true label.

use rand::Rng;

use crate::{Error, Result};

/// Anything that maps a state vector to a class distribution.
pub trait Predictor {
    fn predict(&self, state_vector: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Question(usize),
    Guess,
}

impl Action {
    /// Position in the `d + 1` action vector; the guess is last.
    pub fn index(self, d: usize) -> usize {
        match self {
            Action::Question(i) => i,
            Action::Guess => d,
        }
    }

    pub fn from_index(index: usize, d: usize) -> Self {
        if index >= d {
            Action::Guess
        } else {
            Action::Question(index)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    values: Vec<f64>,
    asked: Vec<bool>,
    step_count: usize,
    /// Features revealed at reset (forced or random extra); they cost no budget.
    free_unmasked: usize,
}

impl EpisodeState {
    pub fn masked(d: usize) -> Self {
        Self {
            values: vec![0.0; d],
            asked: vec![false; d],
            step_count: 0,
            free_unmasked: 0,
        }
    }

    pub fn d(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn asked(&self) -> &[bool] {
        &self.asked
    }

    pub fn is_asked(&self, i: usize) -> bool {
        self.asked[i]
    }

    /// Questions chosen by the agent so far.
    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn asked_count(&self) -> usize {
        self.asked.iter().filter(|&&a| a).count()
    }

    pub fn free_unmasked(&self) -> usize {
        self.free_unmasked
    }

    pub fn all_asked(&self) -> bool {
        self.asked.iter().all(|&a| a)
    }

    /// `values ‖ asked` as a `2d` vector.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.d());
        v.extend_from_slice(&self.values);
        v.extend(self.asked.iter().map(|&a| if a { 1.0 } else { 0.0 }));
        v
    }

    /// Valid actions at this state: unasked questions plus the guess.
    pub fn action_mask(&self) -> Vec<bool> {
        let mut m: Vec<bool> = self.asked.iter().map(|&a| !a).collect();
        m.push(true);
        m
    }

    fn reveal(&mut self, i: usize, value: f64) {
        self.values[i] = value;
        self.asked[i] = true;
    }

    /// Reveals a feature without charging the step budget (session setup).
    pub(crate) fn reveal_free(&mut self, i: usize, value: f64) {
        if !self.asked[i] {
            self.free_unmasked += 1;
        }
        self.reveal(i, value);
    }

    /// Reveals an agent-chosen feature.
    pub(crate) fn reveal_question(&mut self, i: usize, value: f64) -> Result<()> {
        if i >= self.d() {
            return Err(Error::ContractViolation(format!(
                "question {i} out of range for {} features",
                self.d()
            )));
        }
        if self.asked[i] {
            return Err(Error::ContractViolation(format!(
                "feature {i} was already asked"
            )));
        }
        self.reveal(i, value);
        self.step_count += 1;
        Ok(())
    }
}

/// Splits a state vector into its value and asked halves.
pub fn split_state_vector(v: &[f64]) -> (&[f64], &[f64]) {
    v.split_at(v.len() / 2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuessOutcome {
    pub distribution: Vec<f64>,
    /// Probability assigned to the true label.
    pub reward: f64,
    /// True when the guess was triggered by the step budget rather than chosen.
    pub forced: bool,
}

impl GuessOutcome {
    pub fn predicted_class(&self) -> usize {
        argmax(&self.distribution)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: EpisodeState,
    /// Reward of the chosen action. For a budget-forced guess this is the
    /// question reward; the guess reward is in `guess`.
    pub reward: f64,
    pub terminal: bool,
    pub guess: Option<GuessOutcome>,
}

/// Initial state: forced features revealed, optionally one extra random
/// non-forced feature.
pub fn reset<R: Rng + ?Sized>(
    sample: &[f64],
    forced: &[usize],
    extra_random_unmask: bool,
    rng: &mut R,
) -> EpisodeState {
    let mut state = EpisodeState::masked(sample.len());
    for &i in forced {
        state.reveal_free(i, sample[i]);
    }
    if extra_random_unmask {
        let candidates: Vec<usize> = (0..sample.len()).filter(|&i| !state.asked[i]).collect();
        if !candidates.is_empty() {
            let i = candidates[rng.gen_range(0..candidates.len())];
            state.reveal_free(i, sample[i]);
        }
    }
    state
}

/// Static episode parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRules {
    /// Agent-chosen questions allowed before a guess is forced.
    pub max_steps: usize,
    /// When false, questions pay 0 instead of `0.1 * Unif(0,1)`.
    pub question_reward: bool,
}

pub const QUESTION_REWARD_SCALE: f64 = 0.1;

pub fn guess<P: Predictor + ?Sized>(
    state: &EpisodeState,
    guesser: &P,
    true_label: usize,
    forced: bool,
) -> Result<GuessOutcome> {
    let distribution = guesser.predict(&state.to_vector())?;
    let reward = *distribution.get(true_label).ok_or_else(|| {
        Error::ContractViolation(format!(
            "true label {true_label} out of range for {} classes",
            distribution.len()
        ))
    })?;
    Ok(GuessOutcome {
        distribution,
        reward,
        forced,
    })
}

pub fn step<P: Predictor + ?Sized, R: Rng + ?Sized>(
    state: &EpisodeState,
    action: Action,
    sample: &[f64],
    guesser: &P,
    true_label: usize,
    rules: EpisodeRules,
    rng: &mut R,
) -> Result<StepOutcome> {
    match action {
        Action::Guess => {
            let g = guess(state, guesser, true_label, false)?;
            Ok(StepOutcome {
                next_state: state.clone(),
                reward: g.reward,
                terminal: true,
                guess: Some(g),
            })
        }
        Action::Question(i) => {
            let mut next = state.clone();
            next.reveal_question(i, sample[i])?;
            let reward = if rules.question_reward {
                QUESTION_REWARD_SCALE * rng.gen::<f64>()
            } else {
                0.0
            };
            let budget_spent = next.step_count >= rules.max_steps || next.all_asked();
            let guess = if budget_spent {
                Some(guess(&next, guesser, true_label, true)?)
            } else {
                None
            };
            Ok(StepOutcome {
                next_state: next,
                reward,
                terminal: budget_spent,
                guess,
            })
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Fixed(Vec<f64>);

    impl Predictor for Fixed {
        fn predict(&self, _: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    /// Yields a constant `next_u64`, so `gen::<f64>()` is deterministic.
    struct ConstRng(u64);

    impl rand::RngCore for ConstRng {
        fn next_u32(&mut self) -> u32 {
            self.0 as u32
        }
        fn next_u64(&mut self) -> u64 {
            self.0
        }
        fn fill_bytes(&mut self, dest: &mut [u8]) {
            dest.fill(0)
        }
        fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
            dest.fill(0);
            Ok(())
        }
    }

    const RULES: EpisodeRules = EpisodeRules {
        max_steps: 3,
        question_reward: true,
    };

    #[test]
    fn reset_reveals_forced_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = reset(&[0.2, 0.4, 0.6, 0.8, 1.0], &[0, 1], false, &mut rng);
        assert_eq!(s.values(), &[0.2, 0.4, 0.0, 0.0, 0.0]);
        assert_eq!(s.asked(), &[true, true, false, false, false]);
        assert_eq!(s.step_count(), 0);
    }

    #[test]
    fn reset_without_forced_is_zero_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = reset(&[0.3; 6], &[], false, &mut rng);
        assert_eq!(s.to_vector(), vec![0.0; 12]);
    }

    #[test]
    fn extra_unmask_reveals_one_more() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let s = reset(&[0.2, 0.4, 0.6, 0.8, 1.0], &[0, 1], true, &mut rng);
            assert_eq!(s.asked_count(), 3);
            assert_eq!(s.step_count(), 0);
        }
    }

    #[test]
    fn reset_is_deterministic_for_a_seed() {
        let a = reset(&[1.0; 8], &[2], true, &mut ChaCha8Rng::seed_from_u64(4));
        let b = reset(&[1.0; 8], &[2], true, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn guess_reward_is_probability_of_true_label() {
        let g = Fixed(vec![0.3, 0.7]);
        let s = EpisodeState::masked(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = step(&s, Action::Guess, &[0.0, 0.0], &g, 1, RULES, &mut rng).unwrap();
        assert_eq!(out.reward, 0.7);
        assert!(out.terminal);
        assert_eq!(out.next_state, s);
        let out = step(&s, Action::Guess, &[0.0, 0.0], &g, 0, RULES, &mut rng).unwrap();
        assert!((out.reward - 0.3).abs() < 1e-15);
    }

    #[test]
    fn question_reward_is_scaled_uniform() {
        // rand 0.8 maps a u64 to [0,1) via its top 53 bits.
        let half = 1u64 << 63;
        let mut rng = ConstRng(half);
        assert_eq!(rng.gen::<f64>(), 0.5);
        let g = Fixed(vec![0.5, 0.5]);
        let s = EpisodeState::masked(4);
        let out = step(
            &s,
            Action::Question(2),
            &[0.1, 0.2, 0.3, 0.4],
            &g,
            0,
            RULES,
            &mut rng,
        )
        .unwrap();
        assert!((out.reward - 0.05).abs() < 1e-15);
        assert!(!out.terminal);
        assert!(out.guess.is_none());
        assert_eq!(out.next_state.values(), &[0.0, 0.0, 0.3, 0.0]);
        assert_eq!(out.next_state.step_count(), 1);
    }

    #[test]
    fn disabled_question_reward_pays_zero() {
        let g = Fixed(vec![0.5, 0.5]);
        let rules = EpisodeRules {
            question_reward: false,
            ..RULES
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = step(
            &EpisodeState::masked(3),
            Action::Question(0),
            &[1.0; 3],
            &g,
            0,
            rules,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn asking_twice_is_a_contract_violation() {
        let g = Fixed(vec![0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = reset(&[1.0, 2.0], &[0], false, &mut rng);
        let err = step(&s, Action::Question(0), &[1.0, 2.0], &g, 0, RULES, &mut rng);
        assert!(matches!(err, Err(Error::ContractViolation(_))));
    }

    #[test]
    fn budget_forces_a_guess() {
        let g = Fixed(vec![0.2, 0.8]);
        let rules = EpisodeRules {
            max_steps: 2,
            question_reward: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sample = [0.1, 0.2, 0.3, 0.4];
        let s1 = step(
            &EpisodeState::masked(4),
            Action::Question(0),
            &sample,
            &g,
            1,
            rules,
            &mut rng,
        )
        .unwrap();
        assert!(!s1.terminal);
        let s2 = step(
            &s1.next_state,
            Action::Question(3),
            &sample,
            &g,
            1,
            rules,
            &mut rng,
        )
        .unwrap();
        assert!(s2.terminal);
        let guess = s2.guess.unwrap();
        assert!(guess.forced);
        assert_eq!(guess.reward, 0.8);
        assert!(s2.reward < QUESTION_REWARD_SCALE);
    }

    #[test]
    fn state_vector_layout() {
        let mut s = EpisodeState::masked(2);
        s.reveal_question(0, 0.3).unwrap();
        let v = s.to_vector();
        assert_eq!(v, vec![0.3, 0.0, 1.0, 0.0]);
        let (values, asked) = split_state_vector(&v);
        assert_eq!(values, s.values());
        assert_eq!(asked, &[1.0, 0.0]);
        assert_eq!(EpisodeState::masked(3).to_vector(), vec![0.0; 6]);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.2, 0.9, 0.9]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn action_index_round_trip() {
        assert_eq!(Action::from_index(3, 3), Action::Guess);
        assert_eq!(Action::from_index(1, 3), Action::Question(1));
        assert_eq!(Action::Guess.index(3), 3);
    }
}
