//! Domain types shared by the simulator, the aggregation strategies and the
//! orchestrator.

use std::fmt;

/// A binary label. The `{-1, +1}` encoding used by weighted voting is a view
/// over the same value: `Zero <-> -1`, `One <-> +1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Zero,
    One,
}

impl Label {
    pub fn from_bit(bit: u8) -> Option<Label> {
        match bit {
            0 => Some(Label::Zero),
            1 => Some(Label::One),
            _ => None,
        }
    }

    pub fn from_sign(sign: i8) -> Option<Label> {
        match sign {
            -1 => Some(Label::Zero),
            1 => Some(Label::One),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Label::Zero => 0,
            Label::One => 1,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Label::Zero => -1,
            Label::One => 1,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Zero => Label::One,
            Label::One => Label::Zero,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bit())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WorkerId(pub u32);

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WorkerClass {
    Adversarial,
    Normal,
    /// Known to the system and paid at the expert rate.
    Expert,
}

impl WorkerClass {
    pub const ALL: [WorkerClass; 3] = [
        WorkerClass::Adversarial,
        WorkerClass::Normal,
        WorkerClass::Expert,
    ];

    pub fn is_known_expert(self) -> bool {
        matches!(self, WorkerClass::Expert)
    }

    pub fn name(self) -> &'static str {
        match self {
            WorkerClass::Adversarial => "adversarial",
            WorkerClass::Normal => "normal",
            WorkerClass::Expert => "expert",
        }
    }
}

/// Simulator-side ground truth about a worker. Aggregation code never sees
/// this type; it only receives [`WorkerRecord`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerProfile {
    pub id: WorkerId,
    pub class: WorkerClass,
    pub true_accuracy: f64,
}

/// What the system has learned about one worker.
///
/// `agreements`/`answered` are real valued so a single record serves every
/// strategy; the counting rules only ever add whole units.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerRecord {
    pub id: WorkerId,
    pub agreements: f64,
    pub answered: f64,
    pub alpha: f64,
    pub beta: f64,
    pub is_known_expert: bool,
}

impl WorkerRecord {
    pub fn new(id: WorkerId, alpha: f64, beta: f64, is_known_expert: bool) -> Self {
        WorkerRecord {
            id,
            agreements: 0.0,
            answered: 0.0,
            alpha,
            beta,
            is_known_expert,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Question {
    pub id: u32,
    pub true_label: Label,
    /// Signed shift applied to worker accuracy, as a probability
    /// (0.10 is ten percentage points harder).
    pub difficulty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    pub worker: WorkerId,
    pub label: Label,
    pub expert: bool,
}

/// One answered question.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub question_id: u32,
    pub chosen_label: Label,
    /// Present only for the probabilistic strategies.
    pub confidence: Option<f64>,
    pub responses: Vec<Response>,
    pub cost: f64,
    pub escalated: bool,
    /// Filled in by the scorer; `None` until scored.
    pub correct: Option<bool>,
}

impl Decision {
    pub fn n_workers(&self) -> usize {
        self.responses.iter().filter(|r| !r.expert).count()
    }

    pub fn n_experts(&self) -> usize {
        self.responses.iter().filter(|r| r.expert).count()
    }

    pub fn expected_cost(&self, worker_cost: f64, expert_cost: f64) -> f64 {
        worker_cost * self.n_workers() as f64 + expert_cost * self.n_experts() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_encodings_round_trip() {
        for label in [Label::Zero, Label::One] {
            assert_eq!(Label::from_sign(label.sign()), Some(label));
            assert_eq!(Label::from_bit(label.bit()), Some(label));
            assert_eq!(label.flipped().flipped(), label);
        }
        assert_eq!(Label::Zero.sign(), -1);
        assert_eq!(Label::One.sign(), 1);
        assert_eq!(Label::from_bit(2), None);
        assert_eq!(Label::from_sign(0), None);
    }

    #[test]
    fn only_experts_are_known() {
        assert!(WorkerClass::Expert.is_known_expert());
        assert!(!WorkerClass::Normal.is_known_expert());
        assert!(!WorkerClass::Adversarial.is_known_expert());
    }

    #[test]
    fn decision_cost_counts_experts_at_expert_rate() {
        let decision = Decision {
            question_id: 0,
            chosen_label: Label::One,
            confidence: Some(0.93),
            responses: vec![
                Response { worker: WorkerId(0), label: Label::One, expert: false },
                Response { worker: WorkerId(1), label: Label::Zero, expert: false },
                Response { worker: WorkerId(9), label: Label::One, expert: true },
            ],
            cost: 7.0,
            escalated: true,
            correct: None,
        };
        assert_eq!(decision.n_workers(), 2);
        assert_eq!(decision.n_experts(), 1);
        assert_eq!(decision.expected_cost(1.0, 5.0), 7.0);
    }
}
