//! Per-question querying, expert escalation, cost accounting and
//! consensus-driven record updates.

use std::ops::Range;

use crate::aggregation::{
    agreement_weight, apply_update, majority_vote, posterior_label, weighted_vote, PosteriorResult,
    SkillBelief, StrategyKind,
};
use crate::config::Config;
use crate::error::Result;
use crate::rng::RandomStream;
use crate::simulation::{Availability, World};
use crate::types::{Decision, Label, Question, Response, WorkerId, WorkerRecord};

/// Anything that can ask a worker for a label on the current question.
pub trait ResponseSource {
    fn ask(&mut self, worker: WorkerId) -> Label;
}

/// Responses for one question of a simulated [`World`].
pub struct WorldQuestion<'a> {
    pub world: &'a World,
    pub index: usize,
}

impl ResponseSource for WorldQuestion<'_> {
    fn ask(&mut self, worker: WorkerId) -> Label {
        self.world.respond(self.index, worker)
    }
}

/// Learned state for every worker, indexed by `WorkerId`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordBook {
    records: Vec<WorkerRecord>,
}

impl RecordBook {
    pub fn new(records: Vec<WorkerRecord>) -> Self {
        debug_assert!(records.iter().enumerate().all(|(i, r)| r.id.0 as usize == i));
        RecordBook { records }
    }

    /// Fresh records for the world's pool, all at the configured prior.
    pub fn for_world(world: &World, config: &Config) -> Self {
        RecordBook::new(
            world
                .pool
                .profiles
                .iter()
                .map(|p| {
                    WorkerRecord::new(
                        p.id,
                        config.prior_alpha(),
                        config.prior_beta(),
                        p.class.is_known_expert(),
                    )
                })
                .collect(),
        )
    }

    /// Appends a fresh crowd-worker record and returns its id.
    pub fn push_fresh(&mut self, config: &Config) -> WorkerId {
        let id = WorkerId(self.records.len() as u32);
        self.records.push(WorkerRecord::new(
            id,
            config.prior_alpha(),
            config.prior_beta(),
            false,
        ));
        id
    }

    pub fn get(&self, id: WorkerId) -> &WorkerRecord {
        &self.records[id.0 as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &WorkerRecord> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn decision_cost(responses: &[Response], config: &Config) -> f64 {
    responses
        .iter()
        .map(|r| if r.expert { config.expert_cost } else { config.worker_cost })
        .sum()
}

/// Fixed-crowd voting. MV asks the largest odd subset of the available crowd
/// (dropping one worker at random when the count is even); Weighted asks
/// everyone available.
pub fn answer_question_voting(
    question_id: u32,
    strategy: StrategyKind,
    available: &Availability,
    records: &RecordBook,
    source: &mut dyn ResponseSource,
    config: &Config,
    rng: &mut RandomStream,
) -> Result<Decision> {
    let mut asked = available.workers.clone();
    if strategy == StrategyKind::Mv && asked.len().is_multiple_of(2) && !asked.is_empty() {
        asked.remove(rng.index(asked.len()));
    }
    let responses: Vec<Response> = asked
        .iter()
        .map(|&worker| Response {
            worker,
            label: source.ask(worker),
            expert: false,
        })
        .collect();
    let votes: Vec<Label> = responses.iter().map(|r| r.label).collect();
    let chosen = match strategy {
        StrategyKind::Mv => majority_vote(&votes)?,
        _ => {
            let weights: Vec<f64> = asked
                .iter()
                .map(|&w| agreement_weight(records.get(w), config.prior_mean))
                .collect();
            weighted_vote(&votes, &weights)?
        }
    };
    Ok(Decision {
        question_id,
        chosen_label: chosen,
        confidence: None,
        cost: decision_cost(&responses, config),
        responses,
        escalated: false,
        correct: None,
    })
}

/// The belief a probabilistic strategy holds about a known expert.
pub fn expert_belief(strategy: StrategyKind, config: &Config) -> SkillBelief {
    match strategy {
        StrategyKind::Bay | StrategyKind::Conf => SkillBelief::Beta {
            alpha: config.expert_belief_mean * config.expert_belief_strength,
            beta: (1.0 - config.expert_belief_mean) * config.expert_belief_strength,
        },
        _ => SkillBelief::Point(config.expert_belief_mean),
    }
}

/// Iterative label improvement: start with a few random workers, add one
/// random unqueried worker at a time while confidence is at or below the
/// threshold, then fall back to experts if the crowd runs out.
pub fn answer_question_iterative(
    question_id: u32,
    strategy: StrategyKind,
    available: &Availability,
    records: &RecordBook,
    source: &mut dyn ResponseSource,
    config: &Config,
    rng: &mut RandomStream,
) -> Decision {
    let mut remaining = available.workers.clone();
    let mut responses = Vec::new();
    let mut likelihoods = Vec::new();

    let mut ask_crowd = |remaining: &mut Vec<WorkerId>,
                         responses: &mut Vec<Response>,
                         likelihoods: &mut Vec<(f64, f64)>| {
        let worker = remaining.swap_remove(rng.index(remaining.len()));
        let label = source.ask(worker);
        let belief =
            SkillBelief::for_record(strategy, records.get(worker), config.prior_mean, config.epsilon);
        likelihoods.push(belief.likelihoods(label));
        responses.push(Response {
            worker,
            label,
            expert: false,
        });
    };

    let initial = config.initial_query_count.min(remaining.len());
    for _ in 0..initial {
        ask_crowd(&mut remaining, &mut responses, &mut likelihoods);
    }
    let mut post = posterior_label(&likelihoods);
    while post.confidence <= config.confidence_threshold && !remaining.is_empty() {
        ask_crowd(&mut remaining, &mut responses, &mut likelihoods);
        post = posterior_label(&likelihoods);
    }

    let mut escalated = false;
    if post.confidence <= config.confidence_threshold {
        let belief = expert_belief(strategy, config);
        for &expert in &available.experts {
            escalated = true;
            let label = source.ask(expert);
            likelihoods.push(belief.likelihoods(label));
            responses.push(Response {
                worker: expert,
                label,
                expert: true,
            });
            post = posterior_label(&likelihoods);
            if post.confidence > config.confidence_threshold {
                break;
            }
        }
    }

    finish(question_id, post, responses, escalated, config)
}

fn finish(
    question_id: u32,
    post: PosteriorResult,
    responses: Vec<Response>,
    escalated: bool,
    config: &Config,
) -> Decision {
    Decision {
        question_id,
        chosen_label: post.chosen,
        confidence: Some(post.confidence),
        cost: decision_cost(&responses, config),
        responses,
        escalated,
        correct: None,
    }
}

/// Updates every queried crowd worker against the final label. Known experts
/// are left untouched.
pub fn update_consensus_records(
    strategy: StrategyKind,
    records: &mut RecordBook,
    responses: &[Response],
    chosen: Label,
    omega: f64,
) {
    for r in responses.iter().filter(|r| !r.expert) {
        let slot = &mut records.records[r.worker.0 as usize];
        if slot.is_known_expert {
            continue;
        }
        *slot = apply_update(strategy, slot, r.label == chosen, omega);
    }
}

/// Answers one question with the strategy's path and updates the records.
pub fn answer_and_learn(
    question_id: u32,
    strategy: StrategyKind,
    available: &Availability,
    records: &mut RecordBook,
    source: &mut dyn ResponseSource,
    config: &Config,
    rng: &mut RandomStream,
) -> Result<Decision> {
    let decision = if strategy.is_probabilistic() {
        answer_question_iterative(question_id, strategy, available, records, source, config, rng)
    } else {
        answer_question_voting(question_id, strategy, available, records, source, config, rng)?
    };
    update_consensus_records(
        strategy,
        records,
        &decision.responses,
        decision.chosen_label,
        decision.confidence.unwrap_or(1.0),
    );
    Ok(decision)
}

/// Fills in `decision.correct`. The only place a true label is consulted.
pub fn score(decision: &mut Decision, question: &Question) {
    decision.correct = Some(decision.chosen_label == question.true_label);
}

#[derive(Debug, Clone)]
pub struct SessionLog {
    pub strategy: StrategyKind,
    pub decisions: Vec<Decision>,
    pub records: RecordBook,
    pub total_cost: f64,
}

impl SessionLog {
    pub fn accuracy(&self) -> f64 {
        self.accuracy_over(0..self.decisions.len())
    }

    pub fn mean_cost(&self) -> f64 {
        self.mean_cost_over(0..self.decisions.len())
    }

    pub fn accuracy_over(&self, range: Range<usize>) -> f64 {
        let slice = &self.decisions[range];
        if slice.is_empty() {
            return 0.0;
        }
        slice.iter().filter(|d| d.correct == Some(true)).count() as f64 / slice.len() as f64
    }

    pub fn mean_cost_over(&self, range: Range<usize>) -> f64 {
        let slice = &self.decisions[range];
        if slice.is_empty() {
            return 0.0;
        }
        slice.iter().map(|d| d.cost).sum::<f64>() / slice.len() as f64
    }
}

/// Runs the strategy over every question of the world in order, with fresh
/// records at the configured prior.
pub fn run_session(
    world: &World,
    strategy: StrategyKind,
    config: &Config,
    rng: &mut RandomStream,
) -> Result<SessionLog> {
    let mut records = RecordBook::for_world(world, config);
    let mut decisions = Vec::with_capacity(world.len());
    let mut total_cost = 0.0;
    for (index, question) in world.questions.questions.iter().enumerate() {
        let available = &world.availability[index];
        let mut source = WorldQuestion { world, index };
        let mut decision = answer_and_learn(
            question.id,
            strategy,
            available,
            &mut records,
            &mut source,
            config,
            rng,
        )?;
        score(&mut decision, question);
        total_cost += decision.cost;
        decisions.push(decision);
    }
    Ok(SessionLog {
        strategy,
        decisions,
        records,
        total_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_stream;
    use std::collections::HashMap;

    /// Scripted answers, recording who was asked.
    struct Scripted {
        answers: HashMap<WorkerId, Label>,
        asked: Vec<WorkerId>,
    }

    impl Scripted {
        fn new(answers: &[(u32, Label)]) -> Self {
            Scripted {
                answers: answers.iter().map(|&(w, l)| (WorkerId(w), l)).collect(),
                asked: Vec::new(),
            }
        }
    }

    impl ResponseSource for Scripted {
        fn ask(&mut self, worker: WorkerId) -> Label {
            self.asked.push(worker);
            self.answers[&worker]
        }
    }

    fn book(n_crowd: u32, n_expert: u32, config: &Config) -> RecordBook {
        RecordBook::new(
            (0..n_crowd + n_expert)
                .map(|i| {
                    WorkerRecord::new(WorkerId(i), config.prior_alpha(), config.prior_beta(), i >= n_crowd)
                })
                .collect(),
        )
    }

    fn availability(n_crowd: u32, n_expert: u32) -> Availability {
        Availability {
            workers: (0..n_crowd).map(WorkerId).collect(),
            experts: (n_crowd..n_crowd + n_expert).map(WorkerId).collect(),
        }
    }

    #[test]
    fn mv_asks_odd_count() {
        let config = Config::default();
        let records = book(22, 0, &config);
        let mut rng = rng_stream(1, "select");
        for n in [21u32, 22] {
            let mut src = Scripted::new(&(0..n).map(|w| (w, Label::One)).collect::<Vec<_>>());
            let d = answer_question_voting(
                0,
                StrategyKind::Mv,
                &availability(n, 0),
                &records,
                &mut src,
                &config,
                &mut rng,
            )
            .unwrap();
            assert_eq!(d.n_workers(), 21);
            assert_eq!(d.cost, 21.0);
            assert_eq!(d.confidence, None);
        }
    }

    #[test]
    fn weighted_asks_everyone() {
        let config = Config::default();
        let records = book(22, 0, &config);
        let mut src = Scripted::new(&(0..22).map(|w| (w, Label::Zero)).collect::<Vec<_>>());
        let d = answer_question_voting(
            0,
            StrategyKind::Weighted,
            &availability(22, 0),
            &records,
            &mut src,
            &config,
            &mut rng_stream(1, "select"),
        )
        .unwrap();
        assert_eq!(d.n_workers(), 22);
        assert_eq!(d.cost, 22.0);
        assert_eq!(d.chosen_label, Label::Zero);
    }

    #[test]
    fn confident_start_stops_after_initial_query() {
        // Three workers with a long perfect record: EM skill 1 - eps each.
        let config = Config::default();
        let mut records = book(10, 2, &config);
        for w in 0..10 {
            for _ in 0..20 {
                update_consensus_records(
                    StrategyKind::Em,
                    &mut records,
                    &[Response { worker: WorkerId(w), label: Label::One, expert: false }],
                    Label::One,
                    1.0,
                );
            }
        }
        let mut src = Scripted::new(&(0..12).map(|w| (w, Label::One)).collect::<Vec<_>>());
        let d = answer_question_iterative(
            0,
            StrategyKind::Em,
            &availability(10, 2),
            &records,
            &mut src,
            &config,
            &mut rng_stream(2, "select"),
        );
        assert_eq!(d.n_workers(), 3);
        assert_eq!(d.cost, 3.0);
        assert!(!d.escalated);
        assert!(d.confidence.unwrap() > 0.9);
    }

    #[test]
    fn exhausted_crowd_escalates_to_experts() {
        // Two fresh crowd workers split 1/0, so the crowd alone sits at 0.5.
        let config = Config::default();
        let records = book(2, 3, &config);
        let mut src = Scripted::new(&[
            (0, Label::One),
            (1, Label::Zero),
            (2, Label::One),
            (3, Label::One),
            (4, Label::One),
        ]);
        let d = answer_question_iterative(
            7,
            StrategyKind::Bay,
            &availability(2, 3),
            &records,
            &mut src,
            &config,
            &mut rng_stream(3, "select"),
        );
        assert!(d.escalated);
        assert_eq!(d.n_workers(), 2);
        // One expert at 0.85 gives exactly 0.85 <= 0.9; a second gives
        // 0.85^2 / (0.85^2 + 0.15^2) = 0.9698 > 0.9.
        assert_eq!(d.n_experts(), 2);
        assert!((d.confidence.unwrap() - 0.7225 / 0.745).abs() < 1e-9);
        assert_eq!(d.cost, 2.0 + 2.0 * 5.0);
        assert_eq!(d.chosen_label, Label::One);
        let unique: std::collections::HashSet<_> = src.asked.iter().collect();
        assert_eq!(unique.len(), src.asked.len());
    }

    #[test]
    fn escalation_stops_when_experts_run_out() {
        let config = Config {
            confidence_threshold: 0.99,
            ..Config::default()
        };
        let records = book(1, 1, &config);
        let mut src = Scripted::new(&[(0, Label::One), (1, Label::Zero)]);
        let d = answer_question_iterative(
            0,
            StrategyKind::Em,
            &availability(1, 1),
            &records,
            &mut src,
            &config,
            &mut rng_stream(3, "select"),
        );
        assert!(d.escalated);
        assert_eq!((d.n_workers(), d.n_experts()), (1, 1));
        assert!(d.confidence.unwrap() <= 0.99);
        assert_eq!(d.chosen_label, Label::Zero);
    }

    #[test]
    fn lowest_threshold_never_loops() {
        let config = Config {
            confidence_threshold: 0.5,
            ..Config::default()
        };
        let records = book(20, 3, &config);
        let mut src = Scripted::new(
            &(0..23).map(|w| (w, if w % 3 == 0 { Label::Zero } else { Label::One })).collect::<Vec<_>>(),
        );
        let d = answer_question_iterative(
            0,
            StrategyKind::Conf,
            &availability(20, 3),
            &records,
            &mut src,
            &config,
            &mut rng_stream(4, "select"),
        );
        assert_eq!(d.n_workers(), 3);
        assert!(!d.escalated);
    }

    #[test]
    fn consensus_updates_follow_strategy() {
        let config = Config::default();
        let responses = [
            Response { worker: WorkerId(0), label: Label::One, expert: false },
            Response { worker: WorkerId(1), label: Label::Zero, expert: false },
            Response { worker: WorkerId(2), label: Label::Zero, expert: true },
        ];
        let base = book(2, 1, &config);

        let mut bay = base.clone();
        update_consensus_records(StrategyKind::Bay, &mut bay, &responses, Label::One, 0.96);
        assert_eq!(bay.get(WorkerId(0)).alpha, base.get(WorkerId(0)).alpha + 1.0);
        assert_eq!(bay.get(WorkerId(1)).beta, base.get(WorkerId(1)).beta + 1.0);
        assert_eq!(bay.get(WorkerId(2)), base.get(WorkerId(2)));

        let mut conf = base.clone();
        update_consensus_records(StrategyKind::Conf, &mut conf, &responses, Label::One, 0.96);
        assert!((conf.get(WorkerId(1)).beta - (base.get(WorkerId(1)).beta + 0.96)).abs() < 1e-12);

        let mut mv = base.clone();
        update_consensus_records(StrategyKind::Mv, &mut mv, &responses, Label::One, 1.0);
        let r = mv.get(WorkerId(1));
        assert_eq!((r.agreements, r.answered), (0.0, 1.0));
        assert_eq!((r.alpha, r.beta), (base.get(WorkerId(1)).alpha, base.get(WorkerId(1)).beta));
    }

    #[test]
    fn empty_session() {
        let config = Config {
            questions: 0,
            ..Config::default()
        };
        let world = World::generate(&config, 1).unwrap();
        let log = run_session(&world, StrategyKind::Bay, &config, &mut rng_stream(1, "s")).unwrap();
        assert!(log.decisions.is_empty());
        assert_eq!(log.total_cost, 0.0);
    }

    #[test]
    fn mv_cost_is_availability_driven() {
        let config = Config {
            availability_prob: 1.0,
            questions: 500,
            ..Config::default()
        };
        let world = World::generate(&config, 5).unwrap();
        let log = run_session(&world, StrategyKind::Mv, &config, &mut rng_stream(5, "s")).unwrap();
        // 30 crowd workers always available; the odd rule asks 29.
        assert!(log.decisions.iter().all(|d| d.cost == 29.0));
        for r in log.records.iter().filter(|r| !r.is_known_expert) {
            assert_eq!((r.alpha, r.beta), (config.prior_alpha(), config.prior_beta()));
        }
    }

    #[test]
    fn session_invariants_hold() {
        let config = Config {
            questions: 300,
            ..Config::default()
        };
        let world = World::generate(&config, 9).unwrap();
        for strategy in StrategyKind::ALL {
            let log =
                run_session(&world, strategy, &config, &mut rng_stream(9, strategy.cli_name())).unwrap();
            assert_eq!(log.decisions.len(), 300);
            let summed: f64 = log.decisions.iter().map(|d| d.cost).sum();
            assert!((summed - log.total_cost).abs() < 1e-9);
            let mut asked = vec![0.0; world.pool.len()];
            for (d, avail) in log.decisions.iter().zip(&world.availability) {
                assert_eq!(d.cost, d.expected_cost(config.worker_cost, config.expert_cost));
                let ids: std::collections::HashSet<_> = d.responses.iter().map(|r| r.worker).collect();
                assert_eq!(ids.len(), d.responses.len());
                if let Some(c) = d.confidence {
                    let all = d.n_workers() == avail.workers.len()
                        && d.n_experts() == avail.experts.len();
                    assert!(c > config.confidence_threshold || all);
                }
                for r in d.responses.iter().filter(|r| !r.expert) {
                    asked[r.worker.0 as usize] += 1.0;
                }
            }
            for r in log.records.iter().filter(|r| !r.is_known_expert) {
                let n = asked[r.id.0 as usize];
                let growth = r.alpha + r.beta - config.prior_strength;
                match strategy {
                    StrategyKind::Bay => assert!((growth - n).abs() < 1e-9),
                    StrategyKind::Conf => assert!(growth <= n + 1e-9),
                    _ => {
                        assert_eq!(r.answered, n);
                        assert!(growth.abs() < 1e-12);
                    }
                }
            }
        }
    }
}
