//! Synthetic crowd: worker pools, question streams, per-question
//! availability and stochastic responses.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::rng::{rng_stream, RandomStream};
use crate::types::{Label, Question, WorkerClass, WorkerId, WorkerProfile};

const AVAILABILITY_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerPool {
    pub profiles: Vec<WorkerProfile>,
}

impl WorkerPool {
    pub fn count(&self, class: WorkerClass) -> usize {
        self.profiles.iter().filter(|p| p.class == class).count()
    }

    pub fn profile(&self, id: WorkerId) -> &WorkerProfile {
        &self.profiles[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn experts(&self) -> impl Iterator<Item = &WorkerProfile> {
        self.profiles.iter().filter(|p| p.class.is_known_expert())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionStream {
    pub questions: Vec<Question>,
}

/// Workers reachable for one question. Crowd workers come and go; known
/// experts are always reachable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Availability {
    pub workers: Vec<WorkerId>,
    pub experts: Vec<WorkerId>,
}

/// Draws every class's skills from its Gaussian and clamps them into `[0, 1]`.
/// Ids are assigned densely, adversarial first, then normal, then expert.
pub fn sample_worker_pool(config: &Config, rng: &mut RandomStream) -> WorkerPool {
    let mut profiles = Vec::with_capacity(config.pool_counts.total());
    for class in WorkerClass::ALL {
        let skill = config.skill(class);
        for _ in 0..config.pool_counts.get(class) {
            let drawn = rng.gaussian(skill.mean, skill.std_dev);
            profiles.push(WorkerProfile {
                id: WorkerId(profiles.len() as u32),
                class,
                true_accuracy: drawn.clamp(0.0, 1.0),
            });
        }
    }
    WorkerPool { profiles }
}

/// Probability that the worker answers this question correctly.
///
/// Difficulty (a signed probability shift) pushes honest workers down and
/// adversaries up, never past the 0.5 guessing line on hard questions.
/// Adversaries follow the mirror image of the honest rule.
pub fn effective_accuracy(profile: &WorkerProfile, difficulty: f64) -> f64 {
    match profile.class {
        WorkerClass::Normal | WorkerClass::Expert => shift_toward_guess(profile.true_accuracy, difficulty),
        WorkerClass::Adversarial => mirror_toward_guess(profile.true_accuracy, difficulty),
    }
}

fn mirror_toward_guess(p: f64, difficulty: f64) -> f64 {
    let shifted = (p + difficulty).clamp(0.0, 1.0);
    if difficulty > 0.0 {
        shifted.min(p.max(0.5))
    } else {
        shifted
    }
}

fn shift_toward_guess(p: f64, difficulty: f64) -> f64 {
    let shifted = (p - difficulty).clamp(0.0, 1.0);
    if difficulty > 0.0 {
        // Only probabilities that started above the guessing line are floored.
        shifted.max(p.min(0.5))
    } else {
        shifted
    }
}

/// Answer given a uniform draw `u` in `[0, 1)`: correct iff `u < p_eff`.
pub fn response_from_draw(profile: &WorkerProfile, question: &Question, u: f64) -> Label {
    if u < effective_accuracy(profile, question.difficulty) {
        question.true_label
    } else {
        question.true_label.flipped()
    }
}

pub fn sample_response(profile: &WorkerProfile, question: &Question, rng: &mut RandomStream) -> Label {
    response_from_draw(profile, question, rng.uniform())
}

/// Includes each crowd worker independently with `availability_prob`,
/// redrawing when nobody shows up.
pub fn sample_availability(
    pool: &WorkerPool,
    config: &Config,
    rng: &mut RandomStream,
) -> Result<Availability> {
    let experts: Vec<WorkerId> = pool.experts().map(|p| p.id).collect();
    let crowd: Vec<WorkerId> = pool
        .profiles
        .iter()
        .filter(|p| !p.class.is_known_expert())
        .map(|p| p.id)
        .collect();
    if crowd.is_empty() {
        return Err(Error::NoAvailableWorkers(0));
    }
    for _ in 0..AVAILABILITY_RETRIES {
        let workers: Vec<WorkerId> = crowd
            .iter()
            .copied()
            .filter(|_| rng.bernoulli(config.availability_prob))
            .collect();
        if !workers.is_empty() {
            return Ok(Availability { workers, experts });
        }
    }
    Err(Error::NoAvailableWorkers(AVAILABILITY_RETRIES))
}

/// Uniform true labels; difficulty is `mean + std * z` with `z` standard
/// normal, so streams with the same seed differ only by the affine map.
pub fn sample_questions(n: usize, config: &Config, rng: &mut RandomStream) -> QuestionStream {
    let questions = (0..n)
        .map(|i| {
            let true_label = if rng.bernoulli(0.5) { Label::One } else { Label::Zero };
            let z = rng.gaussian(0.0, 1.0);
            Question {
                id: i as u32,
                true_label,
                difficulty: config.difficulty.mean + config.difficulty.std_dev * z,
            }
        })
        .collect();
    QuestionStream { questions }
}

/// A fully drawn simulated environment: the pool, the questions, who is
/// available for each question, and a uniform draw per (question, worker)
/// that fixes every potential response.
///
/// Strategies run against the same `World` see identical responses from
/// any worker they choose to ask.
#[derive(Debug, Clone)]
pub struct World {
    pub seed: u64,
    pub pool: WorkerPool,
    pub questions: QuestionStream,
    pub availability: Vec<Availability>,
    draws: Vec<f64>,
}

impl World {
    pub fn generate(config: &Config, seed: u64) -> Result<World> {
        let pool = sample_worker_pool(config, &mut rng_stream(seed, "pool"));
        let questions = sample_questions(config.questions, config, &mut rng_stream(seed, "questions"));
        let mut avail_rng = rng_stream(seed, "availability");
        let availability = (0..config.questions)
            .map(|_| sample_availability(&pool, config, &mut avail_rng))
            .collect::<Result<Vec<_>>>()?;
        let mut response_rng = rng_stream(seed, "responses");
        let draws = (0..config.questions * pool.len())
            .map(|_| response_rng.uniform())
            .collect();
        Ok(World {
            seed,
            pool,
            questions,
            availability,
            draws,
        })
    }

    pub fn len(&self) -> usize {
        self.questions.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.questions.is_empty()
    }

    /// The response `worker` gives to question number `index`.
    pub fn respond(&self, index: usize, worker: WorkerId) -> Label {
        let question = &self.questions.questions[index];
        let u = self.draws[index * self.pool.len() + worker.0 as usize];
        response_from_draw(self.pool.profile(worker), question, u)
    }
}
