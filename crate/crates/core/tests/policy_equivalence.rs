//! The simulator and the real orchestrator implement the same verification
//! policy: driving the engine with Bernoulli reviewers produces accept rates
//! statistically indistinguishable from `simulate_run` at the same
//! parameters.

use aim_forge_core::backend::{Backend, BackendError, ChatRequest, ChatResponse, RoleTag};
use aim_forge_core::model::{ProblemContext, RunConfig};
use aim_forge_core::orchestrator::{run, FixedClock};
use aim_forge_core::prvsim::{simulate_run, ReviewerModel};
use aim_forge_core::trajectory::NullSink;
use rand_core::{RngCore, SeedableRng};

/// Backend whose explorer emits batches of unique flawed conjectures and
/// whose verifier rejects each one independently with probability `q`.
struct BernoulliBackend {
    rng: rand_chacha::ChaCha8Rng,
    q: f64,
    per_iteration: usize,
    counter: usize,
}

impl BernoulliBackend {
    fn new(q: f64, per_iteration: usize, seed: u64) -> Self {
        Self {
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed),
            q,
            per_iteration,
            counter: 0,
        }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl Backend for BernoulliBackend {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        match request.role_tag {
            RoleTag::Explorer => {
                let mut text = String::new();
                for _ in 0..self.per_iteration {
                    self.counter += 1;
                    text.push_str(&format!(
                        "<conjecture>\n<statement>\nclaim number {} holds\n</statement>\n<proof>\nargument {}\n</proof>\n<final>false</final>\n</conjecture>\n",
                        self.counter, self.counter
                    ));
                }
                Ok(ChatResponse::complete(text))
            }
            RoleTag::Verifier => {
                let verdict = if self.uniform() < self.q {
                    "A flaw: the argument is unsound.\nVERDICT: REJECT"
                } else {
                    "Sound.\nVERDICT: ACCEPT"
                };
                Ok(ChatResponse::complete(verdict))
            }
            RoleTag::Refiner => Ok(ChatResponse::complete(
                "<proof>\nstill the same flawed argument\n</proof>",
            )),
            RoleTag::Transcriber => Ok(ChatResponse::complete("")),
        }
    }
}

/// Pearson chi-square statistic for a 2x2 contingency table of
/// (accepted, not accepted) across two samples.
fn chi_square_2x2(x1: u64, n1: u64, x2: u64, n2: u64) -> f64 {
    let pooled = (x1 + x2) as f64 / (n1 + n2) as f64;
    let mut statistic = 0.0;
    for (x, n) in [(x1, n1), (x2, n2)] {
        for (observed, expected) in [
            (x as f64, n as f64 * pooled),
            ((n - x) as f64, n as f64 * (1.0 - pooled)),
        ] {
            if expected > 0.0 {
                let diff = observed - expected;
                statistic += diff * diff / expected;
            }
        }
    }
    statistic
}

/// Critical value of chi-square with one degree of freedom at alpha = 0.01.
const CHI_SQUARE_DF1_ALPHA01: f64 = 6.634896601021217;

#[test]
fn orchestrator_matches_simulator_without_refinement() {
    let records = 2000u64;
    let per_iteration = 100usize;
    let iterations = records as usize / per_iteration;
    let q = 0.5;
    let k = 2;

    let ctx = ProblemContext::new(
        "policy equivalence",
        vec!["reviewers are Bernoulli".to_string()],
        vec![],
        "never solved",
    )
    .unwrap();
    let config = RunConfig {
        k_reviews: k,
        refine_cap: 0,
        exploration_limit: iterations as u32,
        dedup_enabled: false,
        ..RunConfig::default()
    };
    let mut backend = BernoulliBackend::new(q, per_iteration, 2024);
    let mut sink = NullSink;
    let outcome = run(ctx, config, &mut backend, &mut sink, &FixedClock(0)).unwrap();
    assert_eq!(outcome.stats.conjectures_proposed, records);
    assert_eq!(outcome.stats.accepted + outcome.stats.discarded, records);

    let model = ReviewerModel::new(q, 0.0, 0.0).unwrap();
    let sim = simulate_run(&model, k, 0, records, 77).unwrap();
    let sim_accepts = (sim.accept_rate_flawed * records as f64).round() as u64;

    let statistic = chi_square_2x2(outcome.stats.accepted, records, sim_accepts, records);
    assert!(
        statistic < CHI_SQUARE_DF1_ALPHA01,
        "chi-square {statistic} exceeds the alpha=0.01 critical value; \
         orchestrator accepts {} of {records}, simulator {sim_accepts} of {records}",
        outcome.stats.accepted
    );

    // Both routes issue exactly k reviews per record when nothing refines.
    assert_eq!(outcome.stats.reviews_issued, records * u64::from(k));
    assert_eq!(sim.mean_reviews_per_record, f64::from(k));
}

#[test]
fn orchestrator_matches_simulator_with_refinement() {
    // One refine round, repairs never succeed (the refiner re-emits the
    // flawed proof), so the simulator's r = 0 flawed path is the exact
    // counterpart.
    let records = 1500u64;
    let per_iteration = 50usize;
    let q = 0.4;
    let k = 2;
    let cap = 1;

    let ctx = ProblemContext::new(
        "policy equivalence with refinement",
        vec!["reviewers are Bernoulli".to_string()],
        vec![],
        "never solved",
    )
    .unwrap();
    let config = RunConfig {
        k_reviews: k,
        refine_cap: cap,
        exploration_limit: (records as usize / per_iteration) as u32,
        dedup_enabled: false,
        ..RunConfig::default()
    };
    let mut backend = BernoulliBackend::new(q, per_iteration, 555);
    let mut sink = NullSink;
    let outcome = run(ctx, config, &mut backend, &mut sink, &FixedClock(0)).unwrap();
    assert_eq!(outcome.stats.accepted + outcome.stats.discarded, records);

    let model = ReviewerModel::new(q, 0.0, 0.0).unwrap();
    let sim = simulate_run(&model, k, cap, records, 91).unwrap();
    let sim_accepts = (sim.accept_rate_flawed * records as f64).round() as u64;

    let statistic = chi_square_2x2(outcome.stats.accepted, records, sim_accepts, records);
    assert!(
        statistic < CHI_SQUARE_DF1_ALPHA01,
        "chi-square {statistic}: orchestrator {} vs simulator {sim_accepts}",
        outcome.stats.accepted
    );
}
