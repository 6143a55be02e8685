//! Quantifies the pessimistic-verification policy with no model in the
//! loop.
//!
//! Reviewers are modeled as independent Bernoulli trials: a review rejects a
//! flawed proof with probability `q` and falsely rejects a correct proof
//! with probability `p`; one refine round repairs a flawed proof with
//! probability `r`. Analytic formulas cover one-round and refinement-loop
//! acceptance; [`simulate_run`] is a seeded Monte Carlo cross-check running
//! the exact orchestrator refine-loop semantics. Reviewer independence is
//! assumed throughout; correlated reviewers are out of scope.

use alloc::format;
use alloc::string::String;

use rand_core::{RngCore, SeedableRng};

/// Bernoulli reviewer statistics, all probabilities in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReviewerModel {
    /// Probability one review rejects a flawed proof.
    pub q: f64,
    /// Probability one review rejects a correct proof.
    pub p: f64,
    /// Probability one refine round repairs a flawed proof. A repaired proof
    /// behaves like a correct proof (false-rejection probability `p`)
    /// thereafter.
    pub r: f64,
}

impl ReviewerModel {
    pub fn new(q: f64, p: f64, r: f64) -> Result<Self, SimError> {
        for (name, value) in [("q", q), ("p", p), ("r", r)] {
            check_probability(name, value)?;
        }
        Ok(Self { q, p, r })
    }
}

/// Monte Carlo outcome; deterministic given `(model, k, refine_cap, trials,
/// seed)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    pub accept_rate_flawed: f64,
    pub accept_rate_correct: f64,
    /// Verifier calls averaged over all simulated records (flawed and
    /// correct alike).
    pub mean_reviews_per_record: f64,
    pub trials: u64,
    pub seed: u64,
}

fn check_probability(name: &'static str, value: f64) -> Result<(), SimError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(SimError::DomainViolation {
            parameter: name,
            detail: format!("{value} is outside [0, 1]"),
        });
    }
    Ok(())
}

fn check_k(k: u32) -> Result<(), SimError> {
    if k < 1 {
        return Err(SimError::DomainViolation {
            parameter: "k",
            detail: String::from("at least one review per round is required"),
        });
    }
    Ok(())
}

/// Integer power by repeated multiplication; exact for the small exponents
/// used here and available without std float intrinsics.
fn pow_int(base: f64, exp: u32) -> f64 {
    let mut out = 1.0;
    for _ in 0..exp {
        out *= base;
    }
    out
}

/// Probability a flawed proof survives one round of `k` pessimistically
/// aggregated reviews: all `k` must miss the flaw, so `(1-q)^k`.
pub fn acceptance_probability_flawed(q: f64, k: u32) -> Result<f64, SimError> {
    check_probability("q", q)?;
    check_k(k)?;
    Ok(pow_int(1.0 - q, k))
}

/// Probability a correct proof survives one round: no false rejection in
/// `k` reviews, so `(1-p)^k`.
pub fn acceptance_probability_correct(p: f64, k: u32) -> Result<f64, SimError> {
    check_probability("p", p)?;
    check_k(k)?;
    Ok(pow_int(1.0 - p, k))
}

/// Probability a flawed proof is eventually accepted when each rejection
/// (up to `refine_cap` of them) triggers a refine round.
///
/// With `r = 0` the proof stays flawed and gets `1 + refine_cap`
/// independent chances: `1 - (1 - (1-q)^k)^(1+refine_cap)`, returned in
/// closed form. With `r > 0` the value comes from the recursion over the
/// `{flawed, repaired}` state space, where a repaired proof passes every
/// later round (the `p = 0` reading of repaired-equals-correct).
pub fn acceptance_with_refinement_flawed(
    q: f64,
    k: u32,
    refine_cap: u32,
    r: f64,
) -> Result<f64, SimError> {
    check_probability("q", q)?;
    check_probability("r", r)?;
    check_k(k)?;
    let accept_flawed = pow_int(1.0 - q, k);
    let rounds = refine_cap + 1;
    if r == 0.0 {
        return Ok(1.0 - pow_int(1.0 - accept_flawed, rounds));
    }
    // p_f(n): accepted within n remaining rounds starting flawed. A round
    // accepts outright, or rejects and (when rounds remain) a refine round
    // repairs with probability r.
    let mut p_f = 0.0;
    for n in 1..=rounds {
        let after_reject = if n > 1 { r + (1.0 - r) * p_f } else { 0.0 };
        p_f = accept_flawed + (1.0 - accept_flawed) * after_reject;
    }
    Ok(p_f)
}

fn uniform(rng: &mut impl RngCore) -> f64 {
    // 53 random bits, the standard [0, 1) double construction.
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One record through the orchestrator's verify/refine semantics: rounds of
/// `k` Bernoulli reviews, pessimistic aggregation, refinement until
/// acceptance or the cap.
fn simulate_record(
    rng: &mut impl RngCore,
    starts_flawed: bool,
    model: &ReviewerModel,
    k: u32,
    refine_cap: u32,
) -> (bool, u64) {
    let mut flawed = starts_flawed;
    let mut reviews = 0u64;
    let mut refine_count = 0u32;
    loop {
        let reject_probability = if flawed { model.q } else { model.p };
        let mut any_reject = false;
        for _ in 0..k {
            reviews += 1;
            if uniform(rng) < reject_probability {
                any_reject = true;
            }
        }
        if !any_reject {
            return (true, reviews);
        }
        if refine_count >= refine_cap {
            return (false, reviews);
        }
        refine_count += 1;
        if flawed && uniform(rng) < model.r {
            flawed = false;
        }
    }
}

/// Runs `trials` flawed records and `trials` correct records through the
/// refine-loop semantics with seeded reviewers. Each trial draws from its
/// own counter-derived ChaCha stream (streams `2·trial` and `2·trial + 1`),
/// so results are reproducible and independent of any partitioning.
pub fn simulate_run(
    model: &ReviewerModel,
    k: u32,
    refine_cap: u32,
    trials: u64,
    seed: u64,
) -> Result<SimResult, SimError> {
    check_probability("q", model.q)?;
    check_probability("p", model.p)?;
    check_probability("r", model.r)?;
    check_k(k)?;
    if trials < 1 {
        return Err(SimError::DomainViolation {
            parameter: "trials",
            detail: String::from("at least one trial is required"),
        });
    }
    let mut accepted_flawed = 0u64;
    let mut accepted_correct = 0u64;
    let mut total_reviews = 0u64;
    for trial in 0..trials {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 * trial);
        let (accepted, reviews) = simulate_record(&mut rng, true, model, k, refine_cap);
        accepted_flawed += u64::from(accepted);
        total_reviews += reviews;

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 * trial + 1);
        let (accepted, reviews) = simulate_record(&mut rng, false, model, k, refine_cap);
        accepted_correct += u64::from(accepted);
        total_reviews += reviews;
    }
    Ok(SimResult {
        accept_rate_flawed: accepted_flawed as f64 / trials as f64,
        accept_rate_correct: accepted_correct as f64 / trials as f64,
        mean_reviews_per_record: total_reviews as f64 / (2.0 * trials as f64),
        trials,
        seed,
    })
}

/// Header for the tabular text emitted by [`SimResult::csv_row`].
pub fn csv_header() -> &'static str {
    "q,p,r,k,R,accept_flawed,accept_correct,mean_reviews,trials,seed"
}

impl SimResult {
    /// One comma-separated row matching [`csv_header`].
    pub fn csv_row(&self, model: &ReviewerModel, k: u32, refine_cap: u32) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            model.q,
            model.p,
            model.r,
            k,
            refine_cap,
            self.accept_rate_flawed,
            self.accept_rate_correct,
            self.mean_reviews_per_record,
            self.trials,
            self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("domain violation for {parameter}: {detail}")]
    DomainViolation {
        parameter: &'static str,
        detail: String,
    },
}
