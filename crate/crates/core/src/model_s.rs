//! Population evolution with score-proportional growth.
//!
//! Every individual carries an integer score `S ≥ u` and a selection weight
//! `a·S + b`. One step at time `n` runs two phases:
//!
//! 1. `t` independent trials. Each trial picks individual `i` with
//!    probability `(a·S_i + b) / (t·n)` (weights frozen at the start of the
//!    step) and otherwise picks nobody. A picked individual gains one point
//!    per pick, so a single individual's increment is
//!    `Binomial(t, (a·S + b)/(t·n))`.
//! 2. `floor(m) + Bernoulli(m - floor(m))` newcomers arrive with score `u`.
//!
//! If the total weight exceeds `t·n` the trial probabilities are renormalised
//! so that every trial picks someone; each such step is counted in
//! [`ScoreTable::clamp_events`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::Histogram;
use crate::sampler::FenwickSampler;
use crate::seed::{rng_from_seed, SimRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Score coefficient of the selection weight.
    pub a: f64,
    /// Additive coefficient of the selection weight.
    pub b: f64,
    /// Expected number of newcomers per step.
    pub m: f64,
    /// Cap on births and on total score increase per step.
    pub t: u32,
    /// Score of every newcomer.
    pub u: u64,
    #[serde(default = "default_n0")]
    pub n0: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_n0() -> u64 {
    1
}

impl SimParams {
    pub fn new(a: f64, b: f64, m: f64, t: u32, u: u64) -> Self {
        SimParams { a, b, m, t, u, n0: 1, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::Param(format!("a must be positive, got {}", self.a)));
        }
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(Error::Param(format!("b must be non-negative, got {}", self.b)));
        }
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(Error::Param(format!("m must be positive, got {}", self.m)));
        }
        if self.u == 0 {
            return Err(Error::Param("u must be at least 1".into()));
        }
        if self.t == 0 {
            return Err(Error::Param("t must be at least 1".into()));
        }
        if self.n0 == 0 {
            return Err(Error::Param("n0 must be at least 1".into()));
        }
        if self.m.ceil() > self.t as f64 {
            return Err(Error::Param(format!(
                "ceil(m) = {} exceeds the per-step birth cap t = {}",
                self.m.ceil(),
                self.t
            )));
        }
        Ok(())
    }

    pub fn initial_size(&self) -> usize {
        self.m.ceil() as usize
    }

    pub fn weight_of(&self, score: u64) -> f64 {
        self.a * score as f64 + self.b
    }
}

/// What happened during one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub score_increase: u32,
    pub births: u32,
    pub clamped: bool,
}

#[derive(Clone, Debug)]
pub struct ScoreTable {
    params: SimParams,
    scores: Vec<u64>,
    sampler: FenwickSampler<f64>,
    step: u64,
    clamp_events: u64,
    rng: SimRng,
    picks: Vec<usize>,
}

/// Creates the starting population: `ceil(m)` individuals at score `u`,
/// positioned at time `n0`.
pub fn init_population(params: SimParams) -> Result<ScoreTable> {
    params.validate()?;
    let scores = vec![params.u; params.initial_size()];
    ScoreTable::from_scores(params, scores, params.n0)
}

impl ScoreTable {
    /// Builds a table from explicit scores at time `step`.
    pub fn from_scores(params: SimParams, scores: Vec<u64>, step: u64) -> Result<Self> {
        params.validate()?;
        if step == 0 {
            return Err(Error::Param("time index must be at least 1".into()));
        }
        if let Some(&low) = scores.iter().find(|&&s| s < params.u) {
            return Err(Error::Param(format!("score {low} below base score {}", params.u)));
        }
        let mut sampler = FenwickSampler::with_capacity(scores.len().max(16));
        for &s in &scores {
            sampler.push(params.weight_of(s));
        }
        Ok(ScoreTable {
            params,
            scores,
            sampler,
            step,
            clamp_events: 0,
            rng: rng_from_seed(params.seed),
            picks: Vec::with_capacity(params.t as usize),
        })
    }

    /// Replaces the random stream, e.g. when resampling a frozen state.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = rng_from_seed(seed);
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn scores(&self) -> &[u64] {
        &self.scores
    }

    pub fn population(&self) -> usize {
        self.scores.len()
    }

    /// Current time index `n`; the next step uses `n` in its denominators.
    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    /// Incrementally maintained `Σ (a·S_i + b)`.
    pub fn total_weight(&self) -> f64 {
        self.sampler.total()
    }

    pub fn recompute_total_weight(&self) -> f64 {
        self.scores.iter().map(|&s| self.params.weight_of(s)).sum()
    }

    pub fn histogram(&self) -> Histogram {
        Histogram::from_values(self.step, self.scores.iter().copied())
    }

    /// Advances the population by one step.
    pub fn step(&mut self) -> StepStats {
        let p = self.params;
        let n = self.step as f64;
        let capacity = p.t as f64 * n;
        let total = self.sampler.total();
        let clamped = total > capacity;
        let range = capacity.max(total);
        if clamped {
            self.clamp_events += 1;
        }

        self.picks.clear();
        for _ in 0..p.t {
            let x = self.rng.gen::<f64>() * range;
            if x < total {
                if let Some(i) = self.sampler.find(x) {
                    self.picks.push(i);
                }
            }
        }
        for &i in &self.picks {
            self.scores[i] += 1;
            self.sampler.add(i, p.a);
        }

        let whole = p.m.floor();
        let frac = p.m - whole;
        let mut births = whole as u32;
        if frac > 0.0 && self.rng.gen_bool(frac) {
            births += 1;
        }
        let newcomer_weight = p.weight_of(p.u);
        for _ in 0..births {
            self.scores.push(p.u);
            self.sampler.push(newcomer_weight);
        }

        self.step += 1;
        StepStats { score_increase: self.picks.len() as u32, births, clamped }
    }
}

/// Full result of a trajectory.
#[derive(Clone, Debug)]
pub struct RunOutput {
    /// Histograms in the order of the requested snapshots.
    pub snapshots: Vec<Histogram>,
    pub clamp_events: u64,
    /// Steps where the score increase or the births exceeded `t`.
    pub cap_violations: u64,
    pub final_population: usize,
    pub final_total_weight: f64,
    pub recomputed_total_weight: f64,
}

/// Runs steps `n0..=n_max` and records the histogram after each step listed
/// in `snapshot_at`.
///
/// A snapshot labelled `n` is the population after the step whose
/// denominators use `n`, i.e. the state at time `n + 1`. Its `n` field holds
/// the label.
pub fn run(params: SimParams, n_max: u64, snapshot_at: &[u64]) -> Result<Vec<Histogram>> {
    run_detailed(params, n_max, snapshot_at).map(|r| r.snapshots)
}

pub fn run_detailed(params: SimParams, n_max: u64, snapshot_at: &[u64]) -> Result<RunOutput> {
    params.validate()?;
    if n_max < params.n0 {
        return Err(Error::Usage(format!("n_max {n_max} is below n0 {}", params.n0)));
    }
    for &s in snapshot_at {
        if s < params.n0 || s > n_max {
            return Err(Error::Usage(format!(
                "snapshot {s} outside [{}, {n_max}]",
                params.n0
            )));
        }
    }
    let mut table = init_population(params)?;
    let mut wanted: Vec<(u64, usize)> =
        snapshot_at.iter().copied().enumerate().map(|(i, s)| (s, i)).collect();
    wanted.sort_unstable();
    let mut snapshots = vec![Histogram::default(); snapshot_at.len()];
    let mut next = 0;
    let mut cap_violations = 0;
    for n in params.n0..=n_max {
        let stats = table.step();
        if stats.score_increase > params.t || stats.births > params.t {
            cap_violations += 1;
        }
        while next < wanted.len() && wanted[next].0 == n {
            let mut h = table.histogram();
            h.n = n;
            snapshots[wanted[next].1] = h;
            next += 1;
        }
    }
    Ok(RunOutput {
        snapshots,
        clamp_events: table.clamp_events(),
        cap_violations,
        final_population: table.population(),
        final_total_weight: table.total_weight(),
        recomputed_total_weight: table.recompute_total_weight(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> SimParams {
        SimParams::new(0.5, 0.0, 2.0, 4, 1).with_seed(42)
    }

    #[test]
    fn init_two_at_base_score() {
        let t = init_population(SimParams::new(0.5, 0.0, 2.0, 4, 1)).unwrap();
        assert_eq!(t.scores(), &[1, 1]);
        assert_eq!(t.total_weight(), 1.0);
        assert_eq!(t.step_index(), 1);
    }

    #[test]
    fn init_with_additive_term() {
        let t = init_population(SimParams::new(1.0 / 3.0, 1.0, 3.0, 3, 2)).unwrap();
        assert_eq!(t.scores(), &[2, 2, 2]);
        assert!((t.total_weight() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_births_over_cap() {
        let err = init_population(SimParams::new(0.5, 0.0, 5.0, 4, 1)).unwrap_err();
        assert!(matches!(err, Error::Param(_)));
    }

    #[test]
    fn rejects_zero_score_coefficient() {
        assert!(SimParams::new(0.0, 1.0, 1.0, 2, 1).validate().is_err());
        assert!(SimParams::new(-0.1, 1.0, 1.0, 2, 1).validate().is_err());
        assert!(SimParams::new(0.5, -1.0, 1.0, 2, 1).validate().is_err());
        assert!(SimParams::new(0.5, 0.0, 1.0, 2, 0).validate().is_err());
    }

    #[test]
    fn integer_m_gives_deterministic_births() {
        let mut t = init_population(canonical()).unwrap();
        let stats = t.step();
        assert_eq!(stats.births, 2);
        assert_eq!(t.population(), 4);
        assert!(stats.score_increase <= 4);
        assert_eq!(t.step_index(), 2);
    }

    #[test]
    fn run_population_count() {
        let h = run(canonical(), 10, &[10]).unwrap();
        assert_eq!(h[0].total(), 22);
        assert_eq!(h[0].n, 10);
    }

    #[test]
    fn run_is_deterministic() {
        let a = run(canonical(), 200, &[50, 200]).unwrap();
        let b = run(canonical(), 200, &[50, 200]).unwrap();
        assert_eq!(a, b);
        let c = run(canonical().with_seed(43), 200, &[200]).unwrap();
        assert_ne!(a[1], c[0]);
    }

    #[test]
    fn snapshot_out_of_range() {
        assert!(matches!(run(canonical(), 10, &[11]), Err(Error::Usage(_))));
        assert!(matches!(run(canonical(), 10, &[0]), Err(Error::Usage(_))));
    }

    #[test]
    fn snapshots_returned_in_request_order() {
        let h = run(canonical(), 30, &[30, 5]).unwrap();
        assert_eq!(h[0].n, 30);
        assert_eq!(h[1].n, 5);
        assert_eq!(h[1].total(), 12);
    }

    #[test]
    fn fractional_m_population_bounds() {
        let p = SimParams::new(0.5, 0.2, 1.5, 3, 2).with_seed(7);
        let out = run_detailed(p, 1000, &[1000]).unwrap();
        let pop = out.final_population;
        assert!((2 + 1000..=2 + 2000).contains(&pop), "{pop}");
        assert!(out.snapshots[0].counts.keys().all(|&s| s >= 2));
        // Newcomers always enter at u, so the base bin is well populated.
        assert!(out.snapshots[0].get(2) > 0);
    }

    #[test]
    fn hard_caps_hold_every_step() {
        let p = SimParams::new(1.0, 1.0, 2.5, 3, 1).with_seed(11);
        let mut t = init_population(p).unwrap();
        for _ in 0..5000 {
            let before: u64 = t.scores().iter().sum();
            let pop_before = t.population();
            let stats = t.step();
            let after: u64 = t.scores().iter().sum();
            let births = (t.population() - pop_before) as u64;
            assert!(stats.score_increase <= 3 && stats.births <= 3);
            assert_eq!(after - before, stats.score_increase as u64 + births * p.u);
            assert!(t.scores()[pop_before..].iter().all(|&s| s == p.u));
        }
    }

    #[test]
    fn clamping_is_counted() {
        // Total weight 2·(10·5) = 100 far exceeds t·n = 2 at n = 1.
        let p = SimParams::new(10.0, 0.0, 1.0, 2, 5).with_seed(3);
        let mut t = ScoreTable::from_scores(p, vec![5, 5], 1).unwrap();
        let stats = t.step();
        assert!(stats.clamped);
        assert_eq!(stats.score_increase, 2);
        assert_eq!(t.clamp_events(), 1);
    }

    #[test]
    fn total_weight_tracks_recomputation() {
        let p = SimParams::new(1.0 / 3.0, 0.7, 1.3, 2, 1).with_seed(5);
        let mut t = init_population(p).unwrap();
        for _ in 0..20_000 {
            t.step();
        }
        let rel = (t.total_weight() - t.recompute_total_weight()).abs() / t.recompute_total_weight();
        assert!(rel < 1e-9, "{rel}");
    }
}
