//! Random graph grown by N-vertex interactions.
//!
//! The graph starts as a single `N`-clique. In every step `N` vertices
//! interact: the `N`-clique on them and every `M`-subclique (`2 ≤ M < N`) gain
//! one unit of weight, or enter the registry at weight 1 if they did not
//! exist yet. With probability `p` the interacting set is a new vertex plus
//! `N-1` old ones, chosen as a weight-proportional `(N-1)`-clique with
//! probability `r` and uniformly otherwise. With probability `1-p` it is `N`
//! old vertices, chosen as a weight-proportional `N`-clique with probability
//! `q` and uniformly otherwise.
//!
//! Only vertex sets that took part in an interaction count as cliques.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::Histogram;
use crate::sampler::FenwickSampler;
use crate::seed::{rng_from_seed, SimRng};

/// Largest supported interaction size.
pub const MAX_N: usize = 8;

const EMPTY_SLOT: u32 = u32::MAX;

/// Sorted vertex ids padded with `u32::MAX`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CliqueKey([u32; MAX_N]);

impl CliqueKey {
    pub fn from_sorted(vertices: &[u32]) -> Self {
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]));
        let mut key = [EMPTY_SLOT; MAX_N];
        key[..vertices.len()].copy_from_slice(vertices);
        CliqueKey(key)
    }

    pub fn new(vertices: &[u32]) -> Self {
        let mut v = vertices.to_vec();
        v.sort_unstable();
        Self::from_sorted(&v)
    }

    pub fn vertices(&self) -> &[u32] {
        let len = self.0.iter().position(|&v| v == EMPTY_SLOT).unwrap_or(MAX_N);
        &self.0[..len]
    }
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    /// Interaction size `N`.
    #[serde(rename = "N")]
    pub n: usize,
    pub p: f64,
    pub r: f64,
    pub q: f64,
    #[serde(default)]
    pub seed: u64,
    pub n_max: u64,
    /// Clique sizes whose weight histograms are reported.
    #[serde(default)]
    pub tracked_m: Vec<usize>,
    /// Steps at which the vertex count is recorded; `n_max` is always included.
    #[serde(default)]
    pub snapshots: Vec<u64>,
    /// Upper bound on registry memory; `None` uses [`DEFAULT_MEMORY_BUDGET`].
    #[serde(default)]
    pub memory_budget_bytes: Option<u64>,
}

pub const DEFAULT_MEMORY_BUDGET: u64 = 8 << 30;

/// Rough per-clique cost: key, index entry, weight, sampler node.
const BYTES_PER_CLIQUE: u64 = 96;

impl GraphParams {
    pub fn new(n: usize, p: f64, r: f64, q: f64, n_max: u64) -> Self {
        GraphParams {
            n,
            p,
            r,
            q,
            seed: 0,
            n_max,
            tracked_m: vec![],
            snapshots: vec![],
            memory_budget_bytes: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn tracking(mut self, sizes: &[usize]) -> Self {
        self.tracked_m = sizes.to_vec();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 || self.n > MAX_N {
            return Err(Error::Param(format!("N must be in 3..={MAX_N}, got {}", self.n)));
        }
        for (name, v) in [("p", self.p), ("r", self.r), ("q", self.q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Param(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        for &m in &self.tracked_m {
            if m < 2 || m > self.n {
                return Err(Error::Param(format!("tracked size {m} outside 2..={}", self.n)));
            }
        }
        Ok(())
    }

    /// Whether the power-law hypothesis `p > 0` and (`r > 0` or `(1-p)q > 0`) holds.
    pub fn power_law_hypothesis(&self) -> bool {
        self.p > 0.0 && (self.r > 0.0 || (1.0 - self.p) * self.q > 0.0)
    }

    /// Sizes kept in the registry: tracked ones plus `N-1` and `N`.
    pub fn maintained_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.tracked_m.clone();
        sizes.push(self.n - 1);
        sizes.push(self.n);
        sizes.sort_unstable();
        sizes.dedup();
        sizes
    }

    pub fn estimated_memory(&self) -> u64 {
        self.maintained_sizes()
            .iter()
            .map(|&m| binomial(self.n as u64, m as u64).saturating_mul(self.n_max + 1))
            .fold(0u64, |acc, c| acc.saturating_add(c.saturating_mul(BYTES_PER_CLIQUE)))
    }
}

/// Model-S coefficients induced on the weights of `M`-cliques.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    #[serde(rename = "M")]
    pub m_size: usize,
    /// Growth coefficient `a_M = p r (N-M)/N + (1-p) q`.
    pub a: f64,
    /// Expected new `M`-cliques per step.
    pub mu: f64,
    /// `1 + 1/a`; infinite when `a = 0`.
    pub exponent: f64,
}

pub fn derived_params(n: usize, m: usize, p: f64, r: f64, q: f64) -> Result<DerivedParams> {
    if n < 3 {
        return Err(Error::Domain(format!("N must be at least 3, got {n}")));
    }
    if m < 2 || m > n {
        return Err(Error::Domain(format!("M = {m} outside 2..={n}")));
    }
    let (nf, mf) = (n as f64, m as f64);
    let a = p * r * (nf - mf) / nf + (1.0 - p) * q;
    let c = |x: usize, y: usize| binomial(x as u64, y as u64) as f64;
    let mu = p * c(n - 1, m - 1) + p * (1.0 - r) * c(n - 1, m) + (1.0 - p) * (1.0 - q) * c(n, m);
    let exponent = if a > 0.0 { 1.0 + 1.0 / a } else { f64::INFINITY };
    Ok(DerivedParams { m_size: m, a, mu, exponent })
}

#[derive(Clone, Debug)]
enum Weights {
    Plain(Vec<u64>),
    Sampled(FenwickSampler<u64>),
}

impl Weights {
    fn get(&self, i: usize) -> u64 {
        match self {
            Weights::Plain(v) => v[i],
            Weights::Sampled(s) => s.weight(i),
        }
    }

    fn bump(&mut self, i: usize) {
        match self {
            Weights::Plain(v) => v[i] += 1,
            Weights::Sampled(s) => s.add(i, 1),
        }
    }

    fn push(&mut self, w: u64) {
        match self {
            Weights::Plain(v) => v.push(w),
            Weights::Sampled(s) => {
                s.push(w);
            }
        }
    }

    fn as_slice(&self) -> &[u64] {
        match self {
            Weights::Plain(v) => v,
            Weights::Sampled(s) => s.weights(),
        }
    }
}

/// Cliques of one size.
#[derive(Clone, Debug)]
struct SizeRegistry {
    index: HashMap<CliqueKey, u32>,
    keys: Vec<CliqueKey>,
    weights: Weights,
    total_weight: u64,
}

impl SizeRegistry {
    fn new(sampled: bool) -> Self {
        SizeRegistry {
            index: HashMap::new(),
            keys: Vec::new(),
            weights: if sampled {
                Weights::Sampled(FenwickSampler::new())
            } else {
                Weights::Plain(Vec::new())
            },
            total_weight: 0,
        }
    }

    /// Returns true if the clique was created.
    fn bump(&mut self, key: CliqueKey) -> bool {
        self.total_weight += 1;
        match self.index.get(&key) {
            Some(&i) => {
                self.weights.bump(i as usize);
                false
            }
            None => {
                self.index.insert(key, self.keys.len() as u32);
                self.keys.push(key);
                self.weights.push(1);
                true
            }
        }
    }

    fn sampler(&self) -> Option<&FenwickSampler<u64>> {
        match &self.weights {
            Weights::Sampled(s) => Some(s),
            Weights::Plain(_) => None,
        }
    }
}

/// How one interaction changed the registry.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct InteractOutcome {
    /// New cliques per size, indexed by `M`.
    pub created: [u32; MAX_N + 1],
}

/// Which vertex set interacts in a step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interaction {
    pub birth: bool,
    /// Sorted ids, including the new vertex on a birth step.
    pub vertices: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct CliqueRegistry {
    params: GraphParams,
    sizes: Vec<Option<SizeRegistry>>,
    vertex_count: u32,
    step: u64,
    rng: SimRng,
}

/// Seeds the registry with one `N`-clique of weight 1 and all its subcliques.
pub fn init_graph(params: GraphParams) -> Result<CliqueRegistry> {
    params.validate()?;
    let n = params.n;
    let mut sizes: Vec<Option<SizeRegistry>> = (0..=n).map(|_| None).collect();
    for m in params.maintained_sizes() {
        sizes[m] = Some(SizeRegistry::new(m >= n - 1));
    }
    let mut reg = CliqueRegistry {
        rng: rng_from_seed(params.seed),
        params,
        sizes,
        vertex_count: n as u32,
        step: 0,
    };
    let seed: Vec<u32> = (0..n as u32).collect();
    reg.interact(&seed)?;
    Ok(reg)
}

impl CliqueRegistry {
    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn vertex_count(&self) -> u32 {
        self.vertex_count
    }

    /// Number of interactions performed since initialisation.
    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = rng_from_seed(seed);
    }

    pub fn is_maintained(&self, m: usize) -> bool {
        self.sizes.get(m).is_some_and(|s| s.is_some())
    }

    fn size(&self, m: usize) -> Result<&SizeRegistry> {
        self.sizes
            .get(m)
            .and_then(|s| s.as_ref())
            .ok_or_else(|| Error::Usage(format!("clique size {m} is not maintained")))
    }

    /// Number of `M`-cliques, `E_n(M)`.
    pub fn clique_count(&self, m: usize) -> Result<usize> {
        Ok(self.size(m)?.keys.len())
    }

    pub fn weight(&self, vertices: &[u32]) -> Result<u64> {
        let reg = self.size(vertices.len())?;
        Ok(reg
            .index
            .get(&CliqueKey::new(vertices))
            .map_or(0, |&i| reg.weights.get(i as usize)))
    }

    /// Incrementally maintained Σ of `M`-clique weights.
    pub fn total_weight(&self, m: usize) -> Result<u64> {
        Ok(self.size(m)?.total_weight)
    }

    /// Total read back from the sampler, or recomputed for unsampled sizes.
    pub fn sampler_total(&self, m: usize) -> Result<u64> {
        let reg = self.size(m)?;
        Ok(match reg.sampler() {
            Some(s) => s.total(),
            None => reg.weights.as_slice().iter().sum(),
        })
    }

    pub fn recompute_total(&self, m: usize) -> Result<u64> {
        Ok(self.size(m)?.weights.as_slice().iter().sum())
    }

    pub fn cliques(&self, m: usize) -> Result<impl Iterator<Item = (&[u32], u64)> + '_> {
        let reg = self.size(m)?;
        Ok(reg.keys.iter().zip(reg.weights.as_slice()).map(|(k, &w)| (k.vertices(), w)))
    }

    /// Weight histogram `X_M(n, ·)` at the current step.
    pub fn histogram(&self, m: usize) -> Result<Histogram> {
        let reg = self.size(m)?;
        Ok(Histogram::from_values(self.step, reg.weights.as_slice().iter().copied()))
    }

    /// Applies an interaction among `vertices`: every maintained subclique
    /// gains one unit of weight or is created at weight 1.
    pub fn interact(&mut self, vertices: &[u32]) -> Result<InteractOutcome> {
        let n = self.params.n;
        if vertices.len() != n {
            return Err(Error::Consistency(format!(
                "interaction needs {n} vertices, got {}",
                vertices.len()
            )));
        }
        let mut sorted = [0u32; MAX_N];
        sorted[..n].copy_from_slice(vertices);
        let sorted = &mut sorted[..n];
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Consistency(format!("duplicate vertices in {vertices:?}")));
        }
        if sorted[n - 1] >= self.vertex_count {
            return Err(Error::Consistency(format!(
                "vertex {} does not exist (V = {})",
                sorted[n - 1],
                self.vertex_count
            )));
        }
        let mut outcome = InteractOutcome::default();
        let mut subset = [0u32; MAX_N];
        for mask in 1u32..(1 << n) {
            let m = mask.count_ones() as usize;
            let Some(reg) = self.sizes[m].as_mut() else {
                continue;
            };
            let mut len = 0;
            for (bit, &v) in sorted.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    subset[len] = v;
                    len += 1;
                }
            }
            if reg.bump(CliqueKey::from_sorted(&subset[..len])) {
                outcome.created[m] += 1;
            }
        }
        Ok(outcome)
    }

    fn uniform_distinct(&mut self, k: usize, out: &mut Vec<u32>) {
        let v = self.vertex_count;
        assert!(v as usize >= k, "cannot draw {k} distinct vertices from {v}");
        out.clear();
        while out.len() < k {
            let x = self.rng.gen_range(0..v);
            if !out.contains(&x) {
                out.push(x);
            }
        }
    }

    fn weighted_clique(&mut self, m: usize) -> Vec<u32> {
        let reg = self.sizes[m].as_ref().expect("sampled sizes are always maintained");
        let sampler = reg.sampler().expect("sizes N-1 and N carry samplers");
        let i = sampler.sample(&mut self.rng).expect("registry is never empty");
        reg.keys[i].vertices().to_vec()
    }

    /// Draws the vertex set of the next interaction without applying it.
    pub fn choose_interaction(&mut self) -> Interaction {
        let n = self.params.n;
        let (p, r, q) = (self.params.p, self.params.r, self.params.q);
        let mut vertices = Vec::with_capacity(n);
        if self.rng.gen_bool(p) {
            if self.rng.gen_bool(r) {
                vertices = self.weighted_clique(n - 1);
            } else {
                self.uniform_distinct(n - 1, &mut vertices);
            }
            vertices.push(self.vertex_count);
            vertices.sort_unstable();
            Interaction { birth: true, vertices }
        } else {
            if self.rng.gen_bool(q) {
                vertices = self.weighted_clique(n);
            } else {
                self.uniform_distinct(n, &mut vertices);
            }
            vertices.sort_unstable();
            Interaction { birth: false, vertices }
        }
    }

    /// One step of the evolution.
    pub fn step_graph(&mut self) -> Result<(Interaction, InteractOutcome)> {
        let chosen = self.choose_interaction();
        if chosen.birth {
            self.vertex_count += 1;
        }
        let outcome = self.interact(&chosen.vertices)?;
        self.step += 1;
        Ok((chosen, outcome))
    }
}

/// Per-size statistics of newly created cliques.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NewcomerStats {
    pub steps: u64,
    pub sum: u64,
    pub sum_sq: u64,
}

impl NewcomerStats {
    fn record(&mut self, created: u32) {
        self.steps += 1;
        self.sum += created as u64;
        self.sum_sq += (created as u64) * (created as u64);
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.steps as f64
    }

    /// Standard error of the mean, treating steps as independent.
    pub fn stderr(&self) -> f64 {
        let n = self.steps as f64;
        let mean = self.mean();
        let var = (self.sum_sq as f64 / n - mean * mean) * n / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct GraphRun {
    /// Weight histograms at `n_max` for each tracked size.
    pub histograms: BTreeMap<usize, Histogram>,
    /// `(n, V_n)` at each snapshot.
    pub v_trace: Vec<(u64, u32)>,
    pub newcomers: BTreeMap<usize, NewcomerStats>,
    /// Steps where a structural invariant failed (weight growth, new-clique bounds).
    pub invariant_violations: u64,
    /// Event stream lines, when requested.
    pub events: Option<Vec<String>>,
    pub registry: CliqueRegistry,
}

impl GraphRun {
    /// `M,w,count,n` rows for all tracked sizes.
    pub fn histograms_csv(&self) -> String {
        let mut out = String::from(crate::histogram::CLIQUE_CSV_HEADER);
        for (&m, h) in &self.histograms {
            h.to_clique_csv_rows(m, &mut out);
        }
        out
    }

    /// `n,V` rows.
    pub fn v_trace_csv(&self) -> String {
        let mut out = String::from("n,V\n");
        for (n, v) in &self.v_trace {
            writeln!(out, "{n},{v}").unwrap();
        }
        out
    }
}

pub fn run_graph(params: GraphParams) -> Result<GraphRun> {
    run_graph_with(params, false)
}

/// Runs `n_max` steps, optionally recording `step,kind,vertices...` events.
pub fn run_graph_with(params: GraphParams, record_events: bool) -> Result<GraphRun> {
    params.validate()?;
    let budget = params.memory_budget_bytes.unwrap_or(DEFAULT_MEMORY_BUDGET);
    let need = params.estimated_memory();
    if need > budget {
        return Err(Error::Resource(format!(
            "registry may need up to {need} bytes (budget {budget}); \
             lower n_max, drop entries from tracked_m, or raise memory_budget_bytes"
        )));
    }
    let mut snapshots = params.snapshots.clone();
    snapshots.push(params.n_max);
    snapshots.sort_unstable();
    snapshots.dedup();
    if let Some(&bad) = snapshots.iter().find(|&&s| s > params.n_max) {
        return Err(Error::Usage(format!("snapshot {bad} beyond n_max {}", params.n_max)));
    }

    let n = params.n;
    let sizes = params.maintained_sizes();
    let mut reg = init_graph(params.clone())?;
    let mut newcomers: BTreeMap<usize, NewcomerStats> =
        sizes.iter().map(|&m| (m, NewcomerStats::default())).collect();
    let mut events = record_events.then(Vec::new);
    let mut v_trace = Vec::with_capacity(snapshots.len());
    let mut next_snap = 0;
    while next_snap < snapshots.len() && snapshots[next_snap] == 0 {
        v_trace.push((0, reg.vertex_count()));
        next_snap += 1;
    }
    let mut totals: Vec<u64> = sizes.iter().map(|&m| reg.total_weight(m).unwrap()).collect();
    let mut violations = 0;

    for step in 1..=params.n_max {
        let (chosen, outcome) = reg.step_graph()?;
        if outcome.created[n] > 1 {
            violations += 1;
        }
        for (k, &m) in sizes.iter().enumerate() {
            let per_step = binomial(n as u64, m as u64);
            let total = reg.total_weight(m)?;
            if total != totals[k] + per_step || outcome.created[m] as u64 > per_step {
                violations += 1;
            }
            totals[k] = total;
            newcomers.get_mut(&m).unwrap().record(outcome.created[m]);
        }
        if let Some(ev) = events.as_mut() {
            let mut line = format!("{step},{}", if chosen.birth { "birth" } else { "internal" });
            for v in &chosen.vertices {
                write!(line, ",{v}").unwrap();
            }
            ev.push(line);
        }
        while next_snap < snapshots.len() && snapshots[next_snap] == step {
            v_trace.push((step, reg.vertex_count()));
            next_snap += 1;
        }
    }

    let mut histograms = BTreeMap::new();
    for &m in &params.tracked_m {
        histograms.insert(m, reg.histogram(m)?);
    }
    Ok(GraphRun {
        histograms,
        v_trace,
        newcomers,
        invariant_violations: violations,
        events,
        registry: reg,
    })
}

/// Result of resampling the next interaction from a frozen state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub clique: Vec<u32>,
    pub weight: u64,
    pub step: u64,
    pub samples: u64,
    pub hits: u64,
    /// Estimated `P(W_{n+1} = w + 1 | W_n = w)`.
    pub rate: f64,
    pub rate_stderr: f64,
    /// `rate / (w/n)`, the estimate of `a_M`.
    pub coefficient: f64,
    pub coefficient_stderr: f64,
}

/// Estimates the one-step increment probability of an `M`-clique of weight
/// `w` by drawing the next interaction `samples` times from the same state.
///
/// The first registered clique with exactly that weight is probed.
pub fn weight_transition_probe(
    registry: &CliqueRegistry,
    m: usize,
    w: u64,
    samples: u64,
    seed: u64,
) -> Result<ProbeResult> {
    if !registry.is_maintained(m) {
        return Err(Error::Probe(format!("clique size {m} is not maintained")));
    }
    if samples == 0 {
        return Err(Error::Probe("at least one sample is required".into()));
    }
    let target: Vec<u32> = registry
        .cliques(m)?
        .find(|&(_, weight)| weight == w)
        .map(|(v, _)| v.to_vec())
        .ok_or_else(|| Error::Probe(format!("no {m}-clique of weight {w}")))?;
    let mut frozen = registry.clone();
    frozen.reseed(seed);
    let mut hits = 0u64;
    for _ in 0..samples {
        let chosen = frozen.choose_interaction();
        if target.iter().all(|v| chosen.vertices.binary_search(v).is_ok()) {
            hits += 1;
        }
    }
    let rate = hits as f64 / samples as f64;
    let rate_stderr = (rate * (1.0 - rate) / samples as f64).sqrt();
    let n = registry.step_index().max(1) as f64;
    let scale = w as f64 / n;
    Ok(ProbeResult {
        clique: target,
        weight: w,
        step: registry.step_index(),
        samples,
        hits,
        rate,
        rate_stderr,
        coefficient: rate / scale,
        coefficient_stderr: rate_stderr / scale,
    })
}
