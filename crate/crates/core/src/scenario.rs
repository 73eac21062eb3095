//! Load-uncertainty sampling, labeled dataset generation and active-set
//! discovery.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::seq::SliceRandom;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::active_set::ActiveSet;
use crate::dcopf::{solve_dcopf, DcopfError, SolveStatus};
use crate::linalg::Matrix;
use crate::network::Network;
use crate::polytope::Polytope;
use crate::rng::{indexed_stream, seeded, substream_seed, Substream};

pub const GENERATOR_VERSION: &str = concat!("opf-activeset-core/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("sigma fraction must be nonnegative, got {0}")]
    NegativeSigmaFrac(f64),
    #[error("at least one sample is required")]
    NoSamples,
    #[error("every sampled realization was infeasible")]
    AllSamplesInfeasible,
    #[error("unbounded DC-OPF at sample {0}")]
    Unbounded(u64),
    #[error("train fraction {0} leaves one side of the split empty")]
    EmptySplit(f64),
    #[error("label {label} out of range for a dictionary of {size} sets")]
    LabelOutOfRange { label: usize, size: usize },
    #[error("dictionary counts do not match sets")]
    MalformedDictionary,
    #[error(transparent)]
    Solve(#[from] DcopfError),
}

/// Draws a nodal uncertainty vector. The normal model below is the only
/// implementation shipped; other distributions plug in here.
pub trait OmegaSampler {
    fn dim(&self) -> usize;
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64>;
}

/// Independent zero-mean normals at load buses, `σ_i = sigma_frac · d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyModel {
    pub sigma: Vec<f64>,
    pub sigma_frac: f64,
}

pub fn build_distribution(net: &Network, sigma_frac: f64) -> Result<UncertaintyModel, ScenarioError> {
    if !(sigma_frac >= 0.0) {
        return Err(ScenarioError::NegativeSigmaFrac(sigma_frac));
    }
    let sigma = net
        .buses
        .iter()
        .map(|b| if b.is_load { sigma_frac * b.demand } else { 0.0 })
        .collect();
    Ok(UncertaintyModel { sigma, sigma_frac })
}

impl UncertaintyModel {
    pub fn sample_omega<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sigma
            .iter()
            .map(|&s| {
                if s > 0.0 {
                    let z: f64 = StandardNormal.sample(rng);
                    s * z
                } else {
                    0.0
                }
            })
            .collect()
    }
}

impl OmegaSampler for UncertaintyModel {
    fn dim(&self) -> usize {
        self.sigma.len()
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.sample_omega(rng)
    }
}

/// Canonical active sets bound to class labels in first-discovery order.
#[derive(Debug, Clone, Default)]
pub struct ActiveSetDictionary {
    sets: Vec<ActiveSet>,
    counts: Vec<usize>,
    index: BTreeMap<ActiveSet, usize>,
}

impl PartialEq for ActiveSetDictionary {
    fn eq(&self, other: &Self) -> bool {
        self.sets == other.sets && self.counts == other.counts
    }
}

impl ActiveSetDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(sets: Vec<ActiveSet>, counts: Vec<usize>) -> Result<Self, ScenarioError> {
        if sets.len() != counts.len() {
            return Err(ScenarioError::MalformedDictionary);
        }
        let mut index = BTreeMap::new();
        for (i, s) in sets.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(ScenarioError::MalformedDictionary);
            }
        }
        Ok(Self { sets, counts, index })
    }

    /// Records one observation, returning the set's label.
    pub fn observe(&mut self, set: &ActiveSet) -> usize {
        let label = self.insert(set);
        self.counts[label] += 1;
        label
    }

    /// Adds the set without counting it.
    pub fn insert(&mut self, set: &ActiveSet) -> usize {
        if let Some(&i) = self.index.get(set) {
            return i;
        }
        let i = self.sets.len();
        self.sets.push(set.clone());
        self.counts.push(0);
        self.index.insert(set.clone(), i);
        i
    }

    pub fn lookup(&self, set: &ActiveSet) -> Option<usize> {
        self.index.get(set).copied()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[ActiveSet] {
        &self.sets
    }

    pub fn get(&self, label: usize) -> Option<&ActiveSet> {
        self.sets.get(label)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total_samples(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Number of sets observed exactly once.
    pub fn singletons(&self) -> usize {
        self.counts.iter().filter(|&&c| c == 1).count()
    }

    /// SHA-256 over the ordered set list (counts excluded), hex encoded.
    /// A classifier trained against one dictionary refuses another.
    pub fn binding(&self) -> String {
        let mut hasher = Sha256::new();
        for set in &self.sets {
            for r in set.rows() {
                hasher.update((*r as u64).to_le_bytes());
            }
            hasher.update(u64::MAX.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in digest.iter() {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    /// Nodal uncertainty, p.u., zero off the load buses.
    pub omega: Vec<f64>,
    pub label: usize,
    pub p_star: Vec<f64>,
    pub cost: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub case_name: String,
    pub sigma_frac: f64,
    pub seed: u64,
    pub generator_version: String,
    pub n_bus: usize,
    pub load_buses: Vec<usize>,
    /// Draws attempted, including infeasible ones.
    pub n_drawn: usize,
    pub n_infeasible: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub dictionary: ActiveSetDictionary,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Load-bus entries of each ω, one row per sample.
    pub fn features(&self) -> Matrix {
        let cols = self.meta.load_buses.len();
        let mut m = Matrix::zeros(self.samples.len(), cols);
        for (i, s) in self.samples.iter().enumerate() {
            let row = m.row_mut(i);
            for (k, &b) in self.meta.load_buses.iter().enumerate() {
                row[k] = s.omega[b];
            }
        }
        m
    }

    /// The first `n` samples, sharing the dictionary.
    pub fn truncated(&self, n: usize) -> Dataset {
        Dataset {
            samples: self.samples[..n.min(self.samples.len())].to_vec(),
            dictionary: self.dictionary.clone(),
            meta: self.meta.clone(),
        }
    }

    pub fn check_labels(&self) -> Result<(), ScenarioError> {
        let size = self.dictionary.len();
        match self.samples.iter().find(|s| s.label >= size) {
            Some(s) => Err(ScenarioError::LabelOutOfRange { label: s.label, size }),
            None => Ok(()),
        }
    }

    /// True active set of a sample.
    pub fn active_set(&self, i: usize) -> &ActiveSet {
        &self.dictionary.sets[self.samples[i].label]
    }
}

/// Result of solving one sampled realization.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleOutcome {
    Solved {
        omega: Vec<f64>,
        p_star: Vec<f64>,
        cost: f64,
        active_set: ActiveSet,
    },
    Infeasible,
}

/// Draws sample `index` of the generation stream and solves it. Pure in
/// `(poly, sampler, seed, index)`, so samples may be evaluated in any order.
pub fn solve_sample<S: OmegaSampler + ?Sized>(
    poly: &Polytope,
    sampler: &S,
    seed: u64,
    index: u64,
) -> Result<SampleOutcome, ScenarioError> {
    let mut rng = indexed_stream(substream_seed(seed, Substream::Generate), index);
    let omega = sampler.draw(&mut rng);
    let opt = solve_dcopf(poly, &omega)?;
    match opt.status {
        SolveStatus::Optimal => Ok(SampleOutcome::Solved {
            omega,
            p_star: opt.p_star,
            cost: opt.cost,
            active_set: opt.active_set.expect("optimal point carries an active set"),
        }),
        SolveStatus::Infeasible => Ok(SampleOutcome::Infeasible),
        SolveStatus::Unbounded => Err(ScenarioError::Unbounded(index)),
    }
}

/// Folds outcomes, in sample-index order, into a dataset.
pub fn assemble_dataset(
    outcomes: impl IntoIterator<Item = SampleOutcome>,
    mut meta: DatasetMeta,
) -> Result<Dataset, ScenarioError> {
    let mut dictionary = ActiveSetDictionary::new();
    let mut samples = Vec::new();
    let mut drawn = 0;
    let mut infeasible = 0;
    for outcome in outcomes {
        drawn += 1;
        match outcome {
            SampleOutcome::Solved {
                omega,
                p_star,
                cost,
                active_set,
            } => {
                let label = dictionary.observe(&active_set);
                samples.push(LabeledSample {
                    omega,
                    label,
                    p_star,
                    cost,
                    feasible: true,
                });
            }
            SampleOutcome::Infeasible => infeasible += 1,
        }
    }
    if drawn == 0 {
        return Err(ScenarioError::NoSamples);
    }
    if samples.is_empty() {
        return Err(ScenarioError::AllSamplesInfeasible);
    }
    meta.n_drawn = drawn;
    meta.n_infeasible = infeasible;
    Ok(Dataset {
        samples,
        dictionary,
        meta,
    })
}

pub fn dataset_meta(net: &Network, model: &UncertaintyModel, seed: u64) -> DatasetMeta {
    DatasetMeta {
        case_name: net.name.clone(),
        sigma_frac: model.sigma_frac,
        seed,
        generator_version: String::from(GENERATOR_VERSION),
        n_bus: net.n_bus(),
        load_buses: net.load_buses(),
        n_drawn: 0,
        n_infeasible: 0,
    }
}

/// Solves `n_samples` sampled realizations sequentially.
pub fn generate_dataset(
    net: &Network,
    poly: &Polytope,
    model: &UncertaintyModel,
    n_samples: usize,
    seed: u64,
) -> Result<Dataset, ScenarioError> {
    if n_samples == 0 {
        return Err(ScenarioError::NoSamples);
    }
    let outcomes = (0..n_samples as u64)
        .map(|i| solve_sample(poly, model, seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    assemble_dataset(outcomes, dataset_meta(net, model, seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryResult {
    pub dictionary: ActiveSetDictionary,
    /// `(samples drawn, dictionary size)` at each discovery and at the end.
    pub curve: Vec<(usize, usize)>,
    pub samples_drawn: usize,
    pub infeasible: usize,
    /// Good-Turing estimate of unseen probability mass: singletons / N.
    pub unseen_mass: f64,
}

/// Windowed no-new-discovery stopping rule over a stream of draws.
#[derive(Debug, Clone, Default)]
pub struct DiscoveryTracker {
    window: usize,
    dictionary: ActiveSetDictionary,
    curve: Vec<(usize, usize)>,
    since_new: usize,
    drawn: usize,
    infeasible: usize,
}

impl DiscoveryTracker {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            ..Self::default()
        }
    }

    /// Records one draw (`None` for an infeasible one). Returns `true` once
    /// `window` consecutive draws have added nothing new.
    pub fn observe(&mut self, set: Option<&ActiveSet>) -> bool {
        self.drawn += 1;
        match set {
            Some(set) => {
                let before = self.dictionary.len();
                self.dictionary.observe(set);
                if self.dictionary.len() > before {
                    self.curve.push((self.drawn, self.dictionary.len()));
                    self.since_new = 0;
                } else {
                    self.since_new += 1;
                }
            }
            None => {
                self.infeasible += 1;
                self.since_new += 1;
            }
        }
        self.since_new >= self.window
    }

    pub fn drawn(&self) -> usize {
        self.drawn
    }

    pub fn finish(mut self) -> DiscoveryResult {
        if self.curve.last().map_or(self.drawn > 0, |&(i, _)| i != self.drawn) {
            self.curve.push((self.drawn, self.dictionary.len()));
        }
        let n = self.dictionary.total_samples();
        let unseen_mass = if n == 0 {
            1.0
        } else {
            self.dictionary.singletons() as f64 / n as f64
        };
        DiscoveryResult {
            dictionary: self.dictionary,
            curve: self.curve,
            samples_drawn: self.drawn,
            infeasible: self.infeasible,
            unseen_mass,
        }
    }
}

/// Samples until `window` consecutive draws add no new active set, or until
/// `max_samples` draws. Uses the same sample stream as [`generate_dataset`].
pub fn discovery_run<S: OmegaSampler + ?Sized>(
    poly: &Polytope,
    sampler: &S,
    seed: u64,
    window: usize,
    max_samples: usize,
) -> Result<DiscoveryResult, ScenarioError> {
    let mut tracker = DiscoveryTracker::new(window);
    while tracker.drawn() < max_samples {
        let outcome = solve_sample(poly, sampler, seed, tracker.drawn() as u64)?;
        let set = match &outcome {
            SampleOutcome::Solved { active_set, .. } => Some(active_set),
            SampleOutcome::Infeasible => None,
        };
        if tracker.observe(set) {
            break;
        }
    }
    Ok(tracker.finish())
}

/// Seeded shuffle split into disjoint train and test halves. Each half keeps
/// its samples in original order and shares the full dictionary.
pub fn split_dataset(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), ScenarioError> {
    let n = ds.len();
    let n_train = libm::round(train_fraction * n as f64);
    if !(train_fraction > 0.0 && train_fraction < 1.0) || n_train < 1.0 || n_train >= n as f64 {
        return Err(ScenarioError::EmptySplit(train_fraction));
    }
    let n_train = n_train as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(substream_seed(seed, Substream::Split)));
    let mut train_idx = idx[..n_train].to_vec();
    let mut test_idx = idx[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |ids: &[usize]| Dataset {
        samples: ids.iter().map(|&i| ds.samples[i].clone()).collect(),
        dictionary: ds.dictionary.clone(),
        meta: ds.meta.clone(),
    };
    Ok((pick(&train_idx), pick(&test_idx)))
}

/// Occurrences of each label in `0..k`; labels outside the range are ignored.
pub fn label_histogram(labels: impl IntoIterator<Item = usize>, k: usize) -> Vec<usize> {
    let mut h = vec![0; k];
    for l in labels {
        if l < k {
            h[l] += 1;
        }
    }
    h
}
