//! Active-set policies and the metrics used to judge them.
//!
//! The ensemble policy recovers a vertex for every candidate active set,
//! keeps the feasible ones and returns the cheapest. The classifier policy
//! runs the same procedure over the `K` classes the network ranks highest.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::active_set::{check_feasible, recover_solution, ActiveSet, TOL_FEASIBLE};
use crate::linalg::dot;
use crate::nn::{fit, rank_classes, MlpModel, NnError, TrainConfig};
use crate::polytope::{Polytope, RowKind};
use crate::scenario::{ActiveSetDictionary, Dataset};

/// Relative tolerance when comparing a policy cost to the LP optimum.
pub const COST_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyOutcome {
    /// Feasible and within [`COST_RTOL`] of the reference optimum.
    Optimal,
    /// Feasible but more expensive than the reference optimum.
    FeasibleSuboptimal,
    /// Feasible, not yet compared against a reference cost.
    Feasible,
    NoFeasibleCandidate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyResult {
    /// Empty when no candidate is feasible.
    pub p_hat: Vec<f64>,
    pub cost: f64,
    /// Index of the winning candidate (a class label for the classifier policy).
    pub chosen_set: Option<usize>,
    pub feasible: bool,
    pub candidates_evaluated: usize,
    pub outcome: PolicyOutcome,
}

impl PolicyResult {
    fn none(evaluated: usize) -> Self {
        Self {
            p_hat: Vec::new(),
            cost: f64::NAN,
            chosen_set: None,
            feasible: false,
            candidates_evaluated: evaluated,
            outcome: PolicyOutcome::NoFeasibleCandidate,
        }
    }

    /// Classifies a feasible result against the LP optimum `reference_cost`.
    pub fn grade(mut self, reference_cost: f64) -> Self {
        if self.feasible {
            let gap = relative_gap(self.cost, reference_cost);
            self.outcome = if gap <= COST_RTOL {
                PolicyOutcome::Optimal
            } else {
                PolicyOutcome::FeasibleSuboptimal
            };
        }
        self
    }
}

pub fn relative_gap(cost: f64, reference: f64) -> f64 {
    let scale = if reference != 0.0 { reference.abs() } else { 1.0 };
    (cost - reference) / scale
}

/// Cheapest feasible vertex among `candidates`; earlier candidates win ties.
pub fn ensemble_policy(poly: &Polytope, candidates: &[ActiveSet], omega: &[f64]) -> PolicyResult {
    ensemble_over(poly, candidates.iter().enumerate(), omega, TOL_FEASIBLE)
}

/// [`ensemble_policy`] with an explicit feasibility tolerance.
pub fn ensemble_policy_tol(
    poly: &Polytope,
    candidates: &[ActiveSet],
    omega: &[f64],
    tol: f64,
) -> PolicyResult {
    ensemble_over(poly, candidates.iter().enumerate(), omega, tol)
}

fn ensemble_over<'a>(
    poly: &Polytope,
    candidates: impl Iterator<Item = (usize, &'a ActiveSet)>,
    omega: &[f64],
    tol: f64,
) -> PolicyResult {
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    let mut evaluated = 0;
    for (id, set) in candidates {
        evaluated += 1;
        let Ok(p) = recover_solution(set, poly, omega) else {
            continue;
        };
        if !check_feasible(&p, poly, omega, tol).feasible {
            continue;
        }
        let cost = dot(&p, &poly.cost);
        let better = match &best {
            None => true,
            Some((_, _, c)) => cost < c - 1e-12 * c.abs().max(1.0),
        };
        if better {
            best = Some((id, p, cost));
        }
    }
    match best {
        None => PolicyResult::none(evaluated),
        Some((id, p_hat, cost)) => PolicyResult {
            p_hat,
            cost,
            chosen_set: Some(id),
            feasible: true,
            candidates_evaluated: evaluated,
            outcome: PolicyOutcome::Feasible,
        },
    }
}

/// A trained model paired with the dictionary its labels index.
pub struct ClassifierPolicy<'a> {
    model: &'a MlpModel,
    dictionary: &'a ActiveSetDictionary,
    tol: f64,
}

impl<'a> ClassifierPolicy<'a> {
    pub fn new(model: &'a MlpModel, dictionary: &'a ActiveSetDictionary) -> Result<Self, NnError> {
        if model.label_binding != dictionary.binding() || model.classes < dictionary.len() {
            return Err(NnError::BindingMismatch);
        }
        Ok(Self {
            model,
            dictionary,
            tol: TOL_FEASIBLE,
        })
    }

    /// Feasibility tolerance for recovered dispatches (default 1e-6 p.u.).
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn model(&self) -> &MlpModel {
        self.model
    }

    pub fn dictionary(&self) -> &ActiveSetDictionary {
        self.dictionary
    }

    /// Ensemble over the classes ranked `0..k` for `omega`.
    pub fn evaluate(&self, poly: &Polytope, omega: &[f64], k: usize) -> Result<PolicyResult, NnError> {
        let ranked = crate::nn::predict_topk(self.model, omega, k)?;
        Ok(self.evaluate_ranked(poly, omega, &ranked.classes))
    }

    /// Ensemble over precomputed ranked classes. Classes without a
    /// dictionary entry are skipped.
    pub fn evaluate_ranked(&self, poly: &Polytope, omega: &[f64], ranked: &[usize]) -> PolicyResult {
        let sets = ranked
            .iter()
            .filter_map(|&c| self.dictionary.get(c).map(|s| (c, s)));
        ensemble_over(poly, sets, omega, self.tol)
    }
}

pub fn classifier_policy(
    model: &MlpModel,
    dictionary: &ActiveSetDictionary,
    poly: &Polytope,
    omega: &[f64],
    k: usize,
) -> Result<PolicyResult, NnError> {
    ClassifierPolicy::new(model, dictionary)?.evaluate(poly, omega, k)
}

/// Each test sample's label re-expressed in the model dictionary;
/// `None` when the true set is absent from it.
pub fn map_labels(test: &Dataset, model_dict: &ActiveSetDictionary) -> Vec<Option<usize>> {
    if test.dictionary.binding() == model_dict.binding() {
        return test.samples.iter().map(|s| Some(s.label)).collect();
    }
    test.samples
        .iter()
        .map(|s| test.dictionary.get(s.label).and_then(|set| model_dict.lookup(set)))
        .collect()
}

/// Ranked classes (up to `k_max`) for every test sample, most probable first.
pub fn ranked_predictions(model: &MlpModel, test: &Dataset, k_max: usize) -> Result<Vec<Vec<usize>>, NnError> {
    if test.is_empty() {
        return Ok(Vec::new());
    }
    let mut raw = crate::linalg::Matrix::zeros(test.len(), model.input_dim);
    for (i, s) in test.samples.iter().enumerate() {
        raw.row_mut(i).copy_from_slice(&model.features_of(&s.omega)?);
    }
    let probs = model.predict_proba(&raw)?;
    let k = k_max.clamp(1, model.classes);
    (0..test.len()).map(|i| rank_classes(probs.row(i), k)).collect()
}

/// `η_K` for each `K`: the fraction of samples whose true label is among
/// the first `K` ranked classes. `K` beyond the class count covers all classes.
pub fn accuracy_from_ranked(
    ranked: &[Vec<usize>],
    truth: &[Option<usize>],
    k_list: &[usize],
) -> Vec<(usize, f64)> {
    let n = truth.len().max(1) as f64;
    k_list
        .iter()
        .map(|&k| {
            let hits = ranked
                .iter()
                .zip(truth)
                .filter(|(r, t)| t.is_some_and(|t| r.iter().take(k).any(|&c| c == t)))
                .count();
            (k, hits as f64 / n)
        })
        .collect()
}

pub fn topk_accuracy(
    model: &MlpModel,
    model_dict: &ActiveSetDictionary,
    test: &Dataset,
    k_list: &[usize],
) -> Result<Vec<(usize, f64)>, NnError> {
    ClassifierPolicy::new(model, model_dict)?;
    let k_max = k_list.iter().copied().max().unwrap_or(1);
    let ranked = ranked_predictions(model, test, k_max)?;
    Ok(accuracy_from_ranked(&ranked, &map_labels(test, model_dict), k_list))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub mean_gap: f64,
    pub max_gap: f64,
    pub n_feasible: usize,
    pub n_no_candidate: usize,
    pub infeasible_fraction: f64,
}

/// Relative gaps of feasible policy results against the true costs.
pub fn optimality_gap(results: &[PolicyResult], true_costs: &[f64]) -> GapSummary {
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut n_feasible = 0;
    for (r, &c) in results.iter().zip(true_costs) {
        if r.feasible {
            let g = relative_gap(r.cost, c);
            sum += g;
            max = max.max(g);
            n_feasible += 1;
        }
    }
    let n = results.len().min(true_costs.len());
    GapSummary {
        mean_gap: if n_feasible > 0 { sum / n_feasible as f64 } else { 0.0 },
        max_gap: max,
        n_feasible,
        n_no_candidate: n - n_feasible,
        infeasible_fraction: if n > 0 { (n - n_feasible) as f64 / n as f64 } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub k: usize,
    pub accuracy: f64,
    pub feasibility_rate: f64,
    pub gap: GapSummary,
    pub optimal: usize,
    pub suboptimal: usize,
    pub mean_candidates: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_test: usize,
    pub classes: usize,
    pub per_k: Vec<PolicyStats>,
    /// `confusion[true][predicted]` for top-1 over model classes.
    pub confusion: Vec<Vec<usize>>,
    /// Test samples whose true set is missing from the model dictionary.
    pub unseen: usize,
}

/// Accuracy, feasibility and optimality gap of the classifier policy for
/// every `K` in `k_list`.
pub fn evaluate(
    policy: &ClassifierPolicy<'_>,
    poly: &Polytope,
    test: &Dataset,
    k_list: &[usize],
) -> Result<EvalReport, NnError> {
    let model = policy.model();
    let k_max = k_list.iter().copied().max().unwrap_or(1);
    let ranked = ranked_predictions(model, test, k_max)?;
    let truth = map_labels(test, policy.dictionary());
    let accuracy = accuracy_from_ranked(&ranked, &truth, k_list);
    let costs: Vec<f64> = test.samples.iter().map(|s| s.cost).collect();

    let mut per_k = Vec::with_capacity(k_list.len());
    for (&k, &(_, eta)) in k_list.iter().zip(&accuracy) {
        let results: Vec<PolicyResult> = test
            .samples
            .iter()
            .zip(&ranked)
            .map(|(s, r)| {
                let top = &r[..k.min(r.len())];
                policy.evaluate_ranked(poly, &s.omega, top).grade(s.cost)
            })
            .collect();
        let n = results.len().max(1) as f64;
        let gap = optimality_gap(&results, &costs);
        per_k.push(PolicyStats {
            k,
            accuracy: eta,
            feasibility_rate: gap.n_feasible as f64 / n,
            gap,
            optimal: results.iter().filter(|r| r.outcome == PolicyOutcome::Optimal).count(),
            suboptimal: results
                .iter()
                .filter(|r| r.outcome == PolicyOutcome::FeasibleSuboptimal)
                .count(),
            mean_candidates: results.iter().map(|r| r.candidates_evaluated).sum::<usize>() as f64 / n,
        });
    }

    let mut confusion = vec![vec![0usize; model.classes]; model.classes];
    let mut unseen = 0;
    for (r, t) in ranked.iter().zip(&truth) {
        match t {
            Some(t) => confusion[*t][r[0]] += 1,
            None => unseen += 1,
        }
    }
    Ok(EvalReport {
        n_test: test.len(),
        classes: model.classes,
        per_k,
        confusion,
        unseen,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowStatus {
    pub row: usize,
    pub kind: RowKind,
    pub active: usize,
    pub inactive: usize,
}

impl RowStatus {
    pub fn is_fixed(&self) -> bool {
        self.active == 0 || self.inactive == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedStatusReport {
    pub n_samples: usize,
    pub rows: Vec<RowStatus>,
    pub generator_rows: usize,
    pub generator_fixed: usize,
    pub flow_rows: usize,
    pub flow_fixed: usize,
}

impl FixedStatusReport {
    pub fn generator_fixed_pct(&self) -> f64 {
        pct(self.generator_fixed, self.generator_rows)
    }

    pub fn flow_fixed_pct(&self) -> f64 {
        pct(self.flow_fixed, self.flow_rows)
    }
}

fn pct(a: usize, b: usize) -> f64 {
    if b == 0 {
        100.0
    } else {
        100.0 * a as f64 / b as f64
    }
}

/// Binding tallies of every polytope row across the samples of `ds`.
/// A row is fixed when it is binding in all samples or in none.
pub fn fixed_status_report(ds: &Dataset, poly: &Polytope) -> FixedStatusReport {
    let n = ds.len();
    let mut active = vec![0usize; poly.n_rows()];
    for s in &ds.samples {
        if let Some(set) = ds.dictionary.get(s.label) {
            for &r in set.rows() {
                if r < active.len() {
                    active[r] += 1;
                }
            }
        }
    }
    let rows: Vec<RowStatus> = active
        .iter()
        .enumerate()
        .map(|(row, &a)| RowStatus {
            row,
            kind: poly.row_labels[row],
            active: a,
            inactive: n - a,
        })
        .collect();
    let tally = |gen: bool| {
        let sel = rows.iter().filter(|r| r.kind.is_generator() == gen);
        (sel.clone().count(), sel.filter(|r| r.is_fixed()).count())
    };
    let (generator_rows, generator_fixed) = tally(true);
    let (flow_rows, flow_fixed) = tally(false);
    FixedStatusReport {
        n_samples: n,
        rows,
        generator_rows,
        generator_fixed,
        flow_rows,
        flow_fixed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub class: usize,
    pub count: usize,
    pub frequency: f64,
}

/// Observed classes by descending count; equal counts list the lower class first.
pub fn frequency_distribution(ds: &Dataset) -> Vec<FrequencyRow> {
    let k = ds.samples.iter().map(|s| s.label + 1).max().unwrap_or(0);
    let hist = crate::scenario::label_histogram(ds.samples.iter().map(|s| s.label), k);
    let n = ds.len() as f64;
    let mut rows: Vec<FrequencyRow> = hist
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(class, count)| FrequencyRow {
            class,
            count,
            frequency: count as f64 / n,
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.class.cmp(&b.class)));
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    /// Training-set size or network depth, depending on the study.
    pub setting: usize,
    pub k: usize,
    pub eta: f64,
}

/// Trains a fresh model on `train` and scores it on `test`.
pub fn accuracy_cell(
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
    k_list: &[usize],
    setting: usize,
) -> Result<Vec<AccuracyCell>, NnError> {
    let outcome = fit(train, cfg)?;
    let eta = topk_accuracy(&outcome.model, &train.dictionary, test, k_list)?;
    Ok(eta
        .into_iter()
        .map(|(k, eta)| AccuracyCell { setting, k, eta })
        .collect())
}

/// Accuracy against training-set size; every size trains on a prefix of
/// `train` and scores on the same `test`.
pub fn learning_curve(
    train: &Dataset,
    test: &Dataset,
    sizes: &[usize],
    cfg: &TrainConfig,
    k_list: &[usize],
) -> Result<Vec<AccuracyCell>, NnError> {
    let mut out = Vec::new();
    for &size in sizes {
        out.extend(accuracy_cell(&train.truncated(size), test, cfg, k_list, size)?);
    }
    Ok(out)
}

/// Training configuration with the first `depth` hidden widths of `base`
/// (the last width repeats when `depth` exceeds the list).
pub fn config_for_depth(base: &TrainConfig, depth: usize) -> TrainConfig {
    let last = base.layer_widths.last().copied().unwrap_or(64);
    let widths = (0..depth)
        .map(|i| base.layer_widths.get(i).copied().unwrap_or(last))
        .collect();
    TrainConfig {
        layer_widths: widths,
        ..base.clone()
    }
}

/// Accuracy against the number of hidden layers.
pub fn depth_study(
    train: &Dataset,
    test: &Dataset,
    depths: &[usize],
    base: &TrainConfig,
    k_list: &[usize],
) -> Result<Vec<AccuracyCell>, NnError> {
    let mut out = Vec::new();
    for &d in depths {
        out.extend(accuracy_cell(train, test, &config_for_depth(base, d), k_list, d)?);
    }
    Ok(out)
}
