//! Experiment runners.
//!
//! All randomness comes from [`SeedKey`] streams. Within a series, trial `t`
//! uses the same assignment and noise seeds at every grid level and for every
//! strategy, so comparisons across levels and strategies share common random
//! numbers.

use rand::Rng;
use rayon::prelude::*;

use pfdesign::design::{fractional_design, resolution_v_generators, sample_assignments, RESOLUTION_V_SIZES};
use pfdesign::estimation::mse;
use pfdesign::model::{generate_model, BoundPolicy};
use pfdesign::optimize::{active_dosage, emulate_dosage, kl_divergence, AcquisitionOptions, ExperimentState, TargetDistribution};
use pfdesign::{Assignments, DesignMatrix, Dosage, OutcomeModel, SubsetIndex};

use crate::config::{Experiment, RunConfig, Strategy};
use crate::output::{sort_rows, summarize, ResultRow, SummaryRow};
use crate::seeds::{SeedKey, Stream};
use crate::{config_err, HarnessError, Result};

/// Attempts per dosage before a budget-constrained draw is declared infeasible.
const MAX_REJECTIONS: usize = 100_000;

#[derive(Clone, Debug, Default)]
pub struct Report {
    /// Sorted by (series, level, strategy, trial, round).
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub emulate: Option<EmulateReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmulateReport {
    pub dosage: Vec<f64>,
    pub kl: f64,
    /// Random dosages with their divergences.
    pub comparators: Vec<(Vec<f64>, f64)>,
}

impl EmulateReport {
    pub fn best_comparator(&self) -> f64 {
        self.comparators.iter().map(|c| c.1).fold(f64::INFINITY, f64::min)
    }
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    if cfg.experiment == Experiment::Emulate {
        return Ok(Report {
            emulate: Some(run_emulate(cfg)?),
            ..Report::default()
        });
    }
    let mut rows = match cfg.experiment {
        Experiment::PassiveSweep | Experiment::ConstrainedSweep | Experiment::MisspecifiedSweep => {
            run_distance_sweep(cfg)?
        }
        Experiment::UniformSweep => run_uniform_sweep(cfg)?,
        Experiment::ActiveCompare => run_active_compare(cfg)?,
        Experiment::FractionalCompare => run_fractional_compare(cfg)?,
        Experiment::Emulate => unreachable!(),
    };
    sort_rows(&mut rows);
    let summary = summarize(&rows);
    Ok(Report {
        rows,
        summary,
        emulate: None,
    })
}

/// A dosage whose ℓ∞ distance from the uniform dosage `center` is exactly `r`.
///
/// Every coordinate is drawn uniformly from `[center − r, center + r] ∩ [0, 1]`,
/// then one uniformly chosen coordinate is moved to `center ± r`. With a
/// `budget`, draws with `Σ d_i > budget` are rejected.
pub fn dosage_at_distance<R: Rng + ?Sized>(
    p: usize,
    center: f64,
    r: f64,
    budget: Option<f64>,
    rng: &mut R,
) -> Result<Dosage> {
    let slack = 1e-12;
    if r == 0.0 {
        if budget.is_some_and(|l| p as f64 * center > l + slack) {
            return config_err(format!("uniform dosage {center} exceeds the budget"));
        }
        return Ok(Dosage::uniform(p, center)?);
    }
    let (down, up) = (center - r >= -slack, center + r <= 1.0 + slack);
    let (lo, hi) = ((center - r).max(0.0), (center + r).min(1.0));
    if !down && !up {
        return Err(infeasible(center, r));
    }
    if let Some(l) = budget {
        let pinned = if down { center - r } else { center + r };
        if (p - 1) as f64 * lo + pinned > l + slack {
            return Err(infeasible(center, r));
        }
    }
    for _ in 0..MAX_REJECTIONS {
        let mut d: Vec<f64> = (0..p).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
        let j = rng.random_range(0..p);
        let go_up = match (down, up) {
            (true, true) => rng.random::<bool>(),
            (_, up) => up,
        };
        d[j] = if go_up { center + r } else { center - r }.clamp(0.0, 1.0);
        if budget.is_none_or(|l| d.iter().sum::<f64>() <= l + slack) {
            return Ok(Dosage::new(d)?);
        }
    }
    Err(infeasible(center, r))
}

fn infeasible(center: f64, r: f64) -> HarnessError {
    HarnessError::Design(pfdesign::Error::Parameter(format!(
        "no admissible dosage at distance {r} from the uniform dosage {center}"
    )))
}

/// Fixed quantities of one series.
struct Series<'a> {
    index: usize,
    label: String,
    model: OutcomeModel,
    fit_index: SubsetIndex,
    /// Coefficients the estimate is scored against.
    truth: Vec<f64>,
    n: usize,
    bound: f64,
    cfg: &'a RunConfig,
}

impl Series<'_> {
    fn key(&self, trial: usize, round: usize) -> SeedKey<'static> {
        SeedKey {
            master: self.cfg.seed,
            experiment: self.cfg.experiment.id(),
            series: self.index as u64,
            trial: trial as u64,
            round: round as u64,
        }
    }

    /// Observes `assignments` with noise seeded by `key`, fits, and scores.
    fn fit_row(
        &self,
        assignments: Assignments,
        key: SeedKey<'_>,
        strategy: &'static str,
        level: f64,
        dosage_id: usize,
    ) -> Result<ResultRow> {
        let mut noise = key.rng(Stream::Noise);
        let y: Vec<f64> = assignments.rows().iter().map(|&m| self.model.observe(m, &mut noise)).collect();
        let design = DesignMatrix::new(assignments, &self.fit_index)?;
        let fit = self.cfg.estimator.fit(design.features(), &y, self.bound, self.model.sigma())?;
        Ok(ResultRow {
            experiment: self.cfg.experiment.id(),
            series: self.label.clone(),
            strategy,
            trial: key.trial as usize,
            round: key.round as usize,
            level,
            dosage_id,
            mse: mse(&fit.beta_hat, &self.truth),
            branch: fit.branch.as_str(),
            seed: key.seed(Stream::Assignment),
            series_index: self.index,
        })
    }
}

fn model_series<'a>(cfg: &'a RunConfig, s: usize, p: usize, k: usize, model_series: usize) -> Result<Series<'a>> {
    let index = SubsetIndex::new(p, k)?;
    let seed = SeedKey {
        master: cfg.seed,
        experiment: cfg.experiment.id(),
        series: model_series as u64,
        trial: 0,
        round: 0,
    }
    .seed(Stream::Model);
    let model = generate_model(index.clone(), cfg.sigma, BoundPolicy::Norm, seed)?;
    let bound = cfg.bound.unwrap_or(model.bound());
    let n = cfg.n_at(s);
    Ok(Series {
        index: s,
        label: format!("p={p},k={k},n={n}"),
        truth: model.beta().to_vec(),
        model,
        fit_index: index,
        n,
        bound,
        cfg,
    })
}

fn run_distance_sweep(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for s in 0..cfg.series_count() {
        let p = cfg.p_at(s);
        let (series, center, budget) = match cfg.experiment {
            Experiment::MisspecifiedSweep => {
                // one full-degree truth shared by every assumed order
                let mut series = model_series(cfg, s, p, p, 0)?;
                let k = cfg.k_assumed_at(s);
                series.fit_index = SubsetIndex::new(p, k)?;
                series.truth = series.model.truncated_beta(&series.fit_index)?;
                series.label = format!("p={p},k_assumed={k},n={}", series.n);
                (series, 0.5, None)
            }
            Experiment::ConstrainedSweep => {
                let center = (cfg.budget / p as f64).min(1.0);
                (model_series(cfg, s, p, cfg.k, s)?, center, Some(cfg.budget))
            }
            _ => (model_series(cfg, s, p, cfg.k, s)?, 0.5, None),
        };
        let mut dosages = Vec::new();
        for &r in &cfg.grid {
            for j in 0..cfg.dosages {
                let mut rng = series.key(j, 0).rng(Stream::Dosage);
                dosages.push((r, j, dosage_at_distance(p, center, r, budget, &mut rng)?));
            }
        }
        rows.extend(observe_dosages(&series, &dosages, "passive")?);
    }
    Ok(rows)
}

fn run_uniform_sweep(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for s in 0..cfg.series_count() {
        let series = model_series(cfg, s, cfg.p_at(s), cfg.k, s)?;
        let dosages = cfg
            .grid
            .iter()
            .map(|&v| Ok((v, 0, Dosage::uniform(series.fit_index.p(), v)?)))
            .collect::<Result<Vec<_>>>()?;
        rows.extend(observe_dosages(&series, &dosages, "uniform")?);
    }
    Ok(rows)
}

/// Runs `cfg.trials` observation sets for each `(level, dosage_id, dosage)`.
/// Trial numbers continue across dosages: dosage `j` owns trials
/// `j·trials .. (j+1)·trials`.
fn observe_dosages(series: &Series<'_>, dosages: &[(f64, usize, Dosage)], strategy: &'static str) -> Result<Vec<ResultRow>> {
    let trials = series.cfg.trials;
    (0..dosages.len() * trials)
        .into_par_iter()
        .map(|job| {
            let (level, j, dosage) = &dosages[job / trials];
            let key = series.key(j * trials + job % trials, 0);
            let assignments = sample_assignments(dosage, series.n, &mut key.rng(Stream::Assignment));
            series.fit_row(assignments, key, strategy, *level, *j)
        })
        .collect()
}

/// Resolution V design rows repeated until there are `n` of them.
fn cycled_fractional(p: usize, n: usize) -> Result<Assignments> {
    let Some(generators) = resolution_v_generators(p) else {
        let supported: Vec<String> = RESOLUTION_V_SIZES
            .iter()
            .map(|&q| {
                let g = resolution_v_generators(q).map_or(0, |g| g.len());
                format!("p={q} (2^({q}-{g}) resolution V)")
            })
            .collect();
        return Err(HarnessError::Design(pfdesign::Error::Parameter(format!(
            "no fractional design for p={p}; supported: {}",
            supported.join(", ")
        ))));
    };
    let design = fractional_design(p, &generators)?;
    let rows = design.rows().iter().copied().cycle().take(n).collect();
    Ok(Assignments::from_rows(p, rows)?)
}

fn run_fractional_compare(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for s in 0..cfg.series_count() {
        let p = cfg.p_at(s);
        let fractional = cycled_fractional(p, cfg.n_at(s))?;
        let per_trial: Vec<Vec<ResultRow>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut series = model_series(cfg, s, p, cfg.k, s)?;
                let key = series.key(t, 0);
                // the truth is redrawn every trial
                let fresh = generate_model(series.fit_index.clone(), cfg.sigma, BoundPolicy::Norm, key.seed(Stream::Model))?;
                series.bound = cfg.bound.unwrap_or(fresh.bound());
                series.truth = fresh.beta().to_vec();
                series.model = fresh;
                let half = sample_assignments(&Dosage::half(p), series.n, &mut key.rng(Stream::Assignment));
                Ok(vec![
                    series.fit_row(fractional.clone(), key, "fractional", 0.0, 0)?,
                    series.fit_row(half, key, "half", 0.0, 0)?,
                ])
            })
            .collect::<Result<_>>()?;
        rows.extend(per_trial.into_iter().flatten());
    }
    Ok(rows)
}

fn run_active_compare(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for s in 0..cfg.series_count() {
        let p = cfg.p_at(s);
        let partial = if cfg.strategies.contains(&Strategy::Partial) {
            Some(cycled_fractional(p, cfg.n_at(s))?)
        } else {
            None
        };
        let jobs: Vec<(usize, Strategy)> = (0..cfg.trials)
            .flat_map(|t| cfg.strategies.iter().map(move |&st| (t, st)))
            .collect();
        let per_job: Vec<Vec<ResultRow>> = jobs
            .into_par_iter()
            .map(|(t, strategy)| active_trial(cfg, s, p, t, strategy, partial.as_ref()))
            .collect::<Result<_>>()?;
        rows.extend(per_job.into_iter().flatten());
    }
    Ok(rows)
}

/// One strategy over all rounds of trial `t`, refitting on the pooled data.
fn active_trial(
    cfg: &RunConfig,
    s: usize,
    p: usize,
    t: usize,
    strategy: Strategy,
    partial: Option<&Assignments>,
) -> Result<Vec<ResultRow>> {
    let mut series = model_series(cfg, s, p, cfg.k, s)?;
    let fresh = generate_model(series.fit_index.clone(), cfg.sigma, BoundPolicy::Norm, series.key(t, 0).seed(Stream::Model))?;
    series.bound = cfg.bound.unwrap_or(fresh.bound());
    series.truth = fresh.beta().to_vec();
    series.model = fresh;

    let mut state = ExperimentState::new(series.fit_index.clone(), series.n)?;
    let mut opts = AcquisitionOptions::for_treatments(p);
    if let Some(objective) = cfg.objective {
        opts.objective = objective;
    }
    opts.restarts = cfg.restarts;
    // the noise level only weights rounds against each other, and all are equal
    let round_sigma = if cfg.sigma > 0.0 { cfg.sigma } else { 1.0 };

    let mut pooled = Assignments::from_rows(p, Vec::new())?;
    let mut pooled_y: Vec<f64> = Vec::new();
    let mut out = Vec::with_capacity(cfg.rounds);
    for round in 1..=cfg.rounds {
        let key = series.key(t, round);
        let assignments = match strategy {
            Strategy::Partial => partial.expect("partial design prepared").clone(),
            _ => {
                let dosage = match strategy {
                    Strategy::Optimal if round > 1 => {
                        opts.seed = key.seed(Stream::Optimizer);
                        active_dosage(&state, &opts)?.dosage
                    }
                    Strategy::Random => {
                        let mut rng = key.rng(Stream::Dosage);
                        Dosage::new((0..p).map(|_| rng.random::<f64>()).collect())?
                    }
                    _ => Dosage::half(p),
                };
                sample_assignments(&dosage, series.n, &mut key.rng(Stream::Assignment))
            }
        };
        let mut noise = key.rng(Stream::Noise);
        pooled_y.extend(assignments.rows().iter().map(|&m| series.model.observe(m, &mut noise)));
        let design = DesignMatrix::new(assignments, &series.fit_index)?;
        state.record_round(&design, round_sigma)?;
        pooled.extend(design.assignments());

        let all = DesignMatrix::new(pooled.clone(), &series.fit_index)?;
        let fit = cfg.estimator.fit(all.features(), &pooled_y, series.bound, cfg.sigma)?;
        out.push(ResultRow {
            experiment: cfg.experiment.id(),
            series: series.label.clone(),
            strategy: strategy.id(),
            trial: t,
            round,
            level: 0.0,
            dosage_id: 0,
            mse: mse(&fit.beta_hat, &series.truth),
            branch: fit.branch.as_str(),
            seed: key.seed(Stream::Assignment),
            series_index: s,
        });
    }
    Ok(out)
}

fn run_emulate(cfg: &RunConfig) -> Result<EmulateReport> {
    let path = cfg.target.as_ref().expect("validated");
    let text = std::fs::read_to_string(path)?;
    let q = TargetDistribution::parse(&text)?;
    let dosage = emulate_dosage(&q);
    let kl = kl_divergence(&q, &dosage)?;
    let comparators = (0..cfg.comparators)
        .map(|i| {
            let key = SeedKey {
                master: cfg.seed,
                experiment: cfg.experiment.id(),
                series: 0,
                trial: i as u64,
                round: 0,
            };
            let mut rng = key.rng(Stream::Comparator);
            let d = Dosage::new((0..q.p()).map(|_| rng.random::<f64>()).collect())?;
            let kl = kl_divergence(&q, &d)?;
            Ok((d.into_vec(), kl))
        })
        .collect::<Result<_>>()?;
    Ok(EmulateReport {
        dosage: dosage.into_vec(),
        kl,
        comparators,
    })
}
