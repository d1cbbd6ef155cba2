//! Minibatch training loop.
//!
//! Pre-processing runs the sampler `N` times to estimate `α` and `λ`; those
//! `N` subgraphs then serve as the first `N` minibatches. Iteration `t`
//! always uses sampler instance `t`, so a run resumed from a checkpoint
//! replays exactly the batches an uninterrupted run would have seen.

use std::ops::ControlFlow;

use ndarray::{Array2, Axis};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::forward::{forward_full, forward_subgraph, Batch, Dropout};
use super::loss::{loss_and_grad, Reduction};
use super::metrics::f1_micro;
use super::model::{Head, Model};
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::graph::Subgraph;
use crate::norm::{analytic_coeffs_edge, default_presample_count, estimate_coeffs, NormCoeffs};
use crate::rng::{stream_rng, streams, StreamRng};
use crate::sampler::pool::{produce_ordered, PoolOptions};
use crate::sampler::{Sampler, SamplerConfig, SamplerKind};
use crate::scalar::Scalar;

/// Sampler instances used to estimate the mean subgraph size.
const PILOT: u64 = 10;

/// Where the normalization coefficients come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoeffMode {
    /// Counted over the presampled subgraphs.
    #[default]
    Empirical,
    /// Closed form; independent edge sampler only.
    Analytic,
    /// `α = λ = 1`, i.e. no normalization.
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Hidden layer widths; the model has `hidden.len() + 1` layers.
    pub hidden: Vec<usize>,
    pub adam: AdamConfig,
    pub dropout: f64,
    pub epochs: usize,
    /// Defaults to `⌈|V| / mean |V_s|⌉`.
    pub minibatches_per_epoch: Option<usize>,
    /// Evaluate on the validation set every this many epochs; 0 evaluates
    /// only after the last epoch.
    pub eval_every: usize,
    pub seed: u64,
    /// Presampled subgraph count `N`; defaults to `⌈50|V| / mean |V_s|⌉`.
    pub presample: Option<usize>,
    pub coeffs: CoeffMode,
    pub reduction: Reduction,
    pub threads: usize,
    pub queue_capacity: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64],
            adam: AdamConfig::default(),
            dropout: 0.0,
            epochs: 20,
            minibatches_per_epoch: None,
            eval_every: 1,
            seed: 0,
            presample: None,
            coeffs: CoeffMode::Empirical,
            reduction: Reduction::Sum,
            threads: 1,
            queue_capacity: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        if self.minibatches_per_epoch == Some(0) || self.presample == Some(0) {
            return Err(Error::InvalidConfig("minibatch and presample counts must be positive".into()));
        }
        if self.queue_capacity == 0 {
            return Err(Error::InvalidConfig("queue capacity must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    /// Iterations completed when the evaluation ran.
    pub iteration: u64,
    /// Mean minibatch loss since the previous evaluation.
    pub loss: f64,
    pub val_f1: f64,
}

impl std::fmt::Display for LogEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "iter {} loss {} val_f1 {}", self.iteration, self.loss, self.val_f1)
    }
}

/// Everything that evolves during training; enough to resume a run.
#[derive(Debug, Clone)]
pub struct TrainState<F> {
    pub model: Model<F>,
    pub adam: AdamState<F>,
    pub iteration: u64,
    pub dropout_rng: StreamRng,
    pub best: Option<(f64, Model<F>)>,
    pub log: Vec<LogEntry>,
    /// Loss sum and batch count since the last evaluation.
    pub pending: (f64, u64),
    /// Batches skipped because no training node was sampled.
    pub skipped: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    /// Best-validation model, or the final one if no evaluation ran.
    pub model: Model<F>,
    pub log: Vec<LogEntry>,
    pub test_f1: f64,
    pub skipped: u64,
}

/// Pre-processed training run bound to a dataset.
pub struct Trainer<'d, F> {
    data: &'d Dataset<F>,
    sampler: Sampler<'d, F>,
    cfg: TrainConfig,
    coeffs: NormCoeffs<F>,
    presampled: Vec<Subgraph>,
    train_mask: Vec<bool>,
    iters_per_epoch: u64,
}

impl<'d, F: Scalar> Trainer<'d, F> {
    /// Validates the configuration and runs pre-processing.
    pub fn new(data: &'d Dataset<F>, sampler_cfg: SamplerConfig, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let sampler = Sampler::new(&data.graph, sampler_cfg)?;
        let n = match cfg.presample {
            Some(n) => n,
            None => default_presample_count(&sampler, PILOT)?,
        };
        let (mut coeffs, presampled) = estimate_coeffs(&data.graph, sampler_cfg, n, cfg.threads)?;
        match cfg.coeffs {
            CoeffMode::Empirical => {}
            CoeffMode::Analytic => match sampler_cfg.kind {
                SamplerKind::EdgeIndependent { m } => coeffs = analytic_coeffs_edge(&data.graph, m)?,
                _ => {
                    return Err(Error::InvalidConfig(
                        "analytic coefficients exist only for the independent edge sampler".into(),
                    ))
                }
            },
            CoeffMode::Unit => coeffs = NormCoeffs::unit(&data.graph),
        }
        Self::with_coeffs(data, sampler_cfg, cfg, coeffs, presampled)
    }

    /// Uses precomputed coefficients and presampled subgraphs (for example
    /// loaded from a cache file). `presampled` may be empty, in which case
    /// every minibatch is drawn fresh.
    pub fn with_coeffs(
        data: &'d Dataset<F>,
        sampler_cfg: SamplerConfig,
        cfg: TrainConfig,
        coeffs: NormCoeffs<F>,
        presampled: Vec<Subgraph>,
    ) -> Result<Self> {
        cfg.validate()?;
        coeffs.check_graph(&data.graph)?;
        let sampler = Sampler::new(&data.graph, sampler_cfg)?;
        let iters_per_epoch = match cfg.minibatches_per_epoch {
            Some(k) => k as u64,
            None => {
                let sizes: Vec<usize> = if presampled.is_empty() {
                    (0..PILOT).map(|i| sampler.sample(i).map(|s| s.subgraph.num_nodes())).collect::<Result<_>>()?
                } else {
                    presampled.iter().map(Subgraph::num_nodes).collect()
                };
                let mean = (sizes.iter().sum::<usize>() as f64 / sizes.len() as f64).max(1.0);
                (data.num_nodes() as f64 / mean).ceil().max(1.0) as u64
            }
        };
        let train_mask = data.split.iter().map(|&s| s == Split::Train).collect();
        Ok(Trainer {
            data,
            sampler,
            cfg,
            coeffs,
            presampled,
            train_mask,
            iters_per_epoch,
        })
    }

    pub fn coeffs(&self) -> &NormCoeffs<F> {
        &self.coeffs
    }

    pub fn presampled(&self) -> &[Subgraph] {
        &self.presampled
    }

    pub fn iters_per_epoch(&self) -> u64 {
        self.iters_per_epoch
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn init_state(&self) -> Result<TrainState<F>> {
        let mut dims = vec![self.data.feature_dim()];
        dims.extend(&self.cfg.hidden);
        dims.push(self.data.labels.num_classes());
        let model = Model::glorot(&dims, Head::from(self.data.labels.mode()), self.cfg.seed)?;
        Ok(TrainState {
            adam: AdamState::zeros(&model),
            model,
            iteration: 0,
            dropout_rng: stream_rng(self.cfg.seed, streams::DROPOUT),
            best: None,
            log: Vec::new(),
            pending: (0.0, 0),
            skipped: 0,
        })
    }

    /// F1-micro of `model` on the nodes of `split`, with full-graph
    /// inference.
    pub fn evaluate(&self, model: &Model<F>, split: Split) -> Result<f64> {
        evaluate(model, self.data, split)
    }

    fn step(&self, state: &mut TrainState<F>, subgraph: Subgraph) -> Result<()> {
        let t = state.iteration;
        state.iteration += 1;
        if subgraph.is_empty() {
            state.skipped += 1;
        } else {
            let batch = Batch::new(
                &self.data.graph,
                subgraph,
                &self.data.features,
                &self.data.labels,
                &self.train_mask,
                &self.coeffs,
            )?;
            let dropout = (self.cfg.dropout > 0.0).then(|| Dropout {
                rate: self.cfg.dropout,
                rng: &mut state.dropout_rng,
            });
            let (scores, cache) = forward_subgraph(&state.model, &batch, dropout)?;
            match loss_and_grad(&state.model, &batch, &scores, &cache, self.cfg.reduction) {
                Ok((loss, grads)) => {
                    let loss = loss.as_f64();
                    if !loss.is_finite() {
                        return Err(Error::NonFiniteLoss { iteration: t, loss });
                    }
                    adam_step(&mut state.model, &grads, &mut state.adam, &self.cfg.adam)?;
                    state.pending.0 += loss;
                    state.pending.1 += 1;
                }
                Err(Error::NoTrainingNodes) => state.skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if state.iteration.is_multiple_of(self.iters_per_epoch) {
            let epoch = state.iteration / self.iters_per_epoch;
            let last = epoch == self.cfg.epochs as u64;
            let due = if self.cfg.eval_every == 0 { last } else { epoch.is_multiple_of(self.cfg.eval_every as u64) || last };
            if due {
                self.record_eval(state)?;
            }
        }
        Ok(())
    }

    fn record_eval(&self, state: &mut TrainState<F>) -> Result<()> {
        let val_f1 = self.evaluate(&state.model, Split::Val)?;
        let (sum, count) = std::mem::take(&mut state.pending);
        state.log.push(LogEntry {
            iteration: state.iteration,
            loss: if count == 0 { f64::NAN } else { sum / count as f64 },
            val_f1,
        });
        if state.best.as_ref().is_none_or(|(best, _)| val_f1 > *best) {
            state.best = Some((val_f1, state.model.clone()));
        }
        Ok(())
    }

    /// Trains until `epoch` epochs are complete (capped at the configured
    /// count).
    pub fn run_until(&self, state: &mut TrainState<F>, epoch: usize) -> Result<()> {
        let end = self.iters_per_epoch * epoch.min(self.cfg.epochs) as u64;
        let cached = self.presampled.len() as u64;
        while state.iteration < end.min(cached) {
            let s = self.presampled[state.iteration as usize].clone();
            self.step(state, s)?;
        }
        if state.iteration >= end {
            return Ok(());
        }
        let options = PoolOptions {
            threads: self.cfg.threads,
            capacity: self.cfg.queue_capacity,
        };
        produce_ordered(&self.sampler, state.iteration..end, options, |_, sample| {
            self.step(state, sample.subgraph)?;
            Ok(ControlFlow::Continue(()))
        })
    }

    /// Picks the best-validation model and scores it on the test split.
    pub fn finish(&self, state: TrainState<F>) -> Result<TrainOutcome<F>> {
        let model = match state.best {
            Some((_, m)) => m,
            None => state.model,
        };
        let test_f1 = self.evaluate(&model, Split::Test)?;
        Ok(TrainOutcome {
            model,
            log: state.log,
            test_f1,
            skipped: state.skipped,
        })
    }
}

/// F1-micro of `model` on the nodes of `split`, with full-graph inference.
pub fn evaluate<F: Scalar>(model: &Model<F>, data: &Dataset<F>, split: Split) -> Result<f64> {
    let nodes = data.nodes_in(split);
    if nodes.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let scores = forward_full(model, &data.graph, &data.features)?;
    f1_micro(&scores.select(Axis(0), &nodes), &data.labels.gather(&nodes))
}

/// Full training run: pre-processing, minibatch iterations, best-model
/// selection and test evaluation.
pub fn train<F: Scalar>(data: &Dataset<F>, sampler_cfg: SamplerConfig, cfg: TrainConfig) -> Result<TrainOutcome<F>> {
    let trainer = Trainer::new(data, sampler_cfg, cfg)?;
    let mut state = trainer.init_state()?;
    trainer.run_until(&mut state, trainer.cfg.epochs)?;
    trainer.finish(state)
}

/// Majority-class F1-micro on `nodes` (single-label only).
pub fn majority_baseline<F: Scalar>(data: &Dataset<F>, train: Split, eval: Split) -> Result<f64> {
    let train_nodes = data.nodes_in(train);
    let eval_nodes = data.nodes_in(eval);
    let k = data.labels.num_classes();
    let crate::data::Labels::Single { classes, .. } = &data.labels else {
        return Err(Error::InvalidConfig("majority baseline needs single-label data".into()));
    };
    let mut counts = vec![0usize; k];
    for &v in &train_nodes {
        counts[classes[v]] += 1;
    }
    let major = (0..k).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap_or(0);
    let mut scores = Array2::<F>::zeros((eval_nodes.len(), k));
    scores.column_mut(major).fill(F::one());
    f1_micro(&scores, &data.labels.gather(&eval_nodes))
}
