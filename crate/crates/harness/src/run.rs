//! Single seeded runs on either route.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tvsnet::activations::ThresholdSet;
use tvsnet::constructive::{approximate, ConstructOptions};
use tvsnet::network::Parallelism;
use tvsnet::numeric::derive_seed;
use tvsnet::{CompactSampler, ConstructionReport, Element, Error, ShallowNetwork, SpaceDescriptor, TrainConfig};

use crate::config::{ExperimentConfig, RouteKind};
use crate::error::HarnessError;
use crate::targets::Target;

/// Seed streams derived from the configured seed.
pub mod stream {
    pub const SAMPLER: u64 = 11;
    pub const DICTIONARY: u64 = 12;
    pub const VALIDATION: u64 = 13;
    pub const INIT: u64 = 14;
    pub const TRAIN_DATA: u64 = 15;
    pub const SHUFFLE: u64 = 16;
    pub const SPHERE: u64 = 17;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructSummary {
    pub dict_size: usize,
    pub stage1_error: f64,
    pub stage2_errors: Vec<f64>,
    pub stage2_error_sum: f64,
    pub total_estimate: f64,
    /// The pipeline's own fresh-sample error, next to the harness's.
    pub report_validation_error: f64,
    pub ledger_sound: bool,
    pub stage1_budget_met: bool,
    pub stage2_budget_met: bool,
    pub max_degree: usize,
    pub sphere_maxima_min: Option<f64>,
    pub sphere_maxima_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub iterations: usize,
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
    pub min_loss: Option<f64>,
}

impl TrainSummary {
    fn from_trace(trace: &[f64]) -> Self {
        let finite: Vec<f64> = trace.iter().copied().filter(|v| v.is_finite()).collect();
        TrainSummary {
            iterations: trace.len().saturating_sub(1),
            initial_loss: finite.first().copied(),
            final_loss: finite.last().copied(),
            min_loss: finite.iter().copied().reduce(f64::min),
        }
    }
}

/// One line of the JSON-lines output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub name: String,
    pub point: usize,
    pub status: Status,
    pub reason_code: Option<String>,
    pub message: Option<String>,
    pub route: RouteKind,
    pub activation: String,
    pub target: String,
    pub space: String,
    pub seed: u64,
    pub budget: Option<f64>,
    pub sup_error: Option<f64>,
    pub l2_error: Option<f64>,
    pub width: Option<usize>,
    pub validation_size: usize,
    pub construct: Option<ConstructSummary>,
    pub train: Option<TrainSummary>,
    pub runtime_ms: Option<f64>,
    pub config: ExperimentConfig,
}

/// Everything a run produced, for callers that want more than the record.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub record: RunRecord,
    pub network: Option<ShallowNetwork>,
    pub report: Option<ConstructionReport>,
}

pub fn run(cfg: &ExperimentConfig) -> RunRecord {
    run_point(cfg, 0).record
}

/// Runs one grid point. Failures of the numerical modules become failure
/// records; nothing here panics on bad numerics.
pub fn run_point(cfg: &ExperimentConfig, point: usize) -> RunArtifacts {
    let start = Instant::now();
    let space_label = SpaceDescriptor::new(cfg.space.clone())
        .map(|s| s.to_string())
        .unwrap_or_else(|_| cfg.space.tag().to_string());
    let mut record = RunRecord {
        version: crate::version_tag(),
        name: cfg.name.clone(),
        point,
        status: Status::Ok,
        reason_code: None,
        message: None,
        route: cfg.route,
        activation: cfg.activation.clone(),
        target: cfg.target.id().to_string(),
        space: space_label,
        seed: cfg.seed,
        budget: match cfg.route {
            RouteKind::Construct => cfg.budget,
            RouteKind::Train => None,
        },
        sup_error: None,
        l2_error: None,
        width: None,
        validation_size: cfg.samples.validation,
        construct: None,
        train: None,
        runtime_ms: None,
        config: cfg.clone(),
    };
    let mut network = None;
    let mut report = None;
    let outcome = execute(cfg, &mut record, &mut network, &mut report);
    if let Err(e) = outcome {
        record.status = Status::Failed;
        record.reason_code = Some(e.reason_code().to_string());
        record.message = Some(e.to_string());
        if let HarnessError::Core(Error::Divergence { trace, .. }) = &e {
            record.train = Some(TrainSummary::from_trace(trace));
        }
    }
    if let (Some(dir), Some(rep)) = (&cfg.report_dir, &report) {
        if let Err(e) = write_report(dir, &cfg.name, point, rep) {
            record.status = Status::Failed;
            record.reason_code = Some(e.reason_code().to_string());
            record.message = Some(e.to_string());
        }
    }
    if cfg.record_timings {
        record.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    RunArtifacts {
        record,
        network,
        report,
    }
}

fn write_report(dir: &Path, name: &str, point: usize, report: &ConstructionReport) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}-{point:04}.report.json"));
    std::fs::write(path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

fn execute(
    cfg: &ExperimentConfig,
    record: &mut RunRecord,
    network: &mut Option<ShallowNetwork>,
    report: &mut Option<ConstructionReport>,
) -> Result<(), HarnessError> {
    let sigma = cfg.parse_activation()?;
    let space = SpaceDescriptor::new(cfg.space.clone())?;
    let sampler = CompactSampler::new(space.clone(), cfg.radius, derive_seed(cfg.seed, stream::SAMPLER))?;
    let target = cfg.target.build(&sampler, &sigma)?;
    let parallelism = if cfg.parallel {
        Parallelism::Rayon
    } else {
        Parallelism::Serial
    };
    let net = match cfg.route {
        RouteKind::Construct => {
            let opts = construct_options(cfg, &sampler)?;
            let g = |x: &Element| target.value(x);
            let budget = cfg.budget.expect("validated");
            let (net, rep) = approximate(&g, &sampler, &sigma, budget, &opts)?;
            let maxima: Vec<f64> = rep
                .sphere_maxima
                .iter()
                .flatten()
                .copied()
                .filter(|m| m.is_finite() && *m > 0.0)
                .collect();
            let stage2_error_sum = rep.stage2_errors.iter().sum();
            record.construct = Some(ConstructSummary {
                dict_size: rep.dict_size,
                stage1_error: rep.stage1_error,
                stage2_errors: rep.stage2_errors.clone(),
                stage2_error_sum,
                total_estimate: rep.total_estimate,
                report_validation_error: rep.validation_error,
                ledger_sound: rep.total_estimate >= rep.validation_error,
                stage1_budget_met: rep.stage1_budget_met,
                stage2_budget_met: rep.stage2_budget_met,
                max_degree: rep.degrees.iter().copied().max().unwrap_or(0),
                sphere_maxima_min: maxima.iter().copied().reduce(f64::min),
                sphere_maxima_max: maxima.iter().copied().reduce(f64::max),
            });
            *report = Some(rep);
            net
        }
        RouteKind::Train => {
            let width = cfg.width.expect("validated");
            let init = ShallowNetwork::init(space, sigma, width, derive_seed(cfg.seed, stream::INIT), cfg.train.init_scale)?;
            let xs = sampler.fork(derive_seed(cfg.seed, stream::TRAIN_DATA)).sample(cfg.samples.train);
            let data = labelled(&target, xs)?;
            let t = &cfg.train;
            let tc = TrainConfig {
                learning_rate: t.learning_rate,
                iterations: t.iterations,
                batch_size: t.batch_size,
                seed: derive_seed(cfg.seed, stream::SHUFFLE),
                optimizer: t.optimizer,
                gradient_mode: t.gradient_mode,
                ..TrainConfig::default()
            };
            let out = init.train(&data, &tc)?;
            record.train = Some(TrainSummary::from_trace(&out.losses));
            out.network
        }
    };
    let xs = sampler.fork(derive_seed(cfg.seed, stream::VALIDATION)).sample(cfg.samples.validation);
    let (sup, l2) = validation_errors(&net, &target, &xs, parallelism)?;
    record.sup_error = Some(sup);
    record.l2_error = Some(l2);
    record.width = Some(net.width());
    *network = Some(net);
    Ok(())
}

fn construct_options(cfg: &ExperimentConfig, sampler: &CompactSampler) -> Result<ConstructOptions, HarnessError> {
    let c = &cfg.construct;
    let mut opts = ConstructOptions {
        ridge: c.ridge,
        seed: derive_seed(cfg.seed, stream::DICTIONARY),
        dict_start: c.dict_start,
        dict_cap: c.dict_cap,
        hull_margin: c.hull_margin,
        fresh_size: cfg.samples.validation,
        mollifier: (c.mollifier_delta, c.mollifier_nodes),
        parallel: cfg.parallel,
        record_timings: cfg.record_timings,
        ..ConstructOptions::default()
    };
    opts.fit.train_size = cfg.samples.train;
    opts.fit.validation_size = cfg.samples.validation;
    opts.fit.sphere = c
        .sphere_points
        .map(|n| sampler.fork(derive_seed(cfg.seed, stream::SPHERE)).sample_sphere(n));
    opts.one_d.max_degree = c.max_degree;
    opts.one_d.training_fallback = c.training_fallback;
    if let Some([lo, hi]) = c.thresholds {
        opts.one_d.thresholds = ThresholdSet::new(lo, hi)?;
    }
    Ok(opts)
}

fn labelled(target: &Target, xs: Vec<Element>) -> Result<Vec<(Element, f64)>, HarnessError> {
    xs.into_iter()
        .map(|x| {
            let y = target.eval(&x)?;
            if y.is_finite() {
                Ok((x, y))
            } else {
                Err(HarnessError::Core(Error::NonFinite {
                    context: "target value".into(),
                }))
            }
        })
        .collect()
}

/// Max and root-mean-square error of `net` against `target` on `xs`.
pub fn validation_errors(
    net: &ShallowNetwork,
    target: &Target,
    xs: &[Element],
    parallelism: Parallelism,
) -> Result<(f64, f64), HarnessError> {
    let preds = net.forward_batch(xs, parallelism)?;
    let mut sup = 0.0f64;
    let mut sq = Vec::with_capacity(xs.len());
    for (x, p) in xs.iter().zip(&preds) {
        let d = p - target.eval(x)?;
        if !d.is_finite() {
            return Err(HarnessError::Core(Error::NonFinite {
                context: "validation residual".into(),
            }));
        }
        sup = sup.max(d.abs());
        sq.push(d * d);
    }
    let mean = tvsnet::numeric::pairwise_sum(&sq) / xs.len() as f64;
    Ok((sup, mean.sqrt()))
}
