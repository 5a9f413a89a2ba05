//! Grid sweeps over budgets, widths and seeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, RouteKind};
use crate::run::{run_point, RunRecord, Status};

/// Relative slack allowed when checking that errors fall with width.
pub const TREND_SLACK: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisRow {
    pub axis: String,
    pub value: f64,
    pub runs: usize,
    pub failures: usize,
    pub median_sup_error: Option<f64>,
    pub median_l2_error: Option<f64>,
    pub median_width: Option<f64>,
    pub median_final_loss: Option<f64>,
    /// Construct route: runs whose sup error met the budget.
    pub within_budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub version: String,
    pub name: String,
    pub axis: String,
    pub rows: Vec<AxisRow>,
    /// Budgets tightening: median width never drops.
    pub width_non_decreasing: Option<bool>,
    /// Widths growing: median final loss never rises beyond the slack.
    pub loss_non_increasing: Option<bool>,
    pub all_within_budget: Option<bool>,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<RunRecord>,
    pub summary: SweepSummary,
}

/// One configuration per grid point, budgets outermost and seeds innermost.
pub fn expand(cfg: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let spec = cfg.sweep.clone().unwrap_or_default();
    let budgets: Vec<Option<f64>> = match spec.budgets {
        Some(v) => v.into_iter().map(Some).collect(),
        None => vec![cfg.budget],
    };
    let widths: Vec<Option<usize>> = match spec.widths {
        Some(v) => v.into_iter().map(Some).collect(),
        None => vec![cfg.width],
    };
    let seeds = spec.seeds.unwrap_or_else(|| vec![cfg.seed]);
    let mut points = Vec::new();
    for b in &budgets {
        for w in &widths {
            for s in &seeds {
                let mut p = cfg.clone();
                p.sweep = None;
                p.budget = *b;
                p.width = *w;
                p.seed = *s;
                points.push(p);
            }
        }
    }
    points
}

pub fn sweep(cfg: &ExperimentConfig) -> SweepOutcome {
    let points = expand(cfg);
    let records: Vec<RunRecord> = if cfg.parallel {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| run_point(p, i).record)
            .collect()
    } else {
        points.iter().enumerate().map(|(i, p)| run_point(p, i).record).collect()
    };
    let summary = summarize(cfg, &records);
    SweepOutcome { records, summary }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn summarize(cfg: &ExperimentConfig, records: &[RunRecord]) -> SweepSummary {
    let axis = match cfg.route {
        RouteKind::Construct => "budget",
        RouteKind::Train => "width",
    };
    let key = |r: &RunRecord| -> f64 {
        match cfg.route {
            RouteKind::Construct => r.config.budget.unwrap_or(f64::NAN),
            RouteKind::Train => r.config.width.map_or(f64::NAN, |w| w as f64),
        }
    };
    let mut values: Vec<f64> = Vec::new();
    for r in records {
        let k = key(r);
        if !values.iter().any(|v| v.to_bits() == k.to_bits()) {
            values.push(k);
        }
    }
    let rows: Vec<AxisRow> = values
        .iter()
        .map(|&v| {
            let group: Vec<&RunRecord> = records.iter().filter(|r| key(r).to_bits() == v.to_bits()).collect();
            let ok: Vec<&&RunRecord> = group.iter().filter(|r| r.status == Status::Ok).collect();
            let mut sup: Vec<f64> = ok.iter().filter_map(|r| r.sup_error).collect();
            let mut l2: Vec<f64> = ok.iter().filter_map(|r| r.l2_error).collect();
            let mut width: Vec<f64> = ok.iter().filter_map(|r| r.width.map(|w| w as f64)).collect();
            let mut loss: Vec<f64> = ok
                .iter()
                .filter_map(|r| r.train.as_ref().and_then(|t| t.final_loss))
                .collect();
            let within_budget = (cfg.route == RouteKind::Construct).then(|| {
                ok.iter()
                    .filter(|r| matches!((r.sup_error, r.config.budget), (Some(e), Some(b)) if e <= b))
                    .count()
            });
            AxisRow {
                axis: axis.to_string(),
                value: v,
                runs: group.len(),
                failures: group.len() - ok.len(),
                median_sup_error: median(&mut sup),
                median_l2_error: median(&mut l2),
                median_width: median(&mut width),
                median_final_loss: median(&mut loss),
                within_budget,
            }
        })
        .collect();

    let mut ordered = rows.clone();
    let failures = records.iter().filter(|r| r.status == Status::Failed).count();
    let (width_non_decreasing, loss_non_increasing, all_within_budget) = match cfg.route {
        RouteKind::Construct => {
            ordered.sort_by(|a, b| b.value.total_cmp(&a.value));
            let widths: Option<Vec<f64>> = ordered.iter().map(|r| r.median_width).collect();
            let monotone = widths.map(|w| w.windows(2).all(|p| p[1] >= p[0]));
            let all = rows.iter().all(|r| r.within_budget == Some(r.runs));
            (monotone, None, Some(all))
        }
        RouteKind::Train => {
            ordered.sort_by(|a, b| a.value.total_cmp(&b.value));
            let losses: Option<Vec<f64>> = ordered.iter().map(|r| r.median_final_loss).collect();
            let monotone = losses.map(|l| l.windows(2).all(|p| p[1] <= p[0] * (1.0 + TREND_SLACK)));
            (None, monotone, None)
        }
    };
    SweepSummary {
        version: crate::version_tag(),
        name: cfg.name.clone(),
        axis: axis.to_string(),
        rows,
        width_non_decreasing,
        loss_non_increasing,
        all_within_budget,
        failures,
    }
}
