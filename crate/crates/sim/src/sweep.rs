//! Transmit-power sweeps and their aggregation.

use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Result, SimError};
use crate::trial::{Scenario, TrialRecord};

/// BLER at which thresholds are read off.
pub const TARGET_BLER: f64 = 0.1;

/// Aggregate of one UE (or the UE mean) at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct BlerPoint {
    pub ptx_dbm: f64,
    /// `None` for the mean over UEs.
    pub ue_id: Option<usize>,
    pub trials: usize,
    pub errors: usize,
    pub bler: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// NaN when no trial produced a position estimate.
    pub doa_rmse_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlerCurve {
    pub ptx_dbm: Vec<f64>,
    /// Row-major: per point, the UEs in order followed by the mean row.
    pub points: Vec<BlerPoint>,
    pub ues: usize,
}

impl BlerCurve {
    pub fn mean(&self) -> impl Iterator<Item = &BlerPoint> {
        self.points.iter().filter(|p| p.ue_id.is_none())
    }

    pub fn for_ue(&self, ue: usize) -> impl Iterator<Item = &BlerPoint> {
        self.points.iter().filter(move |p| p.ue_id == Some(ue))
    }

    /// Transmit power where the mean BLER crosses [`TARGET_BLER`].
    pub fn threshold_dbm(&self) -> Option<f64> {
        let mean: Vec<&BlerPoint> = self.mean().collect();
        crossing(&mean, TARGET_BLER)
    }
}

/// Exact (Clopper-Pearson) two-sided binomial interval.
pub fn clopper_pearson(errors: usize, trials: usize, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && errors <= trials);
    let alpha = 1.0 - confidence;
    let (k, n) = (errors as f64, trials as f64);
    let lo = if errors == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).expect("positive shape").inverse_cdf(alpha / 2.0)
    };
    let hi = if errors == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).expect("positive shape").inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// First downward crossing of `target`, interpolated linearly in
/// `log10(BLER)`. Zero-error points are floored at half an error.
pub fn crossing(points: &[&BlerPoint], target: f64) -> Option<f64> {
    let log = |p: &BlerPoint| (p.bler.max(0.5 / p.trials as f64)).log10();
    let t = target.log10();
    points.windows(2).find_map(|w| {
        let (a, b) = (log(w[0]), log(w[1]));
        if a >= t && b < t {
            let frac = if a == b { 0.0 } else { (a - t) / (a - b) };
            Some(w[0].ptx_dbm + frac * (w[1].ptx_dbm - w[0].ptx_dbm))
        } else {
            None
        }
    })
}

/// Trials of the whole sweep in (point, trial) order, on `workers` threads
/// (0 = rayon default).
pub fn run_trials(scenario: &Scenario, workers: usize) -> Result<Vec<TrialRecord>> {
    let cfg = scenario.config();
    let jobs: Vec<(usize, f64, usize)> = cfg
        .sweep_ptx_dbm
        .iter()
        .enumerate()
        .flat_map(|(p, &ptx)| (0..cfg.trials).map(move |t| (p, ptx, t)))
        .collect();
    if workers == 1 {
        return jobs.iter().map(|&(p, ptx, t)| scenario.run_trial(p, ptx, t)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    pool.install(|| jobs.par_iter().map(|&(p, ptx, t)| scenario.run_trial(p, ptx, t)).collect())
}

pub fn aggregate(scenario: &Scenario, records: &[TrialRecord]) -> BlerCurve {
    let cfg = scenario.config();
    let ues = cfg.ues.len();
    let mut points = Vec::with_capacity(cfg.sweep_ptx_dbm.len() * (ues + 1));
    for (p, &ptx) in cfg.sweep_ptx_dbm.iter().enumerate() {
        let at: Vec<&TrialRecord> = records.iter().filter(|r| r.point == p).collect();
        let trials = at.len();
        let (mut total_errors, mut total_sq, mut total_n) = (0, 0.0, 0usize);
        for ue in 0..ues {
            let outcomes = at.iter().map(|r| &r.ues[ue]);
            let errors = outcomes.clone().filter(|o| o.block_error).count();
            let (sq, n) = outcomes
                .filter(|o| o.x_hat_m.is_finite())
                .fold((0.0, 0usize), |(s, n), o| (s + (o.x_hat_m - o.x_true_m).powi(2), n + 1));
            total_errors += errors;
            total_sq += sq;
            total_n += n;
            points.push(point(ptx, Some(ue), trials, errors, sq, n));
        }
        // The mean row pools every UE block.
        points.push(point(ptx, None, trials * ues, total_errors, total_sq, total_n));
    }
    BlerCurve { ptx_dbm: cfg.sweep_ptx_dbm.clone(), points, ues }
}

fn point(ptx_dbm: f64, ue_id: Option<usize>, trials: usize, errors: usize, sq: f64, n: usize) -> BlerPoint {
    let (ci_lo, ci_hi) = clopper_pearson(errors, trials.max(1), 0.95);
    BlerPoint {
        ptx_dbm,
        ue_id,
        trials,
        errors,
        bler: errors as f64 / trials.max(1) as f64,
        ci_lo,
        ci_hi,
        doa_rmse_m: if n == 0 { f64::NAN } else { (sq / n as f64).sqrt() },
    }
}

pub fn run_sweep(scenario: &Scenario, workers: usize) -> Result<BlerCurve> {
    Ok(aggregate(scenario, &run_trials(scenario, workers)?))
}
