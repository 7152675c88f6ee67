//! Aggregation of benchmark records: mean errors, error ratios and
//! convergence orders.
//!
//! Ratios are ratios of means, `mean(E_riemann) / mean(E_simpson)` per
//! `(N, N_s)` cell, not means of per-pulse ratios.

use std::collections::BTreeMap;

use tdmps_core::StepperKind;

use crate::bench::BenchRecord;
use crate::error::{BenchError, Result};

/// Mean error and runtime over the pulses of one `(N, N_s, stepper)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMean {
    pub error: f64,
    pub runtime_s: f64,
    pub pulses: usize,
}

pub fn cell_means(records: &[BenchRecord]) -> BTreeMap<(usize, usize, StepperKind), CellMean> {
    let mut sums: BTreeMap<(usize, usize, StepperKind), (f64, f64, usize)> = BTreeMap::new();
    for r in records {
        let e = sums.entry((r.n_sites, r.n_steps, r.stepper)).or_default();
        e.0 += r.error;
        e.1 += r.runtime_s;
        e.2 += 1;
    }
    sums.into_iter()
        .map(|(k, (e, t, n))| (k, CellMean { error: e / n as f64, runtime_s: t / n as f64, pulses: n }))
        .collect()
}

/// Riemann-over-Simpson comparison of one `(N, N_s)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCell {
    pub n_sites: usize,
    pub n_steps: usize,
    pub riemann: CellMean,
    pub simpson: CellMean,
}

impl RatioCell {
    pub fn error_ratio(&self) -> f64 {
        self.riemann.error / self.simpson.error
    }

    pub fn runtime_ratio(&self) -> f64 {
        self.simpson.runtime_s / self.riemann.runtime_s
    }
}

/// Cells for which both steppers were run, ordered by `(N, N_s)`.
pub fn error_ratios(records: &[BenchRecord]) -> Vec<RatioCell> {
    let means = cell_means(records);
    means
        .iter()
        .filter(|((_, _, k), _)| *k == StepperKind::Riemann)
        .filter_map(|(&(n, ns, _), &riemann)| {
            means.get(&(n, ns, StepperKind::Simpson)).map(|&simpson| RatioCell { n_sites: n, n_steps: ns, riemann, simpson })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(BenchError::Analysis(format!("{} abscissae for {} ordinates", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(BenchError::Analysis(format!("need at least 3 points for a slope, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(BenchError::Analysis("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(BenchError::Analysis("abscissae are all equal".into()));
    }
    Ok(sxy / sxx)
}

/// Fitted order of one `(N, stepper)` series.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceFit {
    pub n_sites: usize,
    pub stepper: StepperKind,
    pub slope: f64,
    /// `(N_s, mean error)` points used in the fit.
    pub points: Vec<(usize, f64)>,
}

/// Slope of log mean error against log `N_s` for every `(N, stepper)`.
/// Each group needs at least three distinct step counts.
pub fn fit_convergence_order(records: &[BenchRecord]) -> Result<Vec<ConvergenceFit>> {
    let mut groups: BTreeMap<(usize, StepperKind), Vec<(usize, f64)>> = BTreeMap::new();
    for (&(n, ns, k), m) in &cell_means(records) {
        groups.entry((n, k)).or_default().push((ns, m.error));
    }
    if groups.is_empty() {
        return Err(BenchError::Analysis("no records to fit".into()));
    }
    groups
        .into_iter()
        .map(|((n_sites, stepper), points)| {
            let x: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = points.iter().map(|p| p.1).collect();
            let slope = fit_log_log_slope(&x, &y)
                .map_err(|e| BenchError::Analysis(format!("N={n_sites} {stepper}: {e}")))?;
            Ok(ConvergenceFit { n_sites, stepper, slope, points })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ns: usize, stepper: StepperKind, pulse: usize, error: f64) -> BenchRecord {
        BenchRecord {
            n_sites: 2,
            n_steps: ns,
            stepper,
            pulse_index: pulse,
            error,
            runtime_s: 1.0,
            chi_max: None,
            truncation_weight: 0.0,
        }
    }

    #[test]
    fn geometric_series_slopes() {
        let ns = [100.0, 200.0, 400.0];
        let first = fit_log_log_slope(&ns, &[1e-2, 5e-3, 2.5e-3]).unwrap();
        let second = fit_log_log_slope(&ns, &[1e-2, 2.5e-3, 6.25e-4]).unwrap();
        assert!((first + 1.0).abs() < 1e-12);
        assert!((second + 2.0).abs() < 1e-12);
    }

    #[test]
    fn slope_needs_three_points() {
        assert!(fit_log_log_slope(&[1.0, 2.0], &[1.0, 0.5]).is_err());
        assert!(fit_log_log_slope(&[1.0, 2.0, 4.0], &[1.0, 0.0, 0.5]).is_err());
        let recs = [rec(10, StepperKind::Riemann, 0, 1.0), rec(20, StepperKind::Riemann, 0, 0.5)];
        assert!(fit_convergence_order(&recs).is_err());
    }

    #[test]
    fn ratio_of_means_not_mean_of_ratios() {
        let recs = [
            rec(10, StepperKind::Riemann, 0, 1.0),
            rec(10, StepperKind::Riemann, 1, 3.0),
            rec(10, StepperKind::Simpson, 0, 0.5),
            rec(10, StepperKind::Simpson, 1, 0.5),
        ];
        let cells = error_ratios(&recs);
        assert_eq!(cells.len(), 1);
        // mean of ratios would be (2 + 6) / 2 = 4
        assert_eq!(cells[0].error_ratio(), 4.0);
        let recs = [
            rec(10, StepperKind::Riemann, 0, 1.0),
            rec(10, StepperKind::Riemann, 1, 3.0),
            rec(10, StepperKind::Simpson, 0, 0.25),
            rec(10, StepperKind::Simpson, 1, 1.75),
        ];
        // ratio of means is 2 / 1 = 2, mean of ratios would be 4.86
        assert_eq!(error_ratios(&recs)[0].error_ratio(), 2.0);
    }

    #[test]
    fn fits_each_stepper_separately() {
        let mut recs = Vec::new();
        for ns in [50usize, 100, 200, 400] {
            let h = 1.0 / ns as f64;
            for p in 0..3 {
                recs.push(rec(ns, StepperKind::Riemann, p, h * (p + 1) as f64));
                recs.push(rec(ns, StepperKind::Simpson, p, h * h * (p + 1) as f64));
            }
        }
        let fits = fit_convergence_order(&recs).unwrap();
        assert_eq!(fits.len(), 2);
        assert!((fits[0].slope + 1.0).abs() < 1e-12);
        assert!((fits[1].slope + 2.0).abs() < 1e-12);
        assert_eq!(fits[1].points.len(), 4);
    }

    #[test]
    fn failed_cells_poison_their_mean() {
        let recs = [rec(10, StepperKind::Riemann, 0, f64::NAN), rec(10, StepperKind::Riemann, 1, 1.0)];
        assert!(cell_means(&recs).values().next().unwrap().error.is_nan());
    }
}
