//! Causal calibration: deviations of the exogenous clues from the preliminary forecast are
//! propagated down fixed tiers (weather and flooding → soil water → soil oxygen) through
//! distributed-lag models on the deviations and their first differences.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ridge;
use crate::error::{Error, Result};
use crate::types::{ExogenousClues, HistoryWindow, OxygenTrace, Variate, O_ATM_PCT};

/// Per-variate deviation series `actual − preliminary` (or `clue − preliminary`).
pub type Deltas = [Vec<f64>; Variate::COUNT];

/// Tier of a variate: exogenous drivers, then soil water, then soil oxygen.
pub fn tier(v: Variate) -> u8 {
    match v {
        Variate::Oxygen => 3,
        Variate::Swc => 2,
        _ => 1,
    }
}

/// Targets in the order they are calibrated.
pub const TARGETS: [Variate; 2] = [Variate::Swc, Variate::Oxygen];

/// Every `(source, target)` pair that crosses tiers downward.
pub fn tier_edges() -> Vec<(Variate, Variate)> {
    TARGETS
        .iter()
        .flat_map(|&t| {
            Variate::ALL
                .iter()
                .filter(move |&&s| tier(s) < tier(t))
                .map(move |&s| (s, t))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CausalConfig {
    /// Level lag order `p` for sources without an override.
    pub lag_order: usize,
    /// Order of the first-difference terms: 0 or 1.
    pub derivative_order: usize,
    /// Lag order per source variate. Flooding and rain act on oxygen over many hours; a one-hour
    /// window cannot carry that response.
    pub lag_overrides: BTreeMap<Variate, usize>,
    pub lambda: f64,
    /// Spacing of backtest origins, steps.
    pub backtest_stride: usize,
    pub min_windows: usize,
}

impl Default for CausalConfig {
    fn default() -> Self {
        Self {
            lag_order: 6,
            derivative_order: 1,
            lag_overrides: BTreeMap::from([(Variate::Flood, 216), (Variate::Precip, 72)]),
            lambda: 0.1,
            backtest_stride: 144,
            min_windows: 30,
        }
    }
}

impl CausalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lag_order == 0 {
            return Err(Error::InvalidLag(0));
        }
        if self.lag_overrides.values().any(|&p| p == 0) {
            return Err(Error::InvalidLag(0));
        }
        if self.derivative_order > 1 {
            return Err(Error::InvalidParams(format!(
                "derivative_order must be 0 or 1, got {}: higher-order difference terms are \
                 linear combinations of the level terms",
                self.derivative_order
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParams("causal lambda must be >= 0".into()));
        }
        if self.backtest_stride == 0 || self.min_windows == 0 {
            return Err(Error::InvalidParams(
                "backtest_stride and min_windows must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn order_for(&self, source: Variate) -> usize {
        self.lag_overrides.get(&source).copied().unwrap_or(self.lag_order)
    }
}

/// `Δtarget(t) += Σ_j level[j−1]·Δsource(t−j) + Σ_j derivative[j−1]·(Δsource(t−j+1) − Δsource(t−j))`,
/// with deviations before the forecast origin taken as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalEdgeModel {
    pub source: Variate,
    pub target: Variate,
    pub level: Vec<f64>,
    pub derivative: Vec<f64>,
    /// Residual variance of the joint fit for `target`, shared by its incoming edges.
    pub residual_variance: f64,
}

impl CausalEdgeModel {
    pub fn lag_order(&self) -> usize {
        self.level.len()
    }

    /// Impulse response: `out(t) = Σ_k kernel[k]·Δsource(t−k)`.
    pub fn kernel(&self) -> Vec<f64> {
        let len = self.level.len().max(self.derivative.len()) + 1;
        let mut k = vec![0.0; len];
        for (j, a) in self.level.iter().enumerate() {
            k[j + 1] += a;
        }
        for (j, a) in self.derivative.iter().enumerate() {
            k[j] += a;
            k[j + 1] -= a;
        }
        k
    }

    /// Add this edge's contribution for every step of `source` into `out`.
    pub fn apply_into(&self, source: &[f64], out: &mut [f64]) {
        convolve_into(&self.kernel(), source, out);
    }
}

/// `out(t) += Σ_k kernel[k]·x(t−k)` for `t` in `0..out.len()`, with `x` zero before 0.
pub fn convolve_into(kernel: &[f64], x: &[f64], out: &mut [f64]) {
    for (t, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, w) in kernel.iter().enumerate().take(t + 1) {
            acc += w * x[t - k];
        }
        *o += acc;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalModel {
    pub config: CausalConfig,
    pub edges: Vec<CausalEdgeModel>,
}

impl CausalModel {
    pub fn edge(&self, source: Variate, target: Variate) -> Option<&CausalEdgeModel> {
        self.edges.iter().find(|e| e.source == source && e.target == target)
    }

    pub fn check(&self) -> Result<()> {
        self.config.validate()?;
        for e in &self.edges {
            if tier(e.source) >= tier(e.target) {
                return Err(Error::Format(format!(
                    "edge {} -> {} does not point down the tiers",
                    e.source, e.target
                )));
            }
            if e.level.is_empty() || e.derivative.len() > 1 {
                return Err(Error::Format(format!("malformed edge {} -> {}", e.source, e.target)));
            }
            if !e.level.iter().chain(&e.derivative).all(|x| x.is_finite())
                || !e.residual_variance.is_finite()
            {
                return Err(Error::Format("non-finite causal coefficient".into()));
            }
        }
        Ok(())
    }

    /// Propagate tier-1 deviations into `Δswc` and `Δoxygen`, in place.
    pub fn propagate(&self, deltas: &mut Deltas) -> Result<()> {
        let n = deltas[Variate::Oxygen.index()].len();
        for target in TARGETS {
            let mut acc = vec![0.0; n];
            for (s, t) in tier_edges().into_iter().filter(|&(_, t)| t == target) {
                let e = self.edge(s, t).ok_or(Error::MissingEdge {
                    source_var: s.column_name(),
                    target: t.column_name(),
                })?;
                e.apply_into(&deltas[s.index()], &mut acc);
            }
            deltas[target.index()] = acc;
        }
        Ok(())
    }
}

/// Regressor columns of `sources` at step `t` of one window.
fn regressors(window: &Deltas, sources: &[(Variate, usize)], derivative_order: usize, t: usize, row: &mut Vec<f64>) {
    row.clear();
    for &(s, p) in sources {
        let x = &window[s.index()];
        let at = |i: isize| if i < 0 { 0.0 } else { x[i as usize] };
        let t = t as isize;
        for j in 1..=p as isize {
            row.push(at(t - j));
        }
        for j in 1..=derivative_order as isize {
            row.push(at(t - j + 1) - at(t - j));
        }
    }
}

/// Joint least-squares fit of every edge into `target`, one `(source, lag order)` per edge.
pub fn fit_target(
    target: Variate,
    sources: &[(Variate, usize)],
    derivative_order: usize,
    windows: &[Deltas],
    lambda: f64,
) -> Result<Vec<CausalEdgeModel>> {
    if let Some(&(_, p)) = sources.iter().find(|s| s.1 == 0) {
        return Err(Error::InvalidLag(p));
    }
    if windows.is_empty() {
        return Err(Error::Empty("no training windows for causal fit"));
    }
    let d: usize = sources.iter().map(|&(_, p)| p + derivative_order).sum();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DMatrix::<f64>::zeros(d, 1);
    let mut row = Vec::with_capacity(d);
    let mut rows = 0usize;
    for w in windows {
        let y = &w[target.index()];
        let n = y.len();
        let mut x = DMatrix::<f64>::zeros(n, d);
        for t in 0..n {
            regressors(w, sources, derivative_order, t, &mut row);
            for (i, v) in row.iter().enumerate() {
                x[(t, i)] = *v;
            }
        }
        let yv = DMatrix::from_column_slice(n, 1, y);
        gram += x.tr_mul(&x);
        rhs += x.tr_mul(&yv);
        rows += n;
    }
    let b = ridge::solve_normal(gram, &rhs, lambda)?;

    let mut sse = 0.0;
    for w in windows {
        for (t, y) in w[target.index()].iter().enumerate() {
            regressors(w, sources, derivative_order, t, &mut row);
            let pred: f64 = row.iter().enumerate().map(|(i, v)| v * b[i]).sum();
            sse += (y - pred).powi(2);
        }
    }
    let residual_variance = sse / rows.max(1) as f64;

    let mut off = 0;
    Ok(sources
        .iter()
        .map(|&(s, p)| {
            let level = (off..off + p).map(|i| b[i]).collect();
            let derivative = (off + p..off + p + derivative_order).map(|i| b[i]).collect();
            off += p + derivative_order;
            CausalEdgeModel {
                source: s,
                target,
                level,
                derivative,
                residual_variance,
            }
        })
        .collect())
}

/// Fit every tier edge from backtest deviation windows.
pub fn fit_causal(windows: &[Deltas], config: &CausalConfig) -> Result<CausalModel> {
    config.validate()?;
    let mut edges = Vec::new();
    for target in TARGETS {
        let sources: Vec<(Variate, usize)> = tier_edges()
            .into_iter()
            .filter(|&(_, t)| t == target)
            .map(|(s, _)| (s, config.order_for(s)))
            .collect();
        edges.extend(fit_target(target, &sources, config.derivative_order, windows, config.lambda)?);
    }
    Ok(CausalModel {
        config: config.clone(),
        edges,
    })
}

/// Preliminary forecast, deviations, and the calibrated soil water and oxygen.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub preliminary: HistoryWindow,
    pub deltas: Deltas,
    pub calibrated_swc: Vec<f64>,
    pub calibrated_oxygen: OxygenTrace,
}

pub fn calibrate(
    preliminary: &HistoryWindow,
    clues: &ExogenousClues,
    model: &CausalModel,
) -> Result<ForecastResult> {
    let axis = preliminary.axis();
    if clues.len() != axis.len() {
        return Err(Error::LengthMismatch {
            what: "clue horizon vs forecast horizon",
            expected: axis.len(),
            actual: clues.len(),
        });
    }
    if clues.axis().start() != axis.start() || clues.axis().step_secs() != axis.step_secs() {
        return Err(Error::InvalidAxis(format!(
            "clues start at {} but the forecast starts at {}",
            clues.axis().start(),
            axis.start()
        )));
    }
    let mut deltas: Deltas = Default::default();
    for v in Variate::ALL {
        deltas[v.index()] = match clues.column(v) {
            Some(c) => c.iter().zip(preliminary.column(v)).map(|(c, p)| c - p).collect(),
            None => vec![0.0; axis.len()],
        };
    }
    model.propagate(&mut deltas)?;
    let shift = |v: Variate, hi: f64| -> Vec<f64> {
        preliminary
            .column(v)
            .iter()
            .zip(&deltas[v.index()])
            .map(|(p, d)| (p + d).clamp(0.0, hi))
            .collect()
    };
    let calibrated_swc = shift(Variate::Swc, 1.0);
    let calibrated_oxygen = OxygenTrace::new(*axis, shift(Variate::Oxygen, O_ATM_PCT))?;
    Ok(ForecastResult {
        preliminary: preliminary.clone(),
        deltas,
        calibrated_swc,
        calibrated_oxygen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn planted(sigma: f64, seed: u64) -> Vec<Deltas> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        (0..30)
            .map(|_| {
                let x: Vec<f64> = (0..720).map(|_| unit.sample(&mut rng)).collect();
                let at = |i: isize| if i < 0 { 0.0 } else { x[i as usize] };
                let y: Vec<f64> = (0..720isize)
                    .map(|t| {
                        0.5 * at(t - 1) + 0.2 * at(t - 2) + 0.1 * (at(t) - at(t - 1))
                            + sigma * unit.sample(&mut rng)
                    })
                    .collect();
                let mut w: Deltas = Default::default();
                for v in Variate::ALL {
                    w[v.index()] = vec![0.0; 720];
                }
                w[Variate::Flood.index()] = x;
                w[Variate::Swc.index()] = y;
                w
            })
            .collect()
    }

    fn recover(sigma: f64, lambda: f64) -> CausalEdgeModel {
        let w = planted(sigma, 11);
        fit_target(Variate::Swc, &[(Variate::Flood, 2)], 1, &w, lambda)
            .unwrap()
            .remove(0)
    }

    #[test]
    fn planted_coefficients_noisy() {
        let e = recover(0.01, 0.1);
        for (got, want) in e.level.iter().chain(&e.derivative).zip([0.5, 0.2, 0.1]) {
            assert!(((got - want) / want).abs() < 0.10, "{got} vs {want}");
        }
    }

    #[test]
    fn planted_coefficients_exact() {
        let e = recover(0.0, 1e-9);
        for (got, want) in e.level.iter().chain(&e.derivative).zip([0.5, 0.2, 0.1]) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn zero_deltas_zero_coefficients() {
        let mut w = planted(0.0, 3);
        for win in &mut w {
            for c in win.iter_mut() {
                c.iter_mut().for_each(|x| *x = 0.0);
            }
        }
        let m = fit_causal(&w, &CausalConfig::default()).unwrap();
        assert_eq!(m.edges.len(), 11);
        assert!(m.edges.iter().all(|e| e.level.iter().chain(&e.derivative).all(|&a| a == 0.0)));
    }

    #[test]
    fn lag_zero_rejected() {
        let cfg = CausalConfig {
            lag_order: 0,
            ..Default::default()
        };
        assert!(matches!(fit_causal(&planted(0.0, 1), &cfg), Err(Error::InvalidLag(0))));
        assert!(matches!(
            fit_target(Variate::Swc, &[(Variate::Flood, 0)], 1, &planted(0.0, 1), 0.1),
            Err(Error::InvalidLag(0))
        ));
    }

    #[test]
    fn tiers_point_down() {
        let edges = tier_edges();
        assert_eq!(edges.len(), 11);
        assert!(edges.iter().all(|&(s, t)| tier(s) < tier(t)));
    }

    #[test]
    fn kernel_matches_direct_sum() {
        let e = CausalEdgeModel {
            source: Variate::Flood,
            target: Variate::Swc,
            level: vec![0.5, 0.2, -0.1],
            derivative: vec![0.3],
            residual_variance: 0.0,
        };
        let x: Vec<f64> = (0..20).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut out = vec![0.0; 20];
        e.apply_into(&x, &mut out);
        let at = |i: isize| if i < 0 { 0.0 } else { x[i as usize] };
        for t in 0..20isize {
            let direct = 0.5 * at(t - 1) + 0.2 * at(t - 2) - 0.1 * at(t - 3) + 0.3 * (at(t) - at(t - 1));
            assert!((out[t as usize] - direct).abs() < 1e-12);
        }
    }
}
