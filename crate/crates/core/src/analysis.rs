//! Optimization over the pump strength, closed-form short- and
//! long-distance limits, and numerical minimum transmission.
//!
//! Closed forms come in two regimes. At short distance Bob's dark counts are
//! dropped and the key rate scales as `T^2`, with the detector entering only
//! through `q1^2/q2`. Near the maximum distance the positivity condition is
//! linearized around the threshold QBER, which yields the minimum
//! transmission as a single-photon term plus a weak-coherent-pulse term
//! scaled by `sqrt(q0 q2)/q1`. [`tmin_numerical`] solves the exact model and
//! serves as the reference for both.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::{key_rate, ChannelParams, KeyRateReport, ModelStatus};
use crate::numeric::{bisect, golden_section_max, linear_fit, logspace};
use crate::protocol::ProtocolSpec;
use crate::source_detector::{
    distance_factor, multiplexed_response, poisson_pair_stats, short_distance_factor,
    HeraldResponse, MultiplexedDetectorParams,
};

/// Transmission interval searched by [`tmin_numerical`].
pub const TMIN_SEARCH: (f64, f64) = (1e-8, 1.0);
/// Relative tolerance of [`tmin_numerical`].
pub const TMIN_REL_TOL: f64 = 1e-3;

/// Settings for [`optimize_lambda`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Points in the logarithmic pre-scan.
    pub grid_points: usize,
    /// Relative tolerance on the optimal `lambda`.
    pub rel_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lambda_min: 1e-8,
            lambda_max: 1.0,
            grid_points: 200,
            rel_tol: 1e-6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0
            && self.lambda_min < self.lambda_max
            && self.lambda_max.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "lambda bounds must satisfy 0 < min < max, got [{}, {}]",
                self.lambda_min, self.lambda_max
            )));
        }
        if self.grid_points < 3 {
            return Err(Error::InvalidParameter(
                "need at least 3 grid points".into(),
            ));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Best pump strength for one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub lambda_opt: f64,
    /// Report at `lambda_opt`; `None` only when no click is possible there.
    pub report: Option<KeyRateReport>,
    /// Optimized key rate, or `-inf` when every probed point was model-invalid.
    pub key_rate: f64,
    /// False when the optimum sits on a search bound or nothing was valid.
    pub converged: bool,
    pub evaluations: usize,
}

impl OptimizationResult {
    pub fn secure(&self) -> bool {
        self.report.is_some_and(|r| r.secure)
    }
}

fn evaluate(
    spec: &ProtocolSpec,
    r: &HeraldResponse,
    ch: &ChannelParams,
    lambda: f64,
) -> Option<KeyRateReport> {
    let stats = poisson_pair_stats(lambda).ok()?;
    key_rate(spec, &stats, r, ch).ok()
}

fn score(spec: &ProtocolSpec, r: &HeraldResponse, ch: &ChannelParams, lambda: f64) -> f64 {
    evaluate(spec, r, ch, lambda).map_or(f64::NEG_INFINITY, |rep| rep.score())
}

/// One probed pump strength.
#[derive(Clone, Copy)]
struct Sample {
    ln_lambda: f64,
    score: f64,
    status: Option<ModelStatus>,
}

/// Subdivisions per level when a status change is being located.
const SUBDIVISIONS: usize = 16;

fn sample(spec: &ProtocolSpec, r: &HeraldResponse, ch: &ChannelParams, ln_lambda: f64) -> Sample {
    let rep = evaluate(spec, r, ch, ln_lambda.exp());
    Sample {
        ln_lambda,
        score: rep.map_or(f64::NEG_INFINITY, |rep| rep.score()),
        status: rep.map(|rep| rep.status),
    }
}

/// Resolves every change of model status between `a` and `b` down to `width`
/// in `ln lambda`, appending the new samples to `out`.
///
/// Valid regions can be narrower than the coarse grid step (the SARG04 PNS
/// condition holds on two separate bands of `Q/y`), and the key rate may
/// peak right at their edges.
fn refine_transitions(
    spec: &ProtocolSpec,
    r: &HeraldResponse,
    ch: &ChannelParams,
    a: Sample,
    b: Sample,
    width: f64,
    out: &mut Vec<Sample>,
) {
    if a.status == b.status || b.ln_lambda - a.ln_lambda <= width {
        return;
    }
    let step = (b.ln_lambda - a.ln_lambda) / SUBDIVISIONS as f64;
    let mut prev = a;
    for i in 1..=SUBDIVISIONS {
        let next = if i == SUBDIVISIONS {
            b
        } else {
            let s = sample(spec, r, ch, a.ln_lambda + step * i as f64);
            out.push(s);
            s
        };
        refine_transitions(spec, r, ch, prev, next, width, out);
        prev = next;
    }
}

/// `ln lambda` brackets around the finite local maxima of ordered samples.
fn peak_brackets(samples: &[Sample]) -> Vec<(f64, f64)> {
    let n = samples.len();
    (0..n)
        .filter(|&i| {
            let s = samples[i].score;
            s.is_finite()
                && (i == 0 || s >= samples[i - 1].score)
                && (i + 1 == n || s >= samples[i + 1].score)
        })
        .map(|i| {
            (
                samples[i.saturating_sub(1)].ln_lambda,
                samples[(i + 1).min(n - 1)].ln_lambda,
            )
        })
        .collect()
}

/// Maximizes the key rate over `lambda`.
///
/// A logarithmic grid locates the best bracket, which golden-section search
/// then refines in `ln lambda`. Unimodality is only assumed inside the
/// bracket; model-invalid points score `-inf`. Grid intervals across which
/// the model status changes are subdivided until the change is resolved, so
/// narrow valid windows and maxima at validity edges are not missed.
pub fn optimize_lambda(
    spec: &ProtocolSpec,
    r: &HeraldResponse,
    ch: &ChannelParams,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let grid = logspace(cfg.lambda_min, cfg.lambda_max, cfg.grid_points);
    let coarse: Vec<Sample> = grid.iter().map(|&l| sample(spec, r, ch, l.ln())).collect();
    let mut samples = coarse.clone();

    let width = 1e-3 * cfg.rel_tol;
    let mut extra = Vec::new();
    for w in coarse.windows(2) {
        refine_transitions(spec, r, ch, w[0], w[1], width, &mut extra);
    }
    samples.extend(extra);
    samples.sort_by(|a, b| a.ln_lambda.total_cmp(&b.ln_lambda));
    let mut evaluations = samples.len();

    let best_sample =
        samples.iter().copied().fold(
            samples[0],
            |acc, s| if s.score > acc.score { s } else { acc },
        );

    if best_sample.score == f64::NEG_INFINITY {
        return Ok(OptimizationResult {
            lambda_opt: cfg.lambda_min,
            report: evaluate(spec, r, ch, cfg.lambda_min),
            key_rate: f64::NEG_INFINITY,
            converged: false,
            evaluations,
        });
    }

    // Golden-section around every local maximum, both on the coarse grid
    // (where a smooth peak may hide between samples) and among the refined
    // samples (where the key rate may peak at a validity edge). Brackets
    // inside resolved transitions are tiny, so the second pass is cheap.
    let (mut lambda_opt, mut k) = (best_sample.ln_lambda.exp(), best_sample.score);
    for points in [&coarse, &samples] {
        for (lo, hi) in peak_brackets(points) {
            let refined = golden_section_max(|u| score(spec, r, ch, u.exp()), lo, hi, cfg.rel_tol);
            evaluations += refined.evaluations;
            if refined.value > k {
                lambda_opt = refined.x.exp();
                k = refined.value;
            }
        }
    }
    let margin = 10.0 * cfg.rel_tol;
    let at_bound =
        (lambda_opt / cfg.lambda_min).ln() < margin || (cfg.lambda_max / lambda_opt).ln() < margin;

    Ok(OptimizationResult {
        lambda_opt,
        report: evaluate(spec, r, ch, lambda_opt),
        key_rate: k,
        converged: !at_bound,
        evaluations,
    })
}

/// Key rate with Bob's dark counts neglected:
/// `p_sift [T p1 q1 - p2 q2 (I_AE^(2) - 2T)]`.
pub fn short_distance_key_rate(
    spec: &ProtocolSpec,
    r: &HeraldResponse,
    transmission: f64,
    lambda: f64,
) -> Result<f64> {
    let s = poisson_pair_stats(lambda)?;
    let t = transmission;
    Ok(spec.p_sift() * (t * s.p1 * r.q1 - s.p2 * r.q2 * (spec.eve_info_two() - 2.0 * t)))
}

/// Closed-form estimate flagged with whether its derivation applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub in_regime: bool,
}

/// Pump strength maximizing [`short_distance_key_rate`] to leading order.
///
/// `in_regime` is false when `I_AE^(2) <= 2T`, where multiphoton pulses stop
/// being penalized and no interior optimum exists.
pub fn short_distance_lambda(
    spec: &ProtocolSpec,
    r: &HeraldResponse,
    transmission: f64,
) -> Result<Estimate> {
    if r.q1 == 0.0 && r.q2 == 0.0 {
        return Err(Error::InvalidParameter("q1 and q2 are both zero".into()));
    }
    let penalty = spec.eve_info_two() - 2.0 * transmission;
    let signal = transmission * r.q1;
    Ok(Estimate {
        value: signal / (signal + penalty * r.q2),
        in_regime: penalty > 0.0,
    })
}

/// Leading-order short-distance key rate
/// `(q1^2/q2) p_sift T^2 / (2 (I_AE^(2) - 2T))`.
pub fn short_distance_approx_rate(
    spec: &ProtocolSpec,
    r: &HeraldResponse,
    transmission: f64,
) -> Result<f64> {
    let factor = short_distance_factor(r)?;
    let penalty = spec.eve_info_two() - 2.0 * transmission;
    if penalty == 0.0 {
        return Err(Error::DivisionByZero("I_AE^(2) = 2T"));
    }
    Ok(factor * spec.p_sift() * transmission * transmission / (2.0 * penalty))
}

/// `d_B (1 - 2 Q^th) / Q^th`, the reach of an ideal single-photon source.
pub fn tmin_single_photon(spec: &ProtocolSpec, dark_b: f64) -> f64 {
    let q = spec.q_threshold();
    dark_b * (1.0 - 2.0 * q) / q
}

/// Minimum transmission of weak coherent pulses and the pump strength that attains it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WcpMinimum {
    pub t_min: f64,
    pub lambda_opt: f64,
}

pub fn tmin_wcp(spec: &ProtocolSpec, dark_b: f64) -> WcpMinimum {
    let q = spec.q_threshold();
    let xi = spec.xi();
    let base = 2.0 * dark_b * (1.0 - 2.0 * q) / q;
    WcpMinimum {
        t_min: (base * xi).sqrt(),
        lambda_opt: (base / xi).sqrt(),
    }
}

/// Pump strength minimizing the linearized transmission bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum PumpOptimum {
    Interior(f64),
    /// `q0 = 0`: vacuum never heralds, so the bound improves as `lambda -> 0`
    /// while the event rate vanishes.
    Vanishing,
    /// `q2 = 0`: multiphoton pulses are always rejected, so raising `lambda`
    /// costs nothing.
    Unbounded,
    /// `q0 = q2 = 0`: the bound does not depend on `lambda`.
    Indeterminate,
}

impl PumpOptimum {
    pub fn value(&self) -> f64 {
        match self {
            PumpOptimum::Interior(v) => *v,
            PumpOptimum::Vanishing => 0.0,
            PumpOptimum::Unbounded => f64::INFINITY,
            PumpOptimum::Indeterminate => f64::NAN,
        }
    }
}

pub fn lambda_opt_heralded(spec: &ProtocolSpec, r: &HeraldResponse, dark_b: f64) -> PumpOptimum {
    match (r.q0 == 0.0, r.q2 == 0.0) {
        (true, true) => PumpOptimum::Indeterminate,
        (true, false) => PumpOptimum::Vanishing,
        (false, true) => PumpOptimum::Unbounded,
        (false, false) => {
            let q = spec.q_threshold();
            let v = 2.0 * dark_b * (1.0 - 2.0 * q) * r.q0 / (spec.xi() * q * r.q2);
            PumpOptimum::Interior(v.sqrt())
        }
    }
}

/// Right-hand side of the linearized positivity condition `T > f(lambda)`
/// for a heralded source, with `O(p2 q2)` terms dropped from `p_exp` and `Q`.
pub fn linearized_transmission_bound(
    spec: &ProtocolSpec,
    r: &HeraldResponse,
    dark_b: f64,
    lambda: f64,
) -> Result<f64> {
    if r.q1 == 0.0 {
        return Err(Error::DivisionByZero("q1 = 0: no single-photon heralds"));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain {
            what: "pump strength lambda",
            value: lambda,
            domain: "(0, inf)",
        });
    }
    let t1 = tmin_single_photon(spec, dark_b);
    Ok(r.q2 / (2.0 * r.q1) * spec.xi() * lambda + t1 + t1 * r.q0 / (r.q1 * lambda))
}

/// Minimum transmission of a heralded source:
/// `T_min^(1) + sqrt(q0 q2)/q1 * T_min^(C)`.
pub fn tmin_heralded(spec: &ProtocolSpec, r: &HeraldResponse, dark_b: f64) -> Result<f64> {
    Ok(tmin_single_photon(spec, dark_b) + distance_factor(r)? * tmin_wcp(spec, dark_b).t_min)
}

/// Smallest transmission with a positive optimized key rate, by bisection in `ln T`.
pub fn tmin_numerical(
    spec: &ProtocolSpec,
    r: &HeraldResponse,
    dark_b: f64,
    cfg: &OptimizerConfig,
) -> Result<f64> {
    if !(dark_b > 0.0) {
        return Err(Error::Domain {
            what: "dark_b",
            value: dark_b,
            domain: "(0, 1)",
        });
    }
    let base = ChannelParams::new(1.0, dark_b)?;
    let (lo, hi) = TMIN_SEARCH;
    let mut failure = None;
    let mut optimized = |ln_t: f64| -> f64 {
        let ch = ChannelParams {
            transmission: ln_t.exp().min(1.0),
            ..base
        };
        match optimize_lambda(spec, r, &ch, cfg) {
            // zero counts as insecure
            Ok(res) => {
                if res.key_rate > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        }
    };
    let ln_tol = (1.0 + TMIN_REL_TOL).ln();
    let root = bisect(&mut optimized, lo.ln(), hi.ln(), ln_tol);
    if let Some(e) = failure {
        return Err(e);
    }
    let root = root.map_err(|_| Error::NoBracket { lo, hi })?;
    // the midpoint of the final bracket sits within the tolerance of the crossing
    Ok(root.exp())
}

/// One optimized point of a transmission scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub transmission: f64,
    pub result: OptimizationResult,
}

/// Independently optimized key rates over a transmission grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSeries {
    pub protocol: crate::protocol::Protocol,
    pub response: HeraldResponse,
    pub dark_b: f64,
    pub points: Vec<ScanPoint>,
}

impl ScanSeries {
    /// `(T, K)` for points with a secure optimum.
    pub fn secure_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .filter(|p| p.result.secure() && p.result.key_rate > 0.0)
            .map(|p| (p.transmission, p.result.key_rate))
    }
}

/// Optimizes every transmission of `t_grid` in parallel; output keeps grid order.
pub fn scan_key_rate(
    spec: &ProtocolSpec,
    r: &HeraldResponse,
    dark_b: f64,
    t_grid: &[f64],
    cfg: &OptimizerConfig,
) -> Result<ScanSeries> {
    if t_grid.is_empty() {
        return Err(Error::InsufficientPoints {
            needed: 1,
            found: 0,
        });
    }
    if let Some(&t) = t_grid.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::Domain {
            what: "transmission",
            value: t,
            domain: "(0, 1]",
        });
    }
    let increasing = t_grid.windows(2).all(|w| w[0] < w[1]);
    let decreasing = t_grid.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidParameter(
            "transmission grid must be strictly monotone".into(),
        ));
    }
    ChannelParams::new(1.0, dark_b)?;
    cfg.validate()?;

    let points = t_grid
        .par_iter()
        .map(|&t| {
            let ch = ChannelParams {
                transmission: t,
                dark_b,
            };
            optimize_lambda(spec, r, &ch, cfg).map(|result| ScanPoint {
                transmission: t,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ScanSeries {
        protocol: spec.protocol(),
        response: *r,
        dark_b,
        points,
    })
}

/// Fitted `K = prefactor * T^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub points: usize,
    pub window: (f64, f64),
}

/// Least-squares fit of `ln K` against `ln T` over `(T, K)` pairs with `K > 0`.
pub fn fit_log_log(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(t, k)| *t > 0.0 && *k > 0.0)
        .map(|(t, k)| (t.ln(), k.ln()))
        .unzip();
    let (slope, intercept) = linear_fit(&xs, &ys)?;
    Ok((slope, intercept.exp()))
}

/// Secure points of `series` inside `window` (default: top secure decade).
fn windowed_secure_points(
    series: &ScanSeries,
    window: Option<(f64, f64)>,
) -> Result<((f64, f64), Vec<(f64, f64)>)> {
    let secure: Vec<(f64, f64)> = series.secure_points().collect();
    let window = match window {
        Some(w) => w,
        None => {
            let top = secure.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            if top == f64::NEG_INFINITY {
                return Err(Error::InsufficientPoints {
                    needed: 3,
                    found: 0,
                });
            }
            (top / 10.0, top)
        }
    };
    let inside: Vec<(f64, f64)> = secure
        .into_iter()
        .filter(|(t, _)| *t >= window.0 * (1.0 - 1e-12) && *t <= window.1 * (1.0 + 1e-12))
        .collect();
    if inside.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            found: inside.len(),
        });
    }
    Ok((window, inside))
}

/// Power-law fit of the secure points of `series` inside `window`.
///
/// Without a window, the top decade of secure transmissions is used.
pub fn fit_power_law(series: &ScanSeries, window: Option<(f64, f64)>) -> Result<PowerLawFit> {
    let (window, inside) = windowed_secure_points(series, window)?;
    let (exponent, prefactor) = fit_log_log(&inside)?;
    Ok(PowerLawFit {
        exponent,
        prefactor,
        points: inside.len(),
        window,
    })
}

/// Least-squares prefactor of `K = c T^exponent` with the exponent held fixed.
pub fn fit_prefactor(
    series: &ScanSeries,
    exponent: f64,
    window: Option<(f64, f64)>,
) -> Result<PowerLawFit> {
    let (window, inside) = windowed_secure_points(series, window)?;
    let mean = inside
        .iter()
        .map(|(t, k)| k.ln() - exponent * t.ln())
        .sum::<f64>()
        / inside.len() as f64;
    Ok(PowerLawFit {
        exponent,
        prefactor: mean.exp(),
        points: inside.len(),
        window,
    })
}

/// `q1^2/q2`, with perfect multiphoton rejection mapped to `+inf`.
fn factor_or_unbounded(r: &HeraldResponse) -> f64 {
    match short_distance_factor(r) {
        Ok(f) => f,
        Err(_) if r.q1 > 0.0 => f64::INFINITY,
        Err(_) => 0.0,
    }
}

/// Stage count in `0..=n_max` maximizing `q1^2/q2`; ties go to fewer stages.
pub fn optimal_stage_count(eta_a: f64, eta_c: f64, dark_a: f64, n_max: u32) -> Result<u32> {
    let mut best = (0, f64::NEG_INFINITY);
    for n in 0..=n_max {
        let params = MultiplexedDetectorParams::new(n, eta_a, dark_a, eta_c)?;
        let f = factor_or_unbounded(&multiplexed_response(&params));
        if f > best.1 {
            best = (n, f);
        }
    }
    Ok(best.0)
}
