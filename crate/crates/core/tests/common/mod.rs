//! Invariant checks shared by the property tests and the acceptance harness.
//! Each check returns a short summary on success and a diagnostic on failure.

#![allow(dead_code)]

use heralded_qkd::analysis::linearized_transmission_bound;
use heralded_qkd::numeric::logspace;
use heralded_qkd::protocol::key_positivity_contour;
use heralded_qkd::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub type Check = std::result::Result<String, String>;

pub const PROTOCOLS: [Protocol; 2] = [Protocol::Bb84, Protocol::Sarg04];

pub fn tree(stages: u32, eta_a: f64, dark_a: f64, eta_c: f64) -> HeraldResponse {
    multiplexed_response(&MultiplexedDetectorParams::new(stages, eta_a, dark_a, eta_c).unwrap())
}

/// Fig. 3 detector: couplers at 98 %, heralding dark counts 1e-6.
pub fn fig3_tree(stages: u32, eta_a: f64) -> HeraldResponse {
    tree(stages, eta_a, 1e-6, 0.98)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Closed-form detector response against enumeration over the full grid.
pub fn detector_oracle_grid() -> Check {
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for stages in 0..=4 {
        for eta_a in [0.2, 0.5, 0.8, 1.0] {
            for dark_a in [0.0, 1e-6, 1e-3, 0.1] {
                for eta_c in [0.9, 0.98, 1.0] {
                    let p = MultiplexedDetectorParams::new(stages, eta_a, dark_a, eta_c).unwrap();
                    let closed = multiplexed_response(&p).as_array();
                    for (n, q) in closed.iter().enumerate() {
                        let b = brute_force_response(&p, n as u32).map_err(|e| e.to_string())?;
                        worst = worst.max((b - q).abs());
                        cases += 1;
                    }
                }
            }
        }
    }
    ensure(cases >= 720, || format!("only {cases} cases"))?;
    ensure(worst < 1e-12, || format!("max |delta| = {worst:e}"))?;
    Ok(format!("{cases} cases, max |delta| = {worst:.2e}"))
}

pub fn entropy_symmetry_and_shape() -> Check {
    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let mut worst: f64 = 0.0;
    for &x in &grid {
        let d = binary_entropy(x).unwrap() - binary_entropy(1.0 - x).unwrap();
        worst = worst.max(d.abs());
    }
    ensure(worst < 1e-12, || format!("symmetry defect {worst:e}"))?;
    for w in grid.windows(3) {
        let (a, b, c) = (
            binary_entropy(w[0]).unwrap(),
            binary_entropy(w[1]).unwrap(),
            binary_entropy(w[2]).unwrap(),
        );
        ensure(b >= 0.5 * (a + c) - 1e-15, || {
            format!("not concave at {}", w[1])
        })?;
    }
    let max = grid
        .iter()
        .copied()
        .max_by(|a, b| {
            binary_entropy(*a)
                .unwrap()
                .total_cmp(&binary_entropy(*b).unwrap())
        })
        .unwrap();
    ensure(max == 0.5, || format!("maximum at {max}"))?;
    Ok(format!("symmetry defect {worst:.1e}, concave, max at 1/2"))
}

/// Checks that SARG04 single-photon information is nondecreasing on `[0, q_max]`.
pub fn sarg04_single_monotone(q_max: f64) -> Check {
    let spec = Protocol::Sarg04.spec();
    let grid: Vec<f64> = (0..1000).map(|i| q_max * i as f64 / 999.0).collect();
    let values: Vec<f64> = grid
        .iter()
        .map(|&q| spec.eve_info_single(q).unwrap())
        .collect();
    for (i, w) in values.windows(2).enumerate() {
        ensure(w[1] >= w[0], || {
            format!(
                "decreases at Q = {:.4} ({:.6} -> {:.6})",
                grid[i + 1],
                w[0],
                w[1]
            )
        })?;
    }
    Ok(format!("nondecreasing on 1000 points of [0, {q_max}]"))
}

/// The SARG04 information function is continuous at both ends of its domain,
/// peaks at exactly one bit at `Q = 1/3` and falls beyond it.
pub fn sarg04_single_shape() -> Check {
    let spec = Protocol::Sarg04.spec();
    let near_zero = spec.eve_info_single(1e-15).unwrap();
    ensure(near_zero.abs() < 1e-12, || format!("I(0+) = {near_zero}"))?;
    let a = spec.eve_info_single(0.5 - 1e-9).unwrap();
    let b = spec.eve_info_single(0.5 - 1e-12).unwrap();
    ensure((a - b).abs() < 1e-6, || {
        format!("no limit at 1/2-: {a} vs {b}")
    })?;
    let peak = spec.eve_info_single(1.0 / 3.0).unwrap();
    ensure((peak - 1.0).abs() < 1e-15, || format!("I(1/3) = {peak}"))?;
    let tail: Vec<f64> = (0..100)
        .map(|i| {
            spec.eve_info_single(1.0 / 3.0 + (0.49 - 1.0 / 3.0) * i as f64 / 99.0)
                .unwrap()
        })
        .collect();
    ensure(tail.windows(2).all(|w| w[1] < w[0]), || {
        "not decreasing above 1/3".into()
    })?;
    Ok(format!("I(1/3) = 1, decreasing above, I(1/2-) = {b:.6}"))
}

pub fn threshold_residuals() -> Check {
    let mut out = Vec::new();
    for p in PROTOCOLS {
        let spec = p.spec();
        let q = solve_qber_threshold(spec).map_err(|e| e.to_string())?;
        let res = mutual_info_ab(q).unwrap() - spec.eve_info_single(q).unwrap();
        ensure(res.abs() < 1e-9, || format!("{p}: residual {res:e}"))?;
        out.push(format!("{p} {res:.1e}"));
    }
    Ok(format!("residuals {}", out.join(", ")))
}

pub fn xi_reproduces_contour() -> Check {
    let mut worst = [0.0f64; 2];
    for (k, (p, tol)) in [(Protocol::Bb84, 0.01), (Protocol::Sarg04, 0.02)]
        .into_iter()
        .enumerate()
    {
        let spec = p.spec();
        for y in [0.999, 0.99] {
            let exact = key_positivity_contour(spec, y).map_err(|e| e.to_string())?;
            let linear = spec.linearized_qber_bound(y);
            let rel = (linear / exact - 1.0).abs();
            worst[k] = worst[k].max(rel);
            ensure(rel < tol, || format!("{p} y={y}: {linear} vs {exact}"))?;
        }
    }
    Ok(format!(
        "worst relative error bb84 {:.2e}, sarg04 {:.2e}",
        worst[0], worst[1]
    ))
}

pub fn bb84_pns_always_applicable() -> Check {
    let spec = Protocol::Bb84.spec();
    let mut count = 0;
    for i in 1..=100 {
        let y = i as f64 / 100.0;
        for j in 0..=100 {
            let q = 0.5 * y * j as f64 / 100.0;
            ensure(spec.pns_applicable(q, y), || {
                format!("false at Q={q}, y={y}")
            })?;
            count += 1;
        }
    }
    Ok(format!("{count} points"))
}

pub fn detector_structure() -> Check {
    // q0 does not depend on efficiencies
    for stages in 0..=4 {
        for dark_a in [1e-6, 1e-3] {
            let reference = tree(stages, 0.5, dark_a, 0.9).q0;
            for eta_a in [0.2, 0.9] {
                for eta_c in [0.95, 1.0] {
                    let q0 = tree(stages, eta_a, dark_a, eta_c).q0;
                    ensure(q0 == reference, || format!("q0 varies at N={stages}"))?;
                }
            }
        }
    }
    // no dark counts: q0 = 0 and the compact ratio holds
    for stages in 0..=6 {
        for eta_a in [0.3, 0.6, 0.9, 1.0] {
            for eta_c in [0.9, 0.98, 1.0] {
                let r = tree(stages, eta_a, 0.0, eta_c);
                ensure(r.q0 == 0.0, || "q0 != 0 without dark counts".into())?;
                let eta = eta_a * eta_c.powi(stages as i32);
                let compact = 1.0 / (2.0 / eta - 2.0 + 0.5f64.powi(stages as i32));
                let f = short_distance_factor(&r).unwrap();
                ensure((f - compact).abs() < 1e-12, || {
                    format!("ratio {f} vs {compact}")
                })?;
            }
        }
    }
    // single stage-free detector
    for eta_a in [0.2, 0.7] {
        for d in [0.0, 1e-4, 0.05] {
            let r = tree(0, eta_a, d, 0.5);
            let binary = [
                d,
                d * (1.0 - eta_a) + eta_a,
                d * (1.0 - eta_a).powi(2) + 2.0 * eta_a * (1.0 - eta_a) + eta_a * eta_a,
            ];
            for (a, b) in r.as_array().iter().zip(binary) {
                ensure((a - b).abs() < 1e-15, || {
                    format!("binary formula {a} vs {b}")
                })?;
            }
        }
    }
    // figure of merit grows with efficiency
    for stages in 0..=5 {
        let values: Vec<f64> = (1..=50)
            .map(|i| short_distance_factor(&tree(stages, i as f64 / 50.0, 0.0, 0.98)).unwrap())
            .collect();
        ensure(values.windows(2).all(|w| w[1] > w[0]), || {
            format!("not increasing at N={stages}")
        })?;
    }
    Ok("q0 independence, d_A=0 ratio, N=0 formulas, monotone q1^2/q2".into())
}

pub fn renormalized_identity(draws: usize, seed: u64) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut valid = 0;
    for _ in 0..draws {
        let p = PROTOCOLS[rng.gen_range(0..2)];
        let spec = p.spec();
        let r = match rng.gen_range(0..3) {
            0 => wcp_response(),
            1 => tree(
                0,
                rng.gen_range(0.2..1.0),
                10f64.powf(rng.gen_range(-7.0..-3.0)),
                1.0,
            ),
            _ => tree(
                rng.gen_range(1..5),
                rng.gen_range(0.2..1.0),
                10f64.powf(rng.gen_range(-7.0..-3.0)),
                0.98,
            ),
        };
        let lambda = 10f64.powf(rng.gen_range(-5.0..0.0));
        let ch = ChannelParams::new(
            10f64.powf(rng.gen_range(-5.0..0.0)),
            10f64.powf(rng.gen_range(-7.0..-3.0)),
        )
        .unwrap();
        let rep = key_rate(spec, &poisson_pair_stats(lambda).unwrap(), &r, &ch).unwrap();
        ensure(rep.qber <= 0.5, || format!("Q = {} > 1/2", rep.qber))?;
        if let Some(renorm) = renormalized_key_rate(spec, rep.qber, rep.y) {
            let k = rep.key_rate.unwrap();
            worst = worst.max((k - rep.p_exp * renorm).abs());
            valid += 1;
        }
    }
    ensure(worst < 1e-12, || format!("|K - p_exp K'| = {worst:e}"))?;
    Ok(format!(
        "{valid}/{draws} valid draws, max |delta| = {worst:.1e}"
    ))
}

/// Linearized bound agrees in sign with the exact key rate away from the boundary.
pub fn linearized_bound_sign() -> Check {
    let mut checked = 0;
    for p in PROTOCOLS {
        let spec = p.spec();
        for i in 0..=50 {
            let y = 0.95 + 0.05 * i as f64 / 50.0;
            let boundary = spec.linearized_qber_bound(y);
            for j in 0..=60 {
                let q = boundary * (0.7 + 0.6 * j as f64 / 60.0);
                if (q / boundary - 1.0).abs() < 0.02 {
                    continue;
                }
                let Some(k) = renormalized_key_rate(spec, q, y) else {
                    continue;
                };
                let predicted = boundary - q;
                ensure(k.signum() == predicted.signum(), || {
                    format!("{p}: sign mismatch at Q={q}, y={y} (K'={k})")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} points outside the 2% band"))
}

pub fn wcp_rate_increasing_in_t() -> Check {
    let spec = Protocol::Bb84.spec();
    // y stays positive only while lambda is small against T
    for lambda in [1e-4, 1e-3, 5e-3] {
        let stats = poisson_pair_stats(lambda).unwrap();
        let mut last = f64::NEG_INFINITY;
        for t in logspace(1e-2, 0.3, 60) {
            let ch = ChannelParams::new(t, 0.0).unwrap();
            let k = key_rate(spec, &stats, &wcp_response(), &ch)
                .unwrap()
                .key_rate
                .unwrap();
            ensure(k >= 0.0 && k > last, || {
                format!("lambda={lambda}, T={t}: K={k}")
            })?;
            last = k;
        }
    }
    Ok("nonnegative and increasing".into())
}

pub fn maximizer_property(runs: usize, probes: usize, seed: u64) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    let cfg = OptimizerConfig::default();
    let mut violations = 0;
    let mut first = None;
    for _ in 0..runs {
        let spec = PROTOCOLS[rng.gen_range(0..2)].spec();
        let r = match rng.gen_range(0..3) {
            0 => wcp_response(),
            1 => fig3_tree(0, rng.gen_range(0.3..0.9)),
            _ => fig3_tree(rng.gen_range(1..5), rng.gen_range(0.3..0.9)),
        };
        let ch = ChannelParams::new(10f64.powf(rng.gen_range(-4.0..-0.5)), 1e-5).unwrap();
        let best = optimize_lambda(spec, &r, &ch, &cfg).map_err(|e| e.to_string())?;
        for _ in 0..probes {
            let lambda = 10f64.powf(rng.gen_range(-8.0..0.0));
            let rep = key_rate(spec, &poisson_pair_stats(lambda).unwrap(), &r, &ch);
            let k = rep.map_or(f64::NEG_INFINITY, |r| r.score());
            if k > best.key_rate + 1e-12 * best.key_rate.abs().max(1e-300) {
                violations += 1;
                first.get_or_insert_with(|| {
                    format!(
                        "{} {r:?} T={}: K({lambda}) = {k} > K({}) = {}",
                        spec.protocol(),
                        ch.transmission,
                        best.lambda_opt,
                        best.key_rate
                    )
                });
            }
        }
    }
    ensure(violations == 0, || {
        format!(
            "{violations} probes beat the optimizer, first: {}",
            first.unwrap_or_default()
        )
    })?;
    Ok(format!(
        "{runs} runs x {probes} probes, no probe exceeded the optimum"
    ))
}

pub fn linearized_bound_at_tmin() -> Check {
    let mut worst: f64 = 0.0;
    for p in PROTOCOLS {
        let spec = p.spec();
        for stages in [0, 2, 3, 4] {
            for eta_a in [0.4, 0.6, 0.8] {
                for dark_a in [1e-7, 1e-6, 1e-5] {
                    for dark_b in [1e-6, 1e-5] {
                        let r = tree(stages, eta_a, dark_a, 0.98);
                        let t = tmin_heralded(spec, &r, dark_b).unwrap();
                        let lambda = lambda_opt_heralded(spec, &r, dark_b).value();
                        let rhs = linearized_transmission_bound(spec, &r, dark_b, lambda).unwrap();
                        worst = worst.max((rhs / t - 1.0).abs());
                    }
                }
            }
        }
    }
    ensure(worst < 0.01, || format!("relative gap {worst:e}"))?;
    Ok(format!("max relative gap {worst:.1e}"))
}

/// Optimized key rate without dark counts against the `T^2` approximation,
/// wherever the short-distance pump strength stays below `lambda_cap`.
pub fn short_distance_consistency(lambda_cap: f64) -> Check {
    let cfg = OptimizerConfig::default();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for p in PROTOCOLS {
        let spec = p.spec();
        for r in [
            wcp_response(),
            fig3_tree(0, 0.6),
            fig3_tree(3, 0.6),
            fig3_tree(4, 0.8),
        ] {
            for t in logspace(1e-4, 0.1, 25) {
                if short_distance_lambda(spec, &r, t).unwrap().value >= lambda_cap {
                    continue;
                }
                let ch = ChannelParams::new(t, 0.0).unwrap();
                let k = optimize_lambda(spec, &r, &ch, &cfg).unwrap().key_rate;
                let approx = short_distance_approx_rate(spec, &r, t).unwrap();
                let rel = (k / approx - 1.0).abs();
                worst = worst.max(rel);
                ensure(rel < 0.05, || format!("{p} T={t}: {k} vs {approx}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} points, worst {:.2}%", 100.0 * worst))
}

pub fn tmin_ordering() -> Check {
    let mut checked = 0;
    let steps = [0.0, 1e-6, 1e-3, 0.1, 0.5, 1.0];
    for p in PROTOCOLS {
        let spec = p.spec();
        for &q0 in &steps {
            for &q1 in &steps[1..] {
                for &q2 in &steps {
                    let r = HeraldResponse::new(q0, q1, q2).unwrap();
                    if distance_factor(&r).unwrap() > 1.0 {
                        continue;
                    }
                    for dark_b in [1e-6, 1e-5, 1e-4] {
                        let t1 = tmin_single_photon(spec, dark_b);
                        let th = tmin_heralded(spec, &r, dark_b).unwrap();
                        let tc = tmin_wcp(spec, dark_b).t_min;
                        ensure(t1 <= th && th <= tc + t1, || {
                            format!("{p} {r:?}: {t1} {th} {tc}")
                        })?;
                        checked += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{checked} responses"))
}

/// Closed-form and numerical minimum transmission over random detectors.
pub fn tmin_oracle_random(draws: usize, seed: u64) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    let cfg = OptimizerConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let eta_a = rng.gen_range(0.3..0.9);
        let dark_a = 10f64.powf(rng.gen_range(-7.0..-5.0));
        let dark_b = 10f64.powf(rng.gen_range(-6.0..-4.0));
        let stages = rng.gen_range(0..=4);
        let r = tree(stages, eta_a, dark_a, 0.98);
        for p in PROTOCOLS {
            let spec = p.spec();
            let closed = tmin_heralded(spec, &r, dark_b).unwrap();
            let numeric = tmin_numerical(spec, &r, dark_b, &cfg).map_err(|e| e.to_string())?;
            let rel = (closed / numeric - 1.0).abs();
            worst = worst.max(rel);
            ensure(rel < 0.15, || {
                format!("{p} N={stages} eta_a={eta_a:.3} d_A={dark_a:.2e} d_B={dark_b:.2e}: {closed} vs {numeric}")
            })?;
        }
    }
    Ok(format!(
        "{draws} draws x 2 protocols, worst {:.2}%",
        100.0 * worst
    ))
}
