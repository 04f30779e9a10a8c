//! One function per subcommand, each building an output [`Document`].

use anyhow::{bail, ensure, Result};
use heralded_qkd::analysis::PumpOptimum;
use heralded_qkd::{
    advantage_threshold, distance_factor, key_rate, lambda_opt_heralded, multiplexed_response,
    optimal_stage_count, optimize_lambda, poisson_pair_stats, renormalized_key_rate, scan_key_rate,
    short_distance_approx_rate, short_distance_factor, tmin_heralded, tmin_numerical,
    tmin_single_photon, tmin_wcp, ChannelParams, HeraldResponse, KeyRateReport, ModelStatus,
    MultiplexedDetectorParams, OptimizationResult, ProtocolSpec,
};

use crate::config::{enumerated_response, RunConfig, Source, Transmissions};
use crate::output::{Cell, Document, Table, INSECURE, INVALID, NONE};

pub const SCAN_COLUMNS: [&str; 8] = [
    "T",
    "lambda_opt",
    "p_exp",
    "qber",
    "y",
    "key_rate",
    "secure",
    "pns_valid",
];

fn num_or_invalid<E>(x: std::result::Result<f64, E>) -> Cell {
    x.map_or_else(|_| Cell::text(INVALID), Cell::Num)
}

fn echo_config(doc: &mut Document, cfg: &RunConfig, r: &HeraldResponse) {
    doc.meta("protocol", cfg.protocol.name());
    doc.meta("source", cfg.source.kind());
    if let Source::Tree(p) = cfg.source {
        doc.meta("stages", p.stages);
        doc.meta("eta_a", p.eta_a);
        doc.meta("eta_c", p.eta_c);
        doc.meta("dark_a", p.dark_a);
    }
    doc.meta("q0", r.q0);
    doc.meta("q1", r.q1);
    doc.meta("q2", r.q2);
    doc.meta("dark_b", cfg.dark_b);
    doc.meta("lambda_min", cfg.optimizer.lambda_min);
    doc.meta("lambda_max", cfg.optimizer.lambda_max);
    doc.meta("grid_points", Cell::Int(cfg.optimizer.grid_points as u64));
    doc.meta("rel_tol", cfg.optimizer.rel_tol);
    doc.meta("oracle", cfg.oracle);
    if ChannelParams::new(1.0, cfg.dark_b).is_ok_and(|c| c.dark_b_advisory()) {
        doc.meta(
            "advisory",
            "dark_b exceeds 1e-2; first-order click model is suspect",
        );
    }
}

fn key_cell(report: &KeyRateReport) -> Cell {
    match (report.status, report.key_rate) {
        (ModelStatus::Valid, Some(_)) if !report.secure => Cell::text(INSECURE),
        (ModelStatus::Valid, Some(k)) => Cell::Num(k),
        _ => Cell::text(INVALID),
    }
}

/// Scan-format row for one transmission and pump strength.
fn report_row(t: f64, lambda: f64, report: Option<&KeyRateReport>) -> Vec<Cell> {
    match report {
        Some(rep) => vec![
            t.into(),
            lambda.into(),
            rep.p_exp.into(),
            rep.qber.into(),
            rep.y.into(),
            key_cell(rep),
            rep.secure.into(),
            rep.pns_valid.into(),
        ],
        None => vec![
            t.into(),
            lambda.into(),
            Cell::text(INVALID),
            Cell::text(INVALID),
            Cell::text(INVALID),
            Cell::text(INVALID),
            false.into(),
            false.into(),
        ],
    }
}

fn optimized_row(t: f64, res: &OptimizationResult) -> Vec<Cell> {
    report_row(t, res.lambda_opt, res.report.as_ref())
}

fn pump_cell(p: PumpOptimum) -> Cell {
    match p {
        PumpOptimum::Indeterminate => Cell::text(INVALID),
        other => Cell::Num(other.value()),
    }
}

fn pump_regime(p: PumpOptimum) -> &'static str {
    match p {
        PumpOptimum::Interior(_) => "interior",
        PumpOptimum::Vanishing => "vanishing",
        PumpOptimum::Unbounded => "unbounded",
        PumpOptimum::Indeterminate => "indeterminate",
    }
}

pub fn threshold(cfg: &RunConfig) -> Result<Document> {
    let spec = cfg.protocol.spec();
    let mut doc = Document::new(vec![
        "protocol",
        "q_threshold",
        "xi",
        "i_ae_two",
        "p_sift",
        "pns_ratio_limit",
    ]);
    doc.row(vec![
        cfg.protocol.name().into(),
        spec.q_threshold().into(),
        spec.xi().into(),
        spec.eve_info_two().into(),
        spec.p_sift().into(),
        spec.pns_ratio_limit().into(),
    ]);
    Ok(doc)
}

pub fn detector(cfg: &RunConfig) -> Result<Document> {
    cfg.single_eta_a()?;
    let r = cfg.source.response(false)?;
    let mut columns = vec![
        "q0",
        "q1",
        "q2",
        "short_distance_factor",
        "distance_factor",
        "advantage_threshold",
    ];
    let mut row: Vec<Cell> = vec![
        r.q0.into(),
        r.q1.into(),
        r.q2.into(),
        match short_distance_factor(&r) {
            Ok(f) => f.into(),
            Err(_) if r.q1 > 0.0 => f64::INFINITY.into(),
            Err(_) => Cell::text(INVALID),
        },
        num_or_invalid(distance_factor(&r)),
        match cfg.source {
            Source::Tree(p) => advantage_threshold(p.stages).into(),
            _ => Cell::text(NONE),
        },
    ];
    if cfg.oracle {
        let Source::Tree(p) = cfg.source else {
            bail!("--oracle needs a binary or multiplexed source");
        };
        let e = enumerated_response(&p)?;
        let delta = r
            .as_array()
            .iter()
            .zip(e.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        columns.extend(["oracle_q0", "oracle_q1", "oracle_q2", "max_abs_delta"]);
        row.extend([e.q0.into(), e.q1.into(), e.q2.into(), delta.into()]);
    }
    let mut doc = Document::new(columns);
    echo_config(&mut doc, cfg, &r);
    doc.row(row);
    Ok(doc)
}

pub fn keyrate(cfg: &RunConfig, lambda: Option<f64>) -> Result<Document> {
    cfg.single_eta_a()?;
    let Transmissions::Single(t) = cfg.transmissions else {
        bail!("keyrate needs a single transmission (--t)");
    };
    cfg.transmissions.grid()?;
    let spec = cfg.protocol.spec();
    let r = cfg.response()?;
    let ch = ChannelParams::new(t, cfg.dark_b)?;
    let mut doc = Document::new(SCAN_COLUMNS.to_vec());
    echo_config(&mut doc, cfg, &r);
    match lambda {
        Some(l) => {
            let stats = poisson_pair_stats(l)?;
            if l > heralded_qkd::keyrate::LAMBDA_ADVISORY {
                doc.meta(
                    "advisory",
                    "lambda exceeds 1; perturbative pair statistics are suspect",
                );
            }
            // no clicks at all (lambda = 0 without dark counts) is a data marker
            let report = key_rate(spec, &stats, &r, &ch).ok();
            doc.row(report_row(t, l, report.as_ref()));
        }
        None => {
            let res = optimize_lambda(spec, &r, &ch, &cfg.optimizer)?;
            doc.meta("converged", res.converged);
            doc.row(optimized_row(t, &res));
        }
    }
    Ok(doc)
}

/// Closed-form and numerical minimum transmissions as `(name, cell)` pairs.
fn tmin_values(
    spec: &ProtocolSpec,
    cfg: &RunConfig,
    r: &HeraldResponse,
) -> Vec<(&'static str, Cell)> {
    let wcp = tmin_wcp(spec, cfg.dark_b);
    let pump = lambda_opt_heralded(spec, r, cfg.dark_b);
    let closed = tmin_heralded(spec, r, cfg.dark_b);
    let numeric = if cfg.dark_b > 0.0 {
        tmin_numerical(spec, r, cfg.dark_b, &cfg.optimizer).ok()
    } else {
        None
    };
    let gap = match (&closed, numeric) {
        (Ok(c), Some(n)) => Cell::Num(c / n - 1.0),
        _ => Cell::text(INVALID),
    };
    vec![
        (
            "tmin_single_photon",
            tmin_single_photon(spec, cfg.dark_b).into(),
        ),
        ("tmin_wcp", wcp.t_min.into()),
        ("lambda_opt_wcp", wcp.lambda_opt.into()),
        ("tmin_heralded", num_or_invalid(closed)),
        ("lambda_opt_heralded", pump_cell(pump)),
        ("lambda_opt_heralded_regime", pump_regime(pump).into()),
        (
            "tmin_numerical",
            numeric.map_or(Cell::text(INVALID), Cell::Num),
        ),
        ("tmin_relative_gap", gap),
    ]
}

pub fn scan(cfg: &RunConfig) -> Result<Document> {
    cfg.single_eta_a()?;
    let grid = cfg.transmissions.grid()?;
    let spec = cfg.protocol.spec();
    let r = cfg.response()?;
    let series = scan_key_rate(spec, &r, cfg.dark_b, &grid, &cfg.optimizer)?;

    let mut doc = Document::new(SCAN_COLUMNS.to_vec());
    echo_config(&mut doc, cfg, &r);
    for (name, cell) in tmin_values(spec, cfg, &r) {
        doc.meta(name, cell);
    }
    for p in &series.points {
        doc.row(optimized_row(p.transmission, &p.result));
    }
    let approx = Table {
        columns: vec!["T", "key_rate"],
        rows: grid
            .iter()
            .map(|&t| {
                vec![
                    t.into(),
                    num_or_invalid(short_distance_approx_rate(spec, &r, t)),
                ]
            })
            .collect(),
    };
    doc.overlays.push(("approx_short_distance", approx));
    Ok(doc)
}

pub fn tmin(cfg: &RunConfig) -> Result<Document> {
    cfg.single_eta_a()?;
    let spec = cfg.protocol.spec();
    let r = cfg.response()?;
    let values = tmin_values(spec, cfg, &r);
    let mut doc = Document::new(values.iter().map(|v| v.0).collect());
    echo_config(&mut doc, cfg, &r);
    doc.row(values.into_iter().map(|v| v.1).collect());
    Ok(doc)
}

pub fn contour(cfg: &RunConfig, q_max: f64, q_points: usize, y_points: usize) -> Result<Document> {
    ensure!(
        q_max > 0.0 && q_max <= 0.25,
        "--q-max must lie in (0, 0.25], got {q_max}"
    );
    ensure!(q_points >= 2, "--q-points must be at least 2");
    ensure!(y_points >= 1, "--y-points must be at least 1");
    let spec = cfg.protocol.spec();
    let value = |q: f64, y: f64| -> Cell {
        renormalized_key_rate(spec, q, y).map_or(Cell::text(INVALID), Cell::Num)
    };
    let ys: Vec<f64> = (1..=y_points).map(|j| j as f64 / y_points as f64).collect();

    let mut doc = Document::new(vec!["series", "Q", "y", "value"]);
    doc.meta("protocol", cfg.protocol.name());
    doc.meta("q_threshold", spec.q_threshold());
    doc.meta("xi", spec.xi());
    doc.meta("pns_ratio_limit", spec.pns_ratio_limit());
    for &y in &ys {
        for i in 0..q_points {
            let q = q_max * i as f64 / (q_points - 1) as f64;
            doc.row(vec!["renormalized".into(), q.into(), y.into(), value(q, y)]);
        }
    }
    for &y in &ys {
        let q = spec.linearized_qber_bound(y);
        if (0.0..=q_max).contains(&q) {
            doc.row(vec![
                "linearized_bound".into(),
                q.into(),
                y.into(),
                value(q, y),
            ]);
        }
    }
    if spec.pns_ratio_limit() < 0.5 {
        for &y in &ys {
            let q = spec.pns_ratio_limit() * y;
            if q <= q_max {
                doc.row(vec!["pns_boundary".into(), q.into(), y.into(), value(q, y)]);
            }
        }
    }
    Ok(doc)
}

/// Compare-stages uses its own default window: the short-distance decade.
pub const COMPARE_RANGE: crate::config::RangeDefault = crate::config::RangeDefault {
    lo: 1e-3,
    hi: 1e-2,
    points: 11,
};

pub fn compare_stages(cfg: &RunConfig, n_max: u32, fit: bool) -> Result<Document> {
    let Source::Tree(base) = cfg.source else {
        bail!("compare-stages compares heralding detectors; use a binary or multiplexed source");
    };
    let spec = cfg.protocol.spec();
    let grid = if fit {
        Some(cfg.transmissions.grid()?)
    } else {
        None
    };
    if cfg.oracle {
        ensure!(
            n_max <= heralded_qkd::source_detector::MAX_ENUMERATED_STAGES,
            "--oracle enumerates at most {} stages",
            heralded_qkd::source_detector::MAX_ENUMERATED_STAGES
        );
    }

    let mut doc = Document::new(vec![
        "eta_a",
        "stages",
        "analytic_ratio",
        "is_optimal",
        "fitted_ratio",
    ]);
    doc.meta("protocol", cfg.protocol.name());
    doc.meta("eta_c", base.eta_c);
    doc.meta("dark_a", base.dark_a);
    doc.meta("dark_b", cfg.dark_b);
    doc.meta("n_max", n_max);
    doc.meta("oracle", cfg.oracle);
    if let Some(g) = &grid {
        doc.meta("fit_t_min", g[0]);
        doc.meta("fit_t_max", g[g.len() - 1]);
        doc.meta("fit_points", Cell::Int(g.len() as u64));
        doc.meta("fit_model", "K = c T^2");
    }

    for &eta_a in &cfg.eta_a {
        let response = |n: u32| -> Result<HeraldResponse> {
            let p = MultiplexedDetectorParams::new(n, eta_a, base.dark_a, base.eta_c)?;
            Ok(if cfg.oracle {
                enumerated_response(&p)?
            } else {
                multiplexed_response(&p)
            })
        };
        let best = optimal_stage_count(eta_a, base.eta_c, base.dark_a, n_max)?;
        let factor = |r: &HeraldResponse| short_distance_factor(r).unwrap_or(f64::INFINITY);
        let binary = response(0)?;
        let prefactor = |r: &HeraldResponse| -> Option<f64> {
            let g = grid.as_ref()?;
            let series = scan_key_rate(spec, r, cfg.dark_b, g, &cfg.optimizer).ok()?;
            heralded_qkd::fit_prefactor(&series, 2.0, Some((g[0], g[g.len() - 1])))
                .ok()
                .map(|f| f.prefactor)
        };
        let binary_prefactor = prefactor(&binary);
        for n in 0..=n_max {
            let r = response(n)?;
            let fitted = if fit {
                match (prefactor(&r), binary_prefactor) {
                    (Some(a), Some(b)) => Cell::Num(a / b),
                    _ => Cell::text(INVALID),
                }
            } else {
                Cell::text(NONE)
            };
            doc.row(vec![
                eta_a.into(),
                n.into(),
                (factor(&r) / factor(&binary)).into(),
                (n == best).into(),
                fitted,
            ]);
        }
    }
    Ok(doc)
}
