//! Run configuration: TOML file values overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use heralded_qkd::numeric::logspace;
use heralded_qkd::source_detector::MAX_ENUMERATED_STAGES;
use heralded_qkd::{
    brute_force_response, multiplexed_response, wcp_response, HeraldResponse,
    MultiplexedDetectorParams, OptimizerConfig, Protocol,
};
use serde::Deserialize;

use crate::args::{Common, Format, SourceKind};

pub const DEFAULT_ETA_A: f64 = 0.6;
pub const DEFAULT_ETA_C: f64 = 0.98;
pub const DEFAULT_DARK_A: f64 = 1e-6;
pub const DEFAULT_DARK_B: f64 = 1e-5;
pub const DEFAULT_STAGES: u32 = 3;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    protocol: ProtocolSection,
    #[serde(default)]
    source: SourceSection,
    #[serde(default)]
    channel: ChannelSection,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProtocolSection {
    name: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSection {
    kind: Option<SourceKind>,
    stages: Option<u32>,
    eta_a: Option<OneOrMany>,
    eta_c: Option<f64>,
    dark_a: Option<f64>,
    q0: Option<f64>,
    q1: Option<f64>,
    q2: Option<f64>,
    oracle: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    dark_b: Option<f64>,
    t: Option<f64>,
    t_min: Option<f64>,
    t_max: Option<f64>,
    points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    lambda_min: Option<f64>,
    lambda_max: Option<f64>,
    grid_points: Option<usize>,
    rel_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    format: Option<Format>,
    path: Option<PathBuf>,
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Where the heralding response comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Wcp,
    Tree(MultiplexedDetectorParams),
    Custom(HeraldResponse),
}

impl Source {
    pub fn kind(&self) -> &'static str {
        match self {
            Source::Wcp => "wcp",
            Source::Tree(p) if p.stages == 0 => "binary",
            Source::Tree(_) => "multiplexed",
            Source::Custom(_) => "custom",
        }
    }

    /// Closed-form response, or the enumerated one when `oracle` is set.
    pub fn response(&self, oracle: bool) -> Result<HeraldResponse> {
        Ok(match self {
            Source::Wcp => wcp_response(),
            Source::Custom(r) => *r,
            Source::Tree(p) if oracle => enumerated_response(p)?,
            Source::Tree(p) => multiplexed_response(p),
        })
    }
}

pub fn enumerated_response(p: &MultiplexedDetectorParams) -> Result<HeraldResponse> {
    let q = |n| brute_force_response(p, n);
    Ok(HeraldResponse::new(q(0)?, q(1)?, q(2)?)?)
}

/// Transmission settings before the grid is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transmissions {
    Single(f64),
    Range { lo: f64, hi: f64, points: usize },
}

impl Transmissions {
    pub fn grid(&self) -> Result<Vec<f64>> {
        match *self {
            Transmissions::Single(t) => {
                ensure!(t > 0.0 && t <= 1.0, "--t must lie in (0, 1], got {t}");
                Ok(vec![t])
            }
            Transmissions::Range { lo, hi, points } => {
                ensure!(
                    lo > 0.0 && lo < hi && hi <= 1.0,
                    "transmission range must satisfy 0 < t_min < t_max <= 1, got [{lo}, {hi}]"
                );
                ensure!(points >= 2, "--points must be at least 2, got {points}");
                Ok(logspace(lo, hi, points))
            }
        }
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub source: Source,
    /// Every requested heralding efficiency; `source` uses the first.
    pub eta_a: Vec<f64>,
    pub dark_b: f64,
    pub transmissions: Transmissions,
    pub optimizer: OptimizerConfig,
    pub oracle: bool,
    pub format: Format,
    pub output: Option<PathBuf>,
}

/// Default transmission range for commands that need one.
#[derive(Debug, Clone, Copy)]
pub struct RangeDefault {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

pub const SCAN_RANGE: RangeDefault = RangeDefault {
    lo: 1e-5,
    hi: 1e-1,
    points: 41,
};

impl RunConfig {
    pub fn resolve(cli: &Common, range: RangeDefault) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };

        let protocol_name = cli
            .protocol
            .clone()
            .or(file.protocol.name)
            .unwrap_or_else(|| "bb84".into());
        let protocol: Protocol = protocol_name.parse()?;

        let src = &file.source;
        let file_eta_a = src.eta_a.as_ref().map(|e| match e {
            OneOrMany::One(x) => vec![*x],
            OneOrMany::Many(v) => v.clone(),
        });
        let stages = cli.stages.or(src.stages);
        let eta_a = cli.eta_a.clone().or(file_eta_a);
        let eta_c = cli.eta_c.or(src.eta_c);
        let dark_a = cli.dark_a.or(src.dark_a);
        let q = [cli.q0.or(src.q0), cli.q1.or(src.q1), cli.q2.or(src.q2)];
        let oracle = cli.oracle || src.oracle.unwrap_or(false);

        let any_q = q.iter().any(Option::is_some);
        let kind = cli.source.or(src.kind).unwrap_or(if any_q {
            SourceKind::Custom
        } else if stages.is_some_and(|n| n > 0) {
            SourceKind::Multiplexed
        } else {
            SourceKind::Binary
        });

        let detector_fields = [
            ("--stages", stages.is_some()),
            ("--eta-a", eta_a.is_some()),
            ("--eta-c", eta_c.is_some()),
            ("--dark-a", dark_a.is_some()),
        ];
        let reject = |fields: &[(&str, bool)], what: &str| -> Result<()> {
            if let Some((name, _)) = fields.iter().find(|f| f.1) {
                bail!("{name} does not apply to a {what} source");
            }
            Ok(())
        };
        let q_fields = [("--q0/--q1/--q2", any_q)];
        match kind {
            SourceKind::Wcp => {
                reject(&detector_fields, "wcp")?;
                reject(&q_fields, "wcp")?;
            }
            SourceKind::Custom => reject(&detector_fields, "custom")?,
            SourceKind::Binary => {
                reject(&q_fields, "binary")?;
                if stages.is_some_and(|n| n != 0) {
                    bail!("--stages does not apply to a binary source (use --source multiplexed)");
                }
            }
            SourceKind::Multiplexed => reject(&q_fields, "multiplexed")?,
        }
        if oracle && matches!(kind, SourceKind::Wcp | SourceKind::Custom) {
            bail!("--oracle needs a binary or multiplexed source");
        }

        let eta_a = eta_a.unwrap_or_else(|| vec![DEFAULT_ETA_A]);
        ensure!(!eta_a.is_empty(), "--eta-a needs at least one value");
        let eta_c = eta_c.unwrap_or(DEFAULT_ETA_C);
        let dark_a = dark_a.unwrap_or(DEFAULT_DARK_A);
        let source = match kind {
            SourceKind::Wcp => Source::Wcp,
            SourceKind::Custom => {
                let [Some(q0), Some(q1), Some(q2)] = q else {
                    bail!("a custom source needs all of --q0, --q1 and --q2");
                };
                Source::Custom(HeraldResponse::new(q0, q1, q2)?)
            }
            SourceKind::Binary | SourceKind::Multiplexed => {
                let n = match kind {
                    SourceKind::Binary => 0,
                    _ => stages.unwrap_or(DEFAULT_STAGES),
                };
                Source::Tree(MultiplexedDetectorParams::new(n, eta_a[0], dark_a, eta_c)?)
            }
        };
        for &e in &eta_a {
            MultiplexedDetectorParams::new(0, e, dark_a, eta_c)?;
        }
        if oracle {
            if let Source::Tree(p) = source {
                ensure!(
                    p.stages <= MAX_ENUMERATED_STAGES,
                    "--oracle enumerates at most {MAX_ENUMERATED_STAGES} stages, got {}",
                    p.stages
                );
            }
        }

        let ch = &file.channel;
        let dark_b = cli.dark_b.or(ch.dark_b).unwrap_or(DEFAULT_DARK_B);
        ensure!(
            (0.0..1.0).contains(&dark_b),
            "--dark-b must lie in [0, 1), got {dark_b}"
        );

        let cli_range = cli.t_min.is_some() || cli.t_max.is_some() || cli.points.is_some();
        if cli.t.is_some() && cli_range {
            bail!("--t cannot be combined with --t-min/--t-max/--points");
        }
        let file_t = ch.t.filter(|_| !cli_range);
        let transmissions = if let Some(t) = cli.t {
            Transmissions::Single(t)
        } else if let Some(t) = file_t {
            if ch.t_min.is_some() || ch.t_max.is_some() || ch.points.is_some() {
                bail!("channel.t cannot be combined with channel.t_min/t_max/points");
            }
            Transmissions::Single(t)
        } else {
            Transmissions::Range {
                lo: cli.t_min.or(ch.t_min).unwrap_or(range.lo),
                hi: cli.t_max.or(ch.t_max).unwrap_or(range.hi),
                points: cli.points.or(ch.points).unwrap_or(range.points),
            }
        };

        let defaults = OptimizerConfig::default();
        let sv = &file.solver;
        let optimizer = OptimizerConfig {
            lambda_min: sv.lambda_min.unwrap_or(defaults.lambda_min),
            lambda_max: cli
                .lambda_max
                .or(sv.lambda_max)
                .unwrap_or(defaults.lambda_max),
            grid_points: sv.grid_points.unwrap_or(defaults.grid_points),
            rel_tol: sv.rel_tol.unwrap_or(defaults.rel_tol),
        };
        optimizer.validate()?;

        Ok(Self {
            protocol,
            source,
            eta_a,
            dark_b,
            transmissions,
            optimizer,
            oracle,
            format: cli.format.or(file.output.format).unwrap_or(Format::Csv),
            output: cli.output.clone().or(file.output.path),
        })
    }

    /// Heralding response used by the run.
    pub fn response(&self) -> Result<HeraldResponse> {
        self.source.response(self.oracle)
    }

    /// Rejects efficiency lists for commands that evaluate a single detector.
    pub fn single_eta_a(&self) -> Result<()> {
        ensure!(
            self.eta_a.len() == 1,
            "--eta-a takes a list only for compare-stages"
        );
        Ok(())
    }
}
