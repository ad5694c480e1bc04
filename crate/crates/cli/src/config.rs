//! Run configuration: defaults, file form, flag overrides.
//!
//! Precedence is flags over file over defaults. The resolved configuration
//! is echoed into every report so artifacts are self-describing; output
//! locations are deliberately NOT part of it — two runs of the same
//! configuration into different directories must produce byte-identical
//! payloads.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sigma_pvi::domain::{GridSpec, Grading, Parameters};
use sigma_pvi::picard::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use sigma_pvi::{Cplx, Real};

/// Default inner edge of the grid.
pub const DEFAULT_RHO: Real = 50.0;
/// Default outer edge, as a multiple of the inner edge.
pub const DEFAULT_SPAN: Real = 1.0e4;
/// Default node count.
pub const DEFAULT_NODES: usize = 4096;
/// Default start modulus of the inward oracle sweep.
pub const DEFAULT_ORACLE_START: Real = 1.0e6;
/// Default number of random pairs for the ball certificate.
pub const DEFAULT_SAMPLES: usize = 8;

/// A fully resolved run. Everything a solve needs, and nothing about where
/// its artifacts go.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub parameters: Parameters,
    pub grid: GridSpec,
    pub tol: Real,
    pub max_iter: usize,
    pub seed: u64,
    /// Start modulus for the independent inward integration.
    pub oracle_start: Real,
    /// Random pairs drawn when certifying the ball.
    pub samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            parameters: Parameters::real(1.0, 1.0, 1.0, 1.0).expect("default parameters"),
            grid: GridSpec {
                rho: DEFAULT_RHO,
                theta: 0.0,
                t_max: DEFAULT_SPAN * DEFAULT_RHO,
                n: DEFAULT_NODES,
                grading: Grading::Geometric,
                half_width: std::f64::consts::FRAC_PI_4,
            },
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
            oracle_start: DEFAULT_ORACLE_START,
            samples: DEFAULT_SAMPLES,
        }
    }
}

/// The file form: every field optional, unknown keys rejected (a typo in a
/// config is bad usage, not a silent default).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub parameters: Option<Parameters>,
    pub grid: Option<GridSpec>,
    pub tol: Option<Real>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub oracle_start: Option<Real>,
    pub samples: Option<usize>,
    /// Output directory; overridden by `--out`, never echoed into reports.
    pub out_dir: Option<PathBuf>,
}

/// Flag-level overrides (the global CLI flags that shadow file values).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tol: Option<Real>,
    pub seed: Option<u64>,
}

/// Resolve defaults, then the file, then the flags.
pub fn resolve(file: Option<&ConfigFile>, flags: &Overrides) -> RunConfig {
    let mut cfg = RunConfig::default();
    if let Some(f) = file {
        if let Some(p) = f.parameters {
            cfg.parameters = p;
        }
        if let Some(g) = f.grid {
            cfg.grid = g;
        }
        if let Some(t) = f.tol {
            cfg.tol = t;
        }
        if let Some(m) = f.max_iter {
            cfg.max_iter = m;
        }
        if let Some(s) = f.seed {
            cfg.seed = s;
        }
        if let Some(o) = f.oracle_start {
            cfg.oracle_start = o;
        }
        if let Some(n) = f.samples {
            cfg.samples = n;
        }
    }
    if let Some(t) = flags.tol {
        cfg.tol = t;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    cfg
}

/// Parse a complex literal: `1`, `-0.5`, `i`, `-i`, `2i`, `1+2i`,
/// `0.5-0.25i`. Scientific notation is accepted in either part.
pub fn parse_complex(s: &str) -> Result<Cplx, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty complex literal".to_string());
    }
    let bad = |s: &str| format!("cannot parse complex literal {s:?}");

    if let Some(head) = s.strip_suffix(['i', 'I']) {
        // Look for a split point between real and imaginary parts: a sign
        // that is neither leading nor an exponent sign.
        let bytes = head.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            let b = bytes[k];
            if (b == b'+' || b == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
                split = Some(k);
                break;
            }
        }
        let (re_part, im_part) = match split {
            Some(k) => (&head[..k], &head[k..]),
            None => ("0", head),
        };
        let re: Real = re_part.trim().parse().map_err(|_| bad(s))?;
        let im: Real = match im_part.trim() {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => other.parse().map_err(|_| bad(s))?,
        };
        Ok(Cplx::new(re, im))
    } else {
        let re: Real = s.parse().map_err(|_| bad(s))?;
        Ok(Cplx::new(re, 0.0))
    }
}
