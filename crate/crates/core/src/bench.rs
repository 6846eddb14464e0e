//! Runtime experiments: dense eigendecomposition (ED) against the
//! factorized transform (CF) and its preprocessing (PRE).

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{barabasi_albert, build_laplacian, LaplacianKind};
use crate::hgf::FactorizedGft;
use crate::linalg::dense_eig;
use crate::partition::{build_plan, PartitionConfig, SparsifyMode, SparsifyPolicy};
use crate::sparsify::SampleTarget;

pub const CSV_HEADER: &str = "n,k,seed,method,time_s,max_err,config";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ED")]
    Ed,
    #[serde(rename = "CF")]
    Cf,
    #[serde(rename = "PRE")]
    Pre,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ed => "ED",
            Method::Cf => "CF",
            Method::Pre => "PRE",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ED" => Ok(Method::Ed),
            "CF" => Ok(Method::Cf),
            "PRE" => Ok(Method::Pre),
            _ => Err(Error::InvalidParams(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub method: Method,
    pub time_s: f64,
    /// Largest eigenvalue deviation from the dense solver, when checked.
    pub max_err: Option<f64>,
    pub config: String,
}

impl BenchRecord {
    pub fn to_csv_row(&self) -> String {
        let err = self.max_err.map(|e| format!("{e:e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.n, self.k, self.seed, self.method, self.time_s, err, self.config
        )
    }
}

pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {CSV_HEADER:?}"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad("expected 7 fields"));
        }
        out.push(BenchRecord {
            n: f[0].parse().map_err(|_| bad("bad n"))?,
            k: f[1].parse().map_err(|_| bad("bad k"))?,
            seed: f[2].parse().map_err(|_| bad("bad seed"))?,
            method: f[3].parse().map_err(|_| bad("bad method"))?,
            time_s: f[4].parse().map_err(|_| bad("bad time"))?,
            max_err: if f[5].is_empty() {
                None
            } else {
                Some(f[5].parse().map_err(|_| bad("bad max_err"))?)
            },
            config: f[6].to_string(),
        });
    }
    Ok(out)
}

/// Which axis is swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Vary `n` at a fixed interface size.
    Nodes,
    /// Vary the interface size at fixed `n`.
    Cut,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nodes" => Ok(Mode::Nodes),
            "cut" => Ok(Mode::Cut),
            _ => Err(Error::InvalidParams(format!("unknown bench mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub mode: Mode,
    pub sizes: Vec<usize>,
    pub ks: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    /// Attachment count of the Barabási–Albert generator.
    pub ba_m: usize,
    pub methods: Vec<Method>,
    /// ED is skipped above this size.
    pub ed_max_n: usize,
    /// CF eigenvalues are checked against a dense solve up to this size.
    pub verify_max_n: usize,
    pub partition: PartitionConfig,
}

impl BenchConfig {
    pub fn nodes(sizes: Vec<usize>) -> Self {
        BenchConfig {
            mode: Mode::Nodes,
            sizes,
            ks: vec![5],
            repeats: 3,
            seed: 0,
            ba_m: 2,
            methods: vec![Method::Ed, Method::Cf, Method::Pre],
            ed_max_n: 4000,
            verify_max_n: 2000,
            partition: PartitionConfig::default(),
        }
    }

    pub fn cut(n: usize, ks: Vec<usize>) -> Self {
        BenchConfig {
            mode: Mode::Cut,
            sizes: vec![n],
            ks,
            methods: vec![Method::Cf, Method::Pre],
            ..Self::nodes(Vec::new())
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.ks.is_empty() {
            return Err(Error::InvalidParams("bench grids must be nonempty".into()));
        }
        if self.mode == Mode::Cut && self.sizes.len() != 1 {
            return Err(Error::InvalidParams("cut mode takes a single n".into()));
        }
        if self.mode == Mode::Nodes && self.ks.len() != 1 {
            return Err(Error::InvalidParams("nodes mode takes a single k".into()));
        }
        if self.repeats == 0 || self.methods.is_empty() {
            return Err(Error::InvalidParams("need at least one repeat and one method".into()));
        }
        if self.sizes.iter().any(|&n| n < 2) || self.ks.contains(&0) {
            return Err(Error::InvalidParams("sizes must be ≥ 2 and k ≥ 1".into()));
        }
        Ok(())
    }

    /// Partition settings for one cell: every interface resampled down to `k` edges.
    pub fn cell_partition(&self, k: usize) -> PartitionConfig {
        PartitionConfig {
            sparsify: SparsifyPolicy {
                mode: SparsifyMode::Always,
                target: SampleTarget::Count { k },
                ..self.partition.sparsify
            },
            seed: self.seed,
            ..self.partition.clone()
        }
    }

    /// Short digest identifying the settings behind a row.
    pub fn cell_hash(&self, n: usize, k: usize) -> Result<String> {
        let json = serde_json::to_string(&(n, k, self.ba_m, self.repeats, self.cell_partition(k)))?;
        let digest = Sha256::digest(json.as_bytes());
        Ok(digest[..6].iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Runs `f` once as warm-up, then `repeats` times; returns the median wall
/// time and the last result.
pub fn median_time<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let mut last = f()?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        last = f()?;
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let m = times.len();
    let median = if m % 2 == 1 {
        times[m / 2]
    } else {
        0.5 * (times[m / 2 - 1] + times[m / 2])
    };
    Ok((median, last))
}

/// All requested methods for one `(n, k)` cell.
pub fn run_cell(cfg: &BenchConfig, n: usize, k: usize) -> Result<Vec<BenchRecord>> {
    let g = barabasi_albert(n, cfg.ba_m, cfg.seed)?;
    let pcfg = cfg.cell_partition(k);
    let config = cfg.cell_hash(n, k)?;
    let kind = LaplacianKind::Combinatorial;
    let record = |method, time_s, max_err| BenchRecord {
        n,
        k,
        seed: cfg.seed,
        method,
        time_s,
        max_err,
        config: config.clone(),
    };
    let mut out = Vec::new();
    let outcome = if cfg.methods.contains(&Method::Pre) {
        let (t, o) = median_time(cfg.repeats, || build_plan(&g, &pcfg))?;
        out.push(record(Method::Pre, t, None));
        o
    } else {
        build_plan(&g, &pcfg)?
    };
    let laplacian = build_laplacian(&outcome.graph, kind)?;
    let mut dense: Option<Vec<f64>> = None;
    if cfg.methods.contains(&Method::Ed) && n <= cfg.ed_max_n {
        let (t, e) = median_time(cfg.repeats, || dense_eig(&laplacian))?;
        out.push(record(Method::Ed, t, None));
        dense = Some(e.values);
    }
    if cfg.methods.contains(&Method::Cf) {
        let (t, f) = median_time(cfg.repeats, || {
            FactorizedGft::factorize(&outcome.graph, &outcome.plan, kind)
        })?;
        if dense.is_none() && n <= cfg.verify_max_n {
            dense = Some(dense_eig(&laplacian)?.values);
        }
        let err = dense.as_ref().map(|d| {
            d.iter()
                .zip(&f.lambda_final)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        out.push(record(Method::Cf, t, err));
    }
    Ok(out)
}

pub fn run(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &n in &cfg.sizes {
        for &k in &cfg.ks {
            out.extend(run_cell(cfg, n, k)?);
        }
    }
    Ok(out)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParams("need at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParams("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParams("x values are all equal".into()));
    }
    Ok(sxy / sxx)
}

/// Times for one method, paired with the swept variable of the mode.
pub fn series(records: &[BenchRecord], method: Method, mode: Mode) -> (Vec<f64>, Vec<f64>) {
    records
        .iter()
        .filter(|r| r.method == method)
        .map(|r| {
            let x = match mode {
                Mode::Nodes => r.n,
                Mode::Cut => r.k,
            };
            (x as f64, r.time_s)
        })
        .unzip()
}
