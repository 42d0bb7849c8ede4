//! McCulloch's quantile estimator of the stability index.
//!
//! The statistics
//!
//! ```text
//! nu_alpha = (q95 - q05) / (q75 - q25)
//! nu_beta  = (q95 + q05 - 2 q50) / (q95 - q05)
//! ```
//!
//! are free of location and scale. Their population values are tabulated on
//! an `(alpha, beta)` grid by brute-force Monte Carlo, and a sample's index
//! estimate is read off by inverting the table. Only `beta >= 0` is stored:
//! `nu_alpha` is even in `beta` and `nu_beta` is odd.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::empirical::type7_quantile;
use crate::error::{domain, Error, Result};
use crate::seed::substream;
use crate::stable::{numeric_quantiles, StableParams};

pub const DEFAULT_MC_SIZE: usize = 4_000_000;
pub const DEFAULT_TABLE_SEED: u64 = 1986;
pub const MIN_TABLE_MC_SIZE: usize = 1_000_000;
pub const MIN_MQE_SAMPLE: usize = 20;
const FORMAT_VERSION: u32 = 1;

const LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// The bundled table: default grids at `DEFAULT_MC_SIZE` and `DEFAULT_TABLE_SEED`.
const BUNDLED: &str = include_str!("../data/mqe_table.txt");

pub fn default_alphas() -> Vec<f64> {
    (5..=20).map(|i| i as f64 / 10.0).collect()
}

pub fn default_betas() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

/// `(nu_alpha, nu_beta)` from the five quantiles at `LEVELS`.
fn nu_statistics(q: &[f64; 5]) -> (f64, f64) {
    let [q05, q25, q50, q75, q95] = *q;
    ((q95 - q05) / (q75 - q25), (q95 + q05 - 2.0 * q50) / (q95 - q05))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MqeTable {
    alphas: Vec<f64>,
    betas: Vec<f64>,
    /// `nu_alpha[b][a]` for `betas[b]`, `alphas[a]`.
    nu_alpha: Vec<Vec<f64>>,
    nu_beta: Vec<Vec<f64>>,
    pub mc_size: usize,
    pub seed: u64,
}

impl MqeTable {
    /// Assemble a table, checking grids and that `nu_alpha` strictly
    /// decreases in `alpha` along every `beta` row.
    pub fn from_parts(
        alphas: Vec<f64>,
        betas: Vec<f64>,
        nu_alpha: Vec<Vec<f64>>,
        nu_beta: Vec<Vec<f64>>,
        mc_size: usize,
        seed: u64,
    ) -> Result<Self> {
        check_grids(&alphas, &betas)?;
        let shape_ok = |rows: &Vec<Vec<f64>>| {
            rows.len() == betas.len() && rows.iter().all(|r| r.len() == alphas.len())
        };
        if !shape_ok(&nu_alpha) || !shape_ok(&nu_beta) {
            return Err(Error::TableBuild("table shape does not match its grids".into()));
        }
        for (row, beta) in nu_alpha.iter().zip(&betas) {
            if let Some(i) = row.windows(2).position(|w| !(w[1] < w[0])) {
                return Err(Error::TableBuild(format!(
                    "nu_alpha not decreasing at beta = {beta} between alpha = {} and {}",
                    alphas[i],
                    alphas[i + 1]
                )));
            }
        }
        Ok(Self {
            alphas,
            betas,
            nu_alpha,
            nu_beta,
            mc_size,
            seed,
        })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled McCulloch table is well formed")
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Tabulated `(nu_alpha, nu_beta)` at grid indices.
    pub fn cell(&self, alpha_idx: usize, beta_idx: usize) -> (f64, f64) {
        (
            self.nu_alpha[beta_idx][alpha_idx],
            self.nu_beta[beta_idx][alpha_idx],
        )
    }

    fn header(&self) -> TableHeader {
        TableHeader {
            version: FORMAT_VERSION,
            mc_size: self.mc_size,
            seed: self.seed,
            alphas: self.alphas.clone(),
            betas: self.betas.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = self.header().to_text();
        out.push_str("alpha beta nu_alpha nu_beta\n");
        for (b, beta) in self.betas.iter().enumerate() {
            for (a, alpha) in self.alphas.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{alpha} {beta} {} {}",
                    self.nu_alpha[b][a], self.nu_beta[b][a]
                );
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (header, body) = TableHeader::parse(text)?;
        let (na, nb) = (header.alphas.len(), header.betas.len());
        let mut nu_alpha = vec![vec![f64::NAN; na]; nb];
        let mut nu_beta = vec![vec![f64::NAN; na]; nb];
        let mut rows = body
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        match rows.next() {
            Some("alpha beta nu_alpha nu_beta") => {}
            other => return Err(Error::Parse(format!("unexpected column header {other:?}"))),
        }
        let mut count = 0;
        for line in rows {
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("{line:?}: {e}"))))
                .collect::<Result<_>>()?;
            let [alpha, beta, va, vb] = fields[..] else {
                return Err(Error::Parse(format!("expected 4 fields in {line:?}")));
            };
            let a = header.alphas.iter().position(|&x| x == alpha);
            let b = header.betas.iter().position(|&x| x == beta);
            let (Some(a), Some(b)) = (a, b) else {
                return Err(Error::Parse(format!("row off the grid: {line:?}")));
            };
            nu_alpha[b][a] = va;
            nu_beta[b][a] = vb;
            count += 1;
        }
        if count != na * nb {
            return Err(Error::Parse(format!("expected {} rows, found {count}", na * nb)));
        }
        Self::from_parts(
            header.alphas,
            header.betas,
            nu_alpha,
            nu_beta,
            header.mc_size,
            header.seed,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Load the table cached at `path` if its header matches the requested
    /// build, otherwise build it and overwrite the cache.
    pub fn load_or_build(
        path: &Path,
        alphas: &[f64],
        betas: &[f64],
        mc_size: usize,
        seed: u64,
    ) -> Result<Self> {
        let wanted = TableHeader {
            version: FORMAT_VERSION,
            mc_size,
            seed,
            alphas: alphas.to_vec(),
            betas: betas.to_vec(),
        };
        if let Ok(text) = std::fs::read_to_string(path) {
            if let Ok((found, _)) = TableHeader::parse(&text) {
                if found == wanted {
                    if let Ok(table) = Self::parse(&text) {
                        return Ok(table);
                    }
                }
            }
        }
        let table = build_mqe_table(alphas, betas, mc_size, seed)?;
        table.save(path)?;
        Ok(table)
    }
}

fn check_grids(alphas: &[f64], betas: &[f64]) -> Result<()> {
    if alphas.len() < 2 || betas.is_empty() {
        return Err(domain("table needs at least two alphas and one beta"));
    }
    if alphas.iter().any(|a| !(0.5..=2.0).contains(a)) {
        return Err(domain("table alphas must lie in [0.5, 2]"));
    }
    if betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(domain("table betas must lie in [0, 1]; negative values follow by symmetry"));
    }
    if betas[0] != 0.0 {
        return Err(domain("table betas must start at 0"));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) || betas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("table grids must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
struct TableHeader {
    version: u32,
    mc_size: usize,
    seed: u64,
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl TableHeader {
    fn to_text(&self) -> String {
        format!(
            "# stable-sse mqe-table\nversion = {}\nmc_size = {}\nseed = {}\nalphas = {}\nbetas = {}\n---\n",
            self.version,
            self.mc_size,
            self.seed,
            join(&self.alphas),
            join(&self.betas)
        )
    }

    /// Parse the key-value block up to the `---` separator; returns the rest.
    fn parse(text: &str) -> Result<(Self, &str)> {
        let Some((head, body)) = text.split_once("\n---\n") else {
            return Err(Error::Parse("missing `---` header terminator".into()));
        };
        let mut version = None;
        let mut mc_size = None;
        let mut seed = None;
        let mut alphas = None;
        let mut betas = None;
        let list = |v: &str| -> Result<Vec<f64>> {
            v.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                .collect()
        };
        for line in head.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse(format!("bad header line {line:?}")));
            };
            let value = value.trim();
            let bad = |e: std::num::ParseIntError| Error::Parse(format!("{line:?}: {e}"));
            match key.trim() {
                "version" => version = Some(value.parse::<u32>().map_err(bad)?),
                "mc_size" => mc_size = Some(value.parse::<usize>().map_err(bad)?),
                "seed" => seed = Some(value.parse::<u64>().map_err(bad)?),
                "alphas" => alphas = Some(list(value)?),
                "betas" => betas = Some(list(value)?),
                other => return Err(Error::Parse(format!("unknown header key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("header key {k:?} missing"));
        let header = Self {
            version: version.ok_or_else(|| missing("version"))?,
            mc_size: mc_size.ok_or_else(|| missing("mc_size"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            alphas: alphas.ok_or_else(|| missing("alphas"))?,
            betas: betas.ok_or_else(|| missing("betas"))?,
        };
        if header.version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "table format version {} (expected {FORMAT_VERSION})",
                header.version
            )));
        }
        Ok((header, body))
    }
}

/// Tabulate `nu_alpha` and `nu_beta` by brute force. Cell `(b, a)` samples
/// from `substream(seed, b * alphas.len() + a)`. Laws symmetric about zero
/// (`beta = 0`, or `alpha = 2` where `beta` has no effect) use the
/// symmetrised quantiles `(q_p - q_{1-p}) / 2`, so their `nu_beta` is exactly 0.
pub fn build_mqe_table(
    alphas: &[f64],
    betas: &[f64],
    mc_size: usize,
    seed: u64,
) -> Result<MqeTable> {
    check_grids(alphas, betas)?;
    if mc_size < MIN_TABLE_MC_SIZE {
        return Err(domain(format!(
            "mc_size = {mc_size} below the table minimum of {MIN_TABLE_MC_SIZE}"
        )));
    }
    let na = alphas.len();
    let cells: Vec<(f64, f64)> = (0..na * betas.len())
        .into_par_iter()
        .map(|cell| {
            let params = StableParams::standard(alphas[cell % na], betas[cell / na])?;
            let mut rng = substream(seed, cell as u64);
            let q = numeric_quantiles(&params, &LEVELS, mc_size, &mut rng)?;
            let mut q = [q[0].value, q[1].value, q[2].value, q[3].value, q[4].value];
            if params.beta == 0.0 || params.alpha == 2.0 {
                let sym = |lo: f64, hi: f64| 0.5 * (hi - lo);
                let (outer, inner) = (sym(q[0], q[4]), sym(q[1], q[3]));
                q = [-outer, -inner, 0.0, inner, outer];
            }
            Ok(nu_statistics(&q))
        })
        .collect::<Result<_>>()?;
    let rows = |pick: fn(&(f64, f64)) -> f64| -> Vec<Vec<f64>> {
        cells.chunks(na).map(|row| row.iter().map(pick).collect()).collect()
    };
    MqeTable::from_parts(
        alphas.to_vec(),
        betas.to_vec(),
        rows(|c| c.0),
        rows(|c| c.1),
        mc_size,
        seed,
    )
}

/// Sample `(nu_alpha, nu_beta)` from type-7 quantiles.
pub fn sample_statistics(data: &[f64]) -> Result<(f64, f64)> {
    if data.len() < MIN_MQE_SAMPLE {
        return Err(Error::Shape {
            expected: MIN_MQE_SAMPLE,
            got: data.len(),
        });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(domain("data contains non-finite values"));
    }
    let mut sorted = data.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let q = LEVELS.map(|p| type7_quantile(&sorted, p));
    if !(q[3] > q[1]) {
        return Err(Error::Degenerate("zero interquartile range".into()));
    }
    Ok(nu_statistics(&q))
}

/// Where `target` sits in a row decreasing along the alpha axis, as
/// `(index, fraction)` of the bracketing segment, clamped to the ends.
fn locate_decreasing(row: &[f64], target: f64) -> (usize, f64) {
    let last = row.len() - 1;
    if target >= row[0] {
        return (0, 0.0);
    }
    if target <= row[last] {
        return (last - 1, 1.0);
    }
    let i = row.partition_point(|&v| v > target) - 1;
    (i, (row[i] - target) / (row[i] - row[i + 1]))
}

pub fn mqe_estimate(data: &[f64], table: &MqeTable) -> Result<f64> {
    let (nu_a, nu_b) = sample_statistics(data)?;
    Ok(invert(table, nu_a, nu_b))
}

/// Joint inverse interpolation: along every beta slice, find the alpha
/// matching `nu_a` and the `nu_beta` there, then interpolate between the two
/// slices whose `nu_beta` brackets `|nu_b|`. Reflecting the data flips the
/// sign of `nu_b` only, so the index estimate uses its magnitude.
pub fn invert(table: &MqeTable, nu_a: f64, nu_b: f64) -> f64 {
    let nu_b = nu_b.abs();
    let points: Vec<(f64, f64)> = (0..table.betas.len())
        .map(|b| {
            let (i, frac) = locate_decreasing(&table.nu_alpha[b], nu_a);
            let lerp = |row: &[f64]| row[i] + frac * (row[i + 1] - row[i]);
            (lerp(&table.alphas), lerp(&table.nu_beta[b]))
        })
        .collect();

    let last = points.len() - 1;
    let alpha = if nu_b <= points[0].1 {
        points[0].0
    } else {
        points
            .windows(2)
            .find_map(|w| {
                let ((a0, b0), (a1, b1)) = (w[0], w[1]);
                let (lo, hi) = if b0 <= b1 { (b0, b1) } else { (b1, b0) };
                if !(lo <= nu_b && nu_b <= hi) {
                    return None;
                }
                let f = if hi > lo { (nu_b - b0) / (b1 - b0) } else { 0.5 };
                Some(a0 + f * (a1 - a0))
            })
            .unwrap_or(points[last].0)
    };
    alpha.clamp(0.5, 2.0)
}
