//! Exact t-SNE and a k-NN corpus-overlap score.
//!
//! The optimiser is the textbook O(n²) one: per-point Gaussian bandwidths by
//! bisection on the precision β so that each row's perplexity hits the
//! target, symmetrised affinities `p_ij = (p_j|i + p_i|j) / 2n`, Student-t
//! output affinities, and momentum gradient descent with early exaggeration
//! and per-coordinate gains. Matrices are dense row-major `Vec<f64>`.
//!
//! Overlap is the share of points whose `k` nearest 2-D neighbours include at
//! least one point of the other corpus. Ties in distance break by index.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{fallback_embed, Gateway, GatewayError};

pub const BLUE: &str = "#1f77b4";
pub const ORANGE: &str = "#ff7f0e";
const MAX_BISECT_ITERS: usize = 200;
const PERPLEXITY_TOL: f64 = 1e-6;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("non-finite value at iteration {0}")]
    NonFiniteEncountered(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("projection needs both corpora")]
    SingleLabelInput,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("cannot write {path}: {source}")]
    IoFailure {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusTag {
    Human,
    Generated,
}

impl CorpusTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CorpusTag::Human => "human",
            CorpusTag::Generated => "generated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<CorpusTag>,
    pub provider: String,
}

impl EmbeddingMatrix {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<CorpusTag>, provider: impl Into<String>) -> Result<Self, EmbedError> {
        if rows.len() != labels.len() {
            return Err(EmbedError::DegenerateInput(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(d) = rows.first().map(Vec::len) {
            if d == 0 || rows.iter().any(|r| r.len() != d) {
                return Err(EmbedError::DegenerateInput("ragged or empty rows".into()));
            }
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(EmbedError::DegenerateInput("non-finite entry".into()));
        }
        Ok(Self {
            rows,
            labels,
            provider: provider.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Embeds both corpora with the gateway when given, else the hashed
/// bag-of-words fallback. Human rows come first.
pub fn embed_corpora(
    gateway: Option<&Gateway>,
    human: &[String],
    generated: &[String],
) -> Result<EmbeddingMatrix, EmbedError> {
    let texts: Vec<String> = human.iter().chain(generated).cloned().collect();
    let batch = match gateway {
        Some(g) => g.embed(&texts)?,
        None => fallback_embed(&texts),
    };
    if !batch.degenerate.is_empty() {
        log::warn!("{} texts embedded as zero vectors", batch.degenerate.len());
    }
    let labels = std::iter::repeat(CorpusTag::Human)
        .take(human.len())
        .chain(std::iter::repeat(CorpusTag::Generated).take(generated.len()))
        .collect();
    EmbeddingMatrix::new(batch.rows, labels, batch.provider)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum_early: f64,
    pub momentum_late: f64,
    pub momentum_switch_iter: usize,
    pub early_exaggeration_factor: f64,
    pub early_exaggeration_iters: usize,
    pub kl_every: usize,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            momentum_early: 0.5,
            momentum_late: 0.8,
            momentum_switch_iter: 250,
            early_exaggeration_factor: 12.0,
            early_exaggeration_iters: 250,
            kl_every: 50,
            seed: 0,
        }
    }
}

impl TsneParams {
    pub fn validate(&self, n: usize) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidParams(m.into()));
        if !(self.perplexity > 1.0) {
            return bad("perplexity must exceed 1");
        }
        if self.perplexity > (n as f64 - 1.0) {
            return bad("perplexity cannot exceed n - 1");
        }
        if self.iterations == 0 || self.kl_every == 0 {
            return bad("iterations and kl_every must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        for m in [self.momentum_early, self.momentum_late] {
            if !(0.0..1.0).contains(&m) {
                return bad("momentum must lie in [0, 1)");
            }
        }
        if !(self.early_exaggeration_factor >= 1.0) {
            return bad("early exaggeration factor must be >= 1");
        }
        if self.perplexity >= (n as f64 - 1.0) / 3.0 {
            log::warn!("perplexity {} is large for n = {n}", self.perplexity);
        }
        Ok(())
    }
}

/// Row-stochastic `p_j|i` plus what the bisection achieved per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalAffinities {
    pub n: usize,
    /// Row-major n × n, zero diagonal.
    pub p: Vec<f64>,
    pub betas: Vec<f64>,
    pub achieved_perplexity: Vec<f64>,
    /// Rows whose bisection hit the iteration cap.
    pub unconverged: Vec<usize>,
}

impl ConditionalAffinities {
    /// Gaussian bandwidth `σ = 1 / sqrt(2β)`.
    pub fn sigma(&self, i: usize) -> f64 {
        (1.0 / (2.0 * self.betas[i])).sqrt()
    }
}

pub fn squared_distances(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Entropy (nats) and probabilities of one row at precision `beta`. Distances
/// are shifted by their minimum for stability; the entropy is unaffected.
fn row_entropy(dist: &[f64], beta: f64, out: &mut [f64]) -> f64 {
    let min = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let mut z = 0.0;
    for (o, d) in out.iter_mut().zip(dist) {
        *o = (-(d - min) * beta).exp();
        z += *o;
    }
    let mut weighted = 0.0;
    for (o, d) in out.iter_mut().zip(dist) {
        *o /= z;
        weighted += *o * (d - min);
    }
    z.ln() + beta * weighted
}

pub fn conditional_affinities(x: &[Vec<f64>], perplexity: f64) -> Result<ConditionalAffinities, EmbedError> {
    let n = x.len();
    if n < 3 {
        return Err(EmbedError::DegenerateInput(format!("need at least 3 points, got {n}")));
    }
    if !(perplexity > 1.0) || perplexity > (n - 1) as f64 {
        return Err(EmbedError::InvalidParams(format!(
            "perplexity {perplexity} outside (1, {}]",
            n - 1
        )));
    }
    let d = squared_distances(x);
    if d.iter().all(|v| *v == 0.0) {
        return Err(EmbedError::DegenerateInput("all points coincide".into()));
    }
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut betas = vec![1.0; n];
    let mut achieved = vec![0.0; n];
    let mut unconverged = Vec::new();
    let mut dist = vec![0.0; n - 1];
    let mut row = vec![0.0; n - 1];
    for i in 0..n {
        let mut k = 0;
        for j in 0..n {
            if j != i {
                dist[k] = d[i * n + j];
                k += 1;
            }
        }
        let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
        let mut beta = 1.0;
        let mut h = row_entropy(&dist, beta, &mut row);
        let mut converged = false;
        for _ in 0..MAX_BISECT_ITERS {
            if (h.exp() - perplexity).abs() < PERPLEXITY_TOL {
                converged = true;
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_infinite() { beta * 2.0 } else { (beta + hi) / 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            h = row_entropy(&dist, beta, &mut row);
        }
        if !converged && (h.exp() - perplexity).abs() >= PERPLEXITY_TOL {
            unconverged.push(i);
        }
        betas[i] = beta;
        achieved[i] = h.exp();
        let mut k = 0;
        for j in 0..n {
            if j != i {
                p[i * n + j] = row[k];
                k += 1;
            }
        }
    }
    Ok(ConditionalAffinities {
        n,
        p,
        betas,
        achieved_perplexity: achieved,
        unconverged,
    })
}

/// `p_ij = (p_j|i + p_i|j) / 2n`.
pub fn symmetrize(cond: &ConditionalAffinities) -> Vec<f64> {
    let n = cond.n;
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond.p[i * n + j] + cond.p[j * n + i]) / (2.0 * n as f64);
        }
    }
    p
}

/// Unnormalised Student-t kernel `(1 + |y_i - y_j|²)^-1` and its off-diagonal sum.
fn student_t(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            z += 2.0 * v;
        }
    }
    (num, z)
}

/// `KL(P || Q)` for joint affinities `p` and a layout `y`.
pub fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let (num, z) = student_t(y);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[i * n + j];
            if i != j && pij > 0.0 {
                kl += pij * (pij / (num[i * n + j] / z)).ln();
            }
        }
    }
    kl
}

/// `∂KL/∂y_i = 4 Σ_j (p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|²)^-1`.
pub fn gradient(p: &[f64], y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = y.len();
    let (num, z) = student_t(y);
    let mut g = vec![[0.0; 2]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = num[i * n + j];
            let mult = 4.0 * (p[i * n + j] - w / z) * w;
            g[i][0] += mult * (y[i][0] - y[j][0]);
            g[i][1] += mult * (y[i][1] - y[j][1]);
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<CorpusTag>,
    pub kl_history: Vec<f64>,
    /// Iteration number (1-based) of each `kl_history` entry.
    pub kl_iterations: Vec<usize>,
    pub provider: String,
}

fn center(y: &mut [[f64; 2]]) {
    let n = y.len() as f64;
    let mx = y.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = y.iter().map(|p| p[1]).sum::<f64>() / n;
    for p in y.iter_mut() {
        p[0] -= mx;
        p[1] -= my;
    }
}

pub fn tsne_fit(x: &EmbeddingMatrix, params: &TsneParams) -> Result<Projection2D, EmbedError> {
    let n = x.len();
    if n < 4 {
        return Err(EmbedError::DegenerateInput(format!("need at least 4 points, got {n}")));
    }
    params.validate(n)?;
    let cond = conditional_affinities(&x.rows, params.perplexity)?;
    if !cond.unconverged.is_empty() {
        log::warn!("perplexity bisection hit the cap on {} rows", cond.unconverged.len());
    }
    let p = symmetrize(&cond);
    let p_exag: Vec<f64> = p.iter().map(|v| v * params.early_exaggeration_factor).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, 1e-2).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0_f64; 2]; n];
    let mut kl_history = Vec::new();
    let mut kl_iterations = Vec::new();

    for iter in 0..params.iterations {
        let target = if iter < params.early_exaggeration_iters { &p_exag } else { &p };
        let momentum = if iter < params.momentum_switch_iter {
            params.momentum_early
        } else {
            params.momentum_late
        };
        let g = gradient(target, &y);
        for i in 0..n {
            for c in 0..2 {
                gains[i][c] = if (g[i][c] > 0.0) != (update[i][c] > 0.0) {
                    gains[i][c] + 0.2
                } else {
                    (gains[i][c] * 0.8).max(MIN_GAIN)
                };
                update[i][c] = momentum * update[i][c] - params.learning_rate * gains[i][c] * g[i][c];
                y[i][c] += update[i][c];
            }
        }
        center(&mut y);
        if y.iter().flatten().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFiniteEncountered(iter + 1));
        }
        let done = iter + 1;
        if done % params.kl_every == 0 || done == params.iterations {
            let kl = kl_divergence(&p, &y);
            if !kl.is_finite() {
                return Err(EmbedError::NonFiniteEncountered(done));
            }
            kl_history.push(kl);
            kl_iterations.push(done);
        }
    }
    center(&mut y);
    Ok(Projection2D {
        points: y,
        labels: x.labels.clone(),
        kl_history,
        kl_iterations,
        provider: x.provider.clone(),
    })
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Indices of the `k` nearest neighbours of `i`, nearest first.
pub fn nearest_neighbors(points: &[[f64; 2]], i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> = (0..points.len())
        .filter(|j| *j != i)
        .map(|j| (dist2(points[i], points[j]), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Share of points with at least one other-corpus point among their `k`
/// nearest neighbours.
pub fn overlap_fraction(proj: &Projection2D, k: usize) -> Result<f64, EmbedError> {
    overlap_of(&proj.points, &proj.labels, k)
}

pub fn overlap_of(points: &[[f64; 2]], labels: &[CorpusTag], k: usize) -> Result<f64, EmbedError> {
    let n = points.len();
    if !labels.contains(&CorpusTag::Human) || !labels.contains(&CorpusTag::Generated) {
        return Err(EmbedError::SingleLabelInput);
    }
    if k == 0 || k >= n {
        return Err(EmbedError::InvalidParams(format!("k = {k} must be in 1..{n}")));
    }
    let touching = (0..n)
        .filter(|&i| nearest_neighbors(points, i, k).iter().any(|&j| labels[j] != labels[i]))
        .count();
    Ok(touching as f64 / n as f64)
}

/// Share of points whose single nearest neighbour carries the same label.
pub fn nearest_neighbor_agreement(points: &[[f64; 2]], labels: &[CorpusTag]) -> f64 {
    let n = points.len();
    let same = (0..n)
        .filter(|&i| nearest_neighbors(points, i, 1).first().is_some_and(|&j| labels[j] == labels[i]))
        .count();
    same as f64 / n as f64
}

pub fn projection_csv(proj: &Projection2D) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "label"]).expect("in-memory write");
    for (p, l) in proj.points.iter().zip(&proj.labels) {
        w.write_record([p[0].to_string(), p[1].to_string(), l.as_str().to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Scatter plot; human points blue, generated orange.
pub fn projection_svg(proj: &Projection2D, caption: &str) -> String {
    const SIZE: f64 = 600.0;
    const PAD: f64 = 30.0;
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &proj.points {
        lo_x = lo_x.min(p[0]);
        hi_x = hi_x.max(p[0]);
        lo_y = lo_y.min(p[1]);
        hi_y = hi_y.max(p[1]);
    }
    let span = (hi_x - lo_x).max(hi_y - lo_y).max(f64::MIN_POSITIVE);
    let scale = (SIZE - 2.0 * PAD) / span;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{h}" viewBox="0 0 {SIZE} {h}">"#,
        h = SIZE + 20.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (p, l) in proj.points.iter().zip(&proj.labels) {
        let color = match l {
            CorpusTag::Human => BLUE,
            CorpusTag::Generated => ORANGE,
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.7"/>"#,
            PAD + (p[0] - lo_x) * scale,
            PAD + (hi_y - p[1]) * scale
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{:.0}" font-family="sans-serif" font-size="12">{}</text>"#,
        SIZE + 5.0,
        escape_xml(caption)
    );
    s.push_str("</svg>\n");
    s
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_projection(proj: &Projection2D, csv_path: &Path, svg_path: &Path, caption: &str) -> Result<(), EmbedError> {
    for (path, body) in [(csv_path, projection_csv(proj)), (svg_path, projection_svg(proj, caption))] {
        std::fs::write(path, body).map_err(|source| EmbedError::IoFailure {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}
