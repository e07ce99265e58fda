//! Directed weighted networks: the six random families, norms, and file I/O.
//!
//! Convention: `G[i][j] != 0` means player `i` is influenced by player `j`,
//! i.e. there is an edge from node `j` to node `i`. The diagonal is always
//! exactly zero.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Where a network came from. Loaded networks without a record carry `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    weights: Matrix,
    provenance: Option<Provenance>,
}

impl Network {
    /// Validates shape, finiteness, and the zero diagonal.
    pub fn new(weights: Matrix) -> Result<Self> {
        Self::with_provenance(weights, None)
    }

    pub fn with_provenance(weights: Matrix, provenance: Option<Provenance>) -> Result<Self> {
        let n = weights.dim();
        if n == 0 {
            return Err(Error::invalid("network needs at least one node"));
        }
        for (i, row) in weights.rows().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "non-finite weight at row {}, column {}",
                    i + 1,
                    j + 1
                )));
            }
            if row[i] != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal at row {}", i + 1)));
            }
        }
        Ok(Network {
            weights,
            provenance,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.weights.dim()
    }

    #[inline]
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn is_symmetric(&self) -> bool {
        self.weights.is_symmetric(0.0)
    }

    pub fn metrics(&self) -> Result<NetworkMetrics> {
        Ok(NetworkMetrics {
            asym_inf: asymmetry_inf_norm(self),
            norm2: spectral_norm(self)?,
            norm_inf: inf_norm(self),
        })
    }

    fn stamped(mut self, generator: &str, params: serde_json::Value) -> Self {
        let params = match params {
            serde_json::Value::Object(map) => map,
            _ => serde_json::Map::new(),
        };
        self.provenance = Some(Provenance {
            generator: generator.to_owned(),
            params,
            seed: None,
        });
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkMetrics {
    /// `‖G − Gᵀ‖∞`
    pub asym_inf: f64,
    /// `‖G‖₂`
    pub norm2: f64,
    /// `‖G‖∞`
    pub norm_inf: f64,
}

/// `max_i Σ_j |G_ij − G_ji|`.
pub fn asymmetry_inf_norm(net: &Network) -> f64 {
    let g = net.weights();
    let n = g.dim();
    (0..n)
        .map(|i| (0..n).map(|j| (g[(i, j)] - g[(j, i)]).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn spectral_norm(net: &Network) -> Result<f64> {
    linalg::spectral_norm(net.weights())
}

pub fn inf_norm(net: &Network) -> f64 {
    net.weights().inf_norm()
}

// ── generators ──────────────────────────────────────────────────────

/// Uniform draw from `[center − half, center + half]`; exact at `half = 0`.
fn uniform_around<R: Rng + ?Sized>(rng: &mut R, center: f64, half: f64) -> f64 {
    if half == 0.0 {
        center
    } else {
        center + half * (2.0 * rng.gen::<f64>() - 1.0)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::invalid(format!("eps must lie in [0, 1), got {eps}")));
    }
    Ok(())
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn check_min_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::invalid(format!("need n >= {min}, got {n}")));
    }
    Ok(())
}

/// Complete network with every off-diagonal weight uniform in `[1−eps, 1+eps]`.
pub fn gen_complete_errors<R: Rng + ?Sized>(n: usize, eps: f64, rng: &mut R) -> Result<Network> {
    check_min_n(n, 2)?;
    check_eps(eps)?;
    let g = Matrix::from_fn(n, |i, j| if i == j { 0.0 } else { uniform_around(rng, 1.0, eps) });
    Ok(Network::new(g)?.stamped("complete_errors", serde_json::json!({ "eps": eps })))
}

/// Complete network with errors where node `n` has links of weight about `w`.
pub fn gen_influential<R: Rng + ?Sized>(n: usize, eps: f64, w: f64, rng: &mut R) -> Result<Network> {
    check_min_n(n, 2)?;
    check_eps(eps)?;
    if !(w >= 1.0) {
        return Err(Error::invalid(format!("influence weight must be >= 1, got {w}")));
    }
    let last = n - 1;
    let g = Matrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else if i == last || j == last {
            uniform_around(rng, w, eps)
        } else {
            uniform_around(rng, 1.0, eps)
        }
    });
    Ok(Network::new(g)?.stamped("influential", serde_json::json!({ "eps": eps, "w": w })))
}

/// Complete network with random signs and rare sign flips.
///
/// Each unordered pair picks a sign by a fair coin and draws both weights
/// from `[s−eps, s+eps]`; then, with probability `delta`, `G_ij ← −G_ji`.
pub fn gen_random_signs<R: Rng + ?Sized>(
    n: usize,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<Network> {
    check_min_n(n, 2)?;
    check_eps(eps)?;
    check_prob("delta", delta)?;
    let mut g = Matrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            g[(i, j)] = uniform_around(rng, sign, eps);
            g[(j, i)] = uniform_around(rng, sign, eps);
            if rng.gen::<f64>() < delta {
                g[(i, j)] = -g[(j, i)];
            }
        }
    }
    Ok(Network::new(g)?.stamped(
        "random_signs",
        serde_json::json!({ "eps": eps, "delta": delta }),
    ))
}

/// Directed Erdős–Rényi network; present edges carry `weight`.
pub fn gen_erdos_renyi<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    weight: f64,
    rng: &mut R,
) -> Result<Network> {
    check_min_n(n, 1)?;
    check_prob("p", p)?;
    if !weight.is_finite() {
        return Err(Error::invalid("edge weight must be finite"));
    }
    let g = Matrix::from_fn(n, |i, j| {
        if i != j && rng.gen::<f64>() < p {
            weight
        } else {
            0.0
        }
    });
    Ok(Network::new(g)?.stamped(
        "erdos_renyi",
        serde_json::json!({ "p": p, "weight": weight }),
    ))
}

/// Directed small-world network: ring lattice of half-degree `d`, each edge
/// rewired with probability `p` to a uniformly chosen new head.
pub fn gen_small_world<R: Rng + ?Sized>(n: usize, d: usize, p: f64, rng: &mut R) -> Result<Network> {
    check_min_n(n, 3)?;
    check_prob("p", p)?;
    if d < 1 || d > (n - 1) / 2 {
        return Err(Error::invalid(format!(
            "half-degree must lie in [1, {}], got {d}",
            (n - 1) / 2
        )));
    }
    let mut g = Matrix::zeros(n);
    for tail in 0..n {
        for offset in 1..=d {
            for head in [(tail + offset) % n, (tail + n - offset) % n] {
                let head = if rng.gen::<f64>() < p {
                    // uniform over the n-1 nodes other than the tail
                    let k = rng.gen_range(0..n - 1);
                    if k >= tail {
                        k + 1
                    } else {
                        k
                    }
                } else {
                    head
                };
                g[(head, tail)] = 1.0;
            }
        }
    }
    Ok(Network::new(g)?.stamped("small_world", serde_json::json!({ "d": d, "p": p })))
}

/// Symmetric star around node 1 with each of its `2(n−1)` edges erased
/// independently with probability `p`.
pub fn gen_star_erased<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Network> {
    check_min_n(n, 2)?;
    check_prob("p", p)?;
    let mut g = Matrix::zeros(n);
    for i in 1..n {
        if rng.gen::<f64>() >= p {
            g[(0, i)] = 1.0;
        }
        if rng.gen::<f64>() >= p {
            g[(i, 0)] = 1.0;
        }
    }
    Ok(Network::new(g)?.stamped("star_erased", serde_json::json!({ "p": p })))
}

/// A parameter that may scale with the network size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaled {
    Const(f64),
    /// `1 / N^r`
    InvPow(f64),
    /// `1 − 1 / N^r`
    OneMinusInvPow(f64),
    /// `c / N`
    OverN(f64),
}

impl Scaled {
    pub fn at(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Scaled::Const(v) => v,
            Scaled::InvPow(r) => nf.powf(-r),
            Scaled::OneMinusInvPow(r) => 1.0 - nf.powf(-r),
            Scaled::OverN(c) => c / nf,
        }
    }
}

/// A random network family with size-dependent parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    CompleteErrors {
        eps: Scaled,
    },
    Influential {
        eps: Scaled,
        w: f64,
    },
    RandomSigns {
        eps: Scaled,
        delta: Scaled,
    },
    ErdosRenyi {
        p: Scaled,
        #[serde(default = "unit_weight")]
        weight: Scaled,
    },
    SmallWorld {
        /// half-degree as a fraction of N, rounded to the nearest integer
        d_frac: f64,
        p: Scaled,
    },
    StarErased {
        p: Scaled,
    },
}

fn unit_weight() -> Scaled {
    Scaled::Const(1.0)
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::CompleteErrors { .. } => "complete_errors",
            Family::Influential { .. } => "influential",
            Family::RandomSigns { .. } => "random_signs",
            Family::ErdosRenyi { .. } => "erdos_renyi",
            Family::SmallWorld { .. } => "small_world",
            Family::StarErased { .. } => "star_erased",
        }
    }

    pub fn half_degree(d_frac: f64, n: usize) -> usize {
        ((d_frac * n as f64).round() as usize).max(1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Network> {
        match *self {
            Family::CompleteErrors { eps } => gen_complete_errors(n, eps.at(n), rng),
            Family::Influential { eps, w } => gen_influential(n, eps.at(n), w, rng),
            Family::RandomSigns { eps, delta } => gen_random_signs(n, eps.at(n), delta.at(n), rng),
            Family::ErdosRenyi { p, weight } => gen_erdos_renyi(n, p.at(n), weight.at(n), rng),
            Family::SmallWorld { d_frac, p } => {
                gen_small_world(n, Self::half_degree(d_frac, n), p.at(n), rng)
            }
            Family::StarErased { p } => gen_star_erased(n, p.at(n), rng),
        }
    }

    /// Bound on `‖G − Gᵀ‖∞` at size `n`. The complete families are bounded
    /// surely by `2Nε`; the others hold with high probability for admissible
    /// exponents, with slack `t`.
    pub fn asymmetry_bound(&self, n: usize, t: f64) -> f64 {
        let nf = n as f64;
        match *self {
            Family::CompleteErrors { eps } | Family::Influential { eps, .. } => 2.0 * nf * eps.at(n),
            Family::RandomSigns { eps, .. } => 4.0 * nf * eps.at(n) + t,
            Family::ErdosRenyi { p, .. } => {
                let p = p.at(n);
                2.0 * nf * p.min(1.0 - p) + t
            }
            Family::SmallWorld { d_frac, p } => 8.0 * Self::half_degree(d_frac, n) as f64 * p.at(n) + t,
            Family::StarErased { p } => 2.0 * nf * p.at(n) + t,
        }
    }

    /// Samples with a fresh stream seeded from `seed` and records the seed.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Network> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = self.sample(n, &mut rng)?;
        if let Some(p) = net.provenance.as_mut() {
            p.seed = Some(seed);
        }
        Ok(net)
    }
}

// ── persistence ─────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub n: usize,
    pub weights: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        NetworkFile {
            n: net.n(),
            weights: net.weights.to_rows(),
            provenance: net.provenance.clone(),
        }
    }
}

impl NetworkFile {
    pub fn into_network(self, source_name: &str) -> Result<Network> {
        if self.weights.len() != self.n {
            return Err(Error::format(
                source_name,
                format!("declared n = {} but found {} rows", self.n, self.weights.len()),
            ));
        }
        validate_rows(&self.weights, source_name)?;
        let weights = Matrix::from_rows(self.weights).map_err(|e| Error::format(source_name, e.to_string()))?;
        Network::with_provenance(weights, self.provenance)
            .map_err(|e| Error::format(source_name, e.to_string()))
    }
}

fn validate_rows(rows: &[Vec<f64>], source_name: &str) -> Result<()> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::format(source_name, "empty matrix"));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::format(
                source_name,
                format!("row {} has {} entries, expected {n} (non-square)", i + 1, row.len()),
            ));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(source_name, format!("non-finite entry in row {}", i + 1)));
        }
        if row[i] != 0.0 {
            return Err(Error::format(source_name, format!("nonzero diagonal in row {}", i + 1)));
        }
    }
    Ok(())
}

/// Writes the JSON network format. Floats use shortest round-trip decimal
/// representation, so loading reproduces the weights bit for bit.
pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let body = serde_json::to_string_pretty(&NetworkFile::from(net))
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    fs::write(path, body + "\n").map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Loads a network from JSON, or from dense CSV when the extension is `.csv`.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let name = path.display().to_string();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        parse_csv(&text, &name)
    } else {
        parse_json(&text, &name)
    }
}

pub fn parse_json(text: &str, source_name: &str) -> Result<Network> {
    let file: NetworkFile =
        serde_json::from_str(text).map_err(|e| Error::format(source_name, e.to_string()))?;
    file.into_network(source_name)
}

/// Dense CSV: `n` lines of `n` comma-separated numbers.
pub fn parse_csv(text: &str, source_name: &str) -> Result<Network> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| cell.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(source_name, format!("line {}: {e}", lineno + 1)))?;
        rows.push(row);
    }
    validate_rows(&rows, source_name)?;
    Network::new(Matrix::from_rows(rows)?)
}

/// The two small asymmetric example networks: a 4-clique with reciprocity
/// errors, and the same clique plus one influential node.
pub fn example_clique() -> Network {
    Network::from_rows(vec![
        vec![0.0, 0.95, 0.91, 0.90],
        vec![0.97, 0.0, 0.94, 0.91],
        vec![0.93, 0.90, 0.0, 0.95],
        vec![0.95, 0.99, 0.98, 0.0],
    ])
    .expect("static matrix is valid")
}

pub fn example_clique_with_hub() -> Network {
    let base = example_clique();
    let hub = [3.02, 2.95, 2.95, 2.96];
    let g = Matrix::from_fn(5, |i, j| match (i, j) {
        (4, 4) => 0.0,
        (4, j) => hub[j],
        (i, 4) => hub[i],
        (i, j) => base.weight(i, j),
    });
    Network::new(g).expect("static matrix is valid")
}
