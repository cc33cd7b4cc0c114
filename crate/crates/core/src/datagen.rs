//! Seeded synthetic instances and their sample streams.
//!
//! Every stream draws sample `t` from an RNG keyed on `(seed, t)`, so a stream
//! can be restarted at any offset and two streams with the same seed agree
//! bit for bit.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::rng::{rng_for, TAG_INSTANCE, TAG_STREAM};

/// Draw limit shared by all streams; `None` means unbounded.
#[derive(Debug, Clone, Copy)]
struct Cursor {
    next: u64,
    limit: Option<u64>,
}

impl Cursor {
    fn new() -> Self {
        Cursor {
            next: 0,
            limit: None,
        }
    }

    fn advance(&mut self) -> Result<u64> {
        if let Some(l) = self.limit {
            if self.next >= l {
                return Err(Error::StreamExhausted(l));
            }
        }
        let t = self.next;
        self.next += 1;
        Ok(t)
    }
}

macro_rules! cursor_methods {
    () => {
        /// Index of the next sample to be drawn.
        pub fn position(&self) -> u64 {
            self.cursor.next
        }

        /// Jump to sample `t`; used to split a stream between runs.
        pub fn with_offset(mut self, t: u64) -> Self {
            self.cursor.next = t;
            self
        }

        /// Refuse to draw past `n` samples in total.
        pub fn with_limit(mut self, n: u64) -> Self {
            self.cursor.limit = Some(n);
            self
        }
    };
}

fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

// ---------------------------------------------------------------------------
// Sparse linear regression

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRegressionInstance {
    pub theta_star: Vec<f64>,
    pub b: f64,
    pub eta2: f64,
    pub d: usize,
    pub s: usize,
}

#[derive(Debug, Clone)]
pub struct SparseStream {
    theta_star: Vec<f64>,
    b: f64,
    eta: f64,
    seed: u64,
    cursor: Cursor,
}

impl SparseStream {
    cursor_methods!();

    /// Sample `t` as `(x, y)` with `y = ⟨θ*, x⟩ + n`.
    pub fn sample(&self, t: u64) -> (Vec<f64>, f64) {
        let mut rng = rng_for(self.seed, TAG_STREAM, t);
        let unif = Uniform::new_inclusive(-self.b, self.b).expect("b > 0 checked at construction");
        let x: Vec<f64> = (0..self.theta_star.len())
            .map(|_| unif.sample(&mut rng))
            .collect();
        let noise: f64 = StandardNormal.sample(&mut rng);
        let y = dot(&x, &self.theta_star) + self.eta * noise;
        (x, y)
    }

    pub fn next_sample(&mut self) -> Result<(Vec<f64>, f64)> {
        let t = self.cursor.advance()?;
        Ok(self.sample(t))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn gen_sparse_regression(
    d: usize,
    s: usize,
    b: f64,
    eta2: f64,
    seed: u64,
) -> Result<(SparseRegressionInstance, SparseStream)> {
    if s == 0 || s > d {
        return arg(format!(
            "sparsity must satisfy 1 <= s <= d, got s={s}, d={d}"
        ));
    }
    if !(b > 0.0) || !b.is_finite() {
        return arg(format!("covariate bound must be positive, got {b}"));
    }
    if !(eta2 >= 0.0) || !eta2.is_finite() {
        return arg(format!("noise variance must be >= 0, got {eta2}"));
    }
    let mut rng = rng_for(seed, TAG_INSTANCE, 0);
    let mut theta_star = vec![0.0; d];
    for j in sample_indices(&mut rng, d, s) {
        theta_star[j] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    let inst = SparseRegressionInstance {
        theta_star: theta_star.clone(),
        b,
        eta2,
        d,
        s,
    };
    let stream = SparseStream {
        theta_star,
        b,
        eta: eta2.sqrt(),
        seed,
        cursor: Cursor::new(),
    };
    Ok((inst, stream))
}

// ---------------------------------------------------------------------------
// Sparse + low-rank decomposition

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionInstance {
    pub s_star: DMatrix<f64>,
    pub l_star: DMatrix<f64>,
    pub sigma2: f64,
    pub p: usize,
    pub s: usize,
    pub r: usize,
    pub alpha: f64,
}

impl DecompositionInstance {
    pub fn m_star(&self) -> DMatrix<f64> {
        &self.s_star + &self.l_star
    }
}

/// Matrix observations `X_k = M + N_k` with i.i.d. `N(0, σ²)` entries.
#[derive(Debug, Clone)]
pub struct MatrixStream {
    mean: DMatrix<f64>,
    sigma: f64,
    seed: u64,
    cursor: Cursor,
}

impl MatrixStream {
    cursor_methods!();

    pub fn new(mean: DMatrix<f64>, sigma2: f64, seed: u64) -> Self {
        MatrixStream {
            mean,
            sigma: sigma2.sqrt(),
            seed,
            cursor: Cursor::new(),
        }
    }

    pub fn sample(&self, t: u64) -> DMatrix<f64> {
        if self.sigma == 0.0 {
            return self.mean.clone();
        }
        let mut rng = rng_for(self.seed, TAG_STREAM, t);
        let (n, m) = self.mean.shape();
        let noise = gaussian_vec(&mut rng, n * m);
        let mut x = self.mean.clone();
        for (xi, e) in x.iter_mut().zip(noise) {
            *xi += self.sigma * e;
        }
        x
    }

    pub fn next_sample(&mut self) -> Result<DMatrix<f64>> {
        let t = self.cursor.advance()?;
        Ok(self.sample(t))
    }
}

/// Lower bound on the magnitude of the sparse entries; it keeps them above
/// the largest possible entry `α/p` of the low-rank part.
pub fn sparse_magnitude(alpha: f64, p: usize) -> f64 {
    f64::max(1.0, 2.0 * alpha / p as f64)
}

pub fn gen_independent_noise(
    p: usize,
    s: usize,
    r: usize,
    alpha: f64,
    sigma2: f64,
    seed: u64,
) -> Result<(DecompositionInstance, MatrixStream)> {
    if p == 0 || s > p * p || r > p {
        return arg(format!(
            "need p >= 1, s <= p^2, r <= p; got p={p}, s={s}, r={r}"
        ));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return arg(format!("spikiness alpha must be positive, got {alpha}"));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return arg(format!("noise variance must be >= 0, got {sigma2}"));
    }
    let mut rng = rng_for(seed, TAG_INSTANCE, 0);
    let mut l0 = DMatrix::zeros(p, p);
    for _ in 0..r {
        let u = unit_gaussian(&mut rng, p);
        let v = unit_gaussian(&mut rng, p);
        l0 += &u * v.transpose();
    }
    let peak = l0.amax();
    let l_star = if r == 0 || peak == 0.0 {
        l0
    } else {
        l0 * (alpha / p as f64 / peak)
    };

    let lo = sparse_magnitude(alpha, p);
    let mag = Uniform::new_inclusive(lo, 2.0 * lo).expect("lo > 0");
    let mut s_star = DMatrix::zeros(p, p);
    for idx in sample_indices(&mut rng, p * p, s) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        s_star[(idx % p, idx / p)] = sign * mag.sample(&mut rng);
    }
    let inst = DecompositionInstance {
        s_star,
        l_star,
        sigma2,
        p,
        s,
        r,
        alpha,
    };
    let stream = MatrixStream::new(inst.m_star(), sigma2, seed);
    Ok((inst, stream))
}

fn unit_gaussian(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_vec(gaussian_vec(rng, n));
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

// ---------------------------------------------------------------------------
// Linear Bayesian network y = A h + n

#[derive(Debug, Clone, PartialEq)]
pub struct BayesNetInstance {
    pub a: DMatrix<f64>,
    pub s_star: DMatrix<f64>,
    pub l_star: DMatrix<f64>,
    pub sigma_h2: f64,
    pub sigma_n2: f64,
}

impl BayesNetInstance {
    pub fn sigma_star(&self) -> DMatrix<f64> {
        &self.s_star + &self.l_star
    }
}

#[derive(Debug, Clone)]
pub struct BayesNetStream {
    a: DMatrix<f64>,
    sigma_h: f64,
    sigma_n: f64,
    seed: u64,
    cursor: Cursor,
}

impl BayesNetStream {
    cursor_methods!();

    pub fn sample(&self, t: u64) -> DVector<f64> {
        let mut rng = rng_for(self.seed, TAG_STREAM, t);
        let (p, r) = self.a.shape();
        let h = DVector::from_vec(gaussian_vec(&mut rng, r)) * self.sigma_h;
        let n = DVector::from_vec(gaussian_vec(&mut rng, p)) * self.sigma_n;
        &self.a * h + n
    }

    pub fn next_sample(&mut self) -> Result<DVector<f64>> {
        let t = self.cursor.advance()?;
        Ok(self.sample(t))
    }

    /// Next second-moment observation `y yᵀ`, whose mean is `S* + L*`.
    pub fn next_outer(&mut self) -> Result<DMatrix<f64>> {
        let y = self.next_sample()?;
        Ok(&y * y.transpose())
    }
}

pub fn gen_bayes_net(
    p: usize,
    r: usize,
    sigma_h2: f64,
    sigma_n2: f64,
    seed: u64,
) -> Result<(BayesNetInstance, BayesNetStream)> {
    if p == 0 || r > p {
        return arg(format!("need 1 <= p and r <= p, got p={p}, r={r}"));
    }
    if !(sigma_h2 >= 0.0 && sigma_n2 >= 0.0) {
        return arg("variances must be >= 0");
    }
    let mut rng = rng_for(seed, TAG_INSTANCE, 0);
    let mut a = DMatrix::zeros(p, r);
    for j in 0..r {
        a.set_column(j, &unit_gaussian(&mut rng, p));
    }
    let s_star = DMatrix::identity(p, p) * sigma_n2;
    let l_star = &a * a.transpose() * sigma_h2;
    let inst = BayesNetInstance {
        a: a.clone(),
        s_star,
        l_star,
        sigma_h2,
        sigma_n2,
    };
    let stream = BayesNetStream {
        a,
        sigma_h: sigma_h2.sqrt(),
        sigma_n: sigma_n2.sqrt(),
        seed,
        cursor: Cursor::new(),
    };
    Ok((inst, stream))
}

// ---------------------------------------------------------------------------
// Gaussian graphical models

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GgmStructure {
    Identity,
    /// Path graph `i` to `i+1`.
    Chain {
        strength: f64,
    },
    /// Square lattice on `⌈√p⌉` columns.
    Grid {
        strength: f64,
    },
    /// `edges` distinct uniformly chosen pairs.
    Random {
        edges: usize,
        strength: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GgmInstance {
    pub theta_star: DMatrix<f64>,
    pub sigma_star: DMatrix<f64>,
    pub structure: GgmStructure,
}

impl GgmInstance {
    /// Off-diagonal support of `Θ*` as `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let p = self.theta_star.nrows();
        let mut out = Vec::new();
        for j in 0..p {
            for i in 0..j {
                if self.theta_star[(i, j)] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Vectors `x ~ N(0, Θ*⁻¹)` generated as `x = L⁻ᵀ z` with `Θ* = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct GgmStream {
    chol_l: DMatrix<f64>,
    seed: u64,
    cursor: Cursor,
}

impl GgmStream {
    cursor_methods!();

    pub fn sample(&self, t: u64) -> DVector<f64> {
        let mut rng = rng_for(self.seed, TAG_STREAM, t);
        let z = DVector::from_vec(gaussian_vec(&mut rng, self.chol_l.nrows()));
        self.chol_l
            .transpose()
            .solve_upper_triangular(&z)
            .expect("Cholesky factor has a positive diagonal")
    }

    pub fn next_sample(&mut self) -> Result<DVector<f64>> {
        let t = self.cursor.advance()?;
        Ok(self.sample(t))
    }
}

pub fn gen_ggm(p: usize, structure: GgmStructure, seed: u64) -> Result<(GgmInstance, GgmStream)> {
    if p == 0 {
        return arg("p must be >= 1");
    }
    let mut theta = DMatrix::<f64>::identity(p, p);
    let mut set = |i: usize, j: usize, w: f64| {
        theta[(i, j)] = -w;
        theta[(j, i)] = -w;
    };
    match structure {
        GgmStructure::Identity => {}
        GgmStructure::Chain { strength } => {
            for i in 1..p {
                set(i - 1, i, strength);
            }
        }
        GgmStructure::Grid { strength } => {
            let cols = (p as f64).sqrt().ceil() as usize;
            for i in 0..p {
                if (i + 1) % cols != 0 && i + 1 < p {
                    set(i, i + 1, strength);
                }
                if i + cols < p {
                    set(i, i + cols, strength);
                }
            }
        }
        GgmStructure::Random { edges, strength } => {
            let pairs = p * (p - 1) / 2;
            if edges > pairs {
                return arg(format!(
                    "{edges} edges requested but only {pairs} pairs exist"
                ));
            }
            let mut rng = rng_for(seed, TAG_INSTANCE, 0);
            let all: Vec<(usize, usize)> =
                (0..p).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
            for k in sample_indices(&mut rng, pairs, edges) {
                let (i, j) = all[k];
                set(i, j, strength);
            }
        }
    }
    let chol = match Cholesky::new(theta.clone()) {
        Some(c) => c,
        None => {
            // Fall back to strict diagonal dominance.
            for i in 0..p {
                let off: f64 = (0..p)
                    .filter(|&j| j != i)
                    .map(|j| theta[(i, j)].abs())
                    .sum();
                theta[(i, i)] = off + 0.1;
            }
            Cholesky::new(theta.clone()).ok_or_else(|| {
                Error::Numerical("diagonally dominant precision matrix not PD".into())
            })?
        }
    };
    let sigma_star = chol.inverse();
    let chol_l = chol.l();
    let inst = GgmInstance {
        theta_star: theta,
        sigma_star,
        structure,
    };
    Ok((
        inst,
        GgmStream {
            chol_l,
            seed,
            cursor: Cursor::new(),
        },
    ))
}
