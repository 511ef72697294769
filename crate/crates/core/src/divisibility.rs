//! Divisibility verdicts for Pauli dynamics and their tensor products.
//!
//! Every criterion is a family of rate sums that must stay nonnegative on a
//! time grid. Values are compared after dividing by the largest effective rate
//! magnitude of the involved models at the same time, so that exponentially
//! decaying rates do not drift into the tolerance band. A grid may end with
//! `f64::INFINITY`, which is evaluated from the closed-form asymptotes.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::RateModel;
use crate::error::{Error, Result};
use crate::linalg::jacobi_eigenvalues;
use crate::DEFAULT_TOL;

/// Points in the default log-spaced grid.
pub const DEFAULT_GRID_POINTS: usize = 400;
pub const DEFAULT_GRID_START: f64 = 1e-3;
pub const DEFAULT_GRID_END: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictLabel {
    #[serde(rename = "CP_DIVISIBLE")]
    CpDivisible,
    #[serde(rename = "P_DIVISIBLE_ONLY")]
    PDivisibleOnly,
    #[serde(rename = "NOT_P_DIVISIBLE")]
    NotPDivisible,
    #[serde(rename = "UNDETERMINED")]
    Undetermined,
}

impl VerdictLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictLabel::CpDivisible => "CP_DIVISIBLE",
            VerdictLabel::PDivisibleOnly => "P_DIVISIBLE_ONLY",
            VerdictLabel::NotPDivisible => "NOT_P_DIVISIBLE",
            VerdictLabel::Undetermined => "UNDETERMINED",
        }
    }

    /// True for CP-divisible and P-divisible-only verdicts.
    pub fn is_p_divisible(&self) -> bool {
        matches!(self, VerdictLabel::CpDivisible | VerdictLabel::PDivisibleOnly)
    }
}

impl std::fmt::Display for VerdictLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisibilityVerdict {
    pub label: VerdictLabel,
    /// First grid time at which the deciding criterion is negative.
    #[serde(with = "crate::serde_time::option")]
    pub witness_time: Option<f64>,
    pub witness_detail: String,
    /// Smallest normalized value of the reported criterion over the grid.
    pub margin: f64,
}

/// Three-way classification from the CP and P margins.
///
/// A margin in `[-tol, 0)` is inconclusive; nonnegative margins pass.
pub fn classify(cp_margin: f64, p_margin: f64, tol: f64) -> VerdictLabel {
    if cp_margin >= 0.0 {
        VerdictLabel::CpDivisible
    } else if cp_margin >= -tol {
        VerdictLabel::Undetermined
    } else if p_margin >= 0.0 {
        VerdictLabel::PDivisibleOnly
    } else if p_margin >= -tol {
        VerdictLabel::Undetermined
    } else {
        VerdictLabel::NotPDivisible
    }
}

/// A sum of rates, each addressed by (model, rate index).
#[derive(Clone, Debug)]
struct Term {
    parts: Vec<(usize, usize)>,
    label: String,
}

fn rate_name(model: usize, k: usize, tensor: bool) -> String {
    if tensor {
        format!("gamma_{}^({})", k + 1, model + 1)
    } else {
        format!("gamma_{}", k + 1)
    }
}

fn term(parts: &[(usize, usize)], tensor: bool) -> Term {
    let label = parts.iter().map(|&(m, k)| rate_name(m, k, tensor)).collect::<Vec<_>>().join(" + ");
    Term { parts: parts.to_vec(), label }
}

fn cp_terms(models: usize) -> Vec<Term> {
    (0..models).flat_map(|m| (0..3).map(move |k| term(&[(m, k)], models > 1))).collect()
}

fn pair_terms(model: usize, tensor: bool) -> Vec<Term> {
    [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(a, b)| term(&[(model, a), (model, b)], tensor))
        .collect()
}

fn p_terms(models: usize) -> Vec<Term> {
    let mut out: Vec<Term> = (0..models).flat_map(|m| pair_terms(m, models > 1)).collect();
    if models == 2 {
        for i in 0..3 {
            for j in 0..3 {
                out.push(term(&[(0, i), (1, j)], true));
            }
        }
    }
    out
}

/// Normalized values of `terms` at time `t`.
fn evaluate_terms(models: &[&RateModel], terms: &[Term], t: f64) -> Result<Vec<f64>> {
    if t.is_infinite() {
        let asym: Vec<_> = models.iter().map(|m| m.asymptote()).collect::<Result<_>>()?;
        let max_of = |f: &dyn Fn(usize, usize) -> f64| {
            (0..models.len())
                .flat_map(|m| (0..3).map(move |k| (m, k)))
                .fold(0.0f64, |acc, (m, k)| acc.max(f(m, k).abs()))
        };
        let lim_scale = max_of(&|m, k| asym[m].limit[k]);
        let dec_scale = max_of(&|m, k| asym[m].decay[k]);
        return Ok(terms
            .iter()
            .map(|term| {
                let lim: f64 = term.parts.iter().map(|&(m, k)| asym[m].limit[k]).sum();
                if lim != 0.0 {
                    return lim / lim_scale;
                }
                let dec: f64 = term.parts.iter().map(|&(m, k)| asym[m].decay[k]).sum();
                if dec_scale == 0.0 {
                    0.0
                } else {
                    dec / dec_scale
                }
            })
            .collect());
    }
    let scaled: Vec<([f64; 3], f64)> = models.iter().map(|m| m.log_scaled_rates(t)).collect::<Result<_>>()?;
    let log_max = scaled
        .iter()
        .map(|(v, l)| v.iter().fold(0.0f64, |a, x| a.max(x.abs())).ln() - l)
        .fold(f64::NEG_INFINITY, f64::max);
    let normalized: Vec<[f64; 3]> = scaled
        .iter()
        .map(|(v, l)| {
            if log_max == f64::NEG_INFINITY {
                [0.0; 3]
            } else {
                let w = (-l - log_max).exp();
                v.map(|x| x * w)
            }
        })
        .collect();
    Ok(terms
        .iter()
        .map(|term| term.parts.iter().map(|&(m, k)| normalized[m][k]).sum())
        .collect())
}

#[derive(Clone, Debug)]
struct Scan {
    margin: f64,
    first_violation: Option<(f64, String)>,
}

fn scan(models: &[&RateModel], terms: &[Term], grid: &[f64]) -> Result<Scan> {
    let values: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&t| evaluate_terms(models, terms, t))
        .collect::<Result<_>>()?;
    let mut margin = f64::INFINITY;
    let mut first_violation = None;
    for (&t, vals) in grid.iter().zip(&values) {
        for (term, &v) in terms.iter().zip(vals) {
            margin = margin.min(v);
            if v < 0.0 && first_violation.is_none() {
                first_violation = Some((t, format!("{} < 0", term.label)));
            }
        }
    }
    Ok(Scan { margin, first_violation })
}

fn validate_grid(models: &[&RateModel], grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("time grid is empty".into()));
    }
    if grid.iter().any(|t| t.is_nan() || *t < 0.0) {
        return Err(Error::InvalidInput("grid times must be >= 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("grid must be strictly increasing".into()));
    }
    if grid.last().is_some_and(|t| t.is_infinite()) && !models.iter().all(|m| m.has_asymptote()) {
        return Err(Error::NoAsymptote("grid contains infinity but a model has no closed-form limit".into()));
    }
    Ok(())
}

/// 400 log-spaced times on `[1e-3, 20]` (clipped to tabulated ranges), plus
/// infinity when every model has a closed-form limit.
pub fn default_grid(models: &[&RateModel]) -> Vec<f64> {
    let end = models
        .iter()
        .filter_map(|m| m.time_limit())
        .fold(DEFAULT_GRID_END, f64::min);
    let mut grid = log_grid(DEFAULT_GRID_START.min(end / 2.0), end, DEFAULT_GRID_POINTS);
    if models.iter().all(|m| m.has_asymptote()) {
        grid.push(f64::INFINITY);
    }
    grid
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                (la + (lb - la) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

fn verdict(cp: &Scan, p: &Scan, tol: f64, report_p: bool) -> DivisibilityVerdict {
    let label = classify(cp.margin, p.margin, tol);
    let decisive = match label {
        VerdictLabel::CpDivisible => None,
        VerdictLabel::PDivisibleOnly => cp.first_violation.clone(),
        VerdictLabel::NotPDivisible => p.first_violation.clone(),
        VerdictLabel::Undetermined => {
            if cp.margin >= -tol {
                cp.first_violation.clone()
            } else {
                p.first_violation.clone()
            }
        }
    };
    let (witness_time, witness_detail) = match decisive {
        Some((t, d)) => (Some(t), d),
        None => (None, String::new()),
    };
    DivisibilityVerdict {
        label,
        witness_time,
        witness_detail,
        margin: if report_p { p.margin } else { cp.margin },
    }
}

fn single_verdict(model: &RateModel, grid: &[f64], tol: f64, report_p: bool) -> Result<DivisibilityVerdict> {
    let models = [model];
    validate_grid(&models, grid)?;
    let cp = scan(&models, &cp_terms(1), grid)?;
    let p = scan(&models, &p_terms(1), grid)?;
    Ok(verdict(&cp, &p, tol, report_p))
}

/// CP-divisibility: all rates nonnegative on the grid. The margin is the
/// smallest normalized rate.
pub fn cp_divisible(model: &RateModel, grid: &[f64], tol: f64) -> Result<DivisibilityVerdict> {
    single_verdict(model, grid, tol, false)
}

/// P-divisibility: all pairwise rate sums nonnegative on the grid. The margin
/// is the smallest normalized pair sum.
pub fn p_divisible(model: &RateModel, grid: &[f64], tol: f64) -> Result<DivisibilityVerdict> {
    single_verdict(model, grid, tol, true)
}

/// P-divisibility of the product dynamics: both maps P-divisible and all nine
/// cross sums `gamma_i^(1) + gamma_j^(2)` nonnegative.
pub fn tensor_p_divisible(
    model1: &RateModel,
    model2: &RateModel,
    grid: &[f64],
    tol: f64,
) -> Result<DivisibilityVerdict> {
    let models = [model1, model2];
    validate_grid(&models, grid)?;
    let cp = scan(&models, &cp_terms(2), grid)?;
    let p = scan(&models, &p_terms(2), grid)?;
    Ok(verdict(&cp, &p, tol, true))
}

/// Hermitian coefficient matrix of a qubit generator in the basis
/// `F_k = sigma_k / sqrt 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KossakowskiMatrix {
    entries: [[C64; 3]; 3],
}

impl KossakowskiMatrix {
    pub fn new(entries: [[C64; 3]; 3]) -> Result<Self> {
        for i in 0..3 {
            for j in 0..3 {
                if (entries[i][j] - entries[j][i].conj()).norm() > crate::linalg::HERMITICITY_TOL {
                    return Err(Error::InvalidInput(format!("Kossakowski matrix not Hermitian at ({i}, {j})")));
                }
            }
        }
        Ok(KossakowskiMatrix { entries })
    }

    pub fn zeros() -> Self {
        KossakowskiMatrix { entries: [[C64::new(0.0, 0.0); 3]; 3] }
    }

    pub fn diagonal(d: [f64; 3]) -> Self {
        let mut k = Self::zeros();
        for i in 0..3 {
            k.entries[i][i] = C64::new(d[i], 0.0);
        }
        k
    }

    /// Matrix of a Pauli model at time `t`: `diag(lambda gamma_1, lambda gamma_2, lambda gamma_3)`.
    pub fn from_model(model: &RateModel, t: f64) -> Result<Self> {
        Ok(Self::diagonal(model.effective_rates(t)?))
    }

    pub fn entries(&self) -> &[[C64; 3]; 3] {
        &self.entries
    }

    pub fn min_eigenvalue(&self) -> f64 {
        jacobi_eigenvalues(self.entries).into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Similarity `V` together with its induced action on the traceless basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjugationSpec {
    pub v: [[C64; 2]; 2],
    /// `V F_i^dag V^-1 = sum_j vcal[i][j] F_j^dag`.
    pub vcal: [[C64; 3]; 3],
}

type M2 = [[C64; 2]; 2];

fn mul2(a: &M2, b: &M2) -> M2 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j]))
}

fn pauli2(k: usize) -> M2 {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    match k {
        0 => [[o, z], [z, o]],
        1 => [[z, o], [o, z]],
        2 => [[z, -i], [i, z]],
        _ => [[o, z], [z, -o]],
    }
}

/// Computes the induced matrix of `X -> V X V^-1` on `sigma_1..3 / sqrt 2`.
pub fn conjugation_matrix(v: [[C64; 2]; 2]) -> Result<ConjugationSpec> {
    let det = v[0][0] * v[1][1] - v[0][1] * v[1][0];
    if !(det.norm() > 1e-12) {
        return Err(Error::InvalidInput(format!("V is singular (|det| = {})", det.norm())));
    }
    let inv = [[v[1][1] / det, -v[0][1] / det], [-v[1][0] / det, v[0][0] / det]];
    let mut vcal = [[C64::new(0.0, 0.0); 3]; 3];
    let mut images = [[[C64::new(0.0, 0.0); 2]; 2]; 3];
    for i in 0..3 {
        images[i] = mul2(&mul2(&v, &pauli2(i + 1)), &inv);
        for j in 0..3 {
            let prod = mul2(&pauli2(j + 1), &images[i]);
            vcal[i][j] = (prod[0][0] + prod[1][1]) / 2.0;
        }
    }
    for i in 0..3 {
        for r in 0..2 {
            for c in 0..2 {
                let recon: C64 = (0..3).map(|j| vcal[i][j] * pauli2(j + 1)[r][c]).sum();
                if (recon - images[i][r][c]).norm() > 1e-10 {
                    return Err(Error::Numerical(format!("conjugation reconstruction failed for sigma_{}", i + 1)));
                }
            }
        }
    }
    Ok(ConjugationSpec { v, vcal })
}

/// `(sigma_k + sigma_l) / sqrt 2` for `1 <= k < l <= 3`.
pub fn v_kl(k: usize, l: usize) -> [[C64; 2]; 2] {
    let (a, b) = (pauli2(k), pauli2(l));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    std::array::from_fn(|r| std::array::from_fn(|c| (a[r][c] + b[r][c]) * s))
}

/// The finite family `{1, V^12, V^13, V^23}` used for necessity checks.
pub fn standard_conjugations() -> Vec<ConjugationSpec> {
    [pauli2(0), v_kl(1, 2), v_kl(1, 3), v_kl(2, 3)]
        .into_iter()
        .map(|v| conjugation_matrix(v).expect("unitary family"))
        .collect()
}

/// Smallest eigenvalue of `K1 + Vcal^dag K2 Vcal`. Negative values certify
/// that the product dynamics is not P-divisible at that time.
pub fn necessary_tensor_condition(k1: &KossakowskiMatrix, k2: &KossakowskiMatrix, spec: &ConjugationSpec) -> f64 {
    let (a, b) = (&spec.vcal, &k2.entries);
    let m: [[C64; 3]; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut acc = k1.entries[i][j];
            for r in 0..3 {
                for s in 0..3 {
                    acc += a[r][i].conj() * b[r][s] * a[s][j];
                }
            }
            acc
        })
    });
    jacobi_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min)
}

/// Checks the sufficient conditions for P-divisibility of the product when
/// only `gamma_i^(1)` and `gamma_j^(2)` (1-based) may be negative.
pub fn sufficient_condition_check(
    model1: &RateModel,
    model2: &RateModel,
    i: usize,
    j: usize,
    grid: &[f64],
) -> Result<bool> {
    if !(1..=3).contains(&i) || !(1..=3).contains(&j) {
        return Err(Error::InvalidInput(format!("indices must be in 1..=3, got ({i}, {j})")));
    }
    let (i, j) = (i - 1, j - 1);
    let models = [model1, model2];
    validate_grid(&models, grid)?;
    let mut terms = Vec::new();
    for k in 0..3 {
        if k != i {
            terms.push(term(&[(0, k)], true));
            terms.push(term(&[(0, k), (0, i)], true));
        }
        if k != j {
            terms.push(term(&[(1, k)], true));
            terms.push(term(&[(1, k), (1, j)], true));
        }
        terms.push(term(&[(0, k), (1, j)], true));
        terms.push(term(&[(0, i), (1, k)], true));
    }
    Ok(scan(&models, &terms, grid)?.margin >= -DEFAULT_TOL)
}

fn gaussian_pair(rng: &mut ChaCha8Rng) -> ([C64; 4], [C64; 4]) {
    let mut draw = || -> [C64; 4] {
        std::array::from_fn(|_| C64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)))
    };
    let (a, b) = (draw(), draw());
    orthonormalize(a, b)
}

/// Gram-Schmidt on two vectors of `C^4`.
pub(crate) fn orthonormalize(a: [C64; 4], mut b: [C64; 4]) -> ([C64; 4], [C64; 4]) {
    let norm = |v: &[C64; 4]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let na = norm(&a);
    let a = a.map(|z| z / na);
    let overlap: C64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
    for (y, x) in b.iter_mut().zip(&a) {
        *y -= overlap * x;
    }
    let nb = norm(&b);
    (a, b.map(|z| z / nb))
}

/// `G_t(phi, psi)` for orthonormal `phi, psi`, with effective rates `g1`, `g2`.
pub fn positivity_functional(g1: [f64; 3], g2: [f64; 3], phi: &[C64; 4], psi: &[C64; 4]) -> f64 {
    let big_phi: M2 = [[phi[0], phi[1]], [phi[2], phi[3]]];
    let big_psi: M2 = [[psi[0], psi[1]], [psi[2], psi[3]]];
    let dag = |m: &M2| -> M2 { std::array::from_fn(|r| std::array::from_fn(|c| m[c][r].conj())) };
    let a = mul2(&big_phi, &dag(&big_psi));
    let b_t = mul2(&dag(&big_psi), &big_phi);
    let b: M2 = std::array::from_fn(|r| std::array::from_fn(|c| b_t[c][r]));
    let mut g = 0.0;
    for k in 0..3 {
        let s = pauli2(k + 1);
        let tr = |m: &M2| mul2(&s, m)[0][0] + mul2(&s, m)[1][1];
        g += g1[k] * tr(&a).norm_sqr() / 2.0 + g2[k] * tr(&b).norm_sqr() / 2.0;
    }
    g
}

/// Minimum of `G_t` over `n_samples` Haar-random orthonormal pairs.
///
/// Sample `i` draws from its own ChaCha stream `i` seeded by `seed`.
pub fn positivity_functional_sample(
    model1: &RateModel,
    model2: &RateModel,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be >= 1".into()));
    }
    let (g1, g2) = (model1.effective_rates(t)?, model2.effective_rates(t)?);
    Ok((0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let (phi, psi) = gaussian_pair(&mut rng);
            positivity_functional(g1, g2, &phi, &psi)
        })
        .reduce(|| f64::INFINITY, f64::min))
}
