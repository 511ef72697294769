//! Convex mixtures of the three pure dephasing semigroups.
//!
//! With weights `p = (p1, p2, p3)` on the simplex the mixed channel is a Pauli
//! map with decay factors `lambda_k = p_k + e^{-2t}(1 - p_k)` and rates
//! `gamma_1 = mu_1 - mu_2 - mu_3` (and cyclic), where
//! `mu_k = -(1 - p_k) / (1 + p_k (e^{2t} - 1))`.
//!
//! For interior weights every rate decays like `e^{-2t}`, so most routines here
//! work with the rescaled quantity `e^{2t} gamma_k`, which keeps its sign and
//! stays O(1) for all `t`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::DEFAULT_TOL;

/// Largest bisector weight `p` for which `(p, p, 1 - 2p)` is CP-divisible.
pub const P_STAR: f64 = 0.381_966_011_250_105_1;

/// Cells with `|margin|` below this are labeled [`RegionLabel::Boundary`].
pub const BOUNDARY_BAND: f64 = 1e-9;

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct MixtureWeights {
    p: [f64; 3],
}

impl MixtureWeights {
    /// Validates a probability triple. Entries down to `-1e-12` are clamped to
    /// zero; the sum must be 1 within `1e-12`.
    pub fn new(p1: f64, p2: f64, p3: f64) -> Result<Self> {
        let raw = [p1, p2, p3];
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite mixture weights {raw:?}")));
        }
        if raw.iter().any(|&x| x < -WEIGHT_TOL) {
            return Err(Error::InvalidInput(format!("negative mixture weight in {raw:?}")));
        }
        let sum: f64 = raw.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidInput(format!(
                "mixture weights {raw:?} sum to {sum}, not 1"
            )));
        }
        Ok(MixtureWeights { p: raw.map(|x| x.max(0.0)) })
    }

    /// Weights on the bisector `(p, p, 1 - 2p)`.
    pub fn bisector(p: f64) -> Result<Self> {
        Self::new(p, p, 1.0 - 2.0 * p)
    }

    /// Weights from the first two coordinates, `p3 = 1 - p1 - p2`.
    pub fn from_plane(p1: f64, p2: f64) -> Result<Self> {
        Self::new(p1, p2, 1.0 - p1 - p2)
    }

    pub fn centroid() -> Self {
        MixtureWeights { p: [1.0 / 3.0; 3] }
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.p
    }

    pub fn get(&self, k: usize) -> f64 {
        self.p[k]
    }

    pub fn product(&self) -> f64 {
        self.p[0] * self.p[1] * self.p[2]
    }

    pub fn is_interior(&self) -> bool {
        self.p.iter().all(|&x| x > 0.0)
    }

    /// Index of the unit weight when `p` is a vertex of the simplex.
    pub fn corner(&self) -> Option<usize> {
        self.p.iter().position(|&x| x == 1.0)
    }
}

impl TryFrom<[f64; 3]> for MixtureWeights {
    type Error = Error;

    fn try_from(p: [f64; 3]) -> Result<Self> {
        MixtureWeights::new(p[0], p[1], p[2])
    }
}

impl From<MixtureWeights> for [f64; 3] {
    fn from(w: MixtureWeights) -> Self {
        w.p
    }
}

/// Decay factors `(1, lambda_1, lambda_2, lambda_3)`; `t = inf` gives `(1, p)`.
pub fn mixture_eigenvalues(p: &MixtureWeights, t: f64) -> [f64; 4] {
    let e = (-2.0 * t).exp();
    let mut out = [1.0; 4];
    for k in 0..3 {
        out[k + 1] = p.p[k] + e * (1.0 - p.p[k]);
    }
    out
}

/// `e^{2t} mu_k(t)`, evaluated without forming `e^{2t}`.
fn scaled_mu(p: &MixtureWeights, t: f64) -> [f64; 3] {
    let e = (-2.0 * t).exp();
    let one_minus_e = -(-2.0 * t).exp_m1();
    p.p.map(|pk| -(1.0 - pk) / (e + pk * one_minus_e))
}

fn mu(p: &MixtureWeights, t: f64) -> [f64; 3] {
    let e = (-2.0 * t).exp();
    scaled_mu(p, t).map(|m| m * e)
}

fn combine(m: [f64; 3]) -> [f64; 3] {
    [m[0] - m[1] - m[2], m[1] - m[0] - m[2], m[2] - m[0] - m[1]]
}

/// Rates `(gamma_1, gamma_2, gamma_3)` at time `t`.
pub fn mixture_rates(p: &MixtureWeights, t: f64) -> [f64; 3] {
    combine(mu(p, t))
}

/// `e^{2t} gamma_k(t)`. Finite for all `t` when `p` is interior.
pub fn scaled_mixture_rates(p: &MixtureWeights, t: f64) -> [f64; 3] {
    combine(scaled_mu(p, t))
}

/// Rates as `values * e^{-log_scale}`, chosen so that `values` stays O(1).
pub fn log_scaled_rates(p: &MixtureWeights, t: f64) -> ([f64; 3], f64) {
    if p.is_interior() && p.corner().is_none() {
        (scaled_mixture_rates(p, t), 2.0 * t)
    } else {
        (mixture_rates(p, t), 0.0)
    }
}

/// Large-time form `gamma_k(t) = limit_k + decay_k e^{-2t} + O(e^{-4t})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateAsymptote {
    pub limit: [f64; 3],
    pub decay: [f64; 3],
}

impl RateAsymptote {
    /// Leading nonzero behavior of the sum of entry `i` here and entry `j` of
    /// `other`, normalized by the largest coefficient of the same order.
    pub fn leading_sum(&self, i: usize, other: &RateAsymptote, j: usize) -> f64 {
        let lim = self.limit[i] + other.limit[j];
        if lim != 0.0 {
            let scale = max_abs(&self.limit).max(max_abs(&other.limit));
            return lim / scale;
        }
        let dec = self.decay[i] + other.decay[j];
        let scale = max_abs(&self.decay).max(max_abs(&other.decay));
        if scale == 0.0 {
            0.0
        } else {
            dec / scale
        }
    }
}

fn max_abs(v: &[f64; 3]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

pub fn mixture_asymptote(p: &MixtureWeights) -> RateAsymptote {
    let mut lim_mu = [0.0; 3];
    let mut dec_mu = [0.0; 3];
    for k in 0..3 {
        let pk = p.p[k];
        if pk == 0.0 {
            lim_mu[k] = -1.0;
        } else {
            dec_mu[k] = -(1.0 - pk) / pk;
        }
    }
    RateAsymptote { limit: combine(lim_mu), decay: combine(dec_mu) }
}

/// Numerators `a_k` with `gamma_k(t) ~ e^{-2t} a_k / (p1 p2 p3)` for large `t`.
pub fn asymptotic_rate_coefficients(p: &MixtureWeights) -> Result<[f64; 3]> {
    if !p.is_interior() {
        return Err(Error::BoundaryWeights(p.p));
    }
    Ok(asymptotic_numerators(p))
}

fn asymptotic_numerators(p: &MixtureWeights) -> [f64; 3] {
    let [p1, p2, p3] = p.p;
    let (s23, s13, s12) = (p2 * p3 * (p2 + p3), p1 * p3 * (p1 + p3), p1 * p2 * (p1 + p2));
    [-s23 + s13 + s12, s23 - s13 + s12, s23 + s13 - s12]
}

/// CP-divisibility of the mixture via the three region inequalities.
///
/// Margins are the inequality left-hand sides in the `(p1, p2)` plane. Vertices
/// of the simplex are CP; other boundary points are not.
pub fn cp_region_test(p: &MixtureWeights) -> (bool, [f64; 3]) {
    let [p1, p2, _] = p.p;
    let margins = [
        p1 * p2 * (p1 + p2) + p2 * p2 - p1 * p1 + p1 - p2,
        p2 * p1 * (p1 + p2) + p1 * p1 - p2 * p2 + p2 - p1,
        (1.0 + p1 * p2) * (p1 + p2) - p1 * p1 - p2 * p2 - 4.0 * p1 * p2,
    ];
    if p.corner().is_some() {
        return (true, margins);
    }
    if !p.is_interior() {
        return (false, margins);
    }
    (margins.iter().all(|&m| m >= -DEFAULT_TOL), margins)
}

/// Index of the rate that eventually turns negative, if any.
pub fn negative_index(p: &MixtureWeights) -> Option<usize> {
    if p.corner().is_some() {
        return None;
    }
    if let Some(k) = p.p.iter().position(|&x| x == 0.0) {
        return Some(k);
    }
    let a = asymptotic_numerators(p);
    let (k, &v) = a
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("three entries");
    (v < 0.0).then_some(k)
}

fn check_bisector_domain(p: f64, q: f64) -> Result<()> {
    if !(p > P_STAR && p <= 0.5) {
        return Err(Error::Domain(format!("p = {p} must lie in (p*, 1/2]")));
    }
    if !(0.0..=P_STAR).contains(&q) {
        return Err(Error::Domain(format!("q = {q} must lie in [0, p*]")));
    }
    Ok(())
}

/// Asymptotic tensor P-divisibility for `p = (p, p, 1 - 2p)` and `q = (q, q, 1 - 2q)`.
///
/// Returns both inequality margins; the pair is accepted when each is `>= -1e-9`.
pub fn bisector_tensor_test(p: f64, q: f64) -> Result<(bool, [f64; 2])> {
    check_bisector_domain(p, q)?;
    let a = q * (1.0 - 2.0 * q) + p * (1.0 - 6.0 * q + 7.0 * q * q)
        - p * p * (2.0 - 7.0 * q + 4.0 * q * q);
    let b = 1.0 - 2.0 * q - p * (3.0 - 7.0 * q) + p * p * (1.0 - 4.0 * q);
    Ok((a >= -DEFAULT_TOL && b >= -DEFAULT_TOL, [a, b]))
}

/// Membership of `q` in the tensor region of `p` at time `t` (`f64::INFINITY` allowed).
///
/// The margins are the sums `gamma_k*^p + gamma_j^q`, `j = 1, 2, 3`, where `k*`
/// is the negative rate of `p`, normalized by the largest rate magnitude of the
/// two maps at that time. At infinity the leading asymptotic coefficients are
/// used instead.
pub fn tensor_region_test(p: &MixtureWeights, q: &MixtureWeights, t: f64) -> Result<(bool, [f64; 3])> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    if cp_region_test(p).0 {
        return Err(Error::Precondition(format!(
            "p = {:?} is CP-divisible; the tensor region is defined only for P-only p",
            p.p
        )));
    }
    let k = negative_index(p).ok_or_else(|| {
        Error::Numerical(format!("no negative rate found for non-CP weights {:?}", p.p))
    })?;
    let mut margins = [0.0; 3];
    if t.is_infinite() {
        let (ap, aq) = (mixture_asymptote(p), mixture_asymptote(q));
        for (j, m) in margins.iter_mut().enumerate() {
            *m = ap.leading_sum(k, &aq, j);
        }
    } else {
        let (sp, lp) = log_scaled_rates(p, t);
        let (sq, lq) = log_scaled_rates(q, t);
        let log_max = (max_abs(&sp).ln() - lp).max(max_abs(&sq).ln() - lq);
        let wp = (-lp - log_max).exp();
        let wq = (-lq - log_max).exp();
        for (j, m) in margins.iter_mut().enumerate() {
            *m = sp[k] * wp + sq[j] * wq;
        }
    }
    Ok((margins.iter().all(|&m| m >= -DEFAULT_TOL), margins))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    #[serde(rename = "CP")]
    Cp,
    #[serde(rename = "P_ONLY")]
    POnly,
    #[serde(rename = "N2")]
    N2,
    #[serde(rename = "P2_TENSOR")]
    P2Tensor,
    #[serde(rename = "BOUNDARY")]
    Boundary,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::Cp => "CP",
            RegionLabel::POnly => "P_ONLY",
            RegionLabel::N2 => "N2",
            RegionLabel::P2Tensor => "P2_TENSOR",
            RegionLabel::Boundary => "BOUNDARY",
        }
    }

    pub const ALL: [RegionLabel; 5] = [
        RegionLabel::Cp,
        RegionLabel::POnly,
        RegionLabel::N2,
        RegionLabel::P2Tensor,
        RegionLabel::Boundary,
    ];
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RegionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegionLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown region label {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagramMode {
    /// Single-map diagram over `(p1, p2)`.
    Fig1,
    /// Bisector pairs `(p, q)`.
    Fig2,
    /// Tensor region over `(q1, q2)` for a fixed `p`.
    Fig3,
}

impl std::str::FromStr for DiagramMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(DiagramMode::Fig1),
            "fig2" => Ok(DiagramMode::Fig2),
            "fig3" => Ok(DiagramMode::Fig3),
            _ => Err(Error::InvalidInput(format!("unknown diagram mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramParams {
    /// Fixed first map for [`DiagramMode::Fig3`].
    pub p: MixtureWeights,
    /// Evaluation time for [`DiagramMode::Fig3`]; infinite means asymptotic.
    #[serde(with = "crate::serde_time")]
    pub t: f64,
}

impl Default for DiagramParams {
    fn default() -> Self {
        DiagramParams { p: MixtureWeights { p: [0.4, 0.4, 0.2] }, t: f64::INFINITY }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramCell {
    pub coord1: f64,
    pub coord2: f64,
    pub label: RegionLabel,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramGrid {
    pub mode: DiagramMode,
    pub resolution: usize,
    pub cells: Vec<DiagramCell>,
}

impl DiagramGrid {
    pub fn count(&self, label: RegionLabel) -> usize {
        self.cells.iter().filter(|c| c.label == label).count()
    }
}

fn min3(m: &[f64]) -> f64 {
    m.iter().copied().fold(f64::INFINITY, f64::min)
}

fn banded(label: RegionLabel, margin: f64) -> RegionLabel {
    if margin.abs() < BOUNDARY_BAND {
        RegionLabel::Boundary
    } else {
        label
    }
}

fn fig1_cell(p: &MixtureWeights) -> (RegionLabel, f64) {
    let (cp, m) = cp_region_test(p);
    let margin = min3(&m);
    if p.corner().is_some() {
        return (RegionLabel::Cp, margin);
    }
    let label = if cp { RegionLabel::Cp } else { RegionLabel::POnly };
    (banded(label, margin), margin)
}

/// Labeled grid of cell centers for one of the three diagram kinds.
///
/// Simplex diagrams only contain cells whose centers lie in the simplex.
/// Cells are ordered by the first coordinate, then the second.
pub fn diagram(mode: DiagramMode, resolution: usize, params: &DiagramParams) -> Result<DiagramGrid> {
    if resolution < 2 {
        return Err(Error::InvalidInput(format!("resolution must be >= 2, got {resolution}")));
    }
    if mode == DiagramMode::Fig3 && cp_region_test(&params.p).0 {
        return Err(Error::Precondition(format!(
            "fig3 needs a P-only first map, got CP weights {:?}",
            params.p.p
        )));
    }
    let n = resolution as f64;
    let rows: Vec<Result<Vec<DiagramCell>>> = (0..resolution)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(resolution);
            for j in 0..resolution {
                let cell = match mode {
                    DiagramMode::Fig1 | DiagramMode::Fig3 => {
                        let (c1, c2) = ((i as f64 + 0.5) / n, (j as f64 + 0.5) / n);
                        if c1 + c2 > 1.0 + WEIGHT_TOL {
                            continue;
                        }
                        let w = MixtureWeights::from_plane(c1, c2)?;
                        let (label, margin) = if mode == DiagramMode::Fig1 {
                            fig1_cell(&w)
                        } else {
                            let (label, margin) = fig1_cell(&w);
                            if label == RegionLabel::Cp {
                                let (inside, m) = tensor_region_test(&params.p, &w, params.t)?;
                                let margin = min3(&m);
                                let label = if inside { RegionLabel::P2Tensor } else { RegionLabel::N2 };
                                (banded(label, margin), margin)
                            } else {
                                (label, margin)
                            }
                        };
                        DiagramCell { coord1: c1, coord2: c2, label, margin }
                    }
                    DiagramMode::Fig2 => {
                        let p = P_STAR + (i as f64 + 0.5) * (0.5 - P_STAR) / n;
                        let q = (j as f64 + 0.5) * P_STAR / n;
                        let (inside, m) = bisector_tensor_test(p, q)?;
                        let margin = m[0].min(m[1]);
                        let label = if inside { RegionLabel::P2Tensor } else { RegionLabel::N2 };
                        DiagramCell { coord1: p, coord2: q, label: banded(label, margin), margin }
                    }
                };
                row.push(cell);
            }
            Ok(row)
        })
        .collect();
    let mut cells = Vec::new();
    for row in rows {
        cells.extend(row?);
    }
    Ok(DiagramGrid { mode, resolution, cells })
}

/// Coefficients `(alpha_0, alpha_1, alpha_2)` of the `gamma_3` numerator in
/// powers of `e^{2t}`.
pub fn numerator_alpha(p: &MixtureWeights) -> [f64; 3] {
    let [p1, p2, p3] = p.p;
    [
        (1.0 - p1) * (1.0 - p2) * (1.0 - p3),
        2.0 * p3 * (1.0 - p2) * (1.0 - p1),
        -p1 * p1 * p2 - p1 * p2 * p2 + p1 * p1 * p3 + p2 * p2 * p3 + p1 * p3 * p3 + p2 * p3 * p3,
    ]
}

/// Denominator matching [`numerator_alpha`], `prod_k (1 + p_k (e^{2t} - 1))`.
pub fn numerator_alpha_denominator(p: &MixtureWeights, t: f64) -> f64 {
    let xm1 = (2.0 * t).exp_m1();
    p.p.iter().map(|&pk| 1.0 + pk * xm1).product()
}

/// Numerator coefficients of `gamma_3^p + gamma_k^q` on the bisector, in
/// ascending powers of `e^{2t}`: four for `k = 3`, three for `k = 1, 2`.
pub fn numerator_beta(p: f64, q: f64, k: usize) -> Result<Vec<f64>> {
    check_bisector_domain(p, q)?;
    let (p2, q2) = (p * p, q * q);
    match k {
        3 => Ok(vec![
            8.0 * q * (1.0 - q) * p * (1.0 - p),
            6.0 * (1.0 - q) * (1.0 - p) * (q + p * (1.0 - 4.0 * q)),
            2.0 * (2.0 - 6.0 * q + 5.0 * q2 - 2.0 * p * (3.0 - 10.0 * q + 9.0 * q2)
                + p2 * (5.0 - 18.0 * q + 12.0 * q2)),
            2.0 * (q * (1.0 - 2.0 * q) + p * (1.0 - 6.0 * q + 7.0 * q2)
                - p2 * (2.0 - 7.0 * q + 4.0 * q2)),
        ]),
        1 | 2 => Ok(vec![
            8.0 * q * p * (1.0 - p),
            2.0 * (1.0 - p) * (3.0 * q + p * (1.0 - 8.0 * q)),
            2.0 * (1.0 - 2.0 * q - p * (3.0 - 7.0 * q) + p2 * (1.0 - 4.0 * q)),
        ]),
        _ => Err(Error::Domain(format!("rate index must be 1, 2 or 3, got {k}"))),
    }
}

/// Positive denominator matching [`numerator_beta`].
pub fn numerator_beta_denominator(p: f64, q: f64, k: usize, t: f64) -> Result<f64> {
    check_bisector_domain(p, q)?;
    let xm1 = (2.0 * t).exp_m1();
    let common = (1.0 + p * xm1) * (1.0 + (1.0 - 2.0 * p) * xm1) * (1.0 + (1.0 - 2.0 * q) * xm1);
    match k {
        3 => Ok(common * (1.0 + q * xm1)),
        1 | 2 => Ok(common),
        _ => Err(Error::Domain(format!("rate index must be 1, 2 or 3, got {k}"))),
    }
}

/// Sign changes in `coeffs`, skipping entries with `|c| <= tol`.
pub fn descartes_sign_changes(coeffs: &[f64], tol: f64) -> usize {
    let mut last: Option<bool> = None;
    let mut changes = 0;
    for &c in coeffs {
        if c.abs() <= tol {
            continue;
        }
        let positive = c > 0.0;
        if last.is_some_and(|l| l != positive) {
            changes += 1;
        }
        last = Some(positive);
    }
    changes
}
