//! Pauli channels generated by time-dependent rates.
//!
//! A model supplies rates `(gamma_1, gamma_2, gamma_3)(t)` and a coupling
//! `lambda`. The generated channel multiplies the `sigma_alpha` component of a
//! state by `lambda_alpha(t) = exp(-lambda * int_0^t (gamma_beta + gamma_delta))`
//! with `{alpha, beta, delta} = {1, 2, 3}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, pauli_compose, pauli_decompose, HermitianMatrix, PauliCoefficients};
use crate::mixtures::{self, MixtureWeights, RateAsymptote};
use crate::DEFAULT_TOL;

/// Default central-difference step for [`numeric_generator_rates`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateKind {
    Constants { rates: [f64; 3] },
    /// `gamma = (1, 1, sin(omega t))`.
    Sinusoid3 { omega: f64 },
    Mixture { weights: MixtureWeights },
    /// Rates sampled on `times` (starting at 0), linearly interpolated.
    Tabulated { times: Vec<f64>, rates: Vec<[f64; 3]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RateModelRepr {
    #[serde(flatten)]
    kind: RateKind,
    coupling: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RateModelRepr", into = "RateModelRepr")]
pub struct RateModel {
    kind: RateKind,
    coupling: f64,
    /// Cumulative rate integrals at the nodes of a tabulated model.
    cumulative: Vec<[f64; 3]>,
}

impl From<RateModel> for RateModelRepr {
    fn from(m: RateModel) -> Self {
        RateModelRepr { kind: m.kind, coupling: m.coupling }
    }
}

impl TryFrom<RateModelRepr> for RateModel {
    type Error = Error;

    fn try_from(r: RateModelRepr) -> Result<Self> {
        RateModel::new(r.kind, r.coupling)
    }
}

fn check_coupling(coupling: f64) -> Result<()> {
    if coupling.is_finite() && coupling > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("coupling must be positive and finite, got {coupling}")))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("time must be finite and >= 0, got {t}")))
    }
}

impl RateModel {
    pub fn new(kind: RateKind, coupling: f64) -> Result<Self> {
        check_coupling(coupling)?;
        let mut cumulative = Vec::new();
        match &kind {
            RateKind::Constants { rates } => {
                if rates.iter().any(|r| !r.is_finite()) {
                    return Err(Error::InvalidInput(format!("non-finite rates {rates:?}")));
                }
            }
            RateKind::Sinusoid3 { omega } => {
                if !omega.is_finite() {
                    return Err(Error::InvalidInput(format!("non-finite omega {omega}")));
                }
            }
            RateKind::Mixture { .. } => {
                if coupling != 1.0 {
                    return Err(Error::InvalidInput(format!(
                        "mixture models have unit coupling, got {coupling}"
                    )));
                }
            }
            RateKind::Tabulated { times, rates } => {
                if times.len() < 2 || times.len() != rates.len() {
                    return Err(Error::InvalidInput(format!(
                        "tabulated model needs >= 2 times and one rate triple per time, got {} and {}",
                        times.len(),
                        rates.len()
                    )));
                }
                if times[0] != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "tabulated grid must start at t = 0, got {}",
                        times[0]
                    )));
                }
                if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                    return Err(Error::InvalidInput("tabulated grid must be strictly increasing".into()));
                }
                if rates.iter().flatten().any(|r| !r.is_finite()) {
                    return Err(Error::InvalidInput("non-finite tabulated rate".into()));
                }
                cumulative = cumulative_integrals(times, rates);
            }
        }
        Ok(RateModel { kind, coupling, cumulative })
    }

    pub fn constants(rates: [f64; 3], coupling: f64) -> Result<Self> {
        Self::new(RateKind::Constants { rates }, coupling)
    }

    pub fn sinusoid3(omega: f64, coupling: f64) -> Result<Self> {
        Self::new(RateKind::Sinusoid3 { omega }, coupling)
    }

    pub fn mixture(weights: MixtureWeights) -> Self {
        RateModel { kind: RateKind::Mixture { weights }, coupling: 1.0, cumulative: Vec::new() }
    }

    pub fn tabulated(times: Vec<f64>, rates: Vec<[f64; 3]>, coupling: f64) -> Result<Self> {
        Self::new(RateKind::Tabulated { times, rates }, coupling)
    }

    pub fn kind(&self) -> &RateKind {
        &self.kind
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn mixture_weights(&self) -> Option<&MixtureWeights> {
        match &self.kind {
            RateKind::Mixture { weights } => Some(weights),
            _ => None,
        }
    }

    /// Largest admissible time, if the model is only defined on a finite range.
    pub fn time_limit(&self) -> Option<f64> {
        match &self.kind {
            RateKind::Tabulated { times, .. } => times.last().copied(),
            _ => None,
        }
    }

    /// Whether the `t -> inf` behavior is available in closed form.
    pub fn has_asymptote(&self) -> bool {
        matches!(self.kind, RateKind::Constants { .. } | RateKind::Mixture { .. })
    }

    fn out_of_range(&self, t: f64) -> Result<()> {
        if let RateKind::Tabulated { times, .. } = &self.kind {
            let end = *times.last().expect("validated");
            if t > end {
                return Err(Error::OutOfRange { t, start: 0.0, end });
            }
        }
        Ok(())
    }

    /// Rates `(gamma_1, gamma_2, gamma_3)` at `t`, without the coupling.
    pub fn rates_at(&self, t: f64) -> Result<[f64; 3]> {
        check_time(t)?;
        self.out_of_range(t)?;
        Ok(match &self.kind {
            RateKind::Constants { rates } => *rates,
            RateKind::Sinusoid3 { omega } => [1.0, 1.0, (omega * t).sin()],
            RateKind::Mixture { weights } => mixtures::mixture_rates(weights, t),
            RateKind::Tabulated { times, rates } => {
                let i = segment_index(times, t);
                let s = (t - times[i]) / (times[i + 1] - times[i]);
                std::array::from_fn(|k| rates[i][k] + s * (rates[i + 1][k] - rates[i][k]))
            }
        })
    }

    /// `coupling * rates_at(t)`.
    pub fn effective_rates(&self, t: f64) -> Result<[f64; 3]> {
        Ok(self.rates_at(t)?.map(|g| g * self.coupling))
    }

    /// Effective rates written as `values * exp(-log_scale)` with O(1) values.
    ///
    /// Only interior mixtures use a nonzero scale, `2t`, since their rates
    /// decay like `e^{-2t}`.
    pub fn log_scaled_rates(&self, t: f64) -> Result<([f64; 3], f64)> {
        match &self.kind {
            RateKind::Mixture { weights } => {
                check_time(t)?;
                Ok(mixtures::log_scaled_rates(weights, t))
            }
            _ => Ok((self.effective_rates(t)?, 0.0)),
        }
    }

    /// Closed-form large-time behavior of the effective rates.
    pub fn asymptote(&self) -> Result<RateAsymptote> {
        match &self.kind {
            RateKind::Constants { rates } => {
                Ok(RateAsymptote { limit: rates.map(|g| g * self.coupling), decay: [0.0; 3] })
            }
            RateKind::Mixture { weights } => Ok(mixtures::mixture_asymptote(weights)),
            RateKind::Sinusoid3 { .. } => Err(Error::NoAsymptote("sinusoidal rates oscillate".into())),
            RateKind::Tabulated { .. } => {
                Err(Error::NoAsymptote("tabulated rates stop at the last grid time".into()))
            }
        }
    }

    /// `ln lambda_alpha(t)` for `alpha = 1, 2, 3`.
    pub fn log_decay(&self, t: f64) -> Result<[f64; 3]> {
        check_time(t)?;
        self.out_of_range(t)?;
        let lam = self.coupling;
        Ok(match &self.kind {
            RateKind::Constants { rates: g } => {
                pair_sums(*g).map(|s| -lam * s * t)
            }
            RateKind::Sinusoid3 { omega } => {
                let m = -lam * (t + one_minus_cos_over(*omega, t));
                [m, m, -2.0 * lam * t]
            }
            RateKind::Mixture { weights } => {
                let e = (-2.0 * t).exp();
                std::array::from_fn(|k| {
                    let pk = weights.get(k);
                    if pk == 0.0 {
                        -2.0 * t
                    } else {
                        (pk + e * (1.0 - pk)).ln()
                    }
                })
            }
            RateKind::Tabulated { times, rates } => {
                let integrals = tabulated_integral(times, rates, &self.cumulative, t);
                pair_sums(integrals).map(|s| -lam * s)
            }
        })
    }

    /// Decay factors of the channel at time `t`.
    pub fn decay_factors(&self, t: f64) -> Result<DecayFactors> {
        if let RateKind::Mixture { weights } = &self.kind {
            check_time(t)?;
            return Ok(DecayFactors { values: mixtures::mixture_eigenvalues(weights, t), t });
        }
        let l = self.log_decay(t)?;
        Ok(DecayFactors { values: [1.0, l[0].exp(), l[1].exp(), l[2].exp()], t })
    }
}

/// `(g2 + g3, g1 + g3, g1 + g2)`.
fn pair_sums(g: [f64; 3]) -> [f64; 3] {
    [g[1] + g[2], g[0] + g[2], g[0] + g[1]]
}

/// `(1 - cos(omega t)) / omega`, continuous through `omega = 0`.
fn one_minus_cos_over(omega: f64, t: f64) -> f64 {
    if omega.abs() < 1e-6 {
        let w2 = omega * omega;
        omega * t * t / 2.0 - w2 * omega * t.powi(4) / 24.0
    } else {
        let s = (omega * t / 2.0).sin();
        2.0 * s * s / omega
    }
}

fn segment_index(times: &[f64], t: f64) -> usize {
    let n = times.len();
    match times.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(i) => i.min(n - 2),
        Err(i) => (i.max(1) - 1).min(n - 2),
    }
}

/// Integral over `[u, v]` of the quadratic through three nodes.
fn quadratic_integral(x: [f64; 3], f: [f64; 3], u: f64, v: f64) -> f64 {
    let d01 = (f[1] - f[0]) / (x[1] - x[0]);
    let d12 = (f[2] - f[1]) / (x[2] - x[1]);
    let d2 = (d12 - d01) / (x[2] - x[0]);
    let h = x[1] - x[0];
    // f(y) = f0 + d01 y + d2 y (y - h), y = x - x0
    let prim = |y: f64| f[0] * y + d01 * y * y / 2.0 + d2 * (y * y * y / 3.0 - h * y * y / 2.0);
    prim(v - x[0]) - prim(u - x[0])
}

/// First node of the Simpson pair used for segment `i`.
fn pair_start(n: usize, i: usize) -> usize {
    let s = i - i % 2;
    if s + 2 < n {
        s
    } else {
        n - 3
    }
}

/// Integral of component `k` from the start of segment `i`'s Simpson pair to `t`.
fn pair_integral(times: &[f64], rates: &[[f64; 3]], i: usize, k: usize, t: f64) -> (usize, f64) {
    if times.len() == 2 {
        let s = (t - times[0]) / (times[1] - times[0]);
        let ft = rates[0][k] + s * (rates[1][k] - rates[0][k]);
        return (0, (t - times[0]) * (rates[0][k] + ft) / 2.0);
    }
    let j = pair_start(times.len(), i);
    let v = quadratic_integral(
        [times[j], times[j + 1], times[j + 2]],
        [rates[j][k], rates[j + 1][k], rates[j + 2][k]],
        times[j],
        t,
    );
    (j, v)
}

fn cumulative_integrals(times: &[f64], rates: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]; times.len()];
    for i in 0..times.len() - 1 {
        for k in 0..3 {
            let (j, v) = pair_integral(times, rates, i, k, times[i + 1]);
            out[i + 1][k] = out[j][k] + v;
        }
    }
    out
}

fn tabulated_integral(times: &[f64], rates: &[[f64; 3]], cumulative: &[[f64; 3]], t: f64) -> [f64; 3] {
    let i = segment_index(times, t);
    std::array::from_fn(|k| {
        let (j, v) = pair_integral(times, rates, i, k, t);
        cumulative[j][k] + v
    })
}

/// Eigenvalues of a Pauli channel on `(1, sigma_1, sigma_2, sigma_3)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFactors {
    pub values: [f64; 4],
    #[serde(with = "crate::serde_time")]
    pub t: f64,
}

impl DecayFactors {
    pub fn identity() -> Self {
        DecayFactors { values: [1.0; 4], t: 0.0 }
    }

    pub fn new(lambdas: [f64; 3], t: f64) -> Self {
        DecayFactors { values: [1.0, lambdas[0], lambdas[1], lambdas[2]], t }
    }

    pub fn lambdas(&self) -> [f64; 3] {
        [self.values[1], self.values[2], self.values[3]]
    }
}

/// Applies a Pauli channel to a single-qubit operator.
pub fn apply_channel(f: &DecayFactors, h: &HermitianMatrix) -> Result<HermitianMatrix> {
    if h.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: h.dim() });
    }
    let mut c = pauli_decompose(h);
    for (mu, x) in c.coeffs.iter_mut().take(4).enumerate() {
        *x *= f.values[mu];
    }
    Ok(pauli_compose(&c))
}

/// Applies the product of two Pauli channels to a two-qubit operator.
pub fn apply_tensor_channel(f1: &DecayFactors, f2: &DecayFactors, h: &HermitianMatrix) -> Result<HermitianMatrix> {
    if h.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: h.dim() });
    }
    let mut c = pauli_decompose(h);
    scale_pair_coefficients(&mut c, f1, f2);
    Ok(pauli_compose(&c))
}

pub(crate) fn scale_pair_coefficients(c: &mut PauliCoefficients, f1: &DecayFactors, f2: &DecayFactors) {
    for (idx, x) in c.coeffs.iter_mut().enumerate() {
        *x *= f1.values[idx / 4] * f2.values[idx % 4];
    }
}

/// Choi matrix `(channel (x) id)[P+]` with `P+` the projector on `(|00> + |11>)/sqrt 2`.
pub fn choi_matrix(f: &DecayFactors) -> HermitianMatrix {
    let mut coeffs = [0.0; 16];
    coeffs[0] = 0.25;
    coeffs[5] = 0.25 * f.values[1];
    coeffs[10] = -0.25 * f.values[2];
    coeffs[15] = 0.25 * f.values[3];
    pauli_compose(&PauliCoefficients::pair(coeffs))
}

/// Closed-form Choi spectrum, ascending.
pub fn choi_eigenvalues(f: &DecayFactors) -> [f64; 4] {
    let [_, l1, l2, l3] = f.values;
    let mut ev = [
        (1.0 + l3 + l1 + l2) / 4.0,
        (1.0 + l3 - l1 - l2) / 4.0,
        (1.0 - l3 + l1 - l2) / 4.0,
        (1.0 - l3 - l1 + l2) / 4.0,
    ];
    ev.sort_by(f64::total_cmp);
    ev
}

/// Complete positivity of the channel: `(min Choi eigenvalue >= -tol, min eigenvalue)`.
pub fn is_cptp(f: &DecayFactors, tol: f64) -> (bool, f64) {
    let min = choi_eigenvalues(f)[0];
    (min >= -tol, min)
}

/// Decay factors of the intermediate map from `s` to `t`.
pub fn intertwiner_factors(model: &RateModel, s: f64, t: f64) -> Result<DecayFactors> {
    if s > t {
        return Err(Error::InvalidRange { s, t });
    }
    let (ls, lt) = (model.log_decay(s)?, model.log_decay(t)?);
    Ok(DecayFactors::new(std::array::from_fn(|k| (lt[k] - ls[k]).exp()), t))
}

/// Rates recovered from central differences of `ln lambda_alpha`.
pub fn numeric_generator_rates(model: &RateModel, t: f64, h: f64) -> Result<[f64; 3]> {
    if !(h > 0.0) || t < h {
        return Err(Error::InvalidInput(format!("need t >= h > 0, got t = {t}, h = {h}")));
    }
    let (lo, mid, hi) = (model.log_decay(t - h)?, model.log_decay(t)?, model.log_decay(t + h)?);
    for l in [lo, mid, hi].iter().flatten() {
        if !l.is_finite() || l.exp() == 0.0 {
            return Err(Error::NonInvertible(format!("decay factor vanishes near t = {t}")));
        }
    }
    let lam = model.coupling();
    let s: [f64; 3] = std::array::from_fn(|k| -(hi[k] - lo[k]) / (2.0 * h) / lam);
    Ok([(s[1] + s[2] - s[0]) / 2.0, (s[0] + s[2] - s[1]) / 2.0, (s[0] + s[1] - s[2]) / 2.0])
}

/// CP scan of the sinusoidal model: `(cp at every time, first violating time)`.
pub fn sinusoid_cp_scan(coupling: f64, omega: f64, times: &[f64]) -> Result<(bool, Option<f64>)> {
    let model = RateModel::sinusoid3(omega, coupling)?;
    for &t in times {
        if !is_cptp(&model.decay_factors(t)?, DEFAULT_TOL).0 {
            return Ok((false, Some(t)));
        }
    }
    Ok((true, None))
}

/// Minimum Choi eigenvalue via the general Hermitian solver; used to
/// cross-check [`choi_eigenvalues`].
pub fn choi_min_eigenvalue_numeric(f: &DecayFactors) -> f64 {
    linalg::eigenvalues(&choi_matrix(f))[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn mix(a: f64, b: f64, c: f64) -> RateModel {
        RateModel::mixture(MixtureWeights::new(a, b, c).unwrap())
    }

    fn mu(lam: f64, omega: f64, t: f64) -> f64 {
        (-lam * t - lam * (1.0 - (omega * t).cos()) / omega).exp()
    }

    #[test]
    fn rates_examples() {
        let s = RateModel::sinusoid3(std::f64::consts::PI, 1.0).unwrap();
        let g = s.rates_at(0.5).unwrap();
        assert!((g[2] - 1.0).abs() < 1e-15 && g[0] == 1.0 && g[1] == 1.0);
        let g = mix(0.5, 0.5, 0.0).rates_at(2.0).unwrap();
        assert!((g[2] + 2f64.tanh()).abs() < 1e-12);
    }

    #[test]
    fn sinusoid_decay_closed_form() {
        let m = RateModel::sinusoid3(1.0, 1.0).unwrap();
        for &t in &[0.0, 0.3, 1.0, 4.0] {
            let f = m.decay_factors(t).unwrap();
            assert!((f.values[3] - (-2.0 * t).exp()).abs() < 1e-15);
            let expect = (-t - (1.0 - t.cos())).exp();
            assert!((f.values[1] - expect).abs() < 1e-14 && (f.values[2] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn small_omega_is_continuous() {
        let a = RateModel::sinusoid3(1e-7, 0.8).unwrap().decay_factors(3.0).unwrap();
        let b = RateModel::sinusoid3(2e-6, 0.8).unwrap().decay_factors(3.0).unwrap();
        let c = RateModel::sinusoid3(0.0, 0.8).unwrap().decay_factors(3.0).unwrap();
        assert!((a.values[1] - c.values[1]).abs() < 1e-6);
        assert!((b.values[1] - c.values[1]).abs() < 1e-5);
        assert!((c.values[1] - (-0.8 * 3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn identity_at_time_zero() {
        for m in [
            mix(0.2, 0.3, 0.5),
            RateModel::constants([1.0, -0.5, 2.0], 0.7).unwrap(),
            RateModel::sinusoid3(-1.0, 0.5).unwrap(),
        ] {
            assert_eq!(m.decay_factors(0.0).unwrap().values, [1.0; 4]);
        }
    }

    #[test]
    fn centroid_mixture_limit() {
        let f = mix(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).decay_factors(40.0).unwrap();
        assert!(f.lambdas().iter().all(|&l| (l - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn apply_channel_examples() {
        let h = HermitianMatrix::pauli(3) * 0.5;
        let f = mix(0.5, 0.5, 0.0).decay_factors(1.0).unwrap();
        let out = apply_channel(&f, &h).unwrap();
        assert!(out.max_abs_diff(&(h * (-2.0f64).exp())) < 1e-15);

        let h = (HermitianMatrix::identity(2).unwrap() + HermitianMatrix::pauli(1)) * 0.5;
        let f = RateModel::sinusoid3(1.0, 1.0).unwrap().decay_factors(1.0).unwrap();
        let expect = (HermitianMatrix::identity(2).unwrap() + HermitianMatrix::pauli(1) * mu(1.0, 1.0, 1.0)) * 0.5;
        assert!(apply_channel(&f, &h).unwrap().max_abs_diff(&expect) < 1e-15);
        assert_eq!(apply_channel(&DecayFactors::identity(), &h).unwrap(), h);

        let big = HermitianMatrix::identity(4).unwrap();
        assert!(matches!(apply_channel(&f, &big), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            apply_tensor_channel(&f, &f, &h),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tensor_channel_examples() {
        let f = mix(0.5, 0.5, 0.0).decay_factors(1.0).unwrap();
        let zz = HermitianMatrix::pauli_pair(3, 3);
        let out = apply_tensor_channel(&f, &f, &zz).unwrap();
        assert!(out.max_abs_diff(&(zz * (-4.0f64).exp())) < 1e-15);

        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = C64::new(0.0, 0.0);
        let bell = HermitianMatrix::projector(&[s, z, z, s]).unwrap();
        let f = RateModel::sinusoid3(1.0, 1.0).unwrap().decay_factors(0.8).unwrap();
        let out = apply_tensor_channel(&f, &DecayFactors::identity(), &bell).unwrap();
        assert!(out.max_abs_diff(&choi_matrix(&f)) < 1e-15);
        let id = DecayFactors::identity();
        assert!(apply_tensor_channel(&id, &id, &bell).unwrap().max_abs_diff(&bell) < 1e-15);
    }

    #[test]
    fn choi_matrix_entries() {
        // (1 + l3)/4 on the outer diagonal, (1 - l3)/4 inside, mu/2 at the
        // corners, and (l1 - l2)/4 on the anti-diagonal interior.
        let m = RateModel::sinusoid3(1.0, 1.0).unwrap();
        for &t in &[0.1, 1.0, 5.0] {
            let f = m.decay_factors(t).unwrap();
            let x = choi_matrix(&f);
            let (u, e) = (mu(1.0, 1.0, t), (-2.0 * t).exp());
            assert!((x.get(0, 0).re - (1.0 + e) / 4.0).abs() < 1e-15);
            assert!((x.get(1, 1).re - (1.0 - e) / 4.0).abs() < 1e-15);
            assert!((x.get(0, 3).re - u / 2.0).abs() < 1e-15);
            assert!(x.get(1, 2).norm() < 1e-15);
            assert!((x.trace() - 1.0).abs() < 1e-15);
        }
        let x = choi_matrix(&DecayFactors::new([0.0; 3], 1.0));
        assert!(x.max_abs_diff(&(HermitianMatrix::identity(4).unwrap() * 0.25)) < 1e-15);
    }

    #[test]
    fn choi_spectrum_matches_closed_form() {
        let (lam, t) = (1.0, 0.5);
        let f = RateModel::sinusoid3(1.0, lam).unwrap().decay_factors(t).unwrap();
        let ev = linalg::eigenvalues(&choi_matrix(&f));
        let (u, e) = (mu(lam, 1.0, t), (-2.0 * lam * t).exp());
        let mut expect = [(1.0 - e) / 4.0, (1.0 - e) / 4.0, (1.0 + e - 2.0 * u) / 4.0, (1.0 + e + 2.0 * u) / 4.0];
        expect.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((ev.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let closed = choi_eigenvalues(&f);
        for (a, b) in ev.iter().zip(closed) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn cptp_examples() {
        let good = RateModel::sinusoid3(1.0, 0.5).unwrap();
        for i in 0..=1000 {
            assert!(is_cptp(&good.decay_factors(i as f64 * 0.01).unwrap(), 1e-12).0);
        }
        let bad = RateModel::sinusoid3(-1.0, 0.5).unwrap();
        assert!(!is_cptp(&bad.decay_factors(0.5).unwrap(), 1e-12).0);
        let (ok, min) = is_cptp(&DecayFactors::identity(), 0.0);
        assert!(ok && min == 0.0);
    }

    #[test]
    fn intertwiner_examples() {
        let m = mix(0.5, 0.5, 0.0);
        let f = intertwiner_factors(&m, 1.0, 2.0).unwrap();
        assert!((f.values[3] - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(intertwiner_factors(&m, 1.5, 1.5).unwrap().values, [1.0; 4]);
        let direct = m.decay_factors(2.0).unwrap();
        let from_zero = intertwiner_factors(&m, 0.0, 2.0).unwrap();
        for k in 0..4 {
            assert!((direct.values[k] - from_zero.values[k]).abs() < 1e-15);
        }
        assert!(matches!(intertwiner_factors(&m, 2.0, 1.0), Err(Error::InvalidRange { .. })));
    }

    #[test]
    fn numeric_rates_examples() {
        let m = mix(0.4, 0.4, 0.2);
        let (num, exact) = (numeric_generator_rates(&m, 1.0, 1e-5).unwrap(), m.rates_at(1.0).unwrap());
        for k in 0..3 {
            assert!((num[k] - exact[k]).abs() < 1e-6);
        }
        let c = RateModel::constants([1.0; 3], 2.0).unwrap();
        assert!(numeric_generator_rates(&c, 3.0, 1e-5).unwrap().iter().all(|&g| (g - 1.0).abs() < 1e-8));
        let s = RateModel::sinusoid3(2.0, 1.0).unwrap();
        let g = numeric_generator_rates(&s, 0.7, 1e-5).unwrap();
        assert!((g[2] - 1.4f64.sin()).abs() < 1e-6 && (g[0] - 1.0).abs() < 1e-6);
        assert!(numeric_generator_rates(&s, 1e-6, 1e-5).is_err());
        let huge = RateModel::constants([400.0; 3], 1.0).unwrap();
        assert!(matches!(numeric_generator_rates(&huge, 2.0, 1e-5), Err(Error::NonInvertible(_))));
    }

    fn sampled_sinusoid(n: usize) -> RateModel {
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * 10.0 / n as f64).collect();
        let rates: Vec<[f64; 3]> = times.iter().map(|&t| [1.0, 1.0, (1.3 * t).sin()]).collect();
        RateModel::tabulated(times, rates, 0.7).unwrap()
    }

    #[test]
    fn tabulated_model() {
        let tab = sampled_sinusoid(200);
        let exact = RateModel::sinusoid3(1.3, 0.7).unwrap();
        for &t in &[0.0, 0.05, 0.37, 3.0, 9.99, 10.0] {
            let (a, b) = (tab.decay_factors(t).unwrap(), exact.decay_factors(t).unwrap());
            for k in 0..4 {
                assert!((a.values[k] - b.values[k]).abs() < 1e-5, "t={t}: {a:?} vs {b:?}");
            }
        }
        // Node values converge at fourth order.
        let err = |m: &RateModel| (m.log_decay(6.0).unwrap()[0] - exact.log_decay(6.0).unwrap()[0]).abs();
        let (coarse, fine) = (err(&sampled_sinusoid(100)), err(&sampled_sinusoid(200)));
        assert!(coarse / fine > 10.0, "{coarse} {fine}");
        assert!(matches!(tab.rates_at(10.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(tab.decay_factors(11.0), Err(Error::OutOfRange { .. })));
        assert!(RateModel::tabulated(vec![0.0, 1.0, 1.0], vec![[0.0; 3]; 3], 1.0).is_err());
        assert!(RateModel::tabulated(vec![0.5, 1.0], vec![[0.0; 3]; 2], 1.0).is_err());
        assert!(RateModel::tabulated(vec![0.0, 1.0], vec![[0.0; 3]; 3], 1.0).is_err());
    }

    #[test]
    fn invalid_models() {
        assert!(RateModel::constants([1.0; 3], 0.0).is_err());
        assert!(RateModel::constants([1.0; 3], -1.0).is_err());
        assert!(RateModel::sinusoid3(f64::NAN, 1.0).is_err());
        let w = MixtureWeights::centroid();
        assert!(RateModel::new(RateKind::Mixture { weights: w }, 2.0).is_err());
        assert!(mix(0.2, 0.3, 0.5).rates_at(-1.0).is_err());
    }

    #[test]
    fn serde_round_trip() {
        for m in [
            mix(0.2, 0.3, 0.5),
            RateModel::constants([1.0, 2.0, 3.0], 0.5).unwrap(),
            RateModel::sinusoid3(-1.0, 2.0).unwrap(),
            RateModel::tabulated(vec![0.0, 1.0, 2.0], vec![[1.0; 3], [2.0; 3], [0.5; 3]], 1.0).unwrap(),
        ] {
            let s = serde_json::to_string(&m).unwrap();
            let back: RateModel = serde_json::from_str(&s).unwrap();
            assert_eq!(back, m);
        }
        let bad = r#"{"kind":"constants","rates":[1,1,1],"coupling":-1}"#;
        assert!(serde_json::from_str::<RateModel>(bad).is_err());
    }

    #[test]
    fn asymptotes() {
        assert!(RateModel::sinusoid3(1.0, 1.0).unwrap().asymptote().is_err());
        let a = RateModel::constants([1.0, 2.0, 3.0], 2.0).unwrap().asymptote().unwrap();
        assert_eq!(a.limit, [2.0, 4.0, 6.0]);
        let a = mix(0.5, 0.5, 0.0).asymptote().unwrap();
        assert_eq!(a.limit, [1.0, 1.0, -1.0]);
    }
}
