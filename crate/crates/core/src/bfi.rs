//! Distinguishability trajectories and backflow of information.
//!
//! The trace norm of an evolved Helstrom matrix `mu rho - (1 - mu) sigma`
//! never increases under P-divisible dynamics. A revival of that norm on some
//! time interval is a backflow witness. For product dynamics the witness
//! search below looks for two-qubit Helstrom matrices with such a revival.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divisibility::{self, DivisibilityVerdict, VerdictLabel};
use crate::dynamics::{DecayFactors, RateModel};
use crate::error::{Error, Result};
use crate::linalg::{
    eigenvalues, jordan_decomposition, pauli_compose, pauli_decompose, trace_norm, HermitianMatrix,
    PauliCoefficients,
};
use crate::DEFAULT_TOL;

/// Slopes above this count as a revival in witness reports.
pub const DETECTION_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_BFI_GRID_POINTS: usize = 2000;
pub const DEFAULT_BFI_GRID_END: f64 = 10.0;
/// Single-map Helstrom matrices sampled by [`sbfi_report`].
pub const SBFI_SINGLE_SAMPLES: usize = 200;

const STATE_TOL: f64 = 1e-10;

/// 2000 uniform points on `[0, 10]`.
pub fn default_bfi_grid() -> Vec<f64> {
    uniform_grid(0.0, DEFAULT_BFI_GRID_END, DEFAULT_BFI_GRID_POINTS)
}

pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Two density matrices and a bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HelstromRepr", into = "HelstromRepr")]
pub struct HelstromSpec {
    rho: HermitianMatrix,
    sigma: HermitianMatrix,
    mu: f64,
}

#[derive(Clone, Serialize, Deserialize)]
struct HelstromRepr {
    rho: HermitianMatrix,
    sigma: HermitianMatrix,
    mu: f64,
}

impl From<HelstromSpec> for HelstromRepr {
    fn from(s: HelstromSpec) -> Self {
        HelstromRepr { rho: s.rho, sigma: s.sigma, mu: s.mu }
    }
}

impl TryFrom<HelstromRepr> for HelstromSpec {
    type Error = Error;

    fn try_from(r: HelstromRepr) -> Result<Self> {
        HelstromSpec::new(r.rho, r.sigma, r.mu)
    }
}

fn check_state(m: &HermitianMatrix, name: &str) -> Result<()> {
    if (m.trace() - 1.0).abs() > STATE_TOL {
        return Err(Error::InvalidInput(format!("{name} has trace {}, not 1", m.trace())));
    }
    let min = eigenvalues(m)[0];
    if min < -STATE_TOL {
        return Err(Error::InvalidInput(format!("{name} has negative eigenvalue {min}")));
    }
    Ok(())
}

impl HelstromSpec {
    pub fn new(rho: HermitianMatrix, sigma: HermitianMatrix, mu: f64) -> Result<Self> {
        if rho.dim() != sigma.dim() {
            return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
        }
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidInput(format!("bias mu = {mu} is outside [0, 1]")));
        }
        check_state(&rho, "rho")?;
        check_state(&sigma, "sigma")?;
        Ok(HelstromSpec { rho, sigma, mu })
    }

    /// The Helstrom matrix with trace norm 1 that is proportional to `delta`.
    ///
    /// Uses the Jordan decomposition `delta = a+ rho - a- sigma` after scaling
    /// to unit trace norm, so `mu = a+`. A missing part is replaced by the
    /// maximally mixed state, which then carries zero weight.
    pub fn from_delta(delta: &HermitianMatrix) -> Result<Self> {
        let norm = trace_norm(delta);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero Helstrom matrix".into()));
        }
        let (pos, neg) = jordan_decomposition(&(*delta * (1.0 / norm)));
        let (a_pos, a_neg) = (pos.trace(), neg.trace());
        let mixed = HermitianMatrix::identity(delta.dim())? * (1.0 / delta.dim() as f64);
        let rho = if a_pos > 0.0 { pos * (1.0 / a_pos) } else { mixed };
        let sigma = if a_neg > 0.0 { neg * (1.0 / a_neg) } else { mixed };
        let mu = (a_pos / (a_pos + a_neg)).clamp(0.0, 1.0);
        HelstromSpec::new(rho, sigma, mu)
    }

    pub fn rho(&self) -> &HermitianMatrix {
        &self.rho
    }

    pub fn sigma(&self) -> &HermitianMatrix {
        &self.sigma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn delta(&self) -> HermitianMatrix {
        self.rho * self.mu - self.sigma * (1.0 - self.mu)
    }
}

/// `mu rho - (1 - mu) sigma` for valid states.
pub fn helstrom(rho: &HermitianMatrix, sigma: &HermitianMatrix, mu: f64) -> Result<HermitianMatrix> {
    Ok(HelstromSpec::new(*rho, *sigma, mu)?.delta())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryMode {
    /// One qubit under the first model.
    #[serde(rename = "SINGLE")]
    Single,
    /// Two qubits under the product of both models.
    #[serde(rename = "TENSOR")]
    Tensor,
    /// Two qubits, the second one left untouched.
    #[serde(rename = "ANCILLA")]
    Ancilla,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub mode: TrajectoryMode,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("time grid is empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite() || *t < 0.0) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("grid must be finite, >= 0 and strictly increasing".into()));
    }
    Ok(())
}

/// Per-time multipliers of the Pauli coefficients.
struct FactorTable {
    dim: usize,
    rows: Vec<[f64; 16]>,
}

impl FactorTable {
    fn build(model1: &RateModel, model2: Option<&RateModel>, mode: TrajectoryMode, grid: &[f64]) -> Result<Self> {
        check_grid(grid)?;
        let rows = grid
            .iter()
            .map(|&t| {
                let f1 = model1.decay_factors(t)?;
                let f2 = match (mode, model2) {
                    (TrajectoryMode::Tensor, Some(m)) => m.decay_factors(t)?,
                    _ => DecayFactors::identity(),
                };
                let mut row = [0.0; 16];
                match mode {
                    TrajectoryMode::Single => row[..4].copy_from_slice(&f1.values),
                    _ => {
                        for (idx, x) in row.iter_mut().enumerate() {
                            *x = f1.values[idx / 4] * f2.values[idx % 4];
                        }
                    }
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        Ok(FactorTable { dim: if mode == TrajectoryMode::Single { 2 } else { 4 }, rows })
    }

    fn values(&self, c: &PauliCoefficients) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| {
                let mut e = *c;
                for (x, f) in e.coeffs.iter_mut().zip(row) {
                    *x *= f;
                }
                trace_norm(&pauli_compose(&e))
            })
            .collect()
    }
}

fn check_mode(model2: Option<&RateModel>, spec_dim: usize, mode: TrajectoryMode) -> Result<()> {
    let expected = if mode == TrajectoryMode::Single { 2 } else { 4 };
    if spec_dim != expected {
        return Err(Error::DimensionMismatch { expected, found: spec_dim });
    }
    match (mode, model2) {
        (TrajectoryMode::Tensor, None) => Err(Error::InvalidInput("tensor mode needs a second model".into())),
        (TrajectoryMode::Single | TrajectoryMode::Ancilla, Some(_)) => Err(Error::InvalidInput(
            "single and ancilla modes take exactly one model".into(),
        )),
        _ => Ok(()),
    }
}

/// Trace norm of the evolved Helstrom matrix at every grid time.
pub fn trajectory(
    model1: &RateModel,
    model2: Option<&RateModel>,
    spec: &HelstromSpec,
    grid: &[f64],
    mode: TrajectoryMode,
) -> Result<Trajectory> {
    check_mode(model2, spec.dim(), mode)?;
    let table = FactorTable::build(model1, model2, mode, grid)?;
    let values = table.values(&pauli_decompose(&spec.delta()));
    Ok(Trajectory { times: grid.to_vec(), values, mode })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfiInterval {
    pub t_a: f64,
    pub t_b: f64,
    pub max_slope: f64,
}

/// Maximal runs of consecutive forward-difference slopes above `tol`.
pub fn detect_bfi(traj: &Trajectory, tol: f64) -> Result<Vec<BfiInterval>> {
    let n = traj.times.len();
    if n < 3 || traj.values.len() != n {
        return Err(Error::InvalidInput(format!(
            "need >= 3 trajectory points with matching values, got {n} times and {} values",
            traj.values.len()
        )));
    }
    let mut out = Vec::new();
    let mut current: Option<BfiInterval> = None;
    for i in 0..n - 1 {
        let slope = (traj.values[i + 1] - traj.values[i]) / (traj.times[i + 1] - traj.times[i]);
        if slope > tol {
            let iv = current.get_or_insert(BfiInterval { t_a: traj.times[i], t_b: traj.times[i + 1], max_slope: slope });
            iv.t_b = traj.times[i + 1];
            iv.max_slope = iv.max_slope.max(slope);
        } else if let Some(iv) = current.take() {
            out.push(iv);
        }
    }
    out.extend(current);
    Ok(out)
}

fn max_slope(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub found: bool,
    pub spec: HelstromSpec,
    pub time_interval: (f64, f64),
    pub max_derivative: f64,
    pub seed: u64,
    pub evaluations: usize,
    pub mode: TrajectoryMode,
}

fn haar_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..dim)
        .map(|_| C64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)))
        .collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// Random Helstrom matrix of two Haar-random pure states.
fn random_pure_delta(rng: &mut ChaCha8Rng, dim: usize, mu: Option<f64>) -> HermitianMatrix {
    let mu = mu.unwrap_or_else(|| rng.random::<f64>());
    let a = HermitianMatrix::projector(&haar_vector(rng, dim)).expect("unit vector");
    let b = HermitianMatrix::projector(&haar_vector(rng, dim)).expect("unit vector");
    a * mu - b * (1.0 - mu)
}

/// Coefficients of a random Helstrom matrix pulled back from a random time,
/// so that it becomes a pure-state Helstrom matrix at that time.
fn back_propagated(rng: &mut ChaCha8Rng, table: &FactorTable) -> Option<PauliCoefficients> {
    let n = table.rows.len();
    let s = if n > 2 { rng.random_range(1..(n / 2).max(2)) } else { 0 };
    let mu = if rng.random::<f64>() < 0.5 { Some(1.0) } else { None };
    let mut c = pauli_decompose(&random_pure_delta(rng, table.dim, mu));
    let len = c.len();
    for (x, f) in c.coeffs[..len].iter_mut().zip(&table.rows[s]) {
        if *f == 0.0 || !f.is_finite() {
            return None;
        }
        *x /= f;
    }
    Some(c)
}

/// Scale so that the matrix has unit trace norm.
fn normalized(c: &PauliCoefficients) -> Option<PauliCoefficients> {
    let n = trace_norm(&pauli_compose(c));
    if !(n > 0.0) || !n.is_finite() {
        return None;
    }
    let mut out = *c;
    out.coeffs.iter_mut().for_each(|x| *x /= n);
    Some(out)
}

struct Search<'a> {
    table: &'a FactorTable,
    times: &'a [f64],
}

impl Search<'_> {
    fn objective(&self, c: &PauliCoefficients) -> f64 {
        max_slope(self.times, &self.table.values(c))
    }

    fn restart(&self, seed: u64, index: u64) -> (PauliCoefficients, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let dim = self.table.dim;
        let candidate = match index {
            0 => None,
            i if i % 4 == 0 => None,
            _ => back_propagated(&mut rng, self.table).and_then(|c| normalized(&c)),
        };
        let c = candidate.unwrap_or_else(|| {
            let mu = if index == 0 { Some(0.5) } else { None };
            let c = pauli_decompose(&random_pure_delta(&mut rng, dim, mu));
            normalized(&c).unwrap_or(c)
        });
        let score = self.objective(&c);
        (c, score)
    }

    /// Coordinate pattern search on all Pauli coefficients, renormalizing
    /// every candidate to unit trace norm.
    fn refine(&self, mut best: PauliCoefficients, mut score: f64, mut budget: usize) -> (PauliCoefficients, f64, usize) {
        let len = best.len();
        let mut step = 0.05;
        let mut used = 0;
        while budget > 0 && step > 1e-7 {
            let moves: Vec<(usize, f64)> =
                (0..len).flat_map(|k| [(k, step), (k, -step)]).take(budget).collect();
            budget -= moves.len();
            used += moves.len();
            let results: Vec<Option<(PauliCoefficients, f64)>> = moves
                .par_iter()
                .map(|&(k, d)| {
                    let mut c = best;
                    c.coeffs[k] += d;
                    normalized(&c).map(|c| {
                        let s = self.objective(&c);
                        (c, s)
                    })
                })
                .collect();
            let mut improved = false;
            for (c, s) in results.into_iter().flatten() {
                if s > score {
                    best = c;
                    score = s;
                    improved = true;
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        (best, score, used)
    }
}

fn run_search(
    model1: &RateModel,
    model2: Option<&RateModel>,
    mode: TrajectoryMode,
    budget: usize,
    seed: u64,
    grid: Option<&[f64]>,
) -> Result<WitnessReport> {
    if budget == 0 {
        return Err(Error::InvalidInput("budget must be >= 1".into()));
    }
    let default;
    let times = match grid {
        Some(g) => g,
        None => {
            default = default_bfi_grid();
            &default
        }
    };
    if times.len() < 3 {
        return Err(Error::InvalidInput("witness grid needs >= 3 points".into()));
    }
    let table = FactorTable::build(model1, model2, mode, times)?;
    let search = Search { table: &table, times };
    let restarts = (budget / 2).max(1);
    let results: Vec<(PauliCoefficients, f64)> =
        (0..restarts as u64).into_par_iter().map(|i| search.restart(seed, i)).collect();
    let (mut best, mut score) = results[0];
    for &(c, s) in &results[1..] {
        if s > score {
            best = c;
            score = s;
        }
    }
    let (best, _, used) = if score > DETECTION_THRESHOLD {
        search.refine(best, score, budget - restarts)
    } else {
        (best, score, 0)
    };
    let delta = pauli_compose(&best);
    let spec = HelstromSpec::from_delta(&delta)?;
    let traj = trajectory(
        model1,
        model2.filter(|_| mode == TrajectoryMode::Tensor),
        &spec,
        times,
        mode,
    )?;
    let slope = max_slope(&traj.times, &traj.values);
    let found = slope > DETECTION_THRESHOLD;
    let time_interval = detect_bfi(&traj, DETECTION_THRESHOLD)?
        .into_iter()
        .max_by(|a, b| a.max_slope.total_cmp(&b.max_slope))
        .map(|iv| (iv.t_a, iv.t_b))
        .unwrap_or((0.0, 0.0));
    Ok(WitnessReport {
        found,
        spec,
        time_interval,
        max_derivative: slope,
        seed,
        evaluations: restarts + used,
        mode,
    })
}

/// Seeded search for a two-qubit Helstrom matrix whose trace norm revives
/// under the product of `model1` and `model2`.
///
/// Half of the budget goes to random restarts. Restart 0 uses `mu = 1/2`;
/// most others are pulled back from a random time so that they are pure-state
/// Helstrom matrices there. The best start is refined with the rest.
pub fn witness_search(
    model1: &RateModel,
    model2: &RateModel,
    budget: usize,
    seed: u64,
    grid: Option<&[f64]>,
) -> Result<WitnessReport> {
    run_search(model1, Some(model2), TrajectoryMode::Tensor, budget, seed, grid)
}

/// Same search with the second qubit as an inert ancilla.
pub fn witness_search_ancilla(model: &RateModel, budget: usize, seed: u64, grid: Option<&[f64]>) -> Result<WitnessReport> {
    run_search(model, None, TrajectoryMode::Ancilla, budget, seed, grid)
}

/// Largest slope of the witness on a grid ten times finer than `spacing`
/// across its reported interval.
pub fn verify_witness(
    model1: &RateModel,
    model2: Option<&RateModel>,
    report: &WitnessReport,
    spacing: f64,
) -> Result<f64> {
    let (a, b) = report.time_interval;
    if !(b > a) || !(spacing > 0.0) {
        return Err(Error::InvalidInput("witness has no revival interval to verify".into()));
    }
    let steps = ((b - a) / spacing).round().max(1.0) as usize * 10;
    let fine = uniform_grid(a, b, steps + 1);
    let traj = trajectory(model1, model2, &report.spec, &fine, report.mode)?;
    Ok(max_slope(&traj.times, &traj.values))
}

/// Fails with [`Error::NonInvertible`] if a decay factor vanishes on the grid.
pub fn check_invertible(model: &RateModel, grid: &[f64]) -> Result<()> {
    for &t in grid {
        if model.decay_factors(t)?.lambdas().iter().any(|&f| f == 0.0 || !f.is_finite()) {
            return Err(Error::NonInvertible(format!("a decay factor vanishes at t = {t}")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbfiReport {
    /// No single-qubit Helstrom matrix showed a revival.
    pub single_map_no_bfi: bool,
    pub single_specs_checked: usize,
    pub max_single_slope: f64,
    pub classification: DivisibilityVerdict,
    pub witness: WitnessReport,
    /// Largest witness slope on the refined grid, when a witness was found.
    pub verified_slope: Option<f64>,
    pub sbfi: bool,
}

/// Checks the three ingredients of superactivation for `Lambda (x) Lambda`:
/// no single-map revival, P-divisible but not CP-divisible, and a tensor witness.
pub fn sbfi_report(model: &RateModel, budget: usize, seed: u64) -> Result<SbfiReport> {
    let grid = default_bfi_grid();
    check_invertible(model, &grid)?;
    let table = FactorTable::build(model, None, TrajectoryMode::Single, &grid)?;
    let slopes: Vec<f64> = (0..SBFI_SINGLE_SAMPLES as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5b1f);
            rng.set_stream(i);
            let c = if i % 2 == 0 {
                pauli_decompose(&random_pure_delta(&mut rng, 2, None))
            } else {
                back_propagated(&mut rng, &table).unwrap_or_else(|| pauli_decompose(&random_pure_delta(&mut rng, 2, None)))
            };
            let c = normalized(&c).unwrap_or(c);
            let values = table.values(&c);
            let traj = Trajectory { times: grid.clone(), values, mode: TrajectoryMode::Single };
            let found = detect_bfi(&traj, DEFAULT_TOL).map(|v| !v.is_empty()).unwrap_or(true);
            (max_slope(&grid, &traj.values), found)
        })
        .map(|(s, found)| if found { s.max(f64::MIN_POSITIVE) } else { s.min(0.0) })
        .collect();
    let max_single_slope = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let single_map_no_bfi = slopes.iter().all(|&s| s <= 0.0);
    let classification = divisibility::cp_divisible(model, &divisibility::default_grid(&[model]), DEFAULT_TOL)?;
    let witness = witness_search(model, model, budget, seed, Some(&grid))?;
    let verified_slope = if witness.found {
        Some(verify_witness(model, Some(model), &witness, grid[1] - grid[0])?)
    } else {
        None
    };
    let sbfi = single_map_no_bfi && classification.label == VerdictLabel::PDivisibleOnly && witness.found;
    Ok(SbfiReport {
        single_map_no_bfi,
        single_specs_checked: SBFI_SINGLE_SAMPLES,
        max_single_slope,
        classification,
        witness,
        verified_slope,
        sbfi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixtures::MixtureWeights;

    fn ket(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    fn mix(a: f64, b: f64, c: f64) -> RateModel {
        RateModel::mixture(MixtureWeights::new(a, b, c).unwrap())
    }

    #[test]
    fn helstrom_examples() {
        let zero = HermitianMatrix::projector(&ket(&[1.0, 0.0])).unwrap();
        let one = HermitianMatrix::projector(&ket(&[0.0, 1.0])).unwrap();
        let d = helstrom(&zero, &one, 0.5).unwrap();
        assert!(d.max_abs_diff(&(HermitianMatrix::pauli(3) * 0.5)) < 1e-15);
        assert!(helstrom(&zero, &zero, 0.5).unwrap().max_abs_diff(&HermitianMatrix::zeros(2).unwrap()) < 1e-15);
        assert!(helstrom(&zero, &one, 1.0).unwrap().max_abs_diff(&zero) < 1e-15);
        assert!((helstrom(&zero, &one, 0.8).unwrap().trace() - 0.6).abs() < 1e-15);
        assert!(helstrom(&zero, &one, 1.5).is_err());
        assert!(helstrom(&(zero * 2.0), &one, 0.5).is_err());
        assert!(helstrom(&HermitianMatrix::pauli(3), &one, 0.5).is_err());
        let big = HermitianMatrix::identity(4).unwrap() * 0.25;
        assert!(matches!(helstrom(&zero, &big, 0.5), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn from_delta_projects() {
        let d = HermitianMatrix::pauli_pair(1, 1) * 0.3 + HermitianMatrix::pauli_pair(3, 0) * 0.2;
        let spec = HelstromSpec::from_delta(&d).unwrap();
        let n = trace_norm(&d);
        assert!(spec.delta().max_abs_diff(&(d * (1.0 / n))) < 1e-13);
        let pos = HermitianMatrix::identity(2).unwrap();
        let spec = HelstromSpec::from_delta(&pos).unwrap();
        assert_eq!(spec.mu(), 1.0);
        assert!(HelstromSpec::from_delta(&HermitianMatrix::zeros(4).unwrap()).is_err());
    }

    #[test]
    fn single_trajectory_of_enm() {
        let zero = HermitianMatrix::projector(&ket(&[1.0, 0.0])).unwrap();
        let one = HermitianMatrix::projector(&ket(&[0.0, 1.0])).unwrap();
        let spec = HelstromSpec::new(zero, one, 0.5).unwrap();
        let grid = uniform_grid(0.0, 3.0, 31);
        let traj = trajectory(&mix(0.5, 0.5, 0.0), None, &spec, &grid, TrajectoryMode::Single).unwrap();
        for (t, v) in traj.times.iter().zip(&traj.values) {
            assert!((v - (-2.0 * t).exp()).abs() < 1e-14);
        }
        assert!(detect_bfi(&traj, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn trace_norm_example_under_enm() {
        // Decay factor e^{-1} at t = 1/2 acting on sigma_3 / 2.
        let zero = HermitianMatrix::projector(&ket(&[1.0, 0.0])).unwrap();
        let one = HermitianMatrix::projector(&ket(&[0.0, 1.0])).unwrap();
        let spec = HelstromSpec::new(zero, one, 0.5).unwrap();
        let traj = trajectory(&mix(0.5, 0.5, 0.0), None, &spec, &[0.0, 0.5], TrajectoryMode::Single).unwrap();
        assert!((traj.values[1] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn mode_checks() {
        let m = mix(0.5, 0.5, 0.0);
        let s2 = HelstromSpec::from_delta(&HermitianMatrix::pauli(3)).unwrap();
        let s4 = HelstromSpec::from_delta(&HermitianMatrix::pauli_pair(3, 3)).unwrap();
        let g = [0.0, 1.0, 2.0];
        assert!(trajectory(&m, None, &s4, &g, TrajectoryMode::Single).is_err());
        assert!(trajectory(&m, None, &s2, &g, TrajectoryMode::Tensor).is_err());
        assert!(trajectory(&m, None, &s4, &g, TrajectoryMode::Tensor).is_err());
        assert!(trajectory(&m, Some(&m), &s4, &g, TrajectoryMode::Ancilla).is_err());
        let t = trajectory(&m, Some(&m), &s4, &g, TrajectoryMode::Tensor).unwrap();
        assert!((t.values[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn detect_constructed_sequence() {
        let traj = Trajectory {
            times: vec![0.0, 1.0, 2.0, 3.0],
            values: vec![1.0, 0.8, 0.9, 0.7],
            mode: TrajectoryMode::Single,
        };
        let iv = detect_bfi(&traj, 1e-6).unwrap();
        assert_eq!(iv.len(), 1);
        assert_eq!((iv[0].t_a, iv[0].t_b), (1.0, 2.0));
        assert!((iv[0].max_slope - 0.1).abs() < 1e-12);
        let down = Trajectory { times: vec![0.0, 1.0, 2.0], values: vec![3.0, 2.0, 1.0], mode: TrajectoryMode::Single };
        assert!(detect_bfi(&down, 1e-6).unwrap().is_empty());
        let short = Trajectory { times: vec![0.0, 1.0], values: vec![3.0, 2.0], mode: TrajectoryMode::Single };
        assert!(detect_bfi(&short, 1e-6).is_err());
    }

    #[test]
    fn bell_witness_for_enm() {
        // The Bell projector pulled back to s gives a revival of slope
        // proportional to -gamma_3(s) right after s.
        let m = mix(0.5, 0.5, 0.0);
        let grid = uniform_grid(0.0, 4.0, 401);
        let table = FactorTable::build(&m, Some(&m), TrajectoryMode::Tensor, &grid).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = HermitianMatrix::projector(&ket(&[h, 0.0, 0.0, h])).unwrap();
        let mut c = pauli_decompose(&bell);
        for (x, f) in c.coeffs.iter_mut().zip(&table.rows[100]) {
            *x /= f;
        }
        let spec = HelstromSpec::from_delta(&pauli_compose(&c)).unwrap();
        let traj = trajectory(&m, Some(&m), &spec, &grid, TrajectoryMode::Tensor).unwrap();
        assert!(!detect_bfi(&traj, 1e-6).unwrap().is_empty());
    }

    #[test]
    fn witness_search_finds_enm_revival() {
        let m = mix(0.5, 0.5, 0.0);
        let grid = uniform_grid(0.0, 5.0, 501);
        let r = witness_search(&m, &m, 200, 7, Some(&grid)).unwrap();
        assert!(r.found, "{r:?}");
        assert!(r.evaluations <= 200);
        let again = witness_search(&m, &m, 200, 7, Some(&grid)).unwrap();
        assert_eq!(r, again);
        let v = verify_witness(&m, Some(&m), &r, grid[1] - grid[0]).unwrap();
        assert!(v > 0.5 * r.max_derivative);
    }

    #[test]
    fn witness_search_quiet_for_cp_divisible() {
        let m = mix(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
        let grid = uniform_grid(0.0, 5.0, 501);
        let r = witness_search(&m, &m, 100, 7, Some(&grid)).unwrap();
        assert!(!r.found, "{r:?}");
        assert!(witness_search(&m, &m, 0, 7, Some(&grid)).is_err());
    }

    #[test]
    fn ancilla_search_detects_non_cp_divisible_sinusoid() {
        let m = RateModel::sinusoid3(-1.0, 0.5).unwrap();
        let grid = uniform_grid(0.0, 10.0, 1001);
        let r = witness_search_ancilla(&m, 300, 1, Some(&grid)).unwrap();
        assert!(r.found && r.max_derivative > 1e-2, "{r:?}");
        assert_eq!(r.mode, TrajectoryMode::Ancilla);
        let slope = verify_witness(&m, None, &r, 0.001).unwrap();
        assert!(slope > DETECTION_THRESHOLD);

        let semigroup = RateModel::constants([1.0, 0.5, 0.2], 0.5).unwrap();
        assert!(!witness_search_ancilla(&semigroup, 300, 1, Some(&grid)).unwrap().found);
    }

    #[test]
    fn invertibility_check() {
        let grid = uniform_grid(0.0, 1.0, 11);
        assert!(check_invertible(&mix(0.5, 0.5, 0.0), &grid).is_ok());
        let fast = RateModel::constants([400.0, 400.0, 400.0], 1.0).unwrap();
        assert!(matches!(check_invertible(&fast, &grid), Err(Error::NonInvertible(_))));
        assert!(matches!(sbfi_report(&fast, 10, 1), Err(Error::NonInvertible(_))));
    }

    #[test]
    fn report_json_round_trip() {
        let m = mix(0.5, 0.5, 0.0);
        let grid = uniform_grid(0.0, 3.0, 101);
        let r = witness_search(&m, &m, 20, 1, Some(&grid)).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        let back: WitnessReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back.found, r.found);
        assert!(back.spec.delta().max_abs_diff(&r.spec.delta()) < 1e-12);
    }
}
