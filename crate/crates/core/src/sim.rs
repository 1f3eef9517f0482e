//! Monte Carlo simulation of the estimation pipeline: probe through
//! channel, measurement sampling, per-parameter maximum-likelihood
//! estimation, and comparison against the Cramer-Rao bound.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_loss, LossParams};
use crate::error::{Error, Result};
use crate::fock::{build_probe, AncillaPolicy, ProbeSpec, PureState};
use crate::measurements::{on_off_povm, outcome_distribution, sample, schmidt_povm, Povm};
use crate::metrology::{qfim, QfimOptions};

/// Measurement used inside the simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PovmChoice {
    /// On-off detection on every mode (ancilla and signal).
    OnOff,
    /// Schmidt-basis joint measurement of the probe.
    Schmidt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Argmax over the likelihood grid.
    MleGrid,
    /// Grid argmax followed by golden-section refinement.
    MleRefined,
}

/// Likelihood grid for the transmittance estimate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: 0.01,
            hi: 0.99,
            points: 512,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimScenario {
    pub probe: ProbeSpec,
    /// True loss parameters (estimates are reported in transmittance).
    pub true_params: LossParams,
    pub povm: PovmChoice,
    pub shots: u64,
    pub trials: u64,
    pub seed: u64,
    pub estimator: Estimator,
    #[serde(default)]
    pub grid: GridSpec,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimReport {
    /// True transmittances.
    pub true_etas: Vec<f64>,
    /// Mean estimate per parameter.
    pub mean: Vec<f64>,
    /// Bias per parameter.
    pub bias: Vec<f64>,
    /// Empirical covariance of the estimates (K x K).
    pub covariance: Vec<Vec<f64>>,
    /// Cramer-Rao bound `K_eta^{-1} / shots` (K x K).
    pub crb: Vec<Vec<f64>>,
    /// `(Sigma * shots * K_eta)_kk` per parameter.
    pub efficiency: Vec<f64>,
    /// Trials whose grid argmax landed on a grid endpoint.
    pub boundary_hits: u64,
    pub shots: u64,
    pub trials: u64,
    pub seed: u64,
    /// Per-trial estimates, trial-major.
    pub estimates: Vec<Vec<f64>>,
}

/// Split-mix style mixing for per-(trial, element) RNG streams.
fn stream_seed(seed: u64, trial: u64, element: u64) -> u64 {
    let mut z = seed
        .wrapping_add(trial.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(element.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One element's precomputed experiment: probe factor, measurement, and
/// the likelihood table over the grid.
struct ElementExperiment {
    probe: PureState,
    povm: Povm,
    grid_etas: Vec<f64>,
    /// `grid_probs[g][x]` outcome probabilities at grid point `g`.
    grid_probs: Vec<Vec<f64>>,
    true_dist: Vec<f64>,
    qfi_eta: f64,
}

impl ElementExperiment {
    fn distribution_at(&self, eta: f64) -> Result<Vec<f64>> {
        let rho0 = self.probe.to_density();
        let out = apply_loss(&rho0, &LossParams::etas(vec![eta])?)?;
        outcome_distribution(&out, &self.povm)
    }

    fn log_likelihood(counts: &[u64], probs: &[f64]) -> f64 {
        let mut ll = 0.0;
        for (&c, &p) in counts.iter().zip(probs) {
            if c == 0 {
                continue;
            }
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            ll += c as f64 * p.ln();
        }
        ll
    }
}

fn single_element_spec(spec: &ProbeSpec, k: usize) -> ProbeSpec {
    ProbeSpec {
        kind: spec.kind,
        energies: vec![spec.energies[k]],
        modes_per_element: spec
            .modes_per_element
            .get(k)
            .map(|&m| vec![m])
            .unwrap_or_default(),
        cutoff: spec.cutoff,
        distributions: spec
            .distributions
            .get(k)
            .cloned()
            .map(|d| vec![d])
            .unwrap_or_default(),
        trunc_tol: spec.trunc_tol,
    }
}

/// Run the scenario. Product probes factorize over loss elements, and
/// both supported measurements factorize the same way, so each element
/// is simulated as an independent sub-experiment with its own RNG
/// stream derived from `(seed, trial, element)`.
pub fn run_sim(scenario: &SimScenario) -> Result<SimReport> {
    if scenario.shots == 0 || scenario.trials == 0 {
        return Err(Error::InvalidParam("shots and trials must be >= 1".into()));
    }
    let grid = scenario.grid;
    if !(grid.lo > 0.0 && grid.hi < 1.0 && grid.lo < grid.hi) {
        return Err(Error::InvalidParam(
            "grid bounds must satisfy 0 < lo < hi < 1".into(),
        ));
    }
    if grid.points < 8 {
        return Err(Error::InvalidParam("grid needs at least 8 points".into()));
    }
    let k_elements = scenario.probe.element_count();
    let true_eta = scenario.true_params.to_eta();
    if true_eta.len() != k_elements {
        return Err(Error::DimensionMismatch {
            expected: k_elements,
            got: true_eta.len(),
        });
    }
    // Precompute per-element experiments.
    let grid_etas: Vec<f64> = (0..grid.points)
        .map(|i| grid.lo + (grid.hi - grid.lo) * i as f64 / (grid.points - 1) as f64)
        .collect();
    let mut experiments = Vec::with_capacity(k_elements);
    for k in 0..k_elements {
        let sub = single_element_spec(&scenario.probe, k);
        let probe = build_probe(&sub, AncillaPolicy::OrthonormalMin)?;
        let povm = match scenario.povm {
            PovmChoice::OnOff => {
                let all: Vec<usize> = (0..probe.layout().mode_count()).collect();
                on_off_povm(probe.layout(), &all)?
            }
            PovmChoice::Schmidt => schmidt_povm(&probe)?,
        };
        let eta_k = true_eta.values()[k];
        let rho0 = probe.to_density();
        let true_out = apply_loss(&rho0, &LossParams::etas(vec![eta_k])?)?;
        let true_dist = outcome_distribution(&true_out, &povm)?;
        let report = qfim(
            &probe,
            &LossParams::etas(vec![eta_k])?,
            &QfimOptions::default(),
        )?;
        let qfi_eta = report.qfim[0][0];
        let mut grid_probs = Vec::with_capacity(grid.points);
        for &eta in &grid_etas {
            let out = apply_loss(&rho0, &LossParams::etas(vec![eta])?)?;
            grid_probs.push(outcome_distribution(&out, &povm)?);
        }
        experiments.push(ElementExperiment {
            probe,
            povm,
            grid_etas: grid_etas.clone(),
            grid_probs,
            true_dist,
            qfi_eta,
        });
    }
    // Identifiability: the likelihood must vary over the grid for some
    // reference counts (use the expected counts at the true parameter).
    for (k, exp) in experiments.iter().enumerate() {
        let expected: Vec<u64> = exp
            .true_dist
            .iter()
            .map(|&p| (p * scenario.shots as f64).round() as u64)
            .collect();
        let lls: Vec<f64> = exp
            .grid_probs
            .iter()
            .map(|probs| ElementExperiment::log_likelihood(&expected, probs))
            .collect();
        let finite: Vec<f64> = lls.iter().cloned().filter(|x| x.is_finite()).collect();
        if finite.is_empty() {
            continue;
        }
        let spread = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - finite.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread < 1e-9 {
            return Err(Error::NonIdentifiable(format!(
                "element {k}: likelihood is flat across the grid"
            )));
        }
    }
    // Trials, parallel with per-trial streams.
    let trial_results: Vec<Result<(Vec<f64>, bool)>> = (0..scenario.trials)
        .into_par_iter()
        .map(|trial| {
            let mut estimate = Vec::with_capacity(k_elements);
            let mut boundary = false;
            for (k, exp) in experiments.iter().enumerate() {
                let seed = stream_seed(scenario.seed, trial, k as u64);
                let counts = sample(&exp.true_dist, scenario.shots, seed)?;
                let (eta_hat, on_edge) = mle(exp, &counts, scenario.estimator)?;
                boundary |= on_edge;
                estimate.push(eta_hat);
            }
            Ok((estimate, boundary))
        })
        .collect();
    let mut estimates = Vec::with_capacity(scenario.trials as usize);
    let mut boundary_hits = 0u64;
    for r in trial_results {
        let (est, edge) = r?;
        if edge {
            boundary_hits += 1;
        }
        estimates.push(est);
    }
    // Statistics in a fixed order for bit-stable reports.
    let t = estimates.len() as f64;
    let mut mean = vec![0.0; k_elements];
    for est in &estimates {
        for (k, &x) in est.iter().enumerate() {
            mean[k] += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= t;
    }
    let mut cov = vec![vec![0.0; k_elements]; k_elements];
    for est in &estimates {
        for i in 0..k_elements {
            for j in 0..k_elements {
                cov[i][j] += (est[i] - mean[i]) * (est[j] - mean[j]);
            }
        }
    }
    let denom = if estimates.len() > 1 { t - 1.0 } else { 1.0 };
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= denom;
        }
    }
    let bias: Vec<f64> = (0..k_elements)
        .map(|k| mean[k] - true_eta.values()[k])
        .collect();
    // CRB: product experiments give a diagonal QFIM.
    let mut crb = vec![vec![0.0; k_elements]; k_elements];
    let mut efficiency = vec![0.0; k_elements];
    for k in 0..k_elements {
        let qfi = experiments[k].qfi_eta;
        if qfi > 0.0 {
            crb[k][k] = 1.0 / (qfi * scenario.shots as f64);
            efficiency[k] = cov[k][k] * scenario.shots as f64 * qfi;
        }
    }
    Ok(SimReport {
        true_etas: true_eta.values().to_vec(),
        mean,
        bias,
        covariance: cov,
        crb,
        efficiency,
        boundary_hits,
        shots: scenario.shots,
        trials: scenario.trials,
        seed: scenario.seed,
        estimates,
    })
}

/// Per-element maximum-likelihood estimate: grid argmax, then
/// golden-section refinement between the neighboring grid points.
fn mle(exp: &ElementExperiment, counts: &[u64], estimator: Estimator) -> Result<(f64, bool)> {
    let lls: Vec<f64> = exp
        .grid_probs
        .iter()
        .map(|probs| ElementExperiment::log_likelihood(counts, probs))
        .collect();
    let mut best = 0usize;
    for (i, &ll) in lls.iter().enumerate() {
        if ll > lls[best] {
            best = i;
        }
    }
    if !lls[best].is_finite() {
        return Err(Error::NonIdentifiable(
            "likelihood vanished on the whole grid".into(),
        ));
    }
    let spread = lls.iter().cloned().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max)
        - lls.iter().cloned().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
    if spread < 1e-12 {
        return Err(Error::NonIdentifiable(
            "likelihood is flat for the observed counts".into(),
        ));
    }
    let on_edge = best == 0 || best == exp.grid_etas.len() - 1;
    if estimator == Estimator::MleGrid || on_edge {
        return Ok((exp.grid_etas[best], on_edge));
    }
    // Golden-section maximization on [grid[best-1], grid[best+1]].
    let mut a = exp.grid_etas[best - 1];
    let mut b = exp.grid_etas[best + 1];
    let ll_at = |eta: f64| -> Result<f64> {
        let probs = exp.distribution_at(eta)?;
        Ok(ElementExperiment::log_likelihood(counts, &probs))
    };
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = ll_at(c)?;
    let mut fd = ll_at(d)?;
    while (b - a).abs() > 1e-8 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = ll_at(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = ll_at(d)?;
        }
    }
    Ok((0.5 * (a + b), false))
}

/// CSV of per-trial estimates: `trial,eta_hat_0,...`.
pub fn estimates_csv(report: &SimReport) -> String {
    let k = report.true_etas.len();
    let mut out = String::from("trial");
    for i in 0..k {
        out.push_str(&format!(",eta_hat_{i}"));
    }
    out.push('\n');
    for (t, est) in report.estimates.iter().enumerate() {
        out.push_str(&t.to_string());
        for v in est {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Convenience accessor for the covariance as an array.
pub fn covariance_array(report: &SimReport) -> Array2<f64> {
    let k = report.true_etas.len();
    let mut m = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            m[(i, j)] = report.covariance[i][j];
        }
    }
    m
}

/// The same DensityOperator-to-distribution path used by the simulator,
/// exposed for CLI outcome tables.
pub fn scenario_distribution(scenario: &SimScenario) -> Result<(Vec<String>, Vec<f64>)> {
    let k_elements = scenario.probe.element_count();
    if k_elements != 1 {
        return Err(Error::InvalidParam(
            "outcome tables are emitted per element; use a single-element scenario".into(),
        ));
    }
    let probe = build_probe(&scenario.probe, AncillaPolicy::OrthonormalMin)?;
    let povm = match scenario.povm {
        PovmChoice::OnOff => {
            let all: Vec<usize> = (0..probe.layout().mode_count()).collect();
            on_off_povm(probe.layout(), &all)?
        }
        PovmChoice::Schmidt => schmidt_povm(&probe)?,
    };
    let out = apply_loss(&probe.to_density(), &scenario.true_params.to_eta())?;
    let dist = outcome_distribution(&out, &povm)?;
    Ok((povm.labels().to_vec(), dist))
}
