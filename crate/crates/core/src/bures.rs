//! Energy-constrained Bures distance between M-mode loss channels:
//! closed form, an independent two-point linear-program oracle, and the
//! optimal discrimination probe.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{build_probe, AncillaPolicy, ProbeSpec, PureState};

/// Pairwise loss overlap
/// `mu = sqrt(eta eta') + sqrt((1-eta)(1-eta')) = cos(phi' - phi)`.
pub fn mu(eta: f64, eta_prime: f64) -> f64 {
    let m = (eta * eta_prime).sqrt() + ((1.0 - eta) * (1.0 - eta_prime)).sqrt();
    m.clamp(0.0, 1.0)
}

/// Query for the energy-constrained Bures distance between
/// `L_eta^(x M)` and `L_eta'^(x M)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EcbQuery {
    pub eta: f64,
    pub eta_prime: f64,
    /// Total signal energy N >= 0.
    pub energy: f64,
    /// Number of signal modes M >= 1 (the distance is independent of it).
    pub modes: usize,
    /// Support cap for the brute-force oracle; defaults to
    /// `10 ceil(N) + 10`.
    pub n_max: Option<usize>,
}

impl EcbQuery {
    pub fn new(eta: f64, eta_prime: f64, energy: f64, modes: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) || !(0.0..=1.0).contains(&eta_prime) {
            return Err(Error::InvalidParam("eta values must lie in [0, 1]".into()));
        }
        if energy < 0.0 || !energy.is_finite() {
            return Err(Error::InvalidParam("energy must be finite and >= 0".into()));
        }
        if modes == 0 {
            return Err(Error::InvalidParam("at least one signal mode".into()));
        }
        Ok(Self {
            eta,
            eta_prime,
            energy,
            modes,
            n_max: None,
        })
    }

    pub fn effective_n_max(&self) -> usize {
        self.n_max
            .unwrap_or(10 * self.energy.ceil() as usize + 10)
    }
}

/// Closed-form energy-constrained minimum output fidelity:
/// `(1 - {N}) mu^floor(N) + {N} mu^ceil(N)`.
pub fn min_fidelity_closed(energy: f64, mu: f64) -> f64 {
    let lo = energy.floor();
    let frac = energy - lo;
    if mu >= 1.0 {
        return 1.0;
    }
    (1.0 - frac) * mu.powi(lo as i32) + frac * mu.powi(lo as i32 + 1)
}

/// Independent oracle: minimize `sum_n p_n mu^n` subject to `p >= 0`,
/// `sum p = 1`, `sum n p_n = N` by enumerating two-point supports. A
/// linear program with two equality constraints has an optimal basic
/// solution with at most two support points, so the enumeration is
/// exhaustive.
pub fn min_fidelity_bruteforce(query: &EcbQuery) -> Result<(f64, Vec<(usize, f64)>)> {
    let n_max = query.effective_n_max();
    let energy = query.energy;
    if (n_max as f64) < energy {
        return Err(Error::Infeasible(format!(
            "energy {energy} exceeds the support cap {n_max}"
        )));
    }
    let m = mu(query.eta, query.eta_prime);
    if m >= 1.0 {
        // Every feasible distribution attains F = 1; report the
        // canonical two-point solution.
        return Ok((1.0, canonical_support(energy)));
    }
    let mut best = f64::INFINITY;
    let mut best_support = Vec::new();
    // Single-point support at integer N.
    if energy.fract() == 0.0 {
        let n = energy as usize;
        let f = m.powi(n as i32);
        if f < best {
            best = f;
            best_support = vec![(n, 1.0)];
        }
    }
    let lo_max = energy.floor() as usize;
    let hi_min = energy.ceil() as usize;
    for n1 in 0..=lo_max {
        for n2 in hi_min.max(n1 + 1)..=n_max {
            // Weights from the two equality constraints.
            let w2 = (energy - n1 as f64) / (n2 - n1) as f64;
            let w1 = 1.0 - w2;
            if !(0.0..=1.0).contains(&w1) || !(0.0..=1.0).contains(&w2) {
                continue;
            }
            let f = w1 * m.powi(n1 as i32) + w2 * m.powi(n2 as i32);
            if f < best {
                best = f;
                best_support = vec![(n1, w1), (n2, w2)];
            }
        }
    }
    if best_support.is_empty() {
        return Err(Error::Infeasible(format!(
            "no feasible two-point support for energy {energy} under cap {n_max}"
        )));
    }
    Ok((best, best_support))
}

fn canonical_support(energy: f64) -> Vec<(usize, f64)> {
    let lo = energy.floor() as usize;
    let frac = energy - lo as f64;
    if frac == 0.0 {
        vec![(lo, 1.0)]
    } else {
        vec![(lo, 1.0 - frac), (lo + 1, frac)]
    }
}

/// Energy-constrained Bures distance `sqrt(1 - F_min)`. Independent of
/// the mode count M.
pub fn ecb_distance(query: &EcbQuery) -> f64 {
    let f = min_fidelity_closed(query.energy, mu(query.eta, query.eta_prime));
    (1.0 - f).max(0.0).sqrt()
}

/// The probe achieving the distance: photons floor(N)/ceil(N) in the
/// first signal mode tagged by orthogonal ancilla states, remaining
/// signal modes in vacuum.
pub fn ecb_optimal_probe(query: &EcbQuery) -> Result<PureState> {
    build_probe(
        &ProbeSpec::ecb_optimal(query.energy, query.modes),
        AncillaPolicy::OrthonormalMin,
    )
}

/// Full report for one query.
#[derive(Clone, Debug, Serialize)]
pub struct EcbReport {
    pub query: EcbQuery,
    pub mu: f64,
    pub closed_form_fidelity: f64,
    pub oracle_fidelity: f64,
    pub distance: f64,
    /// Argmin photon-number distribution from the oracle.
    pub oracle_support: Vec<(usize, f64)>,
}

pub fn ecb_report(query: &EcbQuery) -> Result<EcbReport> {
    let m = mu(query.eta, query.eta_prime);
    let closed = min_fidelity_closed(query.energy, m);
    let (oracle, support) = min_fidelity_bruteforce(query)?;
    Ok(EcbReport {
        query: *query,
        mu: m,
        closed_form_fidelity: closed,
        oracle_fidelity: oracle,
        distance: ecb_distance(query),
        oracle_support: support,
    })
}
