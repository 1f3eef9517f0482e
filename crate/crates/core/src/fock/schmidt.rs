//! Schmidt decomposition across an ancilla/signal bipartition.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::state::PureState;
use crate::linalg;

/// Default weight below which Schmidt terms are dropped.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SchmidtTerm {
    /// Squared Schmidt coefficient; weights sum to 1 up to truncation.
    pub weight: f64,
    /// Unit vector on the first (ancilla) factor.
    pub left: Array1<C64>,
    /// Unit vector on the second (signal) factor.
    pub right: Array1<C64>,
}

#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    /// Terms with weight above the rank tolerance, descending.
    pub terms: Vec<SchmidtTerm>,
    /// Total weight of dropped terms.
    pub dropped_weight: f64,
    pub left_dim: usize,
    pub right_dim: usize,
}

impl SchmidtDecomposition {
    /// Reassemble `sum_i sqrt(w_i) |l_i>|r_i>` as a full amplitude vector
    /// (left factor most significant).
    pub fn reconstruct(&self) -> Array1<C64> {
        let mut amps = Array1::zeros(self.left_dim * self.right_dim);
        for term in &self.terms {
            let c = term.weight.sqrt();
            for (a, la) in term.left.iter().enumerate() {
                if la.norm_sqr() == 0.0 {
                    continue;
                }
                let base = a * self.right_dim;
                for (s, ra) in term.right.iter().enumerate() {
                    amps[base + s] += C64::new(c, 0.0) * la * ra;
                }
            }
        }
        amps
    }
}

/// Schmidt decomposition of a normalized pure state with the given modes
/// on the left side of the bipartition (remaining modes on the right).
///
/// The listed modes must form a prefix of the layout (the canonical
/// ancilla block), so the amplitude vector reshapes without permutation.
pub fn schmidt_decompose(
    state: &PureState,
    left_modes: &[usize],
    rank_tol: f64,
) -> Result<SchmidtDecomposition> {
    let n = state.layout().mode_count();
    for (pos, &m) in left_modes.iter().enumerate() {
        if m != pos {
            return Err(Error::InvalidParam(
                "bipartition must be a leading block of modes; permute first".into(),
            ));
        }
        if m >= n {
            return Err(Error::InvalidParam(format!("mode {m} out of range")));
        }
    }
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized(norm));
    }
    let left_dim: usize = left_modes
        .iter()
        .map(|&m| state.layout().mode(m).cutoff + 1)
        .product();
    let right_dim = state.dim() / left_dim;
    let amps = state.amplitudes();
    let mut mat = Array2::zeros((left_dim, right_dim));
    for a in 0..left_dim {
        for s in 0..right_dim {
            mat[(a, s)] = amps[a * right_dim + s];
        }
    }
    let (u, sv, vt) = linalg::svd(&mat)?;
    let mut terms = Vec::new();
    let mut dropped = 0.0;
    for (i, &sigma) in sv.iter().enumerate() {
        let w = sigma * sigma;
        if w < rank_tol {
            dropped += w;
            continue;
        }
        terms.push(SchmidtTerm {
            weight: w,
            left: u.column(i).to_owned(),
            right: vt.row(i).to_owned(),
        });
    }
    Ok(SchmidtDecomposition {
        terms,
        dropped_weight: dropped,
        left_dim,
        right_dim,
    })
}

/// Schmidt decomposition across the layout's ancilla/signal split.
pub fn schmidt_ancilla_signal(state: &PureState, rank_tol: f64) -> Result<SchmidtDecomposition> {
    let ancillas = state.layout().ancilla_modes();
    schmidt_decompose(state, &ancillas, rank_tol)
}
