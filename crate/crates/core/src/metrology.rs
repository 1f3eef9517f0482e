//! Fidelity, symmetric logarithmic derivatives, quantum/classical
//! Fisher information, and the environment-access upper bound on the
//! QFIM.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::bures::mu;
use crate::channel::{
    apply_loss, apply_loss_with_derivatives, purified_evolve_with_derivative, LossParams,
    Parametrization,
};
use crate::error::{Error, Result};
use crate::fock::{DensityOperator, PureState};
use crate::linalg;
use crate::measurements::Povm;

/// Relative eigenvalue floor used when factoring density operators for
/// fidelity evaluation.
const FIDELITY_CLIP: f64 = 1e-13;

/// Default relative support cutoff for SLD construction.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Default probability floor for classical Fisher information sums.
pub const DEFAULT_PROB_TOL: f64 = 1e-15;

/// Margin tolerance for the environment-access bound check.
pub const BOUND_TOL: f64 = 1e-8;

/// How a fidelity value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMethod {
    Uhlmann,
    NdsClosedForm,
    PurifiedSum,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FidelityResult {
    pub value: f64,
    pub method: FidelityMethod,
}

/// Low-rank factor `X` with `rho ~= X X^dag`, eigenvalues below
/// `FIDELITY_CLIP * lambda_max` discarded.
fn psd_factor(rho: &DensityOperator) -> Result<Array2<C64>> {
    let (w, v) = rho.eigendecompose()?;
    let n = w.len();
    let lambda_max = w[n - 1];
    if lambda_max <= 0.0 {
        return Err(Error::NotPositive(lambda_max));
    }
    let lambda_min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    if lambda_min < -1e-10 * lambda_max.max(1.0) {
        return Err(Error::NotPositive(lambda_min));
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| w[i] > FIDELITY_CLIP * lambda_max)
        .collect();
    let mut x = Array2::zeros((n, keep.len()));
    for (col, &i) in keep.iter().enumerate() {
        let s = w[i].sqrt();
        for r in 0..n {
            x[(r, col)] = v[(r, i)] * s;
        }
    }
    Ok(x)
}

/// Uhlmann fidelity `Tr sqrt( sqrt(rho) sigma sqrt(rho) )`.
///
/// Evaluated as the nuclear norm of the cross-Gram matrix `X^dag Y` of
/// low-rank factorizations `rho = X X^dag`, `sigma = Y Y^dag`, which is
/// far better conditioned than assembling `sqrt(rho)` densely.
pub fn uhlmann_fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    for t in [rho.trace(), sigma.trace()] {
        if (t - 1.0).abs() > 1e-6 {
            return Err(Error::NotNormalized(t));
        }
    }
    let x = psd_factor(rho)?;
    let y = psd_factor(sigma)?;
    let xdag = x.t().mapv(|c| c.conj());
    let cross = xdag.dot(&y);
    let s = linalg::singular_values(&cross)?;
    Ok(s.sum().min(1.0 + 1e-12))
}

/// Closed-form output fidelity for number-diagonal-signal probes:
/// `sum_n p_n mu^n` with `mu = sqrt(eta eta') + sqrt((1-eta)(1-eta'))`.
pub fn nds_fidelity(p: &[f64], eta: f64, eta_prime: f64) -> f64 {
    let m = mu(eta, eta_prime);
    let mut acc = 0.0;
    let mut mpow = 1.0;
    for &pn in p {
        acc += pn * mpow;
        mpow *= m;
    }
    acc
}

/// Symmetric logarithmic derivative on the support of `rho`:
/// eigen-expand `rho`, set `L_ij = 2 <i|drho|j> / (lambda_i + lambda_j)`
/// where the denominator exceeds `rank_tol * lambda_max`, else 0.
pub fn sld(rho: &DensityOperator, drho: &Array2<C64>, rank_tol: f64) -> Result<Array2<C64>> {
    let defect = linalg::hermiticity_defect(drho);
    if defect > 1e-10 {
        return Err(Error::NotHermitian(defect));
    }
    let tr: f64 = (0..drho.nrows()).map(|i| drho[(i, i)].re).sum();
    if tr.abs() > 1e-8 {
        return Err(Error::InvalidParam(format!(
            "drho must be traceless (got trace {tr:.3e})"
        )));
    }
    let (w, v) = rho.eigendecompose()?;
    let n = w.len();
    let lambda_max = w[n - 1].max(0.0);
    if lambda_max <= 0.0 {
        return Err(Error::NotPositive(lambda_max));
    }
    let floor = rank_tol * lambda_max;
    let vdag = v.t().mapv(|c| c.conj());
    let d_eig = vdag.dot(drho).dot(&v);
    let mut l_eig = Array2::<C64>::zeros((n, n));
    let mut any = false;
    for i in 0..n {
        for j in 0..n {
            let denom = w[i].max(0.0) + w[j].max(0.0);
            if denom > floor {
                l_eig[(i, j)] = 2.0 * d_eig[(i, j)] / denom;
                any = true;
            }
        }
    }
    if !any {
        return Err(Error::Degenerate(
            "all eigenvalue pairs below rank_tol".into(),
        ));
    }
    let mut l = v.dot(&l_eig).dot(&vdag);
    linalg::hermitize(&mut l);
    Ok(l)
}

/// Options for [`qfim`].
#[derive(Clone, Copy, Debug)]
pub struct QfimOptions {
    /// Relative support cutoff for the SLD construction.
    pub rank_tol: f64,
    /// Retain the SLD matrices and their spectra in the report.
    pub keep_slds: bool,
}

impl Default for QfimOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            keep_slds: false,
        }
    }
}

/// Quantum Fisher information matrix report.
#[derive(Clone, Debug, Serialize)]
pub struct QfimReport {
    pub parametrization: Parametrization,
    /// Parameter vector in that parametrization.
    pub theta: Vec<f64>,
    /// K x K QFIM, row-major.
    pub qfim: Vec<Vec<f64>>,
    /// Signal energy per element.
    pub energies: Vec<f64>,
    /// Diagonal of the environment-access bound `4 diag(N_k)` (angle
    /// parametrization).
    pub mp_bound_diag: Vec<f64>,
    /// Minimum eigenvalue of `4 diag(N) - K_phi`.
    pub bound_margin: f64,
    /// `bound_margin >= -BOUND_TOL`.
    pub bound_satisfied: bool,
    /// Eigenvalues of each SLD when retained.
    pub sld_spectra: Option<Vec<Vec<f64>>>,
    /// Tolerance metadata.
    pub rank_tol: f64,
    pub bound_tol: f64,
    #[serde(skip)]
    pub slds: Option<Vec<Array2<C64>>>,
}

impl QfimReport {
    pub fn qfim_array(&self) -> Array2<f64> {
        let k = self.qfim.len();
        let mut m = Array2::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = self.qfim[i][j];
            }
        }
        m
    }
}

/// QFIM of the loss-channel output of a pure probe, with analytic Kraus
/// derivatives, in the parametrization carried by `params`.
pub fn qfim(probe: &PureState, params: &LossParams, opts: &QfimOptions) -> Result<QfimReport> {
    let k = params.len();
    if probe.layout().element_count() != k {
        return Err(Error::DimensionMismatch {
            expected: probe.layout().element_count(),
            got: k,
        });
    }
    if params.parametrization() == Parametrization::Eta {
        for i in 0..k {
            let eta = params.eta(i);
            if eta <= 0.0 || eta >= 1.0 {
                return Err(Error::InvalidParam(format!(
                    "eta[{i}] = {eta} on the boundary; the transmittance \
                     parametrization is singular there (use the angle form)"
                )));
            }
        }
    }
    let rho0 = probe.to_density();
    let (rho_out, drhos) = apply_loss_with_derivatives(&rho0, params)?;
    let (w, v) = rho_out.eigendecompose()?;
    let n = w.len();
    let lambda_max = w[n - 1].max(0.0);
    if lambda_max <= 0.0 {
        return Err(Error::NotPositive(lambda_max));
    }
    let floor = opts.rank_tol * lambda_max;
    let vdag = v.t().mapv(|c| c.conj());
    let d_eigs: Vec<Array2<C64>> = drhos.iter().map(|d| vdag.dot(d).dot(&v)).collect();
    let mut qfim_mat = vec![vec![0.0f64; k]; k];
    for a in 0..n {
        for b in 0..n {
            let denom = w[a].max(0.0) + w[b].max(0.0);
            if denom <= floor {
                continue;
            }
            for i in 0..k {
                let dia = d_eigs[i][(a, b)];
                if dia.norm_sqr() == 0.0 {
                    continue;
                }
                for j in i..k {
                    let djb = d_eigs[j][(a, b)];
                    let term = 2.0 * (dia * djb.conj()).re / denom;
                    qfim_mat[i][j] += term;
                }
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            qfim_mat[i][j] = qfim_mat[j][i];
        }
    }
    // Convert to the angle parametrization for the bound check:
    // K_phi = J K J with J = diag(d eta_k / d phi_k).
    let energies = probe.element_energies();
    let mut k_phi = qfim_mat.clone();
    if params.parametrization() == Parametrization::Eta {
        let jac: Vec<f64> = (0..k)
            .map(|i| {
                let eta = params.eta(i);
                -2.0 * (eta * (1.0 - eta)).sqrt()
            })
            .collect();
        for i in 0..k {
            for j in 0..k {
                k_phi[i][j] *= jac[i] * jac[j];
            }
        }
    }
    let mut gap = Array2::<C64>::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            let bound = if i == j { 4.0 * energies[i] } else { 0.0 };
            gap[(i, j)] = C64::new(bound - k_phi[i][j], 0.0);
        }
    }
    let (gap_eigs, _) = linalg::eigh(&gap)?;
    let bound_margin = gap_eigs[0];
    let (slds, sld_spectra) = if opts.keep_slds {
        let mut ls = Vec::with_capacity(k);
        let mut spectra = Vec::with_capacity(k);
        for d_eig in &d_eigs {
            let mut l_eig = Array2::<C64>::zeros((n, n));
            for a in 0..n {
                for b in 0..n {
                    let denom = w[a].max(0.0) + w[b].max(0.0);
                    if denom > floor {
                        l_eig[(a, b)] = 2.0 * d_eig[(a, b)] / denom;
                    }
                }
            }
            let mut l = v.dot(&l_eig).dot(&vdag);
            linalg::hermitize(&mut l);
            let (spec, _) = linalg::eigh(&l)?;
            spectra.push(spec.to_vec());
            ls.push(l);
        }
        (Some(ls), Some(spectra))
    } else {
        (None, None)
    };
    Ok(QfimReport {
        parametrization: params.parametrization(),
        theta: params.values().to_vec(),
        qfim: qfim_mat,
        energies: energies.clone(),
        mp_bound_diag: energies.iter().map(|&e| 4.0 * e).collect(),
        bound_margin,
        bound_satisfied: bound_margin >= -BOUND_TOL,
        sld_spectra,
        rank_tol: opts.rank_tol,
        bound_tol: BOUND_TOL,
        slds,
    })
}

/// Environment-access bound `4 diag(N_1..N_K)` on the QFIM in the angle
/// parametrization.
pub fn mp_bound(energies: &[f64]) -> Array2<f64> {
    let k = energies.len();
    let mut m = Array2::zeros((k, k));
    for i in 0..k {
        m[(i, i)] = 4.0 * energies[i];
    }
    m
}

/// Fidelity-based QFI estimate (independent of the SLD path).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QfiFidelityEstimate {
    /// Richardson-combined value.
    pub value: f64,
    /// Plain second difference at `step`.
    pub coarse: f64,
    /// Plain second difference at `step / 2`.
    pub fine: f64,
    /// Set when the two stencils disagree beyond tolerance.
    pub flagged: bool,
    pub step: f64,
}

/// Default finite-difference step (radians).
pub const DEFAULT_FD_STEP: f64 = 1e-3;

/// QFI of parameter `element` from the fidelity curvature
/// `-4 d^2 F(rho_phi, rho_phi') / d phi'^2` at `phi' = phi`, via central
/// second differences at `step` and `step/2` with Richardson
/// combination. Always evaluated in the angle parametrization (the
/// value for the transmittance form follows from the Jacobian).
pub fn qfi_from_fidelity(
    probe: &PureState,
    params: &LossParams,
    element: usize,
    step: f64,
) -> Result<QfiFidelityEstimate> {
    if step <= 0.0 || step > 0.1 {
        return Err(Error::InvalidParam(format!(
            "finite-difference step {step} outside the validated range (0, 0.1]"
        )));
    }
    let phi_params = params.to_phi();
    let phi0 = phi_params.values()[element];
    let rho0 = probe.to_density();
    let center = apply_loss(&rho0, &phi_params)?;
    let f_at = |delta: f64| -> Result<f64> {
        let shifted = phi_params.with_value(element, phi0 + delta)?;
        let out = apply_loss(&rho0, &shifted)?;
        uhlmann_fidelity(&center, &out)
    };
    let second_diff = |h: f64| -> Result<f64> {
        let fp = f_at(h)?;
        let fm = f_at(-h)?;
        // F(0) = 1 exactly.
        Ok(-4.0 * (fp - 2.0 + fm) / (h * h))
    };
    let coarse = second_diff(step)?;
    let fine = second_diff(step / 2.0)?;
    let value = (4.0 * fine - coarse) / 3.0;
    let tol = (10.0 * step * step).max(1e-4);
    let flagged = (fine - coarse).abs() > tol;
    Ok(QfiFidelityEstimate {
        value,
        coarse,
        fine,
        flagged,
        step,
    })
}

/// Classical Fisher information of a POVM at `rho` with parameter
/// derivative `drho`: `sum_x (Tr drho E_x)^2 / Tr(rho E_x)`.
///
/// Outcomes with probability at or below `prob_tol` are merged into a
/// single residual outcome so the sum stays finite.
pub fn classical_fi(
    povm: &Povm,
    rho: &DensityOperator,
    drho: &Array2<C64>,
    prob_tol: f64,
) -> Result<f64> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: rho.dim(),
        });
    }
    let probs = povm.pairings(rho.matrix());
    let dprobs = povm.pairings(drho);
    let mut fi = 0.0;
    let mut residual_p = 0.0;
    let mut residual_d = 0.0;
    let mut live = 0usize;
    for (&p, &d) in probs.iter().zip(&dprobs) {
        if p > prob_tol {
            fi += d * d / p;
            live += 1;
        } else {
            residual_p += p.max(0.0);
            residual_d += d;
        }
    }
    if live == 0 {
        return Err(Error::Degenerate(
            "all outcome probabilities below prob_tol".into(),
        ));
    }
    if residual_p > prob_tol {
        fi += residual_d * residual_d / residual_p;
    }
    Ok(fi)
}

/// QFI of the pure joint output (environment retained) for parameter
/// `element`, in the parametrization carried by `params`:
/// `4 ( <dPsi|dPsi> - |<Psi|dPsi>|^2 )` over the environment expansion.
pub fn purified_qfi(probe: &PureState, params: &LossParams, element: usize) -> Result<f64> {
    let (out, dcomps) = purified_evolve_with_derivative(probe, params, element)?;
    let mut grad_norm = 0.0f64;
    let mut overlap = C64::new(0.0, 0.0);
    for (pattern, dv) in &dcomps {
        grad_norm += dv.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if let Some(v) = out.component(pattern) {
            for (a, b) in v.iter().zip(dv.iter()) {
                overlap += a.conj() * b;
            }
        }
    }
    Ok(4.0 * (grad_norm - overlap.norm_sqr()))
}

/// Fidelity between two purified outputs via the environment-pattern
/// overlap sum; equals the Uhlmann fidelity of the reduced outputs for
/// number-diagonal-signal probes.
pub fn purified_fidelity(
    a: &crate::channel::PurifiedOutput,
    b: &crate::channel::PurifiedOutput,
) -> f64 {
    a.overlap_sum(b).re
}
