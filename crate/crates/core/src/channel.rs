//! Pure-loss channel on designated signal modes: Kraus-operator action
//! on density operators, analytic parameter derivatives, and explicit
//! purified evolution retaining the environment record.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityOperator, ModeLayout, ModeRole, PureState};

/// Loss-strength parametrization: transmittance eta in [0,1] or angle
/// phi in [0, pi/2] with cos(phi) = sqrt(eta).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    Eta,
    Phi,
}

/// Per-element loss parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    parametrization: Parametrization,
    values: Vec<f64>,
}

impl LossParams {
    pub fn etas(values: Vec<f64>) -> Result<Self> {
        for (k, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam(format!(
                    "eta[{k}] = {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            parametrization: Parametrization::Eta,
            values,
        })
    }

    pub fn phis(values: Vec<f64>) -> Result<Self> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        for (k, &v) in values.iter().enumerate() {
            if !(0.0..=half_pi + 1e-15).contains(&v) {
                return Err(Error::InvalidParam(format!(
                    "phi[{k}] = {v} outside [0, pi/2]"
                )));
            }
        }
        Ok(Self {
            parametrization: Parametrization::Phi,
            values,
        })
    }

    pub fn new(parametrization: Parametrization, values: Vec<f64>) -> Result<Self> {
        match parametrization {
            Parametrization::Eta => Self::etas(values),
            Parametrization::Phi => Self::phis(values),
        }
    }

    pub fn parametrization(&self) -> Parametrization {
        self.parametrization
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Transmittance of element `k`.
    pub fn eta(&self, k: usize) -> f64 {
        match self.parametrization {
            Parametrization::Eta => self.values[k],
            Parametrization::Phi => self.values[k].cos().powi(2),
        }
    }

    /// Angle of element `k`.
    pub fn phi(&self, k: usize) -> f64 {
        match self.parametrization {
            Parametrization::Eta => self.values[k].sqrt().acos(),
            Parametrization::Phi => self.values[k],
        }
    }

    pub fn to_eta(&self) -> LossParams {
        LossParams {
            parametrization: Parametrization::Eta,
            values: (0..self.len()).map(|k| self.eta(k)).collect(),
        }
    }

    pub fn to_phi(&self) -> LossParams {
        LossParams {
            parametrization: Parametrization::Phi,
            values: (0..self.len()).map(|k| self.phi(k)).collect(),
        }
    }

    /// Copy with the raw value of one element replaced (same
    /// parametrization); used for finite-difference sweeps.
    pub fn with_value(&self, k: usize, value: f64) -> Result<LossParams> {
        let mut values = self.values.clone();
        values[k] = value;
        Self::new(self.parametrization, values)
    }
}

/// Binomial coefficient as f64 (multiplicative form, exact well past the
/// photon numbers reachable at desk-scale cutoffs).
fn binomial(n: usize, l: usize) -> f64 {
    let l = l.min(n - l.min(n));
    let mut c = 1.0f64;
    for i in 0..l {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Kraus amplitude `<n-l| A_l |n> = sqrt( C(n,l) eta^(n-l) (1-eta)^l )`.
pub fn kraus_amplitude(n: usize, l: usize, eta: f64) -> f64 {
    if l > n {
        return 0.0;
    }
    let a = (n - l) as f64;
    let b = l as f64;
    (binomial(n, l) * eta.powf(a) * (1.0 - eta).powf(b)).sqrt()
}

/// d/d(eta) of [`kraus_amplitude`]; interior eta only for n > l > 0.
fn kraus_amplitude_deta(n: usize, l: usize, eta: f64) -> f64 {
    if l > n {
        return 0.0;
    }
    let c = binomial(n, l).sqrt();
    let a = (n - l) as f64;
    let b = l as f64;
    let mut d = 0.0;
    if n > l {
        d += 0.5 * a * eta.powf(a / 2.0 - 1.0) * (1.0 - eta).powf(b / 2.0);
    }
    if l > 0 {
        d -= 0.5 * b * eta.powf(a / 2.0) * (1.0 - eta).powf(b / 2.0 - 1.0);
    }
    c * d
}

/// d/d(phi) of the Kraus amplitude written as
/// `sqrt(C) cos^(n-l)(phi) sin^l(phi)`; regular on the full range.
fn kraus_amplitude_dphi(n: usize, l: usize, phi: f64) -> f64 {
    if l > n {
        return 0.0;
    }
    let c = binomial(n, l).sqrt();
    let (s, co) = phi.sin_cos();
    let a = (n - l) as i32;
    let b = l as i32;
    let mut d = 0.0;
    if a > 0 {
        d -= a as f64 * co.powi(a - 1) * s.powi(b + 1);
    }
    if b > 0 {
        d += b as f64 * co.powi(a + 1) * s.powi(b - 1);
    }
    c * d
}

fn amplitude_in(n: usize, l: usize, value: f64, parametrization: Parametrization) -> f64 {
    match parametrization {
        Parametrization::Eta => kraus_amplitude(n, l, value),
        Parametrization::Phi => {
            let eta = value.cos().powi(2);
            kraus_amplitude(n, l, eta)
        }
    }
}

fn amplitude_derivative_in(
    n: usize,
    l: usize,
    value: f64,
    parametrization: Parametrization,
) -> f64 {
    match parametrization {
        Parametrization::Eta => kraus_amplitude_deta(n, l, value),
        Parametrization::Phi => kraus_amplitude_dphi(n, l, value),
    }
}

/// Single-mode Kraus operators of the loss channel at the given cutoff.
pub fn kraus_ops(eta: f64, cutoff: usize) -> Result<Vec<Array2<C64>>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParam(format!("eta = {eta} outside [0, 1]")));
    }
    let d = cutoff + 1;
    let mut ops = Vec::with_capacity(d);
    for l in 0..d {
        let mut a = Array2::zeros((d, d));
        for n in l..d {
            a[(n - l, n)] = C64::new(kraus_amplitude(n, l, eta), 0.0);
        }
        ops.push(a);
    }
    Ok(ops)
}

/// Per-occupation amplitude tables `tab[n][l]` for one mode.
fn amplitude_table(cutoff: usize, value: f64, p: Parametrization, derivative: bool) -> Vec<Vec<f64>> {
    (0..=cutoff)
        .map(|n| {
            (0..=n)
                .map(|l| {
                    if derivative {
                        amplitude_derivative_in(n, l, value, p)
                    } else {
                        amplitude_in(n, l, value, p)
                    }
                })
                .collect()
        })
        .collect()
}

/// One bilinear Kraus pass on `mode`:
/// `out[i', j'] += left[a][l] right[b][l] rho[i, j]` over `l`, where
/// `a`/`b` are the mode occupations of `i`/`j` and the primed indices
/// drop `l` photons on that mode.
fn kraus_pass(
    mat: &Array2<C64>,
    layout: &ModeLayout,
    mode: usize,
    left: &[Vec<f64>],
    right: &[Vec<f64>],
    out: &mut Array2<C64>,
) {
    let dim = mat.nrows();
    let stride = layout.strides()[mode];
    let occ: Vec<usize> = (0..dim).map(|i| layout.occupation(i, mode)).collect();
    for i in 0..dim {
        let a = occ[i];
        for j in 0..dim {
            let v = mat[(i, j)];
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            let b = occ[j];
            let lmax = a.min(b);
            for l in 0..=lmax {
                let w = left[a][l] * right[b][l];
                if w != 0.0 {
                    out[(i - l * stride, j - l * stride)] += v * w;
                }
            }
        }
    }
}

fn loss_on_mode(mat: &Array2<C64>, layout: &ModeLayout, mode: usize, eta: f64) -> Array2<C64> {
    let tab = amplitude_table(layout.mode(mode).cutoff, eta, Parametrization::Eta, false);
    let mut out = Array2::zeros(mat.raw_dim());
    kraus_pass(mat, layout, mode, &tab, &tab, &mut out);
    out
}

/// `d/d(theta) [ A_l rho A_l^dag summed over l ]` on one mode.
fn loss_derivative_on_mode(
    mat: &Array2<C64>,
    layout: &ModeLayout,
    mode: usize,
    value: f64,
    p: Parametrization,
) -> Array2<C64> {
    let cutoff = layout.mode(mode).cutoff;
    let tab = amplitude_table(cutoff, value, p, false);
    let dtab = amplitude_table(cutoff, value, p, true);
    let mut out = Array2::zeros(mat.raw_dim());
    kraus_pass(mat, layout, mode, &dtab, &tab, &mut out);
    kraus_pass(mat, layout, mode, &tab, &dtab, &mut out);
    out
}

fn check_elements(layout: &ModeLayout, params: &LossParams) -> Result<()> {
    let k = layout.element_count();
    if params.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: params.len(),
        });
    }
    Ok(())
}

/// Push a density operator through the loss channels; ancilla modes are
/// untouched. Loss only lowers photon numbers, so no cutoff overflow
/// can occur.
pub fn apply_loss(rho: &DensityOperator, params: &LossParams) -> Result<DensityOperator> {
    check_elements(rho.layout(), params)?;
    let layout = rho.layout().clone();
    let mut mat = rho.matrix().clone();
    for m in 0..layout.mode_count() {
        if let ModeRole::Signal { element } = layout.mode(m).role {
            mat = loss_on_mode(&mat, &layout, m, params.eta(element));
        }
    }
    Ok(DensityOperator::from_parts(layout, mat))
}

/// Channel output together with the analytic derivatives
/// `d rho / d theta_k` in the parametrization carried by `params`.
pub fn apply_loss_with_derivatives(
    rho: &DensityOperator,
    params: &LossParams,
) -> Result<(DensityOperator, Vec<Array2<C64>>)> {
    check_elements(rho.layout(), params)?;
    let layout = rho.layout().clone();
    let signal_modes: Vec<(usize, usize)> = (0..layout.mode_count())
        .filter_map(|m| match layout.mode(m).role {
            ModeRole::Signal { element } => Some((m, element)),
            ModeRole::Ancilla => None,
        })
        .collect();
    let out = apply_loss(rho, params)?;
    let p = params.parametrization();
    let mut derivs = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let mut acc = Array2::zeros(rho.matrix().raw_dim());
        for &(m_star, _) in signal_modes.iter().filter(|&&(_, e)| e == k) {
            let mut mat = rho.matrix().clone();
            for &(m, elem) in &signal_modes {
                if m == m_star {
                    continue;
                }
                mat = loss_on_mode(&mat, &layout, m, params.eta(elem));
            }
            mat = loss_derivative_on_mode(&mat, &layout, m_star, params.values()[k], p);
            acc += &mat;
        }
        derivs.push(acc);
    }
    Ok((out, derivs))
}

/// Norm-squared threshold below which environment components are
/// dropped from a [`PurifiedOutput`].
pub const DEFAULT_COMPONENT_TOL: f64 = 1e-14;

/// Expansion of the joint output over environment photon-number
/// patterns: each pattern `l` (one entry per signal mode) maps to the
/// unnormalized signal-ancilla vector left after losing `l` photons.
#[derive(Clone, Debug)]
pub struct PurifiedOutput {
    layout: ModeLayout,
    components: BTreeMap<Vec<usize>, Array1<C64>>,
    dropped_mass: f64,
}

impl PurifiedOutput {
    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn components(&self) -> &BTreeMap<Vec<usize>, Array1<C64>> {
        &self.components
    }

    pub fn component(&self, pattern: &[usize]) -> Option<&Array1<C64>> {
        self.components.get(pattern)
    }

    /// Mass removed by the component threshold.
    pub fn dropped_mass(&self) -> f64 {
        self.dropped_mass
    }

    /// `sum_l <psi_l | psi_l>`; 1 up to truncation.
    pub fn total_norm_sqr(&self) -> f64 {
        self.components
            .values()
            .map(|v| v.iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Trace out the environment record: `sum_l |psi_l><psi_l|`.
    pub fn reduced_density(&self) -> DensityOperator {
        let dim = self.layout.dim();
        let mut mat = Array2::<C64>::zeros((dim, dim));
        for v in self.components.values() {
            for i in 0..dim {
                let vi = v[i];
                if vi.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    mat[(i, j)] += vi * v[j].conj();
                }
            }
        }
        DensityOperator::from_parts(self.layout.clone(), mat)
    }

    /// `sum_l <psi_l | psi'_l>` over shared environment patterns. For
    /// number-diagonal-signal probes this equals the fidelity between
    /// the purified outputs.
    pub fn overlap_sum(&self, other: &PurifiedOutput) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (pat, v) in &self.components {
            if let Some(w) = other.components.get(pat) {
                for (a, b) in v.iter().zip(w.iter()) {
                    acc += a.conj() * b;
                }
            }
        }
        acc
    }
}

/// Evolve a pure probe through the loss elements keeping the
/// environment record.
pub fn purified_evolve(probe: &PureState, params: &LossParams) -> Result<PurifiedOutput> {
    purified_evolve_inner(probe, params, None).map(|(out, _)| out)
}

/// As [`purified_evolve`], also returning `d/d theta_k` of every
/// component (same pattern set) for the element `k` derivative in the
/// parametrization carried by `params`.
pub fn purified_evolve_with_derivative(
    probe: &PureState,
    params: &LossParams,
    element: usize,
) -> Result<(PurifiedOutput, BTreeMap<Vec<usize>, Array1<C64>>)> {
    let (out, d) = purified_evolve_inner(probe, params, Some(element))?;
    Ok((out, d.expect("derivative requested")))
}

#[allow(clippy::type_complexity)]
fn purified_evolve_inner(
    probe: &PureState,
    params: &LossParams,
    derivative_element: Option<usize>,
) -> Result<(PurifiedOutput, Option<BTreeMap<Vec<usize>, Array1<C64>>>)> {
    check_elements(probe.layout(), params)?;
    let norm = probe.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized(norm));
    }
    let layout = probe.layout().clone();
    let p = params.parametrization();
    let signal_modes: Vec<(usize, usize)> = (0..layout.mode_count())
        .filter_map(|m| match layout.mode(m).role {
            ModeRole::Signal { element } => Some((m, element)),
            ModeRole::Ancilla => None,
        })
        .collect();
    let n_sig = signal_modes.len();
    // Amplitude tables per signal mode.
    let tabs: Vec<Vec<Vec<f64>>> = signal_modes
        .iter()
        .map(|&(m, e)| amplitude_table(layout.mode(m).cutoff, params.values()[e], p, false))
        .collect();
    let dtabs: Vec<Vec<Vec<f64>>> = signal_modes
        .iter()
        .map(|&(m, e)| amplitude_table(layout.mode(m).cutoff, params.values()[e], p, true))
        .collect();
    let dim = layout.dim();
    let mut components: BTreeMap<Vec<usize>, Array1<C64>> = BTreeMap::new();
    let mut dcomponents: BTreeMap<Vec<usize>, Array1<C64>> = BTreeMap::new();
    let mut occ = vec![0usize; layout.mode_count()];
    let mut pattern = vec![0usize; n_sig];
    for (idx, amp) in probe.amplitudes().iter().enumerate() {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        layout.write_occupations(idx, &mut occ);
        // Odometer over l <= n componentwise.
        pattern.iter_mut().for_each(|x| *x = 0);
        loop {
            let mut coef = 1.0f64;
            let mut target = idx;
            for (pos, &(m, _)) in signal_modes.iter().enumerate() {
                let n = occ[m];
                let l = pattern[pos];
                coef *= tabs[pos][n][l];
                target -= l * layout.strides()[m];
            }
            if coef != 0.0 || derivative_element.is_some() {
                let entry = components
                    .entry(pattern.clone())
                    .or_insert_with(|| Array1::zeros(dim));
                entry[target] += amp * coef;
                if let Some(k) = derivative_element {
                    // Product rule over this element's modes.
                    let mut dcoef = 0.0f64;
                    for (pos, &(m, e)) in signal_modes.iter().enumerate() {
                        if e != k {
                            continue;
                        }
                        let n = occ[m];
                        let l = pattern[pos];
                        let mut term = dtabs[pos][n][l];
                        if term == 0.0 {
                            continue;
                        }
                        for (pos2, &(m2, _)) in signal_modes.iter().enumerate() {
                            if pos2 == pos {
                                continue;
                            }
                            term *= tabs[pos2][occ[m2]][pattern[pos2]];
                        }
                        dcoef += term;
                    }
                    let dentry = dcomponents
                        .entry(pattern.clone())
                        .or_insert_with(|| Array1::zeros(dim));
                    dentry[target] += amp * dcoef;
                }
            }
            // Advance the odometer; stop after the all-max pattern.
            let mut advanced = false;
            let mut pos = n_sig;
            while pos > 0 {
                pos -= 1;
                let (m, _) = signal_modes[pos];
                if pattern[pos] < occ[m] {
                    pattern[pos] += 1;
                    advanced = true;
                    break;
                }
                pattern[pos] = 0; // carry
            }
            if !advanced {
                break;
            }
        }
    }
    // Threshold tiny components.
    let mut dropped = 0.0;
    let keys: Vec<Vec<usize>> = components.keys().cloned().collect();
    for key in keys {
        let n2: f64 = components[&key].iter().map(|c| c.norm_sqr()).sum();
        let dn2: f64 = dcomponents
            .get(&key)
            .map(|v| v.iter().map(|c| c.norm_sqr()).sum())
            .unwrap_or(0.0);
        if n2 <= DEFAULT_COMPONENT_TOL && dn2 == 0.0 {
            dropped += n2;
            components.remove(&key);
            dcomponents.remove(&key);
        }
    }
    let out = PurifiedOutput {
        layout,
        components,
        dropped_mass: dropped,
    };
    let d = derivative_element.map(|_| dcomponents);
    Ok((out, d))
}
