//! Density operators and the partial trace.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::layout::ModeLayout;
use crate::fock::state::{PureState, DEFAULT_TRUNC_TOL};
use crate::linalg;

/// Hermitian matrix on a [`ModeLayout`] basis.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    layout: ModeLayout,
    mat: Array2<C64>,
}

impl DensityOperator {
    /// `|psi><psi|`.
    pub fn from_pure(state: &PureState) -> Self {
        let dim = state.dim();
        let amps = state.amplitudes();
        let mut mat = Array2::zeros((dim, dim));
        for i in 0..dim {
            let ai = amps[i];
            if ai.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..dim {
                mat[(i, j)] = ai * amps[j].conj();
            }
        }
        Self {
            layout: state.layout().clone(),
            mat,
        }
    }

    /// Wrap a matrix, checking hermiticity (1e-12 entrywise) and trace
    /// (within the truncation tolerance of 1).
    pub fn from_matrix(layout: ModeLayout, mat: Array2<C64>) -> Result<Self> {
        if mat.nrows() != layout.dim() || mat.ncols() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: mat.nrows(),
            });
        }
        let defect = linalg::hermiticity_defect(&mat);
        if defect > 1e-12 {
            return Err(Error::NotHermitian(defect));
        }
        let tr: f64 = (0..mat.nrows()).map(|i| mat[(i, i)].re).sum();
        if !(tr >= 1.0 - DEFAULT_TRUNC_TOL && tr <= 1.0 + 1e-10) {
            return Err(Error::NotNormalized(tr));
        }
        Ok(Self { layout, mat })
    }

    /// Wrap without validation (trusted internal constructions).
    pub(crate) fn from_parts(layout: ModeLayout, mat: Array2<C64>) -> Self {
        Self { layout, mat }
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    /// Mean photon number over the signal modes of one loss element.
    pub fn energy(&self, element: usize) -> f64 {
        let modes = self.layout.signal_modes_of(element);
        let mut total = 0.0;
        for i in 0..self.dim() {
            let p = self.mat[(i, i)].re;
            if p == 0.0 {
                continue;
            }
            let n: usize = modes.iter().map(|&m| self.layout.occupation(i, m)).sum();
            total += p * n as f64;
        }
        total
    }

    /// Full validation: hermiticity, trace window, and PSD via
    /// eigendecomposition (eigenvalues >= -1e-10).
    pub fn validate(&self) -> Result<()> {
        let defect = linalg::hermiticity_defect(&self.mat);
        if defect > 1e-12 {
            return Err(Error::NotHermitian(defect));
        }
        let tr = self.trace();
        if !(tr >= 1.0 - DEFAULT_TRUNC_TOL && tr <= 1.0 + 1e-10) {
            return Err(Error::NotNormalized(tr));
        }
        let (w, _) = linalg::eigh(&self.mat)?;
        let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::NotPositive(min));
        }
        Ok(())
    }

    /// Eigendecomposition, ascending.
    pub fn eigendecompose(&self) -> Result<(Array1<f64>, Array2<C64>)> {
        linalg::eigh(&self.mat)
    }

    /// Trace out the listed modes.
    pub fn partial_trace(&self, drop: &[usize]) -> Result<DensityOperator> {
        let (keep_layout, keep_index, drop_index, drop_dim) = trace_maps(&self.layout, drop)?;
        let kd = keep_layout.dim();
        let mut out = Array2::<C64>::zeros((kd, kd));
        // Group full indices by dropped sub-index for cache-friendly
        // accumulation: out[ki, kj] += rho[i, j] whenever di == dj.
        let dim = self.dim();
        let mut by_drop: Vec<Vec<(usize, usize)>> = vec![Vec::new(); drop_dim];
        for i in 0..dim {
            by_drop[drop_index[i]].push((keep_index[i], i));
        }
        for members in &by_drop {
            for &(ki, i) in members {
                for &(kj, j) in members {
                    out[(ki, kj)] += self.mat[(i, j)];
                }
            }
        }
        Ok(DensityOperator {
            layout: keep_layout,
            mat: out,
        })
    }
}

impl PureState {
    /// Reduced density operator after tracing out the listed modes.
    /// Exploits `rho = A A^dag` with `A` the keep-by-drop reshape.
    pub fn partial_trace(&self, drop: &[usize]) -> Result<DensityOperator> {
        let (keep_layout, keep_index, drop_index, drop_dim) =
            trace_maps(self.layout(), drop)?;
        let kd = keep_layout.dim();
        let amps = self.amplitudes();
        let mut a = Array2::<C64>::zeros((kd, drop_dim));
        for (i, amp) in amps.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            a[(keep_index[i], drop_index[i])] = *amp;
        }
        let adag = a.t().mapv(|c| c.conj());
        let mat = a.dot(&adag);
        Ok(DensityOperator {
            layout: keep_layout,
            mat,
        })
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator::from_pure(self)
    }
}

/// Index maps for tracing: for every full basis index, its index within
/// the kept sub-basis and within the dropped sub-basis.
fn trace_maps(
    layout: &ModeLayout,
    drop: &[usize],
) -> Result<(ModeLayout, Vec<usize>, Vec<usize>, usize)> {
    let n = layout.mode_count();
    let mut is_dropped = vec![false; n];
    for &d in drop {
        if d >= n {
            return Err(Error::InvalidParam(format!("mode {d} out of range")));
        }
        if is_dropped[d] {
            return Err(Error::InvalidParam(format!("mode {d} listed twice")));
        }
        is_dropped[d] = true;
    }
    if drop.len() == n {
        return Err(Error::InvalidParam(
            "cannot trace out every mode (empty retained set)".into(),
        ));
    }
    let keep_layout = layout.drop_modes(drop)?;
    let kept: Vec<usize> = (0..n).filter(|&m| !is_dropped[m]).collect();
    let dropped: Vec<usize> = (0..n).filter(|&m| is_dropped[m]).collect();
    // Strides within each sub-basis (lexicographic, original order).
    let sub_strides = |modes: &[usize]| -> Vec<usize> {
        let mut s = vec![1usize; modes.len()];
        for i in (0..modes.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * (layout.mode(modes[i + 1]).cutoff + 1);
        }
        s
    };
    let keep_strides = sub_strides(&kept);
    let drop_strides = sub_strides(&dropped);
    let drop_dim: usize = dropped.iter().map(|&m| layout.mode(m).cutoff + 1).product();
    let dim = layout.dim();
    let mut keep_index = vec![0usize; dim];
    let mut drop_index = vec![0usize; dim];
    for idx in 0..dim {
        let mut ki = 0usize;
        for (pos, &m) in kept.iter().enumerate() {
            ki += layout.occupation(idx, m) * keep_strides[pos];
        }
        let mut di = 0usize;
        for (pos, &m) in dropped.iter().enumerate() {
            di += layout.occupation(idx, m) * drop_strides[pos];
        }
        keep_index[idx] = ki;
        drop_index[idx] = di;
    }
    Ok((keep_layout, keep_index, drop_index, drop_dim))
}
