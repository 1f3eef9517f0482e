//! Pure states on the truncated Fock space.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fock::layout::{Mode, ModeLayout, ModeRole};

/// Default tolerated norm/trace deficit from truncation.
pub const DEFAULT_TRUNC_TOL: f64 = 1e-8;

/// Dense amplitude vector over a [`ModeLayout`] basis.
#[derive(Clone, Debug)]
pub struct PureState {
    layout: ModeLayout,
    amps: Array1<C64>,
    /// Photon-number mass of the ideal (untruncated) construction that
    /// falls beyond the cutoffs; 0 for exactly representable states.
    tail_mass: f64,
}

impl PureState {
    /// Wrap amplitudes, requiring norm within `[1 - tol, 1 + 1e-12]`.
    pub fn new(layout: ModeLayout, amps: Array1<C64>) -> Result<Self> {
        Self::with_tolerance(layout, amps, DEFAULT_TRUNC_TOL)
    }

    pub fn with_tolerance(layout: ModeLayout, amps: Array1<C64>, tol: f64) -> Result<Self> {
        if amps.len() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: amps.len(),
            });
        }
        let n2: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
        let norm = n2.sqrt();
        if !(norm >= 1.0 - tol && norm <= 1.0 + 1e-12) {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self {
            layout,
            amps,
            tail_mass: 0.0,
        })
    }

    /// Construct without a norm check (internal builders that normalize
    /// explicitly).
    pub(crate) fn from_parts(layout: ModeLayout, amps: Array1<C64>, tail_mass: f64) -> Self {
        Self {
            layout,
            amps,
            tail_mass,
        }
    }

    /// The `|n_0, n_1, ...>` basis state.
    pub fn basis_state(layout: ModeLayout, occupations: &[usize]) -> Result<Self> {
        let idx = layout.index_of(occupations)?;
        let mut amps = Array1::zeros(layout.dim());
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self {
            layout,
            amps,
            tail_mass: 0.0,
        })
    }

    /// All-modes vacuum.
    pub fn vacuum(layout: ModeLayout) -> Self {
        let mut amps = Array1::zeros(layout.dim());
        amps[0] = C64::new(1.0, 0.0);
        Self {
            layout,
            amps,
            tail_mass: 0.0,
        }
    }

    /// Haar-like random state: i.i.d. complex Gaussian amplitudes,
    /// normalized.
    pub fn random<R: Rng + ?Sized>(layout: ModeLayout, rng: &mut R) -> Self {
        use rand_distr::StandardNormal;
        let dim = layout.dim();
        let mut amps = Array1::zeros(dim);
        for a in amps.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *a = C64::new(re, im);
        }
        let mut s = Self {
            layout,
            amps,
            tail_mass: 0.0,
        };
        s.normalize();
        s
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rescale to unit norm.
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amps.mapv_inplace(|c| c / n);
        }
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Mean photon number summed over the signal modes of loss element
    /// `element`.
    pub fn energy(&self, element: usize) -> f64 {
        self.energy_of_modes(&self.layout.signal_modes_of(element))
    }

    /// Mean photon number over every signal mode, per element.
    pub fn element_energies(&self) -> Vec<f64> {
        (0..self.layout.element_count())
            .map(|k| self.energy(k))
            .collect()
    }

    /// Mean photon number summed over an arbitrary set of modes.
    pub fn energy_of_modes(&self, modes: &[usize]) -> f64 {
        let mut total = 0.0;
        for (idx, amp) in self.amps.iter().enumerate() {
            let w = amp.norm_sqr();
            if w == 0.0 {
                continue;
            }
            let mut n = 0usize;
            for &m in modes {
                n += self.layout.occupation(idx, m);
            }
            total += w * n as f64;
        }
        total
    }

    /// Tensor product. The right factor's loss-element indices are
    /// shifted past the left factor's, and the combined modes are
    /// re-sorted into canonical order (ancillas first, elements
    /// ascending) by a stable permutation.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let k_left = self.layout.element_count();
        let mut modes: Vec<Mode> = self.layout.modes().to_vec();
        for m in other.layout.modes() {
            let role = match m.role {
                ModeRole::Ancilla => ModeRole::Ancilla,
                ModeRole::Signal { element } => ModeRole::Signal {
                    element: element + k_left,
                },
            };
            modes.push(Mode {
                cutoff: m.cutoff,
                role,
            });
        }
        // Raw Kronecker amplitudes over the concatenated mode list.
        let dim = self.dim() * other.dim();
        let mut amps = Array1::zeros(dim);
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let base = i * other.dim();
            for (j, b) in other.amps.iter().enumerate() {
                amps[base + j] = a * b;
            }
        }
        // Stable sort into canonical order.
        let mut order: Vec<usize> = (0..modes.len()).collect();
        order.sort_by_key(|&i| match modes[i].role {
            ModeRole::Ancilla => (0usize, 0usize, i),
            ModeRole::Signal { element } => (1, element, i),
        });
        let raw = PureState {
            layout: ModeLayout::new_unchecked(modes),
            amps,
            tail_mass: self.tail_mass + other.tail_mass,
        };
        raw.permute_modes(&order)
    }

    /// Reorder modes: `perm[i]` is the index in the current mode list of
    /// the mode placed at position `i` of the result.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<PureState> {
        let n = self.layout.mode_count();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidParam("invalid mode permutation".into()));
            }
            seen[p] = true;
        }
        let new_modes: Vec<Mode> = perm.iter().map(|&p| *self.layout.mode(p)).collect();
        let new_layout = ModeLayout::new(new_modes)?;
        let mut amps = Array1::zeros(self.dim());
        let mut occ = vec![0usize; n];
        let mut new_occ = vec![0usize; n];
        for (idx, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            self.layout.write_occupations(idx, &mut occ);
            for (i, &p) in perm.iter().enumerate() {
                new_occ[i] = occ[p];
            }
            let nidx = new_layout.index_of(&new_occ)?;
            amps[nidx] = *a;
        }
        Ok(PureState {
            layout: new_layout,
            amps,
            tail_mass: self.tail_mass,
        })
    }

    /// Apply a matrix acting on a subset of modes (in the listed order);
    /// the operator dimension must match the product of those modes'
    /// basis sizes.
    pub fn apply_on_modes(&self, modes: &[usize], op: &Array2<C64>) -> Result<PureState> {
        let sub_dim = self.layout.sub_dims(modes);
        if op.nrows() != sub_dim || op.ncols() != sub_dim {
            return Err(Error::DimensionMismatch {
                expected: sub_dim,
                got: op.nrows(),
            });
        }
        // Offset of each sub-basis index in the full index, and the list
        // of "base" indices with zero occupation on the acted modes.
        let dims: Vec<usize> = modes
            .iter()
            .map(|&m| self.layout.mode(m).cutoff + 1)
            .collect();
        let strides: Vec<usize> = modes.iter().map(|&m| self.layout.strides()[m]).collect();
        let mut offsets = vec![0usize; sub_dim];
        for s in 0..sub_dim {
            let mut rem = s;
            let mut off = 0usize;
            for (d, (&dim_m, &stride_m)) in dims.iter().zip(&strides).enumerate().rev() {
                let _ = d;
                off += (rem % dim_m) * stride_m;
                rem /= dim_m;
            }
            offsets[s] = off;
        }
        let mut amps = Array1::zeros(self.dim());
        let mut sub_in = vec![C64::new(0.0, 0.0); sub_dim];
        for base in 0..self.dim() {
            // Base indices are those with zero occupation on all acted
            // modes.
            if modes
                .iter()
                .any(|&m| self.layout.occupation(base, m) != 0)
            {
                continue;
            }
            for s in 0..sub_dim {
                sub_in[s] = self.amps[base + offsets[s]];
            }
            for (sp, row) in op.rows().into_iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (s, o) in row.iter().enumerate() {
                    acc += o * sub_in[s];
                }
                amps[base + offsets[sp]] = acc;
            }
        }
        Ok(PureState {
            layout: self.layout.clone(),
            amps,
            tail_mass: self.tail_mass,
        })
    }

    pub(crate) fn set_tail_mass(&mut self, tail: f64) {
        self.tail_mass = tail;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::layout::ModeLayout;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn basis_state_and_energy() {
        let layout = ModeLayout::single_element(&[1], &[2]).unwrap();
        let s = PureState::basis_state(layout, &[1, 2]).unwrap();
        assert_eq!(s.energy(0), 2.0);
        assert_eq!(s.energy_of_modes(&[0]), 1.0);
    }

    #[test]
    fn vacuum_has_zero_energy() {
        let layout = ModeLayout::single_element(&[], &[3]).unwrap();
        let s = PureState::vacuum(layout);
        assert_eq!(s.energy(0), 0.0);
    }

    #[test]
    fn tensor_energy_is_additive() {
        let la = ModeLayout::single_element(&[1], &[1]).unwrap();
        let lb = ModeLayout::single_element(&[], &[2]).unwrap();
        let a = PureState::basis_state(la, &[1, 1]).unwrap();
        let b = PureState::basis_state(lb, &[2]).unwrap();
        let t = a.tensor(&b).unwrap();
        assert_eq!(t.layout().element_count(), 2);
        // Exact additivity.
        assert_eq!(t.energy(0) + t.energy(1), a.energy(0) + b.energy(0));
        assert_eq!(t.energy(1), 2.0);
        // Canonical order: ancilla first.
        assert!(matches!(t.layout().mode(0).role, ModeRole::Ancilla));
    }

    #[test]
    fn tensor_superposition_amplitudes() {
        let la = ModeLayout::single_element(&[], &[1]).unwrap();
        let lb = ModeLayout::single_element(&[], &[1]).unwrap();
        let mut amps = Array1::zeros(2);
        amps[0] = c(0.6);
        amps[1] = c(0.8);
        let a = PureState::new(la, amps).unwrap();
        let b = PureState::vacuum(lb);
        let t = a.tensor(&b).unwrap();
        assert_eq!(t.dim(), 4);
        assert!((t.amplitudes()[t.layout().index_of(&[0, 0]).unwrap()] - c(0.6)).norm() < 1e-15);
        assert!((t.amplitudes()[t.layout().index_of(&[1, 0]).unwrap()] - c(0.8)).norm() < 1e-15);
    }

    #[test]
    fn permute_modes_moves_amplitudes() {
        let layout = ModeLayout::single_element(&[1], &[2]).unwrap();
        let s = PureState::basis_state(layout, &[1, 2]).unwrap();
        // Swap is not canonical (signal would precede ancilla), so permute
        // to the same order instead and check identity.
        let p = s.permute_modes(&[0, 1]).unwrap();
        assert_eq!(p.amplitudes(), s.amplitudes());
    }

    #[test]
    fn apply_on_modes_single_mode_not() {
        let layout = ModeLayout::single_element(&[1], &[1]).unwrap();
        let s = PureState::basis_state(layout, &[0, 1]).unwrap();
        // Pauli-X on the ancilla mode.
        let mut x = Array2::zeros((2, 2));
        x[(0, 1)] = c(1.0);
        x[(1, 0)] = c(1.0);
        let out = s.apply_on_modes(&[0], &x).unwrap();
        let idx = out.layout().index_of(&[1, 1]).unwrap();
        assert!((out.amplitudes()[idx] - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn norm_check_rejects_unnormalized() {
        let layout = ModeLayout::single_element(&[], &[1]).unwrap();
        let mut amps = Array1::<C64>::zeros(2);
        amps[0] = c(0.5);
        assert!(PureState::new(layout, amps).is_err());
    }
}
