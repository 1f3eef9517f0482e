//! Mode bookkeeping for the truncated multimode Fock space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role of a mode: ancilla modes are held losslessly, signal modes pass
/// through the loss element they are assigned to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeRole {
    Ancilla,
    Signal { element: usize },
}

/// One bosonic mode with an inclusive photon-number cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub cutoff: usize,
    pub role: ModeRole,
}

/// Ordered list of modes defining the truncated Hilbert space.
///
/// Basis ordering is lexicographic over the occupation numbers
/// `(n_0, n_1, ...)` with mode 0 most significant. Ancilla modes come
/// first, then signal modes grouped by loss element in ascending order;
/// the state file formats depend on this ordering.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeLayout {
    modes: Vec<Mode>,
    #[serde(skip)]
    strides: Vec<usize>,
    #[serde(skip)]
    dim: usize,
}

impl ModeLayout {
    pub fn new(modes: Vec<Mode>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::Layout("at least one mode is required".into()));
        }
        // Ancillas first, signals grouped by ascending element index.
        let mut seen_signal = false;
        let mut last_element: Option<usize> = None;
        let mut max_element: Option<usize> = None;
        for m in &modes {
            match m.role {
                ModeRole::Ancilla => {
                    if seen_signal {
                        return Err(Error::Layout(
                            "ancilla modes must precede all signal modes".into(),
                        ));
                    }
                }
                ModeRole::Signal { element } => {
                    seen_signal = true;
                    if let Some(prev) = last_element {
                        if element < prev {
                            return Err(Error::Layout(
                                "signal modes must be grouped by ascending element index".into(),
                            ));
                        }
                    }
                    last_element = Some(element);
                    max_element = Some(max_element.map_or(element, |e: usize| e.max(element)));
                }
            }
        }
        if let Some(kmax) = max_element {
            for k in 0..=kmax {
                if !modes
                    .iter()
                    .any(|m| m.role == ModeRole::Signal { element: k })
                {
                    return Err(Error::Layout(format!(
                        "loss element {k} has no signal mode (elements must be contiguous from 0)"
                    )));
                }
            }
        }
        let mut dim = 1usize;
        for m in &modes {
            dim = dim.checked_mul(m.cutoff + 1).ok_or_else(|| {
                Error::Layout("Hilbert dimension overflows usize".into())
            })?;
        }
        let strides = Self::compute_strides(&modes);
        Ok(Self { modes, strides, dim })
    }

    /// Canonical layout: ancilla cutoffs first, then per-element lists of
    /// signal cutoffs.
    pub fn with_roles(ancilla_cutoffs: &[usize], signal_cutoffs: &[Vec<usize>]) -> Result<Self> {
        let mut modes = Vec::new();
        for &c in ancilla_cutoffs {
            modes.push(Mode {
                cutoff: c,
                role: ModeRole::Ancilla,
            });
        }
        for (k, cuts) in signal_cutoffs.iter().enumerate() {
            for &c in cuts {
                modes.push(Mode {
                    cutoff: c,
                    role: ModeRole::Signal { element: k },
                });
            }
        }
        Self::new(modes)
    }

    /// Single-element layout with one list of signal cutoffs.
    pub fn single_element(ancilla_cutoffs: &[usize], signal_cutoffs: &[usize]) -> Result<Self> {
        Self::with_roles(ancilla_cutoffs, &[signal_cutoffs.to_vec()])
    }

    fn compute_strides(modes: &[Mode]) -> Vec<usize> {
        let n = modes.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * (modes[i + 1].cutoff + 1);
        }
        strides
    }

    /// Rebuild caches after deserialization.
    pub fn refresh(&mut self) {
        self.strides = Self::compute_strides(&self.modes);
        self.dim = self.modes.iter().map(|m| m.cutoff + 1).product();
    }

    /// Build without the canonical-order validation; used only for
    /// short-lived tensor intermediates that are immediately permuted
    /// back into canonical order.
    pub(crate) fn new_unchecked(modes: Vec<Mode>) -> Self {
        let strides = Self::compute_strides(&modes);
        let dim = modes.iter().map(|m| m.cutoff + 1).product();
        Self { modes, strides, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> &Mode {
        &self.modes[i]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Number of loss elements K (0 if the layout is ancilla-only).
    pub fn element_count(&self) -> usize {
        self.modes
            .iter()
            .filter_map(|m| match m.role {
                ModeRole::Signal { element } => Some(element + 1),
                ModeRole::Ancilla => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn ancilla_modes(&self) -> Vec<usize> {
        (0..self.modes.len())
            .filter(|&i| self.modes[i].role == ModeRole::Ancilla)
            .collect()
    }

    pub fn signal_modes(&self) -> Vec<usize> {
        (0..self.modes.len())
            .filter(|&i| matches!(self.modes[i].role, ModeRole::Signal { .. }))
            .collect()
    }

    pub fn signal_modes_of(&self, element: usize) -> Vec<usize> {
        (0..self.modes.len())
            .filter(|&i| self.modes[i].role == ModeRole::Signal { element })
            .collect()
    }

    /// Basis index of an occupation pattern.
    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.modes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.modes.len(),
                got: occupations.len(),
            });
        }
        let mut idx = 0usize;
        for (m, (&occ, mode)) in occupations.iter().zip(&self.modes).enumerate() {
            if occ > mode.cutoff {
                return Err(Error::InvalidParam(format!(
                    "occupation {occ} exceeds cutoff {} on mode {m}",
                    mode.cutoff
                )));
            }
            idx += occ * self.strides[m];
        }
        Ok(idx)
    }

    /// Occupation pattern of a basis index.
    pub fn occupations_of(&self, index: usize) -> Vec<usize> {
        let mut occ = vec![0usize; self.modes.len()];
        self.write_occupations(index, &mut occ);
        occ
    }

    /// Decode a basis index into a caller-provided buffer.
    pub fn write_occupations(&self, index: usize, occ: &mut [usize]) {
        for (m, mode) in self.modes.iter().enumerate() {
            occ[m] = (index / self.strides[m]) % (mode.cutoff + 1);
        }
    }

    /// Occupation of a single mode at a basis index.
    #[inline]
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % (self.modes[mode].cutoff + 1)
    }

    /// Layout left after dropping the listed modes (order preserved).
    /// Surviving loss-element indices are re-numbered compactly from 0.
    pub fn drop_modes(&self, drop: &[usize]) -> Result<ModeLayout> {
        for &d in drop {
            if d >= self.modes.len() {
                return Err(Error::InvalidParam(format!("mode {d} out of range")));
            }
        }
        let mut kept: Vec<Mode> = (0..self.modes.len())
            .filter(|i| !drop.contains(i))
            .map(|i| self.modes[i])
            .collect();
        if kept.is_empty() {
            return Err(Error::Layout("cannot drop every mode".into()));
        }
        let mut surviving: Vec<usize> = kept
            .iter()
            .filter_map(|m| match m.role {
                ModeRole::Signal { element } => Some(element),
                ModeRole::Ancilla => None,
            })
            .collect();
        surviving.sort_unstable();
        surviving.dedup();
        for m in &mut kept {
            if let ModeRole::Signal { element } = m.role {
                let new = surviving.binary_search(&element).expect("element present");
                m.role = ModeRole::Signal { element: new };
            }
        }
        ModeLayout::new(kept)
    }

    /// Sub-layout consisting of the listed modes, in the listed order.
    /// Role-ordering constraints are not enforced here; the result is
    /// only used for reshape bookkeeping.
    pub(crate) fn sub_dims(&self, modes: &[usize]) -> usize {
        modes.iter().map(|&m| self.modes[m].cutoff + 1).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let layout = ModeLayout::single_element(&[1], &[2, 1]).unwrap();
        assert_eq!(layout.dim(), 2 * 3 * 2);
        for idx in 0..layout.dim() {
            let occ = layout.occupations_of(idx);
            assert_eq!(layout.index_of(&occ).unwrap(), idx);
        }
        // Lexicographic with mode 0 most significant.
        assert_eq!(layout.index_of(&[1, 0, 0]).unwrap(), 6);
        assert_eq!(layout.index_of(&[0, 1, 0]).unwrap(), 2);
        assert_eq!(layout.index_of(&[0, 0, 1]).unwrap(), 1);
    }

    #[test]
    fn rejects_signal_before_ancilla() {
        let res = ModeLayout::new(vec![
            Mode {
                cutoff: 1,
                role: ModeRole::Signal { element: 0 },
            },
            Mode {
                cutoff: 1,
                role: ModeRole::Ancilla,
            },
        ]);
        assert!(res.is_err());
    }

    #[test]
    fn rejects_gap_in_elements() {
        // Element 0 absent while element 1 is present.
        let res = ModeLayout::new(vec![Mode {
            cutoff: 1,
            role: ModeRole::Signal { element: 1 },
        }]);
        assert!(res.is_err());
    }

    #[test]
    fn element_queries() {
        let layout = ModeLayout::with_roles(&[2], &[vec![1, 1], vec![3]]).unwrap();
        assert_eq!(layout.element_count(), 2);
        assert_eq!(layout.ancilla_modes(), vec![0]);
        assert_eq!(layout.signal_modes_of(0), vec![1, 2]);
        assert_eq!(layout.signal_modes_of(1), vec![3]);
    }
}
