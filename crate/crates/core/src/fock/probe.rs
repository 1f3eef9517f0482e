//! Declarative probe specifications and the builders realizing them.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::layout::ModeLayout;
use crate::fock::state::{PureState, DEFAULT_TRUNC_TOL};

/// Families of signal-ancilla probes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Number-diagonal signal state with an explicit photon-number
    /// distribution and one orthonormal ancilla vector per support point.
    GenericNds,
    /// Two-mode squeezed vacuum; `modes_per_element` > 1 yields that many
    /// copies, each carrying an equal share of the element energy.
    Tmsv,
    /// Product of coherent states, no ancilla.
    Coherent,
    /// Single-photon/linear-optics probe: floor(N) modes carrying one
    /// photon each plus one mode sharing a photon with the ancilla.
    SinglePhoton,
    /// Two-point probe saturating the energy-constrained Bures distance:
    /// photons floor(N)/ceil(N) in the first signal mode, tagged by
    /// orthogonal ancilla states.
    EcbOptimal,
    /// Explicit distribution, ancilla policy chosen by the caller.
    Custom,
}

/// How ancillas are attached to distribution-driven probes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AncillaPolicy {
    /// One orthonormal ancilla basis vector per distinct signal pattern
    /// (minimal ancilla; the signal reduced state is number-diagonal).
    OrthonormalMin,
    /// No ancilla: bare superposition of signal number states.
    None,
}

/// Photon-number distribution of a probe element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// `p[n]` over the total photon number; photons are placed in the
    /// element's first signal mode.
    Total(Vec<f64>),
    /// Explicit per-mode occupation patterns with probabilities.
    Patterns(Vec<(Vec<usize>, f64)>),
}

impl Distribution {
    /// `(pattern, probability)` pairs with positive probability.
    fn support(&self, modes: usize) -> Result<Vec<(Vec<usize>, f64)>> {
        let mut out = Vec::new();
        match self {
            Distribution::Total(p) => {
                for (n, &pn) in p.iter().enumerate() {
                    if pn < 0.0 {
                        return Err(Error::InvalidProbe(format!("negative probability p[{n}]")));
                    }
                    if pn > 0.0 {
                        let mut pat = vec![0usize; modes];
                        pat[0] = n;
                        out.push((pat, pn));
                    }
                }
            }
            Distribution::Patterns(pairs) => {
                for (pat, pn) in pairs {
                    if *pn < 0.0 {
                        return Err(Error::InvalidProbe("negative pattern probability".into()));
                    }
                    if pat.len() != modes {
                        return Err(Error::InvalidProbe(format!(
                            "pattern length {} does not match {} signal modes",
                            pat.len(),
                            modes
                        )));
                    }
                    if *pn > 0.0 {
                        out.push((pat.clone(), *pn));
                    }
                }
                let mut seen = out.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>();
                seen.sort();
                seen.dedup();
                if seen.len() != out.len() {
                    return Err(Error::InvalidProbe("duplicate pattern in distribution".into()));
                }
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidProbe("distribution has empty support".into()));
        }
        Ok(out)
    }

    /// Total mass and mean photon number.
    pub fn mass_and_mean(&self) -> (f64, f64) {
        match self {
            Distribution::Total(p) => {
                let mass: f64 = p.iter().sum();
                let mean: f64 = p.iter().enumerate().map(|(n, &x)| n as f64 * x).sum();
                (mass, mean)
            }
            Distribution::Patterns(pairs) => {
                let mass: f64 = pairs.iter().map(|(_, x)| x).sum();
                let mean: f64 = pairs
                    .iter()
                    .map(|(pat, x)| pat.iter().sum::<usize>() as f64 * x)
                    .sum();
                (mass, mean)
            }
        }
    }
}

/// Declarative description of a signal-ancilla probe. Vectors are
/// indexed by loss element `k`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub kind: ProbeKind,
    /// Target signal energy per element.
    pub energies: Vec<f64>,
    /// Signal modes per element (defaulted per kind when possible).
    #[serde(default)]
    pub modes_per_element: Vec<usize>,
    /// Signal-mode photon cutoff; required for `Tmsv` and `Coherent`,
    /// derived from the support otherwise.
    #[serde(default)]
    pub cutoff: Option<usize>,
    /// Photon-number distribution per element for `GenericNds`/`Custom`.
    #[serde(default)]
    pub distributions: Vec<Distribution>,
    /// Tolerated truncation tail mass.
    #[serde(default = "default_trunc_tol")]
    pub trunc_tol: f64,
}

fn default_trunc_tol() -> f64 {
    DEFAULT_TRUNC_TOL
}

impl ProbeSpec {
    /// Single-element convenience constructors.
    pub fn tmsv(energy: f64, cutoff: usize) -> Self {
        Self {
            kind: ProbeKind::Tmsv,
            energies: vec![energy],
            modes_per_element: vec![1],
            cutoff: Some(cutoff),
            distributions: vec![],
            trunc_tol: DEFAULT_TRUNC_TOL,
        }
    }

    pub fn coherent(energy: f64, cutoff: usize) -> Self {
        Self {
            kind: ProbeKind::Coherent,
            energies: vec![energy],
            modes_per_element: vec![1],
            cutoff: Some(cutoff),
            distributions: vec![],
            trunc_tol: DEFAULT_TRUNC_TOL,
        }
    }

    pub fn single_photon(energy: f64) -> Self {
        Self {
            kind: ProbeKind::SinglePhoton,
            energies: vec![energy],
            modes_per_element: vec![],
            cutoff: None,
            distributions: vec![],
            trunc_tol: DEFAULT_TRUNC_TOL,
        }
    }

    pub fn ecb_optimal(energy: f64, modes: usize) -> Self {
        Self {
            kind: ProbeKind::EcbOptimal,
            energies: vec![energy],
            modes_per_element: vec![modes],
            cutoff: None,
            distributions: vec![],
            trunc_tol: DEFAULT_TRUNC_TOL,
        }
    }

    pub fn nds_distribution(p: Vec<f64>) -> Self {
        let mean: f64 = p.iter().enumerate().map(|(n, &x)| n as f64 * x).sum();
        Self {
            kind: ProbeKind::GenericNds,
            energies: vec![mean],
            modes_per_element: vec![1],
            cutoff: None,
            distributions: vec![Distribution::Total(p)],
            trunc_tol: DEFAULT_TRUNC_TOL,
        }
    }

    pub fn element_count(&self) -> usize {
        self.energies.len()
    }

    /// Validate counts, energies, and distribution moments.
    pub fn validate(&self) -> Result<()> {
        if self.energies.is_empty() {
            return Err(Error::InvalidProbe("at least one element required".into()));
        }
        for (k, &n) in self.energies.iter().enumerate() {
            if !(n >= 0.0) || !n.is_finite() {
                return Err(Error::InvalidProbe(format!(
                    "element {k} energy must be finite and nonnegative"
                )));
            }
        }
        if !self.modes_per_element.is_empty()
            && self.modes_per_element.len() != self.energies.len()
        {
            return Err(Error::InvalidProbe(
                "modes_per_element length must match energies".into(),
            ));
        }
        for &m in &self.modes_per_element {
            if m == 0 {
                return Err(Error::InvalidProbe("each element needs at least one mode".into()));
            }
        }
        match self.kind {
            ProbeKind::GenericNds | ProbeKind::Custom => {
                if self.distributions.len() != self.energies.len() {
                    return Err(Error::InvalidProbe(
                        "one distribution per element is required for this kind".into(),
                    ));
                }
                for (k, d) in self.distributions.iter().enumerate() {
                    let (mass, mean) = d.mass_and_mean();
                    if mass > 1.0 + 1e-12 {
                        return Err(Error::InvalidProbe(format!(
                            "element {k} distribution mass {mass} exceeds 1"
                        )));
                    }
                    if 1.0 - mass > self.trunc_tol {
                        return Err(Error::TruncationExceeded {
                            mass: 1.0 - mass,
                            tol: self.trunc_tol,
                        });
                    }
                    if (mean - self.energies[k]).abs() > 1e-9 {
                        return Err(Error::InvalidProbe(format!(
                            "element {k} distribution mean {mean} does not match energy {}",
                            self.energies[k]
                        )));
                    }
                }
            }
            ProbeKind::Tmsv | ProbeKind::Coherent => {
                if self.cutoff.is_none() {
                    return Err(Error::InvalidProbe(
                        "an explicit cutoff is required for this kind".into(),
                    ));
                }
            }
            ProbeKind::SinglePhoton | ProbeKind::EcbOptimal => {}
        }
        Ok(())
    }

    fn modes_for(&self, k: usize) -> usize {
        self.modes_per_element.get(k).copied().unwrap_or(1)
    }
}

/// Build the probe state described by `spec`.
///
/// Multi-element probes are products of independent single-element
/// probes, with modes arranged in the canonical order (all ancillas
/// first, then signal modes grouped by element).
pub fn build_probe(spec: &ProbeSpec, policy: AncillaPolicy) -> Result<PureState> {
    spec.validate()?;
    let mut factors = Vec::new();
    for k in 0..spec.element_count() {
        factors.push(build_element(spec, k, policy)?);
    }
    let mut iter = factors.into_iter();
    let mut state = iter.next().expect("at least one element");
    for f in iter {
        state = state.tensor(&f)?;
    }
    Ok(state)
}

fn build_element(spec: &ProbeSpec, k: usize, policy: AncillaPolicy) -> Result<PureState> {
    let energy = spec.energies[k];
    match spec.kind {
        ProbeKind::GenericNds => {
            let dist = &spec.distributions[k];
            build_nds(dist, spec.modes_for(k), spec.cutoff, AncillaPolicy::OrthonormalMin)
        }
        ProbeKind::Custom => {
            let dist = &spec.distributions[k];
            build_nds(dist, spec.modes_for(k), spec.cutoff, policy)
        }
        ProbeKind::Tmsv => {
            let cutoff = spec.cutoff.expect("validated");
            let copies = spec.modes_for(k);
            let per_copy = energy / copies as f64;
            let mut state: Option<PureState> = None;
            for _ in 0..copies {
                let copy = build_tmsv(per_copy, cutoff, spec.trunc_tol)?;
                state = Some(match state {
                    None => copy,
                    Some(s) => s.tensor(&copy)?,
                });
            }
            // Copies belong to the same loss element: collapse the
            // element tags produced by `tensor`.
            let merged = state.expect("at least one copy");
            merge_elements(merged)
        }
        ProbeKind::Coherent => {
            let cutoff = spec.cutoff.expect("validated");
            build_coherent(energy, spec.modes_for(k), cutoff, spec.trunc_tol)
        }
        ProbeKind::SinglePhoton => build_single_photon(energy),
        ProbeKind::EcbOptimal => build_ecb_optimal(energy, spec.modes_for(k), spec.cutoff),
    }
}

/// Re-tag every signal mode to element 0 (single-element multi-copy
/// probes).
fn merge_elements(state: PureState) -> Result<PureState> {
    use crate::fock::layout::{Mode, ModeRole};
    let modes: Vec<Mode> = state
        .layout()
        .modes()
        .iter()
        .map(|m| Mode {
            cutoff: m.cutoff,
            role: match m.role {
                ModeRole::Ancilla => ModeRole::Ancilla,
                ModeRole::Signal { .. } => ModeRole::Signal { element: 0 },
            },
        })
        .collect();
    let layout = ModeLayout::new(modes)?;
    let mut out = PureState::from_parts(layout, state.amplitudes().clone(), state.tail_mass());
    out.set_tail_mass(state.tail_mass());
    Ok(out)
}

/// Number-diagonal signal probe from an explicit distribution.
fn build_nds(
    dist: &Distribution,
    modes: usize,
    cutoff: Option<usize>,
    policy: AncillaPolicy,
) -> Result<PureState> {
    let support = dist.support(modes)?;
    let needed = support
        .iter()
        .map(|(pat, _)| pat.iter().copied().max().unwrap_or(0))
        .max()
        .unwrap_or(0);
    let cut = match cutoff {
        Some(c) => {
            if c < needed {
                return Err(Error::CutoffTooSmall {
                    reason: format!("distribution support reaches photon number {needed}"),
                    required: needed,
                });
            }
            c
        }
        None => needed,
    };
    let signal_cutoffs = vec![cut; modes];
    let mass: f64 = support.iter().map(|(_, p)| p).sum();
    match policy {
        AncillaPolicy::OrthonormalMin if support.len() > 1 => {
            // One ancilla mode whose Fock states label the support points.
            let layout = ModeLayout::single_element(&[support.len() - 1], &signal_cutoffs)?;
            let mut amps = Array1::zeros(layout.dim());
            for (i, (pat, p)) in support.iter().enumerate() {
                let mut occ = vec![0usize; 1 + modes];
                occ[0] = i;
                occ[1..].copy_from_slice(pat);
                let idx = layout.index_of(&occ)?;
                amps[idx] = C64::new((p / mass).sqrt(), 0.0);
            }
            let mut s = PureState::from_parts(layout, amps, 0.0);
            s.set_tail_mass(1.0 - mass);
            Ok(s)
        }
        _ => {
            // Single support point, or explicit bare superposition.
            let layout = ModeLayout::single_element(&[], &signal_cutoffs)?;
            let mut amps = Array1::zeros(layout.dim());
            for (pat, p) in &support {
                let idx = layout.index_of(pat)?;
                amps[idx] = C64::new((p / mass).sqrt(), 0.0);
            }
            let mut s = PureState::from_parts(layout, amps, 0.0);
            s.set_tail_mass(1.0 - mass);
            Ok(s)
        }
    }
}

/// Geometric distribution `lambda^n (1-lambda)/(1-lambda^(C+1))` on
/// `0..=C` whose mean can be tuned through `lambda`.
fn truncated_geometric(lambda: f64, cutoff: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(cutoff + 1);
    let mut x = 1.0;
    let mut mass = 0.0;
    for _ in 0..=cutoff {
        p.push(x);
        mass += x;
        x *= lambda;
    }
    for v in &mut p {
        *v /= mass;
    }
    p
}

fn geometric_mean(lambda: f64, cutoff: usize) -> f64 {
    let p = truncated_geometric(lambda, cutoff);
    p.iter().enumerate().map(|(n, &x)| n as f64 * x).sum()
}

/// Two-mode squeezed vacuum with the stated signal energy at the stated
/// cutoff. The squeezing parameter is adjusted so the truncated state
/// has mean photon number exactly `energy`; the ideal (untruncated)
/// geometric tail beyond the cutoff is reported as the tail mass.
fn build_tmsv(energy: f64, cutoff: usize, trunc_tol: f64) -> Result<PureState> {
    if energy < 0.0 {
        return Err(Error::InvalidProbe("negative energy".into()));
    }
    if energy == 0.0 {
        let layout = ModeLayout::single_element(&[cutoff], &[cutoff])?;
        return Ok(PureState::vacuum(layout));
    }
    let needed = energy.ceil() as usize;
    if cutoff < needed {
        return Err(Error::CutoffTooSmall {
            reason: format!("energy {energy} not reachable"),
            required: needed,
        });
    }
    // Truncated mean is increasing in lambda, from 0 toward cutoff/2.
    let max_mean = geometric_mean(1.0 - 1e-12, cutoff);
    if energy > max_mean - 1e-9 {
        return Err(Error::CutoffTooSmall {
            reason: format!(
                "energy {energy} exceeds the maximum mean {max_mean:.6} at cutoff {cutoff}"
            ),
            required: (2.2 * energy).ceil() as usize + 2,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if geometric_mean(mid, cutoff) < energy {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let achieved = geometric_mean(lambda, cutoff);
    if (achieved - energy).abs() > 1e-9 {
        return Err(Error::Numerical(format!(
            "TMSV energy calibration stalled at {achieved} for target {energy}"
        )));
    }
    // Ideal geometric tail beyond the cutoff.
    let lambda_ideal = energy / (1.0 + energy);
    let tail = lambda_ideal.powi(cutoff as i32 + 1);
    if tail > trunc_tol.max(1e-3) {
        return Err(Error::TruncationExceeded {
            mass: tail,
            tol: trunc_tol.max(1e-3),
        });
    }
    let p = truncated_geometric(lambda, cutoff);
    let layout = ModeLayout::single_element(&[cutoff], &[cutoff])?;
    let mut amps = Array1::zeros(layout.dim());
    for (n, &pn) in p.iter().enumerate() {
        let idx = layout.index_of(&[n, n])?;
        amps[idx] = C64::new(pn.sqrt(), 0.0);
    }
    let mut s = PureState::from_parts(layout, amps, 0.0);
    s.set_tail_mass(tail);
    Ok(s)
}

/// Product of coherent states `|alpha>` with `alpha = sqrt(N/M)` per
/// mode, truncated and renormalized.
fn build_coherent(energy: f64, modes: usize, cutoff: usize, trunc_tol: f64) -> Result<PureState> {
    let per_mode = energy / modes as f64;
    let alpha = per_mode.sqrt();
    // Single-mode truncated coherent amplitudes.
    let mut c = Vec::with_capacity(cutoff + 1);
    let mut amp = (-per_mode / 2.0).exp();
    for n in 0..=cutoff {
        c.push(amp);
        amp *= alpha / ((n + 1) as f64).sqrt();
    }
    let mass: f64 = c.iter().map(|x| x * x).sum();
    let tail = 1.0 - mass;
    if tail > trunc_tol {
        return Err(Error::TruncationExceeded {
            mass: tail,
            tol: trunc_tol,
        });
    }
    let norm = mass.sqrt();
    let layout = ModeLayout::single_element(&[], &vec![cutoff; modes])?;
    let mut amps = Array1::zeros(layout.dim());
    let mut occ = vec![0usize; modes];
    for idx in 0..layout.dim() {
        layout.write_occupations(idx, &mut occ);
        let mut a = 1.0;
        for &n in &occ {
            a *= c[n] / norm;
        }
        amps[idx] = C64::new(a, 0.0);
    }
    let mut s = PureState::from_parts(layout, amps, 0.0);
    s.set_tail_mass(tail * modes as f64);
    Ok(s)
}

/// Single-photon/linear-optics probe with ceil(N) signal modes.
fn build_single_photon(energy: f64) -> Result<PureState> {
    if energy < 0.0 {
        return Err(Error::InvalidProbe("negative energy".into()));
    }
    let whole = energy.floor() as usize;
    let frac = energy - whole as f64;
    if frac == 0.0 {
        // Integer energy: one photon in each of N signal modes, ancilla
        // held in |1>.
        let m = whole.max(1);
        let layout = ModeLayout::single_element(&[1], &vec![1; m])?;
        let mut occ = vec![1usize; m + 1];
        if whole == 0 {
            occ[1] = 0; // vacuum signal for N = 0
        }
        PureState::basis_state(layout, &occ)
    } else {
        let m = whole + 1;
        let layout = ModeLayout::single_element(&[1], &vec![1; m])?;
        let mut amps = Array1::zeros(layout.dim());
        // sqrt(1-frac) |1>_A |1..1, 0> + sqrt(frac) |0>_A |1..1, 1>
        let mut occ = vec![1usize; m + 1];
        occ[m] = 0;
        amps[layout.index_of(&occ)?] = C64::new((1.0 - frac).sqrt(), 0.0);
        occ[0] = 0;
        occ[m] = 1;
        amps[layout.index_of(&occ)?] = C64::new(frac.sqrt(), 0.0);
        Ok(PureState::from_parts(layout, amps, 0.0))
    }
}

/// Probe saturating the energy-constrained Bures distance: photons
/// floor(N)/ceil(N) in signal mode 1 (others vacuum), tagged by
/// orthogonal ancilla states.
fn build_ecb_optimal(energy: f64, modes: usize, cutoff: Option<usize>) -> Result<PureState> {
    if energy < 0.0 {
        return Err(Error::InvalidProbe("negative energy".into()));
    }
    let hi = energy.ceil() as usize;
    let lo = energy.floor() as usize;
    let frac = energy - lo as f64;
    let cut = match cutoff {
        Some(c) => {
            if c < hi {
                return Err(Error::CutoffTooSmall {
                    reason: format!("probe stores up to {hi} photons"),
                    required: hi,
                });
            }
            c
        }
        None => hi.max(1),
    };
    let signal_cutoffs = vec![cut; modes];
    if frac == 0.0 {
        let layout = ModeLayout::single_element(&[], &signal_cutoffs)?;
        let mut occ = vec![0usize; modes];
        occ[0] = lo;
        PureState::basis_state(layout, &occ)
    } else {
        let layout = ModeLayout::single_element(&[1], &signal_cutoffs)?;
        let mut amps = Array1::zeros(layout.dim());
        let mut occ = vec![0usize; 1 + modes];
        occ[0] = 0;
        occ[1] = lo;
        amps[layout.index_of(&occ)?] = C64::new((1.0 - frac).sqrt(), 0.0);
        occ[0] = 1;
        occ[1] = hi;
        amps[layout.index_of(&occ)?] = C64::new(frac.sqrt(), 0.0);
        Ok(PureState::from_parts(layout, amps, 0.0))
    }
}

/// Total-photon-number distribution of the signal side of a probe
/// (diagonal weights; exact for NDS probes).
pub fn signal_number_distribution(state: &PureState) -> Vec<f64> {
    let signal_modes = state.layout().signal_modes();
    let max_n: usize = signal_modes
        .iter()
        .map(|&m| state.layout().mode(m).cutoff)
        .sum();
    let mut p = vec![0.0; max_n + 1];
    for (idx, amp) in state.amplitudes().iter().enumerate() {
        let w = amp.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let n: usize = signal_modes
            .iter()
            .map(|&m| state.layout().occupation(idx, m))
            .sum();
        p[n] += w;
    }
    p
}
