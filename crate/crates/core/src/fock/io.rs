//! State serialization: a bit-exact little-endian binary format and a
//! JSON form.
//!
//! Binary layout: magic `QLS1`, mode count (u32), then per mode a cutoff
//! (u32) and role tag (i64: -1 ancilla, else element index), then the
//! tail-mass f64, then `dim` amplitude pairs (re, im) as f64 bits. All
//! integers and floats little-endian. Amplitude order follows the
//! layout's lexicographic basis ordering.

use std::io::{Read, Write};

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::layout::{Mode, ModeLayout, ModeRole};
use crate::fock::state::PureState;

const MAGIC: &[u8; 4] = b"QLS1";

pub fn write_binary<W: Write>(state: &PureState, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    let modes = state.layout().modes();
    w.write_all(&(modes.len() as u32).to_le_bytes())?;
    for m in modes {
        w.write_all(&(m.cutoff as u32).to_le_bytes())?;
        let tag: i64 = match m.role {
            ModeRole::Ancilla => -1,
            ModeRole::Signal { element } => element as i64,
        };
        w.write_all(&tag.to_le_bytes())?;
    }
    w.write_all(&state.tail_mass().to_le_bytes())?;
    for amp in state.amplitudes() {
        w.write_all(&amp.re.to_le_bytes())?;
        w.write_all(&amp.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<PureState> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let count = u32::from_le_bytes(b4) as usize;
    if count == 0 || count > 64 {
        return Err(Error::Format(format!("implausible mode count {count}")));
    }
    let mut modes = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b4)?;
        let cutoff = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let tag = i64::from_le_bytes(b8);
        let role = if tag < 0 {
            ModeRole::Ancilla
        } else {
            ModeRole::Signal {
                element: tag as usize,
            }
        };
        modes.push(Mode { cutoff, role });
    }
    let layout = ModeLayout::new(modes)?;
    r.read_exact(&mut b8)?;
    let tail = f64::from_le_bytes(b8);
    let dim = layout.dim();
    let mut amps = Array1::zeros(dim);
    for i in 0..dim {
        r.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let im = f64::from_le_bytes(b8);
        amps[i] = C64::new(re, im);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after amplitudes".into()));
    }
    let mut s = PureState::from_parts(layout, amps, tail);
    s.set_tail_mass(tail);
    let norm = s.norm();
    if !(0.9 ..=1.1).contains(&norm) {
        return Err(Error::NotNormalized(norm));
    }
    Ok(s)
}

/// JSON counterpart: layout header plus `[re, im]` amplitude pairs.
#[derive(Serialize, Deserialize)]
pub struct StateJson {
    pub modes: Vec<ModeJson>,
    pub tail_mass: f64,
    pub amplitudes: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
pub struct ModeJson {
    pub cutoff: usize,
    /// `"ancilla"` or a loss-element index rendered as a string.
    pub role: String,
}

pub fn to_json(state: &PureState) -> StateJson {
    StateJson {
        modes: state
            .layout()
            .modes()
            .iter()
            .map(|m| ModeJson {
                cutoff: m.cutoff,
                role: match m.role {
                    ModeRole::Ancilla => "ancilla".to_string(),
                    ModeRole::Signal { element } => element.to_string(),
                },
            })
            .collect(),
        tail_mass: state.tail_mass(),
        amplitudes: state.amplitudes().iter().map(|c| [c.re, c.im]).collect(),
    }
}

pub fn from_json(json: &StateJson) -> Result<PureState> {
    let mut modes = Vec::with_capacity(json.modes.len());
    for m in &json.modes {
        let role = if m.role == "ancilla" {
            ModeRole::Ancilla
        } else {
            let element: usize = m
                .role
                .parse()
                .map_err(|_| Error::Format(format!("bad role tag {:?}", m.role)))?;
            ModeRole::Signal { element }
        };
        modes.push(Mode {
            cutoff: m.cutoff,
            role,
        });
    }
    let layout = ModeLayout::new(modes)?;
    if json.amplitudes.len() != layout.dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.dim(),
            got: json.amplitudes.len(),
        });
    }
    let amps = Array1::from(
        json.amplitudes
            .iter()
            .map(|[re, im]| C64::new(*re, *im))
            .collect::<Vec<_>>(),
    );
    let mut s = PureState::from_parts(layout, amps, json.tail_mass);
    s.set_tail_mass(json.tail_mass);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::probe::{build_probe, AncillaPolicy, ProbeSpec};

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let s = build_probe(&ProbeSpec::tmsv(0.8, 12), AncillaPolicy::OrthonormalMin).unwrap();
        let mut buf = Vec::new();
        write_binary(&s, &mut buf).unwrap();
        let back = read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.layout(), s.layout());
        assert_eq!(back.tail_mass().to_bits(), s.tail_mass().to_bits());
        for (a, b) in s.amplitudes().iter().zip(back.amplitudes().iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        // Second write is byte-identical.
        let mut buf2 = Vec::new();
        write_binary(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn json_round_trip_preserves_layout() {
        let s = build_probe(&ProbeSpec::single_photon(1.5), AncillaPolicy::OrthonormalMin)
            .unwrap();
        let j = to_json(&s);
        let text = serde_json::to_string(&j).unwrap();
        let parsed: StateJson = serde_json::from_str(&text).unwrap();
        let back = from_json(&parsed).unwrap();
        assert_eq!(back.layout(), s.layout());
        for (a, b) in s.amplitudes().iter().zip(back.amplitudes().iter()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"NOPE".to_vec();
        assert!(read_binary(buf.as_slice()).is_err());
    }
}
