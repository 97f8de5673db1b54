//! `ELL1` binary field container.
//!
//! Layout (little endian):
//!
//! | bytes | content                                 |
//! |-------|-----------------------------------------|
//! | 0..4  | magic `ELL1`                            |
//! | 4     | dimension `d` (u8)                      |
//! | 5     | 0 = real, 1 = complex (u8)              |
//! | 6..8  | reserved, zero (u16)                    |
//! | 8..12 | points per axis `n` (u32)               |
//! | 12..  | `n^d` samples as f64, complex as re, im |
//!
//! Samples follow the grid's node order (axis 1 fastest).

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridSpec, ScalarField};

pub const MAGIC: &[u8; 4] = b"ELL1";
const HEADER_LEN: usize = 12;

/// A field read back from a container.
#[derive(Clone, Debug, PartialEq)]
pub enum StoredField {
    Real(ScalarField),
    Complex(ComplexField),
}

fn header(grid: GridSpec, complex: bool) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..4].copy_from_slice(MAGIC);
    h[4] = grid.dim() as u8;
    h[5] = complex as u8;
    h[8..12].copy_from_slice(&(grid.n() as u32).to_le_bytes());
    h
}

pub fn encode_real(field: &ScalarField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * field.values().len());
    out.extend_from_slice(&header(field.grid(), false));
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_complex(field: &ComplexField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * field.values().len());
    out.extend_from_slice(&header(field.grid(), true));
    for v in field.values() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<StoredField> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing ELL1 magic".into()));
    }
    let dim = bytes[4] as usize;
    let flag = bytes[5];
    if bytes[6] != 0 || bytes[7] != 0 {
        return Err(Error::Format("reserved header bytes are not zero".into()));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let grid = GridSpec::new(dim, n)?;
    let payload = &bytes[HEADER_LEN..];
    let mut floats = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    match flag {
        0 => {
            if payload.len() != 8 * grid.len() {
                return Err(Error::Format("payload length does not match header".into()));
            }
            Ok(StoredField::Real(ScalarField::new(grid, floats.collect())?))
        }
        1 => {
            if payload.len() != 16 * grid.len() {
                return Err(Error::Format("payload length does not match header".into()));
            }
            let mut values = Vec::with_capacity(grid.len());
            while let (Some(re), Some(im)) = (floats.next(), floats.next()) {
                values.push(Complex64::new(re, im));
            }
            Ok(StoredField::Complex(ComplexField::new(grid, values)?))
        }
        other => Err(Error::Format(format!("unknown value flag {other}"))),
    }
}

pub fn write_real(path: &Path, field: &ScalarField) -> Result<()> {
    std::fs::File::create(path)?.write_all(&encode_real(field))?;
    Ok(())
}

pub fn write_complex(path: &Path, field: &ComplexField) -> Result<()> {
    std::fs::File::create(path)?.write_all(&encode_complex(field))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<StoredField> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn read_real(path: &Path) -> Result<ScalarField> {
    match read(path)? {
        StoredField::Real(f) => Ok(f),
        StoredField::Complex(_) => Err(Error::Format("expected a real field".into())),
    }
}

pub fn read_complex(path: &Path) -> Result<ComplexField> {
    match read(path)? {
        StoredField::Complex(f) => Ok(f),
        StoredField::Real(_) => Err(Error::Format("expected a complex field".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_and_complex_roundtrip() {
        let g = GridSpec::new(3, 8).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] - 2.0 * x[1] + x[2] * x[2]);
        let bytes = encode_real(&f);
        assert_eq!(&bytes[..4], b"ELL1");
        assert_eq!(bytes.len(), 12 + 8 * 512);
        assert_eq!(decode(&bytes).unwrap(), StoredField::Real(f));

        let g2 = GridSpec::new(2, 8).unwrap();
        let c = ComplexField::from_fn(g2, |x| Complex64::new(x[0], -x[1]));
        assert_eq!(decode(&encode_complex(&c)).unwrap(), StoredField::Complex(c));
    }

    #[test]
    fn node_order_is_axis_one_fastest() {
        let g = GridSpec::new(2, 8).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] * 8.0 + 100.0 * x[1] * 8.0);
        let bytes = encode_real(&f);
        let second = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
        assert_eq!(second, 1.0);
    }

    #[test]
    fn rejects_corrupt_input() {
        let g = GridSpec::new(2, 8).unwrap();
        let mut bytes = encode_real(&ScalarField::zeros(g));
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
        let mut bad_flag = encode_real(&ScalarField::zeros(g));
        bad_flag[5] = 7;
        assert!(decode(&bad_flag).is_err());
    }
}
