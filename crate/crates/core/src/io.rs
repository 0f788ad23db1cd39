//! Binary field files.
//!
//! A field file is one ASCII header line `CFORGE1 <n_axis> <box_length> <ncomp>`
//! followed by the component-major values as little-endian f64.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::IoError;
use crate::field::{OneFormField, ScalarField, SymTensorField};
use crate::grid::GridSpec;

const MAGIC: &str = "CFORGE1";

/// Fields that can be stored in a field file.
pub trait GridField: Sized {
    const COMPONENTS: usize;
    fn grid(&self) -> &GridSpec;
    fn values(&self) -> &[f64];
    fn from_parts(grid: GridSpec, data: Vec<f64>) -> Result<Self, IoError>;
}

macro_rules! impl_grid_field {
    ($name:ident) => {
        impl GridField for $name {
            const COMPONENTS: usize = $name::COMPONENTS;

            fn grid(&self) -> &GridSpec {
                $name::grid(self)
            }

            fn values(&self) -> &[f64] {
                self.as_slice()
            }

            fn from_parts(grid: GridSpec, data: Vec<f64>) -> Result<Self, IoError> {
                Ok($name::new(grid, data)?)
            }
        }
    };
}

impl_grid_field!(ScalarField);
impl_grid_field!(OneFormField);
impl_grid_field!(SymTensorField);

pub fn write_field<F: GridField, W: Write>(field: &F, mut out: W) -> Result<(), IoError> {
    let g = field.grid();
    writeln!(
        out,
        "{MAGIC} {} {:?} {}",
        g.n_axis(),
        g.box_length(),
        F::COMPONENTS
    )?;
    let mut buf = Vec::with_capacity(8 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

pub fn read_field<F: GridField, R: Read>(input: R) -> Result<F, IoError> {
    let mut reader = BufReader::new(input);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != MAGIC {
        return Err(IoError::Format(format!(
            "bad header {:?}",
            header.trim_end()
        )));
    }
    let n: usize = parts[1]
        .parse()
        .map_err(|_| IoError::Format(format!("bad n_axis {:?}", parts[1])))?;
    let length: f64 = parts[2]
        .parse()
        .map_err(|_| IoError::Format(format!("bad box_length {:?}", parts[2])))?;
    let ncomp: usize = parts[3]
        .parse()
        .map_err(|_| IoError::Format(format!("bad component count {:?}", parts[3])))?;
    if ncomp != F::COMPONENTS {
        return Err(IoError::Format(format!(
            "expected {} components, file has {ncomp}",
            F::COMPONENTS
        )));
    }
    let grid = GridSpec::new(n, length)?;
    let count = ncomp * grid.node_count();
    let mut bytes = Vec::with_capacity(8 * count);
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * count {
        return Err(IoError::Format(format!(
            "expected {} data bytes, found {}",
            8 * count,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    F::from_parts(grid, data)
}

pub fn dump<F: GridField>(field: &F, path: &Path) -> Result<(), IoError> {
    write_field(field, BufWriter::new(File::create(path)?))
}

pub fn load<F: GridField>(path: &Path) -> Result<F, IoError> {
    read_field(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_identical() {
        let grid = GridSpec::new(8, 2.5).unwrap();
        let f =
            SymTensorField::from_fn(grid, |p| [p[0], 1.0 / 3.0, -p[1], 1e-300, p[2].sin(), 7.0]);
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let g: SymTensorField = read_field(buf.as_slice()).unwrap();
        assert_eq!(g.grid(), f.grid());
        assert!(g
            .as_slice()
            .iter()
            .zip(f.as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn rejects_wrong_component_count_and_truncation() {
        let grid = GridSpec::unit(8).unwrap();
        let mut buf = Vec::new();
        write_field(&ScalarField::constant(grid, 1.0), &mut buf).unwrap();
        assert!(matches!(
            read_field::<OneFormField, _>(buf.as_slice()),
            Err(IoError::Format(_))
        ));
        buf.pop();
        assert!(matches!(
            read_field::<ScalarField, _>(buf.as_slice()),
            Err(IoError::Format(_))
        ));
        assert!(matches!(
            read_field::<ScalarField, _>(&b"CFORGE2 8 1 1\n"[..]),
            Err(IoError::Format(_))
        ));
    }
}
