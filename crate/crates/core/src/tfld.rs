//! `.tfld` field container: one line of JSON header, a newline, then the
//! components as little-endian `f64` in row-major `[point, component]` order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Symmetry, TensorField, Valence};
use crate::grid::TorusGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub dim: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub valence: Valence,
    pub symmetry: Symmetry,
    pub dtype: String,
    pub order: String,
    pub endian: String,
    /// `[points, components]`.
    pub shape: [usize; 2],
}

impl Header {
    pub fn for_field(field: &TensorField) -> Self {
        let grid = field.grid();
        Header {
            dim: grid.dim(),
            n: grid.points_per_axis(),
            valence: field.valence().to_vec(),
            symmetry: field.symmetry(),
            dtype: "f64".into(),
            order: "row-major".into(),
            endian: "little".into(),
            shape: [grid.len(), field.n_components()],
        }
    }
}

pub fn write<W: Write>(field: &TensorField, mut out: W) -> Result<()> {
    let header = Header::for_field(field);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    let [npts, ncomp] = header.shape;
    let data = field.data();
    let mut buf = Vec::with_capacity(npts * ncomp * 8);
    for p in 0..npts {
        for c in 0..ncomp {
            buf.extend_from_slice(&data[c * npts + p].to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read<R: Read>(input: R) -> Result<TensorField> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end())?;
    if header.dtype != "f64" || header.order != "row-major" || header.endian != "little" {
        return Err(Error::Format(format!(
            "unsupported layout: dtype {}, order {}, endian {}",
            header.dtype, header.order, header.endian
        )));
    }
    let grid = TorusGrid::new(header.dim, header.n)?;
    let ncomp = header.dim.pow(header.valence.len() as u32);
    if header.shape != [grid.len(), ncomp] {
        return Err(Error::Format(format!("shape {:?} does not match the grid and valence", header.shape)));
    }
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw)?;
    let npts = grid.len();
    if raw.len() != npts * ncomp * 8 {
        return Err(Error::Format(format!("expected {} bytes of data, found {}", npts * ncomp * 8, raw.len())));
    }
    let mut data = vec![0.0; npts * ncomp];
    for (i, chunk) in raw.chunks_exact(8).enumerate() {
        let (p, c) = (i / ncomp, i % ncomp);
        data[c * npts + p] = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    TensorField::from_components(&grid, header.valence, header.symmetry, data)
}

pub fn write_file(field: &TensorField, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write(field, file)
}

pub fn read_file(path: &Path) -> Result<TensorField> {
    read(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::valence;

    #[test]
    fn round_trip_is_bit_exact() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let f = grid
            .random_band_limited(3, valence::e_section(), Symmetry::SymmetricLowerPair, 2, 1.0)
            .unwrap();
        let mut buf = Vec::new();
        write(&f, &mut buf).unwrap();
        let back = read(buf.as_slice()).unwrap();
        assert_eq!(back.valence(), f.valence());
        assert_eq!(back.symmetry(), f.symmetry());
        assert_eq!(back.data(), f.data());
    }

    #[test]
    fn header_is_first_line() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let f = TensorField::constant(&grid, 1.5);
        let mut buf = Vec::new();
        write(&f, &mut buf).unwrap();
        let nl = buf.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&buf[..nl]).unwrap();
        assert_eq!(header["N"], 8);
        assert_eq!(header["valence"], serde_json::json!([]));
        assert_eq!(header["dtype"], "f64");
        assert_eq!(buf.len() - nl - 1, 64 * 8);
        assert_eq!(f64::from_le_bytes(buf[nl + 1..nl + 9].try_into().unwrap()), 1.5);
    }

    #[test]
    fn truncated_data_is_rejected() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let mut buf = Vec::new();
        write(&TensorField::constant(&grid, 1.0), &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read(buf.as_slice()), Err(Error::Format(_))));
    }
}
