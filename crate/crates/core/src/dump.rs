//! Binary field dumps: one JSON header line, then raw little-endian `f64`
//! values in row-major `(i0, i1, i2, i3, component)` order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Slot, TensorField};
use crate::grid::Grid4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    /// `[n0, n1, n2, n3, components]`
    pub shape: Vec<usize>,
    pub variance: Vec<Slot>,
    pub periods: [f64; 4],
    pub dtype: String,
    pub order: String,
    pub endianness: String,
}

pub fn write_field<W: Write>(mut out: W, field: &TensorField) -> Result<()> {
    let g = field.grid();
    let n = g.n();
    let ncomp = field.components().len();
    let header = DumpHeader {
        shape: vec![n[0], n[1], n[2], n[3], ncomp],
        variance: field.slots().to_vec(),
        periods: g.periods(),
        dtype: "f64".into(),
        order: "row-major".into(),
        endianness: "little".into(),
    };
    let line = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(g.len() * ncomp * 8);
    for p in 0..g.len() {
        for c in field.components() {
            buf.extend_from_slice(&c[p].to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: Read>(input: R) -> Result<TensorField> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: DumpHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(e.to_string()))?;
    if header.dtype != "f64" || header.order != "row-major" || header.endianness != "little" {
        return Err(Error::Format(format!(
            "unsupported layout {}/{}/{}",
            header.dtype, header.order, header.endianness
        )));
    }
    if header.shape.len() != 5 {
        return Err(Error::Format("shape must have five entries".into()));
    }
    let grid = Grid4::new(
        [header.shape[0], header.shape[1], header.shape[2], header.shape[3]],
        header.periods,
    )?;
    let ncomp = header.shape[4];
    if ncomp != 4usize.pow(header.variance.len() as u32) {
        return Err(Error::Format("component count does not match variance".into()));
    }
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != grid.len() * ncomp * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            grid.len() * ncomp * 8,
            bytes.len()
        )));
    }
    let mut comps = vec![vec![0.0; grid.len()]; ncomp];
    for (k, chunk) in bytes.chunks_exact(8).enumerate() {
        comps[k % ncomp][k / ncomp] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    TensorField::new(&grid, header.variance, comps)
}

pub fn save(path: &Path, field: &TensorField) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<TensorField> {
    read_field(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = Grid4::new([4, 4, 6, 4], [1.0, 1.0, 2.0, 1.0]).unwrap();
        let comps = (0..16)
            .map(|c| (0..g.len()).map(|p| ((c * 31 + p) as f64).sin() * 1e-3).collect())
            .collect();
        let t = TensorField::new(&g, vec![Slot::Co, Slot::Contra], comps).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &t).unwrap();
        let back = read_field(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let g = Grid4::cubic(4).unwrap();
        let t = TensorField::zeros(&g, vec![Slot::Co]);
        let mut buf = Vec::new();
        write_field(&mut buf, &t).unwrap();
        buf.truncate(buf.len() - 8);
        assert!(matches!(read_field(buf.as_slice()), Err(Error::Format(_))));
    }
}
