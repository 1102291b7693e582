//! File formats: binary grid datasets (`KZDS`), basis dumps (`KZOB`) and
//! plain CSV for points and centers.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{CenterSet, GridDataset, PointCloud};

pub const DATASET_MAGIC: [u8; 4] = *b"KZDS";
pub const BASIS_MAGIC: [u8; 4] = *b"KZOB";
const VERSION: u16 = 1;

pub fn write_dataset<W: Write>(mut out: W, data: &GridDataset) -> Result<()> {
    out.write_all(&DATASET_MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(data.len() as u64).to_le_bytes())?;
    out.write_all(&(data.dim() as u32).to_le_bytes())?;
    out.write_all(&data.delta().to_le_bytes())?;
    let mut buf = Vec::with_capacity(data.coords().len() * 8);
    for &c in data.coords() {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn dataset_to_bytes(data: &GridDataset) -> Vec<u8> {
    let mut out = Vec::new();
    write_dataset(&mut out, data).expect("writing to a Vec cannot fail");
    out
}

pub fn read_dataset<R: Read>(mut input: R) -> Result<GridDataset> {
    let mut head = [0u8; 4 + 2 + 8 + 4 + 8];
    input
        .read_exact(&mut head)
        .map_err(|_| Error::Truncated { bit_offset: 0 })?;
    let magic: [u8; 4] = head[0..4].try_into().unwrap();
    if magic != DATASET_MAGIC {
        return Err(Error::BadMagic {
            expected: DATASET_MAGIC,
            found: magic,
        });
    }
    let version = u16::from_le_bytes(head[4..6].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n = u64::from_le_bytes(head[6..14].try_into().unwrap());
    let d = u32::from_le_bytes(head[14..18].try_into().unwrap()) as usize;
    let delta = u64::from_le_bytes(head[18..26].try_into().unwrap());
    let count = (n as usize)
        .checked_mul(d)
        .ok_or_else(|| Error::Corrupt {
            bit_offset: 48,
            reason: "n·d overflows".into(),
        })?;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() < count * 8 {
        return Err(Error::Truncated {
            bit_offset: ((head.len() + body.len()) * 8) as u64,
        });
    }
    let coords = body[..count * 8]
        .chunks_exact(8)
        .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    GridDataset::new(d, delta, coords)
}

fn csv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((
                i + 1,
                line.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .collect(),
            ))
        }
    })
}

/// One point per line, comma- or whitespace-separated integer coordinates.
pub fn parse_dataset_csv(text: &str, delta: u64) -> Result<GridDataset> {
    let mut points = Vec::new();
    for (line, fields) in csv_rows(text) {
        let p: std::result::Result<Vec<u64>, _> = fields.iter().map(|f| f.parse::<u64>()).collect();
        points.push(p.map_err(|e| Error::Parse {
            line,
            reason: e.to_string(),
        })?);
    }
    GridDataset::from_points(delta, &points)
}

pub fn dataset_to_csv(data: &GridDataset) -> String {
    let mut out = String::new();
    for p in data.points() {
        let row: Vec<String> = p.iter().map(|c| c.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_centers_csv(text: &str) -> Result<CenterSet> {
    let mut points = Vec::new();
    for (line, fields) in csv_rows(text) {
        let p: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        points.push(p.map_err(|e| Error::Parse {
            line,
            reason: e.to_string(),
        })?);
    }
    CenterSet::from_points(&points)
}

/// Round-trippable text: Rust's shortest float formatting is exact on parse.
pub fn centers_to_csv(centers: &CenterSet) -> String {
    let mut out = String::new();
    for c in centers.centers() {
        let row: Vec<String> = c.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Column-major dump of a real matrix.
pub fn write_matrix<W: Write>(mut out: W, m: &DMatrix<f64>) -> Result<()> {
    out.write_all(&BASIS_MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(m.nrows() as u32).to_le_bytes())?;
    out.write_all(&(m.ncols() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(m.len() * 8);
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut input: R) -> Result<DMatrix<f64>> {
    let mut head = [0u8; 14];
    input
        .read_exact(&mut head)
        .map_err(|_| Error::Truncated { bit_offset: 0 })?;
    let magic: [u8; 4] = head[0..4].try_into().unwrap();
    if magic != BASIS_MAGIC {
        return Err(Error::BadMagic {
            expected: BASIS_MAGIC,
            found: magic,
        });
    }
    let version = u16::from_le_bytes(head[4..6].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let rows = u32::from_le_bytes(head[6..10].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(head[10..14].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() < rows * cols * 8 {
        return Err(Error::Truncated {
            bit_offset: ((head.len() + body.len()) * 8) as u64,
        });
    }
    let values: Vec<f64> = body[..rows * cols * 8]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: pos / rows.max(1) });
    }
    Ok(DMatrix::from_vec(rows, cols, values))
}
