//! Matrix files.
//!
//! CSV: the first record is `rows,cols`, followed by one record per matrix row.
//! Binary: `rows` and `cols` as little-endian `u64`, then `rows × cols`
//! little-endian `f64` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, WlraError};

use super::DenseMatrix;

pub fn read_csv<R: Read>(reader: R) -> Result<DenseMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| WlraError::Format("empty CSV".into()))??;
    if header.len() != 2 {
        return Err(WlraError::Format(format!(
            "header must be `rows,cols`, got {} fields",
            header.len()
        )));
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| WlraError::Format(format!("bad dimension `{s}`")))
    };
    let (rows, cols) = (parse_dim(&header[0])?, parse_dim(&header[1])?);
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for rec in records {
        let rec = rec?;
        if rec.len() != cols {
            return Err(WlraError::Format(format!(
                "row {seen} has {} fields, expected {cols}",
                rec.len()
            )));
        }
        for field in rec.iter() {
            let v = field
                .parse::<f64>()
                .map_err(|_| WlraError::Format(format!("bad number `{field}` in row {seen}")))?;
            data.push(v);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(WlraError::Format(format!("expected {rows} rows, found {seen}")));
    }
    DenseMatrix::new(rows, cols, data)
}

pub fn write_csv<W: Write>(m: &DenseMatrix, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).flexible(true).from_writer(writer);
    w.write_record([m.rows().to_string(), m.cols().to_string()])?;
    for i in 0..m.rows() {
        // `{:?}` prints the shortest string that round-trips exactly.
        w.write_record(m.row(i).iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut reader: R) -> Result<DenseMatrix> {
    let mut word = [0u8; 8];
    let mut read_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut word)
            .map_err(|_| WlraError::Format("truncated header".into()))?;
        Ok(u64::from_le_bytes(word))
    };
    let rows = read_u64(&mut reader)? as usize;
    let cols = read_u64(&mut reader)? as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| WlraError::Format("dimensions overflow".into()))?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(WlraError::Format(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            len * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    DenseMatrix::new(rows, cols, data)
}

pub fn write_binary<W: Write>(m: &DenseMatrix, mut writer: W) -> Result<()> {
    writer.write_all(&(m.rows() as u64).to_le_bytes())?;
    writer.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        writer.write_all(&v.to_le_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

fn is_binary(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("bin") | Some("dat")
    )
}

/// Reads a matrix, choosing the format from the extension (`.bin`/`.dat` are binary).
pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let file = BufReader::new(File::open(path)?);
    if is_binary(path) {
        read_binary(file)
    } else {
        read_csv(file)
    }
}

pub fn write_matrix(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = BufWriter::new(File::create(path)?);
    if is_binary(path) {
        write_binary(m, file)
    } else {
        write_csv(m, file)
    }
}
