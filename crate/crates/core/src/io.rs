//! Binary and text file formats. All binary integers and floats are
//! little-endian.
//!
//! | file        | layout |
//! |-------------|--------|
//! | descriptors | `HDRK0001`, u64 n, u64 d, n·d f32 row-major |
//! | graph       | `HGRF0001`, u64 n, u64 nnz, u8 normalized, (n+1) u64 row offsets, nnz u32 columns, nnz f64 values |
//! | basis       | `HEIG0001`, u64 n, u64 r, u8 sparse, r f64 eigenvalues, then n·r f64 column-major or (r+1) u64 column offsets, nnz u32 rows, nnz f64 values |
//! | ranking     | u64 n, n u32 ids, n f64 scores, in rank order |

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;

use crate::descriptors::DescriptorSet;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::hybrid::RankingResult;
use crate::spectral::{CscMatrix, Eigenvectors, SpectralBasis};

pub const DESCRIPTOR_MAGIC: &[u8; 8] = b"HDRK0001";
pub const GRAPH_MAGIC: &[u8; 8] = b"HGRF0001";
pub const BASIS_MAGIC: &[u8; 8] = b"HEIG0001";

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<()> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(Error::Format(format!(
            "expected magic {}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&buf)
        )));
    }
    Ok(())
}

fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let v = r.read_u64::<LE>()?;
    usize::try_from(v).map_err(|_| Error::Format(format!("length {v} does not fit in memory")))
}

fn read_flag<R: Read>(r: &mut R) -> Result<bool> {
    match r.read_u8()? {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(Error::Format(format!("flag byte {other} is neither 0 nor 1"))),
    }
}

fn read_f64s<R: Read>(r: &mut R, len: usize) -> Result<Vec<f64>> {
    let mut v = vec![0.0; len];
    r.read_f64_into::<LE>(&mut v)?;
    Ok(v)
}

fn read_u32s<R: Read>(r: &mut R, len: usize) -> Result<Vec<u32>> {
    let mut v = vec![0; len];
    r.read_u32_into::<LE>(&mut v)?;
    Ok(v)
}

fn read_offsets<R: Read>(r: &mut R, len: usize) -> Result<Vec<usize>> {
    (0..len).map(|_| read_len(r)).collect()
}

pub fn write_descriptors<W: Write>(mut w: W, data: &DescriptorSet) -> Result<()> {
    w.write_all(DESCRIPTOR_MAGIC)?;
    w.write_u64::<LE>(data.len() as u64)?;
    w.write_u64::<LE>(data.dim() as u64)?;
    for &v in data.as_slice() {
        w.write_f32::<LE>(v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_descriptors<R: Read>(mut r: R) -> Result<DescriptorSet> {
    expect_magic(&mut r, DESCRIPTOR_MAGIC)?;
    let n = read_len(&mut r)?;
    let d = read_len(&mut r)?;
    let len = n.checked_mul(d).ok_or_else(|| Error::Format("descriptor size overflow".into()))?;
    let mut data = vec![0f32; len];
    r.read_f32_into::<LE>(&mut data)?;
    DescriptorSet::new(d, data)
}

pub fn write_graph<W: Write>(mut w: W, g: &SparseGraph) -> Result<()> {
    w.write_all(GRAPH_MAGIC)?;
    w.write_u64::<LE>(g.n() as u64)?;
    w.write_u64::<LE>(g.nnz() as u64)?;
    w.write_u8(u8::from(g.is_normalized()))?;
    for &o in g.offsets() {
        w.write_u64::<LE>(o as u64)?;
    }
    for &c in g.indices() {
        w.write_u32::<LE>(c)?;
    }
    for &v in g.values() {
        w.write_f64::<LE>(v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_graph<R: Read>(mut r: R) -> Result<SparseGraph> {
    expect_magic(&mut r, GRAPH_MAGIC)?;
    let n = read_len(&mut r)?;
    let nnz = read_len(&mut r)?;
    let normalized = read_flag(&mut r)?;
    let offsets = read_offsets(&mut r, n + 1)?;
    let indices = read_u32s(&mut r, nnz)?;
    let values = read_f64s(&mut r, nnz)?;
    SparseGraph::from_csr(n, offsets, indices, values, normalized)
}

pub fn write_basis<W: Write>(mut w: W, basis: &SpectralBasis) -> Result<()> {
    w.write_all(BASIS_MAGIC)?;
    w.write_u64::<LE>(basis.n() as u64)?;
    w.write_u64::<LE>(basis.rank() as u64)?;
    w.write_u8(u8::from(basis.is_sparse()))?;
    for &l in basis.eigenvalues() {
        w.write_f64::<LE>(l)?;
    }
    match basis.vectors() {
        Eigenvectors::Dense(u) => {
            for &v in u.as_slice() {
                w.write_f64::<LE>(v)?;
            }
        }
        Eigenvectors::Sparse(u) => {
            for &o in &u.col_offsets {
                w.write_u64::<LE>(o as u64)?;
            }
            for &i in &u.row_indices {
                w.write_u32::<LE>(i)?;
            }
            for &v in &u.values {
                w.write_f64::<LE>(v)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_basis<R: Read>(mut r: R) -> Result<SpectralBasis> {
    expect_magic(&mut r, BASIS_MAGIC)?;
    let n = read_len(&mut r)?;
    let rank = read_len(&mut r)?;
    let sparse = read_flag(&mut r)?;
    let eigenvalues = read_f64s(&mut r, rank)?;
    if sparse {
        let col_offsets = read_offsets(&mut r, rank + 1)?;
        let nnz = *col_offsets.last().unwrap();
        let row_indices = read_u32s(&mut r, nnz)?;
        let values = read_f64s(&mut r, nnz)?;
        SpectralBasis::from_sparse(eigenvalues, CscMatrix { nrows: n, col_offsets, row_indices, values })
    } else {
        let len = n.checked_mul(rank).ok_or_else(|| Error::Format("basis size overflow".into()))?;
        let values = read_f64s(&mut r, len)?;
        SpectralBasis::from_dense(eigenvalues, DMatrix::from_vec(n, rank, values))
    }
}

/// `rank,vertex_id,score` rows in rank order.
pub fn write_ranking_csv<W: Write>(mut w: W, result: &RankingResult) -> Result<()> {
    writeln!(w, "rank,vertex_id,score")?;
    for (rank, &id) in result.order.iter().enumerate() {
        writeln!(w, "{},{id},{:e}", rank + 1, result.scores[id])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ranking_binary<W: Write>(mut w: W, result: &RankingResult) -> Result<()> {
    w.write_u64::<LE>(result.order.len() as u64)?;
    for &id in &result.order {
        w.write_u32::<LE>(id as u32)?;
    }
    for &id in &result.order {
        w.write_f64::<LE>(result.scores[id])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `(ids, scores)` in rank order.
pub fn read_ranking_binary<R: Read>(mut r: R) -> Result<(Vec<u32>, Vec<f64>)> {
    let n = read_len(&mut r)?;
    let ids = read_u32s(&mut r, n)?;
    let scores = read_f64s(&mut r, n)?;
    Ok((ids, scores))
}

/// One line per query with its relevant dataset indices, space separated.
pub fn write_relevance<W: Write>(mut w: W, relevance: &[Vec<usize>]) -> Result<()> {
    for rel in relevance {
        let line: Vec<String> = rel.iter().map(usize::to_string).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_relevance<R: BufRead>(r: R) -> Result<Vec<Vec<usize>>> {
    r.lines()
        .map(|line| {
            line?
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|e| Error::Format(format!("bad relevance index '{t}': {e}"))))
                .collect()
        })
        .collect()
}

pub fn save<T: ?Sized>(path: &Path, value: &T, write: impl FnOnce(BufWriter<File>, &T) -> Result<()>) -> Result<()> {
    write(BufWriter::new(File::create(path)?), value)
}

pub fn load<T>(path: &Path, read: impl FnOnce(BufReader<File>) -> Result<T>) -> Result<T> {
    read(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::RankingMode;

    #[test]
    fn descriptor_header_layout() {
        let data = DescriptorSet::new(2, vec![1.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        write_descriptors(&mut buf, &data).unwrap();
        assert_eq!(&buf[..8], b"HDRK0001");
        assert_eq!(&buf[8..16], &1u64.to_le_bytes());
        assert_eq!(&buf[16..24], &2u64.to_le_bytes());
        assert_eq!(&buf[24..28], &1.0f32.to_le_bytes());
        assert_eq!(buf.len(), 32);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let data = DescriptorSet::new(1, vec![1.0]).unwrap();
        let mut buf = Vec::new();
        write_descriptors(&mut buf, &data).unwrap();
        assert!(matches!(read_graph(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_file_is_io_error() {
        let g = SparseGraph::from_edges(3, &[(0, 1, 0.5)]).unwrap();
        let mut buf = Vec::new();
        write_graph(&mut buf, &g).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_graph(&buf[..]), Err(Error::Io(_))));
    }

    #[test]
    fn ranking_outputs() {
        let r = RankingResult::from_scores(vec![0.25, 1.0], RankingMode::Hybrid, None);
        let mut csv = Vec::new();
        write_ranking_csv(&mut csv, &r).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "rank,vertex_id,score\n1,1,1e0\n2,0,2.5e-1\n");
        let mut bin = Vec::new();
        write_ranking_binary(&mut bin, &r).unwrap();
        assert_eq!(bin.len(), 8 + 2 * 4 + 2 * 8);
        assert_eq!(read_ranking_binary(&bin[..]).unwrap(), (vec![1, 0], vec![1.0, 0.25]));
    }

    #[test]
    fn relevance_round_trip() {
        let rel = vec![vec![0, 4, 7], vec![], vec![2]];
        let mut buf = Vec::new();
        write_relevance(&mut buf, &rel).unwrap();
        assert_eq!(read_relevance(&buf[..]).unwrap(), rel);
    }
}
