//! Binary field snapshots and CSV emission.
//!
//! Snapshot format: magic "NSAC1", u32 nx, u32 ny, f64 lx, ly, t, eps,
//! then row-major f64 arrays c, vx, vy, p (cell-centered), all
//! little-endian.

use crate::diffuse::{Bc, DiffuseState};
use crate::error::{Error, Result};
use ndarray::Array2;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 5] = b"NSAC1";

/// Cell-centered snapshot of a solver state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: u32,
    pub ny: u32,
    pub lx: f64,
    pub ly: f64,
    pub t: f64,
    pub eps: f64,
    pub c: Array2<f64>,
    pub vx: Array2<f64>,
    pub vy: Array2<f64>,
    pub p: Array2<f64>,
}

/// Build a snapshot from a MAC state, averaging face velocities to the
/// cell centers.
pub fn snapshot_from_state(st: &DiffuseState) -> Snapshot {
    let g = st.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mut vx = Array2::zeros((ny, nx));
    let mut vy = Array2::zeros((ny, nx));
    match g.bc {
        Bc::Periodic => {
            for j in 0..ny {
                for i in 0..nx {
                    let im = (i + nx - 1) % nx;
                    let jm = (j + ny - 1) % ny;
                    vx[(j, i)] = 0.5 * (st.u[(j, i)] + st.u[(j, im)]);
                    vy[(j, i)] = 0.5 * (st.v[(j, i)] + st.v[(jm, i)]);
                }
            }
        }
        Bc::WallNeumannNoSlip => {
            for j in 0..ny {
                for i in 0..nx {
                    vx[(j, i)] = 0.5 * (st.u[(j, i)] + st.u[(j, i + 1)]);
                    vy[(j, i)] = 0.5 * (st.v[(j, i)] + st.v[(j + 1, i)]);
                }
            }
        }
    }
    Snapshot {
        nx: nx as u32,
        ny: ny as u32,
        lx: g.lx,
        ly: g.ly,
        t: st.t,
        eps: st.eps,
        c: st.c.clone(),
        vx,
        vy,
        p: st.p.clone(),
    }
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&snap.nx.to_le_bytes());
    buf.extend_from_slice(&snap.ny.to_le_bytes());
    for v in [snap.lx, snap.ly, snap.t, snap.eps] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for field in [&snap.c, &snap.vx, &snap.vy, &snap.p] {
        debug_assert_eq!(field.dim(), (snap.ny as usize, snap.nx as usize));
        for &v in field.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 5 || &bytes[..5] != MAGIC {
        return Err(Error::BadMagic);
    }
    let header_len = 5 + 4 + 4 + 8 * 4;
    if bytes.len() < header_len {
        return Err(Error::TruncatedFile { needed: header_len, got: bytes.len() });
    }
    let nx = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
    let ny = u32::from_le_bytes(bytes[9..13].try_into().unwrap());
    let mut off = 13;
    let next_f64 = |bytes: &[u8], off: &mut usize| -> f64 {
        let v = f64::from_le_bytes(bytes[*off..*off + 8].try_into().unwrap());
        *off += 8;
        v
    };
    let lx = next_f64(&bytes, &mut off);
    let ly = next_f64(&bytes, &mut off);
    let t = next_f64(&bytes, &mut off);
    let eps = next_f64(&bytes, &mut off);
    // plausibility screen: a foreign-endian writer scrambles these
    let dims_ok = (1..=1_000_000).contains(&nx) && (1..=1_000_000).contains(&ny);
    let floats_ok =
        lx.is_finite() && ly.is_finite() && t.is_finite() && eps.is_finite() && lx > 0.0 && ly > 0.0;
    if !dims_ok || !floats_ok {
        return Err(Error::VersionMismatch);
    }
    let n = nx as usize * ny as usize;
    let needed = header_len + 4 * n * 8;
    if bytes.len() < needed {
        return Err(Error::TruncatedFile { needed, got: bytes.len() });
    }
    let read_field = |off: &mut usize| -> Array2<f64> {
        let mut a = Array2::zeros((ny as usize, nx as usize));
        for v in a.iter_mut() {
            *v = f64::from_le_bytes(bytes[*off..*off + 8].try_into().unwrap());
            *off += 8;
        }
        a
    };
    let c = read_field(&mut off);
    let vx = read_field(&mut off);
    let vy = read_field(&mut off);
    let p = read_field(&mut off);
    Ok(Snapshot { nx, ny, lx, ly, t, eps, c, vx, vy, p })
}

/// Incremental CSV writer with 17-significant-digit floats.
pub struct CsvWriter {
    rows: Vec<String>,
}

impl CsvWriter {
    pub fn new(header: &[&str]) -> Self {
        CsvWriter { rows: vec![header.join(",")] }
    }

    pub fn row(&mut self, values: &[f64]) {
        let line: Vec<String> = values.iter().map(|v| format!("{v:.16e}")).collect();
        self.rows.push(line.join(","));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.rows.join("\n") + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_snapshot() -> Snapshot {
        let mk = |seed: u64| {
            let mut state = seed;
            Array2::from_shape_fn((6, 5), |_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
        };
        Snapshot {
            nx: 5,
            ny: 6,
            lx: 1.0,
            ly: 1.2,
            t: 0.37,
            eps: 0.02,
            c: mk(1),
            vx: mk(2),
            vy: mk(3),
            p: mk(4),
        }
    }

    #[test]
    fn roundtrip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.nsac");
        let snap = sample_snapshot();
        write_snapshot(&path, &snap).unwrap();
        let back = read_snapshot(&path).unwrap();
        assert_eq!(snap, back);
        // bitwise: compare raw bytes of a re-write
        let path2 = dir.path().join("snap2.nsac");
        write_snapshot(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn truncated_rejected_without_partial_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.nsac");
        write_snapshot(&path, &sample_snapshot()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = &bytes[..bytes.len() - 16];
        let path3 = dir.path().join("cut.nsac");
        std::fs::write(&path3, cut).unwrap();
        assert!(matches!(read_snapshot(&path3), Err(Error::TruncatedFile { .. })));
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.nsac");
        std::fs::write(&path, b"WRONG-----------").unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::BadMagic)));
    }

    #[test]
    fn foreign_endian_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("be.nsac");
        // emulate a big-endian writer: magic intact, dims byte-swapped
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&5u32.to_be_bytes());
        buf.extend_from_slice(&6u32.to_be_bytes());
        for v in [1.0f64, 1.2, 0.37, 0.02] {
            buf.extend_from_slice(&v.to_be_bytes());
        }
        buf.resize(buf.len() + 4 * 30 * 8, 0);
        std::fs::write(&path, &buf).unwrap();
        assert!(matches!(
            read_snapshot(&path),
            Err(Error::VersionMismatch) | Err(Error::TruncatedFile { .. })
        ));
    }
}
