//! Grid serialisation.
//!
//! CSV has one row per node, `t`-major, with a header row. The binary
//! snapshot stores the same columns as little-endian `f64` records after a
//! fixed 48-byte header:
//!
//! | offset | size | content                                        |
//! |--------|------|------------------------------------------------|
//! | 0      | 8    | magic `NFGRID\0\x01`                           |
//! | 8      | 1    | kind: `0` partially null, `1` pseudo null      |
//! | 9      | 7    | zero padding                                   |
//! | 16     | 8    | `u64` number of `u` samples                    |
//! | 24     | 8    | `u64` number of `t` samples                    |
//! | 32     | 8    | `f64` du                                       |
//! | 40     | 8    | `f64` dt                                       |
//! | 48     | ...  | records of 26 `f64` each (208 bytes)           |
//!
//! A record is `u, t, γ(4), T(4), N(4), B1(4), B2(4), v, k1, k2, k3`.

use std::io::{self, Read, Write};

use super::{CurveGrid, DriftRow, Slice};
use crate::frames::{join_floats, CurvatureValues, Frame4, FrameKind};
use crate::mink4::Vec4;

pub const SNAPSHOT_MAGIC: [u8; 8] = *b"NFGRID\0\x01";
/// Number of `f64` values per node record.
pub const SNAPSHOT_RECORD_LEN: usize = 26;

fn record(grid: &CurveGrid, i: usize, j: usize) -> [f64; SNAPSHOT_RECORD_LEN] {
    let sl = &grid.slices[j];
    let f = &sl.frames[i];
    let k = &sl.curvatures[i];
    let mut r = [0.0; SNAPSHOT_RECORD_LEN];
    r[0] = grid.u[i];
    r[1] = sl.t;
    for (n, v) in [sl.positions[i], f.t, f.n, f.b1, f.b2].iter().enumerate() {
        r[2 + 4 * n..6 + 4 * n].copy_from_slice(&v.to_array());
    }
    r[22] = sl.speed[i];
    r[23] = k.k1;
    r[24] = k.k2;
    r[25] = k.k3;
    r
}

impl CurveGrid {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["u".to_string(), "t".to_string()];
        for name in ["gamma", "T", "N", "B1", "B2"] {
            for c in 1..=4 {
                header.push(format!("{name}_x{c}"));
            }
        }
        header.extend(["v", "k1", "k2", "k3"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for j in 0..self.num_t() {
            for i in 0..self.num_u() {
                writeln!(w, "{}", join_floats(&record(self, i, j)))?;
            }
        }
        Ok(())
    }
}

/// `t,length,drift` with a header row.
pub fn write_drift_csv<W: Write>(rows: &[DriftRow], mut w: W) -> io::Result<()> {
    writeln!(w, "t,length,drift")?;
    for r in rows {
        writeln!(w, "{}", join_floats(&[r.t, r.length, r.drift]))?;
    }
    Ok(())
}

pub fn write_snapshot<W: Write>(grid: &CurveGrid, mut w: W) -> io::Result<()> {
    w.write_all(&SNAPSHOT_MAGIC)?;
    let kind = match grid.kind {
        FrameKind::PartiallyNull => 0u8,
        FrameKind::PseudoNull => 1u8,
    };
    w.write_all(&[kind, 0, 0, 0, 0, 0, 0, 0])?;
    w.write_all(&(grid.num_u() as u64).to_le_bytes())?;
    w.write_all(&(grid.num_t() as u64).to_le_bytes())?;
    w.write_all(&grid.du.to_le_bytes())?;
    w.write_all(&grid.dt.to_le_bytes())?;
    for j in 0..grid.num_t() {
        for i in 0..grid.num_u() {
            for x in record(grid, i, j) {
                w.write_all(&x.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn invalid(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

pub fn read_snapshot<R: Read>(mut r: R) -> io::Result<CurveGrid> {
    let mut head = [0u8; 48];
    r.read_exact(&mut head)?;
    if head[..8] != SNAPSHOT_MAGIC {
        return Err(invalid("not a grid snapshot"));
    }
    let kind = match head[8] {
        0 => FrameKind::PartiallyNull,
        1 => FrameKind::PseudoNull,
        _ => return Err(invalid("unknown curve kind")),
    };
    let word = |k: usize| <[u8; 8]>::try_from(&head[k..k + 8]).expect("8-byte field");
    let m = u64::from_le_bytes(word(16)) as usize;
    let nt = u64::from_le_bytes(word(24)) as usize;
    let du = f64::from_le_bytes(word(32));
    let dt = f64::from_le_bytes(word(40));
    let mut u = Vec::with_capacity(m);
    let mut slices = Vec::with_capacity(nt);
    let mut buf = [0u8; 8 * SNAPSHOT_RECORD_LEN];
    for j in 0..nt {
        let mut sl = Slice { t: 0.0, positions: vec![], frames: vec![], curvatures: vec![], speed: vec![] };
        for _ in 0..m {
            r.read_exact(&mut buf)?;
            let x: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            let v = |k: usize| Vec4::new(x[k], x[k + 1], x[k + 2], x[k + 3]);
            if j == 0 {
                u.push(x[0]);
            }
            sl.t = x[1];
            sl.positions.push(v(2));
            sl.frames.push(Frame4::new(kind, v(6), v(10), v(14), v(18)));
            sl.speed.push(x[22]);
            sl.curvatures.push(CurvatureValues::new(x[23], x[24], x[25]));
        }
        slices.push(sl);
    }
    Ok(CurveGrid { kind, du, dt, u, slices })
}
