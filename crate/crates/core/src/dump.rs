//! Binary dump of process grids.
//!
//! Layout, all integers and floats little endian:
//!
//! ```text
//! magic    b"EVPD"
//! version  u32            (= 1)
//! dim      u32
//! n_nodes  u32
//! n_starts u32            (1 for FromInitial, n_nodes for AllPairs)
//! delta    f64
//! nodes    n_nodes × f64
//! values   for j in 0..n_starts, i in j..n_nodes: U(t_i, t_j) row-major, dim² × f64
//! ```

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::process::{EvolutionProcess, ProcessScope};

pub const MAGIC: &[u8; 4] = b"EVPD";
pub const VERSION: u32 = 1;

/// Decoded process values, detached from the operator family.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessDump {
    pub delta: f64,
    pub nodes: Vec<f64>,
    pub scope: ProcessScope,
    /// `values[j][i − j] = U(t_i, t_j)`.
    pub values: Vec<Vec<DMatrix<f64>>>,
}

impl ProcessDump {
    pub fn from_process(p: &EvolutionProcess) -> Self {
        ProcessDump {
            delta: p.delta(),
            nodes: p.nodes().to_vec(),
            scope: p.scope(),
            values: p.raw_values().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.first().and_then(|r| r.first()).map_or(0, |m| m.nrows())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&DMatrix<f64>> {
        if i < j {
            return None;
        }
        self.values.get(j)?.get(i - j)
    }

    pub fn encode(&self) -> Vec<u8> {
        let dim = self.dim();
        let n = self.nodes.len();
        let mut out =
            Vec::with_capacity(28 + 8 * n + self.values.iter().map(|r| r.len()).sum::<usize>() * 8 * dim * dim);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.extend_from_slice(&(self.values.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.delta.to_le_bytes());
        for t in &self.nodes {
            out.extend_from_slice(&t.to_le_bytes());
        }
        for row in &self.values {
            for m in row {
                for i in 0..dim {
                    for j in 0..dim {
                        out.extend_from_slice(&m[(i, j)].to_le_bytes());
                    }
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Dump("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Dump(format!("unsupported version {version}")));
        }
        let dim = r.u32()? as usize;
        let n = r.u32()? as usize;
        let starts = r.u32()? as usize;
        if dim == 0 || n == 0 {
            return Err(Error::Dump("empty dimension or grid".into()));
        }
        let scope = if starts == 1 {
            ProcessScope::FromInitial
        } else if starts == n {
            ProcessScope::AllPairs
        } else {
            return Err(Error::Dump(format!("{starts} start rows for {n} nodes")));
        };
        let delta = r.f64()?;
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Dump(format!("delta {delta} not in (0, 1]")));
        }
        // Size check before allocating anything proportional to the header.
        let pairs: u128 = (0..starts as u128).map(|j| n as u128 - j).sum();
        let need = 8u128 * (n as u128 + pairs * (dim as u128) * (dim as u128));
        if need != (bytes.len() - r.pos) as u128 {
            return Err(Error::Dump(format!(
                "payload is {} bytes, header implies {need}",
                bytes.len() - r.pos
            )));
        }
        let nodes: Vec<f64> = (0..n).map(|_| r.f64()).collect::<Result<_>>()?;
        if nodes.iter().any(|t| !t.is_finite()) || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Dump("nodes are not finite and strictly increasing".into()));
        }
        let mut values = Vec::with_capacity(starts);
        for j in 0..starts {
            let mut row = Vec::with_capacity(n - j);
            for _ in j..n {
                let data: Vec<f64> = (0..dim * dim).map(|_| r.f64()).collect::<Result<_>>()?;
                row.push(DMatrix::from_row_slice(dim, dim, &data));
            }
            values.push(row);
        }
        Ok(ProcessDump {
            delta,
            nodes,
            scope,
            values,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < k {
            return Err(Error::Dump(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
