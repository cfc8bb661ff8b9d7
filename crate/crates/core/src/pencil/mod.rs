//! Linear pencils: construction, splitting, serialization and numeric checks.

mod block;
mod io;
mod realize;
mod verify;

pub use block::{select_terms, Block, Pencil, Selection, SymRef};
pub use io::{from_json, load, save, to_json, FORMAT, VERSION};
pub use realize::{eliminate, realize, realize_unreduced};
pub use verify::{verify, verify_with, VerifyOptions};

use crate::error::{Error, Result};

/// `Q = F - Q_X` with `F` deterministic and `Q_X` holding the random blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PencilSplit {
    pub f: Vec<Vec<Block>>,
    pub qx: Vec<Vec<Block>>,
}

impl PencilSplit {
    /// `F - Q_X`, block by block.
    pub fn recombine(&self) -> Vec<Vec<Block>> {
        self.f
            .iter()
            .zip(&self.qx)
            .map(|(fr, qr)| fr.iter().zip(qr).map(|(a, b)| a.minus(b)).collect())
            .collect()
    }
}

/// Splits a pencil into deterministic and random parts. Each random block may
/// hold a single (possibly transposed) random symbol.
pub fn decompose(q: &Pencil) -> Result<PencilSplit> {
    let mut f = Vec::with_capacity(q.size());
    let mut qx = Vec::with_capacity(q.size());
    for (i, row) in q.blocks.iter().enumerate() {
        let mut fr = Vec::with_capacity(row.len());
        let mut qr = Vec::with_capacity(row.len());
        for (j, b) in row.iter().enumerate() {
            if b.random_terms().count() > 1 {
                return Err(Error::NonGaussianBlock(i, j));
            }
            fr.push(b.deterministic_part());
            qr.push(b.random_part().neg());
        }
        f.push(fr);
        qx.push(qr);
    }
    Ok(PencilSplit { f, qx })
}
