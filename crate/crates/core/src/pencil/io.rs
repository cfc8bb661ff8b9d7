//! JSON pencil files.
//!
//! ```json
//! {
//!   "format": "freetrace-pencil",
//!   "version": 1,
//!   "dims": ["n", "d"],
//!   "constants": [],
//!   "symbols": [{"name": "Z", "rows": "n", "cols": "d", "kind": "rand"}],
//!   "blocks": [["I", "-Z"], ["Z'", "I"]],
//!   "selection": {"u": ["0", "1"], "v": ["0", "1"]}
//! }
//! ```
//!
//! Blocks use the expression syntax, where a bare `I` is the identity of the
//! block's size. `selection` may instead be `{"entry": [i, j]}`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::block::{Block, Pencil, Selection};
use crate::dsl::{self, Scope};
use crate::error::{Error, Result};
use crate::symcore::render::parse_rational;
use crate::symcore::{DimSymbol, MatrixKind, MatrixSymbol, Rational, VarKind};

pub const FORMAT: &str = "freetrace-pencil";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SymbolEntry {
    name: String,
    rows: String,
    cols: String,
    kind: String,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SelectionFile {
    Vectors { u: Vec<Value>, v: Vec<Value> },
    Entry { entry: [usize; 2] },
}

#[derive(Serialize, Deserialize)]
struct PencilFile {
    format: String,
    version: u32,
    dims: Vec<String>,
    #[serde(default)]
    constants: Vec<String>,
    symbols: Vec<SymbolEntry>,
    blocks: Vec<Vec<String>>,
    selection: SelectionFile,
}

fn rational(v: &Value) -> Result<Rational> {
    match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) => {
            let s = n.to_string();
            let q = dsl::parse_number(s.trim_start_matches('-'))
                .ok_or_else(|| Error::Invalid(format!("bad rational {n}")))?;
            Ok(if s.starts_with('-') { -q } else { q })
        }
        other => Err(Error::Invalid(format!("expected a rational, found {other}"))),
    }
}

pub fn to_json(q: &Pencil) -> String {
    let mut consts = BTreeSet::new();
    for b in q.blocks.iter().flatten() {
        for c in std::iter::once(&b.identity).chain(b.terms.iter().map(|(_, c)| c)) {
            for v in c.vars() {
                if matches!(v.kind(), VarKind::Const) {
                    consts.insert(v.name().to_string());
                }
            }
        }
    }
    let selection = match &q.selection {
        Selection::Vectors { u, v } => SelectionFile::Vectors {
            u: u.iter().map(|x| Value::String(x.to_string())).collect(),
            v: v.iter().map(|x| Value::String(x.to_string())).collect(),
        },
        Selection::Entry(i, j) => SelectionFile::Entry { entry: [*i, *j] },
    };
    let file = PencilFile {
        format: FORMAT.into(),
        version: VERSION,
        dims: q.dims.iter().map(|d| d.name().to_string()).collect(),
        constants: consts.into_iter().collect(),
        symbols: q
            .symbols()
            .values()
            .map(|s| SymbolEntry {
                name: s.name.clone(),
                rows: s.rows.name().into(),
                cols: s.cols.name().into(),
                kind: s.kind.tag().into(),
            })
            .collect(),
        blocks: q.blocks.iter().map(|r| r.iter().map(Block::dsl).collect()).collect(),
        selection,
    };
    serde_json::to_string_pretty(&file).expect("pencil serializes")
}

pub fn from_json(text: &str) -> Result<Pencil> {
    let file: PencilFile = serde_json::from_str(text)?;
    if file.format != FORMAT {
        return Err(Error::Invalid(format!("unknown format {:?}", file.format)));
    }
    if file.version != VERSION {
        return Err(Error::Invalid(format!("unsupported pencil version {}", file.version)));
    }
    let dims: Vec<DimSymbol> = file.dims.iter().map(|d| DimSymbol::new(d)).collect();
    let mut scope = Scope::default();
    scope.dims.extend(file.dims.iter().cloned());
    scope.consts.extend(file.constants.iter().cloned());
    for s in &file.symbols {
        let kind = MatrixKind::from_tag(&s.kind)
            .ok_or_else(|| Error::Invalid(format!("symbol {}: unknown kind {:?}", s.name, s.kind)))?;
        scope.declare_symbol(MatrixSymbol::new(&s.name, &s.rows, &s.cols, kind));
    }
    let p = dims.len();
    if file.blocks.len() != p || file.blocks.iter().any(|r| r.len() != p) {
        return Err(Error::Invalid(format!("block grid must be {p} x {p}")));
    }
    let mut blocks = Vec::with_capacity(p);
    for (i, row) in file.blocks.iter().enumerate() {
        let mut out = Vec::with_capacity(p);
        for (j, src) in row.iter().enumerate() {
            let mut sc = scope.clone();
            sc.default_identity = (dims[i] == dims[j]).then(|| dims[i].clone());
            let block = match dsl::parse_expr(src, &sc)
                .map_err(|e| Error::Invalid(format!("block ({i}, {j}): {e}")))?
            {
                dsl::Value::Scalar(c) if c.is_zero() => Block::zero(),
                dsl::Value::Scalar(c) if dims[i] == dims[j] => Block::scalar(c),
                dsl::Value::Scalar(_) => {
                    return Err(Error::shape(format!("block ({i}, {j})"), "scalar in a rectangular block"))
                }
                dsl::Value::Matrix(m) => {
                    let (r, c) = m.shape().map_err(|e| Error::Invalid(format!("block ({i}, {j}): {e}")))?;
                    if r != dims[i] || c != dims[j] {
                        return Err(Error::shape(
                            format!("block ({i}, {j})"),
                            format!("expression is {r} x {c}, block is {} x {}", dims[i], dims[j]),
                        ));
                    }
                    Block::from_expr(&m).map_err(|_| Error::NonlinearBlock(i, j))?
                }
            };
            out.push(block);
        }
        blocks.push(out);
    }
    let selection = match file.selection {
        SelectionFile::Vectors { u, v } => Selection::Vectors {
            u: u.iter().map(rational).collect::<Result<_>>()?,
            v: v.iter().map(rational).collect::<Result<_>>()?,
        },
        SelectionFile::Entry { entry } => Selection::Entry(entry[0], entry[1]),
    };
    Pencil::new(dims, blocks, selection)
}

pub fn save(q: &Pencil, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json(q) + "\n")?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Pencil> {
    from_json(&std::fs::read_to_string(path)?)
}
