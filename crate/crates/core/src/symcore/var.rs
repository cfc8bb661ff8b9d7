//! Interned scalar indeterminates.
//!
//! Every indeterminate is identified by its name. Names are interned in a
//! process-wide table so equality and hashing are pointer operations, while
//! ordering is lexicographic by name (the canonical variable order).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock, RwLock};

/// What an indeterminate stands for.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    /// A positive integer dimension such as `n`, `d`, `m`.
    Dim,
    /// A positive real constant such as `lambda` or `phi`.
    Const,
    /// Limiting normalized trace of block `(i, j)` of the inverse pencil.
    GEntry(usize, usize),
    /// Scalar image of a matrix symbol after scalarization.
    MatScalar { symbol: String, deterministic: bool },
    /// Opaque normalized-trace atom produced by matricization.
    Trace(usize),
}

#[derive(Debug)]
struct VarInner {
    name: String,
    kind: VarKind,
}

/// An interned indeterminate.
#[derive(Clone)]
pub struct Var(Arc<VarInner>);

fn table() -> &'static RwLock<HashMap<String, Var>> {
    static TABLE: OnceLock<RwLock<HashMap<String, Var>>> = OnceLock::new();
    TABLE.get_or_init(|| RwLock::new(HashMap::new()))
}

impl Var {
    /// Interns `name` with `kind`. A name that already exists keeps the kind
    /// it was first registered with.
    pub fn new(name: &str, kind: VarKind) -> Var {
        if let Some(v) = table().read().unwrap().get(name) {
            return v.clone();
        }
        let mut guard = table().write().unwrap();
        guard
            .entry(name.to_string())
            .or_insert_with(|| {
                Var(Arc::new(VarInner {
                    name: name.to_string(),
                    kind,
                }))
            })
            .clone()
    }

    pub fn dim(name: &str) -> Var {
        Var::new(name, VarKind::Dim)
    }

    pub fn constant(name: &str) -> Var {
        Var::new(name, VarKind::Const)
    }

    /// The `G_{i,j}` indeterminate.
    pub fn g(i: usize, j: usize) -> Var {
        Var::new(&format!("G_{{{i},{j}}}"), VarKind::GEntry(i, j))
    }

    /// Scalar stand-in for matrix symbol `symbol`.
    pub fn mat_scalar(symbol: &str, deterministic: bool) -> Var {
        Var::new(
            &format!("x_{{{symbol}}}"),
            VarKind::MatScalar {
                symbol: symbol.to_string(),
                deterministic,
            },
        )
    }

    pub fn trace_atom(k: usize) -> Var {
        Var::new(&format!("T_{{{k}}}"), VarKind::Trace(k))
    }

    /// Looks up an already interned name.
    pub fn lookup(name: &str) -> Option<Var> {
        table().read().unwrap().get(name).cloned()
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn kind(&self) -> &VarKind {
        &self.0.kind
    }

    pub fn g_index(&self) -> Option<(usize, usize)> {
        match self.0.kind {
            VarKind::GEntry(i, j) => Some((i, j)),
            _ => None,
        }
    }

    pub fn is_g(&self) -> bool {
        matches!(self.0.kind, VarKind::GEntry(..))
    }

    pub fn is_deterministic_matrix(&self) -> bool {
        matches!(
            self.0.kind,
            VarKind::MatScalar {
                deterministic: true,
                ..
            }
        )
    }

    /// Short kind tag used by the JSON schema.
    pub fn kind_tag(&self) -> &'static str {
        match self.0.kind {
            VarKind::Dim => "dim",
            VarKind::Const => "const",
            VarKind::GEntry(..) => "g",
            VarKind::MatScalar {
                deterministic: true,
                ..
            } => "det",
            VarKind::MatScalar {
                deterministic: false,
                ..
            } => "rand",
            VarKind::Trace(_) => "trace",
        }
    }

    /// Inverse of [`Var::kind_tag`]; the name carries any index payload.
    pub fn from_tag(name: &str, tag: &str) -> Option<Var> {
        let inner = |prefix: &str| {
            name.strip_prefix(prefix)
                .and_then(|s| s.strip_suffix('}'))
                .map(str::to_string)
        };
        match tag {
            "dim" => Some(Var::dim(name)),
            "const" => Some(Var::constant(name)),
            "g" => {
                let body = inner("G_{")?;
                let (a, b) = body.split_once(',')?;
                Some(Var::g(a.trim().parse().ok()?, b.trim().parse().ok()?))
            }
            "det" => Some(Var::mat_scalar(&inner("x_{")?, true)),
            "rand" => Some(Var::mat_scalar(&inner("x_{")?, false)),
            "trace" => Some(Var::trace_atom(inner("T_{")?.parse().ok()?)),
            _ => None,
        }
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Var {}

impl Hash for Var {
    fn hash<H: Hasher>(&self, state: &mut H) {
        (Arc::as_ptr(&self.0) as usize).hash(state)
    }
}

impl Ord for Var {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            Ordering::Equal
        } else {
            self.0.name.cmp(&other.0.name)
        }
    }
}

impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.name)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.name)
    }
}
