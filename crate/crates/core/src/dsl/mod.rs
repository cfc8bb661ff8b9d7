//! Expression language for declaring random-matrix problems.
//!
//! ```text
//! dim n, d;
//! const lambda, phi;
//! rand Z : n x d;
//! det Sigma_sqrt : d x d;
//! var Z = 1/(n*lambda);
//! subs d = n*phi;
//! rewrite Sigma_sqrt^2 = Sigma;
//! let K = Sigma_sqrt * Z' * Z * Sigma_sqrt + I(d);
//! target trace_of inv(K);
//! ```
//!
//! `'` is transpose, `inv(.)` the inverse, `I(dim)` an identity and
//! `zeros(r, c)` a zero block. A target may instead point at a pencil file:
//! `target pencil "bias.json" at 3, 8;`.

pub mod lexer;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::symcore::{
    DimSymbol, MatrixExpr, MatrixKind, MatrixSymbol, Rational, ScalarExpr, SubstitutionMap, Var,
};
use lexer::{lex, Tok, Token};

/// Names visible to expressions.
#[derive(Clone, Debug, Default)]
pub struct Scope {
    pub dims: BTreeSet<String>,
    pub consts: BTreeSet<String>,
    pub symbols: BTreeMap<String, Arc<MatrixSymbol>>,
    pub lets: HashMap<String, Value>,
    /// Dimension used by a bare `I` (pencil blocks only).
    pub default_identity: Option<DimSymbol>,
}

impl Scope {
    pub fn declare_symbol(&mut self, s: Arc<MatrixSymbol>) {
        self.dims.insert(s.rows.name().to_string());
        self.dims.insert(s.cols.name().to_string());
        self.symbols.insert(s.name.clone(), s);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Scalar(ScalarExpr),
    Matrix(MatrixExpr),
}

/// `base^power = target` between deterministic matrices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rewrite {
    pub base: String,
    pub power: u32,
    pub target: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    /// Normalized trace of a square matrix expression.
    Trace(MatrixExpr),
    /// Entry `(i, j)` of the inverse of a stored pencil.
    Pencil { path: String, i: usize, j: usize },
}

#[derive(Clone, Debug)]
pub struct ExpressionSource {
    pub scope: Scope,
    pub variances: BTreeMap<String, ScalarExpr>,
    pub subs: Vec<(Var, ScalarExpr)>,
    pub rewrites: Vec<Rewrite>,
    pub target: Target,
}

impl ExpressionSource {
    pub fn subs_map(&self) -> SubstitutionMap {
        self.subs.iter().cloned().collect()
    }
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    scope: &'a mut Scope,
}

fn err_at(t: &Token, msg: impl Into<String>) -> Error {
    Error::parse(t.line, t.col, msg)
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier {s:?}"),
        Tok::Number(s) => format!("number {s}"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::Punct(c) => format!("'{c}'"),
        Tok::Eof => "end of input".into(),
    }
}

pub fn parse_number(s: &str) -> Option<Rational> {
    match s.split_once('.') {
        None => Some(Rational::from_integer(s.parse::<BigInt>().ok()?)),
        Some((a, b)) => {
            let digits = format!("{a}{b}");
            let num: BigInt = if digits.is_empty() { return None } else { digits.parse().ok()? };
            let den = num_traits::pow(BigInt::from(10), b.len());
            Some(Rational::new(num, den))
        }
    }
}

impl<'a> Parser<'a> {
    fn new(src: &str, scope: &'a mut Scope) -> Result<Parser<'a>> {
        Ok(Parser { toks: lex(src)?, pos: 0, scope })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, c: char) -> bool {
        self.peek().tok == Tok::Punct(c)
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.is_punct(c) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<()> {
        let t = self.next();
        if t.tok == Tok::Punct(c) {
            Ok(())
        } else {
            Err(err_at(&t, format!("expected '{c}', found {}", describe(&t.tok))))
        }
    }

    fn ident(&mut self) -> Result<(String, Token)> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            other => Err(err_at(&t, format!("expected a name, found {}", describe(other)))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let (s, t) = self.ident()?;
        if s == kw {
            Ok(())
        } else {
            Err(err_at(&t, format!("expected '{kw}', found {s:?}")))
        }
    }

    fn integer(&mut self) -> Result<usize> {
        let t = self.next();
        match &t.tok {
            Tok::Number(s) => s
                .parse()
                .map_err(|_| err_at(&t, format!("expected an integer, found {s}"))),
            other => Err(err_at(&t, format!("expected an integer, found {}", describe(other)))),
        }
    }

    fn at_end(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    // ------------------------------------------------------------ expressions

    fn expr(&mut self) -> Result<Value> {
        let start = self.peek().clone();
        let mut terms = vec![self.term()?];
        loop {
            if self.eat_punct('+') {
                terms.push(self.term()?);
            } else if self.eat_punct('-') {
                let t = self.term()?;
                terms.push(negate(t));
            } else {
                break;
            }
        }
        if terms.len() == 1 {
            return Ok(terms.pop().unwrap());
        }
        let any_matrix = terms.iter().any(|t| matches!(t, Value::Matrix(_)));
        if !any_matrix {
            let mut acc = ScalarExpr::zero();
            for t in terms {
                if let Value::Scalar(s) = t {
                    acc = acc.add(&s);
                }
            }
            return Ok(Value::Scalar(acc));
        }
        let mut mats = Vec::new();
        for t in terms {
            match t {
                Value::Matrix(m) => mats.push(m),
                Value::Scalar(s) if s.is_zero() => {}
                Value::Scalar(_) => {
                    return Err(err_at(
                        &start,
                        "cannot add a scalar to a matrix (use c * I(dim))",
                    ))
                }
            }
        }
        Ok(Value::Matrix(if mats.len() == 1 {
            mats.pop().unwrap()
        } else {
            MatrixExpr::Sum(mats)
        }))
    }

    fn term(&mut self) -> Result<Value> {
        let mut coeff = ScalarExpr::one();
        let mut mats: Vec<MatrixExpr> = Vec::new();
        let mut first = true;
        loop {
            let divide = if first {
                false
            } else if self.eat_punct('*') {
                false
            } else if self.is_punct('/') {
                self.next();
                true
            } else {
                break;
            };
            first = false;
            let at = self.peek().clone();
            match self.unary()? {
                Value::Scalar(s) => {
                    coeff = if divide {
                        coeff.div(&s).map_err(|_| err_at(&at, "division by zero"))?
                    } else {
                        coeff.mul(&s)
                    };
                }
                Value::Matrix(_) if divide => {
                    return Err(err_at(&at, "cannot divide by a matrix (use inv(.))"))
                }
                Value::Matrix(m) => mats.push(m),
            }
        }
        if mats.is_empty() {
            return Ok(Value::Scalar(coeff));
        }
        let body = if mats.len() == 1 {
            mats.pop().unwrap()
        } else {
            MatrixExpr::Product(mats)
        };
        Ok(Value::Matrix(if coeff.is_one() {
            body
        } else {
            MatrixExpr::ScalarMul(coeff, Box::new(body))
        }))
    }

    fn unary(&mut self) -> Result<Value> {
        if self.eat_punct('-') {
            let v = self.unary()?;
            return Ok(negate(v));
        }
        if self.eat_punct('+') {
            return self.unary();
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Value> {
        let mut v = self.primary()?;
        loop {
            if self.is_punct('\'') {
                let t = self.next();
                v = match v {
                    Value::Matrix(m) => Value::Matrix(m.t()),
                    Value::Scalar(_) => return Err(err_at(&t, "transpose of a scalar")),
                };
            } else if self.is_punct('^') {
                let t = self.next();
                let neg = self.eat_punct('-');
                let e = self.integer()? as i32;
                let e = if neg { -e } else { e };
                v = match v {
                    Value::Scalar(s) => Value::Scalar(
                        s.pow(e).map_err(|_| err_at(&t, "zero raised to a negative power"))?,
                    ),
                    Value::Matrix(m) => {
                        if e == 0 {
                            return Err(err_at(&t, "matrix power 0 is ambiguous; use I(dim)"));
                        }
                        let base = if e < 0 { m.inv() } else { m };
                        let k = e.unsigned_abs() as usize;
                        Value::Matrix(if k == 1 {
                            base
                        } else {
                            MatrixExpr::Product(vec![base; k])
                        })
                    }
                };
            } else {
                break;
            }
        }
        Ok(v)
    }

    fn primary(&mut self) -> Result<Value> {
        let t = self.next();
        match &t.tok {
            Tok::Number(s) => parse_number(s)
                .map(|q| Value::Scalar(ScalarExpr::rational(q)))
                .ok_or_else(|| err_at(&t, format!("malformed number {s}"))),
            Tok::Punct('(') => {
                let v = self.expr()?;
                self.expect_punct(')')?;
                Ok(v)
            }
            Tok::Ident(name) => {
                let name = name.clone();
                if self.is_punct('(') {
                    return self.call(&name, &t);
                }
                self.resolve(&name, &t)
            }
            other => Err(err_at(&t, format!("unexpected {}", describe(other)))),
        }
    }

    fn dim_arg(&mut self) -> Result<DimSymbol> {
        let (d, t) = self.ident()?;
        if !self.scope.dims.contains(&d) {
            return Err(err_at(&t, format!("undeclared dimension {d:?}")));
        }
        Ok(DimSymbol::new(&d))
    }

    fn call(&mut self, name: &str, at: &Token) -> Result<Value> {
        self.expect_punct('(')?;
        let v = match name {
            "inv" => match self.expr()? {
                Value::Matrix(m) => Value::Matrix(m.inv()),
                Value::Scalar(s) => Value::Scalar(
                    s.inv().map_err(|_| err_at(at, "inverse of zero"))?,
                ),
            },
            "I" => Value::Matrix(MatrixExpr::Identity(self.dim_arg()?)),
            "zeros" => {
                let r = self.dim_arg()?;
                self.expect_punct(',')?;
                let c = self.dim_arg()?;
                Value::Matrix(MatrixExpr::Zero(r, c))
            }
            "T" | "transpose" => match self.expr()? {
                Value::Matrix(m) => Value::Matrix(m.t()),
                Value::Scalar(_) => return Err(err_at(at, "transpose of a scalar")),
            },
            other => return Err(err_at(at, format!("unknown function {other:?}"))),
        };
        self.expect_punct(')')?;
        Ok(v)
    }

    fn resolve(&self, name: &str, at: &Token) -> Result<Value> {
        if let Some(v) = self.scope.lets.get(name) {
            return Ok(v.clone());
        }
        if let Some(s) = self.scope.symbols.get(name) {
            return Ok(Value::Matrix(MatrixExpr::Symbol(s.clone())));
        }
        if self.scope.dims.contains(name) {
            return Ok(Value::Scalar(ScalarExpr::var(Var::dim(name))));
        }
        if self.scope.consts.contains(name) {
            return Ok(Value::Scalar(ScalarExpr::var(Var::constant(name))));
        }
        if name == "I" {
            if let Some(d) = &self.scope.default_identity {
                return Ok(Value::Matrix(MatrixExpr::Identity(d.clone())));
            }
        }
        Err(err_at(at, format!("undeclared symbol {name:?}")))
    }

    fn matrix_expr(&mut self) -> Result<MatrixExpr> {
        let at = self.peek().clone();
        match self.expr()? {
            Value::Matrix(m) => {
                m.shape()?;
                Ok(m)
            }
            Value::Scalar(_) => Err(err_at(&at, "expected a matrix expression")),
        }
    }

    fn scalar_expr(&mut self) -> Result<ScalarExpr> {
        let at = self.peek().clone();
        match self.expr()? {
            Value::Scalar(s) => Ok(s),
            Value::Matrix(_) => Err(err_at(&at, "expected a scalar expression")),
        }
    }

    // ------------------------------------------------------------ statements

    fn name_list(&mut self) -> Result<Vec<(String, Token)>> {
        let mut out = vec![self.ident()?];
        while self.eat_punct(',') {
            out.push(self.ident()?);
        }
        Ok(out)
    }

    fn fresh(&self, name: &str, at: &Token) -> Result<()> {
        let s = &self.scope;
        if s.dims.contains(name)
            || s.consts.contains(name)
            || s.symbols.contains_key(name)
            || s.lets.contains_key(name)
        {
            return Err(err_at(at, format!("{name:?} is already declared")));
        }
        Ok(())
    }

    fn matrix_decl(&mut self, kind: MatrixKind) -> Result<()> {
        loop {
            let mut names = Vec::new();
            loop {
                let (name, t) = self.ident()?;
                self.fresh(&name, &t)?;
                names.push(name);
                if !self.eat_punct(',') {
                    break;
                }
            }
            self.expect_punct(':')?;
            let rows = self.dim_arg()?;
            self.keyword("x")?;
            let cols = self.dim_arg()?;
            for name in names {
                let sym = MatrixSymbol::new(&name, rows.name(), cols.name(), kind);
                self.scope.symbols.insert(name, sym);
            }
            if !self.eat_punct(',') {
                return Ok(());
            }
        }
    }

    fn program(&mut self) -> Result<ExpressionSource> {
        let mut variances = BTreeMap::new();
        let mut subs = Vec::new();
        let mut rewrites = Vec::new();
        let mut target = None;
        while !self.at_end() {
            let (kw, kt) = self.ident()?;
            match kw.as_str() {
                "dim" => {
                    for (n, t) in self.name_list()? {
                        self.fresh(&n, &t)?;
                        self.scope.dims.insert(n);
                    }
                }
                "const" => {
                    for (n, t) in self.name_list()? {
                        self.fresh(&n, &t)?;
                        self.scope.consts.insert(n);
                    }
                }
                "rand" => self.matrix_decl(MatrixKind::Random)?,
                "det" => self.matrix_decl(MatrixKind::Deterministic)?,
                "var" => {
                    let (n, t) = self.ident()?;
                    match self.scope.symbols.get(&n) {
                        Some(s) if s.is_random() => {}
                        Some(_) => return Err(err_at(&t, format!("{n:?} is not a random matrix"))),
                        None => return Err(err_at(&t, format!("undeclared symbol {n:?}"))),
                    }
                    self.expect_punct('=')?;
                    variances.insert(n, self.scalar_expr()?);
                }
                "subs" => {
                    let (n, t) = self.ident()?;
                    let v = if self.scope.dims.contains(&n) {
                        Var::dim(&n)
                    } else if self.scope.consts.contains(&n) {
                        Var::constant(&n)
                    } else {
                        return Err(err_at(&t, format!("undeclared symbol {n:?}")));
                    };
                    self.expect_punct('=')?;
                    subs.push((v, self.scalar_expr()?));
                }
                "rewrite" => {
                    let (base, t) = self.ident()?;
                    self.expect_punct('^')?;
                    let power = self.integer()? as u32;
                    self.expect_punct('=')?;
                    let (tgt, t2) = self.ident()?;
                    for (n, tok) in [(&base, &t), (&tgt, &t2)] {
                        match self.scope.symbols.get(n) {
                            Some(s) if !s.is_random() => {}
                            _ => {
                                return Err(err_at(
                                    tok,
                                    format!("{n:?} is not a declared deterministic matrix"),
                                ))
                            }
                        }
                    }
                    rewrites.push(Rewrite { base, power, target: tgt });
                }
                "let" => {
                    let (n, t) = self.ident()?;
                    self.fresh(&n, &t)?;
                    self.expect_punct('=')?;
                    let at = self.peek().clone();
                    let v = self.expr()?;
                    if let Value::Matrix(m) = &v {
                        m.shape().map_err(|e| err_at(&at, e.to_string()))?;
                    }
                    self.scope.lets.insert(n, v);
                }
                "target" | "pencil" => {
                    if target.is_some() {
                        return Err(err_at(&kt, "more than one target"));
                    }
                    let is_pencil = kw == "pencil"
                        || matches!(&self.peek().tok, Tok::Ident(s) if s == "pencil");
                    if is_pencil {
                        if kw == "target" {
                            self.next();
                        }
                        let t = self.next();
                        let Tok::Str(path) = t.tok.clone() else {
                            return Err(err_at(&t, "expected a quoted pencil path"));
                        };
                        self.keyword("at")?;
                        let i = self.integer()?;
                        self.expect_punct(',')?;
                        let j = self.integer()?;
                        target = Some(Target::Pencil { path, i, j });
                    } else {
                        if matches!(&self.peek().tok, Tok::Ident(s) if s == "trace_of") {
                            self.next();
                        }
                        let at = self.peek().clone();
                        let m = self.matrix_expr()?;
                        let (r, c) = m.shape()?;
                        if r != c {
                            return Err(err_at(
                                &at,
                                format!("trace of a non-square {r} x {c} expression"),
                            ));
                        }
                        target = Some(Target::Trace(m));
                    }
                }
                other => return Err(err_at(&kt, format!("unknown statement {other:?}"))),
            }
            self.expect_punct(';')?;
        }
        let target = target.ok_or_else(|| {
            let t = self.peek();
            err_at(t, "missing target statement")
        })?;
        Ok(ExpressionSource {
            scope: self.scope.clone(),
            variances,
            subs,
            rewrites,
            target,
        })
    }
}

fn negate(v: Value) -> Value {
    match v {
        Value::Scalar(s) => Value::Scalar(s.neg()),
        Value::Matrix(m) => Value::Matrix(MatrixExpr::ScalarMul(ScalarExpr::int(-1), Box::new(m))),
    }
}

/// Parses a full program.
pub fn parse(src: &str) -> Result<ExpressionSource> {
    let mut scope = Scope::default();
    Parser::new(src, &mut scope)?.program()
}

/// Parses one expression against an existing scope.
pub fn parse_expr(src: &str, scope: &Scope) -> Result<Value> {
    let mut scope = scope.clone();
    let mut p = Parser::new(src, &mut scope)?;
    let v = p.expr()?;
    if !p.at_end() {
        let t = p.peek();
        return Err(err_at(t, format!("unexpected {}", describe(&t.tok))));
    }
    Ok(v)
}

pub fn parse_matrix(src: &str, scope: &Scope) -> Result<MatrixExpr> {
    match parse_expr(src, scope)? {
        Value::Matrix(m) => {
            m.shape()?;
            Ok(m)
        }
        Value::Scalar(_) => Err(Error::parse(1, 1, "expected a matrix expression")),
    }
}

pub fn parse_scalar(src: &str, scope: &Scope) -> Result<ScalarExpr> {
    match parse_expr(src, scope)? {
        Value::Scalar(s) => Ok(s),
        Value::Matrix(_) => Err(Error::parse(1, 1, "expected a scalar expression")),
    }
}

/// Renders declarations plus a trace target back into source text.
pub fn render_program(src: &ExpressionSource) -> String {
    let mut out = String::new();
    let dims: Vec<&str> = src.scope.dims.iter().map(String::as_str).collect();
    if !dims.is_empty() {
        out.push_str(&format!("dim {};\n", dims.join(", ")));
    }
    let consts: Vec<&str> = src.scope.consts.iter().map(String::as_str).collect();
    if !consts.is_empty() {
        out.push_str(&format!("const {};\n", consts.join(", ")));
    }
    for s in src.scope.symbols.values() {
        let kw = if s.is_random() { "rand" } else { "det" };
        out.push_str(&format!("{kw} {} : {} x {};\n", s.name, s.rows, s.cols));
    }
    for (n, v) in &src.variances {
        out.push_str(&format!("var {n} = {};\n", crate::symcore::render::text(v)));
    }
    for (v, e) in &src.subs {
        out.push_str(&format!("subs {} = {};\n", v.name(), crate::symcore::render::text(e)));
    }
    for r in &src.rewrites {
        out.push_str(&format!("rewrite {}^{} = {};\n", r.base, r.power, r.target));
    }
    match &src.target {
        Target::Trace(m) => out.push_str(&format!("target trace_of {};\n", m.to_dsl())),
        Target::Pencil { path, i, j } => {
            out.push_str(&format!("target pencil \"{path}\" at {i}, {j};\n"))
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MP: &str = "dim n, d; const lambda, phi; rand Z : n x d; \
        var Z = 1/(n*lambda); subs d = n*phi; target trace_of inv(Z' * Z + I(d));";

    #[test]
    fn mp_source() {
        let src = parse(MP).unwrap();
        let z = src.scope.symbols["Z"].clone();
        let want = MatrixExpr::Symbol(z.clone())
            .t()
            .times(MatrixExpr::Symbol(z))
            .plus(MatrixExpr::identity("d"))
            .inv();
        assert_eq!(src.target, Target::Trace(want));
        assert_eq!(src.subs.len(), 1);
        let lam = ScalarExpr::var(Var::constant("lambda"));
        let n = ScalarExpr::var(Var::dim("n"));
        assert_eq!(src.variances["Z"], ScalarExpr::one().div(&n.mul(&lam)).unwrap());
    }

    #[test]
    fn undeclared_symbol_is_named() {
        let e = parse("dim n; target inv(W);").unwrap_err().to_string();
        assert!(e.contains("\"W\""), "{e}");
        assert!(e.contains("line 1"), "{e}");
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let e = parse("dim n, d; rand Z : n x d; target trace_of inv(Z * Z + I(d));").unwrap_err();
        assert!(matches!(e, Error::Shape { .. }), "{e}");
    }

    #[test]
    fn syntax_error_position() {
        let e = parse("dim n;\nconst lambda\nrand Z : n x n;").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, col: 1, .. }), "{e}");
    }

    #[test]
    fn pencil_target() {
        let src = parse("target pencil \"bias.json\" at 3, 8;").unwrap();
        assert_eq!(
            src.target,
            Target::Pencil { path: "bias.json".into(), i: 3, j: 8 }
        );
    }

    #[test]
    fn render_round_trip() {
        let text = "dim n, d; const lambda; rand Z : n x d; det S : d x d; \
            target trace_of inv(S * Z' * Z * S + lambda * (S * S)' - 2/3 * I(d));";
        let a = parse(text).unwrap();
        let b = parse(&render_program(&a)).unwrap();
        assert_eq!(a.target, b.target);
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_number("0.25"), Some(Rational::new(1.into(), 4.into())));
        assert!(parse_number("12").unwrap().is_integer());
    }
}
