use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Punct(char),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let bump = |i: &mut usize, line: &mut usize, col: &mut usize| {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        };
        if c.is_whitespace() {
            bump(&mut i, &mut line, &mut col);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                bump(&mut i, &mut line, &mut col);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                bump(&mut i, &mut line, &mut col);
            }
            out.push(Token { tok: Tok::Ident(s), line: l0, col: c0 });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                s.push(chars[i]);
                bump(&mut i, &mut line, &mut col);
            }
            if s.matches('.').count() > 1 {
                return Err(Error::parse(l0, c0, format!("malformed number {s:?}")));
            }
            out.push(Token { tok: Tok::Number(s), line: l0, col: c0 });
            continue;
        }
        if c == '"' {
            bump(&mut i, &mut line, &mut col);
            let mut s = String::new();
            while i < chars.len() && chars[i] != '"' {
                s.push(chars[i]);
                bump(&mut i, &mut line, &mut col);
            }
            if i >= chars.len() {
                return Err(Error::parse(l0, c0, "unterminated string"));
            }
            bump(&mut i, &mut line, &mut col);
            out.push(Token { tok: Tok::Str(s), line: l0, col: c0 });
            continue;
        }
        if "+-*/^'(),;:=".contains(c) {
            out.push(Token { tok: Tok::Punct(c), line: l0, col: c0 });
            bump(&mut i, &mut line, &mut col);
            continue;
        }
        return Err(Error::parse(l0, c0, format!("unexpected character {c:?}")));
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
