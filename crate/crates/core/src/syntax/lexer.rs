use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {msg}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// Lowercase-initial identifier; may contain interior hyphens (`see-wolf`).
    Ident(String),
    /// Uppercase- or underscore-initial identifier.
    Var(String),
    Int(i64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Dot,
    Slash,
    Amp,
    Bar,
    Tilde,
    Arrow,
    LeadsTo,
    Implies,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    Plus,
    Minus,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) | Tok::Var(s) => return write!(f, "`{s}`"),
            Tok::Int(n) => return write!(f, "`{n}`"),
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::Slash => "/",
            Tok::Amp => "&",
            Tok::Bar => "|",
            Tok::Tilde => "~",
            Tok::Arrow => "->",
            Tok::LeadsTo => "~>",
            Tok::Implies => "=>",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Eof => return f.write_str("end of input"),
        };
        write!(f, "`{s}`")
    }
}

#[derive(Debug, Clone)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(src: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let bump = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            bump(1, &mut i, &mut col);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let tok2 = match two.as_str() {
            "->" => Some(Tok::Arrow),
            "~>" => Some(Tok::LeadsTo),
            "=>" => Some(Tok::Implies),
            "<=" => Some(Tok::Le),
            ">=" => Some(Tok::Ge),
            "!=" => Some(Tok::Ne),
            _ => None,
        };
        if let Some(t) = tok2 {
            out.push(Spanned { tok: t, line: l0, col: c0 });
            bump(2, &mut i, &mut col);
            continue;
        }
        let tok1 = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            ':' => Some(Tok::Colon),
            '.' => Some(Tok::Dot),
            '/' => Some(Tok::Slash),
            '&' => Some(Tok::Amp),
            '|' => Some(Tok::Bar),
            '~' => Some(Tok::Tilde),
            '<' => Some(Tok::Lt),
            '>' => Some(Tok::Gt),
            '=' => Some(Tok::Eq),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            _ => None,
        };
        if let Some(t) = tok1 {
            out.push(Spanned { tok: t, line: l0, col: c0 });
            bump(1, &mut i, &mut col);
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let n = s.parse::<i64>().map_err(|_| SyntaxError { line: l0, col: c0, msg: format!("integer `{s}` out of range") })?;
            out.push(Spanned { tok: Tok::Int(n), line: l0, col: c0 });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            let lower = c.is_lowercase();
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let hyphen = lower && d == '-' && chars.get(i + 1).is_some_and(|n| n.is_alphabetic());
                if d.is_alphanumeric() || d == '_' || hyphen {
                    i += 1;
                } else {
                    break;
                }
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Spanned { tok: if lower { Tok::Ident(s) } else { Tok::Var(s) }, line: l0, col: c0 });
            continue;
        }
        return Err(SyntaxError { line: l0, col: c0, msg: format!("unexpected character `{c}`") });
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn hyphenated_names_and_offsets() {
        assert_eq!(
            toks("cry-wolf(T+1) ~in-stock(I, T-1)"),
            vec![
                Tok::Ident("cry-wolf".into()),
                Tok::LParen,
                Tok::Var("T".into()),
                Tok::Plus,
                Tok::Int(1),
                Tok::RParen,
                Tok::Tilde,
                Tok::Ident("in-stock".into()),
                Tok::LParen,
                Tok::Var("I".into()),
                Tok::Comma,
                Tok::Var("T".into()),
                Tok::Minus,
                Tok::Int(1),
                Tok::RParen,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn arrows_do_not_glue_to_idents() {
        assert_eq!(toks("false->x"), vec![Tok::Ident("false".into()), Tok::Arrow, Tok::Ident("x".into()), Tok::Eof]);
    }

    #[test]
    fn reports_position() {
        let e = lex("a\n  $").unwrap_err();
        assert_eq!((e.line, e.col), (2, 3));
    }
}
