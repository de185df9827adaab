use num_bigint::BigInt;
use num_traits::Num;

use super::ast::SourceLocation;
use super::FrontendError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(BigInt),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of file".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub loc: SourceLocation,
}

// Longest first so that maximal munch works with a simple prefix scan.
const PUNCT: &[&str] = &[
    "&&", "||", "==", "!=", "<=", ">=", "=>", "+=", "-=", "*=", "/=", "%=", "++", "--", "{", "}",
    "(", ")", "[", "]", ";", ",", ".", "=", "<", ">", "+", "-", "*", "/", "%", "!", "?", ":", "&",
    "|", "^", "~",
];

pub struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
    path: &'a str,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str, path: &'a str) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
            path,
        }
    }

    pub fn tokenize(mut self) -> Result<Vec<Token>, FrontendError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let start = self.mark();
            if self.pos >= self.bytes.len() {
                out.push(Token {
                    tok: Tok::Eof,
                    loc: self.loc_from(start),
                });
                return Ok(out);
            }
            let c = self.bytes[self.pos];
            let tok = if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
                let word = self.take_while(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'$');
                if word == "pragma" {
                    self.skip_pragma(start)?;
                    continue;
                }
                Tok::Ident(word.to_string())
            } else if c.is_ascii_digit() {
                self.number(start)?
            } else if c == b'"' || c == b'\'' {
                self.string(start, c)?
            } else {
                let rest = &self.src[self.pos..];
                match PUNCT.iter().find(|p| rest.starts_with(**p)) {
                    Some(p) => {
                        self.advance(p.len());
                        Tok::Punct(p)
                    }
                    None => {
                        let ch = rest.chars().next().unwrap_or('?');
                        return Err(self.syntax(start, "a token", &format!("`{ch}`")));
                    }
                }
            };
            out.push(Token {
                tok,
                loc: self.loc_from(start),
            });
        }
    }

    fn mark(&self) -> (usize, u32, u32) {
        (self.pos, self.line, self.col)
    }

    fn loc_from(&self, (pos, line, col): (usize, u32, u32)) -> SourceLocation {
        SourceLocation::new(line, col, pos as u32, (self.pos - pos) as u32)
    }

    fn syntax(
        &self,
        (_, line, col): (usize, u32, u32),
        expected: &str,
        found: &str,
    ) -> FrontendError {
        FrontendError::Syntax {
            path: self.path.to_string(),
            line,
            column: col,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    fn advance(&mut self, n: usize) {
        for _ in 0..n {
            if self.pos >= self.bytes.len() {
                return;
            }
            let b = self.bytes[self.pos];
            self.pos += 1;
            if b == b'\n' {
                self.line += 1;
                self.col = 1;
            } else if b & 0xC0 != 0x80 {
                // count characters, not UTF-8 continuation bytes
                self.col += 1;
            }
        }
    }

    fn take_while(&mut self, pred: impl Fn(u8) -> bool) -> &'a str {
        let start = self.pos;
        while self.pos < self.bytes.len() && pred(self.bytes[self.pos]) {
            self.advance(1);
        }
        &self.src[start..self.pos]
    }

    fn skip_trivia(&mut self) -> Result<(), FrontendError> {
        loop {
            let rest = &self.src[self.pos..];
            if rest.starts_with("//") {
                self.take_while(|b| b != b'\n');
            } else if let Some(body) = rest.strip_prefix("/*") {
                let start = self.mark();
                match body.find("*/") {
                    Some(end) => self.advance(end + 4),
                    None => return Err(self.syntax(start, "`*/`", "end of file")),
                }
            } else if rest.starts_with(|c: char| c.is_whitespace()) {
                let c = rest.chars().next().unwrap();
                self.advance(c.len_utf8());
            } else {
                return Ok(());
            }
        }
    }

    fn skip_pragma(&mut self, start: (usize, u32, u32)) -> Result<(), FrontendError> {
        self.take_while(|b| b != b';');
        if self.pos >= self.bytes.len() {
            return Err(self.syntax(start, "`;` after pragma", "end of file"));
        }
        self.advance(1);
        Ok(())
    }

    fn number(&mut self, start: (usize, u32, u32)) -> Result<Tok, FrontendError> {
        let rest = &self.src[self.pos..];
        let (digits, radix) = if rest.starts_with("0x") || rest.starts_with("0X") {
            self.advance(2);
            (self.take_while(|b| b.is_ascii_hexdigit() || b == b'_'), 16)
        } else {
            (self.take_while(|b| b.is_ascii_digit() || b == b'_'), 10)
        };
        if self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'.')
        {
            let found = self.src[self.pos..].chars().next().unwrap();
            return Err(self.syntax(start, "end of number literal", &format!("`{found}`")));
        }
        let cleaned: String = digits.chars().filter(|c| *c != '_').collect();
        BigInt::from_str_radix(&cleaned, radix)
            .map(Tok::Number)
            .map_err(|_| self.syntax(start, "number literal", &format!("`{digits}`")))
    }

    fn string(&mut self, start: (usize, u32, u32), quote: u8) -> Result<Tok, FrontendError> {
        self.advance(1);
        let body = self.take_while(|b| b != quote && b != b'\n');
        if self.pos >= self.bytes.len() || self.bytes[self.pos] != quote {
            return Err(self.syntax(start, "closing quote", "end of line"));
        }
        self.advance(1);
        Ok(Tok::Str(body.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        Lexer::new(src, "t")
            .tokenize()
            .unwrap()
            .into_iter()
            .map(|t| t.tok)
            .collect()
    }

    #[test]
    fn skips_comments_and_pragma() {
        let t = toks("pragma solidity ^0.4.24; // hi\n/* block\n */ contract");
        assert_eq!(t, vec![Tok::Ident("contract".into()), Tok::Eof]);
    }

    #[test]
    fn maximal_munch() {
        let t = toks("a+=b++<=c");
        assert_eq!(
            t,
            vec![
                Tok::Ident("a".into()),
                Tok::Punct("+="),
                Tok::Ident("b".into()),
                Tok::Punct("++"),
                Tok::Punct("<="),
                Tok::Ident("c".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn hex_and_underscored_numbers() {
        let t = toks("0xDEADBEEF 1_000");
        assert_eq!(t[0], Tok::Number(BigInt::from(3735928559u64)));
        assert_eq!(t[1], Tok::Number(BigInt::from(1000)));
    }

    #[test]
    fn locations_track_lines() {
        let t = Lexer::new("a\n  b", "t").tokenize().unwrap();
        assert_eq!((t[1].loc.line, t[1].loc.column), (2, 3));
    }

    #[test]
    fn unterminated_comment_is_error() {
        assert!(Lexer::new("/* nope", "t").tokenize().is_err());
    }
}
