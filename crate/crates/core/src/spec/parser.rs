//! Recursive-descent parser for the specification language.
//!
//! ```text
//! phi  ::= term ('&' term)*
//! term ::= 'next' ('^' INT)? '(' ID ')'
//!        | 'always' '[' INT ',' INT ']' '(' ID ')'
//!        | 'eventually' '[' INT ',' INT ']' '(' ID ')'
//!        | '(' phi ')'
//!        | 'true'
//!        | ID                      -- region at step 0
//! ```
//!
//! The empty string is the empty conjunction.

use super::{Formula, SpecError};

pub(super) struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    pub(super) fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    pub(super) fn parse(mut self) -> Result<Formula, SpecError> {
        self.skip_ws();
        if self.pos == self.src.len() {
            return Ok(Formula::And(Vec::new()));
        }
        let f = self.conjunction()?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(f)
    }

    fn error(&self, msg: &str) -> SpecError {
        SpecError::Syntax {
            position: self.pos,
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<(), SpecError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<String, SpecError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return Err(self.error("expected identifier")),
        }
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn int(&mut self) -> Result<usize, SpecError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer"));
        }
        self.src[start..self.pos]
            .parse()
            .map_err(|_| SpecError::Syntax {
                position: start,
                message: "integer too large".into(),
            })
    }

    fn conjunction(&mut self) -> Result<Formula, SpecError> {
        let mut parts = vec![self.term()?];
        loop {
            self.skip_ws();
            if self.peek() == Some('&') {
                self.pos += 1;
                parts.push(self.term()?);
            } else {
                break;
            }
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        })
    }

    fn interval(&mut self) -> Result<(usize, usize), SpecError> {
        self.expect('[')?;
        let from = self.int()?;
        self.expect(',')?;
        let to = self.int()?;
        self.expect(']')?;
        Ok((from, to))
    }

    fn region_arg(&mut self) -> Result<String, SpecError> {
        self.expect('(')?;
        let id = self.ident()?;
        self.expect(')')?;
        Ok(id)
    }

    fn term(&mut self) -> Result<Formula, SpecError> {
        self.skip_ws();
        if self.peek() == Some('(') {
            self.pos += 1;
            let inner = self.conjunction()?;
            self.expect(')')?;
            return Ok(inner);
        }
        let start = self.pos;
        let word = self.ident()?;
        match word.as_str() {
            "next" => {
                self.skip_ws();
                let step = if self.peek() == Some('^') {
                    self.pos += 1;
                    self.int()?
                } else {
                    1
                };
                Ok(Formula::Next {
                    step,
                    region: self.region_arg()?,
                })
            }
            "always" => {
                let (from, to) = self.interval()?;
                Ok(Formula::Always {
                    from,
                    to,
                    region: self.region_arg()?,
                })
            }
            "eventually" => {
                let (from, to) = self.interval()?;
                Ok(Formula::Eventually {
                    from,
                    to,
                    region: self.region_arg()?,
                })
            }
            "true" => Ok(Formula::And(Vec::new())),
            _ => {
                let _ = start;
                Ok(Formula::Next {
                    step: 0,
                    region: word,
                })
            }
        }
    }
}
