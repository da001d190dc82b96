//! Phase-space expressions: sums of terms `c·x^a·p^b`, where a term may also
//! carry the named factor `gauss` (`e^{−x²−p²}`).
//!
//! ```text
//! expr   := ["+" | "-"] term (("+" | "-") term)*
//! term   := factor (["*"] factor)*
//! factor := number | ("x" | "p") ["^" integer] | "gauss"
//! ```

use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message} at position {position}")]
pub struct ParseError {
    /// Zero-based character offset.
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coeff: f64,
    pub x_pow: u32,
    pub p_pow: u32,
    pub gauss: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub terms: Vec<Term>,
}

impl Expr {
    pub fn eval(&self, x: f64, p: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let g = if t.gauss { (-x * x - p * p).exp() } else { 1.0 };
                t.coeff * x.powi(t.x_pow as i32) * p.powi(t.p_pow as i32) * g
            })
            .sum()
    }

    /// Total degree when every term is a plain monomial.
    pub fn polynomial_degree(&self) -> Option<usize> {
        if self.terms.iter().any(|t| t.gauss) {
            return None;
        }
        Some(self.terms.iter().map(|t| (t.x_pow + t.p_pow) as usize).max().unwrap_or(0))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{}", t.coeff)?;
            if t.x_pow > 0 {
                write!(f, "*x^{}", t.x_pow)?;
            }
            if t.p_pow > 0 {
                write!(f, "*p^{}", t.p_pow)?;
            }
            if t.gauss {
                f.write_str("*gauss")?;
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    i: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.i < self.chars.len() && self.chars[self.i].1.is_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.i).map(|c| c.1)
    }

    fn pos(&self) -> usize {
        self.chars.get(self.i).map_or(self.src.chars().count(), |_| self.i)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { position: self.pos(), message: message.into() })
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let start = self.i;
        while self.i < self.chars.len() {
            let c = self.chars[self.i].1;
            let exp_sign = (c == '+' || c == '-')
                && self.i > start
                && matches!(self.chars[self.i - 1].1, 'e' | 'E');
            if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                self.i += 1;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.i].iter().map(|c| c.1).collect();
        text.parse().map_err(|_| ParseError { position: start, message: format!("malformed number '{text}'") })
    }

    fn power(&mut self) -> Result<u32, ParseError> {
        if self.peek() != Some('^') {
            return Ok(1);
        }
        self.i += 1;
        self.skip_ws();
        let start = self.i;
        while self.i < self.chars.len() && self.chars[self.i].1.is_ascii_digit() {
            self.i += 1;
        }
        if start == self.i {
            return self.err("expected a non-negative integer exponent");
        }
        let text: String = self.chars[start..self.i].iter().map(|c| c.1).collect();
        text.parse().map_err(|_| ParseError { position: start, message: format!("exponent '{text}' too large") })
    }

    fn word(&mut self) -> String {
        let start = self.i;
        while self.i < self.chars.len() && self.chars[self.i].1.is_ascii_alphabetic() {
            self.i += 1;
        }
        self.chars[start..self.i].iter().map(|c| c.1).collect()
    }

    fn term(&mut self, sign: f64) -> Result<Term, ParseError> {
        let mut t = Term { coeff: sign, x_pow: 0, p_pow: 0, gauss: false };
        let mut factors = 0;
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_digit() || c == '.' => t.coeff *= self.number()?,
                Some(c) if c.is_ascii_alphabetic() => {
                    let at = self.i;
                    match self.word().as_str() {
                        "x" => t.x_pow += self.power()?,
                        "p" => t.p_pow += self.power()?,
                        "gauss" if !t.gauss => t.gauss = true,
                        "gauss" => return Err(ParseError { position: at, message: "gauss appears twice in one term".into() }),
                        w => return Err(ParseError { position: at, message: format!("unknown name '{w}'") }),
                    }
                }
                Some(c) => {
                    if factors == 0 {
                        return self.err(format!("unexpected '{c}'"));
                    }
                    break;
                }
                None => {
                    if factors == 0 {
                        return self.err("unexpected end of expression");
                    }
                    break;
                }
            }
            factors += 1;
            if self.peek() == Some('*') {
                self.i += 1;
                if matches!(self.peek(), None | Some('+') | Some('-') | Some('*')) {
                    return self.err("expected a factor after '*'");
                }
            }
        }
        if !t.coeff.is_finite() {
            return self.err("coefficient is not finite");
        }
        Ok(t)
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut ps = Parser { chars: src.chars().enumerate().collect(), i: 0, src };
    let mut terms = Vec::new();
    let mut sign = 1.0;
    if let Some(c @ ('+' | '-')) = ps.peek() {
        sign = if c == '-' { -1.0 } else { 1.0 };
        ps.i += 1;
    }
    loop {
        terms.push(ps.term(sign)?);
        match ps.peek() {
            None => break,
            Some('+') => sign = 1.0,
            Some('-') => sign = -1.0,
            Some(c) => return ps.err(format!("unexpected '{c}'")),
        }
        ps.i += 1;
    }
    Ok(Expr { terms })
}
