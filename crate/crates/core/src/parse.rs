//! Recursive-descent parser for the index expression language.
//!
//! ```text
//! expr   := ["+"|"-"] term (("+"|"-") term)*
//! term   := item ("*" item)*
//! item   := coef | factor
//! coef   := rational | "(" poly ")" ["/" "(" poly ")"]
//! factor := "nd[" indices "](" factor ")" | symbol "[" indices "]"
//! index  := ["^"] ["%"] identifier
//! ```

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::coeff::{Coeff, Poly};
use crate::expr::{Expr, Factor, Index, Term};
use crate::symbols::{sym, IndexFamily, SYMBOLS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown symbol {name:?} at {line}:{col}")]
    UnknownSymbol { name: String, line: usize, col: usize },
    #[error("invalid expression: {0}")]
    Invalid(String),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn line_col(&self, pos: usize) -> (usize, usize) {
        let before = &self.src[..pos.min(self.src.len())];
        let line = before.iter().filter(|&&c| c == b'\n').count() + 1;
        let col = pos - before.iter().rposition(|&c| c == b'\n').map_or(0, |p| p + 1) + 1;
        (line, col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.line_col(self.pos);
        Err(ParseError::Syntax { line, col, msg: msg.into() })
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected {:?}", c as char))
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        (self.pos > start && self.src[start].is_ascii_alphabetic())
            .then(|| std::str::from_utf8(&self.src[start..self.pos]).unwrap())
            .or_else(|| {
                self.pos = start;
                None
            })
    }

    fn integer(&mut self) -> Option<BigInt> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        (self.pos > start).then(|| std::str::from_utf8(&self.src[start..self.pos]).unwrap().parse().unwrap())
    }

    /// `p` or `p/q`, unsigned.
    fn rational(&mut self) -> Result<Option<BigRational>, ParseError> {
        let Some(p) = self.integer() else { return Ok(None) };
        let save = self.pos;
        if self.eat(b'/') {
            match self.integer() {
                Some(q) if !q.is_zero() => return Ok(Some(BigRational::new(p, q))),
                Some(_) => return self.err("zero denominator"),
                None => self.pos = save,
            }
        }
        Ok(Some(BigRational::from_integer(p)))
    }

    fn poly(&mut self) -> Result<Poly, ParseError> {
        let mut acc = Poly::zero();
        let mut first = true;
        loop {
            let neg = if self.eat(b'-') {
                true
            } else if self.eat(b'+') || first {
                false
            } else {
                break;
            };
            first = false;
            let c = self.rational()?;
            let has_c = c.is_some();
            let mut mono = Poly::constant(c.unwrap_or_else(BigRational::one));
            if has_c && !self.eat(b'*') {
                acc = if neg { &acc - &mono } else { &acc + &mono };
                continue;
            }
            if self.ident() != Some("n") {
                return self.err("expected n");
            }
            let mut k = 1u32;
            if self.eat(b'^') {
                match self.integer().and_then(|k| u32::try_from(k).ok()) {
                    Some(e) => k = e,
                    None => return self.err("expected exponent"),
                }
            }
            for _ in 0..k {
                mono = &mono * &Poly::n();
            }
            acc = if neg { &acc - &mono } else { &acc + &mono };
        }
        Ok(acc)
    }

    fn coef(&mut self) -> Result<Option<Coeff>, ParseError> {
        if let Some(r) = self.rational()? {
            return Ok(Some(Coeff::from_rational(r)));
        }
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let num = self.poly()?;
            self.expect(b')')?;
            let save = self.pos;
            if self.eat(b'/') {
                if self.eat(b'(') {
                    let den = self.poly()?;
                    self.expect(b')')?;
                    if den.is_zero() {
                        return self.err("zero denominator");
                    }
                    return Ok(Some(Coeff::new(num, den)));
                }
                self.pos = save;
                return self.err("expected ( after /");
            }
            return Ok(Some(Coeff::new(num, Poly::from_i64(1))));
        }
        Ok(None)
    }

    fn index_list(&mut self) -> Result<Vec<Index>, ParseError> {
        self.expect(b'[')?;
        let mut out = Vec::new();
        if self.eat(b']') {
            return Ok(out);
        }
        loop {
            self.skip_ws();
            let start = self.pos;
            let up = self.eat(b'^');
            let gauge = self.eat(b'%');
            let Some(id) = self.ident() else { return self.err("expected index name") };
            let text = format!("{}{}{}", if up { "^" } else { "" }, if gauge { "%" } else { "" }, id);
            match Index::parse(&text) {
                Some(ix) => out.push(ix),
                None => {
                    self.pos = start;
                    return self.err(format!("bad index {text:?}"));
                }
            }
            if self.eat(b']') {
                return Ok(out);
            }
            self.expect(b',')?;
        }
    }

    fn factor(&mut self) -> Result<Factor, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(id) = self.ident() else { return self.err("expected factor") };
        if id == "nd" {
            let derivs = self.index_list()?;
            self.expect(b'(')?;
            let mut inner = self.factor()?;
            self.expect(b')')?;
            let mut d = derivs;
            d.extend(inner.derivs);
            inner.derivs = d;
            return Ok(inner);
        }
        if id == "Ups1" {
            let ix = self.index_list()?;
            if ix.len() != 1 || ix[0].family != IndexFamily::Spacetime {
                self.pos = start;
                return self.err("Ups1 takes one spacetime index");
            }
            return Ok(Factor { sym: sym("Ups"), derivs: ix, slots: vec![] });
        }
        let Some(s) = SYMBOLS.lookup(id) else {
            let (line, col) = self.line_col(start);
            return Err(ParseError::UnknownSymbol { name: id.to_string(), line, col });
        };
        let slots = self.index_list()?;
        Ok(Factor::new(s, slots))
    }

    fn term(&mut self, sign: i64) -> Result<Term, ParseError> {
        let mut coeff = Coeff::int(sign);
        let mut factors = Vec::new();
        loop {
            if let Some(c) = self.coef()? {
                coeff = &coeff * &c;
            } else {
                factors.push(self.factor()?);
            }
            if !self.eat(b'*') {
                break;
            }
        }
        Ok(Term::new(coeff, factors))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = Expr::zero();
        let mut sign = if self.eat(b'-') {
            -1
        } else {
            self.eat(b'+');
            1
        };
        loop {
            e.push(self.term(sign)?);
            sign = if self.eat(b'+') {
                1
            } else if self.eat(b'-') {
                -1
            } else {
                break;
            };
        }
        if self.peek().is_some() {
            return self.err("unexpected trailing input");
        }
        Ok(e)
    }
}

/// Parses and validates.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let e = parse_unchecked(text)?;
    let diags = e.validate();
    if diags.is_empty() {
        Ok(e)
    } else {
        Err(ParseError::Invalid(diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")))
    }
}

/// Parses without validating index structure.
pub fn parse_unchecked(text: &str) -> Result<Expr, ParseError> {
    Parser { src: text.as_bytes(), pos: 0 }.expr()
}

/// Parse for internal literals; panics with the parse error.
pub fn ex(text: &str) -> Expr {
    parse(text).unwrap_or_else(|e| panic!("{text}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bach_has_weight_minus_two() {
        assert_eq!(ex("B[a,b]").weight_of().unwrap(), Some(-2));
    }

    #[test]
    fn bach_body_parses() {
        let e = ex("nd[^c](A[a,c,b]) + P[^c,^d]*C[c,a,d,b]");
        assert_eq!(e.len(), 2);
        assert_eq!(e.weight_of().unwrap(), Some(-2));
    }

    #[test]
    fn free_index_mismatch_rejected() {
        match parse("P[a,b] + J[]") {
            Err(ParseError::Invalid(m)) => assert!(m.contains("free-index mismatch")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coefficients() {
        let e = ex("(n - 4)*Z[^D,^d]*A[c,d,e]*Z[E,^e] - 3/2*(1)/(n - 2)*Z[^D,^d]*A[c,d,e]*Z[E,^e]").terms;
        assert_eq!(e[0].coeff, Coeff::n_plus(-4));
        assert_eq!(e[1].coeff.to_string(), "(-3/2)/(n - 2)");
    }

    #[test]
    fn errors_carry_position() {
        match parse("P[a,b] +\n  Q[a,b]") {
            Err(ParseError::UnknownSymbol { line, col, .. }) => assert_eq!((line, col), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("P[a,b"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn ups1_is_a_derivative() {
        let e = ex("Ups1[a]");
        assert_eq!(e.terms[0].factors[0].derivs.len(), 1);
        assert_eq!(e.weight_of().unwrap(), Some(0));
    }
}
