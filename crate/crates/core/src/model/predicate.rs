//! Selection predicates over record features, with a text syntax:
//!
//! ```text
//! expr  := term ('||' term)*
//! term  := factor ('&&' factor)*
//! factor:= '!' factor | '(' expr ')' | 'true' | NAME CMP NUMBER
//! CMP   := '<' | '<=' | '=' | '==' | '>=' | '>'
//! ```

use std::fmt;
use std::str::FromStr;

use crate::model::Record;
use crate::{Error, Result};

/// Comparison operator in a predicate atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Comparator {
    fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Gt => lhs > rhs,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Eq => "==",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
        };
        f.write_str(text)
    }
}

/// Boolean selection over a record's features.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    /// Matches every record.
    True,
    /// `feature CMP value`.
    Atom {
        feature: String,
        cmp: Comparator,
        value: f64,
    },
    Not(Box<Predicate>),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    pub fn atom(feature: impl Into<String>, cmp: Comparator, value: f64) -> Self {
        Predicate::Atom {
            feature: feature.into(),
            cmp,
            value,
        }
    }

    pub fn not(inner: Predicate) -> Self {
        Predicate::Not(Box::new(inner))
    }

    pub fn and(lhs: Predicate, rhs: Predicate) -> Self {
        Predicate::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Predicate, rhs: Predicate) -> Self {
        Predicate::Or(Box::new(lhs), Box::new(rhs))
    }

    /// Binding strength, used to decide where Display needs parentheses.
    fn precedence(&self) -> u8 {
        match self {
            Predicate::Or(..) => 1,
            Predicate::And(..) => 2,
            Predicate::Not(..) => 3,
            Predicate::True | Predicate::Atom { .. } => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Predicate::True => f.write_str("true")?,
            Predicate::Atom {
                feature,
                cmp,
                value,
            } => write!(f, "{feature}{cmp}{value}")?,
            Predicate::Not(inner) => {
                f.write_str("!")?;
                inner.fmt_prec(f, 3)?;
            }
            Predicate::And(lhs, rhs) => {
                lhs.fmt_prec(f, 2)?;
                f.write_str("&&")?;
                rhs.fmt_prec(f, 3)?;
            }
            Predicate::Or(lhs, rhs) => {
                lhs.fmt_prec(f, 1)?;
                f.write_str("||")?;
                rhs.fmt_prec(f, 2)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Evaluates a predicate on a record.
pub fn eval_predicate(record: &Record, predicate: &Predicate) -> Result<bool> {
    eval_predicate_features(&record.id, &record.features, predicate)
}

/// Evaluates a predicate against a bare feature map (e.g. a sample entry's
/// snapshot).
///
/// Deliberately not short-circuiting: a reference to a missing feature is an
/// error no matter where it sits in the expression tree.
pub fn eval_predicate_features(
    id: &str,
    features: &std::collections::BTreeMap<String, f64>,
    predicate: &Predicate,
) -> Result<bool> {
    match predicate {
        Predicate::True => Ok(true),
        Predicate::Atom {
            feature,
            cmp,
            value,
        } => {
            let x = features
                .get(feature)
                .copied()
                .ok_or_else(|| crate::Error::MissingFeature {
                    id: id.to_string(),
                    feature: feature.clone(),
                })?;
            Ok(cmp.apply(x, *value))
        }
        Predicate::Not(inner) => Ok(!eval_predicate_features(id, features, inner)?),
        Predicate::And(lhs, rhs) => {
            let l = eval_predicate_features(id, features, lhs)?;
            let r = eval_predicate_features(id, features, rhs)?;
            Ok(l && r)
        }
        Predicate::Or(lhs, rhs) => {
            let l = eval_predicate_features(id, features, lhs)?;
            let r = eval_predicate_features(id, features, rhs)?;
            Ok(l || r)
        }
    }
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            text,
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::PredicateParse {
            text: self.text.to_string(),
            msg: format!("{} at byte {}", msg.into(), self.pos),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, token: &str) -> bool {
        if self.text[self.pos..].starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Predicate> {
        let mut node = self.term()?;
        loop {
            self.skip_ws();
            if self.eat("||") {
                node = Predicate::or(node, self.term()?);
            } else {
                return Ok(node);
            }
        }
    }

    fn term(&mut self) -> Result<Predicate> {
        let mut node = self.factor()?;
        loop {
            self.skip_ws();
            if self.eat("&&") {
                node = Predicate::and(node, self.factor()?);
            } else {
                return Ok(node);
            }
        }
    }

    fn factor(&mut self) -> Result<Predicate> {
        self.skip_ws();
        if self.eat("!") {
            return Ok(Predicate::not(self.factor()?));
        }
        if self.eat("(") {
            let inner = self.expr()?;
            self.skip_ws();
            if !self.eat(")") {
                return Err(self.error("expected `)`"));
            }
            return Ok(inner);
        }
        let name = self.ident()?;
        if name == "true" {
            return Ok(Predicate::True);
        }
        self.skip_ws();
        let cmp = self.comparator()?;
        self.skip_ws();
        let value = self.number()?;
        Ok(Predicate::atom(name, cmp, value))
    }

    fn ident(&mut self) -> Result<String> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|b| b.is_ascii_alphanumeric() || b == b'_')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected a feature name"));
        }
        Ok(self.text[start..self.pos].to_string())
    }

    fn comparator(&mut self) -> Result<Comparator> {
        // Two-byte forms first so `<=` is not read as `<`.
        for (token, cmp) in [
            ("<=", Comparator::Le),
            (">=", Comparator::Ge),
            ("==", Comparator::Eq),
            ("<", Comparator::Lt),
            (">", Comparator::Gt),
            ("=", Comparator::Eq),
        ] {
            if self.eat(token) {
                return Ok(cmp);
            }
        }
        Err(self.error("expected a comparison operator"))
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-'))
        {
            // A sign is only part of the number at the start or after an exponent.
            if matches!(self.bytes[self.pos], b'+' | b'-')
                && self.pos != start
                && !matches!(self.bytes[self.pos - 1], b'e' | b'E')
            {
                break;
            }
            self.pos += 1;
        }
        let raw = &self.text[start..self.pos];
        let value: f64 = raw
            .parse()
            .map_err(|_| self.error(format!("bad number `{raw}`")))?;
        if !value.is_finite() {
            return Err(self.error(format!("non-finite number `{raw}`")));
        }
        Ok(value)
    }
}

impl FromStr for Predicate {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut parser = Parser::new(text);
        let node = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.bytes.len() {
            return Err(parser.error("trailing input"));
        }
        Ok(node)
    }
}

impl serde::Serialize for Predicate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Predicate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
