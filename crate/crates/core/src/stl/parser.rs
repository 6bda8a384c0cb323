//! Recursive-descent parser for the formula grammar:
//!
//! ```text
//! formula  := disj ;
//! disj     := conj { "or" conj } ;
//! conj     := unary { "and" unary } ;
//! unary    := "not" unary | "G[" num "," num "]" unary | "F[" num "," num "]" unary
//!           | "(" formula "U[" num "," num "]" formula ")" | "(" formula ")" | atom ;
//! atom     := sig cmp rhs | "On[" num "," num "]" agg sig cmp rhs ;
//! agg      := "Int" | "Min" | "Max" ;
//! sig      := "x" [ digits ] ;
//! cmp      := "<" | "<=" | ">" | ">=" ;
//! rhs      := num | param ;
//! ```
//!
//! In parametric mode, window bounds may also be parameters.

use thiserror::Error;

use super::ast::{Aggregate, Comparison, Formula, Interval, Term};

const KEYWORDS: &[&str] = &[
    "and", "or", "not", "G", "F", "U", "On", "Int", "Min", "Max",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("interval [{lo}, {hi}] at position {pos} is reversed")]
    ReversedInterval { pos: usize, lo: f64, hi: f64 },
    #[error("interval bound {value} at position {pos} is negative")]
    NegativeBound { pos: usize, value: f64 },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("unbound parameter {name}")]
    UnboundParameter { pos: usize, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Ground,
    Parametric,
}

/// Parses a ground formula; parameters are rejected.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    parse_with(text, Mode::Ground)
}

/// Parses a template whose thresholds and window bounds may be parameters.
pub fn parse_parametric(text: &str) -> Result<Formula, ParseError> {
    parse_with(text, Mode::Parametric)
}

pub fn parse_with(text: &str, mode: Mode) -> Result<Formula, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        mode,
        end: text.len(),
    };
    let formula = parser.disj()?;
    if let Some(tok) = parser.peek() {
        return Err(ParseError::Syntax {
            pos: tok.pos,
            message: format!("unexpected {}", tok.kind.describe()),
        });
    }
    Ok(formula)
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Cmp(Comparison),
}

impl Kind {
    fn describe(&self) -> String {
        match self {
            Kind::Ident(s) => format!("`{s}`"),
            Kind::Num(v) => format!("number {v}"),
            Kind::LParen => "`(`".into(),
            Kind::RParen => "`)`".into(),
            Kind::LBracket => "`[`".into(),
            Kind::RBracket => "`]`".into(),
            Kind::Comma => "`,`".into(),
            Kind::Cmp(c) => format!("`{}`", c.symbol()),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b'(' => Some(Kind::LParen),
            b')' => Some(Kind::RParen),
            b'[' => Some(Kind::LBracket),
            b']' => Some(Kind::RBracket),
            b',' => Some(Kind::Comma),
            _ => None,
        };
        if let Some(kind) = simple {
            tokens.push(Token { kind, pos: start });
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'<' || c == b'>' {
            let eq = bytes.get(i + 1) == Some(&b'=');
            let op = match (c, eq) {
                (b'<', false) => Comparison::Lt,
                (b'<', true) => Comparison::Le,
                (_, false) => Comparison::Gt,
                (_, true) => Comparison::Ge,
            };
            i += if eq { 2 } else { 1 };
            tokens.push(Token {
                kind: Kind::Cmp(op),
                pos: start,
            });
        } else if c.is_ascii_digit() || c == b'.' || c == b'-' {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let lexeme = &text[start..i];
            let value: f64 = lexeme.parse().map_err(|_| ParseError::Syntax {
                pos: start,
                message: format!("malformed number `{lexeme}`"),
            })?;
            tokens.push(Token {
                kind: Kind::Num(value),
                pos: start,
            });
        } else if c.is_ascii_alphabetic() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                kind: Kind::Ident(text[start..i].to_string()),
                pos: start,
            });
        } else {
            let ch = text[start..].chars().next().unwrap_or('?');
            return Err(ParseError::Syntax {
                pos: start,
                message: format!("unexpected character `{ch}`"),
            });
        }
    }
    Ok(tokens)
}

/// `x` or `x<digits>`.
fn signal_index(name: &str) -> Option<usize> {
    let rest = name.strip_prefix('x')?;
    if rest.is_empty() {
        Some(0)
    } else if rest.bytes().all(|b| b.is_ascii_digit()) {
        rest.parse().ok()
    } else {
        None
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    mode: Mode,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: Kind::Ident(s), .. }) if s == word)
    }

    fn peek_operator(&self, word: &str) -> bool {
        self.peek_ident(word)
            && matches!(
                self.tokens.get(self.pos + 1),
                Some(Token {
                    kind: Kind::LBracket,
                    ..
                })
            )
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn next(&mut self) -> Result<Token, ParseError> {
        let tok = self.tokens.get(self.pos).cloned().ok_or(ParseError::Syntax {
            pos: self.end,
            message: "unexpected end of input".into(),
        })?;
        self.pos += 1;
        Ok(tok)
    }

    fn expect(&mut self, kind: Kind) -> Result<(), ParseError> {
        let tok = self.next()?;
        if tok.kind == kind {
            Ok(())
        } else {
            Err(ParseError::Syntax {
                pos: tok.pos,
                message: format!("expected {}, found {}", kind.describe(), tok.kind.describe()),
            })
        }
    }

    fn disj(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conj()?;
        while self.peek_ident("or") {
            self.pos += 1;
            lhs = lhs.or(self.conj()?);
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while self.peek_ident("and") {
            self.pos += 1;
            lhs = lhs.and(self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if self.peek_ident("not") {
            self.pos += 1;
            return Ok(self.unary()?.not());
        }
        if self.peek_operator("G") {
            self.pos += 1;
            let w = self.interval()?;
            return Ok(Formula::Globally(w, Box::new(self.unary()?)));
        }
        if self.peek_operator("F") {
            self.pos += 1;
            let w = self.interval()?;
            return Ok(Formula::Eventually(w, Box::new(self.unary()?)));
        }
        if matches!(self.peek(), Some(Token { kind: Kind::LParen, .. })) {
            self.pos += 1;
            let inner = self.disj()?;
            if self.peek_operator("U") {
                self.pos += 1;
                let w = self.interval()?;
                let goal = self.disj()?;
                self.expect(Kind::RParen)?;
                return Ok(Formula::Until(w, Box::new(inner), Box::new(goal)));
            }
            self.expect(Kind::RParen)?;
            return Ok(inner);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        if self.peek_operator("On") {
            self.pos += 1;
            let window = self.interval()?;
            let tok = self.next()?;
            let agg = match &tok.kind {
                Kind::Ident(s) if s == "Int" => Aggregate::Int,
                Kind::Ident(s) if s == "Min" => Aggregate::Min,
                Kind::Ident(s) if s == "Max" => Aggregate::Max,
                other => {
                    return Err(ParseError::Syntax {
                        pos: tok.pos,
                        message: format!("expected Int, Min or Max, found {}", other.describe()),
                    })
                }
            };
            let (signal, op, threshold) = self.comparison()?;
            return Ok(Formula::AggAtom {
                window,
                agg,
                signal,
                op,
                threshold,
            });
        }
        let (signal, op, threshold) = self.comparison()?;
        Ok(Formula::Atom {
            signal,
            op,
            threshold,
        })
    }

    fn comparison(&mut self) -> Result<(usize, Comparison, Term), ParseError> {
        let tok = self.next()?;
        let signal = match &tok.kind {
            Kind::Ident(name) => match signal_index(name) {
                Some(i) => i,
                None if KEYWORDS.contains(&name.as_str()) => {
                    return Err(ParseError::Syntax {
                        pos: tok.pos,
                        message: format!("unexpected keyword `{name}`"),
                    })
                }
                None => {
                    return Err(ParseError::UnknownIdentifier {
                        pos: tok.pos,
                        name: name.clone(),
                    })
                }
            },
            other => {
                return Err(ParseError::Syntax {
                    pos: tok.pos,
                    message: format!("expected a signal, found {}", other.describe()),
                })
            }
        };
        let tok = self.next()?;
        let Kind::Cmp(op) = tok.kind else {
            return Err(ParseError::Syntax {
                pos: tok.pos,
                message: format!("expected a comparison, found {}", tok.kind.describe()),
            });
        };
        let threshold = self.term()?;
        Ok((signal, op, threshold))
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let tok = self.next()?;
        match tok.kind {
            Kind::Num(v) => Ok(Term::Num(v)),
            Kind::Ident(name) => {
                if KEYWORDS.contains(&name.as_str()) || signal_index(&name).is_some() {
                    return Err(ParseError::Syntax {
                        pos: tok.pos,
                        message: format!("`{name}` cannot be used as a parameter"),
                    });
                }
                match self.mode {
                    Mode::Parametric => Ok(Term::Param(name)),
                    Mode::Ground => Err(ParseError::UnboundParameter { pos: tok.pos, name }),
                }
            }
            other => Err(ParseError::Syntax {
                pos: tok.pos,
                message: format!("expected a number or parameter, found {}", other.describe()),
            }),
        }
    }

    fn interval(&mut self) -> Result<Interval, ParseError> {
        let pos = self.here();
        self.expect(Kind::LBracket)?;
        let lo = self.term()?;
        self.expect(Kind::Comma)?;
        let hi = self.term()?;
        self.expect(Kind::RBracket)?;
        if let Some(l) = lo.value() {
            if l < 0.0 {
                return Err(ParseError::NegativeBound { pos, value: l });
            }
        }
        if let (Some(l), Some(h)) = (lo.value(), hi.value()) {
            if l > h {
                return Err(ParseError::ReversedInterval { pos, lo: l, hi: h });
            }
        }
        Ok(Interval { lo, hi })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_aggregate_atom() {
        let f = parse("On[12,48] Int x < 30.5").unwrap();
        assert_eq!(f, Formula::agg(12.0, 48.0, Aggregate::Int, Comparison::Lt, 30.5));
    }

    #[test]
    fn parses_globally() {
        let f = parse("G[0,48] (x < 10)").unwrap();
        assert_eq!(
            f,
            Formula::globally(0.0, 48.0, Formula::atom(Comparison::Lt, 10.0))
        );
    }

    #[test]
    fn rejects_reversed_interval() {
        assert!(matches!(
            parse("On[48,12] Int x < 5"),
            Err(ParseError::ReversedInterval { .. })
        ));
    }

    #[test]
    fn ground_mode_rejects_parameters() {
        let err = parse("On[12,48] Int x < p2").unwrap_err();
        assert_eq!(err.to_string(), "unbound parameter p2");
        let f = parse_parametric("On[p1,48] Int x < p2").unwrap();
        assert_eq!(f.params(), vec!["p1", "p2"]);
    }

    #[test]
    fn precedence_and_associativity() {
        let f = parse("x < 1 or x > 2 and not x >= 3").unwrap();
        let expected = Formula::atom(Comparison::Lt, 1.0).or(Formula::atom(Comparison::Gt, 2.0)
            .and(Formula::atom(Comparison::Ge, 3.0).not()));
        assert_eq!(f, expected);
        let g = parse("G[0,1] x < 3 and x > 1").unwrap();
        assert!(matches!(g, Formula::And(..)));
    }

    #[test]
    fn until_and_signals() {
        let f = parse("(x0 <= 1 U[0, 2.5] x > -2)").unwrap();
        assert_eq!(
            f,
            Formula::until(
                0.0,
                2.5,
                Formula::atom(Comparison::Le, 1.0),
                Formula::atom(Comparison::Gt, -2.0)
            )
        );
        assert!(matches!(parse("x1 < 2").unwrap(), Formula::Atom { signal: 1, .. }));
    }

    #[test]
    fn error_cases() {
        assert!(matches!(parse("y < 3"), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(parse("x < "), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("x < 3)"), Err(ParseError::Syntax { pos: 5, .. })));
        assert!(matches!(parse("x ! 3"), Err(ParseError::Syntax { pos: 2, .. })));
        assert!(matches!(parse("G[-1,2] x < 3"), Err(ParseError::NegativeBound { .. })));
        assert!(matches!(parse("On[0,1] Avg x < 3"), Err(ParseError::Syntax { .. })));
        assert!(parse_parametric("x < and").is_err());
        assert!(parse("(x < 1 U[0,1] x > 2").is_err());
    }

    #[test]
    fn print_reparses() {
        for s in [
            "On[p1,48] Int x < p2",
            "not (x < 1 or x > 2)",
            "F[0,3] G[1,2] (x < 1 U[0,4] On[0,2] Max x >= 7)",
            "(x < 1 or x > 2) or x < 0.125",
            "x < 1 and (x > 2 and x < 0.5)",
        ] {
            let f = parse_parametric(s).unwrap();
            assert_eq!(parse_parametric(&f.to_string()).unwrap(), f, "{s}");
        }
    }
}
