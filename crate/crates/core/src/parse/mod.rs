//! Text grammar for expressions and vector fields, and the canonical printer.
//!
//! ```text
//! expr   := term (("+"|"-") term)* ;
//! term   := unary (("*"|"/") unary)* ;
//! unary  := "-" unary | factor ;
//! factor := base ("^" integer)? ;
//! base   := rational | atomref | "(" expr ")" ;
//! atomref:= ident | ident "#" integer | ident "'"{1,3} | "D(" ident ("," integer)+ ")"
//!         | ident "(" ident ("," ident)* ")" ;
//! ```
//!
//! Bare identifiers are classified through a [`ParseContext`]. Function atoms
//! always print with their argument list, so printed text re-parses to the same
//! atoms in any context that agrees on independent and dependent names.

mod lexer;
mod print;

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::expr::{Atom, Expression, Rational, Tree};
use crate::jet::{JetSystem, VectorField};
use lexer::{tokenize, Tok, Token};

/// How bare identifiers are read.
#[derive(Clone, Debug)]
pub struct ParseContext {
    pub independent: BTreeSet<String>,
    pub dependent: BTreeSet<String>,
    /// Function names with their default argument lists.
    pub functions: BTreeMap<String, Vec<String>>,
    /// Independent variable used when a vector field names none.
    pub default_independent: String,
    /// Max tracked jet order for systems built by [`parse_vector_field`].
    pub max_order: u32,
}

impl Default for ParseContext {
    fn default() -> Self {
        let independent = ["x", "z", "s"].iter().map(|s| s.to_string()).collect();
        let mut dependent: BTreeSet<String> = ["y", "w", "v", "r"].iter().map(|s| s.to_string()).collect();
        for i in 0..10 {
            dependent.insert(format!("a{i}"));
        }
        let functions = ["f", "g", "h", "J", "P", "F", "H", "mu", "f1", "f2", "g1", "g2"]
            .iter()
            .map(|s| (s.to_string(), vec!["x".to_string()]))
            .collect();
        ParseContext {
            independent,
            dependent,
            functions,
            default_independent: "x".to_string(),
            max_order: 8,
        }
    }
}

impl ParseContext {
    pub fn with_function(mut self, name: &str, args: &[&str]) -> Self {
        self.functions
            .insert(name.to_string(), args.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn with_dependent(mut self, name: &str) -> Self {
        self.dependent.insert(name.to_string());
        self
    }

    pub fn with_independent(mut self, name: &str) -> Self {
        self.independent.insert(name.to_string());
        self
    }
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    ctx: &'a ParseContext,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let t = &self.tokens[self.pos];
        Error::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn derivative_error(&self, at: &Token, message: impl Into<String>) -> Error {
        Error::UnknownDerivative {
            line: at.line,
            column: at.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Token> {
        if *self.peek() == tok {
            Ok(self.next())
        } else {
            Err(self.error(format!("expected {}, found {}", tok, self.peek())))
        }
    }

    fn expr(&mut self) -> Result<Tree> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    lhs = Tree::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.next();
                    lhs = Tree::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Tree> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.next();
                    lhs = Tree::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.next();
                    lhs = Tree::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Tree> {
        if *self.peek() == Tok::Minus {
            self.next();
            return Ok(Tree::Neg(Box::new(self.unary()?)));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Tree> {
        let base = self.base()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.next();
        let negative = if *self.peek() == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        let k = self.small_integer("exponent")?;
        let k = i32::try_from(k).map_err(|_| self.error("exponent too large"))?;
        Ok(Tree::Pow(Box::new(base), if negative { -k } else { k }))
    }

    fn small_integer(&mut self, what: &str) -> Result<u32> {
        match self.peek().clone() {
            Tok::Integer(n) => {
                let v = u32::try_from(&n).map_err(|_| self.error(format!("{what} out of range")))?;
                self.next();
                Ok(v)
            }
            other => Err(self.error(format!("expected integer {what}, found {other}"))),
        }
    }

    fn base(&mut self) -> Result<Tree> {
        match self.peek().clone() {
            Tok::Integer(n) => {
                self.next();
                Ok(Tree::Number(Rational::from_integer(n)))
            }
            Tok::LParen => {
                self.next();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == "D" && *self.peek_at(1) == Tok::LParen {
                    self.derivative_notation()
                } else {
                    self.atomref()
                }
            }
            other => Err(self.error(format!("unexpected {other}"))),
        }
    }

    fn arg_list(&mut self) -> Result<Vec<String>> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Ident(a) => {
                    self.next();
                    args.push(a);
                }
                other => return Err(self.error(format!("expected argument name, found {other}"))),
            }
            match self.peek() {
                Tok::Comma => {
                    self.next();
                }
                Tok::RParen => {
                    self.next();
                    return Ok(args);
                }
                other => return Err(self.error(format!("expected `,` or `)`, found {other}"))),
            }
        }
    }

    fn derivative_notation(&mut self) -> Result<Tree> {
        let start = self.next();
        self.expect(Tok::LParen)?;
        let name_tok = self.next();
        let Tok::Ident(name) = name_tok.tok.clone() else {
            return Err(self.derivative_error(&name_tok, "expected a function name after `D(`"));
        };
        let explicit_args = if *self.peek() == Tok::LParen {
            Some(self.arg_list()?)
        } else {
            None
        };
        let mut index = Vec::new();
        while *self.peek() == Tok::Comma {
            self.next();
            index.push(self.small_integer("derivative order")?);
        }
        self.expect(Tok::RParen)?;
        if index.is_empty() {
            return Err(self.derivative_error(&start, "D(...) needs at least one order"));
        }
        if explicit_args.is_none() && self.ctx.dependent.contains(&name) && index.len() == 1 {
            return Ok(Tree::Atom(Atom::jet(&name, index[0])));
        }
        let args = match explicit_args {
            Some(a) => a,
            None => self
                .ctx
                .functions
                .get(&name)
                .cloned()
                .ok_or_else(|| self.derivative_error(&name_tok, format!("`{name}` is not a known function")))?,
        };
        if args.len() != index.len() {
            return Err(self.derivative_error(
                &start,
                format!("`{name}` takes {} arguments but {} orders were given", args.len(), index.len()),
            ));
        }
        Ok(Tree::Atom(Atom::function(&name, &args, &index)))
    }

    fn atomref(&mut self) -> Result<Tree> {
        let tok = self.next();
        let Tok::Ident(name) = tok.tok.clone() else {
            unreachable!()
        };
        match self.peek().clone() {
            Tok::Hash => {
                self.next();
                let k = self.small_integer("jet order")?;
                Ok(Tree::Atom(Atom::jet(&name, k)))
            }
            Tok::Prime(count) => {
                self.next();
                if count > 3 {
                    return Err(self.derivative_error(&tok, "at most three primes; use D(f,k)"));
                }
                if *self.peek() == Tok::LParen {
                    let args = self.arg_list()?;
                    if args.len() != 1 {
                        return Err(self.derivative_error(&tok, "primes apply to one-variable functions only"));
                    }
                    return Ok(Tree::Atom(Atom::function(&name, &args, &[count])));
                }
                if self.ctx.dependent.contains(&name) {
                    return Ok(Tree::Atom(Atom::jet(&name, count)));
                }
                match self.ctx.functions.get(&name) {
                    Some(args) if args.len() == 1 => Ok(Tree::Atom(Atom::function(&name, args, &[count]))),
                    _ => Err(self.derivative_error(&tok, format!("cannot differentiate `{name}`"))),
                }
            }
            Tok::LParen => {
                let args = self.arg_list()?;
                let zeros = vec![0; args.len()];
                Ok(Tree::Atom(Atom::function(&name, &args, &zeros)))
            }
            _ => Ok(Tree::Atom(self.classify(&name))),
        }
    }

    fn classify(&self, name: &str) -> Atom {
        if self.ctx.independent.contains(name) {
            Atom::independent(name)
        } else if self.ctx.dependent.contains(name) {
            Atom::jet(name, 0)
        } else if let Some(args) = self.ctx.functions.get(name) {
            Atom::function(name, args, &vec![0; args.len()])
        } else {
            Atom::parameter(name)
        }
    }

    fn at_end(&self) -> bool {
        *self.peek() == Tok::Eof
    }
}

fn parser<'a>(text: &str, ctx: &'a ParseContext) -> Result<Parser<'a>> {
    Ok(Parser {
        tokens: tokenize(text)?,
        pos: 0,
        ctx,
    })
}

/// Parses to a raw tree without normalizing.
pub fn parse_tree(text: &str, ctx: &ParseContext) -> Result<Tree> {
    let mut p = parser(text, ctx)?;
    let tree = p.expr()?;
    if !p.at_end() {
        return Err(p.error(format!("unexpected {}", p.peek())));
    }
    Ok(tree)
}

pub fn parse_expression_with(text: &str, ctx: &ParseContext) -> Result<Expression> {
    parse_tree(text, ctx)?.normalize()
}

/// Parses and normalizes with the default context.
pub fn parse_expression(text: &str) -> Result<Expression> {
    parse_expression_with(text, &ParseContext::default())
}

/// `"coord: expr; coord: expr ..."`. The independent variable is the coordinate
/// named in the context's independent set (ξ = 0 if none is listed); the other
/// coordinates become dependent symbols in declared order.
pub fn parse_vector_field_with(text: &str, ctx: &ParseContext) -> Result<VectorField> {
    let mut p = parser(text, ctx)?;
    let mut entries: Vec<(String, Expression)> = Vec::new();
    while !p.at_end() {
        let tok = p.next();
        let Tok::Ident(coord) = tok.tok.clone() else {
            return Err(Error::Syntax {
                line: tok.line,
                column: tok.column,
                message: format!("expected coordinate name, found {}", tok.tok),
            });
        };
        p.expect(Tok::Colon)?;
        let e = p.expr()?.normalize()?;
        if entries.iter().any(|(c, _)| *c == coord) {
            return Err(Error::DuplicateCoordinate(coord));
        }
        entries.push((coord, e));
        match p.peek() {
            Tok::Semicolon => {
                p.next();
            }
            Tok::Eof => {}
            other => return Err(p.error(format!("expected `;`, found {other}"))),
        }
    }
    if entries.is_empty() {
        return Err(p.error("empty vector field"));
    }
    let indep_pos = entries.iter().position(|(c, _)| ctx.independent.contains(c));
    let independent = indep_pos
        .map(|i| entries[i].0.clone())
        .unwrap_or_else(|| ctx.default_independent.clone());
    let xi = indep_pos
        .map(|i| entries[i].1.clone())
        .unwrap_or_else(Expression::zero);
    let deps: Vec<(String, Expression)> = entries
        .into_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != indep_pos)
        .map(|(_, e)| e)
        .collect();
    let names: Vec<&str> = deps.iter().map(|(c, _)| c.as_str()).collect();
    let sys = JetSystem::new(&independent, &names, ctx.max_order)?;
    VectorField::new(sys, xi, deps.into_iter().map(|(_, e)| e).collect())
}

pub fn parse_vector_field(text: &str) -> Result<VectorField> {
    parse_vector_field_with(text, &ParseContext::default())
}

/// Canonical text of any printable object.
pub fn print<T: std::fmt::Display>(object: &T) -> String {
    object.to_string()
}

/// Integer literal helper for callers building trees by hand.
pub fn number(n: i64) -> Tree {
    Tree::Number(Rational::from_integer(BigInt::from(n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_text() {
        let e = parse_expression("y#3 + a1*y#1 + a0*y").unwrap();
        let expected = Expression::atom(Atom::jet("y", 3))
            + Expression::atom(Atom::jet("a1", 0)) * Expression::atom(Atom::jet("y", 1))
            + Expression::atom(Atom::jet("a0", 0)) * Expression::atom(Atom::jet("y", 0));
        assert_eq!(e, expected);
    }

    #[test]
    fn prime_sugar() {
        let e = parse_expression("f''(x)").unwrap();
        assert_eq!(e, Expression::atom(Atom::function1("f", "x", 2)));
        assert_eq!(parse_expression("f''").unwrap(), e);
        assert_eq!(
            parse_expression("a1'").unwrap(),
            Expression::atom(Atom::jet("a1", 1))
        );
        assert_eq!(
            parse_expression("D(f,4)").unwrap(),
            Expression::atom(Atom::function1("f", "x", 4))
        );
    }

    #[test]
    fn power_binds_tighter_than_minus() {
        let e = parse_expression("-x^2").unwrap();
        let x = Expression::atom(Atom::independent("x"));
        assert_eq!(e, -(x.pow(2)));
    }

    #[test]
    fn syntax_errors_have_positions() {
        match parse_expression("x +\n  * 2") {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(parse_expression("2x").is_err());
        assert!(matches!(
            parse_expression("k1'"),
            Err(Error::UnknownDerivative { .. })
        ));
        assert!(matches!(
            parse_expression("D(q, 2)"),
            Err(Error::UnknownDerivative { .. })
        ));
    }

    #[test]
    fn vector_fields() {
        let v = parse_vector_field("x: f; y: (k1 + f')*y").unwrap();
        assert_eq!(v.system().coordinates(), vec!["x", "y"]);
        assert_eq!(v.xi(), &Expression::atom(Atom::function1("f", "x", 0)));
        assert!(parse_vector_field("x: 0; y: 0").unwrap().is_zero());
        assert!(matches!(
            parse_vector_field("x: 1; x: 0"),
            Err(Error::DuplicateCoordinate(_))
        ));
        let t = parse_vector_field("x: 1; y: 0").unwrap();
        assert_eq!(print(&t), "x: 1; y: 0");
    }

    #[test]
    fn zero_prints_as_zero() {
        assert_eq!(print(&Expression::zero()), "0");
    }

    #[test]
    fn round_trip_with_denominators() {
        let e = parse_expression("-4*(9*a1*mu^2 + 7*mu'^2 - 6*mu*mu'')^3 / mu^8").unwrap();
        let back = parse_expression(&print(&e)).unwrap();
        assert!((back.clone() - e.clone()).is_zero());
        assert_eq!(print(&back), print(&e));
    }
}
