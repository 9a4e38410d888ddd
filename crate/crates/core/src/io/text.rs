//! Prolog-like text formats for examples, queries and weighted templates.
//!
//! Example files:
//!
//! ```text
//! % comment
//! #example m001
//! 1.0 bond(a1,a2).
//! c(a1).
//! ?- pos. 1
//! ```
//!
//! Template files:
//!
//! ```text
//! :- target(pos/0).
//! :- latent(alpha1_1/1, 1).
//! 0.25 :: alpha1_1(X) <- c(X).
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{Dataset, Example, Query};
use crate::error::{Error, Result};
use crate::logic::{Atom, Clause, Term};
use crate::symbol::Symbol;
use crate::template::Template;
use crate::weights::WeightStore;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject attribute-value atoms such as `color(o, red)`: a constant that
    /// only ever occurs as a non-first argument of a relation is taken to be
    /// an attribute value that should have been a unary predicate.
    pub strict_unary: bool,
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor { text, pos: 0 }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> std::result::Result<(), String> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(format!("expected `{token}` at `{}`", self.rest()))
        }
    }

    fn name(&mut self) -> std::result::Result<&'a str, String> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(is_name_char) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("expected a name at `{}`", self.rest()));
        }
        Ok(&self.text[start..self.pos])
    }

    fn atom(&mut self) -> std::result::Result<Atom, String> {
        let pred = self.name()?;
        if !pred.starts_with(|c: char| c.is_ascii_lowercase()) {
            return Err(format!("predicate `{pred}` must start with a lowercase letter"));
        }
        let mut args = Vec::new();
        if self.eat("(") {
            loop {
                args.push(Term::from_name(self.name()?));
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        Ok(Atom::new(pred, args))
    }

    fn number(&mut self) -> Option<f64> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let value = rest[..end].parse::<f64>().ok().filter(|v| v.is_finite())?;
        self.pos += end;
        Some(value)
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.text.len()
    }
}

fn strip_comment(line: &str) -> &str {
    line.find('%').map_or(line, |i| &line[..i]).trim()
}

/// Parses one atom, e.g. `bond(a1,a2)`.
pub fn parse_atom(text: &str) -> Result<Atom> {
    let mut c = Cursor::new(text);
    let atom = c.atom().map_err(|m| perr(1, m))?;
    if !c.at_end() {
        return Err(perr(1, format!("trailing input `{}`", c.rest())));
    }
    Ok(atom)
}

/// Parses a clause body, e.g. `bond(X,Y), c(X)`.
pub fn parse_body(text: &str) -> Result<Vec<Atom>> {
    let mut c = Cursor::new(text);
    let mut body = Vec::new();
    loop {
        body.push(c.atom().map_err(|m| perr(1, m))?);
        if c.at_end() {
            return Ok(body);
        }
        c.expect(",").map_err(|m| perr(1, m))?;
    }
}

#[derive(Default)]
struct Arities(BTreeMap<Symbol, usize>);

impl Arities {
    fn check(&mut self, atom: &Atom) -> Result<()> {
        match self.0.insert(atom.predicate, atom.arity()) {
            Some(expected) if expected != atom.arity() => {
                Err(Error::Arity { predicate: atom.predicate.to_string(), expected, found: atom.arity() })
            }
            _ => Ok(()),
        }
    }
}

pub fn parse_examples(text: &str) -> Result<Dataset> {
    parse_examples_with(text, ParseOptions::default())
}

pub fn parse_examples_with(text: &str, options: ParseOptions) -> Result<Dataset> {
    let mut data = Dataset::default();
    let mut arities = Arities::default();
    let mut fact_lines: Vec<Vec<usize>> = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(id) = line.strip_prefix("#example") {
            let id = id.trim();
            if id.is_empty() || id.contains(char::is_whitespace) {
                return Err(perr(line_no, "expected `#example <id>`"));
            }
            if !ids.insert(id.to_string()) {
                return Err(perr(line_no, format!("duplicate example id `{id}`")));
            }
            data.push(Example::new(id), Vec::new());
            fact_lines.push(Vec::new());
            continue;
        }
        let Some(example) = data.examples.len().checked_sub(1) else {
            return Err(perr(line_no, "fact or query before the first `#example` line"));
        };
        let mut c = Cursor::new(line);
        if c.eat("?-") {
            let atom = c.atom().map_err(|m| perr(line_no, m))?;
            c.expect(".").map_err(|m| perr(line_no, m))?;
            let target = if c.at_end() {
                1.0
            } else {
                c.number().ok_or_else(|| perr(line_no, format!("bad target `{}`", c.rest())))?
            };
            if !(0.0..=1.0).contains(&target) {
                return Err(perr(line_no, format!("target {target} outside [0, 1]")));
            }
            if !c.at_end() {
                return Err(perr(line_no, format!("trailing input `{}`", c.rest())));
            }
            if !atom.is_ground() {
                return Err(perr(line_no, format!("query {atom} is not ground")));
            }
            arities.check(&atom)?;
            data.queries[example].push(Query::new(atom, target));
            continue;
        }
        let weight = if line.starts_with(|ch: char| ch.is_ascii_digit() || ch == '-' || ch == '+' || ch == '.') {
            c.number().ok_or_else(|| perr(line_no, format!("bad weight in `{line}`")))?
        } else {
            1.0
        };
        let atom = c.atom().map_err(|m| perr(line_no, m))?;
        c.expect(".").map_err(|m| perr(line_no, m))?;
        if !c.at_end() {
            return Err(perr(line_no, format!("trailing input `{}`", c.rest())));
        }
        if !atom.is_ground() {
            return Err(perr(line_no, format!("fact {atom} is not ground")));
        }
        arities.check(&atom)?;
        data.examples[example].facts.push(crate::dataset::WeightedFact { atom, weight });
        fact_lines[example].push(line_no);
    }
    if options.strict_unary {
        check_unary_attributes(&data, &fact_lines)?;
    }
    Ok(data)
}

fn check_unary_attributes(data: &Dataset, fact_lines: &[Vec<usize>]) -> Result<()> {
    for (e, example) in data.examples.iter().enumerate() {
        let mut entities = BTreeSet::new();
        for f in &example.facts {
            if let Some(first) = f.atom.args.first() {
                entities.insert(first.symbol());
            }
        }
        for (f, &line) in example.facts.iter().zip(&fact_lines[e]) {
            if let Some(value) = f.atom.args.iter().skip(1).find(|t| !entities.contains(&t.symbol())) {
                return Err(perr(
                    line,
                    format!(
                        "`{}` looks like an attribute value in {}; use a unary predicate such as {}({})",
                        value, f.atom, value, f.atom.args[0]
                    ),
                ));
            }
        }
    }
    Ok(())
}

pub fn read_examples(path: &Path, options: ParseOptions) -> Result<Dataset> {
    parse_examples_with(&std::fs::read_to_string(path)?, options)
}

pub fn write_examples(data: &Dataset) -> String {
    let mut out = String::new();
    for (example, queries) in data.examples.iter().zip(&data.queries) {
        let _ = writeln!(out, "#example {}", example.id);
        for f in &example.facts {
            if f.weight == 1.0 {
                let _ = writeln!(out, "{}.", f.atom);
            } else {
                let _ = writeln!(out, "{} {}.", f.weight, f.atom);
            }
        }
        for q in queries {
            let _ = writeln!(out, "?- {}. {}", q.atom, q.target);
        }
    }
    out
}

/// One clause per line, preceded by target and latent declarations.
pub fn serialize_template(template: &Template, weights: &WeightStore) -> String {
    let mut out = String::new();
    for (pred, arity) in template.targets() {
        let _ = writeln!(out, ":- target({pred}/{arity}).");
    }
    for l in template.latents() {
        let _ = writeln!(out, ":- latent({}/{}, {}).", l.name, l.arity, l.layer);
    }
    for c in template.clauses() {
        let _ = writeln!(out, "{} :: {}.", weights.get(c.key), c.clause);
    }
    out
}

pub fn parse_template(text: &str) -> Result<(Template, WeightStore)> {
    let mut template = Template::new();
    let mut weights = WeightStore::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let mut c = Cursor::new(line);
        let wrap = |e: Error| match e {
            Error::Parse { message, .. } => perr(line_no, message),
            Error::Arity { .. } | Error::Config(_) => perr(line_no, e.to_string()),
            other => other,
        };
        if c.eat(":-") {
            let directive = c.name().map_err(|m| perr(line_no, m))?;
            c.expect("(").map_err(|m| perr(line_no, m))?;
            let pred = c.name().map_err(|m| perr(line_no, m))?;
            c.expect("/").map_err(|m| perr(line_no, m))?;
            let arity: usize =
                c.name().map_err(|m| perr(line_no, m))?.parse().map_err(|_| perr(line_no, "arity must be a number"))?;
            match directive {
                "target" => {
                    c.expect(")").map_err(|m| perr(line_no, m))?;
                    template.add_target(pred.into(), arity).map_err(wrap)?;
                }
                "latent" => {
                    c.expect(",").map_err(|m| perr(line_no, m))?;
                    let layer: usize = c
                        .name()
                        .map_err(|m| perr(line_no, m))?
                        .parse()
                        .map_err(|_| perr(line_no, "layer must be a number"))?;
                    c.expect(")").map_err(|m| perr(line_no, m))?;
                    template.declare_latent(pred.into(), arity, layer).map_err(wrap)?;
                }
                other => return Err(perr(line_no, format!("unknown directive `{other}`"))),
            }
            c.expect(".").map_err(|m| perr(line_no, m))?;
            if !c.at_end() {
                return Err(perr(line_no, format!("trailing input `{}`", c.rest())));
            }
            continue;
        }
        let weight = match line.find("::") {
            Some(_) => {
                let w = c.number().ok_or_else(|| perr(line_no, "expected a weight before `::`"))?;
                c.expect("::").map_err(|m| perr(line_no, m))?;
                w
            }
            None => 1.0,
        };
        let head = c.atom().map_err(|m| perr(line_no, m))?;
        let mut body = Vec::new();
        if c.eat("<-") {
            loop {
                body.push(c.atom().map_err(|m| perr(line_no, m))?);
                if !c.eat(",") {
                    break;
                }
            }
        }
        c.expect(".").map_err(|m| perr(line_no, m))?;
        if !c.at_end() {
            return Err(perr(line_no, format!("trailing input `{}`", c.rest())));
        }
        let clause = Clause::new(head, body);
        if clause.body.is_empty() && !clause.head.is_ground() {
            return Err(perr(line_no, format!("fact {} is not ground", clause.head)));
        }
        template.push(clause).map_err(wrap)?;
        weights.push(weight);
    }
    template.check_stratification().map_err(Error::Config)?;
    Ok((template, weights))
}

pub fn read_template(path: &Path) -> Result<(Template, WeightStore)> {
    parse_template(&std::fs::read_to_string(path)?)
}
