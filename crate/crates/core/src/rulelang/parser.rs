//! Hand-written lexer and recursive-descent parser for rule files and queries.

use super::ast::*;
use super::program::Program;
use super::RuleError;
use crate::symbol::Symbol;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Quoted(String),
    Number(String),
    LParen,
    RParen,
    Comma,
    Dot,
    If,
    Query,
    Hash,
    Op(CmpOp),
    /// A `% causal` comment line.
    CausalSection,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, col: usize, msg: impl Into<String>) -> RuleError {
        RuleError::Syntax { line, col, msg: msg.into() }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, RuleError> {
        let mut out = Vec::new();
        loop {
            while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
                self.bump();
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else {
                out.push(Spanned { tok: Tok::Eof, line, col });
                return Ok(out);
            };
            let tok = match c {
                b'%' => {
                    let start = self.pos + 1;
                    while matches!(self.peek(), Some(c) if c != b'\n') {
                        self.bump();
                    }
                    let text = String::from_utf8_lossy(&self.src[start..self.pos]);
                    if text.trim() == "causal" {
                        Tok::CausalSection
                    } else {
                        continue;
                    }
                }
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b'.' => {
                    self.bump();
                    Tok::Dot
                }
                b':' if self.peek_at(1) == Some(b'-') => {
                    self.bump();
                    self.bump();
                    Tok::If
                }
                b'?' if self.peek_at(1) == Some(b'-') => {
                    self.bump();
                    self.bump();
                    Tok::Query
                }
                b'#' => {
                    self.bump();
                    match self.lex_op(true) {
                        Some(op) => Tok::Op(op),
                        None => Tok::Hash,
                    }
                }
                b'=' | b'<' | b'>' | b'\\' => match self.lex_op(false) {
                    Some(op) => Tok::Op(op),
                    None => return Err(self.err(line, col, "unknown operator")),
                },
                b'\'' => Tok::Quoted(self.lex_quoted(b'\'', line, col)?),
                b'`' => {
                    let inner = self.lex_quoted(b'`', line, col)?;
                    if Decimal::parse(inner.trim()).is_none() {
                        return Err(self.err(line, col, format!("`{inner}` is not a number")));
                    }
                    Tok::Number(inner.trim().to_string())
                }
                b'-' if matches!(self.peek_at(1), Some(d) if d.is_ascii_digit()) => {
                    self.bump();
                    Tok::Number(format!("-{}", self.lex_number()))
                }
                c if c.is_ascii_digit() => Tok::Number(self.lex_number()),
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let start = self.pos;
                    while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                        self.bump();
                    }
                    let word = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                    if c.is_ascii_uppercase() || c == b'_' {
                        Tok::Var(word)
                    } else {
                        Tok::Ident(word)
                    }
                }
                other => return Err(self.err(line, col, format!("unexpected character `{}`", other as char))),
            };
            out.push(Spanned { tok, line, col });
        }
    }

    /// Comparison operators, with or without the leading `#` (already consumed when `hashed`).
    fn lex_op(&mut self, hashed: bool) -> Option<CmpOp> {
        let rest = &self.src[self.pos..];
        let table: &[(&str, CmpOp)] = &[
            ("=<", CmpOp::Le),
            ("<=", CmpOp::Le),
            (">=", CmpOp::Ge),
            ("\\=", CmpOp::Neq),
            ("=", CmpOp::Eq),
            ("<", CmpOp::Lt),
            (">", CmpOp::Gt),
        ];
        for (text, op) in table {
            if rest.starts_with(text.as_bytes()) {
                // `=..` and `==` are not part of the language.
                if *text == "=" && matches!(rest.get(1), Some(b'=') | Some(b'.')) && !hashed {
                    return None;
                }
                for _ in 0..text.len() {
                    self.bump();
                }
                return Some(*op);
            }
        }
        None
    }

    fn lex_number(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        if self.peek() == Some(b'.') && matches!(self.peek_at(1), Some(d) if d.is_ascii_digit()) {
            self.bump();
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.bump();
            }
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn lex_quoted(&mut self, quote: u8, line: usize, col: usize) -> Result<String, RuleError> {
        self.bump();
        let mut bytes = Vec::new();
        loop {
            match self.bump() {
                None | Some(b'\n') => return Err(self.err(line, col, "unterminated quoted atom")),
                Some(b'\\') if self.peek() == Some(quote) => {
                    self.bump();
                    bytes.push(quote);
                }
                Some(c) if c == quote => break,
                Some(c) => bytes.push(c),
            }
        }
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, RuleError> {
        Ok(Parser { toks: Lexer::new(src).tokens()?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, off: usize) -> &Tok {
        let i = (self.pos + off).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> RuleError {
        let s = &self.toks[self.pos];
        RuleError::Syntax { line: s.line, col: s.col, msg: msg.into() }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), RuleError> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(self.err(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    fn items(&mut self) -> Result<Vec<Item>, RuleError> {
        let mut items = Vec::new();
        let mut section = Section::Main;
        loop {
            match self.peek() {
                Tok::Eof => return Ok(items),
                Tok::CausalSection => {
                    self.next();
                    section = Section::Causal;
                }
                Tok::Hash => {
                    self.next();
                    items.push(Item { section, kind: ItemKind::Directive(self.directive()?) });
                }
                _ => items.push(Item { section, kind: ItemKind::Rule(self.rule()?) }),
            }
        }
    }

    fn directive(&mut self) -> Result<Directive, RuleError> {
        let name = match self.next() {
            Tok::Ident(n) => n,
            t => return Err(self.err(format!("expected directive name, found {}", describe(&t)))),
        };
        let d = match name.as_str() {
            "decision" | "causal" => {
                let pred = self.ident("predicate name")?;
                self.expect(Tok::LParen, "`(`")?;
                let mut features = vec![self.ident("feature name")?];
                while *self.peek() == Tok::Comma {
                    self.next();
                    features.push(self.ident("feature name")?);
                }
                self.expect(Tok::RParen, "`)`")?;
                if name == "decision" {
                    Directive::Decision { pred, features }
                } else {
                    Directive::Causal { pred, features }
                }
            }
            "labels" => {
                self.expect(Tok::LParen, "`(`")?;
                let undesired = self.label()?;
                self.expect(Tok::Comma, "`,`")?;
                let desired = self.label()?;
                self.expect(Tok::RParen, "`)`")?;
                Directive::Labels { undesired, desired }
            }
            other => return Err(self.err(format!("unknown directive `#{other}`"))),
        };
        self.expect(Tok::Dot, "`.`")?;
        Ok(d)
    }

    fn label(&mut self) -> Result<String, RuleError> {
        match self.next() {
            Tok::Quoted(s) | Tok::Ident(s) => Ok(s),
            t => Err(self.err(format!("expected label, found {}", describe(&t)))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, RuleError> {
        match self.next() {
            Tok::Ident(n) => Ok(n),
            t => Err(self.err(format!("expected {what}, found {}", describe(&t)))),
        }
    }

    fn rule(&mut self) -> Result<Rule, RuleError> {
        let head = match self.peek() {
            Tok::If => Head::Constraint,
            Tok::Ident(n) if n == "false" && *self.peek_at(1) == Tok::If => {
                self.next();
                Head::Constraint
            }
            Tok::Ident(n) if n == "not" && matches!(self.peek_at(1), Tok::Ident(_)) => {
                self.next();
                Head::Negated(self.atom()?)
            }
            Tok::Ident(_) => Head::Atom(self.atom()?),
            t => return Err(self.err(format!("expected a rule head, found {}", describe(t)))),
        };
        let body = match self.next() {
            Tok::Dot if !matches!(head, Head::Constraint) => Vec::new(),
            Tok::If => {
                let body = self.body()?;
                self.expect(Tok::Dot, "`.` at end of rule")?;
                body
            }
            t => {
                self.pos -= 1;
                return Err(self.err(format!("expected `:-` or `.`, found {}", describe(&t))));
            }
        };
        Ok(Rule { head, body })
    }

    fn body(&mut self) -> Result<Vec<BodyLiteral>, RuleError> {
        let mut lits = vec![self.literal()?];
        while *self.peek() == Tok::Comma {
            self.next();
            lits.push(self.literal()?);
        }
        Ok(lits)
    }

    fn literal(&mut self) -> Result<BodyLiteral, RuleError> {
        match (self.peek(), self.peek_at(1)) {
            (Tok::Ident(n), Tok::Ident(_)) if n == "not" => {
                self.next();
                Ok(BodyLiteral::Naf(self.atom()?))
            }
            (Tok::Ident(_), Tok::Op(_)) | (Tok::Var(_), _) | (Tok::Number(_), _) | (Tok::Quoted(_), _) => {
                let lhs = self.term()?;
                let op = match self.next() {
                    Tok::Op(op) => op,
                    t => {
                        self.pos -= 1;
                        return Err(self.err(format!("expected comparison operator, found {}", describe(&t))));
                    }
                };
                let rhs = self.term()?;
                if op.is_order() && (matches!(lhs, Term::Sym(_)) || matches!(rhs, Term::Sym(_))) {
                    return Err(self.err(format!("ordering comparison `{op}` on a symbol")));
                }
                Ok(BodyLiteral::Cmp { lhs, op, rhs })
            }
            (Tok::Ident(_), _) => Ok(BodyLiteral::Pos(self.atom()?)),
            (t, _) => Err(self.err(format!("expected a literal, found {}", describe(t)))),
        }
    }

    fn atom(&mut self) -> Result<Atom, RuleError> {
        let pred = self.ident("predicate name")?;
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.next();
            args.push(self.term()?);
            while *self.peek() == Tok::Comma {
                self.next();
                args.push(self.term()?);
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        Ok(Atom { pred, args })
    }

    fn term(&mut self) -> Result<Term, RuleError> {
        match self.next() {
            Tok::Var(v) => Ok(Term::Var(v)),
            Tok::Ident(s) => Ok(Term::Sym(Symbol::new(&s))),
            Tok::Quoted(s) => Ok(Term::Sym(Symbol::new(&s))),
            Tok::Number(n) => {
                Decimal::parse(&n).map(Term::Num).ok_or_else(|| self.err(format!("numeric literal `{n}` out of range")))
            }
            t => {
                self.pos -= 1;
                Err(self.err(format!("expected a term, found {}", describe(&t))))
            }
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Var(s) => format!("variable `{s}`"),
        Tok::Quoted(s) => format!("'{s}'"),
        Tok::Number(n) => format!("number `{n}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Dot => "`.`".into(),
        Tok::If => "`:-`".into(),
        Tok::Query => "`?-`".into(),
        Tok::Hash => "`#`".into(),
        Tok::Op(op) => format!("`{op}`"),
        Tok::CausalSection => "`% causal`".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses raw items without normalization or admissibility checks.
pub fn parse_items(text: &str) -> Result<Vec<Item>, RuleError> {
    Parser::new(text)?.items()
}

/// Parses a rule file into an admissible [`Program`].
pub fn parse_program(text: &str) -> Result<Program, RuleError> {
    Program::from_items(parse_items(text)?)
}

/// Parses `?- l1, ..., ln.` (the `?-` and final `.` are optional).
pub fn parse_query(text: &str) -> Result<Vec<BodyLiteral>, RuleError> {
    let mut p = Parser::new(text)?;
    if *p.peek() == Tok::Query {
        p.next();
    }
    if matches!(p.peek(), Tok::Eof | Tok::Dot) {
        return Err(p.err("empty query"));
    }
    let body = p.body()?;
    if *p.peek() == Tok::Dot {
        p.next();
    }
    if *p.peek() != Tok::Eof {
        return Err(p.err(format!("unexpected {} after query", describe(p.peek()))));
    }
    Ok(body)
}
