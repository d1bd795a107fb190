use std::fmt;

use super::{AccessFn, Affine, BinOp, DaapProgram, Expr, IterVar, Node, Statement};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UndeclaredVariable(String),
    NonAffineBound,
    NoStatements,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: ", self.line, self.col)?;
        match &self.kind {
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::UndeclaredVariable(v) => write!(f, "undeclared iteration variable `{v}`"),
            ParseErrorKind::NonAffineBound => write!(f, "non-affine bound"),
            ParseErrorKind::NoStatements => write!(f, "no statements"),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    DotDot,
    Sym(char),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Float(x) => write!(f, "`{x}`"),
            Tok::DotDot => write!(f, "`..`"),
            Tok::Sym(c) => write!(f, "`{c}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Lexed>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let adv = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            adv(1, &mut i, &mut col);
        } else if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Lexed { tok: Tok::Ident(chars[start..i].iter().collect()), line: l0, col: c0 });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            // `1..N` must lex as Int DotDot, so a dot is fractional only when
            // it is not followed by another dot.
            let mut float = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                float = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if float {
                Tok::Float(text.parse().expect("digits"))
            } else {
                Tok::Int(text.parse().map_err(|_| ParseError {
                    line: l0,
                    col: c0,
                    kind: ParseErrorKind::Syntax(format!("integer literal `{text}` out of range")),
                })?)
            };
            out.push(Lexed { tok, line: l0, col: c0 });
        } else if c == '.' && chars.get(i + 1) == Some(&'.') {
            adv(2, &mut i, &mut col);
            out.push(Lexed { tok: Tok::DotDot, line: l0, col: c0 });
        } else if "{}[]():=+-*/,;".contains(c) {
            adv(1, &mut i, &mut col);
            out.push(Lexed { tok: Tok::Sym(c), line: l0, col: c0 });
        } else {
            return Err(ParseError {
                line,
                col,
                kind: ParseErrorKind::Syntax(format!("unexpected character `{c}`")),
            });
        }
    }
    out.push(Lexed { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
    prog: DaapProgram,
    /// Loop indices currently in scope, outermost first.
    scope: Vec<usize>,
}

/// Parses DAAP source text.
pub fn parse_daap(text: &str) -> Result<DaapProgram, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        prog: DaapProgram { param: None, loops: Vec::new(), statements: Vec::new(), body: Vec::new() },
        scope: Vec::new(),
    };
    let mut body = Vec::new();
    while p.peek() != &Tok::Eof {
        if p.peek() == &Tok::Ident("param".into()) {
            p.bump();
            if p.prog.param.is_some() {
                return Err(p.err_here(ParseErrorKind::Syntax("only one `param` is supported".into())));
            }
            let name = p.ident()?;
            p.prog.param = Some(name);
            p.eat_sym(';');
            continue;
        }
        body.push(p.item()?);
    }
    if p.prog.statements.is_empty() {
        let at = &p.toks[p.pos];
        return Err(ParseError { line: at.line, col: at.col, kind: ParseErrorKind::NoStatements });
    }
    p.prog.body = body;
    Ok(p.prog)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, kind: ParseErrorKind) -> ParseError {
        let at = &self.toks[self.pos];
        ParseError { line: at.line, col: at.col, kind }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        self.err_here(ParseErrorKind::Syntax(format!("expected {wanted}, found {}", self.peek())))
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == &Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{c}`")))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn item(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Tok::Ident(kw) if kw == "for" => self.for_loop(),
            Tok::Ident(_) => self.statement(),
            _ => Err(self.unexpected("`for` or a statement")),
        }
    }

    fn in_scope(&self, name: &str) -> bool {
        self.scope.iter().any(|&l| self.prog.loops[l].name == name)
    }

    fn declare_loop(&mut self, name: String, lower: Affine, upper: Affine) -> usize {
        let idx = self.prog.loops.len();
        self.prog.loops.push(IterVar { name, lower, upper, parent: self.scope.last().copied() });
        self.scope.push(idx);
        idx
    }

    fn for_loop(&mut self) -> Result<Node, ParseError> {
        self.bump();
        let name = self.ident()?;
        match self.bump() {
            Tok::Ident(s) if s == "in" => {}
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("`in`"));
            }
        }
        let (lower, upper) = self.range()?;
        self.expect_sym('{')?;
        let var = self.declare_loop(name, lower, upper);
        let mut body = Vec::new();
        while !self.eat_sym('}') {
            if self.peek() == &Tok::Eof {
                return Err(self.unexpected("`}`"));
            }
            body.push(self.item()?);
        }
        self.scope.pop();
        Ok(Node::Loop { var, body })
    }

    fn range(&mut self) -> Result<(Affine, Affine), ParseError> {
        let lower = self.affine()?;
        if self.peek() != &Tok::DotDot {
            return Err(self.unexpected("`..`"));
        }
        self.bump();
        let upper = self.affine()?;
        Ok((lower, upper))
    }

    /// affine := ['-'] term (('+'|'-') term)* ; term := INT ['*' IDENT] | IDENT ['*' INT]
    fn affine(&mut self) -> Result<Affine, ParseError> {
        let mut acc = Affine::default();
        let mut sign = if self.eat_sym('-') { -1 } else { 1 };
        loop {
            self.affine_term(sign, &mut acc)?;
            if self.eat_sym('+') {
                sign = 1;
            } else if self.eat_sym('-') {
                sign = -1;
            } else {
                break;
            }
        }
        if matches!(self.peek(), Tok::Sym('*' | '/' | '(')) {
            return Err(self.err_here(ParseErrorKind::NonAffineBound));
        }
        Ok(acc)
    }

    fn affine_term(&mut self, sign: i64, acc: &mut Affine) -> Result<(), ParseError> {
        match self.peek().clone() {
            Tok::Int(c) => {
                self.bump();
                if self.eat_sym('*') {
                    let name = self.bound_name()?;
                    acc.add_term(&name, sign * c);
                } else {
                    acc.constant += sign * c;
                }
                Ok(())
            }
            Tok::Ident(_) => {
                let name = self.bound_name()?;
                let mut coeff = sign;
                if self.eat_sym('*') {
                    match self.peek().clone() {
                        Tok::Int(c) => {
                            self.bump();
                            coeff *= c;
                        }
                        Tok::Ident(_) => return Err(self.err_here(ParseErrorKind::NonAffineBound)),
                        _ => return Err(self.unexpected("integer coefficient")),
                    }
                }
                acc.add_term(&name, coeff);
                Ok(())
            }
            Tok::Float(_) => Err(self.err_here(ParseErrorKind::NonAffineBound)),
            _ => Err(self.unexpected("affine expression")),
        }
    }

    fn bound_name(&mut self) -> Result<String, ParseError> {
        let at = self.pos;
        let name = self.ident()?;
        if self.in_scope(&name) || self.prog.param.as_deref() == Some(name.as_str()) {
            Ok(name)
        } else {
            self.pos = at;
            Err(self.err_here(ParseErrorKind::UndeclaredVariable(name)))
        }
    }

    fn statement(&mut self) -> Result<Node, ParseError> {
        let label = if matches!(self.peek_at(1), Tok::Sym(':')) {
            let l = self.ident()?;
            self.bump();
            l
        } else {
            format!("S{}", self.prog.statements.len() + 1)
        };
        if self.prog.statements.iter().any(|s| s.label == label) {
            return Err(self.err_here(ParseErrorKind::Syntax(format!("duplicate statement label `{label}`"))));
        }
        let scope_len = self.scope.len();
        let mut inline_loops = Vec::new();
        let output = self.access(true, &mut inline_loops)?;
        self.expect_sym('=')?;
        let mut inputs = Vec::new();
        let expr = self.expr(&mut inputs)?;
        self.eat_sym(';');
        let nest = self.scope.clone();
        self.scope.truncate(scope_len);
        let op = expr.op_kind();
        let idx = self.prog.statements.len();
        self.prog.statements.push(Statement { label, output, inputs, op, expr, nest });
        let mut node = Node::Stmt(idx);
        for var in inline_loops.into_iter().rev() {
            node = Node::Loop { var, body: vec![node] };
        }
        Ok(node)
    }

    /// access := IDENT ('[' ']' | ('[' index ']')*) ; index := IDENT ['=' affine '..' affine]
    fn access(&mut self, allow_ranges: bool, inline_loops: &mut Vec<usize>) -> Result<AccessFn, ParseError> {
        let array = self.ident()?;
        let mut indices = Vec::new();
        while self.eat_sym('[') {
            if self.eat_sym(']') {
                if !indices.is_empty() {
                    return Err(self.unexpected("index variable"));
                }
                break;
            }
            let at = self.pos;
            let name = self.ident()?;
            if self.peek() == &Tok::Sym('=') {
                if !allow_ranges {
                    return Err(self.err_here(ParseErrorKind::Syntax(
                        "inline ranges are only allowed on the output access".into(),
                    )));
                }
                self.bump();
                let (lower, upper) = self.range()?;
                inline_loops.push(self.declare_loop(name.clone(), lower, upper));
            } else if !self.in_scope(&name) {
                self.pos = at;
                return Err(self.err_here(ParseErrorKind::UndeclaredVariable(name)));
            }
            indices.push(name);
            self.expect_sym(']')?;
        }
        Ok(AccessFn { array, indices })
    }

    fn expr(&mut self, inputs: &mut Vec<AccessFn>) -> Result<Expr, ParseError> {
        let mut lhs = self.term(inputs)?;
        loop {
            let op = if self.eat_sym('+') {
                BinOp::Add
            } else if self.eat_sym('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term(inputs)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self, inputs: &mut Vec<AccessFn>) -> Result<Expr, ParseError> {
        let mut lhs = self.unary(inputs)?;
        loop {
            let op = if self.eat_sym('*') {
                BinOp::Mul
            } else if self.eat_sym('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary(inputs)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self, inputs: &mut Vec<AccessFn>) -> Result<Expr, ParseError> {
        if self.eat_sym('-') {
            return Ok(Expr::Neg(Box::new(self.unary(inputs)?)));
        }
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Num(i as f64))
            }
            Tok::Float(x) => {
                self.bump();
                Ok(Expr::Num(x))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr(inputs)?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Ident(name) if self.peek_at(1) == &Tok::Sym('(') => {
                self.bump();
                self.bump();
                let mut args = Vec::new();
                if !self.eat_sym(')') {
                    loop {
                        args.push(self.expr(inputs)?);
                        if self.eat_sym(')') {
                            break;
                        }
                        self.expect_sym(',')?;
                    }
                }
                Ok(Expr::Call(name, args))
            }
            Tok::Ident(_) => {
                let acc = self.access(false, &mut Vec::new())?;
                inputs.push(acc);
                Ok(Expr::Input(inputs.len() - 1))
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}
