//! Hand-written lexer and recursive-descent parser for MiniC.

use super::ast::*;
use super::LangError;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(i64),
    Ident(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: Pos,
}

const PUNCTS: &[&str] = &[
    "&&", "||", "<=", ">=", "==", "!=", "(", ")", "{", "}", "[", "]", ";", ",", ":", "=", "+", "-",
    "*", "/", "%", "<", ">", "!",
];

fn lex(src: &str) -> Result<Vec<Token>, LangError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let value: i64 = text
                .parse()
                .ok()
                .filter(|v| *v <= 1i64 << 31)
                .ok_or_else(|| LangError::syntax(pos, format!("integer literal `{text}` out of range")))?;
            col += (i - start) as u32;
            out.push(Token { tok: Tok::Int(value), pos });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += (i - start) as u32;
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), pos });
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len() as u32;
                out.push(Token { tok: Tok::Punct(p), pos });
            }
            None => return Err(LangError::syntax(pos, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "int", "void", "if", "else", "while", "switch", "case", "default", "break", "return", "assert",
    "error", "halt", "input", "input_array",
];

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

pub fn parse_unit(src: &str) -> Result<SourceUnit, LangError> {
    let mut p = Parser { toks: lex(src)?, at: 0 };
    let mut unit = SourceUnit::default();
    while p.peek() != &Tok::Eof {
        unit.functions.push(p.function()?);
    }
    Ok(unit)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.at + n).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, what: &str) -> Result<T, LangError> {
        let found = match self.peek() {
            Tok::Int(v) => v.to_string(),
            Tok::Ident(s) => s.clone(),
            Tok::Punct(p) => p.to_string(),
            Tok::Eof => "end of input".to_string(),
        };
        Err(LangError::syntax(self.pos(), format!("expected {what}, found `{found}`")))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), LangError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(&format!("`{p}`"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), LangError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.err(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> Result<String, LangError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.err("identifier"),
        }
    }

    fn length(&mut self) -> Result<u32, LangError> {
        match *self.peek() {
            Tok::Int(v) if v > 0 && v <= 1 << 16 => {
                self.bump();
                Ok(v as u32)
            }
            _ => self.err("array length between 1 and 65536"),
        }
    }

    fn function(&mut self) -> Result<FunctionDef, LangError> {
        let pos = self.pos();
        let ret = if self.is_kw("int") {
            ReturnType::Int
        } else if self.is_kw("void") {
            ReturnType::Void
        } else {
            return self.err("`int` or `void`");
        };
        self.bump();
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                self.expect_kw("int")?;
                params.push(self.ident()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let body = self.block()?;
        Ok(FunctionDef { name, ret, params, body, pos })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, LangError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if self.peek() == &Tok::Eof {
                return self.err("`}`");
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    /// A statement used as an if/while body: either a braced block or a single statement.
    fn body(&mut self) -> Result<Vec<Stmt>, LangError> {
        if self.is_punct("{") {
            self.block()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn stmt(&mut self) -> Result<Stmt, LangError> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Punct("{") => StmtKind::Block(self.block()?),
            Tok::Ident(kw) => match kw.as_str() {
                "int" => self.decl()?,
                "if" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    let then_branch = self.body()?;
                    let else_branch = if self.is_kw("else") {
                        self.bump();
                        Some(self.body()?)
                    } else {
                        None
                    };
                    StmtKind::If { cond, then_branch, else_branch }
                }
                "while" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    StmtKind::While { cond, body: self.body()? }
                }
                "switch" => self.switch()?,
                "return" => {
                    self.bump();
                    let value = if self.is_punct(";") { None } else { Some(self.expr()?) };
                    self.expect_punct(";")?;
                    StmtKind::Return(value)
                }
                "assert" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    self.expect_punct(";")?;
                    StmtKind::Assert(cond)
                }
                "error" => {
                    self.bump();
                    self.expect_punct("(")?;
                    self.expect_punct(")")?;
                    self.expect_punct(";")?;
                    StmtKind::Error
                }
                "halt" => {
                    self.bump();
                    self.expect_punct(";")?;
                    StmtKind::Halt
                }
                _ if KEYWORDS.contains(&kw.as_str()) => return self.err("statement"),
                _ => {
                    if self.peek_at(1) == &Tok::Punct("(") {
                        let e = self.expr()?;
                        self.expect_punct(";")?;
                        StmtKind::ExprStmt(e)
                    } else {
                        let target = self.lvalue()?;
                        self.expect_punct("=")?;
                        let value = self.expr()?;
                        self.expect_punct(";")?;
                        StmtKind::Assign { target, value }
                    }
                }
            },
            _ => return self.err("statement"),
        };
        Ok(Stmt { kind, pos })
    }

    fn lvalue(&mut self) -> Result<LValue, LangError> {
        let name = self.ident()?;
        if self.eat_punct("[") {
            let idx = self.expr()?;
            self.expect_punct("]")?;
            Ok(LValue::Index(name, idx))
        } else {
            Ok(LValue::Var(name))
        }
    }

    fn decl(&mut self) -> Result<StmtKind, LangError> {
        self.expect_kw("int")?;
        let name = self.ident()?;
        if self.eat_punct("[") {
            let len = self.length()?;
            self.expect_punct("]")?;
            let kind = if self.eat_punct("=") {
                let at = self.pos();
                self.expect_kw("input_array")?;
                self.expect_punct("(")?;
                let n = self.length()?;
                self.expect_punct(")")?;
                if n != len {
                    return Err(LangError::semantic(
                        at,
                        format!("input_array({n}) does not match declared length {len} of `{name}`"),
                    ));
                }
                StmtKind::DeclInputArray { name, len }
            } else {
                StmtKind::DeclArray { name, len }
            };
            self.expect_punct(";")?;
            return Ok(kind);
        }
        let kind = if self.eat_punct("=") {
            if self.is_kw("input") && self.peek_at(1) == &Tok::Punct("(") {
                self.bump();
                self.expect_punct("(")?;
                self.expect_punct(")")?;
                StmtKind::DeclInput { name }
            } else {
                StmtKind::DeclInt { name, init: Some(self.expr()?) }
            }
        } else {
            StmtKind::DeclInt { name, init: None }
        };
        self.expect_punct(";")?;
        Ok(kind)
    }

    fn switch(&mut self) -> Result<StmtKind, LangError> {
        self.expect_kw("switch")?;
        self.expect_punct("(")?;
        let scrutinee = self.expr()?;
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let mut cases: Vec<SwitchCase> = Vec::new();
        let mut default = None;
        loop {
            let pos = self.pos();
            if self.eat_punct("}") {
                break;
            }
            let value = if self.is_kw("case") {
                self.bump();
                let neg = self.eat_punct("-");
                let v = match *self.peek() {
                    Tok::Int(v) => v,
                    _ => return self.err("case label"),
                };
                self.bump();
                let v = if neg { -v } else { v };
                let v = i32::try_from(v)
                    .map_err(|_| LangError::syntax(pos, "case label out of range".to_string()))?;
                if cases.iter().any(|c| c.value == v) {
                    return Err(LangError::semantic(pos, format!("duplicate case label {v}")));
                }
                Some(v)
            } else if self.is_kw("default") {
                self.bump();
                if default.is_some() {
                    return Err(LangError::semantic(pos, "duplicate default label".to_string()));
                }
                None
            } else {
                return self.err("`case`, `default` or `}`");
            };
            self.expect_punct(":")?;
            let mut body = Vec::new();
            while !(self.is_kw("case") || self.is_kw("default") || self.is_punct("}")) {
                if self.is_kw("break") {
                    self.bump();
                    self.expect_punct(";")?;
                    if !(self.is_kw("case") || self.is_kw("default") || self.is_punct("}")) {
                        return self.err("case label after `break`");
                    }
                    break;
                }
                if self.peek() == &Tok::Eof {
                    return self.err("`}`");
                }
                body.push(self.stmt()?);
            }
            match value {
                Some(value) => cases.push(SwitchCase { value, body, pos }),
                None => default = Some(body),
            }
        }
        Ok(StmtKind::Switch { scrutinee, cases, default })
    }

    fn expr(&mut self) -> Result<Expr, LangError> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        let op = match self.peek() {
            Tok::Punct(p) => match *p {
                "||" => BinaryOp::Or,
                "&&" => BinaryOp::And,
                "==" => BinaryOp::Eq,
                "!=" => BinaryOp::Ne,
                "<" => BinaryOp::Lt,
                "<=" => BinaryOp::Le,
                ">" => BinaryOp::Gt,
                ">=" => BinaryOp::Ge,
                "+" => BinaryOp::Add,
                "-" => BinaryOp::Sub,
                "*" => BinaryOp::Mul,
                "/" => BinaryOp::Div,
                "%" => BinaryOp::Rem,
                _ => return None,
            },
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, LangError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            if op.precedence() < min_prec {
                break;
            }
            let pos = self.pos();
            self.bump();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        let pos = self.pos();
        if self.eat_punct("-") {
            let inner = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnaryOp::Neg, Box::new(inner)), pos));
        }
        if self.eat_punct("!") {
            let inner = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnaryOp::Not, Box::new(inner)), pos));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::new(ExprKind::Int(v), pos))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "input" || name == "input_array" => Err(LangError::semantic(
                pos,
                format!("`{name}` may only initialise a declaration"),
            )),
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.eat_punct("(") {
                    let mut args = Vec::new();
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    Ok(Expr::new(ExprKind::Call(name, args), pos))
                } else if self.eat_punct("[") {
                    let idx = self.expr()?;
                    self.expect_punct("]")?;
                    Ok(Expr::new(ExprKind::Index(name, Box::new(idx)), pos))
                } else {
                    Ok(Expr::new(ExprKind::Var(name), pos))
                }
            }
            _ => self.err("expression"),
        }
    }
}
