//! Recursive-descent parser for MiniDyn modules.

use super::ast::*;
use super::lexer::{tokenize, LexError, Tok, Token};
use super::value::{BinOp, CmpOp};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{message} at line {line}, column {col}")]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub col: usize,
}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> Self {
        ParseError { message: e.message, line: e.line, col: e.col }
    }
}

/// Parses MiniDyn source into a module AST.
pub fn parse_module(name: &str, source: &str) -> Result<ModuleAst, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, pos: 0 };
    p.module(name)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn cur(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_tok(&self) -> &Tok {
        &self.cur().tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        &self.tokens[(self.pos + offset).min(self.tokens.len() - 1)].tok
    }

    fn advance(&mut self) -> Tok {
        let t = self.cur().tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        let t = self.cur();
        ParseError { message: message.into(), line: t.line, col: t.col }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek_tok() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.err(format!("expected {}, found {}", tok, self.peek_tok())))
        }
    }

    fn eat(&mut self, tok: Tok) -> bool {
        if *self.peek_tok() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn name(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek_tok().clone() {
            Tok::Name(n) => {
                self.advance();
                Ok(n)
            }
            other => Err(self.err(format!("expected {}, found {}", what, other))),
        }
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek_tok(), Tok::Newline) {
            self.advance();
        }
    }

    fn module(&mut self, name: &str) -> Result<ModuleAst, ParseError> {
        let mut items = Vec::new();
        loop {
            self.skip_newlines();
            match self.peek_tok() {
                Tok::Eof => break,
                Tok::Def => items.push(Item::Function(self.function_def(false)?)),
                Tok::Class => items.push(Item::Class(self.class_def()?)),
                Tok::Name(_) => items.push(Item::Constant(self.constant_def()?)),
                other => {
                    return Err(self.err(format!(
                        "expected a definition or constant at module level, found {}",
                        other
                    )))
                }
            }
        }
        Ok(ModuleAst { name: name.to_string(), items })
    }

    fn constant_def(&mut self) -> Result<ConstantDef, ParseError> {
        let name = self.name("constant name")?;
        self.expect(Tok::Assign)?;
        let value = self.literal()?;
        self.expect(Tok::Newline)?;
        Ok(ConstantDef { name, value })
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let negative = self.eat(Tok::Minus);
        let lit = match self.peek_tok().clone() {
            Tok::Int(v) => {
                self.advance();
                Literal::Int(v)
            }
            Tok::Float(v) => {
                self.advance();
                Literal::Float(v)
            }
            Tok::Str(s) => {
                self.advance();
                Literal::Str(s)
            }
            Tok::Bytes(b) => {
                self.advance();
                Literal::Bytes(b)
            }
            Tok::True => {
                self.advance();
                Literal::Bool(true)
            }
            Tok::False => {
                self.advance();
                Literal::Bool(false)
            }
            Tok::NoneKw => {
                self.advance();
                Literal::None
            }
            other => return Err(self.err(format!("expected a literal, found {}", other))),
        };
        if negative {
            match lit {
                Literal::Int(v) => Ok(Literal::Int(-v)),
                Literal::Float(v) => Ok(Literal::Float(-v)),
                _ => Err(self.err("unary minus applies only to numeric literals")),
            }
        } else {
            Ok(lit)
        }
    }

    fn function_def(&mut self, in_class: bool) -> Result<FunctionDef, ParseError> {
        self.expect(Tok::Def)?;
        let name = self.name("function name")?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        let mut seen_star = false;
        let mut seen_double_star = false;
        if !self.eat(Tok::RParen) {
            loop {
                let kind = if self.eat(Tok::DoubleStar) {
                    ParamKind::DoubleStar
                } else if self.eat(Tok::Star) {
                    ParamKind::Star
                } else {
                    ParamKind::Normal
                };
                match kind {
                    ParamKind::Star if seen_star || seen_double_star => {
                        return Err(self.err("'*' parameter must come before '**' and be unique"))
                    }
                    ParamKind::DoubleStar if seen_double_star => {
                        return Err(self.err("duplicate '**' parameter"))
                    }
                    ParamKind::Normal if seen_star || seen_double_star => {
                        return Err(self.err("plain parameters must precede '*' and '**'"))
                    }
                    _ => {}
                }
                if kind == ParamKind::Star {
                    seen_star = true;
                }
                if kind == ParamKind::DoubleStar {
                    seen_double_star = true;
                }
                let pname = self.name("parameter name")?;
                let annotation = if self.eat(Tok::Colon) { Some(self.type_expr()?) } else { None };
                let default = if self.eat(Tok::Assign) {
                    if kind != ParamKind::Normal {
                        return Err(self.err("'*' and '**' parameters cannot have defaults"));
                    }
                    Some(self.literal()?)
                } else {
                    None
                };
                params.push(Param { name: pname, kind, annotation, default });
                if self.eat(Tok::Comma) {
                    continue;
                }
                self.expect(Tok::RParen)?;
                break;
            }
        }
        if in_class {
            match params.first() {
                Some(p) if p.name == "self" && p.kind == ParamKind::Normal => {}
                _ => return Err(self.err("methods must take 'self' as their first parameter")),
            }
        }
        let return_type = if self.eat(Tok::Arrow) { Some(self.type_expr()?) } else { None };
        self.expect(Tok::Colon)?;
        let (docstring, body) = self.block()?;
        Ok(FunctionDef { name, params, return_type, docstring, body })
    }

    fn class_def(&mut self) -> Result<ClassDef, ParseError> {
        self.expect(Tok::Class)?;
        let name = self.name("class name")?;
        self.expect(Tok::Colon)?;
        self.expect(Tok::Newline)?;
        self.expect(Tok::Indent)?;
        self.skip_newlines();
        let docstring = self.opt_docstring()?;
        let mut constructor = None;
        let mut methods = Vec::new();
        loop {
            self.skip_newlines();
            if self.eat(Tok::Dedent) {
                break;
            }
            let f = self.function_def(true)?;
            if f.name == "__init__" {
                if constructor.is_some() {
                    return Err(self.err("duplicate __init__"));
                }
                constructor = Some(f);
            } else {
                methods.push(f);
            }
        }
        Ok(ClassDef { name, docstring, constructor, methods })
    }

    fn opt_docstring(&mut self) -> Result<Option<String>, ParseError> {
        if let Tok::Str(s) = self.peek_tok().clone() {
            if matches!(self.peek_at(1), Tok::Newline) {
                self.advance();
                self.advance();
                self.skip_newlines();
                return Ok(Some(s));
            }
        }
        Ok(None)
    }

    /// Parses an indented block, extracting a leading docstring.
    fn block(&mut self) -> Result<(Option<String>, Vec<Stmt>), ParseError> {
        self.expect(Tok::Newline)?;
        self.expect(Tok::Indent)?;
        self.skip_newlines();
        let docstring = self.opt_docstring()?;
        let mut body = Vec::new();
        loop {
            self.skip_newlines();
            if self.eat(Tok::Dedent) {
                break;
            }
            body.push(self.statement()?);
        }
        if body.is_empty() && docstring.is_none() {
            return Err(self.err("expected an indented block"));
        }
        Ok((docstring, body))
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        match self.peek_tok() {
            Tok::If => self.if_stmt(),
            Tok::While => self.while_stmt(),
            Tok::Expect => {
                self.advance();
                let class = self.name("exception class name")?;
                self.expect(Tok::Colon)?;
                let body = self.simple_statement()?;
                self.expect(Tok::Newline)?;
                Ok(Stmt::Expect { class, body: Box::new(body) })
            }
            _ => {
                let s = self.simple_statement()?;
                self.expect(Tok::Newline)?;
                Ok(s)
            }
        }
    }

    fn simple_statement(&mut self) -> Result<Stmt, ParseError> {
        match self.peek_tok() {
            Tok::Return => {
                self.advance();
                if matches!(self.peek_tok(), Tok::Newline) {
                    Ok(Stmt::Return { value: None })
                } else {
                    Ok(Stmt::Return { value: Some(self.expr()?) })
                }
            }
            Tok::Raise => {
                self.advance();
                let class = self.name("exception class name")?;
                self.expect(Tok::LParen)?;
                let message = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Stmt::Raise { class, message })
            }
            Tok::Name(_) => {
                // Lookahead distinguishes `x = ...` and `x.attr = ...` from
                // expression statements.
                if matches!(self.peek_at(1), Tok::Assign) {
                    let name = self.name("target")?;
                    self.advance();
                    let value = self.expr()?;
                    return Ok(Stmt::Assign { target: AssignTarget::Name(name), value });
                }
                if matches!(self.peek_at(1), Tok::Dot)
                    && matches!(self.peek_at(2), Tok::Name(_))
                    && matches!(self.peek_at(3), Tok::Assign)
                {
                    let object = self.name("target")?;
                    self.advance();
                    let attr = self.name("attribute")?;
                    self.advance();
                    let value = self.expr()?;
                    return Ok(Stmt::Assign { target: AssignTarget::Attr { object, attr }, value });
                }
                Ok(Stmt::Expr(self.expr()?))
            }
            _ => Ok(Stmt::Expr(self.expr()?)),
        }
    }

    fn if_stmt(&mut self) -> Result<Stmt, ParseError> {
        self.expect(Tok::If)?;
        let cond = self.cond()?;
        self.expect(Tok::Colon)?;
        let (_, body) = self.block()?;
        let mut arms = vec![(cond, body)];
        let mut else_body = None;
        loop {
            if self.eat(Tok::Elif) {
                let c = self.cond()?;
                self.expect(Tok::Colon)?;
                let (_, b) = self.block()?;
                arms.push((c, b));
            } else if self.eat(Tok::Else) {
                self.expect(Tok::Colon)?;
                let (_, b) = self.block()?;
                else_body = Some(b);
                break;
            } else {
                break;
            }
        }
        Ok(Stmt::If { arms, else_body })
    }

    fn while_stmt(&mut self) -> Result<Stmt, ParseError> {
        self.expect(Tok::While)?;
        let cond = self.cond()?;
        self.expect(Tok::Colon)?;
        let (_, body) = self.block()?;
        Ok(Stmt::While { cond, body })
    }

    /// `or` binds weaker than `and`; both only occur in condition position.
    fn cond(&mut self) -> Result<Cond, ParseError> {
        let mut left = self.and_cond()?;
        while self.eat(Tok::Or) {
            let right = self.and_cond()?;
            left = Cond::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_cond(&mut self) -> Result<Cond, ParseError> {
        let mut left = Cond::Atom(self.expr()?);
        while self.eat(Tok::And) {
            let right = Cond::Atom(self.expr()?);
            left = Cond::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.arith()?;
        let op = match self.peek_tok() {
            Tok::EqEq => Some(CmpOp::Eq),
            Tok::Ne => Some(CmpOp::Ne),
            Tok::Lt => Some(CmpOp::Lt),
            Tok::Le => Some(CmpOp::Le),
            Tok::Gt => Some(CmpOp::Gt),
            Tok::Ge => Some(CmpOp::Ge),
            Tok::In => Some(CmpOp::In),
            Tok::Not => {
                self.advance();
                self.expect(Tok::In)?;
                let rhs = self.arith()?;
                return self.finish_compare(CmpOp::NotIn, lhs, rhs);
            }
            Tok::Is => {
                self.advance();
                let op = if self.eat(Tok::Not) { CmpOp::IsNot } else { CmpOp::Is };
                let rhs = self.arith()?;
                return self.finish_compare(op, lhs, rhs);
            }
            _ => None,
        };
        match op {
            Some(op) => {
                self.advance();
                let rhs = self.arith()?;
                self.finish_compare(op, lhs, rhs)
            }
            None => Ok(lhs),
        }
    }

    fn finish_compare(&mut self, op: CmpOp, lhs: Expr, rhs: Expr) -> Result<Expr, ParseError> {
        if matches!(
            self.peek_tok(),
            Tok::EqEq
                | Tok::Ne
                | Tok::Lt
                | Tok::Le
                | Tok::Gt
                | Tok::Ge
                | Tok::In
                | Tok::Not
                | Tok::Is
        ) {
            return Err(self.err("chained comparisons are not supported"));
        }
        Ok(Expr::Compare { op, lhs: Box::new(lhs), rhs: Box::new(rhs) })
    }

    fn arith(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.term()?;
        loop {
            let op = match self.peek_tok() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let right = self.term()?;
            left = Expr::Binary { op, lhs: Box::new(left), rhs: Box::new(right) };
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.factor()?;
        loop {
            let op = match self.peek_tok() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::DoubleSlash => BinOp::FloorDiv,
                Tok::Percent => BinOp::Mod,
                _ => break,
            };
            self.advance();
            let right = self.factor()?;
            left = Expr::Binary { op, lhs: Box::new(left), rhs: Box::new(right) };
        }
        Ok(left)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(Tok::Minus) {
            let inner = self.factor()?;
            // Fold negation into numeric literals so `-5` is a literal.
            return Ok(match inner {
                Expr::Literal(Literal::Int(v)) => Expr::Literal(Literal::Int(-v)),
                Expr::Literal(Literal::Float(v)) => Expr::Literal(Literal::Float(-v)),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        loop {
            if self.eat(Tok::Dot) {
                let attr = self.name("attribute name")?;
                e = Expr::Attr { object: Box::new(e), attr };
            } else if matches!(self.peek_tok(), Tok::LParen) {
                let args = self.call_args()?;
                let target = match e {
                    Expr::Name(n) => CallTarget::Name(n),
                    Expr::Attr { object, attr } => CallTarget::Method { object, name: attr },
                    _ => {
                        return Err(
                            self.err("only named functions and methods can be called")
                        )
                    }
                };
                e = Expr::Call { target, args };
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn call_args(&mut self) -> Result<Vec<Arg>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if self.eat(Tok::RParen) {
            return Ok(args);
        }
        loop {
            if self.eat(Tok::DoubleStar) {
                args.push(Arg::DoubleStar(self.expr()?));
            } else if self.eat(Tok::Star) {
                args.push(Arg::Star(self.expr()?));
            } else if matches!(self.peek_tok(), Tok::Name(_))
                && matches!(self.peek_at(1), Tok::Assign)
            {
                let name = self.name("keyword")?;
                self.advance();
                args.push(Arg::Keyword(name, self.expr()?));
            } else {
                args.push(Arg::Positional(self.expr()?));
            }
            if self.eat(Tok::Comma) {
                continue;
            }
            self.expect(Tok::RParen)?;
            break;
        }
        Ok(args)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek_tok().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr::Literal(Literal::Int(v)))
            }
            Tok::Float(v) => {
                self.advance();
                Ok(Expr::Literal(Literal::Float(v)))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Literal(Literal::Str(s)))
            }
            Tok::Bytes(b) => {
                self.advance();
                Ok(Expr::Literal(Literal::Bytes(b)))
            }
            Tok::True => {
                self.advance();
                Ok(Expr::Literal(Literal::Bool(true)))
            }
            Tok::False => {
                self.advance();
                Ok(Expr::Literal(Literal::Bool(false)))
            }
            Tok::NoneKw => {
                self.advance();
                Ok(Expr::Literal(Literal::None))
            }
            Tok::Name(n) => {
                if n == "set"
                    && matches!(self.peek_at(1), Tok::LParen)
                    && matches!(self.peek_at(2), Tok::RParen)
                {
                    self.advance();
                    self.advance();
                    self.advance();
                    return Ok(Expr::EmptySet);
                }
                if n == "set" && matches!(self.peek_at(1), Tok::LParen) {
                    return Err(self.err("set() takes no arguments"));
                }
                self.advance();
                Ok(Expr::Name(n))
            }
            Tok::LParen => {
                self.advance();
                if self.eat(Tok::RParen) {
                    return Ok(Expr::TupleLit(vec![]));
                }
                let first = self.expr()?;
                if self.eat(Tok::Comma) {
                    let mut items = vec![first];
                    if !matches!(self.peek_tok(), Tok::RParen) {
                        loop {
                            items.push(self.expr()?);
                            if !self.eat(Tok::Comma) {
                                break;
                            }
                            if matches!(self.peek_tok(), Tok::RParen) {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen)?;
                    Ok(Expr::TupleLit(items))
                } else {
                    self.expect(Tok::RParen)?;
                    Ok(first)
                }
            }
            Tok::LBracket => {
                self.advance();
                let mut items = Vec::new();
                if !self.eat(Tok::RBracket) {
                    loop {
                        items.push(self.expr()?);
                        if !self.eat(Tok::Comma) {
                            break;
                        }
                        if matches!(self.peek_tok(), Tok::RBracket) {
                            break;
                        }
                    }
                    self.expect(Tok::RBracket)?;
                }
                Ok(Expr::ListLit(items))
            }
            Tok::LBrace => {
                self.advance();
                if self.eat(Tok::RBrace) {
                    return Ok(Expr::MapLit(vec![]));
                }
                let first = self.expr()?;
                if self.eat(Tok::Colon) {
                    let first_val = self.expr()?;
                    let mut pairs = vec![(first, first_val)];
                    while self.eat(Tok::Comma) {
                        if matches!(self.peek_tok(), Tok::RBrace) {
                            break;
                        }
                        let k = self.expr()?;
                        self.expect(Tok::Colon)?;
                        let v = self.expr()?;
                        pairs.push((k, v));
                    }
                    self.expect(Tok::RBrace)?;
                    Ok(Expr::MapLit(pairs))
                } else {
                    let mut items = vec![first];
                    while self.eat(Tok::Comma) {
                        if matches!(self.peek_tok(), Tok::RBrace) {
                            break;
                        }
                        items.push(self.expr()?);
                    }
                    self.expect(Tok::RBrace)?;
                    Ok(Expr::SetLit(items))
                }
            }
            other => Err(self.err(format!("expected an expression, found {}", other))),
        }
    }

    fn type_expr(&mut self) -> Result<TypeExpr, ParseError> {
        if self.eat(Tok::NoneKw) {
            return Ok(TypeExpr::NoneType);
        }
        let name = self.name("type name")?;
        let simple = match name.as_str() {
            "Int" => Some(TypeExpr::Int),
            "Float" => Some(TypeExpr::Float),
            "Bool" => Some(TypeExpr::Bool),
            "Str" => Some(TypeExpr::Str),
            "Bytes" => Some(TypeExpr::Bytes),
            "Any" => Some(TypeExpr::Any),
            _ => None,
        };
        if let Some(t) = simple {
            return Ok(t);
        }
        match name.as_str() {
            "List" | "Set" | "Tuple" => {
                let inner = if self.eat(Tok::LBracket) {
                    let t = self.type_expr()?;
                    self.expect(Tok::RBracket)?;
                    Some(Box::new(t))
                } else {
                    None
                };
                Ok(match name.as_str() {
                    "List" => TypeExpr::List(inner),
                    "Set" => TypeExpr::Set(inner),
                    _ => TypeExpr::Tuple(inner),
                })
            }
            "Map" => {
                let inner = if self.eat(Tok::LBracket) {
                    let k = self.type_expr()?;
                    self.expect(Tok::Comma)?;
                    let v = self.type_expr()?;
                    self.expect(Tok::RBracket)?;
                    Some(Box::new((k, v)))
                } else {
                    None
                };
                Ok(TypeExpr::Map(inner))
            }
            _ => Ok(TypeExpr::Named(name)),
        }
    }
}
