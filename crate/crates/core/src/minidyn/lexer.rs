//! Tokeniser with Python-style significant indentation.
//!
//! Indentation must use spaces. Newlines inside brackets are joined
//! implicitly, comment-only and blank lines produce no tokens, and the
//! token stream always ends with NEWLINE-balanced DEDENTs followed by EOF.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Int(i64),
    Float(f64),
    Str(String),
    Bytes(Vec<u8>),
    Def,
    Class,
    If,
    Elif,
    Else,
    While,
    Return,
    Raise,
    And,
    Or,
    In,
    Not,
    Is,
    NoneKw,
    True,
    False,
    Expect,
    Plus,
    Minus,
    Star,
    DoubleStar,
    Slash,
    DoubleSlash,
    Percent,
    Assign,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Dot,
    Arrow,
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(n) => write!(f, "name '{}'", n),
            Tok::Int(v) => write!(f, "integer {}", v),
            Tok::Float(v) => write!(f, "float {}", v),
            Tok::Str(_) => write!(f, "string literal"),
            Tok::Bytes(_) => write!(f, "bytes literal"),
            Tok::Newline => write!(f, "newline"),
            Tok::Indent => write!(f, "indent"),
            Tok::Dedent => write!(f, "dedent"),
            Tok::Eof => write!(f, "end of file"),
            other => write!(f, "'{}'", token_text(other)),
        }
    }
}

fn token_text(t: &Tok) -> &'static str {
    match t {
        Tok::Def => "def",
        Tok::Class => "class",
        Tok::If => "if",
        Tok::Elif => "elif",
        Tok::Else => "else",
        Tok::While => "while",
        Tok::Return => "return",
        Tok::Raise => "raise",
        Tok::And => "and",
        Tok::Or => "or",
        Tok::In => "in",
        Tok::Not => "not",
        Tok::Is => "is",
        Tok::NoneKw => "None",
        Tok::True => "True",
        Tok::False => "False",
        Tok::Expect => "expect",
        Tok::Plus => "+",
        Tok::Minus => "-",
        Tok::Star => "*",
        Tok::DoubleStar => "**",
        Tok::Slash => "/",
        Tok::DoubleSlash => "//",
        Tok::Percent => "%",
        Tok::Assign => "=",
        Tok::EqEq => "==",
        Tok::Ne => "!=",
        Tok::Lt => "<",
        Tok::Le => "<=",
        Tok::Gt => ">",
        Tok::Ge => ">=",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::LBracket => "[",
        Tok::RBracket => "]",
        Tok::LBrace => "{",
        Tok::RBrace => "}",
        Tok::Comma => ",",
        Tok::Colon => ":",
        Tok::Dot => ".",
        Tok::Arrow => "->",
        _ => "?",
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub message: String,
    pub line: usize,
    pub col: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
    bracket_depth: usize,
    indents: Vec<usize>,
    tokens: Vec<Token>,
    at_line_start: bool,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut lx = Lexer {
        src: source.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
        bracket_depth: 0,
        indents: vec![0],
        tokens: Vec::new(),
        at_line_start: true,
    };
    lx.run()?;
    Ok(lx.tokens)
}

impl<'a> Lexer<'a> {
    fn err(&self, message: impl Into<String>) -> LexError {
        LexError { message: message.into(), line: self.line, col: self.col }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
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

    fn push(&mut self, tok: Tok, line: usize, col: usize) {
        self.tokens.push(Token { tok, line, col });
    }

    fn run(&mut self) -> Result<(), LexError> {
        loop {
            if self.at_line_start && self.bracket_depth == 0 {
                if !self.handle_indentation()? {
                    break;
                }
                self.at_line_start = false;
            }
            match self.peek() {
                None => break,
                Some(b'\n') => {
                    self.bump();
                    if self.bracket_depth == 0 {
                        let (l, c) = (self.line - 1, self.col);
                        self.push(Tok::Newline, l, c);
                        self.at_line_start = true;
                    }
                }
                Some(b'#') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some(b' ') | Some(b'\t') | Some(b'\r') => {
                    self.bump();
                }
                Some(_) => self.lex_token()?,
            }
        }
        if self
            .tokens
            .last()
            .map(|t| !matches!(t.tok, Tok::Newline | Tok::Dedent))
            .unwrap_or(false)
        {
            let (l, c) = (self.line, self.col);
            self.push(Tok::Newline, l, c);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            let (l, c) = (self.line, self.col);
            self.push(Tok::Dedent, l, c);
        }
        let (l, c) = (self.line, self.col);
        self.push(Tok::Eof, l, c);
        Ok(())
    }

    /// Measures leading spaces, emitting INDENT/DEDENT. Returns false at EOF.
    fn handle_indentation(&mut self) -> Result<bool, LexError> {
        loop {
            let start = self.pos;
            let mut width = 0usize;
            while let Some(c) = self.peek() {
                match c {
                    b' ' => {
                        width += 1;
                        self.bump();
                    }
                    b'\t' => return Err(self.err("tabs are not allowed in indentation")),
                    _ => break,
                }
            }
            match self.peek() {
                None => return Ok(false),
                Some(b'\n') => {
                    self.bump();
                    continue;
                }
                Some(b'#') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                    continue;
                }
                Some(b'\r') => {
                    self.bump();
                    continue;
                }
                Some(_) => {
                    let _ = start;
                    let current = *self.indents.last().unwrap();
                    if width > current {
                        self.indents.push(width);
                        let (l, c) = (self.line, self.col);
                        self.push(Tok::Indent, l, c);
                    } else if width < current {
                        while *self.indents.last().unwrap() > width {
                            self.indents.pop();
                            let (l, c) = (self.line, self.col);
                            self.push(Tok::Dedent, l, c);
                        }
                        if *self.indents.last().unwrap() != width {
                            return Err(self.err("unindent does not match any outer level"));
                        }
                    }
                    return Ok(true);
                }
            }
        }
    }

    fn lex_token(&mut self) -> Result<(), LexError> {
        let (line, col) = (self.line, self.col);
        let c = self.peek().unwrap();
        if c.is_ascii_digit() {
            return self.lex_number(line, col);
        }
        if c == b'"' || c == b'\'' {
            let s = self.lex_string_body()?;
            self.push(Tok::Str(s), line, col);
            return Ok(());
        }
        if c == b'b' && matches!(self.peek2(), Some(b'"') | Some(b'\'')) {
            self.bump();
            let s = self.lex_string_body()?;
            if !s.is_ascii() {
                return Err(self.err("bytes literal must be ASCII; use \\x escapes"));
            }
            let mut out = Vec::with_capacity(s.len());
            for ch in s.chars() {
                out.push(ch as u8);
            }
            self.push(Tok::Bytes(out), line, col);
            return Ok(());
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut name = String::new();
            while let Some(ch) = self.peek() {
                if ch.is_ascii_alphanumeric() || ch == b'_' {
                    name.push(ch as char);
                    self.bump();
                } else {
                    break;
                }
            }
            let tok = match name.as_str() {
                "def" => Tok::Def,
                "class" => Tok::Class,
                "if" => Tok::If,
                "elif" => Tok::Elif,
                "else" => Tok::Else,
                "while" => Tok::While,
                "return" => Tok::Return,
                "raise" => Tok::Raise,
                "and" => Tok::And,
                "or" => Tok::Or,
                "in" => Tok::In,
                "not" => Tok::Not,
                "is" => Tok::Is,
                "None" => Tok::NoneKw,
                "True" => Tok::True,
                "False" => Tok::False,
                "expect" => Tok::Expect,
                _ => Tok::Name(name),
            };
            self.push(tok, line, col);
            return Ok(());
        }
        macro_rules! two {
            ($second:literal, $double:expr, $single:expr) => {{
                self.bump();
                if self.peek() == Some($second) {
                    self.bump();
                    self.push($double, line, col);
                } else {
                    self.push($single, line, col);
                }
            }};
        }
        match c {
            b'+' => {
                self.bump();
                self.push(Tok::Plus, line, col);
            }
            b'-' => two!(b'>', Tok::Arrow, Tok::Minus),
            b'*' => two!(b'*', Tok::DoubleStar, Tok::Star),
            b'/' => two!(b'/', Tok::DoubleSlash, Tok::Slash),
            b'%' => {
                self.bump();
                self.push(Tok::Percent, line, col);
            }
            b'=' => two!(b'=', Tok::EqEq, Tok::Assign),
            b'<' => two!(b'=', Tok::Le, Tok::Lt),
            b'>' => two!(b'=', Tok::Ge, Tok::Gt),
            b'!' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    self.push(Tok::Ne, line, col);
                } else {
                    return Err(self.err("unexpected character '!'"));
                }
            }
            b'(' => {
                self.bump();
                self.bracket_depth += 1;
                self.push(Tok::LParen, line, col);
            }
            b')' => {
                self.bump();
                self.bracket_depth = self.bracket_depth.saturating_sub(1);
                self.push(Tok::RParen, line, col);
            }
            b'[' => {
                self.bump();
                self.bracket_depth += 1;
                self.push(Tok::LBracket, line, col);
            }
            b']' => {
                self.bump();
                self.bracket_depth = self.bracket_depth.saturating_sub(1);
                self.push(Tok::RBracket, line, col);
            }
            b'{' => {
                self.bump();
                self.bracket_depth += 1;
                self.push(Tok::LBrace, line, col);
            }
            b'}' => {
                self.bump();
                self.bracket_depth = self.bracket_depth.saturating_sub(1);
                self.push(Tok::RBrace, line, col);
            }
            b',' => {
                self.bump();
                self.push(Tok::Comma, line, col);
            }
            b':' => {
                self.bump();
                self.push(Tok::Colon, line, col);
            }
            b'.' => {
                self.bump();
                self.push(Tok::Dot, line, col);
            }
            other => {
                return Err(self.err(format!("unexpected character '{}'", other as char)));
            }
        }
        Ok(())
    }

    fn lex_number(&mut self, line: usize, col: usize) -> Result<(), LexError> {
        let start = self.pos;
        while self.peek().map(|c| c.is_ascii_digit()).unwrap_or(false) {
            self.bump();
        }
        let mut is_float = false;
        if self.peek() == Some(b'.') && self.peek2().map(|c| c.is_ascii_digit()).unwrap_or(false) {
            is_float = true;
            self.bump();
            while self.peek().map(|c| c.is_ascii_digit()).unwrap_or(false) {
                self.bump();
            }
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.bump();
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.bump();
            }
            if self.peek().map(|c| c.is_ascii_digit()).unwrap_or(false) {
                is_float = true;
                while self.peek().map(|c| c.is_ascii_digit()).unwrap_or(false) {
                    self.bump();
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if is_float {
            let v: f64 = text
                .parse()
                .map_err(|_| self.err(format!("invalid float literal '{}'", text)))?;
            self.push(Tok::Float(v), line, col);
        } else {
            let v: i64 = text
                .parse()
                .map_err(|_| self.err(format!("integer literal out of range '{}'", text)))?;
            self.push(Tok::Int(v), line, col);
        }
        Ok(())
    }

    /// Lexes a string starting at the opening quote; handles triple quotes.
    fn lex_string_body(&mut self) -> Result<String, LexError> {
        let quote = self.bump().unwrap();
        let triple = self.peek() == Some(quote) && self.peek2() == Some(quote);
        if triple {
            self.bump();
            self.bump();
        }
        let mut out = String::new();
        loop {
            let c = match self.bump() {
                Some(c) => c,
                None => return Err(self.err("unterminated string literal")),
            };
            if c == quote {
                if !triple {
                    return Ok(out);
                }
                if self.peek() == Some(quote) && self.peek2() == Some(quote) {
                    self.bump();
                    self.bump();
                    return Ok(out);
                }
                out.push(quote as char);
                continue;
            }
            if c == b'\n' && !triple {
                return Err(self.err("newline in string literal"));
            }
            if c == b'\\' {
                let esc = match self.bump() {
                    Some(e) => e,
                    None => return Err(self.err("unterminated escape sequence")),
                };
                match esc {
                    b'n' => out.push('\n'),
                    b't' => out.push('\t'),
                    b'r' => out.push('\r'),
                    b'0' => out.push('\0'),
                    b'\\' => out.push('\\'),
                    b'"' => out.push('"'),
                    b'\'' => out.push('\''),
                    b'x' => {
                        let hi = self.bump().ok_or_else(|| self.err("truncated \\x escape"))?;
                        let lo = self.bump().ok_or_else(|| self.err("truncated \\x escape"))?;
                        let hex = [hi, lo];
                        let hex = std::str::from_utf8(&hex)
                            .ok()
                            .and_then(|h| u8::from_str_radix(h, 16).ok())
                            .ok_or_else(|| self.err("invalid \\x escape"))?;
                        out.push(hex as char);
                    }
                    b'u' => {
                        if self.bump() != Some(b'{') {
                            return Err(self.err("expected '{' after \\u"));
                        }
                        let mut hex = String::new();
                        loop {
                            match self.bump() {
                                Some(b'}') => break,
                                Some(d) => hex.push(d as char),
                                None => return Err(self.err("unterminated \\u escape")),
                            }
                        }
                        let cp = u32::from_str_radix(&hex, 16)
                            .ok()
                            .and_then(char::from_u32)
                            .ok_or_else(|| self.err("invalid \\u escape"))?;
                        out.push(cp);
                    }
                    other => {
                        return Err(
                            self.err(format!("unknown escape sequence '\\{}'", other as char))
                        )
                    }
                }
                continue;
            }
            // Re-assemble multi-byte UTF-8 sequences.
            if c < 0x80 {
                out.push(c as char);
            } else {
                let width = if c >= 0xF0 {
                    4
                } else if c >= 0xE0 {
                    3
                } else {
                    2
                };
                let mut buf = vec![c];
                for _ in 1..width {
                    buf.push(self.bump().ok_or_else(|| self.err("invalid UTF-8"))?);
                }
                let s = std::str::from_utf8(&buf).map_err(|_| self.err("invalid UTF-8"))?;
                out.push_str(s);
            }
        }
    }
}
