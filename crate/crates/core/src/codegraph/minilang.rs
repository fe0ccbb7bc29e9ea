//! A tiny statement language (assignments, calls, blocks, if/return) with
//! a tokenizer and recursive-descent parser, so the code pipeline can be
//! exercised end to end without an external language frontend.

use thiserror::Error;

use super::{AstNode, CodeToken, NAME_PLACEHOLDER};

const KEYWORDS: [&str; 3] = ["def", "if", "return"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MiniLangError {
    #[error("unexpected character {found:?} at byte {at}")]
    UnexpectedChar { found: char, at: usize },
    #[error("unexpected token {found:?} at position {at}, expected {expected}")]
    UnexpectedToken {
        found: String,
        at: usize,
        expected: &'static str,
    },
    #[error("unexpected end of input, expected {expected}")]
    UnexpectedEnd { expected: &'static str },
}

/// Splits source text into tokens. Identifiers are flagged; keywords,
/// numbers, punctuation, and the name placeholder are plain tokens.
pub fn tokenize(source: &str) -> Result<Vec<CodeToken>, MiniLangError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if source[i..].starts_with(NAME_PLACEHOLDER) {
            tokens.push(CodeToken::plain(NAME_PLACEHOLDER));
            i += NAME_PLACEHOLDER.len();
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            let text = &source[start..i];
            if KEYWORDS.contains(&text) {
                tokens.push(CodeToken::plain(text));
            } else {
                tokens.push(CodeToken::identifier(text));
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            tokens.push(CodeToken::plain(&source[start..i]));
            continue;
        }
        if "(){},;=+-*".contains(c) {
            tokens.push(CodeToken::plain(c.to_string()));
            i += 1;
            continue;
        }
        return Err(MiniLangError::UnexpectedChar { found: c, at: i });
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [CodeToken],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a CodeToken> {
        self.tokens.get(self.pos)
    }

    fn peek_text(&self) -> Option<&'a str> {
        self.peek().map(|t| t.text.as_str())
    }

    fn next_is(&self, text: &str) -> bool {
        self.peek_text() == Some(text)
    }

    fn bump(&mut self) -> usize {
        let at = self.pos;
        self.pos += 1;
        at
    }

    fn expect(&mut self, text: &'static str) -> Result<usize, MiniLangError> {
        match self.peek() {
            Some(t) if t.text == text => Ok(self.bump()),
            Some(t) => Err(MiniLangError::UnexpectedToken {
                found: t.text.clone(),
                at: self.pos,
                expected: text,
            }),
            None => Err(MiniLangError::UnexpectedEnd { expected: text }),
        }
    }

    fn expect_name(&mut self) -> Result<usize, MiniLangError> {
        match self.peek() {
            Some(t) if t.is_identifier || t.text == NAME_PLACEHOLDER => Ok(self.bump()),
            Some(t) => Err(MiniLangError::UnexpectedToken {
                found: t.text.clone(),
                at: self.pos,
                expected: "method name",
            }),
            None => Err(MiniLangError::UnexpectedEnd {
                expected: "method name",
            }),
        }
    }

    fn method(&mut self) -> Result<AstNode, MiniLangError> {
        self.expect("def")?;
        let name = AstNode::leaf("Name", self.expect_name()?);
        self.expect("(")?;
        let mut params = Vec::new();
        if !self.next_is(")") {
            loop {
                let t = match self.peek() {
                    Some(t) if t.is_identifier => self.bump(),
                    Some(t) => {
                        return Err(MiniLangError::UnexpectedToken {
                            found: t.text.clone(),
                            at: self.pos,
                            expected: "parameter name",
                        })
                    }
                    None => {
                        return Err(MiniLangError::UnexpectedEnd {
                            expected: "parameter name",
                        })
                    }
                };
                params.push(AstNode::leaf("Param", t));
                if self.next_is(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(")")?;
        let body = self.block()?;
        Ok(AstNode::interior(
            "Method",
            vec![name, AstNode::interior("Params", params), body],
        ))
    }

    fn block(&mut self) -> Result<AstNode, MiniLangError> {
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.next_is("}") {
            if self.peek().is_none() {
                return Err(MiniLangError::UnexpectedEnd { expected: "}" });
            }
            stmts.push(self.statement()?);
        }
        self.expect("}")?;
        Ok(AstNode::interior("Block", stmts))
    }

    fn statement(&mut self) -> Result<AstNode, MiniLangError> {
        if self.next_is("if") {
            self.bump();
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let body = self.block()?;
            return Ok(AstNode::interior("If", vec![cond, body]));
        }
        if self.next_is("return") {
            self.bump();
            let mut children = Vec::new();
            if !self.next_is(";") {
                children.push(self.expr()?);
            }
            self.expect(";")?;
            return Ok(AstNode::interior("Return", children));
        }
        // Assignment needs two-token lookahead: ident '='.
        let is_assign = self
            .peek()
            .map(|t| t.is_identifier)
            .unwrap_or(false)
            && self.tokens.get(self.pos + 1).map(|t| t.text.as_str()) == Some("=");
        if is_assign {
            let lhs = AstNode::leaf("Ident", self.bump());
            let eq = AstNode::leaf("Op", self.bump());
            let rhs = self.expr()?;
            self.expect(";")?;
            return Ok(AstNode::interior("Assign", vec![lhs, eq, rhs]));
        }
        let e = self.expr()?;
        self.expect(";")?;
        Ok(AstNode::interior("ExprStmt", vec![e]))
    }

    fn expr(&mut self) -> Result<AstNode, MiniLangError> {
        let mut lhs = self.term()?;
        while matches!(self.peek_text(), Some("+" | "-" | "*")) {
            let op = AstNode::leaf("Op", self.bump());
            let rhs = self.term()?;
            lhs = AstNode::interior("BinOp", vec![lhs, op, rhs]);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<AstNode, MiniLangError> {
        match self.peek() {
            Some(t) if t.is_identifier => {
                let ident = AstNode::leaf("Ident", self.bump());
                if self.next_is("(") {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.next_is(")") {
                        loop {
                            args.push(self.expr()?);
                            if self.next_is(",") {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(")")?;
                    return Ok(AstNode::interior(
                        "Call",
                        vec![ident, AstNode::interior("Args", args)],
                    ));
                }
                Ok(ident)
            }
            Some(t) if t.text.chars().all(|c| c.is_ascii_digit()) => {
                Ok(AstNode::leaf("Number", self.bump()))
            }
            Some(t) => Err(MiniLangError::UnexpectedToken {
                found: t.text.clone(),
                at: self.pos,
                expected: "identifier or number",
            }),
            None => Err(MiniLangError::UnexpectedEnd {
                expected: "identifier or number",
            }),
        }
    }
}

/// Tokenizes and parses one method definition, returning the token stream
/// and its parse tree.
pub fn parse_method(source: &str) -> Result<(Vec<CodeToken>, AstNode), MiniLangError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
    };
    let ast = parser.method()?;
    if let Some(t) = parser.peek() {
        return Err(MiniLangError::UnexpectedToken {
            found: t.text.clone(),
            at: parser.pos,
            expected: "end of input",
        });
    }
    Ok((tokens, ast))
}
