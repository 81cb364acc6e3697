//! Line-oriented Python 3 lexer.
//!
//! Produces logical lines: physical lines joined across open brackets and
//! trailing backslashes, with comments dropped and the leading whitespace
//! recorded so the segmenter can rebuild the block structure.

use serde::Serialize;

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Name,
    Number,
    Str,
    Op,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: usize,
}

impl Token {
    pub fn is_op(&self, op: &str) -> bool {
        self.kind == TokenKind::Op && self.text == op
    }

    pub fn is_name(&self, name: &str) -> bool {
        self.kind == TokenKind::Name && self.text == name
    }
}

/// Leading whitespace of a logical line, measured the way CPython does:
/// once with tabs advancing to the next multiple of 8 and once with tabs
/// counting as a single column. Two indents are only comparable when both
/// measurements agree on the ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Indent {
    pub col: usize,
    pub alt_col: usize,
}

impl Indent {
    fn measure(ws: &str) -> Self {
        let mut col = 0;
        let mut alt_col = 0;
        for ch in ws.chars() {
            match ch {
                ' ' => {
                    col += 1;
                    alt_col += 1;
                }
                '\t' => {
                    col = (col / 8 + 1) * 8;
                    alt_col += 1;
                }
                // form feed resets the column count
                '\x0c' => {
                    col = 0;
                    alt_col = 0;
                }
                _ => {}
            }
        }
        Indent { col, alt_col }
    }

    /// Compare two indents, failing when tabs and spaces are mixed
    /// ambiguously.
    pub fn compare(self, other: Indent, line: usize) -> Result<std::cmp::Ordering, ParseError> {
        let a = self.col.cmp(&other.col);
        let b = self.alt_col.cmp(&other.alt_col);
        if a != b {
            return Err(ParseError::InconsistentIndentation { line });
        }
        Ok(a)
    }
}

#[derive(Debug, Clone)]
pub struct LogicalLine {
    pub indent: Indent,
    pub line: usize,
    pub tokens: Vec<Token>,
}

const THREE_CHAR_OPS: &[&str] = &["**=", "//=", ">>=", "<<=", "..."];
const TWO_CHAR_OPS: &[&str] = &[
    "==", "!=", "<=", ">=", "->", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "**",
    "//", "<<", ">>", ":=",
];

fn is_string_prefix(prefix: &str) -> bool {
    matches!(
        prefix.to_ascii_lowercase().as_str(),
        "r" | "u" | "b" | "f" | "br" | "rb" | "fr" | "rf"
    )
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Lexer {
    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn lex_string(&mut self, start_line: usize) -> Result<String, ParseError> {
        let quote = self.chars[self.pos];
        let triple = self.peek(1) == Some(quote) && self.peek(2) == Some(quote);
        let mut text = String::new();
        let qlen = if triple { 3 } else { 1 };
        for _ in 0..qlen {
            text.push(quote);
            self.pos += 1;
        }
        loop {
            let Some(ch) = self.peek(0) else {
                return Err(ParseError::UnterminatedString { line: start_line });
            };
            if ch == '\\' {
                text.push(ch);
                self.pos += 1;
                if let Some(next) = self.peek(0) {
                    if next == '\n' {
                        self.line += 1;
                    }
                    text.push(next);
                    self.pos += 1;
                }
                continue;
            }
            if ch == '\n' {
                if !triple {
                    return Err(ParseError::UnterminatedString { line: start_line });
                }
                self.line += 1;
            }
            if ch == quote {
                if !triple {
                    text.push(ch);
                    self.pos += 1;
                    return Ok(text);
                }
                if self.peek(1) == Some(quote) && self.peek(2) == Some(quote) {
                    for _ in 0..3 {
                        text.push(quote);
                        self.pos += 1;
                    }
                    return Ok(text);
                }
            }
            text.push(ch);
            self.pos += 1;
        }
    }

    fn lex_number(&mut self) -> String {
        let mut text = String::new();
        while let Some(ch) = self.peek(0) {
            if ch.is_ascii_alphanumeric() || ch == '_' || ch == '.' {
                text.push(ch);
                self.pos += 1;
                if (ch == 'e' || ch == 'E')
                    && !text.starts_with("0x")
                    && !text.starts_with("0X")
                    && matches!(self.peek(0), Some('+') | Some('-'))
                {
                    text.push(self.chars[self.pos]);
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        text
    }

    fn lex_op(&mut self) -> String {
        for len in [3usize, 2] {
            if self.pos + len <= self.chars.len() {
                let cand: String = self.chars[self.pos..self.pos + len].iter().collect();
                let table = if len == 3 { THREE_CHAR_OPS } else { TWO_CHAR_OPS };
                if table.contains(&cand.as_str()) {
                    self.pos += len;
                    return cand;
                }
            }
        }
        let ch = self.chars[self.pos];
        self.pos += 1;
        ch.to_string()
    }
}

/// Split Python source into logical lines.
pub fn logical_lines(src: &str) -> Result<Vec<LogicalLine>, ParseError> {
    let mut lx = Lexer {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
    };
    let mut out = Vec::new();
    // open brackets: (char, line)
    let mut brackets: Vec<(char, usize)> = Vec::new();
    let mut current: Option<LogicalLine> = None;
    let mut at_line_start = true;

    while lx.pos < lx.chars.len() {
        if at_line_start && brackets.is_empty() && current.is_none() {
            let start = lx.pos;
            while matches!(lx.peek(0), Some(' ') | Some('\t') | Some('\x0c')) {
                lx.pos += 1;
            }
            let ws: String = lx.chars[start..lx.pos].iter().collect();
            match lx.peek(0) {
                None => break,
                Some('\n') | Some('#') | Some('\r') => {
                    // blank or comment-only line
                    while let Some(ch) = lx.peek(0) {
                        lx.pos += 1;
                        if ch == '\n' {
                            break;
                        }
                    }
                    lx.line += 1;
                    at_line_start = true;
                    continue;
                }
                Some('\\') if lx.peek(1) == Some('\n') => {
                    lx.pos += 2;
                    lx.line += 1;
                    at_line_start = true;
                    continue;
                }
                _ => {
                    current = Some(LogicalLine {
                        indent: Indent::measure(&ws),
                        line: lx.line,
                        tokens: Vec::new(),
                    });
                }
            }
        }
        at_line_start = false;

        let ch = lx.chars[lx.pos];
        let line = lx.line;
        match ch {
            '\n' => {
                lx.pos += 1;
                lx.line += 1;
                if brackets.is_empty() {
                    if let Some(l) = current.take() {
                        out.push(l);
                    }
                    at_line_start = true;
                }
            }
            ' ' | '\t' | '\x0c' | '\r' => lx.pos += 1,
            '#' => {
                while let Some(c) = lx.peek(0) {
                    if c == '\n' {
                        break;
                    }
                    lx.pos += 1;
                }
            }
            '\\' => {
                // explicit line joining
                match lx.peek(1) {
                    Some('\n') => {
                        lx.pos += 2;
                        lx.line += 1;
                    }
                    Some('\r') if lx.peek(2) == Some('\n') => {
                        lx.pos += 3;
                        lx.line += 1;
                    }
                    _ => {
                        lx.pos += 1;
                        push(&mut current, TokenKind::Op, "\\".into(), line);
                    }
                }
            }
            '\'' | '"' => {
                let text = lx.lex_string(line)?;
                push(&mut current, TokenKind::Str, text, line);
            }
            c if c.is_ascii_digit()
                || (c == '.' && lx.peek(1).is_some_and(|n| n.is_ascii_digit())) =>
            {
                let text = lx.lex_number();
                push(&mut current, TokenKind::Number, text, line);
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = lx.pos;
                while let Some(n) = lx.peek(0) {
                    if n.is_alphanumeric() || n == '_' {
                        lx.pos += 1;
                    } else {
                        break;
                    }
                }
                let word: String = lx.chars[start..lx.pos].iter().collect();
                if matches!(lx.peek(0), Some('\'') | Some('"')) && is_string_prefix(&word) {
                    let body = lx.lex_string(line)?;
                    push(&mut current, TokenKind::Str, format!("{word}{body}"), line);
                } else {
                    push(&mut current, TokenKind::Name, word, line);
                }
            }
            _ => {
                let op = lx.lex_op();
                match op.as_str() {
                    "(" | "[" | "{" => brackets.push((op.chars().next().unwrap(), line)),
                    ")" | "]" | "}" => {
                        let want = match op.as_str() {
                            ")" => '(',
                            "]" => '[',
                            _ => '{',
                        };
                        match brackets.pop() {
                            Some((open, _)) if open == want => {}
                            _ => return Err(ParseError::UnbalancedBracket { line }),
                        }
                    }
                    _ => {}
                }
                push(&mut current, TokenKind::Op, op, line);
            }
        }
    }
    if let Some((_, line)) = brackets.first() {
        return Err(ParseError::UnterminatedBracket { line: *line });
    }
    if let Some(l) = current.take() {
        out.push(l);
    }
    Ok(out)
}

fn push(current: &mut Option<LogicalLine>, kind: TokenKind, text: String, line: usize) {
    if let Some(l) = current.as_mut() {
        l.tokens.push(Token { kind, text, line });
    }
}

pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if",
    "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try",
    "while", "with", "yield",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}
