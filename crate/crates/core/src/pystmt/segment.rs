use std::cmp::Ordering;

use super::defuse::{extract_def_use, split_top_level};
use super::lexer::{logical_lines, Indent, LogicalLine, Token, TokenKind};
use super::{ParseError, Statement, StatementTree, StmtKind};

const AUG_OPS: &[&str] = &[
    "+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "^=", "|=", "@=",
];

/// Segment a single function into statements.
pub fn segment(code: &str) -> Result<StatementTree, ParseError> {
    segment_with_id(code, "")
}

pub fn segment_with_id(code: &str, source_id: &str) -> Result<StatementTree, ParseError> {
    let lines = logical_lines(code)?;
    let def_pos = lines
        .iter()
        .position(|l| def_name_pos(&l.tokens).is_some())
        .ok_or(ParseError::NoFunction)?;
    let mut b = Builder::default();
    let def_line = &lines[def_pos];
    let (name, params, inline) = split_def_header(def_line)?;
    b.push(StmtKind::FuncName, 0, vec![name], def_line);
    b.push(StmtKind::Params, 0, params, def_line);

    if !inline.is_empty() {
        for part in split_top_level(&inline, ";") {
            b.push_simple(0, part.to_vec(), def_line);
        }
        return Ok(b.finish(source_id));
    }

    let mut stack: Vec<Block> = Vec::new();
    let mut pending = Some(Pending { parent: 0, indent: def_line.indent });
    let mut docstring_checked = false;
    let mut i = def_pos + 1;

    'lines: while i < lines.len() {
        let line = &lines[i];
        let ind = line.indent;
        if let Some(p) = pending.take() {
            if ind.compare(p.indent, line.line)? != Ordering::Greater {
                return Err(ParseError::ExpectedIndentedBlock { line: line.line });
            }
            stack.push(Block { indent: ind, parent: p.parent, last: None });
        } else {
            loop {
                let top = stack.last().expect("non-empty block stack");
                match ind.compare(top.indent, line.line)? {
                    Ordering::Equal => break,
                    Ordering::Greater => return Err(ParseError::UnexpectedIndent { line: line.line }),
                    Ordering::Less => {
                        stack.pop();
                        if stack.is_empty() {
                            // dedent past the function body: the function is over
                            break 'lines;
                        }
                    }
                }
            }
        }
        let toks = &line.tokens;
        let depth = stack.len();
        let block_parent = stack.last().unwrap().parent;

        if !docstring_checked {
            docstring_checked = true;
            if depth == 1 && !toks.is_empty() && toks.iter().all(|t| t.kind == TokenKind::Str) {
                i += 1;
                continue;
            }
        }

        if toks[0].is_op("@") {
            // decorators are ignored
            i += 1;
            continue;
        }

        if def_name_pos(toks).is_some() || toks[0].is_name("class") {
            // nested definitions collapse into a single statement
            let mut all = toks.clone();
            let mut j = i + 1;
            while j < lines.len() && lines[j].indent.compare(ind, lines[j].line)? == Ordering::Greater {
                all.extend(lines[j].tokens.iter().cloned());
                j += 1;
            }
            let idx = b.push(StmtKind::Other, block_parent, all, line);
            stack.last_mut().unwrap().last = Some((idx, StmtKind::Other));
            i = j;
            continue;
        }

        let head_kind = compound_kind(toks);
        let parent = match head_kind {
            Some(kind) if kind.is_continuation() => {
                let last = stack.last().unwrap().last;
                match last {
                    Some((idx, prev)) if continues(kind, prev) => idx,
                    _ => {
                        return Err(ParseError::DanglingClause {
                            line: line.line,
                            clause: toks[0].text.clone(),
                        })
                    }
                }
            }
            _ => block_parent,
        };

        let header = match head_kind {
            Some(kind) => Some(kind),
            // generic block opener such as `match x:` / `case 1:`
            None if toks.last().is_some_and(|t| t.is_op(":"))
                && i + 1 < lines.len()
                && lines[i + 1].indent.compare(ind, lines[i + 1].line)? == Ordering::Greater =>
            {
                Some(StmtKind::Other)
            }
            None => None,
        };

        match header {
            Some(kind) => {
                let colon = header_colon(toks).ok_or(ParseError::MalformedHeader { line: line.line })?;
                let idx = b.push(kind, parent, toks[..=colon].to_vec(), line);
                stack.last_mut().unwrap().last = Some((idx, kind));
                let rest = &toks[colon + 1..];
                if rest.is_empty() {
                    pending = Some(Pending { parent: idx, indent: ind });
                } else {
                    for part in split_top_level(rest, ";") {
                        b.push_simple(idx, part.to_vec(), line);
                    }
                }
            }
            None => {
                for part in split_top_level(toks, ";") {
                    let idx = b.push_simple(parent, part.to_vec(), line);
                    if let Some(idx) = idx {
                        let kind = b.stmts[idx - 1].kind;
                        stack.last_mut().unwrap().last = Some((idx, kind));
                    }
                }
            }
        }
        i += 1;
    }
    if pending.is_some() {
        let line = lines.last().map_or(1, |l| l.line);
        return Err(ParseError::ExpectedIndentedBlock { line });
    }
    Ok(b.finish(source_id))
}

struct Pending {
    parent: usize,
    indent: Indent,
}

struct Block {
    indent: Indent,
    parent: usize,
    last: Option<(usize, StmtKind)>,
}

#[derive(Default)]
struct Builder {
    stmts: Vec<Statement>,
}

impl Builder {
    fn push(&mut self, kind: StmtKind, parent: usize, tokens: Vec<Token>, line: &LogicalLine) -> usize {
        let index = self.stmts.len() + 1;
        let line_no = tokens.first().map_or(line.line, |t| t.line);
        let mut stmt = Statement {
            index,
            kind,
            parent,
            raw_tokens: tokens,
            defined_vars: Default::default(),
            used_vars: Default::default(),
            line: line_no,
            indent: line.indent.col,
        };
        let (defs, uses) = extract_def_use(&stmt);
        stmt.defined_vars = defs;
        stmt.used_vars = uses;
        self.stmts.push(stmt);
        index
    }

    fn push_simple(&mut self, parent: usize, tokens: Vec<Token>, line: &LogicalLine) -> Option<usize> {
        if tokens.is_empty() {
            return None;
        }
        let kind = simple_kind(&tokens);
        Some(self.push(kind, parent, tokens, line))
    }

    fn finish(self, source_id: &str) -> StatementTree {
        StatementTree { source_id: source_id.to_string(), statements: self.stmts }
    }
}

/// Position of the function name if the line is a `def` (or `async def`).
fn def_name_pos(toks: &[Token]) -> Option<usize> {
    let at = if toks.first()?.is_name("async") { 1 } else { 0 };
    if toks.get(at)?.is_name("def") && toks.get(at + 1)?.kind == TokenKind::Name {
        Some(at + 1)
    } else {
        None
    }
}

fn split_def_header(line: &LogicalLine) -> Result<(Token, Vec<Token>, Vec<Token>), ParseError> {
    let toks = &line.tokens;
    let bad = ParseError::MalformedHeader { line: line.line };
    let name_at = def_name_pos(toks).ok_or(bad.clone())?;
    let open = name_at + 1;
    if !toks.get(open).is_some_and(|t| t.is_op("(")) {
        return Err(bad);
    }
    let mut depth = 0usize;
    let mut close = None;
    for (k, t) in toks.iter().enumerate().skip(open) {
        if t.kind == TokenKind::Op {
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(k);
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    let close = close.ok_or(bad.clone())?;
    let colon = header_colon(&toks[close + 1..]).map(|c| c + close + 1).ok_or(bad)?;
    Ok((
        toks[name_at].clone(),
        toks[open + 1..close].to_vec(),
        toks[colon + 1..].to_vec(),
    ))
}

/// Index of the colon ending a compound-statement header.
fn header_colon(toks: &[Token]) -> Option<usize> {
    let mut depth = 0i32;
    let mut lambdas = 0usize;
    for (k, t) in toks.iter().enumerate() {
        match t.kind {
            TokenKind::Op => match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                ":" if depth == 0 => {
                    if lambdas > 0 {
                        lambdas -= 1;
                    } else {
                        return Some(k);
                    }
                }
                _ => {}
            },
            TokenKind::Name if depth == 0 && t.text == "lambda" => lambdas += 1,
            _ => {}
        }
    }
    None
}

fn compound_kind(toks: &[Token]) -> Option<StmtKind> {
    let first = toks.first()?;
    if first.kind != TokenKind::Name {
        return None;
    }
    let word = if first.text == "async" {
        toks.get(1).map_or("", |t| t.text.as_str())
    } else {
        first.text.as_str()
    };
    Some(match word {
        "if" => StmtKind::If,
        "elif" => StmtKind::Elif,
        "else" => StmtKind::Else,
        "for" => StmtKind::For,
        "while" => StmtKind::While,
        "try" => StmtKind::Try,
        "except" => StmtKind::Except,
        "finally" => StmtKind::Finally,
        "with" => StmtKind::With,
        _ => return None,
    })
}

fn continues(clause: StmtKind, prev: StmtKind) -> bool {
    use StmtKind::*;
    match clause {
        Elif => matches!(prev, If | Elif),
        Else => matches!(prev, If | Elif | For | While | Except),
        Except => matches!(prev, Try | Except),
        Finally => matches!(prev, Try | Except | Else),
        _ => false,
    }
}

fn simple_kind(toks: &[Token]) -> StmtKind {
    let first = &toks[0];
    if first.kind == TokenKind::Name {
        match first.text.as_str() {
            "return" => return StmtKind::Return,
            "raise" => return StmtKind::Raise,
            "pass" => return StmtKind::Pass,
            "break" => return StmtKind::Break,
            "continue" => return StmtKind::Continue,
            "import" | "from" => return StmtKind::Import,
            "del" | "global" | "nonlocal" | "assert" => return StmtKind::Other,
            _ => {}
        }
    }
    let mut depth = 0i32;
    let mut lambdas = 0usize;
    let mut assign = false;
    for (k, t) in toks.iter().enumerate() {
        match t.kind {
            TokenKind::Op => match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                op if depth == 0 && AUG_OPS.contains(&op) => return StmtKind::AugAssign,
                "=" if depth == 0 && lambdas == 0 => assign = true,
                ":" if depth == 0 => {
                    if lambdas > 0 {
                        lambdas -= 1;
                    } else if k > 0 {
                        // annotated assignment
                        assign = true;
                    }
                }
                _ => {}
            },
            TokenKind::Name if depth == 0 && t.text == "lambda" => lambdas += 1,
            _ => {}
        }
    }
    if assign {
        StmtKind::Assign
    } else {
        StmtKind::Expr
    }
}
