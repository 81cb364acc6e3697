//! Defined/used variable extraction over the tokens of one statement.

use std::collections::BTreeSet;

use super::lexer::{is_keyword, Token, TokenKind};
use super::{Statement, StmtKind};
use crate::ingest::{split_identifier, Vocabulary};

type Names = BTreeSet<String>;

/// Split `toks` at every bracket-depth-0 occurrence of the operator `sep`.
/// `=` inside a lambda's parameter list is not a separator.
pub(crate) fn split_top_level<'a>(toks: &'a [Token], sep: &str) -> Vec<&'a [Token]> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut lambdas = 0usize;
    let mut start = 0;
    for (k, t) in toks.iter().enumerate() {
        match t.kind {
            TokenKind::Op => match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                ":" if depth == 0 && lambdas > 0 => lambdas -= 1,
                s if s == sep && depth == 0 && lambdas == 0 => {
                    parts.push(&toks[start..k]);
                    start = k + 1;
                }
                _ => {}
            },
            TokenKind::Name if depth == 0 && t.text == "lambda" => lambdas += 1,
            _ => {}
        }
    }
    parts.push(&toks[start..]);
    parts
}

/// Split at the first depth-0 name token `word` (e.g. `in`, `as`).
fn split_at_word<'a>(toks: &'a [Token], word: &str) -> Option<(&'a [Token], &'a [Token])> {
    let mut depth = 0i32;
    for (k, t) in toks.iter().enumerate() {
        match t.kind {
            TokenKind::Op => match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                _ => {}
            },
            TokenKind::Name if depth == 0 && t.text == word => {
                return Some((&toks[..k], &toks[k + 1..]));
            }
            _ => {}
        }
    }
    None
}

fn strip_colon(toks: &[Token]) -> &[Token] {
    match toks.last() {
        Some(t) if t.is_op(":") => &toks[..toks.len() - 1],
        _ => toks,
    }
}

fn is_var(t: &Token) -> bool {
    t.kind == TokenKind::Name && !is_keyword(&t.text)
}

/// Names read by an expression. Attribute names and keyword-argument names
/// are not variable reads; the target of a `:=` is returned as a definition.
fn read_names(toks: &[Token], uses: &mut Names, defs: &mut Names) {
    let mut depth = 0i32;
    for (k, t) in toks.iter().enumerate() {
        if t.kind == TokenKind::Op {
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                _ => {}
            }
            continue;
        }
        if !is_var(t) {
            continue;
        }
        if k > 0 && toks[k - 1].is_op(".") {
            continue;
        }
        match toks.get(k + 1) {
            Some(n) if n.is_op("=") && depth > 0 => continue,
            Some(n) if n.is_op(":=") => {
                defs.insert(t.text.clone());
                continue;
            }
            _ => {}
        }
        uses.insert(t.text.clone());
    }
}

/// Names bound by an assignment target. Plain names (including inside
/// tuple/list patterns and starred targets) are definitions; the base of a
/// subscript or attribute target and every name inside a subscript is a use.
fn target_names(toks: &[Token], defs: &mut Names, uses: &mut Names) {
    // true for pattern brackets, false for call/subscript/display brackets
    let mut stack: Vec<bool> = Vec::new();
    let pattern_prev = |prev: Option<&Token>| match prev {
        None => true,
        Some(p) => p.kind == TokenKind::Op && matches!(p.text.as_str(), "," | "(" | "[" | "*"),
    };
    for (k, t) in toks.iter().enumerate() {
        let prev = k.checked_sub(1).map(|p| &toks[p]);
        let in_pattern = stack.iter().all(|&p| p);
        if t.kind == TokenKind::Op {
            match t.text.as_str() {
                "(" | "[" => stack.push(in_pattern && pattern_prev(prev)),
                "{" => stack.push(false),
                ")" | "]" | "}" => {
                    stack.pop();
                }
                _ => {}
            }
            continue;
        }
        if !is_var(t) {
            continue;
        }
        if prev.is_some_and(|p| p.is_op(".")) {
            continue;
        }
        let next = toks.get(k + 1);
        let ends_target = match next {
            None => true,
            Some(n) => n.kind == TokenKind::Op && matches!(n.text.as_str(), "," | ")" | "]"),
        };
        let walrus = next.is_some_and(|n| n.is_op(":="));
        if (in_pattern && pattern_prev(prev) && ends_target) || walrus {
            defs.insert(t.text.clone());
        } else {
            uses.insert(t.text.clone());
        }
    }
}

fn params_defs(toks: &[Token], defs: &mut Names) {
    for item in split_top_level(toks, ",") {
        let mut it = item.iter().skip_while(|t| t.is_op("*") || t.is_op("**"));
        if let Some(t) = it.next() {
            if is_var(t) {
                defs.insert(t.text.clone());
            }
        }
    }
}

fn import_defs(toks: &[Token], defs: &mut Names) {
    let items: &[Token] = if toks[0].is_name("from") {
        match split_at_word(toks, "import") {
            Some((_, rest)) => rest,
            None => return,
        }
    } else {
        &toks[1..]
    };
    let items: Vec<&Token> = items.iter().filter(|t| !t.is_op("(") && !t.is_op(")")).collect();
    let mut start = 0;
    for k in 0..=items.len() {
        if k == items.len() || items[k].is_op(",") {
            let item = &items[start..k];
            start = k + 1;
            if let Some(pos) = item.iter().position(|t| t.is_name("as")) {
                if let Some(alias) = item.get(pos + 1) {
                    defs.insert(alias.text.clone());
                }
            } else if let Some(first) = item.first() {
                if is_var(first) {
                    defs.insert(first.text.clone());
                }
            }
        }
    }
}

/// Variables (re)defined and read by one statement.
pub fn extract_def_use(stmt: &Statement) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut defs = Names::new();
    let mut uses = Names::new();
    let toks = stmt.raw_tokens.as_slice();
    // skip a leading `async`
    let body = match toks.first() {
        Some(t) if t.is_name("async") => &toks[1..],
        _ => toks,
    };
    match stmt.kind {
        StmtKind::FuncName
        | StmtKind::Else
        | StmtKind::Try
        | StmtKind::Finally
        | StmtKind::Pass
        | StmtKind::Break
        | StmtKind::Continue => {}
        StmtKind::Params => params_defs(toks, &mut defs),
        StmtKind::If | StmtKind::Elif | StmtKind::While => {
            read_names(strip_colon(&body[1..]), &mut uses, &mut defs)
        }
        StmtKind::Return | StmtKind::Raise => read_names(&body[1..], &mut uses, &mut defs),
        StmtKind::Expr => read_names(body, &mut uses, &mut defs),
        StmtKind::For => {
            let rest = strip_colon(&body[1..]);
            match split_at_word(rest, "in") {
                Some((target, iter)) => {
                    target_names(target, &mut defs, &mut uses);
                    read_names(iter, &mut uses, &mut defs);
                }
                None => read_names(rest, &mut uses, &mut defs),
            }
        }
        StmtKind::With => {
            let mut rest = strip_colon(&body[1..]);
            if rest.first().is_some_and(|t| t.is_op("("))
                && rest.last().is_some_and(|t| t.is_op(")"))
                && split_top_level(rest, ",").len() == 1
                && split_at_word(&rest[1..rest.len() - 1], "as").is_some()
            {
                rest = &rest[1..rest.len() - 1];
            }
            for item in split_top_level(rest, ",") {
                match split_at_word(item, "as") {
                    Some((expr, target)) => {
                        read_names(expr, &mut uses, &mut defs);
                        target_names(target, &mut defs, &mut uses);
                    }
                    None => read_names(item, &mut uses, &mut defs),
                }
            }
        }
        StmtKind::Except => {
            let rest = strip_colon(&body[1..]);
            let rest = match rest.first() {
                Some(t) if t.is_op("*") => &rest[1..],
                _ => rest,
            };
            match split_at_word(rest, "as") {
                Some((expr, name)) => {
                    read_names(expr, &mut uses, &mut defs);
                    if let Some(n) = name.first().filter(|t| is_var(t)) {
                        defs.insert(n.text.clone());
                    }
                }
                None => read_names(rest, &mut uses, &mut defs),
            }
        }
        StmtKind::Assign => {
            let parts = split_top_level(toks, "=");
            let (targets, value) = parts.split_at(parts.len() - 1);
            let value = value[0];
            if targets.is_empty() {
                // annotation without a value binds nothing
                let target = split_top_level(toks, ":")[0];
                let mut unbound = Names::new();
                target_names(target, &mut unbound, &mut uses);
            } else {
                for (n, target) in targets.iter().enumerate() {
                    let target = if n == 0 {
                        // drop an annotation on the first target
                        split_top_level(target, ":")[0]
                    } else {
                        target
                    };
                    target_names(target, &mut defs, &mut uses);
                }
                read_names(value, &mut uses, &mut defs);
            }
        }
        StmtKind::AugAssign => {
            let pos = toks
                .iter()
                .position(|t| t.kind == TokenKind::Op && t.text.len() >= 2 && t.text.ends_with('=') && !matches!(t.text.as_str(), "==" | "!=" | "<=" | ">="))
                .unwrap_or(toks.len());
            let target = &toks[..pos];
            let mut target_defs = Names::new();
            target_names(target, &mut target_defs, &mut uses);
            uses.extend(target_defs.iter().cloned());
            defs.extend(target_defs);
            if pos < toks.len() {
                read_names(&toks[pos + 1..], &mut uses, &mut defs);
            }
        }
        StmtKind::Import => import_defs(toks, &mut defs),
        StmtKind::Other => {
            let name_at = match body.first() {
                Some(t) if t.is_name("def") || t.is_name("class") => Some(1),
                _ => None,
            };
            read_names(body, &mut uses, &mut defs);
            if let Some(name) = name_at.and_then(|k| body.get(k)).filter(|t| is_var(t)) {
                uses.remove(&name.text);
                defs.insert(name.text.clone());
            }
        }
    }
    (defs, uses)
}

/// Code subtokens of a statement: identifier tokens only, keywords dropped,
/// identifier-split, deduplicated in first-occurrence order and capped.
pub fn statement_subtokens(stmt: &Statement, cap: usize) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for t in &stmt.raw_tokens {
        if !is_var(t) {
            continue;
        }
        for sub in split_identifier(&t.text) {
            if out.len() == cap {
                return out;
            }
            if seen.insert(sub.clone()) {
                out.push(sub);
            }
        }
    }
    out
}

/// Vocabulary ids of [`statement_subtokens`].
pub fn statement_tokens(stmt: &Statement, vocab: &Vocabulary, cap: usize) -> Vec<u32> {
    statement_subtokens(stmt, cap).iter().map(|t| vocab.id(t)).collect()
}
