//! Sequence edit scripts between two token streams.
//!
//! [`diff`] aligns two lexed streams with a minimal token-level edit script
//! (Myers' greedy algorithm, leftmost-biased and deterministic) and groups
//! it into maximal KEEP / INSERT / DELETE / REPLACE spans. [`flatten`] emits
//! the marker-delimited flat sequence used as the edit-side input of the
//! just-in-time classifier; [`parse_flat`] inverts it, and [`apply`] replays
//! an edit script onto the old stream.

use crate::codelex::{lex_code, Token, TokenKind, TokenStream};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const KEEP_OPEN: &str = "<KEEP>";
pub const KEEP_CLOSE: &str = "</KEEP>";
pub const INSERT_OPEN: &str = "<INSERT>";
pub const INSERT_CLOSE: &str = "</INSERT>";
pub const DELETE_OPEN: &str = "<DELETE>";
pub const DELETE_CLOSE: &str = "</DELETE>";
pub const REPLACE_OLD: &str = "<REPLACE_OLD>";
pub const REPLACE_NEW: &str = "<REPLACE_NEW>";
pub const REPLACE_CLOSE: &str = "</REPLACE>";

/// All reserved marker tokens, in a fixed order. These are registered as
/// special vocabulary entries so they never fragment or collide with source
/// tokens (no lexer emits a multi-character `<...>` token).
pub const MARKERS: [&str; 9] = [
    KEEP_OPEN,
    KEEP_CLOSE,
    INSERT_OPEN,
    INSERT_CLOSE,
    DELETE_OPEN,
    DELETE_CLOSE,
    REPLACE_OLD,
    REPLACE_NEW,
    REPLACE_CLOSE,
];

pub fn is_marker(token: &str) -> bool {
    MARKERS.contains(&token)
}

#[derive(Debug, Error)]
pub enum EditError {
    #[error("old-side mismatch at token index {index}: edit expects {expected:?}, stream has {found:?}")]
    OldSideMismatch {
        index: usize,
        expected: Option<String>,
        found: Option<String>,
    },
    #[error("malformed flat sequence at position {position}: {reason}")]
    MalformedFlat { position: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Span {
    Keep(Vec<Token>),
    Insert(Vec<Token>),
    Delete(Vec<Token>),
    Replace { old: Vec<Token>, new: Vec<Token> },
}

impl Span {
    pub fn old_tokens(&self) -> &[Token] {
        match self {
            Span::Keep(t) | Span::Delete(t) => t,
            Span::Insert(_) => &[],
            Span::Replace { old, .. } => old,
        }
    }

    pub fn new_tokens(&self) -> &[Token] {
        match self {
            Span::Keep(t) | Span::Insert(t) => t,
            Span::Delete(_) => &[],
            Span::Replace { new, .. } => new,
        }
    }

    fn action_id(&self) -> u8 {
        match self {
            Span::Keep(_) => 0,
            Span::Insert(_) => 1,
            Span::Delete(_) => 2,
            Span::Replace { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditSequence {
    pub spans: Vec<Span>,
}

impl EditSequence {
    /// Old-side and new-side non-KEEP token counts; equals
    /// `|a| + |b| - 2*LCS(a, b)` for a minimal script.
    pub fn non_keep_tokens(&self) -> usize {
        self.spans
            .iter()
            .map(|s| match s {
                Span::Keep(_) => 0,
                Span::Insert(t) | Span::Delete(t) => t.len(),
                Span::Replace { old, new } => old.len() + new.len(),
            })
            .sum()
    }

    pub fn old_texts(&self) -> Vec<&str> {
        self.spans
            .iter()
            .flat_map(|s| s.old_tokens().iter().map(|t| t.text.as_str()))
            .collect()
    }

    pub fn new_texts(&self) -> Vec<&str> {
        self.spans
            .iter()
            .flat_map(|s| s.new_tokens().iter().map(|t| t.text.as_str()))
            .collect()
    }

    fn assert_maximal(&self) {
        debug_assert!(
            self.spans.windows(2).all(|w| w[0].action_id() != w[1].action_id()),
            "adjacent spans share an action"
        );
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Op {
    Keep,
    Del,
    Ins,
}

/// Minimal edit script via Myers' greedy O(ND) algorithm.
fn myers_ops(a: &[&str], b: &[&str]) -> Vec<Op> {
    let n = a.len();
    let m = b.len();
    if n == 0 {
        return vec![Op::Ins; m];
    }
    if m == 0 {
        return vec![Op::Del; n];
    }
    let max = n + m;
    let off = max as isize;
    let mut v = vec![0isize; 2 * max + 1];
    // trace[d] holds V restricted to diagonals [-d, d] before round d runs.
    let mut trace: Vec<Vec<isize>> = Vec::new();
    let mut found_d = None;
    'outer: for d in 0..=(max as isize) {
        let lo = (off - d) as usize;
        let hi = (off + d) as usize;
        trace.push(v[lo..=hi].to_vec());
        let mut k = -d;
        while k <= d {
            let idx = (k + off) as usize;
            let mut x = if k == -d || (k != d && v[idx - 1] < v[idx + 1]) {
                v[idx + 1]
            } else {
                v[idx - 1] + 1
            };
            let mut y = x - k;
            while (x as usize) < n && (y as usize) < m && a[x as usize] == b[y as usize] {
                x += 1;
                y += 1;
            }
            v[idx] = x;
            if x as usize >= n && y as usize >= m {
                found_d = Some(d);
                break 'outer;
            }
            k += 2;
        }
    }
    let total_d = found_d.expect("bounded search always terminates");

    let mut ops_rev: Vec<Op> = Vec::with_capacity(n + m);
    let mut x = n as isize;
    let mut y = m as isize;
    for d in (1..=total_d).rev() {
        let row = &trace[d as usize];
        let at = |k: isize| row[(k + d) as usize];
        let k = x - y;
        let prev_k = if k == -d || (k != d && at(k - 1) < at(k + 1)) { k + 1 } else { k - 1 };
        let prev_x = at(prev_k);
        let prev_y = prev_x - prev_k;
        let (post_x, post_y) = if prev_k == k + 1 { (prev_x, prev_y + 1) } else { (prev_x + 1, prev_y) };
        while x > post_x && y > post_y {
            ops_rev.push(Op::Keep);
            x -= 1;
            y -= 1;
        }
        if prev_k == k + 1 {
            ops_rev.push(Op::Ins);
        } else {
            ops_rev.push(Op::Del);
        }
        x = prev_x;
        y = prev_y;
    }
    while x > 0 && y > 0 {
        ops_rev.push(Op::Keep);
        x -= 1;
        y -= 1;
    }
    debug_assert!(x == 0 && y == 0);
    ops_rev.reverse();
    ops_rev
}

/// Align two token streams into a minimal edit script grouped into maximal
/// spans. An adjacent delete/insert pair collapses into one REPLACE span.
pub fn diff(old: &TokenStream, new: &TokenStream) -> EditSequence {
    let a_texts = old.texts();
    let b_texts = new.texts();
    let n = a_texts.len();
    let m = b_texts.len();

    let mut prefix = 0;
    while prefix < n && prefix < m && a_texts[prefix] == b_texts[prefix] {
        prefix += 1;
    }
    let mut suffix = 0;
    while suffix < n - prefix && suffix < m - prefix && a_texts[n - 1 - suffix] == b_texts[m - 1 - suffix]
    {
        suffix += 1;
    }

    let mid_ops = myers_ops(&a_texts[prefix..n - suffix], &b_texts[prefix..m - suffix]);
    let mut ops = Vec::with_capacity(n + m);
    ops.extend(std::iter::repeat_n(Op::Keep, prefix));
    ops.extend(mid_ops);
    ops.extend(std::iter::repeat_n(Op::Keep, suffix));

    let mut spans = Vec::new();
    let mut ai = 0usize;
    let mut bi = 0usize;
    let mut i = 0usize;
    while i < ops.len() {
        if ops[i] == Op::Keep {
            let mut kept = Vec::new();
            while i < ops.len() && ops[i] == Op::Keep {
                kept.push(old.tokens[ai].clone());
                ai += 1;
                bi += 1;
                i += 1;
            }
            spans.push(Span::Keep(kept));
        } else {
            // A maximal run of deletions/insertions in any interleaving
            // becomes one DELETE, INSERT or REPLACE span.
            let mut removed = Vec::new();
            let mut added = Vec::new();
            while i < ops.len() && ops[i] != Op::Keep {
                match ops[i] {
                    Op::Del => {
                        removed.push(old.tokens[ai].clone());
                        ai += 1;
                    }
                    Op::Ins => {
                        added.push(new.tokens[bi].clone());
                        bi += 1;
                    }
                    Op::Keep => unreachable!(),
                }
                i += 1;
            }
            spans.push(match (removed.is_empty(), added.is_empty()) {
                (false, true) => Span::Delete(removed),
                (true, false) => Span::Insert(added),
                (false, false) => Span::Replace { old: removed, new: added },
                (true, true) => unreachable!("empty edit region"),
            });
        }
    }
    let edit = EditSequence { spans };
    edit.assert_maximal();
    debug_assert_eq!(edit.old_texts(), a_texts);
    debug_assert_eq!(edit.new_texts(), b_texts);
    edit
}

/// Replay an edit script onto its old stream, producing the new stream.
pub fn apply(edit: &EditSequence, old: &TokenStream) -> Result<TokenStream, EditError> {
    let mut cursor = 0usize;
    let mut out = Vec::new();
    for span in &edit.spans {
        for expected in span.old_tokens() {
            match old.tokens.get(cursor) {
                Some(found) if found.text == expected.text => cursor += 1,
                found => {
                    return Err(EditError::OldSideMismatch {
                        index: cursor,
                        expected: Some(expected.text.clone()),
                        found: found.map(|t| t.text.clone()),
                    })
                }
            }
        }
        out.extend(span.new_tokens().iter().cloned());
    }
    if cursor != old.tokens.len() {
        return Err(EditError::OldSideMismatch {
            index: cursor,
            expected: None,
            found: old.tokens.get(cursor).map(|t| t.text.clone()),
        });
    }
    Ok(TokenStream { tokens: out })
}

/// Flatten an edit script into the marker-delimited token sequence.
pub fn flatten(edit: &EditSequence) -> Vec<String> {
    let mut out = Vec::new();
    for span in &edit.spans {
        match span {
            Span::Keep(tokens) => {
                out.push(KEEP_OPEN.to_string());
                out.extend(tokens.iter().map(|t| t.text.clone()));
                out.push(KEEP_CLOSE.to_string());
            }
            Span::Insert(tokens) => {
                out.push(INSERT_OPEN.to_string());
                out.extend(tokens.iter().map(|t| t.text.clone()));
                out.push(INSERT_CLOSE.to_string());
            }
            Span::Delete(tokens) => {
                out.push(DELETE_OPEN.to_string());
                out.extend(tokens.iter().map(|t| t.text.clone()));
                out.push(DELETE_CLOSE.to_string());
            }
            Span::Replace { old, new } => {
                out.push(REPLACE_OLD.to_string());
                out.extend(old.iter().map(|t| t.text.clone()));
                out.push(REPLACE_NEW.to_string());
                out.extend(new.iter().map(|t| t.text.clone()));
                out.push(REPLACE_CLOSE.to_string());
            }
        }
    }
    out
}

/// Classify a bare token text the way the code lexer would.
fn classify(text: &str) -> Token {
    match lex_code(text) {
        Ok(ts) if ts.tokens.len() == 1 && ts.tokens[0].text == text => ts.tokens[0].clone(),
        _ => Token::new(text, TokenKind::Identifier),
    }
}

/// Parse a marker-delimited flat sequence back into an edit script.
/// Inverse of [`flatten`].
pub fn parse_flat(tokens: &[String]) -> Result<EditSequence, EditError> {
    let mut spans = Vec::new();
    let mut i = 0usize;
    let err = |position: usize, reason: &str| EditError::MalformedFlat {
        position,
        reason: reason.to_string(),
    };
    while i < tokens.len() {
        let open = tokens[i].as_str();
        let start = i;
        i += 1;
        let mut collect_until = |close: &str, i: &mut usize| -> Result<Vec<Token>, EditError> {
            let mut acc = Vec::new();
            while *i < tokens.len() && tokens[*i] != close {
                if is_marker(&tokens[*i]) {
                    return Err(err(*i, "unexpected marker inside span"));
                }
                acc.push(classify(&tokens[*i]));
                *i += 1;
            }
            if *i >= tokens.len() {
                return Err(err(start, "unclosed span"));
            }
            *i += 1; // consume close marker
            Ok(acc)
        };
        match open {
            KEEP_OPEN => spans.push(Span::Keep(collect_until(KEEP_CLOSE, &mut i)?)),
            INSERT_OPEN => spans.push(Span::Insert(collect_until(INSERT_CLOSE, &mut i)?)),
            DELETE_OPEN => spans.push(Span::Delete(collect_until(DELETE_CLOSE, &mut i)?)),
            REPLACE_OLD => {
                let mut old = Vec::new();
                while i < tokens.len() && tokens[i] != REPLACE_NEW {
                    if is_marker(&tokens[i]) {
                        return Err(err(i, "unexpected marker inside replace old side"));
                    }
                    old.push(classify(&tokens[i]));
                    i += 1;
                }
                if i >= tokens.len() {
                    return Err(err(start, "replace span missing new side"));
                }
                i += 1;
                let new = collect_until(REPLACE_CLOSE, &mut i)?;
                spans.push(Span::Replace { old, new });
            }
            _ => return Err(err(start, "expected a span-opening marker")),
        }
    }
    Ok(EditSequence { spans })
}
