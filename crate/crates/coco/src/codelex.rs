//! Language-light lexing of method source text and comment text.
//!
//! The lexer produces flat token streams (no grammar, no AST). Code tokens
//! are split on operators and punctuation with string/char literals kept
//! whole; comment text is whitespace-split with Javadoc-style tags kept as
//! single tokens. [`split_subtokens`] further breaks tokens at camelCase,
//! snake_case and digit boundaries, which is the granularity the subword
//! tokenizers and corpus statistics operate on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexError {
    #[error("unterminated {kind} literal starting at byte {offset}")]
    UnterminatedLiteral { kind: &'static str, offset: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Literal,
    Operator,
    Punctuation,
    CommentWord,
    Tag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
}

impl Token {
    pub fn new(text: impl Into<String>, kind: TokenKind) -> Self {
        Token { text: text.into(), kind }
    }
}

/// An ordered token stream produced by [`lex_code`] or [`lex_comment`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
}

impl TokenStream {
    pub fn texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

const JAVA_KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while",
];

// Longest-match first.
const OPERATORS: &[&str] = &[
    ">>>=", ">>>", "<<=", ">>=", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "->", "::", "=", "+", "-", "*", "/", "%",
    "<", ">", "!", "&", "|", "^", "~", "?", ":",
];

const PUNCTUATION: &[char] = &['(', ')', '{', '}', '[', ']', ';', ',', '.', '@'];

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Lex a single method's source text into a flat code token stream.
///
/// Line and block comments inside the source are skipped. String and char
/// literals are kept as single tokens; an unterminated literal is an error
/// naming the byte offset where it started.
pub fn lex_code(source: &str) -> Result<TokenStream, LexError> {
    let bytes: Vec<char> = source.chars().collect();
    let mut offsets = Vec::with_capacity(bytes.len());
    {
        let mut off = 0;
        for c in &bytes {
            offsets.push(off);
            off += c.len_utf8();
        }
    }
    let n = bytes.len();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < n {
        let c = bytes[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        // Comments embedded in the method body are not code tokens.
        if c == '/' && i + 1 < n && bytes[i + 1] == '/' {
            while i < n && bytes[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && i + 1 < n && bytes[i + 1] == '*' {
            i += 2;
            while i + 1 < n && !(bytes[i] == '*' && bytes[i + 1] == '/') {
                i += 1;
            }
            i = (i + 2).min(n);
            continue;
        }
        if c == '"' || c == '\'' {
            let quote = c;
            let start = i;
            i += 1;
            let mut closed = false;
            while i < n {
                if bytes[i] == '\\' {
                    i += 2;
                    continue;
                }
                if bytes[i] == quote {
                    i += 1;
                    closed = true;
                    break;
                }
                if bytes[i] == '\n' {
                    break;
                }
                i += 1;
            }
            if !closed {
                return Err(LexError::UnterminatedLiteral {
                    kind: if quote == '"' { "string" } else { "char" },
                    offset: offsets[start],
                });
            }
            let text: String = bytes[start..i].iter().collect();
            tokens.push(Token::new(text, TokenKind::Literal));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            // Lenient numeric literal: covers hex, floats, exponents, suffixes.
            while i < n
                && (bytes[i].is_ascii_alphanumeric()
                    || bytes[i] == '.'
                    || bytes[i] == '_'
                    || ((bytes[i] == '+' || bytes[i] == '-')
                        && matches!(bytes[i - 1], 'e' | 'E' | 'p' | 'P')))
            {
                i += 1;
            }
            let text: String = bytes[start..i].iter().collect();
            tokens.push(Token::new(text, TokenKind::Literal));
            continue;
        }
        if is_ident_start(c) {
            let start = i;
            while i < n && is_ident_continue(bytes[i]) {
                i += 1;
            }
            let text: String = bytes[start..i].iter().collect();
            let kind = if JAVA_KEYWORDS.contains(&text.as_str()) {
                TokenKind::Keyword
            } else if text == "true" || text == "false" || text == "null" {
                TokenKind::Literal
            } else {
                TokenKind::Identifier
            };
            tokens.push(Token::new(text, kind));
            continue;
        }
        if PUNCTUATION.contains(&c) {
            tokens.push(Token::new(c.to_string(), TokenKind::Punctuation));
            i += 1;
            continue;
        }
        let rest: String = bytes[i..n.min(i + 4)].iter().collect();
        if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) {
            tokens.push(Token::new(*op, TokenKind::Operator));
            i += op.chars().count();
            continue;
        }
        // Anything else (stray unicode, '#', '\') becomes one-char punctuation.
        tokens.push(Token::new(c.to_string(), TokenKind::Punctuation));
        i += 1;
    }
    Ok(TokenStream { tokens })
}

/// Lex comment text (delimiters already stripped) into words, tags and
/// detached punctuation. Total on any input.
pub fn lex_comment(comment: &str) -> TokenStream {
    let mut tokens = Vec::new();
    for chunk in comment.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut lo = 0;
        let mut hi = chars.len();
        let mut leading: Vec<Token> = Vec::new();
        let mut trailing: Vec<Token> = Vec::new();
        let is_word_char = |c: char| c.is_alphanumeric() || c == '_' || c == '@' || c == '\'';
        while lo < hi && !is_word_char(chars[lo]) {
            leading.push(Token::new(chars[lo].to_string(), TokenKind::Punctuation));
            lo += 1;
        }
        while hi > lo && !is_word_char(chars[hi - 1]) {
            trailing.push(Token::new(chars[hi - 1].to_string(), TokenKind::Punctuation));
            hi -= 1;
        }
        tokens.extend(leading);
        if lo < hi {
            let word: String = chars[lo..hi].iter().collect();
            let kind = if word.starts_with('@') && word.len() > 1 {
                TokenKind::Tag
            } else {
                TokenKind::CommentWord
            };
            tokens.push(Token::new(word, kind));
        }
        tokens.extend(trailing.into_iter().rev());
    }
    TokenStream { tokens }
}

/// Split a token at camelCase, PascalCase, snake_case and digit boundaries,
/// lowercasing the output. Case and separator characters are not recoverable
/// (documented lossy). A token with no alphanumeric characters is returned
/// unchanged as a single subtoken.
pub fn split_subtokens(token: &str) -> Vec<String> {
    assert!(!token.is_empty(), "split_subtokens requires a non-empty token");
    let chars: Vec<char> = token.chars().collect();
    let mut out: Vec<String> = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, out: &mut Vec<String>| {
        if !cur.is_empty() {
            out.push(cur.to_lowercase());
            cur.clear();
        }
    };
    for i in 0..chars.len() {
        let c = chars[i];
        if !c.is_alphanumeric() {
            flush(&mut cur, &mut out);
            continue;
        }
        if !cur.is_empty() {
            let prev = chars[i - 1];
            let boundary = (prev.is_lowercase() && c.is_uppercase())
                || (prev.is_ascii_digit() != c.is_ascii_digit())
                // Acronym run followed by a capitalized word: "HTTPServer".
                || (prev.is_uppercase()
                    && c.is_uppercase()
                    && i + 1 < chars.len()
                    && chars[i + 1].is_lowercase());
            if boundary {
                flush(&mut cur, &mut out);
            }
        }
        cur.push(c);
    }
    flush(&mut cur, &mut out);
    if out.is_empty() {
        // Pure punctuation/operator token.
        out.push(token.to_lowercase());
    }
    out
}

/// Subtokenize a full stream: tags pass through whole (lowercased), all
/// other tokens go through [`split_subtokens`].
pub fn subtokenize(stream: &TokenStream) -> Vec<String> {
    let mut out = Vec::with_capacity(stream.tokens.len());
    for tok in &stream.tokens {
        match tok.kind {
            TokenKind::Tag => out.push(tok.text.to_lowercase()),
            _ => out.extend(split_subtokens(&tok.text)),
        }
    }
    out
}

/// Subtokens of a comment string (lex + split).
pub fn comment_subtokens(comment: &str) -> Vec<String> {
    subtokenize(&lex_comment(comment))
}

/// Subtokens of a method source string (lex + split).
pub fn code_subtokens(source: &str) -> Result<Vec<String>, LexError> {
    Ok(subtokenize(&lex_code(source)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(ts: &TokenStream) -> Vec<String> {
        ts.tokens.iter().map(|t| t.text.clone()).collect()
    }

    #[test]
    fn lex_minimal_fragment() {
        let ts = lex_code("return x;").unwrap();
        assert_eq!(texts(&ts), vec!["return", "x", ";"]);
        assert_eq!(ts.tokens[0].kind, TokenKind::Keyword);
        assert_eq!(ts.tokens[1].kind, TokenKind::Identifier);
    }

    #[test]
    fn lex_operator_split() {
        let ts = lex_code("a+b").unwrap();
        assert_eq!(texts(&ts), vec!["a", "+", "b"]);
    }

    #[test]
    fn lex_call() {
        let ts = lex_code("setMaxCount(n)").unwrap();
        assert_eq!(texts(&ts), vec!["setMaxCount", "(", "n", ")"]);
    }

    #[test]
    fn lex_string_literal_whole() {
        let ts = lex_code("log(\"a + b\");").unwrap();
        assert_eq!(texts(&ts), vec!["log", "(", "\"a + b\"", ")", ";"]);
        assert_eq!(ts.tokens[2].kind, TokenKind::Literal);
    }

    #[test]
    fn lex_unterminated_literal_names_offset() {
        let err = lex_code("x = \"abc").unwrap_err();
        match err {
            LexError::UnterminatedLiteral { kind, offset } => {
                assert_eq!(kind, "string");
                assert_eq!(offset, 4);
            }
        }
    }

    #[test]
    fn lex_skips_comments() {
        let ts = lex_code("int x = 1; // trailing\n/* block */ return x;").unwrap();
        assert_eq!(texts(&ts), vec!["int", "x", "=", "1", ";", "return", "x", ";"]);
    }

    #[test]
    fn lex_multichar_operators() {
        let ts = lex_code("a >= b && c != d").unwrap();
        assert_eq!(texts(&ts), vec!["a", ">=", "b", "&&", "c", "!=", "d"]);
    }

    #[test]
    fn comment_tag_split() {
        let ts = lex_comment("@return the id");
        assert_eq!(texts(&ts), vec!["@return", "the", "id"]);
        assert_eq!(ts.tokens[0].kind, TokenKind::Tag);
    }

    #[test]
    fn comment_empty() {
        assert!(lex_comment("").is_empty());
    }

    #[test]
    fn comment_punctuation_detach() {
        let ts = lex_comment("id, or null");
        assert_eq!(texts(&ts), vec!["id", ",", "or", "null"]);
    }

    #[test]
    fn subtokens_camel_case() {
        assert_eq!(split_subtokens("setMaxCount"), vec!["set", "max", "count"]);
    }

    #[test]
    fn subtokens_no_boundary() {
        assert_eq!(split_subtokens("x"), vec!["x"]);
    }

    #[test]
    fn subtokens_acronym_digit() {
        assert_eq!(split_subtokens("HTTP2Server"), vec!["http", "2", "server"]);
    }

    #[test]
    fn subtokens_snake_and_punct() {
        assert_eq!(split_subtokens("snake_case_name"), vec!["snake", "case", "name"]);
        assert_eq!(split_subtokens("+"), vec!["+"]);
        assert_eq!(split_subtokens("\"a b\""), vec!["a", "b"]);
    }

    #[test]
    fn subtokenize_keeps_tags_whole() {
        let subs = comment_subtokens("@return theMaxCount");
        assert_eq!(subs, vec!["@return", "the", "max", "count"]);
    }

    fn alnum_lower(s: &str) -> String {
        s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase()
    }

    proptest! {
        #[test]
        fn split_subtokens_never_empty_and_preserves_alnum(tok in "[A-Za-z0-9_$+;(]{1,24}") {
            let subs = split_subtokens(&tok);
            prop_assert!(!subs.is_empty());
            for s in &subs {
                prop_assert!(!s.is_empty());
            }
            let joined: String = subs.iter().map(|s| alnum_lower(s)).collect();
            prop_assert_eq!(joined, alnum_lower(&tok));
        }

        #[test]
        fn lex_code_idempotent_on_own_output(src in "[a-zA-Z0-9_ ;(){}=+*<>,.\\-]{0,120}") {
            let first = lex_code(&src).unwrap();
            let joined = first.texts().join(" ");
            let second = lex_code(&joined).unwrap();
            prop_assert_eq!(first.texts(), second.texts());
        }
    }

    #[test]
    fn lex_code_idempotent_on_literals() {
        for src in ["s = \"a // b\" + 'x';", "f(1.5e3, 0x1F);", "a.b(). c [i]"] {
            let first = lex_code(src).unwrap();
            let joined = first.texts().join(" ");
            let second = lex_code(&joined).unwrap();
            assert_eq!(first.texts(), second.texts(), "src: {src}");
        }
    }
}
