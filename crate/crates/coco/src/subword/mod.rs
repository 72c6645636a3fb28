//! Subword vocabularies: byte-pair-encoding and WordPiece training,
//! encoding and decoding.
//!
//! Both schemes reserve the same special tokens at the lowest ids: padding,
//! unknown, classification and separator tokens plus the nine edit-sequence
//! markers, so flattened edit scripts never fragment.

mod bpe;
mod wordpiece;

use crate::editseq::MARKERS;
use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// Word-end marker suffix used by the BPE scheme so token boundaries survive
/// a decode round trip. Corpus tokens containing this exact substring are
/// rejected at training time.
pub const WORD_END: &str = "</w>";

/// Continuation prefix marking non-initial WordPiece pieces.
pub const CONTINUATION_PREFIX: &str = "##";

pub const UNK_DECODED: &str = "[UNK]";

/// All reserved special tokens in id order: PAD=0, UNK=1, CLS=2, SEP=3,
/// then the edit markers.
pub fn special_tokens() -> Vec<&'static str> {
    let mut out = vec![PAD, UNK, CLS, SEP];
    out.extend_from_slice(&MARKERS);
    out
}

pub fn num_specials() -> usize {
    4 + MARKERS.len()
}

#[derive(Debug, Error)]
pub enum SubwordError {
    #[error("training corpus contains no usable tokens")]
    EmptyCorpus,
    #[error("target size {target} is smaller than {required} (specials plus initial alphabet)")]
    TargetTooSmall { target: usize, required: usize },
    #[error("corpus token {0:?} contains whitespace or a reserved substring")]
    BadToken(String),
    #[error("piece id {id} out of range (vocabulary has {len} pieces)")]
    IdOutOfRange { id: u32, len: usize },
    #[error("malformed vocabulary file {path}: {reason}")]
    BadVocabFile { path: PathBuf, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    WordPiece,
    Bpe,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::WordPiece => write!(f, "wordpiece"),
            Scheme::Bpe => write!(f, "bpe"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wordpiece" => Ok(Scheme::WordPiece),
            "bpe" => Ok(Scheme::Bpe),
            other => Err(format!("unknown subword scheme {other:?}")),
        }
    }
}

/// A trained subword vocabulary.
#[derive(Debug, Clone)]
pub struct SubwordVocab {
    pub scheme: Scheme,
    pub target_size: usize,
    pieces: Vec<String>,
    piece_ids: HashMap<String, u32>,
    merges: Vec<(String, String)>,
    merge_ranks: HashMap<(String, String), u32>,
    exhausted: bool,
    max_piece_chars: usize,
}

impl SubwordVocab {
    pub(crate) fn from_parts(
        scheme: Scheme,
        target_size: usize,
        pieces: Vec<String>,
        merges: Vec<(String, String)>,
    ) -> Self {
        let piece_ids: HashMap<String, u32> =
            pieces.iter().enumerate().map(|(i, p)| (p.clone(), i as u32)).collect();
        let merge_ranks: HashMap<(String, String), u32> =
            merges.iter().enumerate().map(|(i, m)| (m.clone(), i as u32)).collect();
        let max_piece_chars = pieces.iter().map(|p| p.chars().count()).max().unwrap_or(0);
        let exhausted = pieces.len() < target_size;
        SubwordVocab {
            scheme,
            target_size,
            pieces,
            piece_ids,
            merges,
            merge_ranks,
            exhausted,
            max_piece_chars,
        }
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// True when training ran out of mergeable pairs before reaching the
    /// target size.
    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn piece_id(&self, piece: &str) -> Option<u32> {
        self.piece_ids.get(piece).copied()
    }

    pub fn pad_id(&self) -> u32 {
        0
    }

    pub fn unk_id(&self) -> u32 {
        1
    }

    pub fn cls_id(&self) -> u32 {
        2
    }

    pub fn sep_id(&self) -> u32 {
        3
    }

    /// Id of a reserved special token, if `token` is one.
    pub fn special_id(&self, token: &str) -> Option<u32> {
        special_tokens().iter().position(|s| *s == token).map(|i| i as u32)
    }

    /// Encode a list of tokens into piece ids. Special tokens map to their
    /// reserved ids and are never split; a token that cannot be segmented
    /// becomes a single UNK id.
    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        let mut out = Vec::with_capacity(tokens.len());
        for tok in tokens {
            self.encode_token_into(tok, &mut out);
        }
        out
    }

    pub fn encode_token(&self, token: &str) -> Vec<u32> {
        let mut out = Vec::new();
        self.encode_token_into(token, &mut out);
        out
    }

    fn encode_token_into(&self, token: &str, out: &mut Vec<u32>) {
        if let Some(id) = self.special_id(token) {
            out.push(id);
            return;
        }
        match self.scheme {
            Scheme::WordPiece => wordpiece::encode_token(self, token, out),
            Scheme::Bpe => bpe::encode_token(self, token, out),
        }
    }

    /// Decode piece ids back into tokens. Inverse of [`Self::encode`] for
    /// inputs whose encoding produced no UNK.
    pub fn decode(&self, ids: &[u32]) -> Result<Vec<String>, SubwordError> {
        let mut out: Vec<String> = Vec::new();
        let mut open: Option<String> = None;
        let flush = |open: &mut Option<String>, out: &mut Vec<String>| {
            if let Some(tok) = open.take() {
                out.push(tok);
            }
        };
        for &id in ids {
            let piece = self
                .pieces
                .get(id as usize)
                .ok_or(SubwordError::IdOutOfRange { id, len: self.pieces.len() })?;
            if (id as usize) < num_specials() {
                flush(&mut open, &mut out);
                out.push(if id == self.unk_id() { UNK_DECODED.to_string() } else { piece.clone() });
                continue;
            }
            match self.scheme {
                Scheme::WordPiece => {
                    if let Some(cont) = piece.strip_prefix(CONTINUATION_PREFIX) {
                        match open.as_mut() {
                            Some(tok) => tok.push_str(cont),
                            None => open = Some(cont.to_string()),
                        }
                    } else {
                        flush(&mut open, &mut out);
                        open = Some(piece.clone());
                    }
                }
                Scheme::Bpe => {
                    let (body, closes) = match piece.strip_suffix(WORD_END) {
                        Some(body) => (body, true),
                        None => (piece.as_str(), false),
                    };
                    match open.as_mut() {
                        Some(tok) => tok.push_str(body),
                        None => open = Some(body.to_string()),
                    }
                    if closes {
                        flush(&mut open, &mut out);
                    }
                }
            }
        }
        flush(&mut open, &mut out);
        Ok(out)
    }

    pub(crate) fn max_piece_chars(&self) -> usize {
        self.max_piece_chars
    }

    pub(crate) fn merge_rank(&self, left: &str, right: &str) -> Option<u32> {
        self.merge_ranks.get(&(left.to_string(), right.to_string())).copied()
    }

    /// Write the vocabulary: a header line `scheme target_size`, then one
    /// piece per line in index order. BPE merges go to a sibling file
    /// (`<path>.merges`), one `left right` pair per line in merge order.
    pub fn save(&self, path: &Path) -> Result<(), SubwordError> {
        let io_err = |source| SubwordError::Io { path: path.to_path_buf(), source };
        let file = fs::File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        (|| -> std::io::Result<()> {
            writeln!(w, "{} {}", self.scheme, self.target_size)?;
            for piece in &self.pieces {
                writeln!(w, "{piece}")?;
            }
            w.flush()
        })()
        .map_err(|source| SubwordError::Io { path: path.to_path_buf(), source })?;
        if self.scheme == Scheme::Bpe {
            let merges_path = merges_path(path);
            let file = fs::File::create(&merges_path)
                .map_err(|source| SubwordError::Io { path: merges_path.clone(), source })?;
            let mut w = BufWriter::new(file);
            (|| -> std::io::Result<()> {
                for (l, r) in &self.merges {
                    writeln!(w, "{l} {r}")?;
                }
                w.flush()
            })()
            .map_err(|source| SubwordError::Io { path: merges_path.clone(), source })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SubwordError> {
        let bad = |reason: &str| SubwordError::BadVocabFile {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let text = fs::read_to_string(path)
            .map_err(|source| SubwordError::Io { path: path.to_path_buf(), source })?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        let mut parts = header.split_whitespace();
        let scheme: Scheme = parts
            .next()
            .ok_or_else(|| bad("missing scheme in header"))?
            .parse()
            .map_err(|e: String| bad(&e))?;
        let target_size: usize = parts
            .next()
            .ok_or_else(|| bad("missing target size in header"))?
            .parse()
            .map_err(|_| bad("target size is not a number"))?;
        let pieces: Vec<String> = lines.map(|l| l.to_string()).collect();
        let specials = special_tokens();
        if pieces.len() < specials.len() {
            return Err(bad("fewer pieces than reserved specials"));
        }
        for (i, s) in specials.iter().enumerate() {
            if pieces[i] != *s {
                return Err(bad(&format!("piece {i} must be the special {s:?}")));
            }
        }
        let merges = if scheme == Scheme::Bpe {
            let mpath = merges_path(path);
            let mtext = fs::read_to_string(&mpath)
                .map_err(|source| SubwordError::Io { path: mpath.clone(), source })?;
            let mut merges = Vec::new();
            for (ln, line) in mtext.lines().enumerate() {
                if line.is_empty() {
                    continue;
                }
                let mut it = line.split(' ');
                match (it.next(), it.next(), it.next()) {
                    (Some(l), Some(r), None) => merges.push((l.to_string(), r.to_string())),
                    _ => {
                        return Err(SubwordError::BadVocabFile {
                            path: mpath.clone(),
                            reason: format!("line {}: expected `left right`", ln + 1),
                        })
                    }
                }
            }
            merges
        } else {
            Vec::new()
        };
        Ok(SubwordVocab::from_parts(scheme, target_size, pieces, merges))
    }
}

pub fn merges_path(vocab_path: &Path) -> PathBuf {
    let mut os = vocab_path.as_os_str().to_os_string();
    os.push(".merges");
    PathBuf::from(os)
}

pub use bpe::train_bpe;
pub use wordpiece::train_wordpiece;

/// Count word frequencies over the corpus. Reserved specials and tokens
/// that collide with a scheme's structural markers (`##` prefix for
/// WordPiece, `</w>` substring for BPE) are skipped; tokens containing
/// whitespace would break the vocabulary file format and are rejected.
pub(crate) fn word_frequencies<I>(
    corpus: I,
    scheme: Scheme,
) -> Result<HashMap<String, u64>, SubwordError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let specials = special_tokens();
    let mut freqs: HashMap<String, u64> = HashMap::new();
    for tokens in corpus {
        for tok in tokens {
            if specials.contains(&tok.as_str()) || reserved_form(&tok, scheme) {
                continue;
            }
            if tok.is_empty() || tok.chars().any(|c| c.is_whitespace()) {
                return Err(SubwordError::BadToken(tok));
            }
            *freqs.entry(tok).or_insert(0) += 1;
        }
    }
    if freqs.is_empty() {
        return Err(SubwordError::EmptyCorpus);
    }
    Ok(freqs)
}

/// True when a token collides with a scheme's structural notation and can
/// neither be trained on nor round-tripped; such tokens encode to UNK.
pub(crate) fn reserved_form(token: &str, scheme: Scheme) -> bool {
    match scheme {
        Scheme::WordPiece => token.starts_with(CONTINUATION_PREFIX),
        Scheme::Bpe => token.contains(WORD_END),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(words: &[(&str, usize)]) -> Vec<Vec<String>> {
        words
            .iter()
            .flat_map(|(w, n)| std::iter::repeat_n(vec![w.to_string()], *n))
            .collect()
    }

    #[test]
    fn bpe_first_merge_is_most_frequent_pair() {
        // Pair (a, a) occurs 3 times across the corpus, (a, b</w>) twice.
        let c = corpus(&[("aaab", 1), ("aab", 1)]);
        let alphabet = 4; // {a, a</w>, b, b</w>}
        let vocab = train_bpe(c, num_specials() + alphabet + 1).unwrap();
        assert_eq!(vocab.merges()[0], ("a".to_string(), "a".to_string()));
        assert_eq!(vocab.merges().len(), 1);
    }

    #[test]
    fn bpe_no_merge_boundary_gives_character_vocab() {
        let c = corpus(&[("aaab", 1), ("aab", 1)]);
        let vocab = train_bpe(c, num_specials() + 4).unwrap();
        assert!(vocab.merges().is_empty());
        assert_eq!(vocab.len(), num_specials() + 4);
        assert!(!vocab.is_exhausted());
    }

    #[test]
    fn bpe_target_too_small_errors() {
        let c = corpus(&[("ab", 1)]);
        match train_bpe(c, 3) {
            Err(SubwordError::TargetTooSmall { .. }) => {}
            other => panic!("expected TargetTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn bpe_training_is_deterministic() {
        let c = corpus(&[("alpha", 3), ("alps", 2), ("beta", 5), ("bet", 1)]);
        let a = train_bpe(c.clone(), num_specials() + 40).unwrap();
        let b = train_bpe(c, num_specials() + 40).unwrap();
        assert_eq!(a.merges(), b.merges());
        assert_eq!(a.pieces(), b.pieces());
    }

    #[test]
    fn wordpiece_single_candidate_merges() {
        let c = corpus(&[("ab", 4)]);
        // Alphabet is {a, ##a, b, ##b} -> 4 entries.
        let vocab = train_wordpiece(c, num_specials() + 4 + 1).unwrap();
        assert_eq!(vocab.merges()[0], ("a".to_string(), "##b".to_string()));
        assert_eq!(vocab.pieces().last().unwrap(), "ab");
    }

    #[test]
    fn wordpiece_ratio_score_beats_raw_count() {
        // (a, ##b): count 10 but count(a)=100, count(##b)=10 -> score 0.01.
        // (c, ##d): count 2 with count(c)=count(##d)=2 -> score 0.5, wins.
        let mut c = corpus(&[("ab", 10), ("cd", 2)]);
        c.extend(corpus(&[("a", 90)]));
        let alphabet = 8; // a,##a,b,##b,c,##c,d,##d
        let vocab = train_wordpiece(c, num_specials() + alphabet + 1).unwrap();
        assert_eq!(vocab.merges()[0], ("c".to_string(), "##d".to_string()));
    }

    #[test]
    fn wordpiece_greedy_longest_match() {
        let pieces: Vec<String> = special_tokens()
            .iter()
            .map(|s| s.to_string())
            .chain(["un", "##aff", "##able", "##ffa", "a"].iter().map(|s| s.to_string()))
            .collect();
        let vocab = SubwordVocab::from_parts(Scheme::WordPiece, pieces.len(), pieces, vec![]);
        let ids = vocab.encode_token("unaffable");
        let pieces: Vec<&str> = ids.iter().map(|&i| vocab.pieces()[i as usize].as_str()).collect();
        assert_eq!(pieces, vec!["un", "##aff", "##able"]);
    }

    #[test]
    fn encode_whole_piece_single_id() {
        let c = corpus(&[("ab", 4)]);
        let vocab = train_wordpiece(c, num_specials() + 5).unwrap();
        let ids = vocab.encode_token("ab");
        assert_eq!(ids.len(), 1);
        assert_eq!(vocab.pieces()[ids[0] as usize], "ab");
    }

    #[test]
    fn unknown_character_yields_unk() {
        let c = corpus(&[("ab", 4)]);
        for vocab in [
            train_bpe(c.clone(), num_specials() + 4).unwrap(),
            train_wordpiece(c, num_specials() + 6).unwrap(),
        ] {
            assert_eq!(vocab.encode_token("aqz"), vec![vocab.unk_id()]);
        }
    }

    #[test]
    fn specials_never_split() {
        let c = corpus(&[("ab", 4)]);
        let vocab = train_bpe(c, num_specials() + 4).unwrap();
        assert_eq!(vocab.encode_token("<KEEP>"), vec![4]);
        assert_eq!(vocab.encode_token(CLS), vec![vocab.cls_id()]);
    }

    #[test]
    fn decode_out_of_range_errors() {
        let c = corpus(&[("ab", 4)]);
        let vocab = train_bpe(c, num_specials() + 4).unwrap();
        match vocab.decode(&[10_000]) {
            Err(SubwordError::IdOutOfRange { id: 10_000, .. }) => {}
            other => panic!("expected IdOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn unk_decodes_to_sentinel() {
        let c = corpus(&[("ab", 4)]);
        let vocab = train_bpe(c, num_specials() + 4).unwrap();
        assert_eq!(vocab.decode(&[vocab.unk_id()]).unwrap(), vec![UNK_DECODED]);
    }

    #[test]
    fn merged_bpe_pieces_decode_to_original_characters() {
        let c = corpus(&[("abab", 6), ("ab", 3)]);
        let vocab = train_bpe(c, num_specials() + 12).unwrap();
        assert!(!vocab.merges().is_empty());
        let ids = vocab.encode(&["abab".to_string(), "ab".to_string()]);
        assert_eq!(vocab.decode(&ids).unwrap(), vec!["abab", "ab"]);
    }

    #[test]
    fn vocab_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = corpus(&[("alpha", 3), ("beta", 5)]);
        for (name, vocab) in [
            ("b.vocab", train_bpe(c.clone(), num_specials() + 20).unwrap()),
            ("w.vocab", train_wordpiece(c.clone(), num_specials() + 24).unwrap()),
        ] {
            let path = dir.path().join(name);
            vocab.save(&path).unwrap();
            let loaded = SubwordVocab::load(&path).unwrap();
            assert_eq!(loaded.pieces(), vocab.pieces());
            assert_eq!(loaded.merges(), vocab.merges());
            assert_eq!(loaded.scheme, vocab.scheme);
            assert_eq!(loaded.target_size, vocab.target_size);
        }
    }

    proptest! {
        #[test]
        fn round_trip_over_trained_vocab(
            words in prop::collection::vec("[a-e]{1,8}", 1..12),
        ) {
            let train: Vec<Vec<String>> =
                vec![vec!["abcde".to_string(), "edcba".to_string(), "abc".to_string()]];
            for vocab in [
                train_bpe(train.clone(), num_specials() + 30).unwrap(),
                train_wordpiece(train.clone(), num_specials() + 30).unwrap(),
            ] {
                let tokens: Vec<String> = words.clone();
                let ids = vocab.encode(&tokens);
                // Training corpus covers a-e, so no UNK can appear.
                prop_assert!(!ids.contains(&vocab.unk_id()));
                prop_assert_eq!(vocab.decode(&ids).unwrap(), tokens);
            }
        }
    }
}
