use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};

/// Reserved tokens. Registered specials are matched atomically in input text
/// and never split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecialToken {
    Pad,
    Unk,
    Cls,
    Sep,
    X1,
    X2,
    Eos,
    Bos,
}

impl SpecialToken {
    pub const ALL: [SpecialToken; 8] = [
        SpecialToken::Pad,
        SpecialToken::Unk,
        SpecialToken::Cls,
        SpecialToken::Sep,
        SpecialToken::X1,
        SpecialToken::X2,
        SpecialToken::Eos,
        SpecialToken::Bos,
    ];

    pub fn surface(self) -> &'static str {
        match self {
            SpecialToken::Pad => "[PAD]",
            SpecialToken::Unk => "[UNK]",
            SpecialToken::Cls => "[CLS]",
            SpecialToken::Sep => "[SEP]",
            SpecialToken::X1 => "[X1]",
            SpecialToken::X2 => "[X2]",
            SpecialToken::Eos => "</s>",
            SpecialToken::Bos => "<s>",
        }
    }
}

/// On-disk vocabulary document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabFile {
    pub name: String,
    pub lowercase: bool,
    pub tokens: Vec<String>,
}

/// Word-level vocabulary with punctuation and CJK characters split out.
#[derive(Debug, Clone)]
pub struct Vocab {
    name: String,
    lowercase: bool,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    specials: HashMap<SpecialToken, u32>,
}

fn is_cjk(c: char) -> bool {
    matches!(c,
        '\u{3040}'..='\u{30FF}'
        | '\u{3400}'..='\u{4DBF}'
        | '\u{4E00}'..='\u{9FFF}'
        | '\u{F900}'..='\u{FAFF}'
        | '\u{FF66}'..='\u{FF9F}')
}

fn is_isolated(c: char) -> bool {
    c.is_ascii_punctuation()
        || is_cjk(c)
        || ('\u{3000}'..='\u{303F}').contains(&c)
        || ('\u{FF01}'..='\u{FF0F}').contains(&c)
}

/// Splits text into surface pieces with byte spans. Special-token literals
/// come out whole.
pub(crate) fn pretokenize(text: &str) -> Vec<(&str, Range<usize>)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if c == '[' || c == '<' {
            if let Some(sp) = SpecialToken::ALL
                .iter()
                .map(|s| s.surface())
                .find(|s| text[i..].starts_with(s))
            {
                if let Some(s) = start.take() {
                    out.push((&text[s..i], s..i));
                }
                let end = i + sp.len();
                out.push((&text[i..end], i..end));
                while iter.peek().is_some_and(|(j, _)| *j < end) {
                    iter.next();
                }
                continue;
            }
        }
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((&text[s..i], s..i));
            }
        } else if is_isolated(c) {
            if let Some(s) = start.take() {
                out.push((&text[s..i], s..i));
            }
            let end = i + c.len_utf8();
            out.push((&text[i..end], i..end));
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((&text[s..], s..text.len()));
    }
    out
}

impl Vocab {
    /// Builds a vocabulary from training text. Specials take ids `0..8` in
    /// [`SpecialToken::ALL`] order; the rest are sorted by descending
    /// frequency then lexically, so the result is independent of input order
    /// among equally frequent words.
    pub fn build<'a>(
        name: &str,
        texts: impl IntoIterator<Item = &'a str>,
        min_freq: usize,
        lowercase: bool,
    ) -> Vocab {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for (piece, _) in pretokenize(text) {
                let piece = if lowercase { piece.to_lowercase() } else { piece.to_owned() };
                *counts.entry(piece).or_default() += 1;
            }
        }
        let specials: Vec<String> = SpecialToken::ALL.iter().map(|s| s.surface().to_owned()).collect();
        let mut words: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_freq && !specials.contains(w))
            .collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = specials.into_iter().chain(words.into_iter().map(|(w, _)| w)).collect();
        Vocab::from_file(VocabFile {
            name: name.to_owned(),
            lowercase,
            tokens,
        })
        .expect("built vocabulary is well formed")
    }

    pub fn from_file(file: VocabFile) -> Result<Vocab> {
        let mut index = HashMap::with_capacity(file.tokens.len());
        for (i, t) in file.tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Setup(format!("vocabulary {} lists {t:?} twice", file.name)));
            }
        }
        if !index.contains_key(SpecialToken::Unk.surface()) {
            return Err(Error::Setup(format!("vocabulary {} lacks [UNK]", file.name)));
        }
        let specials = SpecialToken::ALL
            .iter()
            .filter_map(|s| index.get(s.surface()).map(|id| (*s, *id)))
            .collect();
        Ok(Vocab {
            name: file.name,
            lowercase: file.lowercase,
            tokens: file.tokens,
            index,
            specials,
        })
    }

    pub fn to_file(&self) -> VocabFile {
        VocabFile {
            name: self.name.clone(),
            lowercase: self.lowercase,
            tokens: self.tokens.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Vocab> {
        let raw = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Vocab::from_file(serde_json::from_slice(&raw)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let raw = serde_json::to_vec_pretty(&self.to_file())?;
        std::fs::write(path, raw).map_err(|e| Error::file(path, e))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Stable fingerprint of name, casing and token list.
    pub fn identity(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.name.as_bytes());
        h.update([self.lowercase as u8]);
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        let digest = h.finalize();
        let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        format!("{}-{hex}", self.name)
    }

    /// Id of a registered special token.
    pub fn special(&self, token: SpecialToken) -> Result<u32> {
        self.specials
            .get(&token)
            .copied()
            .ok_or_else(|| Error::Setup(format!("special token {} is not registered", token.surface())))
    }

    pub fn is_special(&self, id: u32) -> bool {
        self.specials.values().any(|s| *s == id)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    fn lookup(&self, piece: &str) -> u32 {
        if SpecialToken::ALL.iter().any(|s| s.surface() == piece) {
            if let Some(id) = self.index.get(piece) {
                return *id;
            }
        }
        let found = if self.lowercase {
            self.index.get(&piece.to_lowercase())
        } else {
            self.index.get(piece)
        };
        found.copied().unwrap_or(self.specials[&SpecialToken::Unk])
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        pretokenize(text).into_iter().map(|(p, _)| self.lookup(p)).collect()
    }

    /// Token ids with the byte span of each token in `text`.
    pub fn encode_with_offsets(&self, text: &str) -> Vec<(u32, Range<usize>)> {
        pretokenize(text).into_iter().map(|(p, r)| (self.lookup(p), r)).collect()
    }

    /// Normalized surface forms (lowercased when the vocabulary is), including
    /// words that map to `[UNK]`.
    pub fn surfaces(&self, text: &str) -> Vec<String> {
        pretokenize(text)
            .into_iter()
            .map(|(p, _)| if self.lowercase { p.to_lowercase() } else { p.to_owned() })
            .collect()
    }

    /// Joins tokens back into text. Specials are dropped when `skip_special`;
    /// adjacent CJK tokens are joined without a space.
    pub fn decode(&self, ids: &[u32], skip_special: bool) -> String {
        let mut out = String::new();
        let mut prev_cjk = false;
        for &id in ids {
            if skip_special && self.is_special(id) {
                continue;
            }
            let Some(tok) = self.token(id) else { continue };
            let cjk = tok.chars().all(is_cjk);
            if !out.is_empty() && !(cjk && prev_cjk) {
                out.push(' ');
            }
            out.push_str(tok);
            prev_cjk = cjk;
        }
        out
    }
}
