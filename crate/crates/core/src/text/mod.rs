//! Tokenizers: pluggable word splitters for metrics, and the model vocabulary.

mod vocab;

pub use vocab::{SpecialToken, Vocab, VocabFile};

/// Splits text into tokens for n-gram metrics.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Splits on Unicode whitespace. The default for desk tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_owned).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Script {
    Space,
    Han,
    Hiragana,
    Katakana,
    Punct,
    Other,
}

fn script_of(c: char) -> Script {
    match c {
        c if c.is_whitespace() => Script::Space,
        '\u{3040}'..='\u{309F}' => Script::Hiragana,
        '\u{30A0}'..='\u{30FF}' | '\u{31F0}'..='\u{31FF}' | '\u{FF66}'..='\u{FF9F}' => {
            Script::Katakana
        }
        '\u{4E00}'..='\u{9FFF}' | '\u{3400}'..='\u{4DBF}' | '\u{F900}'..='\u{FAFF}' | '々' => {
            Script::Han
        }
        c if c.is_ascii_punctuation() || ('\u{3000}'..='\u{303F}').contains(&c) || ('\u{FF01}'..='\u{FF0F}').contains(&c) => {
            Script::Punct
        }
        _ => Script::Other,
    }
}

/// Approximate Japanese segmenter: splits at script boundaries (kanji,
/// hiragana, katakana, other) and isolates punctuation.
///
/// A stand-in where no morphological analyzer is installed; plug a real
/// analyzer in through [`Tokenizer`] for scores comparable to MeCab-based ones.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptRunTokenizer;

impl Tokenizer for ScriptRunTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = String::new();
        let mut cur_script = Script::Space;
        for c in text.chars() {
            let s = script_of(c);
            let boundary = s != cur_script || s == Script::Punct;
            if boundary && !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if s != Script::Space {
                cur.push(c);
            }
            cur_script = s;
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace() {
        assert_eq!(WhitespaceTokenizer.tokenize("  a b\tc\n"), vec!["a", "b", "c"]);
        assert!(WhitespaceTokenizer.tokenize("").is_empty());
    }

    #[test]
    fn script_runs() {
        assert_eq!(
            ScriptRunTokenizer.tokenize("札幌の拠点でコンテナを確認する。"),
            vec!["札幌", "の", "拠点", "で", "コンテナ", "を", "確認", "する", "。"]
        );
        assert_eq!(ScriptRunTokenizer.tokenize("check 3 boxes!"), vec!["check", "3", "boxes", "!"]);
    }
}
