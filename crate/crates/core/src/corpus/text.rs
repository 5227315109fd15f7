//! Text cleanup applied to every tweet before embedding.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const DEFAULT_T2S: &str = include_str!("../../data/t2s.txt");

static HTML_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>").expect("static regex"));

/// Stop-word list plus traditional-to-simplified character table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TextNormalizer {
    stopwords: HashSet<String>,
    t2s: HashMap<char, char>,
}

impl TextNormalizer {
    /// No stop words, no character mapping.
    pub fn empty() -> Self {
        Self::default()
    }

    /// The small tables bundled with the crate.
    pub fn bundled() -> Self {
        Self::from_strs(DEFAULT_STOPWORDS, DEFAULT_T2S).expect("bundled tables are valid")
    }

    pub fn new(stopwords: impl IntoIterator<Item = String>, t2s: HashMap<char, char>) -> Result<Self> {
        if let Some((k, v)) = t2s.iter().find(|(_, v)| t2s.contains_key(v)) {
            return Err(Error::Config(format!(
                "character table maps {k} -> {v}, but {v} is itself mapped; chains are not allowed"
            )));
        }
        Ok(Self {
            stopwords: stopwords.into_iter().map(|w| w.to_ascii_lowercase()).collect(),
            t2s,
        })
    }

    pub fn from_strs(stopwords: &str, t2s: &str) -> Result<Self> {
        let words = content_lines(stopwords).map(str::to_string);
        let mut table = HashMap::new();
        for (n, line) in t2s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) if a.chars().count() == 1 && b.chars().count() == 1 => {
                    table.insert(a.chars().next().unwrap(), b.chars().next().unwrap());
                }
                _ => {
                    return Err(Error::Config(format!(
                        "character table line {}: expected two single characters, got `{line}`",
                        n + 1
                    )))
                }
            }
        }
        Self::new(words, table)
    }

    /// Loads either table from a file; `None` falls back to the bundled one.
    pub fn from_files(stopwords: Option<&Path>, t2s: Option<&Path>) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let sw = match stopwords {
            Some(p) => read(p)?,
            None => DEFAULT_STOPWORDS.to_string(),
        };
        let t = match t2s {
            Some(p) => read(p)?,
            None => DEFAULT_T2S.to_string(),
        };
        Self::from_strs(&sw, &t)
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    /// Applies, in order: HTML tag removal, character filtering, whitespace
    /// collapsing, traditional-to-simplified mapping, ASCII lowercasing and
    /// stop-word removal. Stop words are matched against whitespace tokens.
    pub fn normalize(&self, raw: &str) -> String {
        let untagged = HTML_TAG.replace_all(raw, " ");
        let filtered: String = untagged.chars().filter(|&c| is_kept(c)).collect();
        let collapsed = filtered.split_whitespace().collect::<Vec<_>>().join(" ");
        let simplified: String = collapsed
            .chars()
            .map(|c| self.t2s.get(&c).copied().unwrap_or(c))
            .collect();
        let lowered = simplified.to_ascii_lowercase();
        if self.stopwords.is_empty() {
            return lowered;
        }
        lowered
            .split(' ')
            .filter(|tok| !self.stopwords.contains(*tok))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn normalize_text(raw: &str, normalizer: &TextNormalizer) -> String {
    normalizer.normalize(raw)
}

fn content_lines(s: &str) -> impl Iterator<Item = &str> {
    s.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn is_kept(c: char) -> bool {
    c.is_ascii_alphanumeric() || c.is_whitespace() || c.is_ascii_punctuation() || is_cjk_ideograph(c) || is_wide_punctuation(c)
}

fn is_cjk_ideograph(c: char) -> bool {
    matches!(c,
        '\u{4E00}'..='\u{9FFF}'      // unified ideographs
        | '\u{3400}'..='\u{4DBF}'    // extension A
        | '\u{F900}'..='\u{FAFF}'    // compatibility ideographs
        | '\u{20000}'..='\u{2A6DF}'  // extension B
        | '\u{2A700}'..='\u{2EBEF}'  // extensions C-F
        | '\u{30000}'..='\u{3134F}') // extension G
}

fn is_wide_punctuation(c: char) -> bool {
    matches!(c,
        '\u{2010}'..='\u{2027}'      // dashes, quotes, ellipsis
        | '\u{2030}'..='\u{205E}'
        | '\u{3001}'..='\u{3003}'    // 、。〃
        | '\u{3008}'..='\u{3011}'    // CJK brackets
        | '\u{3014}'..='\u{301F}'
        | '\u{FE10}'..='\u{FE19}'    // vertical forms
        | '\u{FE30}'..='\u{FE4F}'
        | '\u{FF01}'..='\u{FF0F}'    // fullwidth ASCII punctuation
        | '\u{FF1A}'..='\u{FF20}'
        | '\u{FF3B}'..='\u{FF40}'
        | '\u{FF5B}'..='\u{FF65}')
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn with_stopwords(words: &[&str]) -> TextNormalizer {
        TextNormalizer::new(words.iter().map(|w| w.to_string()), HashMap::new()).unwrap()
    }

    #[test]
    fn strips_tags_collapses_and_lowercases() {
        assert_eq!(TextNormalizer::empty().normalize("<b>Hello  WORLD</b>"), "hello world");
    }

    #[test]
    fn empty_input() {
        assert_eq!(TextNormalizer::bundled().normalize(""), "");
    }

    #[test]
    fn removes_symbols_and_stopwords() {
        // Step 2 drops the snowman, leaving "I am THE one"; lowercasing and
        // stop-word removal then give "i am one".
        assert_eq!(with_stopwords(&["the"]).normalize("I am THE one ☃"), "i am one");
        let pattern = Regex::new(r"[^A-Za-z0-9\s[:punct:]\p{Han}]").unwrap();
        let reference = pattern.replace_all("I am THE one ☃", "");
        assert_eq!(reference.trim(), "I am THE one");
    }

    #[test]
    fn keeps_punctuation_and_han() {
        let n = TextNormalizer::empty();
        assert_eq!(n.normalize("今天，好累!!  ok?"), "今天，好累!! ok?");
        assert_eq!(n.normalize("emoji 😢 gone"), "emoji gone");
    }

    #[test]
    fn maps_traditional_characters() {
        let n = TextNormalizer::bundled();
        assert_eq!(n.normalize("這個 問題"), "这个 问题");
    }

    #[test]
    fn rejects_chained_mapping() {
        assert!(TextNormalizer::from_strs("", "這 这\n这 X").is_err());
        assert!(TextNormalizer::from_strs("", "bad line here").is_err());
    }

    #[test]
    fn tags_become_separators() {
        assert_eq!(TextNormalizer::empty().normalize("a<br>b"), "a b");
    }

    fn fuzz_char() -> impl Strategy<Value = char> {
        prop_oneof![
            prop::char::range('a', 'z'),
            prop::char::range('A', 'Z'),
            prop::sample::select(vec![' ', '\t', '\n', '<', '>', '/', '!', ',', '.', '☃', '😢', '這', '这', '的', '好', '，', 'é']),
        ]
    }

    proptest! {
        #[test]
        fn idempotent(chars in prop::collection::vec(fuzz_char(), 0..60)) {
            let s: String = chars.into_iter().collect();
            let n = TextNormalizer::bundled();
            let once = n.normalize(&s);
            prop_assert_eq!(n.normalize(&once), once.clone());
            let with_tag = format!("<p>{s} THE the</p>");
            let once = n.normalize(&with_tag);
            prop_assert_eq!(n.normalize(&once), once);
        }
    }
}
