//! Word sequences, the placeholder symbol, and raw-text tokenization.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Surface form of the abstention placeholder in all text formats.
pub const PH_SURFACE: &str = "<ph>";

/// One position in a transcript: a lexical word or the abstention placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Word(String),
    Placeholder,
}

impl Symbol {
    /// Builds a lexical symbol, or a placeholder if `s` is the surface token.
    ///
    /// Panics if `s` is empty or contains whitespace.
    pub fn parse(s: &str) -> Symbol {
        assert!(
            !s.is_empty() && !s.chars().any(char::is_whitespace),
            "lexical word must be non-empty without whitespace: {s:?}"
        );
        if s == PH_SURFACE {
            Symbol::Placeholder
        } else {
            Symbol::Word(s.to_owned())
        }
    }

    pub fn is_placeholder(&self) -> bool {
        matches!(self, Symbol::Placeholder)
    }

    pub fn as_word(&self) -> Option<&str> {
        match self {
            Symbol::Word(w) => Some(w),
            Symbol::Placeholder => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Word(w) => f.write_str(w),
            Symbol::Placeholder => f.write_str(PH_SURFACE),
        }
    }
}

/// An ordered sequence of symbols; the substrate of every alignment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct WordSeq(Vec<Symbol>);

impl WordSeq {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        WordSeq(symbols)
    }

    /// Splits on whitespace, mapping `<ph>` tokens to placeholders.
    ///
    /// A convenience for tests and examples; corpus text goes through
    /// [`Tokenizer`].
    pub fn parse(text: &str) -> Self {
        WordSeq(text.split_whitespace().map(Symbol::parse).collect())
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Symbol> {
        self.0.iter()
    }

    pub fn contains_placeholder(&self) -> bool {
        self.0.iter().any(Symbol::is_placeholder)
    }

    pub fn placeholder_count(&self) -> usize {
        self.0.iter().filter(|s| s.is_placeholder()).count()
    }

    /// Collapses every maximal run of placeholders into a single one.
    pub fn normalized(&self) -> WordSeq {
        let mut out = Vec::with_capacity(self.0.len());
        for sym in &self.0 {
            if sym.is_placeholder() && out.last().is_some_and(Symbol::is_placeholder) {
                continue;
            }
            out.push(sym.clone());
        }
        WordSeq(out)
    }

    /// True if no two placeholders are adjacent.
    pub fn is_normalized(&self) -> bool {
        !self
            .0
            .windows(2)
            .any(|w| w[0].is_placeholder() && w[1].is_placeholder())
    }

    pub fn into_inner(self) -> Vec<Symbol> {
        self.0
    }
}

/// Collapses runs of placeholders; lexical symbols are untouched.
pub fn normalize_hypothesis(raw: &WordSeq) -> WordSeq {
    raw.normalized()
}

impl fmt::Display for WordSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, sym) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{sym}")?;
        }
        Ok(())
    }
}

impl FromIterator<Symbol> for WordSeq {
    fn from_iter<I: IntoIterator<Item = Symbol>>(iter: I) -> Self {
        WordSeq(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a WordSeq {
    type Item = &'a Symbol;
    type IntoIter = std::slice::Iter<'a, Symbol>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenizeMode {
    /// Split on whitespace only.
    #[default]
    Whitespace,
    /// Whitespace splitting, then every CJK codepoint becomes its own word.
    MixedCjk,
}

/// Turns raw transcript text into a [`WordSeq`].
///
/// Placeholders are recognised before any normalization, so `<ph>` survives
/// `strip_punct`. A placeholder glued to other text (`foo<ph>bar`) splits the
/// chunk.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tokenizer {
    pub mode: TokenizeMode,
    pub lowercase: bool,
    pub strip_punct: bool,
}

impl Tokenizer {
    pub fn new(mode: TokenizeMode) -> Self {
        Tokenizer {
            mode,
            ..Tokenizer::default()
        }
    }

    pub fn with_lowercase(mut self, on: bool) -> Self {
        self.lowercase = on;
        self
    }

    pub fn with_strip_punct(mut self, on: bool) -> Self {
        self.strip_punct = on;
        self
    }

    pub fn tokenize(&self, text: &str) -> WordSeq {
        let mut out = Vec::new();
        for chunk in text.split_whitespace() {
            let mut pieces = chunk.split(PH_SURFACE).peekable();
            while let Some(piece) = pieces.next() {
                self.push_lexical(piece, &mut out);
                if pieces.peek().is_some() {
                    out.push(Symbol::Placeholder);
                }
            }
        }
        WordSeq(out)
    }

    fn push_lexical(&self, piece: &str, out: &mut Vec<Symbol>) {
        let mut piece = piece.to_owned();
        if self.lowercase {
            piece = piece.to_lowercase();
        }
        if self.strip_punct {
            piece.retain(|c| !is_punct(c));
        }
        if piece.is_empty() {
            return;
        }
        match self.mode {
            TokenizeMode::Whitespace => out.push(Symbol::Word(piece)),
            TokenizeMode::MixedCjk => {
                let mut run = String::new();
                for c in piece.chars() {
                    if is_cjk(c) {
                        if !run.is_empty() {
                            out.push(Symbol::Word(std::mem::take(&mut run)));
                        }
                        out.push(Symbol::Word(c.to_string()));
                    } else {
                        run.push(c);
                    }
                }
                if !run.is_empty() {
                    out.push(Symbol::Word(run));
                }
            }
        }
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '。' | '，'
                | '、'
                | '！'
                | '？'
                | '；'
                | '：'
                | '「'
                | '」'
                | '『'
                | '』'
                | '（'
                | '）'
                | '《'
                | '》'
                | '“'
                | '”'
                | '‘'
                | '’'
                | '…'
                | '—'
                | '–'
                | '¿'
                | '¡'
        )
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF      // hiragana, katakana
        | 0x3400..=0x4DBF    // CJK extension A
        | 0x4E00..=0x9FFF    // CJK unified ideographs
        | 0xAC00..=0xD7AF    // hangul syllables
        | 0xF900..=0xFAFF    // compatibility ideographs
        | 0x20000..=0x2FA1F) // extensions B-F, compatibility supplement
}
