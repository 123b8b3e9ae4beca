use std::collections::HashSet;
use std::io::BufRead;

/// The stop-word list shipped with the crate.
pub const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// A set of lowercase words dropped during preprocessing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds the set from an iterator of words; each is lowercased.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(
            words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    /// Plain text, one word per line. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Self::from_words(text.lines().filter(|l| !l.trim_start().starts_with('#')))
    }

    pub fn read<R: BufRead>(reader: R) -> std::io::Result<Self> {
        let mut words = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if !line.trim_start().starts_with('#') {
                words.push(line);
            }
        }
        Ok(Self::from_words(words))
    }

    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lowercase word tokens with punctuation and stop words removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream(Vec<String>);

impl TokenStream {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    /// Concatenation, used for additivity checks.
    pub fn concat(&self, other: &TokenStream) -> TokenStream {
        TokenStream(self.0.iter().chain(&other.0).cloned().collect())
    }
}

impl<S: Into<String>> FromIterator<S> for TokenStream {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        TokenStream(iter.into_iter().map(Into::into).collect())
    }
}

/// Lowercases, splits on every non-alphanumeric character, and drops stop
/// words. Token order follows the text.
pub fn preprocess(text: &str, stopwords: &StopWords) -> TokenStream {
    let lowered = text.to_lowercase();
    TokenStream(
        lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty() && !stopwords.contains(t))
            .map(str::to_owned)
            .collect(),
    )
}
