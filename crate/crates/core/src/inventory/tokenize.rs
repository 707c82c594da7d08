use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenizerScheme {
    #[default]
    Whitespace,
    CharBigram,
}

impl fmt::Display for TokenizerScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenizerScheme::Whitespace => "whitespace",
            TokenizerScheme::CharBigram => "char-bigram",
        })
    }
}

impl FromStr for TokenizerScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" => Ok(TokenizerScheme::Whitespace),
            "char-bigram" => Ok(TokenizerScheme::CharBigram),
            other => Err(format!("unknown tokenizer {other:?}")),
        }
    }
}

/// Lowercased tokens. Punctuation separates words; bigrams never span words,
/// and a one-character word is its own token.
pub fn tokenize(text: &str, scheme: TokenizerScheme) -> Vec<String> {
    let words = words(text);
    match scheme {
        TokenizerScheme::Whitespace => words,
        TokenizerScheme::CharBigram => {
            let mut out = Vec::new();
            for w in words {
                let chars: Vec<char> = w.chars().collect();
                if chars.len() == 1 {
                    out.push(w);
                } else {
                    out.extend(chars.windows(2).map(|p| p.iter().collect::<String>()));
                }
            }
            out
        }
    }
}

fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn whitespace_lowercases_and_strips_punctuation() {
        assert_eq!(tokenize("Credit Card", TokenizerScheme::Whitespace), ["credit", "card"]);
        assert_eq!(tokenize("How to apply?!", TokenizerScheme::Whitespace), ["how", "to", "apply"]);
        assert!(tokenize("  ...  ", TokenizerScheme::Whitespace).is_empty());
    }

    #[test]
    fn char_bigrams() {
        assert_eq!(tokenize("apply", TokenizerScheme::CharBigram), ["ap", "pp", "pl", "ly"]);
        assert_eq!(tokenize("a qr", TokenizerScheme::CharBigram), ["a", "qr"]);
    }

    #[test]
    fn scheme_names_parse() {
        for s in [TokenizerScheme::Whitespace, TokenizerScheme::CharBigram] {
            assert_eq!(s.to_string().parse::<TokenizerScheme>().unwrap(), s);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn whitespace_tokenization_is_idempotent(text in "\\PC{0,40}") {
            let once = tokenize(&text, TokenizerScheme::Whitespace);
            let twice = tokenize(&once.join(" "), TokenizerScheme::Whitespace);
            prop_assert_eq!(once, twice);
        }
    }
}
