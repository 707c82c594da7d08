use crate::inventory::{tokenize, TokenizerScheme};
use std::collections::{BTreeSet, HashMap};

/// Token vocabulary of the query encoder. Unknown tokens are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    scheme: TokenizerScheme,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Sorted vocabulary over every token of `texts`.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, scheme: TokenizerScheme) -> Self {
        let set: BTreeSet<String> = texts.into_iter().flat_map(|t| tokenize(t, scheme)).collect();
        Self::from_tokens(set.into_iter().collect(), scheme)
    }

    pub fn from_tokens(tokens: Vec<String>, scheme: TokenizerScheme) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { scheme, tokens, index }
    }

    pub fn scheme(&self) -> TokenizerScheme {
        self.scheme
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.id(t.as_ref())).collect()
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        self.encode_tokens(&tokenize(text, self.scheme))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_is_sorted_and_drops_unknowns() {
        let v = Vocab::build(["how to apply", "apply loan"], TokenizerScheme::Whitespace);
        assert_eq!(v.tokens(), ["apply", "how", "loan", "to"]);
        assert_eq!(v.encode("Apply for a LOAN"), vec![0, 2]);
    }
}
