use std::collections::{BTreeSet, HashMap};

use crate::corpus::{Corpus, Document, Split};
use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const PAD: &str = "<pad>";
pub const UNK_ID: u32 = 0;
pub const PAD_ID: u32 = 1;

/// Token vocabulary. Ids 0 and 1 are reserved for the unknown token and the
/// padding sentinel; the remaining ids follow lexicographic token order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from the given tokens plus the reserved entries.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let unique: BTreeSet<String> = tokens
            .into_iter()
            .map(|t| t.as_ref().to_lowercase())
            .filter(|t| t != UNK && t != PAD)
            .collect();
        let mut list = vec![UNK.to_owned(), PAD.to_owned()];
        list.extend(unique);
        Self::from_list(list).expect("reserved entries present")
    }

    /// Rebuilds a vocabulary from its id-ordered token list, as stored in a
    /// checkpoint.
    pub fn from_list(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != UNK || tokens[1] != PAD {
            return Err(Error::Checkpoint(
                "vocabulary must start with the reserved <unk> and <pad> entries".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Checkpoint(format!(
                    "duplicate vocabulary entry '{t}'"
                )));
            }
        }
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        match self.index.get(token) {
            Some(&id) => id,
            None => self
                .index
                .get(token.to_lowercase().as_str())
                .copied()
                .unwrap_or(UNK_ID),
        }
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Concatenates the document's sentences and maps every token to its id.
    pub fn encode(&self, document: &Document) -> Vec<u32> {
        document.tokens().map(|t| self.id(t)).collect()
    }
}

/// Vocabulary over the training split of `corpus`.
pub fn build_vocab(corpus: &Corpus) -> Result<Vocab> {
    let mut train = corpus.split(Split::Train).peekable();
    if train.peek().is_none() {
        return Err(Error::EmptyTrainingSplit);
    }
    Ok(Vocab::from_tokens(train.flat_map(Document::tokens)))
}
