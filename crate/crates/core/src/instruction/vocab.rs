use std::collections::{BTreeSet, HashMap};

use super::{InstructionError, InstructionTask, InstructionTemplate};
use crate::gridworld::{ObjectKind, ReceptacleKind};

pub const BUNDLED_STOP_WORDS: &str = include_str!("../../data/stopwords.txt");
pub const OOV_TOKEN: &str = "<unk>";

pub fn parse_stop_words(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with(';'))
        .map(str::to_lowercase)
        .collect()
}

pub fn bundled_stop_words() -> BTreeSet<String> {
    parse_stop_words(BUNDLED_STOP_WORDS)
}

/// Lowercases and splits on whitespace and punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Token → dense index map. Index 0 is the reserved out-of-vocabulary slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    stop_words: BTreeSet<String>,
    embedding_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedInstruction {
    pub token_indices: Vec<usize>,
    /// Stage whose text was encoded, when known.
    pub source_stage: Option<usize>,
}

impl Vocabulary {
    /// Collects every non-stop-word token of `texts`, sorted for stable indices.
    pub fn build<'a, I>(texts: I, stop_words: BTreeSet<String>, embedding_dim: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut words = BTreeSet::new();
        for t in texts {
            for tok in tokenize(t) {
                if !stop_words.contains(&tok) {
                    words.insert(tok);
                }
            }
        }
        let mut tokens = vec![OOV_TOKEN.to_string()];
        tokens.extend(words);
        Self::from_tokens(tokens, stop_words, embedding_dim)
    }

    fn from_tokens(tokens: Vec<String>, stop_words: BTreeSet<String>, embedding_dim: usize) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            tokens,
            index,
            stop_words,
            embedding_dim,
        }
    }

    /// Vocabulary covering every rendering of `templates` over the full kind sets.
    pub fn for_templates(templates: &[InstructionTemplate], stop_words: BTreeSet<String>, embedding_dim: usize) -> Self {
        let mut texts = Vec::new();
        for t in templates {
            for o in ObjectKind::ALL {
                if t.needs_receptacle() {
                    for r in ReceptacleKind::ALL {
                        if let Ok(task) = InstructionTask::from_template(t, o, Some(r)) {
                            texts.push(task.full_text);
                        }
                    }
                } else if let Ok(task) = InstructionTask::from_template(t, o, None) {
                    texts.push(task.full_text);
                }
            }
        }
        Self::build(texts.iter().map(String::as_str), stop_words, embedding_dim)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn oov_index(&self) -> usize {
        0
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn stop_words(&self) -> &BTreeSet<String> {
        &self.stop_words
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// `token<TAB>index` lines.
    pub fn to_tsv(&self) -> String {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{t}\t{i}\n"))
            .collect()
    }

    pub fn from_tsv(text: &str, stop_words: BTreeSet<String>, embedding_dim: usize) -> Result<Self, InstructionError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |m: &str| InstructionError::Parse {
                line: i + 1,
                message: m.to_string(),
            };
            let (tok, idx) = line.split_once('\t').ok_or_else(|| err("expected token<TAB>index"))?;
            let idx: usize = idx.trim().parse().map_err(|_| err("index is not an integer"))?;
            pairs.push((idx, tok.to_string()));
        }
        pairs.sort();
        if pairs.iter().enumerate().any(|(i, (idx, _))| *idx != i) {
            return Err(InstructionError::Parse {
                line: 0,
                message: "indices must be dense from 0".into(),
            });
        }
        if pairs.first().map(|(_, t)| t.as_str()) != Some(OOV_TOKEN) {
            return Err(InstructionError::Parse {
                line: 0,
                message: format!("index 0 must be `{OOV_TOKEN}`"),
            });
        }
        let tokens = pairs.into_iter().map(|(_, t)| t).collect();
        Ok(Self::from_tokens(tokens, stop_words, embedding_dim))
    }
}

/// Lowercase, split, drop stop words, map to indices (unknown → OOV).
pub fn preprocess(text: &str, vocab: &Vocabulary) -> Result<EncodedInstruction, InstructionError> {
    let token_indices: Vec<usize> = tokenize(text)
        .into_iter()
        .filter(|t| !vocab.stop_words.contains(t))
        .map(|t| vocab.get(&t).unwrap_or(vocab.oov_index()))
        .collect();
    if token_indices.is_empty() {
        return Err(InstructionError::EmptyAfterFiltering(text.to_string()));
    }
    Ok(EncodedInstruction {
        token_indices,
        source_stage: None,
    })
}

/// Encodes stage `k` (1-based) of `task`.
pub fn encode_stage(task: &InstructionTask, k: usize, vocab: &Vocabulary) -> Result<EncodedInstruction, InstructionError> {
    let text = task.stages.get(k.wrapping_sub(1)).ok_or(InstructionError::StageOutOfRange {
        stage: k,
        count: task.stage_count(),
    })?;
    let mut enc = preprocess(text, vocab)?;
    enc.source_stage = Some(k);
    Ok(enc)
}

/// Space-joined tokens of an encoding.
pub fn render_tokens(enc: &EncodedInstruction, vocab: &Vocabulary) -> String {
    enc.token_indices
        .iter()
        .map(|&i| vocab.tokens.get(i).map(String::as_str).unwrap_or(OOV_TOKEN))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruction::bundled_templates;

    fn vocab() -> Vocabulary {
        Vocabulary::for_templates(&bundled_templates(), bundled_stop_words(), 50)
    }

    #[test]
    fn stop_word_list_is_pinned() {
        let expected: BTreeSet<String> = ["the", "a", "an", "it", "and", "then", "to", "go", "into", "inside", "on", "in"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(bundled_stop_words(), expected);
    }

    #[test]
    fn find_the_bread_drops_the() {
        let v = vocab();
        let enc = preprocess("Find the bread", &v).unwrap();
        assert_eq!(enc.token_indices, vec![v.get("find").unwrap(), v.get("bread").unwrap()]);
    }

    #[test]
    fn empty_text_fails() {
        let v = vocab();
        assert!(matches!(preprocess("", &v), Err(InstructionError::EmptyAfterFiltering(_))));
        assert!(matches!(preprocess("the, and. it", &v), Err(InstructionError::EmptyAfterFiltering(_))));
    }

    #[test]
    fn unknown_token_maps_to_oov() {
        let v = vocab();
        let enc = preprocess("Find the spatula", &v).unwrap();
        assert_eq!(enc.token_indices[1], v.oov_index());
        assert_eq!(v.tokens()[v.oov_index()], OOV_TOKEN);
    }

    #[test]
    fn stop_words_never_indexed() {
        let v = vocab();
        for w in v.stop_words() {
            assert!(v.get(w).is_none(), "{w} has an index");
        }
    }

    #[test]
    fn tsv_roundtrip() {
        let v = vocab();
        let back = Vocabulary::from_tsv(&v.to_tsv(), bundled_stop_words(), 50).unwrap();
        assert_eq!(back, v);
        assert!(Vocabulary::from_tsv("a\t1\n", bundled_stop_words(), 50).is_err());
    }

    #[test]
    fn punctuation_is_a_separator() {
        assert_eq!(tokenize("Find the bread, take it."), vec!["find", "the", "bread", "take", "it"]);
    }
}
