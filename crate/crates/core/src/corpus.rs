//! The YAML corpus file format: `categories` plus `conversations`, shaped like
//! the public chatterbot-corpus English files.

use std::fmt;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};

use crate::text::clean_whitespace;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Corpus {
    pub categories: Vec<String>,
    pub conversations: Vec<Vec<String>>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("malformed corpus{}: {reason}", .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
pub struct MalformedCorpus {
    pub reason: String,
    pub line: Option<usize>,
}

#[derive(Deserialize)]
struct RawCorpus {
    categories: Vec<Utterance>,
    conversations: Vec<Conversation>,
}

/// A scalar accepted as text. Corpus files in the wild contain bare numbers
/// and booleans as utterances.
struct Utterance(String);

impl<'de> Deserialize<'de> for Utterance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ScalarVisitor;

        impl Visitor<'_> for ScalarVisitor {
            type Value = String;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a text scalar")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<String, E> {
                Ok(v.to_owned())
            }
            fn visit_string<E: de::Error>(self, v: String) -> Result<String, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<String, E> {
                Ok(v.to_string())
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<String, E> {
                Ok(v.to_string())
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<String, E> {
                Ok(v.to_string())
            }
            fn visit_bool<E: de::Error>(self, v: bool) -> Result<String, E> {
                Ok(v.to_string())
            }
        }

        let text = deserializer.deserialize_any(ScalarVisitor)?;
        if clean_whitespace(&text).is_empty() {
            return Err(de::Error::custom("empty utterance"));
        }
        Ok(Utterance(text))
    }
}

struct Conversation(Vec<String>);

impl<'de> Deserialize<'de> for Conversation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SeqVisitor;

        impl<'de> Visitor<'de> for SeqVisitor {
            type Value = Vec<String>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a sequence of utterances")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Vec<String>, A::Error> {
                let mut out = Vec::new();
                while let Some(Utterance(u)) = seq.next_element()? {
                    out.push(u);
                }
                if out.is_empty() {
                    return Err(de::Error::custom("conversation has no utterances"));
                }
                Ok(out)
            }
        }

        deserializer.deserialize_seq(SeqVisitor).map(Conversation)
    }
}

/// Parses a corpus file. Utterances are kept verbatim.
pub fn parse_corpus(bytes: &[u8]) -> Result<Corpus, MalformedCorpus> {
    let text = std::str::from_utf8(bytes).map_err(|e| MalformedCorpus {
        reason: format!("not UTF-8: {e}"),
        line: None,
    })?;
    let raw: RawCorpus = serde_yaml::from_str(text).map_err(|e| MalformedCorpus {
        line: e.location().map(|l| l.line()),
        reason: strip_location(&e.to_string()),
    })?;
    Ok(Corpus {
        categories: raw.categories.into_iter().map(|u| u.0).collect(),
        conversations: raw.conversations.into_iter().map(|c| c.0).collect(),
    })
}

fn strip_location(msg: &str) -> String {
    match msg.find(" at line ") {
        Some(pos) => msg[..pos].to_owned(),
        None => msg.to_owned(),
    }
}

/// Renders `corpus` in the file format; [`parse_corpus`] reads it back unchanged.
pub fn serialize_corpus(corpus: &Corpus) -> Vec<u8> {
    serde_yaml::to_string(corpus)
        .expect("a corpus of plain strings always serializes")
        .into_bytes()
}
