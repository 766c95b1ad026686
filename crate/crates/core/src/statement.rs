use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

/// Conversation label for rows inserted by a trainer.
pub const TRAINING: &str = "training";
/// Conversation label for rows learned from live chat.
pub const LIVE: &str = "";

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

/// UTC instant with whole-second precision, rendered as `2024-01-31T12:00:00Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn now() -> Self {
        Self(Utc::now().trunc_subsecs(0))
    }

    pub fn from_unix(secs: i64) -> Option<Self> {
        DateTime::from_timestamp(secs, 0).map(Self)
    }

    pub fn unix(&self) -> i64 {
        self.0.timestamp()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format(TIMESTAMP_FORMAT))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid timestamp {0:?}")]
pub struct TimestampParseError(String);

impl FromStr for Timestamp {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT) {
            return Ok(Self(naive.and_utc()));
        }
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f") {
            return Ok(Self(naive.and_utc().trunc_subsecs(0)));
        }
        // accept other RFC 3339 renderings written by foreign tools
        DateTime::parse_from_rfc3339(s)
            .map(|dt| Self(dt.with_timezone(&Utc).trunc_subsecs(0)))
            .map_err(|_| TimestampParseError(s.to_owned()))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// One stored utterance: a node of the response graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub id: i64,
    pub text: String,
    /// Text of the prompt this statement answers.
    pub in_response_to: Option<String>,
    pub conversation: String,
    pub created_at: Timestamp,
    pub tags: BTreeSet<String>,
}

impl Statement {
    pub fn is_live(&self) -> bool {
        self.conversation == LIVE
    }

    /// The statement without its id, as it would be re-inserted elsewhere.
    pub fn to_new(&self) -> NewStatement {
        NewStatement {
            text: self.text.clone(),
            in_response_to: self.in_response_to.clone(),
            conversation: self.conversation.clone(),
            created_at: self.created_at,
            tags: self.tags.clone(),
        }
    }
}

/// A statement that has not been assigned an id yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewStatement {
    pub text: String,
    pub in_response_to: Option<String>,
    pub conversation: String,
    pub created_at: Timestamp,
    pub tags: BTreeSet<String>,
}

impl NewStatement {
    /// A live-learned row stamped with the current time.
    pub fn live(text: impl Into<String>, in_response_to: Option<String>) -> Self {
        Self {
            text: text.into(),
            in_response_to,
            conversation: LIVE.to_owned(),
            created_at: Timestamp::now(),
            tags: BTreeSet::new(),
        }
    }

    /// A trainer row stamped with the current time.
    pub fn training(text: impl Into<String>, in_response_to: Option<String>) -> Self {
        Self {
            conversation: TRAINING.to_owned(),
            ..Self::live(text, in_response_to)
        }
    }

    pub fn with_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.tags.extend(tags.into_iter().map(Into::into));
        self
    }

    pub fn at(mut self, created_at: Timestamp) -> Self {
        self.created_at = created_at;
        self
    }

    pub(crate) fn into_statement(self, id: i64) -> Statement {
        Statement {
            id,
            text: self.text,
            in_response_to: self.in_response_to,
            conversation: self.conversation,
            created_at: self.created_at,
            tags: self.tags,
        }
    }
}
