use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// One scraped joke with its latest known upvote score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JokeRecord {
    pub id: String,
    pub body: String,
    pub punchline: String,
    pub score: u64,
    pub created_at: i64,
    pub last_refreshed: i64,
}

impl JokeRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(CoreError::InvalidConfig("joke record with empty id".into()));
        }
        if self.body.trim().is_empty() && self.punchline.trim().is_empty() {
            return Err(CoreError::InvalidConfig(format!(
                "joke {}: body and punchline are both empty",
                self.id
            )));
        }
        if self.last_refreshed < self.created_at {
            return Err(CoreError::InvalidConfig(format!(
                "joke {}: last_refreshed precedes created_at",
                self.id
            )));
        }
        Ok(())
    }

    /// Body and punchline joined by one space, outer-trimmed.
    pub fn full_text(&self) -> String {
        let joined = format!("{} {}", self.body, self.punchline);
        String::from(joined.trim())
    }
}
