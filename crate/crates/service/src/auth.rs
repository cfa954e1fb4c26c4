//! Bearer-token authentication from a static token file.
//!
//! ```toml
//! [[token]]
//! token = "s3cret-archi"
//! participant = "archi"
//! role = "Architect"
//! ```

use std::collections::HashMap;
use std::path::Path;

use illocute_core::act::Role;
use illocute_core::ids::ParticipantId;
use serde::Deserialize;
use thiserror::Error;

/// An authenticated participant and the role their token grants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caller {
    pub participant: ParticipantId,
    pub role: Role,
}

#[derive(Debug, Error)]
pub enum TokenFileError {
    #[error("cannot read token file: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid token file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("token listed twice")]
    DuplicateToken,
    #[error("participant {0} is listed with two different roles")]
    ConflictingRole(ParticipantId),
}

#[derive(Deserialize)]
struct TokenFile {
    #[serde(default, rename = "token")]
    tokens: Vec<TokenEntry>,
}

#[derive(Deserialize)]
struct TokenEntry {
    token: String,
    participant: ParticipantId,
    role: Role,
}

#[derive(Debug, Clone, Default)]
pub struct TokenRegistry {
    by_token: HashMap<String, Caller>,
    roles: HashMap<ParticipantId, Role>,
}

impl TokenRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a token. A participant keeps one role across all tokens.
    pub fn insert(
        &mut self,
        token: impl Into<String>,
        participant: ParticipantId,
        role: Role,
    ) -> Result<(), TokenFileError> {
        let token = token.into();
        if self.by_token.contains_key(&token) {
            return Err(TokenFileError::DuplicateToken);
        }
        match self.roles.get(&participant) {
            Some(r) if *r != role => return Err(TokenFileError::ConflictingRole(participant)),
            _ => {}
        }
        self.roles.insert(participant.clone(), role);
        self.by_token.insert(token, Caller { participant, role });
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, TokenFileError> {
        let file: TokenFile = toml::from_str(text)?;
        let mut registry = TokenRegistry::new();
        for e in file.tokens {
            registry.insert(e.token, e.participant, e.role)?;
        }
        Ok(registry)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TokenFileError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn authenticate(&self, token: &str) -> Option<&Caller> {
        self.by_token.get(token)
    }

    pub fn role_of(&self, participant: &ParticipantId) -> Option<Role> {
        self.roles.get(participant).copied()
    }

    pub fn len(&self) -> usize {
        self.by_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_token.is_empty()
    }
}
