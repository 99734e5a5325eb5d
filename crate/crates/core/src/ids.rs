//! Author-visible identifiers.
//!
//! Every identifier is lowercase ASCII alphanumerics plus `-`, must start
//! with an alphanumeric, and is at most 64 characters long.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

pub const MAX_ID_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid identifier {value:?}: {reason}")]
pub struct IdError {
    pub value: String,
    pub reason: &'static str,
}

pub fn check_ident(value: &str) -> Result<(), IdError> {
    let fail = |reason| {
        Err(IdError {
            value: value.to_string(),
            reason,
        })
    };
    if value.is_empty() {
        return fail("empty");
    }
    if value.len() > MAX_ID_LEN {
        return fail("longer than 64 characters");
    }
    if !value
        .bytes()
        .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
    {
        return fail("only lowercase letters, digits and '-' are allowed");
    }
    if value.starts_with('-') {
        return fail("must start with a letter or digit");
    }
    Ok(())
}

macro_rules! ident_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Result<Self, IdError> {
                let value = value.into();
                check_ident(&value)?;
                Ok(Self(value))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl FromStr for $name {
            type Err = IdError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(deserializer)?;
                Self::new(raw).map_err(serde::de::Error::custom)
            }
        }
    };
}

ident_newtype!(
    /// Identifies a dialogue state within one FSM.
    StateId
);
ident_newtype!(
    /// Identifies a session topic; also keys that session's FSM.
    SessionId
);
ident_newtype!(ProjectId);
ident_newtype!(MaterialId);
ident_newtype!(PlayId);

impl ProjectId {
    pub fn generate() -> Self {
        Self(uuid::Uuid::new_v4().simple().to_string())
    }
}

impl MaterialId {
    pub fn generate() -> Self {
        Self(uuid::Uuid::new_v4().simple().to_string())
    }
}

impl PlayId {
    pub fn generate() -> Self {
        Self(uuid::Uuid::new_v4().simple().to_string())
    }
}
