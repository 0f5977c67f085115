use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! opaque_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                $name(s.into())
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

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

opaque_id!(
    /// A patient visit (the census/procedure "Primary CSN").
    PatientId
);
opaque_id!(SurgeonId);
opaque_id!(
    /// A hospital location: a post-op unit or an operating-room suite.
    UnitId
);

impl UnitId {
    /// Reserved unit for cases that need no post-op bed.
    pub const NONE: &'static str = "NONE";

    pub fn none() -> Self {
        UnitId::new(Self::NONE)
    }

    pub fn is_none_unit(&self) -> bool {
        self.0 == Self::NONE
    }
}
