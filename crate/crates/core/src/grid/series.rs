use std::borrow::Borrow;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A value given once for the whole horizon or once per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerStep<T> {
    Scalar(T),
    Steps(Vec<T>),
}

impl<T: Clone> PerStep<T> {
    /// Value at step `t`. Out-of-range steps reuse the last entry; the
    /// validator rejects series whose length differs from the horizon.
    pub fn at(&self, t: usize) -> T {
        match self {
            PerStep::Scalar(v) => v.clone(),
            PerStep::Steps(v) => v[t.min(v.len() - 1)].clone(),
        }
    }

    pub fn len_matches(&self, steps: usize) -> bool {
        match self {
            PerStep::Scalar(_) => true,
            PerStep::Steps(v) => v.len() == steps,
        }
    }

    pub fn values(&self) -> Vec<T> {
        match self {
            PerStep::Scalar(v) => vec![v.clone()],
            PerStep::Steps(v) => v.clone(),
        }
    }
}

impl<T> From<T> for PerStep<T> {
    fn from(v: T) -> Self {
        PerStep::Scalar(v)
    }
}

macro_rules! id_type {
    ($($(#[$m:meta])* $name:ident),* $(,)?) => {$(
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }
    )*};
}

id_type!(
    ZoneId,
    LinkId,
    PlantId,
    GeneratorId,
    ReservoirId,
    RiverId,
    SpillwayId,
    ResourceId,
    FcplId,
    TopologyId,
    StabilityZoneId,
    ActionId,
);
