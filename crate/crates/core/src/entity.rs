use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// The closed set of entity categories. Declaration order is the canonical
/// resolution order and the sort order used for serialized graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityType {
    Person,
    Location,
    Routes,
    Organization,
    MeansOfTransportation,
    MeansOfCommunication,
    SmuggledItems,
}

impl EntityType {
    pub const ALL: [EntityType; 7] = [
        EntityType::Person,
        EntityType::Location,
        EntityType::Routes,
        EntityType::Organization,
        EntityType::MeansOfTransportation,
        EntityType::MeansOfCommunication,
        EntityType::SmuggledItems,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Person => "PERSON",
            EntityType::Location => "LOCATION",
            EntityType::Routes => "ROUTES",
            EntityType::Organization => "ORGANIZATION",
            EntityType::MeansOfTransportation => "MEANS_OF_TRANSPORTATION",
            EntityType::MeansOfCommunication => "MEANS_OF_COMMUNICATION",
            EntityType::SmuggledItems => "SMUGGLED_ITEMS",
        }
    }

    /// Human-readable label used inside prompts ("Means of Transportation").
    pub fn label(self) -> &'static str {
        match self {
            EntityType::Person => "Person",
            EntityType::Location => "Location",
            EntityType::Routes => "Routes",
            EntityType::Organization => "Organization",
            EntityType::MeansOfTransportation => "Means of Transportation",
            EntityType::MeansOfCommunication => "Means of Communication",
            EntityType::SmuggledItems => "Smuggled Items",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown entity type {0:?}")]
pub struct UnknownEntityType(pub String);

impl FromStr for EntityType {
    type Err = UnknownEntityType;

    /// Accepts the canonical upper-snake form as well as spaced or
    /// lower-case spellings; "ROUTE" is accepted for ROUTES.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut key = String::with_capacity(s.len());
        for part in s.trim().split(|c: char| c.is_whitespace() || c == '_' || c == '-') {
            if part.is_empty() {
                continue;
            }
            if !key.is_empty() {
                key.push('_');
            }
            for c in part.chars() {
                key.extend(c.to_uppercase());
            }
        }
        let ty = match key.as_str() {
            "PERSON" => EntityType::Person,
            "LOCATION" => EntityType::Location,
            "ROUTES" | "ROUTE" => EntityType::Routes,
            "ORGANIZATION" => EntityType::Organization,
            "MEANS_OF_TRANSPORTATION" => EntityType::MeansOfTransportation,
            "MEANS_OF_COMMUNICATION" => EntityType::MeansOfCommunication,
            "SMUGGLED_ITEMS" | "SMUGGLED_ITEM" => EntityType::SmuggledItems,
            _ => return Err(UnknownEntityType(String::from(s))),
        };
        Ok(ty)
    }
}

/// Pipeline variant: the full pipeline or the minimally adapted baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Corekg,
    Baseline,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Corekg => "corekg",
            Mode::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "corekg" => Ok(Mode::Corekg),
            "baseline" => Ok(Mode::Baseline),
            other => Err(alloc::format!("unknown mode {other:?}")),
        }
    }
}

/// Name normalization shared by graph merging, filtering and scoring:
/// trim, collapse internal whitespace runs to one space, uppercase.
pub fn normalize_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for word in name.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for c in word.chars() {
            out.extend(c.to_uppercase());
        }
    }
    out
}
