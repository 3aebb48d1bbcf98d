//! Reasoning-difficulty scoring of instructions from attribute annotations.
//!
//! Each instruction is annotated with attribute tags drawn from a fixed
//! rulebook of nine categories. The difficulty score is the sum of the tag
//! scores, and the level follows from the total: 1 is easy, 2 is medium and
//! anything from 3 up is hard.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Easy,
    Medium,
    Hard,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Easy, Level::Medium, Level::Hard];

    pub fn from_total(total: u32) -> Option<Level> {
        match total {
            0 => None,
            1 => Some(Level::Easy),
            2 => Some(Level::Medium),
            _ => Some(Level::Hard),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Level::Easy => "easy",
            Level::Medium => "medium",
            Level::Hard => "hard",
        }
    }

    /// Parse a benchmark level directory name. The released layout spells
    /// the medium folder "meidum", so both spellings are accepted.
    pub fn from_dir_name(name: &str) -> Option<Level> {
        match name.to_ascii_lowercase().as_str() {
            "easy" => Some(Level::Easy),
            "medium" | "meidum" => Some(Level::Medium),
            "hard" => Some(Level::Hard),
            _ => None,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = DifficultyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Level::from_dir_name(s).ok_or_else(|| DifficultyError::UnknownLevel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    SpatialPosition,
    Movement,
    Costume,
    HumanAttribute,
    ObjectUsage,
    ObjectAppearance,
    SpecificNoun,
    AuxiliaryModifier,
    Others,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::SpatialPosition,
        Category::Movement,
        Category::Costume,
        Category::HumanAttribute,
        Category::ObjectUsage,
        Category::ObjectAppearance,
        Category::SpecificNoun,
        Category::AuxiliaryModifier,
        Category::Others,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::SpatialPosition => "SpatialPosition",
            Category::Movement => "Movement",
            Category::Costume => "Costume",
            Category::HumanAttribute => "HumanAttribute",
            Category::ObjectUsage => "ObjectUsage",
            Category::ObjectAppearance => "ObjectAppearance",
            Category::SpecificNoun => "SpecificNoun",
            Category::AuxiliaryModifier => "AuxiliaryModifier",
            Category::Others => "Others",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = DifficultyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| DifficultyError::UnknownCategory(s.to_string()))
    }
}

/// One rulebook row: a detailed attribute and its allowed score range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Rule {
    pub category: Category,
    pub detailed: &'static str,
    pub min_score: u32,
    pub max_score: u32,
}

const fn rule(category: Category, detailed: &'static str, min_score: u32, max_score: u32) -> Rule {
    Rule {
        category,
        detailed,
        min_score,
        max_score,
    }
}

// Object usage has no detailed sub-attribute; its key is "-".
static RULEBOOK: [Rule; 32] = [
    rule(Category::SpatialPosition, "orientation", 1, 1),
    rule(Category::SpatialPosition, "long time position change", 2, 2),
    rule(Category::SpatialPosition, "relative position", 1, 3),
    rule(Category::Movement, "concrete movement", 1, 1),
    rule(Category::Movement, "generalized behavior", 2, 2),
    rule(Category::Movement, "movement tendency", 2, 2),
    rule(Category::Movement, "social behavior", 2, 2),
    rule(Category::Movement, "multi-person associated action", 2, 2),
    rule(Category::Movement, "action modifier", 1, 1),
    rule(Category::Costume, "color", 1, 2),
    rule(Category::Costume, "style", 1, 2),
    rule(Category::Costume, "modifier", 2, 3),
    rule(Category::HumanAttribute, "gender", 1, 1),
    rule(Category::HumanAttribute, "age", 1, 1),
    rule(Category::HumanAttribute, "manner", 1, 1),
    rule(Category::HumanAttribute, "appearance", 1, 1),
    rule(Category::HumanAttribute, "figure", 1, 1),
    rule(Category::HumanAttribute, "personality", 1, 3),
    rule(Category::HumanAttribute, "mental activity", 1, 3),
    rule(Category::HumanAttribute, "mood", 1, 3),
    rule(Category::ObjectUsage, "-", 1, 1),
    rule(Category::ObjectAppearance, "color", 1, 2),
    rule(Category::ObjectAppearance, "size", 1, 1),
    rule(Category::SpecificNoun, "direct description", 1, 1),
    rule(Category::SpecificNoun, "figurative description", 2, 2),
    rule(Category::AuxiliaryModifier, "adjective", 1, 1),
    rule(Category::AuxiliaryModifier, "adverb", 1, 1),
    rule(Category::AuxiliaryModifier, "time determiner", 1, 2),
    rule(Category::Others, "interrelation", 2, 3),
    rule(Category::Others, "aim", 2, 4),
    rule(Category::Others, "common sense interpretation", 1, 3),
    rule(Category::Others, "event trend words", 2, 3),
];

/// The full attribute scoring table.
pub fn rulebook() -> &'static [Rule] {
    &RULEBOOK
}

fn normalize_key(detailed: &str) -> String {
    detailed.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Look up a detailed attribute within a category. Keys match
/// case-insensitively with whitespace collapsed.
pub fn lookup(category: Category, detailed: &str) -> Option<&'static Rule> {
    let key = normalize_key(detailed);
    RULEBOOK
        .iter()
        .find(|r| r.category == category && r.detailed == key)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DifficultyError {
    #[error("no attribute tags given")]
    EmptyTags,
    #[error("unknown attribute category '{0}'")]
    UnknownCategory(String),
    #[error("unknown level '{0}'")]
    UnknownLevel(String),
    #[error("tag ({category}, \"{detailed}\") is not in the rulebook")]
    UnknownAttribute { category: Category, detailed: String },
    #[error("tag ({category}, \"{detailed}\") has score {score}, allowed {min}..={max}")]
    ScoreOutOfRange {
        category: Category,
        detailed: String,
        score: u32,
        min: u32,
        max: u32,
    },
    #[error("tag ({category}, \"{detailed}\") appears more than once")]
    DuplicateTag { category: Category, detailed: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeTag {
    pub category: Category,
    pub detailed: String,
    pub score: u32,
}

impl AttributeTag {
    pub fn new(category: Category, detailed: impl Into<String>, score: u32) -> Self {
        Self {
            category,
            detailed: detailed.into(),
            score,
        }
    }

    pub fn validate(&self) -> Result<&'static Rule, DifficultyError> {
        let rule = lookup(self.category, &self.detailed).ok_or_else(|| DifficultyError::UnknownAttribute {
            category: self.category,
            detailed: self.detailed.clone(),
        })?;
        if self.score < rule.min_score || self.score > rule.max_score {
            return Err(DifficultyError::ScoreOutOfRange {
                category: self.category,
                detailed: self.detailed.clone(),
                score: self.score,
                min: rule.min_score,
                max: rule.max_score,
            });
        }
        Ok(rule)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DifficultyResult {
    pub total: u32,
    pub level: Level,
}

/// Validate every tag and sum the scores.
pub fn score(tags: &[AttributeTag]) -> Result<DifficultyResult, DifficultyError> {
    if tags.is_empty() {
        return Err(DifficultyError::EmptyTags);
    }
    let mut seen = BTreeSet::new();
    let mut total = 0u32;
    for tag in tags {
        let rule = tag.validate()?;
        if !seen.insert((rule.category, rule.detailed)) {
            return Err(DifficultyError::DuplicateTag {
                category: tag.category,
                detailed: tag.detailed.clone(),
            });
        }
        total += tag.score;
    }
    let level = Level::from_total(total).expect("validated scores are positive");
    Ok(DifficultyResult { total, level })
}

/// One line of an attribute annotation file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub task_id: String,
    pub tags: Vec<AttributeTag>,
}

/// Parse a line-delimited annotation file. Blank lines are skipped.
pub fn read_annotations(text: &str) -> Result<Vec<Annotation>, DifficultyError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DifficultyError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_annotations(annotations: &[Annotation]) -> String {
    let mut out = String::new();
    for a in annotations {
        out.push_str(&serde_json::to_string(a).expect("annotation serializes"));
        out.push('\n');
    }
    out
}
