//! Users, tweets, and their embedded form.

pub mod embed;
pub mod raw;
pub mod split;
pub mod store;
pub mod synth;
pub mod text;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kernel::Matrix;

pub use embed::{embed_corpus, hash_embed};
pub use raw::{load_user_corpus, write_user_corpus};
pub use split::{split_dataset, Split, SplitSpec};
pub use store::{load_embedded_corpus, persist_embedded_corpus, EmbeddedFormat};
pub use synth::{generate_synthetic_corpus, SynthConfig, SyntheticCorpus};
pub use text::{normalize_text, TextNormalizer};

/// User-level class. `Depressed` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Normal = 0,
    Depressed = 1,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Normal),
            1 => Some(Label::Depressed),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }

    pub fn is_positive(self) -> bool {
        self == Label::Depressed
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Label::from_u8(v).ok_or_else(|| serde::de::Error::custom(format!("label must be 0 or 1, got {v}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    /// Position in the user's chronological timeline.
    pub ordinal: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub user_id: String,
    pub label: Option<Label>,
    pub tweets: Vec<TweetRecord>,
}

/// A user's tweets as an `m x dim` row-major matrix of `f32`.
///
/// Stored at 32-bit precision so both on-disk encodings round-trip exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedUser {
    pub user_id: String,
    pub label: Option<Label>,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddedUser {
    pub fn new(user_id: impl Into<String>, label: Option<Label>, dim: usize, data: Vec<f32>) -> Result<Self> {
        let user_id = user_id.into();
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "user `{user_id}`: {} values do not form a non-empty matrix with {dim} columns",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "user `{user_id}`: vector entry {bad} is {}",
                data[bad]
            )));
        }
        Ok(Self {
            user_id,
            label,
            dim,
            data,
        })
    }

    pub fn from_rows(user_id: impl Into<String>, label: Option<Label>, rows: &[Vec<f32>]) -> Result<Self> {
        let user_id = user_id.into();
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Dimension {
                user: user_id,
                expected: dim,
                actual: bad.len(),
            });
        }
        Self::new(user_id, label, dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of tweets `m`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, j: usize) -> &[f32] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::new(self.len(), self.dim, self.data.iter().map(|&v| f64::from(v)).collect())
            .expect("EmbeddedUser is a non-empty matrix")
    }

    /// Same user with rows in reverse chronological order.
    pub fn reversed(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks_exact(self.dim).rev() {
            data.extend_from_slice(row);
        }
        Self {
            data,
            ..self.clone()
        }
    }
}

/// Anything that carries a user id and an optional label.
pub trait Labeled {
    fn user_id(&self) -> &str;
    fn label(&self) -> Option<Label>;
}

impl Labeled for UserRecord {
    fn user_id(&self) -> &str {
        &self.user_id
    }
    fn label(&self) -> Option<Label> {
        self.label
    }
}

impl Labeled for EmbeddedUser {
    fn user_id(&self) -> &str {
        &self.user_id
    }
    fn label(&self) -> Option<Label> {
        self.label
    }
}

/// Common embedding dimension of a corpus, checking every user agrees.
/// Returns `None` for an empty corpus.
pub fn corpus_dim(users: &[EmbeddedUser]) -> Result<Option<usize>> {
    let Some(first) = users.first() else {
        return Ok(None);
    };
    for u in users {
        if u.dim() != first.dim() {
            return Err(Error::Dimension {
                user: u.user_id.clone(),
                expected: first.dim(),
                actual: u.dim(),
            });
        }
    }
    Ok(Some(first.dim()))
}

/// Labels of every user, failing on the first unlabeled one.
pub fn require_labels<T: Labeled>(users: &[T]) -> Result<Vec<Label>> {
    users
        .iter()
        .map(|u| u.label().ok_or_else(|| Error::MissingLabel(u.user_id().to_string())))
        .collect()
}

pub(crate) fn check_unique_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateUser(id.to_string()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_user_validates_shape() {
        assert!(EmbeddedUser::new("a", None, 3, vec![0.0; 7]).is_err());
        assert!(EmbeddedUser::new("a", None, 3, vec![]).is_err());
        assert!(EmbeddedUser::new("a", None, 1, vec![f32::NAN]).is_err());
        let u = EmbeddedUser::from_rows("a", Some(Label::Depressed), &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(u.len(), 2);
        assert_eq!(u.row(1), &[3.0, 4.0]);
        assert_eq!(u.reversed().row(0), &[3.0, 4.0]);
        assert_eq!(u.to_matrix().get(1, 0), 3.0);
    }

    #[test]
    fn label_serde_rejects_other_values() {
        assert_eq!(serde_json::to_string(&Label::Depressed).unwrap(), "1");
        assert!(serde_json::from_str::<Label>("2").is_err());
        assert_eq!(serde_json::from_str::<Option<Label>>("null").unwrap(), None);
    }

    #[test]
    fn corpus_dim_detects_mismatch() {
        let a = EmbeddedUser::new("a", None, 2, vec![0.0; 2]).unwrap();
        let b = EmbeddedUser::new("b", None, 3, vec![0.0; 3]).unwrap();
        assert!(matches!(corpus_dim(&[a.clone(), b]), Err(Error::Dimension { .. })));
        assert_eq!(corpus_dim(&[a]).unwrap(), Some(2));
        assert_eq!(corpus_dim(&[]).unwrap(), None);
    }
}
