//! Embedded-corpus persistence.
//!
//! Two encodings are supported and auto-detected on load:
//!
//! * line-delimited JSON, one user per line:
//!   `{"user_id": "u1", "label": 1, "vectors": [[0.1, ...], ...]}`
//! * a binary container, all integers and floats little-endian:
//!
//! ```text
//! magic    b"LMIL"
//! version  u32 (= 1)
//! dim      u32
//! users    u32
//! per user:
//!   id_len u32, id (UTF-8)
//!   label  u8   (0, 1, or 255 = unlabeled)
//!   rows   u32
//!   rows * dim f32
//! ```

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_unique_ids, corpus_dim, EmbeddedUser, Label};
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LMIL";
pub const VERSION: u32 = 1;
const UNLABELED: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddedFormat {
    Jsonl,
    Binary,
}

impl EmbeddedFormat {
    /// `.bin` and `.lmil` select the binary container; anything else JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("lmil") => EmbeddedFormat::Binary,
            _ => EmbeddedFormat::Jsonl,
        }
    }
}

#[derive(Serialize)]
struct JsonUserOut<'a> {
    user_id: &'a str,
    label: Option<Label>,
    vectors: Vec<&'a [f32]>,
}

#[derive(Deserialize)]
struct JsonUserIn {
    user_id: String,
    #[serde(default)]
    label: Option<Label>,
    vectors: Vec<Vec<f32>>,
}

pub fn persist_embedded_corpus(users: &[EmbeddedUser], path: &Path, format: EmbeddedFormat) -> Result<()> {
    let bytes = match format {
        EmbeddedFormat::Jsonl => encode_jsonl(users)?,
        EmbeddedFormat::Binary => encode_binary(users)?,
    };
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_embedded_corpus(path: &Path) -> Result<Vec<EmbeddedUser>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        decode_binary(&bytes)
    } else {
        decode_jsonl(&bytes, path)
    }
}

pub fn encode_jsonl(users: &[EmbeddedUser]) -> Result<Vec<u8>> {
    corpus_dim(users)?;
    let mut out = Vec::new();
    for u in users {
        let rec = JsonUserOut {
            user_id: &u.user_id,
            label: u.label,
            vectors: u.rows().collect(),
        };
        serde_json::to_writer(&mut out, &rec).map_err(|e| Error::Format(e.to_string()))?;
        out.push(b'\n');
    }
    Ok(out)
}

fn decode_jsonl(bytes: &[u8], path: &Path) -> Result<Vec<EmbeddedUser>> {
    let mut users = Vec::new();
    for (idx, line) in BufReader::new(bytes).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at_line = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let rec: JsonUserIn = serde_json::from_str(&line).map_err(|e| at_line(e.to_string()))?;
        let user = EmbeddedUser::from_rows(rec.user_id, rec.label, &rec.vectors).map_err(|e| at_line(e.to_string()))?;
        users.push(user);
    }
    corpus_dim(&users)?;
    check_unique_ids(users.iter().map(|u| u.user_id.as_str()))?;
    Ok(users)
}

pub fn encode_binary(users: &[EmbeddedUser]) -> Result<Vec<u8>> {
    let dim = corpus_dim(users)?.unwrap_or(0);
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.len_u32(dim)?;
    w.len_u32(users.len())?;
    for u in users {
        w.len_u32(u.user_id.len())?;
        w.bytes(u.user_id.as_bytes());
        w.u8(u.label.map_or(UNLABELED, Label::as_u8));
        w.len_u32(u.len())?;
        for &v in u.as_slice() {
            w.f32(v);
        }
    }
    Ok(w.into_inner())
}

fn decode_binary(bytes: &[u8]) -> Result<Vec<EmbeddedUser>> {
    let mut r = Reader::new(bytes, "embedded corpus");
    if r.take(4)? != MAGIC {
        return Err(Error::Format("embedded corpus: bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "embedded corpus: unsupported version {version} (expected {VERSION})"
        )));
    }
    let dim = r.u32()? as usize;
    let count = r.u32()? as usize;
    if count > 0 && dim == 0 {
        return Err(Error::Format("embedded corpus: zero dimension with non-empty user list".into()));
    }
    let mut users = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let id = r.string()?;
        let label = match r.u8()? {
            UNLABELED => None,
            b => Some(Label::from_u8(b).ok_or_else(|| {
                Error::Format(format!("embedded corpus: user `{id}` has invalid label byte {b}"))
            })?),
        };
        let rows = r.u32()? as usize;
        let n = rows
            .checked_mul(dim)
            .ok_or_else(|| Error::Format("embedded corpus: row count overflows".into()))?;
        // Bound the allocation by what the buffer can actually hold.
        let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Format("embedded corpus: size overflow".into()))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        users.push(EmbeddedUser::new(id, label, dim, data).map_err(|e| Error::Format(e.to_string()))?);
    }
    r.finish()?;
    check_unique_ids(users.iter().map(|u| u.user_id.as_str()))?;
    Ok(users)
}
