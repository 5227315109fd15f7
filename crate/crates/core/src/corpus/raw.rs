//! Line-delimited JSON ingestion of raw (un-embedded) user timelines.
//!
//! One user per line:
//! `{"user_id": "u1", "label": 1, "tweets": [{"text": "...", "timestamp": "2020-01-01T08:00:00Z"}]}`
//! `label` may be `0`, `1`, `null` or absent. `timestamp` is optional but must
//! be given for all of a user's tweets or for none of them.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{check_unique_ids, Label, TweetRecord, UserRecord};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
struct RawUser {
    user_id: String,
    #[serde(default)]
    label: Option<Label>,
    tweets: Vec<RawTweet>,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawTweet {
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
}

#[derive(Serialize)]
struct RawUserOut<'a> {
    user_id: &'a str,
    label: Option<Label>,
    tweets: Vec<RawTweetOut<'a>>,
}

#[derive(Serialize)]
struct RawTweetOut<'a> {
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<&'a str>,
}

/// Reads a raw corpus, returning each user's tweets in chronological order
/// (by timestamp, then by position in the file). Text is left untouched.
pub fn load_user_corpus(path: &Path) -> Result<Vec<UserRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut users = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let raw: RawUser = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        users.push(into_user(raw).map_err(parse_err)?);
    }
    check_unique_ids(users.iter().map(|u| u.user_id.as_str()))?;
    Ok(users)
}

fn into_user(raw: RawUser) -> std::result::Result<UserRecord, String> {
    if raw.tweets.is_empty() {
        return Err(format!("user `{}` has no tweets", raw.user_id));
    }
    let stamped = raw.tweets.iter().filter(|t| t.timestamp.is_some()).count();
    if stamped != 0 && stamped != raw.tweets.len() {
        return Err(format!(
            "user `{}`: timestamps must be given for all tweets or none ({stamped} of {})",
            raw.user_id,
            raw.tweets.len()
        ));
    }

    let mut keyed = Vec::with_capacity(raw.tweets.len());
    for (ordinal, tweet) in raw.tweets.into_iter().enumerate() {
        let key = match &tweet.timestamp {
            Some(ts) => Some(parse_timestamp(ts).ok_or_else(|| {
                format!("user `{}`: unrecognized timestamp `{ts}`", raw.user_id)
            })?),
            None => None,
        };
        keyed.push((key, ordinal, tweet));
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

    let tweets = keyed
        .into_iter()
        .enumerate()
        .map(|(ordinal, (_, _, t))| TweetRecord {
            ordinal,
            timestamp: t.timestamp,
            text: t.text,
        })
        .collect();
    Ok(UserRecord {
        user_id: raw.user_id,
        label: raw.label,
        tweets,
    })
}

/// Timestamp as UTC nanoseconds since the epoch. Accepts RFC 3339, a naive
/// `YYYY-MM-DD[T ]HH:MM:SS` (taken as UTC) or a bare date.
pub(crate) fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return dt.timestamp_nanos_opt();
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return dt.and_utc().timestamp_nanos_opt();
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .and_then(|dt| dt.and_utc().timestamp_nanos_opt())
}

/// Writes users back in the ingestion format, tweets in stored order.
pub fn write_user_corpus(users: &[UserRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for u in users {
        let out = RawUserOut {
            user_id: &u.user_id,
            label: u.label,
            tweets: u
                .tweets
                .iter()
                .map(|t| RawTweetOut {
                    text: &t.text,
                    timestamp: t.timestamp.as_deref(),
                })
                .collect(),
        };
        let line = serde_json::to_string(&out).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_two_users() {
        let f = write_tmp(concat!(
            r#"{"user_id":"a","label":1,"tweets":[{"text":"x"},{"text":"y"}]}"#,
            "\n",
            r#"{"user_id":"b","label":null,"tweets":[{"text":"z"}]}"#,
            "\n"
        ));
        let users = load_user_corpus(f.path()).unwrap();
        assert_eq!(users.len(), 2);
        assert_eq!(users[0].label, Some(Label::Depressed));
        assert_eq!(users[1].label, None);
        assert_eq!(users[0].tweets[1].text, "y");
        assert_eq!(users[0].tweets[1].ordinal, 1);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = write_tmp(concat!(
            r#"{"user_id":"a","tweets":[{"text":"x"}]}"#,
            "\n",
            r#"{"user_id":"a","tweets":[{"text":"y"}]}"#,
        ));
        assert!(matches!(load_user_corpus(f.path()), Err(Error::DuplicateUser(id)) if id == "a"));
    }

    #[test]
    fn out_of_order_timestamps_are_sorted() {
        let f = write_tmp(
            r#"{"user_id":"a","label":0,"tweets":[{"text":"third","timestamp":"2021-03-01T00:00:00Z"},{"text":"first","timestamp":"2021-01-01T00:00:00+08:00"},{"text":"second","timestamp":"2021-02-01 12:00:00"}]}"#,
        );
        let users = load_user_corpus(f.path()).unwrap();
        let texts: Vec<_> = users[0].tweets.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["first", "second", "third"]);
        let ordinals: Vec<_> = users[0].tweets.iter().map(|t| t.ordinal).collect();
        assert_eq!(ordinals, [0, 1, 2]);
    }

    #[test]
    fn equal_timestamps_keep_file_order() {
        let f = write_tmp(
            r#"{"user_id":"a","tweets":[{"text":"p","timestamp":"2021-01-01"},{"text":"q","timestamp":"2021-01-01"}]}"#,
        );
        let users = load_user_corpus(f.path()).unwrap();
        assert_eq!(users[0].tweets[0].text, "p");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_tmp("{\"user_id\":\"a\",\"tweets\":[{\"text\":\"x\"}]}\n\nnot json\n");
        match load_user_corpus(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_tweets_and_bad_labels_rejected() {
        let f = write_tmp(r#"{"user_id":"a","tweets":[]}"#);
        assert!(matches!(load_user_corpus(f.path()), Err(Error::Parse { line: 1, .. })));
        let f = write_tmp(r#"{"user_id":"a","label":3,"tweets":[{"text":"x"}]}"#);
        assert!(load_user_corpus(f.path()).is_err());
        let f = write_tmp(r#"{"user_id":"a","tweets":[{"text":"x","timestamp":"2020-01-01"},{"text":"y"}]}"#);
        assert!(load_user_corpus(f.path()).is_err());
    }

    #[test]
    fn write_then_load_round_trips() {
        let f = write_tmp(
            r#"{"user_id":"a","label":1,"tweets":[{"text":"one","timestamp":"2020-01-01"},{"text":"two","timestamp":"2020-01-02"}]}"#,
        );
        let users = load_user_corpus(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_user_corpus(&users, out.path()).unwrap();
        assert_eq!(load_user_corpus(out.path()).unwrap(), users);
    }
}
