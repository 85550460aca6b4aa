//! Session manifest: the CSV binding clip ids to audio files, transcript
//! sidecars, speaker gender, and the prompt sentence number.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AudioError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Unspecified,
}

impl Gender {
    fn parse(s: &str) -> Option<Gender> {
        match s {
            "female" => Some(Gender::Female),
            "male" => Some(Gender::Male),
            "" | "unspecified" => Some(Gender::Unspecified),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerRecord {
    pub clip_id: String,
    pub audio_path: String,
    pub transcript_path: Option<String>,
    pub speaker_gender: Gender,
    /// Prompt sentence number, 1..=5 when present.
    pub sentence_id: Option<u32>,
}

const HEADER: [&str; 5] = ["clip_id", "audio_path", "transcript_path", "gender", "sentence_id"];

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<SpeakerRecord>, AudioError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            AudioError::FileMissing(path.to_path_buf())
        } else {
            AudioError::Io(e)
        }
    })?;
    parse_manifest(file)
}

pub fn parse_manifest(reader: impl Read) -> Result<Vec<SpeakerRecord>, AudioError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    {
        let headers = rdr.headers().map_err(|e| AudioError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?;
        let got: Vec<&str> = headers.iter().map(str::trim).collect();
        if got != HEADER {
            return Err(AudioError::MalformedRow {
                line: 1,
                reason: format!("header {got:?}, expected {HEADER:?}"),
            });
        }
    }

    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let row = row.map_err(|e| AudioError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if row.len() != HEADER.len() {
            return Err(AudioError::MalformedRow {
                line,
                reason: format!("{} columns, expected {}", row.len(), HEADER.len()),
            });
        }
        let field = |idx: usize| row.get(idx).unwrap_or("").trim();

        let clip_id = field(0).to_string();
        if clip_id.is_empty() {
            return Err(AudioError::MalformedRow {
                line,
                reason: "empty clip_id".into(),
            });
        }
        if !seen.insert(clip_id.clone()) {
            return Err(AudioError::DuplicateClipId(clip_id));
        }
        let speaker_gender = Gender::parse(field(3)).ok_or_else(|| AudioError::MalformedRow {
            line,
            reason: format!("gender {:?} not one of female/male/unspecified", field(3)),
        })?;
        let sentence_id = match field(4) {
            "" => None,
            s => {
                let id: u32 = s.parse().map_err(|_| AudioError::MalformedRow {
                    line,
                    reason: format!("sentence_id {s:?} is not an integer"),
                })?;
                if !(1..=5).contains(&id) {
                    return Err(AudioError::MalformedRow {
                        line,
                        reason: format!("sentence_id {id} outside 1..=5"),
                    });
                }
                Some(id)
            }
        };
        records.push(SpeakerRecord {
            clip_id,
            audio_path: field(1).to_string(),
            transcript_path: match field(2) {
                "" => None,
                p => Some(p.to_string()),
            },
            speaker_gender,
            sentence_id,
        });
    }
    Ok(records)
}
