//! WAV ingestion: decoding, mono normalization, analysis-window
//! trimming, and the session manifest.

pub mod manifest;
pub mod wav;

pub use manifest::{load_manifest, parse_manifest, Gender, SpeakerRecord};
pub use wav::decode_wav;

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("file not found: {0}")]
    FileMissing(PathBuf),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("duplicate clip_id {0:?}")]
    DuplicateClipId(String),
    #[error("malformed manifest row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mono sample buffer in full-scale units, `|sample| <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Read and decode a WAV file to a mono clip.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            AudioError::FileMissing(path.to_path_buf())
        } else {
            AudioError::Io(e)
        }
    })?;
    decode_wav(&bytes)
}

/// First `seconds` of the clip; clips shorter than the window are
/// returned whole. `seconds` must be positive.
pub fn trim_prefix(clip: &AudioClip, seconds: f64) -> AudioClip {
    assert!(seconds > 0.0, "trim window must be positive");
    let keep = ((seconds * clip.sample_rate as f64) as usize).min(clip.samples.len());
    AudioClip {
        samples: clip.samples[..keep].to_vec(),
        sample_rate: clip.sample_rate,
    }
}

/// The paper's analysis window: the opening of the conversation.
pub const DEFAULT_TRIM_SECONDS: f64 = 5.0;
