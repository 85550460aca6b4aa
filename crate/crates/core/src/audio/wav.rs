//! Minimal RIFF/WAVE decoder for the formats the analysis pipeline
//! accepts: PCM 16-bit, PCM 24-bit, and IEEE float 32-bit, one or two
//! channels. Stereo is averaged to mono during decode.

use super::{AudioClip, AudioError};

const FMT_PCM: u16 = 1;
const FMT_IEEE_FLOAT: u16 = 3;

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], AudioError> {
        if self.at + n > self.bytes.len() {
            return Err(AudioError::CorruptHeader(format!(
                "needed {n} bytes at offset {}, file has {}",
                self.at,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, AudioError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, AudioError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn tag(&mut self) -> Result<[u8; 4], AudioError> {
        let b = self.take(4)?;
        Ok([b[0], b[1], b[2], b[3]])
    }
}

struct Format {
    kind: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
    block_align: u16,
}

/// Decode a WAV byte buffer into a mono clip.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    let mut r = Reader { bytes, at: 0 };
    if &r.tag()? != b"RIFF" {
        return Err(AudioError::CorruptHeader("missing RIFF magic".into()));
    }
    // The RIFF size field is read but not trusted; chunk walking below
    // validates against the real buffer length.
    let _riff_size = r.u32()?;
    if &r.tag()? != b"WAVE" {
        return Err(AudioError::CorruptHeader("missing WAVE form type".into()));
    }

    let mut format: Option<Format> = None;
    loop {
        if r.at == bytes.len() {
            return Err(AudioError::CorruptHeader("no data chunk".into()));
        }
        let id = r.tag()?;
        let size = r.u32()? as usize;
        match &id {
            b"fmt " => {
                if size < 16 {
                    return Err(AudioError::CorruptHeader(format!("fmt chunk of {size} bytes")));
                }
                let start = r.at;
                let kind = r.u16()?;
                let channels = r.u16()?;
                let sample_rate = r.u32()?;
                let _byte_rate = r.u32()?;
                let block_align = r.u16()?;
                let bits = r.u16()?;
                // Skip any format extension.
                r.take(size - (r.at - start))?;
                format = Some(Format {
                    kind,
                    channels,
                    sample_rate,
                    bits,
                    block_align,
                });
            }
            b"data" => {
                let fmt = format
                    .as_ref()
                    .ok_or_else(|| AudioError::CorruptHeader("data before fmt".into()))?;
                let data = r.take(size)?;
                return decode_data(fmt, data);
            }
            _ => {
                // Unknown chunk; RIFF pads odd sizes to even offsets.
                r.take(size + (size & 1))?;
            }
        }
    }
}

fn decode_data(fmt: &Format, data: &[u8]) -> Result<AudioClip, AudioError> {
    if fmt.channels == 0 || fmt.channels > 2 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{} channels",
            fmt.channels
        )));
    }
    if fmt.sample_rate == 0 {
        return Err(AudioError::CorruptHeader("sample rate 0".into()));
    }
    let bytes_per_sample = match (fmt.kind, fmt.bits) {
        (FMT_PCM, 16) => 2usize,
        (FMT_PCM, 24) => 3,
        (FMT_IEEE_FLOAT, 32) => 4,
        (FMT_PCM, bits) => {
            return Err(AudioError::UnsupportedEncoding(format!("PCM {bits}-bit")))
        }
        (FMT_IEEE_FLOAT, bits) => {
            return Err(AudioError::UnsupportedEncoding(format!("float {bits}-bit")))
        }
        (kind, _) => {
            return Err(AudioError::UnsupportedEncoding(format!(
                "format tag {kind:#06x}"
            )))
        }
    };
    let frame_size = bytes_per_sample * fmt.channels as usize;
    if fmt.block_align as usize != frame_size {
        return Err(AudioError::CorruptHeader(format!(
            "block align {} for {}-byte frames",
            fmt.block_align, frame_size
        )));
    }
    if data.len() % frame_size != 0 {
        return Err(AudioError::CorruptHeader(format!(
            "data size {} not a whole number of {frame_size}-byte frames",
            data.len()
        )));
    }

    let frames = data.len() / frame_size;
    let mut samples = Vec::with_capacity(frames);
    for f in 0..frames {
        let mut acc = 0.0f64;
        for c in 0..fmt.channels as usize {
            let at = f * frame_size + c * bytes_per_sample;
            let v = match (fmt.kind, fmt.bits) {
                (FMT_PCM, 16) => {
                    i16::from_le_bytes([data[at], data[at + 1]]) as f64 / 32768.0
                }
                (FMT_PCM, 24) => {
                    let raw = (data[at] as i32)
                        | ((data[at + 1] as i32) << 8)
                        | ((data[at + 2] as i8 as i32) << 16);
                    raw as f64 / 8_388_608.0
                }
                (FMT_IEEE_FLOAT, 32) => {
                    let v = f32::from_le_bytes([
                        data[at],
                        data[at + 1],
                        data[at + 2],
                        data[at + 3],
                    ]);
                    if !v.is_finite() {
                        return Err(AudioError::CorruptHeader("non-finite float sample".into()));
                    }
                    (v as f64).clamp(-1.0, 1.0)
                }
                _ => unreachable!("validated above"),
            };
            acc += v;
        }
        samples.push((acc / fmt.channels as f64) as f32);
    }
    Ok(AudioClip {
        samples,
        sample_rate: fmt.sample_rate,
    })
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn one_second_of_silence() {
        let frames = vec![vec![0i16]; 16_000];
        let clip = decode_wav(&wav_pcm16(16_000, 1, &frames)).unwrap();
        assert_eq!(clip.samples.len(), 16_000);
        assert_eq!(clip.sample_rate, 16_000);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn symmetric_stereo_averages_to_zero() {
        let half = (0.5f64 * 32768.0) as i16;
        let frames = vec![vec![half, -half]; 100];
        let clip = decode_wav(&wav_pcm16(8_000, 2, &frames)).unwrap();
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn sine_round_trip_within_one_lsb() {
        let rate = 16_000u32;
        let n = 1600;
        let wave: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / rate as f64).sin() * 0.8)
            .collect();
        let frames: Vec<Vec<i16>> = wave
            .iter()
            .map(|&v| vec![(v * 32767.0).round() as i16])
            .collect();
        let clip = decode_wav(&wav_pcm16(rate, 1, &frames)).unwrap();
        for (decoded, original) in clip.samples.iter().zip(&wave) {
            assert!((*decoded as f64 - original).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn pcm24_scaling() {
        let frames = vec![vec![4_194_304i32], vec![-8_388_608], vec![0]];
        let clip = decode_wav(&wav_pcm24(44_100, 1, &frames)).unwrap();
        assert!((clip.samples[0] - 0.5).abs() < 1e-6);
        assert!((clip.samples[1] + 1.0).abs() < 1e-6);
        assert_eq!(clip.samples[2], 0.0);
    }

    #[test]
    fn float32_passthrough_and_clamp() {
        let frames = vec![vec![0.25f32], vec![-0.75], vec![1.5]];
        let clip = decode_wav(&wav_f32(22_050, 1, &frames)).unwrap();
        assert_eq!(clip.samples[0], 0.25);
        assert_eq!(clip.samples[1], -0.75);
        assert_eq!(clip.samples[2], 1.0);

        let nan = vec![vec![f32::NAN]];
        assert!(matches!(
            decode_wav(&wav_f32(22_050, 1, &nan)),
            Err(AudioError::CorruptHeader(_))
        ));
    }

    #[test]
    fn decode_is_deterministic() {
        let frames: Vec<Vec<i16>> = (0..500).map(|i| vec![(i * 37 % 1000) as i16]).collect();
        let bytes = wav_pcm16(8_000, 1, &frames);
        assert_eq!(decode_wav(&bytes).unwrap().samples, decode_wav(&bytes).unwrap().samples);
    }

    #[test]
    fn corrupt_and_unsupported_inputs() {
        assert!(matches!(
            decode_wav(b"not a riff file"),
            Err(AudioError::CorruptHeader(_))
        ));
        assert!(matches!(decode_wav(b"RIFF"), Err(AudioError::CorruptHeader(_))));

        // Declared data bigger than the file.
        let mut bytes = wav_pcm16(8_000, 1, &vec![vec![1i16]; 4]);
        let len = bytes.len();
        bytes.truncate(len - 4);
        assert!(matches!(decode_wav(&bytes), Err(AudioError::CorruptHeader(_))));

        // Unsupported: 8-bit PCM.
        let mut h = header(8_000, 1, 1, 8, 2);
        h.extend_from_slice(&[0, 0]);
        assert!(matches!(decode_wav(&h), Err(AudioError::UnsupportedEncoding(_))));

        // Unsupported: three channels.
        let mut h = header(8_000, 3, 1, 16, 6);
        h.extend_from_slice(&[0; 6]);
        assert!(matches!(decode_wav(&h), Err(AudioError::UnsupportedEncoding(_))));

        // Compressed format tag.
        let mut h = header(8_000, 1, 85, 16, 0);
        h.truncate(h.len());
        assert!(matches!(decode_wav(&h), Err(AudioError::UnsupportedEncoding(_))));
    }

    #[test]
    fn skips_unknown_chunks() {
        // LIST chunk between fmt and data.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&54u32.to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        for v in [1u16, 1] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&16000u32.to_le_bytes());
        for v in [2u16, 16] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 0]); // padded to even
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&1000i16.to_le_bytes());
        let clip = decode_wav(&bytes).unwrap();
        assert_eq!(clip.samples.len(), 1);
    }
}
