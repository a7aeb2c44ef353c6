//! Speech synthesis, transcription and beat detection contracts, with
//! deterministic implementations for offline runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::synthetic::SyntheticMedia;
use crate::time::{TimeRange, Timestamp};
use crate::validate::{Validate, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthesizedAudio {
    pub bytes: Vec<u8>,
    pub ext: String,
    pub duration: Timestamp,
}

pub trait Synthesizer: Send + Sync {
    fn synthesize(&self, text: &str, voice: &str) -> Result<SynthesizedAudio>;
}

/// Emits a synthetic audio container whose length follows the word count.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticSynthesizer {
    pub ms_per_word: u64,
}

impl Default for SyntheticSynthesizer {
    fn default() -> Self {
        Self { ms_per_word: 380 }
    }
}

impl Synthesizer for SyntheticSynthesizer {
    fn synthesize(&self, text: &str, _voice: &str) -> Result<SynthesizedAudio> {
        let words = text.split_whitespace().count() as u64;
        if words == 0 {
            return Err(Error::Precondition("cannot synthesize empty text".into()));
        }
        let duration = Timestamp::from_millis(words * self.ms_per_word);
        Ok(SynthesizedAudio {
            bytes: SyntheticMedia::audio(duration).to_bytes(),
            ext: "json".into(),
            duration,
        })
    }
}

/// Writes silent 16 kHz mono PCM WAV of the estimated speech length, for
/// engines that need real audio.
#[derive(Debug, Clone, Copy)]
pub struct SilentWavSynthesizer {
    pub ms_per_word: u64,
}

impl Default for SilentWavSynthesizer {
    fn default() -> Self {
        Self { ms_per_word: 380 }
    }
}

impl Synthesizer for SilentWavSynthesizer {
    fn synthesize(&self, text: &str, _voice: &str) -> Result<SynthesizedAudio> {
        const RATE: u32 = 16_000;
        let words = text.split_whitespace().count() as u64;
        if words == 0 {
            return Err(Error::Precondition("cannot synthesize empty text".into()));
        }
        let duration = Timestamp::from_millis(words * self.ms_per_word);
        let samples = (duration.as_millis() * u64::from(RATE) / 1000) as u32;
        let data_len = samples * 2;
        let mut bytes = Vec::with_capacity(44 + data_len as usize);
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36 + data_len).to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&RATE.to_le_bytes());
        bytes.extend_from_slice(&(RATE * 2).to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&data_len.to_le_bytes());
        bytes.resize(44 + data_len as usize, 0);
        Ok(SynthesizedAudio {
            bytes,
            ext: "wav".into(),
            duration,
        })
    }
}

/// A spoken word in source time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct WordSpan {
    pub word: String,
    pub start: Timestamp,
    pub end: Timestamp,
}

impl WordSpan {
    pub fn range(&self) -> TimeRange {
        TimeRange {
            start: self.start,
            end: self.end,
        }
    }
}

pub trait Transcriber: Send + Sync {
    /// Word spans overlapping `range`, or `None` when the asset has no transcript.
    fn transcribe(&self, asset_id: &str, range: TimeRange) -> Result<Option<Vec<WordSpan>>>;
}

fn overlapping(words: &[WordSpan], range: TimeRange) -> Vec<WordSpan> {
    words
        .iter()
        .filter(|w| w.start < range.end && range.start < w.end)
        .cloned()
        .collect()
}

/// Reads `<dir>/<asset_id>.json`, a JSON array of word spans.
#[derive(Debug, Clone)]
pub struct FixtureTranscriber {
    pub dir: PathBuf,
}

impl Transcriber for FixtureTranscriber {
    fn transcribe(&self, asset_id: &str, range: TimeRange) -> Result<Option<Vec<WordSpan>>> {
        let path = self.dir.join(format!("{asset_id}.json"));
        if !path.exists() {
            return Ok(None);
        }
        let bytes = std::fs::read(&path)?;
        let words: Vec<WordSpan> = crate::canonical::from_json_bytes(&bytes)?;
        Ok(Some(overlapping(&words, range)))
    }
}

/// In-memory transcripts keyed by asset id.
#[derive(Debug, Clone, Default)]
pub struct StaticTranscriber {
    pub transcripts: BTreeMap<String, Vec<WordSpan>>,
}

impl Transcriber for StaticTranscriber {
    fn transcribe(&self, asset_id: &str, range: TimeRange) -> Result<Option<Vec<WordSpan>>> {
        Ok(self.transcripts.get(asset_id).map(|w| overlapping(w, range)))
    }
}

/// Regular speech: a `word_ms` word every `word_ms + gap_ms`, for every asset.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticTranscriber {
    pub word_ms: u64,
    pub gap_ms: u64,
}

impl Default for SyntheticTranscriber {
    fn default() -> Self {
        Self {
            word_ms: 360,
            gap_ms: 240,
        }
    }
}

impl Transcriber for SyntheticTranscriber {
    fn transcribe(&self, _asset_id: &str, range: TimeRange) -> Result<Option<Vec<WordSpan>>> {
        let period = self.word_ms + self.gap_ms;
        let first = range.start.as_millis() / period;
        let last = range.end.as_millis().div_ceil(period);
        Ok(Some(
            (first..=last)
                .map(|k| WordSpan {
                    word: format!("w{k}"),
                    start: Timestamp::from_millis(k * period),
                    end: Timestamp::from_millis(k * period + self.word_ms),
                })
                .filter(|w| w.start < range.end && range.start < w.end)
                .collect(),
        ))
    }
}

/// Beat timestamps on the output timeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct BeatGrid {
    pub beats: Vec<Timestamp>,
    pub track: String,
}

impl Validate for BeatGrid {
    fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        if self.beats.windows(2).any(|w| w[0] >= w[1]) {
            r.push("beats", "beat timestamps must strictly increase");
        }
        r
    }
}

pub trait BeatDetector: Send + Sync {
    fn beats(&self, track: &Path) -> Result<BeatGrid>;
}

/// Reads a `<track>.beats.json` sidecar holding a [`BeatGrid`].
#[derive(Debug, Clone, Copy, Default)]
pub struct FixtureBeatDetector;

impl BeatDetector for FixtureBeatDetector {
    fn beats(&self, track: &Path) -> Result<BeatGrid> {
        let mut sidecar = track.as_os_str().to_owned();
        sidecar.push(".beats.json");
        let bytes = std::fs::read(PathBuf::from(sidecar))?;
        let grid: BeatGrid = crate::canonical::from_json_bytes(&bytes)?;
        grid.validate().into_result()?;
        Ok(grid)
    }
}

/// Fixed tempo over a synthetic track's duration.
#[derive(Debug, Clone, Copy)]
pub struct MetronomeBeatDetector {
    pub bpm: u64,
}

impl BeatDetector for MetronomeBeatDetector {
    fn beats(&self, track: &Path) -> Result<BeatGrid> {
        let bytes = std::fs::read(track)?;
        let media = SyntheticMedia::parse(&bytes).ok_or_else(|| Error::MediaProbe {
            uri: track.display().to_string(),
            reason: "not a synthetic audio track".into(),
        })?;
        let period = 60_000 / self.bpm.max(1);
        let beats = (1..)
            .map(|k| Timestamp::from_millis(k * period))
            .take_while(|t| *t < media.duration)
            .collect();
        Ok(BeatGrid {
            beats,
            track: track.display().to_string(),
        })
    }
}

/// One entry in a local music library.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct MusicTrack {
    pub track_id: String,
    /// Object-store uri of the audio.
    pub uri: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct MusicManifest {
    pub tracks: Vec<MusicTrack>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_transcriber_returns_overlapping_words() {
        let t = SyntheticTranscriber::default();
        let words = t.transcribe("a", TimeRange::millis(700, 1400)).unwrap().unwrap();
        let starts: Vec<u64> = words.iter().map(|w| w.start.as_millis()).collect();
        assert_eq!(starts, [600, 1200]);
    }

    #[test]
    fn wav_header_matches_length() {
        let a = SilentWavSynthesizer::default().synthesize("one two", "v").unwrap();
        assert_eq!(&a.bytes[..4], b"RIFF");
        // 760 ms at 16 kHz, 2 bytes per sample.
        assert_eq!(a.bytes.len(), 44 + 760 * 16 * 2);
    }

    #[test]
    fn synthesizer_duration_follows_words() {
        let a = SyntheticSynthesizer::default().synthesize("one two three", "v").unwrap();
        assert_eq!(a.duration, Timestamp::from_millis(1140));
        assert_eq!(SyntheticMedia::parse(&a.bytes).unwrap().duration, a.duration);
    }
}
