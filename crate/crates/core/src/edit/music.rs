use std::collections::BTreeSet;

use serde::Deserialize;

use super::adapters::{MusicManifest, MusicTrack};
use super::storyboard::Storyboard;
use crate::gateway::{Gateway, ModelRequest, PromptKind};

#[derive(Debug, Deserialize)]
struct KeywordAnswer {
    keywords: Vec<String>,
}

/// Search keywords for the storyboard's tones. The model may expand them;
/// without it, the tone labels themselves are used.
pub fn music_keywords(storyboard: &Storyboard, gateway: Option<&Gateway>) -> BTreeSet<String> {
    let mut keywords: BTreeSet<String> = storyboard.tones().iter().map(|t| t.to_lowercase()).collect();
    if let Some(gateway) = gateway {
        let tones: String = storyboard.tones().iter().map(|t| format!("- {t}\n")).collect();
        let request = ModelRequest::new(PromptKind::MusicSelect).block("tones", tones);
        if let Ok((extra, _)) = gateway.complete_json(&request, |a: KeywordAnswer, _| Ok(a.keywords)) {
            keywords.extend(extra.iter().map(|k| k.trim().to_lowercase()).filter(|k| !k.is_empty()));
        }
    }
    keywords
}

/// Track sharing the most keywords; ties go to the smaller track id. `None`
/// when nothing matches.
pub fn select_music<'m>(manifest: &'m MusicManifest, keywords: &BTreeSet<String>) -> Option<&'m MusicTrack> {
    manifest
        .tracks
        .iter()
        .map(|t| {
            let hits = t.keywords.iter().filter(|k| keywords.contains(&k.to_lowercase())).count();
            (t, hits)
        })
        .filter(|(_, hits)| *hits > 0)
        .max_by(|(a, ha), (b, hb)| ha.cmp(hb).then_with(|| b.track_id.cmp(&a.track_id)))
        .map(|(t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(id: &str, kw: &[&str]) -> MusicTrack {
        MusicTrack {
            track_id: id.into(),
            uri: format!("lib/{id}"),
            keywords: kw.iter().map(|k| k.to_string()).collect(),
        }
    }

    #[test]
    fn best_keyword_overlap_wins() {
        let m = MusicManifest {
            tracks: vec![track("b", &["tense"]), track("a", &["tense"]), track("c", &["somber", "tense"])],
        };
        let kw: BTreeSet<String> = ["somber", "tense"].iter().map(|s| s.to_string()).collect();
        assert_eq!(select_music(&m, &kw).unwrap().track_id, "c");
        let kw: BTreeSet<String> = ["tense".to_string()].into();
        assert_eq!(select_music(&m, &kw).unwrap().track_id, "a");
        let kw: BTreeSet<String> = ["joyful".to_string()].into();
        assert!(select_music(&m, &kw).is_none());
    }
}
