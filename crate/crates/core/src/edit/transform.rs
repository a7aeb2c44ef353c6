//! Pure transformations over a compiled edit plan.

use std::collections::BTreeMap;

use super::adapters::{BeatGrid, WordSpan};
use crate::model::{EditPlan, RenderingMode};
use crate::time::{TimeRange, Timestamp};

/// Shortest clip a cut adjustment may leave behind.
pub const MIN_CLIP: Timestamp = Timestamp::from_millis(500);

/// Nearest beat within `window` of `t` (inclusive); ties go to the earlier beat.
pub fn nearest_beat(beats: &[Timestamp], t: Timestamp, window: Timestamp) -> Option<Timestamp> {
    let i = beats.partition_point(|b| *b < t);
    let before = i.checked_sub(1).map(|j| beats[j]);
    let after = beats.get(i).copied();
    let best = match (before, after) {
        (Some(b), Some(a)) => {
            if t.abs_diff(b) <= a.abs_diff(t) {
                b
            } else {
                a
            }
        }
        (Some(b), None) => b,
        (None, Some(a)) => a,
        (None, None) => return None,
    };
    (best.abs_diff(t) <= window).then_some(best)
}

fn inside_any(spans: &[(String, TimeRange)], t: Timestamp) -> bool {
    spans.iter().any(|(_, r)| r.strictly_contains(t))
}

/// Moves the cut after entry `k` onto a nearby beat, if allowed.
fn try_snap(plan: &EditPlan, k: usize, grid: &BeatGrid, window: Timestamp) -> Option<EditPlan> {
    let cut = plan.output_ranges()[k].end;
    let beat = nearest_beat(&grid.beats, cut, window)?;
    if beat == cut {
        return None;
    }
    let (a, b) = (&plan.entries[k], &plan.entries[k + 1]);
    if a.rendering_mode == RenderingMode::Untrimmed || b.rendering_mode == RenderingMode::Untrimmed {
        return None;
    }
    let old_spans = plan.narration_spans();
    if inside_any(&old_spans, cut) || inside_any(&old_spans, beat) {
        return None;
    }
    let mut next = plan.clone();
    if beat > cut {
        let d = beat - cut;
        let limit = plan.source_duration(&a.asset_id)?;
        if a.source.end + d > limit || b.source.len() < MIN_CLIP + d {
            return None;
        }
        next.entries[k].source.end = a.source.end + d;
        next.entries[k + 1].source.start = b.source.start + d;
    } else {
        let d = cut - beat;
        if a.source.len() < MIN_CLIP + d || b.source.start < d {
            return None;
        }
        next.entries[k].source.end = a.source.end - d;
        next.entries[k + 1].source.start = b.source.start - d;
    }
    // Narration spans follow their clips; no cut may end up inside one.
    let new_spans = next.narration_spans();
    let old_cuts = plan.cut_points();
    let crossed = next
        .cut_points()
        .iter()
        .zip(&old_cuts)
        .any(|(new, old)| inside_any(&new_spans, *new) && !inside_any(&old_spans, *old));
    if crossed {
        return None;
    }
    Some(next)
}

/// Snaps cuts that fall outside narration onto the beat grid.
///
/// Each move shifts the boundary between two consecutive entries, so entry
/// count, order and total length are preserved. Moves are repeated until none
/// applies, which makes the transform idempotent.
pub fn beat_align(plan: &EditPlan, grid: &BeatGrid, window: Timestamp) -> EditPlan {
    let mut current = plan.clone();
    let bound = current.entries.len() * (grid.beats.len() + 1) + 1;
    for _ in 0..bound {
        let mut moved = false;
        for k in 0..current.entries.len().saturating_sub(1) {
            if let Some(next) = try_snap(&current, k, grid, window) {
                current = next;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    current
}

fn word_at(words: &[WordSpan], t: Timestamp) -> Option<&WordSpan> {
    words.iter().find(|w| w.range().strictly_contains(t))
}

/// Pushes clip boundaries out of spoken words: an end cut inside a word moves
/// to the word end plus `pad`, a start cut to the word start minus `pad`.
///
/// `transcripts` maps asset id to word spans. Assets without one are left
/// untouched and reported in the returned warnings.
pub fn micro_cut_refine(
    plan: &EditPlan,
    transcripts: &BTreeMap<String, Vec<WordSpan>>,
    pad: Timestamp,
) -> (EditPlan, Vec<String>) {
    let mut out = plan.clone();
    let mut warnings = Vec::new();
    for entry in &mut out.entries {
        let Some(words) = transcripts.get(&entry.asset_id) else {
            let w = format!("no transcript for asset {}; cuts left as is", entry.asset_id);
            if !warnings.contains(&w) {
                warnings.push(w);
            }
            continue;
        };
        let limit = plan.source_duration(&entry.asset_id).unwrap_or(entry.source.end);
        while let Some(w) = word_at(words, entry.source.end) {
            let moved = (w.end + pad).min(limit);
            if moved <= entry.source.end {
                break;
            }
            entry.source.end = moved;
        }
        while let Some(w) = word_at(words, entry.source.start) {
            let moved = w.start.saturating_sub(pad);
            if moved >= entry.source.start {
                break;
            }
            entry.source.start = moved;
        }
    }
    (out, warnings)
}

/// Reframing slot. Plans pass through unchanged until a cropper exists.
pub fn dynamic_crop(plan: &EditPlan) -> EditPlan {
    plan.clone()
}
