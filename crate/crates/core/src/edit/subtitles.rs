//! Subtitle chunking and timing over narration spans.

use crate::media::SubtitleCue;
use crate::model::EditPlan;
use crate::time::{TimeRange, Timestamp};

pub const LINE_WIDTH: usize = 42;
pub const MAX_LINES: usize = 2;

const CLAUSE_END: &[char] = &[',', ';', ':', '.', '!', '?'];

/// Splits after clause punctuation.
pub fn clauses(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        cur.push(c);
        if CLAUSE_END.contains(&c) {
            let t = cur.trim();
            if !t.is_empty() {
                out.push(t.to_string());
            }
            cur.clear();
        }
    }
    let t = cur.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
    out
}

/// Greedy word wrap into at most two lines of 42 characters.
pub fn wrap(chunk: &str) -> Option<Vec<String>> {
    let mut lines: Vec<String> = Vec::new();
    for word in chunk.split_whitespace() {
        if word.chars().count() > LINE_WIDTH {
            return None;
        }
        match lines.last_mut() {
            Some(line) if line.chars().count() + 1 + word.chars().count() <= LINE_WIDTH => {
                line.push(' ');
                line.push_str(word);
            }
            _ => lines.push(word.to_string()),
        }
    }
    (lines.len() <= MAX_LINES && !lines.is_empty()).then_some(lines)
}

/// Splits at the space nearest the middle; ties go to the earlier space.
fn halve(chunk: &str) -> (String, String) {
    let chars: Vec<char> = chunk.chars().collect();
    let mid = chars.len() / 2;
    let split = chars
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_whitespace())
        .map(|(i, _)| i)
        .min_by_key(|i| (i.abs_diff(mid), *i))
        .unwrap_or(mid.max(1));
    let left: String = chars[..split].iter().collect();
    let right: String = chars[split..].iter().collect();
    (left.trim().to_string(), right.trim().to_string())
}

/// Cue texts for `text`, each at most two lines of 42 characters.
pub fn chunk(text: &str) -> Vec<String> {
    fn fit(piece: &str, out: &mut Vec<String>) {
        if piece.is_empty() {
            return;
        }
        if let Some(lines) = wrap(piece) {
            out.push(lines.join("\n"));
            return;
        }
        let (l, r) = halve(piece);
        fit(&l, out);
        fit(&r, out);
    }
    let mut out = Vec::new();
    for c in clauses(text) {
        fit(&c, &mut out);
    }
    out
}

/// Splits `span` among `chunks` in proportion to their character counts.
/// The last cue ends exactly at the span end.
pub fn allocate(span: TimeRange, chunks: &[String]) -> Vec<SubtitleCue> {
    let weights: Vec<u64> = chunks.iter().map(|c| c.chars().filter(|c| *c != '\n').count() as u64).collect();
    let total: u64 = weights.iter().sum();
    if total == 0 {
        return Vec::new();
    }
    let len = span.len().as_millis();
    let mut acc = 0u64;
    let mut start = span.start;
    let mut cues = Vec::new();
    for (c, w) in chunks.iter().zip(&weights) {
        acc += w;
        let end = span.start + Timestamp::from_millis(len * acc / total);
        if end > start {
            cues.push(SubtitleCue {
                range: TimeRange { start, end },
                text: c.clone(),
            });
        }
        start = end;
    }
    cues
}

/// Cues for every audible narration span in the plan, in timeline order.
pub fn generate_subtitles(plan: &EditPlan) -> Vec<SubtitleCue> {
    let spans = plan.narration_spans();
    let mut cues = Vec::new();
    for (id, span) in spans {
        if let Some(n) = plan.narration.iter().find(|n| n.narration_id == id) {
            cues.extend(allocate(span, &chunk(&n.text)));
        }
    }
    cues
}
