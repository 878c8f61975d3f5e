//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain strings and returns a JSON document, so the page
//! needs no generated TypeScript types.

use ocrsynth::align::{align, DelimiterSet, EditOp};
use ocrsynth::error_model::{inject_lines, ErrorProfile, InjectionStats, NoiseConfig};
use ocrsynth::metrics::evaluate_corrector;
use ocrsynth::text::{normalize_line, CharFrequencyTable};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn lines(text: &str) -> Vec<String> {
    text.lines().map(normalize_line).collect()
}

/// Corrupts every non-empty line of `text`.
pub fn inject_json(text: &str, noise_ratio: f64, seed: u64, period_profile: bool) -> ocrsynth::Result<Value> {
    let gold: Vec<String> = lines(text).into_iter().filter(|l| !l.is_empty()).collect();
    let table = CharFrequencyTable::build(&gold)?;
    let mut config = NoiseConfig::new(noise_ratio, table)?.with_seed(seed);
    if period_profile {
        config = config.with_profile(ErrorProfile::hebrew_newspapers());
    }
    let injected = inject_lines(&gold, 0, &config)?;
    let mut stats = InjectionStats::default();
    let rows: Vec<Value> = gold
        .iter()
        .zip(&injected)
        .map(|(g, line)| {
            stats.record(&line.events);
            json!({
                "gold": g,
                "noisy": line.text,
                "deleted": line.events.deleted,
                "inserted": line.events.inserted,
                "swaps": line.events.swaps,
                "replacements": line.events.replacements,
            })
        })
        .collect();
    Ok(json!({
        "lines": rows,
        "deletion_rate": stats.deletion_rate(),
        "insertion_rate": stats.insertion_rate(),
        "swap_rate": stats.swap_rate(),
        "replacements_per_line": stats.replacement_rate(),
    }))
}

/// Character alignment of one line pair, column by column.
pub fn align_json(gold: &str, other: &str) -> Value {
    let a = align(&normalize_line(gold), &normalize_line(other));
    let columns: Vec<Value> = a
        .ops
        .iter()
        .map(|op| {
            let kind = match op {
                EditOp::Match(_) => "match",
                EditOp::Substitute { .. } => "substitute",
                EditOp::Insert(_) => "insert",
                EditOp::Delete(_) => "delete",
            };
            json!({
                "op": kind,
                "gold": op.gold_char().map(String::from).unwrap_or_default(),
                "other": op.other_char().map(String::from).unwrap_or_default(),
            })
        })
        .collect();
    json!({ "distance": a.edit_count(), "columns": columns, "compact": a.to_compact() })
}

/// Acc_Char, WER and CER of `fixed` against `gold`, relative to `ocred`.
pub fn evaluate_json(gold: &str, ocred: &str, fixed: &str) -> ocrsynth::Result<Value> {
    let (g, o, f) = (lines(gold), lines(ocred), lines(fixed));
    if g.len() != o.len() || g.len() != f.len() {
        return Err(ocrsynth::Error::Argument(format!(
            "line count mismatch: gold {}, ocred {}, fixed {}",
            g.len(),
            o.len(),
            f.len()
        )));
    }
    let e = evaluate_corrector(&g, &o, &f, &DelimiterSet::default())?;
    Ok(json!({
        "acc_char": e.acc_char,
        "wer": e.wer,
        "cer": e.cer,
        "table": e.to_table("corrector"),
    }))
}

fn js(r: ocrsynth::Result<Value>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn inject(text: &str, noise_ratio: f64, seed: u32, period_profile: bool) -> Result<String, JsError> {
    js(inject_json(text, noise_ratio, u64::from(seed), period_profile))
}

#[wasm_bindgen(js_name = alignLines)]
pub fn align_lines(gold: &str, other: &str) -> String {
    align_json(gold, other).to_string()
}

#[wasm_bindgen]
pub fn evaluate(gold: &str, ocred: &str, fixed: &str) -> Result<String, JsError> {
    js(evaluate_json(gold, ocred, fixed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inject_keeps_gold_and_is_seeded() {
        let text = "שלום עולם\nספר הבית\n\nילד גדול";
        let a = inject_json(text, 0.5, 3, true).unwrap();
        assert_eq!(a, inject_json(text, 0.5, 3, true).unwrap());
        assert_eq!(a["lines"].as_array().unwrap().len(), 3);
        assert_eq!(a["lines"][1]["gold"], "ספר הבית");
        assert!(inject_json(text, 1.5, 3, false).is_err());
    }

    #[test]
    fn align_reports_columns() {
        let v = align_json("kitten", "sitting");
        assert_eq!(v["distance"], 3);
        assert_eq!(v["columns"][0]["op"], "substitute");
        assert_eq!(v["columns"].as_array().unwrap().len(), 7);
    }

    #[test]
    fn evaluate_perfect_fix() {
        let v = evaluate_json("the cat\nsat", "tha cat\nsat", "the cat\nsat").unwrap();
        assert_eq!(v["acc_char"], 100.0);
        assert_eq!(v["wer"], 0.0);
        assert!(evaluate_json("a\nb", "a", "a\nb").is_err());
    }
}
