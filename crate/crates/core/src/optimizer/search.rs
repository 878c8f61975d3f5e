use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::space::{Config, HyperParamSpace};
use crate::{Error, Result};

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Name of the parameter being optimized, or `grid`.
    pub stage: String,
    pub config: Config,
    /// Validation accuracy in `[0, 1]`; negative infinity marks a failed
    /// trial (written as `null`).
    #[serde(serialize_with = "ser_score", deserialize_with = "de_score")]
    pub score: f64,
    /// Wall-clock seconds.
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn ser_score<S: Serializer>(score: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if score.is_finite() {
        s.serialize_some(score)
    } else {
        s.serialize_none()
    }
}

fn de_score<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.score == f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    pub best_config: Config,
    pub best_score: f64,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// Skip configurations whose fingerprint was already evaluated.
    pub cache: bool,
    /// Evaluate the values of a stage concurrently.
    pub parallel: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            cache: true,
            parallel: false,
        }
    }
}

fn run_trial<F>(stage: &str, config: Config, evaluate: &F) -> Result<TrialRecord>
where
    F: Fn(&Config) -> Result<f64> + Sync,
{
    let start = Instant::now();
    let outcome = evaluate(&config);
    let duration = start.elapsed().as_secs_f64();
    let (score, error) = match outcome {
        Ok(s) if (0.0..=1.0).contains(&s) => (s, None),
        Ok(s) => (f64::NEG_INFINITY, Some(format!("score {s} outside [0, 1]"))),
        Err(e @ Error::Protocol(_)) => return Err(e),
        Err(e) => (f64::NEG_INFINITY, Some(e.to_string())),
    };
    if let Some(msg) = &error {
        log::warn!("trial {config} failed: {msg}");
    }
    Ok(TrialRecord {
        stage: stage.to_string(),
        config,
        score,
        duration,
        error,
    })
}

fn run_all<F>(stage: &str, configs: Vec<Config>, evaluate: &F, parallel: bool) -> Result<Vec<TrialRecord>>
where
    F: Fn(&Config) -> Result<f64> + Sync,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return configs.into_par_iter().map(|c| run_trial(stage, c, evaluate)).collect();
    }
    let _ = parallel;
    configs.into_iter().map(|c| run_trial(stage, c, evaluate)).collect()
}

// First strictly greater score wins, so ties go to the earliest entry.
fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

fn stage_failure(stage: &str, records: &[&TrialRecord]) -> Error {
    let details: Vec<String> = records
        .iter()
        .map(|r| format!("{} ({})", r.config, r.error.as_deref().unwrap_or("failed")))
        .collect();
    Error::Evaluation(format!(
        "stage '{stage}': all {} values failed: {}",
        records.len(),
        details.join("; ")
    ))
}

/// Cost-ordered greedy search.
///
/// Parameters are optimized one at a time, most expensive first. Every value
/// of the current parameter is tried with earlier parameters fixed at their
/// chosen values and later ones at their defaults; the best value (earliest on
/// ties) is then frozen.
///
/// A trial whose evaluation fails scores negative infinity and cannot be
/// chosen. A stage in which every value fails aborts the search. Protocol
/// errors from an external evaluator abort immediately.
pub fn greedy_search<F>(space: &HyperParamSpace, evaluate: F, options: SearchOptions) -> Result<GreedyResult>
where
    F: Fn(&Config) -> Result<f64> + Sync,
{
    greedy_search_with(space, evaluate, options, &[], |_| Ok(()))
}

/// [`greedy_search`] seeded with trials from an earlier run and reporting
/// each newly evaluated trial to `observer` as soon as its stage finishes.
///
/// With caching on, prior trials are reused instead of re-evaluated and
/// appear in the returned trial list (relabeled with the current stage) the
/// first time they are needed.
pub fn greedy_search_with<F, O>(
    space: &HyperParamSpace,
    evaluate: F,
    options: SearchOptions,
    prior: &[TrialRecord],
    mut observer: O,
) -> Result<GreedyResult>
where
    F: Fn(&Config) -> Result<f64> + Sync,
    O: FnMut(&TrialRecord) -> Result<()>,
{
    let mut cache: HashMap<String, TrialRecord> = HashMap::new();
    if options.cache {
        for r in prior {
            cache.entry(r.config.fingerprint()).or_insert_with(|| r.clone());
        }
    }
    let mut listed: HashSet<String> = HashSet::new();
    let mut incumbent = space.default_config();
    let mut incumbent_score = f64::NEG_INFINITY;
    let mut trials = Vec::new();

    for param in space.params() {
        let stage = param.name.as_str();
        let configs: Vec<Config> = param
            .values()
            .iter()
            .map(|v| {
                let mut c = incumbent.clone();
                c.set(stage, v.clone());
                c
            })
            .collect();
        let fresh: Vec<Config> = configs
            .iter()
            .filter(|c| !(options.cache && cache.contains_key(&c.fingerprint())))
            .cloned()
            .collect();
        let mut fresh = run_all(stage, fresh, &evaluate, options.parallel)?.into_iter();

        let mut stage_records: Vec<TrialRecord> = Vec::with_capacity(configs.len());
        for config in &configs {
            let fp = config.fingerprint();
            let record = match cache.get(&fp).filter(|_| options.cache) {
                Some(hit) => {
                    if !listed.contains(&fp) {
                        let mut r = hit.clone();
                        r.stage = stage.to_string();
                        trials.push(r);
                        listed.insert(fp.clone());
                    }
                    hit.clone()
                }
                None => {
                    let r = fresh.next().expect("one fresh result per uncached config");
                    observer(&r)?;
                    trials.push(r.clone());
                    if options.cache {
                        cache.insert(fp.clone(), r.clone());
                        listed.insert(fp);
                    }
                    r
                }
            };
            stage_records.push(record);
        }

        let scores: Vec<f64> = stage_records.iter().map(|r| r.score).collect();
        let Some(best) = argmax(&scores) else {
            return Err(stage_failure(stage, &stage_records.iter().collect::<Vec<_>>()));
        };
        log::info!(
            "stage {stage}: chose {} (score {:.4})",
            param.values()[best],
            scores[best]
        );
        incumbent.set(stage, param.values()[best].clone());
        incumbent_score = scores[best];
    }

    Ok(GreedyResult {
        best_config: incumbent,
        best_score: incumbent_score,
        trials,
    })
}

/// Every configuration in the space, last parameter varying fastest.
pub fn grid_configs(space: &HyperParamSpace) -> Vec<Config> {
    let mut out = vec![Config::new()];
    for p in space.params() {
        out = out
            .into_iter()
            .flat_map(|c| {
                p.values().iter().map(move |v| {
                    let mut c = c.clone();
                    c.set(p.name.clone(), v.clone());
                    c
                })
            })
            .collect();
    }
    out
}

/// Exhaustive search, refused when the grid holds more than `cap`
/// configurations.
pub fn grid_search<F>(space: &HyperParamSpace, evaluate: F, cap: u64, options: SearchOptions) -> Result<GreedyResult>
where
    F: Fn(&Config) -> Result<f64> + Sync,
{
    let size = space.grid_size();
    match size {
        Some(n) if n <= cap => {}
        Some(n) => {
            return Err(Error::argument(format!(
                "grid of {n} configurations exceeds the cap of {cap}"
            )))
        }
        None => return Err(Error::argument("grid size overflows 64 bits")),
    }
    let trials = run_all("grid", grid_configs(space), &evaluate, options.parallel)?;
    let scores: Vec<f64> = trials.iter().map(|r| r.score).collect();
    let Some(best) = argmax(&scores) else {
        return Err(stage_failure("grid", &trials.iter().collect::<Vec<_>>()));
    };
    Ok(GreedyResult {
        best_config: trials[best].config.clone(),
        best_score: scores[best],
        trials,
    })
}

/// Reads a line-delimited trial log. A missing file is an empty log.
pub fn read_trial_log(path: &Path) -> Result<Vec<TrialRecord>> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| Error::structural(format!("{}:{}: bad trial record: {e}", path.display(), lineno + 1)))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_trial_record<W: Write>(out: &mut W, record: &TrialRecord) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")
}
