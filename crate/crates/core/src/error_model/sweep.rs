use super::inject::{inject_corpus, NoiseConfig};
use crate::text::Corpus;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub noise_ratio: f64,
    pub cer: f64,
}

/// CER measured at each noise ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweep {
    pub rows: Vec<SweepRow>,
}

impl NoiseSweep {
    /// True when CER never drops as the ratio grows (rows in input order).
    pub fn is_non_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].cer >= w[0].cer)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("noise_ratio\tcer\n");
        for row in &self.rows {
            out.push_str(&format!("{}\t{:.6}\n", row.noise_ratio, row.cer));
        }
        out
    }
}

/// Injects `gold_lines` once per ratio, all with `base`'s seed, and scores
/// each injected corpus with `evaluator`.
pub fn noise_sweep<S, F>(gold_lines: &[S], base: &NoiseConfig, ratios: &[f64], mut evaluator: F) -> Result<NoiseSweep>
where
    S: AsRef<str> + Sync,
    F: FnMut(&Corpus) -> Result<f64>,
{
    if ratios.is_empty() {
        return Err(Error::argument("noise sweep needs at least one ratio"));
    }
    let mut rows = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let config = base.clone().with_noise_ratio(ratio);
        config.validate()?;
        let (corpus, _) = inject_corpus(gold_lines, &config)?;
        rows.push(SweepRow {
            noise_ratio: ratio,
            cer: evaluator(&corpus)?,
        });
    }
    Ok(NoiseSweep { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::raw_cer;
    use crate::text::CharFrequencyTable;

    fn lines() -> Vec<String> {
        (0..400).map(|i| format!("שורה מספר {i} בעיתון")).collect()
    }

    #[test]
    fn five_ratio_table() {
        let lines = lines();
        let base = NoiseConfig::new(0.2, CharFrequencyTable::build(&lines).unwrap()).unwrap();
        let ratios = [0.1, 0.2, 0.3, 0.4, 0.5];
        let sweep = noise_sweep(&lines, &base, &ratios, raw_cer).unwrap();
        assert_eq!(sweep.rows.len(), 5);
        assert_eq!(sweep.to_tsv().lines().count(), 6);
    }

    #[test]
    fn injected_noise_has_positive_cer() {
        let lines = lines();
        let base = NoiseConfig::new(0.2, CharFrequencyTable::build(&lines).unwrap()).unwrap();
        let sweep = noise_sweep(&lines, &base, &[0.2], raw_cer).unwrap();
        assert!(sweep.rows[0].cer > 0.0);
    }

    #[test]
    fn rejects_bad_ratio_lists() {
        let lines = lines();
        let base = NoiseConfig::new(0.2, CharFrequencyTable::build(&lines).unwrap()).unwrap();
        assert!(matches!(
            noise_sweep(&lines, &base, &[], raw_cer),
            Err(Error::Argument(_))
        ));
        assert!(noise_sweep(&lines, &base, &[0.2, 1.0], raw_cer).is_err());
    }
}
