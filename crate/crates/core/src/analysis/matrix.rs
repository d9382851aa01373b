use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{stepwise_gleu, AnalysisError, StepScore};
use crate::chain::ChainRun;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCell {
    pub mean: f64,
    pub count: usize,
}

/// Directed language-pair averages of step-by-step GLEU. Rows are
/// sources, columns targets; the diagonal is never populated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatrix {
    pub languages: Vec<String>,
    pub cells: BTreeMap<String, BTreeMap<String, PairCell>>,
    pub low_validity: bool,
}

impl PairMatrix {
    pub fn from_scores(scores: impl IntoIterator<Item = StepScore>, low_validity: bool) -> Self {
        let mut sums: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
        let mut languages = BTreeSet::new();
        for s in scores {
            if s.source == s.target {
                continue;
            }
            languages.insert(s.source.clone());
            languages.insert(s.target.clone());
            let e = sums.entry((s.source, s.target)).or_insert((0.0, 0));
            e.0 += s.score;
            e.1 += 1;
        }
        let mut cells: BTreeMap<String, BTreeMap<String, PairCell>> = BTreeMap::new();
        for ((src, tgt), (sum, count)) in sums {
            cells.entry(src).or_default().insert(
                tgt,
                PairCell {
                    mean: sum / count as f64,
                    count,
                },
            );
        }
        PairMatrix {
            languages: languages.into_iter().collect(),
            cells,
            low_validity,
        }
    }

    pub fn cell(&self, source: &str, target: &str) -> Option<PairCell> {
        self.cells.get(source)?.get(target).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Mean over the populated off-diagonal cells; `None` when there are
    /// none.
    pub fn mean(&self) -> Option<f64> {
        let values: Vec<f64> = self
            .cells
            .iter()
            .flat_map(|(src, row)| {
                row.iter()
                    .filter(move |(tgt, _)| *tgt != src)
                    .map(|(_, c)| c.mean)
            })
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Pool the step-by-step scores of all runs into one matrix.
pub fn pair_matrix(runs: &[ChainRun]) -> Result<PairMatrix, AnalysisError> {
    let mut all = Vec::new();
    let mut low_validity = false;
    for run in runs {
        let s = stepwise_gleu(run)?;
        low_validity |= s.low_validity;
        all.extend(s.entries);
    }
    Ok(PairMatrix::from_scores(all, low_validity))
}
