//! From recorded runs to curves, fits and pair matrices.
//!
//! Accuracy is measured only on reference-language texts. In the pivot
//! topology those are the even steps; in the direct topology every step
//! carries a side translation. Curve index `t` counts measurements, so a
//! 284-hop pivot chain yields `t = 0..=142`.

pub mod export;
mod fit;
mod matrix;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Topology;
use crate::chain::{word_count, ChainRun};
use crate::gleu::{extract_ngrams, score_bags, tokenize, DEFAULT_MAX_ORDER};

pub use fit::{ael, aggregate_curves, fit_ael, rmse, AelFit, CurveBand, ALPHA_MAX, ALPHA_MIN};
pub use matrix::{pair_matrix, PairCell, PairMatrix};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("curve `{0}` has no measured points")]
    EmptyCurve(String),
    #[error("no curves to aggregate")]
    NoCurves,
    #[error("no runs given")]
    NoRuns,
    #[error("{0}")]
    GridMismatch(String),
    #[error("run `{run}` hop {hop} should carry a reference-language measurement")]
    MissingMeasurement { run: String, hop: usize },
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: usize,
    pub value: f64,
}

/// Accuracy against the original text, pinned to 1 at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

impl AccuracyCurve {
    /// Build from measured `(t, value)` points, `t >= 1` and strictly
    /// increasing. The `t = 0` point is added.
    pub fn from_measurements(
        label: impl Into<String>,
        measured: impl IntoIterator<Item = (usize, f64)>,
    ) -> Result<Self, AnalysisError> {
        let mut points = vec![CurvePoint { t: 0, value: 1.0 }];
        for (t, value) in measured {
            let last = points.last().expect("origin").t;
            if t <= last {
                return Err(AnalysisError::InvalidCurve(format!(
                    "t must increase strictly from 1, got {t} after {last}"
                )));
            }
            if !value.is_finite() {
                return Err(AnalysisError::InvalidCurve(format!(
                    "value at t={t} is {value}"
                )));
            }
            points.push(CurvePoint { t, value });
        }
        Ok(AccuracyCurve {
            label: label.into(),
            points,
        })
    }

    /// Points after the pinned origin.
    pub fn measured(&self) -> &[CurvePoint] {
        &self.points[1..]
    }

    pub fn n(&self) -> usize {
        self.points.len() - 1
    }
}

/// Word counts of the reference-language texts of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeCurve {
    pub label: String,
    pub points: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeTrajectory {
    pub runs: Vec<SizeCurve>,
    pub mean: SizeCurve,
    /// Mean final size over mean initial size.
    pub final_ratio: f64,
}

/// Reference-language texts of a run in measurement order, as
/// `(hop index, text)`.
fn measurements(run: &ChainRun) -> Result<Vec<(usize, &str)>, AnalysisError> {
    let spec = run.spec();
    let mut out = Vec::new();
    for hop in &run.hops {
        let expected = spec.topology == Topology::Direct || hop.target == spec.reference;
        match (&hop.measurement_text, expected) {
            (Some(text), _) => out.push((hop.t, text.as_str())),
            (None, true) => {
                return Err(AnalysisError::MissingMeasurement {
                    run: run.run_id().to_string(),
                    hop: hop.t,
                })
            }
            (None, false) => {}
        }
    }
    Ok(out)
}

/// GLEU of each reference-language measurement against `initial`.
pub fn accumulated_gleu(run: &ChainRun, initial: &str) -> Result<AccuracyCurve, AnalysisError> {
    let reference =
        extract_ngrams(&tokenize(initial), DEFAULT_MAX_ORDER).expect("default order is valid");
    let measured = measurements(run)?
        .into_iter()
        .enumerate()
        .map(|(k, (_, text))| {
            let cand = extract_ngrams(&tokenize(text), DEFAULT_MAX_ORDER).expect("valid order");
            (k + 1, score_bags(&cand, &reference).value)
        });
    AccuracyCurve::from_measurements(run.run_id(), measured)
}

/// [`accumulated_gleu`] against the run's own measurement reference.
pub fn accumulated_gleu_of(run: &ChainRun) -> Result<AccuracyCurve, AnalysisError> {
    accumulated_gleu(run, &run.manifest.measurement_reference().body)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepScore {
    pub source: String,
    pub target: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseScores {
    pub entries: Vec<StepScore>,
    /// Scores compare texts in different languages (direct topology).
    pub low_validity: bool,
}

/// GLEU between adjacent comparable texts.
///
/// Pivot: consecutive reference-language texts, attributed to the pair
/// (previously visited language, newly visited language). The source text
/// counts as the first comparable text only when it is in the reference
/// language. Direct: each hop's raw input and output, attributed to the
/// hop's own pair.
pub fn stepwise_gleu(run: &ChainRun) -> Result<StepwiseScores, AnalysisError> {
    let spec = run.spec();
    let score = |later: &str, earlier: &str| {
        let a = extract_ngrams(&tokenize(later), DEFAULT_MAX_ORDER).expect("valid order");
        let b = extract_ngrams(&tokenize(earlier), DEFAULT_MAX_ORDER).expect("valid order");
        score_bags(&a, &b).value
    };
    match spec.topology {
        Topology::Direct => Ok(StepwiseScores {
            entries: run
                .hops
                .iter()
                .map(|h| StepScore {
                    source: h.source.clone(),
                    target: h.target.clone(),
                    score: score(&h.output_text, &h.input_text),
                })
                .collect(),
            low_validity: true,
        }),
        Topology::Pivot => {
            let mut previous: Option<(String, &str)> = (spec.origin == spec.reference)
                .then(|| (spec.reference.clone(), run.text().body.as_str()));
            let mut entries = Vec::new();
            for (hop_t, text) in measurements(run)? {
                let visited = run.hops[hop_t - 1].source.clone();
                if let Some((prev_lang, prev_text)) = previous.take() {
                    entries.push(StepScore {
                        source: prev_lang,
                        target: visited.clone(),
                        score: score(text, prev_text),
                    });
                }
                previous = Some((visited, text));
            }
            Ok(StepwiseScores {
                entries,
                low_validity: false,
            })
        }
    }
}

fn size_curve(run: &ChainRun) -> Result<SizeCurve, AnalysisError> {
    let mut points = vec![(0, run.text().initial_word_count as f64)];
    for (k, (_, text)) in measurements(run)?.into_iter().enumerate() {
        points.push((k + 1, word_count(text) as f64));
    }
    Ok(SizeCurve {
        label: run.run_id().to_string(),
        points,
    })
}

/// Word counts of the reference-language texts of each run plus their
/// pointwise mean. Runs must share one measurement grid.
pub fn size_trajectory(runs: &[ChainRun]) -> Result<SizeTrajectory, AnalysisError> {
    if runs.is_empty() {
        return Err(AnalysisError::NoRuns);
    }
    let curves = runs.iter().map(size_curve).collect::<Result<Vec<_>, _>>()?;
    let len = curves[0].points.len();
    if let Some(bad) = curves.iter().find(|c| c.points.len() != len) {
        return Err(AnalysisError::GridMismatch(format!(
            "`{}` has {} size points, `{}` has {}",
            curves[0].label,
            len,
            bad.label,
            bad.points.len()
        )));
    }
    let n = curves.len() as f64;
    let mean_points: Vec<(usize, f64)> = (0..len)
        .map(|i| {
            (
                curves[0].points[i].0,
                curves.iter().map(|c| c.points[i].1).sum::<f64>() / n,
            )
        })
        .collect();
    let initial = mean_points[0].1;
    let last = mean_points[len - 1].1;
    let final_ratio = if initial > 0.0 { last / initial } else { 1.0 };
    Ok(SizeTrajectory {
        runs: curves,
        mean: SizeCurve {
            label: "mean".into(),
            points: mean_points,
        },
        final_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_random_chain, Catalog, ChainBuilder};
    use crate::chain::{run_chain, HopRecord, RunManifest, RunStatus, SourceText};
    use crate::corpus::bundled_text;
    use crate::gleu::{gleu, TokenSequence};
    use crate::translate::{IdentityTranslator, Simulator, SimulatorParams, Translator};
    use std::sync::Arc;

    fn run_with(backend: &dyn Translator, hops: usize, seed: u64) -> ChainRun {
        let c = Catalog::bundled();
        let spec = build_random_chain(&c, hops, seed).unwrap();
        let m = RunManifest::new(
            format!("r{seed}"),
            spec,
            bundled_text("t3").unwrap(),
            backend.identity(),
        );
        let dir = tempfile::tempdir().unwrap();
        run_chain(dir.path(), m, backend, None).unwrap()
    }

    fn sim(seed: u64) -> Simulator {
        let c = Arc::new(Catalog::bundled());
        Simulator::new(SimulatorParams::defaults_for(&c, seed), c).unwrap()
    }

    #[test]
    fn zero_hop_curve() {
        let mut run = run_with(&IdentityTranslator, 1, 0);
        run.hops.clear();
        let curve = accumulated_gleu_of(&run).unwrap();
        assert_eq!(curve.points, vec![CurvePoint { t: 0, value: 1.0 }]);
    }

    #[test]
    fn identity_backend_keeps_everything_at_one() {
        let run = run_with(&IdentityTranslator, 10, 0);
        let curve = accumulated_gleu_of(&run).unwrap();
        assert_eq!(curve.n(), 5);
        assert!(curve.points.iter().all(|p| p.value == 1.0));
        let steps = stepwise_gleu(&run).unwrap();
        assert_eq!(steps.entries.len(), 5);
        assert!(steps.entries.iter().all(|s| s.score == 1.0));
        let sizes = size_trajectory(std::slice::from_ref(&run)).unwrap();
        assert!(sizes.mean.points.iter().all(|p| p.1 == 48.0));
        assert_eq!(sizes.final_ratio, 1.0);
    }

    #[test]
    fn curve_matches_hand_recomputation() {
        let run = run_with(&sim(4), 8, 2);
        let curve = accumulated_gleu_of(&run).unwrap();
        let original = tokenize(&run.text().body);
        let expected: Vec<f64> = run
            .hops
            .iter()
            .filter(|h| h.t % 2 == 0)
            .map(|h| gleu(&tokenize(&h.output_text), &original, 4).unwrap().value)
            .collect();
        let got: Vec<f64> = curve.measured().iter().map(|p| p.value).collect();
        assert_eq!(got, expected);
        assert_eq!(
            curve.measured().iter().map(|p| p.t).collect::<Vec<_>>(),
            [1, 2, 3, 4]
        );
    }

    #[test]
    fn stepwise_matches_hand_recomputation() {
        let run = run_with(&sim(4), 8, 2);
        let steps = stepwise_gleu(&run).unwrap();
        let texts: Vec<&str> = std::iter::once(run.text().body.as_str())
            .chain(
                run.hops
                    .iter()
                    .filter(|h| h.t % 2 == 0)
                    .map(|h| h.output_text.as_str()),
            )
            .collect();
        let langs: Vec<&str> = std::iter::once("en")
            .chain(
                run.hops
                    .iter()
                    .filter(|h| h.t % 2 == 1)
                    .map(|h| h.target.as_str()),
            )
            .collect();
        assert_eq!(steps.entries.len(), 4);
        for (k, e) in steps.entries.iter().enumerate() {
            let hand = gleu(&tokenize(texts[k + 1]), &tokenize(texts[k]), 4)
                .unwrap()
                .value;
            assert_eq!(e.score, hand);
            assert_eq!(
                (e.source.as_str(), e.target.as_str()),
                (langs[k], langs[k + 1])
            );
        }
        assert!(!steps.low_validity);
    }

    #[test]
    fn single_hop_pivot_run_has_no_steps() {
        let run = run_with(&sim(1), 1, 1);
        assert!(stepwise_gleu(&run).unwrap().entries.is_empty());
    }

    #[test]
    fn non_reference_origin_skips_first_comparison() {
        let c = Catalog::bundled();
        let spec = ChainBuilder::new(&c).origin("pt").random(6, 1).unwrap();
        let m = RunManifest::new("pt", spec, bundled_text("t1").unwrap(), "identity".into());
        let dir = tempfile::tempdir().unwrap();
        let run = run_chain(dir.path(), m, &IdentityTranslator, None).unwrap();
        assert_eq!(stepwise_gleu(&run).unwrap().entries.len(), 2);
    }

    #[test]
    fn direct_runs_are_flagged() {
        let c = Catalog::bundled();
        let spec = ChainBuilder::new(&c)
            .topology(crate::catalog::Topology::Direct)
            .common("Germanic", 1)
            .unwrap();
        let m = RunManifest::new("d", spec, bundled_text("t3").unwrap(), "identity".into());
        let dir = tempfile::tempdir().unwrap();
        let run = run_chain(dir.path(), m, &IdentityTranslator, None).unwrap();
        let steps = stepwise_gleu(&run).unwrap();
        assert!(steps.low_validity);
        assert_eq!(steps.entries.len(), 1);
    }

    #[test]
    fn missing_measurement_detected() {
        let mut run = run_with(&IdentityTranslator, 4, 0);
        run.hops[1].measurement_text = None;
        assert!(matches!(
            accumulated_gleu_of(&run),
            Err(AnalysisError::MissingMeasurement { hop: 2, .. })
        ));
    }

    #[test]
    fn size_mean_is_pointwise_average() {
        let runs: Vec<ChainRun> = (0..3).map(|s| run_with(&sim(s), 20, s)).collect();
        let traj = size_trajectory(&runs).unwrap();
        for (i, p) in traj.mean.points.iter().enumerate() {
            let hand: f64 = traj.runs.iter().map(|c| c.points[i].1).sum::<f64>() / 3.0;
            assert_eq!(p.1, hand);
        }
        assert!(matches!(size_trajectory(&[]), Err(AnalysisError::NoRuns)));
    }

    #[test]
    fn appending_identity_hops_keeps_earlier_values() {
        // a synthetic run whose later hops leave the text alone
        let base = run_with(&sim(3), 6, 3);
        let mut extended = base.clone();
        let last = base.hops.last().unwrap().clone();
        for extra in 0..2 {
            let t = base.hops.len() + extra + 1;
            extended.hops.push(HopRecord {
                t,
                source: last.target.clone(),
                target: "en".into(),
                input_text: last.output_text.clone(),
                output_text: last.output_text.clone(),
                output_word_count: last.output_word_count,
                measurement_text: Some(last.output_text.clone()),
                backend: last.backend.clone(),
                timing: None,
            });
        }
        extended.status = RunStatus::Partial;
        let a = accumulated_gleu_of(&base).unwrap();
        let b = accumulated_gleu_of(&extended).unwrap();
        assert_eq!(&b.points[..a.points.len()], &a.points[..]);
        let tail = a.points.last().unwrap().value;
        assert!(b.points[a.points.len()..].iter().all(|p| p.value == tail));
    }

    #[test]
    fn curve_construction_checks() {
        assert!(AccuracyCurve::from_measurements("x", [(2, 0.5), (2, 0.4)]).is_err());
        assert!(AccuracyCurve::from_measurements("x", [(0, 0.5)]).is_err());
        assert!(AccuracyCurve::from_measurements("x", [(1, f64::NAN)]).is_err());
        let _ = TokenSequence::default();
        let _ = SourceText::new("a", "en", "b");
    }
}
