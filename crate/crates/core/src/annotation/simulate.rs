use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnnotationError, Ballot, Vote};
use crate::compositor::FmssLabeling;

/// Annotators that pick the gold class with probability `p` and otherwise a
/// class drawn uniformly from the remaining `classes - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorModel {
    pub p: f64,
    pub classes: u32,
    pub seed: u64,
}

impl AnnotatorModel {
    pub fn new(p: f64, classes: u32, seed: u64) -> Result<Self, AnnotationError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(AnnotationError::InvalidModel(format!(
                "p must lie in [0, 1], got {p}"
            )));
        }
        if !(2..=255).contains(&classes) {
            return Err(AnnotationError::InvalidModel(format!(
                "class count must lie in [2, 255], got {classes}"
            )));
        }
        Ok(AnnotatorModel { p, classes, seed })
    }
}

/// `k` votes per labeled section, in section order. Vote `j` comes from worker
/// `sim-j` at timestamp `j`; the ballot keeps the gold class.
pub fn simulate_votes(
    gold: &FmssLabeling,
    model: &AnnotatorModel,
    k: usize,
) -> Result<Vec<Ballot>, AnnotationError> {
    let model = AnnotatorModel::new(model.p, model.classes, model.seed)?;
    if k == 0 {
        return Err(AnnotationError::InvalidArgument(
            "k must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut out = Vec::with_capacity(gold.len());
    for (fmss, &g) in &gold.0 {
        if g as u32 >= model.classes {
            return Err(AnnotationError::InvalidClass {
                class: g as u32,
                classes: model.classes as usize,
            });
        }
        let votes = (0..k)
            .map(|j| {
                let class = if rng.random::<f64>() < model.p {
                    g
                } else {
                    let r = rng.random_range(0..model.classes - 1) as u8;
                    if r >= g {
                        r + 1
                    } else {
                        r
                    }
                };
                Vote {
                    fmss: fmss.clone(),
                    class_id: class,
                    worker: format!("sim-{j}"),
                    ts_ms: j as u64,
                }
            })
            .collect();
        out.push(Ballot {
            fmss: fmss.clone(),
            votes,
            gold: Some(g),
            scene_count: 1,
        });
    }
    Ok(out)
}
