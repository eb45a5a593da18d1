use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{plurality, AnnotationError, Ballot};

pub const DEFAULT_TARGET_ACCURACY: f64 = 0.75;

const SHIPPED_CURVE: &str = include_str!("../../data/vote_accuracy_curve.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: u32,
    pub accuracy: f64,
    pub stderr: f64,
}

/// Labeling accuracy as a function of votes per asset section, in ascending k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Curve(pub Vec<CurvePoint>);

impl Curve {
    /// Reads `k,accuracy,stderr` rows.
    pub fn from_csv<R: Read>(source: R) -> Result<Self, AnnotationError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(source);
        let mut points = Vec::new();
        for (i, row) in reader.deserialize::<CurvePoint>().enumerate() {
            let p = row.map_err(|e| AnnotationError::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            points.push(p);
        }
        points.sort_by_key(|p| p.k);
        if points.windows(2).any(|w| w[0].k == w[1].k) {
            return Err(AnnotationError::InvalidArgument(
                "curve repeats a k value".into(),
            ));
        }
        Ok(Curve(points))
    }

    /// Accuracy per vote count measured in a crowd labeling study, k = 1..19.
    pub fn shipped() -> Self {
        Self::from_csv(SHIPPED_CURVE.as_bytes()).expect("shipped curve is valid")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.0 {
            w.serialize(p).expect("in-memory CSV write");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
    }

    pub fn at(&self, k: u32) -> Option<&CurvePoint> {
        self.0.iter().find(|p| p.k == k)
    }
}

/// Plurality accuracy over the first `k` votes, k = 1..=k_max, against the
/// gold label. Ballots without gold or with fewer than `k_max` votes are left out.
pub fn accuracy_vs_votes(ballots: &[Ballot], k_max: usize) -> Result<Curve, AnnotationError> {
    if k_max == 0 {
        return Err(AnnotationError::InvalidArgument(
            "k_max must be at least 1".into(),
        ));
    }
    let eligible: Vec<&Ballot> = ballots
        .iter()
        .filter(|b| b.gold.is_some() && b.votes.len() >= k_max)
        .collect();
    if eligible.is_empty() {
        return Err(AnnotationError::NoEligibleBallots { k_max });
    }
    let n = eligible.len() as f64;
    let points = (1..=k_max)
        .map(|k| {
            let correct = eligible
                .iter()
                .filter(|b| Some(plurality(&b.votes[..k])) == b.gold)
                .count();
            let a = correct as f64 / n;
            CurvePoint {
                k: k as u32,
                accuracy: a,
                stderr: (a * (1.0 - a) / n).sqrt(),
            }
        })
        .collect();
    Ok(Curve(points))
}

/// Least-squares nondecreasing fit with unit weights (pool adjacent violators).
pub fn isotonic_fit(values: &[f64]) -> Vec<f64> {
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &y in values {
        blocks.push((y, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 <= s1 / n1 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().expect("two blocks") = (s0 + s1, n0 + n1);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, n)| std::iter::repeat_n(s / n as f64, n))
        .collect()
}

/// Smallest k whose isotonic-fitted accuracy reaches `target`.
pub fn diminishing_returns_point(curve: &Curve, target: f64) -> Option<u32> {
    let fitted = isotonic_fit(&curve.0.iter().map(|p| p.accuracy).collect::<Vec<_>>());
    curve
        .0
        .iter()
        .zip(fitted)
        .find(|(_, f)| *f >= target)
        .map(|(p, _)| p.k)
}
