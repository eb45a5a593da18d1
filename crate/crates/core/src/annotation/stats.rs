use serde::{Deserialize, Serialize};

use super::Ballot;

/// Sections seen in more scenes than this are left out of the vote average.
pub const DEFAULT_SCENE_THRESHOLD: u32 = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteStats {
    pub threshold: u32,
    pub eligible: usize,
    pub excluded: usize,
    pub excluded_fraction: f64,
    /// Mean votes per eligible ballot.
    pub mean_votes: Option<f64>,
    /// Percentage of ballots whose scene count is at most the threshold.
    pub threshold_percentile: f64,
}

pub fn vote_stats(ballots: &[Ballot], threshold: u32) -> VoteStats {
    let eligible: Vec<&Ballot> = ballots
        .iter()
        .filter(|b| b.scene_count <= threshold)
        .collect();
    let excluded = ballots.len() - eligible.len();
    let total = ballots.len().max(1) as f64;
    let mean_votes = (!eligible.is_empty()).then(|| {
        eligible.iter().map(|b| b.votes.len()).sum::<usize>() as f64 / eligible.len() as f64
    });
    VoteStats {
        threshold,
        eligible: eligible.len(),
        excluded,
        excluded_fraction: if ballots.is_empty() {
            0.0
        } else {
            excluded as f64 / total
        },
        mean_votes,
        threshold_percentile: if ballots.is_empty() {
            100.0
        } else {
            100.0 * eligible.len() as f64 / total
        },
    }
}
