use std::collections::BTreeMap;

use super::{Ballot, Vote};
use crate::compositor::{FmssLabeling, UNLABELED};

/// Most frequent class. Ties go to the class whose earliest vote came first,
/// then to the smaller class id. No votes gives [`UNLABELED`].
pub fn plurality(votes: &[Vote]) -> u8 {
    // class -> (count, earliest timestamp)
    let mut tally: BTreeMap<u8, (usize, u64)> = BTreeMap::new();
    for v in votes {
        let e = tally.entry(v.class_id).or_insert((0, u64::MAX));
        e.0 += 1;
        e.1 = e.1.min(v.ts_ms);
    }
    tally
        .into_iter()
        .max_by(|(ca, (na, ta)), (cb, (nb, tb))| na.cmp(nb).then(tb.cmp(ta)).then(cb.cmp(ca)))
        .map_or(UNLABELED, |(c, _)| c)
}

pub fn aggregate_labels(ballots: &[Ballot]) -> FmssLabeling {
    let mut out = FmssLabeling::default();
    for b in ballots {
        out.insert(b.fmss.clone(), plurality(&b.votes));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::FmssId;

    fn v(class: u8, ts: u64) -> Vote {
        Vote {
            fmss: FmssId::new("a", "b", 0, 0),
            class_id: class,
            worker: format!("w{ts}"),
            ts_ms: ts,
        }
    }

    #[test]
    fn plurality_cases() {
        assert_eq!(plurality(&[v(0, 1), v(0, 2), v(10, 3)]), 0);
        assert_eq!(plurality(&[v(0, 2), v(10, 1)]), 10);
        assert_eq!(plurality(&[]), UNLABELED);
        // same timestamp falls back to class id
        assert_eq!(plurality(&[v(4, 5), v(2, 5)]), 2);
    }

    #[test]
    fn aggregate_includes_empty_ballots() {
        let mut b = Ballot::new(FmssId::new("a", "b", 0, 0));
        let empty = Ballot::new(FmssId::new("a", "c", 0, 0));
        b.votes = vec![v(3, 1)];
        let l = aggregate_labels(&[b.clone(), empty.clone()]);
        assert_eq!(l.class_of(&b.fmss), 3);
        assert_eq!(l.0.get(&empty.fmss), Some(&UNLABELED));
    }
}
