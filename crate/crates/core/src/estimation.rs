//! Online transition statistics and the L1 confidence sets built from them.
//!
//! Both count tables are taken over completed transitions, so each visited
//! row of the empirical estimate is a probability vector at every step.

use crate::error::{Error, Result};
use crate::model::Transitions;

/// Visit counts `N_t(s,a)` and transition counts `N_t(s,a,s')`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    /// Current (1-based) time step: one more than the transitions recorded.
    pub t: u64,
    pub n_sa: Vec<Vec<u64>>,
    pub n_sas: Vec<Vec<Vec<u64>>>,
}

impl TransitionCounts {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            t: 1,
            n_sa: vec![vec![0; n_actions]; n_states],
            n_sas: vec![vec![vec![0; n_states]; n_actions]; n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_sa.len()
    }

    pub fn n_actions(&self) -> usize {
        self.n_sa.first().map_or(0, Vec::len)
    }

    pub fn record(&mut self, s: usize, a: usize, s_next: usize) -> Result<()> {
        let (ns, na) = (self.n_states(), self.n_actions());
        if s >= ns || s_next >= ns || a >= na {
            return Err(Error::IndexOutOfRange(format!(
                "transition ({s}, {a}, {s_next}) with S={ns}, A={na}"
            )));
        }
        self.n_sa[s][a] += 1;
        self.n_sas[s][a][s_next] += 1;
        self.t += 1;
        Ok(())
    }

    pub fn total_visits(&self) -> u64 {
        self.n_sa.iter().flatten().sum()
    }

    /// `p̂(s,a,s') = N(s,a,s') / max(N(s,a), 1)`; unvisited rows are zero.
    pub fn empirical_estimate(&self) -> Transitions {
        self.n_sas
            .iter()
            .zip(&self.n_sa)
            .map(|(rows, ns)| {
                rows.iter()
                    .zip(ns)
                    .map(|(row, &n)| {
                        let denom = n.max(1) as f64;
                        row.iter().map(|&k| k as f64 / denom).collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// The empirical estimate with unvisited rows replaced by uniform rows,
    /// so that it is a valid transition law.
    pub fn empirical_model(&self) -> Transitions {
        let ns = self.n_states();
        let mut p = self.empirical_estimate();
        for (rows, counts) in p.iter_mut().zip(&self.n_sa) {
            for (row, &n) in rows.iter_mut().zip(counts) {
                if n == 0 {
                    row.fill(1.0 / ns as f64);
                }
            }
        }
        p
    }
}

/// `ε_t(s,a) = sqrt(14·S·ln(2·A·t/δ) / max(N_t(s,a), 1))`.
pub fn confidence_radius(
    counts: &TransitionCounts,
    s: usize,
    a: usize,
    delta: f64,
    n_states: usize,
    n_actions: usize,
) -> Result<f64> {
    check_delta(delta)?;
    let n = *counts
        .n_sa
        .get(s)
        .and_then(|row| row.get(a))
        .ok_or_else(|| Error::IndexOutOfRange(format!("pair ({s}, {a})")))?;
    Ok(radius(n, counts.t, delta, n_states, n_actions))
}

fn radius(n: u64, t: u64, delta: f64, n_states: usize, n_actions: usize) -> f64 {
    let log_term = (2.0 * n_actions as f64 * t as f64 / delta).ln();
    (14.0 * n_states as f64 * log_term / n.max(1) as f64).sqrt()
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDelta(delta))
    }
}

/// Set of transition laws within `eps[s][a]` (L1) of `p_hat[s][a][·]` for
/// every pair. An immutable snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    pub p_hat: Transitions,
    pub eps: Vec<Vec<f64>>,
    pub delta: f64,
    pub t: u64,
}

/// Slack applied to the L1 membership test.
pub const MEMBERSHIP_SLACK: f64 = 1e-12;

impl ConfidenceSet {
    pub fn from_counts(counts: &TransitionCounts, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let (ns, na) = (counts.n_states(), counts.n_actions());
        let eps = counts
            .n_sa
            .iter()
            .map(|row| row.iter().map(|&n| radius(n, counts.t, delta, ns, na)).collect())
            .collect();
        Ok(Self {
            p_hat: counts.empirical_estimate(),
            eps,
            delta,
            t: counts.t,
        })
    }

    /// Builds a set from explicit parts. Zero radii are allowed, which makes
    /// the set the single point `p_hat`.
    pub fn from_parts(p_hat: Transitions, eps: Vec<Vec<f64>>, delta: f64, t: u64) -> Result<Self> {
        let ns = p_hat.len();
        let na = p_hat.first().map_or(0, Vec::len);
        let dims_ok = eps.len() == ns
            && eps.iter().all(|r| r.len() == na)
            && p_hat.iter().all(|rows| rows.len() == na && rows.iter().all(|r| r.len() == ns));
        if !dims_ok {
            return Err(Error::DimensionMismatch("p_hat and eps disagree".into()));
        }
        if eps.iter().flatten().any(|&e| !(e >= 0.0)) {
            return Err(Error::InvalidInputs("radii must be non-negative".into()));
        }
        Ok(Self {
            p_hat,
            eps,
            delta,
            t,
        })
    }

    pub fn n_states(&self) -> usize {
        self.p_hat.len()
    }

    pub fn n_actions(&self) -> usize {
        self.eps.first().map_or(0, Vec::len)
    }

    pub fn contains(&self, p: &Transitions) -> Result<bool> {
        let (ns, na) = (self.n_states(), self.n_actions());
        if p.len() != ns || p.iter().any(|rows| rows.len() != na || rows.iter().any(|r| r.len() != ns)) {
            return Err(Error::DimensionMismatch(format!(
                "candidate law is not {ns}x{na}x{ns}"
            )));
        }
        for s in 0..ns {
            for a in 0..na {
                let dist: f64 = p[s][a]
                    .iter()
                    .zip(&self.p_hat[s][a])
                    .map(|(x, y)| (x - y).abs())
                    .sum();
                if dist > self.eps[s][a] + MEMBERSHIP_SLACK {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn record_examples() {
        let mut c = TransitionCounts::new(2, 2);
        c.record(0, 0, 1).unwrap();
        assert_eq!((c.n_sa[0][0], c.n_sas[0][0][1], c.t), (1, 1, 2));
        c.record(0, 0, 1).unwrap();
        assert_eq!((c.n_sa[0][0], c.n_sas[0][0][1]), (2, 2));
        assert!(matches!(c.record(0, 2, 0), Err(Error::IndexOutOfRange(_))));
        assert!(matches!(c.record(2, 0, 0), Err(Error::IndexOutOfRange(_))));
    }

    #[test]
    fn estimate_examples() {
        let mut c = TransitionCounts::new(2, 2);
        for s_next in [1, 1, 1, 0] {
            c.record(0, 1, s_next).unwrap();
        }
        let p = c.empirical_estimate();
        assert_eq!(p[0][1], vec![0.25, 0.75]);
        assert_eq!(p[1][0], vec![0.0, 0.0]);
        assert_eq!(c.empirical_model()[1][0], vec![0.5, 0.5]);
    }

    #[test]
    fn radius_examples() {
        let mut c = TransitionCounts::new(2, 2);
        c.t = 100;
        let r = confidence_radius(&c, 0, 0, 0.05, 2, 2).unwrap();
        assert!((r - (28.0 * 8000f64.ln()).sqrt()).abs() < 1e-12);
        assert!((r - 15.863_212_5).abs() < 1e-6);
        // the commonly quoted ≈15.866 is within 3e-3 of this
        assert!((r - 15.866).abs() < 5e-3);

        c.n_sa[0][0] = (28.0 * 8000f64.ln()).ceil() as u64;
        assert!(confidence_radius(&c, 0, 0, 0.05, 2, 2).unwrap() <= 1.0);

        assert!(matches!(
            confidence_radius(&c, 0, 0, 1.0, 2, 2),
            Err(Error::InvalidDelta(_))
        ));
        assert!(matches!(
            confidence_radius(&c, 0, 0, 0.0, 2, 2),
            Err(Error::InvalidDelta(_))
        ));
    }

    #[test]
    fn membership_examples() {
        let mut c = TransitionCounts::new(2, 1);
        c.record(0, 0, 1).unwrap();
        let set = ConfidenceSet::from_counts(&c, 0.05).unwrap();
        // p̂ itself is not a valid law (unvisited zero row) but is at distance 0
        assert!(set.contains(&set.p_hat).unwrap());
        // unvisited pair: any distribution is at L1 distance 1 < ε
        assert!(set.eps[1][0] > 1.0);
        assert!(set.contains(&vec![vec![vec![0.0, 1.0]], vec![vec![0.3, 0.7]]]).unwrap());

        let point = ConfidenceSet::from_parts(
            vec![vec![vec![0.5, 0.5]]; 2],
            vec![vec![0.0]; 2],
            0.05,
            1,
        )
        .unwrap();
        assert!(!point.contains(&vec![vec![vec![0.6, 0.4]], vec![vec![0.5, 0.5]]]).unwrap());
        assert!(matches!(
            point.contains(&vec![vec![vec![1.0]]]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn conservation(transitions in proptest::collection::vec((0..3usize, 0..2usize, 0..3usize), 0..1000)) {
            let mut c = TransitionCounts::new(3, 2);
            for &(s, a, t) in &transitions {
                c.record(s, a, t).unwrap();
            }
            prop_assert_eq!(c.total_visits(), transitions.len() as u64);
            prop_assert_eq!(c.t, transitions.len() as u64 + 1);
            for s in 0..3 {
                for a in 0..2 {
                    prop_assert_eq!(c.n_sas[s][a].iter().sum::<u64>(), c.n_sa[s][a]);
                }
            }
            let p = c.empirical_estimate();
            for s in 0..3 {
                for a in 0..2 {
                    let sum: f64 = p[s][a].iter().sum();
                    if c.n_sa[s][a] > 0 {
                        prop_assert!((sum - 1.0).abs() < 1e-12);
                    } else {
                        prop_assert_eq!(sum, 0.0);
                    }
                }
            }
        }

        #[test]
        fn radius_monotone(n in 0u64..10_000, t in 1u64..1_000_000, dn in 1u64..100, dt in 1u64..1000) {
            let base = radius(n, t, 0.05, 3, 2);
            prop_assert!(radius(n + dn, t, 0.05, 3, 2) <= base);
            prop_assert!(radius(n, t + dt, 0.05, 3, 2) >= base);
        }
    }
}
