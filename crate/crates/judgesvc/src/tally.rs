//! Win/loss/tie percentages and a two-sided sign test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{JudgeError, Result};
use crate::log::JudgmentRecord;
use crate::session::Outcome;

/// The canonical side whose wins are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    A,
    B,
}

impl std::str::FromStr for Side {
    type Err = JudgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Self::A),
            "b" => Ok(Self::B),
            _ => Err(JudgeError::BadRequest(format!("policy must be a or b, got {s:?}"))),
        }
    }
}

/// Count every judgment, or majority-vote each pair first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TallyMode {
    #[default]
    Judgment,
    Pair,
}

impl std::str::FromStr for TallyMode {
    type Err = JudgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "judgment" => Ok(Self::Judgment),
            "pair" => Ok(Self::Pair),
            _ => Err(JudgeError::BadRequest(format!("mode must be judgment or pair, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    /// Percentages to one decimal.
    pub win: f64,
    pub loss: f64,
    pub tie: f64,
    /// Two-sided sign test on wins vs losses.
    pub p: f64,
    pub n: usize,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
}

fn pct(k: usize, n: usize) -> f64 {
    let x = 100.0 * k as f64 / n as f64;
    format!("{x:.1}").parse().expect("formatted float")
}

/// Two-sided sign test: `min(1, 2 P(X <= min(wins, losses)))` for
/// `X ~ Binomial(wins + losses, 1/2)`.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let k = wins.min(losses);
    let mut log_pmf = -(n as f64) * std::f64::consts::LN_2;
    let mut cdf = 0.0;
    for i in 0..=k {
        cdf += log_pmf.exp();
        log_pmf += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    (2.0 * cdf).min(1.0)
}

pub fn tally_counts(wins: usize, losses: usize, ties: usize) -> Result<Tally> {
    let n = wins + losses + ties;
    if n == 0 {
        return Err(JudgeError::NoJudgments);
    }
    Ok(Tally {
        win: pct(wins, n),
        loss: pct(losses, n),
        tie: pct(ties, n),
        p: sign_test(wins, losses),
        n,
        wins,
        losses,
        ties,
    })
}

fn majority(outcomes: &[Outcome]) -> Outcome {
    let count = |o| outcomes.iter().filter(|&&x| x == o).count();
    let (a, b, t) = (count(Outcome::A), count(Outcome::B), count(Outcome::Tie));
    if a > b && a > t {
        Outcome::A
    } else if b > a && b > t {
        Outcome::B
    } else {
        Outcome::Tie
    }
}

pub fn tally(records: &[JudgmentRecord], side: Side, mode: TallyMode) -> Result<Tally> {
    let outcomes: Vec<Outcome> = match mode {
        TallyMode::Judgment => records.iter().map(|r| r.outcome).collect(),
        TallyMode::Pair => {
            let mut by_pair: BTreeMap<usize, Vec<Outcome>> = BTreeMap::new();
            for r in records {
                by_pair.entry(r.pair_index).or_default().push(r.outcome);
            }
            by_pair.values().map(|o| majority(o)).collect()
        }
    };
    let (mine, theirs) = match side {
        Side::A => (Outcome::A, Outcome::B),
        Side::B => (Outcome::B, Outcome::A),
    };
    let count = |o| outcomes.iter().filter(|&&x| x == o).count();
    tally_counts(count(mine), count(theirs), count(Outcome::Tie))
}
