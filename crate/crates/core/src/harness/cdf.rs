use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Group, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub group: Group,
    pub score: f64,
    pub cdf: f64,
}

/// Empirical CDF as `(score, F(score))`, ascending, one step of `1/n` per
/// sample.
pub fn empirical_cdf(scores: &[f64]) -> Result<Vec<(f64, f64)>> {
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Domain("NaN score".into()));
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    Ok(s.into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i + 1) as f64 / n))
        .collect())
}

pub fn score_cdf_points(train: &[f64], test: &[f64]) -> Result<Vec<CdfPoint>> {
    let mut out = Vec::with_capacity(train.len() + test.len());
    for (group, scores) in [(Group::Train, train), (Group::Test, test)] {
        out.extend(
            empirical_cdf(scores)?
                .into_iter()
                .map(|(score, cdf)| CdfPoint { group, score, cdf }),
        );
    }
    Ok(out)
}

/// CSV with columns `group,score,cdf`.
pub fn emit_score_cdf<W: Write>(train: &[f64], test: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in score_cdf_points(train, test)? {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io("cdf csv", e))
}

pub fn read_score_cdf<R: Read>(input: R) -> Result<Vec<CdfPoint>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Largest vertical gap between the two step functions in emitted points.
pub fn ks_from_points(points: &[CdfPoint]) -> f64 {
    let pick = |g: Group| -> Vec<(f64, f64)> {
        points
            .iter()
            .filter(|p| p.group == g)
            .map(|p| (p.score, p.cdf))
            .collect()
    };
    let (a, b) = (pick(Group::Train), pick(Group::Test));
    // F evaluated just at and after each jump; the last point of a tie block
    // carries the full step.
    let eval = |f: &[(f64, f64)], x: f64| {
        f.iter()
            .take_while(|p| p.0 <= x)
            .last()
            .map_or(0.0, |p| p.1)
    };
    a.iter()
        .chain(&b)
        .map(|&(x, _)| (eval(&a, x) - eval(&b, x)).abs())
        .fold(0.0, f64::max)
}
