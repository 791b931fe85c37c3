//! Attribution over disjoint feature sets.
//!
//! [`arch_attribute`] moves a set from baseline to target with everything
//! else held at baseline; [`difference_attribute`] moves a set from target
//! to baseline with everything else held at target. Both sum to
//! `f(target) - f(baseline)` when the function is additive over the sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blackbox::BlackBox;
use crate::detect::InteractionRanking;
use crate::error::{Error, Result};
use crate::space::{merge_overlapping, Context, FeatureSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    ArchAttribute,
    Difference,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ArchAttribute => "archattribute",
            Method::Difference => "difference",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "archattribute" => Ok(Method::ArchAttribute),
            "difference" => Ok(Method::Difference),
            _ => Err(Error::Parameter(format!("unknown attribution method `{s}`"))),
        }
    }
}

/// The context whose output, compared with a reference, gives the attribution.
fn probe(bb: &BlackBox, set: &FeatureSet, method: Method) -> Result<Context> {
    bb.space().check_set(set)?;
    let p = bb.p();
    match method {
        Method::ArchAttribute => Context::baseline(p).with_override(set, true),
        Method::Difference => Context::target(p).with_override(set, false),
    }
}

/// `f(target on set, baseline elsewhere) - f(baseline)`.
pub fn arch_attribute(bb: &BlackBox, set: &FeatureSet) -> Result<f64> {
    let ctx = probe(bb, set, Method::ArchAttribute)?;
    let v = bb.eval_batch(&[ctx, Context::baseline(bb.p())])?;
    Ok(v[0] - v[1])
}

/// `f(target) - f(baseline on set, target elsewhere)`.
pub fn difference_attribute(bb: &BlackBox, set: &FeatureSet) -> Result<f64> {
    let ctx = probe(bb, set, Method::Difference)?;
    let v = bb.eval_batch(&[Context::target(bb.p()), ctx])?;
    Ok(v[0] - v[1])
}

pub fn attribute(bb: &BlackBox, set: &FeatureSet, method: Method) -> Result<f64> {
    match method {
        Method::ArchAttribute => arch_attribute(bb, set),
        Method::Difference => difference_attribute(bb, set),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub sets: Vec<FeatureSet>,
    pub phi: Vec<f64>,
    pub method: Method,
    pub f_target: f64,
    pub f_baseline: f64,
    /// `f(target) - f(baseline) - sum(phi)`; zero only when the sets capture
    /// every interaction of the function.
    pub completeness_residual: f64,
    /// Pairs asked for when the sets came from a ranking.
    pub pairs_requested: usize,
    /// Nonzero pairs actually merged into the sets.
    pub pairs_used: usize,
}

impl Explanation {
    pub fn total(&self) -> f64 {
        self.phi.iter().sum()
    }
}

/// Attributes each of `sets`, which must be pairwise disjoint.
pub fn attribute_sets(bb: &BlackBox, sets: &[FeatureSet], method: Method) -> Result<Explanation> {
    let mut seen = vec![false; bb.p()];
    for set in sets {
        bb.space().check_set(set)?;
        for &i in set.indices() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Parameter(format!(
                    "feature {i} appears in more than one set"
                )));
            }
        }
    }
    let p = bb.p();
    let mut batch = vec![Context::target(p), Context::baseline(p)];
    for set in sets {
        batch.push(probe(bb, set, method)?);
    }
    let values = bb.eval_batch(&batch)?;
    let (f_target, f_baseline) = (values[0], values[1]);
    let phi: Vec<f64> = values[2..]
        .iter()
        .map(|&v| match method {
            Method::ArchAttribute => v - f_baseline,
            Method::Difference => f_target - v,
        })
        .collect();
    let completeness_residual = (f_target - f_baseline) - phi.iter().sum::<f64>();
    Ok(Explanation {
        sets: sets.to_vec(),
        phi,
        method,
        f_target,
        f_baseline,
        completeness_residual,
        pairs_requested: 0,
        pairs_used: 0,
    })
}

/// Islands from the top pairs of a ranking plus singleton main effects.
///
/// Only pairs with nonzero strength are merged; inert features get no
/// singleton.
pub fn island_sets(bb: &BlackBox, ranking: &InteractionRanking, top_k: usize) -> Result<(Vec<FeatureSet>, usize)> {
    if ranking.p != bb.p() {
        return Err(Error::Dimension {
            expected: bb.p(),
            actual: ranking.p,
        });
    }
    let chosen = ranking.top_k_nonzero(top_k);
    let pair_sets = chosen
        .iter()
        .map(|s| FeatureSet::pair(s.i, s.j))
        .collect::<Result<Vec<_>>>()?;
    let mut sets = merge_overlapping(&pair_sets);
    let mut covered = vec![false; bb.p()];
    for s in &sets {
        for &i in s.indices() {
            covered[i] = true;
        }
    }
    for (i, &c) in covered.iter().enumerate() {
        if !c && !bb.space().is_inert(i) {
            sets.push(FeatureSet::singleton(i));
        }
    }
    sets.sort_by_key(FeatureSet::min);
    Ok((sets, chosen.len()))
}

/// Detection followed by attribution: the full explanation of one input.
pub fn explain(
    bb: &BlackBox,
    ranking: &InteractionRanking,
    top_k: usize,
    method: Method,
) -> Result<Explanation> {
    let (sets, used) = island_sets(bb, ranking, top_k)?;
    let mut out = attribute_sets(bb, &sets, method)?;
    out.pairs_requested = top_k;
    out.pairs_used = used;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{detect_pairs, DetectorConfig};
    use crate::space::{HConvention, PerturbationSpace};

    fn fs(v: &[usize]) -> FeatureSet {
        FeatureSet::new(v.iter().copied()).unwrap()
    }

    fn product_plus(a: f64, b: f64, c: f64) -> BlackBox {
        let space =
            PerturbationSpace::new(vec![a, b, c], vec![0.0; 3], HConvention::Unit).unwrap();
        BlackBox::from_fn(space, |v| v[0] * v[1] + v[2])
    }

    #[test]
    fn whole_set_gets_the_full_difference() {
        let bb = product_plus(2.0, 3.0, 5.0);
        let all = fs(&[0, 1, 2]);
        assert_eq!(arch_attribute(&bb, &all).unwrap(), 11.0);
        assert_eq!(difference_attribute(&bb, &all).unwrap(), 11.0);
    }

    #[test]
    fn product_and_main_effect_get_their_own_values() {
        let bb = product_plus(2.0, 3.0, 5.0);
        assert_eq!(arch_attribute(&bb, &fs(&[0, 1])).unwrap(), 6.0);
        assert_eq!(arch_attribute(&bb, &fs(&[2])).unwrap(), 5.0);
        assert_eq!(difference_attribute(&bb, &fs(&[2])).unwrap(), 5.0);
        assert_eq!(difference_attribute(&bb, &fs(&[0, 1])).unwrap(), 6.0);
    }

    #[test]
    fn unused_features_get_zero() {
        let space = PerturbationSpace::new(vec![1.0, 2.0, 3.0], vec![0.0; 3], HConvention::Unit).unwrap();
        let bb = BlackBox::from_fn(space, |v| v[0].exp());
        assert_eq!(arch_attribute(&bb, &fs(&[1, 2])).unwrap(), 0.0);
    }

    #[test]
    fn attribution_rejects_bad_sets() {
        let bb = product_plus(1.0, 1.0, 1.0);
        assert!(arch_attribute(&bb, &fs(&[3])).is_err());
        assert!(attribute_sets(&bb, &[fs(&[0, 1]), fs(&[1, 2])], Method::ArchAttribute).is_err());
    }

    #[test]
    fn explain_merges_pairs_into_islands() {
        // p = 5 with interactions on (0,1) and (1,2) only
        let space = PerturbationSpace::new(vec![1.0; 5], vec![0.0; 5], HConvention::Unit).unwrap();
        let bb = BlackBox::from_fn(space, |v| 2.0 * v[0] * v[1] + v[1] * v[2] + v[3] - v[4]);
        let ranking = detect_pairs(&bb, &DetectorConfig::default()).unwrap();
        let e = explain(&bb, &ranking, 2, Method::ArchAttribute).unwrap();
        assert_eq!(e.sets, vec![fs(&[0, 1, 2]), fs(&[3]), fs(&[4])]);
        assert_eq!(e.phi, vec![3.0, 1.0, -1.0]);
        assert_eq!(e.completeness_residual, 0.0);
        assert_eq!(e.pairs_used, 2);

        let singles = explain(&bb, &ranking, 0, Method::ArchAttribute).unwrap();
        assert_eq!(singles.sets.len(), 5);
        for (k, set) in singles.sets.iter().enumerate() {
            assert_eq!(set, &FeatureSet::singleton(k));
            assert_eq!(singles.phi[k], arch_attribute(&bb, set).unwrap());
        }

        let greedy = explain(&bb, &ranking, 50, Method::ArchAttribute).unwrap();
        assert_eq!(greedy.pairs_requested, 50);
        assert_eq!(greedy.pairs_used, 2);
    }

    #[test]
    fn explain_skips_inert_features() {
        let space = PerturbationSpace::new(vec![1.0, 4.0, 2.0], vec![0.0, 4.0, 0.0], HConvention::Unit).unwrap();
        let bb = BlackBox::from_fn(space, |v| v[0] + v[1] * v[2]);
        let ranking = detect_pairs(&bb, &DetectorConfig::default()).unwrap();
        let e = explain(&bb, &ranking, 3, Method::ArchAttribute).unwrap();
        assert_eq!(e.sets, vec![fs(&[0]), fs(&[2])]);
        assert_eq!(e.phi, vec![1.0, 8.0]);
    }

    #[test]
    fn residual_is_reported_when_sets_miss_an_interaction() {
        let bb = product_plus(2.0, 3.0, 5.0);
        let e = attribute_sets(&bb, &[fs(&[0]), fs(&[1]), fs(&[2])], Method::ArchAttribute).unwrap();
        assert_eq!(e.phi, vec![0.0, 0.0, 5.0]);
        assert_eq!(e.completeness_residual, 6.0);
    }

    #[test]
    fn method_names() {
        assert_eq!("difference".parse::<Method>().unwrap(), Method::Difference);
        assert!("shapley".parse::<Method>().is_err());
        assert_eq!(Method::ArchAttribute.to_string(), "archattribute");
    }
}
