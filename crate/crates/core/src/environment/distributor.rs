//! Query distributors: models of how a gateway splits a step's volume among bidders.
//!
//! Every kind first filters out bids above the budget. If nobody is left the
//! whole volume is dropped; otherwise the eligible agents split all of it, so
//! nothing is dropped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{Budget, Price, QueryVolume};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum DistributorKind {
    /// Lone agent takes everything if its price fits the budget.
    SingleAgentThreshold,
    /// Even split among eligible agents.
    BudgetFilteredUniform,
    /// Shares proportional to `1 / price` among eligible agents.
    InverseProportional,
    /// Shares proportional to `exp(-price / temperature)` among eligible agents.
    SoftmaxNegPrice { temperature: f64 },
}

impl DistributorKind {
    pub fn name(&self) -> &'static str {
        match self {
            DistributorKind::SingleAgentThreshold => "singleAgentThreshold",
            DistributorKind::BudgetFilteredUniform => "budgetFilteredUniform",
            DistributorKind::InverseProportional => "inverseProportional",
            DistributorKind::SoftmaxNegPrice { .. } => "softmaxNegPrice",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributeError {
    #[error("singleAgentThreshold needs exactly one bid, got {0}")]
    NotSingleAgent(usize),
    #[error("softmax temperature must be positive, got {0}")]
    BadTemperature(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    /// Served volume per bid, in bid order.
    pub served: Vec<QueryVolume>,
    pub dropped: QueryVolume,
}

impl AllocationResult {
    fn all_dropped(n: usize, volume: QueryVolume) -> Self {
        Self {
            served: vec![QueryVolume::ZERO; n],
            dropped: volume,
        }
    }

    pub fn total_served(&self) -> f64 {
        self.served.iter().map(|v| v.value()).sum()
    }
}

/// Splits `volume` among `bids` (one per agent, in agent order).
pub fn distribute(
    kind: &DistributorKind,
    bids: &[Price],
    volume: QueryVolume,
    budget: Budget,
) -> Result<AllocationResult, DistributeError> {
    match *kind {
        DistributorKind::SingleAgentThreshold if bids.len() != 1 => {
            return Err(DistributeError::NotSingleAgent(bids.len()))
        }
        DistributorKind::SoftmaxNegPrice { temperature }
            if temperature.is_nan() || temperature <= 0.0 =>
        {
            return Err(DistributeError::BadTemperature(temperature))
        }
        _ => {}
    }

    let eligible: Vec<usize> = (0..bids.len())
        .filter(|&i| bids[i].value() <= budget.value())
        .collect();
    if eligible.is_empty() {
        return Ok(AllocationResult::all_dropped(bids.len(), volume));
    }

    let mut weights = vec![0.0; bids.len()];
    match *kind {
        DistributorKind::SingleAgentThreshold | DistributorKind::BudgetFilteredUniform => {
            for &i in &eligible {
                weights[i] = 1.0;
            }
        }
        DistributorKind::InverseProportional => {
            let free: Vec<usize> = eligible
                .iter()
                .copied()
                .filter(|&i| bids[i].value() == 0.0)
                .collect();
            if free.is_empty() {
                for &i in &eligible {
                    weights[i] = 1.0 / bids[i].value();
                }
            } else {
                // 1/p diverges at zero, so zero-price bidders absorb everything.
                for i in free {
                    weights[i] = 1.0;
                }
            }
        }
        DistributorKind::SoftmaxNegPrice { temperature } => {
            let min_price = eligible
                .iter()
                .map(|&i| bids[i].value())
                .fold(f64::INFINITY, f64::min);
            for &i in &eligible {
                weights[i] = (-(bids[i].value() - min_price) / temperature).exp();
            }
        }
    }

    let total: f64 = weights.iter().sum();
    let served = weights
        .iter()
        .map(|w| QueryVolume::clamped(volume.value() * (w / total)))
        .collect();
    Ok(AllocationResult {
        served,
        dropped: QueryVolume::ZERO,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prices(v: &[f64]) -> Vec<Price> {
        v.iter().map(|&x| Price::new(x).unwrap()).collect()
    }
    fn vol(v: f64) -> QueryVolume {
        QueryVolume::new(v).unwrap()
    }
    fn budget(v: f64) -> Budget {
        Budget::new(v).unwrap()
    }
    fn served(r: &AllocationResult) -> Vec<f64> {
        r.served.iter().map(|v| v.value()).collect()
    }

    const KINDS: [DistributorKind; 3] = [
        DistributorKind::BudgetFilteredUniform,
        DistributorKind::InverseProportional,
        DistributorKind::SoftmaxNegPrice { temperature: 0.3 },
    ];

    #[test]
    fn inverse_proportional_example() {
        let r = distribute(
            &DistributorKind::InverseProportional,
            &prices(&[1.0, 2.0, 4.0]),
            vol(70.0),
            budget(10.0),
        )
        .unwrap();
        let s = served(&r);
        for (got, want) in s.iter().zip([40.0, 20.0, 10.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(r.dropped.value(), 0.0);
    }

    #[test]
    fn uniform_filters_over_budget() {
        let r = distribute(
            &DistributorKind::BudgetFilteredUniform,
            &prices(&[0.5, 1.5]),
            vol(100.0),
            budget(1.0),
        )
        .unwrap();
        assert_eq!(served(&r), vec![100.0, 0.0]);
        assert_eq!(r.dropped.value(), 0.0);
    }

    #[test]
    fn everyone_over_budget_drops_everything() {
        for kind in KINDS {
            let r = distribute(&kind, &prices(&[1.5, 2.0]), vol(80.0), budget(1.0)).unwrap();
            assert_eq!(served(&r), vec![0.0, 0.0]);
            assert_eq!(r.dropped.value(), 80.0);
        }
        let r = distribute(
            &DistributorKind::SingleAgentThreshold,
            &prices(&[1.5]),
            vol(80.0),
            budget(1.0),
        )
        .unwrap();
        assert_eq!(r.dropped.value(), 80.0);
    }

    #[test]
    fn threshold_requires_one_agent() {
        let err = distribute(
            &DistributorKind::SingleAgentThreshold,
            &prices(&[0.5, 0.6]),
            vol(1.0),
            budget(1.0),
        );
        assert_eq!(err, Err(DistributeError::NotSingleAgent(2)));
        let r = distribute(
            &DistributorKind::SingleAgentThreshold,
            &prices(&[1.0]),
            vol(10.0),
            budget(1.0),
        )
        .unwrap();
        assert_eq!(served(&r), vec![10.0]);
    }

    #[test]
    fn zero_price_takes_the_volume() {
        let r = distribute(
            &DistributorKind::InverseProportional,
            &prices(&[0.0, 0.5, 0.0]),
            vol(10.0),
            budget(1.0),
        )
        .unwrap();
        assert_eq!(served(&r), vec![5.0, 0.0, 5.0]);
    }

    #[test]
    fn softmax_prefers_cheaper() {
        let r = distribute(
            &DistributorKind::SoftmaxNegPrice { temperature: 0.5 },
            &prices(&[0.2, 0.7]),
            vol(1.0),
            budget(1.0),
        )
        .unwrap();
        let s = served(&r);
        assert!((s[0] / s[1] - 1.0f64.exp()).abs() < 1e-12);
    }

    fn kind_strategy() -> impl Strategy<Value = DistributorKind> {
        prop_oneof![
            Just(DistributorKind::BudgetFilteredUniform),
            Just(DistributorKind::InverseProportional),
            (0.01..5.0f64).prop_map(|t| DistributorKind::SoftmaxNegPrice { temperature: t }),
        ]
    }

    proptest! {
        #[test]
        fn conservation_and_filtering(kind in kind_strategy(), bids in proptest::collection::vec(0.0..2.0f64, 1..8), v in 0.0..1e5f64, b in 0.0..2.0f64) {
            let r = distribute(&kind, &prices(&bids), vol(v), budget(b)).unwrap();
            let total = r.total_served() + r.dropped.value();
            prop_assert!((total - v).abs() <= 1e-9 * v.max(1e-300));
            for (i, s) in r.served.iter().enumerate() {
                prop_assert!(s.value() >= 0.0);
                if s.value() > 0.0 { prop_assert!(bids[i] <= b); }
            }
        }

        #[test]
        fn lowering_price_raises_share(bids in proptest::collection::vec(0.05..1.0f64, 2..6), cut in 0.01..0.9f64) {
            let before = distribute(&DistributorKind::InverseProportional, &prices(&bids), vol(100.0), budget(1.0)).unwrap();
            let mut lowered = bids.clone();
            lowered[0] *= 1.0 - cut;
            let after = distribute(&DistributorKind::InverseProportional, &prices(&lowered), vol(100.0), budget(1.0)).unwrap();
            prop_assert!(after.served[0].value() > before.served[0].value());
        }

        #[test]
        fn permutation_equivariance(kind in kind_strategy(), bids in proptest::collection::vec(0.0..2.0f64, 1..7), rot in 0usize..7, b in 0.0..2.0f64) {
            let n = bids.len();
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let permuted: Vec<f64> = perm.iter().map(|&i| bids[i]).collect();
            let r = distribute(&kind, &prices(&bids), vol(50.0), budget(b)).unwrap();
            let rp = distribute(&kind, &prices(&permuted), vol(50.0), budget(b)).unwrap();
            for (j, &i) in perm.iter().enumerate() {
                prop_assert!((rp.served[j].value() - r.served[i].value()).abs() <= 1e-12 * 50.0);
            }
            prop_assert_eq!(rp.dropped, r.dropped);
        }
    }
}
