use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::PeriodicPolicy;

pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 24;
/// Values within this of the best count as tied.
pub const SEARCH_TIE_TOL: f64 = 1e-9;

/// `nA^(nZ·L)`, saturating.
pub fn policy_count(n_z: usize, n_actions: usize, period: usize) -> u128 {
    let digits = (n_z * period) as u32;
    (n_actions as u128).checked_pow(digits).unwrap_or(u128::MAX)
}

/// Action table `actions[ℓ * nZ + z]` of the `index`-th policy in
/// lexicographic order of its `(ℓ, z)` digit string.
pub fn actions_from_index(
    mut index: u64,
    n_z: usize,
    n_actions: usize,
    period: usize,
) -> Vec<usize> {
    let mut actions = vec![0; n_z * period];
    for slot in actions.iter_mut().rev() {
        *slot = (index % n_actions as u64) as usize;
        index /= n_actions as u64;
    }
    actions
}

fn checked_count(n_z: usize, n_actions: usize, period: usize, cap: u128) -> Result<u64> {
    let count = policy_count(n_z, n_actions, period);
    if count > cap {
        return Err(Error::EnumerationCap { count, cap });
    }
    Ok(count as u64)
}

/// All deterministic period-`L` policies in lexicographic order.
pub fn enumerate_policies(
    n_z: usize,
    n_actions: usize,
    period: usize,
    cap: u128,
) -> Result<impl Iterator<Item = PeriodicPolicy<f64>>> {
    let count = checked_count(n_z, n_actions, period, cap)?;
    Ok((0..count).map(move |i| {
        PeriodicPolicy::deterministic(
            period,
            n_z,
            n_actions,
            &actions_from_index(i, n_z, n_actions, period),
        )
        .expect("digits are valid actions")
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub value: f64,
    pub index: u64,
    pub policy: PeriodicPolicy<f64>,
    pub evaluated: u64,
}

/// Best deterministic period-`L` policy under `eval`, which receives the
/// action table `actions[ℓ * nZ + z]`. Evaluation runs in parallel; among
/// policies within [`SEARCH_TIE_TOL`] of the best value the lexicographically
/// smallest wins.
pub fn brute_force_best<F>(
    n_z: usize,
    n_actions: usize,
    period: usize,
    cap: u128,
    eval: F,
) -> Result<SearchResult>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    let count = checked_count(n_z, n_actions, period, cap)?;
    let values: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|i| eval(&actions_from_index(i, n_z, n_actions, period)))
        .collect::<Result<_>>()?;
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let index = values
        .iter()
        .position(|&v| v >= best - SEARCH_TIE_TOL)
        .expect("at least one policy") as u64;
    let actions = actions_from_index(index, n_z, n_actions, period);
    Ok(SearchResult {
        value: values[index as usize],
        index,
        policy: PeriodicPolicy::deterministic(period, n_z, n_actions, &actions)?,
        evaluated: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(policy_count(2, 2, 1), 4);
        assert_eq!(policy_count(2, 2, 2), 16);
        assert_eq!(policy_count(2, 2, 10), 1 << 20);
        assert_eq!(
            enumerate_policies(2, 2, 2, DEFAULT_ENUMERATION_CAP)
                .unwrap()
                .count(),
            16
        );
    }

    #[test]
    fn lexicographic_order() {
        let enc: Vec<String> = enumerate_policies(1, 3, 2, DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .map(|p| p.encoding().unwrap())
            .collect();
        assert_eq!(enc[..4], ["00", "01", "02", "10"]);
        assert_eq!(enc.last().unwrap(), "22");
    }

    #[test]
    fn cap_refusal_names_count() {
        match enumerate_policies(4, 2, 10, DEFAULT_ENUMERATION_CAP) {
            Err(Error::EnumerationCap { count, .. }) => assert_eq!(count, 1 << 40),
            _ => panic!("expected refusal"),
        }
    }

    #[test]
    fn ties_pick_smallest_index() {
        let r = brute_force_best(1, 2, 2, DEFAULT_ENUMERATION_CAP, |a| {
            Ok(if a[0] == 1 { 1.0 } else { 0.0 })
        })
        .unwrap();
        assert_eq!(r.index, 2);
        assert_eq!(r.policy.encoding().as_deref(), Some("10"));
    }
}
