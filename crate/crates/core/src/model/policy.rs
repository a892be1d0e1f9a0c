use crate::error::{Error, Result};
use crate::model::PMF_TOL;
use crate::scalar::Scalar;

/// Period-`L` agent-state policy `π^ℓ(a | z)`.
///
/// Decision epochs are numbered from `t = 1`; epoch `t` uses phase
/// `(t - 1) mod L`, so the first action is always drawn from `π^0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicPolicy<T> {
    period: usize,
    n_z: usize,
    n_actions: usize,
    probs: Vec<T>,
}

impl<T: Scalar> PeriodicPolicy<T> {
    /// `probs[(ℓ * n_z + z) * n_actions + a]`; each `(ℓ, z)` row must be a PMF.
    pub fn new(period: usize, n_z: usize, n_actions: usize, probs: Vec<T>) -> Result<Self> {
        if period == 0 || n_z == 0 || n_actions == 0 {
            return Err(Error::InvalidArgument(
                "policy dimensions must be positive".into(),
            ));
        }
        if probs.len() != period * n_z * n_actions {
            return Err(Error::Dimension(format!(
                "policy has {} entries, expected {}",
                probs.len(),
                period * n_z * n_actions
            )));
        }
        let tol = T::lit(PMF_TOL);
        for (row, chunk) in probs.chunks(n_actions).enumerate() {
            let sum: T = chunk.iter().copied().sum();
            if chunk.iter().any(|&p| p < T::zero()) || (sum - T::one()).abs_val() > tol {
                return Err(Error::InvalidArgument(format!(
                    "policy row (phase {}, z {}) is not a PMF",
                    row / n_z,
                    row % n_z
                )));
            }
        }
        Ok(Self {
            period,
            n_z,
            n_actions,
            probs,
        })
    }

    /// Point-mass policy; `actions[ℓ * n_z + z]` is the chosen action.
    pub fn deterministic(
        period: usize,
        n_z: usize,
        n_actions: usize,
        actions: &[usize],
    ) -> Result<Self> {
        if actions.len() != period * n_z {
            return Err(Error::Dimension(format!(
                "expected {} actions, got {}",
                period * n_z,
                actions.len()
            )));
        }
        if let Some(&bad) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(Error::InvalidArgument(format!("action {bad} out of range")));
        }
        let mut probs = vec![T::zero(); period * n_z * n_actions];
        for (row, &a) in actions.iter().enumerate() {
            probs[row * n_actions + a] = T::one();
        }
        Self::new(period, n_z, n_actions, probs)
    }

    pub fn uniform(period: usize, n_z: usize, n_actions: usize) -> Self {
        let p = T::one() / T::from_usize(n_actions).expect("small integer");
        Self::new(period, n_z, n_actions, vec![p; period * n_z * n_actions])
            .expect("uniform is a PMF")
    }

    /// The same per-phase maps repeated for a longer period.
    pub fn repeat(&self, period: usize) -> Result<Self> {
        if !period.is_multiple_of(self.period) {
            return Err(Error::InvalidArgument(format!(
                "period {period} is not a multiple of {}",
                self.period
            )));
        }
        let block = self.n_z * self.n_actions;
        let probs = (0..period)
            .flat_map(|l| {
                self.probs[(l % self.period) * block..][..block]
                    .iter()
                    .copied()
            })
            .collect();
        Self::new(period, self.n_z, self.n_actions, probs)
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    /// Phase used at decision epoch `t ≥ 1`.
    #[inline]
    pub fn phase_at(&self, t: u64) -> usize {
        ((t - 1) % self.period as u64) as usize
    }

    #[inline]
    pub fn dist(&self, phase: usize, z: usize) -> &[T] {
        let start = (phase * self.n_z + z) * self.n_actions;
        &self.probs[start..start + self.n_actions]
    }

    #[inline]
    pub fn prob(&self, phase: usize, z: usize, a: usize) -> T {
        self.dist(phase, z)[a]
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs
            .chunks(self.n_actions)
            .all(|row| row.iter().filter(|&&p| p != T::zero()).count() == 1)
    }

    /// The chosen action if the `(phase, z)` row is a point mass.
    pub fn action(&self, phase: usize, z: usize) -> Option<usize> {
        let row = self.dist(phase, z);
        let mut nz = row.iter().enumerate().filter(|(_, &p)| p != T::zero());
        match (nz.next(), nz.next()) {
            (Some((a, _)), None) => Some(a),
            _ => None,
        }
    }

    /// Deterministic policies as base-`nA` digits in `(ℓ, z)` order.
    pub fn encoding(&self) -> Option<String> {
        let mut s = String::with_capacity(self.period * self.n_z);
        for l in 0..self.period {
            for z in 0..self.n_z {
                let a = self.action(l, z)?;
                s.push(std::char::from_digit(a as u32, 36)?);
            }
        }
        Some(s)
    }

    pub fn cast<U: Scalar>(&self) -> PeriodicPolicy<U> {
        PeriodicPolicy {
            period: self.period,
            n_z: self.n_z,
            n_actions: self.n_actions,
            probs: self.probs.iter().map(|&p| U::lit(p.as_f64())).collect(),
        }
    }
}

/// `L` per-phase Q-tables `Q^ℓ(z, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTuple<T> {
    period: usize,
    n_z: usize,
    n_actions: usize,
    q: Vec<T>,
}

impl<T: Scalar> QTuple<T> {
    pub fn filled(period: usize, n_z: usize, n_actions: usize, value: T) -> Self {
        Self {
            period,
            n_z,
            n_actions,
            q: vec![value; period * n_z * n_actions],
        }
    }

    pub fn from_vec(period: usize, n_z: usize, n_actions: usize, q: Vec<T>) -> Result<Self> {
        if q.len() != period * n_z * n_actions {
            return Err(Error::Dimension(format!(
                "Q has {} entries, expected {}",
                q.len(),
                period * n_z * n_actions
            )));
        }
        Ok(Self {
            period,
            n_z,
            n_actions,
            q,
        })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn as_slice(&self) -> &[T] {
        &self.q
    }

    #[inline]
    pub fn index(&self, phase: usize, z: usize, a: usize) -> usize {
        (phase * self.n_z + z) * self.n_actions + a
    }

    #[inline]
    pub fn get(&self, phase: usize, z: usize, a: usize) -> T {
        self.q[self.index(phase, z, a)]
    }

    #[inline]
    pub fn set(&mut self, phase: usize, z: usize, a: usize, v: T) {
        let i = self.index(phase, z, a);
        self.q[i] = v;
    }

    #[inline]
    pub fn row(&self, phase: usize, z: usize) -> &[T] {
        let i = self.index(phase, z, 0);
        &self.q[i..i + self.n_actions]
    }

    pub fn phase_table(&self, phase: usize) -> &[T] {
        let block = self.n_z * self.n_actions;
        &self.q[phase * block..(phase + 1) * block]
    }

    /// `V^ℓ(z) = max_a Q^ℓ(z, a)`.
    pub fn value(&self, phase: usize, z: usize) -> T {
        let row = self.row(phase, z);
        row.iter()
            .copied()
            .fold(row[0], |m, x| if x > m { x } else { m })
    }

    pub fn values(&self, phase: usize) -> Vec<T> {
        (0..self.n_z).map(|z| self.value(phase, z)).collect()
    }

    /// Sup-norm distance to another tuple of the same shape.
    pub fn sup_distance(&self, other: &Self) -> T {
        assert_eq!(self.q.len(), other.q.len(), "Q shapes differ");
        crate::scalar::max_abs_diff(&self.q, &other.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_encoding_round_trip() {
        let p = PeriodicPolicy::<f64>::deterministic(2, 2, 2, &[1, 0, 0, 1]).unwrap();
        assert!(p.is_deterministic());
        assert_eq!(p.encoding().as_deref(), Some("1001"));
        assert_eq!(p.action(1, 1), Some(1));
    }

    #[test]
    fn phase_starts_at_zero() {
        let p = PeriodicPolicy::<f64>::uniform(3, 1, 2);
        assert_eq!(
            (1..=7).map(|t| p.phase_at(t)).collect::<Vec<_>>(),
            vec![0, 1, 2, 0, 1, 2, 0]
        );
        assert!(!p.is_deterministic());
        assert_eq!(p.encoding(), None);
    }

    #[test]
    fn rejects_non_pmf() {
        assert!(PeriodicPolicy::new(1, 1, 2, vec![0.5, 0.6]).is_err());
        assert!(PeriodicPolicy::new(1, 1, 2, vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn repeat_extends_period() {
        let p = PeriodicPolicy::<f64>::deterministic(1, 2, 2, &[0, 1]).unwrap();
        let r = p.repeat(3).unwrap();
        assert_eq!(r.encoding().as_deref(), Some("010101"));
        assert!(p.repeat(0).is_err());
    }

    #[test]
    fn q_values() {
        let q = QTuple::from_vec(1, 2, 2, vec![1.0, 3.0, -1.0, -2.0]).unwrap();
        assert_eq!(q.values(0), vec![3.0, -1.0]);
    }
}
