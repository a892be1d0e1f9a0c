use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};

/// Finite agent-state machine `z' = φ(z, y', a)` started from `(z0, a0)`.
///
/// The first agent state is `φ(z0, y1, a0)`; `a0` is a placeholder action
/// that only exists to make the first update well-typed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentStateMachine {
    n_z: usize,
    n_obs: usize,
    n_actions: usize,
    phi: Vec<usize>,
    z0: usize,
    a0: usize,
    labels: Option<Vec<String>>,
}

impl AgentStateMachine {
    /// `phi[(z * n_obs + y) * n_actions + a]` is the next agent state.
    pub fn new(
        n_z: usize,
        n_obs: usize,
        n_actions: usize,
        phi: Vec<usize>,
        z0: usize,
        a0: usize,
    ) -> Result<Self> {
        if n_z == 0 || n_obs == 0 || n_actions == 0 {
            return Err(Error::InvalidArgument(
                "agent machine dimensions must be positive".into(),
            ));
        }
        if phi.len() != n_z * n_obs * n_actions {
            return Err(Error::Dimension(format!(
                "phi has {} entries, expected {}",
                phi.len(),
                n_z * n_obs * n_actions
            )));
        }
        if let Some(bad) = phi.iter().position(|&z| z >= n_z) {
            return Err(Error::InvalidArgument(format!(
                "phi entry {bad} = {} is not below nZ = {n_z}",
                phi[bad]
            )));
        }
        if z0 >= n_z || a0 >= n_actions {
            return Err(Error::InvalidArgument(format!(
                "z0 = {z0} or a0 = {a0} out of range"
            )));
        }
        Ok(Self {
            n_z,
            n_obs,
            n_actions,
            phi,
            z0,
            a0,
            labels: None,
        })
    }

    /// `Z_t = Y_t`.
    pub fn last_observation(n_obs: usize, n_actions: usize) -> Self {
        let phi = (0..n_obs)
            .flat_map(|_| (0..n_obs).flat_map(move |y| std::iter::repeat_n(y, n_actions)))
            .collect();
        Self::new(n_obs, n_obs, n_actions, phi, 0, 0).expect("well-formed")
    }

    /// A single agent state: the agent ignores everything it sees.
    pub fn constant(n_obs: usize, n_actions: usize) -> Self {
        Self::new(1, n_obs, n_actions, vec![0; n_obs * n_actions], 0, 0).expect("well-formed")
    }

    /// Sliding window over the last `m` observations (paired with the
    /// action that preceded each one when `with_actions`).
    ///
    /// Agent states are the windows reachable from the all-padding window
    /// `z0 = 0`, numbered in breadth-first order. Each update drops the
    /// oldest slot and appends the new one.
    pub fn frame_stack(
        m: usize,
        n_obs: usize,
        n_actions: usize,
        with_actions: bool,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "frame-stack window length must be at least 1".into(),
            ));
        }
        if n_obs == 0 || n_actions == 0 {
            return Err(Error::InvalidArgument(
                "frame-stack dimensions must be positive".into(),
            ));
        }
        let slot = |y: usize, a: usize| if with_actions { y * n_actions + a } else { y };
        let start: Vec<Option<usize>> = vec![None; m];
        let mut index: HashMap<Vec<Option<usize>>, usize> = HashMap::from([(start.clone(), 0)]);
        let mut windows = vec![start];
        let mut queue = VecDeque::from([0usize]);
        let mut edges: Vec<(usize, usize, usize, Vec<Option<usize>>)> = Vec::new();
        while let Some(z) = queue.pop_front() {
            for y in 0..n_obs {
                for a in 0..n_actions {
                    let mut next = windows[z][1..].to_vec();
                    next.push(Some(slot(y, a)));
                    if !index.contains_key(&next) {
                        index.insert(next.clone(), windows.len());
                        queue.push_back(windows.len());
                        windows.push(next.clone());
                    }
                    edges.push((z, y, a, next));
                }
            }
        }
        let n_z = windows.len();
        let mut phi = vec![0; n_z * n_obs * n_actions];
        for (z, y, a, next) in edges {
            phi[(z * n_obs + y) * n_actions + a] = index[&next];
        }
        let labels = windows
            .iter()
            .map(|w| {
                w.iter()
                    .map(|s| match s {
                        None => "_".to_string(),
                        Some(c) if with_actions => format!("{}/{}", c / n_actions, c % n_actions),
                        Some(c) => c.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        let mut machine = Self::new(n_z, n_obs, n_actions, phi, 0, 0)?;
        machine.labels = Some(labels);
        Ok(machine)
    }

    pub fn with_initial_action(mut self, a0: usize) -> Result<Self> {
        if a0 >= self.n_actions {
            return Err(Error::InvalidArgument(format!("a0 = {a0} out of range")));
        }
        self.a0 = a0;
        Ok(self)
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn z0(&self) -> usize {
        self.z0
    }

    pub fn a0(&self) -> usize {
        self.a0
    }

    pub fn phi_table(&self) -> &[usize] {
        &self.phi
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn update(&self, z: usize, y: usize, a: usize) -> usize {
        self.phi[(z * self.n_obs + y) * self.n_actions + a]
    }

    /// `z1 = φ(z0, y1, a0)`.
    #[inline]
    pub fn initial(&self, y1: usize) -> usize {
        self.update(self.z0, y1, self.a0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_window_rejected() {
        assert!(AgentStateMachine::frame_stack(0, 2, 2, true).is_err());
    }

    #[test]
    fn single_frame_with_actions_counts() {
        let m = AgentStateMachine::frame_stack(1, 2, 2, true).unwrap();
        assert_eq!(m.n_z(), 5);
    }

    #[test]
    fn single_frame_tracks_last_observation() {
        let fs = AgentStateMachine::frame_stack(1, 3, 2, false).unwrap();
        let obs = AgentStateMachine::last_observation(3, 2);
        // After the first update the frame stack is a relabelling of Z = Y.
        let ys = [2, 0, 1, 1, 2, 0];
        let acts = [1, 0, 0, 1, 1, 0];
        let (mut zf, mut zo) = (fs.initial(ys[0]), obs.initial(ys[0]));
        let mut relabel = std::collections::HashMap::new();
        relabel.insert(zf, zo);
        for i in 1..ys.len() {
            zf = fs.update(zf, ys[i], acts[i - 1]);
            zo = obs.update(zo, ys[i], acts[i - 1]);
            assert_eq!(*relabel.entry(zf).or_insert(zo), zo);
            assert_eq!(zo, ys[i]);
        }
    }

    #[test]
    fn bad_phi_rejected() {
        assert!(AgentStateMachine::new(2, 1, 1, vec![0, 2], 0, 0).is_err());
        assert!(AgentStateMachine::new(2, 1, 1, vec![0], 0, 0).is_err());
    }
}
