//! Memoized n-step transition matrices and open-loop products.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{ModelError, OcmModel, OpenLoopActionSet, Result};
use crate::Matrix;

/// Growable cache of `P_a^n`, one list per action.
///
/// `get(a, n)` costs one matrix product per power not yet cached. The cache
/// is owned, so callers that share it across threads fill it first with
/// [`TransitionPowers::fill`] and then hand out shared references.
#[derive(Debug, Clone)]
pub struct TransitionPowers {
    base: Vec<Matrix>,
    // powers[a][n - 1] = P_a^n
    powers: Vec<Vec<Matrix>>,
}

impl TransitionPowers {
    pub fn new(model: &OcmModel) -> Self {
        Self::from_matrices(model.transitions().to_vec())
    }

    pub fn from_matrices(base: Vec<Matrix>) -> Self {
        let powers = base.iter().map(|p| vec![p.clone()]).collect();
        TransitionPowers { base, powers }
    }

    pub fn num_actions(&self) -> usize {
        self.base.len()
    }

    pub fn num_states(&self) -> usize {
        self.base[0].nrows()
    }

    /// Extends every action's cache up to `P^max_n`.
    pub fn fill(&mut self, max_n: usize) {
        for a in 0..self.base.len() {
            self.extend(a, max_n);
        }
    }

    fn extend(&mut self, a: usize, n: usize) {
        let list = &mut self.powers[a];
        while list.len() < n {
            let next = list.last().expect("cache starts with P^1") * &self.base[a];
            list.push(next);
        }
    }

    /// `P_a^n`; `n = 0` yields the identity.
    pub fn get(&mut self, a: usize, n: usize) -> Result<Matrix> {
        self.check_action(a)?;
        if n == 0 {
            let l = self.num_states();
            return Ok(Matrix::identity(l, l));
        }
        self.extend(a, n);
        Ok(self.powers[a][n - 1].clone())
    }

    /// Borrowing access to an already cached power (`1 <= n <= cached`).
    pub fn cached(&self, a: usize, n: usize) -> Option<&Matrix> {
        if n == 0 {
            return None;
        }
        self.powers.get(a)?.get(n - 1)
    }

    /// Number of powers cached for action `a`.
    pub fn cached_len(&self, a: usize) -> usize {
        self.powers[a].len()
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.base.len() {
            return Err(ModelError::InvalidAction {
                action: a,
                num_actions: self.base.len(),
            });
        }
        Ok(())
    }

    pub fn into_lists(self) -> Vec<Vec<Matrix>> {
        self.powers
    }
}

/// `P_a^n` for a model; `n = 0` yields the identity.
pub fn n_step_matrix(model: &OcmModel, a: usize, n: usize) -> Result<Matrix> {
    let l = model.num_states();
    let p = model.transition(a)?;
    let mut out = Matrix::identity(l, l);
    for _ in 0..n {
        out = out * p;
    }
    Ok(out)
}

/// Ordered product `P_{f_θ(1)} ⋯ P_{f_θ(n)}`.
pub fn open_loop_matrix(
    model: &OcmModel,
    actions: &OpenLoopActionSet,
    theta: usize,
    n: usize,
) -> Result<Matrix> {
    if theta >= actions.len() {
        return Err(ModelError::InvalidParameter {
            name: "theta",
            reason: alloc::format!("index {theta} out of range"),
        });
    }
    if n > actions.steps() {
        return Err(ModelError::InvalidParameter {
            name: "n",
            reason: alloc::format!("{n} exceeds sequence length {}", actions.steps()),
        });
    }
    let l = model.num_states();
    let mut out = Matrix::identity(l, l);
    for k in 1..=n {
        out = out * model.transition(actions.action(theta, k))?;
    }
    Ok(out)
}

/// All open-loop products `Q_θ^n` for `n = 1..=max_n`, built incrementally.
pub fn open_loop_products(
    model: &OcmModel,
    actions: &OpenLoopActionSet,
    max_n: usize,
) -> Result<Vec<Vec<Matrix>>> {
    if max_n > actions.steps() {
        return Err(ModelError::InvalidParameter {
            name: "horizon",
            reason: alloc::format!(
                "open-loop sequences cover {} steps, need {max_n}",
                actions.steps()
            ),
        });
    }
    let mut out = Vec::with_capacity(actions.len());
    for theta in 0..actions.len() {
        let mut list: Vec<Matrix> = Vec::with_capacity(max_n);
        for k in 1..=max_n {
            let p = model.transition(actions.action(theta, k))?;
            let next = match list.last() {
                Some(prev) => prev * p,
                None => p.clone(),
            };
            list.push(next);
        }
        out.push(list);
    }
    Ok(out)
}
