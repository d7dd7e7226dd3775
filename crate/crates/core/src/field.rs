use crate::error::{Error, Result};
use crate::num::Real;

/// Mobile-phase concentrations of `m` components on the `n_x + 1` grid nodes
/// at time level `n`, stored node-major (`values[node * m + component]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationField<T> {
    values: Vec<T>,
    components: usize,
    level: usize,
    time: T,
}

impl<T: Real> ConcentrationField<T> {
    pub fn zeros(nodes: usize, components: usize) -> Self {
        Self {
            values: vec![T::zero(); nodes * components],
            components,
            level: 0,
            time: T::zero(),
        }
    }

    pub fn from_values(values: Vec<T>, components: usize, level: usize, time: T) -> Result<Self> {
        if components == 0 || !values.len().is_multiple_of(components) {
            return Err(Error::Dimension(format!(
                "{} values cannot be split into {components} components",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite concentration {bad}")));
        }
        Ok(Self {
            values,
            components,
            level,
            time,
        })
    }

    /// Samples `f(x)` (one value per component) on nodes `0, dx, ..., (nodes-1) dx`.
    pub fn sample(nodes: usize, components: usize, dx: T, f: impl Fn(T) -> Vec<T>) -> Self {
        let mut values = Vec::with_capacity(nodes * components);
        for j in 0..nodes {
            let v = f(T::from_count(j) * dx);
            debug_assert_eq!(v.len(), components);
            values.extend_from_slice(&v);
        }
        Self {
            values,
            components,
            level: 0,
            time: T::zero(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.components
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub(crate) fn set_level(&mut self, level: usize, time: T) {
        self.level = level;
        self.time = time;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// All components at one node.
    #[inline]
    pub fn node(&self, j: usize) -> &[T] {
        &self.values[j * self.components..(j + 1) * self.components]
    }

    #[inline]
    pub fn node_mut(&mut self, j: usize) -> &mut [T] {
        let m = self.components;
        &mut self.values[j * m..(j + 1) * m]
    }

    #[inline]
    pub fn get(&self, j: usize, c: usize) -> T {
        self.values[j * self.components + c]
    }

    /// One component along the whole column.
    pub fn component(&self, c: usize) -> Vec<T> {
        self.values
            .iter()
            .skip(c)
            .step_by(self.components)
            .copied()
            .collect()
    }

    pub fn outlet(&self) -> &[T] {
        self.node(self.nodes() - 1)
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }
}
