//! Backward characteristic tracing.
//!
//! The value carried to `(x_i, t^{n+1})` is read off the previous level at the
//! foot `x_i - v dt`. Feet inside the column are evaluated with the three-node
//! Lagrange interpolant centered at the nearest node (shifted inward at the
//! ends), which is the Lax-Wendroff stencil for a scalar equation. Feet left of
//! the inlet take the inlet value at the time the characteristic crossed `x = 0`.

use crate::error::{Error, Result};
use crate::field::ConcentrationField;
use crate::model::InjectionProfile;
use crate::num::Real;

/// `x - v dt`; negative results mean the characteristic entered through the inlet.
#[inline]
pub fn foot_of_characteristic<T: Real>(x: T, v: T, dt: T) -> T {
    x - v * dt
}

/// First node of the interpolation stencil for `x` and the three Lagrange weights.
#[inline]
pub fn stencil<T: Real>(x: T, dx: T, nodes: usize) -> (usize, [T; 3]) {
    debug_assert!(nodes >= 3);
    let pos = x / dx;
    let nearest = pos.round().to_usize().unwrap_or(0);
    let center = nearest.clamp(1, nodes - 2);
    let mut s = pos - T::from_count(center);
    // a foot on a node up to rounding in x / dx reproduces the nodal value exactly
    if s.abs() <= T::lit(8.0) * T::epsilon() * pos.abs().max(T::one()) {
        s = T::zero();
    }
    let half = T::lit(0.5);
    let weights = [
        half * s * (s - T::one()),
        T::one() - s * s,
        half * s * (s + T::one()),
    ];
    (center - 1, weights)
}

/// Interpolates every component of `field` at `x` into `out`.
pub fn interpolate_into<T: Real>(
    field: &ConcentrationField<T>,
    dx: T,
    x: T,
    out: &mut [T],
) -> Result<()> {
    let nodes = field.nodes();
    if nodes < 3 {
        return Err(Error::Dimension(format!(
            "quadratic interpolation needs 3 nodes, field has {nodes}"
        )));
    }
    let length = dx * T::from_count(nodes - 1);
    let slack = T::lit(1e-12) * length;
    if !(x >= -slack && x <= length + slack) {
        return Err(Error::invalid(format!(
            "interpolation point {x} outside [0, {length}]"
        )));
    }
    let (first, w) = stencil(x, dx, nodes);
    let (u0, u1, u2) = (
        field.node(first),
        field.node(first + 1),
        field.node(first + 2),
    );
    for (c, o) in out.iter_mut().enumerate() {
        *o = w[0] * u0[c] + w[1] * u1[c] + w[2] * u2[c];
    }
    Ok(())
}

/// Quadratic interpolant of `field` at `x`, one value per component.
pub fn quadratic_interpolate<T: Real>(
    field: &ConcentrationField<T>,
    dx: T,
    x: T,
) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); field.components()];
    interpolate_into(field, dx, x, &mut out)?;
    Ok(out)
}

/// The two perturbed feet `x - v dt +/- eta dt dx`, before any clamping.
pub fn perturbed_feet<T: Real>(x: T, v: T, dt: T, dx: T, eta: T) -> Result<(T, T)> {
    if !(eta > T::zero() && eta < T::one()) {
        return Err(Error::invalid(format!("eta must lie in (0, 1), got {eta}")));
    }
    let foot = foot_of_characteristic(x, v, dt);
    let delta = eta * dt * dx;
    Ok((foot + delta, foot - delta))
}

/// Time at which the characteristic through `foot < 0` (at level time
/// `t_foot`) crossed the inlet.
#[inline]
pub fn inflow_crossing_time<T: Real>(foot: T, t_foot: T, v: T) -> T {
    t_foot - foot / v
}

/// Inlet value carried by a characteristic whose foot lies left of the inlet.
pub fn inflow_trace<T: Real>(foot: T, t_foot: T, v: T, profile: &InjectionProfile<T>) -> Vec<T> {
    let mut out = vec![T::zero(); profile.components()];
    profile.value_into(inflow_crossing_time(foot, t_foot, v), &mut out);
    out
}

/// How a traced value was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FootRule<T> {
    /// Interpolated on nodes `first..first + 3`.
    Interior { first: usize },
    /// Taken from the inlet profile at the crossing time.
    Inflow { crossing: T },
}

/// Field values at the feet of the characteristics through every node.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedField<T> {
    values: Vec<T>,
    feet: Vec<T>,
    rules: Vec<FootRule<T>>,
    components: usize,
}

impl<T: Real> TracedField<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn node(&self, j: usize) -> &[T] {
        &self.values[j * self.components..(j + 1) * self.components]
    }

    pub fn feet(&self) -> &[T] {
        &self.feet
    }

    pub fn rules(&self) -> &[FootRule<T>] {
        &self.rules
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn nodes(&self) -> usize {
        self.feet.len()
    }

    /// Builds a traced field directly from node-major values (feet unknown).
    pub fn from_values(values: Vec<T>, components: usize) -> Self {
        let nodes = values.len() / components;
        Self {
            values,
            feet: vec![T::nan(); nodes],
            rules: vec![FootRule::Interior { first: 0 }; nodes],
            components,
        }
    }

    /// Overwrites component `c` with the values of `other` wherever `pick`
    /// prefers them.
    pub(crate) fn select_component(
        &mut self,
        c: usize,
        plus: &TracedField<T>,
        minus: &TracedField<T>,
        pick: impl Fn(T, T) -> T,
    ) {
        let m = self.components;
        for j in 0..self.nodes() {
            let k = j * m + c;
            self.values[k] = pick(plus.values[k], minus.values[k]);
        }
    }
}

/// Geometry needed to trace characteristics on a uniform grid.
#[derive(Debug, Clone, Copy)]
pub struct TraceGeometry<T> {
    pub dx: T,
    pub length: T,
    pub velocity: T,
    pub dt: T,
}

/// Traces every node of `state` (at time `state.time()`) back by one step,
/// with the feet displaced by `shift` (zero for the plain method, `+/- eta dt dx`
/// for the perturbed candidates).
pub fn trace_field<T: Real>(
    state: &ConcentrationField<T>,
    geometry: &TraceGeometry<T>,
    profile: &InjectionProfile<T>,
    shift: T,
) -> Result<TracedField<T>> {
    let nodes = state.nodes();
    let m = state.components();
    if nodes < 3 {
        return Err(Error::Dimension(format!(
            "tracing needs at least 3 nodes, field has {nodes}"
        )));
    }
    let mut values = vec![T::zero(); nodes * m];
    let mut feet = Vec::with_capacity(nodes);
    let mut rules = Vec::with_capacity(nodes);
    let t_foot = state.time();
    for j in 0..nodes {
        let x = T::from_count(j) * geometry.dx;
        let foot = foot_of_characteristic(x, geometry.velocity, geometry.dt) + shift;
        let out = &mut values[j * m..(j + 1) * m];
        if foot < T::zero() {
            let crossing = inflow_crossing_time(foot, t_foot, geometry.velocity);
            profile.value_into(crossing, out);
            feet.push(foot);
            rules.push(FootRule::Inflow { crossing });
        } else {
            let foot = foot.min(geometry.length);
            let (first, w) = stencil(foot, geometry.dx, nodes);
            let (u0, u1, u2) = (
                state.node(first),
                state.node(first + 1),
                state.node(first + 2),
            );
            for (c, o) in out.iter_mut().enumerate() {
                *o = w[0] * u0[c] + w[1] * u1[c] + w[2] * u2[c];
            }
            feet.push(foot);
            rules.push(FootRule::Interior { first });
        }
    }
    Ok(TracedField {
        values,
        feet,
        rules,
        components: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sampled(nodes: usize, dx: f64, f: impl Fn(f64) -> f64) -> ConcentrationField<f64> {
        ConcentrationField::sample(nodes, 1, dx, |x| vec![f(x)])
    }

    #[test]
    fn foot_arithmetic() {
        assert!((foot_of_characteristic(0.5f64, 1.0, 0.005) - 0.495).abs() < 1e-15);
        assert!(foot_of_characteristic(0.0, 0.3, 0.1) < 0.0);
        let dx = 0.01f64;
        let l = 1.0;
        assert!((foot_of_characteristic(l, 1.0, dx / 2.0) - (l - dx / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn nodes_are_reproduced_exactly() {
        let f = sampled(11, 0.1, |x| (3.0 * x).sin());
        for j in 0..11 {
            let v = quadratic_interpolate(&f, 0.1, j as f64 * 0.1).unwrap();
            assert_eq!(v[0], f.get(j, 0));
        }
    }

    #[test]
    fn cubic_error_scales_with_dx_cubed() {
        // max error over a fixed set of points for u = x^3 on successively finer grids
        let mut errs = Vec::new();
        for &n in &[10usize, 20, 40, 80] {
            let dx = 1.0 / n as f64;
            let f = sampled(n + 1, dx, |x| x * x * x);
            let mut worst: f64 = 0.0;
            for k in 0..997 {
                let x = (k as f64 + 0.5) / 997.0;
                let v = quadratic_interpolate(&f, dx, x).unwrap()[0];
                worst = worst.max((v - x * x * x).abs());
            }
            assert!(worst <= 0.5 * dx.powi(3), "n={n} err={worst}");
            errs.push(worst);
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 2.8, "observed order {order}");
        }
    }

    #[test]
    fn too_few_nodes() {
        let f = sampled(2, 0.5, |x| x);
        assert!(quadratic_interpolate(&f, 0.5, 0.2).is_err());
    }

    #[test]
    fn perturbed_feet_values() {
        let (p, m) = perturbed_feet(0.5, 1.0, 0.005, 0.01, 0.5).unwrap();
        assert!((p - 0.495025f64).abs() < 1e-15);
        assert!((m - 0.494975f64).abs() < 1e-15);
        let (p, m) = perturbed_feet(0.5, 1.0, 0.005, 0.01, 1e-300).unwrap();
        assert_eq!(p, 0.495);
        assert_eq!(m, 0.495);
        assert!(perturbed_feet(0.5, 1.0, 0.005, 0.01, 0.0).is_err());
        assert!(perturbed_feet(0.5, 1.0, 0.005, 0.01, 1.0).is_err());
    }

    #[test]
    fn inflow_crossing_rule() {
        let profile = InjectionProfile::rectangular(vec![1.0], 3.0);
        // node at x = 0.02 traced from t^{n+1} = 2.0 with v = 1: crossing at 1.98
        let foot = foot_of_characteristic(0.02, 1.0, 0.035);
        assert!((inflow_crossing_time(foot, 2.0 - 0.035, 1.0) - 1.98f64).abs() < 1e-12);
        assert_eq!(inflow_trace(foot, 2.0 - 0.035, 1.0, &profile), vec![1.0]);
        assert_eq!(inflow_trace(foot, 4.0, 1.0, &profile), vec![0.0]);
        // crossing exactly at t_inj is still inside the pulse
        assert_eq!(inflow_trace(-0.5, 2.5, 1.0, &profile), vec![1.0]);
    }

    proptest! {
        #[test]
        fn quadratics_are_reproduced(c0 in -5.0f64..5.0, c1 in -5.0f64..5.0, c2 in -5.0f64..5.0,
                                     n in 3usize..60, t in 0.0f64..=1.0) {
            let dx = 1.0 / n as f64;
            let f = sampled(n + 1, dx, |x| c0 + c1 * x + c2 * x * x);
            let v = quadratic_interpolate(&f, dx, t).unwrap()[0];
            prop_assert!((v - (c0 + c1 * t + c2 * t * t)).abs() <= 1e-13);
        }

        #[test]
        fn perturbations_are_symmetric(x in 0.0f64..1.0, v in 0.1f64..2.0, dt in 1e-4f64..0.05,
                                       dx in 1e-3f64..0.1, eta in 0.01f64..0.99) {
            let (p, m) = perturbed_feet(x, v, dt, dx, eta).unwrap();
            let foot = foot_of_characteristic(x, v, dt);
            prop_assert!(((p + m) / 2.0 - foot).abs() <= 1e-15 * (1.0 + foot.abs()));
            prop_assert!(p - m < 2.0 * dx);
        }

        #[test]
        fn constant_field_traces_to_constant(c in 0.0f64..10.0, n in 3usize..40, cfl in 0.05f64..1.9,
                                             eta in 0.01f64..0.99, t in 0.0f64..1.0) {
            let dx = 1.0 / n as f64;
            let dt = cfl * dx;
            let state = ConcentrationField::from_values(vec![c; n + 1], 1, 0, t).unwrap();
            let profile = InjectionProfile::rectangular(vec![c], 1e9);
            let geom = TraceGeometry { dx, length: 1.0, velocity: 1.0, dt };
            for shift in [0.0, eta * dt * dx, -eta * dt * dx] {
                let traced = trace_field(&state, &geom, &profile, shift).unwrap();
                for v in traced.values() {
                    prop_assert!((v - c).abs() <= 1e-12 * (1.0 + c));
                }
            }
        }
    }
}
