//! Competitive Langmuir isotherm
//!
//! ```text
//! q_i = a_i u_i / S,   S = 1 + sum_j b_j u_j
//! dq_i/du_j = (a_i delta_ij S - a_i u_i b_j) / S^2
//! ```
//!
//! plus the divided-difference derivative used by the inner iteration of the
//! characteristic stepper.

use crate::error::{Error, Result};
use crate::model::SecantFreeze;
use crate::num::Real;

/// Below this increment the secant derivative falls back to the analytic one.
pub const SECANT_FALLBACK: f64 = 1e-10;

/// Langmuir constants `a_i > 0`, `b_i >= 0` and the phase ratio `F >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsothermParams<T> {
    a: Vec<T>,
    b: Vec<T>,
    phase_ratio: T,
}

impl<T: Real> IsothermParams<T> {
    pub fn new(a: Vec<T>, b: Vec<T>, phase_ratio: T) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::invalid("isotherm: no components"));
        }
        if a.len() != b.len() {
            return Err(Error::invalid(format!(
                "isotherm: a has {} entries but b has {}",
                a.len(),
                b.len()
            )));
        }
        for (i, ai) in a.iter().enumerate() {
            if !(*ai > T::zero() && ai.is_finite()) {
                return Err(Error::invalid(format!(
                    "isotherm.a[{i}] must be positive, got {ai}"
                )));
            }
        }
        for (i, bi) in b.iter().enumerate() {
            if !(*bi >= T::zero() && bi.is_finite()) {
                return Err(Error::invalid(format!(
                    "isotherm.b[{i}] must be non-negative, got {bi}"
                )));
            }
        }
        if !(phase_ratio >= T::zero() && phase_ratio.is_finite()) {
            return Err(Error::invalid(format!(
                "phase ratio must be non-negative, got {phase_ratio}"
            )));
        }
        Ok(Self { a, b, phase_ratio })
    }

    pub fn components(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn phase_ratio(&self) -> T {
        self.phase_ratio
    }

    /// True when every `b_i` is zero.
    pub fn is_linear(&self) -> bool {
        self.b.iter().all(|b| *b == T::zero())
    }

    /// `S = 1 + sum_j b_j u_j`, rejected when not positive.
    #[inline]
    pub fn denominator(&self, u: &[T]) -> Result<T> {
        let s = T::one()
            + self
                .b
                .iter()
                .zip(u)
                .fold(T::zero(), |acc, (b, u)| acc + *b * *u);
        if s > T::zero() {
            Ok(s)
        } else {
            Err(Error::NonPhysical {
                denominator: s.as_f64(),
            })
        }
    }

    /// Writes `q(u)` into `q` and returns the denominator.
    #[inline]
    pub fn q_into(&self, u: &[T], q: &mut [T]) -> Result<T> {
        let s = self.denominator(u)?;
        for ((qi, ai), ui) in q.iter_mut().zip(&self.a).zip(u) {
            *qi = *ai * *ui / s;
        }
        Ok(s)
    }

    /// `q_i(u)` for a single component.
    #[inline]
    pub fn q_component(&self, i: usize, u: &[T]) -> Result<T> {
        let s = self.denominator(u)?;
        Ok(self.a[i] * u[i] / s)
    }

    /// Writes the row-major Jacobian `dq_i/du_j` into `out` (`m * m` entries).
    #[inline]
    pub fn jacobian_into(&self, u: &[T], out: &mut [T]) -> Result<()> {
        let m = self.components();
        let s = self.denominator(u)?;
        let s2 = s * s;
        for i in 0..m {
            let aiu = self.a[i] * u[i];
            for j in 0..m {
                let diag = if i == j { self.a[i] * s } else { T::zero() };
                out[i * m + j] = (diag - aiu * self.b[j]) / s2;
            }
        }
        Ok(())
    }

    /// Writes the inner-iteration coupling matrix into `out`.
    ///
    /// Off-diagonal entries are the analytic Jacobian at `u_old`. Diagonal
    /// entries are divided differences of `q_i` in `u_i` between `u_old` and
    /// `u_new`, with the other components frozen according to `freeze`; an
    /// increment below [`SECANT_FALLBACK`] uses the analytic diagonal instead.
    pub fn secant_into(
        &self,
        u_old: &[T],
        u_new: &[T],
        freeze: SecantFreeze,
        scratch: &mut [T],
        out: &mut [T],
    ) -> Result<()> {
        let m = self.components();
        self.jacobian_into(u_old, out)?;
        let tol = T::lit(SECANT_FALLBACK);
        for i in 0..m {
            let du = u_new[i] - u_old[i];
            if du.abs() < tol {
                continue;
            }
            let base = match freeze {
                SecantFreeze::Old => u_old,
                SecantFreeze::Current => u_new,
            };
            scratch.copy_from_slice(base);
            scratch[i] = u_new[i];
            let q_hi = self.q_component(i, scratch)?;
            scratch[i] = u_old[i];
            let q_lo = self.q_component(i, scratch)?;
            out[i * m + i] = (q_hi - q_lo) / du;
        }
        Ok(())
    }
}

/// Stationary-phase concentrations with the cached denominator `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsothermEval<T> {
    pub q: Vec<T>,
    pub denominator: T,
}

/// Row-major `m x m` matrix `A[i][j] = dq_i/du_j` with its evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix<T> {
    pub m: usize,
    pub entries: Vec<T>,
    pub point: Vec<T>,
}

impl<T: Real> CouplingMatrix<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.m + j]
    }
}

pub fn langmuir_q<T: Real>(u: &[T], p: &IsothermParams<T>) -> Result<IsothermEval<T>> {
    check_len(u, p)?;
    let mut q = vec![T::zero(); p.components()];
    let denominator = p.q_into(u, &mut q)?;
    Ok(IsothermEval { q, denominator })
}

pub fn langmuir_jacobian<T: Real>(u: &[T], p: &IsothermParams<T>) -> Result<CouplingMatrix<T>> {
    check_len(u, p)?;
    let m = p.components();
    let mut entries = vec![T::zero(); m * m];
    p.jacobian_into(u, &mut entries)?;
    Ok(CouplingMatrix {
        m,
        entries,
        point: u.to_vec(),
    })
}

/// Secant coupling matrix with the other components frozen at `u_old`.
pub fn secant_derivative<T: Real>(
    u_old: &[T],
    u_new: &[T],
    p: &IsothermParams<T>,
) -> Result<CouplingMatrix<T>> {
    secant_derivative_with(u_old, u_new, p, SecantFreeze::Old)
}

pub fn secant_derivative_with<T: Real>(
    u_old: &[T],
    u_new: &[T],
    p: &IsothermParams<T>,
    freeze: SecantFreeze,
) -> Result<CouplingMatrix<T>> {
    check_len(u_old, p)?;
    check_len(u_new, p)?;
    let m = p.components();
    let mut entries = vec![T::zero(); m * m];
    let mut scratch = vec![T::zero(); m];
    p.secant_into(u_old, u_new, freeze, &mut scratch, &mut entries)?;
    Ok(CouplingMatrix {
        m,
        entries,
        point: u_old.to_vec(),
    })
}

fn check_len<T: Real>(u: &[T], p: &IsothermParams<T>) -> Result<()> {
    if u.len() == p.components() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "concentration vector has {} entries, isotherm has {} components",
            u.len(),
            p.components()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binary() -> IsothermParams<f64> {
        IsothermParams::new(vec![0.5, 1.0], vec![0.05, 0.1], 1.5).unwrap()
    }

    #[test]
    fn zero_concentration() {
        let e = langmuir_q(&[0.0, 0.0], &binary()).unwrap();
        assert_eq!(e.q, vec![0.0, 0.0]);
        let j = langmuir_jacobian(&[0.0, 0.0], &binary()).unwrap();
        assert_eq!(j.entries, vec![0.5, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn linear_single_component() {
        let p = IsothermParams::new(vec![1.0], vec![0.0], 1.5).unwrap();
        assert_eq!(langmuir_q(&[1.0], &p).unwrap().q, vec![1.0]);
        assert!(p.is_linear());
    }

    #[test]
    fn binary_at_feed() {
        let e = langmuir_q(&[10.0, 10.0], &binary()).unwrap();
        assert_eq!(e.denominator, 2.5);
        assert!((e.q[0] - 2.0).abs() < 1e-15);
        assert!((e.q[1] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn jacobian_hand_value() {
        let p = IsothermParams::new(vec![1.0], vec![1.0], 1.0).unwrap();
        let j = langmuir_jacobian(&[1.0], &p).unwrap();
        assert_eq!(j.entries, vec![0.25]);
    }

    #[test]
    fn secant_cases() {
        let p = IsothermParams::new(vec![1.0], vec![1.0], 1.0).unwrap();
        let s = secant_derivative(&[0.0], &[1.0], &p).unwrap();
        assert!((s.entries[0] - 0.5f64).abs() < 1e-15);

        let u = [3.0, 1.5];
        let s = secant_derivative(&u, &u, &binary()).unwrap();
        let j = langmuir_jacobian(&u, &binary()).unwrap();
        assert_eq!(s.entries, j.entries);
    }

    #[test]
    fn secant_off_diagonals_are_analytic() {
        let old = [3.0, 1.5];
        let new = [3.4, 1.1];
        let j = langmuir_jacobian(&old, &binary()).unwrap();
        for freeze in [SecantFreeze::Old, SecantFreeze::Current] {
            let s = secant_derivative_with(&old, &new, &binary(), freeze).unwrap();
            assert_eq!(s.get(0, 1), j.get(0, 1));
            assert_eq!(s.get(1, 0), j.get(1, 0));
        }
    }

    #[test]
    fn secant_converges_linearly_to_analytic() {
        let p = binary();
        let old = [2.0, 4.0];
        let j = langmuir_jacobian(&old, &p).unwrap();
        let mut prev_ratio = None;
        for k in 1..8 {
            let h = 10f64.powi(-k);
            let new = [old[0] + h, old[1] - h];
            let s = secant_derivative(&old, &new, &p).unwrap();
            let err = (s.get(0, 0) - j.get(0, 0))
                .abs()
                .max((s.get(1, 1) - j.get(1, 1)).abs());
            let ratio = err / h;
            assert!(ratio < 0.1, "secant error {err} at h={h}");
            if let Some(r) = prev_ratio {
                let r: f64 = r;
                // constant C in |secant - analytic| <= C |du|
                assert!((ratio - r).abs() < 0.05);
            }
            prev_ratio = Some(ratio);
        }
    }

    #[test]
    fn negative_denominator_is_rejected() {
        let p = IsothermParams::new(vec![1.0], vec![1.0], 1.0).unwrap();
        assert!(matches!(
            langmuir_q(&[-2.0], &p),
            Err(Error::NonPhysical { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            langmuir_q(&[1.0], &binary()),
            Err(Error::Dimension(_))
        ));
    }

    fn central_difference(u: &[f64], p: &IsothermParams<f64>, h: f64) -> Vec<f64> {
        let m = u.len();
        let mut out = vec![0.0; m * m];
        for j in 0..m {
            let mut up = u.to_vec();
            let mut dn = u.to_vec();
            up[j] += h;
            dn[j] -= h;
            let qp = langmuir_q(&up, p).unwrap().q;
            let qm = langmuir_q(&dn, p).unwrap().q;
            for i in 0..m {
                out[i * m + j] = (qp[i] - qm[i]) / (2.0 * h);
            }
        }
        out
    }

    fn params_strategy() -> impl Strategy<Value = (IsothermParams<f64>, Vec<f64>)> {
        (1usize..=3).prop_flat_map(|m| {
            (
                proptest::collection::vec(0.1f64..3.0, m),
                proptest::collection::vec(0.0f64..1.0, m),
                0.0f64..3.0,
                proptest::collection::vec(0.0f64..10.0, m),
            )
                .prop_map(|(a, b, f, u)| (IsothermParams::new(a, b, f).unwrap(), u))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn jacobian_matches_finite_differences((p, u) in params_strategy()) {
            // keep the stencil inside the physical region
            let u: Vec<f64> = u.iter().map(|x| x + 1e-5).collect();
            let j = langmuir_jacobian(&u, &p).unwrap();
            let fd = central_difference(&u, &p, 1e-6);
            for (x, y) in j.entries.iter().zip(&fd) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
        }

        #[test]
        fn saturation_and_sign_structure((p, u) in params_strategy()) {
            let e = langmuir_q(&u, &p).unwrap();
            prop_assert!(e.denominator >= 1.0);
            let j = langmuir_jacobian(&u, &p).unwrap();
            let m = p.components();
            for i in 0..m {
                if p.b()[i] > 0.0 {
                    prop_assert!(e.q[i] < p.a()[i] / p.b()[i]);
                }
                prop_assert!(e.q[i] >= 0.0);
                for k in 0..m {
                    if i == k {
                        prop_assert!(j.get(i, k) > 0.0);
                    } else {
                        prop_assert!(j.get(i, k) <= 0.0);
                    }
                }
            }
        }

        #[test]
        fn strictly_increasing_in_own_component((p, u) in params_strategy(), i in 0usize..3, h in 1e-3f64..1.0) {
            let i = i % p.components();
            let mut hi = u.clone();
            hi[i] += h;
            let lo = langmuir_q(&u, &p).unwrap().q[i];
            let up = langmuir_q(&hi, &p).unwrap().q[i];
            prop_assert!(up > lo);
        }

        #[test]
        fn linear_case_is_exact(a in proptest::collection::vec(0.1f64..3.0, 1..4), scale in 0.0f64..10.0) {
            let m = a.len();
            let p = IsothermParams::new(a.clone(), vec![0.0; m], 1.0).unwrap();
            let u: Vec<f64> = (0..m).map(|k| scale * (k as f64 + 1.0)).collect();
            let q = langmuir_q(&u, &p).unwrap().q;
            for k in 0..m {
                prop_assert_eq!(q[k], a[k] * u[k]);
            }
            let j = langmuir_jacobian(&u, &p).unwrap();
            for (r, ar) in a.iter().enumerate() {
                for c in 0..m {
                    prop_assert_eq!(j.get(r, c), if r == c { *ar } else { 0.0 });
                }
            }
        }
    }
}
