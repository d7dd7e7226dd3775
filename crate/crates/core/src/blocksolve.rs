//! Implicit step operator and its block-tridiagonal solver.
//!
//! Row `j` of the system couples the `m` components at node `j` through
//! `I + F A_j` and the neighbours through the implicit diffusion stencil:
//!
//! ```text
//! (I + F A_j) u_j - r (u_{j+1} - 2 u_j + u_{j-1}) = u~_j + F A_j u^n_j,   r = D dt / dx^2
//! ```
//!
//! Node 0 carries the inlet Dirichlet value; node `N` closes the zero-gradient
//! outlet with a mirrored ghost node `u_{N+1} = u_{N-1}`.

use crate::characteristics::TracedField;
use crate::error::{Error, Result};
use crate::field::ConcentrationField;
use crate::num::Real;

/// One `m x m` coupling block per grid node, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBlocks<T> {
    m: usize,
    entries: Vec<T>,
}

impl<T: Real> CouplingBlocks<T> {
    pub fn zeros(nodes: usize, m: usize) -> Self {
        Self {
            m,
            entries: vec![T::zero(); nodes * m * m],
        }
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn nodes(&self) -> usize {
        self.entries.len() / (self.m * self.m)
    }

    #[inline]
    pub fn block(&self, j: usize) -> &[T] {
        let mm = self.m * self.m;
        &self.entries[j * mm..(j + 1) * mm]
    }

    #[inline]
    pub fn block_mut(&mut self, j: usize) -> &mut [T] {
        let mm = self.m * self.m;
        &mut self.entries[j * mm..(j + 1) * mm]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }
}

/// Scalar coefficients of the implicit step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients<T> {
    pub phase_ratio: T,
    /// `D dt / dx^2`.
    pub diffusion_number: T,
}

impl<T: Real> StepCoefficients<T> {
    pub fn new(phase_ratio: T, diffusion: T, dt: T, dx: T) -> Self {
        Self {
            phase_ratio,
            diffusion_number: diffusion * dt / (dx * dx),
        }
    }
}

/// Block-tridiagonal matrix with right-hand side. `lower` of row 0 and
/// `upper` of the last row are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonalSystem<T> {
    m: usize,
    rows: usize,
    lower: Vec<T>,
    diag: Vec<T>,
    upper: Vec<T>,
    rhs: Vec<T>,
}

impl<T: Real> BlockTridiagonalSystem<T> {
    pub fn zeros(rows: usize, m: usize) -> Self {
        let mm = m * m;
        Self {
            m,
            rows,
            lower: vec![T::zero(); rows * mm],
            diag: vec![T::zero(); rows * mm],
            upper: vec![T::zero(); rows * mm],
            rhs: vec![T::zero(); rows * m],
        }
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn lower(&self, i: usize) -> &[T] {
        block(&self.lower, self.m, i)
    }

    pub fn diag(&self, i: usize) -> &[T] {
        block(&self.diag, self.m, i)
    }

    pub fn upper(&self, i: usize) -> &[T] {
        block(&self.upper, self.m, i)
    }

    pub fn lower_mut(&mut self, i: usize) -> &mut [T] {
        block_mut(&mut self.lower, self.m, i)
    }

    pub fn diag_mut(&mut self, i: usize) -> &mut [T] {
        block_mut(&mut self.diag, self.m, i)
    }

    pub fn upper_mut(&mut self, i: usize) -> &mut [T] {
        block_mut(&mut self.upper, self.m, i)
    }

    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }

    pub fn rhs_mut(&mut self) -> &mut [T] {
        &mut self.rhs
    }

    /// `M u`.
    pub fn apply(&self, u: &[T]) -> Vec<T> {
        let m = self.m;
        let mut out = vec![T::zero(); self.rows * m];
        for i in 0..self.rows {
            let o = &mut out[i * m..(i + 1) * m];
            mat_vec_acc(self.diag(i), &u[i * m..(i + 1) * m], o);
            if i > 0 {
                mat_vec_acc(self.lower(i), &u[(i - 1) * m..i * m], o);
            }
            if i + 1 < self.rows {
                mat_vec_acc(self.upper(i), &u[(i + 1) * m..(i + 2) * m], o);
            }
        }
        out
    }

    /// `max |M u - rhs|`.
    pub fn residual(&self, u: &[T]) -> T {
        let mu = self.apply(u);
        crate::num::max_abs_diff(&mu, &self.rhs)
    }

    /// Row-major dense copy of the matrix (for testing and debugging).
    pub fn to_dense(&self) -> Vec<T> {
        let m = self.m;
        let n = self.rows * m;
        let mut dense = vec![T::zero(); n * n];
        let mut put = |bi: usize, bj: usize, blk: &[T]| {
            for r in 0..m {
                for c in 0..m {
                    dense[(bi * m + r) * n + bj * m + c] = blk[r * m + c];
                }
            }
        };
        for i in 0..self.rows {
            put(i, i, self.diag(i));
            if i > 0 {
                put(i, i - 1, self.lower(i));
            }
            if i + 1 < self.rows {
                put(i, i + 1, self.upper(i));
            }
        }
        dense
    }
}

/// Builds the implicit step system from the traced field, the previous level,
/// the per-node coupling blocks and the inlet value at the new level.
pub fn assemble<T: Real>(
    traced: &TracedField<T>,
    u_prev: &ConcentrationField<T>,
    blocks: &CouplingBlocks<T>,
    coeffs: StepCoefficients<T>,
    inlet: &[T],
) -> Result<BlockTridiagonalSystem<T>> {
    let mut system = BlockTridiagonalSystem::zeros(u_prev.nodes(), u_prev.components());
    assemble_into(traced, u_prev, blocks, coeffs, inlet, &mut system)?;
    Ok(system)
}

/// [`assemble`] into preallocated storage.
pub fn assemble_into<T: Real>(
    traced: &TracedField<T>,
    u_prev: &ConcentrationField<T>,
    blocks: &CouplingBlocks<T>,
    coeffs: StepCoefficients<T>,
    inlet: &[T],
    system: &mut BlockTridiagonalSystem<T>,
) -> Result<()> {
    let m = u_prev.components();
    let nodes = u_prev.nodes();
    if traced.components() != m || blocks.components() != m || inlet.len() != m {
        return Err(Error::Dimension(format!(
            "component counts differ: state {m}, traced {}, blocks {}, inlet {}",
            traced.components(),
            blocks.components(),
            inlet.len()
        )));
    }
    if traced.nodes() != nodes || blocks.nodes() != nodes {
        return Err(Error::Dimension(format!(
            "node counts differ: state {nodes}, traced {}, blocks {}",
            traced.nodes(),
            blocks.nodes()
        )));
    }
    if nodes < 3 {
        return Err(Error::Dimension(format!("{nodes} nodes, need at least 3")));
    }
    if system.rows != nodes || system.m != m {
        *system = BlockTridiagonalSystem::zeros(nodes, m);
    }

    let f = coeffs.phase_ratio;
    let r = coeffs.diffusion_number;
    let two = T::lit(2.0);

    // inlet: u_0 = g(t^{n+1})
    set_scaled_identity(system.diag_mut(0), m, T::one());
    set_scaled_identity(system.upper_mut(0), m, T::zero());
    system.rhs[..m].copy_from_slice(inlet);

    let last = nodes - 1;
    for j in 1..nodes {
        let a = blocks.block(j);
        {
            let d = system.diag_mut(j);
            for row in 0..m {
                for col in 0..m {
                    let id = if row == col {
                        T::one() + two * r
                    } else {
                        T::zero()
                    };
                    d[row * m + col] = id + f * a[row * m + col];
                }
            }
        }
        let off = if j == last { two * r } else { r };
        set_scaled_identity(system.lower_mut(j), m, -off);
        if j < last {
            set_scaled_identity(system.upper_mut(j), m, -r);
        }
        let prev = u_prev.node(j);
        let tr = traced.node(j);
        let rhs = &mut system.rhs[j * m..(j + 1) * m];
        for row in 0..m {
            let mut acc = tr[row];
            for col in 0..m {
                acc += f * a[row * m + col] * prev[col];
            }
            rhs[row] = acc;
        }
    }
    Ok(())
}

/// Solves the system by block Thomas elimination.
pub fn solve<T: Real>(system: &BlockTridiagonalSystem<T>) -> Result<Vec<T>> {
    let mut solver = BlockThomas::new();
    let mut out = vec![T::zero(); system.rows * system.m];
    solver.solve_into(system, &mut out)?;
    Ok(out)
}

/// Reusable workspace for block Thomas elimination. Each pivot block is
/// factored by LU with partial pivoting; there is no pivoting across blocks.
#[derive(Debug, Clone, Default)]
pub struct BlockThomas<T> {
    c_prime: Vec<T>,
    d_prime: Vec<T>,
    pivot_block: Vec<T>,
    perm: Vec<usize>,
    tmp: Vec<T>,
}

impl<T: Real> BlockThomas<T> {
    pub fn new() -> Self {
        Self {
            c_prime: Vec::new(),
            d_prime: Vec::new(),
            pivot_block: Vec::new(),
            perm: Vec::new(),
            tmp: Vec::new(),
        }
    }

    pub fn solve_into(&mut self, system: &BlockTridiagonalSystem<T>, out: &mut [T]) -> Result<()> {
        let m = system.m;
        let n = system.rows;
        let mm = m * m;
        if out.len() != n * m {
            return Err(Error::Dimension(format!(
                "solution buffer has {} entries, expected {}",
                out.len(),
                n * m
            )));
        }
        if n == 0 {
            return Ok(());
        }
        self.c_prime.resize(n * mm, T::zero());
        self.d_prime.resize(n * m, T::zero());
        self.pivot_block.resize(mm, T::zero());
        self.perm.resize(m, 0);
        self.tmp.resize(m, T::zero());

        for i in 0..n {
            // pivot = D_i - L_i C'_{i-1};  d = r_i - L_i d'_{i-1}
            self.pivot_block.copy_from_slice(system.diag(i));
            self.d_prime[i * m..(i + 1) * m].copy_from_slice(&system.rhs[i * m..(i + 1) * m]);
            if i > 0 {
                let l = system.lower(i);
                let (done, rest) = self.d_prime.split_at_mut(i * m);
                let prev_d = &done[(i - 1) * m..];
                let d = &mut rest[..m];
                let prev_c = &self.c_prime[(i - 1) * mm..i * mm];
                for r in 0..m {
                    for c in 0..m {
                        let mut acc = T::zero();
                        for k in 0..m {
                            acc += l[r * m + k] * prev_c[k * m + c];
                        }
                        self.pivot_block[r * m + c] -= acc;
                    }
                    let mut acc = T::zero();
                    for k in 0..m {
                        acc += l[r * m + k] * prev_d[k];
                    }
                    d[r] -= acc;
                }
            }
            lu_factor(&mut self.pivot_block, m, &mut self.perm)
                .map_err(|_| Error::SingularBlock { node: i })?;
            lu_solve(
                &self.pivot_block,
                m,
                &self.perm,
                &mut self.d_prime[i * m..(i + 1) * m],
            );
            if i + 1 < n {
                // C'_i = pivot^{-1} U_i, column by column
                let u = system.upper(i);
                for c in 0..m {
                    for r in 0..m {
                        self.tmp[r] = u[r * m + c];
                    }
                    lu_solve(&self.pivot_block, m, &self.perm, &mut self.tmp);
                    for r in 0..m {
                        self.c_prime[i * mm + r * m + c] = self.tmp[r];
                    }
                }
            }
        }

        out[(n - 1) * m..].copy_from_slice(&self.d_prime[(n - 1) * m..]);
        for i in (0..n - 1).rev() {
            let c = &self.c_prime[i * mm..(i + 1) * mm];
            for r in 0..m {
                let mut acc = self.d_prime[i * m + r];
                for k in 0..m {
                    acc -= c[r * m + k] * out[(i + 1) * m + k];
                }
                out[i * m + r] = acc;
            }
        }
        if let Some(pos) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::SingularBlock { node: pos / m });
        }
        Ok(())
    }
}

/// In-place LU factorisation with partial pivoting of a row-major `m x m` block.
fn lu_factor<T: Real>(a: &mut [T], m: usize, perm: &mut [usize]) -> std::result::Result<(), ()> {
    let scale = crate::num::max_abs(a);
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(());
    }
    let tiny = T::epsilon() * scale * T::from_count(m);
    for (i, p) in perm.iter_mut().enumerate() {
        *p = i;
    }
    for k in 0..m {
        let mut piv = k;
        for r in k + 1..m {
            if a[r * m + k].abs() > a[piv * m + k].abs() {
                piv = r;
            }
        }
        if !(a[piv * m + k].abs() > tiny) {
            return Err(());
        }
        if piv != k {
            for c in 0..m {
                a.swap(k * m + c, piv * m + c);
            }
            perm.swap(k, piv);
        }
        let p = a[k * m + k];
        for r in k + 1..m {
            let factor = a[r * m + k] / p;
            a[r * m + k] = factor;
            for c in k + 1..m {
                let v = a[k * m + c];
                a[r * m + c] -= factor * v;
            }
        }
    }
    Ok(())
}

fn lu_solve<T: Real>(lu: &[T], m: usize, perm: &[usize], b: &mut [T]) {
    if m == 1 {
        b[0] /= lu[0];
        return;
    }
    let mut x: [T; 8] = [T::zero(); 8];
    let mut heap;
    let y: &mut [T] = if m <= 8 {
        &mut x[..m]
    } else {
        heap = vec![T::zero(); m];
        &mut heap
    };
    for i in 0..m {
        y[i] = b[perm[i]];
    }
    for i in 0..m {
        for k in 0..i {
            let v = lu[i * m + k] * y[k];
            y[i] -= v;
        }
    }
    for i in (0..m).rev() {
        for k in i + 1..m {
            let v = lu[i * m + k] * y[k];
            y[i] -= v;
        }
        y[i] /= lu[i * m + i];
    }
    b.copy_from_slice(y);
}

#[inline]
fn block<T>(storage: &[T], m: usize, i: usize) -> &[T] {
    &storage[i * m * m..(i + 1) * m * m]
}

#[inline]
fn block_mut<T>(storage: &mut [T], m: usize, i: usize) -> &mut [T] {
    &mut storage[i * m * m..(i + 1) * m * m]
}

fn set_scaled_identity<T: Real>(b: &mut [T], m: usize, s: T) {
    for r in 0..m {
        for c in 0..m {
            b[r * m + c] = if r == c { s } else { T::zero() };
        }
    }
}

fn mat_vec_acc<T: Real>(a: &[T], x: &[T], out: &mut [T]) {
    let m = x.len();
    for r in 0..m {
        let mut acc = T::zero();
        for c in 0..m {
            acc += a[r * m + c] * x[c];
        }
        out[r] += acc;
    }
}
