//! Dirac fields on flat periodic lattices: the γ-matrix algebra, the local
//! one-step unitary evolution, and retarded/advanced fundamental solutions
//! for spinors and cospinors.
//!
//! Clifford convention: {γ_a, γ_b} = 2 η_ab with η = diag(-1,+1,+1,+1), so
//! γ₀² = -1 and the Dirac conjugation matrix β = iγ₀ is Hermitian, lies in
//! SL(4,C), satisfies γ_a* = -β γ_a β⁻¹ and makes iβ n^a γ_a positive for
//! future-directed timelike n. (With the opposite time orientation this is
//! the familiar β = -iγ₀; the conditions fix the product βγ₀ = -i either
//! way.)
//!
//! The discrete Dirac operator is first order in time,
//!     (Dψ)(t) = γ₀ [U†ψ(t+1) - ψ(t)] / dt,
//! with U a strictly local unitary step (a mass coin followed by one
//! mover-conditional shift per axis), which requires dt = a. Retarded and
//! advanced solutions are exact forward/backward substitutions, so DS± = id,
//! S±D = id and the stencil-cone support property hold to machine precision,
//! and the conserved fibrewise current makes the sesquilinear form positive
//! semidefinite exactly.

use crate::error::{Error, Result};
use crate::lattice::{Boundary, Region, Spacetime};
use crate::linalg::{CMat, CVec};
use num_complex::Complex64 as C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// γ-matrices, the conjugation matrix β and the convention bookkeeping.
#[derive(Clone, Debug)]
pub struct DiracAlgebraData {
    pub gammas: [CMat; 4],
    pub beta: CMat,
    /// Signature convention: {γ_a, γ_b} = 2 η_ab, η = diag(-1,+1,+1,+1).
    pub eta: [f64; 4],
}

impl DiracAlgebraData {
    pub fn standard() -> Self {
        let i = c(0.0, 1.0);
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        // γ₀ = i diag(1,1,-1,-1)
        let g0 = CMat::from_row_slice(4, 4, &[
            i, z, z, z,
            z, i, z, z,
            z, z, -i, z,
            z, z, z, -i,
        ]);
        // γ_k = offdiag(σ_k, σ_k)
        let g1 = CMat::from_row_slice(4, 4, &[
            z, z, z, o,
            z, z, o, z,
            z, o, z, z,
            o, z, z, z,
        ]);
        let g2 = CMat::from_row_slice(4, 4, &[
            z, z, z, -i,
            z, z, i, z,
            z, -i, z, z,
            i, z, z, z,
        ]);
        let g3 = CMat::from_row_slice(4, 4, &[
            z, z, o, z,
            z, z, z, -o,
            o, z, z, z,
            z, -o, z, z,
        ]);
        let beta = &g0 * i;
        DiracAlgebraData { gammas: [g0, g1, g2, g3], beta, eta: [-1.0, 1.0, 1.0, 1.0] }
    }

    /// α_k = γ₀ γ_k, the Hermitian velocity matrices of the Hamiltonian form.
    pub fn alpha(&self, k: usize) -> CMat {
        &self.gammas[0] * &self.gammas[k]
    }

    /// Checks the Clifford relations and the β-conditions; returns the worst
    /// deviation. Positivity of iβ n·γ is probed on a future-timelike fan.
    pub fn verify(&self) -> f64 {
        let id = CMat::identity(4, 4);
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let anti = &self.gammas[a] * &self.gammas[b] + &self.gammas[b] * &self.gammas[a];
                let target = if a == b { &id * c(2.0 * self.eta[a], 0.0) } else { CMat::zeros(4, 4) };
                worst = worst.max((anti - target).norm());
            }
        }
        worst = worst.max((self.beta.adjoint() - &self.beta).norm());
        let beta_inv = self.beta.clone().try_inverse().unwrap();
        for g in &self.gammas {
            let lhs = CMat::from_fn(4, 4, |r, cc| g[(cc, r)].conj());
            let rhs = -(&self.beta * g * &beta_inv);
            worst = worst.max((lhs - rhs).norm());
        }
        // det β = 1 (β in SL(4,C)).
        worst = worst.max((self.beta.determinant() - c(1.0, 0.0)).norm());
        // iβ n^a γ_a > 0 for a fan of future-directed timelike n.
        for probe in 0..8 {
            let s = 0.9 * (probe as f64 / 8.0);
            let n = [1.0, s * 0.7, s * 0.5, s * 0.2];
            let mut ng = CMat::zeros(4, 4);
            for a in 0..4 {
                ng += &self.gammas[a] * c(n[a], 0.0);
            }
            let m = (&self.beta * ng) * c(0.0, 1.0);
            let (vals, _) = crate::linalg::hermitian_eig(&m);
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            if min <= 0.0 {
                worst = worst.max(1.0 - min);
            }
        }
        worst
    }
}

/// Note: γ_a* in `verify` means the conjugate transpose.

/// ℂ⁴-valued site field over the full time grid. Cospinors share the layout
/// and are read as row vectors.
#[derive(Clone, Debug)]
pub struct SpinorField {
    pub sig: u64,
    pub steps: usize,
    pub sites: usize,
    /// One 4·sites vector per slice; component c of site x sits at 4x + c.
    pub data: Vec<CVec>,
}

impl SpinorField {
    pub fn zeros(st: &Spacetime) -> Self {
        SpinorField {
            sig: st.signature(),
            steps: st.steps,
            sites: st.site_count(),
            data: vec![CVec::zeros(4 * st.site_count()); st.steps],
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&o.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&o.data) {
            *a -= b;
        }
        out
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    /// Support region at exact-zero threshold.
    pub fn support(&self) -> Region {
        let mut r = Region::default();
        for (t, v) in self.data.iter().enumerate() {
            for x in 0..self.sites {
                for ccomp in 0..4 {
                    if v[4 * x + ccomp] != c(0.0, 0.0) {
                        r.cells.insert((t, x));
                        break;
                    }
                }
            }
        }
        r
    }

    pub fn time_window(&self) -> Option<(usize, usize)> {
        let r = self.support();
        let lo = r.cells.iter().map(|&(t, _)| t).min()?;
        let hi = r.cells.iter().map(|&(t, _)| t).max()?;
        Some((lo, hi))
    }
}

/// The local unitary one-step walk for the Dirac equation: a sitewise mass
/// coin exp(-i m dt β) composed with one conditional unit shift per axis.
pub struct DiracWalk {
    pub st: Spacetime,
    pub mass: f64,
    pub alg: DiracAlgebraData,
    u: CMat,
    udag: CMat,
}

impl DiracWalk {
    pub fn new(st: &Spacetime, mass: f64) -> Result<Self> {
        if (st.dt - st.spacing).abs() > 1e-12 * st.spacing
            || st.metric.iter().any(|&h| (h - 1.0).abs() > 1e-14)
            || st.boundary != Boundary::Periodic
        {
            return Err(Error::DiracLatticeUnsupported);
        }
        if mass < 0.0 {
            return Err(Error::ConfigError("mass must be >= 0".into()));
        }
        let alg = DiracAlgebraData::standard();
        let n = st.site_count();
        let dim = 4 * n;
        // Conditional shift along each axis: P₊ moves +1, P₋ moves -1.
        let mut u = CMat::identity(dim, dim);
        for axis in 0..st.dim {
            let alpha = alg.alpha(axis + 1);
            let id4 = CMat::identity(4, 4);
            let pp = (&id4 + &alpha) * c(0.5, 0.0);
            let pm = (&id4 - &alpha) * c(0.5, 0.0);
            let mut s = CMat::zeros(dim, dim);
            for x in 0..n {
                let coords = st.site_coords(x);
                let mut up = coords.clone();
                up[axis] = (up[axis] + 1) % st.sites[axis];
                let mut dn = coords.clone();
                dn[axis] = (dn[axis] + st.sites[axis] - 1) % st.sites[axis];
                let xu = st.site_index(&up);
                let xd = st.site_index(&dn);
                for r in 0..4 {
                    for cc in 0..4 {
                        // content moving right lands at xu, left at xd
                        if pp[(r, cc)] != c(0.0, 0.0) {
                            s[(4 * xu + r, 4 * x + cc)] += pp[(r, cc)];
                        }
                        if pm[(r, cc)] != c(0.0, 0.0) {
                            s[(4 * xd + r, 4 * x + cc)] += pm[(r, cc)];
                        }
                    }
                }
            }
            u = s * u;
        }
        // Mass coin: cos(m dt) - i sin(m dt) β, sitewise.
        let phi = mass * st.dt;
        let coin4 = CMat::identity(4, 4) * c(phi.cos(), 0.0) - &alg.beta * c(0.0, phi.sin());
        let mut coin = CMat::zeros(dim, dim);
        for x in 0..n {
            for r in 0..4 {
                for cc in 0..4 {
                    coin[(4 * x + r, 4 * x + cc)] = coin4[(r, cc)];
                }
            }
        }
        let u = coin * u;
        let udag = u.adjoint();
        Ok(DiracWalk { st: st.clone(), mass, alg, u, udag })
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn step_matrix(&self) -> &CMat {
        &self.u
    }

    fn gamma0_apply(&self, v: &CVec, inverse: bool) -> CVec {
        // γ₀ = i diag(1,1,-1,-1) sitewise; γ₀⁻¹ = -γ₀.
        let mut out = v.clone();
        let i = c(0.0, 1.0);
        let sgn = if inverse { -1.0 } else { 1.0 };
        for x in 0..self.st.site_count() {
            for comp in 0..4 {
                let s = if comp < 2 { 1.0 } else { -1.0 };
                out[4 * x + comp] *= i * c(sgn * s, 0.0);
            }
        }
        out
    }

    /// Discrete Dirac operator: (Dψ)(t) = γ₀[U†ψ(t+1) - ψ(t)]/dt on rows
    /// 0..steps-2; the last row is zero.
    pub fn apply_d(&self, psi: &SpinorField) -> SpinorField {
        let mut out = SpinorField::zeros(&self.st);
        let dt = self.st.dt;
        for t in 0..self.st.steps - 1 {
            let v = &self.udag * &psi.data[t + 1] - &psi.data[t];
            out.data[t] = self.gamma0_apply(&v, false) / c(dt, 0.0);
        }
        out
    }

    /// Cospinor operator, realized as the Dirac conjugate of D:
    /// D'h = (D(h†))†. This makes the conjugation maps intertwine the two
    /// dynamics exactly, which in turn makes the sesquilinear form hermitian,
    /// positive and Γ-compatible to machine precision.
    pub fn apply_dprime(&self, h: &SpinorField) -> SpinorField {
        let hd = dagger_cospinor(&self.alg, h);
        dagger_spinor(&self.alg, &self.apply_d(&hd))
    }

    /// Retarded/advanced fundamental solution of D by exact substitution.
    pub fn fundamental(&self, f: &SpinorField, retarded: bool) -> SpinorField {
        let mut u = SpinorField::zeros(&self.st);
        let dt = self.st.dt;
        if retarded {
            for t in 0..self.st.steps - 1 {
                let rhs = &u.data[t] + self.gamma0_apply(&f.data[t], true) * c(dt, 0.0);
                u.data[t + 1] = &self.u * rhs;
            }
        } else {
            for t in (0..self.st.steps - 1).rev() {
                let v = &self.udag * &u.data[t + 1];
                u.data[t] = v - self.gamma0_apply(&f.data[t], true) * c(dt, 0.0);
            }
        }
        u
    }

    /// Causal spinor propagator S = S⁺ - S⁻.
    pub fn causal(&self, f: &SpinorField) -> SpinorField {
        self.fundamental(f, true).sub(&self.fundamental(f, false))
    }

    /// Retarded/advanced fundamental solution of D' on cospinors, the Dirac
    /// conjugate of the spinor solver: S'±(f) = (S±(f†))†. Conjugation
    /// preserves supports, so the support properties carry over verbatim.
    pub fn fundamental_cospinor(&self, f: &SpinorField, retarded: bool) -> SpinorField {
        let fd = dagger_cospinor(&self.alg, f);
        dagger_spinor(&self.alg, &self.fundamental(&fd, retarded))
    }

    pub fn causal_cospinor(&self, f: &SpinorField) -> SpinorField {
        self.fundamental_cospinor(f, true).sub(&self.fundamental_cospinor(f, false))
    }

    /// One-step unitary evolution of a single initial slice.
    pub fn evolve(&self, initial: &CVec) -> Result<SpinorField> {
        if initial.len() != self.dim() {
            return Err(Error::BadInitialData("spinor slice has the wrong size".into()));
        }
        let mut out = SpinorField::zeros(&self.st);
        out.data[0] = initial.clone();
        for t in 1..self.st.steps {
            out.data[t] = &self.u * &out.data[t - 1];
        }
        Ok(out)
    }
}

/// Spinor ↦ cospinor: f† = f*β (componentwise since β = diag(-1,-1,1,1)).
pub fn dagger_spinor(alg: &DiracAlgebraData, f: &SpinorField) -> SpinorField {
    let mut out = f.clone();
    let b = [alg.beta[(0, 0)], alg.beta[(1, 1)], alg.beta[(2, 2)], alg.beta[(3, 3)]];
    for v in out.data.iter_mut() {
        let n = v.len() / 4;
        for x in 0..n {
            for comp in 0..4 {
                v[4 * x + comp] = v[4 * x + comp].conj() * b[comp];
            }
        }
    }
    out
}

/// Cospinor ↦ spinor: h† = β⁻¹h*; with β² = 1 this is the same diagonal map.
pub fn dagger_cospinor(alg: &DiracAlgebraData, h: &SpinorField) -> SpinorField {
    dagger_spinor(alg, h)
}

/// Dual pairing of a cospinor field with a spinor field over the grid:
/// Σ dt a^d h(t,x)·ψ(t,x).
pub fn grid_pairing(st: &Spacetime, h: &SpinorField, psi: &SpinorField) -> C64 {
    let vol = st.dt * st.spacing.powi(st.dim as i32);
    let mut acc = c(0.0, 0.0);
    for (a, b) in h.data.iter().zip(&psi.data) {
        for (x, y) in a.iter().zip(b.iter()) {
            acc += x * y;
        }
    }
    acc * c(vol, 0.0)
}

/// Interior-source check (two slices of margin at each end).
pub fn check_interior_spinor(st: &Spacetime, f: &SpinorField) -> Result<()> {
    if let Some((lo, hi)) = f.time_window() {
        if lo < 2 || hi > st.steps - 3 {
            return Err(Error::SourceTouchesBoundary);
        }
    }
    Ok(())
}
