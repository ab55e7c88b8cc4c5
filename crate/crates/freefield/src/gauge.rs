//! Lorenz-gauge machinery for the massless vector potential: coclosed test
//! forms, the equivalence quotient, gauge fixing via □χ = δA, and the map
//! between gauge classes and Lorenz classes.
//!
//! Class arithmetic is concrete linear algebra: test forms f, f' are
//! equivalent when f - f' = δβ for a compactly supported closed 2-form β,
//! decided by least squares over the parameterization β = dγ plus the
//! explicit closed non-exact 2-form generators of the lattice. Gauge fixing
//! solves the inhomogeneous wave equation with zero data on the first two
//! slices, which makes the map deterministic.

use crate::dynamics::{zero_boundary_rows, WaveEngine, Which};
use crate::error::{Error, Result};
use crate::lattice::{
    codifferential, exterior_derivative, masks_of_degree, unflatten, Cochain, Spacetime,
};


/// A coclosed compactly supported 1-form test class representative.
#[derive(Clone, Debug)]
pub struct TestClass {
    pub rep: Cochain,
}

impl TestClass {
    pub fn new(st: &Spacetime, rep: Cochain) -> Result<Self> {
        let div = codifferential(st, &rep)?;
        let rel = div.norm() / rep.norm().max(1e-300);
        if rel > 1e-11 {
            return Err(Error::NotCoclosed(rel));
        }
        Ok(TestClass { rep })
    }
}

#[derive(Clone, Debug)]
pub struct GaugeFixResult {
    pub fixed: Cochain,
    pub chi: Cochain,
}

#[derive(Clone, Debug)]
pub struct EquivalenceWitness {
    pub beta: Cochain,
    pub residual: f64,
}

/// f = δβ for a compactly supported 2-form: automatically coclosed.
pub fn coclosed_generator(st: &Spacetime, beta: &Cochain) -> Result<Cochain> {
    if beta.degree != 2 {
        return Err(Error::DegreeMismatch(beta.degree, 2));
    }
    codifferential(st, beta)
}

/// Interior-row residual norm of the Maxwell operator δdA.
pub fn maxwell_residual(st: &Spacetime, a: &Cochain) -> Result<f64> {
    let r = codifferential(st, &exterior_derivative(st, a)?)?;
    Ok(zero_boundary_rows(st, &r).norm())
}

/// Residuals of the Lorenz-gauge system (□A, δA) on interior rows.
pub fn lorenz_residual(st: &Spacetime, a: &Cochain) -> Result<(f64, f64)> {
    let engine = WaveEngine::new(st, 1, 0.0)?;
    let box_a = engine.apply(a)?;
    let div = zero_boundary_rows(st, &codifferential(st, a)?);
    Ok((box_a.norm(), div.norm()))
}

/// Gauge-fixes a solution of δdA = 0 into Lorenz form: solves □χ = δA with
/// zero data on the first two slices and returns A' = A - dχ.
pub fn lorenz_fix(st: &Spacetime, a: &Cochain) -> Result<GaugeFixResult> {
    let res = maxwell_residual(st, a)?;
    if res > 1e-9 * a.norm().max(1.0) {
        return Err(Error::NotASolution(res / a.norm().max(1e-300)));
    }
    let div = codifferential(st, a)?;
    let engine = WaveEngine::new(st, 0, 0.0)?;
    let chi = engine.fundamental(&div, Which::Retarded)?;
    let fixed = a.sub(&exterior_derivative(st, &chi)?)?;
    Ok(GaugeFixResult { fixed, chi })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiDirection {
    Forward,
    Inverse,
}

/// The bijection between gauge classes of δdA = 0 and Lorenz classes:
/// forward gauge-fixes an M-representative, inverse reads a Lorenz solution
/// back as an M-representative.
pub fn phi(st: &Spacetime, a: &Cochain, dir: PhiDirection) -> Result<Cochain> {
    match dir {
        PhiDirection::Forward => Ok(lorenz_fix(st, a)?.fixed),
        PhiDirection::Inverse => {
            let (box_res, div_res) = lorenz_residual(st, a)?;
            let scale = a.norm().max(1e-300);
            if box_res > 1e-9 * scale.max(1.0) || div_res > 1e-9 * scale.max(1.0) {
                return Err(Error::NotASolution((box_res + div_res) / scale));
            }
            Ok(a.clone())
        }
    }
}

/// Solution-class equality. In the gauge quotient (M) two solutions are
/// identified when their difference is closed; in the Lorenz quotient (L)
/// the difference must be closed and coclosed. Returns the worst relative
/// residual of the defining conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionClass {
    Gauge,
    Lorenz,
}

pub fn solution_classes_equal(
    st: &Spacetime,
    a: &Cochain,
    b: &Cochain,
    class: SolutionClass,
) -> Result<f64> {
    let diff = a.sub(b)?;
    let scale = a.norm().max(b.norm()).max(1e-300);
    let closed = zero_boundary_rows(st, &exterior_derivative(st, &diff)?).norm() / scale;
    match class {
        SolutionClass::Gauge => Ok(closed),
        SolutionClass::Lorenz => {
            let coclosed = zero_boundary_rows(st, &codifferential(st, &diff)?).norm() / scale;
            Ok(closed.max(coclosed))
        }
    }
}

/// Interior cells of a spacetime cochain: projected times inside
/// [1, steps-2] and no Dirichlet phantom ends.
fn interior_cell_indices(st: &Spacetime, degree: usize) -> Vec<(usize, usize)> {
    let masks = masks_of_degree(st.axes(), degree);
    let mut out = Vec::new();
    let mut offset = 0;
    for &m in &masks {
        let len = crate::lattice::block_len(st, m);
        let bi = masks.iter().position(|&mm| mm == m).unwrap();
        for pos in 0..len {
            let idx = unflatten(st, m, pos);
            let mut ok = true;
            // time interior
            let (tlo, thi) = if m & 1 != 0 { (idx[0], idx[0] + 1) } else { (idx[0], idx[0]) };
            if tlo < 1 || thi > st.steps - 2 {
                ok = false;
            }
            // no phantom ends
            for ax in 1..st.axes() {
                if m & (1 << ax) != 0 {
                    let (lo, hi) = st.edge_ends(ax, idx[ax]);
                    if lo.is_none() || hi.is_none() {
                        ok = false;
                    }
                }
            }
            if ok {
                out.push((bi, pos));
            }
        }
        offset += len;
    }
    let _ = offset;
    out
}

/// The equivalence orbit of the test-class quotient: δβ over closed 2-forms
/// β compactly supported in the open manifold (interior cells only). The
/// closed interior subspace is computed once per lattice as a dense null
/// space and the map β ↦ δβ is stored columnwise with its SVD for fast
/// projections.
struct QuotientOrbit {
    /// Interior (block, position) pairs parameterizing candidate β cells.
    cells: Vec<(usize, usize)>,
    /// Null-space basis of d on interior 2-forms, one column per generator.
    null_basis: crate::linalg::RMat,
    /// Columns δ(N_j) flattened on 1-forms.
    delta_n: crate::linalg::RMat,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rank_eps: f64,
}

impl QuotientOrbit {
    fn build(st: &Spacetime) -> Self {
        let cells = interior_cell_indices(st, 2);
        let k = cells.len();
        let top = st.axes() == 2;
        // Null space of d on the interior 2-form coordinates.
        let null_basis = if top {
            crate::linalg::RMat::identity(k, k)
        } else {
            // Null space of d over the interior coordinates via the Gram
            // matrix: small, dense, and yields the full kernel.
            let mut dmat =
                crate::linalg::RMat::zeros(Cochain::zeros(st, 3).to_flat().len(), k);
            for (j, &(bi, pos)) in cells.iter().enumerate() {
                let mut beta = Cochain::zeros(st, 2);
                beta.blocks[bi][pos] = 1.0;
                let dbeta = exterior_derivative(st, &beta).unwrap().to_flat();
                for (i, v) in dbeta.iter().enumerate() {
                    dmat[(i, j)] = *v;
                }
            }
            let gram = dmat.transpose() * &dmat;
            let eig = gram.symmetric_eigen();
            let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
            // Incidence-type spectra are cleanly separated; anything below
            // 1e-12 of the top eigenvalue is kernel.
            let cols: Vec<usize> = (0..k)
                .filter(|&i| eig.eigenvalues[i].abs() <= 1e-12 * lmax.max(1.0))
                .collect();
            let mut n = crate::linalg::RMat::zeros(k, cols.len());
            for (j, &i) in cols.iter().enumerate() {
                n.set_column(j, &eig.eigenvectors.column(i));
            }
            n
        };
        let n_out = Cochain::zeros(st, 1).to_flat().len();
        let mut delta_n = crate::linalg::RMat::zeros(n_out, null_basis.ncols());
        for j in 0..null_basis.ncols() {
            let mut beta = Cochain::zeros(st, 2);
            for (row, &(bi, pos)) in cells.iter().enumerate() {
                beta.blocks[bi][pos] = null_basis[(row, j)];
            }
            let db = codifferential(st, &beta).unwrap().to_flat();
            for (i, v) in db.iter().enumerate() {
                delta_n[(i, j)] = *v;
            }
        }
        assert!(
            null_basis.ncols() > 0,
            "test-class quotient orbit is empty; lattice too small"
        );
        let svd = delta_n.clone().svd(true, true);
        QuotientOrbit { cells, null_basis, delta_n, svd, rank_eps: 1e-11 }
    }

    /// Least-squares solve δβ ≈ target; returns (β, achieved residual).
    fn project(&self, st: &Spacetime, target: &Cochain) -> (Cochain, Cochain, f64) {
        let b = nalgebra::DVector::from_vec(target.to_flat());
        let smax = self.svd.singular_values.max();
        let z = self.svd.solve(&b, self.rank_eps * smax.max(1e-300)).expect("svd solve");
        let proj_flat = &self.delta_n * &z;
        let proj = Cochain::from_flat(st, 1, proj_flat.as_slice());
        let coeffs = &self.null_basis * z;
        let mut beta = Cochain::zeros(st, 2);
        for (row, &(bi, pos)) in self.cells.iter().enumerate() {
            beta.blocks[bi][pos] = coeffs[row];
        }
        let res = target.sub(&proj).unwrap().norm();
        (proj, beta, res)
    }
}

thread_local! {
    static ORBIT_CACHE: std::cell::RefCell<Vec<(u64, std::rc::Rc<QuotientOrbit>)>> =
        const { std::cell::RefCell::new(Vec::new()) };
}

/// A random closed 2-form supported on interior cells: a legitimate
/// equivalence witness direction of the test-class quotient.
pub fn random_closed_interior_witness(st: &Spacetime, rng: &mut impl rand::Rng) -> Cochain {
    let orbit = orbit_for(st);
    let k = orbit.null_basis.ncols();
    let z = nalgebra::DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
    let coeffs = &orbit.null_basis * z;
    let mut beta = Cochain::zeros(st, 2);
    for (row, &(bi, pos)) in orbit.cells.iter().enumerate() {
        beta.blocks[bi][pos] = coeffs[row];
    }
    beta
}

fn orbit_for(st: &Spacetime) -> std::rc::Rc<QuotientOrbit> {
    ORBIT_CACHE.with(|c| {
        let mut cache = c.borrow_mut();
        let sig = st.signature();
        if let Some((_, orb)) = cache.iter().find(|(s, _)| *s == sig) {
            return orb.clone();
        }
        let orb = std::rc::Rc::new(QuotientOrbit::build(st));
        if cache.len() > 8 {
            cache.remove(0);
        }
        cache.push((sig, orb.clone()));
        orb
    })
}

/// Decides whether two coclosed compact 1-forms generate the same test
/// class, returning the witness β (with dβ = 0) when they do.
pub fn test_equivalent(
    st: &Spacetime,
    f: &Cochain,
    fp: &Cochain,
) -> Result<(bool, Option<EquivalenceWitness>)> {
    for g in [f, fp] {
        if g.norm() <= 1e-12 {
            continue;
        }
        let div = codifferential(st, g)?;
        let rel = div.norm() / g.norm();
        if rel > 1e-9 {
            return Err(Error::NotCoclosed(rel));
        }
    }
    let diff = f.sub(fp)?;
    let scale = diff.norm();
    if scale <= 1e-14 * f.norm().max(1.0) {
        return Ok((true, Some(EquivalenceWitness { beta: Cochain::zeros(st, 2), residual: 0.0 })));
    }
    let orbit = orbit_for(st);
    let (_, beta, res) = orbit.project(st, &diff);
    let rel = res / scale;
    if rel <= 1e-9 {
        Ok((true, Some(EquivalenceWitness { beta, residual: rel })))
    } else {
        Ok((false, None))
    }
}

/// Minimum-norm representative of the test class of f: subtracts the
/// orthogonal projection of f onto the equivalence orbit. Deterministic and
/// idempotent; equivalent inputs map to the same representative.
pub fn canonical_rep(st: &Spacetime, f: &Cochain) -> Result<Cochain> {
    if f.norm() <= 1e-12 {
        return Ok(f.clone());
    }
    let div = codifferential(st, f)?;
    let rel = div.norm() / f.norm();
    if rel > 1e-9 {
        return Err(Error::NotCoclosed(rel));
    }
    let orbit = orbit_for(st);
    let (proj, _, _) = orbit.project(st, f);
    f.sub(&proj)
}
