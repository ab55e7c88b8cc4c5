//! Symplectic and sesquilinear structures, the symbolic Weyl algebra with
//! its exact defining relations, the Dirac field-algebra pairings,
//! embedding-induced morphisms and causality reports.
//!
//! Weyl elements are finite complex combinations of generators W(v) over a
//! fixed finite test basis; keys are coefficient vectors over that basis (the
//! basis vectors themselves being canonical class representatives), so the
//! product rule W(u)W(v) = e^{iσ(u,v)/2} W(u+v) is plain vector arithmetic
//! plus a phase from the cached σ matrix.

use crate::dirac::{
    dagger_cospinor, dagger_spinor, grid_pairing, DiracAlgebraData, DiracWalk, SpinorField,
};
use crate::dynamics::{fundamental_solution_unvalidated, FieldKind, FieldOperatorSpec, Which};
use crate::error::{Error, Result};
use crate::lattice::{
    causal_complement, harmonic_basis, pairing, random_cochain, restrict_to_region, Cochain,
    Embedding, Region, Spacetime,
};
use crate::linalg::{RMat, RVec};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::sync::atomic::{AtomicU64, Ordering};

// ---------------------------------------------------------------------------
// Symplectic forms
// ---------------------------------------------------------------------------

/// σ_m(A_f, A_h) = <Δf, h> for the Proca field.
pub fn sigma_proca(st: &Spacetime, mass: f64, f: &Cochain, h: &Cochain) -> Result<f64> {
    if mass <= 0.0 {
        return Err(Error::MasslessNotAllowed);
    }
    let spec = FieldOperatorSpec::new(FieldKind::Proca, mass)?;
    let df = fundamental_solution_unvalidated(st, &spec, f, Which::Causal)?.field;
    pairing(st, &df, h)
}

/// σ₀([f],[h]) = <Ef, h> for the massless vector potential on trivial-H¹
/// lattices; representatives must be coclosed.
pub fn sigma_maxwell(st: &Spacetime, f: &Cochain, h: &Cochain) -> Result<f64> {
    if !harmonic_basis(st, 1)?.is_empty() {
        return Err(Error::NontrivialTopology);
    }
    for g in [f, h] {
        if g.norm() > 1e-12 {
            let div = crate::lattice::codifferential(st, g)?;
            let rel = div.norm() / g.norm();
            if rel > 1e-9 {
                return Err(Error::NotCoclosed(rel));
            }
        }
    }
    let spec = FieldOperatorSpec::new(FieldKind::MaxwellLorenz, 0.0)?;
    let ef = fundamental_solution_unvalidated(st, &spec, f, Which::Causal)?.field;
    pairing(st, &ef, h)
}

/// σ for the scalar sector: <Ef, h>.
pub fn sigma_scalar(st: &Spacetime, mass: f64, f: &Cochain, h: &Cochain) -> Result<f64> {
    let spec = FieldOperatorSpec::new(FieldKind::ScalarWave, mass)?;
    let ef = fundamental_solution_unvalidated(st, &spec, f, Which::Causal)?.field;
    pairing(st, &ef, h)
}

pub fn sigma_of(st: &Spacetime, spec: &FieldOperatorSpec, f: &Cochain, h: &Cochain) -> Result<f64> {
    match spec.kind {
        FieldKind::ScalarWave => sigma_scalar(st, spec.mass, f, h),
        FieldKind::Proca => sigma_proca(st, spec.mass, f, h),
        FieldKind::MaxwellLorenz => sigma_maxwell(st, f, h),
        FieldKind::Dirac => Err(Error::ConfigError("Dirac has no symplectic form".into())),
    }
}

// ---------------------------------------------------------------------------
// Dirac pairings
// ---------------------------------------------------------------------------

/// A spinor test section paired with a cospinor test section.
#[derive(Clone, Debug)]
pub struct DoubledSection {
    pub spinor: SpinorField,
    pub cospinor: SpinorField,
}

impl DoubledSection {
    pub fn zeros(st: &Spacetime) -> Self {
        DoubledSection { spinor: SpinorField::zeros(st), cospinor: SpinorField::zeros(st) }
    }

    pub fn norm(&self) -> f64 {
        (self.spinor.norm().powi(2) + self.cospinor.norm().powi(2)).sqrt()
    }

    pub fn support(&self) -> Region {
        let mut r = self.spinor.support();
        for cell in self.cospinor.support().cells {
            r.cells.insert(cell);
        }
        r
    }
}

/// Γ(f ⊕ h) = h† ⊕ f†: swap and conjugate. Involutive.
pub fn gamma_conj(alg: &DiracAlgebraData, x: &DoubledSection) -> DoubledSection {
    DoubledSection {
        spinor: dagger_cospinor(alg, &x.cospinor),
        cospinor: dagger_spinor(alg, &x.spinor),
    }
}

/// The sesquilinear form (f, h) = -i<f₁†, S h₁> + i<S* h₂, f₂†>.
pub fn dirac_form(walk: &DiracWalk, f: &DoubledSection, h: &DoubledSection) -> Result<C64> {
    let st = &walk.st;
    crate::dirac::check_interior_spinor(st, &f.spinor)?;
    crate::dirac::check_interior_spinor(st, &f.cospinor)?;
    crate::dirac::check_interior_spinor(st, &h.spinor)?;
    crate::dirac::check_interior_spinor(st, &h.cospinor)?;
    let sh = walk.causal(&h.spinor);
    let f1d = dagger_spinor(&walk.alg, &f.spinor);
    let term1 = grid_pairing(st, &f1d, &sh) * C64::new(0.0, -1.0);
    let sstar = walk.causal_cospinor(&h.cospinor);
    let f2d = dagger_cospinor(&walk.alg, &f.cospinor);
    let term2 = grid_pairing(st, &sstar, &f2d) * C64::new(0.0, 1.0);
    Ok(term1 + term2)
}

// ---------------------------------------------------------------------------
// The Weyl algebra
// ---------------------------------------------------------------------------

static CACHE_COUNTER: AtomicU64 = AtomicU64::new(1);

/// Assembled quadratic forms on a fixed finite test basis. The basis entries
/// are kept for support bookkeeping; σ is exact output of the propagator
/// pipeline and μ (when present) comes from a one-particle structure.
#[derive(Clone, Debug)]
pub struct QuadraticFormCache {
    pub id: u64,
    pub dim: usize,
    pub sigma: RMat,
    pub mu: Option<RMat>,
}

impl QuadraticFormCache {
    pub fn new(sigma: RMat, mu: Option<RMat>) -> Self {
        let dim = sigma.nrows();
        QuadraticFormCache { id: CACHE_COUNTER.fetch_add(1, Ordering::Relaxed), dim, sigma, mu }
    }

    pub fn antisymmetry_defect(&self) -> f64 {
        let s = &self.sigma + self.sigma.transpose();
        s.norm() / self.sigma.norm().max(1e-300)
    }

    pub fn sigma_between(&self, u: &RVec, v: &RVec) -> f64 {
        (u.transpose() * &self.sigma * v)[(0, 0)]
    }
}

/// Assembles σ on a basis of test objects for a bosonic sector.
pub fn assemble_sigma_cache(
    st: &Spacetime,
    spec: &FieldOperatorSpec,
    basis: &[Cochain],
) -> Result<QuadraticFormCache> {
    let n = basis.len();
    let mut propagated = Vec::with_capacity(n);
    for f in basis {
        propagated.push(fundamental_solution_unvalidated(st, spec, f, Which::Causal)?.field);
    }
    let mut sigma = RMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sigma[(i, j)] = pairing(st, &propagated[i], &basis[j])?;
        }
    }
    Ok(QuadraticFormCache::new(sigma, None))
}

/// A finite complex combination of Weyl generators, keyed by coefficient
/// vectors over the cache basis. Keys are kept sorted and deduplicated.
#[derive(Clone, Debug)]
pub struct WeylElement {
    pub cache_id: u64,
    pub terms: Vec<(RVec, C64)>,
}

fn key_cmp(a: &RVec, b: &RVec) -> std::cmp::Ordering {
    for i in 0..a.len() {
        match a[i].partial_cmp(&b[i]).unwrap() {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn keys_close(a: &RVec, b: &RVec, tol: f64) -> bool {
    (a - b).norm() <= tol * a.norm().max(b.norm()).max(1.0)
}

impl WeylElement {
    /// The identity element W(0).
    pub fn identity(cache: &QuadraticFormCache) -> Self {
        WeylElement {
            cache_id: cache.id,
            terms: vec![(RVec::zeros(cache.dim), C64::new(1.0, 0.0))],
        }
    }

    /// A single generator W(v) with v expressed in the cache basis.
    pub fn generator(cache: &QuadraticFormCache, v: RVec) -> Result<Self> {
        if v.len() != cache.dim {
            return Err(Error::BasisMismatch);
        }
        Ok(WeylElement { cache_id: cache.id, terms: vec![(v, C64::new(1.0, 0.0))] })
    }

    pub fn canonicalize(&mut self) {
        self.terms.sort_by(|a, b| key_cmp(&a.0, &b.0));
        let mut merged: Vec<(RVec, C64)> = Vec::with_capacity(self.terms.len());
        for (k, c) in self.terms.drain(..) {
            if let Some(last) = merged.last_mut() {
                if keys_close(&last.0, &k, 1e-12) {
                    last.1 += c;
                    continue;
                }
            }
            merged.push((k, c));
        }
        merged.retain(|(_, c)| c.norm() > 1e-15);
        self.terms = merged;
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        for (_, c) in out.terms.iter_mut() {
            *c *= s;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.cache_id != other.cache_id {
            return Err(Error::BasisMismatch);
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out.canonicalize();
        Ok(out)
    }

    /// Distance to another element in the coefficient l² norm, matching keys
    /// within tolerance.
    pub fn distance(&self, other: &Self) -> f64 {
        let diff = self.add(&other.scaled(C64::new(-1.0, 0.0)));
        match diff {
            Ok(d) => d.terms.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt(),
            Err(_) => f64::INFINITY,
        }
    }
}

/// W(u) W(v) = e^{iσ(u,v)/2} W(u+v), extended bilinearly.
pub fn weyl_mul(
    a: &WeylElement,
    b: &WeylElement,
    cache: &QuadraticFormCache,
) -> Result<WeylElement> {
    if a.cache_id != cache.id || b.cache_id != cache.id {
        return Err(Error::BasisMismatch);
    }
    let mut terms = Vec::with_capacity(a.terms.len() * b.terms.len());
    for (u, cu) in &a.terms {
        for (v, cv) in &b.terms {
            let phase = 0.5 * cache.sigma_between(u, v);
            let coeff = cu * cv * C64::from_polar(1.0, phase);
            terms.push((u + v, coeff));
        }
    }
    let mut out = WeylElement { cache_id: cache.id, terms };
    out.canonicalize();
    Ok(out)
}

/// W(v)* = W(-v) with conjugated coefficients.
pub fn weyl_star(a: &WeylElement) -> WeylElement {
    let mut out = WeylElement {
        cache_id: a.cache_id,
        terms: a.terms.iter().map(|(k, c)| (-k, c.conj())).collect(),
    };
    out.canonicalize();
    out
}

// ---------------------------------------------------------------------------
// Embedding-induced morphisms
// ---------------------------------------------------------------------------

/// Pushes the generators of a Weyl element through a sublattice embedding:
/// α_μ(W(f)) = W(μ_* f). The caches must be assembled on the source basis
/// and its pushforward respectively.
pub struct AlgebraMorphism {
    pub embedding: Embedding,
    pub source_cache_id: u64,
    pub target_cache_id: u64,
}

impl AlgebraMorphism {
    pub fn new(
        embedding: Embedding,
        source: &QuadraticFormCache,
        target: &QuadraticFormCache,
    ) -> Result<Self> {
        if source.dim != target.dim {
            return Err(Error::BasisMismatch);
        }
        Ok(AlgebraMorphism {
            embedding,
            source_cache_id: source.id,
            target_cache_id: target.id,
        })
    }

    pub fn apply(&self, a: &WeylElement) -> Result<WeylElement> {
        if a.cache_id != self.source_cache_id {
            return Err(Error::BasisMismatch);
        }
        Ok(WeylElement { cache_id: self.target_cache_id, terms: a.terms.clone() })
    }

    /// Pushes a source test basis to the target lattice.
    pub fn push_basis(embedding: &Embedding, basis: &[Cochain]) -> Result<Vec<Cochain>> {
        basis.iter().map(|f| embedding.push_cochain(f)).collect()
    }
}

// ---------------------------------------------------------------------------
// Causality reports
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CausalityReport {
    pub max_violation: f64,
    pub samples: usize,
    pub seed: u64,
    pub separated: bool,
    /// Dirac only: largest cross anticommutator entering the expansion of an
    /// even-element commutator.
    pub even_commutator_proxy: Option<f64>,
}

/// Samples pairs of test objects supported in the two regions and reports
/// the largest |σ(f,h)| (bosonic) or |(f,h)| plus the even-commutator proxy
/// (Dirac). Spacelike-separated regions must give exact zeros.
pub fn causality_report(
    st: &Spacetime,
    spec: &FieldOperatorSpec,
    r1: &Region,
    r2: &Region,
    n_samples: usize,
    seed: u64,
    allow_overlap: bool,
) -> Result<CausalityReport> {
    if r1.is_empty() || r2.is_empty() {
        return Ok(CausalityReport {
            max_violation: 0.0,
            samples: 0,
            seed,
            separated: true,
            even_commutator_proxy: if spec.kind == FieldKind::Dirac { Some(0.0) } else { None },
        });
    }
    let comp = causal_complement(st, r1);
    let separated = r2.is_subset(&comp);
    if !separated && !allow_overlap {
        return Err(Error::RegionsNotSeparated);
    }
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation: f64 = 0.0;
    let mut proxy: f64 = 0.0;
    match spec.kind {
        FieldKind::Dirac => {
            let walk = DiracWalk::new(st, spec.mass)?;
            for _ in 0..n_samples {
                let f = random_doubled_in_region(st, r1, &mut rng);
                let h = random_doubled_in_region(st, r2, &mut rng);
                let v = dirac_form(&walk, &f, &h)?;
                max_violation = max_violation.max(v.norm());
                // Even-element commutator expansion coefficients: the cross
                // anticommutators {B(x), B(y)} = (Γx, y).
                let gf = gamma_conj(&walk.alg, &f);
                let w = dirac_form(&walk, &gf, &h)?;
                proxy = proxy.max(w.norm()).max(v.norm());
            }
        }
        _ => {
            let degree = spec.degree();
            for _ in 0..n_samples {
                let mut f = random_cochain(st, degree, &mut rng, None);
                f = restrict_to_region(st, &f, r1);
                let mut h = random_cochain(st, degree, &mut rng, None);
                h = restrict_to_region(st, &h, r2);
                if spec.kind == FieldKind::MaxwellLorenz {
                    // Coclosed variants: δ of 2-forms restricted to the
                    // region shrunk by one stencil cell, so δ's widening
                    // stays inside the region exactly.
                    let s1 = shrink_region(st, r1);
                    let s2 = shrink_region(st, r2);
                    let b1 = restrict_to_region(st, &random_cochain(st, 2, &mut rng, None), &s1);
                    let b2 = restrict_to_region(st, &random_cochain(st, 2, &mut rng, None), &s2);
                    f = crate::lattice::codifferential(st, &b1)?;
                    h = crate::lattice::codifferential(st, &b2)?;
                }
                let v = sigma_of(st, spec, &f, &h)?;
                max_violation = max_violation.max(v.abs());
            }
        }
    }
    Ok(CausalityReport {
        max_violation,
        samples: n_samples,
        seed,
        separated,
        even_commutator_proxy: if spec.kind == FieldKind::Dirac { Some(proxy) } else { None },
    })
}

/// Cells of r whose full stencil neighbourhood (one step in time and one
/// site per axis) stays inside r.
pub fn shrink_region(st: &Spacetime, r: &Region) -> Region {
    let mut out = Region::default();
    for &(t, x) in &r.cells {
        if t == 0 || t + 1 >= st.steps {
            continue;
        }
        let coords = st.site_coords(x);
        let mut ok = r.contains(t - 1, x) && r.contains(t + 1, x);
        'axes: for k in 0..st.dim {
            for delta in [-1isize, 1] {
                let mut ccc = coords.clone();
                let n = st.sites[k] as isize;
                let nv = (ccc[k] as isize + delta).rem_euclid(n) as usize;
                ccc[k] = nv;
                let y = st.site_index(&ccc);
                if !r.contains(t - 1, y) || !r.contains(t, y) || !r.contains(t + 1, y) {
                    ok = false;
                    break 'axes;
                }
            }
        }
        if ok {
            out.cells.insert((t, x));
        }
    }
    out
}

pub fn random_doubled_in_region(
    st: &Spacetime,
    r: &Region,
    rng: &mut impl rand::Rng,
) -> DoubledSection {
    let mut d = DoubledSection::zeros(st);
    for &(t, x) in &r.cells {
        for comp in 0..4 {
            d.spinor.data[t][4 * x + comp] =
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            d.cospinor.data[t][4 * x + comp] =
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::interior_window;
    use crate::lattice::{build_spacetime, Boundary, Metric, SpacetimeConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat(d: usize, n: usize, steps: usize, dt: f64, boundary: Boundary) -> Spacetime {
        build_spacetime(&SpacetimeConfig {
            dim: d,
            sites: vec![n; d],
            spacing: 1.0,
            dt,
            steps,
            boundary,
            metric: Metric::Flat,
        })
        .unwrap()
    }

    fn interior_random(st: &Spacetime, degree: usize, seed: u64) -> Cochain {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = interior_window(st);
        random_cochain(st, degree, &mut rng, Some(w))
    }

    #[test]
    fn sigma_proca_antisymmetric_and_kernel_invariant() {
        let st = flat(1, 16, 14, 0.5, Boundary::Periodic);
        let f = interior_random(&st, 1, 1);
        let h = interior_random(&st, 1, 2);
        let s_ff = sigma_proca(&st, 1.0, &f, &f).unwrap();
        assert!(s_ff.abs() <= 1e-12 * f.norm().powi(2));
        let s_fh = sigma_proca(&st, 1.0, &f, &h).unwrap();
        let s_hf = sigma_proca(&st, 1.0, &h, &f).unwrap();
        assert!((s_fh + s_hf).abs() <= 1e-11 * s_fh.abs().max(1.0));
        // σ(f + (δd+m²)g, h) = σ(f, h).
        let g = interior_random(&st, 1, 3);
        let spec = FieldOperatorSpec::new(FieldKind::Proca, 1.0).unwrap();
        let opg = crate::dynamics::apply_eom_operator(&st, &spec, &g).unwrap();
        let f2 = f.add(&opg).unwrap();
        let s2 = sigma_proca(&st, 1.0, &f2, &h).unwrap();
        assert!((s2 - s_fh).abs() <= 1e-10 * s_fh.abs().max(1.0));
        assert!(matches!(sigma_proca(&st, 0.0, &f, &h), Err(Error::MasslessNotAllowed)));
    }

    #[test]
    fn sigma_maxwell_representative_invariance() {
        let st = flat(1, 12, 14, 0.5, Boundary::Dirichlet);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = interior_window(&st);
        let f = crate::lattice::codifferential(
            &st,
            &random_cochain(&st, 2, &mut rng, Some(w)),
        )
        .unwrap();
        let h = crate::lattice::codifferential(
            &st,
            &random_cochain(&st, 2, &mut rng, Some(w)),
        )
        .unwrap();
        let s = sigma_maxwell(&st, &f, &h).unwrap();
        assert!(sigma_maxwell(&st, &f, &f).unwrap().abs() <= 1e-12 * f.norm().powi(2));
        // Representative change f -> f + δβ with closed interior β.
        let beta = crate::gauge::random_closed_interior_witness(&st, &mut rng);
        let f2 = f.add(&crate::lattice::codifferential(&st, &beta).unwrap()).unwrap();
        let s2 = sigma_maxwell(&st, &f2, &h).unwrap();
        assert!((s2 - s).abs() <= 1e-10 * s.abs().max(1.0), "{s2} vs {s}");
        // Periodic lattices are rejected.
        let per = flat(1, 12, 14, 0.5, Boundary::Periodic);
        let fp = interior_random(&per, 1, 9);
        assert!(matches!(
            sigma_maxwell(&per, &fp, &fp),
            Err(Error::NontrivialTopology)
        ));
    }

    #[test]
    fn weyl_relations() {
        let st = flat(1, 12, 12, 0.5, Boundary::Periodic);
        let spec = FieldOperatorSpec::new(FieldKind::ScalarWave, 1.0).unwrap();
        let basis: Vec<Cochain> = (0..4).map(|k| interior_random(&st, 0, 20 + k)).collect();
        let cache = assemble_sigma_cache(&st, &spec, &basis).unwrap();
        assert!(cache.antisymmetry_defect() <= 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rand_vec = |rng: &mut ChaCha8Rng| {
            RVec::from_fn(cache.dim, |_, _| rng.random_range(-1.0..1.0))
        };
        let u = WeylElement::generator(&cache, rand_vec(&mut rng)).unwrap();
        let v = WeylElement::generator(&cache, rand_vec(&mut rng)).unwrap();
        let w = WeylElement::generator(&cache, rand_vec(&mut rng)).unwrap();
        let e = WeylElement::identity(&cache);
        // W(u) W(0) = W(u).
        let prod = weyl_mul(&u, &e, &cache).unwrap();
        assert!(prod.distance(&u) <= 1e-12);
        // W(u) W(-u) = W(0) with unit phase.
        let minus_u = WeylElement {
            cache_id: cache.id,
            terms: vec![(-u.terms[0].0.clone(), C64::new(1.0, 0.0))],
        };
        let prod = weyl_mul(&u, &minus_u, &cache).unwrap();
        assert!(prod.distance(&e) <= 1e-12);
        // Unitarity of generators: W(u) W(u)* = W(0).
        let prod = weyl_mul(&u, &weyl_star(&u), &cache).unwrap();
        assert!(prod.distance(&e) <= 1e-12);
        // Associativity.
        let ab_c = weyl_mul(&weyl_mul(&u, &v, &cache).unwrap(), &w, &cache).unwrap();
        let a_bc = weyl_mul(&u, &weyl_mul(&v, &w, &cache).unwrap(), &cache).unwrap();
        assert!(ab_c.distance(&a_bc) <= 1e-12);
        // Star anti-multiplicativity: (W(u)W(v))* = W(v)* W(u)*.
        let lhs = weyl_star(&weyl_mul(&u, &v, &cache).unwrap());
        let rhs = weyl_mul(&weyl_star(&v), &weyl_star(&u), &cache).unwrap();
        assert!(lhs.distance(&rhs) <= 1e-12);
        // Star is involutive on random combinations.
        let mut elem = u.add(&v.scaled(C64::new(0.3, -0.7))).unwrap();
        elem = elem.add(&w.scaled(C64::new(-0.1, 0.2))).unwrap();
        assert!(weyl_star(&weyl_star(&elem)).distance(&elem) <= 1e-14);
        // Basis mismatch is rejected.
        let cache2 = assemble_sigma_cache(&st, &spec, &basis).unwrap();
        assert!(matches!(weyl_mul(&u, &e, &cache2), Err(Error::BasisMismatch)));
    }

    #[test]
    fn dirac_form_properties() {
        let st = flat(1, 8, 12, 1.0, Boundary::Periodic);
        let walk = DiracWalk::new(&st, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut band = Region::default();
        for t in 3..8 {
            for x in 0..8 {
                band.cells.insert((t, x));
            }
        }
        let f = random_doubled_in_region(&st, &band, &mut rng);
        let h = random_doubled_in_region(&st, &band, &mut rng);
        // (f, f) real and nonnegative.
        let ff = dirac_form(&walk, &f, &f).unwrap();
        assert!(ff.im.abs() <= 1e-10 * ff.re.abs().max(1.0), "imag part {}", ff.im);
        assert!(ff.re >= -1e-9 * f.norm().powi(2), "negative norm {}", ff.re);
        // Hermitian: (f,h) = conj((h,f)).
        let fh = dirac_form(&walk, &f, &h).unwrap();
        let hf = dirac_form(&walk, &h, &f).unwrap();
        assert!((fh - hf.conj()).norm() <= 1e-10 * fh.norm().max(1.0));
        // Γ-compatibility (antiunitarity): (Γf, Γh) = conj((f,h)); combined
        // with hermiticity this is the conjugation relation of the algebra.
        let gf = gamma_conj(&walk.alg, &f);
        let gh = gamma_conj(&walk.alg, &h);
        let gfgh = dirac_form(&walk, &gf, &gh).unwrap();
        assert!((gfgh - fh.conj()).norm() <= 1e-10 * fh.norm().max(1.0));
        // Γ² = id.
        let ggf = gamma_conj(&walk.alg, &gf);
        assert_eq!(ggf.spinor.sub(&f.spinor).norm(), 0.0);
        assert_eq!(ggf.cospinor.sub(&f.cospinor).norm(), 0.0);
        // Zero maps to zero.
        let z = DoubledSection::zeros(&st);
        assert_eq!(dirac_form(&walk, &z, &z).unwrap().norm(), 0.0);
    }

    #[test]
    fn causality_spacelike_regions_vanish() {
        let st = flat(1, 32, 10, 0.5, Boundary::Dirichlet);
        let r1 = Region::from_pairs((3..=6).flat_map(|t| (2..8).map(move |x| (t, x))));
        let r2 = Region::from_pairs((3..=6).flat_map(|t| (18..24).map(move |x| (t, x))));
        for (kind, mass) in [
            (FieldKind::ScalarWave, 1.0),
            (FieldKind::Proca, 1.0),
            (FieldKind::MaxwellLorenz, 0.0),
        ] {
            let spec = FieldOperatorSpec::new(kind, mass).unwrap();
            let rep = causality_report(&st, &spec, &r1, &r2, 5, 42, false).unwrap();
            assert!(rep.separated);
            assert!(rep.max_violation <= 1e-11, "{kind:?}: {}", rep.max_violation);
        }
        // Overlapping negative control exceeds the threshold.
        let spec = FieldOperatorSpec::new(FieldKind::ScalarWave, 1.0).unwrap();
        let rep = causality_report(&st, &spec, &r1, &r1, 5, 42, true).unwrap();
        assert!(!rep.separated);
        assert!(rep.max_violation > 1e-3, "control too small: {}", rep.max_violation);
        assert!(matches!(
            causality_report(&st, &spec, &r1, &r1, 5, 42, false),
            Err(Error::RegionsNotSeparated)
        ));
        // Empty region reports zero.
        let rep = causality_report(&st, &spec, &Region::default(), &r2, 5, 42, false).unwrap();
        assert_eq!(rep.max_violation, 0.0);
    }

    #[test]
    fn causality_dirac_spacelike() {
        let st = flat(1, 24, 8, 1.0, Boundary::Periodic);
        let spec = FieldOperatorSpec { kind: FieldKind::Dirac, mass: 1.0 };
        let r1 = Region::from_pairs((3..=4).flat_map(|t| (2..4).map(move |x| (t, x))));
        let r2 = Region::from_pairs((3..=4).flat_map(|t| (14..16).map(move |x| (t, x))));
        let rep = causality_report(&st, &spec, &r1, &r2, 5, 7, false).unwrap();
        assert!(rep.separated);
        assert!(rep.max_violation <= 1e-10);
        assert!(rep.even_commutator_proxy.unwrap() <= 1e-10);
        let rep = causality_report(&st, &spec, &r1, &r1, 5, 7, true).unwrap();
        assert!(rep.max_violation > 1e-3);
    }

    #[test]
    fn morphism_preserves_sigma_and_composes() {
        let small = flat(1, 12, 10, 0.5, Boundary::Periodic);
        let big = flat(1, 12, 16, 0.5, Boundary::Periodic);
        let bigger = flat(1, 12, 24, 0.5, Boundary::Periodic);
        let e1 = Embedding::new(&small, &big, 2, vec![3]).unwrap();
        let e2 = Embedding::new(&big, &bigger, 4, vec![5]).unwrap();
        let spec = FieldOperatorSpec::new(FieldKind::ScalarWave, 1.0).unwrap();
        let basis: Vec<Cochain> = (0..3).map(|k| interior_random(&small, 0, 50 + k)).collect();
        let pushed = AlgebraMorphism::push_basis(&e1, &basis).unwrap();
        let cache_src = assemble_sigma_cache(&small, &spec, &basis).unwrap();
        let cache_dst = assemble_sigma_cache(&big, &spec, &pushed).unwrap();
        // σ preserved entrywise.
        assert!((&cache_src.sigma - &cache_dst.sigma).norm() <= 1e-10 * cache_src.sigma.norm());
        let m = AlgebraMorphism::new(e1.clone(), &cache_src, &cache_dst).unwrap();
        let u = WeylElement::generator(&cache_src, RVec::from_vec(vec![1.0, -0.5, 0.25]))
            .unwrap();
        let pushed_u = m.apply(&u).unwrap();
        assert_eq!(pushed_u.cache_id, cache_dst.id);
        // Composition law at the bookkeeping level: α_{e2∘e1} = α_{e2}∘α_{e1}.
        let comp = e1.compose(&e2).unwrap();
        assert_eq!(comp.time_offset, e1.time_offset + e2.time_offset);
        assert_eq!(comp.spatial_shift[0], (3 + 5) % 12);
        let via_comp = comp.push_cochain(&basis[0]).unwrap();
        let via_steps = e2.push_cochain(&e1.push_cochain(&basis[0]).unwrap()).unwrap();
        assert_eq!(via_comp.sub(&via_steps).unwrap().norm(), 0.0);
        // Identity embedding acts as the identity.
        let id = Embedding::identity(&small);
        assert_eq!(id.push_cochain(&basis[0]).unwrap().sub(&basis[0]).unwrap().norm(), 0.0);
    }
}
