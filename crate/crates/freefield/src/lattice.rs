//! Discretized ultrastatic spacetimes and a Lorentzian exterior calculus on
//! the product cubical lattice.
//!
//! The spacetime is a product of an open time chain (spacing `dt`, `steps`
//! slices) and a spatial cubical lattice (spacing `a`, periodic or Dirichlet
//! walls, per-site diagonal metric weight `h`). A degree-p cochain stores one
//! value per p-cell, grouped into blocks by the set of axes the cell extends
//! along (axis 0 is time). The coboundary `d` is the incidence map divided by
//! the cell extent, so `d∘d = 0` holds exactly; the Hodge star is diagonal.
//!
//! Sign conventions, fixed once and enforced by tests:
//!   g = diag(-1, h, ..., h),  vol = h^{d/2} a^d dt,
//!   star weight on a cell with direction set I:
//!       w(I) = sign(I, I^c) * ( - prod_{mu in I} g^{mu mu} ) * h^{d/2},
//! which gives <f, h> = sum f h W with W = -(prod g^{mu mu}) h^{d/2} a^d dt,
//! in particular <1, 1> = -Vol on 0-forms, and ** = -(-1)^{p(D-p)}.
//! The codifferential is the exact W-adjoint of d (equal to *^{-1} d * under
//! these conventions), so <df, h> = <f, delta h> is a matrix identity.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// Spacetime configuration as accepted on the CLI boundary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpacetimeConfig {
    pub dim: usize,
    pub sites: Vec<usize>,
    pub spacing: f64,
    pub dt: f64,
    pub steps: usize,
    pub boundary: Boundary,
    #[serde(default)]
    pub metric: Metric,
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum Metric {
    #[default]
    #[serde(rename = "flat")]
    Flat,
    Weights(Vec<f64>),
}

/// A validated discrete ultrastatic spacetime.
#[derive(Clone, Debug)]
pub struct Spacetime {
    pub dim: usize,
    pub sites: Vec<usize>,
    pub spacing: f64,
    pub dt: f64,
    pub steps: usize,
    pub boundary: Boundary,
    /// Per-site isotropic metric weight h(x); the spatial line element is
    /// h(x) a^2 per axis.
    pub metric: Vec<f64>,
}

/// Builds and validates a spacetime. The CFL-style bound checked here is
/// dt <= a * (min coordinate light speed) = a / sqrt(max h).
pub fn build_spacetime(cfg: &SpacetimeConfig) -> Result<Spacetime> {
    if cfg.dim == 0 || cfg.dim > 3 {
        return Err(Error::ConfigError(format!("spatial dim {} not in 1..=3", cfg.dim)));
    }
    if cfg.sites.len() != cfg.dim || cfg.sites.iter().any(|&n| n < 2) {
        return Err(Error::ConfigError("need >= 2 sites per spatial axis".into()));
    }
    if cfg.spacing <= 0.0 || cfg.dt <= 0.0 || cfg.steps < 3 {
        return Err(Error::ConfigError("need spacing > 0, dt > 0, steps >= 3".into()));
    }
    let n_sites: usize = cfg.sites.iter().product();
    let metric = match &cfg.metric {
        Metric::Flat => vec![1.0; n_sites],
        Metric::Weights(w) => {
            if w.len() != n_sites {
                return Err(Error::ConfigError(format!(
                    "metric array has {} entries, lattice has {} sites",
                    w.len(),
                    n_sites
                )));
            }
            w.clone()
        }
    };
    for (site, &w) in metric.iter().enumerate() {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidMetric { site, weight: w });
        }
    }
    let h_max = metric.iter().cloned().fold(0.0_f64, f64::max);
    let bound = cfg.spacing / h_max.sqrt();
    if cfg.dt > bound * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt: cfg.dt, bound });
    }
    Ok(Spacetime {
        dim: cfg.dim,
        sites: cfg.sites.clone(),
        spacing: cfg.spacing,
        dt: cfg.dt,
        steps: cfg.steps,
        boundary: cfg.boundary,
        metric,
    })
}

impl Spacetime {
    /// Total axes of the spacetime complex (time + space).
    pub fn axes(&self) -> usize {
        self.dim + 1
    }

    pub fn site_count(&self) -> usize {
        self.sites.iter().product()
    }

    pub fn site_index(&self, coords: &[usize]) -> usize {
        let mut idx = 0;
        for (k, &c) in coords.iter().enumerate() {
            idx = idx * self.sites[k] + c;
        }
        idx
    }

    pub fn site_coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        for k in (0..self.dim).rev() {
            c[k] = idx % self.sites[k];
            idx /= self.sites[k];
        }
        c
    }

    /// Extent of the position index along `axis` for cells that extend along
    /// it (`edge = true`) or sit on it (`edge = false`). Axis 0 is time.
    pub fn extent(&self, axis: usize, edge: bool) -> usize {
        if axis == 0 {
            if edge { self.steps - 1 } else { self.steps }
        } else {
            let n = self.sites[axis - 1];
            match (edge, self.boundary) {
                (false, _) => n,
                (true, Boundary::Periodic) => n,
                (true, Boundary::Dirichlet) => n + 1,
            }
        }
    }

    pub fn axis_spacing(&self, axis: usize) -> f64 {
        if axis == 0 { self.dt } else { self.spacing }
    }

    /// Endpoint site indices of an edge along `axis`; `None` marks the
    /// phantom zero site outside a Dirichlet wall.
    pub fn edge_ends(&self, axis: usize, e: usize) -> (Option<usize>, Option<usize>) {
        if axis == 0 {
            (Some(e), Some(e + 1))
        } else {
            let n = self.sites[axis - 1];
            match self.boundary {
                Boundary::Periodic => (Some(e), Some((e + 1) % n)),
                Boundary::Dirichlet => (
                    if e == 0 { None } else { Some(e - 1) },
                    if e == n { None } else { Some(e) },
                ),
            }
        }
    }

    /// Signature used to detect lattice mismatches between cochains.
    pub fn signature(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.dim.hash(&mut h);
        self.sites.hash(&mut h);
        self.steps.hash(&mut h);
        (self.boundary == Boundary::Periodic).hash(&mut h);
        self.spacing.to_bits().hash(&mut h);
        self.dt.to_bits().hash(&mut h);
        for w in &self.metric {
            w.to_bits().hash(&mut h);
        }
        h.finish()
    }

    fn h_at(&self, spatial: &[usize]) -> f64 {
        self.metric[self.site_index(spatial)]
    }
}

/// Masks of the given popcount over `axes` axes, ascending; fixes the block
/// order of a cochain.
pub fn masks_of_degree(axes: usize, p: usize) -> Vec<u32> {
    (0u32..(1 << axes)).filter(|m| m.count_ones() as usize == p).collect()
}

fn shuffle_sign(mask: u32, axes: usize) -> f64 {
    // Sign of the shuffle permutation sending (I, I^c) to (0..axes):
    // (-1)^{number of pairs (i in I, j not in I) with j < i}.
    let mut parity = 0usize;
    let mut seen_outside = 0usize;
    for axis in 0..axes {
        if mask & (1 << axis) != 0 {
            parity += seen_outside;
        } else {
            seen_outside += 1;
        }
    }
    if parity % 2 == 0 { 1.0 } else { -1.0 }
}

/// A degree-p cochain on the spacetime complex (or on its dual when `dual`).
#[derive(Clone, Debug, PartialEq)]
pub struct Cochain {
    pub degree: usize,
    pub dual: bool,
    pub sig: u64,
    /// One flat array per direction mask, in `masks_of_degree` order.
    /// Position index is row-major with time slowest.
    pub blocks: Vec<Vec<f64>>,
}

impl Cochain {
    pub fn zeros(st: &Spacetime, degree: usize) -> Self {
        let axes = st.axes();
        let blocks = masks_of_degree(axes, degree)
            .iter()
            .map(|&m| vec![0.0; block_len(st, m)])
            .collect();
        Cochain { degree, dual: false, sig: st.signature(), blocks }
    }

    pub fn norm(&self) -> f64 {
        self.blocks.iter().flat_map(|b| b.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut c = self.clone();
        for b in &mut c.blocks {
            for v in b {
                *v *= s;
            }
        }
        c
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.degree != other.degree || self.dual != other.dual || self.sig != other.sig {
            return Err(Error::LatticeMismatch);
        }
        let mut c = self.clone();
        for (b, ob) in c.blocks.iter_mut().zip(&other.blocks) {
            for (v, w) in b.iter_mut().zip(ob) {
                *v += w;
            }
        }
        Ok(c)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.norm() <= tol
    }

    /// Flattens all blocks into one vector (basis order is fixed).
    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.iter().cloned()).collect()
    }

    pub fn from_flat(st: &Spacetime, degree: usize, flat: &[f64]) -> Self {
        let mut c = Cochain::zeros(st, degree);
        let mut off = 0;
        for b in &mut c.blocks {
            let len = b.len();
            b.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        assert_eq!(off, flat.len());
        c
    }
}

pub fn block_len(st: &Spacetime, mask: u32) -> usize {
    (0..st.axes()).map(|ax| st.extent(ax, mask & (1 << ax) != 0)).product()
}

/// Decomposes a flat position index of the block `mask` into per-axis indices.
pub fn unflatten(st: &Spacetime, mask: u32, mut pos: usize) -> Vec<usize> {
    let axes = st.axes();
    let mut out = vec![0; axes];
    for ax in (0..axes).rev() {
        let ext = st.extent(ax, mask & (1 << ax) != 0);
        out[ax] = pos % ext;
        pos /= ext;
    }
    out
}

pub fn flatten(st: &Spacetime, mask: u32, idx: &[usize]) -> usize {
    let axes = st.axes();
    let mut pos = 0;
    for ax in 0..axes {
        let ext = st.extent(ax, mask & (1 << ax) != 0);
        debug_assert!(idx[ax] < ext);
        pos = pos * ext + idx[ax];
    }
    pos
}

/// Metric scalar of a cell: average over the real sites the cell touches of
/// h^{d/2} / h^{|I ∩ space|}; g^{00} contributes no h factor.
fn cell_metric_scalar(st: &Spacetime, mask: u32, idx: &[usize]) -> f64 {
    let d = st.dim;
    let spatial_edges: Vec<usize> = (1..st.axes()).filter(|ax| mask & (1 << ax) != 0).collect();
    let k = spatial_edges.len();
    // Corner spatial sites: fixed coordinates for on-site axes, both edge
    // ends (skipping phantoms) for edge axes.
    let mut corners: Vec<Vec<usize>> = vec![Vec::new()];
    let mut coords = vec![0usize; d];
    for ax in 1..st.axes() {
        if mask & (1 << ax) == 0 {
            coords[ax - 1] = idx[ax];
        }
    }
    for &ax in &spatial_edges {
        let (lo, hi) = st.edge_ends(ax, idx[ax]);
        let mut next = Vec::new();
        for c in &corners {
            for end in [lo, hi].into_iter().flatten() {
                let mut cc = c.clone();
                cc.push(end);
                next.push(cc);
            }
        }
        corners = next;
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for corner in &corners {
        for (j, &ax) in spatial_edges.iter().enumerate() {
            coords[ax - 1] = corner[j];
        }
        let h = st.h_at(&coords);
        acc += h.powf(d as f64 / 2.0 - k as f64);
        count += 1;
    }
    if count == 0 {
        // Purely phantom-supported corner set (wall edge of a 1d lattice);
        // use the flat value to keep the weight positive.
        1.0
    } else {
        acc / count as f64
    }
}

/// Diagonal pairing weight W_p(cell) = -(prod_{mu in I} g^{mu mu}) h-scalar a^d dt.
pub fn cell_weight(st: &Spacetime, mask: u32, idx: &[usize]) -> f64 {
    let vol = st.spacing.powi(st.dim as i32) * st.dt;
    let time_sign = if mask & 1 != 0 { -1.0 } else { 1.0 };
    // prod g^{mu mu} = time_sign * (1/h)^k, folded into cell_metric_scalar.
    -time_sign * cell_metric_scalar(st, mask, idx) * vol
}

/// Star weight w(I) = sign(I, I^c) * (-(prod g^{mu mu})) * h^{d/2}-scalar.
fn star_weight(st: &Spacetime, mask: u32, idx: &[usize]) -> f64 {
    let time_sign = if mask & 1 != 0 { -1.0 } else { 1.0 };
    shuffle_sign(mask, st.axes()) * (-time_sign) * cell_metric_scalar(st, mask, idx)
}

/// Exterior derivative (coboundary divided by cell extents).
pub fn exterior_derivative(st: &Spacetime, c: &Cochain) -> Result<Cochain> {
    if c.dual {
        return Err(Error::DegreeUnsupported(c.degree));
    }
    if c.sig != st.signature() {
        return Err(Error::LatticeMismatch);
    }
    let axes = st.axes();
    if c.degree >= axes {
        return Err(Error::DegreeOverflow(c.degree));
    }
    let p = c.degree;
    let in_masks = masks_of_degree(axes, p);
    let out_masks = masks_of_degree(axes, p + 1);
    let mut out = Cochain::zeros(st, p + 1);
    out.degree = p + 1;
    for (ob, &om) in out.blocks.iter_mut().zip(&out_masks) {
        for pos in 0..ob.len() {
            let idx = unflatten(st, om, pos);
            let mut acc = 0.0;
            for mu in 0..axes {
                if om & (1 << mu) == 0 {
                    continue;
                }
                let sgn = if ((om & ((1 << mu) - 1)).count_ones() % 2) == 1 { -1.0 } else { 1.0 };
                let fm = om & !(1 << mu);
                let fb = in_masks.iter().position(|&m| m == fm).unwrap();
                let (lo, hi) = st.edge_ends(mu, idx[mu]);
                let mut fidx = idx.clone();
                let mut diff = 0.0;
                if let Some(hiu) = hi {
                    fidx[mu] = hiu;
                    diff += c.blocks[fb][flatten(st, fm, &fidx)];
                }
                if let Some(lou) = lo {
                    fidx[mu] = lou;
                    diff -= c.blocks[fb][flatten(st, fm, &fidx)];
                }
                acc += sgn * diff / st.axis_spacing(mu);
            }
            ob[pos] = acc;
        }
    }
    Ok(out)
}

/// Codifferential: the exact W-adjoint of `d`, so `<df,h> = <f, delta h>`
/// holds as a matrix identity and `delta∘delta = 0` exactly.
pub fn codifferential(st: &Spacetime, c: &Cochain) -> Result<Cochain> {
    if c.dual {
        return Err(Error::DegreeUnsupported(c.degree));
    }
    if c.sig != st.signature() {
        return Err(Error::LatticeMismatch);
    }
    if c.degree == 0 {
        return Err(Error::DegreeUnderflow);
    }
    let axes = st.axes();
    let p = c.degree;
    let in_masks = masks_of_degree(axes, p);
    let out_masks = masks_of_degree(axes, p - 1);
    let mut out = Cochain::zeros(st, p - 1);
    for (ib, &im) in c.blocks.iter().zip(&in_masks) {
        for pos in 0..ib.len() {
            let v = ib[pos];
            if v == 0.0 {
                continue;
            }
            let idx = unflatten(st, im, pos);
            let w_cell = cell_weight(st, im, &idx);
            for mu in 0..axes {
                if im & (1 << mu) == 0 {
                    continue;
                }
                let sgn = if ((im & ((1 << mu) - 1)).count_ones() % 2) == 1 { -1.0 } else { 1.0 };
                let fm = im & !(1 << mu);
                let fb = out_masks.iter().position(|&m| m == fm).unwrap();
                let (lo, hi) = st.edge_ends(mu, idx[mu]);
                let coef = sgn * w_cell / st.axis_spacing(mu);
                let mut fidx = idx.clone();
                if let Some(hiu) = hi {
                    fidx[mu] = hiu;
                    let fpos = flatten(st, fm, &fidx);
                    out.blocks[fb][fpos] += coef * v;
                }
                if let Some(lou) = lo {
                    fidx[mu] = lou;
                    let fpos = flatten(st, fm, &fidx);
                    out.blocks[fb][fpos] -= coef * v;
                }
            }
        }
    }
    for (ob, &om) in out.blocks.iter_mut().zip(&out_masks) {
        for pos in 0..ob.len() {
            let idx = unflatten(st, om, pos);
            ob[pos] /= cell_weight(st, om, &idx);
        }
    }
    Ok(out)
}

/// Diagonal Hodge star. Primal p-cochains land on the dual complex (stored on
/// the canonical primal p-cells with the `dual` flag set and degree D - p).
/// The dual star is the canonical closure: applying the star twice returns
/// -(-1)^{p(D-p)} times the input exactly, for any metric.
pub fn hodge_star(st: &Spacetime, c: &Cochain) -> Result<Cochain> {
    if c.sig != st.signature() {
        return Err(Error::LatticeMismatch);
    }
    let axes = st.axes();
    let mut out = c.clone();
    let p_cells = if c.dual { axes - c.degree } else { c.degree };
    let masks = masks_of_degree(axes, p_cells);
    for (ob, &m) in out.blocks.iter_mut().zip(&masks) {
        for pos in 0..ob.len() {
            let idx = unflatten(st, m, pos);
            if c.dual {
                let p = axes - c.degree;
                let sign = -if (p * (axes - p)) % 2 == 0 { 1.0 } else { -1.0 };
                ob[pos] *= sign / star_weight(st, m, &idx);
            } else {
                ob[pos] *= star_weight(st, m, &idx);
            }
        }
    }
    out.dual = !c.dual;
    out.degree = axes - c.degree;
    Ok(out)
}

/// Lorentzian inner product pairing <f, h> = sum over cells of f h W.
pub fn pairing(st: &Spacetime, f: &Cochain, h: &Cochain) -> Result<f64> {
    if f.degree != h.degree {
        return Err(Error::DegreeMismatch(f.degree, h.degree));
    }
    if f.dual || h.dual || f.sig != st.signature() || h.sig != st.signature() {
        return Err(Error::LatticeMismatch);
    }
    let masks = masks_of_degree(st.axes(), f.degree);
    let mut acc = 0.0;
    for ((fb, hb), &m) in f.blocks.iter().zip(&h.blocks).zip(&masks) {
        for pos in 0..fb.len() {
            let prod = fb[pos] * hb[pos];
            if prod != 0.0 {
                let idx = unflatten(st, m, pos);
                acc += prod * cell_weight(st, m, &idx);
            }
        }
    }
    Ok(acc)
}

/// Laplace-de Rham operator dδ + δd; on 0-forms this is -box_g.
pub fn laplace_de_rham(st: &Spacetime, c: &Cochain) -> Result<Cochain> {
    let axes = st.axes();
    let mut out = Cochain::zeros(st, c.degree);
    if c.degree > 0 {
        let dd = exterior_derivative(st, &codifferential(st, c)?)?;
        out = out.add(&dd)?;
    }
    if c.degree < axes {
        let sd = codifferential(st, &exterior_derivative(st, c)?)?;
        out = out.add(&sd)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Regions and causal structure
// ---------------------------------------------------------------------------

/// A set of (time slice, flat spatial site) pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub cells: BTreeSet<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CausalDirection {
    Future,
    Past,
}

impl Region {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Region { cells: pairs.into_iter().collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn full(st: &Spacetime) -> Self {
        let mut cells = BTreeSet::new();
        for t in 0..st.steps {
            for x in 0..st.site_count() {
                cells.insert((t, x));
            }
        }
        Region { cells }
    }

    pub fn slice(st: &Spacetime, t: usize) -> Self {
        Region { cells: (0..st.site_count()).map(|x| (t, x)).collect() }
    }

    pub fn union(&self, other: &Region) -> Region {
        Region { cells: self.cells.union(&other.cells).cloned().collect() }
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.cells.is_subset(&other.cells)
    }

    pub fn contains(&self, t: usize, x: usize) -> bool {
        self.cells.contains(&(t, x))
    }
}

/// Spatial sites within per-axis distance 1 of `site` (the stencil closure,
/// an l-infinity dilation), respecting the boundary.
fn dilate_site(st: &Spacetime, site: usize) -> Vec<usize> {
    let coords = st.site_coords(site);
    let mut out = vec![Vec::new()];
    for (k, &c) in coords.iter().enumerate() {
        let n = st.sites[k];
        let mut choices = vec![c];
        match st.boundary {
            Boundary::Periodic => {
                choices.push((c + 1) % n);
                choices.push((c + n - 1) % n);
            }
            Boundary::Dirichlet => {
                if c + 1 < n {
                    choices.push(c + 1);
                }
                if c > 0 {
                    choices.push(c - 1);
                }
            }
        }
        choices.sort_unstable();
        choices.dedup();
        let mut next = Vec::new();
        for prefix in &out {
            for &ch in &choices {
                let mut p = prefix.clone();
                p.push(ch);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter().map(|c| st.site_index(&c)).collect()
}

/// Discrete causal set J±(r): the stencil cone, one site per axis per step.
pub fn causal_set(st: &Spacetime, r: &Region, dir: CausalDirection) -> Region {
    let mut out = r.clone();
    let mut frontier: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); st.steps];
    for &(t, x) in &r.cells {
        frontier[t].insert(x);
    }
    match dir {
        CausalDirection::Future => {
            for t in 0..st.steps.saturating_sub(1) {
                let cur: Vec<usize> = frontier[t].iter().cloned().collect();
                for x in cur {
                    for y in dilate_site(st, x) {
                        frontier[t + 1].insert(y);
                    }
                }
                for &y in &frontier[t + 1] {
                    out.cells.insert((t + 1, y));
                }
            }
        }
        CausalDirection::Past => {
            for t in (1..st.steps).rev() {
                let cur: Vec<usize> = frontier[t].iter().cloned().collect();
                for x in cur {
                    for y in dilate_site(st, x) {
                        frontier[t - 1].insert(y);
                    }
                }
                for &y in &frontier[t - 1] {
                    out.cells.insert((t - 1, y));
                }
            }
        }
    }
    out
}

/// Lattice minus J+(r) ∪ J-(r).
pub fn causal_complement(st: &Spacetime, r: &Region) -> Region {
    if r.is_empty() {
        return Region::full(st);
    }
    let fut = causal_set(st, r, CausalDirection::Future);
    let past = causal_set(st, r, CausalDirection::Past);
    let shadow = fut.union(&past);
    let mut out = Region::default();
    for t in 0..st.steps {
        for x in 0..st.site_count() {
            if !shadow.contains(t, x) {
                out.cells.insert((t, x));
            }
        }
    }
    out
}

/// Causal convexity: for every ordered pair of region points the discrete
/// causal diamond between them stays inside the region.
pub fn is_causally_convex(st: &Spacetime, r: &Region) -> bool {
    let pts: Vec<(usize, usize)> = r.cells.iter().cloned().collect();
    for &(tx, x) in &pts {
        let fut = causal_set(st, &Region::from_pairs([(tx, x)]), CausalDirection::Future);
        for &(ty, y) in &pts {
            if ty <= tx {
                continue;
            }
            let past = causal_set(st, &Region::from_pairs([(ty, y)]), CausalDirection::Past);
            for &(t, z) in &fut.cells {
                if t > ty {
                    continue;
                }
                if past.contains(t, z) && !r.contains(t, z) {
                    return false;
                }
            }
        }
    }
    true
}

/// Support of a cochain as a region: every nonzero cell projected to the
/// (time slice, spatial site) pairs it touches.
pub fn support_region(st: &Spacetime, c: &Cochain, tol: f64) -> Region {
    let axes = st.axes();
    let p_cells = if c.dual { axes - c.degree } else { c.degree };
    let masks = masks_of_degree(axes, p_cells);
    let mut out = Region::default();
    for (b, &m) in c.blocks.iter().zip(&masks) {
        for pos in 0..b.len() {
            if b[pos].abs() <= tol {
                continue;
            }
            let idx = unflatten(st, m, pos);
            for pair in cell_projection(st, m, &idx) {
                out.cells.insert(pair);
            }
        }
    }
    out
}

/// The (time, site) pairs a single cell projects to.
pub fn cell_projection(st: &Spacetime, mask: u32, idx: &[usize]) -> Vec<(usize, usize)> {
    let axes = st.axes();
    let times: Vec<usize> = if mask & 1 != 0 { vec![idx[0], idx[0] + 1] } else { vec![idx[0]] };
    let mut corners: Vec<Vec<usize>> = vec![Vec::new()];
    for ax in 1..axes {
        let choices: Vec<usize> = if mask & (1 << ax) != 0 {
            let (lo, hi) = st.edge_ends(ax, idx[ax]);
            [lo, hi].into_iter().flatten().collect()
        } else {
            vec![idx[ax]]
        };
        let mut next = Vec::new();
        for prefix in &corners {
            for &ch in &choices {
                let mut pc = prefix.clone();
                pc.push(ch);
                next.push(pc);
            }
        }
        corners = next;
    }
    let mut out = Vec::new();
    for &t in &times {
        for corner in &corners {
            out.push((t, st.site_index(corner)));
        }
    }
    out
}

/// Zeroes every cell whose projected support is not inside `r`.
pub fn restrict_to_region(st: &Spacetime, c: &Cochain, r: &Region) -> Cochain {
    let axes = st.axes();
    let masks = masks_of_degree(axes, c.degree);
    let mut out = c.clone();
    for (b, &m) in out.blocks.iter_mut().zip(&masks) {
        for pos in 0..b.len() {
            if b[pos] == 0.0 {
                continue;
            }
            let idx = unflatten(st, m, pos);
            if !cell_projection(st, m, &idx).iter().all(|&(t, x)| r.contains(t, x)) {
                b[pos] = 0.0;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Spatial harmonic forms
// ---------------------------------------------------------------------------

/// Spatial cochain machinery: a one-slice view of the spacetime complex.
/// Spatial p-cochains are represented as spacetime cochains supported on a
/// single slice with no time-extending components; the positive-definite
/// spatial inner product is the spacetime pairing with the signs stripped.
pub struct SpatialOps<'a> {
    pub st: &'a Spacetime,
}

impl<'a> SpatialOps<'a> {
    pub fn new(st: &'a Spacetime) -> Self {
        SpatialOps { st }
    }

    /// Masks (spacetime convention, no time bit) of spatial degree q.
    pub fn masks(&self, q: usize) -> Vec<u32> {
        masks_of_degree(self.st.axes(), q).into_iter().filter(|m| m & 1 == 0).collect()
    }

    pub fn block_lens(&self, q: usize) -> Vec<usize> {
        self.masks(q)
            .iter()
            .map(|&m| {
                (1..self.st.axes())
                    .map(|ax| self.st.extent(ax, m & (1 << ax) != 0))
                    .product()
            })
            .collect()
    }

    pub fn dim(&self, q: usize) -> usize {
        self.block_lens(q).iter().sum()
    }

    /// Dense matrix of the spatial Hodge Laplacian on degree-q spatial forms,
    /// symmetrized with respect to the (positive) spatial weights.
    pub fn hodge_laplacian(&self, q: usize) -> crate::linalg::RMat {
        let n = self.dim(q);
        let mut m = crate::linalg::RMat::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.apply_laplacian(q, &e);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        // Symmetrize in the weighted inner product: L~ = W^{1/2} L W^{-1/2}.
        let w = self.weights(q);
        let mut sym = crate::linalg::RMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                sym[(i, j)] = w[i].sqrt() * m[(i, j)] / w[j].sqrt();
            }
        }
        // Clean round-off asymmetry.
        let symt = sym.transpose();
        (sym + symt) * 0.5
    }

    /// Positive spatial weights matching the block layout of degree q.
    pub fn weights(&self, q: usize) -> Vec<f64> {
        let st = self.st;
        let mut out = Vec::new();
        for &m in &self.masks(q) {
            let len: usize =
                (1..st.axes()).map(|ax| st.extent(ax, m & (1 << ax) != 0)).product();
            for pos in 0..len {
                let idx = self.unflatten_spatial(m, pos);
                out.push(cell_metric_scalar(st, m, &idx) * st.spacing.powi(st.dim as i32));
            }
        }
        out
    }

    fn unflatten_spatial(&self, m: u32, mut pos: usize) -> Vec<usize> {
        let st = self.st;
        let mut idx = vec![0usize; st.axes()];
        for ax in (1..st.axes()).rev() {
            let ext = st.extent(ax, m & (1 << ax) != 0);
            idx[ax] = pos % ext;
            pos /= ext;
        }
        idx
    }

    /// Embeds a flat spatial q-form vector on slice `t` of a zero spacetime
    /// cochain and returns it.
    pub fn embed(&self, q: usize, v: &[f64], t: usize) -> Cochain {
        let st = self.st;
        let mut c = Cochain::zeros(st, q);
        let all = masks_of_degree(st.axes(), q);
        let mut off = 0;
        for (bi, &m) in all.iter().enumerate() {
            if m & 1 != 0 {
                continue;
            }
            let len: usize =
                (1..st.axes()).map(|ax| st.extent(ax, m & (1 << ax) != 0)).product();
            for pos in 0..len {
                let mut idx = self.unflatten_spatial(m, pos);
                idx[0] = t;
                c.blocks[bi][flatten(st, m, &idx)] = v[off + pos];
            }
            off += len;
        }
        c
    }

    /// Extracts the spatial q-form on slice `t` as a flat vector.
    pub fn extract(&self, c: &Cochain, t: usize) -> Vec<f64> {
        let st = self.st;
        let q = c.degree;
        let all = masks_of_degree(st.axes(), q);
        let mut out = Vec::new();
        for (bi, &m) in all.iter().enumerate() {
            if m & 1 != 0 {
                continue;
            }
            let len: usize =
                (1..st.axes()).map(|ax| st.extent(ax, m & (1 << ax) != 0)).product();
            for pos in 0..len {
                let mut idx = self.unflatten_spatial(m, pos);
                idx[0] = t;
                out.push(c.blocks[bi][flatten(st, m, &idx)]);
            }
        }
        out
    }

    /// Applies the spatial Hodge Laplacian by routing a one-slice embedding
    /// through the spacetime d and δ with time-extending intermediates
    /// dropped. On a product complex that is exactly δ_h d_h + d_h δ_h.
    pub fn apply_laplacian(&self, q: usize, v: &[f64]) -> Vec<f64> {
        let st = self.st;
        let t = st.steps / 2;
        let c = self.embed(q, v, t);
        let mut acc = Cochain::zeros(st, q);
        if q > 0 {
            let dd = exterior_derivative(st, &self.spatial_only(&codifferential(st, &c).unwrap()))
                .unwrap();
            acc = acc.add(&dd).unwrap();
        }
        if q < st.axes() - 1 {
            let sd =
                codifferential(st, &self.spatial_only(&exterior_derivative(st, &c).unwrap()))
                    .unwrap();
            acc = acc.add(&sd).unwrap();
        }
        self.extract(&acc, t)
    }

    fn spatial_only(&self, c: &Cochain) -> Cochain {
        let st = self.st;
        let masks = masks_of_degree(st.axes(), c.degree);
        let mut out = c.clone();
        for (b, &m) in out.blocks.iter_mut().zip(&masks) {
            if m & 1 != 0 {
                for v in b.iter_mut() {
                    *v = 0.0;
                }
            }
        }
        out
    }

    /// True for cells that touch no Dirichlet wall (edges with both ends on
    /// real sites). Layout matches `weights`.
    pub fn interior_mask(&self, q: usize) -> Vec<bool> {
        let st = self.st;
        let mut out = Vec::new();
        for &m in &self.masks(q) {
            let len: usize =
                (1..st.axes()).map(|ax| st.extent(ax, m & (1 << ax) != 0)).product();
            for pos in 0..len {
                let idx = self.unflatten_spatial(m, pos);
                let mut interior = true;
                for ax in 1..st.axes() {
                    if m & (1 << ax) != 0 {
                        let (lo, hi) = st.edge_ends(ax, idx[ax]);
                        if lo.is_none() || hi.is_none() {
                            interior = false;
                        }
                    }
                }
                out.push(interior);
            }
        }
        out
    }
}

/// Basis of spatial harmonic 1-forms: the null space of the spatial Hodge
/// Laplacian restricted to cells away from Dirichlet walls, which detects
/// the ordinary first cohomology of the spatial manifold. Empty on interval
/// lattices; the periodic torus carries the constant forms.
pub fn harmonic_basis(st: &Spacetime, degree: usize) -> Result<Vec<Cochain>> {
    if degree != 1 {
        return Err(Error::DegreeUnsupported(degree));
    }
    let ops = SpatialOps::new(st);
    let lap = ops.hodge_laplacian(1);
    let interior = ops.interior_mask(1);
    let keep: Vec<usize> =
        interior.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect();
    let n = keep.len();
    let mut sub = crate::linalg::RMat::zeros(n, n);
    for (i2, &i) in keep.iter().enumerate() {
        for (j2, &j) in keep.iter().enumerate() {
            sub[(i2, j2)] = lap[(i, j)];
        }
    }
    let eig = sub.symmetric_eigen();
    let scale = eig.eigenvalues.iter().cloned().fold(0.0_f64, |a, b| a.max(b.abs()));
    let mut basis = Vec::new();
    let w = ops.weights(1);
    for j in 0..n {
        if eig.eigenvalues[j].abs() <= 1e-10 * scale.max(1.0) {
            let mut v = vec![0.0; interior.len()];
            for (i2, &i) in keep.iter().enumerate() {
                // Undo the W^{1/2} symmetrization.
                v[i] = eig.eigenvectors[(i2, j)] / w[i].sqrt();
            }
            basis.push(ops.embed(1, &v, st.steps / 2));
        }
    }
    Ok(basis)
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

/// A causally convex sublattice embedding: a time window combined with a
/// spatial translation (periodic lattices only for nonzero shifts). The
/// spatial extent must match the target's, which keeps the image causally
/// convex and the restricted propagator equal to the target's.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub source: Spacetime,
    pub target: Spacetime,
    pub time_offset: usize,
    pub spatial_shift: Vec<usize>,
}

impl Embedding {
    pub fn new(
        source: &Spacetime,
        target: &Spacetime,
        time_offset: usize,
        spatial_shift: Vec<usize>,
    ) -> Result<Self> {
        if source.dim != target.dim
            || source.sites != target.sites
            || source.boundary != target.boundary
        {
            return Err(Error::InvalidEmbedding(
                "source and target must share the spatial lattice".into(),
            ));
        }
        if (source.spacing - target.spacing).abs() > 1e-15
            || (source.dt - target.dt).abs() > 1e-15
        {
            return Err(Error::InvalidEmbedding("spacings must agree".into()));
        }
        if time_offset + source.steps > target.steps {
            return Err(Error::InvalidEmbedding("time window leaves the target".into()));
        }
        if spatial_shift.len() != source.dim {
            return Err(Error::InvalidEmbedding("shift arity".into()));
        }
        if spatial_shift.iter().any(|&s| s != 0) && source.boundary != Boundary::Periodic {
            return Err(Error::InvalidEmbedding(
                "nonzero spatial shifts need periodic boundaries".into(),
            ));
        }
        // Pullback of the target metric must equal the source metric.
        for x in 0..source.site_count() {
            let mut c = source.site_coords(x);
            for (k, cc) in c.iter_mut().enumerate() {
                *cc = (*cc + spatial_shift[k]) % source.sites[k];
            }
            let y = target.site_index(&c);
            if (source.metric[x] - target.metric[y]).abs() > 1e-14 {
                return Err(Error::InvalidEmbedding("metric pullback mismatch".into()));
            }
        }
        Ok(Embedding {
            source: source.clone(),
            target: target.clone(),
            time_offset,
            spatial_shift,
        })
    }

    pub fn identity(st: &Spacetime) -> Self {
        Embedding {
            source: st.clone(),
            target: st.clone(),
            time_offset: 0,
            spatial_shift: vec![0; st.dim],
        }
    }

    /// Composition target∘self (self: A -> B, other: B -> C).
    pub fn compose(&self, other: &Embedding) -> Result<Embedding> {
        if self.target.signature() != other.source.signature() {
            return Err(Error::InvalidEmbedding("composition lattices disagree".into()));
        }
        let shift: Vec<usize> = self
            .spatial_shift
            .iter()
            .zip(&other.spatial_shift)
            .zip(&self.source.sites)
            .map(|((a, b), &n)| (a + b) % n)
            .collect();
        Embedding::new(
            &self.source,
            &other.target,
            self.time_offset + other.time_offset,
            shift,
        )
    }

    /// Pushforward of a source cochain to the target lattice.
    pub fn push_cochain(&self, c: &Cochain) -> Result<Cochain> {
        if c.sig != self.source.signature() || c.dual {
            return Err(Error::LatticeMismatch);
        }
        let axes = self.source.axes();
        let masks = masks_of_degree(axes, c.degree);
        let mut out = Cochain::zeros(&self.target, c.degree);
        for (bi, &m) in masks.iter().enumerate() {
            for pos in 0..c.blocks[bi].len() {
                let v = c.blocks[bi][pos];
                if v == 0.0 {
                    continue;
                }
                let mut idx = unflatten(&self.source, m, pos);
                idx[0] += self.time_offset;
                for ax in 1..axes {
                    let n = self.source.sites[ax - 1];
                    let ext_src = self.source.extent(ax, m & (1 << ax) != 0);
                    // Identical extents for periodic edges and sites.
                    debug_assert_eq!(ext_src, self.target.extent(ax, m & (1 << ax) != 0));
                    if self.spatial_shift[ax - 1] != 0 {
                        idx[ax] = (idx[ax] + self.spatial_shift[ax - 1]) % n;
                    }
                }
                out.blocks[bi][flatten(&self.target, m, &idx)] += v;
            }
        }
        Ok(out)
    }

    pub fn push_region(&self, r: &Region) -> Region {
        let mut out = Region::default();
        for &(t, x) in &r.cells {
            let mut c = self.source.site_coords(x);
            for (k, cc) in c.iter_mut().enumerate() {
                *cc = (*cc + self.spatial_shift[k]) % self.source.sites[k];
            }
            out.cells.insert((t + self.time_offset, self.target.site_index(&c)));
        }
        out
    }
}

// ---------------------------------------------------------------------------

pub fn delta_cochain(st: &Spacetime, degree: usize, block_mask: u32, idx: &[usize]) -> Cochain {
    let mut c = Cochain::zeros(st, degree);
    let masks = masks_of_degree(st.axes(), degree);
    let bi = masks.iter().position(|&m| m == block_mask).expect("mask of right degree");
    c.blocks[bi][flatten(st, block_mask, idx)] = 1.0;
    c
}

/// Seeded random cochain, optionally limited to a time window.
pub fn random_cochain(
    st: &Spacetime,
    degree: usize,
    rng: &mut impl rand::Rng,
    t_window: Option<(usize, usize)>,
) -> Cochain {
    let masks = masks_of_degree(st.axes(), degree);
    let mut c = Cochain::zeros(st, degree);
    for (bi, &m) in masks.iter().enumerate() {
        for pos in 0..c.blocks[bi].len() {
            let idx = unflatten(st, m, pos);
            if let Some((t0, t1)) = t_window {
                let (tlo, thi) = if m & 1 != 0 { (idx[0], idx[0] + 1) } else { (idx[0], idx[0]) };
                if tlo < t0 || thi > t1 {
                    continue;
                }
            }
            c.blocks[bi][pos] = rng.random_range(-1.0..1.0);
        }
    }
    c
}
