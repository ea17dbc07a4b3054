//! Periodic maps on the torus: the magnetic Kasteleyn matrix `K(α, β)`,
//! its determinant, zeros on the unit torus, nullvectors there, and the
//! almost periodic T-graph patches built from them.
//!
//! A root `(α, β)` gives a white-indexed `g` with `K(α, β) g = 0` and a
//! black-indexed `f` with `fᵀ K(ᾱ, β̄) = 0`. Both lift to functions that
//! pick up `α^x β^y` under translation by `(x, y)`, so the lifted flow
//! `2 f(b) Re(g(w)) K(b, w)` has no divergence anywhere.

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kasteleyn::face_rule_signs;
use crate::linalg::{adjugate_complex, format_rational, rational_to_f64, Rational};
use crate::planarmap::{twin, Color, Dart, TorusMap};
use crate::tgraph::Segment;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeriodicError {
    #[error("graph is unbalanced: {black} black and {white} white vertices")]
    Unbalanced { black: usize, white: usize },
    #[error("too large for symbolic expansion ({0} vertices per side)")]
    TooLarge(usize),
    #[error("spectral polynomial is identically zero")]
    ZeroPolynomial,
    #[error("weights are not generic: {0}")]
    NonGenericWeights(String),
    #[error("adjugate vanishes: the kernel has dimension above one")]
    RankDeficient,
    #[error("a nullvector has a zero entry at {side} {index}")]
    ZeroComponent { side: &'static str, index: usize },
    #[error("face {0} winds around the torus")]
    WindingFace(usize),
}

/// Laurent polynomial in `(α, β)` with exact coefficients, keyed by exponent.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LaurentPoly {
    pub terms: BTreeMap<(i32, i32), Rational>,
}

impl LaurentPoly {
    pub fn constant(c: Rational) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn monomial(i: i32, j: i32, c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((i, j), c);
        }
        LaurentPoly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_assign(&mut self, other: &LaurentPoly) {
        for (k, c) in &other.terms {
            let entry = self.terms.entry(*k).or_insert_with(Rational::zero);
            *entry += c;
            if entry.is_zero() {
                self.terms.remove(k);
            }
        }
    }

    pub fn mul(&self, other: &LaurentPoly) -> LaurentPoly {
        let mut out = LaurentPoly::default();
        for ((i1, j1), c1) in &self.terms {
            for ((i2, j2), c2) in &other.terms {
                out.add_assign(&LaurentPoly::monomial(i1 + i2, j1 + j2, c1 * c2));
            }
        }
        out
    }

    pub fn neg(&self) -> LaurentPoly {
        LaurentPoly {
            terms: self.terms.iter().map(|(k, c)| (*k, -c)).collect(),
        }
    }

    pub fn eval(&self, a: Complex64, b: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|(&(i, j), c)| a.powi(i) * b.powi(j) * rational_to_f64(c))
            .sum()
    }

    /// `(∂P/∂α, ∂P/∂β)` at a point.
    pub fn gradient(&self, a: Complex64, b: Complex64) -> [Complex64; 2] {
        let mut g = [Complex64::zero(); 2];
        for (&(i, j), c) in &self.terms {
            let c = rational_to_f64(c);
            if i != 0 {
                g[0] += a.powi(i - 1) * b.powi(j) * (c * i as f64);
            }
            if j != 0 {
                g[1] += a.powi(i) * b.powi(j - 1) * (c * j as f64);
            }
        }
        g
    }

    /// Coefficients of `β^k` as polynomials in `α`, for `k` from the
    /// lowest exponent up.
    fn beta_coefficients(&self, a: Complex64) -> (i32, Vec<Complex64>) {
        let lo = self.terms.keys().map(|k| k.1).min().unwrap_or(0);
        let hi = self.terms.keys().map(|k| k.1).max().unwrap_or(0);
        let mut out = vec![Complex64::zero(); (hi - lo + 1) as usize];
        for (&(i, j), c) in &self.terms {
            out[(j - lo) as usize] += a.powi(i) * rational_to_f64(c);
        }
        (lo, out)
    }

    /// Sum of absolute values of the coefficients.
    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| rational_to_f64(c).abs()).sum()
    }

    /// Terms as `(i, j, "p/q")`.
    pub fn to_triples(&self) -> Vec<(i32, i32, String)> {
        self.terms.iter().map(|(&(i, j), c)| (i, j, format_rational(c))).collect()
    }
}

/// Signed weight and black-to-white crossing of every edge, with row and
/// column orders.
#[derive(Clone, Debug)]
pub struct PeriodicKasteleyn {
    pub blacks: Vec<usize>,
    pub whites: Vec<usize>,
    /// `(row, col, signed weight, crossing)` per edge.
    pub entries: Vec<(usize, usize, Rational, [i32; 2])>,
}

pub fn periodic_kasteleyn(tm: &TorusMap) -> Result<PeriodicKasteleyn, PeriodicError> {
    let blacks = tm.black_vertices();
    let whites = tm.white_vertices();
    if blacks.len() != whites.len() {
        return Err(PeriodicError::Unbalanced {
            black: blacks.len(),
            white: whites.len(),
        });
    }
    let signs = face_rule_signs(tm, None);
    let row: HashMap<usize, usize> = blacks.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let col: HashMap<usize, usize> = whites.iter().enumerate().map(|(i, &w)| (w, i)).collect();
    let entries = (0..tm.num_edges())
        .map(|e| {
            let (b, w) = tm.black_white(e);
            let weight = tm.edge(e).weight.clone();
            let signed = if signs[e] > 0 { weight } else { -weight };
            (row[&b], col[&w], signed, tm.crossing(tm.black_dart(e)))
        })
        .collect();
    Ok(PeriodicKasteleyn { blacks, whites, entries })
}

/// `K(α, β)`: entry `(b, w)` sums `sign · weight · α^x β^y` over edges.
pub fn characteristic_matrix(tm: &TorusMap, a: Complex64, b: Complex64) -> Result<DMatrix<Complex64>, PeriodicError> {
    let pk = periodic_kasteleyn(tm)?;
    Ok(matrix_at(&pk, a, b))
}

fn matrix_at(pk: &PeriodicKasteleyn, a: Complex64, b: Complex64) -> DMatrix<Complex64> {
    let n = pk.blacks.len();
    let mut m = DMatrix::zeros(n, n);
    for (r, c, w, [x, y]) in &pk.entries {
        m[(*r, *c)] += a.powi(*x) * b.powi(*y) * rational_to_f64(w);
    }
    m
}

/// `det K(α, β)` expanded exactly, by dynamic programming over the set of
/// columns used by the first rows.
pub fn spectral_polynomial(tm: &TorusMap) -> Result<LaurentPoly, PeriodicError> {
    let pk = periodic_kasteleyn(tm)?;
    let n = pk.blacks.len();
    if n > 12 {
        return Err(PeriodicError::TooLarge(n));
    }
    let mut cell: Vec<Vec<LaurentPoly>> = vec![vec![LaurentPoly::default(); n]; n];
    for (r, c, w, [x, y]) in &pk.entries {
        cell[*r][*c].add_assign(&LaurentPoly::monomial(*x, *y, w.clone()));
    }
    let mut layer: HashMap<u32, LaurentPoly> = HashMap::from([(0, LaurentPoly::constant(Rational::one()))]);
    for row in cell.iter() {
        let mut next: HashMap<u32, LaurentPoly> = HashMap::new();
        for (mask, poly) in &layer {
            for (c, entry) in row.iter().enumerate() {
                if mask >> c & 1 == 1 || entry.is_zero() {
                    continue;
                }
                // Each earlier row sitting in a later column is one inversion.
                let inversions = (mask >> (c + 1)).count_ones();
                let mut term = poly.mul(entry);
                if inversions % 2 == 1 {
                    term = term.neg();
                }
                next.entry(mask | 1 << c).or_default().add_assign(&term);
            }
        }
        layer = next;
    }
    Ok(layer.remove(&((1u32 << n) - 1)).unwrap_or_default())
}

/// A zero of `P` with `|α| = |β| = 1`, as angles and values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitRoot {
    pub theta: f64,
    pub phi: f64,
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub residual: f64,
    /// `(∂P/∂α, ∂P/∂β)` at the root, as `[re, im]` pairs.
    pub gradient: [[f64; 2]; 2],
}

impl UnitRoot {
    pub fn alpha(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.theta)
    }

    pub fn beta(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.phi)
    }
}

fn wrap(x: f64) -> f64 {
    let t = std::f64::consts::TAU;
    x.rem_euclid(t)
}

fn angle_gap(x: f64, y: f64) -> f64 {
    let d = wrap(x - y);
    d.min(std::f64::consts::TAU - d)
}

/// Roots of `Σ c_k z^k` by companion matrix eigenvalues.
fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().is_some_and(|x| x.norm() < 1e-300) {
        c.pop();
    }
    let d = c.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    let lead = c[d];
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = Complex64::one();
    }
    for i in 0..d {
        m[(i, d - 1)] = -c[i] / lead;
    }
    m.schur().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default()
}

const GRID: usize = 4096;
const LOOSE: f64 = 0.05;

/// Newton's method on `P(e^{iθ}, e^{iφ}) = 0`, halving steps that do not
/// reduce `|P|`.
fn refine(p: &LaurentPoly, mut theta: f64, mut phi: f64) -> Option<(f64, f64, f64)> {
    let value = |t: f64, f: f64| p.eval(Complex64::from_polar(1.0, t), Complex64::from_polar(1.0, f));
    let mut fx = value(theta, phi);
    for _ in 0..100 {
        if fx.norm() < 1e-15 * p.l1_norm() {
            break;
        }
        let (a, b) = (Complex64::from_polar(1.0, theta), Complex64::from_polar(1.0, phi));
        let [pa, pb] = p.gradient(a, b);
        let (jt, jp) = (Complex64::i() * a * pa, Complex64::i() * b * pb);
        let det = jt.re * jp.im - jp.re * jt.im;
        if det.abs() < 1e-300 {
            return None;
        }
        let dt = (fx.re * jp.im - jp.re * fx.im) / det;
        let dp = (jt.re * fx.im - fx.re * jt.im) / det;
        let mut step = 1.0;
        loop {
            let (t2, f2) = (theta - step * dt, phi - step * dp);
            let v = value(t2, f2);
            if v.norm() < fx.norm() || step < 1e-6 {
                theta = t2;
                phi = f2;
                fx = v;
                break;
            }
            step /= 2.0;
        }
    }
    Some((wrap(theta), wrap(phi), fx.norm()))
}

/// Outcome of the root search, including roots the genericity checks
/// reject.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootSearch {
    pub roots: Vec<UnitRoot>,
    pub warnings: Vec<String>,
}

/// Every zero of `P` on the unit torus. Scans `α = e^{iθ}` on a grid,
/// solves for `β` at each grid point, keeps `β` near the circle and
/// polishes by Newton.
pub fn find_unit_roots(p: &LaurentPoly) -> Result<RootSearch, PeriodicError> {
    if p.is_zero() {
        return Err(PeriodicError::ZeroPolynomial);
    }
    let scale = p.l1_norm();
    let mut candidates: Vec<(f64, f64)> = (0..GRID)
        .into_par_iter()
        .flat_map_iter(|k| {
            let theta = std::f64::consts::TAU * k as f64 / GRID as f64;
            let (_, coeffs) = p.beta_coefficients(Complex64::from_polar(1.0, theta));
            poly_roots(&coeffs)
                .into_iter()
                .filter(|b| (b.norm() - 1.0).abs() < LOOSE)
                .map(move |b| (theta, b.arg()))
                .collect::<Vec<_>>()
        })
        .collect();
    candidates.sort_by(|x, y| x.partial_cmp(y).expect("finite"));

    let mut roots: Vec<UnitRoot> = Vec::new();
    for (t0, f0) in candidates {
        let Some((theta, phi, res)) = refine(p, t0, f0) else {
            continue;
        };
        if res > 1e-10 * scale {
            continue;
        }
        if roots.iter().any(|r| angle_gap(r.theta, theta) < 1e-8 && angle_gap(r.phi, phi) < 1e-8) {
            continue;
        }
        let (a, b) = (Complex64::from_polar(1.0, theta), Complex64::from_polar(1.0, phi));
        let g = p.gradient(a, b);
        roots.push(UnitRoot {
            theta,
            phi,
            alpha: [a.re, a.im],
            beta: [b.re, b.im],
            residual: res,
            gradient: [[g[0].re, g[0].im], [g[1].re, g[1].im]],
        });
    }
    roots.sort_by(|x, y| (x.theta, x.phi).partial_cmp(&(y.theta, y.phi)).expect("finite"));
    let mut warnings = Vec::new();
    for r in &roots {
        let paired = roots
            .iter()
            .any(|s| angle_gap(s.theta, -r.theta) < 1e-7 && angle_gap(s.phi, -r.phi) < 1e-7);
        if !paired {
            warnings.push(format!("root at θ={:.12}, φ={:.12} has no conjugate", r.theta, r.phi));
        }
    }
    if !(roots.is_empty() || roots.len() == 2) {
        warnings.push(format!("{} roots on the unit torus", roots.len()));
    }
    Ok(RootSearch { roots, warnings })
}

/// Zeros of `P` on the unit torus; zero or one conjugate pair for generic
/// weights, anything else is reported as non-generic.
pub fn unit_torus_roots(p: &LaurentPoly) -> Result<Vec<UnitRoot>, PeriodicError> {
    let search = find_unit_roots(p)?;
    if search.warnings.is_empty() {
        Ok(search.roots)
    } else {
        Err(PeriodicError::NonGenericWeights(search.warnings.join("; ")))
    }
}

#[derive(Clone, Debug)]
pub struct Nullvectors {
    /// Black-indexed, `fᵀ K(ᾱ, β̄) = 0`, largest entry of modulus one.
    pub f: Vec<Complex64>,
    /// White-indexed, `K(α, β) g = 0`, turned by a seeded unit constant.
    pub g: Vec<Complex64>,
    pub right_residual: f64,
    pub left_residual: f64,
    /// Rank of `K(α, β)` judged from its singular values.
    pub rank: usize,
    pub zero_entries: bool,
}

pub fn nullvectors(tm: &TorusMap, root: &UnitRoot, seed: u64) -> Result<Nullvectors, PeriodicError> {
    let (a, b) = (root.alpha(), root.beta());
    let k = characteristic_matrix(tm, a, b)?;
    let n = k.nrows();
    let adj = adjugate_complex(&k);
    let scale = adj.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale < 1e-10 * k.iter().map(|z| z.norm()).fold(0.0, f64::max).powi(n.saturating_sub(1) as i32).max(1e-300) {
        return Err(PeriodicError::RankDeficient);
    }
    let (r, c) = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .max_by(|x, y| adj[*x].norm().total_cmp(&adj[*y].norm()))
        .expect("nonempty");
    let mut g: Vec<Complex64> = (0..n).map(|i| adj[(i, c)]).collect();
    let mut f: Vec<Complex64> = (0..n).map(|j| adj[(r, j)].conj()).collect();
    let fmax = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pivot = f.iter().copied().max_by(|x, y| x.norm().total_cmp(&y.norm())).expect("nonempty");
    f.iter_mut().for_each(|z| *z /= pivot);
    let gmax = g.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let turn = Complex64::from_polar(1.0 / gmax, rng.random_range(0.0..std::f64::consts::TAU));
    g.iter_mut().for_each(|z| *z *= turn);

    let gv = DMatrix::from_fn(n, 1, |i, _| g[i]);
    let right_residual = (&k * gv).norm();
    let kc = characteristic_matrix(tm, a.conj(), b.conj())?;
    let fv = DMatrix::from_fn(1, n, |_, j| f[j]);
    let left_residual = (fv * kc).norm();
    let sv = k.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > 1e-9 * smax).count();
    let zero_entries = f.iter().any(|z| z.norm() < 1e-9) || g.iter().any(|z| z.re.abs() < 1e-9 || z.norm() < 1e-9);
    let _ = fmax;
    Ok(Nullvectors {
        f,
        g,
        right_residual,
        left_residual,
        rank,
        zero_entries,
    })
}

type Cell = [i64; 2];

/// A window of the lifted map drawn with the almost periodic mapping.
#[derive(Clone, Debug, Serialize)]
pub struct AlmostPeriodicPatch {
    pub window: [usize; 2],
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    /// Lifted faces `(face, cell)` with their images.
    pub faces: Vec<(usize, Cell)>,
    pub psi: Vec<[f64; 2]>,
    /// One segment per lifted black whose star lies in the window.
    pub segments: Vec<(usize, Cell, Segment)>,
    /// One polygon per lifted white whose star lies in the window.
    pub white_faces: Vec<(usize, Cell, Vec<[f64; 2]>)>,
    pub closure_error: f64,
    pub martingale_residual: f64,
    /// Faces whose surroundings lie inside the window.
    pub checked_vertices: usize,
    pub rotation_residual: f64,
    pub diameter: f64,
}

/// Offset of each dart's tail from the first corner of its face walk.
fn face_offsets(tm: &TorusMap) -> Result<Vec<Cell>, PeriodicError> {
    let mut offset = vec![[0i64; 2]; 2 * tm.num_edges()];
    for (f, face) in tm.faces().iter().enumerate() {
        let mut at = [0i64; 2];
        for &d in &face.darts {
            offset[d] = at;
            let c = tm.crossing(d);
            at = [at[0] + c[0] as i64, at[1] + c[1] as i64];
        }
        if at != [0, 0] {
            return Err(PeriodicError::WindingFace(f));
        }
    }
    Ok(offset)
}

fn wrap_pi(x: f64) -> f64 {
    let p = std::f64::consts::PI;
    let y = x.rem_euclid(p);
    y.min(p - y)
}

pub fn almost_periodic_patch(
    tm: &TorusMap,
    root: &UnitRoot,
    window: [usize; 2],
    seed: u64,
) -> Result<AlmostPeriodicPatch, PeriodicError> {
    let nv = nullvectors(tm, root, seed)?;
    if let Some(i) = nv.f.iter().position(|z| z.norm() < 1e-9) {
        return Err(PeriodicError::ZeroComponent { side: "black", index: i });
    }
    if let Some(i) = nv.g.iter().position(|z| z.re.abs() < 1e-9) {
        return Err(PeriodicError::ZeroComponent { side: "white", index: i });
    }
    let pk = periodic_kasteleyn(tm)?;
    let (a, b) = (root.alpha(), root.beta());
    let offsets = face_offsets(tm)?;
    let [wj, wk] = window;
    let inside = |c: Cell| c[0] >= 0 && c[1] >= 0 && (c[0] as usize) < wj && (c[1] as usize) < wk;
    let phase = |c: Cell| a.powi(c[0] as i32) * b.powi(c[1] as i32);
    let row: HashMap<usize, usize> = pk.blacks.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let col: HashMap<usize, usize> = pk.whites.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let add = |c: Cell, d: [i32; 2]| [c[0] + d[0] as i64, c[1] + d[1] as i64];
    // Lifted face on the right of dart `d` whose tail sits in cell `c`.
    let face_at = |d: Dart, c: Cell| -> (usize, Cell) {
        let o = offsets[d];
        (tm.face_of(d), [c[0] - o[0], c[1] - o[1]])
    };

    let mut index: HashMap<(usize, Cell), usize> = HashMap::new();
    let mut faces = Vec::new();
    let mut steps: Vec<Vec<(usize, Complex64)>> = Vec::new();
    let mut intern = |key: (usize, Cell), faces: &mut Vec<(usize, Cell)>, steps: &mut Vec<Vec<(usize, Complex64)>>| {
        *index.entry(key).or_insert_with(|| {
            faces.push(key);
            steps.push(Vec::new());
            faces.len() - 1
        })
    };
    let mut crossings = Vec::new();
    for j in 0..wj as i64 {
        for k in 0..wk as i64 {
            let cb = [j, k];
            for e in 0..tm.num_edges() {
                let d = tm.black_dart(e);
                let (bv, wv) = tm.black_white(e);
                let cw = add(cb, tm.crossing(d));
                if !inside(cw) {
                    continue;
                }
                let (r, l) = (face_at(d, cb), face_at(twin(d), cw));
                let fb = nv.f[row[&bv]] * phase(cb);
                let gw = nv.g[col[&wv]] * phase(cw);
                let signed = pk.entries[e].2.clone();
                let value = fb * (2.0 * gw.re * rational_to_f64(&signed));
                let ri = intern(r, &mut faces, &mut steps);
                let li = intern(l, &mut faces, &mut steps);
                steps[ri].push((li, value));
                steps[li].push((ri, -value));
                crossings.push((ri, li, value));
            }
        }
    }
    // Integrate from the lowest face of cell (0, 0); each connected piece
    // gets its own base at the origin, though windows are connected.
    let mut psi = vec![None::<Complex64>; faces.len()];
    let mut order: Vec<usize> = (0..faces.len()).collect();
    order.sort_by_key(|&i| (faces[i].1, faces[i].0));
    for &s in &order {
        if psi[s].is_some() {
            continue;
        }
        psi[s] = Some(Complex64::zero());
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            let z = psi[x].expect("set");
            for &(y, delta) in &steps[x] {
                if psi[y].is_none() {
                    psi[y] = Some(z + delta);
                    queue.push_back(y);
                }
            }
        }
    }
    let psi: Vec<Complex64> = psi.into_iter().map(|z| z.expect("visited")).collect();
    let closure_error = crossings
        .iter()
        .map(|&(r, l, v)| (psi[l] - psi[r] - v).norm())
        .fold(0.0, f64::max);

    // Faces around a lifted vertex, counterclockwise.
    let around = |v: usize, c: Cell| -> Option<Vec<usize>> {
        tm.rotation(v)
            .iter()
            .map(|&d| {
                let ch = add(c, tm.crossing(d));
                index.get(&face_at(twin(d), ch)).copied().filter(|_| inside(ch))
            })
            .collect()
    };

    let mut segments = Vec::new();
    let mut white_faces = Vec::new();
    let mut stars: HashMap<(usize, Cell), Vec<usize>> = HashMap::new();
    for j in 0..wj as i64 {
        for k in 0..wk as i64 {
            let c = [j, k];
            for v in 0..tm.num_vertices() {
                let Some(ring) = around(v, c) else { continue };
                if tm.color(v) == Color::Black {
                    let u = nv.f[row[&v]] * phase(c);
                    let u = u / u.norm();
                    let base = psi[ring[0]];
                    let ts: Vec<f64> = ring.iter().map(|&x| ((psi[x] - base) * u.conj()).re).collect();
                    let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let (p, q) = (base + u * lo, base + u * hi);
                    segments.push((v, c, Segment::new([p.re, p.im], [q.re, q.im])));
                    stars.insert((v, c), ring);
                } else {
                    white_faces.push((v, c, ring.iter().map(|&x| [psi[x].re, psi[x].im]).collect()));
                }
            }
        }
    }

    // Martingale: a face interior to a segment sits strictly between its
    // nearest neighbours on it, and the inverse-distance step averages to zero.
    let mut martingale_residual: f64 = 0.0;
    let mut checked_vertices = 0;
    let mut by_face: HashMap<usize, Vec<(usize, Cell)>> = HashMap::new();
    for (key, ring) in &stars {
        for &x in ring {
            by_face.entry(x).or_default().push(*key);
        }
    }
    let diameter = {
        let mut dmax: f64 = 0.0;
        for x in &psi {
            for y in &psi {
                dmax = dmax.max((x - y).norm());
            }
        }
        dmax
    };
    let tol = 1e-9 * diameter.max(1e-300);
    for (x, owners) in &by_face {
        let z = psi[*x];
        let mut best: Option<f64> = None;
        for key in owners {
            let ring = &stars[key];
            let seg = segments.iter().find(|s| (s.0, s.1) == *key).expect("segment").2;
            let u = Complex64::new(seg.q[0] - seg.p[0], seg.q[1] - seg.p[1]);
            let u = u / u.norm();
            let t = |y: usize| ((psi[y] - z) * u.conj()).re;
            let below = ring.iter().copied().filter(|&y| t(y) < -tol).max_by(|&p, &q| t(p).total_cmp(&t(q)));
            let above = ring.iter().copied().filter(|&y| t(y) > tol).min_by(|&p, &q| t(p).total_cmp(&t(q)));
            if let (Some(lo), Some(hi)) = (below, above) {
                let (da, dc) = (psi[lo] - z, psi[hi] - z);
                let drift = (da * dc.norm() + dc * da.norm()) / (da.norm() + dc.norm());
                best = Some(best.map_or(drift.norm(), |b: f64| b.min(drift.norm())));
            }
        }
        // Only faces whose blacks all have complete stars are checked.
        let (f, c) = faces[*x];
        let complete = tm.faces()[f].darts.iter().all(|&d| {
            let v = tm.tail(d);
            let o = offsets[d];
            tm.color(v) != Color::Black || stars.contains_key(&(v, [c[0] + o[0], c[1] + o[1]]))
        });
        if complete {
            checked_vertices += 1;
            martingale_residual = martingale_residual.max(best.unwrap_or(f64::INFINITY));
        }
    }

    // Rotation law between neighbouring translates.
    let dir: HashMap<(usize, Cell), Complex64> = segments
        .iter()
        .map(|(v, c, s)| ((*v, *c), Complex64::new(s.q[0] - s.p[0], s.q[1] - s.p[1])))
        .collect();
    let mut rotation_residual: f64 = 0.0;
    for ((v, c), z) in &dir {
        for (step, turn) in [([1i64, 0i64], a), ([0, 1], b)] {
            if let Some(z2) = dir.get(&(*v, [c[0] + step[0], c[1] + step[1]])) {
                rotation_residual = rotation_residual.max(wrap_pi(z2.arg() - z.arg() - turn.arg()));
            }
        }
    }

    Ok(AlmostPeriodicPatch {
        window,
        alpha: [a.re, a.im],
        beta: [b.re, b.im],
        faces,
        psi: psi.iter().map(|z| [z.re, z.im]).collect(),
        segments,
        white_faces,
        closure_error,
        martingale_residual,
        checked_vertices,
        rotation_residual,
        diameter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    fn r(x: i64) -> Rational {
        Rational::from_integer(x.into())
    }

    #[test]
    fn honeycomb_polynomial_is_linear() {
        let tm = gallery::honeycomb_torus(r(4), r(5), r(6));
        let p = spectral_polynomial(&tm).unwrap();
        let mut expected = BTreeMap::new();
        expected.insert((0, 0), r(4));
        expected.insert((1, 0), r(5));
        expected.insert((0, 1), r(6));
        assert_eq!(p.terms, expected);
    }

    #[test]
    fn honeycomb_roots_match_closed_form() {
        let tm = gallery::honeycomb_torus(r(4), r(5), r(6));
        let roots = unit_torus_roots(&spectral_polynomial(&tm).unwrap()).unwrap();
        assert_eq!(roots.len(), 2);
        let s7 = 7f64.sqrt();
        for root in &roots {
            assert!((root.alpha[0] + 0.125).abs() < 1e-9);
            assert!((root.alpha[1].abs() - 3.0 * s7 / 8.0).abs() < 1e-9);
            assert!((root.beta[0] + 9.0 / 16.0).abs() < 1e-9);
        }
        let none = gallery::honeycomb_torus(r(1), r(1), r(3));
        assert!(unit_torus_roots(&spectral_polynomial(&none).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn polynomial_agrees_with_determinant() {
        let tm = gallery::square_octagon_torus(&[2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]);
        let p = spectral_polynomial(&tm).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let b = Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let det = characteristic_matrix(&tm, a, b).unwrap().determinant();
            assert!((det - p.eval(a, b)).norm() < 1e-8 * (1.0 + det.norm()));
        }
    }

    #[test]
    fn square_lattice_nullvectors() {
        let tm = gallery::square_torus(&[3, 5, 7, 2, 4, 6, 9, 8]);
        let p = spectral_polynomial(&tm).unwrap();
        let search = find_unit_roots(&p).unwrap();
        for root in &search.roots {
            let nv = nullvectors(&tm, root, 1).unwrap();
            assert!(nv.right_residual < 1e-9 && nv.left_residual < 1e-9);
        }
    }

    #[test]
    fn honeycomb_patch_laws() {
        let tm = gallery::honeycomb_torus(r(4), r(5), r(6));
        let roots = unit_torus_roots(&spectral_polynomial(&tm).unwrap()).unwrap();
        let small = almost_periodic_patch(&tm, &roots[0], [10, 10], 0).unwrap();
        assert!(small.closure_error < 1e-9);
        assert!(small.martingale_residual < 1e-6, "{}", small.martingale_residual);
        assert!(small.rotation_residual < 1e-6);
        let large = almost_periodic_patch(&tm, &roots[0], [20, 20], 0).unwrap();
        assert!(large.diameter > small.diameter);
    }
}
