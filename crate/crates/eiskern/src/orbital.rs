//! Orbital integrals on the symmetric space attached to an unramified
//! quadratic extension F/F_0: regular semisimple data (gamma, u_1, u_2),
//! transfer factors, matching of invariants against a hermitian side, and
//! the one-variable orbital integral as an exact Laurent polynomial in
//! q^s, computed by certified lattice-pair enumeration.
//!
//! All arithmetic is exact: F_0 = Q_p with q = p prime, elements are
//! rationals, F = F_0(z) with z^2 a fixed nonresidue, and valuations are
//! read off the rationals directly. log q stays symbolic.

use std::collections::BTreeMap;
use std::fmt;

use num::rational::Ratio;
use num::{One, Zero};
use serde::Deserialize;
use thiserror::Error;

pub type Rq = Ratio<i128>;

#[derive(Debug, Error)]
pub enum OrbError {
    #[error("datum is not regular semisimple")]
    NotRegularSemisimple,
    #[error("saturation failed up to window {0}; enumeration bound uncertified")]
    BoundUncertified(i64),
    #[error("invalid datum: {0}")]
    InvalidDatum(String),
}

pub type OrbResult<T> = Result<T, OrbError>;

/// p-adic valuation of an exact rational; None for zero.
pub fn vp(p: u64, x: &Rq) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let count = |mut n: i128| {
        let mut v = 0i64;
        n = n.abs();
        while n % (p as i128) == 0 {
            n /= p as i128;
            v += 1;
        }
        v
    };
    Some(count(*x.numer()) - count(*x.denom()))
}

pub(crate) fn p_pow(p: u64, k: i64) -> Rq {
    let mut n = Rq::one();
    let pr = Rq::from_integer(p as i128);
    for _ in 0..k.unsigned_abs() {
        n *= pr.clone();
    }
    if k >= 0 {
        n
    } else {
        n.recip()
    }
}

/// p-integrality (denominator prime to p).
fn intp(p: u64, x: &Rq) -> bool {
    x.is_zero() || vp(p, x).unwrap() >= 0
}

// ---- the quadratic extension --------------------------------------------

/// Element a + b z of F, with z^2 = c a fixed nonresidue of F_0.
#[derive(Clone, PartialEq, Eq)]
pub struct Fx {
    pub a: Rq,
    pub b: Rq,
}

impl fmt::Debug for Fx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}z", self.a, self.b)
    }
}

impl Fx {
    pub fn zero() -> Fx {
        Fx {
            a: Rq::zero(),
            b: Rq::zero(),
        }
    }

    pub fn one() -> Fx {
        Fx {
            a: Rq::one(),
            b: Rq::zero(),
        }
    }

    pub fn from_base(a: Rq) -> Fx {
        Fx { a, b: Rq::zero() }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn add(&self, o: &Fx) -> Fx {
        Fx {
            a: self.a.clone() + o.a.clone(),
            b: self.b.clone() + o.b.clone(),
        }
    }

    pub fn sub(&self, o: &Fx) -> Fx {
        Fx {
            a: self.a.clone() - o.a.clone(),
            b: self.b.clone() - o.b.clone(),
        }
    }

    pub fn neg(&self) -> Fx {
        Fx {
            a: -self.a.clone(),
            b: -self.b.clone(),
        }
    }

    pub fn mul(&self, o: &Fx, c: i128) -> Fx {
        Fx {
            a: self.a.clone() * o.a.clone() + Rq::from_integer(c) * self.b.clone() * o.b.clone(),
            b: self.a.clone() * o.b.clone() + self.b.clone() * o.a.clone(),
        }
    }

    pub fn conj(&self) -> Fx {
        Fx {
            a: self.a.clone(),
            b: -self.b.clone(),
        }
    }

    pub fn scale(&self, s: &Rq) -> Fx {
        Fx {
            a: self.a.clone() * s.clone(),
            b: self.b.clone() * s.clone(),
        }
    }

    /// Valuation in the unramified extension: min of the coordinates.
    pub fn val(&self, p: u64) -> Option<i64> {
        match (vp(p, &self.a), vp(p, &self.b)) {
            (None, None) => None,
            (Some(v), None) | (None, Some(v)) => Some(v),
            (Some(v), Some(w)) => Some(v.min(w)),
        }
    }
}

fn is_nonresidue(p: u64, c: i128) -> bool {
    let cc = (c.rem_euclid(p as i128)) as u64;
    if cc == 0 {
        return false;
    }
    let mut r = 1u64;
    let mut base = cc % p;
    let mut e = (p - 1) / 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    r != 1
}

pub(crate) fn smallest_nonresidue(p: u64) -> i128 {
    (2..p as i128)
        .find(|&c| is_nonresidue(p, c))
        .expect("odd prime has a nonresidue")
}

// ---- matrix helpers over F ----------------------------------------------

pub type FMat = Vec<Vec<Fx>>;
pub type FVec = Vec<Fx>;

pub(crate) fn fmat_mul(c: i128, x: &FMat, y: &FMat) -> FMat {
    let n = x.len();
    let m = y[0].len();
    let k = y.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut s = Fx::zero();
                    for l in 0..k {
                        s = s.add(&x[i][l].mul(&y[l][j], c));
                    }
                    s
                })
                .collect()
        })
        .collect()
}

fn fmat_vec(c: i128, x: &FMat, v: &FVec) -> FVec {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut s = Fx::zero();
            for (l, vl) in v.iter().enumerate() {
                s = s.add(&x[i][l].mul(vl, c));
            }
            s
        })
        .collect()
}

pub(crate) fn fmat_det(c: i128, x: &FMat) -> Fx {
    match x.len() {
        0 => Fx::one(),
        1 => x[0][0].clone(),
        2 => x[0][0].mul(&x[1][1], c).sub(&x[0][1].mul(&x[1][0], c)),
        3 => {
            // cyclic cofactor expansion along the first row
            let mut d = Fx::zero();
            for j in 0..3 {
                let minor = x[1][(j + 1) % 3].mul(&x[2][(j + 2) % 3], c).sub(
                    &x[1][(j + 2) % 3].mul(&x[2][(j + 1) % 3], c),
                );
                d = d.add(&x[0][j].mul(&minor, c));
            }
            d
        }
        n => panic!("determinant only implemented for n <= 3, got {n}"),
    }
}

pub(crate) fn fmat_id(n: usize) -> FMat {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Fx::one() } else { Fx::zero() })
                .collect()
        })
        .collect()
}

fn fmat_eq(x: &FMat, y: &FMat) -> bool {
    x == y
}

/// Coefficients of det(T id + g) = T^n + e_1 T^(n-1) + ... + e_n via the
/// Newton identities on power sums.
pub fn char_coeffs(c: i128, g: &FMat) -> Vec<Fx> {
    let n = g.len();
    let mut pows = vec![fmat_id(n)];
    for _ in 0..n {
        pows.push(fmat_mul(c, pows.last().unwrap(), g));
    }
    let tr = |m: &FMat| {
        let mut s = Fx::zero();
        for i in 0..n {
            s = s.add(&m[i][i]);
        }
        s
    };
    let p: Vec<Fx> = (1..=n).map(|k| tr(&pows[k])).collect();
    let mut e: Vec<Fx> = Vec::with_capacity(n);
    for k in 1..=n {
        // k e_k = sum_{i=1}^{k} (-1)^(i-1) e_{k-i} p_i
        let mut s = Fx::zero();
        for i in 1..=k {
            let prev = if k - i == 0 {
                Fx::one()
            } else {
                e[k - i - 1].clone()
            };
            let t = prev.mul(&p[i - 1], c);
            s = if i % 2 == 1 { s.add(&t) } else { s.sub(&t) };
        }
        e.push(s.scale(&Ratio::new(1, k as i128)));
    }
    e
}

// ---- the symmetric-space datum -------------------------------------------

#[derive(Clone)]
pub struct SymDatum {
    pub n: usize,
    /// residue cardinality, required prime here
    pub q: u64,
    /// vertex lattice type of the chain L_0 in L_0-dual
    pub t: usize,
    /// z^2, a fixed nonresidue
    pub c: i128,
    pub gamma: FMat,
    pub u1: Vec<Rq>,
    pub u2: Vec<Rq>,
    /// cached: coefficients of det(T id + gamma)
    pub charpoly: Vec<Fx>,
    /// cached: u_2(gamma^i u_1) for 0 <= i < n
    pub pairings: Vec<Fx>,
}

#[derive(Deserialize)]
struct DatumSpec {
    n: usize,
    q: u64,
    #[serde(default)]
    lattice_type: usize,
    gamma: Vec<Vec<String>>,
    u1: Vec<String>,
    u2: Vec<String>,
}

/// Parse "a", "a/b", "a z", "a*z", "az/b" and sums like "1+2z/3-4".
pub fn parse_fx(s: &str) -> OrbResult<Fx> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(OrbError::InvalidDatum("empty entry".into()));
    }
    let mut out = Fx::zero();
    let mut term = String::new();
    let mut terms: Vec<String> = Vec::new();
    for (i, ch) in s.chars().enumerate() {
        if (ch == '+' || ch == '-') && i > 0 {
            terms.push(term.clone());
            term.clear();
        }
        term.push(ch);
    }
    terms.push(term);
    for t in terms {
        let (body, has_z) = if let Some(idx) = t.find('z') {
            let mut b = t.clone();
            b.remove(idx);
            (b.replace('*', ""), true)
        } else {
            (t.clone(), false)
        };
        let body = if body.is_empty() || body == "+" {
            "1".to_string()
        } else if body == "-" {
            "-1".to_string()
        } else if let Some(rest) = body.strip_prefix("-/") {
            format!("-1/{rest}")
        } else if let Some(rest) = body.strip_prefix("+/") {
            format!("1/{rest}")
        } else if let Some(rest) = body.strip_prefix('/') {
            format!("1/{rest}")
        } else {
            body
        };
        let r: Rq = if let Some((num, den)) = body.split_once('/') {
            let n: i128 = num
                .parse()
                .map_err(|_| OrbError::InvalidDatum(format!("bad number {num:?}")))?;
            let d: i128 = den
                .parse()
                .map_err(|_| OrbError::InvalidDatum(format!("bad number {den:?}")))?;
            if d == 0 {
                return Err(OrbError::InvalidDatum("zero denominator".into()));
            }
            Ratio::new(n, d)
        } else {
            Rq::from_integer(
                body.parse::<i128>()
                    .map_err(|_| OrbError::InvalidDatum(format!("bad number {body:?}")))?,
            )
        };
        if has_z {
            out.b += r;
        } else {
            out.a += r;
        }
    }
    Ok(out)
}

fn parse_base(s: &str) -> OrbResult<Rq> {
    let x = parse_fx(s)?;
    if !x.b.is_zero() {
        return Err(OrbError::InvalidDatum(format!(
            "entry {s:?} must lie in the base field"
        )));
    }
    Ok(x.a)
}

impl SymDatum {
    pub fn new(
        n: usize,
        q: u64,
        t: usize,
        gamma: FMat,
        u1: Vec<Rq>,
        u2: Vec<Rq>,
    ) -> OrbResult<SymDatum> {
        if n == 0 || n > 3 {
            return Err(OrbError::InvalidDatum("n must be between 1 and 3".into()));
        }
        if t > n {
            return Err(OrbError::InvalidDatum("lattice type exceeds n".into()));
        }
        let prime = q >= 3 && q % 2 == 1 && (2..q).take_while(|d| d * d <= q).all(|d| q % d != 0);
        if !prime {
            return Err(OrbError::InvalidDatum(
                "residue cardinality must be an odd prime".into(),
            ));
        }
        if gamma.len() != n
            || gamma.iter().any(|r| r.len() != n)
            || u1.len() != n
            || u2.len() != n
        {
            return Err(OrbError::InvalidDatum("dimension mismatch".into()));
        }
        let c = smallest_nonresidue(q);
        let gbar: FMat = gamma
            .iter()
            .map(|row| row.iter().map(|x| x.conj()).collect())
            .collect();
        if !fmat_eq(&fmat_mul(c, &gamma, &gbar), &fmat_id(n)) {
            return Err(OrbError::InvalidDatum(
                "gamma times its conjugate is not the identity".into(),
            ));
        }
        let mut d = SymDatum {
            n,
            q,
            t,
            c,
            gamma,
            u1,
            u2,
            charpoly: Vec::new(),
            pairings: Vec::new(),
        };
        d.charpoly = char_coeffs(c, &d.gamma);
        let mut v: FVec = d.u1.iter().map(|x| Fx::from_base(x.clone())).collect();
        let mut cols: Vec<FVec> = Vec::with_capacity(n);
        for _ in 0..n {
            cols.push(v.clone());
            v = fmat_vec(c, &d.gamma, &v);
        }
        d.pairings = cols
            .iter()
            .map(|col| {
                let mut s = Fx::zero();
                for (i, x) in col.iter().enumerate() {
                    s = s.add(&x.scale(&d.u2[i]));
                }
                s
            })
            .collect();
        let m: FMat = (0..n)
            .map(|i| (0..n).map(|j| cols[j][i].clone()).collect())
            .collect();
        if fmat_det(c, &m).is_zero() {
            return Err(OrbError::NotRegularSemisimple);
        }
        Ok(d)
    }

    pub fn from_json(s: &str) -> OrbResult<SymDatum> {
        let spec: DatumSpec =
            serde_json::from_str(s).map_err(|e| OrbError::InvalidDatum(e.to_string()))?;
        let gamma = spec
            .gamma
            .iter()
            .map(|row| row.iter().map(|e| parse_fx(e)).collect::<OrbResult<Vec<_>>>())
            .collect::<OrbResult<Vec<_>>>()?;
        let u1 = spec
            .u1
            .iter()
            .map(|e| parse_base(e))
            .collect::<OrbResult<Vec<_>>>()?;
        let u2 = spec
            .u2
            .iter()
            .map(|e| parse_base(e))
            .collect::<OrbResult<Vec<_>>>()?;
        SymDatum::new(spec.n, spec.q, spec.lattice_type, gamma, u1, u2)
    }

    fn rs_det(&self) -> Fx {
        let mut v: FVec = self.u1.iter().map(|x| Fx::from_base(x.clone())).collect();
        let mut cols: Vec<FVec> = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            cols.push(v.clone());
            v = fmat_vec(self.c, &self.gamma, &v);
        }
        let m: FMat = (0..self.n)
            .map(|i| (0..self.n).map(|j| cols[j][i].clone()).collect())
            .collect();
        fmat_det(self.c, &m)
    }
}

/// The transfer factor: the quadratic character of the unramified
/// extension applied to det(gamma^i u_1).
pub fn transfer_factor(d: &SymDatum) -> OrbResult<i64> {
    let det = d.rs_det();
    match det.val(d.q) {
        None => Err(OrbError::NotRegularSemisimple),
        Some(v) => Ok(if v % 2 == 0 { 1 } else { -1 }),
    }
}

// ---- Laurent polynomials in q^s ------------------------------------------

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct LaurentPoly {
    pub terms: BTreeMap<i64, i64>,
}

impl LaurentPoly {
    pub fn zero() -> LaurentPoly {
        LaurentPoly {
            terms: BTreeMap::new(),
        }
    }

    pub fn add_term(&mut self, k: i64, coeff: i64) {
        let e = self.terms.entry(k).or_insert(0);
        *e += coeff;
        if *e == 0 {
            self.terms.remove(&k);
        }
    }

    pub fn scale(&self, s: i64) -> LaurentPoly {
        let mut out = LaurentPoly::zero();
        for (&k, &c) in &self.terms {
            out.add_term(k, c * s);
        }
        out
    }

    /// Multiply by q^(m s).
    pub fn shift(&self, m: i64) -> LaurentPoly {
        let mut out = LaurentPoly::zero();
        for (&k, &c) in &self.terms {
            out.add_term(k + m, c);
        }
        out
    }

    pub fn add(&self, o: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (&k, &c) in &o.terms {
            out.add_term(k, c);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Value at s = 0.
    pub fn at_zero(&self) -> i64 {
        self.terms.values().sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .terms
            .iter()
            .map(|(&k, &c)| (k.to_string(), serde_json::json!(c)))
            .collect();
        serde_json::Value::Object(map)
    }
}

/// d/ds at s = 0, as the integer multiplier of log q.
pub fn derived_orbital(poly: &LaurentPoly) -> i64 {
    poly.terms.iter().map(|(&k, &c)| k * c).sum()
}

// ---- lattices over Z_(p) --------------------------------------------------

/// A lattice (or a module of smaller rank) given by triangularized column
/// vectors with exact rational entries; membership and stability are
/// decided by valuation-pivoted elimination.
#[derive(Clone)]
struct Lat {
    p: u64,
    /// leading row of each basis column, strictly increasing
    pivots: Vec<usize>,
    cols: Vec<Vec<Rq>>,
}

fn mat_vec_rq(m: &[Vec<Rq>], v: &[Rq]) -> Vec<Rq> {
    m.iter()
        .map(|row| {
            let mut s = Rq::zero();
            for (l, x) in v.iter().enumerate() {
                s += row[l].clone() * x.clone();
            }
            s
        })
        .collect()
}

impl Lat {
    /// Reduce spanning columns to an echelon basis over the localization
    /// at p; the rank may be smaller than the ambient dimension.
    fn from_spanning(p: u64, mut gens: Vec<Vec<Rq>>) -> Lat {
        let n = if gens.is_empty() { 0 } else { gens[0].len() };
        let mut pivots = Vec::new();
        let mut cols = Vec::new();
        for row in 0..n {
            let piv = gens
                .iter()
                .enumerate()
                .filter(|(_, g)| !g[row].is_zero())
                .min_by_key(|(_, g)| vp(p, &g[row]).unwrap())
                .map(|(i, _)| i);
            let Some(piv) = piv else { continue };
            let pv = gens.swap_remove(piv);
            for g in gens.iter_mut() {
                if !g[row].is_zero() {
                    let f = g[row].clone() / pv[row].clone();
                    for r in row..n {
                        let t = f.clone() * pv[r].clone();
                        g[r] -= t;
                    }
                }
            }
            pivots.push(row);
            cols.push(pv);
        }
        Lat { p, pivots, cols }
    }

    fn contains(&self, v: &[Rq]) -> bool {
        let n = v.len();
        let mut w: Vec<Rq> = v.to_vec();
        for (k, col) in self.cols.iter().enumerate() {
            let row = self.pivots[k];
            if w[row].is_zero() {
                continue;
            }
            let f = w[row].clone() / col[row].clone();
            if !intp(self.p, &f) {
                return false;
            }
            for r in row..n {
                let t = f.clone() * col[r].clone();
                w[r] -= t;
            }
        }
        w.iter().all(|x| x.is_zero())
    }

    /// Stability under a rational matrix reduces to containment of the
    /// transformed basis.
    fn stable_under(&self, m: &[Vec<Rq>]) -> bool {
        self.cols
            .iter()
            .all(|col| self.contains(&mat_vec_rq(m, col)))
    }

    /// Valuation of the index relative to the unit lattice; requires full
    /// rank.
    fn vdet(&self) -> i64 {
        self.cols
            .iter()
            .zip(&self.pivots)
            .map(|(col, &r)| vp(self.p, &col[r]).unwrap())
            .sum()
    }
}

fn vec_mat_rq(v: &[Rq], m: &[Vec<Rq>]) -> Vec<Rq> {
    (0..m[0].len())
        .map(|j| {
            let mut s = Rq::zero();
            for (i, x) in v.iter().enumerate() {
                s += x.clone() * m[i][j].clone();
            }
            s
        })
        .collect()
}

// ---- the orbital integral -------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TestFn {
    /// 1 on the stabilizer, L_0 and the dual of L_0-dual.
    Lattice,
    /// 1 on the stabilizer, L_0-dual and the dual of L_0.
    DualLattice,
}

/// Enumerate t-dimensional subspaces of F_q^n by reduced echelon form,
/// returning their spanning rows.
fn subspaces(q: u64, n: usize, t: usize) -> Vec<Vec<Vec<u64>>> {
    if t == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut pivots = (0..t).collect::<Vec<usize>>();
    loop {
        // free positions: columns right of each pivot, not a pivot column
        let mut free = Vec::new();
        for (r, &pcol) in pivots.iter().enumerate() {
            for col in pcol + 1..n {
                if !pivots.contains(&col) {
                    free.push((r, col));
                }
            }
        }
        let total = (q as u128).pow(free.len() as u32);
        for mut idx in 0..total {
            let mut rows = vec![vec![0u64; n]; t];
            for (r, &pcol) in pivots.iter().enumerate() {
                rows[r][pcol] = 1;
            }
            for &(r, col) in &free {
                rows[r][col] = (idx % q as u128) as u64;
                idx /= q as u128;
            }
            out.push(rows);
        }
        // next pivot combination
        let mut i = t;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if pivots[i] < n - (t - i) {
                pivots[i] += 1;
                for j in i + 1..t {
                    pivots[j] = pivots[j - 1] + 1;
                }
                break;
            }
        }
    }
}

struct EnumCtx {
    p: u64,
    n: usize,
    g0: Vec<Vec<Rq>>,
    g1: Vec<Vec<Rq>>,
    u1: Vec<Rq>,
    u2: Vec<Rq>,
    subs: Vec<Vec<Vec<u64>>>,
}

/// The finite box that every lattice meeting the support must belong to:
/// core is the gamma-stable module generated by u_1 (times pi for the
/// dual test function), lmax is the dual of the gamma-stable row module
/// generated by u_2.
struct BoxBounds {
    core: Lat,
    lmax: Lat,
    vmax: i64,
}

impl EnumCtx {
    fn new(d: &SymDatum) -> EnumCtx {
        let re = |row: &Vec<Fx>| row.iter().map(|x| x.a.clone()).collect::<Vec<Rq>>();
        let im = |row: &Vec<Fx>| row.iter().map(|x| x.b.clone()).collect::<Vec<Rq>>();
        EnumCtx {
            p: d.q,
            n: d.n,
            g0: d.gamma.iter().map(re).collect(),
            g1: d.gamma.iter().map(im).collect(),
            u1: d.u1.clone(),
            u2: d.u2.clone(),
            subs: subspaces(d.q, d.n, d.t),
        }
    }

    /// Grow the column closure of u_1 and the row closure of u_2 under
    /// gamma jointly. Any lattice meeting the support contains the former
    /// and pairs integrally with the latter, so a non-integral pairing
    /// between the two closures certifies empty support (Ok(None)). Both
    /// chains ascend strictly inside the dual of the other once the spans
    /// are full, which regular semisimplicity forces, so the loop stops.
    fn bounds(&self, f: TestFn) -> OrbResult<Option<BoxBounds>> {
        let p = self.p;
        let n = self.n;
        let seed: Vec<Rq> = match f {
            TestFn::Lattice => self.u1.clone(),
            TestFn::DualLattice => self
                .u1
                .iter()
                .map(|x| x.clone() * Rq::from_integer(p as i128))
                .collect(),
        };
        let mut col_gens = vec![seed];
        let mut row_gens = vec![self.u2.clone()];
        for _ in 0..200 {
            let cm = Lat::from_spanning(p, col_gens.clone());
            let rm = Lat::from_spanning(p, row_gens.clone());
            for r in &rm.cols {
                for c in &cm.cols {
                    let mut s = Rq::zero();
                    for (i, x) in r.iter().enumerate() {
                        s += x.clone() * c[i].clone();
                    }
                    if !intp(p, &s) {
                        return Ok(None);
                    }
                }
            }
            let mut fresh_c = Vec::new();
            for col in &cm.cols {
                for op in [&self.g0, &self.g1] {
                    let img = mat_vec_rq(op, col);
                    if !cm.contains(&img) {
                        fresh_c.push(img);
                    }
                }
            }
            let mut fresh_r = Vec::new();
            for row in &rm.cols {
                for op in [&self.g0, &self.g1] {
                    let img = vec_mat_rq(row, op);
                    if !rm.contains(&img) {
                        fresh_r.push(img);
                    }
                }
            }
            if fresh_c.is_empty() && fresh_r.is_empty() {
                if cm.cols.len() < n || rm.cols.len() < n {
                    return Err(OrbError::NotRegularSemisimple);
                }
                // lmax = {v : (row module) v integral} = W^(-1) O^n
                let w: Vec<Vec<Rq>> = rm.cols.clone();
                let winv =
                    rinv(p, &w).ok_or(OrbError::InvalidDatum("singular row module".into()))?;
                let cols: Vec<Vec<Rq>> = (0..n)
                    .map(|j| (0..n).map(|i| winv[i][j].clone()).collect())
                    .collect();
                let lmax = Lat::from_spanning(p, cols);
                let vmax = lmax.vdet();
                return Ok(Some(BoxBounds {
                    core: cm,
                    lmax,
                    vmax,
                }));
            }
            col_gens = cm.cols;
            col_gens.extend(fresh_c);
            row_gens = rm.cols;
            row_gens.extend(fresh_r);
        }
        Err(OrbError::BoundUncertified(200))
    }

    /// Smallest window size whose lattice range contains the whole box.
    fn cover_window(&self, b: &BoxBounds) -> i64 {
        let n2 = b
            .lmax
            .cols
            .iter()
            .flatten()
            .filter_map(|x| vp(self.p, x))
            .min()
            .unwrap_or(0)
            .min(0)
            .unsigned_abs() as i64;
        let mut n1 = 0i64;
        'outer: loop {
            for i in 0..self.n {
                let mut v = vec![Rq::zero(); self.n];
                v[i] = p_pow(self.p, n1);
                if !b.core.contains(&v) {
                    n1 += 1;
                    assert!(n1 < 200, "core must have full rank");
                    continue 'outer;
                }
            }
            return n1.max(n2);
        }
    }

    /// Sum over lattice pairs inside the window pi^N L_0 to pi^(-N) L_0.
    ///
    /// Only lattices inside the box can meet the support, so the sum runs
    /// over the box intersected with the window. None signals an
    /// enumeration too large to finish.
    fn window_sum(&self, nw: i64, f: TestFn, b: Option<&BoxBounds>) -> Option<LaurentPoly> {
        let n = self.n;
        let p = self.p;
        let poly = LaurentPoly::zero();
        let Some(b) = b else {
            return Some(poly);
        };
        let mut gens = b.core.cols.clone();
        for i in 0..n {
            let mut v = vec![Rq::zero(); n];
            v[i] = p_pow(p, nw);
            gens.push(v);
        }
        let lmin = Lat::from_spanning(p, gens);
        if !lmin.cols.iter().all(|c| b.lmax.contains(c)) {
            return Some(poly);
        }
        let emax = lmin.vdet() - b.vmax;
        self.enumerate_box(nw, f, b, &lmin, emax)
    }

    /// Enumerate sublattices of lmax containing lmin by Hermite normal
    /// form in the basis of lmax, with index exponent at most emax.
    fn enumerate_box(
        &self,
        nw: i64,
        f: TestFn,
        b: &BoxBounds,
        lmin: &Lat,
        emax: i64,
    ) -> Option<LaurentPoly> {
        let mut poly = LaurentPoly::zero();
        let n = self.n;
        let mut budget: u64 = 4_000_000;
        let mut exps = vec![0u32; n];
        loop {
            if exps.iter().map(|&e| e as i64).sum::<i64>() <= emax
                && !self.fill_free(&mut poly, nw, f, b, lmin, &exps, &mut budget)
            {
                return None;
            }
            let mut i = 0;
            loop {
                if i == n {
                    return Some(poly);
                }
                exps[i] += 1;
                if exps[i] as i64 <= emax {
                    break;
                }
                exps[i] = 0;
                i += 1;
            }
        }
    }

    /// true on success, false when the candidate budget runs out
    fn fill_free(
        &self,
        poly: &mut LaurentPoly,
        nw: i64,
        f: TestFn,
        b: &BoxBounds,
        lmin: &Lat,
        exps: &[u32],
        budget: &mut u64,
    ) -> bool {
        let n = self.n;
        let p = self.p;
        // subdiagonal entries: position (i, j) with i > j, value mod p^exps[i]
        let mut positions = Vec::new();
        for j in 0..n {
            for i in j + 1..n {
                positions.push((i, j));
            }
        }
        let total: u128 = positions
            .iter()
            .map(|&(i, _)| (p as u128).pow(exps[i]))
            .product();
        if *budget < total as u64 {
            return false;
        }
        *budget -= total as u64;
        let base = &b.lmax.cols;
        let vdet: i64 = b.vmax + exps.iter().map(|&e| e as i64).sum::<i64>();
        for mut idx in 0..total {
            let mut cols: Vec<Vec<Rq>> = (0..n)
                .map(|j| {
                    let s = p_pow(p, exps[j] as i64);
                    base[j].iter().map(|x| x.clone() * s.clone()).collect()
                })
                .collect();
            for &(i, j) in &positions {
                let m = (p as u128).pow(exps[i]);
                let v = Rq::from_integer((idx % m) as i128);
                idx /= m;
                for r in 0..n {
                    let t = v.clone() * base[i][r].clone();
                    cols[j][r] += t;
                }
            }
            self.visit(poly, nw, f, b, lmin, cols, vdet);
        }
        true
    }

    #[allow(clippy::too_many_arguments)]
    fn visit(
        &self,
        poly: &mut LaurentPoly,
        nw: i64,
        f: TestFn,
        b: &BoxBounds,
        lmin: &Lat,
        cols: Vec<Vec<Rq>>,
        vdet: i64,
    ) {
        // inside the window on both sides
        if cols
            .iter()
            .flatten()
            .any(|x| vp(self.p, x).map_or(false, |v| v < -nw))
        {
            return;
        }
        let lat = Lat {
            p: self.p,
            pivots: b.lmax.pivots.clone(),
            cols,
        };
        if !lmin.cols.iter().all(|c| lat.contains(c)) {
            return;
        }
        if !lat.stable_under(&self.g0) || !lat.stable_under(&self.g1) {
            return;
        }
        if f == TestFn::Lattice && !lat.contains(&self.u1) {
            return;
        }
        // u_2 integral on the lower lattice: automatic inside lmax
        let sign = if vdet % 2 == 0 { 1 } else { -1 };
        let pinv = p_pow(self.p, -1);
        for sub in &self.subs {
            // upper lattice: adjoin pi^(-1) times the chosen directions
            let mut gens = lat.cols.clone();
            for row in sub {
                let mut v = vec![Rq::zero(); self.n];
                for (j, &coef) in row.iter().enumerate() {
                    if coef != 0 {
                        for r in 0..self.n {
                            v[r] += Rq::from_integer(coef as i128) * lat.cols[j][r].clone();
                        }
                    }
                }
                for x in v.iter_mut() {
                    *x *= pinv.clone();
                }
                gens.push(v);
            }
            let upper = Lat::from_spanning(self.p, gens);
            if !upper.stable_under(&self.g0) || !upper.stable_under(&self.g1) {
                continue;
            }
            match f {
                TestFn::Lattice => {
                    let ok = upper.cols.iter().all(|col| {
                        let mut s = Rq::zero();
                        for (i, x) in col.iter().enumerate() {
                            s += self.u2[i].clone() * x.clone();
                        }
                        intp(self.p, &s)
                    });
                    if !ok {
                        continue;
                    }
                }
                TestFn::DualLattice => {
                    if !upper.contains(&self.u1) {
                        continue;
                    }
                }
            }
            poly.add_term(vdet, sign);
        }
    }
}

/// The one-variable orbital integral as an exact Laurent polynomial in
/// q^s: the sum over lattice-pair cosets meeting the support of the test
/// function, weighted by the quadratic character and q^(s val det), and
/// multiplied by the transfer factor. The enumeration window grows until
/// three consecutive windows agree.
pub fn orbital_integral(d: &SymDatum, f: TestFn) -> OrbResult<LaurentPoly> {
    let omega = transfer_factor(d)?;
    let spread = d
        .charpoly
        .iter()
        .chain(d.pairings.iter())
        .filter_map(|x| x.val(d.q))
        .map(|v| v.abs())
        .max()
        .unwrap_or(0);
    let ctx = EnumCtx::new(d);
    let bounds = ctx.bounds(f)?;
    let n0 = (d.n as i64 + spread.max(1))
        .max(bounds.as_ref().map_or(0, |b| ctx.cover_window(b)));
    let cap = n0 + 6;
    let mut window: Vec<(i64, LaurentPoly)> = Vec::new();
    let mut nw = n0;
    while nw <= cap {
        let Some(poly) = ctx.window_sum(nw, f, bounds.as_ref()) else {
            return Err(OrbError::BoundUncertified(nw));
        };
        window.push((nw, poly));
        if window.len() >= 3 {
            let k = window.len();
            if window[k - 1].1 == window[k - 2].1 && window[k - 2].1 == window[k - 3].1 {
                return Ok(window[k - 1].1.scale(omega));
            }
        }
        nw += 1;
    }
    Err(OrbError::BoundUncertified(cap))
}

/// Closed form for n = 1: omega times the alternating geometric sum over
/// the valuation range cut out by the two support conditions (type 0).
pub fn closed_form_n1(a: i64, b: i64) -> LaurentPoly {
    let mut poly = LaurentPoly::zero();
    if a + b < 0 {
        return poly;
    }
    let omega = if a % 2 == 0 { 1 } else { -1 };
    for k in -b..=a {
        let s = if k.rem_euclid(2) == 0 { 1 } else { -1 };
        poly.add_term(k, omega * s);
    }
    poly
}

/// The group action (here by the inverse of h, so that val det enters
/// the covariance with a positive sign): gamma conjugated, u_1 pushed
/// forward, u_2 pulled back.
pub fn act(d: &SymDatum, h: &[Vec<Rq>]) -> OrbResult<SymDatum> {
    let n = d.n;
    let hf: FMat = h
        .iter()
        .map(|row| row.iter().map(|x| Fx::from_base(x.clone())).collect())
        .collect();
    let hinv = rinv(d.q, h).ok_or(OrbError::InvalidDatum("singular h".into()))?;
    let hinvf: FMat = hinv
        .iter()
        .map(|row| row.iter().map(|x| Fx::from_base(x.clone())).collect())
        .collect();
    let gamma = fmat_mul(d.c, &fmat_mul(d.c, &hf, &d.gamma), &hinvf);
    let u1: Vec<Rq> = (0..n)
        .map(|i| {
            let mut s = Rq::zero();
            for (l, x) in d.u1.iter().enumerate() {
                s += h[i][l].clone() * x.clone();
            }
            s
        })
        .collect();
    let u2: Vec<Rq> = (0..n)
        .map(|j| {
            let mut s = Rq::zero();
            for (i, x) in d.u2.iter().enumerate() {
                s += x.clone() * hinv[i][j].clone();
            }
            s
        })
        .collect();
    SymDatum::new(n, d.q, d.t, gamma, u1, u2)
}

pub fn val_det(p: u64, h: &[Vec<Rq>]) -> Option<i64> {
    let hf: FMat = h
        .iter()
        .map(|row| row.iter().map(|x| Fx::from_base(x.clone())).collect())
        .collect();
    fmat_det(1, &hf).val(p)
}

/// Rational matrix inverse via the adjugate, n <= 3.
pub(crate) fn rinv(p: u64, h: &[Vec<Rq>]) -> Option<Vec<Vec<Rq>>> {
    let _ = p;
    let n = h.len();
    let hf: FMat = h
        .iter()
        .map(|row| row.iter().map(|x| Fx::from_base(x.clone())).collect())
        .collect();
    let det = fmat_det(1, &hf).a;
    if det.is_zero() {
        return None;
    }
    let minor = |r: usize, cidx: usize| -> Rq {
        let sub: FMat = (0..n)
            .filter(|&i| i != r)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != cidx)
                    .map(|j| hf[i][j].clone())
                    .collect()
            })
            .collect();
        fmat_det(1, &sub).a
    };
    let mut inv = vec![vec![Rq::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let m = minor(j, i);
            let sgn = if (i + j) % 2 == 0 { 1 } else { -1 };
            inv[i][j] = m * Rq::from_integer(sgn) / det.clone();
        }
    }
    Some(inv)
}

// ---- hermitian side and matching ------------------------------------------

/// A hermitian space with matrix j, a unitary element g and a vector u.
pub struct VSide {
    pub c: i128,
    pub j: FMat,
    pub g: FMat,
    pub u: FVec,
}

impl VSide {
    pub fn new(c: i128, j: FMat, g: FMat, u: FVec) -> OrbResult<VSide> {
        let n = j.len();
        let jbar_t: FMat = (0..n)
            .map(|i| (0..n).map(|l| j[l][i].conj()).collect())
            .collect();
        if !fmat_eq(&j, &jbar_t) {
            return Err(OrbError::InvalidDatum("form is not hermitian".into()));
        }
        let gbar_t: FMat = (0..n)
            .map(|i| (0..n).map(|l| g[l][i].conj()).collect())
            .collect();
        let lhs = fmat_mul(c, &fmat_mul(c, &gbar_t, &j), &g);
        if !fmat_eq(&lhs, &j) {
            return Err(OrbError::InvalidDatum("g is not unitary for the form".into()));
        }
        Ok(VSide { c, j, g, u })
    }

    /// (x, y) = conj(y)^T J x.
    fn form(&self, x: &FVec, y: &FVec) -> Fx {
        let n = self.j.len();
        let mut s = Fx::zero();
        for i in 0..n {
            for l in 0..n {
                s = s.add(&y[i].conj().mul(&self.j[i][l].mul(&x[l], self.c), self.c));
            }
        }
        s
    }

    /// Whether the space is the non-split one relative to a type-t vertex
    /// lattice: the discriminant parities differ.
    pub fn mismatches_type(&self, p: u64, t: usize) -> bool {
        let v = fmat_det(self.c, &self.j).val(p).expect("nondegenerate form");
        (v.rem_euclid(2) as usize) != (t % 2)
    }
}

/// Matching of invariants: equal characteristic polynomials and equal
/// moment sequences.
pub fn match_invariants(vs: &VSide, d: &SymDatum) -> OrbResult<bool> {
    if vs.j.len() != d.n {
        return Ok(false);
    }
    if fmat_det(d.c, &vs.j).is_zero() {
        return Err(OrbError::InvalidDatum("degenerate hermitian form".into()));
    }
    let cg = char_coeffs(vs.c, &vs.g);
    if cg != d.charpoly {
        return Ok(false);
    }
    let mut v = vs.u.clone();
    for i in 0..d.n {
        if vs.form(&v, &vs.u) != d.pairings[i] {
            return Ok(false);
        }
        v = fmat_vec(vs.c, &vs.g, &v);
    }
    Ok(true)
}

/// Result JSON for the CLI.
pub fn result_json(d: &SymDatum, f: TestFn) -> OrbResult<serde_json::Value> {
    let omega = transfer_factor(d)?;
    let poly = orbital_integral(d, f)?;
    Ok(serde_json::json!({
        "omega": omega,
        "orbital": poly.to_json(),
        "derived_over_logq": derived_orbital(&poly).to_string(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rq(n: i128) -> Rq {
        Rq::from_integer(n)
    }

    fn n1_datum(p: u64, a: i64, b: i64) -> SymDatum {
        SymDatum::new(
            1,
            p,
            0,
            vec![vec![Fx::one()]],
            vec![p_pow(p, a)],
            vec![p_pow(p, b)],
        )
        .unwrap()
    }

    /// gamma = x conj(x)^(-1) lies on the symmetric space for any
    /// invertible x over F.
    fn gamma_from(c: i128, x: &FMat) -> FMat {
        let n = x.len();
        let xbar: FMat = x
            .iter()
            .map(|row| row.iter().map(|e| e.conj()).collect())
            .collect();
        let det = fmat_det(c, &xbar);
        let nm = det.mul(&det.conj(), c).a;
        assert!(!nm.is_zero());
        // inverse of xbar via adjugate over F (n = 2 only)
        assert_eq!(n, 2);
        let adj: FMat = vec![
            vec![xbar[1][1].clone(), xbar[0][1].neg()],
            vec![xbar[1][0].neg(), xbar[0][0].clone()],
        ];
        let cinv: FMat = adj
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| {
                        let t = e.mul(&det.conj(), c);
                        Fx {
                            a: t.a / nm.clone(),
                            b: t.b / nm.clone(),
                        }
                    })
                    .collect()
            })
            .collect();
        fmat_mul(c, x, &cinv)
    }

    fn random_datum(rng: &mut ChaCha8Rng, p: u64, t: usize) -> SymDatum {
        let c = smallest_nonresidue(p);
        loop {
            let x: FMat = (0..2)
                .map(|_| {
                    (0..2)
                        .map(|_| Fx {
                            a: rq(rng.gen_range(-3..=3)),
                            b: rq(rng.gen_range(-2..=2)),
                        })
                        .collect()
                })
                .collect();
            if fmat_det(c, &x).is_zero() {
                continue;
            }
            let gamma = gamma_from(c, &x);
            let u1 = vec![rq(rng.gen_range(-3..=3)), rq(rng.gen_range(-3..=3))];
            let u2 = vec![rq(rng.gen_range(-3..=3)), rq(rng.gen_range(-3..=3))];
            match SymDatum::new(2, p, t, gamma, u1, u2) {
                Ok(d) => return d,
                Err(_) => continue,
            }
        }
    }

    #[test]
    fn parsing_and_validation() {
        let x = parse_fx("1+2z").unwrap();
        assert_eq!((x.a, x.b), (rq(1), rq(2)));
        let y = parse_fx("-z/3 + 1/9").unwrap();
        assert_eq!((y.a, y.b), (Ratio::new(1, 9), Ratio::new(-1, 3)));
        assert!(parse_fx("1 + w").is_err());
        let d = SymDatum::from_json(
            r#"{"n":1,"q":3,"gamma":[["1"]],"u1":["9"],"u2":["1/3"]}"#,
        )
        .unwrap();
        assert_eq!(vp(3, &d.u1[0]), Some(2));
        assert_eq!(vp(3, &d.u2[0]), Some(-1));
        // gamma gamma-bar = id is enforced
        assert!(matches!(
            SymDatum::from_json(r#"{"n":1,"q":3,"gamma":[["3"]],"u1":["1"],"u2":["1"]}"#),
            Err(OrbError::InvalidDatum(_))
        ));
        // u1 = 0 is not regular semisimple
        assert!(matches!(
            SymDatum::from_json(r#"{"n":1,"q":3,"gamma":[["1"]],"u1":["0"],"u2":["1"]}"#),
            Err(OrbError::NotRegularSemisimple)
        ));
        assert!(matches!(
            SymDatum::from_json(r#"{"n":1,"q":9,"gamma":[["1"]],"u1":["1"],"u2":["1"]}"#),
            Err(OrbError::InvalidDatum(_))
        ));
    }

    #[test]
    fn transfer_factor_signs() {
        assert_eq!(transfer_factor(&n1_datum(3, 0, 0)).unwrap(), 1);
        assert_eq!(transfer_factor(&n1_datum(3, 1, 5)).unwrap(), -1);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let d = random_datum(&mut rng, 3, 0);
            let w = transfer_factor(&d).unwrap();
            assert_eq!(w * w, 1);
        }
    }

    #[test]
    fn n1_enumeration_matches_closed_form() {
        for p in [3u64, 5] {
            for a in 0..=3i64 {
                for b in 0..=3i64 {
                    let d = n1_datum(p, a, b);
                    let poly = orbital_integral(&d, TestFn::Lattice).unwrap();
                    assert_eq!(poly, closed_form_n1(a, b), "p={p} a={a} b={b}");
                }
            }
        }
        // negative valuations on both sides: empty support
        let d = n1_datum(3, -1, -1);
        assert!(orbital_integral(&d, TestFn::Lattice).unwrap().is_zero());
        // matched vanishing at s = 0 exactly when a + b is odd
        for a in 0..=4i64 {
            for b in 0..=4i64 {
                let z = closed_form_n1(a, b).at_zero();
                assert_eq!(z == 0, (a + b) % 2 != 0, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn derived_orbital_examples() {
        let mut c = LaurentPoly::zero();
        c.add_term(0, 5);
        assert_eq!(derived_orbital(&c), 0);
        let mut s = LaurentPoly::zero();
        s.add_term(1, 1);
        s.add_term(-1, -1);
        assert_eq!(derived_orbital(&s), 2);
        // (a, b) = (1, 0): omega (1 - q^s), derivative -omega log q
        let p = closed_form_n1(1, 0);
        let omega = -1;
        assert_eq!(derived_orbital(&p), -omega);
        assert_eq!(p.at_zero(), 0);
    }

    #[test]
    fn n1_dual_lattice_type_one() {
        // type 1: L_0-dual = pi^(-1) O; support shifts by one step
        let p = 3u64;
        for a in 0..=2i64 {
            for b in 0..=2i64 {
                let d = SymDatum::new(
                    1,
                    p,
                    1,
                    vec![vec![Fx::one()]],
                    vec![p_pow(p, a)],
                    vec![p_pow(p, b)],
                )
                .unwrap();
                let poly = orbital_integral(&d, TestFn::Lattice).unwrap();
                // lower lattice condition k <= a, upper dual condition
                // u_2 pi^(k-1) integral: k >= 1 - b
                let mut expect = LaurentPoly::zero();
                let omega = if a % 2 == 0 { 1 } else { -1 };
                for k in (1 - b)..=a {
                    let s = if k.rem_euclid(2) == 0 { 1 } else { -1 };
                    expect.add_term(k, omega * s);
                }
                assert_eq!(poly, expect, "a={a} b={b}");
                let dual = orbital_integral(&d, TestFn::DualLattice).unwrap();
                // swapped support: u_1 in pi^(k-1) O and u_2 pi^k integral
                let mut expd = LaurentPoly::zero();
                for k in -b..=(a + 1) {
                    let s = if k.rem_euclid(2) == 0 { 1 } else { -1 };
                    expd.add_term(k, omega * s);
                }
                assert_eq!(dual, expd, "dual a={a} b={b}");
            }
        }
    }

    #[test]
    fn orbit_covariance_n2() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for trial in 0..6 {
            let t = if trial % 2 == 0 { 0 } else { 1 };
            let d = random_datum(&mut rng, 3, t);
            let h: Vec<Vec<Rq>> = match trial % 3 {
                0 => vec![vec![rq(3), rq(0)], vec![rq(0), rq(1)]],
                1 => vec![vec![rq(1), rq(1)], vec![rq(0), rq(3)]],
                _ => vec![vec![rq(0), rq(1)], vec![rq(3), rq(3)]],
            };
            let dd = act(&d, &h).unwrap();
            let v = val_det(3, &h).unwrap();
            let base = orbital_integral(&d, TestFn::Lattice).unwrap();
            let moved = orbital_integral(&dd, TestFn::Lattice).unwrap();
            assert_eq!(moved, base.shift(v), "trial {trial}");
        }
    }

    #[test]
    fn matching_of_invariants() {
        // n = 1: the datum's own invariant as the hermitian form, matched
        // exactly when the invariant has the right discriminant parity
        let d = n1_datum(3, 1, 0); // u2 u1 = pi, odd
        let inv = d.pairings[0].clone();
        let vs = VSide::new(
            d.c,
            vec![vec![inv]],
            vec![vec![Fx::one()]],
            vec![Fx::one()],
        )
        .unwrap();
        assert!(vs.mismatches_type(3, 0)); // odd discriminant: the other space
        assert!(match_invariants(&vs, &d).unwrap());
        let de = n1_datum(3, 2, 0); // even invariant: same space as V
        let vse = VSide::new(
            de.c,
            vec![vec![de.pairings[0].clone()]],
            vec![vec![Fx::one()]],
            vec![Fx::one()],
        )
        .unwrap();
        assert!(!vse.mismatches_type(3, 0));
        assert!(match_invariants(&vse, &de).unwrap());
        // perturbed characteristic polynomial fails to match
        let vbad = VSide::new(
            d.c,
            vec![vec![d.pairings[0].clone()]],
            vec![vec![Fx::one().neg()]],
            vec![Fx::one()],
        )
        .unwrap();
        assert!(!match_invariants(&vbad, &d).unwrap());
        // matched vanishing: odd invariant forces Orb(f_L, 0) = 0
        let poly = orbital_integral(&d, TestFn::Lattice).unwrap();
        assert_eq!(poly.at_zero(), 0);
    }

    #[test]
    fn result_json_shape() {
        let d = n1_datum(3, 1, 1);
        let v = result_json(&d, TestFn::Lattice).unwrap();
        assert_eq!(v["omega"], serde_json::json!(-1));
        assert_eq!(v["derived_over_logq"], serde_json::json!("0"));
        assert_eq!(v["orbital"]["0"], serde_json::json!(-1));
        assert_eq!(v["orbital"]["-1"], serde_json::json!(1));
        assert_eq!(v["orbital"]["1"], serde_json::json!(1));
    }
}
