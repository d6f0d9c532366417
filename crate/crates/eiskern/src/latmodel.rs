//! Lattice chains in F^n, hermitian dual lattices, and finite-ring point
//! enumeration of relative/absolute standard and naive unitary local
//! models, with the e_A comparison bijection between them.

use crate::algebra::{AlgHom, Algebra, Elem};
use crate::eisenstein::{theta_trace_vec, EisensteinError, EmbeddingSet, Setting};
use crate::linalg::{self, Mat};
use crate::rmod::{enumerate_free_summands, CoeffRing};
use crate::tower::{pi_val_div, FieldTower};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("degenerate hermitian form")]
    Degenerate,
    #[error("not a lattice chain: {0}")]
    BadChain(String),
    #[error("enumeration budget exceeded: estimate {0}")]
    BudgetExceeded(u64),
    #[error("comparison is not a bijection: {0}")]
    NotBijective(String),
    #[error(transparent)]
    Eisenstein(#[from] EisensteinError),
}

/// An n x n matrix with entries in a finite O-algebra.
pub type AMat = Vec<Vec<Elem>>;

pub fn amat_mul(alg: &Algebra, x: &AMat, y: &AMat) -> AMat {
    let n = x.len();
    let m = y[0].len();
    let k = y.len();
    let mut out = vec![vec![alg.zero(); m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut acc = alg.zero();
            for l in 0..k {
                acc = alg.add(&acc, &alg.mul(&x[i][l], &y[l][j]));
            }
            out[i][j] = acc;
        }
    }
    out
}

pub fn amat_map(alg: &Algebra, hom: &AlgHom, x: &AMat) -> AMat {
    let c = alg.ctx_store();
    x.iter()
        .map(|row| row.iter().map(|e| hom.apply(e, &c)).collect())
        .collect()
}

/// Determinant by cofactor expansion (small n).
pub fn amat_det(alg: &Algebra, x: &AMat) -> Elem {
    let n = x.len();
    let idx: Vec<usize> = (0..n).collect();
    det_rec(alg, x, &idx, &idx)
}

fn det_rec(alg: &Algebra, x: &AMat, rows: &[usize], cols: &[usize]) -> Elem {
    if rows.is_empty() {
        return alg.one.clone();
    }
    let mut det = alg.zero();
    let i = rows[0];
    let rest: Vec<usize> = rows[1..].to_vec();
    for (pos, &j) in cols.iter().enumerate() {
        let mut sub = cols.to_vec();
        sub.remove(pos);
        let minor = det_rec(alg, x, &rest, &sub);
        let term = alg.mul(&x[i][j], &minor);
        if pos % 2 == 0 {
            det = alg.add(&det, &term);
        } else {
            det = alg.sub(&det, &term);
        }
    }
    det
}

/// Adjugate: adj(X) X = X adj(X) = det(X) I.
pub fn amat_adjugate(alg: &Algebra, x: &AMat) -> AMat {
    let n = x.len();
    let mut adj = vec![vec![alg.zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let rows: Vec<usize> = (0..n).filter(|&r| r != j).collect();
            let cols: Vec<usize> = (0..n).filter(|&c| c != i).collect();
            let minor = det_rec(alg, x, &rows, &cols);
            adj[i][j] = if (i + j) % 2 == 0 {
                minor
            } else {
                alg.neg(&minor)
            };
        }
    }
    adj
}

/// A lattice pi^{-shift} . (O_F-span of the rows of `basis`) inside F^n.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub shift: i64,
    pub basis: AMat,
}

impl Lattice {
    pub fn standard(tower: &FieldTower, n: usize) -> Lattice {
        let alg = &tower.alg;
        let mut basis = vec![vec![alg.zero(); n]; n];
        for (i, row) in basis.iter_mut().enumerate() {
            row[i] = alg.one.clone();
        }
        Lattice { shift: 0, basis }
    }

    /// Strip common pi factors from the basis so that the lattice is
    /// integral but not contained in pi O^n (after adjusting the shift).
    pub fn normalize(&mut self, tower: &FieldTower) {
        let alg = &tower.alg;
        loop {
            let all_div = self
                .basis
                .iter()
                .flatten()
                .all(|e| alg.is_zero_work(e) || pi_val_div(alg, &tower.pi, e, 1).0 >= 1);
            if !all_div {
                break;
            }
            for row in self.basis.iter_mut() {
                for e in row.iter_mut() {
                    *e = pi_div_exact(alg, &tower.pi, e, 1);
                }
            }
            self.shift -= 1;
        }
    }

    /// Flat Z-coordinate rows of pi^extra . basis (extra >= 0).
    pub fn flat_rows(&self, tower: &FieldTower, extra: u32) -> Mat {
        let alg = &tower.alg;
        let n = self.basis.len();
        let mut pi_pow = alg.one.clone();
        for _ in 0..extra {
            pi_pow = alg.mul(&pi_pow, &tower.pi);
        }
        let mut m = Mat::zero(0, n * alg.rank);
        for row in &self.basis {
            let mut flat = vec![0u128; n * alg.rank];
            for (c, e) in row.iter().enumerate() {
                let scaled = alg.mul(e, &pi_pow);
                for (t, &v) in scaled.iter().enumerate() {
                    flat[c * alg.rank + t] = v % alg.ctx_work().modulus;
                }
            }
            m.push_row(&flat);
        }
        m
    }

    /// Canonical O_F-span key at a common shift level.
    pub fn span_at(&self, tower: &FieldTower, cr_f: &CoeffRing, level: i64) -> Mat {
        let extra = level - self.shift;
        assert!(extra >= 0, "lattice not contained in the comparison window");
        cr_f.t_span(&self.flat_rows(tower, extra as u32))
    }
}

pub fn pi_div_exact(alg: &Algebra, pi: &Elem, e: &Elem, times: u32) -> Elem {
    let c = alg.ctx_store();
    let mut cur = e.clone();
    for _ in 0..times {
        cur = linalg::solve_left(&alg.mult_mat(pi), &cur, &c).expect("exact pi division");
    }
    cur
}

/// O_F-linear algebra context for F^n at working precision.
pub fn f_coeff_ring(tower: &FieldTower, n: usize) -> CoeffRing {
    CoeffRing::over_self(&tower.alg, n, &tower.pi, tower.f as u64)
}

/// Containment of lattices (as O_F-modules at working precision).
pub fn lattice_contains(tower: &FieldTower, cr_f: &CoeffRing, big: &Lattice, small: &Lattice) -> bool {
    let level = big.shift.max(small.shift);
    let hb = big.span_at(tower, cr_f, level);
    let hs = small.span_at(tower, cr_f, level);
    linalg::span_contained(&hs, &hb, &cr_f.ctx)
}

pub fn lattice_eq(tower: &FieldTower, cr_f: &CoeffRing, a: &Lattice, b: &Lattice) -> bool {
    lattice_contains(tower, cr_f, a, b) && lattice_contains(tower, cr_f, b, a)
}

/// log_p of the index [big : small].
pub fn lattice_index_log(tower: &FieldTower, cr_f: &CoeffRing, big: &Lattice, small: &Lattice) -> u64 {
    let level = big.shift.max(small.shift);
    let hb = big.span_at(tower, cr_f, level);
    let hs = small.span_at(tower, cr_f, level);
    assert!(linalg::span_contained(&hs, &hb, &cr_f.ctx));
    linalg::span_log_size(&hb, &cr_f.ctx) - linalg::span_log_size(&hs, &cr_f.ctx)
}

/// The dual lattice with respect to the hermitian form with Gram matrix
/// `gram` (entries in O_F, tau-hermitian): all x with x . gram . tau(basis)^T
/// integral.
pub fn dual_lattice(
    tower: &FieldTower,
    tau: &AlgHom,
    gram: &AMat,
    lat: &Lattice,
) -> Result<Lattice, ModelError> {
    let alg = &tower.alg;
    let tb = amat_map(alg, tau, &lat.basis);
    let tbt: AMat = (0..tb.len())
        .map(|i| (0..tb.len()).map(|j| tb[j][i].clone()).collect())
        .collect();
    let g0 = amat_mul(alg, gram, &tbt);
    let det = amat_det(alg, &g0);
    if alg.is_zero_work(&det) {
        return Err(ModelError::Degenerate);
    }
    let cap = tower.m * tower.e as u32;
    let (v, unit) = pi_val_div(alg, &tower.pi, &det, cap);
    if !alg.is_unit(&unit) {
        return Err(ModelError::Degenerate);
    }
    let uinv = alg.inverse(&unit).map_err(|_| ModelError::Degenerate)?;
    let adj = amat_adjugate(alg, &g0);
    // rows of G0^{-1} = u^{-1} pi^{-v} adj(G0): the dual is
    // pi^{shift + v - 2*0} ... combine shift bookkeeping
    let basis: AMat = adj
        .iter()
        .map(|row| row.iter().map(|e| alg.mul(e, &uinv)).collect())
        .collect();
    let mut out = Lattice {
        shift: v as i64 - lat.shift,
        basis,
    };
    out.normalize(tower);
    Ok(out)
}

/// One pi-period of a lattice chain: strictly decreasing members with
/// pi . first contained in last.
#[derive(Clone, Debug)]
pub struct LatticeChain {
    pub members: Vec<Lattice>,
}

impl LatticeChain {
    pub fn new(tower: &FieldTower, members: Vec<Lattice>) -> Result<LatticeChain, ModelError> {
        if members.is_empty() {
            return Err(ModelError::BadChain("empty".into()));
        }
        let n = members[0].basis.len();
        let cr_f = f_coeff_ring(tower, n);
        for w in members.windows(2) {
            if !lattice_contains(tower, &cr_f, &w[0], &w[1])
                || lattice_eq(tower, &cr_f, &w[0], &w[1])
            {
                return Err(ModelError::BadChain("members not strictly decreasing".into()));
            }
        }
        let mut pi_first = members[0].clone();
        pi_first.shift -= 1;
        let last = members.last().unwrap();
        if !lattice_contains(tower, &cr_f, last, &pi_first) {
            return Err(ModelError::BadChain("pi-periodicity fails".into()));
        }
        if members.len() > 1 && lattice_eq(tower, &cr_f, last, &pi_first) {
            return Err(ModelError::BadChain("last member equals pi times the first".into()));
        }
        Ok(LatticeChain { members })
    }

    /// For a self-dual chain: for each member, the member index and pi
    /// power with dual(member i) = pi^{-e} member d.
    pub fn dual_structure(
        &self,
        tower: &FieldTower,
        tau: &AlgHom,
        gram: &AMat,
    ) -> Result<Vec<(usize, i64)>, ModelError> {
        let n = self.members[0].basis.len();
        let cr_f = f_coeff_ring(tower, n);
        let mut out = Vec::new();
        for m in &self.members {
            let dual = dual_lattice(tower, tau, gram, m)?;
            let mut found = None;
            for (j, other) in self.members.iter().enumerate() {
                // dual = pi^{-e} other for some integer e
                for e in -3i64..=3 {
                    let mut cand = other.clone();
                    cand.shift += e;
                    if lattice_eq(tower, &cr_f, &dual, &cand) {
                        found = Some((j, e));
                    }
                }
            }
            match found {
                Some(x) => out.push(x),
                None => {
                    return Err(ModelError::BadChain(
                        "chain is not closed under duality".into(),
                    ))
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    RelativeStandard,
    AbsoluteStandard,
    NaiveUnitaryRelative,
    NaiveUnitaryAbsolute,
}

impl Flavor {
    pub fn is_absolute(&self) -> bool {
        matches!(self, Flavor::AbsoluteStandard | Flavor::NaiveUnitaryAbsolute)
    }
    pub fn is_unitary(&self) -> bool {
        matches!(
            self,
            Flavor::NaiveUnitaryRelative | Flavor::NaiveUnitaryAbsolute
        )
    }
}

/// Unitary extras: conjugation, Gram matrix, signature.
#[derive(Clone, Debug)]
pub struct UnitaryData {
    pub tau: AlgHom,
    pub gram: AMat,
    pub r: usize,
    pub s: usize,
}

/// A fully prepared local-model instance over a finite test ring.
pub struct ModelCtx {
    pub setting: Setting,
    pub flavor: Flavor,
    pub n: usize,
    pub quot_rank: u64,
    pub a: EmbeddingSet,
    pub b: EmbeddingSet,
    pub phi0: usize,
    /// coefficient algebra of the point modules and its basis inside T
    pub coeff: Algebra,
    pub coeff_basis: Mat,
    pub coeff_idem: Elem,
    pub zeta_c: Elem,
    pub cr: CoeffRing,
    pub chain: LatticeChain,
    /// trans[j]: member j+1 coords -> member j coords (j < k-1);
    /// trans[k-1]: pi-wrap, member 0 -> member k-1
    pub trans: Vec<Mat>,
    pub unitary: Option<UnitaryData>,
    pub dual_partner: Vec<(usize, i64)>,
    /// pairing[i]: flat matrix of R-coordinates pairing member i with its
    /// dual partner
    pub pairing: Vec<Vec<Vec<Elem>>>,
}

/// Map an O_F element into the coefficient algebra (via a (x) 1 in T and
/// projection onto the kept factors).
fn of_to_coeff(setting: &Setting, coeff_idem: &Elem, coeff_basis: &Mat, a: &Elem) -> Elem {
    let t = &setting.tensor;
    let x = setting.f_alg.tensor_left(a, &setting.ring.alg);
    t.project_to_factor(&x, coeff_idem, coeff_basis)
}

impl ModelCtx {
    pub fn new(
        setting: Setting,
        flavor: Flavor,
        n: usize,
        d_or_r: usize,
        a_set: &[usize],
        phi0: usize,
        chain: LatticeChain,
        unitary: Option<UnitaryData>,
    ) -> Result<ModelCtx, ModelError> {
        let split = &setting.split;
        let a = EmbeddingSet::new(split, a_set);
        assert!(!a.set.contains(&phi0));
        let b = if flavor.is_unitary() {
            let u = unitary.as_ref().expect("unitary flavors carry form data");
            let phi0_bar = conj_of_embedding(&setting, &u.tau, phi0);
            let mut v: Vec<usize> = a.set.iter().copied().collect();
            v.push(phi0);
            v.push(phi0_bar);
            EmbeddingSet::new(split, &v)
        } else {
            let mut v: Vec<usize> = a.set.iter().copied().collect();
            v.push(phi0);
            EmbeddingSet::new(split, &v)
        };
        // kept factors: all for absolute flavors, B \ A for relative ones
        let t = &setting.tensor;
        let idems = t.idempotents().map_err(|e| ModelError::BadChain(format!("{e}")))?;
        let keep: Vec<Elem> = if flavor.is_absolute() {
            idems.clone()
        } else {
            // factors whose embedding lies in B \ A: factor e has
            // e (zeta (x) 1) = e (1 (x) phi_j zeta) for j in B \ A
            let wanted: Vec<usize> = b.set.difference(&a.set).copied().collect();
            idems
                .iter()
                .filter(|e| {
                    wanted.iter().any(|&j| {
                        let lhs = t.mul(e, &setting.zeta_t);
                        let rhs = t.mul(e, &setting.phi_zeta[j]);
                        t.eq_work(&lhs, &rhs)
                    })
                })
                .cloned()
                .collect()
        };
        let mut ec = t.zero();
        for e in &keep {
            ec = t.add(&ec, e);
        }
        let (coeff, coeff_basis) = t.factor(&ec);
        let zeta_c = of_to_coeff(&setting, &ec, &coeff_basis, &setting.tower.zeta);
        // R structure on the coefficient algebra
        let r_img: Vec<Elem> = (0..setting.ring.alg.rank)
            .map(|i| {
                let x = setting
                    .f_alg
                    .tensor_right(&setting.ring.alg.basis_elem(i), &setting.ring.alg);
                t.project_to_factor(&x, &ec, &coeff_basis)
            })
            .collect();
        let mut m_ideal = vec![coeff.from_int(coeff.p as i64)];
        if !setting.ring.alg.is_zero_work(&setting.ring.pi_r)
            && !setting.ring.alg.is_unit(&setting.ring.pi_r)
        {
            let x = setting.f_alg.tensor_right(&setting.ring.pi_r, &setting.ring.alg);
            m_ideal.push(t.project_to_factor(&x, &ec, &coeff_basis));
        }
        let cr = CoeffRing {
            t: coeff.clone(),
            n,
            r_basis: r_img,
            m_ideal,
            r_log: setting.ring.alg.rank as u64 * setting.ring.alg.m_work as u64,
            res_log: setting.ring.res_log,
            ctx: coeff.ctx_work(),
        };
        let quot_rank = match flavor {
            Flavor::RelativeStandard => (n - d_or_r) as u64,
            Flavor::AbsoluteStandard => {
                let acomp = split.roots.len() - a.set.len();
                (n * acomp - d_or_r) as u64
            }
            Flavor::NaiveUnitaryRelative => n as u64,
            Flavor::NaiveUnitaryAbsolute => {
                (n * split.roots.len() / 2) as u64
            }
        };
        let tower = setting.tower.clone();
        let mut ctx = ModelCtx {
            setting,
            flavor,
            n,
            quot_rank,
            a,
            b,
            phi0,
            coeff,
            coeff_basis,
            coeff_idem: ec,
            zeta_c,
            cr,
            chain,
            trans: Vec::new(),
            unitary,
            dual_partner: Vec::new(),
            pairing: Vec::new(),
        };
        ctx.build_transitions(&tower)?;
        if ctx.flavor.is_unitary() {
            ctx.build_pairings(&tower)?;
        }
        Ok(ctx)
    }

    /// O_F transition matrix expressing the rows of `from` in the basis of
    /// `to` (an inclusion of lattices), then turned into a flat matrix on
    /// coefficient coordinates.
    fn inclusion_matrix(
        &self,
        tower: &FieldTower,
        from: &Lattice,
        to: &Lattice,
    ) -> Result<Mat, ModelError> {
        let alg = &tower.alg;
        let n = self.n;
        let cr_f = f_coeff_ring(tower, n);
        // solve each (integral-model) row of `from` in the O_F-span of `to`
        let to_rows = to.flat_rows(tower, 0);
        let basis_vecs: Vec<Vec<u128>> = (0..n).map(|i| to_rows.row_vec(i)).collect();
        let zero = Mat::zero(0, cr_f.zdim());
        // pi^{-s_from} rows(from) = A . pi^{-s_to} rows(to), so solve
        // pi^{s_to - s_from} rows(from) against rows(to), scaling before
        // the solve when the exponent is nonnegative and dividing the
        // solution exactly otherwise
        let g = to.shift - from.shift;
        let from_rows = from.flat_rows(tower, g.max(0) as u32);
        let mut amat: AMat = vec![vec![alg.zero(); n]; n];
        for i in 0..n {
            let co = cr_f
                .quotient_coords(&zero, &basis_vecs, &from_rows.row_vec(i))
                .ok_or(ModelError::BadChain("transition is not integral".into()))?;
            for (j, e) in co.into_iter().enumerate() {
                amat[i][j] = e;
            }
        }
        if g < 0 {
            for row in amat.iter_mut() {
                for e in row.iter_mut() {
                    *e = pi_div_exact(alg, &tower.pi, e, (-g) as u32);
                }
            }
        }
        // to coefficient coordinates
        let phi: Vec<Vec<Elem>> = amat
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| of_to_coeff(&self.setting, &self.coeff_idem, &self.coeff_basis, e))
                    .collect()
            })
            .collect();
        let dz = self.cr.zdim();
        let mut m = Mat::zero(dz, dz);
        for i in 0..dz {
            let mut v = vec![0u128; dz];
            v[i] = 1;
            let w = self.cr.act_matrix(&phi, &v);
            for (j, &x) in w.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        Ok(m)
    }

    fn build_transitions(&mut self, tower: &FieldTower) -> Result<(), ModelError> {
        let k = self.chain.members.len();
        let mut trans = Vec::new();
        for j in 0..k - 1 {
            trans.push(self.inclusion_matrix(
                tower,
                &self.chain.members[j + 1],
                &self.chain.members[j],
            )?);
        }
        // wrap: pi . member 0 into member k-1
        let mut pi_first = self.chain.members[0].clone();
        pi_first.shift -= 1;
        trans.push(self.inclusion_matrix(tower, &pi_first, &self.chain.members[k - 1])?);
        self.trans = trans;
        Ok(())
    }

    fn build_pairings(&mut self, tower: &FieldTower) -> Result<(), ModelError> {
        let u = self.unitary.clone().expect("unitary data");
        assert!(tower.e == 1, "unitary models are prepared for unramified F only");
        self.dual_partner = self.chain.dual_structure(tower, &u.tau, &u.gram)?;
        let alg = &tower.alg;
        let t_vec = theta_trace_vec(tower)?;
        let setting = &self.setting;
        let r = &setting.ring.alg;
        let cw = r.ctx_work();
        // closing functional T -> R for the flavor
        let cs = setting.split.omega.ctx_store();
        let phi0_emb = &setting.split.embeddings[self.phi0];
        let close = |x: &Elem| -> Elem {
            // x in T coordinates (f_alg basis (x) ring basis)
            let frank = setting.f_alg.rank;
            let rrank = r.rank;
            let mut out = r.zero();
            for i in 0..frank {
                for jj in 0..rrank {
                    let c = x[i * rrank + jj] % cw.modulus;
                    if c == 0 {
                        continue;
                    }
                    let scalar = if self.flavor.is_absolute() {
                        // tr_{F/K}(theta_F b_i)
                        t_vec[i] % cw.modulus
                    } else {
                        0
                    };
                    if self.flavor.is_absolute() {
                        let term = r.scalar_mul(cw.mul(c, scalar), &r.basis_elem(jj));
                        out = r.add(&out, &term);
                    } else {
                        // tr_{F/F_0}(b_i) mapped through phi_0
                        let tr_rel = alg.add(
                            &alg.basis_elem(i),
                            &u.tau.apply(&alg.basis_elem(i), &alg.ctx_store()),
                        );
                        let img = setting
                            .ring
                            .from_omega
                            .apply(&phi0_emb.apply(&tr_rel, &alg.ctx_store()), &cs);
                        let term = r.scalar_mul(c, &r.mul(&img, &r.basis_elem(jj)));
                        out = r.add(&out, &term);
                    }
                }
            }
            out.iter().map(|&x| x % cw.modulus).collect()
        };
        let tau_t = crate::eisenstein::tensor_hom_left(&u.tau, &setting.f_alg, &setting.ring.alg);
        let t = &setting.tensor;
        let cts = t.ctx_store();
        let mut pairings = Vec::new();
        for (i, m) in self.chain.members.iter().enumerate() {
            let (dj, de) = self.dual_partner[i];
            let dmem = &self.chain.members[dj];
            // W = B_i gram tau(B_d)^T, then divide by pi^{shifts}
            let tb = amat_map(alg, &u.tau, &dmem.basis);
            let tbt: AMat = (0..self.n)
                .map(|r2| (0..self.n).map(|c2| tb[c2][r2].clone()).collect())
                .collect();
            let w = amat_mul(alg, &m.basis, &amat_mul(alg, &u.gram, &tbt));
            // actual pairing of lattice vectors: scale by
            // pi^{-(m.shift + dmem.shift - de... )}: dual member represents
            // pi^{-dmem.shift} basis; values must be integral
            let total_shift = m.shift + dmem.shift - de * 0;
            let _ = de;
            let w: AMat = w
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|e| {
                            if total_shift >= 0 {
                                pi_div_exact(alg, &tower.pi, e, total_shift as u32)
                            } else {
                                let mut x = e.clone();
                                for _ in 0..(-total_shift) {
                                    x = alg.mul(&x, &tower.pi);
                                }
                                x
                            }
                        })
                        .collect()
                })
                .collect();
            // flat pairing values on coefficient coordinates
            let dz = self.cr.zdim();
            let crank = self.coeff.rank;
            let mut vals = vec![vec![r.zero(); dz]; dz];
            for c1 in 0..self.n {
                for t1 in 0..crank {
                    let x_t = lift_coeff(self, t1);
                    let i1 = c1 * crank + t1;
                    for c2 in 0..self.n {
                        for t2 in 0..crank {
                            let y_t = lift_coeff(self, t2);
                            let i2 = c2 * crank + t2;
                            let w_t = setting
                                .f_alg
                                .tensor_left(&w[c1][c2], &setting.ring.alg);
                            let prod = t.mul(&t.mul(&x_t, &tau_t.apply(&y_t, &cts)), &w_t);
                            vals[i1][i2] = close(&prod);
                        }
                    }
                }
            }
            pairings.push(vals);
        }
        self.pairing = pairings;
        Ok(())
    }

    /// Whether two submodules at chain positions i and dual_partner(i) are
    /// orthogonal.
    fn orthogonal(&self, i: usize, f1: &Mat, f2: &Mat) -> bool {
        let r = &self.setting.ring.alg;
        let vals = &self.pairing[i];
        for a in 0..f1.rows {
            let va = f1.row_vec(a);
            for b2 in 0..f2.rows {
                let vb = f2.row_vec(b2);
                let mut acc = r.zero();
                for (x, &cx) in va.iter().enumerate() {
                    if cx == 0 {
                        continue;
                    }
                    for (y, &cy) in vb.iter().enumerate() {
                        if cy == 0 {
                            continue;
                        }
                        let c = self.cr.ctx.mul(cx, cy);
                        acc = r.add(&acc, &r.scalar_mul(c, &vals[x][y]));
                    }
                }
                if !r.is_zero_work(&acc) {
                    return false;
                }
            }
        }
        true
    }
}

fn lift_coeff(ctx: &ModelCtx, t_idx: usize) -> Elem {
    // coefficient basis element as an element of T
    ctx.coeff_basis.row_vec(t_idx)
}

fn conj_of_embedding(setting: &Setting, tau: &AlgHom, j: usize) -> usize {
    let perm = crate::tower::embedding_precompose_perm(&setting.tower, &setting.split, tau)
        .expect("conjugation permutes embeddings");
    perm[j]
}

/// A model point: one canonical Howell basis per chain member.
pub type ModelPoint = Vec<Mat>;

/// All candidate submodules at one chain member: O_F-stable R-free
/// summands of the required total rank, assembled factor by factor and
/// filtered by the flavor's per-member conditions.
fn member_candidates(ctx: &ModelCtx, member: usize) -> Result<Vec<Mat>, ModelError> {
    let cr = &ctx.cr;
    let r = &ctx.setting.ring.alg;
    let coeff = &ctx.coeff;
    let idems = coeff
        .idempotents()
        .map_err(|e| ModelError::BadChain(format!("{e}")))?;
    // factor data: R-basis of each factor submodule of coeff^n
    struct FactorData {
        per_rank: Vec<Vec<Mat>>, // spans by rank
    }
    let mut factors = Vec::new();
    for e in &idems {
        // factor module: span of e . standard basis
        let mut rows = Mat::zero(0, cr.zdim());
        for i in 0..cr.zdim() {
            let mut v = vec![0u128; cr.zdim()];
            v[i] = 1;
            rows.push_row(&cr.act(e, &v));
        }
        let fm = cr.r_span(&rows);
        let vecs = cr
            .quotient_basis(&fm, &Mat::zero(0, cr.zdim()))
            .expect("factor module is R-free");
        let m_psi = vecs.len();
        let mut per_rank: Vec<Vec<Mat>> = vec![Vec::new(); m_psi + 1];
        for k in 0..=m_psi {
            for cand in enumerate_free_summands(r, m_psi, k) {
                // map block rows into ambient coordinates
                let mut amb = Mat::zero(0, cr.zdim());
                for row_i in 0..cand.rows {
                    let mut v = vec![0u128; cr.zdim()];
                    for (b, base) in vecs.iter().enumerate() {
                        let re: Elem = (0..r.rank)
                            .map(|t| cand[(row_i, b * r.rank + t)])
                            .collect();
                        if re.iter().all(|&x| x == 0) {
                            continue;
                        }
                        // act by 1 (x) re on the basis vector
                        let re_t = ctx
                            .setting
                            .f_alg
                            .tensor_right(&re, &ctx.setting.ring.alg);
                        let re_c = ctx.setting.tensor.project_to_factor(
                            &re_t,
                            &ctx.coeff_idem,
                            &ctx.coeff_basis,
                        );
                        let contrib = cr.act(&re_c, base);
                        for (ix, &x) in contrib.iter().enumerate() {
                            v[ix] = cr.ctx.add(v[ix], x);
                        }
                    }
                    amb.push_row(&v);
                }
                let span = cr.r_span(&amb);
                // O_F-stability factorwise
                let stable = (0..span.rows).all(|i2| {
                    linalg::contains_vector(
                        &span,
                        &cr.act(&ctx.zeta_c, &span.row_vec(i2)),
                        &cr.ctx,
                    )
                });
                if stable {
                    per_rank[k].push(span);
                }
            }
        }
        let _ = vecs;
        factors.push(FactorData { per_rank });
    }
    // assemble tuples of factor choices with total rank = quot_rank...
    // note: quot_rank is the rank of F itself
    let target = ctx.quot_rank as usize;
    let mut result = Vec::new();
    fn rec(
        ctx: &ModelCtx,
        factors: &[FactorData],
        idx: usize,
        remaining: usize,
        acc: &Mat,
        result: &mut Vec<Mat>,
        member: usize,
    ) {
        if idx == factors.len() {
            if remaining == 0 {
                let span = linalg::howell(acc, &ctx.cr.ctx);
                if member_conditions(ctx, member, &span) {
                    result.push(span);
                }
            }
            return;
        }
        let max_rest: usize = factors[idx + 1..]
            .iter()
            .map(|f| f.per_rank.len() - 1)
            .sum();
        for k in 0..factors[idx].per_rank.len() {
            if k > remaining || remaining - k > max_rest {
                continue;
            }
            for cand in &factors[idx].per_rank[k] {
                let acc2 = acc.clone().vcat(cand);
                rec(ctx, factors, idx + 1, remaining - k, &acc2, result, member);
            }
        }
    }
    let empty = Mat::zero(0, cr.zdim());
    rec(ctx, &factors, 0, target, &empty, &mut result, member);
    // canonical order
    result.sort_by_key(|m| format!("{m:?}"));
    result.dedup();
    Ok(result)
}

/// Per-member conditions beyond rank and stability: strictness sandwich
/// for absolute flavors, Kottwitz for unitary flavors.
fn member_conditions(ctx: &ModelCtx, member: usize, f: &Mat) -> bool {
    let cr = &ctx.cr;
    if ctx.flavor.is_absolute() {
        let e_a = tensor_to_coeff(ctx, &ctx.setting.eis_elem(&ctx.a));
        let e_b = tensor_to_coeff(ctx, &ctx.setting.eis_elem(&ctx.b));
        let amb = cr.full_module();
        let jam = ideal_times_c(ctx, &e_a, &amb);
        let jbm = ideal_times_c(ctx, &e_b, &amb);
        if !linalg::span_contained(&jbm, f, &cr.ctx) || !linalg::span_contained(f, &jam, &cr.ctx) {
            return false;
        }
    }
    if ctx.flavor.is_unitary() && !kottwitz_check(ctx, member, f) {
        return false;
    }
    true
}

fn tensor_to_coeff(ctx: &ModelCtx, x: &Elem) -> Elem {
    ctx.setting
        .tensor
        .project_to_factor(x, &ctx.coeff_idem, &ctx.coeff_basis)
}

fn ideal_times_c(ctx: &ModelCtx, e: &Elem, ambient: &Mat) -> Mat {
    let cr = &ctx.cr;
    let mut rows = Mat::zero(0, cr.zdim());
    for i in 0..ambient.rows {
        rows.push_row(&cr.act(e, &ambient.row_vec(i)));
    }
    cr.t_span(&rows)
}

/// The Kottwitz condition at one member: the characteristic polynomial of
/// a (x) 1 on the rank-n free quotient piece equals
/// (T - phi_0(a))^r (T - phi_0(a-bar))^s, for a = zeta and a = the
/// Teichmuller generator.
pub fn kottwitz_check(ctx: &ModelCtx, _member: usize, f: &Mat) -> bool {
    let u = match &ctx.unitary {
        Some(u) => u,
        None => return true,
    };
    let cr = &ctx.cr;
    let r = &ctx.setting.ring.alg;
    let tower = &ctx.setting.tower;
    let amb = cr.full_module();
    // the quotient piece: L = M/F for the relative flavor, e_A . L for the
    // absolute one, realized as (e_A M + F)/F
    let (big, small) = if ctx.flavor.is_absolute() {
        let e_a = tensor_to_coeff(ctx, &ctx.setting.eis_elem(&ctx.a));
        let eam = ideal_times_c(ctx, &e_a, &amb);
        (cr.sum(&eam, f), f.clone())
    } else {
        (amb.clone(), f.clone())
    };
    let basis = match cr.quotient_basis(&big, &small) {
        Some(b) if b.len() == ctx.n => b,
        _ => return false,
    };
    let cs = tower.ctx_store();
    let samples = [tower.zeta.clone(), tower.mu.clone()];
    for a in &samples {
        let a_c = of_to_coeff(&ctx.setting, &ctx.coeff_idem, &ctx.coeff_basis, a);
        let mut op: Vec<Vec<Elem>> = Vec::new();
        for bv in &basis {
            match cr.quotient_coords(&small, &basis, &cr.act(&a_c, bv)) {
                Some(co) => op.push(co),
                None => return false,
            }
        }
        let chp = char_poly_r(r, &op);
        // target
        let abar = u.tau.apply(a, &cs);
        let emb = &ctx.setting.split.embeddings[ctx.phi0];
        let om_cs = ctx.setting.split.omega.ctx_store();
        let c1 = ctx.setting.ring.from_omega.apply(&emb.apply(a, &cs), &om_cs);
        let c2 = ctx
            .setting
            .ring
            .from_omega
            .apply(&emb.apply(&abar, &cs), &om_cs);
        let mut target = vec![r.one.clone()];
        for _ in 0..u.r {
            target = rpoly_mul_linear(r, &target, &c1);
        }
        for _ in 0..u.s {
            target = rpoly_mul_linear(r, &target, &c2);
        }
        if chp.len() != target.len() {
            return false;
        }
        for (x, y) in chp.iter().zip(target.iter()) {
            if !r.eq_work(x, y) {
                return false;
            }
        }
    }
    true
}

/// multiply an R[T] polynomial by (T - c)
fn rpoly_mul_linear(r: &Algebra, p: &[Elem], c: &Elem) -> Vec<Elem> {
    let mut out = vec![r.zero(); p.len() + 1];
    for (i, e) in p.iter().enumerate() {
        out[i + 1] = r.add(&out[i + 1], e);
        out[i] = r.sub(&out[i], &r.mul(e, c));
    }
    out
}

/// char(T) = det(T I - Op) for a matrix with R entries, by cofactor
/// expansion over R[T]. Coefficients low-to-high.
pub fn char_poly_r(r: &Algebra, op: &[Vec<Elem>]) -> Vec<Elem> {
    let n = op.len();
    // entries as polynomials
    let entries: Vec<Vec<Vec<Elem>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        vec![r.neg(&op[i][j]), r.one.clone()]
                    } else {
                        vec![r.neg(&op[i][j])]
                    }
                })
                .collect()
        })
        .collect();
    let idx: Vec<usize> = (0..n).collect();
    rpoly_det(r, &entries, &idx, &idx)
}

fn rpoly_det(r: &Algebra, e: &[Vec<Vec<Elem>>], rows: &[usize], cols: &[usize]) -> Vec<Elem> {
    if rows.is_empty() {
        return vec![r.one.clone()];
    }
    let mut det = vec![r.zero()];
    let i = rows[0];
    let rest: Vec<usize> = rows[1..].to_vec();
    for (pos, &j) in cols.iter().enumerate() {
        let mut sub = cols.to_vec();
        sub.remove(pos);
        let minor = rpoly_det(r, e, &rest, &sub);
        let mut term = rpoly_mul(r, &e[i][j], &minor);
        if pos % 2 == 1 {
            term = term.iter().map(|x| r.neg(x)).collect();
        }
        det = rpoly_add(r, &det, &term);
    }
    det
}

fn rpoly_mul(r: &Algebra, a: &[Elem], b: &[Elem]) -> Vec<Elem> {
    let mut out = vec![r.zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = r.add(&out[i + j], &r.mul(x, y));
        }
    }
    out
}

fn rpoly_add(r: &Algebra, a: &[Elem], b: &[Elem]) -> Vec<Elem> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(|| r.zero());
            let y = b.get(i).cloned().unwrap_or_else(|| r.zero());
            r.add(&x, &y)
        })
        .collect()
}

/// Exhaustive, canonically ordered point enumeration.
pub fn enumerate_model(ctx: &ModelCtx, cap: u64) -> Result<Vec<ModelPoint>, ModelError> {
    let k = ctx.chain.members.len();
    let mut cands: Vec<Vec<Mat>> = Vec::new();
    for member in 0..k {
        cands.push(member_candidates(ctx, member)?);
    }
    let mut estimate: u64 = 1;
    for c in &cands {
        estimate = estimate.saturating_mul(c.len().max(1) as u64);
        if estimate > cap {
            return Err(ModelError::BudgetExceeded(estimate));
        }
    }
    // tree search with transition pruning
    let mut out = Vec::new();
    let mut current: Vec<Mat> = Vec::new();
    search(ctx, &cands, 0, &mut current, &mut out);
    Ok(out)
}

fn map_span(ctx: &ModelCtx, f: &Mat, m: &Mat) -> Mat {
    let mapped = f.mul(m, &ctx.cr.ctx);
    linalg::howell(&mapped, &ctx.cr.ctx)
}

fn search(
    ctx: &ModelCtx,
    cands: &[Vec<Mat>],
    pos: usize,
    current: &mut Vec<Mat>,
    out: &mut Vec<ModelPoint>,
) {
    let k = cands.len();
    if pos == k {
        // wrap condition: pi-map sends F_0 into F_{k-1}
        let wrapped = map_span(ctx, &current[0], &ctx.trans[k - 1]);
        if !linalg::span_contained(&wrapped, &current[k - 1], &ctx.cr.ctx) {
            return;
        }
        // full orthogonality for unitary flavors
        if ctx.flavor.is_unitary() {
            for i in 0..k {
                let (dj, _) = ctx.dual_partner[i];
                if !ctx.orthogonal(i, &current[i], &current[dj]) {
                    return;
                }
            }
        }
        out.push(current.clone());
        return;
    }
    for cand in &cands[pos] {
        // transition: member pos -> member pos-1
        if pos > 0 {
            let img = map_span(ctx, cand, &ctx.trans[pos - 1]);
            if !linalg::span_contained(&img, &current[pos - 1], &ctx.cr.ctx) {
                continue;
            }
        }
        current.push(cand.clone());
        search(ctx, cands, pos + 1, current, out);
        current.pop();
    }
}

/// Independent re-enumeration for cross-checking: conditions applied in
/// the reverse member order.
pub fn enumerate_model_reversed(ctx: &ModelCtx, cap: u64) -> Result<Vec<ModelPoint>, ModelError> {
    let k = ctx.chain.members.len();
    let mut cands: Vec<Vec<Mat>> = Vec::new();
    for member in 0..k {
        cands.push(member_candidates(ctx, member)?);
    }
    let mut estimate: u64 = 1;
    for c in &cands {
        estimate = estimate.saturating_mul(c.len().max(1) as u64);
        if estimate > cap {
            return Err(ModelError::BudgetExceeded(estimate));
        }
    }
    let mut out = Vec::new();
    // plain cross product, filters at the end, reversed order
    let mut idxs = vec![0usize; k];
    'outer: loop {
        let tuple: Vec<Mat> = (0..k).map(|i| cands[i][idxs[i]].clone()).collect();
        let mut ok = true;
        // wrap first
        let wrapped = map_span(ctx, &tuple[0], &ctx.trans[k - 1]);
        if !linalg::span_contained(&wrapped, &tuple[k - 1], &ctx.cr.ctx) {
            ok = false;
        }
        if ok {
            for pos in (1..k).rev() {
                let img = map_span(ctx, &tuple[pos], &ctx.trans[pos - 1]);
                if !linalg::span_contained(&img, &tuple[pos - 1], &ctx.cr.ctx) {
                    ok = false;
                    break;
                }
            }
        }
        if ok && ctx.flavor.is_unitary() {
            for i in (0..k).rev() {
                let (dj, _) = ctx.dual_partner[i];
                if !ctx.orthogonal(i, &tuple[i], &tuple[dj]) {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            out.push(tuple);
        }
        // increment
        for i in (0..k).rev() {
            idxs[i] += 1;
            if idxs[i] < cands[i].len() {
                continue 'outer;
            }
            idxs[i] = 0;
            if i == 0 {
                break 'outer;
            }
        }
    }
    Ok(out)
}

/// The comparison map on a single member: F (absolute coordinates) to
/// e_A^{-1}(F) followed by the projection onto the relative coefficient
/// factors.
pub fn compare_map_member(abs_ctx: &ModelCtx, rel_ctx: &ModelCtx, f: &Mat) -> Mat {
    let cr_abs = &abs_ctx.cr;
    let e_a = tensor_to_coeff(abs_ctx, &abs_ctx.setting.eis_elem(&abs_ctx.a));
    // preimage of F under multiplication by e_A in T^n
    let dz = cr_abs.zdim();
    let mut act = Mat::zero(dz, dz);
    for i in 0..dz {
        let mut v = vec![0u128; dz];
        v[i] = 1;
        let w = cr_abs.act(&e_a, &v);
        for (j, &x) in w.iter().enumerate() {
            act[(i, j)] = x;
        }
    }
    let pre = linalg::preimage(&act, f, &cr_abs.ctx);
    // projection matrix: abs coords (T^n) -> rel coords (coeff_rel^n)
    let t = &abs_ctx.setting.tensor;
    let crank_abs = abs_ctx.coeff.rank;
    let crank_rel = rel_ctx.coeff.rank;
    let dz_rel = rel_ctx.cr.zdim();
    let mut proj = Mat::zero(dz, dz_rel);
    for c in 0..abs_ctx.n {
        for tix in 0..crank_abs {
            // abs coeff basis element tix in T coords, projected to rel
            let in_t = abs_ctx.coeff_basis.row_vec(tix);
            let img = t.project_to_factor(&in_t, &rel_ctx.coeff_idem, &rel_ctx.coeff_basis);
            for (j, &x) in img.iter().enumerate() {
                proj[(c * crank_abs + tix, c * crank_rel + j)] =
                    x % rel_ctx.cr.ctx.modulus;
            }
        }
    }
    let mapped = pre.mul(&proj, &rel_ctx.cr.ctx);
    linalg::howell(&mapped, &rel_ctx.cr.ctx)
}

/// Certificate that the comparison map is a bijection between the point
/// lists: the matching, as rel-index per abs-point.
pub fn compare_models(
    abs_ctx: &ModelCtx,
    rel_ctx: &ModelCtx,
    abs_points: &[ModelPoint],
    rel_points: &[ModelPoint],
) -> Result<Vec<usize>, ModelError> {
    if abs_points.len() != rel_points.len() {
        return Err(ModelError::NotBijective(format!(
            "counts differ: {} absolute vs {} relative",
            abs_points.len(),
            rel_points.len()
        )));
    }
    let mut matching = Vec::new();
    let mut hit = vec![false; rel_points.len()];
    for (ai, ap) in abs_points.iter().enumerate() {
        let image: ModelPoint = ap
            .iter()
            .map(|f| compare_map_member(abs_ctx, rel_ctx, f))
            .collect();
        let pos = rel_points.iter().position(|rp| *rp == image);
        match pos {
            Some(j) if !hit[j] => {
                hit[j] = true;
                matching.push(j);
            }
            Some(j) => {
                return Err(ModelError::NotBijective(format!(
                    "absolute points {ai} and an earlier one both map to relative point {j}"
                )))
            }
            None => {
                return Err(ModelError::NotBijective(format!(
                    "image of absolute point {ai} is not a relative point"
                )))
            }
        }
    }
    Ok(matching)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eisenstein::TestRing;
    use crate::tower::{make_field_tower, split, tower_automorphism};

    fn quad_tower() -> (FieldTower, crate::tower::SplittingData) {
        let t = make_field_tower(3, 2, 1, &[], 6).unwrap();
        let s = split(&t).unwrap();
        (t, s)
    }

    #[test]
    fn dual_of_unimodular_gram_is_self() {
        let (t, _s) = quad_tower();
        let tau = tower_automorphism(&t, 1).unwrap();
        let n = 2;
        let gram: AMat = vec![
            vec![t.alg.one.clone(), t.alg.zero()],
            vec![t.alg.zero(), t.alg.one.clone()],
        ];
        let lat = Lattice::standard(&t, n);
        let dual = dual_lattice(&t, &tau, &gram, &lat).unwrap();
        let cr_f = f_coeff_ring(&t, n);
        assert!(lattice_eq(&t, &cr_f, &lat, &dual));
        // double dual
        let dd = dual_lattice(&t, &tau, &gram, &dual).unwrap();
        assert!(lattice_eq(&t, &cr_f, &lat, &dd));
    }

    #[test]
    fn vertex_lattice_of_type_one() {
        let (t, _s) = quad_tower();
        let tau = tower_automorphism(&t, 1).unwrap();
        let n = 2;
        let gram: AMat = vec![
            vec![t.alg.one.clone(), t.alg.zero()],
            vec![t.alg.zero(), t.alg.from_int(3)],
        ];
        let lat = Lattice::standard(&t, n);
        let dual = dual_lattice(&t, &tau, &gram, &lat).unwrap();
        let cr_f = f_coeff_ring(&t, n);
        assert!(lattice_contains(&t, &cr_f, &dual, &lat));
        // [dual : lat] = q_F = 9
        let idx = lattice_index_log(&t, &cr_f, &dual, &lat);
        assert_eq!(idx, 2);
        // double dual on a random-ish gram
        let gram2: AMat = vec![
            vec![t.alg.from_int(2), t.mu.clone()],
            vec![tau.apply(&t.mu, &t.ctx_store()), t.alg.from_int(1)],
        ];
        let d2 = dual_lattice(&t, &tau, &gram2, &lat).unwrap();
        let dd = dual_lattice(&t, &tau, &gram2, &d2).unwrap();
        assert!(lattice_eq(&t, &cr_f, &lat, &dd));
    }

    #[test]
    fn chain_validation_rejects_garbage() {
        let (t, _s) = quad_tower();
        let l0 = Lattice::standard(&t, 2);
        // duplicate member
        assert!(LatticeChain::new(&t, vec![l0.clone(), l0.clone()]).is_err());
        // valid Iwahori chain: O + O > O + pi O
        let mut l1 = Lattice::standard(&t, 2);
        l1.basis[1][1] = t.alg.from_int(3);
        let chain = LatticeChain::new(&t, vec![l0.clone(), l1]).unwrap();
        assert_eq!(chain.members.len(), 2);
    }

    fn standard_model_ctx(
        flavor: Flavor,
        n: usize,
        d: usize,
        full_chain: bool,
    ) -> ModelCtx {
        let (t, s) = quad_tower();
        let ring = TestRing::residue(&s);
        let setting = Setting::new(t.clone(), s, ring);
        // identity embedding as phi_0
        let cs = setting.split.omega.ctx_store();
        let phi0 = (0..setting.split.roots.len())
            .find(|&j| setting.split.omega.eq_work(&setting.split.roots[j], &{
                // identity root: phi(zeta) = zeta under F = Omega
                setting.tower.zeta.clone()
            }))
            .unwrap();
        let _ = cs;
        let a: Vec<usize> = (0..setting.split.roots.len())
            .filter(|&j| j != phi0)
            .collect();
        let l0 = Lattice::standard(&t, n);
        let members = if full_chain {
            let mut v = vec![l0.clone()];
            for i in 1..n {
                let mut li = Lattice::standard(&t, n);
                for j in 0..i {
                    li.basis[j][j] = t.alg.mul(&li.basis[j][j], &t.pi);
                }
                v.push(li);
            }
            v
        } else {
            vec![l0]
        };
        let chain = LatticeChain::new(&t, members).unwrap();
        let a_used: Vec<usize> = if flavor.is_absolute() { a } else { vec![] };
        ModelCtx::new(setting, flavor, n, d, &a_used, phi0, chain, None).unwrap()
    }

    #[test]
    fn extreme_signatures_are_singletons() {
        for d in [0, 2] {
            let ctx = standard_model_ctx(Flavor::RelativeStandard, 2, d, true);
            let pts = enumerate_model(&ctx, 1_000_000).unwrap();
            assert_eq!(pts.len(), 1, "d = {d} must give a single point");
        }
        // absolute banal cases
        for d in [0, 2] {
            let ctx = standard_model_ctx(Flavor::AbsoluteStandard, 2, d, true);
            let pts = enumerate_model(&ctx, 1_000_000).unwrap();
            assert_eq!(pts.len(), 1);
        }
    }

    #[test]
    fn relative_enumeration_matches_reversed_filter_order() {
        let ctx = standard_model_ctx(Flavor::RelativeStandard, 2, 1, true);
        let pts = enumerate_model(&ctx, 1_000_000).unwrap();
        let pts2 = enumerate_model_reversed(&ctx, 1_000_000).unwrap();
        let s1: std::collections::BTreeSet<String> =
            pts.iter().map(|p| format!("{p:?}")).collect();
        let s2: std::collections::BTreeSet<String> =
            pts2.iter().map(|p| format!("{p:?}")).collect();
        assert_eq!(s1, s2);
        assert!(!pts.is_empty());
        // determinism
        let pts3 = enumerate_model(&ctx, 1_000_000).unwrap();
        assert_eq!(format!("{pts:?}"), format!("{pts3:?}"));
    }

    fn unitary_ctx(gram_diag: &[i64], members_dual_first: bool) -> ModelCtx {
        let (t, s) = quad_tower();
        let tau = tower_automorphism(&t, 1).unwrap();
        let ring = TestRing::residue(&s);
        let setting = Setting::new(t.clone(), s, ring);
        let phi0 = (0..setting.split.roots.len())
            .find(|&j| {
                setting
                    .split
                    .omega
                    .eq_work(&setting.split.roots[j], &setting.tower.zeta)
            })
            .unwrap();
        let n = gram_diag.len();
        let mut gram: AMat = vec![vec![t.alg.zero(); n]; n];
        for (i, &g) in gram_diag.iter().enumerate() {
            gram[i][i] = t.alg.from_int(g);
        }
        let lat = Lattice::standard(&t, n);
        let members = if members_dual_first {
            let dual = dual_lattice(&t, &tau, &gram, &lat).unwrap();
            vec![dual, lat]
        } else {
            vec![lat]
        };
        let chain = LatticeChain::new(&t, members).unwrap();
        let u = UnitaryData {
            tau,
            gram,
            r: 1,
            s: n - 1,
        };
        ModelCtx::new(
            setting,
            Flavor::NaiveUnitaryRelative,
            n,
            0,
            &[],
            phi0,
            chain,
            Some(u),
        )
        .unwrap()
    }

    #[test]
    fn self_dual_unitary_surface_has_q_plus_one_points() {
        let ctx = unitary_ctx(&[1, 1], false);
        let pts = enumerate_model(&ctx, 1_000_000).unwrap();
        assert_eq!(pts.len(), 10);
        let pts2 = enumerate_model_reversed(&ctx, 1_000_000).unwrap();
        assert_eq!(pts.len(), pts2.len());
    }

    #[test]
    fn pi_modular_unitary_chain_enumerates() {
        let ctx = unitary_ctx(&[1, 3], true);
        assert_eq!(ctx.dual_partner, vec![(1, 0), (0, 0)]);
        let pts = enumerate_model(&ctx, 1_000_000).unwrap();
        assert!(!pts.is_empty());
        let pts2 = enumerate_model_reversed(&ctx, 1_000_000).unwrap();
        let s1: std::collections::BTreeSet<String> =
            pts.iter().map(|p| format!("{p:?}")).collect();
        let s2: std::collections::BTreeSet<String> =
            pts2.iter().map(|p| format!("{p:?}")).collect();
        assert_eq!(s1, s2);
    }

    #[test]
    fn absolute_and_relative_standard_models_match() {
        let abs_ctx = standard_model_ctx(Flavor::AbsoluteStandard, 2, 1, true);
        let rel_ctx = standard_model_ctx(Flavor::RelativeStandard, 2, 1, true);
        let abs_pts = enumerate_model(&abs_ctx, 1_000_000).unwrap();
        let rel_pts = enumerate_model(&rel_ctx, 1_000_000).unwrap();
        assert!(!abs_pts.is_empty());
        let matching = compare_models(&abs_ctx, &rel_ctx, &abs_pts, &rel_pts).unwrap();
        assert_eq!(matching.len(), abs_pts.len());
    }
}
