use std::ops::Range;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instances::{gaussian_matrix, random_orthogonal, Rng64};
use crate::lowner::SubBlock;
use crate::projpsd::{kernel_sum, nsd_part, proj_dir2_spec, psd_part, Dir2Options};
use crate::scalarfun::g2_max;
use crate::spectral::{block, set_block, Spectral};
use crate::symmat::{pair_norm, SymMat};

use super::membership::{group_parts, tangent_test, violation, CCPair, MembershipReport, Verdict};

/// Coordinates a block rule is expressed in: the eigenbasis `P` of `Z`, or
/// the eigenbasis `Q` of `H̃_ββ` inside the zero cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Basis {
    Outer,
    Inner,
}

#[derive(Clone, Debug)]
pub enum BlockKind {
    /// `S̃` block prescribed, `T̃` block free.
    FixedS(DMatrix<f64>),
    /// `T̃` block prescribed, `S̃` block free.
    FixedT(DMatrix<f64>),
    /// `a ∘ S̃ + b ∘ T̃ = rhs` entrywise.
    Coupled {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        rhs: DMatrix<f64>,
    },
    /// `(Ŝ − s_shift, T̂ − t_shift) ∈ Ω`.
    ShiftedOmega {
        s_shift: DMatrix<f64>,
        t_shift: DMatrix<f64>,
    },
}

impl BlockKind {
    pub fn name(&self) -> &'static str {
        match self {
            BlockKind::FixedS(_) => "fixed-S",
            BlockKind::FixedT(_) => "fixed-T",
            BlockKind::Coupled { .. } => "coupled",
            BlockKind::ShiftedOmega { .. } => "shifted-Ω",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockRule {
    pub basis: Basis,
    pub rows: Range<usize>,
    pub cols: Range<usize>,
    pub label: String,
    pub kind: BlockKind,
}

impl BlockRule {
    pub fn is_diagonal(&self) -> bool {
        self.rows == self.cols
    }

    /// Multiplicity of the block in a trace inner product.
    pub fn weight(&self) -> f64 {
        if self.is_diagonal() {
            1.0
        } else {
            2.0
        }
    }
}

/// Block-structural description of `T²_Ω((X, Y); (F, G))`.
///
/// Every block `(a_k, a_l)`, `k ≤ l`, of `(S̃, T̃) = (PᵀSP, PᵀTP)` outside the
/// zero cluster carries one rule. The zero-cluster block is described in the
/// basis `Q` of `H̃_ββ = Q Diag(η) Qᵀ`, split by the signs of `η` into
/// `α', β', γ'`, with shifts `Δ⁺ = 2 Qᵀ H̃_{β a} Diag(1/μ_j)_{j<r0} H̃_{a β} Q`
/// and `Δ⁻` the same sum over `j > r0`.
#[derive(Clone, Debug)]
pub struct Tangent2Data {
    spec: Spectral,
    htil: DMatrix<f64>,
    inner: Option<SubBlock>,
    delta_plus: DMatrix<f64>,
    delta_minus: DMatrix<f64>,
    sigma: DMatrix<f64>,
    rules: Vec<BlockRule>,
    h_norm: f64,
    warnings: Vec<String>,
}

/// Rotated coordinates of a candidate pair.
#[derive(Clone, Debug)]
pub struct Coords {
    pub s: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub s_hat: DMatrix<f64>,
    pub t_hat: DMatrix<f64>,
}

impl Coords {
    pub(crate) fn zeros(n: usize, b: usize) -> Self {
        Coords {
            s: DMatrix::zeros(n, n),
            t: DMatrix::zeros(n, n),
            s_hat: DMatrix::zeros(b, b),
            t_hat: DMatrix::zeros(b, b),
        }
    }

    /// The `S` and `T` blocks a rule refers to.
    pub fn blocks(&self, rule: &BlockRule) -> (DMatrix<f64>, DMatrix<f64>) {
        let (s, t) = match rule.basis {
            Basis::Outer => (&self.s, &self.t),
            Basis::Inner => (&self.s_hat, &self.t_hat),
        };
        (
            block(s, rule.rows.clone(), rule.cols.clone()),
            block(t, rule.rows.clone(), rule.cols.clone()),
        )
    }

    pub(crate) fn set(&mut self, rule: &BlockRule, sb: &DMatrix<f64>, tb: &DMatrix<f64>) {
        let (s, t) = match rule.basis {
            Basis::Outer => (&mut self.s, &mut self.t),
            Basis::Inner => (&mut self.s_hat, &mut self.t_hat),
        };
        set_block(s, rule.rows.clone(), rule.cols.clone(), sb);
        set_block(t, rule.rows.clone(), rule.cols.clone(), tb);
        if !rule.is_diagonal() {
            set_block(s, rule.cols.clone(), rule.rows.clone(), &sb.transpose());
            set_block(t, rule.cols.clone(), rule.rows.clone(), &tb.transpose());
        }
    }
}

fn hadamard(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.component_mul(b)
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

impl Tangent2Data {
    fn build(base: &CCPair, h: &SymMat) -> Result<Self> {
        let spec = base.spec().clone();
        let htil = spec.rotate(h);
        let cl = spec.clusters().to_vec();
        let r0 = spec.r0();
        let mut rules = Vec::new();
        let mut warnings = spec.warnings().to_vec();

        for k in 0..cl.len() {
            if cl[k].is_empty() {
                continue;
            }
            let mk = cl[k].value;
            let rk = cl[k].range();
            if k != r0 {
                let kind = if k < r0 {
                    BlockKind::FixedT(sym(kernel_sum(&spec, &htil, k, k, |j, mj| {
                        if j > r0 {
                            2.0 * mj / ((mj - mk) * (mj - mk))
                        } else {
                            0.0
                        }
                    })))
                } else {
                    BlockKind::FixedS(sym(kernel_sum(&spec, &htil, k, k, |j, mj| {
                        if j < r0 {
                            2.0 * mj / ((mj - mk) * (mj - mk))
                        } else {
                            0.0
                        }
                    })))
                };
                rules.push(BlockRule {
                    basis: Basis::Outer,
                    rows: rk.clone(),
                    cols: rk.clone(),
                    label: format!("a{k}a{k}"),
                    kind,
                });
            }
            for l in k + 1..cl.len() {
                if cl[l].is_empty() {
                    continue;
                }
                let ml = cl[l].value;
                let rl = cl[l].range();
                let hkl = block(&htil, rk.clone(), rl.clone());
                let kind = if l < r0 {
                    BlockKind::FixedT(-kernel_sum(&spec, &htil, k, l, |j, mj| {
                        if j > r0 {
                            2.0 * mj / ((mk - mj) * (mj - ml))
                        } else {
                            0.0
                        }
                    }))
                } else if l == r0 {
                    let hll = block(&htil, rl.clone(), rl.clone());
                    let v = kernel_sum(&spec, &htil, k, l, |j, mj| if j > r0 { 2.0 / (mk - mj) } else { 0.0 })
                        + &hkl * nsd_part(&hll)? * (2.0 / mk);
                    BlockKind::FixedT(-v)
                } else if k == r0 {
                    let hkk = block(&htil, rk.clone(), rk.clone());
                    let v = kernel_sum(&spec, &htil, k, l, |j, mj| if j < r0 { 2.0 / (mj - ml) } else { 0.0 })
                        - psd_part(&hkk)? * &hkl * (2.0 / ml);
                    BlockKind::FixedS(v)
                } else if k > r0 {
                    BlockKind::FixedS(kernel_sum(&spec, &htil, k, l, |j, mj| {
                        if j < r0 {
                            2.0 * mj / ((mj - mk) * (mj - ml))
                        } else {
                            0.0
                        }
                    }))
                } else {
                    let hkk = block(&htil, rk.clone(), rk.clone());
                    let (p, q) = (cl[k].len, cl[l].len);
                    let rhs = kernel_sum(&spec, &htil, k, l, |_, mj| 2.0 * g2_max(mk, mj, ml))
                        + hkk * &hkl * (2.0 / (mk - ml));
                    BlockKind::Coupled {
                        a: DMatrix::from_element(p, q, -ml / (mk - ml)),
                        b: DMatrix::from_element(p, q, -mk / (mk - ml)),
                        rhs,
                    }
                };
                rules.push(BlockRule {
                    basis: Basis::Outer,
                    rows: rk.clone(),
                    cols: rl,
                    label: format!("a{k}a{l}"),
                    kind,
                });
            }
        }

        let rb = spec.beta();
        let (inner, delta_plus, delta_minus, sigma) = if rb.is_empty() {
            (None, DMatrix::zeros(0, 0), DMatrix::zeros(0, 0), DMatrix::zeros(0, 0))
        } else {
            let sub = SubBlock::new(&block(&htil, rb.clone(), rb.clone()))?;
            warnings.extend(sub.spec.warnings().iter().map(|w| format!("zero-cluster block: {w}")));
            let q = sub.q().clone();
            let dp = kernel_sum(&spec, &htil, r0, r0, |j, mj| if j < r0 { 2.0 / mj } else { 0.0 });
            let dm = kernel_sum(&spec, &htil, r0, r0, |j, mj| if j > r0 { 2.0 / mj } else { 0.0 });
            let dp = sym(q.transpose() * dp * &q);
            let dm = sym(q.transpose() * dm * &q);
            let (al, be, ga) = (sub.spec.alpha(), sub.spec.beta(), sub.spec.gamma());
            let eta = sub.spec.snapped();
            let sig = DMatrix::from_fn(al.len(), ga.len(), |i, j| {
                let (a, c) = (eta[al.start + i], eta[ga.start + j]);
                a / (a - c)
            });
            let mut push = |rows: Range<usize>, cols: Range<usize>, label: &str, kind: BlockKind| {
                if !rows.is_empty() && !cols.is_empty() {
                    rules.push(BlockRule {
                        basis: Basis::Inner,
                        rows,
                        cols,
                        label: label.to_string(),
                        kind,
                    });
                }
            };
            push(al.clone(), al.clone(), "β:α'α'", BlockKind::FixedT(block(&dm, al.clone(), al.clone())));
            push(al.clone(), be.clone(), "β:α'β'", BlockKind::FixedT(block(&dm, al.clone(), be.clone())));
            let ones = DMatrix::from_element(al.len(), ga.len(), 1.0);
            let a = &ones - &sig;
            let rhs = hadamard(&a, &block(&dp, al.clone(), ga.clone()))
                - hadamard(&sig, &block(&dm, al.clone(), ga.clone()));
            push(al.clone(), ga.clone(), "β:α'γ'", BlockKind::Coupled { a, b: -&sig, rhs });
            push(
                be.clone(),
                be.clone(),
                "β:β'β'",
                BlockKind::ShiftedOmega {
                    s_shift: block(&dp, be.clone(), be.clone()),
                    t_shift: block(&dm, be.clone(), be.clone()),
                },
            );
            push(be.clone(), ga.clone(), "β:β'γ'", BlockKind::FixedS(block(&dp, be.clone(), ga.clone())));
            push(ga.clone(), ga.clone(), "β:γ'γ'", BlockKind::FixedS(block(&dp, ga.clone(), ga.clone())));
            (Some(sub), dp, dm, sig)
        };

        Ok(Tangent2Data {
            spec,
            htil,
            inner,
            delta_plus,
            delta_minus,
            sigma,
            rules,
            h_norm: h.frob(),
            warnings,
        })
    }

    pub fn spec(&self) -> &Spectral {
        &self.spec
    }

    /// `Pᵀ (F + G) P`.
    pub fn h_tilde(&self) -> &DMatrix<f64> {
        &self.htil
    }

    /// Eigendecomposition of `H̃_ββ`; `None` when the zero cluster is empty.
    pub fn inner(&self) -> Option<&SubBlock> {
        self.inner.as_ref()
    }

    pub fn delta_plus(&self) -> &DMatrix<f64> {
        &self.delta_plus
    }

    pub fn delta_minus(&self) -> &DMatrix<f64> {
        &self.delta_minus
    }

    /// `Σ_ij = η_i / (η_i − η_j)` over `α' × γ'`.
    pub fn sigma_table(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn rules(&self) -> &[BlockRule] {
        &self.rules
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn beta_len(&self) -> usize {
        self.spec.beta().len()
    }

    /// Rotated coordinates `(S̃, T̃, Ŝ, T̂)` of a candidate pair.
    pub fn coords(&self, s: &SymMat, t: &SymMat) -> Coords {
        let st = self.spec.rotate(s);
        let tt = self.spec.rotate(t);
        let (s_hat, t_hat) = match &self.inner {
            None => (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)),
            Some(sub) => {
                let rb = self.spec.beta();
                let q = sub.q();
                (
                    sym(q.transpose() * block(&st, rb.clone(), rb.clone()) * q),
                    sym(q.transpose() * block(&tt, rb.clone(), rb) * q),
                )
            }
        };
        Coords { s: st, t: tt, s_hat, t_hat }
    }

    /// Inverse of [`Tangent2Data::coords`]; the `ββ` blocks of `S̃, T̃` are
    /// taken from `Ŝ, T̂`.
    pub fn assemble(&self, c: &Coords) -> (SymMat, SymMat) {
        let mut s = c.s.clone();
        let mut t = c.t.clone();
        if let Some(sub) = &self.inner {
            let rb = self.spec.beta();
            let q = sub.q();
            set_block(&mut s, rb.clone(), rb.clone(), &(q * &c.s_hat * q.transpose()));
            set_block(&mut t, rb.clone(), rb.clone(), &(q * &c.t_hat * q.transpose()));
        }
        (self.spec.unrotate(&s), self.spec.unrotate(&t))
    }

    /// Residual of a single rule at the given coordinates.
    pub fn rule_residual(&self, rule: &BlockRule, c: &Coords) -> Result<f64> {
        let (sb, tb) = c.blocks(rule);
        let w = rule.weight().sqrt();
        Ok(match &rule.kind {
            BlockKind::FixedS(v) => w * (sb - v).norm(),
            BlockKind::FixedT(v) => w * (tb - v).norm(),
            BlockKind::Coupled { a, b, rhs } => w * (hadamard(a, &sb) + hadamard(b, &tb) - rhs).norm(),
            BlockKind::ShiftedOmega { s_shift, t_shift } => {
                let u = sym(sb - s_shift);
                let v = sym(tb - t_shift);
                (&u - psd_part(&(&u + &v))?).norm()
            }
        })
    }

    /// Scale used to normalize second-order residuals.
    pub fn scale(&self, s: &SymMat, t: &SymMat) -> f64 {
        pair_norm(s, t).max(self.h_norm * self.h_norm).max(1.0)
    }

    /// Structural membership of `(S, T)`.
    pub fn check(&self, s: &SymMat, t: &SymMat, tol: f64) -> Result<MembershipReport> {
        let c = self.coords(s, t);
        let mut parts = Vec::with_capacity(self.rules.len());
        for rule in &self.rules {
            parts.push(violation(rule.label.clone(), rule.kind.name(), self.rule_residual(rule, &c)?));
        }
        Ok(MembershipReport::from_parts(parts, self.scale(s, t), tol, self.warnings.clone()))
    }

    fn random_block(rng: &mut Rng64, rule: &BlockRule) -> DMatrix<f64> {
        let g = gaussian_matrix(rng, rule.rows.len(), rule.cols.len());
        if rule.is_diagonal() {
            sym(g)
        } else {
            g
        }
    }

    /// Random member: free blocks Gaussian, coupled blocks solved from a
    /// Gaussian `S̃` block, `ββ` pair drawn from `Ω` with random inertia.
    pub fn sample_member(&self, rng: &mut Rng64) -> (SymMat, SymMat) {
        let c = self.sample_member_coords(rng, 1.0);
        self.assemble(&c)
    }

    /// The member with all free parts zero and the zero-cluster pair at its
    /// shift.
    pub fn anchor(&self) -> Coords {
        self.sample_member_coords(&mut crate::instances::rng_from(0), 0.0)
    }

    /// Member coordinates with free parts scaled by `scale`.
    pub fn sample_member_coords(&self, rng: &mut Rng64, scale: f64) -> Coords {
        let mut c = Coords::zeros(self.spec.n(), self.beta_len());
        for rule in &self.rules {
            let free = Self::random_block(rng, rule) * scale;
            let (sb, tb) = match &rule.kind {
                BlockKind::FixedS(v) => (v.clone(), free),
                BlockKind::FixedT(v) => (free, v.clone()),
                BlockKind::Coupled { a, b, rhs } => {
                    let tb = (rhs - hadamard(a, &free)).component_div(b);
                    (free, tb)
                }
                BlockKind::ShiftedOmega { s_shift, t_shift } => {
                    let (u, v) = random_omega(rng, rule.rows.len(), scale);
                    (u + s_shift, v + t_shift)
                }
            };
            c.set(rule, &sb, &tb);
        }
        c
    }

    /// Member with exactly one rule violated by a perturbation of size
    /// `eps`; returns the pair and the index of the violated rule.
    pub fn sample_nonmember(&self, rng: &mut Rng64, eps: f64) -> Result<(SymMat, SymMat, usize)> {
        if self.rules.is_empty() {
            return Err(Error::Invalid("second-order tangent set has no constraints".into()));
        }
        let mut c = self.sample_member_coords(rng, 1.0);
        let idx = rng.gen_range(0..self.rules.len());
        let rule = &self.rules[idx];
        let (mut sb, mut tb) = c.blocks(rule);
        let unit = |rng: &mut Rng64| {
            let d = Self::random_block(rng, rule);
            let nrm = d.norm().max(f64::MIN_POSITIVE);
            d * (eps / nrm)
        };
        match &rule.kind {
            BlockKind::FixedS(_) | BlockKind::Coupled { .. } => sb += unit(rng),
            BlockKind::FixedT(_) => tb += unit(rng),
            BlockKind::ShiftedOmega { s_shift, .. } => {
                let u = sym(&sb - s_shift);
                let (p, lam) = crate::spectral::eig_sorted(&u)?;
                if lam[0] > 1e-6 {
                    let r = p.column(0).into_owned();
                    tb += &r * r.transpose() * eps;
                } else {
                    let g = gaussian_matrix(rng, rule.rows.len(), 1);
                    let r = &g / g.norm().max(f64::MIN_POSITIVE);
                    sb -= &r * r.transpose() * eps;
                }
            }
        }
        c.set(rule, &sb, &tb);
        let (s, t) = self.assemble(&c);
        Ok((s, t, idx))
    }
}

/// Random `(U, V) ∈ Ω` of size `m` with random inertia.
pub(crate) fn random_omega(rng: &mut Rng64, m: usize, scale: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let r = random_orthogonal(rng, m);
    let mut du = vec![0.0; m];
    let mut dv = vec![0.0; m];
    for i in 0..m {
        let mag = scale * (0.1 + 1.4 * rng.gen::<f64>());
        match rng.gen_range(0..3) {
            0 => du[i] = mag,
            1 => dv[i] = -mag,
            _ => {}
        }
    }
    let u = &r * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(du)) * r.transpose();
    let v = &r * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(dv)) * r.transpose();
    (sym(u), sym(v))
}

fn require_tangent(base: &CCPair, f: &SymMat, g: &SymMat, tol: f64) -> Result<()> {
    let rep = tangent_test(base, f, g, tol)?;
    if rep.verdict == Verdict::Out {
        return Err(Error::NotTangent(rep.residual));
    }
    Ok(())
}

/// Membership of `(S, T)` in `T²_Ω((X, Y); (F, G))` through
/// `Π″(X + Y; F + G, S + T) = S`.
pub fn tangent2_test(
    base: &CCPair,
    f: &SymMat,
    g: &SymMat,
    s: &SymMat,
    t: &SymMat,
    tol: f64,
) -> Result<MembershipReport> {
    super::membership::check_dims(base.n(), &[("F", f), ("G", g), ("S", s), ("T", t)])?;
    require_tangent(base, f, g, tol)?;
    let spec = base.spec();
    let h = f + g;
    let b = proj_dir2_spec(spec, &h, &(s + t), Dir2Options::default())?;
    let d = spec.rotate(&(&b - s));
    let parts = group_parts(spec, &d, "S = Π″(Z; F+G, S+T)");
    let scale = pair_norm(s, t).max(h.frob() * h.frob()).max(1.0);
    Ok(MembershipReport::from_parts(parts, scale, tol, spec.warnings().to_vec()))
}

/// Block classification of `T²_Ω((X, Y); (F, G))`.
pub fn tangent2_structural(base: &CCPair, f: &SymMat, g: &SymMat) -> Result<Tangent2Data> {
    super::membership::check_dims(base.n(), &[("F", f), ("G", g)])?;
    require_tangent(base, f, g, super::membership::DEFAULT_TOL)?;
    Tangent2Data::build(base, &(f + g))
}

#[derive(Clone, Debug, Serialize)]
pub struct Agreement {
    pub agree: bool,
    pub derivative: MembershipReport,
    pub structural: MembershipReport,
}

/// Runs both membership tests. A borderline verdict on either side is not
/// counted as agreement.
pub fn tangent2_agree(
    base: &CCPair,
    f: &SymMat,
    g: &SymMat,
    s: &SymMat,
    t: &SymMat,
    tol: f64,
) -> Result<Agreement> {
    let derivative = tangent2_test(base, f, g, s, t, tol)?;
    let structural = tangent2_structural(base, f, g)?.check(s, t, tol)?;
    let agree = derivative.verdict == structural.verdict && derivative.verdict != Verdict::Borderline;
    Ok(Agreement {
        agree,
        derivative,
        structural,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::membership::DEFAULT_TOL;
    use crate::instances::{random_sym, rng_from};
    use crate::projpsd::proj_dir1_spec;

    fn tangent_pair(base: &CCPair, h: &SymMat) -> (SymMat, SymMat) {
        let f = proj_dir1_spec(base.spec(), h).unwrap();
        let g = h - &f;
        (f, g)
    }

    #[test]
    fn every_block_has_exactly_one_rule() {
        let mut rng = rng_from(8);
        let z = crate::instances::with_spectrum(
            &random_orthogonal(&mut rng, 7),
            &[2.0, 2.0, 1.0, 0.0, 0.0, 0.0, -1.5],
        );
        let base = CCPair::from_z(&z).unwrap();
        let (f, g) = tangent_pair(&base, &random_sym(&mut rng, 7));
        let data = tangent2_structural(&base, &f, &g).unwrap();
        let mut outer = DMatrix::<u32>::zeros(7, 7);
        let mut inner = DMatrix::<u32>::zeros(3, 3);
        for r in data.rules() {
            let m = if r.basis == Basis::Outer { &mut outer } else { &mut inner };
            for i in r.rows.clone() {
                for j in r.cols.clone() {
                    m[(i, j)] += 1;
                    if !r.is_diagonal() {
                        m[(j, i)] += 1;
                    }
                }
            }
        }
        let rb = base.spec().beta();
        for i in 0..7 {
            for j in 0..7 {
                let want = if rb.contains(&i) && rb.contains(&j) { 0 } else { 1 };
                assert_eq!(outer[(i, j)], want, "outer ({i},{j})");
            }
        }
        assert!(inner.iter().all(|&v| v == 1));
    }

    #[test]
    fn interior_x_fixes_t_to_zero() {
        let mut rng = rng_from(9);
        let base = CCPair::new(SymMat::diag(&[3.0, 2.0, 1.0]), SymMat::zeros(3)).unwrap();
        let f = random_sym(&mut rng, 3);
        let data = tangent2_structural(&base, &f, &SymMat::zeros(3)).unwrap();
        for r in data.rules() {
            match &r.kind {
                BlockKind::FixedT(v) => assert!(v.norm() < 1e-15),
                other => panic!("unexpected rule {}", other.name()),
            }
        }
    }

    #[test]
    fn members_and_nonmembers_agree() {
        let mut rng = rng_from(10);
        for trial in 0..60 {
            let n = 3 + trial % 4;
            let zeros = trial % 3;
            let (z, p, _) = crate::instances::random_clustered(
                &mut rng,
                &crate::instances::SpectrumShape { n, zeros, repeats: true },
            );
            let base = CCPair::from_z(&z).unwrap();
            let mut ht = crate::instances::random_sym_block(&mut rng, n);
            let rb = base.spec().beta();
            if !rb.is_empty() {
                let hb = crate::instances::random_block_with_zeros(&mut rng, rb.len(), trial % 2, false);
                set_block(&mut ht, rb.clone(), rb.clone(), &hb);
            }
            let h = SymMat::symmetrize(&p * ht * p.transpose());
            let (f, g) = tangent_pair(&base, &h);
            let data = tangent2_structural(&base, &f, &g).unwrap();
            let (s, t) = data.sample_member(&mut rng);
            let a = tangent2_agree(&base, &f, &g, &s, &t, DEFAULT_TOL).unwrap();
            assert!(a.agree && a.derivative.is_in(), "trial {trial}: {:?}", a);
            if !data.rules().is_empty() {
                let (s, t, _) = data.sample_nonmember(&mut rng, 1e-2).unwrap();
                let a = tangent2_agree(&base, &f, &g, &s, &t, DEFAULT_TOL).unwrap();
                assert!(a.agree && a.derivative.is_out(), "trial {trial}: {:?}", a);
            }
        }
    }

    #[test]
    fn rejects_non_tangent_direction() {
        let base = CCPair::new(SymMat::diag(&[1.0, 0.0]), SymMat::diag(&[0.0, -1.0])).unwrap();
        let f = SymMat::diag(&[0.0, 0.0]);
        let g = SymMat::diag(&[1.0, 0.0]);
        let z = SymMat::zeros(2);
        assert!(matches!(tangent2_test(&base, &f, &g, &z, &z, DEFAULT_TOL), Err(Error::NotTangent(_))));
    }
}
