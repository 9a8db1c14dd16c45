use nalgebra::DMatrix;

use crate::error::Result;
use crate::instances::{gaussian_matrix, random_orthogonal, random_sym, random_sym_block, Rng64};
use crate::projpsd::{nsd_part, proj_dir1_spec, psd_part};
use crate::spectral::{block, eig_sorted, set_block, Spectral};
use crate::symmat::{pair_norm, SymMat};

use super::membership::{check_dims, sym_block_norm, violation, CCPair, MembershipReport, Violation};

/// `Σ_ij = λ_i / (λ_i − λ_j)` for `i ∈ α`, `j ∈ γ`.
pub fn sigma_table(spec: &Spectral) -> DMatrix<f64> {
    let lam = spec.snapped();
    let (al, ga) = (spec.alpha(), spec.gamma());
    DMatrix::from_fn(al.len(), ga.len(), |i, j| {
        let (a, c) = (lam[al.start + i], lam[ga.start + j]);
        a / (a - c)
    })
}

fn zero_parts(spec: &Spectral, m: &DMatrix<f64>, name: &str, pairs: &[(usize, usize)]) -> Vec<Violation> {
    let g = [("α", spec.alpha()), ("β", spec.beta()), ("γ", spec.gamma())];
    let mut out = Vec::new();
    for &(i, j) in pairs {
        if g[i].1.is_empty() || g[j].1.is_empty() {
            continue;
        }
        let mag = sym_block_norm(m, g[i].1.clone(), g[j].1.clone());
        out.push(violation(format!("{}{}", g[i].0, g[j].0), format!("{name} = 0"), mag));
    }
    out
}

/// `√2 ‖c₁ ∘ A_αγ + c₂ ∘ B_αγ‖`.
fn coupling_part(
    spec: &Spectral,
    c1: &DMatrix<f64>,
    a: &DMatrix<f64>,
    c2: &DMatrix<f64>,
    b: &DMatrix<f64>,
    name: &str,
) -> Option<Violation> {
    let (al, ga) = (spec.alpha(), spec.gamma());
    if al.is_empty() || ga.is_empty() {
        return None;
    }
    let r = c1.component_mul(&block(a, al.clone(), ga.clone())) + c2.component_mul(&block(b, al, ga));
    Some(violation("αγ", name, 2f64.sqrt() * r.norm()))
}

const AA: (usize, usize) = (0, 0);
const AB: (usize, usize) = (0, 1);
const BB: (usize, usize) = (1, 1);
const BG: (usize, usize) = (1, 2);
const GG: (usize, usize) = (2, 2);

/// Membership of `(F, G)` in the Clarke tangent cone `T^c_Ω(X, Y)`.
pub fn clarke_tangent_test(base: &CCPair, f: &SymMat, g: &SymMat, tol: f64) -> Result<MembershipReport> {
    check_dims(base.n(), &[("F", f), ("G", g)])?;
    let spec = base.spec();
    let (ft, gt) = (spec.rotate(f), spec.rotate(g));
    let sig = sigma_table(spec);
    let ones = DMatrix::from_element(sig.nrows(), sig.ncols(), 1.0);
    let mut parts = zero_parts(spec, &ft, "F̃", &[BB, BG, GG]);
    parts.extend(zero_parts(spec, &gt, "G̃", &[AA, AB, BB]));
    parts.extend(coupling_part(spec, &(&sig - &ones), &ft, &sig, &gt, "(Σ−E)∘F̃ + Σ∘G̃ = 0"));
    Ok(MembershipReport::from_parts(parts, pair_norm(f, g), tol, spec.warnings().to_vec()))
}

/// Membership of `(ΔF, ΔG)` in the polar of `T^c_Ω(X, Y)`. The `ββ` blocks
/// are unconstrained because the cone vanishes there.
pub fn clarke_polar_test(base: &CCPair, df: &SymMat, dg: &SymMat, tol: f64) -> Result<MembershipReport> {
    check_dims(base.n(), &[("ΔF", df), ("ΔG", dg)])?;
    let spec = base.spec();
    let (ft, gt) = (spec.rotate(df), spec.rotate(dg));
    let sig = sigma_table(spec);
    let ones = DMatrix::from_element(sig.nrows(), sig.ncols(), 1.0);
    let mut parts = zero_parts(spec, &ft, "ΔF̃", &[AA, AB]);
    parts.extend(zero_parts(spec, &gt, "ΔG̃", &[BG, GG]));
    parts.extend(coupling_part(spec, &sig, &ft, &(&ones - &sig), &gt, "Σ∘ΔF̃ + (E−Σ)∘ΔG̃ = 0"));
    Ok(MembershipReport::from_parts(parts, pair_norm(df, dg), tol, spec.warnings().to_vec()))
}

/// Membership of `(Γ¹, Γ²)` in the regular normal cone, the polar of
/// `T_Ω(X, Y)`.
pub fn regular_normal_test(base: &CCPair, g1: &SymMat, g2: &SymMat, tol: f64) -> Result<MembershipReport> {
    check_dims(base.n(), &[("Γ¹", g1), ("Γ²", g2)])?;
    let spec = base.spec();
    let (at, bt) = (spec.rotate(g1), spec.rotate(g2));
    let mut parts = outer_normal_parts(spec, &at, &bt);
    let rb = spec.beta();
    if !rb.is_empty() {
        parts.extend(beta_sign_parts(&block(&at, rb.clone(), rb.clone()), &block(&bt, rb.clone(), rb))?);
    }
    Ok(MembershipReport::from_parts(parts, pair_norm(g1, g2), tol, spec.warnings().to_vec()))
}

fn outer_normal_parts(spec: &Spectral, at: &DMatrix<f64>, bt: &DMatrix<f64>) -> Vec<Violation> {
    let sig = sigma_table(spec);
    let ones = DMatrix::from_element(sig.nrows(), sig.ncols(), 1.0);
    let mut parts = zero_parts(spec, at, "Γ̃¹", &[AA, AB]);
    parts.extend(zero_parts(spec, bt, "Γ̃²", &[BG, GG]));
    parts.extend(coupling_part(spec, &sig, at, &(&ones - &sig), bt, "Σ∘Γ̃¹ + (E−Σ)∘Γ̃² = 0"));
    parts
}

fn beta_sign_parts(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<Violation>> {
    Ok(vec![
        violation("ββ", "Γ̃¹ ⪯ 0", psd_part(a)?.norm()),
        violation("ββ", "Γ̃² ⪰ 0", nsd_part(b)?.norm()),
    ])
}

fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Deficit of `(A, B)` on the zero cluster for one basis and one split of
/// its indices into `(+, 0, −)` groups.
fn split_deficit(a: &DMatrix<f64>, b: &DMatrix<f64>, labels: &[u8]) -> Result<f64> {
    let idx = |c: u8| -> Vec<usize> { (0..labels.len()).filter(|&i| labels[i] == c).collect() };
    let (p, z, n) = (idx(0), idx(1), idx(2));
    let mut d2 = 0.0;
    d2 += select(a, &p, &p).norm_squared() + 2.0 * select(a, &p, &z).norm_squared();
    d2 += select(b, &n, &n).norm_squared() + 2.0 * select(b, &z, &n).norm_squared();
    for &i in &p {
        for &j in &n {
            let (x, y) = (a[(i, j)], b[(i, j)]);
            if x * y > 0.0 {
                d2 += 2.0 * x.abs().min(y.abs()).powi(2);
            }
        }
    }
    if !z.is_empty() {
        d2 += psd_part(&select(a, &z, &z))?.norm_squared();
        d2 += nsd_part(&select(b, &z, &z))?.norm_squared();
    }
    Ok(d2.sqrt())
}

fn best_split(a: &DMatrix<f64>, b: &DMatrix<f64>, rng: &mut Rng64, samples: usize) -> Result<f64> {
    use rand::Rng;
    let m = a.nrows();
    let mut best = f64::INFINITY;
    if m <= 6 {
        let total = 3usize.pow(m as u32);
        for code in 0..total {
            let mut c = code;
            let labels: Vec<u8> = (0..m)
                .map(|_| {
                    let v = (c % 3) as u8;
                    c /= 3;
                    v
                })
                .collect();
            best = best.min(split_deficit(a, b, &labels)?);
        }
    } else {
        for _ in 0..samples.max(1) {
            let labels: Vec<u8> = (0..m).map(|_| rng.gen_range(0..3u8)).collect();
            best = best.min(split_deficit(a, b, &labels)?);
        }
    }
    Ok(best)
}

/// Sampled test for the limiting normal cone. The zero-cluster condition is
/// replaced by a search over candidate bases (the rotated basis, the
/// eigenbases of `Γ̃¹_ββ`, `Γ̃²_ββ`, `Γ̃¹_ββ + Γ̃²_ββ`, and `samples` random
/// ones) and over splits of the zero cluster into limiting positive, zero
/// and negative parts. The coupling between the positive and negative parts
/// is relaxed to an entrywise sign condition, so the tested set contains
/// the limiting normal cone.
pub fn limiting_normal_test(
    base: &CCPair,
    g1: &SymMat,
    g2: &SymMat,
    tol: f64,
    rng: &mut Rng64,
    samples: usize,
) -> Result<MembershipReport> {
    check_dims(base.n(), &[("Γ¹", g1), ("Γ²", g2)])?;
    let spec = base.spec();
    let (at, bt) = (spec.rotate(g1), spec.rotate(g2));
    let mut parts = outer_normal_parts(spec, &at, &bt);
    let rb = spec.beta();
    let mut warnings = spec.warnings().to_vec();
    warnings.push("limiting normal cone approximated by sampling".into());
    if !rb.is_empty() {
        let a = block(&at, rb.clone(), rb.clone());
        let b = block(&bt, rb.clone(), rb.clone());
        let m = a.nrows();
        let mut bases = vec![DMatrix::identity(m, m)];
        bases.push(eig_sorted(&a)?.0);
        bases.push(eig_sorted(&b)?.0);
        bases.push(eig_sorted(&(&a + &b))?.0);
        for _ in 0..samples {
            bases.push(random_orthogonal(rng, m));
        }
        let mut best = f64::INFINITY;
        for q in &bases {
            let ah = q.transpose() * &a * q;
            let bh = q.transpose() * &b * q;
            best = best.min(best_split(&ah, &bh, rng, samples)?);
            if best == 0.0 {
                break;
            }
        }
        parts.push(violation("ββ", "limiting split", best));
    }
    Ok(MembershipReport::from_parts(parts, pair_norm(g1, g2), tol, warnings))
}

/// Random element of `T_Ω(X, Y)`: `F = Π′(Z; H)`, `G = H − F`.
pub fn sample_tangent(base: &CCPair, rng: &mut Rng64) -> Result<(SymMat, SymMat)> {
    let h = random_sym(rng, base.n());
    let f = proj_dir1_spec(base.spec(), &h)?;
    let g = &h - &f;
    Ok((f, g))
}

/// Random element of `T^c_Ω(X, Y)`.
pub fn sample_clarke_tangent(base: &CCPair, rng: &mut Rng64) -> (SymMat, SymMat) {
    let spec = base.spec();
    let n = base.n();
    let (al, be, ga) = (spec.alpha(), spec.beta(), spec.gamma());
    let mut f = DMatrix::zeros(n, n);
    let mut g = DMatrix::zeros(n, n);
    set_block(&mut f, al.clone(), al.clone(), &random_sym_block(rng, al.len()));
    let fab = gaussian_matrix(rng, al.len(), be.len());
    set_block(&mut f, al.clone(), be.clone(), &fab);
    set_block(&mut f, be.clone(), al.clone(), &fab.transpose());
    set_block(&mut g, ga.clone(), ga.clone(), &random_sym_block(rng, ga.len()));
    let gbg = gaussian_matrix(rng, be.len(), ga.len());
    set_block(&mut g, be.clone(), ga.clone(), &gbg);
    set_block(&mut g, ga.clone(), be.clone(), &gbg.transpose());
    let sig = sigma_table(spec);
    let ones = DMatrix::from_element(sig.nrows(), sig.ncols(), 1.0);
    let m = gaussian_matrix(rng, al.len(), ga.len());
    let fag = sig.component_mul(&m);
    let gag = (&ones - &sig).component_mul(&m);
    set_block(&mut f, al.clone(), ga.clone(), &fag);
    set_block(&mut f, ga.clone(), al.clone(), &fag.transpose());
    set_block(&mut g, al.clone(), ga.clone(), &gag);
    set_block(&mut g, ga, al, &gag.transpose());
    (spec.unrotate(&f), spec.unrotate(&g))
}

/// Random element of the polar of `T^c_Ω(X, Y)`.
pub fn sample_clarke_polar(base: &CCPair, rng: &mut Rng64) -> (SymMat, SymMat) {
    let spec = base.spec();
    let n = base.n();
    let (al, be, ga) = (spec.alpha(), spec.beta(), spec.gamma());
    let mut f = DMatrix::zeros(n, n);
    let mut g = DMatrix::zeros(n, n);
    let fill = |m: &mut DMatrix<f64>, r: std::ops::Range<usize>, c: std::ops::Range<usize>, rng: &mut Rng64| {
        if r == c {
            set_block(m, r.clone(), r.clone(), &random_sym_block(rng, r.len()));
        } else {
            let b = gaussian_matrix(rng, r.len(), c.len());
            set_block(m, r.clone(), c.clone(), &b);
            set_block(m, c, r, &b.transpose());
        }
    };
    fill(&mut f, be.clone(), be.clone(), rng);
    fill(&mut f, be.clone(), ga.clone(), rng);
    fill(&mut f, ga.clone(), ga.clone(), rng);
    fill(&mut g, al.clone(), al.clone(), rng);
    fill(&mut g, al.clone(), be.clone(), rng);
    fill(&mut g, be.clone(), be.clone(), rng);
    let sig = sigma_table(spec);
    let ones = DMatrix::from_element(sig.nrows(), sig.ncols(), 1.0);
    let m = gaussian_matrix(rng, al.len(), ga.len());
    let fag = (&ones - &sig).component_mul(&m);
    let gag = -sig.component_mul(&m);
    set_block(&mut f, al.clone(), ga.clone(), &fag);
    set_block(&mut f, ga.clone(), al.clone(), &fag.transpose());
    set_block(&mut g, al.clone(), ga.clone(), &gag);
    set_block(&mut g, ga, al, &gag.transpose());
    (spec.unrotate(&f), spec.unrotate(&g))
}
