use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instances::{
    gaussian_matrix, random_block_with_zeros, random_clustered, random_orthogonal, random_sym_block,
    with_spectrum, Rng64, SpectrumShape,
};
use crate::projpsd::{proj_dir1_spec, proj_psd};
use crate::spectral::set_block;
use crate::symmat::SymMat;

use super::membership::CCPair;

/// Base configurations with a known form of the second-order tangent set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// `X ≻ 0`, `Y = G = 0`.
    I,
    /// `Y ≺ 0`, `X = F = 0`.
    II,
    /// `X = Y = 0`.
    III,
    /// `X = F = 0`, `Y` singular and nonzero, `P₀ᵀGP₀ ⪯ 0` singular.
    IV,
    /// `Y = G = 0`, `X` singular and nonzero, `P₀ᵀFP₀ ⪰ 0` singular.
    V,
    /// Random clustered base and tangent direction.
    Generic,
}

impl Case {
    pub const ALL: [Case; 6] = [Case::I, Case::II, Case::III, Case::IV, Case::V, Case::Generic];

    pub fn name(self) -> &'static str {
        match self {
            Case::I => "i",
            Case::II => "ii",
            Case::III => "iii",
            Case::IV => "iv",
            Case::V => "v",
            Case::Generic => "generic",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CaseInstance {
    pub case: Case,
    pub base: CCPair,
    pub f: SymMat,
    pub g: SymMat,
}

fn magnitudes(rng: &mut Rng64, k: usize) -> Vec<f64> {
    (0..k).map(|_| 0.3 + 1.7 * rng.gen::<f64>()).collect()
}

/// `-C Cᵀ` with `rank C < m`, as an `m × m` block.
fn singular_nsd(rng: &mut Rng64, m: usize) -> DMatrix<f64> {
    let rank = rng.gen_range(0..m);
    let c = gaussian_matrix(rng, m, rank);
    -(&c * c.transpose())
}

/// Base and tangent direction for `case` in dimension `n` (`n ≥ 2` for
/// cases iv and v).
pub fn special_case(case: Case, n: usize, rng: &mut Rng64) -> Result<CaseInstance> {
    if n == 0 || (matches!(case, Case::IV | Case::V) && n < 2) {
        return Err(Error::Invalid(format!("case {} needs a larger dimension than {n}", case.name())));
    }
    let zero = SymMat::zeros(n);
    let p = random_orthogonal(rng, n);
    let (base, f, g) = match case {
        Case::I => {
            let x = with_spectrum(&p, &magnitudes(rng, n));
            let f = SymMat::symmetrize(random_sym_block(rng, n));
            (CCPair::new(x, zero.clone())?, f, zero)
        }
        Case::II => {
            let d: Vec<f64> = magnitudes(rng, n).into_iter().map(|v| -v).collect();
            let y = with_spectrum(&p, &d);
            let g = SymMat::symmetrize(random_sym_block(rng, n));
            (CCPair::new(zero.clone(), y)?, zero, g)
        }
        Case::III => {
            let zeros = rng.gen_range(0..=n / 2);
            let h = SymMat::symmetrize(random_block_with_zeros(rng, n, zeros, true));
            let f = proj_psd(&h)?;
            let g = &h - &f;
            (CCPair::new(zero.clone(), zero)?, f, g)
        }
        Case::IV | Case::V => {
            let k = rng.gen_range(1..n);
            let mut d = vec![0.0; n];
            let mut gt = random_sym_block(rng, n);
            let nz = magnitudes(rng, n - k);
            let sb = singular_nsd(rng, k);
            if case == Case::IV {
                for (i, v) in nz.into_iter().enumerate() {
                    d[k + i] = -v;
                }
                set_block(&mut gt, 0..k, 0..k, &sb);
            } else {
                for (i, v) in nz.into_iter().enumerate() {
                    d[i] = v;
                }
                set_block(&mut gt, n - k..n, n - k..n, &-sb);
            }
            let m = with_spectrum(&p, &d);
            let dir = SymMat::symmetrize(&p * gt * p.transpose());
            if case == Case::IV {
                (CCPair::new(zero.clone(), m)?, zero, dir)
            } else {
                (CCPair::new(m, zero.clone())?, dir, zero)
            }
        }
        Case::Generic => {
            let zeros = rng.gen_range(0..=n.min(3));
            let (z, p, _) = random_clustered(rng, &SpectrumShape { n, zeros, repeats: true });
            let base = CCPair::from_z(&z)?;
            let mut ht = random_sym_block(rng, n);
            let rb = base.spec().beta();
            if !rb.is_empty() {
                let hz = rng.gen_range(0..=rb.len());
                let hb = random_block_with_zeros(rng, rb.len(), hz, false);
                set_block(&mut ht, rb.clone(), rb.clone(), &hb);
            }
            let h = SymMat::symmetrize(&p * ht * p.transpose());
            let f = proj_dir1_spec(base.spec(), &h)?;
            let g = &h - &f;
            (base, f, g)
        }
    };
    Ok(CaseInstance { case, base, f, g })
}
