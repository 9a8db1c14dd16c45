use serde::Serialize;

use crate::error::Result;
use crate::projpsd::proj_psd;
use crate::symmat::SymMat;

use super::membership::{check_dims, CCPair};

#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub x_t: SymMat,
    pub y_t: SymMat,
    /// Distance from the parabolic point to `(X(t), Y(t)) ∈ Ω`, an upper
    /// bound on its distance to `Ω`.
    pub bound: f64,
}

/// `X(t) = Π₊(Z(t))`, `Y(t) = Z(t) − X(t)` with
/// `Z(t) = X + Y + t(F + G) + t²/2 (S + T)`.
pub fn curve_to_omega(
    base: &CCPair,
    f: &SymMat,
    g: &SymMat,
    s: &SymMat,
    t_dir: &SymMat,
    t: f64,
) -> Result<CurvePoint> {
    check_dims(base.n(), &[("F", f), ("G", g), ("S", s), ("T", t_dir)])?;
    let h = 0.5 * t * t;
    let xp = base.x() + &(&f.scale(t) + &s.scale(h));
    let yp = base.y() + &(&g.scale(t) + &t_dir.scale(h));
    let zt = &xp + &yp;
    let x_t = proj_psd(&zt)?;
    let y_t = &zt - &x_t;
    // The two residuals are negatives of each other.
    let bound = 2f64.sqrt() * (&xp - &x_t).frob();
    Ok(CurvePoint { t, x_t, y_t, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::membership::{in_omega, DEFAULT_TOL};
    use crate::geometry::tangent2::tangent2_structural;
    use crate::instances::{random_sym, rng_from};
    use crate::projpsd::proj_dir1_spec;

    #[test]
    fn zero_step_and_membership() {
        let mut rng = rng_from(40);
        let base = CCPair::from_z(&random_sym(&mut rng, 4)).unwrap();
        let (f, g, s, t) = (random_sym(&mut rng, 4), random_sym(&mut rng, 4), random_sym(&mut rng, 4), random_sym(&mut rng, 4));
        assert_eq!(curve_to_omega(&base, &f, &g, &s, &t, 0.0).unwrap().bound, 0.0);
        let p = curve_to_omega(&base, &f, &g, &s, &t, 0.3).unwrap();
        assert!(in_omega(&p.x_t, &p.y_t, DEFAULT_TOL).unwrap().is_in());
    }

    #[test]
    fn members_are_second_order_close() {
        let mut rng = rng_from(41);
        let z = SymMat::diag(&[2.0, 0.0, 0.0, -1.0]);
        let base = CCPair::from_z(&z).unwrap();
        let h = random_sym(&mut rng, 4);
        let f = proj_dir1_spec(base.spec(), &h).unwrap();
        let g = &h - &f;
        let data = tangent2_structural(&base, &f, &g).unwrap();
        let (s, t) = data.sample_member(&mut rng);
        let r: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&tt| curve_to_omega(&base, &f, &g, &s, &t, tt).unwrap().bound / (tt * tt))
            .collect();
        assert!(r[1] < 0.2 * r[0] && r[2] < 0.2 * r[1], "{r:?}");

        let (s, t, _) = data.sample_nonmember(&mut rng, 0.5).unwrap();
        let b = curve_to_omega(&base, &f, &g, &s, &t, 1e-3).unwrap().bound / 1e-6;
        assert!(b > 1e-3, "{b}");
    }
}
