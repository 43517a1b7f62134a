//! Pointwise linear algebra on `R^4` and `Lambda^2 R^4`.
//!
//! Two-forms are handled pointwise as 6-vectors over the increasing pairs
//! `PAIRS`. The reference orientation is the one induced by the standard
//! symplectic form: `vol_ref = dx0^dx2^dx1^dx3`.

use nalgebra::{Matrix4, SymmetricEigen};

pub type Mat4 = [[f64; 4]; 4];
pub type Vec6 = [f64; 6];
pub type Mat6 = [[f64; 6]; 6];

pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub const IDENTITY: Mat4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// Position of the pair `(i, j)` in `PAIRS` and the sign relating them.
pub fn pair_index(i: usize, j: usize) -> Option<(usize, f64)> {
    if i == j {
        return None;
    }
    let (a, b, s) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
    let k = PAIRS.iter().position(|&(x, y)| x == a && y == b)?;
    Some((k, s))
}

/// Sign of a permutation of `0..n` given as a slice of distinct indices, 0 if repeated.
pub fn perm_sign(idx: &[usize]) -> f64 {
    let mut s = 1.0;
    for a in 0..idx.len() {
        for b in a + 1..idx.len() {
            if idx[a] == idx[b] {
                return 0.0;
            }
            if idx[a] > idx[b] {
                s = -s;
            }
        }
    }
    s
}

/// Volume symbol for the reference orientation: `eps(0,2,1,3) = +1`.
pub fn eps(i: usize, j: usize, k: usize, l: usize) -> f64 {
    -perm_sign(&[i, j, k, l])
}

/// Symmetric matrix `W` with `alpha ^ beta = alpha^T W beta` in units of `vol_ref`.
pub fn wedge_matrix() -> Mat6 {
    let mut w = [[0.0; 6]; 6];
    for (a, &(i, j)) in PAIRS.iter().enumerate() {
        for (b, &(k, l)) in PAIRS.iter().enumerate() {
            w[a][b] = eps(i, j, k, l);
        }
    }
    w
}

pub fn wedge6(a: &Vec6, b: &Vec6) -> f64 {
    // complementary pairs: (01,23) (02,13) (03,12)
    -(a[0] * b[5] + a[5] * b[0]) + (a[1] * b[4] + a[4] * b[1]) - (a[2] * b[3] + a[3] * b[2])
}

pub fn dot6(a: &Vec6, b: &Vec6) -> f64 {
    (0..6).map(|k| a[k] * b[k]).sum()
}

pub fn mat6_vec(m: &Mat6, v: &Vec6) -> Vec6 {
    let mut out = [0.0; 6];
    for a in 0..6 {
        out[a] = (0..6).map(|b| m[a][b] * v[b]).sum();
    }
    out
}

pub fn to_pairs(m: &Mat4) -> Vec6 {
    PAIRS.map(|(i, j)| m[i][j])
}

pub fn from_pairs(v: &Vec6) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (k, &(i, j)) in PAIRS.iter().enumerate() {
        m[i][j] = v[k];
        m[j][i] = -v[k];
    }
    m
}

pub fn matmul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn transpose(a: &Mat4) -> Mat4 {
    let mut t = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn to_na(a: &Mat4) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| a[i][j])
}

pub fn from_na(m: &Matrix4<f64>) -> Mat4 {
    let mut a = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            a[i][j] = m[(i, j)];
        }
    }
    a
}

pub fn inverse(a: &Mat4) -> Option<Mat4> {
    to_na(a).try_inverse().map(|m| from_na(&m))
}

pub fn determinant(a: &Mat4) -> f64 {
    to_na(a).determinant()
}

/// Pfaffian of an antisymmetric matrix, equal to `(omega^omega / 2)` in units of `vol_ref`.
pub fn pfaffian_ref(w: &Mat4) -> f64 {
    0.5 * wedge6(&to_pairs(w), &to_pairs(w))
}

pub fn sym_eigenvalues(a: &Mat4) -> [f64; 4] {
    let e = SymmetricEigen::new(to_na(a));
    let mut v = [e.eigenvalues[0], e.eigenvalues[1], e.eigenvalues[2], e.eigenvalues[3]];
    v.sort_by(f64::total_cmp);
    v
}

/// `f(A)` for symmetric `A` through its eigen-decomposition.
pub fn sym_function(a: &Mat4, f: impl Fn(f64) -> f64) -> Mat4 {
    let e = SymmetricEigen::new(to_na(a));
    let mut d = Matrix4::zeros();
    for k in 0..4 {
        d[(k, k)] = f(e.eigenvalues[k]);
    }
    from_na(&(e.eigenvectors * d * e.eigenvectors.transpose()))
}

pub fn max_abs_diff(a: &Mat4, b: &Mat4) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

/// Matrix of the metric on two-forms, `<a,b>_g = sum_IJ a_I G_IJ b_J`, from the inverse metric.
pub fn lambda2_metric(ginv: &Mat4) -> Mat6 {
    let mut m = [[0.0; 6]; 6];
    for (a, &(i, j)) in PAIRS.iter().enumerate() {
        for (b, &(k, l)) in PAIRS.iter().enumerate() {
            m[a][b] = ginv[i][k] * ginv[j][l] - ginv[i][l] * ginv[j][k];
        }
    }
    m
}

/// Matrix of the Hodge star on two-forms for a metric with inverse `ginv` and `sqrt(det g)`.
pub fn hodge_matrix(ginv: &Mat4, sqrt_det: f64) -> Mat6 {
    let raise = lambda2_metric(ginv);
    let mut h = [[0.0; 6]; 6];
    for (a, &(k, l)) in PAIRS.iter().enumerate() {
        for b in 0..6 {
            let mut s = 0.0;
            for (c, &(i, j)) in PAIRS.iter().enumerate() {
                s += eps(i, j, k, l) * raise[c][b];
            }
            h[a][b] = sqrt_det * s;
        }
    }
    h
}

/// Matrix `M` with `(chi(J.,J.))_I = sum_K M_IK chi_K`, where `j[i][k] = J_i^k`.
pub fn j_conjugation_matrix(j: &Mat4) -> Mat6 {
    let mut m = [[0.0; 6]; 6];
    for (a, &(k, l)) in PAIRS.iter().enumerate() {
        for (b, &(i, jj)) in PAIRS.iter().enumerate() {
            m[a][b] = j[k][i] * j[l][jj] - j[k][jj] * j[l][i];
        }
    }
    m
}

/// Flat self-dual basis `{dx01 - dx23, dx02 + dx13, dx03 - dx12}`.
pub const SELF_DUAL_FLAT: [Vec6; 3] = [
    [1.0, 0.0, 0.0, 0.0, 0.0, -1.0],
    [0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0, -1.0, 0.0, 0.0],
];

/// Flat anti-self-dual basis `{dx01 + dx23, dx02 - dx13, dx03 + dx12}`.
pub const ANTI_SELF_DUAL_FLAT: [Vec6; 3] = [
    [1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    [0.0, 1.0, 0.0, 0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
];

/// Flat self-dual forms that are anti-invariant under the standard `J0`.
pub const ANTI_INVARIANT_FLAT: [Vec6; 2] = [SELF_DUAL_FLAT[0], SELF_DUAL_FLAT[2]];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_star_matches_bases() {
        let h = hodge_matrix(&IDENTITY, 1.0);
        for e in SELF_DUAL_FLAT {
            assert_eq!(mat6_vec(&h, &e), e);
        }
        for e in ANTI_SELF_DUAL_FLAT {
            assert_eq!(mat6_vec(&h, &e), e.map(|x| -x));
        }
        // *dx01 = -dx23 under the symplectic orientation
        assert_eq!(mat6_vec(&h, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0])[5], -1.0);
    }

    #[test]
    fn wedge_helpers_agree() {
        let w = wedge_matrix();
        let a = [0.3, -1.0, 2.0, 0.5, 0.7, -0.2];
        let b = [1.1, 0.4, -0.6, 0.9, -1.3, 0.8];
        assert!((dot6(&a, &mat6_vec(&w, &b)) - wedge6(&a, &b)).abs() < 1e-14);
        let omega0 = SELF_DUAL_FLAT[1];
        assert_eq!(wedge6(&omega0, &omega0), 2.0);
    }

    #[test]
    fn star_squares_to_identity_for_curved_metric() {
        let g = [
            [2.0, 0.3, 0.1, 0.0],
            [0.3, 1.5, -0.2, 0.1],
            [0.1, -0.2, 1.2, 0.4],
            [0.0, 0.1, 0.4, 0.9],
        ];
        let ginv = inverse(&g).unwrap();
        let h = hodge_matrix(&ginv, determinant(&g).sqrt());
        for k in 0..6 {
            let mut e = [0.0; 6];
            e[k] = 1.0;
            let back = mat6_vec(&h, &mat6_vec(&h, &e));
            for m in 0..6 {
                assert!((back[m] - e[m]).abs() < 1e-12);
            }
        }
    }
}
