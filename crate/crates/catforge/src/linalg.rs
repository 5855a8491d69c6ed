//! Small dense complex-matrix routines: matrix exponential, Hermitian
//! eigenvalues, trace distance, log-factorials. Everything here works on
//! `ndarray::Array2<Complex64>` and is sized for Fock-space dimensions
//! (tens, not thousands), where a dependency-free O(n³) routine is plenty.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// ln n!
pub fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// ln C(n, k).
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
///
/// The scaled norm is kept at or below 1/2, where 18 Taylor terms reach
/// f64 roundoff. Our generators are anti-Hermitian, for which the squaring
/// phase is norm-preserving and well conditioned.
pub fn expm(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    // 1-norm: max column sum of absolute values.
    let norm = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm <= 0.5 {
        0
    } else {
        (norm / 0.5).log2().ceil() as u32
    };
    let scale = Complex64::new(1.0 / 2f64.powi(squarings as i32), 0.0);
    let scaled = a.mapv(|v| v * scale);

    let mut result = Array2::<Complex64>::eye(n);
    let mut term = Array2::<Complex64>::eye(n);
    for k in 1..=18 {
        term = term.dot(&scaled);
        term.mapv_inplace(|v| v / k as f64);
        result = result + &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Eigenvalues of a Hermitian matrix, ascending, by cyclic complex Jacobi
/// rotations. Only the lower triangle is referenced.
pub fn eigvalsh(a: &Array2<Complex64>) -> Array1<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigvalsh needs a square matrix");
    let mut m = a.clone();
    // Symmetrize against roundoff so the rotations see an exactly
    // Hermitian matrix.
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    let frob = m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let tol = 1e-14 * (1.0 + frob);

    for _sweep in 0..60 {
        let off = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag <= tol / (n as f64) {
                    continue;
                }
                let phase = apq / mag; // e^{iφ}
                let tau = (m[(q, q)].re - m[(p, p)].re) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (tau * tau + 1.0).sqrt())
                } else {
                    -1.0 / (-tau + (tau * tau + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Unitary G: G[p,p]=c, G[p,q]=s·e^{iφ}, G[q,p]=−s·e^{−iφ}, G[q,q]=c.
                // Columns: A ← A·G.
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * phase.conj() * akq;
                    m[(k, q)] = s * phase * akp + c * akq;
                }
                // Rows: A ← G†·A.
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * phase * aqk;
                    m[(q, k)] = s * phase.conj() * apk + c * aqk;
                }
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
            }
        }
    }

    let mut eigs: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Array1::from(eigs)
}

/// Trace distance ½‖a − b‖₁ between two Hermitian matrices.
pub fn trace_distance(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    let diff = a - b;
    0.5 * eigvalsh(&diff).iter().map(|v| v.abs()).sum::<f64>()
}
