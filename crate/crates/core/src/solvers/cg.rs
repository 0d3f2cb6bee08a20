//! Preconditioned conjugate gradients for symmetric positive semi-definite
//! operators, with a caller-supplied stopping norm.

pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Stopping norm of the residual after each iteration (index 0 is the start).
    pub history: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b`. Stops when `norm(b - A x) <= tol` or after `max_iter`
/// iterations. `A` and `M` must be symmetric in the Euclidean inner product;
/// `b` must be orthogonal to the kernel of `A`.
pub fn pcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Vec<f64>,
    norm: impl Fn(&[f64]) -> f64,
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let mut x = x0;
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut history = vec![norm(&r)];
    if history[0] <= tol {
        return CgOutcome { x, iterations: 0, history, converged: true };
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
        let res = norm(&r);
        history.push(res);
        if res <= tol {
            return CgOutcome { x, iterations: it, history, converged: true };
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    let iterations = history.len() - 1;
    CgOutcome { x, iterations, history, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let apply = |x: &[f64]| (0..3).map(|i| (0..3).map(|j| a[i][j] * x[j]).sum()).collect();
        let b = [1.0, 2.0, 3.0];
        let norm = |r: &[f64]| dot(r, r).sqrt();
        let out = pcg(apply, |r| r.to_vec(), &b, vec![0.0; 3], norm, 1e-14, 10);
        assert!(out.converged);
        assert!(out.iterations <= 3);
        let ax: Vec<f64> = apply(&out.x);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-13);
        }
    }
}
