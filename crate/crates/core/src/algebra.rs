//! Pointwise algebra of sections of `E = S^2(T*M) (x) TM` and their metric
//! decomposition.
//!
//! `con(Phi)_i = Phi^k_{ik}`, `Sym(alpha)^i_{jk} = delta^i_j alpha_k + delta^i_k alpha_j`,
//! and the contraction-free part `Phi_0 = Phi - Sym(con Phi) / (n + 1)` splits
//! `E = E_0 (+) T*M`. With a metric, `E_0` splits further into the image of
//! `iota_g(X) = (g (x) X)_0` and the `g`-trace-free part: `Phi = iota_g(X) + A`
//! with `X = tr_g(Phi) / m`, `m = (n + 2)(n - 1) / (n + 1)`.

use crate::error::{Error, Result};
use crate::field::{pointwise, valence, Symmetry, TensorField, Variance};
use crate::riemannian::Metric;

/// `m = (n + 2)(n - 1) / (n + 1)`, the eigenvalue of `tr_g o iota_g`.
pub fn m_factor(n: usize) -> f64 {
    let n = n as f64;
    (n + 2.0) * (n - 1.0) / (n + 1.0)
}

/// `m_hat = (n + 1)(n - 2) / (n + 2)`.
pub fn m_hat(n: usize) -> f64 {
    let n = n as f64;
    (n + 1.0) * (n - 2.0) / (n + 2.0)
}

/// Kernels acting on the components of a tensor at one point.
pub(crate) mod local {
    #[inline]
    pub fn i2(n: usize, a: usize, b: usize) -> usize {
        a * n + b
    }

    #[inline]
    pub fn i3(n: usize, a: usize, b: usize, c: usize) -> usize {
        (a * n + b) * n + c
    }

    #[inline]
    pub fn i4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * n + b) * n + c) * n + d
    }

    /// `out[.., a, ..] = sum_b m[a][b] t[.., b, ..]` on slot `slot` of a rank-`r` tensor.
    pub fn transform_slot(t: &[f64], n: usize, r: usize, slot: usize, m: &[f64], out: &mut [f64]) {
        let inner = n.pow((r - 1 - slot) as u32);
        let outer = n.pow(slot as u32);
        for o in 0..outer {
            for a in 0..n {
                for i in 0..inner {
                    let mut s = 0.0;
                    for b in 0..n {
                        s += m[a * n + b] * t[(o * n + b) * inner + i];
                    }
                    out[(o * n + a) * inner + i] = s;
                }
            }
        }
    }

    pub fn con(phi: &[f64], n: usize, out: &mut [f64]) {
        for i in 0..n {
            out[i] = (0..n).map(|k| phi[i3(n, k, i, k)]).sum();
        }
    }

    pub fn sym(alpha: &[f64], n: usize, out: &mut [f64]) {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = 0.0;
                    if i == j {
                        v += alpha[k];
                    }
                    if i == k {
                        v += alpha[j];
                    }
                    out[i3(n, i, j, k)] = v;
                }
            }
        }
    }

    pub fn trace_free(phi: &[f64], n: usize, out: &mut [f64]) {
        let mut c = vec![0.0; n];
        con(phi, n, &mut c);
        let w = 1.0 / (n as f64 + 1.0);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = phi[i3(n, i, j, k)];
                    if i == j {
                        v -= w * c[k];
                    }
                    if i == k {
                        v -= w * c[j];
                    }
                    out[i3(n, i, j, k)] = v;
                }
            }
        }
    }

    /// `tr_g(Phi)^i = g^{jk} Phi^i_{jk}`.
    pub fn metric_trace(phi: &[f64], ginv: &[f64], n: usize, out: &mut [f64]) {
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += ginv[i2(n, j, k)] * phi[i3(n, i, j, k)];
                }
            }
            out[i] = s;
        }
    }

    /// `(g (x) Y)^i_{jk} = g_{jk} Y^i`.
    pub fn g_tensor(g: &[f64], y: &[f64], n: usize, out: &mut [f64]) {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out[i3(n, i, j, k)] = g[i2(n, j, k)] * y[i];
                }
            }
        }
    }

    pub fn lower(v: &[f64], g: &[f64], n: usize, out: &mut [f64]) {
        for i in 0..n {
            out[i] = (0..n).map(|j| g[i2(n, i, j)] * v[j]).sum();
        }
    }

    /// Full metric pairing of two tensors with the given valence.
    pub fn pairing(s: &[f64], t: &[f64], up: &[bool], g: &[f64], ginv: &[f64], n: usize) -> f64 {
        let r = up.len();
        let mut a = s.to_vec();
        let mut b = vec![0.0; a.len()];
        for (slot, &is_up) in up.iter().enumerate() {
            transform_slot(&a, n, r, slot, if is_up { g } else { ginv }, &mut b);
            std::mem::swap(&mut a, &mut b);
        }
        a.iter().zip(t).map(|(x, y)| x * y).sum()
    }
}

fn ensure_e_section(phi: &TensorField) -> Result<()> {
    phi.ensure_valence(&valence::e_section())
}

/// `[con(Phi)]_i = Phi^k_{ik}`.
pub fn con(phi: &TensorField) -> Result<TensorField> {
    ensure_e_section(phi)?;
    let n = phi.dim();
    Ok(pointwise(phi.grid(), &[phi], valence::one_form(), Symmetry::None, |x, out| {
        local::con(x[0], n, out)
    }))
}

/// `[Sym(alpha)]^i_{jk} = delta^i_j alpha_k + delta^i_k alpha_j`.
pub fn sym(alpha: &TensorField) -> Result<TensorField> {
    alpha.ensure_valence(&valence::one_form())?;
    let n = alpha.dim();
    Ok(pointwise(alpha.grid(), &[alpha], valence::e_section(), Symmetry::SymmetricLowerPair, |x, out| {
        local::sym(x[0], n, out)
    }))
}

/// `Phi_0 = Phi - Sym(con(Phi)) / (n + 1)`.
pub fn trace_free_part(phi: &TensorField) -> Result<TensorField> {
    ensure_e_section(phi)?;
    let n = phi.dim();
    Ok(pointwise(phi.grid(), &[phi], valence::e_section(), Symmetry::SymmetricLowerPair, |x, out| {
        local::trace_free(x[0], n, out)
    }))
}

/// `tr_g(Phi)^i = g^{jk} Phi^i_{jk}`.
pub fn metric_trace(phi: &TensorField, metric: &Metric) -> Result<TensorField> {
    ensure_e_section(phi)?;
    phi.ensure_same_grid(metric.g())?;
    let n = phi.dim();
    Ok(pointwise(phi.grid(), &[phi, metric.inverse()], valence::vector(), Symmetry::None, |x, out| {
        local::metric_trace(x[0], x[1], n, out)
    }))
}

/// `(g (x) Y)^i_{jk} = g_{jk} Y^i`.
pub fn g_tensor(metric: &Metric, y: &TensorField) -> Result<TensorField> {
    y.ensure_valence(&valence::vector())?;
    y.ensure_same_grid(metric.g())?;
    let n = y.dim();
    Ok(pointwise(y.grid(), &[metric.g(), y], valence::e_section(), Symmetry::SymmetricLowerPair, |x, out| {
        local::g_tensor(x[0], x[1], n, out)
    }))
}

/// `iota_g(Y) = (g (x) Y)_0`.
pub fn iota(metric: &Metric, y: &TensorField) -> Result<TensorField> {
    trace_free_part(&g_tensor(metric, y)?)
}

/// Index lowering `Y^flat_i = g_{ij} Y^j`.
pub fn flat(metric: &Metric, y: &TensorField) -> Result<TensorField> {
    y.ensure_valence(&valence::vector())?;
    let n = y.dim();
    Ok(pointwise(y.grid(), &[metric.g(), y], valence::one_form(), Symmetry::None, |x, out| {
        local::lower(x[1], x[0], n, out)
    }))
}

/// Index raising `alpha^sharp^i = g^{ij} alpha_j`.
pub fn sharp(metric: &Metric, alpha: &TensorField) -> Result<TensorField> {
    alpha.ensure_valence(&valence::one_form())?;
    let n = alpha.dim();
    Ok(pointwise(alpha.grid(), &[metric.inverse(), alpha], valence::vector(), Symmetry::None, |x, out| {
        local::lower(x[1], x[0], n, out)
    }))
}

/// Pointwise metric inner product of two fields of equal valence: every
/// lower index is raised with `g^sharp` and every upper index lowered with `g`.
pub fn pairing(s1: &TensorField, s2: &TensorField, metric: &Metric) -> Result<TensorField> {
    s1.ensure_valence(s2.valence())?;
    s1.ensure_same_grid(s2)?;
    s1.ensure_same_grid(metric.g())?;
    let n = s1.dim();
    let up: Vec<bool> = s1.valence().iter().map(|v| *v == Variance::Up).collect();
    Ok(pointwise(
        s1.grid(),
        &[s1, s2, metric.g(), metric.inverse()],
        valence::scalar(),
        Symmetry::None,
        |x, out| out[0] = local::pairing(x[0], x[1], &up, x[2], x[3], n),
    ))
}

/// `|s|^2_g` as a scalar field.
pub fn norm_sq(s: &TensorField, metric: &Metric) -> Result<TensorField> {
    pairing(s, s, metric)
}

/// `<<s1, s2>>_g = int <s1, s2>_g dmu_g`.
pub fn l2_pairing(s1: &TensorField, s2: &TensorField, metric: &Metric) -> Result<f64> {
    let p = pairing(s1, s2, metric)?;
    Ok(metric.integrate(p.values()))
}

/// Splits `Phi in E_0` into `X = tr_g(Phi) / m` and `A = Phi - iota_g(X)`.
pub fn decompose_xa(phi0: &TensorField, metric: &Metric) -> Result<(TensorField, TensorField)> {
    ensure_e_section(phi0)?;
    let c = con(phi0)?.max_abs();
    if c > 1e-9 * (1.0 + phi0.max_abs()) {
        return Err(Error::NotTraceFree(c));
    }
    let m = m_factor(phi0.dim());
    let x = metric_trace(phi0, metric)?.scale(1.0 / m);
    let a = phi0.sub(&iota(metric, &x)?)?;
    Ok((x, a))
}
