//! Scalar loops behind the graph ops. All matrix kernels accumulate into `out`.

/// `out[m×n] += a[m×k] · b[k×n]`
pub(crate) fn gemm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

/// `out[m×n] += a[m×k] · b[n×k]ᵀ`
pub(crate) fn gemm_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            out[i * n + j] += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `out[k×n] += a[m×k]ᵀ · b[m×n]`
pub(crate) fn gemm_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub(crate) fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `out[n,t,c] += Σ_j kernel[j,c] · x[n, t+j-K/2, c]`, zero outside `[0, T)`.
pub(crate) fn depthwise_conv(
    x: &[f64],
    kernel: &[f64],
    n: usize,
    t: usize,
    c: usize,
    k: usize,
    out: &mut [f64],
) {
    let half = (k / 2) as isize;
    for s in 0..n {
        for ti in 0..t {
            for j in 0..k {
                let src = ti as isize + j as isize - half;
                if src < 0 || src >= t as isize {
                    continue;
                }
                let xo = (s * t + src as usize) * c;
                let oo = (s * t + ti) * c;
                for ch in 0..c {
                    out[oo + ch] += kernel[j * c + ch] * x[xo + ch];
                }
            }
        }
    }
}

pub(crate) fn depthwise_conv_grad_input(
    g: &[f64],
    kernel: &[f64],
    n: usize,
    t: usize,
    c: usize,
    k: usize,
    gx: &mut [f64],
) {
    let half = (k / 2) as isize;
    for s in 0..n {
        for ti in 0..t {
            for j in 0..k {
                let src = ti as isize + j as isize - half;
                if src < 0 || src >= t as isize {
                    continue;
                }
                let xo = (s * t + src as usize) * c;
                let oo = (s * t + ti) * c;
                for ch in 0..c {
                    gx[xo + ch] += kernel[j * c + ch] * g[oo + ch];
                }
            }
        }
    }
}

pub(crate) fn depthwise_conv_grad_kernel(
    g: &[f64],
    x: &[f64],
    n: usize,
    t: usize,
    c: usize,
    k: usize,
    gk: &mut [f64],
) {
    let half = (k / 2) as isize;
    for s in 0..n {
        for ti in 0..t {
            for j in 0..k {
                let src = ti as isize + j as isize - half;
                if src < 0 || src >= t as isize {
                    continue;
                }
                let xo = (s * t + src as usize) * c;
                let oo = (s * t + ti) * c;
                for ch in 0..c {
                    gk[j * c + ch] += x[xo + ch] * g[oo + ch];
                }
            }
        }
    }
}
