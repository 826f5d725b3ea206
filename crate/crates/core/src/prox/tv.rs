//! Direct 1-D total variation denoising.
//!
//! Solves `min_x ½‖x − y‖² + λ Σ_i |x_{i+1} − x_i|` exactly in a single
//! forward pass, following Condat's direct algorithm. The pass tracks the
//! admissible range `[vmin, vmax]` of the current segment value together with
//! the dual variables at both ends of that range, and emits a segment as soon
//! as extending it would violate the dual box constraint `|u| ≤ λ`.

/// Total variation denoising of `input` with weight `lambda`, written to `output`.
pub fn tv_denoise_into(input: &[f64], lambda: f64, output: &mut [f64]) {
    let n = input.len();
    assert_eq!(output.len(), n, "output length must match input length");
    if n == 0 {
        return;
    }
    if lambda <= 0.0 || n == 1 {
        output.copy_from_slice(input);
        return;
    }

    let twolambda = 2.0 * lambda;
    let minlambda = -lambda;
    let mut k = 0usize;
    let mut k0 = 0usize;
    let mut kplus = 0usize;
    let mut kminus = 0usize;
    let mut umin = lambda;
    let mut umax = minlambda;
    let mut vmin = input[0] - lambda;
    let mut vmax = input[0] + lambda;

    loop {
        while k == n - 1 {
            if umin < 0.0 {
                // vmin is too high: the segment ends with a negative jump
                while k0 <= kminus {
                    output[k0] = vmin;
                    k0 += 1;
                }
                k = k0;
                kminus = k0;
                vmin = input[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                // vmax is too low: positive jump
                while k0 <= kplus {
                    output[k0] = vmax;
                    k0 += 1;
                }
                k = k0;
                kplus = k0;
                vmax = input[k0];
                umax = minlambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                while k0 <= k {
                    output[k0] = vmin;
                    k0 += 1;
                }
                return;
            }
        }

        umin += input[k + 1] - vmin;
        if umin < minlambda {
            while k0 <= kminus {
                output[k0] = vmin;
                k0 += 1;
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = input[k0];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }

        umax += input[k + 1] - vmax;
        if umax > lambda {
            while k0 <= kplus {
                output[k0] = vmax;
                k0 += 1;
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = input[k0];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }

        k += 1;
        if umin >= lambda {
            kminus = k;
            vmin += (umin - lambda) / (kminus - k0 + 1) as f64;
            umin = lambda;
        }
        if umax <= minlambda {
            kplus = k;
            vmax += (umax + lambda) / (kplus - k0 + 1) as f64;
            umax = minlambda;
        }
    }
}

pub fn tv_denoise(input: &[f64], lambda: f64) -> Vec<f64> {
    let mut out = vec![0.0; input.len()];
    tv_denoise_into(input, lambda, &mut out);
    out
}

/// Sum of absolute first differences.
pub fn tv_seminorm(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}
