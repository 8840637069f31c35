//! Single-layer LSTM with a dense sigmoid head: forward pass and BPTT.
//!
//! Gate pre-activations are `z = W x_t + U h_{t-1} + b`, stacked as
//! `[input, forget, cell, output]` blocks of `hidden` rows each.

use rand::Rng;

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub input: usize,
    pub hidden: usize,
}

impl Layout {
    pub fn w(&self) -> std::ops::Range<usize> {
        0..4 * self.hidden * self.input
    }
    pub fn u(&self) -> std::ops::Range<usize> {
        let s = self.w().end;
        s..s + 4 * self.hidden * self.hidden
    }
    pub fn b(&self) -> std::ops::Range<usize> {
        let s = self.u().end;
        s..s + 4 * self.hidden
    }
    pub fn head_w(&self) -> std::ops::Range<usize> {
        let s = self.b().end;
        s..s + self.hidden
    }
    pub fn head_b(&self) -> usize {
        self.head_w().end
    }
    pub fn len(&self) -> usize {
        self.head_b() + 1
    }

    /// Uniform ±1/√fan_in weights, zero biases except forget gate = 1.
    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.len()];
        let gate_bound = 1.0 / ((self.input + self.hidden) as f64).sqrt();
        let head_bound = 1.0 / (self.hidden as f64).sqrt();
        for v in &mut p[self.w()] {
            *v = rng.gen_range(-gate_bound..gate_bound);
        }
        for v in &mut p[self.u()] {
            *v = rng.gen_range(-gate_bound..gate_bound);
        }
        let b = self.b();
        for v in &mut p[b.start + self.hidden..b.start + 2 * self.hidden] {
            *v = 1.0;
        }
        for v in &mut p[self.head_w()] {
            *v = rng.gen_range(-head_bound..head_bound);
        }
        p
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Per-step activations kept for the backward pass.
pub(crate) struct Trace {
    steps: usize,
    hidden: usize,
    /// gates[t] = [i, f, g, o] each `hidden` long
    gates: Vec<f64>,
    /// c[t + 1] is the cell after step t; c[0] = 0
    c: Vec<f64>,
    h: Vec<f64>,
}

impl Trace {
    pub fn last_hidden(&self) -> &[f64] {
        &self.h[self.steps * self.hidden..]
    }
}

/// Runs the recurrence over one sequence (`steps × input`, row-major).
pub(crate) fn run(layout: &Layout, p: &[f64], x: &[f64]) -> Trace {
    let (d, hn) = (layout.input, layout.hidden);
    let steps = x.len() / d;
    let w = &p[layout.w()];
    let u = &p[layout.u()];
    let b = &p[layout.b()];
    let mut gates = vec![0.0; steps * 4 * hn];
    let mut c = vec![0.0; (steps + 1) * hn];
    let mut h = vec![0.0; (steps + 1) * hn];
    let mut z = vec![0.0; 4 * hn];
    for t in 0..steps {
        let xt = &x[t * d..(t + 1) * d];
        let hp = &h[t * hn..(t + 1) * hn];
        for r in 0..4 * hn {
            let mut acc = b[r];
            for k in 0..d {
                acc += w[r * d + k] * xt[k];
            }
            let ur = &u[r * hn..(r + 1) * hn];
            for k in 0..hn {
                acc += ur[k] * hp[k];
            }
            z[r] = acc;
        }
        let g = &mut gates[t * 4 * hn..(t + 1) * 4 * hn];
        for k in 0..hn {
            g[k] = sigmoid(z[k]);
            g[hn + k] = sigmoid(z[hn + k]);
            g[2 * hn + k] = z[2 * hn + k].tanh();
            g[3 * hn + k] = sigmoid(z[3 * hn + k]);
        }
        for k in 0..hn {
            let ct = g[hn + k] * c[t * hn + k] + g[k] * g[2 * hn + k];
            c[(t + 1) * hn + k] = ct;
            h[(t + 1) * hn + k] = g[3 * hn + k] * ct.tanh();
        }
    }
    Trace {
        steps,
        hidden: hn,
        gates,
        c,
        h,
    }
}

/// Head logit for a final hidden state after applying `mask` (inverted dropout factors).
pub(crate) fn logit(layout: &Layout, p: &[f64], h_last: &[f64], mask: Option<&[f64]>) -> f64 {
    let hw = &p[layout.head_w()];
    let mut acc = p[layout.head_b()];
    for k in 0..layout.hidden {
        let m = mask.map_or(1.0, |m| m[k]);
        acc += hw[k] * m * h_last[k];
    }
    acc
}

/// Binary cross-entropy of a logit, numerically stable.
pub(crate) fn bce(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

/// Accumulates `d loss / d params` into `grad` for one sequence, where
/// `dlogit` is the loss derivative with respect to the head logit.
pub(crate) fn backward(
    layout: &Layout,
    p: &[f64],
    x: &[f64],
    trace: &Trace,
    mask: Option<&[f64]>,
    dlogit: f64,
    grad: &mut [f64],
) {
    let (d, hn) = (layout.input, layout.hidden);
    let steps = trace.steps;
    let hw_range = layout.head_w();
    let h_last = trace.last_hidden();

    let mut dh = vec![0.0; hn];
    for k in 0..hn {
        let m = mask.map_or(1.0, |m| m[k]);
        grad[hw_range.start + k] += dlogit * m * h_last[k];
        dh[k] = dlogit * p[hw_range.start + k] * m;
    }
    grad[layout.head_b()] += dlogit;

    let u = &p[layout.u()];
    let (w0, u0, b0) = (layout.w().start, layout.u().start, layout.b().start);
    let mut dc_next = vec![0.0; hn];
    let mut dz = vec![0.0; 4 * hn];
    for t in (0..steps).rev() {
        let g = &trace.gates[t * 4 * hn..(t + 1) * 4 * hn];
        let c_prev = &trace.c[t * hn..(t + 1) * hn];
        let c_cur = &trace.c[(t + 1) * hn..(t + 2) * hn];
        for k in 0..hn {
            let (i, f, gg, o) = (g[k], g[hn + k], g[2 * hn + k], g[3 * hn + k]);
            let tc = c_cur[k].tanh();
            let d_o = dh[k] * tc;
            let dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
            dz[k] = dc * gg * i * (1.0 - i);
            dz[hn + k] = dc * c_prev[k] * f * (1.0 - f);
            dz[2 * hn + k] = dc * i * (1.0 - gg * gg);
            dz[3 * hn + k] = d_o * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        let xt = &x[t * d..(t + 1) * d];
        let hp = &trace.h[t * hn..(t + 1) * hn];
        for r in 0..4 * hn {
            let dzr = dz[r];
            for k in 0..d {
                grad[w0 + r * d + k] += dzr * xt[k];
            }
            let gu = &mut grad[u0 + r * hn..u0 + (r + 1) * hn];
            for k in 0..hn {
                gu[k] += dzr * hp[k];
            }
            grad[b0 + r] += dzr;
        }
        for k in 0..hn {
            let mut acc = 0.0;
            for r in 0..4 * hn {
                acc += u[r * hn + k] * dz[r];
            }
            dh[k] = acc;
        }
    }
}

/// Mean BCE over a batch and its gradient. `masks[i]` applies to sample
/// `rows[i]`; `None` disables dropout.
pub(crate) fn batch_loss_grad(
    layout: &Layout,
    p: &[f64],
    seqs: &[&[f64]],
    labels: &[f64],
    masks: Option<&[Vec<f64>]>,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let n = seqs.len() as f64;
    let mut loss = 0.0;
    for (i, (x, y)) in seqs.iter().zip(labels).enumerate() {
        let mask = masks.map(|m| m[i].as_slice());
        let trace = run(layout, p, x);
        let z = logit(layout, p, trace.last_hidden(), mask);
        loss += bce(z, *y);
        let dlogit = (sigmoid(z) - y) / n;
        backward(layout, p, x, &trace, mask, dlogit, grad);
    }
    loss / n
}

pub(crate) fn batch_loss(layout: &Layout, p: &[f64], seqs: &[&[f64]], labels: &[f64]) -> f64 {
    let total: f64 = seqs
        .iter()
        .zip(labels)
        .map(|(x, y)| {
            let trace = run(layout, p, x);
            bce(logit(layout, p, trace.last_hidden(), None), *y)
        })
        .sum();
    total / seqs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_counts_default_parameters() {
        let l = Layout { input: 1, hidden: 16 };
        assert_eq!(l.len(), 4 * (16 + 16 * 16 + 16) + 16 + 1);
        assert_eq!(l.len(), 1169);
    }

    #[test]
    fn forget_bias_initialised_to_one() {
        let l = Layout { input: 1, hidden: 4 };
        let p = l.init(&mut crate::rng::seeded(1));
        let b = &p[l.b()];
        assert_eq!(&b[4..8], &[1.0; 4]);
        assert!(b[..4].iter().chain(&b[8..]).all(|v| *v == 0.0));
        assert_eq!(p[l.head_b()], 0.0);
    }
}
