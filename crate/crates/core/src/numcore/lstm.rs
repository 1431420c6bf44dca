//! Non-peephole LSTM over padded batches with per-row true lengths.
//!
//! Gate rows of every weight are laid out as `[input | forget | cell | output]`,
//! each block `hidden` rows tall.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::numcore::init::{init_params, InitScheme};
use crate::numcore::linalg::{gemm, Op};
use crate::numcore::{Rng, Tensor};

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    /// `[4H × D_in]`
    pub w_x: Tensor,
    /// `[4H × H]`
    pub w_h: Tensor,
    /// `[4H]`
    pub b: Tensor,
    pub hidden: usize,
}

impl LstmParams {
    pub fn new(w_x: Tensor, w_h: Tensor, b: Tensor) -> Result<Self> {
        if w_h.rank() != 2 || w_h.dim(0) != 4 * w_h.dim(1) {
            bail!(Shape, "recurrent weight must be [4H x H], got {:?}", w_h.shape());
        }
        let hidden = w_h.dim(1);
        let p = Self { w_x, w_h, b, hidden };
        p.validate()?;
        Ok(p)
    }

    /// Glorot-uniform weights, zero biases except the forget block at `forget_bias`.
    pub fn init(d_in: usize, hidden: usize, forget_bias: f64, rng: &mut Rng) -> Result<Self> {
        let w_x = init_params(&[4 * hidden, d_in], InitScheme::UniformGlorot, rng)?;
        let w_h = init_params(&[4 * hidden, hidden], InitScheme::UniformGlorot, rng)?;
        let mut b = Tensor::zeros(&[4 * hidden])?;
        b.data_mut()[hidden..2 * hidden].fill(forget_bias);
        Self::new(w_x, w_h, b)
    }

    pub fn validate(&self) -> Result<()> {
        let g = 4 * self.hidden;
        if self.w_x.rank() != 2 || self.w_x.dim(0) != g {
            bail!(Shape, "input weight must be [{g} x D_in], got {:?}", self.w_x.shape());
        }
        self.w_h.expect_shape(&[g, self.hidden], "recurrent weight")?;
        self.b.expect_shape(&[g], "lstm bias")
    }

    pub fn d_in(&self) -> usize {
        self.w_x.dim(1)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w_x: Tensor::zeros(self.w_x.shape()).expect("valid shape"),
            w_h: Tensor::zeros(self.w_h.shape()).expect("valid shape"),
            b: Tensor::zeros(self.b.shape()).expect("valid shape"),
            hidden: self.hidden,
        }
    }

    /// One cell update for a single example.
    pub fn step(&self, x: &Tensor, h_prev: &Tensor, c_prev: &Tensor) -> Result<(Tensor, Tensor)> {
        let h = self.hidden;
        x.expect_shape(&[self.d_in()], "lstm input")?;
        h_prev.expect_shape(&[h], "previous hidden state")?;
        c_prev.expect_shape(&[h], "previous cell state")?;
        let mut gates = vec![0.0; 4 * h];
        self.gates(1, x.data(), h_prev.data(), &mut gates);
        let mut c = c_prev.data().to_vec();
        let mut tanh_c = vec![0.0; h];
        let mut out = vec![0.0; h];
        cell_update(h, &gates, &mut c, &mut tanh_c, &mut out);
        Ok((Tensor::vector(&out), Tensor::vector(&c)))
    }

    /// Activated gates `[i | f | g | o]` for `rows` examples.
    fn gates(&self, rows: usize, x: &[f64], h_prev: &[f64], out: &mut [f64]) {
        let g = 4 * self.hidden;
        gemm(rows, self.d_in(), g, 1.0, x, Op::N, self.w_x.data(), Op::T, 0.0, out);
        gemm(rows, self.hidden, g, 1.0, h_prev, Op::N, self.w_h.data(), Op::T, 1.0, out);
        let h = self.hidden;
        for row in out.chunks_exact_mut(g) {
            for (v, b) in row.iter_mut().zip(self.b.data()) {
                *v += b;
            }
            let (ifg, o) = row.split_at_mut(3 * h);
            let (i_f, cand) = ifg.split_at_mut(2 * h);
            i_f.iter_mut().for_each(|v| *v = sigmoid(*v));
            cand.iter_mut().for_each(|v| *v = libm::tanh(*v));
            o.iter_mut().for_each(|v| *v = sigmoid(*v));
        }
    }

    /// Runs the LSTM over `xs: [B × L × D_in]`, row `b` covering positions
    /// `0..lengths[b]` only. `reverse` walks each row from its last real
    /// position back to 0.
    pub fn run(&self, xs: &Tensor, lengths: &[usize], reverse: bool) -> Result<LstmTrace> {
        let (batch, steps, d_in) = match xs.shape() {
            [b, l, d] => (*b, *l, *d),
            other => bail!(Shape, "lstm input must be [B x L x D], got {other:?}"),
        };
        if d_in != self.d_in() {
            bail!(Shape, "lstm input width {d_in}, parameters expect {}", self.d_in());
        }
        if lengths.len() != batch {
            bail!(Shape, "{} lengths for batch of {batch}", lengths.len());
        }
        if let Some(&len) = lengths.iter().find(|&&len| len > steps) {
            bail!(Shape, "length {len} exceeds padded length {steps}");
        }
        let h = self.hidden;
        let mut trace = LstmTrace {
            batch,
            steps,
            hidden: h,
            d_in,
            reverse,
            lengths: lengths.to_vec(),
            inputs: vec![0.0; steps * batch * d_in],
            gates: vec![0.0; steps * batch * 4 * h],
            cells: vec![0.0; steps * batch * h],
            tanh_cells: vec![0.0; steps * batch * h],
            hidden_states: vec![0.0; steps * batch * h],
        };
        let mut h_prev = vec![0.0; batch * h];
        let mut c_state = vec![0.0; batch * h];
        for s in 0..steps {
            let t = trace.position(s);
            let x_s = &mut trace.inputs[s * batch * d_in..(s + 1) * batch * d_in];
            for b in 0..batch {
                let src = (b * steps + t) * d_in;
                x_s[b * d_in..(b + 1) * d_in].copy_from_slice(&xs.data()[src..src + d_in]);
            }
            let gates = &mut trace.gates[s * batch * 4 * h..(s + 1) * batch * 4 * h];
            self.gates(batch, x_s, &h_prev, gates);
            let tanh_c = &mut trace.tanh_cells[s * batch * h..(s + 1) * batch * h];
            let h_out = &mut trace.hidden_states[s * batch * h..(s + 1) * batch * h];
            cell_update(h, gates, &mut c_state, tanh_c, h_out);
            for b in 0..batch {
                if t >= lengths[b] {
                    // padding: state stays at (and restarts from) zero
                    c_state[b * h..(b + 1) * h].fill(0.0);
                    h_out[b * h..(b + 1) * h].fill(0.0);
                    tanh_c[b * h..(b + 1) * h].fill(0.0);
                }
            }
            trace.cells[s * batch * h..(s + 1) * batch * h].copy_from_slice(&c_state);
            h_prev.copy_from_slice(h_out);
        }
        Ok(trace)
    }

    /// Backpropagates `d_out` (gradient w.r.t. the trace outputs, read from
    /// columns `offset..offset + H` of a `[B × L × width]` tensor) through
    /// time. Parameter gradients accumulate into `grads`; returns `dL/dxs`.
    pub fn backward(&self, trace: &LstmTrace, d_out: &Tensor, offset: usize, grads: &mut LstmParams) -> Result<Tensor> {
        let (batch, steps, h, d_in) = (trace.batch, trace.steps, trace.hidden, trace.d_in);
        let width = match d_out.shape() {
            [b, l, w] if *b == batch && *l == steps && offset + h <= *w => *w,
            other => bail!(Shape, "lstm output gradient {other:?} does not cover [{batch} x {steps} x {offset}+{h}]"),
        };
        let g = 4 * h;
        let mut dxs = vec![0.0; batch * steps * d_in];
        let mut dh_next = vec![0.0; batch * h];
        let mut dc_next = vec![0.0; batch * h];
        let mut da = vec![0.0; batch * g];
        let mut dx_s = vec![0.0; batch * d_in];
        let zeros = vec![0.0; batch * h];
        for s in (0..steps).rev() {
            let t = trace.position(s);
            let gates = &trace.gates[s * batch * g..(s + 1) * batch * g];
            let tanh_c = &trace.tanh_cells[s * batch * h..(s + 1) * batch * h];
            let (h_prev, c_prev) = if s == 0 {
                (&zeros[..], &zeros[..])
            } else {
                (
                    &trace.hidden_states[(s - 1) * batch * h..s * batch * h],
                    &trace.cells[(s - 1) * batch * h..s * batch * h],
                )
            };
            for b in 0..batch {
                let row = &mut da[b * g..(b + 1) * g];
                if t >= trace.lengths[b] {
                    row.fill(0.0);
                    dh_next[b * h..(b + 1) * h].fill(0.0);
                    dc_next[b * h..(b + 1) * h].fill(0.0);
                    continue;
                }
                let up = &d_out.data()[(b * steps + t) * width + offset..][..h];
                let gate = &gates[b * g..(b + 1) * g];
                for j in 0..h {
                    let (i, f, c_hat, o) = (gate[j], gate[h + j], gate[2 * h + j], gate[3 * h + j]);
                    let th = tanh_c[b * h + j];
                    let dh = up[j] + dh_next[b * h + j];
                    let dc = dh * o * (1.0 - th * th) + dc_next[b * h + j];
                    row[j] = dc * c_hat * i * (1.0 - i);
                    row[h + j] = dc * c_prev[b * h + j] * f * (1.0 - f);
                    row[2 * h + j] = dc * i * (1.0 - c_hat * c_hat);
                    row[3 * h + j] = dh * th * o * (1.0 - o);
                    dc_next[b * h + j] = dc * f;
                }
            }
            let x_s = &trace.inputs[s * batch * d_in..(s + 1) * batch * d_in];
            gemm(g, batch, d_in, 1.0, &da, Op::T, x_s, Op::N, 1.0, grads.w_x.data_mut());
            gemm(g, batch, h, 1.0, &da, Op::T, h_prev, Op::N, 1.0, grads.w_h.data_mut());
            for row in da.chunks_exact(g) {
                grads.b.data_mut().iter_mut().zip(row).for_each(|(gb, v)| *gb += v);
            }
            gemm(batch, g, d_in, 1.0, &da, Op::N, self.w_x.data(), Op::N, 0.0, &mut dx_s);
            gemm(batch, g, h, 1.0, &da, Op::N, self.w_h.data(), Op::N, 0.0, &mut dh_next);
            for b in 0..batch {
                let dst = (b * steps + t) * d_in;
                dxs[dst..dst + d_in].copy_from_slice(&dx_s[b * d_in..(b + 1) * d_in]);
            }
        }
        Tensor::from_vec(&[batch, steps, d_in], dxs)
    }
}

/// `c ← f⊙c + i⊙g`, `h = o⊙tanh(c)` for every row of `gates`.
fn cell_update(h: usize, gates: &[f64], c: &mut [f64], tanh_c: &mut [f64], out: &mut [f64]) {
    for (r, gate) in gates.chunks_exact(4 * h).enumerate() {
        for j in 0..h {
            let k = r * h + j;
            c[k] = gate[h + j] * c[k] + gate[j] * gate[2 * h + j];
            tanh_c[k] = libm::tanh(c[k]);
            out[k] = gate[3 * h + j] * tanh_c[k];
        }
    }
}

/// Forward cache of [`LstmParams::run`]; all buffers are indexed by
/// processing step, not by position.
#[derive(Clone, Debug)]
pub struct LstmTrace {
    batch: usize,
    steps: usize,
    hidden: usize,
    d_in: usize,
    reverse: bool,
    lengths: Vec<usize>,
    inputs: Vec<f64>,
    gates: Vec<f64>,
    cells: Vec<f64>,
    tanh_cells: Vec<f64>,
    hidden_states: Vec<f64>,
}

impl LstmTrace {
    fn position(&self, step: usize) -> usize {
        if self.reverse {
            self.steps - 1 - step
        } else {
            step
        }
    }

    /// Writes hidden outputs into columns `offset..offset + H` of a
    /// `[B × L × width]` buffer, in position order.
    pub fn write_outputs(&self, out: &mut [f64], width: usize, offset: usize) {
        let h = self.hidden;
        for s in 0..self.steps {
            let t = self.position(s);
            for b in 0..self.batch {
                let src = &self.hidden_states[(s * self.batch + b) * h..][..h];
                out[(b * self.steps + t) * width + offset..][..h].copy_from_slice(src);
            }
        }
    }

    pub fn outputs(&self) -> Tensor {
        let mut out = vec![0.0; self.batch * self.steps * self.hidden];
        self.write_outputs(&mut out, self.hidden, 0);
        Tensor::from_vec(&[self.batch, self.steps, self.hidden], out).expect("consistent trace")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_params(d_in: usize, hidden: usize) -> LstmParams {
        LstmParams::new(
            Tensor::zeros(&[4 * hidden, d_in]).unwrap(),
            Tensor::zeros(&[4 * hidden, hidden]).unwrap(),
            Tensor::zeros(&[4 * hidden]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_are_a_fixed_point() {
        let p = zero_params(3, 2);
        let (h, c) = p
            .step(&Tensor::vector(&[5.0, -1.0, 2.0]), &Tensor::zeros(&[2]).unwrap(), &Tensor::zeros(&[2]).unwrap())
            .unwrap();
        assert_eq!(h.data(), &[0.0, 0.0]);
        assert_eq!(c.data(), &[0.0, 0.0]);
    }

    #[test]
    fn zero_weights_halve_the_cell() {
        // every gate is sigmoid(0) = 0.5 and the candidate is tanh(0) = 0
        let p = zero_params(1, 1);
        let (h, c) = p.step(&Tensor::vector(&[0.3]), &Tensor::vector(&[0.0]), &Tensor::vector(&[1.0])).unwrap();
        assert!((c.data()[0] - 0.5).abs() < 1e-6);
        assert!((h.data()[0] - 0.231_058_6).abs() < 1e-6);
    }

    #[test]
    fn step_rejects_mismatched_state() {
        let p = zero_params(2, 3);
        let r = p.step(&Tensor::vector(&[0.0, 0.0]), &Tensor::zeros(&[2]).unwrap(), &Tensor::zeros(&[3]).unwrap());
        assert!(r.is_err());
    }

    #[test]
    fn run_matches_repeated_steps() {
        let mut rng = Rng::new(11);
        let p = LstmParams::init(3, 4, 1.0, &mut rng).unwrap();
        let xs = init_params(&[1, 5, 3], InitScheme::UniformGlorot, &mut rng).unwrap();
        for reverse in [false, true] {
            let trace = p.run(&xs, &[5], reverse).unwrap();
            let out = trace.outputs();
            let mut h = Tensor::zeros(&[4]).unwrap();
            let mut c = Tensor::zeros(&[4]).unwrap();
            let order: Vec<usize> = if reverse { (0..5).rev().collect() } else { (0..5).collect() };
            for t in order {
                let x = Tensor::vector(&xs.data()[t * 3..(t + 1) * 3]);
                (h, c) = p.step(&x, &h, &c).unwrap();
                assert!(out.row(0)[t * 4..(t + 1) * 4].iter().zip(h.data()).all(|(a, b)| (a - b).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn padding_positions_are_zero() {
        let mut rng = Rng::new(2);
        let p = LstmParams::init(2, 3, 1.0, &mut rng).unwrap();
        let xs = init_params(&[2, 4, 2], InitScheme::UniformGlorot, &mut rng).unwrap();
        for reverse in [false, true] {
            let out = p.run(&xs, &[4, 2], reverse).unwrap().outputs();
            assert!(out.row(1)[2 * 3..].iter().all(|&v| v == 0.0));
        }
    }
}
