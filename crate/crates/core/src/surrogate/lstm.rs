//! Gated recurrent cell with a sigmoid read-out, plus full backpropagation
//! through time for a single sequence.
//!
//! Parameters live in one flat buffer so gradient accumulation, clipping and
//! updates are plain slice arithmetic. Per gate (input, forget, output,
//! candidate) the layout is `W_x (H x I)`, `W_h (H x H)`, `b (H)`, all row-major;
//! the output head `w_y (H)` and `b_y` follow the four gates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RvlError};

pub const GATE_NAMES: [&str; 4] = ["input", "forget", "output", "candidate"];
const FORGET: usize = 1;
const CANDIDATE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentModel {
    pub input_size: usize,
    pub hidden_size: usize,
    pub params: Vec<f64>,
}

/// Hidden and cell vectors carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct CarriedState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CarriedState {
    pub fn zeros(hidden_size: usize) -> Self {
        Self {
            h: vec![0.0; hidden_size],
            c: vec![0.0; hidden_size],
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn param_count(input_size: usize, hidden_size: usize) -> usize {
    4 * gate_block(input_size, hidden_size) + hidden_size + 1
}

fn gate_block(input_size: usize, hidden_size: usize) -> usize {
    hidden_size * input_size + hidden_size * hidden_size + hidden_size
}

impl RecurrentModel {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            input_size,
            hidden_size,
            params: vec![0.0; param_count(input_size, hidden_size)],
        }
    }

    /// Uniform(-0.08, 0.08) weights with the forget-gate bias at +1.
    pub fn init<R: Rng>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(input_size, hidden_size);
        for p in m.params.iter_mut() {
            *p = rng.gen_range(-0.08..0.08);
        }
        let b = m.bias_offset(FORGET);
        m.params[b..b + hidden_size].fill(1.0);
        m
    }

    pub fn validate(&self) -> Result<()> {
        let expected = param_count(self.input_size, self.hidden_size);
        if self.params.len() != expected {
            return Err(RvlError::Shape {
                what: "parameter buffer",
                expected,
                actual: self.params.len(),
            });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(RvlError::InvalidParameter(
                "model contains non-finite weights".into(),
            ));
        }
        Ok(())
    }

    fn wx_offset(&self, gate: usize) -> usize {
        gate * gate_block(self.input_size, self.hidden_size)
    }

    fn wh_offset(&self, gate: usize) -> usize {
        self.wx_offset(gate) + self.hidden_size * self.input_size
    }

    fn bias_offset(&self, gate: usize) -> usize {
        self.wh_offset(gate) + self.hidden_size * self.hidden_size
    }

    fn head_offset(&self) -> usize {
        4 * gate_block(self.input_size, self.hidden_size)
    }

    /// Named views of every tensor, in storage order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let (i, h) = (self.input_size, self.hidden_size);
        let mut out = Vec::with_capacity(14);
        for (g, name) in GATE_NAMES.iter().enumerate() {
            let wx = self.wx_offset(g);
            let wh = self.wh_offset(g);
            let b = self.bias_offset(g);
            out.push((format!("w_x_{name}"), &self.params[wx..wx + h * i]));
            out.push((format!("w_h_{name}"), &self.params[wh..wh + h * h]));
            out.push((format!("b_{name}"), &self.params[b..b + h]));
        }
        let head = self.head_offset();
        out.push(("w_y".to_string(), &self.params[head..head + h]));
        out.push(("b_y".to_string(), &self.params[head + h..head + h + 1]));
        out
    }

    /// Rebuild from named tensors, checking every shape.
    pub fn from_tensors(
        input_size: usize,
        hidden_size: usize,
        tensors: &[(String, Vec<f64>)],
    ) -> Result<Self> {
        let mut m = Self::zeros(input_size, hidden_size);
        let layout: Vec<(String, usize)> = m
            .tensors()
            .into_iter()
            .map(|(n, s)| (n, s.len()))
            .collect();
        if tensors.len() != layout.len() {
            return Err(RvlError::Shape {
                what: "tensor count",
                expected: layout.len(),
                actual: tensors.len(),
            });
        }
        let mut offset = 0;
        for ((name, len), (got_name, values)) in layout.iter().zip(tensors) {
            if name != got_name {
                return Err(RvlError::InvalidParameter(format!(
                    "expected tensor {name}, found {got_name}"
                )));
            }
            if values.len() != *len {
                return Err(RvlError::Shape {
                    what: "tensor length",
                    expected: *len,
                    actual: values.len(),
                });
            }
            m.params[offset..offset + len].copy_from_slice(values);
            offset += len;
        }
        m.validate()?;
        Ok(m)
    }

    fn check_dims(&self, x: &[f64], carry: &CarriedState) -> Result<()> {
        if x.len() != self.input_size {
            return Err(RvlError::Shape {
                what: "input vector",
                expected: self.input_size,
                actual: x.len(),
            });
        }
        if carry.h.len() != self.hidden_size || carry.c.len() != self.hidden_size {
            return Err(RvlError::Shape {
                what: "carried state",
                expected: self.hidden_size,
                actual: carry.h.len().min(carry.c.len()),
            });
        }
        Ok(())
    }

    /// One cell update followed by the sigmoid read-out.
    pub fn forward_step(&self, x: &[f64], carry: &CarriedState) -> Result<(f64, CarriedState)> {
        self.check_dims(x, carry)?;
        let mut next = carry.clone();
        let mut gates = vec![0.0; 4 * self.hidden_size];
        let y = self.step_in_place(x, &mut next, &mut gates);
        Ok((y, next))
    }

    /// Unchecked in-place step. `gates` is scratch space of length `4 H` and
    /// holds the activated gate values afterwards.
    pub(crate) fn step_in_place(&self, x: &[f64], carry: &mut CarriedState, gates: &mut [f64]) -> f64 {
        let (ni, nh) = (self.input_size, self.hidden_size);
        let p = &self.params;
        for g in 0..4 {
            let wx = self.wx_offset(g);
            let wh = self.wh_offset(g);
            let b = self.bias_offset(g);
            for j in 0..nh {
                let mut z = p[b + j];
                let row_x = &p[wx + j * ni..wx + (j + 1) * ni];
                for (w, xi) in row_x.iter().zip(x) {
                    z += w * xi;
                }
                let row_h = &p[wh + j * nh..wh + (j + 1) * nh];
                for (w, hk) in row_h.iter().zip(&carry.h) {
                    z += w * hk;
                }
                gates[g * nh + j] = if g == CANDIDATE { z.tanh() } else { sigmoid(z) };
            }
        }
        let head = self.head_offset();
        let mut out = p[head + nh];
        for j in 0..nh {
            let i = gates[j];
            let f = gates[nh + j];
            let o = gates[2 * nh + j];
            let g = gates[3 * nh + j];
            let c = f * carry.c[j] + i * g;
            carry.c[j] = c;
            carry.h[j] = o * c.tanh();
            out += p[head + j] * carry.h[j];
        }
        sigmoid(out)
    }

    /// Mean-squared error of one sequence and its gradient, accumulated into
    /// `grad`. `inputs` is `T x I` row-major and `targets` has `T` entries; the
    /// sequence starts from a zero carried state.
    pub fn sequence_loss_grad(&self, inputs: &[f64], targets: &[f64], grad: &mut [f64]) -> f64 {
        let (ni, nh) = (self.input_size, self.hidden_size);
        let t_len = targets.len();
        debug_assert_eq!(inputs.len(), t_len * ni);
        debug_assert_eq!(grad.len(), self.params.len());
        let p = &self.params;

        // forward, caching everything backward needs
        let mut hs = vec![0.0; (t_len + 1) * nh];
        let mut cs = vec![0.0; (t_len + 1) * nh];
        let mut gates = vec![0.0; t_len * 4 * nh];
        let mut outputs = vec![0.0; t_len];
        let mut carry = CarriedState::zeros(nh);
        for t in 0..t_len {
            let x = &inputs[t * ni..(t + 1) * ni];
            outputs[t] = self.step_in_place(x, &mut carry, &mut gates[t * 4 * nh..(t + 1) * 4 * nh]);
            hs[(t + 1) * nh..(t + 2) * nh].copy_from_slice(&carry.h);
            cs[(t + 1) * nh..(t + 2) * nh].copy_from_slice(&carry.c);
        }
        let scale = 1.0 / t_len as f64;
        let loss = outputs
            .iter()
            .zip(targets)
            .map(|(y, t)| (y - t) * (y - t))
            .sum::<f64>()
            * scale;

        // backward
        let head = self.head_offset();
        let mut dh_next = vec![0.0; nh];
        let mut dc_next = vec![0.0; nh];
        let mut dz = vec![0.0; 4 * nh];
        let mut dh_prev = vec![0.0; nh];
        for t in (0..t_len).rev() {
            let y = outputs[t];
            let dy = 2.0 * (y - targets[t]) * scale;
            let dout = dy * y * (1.0 - y);
            let h = &hs[(t + 1) * nh..(t + 2) * nh];
            let c = &cs[(t + 1) * nh..(t + 2) * nh];
            let c_prev = &cs[t * nh..(t + 1) * nh];
            let h_prev = &hs[t * nh..(t + 1) * nh];
            let gt = &gates[t * 4 * nh..(t + 1) * 4 * nh];
            grad[head + nh] += dout;
            for j in 0..nh {
                grad[head + j] += dout * h[j];
                let dh = dout * p[head + j] + dh_next[j];
                let (i, f, o, g) = (gt[j], gt[nh + j], gt[2 * nh + j], gt[3 * nh + j]);
                let tc = c[j].tanh();
                let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                dz[j] = dc * g * i * (1.0 - i);
                dz[nh + j] = dc * c_prev[j] * f * (1.0 - f);
                dz[2 * nh + j] = dh * tc * o * (1.0 - o);
                dz[3 * nh + j] = dc * i * (1.0 - g * g);
                dc_next[j] = dc * f;
            }
            dh_prev.fill(0.0);
            let x = &inputs[t * ni..(t + 1) * ni];
            for gate in 0..4 {
                let wx = self.wx_offset(gate);
                let wh = self.wh_offset(gate);
                let b = self.bias_offset(gate);
                for j in 0..nh {
                    let d = dz[gate * nh + j];
                    if d == 0.0 {
                        continue;
                    }
                    grad[b + j] += d;
                    for (k, xi) in x.iter().enumerate() {
                        grad[wx + j * ni + k] += d * xi;
                    }
                    let row = wh + j * nh;
                    for k in 0..nh {
                        grad[row + k] += d * h_prev[k];
                        dh_prev[k] += p[row + k] * d;
                    }
                }
            }
            std::mem::swap(&mut dh_next, &mut dh_prev);
        }
        loss
    }

    /// Loss only, no gradient.
    pub fn sequence_loss(&self, inputs: &[f64], targets: &[f64]) -> f64 {
        let ni = self.input_size;
        let mut carry = CarriedState::zeros(self.hidden_size);
        let mut gates = vec![0.0; 4 * self.hidden_size];
        let mut total = 0.0;
        for (t, target) in targets.iter().enumerate() {
            let y = self.step_in_place(&inputs[t * ni..(t + 1) * ni], &mut carry, &mut gates);
            total += (y - target) * (y - target);
        }
        total / targets.len() as f64
    }
}
