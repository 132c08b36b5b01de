//! Fed-batch reactor model.
//!
//! Two reactions run in a stirred tank: `A + B -> C` (rate constant `k1`) and
//! `B + B -> D` (rate constant `k2`). Reactant A is charged up front, B is fed
//! at rate `u` with concentration `b_feed`, and the liquid volume grows with
//! the feed until it reaches the 1.0 cap.
//!
//! The by-product balance keeps the `2 k2 [B]^2` production term of the
//! published model, so the conserved species sum below is derived for that form.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RvlError};
use crate::fmt::sig10;

/// Volume ceiling of the reactor.
pub const VOLUME_CAP: f64 = 1.0;

/// Values that dip below zero by at most this much after an integration step
/// are clamped to zero.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactorState {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub v: f64,
}

impl ReactorState {
    /// Initial charge: 0.2 of A in 0.5 of liquid, no B, C or D.
    pub const INITIAL: ReactorState = ReactorState {
        a: 0.2,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        v: 0.5,
    };

    fn fields(&self) -> [(&'static str, f64); 5] {
        [
            ("A", self.a),
            ("B", self.b),
            ("C", self.c),
            ("D", self.d),
            ("V", self.v),
        ]
    }

    fn axpy(&self, h: f64, k: &ReactorDerivative) -> ReactorState {
        ReactorState {
            a: self.a + h * k.da,
            b: self.b + h * k.db,
            c: self.c + h * k.dc,
            d: self.d + h * k.dd,
            v: self.v + h * k.dv,
        }
    }

    /// `(C - D) * V`, the batch-quality objective.
    pub fn objective(&self) -> f64 {
        (self.c - self.d) * self.v
    }
}

impl Default for ReactorState {
    fn default() -> Self {
        Self::INITIAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticsParams {
    pub k1: f64,
    pub k2: f64,
    pub b_feed: f64,
    pub t_f: f64,
    pub dt_control: f64,
    pub n_substeps: usize,
}

impl Default for KineticsParams {
    fn default() -> Self {
        Self {
            k1: 0.5,
            k2: 0.5,
            b_feed: 0.2,
            t_f: 120.0,
            dt_control: 1.0,
            n_substeps: 10,
        }
    }
}

impl KineticsParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(RvlError::InvalidParameter(msg.to_string()));
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return bad("k1 and k2 must be positive");
        }
        if !(self.b_feed > 0.0) {
            return bad("b_feed must be positive");
        }
        if !(self.t_f > 0.0 && self.dt_control > 0.0) {
            return bad("t_f and dt_control must be positive");
        }
        let ratio = self.t_f / self.dt_control;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return bad("dt_control must divide t_f exactly");
        }
        if self.n_substeps == 0 {
            return bad("n_substeps must be at least 1");
        }
        Ok(())
    }

    /// Number of control intervals in one batch.
    pub fn n_steps(&self) -> usize {
        (self.t_f / self.dt_control).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReactorDerivative {
    pub da: f64,
    pub db: f64,
    pub dc: f64,
    pub dd: f64,
    pub dv: f64,
}

/// Right-hand side of the material balances.
pub fn derivatives(
    state: &ReactorState,
    u: f64,
    params: &KineticsParams,
) -> Result<ReactorDerivative> {
    let ReactorState { a, b, c, d, v } = *state;
    if v == 0.0 {
        return Err(RvlError::DegenerateVolume { volume: v });
    }
    let r1 = params.k1 * a * b;
    let r2 = 2.0 * params.k2 * b * b;
    let dilution = u / v;
    Ok(ReactorDerivative {
        da: -r1 - a * dilution,
        db: -r1 - r2 + (params.b_feed - b) * dilution,
        dc: r1 - c * dilution,
        dd: r2 - d * dilution,
        dv: u,
    })
}

/// Advance one control interval with classical RK4 using `n_substeps` substeps.
pub fn integrate_step(
    state: &ReactorState,
    u: f64,
    params: &KineticsParams,
) -> Result<ReactorState> {
    let h = params.dt_control / params.n_substeps as f64;
    let mut s = *state;
    for _ in 0..params.n_substeps {
        let k1 = derivatives(&s, u, params)?;
        let k2 = derivatives(&s.axpy(0.5 * h, &k1), u, params)?;
        let k3 = derivatives(&s.axpy(0.5 * h, &k2), u, params)?;
        let k4 = derivatives(&s.axpy(h, &k3), u, params)?;
        let w = h / 6.0;
        s = ReactorState {
            a: s.a + w * (k1.da + 2.0 * k2.da + 2.0 * k3.da + k4.da),
            b: s.b + w * (k1.db + 2.0 * k2.db + 2.0 * k3.db + k4.db),
            c: s.c + w * (k1.dc + 2.0 * k2.dc + 2.0 * k3.dc + k4.dc),
            d: s.d + w * (k1.dd + 2.0 * k2.dd + 2.0 * k3.dd + k4.dd),
            v: s.v + w * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv),
        };
        for (field, value) in s.fields() {
            if !value.is_finite() {
                return Err(RvlError::IntegrationDiverged { field });
            }
        }
    }
    clamp_small_negatives(s)
}

fn clamp_small_negatives(mut s: ReactorState) -> Result<ReactorState> {
    for (field, slot) in [
        ("A", &mut s.a),
        ("B", &mut s.b),
        ("C", &mut s.c),
        ("D", &mut s.d),
    ] {
        if *slot < 0.0 {
            if *slot < -CLAMP_TOLERANCE {
                return Err(RvlError::NegativeConcentration {
                    field,
                    value: *slot,
                });
            }
            *slot = 0.0;
        }
    }
    Ok(s)
}

/// Truncate the feed so the next interval fills the reactor at most to the cap.
pub fn apply_volume_cap(state: &ReactorState, u: f64, params: &KineticsParams) -> f64 {
    if state.v + u * params.dt_control <= VOLUME_CAP {
        u
    } else {
        ((VOLUME_CAP - state.v) / params.dt_control).max(0.0)
    }
}

/// Effective feed for `u` followed by one integration step.
pub fn control_step(
    state: &ReactorState,
    u: f64,
    params: &KineticsParams,
) -> Result<(f64, ReactorState)> {
    let u_eff = apply_volume_cap(state, u, params);
    let next = integrate_step(state, u_eff, params)?;
    Ok((u_eff, next))
}

/// One batch: `states` has one more entry than `controls`, which holds the
/// effective (cap-truncated) feed rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<ReactorState>,
    pub controls: Vec<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &ReactorState {
        self.states.last().expect("trajectory has an initial state")
    }

    pub fn c_series(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.c).collect()
    }

    pub fn d_series(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.d).collect()
    }

    /// CSV with header `t,u,A,B,C,D,V`. The final row carries the end state
    /// with an empty `u` since no control follows it.
    pub fn to_csv(&self, dt_control: f64) -> String {
        let mut out = String::from("t,u,A,B,C,D,V\n");
        for (i, s) in self.states.iter().enumerate() {
            let u = self.controls.get(i).map(|&u| sig10(u)).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                sig10(i as f64 * dt_control),
                u,
                sig10(s.a),
                sig10(s.b),
                sig10(s.c),
                sig10(s.d),
                sig10(s.v)
            ));
        }
        out
    }
}

/// Simulate a batch under a fixed control sequence.
pub fn simulate(
    controls: &[f64],
    params: &KineticsParams,
    initial: &ReactorState,
) -> Result<Trajectory> {
    let n = params.n_steps();
    if controls.len() != n {
        return Err(RvlError::LengthMismatch {
            left: controls.len(),
            right: n,
        });
    }
    simulate_with(params, initial, |t, _| controls[t])
}

/// Simulate a batch where `controller(t, history)` picks the feed for step `t`
/// given every state so far.
pub fn simulate_with<F>(
    params: &KineticsParams,
    initial: &ReactorState,
    mut controller: F,
) -> Result<Trajectory>
where
    F: FnMut(usize, &[ReactorState]) -> f64,
{
    let n = params.n_steps();
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    states.push(*initial);
    for t in 0..n {
        let current = states[t];
        let u = controller(t, &states);
        if !(u >= 0.0) {
            return Err(
                RvlError::InvalidParameter(format!("feed rate must be >= 0, got {u}")).at_step(t),
            );
        }
        let (u_eff, next) = control_step(&current, u, params).map_err(|e| e.at_step(t))?;
        controls.push(u_eff);
        states.push(next);
    }
    Ok(Trajectory { states, controls })
}
