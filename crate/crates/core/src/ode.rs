//! Adaptive Dormand–Prince 5(4) integration with output at prescribed nodes.
//!
//! Steps are clamped to land exactly on every output node, so node values
//! carry the full step accuracy instead of dense-output interpolation error.

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-13, h_min: 1e-12, max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    Completed,
    /// Stopped by the event predicate after reaching the given node index.
    Event { node: usize },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub stop: Stop,
    pub steps: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LOW: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Stepper {
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
}

impl Stepper {
    fn new(n: usize) -> Self {
        Self { k: vec![vec![0.0; n]; 7], tmp: vec![0.0; n] }
    }

    /// One trial step; returns (new state, scaled error norm).
    fn step<S: OdeSystem>(&mut self, sys: &S, t: f64, y: &[f64], h: f64, opts: &OdeOptions) -> (Vec<f64>, f64) {
        let n = y.len();
        sys.rhs(t, y, &mut self.k[0]);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, a) in A[s].iter().enumerate().take(s) {
                    acc += h * a * self.k[j][i];
                }
                self.tmp[i] = acc;
            }
            let (head, tail) = self.k.split_at_mut(s);
            let _ = head;
            sys.rhs(t + C[s] * h, &self.tmp, &mut tail[0]);
        }
        let mut y_new = vec![0.0; n];
        let mut err = 0.0;
        for i in 0..n {
            let mut hi = y[i];
            let mut e = 0.0;
            for s in 0..7 {
                hi += h * B[s] * self.k[s][i];
                e += h * (B[s] - B_LOW[s]) * self.k[s][i];
            }
            y_new[i] = hi;
            let sc = opts.atol + opts.rtol * y[i].abs().max(hi.abs());
            err += (e / sc).powi(2);
        }
        (y_new, (err / n as f64).sqrt())
    }
}

/// Integrate from `nodes[0]` with state `y0`, recording the state at every
/// node. `stop(node_index, t, y)` may end the run early after a node.
pub fn integrate<S: OdeSystem>(
    sys: &S,
    nodes: &[f64],
    y0: &[f64],
    opts: &OdeOptions,
    mut stop: impl FnMut(usize, f64, &[f64]) -> bool,
) -> Result<Trajectory> {
    if nodes.len() < 2 || nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("output nodes must be increasing".into()));
    }
    if y0.len() != sys.dim() {
        return Err(Error::InvalidParams("initial state has wrong dimension".into()));
    }
    let mut stepper = Stepper::new(y0.len());
    let mut t = nodes[0];
    let mut y = y0.to_vec();
    let mut ts = vec![t];
    let mut ys = vec![y.clone()];
    let mut h = (nodes[1] - nodes[0]).min(1e-3);
    let mut steps = 0usize;
    for (idx, &target) in nodes.iter().enumerate().skip(1) {
        while t < target {
            let last = target - t <= h * (1.0 + 1e-12);
            let h_try = if last { target - t } else { h };
            let (y_new, err) = stepper.step(sys, t, &y, h_try, opts);
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Integrator { r: t, reason: "step budget exhausted".into() });
            }
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                h = h_try * 0.25;
                if h < opts.h_min {
                    return Err(Error::Integrator { r: t, reason: "non-finite state".into() });
                }
                continue;
            }
            if err <= 1.0 {
                t = if last { target } else { t + h_try };
                y = y_new;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || factor < 1.0 {
                    h = h_try * factor;
                }
            } else {
                h = h_try * (0.9 * err.powf(-0.25)).clamp(0.1, 0.9);
                if h < opts.h_min {
                    return Err(Error::Integrator { r: t, reason: format!("step size collapsed to {h:.2e}") });
                }
            }
        }
        ts.push(target);
        ys.push(y.clone());
        if stop(idx, target, &y) {
            return Ok(Trajectory { t: ts, y: ys, stop: Stop::Event { node: idx }, steps });
        }
    }
    Ok(Trajectory { t: ts, y: ys, stop: Stop::Completed, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    #[test]
    fn harmonic_oscillator_to_high_accuracy() {
        let nodes: Vec<f64> = (0..=100).map(|i| i as f64 * 0.2).collect();
        let tr = integrate(&Oscillator, &nodes, &[1.0, 0.0], &OdeOptions::default(), |_, _, _| false).unwrap();
        for (t, y) in tr.t.iter().zip(&tr.y) {
            assert!((y[0] - t.cos()).abs() < 1e-8, "t={t}");
        }
        assert_eq!(tr.stop, Stop::Completed);
    }

    #[test]
    fn event_stops_early() {
        let nodes: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let tr = integrate(&Oscillator, &nodes, &[1.0, 0.0], &OdeOptions::default(), |_, _, y| y[0] < 0.0).unwrap();
        assert_eq!(tr.stop, Stop::Event { node: 16 });
    }
}
