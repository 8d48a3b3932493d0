//! Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! The integrator works on flat `Vec<f64>` states. Two hooks allow the
//! callers to stay on a constraint manifold (`project`, applied after every
//! accepted step) and to veto steps on extra criteria (`accept`, consulted
//! before a step is committed; a veto halves the step).

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-12, atol: 1e-12, h_init: 1e-3, h_min: 1e-14, h_max: f64::INFINITY, max_steps: 200_000 }
    }
}

/// Dense-output coefficients for one accepted step.
#[derive(Debug, Clone)]
struct StepPoly {
    t0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl StepPoly {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        for i in 0..out.len() {
            out[i] =
                self.r[0][i] + th * (self.r[1][i] + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])));
        }
    }
}

/// Accepted step points plus the continuous extension between them.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    polys: Vec<StepPoly>,
}

impl DenseSolution {
    /// The trivial solution sitting at `y` for t = t0.
    pub fn constant(t0: f64, y: &[f64]) -> Self {
        DenseSolution { t: vec![t0], y: vec![y.to_vec()], polys: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.y.first().map_or(0, |v| v.len())
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn last(&self) -> &[f64] {
        self.y.last().unwrap()
    }

    /// Evaluates the interpolant at `t` (clamped to the integrated span).
    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        if self.polys.is_empty() || t <= self.t[0] {
            out.copy_from_slice(&self.y[0]);
            return out;
        }
        if t >= self.t_end() {
            out.copy_from_slice(self.last());
            return out;
        }
        let idx = match self.t.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => {
                out.copy_from_slice(&self.y[i]);
                return out;
            }
            Err(i) => i - 1,
        };
        self.polys[idx].eval(t, &mut out);
        out
    }
}

fn err_norm(y0: &[f64], y1: &[f64], e: &[f64], opts: &OdeOptions) -> f64 {
    let mut s = 0.0;
    for i in 0..y0.len() {
        let sc = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        let r = e[i] / sc;
        s += r * r;
    }
    (s / y0.len().max(1) as f64).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`.
pub fn integrate<F>(f: F, t0: f64, t1: f64, y0: &[f64], opts: &OdeOptions) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_with(f, |_| {}, |_, _| true, t0, t1, y0, opts)
}

/// Integrates with a projection hook and an acceptance veto.
pub fn integrate_with<F, P, A>(
    mut f: F,
    mut project: P,
    mut accept: A,
    t0: f64,
    t1: f64,
    y0: &[f64],
    opts: &OdeOptions,
) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    P: FnMut(&mut [f64]),
    A: FnMut(&[f64], &[f64]) -> bool,
{
    let n = y0.len();
    let mut sol = DenseSolution { t: vec![t0], y: vec![y0.to_vec()], polys: Vec::new() };
    if t1 <= t0 {
        return Ok(sol);
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = opts.h_init.min(t1 - t0).min(opts.h_max);
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];
    f(t, &y, &mut k1);
    let mut steps = 0usize;
    while t < t1 {
        if steps >= opts.max_steps {
            return Err(Error::Integration(format!("exceeded {} steps at t = {t}", opts.max_steps)));
        }
        steps += 1;
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, &tmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + h, &ynew, &mut k7);
        for i in 0..n {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = err_norm(&y, &ynew, &err, opts);
        if en.is_finite() && en <= 1.0 {
            let mut yproj = ynew.clone();
            project(&mut yproj);
            if !accept(&y, &yproj) {
                h *= 0.5;
                if h < opts.h_min {
                    return Err(Error::Stiffness { t, h });
                }
                continue;
            }
            let mut r: [Vec<f64>; 5] = Default::default();
            r[0] = y.clone();
            r[1] = (0..n).map(|i| ynew[i] - y[i]).collect();
            r[2] = (0..n).map(|i| h * k1[i] - r[1][i]).collect();
            r[3] = (0..n).map(|i| r[1][i] - h * k7[i] - r[2][i]).collect();
            r[4] = (0..n)
                .map(|i| h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]))
                .collect();
            sol.polys.push(StepPoly { t0: t, h, r });
            t = if last { t1 } else { t + h };
            let moved = yproj != ynew;
            y.copy_from_slice(&yproj);
            sol.t.push(t);
            sol.y.push(y.clone());
            if moved {
                f(t, &y, &mut k1);
            } else {
                k1.copy_from_slice(&k7);
            }
            let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(opts.h_max);
        } else {
            let fac = if en.is_finite() { (0.9 * en.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= fac;
            if h < opts.h_min {
                return Err(Error::Stiffness { t, h });
            }
        }
    }
    Ok(sol)
}

/// Runs a stepper that can stop early: `stop` is consulted after each
/// accepted step with (t, y) and ends integration when it returns true.
pub fn integrate_until<F, P, A, S>(
    mut f: F,
    project: P,
    accept: A,
    mut stop: S,
    t0: f64,
    t_max: f64,
    y0: &[f64],
    opts: &OdeOptions,
) -> Result<(DenseSolution, bool)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    P: FnMut(&mut [f64]),
    A: FnMut(&[f64], &[f64]) -> bool,
    S: FnMut(f64, &[f64]) -> bool,
{
    // Integrate in chunks so that `stop` sees every accepted step without
    // threading a callback through the inner loop.
    let mut project = project;
    let mut accept = accept;
    let mut stopped = false;
    let mut full = DenseSolution { t: vec![t0], y: vec![y0.to_vec()], polys: Vec::new() };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut chunk_opts = *opts;
    let chunk = ((t_max - t0) / 64.0).max(1e-3);
    while t < t_max && !stopped {
        let t_next = (t + chunk).min(t_max);
        let part = integrate_with(&mut f, &mut project, &mut accept, t, t_next, &y, &chunk_opts)?;
        // last accepted step size is a good start for the next chunk
        if part.t.len() >= 2 {
            let k = part.t.len();
            chunk_opts.h_init = (part.t[k - 1] - part.t[k - 2]).max(opts.h_min * 10.0);
        }
        for (i, ti) in part.t.iter().enumerate().skip(1) {
            full.t.push(*ti);
            full.y.push(part.y[i].clone());
            full.polys.push(part.polys[i - 1].clone());
            if stop(*ti, &part.y[i]) {
                stopped = true;
                break;
            }
        }
        t = *full.t.last().unwrap();
        y = full.y.last().unwrap().clone();
    }
    Ok((full, stopped))
}
