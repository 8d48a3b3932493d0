use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::pathflow::energy::hessian;
use crate::pathflow::flow::{FieldSample, FlowSystem, PathSystem};
use crate::pathflow::path::WMetric;

/// Unstable directions at a rest point with dual covectors: for a state s
/// near the base, `duals[i]·log(base → s)` is its i-th unstable coordinate.
#[derive(Debug, Clone)]
pub struct Chart {
    pub eigenvalues: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
    pub duals: Vec<Vec<f64>>,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    pub fn coords(&self, log: &[f64]) -> Vec<f64> {
        self.duals.iter().map(|d| dot(d, log)).collect()
    }

    /// Reverses the orientation by flipping the first direction.
    pub fn flip(&mut self) {
        if let (Some(f), Some(d)) = (self.frame.first_mut(), self.duals.first_mut()) {
            f.iter_mut().for_each(|v| *v = -*v);
            d.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// A flow system whose rest points carry unstable charts.
pub trait MorseSystem: FlowSystem {
    fn chart(&self, s: &[f64]) -> Result<Chart>;
    /// Tangent representative of `other` seen from `base`.
    fn log(&self, base: &[f64], other: &[f64]) -> Vec<f64>;
    /// base displaced by `dir` (a tangent vector), back on the constraint set.
    fn displace(&self, base: &[f64], dir: &[f64]) -> Vec<f64>;
}

/// Sign-normalises a coordinate vector so its largest entry is positive.
fn orient(v: &mut [f64]) {
    let (mut big, mut at) = (0.0f64, 0usize);
    for (i, x) in v.iter().enumerate() {
        if x.abs() > big + 1e-12 {
            big = x.abs();
            at = i;
        }
    }
    if v[at] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

impl MorseSystem for PathSystem<'_> {
    /// Negative eigenvectors of the y-reduced Hessian S = Hₓₓ − Hₓᵧ Hᵧᵧ⁻¹ Hᵧₓ
    /// relative to the x-block of W; each direction carries its linear
    /// y response.
    fn chart(&self, s: &[f64]) -> Result<Chart> {
        if !self.cfg.relax_y {
            return Err(Error::Usage("unstable charts need the y-relaxed flow".into()));
        }
        let p = self.path(s);
        let frames = p.frames();
        let h = hessian(self.metric, &p, 0.0, &frames);
        let w = WMetric::assemble(&p, &frames)?.matrix.to_dense();
        let n = p.dim();
        let dim = p.coord_dim();
        let xs: Vec<usize> = (0..dim).filter(|i| i % (n + 1) != n).collect();
        let ys: Vec<usize> = (0..dim).filter(|i| i % (n + 1) == n).collect();
        let sub =
            |m: &DMatrix<f64>, r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| m[(r[i], c[j])]);
        let hxx = sub(&h, &xs, &xs);
        let hxy = sub(&h, &xs, &ys);
        let hyy = sub(&h, &ys, &ys);
        let wxx = sub(&w, &xs, &xs);
        let hyy_lu = hyy.lu();
        let resp =
            hyy_lu.solve(&hxy.transpose()).ok_or_else(|| Error::Numerical("singular y-block of the Hessian".into()))?;
        let schur = &hxx - &hxy * &resp;
        let l = wxx.clone().cholesky().ok_or_else(|| Error::Numerical("W is not positive definite".into()))?.l();
        let linv = l
            .solve_lower_triangular(&DMatrix::identity(xs.len(), xs.len()))
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let mut m = &linv * schur * linv.transpose();
        m = (&m + m.transpose()) * 0.5;
        let eig = m.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] < 0.0).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut chart = Chart { eigenvalues: Vec::new(), frame: Vec::new(), duals: Vec::new() };
        for i in order {
            let q = eig.eigenvectors.column(i).into_owned();
            let mut cx: Vec<f64> = (linv.transpose() * q).iter().cloned().collect();
            orient(&mut cx);
            let cxv = DVector::from_vec(cx.clone());
            let cy = -(&resp * &cxv);
            let mut c = vec![0.0; dim];
            for (a, &ix) in xs.iter().enumerate() {
                c[ix] = cx[a];
            }
            for (a, &iy) in ys.iter().enumerate() {
                c[iy] = cy[a];
            }
            let t = p.from_coords(&c, &frames);
            // covector W_xx c_x mapped back to ambient node components
            let wc = &wxx * &cxv;
            let mut dc = vec![0.0; dim];
            for (a, &ix) in xs.iter().enumerate() {
                dc[ix] = wc[a];
            }
            let mut dual = p.from_coords(&dc, &frames);
            dual.eta.iter_mut().for_each(|v| *v = 0.0);
            chart.eigenvalues.push(eig.eigenvalues[i]);
            chart.frame.push(p.tangent_to_flat(&t));
            chart.duals.push(p.tangent_to_flat(&dual));
        }
        Ok(chart)
    }

    fn log(&self, base: &[f64], other: &[f64]) -> Vec<f64> {
        let b = self.path(base);
        let o = self.path(other);
        let mut t = crate::pathflow::path::PathTangent::zeros(&b);
        for k in 1..=b.interior() {
            for (j, v) in t.xi[k].iter_mut().enumerate() {
                *v = o.x[k][j] - b.x[k][j];
            }
            b.model.project_tangent(&b.x[k], &mut t.xi[k]);
            t.eta[k] = o.y[k] - b.y[k];
        }
        b.tangent_to_flat(&t)
    }

    fn displace(&self, base: &[f64], dir: &[f64]) -> Vec<f64> {
        let b = self.path(base);
        let t = b.tangent_from_flat(dir);
        let mut s = b.retract(&t, 1.0).to_flat();
        self.project(&mut s);
        s
    }
}

/// Finite-dimensional test functions f(x, y) = g(x) − y² on ℝᵈ × ℝ, with
/// the y-relaxed bounded gradient flow F = −∇g/√(1+|∇g|²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Synthetic {
    /// g = (x₁² − 1)² + c·x₂²
    DoubleWell { c: f64 },
    /// g = (x₁² − 1)² + (x₂² − 1)²
    DoubleDoubleWell,
    /// g = Σ (xᵢ² − 1)² over `dim` coordinates
    WellProduct { dim: usize },
}

impl Synthetic {
    pub fn x_dim(&self) -> usize {
        match self {
            Synthetic::DoubleWell { .. } | Synthetic::DoubleDoubleWell => 2,
            Synthetic::WellProduct { dim } => *dim,
        }
    }

    fn well(&self, i: usize) -> bool {
        !matches!(self, Synthetic::DoubleWell { .. }) || i == 0
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, v)| match (self, self.well(i)) {
                (_, true) => (v * v - 1.0).powi(2),
                (Synthetic::DoubleWell { c }, false) => c * v * v,
                _ => unreachable!(),
            })
            .sum()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| match (self, self.well(i)) {
                (_, true) => 4.0 * v * (v * v - 1.0),
                (Synthetic::DoubleWell { c }, false) => 2.0 * c * v,
                _ => unreachable!(),
            })
            .collect()
    }

    fn hess_diag(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| match (self, self.well(i)) {
                (_, true) => 12.0 * v * v - 4.0,
                (Synthetic::DoubleWell { c }, false) => 2.0 * c,
                _ => unreachable!(),
            })
            .collect()
    }

    /// All rest points as (x, y = 0) states with their Morse index.
    pub fn critical_points(&self) -> Vec<(Vec<f64>, i64)> {
        let d = self.x_dim();
        let choices: Vec<Vec<f64>> =
            (0..d).map(|i| if self.well(i) { vec![-1.0, 0.0, 1.0] } else { vec![0.0] }).collect();
        let mut out = vec![(Vec::new(), 0i64)];
        for ch in &choices {
            let mut next = Vec::new();
            for (x, _) in &out {
                for v in ch {
                    let mut x2: Vec<f64> = x.clone();
                    x2.push(*v);
                    next.push((x2, 0));
                }
            }
            out = next;
        }
        out.into_iter()
            .map(|(mut x, _)| {
                let idx = self.hess_diag(&x).iter().filter(|h| **h < 0.0).count() as i64;
                x.push(0.0);
                (x, idx)
            })
            .collect()
    }
}

impl FlowSystem for Synthetic {
    fn dim(&self) -> usize {
        self.x_dim() + 1
    }

    fn field(&self, s: &[f64]) -> Result<FieldSample> {
        let d = self.x_dim();
        let g = self.grad(&s[..d]);
        let gn = dot(&g, &g).sqrt();
        let scale = -1.0 / (1.0 + gn * gn).sqrt();
        let mut f: Vec<f64> = g.iter().map(|v| v * scale).collect();
        f.push(0.0);
        Ok(FieldSample { f, e: self.energy(s), e_lam: None, f_norm: gn / (1.0 + gn * gn).sqrt(), antiparallel: false })
    }

    fn project(&self, s: &mut [f64]) {
        let d = self.x_dim();
        s[d] = 0.0;
    }

    fn energy(&self, s: &[f64]) -> f64 {
        let d = self.x_dim();
        self.g(&s[..d]) - s[d] * s[d]
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
    }
}

impl MorseSystem for Synthetic {
    fn chart(&self, s: &[f64]) -> Result<Chart> {
        let d = self.x_dim();
        let h = self.hess_diag(&s[..d]);
        let mut idx: Vec<usize> = (0..d).filter(|&i| h[i] < 0.0).collect();
        idx.sort_by(|&a, &b| h[a].total_cmp(&h[b]).then(a.cmp(&b)));
        let frame: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| {
                let mut e = vec![0.0; d + 1];
                e[i] = 1.0;
                e
            })
            .collect();
        Ok(Chart { eigenvalues: idx.iter().map(|&i| h[i]).collect(), duals: frame.clone(), frame })
    }

    fn log(&self, base: &[f64], other: &[f64]) -> Vec<f64> {
        other.iter().zip(base).map(|(a, b)| a - b).collect()
    }

    fn displace(&self, base: &[f64], dir: &[f64]) -> Vec<f64> {
        let mut s: Vec<f64> = base.iter().zip(dir).map(|(a, b)| a + b).collect();
        self.project(&mut s);
        s
    }
}

/// Rest point with its grading and persistent unstable orientation.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub id: usize,
    pub degree: i64,
    pub energy: f64,
    pub state: Vec<f64>,
    pub chart: Chart,
}

impl CriticalPoint {
    pub fn new<S: MorseSystem>(sys: &S, id: usize, degree: i64, state: Vec<f64>) -> Result<Self> {
        let chart = sys.chart(&state)?;
        if chart.dim() as i64 != degree {
            return Err(Error::Contract(format!(
                "rest point {id}: {} unstable directions but degree {degree}",
                chart.dim()
            )));
        }
        Ok(CriticalPoint { id, degree, energy: sys.energy(&state), state, chart })
    }
}
