use serde::{Deserialize, Serialize};

use crate::linalg::{smoothstep, smoothstep_d1, smoothstep_d2};

/// A scalar function of the time coordinate y with two analytic derivatives.
///
/// Split metrics in this crate have α(x, y) = A(y)·I and β(x, y) = B(y); each
/// of A and B is a `Profile`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// base + amp·cos(freq·y)
    Cosine {
        base: f64,
        amp: f64,
        freq: f64,
    },
    /// base + amp·exp(−(y/width)²)
    Gaussian {
        base: f64,
        amp: f64,
        width: f64,
    },
    /// Σ cᵢ yⁱ
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// ψ(y)·inner(y) + (1 − ψ(y))·floor, with ψ the slab cutoff.
    Blend {
        inner: Box<Profile>,
        floor: f64,
        psi: Psi,
    },
}

/// Cutoff ψ: 1 on [−inner, inner], 0 outside [−outer, outer], quintic ramp
/// in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Psi {
    pub inner: f64,
    pub outer: f64,
}

impl Psi {
    pub fn eval(&self, y: f64) -> (f64, f64, f64) {
        let w = self.outer - self.inner;
        let s = y.abs();
        let t = (s - self.inner) / w;
        let sign = if y >= 0.0 { 1.0 } else { -1.0 };
        let v = 1.0 - smoothstep(t);
        let d1 = -smoothstep_d1(t) / w * sign;
        let d2 = -smoothstep_d2(t) / (w * w);
        (v, d1, d2)
    }
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    /// (f, f′, f″) at y.
    pub fn eval(&self, y: f64) -> (f64, f64, f64) {
        match self {
            Profile::Constant { value } => (*value, 0.0, 0.0),
            Profile::Cosine { base, amp, freq } => {
                let (s, c) = (freq * y).sin_cos();
                (base + amp * c, -amp * freq * s, -amp * freq * freq * c)
            }
            Profile::Gaussian { base, amp, width } => {
                let u = y / width;
                let e = (-u * u).exp();
                let d1 = -2.0 * u / width * amp * e;
                let d2 = amp * e * (4.0 * u * u - 2.0) / (width * width);
                (base + amp * e, d1, d2)
            }
            Profile::Polynomial { coeffs } => {
                let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for (i, c) in coeffs.iter().enumerate().rev() {
                    d2 = d2 * y + 2.0 * d1;
                    d1 = d1 * y + f;
                    f = f * y + c;
                    let _ = i;
                }
                (f, d1, d2)
            }
            Profile::Blend { inner, floor, psi } => {
                let (p, p1, p2) = psi.eval(y);
                let (a, a1, a2) = inner.eval(y);
                let v = p * a + (1.0 - p) * floor;
                let d1 = p * a1 + p1 * (a - floor);
                let d2 = p2 * (a - floor) + 2.0 * p1 * a1 + p * a2;
                (v, d1, d2)
            }
        }
    }

    pub fn value(&self, y: f64) -> f64 {
        self.eval(y).0
    }

    pub fn deriv(&self, y: f64) -> f64 {
        self.eval(y).1
    }

    /// True when the profile does not depend on y.
    pub fn is_constant(&self) -> bool {
        match self {
            Profile::Constant { .. } => true,
            Profile::Cosine { amp, freq, .. } => *amp == 0.0 || *freq == 0.0,
            Profile::Gaussian { amp, .. } => *amp == 0.0,
            Profile::Polynomial { coeffs } => coeffs.iter().skip(1).all(|c| *c == 0.0),
            Profile::Blend { inner, floor, .. } => inner.is_constant() && (inner.value(0.0) - floor).abs() == 0.0,
        }
    }

    /// Returns `self + mu`.
    pub fn shifted(&self, mu: f64) -> Profile {
        if mu == 0.0 {
            return self.clone();
        }
        match self {
            Profile::Constant { value } => Profile::Constant { value: value + mu },
            Profile::Cosine { base, amp, freq } => Profile::Cosine { base: base + mu, amp: *amp, freq: *freq },
            Profile::Gaussian { base, amp, width } => Profile::Gaussian { base: base + mu, amp: *amp, width: *width },
            Profile::Polynomial { coeffs } => {
                let mut c = coeffs.clone();
                if c.is_empty() {
                    c.push(0.0);
                }
                c[0] += mu;
                Profile::Polynomial { coeffs: c }
            }
            Profile::Blend { inner, floor, psi } => {
                Profile::Blend { inner: Box::new(inner.shifted(mu)), floor: floor + mu, psi: *psi }
            }
        }
    }
}
