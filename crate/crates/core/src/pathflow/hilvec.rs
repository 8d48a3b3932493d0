use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

pub const HILVEC_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HilvecValue {
    pub lhs: f64,
    pub rhs: f64,
    pub theta: f64,
    /// (lhs − rhs)/(‖u‖² + ‖v‖²); both sides are 2-homogeneous in (u, v).
    pub slack: f64,
    pub holds: bool,
}

/// lhs = ‖u‖² + χ(‖u‖/‖v‖)⟨u,v⟩ against rhs = ½ min_{θ∈[0,1]} ‖θv + (1−θ)u‖².
pub fn hilvec_bound(u: &[f64], v: &[f64], chi: f64) -> Result<HilvecValue> {
    if u.len() != v.len() {
        return Err(Error::Usage("u and v differ in dimension".into()));
    }
    let nv = norm(v);
    if nv == 0.0 {
        return Err(Error::Usage("v must be nonzero".into()));
    }
    if !(0.0..=1.0).contains(&chi) {
        return Err(Error::Usage(format!("chi = {chi} outside [0, 1]")));
    }
    let uu = dot(u, u);
    let uv = dot(u, v);
    let lhs = uu + chi * (uu.sqrt() / nv) * uv;
    // ‖u + θd‖² with d = v − u is minimised at θ = −⟨u,d⟩/‖d‖²
    let d: Vec<f64> = v.iter().zip(u).map(|(a, b)| a - b).collect();
    let dd = dot(&d, &d);
    let theta = if dd == 0.0 { 0.0 } else { (-dot(u, &d) / dd).clamp(0.0, 1.0) };
    let pt: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + theta * b).collect();
    let rhs = 0.5 * dot(&pt, &pt);
    let slack = (lhs - rhs) / (uu + nv * nv);
    Ok(HilvecValue { lhs, rhs, theta, slack, holds: slack >= -HILVEC_SLACK })
}
