use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hessian::relative_index_disc;
use super::jacobi::{endpoint_determinant, jacobi_conjugate_count, ENDPOINT_DET_MIN};
use super::IndexData;
use crate::error::{Error, Result};
use crate::geodesics::bvp::GeodesicRecord;
use crate::geometry::metric::SplitMetric;

pub const DEFAULT_MESH: usize = 32;
pub const MAX_MESH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub pass: bool,
    /// (record id, scaled endpoint determinant) for every record.
    pub determinants: Vec<(usize, f64)>,
    pub offenders: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl Certificate {
    pub fn diagnosis(&self) -> String {
        if self.pass {
            return "endpoints non-conjugate along every record".into();
        }
        let parts: Vec<String> = self
            .determinants
            .iter()
            .filter(|(id, _)| self.offenders.contains(id))
            .take(8)
            .map(|(id, d)| format!("record {id} (|det| = {d:.3e})"))
            .collect();
        let more = self.offenders.len().saturating_sub(parts.len());
        let tail = if more > 0 { format!(" and {more} more") } else { String::new() };
        format!("endpoints conjugate along {}{tail}", parts.join(", "))
    }
}

/// Passes iff every record's scaled Jacobi endpoint determinant is at
/// least 1e-6.
pub fn certify_nonconjugate(metric: &SplitMetric, records: &[GeodesicRecord]) -> Result<Certificate> {
    let determinants =
        records.par_iter().map(|r| endpoint_determinant(metric, r).map(|d| (r.id, d))).collect::<Result<Vec<_>>>()?;
    let offenders: Vec<usize> =
        determinants.iter().filter(|(_, d)| !(*d >= ENDPOINT_DET_MIN)).map(|(id, _)| *id).collect();
    let warning = records.is_empty().then(|| "no records: certificate is vacuous".to_string());
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(Certificate { pass: offenders.is_empty(), determinants, offenders, warning })
}

/// i_disc at `mesh`, doubling on degeneracy up to the maximum mesh.
fn disc_with_doubling(metric: &SplitMetric, record: &GeodesicRecord, mesh: usize) -> Result<(i64, usize)> {
    let mut n = mesh;
    loop {
        match relative_index_disc(metric, record, n) {
            Ok(i) => return Ok((i, n)),
            Err(Error::DegenerateHessian { .. }) if 2 * n <= MAX_MESH => n *= 2,
            Err(e) => return Err(e),
        }
    }
}

/// Both index routes for one record.
pub fn index_record(metric: &SplitMetric, record: &GeodesicRecord, mesh: usize) -> IndexData {
    let mut notes = Vec::new();
    let (i_con, times, certified_con, nondegenerate) = match jacobi_conjugate_count(metric, record) {
        Ok(j) => {
            if j.accumulating {
                notes.push("conjugate points accumulate".to_string());
            }
            (Some(j.count), j.times(), !j.accumulating, true)
        }
        Err(e) => {
            notes.push(e.to_string());
            (None, Vec::new(), false, !matches!(e, Error::DegenerateEndpoint(_)))
        }
    };
    let (i_disc, used) = match disc_with_doubling(metric, record, mesh) {
        Ok((i, n)) => (Some(i), n),
        Err(e) => {
            notes.push(e.to_string());
            (None, mesh)
        }
    };
    let i_disc_refined = if i_disc.is_some() && 2 * used <= MAX_MESH {
        match relative_index_disc(metric, record, 2 * used) {
            Ok(i) => Some(i),
            Err(e) => {
                notes.push(format!("refined mesh: {e}"));
                None
            }
        }
    } else {
        None
    };
    let agreement = i_con.is_some() && i_con == i_disc && certified_con;
    IndexData {
        i_con,
        conjugate_times: times,
        i_disc,
        mesh: used,
        i_disc_refined,
        agreement,
        nondegenerate,
        certified: certified_con && nondegenerate,
        note: (!notes.is_empty()).then(|| notes.join("; ")),
    }
}

/// Attaches index data to every record (in parallel).
pub fn index_records(metric: &SplitMetric, records: &mut [GeodesicRecord], mesh: usize) {
    records.par_iter_mut().for_each(|r| {
        let data = index_record(metric, r, mesh);
        r.nondegenerate = Some(data.nondegenerate);
        r.index = Some(data);
    });
}
