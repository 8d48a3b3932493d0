#![allow(dead_code)]

use geomorse::complex::{BoundaryMatrix, Coefficients, Generator, MorseComplexData};
use num_integer::Integer;

/// Fraction-free Gaussian elimination determinant.
pub fn bareiss_det(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a = m.to_vec();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&i| a[i][k] != 0) {
                Some(i) => {
                    a.swap(k, i);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Invariant factors from determinantal divisors: d_k is the gcd of all
/// k×k minors and the k-th invariant is d_k / d_{k-1}.
pub fn elementary_divisors(m: &[Vec<i64>]) -> Vec<i128> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut out = Vec::new();
    let mut prev = 1i128;
    for k in 1..=rows.min(cols) {
        let mut g = 0i128;
        'outer: for rs in subsets(rows, k) {
            for cs in subsets(cols, k) {
                let minor: Vec<Vec<i128>> = rs.iter().map(|&i| cs.iter().map(|&j| m[i][j] as i128).collect()).collect();
                g = g.gcd(&bareiss_det(&minor));
                if g == 1 {
                    break 'outer;
                }
            }
        }
        if g == 0 {
            break;
        }
        out.push(g / prev);
        prev = g;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    /// A lone generator in degree k.
    Free(i64),
    /// a in degree k with ∂a = m·b, b in degree k − 1.
    Pair(i64, i64),
}

/// Expected (betti, torsion invariants) per degree 0..=top of a direct sum
/// of pieces.
pub fn expected_homology(pieces: &[Piece], top: i64, mod2: bool) -> Vec<(usize, Vec<i64>)> {
    (0..=top)
        .map(|k| {
            let mut betti = 0;
            let mut tors = Vec::new();
            for p in pieces {
                match *p {
                    Piece::Free(d) if d == k => betti += 1,
                    Piece::Pair(d, m) if mod2 && m % 2 == 0 && (d == k || d - 1 == k) => betti += 1,
                    Piece::Pair(d, m) if !mod2 && d - 1 == k && m.abs() > 1 => tors.push(m.abs()),
                    _ => {}
                }
            }
            let diag: Vec<Vec<i64>> =
                (0..tors.len()).map(|i| (0..tors.len()).map(|j| if i == j { tors[i] } else { 0 }).collect()).collect();
            let inv = elementary_divisors(&diag).into_iter().filter(|d| *d > 1).map(|d| d as i64).collect();
            (betti, inv)
        })
        .collect()
}

/// Column operation c_i += k·c_j on the right, with its inverse on the left.
#[derive(Debug, Clone, Copy)]
pub struct Elementary {
    pub i: usize,
    pub j: usize,
    pub k: i64,
    pub negate: bool,
}

type Matrix = Vec<Vec<i64>>;

/// A unimodular matrix and its inverse.
fn unimodular(n: usize, ops: &[Elementary]) -> (Matrix, Matrix) {
    let id = |n: usize| (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect::<Vec<i64>>()).collect::<Vec<_>>();
    let (mut u, mut inv) = (id(n), id(n));
    for op in ops.iter().filter(|o| n > 1 && o.i % n != o.j % n) {
        let (i, j) = (op.i % n, op.j % n);
        // u ← u·E with E = I + k·e_j e_iᵀ (column i += k·column j); inv ← E⁻¹·inv
        for row in u.iter_mut() {
            row[i] += op.k * row[j];
        }
        let ri = inv[i].clone();
        inv[j].iter_mut().zip(&ri).for_each(|(a, b)| *a -= op.k * b);
        if op.negate {
            u.iter_mut().for_each(|r| r[i] = -r[i]);
            inv[i].iter_mut().for_each(|v| *v = -*v);
        }
    }
    (u, inv)
}

fn mul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    geomorse::complex::matmul(a, b).unwrap()
}

/// Direct sum of pieces, then each degree's basis scrambled by a unimodular
/// change of basis.
pub fn scrambled_complex(pieces: &[Piece], ops: &[Elementary], coefficients: Coefficients) -> MorseComplexData {
    let top = pieces
        .iter()
        .map(|p| match p {
            Piece::Free(d) | Piece::Pair(d, _) => *d,
        })
        .max()
        .unwrap_or(0);
    let mut by_degree: Vec<Vec<usize>> = vec![Vec::new(); top as usize + 1];
    let mut links = Vec::new();
    let mut next = 0;
    for p in pieces {
        match *p {
            Piece::Free(d) => {
                by_degree[d as usize].push(next);
                next += 1;
            }
            Piece::Pair(d, m) => {
                by_degree[d as usize].push(next);
                by_degree[d as usize - 1].push(next + 1);
                links.push((next, next + 1, m));
                next += 2;
            }
        }
    }
    let bases: Vec<(Matrix, Matrix)> = by_degree.iter().map(|g| unimodular(g.len(), ops)).collect();
    let mut generators = Vec::new();
    for (d, ids) in by_degree.iter().enumerate() {
        for &id in ids {
            generators.push(Generator { id, degree: d as i64, energy: (d * 10 + id) as f64, winding: None });
        }
    }
    let mut boundary = Vec::new();
    for k in 1..=top as usize {
        let (rows, cols) = (&by_degree[k - 1], &by_degree[k]);
        if rows.is_empty() || cols.is_empty() {
            continue;
        }
        let raw: Vec<Vec<i64>> = rows
            .iter()
            .map(|r| cols.iter().map(|c| links.iter().find(|l| l.0 == *c && l.1 == *r).map_or(0, |l| l.2)).collect())
            .collect();
        let entries = mul(&mul(&bases[k - 1].0, &raw), &bases[k].1);
        boundary.push(BoundaryMatrix { degree: k as i64, rows: rows.clone(), cols: cols.clone(), entries });
    }
    let c = MorseComplexData {
        coefficients: Coefficients::Integer,
        energy_cap: 1e9,
        generators,
        boundary,
        census: Vec::new(),
        unstable_pairs: Vec::new(),
    };
    match coefficients {
        Coefficients::Integer => c,
        Coefficients::Mod2 => c.mod2(),
    }
}
