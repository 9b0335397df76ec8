//! The ancestral-probability table `q_k = P(0 in A_k)` and everything that is
//! computed from it exactly: `sum q^2`, the innovation variance, meeting
//! probabilities, and the linear-representation coefficients `b_n`.

use crate::error::{Error, Result};
use crate::quadrature::Legendre;
use crate::spectral_models::{Family, SpectralModel};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `q_k` on the box `[0, N]^d`, stored in colexicographic order (axis 0 fastest).
#[derive(Clone, Debug)]
pub struct QTable {
    pub dim: usize,
    pub extent: usize,
    pub values: Vec<f64>,
    pub sum_sq: f64,
    /// `1 - mu([1,N]^d)`: step mass the recursion never sees.
    pub tail_mass: f64,
    /// Geometric extrapolation of `sum q^2` beyond the box (NaN if the last two
    /// shells do not decay).
    pub sum_sq_tail_estimate: f64,
    /// Cells where `q` increases along some axis; a shape diagnostic only.
    pub nonmonotone_cells: usize,
}

impl QTable {
    pub fn side(&self) -> usize {
        self.extent + 1
    }

    pub fn index(&self, k: &[usize]) -> usize {
        let s = self.side();
        k.iter().rev().fold(0, |acc, &c| acc * s + c)
    }

    pub fn coords(&self, mut idx: usize, out: &mut [usize]) {
        let s = self.side();
        for c in out.iter_mut() {
            *c = idx % s;
            idx /= s;
        }
    }

    /// `q_k`, zero outside the table.
    pub fn get(&self, k: &[i64]) -> f64 {
        let n = self.extent as i64;
        if k.iter().any(|&c| c < 0 || c > n) {
            return 0.0;
        }
        let s = self.side() as i64;
        let idx = k.iter().rev().fold(0i64, |acc, &c| acc * s + c);
        self.values[idx as usize]
    }

    /// `Var(X_0) / sum q^2` with `Var(X_0) = 4p(1-p)`.
    pub fn sigma_x2(&self, p: f64) -> f64 {
        4.0 * p * (1.0 - p) / self.sum_sq
    }

    /// `sum_k q_k q_{k+m} / sum_k q_k^2` over the table.
    pub fn pair_meeting_prob(&self, m: &[i64]) -> MeetingProb {
        let d = self.dim;
        let n = self.extent;
        let mut k = vec![0usize; d];
        let mut km = vec![0i64; d];
        let mut total = 0.0;
        let mut shells = [0.0; 2];
        for idx in 0..self.values.len() {
            self.coords(idx, &mut k);
            for a in 0..d {
                km[a] = k[a] as i64 + m[a];
            }
            let v = self.values[idx] * self.get(&km);
            if v == 0.0 {
                continue;
            }
            total += v;
            let top = k.iter().zip(&km).map(|(&a, &b)| (a as i64).max(b)).max().unwrap() as usize;
            if 2 * top > n {
                shells[1] += v;
            } else if 4 * top > n {
                shells[0] += v;
            }
        }
        MeetingProb {
            value: total / self.sum_sq,
            residue: geometric_tail(shells[0], shells[1]) / self.sum_sq,
        }
    }

    /// Box sums of `q` over `[lo, hi]` (inclusive, clipped to the table).
    fn prefix(&self) -> BoxSummer {
        BoxSummer::new(self)
    }
}

/// Sum `q_k q_{k+m}` and its extrapolated remainder beyond the table.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeetingProb {
    pub value: f64,
    /// Estimated missing mass from truncating the correlation sum to the box.
    pub residue: f64,
}

/// If shell sums decay geometrically with ratio r = s2/s1, the rest of the
/// series is s2 r / (1 - r).
fn geometric_tail(s1: f64, s2: f64) -> f64 {
    if s1 <= 0.0 || s2 <= 0.0 {
        return 0.0;
    }
    let r = s2 / s1;
    if r >= 1.0 {
        f64::NAN
    } else {
        s2 * r / (1.0 - r)
    }
}

/// Builds the q-table by the renewal recursion `q_k = sum_j mu(j) q_{k-j}`.
///
/// Product-pareto steps factor per axis, so the convolution is applied one
/// axis at a time (`O(d N^{d+1})`); table-driven steps iterate the support.
pub fn build_qtable(model: &SpectralModel, extent: usize, budget: u64) -> Result<QTable> {
    if extent < 1 {
        return Err(Error::Config("q-table extent must be at least 1".into()));
    }
    let d = model.dim();
    let side = extent + 1;
    let cells = (side as u64).checked_pow(d as u32).unwrap_or(u64::MAX);
    let layers = match model.family {
        Family::ProductPareto => d as u64 + 1,
        Family::CustomPmf(_) => 1,
    };
    if cells.saturating_mul(layers) > budget {
        return Err(Error::Resource(format!(
            "q-table needs {} cells, site budget is {budget}",
            cells.saturating_mul(layers)
        )));
    }
    let cells = cells as usize;
    let strides: Vec<usize> = (0..d).map(|a| side.pow(a as u32)).collect();
    let mut k = vec![0usize; d];
    let values = match &model.family {
        Family::ProductPareto => {
            let pm: Vec<Vec<f64>> = (0..d)
                .map(|a| (0..=extent as i64).map(|n| if n == 0 { 0.0 } else { model.axis_pmf(a, n) }).collect())
                .collect();
            // layers[0] = q, layers[m] = partial convolution over axes < m
            let mut t = vec![vec![0.0f64; cells]; d + 1];
            for idx in 0..cells {
                let mut r = idx;
                for c in k.iter_mut() {
                    *c = r % side;
                    r /= side;
                }
                for m in 0..d {
                    let (lo, hi) = t.split_at_mut(m + 1);
                    let src = &lo[m];
                    let mut acc = 0.0;
                    for j in 1..=k[m] {
                        acc += pm[m][j] * src[idx - j * strides[m]];
                    }
                    hi[0][idx] = acc;
                }
                t[0][idx] = if idx == 0 { 1.0 } else { t[d][idx] };
            }
            t.swap_remove(0)
        }
        Family::CustomPmf(table) => {
            let support: Vec<(Vec<usize>, f64)> = table
                .support()
                .filter(|(j, _)| j.iter().all(|&c| c as usize <= extent))
                .map(|(j, p)| (j.iter().map(|&c| c as usize).collect(), p))
                .collect();
            let mut q = vec![0.0f64; cells];
            q[0] = 1.0;
            for idx in 1..cells {
                let mut r = idx;
                for c in k.iter_mut() {
                    *c = r % side;
                    r /= side;
                }
                let mut acc = 0.0;
                for (j, p) in &support {
                    if j.iter().zip(&k).all(|(a, b)| a <= b) {
                        let off: usize = j.iter().zip(&strides).map(|(a, s)| a * s).sum();
                        acc += p * q[idx - off];
                    }
                }
                q[idx] = acc;
            }
            q
        }
    };
    let mut sum_sq = 0.0;
    let mut shells = [0.0; 2];
    let mut nonmono = 0;
    for (idx, v) in values.iter().enumerate() {
        let mut r = idx;
        for c in k.iter_mut() {
            *c = r % side;
            r /= side;
        }
        let v2 = v * v;
        sum_sq += v2;
        let top = *k.iter().max().unwrap();
        if 2 * top > extent {
            shells[1] += v2;
        } else if 4 * top > extent {
            shells[0] += v2;
        }
        if (0..d).any(|a| k[a] > 1 && values[idx - strides[a]] < *v && values[idx - strides[a]] > 0.0) {
            nonmono += 1;
        }
    }
    Ok(QTable {
        dim: d,
        extent,
        values,
        sum_sq,
        tail_mass: 1.0 - model.box_mass(extent as i64),
        sum_sq_tail_estimate: geometric_tail(shells[0], shells[1]),
        nonmonotone_cells: nonmono,
    })
}

/// Largest violation of `q_k = sum_{j in [1,N]^d, j <= k} pmf(j) q_{k-j}` over
/// the table, by direct summation.
pub fn recursion_residual(model: &SpectralModel, table: &QTable) -> Result<f64> {
    let d = table.dim;
    let mut k = vec![0usize; d];
    let mut j = vec![0usize; d];
    let mut jk = vec![0i64; d];
    let mut worst: f64 = 0.0;
    for idx in 1..table.values.len() {
        table.coords(idx, &mut k);
        if k.iter().any(|&c| c == 0) {
            worst = worst.max(table.values[idx].abs());
            continue;
        }
        let count: usize = k.iter().product();
        let mut acc = 0.0;
        for r in 0..count {
            let mut rem = r;
            for a in 0..d {
                j[a] = rem % k[a] + 1;
                rem /= k[a];
            }
            let ji: Vec<i64> = j.iter().map(|&c| c as i64).collect();
            for a in 0..d {
                jk[a] = (k[a] - j[a]) as i64;
            }
            acc += model.pmf(&ji)? * table.get(&jk);
        }
        worst = worst.max((table.values[idx] - acc).abs());
    }
    Ok(worst)
}

struct BoxSummer {
    d: usize,
    side: usize,
    n: i64,
    pre: Vec<f64>,
}

impl BoxSummer {
    fn new(t: &QTable) -> Self {
        let d = t.dim;
        let side = t.side() + 1;
        let cells = side.pow(d as u32);
        let mut pre = vec![0.0; cells];
        let mut k = vec![0usize; d];
        let mut src = vec![0usize; d];
        for idx in 0..cells {
            let mut r = idx;
            for c in k.iter_mut() {
                *c = r % side;
                r /= side;
            }
            if k.iter().all(|&c| c > 0) {
                for a in 0..d {
                    src[a] = k[a] - 1;
                }
                pre[idx] = t.values[t.index(&src)];
            }
        }
        let mut stride = 1;
        for _ in 0..d {
            for idx in 0..cells {
                if (idx / stride) % side > 0 {
                    pre[idx] += pre[idx - stride];
                }
            }
            stride *= side;
        }
        BoxSummer { d, side, n: t.extent as i64, pre }
    }

    /// Sum of q over the integer box [lo, hi], clipped to [0, N]^d.
    fn sum(&self, lo: &[i64], hi: &[i64]) -> f64 {
        let mut a = [0i64; 8];
        let mut b = [0i64; 8];
        for k in 0..self.d {
            a[k] = lo[k].max(0);
            b[k] = hi[k].min(self.n);
            if a[k] > b[k] {
                return 0.0;
            }
        }
        let mut total = 0.0;
        for corner in 0..(1usize << self.d) {
            let mut idx = 0usize;
            let mut sign = 1.0;
            let mut zero = false;
            for k in (0..self.d).rev() {
                let c = if corner >> k & 1 == 1 {
                    sign = -sign;
                    a[k]
                } else {
                    b[k] + 1
                };
                if c == 0 {
                    zero = true;
                }
                idx = idx * self.side + c as usize;
            }
            if !zero {
                total += sign * self.pre[idx];
            }
        }
        total
    }
}

/// Coefficient vector `b_j = sum_{k in [0, m-1]} q_{k-j}` over every `j` where
/// it can be nonzero, in a fixed order.
fn b_vector(table: &QTable, summer: &BoxSummer, m: &[usize], span: &[usize]) -> Vec<f64> {
    let d = table.dim;
    let n = table.extent as i64;
    // j_a ranges over [-N, span_a - 1]
    let widths: Vec<usize> = span.iter().map(|&s| s + table.extent).collect();
    let total: usize = widths.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut lo = vec![0i64; d];
    let mut hi = vec![0i64; d];
    for r in 0..total {
        let mut rem = r;
        for a in 0..d {
            let j = (rem % widths[a]) as i64 - n;
            rem /= widths[a];
            lo[a] = -j;
            hi[a] = m[a] as i64 - 1 - j;
        }
        out.push(if m.iter().any(|&c| c == 0) { 0.0 } else { summer.sum(&lo, &hi) });
    }
    out
}

/// `||b_n||^2`, `sup_j |b_{n,j}|`, and their ratio (the CLT coefficient
/// condition asks for `sup / ||b|| -> 0`).
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct BSummary {
    pub norm_sq: f64,
    pub sup: f64,
    pub ratio: f64,
}

pub fn b_coefficients(table: &QTable, m: &[usize]) -> Result<BSummary> {
    check_box(table, m)?;
    let summer = table.prefix();
    let b = b_vector(table, &summer, m, m);
    let norm_sq: f64 = b.iter().map(|v| v * v).sum();
    let sup = b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    Ok(BSummary { norm_sq, sup, ratio: if norm_sq > 0.0 { sup / norm_sq.sqrt() } else { 0.0 } })
}

fn check_box(table: &QTable, m: &[usize]) -> Result<()> {
    if m.len() != table.dim {
        return Err(Error::Domain("box dimension differs from the q-table".into()));
    }
    Ok(())
}

/// How `<b_n(t), b_n(s)>` is evaluated.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum PrelimitPath {
    /// Direct sums of table coefficients.
    Coefficients,
    /// Uniform-grid quadrature of `|Q_table|^2 K_t conj(K_s)`; exact for the
    /// trigonometric polynomial `Q_table`.
    SpectralTable,
    /// Panel quadrature with the untruncated `Q = 1/(1-P)` (product-pareto).
    SpectralExact,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PrelimitValue {
    pub value: f64,
    pub est_error: f64,
}

/// `sigma_x2 * <b(t), b(s)>` for the boxes `[0, mt-1]` and `[0, ms-1]`.
pub fn prelimit_cov(
    model: &SpectralModel,
    table: &QTable,
    sigma_x2: f64,
    mt: &[usize],
    ms: &[usize],
    path: PrelimitPath,
) -> Result<PrelimitValue> {
    check_box(table, mt)?;
    check_box(table, ms)?;
    if mt.iter().chain(ms).any(|&c| c == 0) {
        return Ok(PrelimitValue { value: 0.0, est_error: 0.0 });
    }
    match path {
        PrelimitPath::Coefficients => {
            let summer = table.prefix();
            let span: Vec<usize> = mt.iter().zip(ms).map(|(a, b)| *a.max(b)).collect();
            let bt = b_vector(table, &summer, mt, &span);
            let bs = b_vector(table, &summer, ms, &span);
            let v: f64 = bt.iter().zip(&bs).map(|(a, b)| a * b).sum();
            Ok(PrelimitValue { value: sigma_x2 * v, est_error: 0.0 })
        }
        PrelimitPath::SpectralTable => Ok(PrelimitValue {
            value: sigma_x2 * spectral_table(table, mt, ms),
            est_error: 0.0,
        }),
        PrelimitPath::SpectralExact => {
            if !matches!(model.family, Family::ProductPareto) {
                return Err(Error::Config("the exact spectral path needs a product-pareto model".into()));
            }
            let hi = spectral_exact(model, mt, ms, 8);
            let lo = spectral_exact(model, mt, ms, 6);
            Ok(PrelimitValue { value: sigma_x2 * hi, est_error: sigma_x2 * (hi - lo).abs() })
        }
    }
}

/// `sum_{l=0}^{m-1} e^{ilx}`.
#[inline]
fn dirichlet(m: usize, x: f64) -> Complex64 {
    let h = (x / 2.0).sin();
    if h.abs() < 1e-300 {
        return Complex64::new(m as f64, 0.0);
    }
    let amp = (m as f64 * x / 2.0).sin() / h;
    Complex64::from_polar(amp, (m as f64 - 1.0) * x / 2.0)
}

fn spectral_table(table: &QTable, mt: &[usize], ms: &[usize]) -> f64 {
    let d = table.dim;
    let mmax = mt.iter().chain(ms).copied().max().unwrap();
    let size = (2 * (table.extent + mmax) + 2).next_power_of_two();
    let cells = size.pow(d as u32);
    let mut grid = vec![Complex64::new(0.0, 0.0); cells];
    let mut k = vec![0usize; d];
    for (idx, v) in table.values.iter().enumerate() {
        table.coords(idx, &mut k);
        let g = k.iter().rev().fold(0, |acc, &c| acc * size + c);
        grid[g] = Complex64::new(*v, 0.0);
    }
    let fft = FftPlanner::new().plan_fft_inverse(size);
    let mut line = vec![Complex64::new(0.0, 0.0); size];
    let mut stride = 1;
    for _ in 0..d {
        for start in 0..cells {
            if (start / stride) % size != 0 {
                continue;
            }
            for (i, l) in line.iter_mut().enumerate() {
                *l = grid[start + i * stride];
            }
            fft.process(&mut line);
            for (i, l) in line.iter().enumerate() {
                grid[start + i * stride] = *l;
            }
        }
        stride *= size;
    }
    let h = 2.0 * PI / size as f64;
    let kern: Vec<Vec<Complex64>> = (0..d)
        .map(|a| {
            (0..size)
                .map(|l| {
                    let x = h * l as f64;
                    dirichlet(mt[a], x) * dirichlet(ms[a], x).conj()
                })
                .collect()
        })
        .collect();
    let mut total = 0.0;
    let mut l = vec![0usize; d];
    for (g, q) in grid.iter().enumerate() {
        let mut r = g;
        for c in l.iter_mut() {
            *c = r % size;
            r /= size;
        }
        let kv: Complex64 = (0..d).map(|a| kern[a][l[a]]).product();
        total += q.norm_sqr() * kv.re;
    }
    total / cells as f64
}

/// Positive half-axis nodes for a Dirichlet-kernel integrand of degree `m`.
fn dirichlet_nodes(rule: &Legendre, m: usize) -> Vec<(f64, f64)> {
    let w = PI / m as f64;
    let mut out = vec![(w * 2f64.powi(-61), w * 2f64.powi(-60))];
    rule.geometric(w * 2f64.powi(-60), w, &mut out);
    if m > 1 {
        let count = m - 1;
        rule.uniform(w, (PI - w) / count as f64, count, &mut out);
    }
    out
}

fn spectral_exact(model: &SpectralModel, mt: &[usize], ms: &[usize], order: usize) -> f64 {
    let d = model.dim();
    let rule = Legendre::new(order);
    struct Axis {
        w: Vec<f64>,
        c: Vec<Complex64>,
        k: Vec<Complex64>,
    }
    let axes: Vec<Axis> = (0..d)
        .map(|a| {
            let nodes = dirichlet_nodes(&rule, mt[a].max(ms[a]));
            Axis {
                w: nodes.iter().map(|n| n.1).collect(),
                c: nodes.iter().map(|n| model.axis_one_minus_p(a, n.0)).collect(),
                k: nodes.iter().map(|n| dirichlet(mt[a], n.0) * dirichlet(ms[a], n.0).conj()).collect(),
            }
        })
        .collect();
    let sizes: Vec<usize> = axes.iter().map(|x| x.w.len()).collect();
    let total_nodes: usize = sizes.iter().product();
    let mut sum = 0.0;
    let mut idx = vec![0usize; d];
    // sign patterns with the first axis positive; the rest follows by conjugation
    for pattern in 0..(1usize << (d - 1)) {
        for r in 0..total_nodes {
            let mut rem = r;
            for a in 0..d {
                idx[a] = rem % sizes[a];
                rem /= sizes[a];
            }
            let mut one_minus = Complex64::new(0.0, 0.0);
            let mut kern = Complex64::new(1.0, 0.0);
            let mut w = 1.0;
            for a in 0..d {
                let neg = a > 0 && (pattern >> (a - 1)) & 1 == 1;
                let (c, k) = (axes[a].c[idx[a]], axes[a].k[idx[a]]);
                let (c, k) = if neg { (c.conj(), k.conj()) } else { (c, k) };
                one_minus = one_minus + c - one_minus * c;
                kern *= k;
                w *= axes[a].w[idx[a]];
            }
            sum += w * kern.re / one_minus.norm_sqr();
        }
    }
    2.0 * sum / (2.0 * PI).powi(d as i32)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ParsevalReport {
    pub sum_sq: f64,
    pub integral: f64,
    pub rel_discrepancy: f64,
    pub est_error: f64,
}

/// Compares `sum q^2` with `(2 pi)^{-d} int |1 - P_N|^{-2}`, where `P_N` is
/// the same `[1,N]^d`-truncated step law the table was built from.
pub fn parseval_check(model: &SpectralModel, table: &QTable, order: usize) -> Result<ParsevalReport> {
    let hi = parseval_integral(model, table.extent, order);
    let lo = parseval_integral(model, table.extent, order.saturating_sub(3).max(2));
    if !hi.is_finite() {
        return Err(Error::Numerical("Parseval integral did not converge (non-finite value)".into()));
    }
    Ok(ParsevalReport {
        sum_sq: table.sum_sq,
        integral: hi,
        rel_discrepancy: (table.sum_sq - hi).abs() / table.sum_sq,
        est_error: (hi - lo).abs(),
    })
}

fn parseval_integral(model: &SpectralModel, n: usize, order: usize) -> f64 {
    let d = model.dim();
    let rule = Legendre::new(order);
    let levels = 40 + (usize::BITS - n.leading_zeros()) as i32;
    let lo = PI * 2f64.powi(-levels);
    let mut nodes = vec![(0.5 * lo, lo)];
    rule.geometric(lo, PI, &mut nodes);
    let sizes = nodes.len();
    let total: usize = sizes.pow(d as u32);
    let per_axis: Option<Vec<Vec<Complex64>>> = match model.family {
        Family::ProductPareto => Some(
            (0..d)
                .map(|a| {
                    nodes
                        .iter()
                        .map(|&(x, _)| axis_truncated_p(model, a, x, n))
                        .collect()
                })
                .collect(),
        ),
        Family::CustomPmf(_) => None,
    };
    let mut sum = 0.0;
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    for pattern in 0..(1usize << (d - 1)) {
        for r in 0..total {
            let mut rem = r;
            let mut w = 1.0;
            for a in 0..d {
                idx[a] = rem % sizes;
                rem /= sizes;
                let neg = a > 0 && (pattern >> (a - 1)) & 1 == 1;
                x[a] = if neg { -nodes[idx[a]].0 } else { nodes[idx[a]].0 };
                w *= nodes[idx[a]].1;
            }
            let p = match &per_axis {
                Some(v) => (0..d)
                    .map(|a| if x[a] < 0.0 { v[a][idx[a]].conj() } else { v[a][idx[a]] })
                    .product(),
                None => model.fourier_p(&x, n as i64).0,
            };
            sum += w / (Complex64::new(1.0, 0.0) - p).norm_sqr();
        }
    }
    2.0 * sum / PI.powi(d as i32) / 2f64.powi(d as i32)
}

fn axis_truncated_p(model: &SpectralModel, a: usize, x: f64, n: usize) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for m in 1..=n {
        s += Complex64::from_polar(model.axis_pmf(a, m as i64), x * m as f64);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_models::PmfTable;

    fn table_model(entries: Vec<(Vec<i64>, f64)>, alphas: &[f64]) -> SpectralModel {
        SpectralModel::custom(PmfTable::new(entries).unwrap(), alphas, None, 0.5).unwrap()
    }

    #[test]
    fn two_point_law_hand_recursion() {
        let m = table_model(vec![(vec![1], 0.5), (vec![2], 0.5)], &[0.3]);
        let t = build_qtable(&m, 4, 1 << 20).unwrap();
        let want = [1.0, 0.5, 0.75, 0.625, 0.6875];
        for (a, b) in t.values.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn point_masses_give_deterministic_tables() {
        let m = table_model(vec![(vec![1], 1.0)], &[0.3]);
        let t = build_qtable(&m, 16, 1 << 20).unwrap();
        assert!(t.values.iter().all(|&v| v == 1.0));
        assert_eq!(t.pair_meeting_prob(&[5]).value, (16.0 - 5.0 + 1.0) / 17.0);
        let m2 = table_model(vec![(vec![1, 1], 1.0)], &[0.3, 0.3]);
        let t2 = build_qtable(&m2, 6, 1 << 20).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(t2.get(&[i, j]), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn product_fast_path_matches_direct_recursion() {
        let m = SpectralModel::product_pareto(&[0.6, 0.8], 0.5).unwrap();
        let t = build_qtable(&m, 12, 1 << 20).unwrap();
        let r = recursion_residual(&m, &t).unwrap();
        assert!(r < 1e-14, "{r}");
        assert_eq!(t.values[0], 1.0);
        assert!(t.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn sigma_x2_degenerate_marginals() {
        let m = SpectralModel::product_pareto(&[0.3], 0.5).unwrap();
        let t = build_qtable(&m, 64, 1 << 20).unwrap();
        assert_eq!(t.sigma_x2(0.0), 0.0);
        assert_eq!(t.sigma_x2(1.0), 0.0);
        assert!((t.sigma_x2(0.5) - 1.0 / t.sum_sq).abs() < 1e-15);
    }

    #[test]
    fn single_cell_box_reverses_q() {
        let m = SpectralModel::product_pareto(&[0.3], 0.5).unwrap();
        let t = build_qtable(&m, 64, 1 << 20).unwrap();
        let b = b_coefficients(&t, &[1]).unwrap();
        assert!((b.norm_sq - t.sum_sq).abs() < 1e-12);
        assert_eq!(t.pair_meeting_prob(&[0]).value, 1.0);
    }

    #[test]
    fn b_norm_matches_brute_force_for_unit_steps() {
        let m = table_model(vec![(vec![1], 1.0)], &[0.3]);
        let big = 40;
        let t = build_qtable(&m, big, 1 << 20).unwrap();
        let n = 7usize;
        // brute force over j in [-N, n-1]
        let mut want = 0.0;
        for j in -(big as i64)..n as i64 {
            let mut b = 0.0;
            for k in 0..n as i64 {
                b += t.get(&[k - j]);
            }
            want += b * b;
        }
        let got = b_coefficients(&t, &[n]).unwrap();
        assert!((got.norm_sq - want).abs() < 1e-9);
        assert_eq!(got.sup, n as f64);
    }

    #[test]
    fn coefficient_and_table_spectral_paths_agree() {
        let m = SpectralModel::product_pareto(&[0.6, 0.7], 0.5).unwrap();
        let t = build_qtable(&m, 24, 1 << 20).unwrap();
        let a = prelimit_cov(&m, &t, 1.0, &[9, 5], &[6, 8], PrelimitPath::Coefficients).unwrap();
        let b = prelimit_cov(&m, &t, 1.0, &[9, 5], &[6, 8], PrelimitPath::SpectralTable).unwrap();
        assert!((a.value - b.value).abs() < 1e-9 * a.value, "{a:?} {b:?}");
    }

    #[test]
    fn empty_box_gives_zero() {
        let m = SpectralModel::product_pareto(&[0.3], 0.5).unwrap();
        let t = build_qtable(&m, 32, 1 << 20).unwrap();
        let v = prelimit_cov(&m, &t, 1.0, &[0], &[5], PrelimitPath::Coefficients).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let m = SpectralModel::product_pareto(&[0.6, 0.6], 0.5).unwrap();
        assert!(matches!(build_qtable(&m, 100, 1000), Err(Error::Resource(_))));
    }
}
