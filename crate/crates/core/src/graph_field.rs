//! Simulation of the ancestor graph on a lattice window and the `+-1` field
//! it carries.

use crate::error::{Error, Result};
use crate::rng;
use crate::spectral_models::SpectralModel;
use crate::stats;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

/// Default bound on tracked lattice points per window.
pub const DEFAULT_SITE_BUDGET: u64 = 100_000_000;

/// Dense storage is used when the tracked box has at most this many points.
const DENSE_LIMIT: u64 = 1 << 22;

/// `ceil(n^{1/alpha'_k})` per axis.
pub fn window_extents(n: f64, alpha_primes: &[f64]) -> Vec<usize> {
    alpha_primes.iter().map(|a| guarded_ceil(n.powf(1.0 / a))).collect()
}

/// `ceil(n_k t_k)` per axis.
pub fn box_extents(extents: &[usize], t: &[f64]) -> Vec<usize> {
    extents.iter().zip(t).map(|(&n, &tk)| guarded_ceil(n as f64 * tk)).collect()
}

/// Ceiling that treats values within rounding noise of an integer as that
/// integer (`0.1 * 10` is 1, not 2).
fn guarded_ceil(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// A simulated window `prod [0, n_k - 1]`, values in colex order.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldWindow {
    pub extents: Vec<usize>,
    pub buffer_depth: usize,
    pub values: Vec<i8>,
    /// Component label per site, numbered by first discovery.
    pub component_id: Vec<u32>,
    /// Components whose ancestral chains left the tracked box before merging.
    /// Every chain ends this way, so this equals the number of distinct
    /// components met by the window.
    pub truncated_components: usize,
    pub tracked_sites: usize,
    pub seed: u64,
}

impl FieldWindow {
    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Truncated components per window site.
    pub fn truncated_fraction(&self) -> f64 {
        self.truncated_components as f64 / self.values.len() as f64
    }

    pub fn index(&self, k: &[usize]) -> usize {
        k.iter().zip(&self.extents).rev().fold(0, |acc, (&c, &n)| acc * n + c)
    }
}

/// Dense or hashed map from tracked points to node ids.
enum Store {
    Dense(Vec<u32>),
    Sparse(FxHashMap<u64, u32>),
}

impl Store {
    fn get(&self, i: u64) -> Option<u32> {
        match self {
            Store::Dense(v) => Some(v[i as usize]).filter(|&x| x != u32::MAX),
            Store::Sparse(m) => m.get(&i).copied(),
        }
    }

    fn insert(&mut self, i: u64, id: u32) {
        match self {
            Store::Dense(v) => v[i as usize] = id,
            Store::Sparse(m) => {
                m.insert(i, id);
            }
        }
    }
}

/// Tracked box `prod [-D, n_k - 1]` with linear indexing.
struct Tracked {
    lo: i64,
    sizes: Vec<u64>,
}

impl Tracked {
    fn new(extents: &[usize], depth: usize) -> Result<Self> {
        let sizes: Vec<u64> = extents.iter().map(|&n| (n + depth) as u64).collect();
        sizes
            .iter()
            .try_fold(1u64, |acc, &s| acc.checked_mul(s))
            .ok_or_else(|| Error::Resource("tracked box does not fit 64-bit indexing".into()))?;
        Ok(Tracked { lo: -(depth as i64), sizes })
    }

    fn volume(&self) -> u64 {
        self.sizes.iter().product()
    }

    fn inside(&self, x: &[i64]) -> bool {
        x.iter().all(|&c| c >= self.lo)
    }

    fn linear(&self, x: &[i64]) -> u64 {
        x.iter().zip(&self.sizes).rev().fold(0, |acc, (&c, &s)| acc * s + (c - self.lo) as u64)
    }

    fn coords(&self, mut i: u64, out: &mut [i64]) {
        for (o, &s) in out.iter_mut().zip(&self.sizes) {
            *o = (i % s) as i64 + self.lo;
            i /= s;
        }
    }
}

/// Component resolution of the ancestor graph seen from a set of start sites.
struct Forest {
    tracked: Tracked,
    store: Store,
    parent: Vec<u32>,
    point: Vec<u64>,
    budget: u64,
}

impl Forest {
    fn new(tracked: Tracked, budget: u64, hint: usize) -> Self {
        let store = if tracked.volume() <= DENSE_LIMIT {
            Store::Dense(vec![u32::MAX; tracked.volume() as usize])
        } else {
            Store::Sparse(FxHashMap::with_capacity_and_hasher(hint, Default::default()))
        };
        Forest { tracked, store, parent: Vec::with_capacity(hint), point: Vec::with_capacity(hint), budget }
    }

    fn add(&mut self, lin: u64) -> Result<u32> {
        let id = self.parent.len() as u32;
        if id as u64 >= self.budget || id == u32::MAX {
            return Err(Error::Resource(format!(
                "ancestor traversal exceeded the site budget of {} points",
                self.budget
            )));
        }
        self.parent.push(id);
        self.point.push(lin);
        self.store.insert(lin, id);
        Ok(id)
    }

    fn find(&mut self, mut x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[x as usize] != root {
            let next = self.parent[x as usize];
            self.parent[x as usize] = root;
            x = next;
        }
        root
    }

    /// Follows the chain from `start` until it joins a tracked point or leaves
    /// the box; returns the root (chain terminal) of its component.
    fn resolve(&mut self, model: &SpectralModel, seed: u64, start: &[i64]) -> Result<u32> {
        let d = start.len();
        let lin = self.tracked.linear(start);
        if let Some(id) = self.store.get(lin) {
            return Ok(self.find(id));
        }
        let mut cur = self.add(lin)?;
        let mut x = start.to_vec();
        let mut step = vec![0i64; d];
        loop {
            model.sample_step(rng::key(seed, rng::tag::STEP, &x), &mut step);
            for k in 0..d {
                x[k] = x[k].saturating_sub(step[k]);
            }
            if !self.tracked.inside(&x) {
                return Ok(self.find(cur));
            }
            let lin = self.tracked.linear(&x);
            if let Some(id) = self.store.get(lin) {
                let root = self.find(id);
                self.parent[cur as usize] = root;
                return Ok(root);
            }
            let next = self.add(lin)?;
            self.parent[cur as usize] = next;
            cur = next;
        }
    }

    fn sign(&self, root: u32, seed: u64, p: f64) -> i8 {
        let mut x = vec![0i64; self.tracked.sizes.len()];
        self.tracked.coords(self.point[root as usize], &mut x);
        if rng::uniform_at(rng::key(seed, rng::tag::SIGN, &x), 0) < p {
            1
        } else {
            -1
        }
    }
}

fn check_window(model: &SpectralModel, extents: &[usize], buffer_depth: usize) -> Result<()> {
    if extents.len() != model.dim() {
        return Err(Error::Config(format!("{} extents for a {}-dimensional model", extents.len(), model.dim())));
    }
    if extents.iter().any(|&n| n == 0) {
        return Err(Error::Config("window extents must be at least 1".into()));
    }
    if buffer_depth == 0 {
        return Err(Error::Config("buffer depth must be at least 1".into()));
    }
    Ok(())
}

/// Simulates the field on `prod [0, n_k - 1]`, tracking ancestral chains down
/// to depth `-buffer_depth`.
pub fn simulate_window(
    model: &SpectralModel,
    extents: &[usize],
    buffer_depth: usize,
    seed: u64,
    site_budget: u64,
) -> Result<FieldWindow> {
    check_window(model, extents, buffer_depth)?;
    let d = extents.len();
    let sites: usize = extents.iter().product();
    if sites as u64 > site_budget {
        return Err(Error::Resource(format!("window of {sites} sites exceeds the site budget of {site_budget}")));
    }
    let mut forest = Forest::new(Tracked::new(extents, buffer_depth)?, site_budget, 2 * sites);
    let mut roots = Vec::with_capacity(sites);
    let mut x = vec![0i64; d];
    for idx in 0..sites {
        let mut r = idx;
        for k in 0..d {
            x[k] = (r % extents[k]) as i64;
            r /= extents[k];
        }
        roots.push(forest.resolve(model, seed, &x)?);
    }
    // final roots after all merges, labelled by first appearance
    let mut label: FxHashMap<u32, u32> = FxHashMap::default();
    let mut sign: Vec<i8> = Vec::new();
    let mut values = Vec::with_capacity(sites);
    let mut component_id = Vec::with_capacity(sites);
    for r in roots {
        let root = forest.find(r);
        let next = label.len() as u32;
        let id = *label.entry(root).or_insert(next);
        if id as usize == sign.len() {
            sign.push(forest.sign(root, seed, model.p));
        }
        values.push(sign[id as usize]);
        component_id.push(id);
    }
    Ok(FieldWindow {
        extents: extents.to_vec(),
        buffer_depth,
        values,
        component_id,
        truncated_components: label.len(),
        tracked_sites: forest.parent.len(),
        seed,
    })
}

/// Rectangular sums `S(t)` over `prod [0, ceil(n_k t_k) - 1]`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PartialSumGrid {
    pub t_grid: Vec<Vec<f64>>,
    pub sums: Vec<i64>,
    pub extents: Vec<usize>,
    pub replica: u64,
    pub seed: u64,
}

impl PartialSumGrid {
    /// `S(t) - (2p - 1) |R(n, t)|`.
    pub fn centered(&self, p: f64) -> Vec<f64> {
        self.t_grid
            .iter()
            .zip(&self.sums)
            .map(|(t, &s)| s as f64 - (2.0 * p - 1.0) * box_extents(&self.extents, t).iter().product::<usize>() as f64)
            .collect()
    }
}

pub fn partial_sums(window: &FieldWindow, t_grid: &[Vec<f64>], replica: u64) -> Result<PartialSumGrid> {
    let d = window.dim();
    for t in t_grid {
        if t.len() != d || t.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::Domain(format!("grid point {t:?} outside (0,1]^{d}")));
        }
    }
    // prefix sums, one axis at a time
    let mut pre: Vec<i64> = window.values.iter().map(|&v| v as i64).collect();
    let mut stride = 1;
    for &n in &window.extents {
        for i in 0..pre.len() {
            if (i / stride) % n > 0 {
                pre[i] += pre[i - stride];
            }
        }
        stride *= n;
    }
    let sums = t_grid
        .iter()
        .map(|t| {
            let m = box_extents(&window.extents, t);
            let corner: Vec<usize> = m.iter().map(|&c| c - 1).collect();
            pre[window.index(&corner)]
        })
        .collect();
    Ok(PartialSumGrid {
        t_grid: t_grid.to_vec(),
        sums,
        extents: window.extents.clone(),
        replica,
        seed: window.seed,
    })
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub replicas: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct VarXStar {
    pub estimate: Estimate,
    /// `4 mu([1,inf)^d \ [1,K]^d)`, the deterministic bound on the error of
    /// dropping lags beyond `K`.
    pub truncation_bound: f64,
    pub k: usize,
    pub buffer_depth: usize,
}

/// Sample variance of `X_0 - sum_{k in [1,K]^d} pmf(k) X_{-k}` over replicas.
///
/// Each replica simulates the window `[0, K]^d` and reads the innovation at
/// its top corner, which plays the role of the origin.
pub fn estimate_var_xstar(
    model: &SpectralModel,
    replicas: usize,
    k: usize,
    buffer_depth: usize,
    seed: u64,
) -> Result<VarXStar> {
    let d = model.dim();
    if replicas < 2 || k < 1 {
        return Err(Error::Config("need at least 2 replicas and K >= 1".into()));
    }
    let extents = vec![k + 1; d];
    let cells = (k + 1).pow(d as u32);
    let mut weights = vec![0.0; cells];
    let mut lag = vec![0i64; d];
    for (idx, w) in weights.iter_mut().enumerate() {
        let mut r = idx;
        for c in lag.iter_mut() {
            *c = k as i64 - (r % (k + 1)) as i64;
            r /= k + 1;
        }
        if lag.iter().all(|&c| c >= 1) {
            *w = model.pmf(&lag)?;
        }
    }
    use rayon::prelude::*;
    let samples: Vec<Result<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let s = rng::replica_seed(seed, 0x5a, r as u64);
            let w = simulate_window(model, &extents, buffer_depth, s, DEFAULT_SITE_BUDGET)?;
            let x0 = *w.values.last().unwrap() as f64;
            let past: f64 = weights.iter().zip(&w.values).map(|(a, &v)| a * v as f64).sum();
            Ok(x0 - past)
        })
        .collect();
    let samples: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
    let value = stats::variance(&samples);
    let se = stats::jackknife_se(&samples, stats::variance);
    Ok(VarXStar {
        estimate: Estimate { value, se, replicas },
        truncation_bound: 4.0 * (1.0 - model.box_mass(k as i64)),
        k,
        buffer_depth,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeetingEstimate {
    pub estimate: Estimate,
    pub depth: usize,
}

/// Frequency with which the ancestral lines of `0` and `m` share a point
/// within `prod [-depth, max(0, m_k)]`. Truncation can only miss meetings.
pub fn estimate_meeting_prob(
    model: &SpectralModel,
    offset: &[i64],
    replicas: usize,
    depth: usize,
    seed: u64,
) -> Result<MeetingEstimate> {
    let d = model.dim();
    if offset.len() != d {
        return Err(Error::Config("offset dimension differs from the model".into()));
    }
    if replicas < 2 {
        return Err(Error::Config("need at least 2 replicas".into()));
    }
    let lo = -(depth as i64);
    let line = |start: &[i64], s: u64, seen: &mut FxHashSet<Vec<i64>>, stop_on_hit: bool| -> bool {
        let mut x = start.to_vec();
        let mut step = vec![0i64; d];
        loop {
            if stop_on_hit {
                if seen.contains(&x) {
                    return true;
                }
            } else {
                seen.insert(x.clone());
            }
            model.sample_step(rng::key(s, rng::tag::STEP, &x), &mut step);
            for k in 0..d {
                x[k] = x[k].saturating_sub(step[k]);
            }
            if x.iter().any(|&c| c < lo) {
                return false;
            }
        }
    };
    use rayon::prelude::*;
    let hits: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let s = rng::replica_seed(seed, 0x3e, r as u64);
            let mut seen = FxHashSet::default();
            line(&vec![0; d], s, &mut seen, false);
            if line(offset, s, &mut seen, true) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let value = stats::mean(&hits);
    let se = (value * (1.0 - value) / (replicas as f64 - 1.0)).sqrt();
    Ok(MeetingEstimate { estimate: Estimate { value, se, replicas }, depth })
}
