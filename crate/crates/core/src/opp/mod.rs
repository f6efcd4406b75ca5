//! Optimal PMU placement under topological observability.
//!
//! A PMU observes its own bus and every adjacent bus. Buses without a
//! generator (ZGIBs) add virtual edges between the buses around them. Bus
//! sets are bitmasks, so a topology is limited to 128 buses.

use std::cmp::Ordering;
use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::PowerSystem;

/// Largest number of subsets [`brute_force_opp`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

const MAX_BUSES: usize = 128;

/// Bus graph and generator placement, the only inputs placement depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub adjacency: Vec<Vec<u8>>,
    pub has_generator: Vec<bool>,
    /// External bus numbers used in reports.
    pub labels: Vec<usize>,
}

impl Topology {
    pub fn new(adjacency: Vec<Vec<u8>>, has_generator: Vec<bool>) -> Result<Topology> {
        let n = adjacency.len();
        if n == 0 || n > MAX_BUSES {
            return Err(invalid(format!("topology needs 1..={MAX_BUSES} buses, got {n}")));
        }
        if has_generator.len() != n {
            return Err(Error::Shape { expected: n.to_string(), got: has_generator.len().to_string() });
        }
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape { expected: format!("{n} columns"), got: row.len().to_string() });
            }
            for (j, &a) in row.iter().enumerate() {
                if a > 1 || a != adjacency[j][i] || (i == j && a != 0) {
                    return Err(invalid("adjacency must be binary, symmetric and zero-diagonal"));
                }
            }
        }
        Ok(Topology { adjacency, has_generator, labels: (1..=n).collect() })
    }

    pub fn from_system(sys: &PowerSystem) -> Topology {
        let mut has_generator = vec![false; sys.n_buses()];
        for g in sys.generator_buses() {
            has_generator[g] = true;
        }
        Topology { adjacency: sys.adjacency(), has_generator, labels: sys.buses.iter().map(|b| b.number).collect() }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if self.adjacency[u][v] == 1 && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Same graph with bus `i` renamed `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Topology {
        let n = self.n();
        let mut adjacency = vec![vec![0; n]; n];
        let mut has_generator = vec![false; n];
        let mut labels = vec![0; n];
        for i in 0..n {
            has_generator[perm[i]] = self.has_generator[i];
            labels[perm[i]] = self.labels[i];
            for j in 0..n {
                adjacency[perm[i]][perm[j]] = self.adjacency[i][j];
            }
        }
        Topology { adjacency, has_generator, labels }
    }
}

/// Which buses count as endpoints of ZGIB virtual edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZgibMode {
    /// Pairs of generator buses sharing a ZGIB neighbour.
    #[default]
    NeighborPairs,
    /// Pairs of any buses sharing a ZGIB neighbour, ZGIBs included.
    AllNeighbors,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZgibSet {
    pub buses: Vec<usize>,
    /// Virtual edges; symmetric with a zero diagonal.
    pub w: Vec<Vec<u8>>,
}

pub fn detect_zgib(topo: &Topology, mode: ZgibMode) -> ZgibSet {
    let n = topo.n();
    let buses: Vec<usize> = (0..n).filter(|&i| !topo.has_generator[i]).collect();
    let mut w = vec![vec![0u8; n]; n];
    for &z in &buses {
        let around: Vec<usize> = (0..n)
            .filter(|&j| topo.adjacency[z][j] == 1)
            .filter(|&j| mode == ZgibMode::AllNeighbors || topo.has_generator[j])
            .collect();
        for &a in &around {
            for &b in &around {
                if a != b {
                    w[a][b] = 1;
                }
            }
        }
    }
    ZgibSet { buses, w }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub x: Vec<u8>,
    pub budget: usize,
}

impl Placement {
    pub fn from_buses(n: usize, buses: &[usize], budget: usize) -> Result<Placement> {
        let mut x = vec![0u8; n];
        for &b in buses {
            if b >= n {
                return Err(invalid(format!("bus index {b} out of range for {n} buses")));
            }
            x[b] = 1;
        }
        let p = Placement { x, budget };
        p.validate()?;
        Ok(p)
    }

    pub fn buses(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&i| self.x[i] == 1).collect()
    }

    pub fn count(&self) -> usize {
        self.x.iter().filter(|&&v| v == 1).count()
    }

    fn validate(&self) -> Result<()> {
        if self.x.iter().any(|&v| v > 1) {
            return Err(invalid("placement entries must be 0 or 1"));
        }
        if self.count() > self.budget {
            return Err(invalid(format!("{} PMUs exceed budget {}", self.count(), self.budget)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub o: Vec<u8>,
    pub score: usize,
    pub fully_observable: bool,
}

/// Per-bus masks of the buses a PMU there observes.
fn cover_masks(topo: &Topology, zgib: Option<&ZgibSet>) -> Vec<u128> {
    let n = topo.n();
    (0..n)
        .map(|j| {
            let mut m = 1u128 << j;
            for i in 0..n {
                if topo.adjacency[i][j] == 1 || zgib.is_some_and(|z| z.w[i][j] == 1) {
                    m |= 1 << i;
                }
            }
            m
        })
        .collect()
}

fn report(n: usize, covered: u128) -> ObservabilityReport {
    let o: Vec<u8> = (0..n).map(|i| ((covered >> i) & 1) as u8).collect();
    let score = covered.count_ones() as usize;
    ObservabilityReport { o, score, fully_observable: score == n }
}

pub fn observability(x: &Placement, topo: &Topology, zgib: Option<&ZgibSet>) -> Result<ObservabilityReport> {
    let n = topo.n();
    if x.x.len() != n {
        return Err(Error::Shape { expected: n.to_string(), got: x.x.len().to_string() });
    }
    if zgib.is_some_and(|z| z.w.len() != n) {
        return Err(invalid("ZGIB matrix does not match the topology"));
    }
    x.validate()?;
    let masks = cover_masks(topo, zgib);
    let covered = x.buses().iter().fold(0u128, |acc, &j| acc | masks[j]);
    Ok(report(n, covered))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    MaxObservability,
    MinPmusFull,
}

impl Objective {
    pub fn parse(s: &str) -> Option<Objective> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max" | "max_observability" => Some(Objective::MaxObservability),
            "full" | "min_pmus_full" => Some(Objective::MinPmusFull),
            _ => None,
        }
    }
}

/// Best (score, set) so far; sets are visited in lexicographic order, so
/// only a strictly higher score replaces the incumbent.
struct Search<'a> {
    masks: &'a [u128],
    k: usize,
    best_score: u32,
    best: Option<Vec<usize>>,
    chosen: Vec<usize>,
    gains: Vec<u32>,
}

impl Search<'_> {
    fn dfs(&mut self, start: usize, covered: u128) {
        let n = self.masks.len();
        let left = self.k - self.chosen.len();
        if left == 0 {
            let s = covered.count_ones();
            if self.best.is_none() || s > self.best_score {
                self.best_score = s;
                self.best = Some(self.chosen.clone());
            }
            return;
        }
        if self.best.is_some() {
            // Coverage bound: the `left` largest marginal gains still available.
            self.gains.clear();
            self.gains.extend(self.masks[start..].iter().map(|m| (m & !covered).count_ones()));
            self.gains.sort_unstable_by(|a, b| b.cmp(a));
            let bound = covered.count_ones() + self.gains.iter().take(left).sum::<u32>();
            if bound <= self.best_score {
                return;
            }
        }
        for j in start..=n - left {
            self.chosen.push(j);
            self.dfs(j + 1, covered | self.masks[j]);
            self.chosen.pop();
        }
    }
}

fn best_of_size(masks: &[u128], k: usize) -> (Vec<usize>, u128) {
    let mut s = Search { masks, k, best_score: 0, best: None, chosen: Vec::with_capacity(k), gains: Vec::new() };
    s.dfs(0, 0);
    let set = s.best.unwrap_or_default();
    let covered = set.iter().fold(0u128, |acc, &j| acc | masks[j]);
    (set, covered)
}

/// Exact placement by branch and bound; ties go to the lexicographically
/// smallest bus-index set.
pub fn solve_opp(
    topo: &Topology,
    budget: usize,
    zgib: Option<ZgibMode>,
    objective: Objective,
) -> Result<(Placement, ObservabilityReport)> {
    let n = topo.n();
    let z = zgib.map(|m| detect_zgib(topo, m));
    let masks = cover_masks(topo, z.as_ref());
    match objective {
        Objective::MaxObservability => {
            if budget == 0 {
                return Err(invalid("budget must be at least 1"));
            }
            let (set, covered) = best_of_size(&masks, budget.min(n));
            Ok((Placement::from_buses(n, &set, budget)?, report(n, covered)))
        }
        Objective::MinPmusFull => {
            if !topo.is_connected() {
                return Err(Error::Infeasible("full observability needs a connected bus graph".into()));
            }
            for k in 1..=n {
                let (set, covered) = best_of_size(&masks, k);
                if covered.count_ones() as usize == n {
                    return Ok((Placement::from_buses(n, &set, k)?, report(n, covered)));
                }
            }
            unreachable!("a PMU on every bus observes every bus")
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Highest-scoring set among combinations of `n` starting with `first`.
fn scan_prefix(masks: &[u128], k: usize, first: usize) -> (u32, Vec<usize>) {
    let n = masks.len();
    let mut idx: Vec<usize> = (first..first + k).collect();
    let mut best = (0u32, Vec::new());
    loop {
        let s = idx.iter().fold(0u128, |acc, &j| acc | masks[j]).count_ones();
        if best.1.is_empty() || s > best.0 {
            best = (s, idx.clone());
        }
        // Advance positions 1.. in lexicographic order; position 0 is fixed.
        let mut p = k;
        loop {
            if p <= 1 {
                return best;
            }
            p -= 1;
            if idx[p] < n - k + p {
                break;
            }
        }
        idx[p] += 1;
        for q in p + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Exhaustive search over every `budget`-sized set, same tie-break as
/// [`solve_opp`].
pub fn brute_force_opp(topo: &Topology, budget: usize, zgib: Option<ZgibMode>) -> Result<Placement> {
    let n = topo.n();
    if budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    let k = budget.min(n);
    let count = binomial(n, k);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::TooManySubsets(count));
    }
    let z = zgib.map(|m| detect_zgib(topo, m));
    let masks = cover_masks(topo, z.as_ref());
    let (_, set) = (0..=n - k)
        .into_par_iter()
        .map(|first| scan_prefix(&masks, k, first))
        .reduce_with(|a, b| match b.0.cmp(&a.0) {
            Ordering::Greater => b,
            Ordering::Less => a,
            Ordering::Equal => std::cmp::min(a, b),
        })
        .expect("at least one prefix");
    Placement::from_buses(n, &set, budget)
}

/// CSV with columns bus, pmu, observed.
pub fn observability_csv(topo: &Topology, x: &Placement, r: &ObservabilityReport) -> String {
    let mut out = String::from("bus,pmu,observed\n");
    for i in 0..topo.n() {
        out.push_str(&format!("{},{},{}\n", topo.labels[i], x.x[i], r.o[i]));
    }
    out
}
