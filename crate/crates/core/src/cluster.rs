//! Bath-spin clusters and the subset lattice they live on.
//!
//! Clusters order by size first and lexicographically within a size. Every
//! lattice sweep in the crate follows this order, so sorted containers
//! (`BTreeMap<Cluster, _>`) iterate bottom-up.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use nalgebra::Vector3;

use crate::error::{Error, Result};

/// A set of bath-spin indices, stored strictly ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Cluster {
    members: Vec<usize>,
}

impl Cluster {
    /// Sorts `members`; repeated indices are an error.
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!(
                "cluster {members:?} repeats a bath index"
            )));
        }
        Ok(Cluster { members })
    }

    pub fn empty() -> Self {
        Cluster::default()
    }

    /// `{0, 1, …, n-1}`.
    pub fn full(n: usize) -> Self {
        Cluster {
            members: (0..n).collect(),
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn order(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &Cluster) -> bool {
        self.members.iter().all(|&i| other.contains(i))
    }

    /// Every subset including `∅` and `self`, in lattice order.
    pub fn subsets(&self) -> Vec<Cluster> {
        let k = self.members.len();
        let mut out: Vec<Cluster> = (0u64..(1u64 << k))
            .map(|mask| Cluster {
                members: (0..k)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| self.members[b])
                    .collect(),
            })
            .collect();
        out.sort();
        out
    }
}

impl Ord for Cluster {
    fn cmp(&self, other: &Self) -> Ordering {
        self.members
            .len()
            .cmp(&other.members.len())
            .then_with(|| self.members.cmp(&other.members))
    }
}

impl PartialOrd for Cluster {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Cluster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.members.iter().join(","))
    }
}

/// All `2^|C| - 1` proper subsets of `c`, size-then-lexicographic.
pub fn proper_subclusters(c: &Cluster) -> Vec<Cluster> {
    let mut subs = c.subsets();
    subs.pop();
    subs
}

/// `μ(sub, sup) = (-1)^(|sup|-|sub|)` when `sub ⊆ sup`, else 0.
pub fn mobius_coefficient(sub: &Cluster, sup: &Cluster) -> i64 {
    if !sub.is_subset_of(sup) {
        return 0;
    }
    if (sup.order() - sub.order()).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn lookup(values: &BTreeMap<Cluster, f64>, c: &Cluster) -> Result<f64> {
    values
        .get(c)
        .copied()
        .ok_or_else(|| Error::IncompleteLattice(format!("no value for subcluster {c}")))
}

/// `g(C) = Σ_{C'⊆C} (-1)^(|C|-|C'|) f(C')`.
pub fn mobius_invert(values: &BTreeMap<Cluster, f64>, target: &Cluster) -> Result<f64> {
    target.subsets().iter().try_fold(0.0, |acc, sub| {
        Ok(acc + mobius_coefficient(sub, target) as f64 * lookup(values, sub)?)
    })
}

/// `f(C) = Σ_{C'⊆C} g(C')`.
pub fn zeta_transform(irreducible: &BTreeMap<Cluster, f64>, target: &Cluster) -> Result<f64> {
    target
        .subsets()
        .iter()
        .try_fold(0.0, |acc, sub| Ok(acc + lookup(irreducible, sub)?))
}

/// A subset-closed family of clusters up to a truncation order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    clusters: Vec<Cluster>,
    truncation_order: usize,
    cutoff: Option<f64>,
}

impl ClusterSet {
    /// Closes `clusters` under subsets and sorts them into lattice order.
    pub fn from_clusters(clusters: impl IntoIterator<Item = Cluster>, cutoff: Option<f64>) -> Self {
        let mut set = BTreeSet::new();
        for c in clusters {
            set.extend(c.subsets());
        }
        set.insert(Cluster::empty());
        let truncation_order = set.iter().map(Cluster::order).max().unwrap_or(0);
        ClusterSet {
            clusters: set.into_iter().collect(),
            truncation_order,
            cutoff,
        }
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn truncation_order(&self) -> usize {
        self.truncation_order
    }

    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    pub fn contains(&self, c: &Cluster) -> bool {
        self.clusters.binary_search(c).is_ok()
    }

    pub fn of_order(&self, k: usize) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(move |c| c.order() == k)
    }

    pub fn is_subset_closed(&self) -> bool {
        self.clusters
            .iter()
            .all(|c| proper_subclusters(c).iter().all(|s| self.contains(s)))
    }
}

/// All clusters of at most `max_order` bath spins, `∅` included.
///
/// With `cutoff` (Å) and `positions`, a cluster is kept only when its members
/// are connected under pairwise distance `≤ cutoff`; the result is then
/// closed under subsets again.
pub fn enumerate_clusters(
    n_bath: usize,
    max_order: usize,
    positions: Option<&[Vector3<f64>]>,
    cutoff: Option<f64>,
) -> Result<ClusterSet> {
    if max_order > n_bath {
        return Err(Error::invalid(format!(
            "truncation order {max_order} exceeds the bath size {n_bath}"
        )));
    }
    let connectivity = match (positions, cutoff) {
        (Some(p), Some(r)) => {
            if p.len() != n_bath {
                return Err(Error::invalid(format!(
                    "{} positions for {n_bath} bath spins",
                    p.len()
                )));
            }
            if !(r > 0.0) {
                return Err(Error::invalid(format!("cutoff {r} must be positive")));
            }
            Some((p, r))
        }
        (None, Some(_)) => {
            return Err(Error::invalid("a distance cutoff needs bath positions"));
        }
        _ => None,
    };

    let mut kept = vec![Cluster::empty()];
    for k in 1..=max_order {
        for combo in (0..n_bath).combinations(k) {
            let c = Cluster { members: combo };
            if let Some((p, r)) = connectivity {
                if !is_connected(&c, p, r) {
                    continue;
                }
            }
            kept.push(c);
        }
    }
    let mut set = ClusterSet::from_clusters(kept, cutoff);
    set.truncation_order = max_order;
    Ok(set)
}

fn is_connected(c: &Cluster, positions: &[Vector3<f64>], cutoff: f64) -> bool {
    let m = c.members();
    if m.len() <= 1 {
        return true;
    }
    let mut reached = vec![false; m.len()];
    let mut stack = vec![0];
    reached[0] = true;
    while let Some(a) = stack.pop() {
        for b in 0..m.len() {
            if !reached[b] && (positions[m[a]] - positions[m[b]]).norm() <= cutoff {
                reached[b] = true;
                stack.push(b);
            }
        }
    }
    reached.into_iter().all(|r| r)
}
