//! Algebraic partitioning of the index set, overlap growth along the matrix
//! graph and greedy coloring of interacting subdomains.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionStrategy {
    /// Consecutive index blocks, larger blocks first.
    Contiguous,
    /// Breadth-first growth over the adjacency graph of `A`.
    GreedyGraph,
}

impl std::str::FromStr for PartitionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contiguous" => Ok(Self::Contiguous),
            "greedy_graph" => Ok(Self::GreedyGraph),
            other => Err(Error::Config(format!("unknown partition strategy `{other}`"))),
        }
    }
}

impl PartitionStrategy {
    pub fn name(self) -> &'static str {
        match self {
            Self::Contiguous => "contiguous",
            Self::GreedyGraph => "greedy_graph",
        }
    }
}

/// Owned sets `D_i`, their overlapped extensions `D_i^δ` and a coloring of
/// the subdomains. All index sets are sorted ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapPartition {
    n_dofs: usize,
    owned: Vec<Vec<usize>>,
    overlapped: Vec<Vec<usize>>,
    delta: usize,
    colors: Vec<usize>,
}

impl OverlapPartition {
    pub fn build(
        a: &SparseMatrix,
        n_subdomains: usize,
        strategy: PartitionStrategy,
        delta: usize,
    ) -> Result<Self> {
        let owned = partition_indices(a, n_subdomains, strategy)?;
        Self::from_owned(a, owned, delta)
    }

    /// Builds the overlap and coloring for caller-supplied owned sets, which
    /// must be disjoint, nonempty and cover `{0..n-1}`.
    pub fn from_owned(a: &SparseMatrix, owned: Vec<Vec<usize>>, delta: usize) -> Result<Self> {
        let n = a.n_rows();
        validate_owned(&owned, n)?;
        let owned: Vec<Vec<usize>> = owned
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s
            })
            .collect();
        let overlapped = owned.iter().map(|d| grow_overlap(d, a, delta)).collect();
        let mut p = Self {
            n_dofs: n,
            owned,
            overlapped,
            delta,
            colors: Vec::new(),
        };
        p.colors = color_subdomains(&p, a);
        Ok(p)
    }

    /// Explicit overlapped sets, for tests and oracles where the subspaces
    /// are not generated by graph growth.
    pub fn from_sets(
        a: &SparseMatrix,
        owned: Vec<Vec<usize>>,
        overlapped: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let n = a.n_rows();
        validate_owned(&owned, n)?;
        if owned.len() != overlapped.len() {
            return Err(Error::Partition("owned and overlapped counts differ".into()));
        }
        let mut ov = Vec::with_capacity(overlapped.len());
        for (d, mut o) in owned.iter().zip(overlapped) {
            o.sort_unstable();
            o.dedup();
            if let Some(&bad) = o.iter().find(|&&k| k >= n) {
                return Err(Error::IndexOutOfRange { index: bad, len: n });
            }
            if d.iter().any(|k| o.binary_search(k).is_err()) {
                return Err(Error::Partition("owned set not contained in its overlap".into()));
            }
            ov.push(o);
        }
        let mut owned = owned;
        owned.iter_mut().for_each(|s| s.sort_unstable());
        let mut p = Self {
            n_dofs: n,
            owned,
            overlapped: ov,
            delta: 0,
            colors: Vec::new(),
        };
        p.colors = color_subdomains(&p, a);
        Ok(p)
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_subdomains(&self) -> usize {
        self.owned.len()
    }

    pub fn owned(&self, i: usize) -> &[usize] {
        &self.owned[i]
    }

    pub fn overlapped(&self, i: usize) -> &[usize] {
        &self.overlapped[i]
    }

    pub fn owned_sets(&self) -> &[Vec<usize>] {
        &self.owned
    }

    pub fn overlapped_sets(&self) -> &[Vec<usize>] {
        &self.overlapped
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn colors(&self) -> &[usize] {
        &self.colors
    }

    pub fn n_colors(&self) -> usize {
        self.colors.iter().max().map_or(0, |&c| c + 1)
    }

    /// Number of overlapped subdomains containing each unknown.
    pub fn multiplicity(&self) -> Vec<usize> {
        let mut count = vec![0usize; self.n_dofs];
        for set in &self.overlapped {
            for &k in set {
                count[k] += 1;
            }
        }
        count
    }

    /// Subdomains grouped by color, each group ascending.
    pub fn color_groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_colors()];
        for (i, &c) in self.colors.iter().enumerate() {
            groups[c].push(i);
        }
        groups
    }

    pub fn set_colors(&mut self, a: &SparseMatrix, colors: Vec<usize>) -> Result<()> {
        if colors.len() != self.n_subdomains() {
            return Err(Error::DimensionMismatch {
                expected: self.n_subdomains(),
                found: colors.len(),
            });
        }
        validate_coloring(self, a, &colors)?;
        self.colors = colors;
        Ok(())
    }
}

fn validate_owned(owned: &[Vec<usize>], n: usize) -> Result<()> {
    if owned.is_empty() {
        return Err(Error::Partition("no subdomains".into()));
    }
    let mut seen = vec![false; n];
    for (i, set) in owned.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::Partition(format!("subdomain {i} is empty")));
        }
        for &k in set {
            if k >= n {
                return Err(Error::IndexOutOfRange { index: k, len: n });
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::Partition(format!("index {k} owned twice")));
            }
        }
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::Partition(format!("index {k} is not owned")));
    }
    Ok(())
}

/// Balanced block sizes summing to `n`: `⌈n/N⌉` for the first `n mod N`.
fn block_sizes(n: usize, parts: usize) -> Vec<usize> {
    let (q, r) = (n / parts, n % parts);
    (0..parts).map(|i| q + usize::from(i < r)).collect()
}

pub fn partition_indices(
    a: &SparseMatrix,
    n_subdomains: usize,
    strategy: PartitionStrategy,
) -> Result<Vec<Vec<usize>>> {
    let n = a.n_rows();
    if !a.is_square() {
        return Err(Error::Partition("matrix must be square".into()));
    }
    if n_subdomains < 1 {
        return Err(Error::Partition("need at least one subdomain".into()));
    }
    if n_subdomains > n {
        return Err(Error::Partition(format!(
            "{n_subdomains} subdomains requested for {n} unknowns"
        )));
    }
    let sizes = block_sizes(n, n_subdomains);
    match strategy {
        PartitionStrategy::Contiguous => {
            let mut start = 0;
            Ok(sizes
                .iter()
                .map(|&s| {
                    let block = (start..start + s).collect();
                    start += s;
                    block
                })
                .collect())
        }
        PartitionStrategy::GreedyGraph => Ok(greedy_bfs(a, &sizes)),
    }
}

fn greedy_bfs(a: &SparseMatrix, sizes: &[usize]) -> Vec<Vec<usize>> {
    let n = a.n_rows();
    let mut assigned = vec![false; n];
    let mut next_seed = 0;
    let mut parts = Vec::with_capacity(sizes.len());
    for &target in sizes {
        let mut part = Vec::with_capacity(target);
        let mut queue = VecDeque::new();
        let mut queued = vec![false; n];
        while part.len() < target {
            if queue.is_empty() {
                // New component (or exhausted frontier): lowest free index.
                while assigned[next_seed] {
                    next_seed += 1;
                }
                queue.push_back(next_seed);
                queued[next_seed] = true;
            }
            let k = queue.pop_front().expect("queue refilled above");
            if assigned[k] {
                continue;
            }
            assigned[k] = true;
            part.push(k);
            for &j in a.row(k).0 {
                if !assigned[j] && !queued[j] {
                    queued[j] = true;
                    queue.push_back(j);
                }
            }
        }
        part.sort_unstable();
        parts.push(part);
    }
    parts
}

/// Grows `owned` by `delta` layers of graph neighbours.
pub fn grow_overlap(owned: &[usize], a: &SparseMatrix, delta: usize) -> Vec<usize> {
    let n = a.n_rows();
    let mut member = vec![false; n];
    let mut frontier: Vec<usize> = Vec::with_capacity(owned.len());
    for &k in owned {
        if !member[k] {
            member[k] = true;
            frontier.push(k);
        }
    }
    for _ in 0..delta {
        let mut next = Vec::new();
        for &k in &frontier {
            for &j in a.row(k).0 {
                if !member[j] {
                    member[j] = true;
                    next.push(j);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    (0..n).filter(|&k| member[k]).collect()
}

/// For each subdomain, the set of indices its overlapped set touches: the
/// overlapped set itself plus every column coupled to one of its rows.
fn touch_masks(partition: &OverlapPartition, a: &SparseMatrix) -> Vec<Vec<usize>> {
    partition
        .overlapped
        .iter()
        .map(|ov| grow_overlap(ov, a, 1))
        .collect()
}

fn sorted_intersect(x: &[usize], y: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

fn conflict_graph(partition: &OverlapPartition, a: &SparseMatrix) -> Vec<Vec<usize>> {
    let touch = touch_masks(partition, a);
    let n_sub = partition.n_subdomains();
    let mut adj = vec![Vec::new(); n_sub];
    for i in 0..n_sub {
        for j in i + 1..n_sub {
            if sorted_intersect(&touch[i], &partition.overlapped[j])
                || sorted_intersect(&touch[j], &partition.overlapped[i])
            {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

/// Greedy coloring in ascending subdomain order. Subdomains `i`, `j`
/// conflict when their overlapped sets intersect or a matrix entry couples
/// them; same-colored corrections therefore touch disjoint entries and read
/// residual entries the others do not modify.
pub fn color_subdomains(partition: &OverlapPartition, a: &SparseMatrix) -> Vec<usize> {
    let adj = conflict_graph(partition, a);
    let n_sub = adj.len();
    let mut colors = vec![usize::MAX; n_sub];
    for i in 0..n_sub {
        let mut used: Vec<usize> = adj[i]
            .iter()
            .filter_map(|&j| (colors[j] != usize::MAX).then_some(colors[j]))
            .collect();
        used.sort_unstable();
        used.dedup();
        let c = used
            .iter()
            .enumerate()
            .find(|&(k, &u)| k != u)
            .map_or(used.len(), |(k, _)| k);
        colors[i] = c;
    }
    colors
}

pub fn validate_coloring(
    partition: &OverlapPartition,
    a: &SparseMatrix,
    colors: &[usize],
) -> Result<()> {
    let adj = conflict_graph(partition, a);
    for (i, nbrs) in adj.iter().enumerate() {
        for &j in nbrs {
            if j > i && colors[i] == colors[j] {
                return Err(Error::InvalidColoring {
                    first: i,
                    second: j,
                    color: colors[i],
                });
            }
        }
    }
    Ok(())
}
