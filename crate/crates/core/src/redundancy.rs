//! Redundant subspace corrections.
//!
//! Ranks are paired (`0↔1`, `2↔3`, ...). Every rank owns one subdomain and
//! keeps a redundant copy of its buddy's subdomain data: the rows of `A`,
//! the right-hand side and the current iterate on everything those rows
//! touch. When a rank fails its buddy still holds enough to compute the
//! lost residual block and to carry out the lost subspace correction.
//!
//! The successive variant (SRSC) runs two compromised sweeps: the first over
//! the owned subdomains of alive ranks, the second over the redundant copies
//! hosted on alive ranks. The parallel variant (PRSC) composes the two
//! corresponding additive corrections multiplicatively. Redundant iterate
//! copies are exchanged once between the passes and once at the end of
//! every application, one message per pair each time.

use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::faultsim::Step;
use crate::linalg::{DenseMatrix, SparseMatrix, DEFAULT_ORACLE_CAP};
use crate::partition::OverlapPartition;
use crate::schwarz::{assemble_propagation_with, SchwarzOperator, SchwarzVariant};
use crate::subspace::{SolverKind, SubspaceSolver};

/// Fixed-point-free involution pairing rank `2k` with `2k+1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairingMap {
    buddy: Vec<usize>,
}

impl PairingMap {
    pub fn new(n_ranks: usize) -> Result<Self> {
        if n_ranks < 2 || n_ranks % 2 != 0 {
            return Err(Error::Config(format!(
                "redundant pairing needs an even number of ranks (at least 2), got {n_ranks}"
            )));
        }
        Ok(Self {
            buddy: (0..n_ranks).map(|i| i ^ 1).collect(),
        })
    }

    pub fn n_ranks(&self) -> usize {
        self.buddy.len()
    }

    pub fn buddy(&self, rank: usize) -> usize {
        self.buddy[rank]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.buddy.len()).step_by(2).map(|i| (i, i + 1))
    }

    pub fn n_pairs(&self) -> usize {
        self.buddy.len() / 2
    }

    /// Fails if both members of some pair are down.
    pub fn check_alive(&self, alive: &[bool]) -> Result<()> {
        check_len(self.n_ranks(), alive.len())?;
        for (a, b) in self.pairs() {
            if !alive[a] && !alive[b] {
                return Err(Error::PairFailure(a, b));
            }
        }
        Ok(())
    }
}

pub fn build_pairing(n_ranks: usize) -> Result<PairingMap> {
    PairingMap::new(n_ranks)
}

/// Subdomain orders of the two successive passes for sweep order `sweep`.
///
/// Without failures, or with failures in more than one pair, pass 1 follows
/// `sweep` over alive owners and pass 2 visits alive hosts in ascending rank
/// order. With a single failed rank `j` both passes are rotated so that the
/// redundant correction of `V_j` lands exactly where `V_j` sits in the
/// sweep: the combined sequence then contains the full sweep (or its
/// reverse, when the buddy comes later in the sweep) as a contiguous block,
/// and the resulting operator is never worse than the error-free sweep in
/// the energy norm.
pub fn srsc_pass_orders(sweep: &[usize], pairing: &PairingMap, alive: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let down: Vec<usize> = (0..alive.len()).filter(|&r| !alive[r]).collect();
    if let [j] = down[..] {
        let b = pairing.buddy(j);
        let n = sweep.len();
        let p = sweep.iter().position(|&i| i == j).expect("sweep is a permutation");
        let pb = sweep.iter().position(|&i| i == b).expect("sweep is a permutation");
        let cyclic: Vec<usize> = if pb < p {
            (0..n).map(|k| sweep[(p + k) % n]).collect()
        } else {
            (0..n).map(|k| sweep[(p + n - k) % n]).collect()
        };
        let first = cyclic[1..].to_vec();
        let second = cyclic.into_iter().filter(|&i| i != b).collect();
        return (first, second);
    }
    let first = sweep.iter().copied().filter(|&i| alive[i]).collect();
    let second = (0..pairing.n_ranks())
        .filter(|&h| alive[h])
        .map(|h| pairing.buddy(h))
        .collect();
    (first, second)
}

/// Copy of one subdomain's data as held in a rank's memory.
#[derive(Clone, Debug)]
struct SubspaceCopy {
    subdomain: usize,
    /// Rows of `D^δ`, global indices.
    rows: Vec<usize>,
    /// Positions of the owned rows `D` inside `rows`.
    owned_pos: Vec<usize>,
    /// Sorted global columns touched by `rows`.
    ext: Vec<usize>,
    /// Local CSR of `A(rows, ext)`.
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    f: Vec<f64>,
    v: Vec<f64>,
}

impl SubspaceCopy {
    fn new(a: &SparseMatrix, partition: &OverlapPartition, subdomain: usize) -> Self {
        let rows = partition.overlapped(subdomain).to_vec();
        let owned_pos = partition
            .owned(subdomain)
            .iter()
            .map(|k| rows.binary_search(k).expect("owned set lies inside its overlap"))
            .collect();
        let mut ext: Vec<usize> = rows.iter().flat_map(|&k| a.row(k).0.iter().copied()).collect();
        ext.sort_unstable();
        ext.dedup();
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for &k in &rows {
            let (c, v) = a.row(k);
            for (&j, &x) in c.iter().zip(v) {
                cols.push(ext.binary_search(&j).expect("column collected above"));
                vals.push(x);
            }
            offsets.push(cols.len());
        }
        let (nr, ne) = (rows.len(), ext.len());
        Self {
            subdomain,
            rows,
            owned_pos,
            ext,
            offsets,
            cols,
            vals,
            f: vec![0.0; nr],
            v: vec![0.0; ne],
        }
    }

    fn load_v(&mut self, v: &[f64]) {
        for (dst, &k) in self.v.iter_mut().zip(&self.ext) {
            *dst = v[k];
        }
    }

    fn load_f(&mut self, f: &[f64]) {
        for (dst, &k) in self.f.iter_mut().zip(&self.rows) {
            *dst = f[k];
        }
    }

    /// `f - A v` on row position `p`, accumulated in the same order as the
    /// global row.
    fn residual_at(&self, p: usize) -> f64 {
        let mut acc = 0.0;
        for k in self.offsets[p]..self.offsets[p + 1] {
            acc += self.vals[k] * self.v[self.cols[k]];
        }
        self.f[p] - acc
    }
}

#[derive(Clone, Debug)]
struct RankMemory {
    owned: SubspaceCopy,
    redundant: SubspaceCopy,
    redundant_stale: bool,
}

/// Owned and redundant subdomain data per rank, with message accounting.
#[derive(Clone, Debug)]
pub struct RedundantLayout {
    pairing: PairingMap,
    ranks: Vec<RankMemory>,
    messages: u64,
}

impl RedundantLayout {
    pub fn new(
        a: &SparseMatrix,
        f: &[f64],
        partition: &OverlapPartition,
        pairing: &PairingMap,
    ) -> Result<Self> {
        check_len(pairing.n_ranks(), partition.n_subdomains())?;
        check_len(a.n_rows(), f.len())?;
        let ranks = (0..pairing.n_ranks())
            .map(|r| {
                let mut owned = SubspaceCopy::new(a, partition, r);
                let mut redundant = SubspaceCopy::new(a, partition, pairing.buddy(r));
                owned.load_f(f);
                redundant.load_f(f);
                RankMemory {
                    owned,
                    redundant,
                    redundant_stale: false,
                }
            })
            .collect();
        Ok(Self {
            pairing: pairing.clone(),
            ranks,
            messages: 0,
        })
    }

    pub fn pairing(&self) -> &PairingMap {
        &self.pairing
    }

    /// Point-to-point messages spent on redundant synchronisation.
    pub fn messages(&self) -> u64 {
        self.messages
    }

    pub fn is_stale(&self, host: usize) -> bool {
        self.ranks[host].redundant_stale
    }

    /// Subdomain whose redundant copy `host` keeps.
    pub fn hosted_subdomain(&self, host: usize) -> usize {
        self.ranks[host].redundant.subdomain
    }

    pub fn owned_iterate(&self, rank: usize) -> &[f64] {
        &self.ranks[rank].owned.v
    }

    pub fn redundant_iterate(&self, host: usize) -> &[f64] {
        &self.ranks[host].redundant.v
    }

    /// Replaces the right-hand side in every copy. Subdomain right-hand sides
    /// are distributed along with the data and carry no sync cost.
    pub fn set_rhs(&mut self, f: &[f64]) {
        for m in &mut self.ranks {
            m.owned.load_f(f);
            m.redundant.load_f(f);
        }
    }

    /// Alive ranks pick up the current iterate on their owned subdomain
    /// (neighbour halo values included), which leaves the buddy's copy stale
    /// until the next sync. A rank whose buddy is down acts as owner of the
    /// redundant copy and refreshes it as well.
    pub fn refresh(&mut self, v: &[f64], alive: &[bool]) {
        for r in 0..self.ranks.len() {
            if !alive[r] {
                continue;
            }
            let b = self.pairing.buddy(r);
            self.ranks[r].owned.load_v(v);
            self.ranks[b].redundant_stale = true;
            if !alive[b] {
                self.ranks[r].redundant.load_v(v);
                self.ranks[r].redundant_stale = false;
            }
        }
    }

    /// Exchanges owned iterates within the pair of `rank`, one message.
    /// If a member is down nothing is sent and the down member's redundant
    /// copy stays stale. Returns whether a message was sent.
    pub fn sync_redundant(&mut self, rank: usize, alive: &[bool]) -> bool {
        let b = self.pairing.buddy(rank);
        if !(alive[rank] && alive[b]) {
            let down = if alive[rank] { b } else { rank };
            self.ranks[down].redundant_stale = true;
            return false;
        }
        let (lo, hi) = (rank.min(b), rank.max(b));
        let (left, right) = self.ranks.split_at_mut(hi);
        let (x, y) = (&mut left[lo], &mut right[0]);
        x.redundant.v.copy_from_slice(&y.owned.v);
        y.redundant.v.copy_from_slice(&x.owned.v);
        x.redundant_stale = false;
        y.redundant_stale = false;
        self.messages += 1;
        true
    }

    pub fn sync_all(&mut self, alive: &[bool]) {
        let pairs: Vec<_> = self.pairing.pairs().collect();
        for (a, _) in pairs {
            self.sync_redundant(a, alive);
        }
    }

    fn host_copy(&self, failed_rank: usize, alive: &[bool]) -> Result<&SubspaceCopy> {
        let host = self.pairing.buddy(failed_rank);
        if !alive[host] {
            return Err(Error::PairFailure(failed_rank.min(host), failed_rank.max(host)));
        }
        let m = &self.ranks[host];
        if m.redundant_stale {
            return Err(Error::StaleCopy {
                subdomain: failed_rank,
                host,
            });
        }
        Ok(&m.redundant)
    }

    /// Residual block `f_j - (A v)_j` on the owned rows of `failed_rank`,
    /// computed from the buddy's redundant data only.
    pub fn recover_residual(&self, failed_rank: usize, alive: &[bool]) -> Result<Vec<f64>> {
        let copy = self.host_copy(failed_rank, alive)?;
        Ok(copy.owned_pos.iter().map(|&p| copy.residual_at(p)).collect())
    }

    /// Restores the lost owned iterate block of `failed_rank` into `v` from
    /// the buddy's redundant copy.
    pub fn recover_owned(&self, failed_rank: usize, alive: &[bool], v: &mut [f64]) -> Result<()> {
        let copy = self.host_copy(failed_rank, alive)?;
        for &p in &copy.owned_pos {
            let g = copy.rows[p];
            let pos = copy.ext.binary_search(&g).expect("row columns include the diagonal");
            v[g] = copy.v[pos];
        }
        Ok(())
    }

    /// Brings a repaired rank back: it receives its owned data from the
    /// buddy's redundant copy and its redundant copy from the buddy's owned
    /// data. One message.
    pub fn resync(&mut self, rank: usize, alive: &[bool]) -> Result<()> {
        let b = self.pairing.buddy(rank);
        if !alive[b] || !alive[rank] {
            return Err(Error::PairFailure(rank.min(b), rank.max(b)));
        }
        let from_buddy_redundant = self.ranks[b].redundant.v.clone();
        let from_buddy_owned = self.ranks[b].owned.v.clone();
        self.ranks[rank].owned.v = from_buddy_redundant;
        self.ranks[rank].redundant.v = from_buddy_owned;
        self.ranks[rank].redundant_stale = false;
        self.messages += 1;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResilientVariant {
    Srsc,
    Prsc,
    /// Single SSC sweep with the failed subdomain handled by `α_j I`.
    CompromisedSscAlpha,
}

/// Scaling of the two additive PRSC passes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrscScaling {
    /// Plain sums `Σ R_iᵀ S_i R_i`.
    None,
    /// Each unknown's correction divided by the number of overlapped
    /// subdomains containing it, so the weighted prolongations sum to the
    /// identity.
    Multiplicity,
}

impl PrscScaling {
    pub fn name(self) -> &'static str {
        match self {
            PrscScaling::None => "none",
            PrscScaling::Multiplicity => "multiplicity",
        }
    }
}

impl std::str::FromStr for PrscScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PrscScaling::None),
            "multiplicity" => Ok(PrscScaling::Multiplicity),
            other => Err(Error::Config(format!("unknown PRSC scaling `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompromiseMode {
    /// Failed subdomain corrected with `α_j I` by its buddy.
    Alpha,
    /// Failed subdomain skipped.
    Zero,
}

/// Resilient operators over an exact-solver Schwarz base, one subdomain per
/// rank.
pub struct ResilientOperator {
    variant: ResilientVariant,
    base: SchwarzOperator,
    alpha_solvers: Vec<SubspaceSolver>,
    pairing: PairingMap,
    layout: RedundantLayout,
    colorized: bool,
    prsc_scaling: PrscScaling,
    inv_multiplicity: Vec<f64>,
}

impl std::fmt::Debug for ResilientOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResilientOperator")
            .field("variant", &self.variant)
            .field("colorized", &self.colorized)
            .field("base", &self.base)
            .finish()
    }
}

impl ResilientOperator {
    /// `colorized` selects color-by-color passes for the successive
    /// variants; PRSC passes are additive regardless.
    pub fn new(
        matrix: Arc<SparseMatrix>,
        partition: OverlapPartition,
        variant: ResilientVariant,
        colorized: bool,
    ) -> Result<Self> {
        PairingMap::new(partition.n_subdomains())?;
        let base_variant = match (variant, colorized) {
            (ResilientVariant::Prsc, _) => SchwarzVariant::Psc,
            (_, true) => SchwarzVariant::SscColorized,
            (_, false) => SchwarzVariant::Ssc,
        };
        let base = SchwarzOperator::new(matrix, partition, SolverKind::Exact, base_variant)?;
        Self::from_base(base, variant)
    }

    pub fn from_base(base: SchwarzOperator, variant: ResilientVariant) -> Result<Self> {
        let pairing = PairingMap::new(base.partition().n_subdomains())?;
        let a = base.matrix().clone();
        let alpha_solvers = (0..pairing.n_ranks())
            .map(|i| {
                SubspaceSolver::build(&a, i, base.partition().overlapped(i), SolverKind::ScaledIdentity)
            })
            .collect::<Result<Vec<_>>>()?;
        let layout = RedundantLayout::new(&a, &vec![0.0; a.n_rows()], base.partition(), &pairing)?;
        let colorized = base.variant() == SchwarzVariant::SscColorized;
        let inv_multiplicity = base
            .partition()
            .multiplicity()
            .into_iter()
            .map(|m| 1.0 / m.max(1) as f64)
            .collect();
        Ok(Self {
            variant,
            base,
            alpha_solvers,
            pairing,
            layout,
            colorized,
            prsc_scaling: PrscScaling::Multiplicity,
            inv_multiplicity,
        })
    }

    pub fn variant(&self) -> ResilientVariant {
        self.variant
    }

    pub fn base(&self) -> &SchwarzOperator {
        &self.base
    }

    pub fn base_mut(&mut self) -> &mut SchwarzOperator {
        &mut self.base
    }

    pub fn pairing(&self) -> &PairingMap {
        &self.pairing
    }

    pub fn layout(&self) -> &RedundantLayout {
        &self.layout
    }

    pub fn layout_mut(&mut self) -> &mut RedundantLayout {
        &mut self.layout
    }

    pub fn alpha(&self, subdomain: usize) -> f64 {
        self.alpha_solvers[subdomain].alpha().expect("scaled solver")
    }

    pub fn local_solves(&self) -> u64 {
        self.base.local_solves()
    }

    pub fn prsc_scaling(&self) -> PrscScaling {
        self.prsc_scaling
    }

    pub fn set_prsc_scaling(&mut self, scaling: PrscScaling) {
        self.prsc_scaling = scaling;
    }

    /// One additive PRSC pass `v += W Σ_{i ∈ group} R_iᵀ S_i R_i (f - A v)`.
    fn additive_pass(&self, group: &[usize], v: &mut [f64], f: &[f64]) -> Result<()> {
        match self.prsc_scaling {
            PrscScaling::None => self.base.correct_simultaneous(group, v, f),
            PrscScaling::Multiplicity => {
                let mut w = v.to_vec();
                self.base.correct_simultaneous(group, &mut w, f)?;
                for ((x, y), s) in v.iter_mut().zip(&w).zip(&self.inv_multiplicity) {
                    *x += (y - *x) * s;
                }
                Ok(())
            }
        }
    }

    pub fn messages(&self) -> u64 {
        self.layout.messages()
    }

    fn n(&self) -> usize {
        self.base.n()
    }

    /// Subdomain schedule of a successive pass: singletons in sweep order,
    /// or color groups for the colorized base.
    fn successive_groups(&self) -> Vec<Vec<usize>> {
        if self.colorized {
            self.base.partition().color_groups()
        } else {
            self.base.sweep_order().iter().map(|&i| vec![i]).collect()
        }
    }

    /// Schedules of the two SRSC passes. Colorized: color groups, the
    /// second pass restricted to subdomains whose host is alive. Otherwise
    /// see [`srsc_pass_orders`].
    fn srsc_groups(&self, alive: &[bool]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        if self.colorized {
            let groups = self.base.partition().color_groups();
            let first = groups
                .iter()
                .map(|g| g.iter().copied().filter(|&i| alive[i]).collect())
                .collect();
            let second = groups
                .iter()
                .map(|g| g.iter().copied().filter(|&j| alive[self.pairing.buddy(j)]).collect())
                .collect();
            (first, second)
        } else {
            let (p1, p2) = srsc_pass_orders(self.base.sweep_order(), &self.pairing, alive);
            let single = |o: Vec<usize>| o.into_iter().map(|i| vec![i]).collect();
            (single(p1), single(p2))
        }
    }

    fn run_groups(&self, groups: &[Vec<usize>], v: &mut [f64], f: &[f64]) -> Result<()> {
        for g in groups {
            if g.len() == 1 {
                self.base.correct(g[0], v, f)?;
            } else if !g.is_empty() {
                self.base.correct_simultaneous(g, v, f)?;
            }
        }
        Ok(())
    }

    /// One compromised SSC sweep: the failed subdomain is corrected with
    /// `α_j I` (alpha mode, by its buddy on redundant data) or skipped.
    pub fn compromised_ssc_apply(
        &self,
        v: &[f64],
        f: &[f64],
        failed_rank: Option<usize>,
        mode: CompromiseMode,
    ) -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        self.compromised_ssc_in_place(&mut out, f, failed_rank, mode)?;
        Ok(out)
    }

    fn compromised_ssc_in_place(
        &self,
        v: &mut [f64],
        f: &[f64],
        failed_rank: Option<usize>,
        mode: CompromiseMode,
    ) -> Result<()> {
        check_len(self.n(), v.len())?;
        check_len(self.n(), f.len())?;
        if let Some(j) = failed_rank {
            if j >= self.pairing.n_ranks() {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    len: self.pairing.n_ranks(),
                });
            }
        }
        for g in self.successive_groups() {
            let regular: Vec<usize> = g.iter().copied().filter(|&i| Some(i) != failed_rank).collect();
            let substitute = failed_rank.filter(|j| g.contains(j) && mode == CompromiseMode::Alpha);
            match substitute {
                None => self.run_groups(&[regular], v, f)?,
                Some(j) => {
                    // Same-color corrections read disjoint residual rows, so
                    // applying the substitute after the regular group is
                    // identical to applying them together.
                    self.run_groups(&[regular], v, f)?;
                    self.base.correct_with(&self.alpha_solvers[j], v, f)?;
                }
            }
        }
        Ok(())
    }

    /// One SRSC sweep in place.
    pub fn srsc_sweep(&mut self, v: &mut [f64], f: &[f64], alive: &[bool]) -> Result<()> {
        self.pairing.check_alive(alive)?;
        check_len(self.n(), v.len())?;
        check_len(self.n(), f.len())?;
        self.layout.set_rhs(f);

        let (owned, redundant) = self.srsc_groups(alive);
        self.run_groups(&owned, v, f)?;
        self.layout.refresh(v, alive);
        self.layout.sync_all(alive);

        self.run_groups(&redundant, v, f)?;
        self.layout.refresh(v, alive);
        self.layout.sync_all(alive);
        Ok(())
    }

    /// PRSC preconditioner action: `v1 = B^c f`, then
    /// `v1 + B̃^c (f - A v1)` over the redundant copies, with both passes
    /// scaled per [`PrscScaling`].
    pub fn prsc_apply(&mut self, f: &[f64], alive: &[bool]) -> Result<Vec<f64>> {
        self.pairing.check_alive(alive)?;
        check_len(self.n(), f.len())?;
        self.layout.set_rhs(f);
        let mut v = vec![0.0; self.n()];

        let owned: Vec<usize> = (0..self.pairing.n_ranks()).filter(|&i| alive[i]).collect();
        self.additive_pass(&owned, &mut v, f)?;
        self.layout.refresh(&v, alive);
        self.layout.sync_all(alive);

        let redundant: Vec<usize> = (0..self.pairing.n_ranks())
            .filter(|&h| alive[h])
            .map(|h| self.pairing.buddy(h))
            .collect();
        self.additive_pass(&redundant, &mut v, f)?;
        self.layout.refresh(&v, alive);
        self.layout.sync_all(alive);
        Ok(v)
    }

    fn single_failure(&self, alive: &[bool]) -> Result<Option<usize>> {
        check_len(self.pairing.n_ranks(), alive.len())?;
        let down: Vec<usize> = (0..alive.len()).filter(|&r| !alive[r]).collect();
        match down.as_slice() {
            [] => Ok(None),
            [j] => Ok(Some(*j)),
            _ => Err(Error::Config(format!(
                "compromised SSC tolerates one failed rank, {down:?} are down"
            ))),
        }
    }

    /// Stationary sweep.
    pub fn sweep(&mut self, v: &mut [f64], f: &[f64], alive: &[bool]) -> Result<()> {
        match self.variant {
            ResilientVariant::Srsc => self.srsc_sweep(v, f, alive),
            ResilientVariant::CompromisedSscAlpha => {
                let failed = self.single_failure(alive)?;
                self.compromised_ssc_in_place(v, f, failed, CompromiseMode::Alpha)
            }
            ResilientVariant::Prsc => Err(Error::Config(
                "PRSC is a preconditioner only, not a stationary sweep".into(),
            )),
        }
    }

    /// Preconditioner action `B f`.
    pub fn apply(&mut self, f: &[f64], alive: &[bool]) -> Result<Vec<f64>> {
        match self.variant {
            ResilientVariant::Prsc => self.prsc_apply(f, alive),
            _ => {
                let mut v = vec![0.0; self.n()];
                self.sweep(&mut v, f, alive)?;
                Ok(v)
            }
        }
    }

    /// Reacts to a fault-simulator boundary: lost owned blocks are restored
    /// from redundant copies into `v` (when an iterate is carried across
    /// iterations) and repaired ranks are resynchronised.
    pub fn handle_step(&mut self, step: &Step, v: Option<&mut [f64]>) -> Result<()> {
        self.pairing.check_alive(&step.alive)?;
        if let Some(v) = v {
            for &r in &step.newly_failed {
                self.layout.recover_owned(r, &step.alive, v)?;
            }
        }
        for &r in &step.resync {
            self.layout.resync(r, &step.alive)?;
        }
        Ok(())
    }

    /// Dense `I - B A` for the given alive set, using the stationary form
    /// for SRSC / compromised SSC and the preconditioner form for PRSC.
    pub fn assemble_propagation(&mut self, alive: &[bool]) -> Result<DenseMatrix> {
        let a = self.base.matrix().clone();
        let alive = alive.to_vec();
        assemble_propagation_with(&a, DEFAULT_ORACLE_CAP, |v, f| match self.variant {
            ResilientVariant::Prsc => self.prsc_apply(f, &alive),
            _ => {
                let mut out = v.to_vec();
                self.sweep(&mut out, f, &alive)?;
                Ok(out)
            }
        })
    }

    /// Dense propagation of the compromised sweep for an explicit mode.
    pub fn assemble_compromised(
        &self,
        failed_rank: Option<usize>,
        mode: CompromiseMode,
    ) -> Result<DenseMatrix> {
        let a = self.base.matrix().clone();
        assemble_propagation_with(&a, DEFAULT_ORACLE_CAP, |v, f| {
            self.compromised_ssc_apply(v, f, failed_rank, mode)
        })
    }
}
