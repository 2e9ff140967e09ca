//! Symmetrization pipelines: mapping a non-decreasing list (or a
//! superposition of them) to the equal superposition of all its distinct
//! rearrangements.
//!
//! Four routes are provided. The padded-random-register route symmetrizes
//! strictly increasing lists with a success probability controlled by the
//! padding range. The exact route prepares the uniform superposition of
//! lower exceeding sequences, decodes them to permutations, and moves the
//! permutations onto the input with a sort/unsort pair. Lists with repeated
//! values go through a six-pass sorting-network chain that uses a
//! permutation register as a platform; for superposed inputs the leftover
//! stabilizer-orbit register is uncomputed through the restricted
//! lower-exceeding-sequence family so every ancilla ends clean.
//!
//! Register naming follows the chain structure: `data` holds the list,
//! `rec` the comparator records, `perm` the permutation platform.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::les::{perm_to_les, LesDecoder};
use crate::perm::{factorial, is_nsil, is_sil, multiset_permutations, require_nsil, Permutation};
use crate::sort::{
    record_for_permutation, shuffle_op, sort_op, unshuffle_op, unsort_op, PlainRule,
    SortingNetwork,
};
use crate::state::{BasisConfig, DepthReport, Layout, SparseState, Val};

pub const DATA: &str = "data";
pub const REC: &str = "rec";
pub const PERM: &str = "perm";
/// Failure-branch flag register used by the non-postselected padded route.
pub const FAIL: &str = "fail";

/// Parameters of the padded-random-register route: each of the `n` scratch
/// values ranges over `0..f_n`, and collisions among them form the
/// repetitive branch.
#[derive(Debug, Clone)]
pub struct BerryConfig {
    /// Padding exponent: the default range is `ceil(n^a)`.
    pub a: f64,
    /// Explicit padding range override.
    pub f_n: Option<u64>,
    /// Project out the repetitive branch and renormalize.
    pub postselect: bool,
}

impl Default for BerryConfig {
    fn default() -> Self {
        BerryConfig {
            a: 3.0,
            f_n: None,
            postselect: false,
        }
    }
}

impl BerryConfig {
    pub fn range_for(&self, n: usize) -> u64 {
        self.f_n
            .unwrap_or_else(|| (n as f64).powf(self.a).ceil() as u64)
    }
}

/// Outcome of one symmetrization run.
#[derive(Debug, Clone)]
pub struct SymRun {
    pub state: SparseState,
    pub depth: DepthReport,
    /// Probability of the non-repetitive branch (1 for the exact routes).
    pub success_probability: f64,
    /// Guaranteed lower bound on the overlap with the ideal output.
    pub fidelity_bound: f64,
    /// Measured probability mass of the sector where every ancilla ended at
    /// its initial value (1 minus the uncomputation residual).
    pub clean_sector_mass: f64,
}

/// Exact probability that `n` independent uniform draws from `0..f` are all
/// distinct.
pub fn non_repetitive_probability(n: usize, f: u64) -> f64 {
    let mut p = 1.0;
    for i in 0..n as u64 {
        if i >= f {
            return 0.0;
        }
        p *= (f - i) as f64 / f as f64;
    }
    p
}

/// Ideal symmetrized state: for each weighted list, the equal superposition
/// over its distinct rearrangements. Built by direct multiset enumeration —
/// this is the ground-truth oracle the algorithmic routes are measured
/// against.
pub fn oracle_symmetrized(
    layout: Layout,
    weights: &[(Vec<Val>, Complex64)],
) -> Result<SparseState> {
    let mut items = Vec::new();
    for (l, alpha) in weights {
        let rearrangements = multiset_permutations(l);
        let w = alpha / (rearrangements.len() as f64).sqrt();
        for r in rearrangements {
            items.push((BasisConfig::new(r), w));
        }
    }
    SparseState::from_terms(layout, items)
}

fn require_register_support<Pred>(
    state: &SparseState,
    register: &str,
    pred: Pred,
    err: impl Fn(String) -> Error,
) -> Result<()>
where
    Pred: Fn(&[Val]) -> bool,
{
    let range = state.layout().range(register)?;
    for (config, _) in state.terms() {
        let v = &config.flat()[range.clone()];
        if !pred(v) {
            return Err(err(format!("{v:?}")));
        }
    }
    Ok(())
}

/// Symmetrizes strictly increasing support lists in `register` by attaching
/// the superposition of all permutation records and unsorting. The
/// repetitive branch of the padded scratch register is handled in closed
/// form: with `postselect` it is projected out (success probability
/// reported); otherwise it is kept as an orthogonal sector flagged by a
/// `fail` register appended to the layout.
pub fn berry_sil_symmetrize(
    state: &SparseState,
    register: &str,
    cfg: &BerryConfig,
    net: &SortingNetwork,
) -> Result<SymRun> {
    let n = state.layout().spec(register)?.arity;
    let f = cfg.range_for(n);
    if (f as u128) < (n as u128) * (n as u128) {
        return Err(Error::InvalidArgument(format!(
            "padding range {f} is below n^2 = {}",
            n * n
        )));
    }
    require_register_support(state, register, is_sil, Error::NotSil)?;
    let p_good = non_repetitive_probability(n, f);
    let records = all_permutation_records(net, n)?;
    let inv_fact = 1.0 / (factorial(n as u64) as f64).sqrt();

    let rec_name = "__berry_rec";
    let n_bits = net.comparator_count();
    let with_rec = state.clone().add_register(rec_name, n_bits, 1, &vec![0; n_bits])?;

    let (attached, success, bound) = if cfg.postselect {
        let s = with_rec.superpose(|config, layout| {
            let mut out = Vec::with_capacity(records.len());
            let range = layout.range(rec_name)?;
            for rec in &records {
                let mut vals = config.flat().to_vec();
                vals[range.clone()].copy_from_slice(rec);
                out.push((BasisConfig::new(vals), Complex64::new(inv_fact, 0.0)));
            }
            Ok(out)
        })?;
        (s, p_good, 1.0)
    } else {
        let flagged = with_rec.add_register(FAIL, 1, 1, &[0])?;
        let good = Complex64::new((p_good).sqrt() * inv_fact, 0.0);
        let bad = Complex64::new((1.0 - p_good).sqrt(), 0.0);
        let s = flagged.superpose(|config, layout| {
            let rec_range = layout.range(rec_name)?;
            let fail_range = layout.range(FAIL)?;
            let mut out = Vec::with_capacity(records.len() + 1);
            for rec in &records {
                let mut vals = config.flat().to_vec();
                vals[rec_range.clone()].copy_from_slice(rec);
                out.push((BasisConfig::new(vals), good));
            }
            if bad.re > 0.0 {
                let mut vals = config.flat().to_vec();
                vals[fail_range.clone()][0] = 1;
                out.push((BasisConfig::new(vals), bad));
            }
            Ok(out)
        })?;
        (s, p_good, 1.0 - (1.0 - p_good))
    };

    let unsorted = unsort_op(attached, register, rec_name, net, &PlainRule)?;
    let state = unsorted.drop_register(rec_name)?;
    let ancilla = DepthReport::ancilla_for(n, f.min(Val::MAX as u64) as Val)
        + DepthReport::ancilla_for(n_bits, 1);
    let depth = DepthReport::elementary(1)
        .then(net.depth_report())
        .then(net.depth_report())
        .with_ancilla(ancilla);
    Ok(SymRun {
        state,
        depth,
        success_probability: success,
        fidelity_bound: bound,
        clean_sector_mass: 1.0,
    })
}

fn all_permutation_records(net: &SortingNetwork, n: usize) -> Result<Vec<Vec<Val>>> {
    Permutation::all(n)
        .iter()
        .map(|sigma| record_for_permutation(net, sigma))
        .collect()
}

/// Exact symmetrization of strictly increasing support lists: prepare the
/// uniform superposition of lower exceeding sequences, decode each to a
/// permutation, sort the permutations away into records, and unsort the
/// input with those records. Deterministic, fidelity 1.
pub fn exact_sil_symmetrize(
    state: &SparseState,
    register: &str,
    net: &SortingNetwork,
) -> Result<(SparseState, DepthReport)> {
    require_register_support(state, register, is_sil, Error::NotSil)?;
    let n = state.layout().spec(register)?.arity;
    if n == 0 {
        return Ok((state.clone(), DepthReport::default()));
    }
    let sigma_name = "__sil_sigma";
    let rec_name = "__sil_rec";
    let n_bits = net.comparator_count();

    // Uniform superposition over all lower exceeding sequences, as a product
    // over positions; sequences are enumerated odometer-style so the full
    // family is never materialized on the side.
    let s = state.clone().add_register(sigma_name, n, n as Val, &vec![0; n])?;
    let count = factorial(n as u64);
    let weight = Complex64::new(1.0 / (count as f64).sqrt(), 0.0);
    let s = s.superpose(|config, layout| {
        let range = layout.range(sigma_name)?;
        let mut out = Vec::with_capacity(count as usize);
        let mut digits: Vec<Val> = vec![1; n];
        loop {
            let mut vals = config.flat().to_vec();
            vals[range.clone()].copy_from_slice(&digits);
            out.push((BasisConfig::new(vals), weight));
            // odometer over the staircase radices: position i runs 1..=i+1
            let mut i = 0;
            while i < n {
                digits[i] += 1;
                if digits[i] <= (i + 1) as Val {
                    break;
                }
                digits[i] = 1;
                i += 1;
            }
            if i == n {
                break;
            }
        }
        Ok(out)
    })?;

    // Decode sequences into permutation images with the parallel merge.
    let mut decoder = LesDecoder::new(n);
    let sigma_range = s.layout().range(sigma_name)?;
    let s = s.map_configs(|vals, _| {
        let image = decoder.decode(&vals[sigma_range.clone()])?;
        for (slot, v) in image.image().iter().enumerate() {
            vals[sigma_range.start + slot] = *v as Val;
        }
        Ok(())
    })?;

    // Sort the permutations away; the record keeps the permutation content.
    let s = s.add_register(rec_name, n_bits, 1, &vec![0; n_bits])?;
    let s = sort_op(s, sigma_name, rec_name, net, &PlainRule)?;
    let s = s.drop_register(sigma_name)?;

    // Move the permutations onto the input list.
    let s = unsort_op(s, register, rec_name, net, &PlainRule)?;
    let s = s.drop_register(rec_name)?;

    let depth = DepthReport::elementary(1)
        .then(LesDecoder::new(n).depth())
        .then(net.depth_report())
        .then(net.depth_report())
        .with_ancilla(
            DepthReport::ancilla_for(n, n as Val) + DepthReport::ancilla_for(n_bits, 1),
        );
    Ok((s, depth))
}

/// How the permutation-platform resource state is prepared.
#[derive(Debug, Clone)]
pub enum ResourceKind {
    /// Exact route through the lower-exceeding-sequence engine.
    ExactLes,
    /// Padded-random-register route with postselection.
    Berry(BerryConfig),
}

/// Prepares the platform resource state: the superposition of all permuted
/// index lists on a single `perm` register, ready to drive the six-pass
/// chain. The resource depends only on the list length, so it can be built
/// once and reused across inputs.
pub fn prepare_platform_resource(
    n: usize,
    net: &SortingNetwork,
    resource: ResourceKind,
) -> Result<(SparseState, DepthReport, f64)> {
    let iota: Vec<Val> = (1..=n as Val).collect();
    let platform = SparseState::basis(Layout::of(&[(PERM, n, n as Val)]), BasisConfig::new(iota))?;
    match resource {
        ResourceKind::ExactLes => {
            let (p, d) = exact_sil_symmetrize(&platform, PERM, net)?;
            Ok((p, d, 1.0))
        }
        ResourceKind::Berry(cfg) => {
            let cfg = BerryConfig {
                postselect: true,
                ..cfg
            };
            let run = berry_sil_symmetrize(&platform, PERM, &cfg, net)?;
            Ok((run.state, run.depth, run.success_probability))
        }
    }
}

/// Symmetrizes one classical non-decreasing list through the six-pass
/// platform chain. The returned state keeps all three registers; the list
/// register and the platform register are unentangled, with the platform
/// holding the uniform stabilizer orbit.
pub fn nsil_symmetrize_single(
    l: &[Val],
    bound: Val,
    net: &SortingNetwork,
    resource: ResourceKind,
) -> Result<SymRun> {
    let (platform, depth, success) = prepare_platform_resource(l.len(), net, resource)?;
    nsil_symmetrize_single_with_resource(l, bound, net, platform, depth, success)
}

/// Runs the single-input chain against an already-prepared platform
/// resource (see [`prepare_platform_resource`]); the resource is the
/// length-dependent part, so batch flows over many lists of one length can
/// share it.
pub fn nsil_symmetrize_single_with_resource(
    l: &[Val],
    bound: Val,
    net: &SortingNetwork,
    platform: SparseState,
    resource_depth: DepthReport,
    resource_success: f64,
) -> Result<SymRun> {
    require_nsil(l)?;
    let n = l.len();
    if l.iter().any(|&v| v > bound) {
        return Err(Error::BoundViolation {
            register: DATA.into(),
            value: *l.iter().max().unwrap_or(&0) as u64,
            bound: bound as u64,
        });
    }
    if platform.layout().spec(PERM)?.arity != n {
        return Err(Error::SizeMismatch(format!(
            "platform resource is for length {}, input has length {n}",
            platform.layout().spec(PERM)?.arity
        )));
    }
    let n_bits = net.comparator_count();
    let s = platform
        .add_register_at(0, DATA, n, bound, l)?
        .add_register_at(1, REC, n_bits, 1, &vec![0; n_bits])?;

    let (s, chain_depth) = platform_chain(s, net)?;
    Ok(SymRun {
        state: s,
        depth: resource_depth.then(chain_depth),
        success_probability: resource_success,
        fidelity_bound: 1.0,
        clean_sector_mass: 1.0,
    })
}

/// The six sorting-network passes that move the platform permutations onto
/// the data register and reduce the platform to the stabilizer orbit:
/// sort the platform into records, shuffle the data with them, unsort the
/// platform, sort the data, unshuffle the platform, unsort the data.
pub fn platform_chain_stepwise(
    state: SparseState,
    net: &SortingNetwork,
) -> Result<(SparseState, DepthReport)> {
    let s = sort_op(state, PERM, REC, net, &PlainRule)?;
    let s = shuffle_op(s, DATA, REC, net, 1)?;
    let s = unsort_op(s, PERM, REC, net, &PlainRule)?;
    let s = sort_op(s, DATA, REC, net, &PlainRule)?;
    let s = unshuffle_op(s, PERM, REC, net, 1)?;
    let s = unsort_op(s, DATA, REC, net, &PlainRule)?;
    let depth = DepthReport::comparator(6 * net.layer_count() as u64);
    Ok((s, depth))
}

/// Same unitary as [`platform_chain_stepwise`], executed as one fused
/// per-term map so the state is re-canonicalized once instead of six times.
/// Tested equivalent to the stepwise version.
fn platform_chain(state: SparseState, net: &SortingNetwork) -> Result<(SparseState, DepthReport)> {
    use crate::sort::{Pass, PassBuffer};
    let data_range = state.layout().range(DATA)?;
    let rec_range = state.layout().range(REC)?;
    let perm_range = state.layout().range(PERM)?;
    if rec_range.len() != net.comparator_count() {
        return Err(Error::SizeMismatch(format!(
            "record register has arity {}, network has {} comparators",
            rec_range.len(),
            net.comparator_count()
        )));
    }
    let mut pb = PassBuffer::new();
    let mut bits: Vec<Val> = Vec::new();
    let mut reg: Vec<Val> = Vec::new();
    let s = state.map_configs(|vals, _| {
        if vals[rec_range.clone()].iter().any(|&b| b != 0) {
            return Err(Error::RecordNotZero {
                register: REC.to_string(),
                config: format!("{vals:?}"),
            });
        }
        bits.clear();
        bits.extend_from_slice(&vals[rec_range.clone()]);
        let on = |pb: &mut PassBuffer,
                      reg: &mut Vec<Val>,
                      bits: &mut [Val],
                      vals: &mut Vec<Val>,
                      range: &std::ops::Range<usize>,
                      pass: Pass|
         -> Result<()> {
            reg.clear();
            reg.extend_from_slice(&vals[range.clone()]);
            pb.run(net, &PlainRule, pass, reg, bits)?;
            vals[range.clone()].copy_from_slice(reg);
            Ok(())
        };
        on(&mut pb, &mut reg, &mut bits, vals, &perm_range, Pass::Sort)?;
        on(&mut pb, &mut reg, &mut bits, vals, &data_range, Pass::Shuffle)?;
        on(&mut pb, &mut reg, &mut bits, vals, &perm_range, Pass::Unsort)?;
        on(&mut pb, &mut reg, &mut bits, vals, &data_range, Pass::Sort)?;
        on(&mut pb, &mut reg, &mut bits, vals, &perm_range, Pass::Unshuffle)?;
        on(&mut pb, &mut reg, &mut bits, vals, &data_range, Pass::Unsort)?;
        if bits.iter().any(|&b| b != 0) {
            return Err(Error::Internal(
                "platform chain left a nonzero record".into(),
            ));
        }
        vals[rec_range.clone()].copy_from_slice(&bits);
        Ok(())
    })?;
    let depth = DepthReport::comparator(6 * net.layer_count() as u64);
    Ok((s, depth))
}

/// Marginal of the list register for a single-input run: the record must be
/// zero and the platform register must factor out.
pub fn data_marginal(run_state: &SparseState) -> Result<SparseState> {
    data_marginal_owned(run_state.clone())
}

/// Consuming variant of [`data_marginal`]; avoids duplicating large chain
/// states.
pub fn data_marginal_owned(run_state: SparseState) -> Result<SparseState> {
    let s = run_state.drop_register(REC)?;
    s.drop_register_factored(PERM)
}

// --- duplicate detection -------------------------------------------------

/// Run-length vector: entry `i` (0-indexed) holds the length of the maximal
/// run of equal values starting at position `i` when that length exceeds 1,
/// and 0 otherwise.
pub type DupVector = Vec<Val>;

/// Naive linear-scan duplicate finder; oracle for the block algorithm.
pub fn detect_duplicates_naive(l: &[Val]) -> Result<DupVector> {
    require_nsil(l)?;
    let n = l.len();
    let mut dup = vec![0; n];
    let mut start = 0;
    for i in 1..=n {
        if i == n || l[i] != l[start] {
            if i - start > 1 {
                dup[start] = (i - start) as Val;
            }
            start = i;
        }
    }
    Ok(dup)
}

/// Divide-and-conquer duplicate finder: pads to a power of two with the
/// sentinel `m + 1`, combines per-block head/tail run lengths bottom-up,
/// records interior maximal runs as blocks meet, and flushes the runs
/// touching the global ends at the top. Equals the linear-scan oracle.
pub fn detect_duplicates(l: &[Val], m: Val) -> Result<DupVector> {
    require_nsil(l)?;
    if let Some(&max) = l.iter().max() {
        if max > m {
            return Err(Error::BoundViolation {
                register: "dup-input".into(),
                value: max as u64,
                bound: m as u64,
            });
        }
    }
    let n = l.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let sentinel = m + 1;
    let padded_len = n.next_power_of_two();
    let mut padded = l.to_vec();
    padded.resize(padded_len, sentinel);

    let mut dup = vec![0 as Val; padded_len];
    // (n_h, n_t) per block of the current level, blocks of size 2^level.
    let mut level: Vec<(usize, usize)> = vec![(1, 1); padded_len];
    let mut size = 1;
    while size < padded_len {
        let mut next = Vec::with_capacity(level.len() / 2);
        for b in 0..level.len() / 2 {
            let h = 2 * b * size + 1; // 1-indexed block bounds
            let t1 = h + size - 1;
            let h2 = t1 + 1;
            let t = h2 + size - 1;
            let (nh1, nt1) = level[2 * b];
            let (nh2, nt2) = level[2 * b + 1];
            let val = |pos: usize| padded[pos - 1];
            let combined = if val(t1) == val(h2) {
                match (val(t1) == val(h), val(h2) == val(t)) {
                    (false, false) => {
                        dup[t1 - nt1] = (nt1 + nh2) as Val;
                        (nh1, nt2)
                    }
                    (false, true) => (nh1, nt2 + nt1),
                    (true, false) => (nh1 + nh2, nt2),
                    (true, true) => (nh1 + nh2, nh1 + nh2),
                }
            } else {
                if nt1 > 1 && nt1 < size {
                    dup[t1 - nt1] = nt1 as Val;
                }
                if nh2 > 1 && nh2 < size {
                    dup[h2 - 1] = nh2 as Val;
                }
                (nh1, nt2)
            };
            next.push(combined);
        }
        level = next;
        size *= 2;
    }
    let (nh, nt) = level[0];
    if nh > 1 {
        dup[0] = nh as Val;
    }
    if nt > 1 && padded[padded_len - 1] != sentinel && padded_len - nt != 0 {
        dup[padded_len - nt] = nt as Val;
    }
    dup.truncate(n);
    Ok(dup)
}

/// Restricted family of lower exceeding sequences derived from a duplicate
/// vector: within a recorded run starting at 1-indexed position `a` of
/// length `len`, entry `s_i` ranges over `a..=i`; elsewhere `s_i = i`.
pub fn les_family_from_dup(dup: &DupVector) -> Vec<Vec<Val>> {
    let n = dup.len();
    let mut lo: Vec<Val> = (1..=n as Val).collect();
    for (start0, &len) in dup.iter().enumerate() {
        if len > 1 {
            for slot in lo.iter_mut().skip(start0).take(len as usize) {
                *slot = (start0 + 1) as Val;
            }
        }
    }
    let mut family = vec![Vec::with_capacity(n)];
    for i in 1..=n {
        let mut next = Vec::new();
        for s in &family {
            for v in lo[i - 1]..=i as Val {
                let mut t = s.clone();
                t.push(v);
                next.push(t);
            }
        }
        family = next;
    }
    family
}

// --- subgroup superposition ----------------------------------------------

/// Expands a fresh platform register `|12..n>` into the uniform superposition
/// over the stabilizer orbit of each support list: the restricted
/// lower-exceeding-sequence family is prepared per branch (conditioned on
/// the duplicate pattern) and decoded to permutations.
pub fn subgroup_superposition(
    state: &SparseState,
    data: &str,
    perm: &str,
) -> Result<(SparseState, DepthReport)> {
    require_register_support(state, data, is_nsil, Error::NotNsil)?;
    let n = state.layout().spec(perm)?.arity;
    let bound = state.layout().spec(data)?.bound;
    let iota: Vec<Val> = (1..=n as Val).collect();
    require_register_support(state, perm, |v| v == iota, |v| {
        Error::InvalidArgument(format!("platform register must hold the index list, got {v}"))
    })?;

    // Branch into the restricted sequence family, conditioned on the data
    // register's duplicate pattern.
    let data_range = state.layout().range(data)?;
    let perm_range = state.layout().range(perm)?;
    let s = state.superpose(|config, _| {
        let l = &config.flat()[data_range.clone()];
        let dup = detect_duplicates(l, bound)?;
        let family = les_family_from_dup(&dup);
        let w = Complex64::new(1.0 / (family.len() as f64).sqrt(), 0.0);
        let mut out = Vec::with_capacity(family.len());
        for seq in family {
            let mut vals = config.flat().to_vec();
            vals[perm_range.clone()].copy_from_slice(&seq);
            out.push((BasisConfig::new(vals), w));
        }
        Ok(out)
    })?;

    // Decode sequences to stabilizer permutations.
    let mut decoder = LesDecoder::new(n);
    let s = s.lift(|config, _| {
        let mut vals = config.flat().to_vec();
        let image = decoder.decode(&vals[perm_range.clone()])?;
        for (slot, v) in image.image().iter().enumerate() {
            vals[perm_range.start + slot] = *v as Val;
        }
        Ok(BasisConfig::new(vals))
    })?;
    let depth = DepthReport::elementary(2).then(LesDecoder::new(n).depth());
    Ok((s, depth))
}

/// Inverse of [`subgroup_superposition`]: encodes the platform back to
/// sequences and extracts the per-branch uniform family superposition,
/// restoring the platform to `|12..n>`. The data register may hold permuted
/// lists; the stabilizer family is taken from the sorted value multiset.
/// Errors if any branch deviates from the expected uniform orbit.
pub fn subgroup_superposition_inverse(
    state: SparseState,
    data: &str,
    perm: &str,
) -> Result<(SparseState, DepthReport, f64)> {
    let n = state.layout().spec(perm)?.arity;
    let bound = state.layout().spec(data)?.bound;
    let data_range = state.layout().range(data)?;
    let perm_range = state.layout().range(perm)?;

    // Encode platform permutations back into sequences.
    let s = state.map_configs(|vals, _| {
        let image: Vec<usize> = vals[perm_range.clone()]
            .iter()
            .map(|&v| v as usize)
            .collect();
        let seq = perm_to_les(&Permutation::new(image)?);
        vals[perm_range.clone()].copy_from_slice(&seq);
        Ok(())
    })?;

    // Group terms by everything except the platform register and project
    // each group onto its expected uniform family vector.
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<Vec<Val>, Vec<(Vec<Val>, Complex64)>> = BTreeMap::new();
    for (config, &amp) in s.terms() {
        let mut key = config.flat().to_vec();
        let seq = key[perm_range.clone()].to_vec();
        key.drain(perm_range.clone());
        groups.entry(key).or_default().push((seq, amp));
    }
    let mut items = Vec::with_capacity(groups.len());
    let mut residual = 0.0;
    let mut total = 0.0;
    for (key, block) in groups {
        // Reconstruct the data list from the flattened key: the data range
        // shifts if the platform register precedes it.
        let shift = if perm_range.start < data_range.start {
            perm_range.len()
        } else {
            0
        };
        let l_raw = &key[data_range.start - shift..data_range.end - shift];
        let mut l = l_raw.to_vec();
        l.sort_unstable();
        let dup = detect_duplicates(&l, bound)?;
        let family = les_family_from_dup(&dup);
        let w = 1.0 / (family.len() as f64).sqrt();
        let lookup: BTreeMap<&[Val], Complex64> =
            block.iter().map(|(s, a)| (s.as_slice(), *a)).collect();
        let mut coeff = Complex64::new(0.0, 0.0);
        for seq in &family {
            if let Some(a) = lookup.get(seq.as_slice()) {
                coeff += a * w;
            }
        }
        let mass: f64 = block.iter().map(|(_, a)| a.norm_sqr()).sum();
        total += mass;
        residual += mass - coeff.norm_sqr();
        // Re-insert the platform register, reset to the index list, at its
        // original slot.
        let iota: Vec<Val> = (1..=n as Val).collect();
        let mut full = Vec::with_capacity(key.len() + n);
        full.extend_from_slice(&key[..perm_range.start]);
        full.extend_from_slice(&iota);
        full.extend_from_slice(&key[perm_range.start..]);
        items.push((BasisConfig::new(full), coeff));
    }
    let clean_mass = 1.0 - residual / total;
    if residual / total > crate::state::NORM_TOLERANCE {
        return Err(Error::NotSymmetric { mass: clean_mass });
    }
    let out = SparseState::from_terms((*s.layout()).clone(), items)?;
    let depth = DepthReport::elementary(2).then(LesDecoder::new(n).depth());
    Ok((out, depth, clean_mass))
}

/// Symmetrizes an arbitrary superposition of non-decreasing lists exactly:
/// runs the platform chain with an exactly prepared resource, then
/// uncomputes the stabilizer orbit left on the platform so all ancillas
/// return to their initial values. Succeeds with probability 1.
pub fn nsil_symmetrize_superposed(
    state: &SparseState,
    net: &SortingNetwork,
) -> Result<SymRun> {
    require_register_support(state, DATA, is_nsil, Error::NotNsil)?;
    let n = state.layout().spec(DATA)?.arity;
    let n_bits = net.comparator_count();
    let s = state
        .clone()
        .add_register(REC, n_bits, 1, &vec![0; n_bits])?;
    let iota: Vec<Val> = (1..=n as Val).collect();
    let s = s.add_register(PERM, n, n as Val, &iota)?;

    let (s, resource_depth) = exact_sil_symmetrize(&s, PERM, net)?;
    let (s, chain_depth) = platform_chain(s, net)?;
    let (s, inverse_depth, clean_mass) = subgroup_superposition_inverse(s, DATA, PERM)?;

    let s = s.drop_register(PERM)?;
    let s = s.drop_register(REC)?;
    Ok(SymRun {
        state: s,
        depth: resource_depth.then(chain_depth).then(inverse_depth),
        success_probability: 1.0,
        fidelity_bound: 1.0,
        clean_sector_mass: clean_mass,
    })
}

// --- Dicke states ----------------------------------------------------------

/// Uniform superposition of all `n`-bit lists of Hamming weight `k`,
/// prepared by symmetrizing the sorted weight-`k` list through the
/// single-input chain.
pub fn dicke(n: usize, k: usize, net: &SortingNetwork) -> Result<SparseState> {
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "Hamming weight {k} exceeds {n} qubits"
        )));
    }
    let mut l = vec![0 as Val; n - k];
    l.extend(std::iter::repeat_n(1, k));
    let run = nsil_symmetrize_single(&l, 1, net, ResourceKind::ExactLes)?;
    data_marginal_owned(run.state)
}

/// Superposition of Dicke states with given weights over Hamming weights,
/// prepared by symmetrizing the corresponding superposition of sorted
/// lists through the superposed-input route.
pub fn dicke_superposition(
    n: usize,
    weights: &[(usize, Complex64)],
    net: &SortingNetwork,
) -> Result<SparseState> {
    if weights.is_empty() {
        return Err(Error::EmptyState);
    }
    let norm: f64 = weights.iter().map(|(_, w)| w.norm_sqr()).sum();
    if (norm - 1.0).abs() > crate::state::NORM_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "weights have norm {}",
            norm.sqrt()
        )));
    }
    let layout = Layout::of(&[(DATA, n, 1)]);
    let mut items = Vec::new();
    for &(k, w) in weights {
        if k > n {
            return Err(Error::InvalidArgument(format!(
                "Hamming weight {k} exceeds {n} qubits"
            )));
        }
        let mut l = vec![0 as Val; n - k];
        l.extend(std::iter::repeat_n(1, k));
        items.push((BasisConfig::new(l), w));
    }
    let state = SparseState::from_terms(layout, items)?;
    let run = nsil_symmetrize_superposed(&state, net)?;
    Ok(run.state)
}

/// Dicke-state oracle from binomial enumeration.
pub fn dicke_oracle(n: usize, k: usize) -> Result<SparseState> {
    let mut l = vec![0 as Val; n - k];
    l.extend(std::iter::repeat_n(1, k));
    oracle_symmetrized(
        Layout::of(&[(DATA, n, 1)]),
        &[(l, Complex64::new(1.0, 0.0))],
    )
}
