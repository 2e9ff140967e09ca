//! Reversible conversion between occupation-number and mode-list
//! representations.
//!
//! A list of per-mode counts `n_0 .. n_{m-1}` becomes the non-decreasing
//! list that names mode `i` exactly `n_i` times. The forward direction runs
//! a fixed pipeline of staged triple lists: prefix sums pair each count
//! with its running total, `n` blank elements tagged with the sentinel mode
//! `m` are appended, and alternating reversible sorts under two comparison
//! rules interleave the blanks into their mode slots, where local
//! arithmetic fills in the mode indices and clears the scaffolding. Every
//! stage is asserted sorted under its declared rule, and every arithmetic
//! step checks the value it consumes, so the whole pipeline inverts stage
//! by stage.

use std::cmp::Ordering;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::perm::{is_nsil, multiset_permutations};
use crate::scan::{prefix_depth, prefix_sums, unprefix_sums, ScanArray};
use crate::sort::{build_bitonic, sort_with_record, CompareRule, SortingNetwork};
use crate::state::{BasisConfig, DepthReport, Layout, SparseState, Val, NORM_TOLERANCE};
use crate::symmetrize::{nsil_symmetrize_superposed, oracle_symmetrized, SymRun, DATA};

/// Register name for occupation-number states.
pub const OCC: &str = "occ";

/// Mode-major order on `(mode, count, tag)` triples: real modes ascend,
/// sentinel-tagged blanks order by their tag.
pub struct ModeOrderRule {
    pub sentinel: Val,
}

impl CompareRule for ModeOrderRule {
    fn name(&self) -> &str {
        "mode-order"
    }
    fn arity(&self) -> usize {
        3
    }
    fn cmp(&self, a: &[Val], b: &[Val]) -> Ordering {
        a[0].cmp(&b[0])
            .then_with(|| {
                if a[0] == self.sentinel {
                    a[2].cmp(&b[2])
                } else {
                    Ordering::Equal
                }
            })
            .then(a.cmp(b))
    }
}

/// Slot-major order on `(mode, count, slot)` triples: running-total slots
/// ascend, ties broken by mode.
pub struct SlotOrderRule;

impl CompareRule for SlotOrderRule {
    fn name(&self) -> &str {
        "slot-order"
    }
    fn arity(&self) -> usize {
        3
    }
    fn cmp(&self, a: &[Val], b: &[Val]) -> Ordering {
        a[2].cmp(&b[2]).then(a[0].cmp(&b[0])).then(a.cmp(b))
    }
}

/// Order of the stage whose running totals have been cleared: scaffolding
/// rows compare by mode, blanks by tag, and a blank precedes a scaffolding
/// row exactly when the blank's filled mode is at most the scaffold's mode.
/// This is the witness order that makes the final regrouping sort
/// reversible.
pub struct ClearedOrderRule {
    pub sentinel: Val,
}

impl CompareRule for ClearedOrderRule {
    fn name(&self) -> &str {
        "cleared-order"
    }
    fn arity(&self) -> usize {
        3
    }
    fn cmp(&self, a: &[Val], b: &[Val]) -> Ordering {
        match (a[0] == self.sentinel, b[0] == self.sentinel) {
            (false, false) => a[0].cmp(&b[0]).then(a.cmp(b)),
            (true, true) => a[2].cmp(&b[2]).then(a.cmp(b)),
            (true, false) => {
                if a[1] <= b[0] {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
            (false, true) => {
                if b[1] <= a[0] {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
        }
    }
}

fn assert_sorted(triples: &[[Val; 3]], rule: &dyn CompareRule, stage: &str) -> Result<()> {
    for w in triples.windows(2) {
        if rule.cmp(&w[0], &w[1]) != Ordering::Less {
            return Err(Error::Internal(format!(
                "stage {stage} is not sorted under {}: {:?} !< {:?}",
                rule.name(),
                w[0],
                w[1]
            )));
        }
    }
    Ok(())
}

/// Classical reversible sort: the input must be sorted under `rule_from`;
/// the output is the same multiset sorted under `rule_to`. The lifted
/// counterpart is `revsort_op`, which drives the same network through the
/// five-pass record-uncomputation chain.
fn reversible_sort(
    triples: &mut Vec<[Val; 3]>,
    net: &SortingNetwork,
    rule_from: &dyn CompareRule,
    rule_to: &dyn CompareRule,
    stage: &str,
) -> Result<()> {
    assert_sorted(triples, rule_from, stage)?;
    let flat: Vec<Val> = triples.iter().flatten().copied().collect();
    let (sorted, _) = sort_with_record(&flat, net, rule_to, true)?;
    triples.clear();
    triples.extend(sorted.chunks(3).map(|t| [t[0], t[1], t[2]]));
    Ok(())
}

/// Expands occupation counts into the non-decreasing mode list through the
/// staged pipeline. Returns the list and the symbolic depth (one prefix
/// scan plus four reversible sorts plus the local rewrites).
pub fn occ_to_nsil(counts: &[Val]) -> Result<(Vec<Val>, DepthReport)> {
    let m = counts.len() as Val;
    let n: u64 = counts.iter().map(|&c| c as u64).sum();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "occupation vector holds no particles".into(),
        ));
    }
    let n = n as usize;
    let sentinel = m;
    let mode_rule = ModeOrderRule { sentinel };
    let slot_rule = SlotOrderRule;
    let net = build_bitonic(m as usize + n);

    // Running totals alongside the counts.
    let mut totals = ScanArray::new(&counts.iter().map(|&c| c as u64).collect::<Vec<u64>>());
    prefix_sums(&mut totals)?;

    // Indexed triples (mode, count, total), then n sentinel blanks (m, 0, j).
    let mut triples: Vec<[Val; 3]> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| [i as Val, c, totals.values()[i] as Val])
        .collect();
    for j in 0..n {
        triples.push([sentinel, 0, j as Val]);
    }
    assert_sorted(&triples, &mode_rule, "appended blanks")?;

    // Interleave the blanks into their slots.
    reversible_sort(&mut triples, &net, &mode_rule, &slot_rule, "interleave")?;

    // Each blank's mode index is its position minus its blank tag.
    for (pos, t) in triples.iter_mut().enumerate() {
        if t[0] == sentinel {
            let mode = pos as Val - t[2];
            t[1] += mode;
        }
    }
    assert_sorted(&triples, &slot_rule, "mode fill")?;

    // Group the original entries back in front.
    reversible_sort(&mut triples, &net, &slot_rule, &mode_rule, "regroup")?;

    // Clear the counts of the original entries from neighboring totals.
    let mut prev_total = 0;
    for t in triples.iter_mut().take(m as usize) {
        let count = t[2] - prev_total;
        if t[1] != count {
            return Err(Error::Internal(format!(
                "count {} does not match total difference {count}",
                t[1]
            )));
        }
        t[1] = 0;
        prev_total = t[2];
    }
    assert_sorted(&triples, &mode_rule, "count clear")?;

    // Interleave again to clear the totals by position.
    reversible_sort(&mut triples, &net, &mode_rule, &slot_rule, "reinterleave")?;
    for (pos, t) in triples.iter_mut().enumerate() {
        if t[0] != sentinel {
            let expect = pos as Val - t[0];
            if t[2] != expect {
                return Err(Error::Internal(format!(
                    "total {} does not match positional value {expect}",
                    t[2]
                )));
            }
            t[2] = 0;
        }
    }
    let cleared_rule = ClearedOrderRule { sentinel };
    assert_sorted(&triples, &cleared_rule, "total clear")?;

    // Final grouping: scaffolding rows count up, blanks carry the list.
    reversible_sort(&mut triples, &net, &cleared_rule, &mode_rule, "final group")?;
    for (i, t) in triples.iter().enumerate().take(m as usize) {
        if *t != [i as Val, 0, 0] {
            return Err(Error::Internal(format!(
                "scaffolding row {i} ended as {t:?}"
            )));
        }
    }
    let mut out = Vec::with_capacity(n);
    for (j, t) in triples.iter().skip(m as usize).enumerate() {
        if t[0] != sentinel || t[2] != j as Val {
            return Err(Error::Internal(format!("blank row {j} ended as {t:?}")));
        }
        out.push(t[1]);
    }
    if !is_nsil(&out) {
        return Err(Error::Internal("output list is not non-decreasing".into()));
    }

    let depth = prefix_depth(counts.len())
        .then(DepthReport::elementary(1))
        .then(DepthReport::comparator(4 * 5 * net.layer_count() as u64))
        .then(DepthReport::elementary(4))
        .with_ancilla(DepthReport::ancilla_for(
            3 * (m as usize + n),
            (m as usize + n) as Val,
        ));
    Ok((out, depth))
}

/// Exact inverse of [`occ_to_nsil`]: rebuilds the final staged list from
/// the mode list and runs every stage backward.
pub fn nsil_to_occ(l: &[Val], m: usize) -> Result<Vec<Val>> {
    if l.is_empty() {
        return Err(Error::InvalidArgument("empty mode list".into()));
    }
    if !is_nsil(l) {
        return Err(Error::NotNsil(format!("{l:?}")));
    }
    if l.iter().any(|&v| v as usize >= m) {
        return Err(Error::InvalidArgument(format!(
            "mode {} outside 0..{m}",
            l.iter().max().unwrap()
        )));
    }
    let n = l.len();
    let sentinel = m as Val;
    let mode_rule = ModeOrderRule { sentinel };
    let slot_rule = SlotOrderRule;
    let cleared_rule = ClearedOrderRule { sentinel };
    let net = build_bitonic(m + n);

    // Final stage, reconstructed.
    let mut triples: Vec<[Val; 3]> = (0..m as Val).map(|i| [i, 0, 0]).collect();
    for (j, &v) in l.iter().enumerate() {
        triples.push([sentinel, v, j as Val]);
    }

    // Undo the final grouping.
    reversible_sort(&mut triples, &net, &mode_rule, &cleared_rule, "ungroup")?;

    // Restore the totals of the original entries from their positions.
    for (pos, t) in triples.iter_mut().enumerate() {
        if t[0] != sentinel {
            if t[2] != 0 {
                return Err(Error::Internal(format!(
                    "scaffolding total already set on {t:?}"
                )));
            }
            t[2] = pos as Val - t[0];
        }
    }

    // Regroup and restore counts from neighboring totals.
    reversible_sort(&mut triples, &net, &slot_rule, &mode_rule, "unregroup")?;
    let mut prev_total = 0;
    for t in triples.iter_mut().take(m) {
        if t[1] != 0 {
            return Err(Error::Internal(format!("count already set on {t:?}")));
        }
        t[1] = t[2] - prev_total;
        prev_total = t[2];
    }

    // Interleave and clear the blanks' mode values.
    reversible_sort(&mut triples, &net, &mode_rule, &slot_rule, "uninterleave")?;
    for (pos, t) in triples.iter_mut().enumerate() {
        if t[0] == sentinel {
            let mode = pos as Val - t[2];
            if t[1] != mode {
                return Err(Error::Internal(format!(
                    "blank mode {} does not match position {mode}",
                    t[1]
                )));
            }
            t[1] = 0;
        }
    }

    // Back to the appended form; strip the blanks and the scan.
    reversible_sort(&mut triples, &net, &slot_rule, &mode_rule, "unappend")?;
    for (j, t) in triples.iter().skip(m).enumerate() {
        if *t != [sentinel, 0, j as Val] {
            return Err(Error::Internal(format!("blank row {j} ended as {t:?}")));
        }
    }
    triples.truncate(m);
    let counts: Vec<Val> = triples.iter().map(|t| t[1]).collect();
    let mut totals = ScanArray::new(&triples.iter().map(|t| t[2] as u64).collect::<Vec<u64>>());
    unprefix_sums(&mut totals)?;
    for (i, t) in triples.iter().enumerate() {
        if totals.values()[i] != t[1] as u64 {
            return Err(Error::Internal(format!(
                "unscanned total {} does not match count {}",
                totals.values()[i], t[1]
            )));
        }
    }
    Ok(counts)
}

/// Naive expansion oracle: repeat mode `i` exactly `counts[i]` times.
pub fn occ_to_nsil_naive(counts: &[Val]) -> Vec<Val> {
    let mut out = Vec::new();
    for (i, &c) in counts.iter().enumerate() {
        out.extend(std::iter::repeat_n(i as Val, c as usize));
    }
    out
}

/// Common particle number of an occupation-register state; errors if the
/// support mixes particle numbers.
pub fn particle_number(state: &SparseState, register: &str) -> Result<usize> {
    let range = state.layout().range(register)?;
    let mut n: Option<u64> = None;
    for (config, _) in state.terms() {
        let total: u64 = config.flat()[range.clone()].iter().map(|&v| v as u64).sum();
        match n {
            None => n = Some(total),
            Some(prev) if prev == total => {}
            Some(prev) => {
                return Err(Error::MixedSupport(format!(
                    "{prev} and {total} particles in the same register"
                )))
            }
        }
    }
    n.map(|v| v as usize).ok_or(Error::EmptyState)
}

/// Converts a second-quantized state (occupation register `occ`) to the
/// symmetrized first-quantized state on a mode-list register: the staged
/// expansion is lifted over the support and the result runs through the
/// superposed-input symmetrizer.
pub fn second_to_first(state: &SparseState, net: &SortingNetwork) -> Result<SymRun> {
    let m = state.layout().spec(OCC)?.arity;
    let n = particle_number(state, OCC)?;
    if n == 0 {
        return Err(Error::InvalidArgument(
            "occupation support holds no particles".into(),
        ));
    }
    let occ_range = state.layout().range(OCC)?;
    let out_layout = Layout::of(&[(DATA, n, m.saturating_sub(1) as Val)]);
    let mut depth = DepthReport::default();
    let listed = state.lift_into(out_layout, |config, _| {
        let (l, d) = occ_to_nsil(&config.flat()[occ_range.clone()])?;
        depth = d;
        Ok(BasisConfig::new(l))
    })?;
    let run = nsil_symmetrize_superposed(&listed, net)?;
    Ok(SymRun {
        depth: depth.then(run.depth),
        ..run
    })
}

/// Converts a symmetrized first-quantized state back to occupation numbers:
/// projects each mode multiset onto its uniform rearrangement vector
/// (erroring if the symmetric-sector mass falls short of 1) and contracts
/// the list through the staged pipeline's inverse.
pub fn first_to_second(state: &SparseState, m: usize) -> Result<SparseState> {
    let data_range = state.layout().range(DATA)?;
    // Group amplitudes by mode multiset.
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<Vec<Val>, (Complex64, f64, u64)> = BTreeMap::new();
    for (config, amp) in state.terms() {
        let mut key = config.flat()[data_range.clone()].to_vec();
        key.sort_unstable();
        let e = groups.entry(key).or_insert((Complex64::new(0.0, 0.0), 0.0, 0));
        e.0 += amp;
        e.1 += amp.norm_sqr();
        e.2 += 1;
    }
    let norm_sq: f64 = groups.values().map(|(_, mass, _)| mass).sum();
    let mut items = Vec::with_capacity(groups.len());
    let mut residual = 0.0;
    for (l, (total, mass, _)) in groups {
        let count = multiset_permutations(&l).len() as f64;
        let coeff = total / count.sqrt();
        residual += mass - coeff.norm_sqr();
        let counts = nsil_to_occ(&l, m)?;
        items.push((BasisConfig::new(counts), coeff));
    }
    if residual / norm_sq > NORM_TOLERANCE {
        return Err(Error::NotSymmetric {
            mass: 1.0 - residual / norm_sq,
        });
    }
    let layout = Layout::of(&[(OCC, m, data_range.len() as Val)]);
    SparseState::from_terms(layout, items)
}

/// Oracle for the state-level conversion: direct symmetrization of the
/// expanded mode lists.
pub fn second_to_first_oracle(state: &SparseState) -> Result<SparseState> {
    let m = state.layout().spec(OCC)?.arity;
    let n = particle_number(state, OCC)?;
    let occ_range = state.layout().range(OCC)?;
    let mut weights = Vec::new();
    for (config, amp) in state.terms() {
        weights.push((occ_to_nsil_naive(&config.flat()[occ_range.clone()]), *amp));
    }
    oracle_symmetrized(Layout::of(&[(DATA, n, m.saturating_sub(1) as Val)]), &weights)
}
