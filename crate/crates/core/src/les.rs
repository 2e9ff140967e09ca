//! Lower exceeding sequences and the permutation codec built on them.
//!
//! A length-`n` sequence `s` with `1 <= s_i <= i` encodes a permutation
//! through a grid diagram: the filled block of column `j` sits in the
//! `s_j`-th row not used by any later column. The naive decoder fills
//! columns right to left; the parallel decoder builds per-block tuple lists
//! and merges pairs of blocks with a comparison-network sort, rank arrays
//! from prefix sums, and a local row update, mirroring the reversible
//! circuit structure.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::perm::{CosetStructure, Permutation};
use crate::scan::{prefix_depth, prefix_sums, unprefix_sums, ScanArray};
use crate::sort::{build_bitonic, sort_with_record, CompareRule, SortingNetwork};
use crate::state::{DepthReport, Val};

/// A lower exceeding sequence: `1 <= s_i <= i`, 1-indexed.
pub fn validate_les(s: &[Val]) -> Result<()> {
    for (i, &v) in s.iter().enumerate() {
        if v == 0 || v as usize > i + 1 {
            return Err(Error::InvalidLes(format!(
                "entry {} at position {} outside 1..={}",
                v,
                i + 1,
                i + 1
            )));
        }
    }
    Ok(())
}

/// All lower exceeding sequences of length `n` (there are `n!`).
pub fn all_les(n: usize) -> Vec<Vec<Val>> {
    let mut out = vec![Vec::new()];
    for i in 1..=n {
        let mut next = Vec::with_capacity(out.len() * i);
        for s in &out {
            for v in 1..=i as Val {
                let mut t = s.clone();
                t.push(v);
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// Encodes a permutation as its lower exceeding sequence: `s_i` counts the
/// columns `j <= i` whose filled block lies at or below row
/// `sigma^{-1}(i)` in the diagram.
pub fn perm_to_les(sigma: &Permutation) -> Vec<Val> {
    let inv = sigma.inverse();
    let n = sigma.len();
    let mut s = Vec::with_capacity(n);
    for i in 1..=n {
        let mut count = 0;
        for j in 1..=i {
            if inv.at(j) <= inv.at(i) {
                count += 1;
            }
        }
        s.push(count as Val);
    }
    s
}

/// Decodes a lower exceeding sequence by filling columns right to left:
/// column `j` takes the `s_j`-th unused row. Reference oracle for the
/// parallel decoder.
pub fn les_to_perm_naive(s: &[Val]) -> Result<Permutation> {
    validate_les(s)?;
    let n = s.len();
    let mut used = vec![false; n + 1];
    let mut image = vec![0usize; n];
    for j in (1..=n).rev() {
        let mut remaining = s[j - 1] as usize;
        let mut row = 0;
        #[allow(clippy::needless_range_loop)]
        for r in 1..=n {
            if !used[r] {
                remaining -= 1;
                if remaining == 0 {
                    row = r;
                    break;
                }
            }
        }
        debug_assert!(row > 0);
        used[row] = true;
        image[row - 1] = j;
    }
    Permutation::new(image)
}

// --- parallel merge ------------------------------------------------------

/// Comparison rule for the concatenation of two row-sorted tuple lists:
/// left-diagram entries (column at most `split_col`) come first, and rows
/// order entries within a side.
pub struct ConcatRule {
    pub split_col: Val,
}

impl CompareRule for ConcatRule {
    fn name(&self) -> &str {
        "diagram-concat"
    }
    fn arity(&self) -> usize {
        3
    }
    fn cmp(&self, a: &[Val], b: &[Val]) -> Ordering {
        let side = |t: &[Val]| (t[2] > self.split_col) as u8;
        side(a)
            .cmp(&side(b))
            .then(a[1].cmp(&b[1]))
            .then(a.cmp(b))
    }
}

/// Comparison rule that sorts the index-extended concatenation into merged
/// row order. Tuples are `(index, row, col)` with indices `1..=2k`; index
/// at most `k` marks a left-diagram entry. Same-side entries keep their
/// index order. Across sides, the left entry at row `r` lands below the
/// right entry exactly when `r` plus the right entry's rank still fits
/// under the right entry's row.
pub struct MergeRule {
    pub k: usize,
}

impl CompareRule for MergeRule {
    fn name(&self) -> &str {
        "diagram-merge"
    }
    fn arity(&self) -> usize {
        3
    }
    fn cmp(&self, a: &[Val], b: &[Val]) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        let k = self.k as Val;
        let left_a = a[0] <= k;
        let left_b = b[0] <= k;
        match (left_a, left_b) {
            (true, true) | (false, false) => a[0].cmp(&b[0]),
            (true, false) => {
                if a[1] + (b[0] - k) <= b[1] {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
            (false, true) => {
                if b[1] + (a[0] - k) <= a[1] {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
        }
    }
}

/// Merges the row-sorted tuple lists of two adjacent column blocks into the
/// row-sorted list of the combined block. Right-block entries keep their
/// rows; each left-block entry at row `r` moves to the `r`-th row not used
/// by the right block. Equivalent to, and checked against, the insertion
/// picture of the diagrams.
pub fn merge_diagrams(left: &[(Val, Val)], right: &[(Val, Val)]) -> Result<Vec<(Val, Val)>> {
    let net = build_bitonic(2 * left.len().max(1));
    merge_with_net(&net, left, right)
}

fn merge_with_net(
    net: &SortingNetwork,
    left: &[(Val, Val)],
    right: &[(Val, Val)],
) -> Result<Vec<(Val, Val)>> {
    if left.is_empty() {
        return Ok(right.to_vec());
    }
    if left.len() != right.len() {
        return Err(Error::SizeMismatch(format!(
            "merging unequal halves {} and {}",
            left.len(),
            right.len()
        )));
    }
    let k = left.len();
    for side in [left, right] {
        if side.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidArgument(
                "diagram list is not strictly row-sorted".into(),
            ));
        }
    }
    let split_col = left.iter().map(|e| e.1).max().expect("nonempty");
    if right.iter().any(|e| e.1 <= split_col) {
        return Err(Error::InvalidArgument(
            "right diagram columns must all exceed the left block".into(),
        ));
    }

    // Index-extended concatenation, flat (index, row, col) triples.
    let mut flat: Vec<Val> = Vec::with_capacity(6 * k);
    for (i, &(r, c)) in left.iter().chain(right.iter()).enumerate() {
        flat.extend_from_slice(&[(i + 1) as Val, r, c]);
    }
    let concat_rule = ConcatRule { split_col };
    for pair in flat.chunks(3).collect::<Vec<_>>().windows(2) {
        if concat_rule.cmp(pair[0], pair[1]) != Ordering::Less {
            return Err(Error::Internal(
                "concatenated diagram list lost its entry order".into(),
            ));
        }
    }

    // Sort into merged row order; the totality of the merge rule is checked
    // on every comparator pair.
    let rule = MergeRule { k };
    let (sorted, _) = sort_with_record(&flat, net, &rule, true)?;
    let tuples: Vec<(Val, Val, Val)> = sorted
        .chunks(3)
        .map(|t| (t[0], t[1], t[2]))
        .collect();

    // Relative order within each side must be preserved by the sort.
    let mut prev_left = 0;
    let mut prev_right = 0;
    for &(w, _, c) in &tuples {
        if c <= split_col {
            if w <= prev_left {
                return Err(Error::Internal(
                    "merge broke the left block's relative order".into(),
                ));
            }
            prev_left = w;
        } else {
            if w <= prev_right {
                return Err(Error::Internal(
                    "merge broke the right block's relative order".into(),
                ));
            }
            prev_right = w;
        }
    }

    // Rank arrays from prefix sums over the side indicators.
    let left_ind: Vec<u64> = tuples
        .iter()
        .map(|&(_, _, c)| (c <= split_col) as u64)
        .collect();
    let right_ind: Vec<u64> = left_ind.iter().map(|&b| 1 - b).collect();
    let mut dl = ScanArray::new(&left_ind);
    let mut dr = ScanArray::new(&right_ind);
    prefix_sums(&mut dl)?;
    prefix_sums(&mut dr)?;

    // The index field is now redundant: it equals the in-side rank (plus k
    // on the right). Erase it reversibly by checking it against the ranks.
    for (i, &(w, _, c)) in tuples.iter().enumerate() {
        let expected = if c <= split_col {
            dl.values()[i]
        } else {
            dr.values()[i] + k as u64
        };
        if w as u64 != expected {
            return Err(Error::Internal(format!(
                "index {w} does not match recomputed rank {expected}"
            )));
        }
    }
    unprefix_sums(&mut dl)?;
    unprefix_sums(&mut dr)?;

    // Row update: left rows shift down by the number of right rows below
    // them. Recompute the right ranks for this pass and undo the scan after.
    let mut dr2 = ScanArray::new(&right_ind);
    prefix_sums(&mut dr2)?;
    let mut out = Vec::with_capacity(2 * k);
    for (i, &(_, r, c)) in tuples.iter().enumerate() {
        let row = if c <= split_col {
            r + dr2.values()[i] as Val
        } else {
            r
        };
        out.push((row, c));
    }
    unprefix_sums(&mut dr2)?;

    if out.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::Internal("merged diagram is not row-sorted".into()));
    }
    Ok(out)
}

/// Reusable parallel decoder: caches the per-level merge networks and all
/// scratch storage, so the conversion can run over millions of sequences
/// (every term of a lifted state) without allocating.
pub struct LesDecoder {
    n: usize,
    padded: usize,
    nets: Vec<SortingNetwork>,
    cur: Vec<(Val, Val)>,
    next: Vec<(Val, Val)>,
    triples: Vec<[Val; 3]>,
    indicators: Vec<u64>,
    dl: ScanArray,
    dr: ScanArray,
}

impl LesDecoder {
    pub fn new(n: usize) -> Self {
        let padded = n.next_power_of_two().max(1);
        let levels = padded.trailing_zeros() as usize;
        let nets = (1..=levels).map(|l| build_bitonic(2 << (l - 1))).collect();
        LesDecoder {
            n,
            padded,
            nets,
            cur: Vec::with_capacity(padded),
            next: Vec::with_capacity(padded),
            triples: Vec::with_capacity(padded),
            indicators: Vec::with_capacity(padded),
            dl: ScanArray::new(&[]),
            dr: ScanArray::new(&[]),
        }
    }

    pub fn decode(&mut self, s: &[Val]) -> Result<Permutation> {
        validate_les(s)?;
        if s.len() != self.n {
            return Err(Error::SizeMismatch(format!(
                "decoder built for length {}, got {}",
                self.n,
                s.len()
            )));
        }
        if self.n == 0 {
            return Ok(Permutation::identity(0));
        }
        self.cur.clear();
        for (j, &v) in s.iter().enumerate() {
            self.cur.push((v, (j + 1) as Val));
        }
        for j in self.n + 1..=self.padded {
            self.cur.push((j as Val, j as Val));
        }
        for (level, net) in self.nets.iter().enumerate() {
            let size = 1 << level;
            self.next.clear();
            for start in (0..self.padded).step_by(2 * size) {
                merge_fast(
                    net,
                    &self.cur[start..start + size],
                    &self.cur[start + size..start + 2 * size],
                    &mut self.next,
                    &mut self.triples,
                    &mut self.indicators,
                    &mut self.dl,
                    &mut self.dr,
                )?;
            }
            std::mem::swap(&mut self.cur, &mut self.next);
        }

        let mut image = vec![0usize; self.padded];
        for (i, &(r, c)) in self.cur.iter().enumerate() {
            if r as usize != i + 1 {
                return Err(Error::Internal(format!(
                    "final diagram row {r} at position {}",
                    i + 1
                )));
            }
            image[i] = c as usize;
        }
        for (i, &v) in image.iter().enumerate().skip(self.n) {
            if v != i + 1 {
                return Err(Error::Internal(
                    "padding columns moved during the merge".into(),
                ));
            }
        }
        image.truncate(self.n);
        Permutation::new(image)
    }

    /// Symbolic depth of the whole merge tree: per level, one network sort
    /// plus six scan passes (two rank scans, their inverses, and the rank
    /// recomputation for the row update). Merges within a level run in
    /// parallel and count once.
    pub fn depth(&self) -> DepthReport {
        let mut depth = DepthReport::default();
        for level in 0..self.nets.len() {
            let size = 2 << level;
            depth = depth.then(self.nets[level].depth_report());
            for _ in 0..6 {
                depth = depth.then(prefix_depth(size));
            }
            depth = depth.then(DepthReport::elementary(2));
        }
        let ancilla = DepthReport::ancilla_for(self.padded, self.padded as Val)
            + DepthReport::ancilla_for(2 * self.padded, self.padded as Val);
        depth.with_ancilla(ancilla)
    }
}

/// Scratch-based merge for the power-of-two tree: same machinery as
/// [`merge_diagrams`] (index extension, network sort under the merge rule
/// with the totality check, rank scans, reversible index erasure, row
/// update) operating on caller-provided buffers. Appends `2k` entries to
/// `out`.
#[allow(clippy::too_many_arguments)]
fn merge_fast(
    net: &SortingNetwork,
    left: &[(Val, Val)],
    right: &[(Val, Val)],
    out: &mut Vec<(Val, Val)>,
    triples: &mut Vec<[Val; 3]>,
    indicators: &mut Vec<u64>,
    dl: &mut ScanArray,
    dr: &mut ScanArray,
) -> Result<()> {
    let k = left.len();
    let split_col = left.iter().map(|e| e.1).max().expect("nonempty");
    triples.clear();
    for (i, &(r, c)) in left.iter().chain(right.iter()).enumerate() {
        triples.push([(i + 1) as Val, r, c]);
    }
    let rule = MergeRule { k };
    for layer in &net.layers {
        for &(i, j) in layer {
            let d = rule.cmp(&triples[i], &triples[j]);
            let back = rule.cmp(&triples[j], &triples[i]);
            let consistent = matches!(
                (d, back),
                (Ordering::Less, Ordering::Greater)
                    | (Ordering::Greater, Ordering::Less)
                    | (Ordering::Equal, Ordering::Equal)
            );
            if !consistent {
                return Err(Error::IncomparableTuples {
                    rule: rule.name().to_string(),
                    a: format!("{:?}", triples[i]),
                    b: format!("{:?}", triples[j]),
                });
            }
            if d == Ordering::Greater {
                triples.swap(i, j);
            }
        }
    }

    // Relative order within each side must be preserved by the sort.
    let mut prev_left = 0;
    let mut prev_right = 0;
    for t in triples.iter() {
        let (w, c) = (t[0], t[2]);
        if c <= split_col {
            if w <= prev_left {
                return Err(Error::Internal(
                    "merge broke the left block's relative order".into(),
                ));
            }
            prev_left = w;
        } else {
            if w <= prev_right {
                return Err(Error::Internal(
                    "merge broke the right block's relative order".into(),
                ));
            }
            prev_right = w;
        }
    }

    // Rank arrays from prefix sums over the side indicators.
    indicators.clear();
    indicators.extend(triples.iter().map(|t| (t[2] <= split_col) as u64));
    dl.reload(indicators);
    for b in indicators.iter_mut() {
        *b = 1 - *b;
    }
    dr.reload(indicators);
    prefix_sums(dl)?;
    prefix_sums(dr)?;

    // The index field is redundant after sorting: it equals the in-side
    // rank (plus k on the right). Erase it reversibly by checking it
    // against the ranks.
    for (i, t) in triples.iter().enumerate() {
        let expected = if t[2] <= split_col {
            dl.values()[i]
        } else {
            dr.values()[i] + k as u64
        };
        if t[0] as u64 != expected {
            return Err(Error::Internal(format!(
                "index {} does not match recomputed rank {expected}",
                t[0]
            )));
        }
    }
    unprefix_sums(dl)?;
    unprefix_sums(dr)?;

    // Row update: left rows shift down by the number of right rows below
    // them. Recompute the right ranks for this pass and undo the scan after.
    prefix_sums(dr)?;
    let base = out.len();
    for (i, t) in triples.iter().enumerate() {
        let row = if t[2] <= split_col {
            t[1] + dr.values()[i] as Val
        } else {
            t[1]
        };
        out.push((row, t[2]));
    }
    unprefix_sums(dr)?;

    if out[base..].windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::Internal("merged diagram is not row-sorted".into()));
    }
    Ok(())
}

/// Decodes a lower exceeding sequence with the divide-and-conquer merge.
/// Identical output to [`les_to_perm_naive`]; also reports the symbolic
/// depth of the merge tree.
pub fn les_to_perm_parallel(s: &[Val]) -> Result<(Permutation, DepthReport)> {
    let mut decoder = LesDecoder::new(s.len());
    let p = decoder.decode(s)?;
    Ok((p, decoder.depth()))
}

/// The restricted family of lower exceeding sequences whose decoded
/// permutations fix the list `l`: within a run of equal values starting at
/// position `a`, entry `s_i` ranges over `a..=i`; everywhere else `s_i = i`.
/// The family size is the product of the run-length factorials.
pub fn les_family(l: &[Val]) -> Result<Vec<Vec<Val>>> {
    let coset = CosetStructure::of(l)?;
    let n = l.len();
    let mut lo = vec![0 as Val; n];
    for &(start, len) in &coset.blocks {
        for i in start..start + len {
            lo[i - 1] = start as Val;
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
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::{enumerate_h, factorial, subgroup_order};

    #[test]
    fn figure_pair_both_directions() {
        let sigma = Permutation::new(vec![4, 3, 6, 1, 2, 5]).unwrap();
        assert_eq!(perm_to_les(&sigma), vec![1, 2, 1, 1, 5, 3]);
        assert_eq!(
            les_to_perm_naive(&[1, 2, 1, 1, 5, 3]).unwrap(),
            sigma
        );
        let (parallel, _) = les_to_perm_parallel(&[1, 2, 1, 1, 5, 3]).unwrap();
        assert_eq!(parallel, sigma);
    }

    #[test]
    fn identity_is_the_full_staircase() {
        let id = Permutation::identity(5);
        assert_eq!(perm_to_les(&id), vec![1, 2, 3, 4, 5]);
        assert_eq!(les_to_perm_naive(&[1, 2, 3, 4, 5]).unwrap(), id);
    }

    #[test]
    fn all_ones_round_trips() {
        let s = vec![1, 1, 1, 1];
        let p = les_to_perm_naive(&s).unwrap();
        assert_eq!(perm_to_les(&p), s);
    }

    #[test]
    fn encoding_is_injective_on_s5() {
        let mut seen = std::collections::BTreeSet::new();
        for p in Permutation::all(5) {
            let s = perm_to_les(&p);
            validate_les(&s).unwrap();
            assert!(seen.insert(s));
        }
        assert_eq!(seen.len(), 120);
    }

    #[test]
    fn merge_matches_worked_example() {
        let left = vec![(1, 3), (2, 1), (3, 2)];
        let right = vec![(1, 4), (3, 6), (6, 5)];
        let merged = merge_diagrams(&left, &right).unwrap();
        assert_eq!(
            merged,
            vec![(1, 4), (2, 3), (3, 6), (4, 1), (5, 2), (6, 5)]
        );
    }

    #[test]
    fn merge_empty_left_returns_right() {
        let right: Vec<(Val, Val)> = vec![];
        assert_eq!(merge_diagrams(&[], &right).unwrap(), right);
    }

    #[test]
    fn merge_singletons_matches_les_bit() {
        // n = 2: s = (1,1) decodes to the transposition, s = (1,2) to identity
        let m = merge_diagrams(&[(1, 1)], &[(1, 2)]).unwrap();
        assert_eq!(m, vec![(1, 2), (2, 1)]);
        let m = merge_diagrams(&[(1, 1)], &[(2, 2)]).unwrap();
        assert_eq!(m, vec![(1, 1), (2, 2)]);
    }

    #[test]
    fn parallel_equals_naive_exhaustively_to_5() {
        for n in 1..=5 {
            for s in all_les(n) {
                let naive = les_to_perm_naive(&s).unwrap();
                let (par, _) = les_to_perm_parallel(&s).unwrap();
                assert_eq!(par, naive, "s = {s:?}");
                assert_eq!(perm_to_les(&naive), s);
            }
        }
    }

    #[test]
    fn depth_grows_gently() {
        let mut last = 0;
        for k in 1..=5 {
            let n = 1usize << k;
            let s: Vec<Val> = (1..=n as Val).collect();
            let (_, d) = les_to_perm_parallel(&s).unwrap();
            let total = d.total_layers();
            assert!(total > last);
            last = total;
        }
        // sub-quartic in log n: compare against c * k^4 from the first point
        let (_, d2) = les_to_perm_parallel(&[1, 1]).unwrap();
        let base = d2.total_layers() as f64;
        let (_, d32) = les_to_perm_parallel(&(1..=32).collect::<Vec<Val>>()).unwrap();
        assert!((d32.total_layers() as f64) < base * 5f64.powi(4));
    }

    #[test]
    fn family_of_strictly_increasing_is_staircase() {
        let fam = les_family(&[2, 5, 9]).unwrap();
        assert_eq!(fam, vec![vec![1, 2, 3]]);
    }

    #[test]
    fn family_images_are_the_stabilizer() {
        for l in [
            vec![1 as Val, 2, 2, 3],
            vec![0, 0, 1, 1],
            vec![1, 1, 1],
            vec![0, 1, 2],
        ] {
            let fam = les_family(&l).unwrap();
            assert_eq!(fam.len() as u64, subgroup_order(&l).unwrap());
            let mut images: Vec<Permutation> = fam
                .iter()
                .map(|s| les_to_perm_naive(s).unwrap())
                .collect();
            images.sort();
            assert_eq!(images, enumerate_h(&l).unwrap(), "l = {l:?}");
        }
    }

    #[test]
    fn family_size_for_long_run() {
        let l: Vec<Val> = vec![1, 3, 3, 3, 3, 3, 3, 8];
        assert_eq!(les_family(&l).unwrap().len() as u64, factorial(6));
    }
}
