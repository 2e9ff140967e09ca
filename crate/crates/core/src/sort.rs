//! Comparison rules, sorting networks, and the four record-register
//! operations plus reversible sorting.
//!
//! A comparator between slots `i < j` orders a pair of tuples and records
//! the outcome bit `1` iff the first tuple was strictly greater; equal
//! tuples never swap. Running a whole network forward with a zeroed record
//! register is `sort`; replaying it backward is `unsort`; keeping only the
//! controlled swaps gives `shuffle` (backward) and `unshuffle` (forward).
//! Networks wider than the data are padded with sentinel entries that
//! compare greater than every real tuple and equal to each other, so they
//! stay parked at the trailing slots.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::state::{DepthReport, SparseState, Val};

/// A total order on fixed-arity integer tuples.
pub trait CompareRule {
    fn name(&self) -> &str;
    /// Tuple width the rule compares.
    fn arity(&self) -> usize;
    /// `Less` means the first tuple sorts before the second.
    fn cmp(&self, a: &[Val], b: &[Val]) -> Ordering;
}

/// Plain ascending order on single integers.
pub struct PlainRule;

impl CompareRule for PlainRule {
    fn name(&self) -> &str {
        "plain"
    }
    fn arity(&self) -> usize {
        1
    }
    fn cmp(&self, a: &[Val], b: &[Val]) -> Ordering {
        a[0].cmp(&b[0])
    }
}

/// Odd numbers before even numbers, ascending within each parity class.
pub struct ParityRule;

impl CompareRule for ParityRule {
    fn name(&self) -> &str {
        "parity"
    }
    fn arity(&self) -> usize {
        1
    }
    fn cmp(&self, a: &[Val], b: &[Val]) -> Ordering {
        let (pa, pb) = (a[0] % 2, b[0] % 2);
        // parity 1 sorts first
        pb.cmp(&pa).then(a[0].cmp(&b[0]))
    }
}

/// Lexicographic order on tuples of a fixed arity.
pub struct LexRule {
    arity: usize,
}

impl LexRule {
    pub fn new(arity: usize) -> Self {
        LexRule { arity }
    }
}

impl CompareRule for LexRule {
    fn name(&self) -> &str {
        "lex"
    }
    fn arity(&self) -> usize {
        self.arity
    }
    fn cmp(&self, a: &[Val], b: &[Val]) -> Ordering {
        a.cmp(b)
    }
}

/// Index-tagging wrapper: compares by the inner rule first and breaks ties
/// by a trailing index element, turning any network into a stable sorter.
pub struct StabilizedRule<'a> {
    inner: &'a dyn CompareRule,
}

impl<'a> StabilizedRule<'a> {
    pub fn new(inner: &'a dyn CompareRule) -> Self {
        StabilizedRule { inner }
    }
}

impl CompareRule for StabilizedRule<'_> {
    fn name(&self) -> &str {
        "stabilized"
    }
    fn arity(&self) -> usize {
        self.inner.arity() + 1
    }
    fn cmp(&self, a: &[Val], b: &[Val]) -> Ordering {
        let k = self.inner.arity();
        self.inner.cmp(&a[..k], &b[..k]).then(a[k].cmp(&b[k]))
    }
}

/// The unitary comparator on a tuple pair: returns `(low, high, bit)` with
/// `bit = 1` iff `a` sorts strictly after `b`.
pub fn comparator(a: &[Val], b: &[Val], rule: &dyn CompareRule) -> Result<(Vec<Val>, Vec<Val>, Val)> {
    if a.len() != rule.arity() || b.len() != rule.arity() {
        return Err(Error::ArityMismatch {
            arity: rule.arity(),
            width: a.len().max(b.len()),
        });
    }
    if rule.cmp(a, b) == Ordering::Greater {
        Ok((b.to_vec(), a.to_vec(), 1))
    } else {
        Ok((a.to_vec(), b.to_vec(), 0))
    }
}

/// A comparator network: layers of disjoint slot pairs `(i, j)` with
/// `i < j`, zero-indexed.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SortingNetwork {
    pub width: usize,
    pub layers: Vec<Vec<(usize, usize)>>,
}

impl SortingNetwork {
    pub fn comparator_count(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn depth_report(&self) -> DepthReport {
        DepthReport::comparator(self.layer_count() as u64)
    }

    /// 0-1 principle check: sorts every binary input of its width.
    pub fn sorts_all_binary(&self) -> bool {
        assert!(self.width <= 20, "binary check is exponential");
        let rule = PlainRule;
        for input in 0u32..(1 << self.width) {
            let vals: Vec<Val> = (0..self.width).map(|i| (input >> i) & 1).collect();
            let mut buf = PaddedBuffer::new(&vals, self.width, 1);
            let mut bits = vec![0; self.comparator_count()];
            run_pass(self, &rule, Pass::Sort, &mut buf, &mut bits, false).expect("sortable");
            let out = buf.real_chunks(self.width);
            if out.windows(2).any(|w| w[0] > w[1]) {
                return false;
            }
        }
        true
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("bad network JSON: {e}")))
    }
}

/// Bubble-sort network: `n(n-1)/2` comparators, one per layer, pass by pass.
pub fn build_bubble(n: usize) -> SortingNetwork {
    let mut layers = Vec::new();
    for pass in 0..n.saturating_sub(1) {
        for i in 0..n - 1 - pass {
            layers.push(vec![(i, i + 1)]);
        }
    }
    SortingNetwork { width: n, layers }
}

/// Bitonic sorting network in the all-ascending form: the merge of each
/// `k`-block starts with a mirror layer comparing slot `i` against slot
/// `k-1-i`, followed by standard half-stride layers. Width is padded up to
/// a power of two; `k(k+1)/2` layers at width `2^k`, each of `width/2`
/// comparators.
pub fn build_bitonic(n: usize) -> SortingNetwork {
    let width = n.next_power_of_two();
    let mut layers = Vec::new();
    let mut k = 2;
    while k <= width {
        // mirror layer
        let mut layer = Vec::with_capacity(width / 2);
        for start in (0..width).step_by(k) {
            for off in 0..k / 2 {
                layer.push((start + off, start + k - 1 - off));
            }
        }
        layers.push(layer);
        // half-stride layers
        let mut j = k / 4;
        while j >= 1 {
            let mut layer = Vec::with_capacity(width / 2);
            for start in (0..width).step_by(2 * j) {
                for off in 0..j {
                    layer.push((start + off, start + off + j));
                }
            }
            layers.push(layer);
            j /= 2;
        }
        k *= 2;
    }
    SortingNetwork { width, layers }
}

// --- classical engine ---------------------------------------------------

/// Flat tuple storage with sentinel tracking. Slot `i` holds the chunk
/// `vals[i*k..(i+1)*k]`; sentinel slots compare greater than every real
/// tuple and equal to each other.
struct PaddedBuffer {
    vals: Vec<Val>,
    sentinel: u64,
    k: usize,
}

impl PaddedBuffer {
    fn new(real: &[Val], width: usize, k: usize) -> Self {
        let mut buf = PaddedBuffer {
            vals: Vec::with_capacity(width * k),
            sentinel: 0,
            k,
        };
        buf.load(real, width, k);
        buf
    }

    fn load(&mut self, real: &[Val], width: usize, k: usize) {
        let n_real = real.len() / k;
        self.k = k;
        self.vals.clear();
        self.vals.extend_from_slice(real);
        self.vals.resize(width * k, 0);
        self.sentinel = 0;
        for slot in n_real..width {
            self.sentinel |= 1 << slot;
        }
    }

    /// Copies the first `n` chunks back out; errors if any sentinel sits
    /// among them.
    fn store_real(&self, n: usize, out: &mut [Val]) -> Result<()> {
        for slot in 0..n {
            if self.is_sentinel(slot) {
                return Err(Error::Internal(
                    "padding sentinel escaped the trailing slots".into(),
                ));
            }
        }
        out.copy_from_slice(&self.vals[..n * self.k]);
        Ok(())
    }

    fn is_sentinel(&self, slot: usize) -> bool {
        self.sentinel >> slot & 1 == 1
    }

    fn chunk(&self, slot: usize) -> &[Val] {
        &self.vals[slot * self.k..(slot + 1) * self.k]
    }

    fn cmp(&self, rule: &dyn CompareRule, i: usize, j: usize) -> Ordering {
        match (self.is_sentinel(i), self.is_sentinel(j)) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => rule.cmp(self.chunk(i), self.chunk(j)),
        }
    }

    fn swap(&mut self, i: usize, j: usize) {
        for t in 0..self.k {
            self.vals.swap(i * self.k + t, j * self.k + t);
        }
        let bi = self.sentinel >> i & 1;
        let bj = self.sentinel >> j & 1;
        self.sentinel ^= (bi ^ bj) << i;
        self.sentinel ^= (bi ^ bj) << j;
    }

    /// First `n` chunks; errors if any sentinel sits among them.
    fn take_real(&self, n: usize) -> Result<Vec<Val>> {
        for slot in 0..n {
            if self.is_sentinel(slot) {
                return Err(Error::Internal(
                    "padding sentinel escaped the trailing slots".into(),
                ));
            }
        }
        Ok(self.vals[..n * self.k].to_vec())
    }

    fn real_chunks(&self, n: usize) -> Vec<Val> {
        self.vals[..n * self.k].to_vec()
    }
}

#[derive(Clone, Copy, PartialEq)]
pub(crate) enum Pass {
    Sort,
    Unsort,
    Shuffle,
    Unshuffle,
}

/// Reusable single-register pass executor for fused pipelines: holds the
/// padded buffer across invocations so per-term work allocates nothing.
pub(crate) struct PassBuffer {
    buf: PaddedBuffer,
}

impl PassBuffer {
    pub(crate) fn new() -> Self {
        PassBuffer {
            buf: PaddedBuffer {
                vals: Vec::new(),
                sentinel: 0,
                k: 1,
            },
        }
    }

    /// Runs one network pass over `data` (a flat list of `len/k` tuples),
    /// updating `bits` in place per the pass kind.
    pub(crate) fn run(
        &mut self,
        net: &SortingNetwork,
        rule: &dyn CompareRule,
        pass: Pass,
        data: &mut [Val],
        bits: &mut [Val],
    ) -> Result<()> {
        let k = rule.arity();
        let n = data.len() / k;
        self.buf.load(data, net.width, k);
        run_pass(net, rule, pass, &mut self.buf, bits, false)?;
        self.buf.store_real(n, data)?;
        Ok(())
    }
}

fn run_pass(
    net: &SortingNetwork,
    rule: &dyn CompareRule,
    pass: Pass,
    buf: &mut PaddedBuffer,
    bits: &mut [Val],
    strict: bool,
) -> Result<()> {
    debug_assert_eq!(bits.len(), net.comparator_count());
    let compare = |buf: &PaddedBuffer, i: usize, j: usize| -> Result<Ordering> {
        let d = buf.cmp(rule, i, j);
        if strict {
            let back = buf.cmp(rule, j, i);
            let consistent = matches!(
                (d, back),
                (Ordering::Less, Ordering::Greater)
                    | (Ordering::Greater, Ordering::Less)
                    | (Ordering::Equal, Ordering::Equal)
            );
            if !consistent {
                return Err(Error::IncomparableTuples {
                    rule: rule.name().to_string(),
                    a: format!("{:?}", buf.chunk(i)),
                    b: format!("{:?}", buf.chunk(j)),
                });
            }
        }
        Ok(d)
    };
    match pass {
        Pass::Sort | Pass::Unshuffle => {
            let mut c = 0;
            for layer in &net.layers {
                for &(i, j) in layer {
                    if pass == Pass::Sort {
                        let d = compare(buf, i, j)?;
                        bits[c] ^= (d == Ordering::Greater) as Val;
                    }
                    if bits[c] == 1 {
                        buf.swap(i, j);
                    }
                    c += 1;
                }
            }
        }
        Pass::Unsort | Pass::Shuffle => {
            let mut c = net.comparator_count();
            for layer in net.layers.iter().rev() {
                for &(i, j) in layer.iter().rev() {
                    c -= 1;
                    if bits[c] == 1 {
                        buf.swap(i, j);
                    }
                    if pass == Pass::Unsort {
                        let d = compare(buf, i, j)?;
                        bits[c] ^= (d == Ordering::Greater) as Val;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Classically sorts a flat list of `len/k` tuples through the network,
/// returning the sorted list and the record bits (padding comparators
/// included).
pub fn sort_with_record(
    items: &[Val],
    net: &SortingNetwork,
    rule: &dyn CompareRule,
    strict: bool,
) -> Result<(Vec<Val>, Vec<Val>)> {
    let k = rule.arity();
    if !items.len().is_multiple_of(k) {
        return Err(Error::ArityMismatch {
            arity: k,
            width: items.len(),
        });
    }
    let n = items.len() / k;
    if n > net.width {
        return Err(Error::SizeMismatch(format!(
            "{n} tuples exceed network width {}",
            net.width
        )));
    }
    let mut buf = PaddedBuffer::new(items, net.width, k);
    let mut bits = vec![0; net.comparator_count()];
    run_pass(net, rule, Pass::Sort, &mut buf, &mut bits, strict)?;
    Ok((buf.take_real(n)?, bits))
}

/// Record produced by sorting `sigma(1..n)` — the canonical record of a
/// permutation under the given network.
pub fn record_for_permutation(
    net: &SortingNetwork,
    sigma: &crate::perm::Permutation,
) -> Result<Vec<Val>> {
    let items: Vec<Val> = sigma.image().iter().map(|&v| v as Val).collect();
    let (_, bits) = sort_with_record(&items, net, &PlainRule, false)?;
    Ok(bits)
}

// --- lifted register operations ----------------------------------------

struct RegisterOp<'a> {
    data: &'a str,
    record: Option<&'a str>,
    net: &'a SortingNetwork,
    k: usize,
}

impl<'a> RegisterOp<'a> {
    fn validate(&self, state: &SparseState) -> Result<usize> {
        let layout = state.layout();
        let data_spec = layout.spec(self.data)?;
        if data_spec.arity % self.k != 0 {
            return Err(Error::ArityMismatch {
                arity: self.k,
                width: data_spec.arity,
            });
        }
        let n = data_spec.arity / self.k;
        if n > self.net.width {
            return Err(Error::SizeMismatch(format!(
                "register `{}` holds {n} tuples, network width is {}",
                self.data, self.net.width
            )));
        }
        if let Some(rec) = self.record {
            let rec_spec = layout.spec(rec)?;
            if rec_spec.arity != self.net.comparator_count() {
                return Err(Error::SizeMismatch(format!(
                    "record register `{rec}` has arity {}, network has {} comparators",
                    rec_spec.arity,
                    self.net.comparator_count()
                )));
            }
        }
        Ok(n)
    }
}

fn run_lifted(
    state: SparseState,
    data: &str,
    record: &str,
    net: &SortingNetwork,
    rule: &dyn CompareRule,
    pass: Pass,
    require_zero_record: bool,
) -> Result<SparseState> {
    let op = RegisterOp {
        data,
        record: Some(record),
        net,
        k: rule.arity(),
    };
    let n = op.validate(&state)?;
    let data_range = state.layout().range(data)?;
    let rec_range = state.layout().range(record)?;
    state.map_configs(move |vals, _| {
        if require_zero_record && vals[rec_range.clone()].iter().any(|&b| b != 0) {
            return Err(Error::RecordNotZero {
                register: record.to_string(),
                config: format!("{vals:?}"),
            });
        }
        if vals[rec_range.clone()].iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument(format!(
                "record register `{record}` holds a non-bit value on {vals:?}"
            )));
        }
        let mut buf = PaddedBuffer::new(&vals[data_range.clone()], net.width, rule.arity());
        let (rec_part, data_part) = if rec_range.start > data_range.start {
            let (a, b) = vals.split_at_mut(rec_range.start);
            (&mut b[..rec_range.len()], &mut a[data_range.clone()])
        } else {
            let (a, b) = vals.split_at_mut(data_range.start);
            (
                &mut a[rec_range.clone()],
                &mut b[..data_range.len()],
            )
        };
        run_pass(net, rule, pass, &mut buf, rec_part, false)?;
        data_part.copy_from_slice(&buf.take_real(n)?);
        Ok(())
    })
}

/// Sorts the data register and stores the comparator outcomes in the record
/// register, which must be zero on every support config.
pub fn sort_op(
    state: SparseState,
    data: &str,
    record: &str,
    net: &SortingNetwork,
    rule: &dyn CompareRule,
) -> Result<SparseState> {
    run_lifted(state, data, record, net, rule, Pass::Sort, true)
}

/// Exact inverse of [`sort_op`]: replays the controlled swaps backward and
/// uncomputes the record bits. With a record from a different coset element
/// the leftover bits are the trash pattern.
pub fn unsort_op(
    state: SparseState,
    data: &str,
    record: &str,
    net: &SortingNetwork,
    rule: &dyn CompareRule,
) -> Result<SparseState> {
    run_lifted(state, data, record, net, rule, Pass::Unsort, false)
}

/// Applies the permutation stored in the record to the data register
/// (controlled swaps of the backward pass only; no comparisons, so no rule).
pub fn shuffle_op(
    state: SparseState,
    data: &str,
    record: &str,
    net: &SortingNetwork,
    tuple_arity: usize,
) -> Result<SparseState> {
    let rule = LexRule::new(tuple_arity);
    run_lifted(state, data, record, net, &rule, Pass::Shuffle, false)
}

/// Inverse of [`shuffle_op`]: the forward pass's controlled swaps.
pub fn unshuffle_op(
    state: SparseState,
    data: &str,
    record: &str,
    net: &SortingNetwork,
    tuple_arity: usize,
) -> Result<SparseState> {
    let rule = LexRule::new(tuple_arity);
    run_lifted(state, data, record, net, &rule, Pass::Unshuffle, false)
}

/// Checks that every support config's `data` register is strictly sorted
/// under the rule.
pub fn require_sorted(state: &SparseState, data: &str, rule: &dyn CompareRule) -> Result<()> {
    let range = state.layout().range(data)?;
    let k = rule.arity();
    for (config, _) in state.terms() {
        let chunk = &config.flat()[range.clone()];
        for w in chunk.chunks(k).collect::<Vec<_>>().windows(2) {
            if rule.cmp(w[0], w[1]) != Ordering::Less {
                return Err(Error::NotSorted {
                    rule: rule.name().to_string(),
                    config: config.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Reversible sorting: maps a register sorted under `rule_from` to the same
/// multiset sorted under `rule_to`, using three scratch registers (two
/// records and an index list) that are allocated, driven through the
/// five-pass uncomputation chain, verified clean, and removed.
pub fn revsort_op(
    state: SparseState,
    data: &str,
    rule_from: &dyn CompareRule,
    rule_to: &dyn CompareRule,
    net: &SortingNetwork,
) -> Result<SparseState> {
    if rule_from.arity() != rule_to.arity() {
        return Err(Error::ArityMismatch {
            arity: rule_from.arity(),
            width: rule_to.arity(),
        });
    }
    let k = rule_from.arity();
    let data_arity = state.layout().spec(data)?.arity;
    if data_arity % k != 0 {
        return Err(Error::ArityMismatch {
            arity: k,
            width: data_arity,
        });
    }
    let n = data_arity / k;
    require_sorted(&state, data, rule_from)?;

    let n_bits = net.comparator_count();
    let rec2 = "__revsort_rec2";
    let rec3 = "__revsort_rec3";
    let idx = "__revsort_idx";
    let iota: Vec<Val> = (1..=n as Val).collect();
    let s = state
        .add_register(rec2, n_bits, 1, &vec![0; n_bits])?
        .add_register(rec3, n_bits, 1, &vec![0; n_bits])?
        .add_register(idx, n, n as Val, &iota)?;

    let s = sort_op(s, data, rec2, net, rule_to)?;
    let s = sort_op(s, data, rec3, net, rule_from)?;
    let s = unsort_op(s, idx, rec2, net, &PlainRule)?;
    let s = shuffle_op(s, idx, rec3, net, 1)?;
    let s = unsort_op(s, data, rec3, net, rule_from)?;

    // All three ancillas must be back at their initial values.
    let s = s.drop_register(idx)?;
    let s = s.drop_register(rec3)?;
    let s = s.drop_register(rec2)?;
    require_sorted(&s, data, rule_to)?;
    Ok(s)
}

/// Layer cost of one [`revsort_op`] call: five passes over the network.
pub fn revsort_depth(net: &SortingNetwork) -> DepthReport {
    DepthReport::comparator(5 * net.layer_count() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::Permutation;
    use crate::state::{BasisConfig, Layout};

    #[test]
    fn comparator_examples() {
        let (lo, hi, bit) = comparator(&[3], &[1], &PlainRule).unwrap();
        assert_eq!((lo, hi, bit), (vec![1], vec![3], 1));
        let (lo, hi, bit) = comparator(&[2], &[2], &PlainRule).unwrap();
        assert_eq!((lo, hi, bit), (vec![2], vec![2], 0));
        // parity order: odd sorts before even
        let (lo, hi, bit) = comparator(&[2], &[7], &ParityRule).unwrap();
        assert_eq!((lo, hi, bit), (vec![7], vec![2], 1));
    }

    #[test]
    fn bubble_network_shape() {
        let net = build_bubble(3);
        let comps: Vec<(usize, usize)> = net.layers.iter().flatten().copied().collect();
        assert_eq!(comps, vec![(0, 1), (1, 2), (0, 1)]);
        assert_eq!(net.comparator_count(), 3);
    }

    #[test]
    fn bitonic_network_shape() {
        let net = build_bitonic(8);
        assert_eq!(net.layer_count(), 6);
        assert_eq!(net.comparator_count(), 24);
        for layer in &net.layers {
            assert_eq!(layer.len(), 4);
            // disjoint slots within a layer
            let mut seen = std::collections::BTreeSet::new();
            for &(i, j) in layer {
                assert!(i < j);
                assert!(seen.insert(i));
                assert!(seen.insert(j));
            }
        }
        assert!(build_bitonic(1).layers.is_empty());
        // k(k+1)/2 layers for every power of two
        for k in 1..=6u32 {
            let n = 1usize << k;
            assert_eq!(
                build_bitonic(n).layer_count() as u32,
                k * (k + 1) / 2,
                "width {n}"
            );
        }
    }

    #[test]
    fn zero_one_principle_small_widths() {
        for n in 1..=12 {
            assert!(build_bubble(n).sorts_all_binary(), "bubble {n}");
        }
        for n in [2, 3, 4, 6, 8, 12, 16] {
            assert!(build_bitonic(n).sorts_all_binary(), "bitonic {n}");
        }
    }

    #[test]
    fn record_matches_paper_bubble_example() {
        let net = build_bubble(3);
        let sigma = Permutation::new(vec![3, 1, 2]).unwrap();
        assert_eq!(record_for_permutation(&net, &sigma).unwrap(), vec![1, 1, 0]);
    }

    fn basis_state(layout: Layout, vals: Vec<Val>) -> SparseState {
        SparseState::basis(layout, BasisConfig::new(vals)).unwrap()
    }

    fn chain_layout(n: usize, bound: Val, n_bits: usize) -> Layout {
        Layout::of(&[("data", n, bound), ("rec", n_bits, 1)])
    }

    #[test]
    fn sort_op_bubble_312() {
        let net = build_bubble(3);
        let layout = chain_layout(3, 9, net.comparator_count());
        let s = basis_state(layout, vec![3, 1, 2, 0, 0, 0]);
        let sorted = sort_op(s, "data", "rec", &net, &PlainRule).unwrap();
        let expect = BasisConfig::new(vec![1, 2, 3, 1, 1, 0]);
        assert!((sorted.amplitude(&expect).norm() - 1.0).abs() < 1e-12);

        // already sorted: record stays zero
        let layout = chain_layout(3, 9, net.comparator_count());
        let s = basis_state(layout, vec![1, 2, 3, 0, 0, 0]);
        let sorted = sort_op(s, "data", "rec", &net, &PlainRule).unwrap();
        let expect = BasisConfig::new(vec![1, 2, 3, 0, 0, 0]);
        assert!((sorted.amplitude(&expect).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sort_op_rejects_dirty_record() {
        let net = build_bubble(3);
        let layout = chain_layout(3, 9, net.comparator_count());
        let s = basis_state(layout, vec![3, 1, 2, 1, 0, 0]);
        assert!(matches!(
            sort_op(s, "data", "rec", &net, &PlainRule),
            Err(Error::RecordNotZero { .. })
        ));
    }

    #[test]
    fn unsort_table_rows() {
        // UNSORT on 122 with records of all six permutations of 123.
        let net = build_bubble(3);
        let rows: Vec<(Vec<Val>, Vec<Val>, Vec<Val>)> = vec![
            (vec![0, 0, 0], vec![1, 2, 2], vec![0, 0, 0]),
            (vec![0, 1, 0], vec![1, 2, 2], vec![0, 1, 0]),
            (vec![1, 0, 0], vec![2, 1, 2], vec![0, 0, 0]),
            (vec![0, 1, 1], vec![2, 2, 1], vec![0, 0, 0]),
            (vec![1, 1, 0], vec![2, 1, 2], vec![0, 1, 0]),
            (vec![1, 1, 1], vec![2, 2, 1], vec![1, 0, 0]),
        ];
        for (rec, want_data, want_trash) in rows {
            let layout = chain_layout(3, 9, 3);
            let mut vals = vec![1, 2, 2];
            vals.extend_from_slice(&rec);
            let s = basis_state(layout, vals);
            let out = unsort_op(s, "data", "rec", &net, &PlainRule).unwrap();
            let mut expect = want_data.clone();
            expect.extend_from_slice(&want_trash);
            assert!(
                (out.amplitude(&BasisConfig::new(expect)).norm() - 1.0).abs() < 1e-12,
                "record {rec:?}"
            );
        }
    }

    #[test]
    fn unsort_inverts_sort_and_paper_row() {
        let net = build_bubble(3);
        let layout = chain_layout(3, 9, 3);
        // |123>|110> -> |312>|000>, the inverse of sorting 312
        let s = basis_state(layout, vec![1, 2, 3, 1, 1, 0]);
        let out = unsort_op(s, "data", "rec", &net, &PlainRule).unwrap();
        let expect = BasisConfig::new(vec![3, 1, 2, 0, 0, 0]);
        assert!((out.amplitude(&expect).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn record_is_independent_of_the_sil() {
        let net = build_bitonic(4);
        for sigma in Permutation::all(4) {
            let l1: Vec<Val> = vec![1, 3, 5, 7];
            let l2: Vec<Val> = vec![0, 2, 4, 9];
            let p1: Vec<Val> = sigma.apply(&l1).unwrap();
            let p2: Vec<Val> = sigma.apply(&l2).unwrap();
            let (s1, r1) = sort_with_record(&p1, &net, &PlainRule, false).unwrap();
            let (s2, r2) = sort_with_record(&p2, &net, &PlainRule, false).unwrap();
            assert_eq!(s1, l1);
            assert_eq!(s2, l2);
            assert_eq!(r1, r2, "records differ for {:?}", sigma.image());
        }
    }

    #[test]
    fn shuffle_applies_recorded_permutation() {
        let net = build_bubble(3);
        // record of tau with tau(123) = 312 is 110
        let layout = chain_layout(3, 9, 3);
        let s = basis_state(layout, vec![1, 2, 3, 1, 1, 0]);
        let out = shuffle_op(s, "data", "rec", &net, 1).unwrap();
        let expect = BasisConfig::new(vec![3, 1, 2, 1, 1, 0]);
        assert!((out.amplitude(&expect).norm() - 1.0).abs() < 1e-12);

        // shuffle with all-zero record leaves data unchanged
        let layout = chain_layout(3, 9, 3);
        let s = basis_state(layout, vec![2, 1, 3, 0, 0, 0]);
        let out = shuffle_op(s, "data", "rec", &net, 1).unwrap();
        let expect = BasisConfig::new(vec![2, 1, 3, 0, 0, 0]);
        assert!((out.amplitude(&expect).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shuffle_composes_permutations() {
        // |sigma(l)>|rec(tau)> -> |tau.sigma(l)>|rec(tau)> for all pairs, n=4
        let net = build_bitonic(4);
        let l: Vec<Val> = vec![2, 4, 6, 8];
        for sigma in Permutation::all(4) {
            for tau in Permutation::all(4) {
                let rec = record_for_permutation(&net, &tau).unwrap();
                let mut vals: Vec<Val> = sigma.apply(&l).unwrap();
                vals.extend_from_slice(&rec);
                let layout = chain_layout(4, 9, net.comparator_count());
                let s = basis_state(layout, vals);
                let out = shuffle_op(s, "data", "rec", &net, 1).unwrap();
                let mut expect: Vec<Val> = tau.compose(&sigma).unwrap().apply(&l).unwrap();
                expect.extend_from_slice(&rec);
                assert!(
                    (out.amplitude(&BasisConfig::new(expect)).norm() - 1.0).abs() < 1e-12,
                    "sigma {:?} tau {:?}",
                    sigma.image(),
                    tau.image()
                );
            }
        }
    }

    #[test]
    fn unshuffle_then_shuffle_roundtrip() {
        let net = build_bitonic(5);
        let layout = chain_layout(5, 9, net.comparator_count());
        let rec = record_for_permutation(&net, &Permutation::new(vec![2, 5, 1, 4, 3]).unwrap())
            .unwrap();
        let mut vals: Vec<Val> = vec![9, 7, 5, 3, 1];
        vals.extend_from_slice(&rec);
        let s = basis_state(layout, vals);
        let out = shuffle_op(s.clone(), "data", "rec", &net, 1).unwrap();
        let back = unshuffle_op(out, "data", "rec", &net, 1).unwrap();
        assert!((back.fidelity(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn revsort_parity_paper_example() {
        let rule1 = PlainRule;
        let rule2 = ParityRule;
        let net = build_bitonic(7);
        let layout = Layout::of(&[("data", 7, 9)]);
        let s = basis_state(layout, vec![1, 2, 3, 4, 5, 7, 8]);
        let out = revsort_op(s.clone(), "data", &rule1, &rule2, &net).unwrap();
        let expect = BasisConfig::new(vec![1, 3, 5, 7, 2, 4, 8]);
        assert!((out.amplitude(&expect).norm() - 1.0).abs() < 1e-12);

        // round trip back to plain order
        let back = revsort_op(out, "data", &rule2, &rule1, &net).unwrap();
        assert!((back.fidelity(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn revsort_same_rule_is_identity() {
        let net = build_bitonic(4);
        let layout = Layout::of(&[("data", 4, 9)]);
        let s = basis_state(layout, vec![0, 3, 5, 9]);
        let out = revsort_op(s.clone(), "data", &PlainRule, &PlainRule, &net).unwrap();
        assert!((out.fidelity(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn revsort_rejects_unsorted_input() {
        let net = build_bitonic(3);
        let layout = Layout::of(&[("data", 3, 9)]);
        let s = basis_state(layout, vec![3, 1, 2]);
        assert!(matches!(
            revsort_op(s, "data", &PlainRule, &ParityRule, &net),
            Err(Error::NotSorted { .. })
        ));
    }

    #[test]
    fn trash_state_law_general() {
        // Unsorting an NSIL with any record from the coset of a stable
        // representative produces the representative's rearrangement, and
        // the record uncomputes to zero exactly when it is the record the
        // forward sort itself produces on that rearrangement.
        use crate::perm::{canonical_coset_reps, enumerate_h};
        let l: Vec<Val> = vec![1, 2, 2, 3];
        let net = build_bitonic(4);
        let n_bits = net.comparator_count();
        for rep in canonical_coset_reps(&l).unwrap() {
            let permuted = rep.apply(&l).unwrap();
            let (_, own_record) = sort_with_record(&permuted, &net, &PlainRule, false).unwrap();
            for h in enumerate_h(&l).unwrap() {
                let sigma = rep.compose(&h).unwrap();
                let rec = record_for_permutation(&net, &sigma).unwrap();
                let layout = chain_layout(4, 9, n_bits);
                let mut vals = l.clone();
                vals.extend_from_slice(&rec);
                let s = basis_state(layout, vals);
                let out = unsort_op(s, "data", "rec", &net, &PlainRule).unwrap();
                let (config, _) = out.terms().next().unwrap();
                assert_eq!(&config.flat()[..4], permuted.as_slice(), "data moved wrong");
                let trash = &config.flat()[4..];
                let zero = trash.iter().all(|&b| b == 0);
                assert_eq!(
                    zero,
                    rec == own_record,
                    "trash pattern for rep {:?}, h {:?}",
                    rep.image(),
                    h.image()
                );
            }
        }
    }

    #[test]
    fn stabilized_rule_recovers_canonical_records() {
        // Tagging elements with their index and extending the order
        // lexicographically makes any network produce the record of the
        // stable coset representative when sorting a list with repeats.
        use crate::perm::{multiset_permutations, stable_rep_for};
        let l: Vec<Val> = vec![1, 2, 2, 3];
        let net = build_bitonic(4);
        let stable = StabilizedRule::new(&PlainRule);
        for r in multiset_permutations(&l) {
            let tagged: Vec<Val> = r
                .iter()
                .enumerate()
                .flat_map(|(i, &v)| [v, i as Val])
                .collect();
            let (_, bits) = sort_with_record(&tagged, &net, &stable, false).unwrap();
            let rep = stable_rep_for(&l, &r).unwrap();
            let expect = record_for_permutation(&net, &rep).unwrap();
            assert_eq!(bits, expect, "rearrangement {r:?}");
        }
    }

    #[test]
    fn layer_comparators_commute() {
        // applying comparators within a layer in any order gives the same result
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let net = build_bitonic(8);
        for _ in 0..50 {
            let items: Vec<Val> = (0..8).map(|_| rng.gen_range(0..20)).collect();
            let (sorted, bits) = sort_with_record(&items, &net, &PlainRule, false).unwrap();
            // reversed-within-layer variant
            let rev = SortingNetwork {
                width: net.width,
                layers: net
                    .layers
                    .iter()
                    .map(|l| l.iter().rev().copied().collect())
                    .collect(),
            };
            let (sorted2, bits2) = sort_with_record(&items, &rev, &PlainRule, false).unwrap();
            assert_eq!(sorted, sorted2);
            // same multiset of bits per layer (order within layer flipped)
            let mut off = 0;
            for layer in &net.layers {
                let a: Vec<Val> = bits[off..off + layer.len()].to_vec();
                let mut b: Vec<Val> = bits2[off..off + layer.len()].to_vec();
                b.reverse();
                assert_eq!(a, b);
                off += layer.len();
            }
        }
    }

    #[test]
    fn sort_restores_after_unsort_on_superpositions() {
        use num_complex::Complex64;
        let net = build_bitonic(4);
        let layout = chain_layout(4, 9, net.comparator_count());
        let mut items = Vec::new();
        let amp = Complex64::new(0.5, 0.0);
        for (i, perm) in [[3, 1, 4, 2], [1, 4, 3, 2], [4, 3, 2, 1], [2, 1, 3, 4]]
            .iter()
            .enumerate()
        {
            let mut vals: Vec<Val> = perm.to_vec();
            vals.extend(vec![0; net.comparator_count()]);
            let phase = Complex64::new(0.0, 1.0).powu(i as u32);
            items.push((BasisConfig::new(vals), amp * phase));
        }
        let s = SparseState::from_terms(layout, items).unwrap();
        let sorted = sort_op(s.clone(), "data", "rec", &net, &PlainRule).unwrap();
        let back = unsort_op(sorted, "data", "rec", &net, &PlainRule).unwrap();
        assert!((back.fidelity(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    // exhaustive total-order check over a small value box
    fn assert_total_order(rule: &dyn CompareRule, vals: &[Vec<Val>]) {
        use Ordering::*;
        for a in vals {
            assert_eq!(rule.cmp(a, a), Equal, "{} not reflexive on {a:?}", rule.name());
            for b in vals {
                let ab = rule.cmp(a, b);
                let ba = rule.cmp(b, a);
                assert_eq!(ab.reverse(), ba, "{} not antisymmetric", rule.name());
                for c in vals {
                    if ab == Less && rule.cmp(b, c) == Less {
                        assert_eq!(rule.cmp(a, c), Less, "{} not transitive", rule.name());
                    }
                }
            }
        }
    }

    #[test]
    fn builtin_rules_are_total_orders() {
        let scalars: Vec<Vec<Val>> = (0..8).map(|v| vec![v]).collect();
        assert_total_order(&PlainRule, &scalars);
        assert_total_order(&ParityRule, &scalars);
        let pairs: Vec<Vec<Val>> = (0..8)
            .flat_map(|a| (0..8).map(move |b| vec![a, b]))
            .collect();
        assert_total_order(&LexRule::new(2), &pairs);
        let triples: Vec<Vec<Val>> = (0..4)
            .flat_map(|a| (0..4).flat_map(move |b| (0..4).map(move |c| vec![a, b, c])))
            .collect();
        assert_total_order(&LexRule::new(3), &triples);
    }

    #[test]
    fn network_json_round_trip() {
        let net = build_bitonic(8);
        let back = SortingNetwork::from_json(&net.to_json()).unwrap();
        assert_eq!(net, back);
    }
}
