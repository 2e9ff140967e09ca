//! Permutations, non-strictly/strictly increasing lists, and the coset
//! structure of the stabilizer subgroup of a list with repetitions.
//!
//! Permutations are 1-indexed and stored by their image list, so the
//! permutation written `436125` maps position 1 to value 4. Everything in
//! here is a brute-force-friendly value type; the enumeration routines double
//! as ground-truth oracles for the algorithmic modules.

use crate::error::{Error, Result};
use crate::state::Val;

/// A bijection on `{1..n}`, stored as its image list `sigma(12..n)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        let mut seen = vec![false; n + 1];
        for &v in &image {
            if v == 0 || v > n || seen[v] {
                return Err(Error::InvalidArgument(format!(
                    "{image:?} is not a permutation image"
                )));
            }
            seen[v] = true;
        }
        Ok(Permutation { image })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            image: (1..=n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    /// Value at 1-indexed position `i`.
    pub fn at(&self, i: usize) -> usize {
        self.image[i - 1]
    }

    /// Applies the permutation to a list: output position `i` receives the
    /// element of `l` at position `sigma(i)`. By construction
    /// `apply(sigma, 12..n) = sigma.image()`.
    pub fn apply<T: Clone>(&self, l: &[T]) -> Result<Vec<T>> {
        if l.len() != self.image.len() {
            return Err(Error::SizeMismatch(format!(
                "permutation of size {} applied to list of size {}",
                self.image.len(),
                l.len()
            )));
        }
        Ok(self.image.iter().map(|&j| l[j - 1].clone()).collect())
    }

    /// Group operation chosen so that
    /// `compose(a, b).apply(l) == a.apply(&b.apply(l))`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return Err(Error::SizeMismatch("composing unequal sizes".into()));
        }
        Ok(Permutation {
            image: self.image.iter().map(|&i| other.image[i - 1]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut image = vec![0; self.image.len()];
        for (i, &v) in self.image.iter().enumerate() {
            image[v - 1] = i + 1;
        }
        Permutation { image }
    }

    /// All `n!` permutations in lexicographic image order.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut image: Vec<usize> = (1..=n).collect();
        loop {
            out.push(Permutation {
                image: image.clone(),
            });
            if !next_permutation(&mut image) {
                break;
            }
        }
        out
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// True iff `l` is non-decreasing.
pub fn is_nsil(l: &[Val]) -> bool {
    l.windows(2).all(|w| w[0] <= w[1])
}

/// True iff `l` is strictly increasing.
pub fn is_sil(l: &[Val]) -> bool {
    l.windows(2).all(|w| w[0] < w[1])
}

pub fn require_nsil(l: &[Val]) -> Result<()> {
    if is_nsil(l) {
        Ok(())
    } else {
        Err(Error::NotNsil(format!("{l:?}")))
    }
}

pub fn require_sil(l: &[Val]) -> Result<()> {
    if is_sil(l) {
        Ok(())
    } else {
        Err(Error::NotSil(format!("{l:?}")))
    }
}

/// Maximal runs of equal values in a non-decreasing list, as
/// `(start, length)` with 1-indexed starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetStructure {
    pub blocks: Vec<(usize, usize)>,
}

impl CosetStructure {
    pub fn of(l: &[Val]) -> Result<Self> {
        require_nsil(l)?;
        let mut blocks = Vec::new();
        let mut start = 0;
        for i in 1..=l.len() {
            if i == l.len() || l[i] != l[start] {
                blocks.push((start + 1, i - start));
                start = i;
            }
        }
        Ok(CosetStructure { blocks })
    }

    /// `prod n_v!` over the value multiplicities.
    pub fn subgroup_order(&self) -> u64 {
        self.blocks
            .iter()
            .map(|&(_, len)| factorial(len as u64))
            .product()
    }
}

pub fn factorial(n: u64) -> u64 {
    (1..=n).product::<u64>().max(1)
}

/// Order of the subgroup `H_l` of permutations fixing `l`.
pub fn subgroup_order(l: &[Val]) -> Result<u64> {
    Ok(CosetStructure::of(l)?.subgroup_order())
}

/// Enumerates `H_l = { h : h(l) = l }`: all products of permutations acting
/// within each run of equal values.
pub fn enumerate_h(l: &[Val]) -> Result<Vec<Permutation>> {
    let coset = CosetStructure::of(l)?;
    let n = l.len();
    let mut images: Vec<Vec<usize>> = vec![(1..=n).collect()];
    for &(start, len) in &coset.blocks {
        if len == 1 {
            continue;
        }
        let positions: Vec<usize> = (start..start + len).collect();
        let mut extended = Vec::new();
        for base in &images {
            for p in Permutation::all(len) {
                let mut image = base.clone();
                for (slot, &pi) in p.image().iter().enumerate() {
                    image[positions[slot] - 1] = positions[pi - 1];
                }
                extended.push(image);
            }
        }
        images = extended;
    }
    images.sort();
    images
        .into_iter()
        .map(Permutation::new)
        .collect()
}

/// Stable coset representatives `R_l`: for each distinct rearrangement of
/// `l`, the unique permutation producing it that keeps equal elements in
/// their original relative order.
pub fn canonical_coset_reps(l: &[Val]) -> Result<Vec<Permutation>> {
    require_nsil(l)?;
    let rearrangements = multiset_permutations(l);
    let mut reps = Vec::with_capacity(rearrangements.len());
    for r in &rearrangements {
        reps.push(stable_rep_for(l, r)?);
    }
    reps.sort();
    Ok(reps)
}

/// The stable permutation with `apply(sigma, l) == target`.
pub fn stable_rep_for(l: &[Val], target: &[Val]) -> Result<Permutation> {
    if l.len() != target.len() {
        return Err(Error::SizeMismatch("stable rep size mismatch".into()));
    }
    // Queue of source positions per value, in ascending order.
    let mut queues: std::collections::BTreeMap<Val, std::collections::VecDeque<usize>> =
        std::collections::BTreeMap::new();
    for (i, &v) in l.iter().enumerate() {
        queues.entry(v).or_default().push_back(i + 1);
    }
    let mut image = Vec::with_capacity(l.len());
    for &v in target {
        let q = queues
            .get_mut(&v)
            .filter(|q| !q.is_empty())
            .ok_or_else(|| {
                Error::InvalidArgument(format!("{target:?} is not a rearrangement of {l:?}"))
            })?;
        image.push(q.pop_front().expect("nonempty"));
    }
    Permutation::new(image)
}

/// All distinct rearrangements of `l`, sorted. Count is the multinomial
/// coefficient `n! / prod n_v!`.
pub fn multiset_permutations(l: &[Val]) -> Vec<Vec<Val>> {
    let mut sorted = l.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::new();
    loop {
        out.push(sorted.clone());
        if !next_val_permutation(&mut sorted) {
            break;
        }
    }
    out
}

fn next_val_permutation(v: &mut [Val]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Enumerates all non-decreasing lists of length `n` over values `0..=m`.
pub fn all_nsils(n: usize, m: Val) -> Vec<Vec<Val>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(out: &mut Vec<Vec<Val>>, cur: &mut Vec<Val>, n: usize, m: Val, lo: Val) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in lo..=m {
            cur.push(v);
            rec(out, cur, n, m, v);
            cur.pop();
        }
    }
    rec(&mut out, &mut cur, n, m, 0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn apply_identity_fixes_list() {
        let id = Permutation::identity(3);
        assert_eq!(id.apply(&[1u32, 2, 2]).unwrap(), vec![1, 2, 2]);
    }

    #[test]
    fn apply_matches_image_on_iota() {
        let p = Permutation::new(vec![4, 3, 6, 1, 2, 5]).unwrap();
        let iota: Vec<Val> = (1..=6).collect();
        assert_eq!(p.apply(&iota).unwrap(), vec![4, 3, 6, 1, 2, 5]);
    }

    #[test]
    fn subgroup_order_counts_runs() {
        assert_eq!(subgroup_order(&[1, 2, 2, 3]).unwrap(), 2);
        assert_eq!(subgroup_order(&[2, 5, 9]).unwrap(), 1);
        assert_eq!(subgroup_order(&[1, 3, 3, 3, 3, 3, 3, 8]).unwrap(), 720);
    }

    #[test]
    fn enumerate_h_fixes_the_list() {
        let l = [1u32, 2, 2, 3];
        let h = enumerate_h(&l).unwrap();
        assert_eq!(h.len(), 2);
        for p in &h {
            assert_eq!(p.apply(&l).unwrap(), l.to_vec());
        }
        // Strictly increasing: only the identity.
        let h = enumerate_h(&[4, 7, 9]).unwrap();
        assert_eq!(h, vec![Permutation::identity(3)]);
    }

    #[test]
    fn coset_reps_yield_distinct_rearrangements() {
        let l = [1u32, 2, 2];
        let reps = canonical_coset_reps(&l).unwrap();
        assert_eq!(reps.len(), 3);
        let mut images: Vec<Vec<Val>> = reps.iter().map(|p| p.apply(&l).unwrap()).collect();
        images.sort();
        assert_eq!(images, vec![vec![1, 2, 2], vec![2, 1, 2], vec![2, 2, 1]]);

        assert_eq!(canonical_coset_reps(&[1, 2, 3]).unwrap().len(), 6);
        assert_eq!(
            canonical_coset_reps(&[1, 1, 1, 1]).unwrap(),
            vec![Permutation::identity(4)]
        );
    }

    #[test]
    fn unique_coset_factorization_exhaustive() {
        // sigma = rep . h uniquely and |R_l| * |H_l| = n!, for every
        // non-decreasing list with n <= 6 over values 0..=4.
        for n in 1..=6 {
            for l in all_nsils(n, 4) {
                let reps = canonical_coset_reps(&l).unwrap();
                let h = enumerate_h(&l).unwrap();
                assert_eq!(
                    reps.len() as u64 * h.len() as u64,
                    factorial(n as u64),
                    "l = {l:?}"
                );
                let mut seen = std::collections::BTreeSet::new();
                for rep in &reps {
                    for hh in &h {
                        let p = rep.compose(hh).unwrap();
                        assert_eq!(p.apply(&l).unwrap(), rep.apply(&l).unwrap());
                        assert!(seen.insert(p.image().to_vec()), "duplicate factorization");
                    }
                }
                assert_eq!(seen.len() as u64, factorial(n as u64));
            }
        }
    }

    #[test]
    fn multiset_permutation_counts() {
        assert_eq!(
            multiset_permutations(&[1, 2, 2]),
            vec![vec![1, 2, 2], vec![2, 1, 2], vec![2, 2, 1]]
        );
        assert_eq!(multiset_permutations(&[1, 2]).len(), 2);
        assert_eq!(multiset_permutations(&[1, 2, 2, 3]).len(), 12);
    }

    proptest! {
        #[test]
        fn apply_is_group_action(n in 1usize..6, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let all = Permutation::all(n);
            let sigma = &all[rng.gen_range(0..all.len())];
            let tau = &all[rng.gen_range(0..all.len())];
            let l: Vec<Val> = (0..n).map(|_| rng.gen_range(0..5)).collect();
            let lhs = sigma.compose(tau).unwrap().apply(&l).unwrap();
            let rhs = sigma.apply(&tau.apply(&l).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
            prop_assert_eq!(Permutation::identity(n).apply(&l).unwrap(), l);
        }
    }
}
