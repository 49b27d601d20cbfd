//! Factorization of N-emitter operator moments into single-emitter moments.
//!
//! A moment ⟨Q₁Q₂…Q_k⟩ of collective operators Q = Σ_j q^{(j)} over N
//! identical, uncorrelated emitters is a sum over assignments of the k
//! operator slots to emitters. Grouping assignments by which slots share an
//! emitter gives one term per set partition of the slots, weighted by the
//! number of ways to pick distinct emitters for its c classes, N!/(N−c)!.
//! Within a class the slot order of the parent product is kept.

use std::collections::HashMap;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NScalingError {
    #[error("moment order k = {0} outside the supported range 2..=4")]
    UnsupportedOrder(usize),
    #[error("emitter count must be at least 1")]
    InvalidCount,
    #[error("no single-emitter moment supplied for slots {0:?}")]
    MissingTuple(Vec<usize>),
}

/// N!/(N−c)! as a float; zero when c > N.
pub fn falling_factorial(n: f64, c: u32) -> f64 {
    (0..c).map(|j| n - f64::from(j)).fold(1.0, |acc, f| if f <= 0.0 { 0.0 } else { acc * f })
}

/// Set partition of slots 0..k stored as a restricted-growth string:
/// `rgs[s]` is the class of slot s, classes numbered by first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    pub rgs: Vec<u8>,
}

impl Partition {
    pub fn class_count(&self) -> usize {
        self.rgs.iter().map(|&c| c as usize + 1).max().unwrap_or(0)
    }

    /// Slot lists of each class, slots ascending.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count()];
        for (slot, &c) in self.rgs.iter().enumerate() {
            out[c as usize].push(slot);
        }
        out
    }

    /// Class sizes, descending.
    pub fn shape(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.classes().iter().map(Vec::len).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for class in self.classes() {
            write!(f, "{{")?;
            for s in class {
                write!(f, "{}", s + 1)?;
            }
            write!(f, "}}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTerm {
    pub multiplicity: f64,
    pub partition: Partition,
}

fn partitions(k: usize) -> Vec<Partition> {
    fn grow(prefix: &mut Vec<u8>, k: usize, out: &mut Vec<Partition>) {
        if prefix.len() == k {
            out.push(Partition { rgs: prefix.clone() });
            return;
        }
        let next = prefix.iter().map(|&c| c + 1).max().unwrap_or(0);
        for c in 0..=next {
            prefix.push(c);
            grow(prefix, k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::with_capacity(k), k, &mut out);
    out
}

/// All set partitions of k slots with their multiplicities for N emitters,
/// ordered from the fully coincident case to the all-distinct case (by
/// class count, then by shape with larger blocks first).
pub fn expand_moment(k: usize, n: u64) -> Result<Vec<MomentTerm>, NScalingError> {
    if !(2..=4).contains(&k) {
        return Err(NScalingError::UnsupportedOrder(k));
    }
    if n == 0 {
        return Err(NScalingError::InvalidCount);
    }
    let mut parts = partitions(k);
    parts.sort_by(|a, b| {
        a.class_count()
            .cmp(&b.class_count())
            .then_with(|| b.shape().cmp(&a.shape()))
            .then_with(|| a.rgs.cmp(&b.rgs))
    });
    Ok(parts
        .into_iter()
        .map(|p| MomentTerm { multiplicity: falling_factorial(n as f64, p.class_count() as u32), partition: p })
        .collect())
}

/// Single-emitter moments keyed by the ordered slot list they multiply.
pub type MomentTable = HashMap<Vec<usize>, Complex64>;

/// Σ_terms multiplicity · Π_classes ⟨ordered product over the class⟩.
pub fn evaluate_moment(terms: &[MomentTerm], moments: &MomentTable) -> Result<Complex64, NScalingError> {
    let mut total = Complex64::new(0.0, 0.0);
    for term in terms {
        let mut prod = Complex64::new(1.0, 0.0);
        for class in term.partition.classes() {
            prod *= *moments.get(&class).ok_or(NScalingError::MissingTuple(class))?;
        }
        total += prod * term.multiplicity;
    }
    Ok(total)
}

/// Reference value by enumerating all N^k assignments of slots to emitters.
pub fn brute_force_moment(k: usize, n: usize, moments: &MomentTable) -> Result<Complex64, NScalingError> {
    let mut total = Complex64::new(0.0, 0.0);
    let mut assign = vec![0usize; k];
    let count = n.pow(k as u32);
    for idx in 0..count {
        let mut rest = idx;
        for a in assign.iter_mut() {
            *a = rest % n;
            rest /= n;
        }
        let mut prod = Complex64::new(1.0, 0.0);
        let mut seen: Vec<usize> = Vec::with_capacity(k);
        for &e in &assign {
            if seen.contains(&e) {
                continue;
            }
            seen.push(e);
            let slots: Vec<usize> = (0..k).filter(|&s| assign[s] == e).collect();
            prod *= *moments.get(&slots).ok_or_else(|| NScalingError::MissingTuple(slots.clone()))?;
        }
        total += prod;
    }
    Ok(total)
}

/// Every ordered slot subset a k-slot moment may require.
pub fn required_tuples(k: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << k)).map(|mask| (0..k).filter(|s| mask & (1 << s) != 0).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_order_terms() {
        let t = expand_moment(2, 5).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].partition.to_string(), "{12}");
        assert_eq!(t[0].multiplicity, 5.0);
        assert_eq!(t[1].partition.to_string(), "{1}{2}");
        assert_eq!(t[1].multiplicity, 20.0);
    }

    #[test]
    fn fourth_order_classes() {
        let t = expand_moment(4, 7).unwrap();
        assert_eq!(t.len(), 15);
        let mut groups: Vec<(Vec<usize>, usize)> = Vec::new();
        for term in &t {
            let shape = term.partition.shape();
            match groups.last_mut() {
                Some((s, c)) if *s == shape => *c += 1,
                _ => groups.push((shape, 1)),
            }
        }
        let sizes: Vec<usize> = groups.iter().map(|g| g.1).collect();
        assert_eq!(sizes, vec![1, 4, 3, 6, 1]);
        let total: f64 = t.iter().map(|x| x.multiplicity).sum();
        assert_eq!(total, 7f64.powi(4));
    }

    #[test]
    fn small_n_truncates() {
        let t = expand_moment(4, 1).unwrap();
        let nonzero: Vec<_> = t.iter().filter(|x| x.multiplicity != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].partition.class_count(), 1);
    }

    #[test]
    fn errors() {
        assert_eq!(expand_moment(5, 3), Err(NScalingError::UnsupportedOrder(5)));
        assert_eq!(expand_moment(1, 3), Err(NScalingError::UnsupportedOrder(1)));
        assert_eq!(expand_moment(2, 0), Err(NScalingError::InvalidCount));
        let t = expand_moment(2, 3).unwrap();
        assert!(matches!(evaluate_moment(&t, &MomentTable::new()), Err(NScalingError::MissingTuple(_))));
    }

    #[test]
    fn falling_factorial_values() {
        assert_eq!(falling_factorial(5.0, 0), 1.0);
        assert_eq!(falling_factorial(5.0, 3), 60.0);
        assert_eq!(falling_factorial(2.0, 3), 0.0);
    }
}
