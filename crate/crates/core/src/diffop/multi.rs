use alloc::vec::Vec;
use core::cmp::Ordering;

/// Derivative multi-index `α = (α_1, …, α_n)`, ordered graded-lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(alpha: Vec<u32>) -> MultiIndex {
        MultiIndex(alpha)
    }

    pub fn zero(n: usize) -> MultiIndex {
        MultiIndex(alloc::vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> MultiIndex {
        let mut a = MultiIndex::zero(n);
        a.0[i] = 1;
        a
    }

    pub fn bump(&mut self, i: usize) {
        self.0[i] += 1;
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|α|`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `α − γ`; `γ ≤ α` componentwise is assumed.
    pub fn minus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Every `γ ≤ α` componentwise.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = alloc::vec![MultiIndex::zero(self.dim())];
        for (i, &k) in self.0.iter().enumerate() {
            let prev = core::mem::take(&mut out);
            for g in prev {
                for j in 0..=k {
                    let mut h = g.clone();
                    h.0[i] = j;
                    out.push(h);
                }
            }
        }
        out
    }

    /// `Π_i C(α_i, γ_i)`.
    pub fn binomial(&self, gamma: &MultiIndex, choose: fn(u32, u32) -> i64) -> i64 {
        self.0.iter().zip(&gamma.0).map(|(&a, &g)| choose(a, g)).product()
    }

    pub fn all_up_to(n: usize, max_order: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = alloc::vec![0u32; n];
        fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if i == cur.len() {
                out.push(MultiIndex(cur.clone()));
                return;
            }
            for k in 0..=left {
                cur[i] = k;
                rec(i + 1, left - k, cur, out);
            }
            cur[i] = 0;
        }
        rec(0, max_order, &mut cur, &mut out);
        out.sort();
        out
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &MultiIndex) -> Ordering {
        self.order().cmp(&other.order()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &MultiIndex) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
