use crate::numkernel::Rng;

/// Walker/Vose alias table for O(1) draws from a fixed discrete distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Builds from non-negative weights with a positive sum.
    pub fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        assert!(n > 0, "alias table needs at least one outcome");
        let total: f64 = weights.iter().sum();
        assert!(
            total > 0.0 && total.is_finite(),
            "weights must have a positive finite sum"
        );
        let mut prob: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut alias = vec![0u32; n];
        let mut small: Vec<usize> = Vec::new();
        let mut large: Vec<usize> = Vec::new();
        for (i, &p) in prob.iter().enumerate() {
            if p < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s] = l as u32;
            prob[l] -= 1.0 - prob[s];
            if prob[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers carry rounding error only
        for i in small.into_iter().chain(large) {
            prob[i] = 1.0;
        }
        Self { prob, alias }
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    #[inline]
    pub fn sample(&self, rng: &mut Rng) -> usize {
        let i = rng.below(self.prob.len());
        if rng.uniform() < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }

    /// Probability of each outcome implied by the table.
    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.prob.len() as f64;
        let mut out: Vec<f64> = self.prob.iter().map(|p| p / n).collect();
        for (i, &p) in self.prob.iter().enumerate() {
            out[self.alias[i] as usize] += (1.0 - p) / n;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    #[test]
    fn degenerate_and_uniform() {
        let one = AliasTable::new(&[3.0]);
        assert_eq!(one.sample(&mut Rng::seed_from_u64(0)), 0);
        let uni = AliasTable::new(&[1.0; 4]);
        assert_eq!(uni.probabilities(), vec![0.25; 4]);
    }

    #[test]
    fn zero_weight_never_drawn() {
        let t = AliasTable::new(&[0.0, 1.0, 0.0, 2.0]);
        let mut rng = Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let k = t.sample(&mut rng);
            assert!(k == 1 || k == 3);
        }
    }

    proptest! {
        #[test]
        fn table_reproduces_weights(weights in proptest::collection::vec(0.01f64..10.0, 1..20)) {
            let total: f64 = weights.iter().sum();
            let t = AliasTable::new(&weights);
            for (p, w) in t.probabilities().iter().zip(&weights) {
                prop_assert!((p - w / total).abs() < 1e-12);
            }
        }
    }
}
