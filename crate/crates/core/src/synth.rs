//! Seeded random dependency trees for property checks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::parse::{DependencyTree, Word};
use crate::relation::UD_RELATIONS;

/// Random tree over `n` words: a random attachment order builds a
/// recursive tree, which is then relabelled by a random permutation so the
/// root and arc directions land anywhere in the sentence. Forms are short
/// random lowercase strings; labels are drawn from the universal set
/// (excluding `root`).
pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DependencyTree {
    assert!(n > 0, "a tree needs at least one word");
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    // order[k] is attached to some earlier order[j]
    let mut head = vec![0usize; n + 1];
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        head[order[k]] = parent;
    }
    let labels: Vec<&str> = UD_RELATIONS.iter().copied().filter(|l| *l != "root").collect();
    let words = (1..=n)
        .map(|i| {
            let len = rng.gen_range(1..=4);
            let form: String = (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
            let deprel = if head[i] == 0 {
                "root".to_owned()
            } else {
                labels[rng.gen_range(0..labels.len())].to_owned()
            };
            Word {
                index: i,
                form,
                head: head[i],
                deprel,
            }
        })
        .collect();
    let tree = DependencyTree {
        sent_id: None,
        words,
        root_index: order[0],
    };
    debug_assert!(tree.validate(1).is_ok());
    tree
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trees_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(1..=20);
            let t = random_tree(&mut rng, n);
            t.validate(1).unwrap();
            assert_eq!(t.edges().len(), n - 1);
        }
    }
}
