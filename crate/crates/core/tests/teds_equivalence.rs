//! Cross-checks the dynamic-programming tree edit distance against the
//! exhaustive mapping enumeration in `support`, on random table-shaped trees
//! small enough for the enumeration to finish.

mod support;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tabgen::teds::{substitution_cost, tree_edit_distance};

#[test]
fn dp_distance_matches_mapping_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ed5);
    for case in 0..200 {
        let a = support::random_table_tree(&mut rng, 8);
        let b = support::random_table_tree(&mut rng, 8);
        let fast = tree_edit_distance(&a, &b);
        let slow = support::mapping_ted(&a, &b, &substitution_cost);
        assert_eq!(fast, slow, "case {case}: dp {fast} vs enumeration {slow}\n{a:?}\n{b:?}");
    }
}
