use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{concordance_index, Forest, ForestData, ForestError, Node};

/// Permutation importance: for each variable, its values are shuffled among
/// every tree's OOB cases before those cases are dropped down the tree; the
/// result is the OOB error after shuffling minus the OOB error before.
///
/// Variable `j` shuffles with its own stream keyed by (`seed`, `j`).
pub fn variable_importance(forest: &Forest, data: &ForestData, seed: u64) -> Result<Vec<(String, f64)>, ForestError> {
    let n = data.n_cases();
    let mut n_oob = vec![0u32; n];
    for tree in &forest.trees {
        for (i, m) in tree.in_bag.iter().enumerate() {
            if *m == 0 {
                n_oob[i] += 1;
            }
        }
    }
    if let Some(i) = n_oob.iter().position(|&k| k == 0) {
        return Err(ForestError::NoOobTrees(i));
    }
    let baseline = 1.0 - concordance_index(&data.times, &data.events, &forest.oob_mortality(data)?)?;

    (0..data.n_variables())
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut sum = vec![0.0; n];
            let mut row = vec![0.0; data.n_variables()];
            for tree in &forest.trees {
                let oob: Vec<usize> = (0..n).filter(|&i| tree.is_oob(i)).collect();
                let mut shuffled: Vec<f64> = oob.iter().map(|&i| data.value(i, j)).collect();
                shuffled.shuffle(&mut rng);
                for (&case, &v) in oob.iter().zip(&shuffled) {
                    row.copy_from_slice(data.row(case));
                    row[j] = v;
                    if let Node::Leaf { leaf, .. } = &tree.nodes[tree.leaf_index(&row)] {
                        sum[case] += leaf.mortality;
                    }
                }
            }
            let m: Vec<f64> = sum.iter().zip(&n_oob).map(|(s, k)| s / *k as f64).collect();
            let err = 1.0 - concordance_index(&data.times, &data.events, &m)?;
            Ok((data.variables[j].name.clone(), err - baseline))
        })
        .collect()
}
