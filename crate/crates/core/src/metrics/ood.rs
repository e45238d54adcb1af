use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dataset::ClipCollection;
use crate::error::{Error, Result};
use crate::sampling::SampleManifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub fraction: f64,
    pub ood: usize,
    pub labeled: usize,
    /// Sampled clips without a noise label; excluded from the fraction.
    pub unlabeled: usize,
}

pub fn ood_of_indices(collection: &ClipCollection, indices: &[usize], baseline: &HashSet<String>) -> Result<OodReport> {
    let mut ood = 0;
    let mut labeled = 0;
    for &i in indices {
        if let Some(label) = &collection.record(i).noise_label {
            labeled += 1;
            if !baseline.contains(label) {
                ood += 1;
            }
        }
    }
    if labeled == 0 {
        return Err(Error::invalid("no labeled clips in the sample"));
    }
    Ok(OodReport {
        fraction: ood as f64 / labeled as f64,
        ood,
        labeled,
        unlabeled: indices.len() - labeled,
    })
}

/// Share of labeled sampled clips whose noise category is absent from the
/// baseline label set.
pub fn ood_fraction(sample: &SampleManifest, collection: &ClipCollection, baseline: &HashSet<String>) -> Result<OodReport> {
    ood_of_indices(collection, &sample.indices(), baseline)
}

pub type CategoryCounts = Vec<(String, usize)>;

pub fn top_categories_of_indices(
    collection: &ClipCollection,
    indices: &[usize],
    baseline: &HashSet<String>,
    n: usize,
) -> Result<(CategoryCounts, CategoryCounts)> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &i in indices {
        if let Some(label) = &collection.record(i).noise_label {
            *counts.entry(label).or_default() += 1;
        }
    }
    let (mut ood, mut ind): (CategoryCounts, CategoryCounts) = counts
        .into_iter()
        .map(|(l, c)| (l.to_owned(), c))
        .partition(|(l, _)| !baseline.contains(l));
    for list in [&mut ood, &mut ind] {
        list.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        list.truncate(n);
    }
    Ok((ood, ind))
}

/// Most frequent out-of-distribution and in-distribution categories in a
/// sample: descending count, then name.
pub fn top_categories(
    sample: &SampleManifest,
    collection: &ClipCollection,
    baseline: &HashSet<String>,
    n: usize,
) -> Result<(CategoryCounts, CategoryCounts)> {
    top_categories_of_indices(collection, &sample.indices(), baseline, n)
}
