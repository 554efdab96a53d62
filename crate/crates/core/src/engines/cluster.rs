// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

use hashbrown::HashMap;
use rustc_hash::FxBuildHasher;

use super::VariantRef;
use crate::runtime::AbstractChange;

/// Variants that make the same change from one state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChangeCluster<'t> {
    pub change: AbstractChange,
    /// In input order.
    pub members: Vec<VariantRef<'t>>,
}

impl ChangeCluster<'_> {
    pub fn has_original(&self) -> bool {
        self.members.contains(&VariantRef::Original)
    }
}

/// Groups `(variant, change)` pairs by change. Clusters come out in order of
/// their first member, so with the original listed first its cluster leads.
pub fn cluster_changes<'t>(
    tried: impl IntoIterator<Item = (VariantRef<'t>, AbstractChange)>,
) -> Vec<ChangeCluster<'t>> {
    let mut clusters: Vec<ChangeCluster<'t>> = Vec::new();
    let mut index: HashMap<AbstractChange, usize, FxBuildHasher> = HashMap::default();
    for (r, change) in tried {
        match index.get(&change) {
            Some(&i) => clusters[i].members.push(r),
            None => {
                index.insert(change.clone(), clusters.len());
                clusters.push(ChangeCluster {
                    change,
                    members: alloc::vec![r],
                });
            }
        }
    }
    clusters
}
