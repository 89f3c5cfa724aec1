use serde::{Deserialize, Serialize};

use super::{ConceptId, Instance, Layer, Ontology};

/// One concept in the rendered forest. A concept with several parents is
/// rendered once under each of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: ConceptId,
    pub label: String,
    pub layer: Layer,
    pub instances: Vec<Instance>,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    /// Depth-first visit of every node including `self`.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a TreeNode)) {
        visit(self);
        for c in &self.children {
            c.walk(visit);
        }
    }
}

pub(super) fn build_forest(o: &Ontology) -> Vec<TreeNode> {
    o.concepts()
        .filter(|c| c.parents.is_empty())
        .map(|c| build_node(o, &c.id))
        .collect()
}

fn build_node(o: &Ontology, id: &ConceptId) -> TreeNode {
    let concept = o.concept(id.as_str()).expect("tree walks declared concepts");
    TreeNode {
        id: id.clone(),
        label: concept.label.clone(),
        layer: concept.layer,
        instances: o
            .direct_instance_ids(id.as_str())
            .iter()
            .filter_map(|i| o.instance(i).cloned())
            .collect(),
        children: o
            .children_of(id.as_str())
            .iter()
            .map(|c| build_node(o, c))
            .collect(),
    }
}
