use std::collections::HashMap;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, OutputSpace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyNode {
    pub id: usize,
    pub parent: Option<usize>,
    #[serde(default)]
    pub name: String,
}

/// Rooted tree over node ids. Internally nodes are indexed in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    nodes: Vec<TaxonomyNode>,
    index: HashMap<usize, usize>,
    parent: Vec<Option<usize>>,
    height: Vec<usize>,
    // node index followed by its ancestors up to the root
    path: Vec<Vec<usize>>,
    leaves: Vec<usize>,
    root: usize,
}

impl Taxonomy {
    pub fn new(mut nodes: Vec<TaxonomyNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Invalid("taxonomy has no nodes".into()));
        }
        nodes.sort_by_key(|n| n.id);
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(Error::Invalid(format!("duplicate taxonomy node id {}", n.id)));
            }
        }
        let q = nodes.len();
        let mut parent = Vec::with_capacity(q);
        for n in &nodes {
            parent.push(match n.parent {
                None => None,
                Some(p) => match index.get(&p) {
                    Some(&pi) if p != n.id => Some(pi),
                    Some(_) => return Err(Error::Invalid(format!("node {} is its own parent", n.id))),
                    None => return Err(Error::Invalid(format!("node {} has unknown parent {p}", n.id))),
                },
            });
        }
        let roots: Vec<usize> = (0..q).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::Invalid(format!("taxonomy needs exactly one root, found {}", roots.len())));
        }
        let root = roots[0];

        let mut path = Vec::with_capacity(q);
        for (i, node) in nodes.iter().enumerate() {
            let mut p = vec![i];
            let mut cur = i;
            while let Some(up) = parent[cur] {
                if p.len() > q {
                    return Err(Error::Invalid(format!("cycle through node {}", node.id)));
                }
                p.push(up);
                cur = up;
            }
            path.push(p);
        }

        let mut has_child = vec![false; q];
        for p in parent.iter().flatten() {
            has_child[*p] = true;
        }
        // height = longest downward edge count to a leaf; propagate leaf depths upward
        let mut height = vec![0usize; q];
        for i in (0..q).filter(|&i| !has_child[i]) {
            for (dist, &anc) in path[i].iter().enumerate() {
                height[anc] = height[anc].max(dist);
            }
        }
        let leaves = (0..q).filter(|&i| !has_child[i]).map(|i| nodes[i].id).collect();

        Ok(Taxonomy { nodes, index, parent, height, path, leaves, root })
    }

    /// Scene hierarchy with 19 nodes: a root, three branches and 15 leaf classes.
    pub fn scene_tree() -> Self {
        let branches: [(&str, &[&str]); 3] = [
            ("indoor", &["bedroom", "kitchen", "living room", "office", "store"]),
            ("outdoor natural", &["coast", "forest", "mountain", "open country"]),
            ("outdoor man-made", &["highway", "industrial", "inside city", "street", "suburb", "tall building"]),
        ];
        let mut nodes = vec![TaxonomyNode { id: 0, parent: None, name: "scene".into() }];
        for (b, (name, _)) in branches.iter().enumerate() {
            nodes.push(TaxonomyNode { id: b + 1, parent: Some(0), name: (*name).into() });
        }
        let mut next = branches.len() + 1;
        for (b, (_, leaves)) in branches.iter().enumerate() {
            for leaf in leaves.iter() {
                nodes.push(TaxonomyNode { id: next, parent: Some(b + 1), name: (*leaf).into() });
                next += 1;
            }
        }
        Taxonomy::new(nodes).expect("scene tree is well formed")
    }

    pub fn nodes(&self) -> &[TaxonomyNode] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Leaf ids in ascending order.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn root_id(&self) -> usize {
        self.nodes[self.root].id
    }

    pub fn contains(&self, id: usize) -> bool {
        self.index.contains_key(&id)
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.leaves.binary_search(&id).is_ok()
    }

    pub fn parent_of(&self, id: usize) -> Option<usize> {
        let i = *self.index.get(&id)?;
        self.parent[i].map(|p| self.nodes[p].id)
    }

    pub fn height(&self, id: usize) -> Option<usize> {
        self.index.get(&id).map(|&i| self.height[i])
    }

    /// Ids from `id` up to and including the root.
    pub fn path_to_root(&self, id: usize) -> Option<Vec<usize>> {
        let i = *self.index.get(&id)?;
        Some(self.path[i].iter().map(|&j| self.nodes[j].id).collect())
    }

    /// First common ancestor (a node counts as its own ancestor).
    pub fn common_ancestor(&self, a: usize, b: usize) -> Option<usize> {
        let pa = &self.path[*self.index.get(&a)?];
        let pb = &self.path[*self.index.get(&b)?];
        pb.iter().find(|j| pa.contains(j)).map(|&j| self.nodes[j].id)
    }

    fn path_indices(&self, id: usize) -> &[usize] {
        &self.path[self.index[&id]]
    }
}

/// Leaves of a taxonomy as outputs. `Φ(x, y)` has one length-`d` block per
/// node, set to `x` on the leaf and its ancestors. Loss is the height of the
/// first common ancestor.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxonomySpace {
    tree: Taxonomy,
    input_dim: usize,
}

impl TaxonomySpace {
    pub fn new(tree: Taxonomy, input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::contract("input dimension must be at least 1"));
        }
        if tree.leaves().len() < 2 {
            return Err(Error::contract("taxonomy needs at least two leaves"));
        }
        Ok(TaxonomySpace { tree, input_dim })
    }

    pub fn tree(&self) -> &Taxonomy {
        &self.tree
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Node-indicator view of a leaf (leaf and its ancestors marked), in id order.
    pub fn indicator(&self, y: usize) -> Vec<u8> {
        let mut v = vec![0u8; self.tree.num_nodes()];
        for &j in self.tree.path_indices(y) {
            v[j] = 1;
        }
        v
    }
}

impl OutputSpace for TaxonomySpace {
    type Output = usize;

    fn space_id(&self) -> &'static str {
        "taxonomy"
    }

    fn dim(&self) -> usize {
        self.tree.num_nodes() * self.input_dim
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        Ok(())
    }

    fn check_output(&self, _x: &[f64], y: &usize) -> Result<()> {
        if !self.tree.contains(*y) {
            return Err(Error::OutputNotInSpace(format!("unknown taxonomy node {y}")));
        }
        if !self.tree.is_leaf(*y) {
            return Err(Error::OutputNotInSpace(format!("taxonomy node {y} is not a leaf")));
        }
        Ok(())
    }

    fn add_phi(&self, x: &[f64], y: &usize, scale: f64, out: &mut [f64]) {
        let d = self.input_dim;
        for &j in self.tree.path_indices(*y) {
            for (o, v) in out[j * d..(j + 1) * d].iter_mut().zip(x) {
                *o += scale * v;
            }
        }
    }

    fn score(&self, w: &[f64], x: &[f64], y: &usize) -> f64 {
        let d = self.input_dim;
        self.tree.path_indices(*y).iter().map(|&j| dot(&w[j * d..(j + 1) * d], x)).sum()
    }

    fn delta(&self, a: &usize, b: &usize) -> f64 {
        let anc = self.tree.common_ancestor(*a, *b).expect("outputs belong to the tree");
        self.tree.height(anc).expect("ancestor is in the tree") as f64
    }

    fn candidates(&self, _x: &[f64]) -> Option<Vec<usize>> {
        Some(self.tree.leaves().to_vec())
    }

    fn random_output(&self, _x: &[f64], rng: &mut dyn RngCore) -> usize {
        let leaves = self.tree.leaves();
        leaves[rng.random_range(0..leaves.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: usize, parent: Option<usize>) -> TaxonomyNode {
        TaxonomyNode { id, parent, name: String::new() }
    }

    // root 0 → {A=1, B=2}; A → {3, 4}
    fn small_tree() -> Taxonomy {
        Taxonomy::new(vec![node(0, None), node(1, Some(0)), node(2, Some(0)), node(3, Some(1)), node(4, Some(1))])
            .unwrap()
    }

    #[test]
    fn phi_marks_path_blocks() {
        let space = TaxonomySpace::new(small_tree(), 1).unwrap();
        assert_eq!(space.phi(&[1.0], &3).unwrap(), vec![1.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(space.phi(&[2.0], &2).unwrap(), vec![2.0, 0.0, 2.0, 0.0, 0.0]);
        assert_eq!(space.indicator(4), vec![1, 1, 0, 0, 1]);
        assert!(space.phi(&[1.0], &1).is_err());
        assert!(space.phi(&[1.0], &9).is_err());
    }

    #[test]
    fn heights_and_losses() {
        let t = small_tree();
        assert_eq!(t.height(0), Some(2));
        assert_eq!(t.height(1), Some(1));
        assert_eq!(t.height(2), Some(0));
        assert_eq!(t.leaves(), &[2, 3, 4]);
        let space = TaxonomySpace::new(t, 1).unwrap();
        assert_eq!(space.delta(&3, &3), 0.0);
        assert_eq!(space.delta(&3, &4), 1.0);
        assert_eq!(space.delta(&3, &2), 2.0);
        // B is a leaf at depth 1 but the root's height is still 2
        assert_eq!(space.delta(&2, &4), 2.0);
    }

    #[test]
    fn scene_tree_shape() {
        let t = Taxonomy::scene_tree();
        assert_eq!(t.num_nodes(), 19);
        assert_eq!(t.leaves().len(), 15);
        assert_eq!(t.height(t.root_id()), Some(2));
        let space = TaxonomySpace::new(t, 2).unwrap();
        assert_eq!(space.dim(), 38);
        // 4 and 5 share "indoor", 4 and 9 meet at the root
        assert_eq!(space.delta(&4, &5), 1.0);
        assert_eq!(space.delta(&4, &9), 2.0);
    }

    #[test]
    fn rejects_malformed_trees() {
        assert!(Taxonomy::new(vec![node(0, None), node(1, None)]).is_err());
        assert!(Taxonomy::new(vec![node(0, None), node(1, Some(7))]).is_err());
        assert!(Taxonomy::new(vec![node(0, None), node(0, Some(0))]).is_err());
        // 1 ↔ 2 cycle detached from the root
        assert!(Taxonomy::new(vec![node(0, None), node(1, Some(2)), node(2, Some(1))]).is_err());
    }
}
