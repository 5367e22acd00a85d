//! Dependency trees and the substructures a relation candidate is read from.
//!
//! Three structures are supported for a target pair `(p1, p2)`:
//!
//! * [`StructureKind::ShortestPath`]: the tree path `p1 … lca … p2`.
//! * [`StructureKind::SubTree`]: every descendant of the lowest common
//!   ancestor.
//! * [`StructureKind::FullTree`]: the whole sentence.
//!
//! Nodes on the shortest path are typed [`NodeType::OnPath`], all others
//! [`NodeType::OffPath`]; the tree LSTM selects weights by this type.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeError {
    Empty,
    HeadOutOfRange { token: usize, head: usize },
    SelfLoop { token: usize },
    NoRoot,
    MultipleRoots { first: usize, second: usize },
    Cycle { token: usize },
    NodeOutOfRange { node: usize, len: usize },
}

impl fmt::Display for TreeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeError::Empty => f.write_str("empty tree"),
            TreeError::HeadOutOfRange { token, head } => {
                write!(f, "token {} has head {} outside the sentence", token + 1, head + 1)
            }
            TreeError::SelfLoop { token } => write!(f, "token {} is its own head (cycle)", token + 1),
            TreeError::NoRoot => f.write_str("no token has head 0"),
            TreeError::MultipleRoots { first, second } => {
                write!(f, "multiple roots: tokens {} and {}", first + 1, second + 1)
            }
            TreeError::Cycle { token } => write!(f, "cycle through token {}", token + 1),
            TreeError::NodeOutOfRange { node, len } => {
                write!(f, "node {} outside tree of {len} tokens", node + 1)
            }
        }
    }
}

impl core::error::Error for TreeError {}

/// A validated single-rooted, acyclic dependency tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepTree {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    root: usize,
}

/// Checks the head array (`None` marks the root) and builds the tree.
pub fn validate_tree(heads: &[Option<usize>]) -> Result<DepTree, TreeError> {
    let n = heads.len();
    if n == 0 {
        return Err(TreeError::Empty);
    }
    let mut root = None;
    let mut children = vec![Vec::new(); n];
    for (t, head) in heads.iter().enumerate() {
        match *head {
            None => match root {
                None => root = Some(t),
                Some(first) => return Err(TreeError::MultipleRoots { first, second: t }),
            },
            Some(h) if h >= n => return Err(TreeError::HeadOutOfRange { token: t, head: h }),
            Some(h) if h == t => return Err(TreeError::SelfLoop { token: t }),
            Some(h) => children[h].push(t),
        }
    }
    let root = root.ok_or(TreeError::NoRoot)?;

    // Breadth-first from the root; anything unreached sits on a cycle.
    let mut depth = vec![usize::MAX; n];
    depth[root] = 0;
    let mut queue = vec![root];
    let mut i = 0;
    while i < queue.len() {
        let node = queue[i];
        i += 1;
        for &c in &children[node] {
            depth[c] = depth[node] + 1;
            queue.push(c);
        }
    }
    if let Some(token) = depth.iter().position(|&d| d == usize::MAX) {
        return Err(TreeError::Cycle { token });
    }
    Ok(DepTree { parent: heads.to_vec(), children, depth, root })
}

impl DepTree {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    /// Children in ascending token order.
    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    fn check(&self, node: usize) -> Result<(), TreeError> {
        if node >= self.len() {
            Err(TreeError::NodeOutOfRange { node, len: self.len() })
        } else {
            Ok(())
        }
    }

    /// Deepest node that is an ancestor of (or equal to) both `a` and `b`.
    ///
    /// Panics if either index is outside the tree.
    pub fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root has a parent");
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root has a parent");
        }
        while a != b {
            a = self.parent[a].expect("non-root has a parent");
            b = self.parent[b].expect("non-root has a parent");
        }
        a
    }

    /// Nodes from `a` up to the lowest common ancestor and down to `b`,
    /// both ends included.
    pub fn shortest_path(&self, a: usize, b: usize) -> Vec<usize> {
        let top = self.lca(a, b);
        let mut path = Vec::new();
        let mut x = a;
        while x != top {
            path.push(x);
            x = self.parent[x].expect("below lca");
        }
        path.push(top);
        let mut down = Vec::new();
        let mut y = b;
        while y != top {
            down.push(y);
            y = self.parent[y].expect("below lca");
        }
        path.extend(down.into_iter().rev());
        path
    }

    /// `node` and everything below it, in ascending token order.
    pub fn descendants(&self, node: usize) -> Vec<usize> {
        let mut out = vec![node];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.children[out[i]]);
            i += 1;
        }
        out.sort_unstable();
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StructureKind {
    #[default]
    ShortestPath,
    SubTree,
    FullTree,
}

impl StructureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StructureKind::ShortestPath => "sptree",
            StructureKind::SubTree => "subtree",
            StructureKind::FullTree => "fulltree",
        }
    }
}

impl FromStr for StructureKind {
    type Err = alloc::string::String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sptree" => Ok(StructureKind::ShortestPath),
            "subtree" => Ok(StructureKind::SubTree),
            "fulltree" => Ok(StructureKind::FullTree),
            other => Err(alloc::format!(
                "invalid structure kind {other:?} (expected sptree, subtree or fulltree)"
            )),
        }
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeType {
    OnPath = 0,
    OffPath = 1,
}

impl NodeType {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// The part of a dependency tree a relation candidate is encoded over.
///
/// `root` is the top of the structure (the lowest common ancestor, or the
/// sentence root for [`StructureKind::FullTree`]); `anchor` is always the
/// lowest common ancestor of the targets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathStructure {
    pub kind: StructureKind,
    pub root: usize,
    pub anchor: usize,
    pub targets: (usize, usize),
    nodes: Vec<usize>,
    member: Vec<bool>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    node_type: Vec<NodeType>,
}

/// Extracts the structure of `kind` for the target pair `(p1, p2)`.
pub fn extract_structure(
    tree: &DepTree,
    p1: usize,
    p2: usize,
    kind: StructureKind,
) -> Result<PathStructure, TreeError> {
    tree.check(p1)?;
    tree.check(p2)?;
    let n = tree.len();
    let anchor = tree.lca(p1, p2);
    let path = tree.shortest_path(p1, p2);
    let mut on_path = vec![false; n];
    for &t in &path {
        on_path[t] = true;
    }
    let (mut nodes, root) = match kind {
        StructureKind::ShortestPath => (path.clone(), anchor),
        StructureKind::SubTree => (tree.descendants(anchor), anchor),
        StructureKind::FullTree => ((0..n).collect(), tree.root()),
    };
    nodes.sort_unstable();
    let mut member = vec![false; n];
    for &t in &nodes {
        member[t] = true;
    }
    let mut parent = vec![None; n];
    let mut children = vec![Vec::new(); n];
    for &t in &nodes {
        if t == root {
            continue;
        }
        let p = tree.parent(t).expect("only the structure root lacks a parent");
        debug_assert!(member[p]);
        parent[t] = Some(p);
    }
    // ascending order because `nodes` is sorted
    for &t in &nodes {
        if let Some(p) = parent[t] {
            children[p].push(t);
        }
    }
    let node_type = (0..n)
        .map(|t| if on_path[t] { NodeType::OnPath } else { NodeType::OffPath })
        .collect();
    Ok(PathStructure { kind, root, anchor, targets: (p1, p2), nodes, member, parent, children, node_type })
}

impl PathStructure {
    /// Member tokens in ascending order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn contains(&self, token: usize) -> bool {
        self.member.get(token).copied().unwrap_or(false)
    }

    pub fn parent(&self, token: usize) -> Option<usize> {
        self.parent[token]
    }

    pub fn children(&self, token: usize) -> &[usize] {
        &self.children[token]
    }

    pub fn node_type(&self, token: usize) -> NodeType {
        self.node_type[token]
    }

    /// Nodes with every child before its parent.
    pub fn post_order(&self) -> Vec<usize> {
        let mut order = self.pre_order();
        order.reverse();
        order
    }

    /// Nodes with every parent before its children.
    pub fn pre_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(t) = stack.pop() {
            order.push(t);
            stack.extend(self.children[t].iter().rev());
        }
        order
    }
}
