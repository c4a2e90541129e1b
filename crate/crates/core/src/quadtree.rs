//! Quadtree sparse matrices.
//!
//! A matrix of logical dimension `n` is stored as a tree over a padded square
//! of side `leaf_size * 2^depth >= n`. Each node is either identically zero,
//! a dense `leaf_size x leaf_size` block, or an inner node with four
//! quadrants. Quadrants are stored in row-major order:
//!
//! ```text
//! [ q0 q1 ]     q0 = (row half 0, col half 0), q1 = (0, 1)
//! [ q2 q3 ]     q2 = (1, 0),                   q3 = (1, 1)
//! ```
//!
//! Every non-zero node caches the Frobenius norm of its subtree. Inner nodes
//! whose four children are zero and leaves whose entries are all zero are
//! collapsed to [`Node::Zero`] on construction, so a zero norm is only ever
//! seen on zero nodes (up to underflow). Subtrees are reference counted and
//! shared between matrices; matrices are immutable.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_LEAF_SIZE: usize = 32;

/// One node of the quadtree.
#[derive(Clone, Default)]
pub enum Node {
    #[default]
    Zero,
    Leaf(Arc<Leaf>),
    Inner(Arc<Inner>),
}

/// Dense leaf block, column-major.
pub struct Leaf {
    norm: f64,
    values: Box<[f64]>,
}

pub struct Inner {
    norm: f64,
    children: [Node; 4],
}

impl Leaf {
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm
    }
}

impl Inner {
    #[inline]
    pub fn children(&self) -> &[Node; 4] {
        &self.children
    }
}

#[inline]
pub(crate) fn leaf_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl Node {
    /// Builds a leaf from column-major values, collapsing an all-zero block.
    pub(crate) fn leaf(values: Box<[f64]>) -> Node {
        if values.iter().all(|&v| v == 0.0) {
            return Node::Zero;
        }
        let norm = leaf_norm(&values);
        Node::Leaf(Arc::new(Leaf { norm, values }))
    }

    /// Builds an inner node, collapsing four zero children.
    pub(crate) fn inner(children: [Node; 4]) -> Node {
        if children.iter().all(Node::is_zero) {
            return Node::Zero;
        }
        let norm = children
            .iter()
            .map(|c| {
                let n = c.norm();
                n * n
            })
            .sum::<f64>()
            .sqrt();
        Node::Inner(Arc::new(Inner { norm, children }))
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        matches!(self, Node::Zero)
    }

    /// Cached Frobenius norm of the subtree.
    #[inline]
    pub fn norm(&self) -> f64 {
        match self {
            Node::Zero => 0.0,
            Node::Leaf(l) => l.norm,
            Node::Inner(i) => i.norm,
        }
    }

    /// Quadrant `q` of an inner node; zero nodes have zero quadrants.
    ///
    /// Panics when called on a leaf.
    #[inline]
    pub(crate) fn child(&self, q: usize) -> &Node {
        const ZERO: &Node = &Node::Zero;
        match self {
            Node::Zero => ZERO,
            Node::Inner(i) => &i.children[q],
            Node::Leaf(_) => panic!("leaf node has no quadrants"),
        }
    }

    fn same_allocation(&self, other: &Node) -> bool {
        match (self, other) {
            (Node::Zero, Node::Zero) => true,
            (Node::Leaf(a), Node::Leaf(b)) => Arc::ptr_eq(a, b),
            (Node::Inner(a), Node::Inner(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }

    fn bitwise_eq(&self, other: &Node) -> bool {
        match (self, other) {
            (Node::Zero, Node::Zero) => true,
            (Node::Leaf(a), Node::Leaf(b)) => {
                a.norm.to_bits() == b.norm.to_bits()
                    && a.values.len() == b.values.len()
                    && a.values
                        .iter()
                        .zip(b.values.iter())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (Node::Inner(a), Node::Inner(b)) => {
                a.norm.to_bits() == b.norm.to_bits()
                    && a.children
                        .iter()
                        .zip(b.children.iter())
                        .all(|(x, y)| x.bitwise_eq(y))
            }
            _ => false,
        }
    }
}

pub(crate) fn add_nodes(a: &Node, b: &Node) -> Node {
    match (a, b) {
        (Node::Zero, _) => b.clone(),
        (_, Node::Zero) => a.clone(),
        (Node::Leaf(x), Node::Leaf(y)) => {
            let values = x
                .values
                .iter()
                .zip(y.values.iter())
                .map(|(p, q)| p + q)
                .collect();
            Node::leaf(values)
        }
        (Node::Inner(x), Node::Inner(y)) => Node::inner([
            add_nodes(&x.children[0], &y.children[0]),
            add_nodes(&x.children[1], &y.children[1]),
            add_nodes(&x.children[2], &y.children[2]),
            add_nodes(&x.children[3], &y.children[3]),
        ]),
        _ => unreachable!("leaf and inner node at the same level"),
    }
}

/// Applies `f` to every stored entry; `f(0)` must be `0`.
fn map_node(node: &Node, f: &impl Fn(f64) -> f64) -> Node {
    match node {
        Node::Zero => Node::Zero,
        Node::Leaf(l) => Node::leaf(l.values.iter().map(|&v| f(v)).collect()),
        Node::Inner(i) => Node::inner(std::array::from_fn(|q| map_node(&i.children[q], f))),
    }
}

/// Position of a leaf block, in units of `leaf_size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockIndex {
    pub row: usize,
    pub col: usize,
}

/// A non-zero leaf and its cached norm, as reported by [`QuadTreeMatrix::leaf_blocks`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafBlock {
    pub index: BlockIndex,
    pub norm: f64,
}

/// Identifies a node by its level (0 = leaves) and position at that level.
pub type NodeKey = (u32, usize, usize);

/// Sparse square matrix stored as a quadtree with cached subtree norms.
#[derive(Clone)]
pub struct QuadTreeMatrix {
    dimension: usize,
    leaf_size: usize,
    depth: u32,
    root: Node,
}

impl fmt::Debug for QuadTreeMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuadTreeMatrix")
            .field("dimension", &self.dimension)
            .field("leaf_size", &self.leaf_size)
            .field("depth", &self.depth)
            .field("norm", &self.frobenius_norm())
            .field("nnz_blocks", &self.nnz_blocks())
            .finish()
    }
}

fn depth_for(dimension: usize, leaf_size: usize) -> u32 {
    let mut depth = 0;
    let mut side = leaf_size;
    while side < dimension {
        side *= 2;
        depth += 1;
    }
    depth
}

fn check_shape(dimension: usize, leaf_size: usize) -> Result<()> {
    if dimension == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if leaf_size == 0 {
        return Err(Error::InvalidArgument("leaf size must be positive".into()));
    }
    Ok(())
}

impl QuadTreeMatrix {
    /// The zero matrix.
    pub fn zeros(dimension: usize, leaf_size: usize) -> Result<Self> {
        check_shape(dimension, leaf_size)?;
        Ok(QuadTreeMatrix {
            dimension,
            leaf_size,
            depth: depth_for(dimension, leaf_size),
            root: Node::Zero,
        })
    }

    pub fn identity(dimension: usize, leaf_size: usize) -> Result<Self> {
        Self::from_diagonal(&vec![1.0; dimension], leaf_size)
    }

    pub fn from_diagonal(diagonal: &[f64], leaf_size: usize) -> Result<Self> {
        let entries: Vec<_> = diagonal
            .iter()
            .enumerate()
            .map(|(i, &d)| (i, i, d))
            .collect();
        Self::from_coordinates(&entries, diagonal.len(), leaf_size)
    }

    /// Builds a matrix from `(row, col, value)` triples. Explicit zeros are
    /// accepted and dropped; repeated coordinates are an error.
    pub fn from_coordinates(
        entries: &[(usize, usize, f64)],
        dimension: usize,
        leaf_size: usize,
    ) -> Result<Self> {
        check_shape(dimension, leaf_size)?;
        for &(row, col, _) in entries {
            if row >= dimension || col >= dimension {
                return Err(Error::IndexOutOfRange {
                    row,
                    col,
                    dimension,
                });
            }
        }
        let mut keys: Vec<(usize, usize)> = entries.iter().map(|&(r, c, _)| (r, c)).collect();
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEntry {
                row: w[0].0,
                col: w[0].1,
            });
        }

        let depth = depth_for(dimension, leaf_size);
        let nonzero: Vec<_> = entries.iter().copied().filter(|e| e.2 != 0.0).collect();
        let root = build_from_entries(nonzero, depth, leaf_size);
        Ok(QuadTreeMatrix {
            dimension,
            leaf_size,
            depth,
            root,
        })
    }

    pub fn from_dense(dense: &DenseMatrix, leaf_size: usize) -> Result<Self> {
        let dimension = dense.dimension();
        check_shape(dimension, leaf_size)?;
        let depth = depth_for(dimension, leaf_size);
        let root = build_from_dense(dense, depth, 0, 0, leaf_size);
        Ok(QuadTreeMatrix {
            dimension,
            leaf_size,
            depth,
            root,
        })
    }

    pub(crate) fn with_root(&self, root: Node) -> Self {
        QuadTreeMatrix {
            dimension: self.dimension,
            leaf_size: self.leaf_size,
            depth: self.depth,
            root,
        }
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    #[inline]
    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    /// Number of inner levels above the leaves.
    #[inline]
    pub fn depth(&self) -> u32 {
        self.depth
    }

    #[inline]
    pub fn padded_dimension(&self) -> usize {
        self.leaf_size << self.depth
    }

    #[inline]
    pub fn root(&self) -> &Node {
        &self.root
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.root.is_zero()
    }

    /// Cached Frobenius norm of the whole matrix.
    #[inline]
    pub fn frobenius_norm(&self) -> f64 {
        self.root.norm()
    }

    pub(crate) fn check_conformable(&self, other: &QuadTreeMatrix) -> Result<()> {
        if self.dimension != other.dimension || self.leaf_size != other.leaf_size {
            return Err(Error::mismatch(
                format!("n={} leaf={}", self.dimension, self.leaf_size),
                format!("n={} leaf={}", other.dimension, other.leaf_size),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &QuadTreeMatrix) -> Result<Self> {
        self.check_conformable(other)?;
        Ok(self.with_root(add_nodes(&self.root, &other.root)))
    }

    /// `self - other`, computed as `self + (-1) * other`.
    pub fn sub(&self, other: &QuadTreeMatrix) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        if alpha == 0.0 {
            return self.with_root(Node::Zero);
        }
        self.with_root(map_node(&self.root, &|v| alpha * v))
    }

    /// Entrywise division by `divisor`.
    pub fn divide(&self, divisor: f64) -> Self {
        self.with_root(map_node(&self.root, &|v| v / divisor))
    }

    pub fn trace(&self) -> f64 {
        fn diag(node: &Node, ls: usize) -> f64 {
            match node {
                Node::Zero => 0.0,
                Node::Leaf(l) => (0..ls).map(|i| l.values[i * ls + i]).sum(),
                Node::Inner(i) => diag(&i.children[0], ls) + diag(&i.children[3], ls),
            }
        }
        diag(&self.root, self.leaf_size)
    }

    /// Count of stored entries that are not exactly zero.
    pub fn nnz(&self) -> usize {
        fn count(node: &Node) -> usize {
            match node {
                Node::Zero => 0,
                Node::Leaf(l) => l.values.iter().filter(|&&v| v != 0.0).count(),
                Node::Inner(i) => i.children.iter().map(count).sum(),
            }
        }
        count(&self.root)
    }

    /// Count of non-zero leaf blocks.
    pub fn nnz_blocks(&self) -> usize {
        fn count(node: &Node) -> usize {
            match node {
                Node::Zero => 0,
                Node::Leaf(_) => 1,
                Node::Inner(i) => i.children.iter().map(count).sum(),
            }
        }
        count(&self.root)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.dimension);
        self.for_each_leaf(|index, leaf| {
            let ls = self.leaf_size;
            let (r0, c0) = (index.row * ls, index.col * ls);
            for c in 0..ls {
                for r in 0..ls {
                    let v = leaf.values[c * ls + r];
                    if v != 0.0 {
                        // Padding entries are zero, so these are in range.
                        out[(r0 + r, c0 + c)] = v;
                    }
                }
            }
        });
        out
    }

    /// Non-zero entries as `(row, col, value)` in block order.
    pub fn to_coordinates(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        let ls = self.leaf_size;
        self.for_each_leaf(|index, leaf| {
            for c in 0..ls {
                for r in 0..ls {
                    let v = leaf.values[c * ls + r];
                    if v != 0.0 {
                        out.push((index.row * ls + r, index.col * ls + c, v));
                    }
                }
            }
        });
        out
    }

    /// Visits every non-zero leaf in quadrant (Z-) order.
    pub fn for_each_leaf(&self, mut f: impl FnMut(BlockIndex, &Leaf)) {
        fn walk(node: &Node, row: usize, col: usize, f: &mut dyn FnMut(BlockIndex, &Leaf)) {
            match node {
                Node::Zero => {}
                Node::Leaf(l) => f(BlockIndex { row, col }, l),
                Node::Inner(i) => {
                    for (q, child) in i.children.iter().enumerate() {
                        walk(child, 2 * row + q / 2, 2 * col + q % 2, f);
                    }
                }
            }
        }
        walk(&self.root, 0, 0, &mut f);
    }

    pub fn leaf_blocks(&self) -> Vec<LeafBlock> {
        let mut out = Vec::new();
        self.for_each_leaf(|index, leaf| {
            out.push(LeafBlock {
                index,
                norm: leaf.norm,
            })
        });
        out
    }

    /// Copy of this matrix with the given leaf blocks replaced by zero.
    pub fn without_blocks(&self, removed: &HashSet<BlockIndex>) -> Self {
        fn prune(node: &Node, row: usize, col: usize, removed: &HashSet<BlockIndex>) -> Node {
            match node {
                Node::Zero => Node::Zero,
                Node::Leaf(_) => {
                    if removed.contains(&BlockIndex { row, col }) {
                        Node::Zero
                    } else {
                        node.clone()
                    }
                }
                Node::Inner(i) => {
                    let children: [Node; 4] = std::array::from_fn(|q| {
                        prune(&i.children[q], 2 * row + q / 2, 2 * col + q % 2, removed)
                    });
                    if children
                        .iter()
                        .zip(i.children.iter())
                        .all(|(a, b)| a.same_allocation(b))
                    {
                        node.clone()
                    } else {
                        Node::inner(children)
                    }
                }
            }
        }
        if removed.is_empty() {
            return self.clone();
        }
        self.with_root(prune(&self.root, 0, 0, removed))
    }

    /// Keys of every non-zero node; used to compare sparsity structure.
    pub fn structure(&self) -> BTreeSet<NodeKey> {
        fn walk(node: &Node, level: u32, row: usize, col: usize, out: &mut BTreeSet<NodeKey>) {
            if node.is_zero() {
                return;
            }
            out.insert((level, row, col));
            if let Node::Inner(i) = node {
                for (q, child) in i.children.iter().enumerate() {
                    walk(child, level - 1, 2 * row + q / 2, 2 * col + q % 2, out);
                }
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.root, self.depth, 0, 0, &mut out);
        out
    }

    /// Bitwise equality of structure, values and cached norms.
    pub fn bitwise_eq(&self, other: &QuadTreeMatrix) -> bool {
        self.dimension == other.dimension
            && self.leaf_size == other.leaf_size
            && self.root.bitwise_eq(&other.root)
    }

    /// True when `other` shares this matrix's root allocation.
    pub fn shares_root_with(&self, other: &QuadTreeMatrix) -> bool {
        self.root.same_allocation(&other.root)
    }

    /// Checks the structural invariants: leaves only at level 0, no collapsible
    /// nodes, zero padding, and cached norms within `rel_tol` of a fresh
    /// recomputation from the entries.
    pub fn check_invariants(&self, rel_tol: f64) -> std::result::Result<(), String> {
        fn check(
            m: &QuadTreeMatrix,
            node: &Node,
            level: u32,
            row: usize,
            col: usize,
            rel_tol: f64,
        ) -> std::result::Result<f64, String> {
            let ls = m.leaf_size;
            let (sumsq, cached) = match node {
                Node::Zero => return Ok(0.0),
                Node::Leaf(l) => {
                    if level != 0 {
                        return Err(format!("leaf at level {level}"));
                    }
                    if l.values.len() != ls * ls {
                        return Err("leaf has wrong size".into());
                    }
                    if l.values.iter().all(|&v| v == 0.0) {
                        return Err(format!("all-zero leaf at ({row}, {col})"));
                    }
                    for c in 0..ls {
                        for r in 0..ls {
                            let (gr, gc) = (row * ls + r, col * ls + c);
                            let v = l.values[c * ls + r];
                            if (gr >= m.dimension || gc >= m.dimension) && v != 0.0 {
                                return Err(format!("non-zero padding entry at ({gr}, {gc})"));
                            }
                        }
                    }
                    (l.values.iter().map(|v| v * v).sum::<f64>(), l.norm)
                }
                Node::Inner(i) => {
                    if level == 0 {
                        return Err("inner node at leaf level".into());
                    }
                    if i.children.iter().all(Node::is_zero) {
                        return Err(format!(
                            "inner node with four zero children at level {level}"
                        ));
                    }
                    let mut s = 0.0;
                    for (q, child) in i.children.iter().enumerate() {
                        s += check(
                            m,
                            child,
                            level - 1,
                            2 * row + q / 2,
                            2 * col + q % 2,
                            rel_tol,
                        )?;
                    }
                    (s, i.norm)
                }
            };
            let fresh = sumsq.sqrt();
            if (cached - fresh).abs() > rel_tol * fresh.max(f64::MIN_POSITIVE) {
                return Err(format!(
                    "cached norm {cached:e} differs from recomputed {fresh:e} at level {level} ({row}, {col})"
                ));
            }
            Ok(sumsq)
        }
        check(self, &self.root, self.depth, 0, 0, rel_tol).map(|_| ())
    }
}

fn build_from_entries(entries: Vec<(usize, usize, f64)>, levels: u32, leaf_size: usize) -> Node {
    if entries.is_empty() {
        return Node::Zero;
    }
    if levels == 0 {
        let mut values = vec![0.0; leaf_size * leaf_size].into_boxed_slice();
        for (r, c, v) in entries {
            values[c * leaf_size + r] = v;
        }
        return Node::leaf(values);
    }
    let half = leaf_size << (levels - 1);
    let mut quads: [Vec<(usize, usize, f64)>; 4] = Default::default();
    for (r, c, v) in entries {
        let q = 2 * usize::from(r >= half) + usize::from(c >= half);
        quads[q].push((r % half, c % half, v));
    }
    let [q0, q1, q2, q3] = quads;
    Node::inner([
        build_from_entries(q0, levels - 1, leaf_size),
        build_from_entries(q1, levels - 1, leaf_size),
        build_from_entries(q2, levels - 1, leaf_size),
        build_from_entries(q3, levels - 1, leaf_size),
    ])
}

fn build_from_dense(
    dense: &DenseMatrix,
    levels: u32,
    row0: usize,
    col0: usize,
    leaf_size: usize,
) -> Node {
    let n = dense.dimension();
    if row0 >= n || col0 >= n {
        return Node::Zero;
    }
    if levels == 0 {
        let mut values = vec![0.0; leaf_size * leaf_size].into_boxed_slice();
        for c in 0..leaf_size.min(n - col0) {
            for r in 0..leaf_size.min(n - row0) {
                values[c * leaf_size + r] = dense[(row0 + r, col0 + c)];
            }
        }
        return Node::leaf(values);
    }
    let half = leaf_size << (levels - 1);
    Node::inner(std::array::from_fn(|q| {
        build_from_dense(
            dense,
            levels - 1,
            row0 + (q / 2) * half,
            col0 + (q % 2) * half,
            leaf_size,
        )
    }))
}
