//! SWC ingestion: line parser, validated rooted trees, and serialization.
//!
//! A [`MorphTree`] stores its nodes in breadth-first order from the soma, so
//! internal index `0` is always the root and every parent index is smaller
//! than its children's. Downstream passes (filtration, elder rule, encoders)
//! rely on that ordering instead of re-deriving a traversal.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Identifier of a node as written in the SWC file.
pub type NodeId = u64;

#[derive(Debug, Error)]
pub enum SwcError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("file contains no data lines")]
    EmptyFile,
    #[error("no root node (parent id -1)")]
    NoRoot,
    #[error("multiple root nodes: {0:?}")]
    MultipleRoots(Vec<NodeId>),
    #[error("node {id} refers to missing parent {parent}")]
    DanglingParent { id: NodeId, parent: NodeId },
    #[error("cycle detected: {0} node(s) unreachable from the root")]
    CycleDetected(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One data line of an SWC file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwcRecord {
    pub id: NodeId,
    pub type_code: i32,
    pub position: [f64; 3],
    pub radius: f64,
    /// `None` encodes the `-1` root marker.
    pub parent: Option<NodeId>,
}

impl SwcRecord {
    pub fn new(id: NodeId, type_code: i32, position: [f64; 3], radius: f64, parent: Option<NodeId>) -> Self {
        Self { id, type_code, position, radius, parent }
    }

    pub fn distance_to(&self, other: &SwcRecord) -> f64 {
        euclidean(self.position, other.position)
    }
}

pub(crate) fn euclidean(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn parse_id(field: &str) -> Option<i64> {
    if let Ok(v) = field.parse::<i64>() {
        return Some(v);
    }
    // Some exporters write ids as floats ("12.0").
    let v = field.parse::<f64>().ok()?;
    (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Parses SWC text into records, in file order.
///
/// Lines starting with `#` (after leading whitespace) and blank lines are
/// skipped. Data lines must carry exactly seven whitespace-separated fields.
pub fn parse_swc(text: &str) -> Result<Vec<SwcRecord>, SwcError> {
    let mut records = Vec::new();
    let mut seen = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| SwcError::MalformedLine { line: line_no, reason };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(malformed(format!("expected 7 fields, found {}", fields.len())));
        }
        let id = parse_id(fields[0]).ok_or_else(|| malformed(format!("invalid id {:?}", fields[0])))?;
        if id <= 0 {
            return Err(malformed(format!("node id must be positive, got {id}")));
        }
        let type_code = parse_id(fields[1])
            .and_then(|t| i32::try_from(t).ok())
            .ok_or_else(|| malformed(format!("invalid type code {:?}", fields[1])))?;
        let mut nums = [0.0f64; 4];
        for (slot, field) in nums.iter_mut().zip(&fields[2..6]) {
            let v: f64 = field.parse().map_err(|_| malformed(format!("non-numeric field {field:?}")))?;
            if !v.is_finite() {
                return Err(malformed(format!("non-finite value {field:?}")));
            }
            *slot = v;
        }
        if nums[3] < 0.0 {
            return Err(malformed(format!("negative radius {}", nums[3])));
        }
        let parent = match parse_id(fields[6]) {
            Some(-1) => None,
            Some(p) if p > 0 => Some(p as NodeId),
            _ => return Err(malformed(format!("invalid parent id {:?}", fields[6]))),
        };
        let id = id as NodeId;
        if seen.insert(id, line_no).is_some() {
            return Err(SwcError::DuplicateId(id));
        }
        records.push(SwcRecord::new(id, type_code, [nums[0], nums[1], nums[2]], nums[3], parent));
    }
    if records.is_empty() {
        return Err(SwcError::EmptyFile);
    }
    Ok(records)
}

/// A validated rooted morphology tree.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphTree {
    /// Records in breadth-first order; index 0 is the root.
    nodes: Vec<SwcRecord>,
    parent: Vec<Option<usize>>,
    /// Child indices per node, in file order.
    children: Vec<Vec<usize>>,
    index: HashMap<NodeId, usize>,
}

/// Builds a [`MorphTree`] from records, validating root, parent links and acyclicity.
pub fn build_tree(records: &[SwcRecord]) -> Result<MorphTree, SwcError> {
    if records.is_empty() {
        return Err(SwcError::EmptyFile);
    }
    let mut by_id: HashMap<NodeId, usize> = HashMap::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if by_id.insert(r.id, i).is_some() {
            return Err(SwcError::DuplicateId(r.id));
        }
    }
    let roots: Vec<NodeId> = records.iter().filter(|r| r.parent.is_none()).map(|r| r.id).collect();
    match roots.len() {
        0 => return Err(SwcError::NoRoot),
        1 => {}
        _ => return Err(SwcError::MultipleRoots(roots)),
    }
    // Children in file order, keyed by record position.
    let mut file_children: Vec<Vec<usize>> = vec![Vec::new(); records.len()];
    for (i, r) in records.iter().enumerate() {
        if let Some(p) = r.parent {
            let &pi = by_id.get(&p).ok_or(SwcError::DanglingParent { id: r.id, parent: p })?;
            file_children[pi].push(i);
        }
    }
    let root_pos = by_id[&roots[0]];
    let mut order = Vec::with_capacity(records.len());
    let mut queue = VecDeque::from([root_pos]);
    while let Some(i) = queue.pop_front() {
        order.push(i);
        queue.extend(file_children[i].iter().copied());
    }
    if order.len() != records.len() {
        return Err(SwcError::CycleDetected(records.len() - order.len()));
    }
    let mut new_index = vec![0usize; records.len()];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    let nodes: Vec<SwcRecord> = order.iter().map(|&old| records[old]).collect();
    let children: Vec<Vec<usize>> = order.iter().map(|&old| file_children[old].iter().map(|&c| new_index[c]).collect()).collect();
    let mut parent = vec![None; nodes.len()];
    for (p, kids) in children.iter().enumerate() {
        for &c in kids {
            parent[c] = Some(p);
        }
    }
    let index = nodes.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
    Ok(MorphTree { nodes, parent, children, index })
}

impl MorphTree {
    pub fn from_swc_str(text: &str) -> Result<Self, SwcError> {
        build_tree(&parse_swc(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, SwcError> {
        Self::from_swc_str(&std::fs::read_to_string(path)?)
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn record(&self, idx: usize) -> &SwcRecord {
        &self.nodes[idx]
    }

    pub fn records(&self) -> &[SwcRecord] {
        &self.nodes
    }

    pub fn parent(&self, idx: usize) -> Option<usize> {
        self.parent[idx]
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn is_leaf(&self, idx: usize) -> bool {
        self.children[idx].is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.is_leaf(i))
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Length of the edge from `idx` to its parent (0 for the root).
    pub fn edge_length(&self, idx: usize) -> f64 {
        self.parent[idx].map_or(0.0, |p| self.nodes[idx].distance_to(&self.nodes[p]))
    }

    /// True if `ancestor` lies on the path from `idx` to the root (inclusive).
    pub fn is_ancestor(&self, ancestor: usize, idx: usize) -> bool {
        let mut cur = Some(idx);
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            // Parents always have smaller indices.
            if c < ancestor {
                return false;
            }
            cur = self.parent[c];
        }
        false
    }

    /// Returns a copy with every coordinate passed through `f`.
    pub fn map_positions(&self, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = self.clone();
        for r in &mut out.nodes {
            r.position = f(r.position);
        }
        out
    }

    /// Serializes as SWC in breadth-first order. Floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_swc_string(&self) -> String {
        let mut out = String::with_capacity(self.len() * 48);
        out.push_str("# id type x y z radius parent\n");
        for r in &self.nodes {
            let parent = r.parent.map_or(-1, |p| p as i64);
            let [x, y, z] = r.position;
            let _ = writeln!(out, "{} {} {} {} {} {} {}", r.id, r.type_code, x, y, z, r.radius, parent);
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_swc_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_root_line() {
        let recs = parse_swc("1 1 0 0 0 1.0 -1").unwrap();
        assert_eq!(recs, vec![SwcRecord::new(1, 1, [0.0, 0.0, 0.0], 1.0, None)]);
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let text = "#comment\n\n  # indented comment\n1 1 0 0 0 1 -1\r\n2 3 1 0 0 0.5 1\r\n";
        let recs = parse_swc(text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].parent, Some(1));
        assert_eq!(recs[1].type_code, 3);
    }

    #[test]
    fn field_count_violation() {
        match parse_swc("1 1 0 0") {
            Err(SwcError::MalformedLine { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_reports_line() {
        match parse_swc("# header\n1 1 0 0 0 1 -1\n2 1 x 0 0 1 1\n") {
            Err(SwcError::MalformedLine { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_empty() {
        assert!(matches!(parse_swc("1 1 0 0 0 1 -1\n1 1 0 0 0 1 -1"), Err(SwcError::DuplicateId(1))));
        assert!(matches!(parse_swc("# nothing here\n\n"), Err(SwcError::EmptyFile)));
    }

    #[test]
    fn float_formatted_ids_accepted() {
        let recs = parse_swc("1.0 1 0 0 0 1 -1.0\n2 1 1 0 0 1 1.0").unwrap();
        assert_eq!(recs[0].parent, None);
        assert_eq!(recs[1].parent, Some(1));
    }

    #[test]
    fn two_leaf_star() {
        let tree = MorphTree::from_swc_str("1 1 0 0 0 1 -1\n2 3 1 0 0 1 1\n3 3 0 1 0 1 1").unwrap();
        assert_eq!(tree.record(tree.root()).id, 1);
        let kids: Vec<NodeId> = tree.children(0).iter().map(|&c| tree.record(c).id).collect();
        assert_eq!(kids, vec![2, 3]);
        assert_eq!(tree.leaf_count(), 2);
    }

    #[test]
    fn structural_errors() {
        let cyc = [
            SwcRecord::new(1, 1, [0.0; 3], 1.0, None),
            SwcRecord::new(2, 1, [0.0; 3], 1.0, Some(3)),
            SwcRecord::new(3, 1, [0.0; 3], 1.0, Some(2)),
        ];
        assert!(matches!(build_tree(&cyc), Err(SwcError::CycleDetected(2))));
        let two_roots = [SwcRecord::new(1, 1, [0.0; 3], 1.0, None), SwcRecord::new(2, 1, [0.0; 3], 1.0, None)];
        assert!(matches!(build_tree(&two_roots), Err(SwcError::MultipleRoots(_))));
        let dangling = [SwcRecord::new(1, 1, [0.0; 3], 1.0, None), SwcRecord::new(2, 1, [0.0; 3], 1.0, Some(9))];
        assert!(matches!(build_tree(&dangling), Err(SwcError::DanglingParent { id: 2, parent: 9 })));
        let rootless = [SwcRecord::new(1, 1, [0.0; 3], 1.0, Some(1))];
        assert!(matches!(build_tree(&rootless), Err(SwcError::NoRoot)));
    }

    #[test]
    fn non_contiguous_unsorted_ids() {
        let tree = MorphTree::from_swc_str("40 3 2 0 0 1 7\n7 1 0 0 0 1 -1\n12 3 1 0 0 1 7").unwrap();
        assert_eq!(tree.record(0).id, 7);
        assert_eq!(tree.index_of(40), Some(1));
        assert_eq!(tree.index_of(12), Some(2));
        assert!(tree.is_ancestor(0, 2));
        assert!(!tree.is_ancestor(1, 2));
    }

    #[test]
    fn serialize_round_trip() {
        let text = "1 1 0.1 0.2 0.3 1.25 -1\n5 3 1e-7 -3.3333333333333335 7 0.5 1\n2 2 4 5 6 0.75 1\n9 3 1 1 1 0 5\n";
        let tree = MorphTree::from_swc_str(text).unwrap();
        let again = MorphTree::from_swc_str(&tree.to_swc_string()).unwrap();
        assert_eq!(tree, again);
    }
}
