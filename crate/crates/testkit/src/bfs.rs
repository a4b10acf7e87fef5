//! Brute-force BFS over version graphs, the oracle for the traversal
//! operations. Works on plain edge lists, independent of the repository
//! types.

use std::collections::{BTreeSet, HashMap, VecDeque};

#[derive(Debug, Default, Clone)]
pub struct EdgeList {
    /// child -> parents
    pub parents: HashMap<String, Vec<String>>,
    /// parent -> children
    pub children: HashMap<String, Vec<String>>,
}

impl EdgeList {
    pub fn add_edge(&mut self, child: &str, parent: &str) {
        self.parents.entry(child.to_string()).or_default().push(parent.to_string());
        self.children.entry(parent.to_string()).or_default().push(child.to_string());
    }
}

fn walk(
    start: &str,
    hops: Option<usize>,
    next: impl Fn(&str) -> Vec<String>,
) -> BTreeSet<String> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut queue = VecDeque::new();
    queue.push_back((start.to_string(), 0usize));
    let mut visited: BTreeSet<String> = [start.to_string()].into();
    while let Some((node, d)) = queue.pop_front() {
        if hops.is_some_and(|h| d >= h) {
            continue;
        }
        for n in next(&node) {
            if visited.insert(n.clone()) {
                seen.insert(n.clone());
                queue.push_back((n, d + 1));
            }
        }
    }
    seen
}

pub fn ancestors(edges: &EdgeList, start: &str, hops: Option<usize>) -> BTreeSet<String> {
    walk(start, hops, |n| edges.parents.get(n).cloned().unwrap_or_default())
}

pub fn descendants(edges: &EdgeList, start: &str, hops: Option<usize>) -> BTreeSet<String> {
    walk(start, hops, |n| edges.children.get(n).cloned().unwrap_or_default())
}

pub fn neighborhood(edges: &EdgeList, start: &str, hops: usize) -> BTreeSet<String> {
    walk(start, Some(hops), |n| {
        let mut out = edges.parents.get(n).cloned().unwrap_or_default();
        out.extend(edges.children.get(n).cloned().unwrap_or_default());
        out
    })
}
