//! Version-graph traversal: ancestors, descendants, hop-bounded neighborhood.

use std::collections::{BTreeSet, HashSet, VecDeque};

use crate::repo::{RepoError, VersionRepo};

fn require<R: VersionRepo + ?Sized>(repo: &R, id: &str) -> Result<(), RepoError> {
    if repo.meta(id).is_none() {
        return Err(RepoError::UnknownVersion(id.to_string()));
    }
    Ok(())
}

fn bfs<R, F>(repo: &R, start: &str, hops: Option<usize>, edges: F) -> Result<BTreeSet<String>, RepoError>
where
    R: VersionRepo + ?Sized,
    F: Fn(&str) -> Vec<String>,
{
    require(repo, start)?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.to_string());
    queue.push_back((start.to_string(), 0usize));
    while let Some((id, d)) = queue.pop_front() {
        if let Some(cap) = hops {
            if d >= cap {
                continue;
            }
        }
        for next in edges(&id) {
            if seen.insert(next.clone()) {
                out.insert(next.clone());
                queue.push_back((next, d + 1));
            }
        }
    }
    Ok(out)
}

/// Ancestor versions reachable through parent edges, up to `hops` steps
/// (un) bounded when `None`. The start version is excluded and duplicates
/// are removed.
pub fn ancestors<R: VersionRepo + ?Sized>(
    repo: &R,
    id: &str,
    hops: Option<usize>,
) -> Result<BTreeSet<String>, RepoError> {
    bfs(repo, id, hops, |v| repo.meta(v).map(|m| m.parents).unwrap_or_default())
}

/// Mirror of [`ancestors`] over child edges.
pub fn descendants<R: VersionRepo + ?Sized>(
    repo: &R,
    id: &str,
    hops: Option<usize>,
) -> Result<BTreeSet<String>, RepoError> {
    bfs(repo, id, hops, |v| repo.meta(v).map(|m| m.children).unwrap_or_default())
}

/// Versions within undirected distance 1..=hops of `id`.
pub fn neighborhood<R: VersionRepo + ?Sized>(
    repo: &R,
    id: &str,
    hops: usize,
) -> Result<BTreeSet<String>, RepoError> {
    bfs(repo, id, Some(hops), |v| {
        repo.meta(v)
            .map(|m| m.parents.into_iter().chain(m.children).collect())
            .unwrap_or_default()
    })
}

/// Versions at undirected distance exactly `hops`. The query language uses
/// the "within" reading above; this variant is kept for callers that want
/// the literal one.
pub fn neighborhood_exact<R: VersionRepo + ?Sized>(
    repo: &R,
    id: &str,
    hops: usize,
) -> Result<BTreeSet<String>, RepoError> {
    require(repo, id)?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut frontier = vec![id.to_string()];
    seen.insert(id.to_string());
    for _ in 0..hops {
        let mut next = Vec::new();
        for v in &frontier {
            if let Some(m) = repo.meta(v) {
                for n in m.parents.into_iter().chain(m.children) {
                    if seen.insert(n.clone()) {
                        next.push(n);
                    }
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(frontier.into_iter().collect())
}

/// Topological order over parent edges, or `None` if the graph has a cycle.
pub fn topo_sort<R: VersionRepo + ?Sized>(repo: &R) -> Option<Vec<String>> {
    let ids = repo.version_ids();
    let mut indegree: std::collections::HashMap<String, usize> =
        ids.iter().map(|id| (id.clone(), 0)).collect();
    for id in &ids {
        let m = repo.meta(id)?;
        for p in &m.parents {
            if indegree.contains_key(p) {
                *indegree.get_mut(id).unwrap() += 1;
            }
        }
    }
    let mut queue: VecDeque<String> = ids
        .iter()
        .filter(|id| indegree[*id] == 0)
        .cloned()
        .collect();
    let mut out = Vec::new();
    while let Some(id) = queue.pop_front() {
        out.push(id.clone());
        if let Some(m) = repo.meta(&id) {
            for c in &m.children {
                if let Some(d) = indegree.get_mut(c) {
                    *d -= 1;
                    if *d == 0 {
                        queue.push_back(c.clone());
                    }
                }
            }
        }
    }
    if out.len() == ids.len() {
        Some(out)
    } else {
        None
    }
}
