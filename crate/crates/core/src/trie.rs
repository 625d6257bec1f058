//! Binary prefix trie used for containment lookups (ROA coverage, anycast
//! and special-purpose tables).

use crate::prefix::{Family, IpPrefix};

#[derive(Debug, Clone)]
struct Node<T> {
    children: [Option<u32>; 2],
    entries: Vec<T>,
}

impl<T> Node<T> {
    fn empty() -> Self {
        Node { children: [None, None], entries: Vec::new() }
    }
}

#[derive(Debug, Clone)]
struct Tree<T> {
    nodes: Vec<Node<T>>,
}

impl<T> Tree<T> {
    fn new() -> Self {
        Tree { nodes: vec![Node::empty()] }
    }
}

/// Maps prefixes to values; several values may share one prefix.
#[derive(Debug, Clone)]
pub struct PrefixTrie<T> {
    v4: Tree<(IpPrefix, T)>,
    v6: Tree<(IpPrefix, T)>,
    len: usize,
}

impl<T> Default for PrefixTrie<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> PrefixTrie<T> {
    pub fn new() -> Self {
        PrefixTrie { v4: Tree::new(), v6: Tree::new(), len: 0 }
    }

    /// Number of stored (prefix, value) entries.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn tree(&self, family: Family) -> &Tree<(IpPrefix, T)> {
        match family {
            Family::V4 => &self.v4,
            Family::V6 => &self.v6,
        }
    }

    pub fn insert(&mut self, prefix: IpPrefix, value: T) {
        let prefix = prefix.canonical();
        let tree = match prefix.family() {
            Family::V4 => &mut self.v4,
            Family::V6 => &mut self.v6,
        };
        let mut at = 0usize;
        for i in 0..prefix.len() {
            let b = prefix.bit(i) as usize;
            at = match tree.nodes[at].children[b] {
                Some(next) => next as usize,
                None => {
                    tree.nodes.push(Node::empty());
                    let next = tree.nodes.len() - 1;
                    tree.nodes[at].children[b] = Some(next as u32);
                    next
                }
            };
        }
        tree.nodes[at].entries.push((prefix, value));
        self.len += 1;
    }

    /// All entries whose prefix contains `query` (including an exact match),
    /// shortest prefix first.
    pub fn covering<'a>(&'a self, query: &IpPrefix) -> impl Iterator<Item = (&'a IpPrefix, &'a T)> + 'a {
        let tree = self.tree(query.family());
        let mut path = Vec::with_capacity(query.len() as usize + 1);
        let mut at = Some(0usize);
        let mut depth = 0u8;
        while let Some(node) = at {
            path.push(node);
            if depth == query.len() {
                break;
            }
            at = tree.nodes[node].children[query.bit(depth) as usize].map(|n| n as usize);
            depth += 1;
        }
        path.into_iter()
            .flat_map(move |n| tree.nodes[n].entries.iter().map(|(p, v)| (p, v)))
    }

    /// Entries stored at exactly `query`.
    pub fn exact<'a>(&'a self, query: &IpPrefix) -> impl Iterator<Item = &'a T> + 'a {
        let query = query.canonical();
        self.covering(&query)
            .filter(move |(p, _)| **p == query)
            .map(|(_, v)| v)
    }

    pub fn contains_covering(&self, query: &IpPrefix) -> bool {
        self.covering(query).next().is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&IpPrefix, &T)> {
        self.v4
            .nodes
            .iter()
            .chain(self.v6.nodes.iter())
            .flat_map(|n| n.entries.iter().map(|(p, v)| (p, v)))
    }
}

impl<T> FromIterator<(IpPrefix, T)> for PrefixTrie<T> {
    fn from_iter<I: IntoIterator<Item = (IpPrefix, T)>>(iter: I) -> Self {
        let mut trie = PrefixTrie::new();
        for (p, v) in iter {
            trie.insert(p, v);
        }
        trie
    }
}
