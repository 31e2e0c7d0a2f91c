//! Undirected graphs, DAGs and the separation queries the Markov properties
//! are stated in, plus minimum spanning trees.
//!
//! Nodes are `0..n` inside the library. The text edge-list format is 1-based.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Simple undirected graph on `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<BTreeSet<usize>>,
}

impl UndirectedGraph {
    pub fn new(num_nodes: usize) -> Self {
        UndirectedGraph {
            adj: vec![BTreeSet::new(); num_nodes],
        }
    }

    pub fn complete(num_nodes: usize) -> Self {
        let mut g = Self::new(num_nodes);
        for i in 0..num_nodes {
            for j in (i + 1)..num_nodes {
                g.adj[i].insert(j);
                g.adj[j].insert(i);
            }
        }
        g
    }

    /// Builds a graph from 0-based pairs. Self-loops and out-of-range nodes are
    /// rejected; repeated pairs collapse to a single edge.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::new(num_nodes);
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        let n = self.num_nodes();
        if i >= n || j >= n {
            return Err(Error::Argument(format!("edge ({i},{j}) out of range for {n} nodes")));
        }
        if i == j {
            return Err(Error::Argument(format!("self-loop at node {i}")));
        }
        self.adj[i].insert(j);
        self.adj[j].insert(i);
        Ok(())
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        if i < self.num_nodes() && j < self.num_nodes() {
            self.adj[i].remove(&j);
            self.adj[j].remove(&i);
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj.get(i).is_some_and(|s| s.contains(&j))
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i].iter().copied()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for (i, nb) in self.adj.iter().enumerate() {
            out.extend(nb.range((i + 1)..).map(|&j| (i, j)));
        }
        out
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for v in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.num_nodes() <= 1 || self.components().len() == 1
    }

    pub fn is_tree(&self) -> bool {
        self.num_nodes() >= 1 && self.num_edges() + 1 == self.num_nodes() && self.is_connected()
    }

    /// True iff every path between `a` and `b` meets `c`.
    pub fn separates(&self, a: &[usize], b: &[usize], c: &[usize]) -> Result<bool> {
        check_triple(self.num_nodes(), a, b, c)?;
        let n = self.num_nodes();
        let mut blocked = vec![false; n];
        for &v in c {
            blocked[v] = true;
        }
        let mut target = vec![false; n];
        for &v in b {
            target[v] = true;
        }
        let mut seen = blocked.clone();
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &s in a {
            seen[s] = true;
            queue.push_back(s);
        }
        while let Some(u) = queue.pop_front() {
            for v in self.neighbors(u) {
                if target[v] {
                    return Ok(false);
                }
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        Ok(true)
    }

    /// Maximum cardinality search starting at `start`. Returns the visit order.
    pub fn maximum_cardinality_search(&self, start: usize) -> Vec<usize> {
        let n = self.num_nodes();
        let mut weight = vec![0usize; n];
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut next = Some(start.min(n.saturating_sub(1)));
        while let Some(v) = next {
            visited[v] = true;
            order.push(v);
            for u in self.neighbors(v) {
                if !visited[u] {
                    weight[u] += 1;
                }
            }
            // ties go to the smallest index
            next = (0..n)
                .filter(|&u| !visited[u])
                .max_by(|&x, &y| weight[x].cmp(&weight[y]).then(y.cmp(&x)));
        }
        order
    }

    /// Chordality test by maximum cardinality search from node 0.
    pub fn is_decomposable(&self) -> Decomposability {
        self.decomposability_from(0)
    }

    /// Like [`is_decomposable`](Self::is_decomposable) with the search started at `start`.
    pub fn decomposability_from(&self, start: usize) -> Decomposability {
        if self.num_nodes() == 0 {
            return Decomposability {
                decomposable: true,
                elimination_order: Vec::new(),
            };
        }
        let visit = self.maximum_cardinality_search(start);
        let decomposable = is_perfect_visit_order(self, &visit);
        let mut elimination_order = visit;
        elimination_order.reverse();
        Decomposability {
            decomposable,
            elimination_order,
        }
    }

    /// All maximal cliques (Bron–Kerbosch with pivoting), each sorted, listed
    /// lexicographically.
    pub fn cliques(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let p: BTreeSet<usize> = (0..self.num_nodes()).collect();
        self.bron_kerbosch(Vec::new(), p, BTreeSet::new(), &mut out);
        for c in &mut out {
            c.sort_unstable();
        }
        out.sort();
        out
    }

    fn bron_kerbosch(
        &self,
        r: Vec<usize>,
        mut p: BTreeSet<usize>,
        mut x: BTreeSet<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if p.is_empty() {
            if x.is_empty() {
                out.push(r);
            }
            return;
        }
        let pivot = p
            .iter()
            .chain(x.iter())
            .copied()
            .max_by_key(|&u| p.iter().filter(|&&v| self.has_edge(u, v)).count())
            .expect("p is nonempty");
        let candidates: Vec<usize> = p.iter().copied().filter(|&v| !self.has_edge(pivot, v)).collect();
        for v in candidates {
            let mut r2 = r.clone();
            r2.push(v);
            let p2 = p.iter().copied().filter(|&u| self.has_edge(u, v)).collect();
            let x2 = x.iter().copied().filter(|&u| self.has_edge(u, v)).collect();
            self.bron_kerbosch(r2, p2, x2, out);
            p.remove(&v);
            x.insert(v);
        }
    }

    /// Shortest path by hop count (BFS), as the node sequence from `i` to `j`.
    pub fn shortest_path(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        let n = self.num_nodes();
        if i >= n || j >= n {
            return None;
        }
        let mut parent = vec![usize::MAX; n];
        parent[i] = i;
        let mut queue = VecDeque::from([i]);
        while let Some(u) = queue.pop_front() {
            if u == j {
                break;
            }
            for v in self.neighbors(u) {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[j] == usize::MAX {
            return None;
        }
        let mut path = vec![j];
        let mut cur = j;
        while cur != i {
            cur = parent[cur];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    /// Edges of the unique path between `i` and `j` in a tree, oriented along
    /// the walk from `i` to `j`.
    pub fn unique_tree_path(&self, i: usize, j: usize) -> Result<Vec<(usize, usize)>> {
        if !self.is_tree() {
            return Err(Error::Structure("graph is not a tree".into()));
        }
        let nodes = self
            .shortest_path(i, j)
            .ok_or_else(|| Error::Argument(format!("nodes ({i},{j}) out of range")))?;
        Ok(nodes.windows(2).map(|w| (w[0], w[1])).collect())
    }

    /// Block graph: connected, decomposable and every pair of maximal cliques
    /// shares at most one node.
    pub fn is_block_graph(&self) -> bool {
        if !self.is_connected() || !self.is_decomposable().decomposable {
            return false;
        }
        let cliques = self.cliques();
        for (a, ca) in cliques.iter().enumerate() {
            for cb in &cliques[a + 1..] {
                let shared = ca.iter().filter(|v| cb.binary_search(v).is_ok()).count();
                if shared > 1 {
                    return false;
                }
            }
        }
        true
    }

    /// 1-based edge-list text, preceded by a `# nodes: d` header.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("# nodes: {}\n", self.num_nodes());
        for (i, j) in self.edges() {
            let _ = writeln!(s, "{} {}", i + 1, j + 1);
        }
        s
    }

    /// Parses the 1-based edge-list format. The node count comes from
    /// `num_nodes`, else a `# nodes: d` header, else the largest index seen.
    pub fn parse_edge_list(text: &str, num_nodes: Option<usize>) -> Result<Self> {
        let parsed = parse_edges(text)?;
        if parsed.directed {
            return Err(Error::Parse {
                line: parsed.first_directed_line,
                message: "directed arc in an undirected edge list".into(),
            });
        }
        let n = num_nodes.or(parsed.declared_nodes).unwrap_or(parsed.max_node);
        Self::from_edges(n, &parsed.pairs)
    }
}

/// Result of a chordality test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposability {
    pub decomposable: bool,
    /// Reverse maximum-cardinality-search order; a perfect elimination
    /// ordering whenever `decomposable` holds.
    pub elimination_order: Vec<usize>,
}

fn is_perfect_visit_order(g: &UndirectedGraph, visit: &[usize]) -> bool {
    let n = g.num_nodes();
    let mut pos = vec![0usize; n];
    for (k, &v) in visit.iter().enumerate() {
        pos[v] = k;
    }
    for &v in visit {
        let earlier: Vec<usize> = g.neighbors(v).filter(|&u| pos[u] < pos[v]).collect();
        let Some(&latest) = earlier.iter().max_by_key(|&&u| pos[u]) else {
            continue;
        };
        for &u in &earlier {
            if u != latest && !g.has_edge(u, latest) {
                return false;
            }
        }
    }
    true
}

/// Directed acyclic graph on `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    parents: Vec<BTreeSet<usize>>,
    children: Vec<BTreeSet<usize>>,
    topo: Vec<usize>,
}

impl Dag {
    /// Builds a DAG from 0-based arcs `(from, to)`; fails on a directed cycle.
    pub fn from_arcs(num_nodes: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        let mut parents = vec![BTreeSet::new(); num_nodes];
        let mut children = vec![BTreeSet::new(); num_nodes];
        for &(u, v) in arcs {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Argument(format!("arc ({u},{v}) out of range")));
            }
            if u == v {
                return Err(Error::Argument(format!("self-loop at node {u}")));
            }
            children[u].insert(v);
            parents[v].insert(u);
        }
        // Kahn's algorithm, smallest ready node first
        let mut indeg: Vec<usize> = parents.iter().map(BTreeSet::len).collect();
        let mut ready: BTreeSet<usize> = (0..num_nodes).filter(|&v| indeg[v] == 0).collect();
        let mut topo = Vec::with_capacity(num_nodes);
        while let Some(v) = ready.pop_first() {
            topo.push(v);
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if topo.len() != num_nodes {
            return Err(Error::Structure("arcs contain a directed cycle".into()));
        }
        Ok(Dag {
            parents,
            children,
            topo,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.parents.len()
    }

    pub fn arcs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, ch) in self.children.iter().enumerate() {
            out.extend(ch.iter().map(|&v| (u, v)));
        }
        out
    }

    pub fn has_arc(&self, u: usize, v: usize) -> bool {
        self.children.get(u).is_some_and(|s| s.contains(&v))
    }

    pub fn parents(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.parents[v].iter().copied()
    }

    pub fn children(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.children[v].iter().copied()
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// Nodes with a directed path into `set`, including `set` itself.
    pub fn ancestors_of(&self, set: &[usize]) -> Vec<bool> {
        let mut mark = vec![false; self.num_nodes()];
        let mut stack: Vec<usize> = set.to_vec();
        for &v in set {
            mark[v] = true;
        }
        while let Some(v) = stack.pop() {
            for p in self.parents(v) {
                if !mark[p] {
                    mark[p] = true;
                    stack.push(p);
                }
            }
        }
        mark
    }

    /// Strict descendants of `v`.
    pub fn descendants(&self, v: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for c in self.children(u) {
                if out.insert(c) {
                    stack.push(c);
                }
            }
        }
        out
    }

    /// Sub-DAG keeping only arcs among the ancestors of `set` (node count unchanged).
    pub fn ancestral_restriction(&self, set: &[usize]) -> Dag {
        let keep = self.ancestors_of(set);
        let arcs: Vec<(usize, usize)> = self
            .arcs()
            .into_iter()
            .filter(|&(u, v)| keep[u] && keep[v])
            .collect();
        Dag::from_arcs(self.num_nodes(), &arcs).expect("restriction of a DAG is acyclic")
    }

    /// Skeleton of the moral graph: arcs de-oriented, co-parents married.
    pub fn moralized_skeleton(&self) -> UndirectedGraph {
        let mut g = UndirectedGraph::new(self.num_nodes());
        for (u, v) in self.arcs() {
            g.add_edge(u, v).expect("arcs are valid");
        }
        for v in 0..self.num_nodes() {
            let pa: Vec<usize> = self.parents(v).collect();
            for (k, &a) in pa.iter().enumerate() {
                for &b in &pa[k + 1..] {
                    g.add_edge(a, b).expect("parents are distinct");
                }
            }
        }
        g
    }

    /// d-separation by the reachability ("Bayes ball") walk over trails: a
    /// non-collider blocks when in `c`, a collider passes only when it is an
    /// ancestor of `c`.
    pub fn d_separates(&self, a: &[usize], b: &[usize], c: &[usize]) -> Result<bool> {
        check_triple(self.num_nodes(), a, b, c)?;
        let n = self.num_nodes();
        let anc_c = self.ancestors_of(c);
        let mut in_c = vec![false; n];
        for &v in c {
            in_c[v] = true;
        }
        let mut in_b = vec![false; n];
        for &v in b {
            in_b[v] = true;
        }
        // index 0: arrived from a child (moving up), 1: arrived from a parent
        let mut visited = vec![[false; 2]; n];
        let mut queue: VecDeque<(usize, usize)> = a.iter().map(|&v| (v, 0)).collect();
        while let Some((v, dir)) = queue.pop_front() {
            if visited[v][dir] {
                continue;
            }
            visited[v][dir] = true;
            if !in_c[v] && in_b[v] {
                return Ok(false);
            }
            if dir == 0 {
                if !in_c[v] {
                    queue.extend(self.parents(v).map(|p| (p, 0)));
                    queue.extend(self.children(v).map(|ch| (ch, 1)));
                }
            } else {
                if !in_c[v] {
                    queue.extend(self.children(v).map(|ch| (ch, 1)));
                }
                if anc_c[v] {
                    queue.extend(self.parents(v).map(|p| (p, 0)));
                }
            }
        }
        Ok(true)
    }

    /// Every directed path from `from` to `to`, as arc sequences. Paths have
    /// distinct nodes, so `from == to` yields nothing.
    pub fn directed_paths(&self, from: usize, to: usize) -> Vec<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        if from == to || from >= self.num_nodes() || to >= self.num_nodes() {
            return out;
        }
        let mut stack = vec![from];
        self.extend_paths(to, &mut stack, &mut out);
        out
    }

    fn extend_paths(&self, to: usize, stack: &mut Vec<usize>, out: &mut Vec<Vec<(usize, usize)>>) {
        let last = *stack.last().expect("nonempty");
        for c in self.children(last) {
            stack.push(c);
            if c == to {
                out.push(stack.windows(2).map(|w| (w[0], w[1])).collect());
            } else {
                self.extend_paths(to, stack, out);
            }
            stack.pop();
        }
    }

    /// 1-based `i -> j` lines, preceded by a `# nodes: d` header.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("# nodes: {}\n", self.num_nodes());
        for (u, v) in self.arcs() {
            let _ = writeln!(s, "{} -> {}", u + 1, v + 1);
        }
        s
    }

    pub fn parse_edge_list(text: &str, num_nodes: Option<usize>) -> Result<Self> {
        let parsed = parse_edges(text)?;
        if parsed.undirected_seen {
            return Err(Error::Parse {
                line: parsed.first_undirected_line,
                message: "undirected edge in a directed edge list".into(),
            });
        }
        let n = num_nodes.or(parsed.declared_nodes).unwrap_or(parsed.max_node);
        Self::from_arcs(n, &parsed.pairs)
    }
}

/// Edge `(i, j)` with a nonnegative weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Kruskal's algorithm. Equal weights are broken by the lexicographic order of
/// `(min(i,j), max(i,j))`.
pub fn minimum_spanning_tree(edges: &[WeightedEdge], num_nodes: usize) -> Result<UndirectedGraph> {
    let mut sorted: Vec<(f64, usize, usize)> = Vec::with_capacity(edges.len());
    for e in edges {
        if e.weight.is_nan() || e.weight < 0.0 {
            return Err(Error::Argument(format!(
                "edge ({},{}) has invalid weight {}",
                e.i, e.j, e.weight
            )));
        }
        if e.i >= num_nodes || e.j >= num_nodes || e.i == e.j {
            return Err(Error::Argument(format!("edge ({},{}) invalid", e.i, e.j)));
        }
        sorted.push((e.weight, e.i.min(e.j), e.i.max(e.j)));
    }
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut uf = UnionFind::new(num_nodes);
    let mut tree = UndirectedGraph::new(num_nodes);
    for (w, i, j) in sorted {
        if w.is_infinite() {
            break;
        }
        if uf.union(i, j) {
            tree.add_edge(i, j)?;
            if tree.num_edges() + 1 == num_nodes {
                break;
            }
        }
    }
    if num_nodes > 0 && tree.num_edges() + 1 != num_nodes {
        return Err(Error::NoSpanningTree);
    }
    Ok(tree)
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

fn check_triple(n: usize, a: &[usize], b: &[usize], c: &[usize]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("separation needs nonempty A and B".into()));
    }
    let mut owner = vec![0u8; n];
    for (tag, set) in [(1u8, a), (2, b), (3, c)] {
        for &v in set {
            if v >= n {
                return Err(Error::Argument(format!("node {v} out of range")));
            }
            if owner[v] != 0 && owner[v] != tag {
                return Err(Error::Argument(format!("node {v} appears in two of A, B, C")));
            }
            owner[v] = tag;
        }
    }
    Ok(())
}

struct ParsedEdges {
    pairs: Vec<(usize, usize)>,
    directed: bool,
    undirected_seen: bool,
    first_directed_line: usize,
    first_undirected_line: usize,
    declared_nodes: Option<usize>,
    max_node: usize,
}

fn parse_edges(text: &str) -> Result<ParsedEdges> {
    let mut out = ParsedEdges {
        pairs: Vec::new(),
        directed: false,
        undirected_seen: false,
        first_directed_line: 0,
        first_undirected_line: 0,
        declared_nodes: None,
        max_node: 0,
    };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let (body, comment) = match raw.find('#') {
            Some(p) => (&raw[..p], Some(&raw[p + 1..])),
            None => (raw, None),
        };
        if let Some(c) = comment {
            if let Some(rest) = c.trim().strip_prefix("nodes:") {
                let n = rest.trim().parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad node count '{}'", rest.trim()),
                })?;
                out.declared_nodes = Some(n);
            }
        }
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let (lhs, rhs, directed) = match body.split_once("->") {
            Some((l, r)) => (l.trim(), r.trim(), true),
            None => {
                let mut it = body.split_whitespace();
                let l = it.next().unwrap_or("");
                let r = it.next().unwrap_or("");
                if it.next().is_some() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "expected exactly two node indices".into(),
                    });
                }
                (l, r, false)
            }
        };
        let parse_node = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(Error::Parse {
                    line: line_no,
                    message: format!("invalid 1-based node index '{s}'"),
                }),
            }
        };
        let (u, v) = (parse_node(lhs)?, parse_node(rhs)?);
        if directed && !out.directed {
            out.directed = true;
            out.first_directed_line = line_no;
        }
        if !directed && !out.undirected_seen {
            out.undirected_seen = true;
            out.first_undirected_line = line_no;
        }
        out.max_node = out.max_node.max(u).max(v);
        out.pairs.push((u - 1, v - 1));
    }
    Ok(out)
}
