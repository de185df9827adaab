//! Dominator and post-dominator trees (Cooper, Harvey and Kennedy's
//! iterative algorithm) and dominance frontiers.

use super::SsaFunction;

/// Immediate dominators over an arbitrary graph. `idom[root] == Some(root)`;
/// nodes unreachable from `root` get `None`.
pub fn immediate_dominators(
    n: usize,
    root: usize,
    succs: &[Vec<usize>],
    preds: &[Vec<usize>],
) -> Vec<Option<usize>> {
    // reverse postorder
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut stack = vec![(root, 0usize)];
    visited[root] = true;
    while let Some((node, i)) = stack.pop() {
        if i < succs[node].len() {
            stack.push((node, i + 1));
            let s = succs[node][i];
            if !visited[s] {
                visited[s] = true;
                stack.push((s, 0));
            }
        } else {
            order.push(node);
        }
    }
    order.reverse();
    let mut rpo_index = vec![usize::MAX; n];
    for (i, &b) in order.iter().enumerate() {
        rpo_index[b] = i;
    }

    let mut idom: Vec<Option<usize>> = vec![None; n];
    idom[root] = Some(root);
    let mut changed = true;
    while changed {
        changed = false;
        for &b in order.iter().skip(1) {
            let mut new_idom: Option<usize> = None;
            for &p in &preds[b] {
                if idom[p].is_none() {
                    continue;
                }
                new_idom = Some(match new_idom {
                    None => p,
                    Some(cur) => intersect(&idom, &rpo_index, p, cur),
                });
            }
            if new_idom.is_some() && idom[b] != new_idom {
                idom[b] = new_idom;
                changed = true;
            }
        }
    }
    idom
}

fn intersect(idom: &[Option<usize>], rpo: &[usize], mut a: usize, mut b: usize) -> usize {
    while a != b {
        while rpo[a] > rpo[b] {
            a = idom[a].expect("processed node");
        }
        while rpo[b] > rpo[a] {
            b = idom[b].expect("processed node");
        }
    }
    a
}

#[derive(Debug, Clone)]
pub struct DomTree {
    /// Immediate dominator per node; the root maps to itself.
    pub idom: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub root: usize,
    /// Preorder numbering and subtree end for O(1) dominance queries.
    pre: Vec<usize>,
    post: Vec<usize>,
}

impl DomTree {
    fn new(idom: Vec<Option<usize>>, root: usize) -> DomTree {
        let n = idom.len();
        let mut children = vec![Vec::new(); n];
        for (b, d) in idom.iter().enumerate() {
            if let Some(d) = d {
                if *d != b {
                    children[*d].push(b);
                }
            }
        }
        let mut pre = vec![usize::MAX; n];
        let mut post = vec![0; n];
        let mut counter = 0;
        let mut stack = vec![(root, false)];
        while let Some((node, done)) = stack.pop() {
            if done {
                post[node] = counter;
                continue;
            }
            pre[node] = counter;
            counter += 1;
            stack.push((node, true));
            for &c in children[node].iter().rev() {
                stack.push((c, false));
            }
        }
        DomTree {
            idom,
            children,
            root,
            pre,
            post,
        }
    }

    pub fn is_reachable(&self, b: usize) -> bool {
        self.idom[b].is_some()
    }

    /// `a` dominates `b` (reflexive).
    pub fn dominates(&self, a: usize, b: usize) -> bool {
        if !self.is_reachable(a) || !self.is_reachable(b) {
            return false;
        }
        self.pre[a] <= self.pre[b] && self.pre[b] < self.post[a].max(self.pre[a] + 1)
    }

    pub fn strictly_dominates(&self, a: usize, b: usize) -> bool {
        a != b && self.dominates(a, b)
    }

    /// Nodes in dominator-tree preorder.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            for &c in self.children[n].iter().rev() {
                stack.push(c);
            }
        }
        out
    }
}

pub fn dominator_tree(f: &SsaFunction) -> DomTree {
    let succs = f.successors();
    let preds = f.predecessors();
    DomTree::new(immediate_dominators(f.blocks.len(), 0, &succs, &preds), 0)
}

/// Post-dominator tree. Node `blocks.len()` is a virtual exit that every
/// RETURN/REVERT/STOP block flows into; blocks that cannot reach an exit are
/// attached to it directly.
pub fn post_dominator_tree(f: &SsaFunction) -> DomTree {
    let n = f.blocks.len();
    let exit = n;
    let mut rsuccs = vec![Vec::new(); n + 1];
    let mut rpreds = vec![Vec::new(); n + 1];
    for b in &f.blocks {
        let succs = b.successors();
        if succs.is_empty() {
            rsuccs[exit].push(b.id.index());
            rpreds[b.id.index()].push(exit);
        }
        for s in succs {
            rsuccs[s.index()].push(b.id.index());
            rpreds[b.id.index()].push(s.index());
        }
    }
    let mut idom = immediate_dominators(n + 1, exit, &rsuccs, &rpreds);
    for d in idom.iter_mut().take(n) {
        if d.is_none() {
            *d = Some(exit);
        }
    }
    DomTree::new(idom, exit)
}

/// Dominance frontier of every block.
pub fn dominance_frontiers(f: &SsaFunction, dom: &DomTree) -> Vec<Vec<usize>> {
    let preds = f.predecessors();
    let mut df = vec![Vec::new(); f.blocks.len()];
    for (b, ps) in preds.iter().enumerate() {
        if ps.len() < 2 || !dom.is_reachable(b) {
            continue;
        }
        let idom_b = dom.idom[b].expect("reachable");
        for &p in ps {
            let mut runner = p;
            while runner != idom_b && dom.is_reachable(runner) {
                if !df[runner].contains(&b) {
                    df[runner].push(b);
                }
                runner = dom.idom[runner].expect("reachable");
            }
        }
    }
    df
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds_of(succs: &[Vec<usize>]) -> Vec<Vec<usize>> {
        let mut p = vec![Vec::new(); succs.len()];
        for (a, ss) in succs.iter().enumerate() {
            for &s in ss {
                p[s].push(a);
            }
        }
        p
    }

    /// Naive oracle: `a` dominates `b` iff `b` is unreachable from the root
    /// once `a` is removed.
    fn naive_dominates(succs: &[Vec<usize>], a: usize, b: usize) -> bool {
        if a == b {
            return true;
        }
        if a == 0 {
            return true;
        }
        let mut seen = vec![false; succs.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &s in &succs[n] {
                if s != a && !seen[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
        !seen[b]
    }

    #[test]
    fn diamond() {
        let succs = vec![vec![1, 2], vec![3], vec![3], vec![]];
        let idom = immediate_dominators(4, 0, &succs, &preds_of(&succs));
        assert_eq!(idom, vec![Some(0), Some(0), Some(0), Some(0)]);
    }

    proptest::proptest! {
        #[test]
        fn matches_naive_oracle(edges in proptest::collection::vec((0usize..8, 0usize..8), 0..20)) {
            let n = 8;
            let mut succs = vec![Vec::new(); n];
            for (a, b) in edges {
                if !succs[a].contains(&b) {
                    succs[a].push(b);
                }
            }
            let preds = preds_of(&succs);
            let tree = DomTree::new(immediate_dominators(n, 0, &succs, &preds), 0);
            let mut reach = vec![false; n];
            let mut stack = vec![0];
            reach[0] = true;
            while let Some(x) = stack.pop() {
                for &s in &succs[x] {
                    if !reach[s] { reach[s] = true; stack.push(s); }
                }
            }
            for a in 0..n {
                for b in 0..n {
                    if reach[a] && reach[b] {
                        proptest::prop_assert_eq!(tree.dominates(a, b), naive_dominates(&succs, a, b), "a={} b={}", a, b);
                    }
                }
            }
        }
    }
}
