//! Disjoint-set forest with path halving and union by size.

#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns `false` if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    /// Merges the sets of `a` and `b` and returns the size of the result.
    #[inline]
    pub fn union_size(&mut self, a: usize, b: usize) -> usize {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra != rb {
            if self.size[ra] < self.size[rb] {
                std::mem::swap(&mut ra, &mut rb);
            }
            self.parent[rb] = ra;
            self.size[ra] += self.size[rb];
        }
        self.size[ra]
    }

    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }

    /// Resets the given elements to singletons, leaving the rest untouched.
    pub fn reset(&mut self, elems: &[usize]) {
        for &e in elems {
            self.parent[e] = e;
            self.size[e] = 1;
        }
    }

    /// Components as sorted index lists, ordered by their smallest element.
    pub fn components(&mut self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut slot = vec![usize::MAX; n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let r = self.find(i);
            if slot[r] == usize::MAX {
                slot[r] = out.len();
                out.push(Vec::new());
            }
            out[slot[r]].push(i);
        }
        out
    }

    /// Largest component; ties go to the one with the smallest element.
    pub fn largest_component(&mut self) -> Vec<usize> {
        self.components()
            .into_iter()
            .fold(Vec::new(), |best, c| if c.len() > best.len() { c } else { best })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn components_and_ties() {
        let mut uf = UnionFind::new(6);
        uf.union(4, 5);
        uf.union(1, 2);
        assert_eq!(uf.components(), vec![vec![0], vec![1, 2], vec![3], vec![4, 5]]);
        assert_eq!(uf.largest_component(), vec![1, 2]);
        assert!(!uf.union(2, 1));
        assert_eq!(uf.set_size(5), 2);
    }
}
