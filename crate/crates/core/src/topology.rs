//! Qubit coupling graphs and the block locations they allow.

use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;

use crate::error::{Result, SynthError};
use crate::paulis::Location;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Topology {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(SynthError::invalid("topology needs at least one qubit"));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(SynthError::invalid(format!("self-loop on qubit {a}")));
            }
            if a >= n || b >= n {
                return Err(SynthError::invalid(format!(
                    "edge ({a}, {b}) out of range for {n} qubits"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Topology { n, edges: set })
    }

    pub fn all_to_all(n: usize) -> Self {
        let edges = (0..n).tuple_combinations().collect();
        Topology { n, edges }
    }

    pub fn linear(n: usize) -> Self {
        let edges = (1..n).map(|i| (i - 1, i)).collect();
        Topology { n, edges }
    }

    /// Parses one `i j` edge per line. Blank lines and `#` comments are
    /// ignored.
    pub fn parse_coupling(n: usize, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| SynthError::Parse {
                    line: lineno + 1,
                    message: format!("expected a qubit index, got `{s}`"),
                })
            };
            if parts.len() != 2 {
                return Err(SynthError::Parse {
                    line: lineno + 1,
                    message: "expected `i j`".into(),
                });
            }
            edges.push((parse(parts[0])?, parse(parts[1])?));
        }
        Self::new(n, edges)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    fn induced_connected(&self, qubits: &[usize]) -> bool {
        let mut seen = vec![false; qubits.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for (j, &q) in qubits.iter().enumerate() {
                if !seen[j] && self.has_edge(qubits[i], q) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Every `m`-qubit subset whose induced subgraph is connected, in
    /// ascending lexicographic order.
    pub fn locations(&self, m: usize) -> Result<Vec<Location>> {
        if m == 0 || m > self.n {
            return Err(SynthError::invalid(format!(
                "cannot place {m}-qubit blocks on {} qubits",
                self.n
            )));
        }
        (0..self.n)
            .combinations(m)
            .filter(|q| self.induced_connected(q))
            .map(Location::new)
            .collect()
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Topology::all_to_all(self.n) {
            write!(f, "all-to-all({})", self.n)
        } else if *self == Topology::linear(self.n) {
            write!(f, "linear({})", self.n)
        } else {
            write!(f, "custom({}; ", self.n)?;
            write!(f, "{}", self.edges.iter().map(|(a, b)| format!("{a}-{b}")).join(","))?;
            write!(f, ")")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    fn locs(t: &Topology, m: usize) -> Vec<Vec<usize>> {
        t.locations(m).unwrap().iter().map(|l| l.qubits().to_vec()).collect()
    }

    /// Independent enumeration: every bitmask subset of size m, checked for
    /// connectivity with a breadth-first search over the edge list.
    fn oracle(t: &Topology, m: usize) -> Vec<Vec<usize>> {
        let n = t.num_qubits();
        let mut out = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != m {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|q| mask & (1 << q) != 0).collect();
            let mut reached = 1u32 << members[0];
            let mut queue = VecDeque::from([members[0]]);
            while let Some(q) = queue.pop_front() {
                for (a, b) in t.edges() {
                    let other = if a == q {
                        b
                    } else if b == q {
                        a
                    } else {
                        continue;
                    };
                    if mask & (1 << other) != 0 && reached & (1 << other) == 0 {
                        reached |= 1 << other;
                        queue.push_back(other);
                    }
                }
            }
            if reached == mask {
                out.push(members);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn linear_examples() {
        assert_eq!(locs(&Topology::linear(3), 2), vec![vec![0, 1], vec![1, 2]]);
        assert_eq!(
            locs(&Topology::linear(5), 3),
            vec![vec![0, 1, 2], vec![1, 2, 3], vec![2, 3, 4]]
        );
    }

    #[test]
    fn complete_graph_gives_all_subsets() {
        assert_eq!(Topology::all_to_all(4).locations(2).unwrap().len(), 6);
        for n in 1..=6 {
            for m in 1..=n {
                let count = Topology::all_to_all(n).locations(m).unwrap().len();
                let binom = (0..m).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
                assert_eq!(count, binom);
            }
        }
    }

    #[test]
    fn matches_bfs_oracle() {
        let graphs = [
            Topology::linear(5),
            Topology::all_to_all(4),
            Topology::new(5, [(0, 1), (1, 2), (1, 3), (3, 4)]).unwrap(),
            Topology::new(4, [(0, 1), (2, 3)]).unwrap(),
        ];
        for t in &graphs {
            for m in 1..=t.num_qubits() {
                assert_eq!(locs(t, m), oracle(t, m), "{t} m={m}");
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(Topology::linear(3).locations(4).is_err());
        assert!(Topology::linear(3).locations(0).is_err());
        assert!(Topology::new(3, [(1, 1)]).is_err());
        assert!(Topology::new(3, [(0, 3)]).is_err());
    }

    #[test]
    fn coupling_file() {
        let t = Topology::parse_coupling(3, "0 1\n# comment\n\n2 1\n").unwrap();
        assert_eq!(t, Topology::linear(3));
        let err = Topology::parse_coupling(3, "0 1\n0 x\n").unwrap_err();
        assert!(matches!(err, SynthError::Parse { line: 2, .. }));
    }
}
