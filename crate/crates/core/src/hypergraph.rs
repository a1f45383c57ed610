//! Combinatorial hypergraphs and the graphical rewrite rules used by the
//! purification protocols.
//!
//! A hypergraph state is fully described by its vertex count, its set of
//! hyperedges and a global sign. Every local operation the protocols need
//! (Pauli `Z` and `X`, `CNOT`, the two-to-one reduction operator and the
//! `σ_z` expansion at a vertex) maps a hypergraph state to another one, and
//! the functions here perform that map on the edge set directly.
//!
//! Vertices are 0-based in the API. The text format (`"3; {1,2,3},{3}"`)
//! lists vertices 1-based, matching the usual qubit labels.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Largest vertex count an [`EdgeSet`] can hold (edges are 64-bit masks).
pub const MAX_VERTICES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HypergraphError {
    #[error("vertex {vertex} out of range for a hypergraph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("operation needs two distinct vertices, got {0} twice")]
    SameVertex(usize),

    #[error("hypergraphs support at most {MAX_VERTICES} vertices, got {0}")]
    TooManyVertices(usize),

    #[error("coloring has {got} entries but the hypergraph has {expected} vertices")]
    ColoringLength { expected: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type HypergraphResult<T> = Result<T, HypergraphError>;

/// A hyperedge, stored as a bit mask with bit `v` set for vertex `v`.
///
/// The empty edge only appears transiently (for instance inside an
/// adjacency); an [`EdgeSet`] absorbs it into its sign.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Edge(u64);

impl Edge {
    pub const EMPTY: Edge = Edge(0);

    pub fn from_mask(mask: u64) -> Self {
        Edge(mask)
    }

    pub fn singleton(v: usize) -> Self {
        Edge(1 << v)
    }

    /// Builds an edge from vertex labels; repeated labels collapse.
    pub fn from_vertices<I: IntoIterator<Item = usize>>(vertices: I) -> Self {
        Edge(vertices.into_iter().fold(0, |m, v| m | (1 << v)))
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, v: usize) -> bool {
        v < MAX_VERTICES && self.0 & (1 << v) != 0
    }

    pub fn with(self, v: usize) -> Self {
        Edge(self.0 | (1 << v))
    }

    pub fn without(self, v: usize) -> Self {
        Edge(self.0 & !(1 << v))
    }

    /// Sorted vertex labels.
    pub fn vertices(self) -> impl Iterator<Item = usize> {
        let mut m = self.0;
        std::iter::from_fn(move || {
            if m == 0 {
                None
            } else {
                let v = m.trailing_zeros() as usize;
                m &= m - 1;
                Some(v)
            }
        })
    }

    /// Drops vertex `v` (which must not be in the edge) and shifts every
    /// higher label down by one.
    fn remove_label(self, v: usize) -> Self {
        let low = (1u64 << v) - 1;
        Edge((self.0 & low) | ((self.0 >> 1) & !low))
    }
}

// Lexicographic on the sorted vertex lists, so {1} < {1,2,3} < {1,5,6} < {3}.
impl Ord for Edge {
    fn cmp(&self, other: &Self) -> Ordering {
        let (mut a, mut b) = (self.0, other.0);
        loop {
            match (a, b) {
                _ if a == b => return Ordering::Equal,
                (0, _) => return Ordering::Less,
                (_, 0) => return Ordering::Greater,
                _ => {
                    let (la, lb) = (a.trailing_zeros(), b.trailing_zeros());
                    if la != lb {
                        return la.cmp(&lb);
                    }
                    a &= a - 1;
                    b &= b - 1;
                }
            }
        }
    }
}

impl PartialOrd for Edge {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.vertices().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", v + 1)?;
        }
        write!(f, "}}")
    }
}

/// Global phase of a hypergraph state.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Default)]
pub enum Sign {
    #[default]
    Plus,
    Minus,
}

impl Sign {
    pub fn flipped(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// A hypergraph on `n` vertices with a global sign.
///
/// Edges are kept canonically: no duplicates (double edges cancel, since
/// `C_e² = 1`), no empty edge (`C_∅ = -1` is folded into the sign).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeSet {
    n: usize,
    edges: BTreeSet<Edge>,
    sign: Sign,
}

impl EdgeSet {
    pub fn new(n: usize) -> HypergraphResult<Self> {
        if n > MAX_VERTICES {
            return Err(HypergraphError::TooManyVertices(n));
        }
        Ok(EdgeSet {
            n,
            edges: BTreeSet::new(),
            sign: Sign::Plus,
        })
    }

    /// Builds an edge set from 0-based vertex lists. Each list toggles its
    /// edge, so an edge given twice cancels.
    pub fn from_edges<E, I>(n: usize, edges: E) -> HypergraphResult<Self>
    where
        E: IntoIterator<Item = I>,
        I: AsRef<[usize]>,
    {
        let mut set = EdgeSet::new(n)?;
        for e in edges {
            let e = e.as_ref();
            for &v in e {
                set.check_vertex(v)?;
            }
            set.toggle(Edge::from_vertices(e.iter().copied()));
        }
        Ok(set)
    }

    /// The linear 3-uniform chain `{1,2,3},{2,3,4},…` on `n ≥ 3` vertices.
    pub fn linear_chain(n: usize) -> HypergraphResult<Self> {
        let edges: Vec<[usize; 3]> = (0..n.saturating_sub(2)).map(|i| [i, i + 1, i + 2]).collect();
        EdgeSet::from_edges(n, edges)
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_edge(&self, e: Edge) -> bool {
        self.edges.contains(&e)
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.sign = sign;
        self
    }

    /// Adds the edge if absent, removes it otherwise. The empty edge flips
    /// the sign.
    pub fn toggle_edge(&mut self, e: Edge) -> HypergraphResult<()> {
        if let Some(v) = e.vertices().find(|&v| v >= self.n) {
            return Err(HypergraphError::VertexOutOfRange { vertex: v, n: self.n });
        }
        self.toggle(e);
        Ok(())
    }

    fn toggle(&mut self, e: Edge) {
        if e.is_empty() {
            self.sign = self.sign.flipped();
        } else if !self.edges.remove(&e) {
            self.edges.insert(e);
        }
    }

    fn toggle_all<I: IntoIterator<Item = Edge>>(&mut self, edges: I) {
        for e in edges {
            self.toggle(e);
        }
    }

    fn check_vertex(&self, v: usize) -> HypergraphResult<()> {
        if v >= self.n {
            Err(HypergraphError::VertexOutOfRange { vertex: v, n: self.n })
        } else {
            Ok(())
        }
    }

    /// `{ e \ {v} | e ∈ E, v ∈ e }`; may contain the empty edge.
    pub fn adjacency(&self, v: usize) -> HypergraphResult<BTreeSet<Edge>> {
        self.check_vertex(v)?;
        Ok(self.edges.iter().filter(|e| e.contains(v)).map(|e| e.without(v)).collect())
    }

    pub fn apply_z(&self, v: usize) -> HypergraphResult<Self> {
        self.check_vertex(v)?;
        let mut out = self.clone();
        out.toggle(Edge::singleton(v));
        Ok(out)
    }

    /// `E △ 𝒜(v)`.
    pub fn apply_x(&self, v: usize) -> HypergraphResult<Self> {
        let adj = self.adjacency(v)?;
        let mut out = self.clone();
        out.toggle_all(adj);
        Ok(out)
    }

    /// `E △ { e ∪ {c} | e ∈ 𝒜(t) }`.
    pub fn apply_cnot(&self, control: usize, target: usize) -> HypergraphResult<Self> {
        self.check_vertex(control)?;
        if control == target {
            return Err(HypergraphError::SameVertex(control));
        }
        let adj = self.adjacency(target)?;
        let mut out = self.clone();
        out.toggle_all(adj.into_iter().map(|e| e.with(control)));
        Ok(out)
    }

    /// Reduction operator `|0⟩⟨00| + |1⟩⟨11|` on `(v1, v2)`: merges `v1`
    /// into `v2`, then removes `v1` and shifts higher labels down.
    pub fn reduce(&self, v1: usize, v2: usize) -> HypergraphResult<Self> {
        self.check_vertex(v1)?;
        self.check_vertex(v2)?;
        if v1 == v2 {
            return Err(HypergraphError::SameVertex(v1));
        }
        let mut merged = EdgeSet {
            n: self.n,
            edges: self.edges.iter().copied().filter(|e| !e.contains(v1)).collect(),
            sign: self.sign,
        };
        let moved: Vec<Edge> = self.adjacency(v1)?.into_iter().map(|f| f.with(v2)).collect();
        merged.toggle_all(moved);
        merged.remove_vertex(v1)
    }

    /// Expansion at `v`: `|H⟩ = (|0⟩_v|H_0⟩ + |1⟩_v|H_1⟩)/√2`. Returns the
    /// edge sets of `H_0` and `H_1`, both on `V \ {v}`.
    pub fn z_split(&self, v: usize) -> HypergraphResult<(Self, Self)> {
        let adj = self.adjacency(v)?;
        let e0 = EdgeSet {
            n: self.n,
            edges: self.edges.iter().copied().filter(|e| !e.contains(v)).collect(),
            sign: self.sign,
        };
        let mut e1 = e0.clone();
        e1.toggle_all(adj);
        Ok((e0.remove_vertex(v)?, e1.remove_vertex(v)?))
    }

    fn remove_vertex(&self, v: usize) -> HypergraphResult<Self> {
        debug_assert!(self.edges.iter().all(|e| !e.contains(v)));
        Ok(EdgeSet {
            n: self.n - 1,
            edges: self.edges.iter().map(|e| e.remove_label(v)).collect(),
            sign: self.sign,
        })
    }

    /// True if every edge has exactly `k` vertices.
    pub fn is_k_regular(&self, k: usize) -> bool {
        self.edges.iter().all(|e| e.len() == k)
    }

    /// True if no edge holds two vertices of the same color.
    pub fn is_colorable(&self, coloring: &Coloring) -> bool {
        coloring.len() == self.n
            && self.edges.iter().all(|e| {
                let colors: Vec<Color> = e.vertices().map(|v| coloring.color(v)).collect();
                let distinct: BTreeSet<Color> = colors.iter().copied().collect();
                distinct.len() == colors.len()
            })
    }
}

impl fmt::Display for EdgeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};", self.n)?;
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| {
            let s = if first { " " } else { "," };
            first = false;
            write!(f, "{s}")
        };
        if self.sign == Sign::Minus {
            sep(f)?;
            write!(f, "{{}}")?;
        }
        for e in &self.edges {
            sep(f)?;
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl FromStr for EdgeSet {
    type Err = HypergraphError;

    /// Parses `n; {1,2,3},{3}`. A literal `{}` flips the sign.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let perr = |msg: String| HypergraphError::Parse(msg);
        let (head, body) = s.split_once(';').ok_or_else(|| perr(format!("missing ';' in {s:?}")))?;
        let n: usize = head
            .trim()
            .parse()
            .map_err(|_| perr(format!("bad vertex count {:?}", head.trim())))?;
        let mut set = EdgeSet::new(n)?;
        let mut rest = body.trim();
        while !rest.is_empty() {
            rest = rest.strip_prefix('{').ok_or_else(|| perr(format!("expected '{{' at {rest:?}")))?;
            let close = rest.find('}').ok_or_else(|| perr("unterminated edge".to_string()))?;
            let inner = rest[..close].trim();
            let mut edge = Edge::EMPTY;
            if !inner.is_empty() {
                for tok in inner.split(',') {
                    let label: usize = tok.trim().parse().map_err(|_| perr(format!("bad vertex {:?}", tok.trim())))?;
                    if label == 0 || label > n {
                        return Err(HypergraphError::VertexOutOfRange {
                            vertex: label.wrapping_sub(1),
                            n,
                        });
                    }
                    edge = edge.with(label - 1);
                }
            }
            set.toggle(edge);
            rest = rest[close + 1..].trim_start();
            if let Some(r) = rest.strip_prefix(',') {
                rest = r.trim_start();
                if rest.is_empty() {
                    return Err(perr("trailing ','".to_string()));
                }
            } else if !rest.is_empty() {
                return Err(perr(format!("expected ',' at {rest:?}")));
            }
        }
        Ok(set)
    }
}

/// A vertex color. Colors are shown as letters `A`, `B`, `C`, …
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Color(pub u8);

impl Color {
    pub const A: Color = Color(0);
    pub const B: Color = Color(1);
    pub const C: Color = Color(2);

    pub fn from_letter(c: char) -> Option<Color> {
        c.is_ascii_uppercase().then(|| Color(c as u8 - b'A'))
    }

    pub fn letter(self) -> char {
        (b'A' + self.0) as char
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Color of every vertex, written as a string such as `"ABCA"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Coloring(Vec<Color>);

impl Coloring {
    pub fn new(colors: Vec<Color>) -> Self {
        Coloring(colors)
    }

    /// The cyclic coloring `A, B, C, A, B, C, …` used for linear chains.
    pub fn cyclic(n: usize, k: u8) -> Self {
        Coloring((0..n).map(|i| Color((i % k as usize) as u8)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn color(&self, v: usize) -> Color {
        self.0[v]
    }

    pub fn colors(&self) -> &[Color] {
        &self.0
    }

    /// Distinct colors in ascending order.
    pub fn palette(&self) -> Vec<Color> {
        self.0.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Vertices carrying `c`, ascending.
    pub fn vertices_of(&self, c: Color) -> Vec<usize> {
        (0..self.0.len()).filter(|&v| self.0[v] == c).collect()
    }

    pub fn validate_for(&self, e: &EdgeSet) -> HypergraphResult<()> {
        if self.len() != e.n_vertices() {
            return Err(HypergraphError::ColoringLength {
                expected: e.n_vertices(),
                got: self.len(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Coloring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

impl FromStr for Coloring {
    type Err = HypergraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| Color::from_letter(c).ok_or_else(|| HypergraphError::Parse(format!("bad color {c:?}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(Coloring)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hg(s: &str) -> EdgeSet {
        s.parse().unwrap()
    }

    fn edges(e: &EdgeSet) -> Vec<String> {
        e.edges().map(|e| e.to_string()).collect()
    }

    #[test]
    fn adjacency_of_two_triangle_target() {
        let e = hg("6; {1},{1,2,3},{3},{4},{4,5,6}");
        let adj: Vec<Edge> = e.adjacency(3).unwrap().into_iter().collect();
        assert_eq!(adj, vec![Edge::EMPTY, Edge::from_vertices([4, 5])]);
        assert!(hg("3; ").adjacency(1).unwrap().is_empty());
        assert_eq!(
            hg("3; {1,2,3}").adjacency(2).unwrap().into_iter().collect::<Vec<_>>(),
            vec![Edge::from_vertices([0, 1])]
        );
    }

    #[test]
    fn z_toggles_singletons() {
        let e = hg("3; {1,2,3}");
        assert_eq!(e.apply_z(1).unwrap(), hg("3; {1,2,3},{2}"));
        assert_eq!(hg("3; {1,2,3},{3}").apply_z(2).unwrap(), e);
        assert_eq!(e.apply_z(1).unwrap().apply_z(1).unwrap(), e);
    }

    #[test]
    fn x_toggles_adjacent_edges() {
        let e = hg("3; {1,2,3}");
        let x3 = e.apply_x(2).unwrap();
        assert_eq!(x3, hg("3; {1,2,3},{1,2}"));
        let x2 = x3.apply_x(1).unwrap();
        assert_eq!(x2, hg("3; {1,2,3},{1,2},{1},{1,3}"));
        assert_eq!(x2.apply_x(1).unwrap(), x3);
    }

    #[test]
    fn x_on_singleton_flips_sign() {
        let e = hg("2; {1}");
        let x = e.apply_x(0).unwrap();
        assert_eq!(x.sign(), Sign::Minus);
        assert_eq!(x.edge_count(), 1);
        assert_eq!(x.apply_x(0).unwrap(), e);
    }

    #[test]
    fn cnot_on_two_triangle_target() {
        let e = hg("6; {1},{1,2,3},{3},{4},{4,5,6}");
        let out = e.apply_cnot(0, 3).unwrap();
        assert_eq!(out, hg("6; {1,2,3},{3},{4},{4,5,6},{1,5,6}"));
        assert_eq!(out.apply_cnot(0, 3).unwrap(), e);

        let e = hg("6; {1,2,3},{4},{4,5,6}");
        assert_eq!(e.apply_cnot(0, 3).unwrap(), hg("6; {1,2,3},{4},{4,5,6},{1},{1,5,6}"));
    }

    #[test]
    fn cnot_rejects_same_vertex() {
        assert_eq!(hg("2; {1,2}").apply_cnot(1, 1), Err(HypergraphError::SameVertex(1)));
    }

    #[test]
    fn reduce_merges_two_vertices() {
        // Original labels {1,2,4,5,6} become {1,2,3,4,5} after dropping 3.
        let e = hg("6; {1,2,3},{1,5,6},{4,5,6}");
        let r1 = e.reduce(2, 5).unwrap();
        assert_eq!(r1, hg("5; {1,2,5},{1,4,5},{3,4,5}"));
        // Vertices 2 and 5 of the original are now 2 and 4.
        let r2 = r1.reduce(1, 3).unwrap();
        assert_eq!(r2, hg("4; {2,3,4}"));
    }

    #[test]
    fn reduce_empty_graph() {
        let r = hg("4; ").reduce(0, 3).unwrap();
        assert_eq!(r, hg("3; "));
    }

    #[test]
    fn z_split_branches() {
        let (e0, e1) = hg("3; {1,2,3}").z_split(0).unwrap();
        assert_eq!(e0, hg("2; "));
        assert_eq!(e1, hg("2; {1,2}"));

        let (e0, e1) = hg("3; {2,3}").z_split(0).unwrap();
        assert_eq!(e0, hg("2; {1,2}"));
        assert_eq!(e0, e1);

        let (e0, e1) = hg("1; {1}").z_split(0).unwrap();
        assert_eq!(e0, hg("0; "));
        assert_eq!(e1, hg("0; {}"));
        let (e0, e1) = hg("2; {1}").z_split(0).unwrap();
        assert_eq!(e0, hg("1; "));
        assert_eq!(e1, hg("1; {}"));
        assert_eq!(e1.sign(), Sign::Minus);
    }

    #[test]
    fn regularity_and_coloring() {
        let lin = hg("4; {1,2,3},{2,3,4}");
        let col: Coloring = "ABCA".parse().unwrap();
        assert!(lin.is_k_regular(3));
        assert!(lin.is_colorable(&col));
        assert!(!hg("2; {1,2}").is_k_regular(3));
        assert!(!hg("3; {1,2,3}").is_colorable(&"AAC".parse().unwrap()));
        assert!(!lin.is_colorable(&"ABC".parse().unwrap()));
        assert_eq!(EdgeSet::linear_chain(4).unwrap(), lin);
        assert_eq!(Coloring::cyclic(4, 3), col);
    }

    #[test]
    fn out_of_range_vertices() {
        let e = hg("3; {1,2,3}");
        assert!(matches!(e.apply_x(3), Err(HypergraphError::VertexOutOfRange { vertex: 3, n: 3 })));
        assert!(e.apply_cnot(0, 7).is_err());
        assert!(e.reduce(5, 0).is_err());
        assert!(e.z_split(4).is_err());
        assert!("3; {1,4}".parse::<EdgeSet>().is_err());
    }

    #[test]
    fn canonical_edge_order() {
        let e = hg("6; {3},{1,5,6},{1},{1,2,3}");
        assert_eq!(edges(&e), ["{1}", "{1,2,3}", "{1,5,6}", "{3}"]);
        assert_eq!(e.to_string(), "6; {1},{1,2,3},{1,5,6},{3}");
    }

    #[test]
    fn text_format_handles_sign_and_duplicates() {
        let e = hg("3; {},{1,2,3},{2},{2}");
        assert_eq!(e.sign(), Sign::Minus);
        assert_eq!(e.edge_count(), 1);
        assert_eq!(e.to_string(), "3; {},{1,2,3}");
        assert_eq!(hg(&e.to_string()), e);
        assert_eq!(hg("2;").to_string(), "2;");
        assert!("3 {1}".parse::<EdgeSet>().is_err());
        assert!("3; {1},".parse::<EdgeSet>().is_err());
        assert!("3; {1".parse::<EdgeSet>().is_err());
    }
}
