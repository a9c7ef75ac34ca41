//! Grid-world model.
//!
//! A map is a `width x height` grid of cells. Non-blocked cells are the
//! vertices of the graph; edges join orthogonally adjacent free cells
//! (no diagonals). Some free cells carry roles: endpoints (where agents
//! may park) and pickup / delivery candidates for generated tasks.
//!
//! File format: a header line `width height`, then `height` rows of
//! exactly `width` characters:
//!
//! | char | meaning |
//! |------|---------|
//! | `.`  | free |
//! | `@`  | obstacle |
//! | `e`  | endpoint |
//! | `p`  | pickup candidate |
//! | `d`  | delivery candidate |
//! | `P`  | endpoint + pickup |
//! | `D`  | endpoint + delivery |
//! | `E`  | endpoint + pickup + delivery |
//!
//! Row 0 of the file is `y = 0`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path as FsPath;

use thiserror::Error;

/// Opaque index of a free cell. Ids follow row-major order of free cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("map header missing")]
    MissingHeader,
    #[error("bad map header {0:?}; expected `width height`")]
    BadHeader(String),
    #[error("malformed character {ch:?} at line {line}, column {column}")]
    MalformedChar { line: usize, column: usize, ch: char },
    #[error("ragged grid: line {line} has {found} cells, expected {expected}")]
    RaggedRow { line: usize, expected: usize, found: usize },
    #[error("expected {expected} grid rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("map has no free cells")]
    NoFreeCells,
    #[error("invalid vertex id {0}")]
    InvalidVertex(VertexId),
    #[error("no free cell at ({0}, {1})")]
    NotFree(u32, u32),
    #[error("reading map file: {0}")]
    Io(String),
}

/// Role flags of a single cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CellRoles {
    pub blocked: bool,
    pub endpoint: bool,
    pub pickup: bool,
    pub delivery: bool,
}

impl CellRoles {
    fn from_char(ch: char) -> Option<Self> {
        let mut r = CellRoles::default();
        match ch {
            '.' => {}
            '@' => r.blocked = true,
            'e' => r.endpoint = true,
            'p' => r.pickup = true,
            'd' => r.delivery = true,
            'P' => {
                r.endpoint = true;
                r.pickup = true;
            }
            'D' => {
                r.endpoint = true;
                r.delivery = true;
            }
            'E' => {
                r.endpoint = true;
                r.pickup = true;
                r.delivery = true;
            }
            _ => return None,
        }
        Some(r)
    }

    /// Inverse of the parser. Pickup+delivery without endpoint has no
    /// character of its own and is written as `E`.
    fn to_char(self) -> char {
        match (self.blocked, self.endpoint, self.pickup, self.delivery) {
            (true, ..) => '@',
            (false, false, false, false) => '.',
            (false, true, false, false) => 'e',
            (false, false, true, false) => 'p',
            (false, false, false, true) => 'd',
            (false, true, true, false) => 'P',
            (false, true, false, true) => 'D',
            (false, _, true, true) => 'E',
        }
    }
}

/// Immutable 4-connected grid graph.
#[derive(Debug, Clone)]
pub struct GridMap {
    width: u32,
    height: u32,
    roles: Vec<CellRoles>,
    cell_vertex: Vec<Option<VertexId>>,
    coords: Vec<(u32, u32)>,
    adjacency: Vec<Vec<VertexId>>,
    endpoints: BTreeSet<VertexId>,
    pickups: BTreeSet<VertexId>,
    deliveries: BTreeSet<VertexId>,
}

/// Parses the map text format described in the module docs.
pub fn parse_map(text: &str) -> Result<GridMap, MapError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (_, header) = loop {
        match lines.next() {
            None => return Err(MapError::MissingHeader),
            Some((_, l)) if l.trim().is_empty() => continue,
            Some(x) => break x,
        }
    };
    let dims: Vec<&str> = header.split_whitespace().collect();
    let (width, height) = match dims.as_slice() {
        [w, h] => match (w.parse::<u32>(), h.parse::<u32>()) {
            (Ok(w), Ok(h)) if w > 0 && h > 0 => (w, h),
            _ => return Err(MapError::BadHeader(header.to_string())),
        },
        _ => return Err(MapError::BadHeader(header.to_string())),
    };

    let mut roles = Vec::with_capacity((width * height) as usize);
    let mut rows = 0usize;
    for (line_no, line) in lines {
        if rows == height as usize {
            if line.trim().is_empty() {
                continue;
            }
            return Err(MapError::RowCount { expected: height as usize, found: rows + 1 });
        }
        let found = line.chars().count();
        for (col, ch) in line.chars().enumerate() {
            match CellRoles::from_char(ch) {
                Some(r) => roles.push(r),
                None => return Err(MapError::MalformedChar { line: line_no, column: col + 1, ch }),
            }
        }
        if found != width as usize {
            return Err(MapError::RaggedRow { line: line_no, expected: width as usize, found });
        }
        rows += 1;
    }
    if rows != height as usize {
        return Err(MapError::RowCount { expected: height as usize, found: rows });
    }
    GridMap::from_roles(width, height, roles)
}

impl GridMap {
    /// Builds a map from a row-major role matrix.
    pub fn from_roles(width: u32, height: u32, roles: Vec<CellRoles>) -> Result<Self, MapError> {
        assert_eq!(roles.len(), (width * height) as usize, "role matrix size");
        let mut cell_vertex = vec![None; roles.len()];
        let mut coords = Vec::new();
        let mut endpoints = BTreeSet::new();
        let mut pickups = BTreeSet::new();
        let mut deliveries = BTreeSet::new();
        for y in 0..height {
            for x in 0..width {
                let c = (y * width + x) as usize;
                let r = roles[c];
                if r.blocked {
                    continue;
                }
                let v = VertexId(coords.len() as u32);
                cell_vertex[c] = Some(v);
                coords.push((x, y));
                if r.endpoint {
                    endpoints.insert(v);
                }
                if r.pickup {
                    pickups.insert(v);
                }
                if r.delivery {
                    deliveries.insert(v);
                }
            }
        }
        if coords.is_empty() {
            return Err(MapError::NoFreeCells);
        }
        let mut map = GridMap {
            width,
            height,
            roles,
            cell_vertex,
            coords,
            adjacency: Vec::new(),
            endpoints,
            pickups,
            deliveries,
        };
        map.adjacency = (0..map.coords.len())
            .map(|i| {
                let (x, y) = map.coords[i];
                let mut out = Vec::with_capacity(4);
                // fixed order: up, left, right, down (ascending vertex id)
                let cand = [
                    (y > 0).then(|| (x, y - 1)),
                    (x > 0).then(|| (x - 1, y)),
                    (x + 1 < width).then(|| (x + 1, y)),
                    (y + 1 < height).then(|| (x, y + 1)),
                ];
                for (cx, cy) in cand.into_iter().flatten() {
                    if let Some(u) = map.vertex_at(cx, cy) {
                        out.push(u);
                    }
                }
                out
            })
            .collect();
        Ok(map)
    }

    pub fn from_file(path: impl AsRef<FsPath>) -> Result<Self, MapError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| MapError::Io(format!("{}: {e}", path.as_ref().display())))?;
        parse_map(&text)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.coords.len() as u32).map(VertexId)
    }

    pub fn is_valid(&self, v: VertexId) -> bool {
        v.index() < self.coords.len()
    }

    fn check(&self, v: VertexId) -> Result<(), MapError> {
        if self.is_valid(v) {
            Ok(())
        } else {
            Err(MapError::InvalidVertex(v))
        }
    }

    pub fn vertex_at(&self, x: u32, y: u32) -> Option<VertexId> {
        if x >= self.width || y >= self.height {
            return None;
        }
        self.cell_vertex[(y * self.width + x) as usize]
    }

    /// Like [`GridMap::vertex_at`] but with an error for blocked or
    /// out-of-range cells.
    pub fn vertex(&self, x: u32, y: u32) -> Result<VertexId, MapError> {
        self.vertex_at(x, y).ok_or(MapError::NotFree(x, y))
    }

    /// `(x, y)` of a vertex. Panics on an invalid id.
    pub fn coord(&self, v: VertexId) -> (u32, u32) {
        self.coords[v.index()]
    }

    pub fn roles(&self, x: u32, y: u32) -> CellRoles {
        self.roles[(y * self.width + x) as usize]
    }

    pub fn endpoints(&self) -> &BTreeSet<VertexId> {
        &self.endpoints
    }

    pub fn pickup_candidates(&self) -> &BTreeSet<VertexId> {
        &self.pickups
    }

    pub fn delivery_candidates(&self) -> &BTreeSet<VertexId> {
        &self.deliveries
    }

    pub fn is_endpoint(&self, v: VertexId) -> bool {
        self.endpoints.contains(&v)
    }

    /// Endpoints that are neither pickup nor delivery candidates.
    pub fn parking_endpoints(&self) -> Vec<VertexId> {
        self.endpoints.iter().copied().filter(|v| !self.pickups.contains(v) && !self.deliveries.contains(v)).collect()
    }

    /// Orthogonally adjacent free vertices of `v`.
    pub fn neighbors(&self, v: VertexId) -> Result<&[VertexId], MapError> {
        self.check(v)?;
        Ok(&self.adjacency[v.index()])
    }

    #[inline]
    pub(crate) fn adj(&self, v: VertexId) -> &[VertexId] {
        &self.adjacency[v.index()]
    }

    pub fn manhattan(&self, a: VertexId, b: VertexId) -> Result<u32, MapError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.dist(a, b))
    }

    #[inline]
    pub(crate) fn dist(&self, a: VertexId, b: VertexId) -> u32 {
        let (ax, ay) = self.coords[a.index()];
        let (bx, by) = self.coords[b.index()];
        ax.abs_diff(bx) + ay.abs_diff(by)
    }

    pub fn are_adjacent(&self, a: VertexId, b: VertexId) -> bool {
        self.is_valid(a) && self.is_valid(b) && self.dist(a, b) == 1
    }

    /// Writes the map back in the file format.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(self.roles(x, y).to_char());
            }
            out.push('\n');
        }
        out
    }

    /// Static well-formedness: `|endpoints| >= num_agents` and every pair
    /// of endpoints is connected by a path through no third endpoint.
    pub fn check_well_formed(&self, num_agents: usize) -> WellFormedReport {
        let enough_endpoints = self.endpoints.len() >= num_agents;
        let eps: Vec<VertexId> = self.endpoints.iter().copied().collect();
        let mut disconnected = Vec::new();
        // One BFS per endpoint that never expands through other endpoints;
        // equivalent to a BFS per pair with the other endpoints removed.
        for (i, &a) in eps.iter().enumerate() {
            let reached = self.reach_avoiding_endpoints(a);
            for &b in &eps[i + 1..] {
                if !reached[b.index()] {
                    disconnected.push((a, b));
                }
            }
        }
        WellFormedReport {
            num_agents,
            num_endpoints: self.endpoints.len(),
            enough_endpoints,
            disconnected_pairs: disconnected,
        }
    }

    fn reach_avoiding_endpoints(&self, src: VertexId) -> Vec<bool> {
        let mut seen = vec![false; self.num_vertices()];
        let mut queue = VecDeque::from([src]);
        seen[src.index()] = true;
        while let Some(v) = queue.pop_front() {
            if v != src && self.is_endpoint(v) {
                continue;
            }
            for &u in self.adj(v) {
                if !seen[u.index()] {
                    seen[u.index()] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl std::str::FromStr for GridMap {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_map(s)
    }
}

/// Outcome of [`GridMap::check_well_formed`]. Conditions (i) finite tasks
/// and (iv) finite delays are properties of a run, not of a map, and are
/// reported as assumed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WellFormedReport {
    pub num_agents: usize,
    pub num_endpoints: usize,
    pub enough_endpoints: bool,
    pub disconnected_pairs: Vec<(VertexId, VertexId)>,
}

impl WellFormedReport {
    pub fn endpoints_connected(&self) -> bool {
        self.disconnected_pairs.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.enough_endpoints && self.endpoints_connected()
    }
}

impl fmt::Display for WellFormedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        writeln!(f, "(i)   finite task set: assumed")?;
        writeln!(
            f,
            "(ii)  endpoints >= agents ({} >= {}): {}",
            self.num_endpoints,
            self.num_agents,
            verdict(self.enough_endpoints)
        )?;
        write!(f, "(iii) endpoint pairs connected avoiding other endpoints: {}", verdict(self.endpoints_connected()))?;
        if !self.disconnected_pairs.is_empty() {
            write!(
                f,
                " ({} disconnected pairs, first {:?})",
                self.disconnected_pairs.len(),
                self.disconnected_pairs[0]
            )?;
        }
        writeln!(f)?;
        writeln!(f, "(iv)  finite delays per agent: assumed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = include_str!("../assets/maps/small_warehouse.map");

    #[test]
    fn single_endpoint_cell() {
        let m = parse_map("1 1\ne\n").unwrap();
        assert_eq!(m.num_vertices(), 1);
        assert!(m.is_endpoint(VertexId(0)));
        assert!(m.neighbors(VertexId(0)).unwrap().is_empty());
    }

    #[test]
    fn small_warehouse_parses() {
        let m = parse_map(SMALL).unwrap();
        assert_eq!((m.width(), m.height()), (15, 13));
        assert!(m.endpoints().len() >= 4);
        assert!(m.check_well_formed(8).passed());
    }

    #[test]
    fn ring_around_center_obstacle() {
        let m = parse_map("3 3\n...\n.@.\n...\n").unwrap();
        assert_eq!(m.num_vertices(), 8);
        for v in m.vertices() {
            // every ring cell has exactly two ring neighbours
            assert_eq!(m.neighbors(v).unwrap().len(), 2, "{v}");
        }
    }

    #[test]
    fn neighbor_counts() {
        let m = parse_map("2 2\n..\n..\n").unwrap();
        assert_eq!(m.neighbors(m.vertex(0, 0).unwrap()).unwrap().len(), 2);
        let m = parse_map("3 3\n...\n...\n...\n").unwrap();
        assert_eq!(m.neighbors(m.vertex(1, 1).unwrap()).unwrap().len(), 4);
        let m = parse_map("3 3\n...\n.@.\n...\n").unwrap();
        let top_mid = m.vertex(1, 0).unwrap();
        let ns: Vec<_> = m.neighbors(top_mid).unwrap().iter().map(|&u| m.coord(u)).collect();
        assert_eq!(ns, vec![(0, 0), (2, 0)]);
        assert!(matches!(m.neighbors(VertexId(99)), Err(MapError::InvalidVertex(_))));
    }

    #[test]
    fn manhattan_distances() {
        let m = parse_map("3 4\n...\n...\n...\n...\n").unwrap();
        let a = m.vertex(0, 0).unwrap();
        let b = m.vertex(2, 3).unwrap();
        assert_eq!(m.manhattan(a, a).unwrap(), 0);
        assert_eq!(m.manhattan(a, b).unwrap(), 5);
        assert_eq!(m.manhattan(b, a).unwrap(), 5);
    }

    #[test]
    fn parse_errors_are_distinct() {
        assert!(matches!(parse_map("3 1\n.x.\n"), Err(MapError::MalformedChar { ch: 'x', .. })));
        assert!(matches!(parse_map("3 2\n...\n..\n"), Err(MapError::RaggedRow { line: 3, .. })));
        assert_eq!(parse_map("2 1\n@@\n").unwrap_err(), MapError::NoFreeCells);
        assert!(matches!(parse_map("3\n...\n"), Err(MapError::BadHeader(_))));
        assert!(matches!(parse_map("3 2\n...\n"), Err(MapError::RowCount { expected: 2, found: 1 })));
        assert_eq!(parse_map("").unwrap_err(), MapError::MissingHeader);
    }

    #[test]
    fn well_formed_opposite_corners() {
        let m = parse_map("3 3\ne..\n...\n..e\n").unwrap();
        let r = m.check_well_formed(2);
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn too_few_endpoints() {
        let m = parse_map("4 1\neeee\n").unwrap();
        let r = m.check_well_formed(5);
        assert!(!r.enough_endpoints);
        assert!(!r.passed());
    }

    #[test]
    fn corridor_through_endpoint_fails_connectivity() {
        let m = parse_map("5 1\ne.e.e\n").unwrap();
        let r = m.check_well_formed(2);
        assert!(r.enough_endpoints);
        assert!(!r.endpoints_connected());
        let (a, b) = r.disconnected_pairs[0];
        assert_eq!((m.coord(a), m.coord(b)), ((0, 0), (4, 0)));
    }

    #[test]
    fn text_round_trip() {
        let m = parse_map(SMALL).unwrap();
        assert_eq!(m.to_text(), SMALL);
    }
}
