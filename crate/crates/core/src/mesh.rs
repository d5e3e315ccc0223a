//! Structured quadrilateral mesh, its skeleton, and the nested-dissection
//! edge hierarchy with lumping maps.
//!
//! The mesh has `n = 2^N` elements per side. Interior edges are partitioned
//! into separator fronts by recursive quadrant subdivision: the cross of a
//! `2^k x 2^k` element block is the level-`k` front, with four arms of
//! `2^{k-1}` fine edges each. Lumping merges each arm into a single long edge.

use crate::error::HdgError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };

    pub fn square(side: f64) -> Rect {
        Rect { x0: 0.0, y0: 0.0, x1: side, y1: side }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Interior,
    Boundary,
}

/// One fine skeleton edge.
#[derive(Debug, Clone)]
pub struct SkeletonEdge {
    pub id: usize,
    pub orientation: Orientation,
    /// For vertical edges: (grid-line index gx, element row j).
    /// For horizontal edges: (element column i, grid-line index gy).
    pub grid: (usize, usize),
    pub kind: EdgeKind,
    /// `(level, front, arm, position-within-arm)`, interior edges only.
    pub nd: Option<(usize, usize, usize, usize)>,
}

/// A nested-dissection separator front: the cross of one quadtree cell.
#[derive(Debug, Clone)]
pub struct Front {
    pub level: usize,
    /// Index into `SkeletonHierarchy::fronts`.
    pub id: usize,
    /// Arms in order south, north, west, east; edges ordered by increasing
    /// coordinate along the arm.
    pub arms: [Vec<usize>; 4],
    /// Element-block origin and size of the owning quadtree cell.
    pub cell_origin: (usize, usize),
    pub cell_size: usize,
}

impl Front {
    pub fn edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.arms.iter().flatten().copied()
    }
}

#[derive(Debug, Clone)]
pub struct StructuredMesh {
    /// Elements per side, `= 2^N`.
    pub n_per_side: usize,
    /// Level count `N`.
    pub levels: usize,
    pub domain: Rect,
    /// Element width (elements are square).
    pub h: f64,
    pub edges: Vec<SkeletonEdge>,
}

impl StructuredMesh {
    pub fn element_count(&self) -> usize {
        self.n_per_side * self.n_per_side
    }

    pub fn element_id(&self, i: usize, j: usize) -> usize {
        j * self.n_per_side + i
    }

    /// Element column/row from id.
    pub fn element_coords(&self, elem: usize) -> (usize, usize) {
        (elem % self.n_per_side, elem / self.n_per_side)
    }

    /// Lower-left corner of an element.
    pub fn element_origin(&self, elem: usize) -> (f64, f64) {
        let (i, j) = self.element_coords(elem);
        (self.domain.x0 + i as f64 * self.h, self.domain.y0 + j as f64 * self.h)
    }

    pub fn vertical_edge_id(&self, gx: usize, j: usize) -> usize {
        gx * self.n_per_side + j
    }

    pub fn horizontal_edge_id(&self, i: usize, gy: usize) -> usize {
        (self.n_per_side + 1) * self.n_per_side + gy * self.n_per_side + i
    }

    /// Faces of an element in order south, east, north, west.
    pub fn element_faces(&self, elem: usize) -> [usize; 4] {
        let (i, j) = self.element_coords(elem);
        [
            self.horizontal_edge_id(i, j),
            self.vertical_edge_id(i + 1, j),
            self.horizontal_edge_id(i, j + 1),
            self.vertical_edge_id(i, j),
        ]
    }

    /// Elements adjacent to an edge (one for boundary edges).
    pub fn edge_elements(&self, edge: usize) -> Vec<usize> {
        let n = self.n_per_side;
        let e = &self.edges[edge];
        let mut out = Vec::with_capacity(2);
        match e.orientation {
            Orientation::Vertical => {
                let (gx, j) = e.grid;
                if gx > 0 {
                    out.push(self.element_id(gx - 1, j));
                }
                if gx < n {
                    out.push(self.element_id(gx, j));
                }
            }
            Orientation::Horizontal => {
                let (i, gy) = e.grid;
                if gy > 0 {
                    out.push(self.element_id(i, gy - 1));
                }
                if gy < n {
                    out.push(self.element_id(i, gy));
                }
            }
        }
        out
    }

    /// Midpoint of an edge.
    pub fn edge_midpoint(&self, edge: usize) -> (f64, f64) {
        let e = &self.edges[edge];
        match e.orientation {
            Orientation::Vertical => {
                let (gx, j) = e.grid;
                (
                    self.domain.x0 + gx as f64 * self.h,
                    self.domain.y0 + (j as f64 + 0.5) * self.h,
                )
            }
            Orientation::Horizontal => {
                let (i, gy) = e.grid;
                (
                    self.domain.x0 + (i as f64 + 0.5) * self.h,
                    self.domain.y0 + gy as f64 * self.h,
                )
            }
        }
    }

    /// Endpoints of an edge, ordered by increasing coordinate.
    pub fn edge_endpoints(&self, edge: usize) -> ((f64, f64), (f64, f64)) {
        let e = &self.edges[edge];
        match e.orientation {
            Orientation::Vertical => {
                let (gx, j) = e.grid;
                let x = self.domain.x0 + gx as f64 * self.h;
                let y = self.domain.y0 + j as f64 * self.h;
                ((x, y), (x, y + self.h))
            }
            Orientation::Horizontal => {
                let (i, gy) = e.grid;
                let x = self.domain.x0 + i as f64 * self.h;
                let y = self.domain.y0 + gy as f64 * self.h;
                ((x, y), (x + self.h, y))
            }
        }
    }

    /// Outward unit normal of a boundary edge.
    pub fn boundary_normal(&self, edge: usize) -> (f64, f64) {
        let e = &self.edges[edge];
        let n = self.n_per_side;
        match e.orientation {
            Orientation::Vertical => {
                let (gx, _) = e.grid;
                if gx == 0 {
                    (-1.0, 0.0)
                } else {
                    debug_assert_eq!(gx, n);
                    (1.0, 0.0)
                }
            }
            Orientation::Horizontal => {
                let (_, gy) = e.grid;
                if gy == 0 {
                    (0.0, -1.0)
                } else {
                    debug_assert_eq!(gy, n);
                    (0.0, 1.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SkeletonHierarchy {
    pub fronts: Vec<Front>,
    /// Front indices grouped by level (1-based level, index 0 unused).
    pub fronts_by_level: Vec<Vec<usize>>,
}

impl SkeletonHierarchy {
    pub fn front_count(&self, level: usize) -> usize {
        self.fronts_by_level.get(level).map_or(0, |v| v.len())
    }
}

/// Build the structured mesh and its ND hierarchy.
///
/// `n = 2^levels` elements per side; rejects `levels < 2`.
pub fn build_hierarchy(
    levels: usize,
    domain: Rect,
) -> Result<(StructuredMesh, SkeletonHierarchy), HdgError> {
    if levels < 2 {
        return Err(HdgError::InvalidMesh(format!(
            "level count must be >= 2, got {levels}"
        )));
    }
    let n = 1usize << levels;
    let w = domain.x1 - domain.x0;
    let hgt = domain.y1 - domain.y0;
    if (w - hgt).abs() > 1e-12 * w.abs().max(1.0) || w <= 0.0 {
        return Err(HdgError::InvalidMesh("domain must be a square".into()));
    }
    let h = w / n as f64;

    let mut edges = Vec::with_capacity(2 * n * (n + 1));
    for gx in 0..=n {
        for j in 0..n {
            let kind = if gx == 0 || gx == n { EdgeKind::Boundary } else { EdgeKind::Interior };
            edges.push(SkeletonEdge {
                id: edges.len(),
                orientation: Orientation::Vertical,
                grid: (gx, j),
                kind,
                nd: None,
            });
        }
    }
    for gy in 0..=n {
        for i in 0..n {
            let kind = if gy == 0 || gy == n { EdgeKind::Boundary } else { EdgeKind::Interior };
            edges.push(SkeletonEdge {
                id: edges.len(),
                orientation: Orientation::Horizontal,
                grid: (i, gy),
                kind,
                nd: None,
            });
        }
    }

    let mut mesh = StructuredMesh { n_per_side: n, levels, domain, h, edges };

    // Recursive quadrant subdivision. Cells are visited top-down but fronts are
    // recorded per level so the elimination order is level-ascending.
    let mut fronts: Vec<Front> = Vec::new();
    let mut stack = vec![(0usize, 0usize, n, levels)];
    while let Some((cx, cy, s, k)) = stack.pop() {
        let half = s / 2;
        let mut arms: [Vec<usize>; 4] = Default::default();
        // south/north arms: vertical edges on grid line cx+half
        for j in cy..cy + half {
            arms[0].push(mesh.vertical_edge_id(cx + half, j));
        }
        for j in cy + half..cy + s {
            arms[1].push(mesh.vertical_edge_id(cx + half, j));
        }
        // west/east arms: horizontal edges on grid line cy+half
        for i in cx..cx + half {
            arms[2].push(mesh.horizontal_edge_id(i, cy + half));
        }
        for i in cx + half..cx + s {
            arms[3].push(mesh.horizontal_edge_id(i, cy + half));
        }
        fronts.push(Front {
            level: k,
            id: fronts.len(),
            arms,
            cell_origin: (cx, cy),
            cell_size: s,
        });
        if k > 1 {
            stack.push((cx, cy, half, k - 1));
            stack.push((cx + half, cy, half, k - 1));
            stack.push((cx, cy + half, half, k - 1));
            stack.push((cx + half, cy + half, half, k - 1));
        }
    }

    let mut fronts_by_level = vec![Vec::new(); levels + 1];
    for f in &fronts {
        fronts_by_level[f.level].push(f.id);
        for (arm, edges_in_arm) in f.arms.iter().enumerate() {
            for (pos, &eid) in edges_in_arm.iter().enumerate() {
                let slot = &mut mesh.edges[eid].nd;
                assert!(slot.is_none(), "edge assigned to two fronts");
                *slot = Some((f.level, f.id, arm, pos));
            }
        }
    }
    for lv in &mut fronts_by_level {
        lv.sort_unstable();
    }

    for e in &mesh.edges {
        match e.kind {
            EdgeKind::Interior => assert!(e.nd.is_some(), "interior edge not covered by a front"),
            EdgeKind::Boundary => assert!(e.nd.is_none()),
        }
    }

    Ok((mesh, SkeletonHierarchy { fronts, fronts_by_level }))
}

/// One lumped edge: a whole separator arm merged into a single long edge.
#[derive(Debug, Clone)]
pub struct LumpedEdge {
    pub id: usize,
    pub front: usize,
    pub level: usize,
    pub arm: usize,
    /// Constituent fine edges, ordered along the arm.
    pub fine_edges: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct LumpingMap {
    pub lumped: Vec<LumpedEdge>,
    /// fine edge id -> lumped edge id (interior edges only).
    pub fine_to_lumped: Vec<Option<usize>>,
    /// lumped edge ids grouped per front, 4 per front.
    pub front_lumped: Vec<[usize; 4]>,
}

/// Build the lumping map: each arm of each front becomes one lumped edge.
pub fn build_lumping_map(mesh: &StructuredMesh, hier: &SkeletonHierarchy) -> LumpingMap {
    let mut lumped = Vec::with_capacity(4 * hier.fronts.len());
    let mut fine_to_lumped = vec![None; mesh.edges.len()];
    let mut front_lumped = Vec::with_capacity(hier.fronts.len());
    for f in &hier.fronts {
        let mut ids = [0usize; 4];
        for (arm, fine) in f.arms.iter().enumerate() {
            let id = lumped.len();
            for &e in fine {
                fine_to_lumped[e] = Some(id);
            }
            lumped.push(LumpedEdge {
                id,
                front: f.id,
                level: f.level,
                arm,
                fine_edges: fine.clone(),
            });
            ids[arm] = id;
        }
        front_lumped.push(ids);
    }
    LumpingMap { lumped, fine_to_lumped, front_lumped }
}
