//! Cutting faces along superpixel boundaries.
//!
//! Each face is handled in texel space (`X = u W`, `Y = v H`), where the
//! boundaries of a piecewise-constant label map are unit grid edges between
//! texels of different labels. Those edges are clipped to the triangle, the
//! triangle outline and the clipped edges form a planar graph, and every
//! bounded face of that graph is one single-label polygon, which is then ear
//! clipped. Points on original edges are placed with a parameter measured
//! from the lower vertex id, so neighbouring faces create identical vertices.

use std::collections::{BTreeSet, HashMap};

use super::{LabelMap, RemeshError};
use crate::mesh::Mesh;
use crate::{Vec2, Vec3};

/// Parameter tolerance for merging points along one edge.
const T_MERGE: f64 = 1e-12;
/// Distance (texels) under which a grid point counts as lying on the outline.
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RemeshReport {
    /// Original faces that were cut.
    pub split_faces: Vec<usize>,
    /// Faces whose label regions could not be cut into simple polygons
    /// (a region enclosed inside the face, or a failed ear clip); passed through.
    pub non_simple: Vec<usize>,
    pub new_vertices: usize,
}

#[derive(Debug, Clone)]
pub struct RemeshResult {
    pub mesh: Mesh,
    /// Superpixel label of every output face.
    pub face_labels: Vec<u32>,
    /// Original face each output face came from.
    pub source_face: Vec<usize>,
    pub report: RemeshReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NodeKind {
    Corner(usize),
    /// Point on local edge `e` at canonical parameter `t`.
    Edge(usize, f64),
    Interior,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    p: Vec2,
    kind: NodeKind,
}

/// Planar graph of one face in texel space.
struct FaceGraph {
    nodes: Vec<Node>,
    edges: BTreeSet<(usize, usize)>,
    interior: HashMap<(i64, i64), usize>,
    /// Corner texel positions.
    corners: [Vec2; 3],
    /// Canonical endpoints (lower vertex id first) of each local edge.
    canon: [(Vec2, Vec2); 3],
    /// Whether the canonical direction of local edge `e` runs from corner `e` to `e + 1`.
    forward: [bool; 3],
}

impl FaceGraph {
    fn new(corners: [Vec2; 3], ids: [u32; 3]) -> Self {
        let mut canon = [(Vec2::zeros(), Vec2::zeros()); 3];
        let mut forward = [true; 3];
        for e in 0..3 {
            let (a, b) = (e, (e + 1) % 3);
            forward[e] = ids[a] < ids[b];
            canon[e] = if forward[e] {
                (corners[a], corners[b])
            } else {
                (corners[b], corners[a])
            };
        }
        let nodes = (0..3)
            .map(|c| Node {
                p: corners[c],
                kind: NodeKind::Corner(c),
            })
            .collect();
        Self {
            nodes,
            edges: BTreeSet::new(),
            interior: HashMap::new(),
            corners,
            canon,
            forward,
        }
    }

    /// Corner index at the canonical start (`t = 0`) or end (`t = 1`) of edge `e`.
    fn edge_corner(&self, e: usize, end: bool) -> usize {
        let (a, b) = (e, (e + 1) % 3);
        match (self.forward[e], end) {
            (true, false) | (false, true) => a,
            _ => b,
        }
    }

    fn edge_node(&mut self, e: usize, t: f64) -> usize {
        if t <= T_MERGE {
            return self.edge_corner(e, false);
        }
        if t >= 1.0 - T_MERGE {
            return self.edge_corner(e, true);
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let NodeKind::Edge(ne, nt) = n.kind {
                if ne == e && (nt - t).abs() <= T_MERGE {
                    return i;
                }
            }
        }
        let (a, b) = self.canon[e];
        self.nodes.push(Node {
            p: a + (b - a) * t,
            kind: NodeKind::Edge(e, t),
        });
        self.nodes.len() - 1
    }

    fn interior_node(&mut self, x: i64, y: i64) -> usize {
        if let Some(&i) = self.interior.get(&(x, y)) {
            return i;
        }
        self.nodes.push(Node {
            p: Vec2::new(x as f64, y as f64),
            kind: NodeKind::Interior,
        });
        let i = self.nodes.len() - 1;
        self.interior.insert((x, y), i);
        i
    }

    fn connect(&mut self, a: usize, b: usize) {
        if a != b {
            self.edges.insert((a.min(b), a.max(b)));
        }
    }

    /// Where the grid line `axis = c` (axis 0: `X = c`, axis 1: `Y = c`) meets
    /// the outline: `(coordinate along the line, hit)` at both ends, or `None`
    /// if the line misses the interior or runs along an edge.
    fn line_span(&self, axis: usize, c: f64) -> Option<((f64, Hit), (f64, Hit))> {
        let other = 1 - axis;
        let mut hits: Vec<(f64, Hit)> = Vec::new();
        for e in 0..3 {
            let (a, b) = self.canon[e];
            let (da, db) = (a[axis] - c, b[axis] - c);
            if da == 0.0 && db == 0.0 {
                return None;
            }
            if da == 0.0 || db == 0.0 {
                let corner = self.edge_corner(e, da != 0.0);
                hits.push((self.corners[corner][other], Hit::Corner(corner)));
            } else if (da < 0.0) != (db < 0.0) {
                let t = (c - a[axis]) / (b[axis] - a[axis]);
                hits.push((a[other] + (b[other] - a[other]) * t, Hit::Edge(e, t)));
            }
        }
        let lo = *hits.iter().min_by(|a, b| a.0.total_cmp(&b.0))?;
        let hi = *hits.iter().max_by(|a, b| a.0.total_cmp(&b.0))?;
        if hi.0 - lo.0 <= SNAP {
            return None;
        }
        Some((lo, hi))
    }

    fn hit_node(&mut self, hit: Hit) -> usize {
        match hit {
            Hit::Corner(c) => c,
            Hit::Edge(e, t) => self.edge_node(e, t),
        }
    }

    /// Adds the label-boundary edges lying on grid line `axis = c`.
    fn add_line(&mut self, labels: &LabelMap, axis: usize, c: i64) {
        let Some(((s0, h0), (s1, h1))) = self.line_span(axis, c as f64) else {
            return;
        };
        for j in s0.floor() as i64..s1.ceil() as i64 {
            let differs = if axis == 0 {
                labels.clamped(c - 1, j) != labels.clamped(c, j)
            } else {
                labels.clamped(j, c - 1) != labels.clamped(j, c)
            };
            if !differs {
                continue;
            }
            let lo = (j as f64).max(s0);
            let hi = ((j + 1) as f64).min(s1);
            if hi - lo <= SNAP {
                continue;
            }
            let grid = |g: &mut Self, s: i64| {
                if axis == 0 {
                    g.interior_node(c, s)
                } else {
                    g.interior_node(s, c)
                }
            };
            let a = if lo - s0 <= SNAP {
                self.hit_node(h0)
            } else {
                grid(self, j)
            };
            let b = if s1 - hi <= SNAP {
                self.hit_node(h1)
            } else {
                grid(self, j + 1)
            };
            self.connect(a, b);
        }
    }

    fn add_outline(&mut self) {
        for e in 0..3 {
            let mut on: Vec<(f64, usize)> = vec![
                (0.0, self.edge_corner(e, false)),
                (1.0, self.edge_corner(e, true)),
            ];
            for (i, n) in self.nodes.iter().enumerate() {
                if let NodeKind::Edge(ne, t) = n.kind {
                    if ne == e {
                        on.push((t, i));
                    }
                }
            }
            on.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in on.windows(2) {
                self.connect(w[0].1, w[1].1);
            }
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Drops interior nodes sitting in the middle of a straight boundary run.
    fn merge_collinear(&mut self) {
        loop {
            let adj = self.adjacency();
            let victim = (0..self.nodes.len()).find(|&i| {
                if self.nodes[i].kind != NodeKind::Interior || adj[i].len() != 2 {
                    return false;
                }
                let p = self.nodes[i].p;
                let u = self.nodes[adj[i][0]].p - p;
                let v = self.nodes[adj[i][1]].p - p;
                u.perp(&v).abs() <= 1e-12 * u.norm() * v.norm() && u.dot(&v) < 0.0
            });
            let Some(i) = victim else {
                return;
            };
            let (a, b) = (adj[i][0], adj[i][1]);
            self.edges.remove(&(a.min(i), a.max(i)));
            self.edges.remove(&(b.min(i), b.max(i)));
            self.connect(a, b);
        }
    }

    fn component_count(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = vec![false; self.nodes.len()];
        let mut count = 0;
        for s in 0..self.nodes.len() {
            if seen[s] || adj[s].is_empty() {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    /// Bounded faces of the planar graph as counter-clockwise node cycles.
    fn faces(&self) -> Vec<Vec<usize>> {
        let mut adj = self.adjacency();
        for (v, list) in adj.iter_mut().enumerate() {
            let p = self.nodes[v].p;
            list.sort_by(|&a, &b| {
                let da = self.nodes[a].p - p;
                let db = self.nodes[b].p - p;
                da.y.atan2(da.x).total_cmp(&db.y.atan2(db.x))
            });
        }
        let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut out = Vec::new();
        for &(a, b) in &self.edges {
            for start in [(a, b), (b, a)] {
                if used.contains(&start) {
                    continue;
                }
                let mut cycle = Vec::new();
                let (mut u, mut v) = start;
                loop {
                    used.insert((u, v));
                    cycle.push(u);
                    let around = &adj[v];
                    let back = around
                        .iter()
                        .position(|&w| w == u)
                        .expect("undirected edge");
                    // turn as far clockwise as possible: keeps the face on the left
                    let next = around[(back + around.len() - 1) % around.len()];
                    u = v;
                    v = next;
                    if (u, v) == start || cycle.len() > 4 * self.edges.len() + 8 {
                        break;
                    }
                }
                if self.signed_area(&cycle) > 0.0 {
                    out.push(cycle);
                }
            }
        }
        out
    }

    fn signed_area(&self, cycle: &[usize]) -> f64 {
        let mut a = 0.0;
        for i in 0..cycle.len() {
            let p = self.nodes[cycle[i]].p;
            let q = self.nodes[cycle[(i + 1) % cycle.len()]].p;
            a += p.perp(&q);
        }
        a / 2.0
    }
}

fn cross(o: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (a - o).perp(&(b - o))
}

fn min_angle(a: &Vec2, b: &Vec2, c: &Vec2) -> f64 {
    let ang = |p: &Vec2, q: &Vec2, r: &Vec2| {
        let u = q - p;
        let v = r - p;
        u.perp(&v).abs().atan2(u.dot(&v))
    };
    ang(a, b, c).min(ang(b, c, a)).min(ang(c, a, b))
}

/// Ear clipping of a simple counter-clockwise polygon, choosing at each step
/// the ear with the largest minimum angle. Returns `None` if no ear exists.
fn ear_clip(points: &[Vec2], poly: &[usize]) -> Option<Vec<[usize; 3]>> {
    let mut ring: Vec<usize> = poly.to_vec();
    let mut tris = Vec::with_capacity(ring.len().saturating_sub(2));
    let scale = poly.iter().map(|&i| points[i].norm()).fold(1.0, f64::max);
    let eps = 1e-12 * scale * scale;
    while ring.len() > 3 {
        let n = ring.len();
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            let (a, b, c) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            let (pa, pb, pc) = (points[a], points[b], points[c]);
            if cross(&pa, &pb, &pc) <= eps {
                continue;
            }
            let blocked = ring.iter().any(|&j| {
                if j == a || j == b || j == c {
                    return false;
                }
                let p = points[j];
                cross(&pa, &pb, &p) >= -eps
                    && cross(&pb, &pc, &p) >= -eps
                    && cross(&pc, &pa, &p) >= -eps
            });
            if blocked {
                continue;
            }
            let q = min_angle(&pa, &pb, &pc);
            if best.is_none_or(|(_, bq)| q > bq) {
                best = Some((i, q));
            }
        }
        let (i, _) = best?;
        let n = ring.len();
        tris.push([ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]]);
        ring.remove(i);
    }
    if cross(&points[ring[0]], &points[ring[1]], &points[ring[2]]) <= eps {
        return None;
    }
    tris.push([ring[0], ring[1], ring[2]]);
    Some(tris)
}

/// Output vertex table with deduplication of points on original edges.
struct Builder<'m> {
    mesh: &'m Mesh,
    positions: Vec<Vec3>,
    normals: Vec<Vec3>,
    uvs: Vec<Vec2>,
    on_edge: HashMap<(u32, u32, u64), u32>,
}

impl<'m> Builder<'m> {
    fn push(&mut self, p: Vec3, n: Vec3, uv: Vec2) -> u32 {
        self.positions.push(p);
        self.normals.push(n.try_normalize(0.0).unwrap_or(Vec3::z()));
        self.uvs
            .push(Vec2::new(uv.x.clamp(0.0, 1.0), uv.y.clamp(0.0, 1.0)));
        (self.positions.len() - 1) as u32
    }

    fn edge_vertex(&mut self, lo: u32, hi: u32, t: f64) -> u32 {
        if let Some(&v) = self.on_edge.get(&(lo, hi, t.to_bits())) {
            return v;
        }
        let m = self.mesh;
        let (a, b) = (lo as usize, hi as usize);
        let p = m.positions()[a] * (1.0 - t) + m.positions()[b] * t;
        let n = m.normals()[a] * (1.0 - t) + m.normals()[b] * t;
        let uv = m.uvs()[a] * (1.0 - t) + m.uvs()[b] * t;
        let v = self.push(p, n, uv);
        self.on_edge.insert((lo, hi, t.to_bits()), v);
        v
    }

    fn interior_vertex(&mut self, face: [u32; 3], bary: [f64; 3]) -> u32 {
        let m = self.mesh;
        let mut p = Vec3::zeros();
        let mut n = Vec3::zeros();
        let mut uv = Vec2::zeros();
        for c in 0..3 {
            let v = face[c] as usize;
            p += m.positions()[v] * bary[c];
            n += m.normals()[v] * bary[c];
            uv += m.uvs()[v] * bary[c];
        }
        self.push(p, n, uv)
    }
}

fn barycentric(tri: &[Vec2; 3], p: &Vec2) -> [f64; 3] {
    let area = cross(&tri[0], &tri[1], &tri[2]);
    let l1 = cross(&tri[0], p, &tri[2]) / area;
    let l2 = cross(&tri[0], &tri[1], p) / area;
    [1.0 - l1 - l2, l1, l2]
}

fn non_degenerate(a: &Vec3, b: &Vec3, c: &Vec3) -> bool {
    let longest = (b - a)
        .norm_squared()
        .max((c - b).norm_squared())
        .max((a - c).norm_squared());
    (b - a).cross(&(c - a)).norm() > 1e-12 * longest
}

#[derive(Debug, Clone, Copy)]
enum Hit {
    Corner(usize),
    Edge(usize, f64),
}

enum Split {
    Keep,
    NonSimple,
    Pieces(Vec<([Vec2; 3], [NodeKind; 3], u32)>),
}

fn split_face(labels: &LabelMap, corners: [Vec2; 3], ids: [u32; 3]) -> Split {
    let mut g = FaceGraph::new(corners, ids);
    let (w, h) = (labels.width as i64, labels.height as i64);
    let min = corners
        .iter()
        .fold(Vec2::repeat(f64::INFINITY), |m, p| m.inf(p));
    let max = corners
        .iter()
        .fold(Vec2::repeat(f64::NEG_INFINITY), |m, p| m.sup(p));
    // interior grid lines only: texels outside the atlas repeat its border labels
    for x in (min.x.ceil() as i64).max(1)..=(max.x.floor() as i64).min(w - 1) {
        g.add_line(labels, 0, x);
    }
    for y in (min.y.ceil() as i64).max(1)..=(max.y.floor() as i64).min(h - 1) {
        g.add_line(labels, 1, y);
    }
    if g.edges.is_empty() {
        return Split::Keep;
    }
    g.add_outline();
    g.merge_collinear();
    if g.component_count() != 1 {
        return Split::NonSimple;
    }
    let faces = g.faces();
    let total: f64 = faces.iter().map(|f| g.signed_area(f)).sum();
    let tri_area = cross(&corners[0], &corners[1], &corners[2]).abs() / 2.0;
    if (total - tri_area).abs() > 1e-9 * tri_area.max(1.0) {
        return Split::NonSimple;
    }
    if faces.len() == 1 {
        return Split::Keep;
    }
    let points: Vec<Vec2> = g.nodes.iter().map(|n| n.p).collect();
    let mut out = Vec::new();
    for f in &faces {
        let mut seen = BTreeSet::new();
        if !f.iter().all(|v| seen.insert(*v)) {
            return Split::NonSimple;
        }
        let Some(tris) = ear_clip(&points, f) else {
            return Split::NonSimple;
        };
        let c = (points[tris[0][0]] + points[tris[0][1]] + points[tris[0][2]]) / 3.0;
        let label = labels.clamped(c.x.floor() as i64, c.y.floor() as i64);
        for t in tris {
            out.push((
                [points[t[0]], points[t[1]], points[t[2]]],
                [g.nodes[t[0]].kind, g.nodes[t[1]].kind, g.nodes[t[2]].kind],
                label,
            ));
        }
    }
    Split::Pieces(out)
}

/// Splits every face whose texture triangle spans several superpixels.
/// Original vertices keep their indices; new vertices are appended.
pub fn remesh(mesh: &Mesh, labels: &LabelMap) -> Result<RemeshResult, RemeshError> {
    labels.validate()?;
    let scale = Vec2::new(labels.width as f64, labels.height as f64);
    let texel = |uv: &Vec2| uv.component_mul(&scale);
    let mut b = Builder {
        mesh,
        positions: mesh.positions().to_vec(),
        normals: mesh.normals().to_vec(),
        uvs: mesh.uvs().to_vec(),
        on_edge: HashMap::new(),
    };
    let mut faces = Vec::with_capacity(mesh.face_count());
    let mut face_labels = Vec::with_capacity(mesh.face_count());
    let mut source_face = Vec::with_capacity(mesh.face_count());
    let mut report = RemeshReport::default();
    for (fi, &f) in mesh.faces().iter().enumerate() {
        let uv = f.map(|v| mesh.uvs()[v as usize]);
        let keep_label = labels.at_uv(&((uv[0] + uv[1] + uv[2]) / 3.0));
        let corners = uv.map(|p| texel(&p));
        let orient = cross(&corners[0], &corners[1], &corners[2]);
        let split = if orient == 0.0 {
            Split::Keep
        } else {
            split_face(labels, corners, f)
        };
        let pieces = match split {
            Split::Keep => None,
            Split::NonSimple => {
                report.non_simple.push(fi);
                None
            }
            Split::Pieces(p) => Some(p),
        };
        let Some(pieces) = pieces else {
            faces.push(f);
            face_labels.push(keep_label);
            source_face.push(fi);
            continue;
        };
        let mark = b.positions.len();
        let mut new_faces = Vec::with_capacity(pieces.len());
        for (pts, kinds, label) in &pieces {
            let mut tri = [0u32; 3];
            for c in 0..3 {
                tri[c] = match kinds[c] {
                    NodeKind::Corner(k) => f[k],
                    NodeKind::Edge(e, t) => {
                        let (a, z) = (f[e], f[(e + 1) % 3]);
                        b.edge_vertex(a.min(z), a.max(z), t)
                    }
                    NodeKind::Interior => b.interior_vertex(f, barycentric(&corners, &pts[c])),
                };
            }
            if orient < 0.0 {
                tri.swap(1, 2);
            }
            new_faces.push((tri, *label));
        }
        let ok = new_faces.iter().all(|(t, _)| {
            let p = t.map(|v| b.positions[v as usize]);
            non_degenerate(&p[0], &p[1], &p[2])
        });
        if !ok {
            // roll back vertices created for this face
            b.positions.truncate(mark);
            b.normals.truncate(mark);
            b.uvs.truncate(mark);
            b.on_edge.retain(|_, v| (*v as usize) < mark);
            report.non_simple.push(fi);
            faces.push(f);
            face_labels.push(keep_label);
            source_face.push(fi);
            continue;
        }
        report.split_faces.push(fi);
        for (t, l) in new_faces {
            faces.push(t);
            face_labels.push(l);
            source_face.push(fi);
        }
    }
    report.new_vertices = b.positions.len() - mesh.vertex_count();
    let out = Mesh::new(b.positions, b.normals, b.uvs, faces)?;
    Ok(RemeshResult {
        mesh: out,
        face_labels,
        source_face,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct SeamSplit {
    pub mesh: Mesh,
    /// Label of the faces around each output vertex.
    pub vertex_labels: Vec<u32>,
    /// Input vertex each output vertex was copied from.
    pub source_vertex: Vec<usize>,
}

/// Duplicates vertices shared by faces of different labels, so that each
/// label region owns its own copy and per-vertex attributes can jump across
/// the boundary. The first label met (in face order) keeps the original index.
pub fn split_seams(mesh: &Mesh, face_labels: &[u32]) -> Result<SeamSplit, RemeshError> {
    if face_labels.len() != mesh.face_count() {
        return Err(RemeshError::Size(format!(
            "{} face labels for {} faces",
            face_labels.len(),
            mesh.face_count()
        )));
    }
    let mut positions = mesh.positions().to_vec();
    let mut normals = mesh.normals().to_vec();
    let mut uvs = mesh.uvs().to_vec();
    let mut vertex_labels: Vec<Option<u32>> = vec![None; mesh.vertex_count()];
    let mut source_vertex: Vec<usize> = (0..mesh.vertex_count()).collect();
    let mut copies: HashMap<(u32, u32), u32> = HashMap::new();
    let mut faces = Vec::with_capacity(mesh.face_count());
    for (f, &label) in mesh.faces().iter().zip(face_labels) {
        let mut tri = *f;
        for v in tri.iter_mut() {
            let vi = *v as usize;
            match vertex_labels[vi] {
                None => vertex_labels[vi] = Some(label),
                Some(l) if l == label => {}
                Some(_) => {
                    *v = *copies.entry((*v, label)).or_insert_with(|| {
                        positions.push(mesh.positions()[vi]);
                        normals.push(mesh.normals()[vi]);
                        uvs.push(mesh.uvs()[vi]);
                        vertex_labels.push(Some(label));
                        source_vertex.push(vi);
                        (positions.len() - 1) as u32
                    });
                }
            }
        }
        faces.push(tri);
    }
    let vertex_labels = vertex_labels.into_iter().map(|l| l.unwrap_or(0)).collect();
    Ok(SeamSplit {
        mesh: Mesh::new(positions, normals, uvs, faces)?,
        vertex_labels,
        source_vertex,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::plane;

    fn halves(n: u32) -> LabelMap {
        let labels = (0..n * n).map(|i| u32::from(i % n >= n / 2)).collect();
        LabelMap::new(n, n, labels, 2).unwrap()
    }

    fn uv_area(m: &Mesh) -> f64 {
        (0..m.face_count()).map(|f| m.face_uv_area(f)).sum()
    }

    /// Every output face lies inside one superpixel, checked at interior sample points.
    fn single_label(res: &RemeshResult, labels: &LabelMap) -> bool {
        let m = &res.mesh;
        (0..m.face_count()).all(|fi| {
            if res.report.non_simple.contains(&res.source_face[fi]) {
                return true;
            }
            let uv = m.faces()[fi].map(|v| m.uvs()[v as usize]);
            let mut ok = true;
            for i in 1..8 {
                for j in 1..8 - i {
                    let (a, b) = (i as f64 / 8.0, j as f64 / 8.0);
                    let p = uv[0] * (1.0 - a - b) + uv[1] * a + uv[2] * b;
                    ok &= labels.at_uv(&p) == res.face_labels[fi];
                }
            }
            ok
        })
    }

    #[test]
    fn single_label_mesh_is_unchanged() {
        let mesh = plane(2.0, 4).unwrap();
        let labels = LabelMap::new(8, 8, vec![0; 64], 1).unwrap();
        let res = remesh(&mesh, &labels).unwrap();
        assert_eq!(res.mesh, mesh);
        assert!(res.report.split_faces.is_empty());
    }

    #[test]
    fn quad_split_along_label_edge() {
        // one quad, two triangles, labels split at u = 0.5 (not a mesh edge)
        let mesh = plane(2.0, 1).unwrap();
        let labels = halves(16);
        let res = remesh(&mesh, &labels).unwrap();
        assert_eq!(res.report.split_faces.len(), 2);
        assert!(res.mesh.face_count() > mesh.face_count());
        assert!((uv_area(&res.mesh) - uv_area(&mesh)).abs() < 1e-9);
        assert_eq!(&res.mesh.positions()[..4], mesh.positions());
        assert!(single_label(&res, &labels));
        // new vertices all sit on u = 0.5 and are shared by both triangles
        for uv in &res.mesh.uvs()[4..] {
            assert!((uv.x - 0.5).abs() < 1e-12);
        }
        assert_eq!(res.report.new_vertices, 3);
    }

    #[test]
    fn irregular_labels_on_a_grid() {
        let n = 32;
        // a disc of label 1 in a field of label 0
        let labels: Vec<u32> = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as f64 + 0.5, (i / n) as f64 + 0.5);
                u32::from((x - 13.0).powi(2) + (y - 17.0).powi(2) < 64.0)
            })
            .collect();
        let labels = LabelMap::new(n, n, labels, 2).unwrap();
        let mesh = plane(2.0, 3).unwrap();
        let res = remesh(&mesh, &labels).unwrap();
        assert!((uv_area(&res.mesh) - uv_area(&mesh)).abs() < 1e-9);
        assert!(res.mesh.face_count() >= mesh.face_count());
        assert!(single_label(&res, &labels));
        assert!(!res.report.split_faces.is_empty());
        // all positions stay on the plane
        assert!(res.mesh.positions().iter().all(|p| p.z == 0.0));
    }

    #[test]
    fn enclosed_region_is_reported() {
        // a 2x2 island strictly inside one big triangle
        let n = 32;
        let labels: Vec<u32> = (0..n * n)
            .map(|i| u32::from((20..22).contains(&(i % n)) && (4..6).contains(&(i / n))))
            .collect();
        let labels = LabelMap::new(n, n, labels, 2).unwrap();
        let mesh = plane(2.0, 1).unwrap();
        let res = remesh(&mesh, &labels).unwrap();
        assert_eq!(res.report.non_simple.len(), 1);
        assert_eq!(res.mesh.face_count(), 2);
    }

    #[test]
    fn seams_duplicate_boundary_vertices() {
        let mesh = plane(2.0, 1).unwrap();
        let res = remesh(&mesh, &halves(16)).unwrap();
        let seams = split_seams(&res.mesh, &res.face_labels).unwrap();
        assert_eq!(seams.mesh.face_count(), res.mesh.face_count());
        // three vertices on the cut, each now owned twice
        assert_eq!(seams.mesh.vertex_count(), res.mesh.vertex_count() + 3);
        for (f, &l) in seams.mesh.faces().iter().zip(&res.face_labels) {
            for &v in f {
                assert_eq!(seams.vertex_labels[v as usize], l);
            }
        }
    }
}
