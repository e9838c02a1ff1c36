//! Watertight ray/triangle intersection and a bounding volume hierarchy.
//!
//! The triangle test follows the shear-and-scale formulation of Woop, Benthin
//! and Wald: all vertices are transformed into a ray space where the ray is
//! the `+z` axis, and the three 2D edge functions decide coverage. Edge
//! functions of a shared edge are exact negations of each other, so a
//! top-left style ownership rule on zero values makes a ray through a shared
//! edge report exactly one of the two triangles. A ray coplanar with a
//! triangle never hits it.

use crate::mesh::{TriangleMesh, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    origin: Vec3,
    direction: Vec3,
}

impl Ray {
    /// Normalizes `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Ray {
            origin,
            direction: direction.normalize(),
        }
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub triangle: usize,
    pub t: f64,
}

/// Per-ray constants of the watertight test.
#[derive(Clone, Copy, Debug)]
pub struct RaySetup {
    origin: Vec3,
    kx: usize,
    ky: usize,
    kz: usize,
    sx: f64,
    sy: f64,
    sz: f64,
    inv_dir: Vec3,
}

impl RaySetup {
    pub fn new(ray: &Ray) -> Self {
        let d = ray.direction;
        let kz = d.iamax();
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if d[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        RaySetup {
            origin: ray.origin,
            kx,
            ky,
            kz,
            sx: d[kx] / d[kz],
            sy: d[ky] / d[kz],
            sz: 1.0 / d[kz],
            inv_dir: Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z),
        }
    }

    #[inline]
    fn shear(&self, p: &Vec3) -> (f64, f64, f64) {
        let q = p - self.origin;
        (
            q[self.kx] - self.sx * q[self.kz],
            q[self.ky] - self.sy * q[self.kz],
            self.sz * q[self.kz],
        )
    }
}

#[inline]
fn owns_edge(sign: f64, dx: f64, dy: f64) -> bool {
    let (ex, ey) = (sign * dx, sign * dy);
    ey > 0.0 || (ey == 0.0 && ex > 0.0)
}

/// Watertight ray/triangle test. Returns the ray parameter of the hit if it
/// lies strictly inside `(t_min, t_max)`.
#[inline]
pub fn intersect_triangle(setup: &RaySetup, tri: &[Vec3; 3], t_min: f64, t_max: f64) -> Option<f64> {
    let (ax, ay, az) = setup.shear(&tri[0]);
    let (bx, by, bz) = setup.shear(&tri[1]);
    let (cx, cy, cz) = setup.shear(&tri[2]);
    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;
    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + v + w;
    if det == 0.0 {
        return None;
    }
    let sign = det.signum();
    // u belongs to edge b->c, v to c->a, w to a->b.
    if u == 0.0 && !owns_edge(sign, cx - bx, cy - by) {
        return None;
    }
    if v == 0.0 && !owns_edge(sign, ax - cx, ay - cy) {
        return None;
    }
    if w == 0.0 && !owns_edge(sign, bx - ax, by - ay) {
        return None;
    }
    let t = (u * az + v * bz + w * cz) / det;
    (t > t_min && t < t_max).then_some(t)
}

/// Nearest hit over every triangle; ties go to the lowest triangle id.
pub fn intersect_brute_force(mesh: &TriangleMesh, ray: &Ray, t_min: f64, t_max: f64) -> Option<Hit> {
    let setup = RaySetup::new(ray);
    let mut best: Option<Hit> = None;
    for t in 0..mesh.num_triangles() {
        if let Some(d) = intersect_triangle(&setup, &mesh.triangle(t), t_min, t_max) {
            if best.is_none_or(|b| d < b.t) {
                best = Some(Hit { triangle: t, t: d });
            }
        }
    }
    best
}

/// Every hit over every triangle, in triangle order.
pub fn intersect_all_brute_force(mesh: &TriangleMesh, ray: &Ray, t_min: f64, t_max: f64) -> Vec<Hit> {
    let setup = RaySetup::new(ray);
    (0..mesh.num_triangles())
        .filter_map(|t| intersect_triangle(&setup, &mesh.triangle(t), t_min, t_max).map(|d| Hit { triangle: t, t: d }))
        .collect()
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: Vec3::repeat(f64::INFINITY),
            hi: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    fn merge(&mut self, o: &Aabb) {
        self.lo = self.lo.inf(&o.lo);
        self.hi = self.hi.sup(&o.hi);
    }

    /// Slightly inflated so rays lying exactly in a face plane still enter.
    fn padded(mut self) -> Self {
        let pad = 1e-9 * (self.hi - self.lo).amax().max(1.0);
        self.lo -= Vec3::repeat(pad);
        self.hi += Vec3::repeat(pad);
        self
    }

    #[inline]
    fn hit(&self, setup: &RaySetup, t_min: f64, t_max: f64) -> bool {
        let mut t0 = t_min;
        let mut t1 = t_max;
        for k in 0..3 {
            let inv = setup.inv_dir[k];
            let a = (self.lo[k] - setup.origin[k]) * inv;
            let b = (self.hi[k] - setup.origin[k]) * inv;
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            // NaN (0 * inf) leaves the interval unchanged.
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
        }
        t0 <= t1
    }
}

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: first primitive in `order`. Interior: index of the right child
    /// (the left child is `self + 1`).
    index: u32,
    count: u32,
}

const LEAF_SIZE: usize = 4;

/// Binary BVH over the triangles of a mesh. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    triangles: Vec<[Vec3; 3]>,
}

impl Bvh {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let triangles: Vec<[Vec3; 3]> = (0..mesh.num_triangles()).map(|t| mesh.triangle(t)).collect();
        let centroids: Vec<Vec3> = triangles.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        build(&triangles, &centroids, &mut order, 0, &mut nodes);
        Bvh {
            nodes,
            order,
            triangles,
        }
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    fn traverse(&self, setup: &RaySetup, t_min: f64, mut t_max: f64, mut visit: impl FnMut(usize, f64) -> Visit) {
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if !node.bounds.hit(setup, t_min, t_max) {
                continue;
            }
            if node.count > 0 {
                let start = node.index as usize;
                for &prim in &self.order[start..start + node.count as usize] {
                    let prim = prim as usize;
                    if let Some(t) = intersect_triangle(setup, &self.triangles[prim], t_min, t_max) {
                        match visit(prim, t) {
                            Visit::Continue => {}
                            // next_up keeps equal-t candidates for the lowest-id tie-break.
                            Visit::Shrink => t_max = t_max.min(t).next_up(),
                            Visit::Stop => return,
                        }
                    }
                }
            } else {
                let here = stack[sp] as usize;
                stack[sp] = node.index;
                stack[sp + 1] = here as u32 + 1;
                sp += 2;
            }
        }
    }

    /// Nearest hit with `t` in `(t_min, t_max)`; ties go to the lowest triangle id.
    pub fn intersect(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<Hit> {
        let setup = RaySetup::new(ray);
        let mut best: Option<Hit> = None;
        self.traverse(&setup, t_min, t_max, |tri, t| {
            let better = match best {
                None => true,
                Some(b) => t < b.t || (t == b.t && tri < b.triangle),
            };
            if better {
                best = Some(Hit { triangle: tri, t });
            }
            Visit::Shrink
        });
        best
    }

    /// True if any triangle is hit in `(t_min, t_max)`.
    pub fn occluded(&self, ray: &Ray, t_min: f64, t_max: f64) -> bool {
        let setup = RaySetup::new(ray);
        let mut any = false;
        self.traverse(&setup, t_min, t_max, |_, _| {
            any = true;
            Visit::Stop
        });
        any
    }

    /// Appends every hit in `(t_min, t_max)` to `out` (unordered).
    pub fn intersect_all(&self, ray: &Ray, t_min: f64, t_max: f64, out: &mut Vec<Hit>) {
        let setup = RaySetup::new(ray);
        self.traverse(&setup, t_min, t_max, |triangle, t| {
            out.push(Hit { triangle, t });
            Visit::Continue
        });
    }

    /// Number of surface crossings along the ray; used for parity tests.
    pub fn count_hits(&self, ray: &Ray, t_min: f64, t_max: f64) -> usize {
        let setup = RaySetup::new(ray);
        let mut n = 0;
        self.traverse(&setup, t_min, t_max, |_, _| {
            n += 1;
            Visit::Continue
        });
        n
    }
}

enum Visit {
    Continue,
    Shrink,
    Stop,
}

fn build(tris: &[[Vec3; 3]], centroids: &[Vec3], order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &p in order.iter() {
        for v in &tris[p as usize] {
            bounds.grow(v);
        }
        cbounds.grow(&centroids[p as usize]);
    }
    let me = nodes.len();
    nodes.push(Node {
        bounds: bounds.padded(),
        index: offset as u32,
        count: order.len() as u32,
    });
    let extent = cbounds.hi - cbounds.lo;
    let axis = extent.imax();
    if order.len() <= LEAF_SIZE || extent[axis].partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return me;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |a, b| {
        centroids[*a as usize][axis].total_cmp(&centroids[*b as usize][axis])
    });
    let (left, right) = order.split_at_mut(mid);
    build(tris, centroids, left, offset, nodes);
    let right_index = build(tris, centroids, right, offset + mid, nodes);
    let mut merged = nodes[me + 1].bounds;
    merged.merge(&nodes[right_index].bounds);
    nodes[me] = Node {
        bounds: merged,
        index: right_index as u32,
        count: 0,
    };
    me
}
