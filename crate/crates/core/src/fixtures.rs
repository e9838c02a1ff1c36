//! Procedural test shapes used by the tests, the CLI `fixture` command and
//! the browser demo.

use std::collections::HashMap;

use rand::Rng;

use crate::mesh::{TriangleMesh, Vec3};
use crate::reconstruct::marching_cubes_field;

/// Axis-aligned box with outward-facing triangles.
pub fn box_mesh(lo: Vec3, hi: Vec3) -> TriangleMesh {
    let v: Vec<Vec3> = (0..8)
        .map(|c| {
            Vec3::new(
                if c & 1 == 0 { lo.x } else { hi.x },
                if c & 2 == 0 { lo.y } else { hi.y },
                if c & 4 == 0 { lo.z } else { hi.z },
            )
        })
        .collect();
    let quads = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let mut tris = Vec::with_capacity(12);
    for q in quads {
        tris.push([q[0], q[1], q[2]]);
        tris.push([q[0], q[2], q[3]]);
    }
    TriangleMesh::new(v, tris).expect("valid box")
}

/// Subdivided icosahedron projected onto a sphere of the given radius.
/// `subdivisions = n` yields `20 * 4^n` triangles.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut tris: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    let verts = verts.into_iter().map(|v| v * radius).collect();
    TriangleMesh::new(verts, tris).expect("valid icosphere")
}

/// Torus around the z axis.
pub fn torus(major: f64, minor: f64, segments_major: usize, segments_minor: usize) -> TriangleMesh {
    let mut verts = Vec::with_capacity(segments_major * segments_minor);
    for i in 0..segments_major {
        let u = std::f64::consts::TAU * i as f64 / segments_major as f64;
        for j in 0..segments_minor {
            let v = std::f64::consts::TAU * j as f64 / segments_minor as f64;
            let rho = major + minor * v.cos();
            verts.push(Vec3::new(rho * u.cos(), rho * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % segments_major) * segments_minor + (j % segments_minor)) as u32;
    let mut tris = Vec::with_capacity(2 * segments_major * segments_minor);
    for i in 0..segments_major {
        for j in 0..segments_minor {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    TriangleMesh::new(verts, tris).expect("valid torus")
}

/// Ball of radius 0.9 with two flared pockets, one opening towards `+z` and
/// one towards `+x`. Neither pocket can be seen from the other's axis, so the
/// shape needs two DHF axes.
pub fn double_pocket(resolution: usize) -> TriangleMesh {
    fn pocket(p: &Vec3, axis: &Vec3) -> f64 {
        // Positive outside the flared pocket (floor at 0.35, radius 0.2 + 15 deg flare).
        let a = p.dot(axis);
        let rho = (p - axis * a).norm();
        let floor = 0.35;
        let wall = rho - (0.2 + (a - floor) * 15f64.to_radians().tan());
        (floor - a).max(wall)
    }
    let n = resolution.max(8);
    let spacing = 2.0 / (n - 1) as f64;
    let origin = Vec3::repeat(-1.0);
    let mut values = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let p = origin + Vec3::new(i as f64, j as f64, k as f64) * spacing;
                let ball = 0.9 - p.norm();
                values.push(ball.min(pocket(&p, &Vec3::z())).min(pocket(&p, &Vec3::x())));
            }
        }
    }
    marching_cubes_field(&values, [n, n, n], origin, spacing, 0.0).expect("non-empty field")
}

/// A closed cube with a smaller closed cube floating inside it.
pub fn nested_cubes() -> TriangleMesh {
    TriangleMesh::merge(&[
        box_mesh(Vec3::repeat(-0.9), Vec3::repeat(0.9)),
        box_mesh(Vec3::repeat(-0.3), Vec3::repeat(0.3)),
    ])
    .expect("non-empty")
}

/// Random small triangles in `[-1, 1]^3`.
pub fn random_soup<R: Rng>(rng: &mut R, count: usize) -> TriangleMesh {
    let mut verts = Vec::with_capacity(3 * count);
    let mut tris = Vec::with_capacity(count);
    for t in 0..count {
        let c = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        for _ in 0..3 {
            verts.push(
                c + Vec3::new(
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.3..0.3),
                ),
            );
        }
        let b = 3 * t as u32;
        tris.push([b, b + 1, b + 2]);
    }
    TriangleMesh::new(verts, tris).expect("non-empty")
}

/// Named fixtures. Sizes are chosen to sit inside the normalized cube.
pub fn by_name(name: &str) -> Option<TriangleMesh> {
    Some(match name {
        "sphere" => icosphere(0.95, 4),
        "sphere-fine" => icosphere(0.95, 7),
        "torus" => torus(0.6, 0.3, 96, 48),
        "double-pocket" => double_pocket(40),
        "box" => box_mesh(Vec3::repeat(-0.5), Vec3::repeat(0.5)),
        "nested-cubes" => nested_cubes(),
        _ => return None,
    })
}

pub const NAMES: &[&str] = &["sphere", "sphere-fine", "torus", "double-pocket", "box", "nested-cubes"];
