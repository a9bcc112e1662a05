//! Triangle meshes and the procedural shapes shipped with the crate.

use crate::geometry::Vec3;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        count: usize,
    },
    #[error("vertex {0} has non-finite coordinates")]
    NonFiniteVertex(usize),
}

/// Vertices in the object frame (meters) and 0-based triangle indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(MeshError::NonFiniteVertex(i));
        }
        let count = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= count) {
                return Err(MeshError::IndexOutOfRange {
                    triangle: t,
                    index,
                    count,
                });
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Same topology with every vertex multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| v * factor).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Axis-aligned cube centered at the origin.
    pub fn cube(edge: f64) -> Mesh {
        let h = 0.5 * edge;
        let vertices = (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 == 0 { -h } else { h },
                    if i & 2 == 0 { -h } else { h },
                    if i & 4 == 0 { -h } else { h },
                )
            })
            .collect();
        let triangles = vec![
            [0, 2, 1],
            [1, 2, 3],
            [4, 5, 6],
            [5, 7, 6],
            [0, 1, 4],
            [1, 5, 4],
            [2, 6, 3],
            [3, 6, 7],
            [0, 4, 2],
            [2, 4, 6],
            [1, 3, 5],
            [3, 7, 5],
        ];
        Mesh {
            vertices,
            triangles,
        }
    }

    /// Rectangle in the object z = 0 plane. Under any pose whose rotation is
    /// about the optical axis it is fronto-parallel.
    pub fn quad(width: f64, height: f64) -> Mesh {
        let (hw, hh) = (0.5 * width, 0.5 * height);
        Mesh {
            vertices: vec![
                Vec3::new(-hw, -hh, 0.0),
                Vec3::new(hw, -hh, 0.0),
                Vec3::new(hw, hh, 0.0),
                Vec3::new(-hw, hh, 0.0),
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        }
    }

    /// Icosahedron refined by `subdivisions` rounds of midpoint splitting,
    /// with vertices pushed onto the sphere of the given radius.
    pub fn icosphere(radius: f64, subdivisions: u32) -> Mesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vec3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut triangles: Vec<[usize; 3]> = vec![
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
            let mut midpoints = std::collections::BTreeMap::new();
            let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
                *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                    vertices.len() - 1
                })
            };
            triangles = triangles
                .iter()
                .flat_map(|&[a, b, c]| {
                    let ab = midpoint(a, b, &mut vertices);
                    let bc = midpoint(b, c, &mut vertices);
                    let ca = midpoint(c, a, &mut vertices);
                    [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
                })
                .collect();
        }
        Mesh {
            vertices: vertices.into_iter().map(|v| v * radius).collect(),
            triangles,
        }
    }

    /// L-shaped bracket: two orthogonal rectangular plates sharing an edge,
    /// centered roughly on the origin. `size` is the long edge length.
    pub fn l_bracket(size: f64) -> Mesh {
        let s = size;
        let th = 0.2 * s;
        let base = cuboid(Vec3::new(-0.5 * s, -0.5 * s, -0.25 * s), Vec3::new(0.5 * s, -0.5 * s + th, 0.25 * s));
        let upright = cuboid(Vec3::new(-0.5 * s, -0.5 * s + th, -0.25 * s), Vec3::new(-0.5 * s + th, 0.5 * s, 0.25 * s));
        let offset = base.vertices.len();
        let mut vertices = base.vertices;
        vertices.extend(upright.vertices);
        let mut triangles = base.triangles;
        triangles.extend(
            upright
                .triangles
                .iter()
                .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
        );
        Mesh {
            vertices,
            triangles,
        }
    }

    /// Looks up one of the procedural meshes by name, at its default size.
    pub fn builtin(name: &str) -> Option<Mesh> {
        match name {
            "cube" => Some(Mesh::cube(0.2)),
            "quad" => Some(Mesh::quad(0.3, 0.2)),
            "icosphere" => Some(Mesh::icosphere(0.12, 1)),
            "lbracket" | "l-bracket" => Some(Mesh::l_bracket(0.2)),
            _ => None,
        }
    }

    pub const BUILTIN_NAMES: [&'static str; 4] = ["cube", "quad", "icosphere", "lbracket"];
}

fn cuboid(lo: Vec3, hi: Vec3) -> Mesh {
    let unit = Mesh::cube(1.0);
    let center = (lo + hi) * 0.5;
    let extent = hi - lo;
    Mesh {
        vertices: unit
            .vertices
            .iter()
            .map(|v| center + v.component_mul(&extent))
            .collect(),
        triangles: unit.triangles,
    }
}
