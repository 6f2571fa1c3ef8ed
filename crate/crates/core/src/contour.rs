//! Level sets of grid functions: marching squares in 2D, marching
//! tetrahedra (six Kuhn tetrahedra per cell) in 3D.

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use crate::grid::ScalarGrid;
use crate::{Error, Real, Result};

/// Polyline segments (2D) or triangles (3D) with shared vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Contour<T> {
    pub level: T,
    pub vertices: Vec<Vec<T>>,
    /// Index pairs in 2D, index triples in 3D.
    pub cells: Vec<Vec<usize>>,
}

impl<T: Real> Contour<T> {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Rows `kind,id,x0,..`: vertices (kind `v`) with coordinates, then
    /// cells (kind `e` or `t`) with vertex indices.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.vertices.first().map_or(2, Vec::len);
        let mut header: Vec<String> = vec!["kind".into(), "id".into()];
        header.extend((0..d).map(|k| format!("x{k}")));
        writeln!(w, "{}", header.join(","))?;
        for (i, v) in self.vertices.iter().enumerate() {
            let coords: Vec<String> = v.iter().map(|c| format!("{c}")).collect();
            writeln!(w, "v,{i},{}", coords.join(","))?;
        }
        let tag = if d == 2 { "e" } else { "t" };
        for (i, c) in self.cells.iter().enumerate() {
            let mut ids: Vec<String> = c.iter().map(|j| j.to_string()).collect();
            ids.resize(d, String::new());
            writeln!(w, "{tag},{i},{}", ids.join(","))?;
        }
        Ok(())
    }
}

struct Builder<'a, T> {
    grid: &'a ScalarGrid<T>,
    level: T,
    vertices: Vec<Vec<T>>,
    index: HashMap<(usize, usize), usize>,
}

impl<'a, T: Real> Builder<'a, T> {
    fn crosses(&self, a: usize, b: usize) -> bool {
        (self.grid.values[a] < self.level) != (self.grid.values[b] < self.level)
    }

    /// Vertex on the grid edge `a–b` by linear interpolation.
    fn vertex(&mut self, a: usize, b: usize) -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let (va, vb) = (self.grid.values[a], self.grid.values[b]);
        let t = (self.level - va) / (vb - va);
        let pa = self.grid.spec.node(a);
        let pb = self.grid.spec.node(b);
        let p: Vec<T> = pa.iter().zip(&pb).map(|(&x, &y)| x + t * (y - x)).collect();
        let i = self.vertices.len();
        self.vertices.push(p);
        self.index.insert(key, i);
        i
    }
}

/// Level set `{u = level}` of a 2D or 3D grid function.
pub fn extract<T: Real>(grid: &ScalarGrid<T>, level: T) -> Result<Contour<T>> {
    match grid.dim() {
        2 => Ok(marching_squares(grid, level)),
        3 => Ok(marching_tetrahedra(grid, level)),
        d => Err(Error::invalid(format!(
            "contours need a 2D or 3D grid, got {d}D"
        ))),
    }
}

fn marching_squares<T: Real>(grid: &ScalarGrid<T>, level: T) -> Contour<T> {
    let spec = &grid.spec;
    let mut b = Builder {
        grid,
        level,
        vertices: Vec::new(),
        index: HashMap::new(),
    };
    let mut cells = Vec::new();
    for j in 0..spec.res[1] - 1 {
        for i in 0..spec.res[0] - 1 {
            // Corners in cyclic order.
            let c = [
                spec.flat_index(&[i, j]),
                spec.flat_index(&[i + 1, j]),
                spec.flat_index(&[i + 1, j + 1]),
                spec.flat_index(&[i, j + 1]),
            ];
            let edges: Vec<(usize, usize)> = (0..4)
                .map(|e| (c[e], c[(e + 1) % 4]))
                .filter(|&(a, z)| b.crosses(a, z))
                .collect();
            match edges.len() {
                2 => {
                    let p = b.vertex(edges[0].0, edges[0].1);
                    let q = b.vertex(edges[1].0, edges[1].1);
                    cells.push(vec![p, q]);
                }
                4 => {
                    // Saddle: resolve by the cell average.
                    let mean = c.iter().map(|&k| grid.values[k]).sum::<T>() / T::lit(4.0);
                    let first_below = grid.values[c[0]] < level;
                    // Center on the c0/c2 side: cut off corners c1 and c3.
                    let pairs = if (mean < level) == first_below {
                        [(0, 1), (2, 3)]
                    } else {
                        [(3, 0), (1, 2)]
                    };
                    for (x, y) in pairs {
                        let p = b.vertex(edges[x].0, edges[x].1);
                        let q = b.vertex(edges[y].0, edges[y].1);
                        cells.push(vec![p, q]);
                    }
                }
                _ => {}
            }
        }
    }
    Contour {
        level,
        vertices: b.vertices,
        cells,
    }
}

fn marching_tetrahedra<T: Real>(grid: &ScalarGrid<T>, level: T) -> Contour<T> {
    let spec = &grid.spec;
    let mut b = Builder {
        grid,
        level,
        vertices: Vec::new(),
        index: HashMap::new(),
    };
    let mut cells = Vec::new();
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    for k in 0..spec.res[2] - 1 {
        for j in 0..spec.res[1] - 1 {
            for i in 0..spec.res[0] - 1 {
                for perm in perms {
                    let mut idx = [i, j, k];
                    let mut tet = [0usize; 4];
                    tet[0] = spec.flat_index(&idx);
                    for (s, &axis) in perm.iter().enumerate() {
                        idx[axis] += 1;
                        tet[s + 1] = spec.flat_index(&idx);
                    }
                    let below: Vec<usize> = tet
                        .iter()
                        .copied()
                        .filter(|&v| grid.values[v] < level)
                        .collect();
                    let above: Vec<usize> = tet
                        .iter()
                        .copied()
                        .filter(|&v| grid.values[v] >= level)
                        .collect();
                    match (below.len(), above.len()) {
                        (1, 3) | (3, 1) => {
                            let (lone, rest) = if below.len() == 1 {
                                (below[0], above)
                            } else {
                                (above[0], below)
                            };
                            let t: Vec<usize> = rest.iter().map(|&r| b.vertex(lone, r)).collect();
                            cells.push(t);
                        }
                        (2, 2) => {
                            let p = b.vertex(below[0], above[0]);
                            let q = b.vertex(below[0], above[1]);
                            let r = b.vertex(below[1], above[1]);
                            let s = b.vertex(below[1], above[0]);
                            cells.push(vec![p, q, r]);
                            cells.push(vec![p, r, s]);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    Contour {
        level,
        vertices: b.vertices,
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn circle_level_set() {
        let spec = GridSpec::<f64>::cube(2, -2.0, 2.0, 81).unwrap();
        let g = ScalarGrid::from_fn(spec, |x| x[0] * x[0] + x[1] * x[1]).unwrap();
        let c = extract(&g, 1.0).unwrap();
        assert!(!c.is_empty());
        for v in &c.vertices {
            let r = (v[0] * v[0] + v[1] * v[1]).sqrt();
            assert!((r - 1.0).abs() < 0.01, "{r}");
        }
        // Closed curve: every vertex has two incident segments.
        let mut deg = vec![0; c.vertices.len()];
        for e in &c.cells {
            deg[e[0]] += 1;
            deg[e[1]] += 1;
        }
        assert!(deg.iter().all(|&d| d == 2));
    }

    #[test]
    fn sphere_level_set() {
        let spec = GridSpec::<f64>::cube(3, -1.5, 1.5, 17).unwrap();
        let g = ScalarGrid::from_fn(spec, |x| x.iter().map(|v| v * v).sum::<f64>()).unwrap();
        let c = extract(&g, 1.0).unwrap();
        assert!(c.cells.len() > 50);
        for v in &c.vertices {
            let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!((r - 1.0).abs() < 0.05);
        }
    }
}
